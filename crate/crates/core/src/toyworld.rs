//! Discrete verification worlds with exact conditional laws.
//!
//! A toy world has a binary covariate, binary exposure, binary confounder,
//! and two binary mediators (four joint values). Every conditional is an
//! explicit table, so interventional and natural effects can be computed two
//! independent ways: by the closed-form summation identities, and by taking
//! exact expectations of the weighting estimators' row terms over the joint
//! law. The test suites require the two routes to agree to 1e-10.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::effects::{NaturalRowNuisance, RowNuisance};

pub const N_M: usize = 4;

/// Fully specified discrete world.
#[derive(Debug, Clone)]
pub struct ToyWorld {
    /// P(X = 1).
    pub p_x1: f64,
    /// P(Z = 1 | x), indexed by x.
    pub p_z_given_x: [f64; 2],
    /// P(L = 1 | z, x), indexed [z][x].
    pub p_l_given_zx: [[f64; 2]; 2],
    /// P(M = m | z, l, x), indexed [z][l][x][m]; sums to 1 over m.
    pub p_m_given_zlx: [[[[f64; N_M]; 2]; 2]; 2],
    /// E(Y | z, l, m, x), indexed [z][l][x][m].
    pub e_y: [[[[f64; N_M]; 2]; 2]; 2],
}

impl ToyWorld {
    /// Random world with all probabilities well inside (0, 1).
    pub fn random(rng: &mut ChaCha8Rng) -> ToyWorld {
        let mut draw = |lo: f64, hi: f64| rng.random_range(lo..hi);
        let p_x1 = draw(0.25, 0.75);
        let p_z_given_x = [draw(0.25, 0.75), draw(0.25, 0.75)];
        let mut p_l_given_zx = [[0.0; 2]; 2];
        let mut p_m_given_zlx = [[[[0.0; N_M]; 2]; 2]; 2];
        let mut e_y = [[[[0.0; N_M]; 2]; 2]; 2];
        for z in 0..2 {
            for x in 0..2 {
                p_l_given_zx[z][x] = draw(0.25, 0.75);
            }
        }
        for z in 0..2 {
            for l in 0..2 {
                for x in 0..2 {
                    let raw: Vec<f64> = (0..N_M).map(|_| draw(0.15, 1.0)).collect();
                    let total: f64 = raw.iter().sum();
                    for m in 0..N_M {
                        p_m_given_zlx[z][l][x][m] = raw[m] / total;
                    }
                    for m in 0..N_M {
                        e_y[z][l][x][m] = draw(0.15, 0.85);
                    }
                }
            }
        }
        ToyWorld {
            p_x1,
            p_z_given_x,
            p_l_given_zx,
            p_m_given_zlx,
            e_y,
        }
    }

    /// Random world where the confounder influences nothing: the mediator
    /// law and the outcome do not depend on it. Interventional and natural
    /// effects coincide here.
    pub fn random_without_confounding(rng: &mut ChaCha8Rng) -> ToyWorld {
        let mut w = ToyWorld::random(rng);
        for z in 0..2 {
            for x in 0..2 {
                let m_dist = w.p_m_given_zlx[z][0][x];
                w.p_m_given_zlx[z][1][x] = m_dist;
                for m in 0..N_M {
                    let val = w.e_y[z][0][x][m];
                    w.e_y[z][1][x][m] = val;
                }
            }
        }
        w
    }

    pub fn p_x(&self, x: usize) -> f64 {
        if x == 1 {
            self.p_x1
        } else {
            1.0 - self.p_x1
        }
    }

    pub fn p_z(&self, z: usize, x: usize) -> f64 {
        if z == 1 {
            self.p_z_given_x[x]
        } else {
            1.0 - self.p_z_given_x[x]
        }
    }

    pub fn p_l(&self, l: usize, z: usize, x: usize) -> f64 {
        if l == 1 {
            self.p_l_given_zx[z][x]
        } else {
            1.0 - self.p_l_given_zx[z][x]
        }
    }

    /// P(M = m | z, x), marginalizing the confounder.
    pub fn p_m_given_zx(&self, m: usize, z: usize, x: usize) -> f64 {
        (0..2)
            .map(|l| self.p_m_given_zlx[z][l][x][m] * self.p_l(l, z, x))
            .sum()
    }

    /// P(L = l | z, m, x) by Bayes' rule.
    pub fn p_l_given_zmx(&self, l: usize, z: usize, m: usize, x: usize) -> f64 {
        self.p_m_given_zlx[z][l][x][m] * self.p_l(l, z, x) / self.p_m_given_zx(m, z, x)
    }

    /// E(Y | z, m, x), marginalizing the confounder.
    pub fn e_y_given_zmx(&self, z: usize, m: usize, x: usize) -> f64 {
        (0..2)
            .map(|l| self.e_y[z][l][x][m] * self.p_l_given_zmx(l, z, m, x))
            .sum()
    }

    /// Interventional effects by the summation identities:
    /// the indirect effect weights the exposure-1 outcome surface by the
    /// shift in the mediator law, the direct effect contrasts the outcome
    /// surfaces under the exposure-0 mediator law.
    pub fn interventional_by_summation(&self) -> (f64, f64) {
        let mut iie = 0.0;
        let mut ide = 0.0;
        for x in 0..2 {
            let px = self.p_x(x);
            for l in 0..2 {
                for m in 0..N_M {
                    iie += self.e_y[1][l][x][m]
                        * self.p_l(l, 1, x)
                        * (self.p_m_given_zx(m, 1, x) - self.p_m_given_zx(m, 0, x))
                        * px;
                    ide += (self.e_y[1][l][x][m] * self.p_l(l, 1, x)
                        - self.e_y[0][l][x][m] * self.p_l(l, 0, x))
                        * self.p_m_given_zx(m, 0, x)
                        * px;
                }
            }
        }
        (iie, ide)
    }

    /// Natural effects by the mediation-formula summations.
    pub fn natural_by_summation(&self) -> (f64, f64) {
        let mut nie = 0.0;
        let mut nde = 0.0;
        for x in 0..2 {
            let px = self.p_x(x);
            for m in 0..N_M {
                nie += self.e_y_given_zmx(1, m, x)
                    * (self.p_m_given_zx(m, 1, x) - self.p_m_given_zx(m, 0, x))
                    * px;
                nde += (self.e_y_given_zmx(1, m, x) - self.e_y_given_zmx(0, m, x))
                    * self.p_m_given_zx(m, 0, x)
                    * px;
            }
        }
        (nie, nde)
    }

    /// Enumerates every cell of the observed-data law: exposure value,
    /// outcome expectation, cell probability, and the exact nuisance values
    /// the weighting estimators would use. Feeding these to the estimator
    /// kernels with the cell probabilities as weights evaluates the
    /// weighting identities as exact expectations.
    pub fn enumerate_cells(&self) -> ToyCells {
        let mut z_vals = Vec::new();
        let mut y_vals = Vec::new();
        let mut weights = Vec::new();
        let mut rows = Vec::new();
        let mut natural = Vec::new();
        for x in 0..2 {
            for z in 0..2 {
                for l in 0..2 {
                    for m in 0..N_M {
                        let w = self.p_x(x)
                            * self.p_z(z, x)
                            * self.p_l(l, z, x)
                            * self.p_m_given_zlx[z][l][x][m];
                        z_vals.push(z as f64);
                        y_vals.push(self.e_y[z][l][x][m]);
                        weights.push(w);
                        rows.push(RowNuisance {
                            pz1: self.p_z(1, x),
                            pl_z1x: self.p_l(l, 1, x),
                            pl_z0x: self.p_l(l, 0, x),
                            pl_z1mx: self.p_l_given_zmx(l, 1, m, x),
                            pl_z0mx: self.p_l_given_zmx(l, 0, m, x),
                            ey_z1: self.e_y[1][l][x][m],
                            ey_z0: self.e_y[0][l][x][m],
                        });
                        natural.push(NaturalRowNuisance {
                            pz1: self.p_z(1, x),
                            ey_z1m: self.e_y_given_zmx(1, m, x),
                            ey_z0m: self.e_y_given_zmx(0, m, x),
                        });
                    }
                }
            }
        }
        ToyCells {
            z: z_vals,
            y: y_vals,
            weights,
            interventional: rows,
            natural,
        }
    }
}

/// Flattened cells of a toy world's observed-data law.
pub struct ToyCells {
    pub z: Vec<f64>,
    pub y: Vec<f64>,
    pub weights: Vec<f64>,
    pub interventional: Vec<RowNuisance>,
    pub natural: Vec<NaturalRowNuisance>,
}
