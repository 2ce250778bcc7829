//! L1-penalized logistic outcome model with constrained mediator selection.
//!
//! The outcome model regresses the binary outcome on the exposure, the
//! post-exposure confounder (optional), every mediator, and the baseline
//! covariates. Only mediator coefficients are penalized, and one mediator at
//! a time is exempted from the penalty so that the selected model always
//! contains at least one mediator. The penalty weight for each exemption is
//! tuned by the extended Bayesian information criterion, and the exemption
//! with the best criterion value wins.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::logit;
use crate::matrix::Matrix;
use crate::stats::{bernoulli_loglik_term, expit, ln_choose};
use crate::tabular::MediationDataset;

const COEF_TOL: f64 = 1e-7;
const MAX_SWEEPS: usize = 10_000;
const MAX_RELINEARIZATIONS: usize = 15;
/// Coefficient magnitude at which a fit is declared separated and returned
/// as-is (flagged non-converged). Such fits sit deep in the overfitted tail
/// of the penalty path and never win the information criterion.
const DIVERGENCE_NORM: f64 = 20.0;
const GRID_POINTS: usize = 50;
const GRID_FLOOR: f64 = 0.01;

/// Solution of one penalized fit.
#[derive(Debug, Clone)]
pub struct L1Fit {
    /// Intercept first, then one coefficient per design column.
    pub beta: Vec<f64>,
    pub converged: bool,
    pub sweeps: usize,
    /// Separation or a singular subproblem stopped the fit early.
    pub diverged: bool,
}

/// Smallest penalty for which every penalized coefficient is zero at the
/// optimum: the max absolute score of the penalized columns at the
/// unpenalized-block fit, divided by n.
pub fn lambda_max(columns: &[Vec<f64>], response: &[u8], penalized: &[bool]) -> Result<f64> {
    if penalized.iter().filter(|&&p| p).count() == 0 {
        return Err(Error::Empty("no penalized columns"));
    }
    let n = response.len();
    let base_cols: Vec<Vec<f64>> = columns
        .iter()
        .zip(penalized)
        .filter(|(_, &pen)| !pen)
        .map(|(c, _)| c.clone())
        .collect();
    let base = if base_cols.is_empty() {
        Matrix::zeros(n, 0)
    } else {
        Matrix::from_columns(&base_cols)?
    };
    let fit = logit::fit_logistic(&base, response)?;
    let eta = logit::linear_predictors(&base, &fit.coefficients);

    let mut max_score = 0.0f64;
    for (col, &pen) in columns.iter().zip(penalized) {
        if !pen {
            continue;
        }
        let mut s = 0.0;
        for i in 0..n {
            s += (response[i] as f64 - expit(eta[i])) * col[i];
        }
        max_score = max_score.max(s.abs());
    }
    Ok(max_score / n as f64)
}

/// Minimizes `(1/n) * negative log-likelihood + lambda * sum_{penalized} |beta_k|`
/// by proximal-Newton coordinate descent. The intercept and unpenalized
/// columns carry no penalty. Columns are used as given (no rescaling here).
///
/// Converges when the largest coefficient change across a relinearization
/// cycle falls below 1e-7 and the exact stationarity conditions hold;
/// flagged non-converged after 10^4 coordinate sweeps.
pub fn fit_l1_logistic(
    columns: &[Vec<f64>],
    response: &[u8],
    penalized: &[bool],
    lambda: f64,
    init: Option<&[f64]>,
) -> Result<L1Fit> {
    if lambda < 0.0 {
        return Err(Error::Invalid(format!("lambda must be >= 0, got {lambda}")));
    }
    let n = response.len();
    let nc = columns.len();
    if penalized.len() != nc {
        return Err(Error::Dimension {
            expected: nc,
            found: penalized.len(),
        });
    }
    for c in columns {
        if c.len() != n {
            return Err(Error::Dimension {
                expected: n,
                found: c.len(),
            });
        }
    }
    let nf = n as f64;
    let mut beta = match init {
        Some(b) if b.len() == nc + 1 => b.to_vec(),
        Some(b) => {
            return Err(Error::Dimension {
                expected: nc + 1,
                found: b.len(),
            })
        }
        None => vec![0.0; nc + 1],
    };

    let mut eta = eta_from(columns, &beta, n);
    let mut sweeps = 0usize;
    let mut converged = false;

    let col_at = |k: usize, i: usize| -> f64 {
        if k == 0 {
            1.0
        } else {
            columns[k - 1][i]
        }
    };

    // Scratch for the quadratic subproblem at the current linearization.
    let mut r0 = vec![0.0; n]; // y - p at linearization point
    let mut w = vec![0.0; n];
    let mut deta = vec![0.0; n]; // eta - eta_at_linearization
    let mut rho = vec![0.0; n]; // r0 - w * deta

    let penalized_objective = |beta: &[f64], eta: &[f64]| -> f64 {
        let ll: f64 = eta
            .iter()
            .zip(response)
            .map(|(&e, &y)| crate::stats::bernoulli_loglik_term(e, y as f64))
            .sum();
        let l1: f64 = beta[1..]
            .iter()
            .zip(penalized)
            .filter(|(_, &p)| p)
            .map(|(b, _)| b.abs())
            .sum();
        -ll / nf + lambda * l1
    };
    let mut cur_obj = penalized_objective(&beta, &eta);

    let mut relins = 0usize;
    let mut diverged = false;
    let mut prev_outer_delta = f64::INFINITY;
    'outer: while sweeps < MAX_SWEEPS && relins < MAX_RELINEARIZATIONS {
        relins += 1;
        if beta.iter().any(|b| b.abs() > DIVERGENCE_NORM) {
            diverged = true;
            break;
        }
        // Relinearize.
        for i in 0..n {
            let p = expit(eta[i]);
            r0[i] = response[i] as f64 - p;
            w[i] = (p * (1.0 - p)).max(1e-10);
        }
        // The residuals hold the exact score at the current iterate, so the
        // optimality conditions come for free here.
        if prev_outer_delta < COEF_TOL
            && stationary_scores(columns, penalized, lambda, &beta, &r0, nf)
        {
            converged = true;
            break;
        }
        deta.fill(0.0);
        let beta_at_relin = beta.clone();

        // Active set: the intercept, every unpenalized column, and the
        // penalized columns with nonzero coefficients.
        let mut active: Vec<usize> = (0..=nc)
            .filter(|&k| k == 0 || !penalized[k - 1] || beta[k] != 0.0)
            .collect();

        // Solve the quadratic subproblem by Newton steps on the active set
        // with sign-fixed penalty linearization, shrinking the step at sign
        // crossings and admitting first-order violators between steps.
        // Coordinates that cross to zero stay out for the rest of this
        // subproblem (anti-cycling).
        let mut banned = vec![false; nc + 1];
        let mut inner = 0usize;
        loop {
            inner += 1;
            sweeps += 1;
            if sweeps >= MAX_SWEEPS {
                break 'outer;
            }
            if inner > 8 {
                break;
            }

            for i in 0..n {
                rho[i] = r0[i] - w[i] * deta[i];
            }
            let da = active.len();
            let mut h = vec![0.0; da * da];
            let mut g = vec![0.0; da];
            for i in 0..n {
                for (a, &ka) in active.iter().enumerate() {
                    let xa = col_at(ka, i);
                    g[a] += xa * rho[i];
                    for (b, &kb) in active.iter().enumerate().skip(a) {
                        h[a * da + b] += w[i] * xa * col_at(kb, i);
                    }
                }
            }
            // right-hand side: score minus penalty subgradient at fixed signs
            for (a, &ka) in active.iter().enumerate() {
                g[a] /= nf;
                if ka > 0 && penalized[ka - 1] {
                    let s = if beta[ka] != 0.0 {
                        beta[ka].signum()
                    } else {
                        g[a].signum()
                    };
                    g[a] -= lambda * s;
                }
            }
            for v in h.iter_mut() {
                *v /= nf;
            }
            // tiny ridge keeps near-duplicate active columns solvable
            let ridge = 1e-10 * (0..da).map(|a| h[a * da + a]).fold(1.0f64, f64::max);
            for a in 0..da {
                h[a * da + a] += ridge;
            }
            if logit::solve_spd(&mut h, &mut g, da).is_err() {
                diverged = true;
                break 'outer;
            }

            // Shrink the step so no penalized coefficient crosses zero;
            // crossing coordinates land exactly on zero and deactivate.
            let mut step = 1.0f64;
            let mut crossers: Vec<usize> = Vec::new();
            for (a, &ka) in active.iter().enumerate() {
                if ka > 0 && penalized[ka - 1] && beta[ka] != 0.0 {
                    let new = beta[ka] + g[a];
                    if new * beta[ka] < 0.0 {
                        let t = beta[ka] / (beta[ka] - new);
                        if t < step {
                            step = t;
                            crossers.clear();
                            crossers.push(ka);
                        } else if (t - step).abs() < 1e-15 {
                            crossers.push(ka);
                        }
                    }
                }
            }
            let mut max_delta = 0.0f64;
            for (a, &ka) in active.iter().enumerate() {
                let delta = step * g[a];
                if delta != 0.0 {
                    beta[ka] += delta;
                    if ka == 0 {
                        for de in deta.iter_mut() {
                            *de += delta;
                        }
                    } else {
                        for (de, &x) in deta.iter_mut().zip(&columns[ka - 1]) {
                            *de += delta * x;
                        }
                    }
                    max_delta = max_delta.max(delta.abs());
                }
            }
            for &ka in &crossers {
                beta[ka] = 0.0;
                banned[ka] = true;
            }
            if !crossers.is_empty() {
                active.retain(|&ka| {
                    ka == 0 || !penalized[ka - 1] || beta[ka] != 0.0 || !crossers.contains(&ka)
                });
                continue;
            }

            // Once the active set is stable, admit penalized coordinates
            // violating the first-order condition, then iterate again.
            if max_delta < COEF_TOL * 0.1 || inner > 8 {
                let mut admitted = false;
                for k in 1..=nc {
                    if !penalized[k - 1] || beta[k] != 0.0 || banned[k] || active.contains(&k) {
                        continue;
                    }
                    let col = &columns[k - 1];
                    let mut c = 0.0;
                    for i in 0..n {
                        c += (r0[i] - w[i] * deta[i]) * col[i];
                    }
                    if c.abs() / nf > lambda * (1.0 + 1e-12) + 1e-12 {
                        active.push(k);
                        admitted = true;
                    }
                }
                if !admitted || inner > 8 {
                    break;
                }
            }
        }

        eta = eta_from(columns, &beta, n);

        // Keep the exact penalized objective non-increasing across
        // relinearizations by halving back toward the previous iterate.
        let mut new_obj = penalized_objective(&beta, &eta);
        let mut halvings = 0;
        while new_obj > cur_obj + 1e-12 && halvings < 20 {
            for (b, prev) in beta.iter_mut().zip(&beta_at_relin) {
                *b = 0.5 * (*b + prev);
            }
            eta = eta_from(columns, &beta, n);
            new_obj = penalized_objective(&beta, &eta);
            halvings += 1;
        }
        if new_obj > cur_obj + 1e-12 {
            beta = beta_at_relin;
            eta = eta_from(columns, &beta, n);
            diverged = true;
            break;
        }
        cur_obj = new_obj;

        prev_outer_delta = beta
            .iter()
            .zip(&beta_at_relin)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    }

    if !converged && !diverged {
        eta = eta_from(columns, &beta, n);
        converged = stationary(columns, response, penalized, lambda, &beta, &eta);
    }
    Ok(L1Fit {
        beta,
        converged,
        sweeps,
        diverged,
    })
}

/// Exact first-order conditions at `beta`, with a small numeric margin.
fn stationary(
    columns: &[Vec<f64>],
    response: &[u8],
    penalized: &[bool],
    lambda: f64,
    beta: &[f64],
    eta: &[f64],
) -> bool {
    let residuals: Vec<f64> = eta
        .iter()
        .zip(response)
        .map(|(&e, &y)| y as f64 - expit(e))
        .collect();
    stationary_scores(
        columns,
        penalized,
        lambda,
        beta,
        &residuals,
        response.len() as f64,
    )
}

/// First-order conditions given precomputed residuals `y - p`.
fn stationary_scores(
    columns: &[Vec<f64>],
    penalized: &[bool],
    lambda: f64,
    beta: &[f64],
    residuals: &[f64],
    nf: f64,
) -> bool {
    let margin = 1e-6;
    for k in 0..=columns.len() {
        let mut g = 0.0;
        if k == 0 {
            g = residuals.iter().sum();
        } else {
            for (r, x) in residuals.iter().zip(&columns[k - 1]) {
                g += r * x;
            }
        }
        g /= nf;
        let ok = if k == 0 || !penalized[k - 1] {
            g.abs() <= margin
        } else if beta[k] == 0.0 {
            g.abs() <= lambda + margin
        } else {
            (g - lambda * beta[k].signum()).abs() <= margin
        };
        if !ok {
            return false;
        }
    }
    true
}

#[inline]
fn soft_threshold(c: f64, lambda: f64) -> f64 {
    if c > lambda {
        c - lambda
    } else if c < -lambda {
        c + lambda
    } else {
        0.0
    }
}

fn eta_from(columns: &[Vec<f64>], beta: &[f64], n: usize) -> Vec<f64> {
    let mut eta = vec![beta[0]; n];
    for (k, col) in columns.iter().enumerate() {
        let b = beta[k + 1];
        if b != 0.0 {
            for (e, &x) in eta.iter_mut().zip(col) {
                *e += b * x;
            }
        }
    }
    eta
}

/// Log-likelihood of a fitted coefficient vector on the given design columns.
pub fn penalized_loglik(columns: &[Vec<f64>], response: &[u8], beta: &[f64]) -> f64 {
    let eta = eta_from(columns, beta, response.len());
    eta.iter()
        .zip(response)
        .map(|(&e, &y)| bernoulli_loglik_term(e, y as f64))
        .sum()
}

/// Extended Bayesian information criterion:
/// `-2*loglik + nu*ln(n) + 2*ln C(dim, nu)` where `nu` counts nonzero
/// coefficients excluding the intercept and `dim` is the number of
/// non-intercept coefficients in the model.
pub fn ebic(loglik: f64, nu: usize, n: usize, total_nonintercept_dim: usize) -> f64 {
    -2.0 * loglik + nu as f64 * (n as f64).ln() + 2.0 * ln_choose(total_nonintercept_dim, nu)
}

/// One row of the per-exemption tuning trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EbicTraceRow {
    /// Mediator exempted from the penalty (0-based).
    pub mediator: usize,
    /// Penalty minimizing the criterion along this exemption's path.
    pub lambda: f64,
    pub ebic: f64,
    /// Nonzero coefficients excluding the intercept at that penalty.
    pub nonzero: usize,
}

/// A selected sparse outcome model on the original predictor scale.
///
/// Coefficient layout: intercept, exposure, confounder (when `include_l`),
/// one slot per mediator, then the baseline covariates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SparseOutcomeFit {
    pub beta: Vec<f64>,
    pub include_l: bool,
    pub q: usize,
    pub p: usize,
    /// Mediators with nonzero coefficients (0-based, ascending).
    pub selected_mediators: Vec<usize>,
    /// Winning penalty exemption (0-based mediator index).
    pub winning_index: usize,
    pub winning_lambda: f64,
    pub converged: bool,
    pub ebic_trace: Vec<EbicTraceRow>,
}

impl SparseOutcomeFit {
    #[inline]
    pub fn intercept(&self) -> f64 {
        self.beta[0]
    }

    #[inline]
    pub fn beta_z(&self) -> f64 {
        self.beta[1]
    }

    #[inline]
    pub fn beta_l(&self) -> Option<f64> {
        self.include_l.then(|| self.beta[2])
    }

    #[inline]
    fn m_offset(&self) -> usize {
        2 + usize::from(self.include_l)
    }

    #[inline]
    pub fn beta_m(&self, k: usize) -> f64 {
        self.beta[self.m_offset() + k]
    }

    #[inline]
    pub fn beta_x(&self, j: usize) -> f64 {
        self.beta[self.m_offset() + self.q + j]
    }

    /// Fitted outcome probabilities with the exposure column set to
    /// `z_value`; confounder, mediators, and covariates at observed values.
    pub fn predict(&self, data: &MediationDataset, z_value: f64) -> Vec<f64> {
        let n = data.n();
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let mut eta = self.intercept() + self.beta_z() * z_value;
            if let Some(bl) = self.beta_l() {
                eta += bl * data.l()[i] as f64;
            }
            for &k in &self.selected_mediators {
                eta += self.beta_m(k) * data.m().get(i, k);
            }
            for j in 0..self.p {
                eta += self.beta_x(j) * data.x().get(i, j);
            }
            out.push(expit(eta));
        }
        out
    }
}

struct PathOutcome {
    exempt: usize,
    lambda: f64,
    ebic: f64,
    nonzero: usize,
    beta: Vec<f64>,
    converged: bool,
}

/// Selects the outcome model: for every mediator exemption `j`, fits a
/// 50-point log-spaced penalty path from `lambda_max` down to
/// `0.01*lambda_max` with warm starts, picks the per-path penalty by eBIC,
/// and returns the fit from the exemption with the smallest criterion
/// (ties broken by the smallest mediator index).
///
/// Mediator columns are standardized internally to unit variance so a single
/// penalty is comparable across abundance scales; returned coefficients are
/// on the original scale. With `include_l = false` the confounder column is
/// omitted (natural-effects pipeline).
pub fn select_outcome_model(data: &MediationDataset, include_l: bool) -> Result<SparseOutcomeFit> {
    let n = data.n();
    let q = data.q();
    let p = data.p();
    if n < 10 {
        return Err(Error::Invalid(format!(
            "outcome-model selection needs n >= 10, got {n}"
        )));
    }
    // A constant outcome is allowed: the weighting terms all carry a factor
    // of y, so downstream estimates are exactly zero whatever the fits do;
    // separation handling keeps the path fits finite.
    if data.z().iter().all(|&v| v == 0) || data.z().iter().all(|&v| v == 1) {
        return Err(Error::DegenerateColumn("z".into()));
    }

    // Column layout: z, [l], standardized mediators, covariates.
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(1 + usize::from(include_l) + q + p);
    columns.push(data.z().iter().map(|&v| v as f64).collect());
    if include_l {
        columns.push(data.l().iter().map(|&v| v as f64).collect());
    }
    let m_start = columns.len();
    let mut centers = vec![0.0; q];
    let mut scales = vec![1.0; q];
    for k in 0..q {
        let col = data.m().column(k);
        let mu = col.iter().sum::<f64>() / n as f64;
        let var = col.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / n as f64;
        let sd = var.sqrt();
        let scale = if sd > 1e-12 { sd } else { 1.0 };
        centers[k] = mu;
        scales[k] = scale;
        columns.push(col.iter().map(|v| (v - mu) / scale).collect());
    }
    for j in 0..p {
        columns.push(data.x().column(j));
    }
    let nc = columns.len();
    let response = data.y();

    let paths: Vec<Result<PathOutcome>> = (0..q)
        .into_par_iter()
        .map(|exempt| fit_exemption_path(&columns, response, m_start, q, exempt))
        .collect();

    let mut trace = Vec::with_capacity(q);
    let mut best: Option<&PathOutcome> = None;
    let mut first_err = None;
    let mut ok_count = 0usize;
    for path in &paths {
        match path {
            Ok(o) => {
                ok_count += 1;
                trace.push(EbicTraceRow {
                    mediator: o.exempt,
                    lambda: o.lambda,
                    ebic: o.ebic,
                    nonzero: o.nonzero,
                });
                let better = match best {
                    None => true,
                    Some(b) => o.ebic < b.ebic,
                };
                if better {
                    best = Some(o);
                }
            }
            Err(e) => {
                if first_err.is_none() {
                    first_err = Some(e);
                }
            }
        }
    }
    if ok_count == 0 {
        return Err(Error::Invalid(format!(
            "all {q} outcome-model paths failed; first error: {}",
            first_err.map(|e| e.to_string()).unwrap_or_default()
        )));
    }
    let win = best.expect("at least one path succeeded");

    // Back-transform mediator coefficients to the original scale.
    let mut beta = win.beta.clone();
    let mut intercept_shift = 0.0;
    for k in 0..q {
        let b_std = beta[1 + m_start + k];
        let b = b_std / scales[k];
        intercept_shift += b * centers[k];
        beta[1 + m_start + k] = b;
    }
    beta[0] -= intercept_shift;

    let mut selected: Vec<usize> = (0..q)
        .filter(|&k| beta[1 + m_start + k] != 0.0)
        .collect();
    if !selected.contains(&win.exempt) {
        selected.push(win.exempt);
        selected.sort_unstable();
    }

    let _ = nc;
    Ok(SparseOutcomeFit {
        beta,
        include_l,
        q,
        p,
        selected_mediators: selected,
        winning_index: win.exempt,
        winning_lambda: win.lambda,
        converged: win.converged,
        ebic_trace: trace,
    })
}

fn fit_exemption_path(
    columns: &[Vec<f64>],
    response: &[u8],
    m_start: usize,
    q: usize,
    exempt: usize,
) -> Result<PathOutcome> {
    let nc = columns.len();
    let n = response.len();
    let mut penalized = vec![false; nc];
    for k in 0..q {
        penalized[m_start + k] = k != exempt;
    }

    // With a single mediator nothing is penalized and the path is one
    // unpenalized fit.
    let grid: Vec<f64> = if penalized.iter().any(|&p| p) {
        let lmax = lambda_max(columns, response, &penalized)?;
        if lmax > 1e-12 {
            (0..GRID_POINTS)
                .map(|i| lmax * GRID_FLOOR.powf(i as f64 / (GRID_POINTS - 1) as f64))
                .collect()
        } else {
            vec![0.0]
        }
    } else {
        vec![0.0]
    };

    let mut warm: Option<Vec<f64>> = None;
    let mut best: Option<(f64, f64, usize, Vec<f64>, bool)> = None; // (ebic, lambda, nu, beta, conv)
    for &lambda in &grid {
        let fit = fit_l1_logistic(columns, response, &penalized, lambda, warm.as_deref())?;
        if fit.diverged {
            // separation: every smaller penalty is worse; stop this path
            break;
        }
        warm = Some(fit.beta.clone());
        let ll = penalized_loglik(columns, response, &fit.beta);
        let nu = fit.beta[1..].iter().filter(|&&b| b != 0.0).count();
        let crit = ebic(ll, nu, n, nc);
        let better = match &best {
            None => true,
            Some((b, ..)) => crit < *b,
        };
        if better {
            best = Some((crit, lambda, nu, fit.beta.clone(), fit.converged));
        }
    }
    let best = match best {
        Some(b) => b,
        None => return Err(Error::NonConvergence {
            what: "penalty path (separated at the largest penalty)",
            limit: grid.len(),
        }),
    };
    let (crit, lambda, nu, beta, converged) = best;
    Ok(PathOutcome {
        exempt,
        lambda,
        ebic: crit,
        nonzero: nu,
        beta,
        converged,
    })
}

/// Outcome fit with a fixed mediator support: plain maximum likelihood on
/// the exposure, confounder (optional), the given mediators, and covariates.
/// Used by the bootstrap fast mode that freezes the selected set.
pub fn fit_outcome_fixed(
    data: &MediationDataset,
    include_l: bool,
    selected: &[usize],
) -> Result<SparseOutcomeFit> {
    if selected.is_empty() {
        return Err(Error::Empty("fixed mediator set"));
    }
    let q = data.q();
    let p = data.p();
    let mut cols: Vec<Vec<f64>> = Vec::new();
    cols.push(data.z().iter().map(|&v| v as f64).collect());
    if include_l {
        cols.push(data.l().iter().map(|&v| v as f64).collect());
    }
    for &k in selected {
        cols.push(data.m().column(k));
    }
    for j in 0..p {
        cols.push(data.x().column(j));
    }
    let design = Matrix::from_columns(&cols)?;
    let fit = logit::fit_logistic(&design, data.y())?;

    let il = usize::from(include_l);
    let mut beta = vec![0.0; 2 + il + q + p];
    beta[0] = fit.coefficients[0];
    beta[1] = fit.coefficients[1];
    if include_l {
        beta[2] = fit.coefficients[2];
    }
    for (slot, &k) in selected.iter().enumerate() {
        beta[2 + il + k] = fit.coefficients[2 + il + slot];
    }
    for j in 0..p {
        beta[2 + il + q + j] = fit.coefficients[2 + il + selected.len() + j];
    }
    Ok(SparseOutcomeFit {
        beta,
        include_l,
        q,
        p,
        selected_mediators: selected.to_vec(),
        winning_index: selected[0],
        winning_lambda: 0.0,
        converged: fit.converged,
        ebic_trace: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng;

    fn random_problem(n: usize, nc: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<u8>) {
        let mut r = rng::stream(seed, &[77]);
        let columns: Vec<Vec<f64>> = (0..nc)
            .map(|_| (0..n).map(|_| r.random_range(-1.0..1.0)).collect())
            .collect();
        let truth: Vec<f64> = (0..nc)
            .map(|k| if k < 2 { 1.5 } else { 0.0 })
            .collect();
        let response: Vec<u8> = (0..n)
            .map(|i| {
                let eta: f64 = 0.2
                    + columns
                        .iter()
                        .zip(&truth)
                        .map(|(c, b)| c[i] * b)
                        .sum::<f64>();
                u8::from(r.random_range(0.0..1.0) < expit(eta))
            })
            .collect();
        (columns, response)
    }

    #[test]
    fn lambda_max_orthogonal_column_contributes_zero() {
        // Base fit is intercept-only with mean 1/2, so residuals are +-1/2.
        let response = vec![0u8, 1, 0, 1];
        // Orthogonal to the residual pattern (-.5, .5, -.5, .5):
        let orth = vec![1.0, 1.0, 1.0, 1.0];
        let informative = vec![-1.0, 1.0, -1.0, 1.0];
        let lm_orth = lambda_max(&[orth.clone()], &response, &[true]).unwrap();
        assert!(lm_orth.abs() < 1e-9);
        let lm_both =
            lambda_max(&[orth, informative.clone()], &response, &[true, true]).unwrap();
        let lm_info = lambda_max(&[informative], &response, &[true]).unwrap();
        assert!((lm_both - lm_info).abs() < 1e-12);
    }

    #[test]
    fn lambda_max_duplicate_columns_match() {
        let (columns, response) = random_problem(40, 3, 5);
        let dup = columns[1].clone();
        let mut cols = columns.clone();
        cols.push(dup);
        let lm = lambda_max(&cols, &response, &[false, true, true, true]).unwrap();
        // score of column 1 equals score of its duplicate; the max is unchanged
        let lm_nodup = lambda_max(&columns, &response, &[false, true, true]).unwrap();
        assert!((lm - lm_nodup).abs() < 1e-12);
    }

    #[test]
    fn path_boundary_behaviour_around_lambda_max() {
        let (columns, response) = random_problem(30, 5, 9);
        let penalized = vec![true; 5];
        let lmax = lambda_max(&columns, &response, &penalized).unwrap();

        let hi = fit_l1_logistic(&columns, &response, &penalized, 1.01 * lmax, None).unwrap();
        assert!(hi.converged);
        for b in &hi.beta[1..] {
            assert_eq!(*b, 0.0);
        }
        let lo = fit_l1_logistic(&columns, &response, &penalized, 0.5 * lmax, None).unwrap();
        assert!(lo.converged);
        assert!(lo.beta[1..].iter().any(|&b| b != 0.0));
    }

    #[test]
    fn lambda_zero_matches_maximum_likelihood() {
        let (columns, response) = random_problem(50, 6, 21);
        let penalized = vec![true; 6];
        let l1 = fit_l1_logistic(&columns, &response, &penalized, 0.0, None).unwrap();
        assert!(l1.converged);
        let design = Matrix::from_columns(&columns).unwrap();
        let ml = logit::fit_logistic(&design, &response).unwrap();
        for (a, b) in l1.beta.iter().zip(&ml.coefficients) {
            assert!((a - b).abs() < 1e-5, "{a} vs {b}");
        }
    }

    #[test]
    fn solution_beats_random_perturbation_cloud() {
        let (columns, response) = random_problem(40, 8, 33);
        let penalized: Vec<bool> = (0..8).map(|k| k != 0).collect();
        let lambda = 0.05;
        let fit = fit_l1_logistic(&columns, &response, &penalized, lambda, None).unwrap();
        assert!(fit.converged);

        let objective = |beta: &[f64]| {
            let nf = response.len() as f64;
            let nll = -penalized_loglik(&columns, &response, beta) / nf;
            let pen: f64 = beta[1..]
                .iter()
                .zip(&penalized)
                .filter(|(_, &p)| p)
                .map(|(b, _)| b.abs())
                .sum();
            nll + lambda * pen
        };
        let at_solution = objective(&fit.beta);
        let mut r = rng::stream(1, &[4]);
        for _ in 0..1000 {
            let cand: Vec<f64> = fit
                .beta
                .iter()
                .map(|b| b + r.random_range(-0.01..0.01))
                .collect();
            assert!(objective(&cand) >= at_solution - 1e-12);
        }
    }

    #[test]
    fn stationarity_conditions_hold_across_lambdas() {
        let (columns, response) = random_problem(60, 7, 13);
        let penalized: Vec<bool> = (0..7).map(|k| k > 0).collect();
        let lmax = lambda_max(&columns, &response, &penalized).unwrap();
        let n = response.len() as f64;
        for frac in [0.9, 0.5, 0.2, 0.05] {
            let lambda = frac * lmax;
            let fit = fit_l1_logistic(&columns, &response, &penalized, lambda, None).unwrap();
            assert!(fit.converged);
            let eta = eta_from(&columns, &fit.beta, response.len());
            for k in 0..columns.len() {
                let score: f64 = (0..response.len())
                    .map(|i| (response[i] as f64 - expit(eta[i])) * columns[k][i])
                    .sum::<f64>()
                    / n;
                let b = fit.beta[k + 1];
                if !penalized[k] {
                    assert!(score.abs() < 1e-5);
                } else if b == 0.0 {
                    assert!(score.abs() <= lambda + 1e-5, "score {score} lambda {lambda}");
                } else {
                    assert!((score - lambda * b.signum()).abs() < 1e-5);
                }
            }
        }
    }

    #[test]
    fn ebic_reduces_to_bic_like_form_at_zero_support() {
        let ll = -13.7;
        assert_eq!(ebic(ll, 0, 70, 66), -2.0 * ll);
    }

    #[test]
    fn ebic_binomial_term_matches_exact_integer() {
        // C(66,5) computed exactly in integer arithmetic.
        let mut num: u128 = 1;
        for i in 0..5u128 {
            num *= 66 - i;
        }
        let exact = num / 120;
        assert_eq!(exact, 8_936_928);
        let ll = -20.0;
        let got = ebic(ll, 5, 70, 66);
        let expected = -2.0 * ll + 5.0 * 70f64.ln() + 2.0 * (exact as f64).ln();
        assert!((got - expected).abs() < 1e-9);
    }

    #[test]
    fn ebic_prefers_sparser_fit_at_equal_likelihood() {
        let ll = -25.0;
        assert!(ebic(ll, 3, 70, 66) < ebic(ll, 4, 70, 66));
    }

    fn toy_dataset(seed: u64, n: usize, q: usize) -> MediationDataset {
        let mut r = rng::stream(seed, &[55]);
        let mut m = Matrix::zeros(n, q);
        for i in 0..n {
            for j in 0..q {
                let v = if r.random_range(0.0..1.0) < 0.5 {
                    0.0
                } else {
                    r.random_range(0.0..6.0)
                };
                m.set(i, j, v);
            }
        }
        let x_rows: Vec<Vec<f64>> = (0..n)
            .map(|_| vec![r.random_range(0.2..0.9), f64::from(r.random_range(0..2u8))])
            .collect();
        let z: Vec<u8> = (0..n).map(|_| r.random_range(0..2u8)).collect();
        let l: Vec<u8> = (0..n).map(|_| r.random_range(0..2u8)).collect();
        let y: Vec<u8> = (0..n)
            .map(|i| {
                let eta = 1.0 + 0.5 * z[i] as f64 + 0.8 * l[i] as f64 - 1.2 * m.get(i, 0)
                    + 0.9 * m.get(i, 1.min(q - 1));
                u8::from(r.random_range(0.0..1.0) < expit(eta))
            })
            .collect();
        MediationDataset::new(
            z,
            y,
            l,
            Matrix::from_rows(&x_rows).unwrap(),
            m,
            vec!["age100".into(), "gender".into()],
            (0..q).map(|j| format!("m{}", j + 1)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn single_mediator_is_always_selected() {
        let data = toy_dataset(3, 60, 1);
        let fit = select_outcome_model(&data, true).unwrap();
        assert_eq!(fit.selected_mediators, vec![0]);
        assert_eq!(fit.winning_index, 0);
        assert_eq!(fit.ebic_trace.len(), 1);
    }

    #[test]
    fn column_permutation_permutes_selection() {
        let data = toy_dataset(8, 80, 5);
        let fit = select_outcome_model(&data, true).unwrap();

        // Reverse mediator column order.
        let q = data.q();
        let perm: Vec<usize> = (0..q).rev().collect();
        let m2 = data.m().select_columns(&perm);
        let names2: Vec<String> = perm
            .iter()
            .map(|&j| data.mediator_names()[j].clone())
            .collect();
        let data2 = MediationDataset::new(
            data.z().to_vec(),
            data.y().to_vec(),
            data.l().to_vec(),
            data.x().clone(),
            m2,
            data.covariate_names().to_vec(),
            names2,
        )
        .unwrap();
        let fit2 = select_outcome_model(&data2, true).unwrap();

        let mapped: Vec<usize> = {
            let mut v: Vec<usize> = fit
                .selected_mediators
                .iter()
                .map(|&k| q - 1 - k)
                .collect();
            v.sort_unstable();
            v
        };
        assert_eq!(fit2.selected_mediators, mapped);
        assert_eq!(fit2.winning_index, q - 1 - fit.winning_index);
    }

    #[test]
    fn row_permutation_leaves_selection_unchanged_and_trace_reproduces() {
        let data = toy_dataset(15, 70, 4);
        let fit_a = select_outcome_model(&data, true).unwrap();
        let fit_b = select_outcome_model(&data, true).unwrap();
        assert_eq!(fit_a.ebic_trace, fit_b.ebic_trace);
        assert_eq!(fit_a.beta, fit_b.beta);

        let idx: Vec<usize> = (0..data.n()).rev().collect();
        let shuffled = data.resample(&idx);
        let fit_c = select_outcome_model(&shuffled, true).unwrap();
        assert_eq!(fit_c.selected_mediators, fit_a.selected_mediators);
        assert_eq!(fit_c.winning_index, fit_a.winning_index);
        for (a, c) in fit_a.beta.iter().zip(&fit_c.beta) {
            assert!((a - c).abs() < 1e-6);
        }
    }

    #[test]
    fn fixed_support_fit_places_coefficients_in_layout() {
        let data = toy_dataset(4, 60, 4);
        let fit = fit_outcome_fixed(&data, true, &[1, 3]).unwrap();
        assert_eq!(fit.selected_mediators, vec![1, 3]);
        assert_eq!(fit.beta_m(0), 0.0);
        assert_eq!(fit.beta_m(2), 0.0);
        assert!(fit.beta_m(1) != 0.0);
        let probs = fit.predict(&data, 1.0);
        assert!(probs.iter().all(|p| *p > 0.0 && *p < 1.0));
    }
}
