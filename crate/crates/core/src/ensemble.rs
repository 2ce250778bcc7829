//! Bagged feedforward-network estimate of the confounder probability.
//!
//! Trains `n_members` networks on bootstrap resamples of the feature rows,
//! scores each on its out-of-bag rows, ranks members by that score, and
//! keeps the prefix whose averaged out-of-bag prediction has the lowest
//! log-loss. Predictions are the average over the kept members, clipped
//! away from 0 and 1 before use in weighting ratios.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::mlp::{log_loss, predict_batch, train_adam_with_rng, Mlp, TrainConfig};
use crate::rng::{self, tag};

/// Default clip bounds for ensemble probabilities.
pub const CLIP_BOUNDS: (f64, f64) = (1e-3, 1.0 - 1e-3);

/// Per-column min-max scaling to [0, 1], fitted on the training rows.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MinMaxScaler {
    pub mins: Vec<f64>,
    pub ranges: Vec<f64>,
}

impl MinMaxScaler {
    pub fn fit(rows: &Matrix) -> MinMaxScaler {
        let cols = rows.cols();
        let mut mins = vec![f64::INFINITY; cols];
        let mut maxs = vec![f64::NEG_INFINITY; cols];
        for i in 0..rows.rows() {
            for (j, &v) in rows.row(i).iter().enumerate() {
                mins[j] = mins[j].min(v);
                maxs[j] = maxs[j].max(v);
            }
        }
        let ranges = mins
            .iter()
            .zip(&maxs)
            .map(|(&lo, &hi)| if hi - lo > 1e-12 { hi - lo } else { 1.0 })
            .collect();
        MinMaxScaler { mins, ranges }
    }

    /// Identity scaler of the given width.
    pub fn identity(cols: usize) -> MinMaxScaler {
        MinMaxScaler {
            mins: vec![0.0; cols],
            ranges: vec![1.0; cols],
        }
    }

    pub fn transform(&self, rows: &Matrix) -> Matrix {
        let mut out = rows.clone();
        for i in 0..out.rows() {
            for (j, v) in out.row_mut(i).iter_mut().enumerate() {
                *v = (*v - self.mins[j]) / self.ranges[j];
            }
        }
        out
    }
}

/// Bagged network ensemble predicting the confounder probability given the
/// exposure, the selected mediators, and the baseline covariates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LEnsemble {
    /// Surviving trained members.
    pub members: Vec<Mlp>,
    /// Stream seed each member's bootstrap resample was drawn from.
    pub member_seeds: Vec<u64>,
    /// Out-of-bag log-loss per member.
    pub oob_scores: Vec<f64>,
    /// Member indices kept by the subset search, best first.
    pub selected: Vec<usize>,
    pub clip_bounds: (f64, f64),
    pub scaler: MinMaxScaler,
    /// Members whose training diverged and were dropped.
    pub failed_members: usize,
}

impl LEnsemble {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("ensemble serializes")
    }

    pub fn from_json(s: &str) -> Result<LEnsemble> {
        serde_json::from_str(s).map_err(|e| Error::Invalid(format!("ensemble JSON: {e}")))
    }
}

struct TrainedMember {
    net: Mlp,
    seed: u64,
    oob_rows: Vec<usize>,
    oob_preds: Vec<f64>,
}

/// Draws a bootstrap resample of `0..n` and returns (in-bag, out-of-bag).
fn bootstrap_split(n: usize, rng: &mut rand_chacha::ChaCha8Rng) -> (Vec<usize>, Vec<usize>) {
    use rand::Rng;
    let mut in_bag = Vec::with_capacity(n);
    let mut seen = vec![false; n];
    for _ in 0..n {
        let i = rng.random_range(0..n);
        in_bag.push(i);
        seen[i] = true;
    }
    let oob = (0..n).filter(|&i| !seen[i]).collect();
    (in_bag, oob)
}

/// Trains the full bagged ensemble. Members train independently on streams
/// derived from `(seed, member index)`, so the result does not depend on
/// thread count.
pub fn fit_ensemble(
    features: &Matrix,
    labels: &[u8],
    cfg: &TrainConfig,
    seed: u64,
) -> Result<LEnsemble> {
    cfg.validate()?;
    let n = features.rows();
    if n == 0 {
        return Err(Error::Empty("ensemble training rows"));
    }
    if labels.len() != n {
        return Err(Error::Dimension {
            expected: n,
            found: labels.len(),
        });
    }
    if features.iter_all().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("ensemble features"));
    }

    let scaler = MinMaxScaler::fit(features);
    let scaled = scaler.transform(features);
    let mut dims = vec![features.cols()];
    dims.extend(&cfg.hidden);
    dims.push(1);

    let trained: Vec<Option<TrainedMember>> = (0..cfg.n_members)
        .into_par_iter()
        .map(|idx| {
            let member_seed = rng::derive(seed, &[tag::ENSEMBLE_MEMBER, idx as u64]);
            let mut member_rng = rng::stream(member_seed, &[]);
            let (in_bag, oob_rows) = bootstrap_split(n, &mut member_rng);
            let net = Mlp::glorot(&dims, &mut member_rng);
            let train_rows = scaled.select_rows(&in_bag);
            let train_labels: Vec<u8> = in_bag.iter().map(|&i| labels[i]).collect();
            match train_adam_with_rng(net, &train_rows, &train_labels, cfg, &mut member_rng) {
                Ok(net) => {
                    let mut oob_preds = Vec::new();
                    if !oob_rows.is_empty() {
                        predict_batch(&net, &scaled.select_rows(&oob_rows), &mut oob_preds);
                    }
                    Some(TrainedMember {
                        net,
                        seed: member_seed,
                        oob_rows,
                        oob_preds,
                    })
                }
                Err(_) => None,
            }
        })
        .collect();

    let failed = trained.iter().filter(|t| t.is_none()).count();
    let members: Vec<TrainedMember> = trained.into_iter().flatten().collect();
    if members.is_empty() {
        return Err(Error::AllMembersFailed(cfg.n_members));
    }

    let (oob_scores, selected) = subset_by_oob(&members, labels, n);
    Ok(LEnsemble {
        member_seeds: members.iter().map(|m| m.seed).collect(),
        members: members.into_iter().map(|m| m.net).collect(),
        oob_scores,
        selected,
        clip_bounds: CLIP_BOUNDS,
        scaler,
        failed_members: failed,
    })
}

/// Ranks members by out-of-bag log-loss and picks the prefix size whose
/// averaged out-of-bag prediction minimizes log-loss (ties to the smaller
/// prefix). Rows not out-of-bag for any prefix member are skipped.
fn subset_by_oob(members: &[TrainedMember], labels: &[u8], n: usize) -> (Vec<f64>, Vec<usize>) {
    let scores: Vec<f64> = members
        .iter()
        .map(|m| {
            if m.oob_rows.is_empty() {
                f64::INFINITY
            } else {
                let lab: Vec<u8> = m.oob_rows.iter().map(|&i| labels[i]).collect();
                log_loss(&m.oob_preds, &lab)
            }
        })
        .collect();

    let mut order: Vec<usize> = (0..members.len()).collect();
    order.sort_by(|&a, &b| {
        scores[a]
            .partial_cmp(&scores[b])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });

    let mut sum = vec![0.0f64; n];
    let mut cnt = vec![0usize; n];
    let mut best_k = 1;
    let mut best_loss = f64::INFINITY;
    for (pos, &idx) in order.iter().enumerate() {
        let m = &members[idx];
        for (&row, &p) in m.oob_rows.iter().zip(&m.oob_preds) {
            sum[row] += p;
            cnt[row] += 1;
        }
        let mut loss = 0.0;
        let mut covered = 0usize;
        for i in 0..n {
            if cnt[i] > 0 {
                let p = (sum[i] / cnt[i] as f64).clamp(1e-12, 1.0 - 1e-12);
                loss -= if labels[i] == 1 { p.ln() } else { (1.0 - p).ln() };
                covered += 1;
            }
        }
        if covered > 0 {
            loss /= covered as f64;
            if loss < best_loss - 1e-15 {
                best_loss = loss;
                best_k = pos + 1;
            }
        }
    }
    (scores, order[..best_k].to_vec())
}

/// Recomputes out-of-bag scores and the selected subset for the current
/// member networks, re-deriving each member's bootstrap rows from its
/// stored seed. Diagnostic path; training is untouched.
pub fn reselect(ens: &LEnsemble, features: &Matrix, labels: &[u8]) -> Result<LEnsemble> {
    let n = features.rows();
    let scaled = ens.scaler.transform(features);
    let members: Vec<TrainedMember> = ens
        .members
        .iter()
        .zip(&ens.member_seeds)
        .map(|(net, &seed)| {
            let mut rng = rng::stream(seed, &[]);
            let (_, oob_rows) = bootstrap_split(n, &mut rng);
            let mut oob_preds = Vec::new();
            if !oob_rows.is_empty() {
                predict_batch(net, &scaled.select_rows(&oob_rows), &mut oob_preds);
            }
            TrainedMember {
                net: net.clone(),
                seed,
                oob_rows,
                oob_preds,
            }
        })
        .collect();
    let (oob_scores, selected) = subset_by_oob(&members, labels, n);
    Ok(LEnsemble {
        members: members.into_iter().map(|m| m.net).collect(),
        member_seeds: ens.member_seeds.clone(),
        oob_scores,
        selected,
        clip_bounds: ens.clip_bounds,
        scaler: ens.scaler.clone(),
        failed_members: ens.failed_members,
    })
}

/// Ensemble probability that the confounder equals one, with the exposure
/// column (column 0 of the feature layout) overridden to `z_value`.
/// Returns the clipped probabilities and the number of values clipped.
pub fn predict_l_counting(
    ens: &LEnsemble,
    features: &Matrix,
    z_value: f64,
) -> Result<(Vec<f64>, usize)> {
    if features.cols() != ens.scaler.mins.len() {
        return Err(Error::Dimension {
            expected: ens.scaler.mins.len(),
            found: features.cols(),
        });
    }
    if features.iter_all().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("ensemble features"));
    }
    let mut with_z = features.clone();
    for i in 0..with_z.rows() {
        with_z.set(i, 0, z_value);
    }
    let scaled = ens.scaler.transform(&with_z);

    let n = scaled.rows();
    let mut acc = vec![0.0f64; n];
    let mut preds = Vec::new();
    for &idx in &ens.selected {
        predict_batch(&ens.members[idx], &scaled, &mut preds);
        for (a, &p) in acc.iter_mut().zip(&preds) {
            *a += p;
        }
    }
    let k = ens.selected.len() as f64;
    let (lo, hi) = ens.clip_bounds;
    let mut clipped = 0usize;
    let out = acc
        .iter()
        .map(|&s| {
            let p = s / k;
            if p < lo {
                clipped += 1;
                lo
            } else if p > hi {
                clipped += 1;
                hi
            } else {
                p
            }
        })
        .collect();
    Ok((out, clipped))
}

/// [`predict_l_counting`] without the clip diagnostic.
pub fn predict_l(ens: &LEnsemble, features: &Matrix, z_value: f64) -> Result<Vec<f64>> {
    predict_l_counting(ens, features, z_value).map(|(p, _)| p)
}
