//! Standard normal bootstrap inference.
//!
//! Resamples rows with replacement, reruns the requested estimators on each
//! replicate (full pipeline including nuisance refits unless the selected
//! mediator sets are frozen), and builds `point +- z * se` intervals around
//! the original-sample point estimate, where `se` is the standard deviation
//! of the replicate estimates. The zero test rejects when zero falls
//! outside the interval.

use rand::Rng;
use rayon::prelude::*;

use crate::effects::{self, EffectEstimate, Estimand};
use crate::error::{Error, Result};
use crate::mlp::TrainConfig;
use crate::rng::{self, tag};
use crate::stats::{normal_quantile, sample_sd};
use crate::tabular::MediationDataset;

/// Replicate estimates for one statistic.
#[derive(Debug, Clone)]
pub struct BootstrapResult {
    /// Successful replicate estimates (failures excluded).
    pub replicate_estimates: Vec<f64>,
    /// Sample standard deviation of the replicate estimates.
    pub se: f64,
    /// Number of failed replicates.
    pub failures: usize,
    /// Requested number of replicates.
    pub requested: usize,
}

/// Bootstrap run configuration.
#[derive(Debug, Clone, Copy)]
pub struct BootstrapOptions {
    pub b: usize,
    pub alpha: f64,
    pub seed: u64,
    /// Replicate-failure ceiling as a fraction of `b`.
    pub max_failure_frac: f64,
}

impl BootstrapOptions {
    pub fn new(b: usize, alpha: f64, seed: u64) -> BootstrapOptions {
        BootstrapOptions {
            b,
            alpha,
            seed,
            max_failure_frac: 0.2,
        }
    }
}

/// `point +- z_{1-alpha/2} * se`.
pub fn normal_ci(point: f64, se: f64, alpha: f64) -> (f64, f64) {
    assert!(se >= 0.0, "standard error must be nonnegative");
    assert!(alpha > 0.0 && alpha < 1.0, "alpha must be in (0,1)");
    let z = normal_quantile(1.0 - alpha / 2.0);
    (point - z * se, point + z * se)
}

/// Runs `b` bootstrap replicates of a vector-valued statistic. Replicate
/// `r` resamples the rows with a stream derived from `(seed, r)` and passes
/// a replicate seed to the statistic for any internal randomness, so the
/// result is independent of thread count. Errors when more than
/// `max_failure_frac` of replicates fail.
pub fn bootstrap_statistics<F>(
    data: &MediationDataset,
    n_stats: usize,
    stat: F,
    opts: &BootstrapOptions,
) -> Result<Vec<BootstrapResult>>
where
    F: Fn(&MediationDataset, u64) -> Result<Vec<f64>> + Sync,
{
    if opts.b < 2 {
        return Err(Error::Invalid(format!(
            "bootstrap needs at least 2 replicates, got {}",
            opts.b
        )));
    }
    if !(opts.alpha > 0.0 && opts.alpha < 1.0) {
        return Err(Error::Invalid(format!("alpha must be in (0,1), got {}", opts.alpha)));
    }
    let n = data.n();
    let replicate: Vec<Option<Vec<f64>>> = (0..opts.b as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng::stream(opts.seed, &[tag::BOOT_RESAMPLE, r]);
            let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            let sub = data.resample(&idx);
            let rep_seed = rng::derive(opts.seed, &[tag::BOOT_REFIT, r]);
            match stat(&sub, rep_seed) {
                Ok(v) if v.len() == n_stats && v.iter().all(|x| x.is_finite()) => Some(v),
                _ => None,
            }
        })
        .collect();

    let failures = replicate.iter().filter(|r| r.is_none()).count();
    if failures as f64 > opts.max_failure_frac * opts.b as f64 {
        return Err(Error::TooManyFailures {
            failed: failures,
            total: opts.b,
            ceiling: opts.max_failure_frac,
        });
    }

    let mut results = Vec::with_capacity(n_stats);
    for s in 0..n_stats {
        let estimates: Vec<f64> = replicate
            .iter()
            .flatten()
            .map(|v| v[s])
            .collect();
        let se = sample_sd(&estimates).unwrap_or(0.0);
        results.push(BootstrapResult {
            replicate_estimates: estimates,
            se,
            failures,
            requested: opts.b,
        });
    }
    Ok(results)
}

fn attach_inference(est: &mut EffectEstimate, boot: &BootstrapResult, alpha: f64) {
    let ci = normal_ci(est.point, boot.se, alpha);
    est.se = Some(boot.se);
    est.ci = Some(ci);
    est.reject_zero = Some(!(ci.0 <= 0.0 && 0.0 <= ci.1));
    est.alpha = alpha;
}

/// Outcome of a bootstrap estimation run.
#[derive(Debug, Clone)]
pub struct EffectsRun {
    /// Estimates in the caller's estimand order.
    pub estimates: Vec<EffectEstimate>,
    /// Mediators selected by the interventional pipeline, when it ran.
    pub interventional_selected: Option<Vec<usize>>,
    /// Mediators selected by the natural-effects pipeline, when it ran.
    pub natural_selected: Option<Vec<usize>>,
    /// Failed bootstrap replicates (0 when `b = 0`).
    pub failures: usize,
}

/// Point estimates for the requested estimands with bootstrap inference.
/// With `b = 0` only the point estimates are returned. `freeze_selection`
/// fixes the selected mediator sets from the original fits and refits the
/// outcome models by maximum likelihood on each replicate (fast mode); the
/// default reruns the entire pipeline, selection included, per replicate.
pub fn bootstrap_effects_full(
    data: &MediationDataset,
    estimands: &[Estimand],
    b: usize,
    alpha: f64,
    seed: u64,
    freeze_selection: bool,
    cfg: &TrainConfig,
) -> Result<EffectsRun> {
    if estimands.is_empty() {
        return Err(Error::Empty("estimand list"));
    }
    let want = |e: Estimand| estimands.contains(&e);
    let needs_interventional = want(Estimand::Iie) || want(Estimand::Ide);
    let needs_natural = want(Estimand::Nie) || want(Estimand::Nde);
    let needs_ate = want(Estimand::Ate);

    // Original-sample fits.
    let orig_seed = rng::derive(seed, &[tag::BOOT_REFIT]);
    let mut originals: Vec<EffectEstimate> = Vec::new();
    let mut interventional_support: Option<Vec<usize>> = None;
    let mut natural_support: Option<Vec<usize>> = None;
    if needs_interventional {
        let bundle = effects::fit_nuisances_with(data, cfg, orig_seed, None)?;
        let (iie, ide) = effects::estimate_interventional(data, &bundle)?;
        interventional_support = Some(bundle.outcome.selected_mediators.clone());
        originals.push(iie);
        originals.push(ide);
    }
    if needs_natural {
        let nat = effects::estimate_natural_full(data, None)?;
        natural_support = Some(nat.outcome.selected_mediators.clone());
        originals.push(nat.nie);
        originals.push(nat.nde);
    }
    if needs_ate {
        originals.push(effects::estimate_ate_ht(data)?);
    }

    // Keep only the requested estimands, in the caller's order.
    let mut ordered: Vec<EffectEstimate> = estimands
        .iter()
        .map(|&e| {
            originals
                .iter()
                .find(|est| est.estimand == e)
                .cloned()
                .expect("estimate computed above")
        })
        .collect();
    for est in ordered.iter_mut() {
        est.alpha = alpha;
    }
    if b == 0 {
        return Ok(EffectsRun {
            estimates: ordered,
            interventional_selected: interventional_support,
            natural_selected: natural_support,
            failures: 0,
        });
    }

    let stat_order: Vec<Estimand> = estimands.to_vec();
    let inter_support = interventional_support.clone();
    let nat_support = natural_support.clone();
    let stat = move |sub: &MediationDataset, rep_seed: u64| -> Result<Vec<f64>> {
        let mut values: Vec<(Estimand, f64)> = Vec::new();
        if needs_interventional {
            let bundle = effects::fit_nuisances_with(
                sub,
                cfg,
                rep_seed,
                if freeze_selection {
                    inter_support.as_deref()
                } else {
                    None
                },
            )?;
            let (iie, ide) = effects::estimate_interventional(sub, &bundle)?;
            values.push((Estimand::Iie, iie.point));
            values.push((Estimand::Ide, ide.point));
        }
        if needs_natural {
            let nat = effects::estimate_natural_full(
                sub,
                if freeze_selection {
                    nat_support.as_deref()
                } else {
                    None
                },
            )?;
            values.push((Estimand::Nie, nat.nie.point));
            values.push((Estimand::Nde, nat.nde.point));
        }
        if needs_ate {
            values.push((Estimand::Ate, effects::estimate_ate_ht(sub)?.point));
        }
        Ok(stat_order
            .iter()
            .map(|e| {
                values
                    .iter()
                    .find(|(tag, _)| tag == e)
                    .map(|(_, v)| *v)
                    .expect("statistic computed above")
            })
            .collect())
    };

    let opts = BootstrapOptions::new(b, alpha, seed);
    let boots = bootstrap_statistics(data, estimands.len(), stat, &opts)?;
    for (est, boot) in ordered.iter_mut().zip(&boots) {
        attach_inference(est, boot, alpha);
    }
    Ok(EffectsRun {
        estimates: ordered,
        interventional_selected: interventional_support,
        natural_selected: natural_support,
        failures: boots.first().map_or(0, |b| b.failures),
    })
}

/// [`bootstrap_effects_full`] returning just the estimates.
pub fn bootstrap_effects(
    data: &MediationDataset,
    estimands: &[Estimand],
    b: usize,
    alpha: f64,
    seed: u64,
    freeze_selection: bool,
    cfg: &TrainConfig,
) -> Result<Vec<EffectEstimate>> {
    bootstrap_effects_full(data, estimands, b, alpha, seed, freeze_selection, cfg)
        .map(|run| run.estimates)
}

/// Bootstrap inference for a single estimand with the default training
/// configuration.
pub fn bootstrap_effect(
    data: &MediationDataset,
    estimand: Estimand,
    b: usize,
    alpha: f64,
    seed: u64,
    freeze_selection: bool,
) -> Result<EffectEstimate> {
    bootstrap_effects(
        data,
        &[estimand],
        b,
        alpha,
        seed,
        freeze_selection,
        &TrainConfig::default(),
    )
    .map(|mut v| v.remove(0))
}
