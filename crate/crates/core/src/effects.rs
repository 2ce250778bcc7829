//! Plug-in weighting estimators for interventional, natural, and total
//! effects.
//!
//! The interventional estimators re-weight observed outcomes by the
//! propensity of exposure and the ratio of two confounder probabilities:
//! one given covariates alone, one given covariates plus the selected
//! mediators. The natural-effect estimators need only the propensity and an
//! outcome-model ratio, and the total effect is the inverse-probability
//! weighted difference of arm means. All conditioning probabilities are
//! clipped away from zero before entering ratios, and clip activations are
//! counted and reported.

use serde::{Deserialize, Serialize};

use crate::ensemble::{self, LEnsemble};
use crate::error::{Error, Result};
use crate::logit::{self, FittedLogit};
use crate::matrix::Matrix;
use crate::mlp::TrainConfig;
use crate::rng::{self, tag};
use crate::sparse::{self, SparseOutcomeFit};
use crate::stats::expit;
use crate::tabular::MediationDataset;

/// Which effect a value estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Estimand {
    Iie,
    Ide,
    Nie,
    Nde,
    Ate,
}

impl Estimand {
    pub fn label(self) -> &'static str {
        match self {
            Estimand::Iie => "IIE",
            Estimand::Ide => "IDE",
            Estimand::Nie => "NIE",
            Estimand::Nde => "NDE",
            Estimand::Ate => "ATE",
        }
    }
}

impl std::str::FromStr for Estimand {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "IIE" => Ok(Estimand::Iie),
            "IDE" => Ok(Estimand::Ide),
            "NIE" => Ok(Estimand::Nie),
            "NDE" => Ok(Estimand::Nde),
            "ATE" => Ok(Estimand::Ate),
            other => Err(Error::Invalid(format!("unknown estimand `{other}`"))),
        }
    }
}

impl std::fmt::Display for Estimand {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// A point estimate with optional bootstrap inference attached.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EffectEstimate {
    pub estimand: Estimand,
    pub point: f64,
    pub se: Option<f64>,
    pub ci: Option<(f64, f64)>,
    pub reject_zero: Option<bool>,
    pub alpha: f64,
    /// Number of probability values moved by clipping.
    pub clip_count: usize,
}

impl EffectEstimate {
    pub fn point_only(estimand: Estimand, point: f64, clip_count: usize) -> EffectEstimate {
        EffectEstimate {
            estimand,
            point,
            se: None,
            ci: None,
            reject_zero: None,
            alpha: 0.05,
            clip_count,
        }
    }
}

/// Interval used to bound probabilities away from 0 and 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClipBounds {
    pub lo: f64,
    pub hi: f64,
}

impl ClipBounds {
    pub const DEFAULT: ClipBounds = ClipBounds {
        lo: 1e-3,
        hi: 1.0 - 1e-3,
    };

    /// No clipping; exact-nuisance verification paths use this.
    pub fn none() -> ClipBounds {
        ClipBounds { lo: 0.0, hi: 1.0 }
    }

    #[inline]
    fn apply(&self, v: f64, count: &mut usize) -> f64 {
        if v < self.lo {
            *count += 1;
            self.lo
        } else if v > self.hi {
            *count += 1;
            self.hi
        } else {
            v
        }
    }

    /// Lower clip only (ratio denominators).
    #[inline]
    fn apply_floor(&self, v: f64, count: &mut usize) -> f64 {
        if v < self.lo {
            *count += 1;
            self.lo
        } else {
            v
        }
    }
}

/// Per-row nuisance values for the interventional estimators. All
/// confounder probabilities are probabilities of the row's observed
/// confounder value.
#[derive(Debug, Clone, Copy)]
pub struct RowNuisance {
    /// Propensity of exposure 1 given covariates.
    pub pz1: f64,
    /// Confounder probability given exposure 1 and covariates.
    pub pl_z1x: f64,
    /// Confounder probability given exposure 0 and covariates.
    pub pl_z0x: f64,
    /// Confounder probability given exposure 1, selected mediators, covariates.
    pub pl_z1mx: f64,
    /// Confounder probability given exposure 0, selected mediators, covariates.
    pub pl_z0mx: f64,
    /// Outcome expectation with exposure set to 1.
    pub ey_z1: f64,
    /// Outcome expectation with exposure set to 0.
    pub ey_z0: f64,
}

/// Per-row nuisance values for the natural-effect estimators.
#[derive(Debug, Clone, Copy)]
pub struct NaturalRowNuisance {
    pub pz1: f64,
    /// Outcome expectation given mediators and covariates, exposure 1.
    pub ey_z1m: f64,
    /// Outcome expectation given mediators and covariates, exposure 0.
    pub ey_z0m: f64,
}

fn weighted_mean(values: &[f64], weights: Option<&[f64]>) -> f64 {
    match weights {
        None => values.iter().sum::<f64>() / values.len() as f64,
        Some(w) => {
            let total: f64 = w.iter().sum();
            values.iter().zip(w).map(|(v, wi)| v * wi).sum::<f64>() / total
        }
    }
}

/// Interventional indirect and direct effect points from per-row nuisance
/// values: the weighting formulas evaluated as (weighted) empirical means.
/// Returns `(iie, ide, clip_count)`.
pub fn interventional_points(
    z: &[f64],
    y: &[f64],
    rows: &[RowNuisance],
    weights: Option<&[f64]>,
    clip: ClipBounds,
) -> (f64, f64, usize) {
    let n = z.len();
    assert!(y.len() == n && rows.len() == n);
    let mut clips = 0usize;
    let mut term_exposed = Vec::with_capacity(n);
    let mut term_cross = Vec::with_capacity(n);
    let mut term_control = Vec::with_capacity(n);
    for i in 0..n {
        let r = &rows[i];
        let pz1 = clip.apply(r.pz1, &mut clips);
        let pl_z1x = clip.apply(r.pl_z1x, &mut clips);
        let pl_z0x = clip.apply(r.pl_z0x, &mut clips);
        let pl_z1mx = clip.apply(r.pl_z1mx, &mut clips);
        let pl_z0mx = clip.apply(r.pl_z0mx, &mut clips);
        let ey_z0 = clip.apply_floor(r.ey_z0, &mut clips);

        // exposed arm weighted by the covariate-only to mediator-adjusted
        // confounder probability ratio
        term_exposed.push(z[i] * y[i] / pz1 * (pl_z1x / pl_z1mx));
        // control arm carried to the exposed outcome scale
        term_cross
            .push((1.0 - z[i]) * y[i] / (1.0 - pz1) * (r.ey_z1 * pl_z1x) / (ey_z0 * pl_z0mx));
        // control arm with its own confounder ratio
        term_control.push((1.0 - z[i]) * y[i] / (1.0 - pz1) * (pl_z0x / pl_z0mx));
    }
    let iie = weighted_mean(&term_exposed, weights) - weighted_mean(&term_cross, weights);
    let ide = weighted_mean(&term_cross, weights) - weighted_mean(&term_control, weights);
    (iie, ide, clips)
}

/// Natural indirect and direct effect points from per-row nuisance values.
/// Returns `(nie, nde, clip_count)`.
pub fn natural_points(
    z: &[f64],
    y: &[f64],
    rows: &[NaturalRowNuisance],
    weights: Option<&[f64]>,
    clip: ClipBounds,
) -> (f64, f64, usize) {
    let n = z.len();
    assert!(y.len() == n && rows.len() == n);
    let mut clips = 0usize;
    let mut exposed = Vec::with_capacity(n);
    let mut cross = Vec::with_capacity(n);
    let mut control = Vec::with_capacity(n);
    for i in 0..n {
        let r = &rows[i];
        let pz1 = clip.apply(r.pz1, &mut clips);
        let ey_z0m = clip.apply_floor(r.ey_z0m, &mut clips);
        exposed.push(z[i] * y[i] / pz1);
        cross.push((1.0 - z[i]) * y[i] / (1.0 - pz1) * (r.ey_z1m / ey_z0m));
        control.push((1.0 - z[i]) * y[i] / (1.0 - pz1));
    }
    let nie = weighted_mean(&exposed, weights) - weighted_mean(&cross, weights);
    let nde = weighted_mean(&cross, weights) - weighted_mean(&control, weights);
    (nie, nde, clips)
}

/// Inverse-probability-weighted difference of arm means.
pub fn ate_point(
    z: &[f64],
    y: &[f64],
    pz1: &[f64],
    weights: Option<&[f64]>,
    clip: ClipBounds,
) -> (f64, usize) {
    let n = z.len();
    let mut clips = 0usize;
    let mut terms = Vec::with_capacity(n);
    for i in 0..n {
        let p = clip.apply(pz1[i], &mut clips);
        terms.push(z[i] * y[i] / p - (1.0 - z[i]) * y[i] / (1.0 - p));
    }
    (weighted_mean(&terms, weights), clips)
}

/// All fitted models the interventional estimators need.
#[derive(Debug, Clone)]
pub struct NuisanceBundle {
    /// Exposure given covariates.
    pub propensity: FittedLogit,
    /// Confounder given exposure and covariates.
    pub confounder_model: FittedLogit,
    /// Penalized outcome model with selected mediators.
    pub outcome: SparseOutcomeFit,
    /// Confounder given exposure, selected mediators, and covariates.
    pub confounder_ensemble: LEnsemble,
    pub ensemble_config: TrainConfig,
}

fn check_both_levels(name: &'static str, v: &[u8]) -> Result<()> {
    if v.iter().all(|&b| b == 0) || v.iter().all(|&b| b == 1) {
        return Err(Error::DegenerateColumn(name.into()));
    }
    Ok(())
}

/// Design matrix for the confounder model: exposure then covariates.
fn confounder_design(data: &MediationDataset) -> Matrix {
    let mut cols: Vec<Vec<f64>> = vec![data.z().iter().map(|&v| v as f64).collect()];
    for j in 0..data.p() {
        cols.push(data.x().column(j));
    }
    Matrix::from_columns(&cols).expect("aligned columns")
}

/// Feature matrix for the confounder ensemble: exposure (column 0), the
/// selected mediators, then covariates.
pub fn ensemble_features(data: &MediationDataset, selected: &[usize]) -> Matrix {
    let mut cols: Vec<Vec<f64>> = vec![data.z().iter().map(|&v| v as f64).collect()];
    for &k in selected {
        cols.push(data.m().column(k));
    }
    for j in 0..data.p() {
        cols.push(data.x().column(j));
    }
    Matrix::from_columns(&cols).expect("aligned columns")
}

/// Fits the nuisance models in pipeline order: exposure and confounder
/// logistic models, penalized outcome model with mediator selection, then
/// the bagged network for the confounder given selected mediators.
/// `fixed_support` skips the selection and fits the outcome model by
/// maximum likelihood on the given mediators.
pub fn fit_nuisances_with(
    data: &MediationDataset,
    cfg: &TrainConfig,
    seed: u64,
    fixed_support: Option<&[usize]>,
) -> Result<NuisanceBundle> {
    check_both_levels("z", data.z()).map_err(Error::at_stage("propensity model"))?;
    check_both_levels("l", data.l()).map_err(Error::at_stage("confounder model"))?;

    let propensity =
        logit::fit_logistic(data.x(), data.z()).map_err(Error::at_stage("propensity model"))?;
    let confounder_model = logit::fit_logistic(&confounder_design(data), data.l())
        .map_err(Error::at_stage("confounder model"))?;
    let outcome = match fixed_support {
        None => sparse::select_outcome_model(data, true).map_err(Error::at_stage("outcome model"))?,
        Some(sel) => {
            sparse::fit_outcome_fixed(data, true, sel).map_err(Error::at_stage("outcome model"))?
        }
    };
    let features = ensemble_features(data, &outcome.selected_mediators);
    let confounder_ensemble =
        ensemble::fit_ensemble(&features, data.l(), cfg, rng::derive(seed, &[tag::NUISANCE]))
            .map_err(Error::at_stage("confounder ensemble"))?;
    Ok(NuisanceBundle {
        propensity,
        confounder_model,
        outcome,
        confounder_ensemble,
        ensemble_config: cfg.clone(),
    })
}

/// [`fit_nuisances_with`] with the default training configuration.
pub fn fit_nuisances(data: &MediationDataset, seed: u64) -> Result<NuisanceBundle> {
    fit_nuisances_with(data, &TrainConfig::default(), seed, None)
}

/// Probability of each row's observed confounder value under exposure
/// `z_value`, from the parametric confounder model.
fn observed_confounder_prob_parametric(
    bundle: &NuisanceBundle,
    data: &MediationDataset,
    z_value: f64,
) -> Vec<f64> {
    (0..data.n())
        .map(|i| {
            let mut eta = bundle.confounder_model.coefficients[0]
                + bundle.confounder_model.coefficients[1] * z_value;
            for j in 0..data.p() {
                eta += bundle.confounder_model.coefficients[2 + j] * data.x().get(i, j);
            }
            let p1 = expit(eta);
            if data.l()[i] == 1 {
                p1
            } else {
                1.0 - p1
            }
        })
        .collect()
}

/// Builds the per-row nuisance values for the interventional estimators.
/// Returns the rows plus the number of ensemble predictions clipped.
pub fn interventional_nuisances(
    data: &MediationDataset,
    bundle: &NuisanceBundle,
) -> Result<(Vec<RowNuisance>, usize)> {
    let n = data.n();
    let pz1 = logit::predict_prob(&bundle.propensity, data.x())?;
    let pl_z1x = observed_confounder_prob_parametric(bundle, data, 1.0);
    let pl_z0x = observed_confounder_prob_parametric(bundle, data, 0.0);

    let features = ensemble_features(data, &bundle.outcome.selected_mediators);
    let (e1, c1) = ensemble::predict_l_counting(&bundle.confounder_ensemble, &features, 1.0)?;
    let (e0, c0) = ensemble::predict_l_counting(&bundle.confounder_ensemble, &features, 0.0)?;
    let ey1 = bundle.outcome.predict(data, 1.0);
    let ey0 = bundle.outcome.predict(data, 0.0);

    let rows = (0..n)
        .map(|i| {
            let obs1 = if data.l()[i] == 1 { e1[i] } else { 1.0 - e1[i] };
            let obs0 = if data.l()[i] == 1 { e0[i] } else { 1.0 - e0[i] };
            RowNuisance {
                pz1: pz1[i],
                pl_z1x: pl_z1x[i],
                pl_z0x: pl_z0x[i],
                pl_z1mx: obs1,
                pl_z0mx: obs0,
                ey_z1: ey1[i],
                ey_z0: ey0[i],
            }
        })
        .collect();
    Ok((rows, c1 + c0))
}

fn z_f64(data: &MediationDataset) -> Vec<f64> {
    data.z().iter().map(|&v| v as f64).collect()
}

fn y_f64(data: &MediationDataset) -> Vec<f64> {
    data.y().iter().map(|&v| v as f64).collect()
}

/// Interventional indirect and direct effect estimates from a fitted bundle.
pub fn estimate_interventional(
    data: &MediationDataset,
    bundle: &NuisanceBundle,
) -> Result<(EffectEstimate, EffectEstimate)> {
    let (rows, ens_clips) = interventional_nuisances(data, bundle)?;
    let (iie, ide, clips) = interventional_points(
        &z_f64(data),
        &y_f64(data),
        &rows,
        None,
        ClipBounds::DEFAULT,
    );
    Ok((
        EffectEstimate::point_only(Estimand::Iie, iie, clips + ens_clips),
        EffectEstimate::point_only(Estimand::Ide, ide, clips + ens_clips),
    ))
}

/// Interventional indirect effect (mediated pathway).
pub fn estimate_iie(data: &MediationDataset, bundle: &NuisanceBundle) -> Result<EffectEstimate> {
    estimate_interventional(data, bundle).map(|(iie, _)| iie)
}

/// Interventional direct effect.
pub fn estimate_ide(data: &MediationDataset, bundle: &NuisanceBundle) -> Result<EffectEstimate> {
    estimate_interventional(data, bundle).map(|(_, ide)| ide)
}

/// Natural-effect estimates together with the outcome model they used.
#[derive(Debug, Clone)]
pub struct NaturalFit {
    pub nie: EffectEstimate,
    pub nde: EffectEstimate,
    pub outcome: SparseOutcomeFit,
}

/// Natural indirect and direct effects: propensity fit plus an outcome
/// model selected without the confounder column. `fixed_support` skips the
/// selection (bootstrap fast mode).
pub fn estimate_natural_full(
    data: &MediationDataset,
    fixed_support: Option<&[usize]>,
) -> Result<NaturalFit> {
    check_both_levels("z", data.z()).map_err(Error::at_stage("propensity model"))?;
    let propensity =
        logit::fit_logistic(data.x(), data.z()).map_err(Error::at_stage("propensity model"))?;
    let outcome = match fixed_support {
        None => {
            sparse::select_outcome_model(data, false).map_err(Error::at_stage("outcome model"))?
        }
        Some(sel) => {
            sparse::fit_outcome_fixed(data, false, sel).map_err(Error::at_stage("outcome model"))?
        }
    };
    let pz1 = logit::predict_prob(&propensity, data.x())?;
    let ey1 = outcome.predict(data, 1.0);
    let ey0 = outcome.predict(data, 0.0);
    let rows: Vec<NaturalRowNuisance> = (0..data.n())
        .map(|i| NaturalRowNuisance {
            pz1: pz1[i],
            ey_z1m: ey1[i],
            ey_z0m: ey0[i],
        })
        .collect();
    let (nie, nde, clips) =
        natural_points(&z_f64(data), &y_f64(data), &rows, None, ClipBounds::DEFAULT);
    Ok(NaturalFit {
        nie: EffectEstimate::point_only(Estimand::Nie, nie, clips),
        nde: EffectEstimate::point_only(Estimand::Nde, nde, clips),
        outcome,
    })
}

/// Natural effects with full mediator selection.
pub fn estimate_nie_nde(data: &MediationDataset) -> Result<(EffectEstimate, EffectEstimate)> {
    estimate_natural_full(data, None).map(|f| (f.nie, f.nde))
}

/// Average treatment effect by inverse-probability weighting with a
/// logistic propensity on the baseline covariates.
pub fn estimate_ate_ht(data: &MediationDataset) -> Result<EffectEstimate> {
    check_both_levels("z", data.z()).map_err(Error::at_stage("propensity model"))?;
    let propensity =
        logit::fit_logistic(data.x(), data.z()).map_err(Error::at_stage("propensity model"))?;
    let pz1 = logit::predict_prob(&propensity, data.x())?;
    let (point, clips) = ate_point(
        &z_f64(data),
        &y_f64(data),
        &pz1,
        None,
        ClipBounds::DEFAULT,
    );
    Ok(EffectEstimate::point_only(Estimand::Ate, point, clips))
}

/// Wire format for effect estimates.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EffectRecord {
    pub estimand: String,
    pub point: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub se: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ci_low: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ci_high: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reject: Option<bool>,
    pub alpha: f64,
    pub diagnostics: EffectDiagnostics,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EffectDiagnostics {
    pub clip_count: usize,
}

impl From<&EffectEstimate> for EffectRecord {
    fn from(e: &EffectEstimate) -> EffectRecord {
        EffectRecord {
            estimand: e.estimand.label().to_string(),
            point: e.point,
            se: e.se,
            ci_low: e.ci.map(|c| c.0),
            ci_high: e.ci.map(|c| c.1),
            reject: e.reject_zero,
            alpha: e.alpha,
            diagnostics: EffectDiagnostics {
                clip_count: e.clip_count,
            },
        }
    }
}
