//! Weighting-based interventional mediation analysis.
//!
//! Estimates interventional and natural direct/indirect effects of a binary
//! exposure on a binary outcome where the mediators are high-dimensional,
//! zero-inflated, and dependent abundance counts, and where a binary
//! post-exposure variable confounds the mediator-outcome relationship.
//!
//! Pipeline: logistic models for the exposure and confounder, a penalized
//! logistic outcome model with eBIC-tuned mediator selection, a bagged
//! feedforward-network estimate of the confounder given the selected
//! mediators, plug-in weighting estimators, and standard normal bootstrap
//! inference. A simulator with zero-inflated gamma hurdle mediators and
//! Monte Carlo truth oracles supports benchmark reproduction.

pub mod error;
pub mod matrix;
pub mod rng;
pub mod stats;
pub mod tabular;

pub mod bootstrap;
pub mod effects;
pub mod ensemble;
pub mod logit;
pub mod mlp;
pub mod sim;
pub mod sparse;
pub mod toyworld;

pub use error::{Error, Result};
pub use matrix::Matrix;
pub use tabular::{CountTable, CsvSchema, MediationDataset, MediatorColumns};
