//! Subcommand implementations and shared helpers.

pub mod bench;
pub mod estimate;
pub mod ingest;
pub mod sensitivity;
pub mod simulate;
pub mod truth;

use std::path::{Path, PathBuf};

use ipwmed_core::sim::BaselinePool;
use ipwmed_core::tabular::{CsvSchema, MediatorColumns};
use ipwmed_core::{Error, Result};

/// Bundled 70-row baseline covariate pool (age/100, gender).
pub const EMBEDDED_POOL: &str = include_str!("../../../../data/baseline_pool.csv");

/// Loads the pool from a file, or the bundled default.
pub fn load_pool(path: Option<&Path>) -> Result<BaselinePool> {
    match path {
        Some(p) => BaselinePool::from_csv(p),
        None => BaselinePool::from_reader(EMBEDDED_POOL.as_bytes()),
    }
}

/// Runs a closure inside a local rayon pool of the given size
/// (0 = library default).
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if threads == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Invalid(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

pub fn write_text(path: &Path, content: &str) -> Result<()> {
    std::fs::write(path, content)?;
    Ok(())
}

/// Column-role flags shared by `ingest` and `estimate`.
#[derive(Debug, clap::Args)]
pub struct SchemaArgs {
    /// Exposure column name.
    #[arg(long, default_value = "z")]
    pub z_col: String,
    /// Outcome column name.
    #[arg(long, default_value = "y")]
    pub y_col: String,
    /// Post-exposure confounder column name.
    #[arg(long, default_value = "l")]
    pub l_col: String,
    /// Comma-separated baseline covariate columns.
    #[arg(long, value_delimiter = ',', default_value = "age100,gender")]
    pub x_cols: Vec<String>,
    /// Explicit comma-separated mediator columns; overrides --m-prefix.
    #[arg(long, value_delimiter = ',')]
    pub mediators: Option<Vec<String>>,
    /// Header prefix that selects mediator columns.
    #[arg(long, default_value = "m")]
    pub m_prefix: String,
    /// Covariate column holding raw age in years; divided by 100 on load.
    #[arg(long)]
    pub age_col: Option<String>,
}

impl SchemaArgs {
    pub fn to_schema(&self) -> CsvSchema {
        CsvSchema {
            z: self.z_col.clone(),
            y: self.y_col.clone(),
            l: self.l_col.clone(),
            // `--x-cols ""` means no baseline covariates
            covariates: self
                .x_cols
                .iter()
                .filter(|c| !c.is_empty())
                .cloned()
                .collect(),
            mediators: match &self.mediators {
                Some(names) => MediatorColumns::Names(names.clone()),
                None => MediatorColumns::Prefix(self.m_prefix.clone()),
            },
            age_column: self.age_col.clone(),
        }
    }
}

/// FNV-1a hash of a serialized value, as fixed-width hex.
pub fn params_hash(serialized: &str) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in serialized.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{h:016x}")
}

/// Scenario-knob flags shared by the simulation-driven commands.
#[derive(Debug, clap::Args)]
pub struct KnobArgs {
    /// Mediator dependence structure: 1 or 2.
    #[arg(long)]
    pub structure: Option<String>,
    /// Exposure effect on the confounder.
    #[arg(long, allow_hyphen_values = true)]
    pub gamma_z: Option<f64>,
    /// Exposure effect on the mediators.
    #[arg(long, allow_hyphen_values = true)]
    pub theta_z: Option<f64>,
    /// Confounder effect on the mediators.
    #[arg(long, allow_hyphen_values = true)]
    pub theta_l: Option<f64>,
}

/// Latent-confounder flags.
#[derive(Debug, clap::Args)]
pub struct ConfounderArgs {
    /// Sensitivity scenario (I, II, or III) activating a latent confounder.
    #[arg(long)]
    pub scenario: Option<String>,
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
    pub alpha_u: f64,
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
    pub beta_u: f64,
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
    pub theta_u: f64,
}

impl ConfounderArgs {
    pub fn to_conf(&self) -> Result<Option<ipwmed_core::sim::ConfounderParams>> {
        match &self.scenario {
            None => Ok(None),
            Some(s) => {
                let scenario: ipwmed_core::sim::Scenario = s.parse()?;
                Ok(Some(match scenario {
                    ipwmed_core::sim::Scenario::I => {
                        ipwmed_core::sim::ConfounderParams::scenario_i(self.alpha_u, self.beta_u)
                    }
                    ipwmed_core::sim::Scenario::II => {
                        ipwmed_core::sim::ConfounderParams::scenario_ii(self.alpha_u, self.theta_u)
                    }
                    ipwmed_core::sim::Scenario::III => {
                        ipwmed_core::sim::ConfounderParams::scenario_iii(self.beta_u, self.theta_u)
                    }
                }))
            }
        }
    }
}

/// Common output/configuration flags.
#[derive(Debug, clap::Args)]
pub struct CommonArgs {
    /// Master seed; every report echoes it.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (0 = library default).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Plain-text key=value configuration file; flags win on conflict.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Baseline covariate pool CSV (columns age100,gender); bundled pool
    /// when absent.
    #[arg(long)]
    pub pool: Option<PathBuf>,
}
