//! `simulate`: draw a synthetic observational dataset.

use std::path::PathBuf;

use ipwmed_core::sim::{self, ScenarioKnobs, Structure};
use ipwmed_core::tabular;
use ipwmed_core::Result;

use crate::config::ConfigMap;

use super::{load_pool, CommonArgs, ConfounderArgs, KnobArgs};

#[derive(Debug, clap::Args)]
pub struct SimulateArgs {
    /// Sample size.
    #[arg(long)]
    pub n: Option<usize>,
    /// Seed for the hurdle parameters of the non-signal mediators.
    #[arg(long)]
    pub param_seed: Option<u64>,
    #[command(flatten)]
    pub knobs: KnobArgs,
    #[command(flatten)]
    pub conf: ConfounderArgs,
    #[command(flatten)]
    pub common: CommonArgs,
    /// Output CSV path.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: SimulateArgs) -> Result<()> {
    let cfg = ConfigMap::load(args.common.config.as_deref())?;
    let n = cfg.resolve(args.n, "n", 70)?;
    let seed = cfg.resolve(args.common.seed, "seed", 1)?;
    let param_seed = cfg.resolve(args.param_seed, "param-seed", 1)?;
    let structure: Structure = cfg
        .resolve(args.knobs.structure, "structure", "1".to_string())?
        .parse()?;
    let knobs = ScenarioKnobs {
        gamma_z: cfg.resolve(args.knobs.gamma_z, "gamma-z", 0.0)?,
        theta_z: cfg.resolve(args.knobs.theta_z, "theta-z", 0.0)?,
        theta_l: cfg.resolve(args.knobs.theta_l, "theta-l", 0.0)?,
    };
    let conf = args.conf.to_conf()?;
    let pool = load_pool(args.common.pool.as_deref())?;

    let params = sim::default_params(param_seed)
        .with_structure(structure)
        .with_knobs(knobs);
    let (data, _hidden) = sim::gen_dataset(&params, &pool, n, seed, conf.as_ref())?;
    tabular::write_csv_file(&data, &args.out)?;
    println!(
        "simulated n={} q={} structure={:?} gamma_z={} theta_z={} theta_l={} seed={} -> {}",
        data.n(),
        data.q(),
        structure,
        knobs.gamma_z,
        knobs.theta_z,
        knobs.theta_l,
        seed,
        args.out.display()
    );
    Ok(())
}
