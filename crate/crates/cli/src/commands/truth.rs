//! `truth`: Monte Carlo oracle for the interventional indirect effect.

use std::path::PathBuf;

use ipwmed_core::sim::{self, ScenarioKnobs, Structure};
use ipwmed_core::Result;
use serde::Serialize;

use crate::config::ConfigMap;

use super::{load_pool, params_hash, with_threads, CommonArgs, ConfounderArgs, KnobArgs};

#[derive(Debug, clap::Args)]
pub struct TruthArgs {
    /// Monte Carlo draws.
    #[arg(long)]
    pub n_mc: Option<u64>,
    /// Seed for the hurdle parameters of the non-signal mediators.
    #[arg(long)]
    pub param_seed: Option<u64>,
    #[command(flatten)]
    pub knobs: KnobArgs,
    #[command(flatten)]
    pub conf: ConfounderArgs,
    #[command(flatten)]
    pub common: CommonArgs,
    /// Output JSON path (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Serialize)]
struct TruthReport {
    command: &'static str,
    seed: u64,
    param_seed: u64,
    structure: String,
    gamma_z: f64,
    theta_z: f64,
    theta_l: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    confounder: Option<ipwmed_core::sim::ConfounderParams>,
    params_hash: String,
    n_mc: u64,
    estimate: f64,
    mc_se: f64,
}

pub fn run(args: TruthArgs) -> Result<()> {
    let cfg = ConfigMap::load(args.common.config.as_deref())?;
    let n_mc = cfg.resolve(args.n_mc, "n-mc", 1_000_000)?;
    let seed = cfg.resolve(args.common.seed, "seed", 1)?;
    let param_seed = cfg.resolve(args.param_seed, "param-seed", 1)?;
    let threads = cfg.resolve(args.common.threads, "threads", 0)?;
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

    let started = std::time::Instant::now();
    let est = with_threads(threads, || {
        sim::oracle_iie(&params, &pool, conf.as_ref(), n_mc, seed)
    })??;
    eprintln!("truth computed in {:.1}s", started.elapsed().as_secs_f64());

    let report = TruthReport {
        command: "truth",
        seed,
        param_seed,
        structure: format!("{}", if structure == Structure::One { 1 } else { 2 }),
        gamma_z: knobs.gamma_z,
        theta_z: knobs.theta_z,
        theta_l: knobs.theta_l,
        confounder: conf,
        params_hash: params_hash(&serde_json::to_string(&params).expect("params serialize")),
        n_mc,
        estimate: est.estimate,
        mc_se: est.mc_se,
    };
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    match &args.out {
        Some(path) => {
            super::write_text(path, &json)?;
            println!("truth {:.6} (mc se {:.6}) -> {}", est.estimate, est.mc_se, path.display());
        }
        None => println!("{json}"),
    }
    Ok(())
}
