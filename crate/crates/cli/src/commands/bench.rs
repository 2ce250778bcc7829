//! `bench`: replicated benchmark for one scenario.
//!
//! Generates `replications` datasets, runs the requested methods with
//! bootstrap inference on each, and aggregates bias against the Monte Carlo
//! truth, the spread of the point estimates, and the zero-test rejection
//! rate. The truth is computed once per scenario and written alongside the
//! results.

use std::path::PathBuf;

use ipwmed_core::bootstrap;
use ipwmed_core::effects::Estimand;
use ipwmed_core::mlp::TrainConfig;
use ipwmed_core::rng::{self, tag};
use ipwmed_core::sim::{self, ScenarioKnobs, Structure};
use ipwmed_core::stats::{mean, sample_sd};
use ipwmed_core::{Error, Result};
use rayon::prelude::*;

use crate::config::ConfigMap;

use super::{load_pool, with_threads, CommonArgs, KnobArgs};

#[derive(Debug, clap::Args)]
pub struct BenchArgs {
    /// Sample size per replication.
    #[arg(long)]
    pub n: Option<usize>,
    /// Monte Carlo replications.
    #[arg(long)]
    pub replications: Option<usize>,
    /// Bootstrap replicates per replication.
    #[arg(long)]
    pub boot: Option<usize>,
    /// Significance level.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Comma-separated methods among iie, nie.
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<String>>,
    /// Monte Carlo draws for the scenario truth.
    #[arg(long)]
    pub truth_mc: Option<u64>,
    /// Seed for the hurdle parameters of the non-signal mediators.
    #[arg(long)]
    pub param_seed: Option<u64>,
    #[command(flatten)]
    pub knobs: KnobArgs,
    #[command(flatten)]
    pub common: CommonArgs,
    /// Output CSV path.
    #[arg(long)]
    pub out: PathBuf,
}

fn check_menu(name: &str, value: f64, menu: &[f64]) -> Result<()> {
    if menu.contains(&value) {
        Ok(())
    } else {
        Err(Error::Invalid(format!(
            "{name} must be one of {menu:?}, got {value}"
        )))
    }
}

pub struct BenchOutcome {
    pub truth: f64,
    pub rows: Vec<BenchRow>,
    pub failures: usize,
    pub replications: usize,
}

pub struct BenchRow {
    pub method: Estimand,
    pub bias: f64,
    pub sd: Option<f64>,
    pub reject_rate: Option<f64>,
}

#[allow(clippy::too_many_arguments)]
pub fn run_bench(
    structure: Structure,
    knobs: ScenarioKnobs,
    n: usize,
    replications: usize,
    boot: usize,
    alpha: f64,
    methods: &[Estimand],
    truth_mc: u64,
    param_seed: u64,
    seed: u64,
    pool: &sim::BaselinePool,
) -> Result<BenchOutcome> {
    let params = sim::default_params(param_seed)
        .with_structure(structure)
        .with_knobs(knobs);
    let truth = sim::oracle_iie(
        &params,
        pool,
        None,
        truth_mc,
        rng::derive(seed, &[tag::BENCH_TRUTH]),
    )?
    .estimate;

    let cfg = TrainConfig::default();
    // (point, reject) per method, or None for a failed replication
    let per_rep: Vec<Option<Vec<(f64, Option<bool>)>>> = (0..replications as u64)
        .into_par_iter()
        .map(|r| {
            let data_seed = rng::derive(seed, &[tag::BENCH_REP, r]);
            let (data, _) = sim::gen_dataset(&params, pool, n, data_seed, None).ok()?;
            let est_seed = rng::derive(seed, &[tag::BENCH_REP, r, 7]);
            let run = bootstrap::bootstrap_effects_full(
                &data, methods, boot, alpha, est_seed, false, &cfg,
            )
            .ok()?;
            Some(
                run.estimates
                    .iter()
                    .map(|e| (e.point, e.reject_zero))
                    .collect(),
            )
        })
        .collect();

    let failures = per_rep.iter().filter(|r| r.is_none()).count();
    if failures as f64 > 0.05 * replications as f64 {
        return Err(Error::TooManyFailures {
            failed: failures,
            total: replications,
            ceiling: 0.05,
        });
    }

    let mut rows = Vec::new();
    for (mi, &method) in methods.iter().enumerate() {
        let points: Vec<f64> = per_rep
            .iter()
            .flatten()
            .map(|rep| rep[mi].0)
            .collect();
        let rejects: Vec<f64> = per_rep
            .iter()
            .flatten()
            .filter_map(|rep| rep[mi].1.map(|b| f64::from(b)))
            .collect();
        rows.push(BenchRow {
            method,
            bias: mean(&points) - truth,
            sd: sample_sd(&points),
            reject_rate: if rejects.is_empty() {
                None
            } else {
                Some(mean(&rejects))
            },
        });
    }
    Ok(BenchOutcome {
        truth,
        rows,
        failures,
        replications,
    })
}

pub fn render_csv(
    structure: Structure,
    knobs: ScenarioKnobs,
    n: usize,
    outcome: &BenchOutcome,
) -> String {
    let mut out = String::from("structure,n,gamma_z,theta_z,theta_l,method,truth,bias,sd,reject_rate\n");
    let s = if structure == Structure::One { 1 } else { 2 };
    for row in &outcome.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            s,
            n,
            knobs.gamma_z,
            knobs.theta_z,
            knobs.theta_l,
            row.method,
            outcome.truth,
            row.bias,
            row.sd.map_or(String::new(), |v| v.to_string()),
            row.reject_rate.map_or(String::new(), |v| v.to_string()),
        ));
    }
    out
}

pub fn run(args: BenchArgs) -> Result<()> {
    let cfg = ConfigMap::load(args.common.config.as_deref())?;
    let n = cfg.resolve(args.n, "n", 70)?;
    let replications = cfg.resolve(args.replications, "replications", 200)?;
    let boot = cfg.resolve(args.boot, "boot", 200)?;
    let alpha = cfg.resolve(args.alpha, "alpha", 0.05)?;
    let truth_mc = cfg.resolve(args.truth_mc, "truth-mc", 1_000_000)?;
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
    check_menu("gamma-z", knobs.gamma_z, &[0.0, 0.5])?;
    check_menu("theta-z", knobs.theta_z, &[0.0, -1.2, -1.5])?;
    check_menu("theta-l", knobs.theta_l, &[0.0, 0.1, 0.2])?;
    if replications < 1 {
        return Err(Error::Invalid("replications must be at least 1".into()));
    }
    let method_names = args
        .methods
        .clone()
        .unwrap_or_else(|| vec!["iie".into(), "nie".into()]);
    let methods: Vec<Estimand> = method_names
        .iter()
        .map(|s| s.parse())
        .collect::<Result<_>>()?;
    for m in &methods {
        if !matches!(m, Estimand::Iie | Estimand::Nie) {
            return Err(Error::Invalid(format!(
                "bench methods are iie and nie, got {m}"
            )));
        }
    }
    let pool = load_pool(args.common.pool.as_deref())?;

    let started = std::time::Instant::now();
    let outcome = with_threads(threads, || {
        run_bench(
            structure,
            knobs,
            n,
            replications,
            boot,
            alpha,
            &methods,
            truth_mc,
            param_seed,
            seed,
            &pool,
        )
    })??;
    eprintln!("bench finished in {:.1}s", started.elapsed().as_secs_f64());

    println!(
        "scenario: structure={:?} n={} gamma_z={} theta_z={} theta_l={} seed={}",
        structure, n, knobs.gamma_z, knobs.theta_z, knobs.theta_l, seed
    );
    println!(
        "truth = {:.6} (from {} Monte Carlo draws); {} of {} replications failed",
        outcome.truth, truth_mc, outcome.failures, outcome.replications
    );
    println!("method   bias*100   sd*100   reject rate");
    for row in &outcome.rows {
        println!(
            "{:<6}  {:8.2}   {}   {}",
            row.method.label(),
            row.bias * 100.0,
            row.sd.map_or("      -".into(), |v| format!("{:7.2}", v * 100.0)),
            row.reject_rate
                .map_or("    -".into(), |v| format!("{v:.3}")),
        );
    }
    super::write_text(&args.out, &render_csv(structure, knobs, n, &outcome))?;
    println!("results -> {}", args.out.display());
    Ok(())
}
