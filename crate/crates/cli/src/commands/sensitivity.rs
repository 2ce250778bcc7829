//! `sensitivity`: latent-confounder sweep.
//!
//! Fixes the benchmark alternative scenario (exposure affects confounder
//! and mediators, weak confounder-to-mediator effect, n = 70, conditionally
//! independent mediators) and sweeps the two latent-confounder coefficients
//! active in the chosen scenario over their grids. Reports the absolute
//! bias of the proposed interventional estimator and of the natural-effect
//! estimator at each grid point; no bootstrap is involved.

use std::path::PathBuf;

use ipwmed_core::effects;
use ipwmed_core::mlp::TrainConfig;
use ipwmed_core::rng::{self, tag};
use ipwmed_core::sim::{self, ConfounderParams, Scenario, ScenarioKnobs, Structure};
use ipwmed_core::stats::mean;
use ipwmed_core::{Error, Result};
use rayon::prelude::*;

use crate::config::ConfigMap;

use super::{load_pool, with_threads, CommonArgs};

const ALPHA_U_GRID: [f64; 7] = [-0.9, -0.6, -0.3, 0.0, 0.3, 0.6, 0.9];
const THETA_U_GRID: [f64; 7] = [-0.3, -0.2, -0.1, 0.0, 0.1, 0.2, 0.3];
const BETA_U_GRID: [f64; 7] = [-6.0, -4.0, -2.0, 0.0, 2.0, 4.0, 6.0];

pub const SWEEP_KNOBS: ScenarioKnobs = ScenarioKnobs {
    gamma_z: 0.5,
    theta_z: -1.5,
    theta_l: 0.1,
};
pub const SWEEP_N: usize = 70;

#[derive(Debug, clap::Args)]
pub struct SensitivityArgs {
    /// Sensitivity scenario: I, II, or III.
    #[arg(long)]
    pub scenario: Option<String>,
    /// Replications per grid point.
    #[arg(long)]
    pub replications: Option<usize>,
    /// Monte Carlo draws for each grid point's truth.
    #[arg(long)]
    pub truth_mc: Option<u64>,
    /// Seed for the hurdle parameters of the non-signal mediators.
    #[arg(long)]
    pub param_seed: Option<u64>,
    #[command(flatten)]
    pub common: CommonArgs,
    /// Output CSV path.
    #[arg(long)]
    pub out: PathBuf,
}

/// Grid of active-coefficient pairs for a scenario.
pub fn scenario_grid(scenario: Scenario) -> Vec<ConfounderParams> {
    let mut grid = Vec::new();
    match scenario {
        Scenario::I => {
            for &a in &ALPHA_U_GRID {
                for &b in &BETA_U_GRID {
                    grid.push(ConfounderParams::scenario_i(a, b));
                }
            }
        }
        Scenario::II => {
            for &a in &ALPHA_U_GRID {
                for &t in &THETA_U_GRID {
                    grid.push(ConfounderParams::scenario_ii(a, t));
                }
            }
        }
        Scenario::III => {
            for &b in &BETA_U_GRID {
                for &t in &THETA_U_GRID {
                    grid.push(ConfounderParams::scenario_iii(b, t));
                }
            }
        }
    }
    grid
}

pub struct SensPoint {
    pub conf: ConfounderParams,
    pub truth: f64,
    pub mean_proposed: f64,
    pub mean_natural: f64,
    pub failures: usize,
}

pub fn run_sweep(
    scenario: Scenario,
    replications: usize,
    truth_mc: u64,
    param_seed: u64,
    seed: u64,
    pool: &sim::BaselinePool,
) -> Result<Vec<SensPoint>> {
    let params = sim::default_params(param_seed)
        .with_structure(Structure::One)
        .with_knobs(SWEEP_KNOBS);
    let cfg = TrainConfig::default();
    let grid = scenario_grid(scenario);

    let mut points = Vec::with_capacity(grid.len());
    for (pi, conf) in grid.iter().enumerate() {
        let truth = sim::oracle_iie(
            &params,
            pool,
            Some(conf),
            truth_mc,
            rng::derive(seed, &[tag::SENS_POINT, pi as u64]),
        )?
        .estimate;

        let reps: Vec<Option<(f64, f64)>> = (0..replications as u64)
            .into_par_iter()
            .map(|r| {
                let data_seed = rng::derive(seed, &[tag::SENS_POINT, pi as u64, 1 + r]);
                let (data, _) = sim::gen_dataset(&params, pool, SWEEP_N, data_seed, Some(conf))
                    .ok()?;
                let bundle = effects::fit_nuisances_with(
                    &data,
                    &cfg,
                    rng::derive(data_seed, &[3]),
                    None,
                )
                .ok()?;
                let iie = effects::estimate_iie(&data, &bundle).ok()?;
                let nat = effects::estimate_natural_full(&data, None).ok()?;
                Some((iie.point, nat.nie.point))
            })
            .collect();
        let failures = reps.iter().filter(|r| r.is_none()).count();
        if failures as f64 > 0.05 * replications as f64 {
            return Err(Error::TooManyFailures {
                failed: failures,
                total: replications,
                ceiling: 0.05,
            });
        }
        let proposed: Vec<f64> = reps.iter().flatten().map(|&(p, _)| p).collect();
        let natural: Vec<f64> = reps.iter().flatten().map(|&(_, n)| n).collect();
        points.push(SensPoint {
            conf: *conf,
            truth,
            mean_proposed: mean(&proposed),
            mean_natural: mean(&natural),
            failures,
        });
    }
    Ok(points)
}

pub fn render_csv(scenario: Scenario, points: &[SensPoint]) -> String {
    let mut out =
        String::from("scenario,alpha_u,beta_u,theta_u,method,truth,mean_estimate,abs_bias\n");
    let tag = match scenario {
        Scenario::I => "I",
        Scenario::II => "II",
        Scenario::III => "III",
    };
    for p in points {
        for (method, est) in [("IIE", p.mean_proposed), ("NIE", p.mean_natural)] {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                tag,
                p.conf.alpha_u,
                p.conf.beta_u,
                p.conf.theta_u,
                method,
                p.truth,
                est,
                (est - p.truth).abs()
            ));
        }
    }
    out
}

pub fn run(args: SensitivityArgs) -> Result<()> {
    let cfg = ConfigMap::load(args.common.config.as_deref())?;
    let scenario: Scenario = cfg
        .resolve(args.scenario, "scenario", "I".to_string())?
        .parse()?;
    let replications = cfg.resolve(args.replications, "replications", 100)?;
    let truth_mc = cfg.resolve(args.truth_mc, "truth-mc", 1_000_000)?;
    let seed = cfg.resolve(args.common.seed, "seed", 1)?;
    let param_seed = cfg.resolve(args.param_seed, "param-seed", 1)?;
    let threads = cfg.resolve(args.common.threads, "threads", 0)?;
    let pool = load_pool(args.common.pool.as_deref())?;

    let started = std::time::Instant::now();
    let points = with_threads(threads, || {
        run_sweep(scenario, replications, truth_mc, param_seed, seed, &pool)
    })??;
    eprintln!(
        "sensitivity sweep finished in {:.1}s",
        started.elapsed().as_secs_f64()
    );

    println!(
        "scenario {scenario:?}: {} grid points, {} replications each, seed={}",
        points.len(),
        replications,
        seed
    );
    let max_abs_bias = points
        .iter()
        .map(|p| (p.mean_proposed - p.truth).abs())
        .fold(0.0f64, f64::max);
    let failed: usize = points.iter().map(|p| p.failures).sum();
    println!("max |bias| of proposed method across the grid: {max_abs_bias:.4}");
    println!("failed replications across the grid: {failed}");
    super::write_text(&args.out, &render_csv(scenario, &points))?;
    println!("results -> {}", args.out.display());
    Ok(())
}
