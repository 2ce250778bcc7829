//! `estimate`: effect estimation with bootstrap inference on a dataset.

use std::path::PathBuf;

use ipwmed_core::bootstrap;
use ipwmed_core::effects::{EffectRecord, Estimand};
use ipwmed_core::mlp::TrainConfig;
use ipwmed_core::tabular;
use ipwmed_core::{Error, Result};
use serde::{Deserialize, Serialize};

use crate::config::ConfigMap;

use super::{with_threads, CommonArgs, SchemaArgs};

#[derive(Debug, clap::Args)]
pub struct EstimateArgs {
    /// Input dataset CSV.
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub schema: SchemaArgs,
    /// Comma-separated estimands among iie, ide, nie, nde, ate.
    #[arg(long, value_delimiter = ',')]
    pub estimands: Option<Vec<String>>,
    /// Bootstrap replicates (0 = point estimates only).
    #[arg(long)]
    pub boot: Option<usize>,
    /// Significance level for intervals and the zero test.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Freeze the selected mediator sets from the original fit across
    /// bootstrap replicates (fast development mode).
    #[arg(long)]
    pub freeze_selection: bool,
    #[command(flatten)]
    pub common: CommonArgs,
    /// Output JSON report path.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// JSON report of an estimation run.
#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct EstimateReport {
    pub command: String,
    pub seed: u64,
    pub alpha: f64,
    pub boot: usize,
    pub freeze_selection: bool,
    pub n: usize,
    pub q: usize,
    pub estimates: Vec<EffectRecord>,
    /// Mediator names selected by the interventional pipeline.
    pub selected_mediators: Vec<String>,
    /// Mediator names selected by the natural-effects pipeline.
    pub natural_selected_mediators: Vec<String>,
    pub bootstrap_failures: usize,
}

pub fn run(args: EstimateArgs) -> Result<()> {
    let cfg = ConfigMap::load(args.common.config.as_deref())?;
    let boot = cfg.resolve(args.boot, "boot", 500)?;
    let alpha = cfg.resolve(args.alpha, "alpha", 0.05)?;
    let seed = cfg.resolve(args.common.seed, "seed", 1)?;
    let threads = cfg.resolve(args.common.threads, "threads", 0)?;
    let estimand_names = match &args.estimands {
        Some(v) => v.clone(),
        None => vec![
            "iie".into(),
            "ide".into(),
            "nie".into(),
            "nde".into(),
            "ate".into(),
        ],
    };
    let estimands: Vec<Estimand> = estimand_names
        .iter()
        .map(|s| s.parse())
        .collect::<Result<_>>()?;

    let data = tabular::load_csv(&args.input, &args.schema.to_schema())?;
    let started = std::time::Instant::now();
    let run = with_threads(threads, || {
        bootstrap::bootstrap_effects_full(
            &data,
            &estimands,
            boot,
            alpha,
            seed,
            args.freeze_selection,
            &TrainConfig::default(),
        )
    })??;
    eprintln!("estimation finished in {:.1}s", started.elapsed().as_secs_f64());

    let names = |sel: &Option<Vec<usize>>| -> Vec<String> {
        sel.as_deref()
            .unwrap_or(&[])
            .iter()
            .map(|&k| data.mediator_names()[k].clone())
            .collect()
    };
    let report = EstimateReport {
        command: "estimate".into(),
        seed,
        alpha,
        boot,
        freeze_selection: args.freeze_selection,
        n: data.n(),
        q: data.q(),
        estimates: run.estimates.iter().map(EffectRecord::from).collect(),
        selected_mediators: names(&run.interventional_selected),
        natural_selected_mediators: names(&run.natural_selected),
        bootstrap_failures: run.failures,
    };

    println!("{}", render_table(&report));
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| Error::Invalid(format!("report serialization: {e}")))?;
    if let Some(path) = &args.out {
        super::write_text(path, &json)?;
        println!("report -> {}", path.display());
    } else {
        println!("{json}");
    }
    Ok(())
}

/// Fixed-format human-readable summary (deterministic output).
pub fn render_table(report: &EstimateReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "n={} q={} boot={} alpha={} seed={}\n",
        report.n, report.q, report.boot, report.alpha, report.seed
    ));
    out.push_str("estimand     point        se            ci                reject H0\n");
    for e in &report.estimates {
        let se = e
            .se
            .map_or("      -".to_string(), |v| format!("{v:7.4}"));
        let ci = match (e.ci_low, e.ci_high) {
            (Some(lo), Some(hi)) => format!("[{lo:7.4}, {hi:7.4}]"),
            _ => "        -         ".to_string(),
        };
        let reject = match e.reject {
            Some(true) => "yes",
            Some(false) => "no",
            None => "-",
        };
        out.push_str(&format!(
            "{:<10} {:8.4}    {}    {}    {}\n",
            e.estimand, e.point, se, ci, reject
        ));
    }
    if !report.selected_mediators.is_empty() {
        out.push_str(&format!(
            "selected mediators: {}\n",
            report.selected_mediators.join(",")
        ));
    }
    if !report.natural_selected_mediators.is_empty() {
        out.push_str(&format!(
            "natural-pipeline mediators: {}\n",
            report.natural_selected_mediators.join(",")
        ));
    }
    out
}
