//! `ingest`: validation and count-table preprocessing.
//!
//! Reads a combined CSV (exposure, outcome, confounder, covariates, and raw
//! mediator counts), optionally rarefies every sample to a common depth,
//! optionally drops low-prevalence taxa, and writes the processed dataset
//! in the canonical column layout.

use std::path::PathBuf;

use ipwmed_core::tabular::{self, CountTable, MediationDataset};
use ipwmed_core::{Error, Result};

use crate::config::ConfigMap;

use super::{CommonArgs, SchemaArgs};

#[derive(Debug, clap::Args)]
pub struct IngestArgs {
    /// Input CSV.
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub schema: SchemaArgs,
    /// Rarefy mediator counts to a common depth.
    #[arg(long)]
    pub rarefy: bool,
    /// Rarefaction depth; the minimum row sum when absent.
    #[arg(long)]
    pub depth: Option<u64>,
    /// Keep taxa present in at least this fraction of samples.
    #[arg(long)]
    pub prevalence: Option<f64>,
    #[command(flatten)]
    pub common: CommonArgs,
    /// Output CSV path.
    #[arg(long)]
    pub out: PathBuf,
}

fn to_count_table(data: &MediationDataset) -> Result<CountTable> {
    let mut counts = Vec::with_capacity(data.n());
    for i in 0..data.n() {
        let mut row = Vec::with_capacity(data.q());
        for (j, &v) in data.m().row(i).iter().enumerate() {
            if v.fract() != 0.0 || v < 0.0 || v > u64::MAX as f64 {
                return Err(Error::BadMediatorValue {
                    row: i + 1,
                    column: data.mediator_names()[j].clone(),
                    value: v,
                });
            }
            row.push(v as u64);
        }
        counts.push(row);
    }
    CountTable::new(counts, data.mediator_names().to_vec())
}

fn with_counts(data: &MediationDataset, table: &CountTable) -> Result<MediationDataset> {
    MediationDataset::new(
        data.z().to_vec(),
        data.y().to_vec(),
        data.l().to_vec(),
        data.x().clone(),
        table.to_matrix(),
        data.covariate_names().to_vec(),
        table.taxon_names.clone(),
    )
}

pub fn run(args: IngestArgs) -> Result<()> {
    let cfg = ConfigMap::load(args.common.config.as_deref())?;
    let seed = cfg.resolve(args.common.seed, "seed", 1)?;
    let prevalence = cfg.resolve_opt(args.prevalence, "prevalence")?;
    let depth_flag = cfg.resolve_opt(args.depth, "depth")?;

    let data = tabular::load_csv(&args.input, &args.schema.to_schema())?;
    let q_before = data.q();
    let mut processed = data.clone();
    let mut depth_used = None;

    if args.rarefy || depth_flag.is_some() {
        let table = to_count_table(&processed)?;
        let depth = match depth_flag {
            Some(d) => d,
            None => *table
                .row_sums()
                .iter()
                .min()
                .ok_or(Error::Empty("count table"))?,
        };
        let rarefied = tabular::rarefy(&table, depth, seed)?;
        processed = with_counts(&processed, &rarefied)?;
        depth_used = Some(depth);
    }
    if let Some(threshold) = prevalence {
        let table = to_count_table(&processed)?;
        let filtered = tabular::prevalence_filter(&table, threshold)?;
        processed = with_counts(&processed, &filtered)?;
    }

    tabular::write_csv_file(&processed, &args.out)?;
    println!(
        "ingested n={} mediators {} -> {} (rarefied: {}, prevalence: {}, seed={}) -> {}",
        processed.n(),
        q_before,
        processed.q(),
        depth_used.map_or("no".to_string(), |d| format!("depth {d}")),
        prevalence.map_or("no".to_string(), |p| format!("{p}")),
        seed,
        args.out.display()
    );
    Ok(())
}
