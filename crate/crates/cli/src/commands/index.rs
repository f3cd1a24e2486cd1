use std::path::PathBuf;

use clap::Args;
use posefuse_core::pose::{read_jsonl_path, HandPose};
use posefuse_core::pq::{build_index, index_vector, load_index, retrieve_pq, save_index, PqIndex, PqParams, SearchParams};
use posefuse_core::{retrieve_exact, Match};
use serde::{Deserialize, Serialize};

use crate::{emit_json, CliError};

#[derive(Debug, Args)]
pub struct BuildArgs {
    /// Pose bank, one JSON pose per line.
    #[arg(long)]
    pub poses: PathBuf,
    /// Index file to write.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 4)]
    pub m: usize,
    #[arg(long, default_value_t = 256)]
    pub k: usize,
    #[arg(long, default_value_t = 25)]
    pub iters: usize,
    #[arg(long)]
    pub seed: u64,
    /// Train codebooks on an evenly strided subset of this many poses.
    #[arg(long)]
    pub train_limit: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct BuildSummary {
    pub n: usize,
    pub dim: usize,
    pub m: usize,
    pub k: usize,
    pub quantization_mse: f64,
    pub index: PathBuf,
}

pub fn build(args: &BuildArgs) -> Result<(), CliError> {
    let bank = read_jsonl_path(&args.poses)?;
    if bank.is_empty() {
        return Err(CliError::Param(format!("{} holds no poses", args.poses.display())));
    }
    let params = PqParams { m: args.m, k: args.k, iters: args.iters, seed: args.seed };
    let index = build_index(&bank, &params, args.train_limit)?;
    let data: Vec<f32> = bank.iter().map(index_vector).collect::<Result<Vec<_>, _>>()?.concat();
    save_index(&index, &args.out)?;
    let summary = BuildSummary {
        n: index.len(),
        dim: index.dim(),
        m: index.m(),
        k: index.k(),
        quantization_mse: index.quantization_mse(&data),
        index: args.out.clone(),
    };
    emit_json(&summary, None)
}

#[derive(Debug, Args)]
pub struct QueryArgs {
    /// Index built from `--poses`. Not needed with `--exact`.
    #[arg(long, required_unless_present = "exact")]
    pub index: Option<PathBuf>,
    /// The pose bank the index was built from.
    #[arg(long)]
    pub poses: PathBuf,
    /// Query poses, one per line.
    #[arg(long)]
    pub target: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    #[arg(long, default_value_t = 200)]
    pub shortlist: usize,
    /// Score every bank pose instead of using the index.
    #[arg(long)]
    pub exact: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct QueryResult {
    pub target: String,
    pub matches: Vec<Match>,
}

/// Checks that `index` was built over `bank`, position by position.
pub fn check_bank(index: &PqIndex, bank: &[HandPose]) -> Result<(), CliError> {
    if index.len() != bank.len() || index.ids().iter().zip(bank).any(|(id, p)| id != p.id()) {
        let ids: std::collections::BTreeSet<&str> = bank.iter().map(|p| p.id()).collect();
        let stored: std::collections::BTreeSet<&str> = index.ids().iter().map(String::as_str).collect();
        let missing: Vec<&str> = ids.difference(&stored).take(5).copied().collect();
        let extra: Vec<&str> = stored.difference(&ids).take(5).copied().collect();
        return Err(CliError::Param(format!(
            "index and pose bank disagree (index {} entries, bank {}; missing from index {missing:?}, extra in index {extra:?})",
            index.len(),
            bank.len()
        )));
    }
    Ok(())
}

pub fn query(args: &QueryArgs) -> Result<(), CliError> {
    let bank = read_jsonl_path(&args.poses)?;
    let targets = read_jsonl_path(&args.target)?;
    let params = SearchParams::new(args.shortlist, args.k)?;
    let index = match (&args.index, args.exact) {
        (Some(path), false) => {
            let index = load_index(path)?;
            check_bank(&index, &bank)?;
            Some(index)
        }
        _ => None,
    };
    let mut results = Vec::with_capacity(targets.len());
    for target in &targets {
        let matches = match &index {
            Some(index) => retrieve_pq(index, &bank, target, &params)?,
            None => retrieve_exact(&bank, target, args.k)?,
        };
        results.push(QueryResult { target: target.id().to_string(), matches });
    }
    emit_json(&results, args.out.as_deref())
}
