use std::path::PathBuf;

use clap::Args;
use posefuse_core::pose::write_jsonl;
use posefuse_core::synth::{random_bank, SynthParams};

use crate::{write_file, CliError};

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "pose")]
    pub prefix: String,
    /// Global rotation range in degrees (uniform in ±value).
    #[arg(long, default_value_t = 30.0)]
    pub rotation_deg: f64,
}

pub fn run(args: &SynthArgs) -> Result<(), CliError> {
    if !(args.rotation_deg.is_finite() && args.rotation_deg >= 0.0) {
        return Err(CliError::Param("rotation-deg must be a non-negative number".into()));
    }
    let params = SynthParams { rotation_deg: args.rotation_deg, ..SynthParams::default() };
    let bank = random_bank(args.n, args.seed, &params, &args.prefix);
    let mut buf = Vec::new();
    write_jsonl(&mut buf, &bank)?;
    write_file(&args.out, &buf)
}
