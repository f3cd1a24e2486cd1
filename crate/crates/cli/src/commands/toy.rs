use std::path::PathBuf;

use clap::Args;
use posefuse_core::image::encode_png;
use posefuse_core::toy::{train_toy_tagan_observed, ToyConfig, ToyError};

use crate::{emit_json, write_file, CliError};

#[derive(Debug, Args)]
pub struct TrainToyArgs {
    /// Flat `key = value` training configuration.
    #[arg(long)]
    pub toy_config: Option<PathBuf>,
    /// Overrides the configuration's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the configuration's step count.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Keep the discriminator fixed.
    #[arg(long)]
    pub freeze_d: bool,
    /// Report path (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Directory for generated-sample PNGs (written every `dump_every` steps).
    #[arg(long)]
    pub dump_dir: Option<PathBuf>,
}

pub fn load_config(path: &std::path::Path) -> Result<ToyConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    toml::from_str(&text).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
}

pub fn run(args: &TrainToyArgs) -> Result<(), CliError> {
    let mut config = match &args.toy_config {
        Some(path) => load_config(path)?,
        None => ToyConfig::default(),
    };
    if let Some(seed) = args.seed {
        config.seed = Some(seed);
    }
    if let Some(steps) = args.steps {
        config.steps = steps;
    }
    config.freeze_d |= args.freeze_d;

    let mut dump_error = None;
    let result = train_toy_tagan_observed(&config, |step, img| {
        if let (Some(dir), None) = (&args.dump_dir, &dump_error) {
            let path = dir.join(format!("step_{step:06}.png"));
            if let Err(e) = encode_png(img).map_err(CliError::from).and_then(|bytes| write_file(&path, &bytes)) {
                dump_error = Some(e);
            }
        }
    });
    if let Some(e) = dump_error {
        return Err(e);
    }
    match result {
        Ok(report) => emit_json(&report, args.out.as_deref()),
        Err(ToyError::DivergenceDetected { step, report }) => {
            emit_json(&report, args.out.as_deref())?;
            Err(CliError::Divergence(format!("non-finite loss at step {step}; partial report written")))
        }
        Err(e) => Err(e.into()),
    }
}
