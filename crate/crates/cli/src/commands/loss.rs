use std::path::PathBuf;

use clap::{Args, ValueEnum};
use posefuse_core::image::{blur_average, load_png, HistogramMode};
use posefuse_core::loss::{gan_objective, ta_loss_with, ColorReference, TaOptions};
use posefuse_core::LossWeights;

use crate::{emit_json, CliError};

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ReferenceArg {
    ColorMap,
    Target,
}

#[derive(Debug, Args)]
pub struct LossArgs {
    /// Real image `y`.
    #[arg(long)]
    pub target: PathBuf,
    /// Generated image.
    #[arg(long)]
    pub generated: PathBuf,
    /// Color map `x_b`; computed as a blur of the target when absent.
    #[arg(long)]
    pub color_map: Option<PathBuf>,
    #[arg(long, default_value_t = 2)]
    pub blur_radius: usize,
    #[arg(long, default_value_t = 32)]
    pub bins: usize,
    #[arg(long, default_value_t = 10.0)]
    pub lambda1: f64,
    #[arg(long, default_value_t = 100.0)]
    pub lambda2: f64,
    /// Which image provides the reference histogram.
    #[arg(long, value_enum, default_value = "color-map")]
    pub reference: ReferenceArg,
    /// Use one joint color histogram instead of per-channel histograms.
    #[arg(long)]
    pub joint: bool,
    /// Discriminator output on the real image.
    #[arg(long, requires = "d_fake")]
    pub d_real: Option<f64>,
    /// Discriminator output on the generated image.
    #[arg(long, requires = "d_real")]
    pub d_fake: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(args: &LossArgs) -> Result<(), CliError> {
    let y = load_png(&args.target)?;
    let g = load_png(&args.generated)?;
    let x_b = match &args.color_map {
        Some(path) => load_png(path)?,
        None => blur_average(&y, args.blur_radius),
    };
    let weights = LossWeights::new(args.lambda1, args.lambda2)?;
    let options = TaOptions {
        bins: args.bins,
        reference: match args.reference {
            ReferenceArg::ColorMap => ColorReference::ColorMap,
            ReferenceArg::Target => ColorReference::Target,
        },
        mode: if args.joint { HistogramMode::Joint } else { HistogramMode::Marginal },
    };
    let mut report = ta_loss_with(weights, &y, &g, &x_b, &options)?;
    if let (Some(real), Some(fake)) = (args.d_real, args.d_fake) {
        report.gan = Some(gan_objective(real, fake)?);
    }
    emit_json(&report, args.out.as_deref())
}
