use std::path::PathBuf;

use clap::Args;
use posefuse_core::image::{blur_average, edge_map, encode_png, load_png};

use crate::{write_file, CliError};

#[derive(Debug, Args)]
pub struct MapsArgs {
    #[arg(long)]
    pub image: PathBuf,
    /// Edge map output (grayscale PNG).
    #[arg(long)]
    pub out_shape: PathBuf,
    /// Blurred color map output.
    #[arg(long)]
    pub out_color: PathBuf,
    #[arg(long, default_value_t = 2)]
    pub blur_radius: usize,
}

pub fn run(args: &MapsArgs) -> Result<(), CliError> {
    let img = load_png(&args.image)?;
    write_file(&args.out_shape, &encode_png(&edge_map(&img))?)?;
    write_file(&args.out_color, &encode_png(&blur_average(&img, args.blur_radius))?)?;
    Ok(())
}
