use std::path::PathBuf;

use clap::{Args, ValueEnum};
use posefuse_core::metrics::{epe, pck, pck_curve, stb_root_convert_at, PredictionSet, RootDirection, Space, DEFAULT_AUC_STEPS};
use posefuse_core::pose::{read_jsonl_path, MIDDLE_MCP};
use serde::{Deserialize, Serialize};

use crate::{emit_json, write_file, CliError};

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SpaceArg {
    #[value(name = "2d")]
    Pixels,
    #[value(name = "3d")]
    Millimeters,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DirectionArg {
    FromMcp,
    FromPalm,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long, value_enum, default_value = "2d")]
    pub space: SpaceArg,
    #[arg(long, default_value_t = 20.0)]
    pub pck_threshold: f64,
    /// AUC lower threshold (default 0 px in 2D, 20 mm in 3D).
    #[arg(long)]
    pub auc_min: Option<f64>,
    /// AUC upper threshold (default 30 px in 2D, 50 mm in 3D).
    #[arg(long)]
    pub auc_max: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_AUC_STEPS)]
    pub steps: usize,
    /// Replace the ground-truth palm root with an estimated wrist before
    /// scoring (3D only).
    #[arg(long)]
    pub stb_root: bool,
    #[arg(long, value_enum, default_value = "from-mcp")]
    pub root_direction: DirectionArg,
    #[arg(long, default_value_t = MIDDLE_MCP)]
    pub mcp_index: usize,
    /// Metrics JSON (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// PCK curve CSV.
    #[arg(long)]
    pub curve: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EvalReport {
    pub space: Space,
    pub poses: usize,
    pub keypoints: usize,
    pub epe_mean: f64,
    pub epe_median: f64,
    pub pck_threshold: f64,
    pub pck: f64,
    pub auc: f64,
    pub auc_range: [f64; 2],
    pub steps: usize,
}

pub fn run(args: &EvalArgs) -> Result<(), CliError> {
    let space = match args.space {
        SpaceArg::Pixels => Space::Pixels2D,
        SpaceArg::Millimeters => Space::Millimeters3D,
    };
    if args.mcp_index == 0 || args.mcp_index >= posefuse_core::NUM_KEYPOINTS {
        return Err(CliError::Param(format!("mcp-index {} is not a finger keypoint", args.mcp_index)));
    }
    let pred = read_jsonl_path(&args.pred)?;
    let mut gt = read_jsonl_path(&args.gt)?;
    if args.stb_root {
        if space != Space::Millimeters3D {
            return Err(CliError::Param("--stb-root needs --space 3d".into()));
        }
        let direction = match args.root_direction {
            DirectionArg::FromMcp => RootDirection::FromMcp,
            DirectionArg::FromPalm => RootDirection::FromPalm,
        };
        gt = gt.iter().map(|p| stb_root_convert_at(p, direction, args.mcp_index)).collect::<Result<_, _>>()?;
    }
    let set = PredictionSet::align_by_id(pred, gt, space)?;
    let (default_min, default_max) = space.default_auc_range();
    let (t_min, t_max) = (args.auc_min.unwrap_or(default_min), args.auc_max.unwrap_or(default_max));
    let curve = pck_curve(&set, t_min, t_max, args.steps)?;
    let e = epe(&set);
    let report = EvalReport {
        space,
        poses: set.pairs().len(),
        keypoints: set.pairs().len() * posefuse_core::NUM_KEYPOINTS,
        epe_mean: e.mean,
        epe_median: e.median,
        pck_threshold: args.pck_threshold,
        pck: pck(&set, args.pck_threshold)?,
        auc: curve.auc,
        auc_range: [t_min, t_max],
        steps: args.steps,
    };
    if let Some(path) = &args.curve {
        write_file(path, curve.to_csv().as_bytes())?;
    }
    emit_json(&report, args.out.as_deref())
}
