//! Compositing manifests.
//!
//! ```json
//! {
//!   "output_dir": "out",
//!   "blur_radius": 2,
//!   "histogram_bins": 32,
//!   "seed": 7,
//!   "loss": true,
//!   "bank": { "poses": "bank.jsonl", "index": "bank.tapq", "shortlist": 200 },
//!   "jobs": [
//!     { "foreground": "fg.png", "mask": "mask.png", "background": "bg.png",
//!       "keypoints": [[10.0, 12.5], ...], "transform": [1, 0, 0, 1, 30, 40] },
//!     { "foreground": "hands/{id}.png", "mask": "hands/{id}_mask.png",
//!       "background": "bg.png", "target_pose": "target.jsonl" }
//!   ]
//! }
//! ```
//!
//! Relative paths resolve against the manifest's directory. A job places its
//! foreground either with an explicit `transform` or by retrieving the bank
//! pose closest to `target_pose` and using the fitted affine; in the latter
//! case `{id}` in the foreground and mask paths expands to the retrieved id
//! and keypoints default to the bank pose.

use std::path::{Path, PathBuf};

use posefuse_core::pose::{read_jsonl_path, HandPose, Point2};
use posefuse_core::Affine2D;
use serde::{Deserialize, Serialize};

use crate::CliError;

fn default_blur() -> usize {
    2
}
fn default_bins() -> usize {
    32
}
fn default_shortlist() -> usize {
    200
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub output_dir: PathBuf,
    #[serde(default = "default_blur")]
    pub blur_radius: usize,
    #[serde(default = "default_bins")]
    pub histogram_bins: usize,
    /// Recorded in every annotation for provenance.
    #[serde(default)]
    pub seed: u64,
    /// Attach a TA-loss report against the background's color map.
    #[serde(default)]
    pub loss: bool,
    #[serde(default)]
    pub bank: Option<BankRef>,
    pub jobs: Vec<Job>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BankRef {
    pub poses: PathBuf,
    /// Without an index, retrieval is exhaustive.
    #[serde(default)]
    pub index: Option<PathBuf>,
    #[serde(default = "default_shortlist")]
    pub shortlist: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PoseSource {
    Inline(Vec<Point2>),
    Path(PathBuf),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Job {
    #[serde(default)]
    pub id: Option<String>,
    pub foreground: String,
    pub mask: String,
    pub background: PathBuf,
    #[serde(default)]
    pub keypoints: Option<PoseSource>,
    #[serde(default)]
    pub transform: Option<Affine2D>,
    #[serde(default)]
    pub target_pose: Option<PoseSource>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<(Self, PathBuf), CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let manifest: Manifest =
            serde_json::from_str(&text).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        manifest.validate()?;
        Ok((manifest, base))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.histogram_bins == 0 {
            return Err(CliError::Param("histogram_bins must be positive".into()));
        }
        for (i, job) in self.jobs.iter().enumerate() {
            match (&job.transform, &job.target_pose) {
                (Some(_), Some(_)) => {
                    return Err(CliError::Param(format!("job {i}: transform and target_pose are mutually exclusive")))
                }
                (None, None) => return Err(CliError::Param(format!("job {i}: needs a transform or a target_pose"))),
                (Some(_), None) if job.keypoints.is_none() => {
                    return Err(CliError::Param(format!("job {i}: keypoints are required with an explicit transform")))
                }
                (None, Some(_)) if self.bank.is_none() => {
                    return Err(CliError::Param(format!("job {i}: target_pose needs a bank")))
                }
                _ => {}
            }
        }
        let mut seen = std::collections::BTreeSet::new();
        for (i, job) in self.jobs.iter().enumerate() {
            if !seen.insert(job_id(job, i)) {
                return Err(CliError::Param(format!("duplicate job id {}", job_id(job, i))));
            }
        }
        Ok(())
    }
}

pub fn job_id(job: &Job, index: usize) -> String {
    job.id.clone().unwrap_or_else(|| format!("job{index:04}"))
}

pub fn resolve(base: &Path, p: impl AsRef<Path>) -> PathBuf {
    let p = p.as_ref();
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

impl PoseSource {
    /// Inline points or the first pose of a JSONL file.
    pub fn load(&self, base: &Path, id: &str) -> Result<HandPose, CliError> {
        match self {
            PoseSource::Inline(points) => Ok(HandPose::new(id, points)?),
            PoseSource::Path(p) => {
                let path = resolve(base, p);
                read_jsonl_path(&path)?
                    .into_iter()
                    .next()
                    .ok_or_else(|| CliError::Parse(format!("{}: no pose", path.display())))
            }
        }
    }
}
