//! Hand poses and the ordered pairwise-difference feature.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Keypoints per hand: the wrist followed by four joints per finger.
pub const NUM_KEYPOINTS: usize = 21;

/// Number of unordered keypoint pairs, `21 * 20 / 2`.
pub const NUM_PAIRS: usize = NUM_KEYPOINTS * (NUM_KEYPOINTS - 1) / 2;

/// Length of a [`PoseFeature`]: one x and one y difference per pair.
pub const FEATURE_DIM: usize = NUM_PAIRS * 2;

/// Index of the wrist (or dataset root) keypoint.
pub const WRIST: usize = 0;

/// Index of the first joint of finger `finger` (0 = thumb, 4 = little).
/// Joints within a finger run from the knuckle towards the tip.
pub const fn finger_base(finger: usize) -> usize {
    1 + 4 * finger
}

/// Middle finger metacarpophalangeal joint.
pub const MIDDLE_MCP: usize = finger_base(2);

pub type Point2 = [f64; 2];
pub type Point3 = [f64; 3];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PoseError {
    #[error("expected {NUM_KEYPOINTS} keypoints, got {0}")]
    WrongKeypointCount(usize),
    #[error("keypoint {index} has a non-finite coordinate")]
    NonFiniteCoordinate { index: usize },
    #[error("keypoint {index} has {got} coordinates, expected {expected}")]
    WrongArity { index: usize, got: usize, expected: usize },
    #[error("pose is degenerate: all keypoints coincide")]
    DegeneratePose,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for PoseError {
    fn from(e: std::io::Error) -> Self {
        PoseError::Io(e.to_string())
    }
}

/// A validated hand pose: exactly 21 finite 2D keypoints in pixels, with an
/// optional 3D counterpart in millimeters.
#[derive(Debug, Clone, PartialEq)]
pub struct HandPose {
    id: String,
    keypoints: [Point2; NUM_KEYPOINTS],
    keypoints3d: Option<[Point3; NUM_KEYPOINTS]>,
}

/// On-disk JSONL record. Validation happens in [`HandPose::from_record`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PoseRecord {
    pub id: String,
    pub keypoints: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub keypoints3d: Option<Vec<Vec<f64>>>,
}

fn check_finite(values: &[f64], index: usize) -> Result<(), PoseError> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(PoseError::NonFiniteCoordinate { index })
    }
}

/// Builds a pose from raw coordinate pairs, preserving every value exactly.
pub fn parse_pose(raw: &[Point2], id: impl Into<String>) -> Result<HandPose, PoseError> {
    HandPose::new(id, raw)
}

impl HandPose {
    pub fn new(id: impl Into<String>, keypoints: &[Point2]) -> Result<Self, PoseError> {
        if keypoints.len() != NUM_KEYPOINTS {
            return Err(PoseError::WrongKeypointCount(keypoints.len()));
        }
        let mut kp = [[0.0; 2]; NUM_KEYPOINTS];
        for (i, p) in keypoints.iter().enumerate() {
            check_finite(p, i)?;
            kp[i] = *p;
        }
        Ok(Self { id: id.into(), keypoints: kp, keypoints3d: None })
    }

    pub fn with_keypoints3d(mut self, keypoints3d: &[Point3]) -> Result<Self, PoseError> {
        if keypoints3d.len() != NUM_KEYPOINTS {
            return Err(PoseError::WrongKeypointCount(keypoints3d.len()));
        }
        let mut kp = [[0.0; 3]; NUM_KEYPOINTS];
        for (i, p) in keypoints3d.iter().enumerate() {
            check_finite(p, i)?;
            kp[i] = *p;
        }
        self.keypoints3d = Some(kp);
        Ok(self)
    }

    pub fn from_record(record: &PoseRecord) -> Result<Self, PoseError> {
        let kp2 = collect_points::<2>(&record.keypoints)?;
        let mut pose = Self::new(record.id.clone(), &kp2)?;
        if let Some(raw3) = &record.keypoints3d {
            let kp3 = collect_points::<3>(raw3)?;
            pose = pose.with_keypoints3d(&kp3)?;
        }
        Ok(pose)
    }

    pub fn to_record(&self) -> PoseRecord {
        PoseRecord {
            id: self.id.clone(),
            keypoints: self.keypoints.iter().map(|p| p.to_vec()).collect(),
            keypoints3d: self
                .keypoints3d
                .map(|kp| kp.iter().map(|p| p.to_vec()).collect()),
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn keypoints(&self) -> &[Point2; NUM_KEYPOINTS] {
        &self.keypoints
    }

    pub fn keypoints3d(&self) -> Option<&[Point3; NUM_KEYPOINTS]> {
        self.keypoints3d.as_ref()
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    /// Applies `f` to every 2D keypoint. Returns an error if `f` produces a
    /// non-finite coordinate. 3D keypoints are carried over unchanged.
    pub fn map_points(&self, f: impl Fn(Point2) -> Point2) -> Result<Self, PoseError> {
        let mut out = self.clone();
        for (i, p) in out.keypoints.iter_mut().enumerate() {
            *p = f(*p);
            check_finite(p, i)?;
        }
        Ok(out)
    }

    /// Shifts every 2D keypoint by `(dx, dy)`.
    pub fn translated(&self, dx: f64, dy: f64) -> Result<Self, PoseError> {
        self.map_points(|[x, y]| [x + dx, y + dy])
    }
}

fn collect_points<const N: usize>(raw: &[Vec<f64>]) -> Result<Vec<[f64; N]>, PoseError> {
    if raw.len() != NUM_KEYPOINTS {
        return Err(PoseError::WrongKeypointCount(raw.len()));
    }
    raw.iter()
        .enumerate()
        .map(|(index, p)| {
            <[f64; N]>::try_from(p.as_slice()).map_err(|_| PoseError::WrongArity {
                index,
                got: p.len(),
                expected: N,
            })
        })
        .collect()
}

/// The 420-entry ordered pairwise-difference vector of a pose.
///
/// Entries run over pairs `(i, j)`, `i < j`, in lexicographic order; each pair
/// contributes `x_i - x_j` followed by `y_i - y_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseFeature(Vec<f64>);

impl PoseFeature {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &PoseFeature) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    /// Wraps an arbitrary vector. The caller is responsible for its length.
    pub fn from_values(values: Vec<f64>) -> Self {
        Self(values)
    }
}

/// Feature of a bare keypoint array; shared by [`extract_feature`] and the
/// alignment code, which scores transformed keypoints without building a pose.
pub fn feature_of_points(points: &[Point2; NUM_KEYPOINTS]) -> PoseFeature {
    let mut values = Vec::with_capacity(FEATURE_DIM);
    for i in 0..NUM_KEYPOINTS {
        for j in (i + 1)..NUM_KEYPOINTS {
            values.push(points[i][0] - points[j][0]);
            values.push(points[i][1] - points[j][1]);
        }
    }
    PoseFeature(values)
}

pub fn extract_feature(pose: &HandPose) -> PoseFeature {
    feature_of_points(&pose.keypoints)
}

/// Scales a feature to unit L2 norm.
pub fn normalize_feature(feature: &PoseFeature) -> Result<PoseFeature, PoseError> {
    let norm = feature.norm();
    if norm == 0.0 || !norm.is_finite() {
        return Err(PoseError::DegeneratePose);
    }
    Ok(PoseFeature(feature.0.iter().map(|v| v / norm).collect()))
}

/// Reads a JSONL pose file. Blank lines are skipped; errors carry the
/// 1-based line number.
pub fn read_jsonl<R: BufRead>(reader: R) -> Result<Vec<HandPose>, PoseError> {
    let mut poses = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: PoseRecord = serde_json::from_str(&line).map_err(|e| PoseError::Parse {
            line: n + 1,
            message: e.to_string(),
        })?;
        let pose = HandPose::from_record(&record).map_err(|e| PoseError::Parse {
            line: n + 1,
            message: e.to_string(),
        })?;
        poses.push(pose);
    }
    Ok(poses)
}

pub fn read_jsonl_path(path: impl AsRef<std::path::Path>) -> Result<Vec<HandPose>, PoseError> {
    let file = std::fs::File::open(path)?;
    read_jsonl(std::io::BufReader::new(file))
}

pub fn write_jsonl<W: Write>(mut writer: W, poses: &[HandPose]) -> Result<(), PoseError> {
    for pose in poses {
        let line = serde_json::to_string(&pose.to_record()).map_err(|e| PoseError::Io(e.to_string()))?;
        writeln!(writer, "{line}")?;
    }
    Ok(())
}
