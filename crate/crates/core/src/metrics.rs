//! Keypoint evaluation: end-point error, PCK, area under the PCK curve, and
//! the STB palm-to-wrist root conversion.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pose::{HandPose, MIDDLE_MCP, NUM_KEYPOINTS, WRIST};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("prediction set is empty")]
    EmptySet,
    #[error("pose {0} has no 3D keypoints")]
    Missing3D(String),
    #[error("bad threshold range: {0}")]
    BadRange(String),
    #[error("id mismatch: missing predictions for {missing:?}, unexpected predictions {extra:?}")]
    IdMismatch { missing: Vec<String>, extra: Vec<String> },
    #[error("duplicate id {0}")]
    DuplicateId(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Space {
    /// 2D keypoints, pixels.
    #[serde(rename = "2d")]
    Pixels2D,
    /// 3D keypoints, millimeters.
    #[serde(rename = "3d")]
    Millimeters3D,
}

impl Space {
    /// Default AUC threshold range.
    pub fn default_auc_range(self) -> (f64, f64) {
        match self {
            Space::Pixels2D => (0.0, 30.0),
            Space::Millimeters3D => (20.0, 50.0),
        }
    }
}

pub const DEFAULT_AUC_STEPS: usize = 100;

/// `(prediction, ground truth)` pairs scored in one space.
#[derive(Debug, Clone)]
pub struct PredictionSet {
    pairs: Vec<(HandPose, HandPose)>,
    space: Space,
}

impl PredictionSet {
    pub fn new(pairs: Vec<(HandPose, HandPose)>, space: Space) -> Result<Self, MetricsError> {
        if pairs.is_empty() {
            return Err(MetricsError::EmptySet);
        }
        if space == Space::Millimeters3D {
            for (p, g) in &pairs {
                for pose in [p, g] {
                    if pose.keypoints3d().is_none() {
                        return Err(MetricsError::Missing3D(pose.id().to_string()));
                    }
                }
            }
        }
        Ok(Self { pairs, space })
    }

    /// Pairs predictions with ground truth by id, in ground-truth order.
    pub fn align_by_id(predictions: Vec<HandPose>, ground_truth: Vec<HandPose>, space: Space) -> Result<Self, MetricsError> {
        let mut by_id = BTreeMap::new();
        for p in predictions {
            let id = p.id().to_string();
            if by_id.insert(id.clone(), p).is_some() {
                return Err(MetricsError::DuplicateId(id));
            }
        }
        let mut seen = BTreeSet::new();
        let mut missing = Vec::new();
        let mut pairs = Vec::with_capacity(ground_truth.len());
        for g in ground_truth {
            if !seen.insert(g.id().to_string()) {
                return Err(MetricsError::DuplicateId(g.id().to_string()));
            }
            match by_id.remove(g.id()) {
                Some(p) => pairs.push((p, g)),
                None => missing.push(g.id().to_string()),
            }
        }
        if !missing.is_empty() || !by_id.is_empty() {
            return Err(MetricsError::IdMismatch { missing, extra: by_id.into_keys().collect() });
        }
        Self::new(pairs, space)
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn pairs(&self) -> &[(HandPose, HandPose)] {
        &self.pairs
    }

    /// Per-keypoint Euclidean distances pooled over every pair, pair-major.
    pub fn distances(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.pairs.len() * NUM_KEYPOINTS);
        for (p, g) in &self.pairs {
            match self.space {
                Space::Pixels2D => {
                    for (a, b) in p.keypoints().iter().zip(g.keypoints()) {
                        out.push((a[0] - b[0]).hypot(a[1] - b[1]));
                    }
                }
                Space::Millimeters3D => {
                    let (pa, ga) = (p.keypoints3d().unwrap(), g.keypoints3d().unwrap());
                    for (a, b) in pa.iter().zip(ga) {
                        let d2: f64 = (0..3).map(|k| (a[k] - b[k]).powi(2)).sum();
                        out.push(d2.sqrt());
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Epe {
    pub mean: f64,
    pub median: f64,
}

pub fn epe(set: &PredictionSet) -> Epe {
    let mut d = set.distances();
    let mean = d.iter().sum::<f64>() / d.len() as f64;
    d.sort_by(f64::total_cmp);
    let n = d.len();
    let median = if n % 2 == 1 { d[n / 2] } else { 0.5 * (d[n / 2 - 1] + d[n / 2]) };
    Epe { mean, median }
}

/// Fraction of pooled keypoints with distance `<= threshold`.
pub fn pck(set: &PredictionSet, threshold: f64) -> Result<f64, MetricsError> {
    if !(threshold >= 0.0) {
        return Err(MetricsError::BadRange(format!("threshold {threshold} < 0")));
    }
    let d = set.distances();
    Ok(d.iter().filter(|v| **v <= threshold).count() as f64 / d.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PckCurve {
    pub thresholds: Vec<f64>,
    pub values: Vec<f64>,
    /// Trapezoidal area divided by the threshold range.
    pub auc: f64,
}

impl PckCurve {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("threshold,pck\n");
        for (t, v) in self.thresholds.iter().zip(&self.values) {
            s.push_str(&format!("{t},{v}\n"));
        }
        s
    }
}

/// PCK at `steps` evenly spaced thresholds from `t_min` to `t_max`
/// inclusive, with the normalized trapezoidal AUC.
pub fn pck_curve(set: &PredictionSet, t_min: f64, t_max: f64, steps: usize) -> Result<PckCurve, MetricsError> {
    if !(t_min >= 0.0 && t_max > t_min && t_max.is_finite()) {
        return Err(MetricsError::BadRange(format!("need 0 <= t_min < t_max, got [{t_min}, {t_max}]")));
    }
    if steps < 2 {
        return Err(MetricsError::BadRange(format!("need at least 2 steps, got {steps}")));
    }
    let mut d = set.distances();
    d.sort_by(f64::total_cmp);
    let n = d.len() as f64;
    let span = t_max - t_min;
    let thresholds: Vec<f64> = (0..steps)
        .map(|i| if i == steps - 1 { t_max } else { t_min + span * i as f64 / (steps - 1) as f64 })
        .collect();
    let values: Vec<f64> = thresholds
        .iter()
        .map(|t| d.partition_point(|v| *v <= *t) as f64 / n)
        .collect();
    let area: f64 = thresholds
        .windows(2)
        .zip(values.windows(2))
        .map(|(t, v)| (t[1] - t[0]) * (v[0] + v[1]) * 0.5)
        .sum();
    Ok(PckCurve { thresholds, values, auc: (area / span).clamp(0.0, 1.0) })
}

/// How the palm-to-wrist vector is doubled when converting STB roots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum RootDirection {
    /// `mcp + 2 (palm - mcp) = 2 palm - mcp`.
    #[default]
    FromMcp,
    /// `palm + 2 (palm - mcp) = 3 palm - 2 mcp`.
    FromPalm,
}

/// Replaces the palm root (index 0) of a 3D pose with an estimated wrist.
pub fn stb_root_convert(pose: &HandPose, direction: RootDirection) -> Result<HandPose, MetricsError> {
    stb_root_convert_at(pose, direction, MIDDLE_MCP)
}

pub fn stb_root_convert_at(pose: &HandPose, direction: RootDirection, mcp_index: usize) -> Result<HandPose, MetricsError> {
    let kp = pose.keypoints3d().ok_or_else(|| MetricsError::Missing3D(pose.id().to_string()))?;
    let mut out = *kp;
    let palm = kp[WRIST];
    let mcp = kp[mcp_index];
    out[WRIST] = match direction {
        RootDirection::FromMcp => [0, 1, 2].map(|k| 2.0 * palm[k] - mcp[k]),
        RootDirection::FromPalm => [0, 1, 2].map(|k| 3.0 * palm[k] - 2.0 * mcp[k]),
    };
    Ok(pose.clone().with_keypoints3d(&out).expect("finite inputs give finite root"))
}
