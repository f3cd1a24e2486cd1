//! Procedural hand poses.
//!
//! Stands in for a rendering simulator when a seeded pose bank is needed: a
//! planar five-finger skeleton with random per-joint flexion, global rotation,
//! scale and placement. Everything is a pure function of the seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::pose::{finger_base, HandPose, Point2, Point3, NUM_KEYPOINTS, WRIST};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthParams {
    /// Global in-plane rotation drawn uniformly from `±rotation_deg`.
    pub rotation_deg: f64,
    /// Hand length in pixels, drawn uniformly from this range.
    pub scale: (f64, f64),
    /// Wrist position drawn uniformly inside this box (x range, y range).
    pub placement: ((f64, f64), (f64, f64)),
    /// Max flexion per joint in degrees.
    pub max_flex_deg: f64,
    /// Gaussian-ish positional noise amplitude in pixels.
    pub jitter: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            rotation_deg: 30.0,
            scale: (80.0, 140.0),
            placement: ((100.0, 156.0), (160.0, 220.0)),
            max_flex_deg: 60.0,
            jitter: 0.5,
        }
    }
}

// Base direction of each finger relative to the hand axis (degrees), and
// segment lengths relative to hand length: wrist->MCP, MCP->PIP, PIP->DIP, DIP->TIP.
const FINGER_ANGLE: [f64; 5] = [-55.0, -18.0, -4.0, 9.0, 22.0];
const SEGMENTS: [[f64; 4]; 5] = [
    [0.25, 0.22, 0.17, 0.14],
    [0.48, 0.23, 0.14, 0.11],
    [0.50, 0.25, 0.16, 0.12],
    [0.47, 0.23, 0.15, 0.11],
    [0.43, 0.18, 0.11, 0.10],
];

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

/// Generates one pose. `keypoints3d` holds the unrotated skeleton in
/// millimeters (hand length 180 mm) with flexion pushing joints along z.
pub fn random_pose(rng: &mut ChaCha8Rng, params: &SynthParams, id: impl Into<String>) -> HandPose {
    let rot = uniform(rng, (-params.rotation_deg, params.rotation_deg)).to_radians();
    let scale = uniform(rng, params.scale);
    let wx = uniform(rng, params.placement.0);
    let wy = uniform(rng, params.placement.1);
    let spread = uniform(rng, (0.8, 1.2));

    let mut local = [[0.0f64; 3]; NUM_KEYPOINTS];
    local[WRIST] = [0.0, 0.0, 0.0];
    for finger in 0..5 {
        let base_angle = (FINGER_ANGLE[finger] * spread).to_radians();
        let seg = SEGMENTS[finger];
        // Hand axis points along -y (fingers up in image coordinates).
        let mut dir = [base_angle.sin(), -base_angle.cos()];
        let mut p = [seg[0] * dir[0], seg[0] * dir[1], 0.0];
        let b = finger_base(finger);
        local[b] = p;
        let mut pitch = 0.0f64;
        for (k, len) in seg[1..].iter().enumerate() {
            let flex = uniform(rng, (0.0, params.max_flex_deg)).to_radians();
            let side = uniform(rng, (-8.0, 8.0)).to_radians();
            pitch += flex;
            let (s, c) = side.sin_cos();
            dir = [dir[0] * c - dir[1] * s, dir[0] * s + dir[1] * c];
            let planar = len * pitch.cos();
            p = [p[0] + planar * dir[0], p[1] + planar * dir[1], p[2] + len * pitch.sin()];
            local[b + 1 + k] = p;
        }
    }

    let (s, c) = rot.sin_cos();
    let mut kp2: [Point2; NUM_KEYPOINTS] = [[0.0; 2]; NUM_KEYPOINTS];
    let mut kp3: [Point3; NUM_KEYPOINTS] = [[0.0; 3]; NUM_KEYPOINTS];
    for i in 0..NUM_KEYPOINTS {
        let [x, y, z] = local[i];
        let jx = uniform(rng, (-params.jitter, params.jitter));
        let jy = uniform(rng, (-params.jitter, params.jitter));
        kp2[i] = [wx + scale * (c * x - s * y) + jx, wy + scale * (s * x + c * y) + jy];
        kp3[i] = [180.0 * x, 180.0 * y, 180.0 * z];
    }
    HandPose::new(id, &kp2)
        .and_then(|p| p.with_keypoints3d(&kp3))
        .expect("synthetic pose is finite")
}

/// A bank of `n` poses with ids `"{prefix}{index:06}"`.
pub fn random_bank(n: usize, seed: u64, params: &SynthParams, prefix: &str) -> Vec<HandPose> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| random_pose(&mut rng, params, format!("{prefix}{i:06}")))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pose::{extract_feature, normalize_feature};

    #[test]
    fn deterministic_and_non_degenerate() {
        let a = random_bank(50, 3, &SynthParams::default(), "p");
        let b = random_bank(50, 3, &SynthParams::default(), "p");
        assert_eq!(a, b);
        for pose in &a {
            assert!(normalize_feature(&extract_feature(pose)).is_ok());
        }
        assert_eq!(a[7].id(), "p000007");
        assert_ne!(a[0], a[1]);
    }
}
