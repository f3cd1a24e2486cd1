//! Affine alignment between poses, the aligned cosine kernel, and exhaustive
//! retrieval.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pose::{extract_feature, feature_of_points, HandPose, Point2, NUM_KEYPOINTS};

/// Fits with a scatter-matrix condition number above this are rejected.
pub const MAX_CONDITION: f64 = 1e10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AlignError {
    #[error("pose is degenerate: all keypoints coincide")]
    DegeneratePose,
    #[error("source keypoints are collinear or coincident (condition {condition:e})")]
    DegenerateConfiguration { condition: f64 },
    #[error("pose bank is empty")]
    EmptyBank,
    #[error("k = {k} is outside 1..={bank}")]
    KTooLarge { k: usize, bank: usize },
}

/// A 2D affine map `p -> A p + t`.
///
/// Serializes as the six numbers `[a11, a12, a21, a22, tx, ty]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 6]", into = "[f64; 6]")]
pub struct Affine2D {
    pub a11: f64,
    pub a12: f64,
    pub a21: f64,
    pub a22: f64,
    pub tx: f64,
    pub ty: f64,
}

impl From<[f64; 6]> for Affine2D {
    fn from([a11, a12, a21, a22, tx, ty]: [f64; 6]) -> Self {
        Self { a11, a12, a21, a22, tx, ty }
    }
}

impl From<Affine2D> for [f64; 6] {
    fn from(t: Affine2D) -> Self {
        t.to_array()
    }
}

impl Affine2D {
    pub const IDENTITY: Affine2D = Affine2D { a11: 1.0, a12: 0.0, a21: 0.0, a22: 1.0, tx: 0.0, ty: 0.0 };

    pub fn translation(tx: f64, ty: f64) -> Self {
        Self { tx, ty, ..Self::IDENTITY }
    }

    /// Rotation by `angle` radians and uniform scaling, then translation.
    pub fn similarity(scale: f64, angle: f64, tx: f64, ty: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self { a11: scale * c, a12: -scale * s, a21: scale * s, a22: scale * c, tx, ty }
    }

    pub fn to_array(&self) -> [f64; 6] {
        [self.a11, self.a12, self.a21, self.a22, self.tx, self.ty]
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    pub fn determinant(&self) -> f64 {
        self.a11 * self.a22 - self.a12 * self.a21
    }

    #[inline]
    pub fn apply(&self, [x, y]: Point2) -> Point2 {
        [self.a11 * x + self.a12 * y + self.tx, self.a21 * x + self.a22 * y + self.ty]
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Affine2D) -> Affine2D {
        Affine2D {
            a11: self.a11 * other.a11 + self.a12 * other.a21,
            a12: self.a11 * other.a12 + self.a12 * other.a22,
            a21: self.a21 * other.a11 + self.a22 * other.a21,
            a22: self.a21 * other.a12 + self.a22 * other.a22,
            tx: self.a11 * other.tx + self.a12 * other.ty + self.tx,
            ty: self.a21 * other.tx + self.a22 * other.ty + self.ty,
        }
    }

    /// `None` when the linear part is singular.
    pub fn inverse(&self) -> Option<Affine2D> {
        let det = self.determinant();
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        let a11 = self.a22 / det;
        let a12 = -self.a12 / det;
        let a21 = -self.a21 / det;
        let a22 = self.a11 / det;
        Some(Affine2D {
            a11,
            a12,
            a21,
            a22,
            tx: -(a11 * self.tx + a12 * self.ty),
            ty: -(a21 * self.tx + a22 * self.ty),
        })
    }

    pub fn apply_points(&self, points: &[Point2; NUM_KEYPOINTS]) -> [Point2; NUM_KEYPOINTS] {
        points.map(|p| self.apply(p))
    }

    /// Transforms a pose's 2D keypoints; id and 3D keypoints are kept.
    pub fn apply_pose(&self, pose: &HandPose) -> HandPose {
        pose.map_points(|p| self.apply(p))
            .expect("finite affine map keeps keypoints finite")
    }
}

/// Sum of squared distances between `t(source_i)` and `target_i`.
pub fn residual(t: &Affine2D, source: &[Point2], target: &[Point2]) -> f64 {
    source
        .iter()
        .zip(target)
        .map(|(u, v)| {
            let p = t.apply(*u);
            (p[0] - v[0]).powi(2) + (p[1] - v[1]).powi(2)
        })
        .sum()
}

/// Condition number of a symmetric positive semi-definite 2×2 matrix.
fn condition_2x2(sxx: f64, sxy: f64, syy: f64) -> f64 {
    let mean = 0.5 * (sxx + syy);
    let diff = 0.5 * (sxx - syy);
    let radius = (diff * diff + sxy * sxy).sqrt();
    let hi = mean + radius;
    let lo = mean - radius;
    if lo <= 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// Least-squares 6-DOF affine fit mapping `source` points onto `target`
/// points. The normal equations are solved in centered form: the translation
/// decouples, leaving a 2×2 scatter system for the linear part.
pub fn fit_points(source: &[Point2], target: &[Point2]) -> Result<Affine2D, AlignError> {
    debug_assert_eq!(source.len(), target.len());
    let n = source.len() as f64;
    let (mut ux, mut uy, mut vx, mut vy) = (0.0, 0.0, 0.0, 0.0);
    for (u, v) in source.iter().zip(target) {
        ux += u[0];
        uy += u[1];
        vx += v[0];
        vy += v[1];
    }
    ux /= n;
    uy /= n;
    vx /= n;
    vy /= n;

    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    let (mut cxx, mut cxy, mut cyx, mut cyy) = (0.0, 0.0, 0.0, 0.0);
    for (u, v) in source.iter().zip(target) {
        let (dx, dy) = (u[0] - ux, u[1] - uy);
        let (ex, ey) = (v[0] - vx, v[1] - vy);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
        cxx += ex * dx;
        cxy += ex * dy;
        cyx += ey * dx;
        cyy += ey * dy;
    }
    let condition = condition_2x2(sxx, sxy, syy);
    if !(condition <= MAX_CONDITION) {
        return Err(AlignError::DegenerateConfiguration { condition });
    }
    let det = sxx * syy - sxy * sxy;
    // A = C S^-1 with S^-1 = [syy, -sxy; -sxy, sxx] / det.
    let a11 = (cxx * syy - cxy * sxy) / det;
    let a12 = (cxy * sxx - cxx * sxy) / det;
    let a21 = (cyx * syy - cyy * sxy) / det;
    let a22 = (cyy * sxx - cyx * sxy) / det;
    Ok(Affine2D {
        a11,
        a12,
        a21,
        a22,
        tx: vx - (a11 * ux + a12 * uy),
        ty: vy - (a21 * ux + a22 * uy),
    })
}

/// Affine map that best carries `source` onto `target` in the least-squares sense.
pub fn fit_affine(source: &HandPose, target: &HandPose) -> Result<Affine2D, AlignError> {
    fit_points(source.keypoints(), target.keypoints())
}

fn cosine(a: &[f64], b: &[f64]) -> Result<f64, AlignError> {
    let (mut ab, mut aa, mut bb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        ab += x * y;
        aa += x * x;
        bb += y * y;
    }
    if aa == 0.0 || bb == 0.0 {
        return Err(AlignError::DegeneratePose);
    }
    Ok((ab / (aa.sqrt() * bb.sqrt())).clamp(-1.0, 1.0))
}

/// Aligned cosine kernel: fits `g` carrying `candidate` onto `target`, then
/// returns the cosine between the pairwise-difference features of
/// `g(candidate)` and `target`, together with `g`.
pub fn similarity(candidate: &HandPose, target: &HandPose) -> Result<(f64, Affine2D), AlignError> {
    let target_feature = extract_feature(target);
    similarity_with_feature(candidate, target, target_feature.values())
}

fn similarity_with_feature(
    candidate: &HandPose,
    target: &HandPose,
    target_feature: &[f64],
) -> Result<(f64, Affine2D), AlignError> {
    if target_feature.iter().all(|v| *v == 0.0) {
        return Err(AlignError::DegeneratePose);
    }
    let g = fit_affine(candidate, target)?;
    let aligned = feature_of_points(&g.apply_points(candidate.keypoints()));
    let score = cosine(aligned.values(), target_feature)?;
    Ok((score, g))
}

/// A retrieved candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Match {
    #[serde(rename = "id")]
    pub candidate_id: String,
    /// Position of the candidate in the bank it was retrieved from.
    pub bank_index: usize,
    pub score: f64,
    pub transform: Affine2D,
}

/// Descending score, then ascending bank index.
pub(crate) fn rank_order(a: &(usize, f64), b: &(usize, f64)) -> Ordering {
    b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal).then(a.0.cmp(&b.0))
}

/// Scores the given bank positions against `target` and keeps the best `k`.
/// Degenerate candidates are skipped; the number skipped is returned.
pub(crate) fn rank_candidates(
    bank: &[HandPose],
    positions: &[usize],
    target: &HandPose,
    k: usize,
) -> Result<(Vec<Match>, usize), AlignError> {
    let target_feature = extract_feature(target);
    let scored: Vec<Option<(f64, Affine2D)>> = positions
        .par_iter()
        .map(|&i| similarity_with_feature(&bank[i], target, target_feature.values()).ok())
        .collect();
    if target_feature.values().iter().all(|v| *v == 0.0) {
        return Err(AlignError::DegeneratePose);
    }
    let mut skipped = 0;
    let mut keyed = Vec::with_capacity(scored.len());
    for (slot, s) in scored.iter().enumerate() {
        match s {
            Some((score, _)) => keyed.push((slot, *score)),
            None => skipped += 1,
        }
    }
    let take = k.min(keyed.len());
    if take > 0 && take < keyed.len() {
        keyed.select_nth_unstable_by(take - 1, |a, b| rank_order(&(positions[a.0], a.1), &(positions[b.0], b.1)));
        keyed.truncate(take);
    }
    keyed.sort_by(|a, b| rank_order(&(positions[a.0], a.1), &(positions[b.0], b.1)));
    let matches = keyed
        .into_iter()
        .map(|(slot, score)| {
            let i = positions[slot];
            Match {
                candidate_id: bank[i].id().to_string(),
                bank_index: i,
                score,
                transform: scored[slot].as_ref().expect("scored").1,
            }
        })
        .collect();
    Ok((matches, skipped))
}

/// Exhaustive retrieval: the `k` bank entries with the highest aligned
/// similarity to `target`, best first, ties broken by bank order.
pub fn retrieve_exact(bank: &[HandPose], target: &HandPose, k: usize) -> Result<Vec<Match>, AlignError> {
    if bank.is_empty() {
        return Err(AlignError::EmptyBank);
    }
    if k == 0 || k > bank.len() {
        return Err(AlignError::KTooLarge { k, bank: bank.len() });
    }
    let positions: Vec<usize> = (0..bank.len()).collect();
    let (matches, skipped) = rank_candidates(bank, &positions, target, k)?;
    if skipped > 0 {
        log::warn!("skipped {skipped} degenerate bank entries");
    }
    Ok(matches)
}
