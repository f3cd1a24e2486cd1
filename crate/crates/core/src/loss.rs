//! Tonality-alignment loss algebra: L1 shape distance, KL color distance,
//! their weighted sum, and the adversarial objective value.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::image::{color_histogram_mode, ColorHistogram, HistogramMode, Image, ImageError};

/// Additive smoothing applied to every histogram bin before KL.
pub const KL_EPSILON: f64 = 1e-8;

/// Probability floor inside the adversarial log terms.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LossError {
    #[error("image shapes differ")]
    DimMismatch,
    #[error("histogram layouts differ")]
    LayoutMismatch,
    #[error("probability {0} is outside [0, 1]")]
    OutOfRange(f64),
    #[error("weights must be finite and non-negative")]
    InvalidWeights,
    #[error(transparent)]
    Image(#[from] ImageError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    /// Color (KL) weight.
    pub lambda1: f64,
    /// Shape (L1) weight.
    pub lambda2: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { lambda1: 10.0, lambda2: 100.0 }
    }
}

impl LossWeights {
    pub fn new(lambda1: f64, lambda2: f64) -> Result<Self, LossError> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if ok(lambda1) && ok(lambda2) {
            Ok(Self { lambda1, lambda2 })
        } else {
            Err(LossError::InvalidWeights)
        }
    }

    pub fn combine(&self, color: f64, shape: f64) -> f64 {
        self.lambda1 * color + self.lambda2 * shape
    }
}

/// Which image supplies the reference histogram for the color term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ColorReference {
    /// The blurred color map `x_b`.
    #[default]
    ColorMap,
    /// The target image `y`.
    Target,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaOptions {
    pub bins: usize,
    pub reference: ColorReference,
    pub mode: HistogramMode,
}

impl Default for TaOptions {
    fn default() -> Self {
        Self { bins: 32, reference: ColorReference::ColorMap, mode: HistogramMode::Marginal }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub shape: f64,
    pub color: f64,
    pub ta: f64,
    /// Adversarial objective, when discriminator outputs were supplied.
    pub gan: Option<f64>,
    pub weights: LossWeights,
    pub options: TaOptions,
}

/// Mean absolute difference over all samples.
pub fn shape_loss(y: &Image, g_out: &Image) -> Result<f64, LossError> {
    if !y.same_shape(g_out) {
        return Err(LossError::DimMismatch);
    }
    let n = y.data().len();
    if n == 0 {
        return Ok(0.0);
    }
    Ok(y.data().iter().zip(g_out.data()).map(|(a, b)| (a - b).abs()).sum::<f64>() / n as f64)
}

fn smoothed(group: &[f64]) -> Vec<f64> {
    let total: f64 = group.iter().map(|v| v + KL_EPSILON).sum();
    group.iter().map(|v| (v + KL_EPSILON) / total).collect()
}

/// `KL(p ‖ q)` in nats after smoothing both distributions.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    let p = smoothed(p);
    let q = smoothed(q);
    p.iter().zip(&q).map(|(pi, qi)| pi * (pi / qi).ln()).sum::<f64>().max(0.0)
}

/// `D_c = -Σ h_g(i) log(h_y(i) / h_g(i))`, i.e. `KL(h_g ‖ h_y)`, with
/// `h_g` the generated image's histogram. Marginal histograms contribute the
/// sum of their per-channel divergences.
pub fn color_loss(h_g: &ColorHistogram, h_y: &ColorHistogram) -> Result<f64, LossError> {
    if !h_g.same_layout(h_y) {
        return Err(LossError::LayoutMismatch);
    }
    Ok((0..h_g.groups()).map(|g| kl_divergence(h_g.group(g), h_y.group(g))).sum())
}

pub fn ta_loss(weights: LossWeights, y: &Image, g_out: &Image, x_b: &Image, bins: usize) -> Result<LossReport, LossError> {
    ta_loss_with(weights, y, g_out, x_b, &TaOptions { bins, ..TaOptions::default() })
}

pub fn ta_loss_with(
    weights: LossWeights,
    y: &Image,
    g_out: &Image,
    x_b: &Image,
    options: &TaOptions,
) -> Result<LossReport, LossError> {
    let shape = shape_loss(y, g_out)?;
    let reference = match options.reference {
        ColorReference::ColorMap => x_b,
        ColorReference::Target => y,
    };
    let h_g = color_histogram_mode(g_out, options.bins, None, options.mode)?;
    let h_y = color_histogram_mode(reference, options.bins, None, options.mode)?;
    let color = color_loss(&h_g, &h_y)?;
    Ok(LossReport { shape, color, ta: weights.combine(color, shape), gan: None, weights, options: *options })
}

/// `log D(real) + log(1 - D(fake))` with both arguments floored at
/// [`PROB_FLOOR`].
pub fn gan_objective(d_real: f64, d_fake: f64) -> Result<f64, LossError> {
    for p in [d_real, d_fake] {
        if !(0.0..=1.0).contains(&p) {
            return Err(LossError::OutOfRange(p));
        }
    }
    Ok(d_real.max(PROB_FLOOR).ln() + (1.0 - d_fake).max(PROB_FLOOR).ln())
}
