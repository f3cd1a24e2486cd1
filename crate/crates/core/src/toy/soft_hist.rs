//! Differentiable histogram relaxation for training the color term.
//!
//! Each sample spreads unit mass over the bins with Gaussian weights centered
//! on the bin midpoints (bandwidth one bin width), normalized per sample.

use crate::loss::KL_EPSILON;

#[inline]
fn kernel_row(v: f64, bins: usize, out: &mut [f64]) -> f64 {
    let width = 1.0 / bins as f64;
    let inv_two_var = 1.0 / (2.0 * width * width);
    let mut z = 0.0;
    for (b, w) in out.iter_mut().enumerate() {
        let d = v - (b as f64 + 0.5) * width;
        *w = (-d * d * inv_two_var).exp();
        z += *w;
    }
    z
}

/// Channel-major soft histogram of interleaved samples; each channel sums to 1.
pub fn soft_histogram(values: &[f64], channels: usize, bins: usize) -> Vec<f64> {
    let pixels = values.len() / channels;
    let mut hist = vec![0.0; channels * bins];
    let mut row = vec![0.0; bins];
    for (i, v) in values.iter().enumerate() {
        let c = i % channels;
        let z = kernel_row(*v, bins, &mut row);
        for (h, w) in hist[c * bins..(c + 1) * bins].iter_mut().zip(&row) {
            *h += w / z;
        }
    }
    hist.iter_mut().for_each(|h| *h /= pixels as f64);
    hist
}

fn smooth(group: &[f64]) -> (Vec<f64>, f64) {
    let total: f64 = group.iter().map(|v| v + KL_EPSILON).sum();
    (group.iter().map(|v| (v + KL_EPSILON) / total).collect(), total)
}

/// Sum over channels of `KL(soft(values) ‖ reference)`, both smoothed as in
/// [`crate::loss::color_loss`], and its gradient with respect to `values`.
pub fn soft_kl_with_grad(values: &[f64], channels: usize, bins: usize, reference: &[f64]) -> (f64, Vec<f64>) {
    let pixels = values.len() / channels;
    let hist = soft_histogram(values, channels, bins);
    let mut kl = 0.0;
    // dKL/dh per bin.
    let mut dh = vec![0.0; channels * bins];
    for c in 0..channels {
        let (p, total) = smooth(&hist[c * bins..(c + 1) * bins]);
        let (q, _) = smooth(&reference[c * bins..(c + 1) * bins]);
        let mut raw = vec![0.0; bins];
        for b in 0..bins {
            let lr = (p[b] / q[b]).ln();
            kl += p[b] * lr;
            raw[b] = lr + 1.0;
        }
        // p = (h + eps) / Σ(h + eps); chain through the renormalization.
        let mean_term: f64 = raw.iter().zip(&p).map(|(r, pb)| r * pb).sum();
        for b in 0..bins {
            dh[c * bins + b] = (raw[b] - mean_term) / total;
        }
    }

    let width = 1.0 / bins as f64;
    let inv_var = 1.0 / (width * width);
    let mut grad = vec![0.0; values.len()];
    let mut row = vec![0.0; bins];
    for (i, v) in values.iter().enumerate() {
        let c = i % channels;
        let z = kernel_row(*v, bins, &mut row);
        // s_b = w_b / z, a_b = d(log w_b)/dv, ds_b/dv = s_b (a_b - Σ s a).
        let mut mean_a = 0.0;
        for (b, w) in row.iter().enumerate() {
            let a = -(v - (b as f64 + 0.5) * width) * inv_var;
            mean_a += w / z * a;
        }
        let mut g = 0.0;
        for (b, w) in row.iter().enumerate() {
            let a = -(v - (b as f64 + 0.5) * width) * inv_var;
            g += dh[c * bins + b] * (w / z) * (a - mean_a);
        }
        grad[i] = g / pixels as f64;
    }
    (kl, grad)
}
