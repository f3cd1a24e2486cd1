use rayon::prelude::*;

use super::{Image, ImageError};
use crate::align::Affine2D;
use crate::pose::HandPose;

/// A foreground pasted onto a background through an affine placement.
/// Pixel `(i, j)` sits at coordinates `(i, j)`, the same frame as keypoints.
#[derive(Debug, Clone)]
pub struct CompositeJob {
    pub foreground: Image,
    /// Single-channel alpha, same size as `foreground`.
    pub mask: Image,
    /// Maps foreground coordinates to background coordinates.
    pub transform: Affine2D,
    pub background: Image,
    /// Keypoints in the foreground frame.
    pub keypoints: HandPose,
}

/// Bilinear sample at `(x, y)`; `None` outside the pixel-center hull.
#[inline]
fn bilinear(img: &Image, x: f64, y: f64, c: usize) -> Option<f64> {
    const EPS: f64 = 1e-9;
    let (w, h) = (img.width() as f64, img.height() as f64);
    if !(x >= -EPS && y >= -EPS && x <= w - 1.0 + EPS && y <= h - 1.0 + EPS) {
        return None;
    }
    let x = x.clamp(0.0, w - 1.0);
    let y = y.clamp(0.0, h - 1.0);
    let x0 = x.floor() as usize;
    let y0 = y.floor() as usize;
    let x1 = (x0 + 1).min(img.width() - 1);
    let y1 = (y0 + 1).min(img.height() - 1);
    let fx = x - x0 as f64;
    let fy = y - y0 as f64;
    if fx == 0.0 && fy == 0.0 {
        return Some(img.get(x0, y0, c));
    }
    let top = img.get(x0, y0, c) * (1.0 - fx) + img.get(x1, y0, c) * fx;
    let bottom = img.get(x0, y1, c) * (1.0 - fx) + img.get(x1, y1, c) * fx;
    Some(top * (1.0 - fy) + bottom * fy)
}

/// Warps the foreground and mask into the background frame by inverse
/// mapping, alpha-blends `m * fg + (1 - m) * bg`, and carries the keypoints
/// through the forward transform.
pub fn composite(job: &CompositeJob) -> Result<(Image, HandPose), ImageError> {
    let CompositeJob { foreground, mask, transform, background, keypoints } = job;
    if mask.channels() != 1 || mask.width() != foreground.width() || mask.height() != foreground.height() {
        return Err(ImageError::DimMismatch("mask must be single-channel and match the foreground".into()));
    }
    if foreground.channels() != background.channels() {
        return Err(ImageError::DimMismatch(format!(
            "foreground has {} channels, background {}",
            foreground.channels(),
            background.channels()
        )));
    }
    if !transform.is_finite() {
        return Err(ImageError::SingularTransform);
    }
    let inverse = transform.inverse().ok_or(ImageError::SingularTransform)?;
    let (w, h, ch) = (background.width(), background.height(), background.channels());

    let rows: Vec<(Vec<f64>, bool)> = (0..h)
        .into_par_iter()
        .map(|y| {
            let mut row = background.data()[y * w * ch..(y + 1) * w * ch].to_vec();
            let mut touched = false;
            for x in 0..w {
                let [sx, sy] = inverse.apply([x as f64, y as f64]);
                let alpha = match bilinear(mask, sx, sy, 0) {
                    Some(a) if a > 0.0 => a,
                    _ => continue,
                };
                touched = true;
                for c in 0..ch {
                    let fg = bilinear(foreground, sx, sy, c).expect("inside the same hull as the mask");
                    let bg = row[x * ch + c];
                    row[x * ch + c] = super::clamp_unit(alpha * fg + (1.0 - alpha) * bg);
                }
            }
            (row, touched)
        })
        .collect();

    if !rows.iter().any(|(_, t)| *t) {
        return Err(ImageError::OutOfFrame);
    }
    let data: Vec<f64> = rows.into_iter().flat_map(|(r, _)| r).collect();
    let out = Image::new(w, h, ch, data)?;
    Ok((out, transform.apply_pose(keypoints)))
}
