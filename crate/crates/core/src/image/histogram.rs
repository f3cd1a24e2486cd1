use serde::{Deserialize, Serialize};

use super::{Image, ImageError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum HistogramMode {
    /// One histogram per channel.
    #[default]
    Marginal,
    /// A single histogram over the joint color cube (`bins^channels` cells).
    Joint,
}

/// Normalized bin masses. For [`HistogramMode::Marginal`] the values are
/// channel-major, `channels × bins_per_channel`, and each channel sums to 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColorHistogram {
    pub bins_per_channel: usize,
    pub channels: usize,
    pub mode: HistogramMode,
    pub values: Vec<f64>,
}

impl ColorHistogram {
    /// Number of independently normalized groups.
    pub fn groups(&self) -> usize {
        match self.mode {
            HistogramMode::Marginal => self.channels,
            HistogramMode::Joint => 1,
        }
    }

    pub fn group(&self, g: usize) -> &[f64] {
        let len = self.values.len() / self.groups();
        &self.values[g * len..(g + 1) * len]
    }

    pub fn same_layout(&self, other: &ColorHistogram) -> bool {
        self.bins_per_channel == other.bins_per_channel
            && self.channels == other.channels
            && self.mode == other.mode
            && self.values.len() == other.values.len()
    }
}

#[inline]
pub(crate) fn bin_of(value: f64, bins: usize) -> usize {
    ((value * bins as f64) as usize).min(bins - 1)
}

pub fn color_histogram(img: &Image, bins_per_channel: usize, mask: Option<&Image>) -> Result<ColorHistogram, ImageError> {
    color_histogram_mode(img, bins_per_channel, mask, HistogramMode::Marginal)
}

/// Histograms `img` into bins of width `1 / bins_per_channel` (a sample of
/// exactly 1.0 lands in the last bin), optionally weighting pixels by `mask`.
pub fn color_histogram_mode(
    img: &Image,
    bins_per_channel: usize,
    mask: Option<&Image>,
    mode: HistogramMode,
) -> Result<ColorHistogram, ImageError> {
    if bins_per_channel == 0 {
        return Err(ImageError::InvalidParam("bins_per_channel must be >= 1".into()));
    }
    if let Some(m) = mask {
        if m.channels() != 1 || m.width() != img.width() || m.height() != img.height() {
            return Err(ImageError::DimMismatch(format!(
                "mask {}x{}x{} vs image {}x{}",
                m.width(),
                m.height(),
                m.channels(),
                img.width(),
                img.height()
            )));
        }
    }
    let ch = img.channels();
    let bins = bins_per_channel;
    let len = match mode {
        HistogramMode::Marginal => ch * bins,
        HistogramMode::Joint => bins.pow(ch as u32),
    };
    let mut values = vec![0.0; len];
    let mut total = 0.0;
    for (p, pixel) in img.data().chunks_exact(ch).enumerate() {
        let weight = mask.map_or(1.0, |m| m.data()[p]);
        if weight == 0.0 {
            continue;
        }
        total += weight;
        match mode {
            HistogramMode::Marginal => {
                for (c, v) in pixel.iter().enumerate() {
                    values[c * bins + bin_of(*v, bins)] += weight;
                }
            }
            HistogramMode::Joint => {
                let cell = pixel.iter().fold(0, |acc, v| acc * bins + bin_of(*v, bins));
                values[cell] += weight;
            }
        }
    }
    if total <= 0.0 {
        return Err(ImageError::EmptySupport);
    }
    for v in &mut values {
        *v /= total;
    }
    Ok(ColorHistogram { bins_per_channel, channels: ch, mode, values })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_mass() {
        let img = Image::filled(4, 4, 3, 0.4);
        let h = color_histogram(&img, 8, None).unwrap();
        for c in 0..3 {
            let g = h.group(c);
            assert_eq!(g[3], 1.0);
            assert_eq!(g.iter().sum::<f64>(), 1.0);
        }
    }

    #[test]
    fn two_level_split_and_top_edge() {
        let img = Image::from_fn(4, 2, 3, |x, _, _| if x < 2 { 0.1 } else { 0.9 });
        let h = color_histogram(&img, 2, None).unwrap();
        assert_eq!(h.values, vec![0.5; 6]);
        let ones = Image::filled(2, 2, 1, 1.0);
        let h = color_histogram(&ones, 4, None).unwrap();
        assert_eq!(h.values, vec![0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn mask_errors() {
        let img = Image::filled(3, 3, 3, 0.5);
        let zero = Image::filled(3, 3, 1, 0.0);
        assert_eq!(color_histogram(&img, 4, Some(&zero)), Err(ImageError::EmptySupport));
        let wrong = Image::filled(2, 3, 1, 1.0);
        assert!(matches!(color_histogram(&img, 4, Some(&wrong)), Err(ImageError::DimMismatch(_))));
        assert!(color_histogram(&img, 0, None).is_err());
    }

    #[test]
    fn joint_mode() {
        let img = Image::from_fn(2, 1, 3, |x, _, c| if x == 0 { 0.0 } else { [0.9, 0.1, 0.6][c] });
        let h = color_histogram_mode(&img, 2, None, HistogramMode::Joint).unwrap();
        assert_eq!(h.values.len(), 8);
        assert_eq!(h.values[0], 0.5);
        assert_eq!(h.values[0b101], 0.5);
    }
}
