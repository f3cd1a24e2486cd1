//! Images, conditioning maps, histograms and compositing.

mod composite;
mod filters;
mod histogram;
mod png;

use thiserror::Error;

pub use composite::{composite, CompositeJob};
pub use filters::{blur_average, edge_map, luminance, sobel_magnitude};
pub use histogram::{color_histogram, color_histogram_mode, ColorHistogram, HistogramMode};
pub use png::{decode_png, encode_png, load_png, save_png};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ImageError {
    #[error("buffer holds {got} samples, expected {expected}")]
    BadBuffer { expected: usize, got: usize },
    #[error("unsupported channel count {0}")]
    BadChannels(usize),
    #[error("sample {index} = {value} is outside [0, 1]")]
    OutOfRange { index: usize, value: f64 },
    #[error("image sizes differ: {0}")]
    DimMismatch(String),
    #[error("mask has zero total weight")]
    EmptySupport,
    #[error("no mask pixel lands inside the background")]
    OutOfFrame,
    #[error("placement transform is singular")]
    SingularTransform,
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("decode error: {0}")]
    Decode(String),
}

/// Row-major image with 1 or 3 interleaved channels, samples in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self, ImageError> {
        if channels != 1 && channels != 3 {
            return Err(ImageError::BadChannels(channels));
        }
        let expected = width * height * channels;
        if data.len() != expected {
            return Err(ImageError::BadBuffer { expected, got: data.len() });
        }
        if let Some((index, value)) = data
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && (0.0..=1.0).contains(*v)))
        {
            return Err(ImageError::OutOfRange { index, value: *value });
        }
        Ok(Self { width, height, channels, data })
    }

    /// Constant image. Panics if `value` is outside `[0, 1]`.
    pub fn filled(width: usize, height: usize, channels: usize, value: f64) -> Self {
        Self::new(width, height, channels, vec![value; width * height * channels]).expect("valid constant image")
    }

    /// Builds an image from a per-pixel function; values are clamped to `[0, 1]`.
    pub fn from_fn(width: usize, height: usize, channels: usize, f: impl Fn(usize, usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(clamp_unit(f(x, y, c)));
                }
            }
        }
        Self::new(width, height, channels, data).expect("valid generated image")
    }

    pub fn width(&self) -> usize {
        self.width
    }
    pub fn height(&self) -> usize {
        self.height
    }
    pub fn channels(&self) -> usize {
        self.channels
    }
    pub fn data(&self) -> &[f64] {
        &self.data
    }
    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    pub fn mean(&self) -> f64 {
        if self.data.is_empty() {
            0.0
        } else {
            self.data.iter().sum::<f64>() / self.data.len() as f64
        }
    }
}

#[inline]
pub(crate) fn clamp_unit(v: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(0.0, 1.0)
    }
}
