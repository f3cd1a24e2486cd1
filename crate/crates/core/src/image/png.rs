//! 8-bit PNG conversion: samples map to bytes by `round(v * 255)` and back by `/ 255`.

use std::io::Cursor;
use std::path::Path;

use image::{DynamicImage, GrayImage, ImageFormat, RgbImage};

use super::{Image, ImageError};

fn to_byte(v: f64) -> u8 {
    (v * 255.0).round().clamp(0.0, 255.0) as u8
}

fn from_dynamic(img: DynamicImage) -> Image {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let (channels, bytes) = if img.color().has_color() {
        (3, img.into_rgb8().into_raw())
    } else {
        (1, img.into_luma8().into_raw())
    };
    let data = bytes.into_iter().map(|b| b as f64 / 255.0).collect();
    Image::new(w, h, channels, data).expect("8-bit samples are in range")
}

pub fn decode_png(bytes: &[u8]) -> Result<Image, ImageError> {
    let img = image::load_from_memory_with_format(bytes, ImageFormat::Png).map_err(|e| ImageError::Decode(e.to_string()))?;
    Ok(from_dynamic(img))
}

pub fn load_png(path: impl AsRef<Path>) -> Result<Image, ImageError> {
    let bytes = std::fs::read(path.as_ref()).map_err(|e| ImageError::Io(format!("{}: {e}", path.as_ref().display())))?;
    decode_png(&bytes)
}

pub fn encode_png(img: &Image) -> Result<Vec<u8>, ImageError> {
    let bytes: Vec<u8> = img.data().iter().map(|v| to_byte(*v)).collect();
    let (w, h) = (img.width() as u32, img.height() as u32);
    let dynamic = match img.channels() {
        1 => DynamicImage::ImageLuma8(GrayImage::from_raw(w, h, bytes).expect("buffer size checked")),
        3 => DynamicImage::ImageRgb8(RgbImage::from_raw(w, h, bytes).expect("buffer size checked")),
        c => return Err(ImageError::BadChannels(c)),
    };
    let mut out = Cursor::new(Vec::new());
    dynamic
        .write_to(&mut out, ImageFormat::Png)
        .map_err(|e| ImageError::Io(e.to_string()))?;
    Ok(out.into_inner())
}

pub fn save_png(img: &Image, path: impl AsRef<Path>) -> Result<(), ImageError> {
    let bytes = encode_png(img)?;
    std::fs::write(path.as_ref(), bytes).map_err(|e| ImageError::Io(format!("{}: {e}", path.as_ref().display())))
}
