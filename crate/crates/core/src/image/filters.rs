use rayon::prelude::*;

use super::Image;

/// Box blur over the `(2r+1)²` window with clamp-to-edge borders.
///
/// The clamped window is separable, so it runs as a horizontal pass followed
/// by a vertical pass.
pub fn blur_average(img: &Image, radius: usize) -> Image {
    if radius == 0 {
        return img.clone();
    }
    let (w, h, ch) = (img.width(), img.height(), img.channels());
    let r = radius as isize;
    let norm = 1.0 / (2 * radius + 1) as f64;
    let src = img.data();

    let mut horiz = vec![0.0; src.len()];
    horiz.par_chunks_mut(w * ch).enumerate().for_each(|(y, row)| {
        for x in 0..w {
            for c in 0..ch {
                let mut acc = 0.0;
                for dx in -r..=r {
                    let xx = (x as isize + dx).clamp(0, w as isize - 1) as usize;
                    acc += src[(y * w + xx) * ch + c];
                }
                row[x * ch + c] = acc * norm;
            }
        }
    });

    let mut out = vec![0.0; src.len()];
    out.par_chunks_mut(w * ch).enumerate().for_each(|(y, row)| {
        for x in 0..w {
            for c in 0..ch {
                let mut acc = 0.0;
                for dy in -r..=r {
                    let yy = (y as isize + dy).clamp(0, h as isize - 1) as usize;
                    acc += horiz[(yy * w + x) * ch + c];
                }
                row[x * ch + c] = super::clamp_unit(acc * norm);
            }
        }
    });
    Image::new(w, h, ch, out).expect("blur keeps shape and range")
}

/// Luminance plane (`0.299 R + 0.587 G + 0.114 B`); single-channel images
/// pass through.
pub fn luminance(img: &Image) -> Vec<f64> {
    match img.channels() {
        1 => img.data().to_vec(),
        _ => img
            .data()
            .chunks_exact(3)
            .map(|p| 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2])
            .collect(),
    }
}

/// Unnormalized Sobel gradient magnitude of the luminance, clamp-to-edge.
pub fn sobel_magnitude(img: &Image) -> Vec<f64> {
    let (w, h) = (img.width(), img.height());
    let lum = luminance(img);
    let at = |x: isize, y: isize| {
        let xx = x.clamp(0, w as isize - 1) as usize;
        let yy = y.clamp(0, h as isize - 1) as usize;
        lum[yy * w + xx]
    };
    let mut out = vec![0.0; w * h];
    out.par_chunks_mut(w.max(1)).enumerate().for_each(|(y, row)| {
        let y = y as isize;
        for (x, dst) in row.iter_mut().enumerate() {
            let x = x as isize;
            let gx = (at(x + 1, y - 1) + 2.0 * at(x + 1, y) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x - 1, y) + at(x - 1, y + 1));
            let gy = (at(x - 1, y + 1) + 2.0 * at(x, y + 1) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x, y - 1) + at(x + 1, y - 1));
            *dst = (gx * gx + gy * gy).sqrt();
        }
    });
    out
}

/// Edge (shape) map: Sobel magnitude scaled so its maximum is 1. A flat
/// image yields an all-zero map.
pub fn edge_map(img: &Image) -> Image {
    let mut mag = sobel_magnitude(img);
    let max = mag.iter().cloned().fold(0.0, f64::max);
    if max > 0.0 {
        for v in &mut mag {
            *v = super::clamp_unit(*v / max);
        }
    }
    Image::new(img.width(), img.height(), 1, mag).expect("edge map in range")
}
