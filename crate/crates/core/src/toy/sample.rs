use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::image::{blur_average, edge_map, Image};

/// One procedural training example: image `x`, its shape map `x_s`, its
/// color map `x_b` and the polygon coverage mask.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeSample {
    pub x: Image,
    pub shape_map: Image,
    pub color_map: Image,
    pub mask: Image,
}

const SUPERSAMPLE: usize = 4;

fn inside_convex(poly: &[[f64; 2]], p: [f64; 2]) -> bool {
    // Vertices are counter-clockwise in angle order.
    poly.iter().zip(poly.iter().cycle().skip(1)).all(|(a, b)| {
        let cross = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
        cross >= 0.0
    })
}

/// Renders a random filled convex polygon (3 to 6 vertices) in a random
/// color over a random background color. A pure function of `seed`.
pub fn gen_procedural_sample(seed: u64, side: usize) -> ShapeSample {
    assert!(side >= 8, "side must be at least 8 pixels");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = side as f64;
    let vertices = rng.random_range(3..=6);
    let center = [rng.random_range(0.35 * s..0.65 * s), rng.random_range(0.35 * s..0.65 * s)];
    let radius = rng.random_range(0.2 * s..0.4 * s);
    let mut angles: Vec<f64> = (0..vertices).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect();
    angles.sort_by(f64::total_cmp);
    let poly: Vec<[f64; 2]> = angles
        .iter()
        .map(|a| [center[0] + radius * a.cos(), center[1] + radius * a.sin()])
        .collect();
    let fill: [f64; 3] = [rng.random(), rng.random(), rng.random()];
    let background: [f64; 3] = [rng.random(), rng.random(), rng.random()];

    let mut coverage = vec![0.0; side * side];
    let step = 1.0 / SUPERSAMPLE as f64;
    for y in 0..side {
        for x in 0..side {
            let mut hits = 0;
            for sy in 0..SUPERSAMPLE {
                for sx in 0..SUPERSAMPLE {
                    let p = [x as f64 + (sx as f64 + 0.5) * step, y as f64 + (sy as f64 + 0.5) * step];
                    if inside_convex(&poly, p) {
                        hits += 1;
                    }
                }
            }
            coverage[y * side + x] = hits as f64 / (SUPERSAMPLE * SUPERSAMPLE) as f64;
        }
    }
    let mask = Image::new(side, side, 1, coverage.clone()).expect("coverage in [0, 1]");
    let x = Image::from_fn(side, side, 3, |px, py, c| {
        let m = coverage[py * side + px];
        m * fill[c] + (1.0 - m) * background[c]
    });
    let shape_map = edge_map(&x);
    let color_map = blur_average(&x, side / 8);
    ShapeSample { x, shape_map, color_map, mask }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic() {
        assert_eq!(gen_procedural_sample(42, 16), gen_procedural_sample(42, 16));
        assert_ne!(gen_procedural_sample(42, 16), gen_procedural_sample(43, 16));
    }

    #[test]
    fn maps_are_composed_from_image_ops() {
        let s = gen_procedural_sample(7, 24);
        assert_eq!(s.color_map, blur_average(&s.x, 3));
        assert_eq!(s.shape_map, edge_map(&s.x));
        assert!(s.mask.data().iter().any(|v| *v == 1.0));
    }

    #[test]
    fn shape_map_is_zero_away_from_boundary() {
        for seed in 0..20 {
            let s = gen_procedural_sample(seed, 16);
            let m = |x: isize, y: isize| s.mask.get(x.clamp(0, 15) as usize, y.clamp(0, 15) as usize, 0);
            for y in 0..16isize {
                for x in 0..16isize {
                    let v = m(x, y);
                    let flat = (-1..=1).all(|dy| (-1..=1).all(|dx| m(x + dx, y + dy) == v));
                    if flat {
                        assert_eq!(s.shape_map.get(x as usize, y as usize, 0), 0.0, "seed {seed} ({x},{y})");
                    }
                }
            }
        }
    }
}
