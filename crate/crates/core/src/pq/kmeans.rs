//! Seeded Lloyd k-means with k-means++ initialization.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Squared L2 distance.
#[inline]
pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        for l in 0..4 {
            let d = a[4 * c + l] - b[4 * c + l];
            acc[l] += d * d;
        }
    }
    let mut tail = 0.0;
    for i in 4 * chunks..a.len() {
        let d = a[i] - b[i];
        tail += d * d;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Index of the nearest centroid and its squared distance; the lowest index
/// wins ties.
#[inline]
pub fn nearest(point: &[f64], centroids: &[f64], dim: usize) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.chunks_exact(dim).enumerate() {
        let d = sq_dist(point, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

#[derive(Debug, Clone)]
pub struct KMeans {
    pub dim: usize,
    pub k: usize,
    /// `k × dim`, row-major.
    pub centroids: Vec<f64>,
    /// Mean squared distance to the nearest centroid, after initialization
    /// and after each Lloyd update.
    pub mse_history: Vec<f64>,
}

fn assign(data: &[f64], centroids: &[f64], dim: usize) -> Vec<(usize, f64)> {
    data.par_chunks_exact(dim)
        .map(|p| nearest(p, centroids, dim))
        .collect()
}

fn mean_dist(assignments: &[(usize, f64)]) -> f64 {
    assignments.iter().map(|a| a.1).sum::<f64>() / assignments.len() as f64
}

fn plus_plus_init(data: &[f64], dim: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = data.len() / dim;
    let mut centroids = Vec::with_capacity(k * dim);
    let first = rng.random_range(0..n);
    centroids.extend_from_slice(&data[first * dim..(first + 1) * dim]);
    let mut d2: Vec<f64> = data
        .par_chunks_exact(dim)
        .map(|p| sq_dist(p, &centroids[..dim]))
        .collect();
    for _ in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut r = rng.random_range(0.0..total);
            let mut chosen = n - 1;
            for (i, w) in d2.iter().enumerate() {
                if r < *w {
                    chosen = i;
                    break;
                }
                r -= w;
            }
            chosen
        } else {
            // Every point already coincides with a centroid.
            rng.random_range(0..n)
        };
        let start = centroids.len();
        centroids.extend_from_slice(&data[pick * dim..(pick + 1) * dim]);
        let newest = centroids[start..].to_vec();
        d2.par_iter_mut()
            .zip(data.par_chunks_exact(dim))
            .for_each(|(d, p)| *d = d.min(sq_dist(p, &newest)));
    }
    centroids
}

/// Runs k-means on `data` (`n × dim`, row-major) for at most `iters` Lloyd
/// iterations, stopping early once the relative MSE change drops below
/// `1e-6`. `trace` sees the centroids after initialization and after every
/// update.
///
/// Empty clusters are reseeded with the member of the largest cluster that
/// lies farthest from its centroid.
pub fn kmeans_traced(
    data: &[f64],
    dim: usize,
    k: usize,
    iters: usize,
    seed: u64,
    mut trace: impl FnMut(&[f64]),
) -> KMeans {
    let n = data.len() / dim;
    assert!(n >= k && k >= 1, "k-means needs at least k points");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = plus_plus_init(data, dim, k, &mut rng);
    trace(&centroids);
    let mut assignments = assign(data, &centroids, dim);
    let mut mse = mean_dist(&assignments);
    let mut mse_history = vec![mse];

    for _ in 0..iters {
        let mut sums = vec![0.0f64; k * dim];
        let mut counts = vec![0usize; k];
        for (p, (c, _)) in data.chunks_exact(dim).zip(&assignments) {
            counts[*c] += 1;
            for (s, v) in sums[c * dim..(c + 1) * dim].iter_mut().zip(p) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                let inv = 1.0 / counts[c] as f64;
                for (dst, s) in centroids[c * dim..(c + 1) * dim].iter_mut().zip(&sums[c * dim..(c + 1) * dim]) {
                    *dst = s * inv;
                }
            }
        }
        let mut taken = vec![false; n];
        for c in 0..k {
            if counts[c] > 0 {
                continue;
            }
            let largest = (0..k).max_by(|a, b| counts[*a].cmp(&counts[*b]).then(b.cmp(a))).unwrap();
            let far = (0..n)
                .filter(|&i| assignments[i].0 == largest && !taken[i])
                .map(|i| (i, sq_dist(&data[i * dim..(i + 1) * dim], &centroids[largest * dim..(largest + 1) * dim])))
                .fold(None::<(usize, f64)>, |best, cur| match best {
                    Some(b) if b.1 >= cur.1 => Some(b),
                    _ => Some(cur),
                });
            if let Some((i, _)) = far {
                taken[i] = true;
                counts[largest] -= 1;
                counts[c] = 1;
                let point = data[i * dim..(i + 1) * dim].to_vec();
                centroids[c * dim..(c + 1) * dim].copy_from_slice(&point);
            }
        }
        trace(&centroids);
        assignments = assign(data, &centroids, dim);
        let next = mean_dist(&assignments);
        mse_history.push(next);
        let change = if mse > 0.0 { (mse - next).abs() / mse } else { 0.0 };
        mse = next;
        if change < 1e-6 {
            break;
        }
    }
    KMeans { dim, k, centroids, mse_history }
}

pub fn kmeans(data: &[f64], dim: usize, k: usize, iters: usize, seed: u64) -> KMeans {
    kmeans_traced(data, dim, k, iters, seed, |_| {})
}
