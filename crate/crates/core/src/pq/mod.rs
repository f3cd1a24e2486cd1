//! Product-quantization index over unit-normalized pose features.
//!
//! Features are split into `m` contiguous subspaces, each quantized against
//! its own `k`-entry codebook, so a stored pose costs `m` bytes. Queries use
//! asymmetric distance computation (a per-subspace table of query-to-centroid
//! distances, summed per code) to shortlist candidates, which are then
//! re-ranked with the exact aligned kernel from [`crate::align`].

mod flat;
mod io;
pub mod kmeans;

use std::collections::BinaryHeap;

use rayon::prelude::*;
use thiserror::Error;

use crate::align::{rank_candidates, AlignError, Match};
use crate::pose::{extract_feature, normalize_feature, HandPose, PoseError, PoseFeature, FEATURE_DIM};

pub use flat::FlatIndex;
pub use io::{load_index, read_index, save_index, write_index, MAGIC, VERSION};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PqError {
    #[error("no input vectors")]
    EmptyInput,
    #[error("{n} vectors cannot train {k} centroids")]
    TooFewVectors { n: usize, k: usize },
    #[error("dimension {dim} is not divisible by m = {m}")]
    IndivisibleDim { dim: usize, m: usize },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("index is empty")]
    EmptyIndex,
    #[error("index holds {index} entries but the bank holds {bank}")]
    BankMismatch { index: usize, bank: usize },
    #[error("i/o error: {0}")]
    Io(String),
    #[error("bad magic bytes")]
    BadMagic,
    #[error("unsupported index version {0}")]
    UnsupportedVersion(u32),
    #[error("corrupt payload: {0}")]
    CorruptPayload(String),
    #[error(transparent)]
    Align(#[from] AlignError),
    #[error("pose {id}: {source}")]
    Pose { id: String, source: PoseError },
}

impl From<std::io::Error> for PqError {
    fn from(e: std::io::Error) -> Self {
        PqError::Io(e.to_string())
    }
}

/// Codebook training parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PqParams {
    pub m: usize,
    pub k: usize,
    pub iters: usize,
    pub seed: u64,
}

impl Default for PqParams {
    fn default() -> Self {
        Self { m: 4, k: 256, iters: 25, seed: 0 }
    }
}

impl PqParams {
    fn validate(&self, dim: usize) -> Result<(), PqError> {
        if self.m == 0 || !dim.is_multiple_of(self.m) {
            return Err(PqError::IndivisibleDim { dim, m: self.m });
        }
        if self.k == 0 || self.k > 256 {
            return Err(PqError::InvalidParams(format!("k = {} must be in 1..=256", self.k)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchParams {
    pub shortlist_n: usize,
    pub k: usize,
}

impl SearchParams {
    pub fn new(shortlist_n: usize, k: usize) -> Result<Self, PqError> {
        if k == 0 || k > shortlist_n {
            return Err(PqError::InvalidParams(format!("need 1 <= k ({k}) <= shortlist ({shortlist_n})")));
        }
        Ok(Self { shortlist_n, k })
    }
}

/// Trained codebooks plus the byte codes of every stored vector.
#[derive(Debug, Clone, PartialEq)]
pub struct PqIndex {
    dim: usize,
    m: usize,
    k: usize,
    /// `m × k × (dim / m)`, row-major.
    codebooks: Vec<f32>,
    /// `n × m`.
    codes: Vec<u8>,
    ids: Vec<String>,
}

/// Quantization diagnostics from a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainStats {
    /// Per-subspace k-means MSE history.
    pub mse_history: Vec<Vec<f64>>,
}

impl PqIndex {
    /// Trains codebooks on `data` (`n × dim`, row-major) without storing any
    /// vectors. Subspaces are independent and trained in parallel.
    pub fn train(data: &[f32], dim: usize, params: &PqParams) -> Result<(Self, TrainStats), PqError> {
        params.validate(dim)?;
        if data.is_empty() {
            return Err(PqError::EmptyInput);
        }
        if !data.len().is_multiple_of(dim) {
            return Err(PqError::DimMismatch { expected: dim, got: data.len() % dim });
        }
        let n = data.len() / dim;
        if n < params.k {
            return Err(PqError::TooFewVectors { n, k: params.k });
        }
        let dsub = dim / params.m;
        let results: Vec<kmeans::KMeans> = (0..params.m)
            .into_par_iter()
            .map(|s| {
                let sub: Vec<f64> = data
                    .chunks_exact(dim)
                    .flat_map(|row| row[s * dsub..(s + 1) * dsub].iter().map(|v| *v as f64))
                    .collect();
                let seed = params.seed ^ (s as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
                kmeans::kmeans(&sub, dsub, params.k, params.iters, seed)
            })
            .collect();
        let mut codebooks = Vec::with_capacity(params.m * params.k * dsub);
        for km in &results {
            codebooks.extend(km.centroids.iter().map(|v| *v as f32));
        }
        let index = Self { dim, m: params.m, k: params.k, codebooks, codes: Vec::new(), ids: Vec::new() };
        let stats = TrainStats { mse_history: results.into_iter().map(|km| km.mse_history).collect() };
        Ok((index, stats))
    }

    /// Assembles an index from raw parts, validating every invariant.
    pub fn from_parts(
        dim: usize,
        m: usize,
        k: usize,
        codebooks: Vec<f32>,
        codes: Vec<u8>,
        ids: Vec<String>,
    ) -> Result<Self, PqError> {
        PqParams { m, k, iters: 0, seed: 0 }.validate(dim)?;
        if codebooks.len() != m * k * (dim / m) {
            return Err(PqError::CorruptPayload("codebook length".into()));
        }
        if codes.len() != ids.len() * m {
            return Err(PqError::CorruptPayload("code length".into()));
        }
        if codes.iter().any(|c| *c as usize >= k) {
            return Err(PqError::CorruptPayload("code references a missing centroid".into()));
        }
        Ok(Self { dim, m, k, codebooks, codes, ids })
    }

    /// Encodes and stores `data` rows under `ids`, in order.
    pub fn add(&mut self, ids: Vec<String>, data: &[f32]) -> Result<(), PqError> {
        if data.len() != ids.len() * self.dim {
            return Err(PqError::DimMismatch { expected: ids.len() * self.dim, got: data.len() });
        }
        let codes: Vec<u8> = data
            .par_chunks_exact(self.dim)
            .flat_map_iter(|row| self.encode_row(row))
            .collect();
        self.codes.extend(codes);
        self.ids.extend(ids);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn m(&self) -> usize {
        self.m
    }
    pub fn k(&self) -> usize {
        self.k
    }
    pub fn len(&self) -> usize {
        self.ids.len()
    }
    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
    pub fn ids(&self) -> &[String] {
        &self.ids
    }
    pub fn codebooks(&self) -> &[f32] {
        &self.codebooks
    }
    pub fn codes(&self) -> &[u8] {
        &self.codes
    }
    pub fn dsub(&self) -> usize {
        self.dim / self.m
    }

    pub fn code(&self, i: usize) -> &[u8] {
        &self.codes[i * self.m..(i + 1) * self.m]
    }

    pub fn centroid(&self, subspace: usize, c: usize) -> &[f32] {
        let dsub = self.dsub();
        let start = (subspace * self.k + c) * dsub;
        &self.codebooks[start..start + dsub]
    }

    fn encode_row(&self, row: &[f32]) -> Vec<u8> {
        let dsub = self.dsub();
        (0..self.m)
            .map(|s| {
                let q = &row[s * dsub..(s + 1) * dsub];
                let mut best = (0usize, f32::INFINITY);
                for c in 0..self.k {
                    let d = sq_dist_f32(q, self.centroid(s, c));
                    if d < best.1 {
                        best = (c, d);
                    }
                }
                best.0 as u8
            })
            .collect()
    }

    /// Per subspace, the index of the nearest centroid (lowest index on ties).
    pub fn encode(&self, vector: &[f32]) -> Result<Vec<u8>, PqError> {
        if vector.len() != self.dim {
            return Err(PqError::DimMismatch { expected: self.dim, got: vector.len() });
        }
        Ok(self.encode_row(vector))
    }

    /// Concatenated centroids named by `code`.
    pub fn reconstruct(&self, code: &[u8]) -> Vec<f32> {
        code.iter()
            .enumerate()
            .flat_map(|(s, c)| self.centroid(s, *c as usize).iter().copied())
            .collect()
    }

    /// `m × k` table of squared distances between query sub-vectors and
    /// centroids.
    pub fn distance_table(&self, query: &[f32]) -> Result<Vec<f32>, PqError> {
        if query.len() != self.dim {
            return Err(PqError::DimMismatch { expected: self.dim, got: query.len() });
        }
        let dsub = self.dsub();
        let mut table = Vec::with_capacity(self.m * self.k);
        for s in 0..self.m {
            let q = &query[s * dsub..(s + 1) * dsub];
            for c in 0..self.k {
                table.push(sq_dist_f32(q, self.centroid(s, c)));
            }
        }
        Ok(table)
    }

    /// Approximate squared distance between the query behind `table` and
    /// stored entry `i`.
    #[inline]
    pub fn adc_distance(&self, table: &[f32], i: usize) -> f32 {
        self.code(i)
            .iter()
            .enumerate()
            .map(|(s, c)| table[s * self.k + *c as usize])
            .sum()
    }

    /// The `n` stored entries closest to `query` by asymmetric distance,
    /// ascending, ties by insertion order. Returns `(position, distance)`.
    pub fn adc_search(&self, query: &[f32], n: usize) -> Result<Vec<(usize, f32)>, PqError> {
        let table = self.distance_table(query)?;
        if n == 0 {
            return Ok(Vec::new());
        }
        let mut heap: BinaryHeap<Ranked> = BinaryHeap::with_capacity(n + 1);
        let m = self.m;
        let k = self.k;
        for (i, code) in self.codes.chunks_exact(m).enumerate() {
            let mut d = 0.0f32;
            for (s, c) in code.iter().enumerate() {
                d += table[s * k + *c as usize];
            }
            if heap.len() < n {
                heap.push(Ranked(d, i));
            } else if let Some(top) = heap.peek() {
                if Ranked(d, i) < *top {
                    heap.pop();
                    heap.push(Ranked(d, i));
                }
            }
        }
        Ok(heap.into_sorted_vec().into_iter().map(|Ranked(d, i)| (i, d)).collect())
    }

    /// Mean squared reconstruction error over `data` rows.
    pub fn quantization_mse(&self, data: &[f32]) -> f64 {
        let rows = data.len() / self.dim;
        if rows == 0 {
            return 0.0;
        }
        let total: f64 = data
            .par_chunks_exact(self.dim)
            .map(|row| {
                let recon = self.reconstruct(&self.encode_row(row));
                row.iter().zip(&recon).map(|(a, b)| ((a - b) as f64).powi(2)).sum::<f64>()
            })
            .sum();
        total / rows as f64
    }
}

/// `(distance, position)` with a total order: distance, then position.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Ranked(f32, usize);

impl Eq for Ranked {}

impl PartialOrd for Ranked {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Ranked {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }
}

#[inline]
pub(crate) fn sq_dist_f32(a: &[f32], b: &[f32]) -> f32 {
    let mut acc = [0.0f32; 8];
    let chunks = a.len() / 8;
    for c in 0..chunks {
        for l in 0..8 {
            let d = a[8 * c + l] - b[8 * c + l];
            acc[l] += d * d;
        }
    }
    let mut tail = 0.0;
    for i in 8 * chunks..a.len() {
        let d = a[i] - b[i];
        tail += d * d;
    }
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail
}

/// Unit-normalized feature as `f32`, the representation the index stores.
pub fn index_vector(pose: &HandPose) -> Result<Vec<f32>, PoseError> {
    let f = normalize_feature(&extract_feature(pose))?;
    Ok(f.values().iter().map(|v| *v as f32).collect())
}

/// Flattens unit-norm features into one `n × dim` buffer.
pub fn flatten_features(vectors: &[PoseFeature]) -> Result<Vec<f32>, PqError> {
    let dim = vectors.first().map(|v| v.values().len()).ok_or(PqError::EmptyInput)?;
    let mut data = Vec::with_capacity(vectors.len() * dim);
    for v in vectors {
        if v.values().len() != dim {
            return Err(PqError::DimMismatch { expected: dim, got: v.values().len() });
        }
        data.extend(v.values().iter().map(|x| *x as f32));
    }
    Ok(data)
}

/// Trains codebooks on `vectors` and stores all of them, with ids equal to
/// their positions.
pub fn train_codebooks(vectors: &[PoseFeature], m: usize, k: usize, iters: usize, seed: u64) -> Result<PqIndex, PqError> {
    let data = flatten_features(vectors)?;
    let dim = data.len() / vectors.len();
    let (mut index, _) = PqIndex::train(&data, dim, &PqParams { m, k, iters, seed })?;
    index.add((0..vectors.len()).map(|i| i.to_string()).collect(), &data)?;
    Ok(index)
}

/// Builds an index over a pose bank. Degenerate poses are rejected. When
/// `train_limit` is set, codebooks are trained on an evenly strided subset of
/// that size; every pose is encoded either way.
pub fn build_index(bank: &[HandPose], params: &PqParams, train_limit: Option<usize>) -> Result<PqIndex, PqError> {
    if bank.is_empty() {
        return Err(PqError::EmptyInput);
    }
    let mut data = Vec::with_capacity(bank.len() * FEATURE_DIM);
    for pose in bank {
        let v = index_vector(pose).map_err(|source| PqError::Pose { id: pose.id().to_string(), source })?;
        data.extend(v);
    }
    let (mut index, _) = match train_limit {
        Some(limit) if limit < bank.len() => {
            let stride = bank.len() as f64 / limit as f64;
            let mut sample = Vec::with_capacity(limit * FEATURE_DIM);
            for j in 0..limit {
                let i = (j as f64 * stride) as usize;
                sample.extend_from_slice(&data[i * FEATURE_DIM..(i + 1) * FEATURE_DIM]);
            }
            PqIndex::train(&sample, FEATURE_DIM, params)?
        }
        _ => PqIndex::train(&data, FEATURE_DIM, params)?,
    };
    index.add(bank.iter().map(|p| p.id().to_string()).collect(), &data)?;
    Ok(index)
}

/// Two-stage retrieval: shortlist by asymmetric distance on the unaligned
/// normalized feature, then re-rank the shortlist with the exact aligned
/// kernel. `bank` must be the pose list the index was built from.
pub fn retrieve_pq(
    index: &PqIndex,
    bank: &[HandPose],
    target: &HandPose,
    params: &SearchParams,
) -> Result<Vec<Match>, PqError> {
    if index.is_empty() {
        return Err(PqError::EmptyIndex);
    }
    if index.len() != bank.len() {
        return Err(PqError::BankMismatch { index: index.len(), bank: bank.len() });
    }
    let query = index_vector(target).map_err(|_| PqError::Align(AlignError::DegeneratePose))?;
    let shortlist = index.adc_search(&query, params.shortlist_n.min(index.len()))?;
    let positions: Vec<usize> = shortlist.iter().map(|(i, _)| *i).collect();
    let (matches, skipped) = rank_candidates(bank, &positions, target, params.k)?;
    if skipped > 0 {
        log::warn!("skipped {skipped} shortlisted candidates that could not be aligned");
    }
    Ok(matches)
}
