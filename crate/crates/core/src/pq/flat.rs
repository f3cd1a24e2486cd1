use std::collections::BinaryHeap;

use super::{PqError, Ranked};

/// Uncompressed `n × dim` vector store with an exhaustive cosine scan. The
/// baseline the quantized search is measured against.
#[derive(Debug, Clone)]
pub struct FlatIndex {
    dim: usize,
    data: Vec<f32>,
}

impl FlatIndex {
    /// Rows are expected to be unit-normalized, so cosine is a dot product.
    pub fn new(dim: usize, data: Vec<f32>) -> Result<Self, PqError> {
        if dim == 0 || !data.len().is_multiple_of(dim) {
            return Err(PqError::DimMismatch { expected: dim, got: data.len() });
        }
        Ok(Self { dim, data })
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// The `n` rows with the highest cosine to `query`, best first, ties by
    /// position. Returns `(position, cosine)`.
    pub fn search(&self, query: &[f32], n: usize) -> Result<Vec<(usize, f32)>, PqError> {
        if query.len() != self.dim {
            return Err(PqError::DimMismatch { expected: self.dim, got: query.len() });
        }
        if n == 0 {
            return Ok(Vec::new());
        }
        let mut heap: BinaryHeap<Ranked> = BinaryHeap::with_capacity(n + 1);
        for (i, row) in self.data.chunks_exact(self.dim).enumerate() {
            let mut acc = [0.0f32; 8];
            let chunks = self.dim / 8;
            for c in 0..chunks {
                for l in 0..8 {
                    acc[l] += row[8 * c + l] * query[8 * c + l];
                }
            }
            let mut dot = acc.iter().sum::<f32>();
            for j in 8 * chunks..self.dim {
                dot += row[j] * query[j];
            }
            // Negated so the max-heap keeps the best (largest cosine) rows.
            let key = Ranked(-dot, i);
            if heap.len() < n {
                heap.push(key);
            } else if key < *heap.peek().unwrap() {
                heap.pop();
                heap.push(key);
            }
        }
        Ok(heap.into_sorted_vec().into_iter().map(|Ranked(d, i)| (i, -d)).collect())
    }
}
