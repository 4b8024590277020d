//! Minibatch aggregation of per-sample gradients.

use crate::{Error, Result};

/// Row-major `n × d` matrix of per-sample quantities (gradients or
/// finite-difference curvatures), one row per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMatrix {
    data: Vec<f64>,
    n: usize,
    dim: usize,
}

pub type SampleGradients = SampleMatrix;
pub type SampleCurvatures = SampleMatrix;

impl SampleMatrix {
    pub fn zeros(n: usize, dim: usize) -> Self {
        SampleMatrix {
            data: vec![0.0; n * dim],
            n,
            dim,
        }
    }

    pub fn from_rows<I, R>(rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = R>,
        R: AsRef<[f64]>,
    {
        let mut data = Vec::new();
        let mut dim = None;
        let mut n = 0;
        for row in rows {
            let row = row.as_ref();
            match dim {
                None => dim = Some(row.len()),
                Some(d) if d != row.len() => {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        found: row.len(),
                    })
                }
                _ => {}
            }
            data.extend_from_slice(row);
            n += 1;
        }
        Ok(SampleMatrix {
            data,
            n,
            dim: dim.unwrap_or(0),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.data[j * self.dim..(j + 1) * self.dim]
    }

    pub fn row_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.dim..(j + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim.max(1)).take(self.n)
    }

    pub fn get(&self, j: usize, i: usize) -> f64 {
        self.data[j * self.dim + i]
    }

    /// Reshapes in place, reusing the allocation. Contents are unspecified.
    pub fn resize(&mut self, n: usize, dim: usize) {
        self.n = n;
        self.dim = dim;
        self.data.resize(n * dim, 0.0);
    }

    /// Index of the first column containing a non-finite entry.
    pub fn first_non_finite_column(&self) -> Option<usize> {
        (0..self.dim).find(|&i| (0..self.n).any(|j| !self.get(j, i).is_finite()))
    }

    /// Column-wise mean of squared entries.
    pub fn mean_square(&self) -> Result<Vec<f64>> {
        if self.n == 0 {
            return Err(Error::EmptyBatch);
        }
        let mut out = vec![0.0; self.dim];
        for row in self.rows() {
            for (o, x) in out.iter_mut().zip(row) {
                *o += x * x;
            }
        }
        let inv = 1.0 / self.n as f64;
        out.iter_mut().for_each(|o| *o *= inv);
        Ok(out)
    }
}

/// Column-wise mean `(1/n) Σ_k ∇^(k)`.
pub fn average_gradient(g: &SampleGradients) -> Result<Vec<f64>> {
    if g.n == 0 {
        return Err(Error::EmptyBatch);
    }
    let mut out = vec![0.0; g.dim];
    for row in g.rows() {
        for (o, x) in out.iter_mut().zip(row) {
            *o += x;
        }
    }
    let inv = 1.0 / g.n as f64;
    out.iter_mut().for_each(|o| *o *= inv);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparseStats {
    /// Number of exactly-zero entries per column (`z_i`).
    pub zero_counts: Vec<usize>,
    /// `n − z_i`.
    pub effective_n: Vec<usize>,
}

/// Counts structural zeros per dimension. Only exact zeros count.
pub fn sparse_stats(g: &SampleGradients) -> SparseStats {
    let mut zero_counts = vec![0usize; g.dim];
    for row in g.rows() {
        for (z, &x) in zero_counts.iter_mut().zip(row) {
            if x == 0.0 {
                *z += 1;
            }
        }
    }
    let effective_n = zero_counts.iter().map(|z| g.n - z).collect();
    SparseStats {
        zero_counts,
        effective_n,
    }
}

/// Per-sample weights `w_i = 1 / Σ_j |cos(∇^(i), ∇^(j))|`.
///
/// The self term contributes exactly 1. Rows with zero norm get weight 0 and
/// are left out of every other row's sum.
pub fn orthogonal_weights(g: &SampleGradients) -> Vec<f64> {
    let norms: Vec<f64> = g
        .rows()
        .map(|r| r.iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    let mut weights = vec![0.0; g.n];
    for i in 0..g.n {
        if norms[i] == 0.0 {
            continue;
        }
        let ri = g.row(i);
        let mut denom = 1.0;
        for j in 0..g.n {
            if j == i || norms[j] == 0.0 {
                continue;
            }
            let dot: f64 = ri.iter().zip(g.row(j)).map(|(a, b)| a * b).sum();
            denom += dot.abs() / (norms[i] * norms[j]);
        }
        weights[i] = 1.0 / denom;
    }
    weights
}

/// Interference-reweighted minibatch gradient `Σ_i w_i ∇^(i)`. O(n²d).
pub fn reweight_orthogonal(g: &SampleGradients) -> Vec<f64> {
    let weights = orthogonal_weights(g);
    let mut out = vec![0.0; g.dim];
    for (w, row) in weights.iter().zip(g.rows()) {
        for (o, x) in out.iter_mut().zip(row) {
            *o += w * x;
        }
    }
    out
}
