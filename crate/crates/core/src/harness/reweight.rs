use std::io::Write;

use rand::Rng;

use crate::aggregation::{average_gradient, reweight_orthogonal, SampleMatrix};
use crate::problems::{LossKind, ProblemSpec};
use crate::{Error, Result};

/// The three aggregate gradients of one minibatch.
#[derive(Debug, Clone, PartialEq)]
pub struct ReweightDemo {
    pub average: Vec<f64>,
    pub reweighted: Vec<f64>,
    /// Sum of the per-cluster sample means over clusters that were drawn.
    pub oracle: Vec<f64>,
    pub cluster_counts: [usize; 2],
    pub samples: SampleMatrix,
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot / (na * nb)
}

/// Draws `n` gradients from a two-cluster problem and aggregates them three
/// ways.
pub fn demo_reweighting<R: Rng + ?Sized>(problem: &ProblemSpec, n: usize, rng: &mut R) -> Result<ReweightDemo> {
    if problem.kind != LossKind::TwoCluster || problem.clusters.is_none() {
        return Err(Error::InvalidProblem("reweighting demo needs a two-cluster problem".into()));
    }
    if problem.dim < 2 {
        return Err(Error::InvalidProblem("reweighting demo needs at least two dimensions".into()));
    }
    if n == 0 {
        return Err(Error::EmptyBatch);
    }
    let theta = vec![0.0; problem.dim];
    let mut samples = SampleMatrix::zeros(n, problem.dim);
    let mut sums = [vec![0.0; problem.dim], vec![0.0; problem.dim]];
    let mut counts = [0usize; 2];
    for j in 0..n {
        let s = problem.draw_sample(rng);
        problem.sample_grad_into(&theta, &s, samples.row_mut(j))?;
        let c = s.cluster.unwrap_or(0);
        counts[c] += 1;
        for (acc, g) in sums[c].iter_mut().zip(samples.row(j)) {
            *acc += g;
        }
    }
    let mut oracle = vec![0.0; problem.dim];
    for (sum, &count) in sums.iter().zip(&counts) {
        if count > 0 {
            for (o, s) in oracle.iter_mut().zip(sum) {
                *o += s / count as f64;
            }
        }
    }
    Ok(ReweightDemo {
        average: average_gradient(&samples)?,
        reweighted: reweight_orthogonal(&samples),
        oracle,
        cluster_counts: counts,
        samples,
    })
}

impl ReweightDemo {
    /// `vector,component,value` rows for `average`, `reweighted`, `oracle`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "vector,component,value")?;
        for (name, v) in [("average", &self.average), ("reweighted", &self.reweighted), ("oracle", &self.oracle)] {
            for (i, x) in v.iter().enumerate() {
                writeln!(w, "{name},{i},{x}")?;
            }
        }
        Ok(())
    }

    /// Per-sample gradients, `sample,component,value`.
    pub fn write_samples_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "sample,component,value")?;
        for (j, row) in self.samples.rows().enumerate() {
            for (i, x) in row.iter().enumerate() {
                writeln!(w, "{j},{i},{x}")?;
            }
        }
        Ok(())
    }
}
