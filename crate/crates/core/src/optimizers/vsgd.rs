//! Variance-based adaptive learning rates.
//!
//! [`VsgdFdState`] estimates curvature by finite differences and guards its
//! moving averages with an outlier test. [`VsgdBbpropState`] is the older
//! variant that reads curvature from the analytic diagonal Hessian and has no
//! outlier handling.

use rand::Rng;

use super::config::{OutlierTest, ProbeDirection, VsgdOptions};
use crate::aggregation::{SampleCurvatures, SampleGradients, SampleMatrix};
use crate::curvature::{fd_from_gradients, FdProbe};
use crate::problems::{ProblemSpec, Sample};
use crate::{Error, Result};

/// Per-dimension output of one step.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepDiagnostics {
    pub eta: Vec<f64>,
    /// Clamped `n ḡ² / (v̄ + (n−1) ḡ² + ε)`.
    pub noise_ratio: Vec<f64>,
    /// Memory after the step.
    pub tau: Vec<f64>,
    pub outlier: Vec<bool>,
}

impl StepDiagnostics {
    pub fn new(dim: usize) -> Self {
        let mut d = StepDiagnostics::default();
        d.reset(dim);
        d
    }

    fn reset(&mut self, dim: usize) {
        self.eta.clear();
        self.eta.resize(dim, 0.0);
        self.noise_ratio.clear();
        self.noise_ratio.resize(dim, 0.0);
        self.tau.clear();
        self.tau.resize(dim, 0.0);
        self.outlier.clear();
        self.outlier.resize(dim, false);
    }

    pub fn outlier_count(&self) -> usize {
        self.outlier.iter().filter(|&&o| o).count()
    }

    /// `η ≥ 0` and finite, ratio in `[0, 1]`, `τ ≥ 1`.
    pub fn is_valid(&self) -> bool {
        self.eta.iter().all(|e| e.is_finite() && *e >= 0.0)
            && self.noise_ratio.iter().all(|r| (0.0..=1.0).contains(r))
            && self.tau.iter().all(|t| t.is_finite() && *t >= 1.0)
    }
}

/// `clamp(ḡ²/v̄, 0, 1)`, taken as 0 when `v̄ = 0`.
fn signal_fraction(g_bar: f64, v_bar: f64) -> f64 {
    if v_bar > 0.0 {
        (g_bar * g_bar / v_bar).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

fn noise_ratio(n: f64, g_bar: f64, v_bar: f64, eps: f64) -> f64 {
    let g2 = g_bar * g_bar;
    (n * g2 / (v_bar + (n - 1.0) * g2 + eps)).clamp(0.0, 1.0)
}

fn check_batch(g: &SampleGradients, dim: usize) -> Result<()> {
    if g.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if g.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: g.dim(),
        });
    }
    if let Some(i) = g.first_non_finite_column() {
        return Err(Error::NonFiniteGradient { dim: i });
    }
    Ok(())
}

fn check_curvatures(h: &SampleCurvatures, g: &SampleGradients) -> Result<()> {
    if h.n() != g.n() || h.dim() != g.dim() {
        return Err(Error::BatchMismatch {
            gradients: g.n(),
            curvatures: h.n(),
        });
    }
    if let Some(i) = h.first_non_finite_column() {
        return Err(Error::NonFiniteCurvature { dim: i });
    }
    Ok(())
}

/// Column statistics: (mean, mean of squares) over all rows, or over rows
/// where the gradient column is non-zero when `mask` is given.
fn column_moments(m: &SampleMatrix, i: usize, mask: Option<&SampleGradients>) -> (f64, f64, usize) {
    let mut s = 0.0;
    let mut s2 = 0.0;
    let mut k = 0;
    for j in 0..m.n() {
        if let Some(g) = mask {
            if g.get(j, i) == 0.0 {
                continue;
            }
        }
        let x = m.get(j, i);
        s += x;
        s2 += x * x;
        k += 1;
    }
    if k == 0 {
        return (0.0, 0.0, 0);
    }
    (s / k as f64, s2 / k as f64, k)
}

#[derive(Debug, Clone, PartialEq)]
pub struct VsgdFdState {
    pub g_bar: Vec<f64>,
    pub v_bar: Vec<f64>,
    pub hfd_bar: Vec<f64>,
    pub vfd_bar: Vec<f64>,
    pub tau: Vec<f64>,
    pub epsilon: f64,
    bootstrapped: bool,
}

impl VsgdFdState {
    pub fn new(dim: usize, epsilon: f64) -> Self {
        VsgdFdState {
            g_bar: vec![0.0; dim],
            v_bar: vec![0.0; dim],
            hfd_bar: vec![0.0; dim],
            vfd_bar: vec![0.0; dim],
            tau: vec![0.0; dim],
            epsilon,
            bootstrapped: false,
        }
    }

    pub fn dim(&self) -> usize {
        self.g_bar.len()
    }

    pub fn is_bootstrapped(&self) -> bool {
        self.bootstrapped
    }

    /// Builds a bootstrapped state directly from its statistics.
    pub fn from_parts(
        g_bar: Vec<f64>,
        v_bar: Vec<f64>,
        hfd_bar: Vec<f64>,
        vfd_bar: Vec<f64>,
        tau: Vec<f64>,
        epsilon: f64,
    ) -> Result<Self> {
        let d = g_bar.len();
        for v in [&v_bar, &hfd_bar, &vfd_bar, &tau] {
            if v.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: v.len(),
                });
            }
        }
        Ok(VsgdFdState {
            g_bar,
            v_bar,
            hfd_bar,
            vfd_bar,
            tau,
            epsilon,
            bootstrapped: true,
        })
    }

    /// Initialises the moving averages from `n₀` gradient and curvature
    /// samples. `τ` is set to `n₀`; `v̄` is multiplied by `slack`.
    pub fn bootstrap_from(
        &mut self,
        grads: &SampleGradients,
        curvatures: &SampleCurvatures,
        slack: f64,
    ) -> Result<()> {
        if self.bootstrapped {
            return Err(Error::AlreadyBootstrapped);
        }
        check_batch(grads, self.dim())?;
        check_curvatures(curvatures, grads)?;
        let n0 = grads.n() as f64;
        for i in 0..self.dim() {
            let (g, g2, _) = column_moments(grads, i, None);
            let (h, h2, _) = column_moments(curvatures, i, None);
            self.g_bar[i] = g;
            self.v_bar[i] = slack * g2;
            self.hfd_bar[i] = h;
            self.vfd_bar[i] = h2;
            self.tau[i] = n0;
        }
        self.bootstrapped = true;
        Ok(())
    }

    /// Finite-difference probe step `±ḡ`, floored to `ε`.
    pub fn probe_into(&self, direction: ProbeDirection, probe: &mut FdProbe) {
        let sign = match direction {
            ProbeDirection::Descent => -1.0,
            ProbeDirection::Ascent => 1.0,
        };
        probe.reset_from(self.g_bar.iter().map(|g| sign * g));
    }

    pub fn probe(&self, direction: ProbeDirection) -> FdProbe {
        let mut p = FdProbe::new(Vec::with_capacity(self.dim()), self.epsilon);
        self.probe_into(direction, &mut p);
        p
    }

    /// One update of `θ`. `fd_batch` may be `None` on steps where curvature
    /// is not recomputed; the curvature averages are then left unchanged.
    pub fn step(
        &mut self,
        theta: &mut [f64],
        batch: &SampleGradients,
        fd_batch: Option<&SampleCurvatures>,
        opts: &VsgdOptions,
        diag: &mut StepDiagnostics,
    ) -> Result<()> {
        if !self.bootstrapped {
            return Err(Error::NotBootstrapped);
        }
        let dim = self.dim();
        if theta.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: theta.len(),
            });
        }
        check_batch(batch, dim)?;
        if let Some(h) = fd_batch {
            check_curvatures(h, batch)?;
        }
        diag.reset(dim);
        let eps = self.epsilon;
        let n_full = batch.n() as f64;
        let mask = opts.sparse_aware.then_some(batch);

        for i in 0..dim {
            let (full_mean_g, _, _) = column_moments(batch, i, None);
            let (mean_g, mean_g2, k) = column_moments(batch, i, mask);
            if k == 0 {
                diag.tau[i] = self.tau[i];
                continue;
            }
            let fd = fd_batch.map(|h| column_moments(h, i, mask));

            let sd_g = (self.v_bar[i] - self.g_bar[i] * self.g_bar[i]).max(0.0).sqrt();
            let sd_h = (self.vfd_bar[i] - self.hfd_bar[i] * self.hfd_bar[i]).max(0.0).sqrt();
            let outlier = match opts.outlier_test {
                OutlierTest::BatchMean => {
                    (mean_g - self.g_bar[i]).abs() > 2.0 * sd_g
                        || fd.is_some_and(|(h, _, _)| (h - self.hfd_bar[i]).abs() > 2.0 * sd_h)
                }
                OutlierTest::PerSample => (0..batch.n()).any(|j| {
                    let g = batch.get(j, i);
                    if mask.is_some() && g == 0.0 {
                        return false;
                    }
                    (g - self.g_bar[i]).abs() > 2.0 * sd_g
                        || fd_batch.is_some_and(|h| (h.get(j, i) - self.hfd_bar[i]).abs() > 2.0 * sd_h)
                }),
            };
            if outlier {
                self.tau[i] += 1.0;
            }

            let r = 1.0 / self.tau[i];
            self.g_bar[i] = (1.0 - r) * self.g_bar[i] + r * mean_g;
            self.v_bar[i] = (1.0 - r) * self.v_bar[i] + r * mean_g2;
            if let Some((h, h2, _)) = fd {
                self.hfd_bar[i] = (1.0 - r) * self.hfd_bar[i] + r * h;
                self.vfd_bar[i] = (1.0 - r) * self.vfd_bar[i] + r * h2;
            }

            let m = k as f64;
            let ratio = noise_ratio(m, self.g_bar[i], self.v_bar[i], eps);
            let mut eta = self.hfd_bar[i] / (self.vfd_bar[i] + eps) * ratio;
            if opts.sparse_aware {
                eta *= n_full / m;
            }

            self.tau[i] = (1.0 - signal_fraction(self.g_bar[i], self.v_bar[i])) * self.tau[i] + 1.0;
            theta[i] -= eta * full_mean_g;

            diag.eta[i] = eta;
            diag.noise_ratio[i] = ratio;
            diag.tau[i] = self.tau[i];
            diag.outlier[i] = outlier;
        }
        Ok(())
    }

    /// `τ ≥ 1`, non-negative second moments and curvature, everything finite.
    pub fn invariants_hold(&self) -> bool {
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        finite(&self.g_bar)
            && finite(&self.v_bar)
            && finite(&self.hfd_bar)
            && finite(&self.vfd_bar)
            && self.tau.iter().all(|t| t.is_finite() && *t >= 1.0)
            && self.v_bar.iter().all(|&v| v >= 0.0)
            && self.vfd_bar.iter().all(|&v| v >= 0.0)
            && self.hfd_bar.iter().all(|&v| v >= 0.0)
    }
}

/// Fills `grads` (and `curvs`, if `fd` is given) with per-sample values for
/// `n` fresh samples at `theta`. Curvatures are secants along `fd`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn sample_batch<R: Rng + ?Sized>(
    problem: &ProblemSpec,
    theta: &[f64],
    n: usize,
    rng: &mut R,
    sample: &mut Sample,
    grads: &mut SampleGradients,
    fd: Option<(&FdProbe, &mut SampleCurvatures, &mut Vec<f64>, &mut Vec<f64>)>,
) -> Result<()> {
    let dim = theta.len();
    grads.resize(n, dim);
    match fd {
        None => {
            for j in 0..n {
                problem.draw_sample_into(rng, sample);
                problem.sample_grad_into(theta, sample, grads.row_mut(j))?;
            }
        }
        Some((probe, curvs, shifted_theta, shifted_grad)) => {
            curvs.resize(n, dim);
            probe.shifted_into(theta, shifted_theta);
            shifted_grad.resize(dim, 0.0);
            for j in 0..n {
                problem.draw_sample_into(rng, sample);
                problem.sample_grad_into(theta, sample, grads.row_mut(j))?;
                problem.sample_grad_into(shifted_theta, sample, shifted_grad)?;
                fd_from_gradients(grads.row(j), shifted_grad, probe, curvs.row_mut(j));
            }
        }
    }
    Ok(())
}

/// Draws `n0` samples at `theta` and bootstraps `state` from them.
///
/// The probe for the bootstrap curvatures is `±ḡ` of the same samples.
pub fn bootstrap<R: Rng + ?Sized>(
    state: &mut VsgdFdState,
    problem: &ProblemSpec,
    theta: &[f64],
    n0: usize,
    opts: &VsgdOptions,
    rng: &mut R,
) -> Result<()> {
    if state.is_bootstrapped() {
        return Err(Error::AlreadyBootstrapped);
    }
    if n0 == 0 {
        return Err(Error::EmptyBatch);
    }
    let dim = theta.len();
    let mut samples = Vec::with_capacity(n0);
    let mut grads = SampleMatrix::zeros(n0, dim);
    for j in 0..n0 {
        let s = problem.draw_sample(rng);
        problem.sample_grad_into(theta, &s, grads.row_mut(j))?;
        samples.push(s);
    }
    let g_mean = crate::aggregation::average_gradient(&grads)?;
    let sign = match opts.probe {
        ProbeDirection::Descent => -1.0,
        ProbeDirection::Ascent => 1.0,
    };
    let probe = FdProbe::new(g_mean.iter().map(|g| sign * g).collect(), state.epsilon);
    let mut shifted_theta = Vec::with_capacity(dim);
    probe.shifted_into(theta, &mut shifted_theta);
    let mut shifted_grad = vec![0.0; dim];
    let mut curvs = SampleMatrix::zeros(n0, dim);
    for (j, s) in samples.iter().enumerate() {
        problem.sample_grad_into(&shifted_theta, s, &mut shifted_grad)?;
        fd_from_gradients(grads.row(j), &shifted_grad, &probe, curvs.row_mut(j));
    }
    state.bootstrap_from(&grads, &curvs, opts.bootstrap_slack)
}

/// vSGD with analytic diagonal curvature.
#[derive(Debug, Clone, PartialEq)]
pub struct VsgdBbpropState {
    pub g_bar: Vec<f64>,
    pub v_bar: Vec<f64>,
    pub h_bar: Vec<f64>,
    pub tau: Vec<f64>,
    pub epsilon: f64,
    bootstrapped: bool,
}

impl VsgdBbpropState {
    pub fn new(dim: usize, epsilon: f64) -> Self {
        VsgdBbpropState {
            g_bar: vec![0.0; dim],
            v_bar: vec![0.0; dim],
            h_bar: vec![0.0; dim],
            tau: vec![0.0; dim],
            epsilon,
            bootstrapped: false,
        }
    }

    pub fn dim(&self) -> usize {
        self.g_bar.len()
    }

    pub fn is_bootstrapped(&self) -> bool {
        self.bootstrapped
    }

    pub fn bootstrap_from(
        &mut self,
        grads: &SampleGradients,
        curvatures: &SampleCurvatures,
        slack: f64,
    ) -> Result<()> {
        if self.bootstrapped {
            return Err(Error::AlreadyBootstrapped);
        }
        check_batch(grads, self.dim())?;
        check_curvatures(curvatures, grads)?;
        for i in 0..self.dim() {
            let (g, g2, _) = column_moments(grads, i, None);
            self.g_bar[i] = g;
            self.v_bar[i] = slack * g2;
            self.h_bar[i] = column_moments(curvatures, i, None).0;
            self.tau[i] = grads.n() as f64;
        }
        self.bootstrapped = true;
        Ok(())
    }

    pub fn step(
        &mut self,
        theta: &mut [f64],
        batch: &SampleGradients,
        curvature_batch: &SampleCurvatures,
        diag: &mut StepDiagnostics,
    ) -> Result<()> {
        if !self.bootstrapped {
            return Err(Error::NotBootstrapped);
        }
        let dim = self.dim();
        if theta.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: theta.len(),
            });
        }
        check_batch(batch, dim)?;
        check_curvatures(curvature_batch, batch)?;
        diag.reset(dim);
        let eps = self.epsilon;
        let n = batch.n() as f64;
        for i in 0..dim {
            let (mean_g, mean_g2, _) = column_moments(batch, i, None);
            let (mean_h, _, _) = column_moments(curvature_batch, i, None);
            let r = 1.0 / self.tau[i];
            self.g_bar[i] = (1.0 - r) * self.g_bar[i] + r * mean_g;
            self.v_bar[i] = (1.0 - r) * self.v_bar[i] + r * mean_g2;
            self.h_bar[i] = (1.0 - r) * self.h_bar[i] + r * mean_h;
            let ratio = noise_ratio(n, self.g_bar[i], self.v_bar[i], eps);
            let eta = ratio / (self.h_bar[i] + eps);
            self.tau[i] = (1.0 - signal_fraction(self.g_bar[i], self.v_bar[i])) * self.tau[i] + 1.0;
            theta[i] -= eta * mean_g;
            diag.eta[i] = eta;
            diag.noise_ratio[i] = ratio;
            diag.tau[i] = self.tau[i];
        }
        Ok(())
    }

    pub fn invariants_hold(&self) -> bool {
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        finite(&self.g_bar)
            && finite(&self.v_bar)
            && finite(&self.h_bar)
            && self.tau.iter().all(|t| t.is_finite() && *t >= 1.0)
            && self.v_bar.iter().all(|&v| v >= 0.0)
            && self.h_bar.iter().all(|&v| v >= 0.0)
    }
}
