//! Fixed-schedule and accumulator-based baselines.

use crate::aggregation::{average_gradient, SampleGradients};
use crate::{Error, Result};

fn check(theta: &[f64], grad: &[f64]) -> Result<()> {
    if theta.len() != grad.len() {
        return Err(Error::DimensionMismatch {
            expected: theta.len(),
            found: grad.len(),
        });
    }
    if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFiniteGradient { dim: i });
    }
    Ok(())
}

/// `η₀ · t^(−γ)`, `t ≥ 1`.
pub fn sgd_rate(eta0: f64, gamma: f64, t: u64) -> f64 {
    eta0 * (t.max(1) as f64).powf(-gamma)
}

/// `θ −= η_t ∇̄` given the minibatch mean gradient.
pub fn sgd_update(theta: &mut [f64], grad: &[f64], eta0: f64, gamma: f64, t: u64) -> Result<()> {
    check(theta, grad)?;
    let eta = sgd_rate(eta0, gamma, t);
    for (x, g) in theta.iter_mut().zip(grad) {
        *x -= eta * g;
    }
    Ok(())
}

pub fn sgd_step(theta: &mut [f64], batch: &SampleGradients, eta0: f64, gamma: f64, t: u64) -> Result<()> {
    sgd_update(theta, &average_gradient(batch)?, eta0, gamma, t)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaGradState {
    pub accum: Vec<f64>,
    pub epsilon: f64,
}

impl AdaGradState {
    pub fn new(dim: usize, epsilon: f64) -> Self {
        AdaGradState {
            accum: vec![0.0; dim],
            epsilon,
        }
    }

    pub fn update(&mut self, theta: &mut [f64], grad: &[f64], eta0: f64) -> Result<()> {
        check(theta, grad)?;
        for ((x, a), g) in theta.iter_mut().zip(&mut self.accum).zip(grad) {
            *a += g * g;
            *x -= eta0 * g / (a.sqrt() + self.epsilon);
        }
        Ok(())
    }

    pub fn step(&mut self, theta: &mut [f64], batch: &SampleGradients, eta0: f64) -> Result<()> {
        self.update(theta, &average_gradient(batch)?, eta0)
    }
}

/// Element-wise empirical-Fisher preconditioning.
///
/// `v̄` averages squared minibatch gradients with a fixed time constant and
/// starts at the first observation.
#[derive(Debug, Clone, PartialEq)]
pub struct NaturalGradState {
    pub v_bar: Vec<f64>,
    pub time_constant: f64,
    pub epsilon: f64,
    initialized: bool,
}

impl NaturalGradState {
    pub fn new(dim: usize, time_constant: f64, epsilon: f64) -> Self {
        NaturalGradState {
            v_bar: vec![0.0; dim],
            time_constant,
            epsilon,
            initialized: false,
        }
    }

    pub fn update(&mut self, theta: &mut [f64], grad: &[f64], eta0: f64) -> Result<()> {
        check(theta, grad)?;
        let r = if self.initialized { 1.0 / self.time_constant } else { 1.0 };
        self.initialized = true;
        for ((x, v), g) in theta.iter_mut().zip(&mut self.v_bar).zip(grad) {
            *v = (1.0 - r) * *v + r * g * g;
            *x -= eta0 * g / (*v + self.epsilon);
        }
        Ok(())
    }

    pub fn step(&mut self, theta: &mut [f64], batch: &SampleGradients, eta0: f64) -> Result<()> {
        self.update(theta, &average_gradient(batch)?, eta0)
    }
}
