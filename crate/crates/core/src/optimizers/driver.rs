use std::io::Write;

use rand::Rng;

use super::baselines::{sgd_update, AdaGradState, NaturalGradState};
use super::config::{Algorithm, OptimizerConfig};
use super::vsgd::{bootstrap, sample_batch, StepDiagnostics, VsgdBbpropState, VsgdFdState};
use crate::aggregation::SampleMatrix;
use crate::curvature::FdProbe;
use crate::problems::{ProblemSpec, Sample};
use crate::{Error, Result};

#[derive(Debug, Clone)]
enum State {
    Sgd,
    AdaGrad(AdaGradState),
    NaturalGrad(NaturalGradState),
    VsgdBbprop(VsgdBbpropState),
    VsgdFd(VsgdFdState),
}

/// Any of the supported algorithms behind one `bootstrap` / `step` pair,
/// with scratch buffers reused across steps.
#[derive(Debug, Clone)]
pub struct Optimizer {
    config: OptimizerConfig,
    state: State,
    t: u64,
    sample: Sample,
    grads: SampleMatrix,
    curvs: SampleMatrix,
    mean_grad: Vec<f64>,
    probe: FdProbe,
    shifted_theta: Vec<f64>,
    shifted_grad: Vec<f64>,
    diag: StepDiagnostics,
}

impl Optimizer {
    pub fn new(config: OptimizerConfig, dim: usize) -> Result<Self> {
        config.validate()?;
        let eps = config.vsgd.epsilon;
        let state = match config.algorithm {
            Algorithm::Sgd => State::Sgd,
            Algorithm::AdaGrad => State::AdaGrad(AdaGradState::new(dim, eps)),
            Algorithm::NaturalGrad => {
                State::NaturalGrad(NaturalGradState::new(dim, config.natural_time_constant, eps))
            }
            Algorithm::VsgdBbprop => State::VsgdBbprop(VsgdBbpropState::new(dim, eps)),
            Algorithm::VsgdFd => State::VsgdFd(VsgdFdState::new(dim, eps)),
        };
        Ok(Optimizer {
            config,
            state,
            t: 0,
            sample: Sample::zeroed(dim),
            grads: SampleMatrix::zeros(0, dim),
            curvs: SampleMatrix::zeros(0, dim),
            mean_grad: vec![0.0; dim],
            probe: FdProbe::new(vec![0.0; dim], eps),
            shifted_theta: Vec::with_capacity(dim),
            shifted_grad: vec![0.0; dim],
            diag: StepDiagnostics::new(dim),
        })
    }

    pub fn config(&self) -> &OptimizerConfig {
        &self.config
    }

    /// Steps taken since construction.
    pub fn steps(&self) -> u64 {
        self.t
    }

    /// Initialises the vSGD moving averages from `n₀` samples at `theta`.
    /// A no-op for the baselines.
    pub fn bootstrap<R: Rng + ?Sized>(&mut self, problem: &ProblemSpec, theta: &[f64], rng: &mut R) -> Result<()> {
        let n0 = self.config.bootstrap_count;
        match &mut self.state {
            State::VsgdFd(s) => bootstrap(s, problem, theta, n0, &self.config.vsgd, rng),
            State::VsgdBbprop(s) => {
                let dim = theta.len();
                let mut g = SampleMatrix::zeros(n0, dim);
                let mut h = SampleMatrix::zeros(n0, dim);
                for j in 0..n0 {
                    problem.draw_sample_into(rng, &mut self.sample);
                    problem.sample_grad_into(theta, &self.sample, g.row_mut(j))?;
                    problem.sample_curvature_bbprop_into(theta, &self.sample, h.row_mut(j))?;
                }
                s.bootstrap_from(&g, &h, self.config.vsgd.bootstrap_slack)
            }
            _ => Ok(()),
        }
    }

    /// Draws a minibatch at `theta` and applies one update in place.
    pub fn step<R: Rng + ?Sized>(&mut self, problem: &ProblemSpec, theta: &mut [f64], rng: &mut R) -> Result<()> {
        let n = self.config.minibatch_n;
        let t = self.t + 1;
        match &mut self.state {
            State::VsgdFd(s) => {
                let with_fd = (t - 1).is_multiple_of(self.config.vsgd.curvature_stride as u64);
                let fd = if with_fd {
                    s.probe_into(self.config.vsgd.probe, &mut self.probe);
                    Some((&self.probe, &mut self.curvs, &mut self.shifted_theta, &mut self.shifted_grad))
                } else {
                    None
                };
                sample_batch(problem, theta, n, rng, &mut self.sample, &mut self.grads, fd)?;
                let curvs = with_fd.then_some(&self.curvs);
                s.step(theta, &self.grads, curvs, &self.config.vsgd, &mut self.diag)?;
            }
            State::VsgdBbprop(s) => {
                let dim = theta.len();
                self.grads.resize(n, dim);
                self.curvs.resize(n, dim);
                for j in 0..n {
                    problem.draw_sample_into(rng, &mut self.sample);
                    problem.sample_grad_into(theta, &self.sample, self.grads.row_mut(j))?;
                    problem.sample_curvature_bbprop_into(theta, &self.sample, self.curvs.row_mut(j))?;
                }
                s.step(theta, &self.grads, &self.curvs, &mut self.diag)?;
            }
            state => {
                sample_batch(problem, theta, n, rng, &mut self.sample, &mut self.grads, None)?;
                mean_into(&self.grads, &mut self.mean_grad);
                let eta0 = self.config.eta0;
                match state {
                    State::Sgd => sgd_update(theta, &self.mean_grad, eta0, self.config.gamma, t)?,
                    State::AdaGrad(a) => a.update(theta, &self.mean_grad, eta0)?,
                    State::NaturalGrad(a) => a.update(theta, &self.mean_grad, eta0)?,
                    _ => unreachable!(),
                }
            }
        }
        self.t = t;
        Ok(())
    }

    /// Diagnostics of the last step (vSGD variants only).
    pub fn diagnostics(&self) -> Option<&StepDiagnostics> {
        match self.state {
            State::VsgdFd(_) | State::VsgdBbprop(_) if self.t > 0 => Some(&self.diag),
            _ => None,
        }
    }

    pub fn vsgd_fd_state(&self) -> Option<&VsgdFdState> {
        match &self.state {
            State::VsgdFd(s) => Some(s),
            _ => None,
        }
    }

    pub fn vsgd_bbprop_state(&self) -> Option<&VsgdBbpropState> {
        match &self.state {
            State::VsgdBbprop(s) => Some(s),
            _ => None,
        }
    }

    /// State and last-step invariants. Baselines have none beyond finiteness
    /// of their accumulators.
    pub fn invariants_hold(&self) -> bool {
        let diag_ok = self.diagnostics().is_none_or(StepDiagnostics::is_valid);
        let state_ok = match &self.state {
            State::Sgd => true,
            State::AdaGrad(a) => a.accum.iter().all(|x| x.is_finite() && *x >= 0.0),
            State::NaturalGrad(a) => a.v_bar.iter().all(|x| x.is_finite() && *x >= 0.0),
            State::VsgdBbprop(s) => s.invariants_hold(),
            State::VsgdFd(s) => s.invariants_hold(),
        };
        diag_ok && state_ok
    }
}

fn mean_into(g: &SampleMatrix, out: &mut Vec<f64>) {
    out.clear();
    out.resize(g.dim(), 0.0);
    for row in g.rows() {
        for (o, x) in out.iter_mut().zip(row) {
            *o += x;
        }
    }
    let inv = 1.0 / g.n() as f64;
    out.iter_mut().for_each(|o| *o *= inv);
}

/// Per-checkpoint summary of the optimizer internals, for debugging.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsRecord {
    pub iteration: u64,
    pub theta: Vec<f64>,
    pub eta: Vec<f64>,
    pub tau: Vec<f64>,
    pub outliers: usize,
}

impl DiagnosticsRecord {
    pub fn capture(opt: &Optimizer, theta: &[f64]) -> Self {
        let (eta, tau, outliers) = match opt.diagnostics() {
            Some(d) => (d.eta.clone(), d.tau.clone(), d.outlier_count()),
            None => (Vec::new(), Vec::new(), 0),
        };
        DiagnosticsRecord {
            iteration: opt.steps(),
            theta: theta.to_vec(),
            eta,
            tau,
            outliers,
        }
    }
}

/// Writes `iteration,dim,theta,eta,tau,outliers` rows, one per dimension.
pub fn write_diagnostics_csv<W: Write>(records: &[DiagnosticsRecord], mut w: W) -> Result<()> {
    writeln!(w, "iteration,dim,theta,eta,tau,outliers")?;
    for r in records {
        for (i, th) in r.theta.iter().enumerate() {
            let eta = r.eta.get(i).copied().unwrap_or(f64::NAN);
            let tau = r.tau.get(i).copied().unwrap_or(f64::NAN);
            writeln!(w, "{},{},{},{},{},{}", r.iteration, i, th, eta, tau, r.outliers)?;
        }
    }
    Ok(())
}

/// Runs `steps` updates from `theta0` and returns the final parameters.
pub fn run<R: Rng + ?Sized>(
    config: &OptimizerConfig,
    problem: &ProblemSpec,
    theta0: &[f64],
    steps: u64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if theta0.len() != problem.dim {
        return Err(Error::DimensionMismatch {
            expected: problem.dim,
            found: theta0.len(),
        });
    }
    let mut opt = Optimizer::new(config.clone(), problem.dim)?;
    let mut theta = theta0.to_vec();
    opt.bootstrap(problem, &theta, rng)?;
    for _ in 0..steps {
        opt.step(problem, &mut theta, rng)?;
    }
    Ok(theta)
}
