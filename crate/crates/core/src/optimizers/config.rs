use std::fmt;
use std::str::FromStr;

use crate::{Error, Result, EPSILON};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Sgd,
    AdaGrad,
    NaturalGrad,
    VsgdBbprop,
    VsgdFd,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::Sgd,
        Algorithm::AdaGrad,
        Algorithm::NaturalGrad,
        Algorithm::VsgdBbprop,
        Algorithm::VsgdFd,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Sgd => "sgd",
            Algorithm::AdaGrad => "adagrad",
            Algorithm::NaturalGrad => "natural",
            Algorithm::VsgdBbprop => "vsgd",
            Algorithm::VsgdFd => "vsgd-fd",
        }
    }

    /// The vSGD variants set their own rates and ignore `eta0`/`gamma`.
    pub fn is_adaptive(self) -> bool {
        matches!(self, Algorithm::VsgdBbprop | Algorithm::VsgdFd)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sgd" => Ok(Algorithm::Sgd),
            "adagrad" => Ok(Algorithm::AdaGrad),
            "natural" | "naturalgrad" | "natural-gradient" => Ok(Algorithm::NaturalGrad),
            "vsgd" | "vsgd-bbprop" => Ok(Algorithm::VsgdBbprop),
            "vsgd-fd" | "vsgdfd" => Ok(Algorithm::VsgdFd),
            other => Err(Error::config("algos", format!("unknown algorithm `{other}`"))),
        }
    }
}

/// Which side of `θ` the finite-difference probe is placed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ProbeDirection {
    /// `θ − ḡ`: along the direction the parameter update moves.
    #[default]
    Descent,
    /// `θ + ḡ`.
    Ascent,
}

/// What the two-standard-deviation outlier test looks at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutlierTest {
    /// Minibatch means of gradient and curvature.
    #[default]
    BatchMean,
    /// Every individual sample in the minibatch.
    PerSample,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VsgdOptions {
    pub epsilon: f64,
    pub probe: ProbeDirection,
    pub outlier_test: OutlierTest,
    /// Use per-dimension effective minibatch sizes (count of non-zero
    /// gradient entries) in the rate and moving averages.
    pub sparse_aware: bool,
    /// Multiplier on the bootstrapped `v̄`.
    pub bootstrap_slack: f64,
    /// Recompute finite-difference curvature every `curvature_stride` steps.
    pub curvature_stride: usize,
}

impl Default for VsgdOptions {
    fn default() -> Self {
        VsgdOptions {
            epsilon: EPSILON,
            probe: ProbeDirection::Descent,
            outlier_test: OutlierTest::BatchMean,
            sparse_aware: false,
            bootstrap_slack: 1.0,
            curvature_stride: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    pub algorithm: Algorithm,
    /// Initial learning rate (baselines only).
    pub eta0: f64,
    /// Decay exponent, `η_t = η₀ t^(−γ)` (SGD only).
    pub gamma: f64,
    pub minibatch_n: usize,
    /// Samples drawn to initialise the vSGD moving averages.
    pub bootstrap_count: usize,
    /// Time constant of the natural-gradient second-moment average.
    pub natural_time_constant: f64,
    pub vsgd: VsgdOptions,
}

impl OptimizerConfig {
    fn base(algorithm: Algorithm, eta0: f64, gamma: f64, minibatch_n: usize) -> Self {
        OptimizerConfig {
            algorithm,
            eta0,
            gamma,
            minibatch_n,
            bootstrap_count: 10,
            natural_time_constant: 100.0,
            vsgd: VsgdOptions::default(),
        }
    }

    pub fn sgd(eta0: f64, gamma: f64, minibatch_n: usize) -> Self {
        Self::base(Algorithm::Sgd, eta0, gamma, minibatch_n)
    }

    pub fn adagrad(eta0: f64, minibatch_n: usize) -> Self {
        Self::base(Algorithm::AdaGrad, eta0, 0.0, minibatch_n)
    }

    pub fn natural_grad(eta0: f64, minibatch_n: usize) -> Self {
        Self::base(Algorithm::NaturalGrad, eta0, 0.0, minibatch_n)
    }

    pub fn vsgd_bbprop(minibatch_n: usize) -> Self {
        Self::base(Algorithm::VsgdBbprop, 0.0, 0.0, minibatch_n)
    }

    pub fn vsgd_fd(minibatch_n: usize) -> Self {
        Self::base(Algorithm::VsgdFd, 0.0, 0.0, minibatch_n)
    }

    /// Short stable identifier, e.g. `sgd_eta0.1_g1_n10` or `vsgd-fd_n1`.
    pub fn label(&self) -> String {
        match self.algorithm {
            Algorithm::Sgd => format!("sgd_eta{}_g{}_n{}", self.eta0, self.gamma, self.minibatch_n),
            Algorithm::AdaGrad | Algorithm::NaturalGrad => {
                format!("{}_eta{}_n{}", self.algorithm, self.eta0, self.minibatch_n)
            }
            Algorithm::VsgdBbprop | Algorithm::VsgdFd => {
                format!("{}_n{}", self.algorithm, self.minibatch_n)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.minibatch_n == 0 {
            return Err(Error::config("n", "minibatch size must be at least 1"));
        }
        if !self.algorithm.is_adaptive() && !(self.eta0 > 0.0 && self.eta0.is_finite()) {
            return Err(Error::config("eta0", format!("must be positive, got {}", self.eta0)));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::config("gamma", format!("must be non-negative, got {}", self.gamma)));
        }
        if self.algorithm.is_adaptive() && self.bootstrap_count == 0 {
            return Err(Error::config("bootstrap_count", "must be at least 1"));
        }
        if self.vsgd.curvature_stride == 0 {
            return Err(Error::config("curvature_stride", "must be at least 1"));
        }
        if !(self.vsgd.bootstrap_slack > 0.0) {
            return Err(Error::config("bootstrap_slack", "must be positive"));
        }
        if !(self.natural_time_constant >= 1.0) {
            return Err(Error::config("natural_time_constant", "must be at least 1"));
        }
        Ok(())
    }
}
