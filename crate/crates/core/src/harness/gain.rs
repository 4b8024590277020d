//! Parallelization gain of minibatches on the noisy sparse quadratic.
//!
//! A one-dimensional quadratic with curvature `h` and optimum 0 receives
//! minibatches of `n` samples; each sample is non-zero with probability
//! `p`. The optimizer uses oracle statistics of the true gradient
//! distribution, so the only question is how much a step on `n` samples is
//! worth compared with `n` single-sample steps.
//!
//! The masked minibatch gradient depends on the samples only through the
//! non-zero count `k ~ Bin(n, p)` and the offset sum `S ~ N(0, kσ²)`, which
//! are drawn directly.

use std::io::Write;

use rand::Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};

use super::grid::parallel_map;
use crate::rng::{derive_seed, seeded};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GainMode {
    /// Rate uses the realized non-zero count of each minibatch.
    Instance,
    /// Rate uses the average non-zero count of updating minibatches.
    Global,
    /// Best of 40 fixed SGD rates in `[0.01, 100]`.
    FixedEnvelope,
}

impl GainMode {
    pub const ALL: [GainMode; 3] = [GainMode::Instance, GainMode::Global, GainMode::FixedEnvelope];

    pub fn name(self) -> &'static str {
        match self {
            GainMode::Instance => "instance",
            GainMode::Global => "global",
            GainMode::FixedEnvelope => "fixed",
        }
    }
}

impl std::str::FromStr for GainMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "instance" => Ok(GainMode::Instance),
            "global" => Ok(GainMode::Global),
            "fixed" | "envelope" => Ok(GainMode::FixedEnvelope),
            other => Err(Error::config("modes", format!("unknown gain mode `{other}`"))),
        }
    }
}

impl std::fmt::Display for GainMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GainConfig {
    /// Standard deviation of the sample offsets.
    pub sigma: f64,
    pub p_nz: f64,
    pub minibatch_sizes: Vec<usize>,
    pub modes: Vec<GainMode>,
    pub reps: usize,
    /// Minibatch steps per trajectory.
    pub horizon: usize,
    pub theta0: f64,
    /// Curvature `h` of the quadratic.
    pub curvature: f64,
    pub seed: u64,
    pub workers: usize,
}

impl Default for GainConfig {
    fn default() -> Self {
        GainConfig {
            sigma: 0.1,
            p_nz: 1.0,
            minibatch_sizes: vec![1, 10, 100],
            modes: GainMode::ALL.to_vec(),
            reps: 10_000,
            horizon: 1,
            theta0: 1.0,
            curvature: 1.0,
            seed: 0,
            workers: 0,
        }
    }
}

impl GainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::config("sigma", "must be non-negative"));
        }
        if !(self.p_nz > 0.0 && self.p_nz <= 1.0) {
            return Err(Error::config("pnz", format!("must lie in (0, 1], got {}", self.p_nz)));
        }
        if self.minibatch_sizes.is_empty() || self.minibatch_sizes.contains(&0) {
            return Err(Error::config("n", "minibatch sizes must be at least 1"));
        }
        if self.modes.is_empty() {
            return Err(Error::config("modes", "at least one mode is required"));
        }
        if self.reps < 2 {
            return Err(Error::config("reps", "at least 2 repetitions are required"));
        }
        if self.horizon == 0 {
            return Err(Error::config("horizon", "must be at least 1"));
        }
        if !(self.curvature > 0.0) || self.theta0 == 0.0 || !self.theta0.is_finite() {
            return Err(Error::config("theta0", "curvature must be positive and theta0 non-zero"));
        }
        Ok(())
    }
}

/// 40 rates log-spaced over `[0.01, 100]`.
pub fn fixed_rates() -> Vec<f64> {
    (0..40).map(|i| 10f64.powf(-2.0 + 4.0 * i as f64 / 39.0)).collect()
}

/// Expected non-zero count of a minibatch, given that it has at least one.
pub fn expected_active(n: usize, p: f64) -> f64 {
    p * n as f64 / (1.0 - (1.0 - p).powi(n as i32))
}

/// Oracle rate for a minibatch with effective size `m`:
/// `(n/m)(1/h) E₁² / (E₂/m + (m−1)/m E₁²)`.
pub fn sparse_oracle_rate(n: f64, m: f64, h: f64, u: f64, sigma: f64) -> f64 {
    let e1 = h * u;
    let e2 = h * h * (u * u + sigma * sigma);
    let e1s = e1 * e1;
    let denom = e2 / m + (m - 1.0) / m * e1s;
    if denom == 0.0 {
        return 0.0;
    }
    (n / m) / h * e1s / denom
}

/// Gain per sample gradient, `−log₁₀(mean(L_T/L_0)) / (T n)`, with its
/// delta-method standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainEstimate {
    pub gain: f64,
    pub stderr: f64,
}

struct Moments {
    sum: f64,
    sum_sq: f64,
}

impl Moments {
    fn estimate(&self, reps: usize, per: f64) -> GainEstimate {
        let r = reps as f64;
        let mean = self.sum / r;
        let var = ((self.sum_sq / r - mean * mean) * r / (r - 1.0)).max(0.0);
        GainEstimate {
            gain: -mean.log10() / per,
            stderr: (var / r).sqrt() / (mean * std::f64::consts::LN_10) / per,
        }
    }
}

fn draw_batch<R: Rng + ?Sized>(rng: &mut R, binom: &Binomial, sigma: f64) -> (f64, f64) {
    let k = binom.sample(rng) as f64;
    let z: f64 = rng.sample(StandardNormal);
    (k, sigma * k.sqrt() * z)
}

/// Gain of one `(mode, n)` pair. Seeds depend on `n` only, so modes are
/// compared on common random numbers.
pub fn gain_for(cfg: &GainConfig, mode: GainMode, n: usize) -> Result<GainEstimate> {
    cfg.validate()?;
    let binom = Binomial::new(n as u64, cfg.p_nz).map_err(|e| Error::config("pnz", e.to_string()))?;
    let mut rng = seeded(derive_seed(cfg.seed, &[n as u64]));
    let h = cfg.curvature;
    let nf = n as f64;
    let per = (cfg.horizon * n) as f64;
    let u0 = cfg.theta0;
    let global_m = expected_active(n, cfg.p_nz);

    match mode {
        GainMode::Instance | GainMode::Global => {
            let mut mom = Moments { sum: 0.0, sum_sq: 0.0 };
            for _ in 0..cfg.reps {
                let mut u = u0;
                for _ in 0..cfg.horizon {
                    let (k, s) = draw_batch(&mut rng, &binom, cfg.sigma);
                    if k == 0.0 {
                        continue;
                    }
                    let m = if mode == GainMode::Instance { k } else { global_m };
                    let g = h * (k * u - s) / nf;
                    u -= sparse_oracle_rate(nf, m, h, u, cfg.sigma) * g;
                }
                let r = (u / u0).powi(2);
                mom.sum += r;
                mom.sum_sq += r * r;
            }
            Ok(mom.estimate(cfg.reps, per))
        }
        GainMode::FixedEnvelope => {
            let rates = fixed_rates();
            let mut moms: Vec<Moments> = rates.iter().map(|_| Moments { sum: 0.0, sum_sq: 0.0 }).collect();
            let mut us = vec![0.0; rates.len()];
            for _ in 0..cfg.reps {
                us.iter_mut().for_each(|u| *u = u0);
                for _ in 0..cfg.horizon {
                    let (k, s) = draw_batch(&mut rng, &binom, cfg.sigma);
                    for (u, eta) in us.iter_mut().zip(&rates) {
                        *u -= eta * h * (k * *u - s) / nf;
                    }
                }
                for (m, u) in moms.iter_mut().zip(&us) {
                    let r = (u / u0).powi(2);
                    m.sum += r;
                    m.sum_sq += r * r;
                }
            }
            let best = moms
                .iter()
                .map(|m| m.estimate(cfg.reps, per))
                .filter(|e| e.gain.is_finite())
                .max_by(|a, b| a.gain.total_cmp(&b.gain))
                .expect("at least one finite fixed rate");
            Ok(best)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GainRow {
    pub mode: GainMode,
    pub n: usize,
    pub p_nz: f64,
    pub sigma: f64,
    pub gain: f64,
    pub gain_stderr: f64,
    /// Gain at `n` over the same mode's gain at `n = 1`.
    pub ratio: f64,
    pub stderr: f64,
}

/// Gain ratios for every requested `(mode, n)`.
pub fn simulate_parallel_gain(cfg: &GainConfig) -> Result<Vec<GainRow>> {
    cfg.validate()?;
    let mut jobs = Vec::new();
    for &mode in &cfg.modes {
        jobs.push((mode, 1));
        for &n in &cfg.minibatch_sizes {
            if n != 1 {
                jobs.push((mode, n));
            }
        }
    }
    let estimates = parallel_map(cfg.workers, &jobs, |&(mode, n)| gain_for(cfg, mode, n))?;
    let mut rows = Vec::new();
    for &mode in &cfg.modes {
        let base_idx = jobs.iter().position(|&j| j == (mode, 1)).unwrap();
        let base = estimates[base_idx];
        for &n in &cfg.minibatch_sizes {
            let idx = jobs.iter().position(|&j| j == (mode, n)).unwrap();
            let e = estimates[idx];
            let (ratio, stderr) = if n == 1 {
                (1.0, 0.0)
            } else {
                let ratio = e.gain / base.gain;
                let rel = ((e.stderr / e.gain).powi(2) + (base.stderr / base.gain).powi(2)).sqrt();
                (ratio, ratio.abs() * rel)
            };
            rows.push(GainRow {
                mode,
                n,
                p_nz: cfg.p_nz,
                sigma: cfg.sigma,
                gain: e.gain,
                gain_stderr: e.stderr,
                ratio,
                stderr,
            });
        }
    }
    Ok(rows)
}

/// `mode,n,p_nz,sigma,ratio,stderr`.
pub fn write_gains_csv<W: Write>(rows: &[GainRow], mut w: W) -> Result<()> {
    writeln!(w, "mode,n,p_nz,sigma,ratio,stderr")?;
    for r in rows {
        writeln!(w, "{},{},{},{},{},{}", r.mode, r.n, r.p_nz, r.sigma, r.ratio, r.stderr)?;
    }
    Ok(())
}
