//! Synthetic stochastic loss families.
//!
//! Each sample loss is a shifted copy of a one-dimensional shape, applied
//! coordinate-wise and summed: `f(θ; ξ) = Σ_i shape(θ_i − θ*_i − ξ_i)` with
//! offsets `ξ_i ~ N(0, σ²)`. The families are the quadratic, absolute value,
//! rectified linear and inverted Gaussian shapes, a sparse quadratic whose
//! coordinates only participate with probability `p_nz`, and a linear
//! two-cluster problem used to illustrate orthogonal reweighting.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::{Error, Result};

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LossKind {
    Quad,
    Abs,
    RectLin,
    Gauss,
    SparseQuad,
    TwoCluster,
}

impl LossKind {
    /// The four one-dimensional shapes of the elementary test grid.
    pub const GRID: [LossKind; 4] = [
        LossKind::Quad,
        LossKind::Abs,
        LossKind::RectLin,
        LossKind::Gauss,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LossKind::Quad => "quad",
            LossKind::Abs => "abs",
            LossKind::RectLin => "rectlin",
            LossKind::Gauss => "gauss",
            LossKind::SparseQuad => "sparsequad",
            LossKind::TwoCluster => "twocluster",
        }
    }

    pub fn is_grid_member(self) -> bool {
        Self::GRID.contains(&self)
    }

    /// Whether every sample loss is differentiable everywhere.
    pub fn is_smooth(self) -> bool {
        !matches!(self, LossKind::Abs | LossKind::RectLin)
    }

    fn shape_loss(self, u: f64, a: f64) -> f64 {
        match self {
            LossKind::Quad | LossKind::SparseQuad => a * u * u,
            LossKind::Abs => a * u.abs(),
            LossKind::RectLin => {
                if u > 0.0 {
                    a * u
                } else {
                    0.0
                }
            }
            LossKind::Gauss => a - a * (-0.5 * u * u).exp(),
            LossKind::TwoCluster => unreachable!("two-cluster loss is linear, not a shape"),
        }
    }

    fn shape_grad(self, u: f64, a: f64) -> f64 {
        match self {
            LossKind::Quad | LossKind::SparseQuad => 2.0 * a * u,
            // sign(0) = 0 at the kink
            LossKind::Abs => {
                if u > 0.0 {
                    a
                } else if u < 0.0 {
                    -a
                } else {
                    0.0
                }
            }
            LossKind::RectLin => {
                if u > 0.0 {
                    a
                } else {
                    0.0
                }
            }
            LossKind::Gauss => a * u * (-0.5 * u * u).exp(),
            LossKind::TwoCluster => unreachable!("two-cluster loss is linear, not a shape"),
        }
    }

    /// Non-negative Gauss-Newton style curvature of one shape.
    fn shape_bbprop(self, u: f64, a: f64) -> f64 {
        match self {
            LossKind::Quad | LossKind::SparseQuad => 2.0 * a,
            LossKind::Abs | LossKind::RectLin | LossKind::TwoCluster => 0.0,
            LossKind::Gauss => (a * (1.0 - u * u) * (-0.5 * u * u).exp()).max(0.0),
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "quad" => Ok(LossKind::Quad),
            "abs" => Ok(LossKind::Abs),
            "rectlin" | "rect" => Ok(LossKind::RectLin),
            "gauss" => Ok(LossKind::Gauss),
            "sparsequad" | "sparse" => Ok(LossKind::SparseQuad),
            "twocluster" => Ok(LossKind::TwoCluster),
            other => Err(Error::config("kind", format!("unknown loss family `{other}`"))),
        }
    }
}

/// Two noisy gradient clusters: a sample belongs to the first with
/// probability `first_prob` and emits that cluster's mean plus isotropic
/// Gaussian noise.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterParams {
    pub means: [Vec<f64>; 2],
    pub noise_std: [f64; 2],
    pub first_prob: f64,
}

impl Default for ClusterParams {
    fn default() -> Self {
        ClusterParams {
            means: [vec![1.0, 0.2], vec![-0.3, 1.0]],
            noise_std: [0.15, 0.15],
            first_prob: 0.8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub kind: LossKind,
    /// Loss scale `A`.
    pub curvature: f64,
    /// Variance `σ²` of the sample offsets.
    pub noise_var: f64,
    pub dim: usize,
    /// Probability that a coordinate participates in a sample (sparse
    /// quadratic only; 1 elsewhere).
    pub sparsity_pnz: f64,
    /// Minimizer `θ*` of the expected loss (shapes only).
    pub optimum: Vec<f64>,
    pub clusters: Option<ClusterParams>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub offsets: Vec<f64>,
    pub active_mask: Vec<bool>,
    /// Cluster index for two-cluster problems.
    pub cluster: Option<usize>,
}

impl Sample {
    pub fn zeroed(dim: usize) -> Self {
        Sample {
            offsets: vec![0.0; dim],
            active_mask: vec![true; dim],
            cluster: None,
        }
    }
}

impl ProblemSpec {
    /// One-dimensional problem of the elementary grid.
    pub fn new(kind: LossKind, curvature: f64, noise_var: f64) -> Result<Self> {
        Self::with_dim(kind, curvature, noise_var, 1)
    }

    pub fn with_dim(kind: LossKind, curvature: f64, noise_var: f64, dim: usize) -> Result<Self> {
        if kind == LossKind::TwoCluster {
            return Err(Error::InvalidProblem(
                "use ProblemSpec::two_cluster for the two-cluster problem".into(),
            ));
        }
        let spec = ProblemSpec {
            kind,
            curvature,
            noise_var,
            dim,
            sparsity_pnz: 1.0,
            optimum: vec![0.0; dim],
            clusters: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn sparse_quad(curvature: f64, noise_var: f64, dim: usize, pnz: f64) -> Result<Self> {
        let spec = ProblemSpec {
            kind: LossKind::SparseQuad,
            curvature,
            noise_var,
            dim,
            sparsity_pnz: pnz,
            optimum: vec![0.0; dim],
            clusters: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn two_cluster(params: ClusterParams) -> Result<Self> {
        let dim = params.means[0].len();
        let spec = ProblemSpec {
            kind: LossKind::TwoCluster,
            curvature: 1.0,
            noise_var: params.noise_std[0].powi(2).max(f64::MIN_POSITIVE),
            dim,
            sparsity_pnz: 1.0,
            optimum: vec![0.0; dim],
            clusters: Some(params),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_optimum(mut self, optimum: Vec<f64>) -> Result<Self> {
        self.optimum = optimum;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidProblem(msg));
        if self.dim == 0 {
            return bad("dimension must be at least 1".into());
        }
        if !(self.curvature > 0.0 && self.curvature.is_finite()) {
            return bad(format!("curvature must be positive, got {}", self.curvature));
        }
        if !(self.noise_var > 0.0 && self.noise_var.is_finite()) {
            return bad(format!("noise variance must be positive, got {}", self.noise_var));
        }
        if !(self.sparsity_pnz > 0.0 && self.sparsity_pnz <= 1.0) {
            return bad(format!("p_nz must lie in (0, 1], got {}", self.sparsity_pnz));
        }
        if self.kind != LossKind::SparseQuad && self.sparsity_pnz != 1.0 {
            return bad("p_nz < 1 is only supported by the sparse quadratic".into());
        }
        if self.optimum.len() != self.dim {
            return bad(format!(
                "optimum has {} entries for dimension {}",
                self.optimum.len(),
                self.dim
            ));
        }
        match (&self.clusters, self.kind) {
            (Some(c), LossKind::TwoCluster) => {
                if self.dim < 2 {
                    return bad("two-cluster problems need at least 2 dimensions".into());
                }
                if c.means.iter().any(|m| m.len() != self.dim) {
                    return bad("cluster means must match the problem dimension".into());
                }
                if !(0.0..=1.0).contains(&c.first_prob) {
                    return bad(format!("cluster probability {} outside [0, 1]", c.first_prob));
                }
                if c.noise_std.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
                    return bad("cluster noise must be finite and non-negative".into());
                }
            }
            (None, LossKind::TwoCluster) => return bad("two-cluster problem without clusters".into()),
            (Some(_), _) => return bad("cluster parameters given for a shape problem".into()),
            (None, _) => {}
        }
        Ok(())
    }

    pub fn noise_std(&self) -> f64 {
        self.noise_var.sqrt()
    }

    fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: len,
            });
        }
        Ok(())
    }

    pub fn draw_sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Sample {
        let mut s = Sample::zeroed(self.dim);
        self.draw_sample_into(rng, &mut s);
        s
    }

    /// Refills `s` in place; `s` is resized to the problem dimension.
    pub fn draw_sample_into<R: Rng + ?Sized>(&self, rng: &mut R, s: &mut Sample) {
        s.offsets.resize(self.dim, 0.0);
        s.active_mask.resize(self.dim, true);
        match (&self.clusters, self.kind) {
            (Some(c), LossKind::TwoCluster) => {
                let k = if rng.random::<f64>() < c.first_prob { 0 } else { 1 };
                s.cluster = Some(k);
                for (x, m) in s.offsets.iter_mut().zip(s.active_mask.iter_mut()) {
                    *x = c.noise_std[k] * rng.sample::<f64, _>(StandardNormal);
                    *m = true;
                }
            }
            _ => {
                let sd = self.noise_std();
                let sparse = self.kind == LossKind::SparseQuad;
                s.cluster = None;
                for (x, m) in s.offsets.iter_mut().zip(s.active_mask.iter_mut()) {
                    *x = sd * rng.sample::<f64, _>(StandardNormal);
                    *m = !sparse || rng.random::<f64>() < self.sparsity_pnz;
                }
            }
        }
    }

    fn cluster_mean(&self, s: &Sample) -> &[f64] {
        let c = self.clusters.as_ref().expect("validated two-cluster problem");
        &c.means[s.cluster.unwrap_or(0)]
    }

    pub fn sample_loss(&self, theta: &[f64], s: &Sample) -> Result<f64> {
        self.check_dim(theta.len())?;
        self.check_dim(s.offsets.len())?;
        if self.kind == LossKind::TwoCluster {
            let mean = self.cluster_mean(s);
            return Ok(theta
                .iter()
                .zip(mean.iter().zip(&s.offsets))
                .map(|(t, (m, e))| t * (m + e))
                .sum());
        }
        let mut total = 0.0;
        for i in 0..self.dim {
            if s.active_mask[i] {
                let u = theta[i] - self.optimum[i] - s.offsets[i];
                total += self.kind.shape_loss(u, self.curvature);
            }
        }
        Ok(total)
    }

    pub fn sample_grad(&self, theta: &[f64], s: &Sample) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim];
        self.sample_grad_into(theta, s, &mut out)?;
        Ok(out)
    }

    pub fn sample_grad_into(&self, theta: &[f64], s: &Sample, out: &mut [f64]) -> Result<()> {
        self.check_dim(theta.len())?;
        self.check_dim(s.offsets.len())?;
        self.check_dim(out.len())?;
        if self.kind == LossKind::TwoCluster {
            let mean = self.cluster_mean(s);
            for ((o, m), e) in out.iter_mut().zip(mean).zip(&s.offsets) {
                *o = m + e;
            }
            return Ok(());
        }
        for i in 0..self.dim {
            out[i] = if s.active_mask[i] {
                let u = theta[i] - self.optimum[i] - s.offsets[i];
                self.kind.shape_grad(u, self.curvature)
            } else {
                0.0
            };
        }
        Ok(())
    }

    /// Analytic per-coordinate sample curvature, the stand-in for a bbprop
    /// backward pass. Exactly zero for the piecewise-linear families.
    pub fn sample_curvature_bbprop(&self, theta: &[f64], s: &Sample) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim];
        self.sample_curvature_bbprop_into(theta, s, &mut out)?;
        Ok(out)
    }

    pub fn sample_curvature_bbprop_into(&self, theta: &[f64], s: &Sample, out: &mut [f64]) -> Result<()> {
        self.check_dim(theta.len())?;
        self.check_dim(s.offsets.len())?;
        self.check_dim(out.len())?;
        for i in 0..self.dim {
            out[i] = if s.active_mask[i] {
                let u = theta[i] - self.optimum[i] - s.offsets[i];
                self.kind.shape_bbprop(u, self.curvature)
            } else {
                0.0
            };
        }
        Ok(())
    }

    /// Closed-form `E_ξ[f(θ; ξ)]`.
    pub fn expected_loss(&self, theta: &[f64]) -> Result<f64> {
        self.check_dim(theta.len())?;
        let a = self.curvature;
        let var = self.noise_var;
        let sd = self.noise_std();
        if let (LossKind::TwoCluster, Some(c)) = (self.kind, &self.clusters) {
            let q = c.first_prob;
            return Ok(theta
                .iter()
                .zip(c.means[0].iter().zip(&c.means[1]))
                .map(|(t, (m0, m1))| t * (q * m0 + (1.0 - q) * m1))
                .sum());
        }
        let total = theta
            .iter()
            .zip(&self.optimum)
            .map(|(t, o)| {
                let u = t - o;
                match self.kind {
                    LossKind::Quad => a * (u * u + var),
                    LossKind::SparseQuad => self.sparsity_pnz * a * (u * u + var),
                    LossKind::Abs => {
                        a * (sd * (2.0 / std::f64::consts::PI).sqrt() * (-u * u / (2.0 * var)).exp()
                            + u * libm::erf(u / (sd * SQRT_2)))
                    }
                    LossKind::RectLin => {
                        let z = u / sd;
                        a * (u * std_normal_cdf(z) + sd * std_normal_pdf(z))
                    }
                    LossKind::Gauss => {
                        a - a / (1.0 + var).sqrt() * (-u * u / (2.0 * (1.0 + var))).exp()
                    }
                    LossKind::TwoCluster => unreachable!(),
                }
            })
            .sum();
        Ok(total)
    }

    /// Renders the problem as `key=value` lines.
    pub fn to_kv(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            out.push_str(k);
            out.push('=');
            out.push_str(&v);
            out.push('\n');
        };
        put("kind", self.kind.name().to_string());
        put("curvature", self.curvature.to_string());
        put("noise_var", self.noise_var.to_string());
        put("dim", self.dim.to_string());
        put("pnz", self.sparsity_pnz.to_string());
        put("optimum", join_floats(&self.optimum));
        if let Some(c) = &self.clusters {
            put("cluster_prob", c.first_prob.to_string());
            put("cluster_mean_a", join_floats(&c.means[0]));
            put("cluster_mean_b", join_floats(&c.means[1]));
            put("cluster_noise_a", c.noise_std[0].to_string());
            put("cluster_noise_b", c.noise_std[1].to_string());
        }
        out
    }

    /// Parses `key=value` lines as written by [`ProblemSpec::to_kv`]. Blank
    /// lines and `#` comments are ignored; missing keys take the grid
    /// defaults (`A = 1`, `σ² = 1`, `d = 1`).
    pub fn from_kv(text: &str) -> Result<Self> {
        let mut kind = None;
        let mut curvature = 1.0;
        let mut noise_var = 1.0;
        let mut dim = None;
        let mut pnz = 1.0;
        let mut optimum = None;
        let mut clusters = ClusterParams::default();
        let mut has_clusters = false;
        for (key, value) in parse_kv_lines(text)? {
            match key {
                "kind" => kind = Some(value.parse::<LossKind>()?),
                "curvature" => curvature = parse_f64(key, value)?,
                "noise_var" => noise_var = parse_f64(key, value)?,
                "dim" => {
                    dim = Some(value.parse::<usize>().map_err(|e| Error::config(key, e.to_string()))?)
                }
                "pnz" => pnz = parse_f64(key, value)?,
                "optimum" => optimum = Some(parse_f64_list(key, value)?),
                "cluster_prob" => {
                    clusters.first_prob = parse_f64(key, value)?;
                    has_clusters = true;
                }
                "cluster_mean_a" => {
                    clusters.means[0] = parse_f64_list(key, value)?;
                    has_clusters = true;
                }
                "cluster_mean_b" => {
                    clusters.means[1] = parse_f64_list(key, value)?;
                    has_clusters = true;
                }
                "cluster_noise_a" => {
                    clusters.noise_std[0] = parse_f64(key, value)?;
                    has_clusters = true;
                }
                "cluster_noise_b" => {
                    clusters.noise_std[1] = parse_f64(key, value)?;
                    has_clusters = true;
                }
                other => return Err(Error::config(other, "unknown key")),
            }
        }
        let kind = kind.ok_or_else(|| Error::config("kind", "missing"))?;
        if kind == LossKind::TwoCluster {
            let mut spec = ProblemSpec::two_cluster(clusters)?;
            if let Some(o) = optimum {
                spec = spec.with_optimum(o)?;
            }
            if let Some(d) = dim {
                spec.check_dim(d)?;
            }
            return Ok(spec);
        }
        if has_clusters {
            return Err(Error::config("cluster_*", "only valid for kind=twocluster"));
        }
        let dim = dim.unwrap_or_else(|| optimum.as_ref().map_or(1, Vec::len));
        let spec = ProblemSpec {
            kind,
            curvature,
            noise_var,
            dim,
            sparsity_pnz: pnz,
            optimum: optimum.unwrap_or_else(|| vec![0.0; dim]),
            clusters: None,
        };
        spec.validate()?;
        Ok(spec)
    }
}

pub fn std_normal_pdf(z: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * z * z).exp()
}

pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / SQRT_2)
}

pub(crate) fn join_floats(xs: &[f64]) -> String {
    xs.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

pub(crate) fn parse_f64(key: &str, value: &str) -> Result<f64> {
    value
        .trim()
        .parse::<f64>()
        .map_err(|e| Error::config(key, format!("`{value}`: {e}")))
}

pub(crate) fn parse_f64_list(key: &str, value: &str) -> Result<Vec<f64>> {
    value.split(',').map(|v| parse_f64(key, v)).collect()
}

pub(crate) fn parse_kv_lines(text: &str) -> Result<Vec<(&str, &str)>> {
    let mut out = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::config(line, "expected key=value"))?;
        out.push((k.trim(), v.trim()));
    }
    Ok(out)
}
