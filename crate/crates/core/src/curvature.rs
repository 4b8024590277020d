//! Finite-difference curvature estimates.
//!
//! Two gradients of the same sample loss, taken a probe step `δ` apart, give
//! a per-coordinate secant curvature `|(∇_i(θ) − ∇_i(θ+δ)) / δ_i|`. Unlike an
//! analytic second derivative this sees the kinks of piecewise-linear losses
//! whenever the probe straddles one.

use crate::problems::{ProblemSpec, Sample};
use crate::{Result, EPSILON};

/// Probe step, floored so that `|δ_i| ≥ ε` in every coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct FdProbe {
    delta: Vec<f64>,
    epsilon: f64,
}

/// `x` if `|x| ≥ eps`, otherwise `eps` carrying the sign of `x` (`+` for 0).
pub fn floor_step(x: f64, eps: f64) -> f64 {
    if x.abs() >= eps {
        x
    } else if x < 0.0 {
        -eps
    } else {
        eps
    }
}

impl FdProbe {
    pub fn new(delta: Vec<f64>, epsilon: f64) -> Self {
        let mut probe = FdProbe {
            delta,
            epsilon,
        };
        probe.floor();
        probe
    }

    pub fn with_default_epsilon(delta: Vec<f64>) -> Self {
        Self::new(delta, EPSILON)
    }

    /// Rebuilds the probe in place from `delta`, reusing the allocation.
    pub fn reset_from(&mut self, delta: impl Iterator<Item = f64>) {
        self.delta.clear();
        self.delta.extend(delta);
        self.floor();
    }

    fn floor(&mut self) {
        let eps = self.epsilon;
        self.delta.iter_mut().for_each(|d| *d = floor_step(*d, eps));
    }

    pub fn delta(&self) -> &[f64] {
        &self.delta
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Writes `θ + δ` into `out`.
    pub fn shifted_into(&self, theta: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(theta.iter().zip(&self.delta).map(|(t, d)| t + d));
    }
}

/// Secant curvatures from gradients already evaluated at `θ` and `θ + δ`.
pub fn fd_from_gradients(base: &[f64], shifted: &[f64], probe: &FdProbe, out: &mut [f64]) {
    for (((o, g0), g1), d) in out.iter_mut().zip(base).zip(shifted).zip(probe.delta()) {
        *o = ((g0 - g1) / d).abs();
    }
}

/// Finite-difference curvature of one sample loss along a simultaneous shift
/// of all coordinates by the probe step.
pub fn fd_curvature(
    problem: &ProblemSpec,
    theta: &[f64],
    probe: &FdProbe,
    sample: &Sample,
) -> Result<Vec<f64>> {
    if probe.delta().len() != theta.len() {
        return Err(crate::Error::DimensionMismatch {
            expected: theta.len(),
            found: probe.delta().len(),
        });
    }
    let base = problem.sample_grad(theta, sample)?;
    let mut shifted_theta = Vec::with_capacity(theta.len());
    probe.shifted_into(theta, &mut shifted_theta);
    let shifted = problem.sample_grad(&shifted_theta, sample)?;
    let mut out = vec![0.0; theta.len()];
    fd_from_gradients(&base, &shifted, probe, &mut out);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::LossKind;
    use crate::rng::seeded;
    use proptest::prelude::*;

    fn at(offset: f64) -> Sample {
        Sample {
            offsets: vec![offset],
            active_mask: vec![true],
            cluster: None,
        }
    }

    #[test]
    fn floor_keeps_sign_and_defaults_positive() {
        assert_eq!(floor_step(0.0, 1e-5), 1e-5);
        assert_eq!(floor_step(-1e-9, 1e-5), -1e-5);
        assert_eq!(floor_step(3e-9, 1e-5), 1e-5);
        assert_eq!(floor_step(-0.5, 1e-5), -0.5);
        let p = FdProbe::with_default_epsilon(vec![0.0, -0.0, 2.0]);
        assert!(p.delta().iter().all(|d| d.abs() >= 1e-5));
    }

    #[test]
    fn quadratic_is_exact() {
        let spec = ProblemSpec::new(LossKind::Quad, 1.0, 1.0).unwrap();
        for (theta, delta, xi) in [(0.3, 0.7, -1.0), (-5.0, -1e-3, 2.0), (1.0, 0.0, 0.0)] {
            let h = fd_curvature(&spec, &[theta], &FdProbe::with_default_epsilon(vec![delta]), &at(xi)).unwrap();
            assert!((h[0] - 2.0).abs() < 1e-10, "{h:?}");
        }
    }

    #[test]
    fn abs_same_side_is_zero() {
        let spec = ProblemSpec::new(LossKind::Abs, 1.0, 1.0).unwrap();
        let h = fd_curvature(&spec, &[1.0], &FdProbe::with_default_epsilon(vec![0.5]), &at(0.0)).unwrap();
        assert_eq!(h, vec![0.0]);
    }

    #[test]
    fn abs_across_kink() {
        // ∇ at θ=−0.25 is −1, at θ+δ=0.25 is +1: |(−1 − 1)/0.5| = 4.
        let spec = ProblemSpec::new(LossKind::Abs, 1.0, 1.0).unwrap();
        let h = fd_curvature(&spec, &[-0.25], &FdProbe::with_default_epsilon(vec![0.5]), &at(0.0)).unwrap();
        assert!((h[0] - 4.0).abs() < 1e-15);
    }

    #[test]
    fn gauss_small_probe_approaches_second_derivative() {
        let spec = ProblemSpec::new(LossKind::Gauss, 1.0, 1.0).unwrap();
        for theta in [-2.5f64, -0.4, 0.0, 0.3, 1.7] {
            let h = fd_curvature(&spec, &[theta], &FdProbe::with_default_epsilon(vec![1e-6]), &at(0.0)).unwrap();
            let exact = ((1.0 - theta * theta) * (-0.5 * theta * theta).exp()).abs();
            assert!((h[0] - exact).abs() < 1e-3, "θ={theta}: {} vs {exact}", h[0]);
        }
    }

    #[test]
    fn abs_expected_fd_curvature_positive() {
        let spec = ProblemSpec::new(LossKind::Abs, 1.0, 1.0).unwrap();
        let probe = FdProbe::with_default_epsilon(vec![0.5]);
        let mut rng = seeded(17);
        let n = 100_000;
        let mut mean = 0.0;
        for _ in 0..n {
            let s = spec.draw_sample(&mut rng);
            assert_eq!(spec.sample_curvature_bbprop(&[0.0], &s).unwrap()[0], 0.0);
            mean += fd_curvature(&spec, &[0.0], &probe, &s).unwrap()[0];
        }
        mean /= n as f64;
        // P(0 < ξ < 0.5) · 2/0.5 ≈ 0.1915 · 4
        assert!(mean > 0.0);
        assert!((mean - 0.766).abs() < 0.02, "{mean}");
    }

    #[test]
    fn dimension_mismatch() {
        let spec = ProblemSpec::with_dim(LossKind::Quad, 1.0, 1.0, 2).unwrap();
        let s = Sample::zeroed(2);
        assert!(fd_curvature(&spec, &[0.0, 0.0], &FdProbe::with_default_epsilon(vec![0.1]), &s).is_err());
    }

    proptest! {
        #[test]
        fn quadratic_exact_everywhere(
            a in 0.1f64..10.0,
            theta in -10.0f64..10.0,
            step in 0.01f64..10.0,
            negative in any::<bool>(),
            xi in -10.0f64..10.0,
        ) {
            let delta = if negative { -step } else { step };
            let spec = ProblemSpec::new(LossKind::Quad, a, 1.0).unwrap();
            let h = fd_curvature(&spec, &[theta], &FdProbe::with_default_epsilon(vec![delta]), &at(xi)).unwrap();
            prop_assert!((h[0] - 2.0 * a).abs() < 1e-10);
        }

        #[test]
        fn non_negative(kind_idx in 0usize..4, theta in -5.0f64..5.0, delta in -5.0f64..5.0, xi in -5.0f64..5.0) {
            let spec = ProblemSpec::new(LossKind::GRID[kind_idx], 1.0, 1.0).unwrap();
            let h = fd_curvature(&spec, &[theta], &FdProbe::with_default_epsilon(vec![delta]), &at(xi)).unwrap();
            prop_assert!(h[0] >= 0.0);
        }
    }
}
