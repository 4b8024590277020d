//! End-to-end acceptance checks. Runs without the libtest harness so every
//! criterion prints exactly one PASS/FAIL line; the process exits non-zero
//! if any criterion fails.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::time::Instant;

use rand::Rng;
use vsgd::aggregation::{orthogonal_weights, SampleMatrix};
use vsgd::curvature::{fd_curvature, FdProbe};
use vsgd::harness::{
    cosine, demo_reweighting, run_grid, simulate_parallel_gain, ExperimentGrid, GainConfig, GainMode, GridResult,
};
use vsgd::optimizers::{Optimizer, OptimizerConfig, StepDiagnostics, VsgdFdState, VsgdOptions};
use vsgd::problems::{ClusterParams, LossKind, ProblemSpec};
use vsgd::rng::seeded;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

/// Straight-line loop body for one dimension: outlier test, averages, rate,
/// memory, parameter.
#[allow(clippy::too_many_arguments, clippy::manual_clamp)]
fn oracle_step(
    g_bar: f64,
    v_bar: f64,
    h_bar: f64,
    vh_bar: f64,
    tau: f64,
    theta: f64,
    grads: &[f64],
    curvs: &[f64],
) -> (f64, f64, f64, f64, f64, f64, f64) {
    let eps = 1e-5;
    let n = grads.len() as f64;
    let grad_mean = grads.iter().sum::<f64>() / n;
    let grad_sq_mean = grads.iter().map(|g| g * g).sum::<f64>() / n;
    let curv_mean = curvs.iter().sum::<f64>() / n;
    let curv_sq_mean = curvs.iter().map(|h| h * h).sum::<f64>() / n;

    let mut tau = tau;
    let grad_sd = if v_bar - g_bar * g_bar > 0.0 { (v_bar - g_bar * g_bar).sqrt() } else { 0.0 };
    let curv_sd = if vh_bar - h_bar * h_bar > 0.0 { (vh_bar - h_bar * h_bar).sqrt() } else { 0.0 };
    if (grad_mean - g_bar).abs() > 2.0 * grad_sd || (curv_mean - h_bar).abs() > 2.0 * curv_sd {
        tau += 1.0;
    }

    let g_bar = (1.0 - 1.0 / tau) * g_bar + grad_mean / tau;
    let v_bar = (1.0 - 1.0 / tau) * v_bar + grad_sq_mean / tau;
    let h_bar = (1.0 - 1.0 / tau) * h_bar + curv_mean / tau;
    let vh_bar = (1.0 - 1.0 / tau) * vh_bar + curv_sq_mean / tau;

    let mut ratio = n * g_bar * g_bar / (v_bar + (n - 1.0) * g_bar * g_bar + eps);
    if ratio > 1.0 {
        ratio = 1.0;
    }
    if ratio < 0.0 {
        ratio = 0.0;
    }
    let eta = h_bar / (vh_bar + eps) * ratio;

    let mut frac = if v_bar > 0.0 { g_bar * g_bar / v_bar } else { 0.0 };
    if frac > 1.0 {
        frac = 1.0;
    }
    let tau = (1.0 - frac) * tau + 1.0;
    let theta = theta - eta * grad_mean;
    (g_bar, v_bar, h_bar, vh_bar, tau, theta, eta)
}

fn criterion_1() -> Outcome {
    let mut rng = seeded(101);
    let mut worst: f64 = 0.0;
    for k in 0..1000 {
        let g: f64 = rng.random_range(-5.0..5.0);
        let v = g * g + rng.random_range(0.0..10.0);
        let h: f64 = rng.random_range(0.0..10.0);
        let vh = h * h + rng.random_range(0.0..20.0);
        let tau = rng.random_range(1.0..30.0);
        let theta = rng.random_range(-3.0..3.0);
        // half the states get one sample, the rest a small minibatch
        let n = if k < 500 { 1 } else { rng.random_range(2..8) };
        let spread = if rng.random::<bool>() { 10.0 } else { 1.0 };
        let grads: Vec<f64> = (0..n).map(|_| g + spread * rng.random_range(-3.0..3.0)).collect();
        let curvs: Vec<f64> = (0..n).map(|_| (h + spread * rng.random_range(-2.0..2.0)).abs()).collect();

        let expected = oracle_step(g, v, h, vh, tau, theta, &grads, &curvs);
        let mut s = VsgdFdState::from_parts(vec![g], vec![v], vec![h], vec![vh], vec![tau], 1e-5).unwrap();
        let mut th = [theta];
        let mut d = StepDiagnostics::new(1);
        let gm = SampleMatrix::from_rows(grads.iter().map(|x| [*x])).unwrap();
        let hm = SampleMatrix::from_rows(curvs.iter().map(|x| [*x])).unwrap();
        s.step(&mut th, &gm, Some(&hm), &VsgdOptions::default(), &mut d).unwrap();
        let got = (s.g_bar[0], s.v_bar[0], s.hfd_bar[0], s.vfd_bar[0], s.tau[0], th[0], d.eta[0]);
        for (a, b) in [
            (got.0, expected.0),
            (got.1, expected.1),
            (got.2, expected.2),
            (got.3, expected.3),
            (got.4, expected.4),
            (got.5, expected.5),
            (got.6, expected.6),
        ] {
            worst = worst.max((a - b).abs() / b.abs().max(1.0));
        }
    }
    outcome(worst <= 1e-12, format!("max deviation {worst:.2e} over 1000 states (tol 1e-12)"))
}

/// Returns (outcome, invariant violations).
fn criterion_2() -> (Outcome, u64) {
    let mut violations = 0;
    let mut details = Vec::new();
    let mut pass = true;
    for a in [0.1, 1.0, 10.0] {
        let spec = ProblemSpec::new(LossKind::Quad, a, 1e-12).unwrap();
        let mut opt = Optimizer::new(OptimizerConfig::vsgd_fd(1), 1).unwrap();
        let mut rng = seeded(202);
        let mut theta = vec![1.0];
        opt.bootstrap(&spec, &theta, &mut rng).unwrap();
        let initial = spec.expected_loss(&theta).unwrap();
        let target = 1.0 / (2.0 * a);
        let mut eta_hit = None;
        let mut loss_hit = None;
        for t in 1..=100 {
            opt.step(&spec, &mut theta, &mut rng).unwrap();
            if !opt.invariants_hold() {
                violations += 1;
            }
            let eta = opt.diagnostics().unwrap().eta[0];
            if eta_hit.is_none() && (eta - target).abs() <= 0.1 * target {
                eta_hit = Some(t);
            }
            if loss_hit.is_none() && spec.expected_loss(&theta).unwrap() < 1e-8 * initial {
                loss_hit = Some(t);
            }
        }
        let ok = eta_hit.is_some_and(|t| t <= 50) && loss_hit.is_some();
        pass &= ok;
        details.push(format!("A={a}: eta at step {eta_hit:?}, loss<1e-8 at step {loss_hit:?}"));
    }
    (outcome(pass, details.join("; ")), violations)
}

fn criterion_3() -> Outcome {
    let mut rng = seeded(303);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let a = rng.random_range(0.1..10.0);
        let spec = ProblemSpec::new(LossKind::Quad, a, rng.random_range(0.1..10.0)).unwrap();
        let theta = rng.random_range(-10.0..10.0);
        let step: f64 = rng.random_range(0.01..10.0);
        let delta = if rng.random::<bool>() { step } else { -step };
        let sample = spec.draw_sample(&mut rng);
        let h = fd_curvature(&spec, &[theta], &FdProbe::with_default_epsilon(vec![delta]), &sample).unwrap();
        worst = worst.max((h[0] - 2.0 * a).abs());
    }
    outcome(worst <= 1e-10, format!("max |h - 2A| = {worst:.2e} over 1000 triples (tol 1e-10)"))
}

fn vsgd_fd_grid(workers: usize) -> ExperimentGrid {
    ExperimentGrid {
        rows: vec![OptimizerConfig::vsgd_fd(1), OptimizerConfig::vsgd_fd(10)],
        workers,
        ..ExperimentGrid::standard(2024)
    }
}

fn criterion_4(res: &GridResult) -> Outcome {
    let mut failures = Vec::new();
    let mut diverged = 0;
    for (c, case) in res.cases.iter().enumerate() {
        for (r, row) in res.grid.rows.iter().enumerate() {
            let initial = res.records_for(c, r)[0].initial_loss();
            let median = res.median_final_loss(c, r);
            diverged += res.records_for(c, r).iter().filter(|t| t.diverged).count();
            if !(median < initial) {
                failures.push(format!("{} n={} median/initial={:.3}", case.id(), row.minibatch_n, median / initial));
            }
        }
    }
    let pass = failures.is_empty() && diverged == 0;
    let detail = if pass {
        "median final < initial on all 36 cases for n=1 and n=10, 0 diverged".to_string()
    } else {
        format!("{} diverged trials; failing: {}", diverged, failures.join(", "))
    };
    outcome(pass, detail)
}

/// Returns (outcome, invariant violations of the vSGD-fd rows).
fn criterion_5() -> (Outcome, u64) {
    let grid = ExperimentGrid {
        functions: vec![LossKind::Abs],
        curvatures: vec![10.0],
        noise_vars: vec![0.1],
        rows: vec![
            OptimizerConfig::vsgd_bbprop(1),
            OptimizerConfig::vsgd_fd(1),
            OptimizerConfig::vsgd_bbprop(10),
            OptimizerConfig::vsgd_fd(10),
        ],
        ..ExperimentGrid::standard(505)
    };
    let res = run_grid(&grid).unwrap();
    let initial = res.records_for(0, 0)[0].initial_loss();
    let mut pass = true;
    let mut details = Vec::new();
    for (bb, fd, n) in [(0, 1, 1), (2, 3, 10)] {
        let bb_med = res.median_final_loss(0, bb) / initial;
        let bb_div = res.diverged_fraction(0, bb);
        let fd_med = res.median_final_loss(0, fd) / initial;
        pass &= (bb_med >= 1.0 || bb_div >= 0.2) && fd_med < 0.5;
        details.push(format!(
            "n={n}: bbprop median/initial={bb_med:.3e} diverged={:.0}%, vSGD-fd median/initial={fd_med:.3}",
            100.0 * bb_div
        ));
    }
    let violations = [1, 3].iter().flat_map(|&r| res.records_for(0, r)).map(|t| t.invariant_violations).sum();
    (outcome(pass, details.join("; ")), violations)
}

fn gain_ratio(sigma: f64, n: usize) -> (f64, f64) {
    let rows = simulate_parallel_gain(&GainConfig {
        sigma,
        p_nz: 1.0,
        minibatch_sizes: vec![1, n],
        modes: vec![GainMode::Instance],
        reps: 10_000,
        seed: 606,
        ..GainConfig::default()
    })
    .unwrap();
    (rows[1].ratio, rows[1].stderr)
}

fn criterion_6() -> Outcome {
    let (low, low_se) = gain_ratio(0.1, 100);
    let (high, high_se) = gain_ratio(3.0, 100);
    let pass = (0.01..=0.04).contains(&low) && (0.1..=0.4).contains(&high);
    outcome(
        pass,
        format!("n=100: low noise ratio {low:.4} ± {low_se:.4} in [0.01,0.04]; high noise ratio {high:.4} ± {high_se:.4} in [0.1,0.4]"),
    )
}

fn criterion_7() -> Outcome {
    let sizes = [64, 100, 128];
    let rows = simulate_parallel_gain(&GainConfig {
        sigma: 0.1,
        p_nz: 0.01,
        minibatch_sizes: sizes.to_vec(),
        modes: vec![GainMode::Instance, GainMode::Global],
        reps: 10_000,
        seed: 707,
        ..GainConfig::default()
    })
    .unwrap();
    let mut pass = true;
    let mut details = Vec::new();
    for n in sizes {
        let get = |m: GainMode| rows.iter().find(|r| r.mode == m && r.n == n).unwrap();
        let (i, g) = (get(GainMode::Instance), get(GainMode::Global));
        let z = (i.ratio - g.ratio) / (i.stderr.powi(2) + g.stderr.powi(2)).sqrt();
        pass &= z > 2.0;
        details.push(format!("n={n}: instance {:.4} vs global {:.4} (z={z:.2})", i.ratio, g.ratio));
    }
    outcome(pass, details.join("; "))
}

fn criterion_8() -> Outcome {
    let n = 9;
    let identical = SampleMatrix::from_rows(vec![vec![0.3, -1.2, 2.0]; n]).unwrap();
    let id_err = orthogonal_weights(&identical)
        .iter()
        .map(|w| (w - 1.0 / n as f64).abs())
        .fold(0.0, f64::max);
    let mut rows = vec![vec![0.0; 5]; 5];
    for (i, r) in rows.iter_mut().enumerate() {
        r[i] = (i as f64 + 1.0) * if i % 2 == 0 { 1.0 } else { -1.0 };
    }
    let ortho = SampleMatrix::from_rows(&rows).unwrap();
    let or_err = orthogonal_weights(&ortho).iter().map(|w| (w - 1.0).abs()).fold(0.0, f64::max);
    let problem = ProblemSpec::two_cluster(ClusterParams::default()).unwrap();
    let wins = (0..100u64)
        .filter(|&seed| {
            let d = demo_reweighting(&problem, 32, &mut seeded(800 + seed)).unwrap();
            cosine(&d.reweighted, &d.oracle) > cosine(&d.average, &d.oracle)
        })
        .count();
    let pass = id_err <= 1e-9 && or_err <= 1e-9 && wins >= 95;
    outcome(
        pass,
        format!("identical max err {id_err:.1e}; orthogonal max err {or_err:.1e}; reweighted closer in {wins}/100 draws"),
    )
}

fn criterion_10(first: &GridResult, workers: usize) -> Outcome {
    let second = run_grid(&vsgd_fd_grid(workers)).unwrap();
    let mut a = Vec::new();
    let mut b = Vec::new();
    first.write_trials_csv(&mut a).unwrap();
    second.write_trials_csv(&mut b).unwrap();
    outcome(
        a == b,
        format!(
            "{} vs {} workers: trials.csv {} bytes, identical={}",
            first.grid.workers,
            workers,
            a.len(),
            a == b
        ),
    )
}

fn criterion_11() -> Outcome {
    let mut rng = seeded(1111);
    let samples = 1_000_000;
    let mut worst_z: f64 = 0.0;
    for kind in LossKind::GRID {
        for _ in 0..20 {
            let a = rng.random_range(0.1..10.0);
            let var = rng.random_range(0.1..10.0);
            let theta = rng.random_range(-3.0..3.0);
            let spec = ProblemSpec::new(kind, a, var).unwrap();
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            let mut s = spec.draw_sample(&mut rng);
            for _ in 0..samples {
                spec.draw_sample_into(&mut rng, &mut s);
                let l = spec.sample_loss(&[theta], &s).unwrap();
                sum += l;
                sum_sq += l * l;
            }
            let mean = sum / samples as f64;
            let se = ((sum_sq / samples as f64 - mean * mean).max(0.0) / samples as f64).sqrt();
            let exact = spec.expected_loss(&[theta]).unwrap();
            worst_z = worst_z.max((mean - exact).abs() / se);
        }
    }
    outcome(worst_z <= 3.0, format!("max |MC - closed form| = {worst_z:.2} SE over 80 points (tol 3 SE)"))
}

fn main() {
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();
    let start = Instant::now();

    results.push((1, "step matches straight-line oracle", criterion_1()));
    let (c2, v2) = criterion_2();
    results.push((2, "noise-free quadratic convergence", c2));
    results.push((3, "finite-difference curvature exact on quadratics", criterion_3()));

    let grid = run_grid(&vsgd_fd_grid(4)).unwrap();
    results.push((4, "grid robustness of vSGD-fd", criterion_4(&grid)));
    let v4: u64 = grid.invariant_violations();
    let (c5, v5) = criterion_5();
    results.push((5, "non-smooth contrast with bbprop vSGD", c5));
    results.push((6, "dense parallelization gain ratios", criterion_6()));
    results.push((7, "sparse instance beats global-average rates", criterion_7()));
    results.push((8, "orthogonal reweighting limits", criterion_8()));
    results.push((
        9,
        "invariants on every step",
        outcome(
            v2 + v4 + v5 == 0,
            format!("violations: criterion 2: {v2}, criterion 4: {v4}, criterion 5: {v5}"),
        ),
    ));
    results.push((10, "grid output independent of worker count", criterion_10(&grid, 1)));
    results.push((11, "closed-form expected losses match Monte-Carlo", criterion_11()));

    let mut failed = 0;
    for (id, name, o) in &results {
        let tag = if o.pass { "PASS" } else { "FAIL" };
        if !o.pass {
            failed += 1;
        }
        println!("[{tag}] criterion {id:>2}: {name}: {}", o.detail);
    }
    println!(
        "acceptance: {} passed, {} failed ({:.1}s)",
        results.len() - failed,
        failed,
        start.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
