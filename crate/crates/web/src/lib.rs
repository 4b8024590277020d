//! Browser bindings for the vsgd demo page.
//!
//! Each export takes plain numbers and strings and returns plain data so the
//! page needs no glue beyond the generated module. Errors come back as
//! strings.

use vsgd::harness::{cosine, demo_reweighting, heatmap_encode, run_grid, ExperimentGrid};
use vsgd::optimizers::{Algorithm, Optimizer, OptimizerConfig};
use vsgd::problems::{ClusterParams, LossKind, ProblemSpec};
use vsgd::rng::seeded;
use wasm_bindgen::prelude::*;

const MAX_STEPS: u32 = 100_000;
const MAX_TRIALS: u32 = 200;

fn config_for(algo: &str, n: usize, eta0: f64) -> Result<OptimizerConfig, String> {
    let alg: Algorithm = algo.parse().map_err(|e: vsgd::Error| e.to_string())?;
    Ok(match alg {
        Algorithm::Sgd => OptimizerConfig::sgd(eta0, 1.0, n),
        Algorithm::AdaGrad => OptimizerConfig::adagrad(eta0, n),
        Algorithm::NaturalGrad => OptimizerConfig::natural_grad(eta0, n),
        Algorithm::VsgdBbprop => OptimizerConfig::vsgd_bbprop(n),
        Algorithm::VsgdFd => OptimizerConfig::vsgd_fd(n),
    })
}

fn function(name: &str) -> Result<LossKind, String> {
    name.parse().map_err(|e: vsgd::Error| e.to_string())
}

/// Expected loss after each of `steps` updates from θ₀ = 1, starting with the
/// initial loss. Stops early if the run diverges.
#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn loss_curve(
    func: &str,
    curvature: f64,
    noise_var: f64,
    algo: &str,
    n: u32,
    eta0: f64,
    steps: u32,
    seed: u32,
) -> Result<Vec<f64>, String> {
    if steps > MAX_STEPS {
        return Err(format!("steps must be at most {MAX_STEPS}"));
    }
    let problem = ProblemSpec::new(function(func)?, curvature, noise_var).map_err(|e| e.to_string())?;
    let cfg = config_for(algo, n as usize, eta0)?;
    let mut opt = Optimizer::new(cfg, 1).map_err(|e| e.to_string())?;
    let mut rng = seeded(seed as u64);
    let mut theta = vec![1.0];
    opt.bootstrap(&problem, &theta, &mut rng).map_err(|e| e.to_string())?;
    let mut out = Vec::with_capacity(steps as usize + 1);
    out.push(problem.expected_loss(&theta).map_err(|e| e.to_string())?);
    for _ in 0..steps {
        if opt.step(&problem, &mut theta, &mut rng).is_err() {
            break;
        }
        match problem.expected_loss(&theta) {
            Ok(l) if l.is_finite() => out.push(l),
            _ => break,
        }
    }
    Ok(out)
}

/// SVG heatmap of one optimizer on one function family over the default
/// curvature and noise settings.
#[wasm_bindgen]
pub fn heatmap_svg(func: &str, algo: &str, n: u32, eta0: f64, trials: u32, updates: u32, seed: u32) -> Result<String, String> {
    if trials == 0 || trials > MAX_TRIALS {
        return Err(format!("trials must be in 1..={MAX_TRIALS}"));
    }
    if updates > MAX_STEPS {
        return Err(format!("updates must be at most {MAX_STEPS}"));
    }
    let grid = ExperimentGrid {
        functions: vec![function(func)?],
        rows: vec![config_for(algo, n as usize, eta0)?],
        trials: trials as usize,
        updates: updates as u64,
        workers: 1,
        ..ExperimentGrid::standard(seed as u64)
    };
    let res = run_grid(&grid).map_err(|e| e.to_string())?;
    let maps = heatmap_encode(&res).map_err(|e| e.to_string())?;
    Ok(maps.into_iter().next().map(|m| m.to_svg()).unwrap_or_default())
}

/// One two-cluster minibatch aggregated three ways.
///
/// Layout: average (x, y), reweighted (x, y), oracle (x, y),
/// cos(average, oracle), cos(reweighted, oracle), then the `n` samples as
/// (x, y) pairs.
#[wasm_bindgen]
pub fn reweight_demo(n: u32, seed: u32) -> Result<Vec<f64>, String> {
    if n == 0 || n > 1000 {
        return Err("n must be in 1..=1000".into());
    }
    let problem = ProblemSpec::two_cluster(ClusterParams::default()).map_err(|e| e.to_string())?;
    let d = demo_reweighting(&problem, n as usize, &mut seeded(seed as u64)).map_err(|e| e.to_string())?;
    let mut out = Vec::with_capacity(8 + 2 * n as usize);
    out.extend_from_slice(&d.average);
    out.extend_from_slice(&d.reweighted);
    out.extend_from_slice(&d.oracle);
    out.push(cosine(&d.average, &d.oracle));
    out.push(cosine(&d.reweighted, &d.oracle));
    for row in d.samples.rows() {
        out.extend_from_slice(row);
    }
    Ok(out)
}
