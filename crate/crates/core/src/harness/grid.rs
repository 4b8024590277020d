use std::io::Write;

use crate::optimizers::{Algorithm, Optimizer, OptimizerConfig};
use crate::problems::{LossKind, ProblemSpec};
use crate::rng::{derive_seed, seeded};
use crate::{Error, Result};

/// Loss recorded for every checkpoint after a trial diverges.
pub const DIVERGED_LOSS: f64 = f64::MAX;

/// One `(function, A, σ²)` setting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestCase {
    pub kind: LossKind,
    pub curvature: f64,
    pub noise_var: f64,
}

impl TestCase {
    pub fn id(&self) -> String {
        format!("{}_a{}_v{}", self.kind, self.curvature, self.noise_var)
    }

    pub fn problem(&self) -> Result<ProblemSpec> {
        ProblemSpec::new(self.kind, self.curvature, self.noise_var)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentGrid {
    pub functions: Vec<LossKind>,
    pub curvatures: Vec<f64>,
    pub noise_vars: Vec<f64>,
    pub rows: Vec<OptimizerConfig>,
    pub trials: usize,
    pub updates: u64,
    pub theta0: f64,
    pub master_seed: u64,
    /// Worker threads; 0 lets the pool choose.
    pub workers: usize,
}

pub const DEFAULT_CURVATURES: [f64; 3] = [0.1, 1.0, 10.0];
pub const DEFAULT_NOISE_VARS: [f64; 3] = [0.1, 1.0, 10.0];
pub const DEFAULT_ETA0: [f64; 4] = [0.01, 0.1, 1.0, 10.0];

impl ExperimentGrid {
    /// Four functions, three curvatures, three noise levels, every algorithm
    /// row for `n ∈ {1, 10}`, 100 trials of 1024 updates from `θ₀ = 1`.
    pub fn standard(master_seed: u64) -> Self {
        ExperimentGrid {
            functions: LossKind::GRID.to_vec(),
            curvatures: DEFAULT_CURVATURES.to_vec(),
            noise_vars: DEFAULT_NOISE_VARS.to_vec(),
            rows: rows_for(&Algorithm::ALL, &DEFAULT_ETA0, &[1, 10]),
            trials: 100,
            updates: 1024,
            theta0: 1.0,
            master_seed,
            workers: 0,
        }
    }

    pub fn cases(&self) -> Vec<TestCase> {
        let mut out = Vec::new();
        for &kind in &self.functions {
            for &curvature in &self.curvatures {
                for &noise_var in &self.noise_vars {
                    out.push(TestCase {
                        kind,
                        curvature,
                        noise_var,
                    });
                }
            }
        }
        out
    }

    /// Iterations at which the expected loss is recorded: 0, then powers of
    /// two, then `updates` itself if it is not one.
    pub fn checkpoints(&self) -> Vec<u64> {
        checkpoints(self.updates)
    }

    pub fn validate(&self) -> Result<()> {
        if self.functions.is_empty() {
            return Err(Error::config("functions", "at least one function is required"));
        }
        if self.curvatures.is_empty() || self.curvatures.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
            return Err(Error::config("curvatures", "values must be positive"));
        }
        if self.noise_vars.is_empty() || self.noise_vars.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::config("noise-vars", "values must be positive"));
        }
        if self.rows.is_empty() {
            return Err(Error::config("algos", "at least one algorithm row is required"));
        }
        if self.trials == 0 {
            return Err(Error::config("trials", "must be at least 1"));
        }
        if self.updates == 0 {
            return Err(Error::config("updates", "must be at least 1"));
        }
        if !self.theta0.is_finite() {
            return Err(Error::config("theta0", "must be finite"));
        }
        for f in &self.functions {
            if !f.is_grid_member() {
                return Err(Error::config("functions", format!("`{f}` is not a grid function")));
            }
        }
        for r in &self.rows {
            r.validate()?;
        }
        Ok(())
    }
}

pub fn checkpoints(updates: u64) -> Vec<u64> {
    let mut out = vec![0];
    let mut t = 1;
    while t <= updates {
        out.push(t);
        t *= 2;
    }
    if *out.last().unwrap() != updates {
        out.push(updates);
    }
    out
}

/// Expands algorithms into rows: baselines × `eta0s` (SGD also × γ ∈ {0,1}),
/// every row × `ns`.
pub fn rows_for(algorithms: &[Algorithm], eta0s: &[f64], ns: &[usize]) -> Vec<OptimizerConfig> {
    let mut rows = Vec::new();
    for &alg in algorithms {
        for &n in ns {
            match alg {
                Algorithm::Sgd => {
                    for &eta in eta0s {
                        for gamma in [0.0, 1.0] {
                            rows.push(OptimizerConfig::sgd(eta, gamma, n));
                        }
                    }
                }
                Algorithm::AdaGrad => rows.extend(eta0s.iter().map(|&e| OptimizerConfig::adagrad(e, n))),
                Algorithm::NaturalGrad => {
                    rows.extend(eta0s.iter().map(|&e| OptimizerConfig::natural_grad(e, n)))
                }
                Algorithm::VsgdBbprop => rows.push(OptimizerConfig::vsgd_bbprop(n)),
                Algorithm::VsgdFd => rows.push(OptimizerConfig::vsgd_fd(n)),
            }
        }
    }
    rows
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub case: usize,
    pub row: usize,
    pub trial: usize,
    pub seed: u64,
    pub checkpoint_losses: Vec<f64>,
    pub diverged: bool,
    pub steps: u64,
    /// Steps after which the optimizer state or diagnostics broke an
    /// invariant.
    pub invariant_violations: u64,
}

impl TrialRecord {
    pub fn initial_loss(&self) -> f64 {
        self.checkpoint_losses[0]
    }

    pub fn final_loss(&self) -> f64 {
        *self.checkpoint_losses.last().unwrap()
    }
}

/// Runs one trial: bootstrap at `θ₀`, then `updates` steps.
pub fn run_trial(
    problem: &ProblemSpec,
    config: &OptimizerConfig,
    theta0: f64,
    updates: u64,
    seed: u64,
) -> Result<(Vec<f64>, bool, u64, u64)> {
    let cps = checkpoints(updates);
    let mut rng = seeded(seed);
    let mut opt = Optimizer::new(config.clone(), problem.dim)?;
    let mut theta = vec![theta0; problem.dim];
    opt.bootstrap(problem, &theta, &mut rng)?;
    let mut losses = Vec::with_capacity(cps.len());
    losses.push(problem.expected_loss(&theta)?);
    let mut violations = 0;
    let mut diverged = false;
    let mut steps = 0;
    let mut next = 1;
    for t in 1..=updates {
        match opt.step(problem, &mut theta, &mut rng) {
            Ok(()) => {}
            Err(Error::NonFiniteGradient { .. } | Error::NonFiniteCurvature { .. }) => {
                diverged = true;
                break;
            }
            Err(e) => return Err(e),
        }
        steps = t;
        if !opt.invariants_hold() {
            violations += 1;
        }
        if theta.iter().any(|x| !x.is_finite()) {
            diverged = true;
            break;
        }
        if cps[next] == t {
            let l = problem.expected_loss(&theta)?;
            if !l.is_finite() {
                diverged = true;
                break;
            }
            losses.push(l);
            next += 1;
        }
    }
    losses.resize(cps.len(), DIVERGED_LOSS);
    Ok((losses, diverged, steps, violations))
}

#[derive(Debug, Clone)]
pub struct GridResult {
    pub grid: ExperimentGrid,
    pub cases: Vec<TestCase>,
    /// Ordered by `(case, row, trial)`.
    pub records: Vec<TrialRecord>,
}

impl GridResult {
    pub fn records_for(&self, case: usize, row: usize) -> &[TrialRecord] {
        let per_row = self.grid.trials;
        let per_case = per_row * self.grid.rows.len();
        let start = case * per_case + row * per_row;
        &self.records[start..start + per_row]
    }

    pub fn median_final_loss(&self, case: usize, row: usize) -> f64 {
        let mut v: Vec<f64> = self.records_for(case, row).iter().map(|r| r.final_loss()).collect();
        median(&mut v)
    }

    pub fn diverged_fraction(&self, case: usize, row: usize) -> f64 {
        let recs = self.records_for(case, row);
        recs.iter().filter(|r| r.diverged).count() as f64 / recs.len() as f64
    }

    pub fn total_steps(&self) -> u64 {
        self.records.iter().map(|r| r.steps).sum()
    }

    pub fn invariant_violations(&self) -> u64 {
        self.records.iter().map(|r| r.invariant_violations).sum()
    }

    /// `case_id,algo_id,trial,checkpoint_iter,loss,diverged`, one row per
    /// checkpoint.
    pub fn write_trials_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "case_id,algo_id,trial,checkpoint_iter,loss,diverged")?;
        let cps = self.grid.checkpoints();
        let labels: Vec<String> = self.grid.rows.iter().map(OptimizerConfig::label).collect();
        let ids: Vec<String> = self.cases.iter().map(TestCase::id).collect();
        for r in &self.records {
            for (it, loss) in cps.iter().zip(&r.checkpoint_losses) {
                writeln!(
                    w,
                    "{},{},{},{},{:e},{}",
                    ids[r.case], labels[r.row], r.trial, it, loss, r.diverged as u8
                )?;
            }
        }
        Ok(())
    }
}

pub(crate) fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Runs every `(case, row, trial)` of the grid. Output order and contents
/// do not depend on the worker count.
pub fn run_grid(grid: &ExperimentGrid) -> Result<GridResult> {
    grid.validate()?;
    let cases = grid.cases();
    let problems = cases.iter().map(TestCase::problem).collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, usize, usize)> = (0..cases.len())
        .flat_map(|c| (0..grid.rows.len()).flat_map(move |r| (0..grid.trials).map(move |t| (c, r, t))))
        .collect();
    let job = |&(case, row, trial): &(usize, usize, usize)| -> Result<TrialRecord> {
        let seed = derive_seed(grid.master_seed, &[case as u64, row as u64, trial as u64]);
        let (checkpoint_losses, diverged, steps, invariant_violations) =
            run_trial(&problems[case], &grid.rows[row], grid.theta0, grid.updates, seed)?;
        Ok(TrialRecord {
            case,
            row,
            trial,
            seed,
            checkpoint_losses,
            diverged,
            steps,
            invariant_violations,
        })
    };
    let records = parallel_map(grid.workers, &jobs, job)?;
    Ok(GridResult {
        grid: grid.clone(),
        cases,
        records,
    })
}

#[cfg(feature = "parallel")]
pub(crate) fn parallel_map<T, U, F>(workers: usize, items: &[T], f: F) -> Result<Vec<U>>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> Result<U> + Sync,
{
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::config("workers", e.to_string()))?;
    pool.install(|| items.par_iter().map(&f).collect())
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn parallel_map<T, U, F>(_workers: usize, items: &[T], f: F) -> Result<Vec<U>>
where
    F: Fn(&T) -> Result<U>,
{
    items.iter().map(f).collect()
}
