use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use super::manifest::{Command, Format, RunManifest};
use crate::harness::{
    checkpoints, cosine, demo_reweighting, heatmap_encode, rows_for, run_grid, simulate_parallel_gain,
    write_gains_csv, ExperimentGrid, GainConfig,
};
use crate::optimizers::{write_diagnostics_csv, Algorithm, DiagnosticsRecord, Optimizer, OptimizerConfig};
use crate::problems::{ClusterParams, ProblemSpec};
use crate::rng::{derive_seed, seeded};
use crate::{Error, Result};

/// Writes `path` through `path.partial`, renaming only once `body` succeeds.
fn write_atomic(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
    let mut partial = path.as_os_str().to_owned();
    partial.push(".partial");
    let partial = std::path::PathBuf::from(partial);
    let mut w = BufWriter::new(File::create(&partial)?);
    body(&mut w)?;
    w.flush()?;
    drop(w);
    fs::rename(&partial, path)?;
    Ok(())
}

/// Runs the command and writes its outputs plus `manifest.txt` into the
/// output directory.
pub fn execute(m: &RunManifest) -> Result<()> {
    m.validate()?;
    fs::create_dir_all(&m.out)
        .map_err(|e| Error::config("--out", format!("{}: {e}", m.out.display())))?;
    match m.command {
        Command::RunGrid => grid(m)?,
        Command::GainSim => gain(m)?,
        Command::ReweightDemo => reweight(m)?,
        Command::SingleRun => single(m)?,
    }
    write_atomic(&m.out.join("manifest.txt"), |w| Ok(w.write_all(m.render().as_bytes())?))
}

fn grid(m: &RunManifest) -> Result<()> {
    let grid = ExperimentGrid {
        functions: m.functions.clone(),
        curvatures: m.curvatures.clone(),
        noise_vars: m.noise_vars.clone(),
        rows: rows_for(&m.algos, &m.eta0, &m.n),
        trials: m.trials,
        updates: m.updates,
        theta0: m.theta0,
        master_seed: m.seed,
        workers: m.workers,
    };
    eprintln!(
        "run-grid: {} cases x {} rows x {} trials x {} updates",
        grid.cases().len(),
        grid.rows.len(),
        grid.trials,
        grid.updates
    );
    let result = run_grid(&grid)?;
    write_atomic(&m.out.join("trials.csv"), |w| result.write_trials_csv(w))?;
    let dir = m.out.join("heatmaps");
    fs::create_dir_all(&dir)?;
    for h in heatmap_encode(&result)? {
        let stem = h.file_stem();
        write_atomic(&dir.join(format!("{stem}.csv")), |w| h.write_csv(w))?;
        for f in &m.formats {
            match f {
                Format::Csv => {}
                Format::Svg => write_atomic(&dir.join(format!("{stem}.svg")), |w| Ok(w.write_all(h.to_svg().as_bytes())?))?,
                Format::Ppm => write_atomic(&dir.join(format!("{stem}.ppm")), |w| Ok(w.write_all(&h.to_ppm())?))?,
            }
        }
    }
    eprintln!(
        "run-grid: {} trials, {} diverged, wrote {}",
        result.records.len(),
        result.records.iter().filter(|r| r.diverged).count(),
        m.out.display()
    );
    Ok(())
}

fn gain(m: &RunManifest) -> Result<()> {
    let cfg = GainConfig {
        sigma: m.sigma,
        p_nz: m.pnz,
        minibatch_sizes: m.n.clone(),
        modes: m.modes.clone(),
        reps: m.reps,
        horizon: m.horizon,
        theta0: m.theta0,
        seed: m.seed,
        workers: m.workers,
        ..GainConfig::default()
    };
    let rows = simulate_parallel_gain(&cfg)?;
    write_atomic(&m.out.join("gains.csv"), |w| write_gains_csv(&rows, w))?;
    for r in &rows {
        eprintln!("gain-sim: {:<8} n={:<6} ratio={:.4} ± {:.4}", r.mode, r.n, r.ratio, r.stderr);
    }
    Ok(())
}

fn reweight(m: &RunManifest) -> Result<()> {
    let problem = ProblemSpec::two_cluster(ClusterParams::default())?;
    let n = m.n[0];
    for draw in 0..m.trials {
        let mut rng = seeded(derive_seed(m.seed, &[draw as u64]));
        let d = demo_reweighting(&problem, n, &mut rng)?;
        let suffix = if m.trials == 1 { String::new() } else { format!("_{draw}") };
        write_atomic(&m.out.join(format!("reweight{suffix}.csv")), |w| d.write_csv(w))?;
        write_atomic(&m.out.join(format!("samples{suffix}.csv")), |w| d.write_samples_csv(w))?;
        eprintln!(
            "reweight-demo: draw {draw}: cos(average, oracle)={:.4} cos(reweighted, oracle)={:.4}",
            cosine(&d.average, &d.oracle),
            cosine(&d.reweighted, &d.oracle)
        );
    }
    Ok(())
}

fn single(m: &RunManifest) -> Result<()> {
    let problem = ProblemSpec::new(m.functions[0], m.curvatures[0], m.noise_vars[0])?;
    let n = m.n[0];
    let cfg = match m.algos[0] {
        Algorithm::Sgd => OptimizerConfig::sgd(m.eta0[0], m.gamma, n),
        Algorithm::AdaGrad => OptimizerConfig::adagrad(m.eta0[0], n),
        Algorithm::NaturalGrad => OptimizerConfig::natural_grad(m.eta0[0], n),
        Algorithm::VsgdBbprop => OptimizerConfig::vsgd_bbprop(n),
        Algorithm::VsgdFd => OptimizerConfig::vsgd_fd(n),
    };
    let mut rng = seeded(m.seed);
    let mut opt = Optimizer::new(cfg, 1)?;
    let mut theta = vec![m.theta0];
    opt.bootstrap(&problem, &theta, &mut rng)?;
    let cps = checkpoints(m.updates);
    let mut traj = vec![(0u64, theta[0], problem.expected_loss(&theta)?)];
    let mut diags = vec![DiagnosticsRecord::capture(&opt, &theta)];
    for t in 1..=m.updates {
        if let Err(e) = opt.step(&problem, &mut theta, &mut rng) {
            eprintln!("single-run: stopped at step {t}: {e}");
            break;
        }
        traj.push((t, theta[0], problem.expected_loss(&theta)?));
        if cps.contains(&t) {
            diags.push(DiagnosticsRecord::capture(&opt, &theta));
        }
        if !theta[0].is_finite() {
            eprintln!("single-run: diverged at step {t}");
            break;
        }
    }
    write_atomic(&m.out.join("trajectory.csv"), |w| {
        writeln!(w, "iteration,theta,expected_loss")?;
        for (t, th, l) in &traj {
            writeln!(w, "{t},{th},{l}")?;
        }
        Ok(())
    })?;
    write_atomic(&m.out.join("diagnostics.csv"), |w| write_diagnostics_csv(&diags, w))?;
    let (_, th, l) = traj.last().copied().unwrap();
    eprintln!("single-run: {} steps, theta={th}, expected loss={l}", traj.len() - 1);
    Ok(())
}
