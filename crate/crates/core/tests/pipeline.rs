use rand::Rng;
use vsgd::harness::{heatmap_encode, run_grid, ExperimentGrid, DIVERGED_LOSS};
use vsgd::optimizers::{run, Algorithm, Optimizer, OptimizerConfig};
use vsgd::problems::{LossKind, ProblemSpec};
use vsgd::rng::seeded;

fn small_grid(seed: u64) -> ExperimentGrid {
    ExperimentGrid {
        curvatures: vec![1.0],
        noise_vars: vec![1.0],
        rows: vec![
            OptimizerConfig::sgd(0.1, 1.0, 1),
            OptimizerConfig::adagrad(0.1, 1),
            OptimizerConfig::natural_grad(0.1, 1),
            OptimizerConfig::vsgd_bbprop(1),
            OptimizerConfig::vsgd_fd(1),
        ],
        trials: 8,
        updates: 64,
        ..ExperimentGrid::standard(seed)
    }
}

#[test]
fn every_algorithm_runs_on_every_family() {
    let res = run_grid(&small_grid(1)).unwrap();
    assert_eq!(res.cases.len(), 4);
    assert_eq!(res.records.len(), 4 * 5 * 8);
    for r in &res.records {
        assert_eq!(r.checkpoint_losses.len(), res.grid.checkpoints().len());
        if !r.diverged {
            assert!(r.checkpoint_losses.iter().all(|l| l.is_finite() && *l < DIVERGED_LOSS));
        }
    }
}

#[test]
fn grid_seed_changes_results() {
    let mut a = Vec::new();
    let mut b = Vec::new();
    run_grid(&small_grid(1)).unwrap().write_trials_csv(&mut a).unwrap();
    run_grid(&small_grid(2)).unwrap().write_trials_csv(&mut b).unwrap();
    assert_ne!(a, b);
}

#[test]
fn heatmaps_cover_each_function_and_row() {
    let res = run_grid(&small_grid(3)).unwrap();
    let maps = heatmap_encode(&res).unwrap();
    assert_eq!(maps.len(), 4 * 5);
    for m in &maps {
        assert_eq!(m.squares.len(), 1);
        assert!(m.to_svg().contains("<rect"));
    }
}

#[test]
fn vsgd_fd_beats_initial_loss_on_noisy_quadratics() {
    let mut rng = seeded(9);
    for _ in 0..10 {
        let a = rng.random_range(0.1..10.0);
        let spec = ProblemSpec::new(LossKind::Quad, a, rng.random_range(0.1..10.0)).unwrap();
        let theta = run(&OptimizerConfig::vsgd_fd(10), &spec, &[1.0], 200, &mut rng).unwrap();
        assert!(spec.expected_loss(&theta).unwrap() < spec.expected_loss(&[1.0]).unwrap());
    }
}

#[test]
fn optimizer_handles_multidimensional_sparse_problems() {
    let spec = ProblemSpec::sparse_quad(1.0, 0.5, 5, 0.3).unwrap();
    let mut cfg = OptimizerConfig::vsgd_fd(8);
    cfg.vsgd.sparse_aware = true;
    assert_eq!(cfg.algorithm, Algorithm::VsgdFd);
    let mut opt = Optimizer::new(cfg, 5).unwrap();
    let mut rng = seeded(4);
    let mut theta = vec![1.0; 5];
    let initial = spec.expected_loss(&theta).unwrap();
    opt.bootstrap(&spec, &theta, &mut rng).unwrap();
    for _ in 0..300 {
        opt.step(&spec, &mut theta, &mut rng).unwrap();
        assert!(opt.invariants_hold());
    }
    assert!(spec.expected_loss(&theta).unwrap() < initial);
}
