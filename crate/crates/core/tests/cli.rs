use std::fs;
use std::path::Path;

use vsgd::cli::{execute, main_with_args, parse_args, RunManifest};

fn run(args: &[&str]) -> i32 {
    main_with_args(std::iter::once("vsgd").chain(args.iter().copied()))
}

fn read(path: &Path) -> String {
    fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

#[test]
fn run_grid_writes_trials_heatmaps_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("grid");
    let code = run(&[
        "run-grid",
        "--functions",
        "quad,abs",
        "--curvatures",
        "1",
        "--noise-vars",
        "0.1,1",
        "--algos",
        "sgd,vsgd-fd",
        "--eta0",
        "0.1",
        "--trials",
        "3",
        "--updates",
        "20",
        "--format",
        "svg,ppm",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);

    let trials = read(&out.join("trials.csv"));
    let mut lines = trials.lines();
    assert_eq!(lines.next(), Some("case_id,algo_id,trial,checkpoint_iter,loss,diverged"));
    // 4 cases x 6 rows (sgd at γ=0 and γ=1, vsgd-fd; each at n=1,10) x 3 trials x 7 checkpoints
    assert_eq!(lines.count(), 4 * 6 * 3 * 7);

    let heatmaps = out.join("heatmaps");
    let names: Vec<String> = fs::read_dir(&heatmaps)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    for ext in [".csv", ".svg", ".ppm"] {
        assert_eq!(names.iter().filter(|n| n.ends_with(ext)).count(), 12);
    }
    assert!(!names.iter().any(|n| n.ends_with(".partial")));

    let svg = read(&heatmaps.join("quad_vsgd-fd_n1.svg"));
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    let ppm = fs::read(heatmaps.join("abs_sgd_eta0.1_g1_n10.ppm")).unwrap();
    assert!(ppm.starts_with(b"P6\n"));

    let manifest = RunManifest::parse(&read(&out.join("manifest.txt"))).unwrap();
    assert_eq!(manifest.trials, 3);
    assert_eq!(manifest.updates, 20);
}

#[test]
fn manifest_replays_to_identical_output() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    let second = dir.path().join("second");
    let args = ["run-grid", "--functions", "gauss", "--trials", "4", "--updates", "33", "--workers", "3"];
    let mut argv: Vec<&str> = args.to_vec();
    let first_s = first.to_str().unwrap().to_string();
    argv.extend(["--out", &first_s]);
    assert_eq!(run(&argv), 0);

    let cfg = first.join("manifest.txt");
    let cfg_s = cfg.to_str().unwrap().to_string();
    let second_s = second.to_str().unwrap().to_string();
    assert_eq!(run(&["run-grid", "--config", &cfg_s, "--workers", "1", "--out", &second_s]), 0);
    assert_eq!(read(&first.join("trials.csv")), read(&second.join("trials.csv")));
}

#[test]
fn gain_sim_writes_ratios() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("gain");
    let m = parse_args([
        "vsgd",
        "gain-sim",
        "--n",
        "1,10",
        "--reps",
        "200",
        "--modes",
        "instance,global",
        "--out",
        out.to_str().unwrap(),
    ])
    .unwrap();
    execute(&m).unwrap();
    let gains = read(&out.join("gains.csv"));
    let mut lines = gains.lines();
    assert_eq!(lines.next(), Some("mode,n,p_nz,sigma,ratio,stderr"));
    let rows: Vec<Vec<String>> = lines.map(|l| l.split(',').map(str::to_string).collect()).collect();
    assert_eq!(rows.len(), 4);
    for r in rows.iter().filter(|r| r[1] == "1") {
        assert_eq!(r[4].parse::<f64>().unwrap(), 1.0);
    }
}

#[test]
fn reweight_demo_writes_vectors() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("rw");
    assert_eq!(run(&["reweight-demo", "--n", "16", "--out", out.to_str().unwrap()]), 0);
    let csv = read(&out.join("reweight.csv"));
    assert!(csv.starts_with("vector,component,value\n"));
    for v in ["average", "reweighted", "oracle"] {
        assert_eq!(csv.lines().filter(|l| l.starts_with(&format!("{v},"))).count(), 2);
    }
    assert_eq!(read(&out.join("samples.csv")).lines().count(), 1 + 16 * 2);
}

#[test]
fn single_run_writes_trajectory_and_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("single");
    let code = run(&[
        "single-run",
        "--functions",
        "abs",
        "--curvatures",
        "10",
        "--noise-vars",
        "0.1",
        "--algos",
        "vsgd-fd",
        "--n",
        "1",
        "--updates",
        "64",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let traj = read(&out.join("trajectory.csv"));
    assert_eq!(traj.lines().next(), Some("iteration,theta,expected_loss"));
    assert_eq!(traj.lines().count(), 66);
    let last: f64 = traj.lines().last().unwrap().rsplit(',').next().unwrap().parse().unwrap();
    let first: f64 = traj.lines().nth(1).unwrap().rsplit(',').next().unwrap().parse().unwrap();
    assert!(last < first, "{last} vs {first}");
    let diag = read(&out.join("diagnostics.csv"));
    assert_eq!(diag.lines().next(), Some("iteration,dim,theta,eta,tau,outliers"));
}

#[test]
fn invalid_values_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("never");
    assert_eq!(run(&["gain-sim", "--pnz", "0", "--out", out.to_str().unwrap()]), 2);
    assert_eq!(run(&["run-grid", "--noise-vars", "-0.5", "--out", out.to_str().unwrap()]), 2);
    assert!(!out.exists());
}

#[test]
fn malformed_config_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "updates=lots\n").unwrap();
    let e = parse_args(["vsgd", "run-grid", "--config", cfg.to_str().unwrap()]).unwrap_err();
    assert!(e.to_string().contains("updates"), "{e}");
}
