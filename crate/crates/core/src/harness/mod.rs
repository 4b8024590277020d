//! Experiments: the synthetic test grid and its heatmaps, the
//! parallelization-gain simulation, and the gradient reweighting demo.

mod gain;
mod grid;
mod heatmap;
mod reweight;

pub use gain::{
    expected_active, fixed_rates, gain_for, simulate_parallel_gain, sparse_oracle_rate, write_gains_csv,
    GainConfig, GainEstimate, GainMode, GainRow,
};
pub use grid::{
    checkpoints, rows_for, run_grid, run_trial, ExperimentGrid, GridResult, TestCase, TrialRecord,
    DEFAULT_CURVATURES, DEFAULT_ETA0, DEFAULT_NOISE_VARS, DIVERGED_LOSS,
};
pub use heatmap::{heatmap_encode, ColorScale, HeatmapGrid, HeatmapSquare};
pub use reweight::{cosine, demo_reweighting, ReweightDemo};
