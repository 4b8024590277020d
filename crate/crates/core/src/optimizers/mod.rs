//! Optimizers: vSGD-fd, vSGD with bbprop curvature, and the baselines it is
//! compared against.

mod baselines;
mod config;
mod driver;
mod vsgd;

pub use baselines::{sgd_rate, sgd_step, sgd_update, AdaGradState, NaturalGradState};
pub use config::{Algorithm, OptimizerConfig, OutlierTest, ProbeDirection, VsgdOptions};
pub use driver::{run, write_diagnostics_csv, DiagnosticsRecord, Optimizer};
pub use vsgd::{bootstrap, StepDiagnostics, VsgdBbpropState, VsgdFdState};
