use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::harness::{GainMode, DEFAULT_CURVATURES, DEFAULT_ETA0, DEFAULT_NOISE_VARS};
use crate::optimizers::Algorithm;
use crate::problems::{parse_f64, parse_f64_list, parse_kv_lines, LossKind};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    RunGrid,
    GainSim,
    ReweightDemo,
    SingleRun,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::RunGrid => "run-grid",
            Command::GainSim => "gain-sim",
            Command::ReweightDemo => "reweight-demo",
            Command::SingleRun => "single-run",
        }
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "run-grid" => Ok(Command::RunGrid),
            "gain-sim" => Ok(Command::GainSim),
            "reweight-demo" => Ok(Command::ReweightDemo),
            "single-run" => Ok(Command::SingleRun),
            other => Err(Error::config("command", format!("unknown command `{other}`"))),
        }
    }
}

/// Image formats for heatmaps. CSV is always written.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Svg,
    Ppm,
}

impl Format {
    pub fn name(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Svg => "svg",
            Format::Ppm => "ppm",
        }
    }
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "csv" => Ok(Format::Csv),
            "svg" => Ok(Format::Svg),
            "ppm" => Ok(Format::Ppm),
            other => Err(Error::config("--format", format!("unknown format `{other}`"))),
        }
    }
}

/// Everything needed to reproduce a run. Rendered as `key=value` lines next
/// to the outputs; [`RunManifest::parse`] reads the same text back.
#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub command: Command,
    pub seed: u64,
    pub out: PathBuf,
    pub workers: usize,
    pub trials: usize,
    pub updates: u64,
    pub n: Vec<usize>,
    pub functions: Vec<LossKind>,
    pub curvatures: Vec<f64>,
    pub noise_vars: Vec<f64>,
    pub algos: Vec<Algorithm>,
    pub eta0: Vec<f64>,
    pub gamma: f64,
    pub theta0: f64,
    pub pnz: f64,
    pub sigma: f64,
    pub reps: usize,
    pub horizon: usize,
    pub modes: Vec<GainMode>,
    pub formats: Vec<Format>,
}

impl RunManifest {
    pub fn defaults(command: Command) -> Self {
        let mut m = RunManifest {
            command,
            seed: 0,
            out: PathBuf::from("out"),
            workers: 0,
            trials: 100,
            updates: 1024,
            n: vec![1, 10],
            functions: LossKind::GRID.to_vec(),
            curvatures: DEFAULT_CURVATURES.to_vec(),
            noise_vars: DEFAULT_NOISE_VARS.to_vec(),
            algos: Algorithm::ALL.to_vec(),
            eta0: DEFAULT_ETA0.to_vec(),
            gamma: 0.0,
            theta0: 1.0,
            pnz: 1.0,
            sigma: 0.1,
            reps: 10_000,
            horizon: 1,
            modes: GainMode::ALL.to_vec(),
            formats: vec![Format::Svg],
        };
        match command {
            Command::RunGrid => {}
            Command::GainSim => m.n = vec![1, 10, 100],
            Command::ReweightDemo => {
                m.n = vec![32];
                m.trials = 1;
            }
            Command::SingleRun => {
                m.functions = vec![LossKind::Quad];
                m.curvatures = vec![1.0];
                m.noise_vars = vec![1.0];
                m.algos = vec![Algorithm::VsgdFd];
                m.n = vec![1];
                m.eta0 = vec![0.1];
                m.trials = 1;
            }
        }
        m
    }

    pub fn render(&self) -> String {
        fn list<T: fmt::Display>(xs: &[T]) -> String {
            xs.iter().map(T::to_string).collect::<Vec<_>>().join(",")
        }
        let names = |xs: &[&str]| xs.join(",");
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            out.push_str(k);
            out.push('=');
            out.push_str(&v);
            out.push('\n');
        };
        put("command", self.command.name().into());
        put("seed", self.seed.to_string());
        put("out", self.out.to_string_lossy().into_owned());
        put("workers", self.workers.to_string());
        put("trials", self.trials.to_string());
        put("updates", self.updates.to_string());
        put("n", list(&self.n));
        put("functions", list(&self.functions));
        put("curvatures", list(&self.curvatures));
        put("noise-vars", list(&self.noise_vars));
        put("algos", list(&self.algos));
        put("eta0", list(&self.eta0));
        put("gamma", self.gamma.to_string());
        put("theta0", self.theta0.to_string());
        put("pnz", self.pnz.to_string());
        put("sigma", self.sigma.to_string());
        put("reps", self.reps.to_string());
        put("horizon", self.horizon.to_string());
        put("modes", list(&self.modes));
        put("format", names(&self.formats.iter().map(|f| f.name()).collect::<Vec<_>>()));
        out
    }

    /// Parses rendered text. `command` may appear anywhere; missing keys take
    /// that command's defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let pairs = parse_kv_lines(text)?;
        let command = pairs
            .iter()
            .find(|(k, _)| *k == "command")
            .ok_or_else(|| Error::config("command", "missing"))?
            .1
            .parse()?;
        let mut m = RunManifest::defaults(command);
        for (k, v) in pairs {
            if k != "command" {
                m.apply(k, v)?;
            }
        }
        Ok(m)
    }

    /// Applies `key=value` lines (a config file) on top of `self`. A
    /// `command` key, if present, must match.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (k, v) in parse_kv_lines(text)? {
            if k == "command" {
                if v.parse::<Command>()? != self.command {
                    return Err(Error::config("--config", format!("file is for `{v}`, not `{}`", self.command.name())));
                }
                continue;
            }
            self.apply(k, v)?;
        }
        Ok(())
    }

    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        let flag = format!("--{key}");
        let int = |v: &str| -> Result<u64> { v.trim().parse::<u64>().map_err(|e| Error::config(&flag, format!("`{v}`: {e}"))) };
        let list = |v: &str| -> Vec<String> { v.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect() };
        match key {
            "seed" => self.seed = int(value)?,
            "out" => self.out = PathBuf::from(value),
            "workers" => self.workers = int(value)? as usize,
            "trials" => self.trials = int(value)? as usize,
            "updates" => self.updates = int(value)?,
            "n" => self.n = list(value).iter().map(|v| int(v).map(|x| x as usize)).collect::<Result<_>>()?,
            "functions" => {
                self.functions = list(value)
                    .iter()
                    .map(|v| v.parse::<LossKind>().map_err(|e| Error::config(&flag, e.to_string())))
                    .collect::<Result<_>>()?
            }
            "curvatures" => self.curvatures = parse_f64_list(&flag, value)?,
            "noise-vars" => self.noise_vars = parse_f64_list(&flag, value)?,
            "algos" => {
                self.algos = list(value)
                    .iter()
                    .map(|v| v.parse::<Algorithm>().map_err(|e| Error::config(&flag, e.to_string())))
                    .collect::<Result<_>>()?
            }
            "eta0" => self.eta0 = parse_f64_list(&flag, value)?,
            "gamma" => self.gamma = parse_f64(&flag, value)?,
            "theta0" => self.theta0 = parse_f64(&flag, value)?,
            "pnz" => self.pnz = parse_f64(&flag, value)?,
            "sigma" => self.sigma = parse_f64(&flag, value)?,
            "reps" => self.reps = int(value)? as usize,
            "horizon" => self.horizon = int(value)? as usize,
            "modes" => {
                self.modes = list(value)
                    .iter()
                    .map(|v| v.parse::<GainMode>().map_err(|e| Error::config(&flag, e.to_string())))
                    .collect::<Result<_>>()?
            }
            "format" => self.formats = list(value).iter().map(|v| v.parse()).collect::<Result<_>>()?,
            other => return Err(Error::config(format!("--{other}"), "unknown key")),
        }
        Ok(())
    }

    /// Range checks, reported against the flag that carries the value.
    pub fn validate(&self) -> Result<()> {
        let bad = |flag: &str, msg: &str| Err(Error::config(flag, msg));
        if self.n.is_empty() || self.n.contains(&0) {
            return bad("--n", "minibatch sizes must be at least 1");
        }
        match self.command {
            Command::RunGrid | Command::SingleRun => {
                if self.trials == 0 {
                    return bad("--trials", "must be at least 1");
                }
                if self.updates == 0 {
                    return bad("--updates", "must be at least 1");
                }
                if self.functions.is_empty() || self.functions.iter().any(|f| !f.is_grid_member()) {
                    return bad("--functions", "expected a non-empty subset of quad,abs,rectlin,gauss");
                }
                if self.curvatures.is_empty() || self.curvatures.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
                    return bad("--curvatures", "values must be positive");
                }
                if self.noise_vars.is_empty() || self.noise_vars.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                    return bad("--noise-vars", "values must be positive");
                }
                if self.algos.is_empty() {
                    return bad("--algos", "at least one algorithm is required");
                }
                if self.eta0.is_empty() || self.eta0.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
                    return bad("--eta0", "values must be positive");
                }
                if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
                    return bad("--gamma", "must be non-negative");
                }
                if !self.theta0.is_finite() {
                    return bad("--theta0", "must be finite");
                }
            }
            Command::GainSim => {
                if !(self.pnz > 0.0 && self.pnz <= 1.0) {
                    return bad("--pnz", "must lie in (0, 1]");
                }
                if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
                    return bad("--sigma", "must be non-negative");
                }
                if self.reps < 2 {
                    return bad("--reps", "must be at least 2");
                }
                if self.horizon == 0 {
                    return bad("--horizon", "must be at least 1");
                }
                if self.modes.is_empty() {
                    return bad("--modes", "at least one mode is required");
                }
            }
            Command::ReweightDemo => {
                if self.trials == 0 {
                    return bad("--trials", "must be at least 1");
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        for c in [Command::RunGrid, Command::GainSim, Command::ReweightDemo, Command::SingleRun] {
            let m = RunManifest::defaults(c);
            assert_eq!(RunManifest::parse(&m.render()).unwrap(), m);
        }
    }

    #[test]
    fn awkward_floats_round_trip() {
        let mut m = RunManifest::defaults(Command::GainSim);
        m.sigma = 0.1 + 0.2;
        m.curvatures = vec![1e-300, 3.0000000000000004];
        m.out = PathBuf::from("some dir/out");
        assert_eq!(RunManifest::parse(&m.render()).unwrap(), m);
    }

    #[test]
    fn unknown_key_names_flag() {
        let e = RunManifest::parse("command=run-grid\nbogus=1\n").unwrap_err();
        assert!(e.to_string().contains("--bogus"), "{e}");
    }

    #[test]
    fn config_for_other_command_rejected() {
        let mut m = RunManifest::defaults(Command::RunGrid);
        assert!(m.apply_text("command=gain-sim\n").is_err());
        m.apply_text("# comment\ntrials=3\n").unwrap();
        assert_eq!(m.trials, 3);
    }
}
