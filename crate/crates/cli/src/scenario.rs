//! Scenario files: a TOML description of the network, the content library,
//! the traffic model, an optional one-dimensional sweep and the tasks to run.

use std::path::{Path, PathBuf};

use clusterd2d::model::{db_to_linear, dbm_to_watts, ContentLibrary, NetworkConfig};
use clusterd2d::stochgeo::access_probability_threshold;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Slack above the smallest access probability meeting the rate threshold.
const ACCESS_MARGIN: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub tasks: Vec<Task>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_mc_trials")]
    pub mc_trials: usize,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    pub network: NetworkSection,
    pub library: LibrarySection,
    pub traffic: TrafficSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Sweep>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Offload,
    Energy,
    Delay,
    Validate,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Offload => "offload",
            Task::Energy => "energy",
            Task::Delay => "delay",
            Task::Validate => "validate",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSection {
    pub lambda_p_per_km2: f64,
    pub n_bar: f64,
    pub sigma_m: f64,
    pub alpha: f64,
    pub theta_db: f64,
    pub p_d_dbm: f64,
    pub p_b_dbm: f64,
    pub w_total_hz: f64,
    /// D2D rate threshold `R_0/W_1` in bits/s/Hz.
    pub r0_over_w1: f64,
    /// Fixed channel access probability; when absent the smallest feasible
    /// one for `r0_over_w1` is used at every sweep point.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub access_p: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LibrarySection {
    pub n_files: usize,
    pub beta: f64,
    pub cache_size: usize,
    pub mean_size_mbit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrafficSection {
    /// Requests per second per cluster.
    pub zeta_tot: f64,
    /// Devices in the representative cluster for the energy task.
    pub k_energy: usize,
    /// Devices in the representative cluster for the delay task.
    pub k_delay: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default = "default_restarts")]
    pub bcd_restarts: usize,
    #[serde(default = "default_tol")]
    pub bcd_tol: f64,
    #[serde(default = "default_max_iters")]
    pub bcd_max_iters: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            bcd_restarts: default_restarts(),
            bcd_tol: default_tol(),
            bcd_max_iters: default_max_iters(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
}

/// Swept quantity. `sigma` is in metres, `lambda_p` in clusters/km², `theta`
/// is linear and `p` is the access probability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    Beta,
    Sigma,
    LambdaP,
    NBar,
    P,
    Theta,
}

impl SweepVariable {
    pub fn name(self) -> &'static str {
        match self {
            SweepVariable::Beta => "beta",
            SweepVariable::Sigma => "sigma",
            SweepVariable::LambdaP => "lambda_p",
            SweepVariable::NBar => "n_bar",
            SweepVariable::P => "p",
            SweepVariable::Theta => "theta",
        }
    }
}

fn default_seed() -> u64 {
    1
}

fn default_mc_trials() -> usize {
    100_000
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_restarts() -> usize {
    16
}

fn default_tol() -> f64 {
    1e-8
}

fn default_max_iters() -> usize {
    200
}

/// One fully resolved evaluation point.
#[derive(Debug, Clone)]
pub struct Point {
    /// Value of the swept variable, or `None` without a sweep.
    pub value: Option<f64>,
    pub cfg: NetworkConfig,
    pub lib: ContentLibrary,
    pub r0_over_w1: f64,
}

impl Scenario {
    /// Reference parameters with the offload, energy and delay tasks.
    pub fn reference() -> Self {
        Self {
            name: "reference".into(),
            tasks: vec![Task::Offload, Task::Energy, Task::Delay],
            seed: default_seed(),
            mc_trials: default_mc_trials(),
            output_dir: default_output_dir(),
            network: NetworkSection {
                lambda_p_per_km2: 20.0,
                n_bar: 5.0,
                sigma_m: 10.0,
                alpha: 4.0,
                theta_db: 0.0,
                p_d_dbm: 23.0,
                p_b_dbm: 43.0,
                w_total_hz: 20e6,
                r0_over_w1: 0.1,
                access_p: None,
            },
            library: LibrarySection {
                n_files: 500,
                beta: 1.0,
                cache_size: 10,
                mean_size_mbit: 5.0,
            },
            traffic: TrafficSection {
                zeta_tot: 2.0,
                k_energy: 5,
                k_delay: 8,
            },
            solver: SolverSection::default(),
            sweep: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let scenario: Scenario = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("scenario serialises to TOML")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let fail = |path: &str, msg: &str| Err(CliError::Config(format!("{path}: {msg}")));
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return fail("name", "must be a non-empty file-name-safe string");
        }
        if self.tasks.is_empty() {
            return fail("tasks", "must list at least one task");
        }
        if self.mc_trials == 0 && self.tasks.contains(&Task::Validate) {
            return fail("mc_trials", "must be >= 1 for the validate task");
        }
        let n = &self.network;
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if !(n.lambda_p_per_km2.is_finite() && n.lambda_p_per_km2 >= 0.0) {
            return fail("network.lambda_p_per_km2", "must be >= 0");
        }
        if !(n.n_bar.is_finite() && n.n_bar >= 0.0) {
            return fail("network.n_bar", "must be >= 0");
        }
        if !positive(n.sigma_m) {
            return fail("network.sigma_m", "must be > 0");
        }
        if !(n.alpha.is_finite() && n.alpha > 2.0) {
            return fail("network.alpha", "must be > 2");
        }
        for (path, v) in [
            ("network.theta_db", n.theta_db),
            ("network.p_d_dbm", n.p_d_dbm),
            ("network.p_b_dbm", n.p_b_dbm),
        ] {
            if !v.is_finite() {
                return fail(path, "must be finite");
            }
        }
        if !positive(n.w_total_hz) {
            return fail("network.w_total_hz", "must be > 0");
        }
        if !positive(n.r0_over_w1) {
            return fail("network.r0_over_w1", "must be > 0");
        }
        if let Some(p) = n.access_p {
            if !(p > 0.0 && p <= 1.0) {
                return fail("network.access_p", "must lie in (0, 1]");
            }
        }
        let l = &self.library;
        if l.n_files == 0 {
            return fail("library.n_files", "must be >= 1");
        }
        if l.cache_size == 0 || l.cache_size > l.n_files {
            return fail("library.cache_size", "must lie in [1, n_files]");
        }
        if !(l.beta.is_finite() && l.beta >= 0.0) {
            return fail("library.beta", "must be >= 0");
        }
        if !positive(l.mean_size_mbit) {
            return fail("library.mean_size_mbit", "must be > 0");
        }
        let t = &self.traffic;
        if !positive(t.zeta_tot) {
            return fail("traffic.zeta_tot", "must be > 0");
        }
        if t.k_energy == 0 {
            return fail("traffic.k_energy", "must be >= 1");
        }
        if t.k_delay == 0 {
            return fail("traffic.k_delay", "must be >= 1");
        }
        let s = &self.solver;
        if s.bcd_restarts == 0 {
            return fail("solver.bcd_restarts", "must be >= 1");
        }
        if !(s.bcd_tol.is_finite() && s.bcd_tol >= 0.0) {
            return fail("solver.bcd_tol", "must be >= 0");
        }
        if s.bcd_max_iters == 0 {
            return fail("solver.bcd_max_iters", "must be >= 1");
        }
        if let Some(sweep) = &self.sweep {
            if sweep.values.is_empty() {
                return fail("sweep.values", "grid must be non-empty");
            }
            if sweep.values.iter().any(|v| !v.is_finite()) {
                return fail("sweep.values", "grid values must be finite");
            }
            if sweep.values.windows(2).any(|w| w[1] <= w[0]) {
                return fail("sweep.values", "grid must be sorted strictly increasing");
            }
            let bad = |v: &f64| match sweep.variable {
                SweepVariable::Beta | SweepVariable::LambdaP | SweepVariable::NBar => *v < 0.0,
                SweepVariable::Sigma | SweepVariable::Theta => *v <= 0.0,
                SweepVariable::P => *v <= 0.0 || *v > 1.0,
            };
            if sweep.values.iter().any(bad) {
                return fail("sweep.values", &format!("out of range for {}", sweep.variable.name()));
            }
        }
        Ok(())
    }

    /// Evaluation points in grid order. Errors raised while resolving a
    /// point (e.g. an unreachable rate threshold) are returned per point.
    pub fn points(&self) -> Vec<(Option<f64>, clusterd2d::Result<Point>)> {
        match &self.sweep {
            None => vec![(None, self.resolve(None))],
            Some(sweep) => sweep.values.iter().map(|&v| (Some(v), self.resolve(Some(v)))).collect(),
        }
    }

    fn resolve(&self, value: Option<f64>) -> clusterd2d::Result<Point> {
        let n = &self.network;
        let l = &self.library;
        let mut cfg = NetworkConfig {
            lambda_p: n.lambda_p_per_km2 * 1e-6,
            n_bar: n.n_bar,
            sigma: n.sigma_m,
            alpha: n.alpha,
            theta: db_to_linear(n.theta_db),
            p_d: dbm_to_watts(n.p_d_dbm),
            p_b: dbm_to_watts(n.p_b_dbm),
            w_total: n.w_total_hz,
            access_p: 1.0,
        };
        let mut beta = l.beta;
        let mut access = n.access_p;
        if let (Some(sweep), Some(v)) = (&self.sweep, value) {
            match sweep.variable {
                SweepVariable::Beta => beta = v,
                SweepVariable::Sigma => cfg.sigma = v,
                SweepVariable::LambdaP => cfg.lambda_p = v * 1e-6,
                SweepVariable::NBar => cfg.n_bar = v,
                SweepVariable::P => access = Some(v),
                SweepVariable::Theta => cfg.theta = v,
            }
        }
        cfg.access_p = match access {
            Some(p) => p,
            None => access_probability_threshold(n.r0_over_w1, cfg.theta, ACCESS_MARGIN)?,
        };
        cfg.validate()?;
        let lib = ContentLibrary::zipf(l.n_files, beta, l.cache_size, l.mean_size_mbit)?;
        Ok(Point {
            value,
            cfg,
            lib,
            r0_over_w1: n.r0_over_w1,
        })
    }
}
