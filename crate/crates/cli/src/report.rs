//! The machine-readable run report and the files written next to it.

use std::path::Path;

use serde::Serialize;

use nodal_core::eigensolver::EigenpairSummary;
use nodal_core::model::HypothesisReport;
use nodal_core::variational::{Level, SolveReport};
use nodal_core::verification::{DecayFit, NodalityReport};
use nodal_core::Grid;

use crate::config::{Command, RunConfig};
use crate::{CliError, EXIT_HYPOTHESIS, EXIT_OK, EXIT_SOLVER};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Success,
    HypothesisViolation,
    NotConverged,
    ConfigError,
    SolverError,
    OutputError,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Status {
    pub exit_code: i32,
    pub outcome: Outcome,
    pub message: Option<String>,
}

impl Status {
    pub fn success() -> Self {
        Status {
            exit_code: EXIT_OK,
            outcome: Outcome::Success,
            message: None,
        }
    }

    pub fn from_error(err: &CliError) -> Self {
        let exit_code = err.exit_code();
        let outcome = match exit_code {
            crate::EXIT_CONFIG => Outcome::ConfigError,
            EXIT_HYPOTHESIS => Outcome::HypothesisViolation,
            EXIT_SOLVER => Outcome::SolverError,
            _ => Outcome::OutputError,
        };
        Status {
            exit_code,
            outcome,
            message: Some(err.to_string()),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GridSummary {
    pub mode: String,
    #[serde(rename = "R")]
    pub half_width: f64,
    pub h: f64,
    pub nodes: usize,
}

impl GridSummary {
    pub fn of(grid: &Grid) -> Self {
        GridSummary {
            mode: grid.mode().name(),
            half_width: grid.half_width(),
            h: grid.spacing(),
            nodes: grid.len(),
        }
    }
}

/// A computed level with the evidence that goes with it.
#[derive(Debug, Clone, Serialize)]
pub struct LevelEntry {
    pub level: Level,
    pub value: f64,
    pub residual: f64,
    pub converged: bool,
    pub iterations: usize,
    pub h_value: Option<f64>,
    pub nodal: bool,
    pub restarts: usize,
    pub diagnosis: Option<String>,
}

impl LevelEntry {
    pub fn of(rep: &SolveReport) -> Self {
        LevelEntry {
            level: rep.level,
            value: rep.lambda,
            residual: rep.residual,
            converged: rep.flags.converged,
            iterations: rep.iterations,
            h_value: rep.h_value,
            nodal: rep.flags.nodal,
            restarts: rep.restarts,
            diagnosis: rep.diagnosis.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Sandwich {
    pub lambda1: f64,
    pub lambda1_inf: f64,
    pub lower: f64,
    pub upper: f64,
    /// `lower < λ2 < upper` for the computed `λ2`, when there is one.
    pub contains_lambda2: Option<bool>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EigenEntry {
    pub mu: f64,
    pub residual: f64,
    pub k_norm: f64,
    pub converged: bool,
}

impl From<EigenpairSummary> for EigenEntry {
    fn from(s: EigenpairSummary) -> Self {
        EigenEntry {
            mu: s.mu,
            residual: s.residual,
            k_norm: s.k_norm,
            converged: true,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Linearized {
    pub mass: f64,
    pub mu1: EigenEntry,
    pub mu2: EigenEntry,
    pub h_value: f64,
    pub loop_upper_bound: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Verification {
    pub energy: f64,
    pub mass: f64,
    /// `J / I`, the multiplier of the Euler–Lagrange equation.
    pub lambda: f64,
    pub residual: f64,
    pub h_value: f64,
    pub v1_positive: bool,
    pub nodality: NodalityReport,
    pub mu1: EigenEntry,
    pub mu2: EigenEntry,
    pub loop_upper_bound: f64,
    pub loop_theta_max: f64,
    /// Decay fit of `|u|`; absent when `u` changes sign or vanishes on the fit annulus.
    pub decay_fit: Option<DecayFit>,
    pub radial_deviation: Option<f64>,
    /// `|h| <= 1e-8` together with `v1 > 0` at every node.
    pub orthogonality: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RadialComparison {
    pub lambda2: f64,
    pub lambda2_radial: f64,
    pub margin: f64,
    pub radial_deviation_u2: f64,
    pub radial_deviation_w1: f64,
    /// Hypotheses of the nonradiality statement hold; the deviation is an
    /// observation either way.
    pub hypotheses_hold: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub c0: f64,
    pub a: f64,
    pub lambda1: f64,
    pub lambda1_residual: f64,
    pub lambda2: f64,
    pub lambda2_residual: f64,
    pub lower: f64,
    pub upper: f64,
    pub inside: bool,
    pub converged: bool,
    pub nodal: bool,
    pub h_value: Option<f64>,
    pub hypotheses_hold: bool,
    pub diagnosis: Option<String>,
}

impl SweepRow {
    pub const HEADER: &'static str = "c0,a,lambda1,lambda1_residual,lambda2,lambda2_residual,lower,upper,inside,converged,nodal,h,hypotheses_hold";

    pub fn csv_line(&self) -> String {
        let h = self.h_value.map(num).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            num(self.c0),
            num(self.a),
            num(self.lambda1),
            num(self.lambda1_residual),
            num(self.lambda2),
            num(self.lambda2_residual),
            num(self.lower),
            num(self.upper),
            self.inside,
            self.converged,
            self.nodal,
            h,
            self.hypotheses_hold
        )
    }
}

/// Shortest round-trip text, in exponent form for small magnitudes.
fn num(x: f64) -> String {
    if x != 0.0 && x.abs() < 1e-3 {
        format!("{x:e}")
    } else {
        x.to_string()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepSummary {
    pub lambda1_inf: LevelEntry,
    pub rows: Vec<SweepRow>,
    /// Monotonicity along the sweep axes. Recorded as observations only.
    pub observations: Vec<String>,
}

/// A file written under the output directory.
#[derive(Debug, Clone)]
pub struct Artifact {
    pub path: String,
    pub contents: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub command: Command,
    pub status: Status,
    pub config: RunConfig,
    pub grid: Option<GridSummary>,
    /// Seed of every pseudo-random start vector used in the run.
    pub rng_seed: u64,
    pub levels: Vec<LevelEntry>,
    pub sandwich: Option<Sandwich>,
    pub hypotheses: Option<HypothesisReport>,
    pub ground_decay: Option<DecayFit>,
    pub linearized: Option<Linearized>,
    pub verification: Option<Verification>,
    pub radial_comparison: Option<RadialComparison>,
    pub sweep: Option<SweepSummary>,
    #[serde(skip)]
    pub timings: Vec<(String, f64)>,
    #[serde(skip)]
    pub artifacts: Vec<Artifact>,
}

impl RunReport {
    pub fn new(config: &RunConfig) -> Self {
        RunReport {
            command: config.command,
            status: Status::success(),
            config: config.echo(),
            grid: None,
            rng_seed: config.solver.rng_seed,
            levels: Vec::new(),
            sandwich: None,
            hypotheses: None,
            ground_decay: None,
            linearized: None,
            verification: None,
            radial_comparison: None,
            sweep: None,
            timings: Vec::new(),
            artifacts: Vec::new(),
        }
    }

    pub fn level(&self, level: Level) -> Option<&LevelEntry> {
        self.levels.iter().find(|l| l.level == level)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Writes `run_report.json`, `timings.json`, `config.toml` and every artifact.
    pub fn write(&self, out: &Path) -> Result<(), CliError> {
        let put = |rel: &str, contents: &str| -> Result<(), CliError> {
            let path = out.join(rel);
            if let Some(dir) = path.parent() {
                std::fs::create_dir_all(dir).map_err(|e| CliError::output(dir, e))?;
            }
            std::fs::write(&path, contents).map_err(|e| CliError::output(&path, e))
        };
        for artifact in &self.artifacts {
            put(&artifact.path, &artifact.contents)?;
        }
        put("config.toml", &self.config.to_toml())?;
        let timings: serde_json::Map<String, serde_json::Value> = self
            .timings
            .iter()
            .map(|(k, v)| (k.clone(), (*v).into()))
            .collect();
        put(
            "timings.json",
            &serde_json::to_string_pretty(&timings).expect("timings serialize"),
        )?;
        put("run_report.json", &self.to_json())
    }
}
