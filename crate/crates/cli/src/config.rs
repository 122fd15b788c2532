//! Run configuration. The file format is TOML restricted to `key = value`
//! lines under `[section]` headers; see `docs/config.md` for the grammar.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use nodal_core::discretization::csv::read_field;
use nodal_core::eigensolver::EigenOptions;
use nodal_core::model::{PotentialSpec, ProblemParams};
use nodal_core::variational::DescentOptions;
use nodal_core::{Field, Grid, GridMode};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Ground,
    Linearize,
    Nodal,
    Bounds,
    Verify,
    Sweep,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Ground => "ground",
            Command::Linearize => "linearize",
            Command::Nodal => "nodal",
            Command::Bounds => "bounds",
            Command::Verify => "verify",
            Command::Sweep => "sweep",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    /// `cartesian1d`, `cartesian2d` or `radialN`
    pub mode: String,
    #[serde(rename = "R")]
    pub half_width: f64,
    pub h: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialKind {
    Constant,
    ExpWell,
    Table,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSection {
    pub kind: PotentialKind,
    pub v_inf: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    /// Field CSV holding `V` on the configured grid (`table` only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub tol: f64,
    pub max_iter: usize,
    pub tol_h: f64,
    pub nodal_delta: f64,
    pub max_restarts: usize,
    pub eigen_tol: f64,
    pub eigen_residual_tol: f64,
    /// Seed of the eigensolver's random start vectors.
    pub rng_seed: u64,
    pub loop_samples: usize,
    /// `nodal` on a cartesian2d grid: also solve the radial problem (`radial2`
    /// on the same R and h) and compare the two levels.
    pub compare_radial: bool,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = DescentOptions::default();
        SolverSection {
            tol: d.tol,
            max_iter: d.max_iter,
            tol_h: d.tol_h,
            nodal_delta: d.nodal_delta,
            max_restarts: d.max_restarts,
            eigen_tol: d.eigen.tol,
            eigen_residual_tol: d.eigen.residual_tol,
            rng_seed: d.eigen.seed,
            loop_samples: 128,
            compare_radial: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SeedSection {
    /// Distance between the two bumps of the default nodal seed; `3/sqrt(V∞)` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub separation: Option<f64>,
    /// Field CSV used as the nodal seed instead of the two-bump construction.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSection {
    /// Field CSV analysed by `linearize` and `verify`.
    pub field: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub c0: Vec<f64>,
    pub a: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    pub grid: GridSection,
    pub potential: PotentialSection,
    pub problem: ProblemSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub seed: SeedSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<InputSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    /// Directory that relative file paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let config = Self::parse_unchecked(text)?;
        config.validate()?;
        Ok(config)
    }

    fn parse_unchecked(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.message().trim().to_string()))
    }

    /// Reads a configuration file, applies a command override and validates.
    pub fn load(path: &Path, command: Option<Command>) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let context = |e: CliError| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        };
        let mut config = Self::parse_unchecked(&text).map_err(context)?;
        if let Some(command) = command {
            config.command = command;
        }
        config.validate().map_err(context)?;
        let parent = path
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .unwrap_or(Path::new("."));
        config.base_dir = parent
            .canonicalize()
            .unwrap_or_else(|_| parent.to_path_buf());
        Ok(config)
    }

    /// The configuration as it ran: file paths made absolute and the output
    /// directory dropped, so the echo re-runs from anywhere.
    pub fn echo(&self) -> RunConfig {
        let mut echo = self.clone();
        echo.out = None;
        echo.potential.file = echo.potential.file.map(|f| self.resolve(&f));
        echo.seed.file = echo.seed.file.map(|f| self.resolve(&f));
        if let Some(input) = &mut echo.input {
            input.field = self.resolve(&input.field);
        }
        echo
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// Checks everything that can be checked without building a problem.
    pub fn validate(&self) -> Result<(), CliError> {
        let grid = self.grid()?;
        ProblemParams::new(self.problem.p, grid.dimension(), self.potential.v_inf)?;
        self.potential_kind_fields()?;
        if let Some(sweep) = &self.sweep {
            if sweep
                .c0
                .iter()
                .chain(&sweep.a)
                .any(|&x| x <= 0.0 || !x.is_finite())
            {
                return Err(CliError::Config("sweep values must be positive".into()));
            }
        }
        let s = &self.solver;
        let positive = [
            ("solver.tol", s.tol),
            ("solver.tol_h", s.tol_h),
            ("solver.nodal_delta", s.nodal_delta),
            ("solver.eigen_tol", s.eigen_tol),
            ("solver.eigen_residual_tol", s.eigen_residual_tol),
        ];
        for (name, value) in positive {
            if value <= 0.0 || !value.is_finite() {
                return Err(CliError::Config(format!(
                    "{name} = {value} must be positive"
                )));
            }
        }
        if s.max_iter == 0 {
            return Err(CliError::Config("solver.max_iter must be positive".into()));
        }
        if s.loop_samples < 4 {
            return Err(CliError::Config(
                "solver.loop_samples must be at least 4".into(),
            ));
        }
        if s.compare_radial && self.grid()?.mode() != GridMode::Cartesian2d {
            return Err(CliError::Config(
                "solver.compare_radial needs a cartesian2d grid".into(),
            ));
        }
        if self.seed.separation.is_some() && self.seed.file.is_some() {
            return Err(CliError::Config(
                "seed.separation and seed.file are exclusive".into(),
            ));
        }
        if let Some(sep) = self.seed.separation {
            if !sep.is_finite() || sep <= 0.0 || sep >= self.grid.half_width {
                return Err(CliError::Config(format!(
                    "seed.separation = {sep} must lie in (0, R)"
                )));
            }
        }
        match self.command {
            Command::Linearize | Command::Verify if self.input.is_none() => {
                return Err(CliError::Config(format!(
                    "command {} needs an [input] section with `field`",
                    self.command.name()
                )));
            }
            Command::Sweep => {
                let sweep = self.sweep.as_ref().ok_or_else(|| {
                    CliError::Config("command sweep needs a [sweep] section".into())
                })?;
                if sweep.c0.is_empty() || sweep.a.is_empty() {
                    return Err(CliError::Config("sweep lists must be nonempty".into()));
                }
                if self.potential.kind != PotentialKind::ExpWell {
                    return Err(CliError::Config(
                        "command sweep varies an exp_well potential".into(),
                    ));
                }
            }
            _ => {}
        }
        Ok(())
    }

    fn potential_kind_fields(&self) -> Result<(), CliError> {
        let pot = &self.potential;
        let (needs_well, needs_file) = match pot.kind {
            PotentialKind::Constant => (false, false),
            PotentialKind::ExpWell => (true, false),
            PotentialKind::Table => (false, true),
        };
        if needs_well {
            match (pot.c0, pot.a) {
                (Some(c0), Some(a)) if c0 > 0.0 && a > 0.0 && c0.is_finite() && a.is_finite() => {}
                (Some(_), Some(_)) => {
                    return Err(CliError::Config(
                        "well depth c0 and decay a must be positive".into(),
                    ))
                }
                _ => {
                    return Err(CliError::Config(
                        "potential exp_well needs `c0` and `a`".into(),
                    ))
                }
            }
        }
        if !needs_well && (pot.c0.is_some() || pot.a.is_some()) {
            return Err(CliError::Config(
                "`c0` and `a` only apply to potential kind exp_well".into(),
            ));
        }
        if needs_file != pot.file.is_some() {
            return Err(CliError::Config(if needs_file {
                "potential table needs `file`".into()
            } else {
                "`file` only applies to potential kind table".into()
            }));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid, CliError> {
        let mode = GridMode::parse(&self.grid.mode)?;
        Ok(Grid::new(mode, self.grid.half_width, self.grid.h)?)
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    /// Reads a field CSV and checks it lives on the configured grid.
    pub fn read_field_on(&self, path: &Path, grid: &Grid) -> Result<Field, CliError> {
        let full = self.resolve(path);
        let file = std::fs::File::open(&full)
            .map_err(|e| CliError::Config(format!("cannot open {}: {e}", full.display())))?;
        let (file_grid, _, field) = read_field(std::io::BufReader::new(file))
            .map_err(|e| CliError::Config(format!("{}: {e}", full.display())))?;
        if file_grid.id() != grid.id() {
            return Err(CliError::Config(format!(
                "{} is on grid {} but the configuration asks for {}",
                full.display(),
                file_grid.id(),
                grid.id()
            )));
        }
        Ok(field)
    }

    pub fn potential_spec(&self, grid: &Grid) -> Result<PotentialSpec, CliError> {
        let pot = &self.potential;
        Ok(match pot.kind {
            PotentialKind::Constant => PotentialSpec::Constant { v_inf: pot.v_inf },
            PotentialKind::ExpWell => PotentialSpec::ExpWell {
                v_inf: pot.v_inf,
                c0: pot.c0.unwrap_or_default(),
                a: pot.a.unwrap_or_default(),
            },
            PotentialKind::Table => {
                let file = pot.file.as_ref().expect("validated");
                PotentialSpec::Table {
                    v_inf: pot.v_inf,
                    values: self.read_field_on(file, grid)?,
                }
            }
        })
    }

    pub fn descent_options(&self) -> DescentOptions {
        let s = &self.solver;
        DescentOptions {
            tol: s.tol,
            max_iter: s.max_iter,
            tol_h: s.tol_h,
            nodal_delta: s.nodal_delta,
            max_restarts: s.max_restarts,
            eigen: EigenOptions {
                tol: s.eigen_tol,
                residual_tol: s.eigen_residual_tol,
                seed: s.rng_seed,
                ..EigenOptions::default()
            },
            ..DescentOptions::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const WELL: &str = r#"
command = "nodal"

[grid]
mode = "cartesian1d"
R = 15.0
h = 0.01

[potential]
kind = "exp_well"
v_inf = 1.0
c0 = 0.3
a = 0.5

[problem]
p = 4.0
"#;

    #[test]
    fn parses_with_defaults() {
        let c = RunConfig::parse(WELL).unwrap();
        assert_eq!(c.command, Command::Nodal);
        assert_eq!(c.solver, SolverSection::default());
        assert_eq!(c.grid().unwrap().len(), 2999);
        assert_eq!(c.descent_options(), DescentOptions::default());
    }

    #[test]
    fn rejects_unknown_keys() {
        let text = WELL.replace("p = 4.0", "p = 4.0\nq = 2.0");
        assert!(matches!(RunConfig::parse(&text), Err(CliError::Config(_))));
        let text = WELL.replace("[problem]", "[mystery]\nx = 1\n[problem]");
        assert!(RunConfig::parse(&text).is_err());
    }

    #[test]
    fn rejects_inconsistent_potential() {
        let text = WELL.replace("kind = \"exp_well\"", "kind = \"constant\"");
        assert!(RunConfig::parse(&text).is_err());
        let text = WELL.replace("c0 = 0.3\n", "");
        assert!(RunConfig::parse(&text).is_err());
    }

    #[test]
    fn rejects_bad_grid_and_missing_sections() {
        assert!(RunConfig::parse(&WELL.replace("h = 0.01", "h = 4.0")).is_err());
        assert!(RunConfig::parse(&WELL.replace("cartesian1d", "hexagonal")).is_err());
        assert!(RunConfig::parse(&WELL.replace("\"nodal\"", "\"verify\"")).is_err());
        assert!(RunConfig::parse(&WELL.replace("\"nodal\"", "\"sweep\"")).is_err());
    }

    #[test]
    fn toml_round_trip() {
        let c = RunConfig::parse(WELL).unwrap();
        let again = RunConfig::parse(&c.to_toml()).unwrap();
        assert_eq!(c, again);
    }
}
