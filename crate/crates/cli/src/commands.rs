//! Command dispatch. Every command fills a [`RunReport`] as it goes, so a
//! failure part way through still leaves a well-formed partial report.

use std::time::Instant;

use log::{debug, info, warn};
use rayon::prelude::*;

use nodal_core::discretization::csv::field_to_csv;
use nodal_core::eigensolver::{principal_eigenpair, second_eigenpair, EigenOptions};
use nodal_core::functionals::{energy, mass, weight_of};
use nodal_core::model::{hypothesis_report, HypothesisReport, PotentialSpec};
use nodal_core::variational::{
    ground_state, lambda2_bounds, loop_minimax_upper, nodal_minimax, DescentOptions, NodalSeed,
    SolveReport,
};
use nodal_core::verification::{decay_fit, nodality, radial_deviation, residual_eq};
use nodal_core::{Field, Grid, GridMode, Problem};

use crate::config::{Command, RunConfig};
use crate::report::{
    Artifact, GridSummary, LevelEntry, Linearized, Outcome, RadialComparison, RunReport, Sandwich,
    Status, SweepRow, SweepSummary, Verification,
};
use crate::{CliError, EXIT_HYPOTHESIS, EXIT_SOLVER};

/// `|h|` accepted as orthogonality to the principal eigenfunction.
const ORTHOGONALITY_TOL: f64 = 1e-8;

/// Runs the configured command. Errors are recorded in the report's status.
pub fn run(config: &RunConfig, jobs: Option<usize>) -> RunReport {
    let mut report = RunReport::new(config);
    let start = Instant::now();
    let result = match config.command {
        Command::Ground => ground(config, &mut report),
        Command::Linearize => linearize(config, &mut report),
        Command::Nodal => nodal(config, &mut report),
        Command::Bounds => bounds(config, &mut report),
        Command::Verify => verify(config, &mut report),
        Command::Sweep => sweep(config, jobs, &mut report),
    };
    report
        .timings
        .push(("total".into(), start.elapsed().as_secs_f64()));
    report.status = match result {
        Err(err) => {
            warn!("{err}");
            Status::from_error(&err)
        }
        Ok(()) => verdict(&report),
    };
    report
}

/// Hypothesis failures take precedence over non-convergence: outside the
/// hypotheses a level need not be attained.
fn verdict(report: &RunReport) -> Status {
    let hypotheses_fail = report.hypotheses.as_ref().is_some_and(|h| !h.all_pass())
        || report
            .sweep
            .as_ref()
            .is_some_and(|s| s.rows.iter().any(|r| !r.hypotheses_hold));
    let stalled: Vec<String> = report
        .levels
        .iter()
        .chain(report.sweep.iter().map(|s| &s.lambda1_inf))
        .filter(|l| !l.converged)
        .map(|l| {
            format!(
                "{:?}: {}",
                l.level,
                l.diagnosis.as_deref().unwrap_or("not converged")
            )
        })
        .chain(report.sweep.iter().flat_map(|s| {
            s.rows.iter().filter(|r| !r.converged).map(|r| {
                format!(
                    "sweep c0 = {}, a = {}: {}",
                    r.c0,
                    r.a,
                    r.diagnosis.as_deref().unwrap_or("not converged")
                )
            })
        }))
        .collect();
    if hypotheses_fail {
        let failed: Vec<&str> = report
            .hypotheses
            .iter()
            .flat_map(|h| h.checks.values())
            .filter(|c| !c.pass)
            .map(|c| c.name.as_str())
            .collect();
        let message = if failed.is_empty() {
            "hypotheses fail on some sweep rows".to_string()
        } else {
            format!("hypotheses fail: {}", failed.join(", "))
        };
        Status {
            exit_code: EXIT_HYPOTHESIS,
            outcome: Outcome::HypothesisViolation,
            message: Some(message),
        }
    } else if !stalled.is_empty() {
        Status {
            exit_code: EXIT_SOLVER,
            outcome: Outcome::NotConverged,
            message: Some(stalled.join("; ")),
        }
    } else {
        Status::success()
    }
}

struct Timer<'a> {
    report: &'a mut Vec<(String, f64)>,
}

impl Timer<'_> {
    fn time<T>(&mut self, name: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        let secs = start.elapsed().as_secs_f64();
        debug!("{name}: {secs:.3} s");
        self.report.push((name.to_string(), secs));
        out
    }
}

fn timer(report: &mut RunReport) -> Timer<'_> {
    Timer {
        report: &mut report.timings,
    }
}

fn field_artifact(
    grid: &Grid,
    path: &str,
    name: &str,
    field: &Field,
) -> Result<Artifact, CliError> {
    Ok(Artifact {
        path: path.to_string(),
        contents: field_to_csv(grid, name, field)?,
    })
}

fn history_artifact(path: &str, rep: &SolveReport) -> Artifact {
    Artifact {
        path: path.to_string(),
        contents: rep.history_csv(),
    }
}

fn setup(config: &RunConfig, report: &mut RunReport) -> Result<(Grid, PotentialSpec), CliError> {
    let grid = config.grid()?;
    report.grid = Some(GridSummary::of(&grid));
    let spec = config.potential_spec(&grid)?;
    Ok((grid, spec))
}

/// Ground states of the problem and of the problem at infinity.
struct Grounds {
    problem: Problem,
    ground: SolveReport,
    at_infinity: SolveReport,
}

fn solve_grounds(
    config: &RunConfig,
    grid: &Grid,
    spec: &PotentialSpec,
    opts: &DescentOptions,
    report: &mut RunReport,
) -> Result<Grounds, CliError> {
    let p = config.problem.p;
    let problem = Problem::from_spec(grid, spec, p)?;
    let flat = Problem::from_spec(grid, &spec.at_infinity(), p)?;
    let mut t = timer(report);
    info!(
        "ground state at infinity on {} ({} nodes)",
        grid.mode(),
        grid.len()
    );
    let at_infinity = t.time("ground_at_infinity", || ground_state(&flat, None, opts))?;
    let ground = if spec.is_autonomous() {
        at_infinity.clone()
    } else {
        info!("ground state");
        t.time("ground", || ground_state(&problem, None, opts))?
    };
    report.levels.push(LevelEntry::of(&at_infinity));
    report.artifacts.push(field_artifact(
        grid,
        "fields/w1_inf.csv",
        "w1_inf",
        at_infinity.state(),
    )?);
    report
        .artifacts
        .push(history_artifact("history/ground_inf.csv", &at_infinity));
    if !spec.is_autonomous() {
        report.levels.push(LevelEntry::of(&ground));
        report
            .artifacts
            .push(field_artifact(grid, "fields/w1.csv", "w1", ground.state())?);
        report
            .artifacts
            .push(history_artifact("history/ground.csv", &ground));
    }
    report.ground_decay = decay_fit(grid, at_infinity.state(), spec.v_inf(), grid.dimension())
        .map_err(|e| debug!("no decay fit: {e}"))
        .ok();
    info!("λ1 = {:.8}, λ1∞ = {:.8}", ground.lambda, at_infinity.lambda);
    Ok(Grounds {
        problem,
        ground,
        at_infinity,
    })
}

fn hypotheses(
    spec: &PotentialSpec,
    problem: &Problem,
    lambda1_inf: f64,
    ground: &Field,
) -> Result<HypothesisReport, CliError> {
    let grid = problem.grid();
    let mut hyp = hypothesis_report(spec, problem.params(), grid, lambda1_inf)?;
    if let PotentialSpec::ExpWell { a, .. } = spec {
        if let Ok(fit) = decay_fit(grid, ground, spec.v_inf(), grid.dimension()) {
            hyp = hyp.with_fitted_decay_rate(*a, fit.fitted_rate);
        }
    }
    Ok(hyp)
}

fn sandwich(grounds: &Grounds, p: f64) -> Result<Sandwich, CliError> {
    let (lower, upper) = lambda2_bounds(grounds.ground.lambda, grounds.at_infinity.lambda, p)?;
    Ok(Sandwich {
        lambda1: grounds.ground.lambda,
        lambda1_inf: grounds.at_infinity.lambda,
        lower,
        upper,
        contains_lambda2: None,
    })
}

fn ground(config: &RunConfig, report: &mut RunReport) -> Result<(), CliError> {
    let (grid, spec) = setup(config, report)?;
    solve_grounds(config, &grid, &spec, &config.descent_options(), report)?;
    Ok(())
}

fn bounds(config: &RunConfig, report: &mut RunReport) -> Result<(), CliError> {
    let (grid, spec) = setup(config, report)?;
    let grounds = solve_grounds(config, &grid, &spec, &config.descent_options(), report)?;
    report.sandwich = Some(sandwich(&grounds, config.problem.p)?);
    report.hypotheses = Some(hypotheses(
        &spec,
        &grounds.problem,
        grounds.at_infinity.lambda,
        grounds.ground.state(),
    )?);
    Ok(())
}

fn nodal_seed(
    config: &RunConfig,
    problem: &Problem,
    profile: &Field,
) -> Result<NodalSeed, CliError> {
    Ok(match (&config.seed.file, config.seed.separation) {
        (Some(file), _) => NodalSeed::Field(config.read_field_on(file, problem.grid())?),
        (None, Some(separation)) => NodalSeed::TwoBump {
            profile: profile.clone(),
            separation,
        },
        (None, None) => NodalSeed::two_bump(problem, profile.clone()),
    })
}

fn nodal(config: &RunConfig, report: &mut RunReport) -> Result<(), CliError> {
    let (grid, spec) = setup(config, report)?;
    let opts = config.descent_options();
    let grounds = solve_grounds(config, &grid, &spec, &opts, report)?;
    let mut bracket = sandwich(&grounds, config.problem.p)?;
    report.sandwich = Some(bracket.clone());
    let hyp = hypotheses(
        &spec,
        &grounds.problem,
        grounds.at_infinity.lambda,
        grounds.ground.state(),
    )?;
    if !hyp.all_pass() {
        warn!("hypotheses do not all hold; the nodal run goes ahead as an experiment");
    }
    report.hypotheses = Some(hyp.clone());

    let problem = &grounds.problem;
    let seed = nodal_seed(config, problem, grounds.ground.state())?;
    info!("nodal minimax");
    let u2 = timer(report).time("nodal", || nodal_minimax(problem, seed, &opts))?;
    report.levels.push(LevelEntry::of(&u2));
    report
        .artifacts
        .push(field_artifact(&grid, "fields/u2.csv", "u2", u2.state())?);
    report
        .artifacts
        .push(history_artifact("history/nodal.csv", &u2));
    bracket.contains_lambda2 = Some(bracket.lower < u2.lambda && u2.lambda < bracket.upper);
    report.sandwich = Some(bracket);
    info!(
        "λ2 = {:.8} ({})",
        u2.lambda,
        if u2.flags.converged {
            "converged"
        } else {
            "not converged"
        }
    );

    let (cert, samples) =
        timer(report).time("verification", || certify(config, problem, u2.state()))?;
    report.artifacts.push(Artifact {
        path: "history/loop.csv".into(),
        contents: samples,
    });
    report.verification = Some(cert);

    if config.solver.compare_radial {
        report.radial_comparison = Some(compare_radial(
            config,
            &spec,
            &grounds,
            &u2,
            hyp.all_pass(),
            &opts,
            report,
        )?);
    }
    Ok(())
}

fn compare_radial(
    config: &RunConfig,
    spec: &PotentialSpec,
    grounds: &Grounds,
    u2: &SolveReport,
    hypotheses_hold: bool,
    opts: &DescentOptions,
    report: &mut RunReport,
) -> Result<RadialComparison, CliError> {
    let grid = grounds.problem.grid();
    let radial_grid = Grid::new(
        GridMode::Radial { dim: 2 },
        grid.half_width(),
        grid.spacing(),
    )?;
    let radial_spec = match spec {
        PotentialSpec::Table { .. } => {
            return Err(CliError::Config(
                "compare_radial needs an analytic potential, not a table".into(),
            ))
        }
        other => other.clone(),
    };
    let radial = Problem::from_spec(&radial_grid, &radial_spec, config.problem.p)?;
    info!("radial comparison run");
    let mut t = timer(report);
    let radial_ground = t.time("radial_ground", || ground_state(&radial, None, opts))?;
    let seed = NodalSeed::two_bump(&radial, radial_ground.state().clone());
    let radial_nodal = t.time("radial_nodal", || nodal_minimax(&radial, seed, opts))?;
    report.levels.push(LevelEntry::of(&radial_nodal));
    report.artifacts.push(field_artifact(
        &radial_grid,
        "fields/u2_radial.csv",
        "u2_radial",
        radial_nodal.state(),
    )?);
    report
        .artifacts
        .push(history_artifact("history/nodal_radial.csv", &radial_nodal));
    Ok(RadialComparison {
        lambda2: u2.lambda,
        lambda2_radial: radial_nodal.lambda,
        margin: radial_nodal.lambda - u2.lambda,
        radial_deviation_u2: radial_deviation(grid, u2.state())?,
        radial_deviation_w1: radial_deviation(grid, grounds.ground.state())?,
        hypotheses_hold,
    })
}

/// Certifies a field as a solution on `M`; also returns the loop samples as CSV.
fn certify(
    config: &RunConfig,
    problem: &Problem,
    u: &Field,
) -> Result<(Verification, String), CliError> {
    let grid = problem.grid();
    let p = problem.p();
    let eigen = config.descent_options().eigen;
    let j = energy(problem.operator(), u)?;
    let i = mass(grid, u, p)?;
    let lambda = j / i;
    let weight = weight_of(grid, u, p)?;
    let first = principal_eigenpair(problem.operator(), &weight, &eigen)?;
    let second = second_eigenpair(problem.operator(), &weight, &first, &eigen)?;
    let h: f64 = h_of(grid, u, p, &first.v);
    let v1_positive = first.v.values().iter().all(|&x| x > 0.0);
    let bound = loop_minimax_upper(problem, u, config.solver.loop_samples, &eigen)?;
    let mut samples = String::from("theta,J\n");
    for (k, j) in bound.samples.iter().enumerate() {
        let theta = 2.0 * std::f64::consts::PI * k as f64 / bound.samples.len() as f64;
        samples.push_str(&format!("{theta},{j}\n"));
    }
    let single_signed =
        u.values().iter().all(|&x| x >= 0.0) || u.values().iter().all(|&x| x <= 0.0);
    let radial = match grid.mode() {
        GridMode::Cartesian2d => Some(radial_deviation(grid, u)?),
        _ => None,
    };
    let cert = Verification {
        energy: j,
        mass: i,
        lambda,
        residual: residual_eq(problem.operator(), u, lambda, p)?,
        h_value: h,
        v1_positive,
        nodality: nodality(grid, u, p, config.solver.nodal_delta)?,
        mu1: first.summary().into(),
        mu2: second.summary().into(),
        loop_upper_bound: bound.value,
        loop_theta_max: bound.theta_max,
        decay_fit: single_signed
            .then(|| decay_fit(grid, &u.abs(), problem.v_inf(), grid.dimension()).ok())
            .flatten(),
        radial_deviation: radial,
        orthogonality: h.abs() <= ORTHOGONALITY_TOL && v1_positive,
    };
    Ok((cert, samples))
}

/// `∫ |u|^{p-2} u v1`
fn h_of(grid: &Grid, u: &Field, p: f64, v1: &Field) -> f64 {
    u.values()
        .iter()
        .zip(v1.values())
        .zip(grid.weights())
        .map(|((&x, &v), &w)| w * x.abs().powf(p - 2.0) * x * v)
        .sum()
}

fn input_problem(config: &RunConfig, report: &mut RunReport) -> Result<(Problem, Field), CliError> {
    let (grid, spec) = setup(config, report)?;
    let problem = Problem::from_spec(&grid, &spec, config.problem.p)?;
    let input = config.input.as_ref().expect("validated");
    let u = config.read_field_on(&input.field, &grid)?;
    Ok((problem, u))
}

fn linearize(config: &RunConfig, report: &mut RunReport) -> Result<(), CliError> {
    let (problem, u) = input_problem(config, report)?;
    let grid = problem.grid();
    let p = problem.p();
    let eigen: EigenOptions = config.descent_options().eigen;
    let weight = weight_of(grid, &u, p)?;
    let mut t = timer(report);
    let first = t.time("mu1", || {
        principal_eigenpair(problem.operator(), &weight, &eigen)
    })?;
    let second = t.time("mu2", || {
        second_eigenpair(problem.operator(), &weight, &first, &eigen)
    })?;
    let bound = t.time("loop", || {
        loop_minimax_upper(&problem, &u, config.solver.loop_samples, &eigen)
    })?;
    report
        .artifacts
        .push(field_artifact(grid, "fields/v1.csv", "v1", &first.v)?);
    report
        .artifacts
        .push(field_artifact(grid, "fields/v2.csv", "v2", &second.v)?);
    info!("μ1 = {:.8}, μ2 = {:.8}", first.mu, second.mu);
    report.linearized = Some(Linearized {
        mass: mass(grid, &u, p)?,
        mu1: first.summary().into(),
        mu2: second.summary().into(),
        h_value: h_of(grid, &u, p, &first.v),
        loop_upper_bound: bound.value,
    });
    Ok(())
}

fn verify(config: &RunConfig, report: &mut RunReport) -> Result<(), CliError> {
    let (problem, u) = input_problem(config, report)?;
    let (cert, samples) = timer(report).time("verification", || certify(config, &problem, &u))?;
    report.artifacts.push(Artifact {
        path: "history/loop.csv".into(),
        contents: samples,
    });
    info!(
        "residual {:.3e}, |h| {:.3e}, nodal {}",
        cert.residual,
        cert.h_value.abs(),
        cert.nodality.is_nodal
    );
    report.verification = Some(cert);
    Ok(())
}

fn sweep(config: &RunConfig, jobs: Option<usize>, report: &mut RunReport) -> Result<(), CliError> {
    let grid = config.grid()?;
    report.grid = Some(GridSummary::of(&grid));
    let p = config.problem.p;
    let v_inf = config.potential.v_inf;
    let opts = config.descent_options();
    let axes = config.sweep.as_ref().expect("validated");
    let flat = Problem::from_spec(&grid, &PotentialSpec::Constant { v_inf }, p)?;
    info!("ground state at infinity");
    let at_infinity =
        timer(report).time("ground_at_infinity", || ground_state(&flat, None, &opts))?;
    let entries: Vec<(f64, f64)> = axes
        .c0
        .iter()
        .flat_map(|&c0| axes.a.iter().map(move |&a| (c0, a)))
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {jobs:?} workers: {e}")))?;
    let start = Instant::now();
    let runs: Vec<Result<(SweepRow, SolveReport), CliError>> = pool.install(|| {
        entries
            .par_iter()
            .map(|&(c0, a)| sweep_entry(&grid, v_inf, c0, a, p, at_infinity.lambda, &opts))
            .collect()
    });
    report
        .timings
        .push(("sweep".into(), start.elapsed().as_secs_f64()));

    let mut rows = Vec::with_capacity(runs.len());
    let mut csv = format!("{}\n", SweepRow::HEADER);
    for (k, run) in runs.into_iter().enumerate() {
        let (row, u2) = run?;
        csv.push_str(&row.csv_line());
        csv.push('\n');
        report.artifacts.push(field_artifact(
            &grid,
            &format!("fields/sweep_{k:03}_u2.csv"),
            "u2",
            u2.state(),
        )?);
        report
            .artifacts
            .push(history_artifact(&format!("history/sweep_{k:03}.csv"), &u2));
        rows.push(row);
    }
    report.artifacts.push(Artifact {
        path: "sweep.csv".into(),
        contents: csv,
    });
    let observations = monotonicity(&rows);
    report.sweep = Some(SweepSummary {
        lambda1_inf: LevelEntry::of(&at_infinity),
        rows,
        observations,
    });
    Ok(())
}

fn sweep_entry(
    grid: &Grid,
    v_inf: f64,
    c0: f64,
    a: f64,
    p: f64,
    lambda1_inf: f64,
    opts: &DescentOptions,
) -> Result<(SweepRow, SolveReport), CliError> {
    let spec = PotentialSpec::ExpWell { v_inf, c0, a };
    let problem = Problem::from_spec(grid, &spec, p)?;
    info!("sweep entry c0 = {c0}, a = {a}");
    let ground = ground_state(&problem, None, opts)?;
    let (lower, upper) = lambda2_bounds(ground.lambda, lambda1_inf, p)?;
    let hyp = hypotheses(&spec, &problem, lambda1_inf, ground.state())?;
    let seed = NodalSeed::two_bump(&problem, ground.state().clone());
    let u2 = nodal_minimax(&problem, seed, opts)?;
    let row = SweepRow {
        c0,
        a,
        lambda1: ground.lambda,
        lambda1_residual: ground.residual,
        lambda2: u2.lambda,
        lambda2_residual: u2.residual,
        lower,
        upper,
        inside: lower < u2.lambda && u2.lambda < upper,
        converged: ground.flags.converged && u2.flags.converged,
        nodal: u2.flags.nodal,
        h_value: u2.h_value,
        hypotheses_hold: hyp.all_pass(),
        diagnosis: u2.diagnosis.clone().or(ground.diagnosis.clone()),
    };
    Ok((row, u2))
}

/// A deeper or wider well lowers both levels. Each axis is checked with the
/// other held fixed; the result is an observation, never a failure.
fn monotonicity(rows: &[SweepRow]) -> Vec<String> {
    let mut notes = Vec::new();
    let mut axis_values = |key: fn(&SweepRow) -> f64,
                           other: fn(&SweepRow) -> f64,
                           name: &str,
                           other_name: &str,
                           falling: bool| {
        let mut fixed: Vec<f64> = rows.iter().map(other).collect();
        fixed.sort_by(f64::total_cmp);
        fixed.dedup();
        for v in fixed {
            let mut line: Vec<&SweepRow> = rows.iter().filter(|r| other(r) == v).collect();
            if line.len() < 2 {
                continue;
            }
            line.sort_by(|x, y| key(x).total_cmp(&key(y)));
            for (level, get) in [
                (
                    "lambda1",
                    (|r: &SweepRow| r.lambda1) as fn(&SweepRow) -> f64,
                ),
                ("lambda2", |r: &SweepRow| r.lambda2),
            ] {
                let holds = line.windows(2).all(|w| {
                    if falling {
                        get(w[1]) <= get(w[0])
                    } else {
                        get(w[1]) >= get(w[0])
                    }
                });
                let trend = if falling {
                    "non-increasing"
                } else {
                    "non-decreasing"
                };
                notes.push(format!(
                    "{level} {trend} in {name} at {other_name} = {v}: {}",
                    if holds { "observed" } else { "not observed" }
                ));
            }
        }
    };
    axis_values(|r| r.c0, |r| r.a, "c0", "a", true);
    axis_values(|r| r.a, |r| r.c0, "a", "c0", false);
    notes
}
