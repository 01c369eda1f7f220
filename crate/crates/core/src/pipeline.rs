//! Scenario pipeline: validate, build the particular problem, follow the
//! path, diagnose, and persist artifacts and checkpoints.

use std::io::Write;
use std::path::Path;

use log::info;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::barriers::{BarrierPair, BarrierReport};
use crate::diagnostics::{c2_monitor, coercivity_check, jacobian_fd_check, uniqueness_experiment, DiagnosticReport};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::homotopy::{
    continue_path, estimate_lambda0, ContinuationOptions, ContinuationState, ContinuationTrace, Control,
    HomotopyProblem, LambdaAttempt, MonitorOverrides, Outcome, ProblemSketch, TauPolicy, TraceStep,
};
use crate::hypersurface::graph_quantities;
use crate::scenario::Scenario;
use crate::tubular::{build_foliation_adaptive, FoliationReport};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Validated inputs of a run.
#[derive(Clone, Debug)]
pub struct Setup {
    pub barrier_report: BarrierReport,
    pub foliation_report: FoliationReport,
    pub sketch: ProblemSketch,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BarrierSummary {
    pub margin_upper: f64,
    /// `None` when no node of the lower barrier is admissible.
    pub margin_lower: Option<f64>,
    pub sigma_size: usize,
    pub nodes: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoliationSummary {
    pub eps0: f64,
    pub tau0: f64,
    pub c1: f64,
    pub c2: f64,
    pub min_phi_dot: f64,
    pub max_phi_dot: f64,
}

/// One row of the final nodal table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeRow {
    pub coords: Vec<f64>,
    pub u: f64,
    pub kappa: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunArtifact {
    pub version: String,
    /// Canonical scenario text; re-running it reproduces this artifact.
    pub scenario: String,
    pub lambda: f64,
    pub lambda_attempts: Vec<LambdaAttempt>,
    pub barriers: BarrierSummary,
    pub foliation: FoliationSummary,
    pub trace: ContinuationTrace,
    pub final_t: f64,
    pub final_residual: f64,
    pub solution: Vec<NodeRow>,
    pub diagnostics: Vec<DiagnosticReport>,
    /// SHA-256 of the trace, final graph and final residual.
    pub checksum: String,
}

/// Mid-path state from which [`resume`] reproduces the uninterrupted run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: String,
    pub scenario: String,
    pub lambda: f64,
    pub lambda_attempts: Vec<LambdaAttempt>,
    pub c2_max: Option<f64>,
    pub state: ContinuationState,
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Where to write a checkpoint.
    pub checkpoint_path: Option<std::path::PathBuf>,
    /// Checkpoint at the first accepted step with `t` at least this value.
    pub checkpoint_at: Option<f64>,
    /// Stop after writing the checkpoint.
    pub halt: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub enum RunOutcome {
    Completed(Box<RunArtifact>),
    Halted(Box<Checkpoint>),
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.to_string()))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, serde_json::to_string_pretty(value)?.as_bytes())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    Scenario::parse(&std::fs::read_to_string(path)?)
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

/// Validates the scenario and builds the foliation of the upper barrier.
pub fn setup(sc: &Scenario) -> Result<Setup> {
    let amb = sc.ambient_manifold()?;
    let grid = sc.grid()?;
    sc.curvature.check_dimension(amb.dim_n)?;
    let rhs = sc.right_hand_side()?;
    let sample = |e: &crate::expr::Expr, grid: &Grid| grid.sample(|x| e.eval_at(0.0, x));
    let mut barriers = BarrierPair::new(sample(&sc.u1, &grid), sample(&sc.u2, &grid), sc.epsilon1);
    barriers.slack = sc.slack;
    barriers.check_ordering()?;
    let lo = barriers.u1.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = barriers.u2.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    rhs.check_bounds(&amb, &grid, lo, hi)?;
    let barrier_report = barriers.validate(&amb, &grid, &sc.curvature, &rhs)?;
    info!(
        "barriers valid: upper margin {:e}, lower margin {:e}, |Sigma| = {}",
        barrier_report.margin_upper, barrier_report.margin_lower, barrier_report.sigma_size
    );
    let foliation = build_foliation_adaptive(&amb, &grid, &barriers.u2, sc.eps0, sc.n_levels)?;
    let foliation_report = foliation.verify()?;
    let sketch = ProblemSketch {
        curvature: sc.curvature.clone(),
        rhs,
        barriers,
        foliation,
        tau_policy: sc.tau0.map_or(TauPolicy::Auto, TauPolicy::Fixed),
        overrides: MonitorOverrides {
            grad_cap: sc.grad_cap,
            kappa_cap: sc.kappa_cap,
        },
    };
    Ok(Setup {
        barrier_report,
        foliation_report,
        sketch,
    })
}

/// `λ` from the scenario or the doubling search.
pub fn build_problem(sc: &Scenario, setup: &Setup) -> Result<(HomotopyProblem, Vec<LambdaAttempt>)> {
    match sc.lambda {
        Some(l) => Ok((setup.sketch.with_lambda(l)?, Vec::new())),
        None => {
            let est = estimate_lambda0(&setup.sketch, sc.uniqueness_trials, sc.seed)?;
            info!("lambda0 = {}", est.lambda0);
            Ok((est.problem, est.attempts))
        }
    }
}

pub fn continuation_options(sc: &Scenario) -> ContinuationOptions {
    ContinuationOptions {
        dt0: sc.dt0,
        tol: sc.tol,
        final_tol: sc.tol.min(1e-10),
        max_steps: sc.max_steps,
        ..ContinuationOptions::default()
    }
}

/// Largest defined value of the monitor `w` on `u`.
fn c2_value(sc: &Scenario, problem: &HomotopyProblem, u: &[f64]) -> Option<f64> {
    let chi = problem.ambient.strictly_convex_reference().ok()?;
    c2_monitor(&problem.ambient, &problem.grid, u, sc.lambda_w, sc.mu_w, &chi)
        .ok()?
        .max_w
}

/// Every diagnostic enabled in the scenario.
pub fn diagnose(sc: &Scenario, problem: &HomotopyProblem, u_final: Option<&[f64]>) -> Result<Vec<DiagnosticReport>> {
    let mut out = vec![coercivity_check(problem)?];
    if sc.uniqueness_trials > 0 {
        out.push(uniqueness_experiment(problem, sc.uniqueness_trials, sc.seed));
    }
    if sc.fd_check {
        out.push(jacobian_fd_check(problem, &problem.u0, 0.0, sc.seed));
        if let Some(u) = u_final {
            let mut r = jacobian_fd_check(problem, u, 1.0, sc.seed);
            r.experiment = "jacobian_fd_final".into();
            out.push(r);
        }
    }
    for r in out.iter_mut() {
        r.scenario = Some(sc.name.clone());
    }
    Ok(out)
}

fn artifact_checksum(trace: &ContinuationTrace, u: &[f64], residual: f64) -> Result<String> {
    let body = serde_json::to_vec(&(trace, u, residual))?;
    Ok(Sha256::digest(&body).iter().map(|b| format!("{b:02x}")).collect())
}

/// Runs the continuation from `state` and assembles the artifact.
#[allow(clippy::too_many_arguments)]
fn finish(
    sc: &Scenario,
    setup: &Setup,
    problem: &HomotopyProblem,
    attempts: Vec<LambdaAttempt>,
    state: ContinuationState,
    mut c2_max: Option<f64>,
    opts: &RunOptions,
    progress: &mut dyn FnMut(&TraceStep),
) -> Result<RunOutcome> {
    let copts = continuation_options(sc);
    let scenario_text = sc.to_text();
    let mut checkpointed = false;
    let mut halted = None;
    let mut io_error = None;
    let mut hook = |s: &ContinuationState| -> Control {
        if let Some(step) = s.trace.steps.last() {
            progress(step);
        }
        if sc.c2_monitor {
            if let Some(w) = c2_value(sc, problem, &s.u) {
                c2_max = Some(c2_max.map_or(w, |m| m.max(w)));
            }
        }
        if let (Some(path), Some(at)) = (&opts.checkpoint_path, opts.checkpoint_at) {
            if !checkpointed && s.t >= at {
                checkpointed = true;
                let cp = Checkpoint {
                    version: VERSION.into(),
                    scenario: scenario_text.clone(),
                    lambda: problem.lambda,
                    lambda_attempts: attempts.clone(),
                    c2_max,
                    state: s.clone(),
                };
                if let Err(e) = write_json(path, &cp) {
                    io_error = Some(e);
                    return Control::Halt;
                }
                info!("checkpoint written at t = {}", s.t);
                if opts.halt {
                    halted = Some(cp);
                    return Control::Halt;
                }
            }
        }
        Control::Continue
    };
    let outcome = continue_path(problem, state, &copts, &mut hook)?;
    if let Some(e) = io_error {
        return Err(e);
    }
    let (u, residual, trace) = match outcome {
        Outcome::Completed { u, residual, trace } => (u, residual, trace),
        Outcome::Halted(_) => {
            let cp = halted.expect("halt only after a checkpoint");
            return Ok(RunOutcome::Halted(Box::new(cp)));
        }
    };
    let mut diagnostics = diagnose(sc, problem, Some(&u))?;
    if sc.c2_monitor {
        let mut r = DiagnosticReport {
            experiment: "c2_monitor".into(),
            passed: c2_max.is_some(),
            quantities: Vec::new(),
            notes: Vec::new(),
            scenario: Some(sc.name.clone()),
            seed: None,
        };
        match c2_max {
            Some(w) => r.quantities.push(("max_w".into(), w)),
            None => r
                .notes
                .push("monitor undefined: no convex reference or no positive curvature".into()),
        }
        diagnostics.push(r);
    }
    let state = graph_quantities(&problem.ambient, &problem.grid, &u)?;
    let solution = state
        .nodes
        .iter()
        .enumerate()
        .map(|(k, n)| NodeRow {
            coords: problem.grid.coords(k).to_vec(),
            u: u[k],
            kappa: n.kappa.clone(),
        })
        .collect();
    let checksum = artifact_checksum(&trace, &u, residual)?;
    let fr = &setup.foliation_report;
    Ok(RunOutcome::Completed(Box::new(RunArtifact {
        version: VERSION.into(),
        scenario: scenario_text,
        lambda: problem.lambda,
        lambda_attempts: attempts,
        barriers: BarrierSummary {
            margin_upper: setup.barrier_report.margin_upper,
            margin_lower: finite(setup.barrier_report.margin_lower),
            sigma_size: setup.barrier_report.sigma_size,
            nodes: setup.barrier_report.nodes,
        },
        foliation: FoliationSummary {
            eps0: setup.sketch.foliation.eps0,
            tau0: problem.tau0,
            c1: fr.c1,
            c2: fr.c2,
            min_phi_dot: fr.min_phi_dot,
            max_phi_dot: fr.max_phi_dot,
        },
        trace,
        final_t: 1.0,
        final_residual: residual,
        solution,
        diagnostics,
        checksum,
    })))
}

/// Full pipeline for one scenario.
pub fn run(sc: &Scenario, opts: &RunOptions, progress: &mut dyn FnMut(&TraceStep)) -> Result<RunOutcome> {
    let setup = setup(sc)?;
    let (problem, attempts) = build_problem(sc, &setup)?;
    let copts = continuation_options(sc);
    let state = ContinuationState::start(problem.u0.clone(), &copts);
    let c2 = if sc.c2_monitor { c2_value(sc, &problem, &problem.u0) } else { None };
    finish(sc, &setup, &problem, attempts, state, c2, opts, progress)
}

/// Continues a halted run to completion.
pub fn resume(cp: &Checkpoint, progress: &mut dyn FnMut(&TraceStep)) -> Result<RunArtifact> {
    let sc = Scenario::parse(&cp.scenario)?;
    let setup = setup(&sc)?;
    let problem = setup.sketch.with_lambda(cp.lambda)?;
    match finish(
        &sc,
        &setup,
        &problem,
        cp.lambda_attempts.clone(),
        cp.state.clone(),
        cp.c2_max,
        &RunOptions::default(),
        progress,
    )? {
        RunOutcome::Completed(a) => Ok(*a),
        RunOutcome::Halted(_) => Err(Error::Path("resumed run halted unexpectedly".into())),
    }
}

/// Data exported by [`export`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExportKind {
    Solution,
    ResidualHistory,
    CurvatureProfile,
}

impl std::str::FromStr for ExportKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "solution" => Ok(Self::Solution),
            "residual_history" => Ok(Self::ResidualHistory),
            "curvature_profile" => Ok(Self::CurvatureProfile),
            other => Err(Error::Configuration(format!(
                "unknown export {other:?}; expected solution, residual_history or curvature_profile"
            ))),
        }
    }
}

/// Columnar text with a one-line header.
pub fn export(artifact: &RunArtifact, what: ExportKind) -> String {
    let dim = artifact.solution.first().map_or(1, |r| r.coords.len());
    let coords = if dim == 1 { "theta" } else { "phi theta" };
    let mut out = String::new();
    match what {
        ExportKind::Solution => {
            out.push_str(&format!("{coords} u\n"));
            for r in &artifact.solution {
                let c: Vec<String> = r.coords.iter().map(|x| format!("{x:.17e}")).collect();
                out.push_str(&format!("{} {:.17e}\n", c.join(" "), r.u));
            }
        }
        ExportKind::ResidualHistory => {
            out.push_str("t residual\n");
            for s in &artifact.trace.steps {
                out.push_str(&format!("{:.17e} {:.17e}\n", s.t, s.residual));
            }
        }
        ExportKind::CurvatureProfile => {
            let ks: Vec<String> = (1..=dim).map(|i| format!("kappa{i}")).collect();
            out.push_str(&format!("{coords} {}\n", ks.join(" ")));
            for r in &artifact.solution {
                let c: Vec<String> = r
                    .coords
                    .iter()
                    .chain(&r.kappa)
                    .map(|x| format!("{x:.17e}"))
                    .collect();
                out.push_str(&c.join(" "));
                out.push('\n');
            }
        }
    }
    out
}
