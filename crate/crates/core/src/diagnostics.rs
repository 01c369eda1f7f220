//! Numerical experiments on the solver's own output: uniqueness and
//! regularity of the starting point, Jacobian consistency, and the
//! second-derivative monitor `w`.

use std::fmt;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ambient::{AmbientManifold, ConvexReference};
use crate::error::Result;
use crate::grid::Grid;
use crate::homotopy::{min_real_eigenvalue, newton_solve, HomotopyProblem, NewtonOptions};
use crate::hypersurface::graph_quantities;

/// Number of modes in the smooth random fields.
const NOISE_MODES: usize = 8;
/// Amplitude of the perturbation of the uniqueness starts.
const START_NOISE: f64 = 0.05;
/// Distance within which a uniqueness run counts as landing on `u₀`.
pub const UNIQUENESS_TOL: f64 = 1e-8;
/// Relative tolerance of the finite-difference Jacobian check.
pub const FD_TOL: f64 = 1e-6;
/// Random directions probed by the finite-difference check.
pub const FD_DIRECTIONS: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticReport {
    pub experiment: String,
    pub passed: bool,
    /// Named measurements in insertion order.
    pub quantities: Vec<(String, f64)>,
    pub notes: Vec<String>,
    pub scenario: Option<String>,
    pub seed: Option<u64>,
}

impl DiagnosticReport {
    fn new(experiment: &str, seed: Option<u64>) -> Self {
        Self {
            experiment: experiment.into(),
            passed: true,
            quantities: Vec::new(),
            notes: Vec::new(),
            scenario: None,
            seed,
        }
    }

    fn put(&mut self, name: &str, value: f64) {
        self.quantities.push((name.into(), value));
    }

    pub fn quantity(&self, name: &str) -> Option<f64> {
        self.quantities.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }
}

impl fmt::Display for DiagnosticReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "[{}]", self.experiment)?;
        writeln!(f, "status = {}", if self.passed { "PASS" } else { "FAIL" })?;
        if let Some(s) = &self.scenario {
            writeln!(f, "scenario = {s}")?;
        }
        if let Some(s) = self.seed {
            writeln!(f, "seed = {s}")?;
        }
        for (n, v) in &self.quantities {
            writeln!(f, "{n} = {v:e}")?;
        }
        for n in &self.notes {
            writeln!(f, "note = {n}")?;
        }
        Ok(())
    }
}

/// Smooth random field `Σ a_m cos(m ⟨d_m, p⟩ + ϕ_m)` over the unit vector
/// `p` of each node, scaled so its sup is at most `amplitude`.
pub fn smooth_noise(grid: &Grid, rng: &mut ChaCha8Rng, amplitude: f64) -> Vec<f64> {
    let d = grid.dim_n + 1;
    let modes: Vec<(f64, [f64; 3], f64)> = (1..=NOISE_MODES)
        .map(|m| {
            let mut dir = [0.0; 3];
            for c in dir.iter_mut().take(d) {
                *c = rng.random_range(-1.0..1.0);
            }
            let len = dir.iter().map(|c| c * c).sum::<f64>().sqrt().max(1e-12);
            dir.iter_mut().for_each(|c| *c /= len);
            let a = rng.random_range(-1.0..1.0) / m as f64;
            let phase = rng.random_range(0.0..std::f64::consts::TAU);
            (a, dir, phase)
        })
        .collect();
    let total: f64 = modes.iter().map(|m| m.0.abs()).sum::<f64>().max(1e-12);
    (0..grid.len())
        .map(|i| {
            let p = grid.unit_vector(grid.coords(i));
            let s: f64 = modes
                .iter()
                .enumerate()
                .map(|(k, (a, dir, ph))| {
                    let proj: f64 = (0..3).map(|c| dir[c] * p[c]).sum();
                    a * ((k + 1) as f64 * proj + ph).cos()
                })
                .sum();
            amplitude * s / total
        })
        .collect()
}

/// Random admissible starts between the barriers, each solved at `t = 0`.
pub fn uniqueness_experiment(problem: &HomotopyProblem, trials: usize, seed: u64) -> DiagnosticReport {
    let mut report = DiagnosticReport::new("uniqueness", Some(seed));
    report.put("trials", trials as f64);
    report.put("lambda", problem.lambda);
    if trials == 0 {
        report.notes.push("no trials requested".into());
        return report;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (u1, u2) = (&problem.barriers.u1, &problem.barriers.u2);
    let starts: Vec<Option<Vec<f64>>> = (0..trials)
        .map(|_| {
            let s0 = rng.random_range(0.1..0.9);
            let noise = smooth_noise(&problem.grid, &mut rng, START_NOISE);
            let mut scale = 1.0;
            for _ in 0..=10 {
                let u: Vec<f64> = (0..u1.len())
                    .map(|k| u1[k] + (s0 + scale * noise[k]) * (u2[k] - u1[k]))
                    .collect();
                if problem.residual(&u, 0.0).is_ok() {
                    return Some(u);
                }
                scale *= 0.5;
            }
            None
        })
        .collect();
    let opts = NewtonOptions::default();
    let results: Vec<Option<f64>> = starts
        .par_iter()
        .map(|s| {
            let s = s.as_ref()?;
            let rep = newton_solve(problem, s, 0.0, &opts).ok()?;
            Some(
                rep.u
                    .iter()
                    .zip(&problem.u0)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max),
            )
        })
        .collect();
    let converged: Vec<f64> = results.iter().flatten().copied().collect();
    let max_dist = converged.iter().copied().fold(0.0, f64::max);
    let fraction = converged.len() as f64 / trials as f64;
    report.put("converged_fraction", fraction);
    report.put("max_distance_to_u0", max_dist);
    report.passed = fraction >= 0.9 && max_dist <= UNIQUENESS_TOL;
    report
}

/// Smallest eigenvalue of the Jacobian at `(u₀, 0)` and `c_emp = λ − μ_min`.
pub fn coercivity_check(problem: &HomotopyProblem) -> Result<DiagnosticReport> {
    let mut report = DiagnosticReport::new("coercivity", None);
    let jac = problem.linearize(&problem.u0, 0.0)?.matrix;
    let mu = min_real_eigenvalue(&jac)?;
    report.put("lambda", problem.lambda);
    report.put("mu_min", mu);
    report.put("c_emp", problem.lambda - mu);
    report.passed = mu > 0.0;
    Ok(report)
}

/// Nodal values of `w = log κ_max + λ_w log v + μ_w χ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct C2Monitor {
    /// `None` where the largest principal curvature is not positive.
    pub w: Vec<Option<f64>>,
    pub max_w: Option<f64>,
    pub undefined_nodes: Vec<usize>,
}

pub fn c2_monitor(
    amb: &AmbientManifold,
    grid: &Grid,
    u: &[f64],
    lambda_w: f64,
    mu_w: f64,
    chi: &ConvexReference,
) -> Result<C2Monitor> {
    let state = graph_quantities(amb, grid, u)?;
    let mut w = Vec::with_capacity(u.len());
    let mut undefined_nodes = Vec::new();
    for (k, node) in state.nodes.iter().enumerate() {
        let top = node.kappa.last().copied().unwrap_or(0.0);
        if top > 0.0 {
            w.push(Some(top.ln() + lambda_w * node.v.ln() + mu_w * chi.value(u[k])));
        } else {
            w.push(None);
            undefined_nodes.push(k);
        }
    }
    let max_w = w.iter().flatten().copied().reduce(f64::max);
    Ok(C2Monitor {
        w,
        max_w,
        undefined_nodes,
    })
}

/// Largest relative error of `J η` against central differences of `G`.
pub fn jacobian_fd_error(
    problem: &HomotopyProblem,
    u: &[f64],
    t: f64,
    seed: u64,
    eps: f64,
    corrupt: Option<&dyn Fn(&mut nalgebra::DMatrix<f64>)>,
) -> Result<f64> {
    let mut jac = problem.linearize(u, t)?.matrix;
    if let Some(c) = corrupt {
        c(&mut jac);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..FD_DIRECTIONS {
        let eta = DVector::from_vec(smooth_noise(&problem.grid, &mut rng, 1.0));
        let shift = |s: f64| -> Vec<f64> { u.iter().zip(eta.iter()).map(|(a, e)| a + s * e).collect() };
        let gp = problem.residual(&shift(eps), t)?;
        let gm = problem.residual(&shift(-eps), t)?;
        let fd = (gp - gm) / (2.0 * eps);
        let exact = &jac * &eta;
        let err = (&fd - &exact).amax() / exact.amax().max(f64::MIN_POSITIVE);
        worst = worst.max(err);
    }
    Ok(worst)
}

/// Finite-difference check of the assembled Jacobian on 10 smooth directions.
pub fn jacobian_fd_check(problem: &HomotopyProblem, u: &[f64], t: f64, seed: u64) -> DiagnosticReport {
    jacobian_fd_check_with(problem, u, t, seed, None)
}

/// [`jacobian_fd_check`] with an optional fault injected into the assembly.
pub fn jacobian_fd_check_with(
    problem: &HomotopyProblem,
    u: &[f64],
    t: f64,
    seed: u64,
    corrupt: Option<&dyn Fn(&mut nalgebra::DMatrix<f64>)>,
) -> DiagnosticReport {
    let mut report = DiagnosticReport::new("jacobian_fd", Some(seed));
    report.put("t", t);
    report.put("directions", FD_DIRECTIONS as f64);
    match jacobian_fd_error(problem, u, t, seed, 1e-6, corrupt) {
        Ok(err) => {
            report.put("max_relative_error", err);
            report.passed = err <= FD_TOL;
        }
        Err(e) => {
            report.passed = false;
            report.notes.push(e.to_string());
        }
    }
    report
}

/// FD error at each step size, for the truncation/round-off trade-off.
pub fn fd_sweep(problem: &HomotopyProblem, u: &[f64], t: f64, seed: u64, eps: &[f64]) -> Result<Vec<(f64, f64)>> {
    eps.iter()
        .map(|&e| Ok((e, jacobian_fd_error(problem, u, t, seed, e, None)?)))
        .collect()
}
