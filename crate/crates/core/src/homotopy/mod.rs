//! Particular problem at `t = 0` and the homotopy
//! `F(κ(u)) = t f + (1 − t) f₀` followed to `t = 1`.

mod continuation;
mod newton;

pub use continuation::{
    continue_path, u_checksum, ContinuationOptions, ContinuationState, ContinuationTrace, Control, Outcome,
    TraceStep,
};
pub use newton::{newton_solve, MonitorValues, NewtonOptions, NewtonReport, PathSystem};

use log::debug;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ambient::AmbientManifold;
use crate::barriers::BarrierPair;
use crate::curvature::{spectral_derivative, CurvatureFunction};
use crate::diagnostics::uniqueness_experiment;
use crate::dual::Dual;
use crate::error::{Error, Result};
use crate::grid::{Grid, Stencil};
use crate::hypersurface::{graph_quantities, local_geometry, to_matrix, GraphState, JetT};
use crate::rhs::RightHandSide;
use crate::tubular::LevelFoliation;

/// Number of trial offsets `τ₀ = −ε₀ 2^{−k}` tried by [`build_particular`].
const TAU_TRIALS: u32 = 60;
/// First and last penalty tried by [`estimate_lambda0`].
pub const LAMBDA_START: f64 = 8.0;
pub const LAMBDA_MAX: f64 = 65536.0;

/// Upper bounds enforced on every accepted continuation step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonitorBounds {
    /// Bound `c` on `|Du|²`.
    pub grad_cap: f64,
    /// Bound `κ̄` on every principal curvature.
    pub kappa_cap: f64,
}

/// Optional user overrides of the default [`MonitorBounds`].
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MonitorOverrides {
    pub grad_cap: Option<f64>,
    pub kappa_cap: Option<f64>,
}

/// How `τ₀` is chosen.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TauPolicy {
    /// First trial offset satisfying the nodal sandwich.
    Auto,
    /// Given offset; the sandwich margin is recorded but not enforced.
    Fixed(f64),
}

/// Starting graph `u₀ = φ(τ₀, ·)` with its nodal curvature.
#[derive(Clone, Debug, PartialEq)]
pub struct Particular {
    pub tau0: f64,
    pub u0: Vec<f64>,
    /// `F` of `u₀` at every node.
    pub f_u0: Vec<f64>,
    /// Smallest slack in `½F₀ ≤ F₀ + λ(u₀ − u₂) ≤ F(u₂)` over the nodes.
    pub sandwich_margin: f64,
}

/// Everything needed to set up the homotopy except the penalty `λ`.
#[derive(Clone, Debug)]
pub struct ProblemSketch {
    pub curvature: CurvatureFunction,
    pub rhs: RightHandSide,
    pub barriers: BarrierPair,
    pub foliation: LevelFoliation,
    pub tau_policy: TauPolicy,
    pub overrides: MonitorOverrides,
}

#[derive(Clone, Debug)]
pub struct HomotopyProblem {
    pub ambient: AmbientManifold,
    pub grid: Grid,
    pub curvature: CurvatureFunction,
    pub rhs: RightHandSide,
    pub barriers: BarrierPair,
    pub lambda: f64,
    pub tau0: f64,
    pub u0: Vec<f64>,
    pub f_u0: Vec<f64>,
    pub sandwich_margin: f64,
    pub monitors: MonitorBounds,
}

/// Residual together with the pieces it is assembled from.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub g: DVector<f64>,
    /// `f(u, x, ν)` per node.
    pub f: Vec<f64>,
    /// `f₀(u, x)` per node.
    pub f0: Vec<f64>,
    pub state: GraphState,
}

/// Coefficients of `⟨DG, η⟩ = −a^{ij} η_ij + b^i η_i + c η` at one node.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NodeCoefficients {
    pub a: [[f64; 2]; 2],
    pub b: [f64; 2],
    /// Zero-order coefficient, including the penalty `(1 − t) λ`.
    pub c: f64,
}

#[derive(Clone, Debug)]
pub struct Linearization {
    pub coefficients: Vec<NodeCoefficients>,
    pub matrix: DMatrix<f64>,
}

/// `F` at every node; inadmissible nodes are collected into one error.
fn nodal_curvature(state: &GraphState, f: &CurvatureFunction) -> Result<Vec<f64>> {
    let values: Vec<Option<f64>> = state.nodes.iter().map(|n| f.evaluate(&n.kappa).ok()).collect();
    let bad: Vec<usize> = values
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_none())
        .map(|(i, _)| i)
        .collect();
    if let Some(&first) = bad.first() {
        return Err(Error::Inadmissible {
            count: bad.len(),
            first,
            nodes: bad,
        });
    }
    Ok(values.into_iter().map(|v| v.expect("checked")).collect())
}

/// Smallest nodal slack of the sandwich for a candidate `u₀`.
fn sandwich_margin(lambda: f64, f_u0: &[f64], u0: &[f64], f_u2: &[f64], u2: &[f64]) -> f64 {
    let mut m = f64::INFINITY;
    for k in 0..u0.len() {
        let mid = f_u0[k] + lambda * (u0[k] - u2[k]);
        m = m.min(mid - 0.5 * f_u0[k]).min(f_u2[k] - mid);
    }
    m
}

/// Selects `τ₀` and returns the level graph `φ(τ₀, ·)` with its curvature.
pub fn build_particular(
    fol: &LevelFoliation,
    f: &CurvatureFunction,
    u1: &[f64],
    lambda: f64,
    policy: TauPolicy,
) -> Result<Particular> {
    if !(lambda > 0.0) {
        return Err(Error::Configuration(format!("homotopy.lambda must be positive, got {lambda}")));
    }
    let amb = &fol.ambient;
    let grid = &fol.grid;
    let f_u2 = nodal_curvature(&graph_quantities(amb, grid, &fol.u2)?, f)
        .map_err(|e| Error::ParticularSolution(format!("upper barrier is inadmissible: {e}")))?;
    let below_u1 = |u0: &[f64]| u1.iter().zip(u0).any(|(a, b)| !(a < b));
    let candidate = |tau: f64| -> Result<Particular> {
        let (u0, _) = fol.graph_at(tau)?;
        let f_u0 = nodal_curvature(&graph_quantities(amb, grid, &u0)?, f)?;
        let margin = sandwich_margin(lambda, &f_u0, &u0, &f_u2, &fol.u2);
        Ok(Particular {
            tau0: tau,
            u0,
            f_u0,
            sandwich_margin: margin,
        })
    };
    match policy {
        TauPolicy::Fixed(tau) => {
            if !(tau < 0.0 && tau >= -fol.eps0) {
                return Err(Error::Configuration(format!(
                    "homotopy.tau0 = {tau} outside [-eps0, 0) with eps0 = {}",
                    fol.eps0
                )));
            }
            let p = candidate(tau)?;
            if below_u1(&p.u0) {
                return Err(Error::ParticularSolution(format!("phi(tau0 = {tau}) is not above u1")));
            }
            Ok(p)
        }
        TauPolicy::Auto => {
            for k in 1..=TAU_TRIALS {
                let tau = -fol.eps0 * 0.5f64.powi(k as i32);
                let p = match candidate(tau) {
                    Ok(p) => p,
                    Err(e) => {
                        debug!("tau0 trial {tau}: {e}");
                        continue;
                    }
                };
                if p.sandwich_margin >= 0.0 && !below_u1(&p.u0) {
                    debug!("tau0 = {tau}, sandwich margin {}", p.sandwich_margin);
                    return Ok(p);
                }
            }
            Err(Error::ParticularSolution(format!(
                "lambda = {lambda} is too large for eps0 = {}",
                fol.eps0
            )))
        }
    }
}

impl ProblemSketch {
    /// Builds the particular solution and monitors for a given penalty.
    pub fn with_lambda(&self, lambda: f64) -> Result<HomotopyProblem> {
        let fol = &self.foliation;
        let p = build_particular(fol, &self.curvature, &self.barriers.u1, lambda, self.tau_policy)?;
        let s1 = graph_quantities(&fol.ambient, &fol.grid, &self.barriers.u1)?;
        let s2 = graph_quantities(&fol.ambient, &fol.grid, &self.barriers.u2)?;
        let grad = s1.max_graddsq().max(s2.max_graddsq());
        let kappa = s1.max_kappa().max(s2.max_kappa());
        let monitors = MonitorBounds {
            grad_cap: self.overrides.grad_cap.unwrap_or(4.0 * (grad + 1.0)),
            kappa_cap: self
                .overrides
                .kappa_cap
                .unwrap_or(if kappa > 0.0 { 10.0 * kappa } else { 10.0 }),
        };
        Ok(HomotopyProblem {
            ambient: fol.ambient.clone(),
            grid: fol.grid.clone(),
            curvature: self.curvature.clone(),
            rhs: self.rhs.clone(),
            barriers: self.barriers.clone(),
            lambda,
            tau0: p.tau0,
            u0: p.u0,
            f_u0: p.f_u0,
            sandwich_margin: p.sandwich_margin,
            monitors,
        })
    }
}

/// One trial of the `λ₀` doubling search.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaAttempt {
    pub lambda: f64,
    pub min_eigenvalue: f64,
    pub uniqueness_passed: bool,
}

#[derive(Clone, Debug)]
pub struct Lambda0Estimate {
    pub lambda0: f64,
    pub problem: HomotopyProblem,
    pub attempts: Vec<LambdaAttempt>,
}

/// Smallest real part among the eigenvalues of a square matrix.
pub fn min_real_eigenvalue(m: &DMatrix<f64>) -> Result<f64> {
    let fm = faer::Mat::<f64>::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)]);
    let eig = fm
        .eigenvalues()
        .map_err(|e| Error::Linear(format!("eigenvalue solver failed: {e:?}")))?;
    Ok(eig.iter().map(|z| z.re).fold(f64::INFINITY, f64::min))
}

/// Smallest `λ ∈ {8, 16, …, 2¹⁶}` whose starting point is a regular,
/// empirically unique solution of the `t = 0` problem.
pub fn estimate_lambda0(sketch: &ProblemSketch, trials: usize, seed: u64) -> Result<Lambda0Estimate> {
    let mut attempts = Vec::new();
    let mut lambda = LAMBDA_START;
    while lambda <= LAMBDA_MAX {
        let problem = sketch.with_lambda(lambda)?;
        let jac = problem.linearize(&problem.u0, 0.0)?.matrix;
        let min_eigenvalue = min_real_eigenvalue(&jac)?;
        let uniqueness_passed = min_eigenvalue > 0.0 && uniqueness_experiment(&problem, trials, seed).passed;
        debug!("lambda {lambda}: min eigenvalue {min_eigenvalue:e}, unique {uniqueness_passed}");
        attempts.push(LambdaAttempt {
            lambda,
            min_eigenvalue,
            uniqueness_passed,
        });
        if uniqueness_passed {
            return Ok(Lambda0Estimate {
                lambda0: lambda,
                problem,
                attempts,
            });
        }
        lambda *= 2.0;
    }
    Err(Error::Configuration(format!(
        "no lambda up to {LAMBDA_MAX} gives a regular unique starting point"
    )))
}

/// Adds `coef · D` for a difference-form stencil centred at `k`.
fn add_stencil(row: &mut Vec<(usize, f64)>, st: &Stencil, coef: f64, k: usize) {
    if coef == 0.0 {
        return;
    }
    let mut sum = 0.0;
    for &(i, w) in st {
        if i != k {
            row.push((i, coef * w));
            sum += w;
        }
    }
    row.push((k, -coef * sum));
}

fn min_eig_sym2(n: usize, a: &[[f64; 2]; 2]) -> f64 {
    if n == 1 {
        return a[0][0];
    }
    let m = 0.5 * (a[0][0] + a[1][1]);
    let d = 0.5 * (a[0][0] - a[1][1]);
    m - (d * d + a[0][1] * a[0][1]).sqrt()
}

impl HomotopyProblem {
    pub fn len(&self) -> usize {
        self.u0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u0.is_empty()
    }

    /// `f₀(x⁰, x_k) = F(u₀)_k + λ(u₀_k − x⁰)`.
    pub fn f0(&self, k: usize, x0: f64) -> f64 {
        self.f_u0[k] + self.lambda * (self.u0[k] - x0)
    }

    /// `G(u; t) = F(κ(u)) − t f(u, x, ν) − (1 − t) f₀(u, x)` with its parts.
    pub fn evaluate(&self, u: &[f64], t: f64) -> Result<Evaluation> {
        let state = graph_quantities(&self.ambient, &self.grid, u)?;
        let fk = nodal_curvature(&state, &self.curvature)?;
        let n = u.len();
        let mut f = Vec::with_capacity(n);
        let mut f0 = Vec::with_capacity(n);
        let mut g = DVector::zeros(n);
        for k in 0..n {
            let fv = self.rhs.eval(u[k], self.grid.coords(k), state.nodes[k].nu);
            let f0v = self.f0(k, u[k]);
            g[k] = fk[k] - t * fv - (1.0 - t) * f0v;
            f.push(fv);
            f0.push(f0v);
        }
        Ok(Evaluation { g, f, f0, state })
    }

    pub fn residual(&self, u: &[f64], t: f64) -> Result<DVector<f64>> {
        Ok(self.evaluate(u, t)?.g)
    }

    /// Jet derivatives of `G_k` in the slots `(u, u_1, u_2, u_11, u_12 + u_21, u_22)`.
    fn node_derivatives(&self, u: &[f64], k: usize, t: f64) -> Result<[f64; 6]> {
        type D = Dual<6>;
        let n = self.ambient.dim_n;
        let j = self.grid.jet(u, k);
        let var = |v: f64, s: usize, used: bool| if used { D::variable(v, s) } else { D::constant(v) };
        let two = n == 2;
        let jet = JetT {
            u: D::variable(j.u, 0),
            du: [D::variable(j.du[0], 1), var(j.du[1], 2, two)],
            ddu: [
                [D::variable(j.ddu[0][0], 3), var(j.ddu[0][1], 4, two)],
                [var(j.ddu[1][0], 4, two), var(j.ddu[1][1], 5, two)],
            ],
        };
        let x = self.grid.coords(k);
        let lg = local_geometry(&self.ambient, x, &jet)?;
        let re = |m: &[[D; 2]; 2]| [[m[0][0].re, m[0][1].re], [m[1][0].re, m[1][1].re]];
        let sd = spectral_derivative(
            &self.curvature,
            &to_matrix(n, &re(&lg.h)),
            &to_matrix(n, &re(&lg.g)),
        )?;
        let fv = self.rhs.eval(jet.u, x, lg.nu);
        let mut out = [0.0; 6];
        for (s, o) in out.iter_mut().enumerate() {
            let mut df = 0.0;
            for a in 0..n {
                for b in 0..n {
                    df += sd.fh[(a, b)] * lg.h[a][b].eps[s] - sd.fg[(a, b)] * lg.g[a][b].eps[s];
                }
            }
            *o = df - t * fv.eps[s];
        }
        out[0] += (1.0 - t) * self.lambda;
        Ok(out)
    }

    /// Nodal coefficients and the assembled Jacobian `∂G/∂u`.
    pub fn linearize(&self, u: &[f64], t: f64) -> Result<Linearization> {
        let n = self.ambient.dim_n;
        let size = u.len();
        let rows = (0..size)
            .into_par_iter()
            .map(|k| {
                let d = self.node_derivatives(u, k, t)?;
                let coef = if n == 1 {
                    NodeCoefficients {
                        a: [[-d[3], 0.0], [0.0, 0.0]],
                        b: [d[1], 0.0],
                        c: d[0],
                    }
                } else {
                    NodeCoefficients {
                        a: [[-d[3], -0.5 * d[4]], [-0.5 * d[4], -d[5]]],
                        b: [d[1], d[2]],
                        c: d[0],
                    }
                };
                let min_eig = min_eig_sym2(n, &coef.a);
                if !(min_eig > 0.0) {
                    return Err(Error::Ellipticity { node: k, min_eig });
                }
                let st = self.grid.stencil(k);
                let mut row = vec![(k, d[0])];
                add_stencil(&mut row, &st.d1[0], d[1], k);
                add_stencil(&mut row, &st.d2[0][0], d[3], k);
                if n == 2 {
                    add_stencil(&mut row, &st.d1[1], d[2], k);
                    add_stencil(&mut row, &st.d2[0][1], d[4], k);
                    add_stencil(&mut row, &st.d2[1][1], d[5], k);
                }
                Ok((coef, row))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut matrix = DMatrix::zeros(size, size);
        let mut coefficients = Vec::with_capacity(size);
        for (k, (coef, row)) in rows.into_iter().enumerate() {
            for (i, w) in row {
                matrix[(k, i)] += w;
            }
            coefficients.push(coef);
        }
        Ok(Linearization { coefficients, matrix })
    }

    /// Checks the barrier sandwich and the gradient and curvature caps.
    pub fn check_monitors(&self, u: &[f64], t: f64) -> Result<MonitorValues> {
        let state = graph_quantities(&self.ambient, &self.grid, u)?;
        let gap = (0..u.len())
            .map(|k| (u[k] - self.barriers.u1[k]).min(self.barriers.u2[k] - u[k]))
            .fold(f64::INFINITY, f64::min);
        let values = MonitorValues {
            min_barrier_gap: gap,
            max_graddsq: state.max_graddsq(),
            max_kappa: state.max_kappa(),
        };
        if !(gap > 0.0) {
            return Err(Error::Monitor {
                bound: "barrier sandwich u1 < u < u2",
                t,
                value: gap,
                limit: 0.0,
            });
        }
        if !(values.max_graddsq < self.monitors.grad_cap) {
            return Err(Error::Monitor {
                bound: "gradient bound |Du|^2 < c",
                t,
                value: values.max_graddsq,
                limit: self.monitors.grad_cap,
            });
        }
        if !(values.max_kappa < self.monitors.kappa_cap) {
            return Err(Error::Monitor {
                bound: "curvature cap kappa_i < kappa_bar",
                t,
                value: values.max_kappa,
                limit: self.monitors.kappa_cap,
            });
        }
        Ok(values)
    }
}

impl PathSystem for HomotopyProblem {
    fn dim(&self) -> usize {
        self.len()
    }

    fn residual(&self, u: &[f64], t: f64) -> Result<DVector<f64>> {
        HomotopyProblem::residual(self, u, t)
    }

    fn jacobian(&self, u: &[f64], t: f64) -> Result<DMatrix<f64>> {
        Ok(self.linearize(u, t)?.matrix)
    }

    fn dt_residual(&self, u: &[f64], _t: f64) -> Result<DVector<f64>> {
        let e = self.evaluate(u, 0.0)?;
        Ok(DVector::from_iterator(
            u.len(),
            e.f0.iter().zip(&e.f).map(|(a, b)| a - b),
        ))
    }

    fn monitors(&self, u: &[f64], t: f64) -> Result<MonitorValues> {
        self.check_monitors(u, t)
    }
}
