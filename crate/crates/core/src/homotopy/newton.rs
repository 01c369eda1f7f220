//! Damped Newton iteration on a parameterized nodal system `G(u; t) = 0`.

use log::debug;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Monitor values of an accepted state.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MonitorValues {
    pub min_barrier_gap: f64,
    pub max_graddsq: f64,
    pub max_kappa: f64,
}

/// A square nodal system depending on one parameter.
pub trait PathSystem: Sync {
    fn dim(&self) -> usize;
    fn residual(&self, u: &[f64], t: f64) -> Result<DVector<f64>>;
    fn jacobian(&self, u: &[f64], t: f64) -> Result<DMatrix<f64>>;
    /// `∂G/∂t`
    fn dt_residual(&self, u: &[f64], t: f64) -> Result<DVector<f64>>;
    /// Checks the a priori bounds on an accepted state.
    fn monitors(&self, _u: &[f64], _t: f64) -> Result<MonitorValues> {
        Ok(MonitorValues::default())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 50,
            max_halvings: 30,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NewtonReport {
    pub u: Vec<f64>,
    pub iterations: usize,
    /// Whether any iteration took a shortened step.
    pub damped: bool,
    /// Largest ratio `‖δ_{k+1}‖_∞ / ‖δ_k‖_∞` of consecutive Newton steps.
    pub contraction: f64,
    pub residual: f64,
    /// `‖G‖_∞` before each iteration and at the end.
    pub history: Vec<f64>,
}

/// Residuals below this are treated as round-off when fitting the tail.
const TAIL_FLOOR: f64 = 1e-12;

impl NewtonReport {
    /// Largest `r_{k+1} / r_k²` over the last three residual norms.
    pub fn tail_constant(&self) -> Option<f64> {
        let h = &self.history;
        let start = h.len().saturating_sub(3);
        h[start..]
            .windows(2)
            .filter(|w| w[0] > 0.0 && w[1] > TAIL_FLOOR)
            .map(|w| w[1] / (w[0] * w[0]))
            .reduce(f64::max)
    }
}

/// Failures that reject a trial point instead of aborting the solve.
pub(crate) fn is_recoverable(e: &Error) -> bool {
    matches!(
        e,
        Error::Domain(_)
            | Error::ConeViolation { .. }
            | Error::Inadmissible { .. }
            | Error::Metric(_)
            | Error::IllConditioned(_)
            | Error::Linear(_)
            | Error::NonConvergence(_)
    )
}

pub(crate) fn solve(j: DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    let x = j
        .lu()
        .solve(rhs)
        .ok_or_else(|| Error::Linear("singular Jacobian".into()))?;
    if x.iter().all(|v| v.is_finite()) {
        Ok(x)
    } else {
        Err(Error::Linear("non-finite Newton step".into()))
    }
}

/// Newton's method with backtracking on `‖G‖_∞`.
///
/// A trial point is rejected when the residual cannot be evaluated (a node
/// leaves the cone or the chart) or does not decrease sufficiently.
pub fn newton_solve<S: PathSystem + ?Sized>(
    sys: &S,
    u_init: &[f64],
    t: f64,
    opts: &NewtonOptions,
) -> Result<NewtonReport> {
    let mut u = u_init.to_vec();
    let mut r = sys.residual(&u, t)?;
    let mut norm = r.amax();
    let mut history = vec![norm];
    let mut iterations = 0;
    let mut damped = false;
    let mut contraction: f64 = 0.0;
    let mut last_step = None;
    while !(norm <= opts.tol) {
        if !norm.is_finite() {
            return Err(Error::NonConvergence(format!("non-finite residual at t = {t}")));
        }
        if iterations >= opts.max_iter {
            return Err(Error::NonConvergence(format!(
                "{iterations} iterations at t = {t}, residual {norm:e}"
            )));
        }
        let delta = solve(sys.jacobian(&u, t)?, &(-&r))?;
        let size = delta.amax();
        if let Some(prev) = last_step {
            contraction = contraction.max(size / prev);
        }
        last_step = Some(size);
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..=opts.max_halvings {
            let cand: Vec<f64> = u.iter().zip(delta.iter()).map(|(a, d)| a + alpha * d).collect();
            match sys.residual(&cand, t) {
                Ok(rc) => {
                    let nc = rc.amax();
                    if nc < (1.0 - 1e-4 * alpha) * norm {
                        accepted = Some((cand, rc, nc));
                        break;
                    }
                }
                Err(e) if is_recoverable(&e) => {}
                Err(e) => return Err(e),
            }
            alpha *= 0.5;
        }
        damped |= alpha < 1.0;
        let Some((cand, rc, nc)) = accepted else {
            return Err(Error::NonConvergence(format!(
                "damping exhausted at t = {t}, residual {norm:e}"
            )));
        };
        u = cand;
        r = rc;
        norm = nc;
        history.push(norm);
        iterations += 1;
    }
    debug!("newton t = {t}: {iterations} iterations, residual {norm:e}");
    Ok(NewtonReport {
        u,
        iterations,
        damped,
        contraction,
        residual: norm,
        history,
    })
}
