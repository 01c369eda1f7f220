//! Adaptive natural-parameter continuation in `t` with a pseudo-arclength
//! fallback at folds.

use log::{debug, info};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::newton::{is_recoverable, newton_solve, solve, MonitorValues, NewtonOptions, NewtonReport, PathSystem};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuationOptions {
    pub dt0: f64,
    pub min_dt: f64,
    /// Step growth after two consecutive successes.
    pub growth: f64,
    /// Newton tolerance on each step.
    pub tol: f64,
    /// Tolerance of the final solve at `t = 1`.
    pub final_tol: f64,
    /// Cap on step attempts, natural and arclength together.
    pub max_steps: usize,
    /// Range the arclength tracker may visit.
    pub t_min: f64,
    pub t_max: f64,
    /// Largest arclength step.
    pub max_ds: f64,
    /// Natural steps whose corrector needs more iterations are rejected.
    pub max_step_iters: usize,
    /// Natural steps whose corrector contracts worse than this are rejected.
    pub max_contraction: f64,
}

impl Default for ContinuationOptions {
    fn default() -> Self {
        Self {
            dt0: 0.1,
            min_dt: 1e-4,
            growth: 1.5,
            tol: 1e-10,
            final_tol: 1e-10,
            max_steps: 2000,
            t_min: -1e-3,
            t_max: 1.0 + 1e-3,
            max_ds: 0.5,
            max_step_iters: 12,
            max_contraction: 0.25,
        }
    }
}

/// One accepted continuation step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub t: f64,
    pub dt: f64,
    pub iters: usize,
    pub residual: f64,
    pub min_barrier_gap: f64,
    pub max_graddsq: f64,
    pub max_kappa: f64,
    pub u_checksum: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ContinuationTrace {
    /// Accepted steps with strictly increasing `t`.
    pub steps: Vec<TraceStep>,
    /// Every accepted pseudo-arclength step.
    pub fold_steps: Vec<TraceStep>,
    /// Number of switches into arclength mode.
    pub arclength_entries: usize,
    /// Largest `r_{k+1} / r_k²` seen in a Newton tail.
    pub max_tail_constant: Option<f64>,
}

impl ContinuationTrace {
    pub const COLUMNS: &'static str = "t dt iters residual monitor_min_barrier_gap max_graddsq max_kappa u_checksum";

    /// One line per accepted step, fixed column order.
    pub fn to_table(&self) -> String {
        let mut out = String::from(Self::COLUMNS);
        out.push('\n');
        for s in &self.steps {
            out.push_str(&format!(
                "{:.17e} {:.17e} {} {:.17e} {:.17e} {:.17e} {:.17e} {}\n",
                s.t, s.dt, s.iters, s.residual, s.min_barrier_gap, s.max_graddsq, s.max_kappa, s.u_checksum
            ));
        }
        out
    }

    fn last_t(&self) -> f64 {
        self.steps.last().map_or(0.0, |s| s.t)
    }

    fn note_tail(&mut self, rep: &NewtonReport) {
        if let Some(c) = rep.tail_constant() {
            self.max_tail_constant = Some(self.max_tail_constant.map_or(c, |m| m.max(c)));
        }
    }
}

/// Everything the remainder of a run depends on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuationState {
    pub u: Vec<f64>,
    pub t: f64,
    pub dt: f64,
    pub successes: usize,
    pub attempts: usize,
    pub trace: ContinuationTrace,
}

impl ContinuationState {
    pub fn start(u0: Vec<f64>, opts: &ContinuationOptions) -> Self {
        Self {
            u: u0,
            t: 0.0,
            dt: opts.dt0,
            successes: 0,
            attempts: 0,
            trace: ContinuationTrace::default(),
        }
    }
}

/// Returned by the step hook.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Control {
    Continue,
    Halt,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Outcome {
    Completed {
        u: Vec<f64>,
        residual: f64,
        trace: ContinuationTrace,
    },
    Halted(ContinuationState),
}

/// First 8 bytes of the SHA-256 of the little-endian bytes of `u`, in hex.
pub fn u_checksum(u: &[f64]) -> String {
    let mut h = Sha256::new();
    for v in u {
        h.update(v.to_le_bytes());
    }
    h.finalize()[..8].iter().map(|b| format!("{b:02x}")).collect()
}

fn step_record(t: f64, dt: f64, rep: &NewtonReport, mon: &MonitorValues) -> TraceStep {
    TraceStep {
        t,
        dt,
        iters: rep.iterations,
        residual: rep.residual,
        min_barrier_gap: mon.min_barrier_gap,
        max_graddsq: mon.max_graddsq,
        max_kappa: mon.max_kappa,
        u_checksum: u_checksum(&rep.u),
    }
}

fn count_attempt(state: &mut ContinuationState, opts: &ContinuationOptions) -> Result<()> {
    state.attempts += 1;
    if state.attempts > opts.max_steps {
        return Err(Error::Path(format!(
            "step budget of {} exhausted at t = {}",
            opts.max_steps, state.t
        )));
    }
    Ok(())
}

/// Tangent predictor `u + (t₁ − t₀) u̇` with `J u̇ = −∂G/∂t`; falls back to `u`.
fn predict<S: PathSystem + ?Sized>(sys: &S, u: &[f64], t0: f64, t1: f64) -> Vec<f64> {
    let tangent = || -> Result<DVector<f64>> {
        let gt = sys.dt_residual(u, t0)?;
        solve(sys.jacobian(u, t0)?, &(-gt))
    };
    match tangent() {
        Ok(z) => {
            let p: Vec<f64> = u.iter().zip(z.iter()).map(|(a, b)| a + (t1 - t0) * b).collect();
            if sys.residual(&p, t1).is_ok() {
                p
            } else {
                u.to_vec()
            }
        }
        Err(_) => u.to_vec(),
    }
}

/// Follows the path from `state` to `t = 1`.
///
/// `hook` runs after every accepted natural step and may halt the run,
/// returning a state from which [`continue_path`] resumes bitwise
/// identically.
pub fn continue_path<S: PathSystem + ?Sized>(
    sys: &S,
    mut state: ContinuationState,
    opts: &ContinuationOptions,
    hook: &mut dyn FnMut(&ContinuationState) -> Control,
) -> Result<Outcome> {
    let newton = NewtonOptions {
        tol: opts.tol,
        ..NewtonOptions::default()
    };
    if state.trace.steps.is_empty() {
        sys.monitors(&state.u, state.t)?;
    }
    while state.t < 1.0 {
        count_attempt(&mut state, opts)?;
        let t_new = if state.t + state.dt >= 1.0 { 1.0 } else { state.t + state.dt };
        let pred = predict(sys, &state.u, state.t, t_new);
        // a damped or slowly contracting corrector may have left the branch
        let attempt = newton_solve(sys, &pred, t_new, &newton).and_then(|rep| {
            if rep.damped || rep.iterations > opts.max_step_iters || rep.contraction > opts.max_contraction {
                Err(Error::NonConvergence(format!(
                    "corrector at t = {t_new}: {} iterations, contraction {:.3}, damped {}",
                    rep.iterations, rep.contraction, rep.damped
                )))
            } else {
                Ok(rep)
            }
        });
        match attempt {
            Ok(rep) => {
                let mon = sys.monitors(&rep.u, t_new)?;
                state.trace.note_tail(&rep);
                state.trace.steps.push(step_record(t_new, t_new - state.t, &rep, &mon));
                info!("t = {t_new:.6} dt = {:.3e} iters = {} residual = {:.3e}", t_new - state.t, rep.iterations, rep.residual);
                state.u = rep.u;
                state.t = t_new;
                state.successes += 1;
                if state.successes >= 2 {
                    state.dt *= opts.growth;
                    state.successes = 0;
                }
                if hook(&state) == Control::Halt {
                    return Ok(Outcome::Halted(state));
                }
            }
            Err(e) if is_recoverable(&e) => {
                debug!("step to t = {t_new} rejected: {e}");
                state.successes = 0;
                state.dt *= 0.5;
                if state.dt < opts.min_dt {
                    arclength(sys, &mut state, opts, &newton)?;
                }
            }
            Err(e) => return Err(e),
        }
    }
    let polish = NewtonOptions {
        tol: opts.final_tol,
        ..newton
    };
    let rep = newton_solve(sys, &state.u, 1.0, &polish)?;
    let (mut u, mut residual) = (rep.u, rep.residual);
    // one more full Newton step, kept only if it does not raise the residual
    let extra = sys
        .jacobian(&u, 1.0)
        .and_then(|j| solve(j, &(-sys.residual(&u, 1.0)?)))
        .ok()
        .map(|d| u.iter().zip(d.iter()).map(|(a, b)| a + b).collect::<Vec<f64>>());
    if let Some(cand) = extra {
        if let Ok(r) = sys.residual(&cand, 1.0) {
            if r.amax() <= residual {
                residual = r.amax();
                u = cand;
            }
        }
    }
    sys.monitors(&u, 1.0)?;
    Ok(Outcome::Completed {
        u,
        residual,
        trace: state.trace,
    })
}

/// Bordered matrix `[J ∂G/∂t; w p_uᵀ p_t]` for the weighted product
/// `⟨a, b⟩ = (a_u · b_u)/N + a_t b_t`.
fn bordered<S: PathSystem + ?Sized>(sys: &S, y: &DVector<f64>, p: &DVector<f64>) -> Result<DMatrix<f64>> {
    let n = sys.dim();
    let u = &y.as_slice()[..n];
    let t = y[n];
    let j = sys.jacobian(u, t)?;
    let gt = sys.dt_residual(u, t)?;
    let w = 1.0 / n as f64;
    let mut m = DMatrix::zeros(n + 1, n + 1);
    m.view_mut((0, 0), (n, n)).copy_from(&j);
    m.view_mut((0, n), (n, 1)).copy_from(&gt);
    for i in 0..n {
        m[(n, i)] = w * p[i];
    }
    m[(n, n)] = p[n];
    Ok(m)
}

fn weighted_norm(z: &DVector<f64>) -> f64 {
    let n = z.len() - 1;
    (z.rows(0, n).norm_squared() / n as f64 + z[n] * z[n]).sqrt()
}

/// Unit tangent at `y`, oriented along `prev`.
fn tangent<S: PathSystem + ?Sized>(sys: &S, y: &DVector<f64>, prev: &DVector<f64>) -> Result<DVector<f64>> {
    let n = sys.dim();
    let mut rhs = DVector::zeros(n + 1);
    rhs[n] = 1.0;
    let z = solve(bordered(sys, y, prev)?, &rhs)?;
    Ok(&z / weighted_norm(&z))
}

/// Newton on `G(y) = 0`, `⟨p, y − y_pred⟩ = 0`.
fn correct<S: PathSystem + ?Sized>(
    sys: &S,
    y_pred: &DVector<f64>,
    p: &DVector<f64>,
    opts: &NewtonOptions,
) -> Result<NewtonReport> {
    let n = sys.dim();
    let w = 1.0 / n as f64;
    let full = |y: &DVector<f64>| -> Result<DVector<f64>> {
        let g = sys.residual(&y.as_slice()[..n], y[n])?;
        let d = y - y_pred;
        let c = w * p.rows(0, n).dot(&d.rows(0, n)) + p[n] * d[n];
        let mut out = DVector::zeros(n + 1);
        out.rows_mut(0, n).copy_from(&g);
        out[n] = c;
        Ok(out)
    };
    let mut y = y_pred.clone();
    let mut r = full(&y)?;
    let mut norm = r.amax();
    let mut history = vec![norm];
    let mut iterations = 0;
    let mut damped = false;
    while !(norm <= opts.tol) {
        if iterations >= opts.max_iter || !norm.is_finite() {
            return Err(Error::NonConvergence(format!("arclength corrector stalled at {norm:e}")));
        }
        let delta = solve(bordered(sys, &y, p)?, &(-&r))?;
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..=opts.max_halvings {
            let cand = &y + &delta * alpha;
            match full(&cand) {
                Ok(rc) if rc.amax() < (1.0 - 1e-4 * alpha) * norm => {
                    accepted = Some((cand, rc));
                    break;
                }
                Ok(_) => {}
                Err(e) if is_recoverable(&e) => {}
                Err(e) => return Err(e),
            }
            alpha *= 0.5;
        }
        damped |= alpha < 1.0;
        let Some((cand, rc)) = accepted else {
            return Err(Error::NonConvergence("arclength damping exhausted".into()));
        };
        y = cand;
        norm = rc.amax();
        r = rc;
        history.push(norm);
        iterations += 1;
    }
    Ok(NewtonReport {
        u: y.as_slice().to_vec(),
        iterations,
        damped,
        contraction: 0.0,
        residual: norm,
        history,
    })
}

/// Pseudo-arclength tracking from the last accepted state until `t`
/// resumes increasing past the point where natural stepping failed.
fn arclength<S: PathSystem + ?Sized>(
    sys: &S,
    state: &mut ContinuationState,
    opts: &ContinuationOptions,
    newton: &NewtonOptions,
) -> Result<()> {
    let n = sys.dim();
    let t_nat = state.t;
    state.trace.arclength_entries += 1;
    info!("natural stepping stalled at t = {t_nat}; switching to arclength");
    let mut y = DVector::from_iterator(n + 1, state.u.iter().copied().chain([state.t]));
    let mut e_t = DVector::zeros(n + 1);
    e_t[n] = 1.0;
    let mut tan = tangent(sys, &y, &e_t).map_err(|e| Error::Path(format!("no tangent at t = {t_nat}: {e}")))?;
    let mut ds = opts.dt0;
    let mut successes = 0;
    loop {
        count_attempt(state, opts)?;
        let pred = &y + &tan * ds;
        let step = correct(sys, &pred, &tan, newton).and_then(|rep| {
            let t = rep.u[n];
            if t < opts.t_min || t > opts.t_max {
                return Err(Error::NonConvergence(format!("t = {t} outside the tracking range")));
            }
            let yn = DVector::from_column_slice(&rep.u);
            let tn = tangent(sys, &yn, &tan)?;
            Ok((rep, yn, tn))
        });
        let (mut rep, yn, tn) = match step {
            Ok(s) => s,
            Err(e) if is_recoverable(&e) => {
                successes = 0;
                ds *= 0.5;
                if ds < opts.min_dt {
                    return Err(Error::Path(format!(
                        "arclength step below {} near t = {} ({e})",
                        opts.min_dt, y[n]
                    )));
                }
                continue;
            }
            Err(e) => return Err(e),
        };
        let t = yn[n];
        let u = yn.as_slice()[..n].to_vec();
        let mon = sys.monitors(&u, t)?;
        rep.u = u.clone();
        let record = step_record(t, ds, &rep, &mon);
        state.trace.fold_steps.push(record.clone());
        state.trace.note_tail(&rep);
        debug!("arclength t = {t:.6} ds = {ds:.3e} tdot = {:.3e}", tn[n]);
        if t >= 1.0 {
            let fin = newton_solve(sys, &u, 1.0, newton)?;
            let mon = sys.monitors(&fin.u, 1.0)?;
            let last = state.trace.last_t();
            state.trace.steps.push(step_record(1.0, 1.0 - last, &fin, &mon));
            state.u = fin.u;
            state.t = 1.0;
            return Ok(());
        }
        let high = state.trace.last_t().max(t_nat);
        if t > high {
            let mut r = record;
            r.dt = t - state.trace.last_t();
            state.trace.steps.push(r);
        }
        if tn[n] > 0.0 && t > high {
            info!("path turned; resuming natural stepping at t = {t}");
            state.u = u;
            state.t = t;
            state.dt = (ds * tn[n]).max(opts.min_dt);
            state.successes = 0;
            return Ok(());
        }
        y = yn;
        tan = tn;
        successes += 1;
        if successes >= 2 {
            ds = (ds * opts.growth).min(opts.max_ds);
            successes = 0;
        }
    }
}
