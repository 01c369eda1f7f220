//! Foliation of a neighbourhood of the upper barrier by level graphs at
//! signed distance `τ ∈ [−ε₀, 0]`.
//!
//! Every node of `M₂` is moved along the inward unit-normal geodesic by an
//! RK4 integration of the geodesic equation. The resulting point cloud is
//! pulled back to graph form over the grid by inverting the footprint map
//! with cubic interpolation.

use log::debug;
use rayon::prelude::*;

use crate::ambient::AmbientManifold;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::hypersurface::graph_quantities;

/// RK4 substeps per level spacing.
const SUBSTEPS: usize = 64;
/// Maximum halvings of `ε₀` in [`build_foliation_adaptive`].
pub const MAX_HALVINGS: usize = 6;

#[derive(Clone, Debug)]
pub struct LevelFoliation {
    pub ambient: AmbientManifold,
    pub grid: Grid,
    pub u2: Vec<f64>,
    pub eps0: f64,
    /// `τ_l = −ε₀ l / (n_levels − 1)`, starting at `0`.
    pub taus: Vec<f64>,
    /// `φ(τ_l, ·)` per level.
    pub phi: Vec<Vec<f64>>,
    /// `∂φ/∂τ` per level.
    pub phi_dot: Vec<Vec<f64>>,
    /// Unit normal `ν^α` of `M₂` per node.
    normals: Vec<[f64; 3]>,
}

/// Empirical constants of the foliation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FoliationReport {
    pub c1: f64,
    pub c2: f64,
    pub min_phi_dot: f64,
    pub max_phi_dot: f64,
}

fn foliation_error(tau: f64, reason: impl Into<String>) -> Error {
    Error::Foliation {
        tau,
        reason: reason.into(),
    }
}

/// Integrates the geodesic starting at `x` with velocity `vel` over the
/// parameter interval `[0, tau]` using `steps` RK4 steps.
fn geodesic(
    amb: &AmbientManifold,
    mut x: [f64; 3],
    mut vel: [f64; 3],
    tau: f64,
    steps: usize,
) -> Result<[f64; 3]> {
    let d = amb.dim_n + 1;
    let h = tau / steps as f64;
    let accel = |x: &[f64; 3], v: &[f64; 3]| -> Result<[f64; 3]> {
        let c = amb
            .ambient_christoffels(x[0], &x[1..d])
            .map_err(|e| foliation_error(tau, format!("geodesic left the chart: {e}")))?;
        let mut a = [0.0; 3];
        for (al, slot) in a.iter_mut().enumerate().take(d) {
            let mut s = 0.0;
            for b in 0..d {
                for g in 0..d {
                    s += c.gamma[al][b][g] * v[b] * v[g];
                }
            }
            *slot = -s;
        }
        Ok(a)
    };
    let add = |a: &[f64; 3], b: &[f64; 3], s: f64| [a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2]];
    for _ in 0..steps {
        let k1x = vel;
        let k1v = accel(&x, &vel)?;
        let x2 = add(&x, &k1x, 0.5 * h);
        let v2 = add(&vel, &k1v, 0.5 * h);
        let k2v = accel(&x2, &v2)?;
        let x3 = add(&x, &v2, 0.5 * h);
        let v3 = add(&vel, &k2v, 0.5 * h);
        let k3v = accel(&x3, &v3)?;
        let x4 = add(&x, &v3, h);
        let v4 = add(&vel, &k3v, h);
        let k4v = accel(&x4, &v4)?;
        for k in 0..d {
            x[k] += h / 6.0 * (k1x[k] + 2.0 * v2[k] + 2.0 * v3[k] + v4[k]);
            vel[k] += h / 6.0 * (k1v[k] + 2.0 * k2v[k] + 2.0 * k3v[k] + k4v[k]);
        }
    }
    Ok(x)
}

fn wrap_angle(a: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let r = a.rem_euclid(two_pi);
    if r > std::f64::consts::PI {
        r - two_pi
    } else {
        r
    }
}

/// Resamples the moved point cloud `(x0_i, y_i)` onto the grid nodes.
fn resample(grid: &Grid, tau: f64, x0: &[f64], foot: &[Vec<f64>]) -> Result<Vec<f64>> {
    let n = grid.len();
    if grid.dim_n == 1 {
        let disp: Vec<f64> = (0..n)
            .map(|i| wrap_angle(foot[i][0] - grid.coords(i)[0]))
            .collect();
        // footprints must stay cyclically ordered
        let h = grid.h_theta();
        for i in 0..n {
            let j = (i + 1) % n;
            if h + disp[j] - disp[i] <= 0.0 {
                return Err(foliation_error(
                    tau,
                    format!("normal geodesics cross between nodes {i} and {j}"),
                ));
            }
        }
        let reach = disp.iter().fold(0.0f64, |m, d| m.max(d.abs())) + 2.0 * h;
        let mut out = Vec::with_capacity(n);
        for k in 0..n {
            // footprint s + d(s) is increasing: bracket and bisect
            let target = grid.coords(k)[0];
            let f = |s: f64| s + grid.interpolate(&disp, &[s.rem_euclid(2.0 * std::f64::consts::PI)]) - target;
            let (mut lo, mut hi) = (target - reach, target + reach);
            if !(f(lo) < 0.0 && f(hi) > 0.0) {
                return Err(foliation_error(tau, "footprint inversion failed to bracket"));
            }
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if f(mid) < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let s = 0.5 * (lo + hi);
            out.push(grid.interpolate(x0, &[s.rem_euclid(2.0 * std::f64::consts::PI)]));
        }
        Ok(out)
    } else {
        let base: Vec<[f64; 3]> = (0..n).map(|i| grid.unit_vector(grid.coords(i))).collect();
        let moved: Vec<[f64; 3]> = (0..n).map(|i| grid.unit_vector(&foot[i])).collect();
        let triple = |p: [f64; 3], a: [f64; 3], b: [f64; 3]| {
            p[0] * (a[1] * b[2] - a[2] * b[1]) + p[1] * (a[2] * b[0] - a[0] * b[2])
                + p[2] * (a[0] * b[1] - a[1] * b[0])
        };
        let sub = |a: [f64; 3], b: [f64; 3]| [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
        for i in 0..n {
            let (r, c) = (i / grid.n_theta, i % grid.n_theta);
            if r + 1 >= grid.n_phi {
                continue;
            }
            let ip = grid.wrap(r as isize + 1, c as isize);
            let it = grid.wrap(r as isize, c as isize + 1);
            let t0 = triple(base[i], sub(base[ip], base[i]), sub(base[it], base[i]));
            let t1 = triple(moved[i], sub(moved[ip], moved[i]), sub(moved[it], moved[i]));
            if t0 * t1 <= 0.0 {
                return Err(foliation_error(
                    tau,
                    format!("footprint map folds over at node {i}"),
                ));
            }
        }
        let disp: Vec<[f64; 3]> = (0..n).map(|i| sub(moved[i], base[i])).collect();
        let comp: Vec<Vec<f64>> = (0..3).map(|c| disp.iter().map(|d| d[c]).collect()).collect();
        let mut out = Vec::with_capacity(n);
        for k in 0..n {
            let target = base[k];
            let mut s = grid.coords(k).to_vec();
            let mut converged = false;
            for _ in 0..200 {
                let d: Vec<f64> = comp.iter().map(|c| grid.interpolate(c, &s)).collect();
                let next = grid.angles_of([target[0] - d[0], target[1] - d[1], target[2] - d[2]]);
                let p0 = grid.unit_vector(&s);
                let p1 = grid.unit_vector(&next);
                let step = sub(p0, p1).iter().map(|x| x * x).sum::<f64>().sqrt();
                s = next;
                if step < 1e-14 {
                    converged = true;
                    break;
                }
            }
            if !converged {
                return Err(foliation_error(tau, "footprint inversion did not converge"));
            }
            out.push(grid.interpolate(x0, &s));
        }
        Ok(out)
    }
}

impl LevelFoliation {
    /// Level graph `φ(τ, ·)` and `φ̇(τ, ·)` at an arbitrary `τ ∈ [−ε₀, 0]`.
    pub fn graph_at(&self, tau: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        if tau == 0.0 {
            return Ok((self.u2.clone(), self.phi_dot[0].clone()));
        }
        let level_gap = self.eps0 / (self.taus.len().max(2) - 1) as f64;
        let steps = ((tau.abs() / level_gap * SUBSTEPS as f64).ceil() as usize).max(SUBSTEPS);
        let phi = level_graph(&self.ambient, &self.grid, &self.u2, &self.normals, tau, steps)?;
        let dot = phi_dot(&self.ambient, &self.grid, &phi, tau)?;
        Ok((phi, dot))
    }

    /// Empirical bi-Lipschitz constants and the range of `φ̇`.
    pub fn verify(&self) -> Result<FoliationReport> {
        verify_foliation(self)
    }
}

fn level_graph(
    amb: &AmbientManifold,
    grid: &Grid,
    u2: &[f64],
    normals: &[[f64; 3]],
    tau: f64,
    steps: usize,
) -> Result<Vec<f64>> {
    let d = amb.dim_n + 1;
    let ends = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let mut x = [0.0; 3];
            x[0] = u2[i];
            x[1..d].copy_from_slice(grid.coords(i));
            geodesic(amb, x, normals[i], tau, steps)
        })
        .collect::<Result<Vec<_>>>()?;
    let x0: Vec<f64> = ends.iter().map(|e| e[0]).collect();
    let foot: Vec<Vec<f64>> = ends.iter().map(|e| e[1..d].to_vec()).collect();
    let phi = resample(grid, tau, &x0, &foot)?;
    for (i, &p) in phi.iter().enumerate() {
        amb.check_chart(p, grid.coords(i))
            .map_err(|e| foliation_error(tau, format!("level graph left the chart at node {i}: {e}")))?;
    }
    Ok(phi)
}

/// `φ̇ = v e^{−ψ}` evaluated on the level graph.
fn phi_dot(amb: &AmbientManifold, grid: &Grid, phi: &[f64], tau: f64) -> Result<Vec<f64>> {
    let st = graph_quantities(amb, grid, phi).map_err(|e| foliation_error(tau, e.to_string()))?;
    Ok(st
        .nodes
        .iter()
        .enumerate()
        .map(|(i, g)| g.v * (-amb.psi(phi[i], grid.coords(i)).value).exp())
        .collect())
}

/// Builds `n_levels` level graphs of the inward normal foliation of `u2`.
pub fn build_foliation(
    amb: &AmbientManifold,
    grid: &Grid,
    u2: &[f64],
    eps0: f64,
    n_levels: usize,
) -> Result<LevelFoliation> {
    if !(eps0 > 0.0) || !eps0.is_finite() {
        return Err(Error::Configuration(format!("tubular.eps0 must be positive, got {eps0}")));
    }
    if n_levels < 2 {
        return Err(Error::Configuration("tubular.n_levels must be at least 2".into()));
    }
    let st = graph_quantities(amb, grid, u2)?;
    let normals: Vec<[f64; 3]> = st.nodes.iter().map(|g| g.nu).collect();
    let taus: Vec<f64> = (0..n_levels)
        .map(|l| -eps0 * l as f64 / (n_levels - 1) as f64)
        .collect();
    let mut phi = vec![u2.to_vec()];
    let mut phi_dots = vec![phi_dot(amb, grid, u2, 0.0)?];
    for l in 1..n_levels {
        let p = level_graph(amb, grid, u2, &normals, taus[l], SUBSTEPS * l)?;
        phi_dots.push(phi_dot(amb, grid, &p, taus[l])?);
        phi.push(p);
    }
    let fol = LevelFoliation {
        ambient: amb.clone(),
        grid: grid.clone(),
        u2: u2.to_vec(),
        eps0,
        taus,
        phi,
        phi_dot: phi_dots,
        normals,
    };
    verify_foliation(&fol)?;
    Ok(fol)
}

/// [`build_foliation`] with `ε₀` halved on failure, at most
/// [`MAX_HALVINGS`] times.
pub fn build_foliation_adaptive(
    amb: &AmbientManifold,
    grid: &Grid,
    u2: &[f64],
    eps0: f64,
    n_levels: usize,
) -> Result<LevelFoliation> {
    let mut eps = eps0;
    let mut last = None;
    for attempt in 0..=MAX_HALVINGS {
        match build_foliation(amb, grid, u2, eps, n_levels) {
            Ok(f) => return Ok(f),
            Err(e @ Error::Foliation { .. }) => {
                debug!("foliation attempt {attempt} with eps0 = {eps} failed: {e}");
                last = Some(e);
                eps *= 0.5;
            }
            Err(e) => return Err(e),
        }
    }
    Err(last.expect("at least one attempt"))
}

/// Measures `c₁`, `c₂` and the range of `φ̇`; errors on non-monotone levels.
pub fn verify_foliation(fol: &LevelFoliation) -> Result<FoliationReport> {
    let mut min_dot = f64::INFINITY;
    let mut max_dot = f64::NEG_INFINITY;
    for (l, dots) in fol.phi_dot.iter().enumerate() {
        for &d in dots {
            if !(d > 0.0) {
                return Err(foliation_error(fol.taus[l], format!("phi_dot = {d} is not positive")));
            }
            min_dot = min_dot.min(d);
            max_dot = max_dot.max(d);
        }
    }
    let mut c1 = f64::INFINITY;
    let mut c2: f64 = 0.0;
    for a in 0..fol.taus.len() {
        for b in a + 1..fol.taus.len() {
            let dt = fol.taus[a] - fol.taus[b];
            for (pa, pb) in fol.phi[a].iter().zip(&fol.phi[b]) {
                let q = (pa - pb) / dt;
                if !(q > 0.0) {
                    return Err(foliation_error(fol.taus[b], "level graphs are not ordered"));
                }
                c1 = c1.min(q);
                c2 = c2.max(q);
            }
        }
    }
    Ok(FoliationReport {
        c1,
        c2,
        min_phi_dot: min_dot,
        max_phi_dot: max_dot,
    })
}
