//! Geometry of graphs `M = {x⁰ = u(x)}` over the discretized `S₀`.
//!
//! All pointwise formulas live in [`local_geometry`], written once over
//! [`Scalar`] so the same code yields residuals (`f64`) and the jet
//! derivatives used by the Jacobian ([`Dual`](crate::dual::Dual)).

use nalgebra::DMatrix;
use rayon::prelude::*;
use rustfft::{num_complex::Complex, FftPlanner};

use crate::ambient::{inverse, AmbientKind, AmbientManifold, ConformalFactor};
use crate::curvature::{principal_curvatures, CurvatureFunction};
use crate::dual::Scalar;
use crate::error::{Error, Result};
use crate::grid::{Grid, Jet};

/// Jet `(u, u_i, u_ij)` over a generic scalar.
#[derive(Clone, Copy, Debug)]
pub struct JetT<T> {
    pub u: T,
    pub du: [T; 2],
    pub ddu: [[T; 2]; 2],
}

impl From<Jet> for JetT<f64> {
    fn from(j: Jet) -> Self {
        Self {
            u: j.u,
            du: j.du,
            ddu: j.ddu,
        }
    }
}

/// Pointwise geometry of the graph at one node.
#[derive(Clone, Copy, Debug)]
pub struct LocalGeometry<T> {
    pub n: usize,
    pub psi: T,
    /// `|Du|² = σ^{ij} u_i u_j`
    pub graddsq: T,
    pub v: T,
    /// Contravariant components `ν^α` of the unit normal.
    pub nu: [T; 3],
    /// Induced metric `g_ij`.
    pub g: [[T; 2]; 2],
    /// Second fundamental form `h_ij`.
    pub h: [[T; 2]; 2],
}

/// Graph geometry from the jet at angular point `x`.
pub fn local_geometry<T: Scalar>(
    amb: &AmbientManifold,
    x: &[f64],
    jet: &JetT<T>,
) -> Result<LocalGeometry<T>> {
    let n = amb.dim_n;
    let z = T::cst(0.0);
    let m = amb.slice_metric(jet.u, x)?;
    let p = amb.psi(jet.u, x);
    let e1 = p.value.exp();
    let e2 = e1 * e1;
    let sinv = m.inverse();
    let du = jet.du;
    let ddu = jet.ddu;

    let mut gt = [[z; 2]; 2];
    let mut g = [[z; 2]; 2];
    for i in 0..n {
        for j in 0..n {
            gt[i][j] = du[i] * du[j] + m.sigma[i][j];
            g[i][j] = e2 * gt[i][j];
        }
    }
    // dg[k][i][j] = ∂_k g_ij along the graph
    let mut dg = [[[z; 2]; 2]; 2];
    for k in 0..n {
        let big_psi = p.grad[0] * du[k] + p.grad[k + 1];
        for i in 0..n {
            for j in 0..n {
                dg[k][i][j] = e2
                    * (big_psi * gt[i][j] * 2.0
                        + ddu[i][k] * du[j]
                        + du[i] * ddu[j][k]
                        + m.dk[k][i][j]
                        + m.d0[i][j] * du[k]);
            }
        }
    }
    let ginv = inverse(n, &g);
    let mut ucov = [[z; 2]; 2];
    for i in 0..n {
        for j in 0..n {
            let mut s = ddu[i][j];
            for l in 0..n {
                let mut gam = z;
                for mm in 0..n {
                    gam = gam + ginv[l][mm] * (dg[i][mm][j] + dg[j][mm][i] - dg[mm][i][j]);
                }
                s = s - gam * 0.5 * du[l];
            }
            ucov[i][j] = s;
        }
    }
    let mut graddsq = z;
    let mut up = [z; 2];
    for i in 0..n {
        for j in 0..n {
            up[i] = up[i] + sinv[i][j] * du[j];
        }
        graddsq = graddsq + up[i] * du[i];
    }
    let v = (graddsq + 1.0).sqrt();
    let cb = amb.ambient_christoffels(jet.u, x)?;
    let mut h = [[z; 2]; 2];
    let ve = v * e1;
    for i in 0..n {
        for j in 0..n {
            h[i][j] = ve
                * (-ucov[i][j]
                    - cb.c000() * du[i] * du[j]
                    - cb.c00i(i) * du[j]
                    - cb.c00i(j) * du[i]
                    - cb.c0ij(i, j));
        }
    }
    let inv_ve = ve.recip();
    let mut nu = [z; 3];
    nu[0] = inv_ve;
    for i in 0..n {
        nu[i + 1] = -up[i] * inv_ve;
    }
    Ok(LocalGeometry {
        n,
        psi: p.value,
        graddsq,
        v,
        nu,
        g,
        h,
    })
}

/// Second fundamental form through the Hessian of `u` with respect to the
/// slice metric `σ_ij(u(x), x)`, the slice second fundamental form `½∂₀σ`
/// and the conformal correction. Independent of [`local_geometry`].
pub fn hessian_route<T: Scalar>(
    amb: &AmbientManifold,
    x: &[f64],
    jet: &JetT<T>,
) -> Result<[[T; 2]; 2]> {
    let n = amb.dim_n;
    let z = T::cst(0.0);
    let m = amb.slice_metric(jet.u, x)?;
    let p = amb.psi(jet.u, x);
    let sinv = m.inverse();
    let du = jet.du;
    // derivatives of x ↦ σ_ij(u(x), x)
    let mut ds = [[[z; 2]; 2]; 2];
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                ds[k][i][j] = m.dk[k][i][j] + m.d0[i][j] * du[k];
            }
        }
    }
    let mut graddsq = z;
    let mut up = [z; 2];
    for i in 0..n {
        for j in 0..n {
            up[i] = up[i] + sinv[i][j] * du[j];
        }
        graddsq = graddsq + up[i] * du[i];
    }
    let v2 = graddsq + 1.0;
    let v = v2.sqrt();
    let mut psi_tan = z;
    for l in 0..n {
        psi_tan = psi_tan + up[l] * p.grad[l + 1];
    }
    let conf = (p.grad[0] - psi_tan) / v2;
    let mut h = [[z; 2]; 2];
    for i in 0..n {
        for j in 0..n {
            let mut hess = jet.ddu[i][j];
            for l in 0..n {
                let mut gam = z;
                for mm in 0..n {
                    gam = gam + sinv[l][mm] * (ds[i][mm][j] + ds[j][mm][i] - ds[mm][i][j]);
                }
                hess = hess - gam * 0.5 * du[l];
            }
            let gt = du[i] * du[j] + m.sigma[i][j];
            h[i][j] = p.value.exp() * v * (-hess / v2 + m.d0[i][j] * 0.5 + conf * gt);
        }
    }
    Ok(h)
}

/// Cached nodal geometry (plain floating point).
#[derive(Clone, Debug, PartialEq)]
pub struct NodeGeometry {
    pub jet: Jet,
    pub v: f64,
    pub graddsq: f64,
    pub nu: [f64; 3],
    pub g: [[f64; 2]; 2],
    pub h: [[f64; 2]; 2],
    /// Principal curvatures, ascending.
    pub kappa: Vec<f64>,
}

/// Graph function `u` with all derived nodal quantities.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphState {
    pub u: Vec<f64>,
    pub nodes: Vec<NodeGeometry>,
}

pub(crate) fn to_matrix(n: usize, a: &[[f64; 2]; 2]) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| a[i][j])
}

/// Computes every cached quantity of the graph `u`.
pub fn graph_quantities(amb: &AmbientManifold, grid: &Grid, u: &[f64]) -> Result<GraphState> {
    if u.len() != grid.len() {
        return Err(Error::Configuration(format!(
            "graph has {} values for a grid of {} nodes",
            u.len(),
            grid.len()
        )));
    }
    let n = amb.dim_n;
    let nodes = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let jet = grid.jet(u, i);
            let lg = local_geometry(amb, grid.coords(i), &JetT::from(jet))?;
            let pc = principal_curvatures(&to_matrix(n, &lg.h), &to_matrix(n, &lg.g))?;
            Ok(NodeGeometry {
                jet,
                v: lg.v,
                graddsq: lg.graddsq,
                nu: lg.nu,
                g: lg.g,
                h: lg.h,
                kappa: pc.kappa,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GraphState {
        u: u.to_vec(),
        nodes,
    })
}

/// Nodal second fundamental form.
pub fn second_fundamental_form(
    amb: &AmbientManifold,
    grid: &Grid,
    u: &[f64],
) -> Result<Vec<[[f64; 2]; 2]>> {
    Ok(graph_quantities(amb, grid, u)?
        .nodes
        .into_iter()
        .map(|g| g.h)
        .collect())
}

/// Nodal second fundamental form through [`hessian_route`].
pub fn hessian_form_crosscheck(
    amb: &AmbientManifold,
    grid: &Grid,
    u: &[f64],
) -> Result<Vec<[[f64; 2]; 2]>> {
    (0..grid.len())
        .map(|i| hessian_route(amb, grid.coords(i), &JetT::from(grid.jet(u, i))))
        .collect()
}

impl GraphState {
    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn max_graddsq(&self) -> f64 {
        self.nodes.iter().map(|g| g.graddsq).fold(0.0, f64::max)
    }

    pub fn max_kappa(&self) -> f64 {
        self.nodes
            .iter()
            .flat_map(|g| g.kappa.iter().copied())
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Tabular export: angular coordinates, `u`, `v`, `κ₁ … κₙ`.
    pub fn table(&self, grid: &Grid) -> String {
        let mut out = String::new();
        if grid.dim_n == 1 {
            out.push_str("theta u v kappa1\n");
        } else {
            out.push_str("phi theta u v kappa1 kappa2\n");
        }
        for (i, node) in self.nodes.iter().enumerate() {
            let mut cols: Vec<String> = grid.coords(i).iter().map(|c| format!("{c:.17e}")).collect();
            cols.push(format!("{:.17e}", self.u[i]));
            cols.push(format!("{:.17e}", node.v));
            cols.extend(node.kappa.iter().map(|k| format!("{k:.17e}")));
            out.push_str(&cols.join(" "));
            out.push('\n');
        }
        out
    }
}

/// Cone membership per node.
#[derive(Clone, Debug, PartialEq)]
pub struct AdmissibilityReport {
    pub admissible: bool,
    pub violating: Vec<usize>,
    /// Signed distance to the cone boundary along `(1,…,1)`, per node.
    pub margins: Vec<f64>,
    pub min_margin: f64,
}

pub fn admissibility(state: &GraphState, f: &CurvatureFunction) -> AdmissibilityReport {
    let margins: Vec<f64> = state.nodes.iter().map(|g| f.cone_margin(&g.kappa)).collect();
    let violating: Vec<usize> = state
        .nodes
        .iter()
        .enumerate()
        .filter(|(_, g)| !f.in_cone(&g.kappa))
        .map(|(i, _)| i)
        .collect();
    let min_margin = margins.iter().copied().fold(f64::INFINITY, f64::min);
    AdmissibilityReport {
        admissible: violating.is_empty(),
        violating,
        margins,
        min_margin,
    }
}

/// Spectral derivatives of periodic samples.
fn spectral_derivatives(samples: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = samples.len();
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut spec: Vec<Complex<f64>> = samples.iter().map(|&x| Complex::new(x, 0.0)).collect();
    fwd.process(&mut spec);
    let mut d1 = spec.clone();
    let mut d2 = spec;
    for k in 0..n {
        let kk = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
        let nyquist = n % 2 == 0 && k == n / 2;
        d1[k] *= if nyquist { Complex::new(0.0, 0.0) } else { Complex::new(0.0, kk) };
        d2[k] *= -kk * kk;
    }
    inv.process(&mut d1);
    inv.process(&mut d2);
    let scale = 1.0 / n as f64;
    (
        d1.iter().map(|c| c.re * scale).collect(),
        d2.iter().map(|c| c.re * scale).collect(),
    )
}

/// Curvature of the curve `graph u` computed in an isometric embedding of a
/// built-in space form (`n = 1` only): the plane, the unit sphere in `ℝ³`,
/// or the hyperboloid in Minkowski space.
pub fn embedding_oracle(amb: &AmbientManifold, grid: &Grid, u: &[f64]) -> Result<Vec<f64>> {
    if amb.dim_n != 1 || grid.dim_n != 1 {
        return Err(Error::Unsupported("embedding oracle requires n = 1".into()));
    }
    if amb.psi != ConformalFactor::Zero {
        return Err(Error::Unsupported(
            "embedding oracle requires a vanishing conformal factor".into(),
        ));
    }
    // embedding, its radial derivative and the bilinear form of the target
    type Emb = fn(f64, f64) -> [f64; 3];
    let (pos, radial, sign): (Emb, Emb, f64) = match amb.kind {
        AmbientKind::EuclideanPolar => (
            |r, t| [r * t.cos(), r * t.sin(), 0.0],
            |_, t| [t.cos(), t.sin(), 0.0],
            1.0,
        ),
        AmbientKind::SpherePolar => (
            |r, t| [r.sin() * t.cos(), r.sin() * t.sin(), r.cos()],
            |r, t| [r.cos() * t.cos(), r.cos() * t.sin(), -r.sin()],
            1.0,
        ),
        AmbientKind::HyperbolicPolar => (
            |r, t| [r.sinh() * t.cos(), r.sinh() * t.sin(), r.cosh()],
            |r, t| [r.cosh() * t.cos(), r.cosh() * t.sin(), r.sinh()],
            -1.0,
        ),
        AmbientKind::Warped { .. } => {
            return Err(Error::Unsupported(
                "embedding oracle needs a built-in space form".into(),
            ))
        }
    };
    let dot = |a: [f64; 3], b: [f64; 3]| a[0] * b[0] + a[1] * b[1] + sign * a[2] * b[2];
    let n = grid.len();
    let pts: Vec<[f64; 3]> = (0..n).map(|i| pos(u[i], grid.coords(i)[0])).collect();
    let mut d1 = vec![[0.0; 3]; n];
    let mut d2 = vec![[0.0; 3]; n];
    for c in 0..3 {
        let comp: Vec<f64> = pts.iter().map(|p| p[c]).collect();
        let (a, b) = spectral_derivatives(&comp);
        for i in 0..n {
            d1[i][c] = a[i];
            d2[i][c] = b[i];
        }
    }
    Ok((0..n)
        .map(|i| {
            let t = d1[i];
            let tt = dot(t, t);
            let r = radial(u[i], grid.coords(i)[0]);
            let proj = dot(r, t) / tt;
            let mut nn = [r[0] - proj * t[0], r[1] - proj * t[1], r[2] - proj * t[2]];
            let len = dot(nn, nn).sqrt();
            nn.iter_mut().for_each(|c| *c /= len);
            -dot(d2[i], nn) / tt
        })
        .collect())
}
