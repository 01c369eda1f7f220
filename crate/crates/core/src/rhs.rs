//! Prescribed right-hand sides `f(x⁰, x, ν)` and the smooth clamp `ϑ`.

use crate::ambient::AmbientManifold;
use crate::dual::Scalar;
use crate::error::{Error, Result};
use crate::expr::{Bindings, Expr};
use crate::grid::Grid;

/// Quintic blend with `p(0) = p'(0) = p''(0) = 0`, `p(1) = p'(1) = 1`, `p''(1) = 0`.
fn blend_low<T: Scalar>(s: T) -> T {
    let s3 = s * s * s;
    s3 * 6.0 - s3 * s * 8.0 + s3 * s * s * 3.0
}

/// `ϑ(y)`: constant `c₁/2` below `c₁/2`, identity on `[c₁, c₂/2]`,
/// constant `c₂` above `c₂`, and monotone `C²` blends in between.
pub fn clamp_value<T: Scalar>(y: T, c1: f64, c2: f64) -> T {
    let r = y.re();
    if r <= 0.5 * c1 {
        T::cst(0.5 * c1)
    } else if r < c1 {
        let w = 0.5 * c1;
        let s = (y - w) / w;
        blend_low(s) * w + w
    } else if r <= 0.5 * c2 {
        y
    } else if r < c2 {
        let w = 0.5 * c2;
        let s = (y - w) / w;
        // q(s) = 1 − p(1 − s)
        (T::cst(1.0) - blend_low(T::cst(1.0) - s)) * w + w
    } else {
        T::cst(c2)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RightHandSide {
    pub expr: Expr,
    pub c1: f64,
    pub c2: f64,
    /// Apply `ϑ` to the expression value.
    pub clamp: bool,
}

impl RightHandSide {
    pub fn new(expr: Expr, c1: f64, c2: f64) -> Result<Self> {
        if !(c1 > 0.0 && c1 <= c2) {
            return Err(Error::Configuration(format!(
                "rhs bounds must satisfy 0 < c1 <= c2, got ({c1}, {c2})"
            )));
        }
        Ok(Self {
            expr,
            c1,
            c2,
            clamp: false,
        })
    }

    pub fn eval<T: Scalar>(&self, x0: T, x: &[f64], nu: [T; 3]) -> T {
        let y = self.expr.eval(&Bindings::at(x0, x, nu));
        if self.clamp {
            clamp_value(y, self.c1, self.c2)
        } else {
            y
        }
    }

    /// Sampled check of `c₁ ≤ f ≤ c₂` (or `c₁/2 ≤ ϑ∘f ≤ c₂` when clamped)
    /// for `x⁰` across `[lo, hi]`, every node, and a set of unit normals.
    pub fn check_bounds(&self, amb: &AmbientManifold, grid: &Grid, lo: f64, hi: f64) -> Result<()> {
        let (lower, upper) = if self.clamp {
            (0.5 * self.c1, self.c2)
        } else {
            (self.c1, self.c2)
        };
        let d = amb.dim_n + 1;
        let samples = 9;
        for s in 0..samples {
            let x0 = lo + (hi - lo) * s as f64 / (samples - 1) as f64;
            for i in 0..grid.len() {
                let x = grid.coords(i);
                let normals = if self.expr.uses_normal() {
                    unit_normals(amb, x0, x)?
                } else {
                    vec![[0.0; 3]]
                };
                for nu in normals {
                    let v = self.eval(x0, x, nu);
                    if !(v >= lower - 1e-12 && v <= upper + 1e-12) || !v.is_finite() {
                        return Err(Error::RhsBounds(format!(
                            "f = {v} outside [{lower}, {upper}] at x0 = {x0}, x = {x:?}, nu = {:?}",
                            &nu[..d]
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Unit vectors `±e₀` and `±` each slice direction, normalized in `ḡ`.
fn unit_normals(amb: &AmbientManifold, x0: f64, x: &[f64]) -> Result<Vec<[f64; 3]>> {
    let g = amb.metric_matrix(x0, x)?;
    let d = amb.dim_n + 1;
    let mut out = Vec::new();
    for a in 0..d {
        for sign in [1.0, -1.0] {
            let mut v = [0.0; 3];
            v[a] = sign / g[(a, a)].sqrt();
            out.push(v);
        }
    }
    Ok(out)
}

/// Returns `ϑ∘f` with the bands `(c1, c2)`.
pub fn clamp_rhs(f: &RightHandSide, c1: f64, c2: f64) -> Result<RightHandSide> {
    if !(c1 > 0.0) || c1 >= c2 {
        return Err(Error::Configuration(format!(
            "clamp requires 0 < c1 < c2, got ({c1}, {c2})"
        )));
    }
    if c1 > 0.5 * c2 {
        return Err(Error::Configuration(format!(
            "clamp bands overlap: c1 = {c1} exceeds c2/2 = {}",
            0.5 * c2
        )));
    }
    Ok(RightHandSide {
        expr: f.expr.clone(),
        c1,
        c2,
        clamp: true,
    })
}
