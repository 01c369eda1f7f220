//! Discretizations of the level hypersurface `S₀`.
//!
//! `n = 1`: uniform periodic nodes `θ_k = 2πk/N_θ`.
//! `n = 2`: pole-offset latitude-longitude nodes `φ_j = (j+½)π/N_φ`,
//! `θ_k = 2πk/N_θ`. Stencils that run past a pole continue on the opposite
//! meridian, using `u(−φ, θ) = u(φ, θ+π)`, so no node sits on a pole and every
//! stencil is the same fourth-order centered formula.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Fourth-order first-derivative weights at offsets `-2..=2`.
pub const D1: [f64; 5] = [1.0 / 12.0, -8.0 / 12.0, 0.0, 8.0 / 12.0, -1.0 / 12.0];
/// Fourth-order second-derivative weights at offsets `-2..=2`.
pub const D2: [f64; 5] = [-1.0 / 12.0, 16.0 / 12.0, -30.0 / 12.0, 16.0 / 12.0, -1.0 / 12.0];

/// Linear functional `Σ w · u[node]`.
pub type Stencil = Vec<(usize, f64)>;

/// Derivative stencils at one node.
#[derive(Clone, Debug)]
pub struct NodeStencil {
    /// `D_i`
    pub d1: [Stencil; 2],
    /// `D_ij`, symmetric
    pub d2: [[Stencil; 2]; 2],
}

/// Pointwise jet `(u, u_i, u_ij)` read off the grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet {
    pub u: f64,
    pub du: [f64; 2],
    pub ddu: [[f64; 2]; 2],
}

#[derive(Clone, Debug)]
pub struct Grid {
    pub dim_n: usize,
    pub n_theta: usize,
    /// Number of latitude rows; zero for `n = 1`.
    pub n_phi: usize,
    coords: Vec<[f64; 2]>,
    weights: Vec<f64>,
    stencils: Vec<NodeStencil>,
}

/// Applies a derivative stencil in difference form, so constants map to an
/// exact zero.
fn apply(st: &Stencil, u: &[f64], center: usize) -> f64 {
    let c = u[center];
    st.iter().map(|&(i, w)| w * (u[i] - c)).sum()
}

/// Combines repeated nodes while keeping first-appearance order, so the
/// summation order depends only on stencil offsets.
fn merge(st: Stencil) -> Stencil {
    let mut out: Stencil = Vec::with_capacity(st.len());
    for (i, w) in st {
        match out.iter_mut().find(|e| e.0 == i) {
            Some(e) => e.1 += w,
            None => out.push((i, w)),
        }
    }
    out.retain(|e| e.1 != 0.0);
    out
}

impl Grid {
    pub fn circle(n_theta: usize) -> Result<Self> {
        if n_theta < 16 {
            return Err(Error::Configuration(format!(
                "grid.n_theta must be at least 16, got {n_theta}"
            )));
        }
        let h = 2.0 * PI / n_theta as f64;
        let coords = (0..n_theta).map(|k| [k as f64 * h, 0.0]).collect();
        let weights = vec![h; n_theta];
        let mut g = Grid {
            dim_n: 1,
            n_theta,
            n_phi: 0,
            coords,
            weights,
            stencils: Vec::new(),
        };
        g.stencils = (0..n_theta).map(|i| g.build_stencil(i)).collect();
        Ok(g)
    }

    pub fn sphere(n_phi: usize, n_theta: usize) -> Result<Self> {
        if n_theta < 16 || n_theta % 2 != 0 {
            return Err(Error::Configuration(format!(
                "grid.n_theta must be even and at least 16, got {n_theta}"
            )));
        }
        if n_phi < 4 {
            return Err(Error::Configuration(format!(
                "grid.n_phi must be at least 4, got {n_phi}"
            )));
        }
        let hp = PI / n_phi as f64;
        let ht = 2.0 * PI / n_theta as f64;
        let mut coords = Vec::with_capacity(n_phi * n_theta);
        let mut weights = Vec::with_capacity(n_phi * n_theta);
        for j in 0..n_phi {
            let phi = (j as f64 + 0.5) * hp;
            for k in 0..n_theta {
                coords.push([phi, k as f64 * ht]);
                weights.push(phi.sin() * hp * ht);
            }
        }
        let mut g = Grid {
            dim_n: 2,
            n_theta,
            n_phi,
            coords,
            weights,
            stencils: Vec::new(),
        };
        g.stencils = (0..g.len()).map(|i| g.build_stencil(i)).collect();
        Ok(g)
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    /// Angular coordinates of node `i` (`[θ]` or `[φ, θ]`).
    pub fn coords(&self, i: usize) -> &[f64] {
        &self.coords[i][..self.dim_n]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn stencil(&self, i: usize) -> &NodeStencil {
        &self.stencils[i]
    }

    pub fn h_theta(&self) -> f64 {
        2.0 * PI / self.n_theta as f64
    }

    pub fn h_phi(&self) -> f64 {
        if self.n_phi == 0 {
            0.0
        } else {
            PI / self.n_phi as f64
        }
    }

    /// Node index for an extended `(row, column)` pair, folding rows past a
    /// pole onto the opposite meridian.
    pub fn wrap(&self, row: isize, col: isize) -> usize {
        let nt = self.n_theta as isize;
        if self.dim_n == 1 {
            return col.rem_euclid(nt) as usize;
        }
        let np = self.n_phi as isize;
        let (r, c) = if row < 0 {
            (-1 - row, col + nt / 2)
        } else if row >= np {
            (2 * np - 1 - row, col + nt / 2)
        } else {
            (row, col)
        };
        (r * nt + c.rem_euclid(nt)) as usize
    }

    fn row_col(&self, i: usize) -> (isize, isize) {
        if self.dim_n == 1 {
            (0, i as isize)
        } else {
            ((i / self.n_theta) as isize, (i % self.n_theta) as isize)
        }
    }

    fn build_stencil(&self, i: usize) -> NodeStencil {
        let (r, c) = self.row_col(i);
        let ht = self.h_theta();
        let mut d1: [Stencil; 2] = [Vec::new(), Vec::new()];
        let mut d2: [[Stencil; 2]; 2] = Default::default();
        // θ is the last coordinate
        let t = self.dim_n - 1;
        d1[t] = merge(
            (0..5)
                .map(|a| (self.wrap(r, c + a as isize - 2), D1[a] / ht))
                .collect(),
        );
        d2[t][t] = merge(
            (0..5)
                .map(|a| (self.wrap(r, c + a as isize - 2), D2[a] / (ht * ht)))
                .collect(),
        );
        if self.dim_n == 2 {
            let hp = self.h_phi();
            d1[0] = merge(
                (0..5)
                    .map(|a| (self.wrap(r + a as isize - 2, c), D1[a] / hp))
                    .collect(),
            );
            d2[0][0] = merge(
                (0..5)
                    .map(|a| (self.wrap(r + a as isize - 2, c), D2[a] / (hp * hp)))
                    .collect(),
            );
            let mut mixed = Vec::with_capacity(25);
            for a in 0..5 {
                for b in 0..5 {
                    let w = D1[a] * D1[b] / (hp * ht);
                    if w != 0.0 {
                        mixed.push((self.wrap(r + a as isize - 2, c + b as isize - 2), w));
                    }
                }
            }
            let mixed = merge(mixed);
            d2[0][1] = mixed.clone();
            d2[1][0] = mixed;
        }
        NodeStencil { d1, d2 }
    }

    pub fn jet(&self, u: &[f64], i: usize) -> Jet {
        let st = &self.stencils[i];
        let mut jet = Jet {
            u: u[i],
            du: [0.0; 2],
            ddu: [[0.0; 2]; 2],
        };
        for a in 0..self.dim_n {
            jet.du[a] = apply(&st.d1[a], u, i);
            for b in 0..self.dim_n {
                jet.ddu[a][b] = apply(&st.d2[a][b], u, i);
            }
        }
        jet
    }

    /// `∫_{S₀} u` with the grid quadrature (round measure).
    pub fn integrate(&self, u: &[f64]) -> f64 {
        self.weights.iter().zip(u).map(|(w, x)| w * x).sum()
    }

    /// Samples an angular function at every node.
    pub fn sample(&self, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
        (0..self.len()).map(|i| f(self.coords(i))).collect()
    }

    /// Cubic Lagrange interpolation of nodal `values` at angular point `x`.
    pub fn interpolate(&self, values: &[f64], x: &[f64]) -> f64 {
        let ht = self.h_theta();
        let theta = x[self.dim_n - 1];
        let st = theta / ht;
        let k0 = st.floor() as isize;
        let wt = lagrange4(st - k0 as f64);
        if self.dim_n == 1 {
            return (0..4)
                .map(|b| wt[b] * values[self.wrap(0, k0 - 1 + b as isize)])
                .sum();
        }
        let sp = x[0] / self.h_phi() - 0.5;
        let j0 = sp.floor() as isize;
        let wp = lagrange4(sp - j0 as f64);
        let mut acc = 0.0;
        for a in 0..4 {
            let mut row = 0.0;
            for b in 0..4 {
                row += wt[b] * values[self.wrap(j0 - 1 + a as isize, k0 - 1 + b as isize)];
            }
            acc += wp[a] * row;
        }
        acc
    }

    /// Embeds angular coordinates into the unit circle or unit 2-sphere.
    pub fn unit_vector(&self, x: &[f64]) -> [f64; 3] {
        if self.dim_n == 1 {
            [x[0].cos(), x[0].sin(), 0.0]
        } else {
            let (sp, cp) = x[0].sin_cos();
            let (st, ct) = x[1].sin_cos();
            [sp * ct, sp * st, cp]
        }
    }

    /// Inverse of [`Grid::unit_vector`]; the input need not be normalized.
    pub fn angles_of(&self, p: [f64; 3]) -> Vec<f64> {
        let theta = p[1].atan2(p[0]).rem_euclid(2.0 * PI);
        if self.dim_n == 1 {
            vec![theta]
        } else {
            let rxy = p[0].hypot(p[1]);
            vec![rxy.atan2(p[2]), theta]
        }
    }

    /// Grid with the same topology and `N` replaced (`N_θ = N`, `N_φ = N/2`).
    pub fn with_resolution(&self, n: usize) -> Result<Self> {
        if self.dim_n == 1 {
            Self::circle(n)
        } else {
            Self::sphere(n / 2, n)
        }
    }
}

/// Lagrange weights for nodes at `-1, 0, 1, 2` evaluated at `s ∈ [0, 1)`.
fn lagrange4(s: f64) -> [f64; 4] {
    [
        -s * (s - 1.0) * (s - 2.0) / 6.0,
        (s + 1.0) * (s - 1.0) * (s - 2.0) / 2.0,
        -(s + 1.0) * s * (s - 2.0) / 2.0,
        (s + 1.0) * s * (s - 1.0) / 6.0,
    ]
}
