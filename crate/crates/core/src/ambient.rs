//! Ambient Riemannian manifolds in normal Gaussian coordinates.
//!
//! The metric has the form `e^{2ψ} { (dx⁰)² + σ_ij(x⁰, x) dxⁱ dxʲ }` over a
//! closed level hypersurface `S₀`, which is a circle (`n = 1`, angle `θ`) or a
//! round 2-sphere (`n = 2`, colatitude `φ` and longitude `θ`). All built-ins
//! are warped products `σ_ij = ρ(x⁰)² s_ij(x)` with `s` the round metric.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::dual::Scalar;
use crate::error::{Error, Result};

/// Profile of the warping function `ρ`.
#[derive(Clone, Debug, PartialEq)]
pub enum AmbientKind {
    /// `ρ(r) = r`, flat space in geodesic polar coordinates.
    EuclideanPolar,
    /// `ρ(r) = sin r`, the unit sphere.
    SpherePolar,
    /// `ρ(r) = sinh r`, unit hyperbolic space.
    HyperbolicPolar,
    /// `ρ(r) = Σ a_k r^k` on a user-chosen interval.
    Warped {
        coeffs: Vec<f64>,
        x0_min: f64,
        x0_max: f64,
    },
}

impl AmbientKind {
    pub fn name(&self) -> &'static str {
        match self {
            AmbientKind::EuclideanPolar => "euclidean_polar",
            AmbientKind::SpherePolar => "sphere_polar",
            AmbientKind::HyperbolicPolar => "hyperbolic_polar",
            AmbientKind::Warped { .. } => "warped",
        }
    }
}

/// Conformal factor `ψ`.
#[derive(Clone, Debug, PartialEq)]
pub enum ConformalFactor {
    Zero,
    /// `ψ = a · sin(x⁰) · e(x)` with `e` the first Cartesian coordinate of the
    /// embedded `S₀`. Used to exercise the `ψ`-dependent terms.
    Perturbed { amplitude: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct AmbientManifold {
    pub kind: AmbientKind,
    pub dim_n: usize,
    pub psi: ConformalFactor,
}

/// Slice metric `σ_ij` with its first partial derivatives at one point.
#[derive(Clone, Copy, Debug)]
pub struct SliceMetric<T> {
    pub n: usize,
    pub sigma: [[T; 2]; 2],
    /// `∂₀ σ_ij`
    pub d0: [[T; 2]; 2],
    /// `∂_k σ_ij`, indexed `[k][i][j]`
    pub dk: [[[T; 2]; 2]; 2],
}

impl<T: Scalar> SliceMetric<T> {
    pub fn inverse(&self) -> [[T; 2]; 2] {
        inverse(self.n, &self.sigma)
    }
}

/// Christoffel symbols of a metric on the `(n+1)`-dimensional ambient,
/// stored as `gamma[α][β][γ] = Γ^α_βγ` with index 0 the normal direction.
#[derive(Clone, Copy, Debug)]
pub struct Christoffels<T> {
    pub dim: usize,
    pub gamma: [[[T; 3]; 3]; 3],
}

impl<T: Scalar> Christoffels<T> {
    /// `Γ⁰₀₀`
    pub fn c000(&self) -> T {
        self.gamma[0][0][0]
    }
    /// `Γ⁰₀ᵢ` for slice index `i` (0-based)
    pub fn c00i(&self, i: usize) -> T {
        self.gamma[0][0][i + 1]
    }
    /// `Γ⁰ᵢⱼ`
    pub fn c0ij(&self, i: usize, j: usize) -> T {
        self.gamma[0][i + 1][j + 1]
    }
    /// `Γᵏᵢⱼ`
    pub fn ckij(&self, k: usize, i: usize, j: usize) -> T {
        self.gamma[k + 1][i + 1][j + 1]
    }
}

/// Conformal factor value and derivatives `(ψ, [ψ₀, ψ₁, ψ₂])`.
#[derive(Clone, Copy, Debug)]
pub struct Psi<T> {
    pub value: T,
    pub grad: [T; 3],
}

pub(crate) fn inverse<T: Scalar>(n: usize, m: &[[T; 2]; 2]) -> [[T; 2]; 2] {
    let z = T::cst(0.0);
    if n == 1 {
        [[m[0][0].recip(), z], [z, z]]
    } else {
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        [
            [m[1][1] / det, -m[0][1] / det],
            [-m[1][0] / det, m[0][0] / det],
        ]
    }
}

impl AmbientManifold {
    pub fn new(kind: AmbientKind, dim_n: usize) -> Result<Self> {
        if !(1..=2).contains(&dim_n) {
            return Err(Error::Configuration(format!(
                "ambient.dim_n must be 1 or 2, got {dim_n}"
            )));
        }
        if let AmbientKind::Warped {
            coeffs,
            x0_min,
            x0_max,
        } = &kind
        {
            if coeffs.is_empty() {
                return Err(Error::Configuration("warp coefficients are empty".into()));
            }
            if x0_min >= x0_max {
                return Err(Error::Configuration(format!(
                    "warped coordinate range [{x0_min}, {x0_max}] is empty"
                )));
            }
        }
        Ok(Self {
            kind,
            dim_n,
            psi: ConformalFactor::Zero,
        })
    }

    pub fn euclidean(dim_n: usize) -> Self {
        Self::new(AmbientKind::EuclideanPolar, dim_n).expect("valid dimension")
    }

    pub fn sphere(dim_n: usize) -> Self {
        Self::new(AmbientKind::SpherePolar, dim_n).expect("valid dimension")
    }

    pub fn hyperbolic(dim_n: usize) -> Self {
        Self::new(AmbientKind::HyperbolicPolar, dim_n).expect("valid dimension")
    }

    /// Flat product `ℝ × S₀` (the warp `ρ ≡ 1`).
    pub fn flat_slab(dim_n: usize) -> Self {
        Self::new(
            AmbientKind::Warped {
                coeffs: vec![1.0],
                x0_min: f64::NEG_INFINITY,
                x0_max: f64::INFINITY,
            },
            dim_n,
        )
        .expect("valid dimension")
    }

    pub fn with_psi(mut self, psi: ConformalFactor) -> Self {
        self.psi = psi;
        self
    }

    /// Open interval of admissible `x⁰`.
    pub fn x0_range(&self) -> (f64, f64) {
        match &self.kind {
            AmbientKind::EuclideanPolar | AmbientKind::HyperbolicPolar => (0.0, f64::INFINITY),
            AmbientKind::SpherePolar => (0.0, std::f64::consts::PI),
            AmbientKind::Warped { x0_min, x0_max, .. } => (*x0_min, *x0_max),
        }
    }

    pub fn check_chart(&self, x0: f64, x: &[f64]) -> Result<()> {
        let (lo, hi) = self.x0_range();
        if !(x0 > lo && x0 < hi) || !x0.is_finite() {
            return Err(Error::Domain(format!(
                "x0 = {x0} outside ({lo}, {hi}) for {}",
                self.kind.name()
            )));
        }
        if self.dim_n == 2 {
            let phi = x[0];
            if !(phi > 0.0 && phi < std::f64::consts::PI) {
                return Err(Error::Domain(format!("colatitude {phi} outside (0, π)")));
            }
        }
        Ok(())
    }

    /// Warp `ρ` and `ρ'` at `x⁰`.
    pub fn warp<T: Scalar>(&self, x0: T) -> (T, T) {
        match &self.kind {
            AmbientKind::EuclideanPolar => (x0, T::cst(1.0)),
            AmbientKind::SpherePolar => (x0.sin(), x0.cos()),
            AmbientKind::HyperbolicPolar => (x0.sinh(), x0.cosh()),
            AmbientKind::Warped { coeffs, .. } => {
                let mut p = T::cst(0.0);
                let mut dp = T::cst(0.0);
                for (k, &a) in coeffs.iter().enumerate().rev() {
                    p = p * x0 + a;
                    if k > 0 {
                        dp = dp * x0 + a * k as f64;
                    }
                }
                (p, dp)
            }
        }
    }

    /// Slice metric and its first derivatives at `(x⁰, x)`.
    pub fn slice_metric<T: Scalar>(&self, x0: T, x: &[f64]) -> Result<SliceMetric<T>> {
        self.check_chart(x0.re(), x)?;
        let (rho, drho) = self.warp(x0);
        if rho.re() <= 0.0 {
            return Err(Error::Domain(format!(
                "warp function non-positive at x0 = {}",
                x0.re()
            )));
        }
        let z = T::cst(0.0);
        let rho2 = rho * rho;
        let d_rho2 = rho * drho * 2.0;
        let n = self.dim_n;
        let mut m = SliceMetric {
            n,
            sigma: [[z; 2]; 2],
            d0: [[z; 2]; 2],
            dk: [[[z; 2]; 2]; 2],
        };
        if n == 1 {
            m.sigma[0][0] = rho2;
            m.d0[0][0] = d_rho2;
        } else {
            let (s, c) = x[0].sin_cos();
            m.sigma[0][0] = rho2;
            m.sigma[1][1] = rho2 * (s * s);
            m.d0[0][0] = d_rho2;
            m.d0[1][1] = d_rho2 * (s * s);
            m.dk[0][1][1] = rho2 * (2.0 * s * c);
        }
        Ok(m)
    }

    /// Conformal factor and its gradient.
    pub fn psi<T: Scalar>(&self, x0: T, x: &[f64]) -> Psi<T> {
        let z = T::cst(0.0);
        match self.psi {
            ConformalFactor::Zero => Psi {
                value: z,
                grad: [z; 3],
            },
            ConformalFactor::Perturbed { amplitude: a } => {
                // e(x) and its coordinate gradient
                let (e, de) = if self.dim_n == 1 {
                    (x[0].cos(), [-x[0].sin(), 0.0])
                } else {
                    let (sp, cp) = x[0].sin_cos();
                    let (st, ct) = x[1].sin_cos();
                    (sp * ct, [cp * ct, -sp * st])
                };
                let s = x0.sin() * a;
                let c = x0.cos() * a;
                Psi {
                    value: s * e,
                    grad: [c * e, s * de[0], s * de[1]],
                }
            }
        }
    }

    /// Christoffel symbols of the conformal metric `(dx⁰)² + σ_ij dxⁱdxʲ`.
    pub fn conformal_christoffels<T: Scalar>(&self, x0: T, x: &[f64]) -> Result<Christoffels<T>> {
        let m = self.slice_metric(x0, x)?;
        Ok(christoffels_from_slice(&m))
    }

    /// Christoffel symbols of the full metric `e^{2ψ}{(dx⁰)² + σ_ij dxⁱdxʲ}`.
    pub fn ambient_christoffels<T: Scalar>(&self, x0: T, x: &[f64]) -> Result<Christoffels<T>> {
        let m = self.slice_metric(x0, x)?;
        let mut c = christoffels_from_slice(&m);
        if self.psi == ConformalFactor::Zero {
            return Ok(c);
        }
        let p = self.psi(x0, x);
        let d = self.dim_n + 1;
        let (gm, gi) = block_metric(&m);
        for a in 0..d {
            // G^{aδ} ψ_δ
            let mut raised = T::cst(0.0);
            for dl in 0..d {
                raised = raised + gi[a][dl] * p.grad[dl];
            }
            for b in 0..d {
                for g in 0..d {
                    let mut v = c.gamma[a][b][g] - gm[b][g] * raised;
                    if a == b {
                        v = v + p.grad[g];
                    }
                    if a == g {
                        v = v + p.grad[b];
                    }
                    c.gamma[a][b][g] = v;
                }
            }
        }
        Ok(c)
    }

    /// Full ambient metric `ḡ_αβ` at a point, as an `(n+1)×(n+1)` matrix.
    pub fn metric_matrix(&self, x0: f64, x: &[f64]) -> Result<DMatrix<f64>> {
        let m = self.slice_metric(x0, x)?;
        let e2 = (2.0 * self.psi(x0, x).value).exp();
        let d = self.dim_n + 1;
        let (gm, _) = block_metric(&m);
        Ok(DMatrix::from_fn(d, d, |i, j| e2 * gm[i][j]))
    }

    /// Strictly convex reference function for the curvature monitor.
    pub fn strictly_convex_reference(&self) -> Result<ConvexReference> {
        if self.psi != ConformalFactor::Zero {
            return Err(Error::Unsupported(
                "no strictly convex reference for a perturbed conformal factor".into(),
            ));
        }
        let profile = match self.kind {
            AmbientKind::EuclideanPolar => RadialProfile::HalfSquare,
            AmbientKind::SpherePolar => RadialProfile::NegCos,
            AmbientKind::HyperbolicPolar => RadialProfile::Cosh,
            AmbientKind::Warped { .. } => {
                return Err(Error::Unsupported(
                    "warped ambient requires a user-supplied chi".into(),
                ))
            }
        };
        Ok(ConvexReference {
            ambient: self.clone(),
            profile,
        })
    }

    /// Reference built from a user-supplied radial profile `χ(x⁰)`.
    pub fn user_convex_reference(
        &self,
        chi: impl Fn(f64) -> f64 + Send + Sync + 'static,
        dchi: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Result<ConvexReference> {
        if self.psi != ConformalFactor::Zero {
            return Err(Error::Unsupported(
                "no strictly convex reference for a perturbed conformal factor".into(),
            ));
        }
        Ok(ConvexReference {
            ambient: self.clone(),
            profile: RadialProfile::User {
                chi: std::sync::Arc::new(chi),
                dchi: std::sync::Arc::new(dchi),
            },
        })
    }
}

/// Block metric `diag(1, σ)` and its inverse as 3×3 arrays.
fn block_metric<T: Scalar>(m: &SliceMetric<T>) -> ([[T; 3]; 3], [[T; 3]; 3]) {
    let z = T::cst(0.0);
    let mut g = [[z; 3]; 3];
    let mut gi = [[z; 3]; 3];
    g[0][0] = T::cst(1.0);
    gi[0][0] = T::cst(1.0);
    let inv = m.inverse();
    for i in 0..m.n {
        for j in 0..m.n {
            g[i + 1][j + 1] = m.sigma[i][j];
            gi[i + 1][j + 1] = inv[i][j];
        }
    }
    (g, gi)
}

/// Christoffels of `(dx⁰)² + σ_ij dxⁱdxʲ` from the slice metric derivatives.
pub fn christoffels_from_slice<T: Scalar>(m: &SliceMetric<T>) -> Christoffels<T> {
    let z = T::cst(0.0);
    let d = m.n + 1;
    let (_, gi) = block_metric(m);
    // dg[c][a][b] = ∂_c G_ab
    let mut dg = [[[z; 3]; 3]; 3];
    for i in 0..m.n {
        for j in 0..m.n {
            dg[0][i + 1][j + 1] = m.d0[i][j];
            for k in 0..m.n {
                dg[k + 1][i + 1][j + 1] = m.dk[k][i][j];
            }
        }
    }
    let mut gamma = [[[z; 3]; 3]; 3];
    for a in 0..d {
        for b in 0..d {
            for c in b..d {
                let mut s = z;
                for l in 0..d {
                    if gi[a][l].re() == 0.0 {
                        continue;
                    }
                    s = s + gi[a][l] * (dg[b][l][c] + dg[c][l][b] - dg[l][b][c]);
                }
                let v = s * 0.5;
                gamma[a][b][c] = v;
                gamma[a][c][b] = v;
            }
        }
    }
    Christoffels { dim: d, gamma }
}

#[derive(Clone)]
enum RadialProfile {
    HalfSquare,
    NegCos,
    Cosh,
    User {
        chi: std::sync::Arc<dyn Fn(f64) -> f64 + Send + Sync>,
        dchi: std::sync::Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    },
}

impl std::fmt::Debug for RadialProfile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RadialProfile::HalfSquare => write!(f, "HalfSquare"),
            RadialProfile::NegCos => write!(f, "NegCos"),
            RadialProfile::Cosh => write!(f, "Cosh"),
            RadialProfile::User { .. } => write!(f, "User"),
        }
    }
}

/// A radial function `χ(x⁰)` with positive definite ambient Hessian.
#[derive(Clone, Debug)]
pub struct ConvexReference {
    ambient: AmbientManifold,
    profile: RadialProfile,
}

impl ConvexReference {
    pub fn value(&self, x0: f64) -> f64 {
        match &self.profile {
            RadialProfile::HalfSquare => 0.5 * x0 * x0,
            RadialProfile::NegCos => -x0.cos(),
            RadialProfile::Cosh => x0.cosh(),
            RadialProfile::User { chi, .. } => chi(x0),
        }
    }

    fn derivatives(&self, x0: f64) -> (f64, f64) {
        match &self.profile {
            RadialProfile::HalfSquare => (x0, 1.0),
            RadialProfile::NegCos => (x0.sin(), x0.cos()),
            RadialProfile::Cosh => (x0.sinh(), x0.cosh()),
            RadialProfile::User { dchi, .. } => {
                let h = 1e-5 * x0.abs().max(1.0);
                (dchi(x0), (dchi(x0 + h) - dchi(x0 - h)) / (2.0 * h))
            }
        }
    }

    /// Coordinate Hessian `∇²χ` at `(x⁰, x)`: `χ'' dx⁰⊗dx⁰ + χ' (ρ'/ρ) σ`.
    pub fn hessian(&self, x0: f64, x: &[f64]) -> Result<DMatrix<f64>> {
        let m = self.ambient.slice_metric(x0, x)?;
        let (rho, drho) = self.ambient.warp(x0);
        let (d1, d2) = self.derivatives(x0);
        let d = self.ambient.dim_n + 1;
        let mut h = DMatrix::zeros(d, d);
        h[(0, 0)] = d2;
        for i in 0..m.n {
            for j in 0..m.n {
                h[(i + 1, j + 1)] = d1 * drho / rho * m.sigma[i][j];
            }
        }
        Ok(h)
    }

    /// Smallest eigenvalue of the Hessian relative to the ambient metric.
    pub fn min_hessian_eigenvalue(&self, x0: f64, x: &[f64]) -> Result<f64> {
        let h = self.hessian(x0, x)?;
        let g = self.ambient.metric_matrix(x0, x)?;
        let chol = g
            .cholesky()
            .ok_or_else(|| Error::Metric("ambient metric not SPD".into()))?;
        let linv = chol
            .l()
            .try_inverse()
            .ok_or_else(|| Error::Metric("singular Cholesky factor".into()))?;
        let a = &linv * h * linv.transpose();
        let a = (&a + a.transpose()) * 0.5;
        let eig = SymmetricEigen::new(a);
        Ok(eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min))
    }
}
