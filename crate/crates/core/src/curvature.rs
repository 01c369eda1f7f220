//! Curvature functions of the principal curvatures and the generalized
//! eigenvalue machinery that produces them.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative gap below which neighbouring eigenvalues are treated as one cluster.
const CLUSTER_TOL: f64 = 1e-8;

/// Symmetric, monotone, concave, degree-one homogeneous `F(κ)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CurvatureFunction {
    /// `Σ κ_i`, defined on all of `ℝⁿ`.
    Mean,
    /// `σ_k(κ)^{1/k}` on the Gårding cone `Γ_k`.
    SigmaKRoot { k: usize },
    /// `(Π κ_i)^{1/n}` on the positive cone.
    GaussRoot,
}

/// Elementary symmetric polynomials `σ_0 ..= σ_n`.
pub fn elementary_symmetric(kappa: &[f64]) -> Vec<f64> {
    let mut e = vec![0.0; kappa.len() + 1];
    e[0] = 1.0;
    for (m, &x) in kappa.iter().enumerate() {
        for j in (1..=m + 1).rev() {
            e[j] += x * e[j - 1];
        }
    }
    e
}

/// `σ_j(κ | i)` for `j = 0..n-1`, the polynomials with entry `i` removed.
fn elementary_symmetric_without(kappa: &[f64], i: usize) -> Vec<f64> {
    let rest: Vec<f64> = kappa
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, &x)| x)
        .collect();
    elementary_symmetric(&rest)
}

impl CurvatureFunction {
    pub fn name(&self) -> String {
        match self {
            CurvatureFunction::Mean => "mean".into(),
            CurvatureFunction::SigmaKRoot { k } => format!("sigma_k_root({k})"),
            CurvatureFunction::GaussRoot => "gauss_root".into(),
        }
    }

    /// Checks that the function is defined in dimension `n`.
    pub fn check_dimension(&self, n: usize) -> Result<()> {
        if let CurvatureFunction::SigmaKRoot { k } = self {
            if *k == 0 || *k > n {
                return Err(Error::Configuration(format!(
                    "sigma_k_root requires 1 <= k <= n, got k = {k}, n = {n}"
                )));
            }
        }
        Ok(())
    }

    /// Open cone membership.
    pub fn in_cone(&self, kappa: &[f64]) -> bool {
        if kappa.iter().any(|x| !x.is_finite()) {
            return false;
        }
        match self {
            CurvatureFunction::Mean => true,
            CurvatureFunction::GaussRoot => kappa.iter().all(|&x| x > 0.0),
            CurvatureFunction::SigmaKRoot { k } => {
                let e = elementary_symmetric(kappa);
                *k <= kappa.len() && e[1..=*k].iter().all(|&s| s > 0.0)
            }
        }
    }

    /// `F(κ)`; errors outside the open cone.
    pub fn evaluate(&self, kappa: &[f64]) -> Result<f64> {
        if !self.in_cone(kappa) {
            return Err(Error::ConeViolation {
                function: self.name(),
                kappa: kappa.to_vec(),
            });
        }
        // sorting first makes the value bitwise symmetric
        let mut sorted = kappa.to_vec();
        sorted.sort_by(f64::total_cmp);
        let kappa = sorted.as_slice();
        Ok(match self {
            CurvatureFunction::Mean => kappa.iter().sum(),
            CurvatureFunction::GaussRoot => {
                let n = kappa.len() as f64;
                (kappa.iter().map(|x| x.ln()).sum::<f64>() / n).exp()
            }
            CurvatureFunction::SigmaKRoot { k } => {
                let e = elementary_symmetric(kappa);
                e[*k].powf(1.0 / *k as f64)
            }
        })
    }

    /// `∂F/∂κ_i`; errors unless `κ` is strictly inside the cone.
    pub fn gradient(&self, kappa: &[f64]) -> Result<Vec<f64>> {
        if !self.in_cone(kappa) {
            return Err(Error::IllConditioned(kappa.to_vec()));
        }
        let n = kappa.len();
        Ok(match self {
            CurvatureFunction::Mean => vec![1.0; n],
            CurvatureFunction::GaussRoot => {
                let f = self.evaluate(kappa)?;
                kappa.iter().map(|&x| f / (n as f64 * x)).collect()
            }
            CurvatureFunction::SigmaKRoot { k } => {
                let k = *k;
                let e = elementary_symmetric(kappa);
                let pre = e[k].powf(1.0 / k as f64 - 1.0) / k as f64;
                (0..n)
                    .map(|i| pre * elementary_symmetric_without(kappa, i)[k - 1])
                    .collect()
            }
        })
    }

    /// Signed distance to `∂Γ` along `(1,…,1)`: the supremum of `s` with
    /// `κ − s·1 ∈ Γ`. Positive exactly on the open cone.
    pub fn cone_margin(&self, kappa: &[f64]) -> f64 {
        let min = kappa.iter().copied().fold(f64::INFINITY, f64::min);
        let max = kappa.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        match self {
            CurvatureFunction::Mean => f64::INFINITY,
            CurvatureFunction::GaussRoot => min,
            CurvatureFunction::SigmaKRoot { .. } => {
                // Γ₊ ⊂ Γ_k gives s* ≥ min κ; at s = max κ every entry is ≤ 0.
                let shifted = |s: f64| -> Vec<f64> { kappa.iter().map(|x| x - s).collect() };
                let (mut lo, mut hi) = (min, max);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    if self.in_cone(&shifted(mid)) {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                lo
            }
        }
    }
}

/// Generalized eigenvalues of `(h, g)`, sorted ascending, with a
/// `g`-orthonormal frame stored column-wise.
#[derive(Clone, Debug)]
pub struct PrincipalCurvatures {
    pub kappa: Vec<f64>,
    pub frame: Option<DMatrix<f64>>,
}

/// Solves `h ξ = κ g ξ` through the Cholesky factor of `g`.
pub fn principal_curvatures(h: &DMatrix<f64>, g: &DMatrix<f64>) -> Result<PrincipalCurvatures> {
    let n = g.nrows();
    if g.ncols() != n || h.nrows() != n || h.ncols() != n {
        return Err(Error::Metric("dimension mismatch in eigenproblem".into()));
    }
    if n == 1 {
        let g00 = g[(0, 0)];
        if !(g00 > 0.0) {
            return Err(Error::Metric(format!("g = {g00} is not positive")));
        }
        return Ok(PrincipalCurvatures {
            kappa: vec![h[(0, 0)] / g00],
            frame: Some(DMatrix::from_element(1, 1, 1.0 / g00.sqrt())),
        });
    }
    let gs = (g + g.transpose()) * 0.5;
    let chol = gs
        .cholesky()
        .ok_or_else(|| Error::Metric("induced metric is not positive definite".into()))?;
    let l = chol.l();
    let linv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Metric("singular Cholesky factor".into()))?;
    let a = &linv * h * linv.transpose();
    let a = (&a + a.transpose()) * 0.5;
    let eig = SymmetricEigen::new(a);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let kappa = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let lt_inv = linv.transpose();
    let mut frame = DMatrix::zeros(n, n);
    for (c, &i) in order.iter().enumerate() {
        let xi = &lt_inv * eig.eigenvectors.column(i);
        frame.set_column(c, &xi);
    }
    Ok(PrincipalCurvatures {
        kappa,
        frame: Some(frame),
    })
}

/// Coefficients of `dF = Fh^{ij} dh_ij − Fg^{ij} dg_ij`.
///
/// Within a cluster of nearly equal eigenvalues the weights `F_a` are
/// replaced by their cluster mean, so the result does not depend on the
/// arbitrary choice of eigenbasis there.
#[derive(Clone, Debug)]
pub struct SpectralDerivative {
    pub value: f64,
    pub kappa: Vec<f64>,
    pub fh: DMatrix<f64>,
    pub fg: DMatrix<f64>,
}

pub fn spectral_derivative(
    f: &CurvatureFunction,
    h: &DMatrix<f64>,
    g: &DMatrix<f64>,
) -> Result<SpectralDerivative> {
    let pc = principal_curvatures(h, g)?;
    let value = f.evaluate(&pc.kappa)?;
    let mut grad = f.gradient(&pc.kappa)?;
    let n = pc.kappa.len();
    let scale = pc.kappa.iter().fold(1.0f64, |m, k| m.max(k.abs()));
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && pc.kappa[end] - pc.kappa[end - 1] <= CLUSTER_TOL * scale {
            end += 1;
        }
        if end - start > 1 {
            let mean = grad[start..end].iter().sum::<f64>() / (end - start) as f64;
            grad[start..end].iter_mut().for_each(|x| *x = mean);
        }
        start = end;
    }
    let frame = pc.frame.as_ref().expect("frame computed");
    let mut fh = DMatrix::zeros(n, n);
    let mut fg = DMatrix::zeros(n, n);
    for a in 0..n {
        let xi = frame.column(a);
        let outer = xi * xi.transpose();
        fh += &outer * grad[a];
        fg += &outer * (grad[a] * pc.kappa[a]);
    }
    Ok(SpectralDerivative {
        value,
        kappa: pc.kappa,
        fh,
        fg,
    })
}

/// Checks `κ_i(h + s g, g) = κ_i(h, g) + s` to `1e-10` relative.
pub fn minmax_shift_check(h: &DMatrix<f64>, g: &DMatrix<f64>, s: f64) -> std::result::Result<(), String> {
    let base = principal_curvatures(h, g).map_err(|e| e.to_string())?;
    let shifted = principal_curvatures(&(h + g * s), g).map_err(|e| e.to_string())?;
    for (i, (a, b)) in base.kappa.iter().zip(&shifted.kappa).enumerate() {
        let tol = 1e-10 * (1.0 + a.abs() + s.abs());
        if (b - a - s).abs() > tol {
            return Err(format!("κ_{i}: {a} shifted by {s} gave {b}"));
        }
    }
    Ok(())
}

/// Checks `κ_i(h, g) ≤ κ_i(h + d, g)` for a positive semidefinite `d`.
pub fn minmax_monotone_check(
    h: &DMatrix<f64>,
    d: &DMatrix<f64>,
    g: &DMatrix<f64>,
) -> std::result::Result<(), String> {
    let base = principal_curvatures(h, g).map_err(|e| e.to_string())?;
    let up = principal_curvatures(&(h + d), g).map_err(|e| e.to_string())?;
    for (i, (a, b)) in base.kappa.iter().zip(&up.kappa).enumerate() {
        if *b < *a - 1e-10 * (1.0 + a.abs()) {
            return Err(format!("κ_{i} decreased from {a} to {b}"));
        }
    }
    Ok(())
}

/// Reconstructs `Σ κ_a (g ξ_a)(g ξ_a)ᵀ`, which equals `h`.
pub fn reconstruct(pc: &PrincipalCurvatures, g: &DMatrix<f64>) -> DMatrix<f64> {
    let n = pc.kappa.len();
    let frame = pc.frame.as_ref().expect("frame computed");
    let mut out = DMatrix::zeros(n, n);
    for a in 0..n {
        let w: DVector<f64> = g * frame.column(a);
        out += &w * w.transpose() * pc.kappa[a];
    }
    out
}
