//! Scenario files: flat `key = value` lines with dotted sections.
//!
//! Blank lines and text after `#` are ignored. Every key may appear at most
//! once. [`Scenario::to_text`] writes every key in a fixed order, so
//! `parse(to_text(s)) == s` for any parsed scenario.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::ambient::{AmbientKind, AmbientManifold, ConformalFactor};
use crate::curvature::CurvatureFunction;
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::grid::Grid;
use crate::rhs::{clamp_rhs, RightHandSide};

#[derive(Clone, Debug, PartialEq)]
pub enum AmbientChoice {
    EuclideanPolar,
    SpherePolar,
    HyperbolicPolar,
    FlatSlab,
    Warped { coeffs: Vec<f64>, x0_min: f64, x0_max: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub seed: u64,
    pub ambient: AmbientChoice,
    pub dim: usize,
    pub psi_amplitude: f64,
    pub curvature: CurvatureFunction,
    pub f: Expr,
    pub c1: f64,
    pub c2: f64,
    pub clamp: bool,
    pub u1: Expr,
    pub u2: Expr,
    pub epsilon1: f64,
    pub slack: f64,
    pub n_theta: usize,
    pub n_phi: usize,
    pub eps0: f64,
    pub n_levels: usize,
    /// `None` selects the doubling search for `λ₀`.
    pub lambda: Option<f64>,
    /// `None` selects the trial sequence for `τ₀`.
    pub tau0: Option<f64>,
    pub dt0: f64,
    pub tol: f64,
    pub max_steps: usize,
    pub grad_cap: Option<f64>,
    pub kappa_cap: Option<f64>,
    pub uniqueness_trials: usize,
    pub fd_check: bool,
    pub c2_monitor: bool,
    pub lambda_w: f64,
    pub mu_w: f64,
    /// Exit code the `suite` command expects for this scenario.
    pub expect_exit: i32,
}

const KEYS: &[&str] = &[
    "name",
    "seed",
    "ambient.kind",
    "ambient.dim_n",
    "ambient.warp",
    "ambient.x0_min",
    "ambient.x0_max",
    "ambient.psi_amplitude",
    "curvature.kind",
    "curvature.k",
    "rhs.f",
    "rhs.c1",
    "rhs.c2",
    "rhs.clamp",
    "barriers.u1",
    "barriers.u2",
    "barriers.epsilon1",
    "barriers.slack",
    "grid.n_theta",
    "grid.n_phi",
    "tubular.eps0",
    "tubular.n_levels",
    "homotopy.lambda",
    "homotopy.tau0",
    "homotopy.dt0",
    "homotopy.tol",
    "homotopy.max_steps",
    "monitors.grad_cap",
    "monitors.kappa_cap",
    "diagnostics.uniqueness_trials",
    "diagnostics.fd_check",
    "diagnostics.c2_monitor",
    "diagnostics.lambda_w",
    "diagnostics.mu_w",
    "expect.exit",
];

/// Parsed key-value pairs with the line each came from.
struct Entries(Vec<(String, String, usize, bool)>);

impl Entries {
    fn take(&mut self, key: &str) -> Option<(String, usize)> {
        self.0.iter_mut().find(|e| e.0 == key && !e.3).map(|e| {
            e.3 = true;
            (e.1.clone(), e.2)
        })
    }

    fn value<T: FromStr>(&mut self, key: &str, default: Option<T>) -> Result<T> {
        match self.take(key) {
            Some((v, line)) => v.parse().map_err(|_| Error::Parse {
                line,
                message: format!("invalid value {v:?} for {key}"),
            }),
            None => default.ok_or_else(|| Error::Parse {
                line: 0,
                message: format!("missing required key {key}"),
            }),
        }
    }

    /// `auto` or a number.
    fn auto(&mut self, key: &str) -> Result<Option<f64>> {
        match self.take(key) {
            None => Ok(None),
            Some((v, _)) if v == "auto" => Ok(None),
            Some((v, line)) => v.parse().map(Some).map_err(|_| Error::Parse {
                line,
                message: format!("{key} must be a number or auto, got {v:?}"),
            }),
        }
    }

    fn expr(&mut self, key: &str) -> Result<Expr> {
        let (v, line) = self.take(key).ok_or_else(|| Error::Parse {
            line: 0,
            message: format!("missing required key {key}"),
        })?;
        Expr::parse(&v).map_err(|e| Error::Parse {
            line,
            message: format!("{key}: {e}"),
        })
    }
}

fn fmt_auto(v: Option<f64>) -> String {
    v.map_or_else(|| "auto".into(), |x| x.to_string())
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (k, v) = body.split_once('=').ok_or_else(|| Error::Parse {
                line,
                message: format!("expected key = value, got {body:?}"),
            })?;
            let (k, v) = (k.trim(), v.trim());
            if !KEYS.contains(&k) {
                return Err(Error::Parse {
                    line,
                    message: format!("unknown key {k:?}"),
                });
            }
            if entries.iter().any(|(e, _, _, _): &(String, String, usize, bool)| e == k) {
                return Err(Error::Parse {
                    line,
                    message: format!("duplicate key {k:?}"),
                });
            }
            entries.push((k.to_string(), v.to_string(), line, false));
        }
        let mut e = Entries(entries);

        let kind: String = e.value("ambient.kind", None)?;
        let warp = e.take("ambient.warp");
        let x0_min = e.value::<f64>("ambient.x0_min", Some(f64::NEG_INFINITY))?;
        let x0_max = e.value::<f64>("ambient.x0_max", Some(f64::INFINITY))?;
        let ambient = match kind.as_str() {
            "euclidean_polar" => AmbientChoice::EuclideanPolar,
            "sphere_polar" => AmbientChoice::SpherePolar,
            "hyperbolic_polar" => AmbientChoice::HyperbolicPolar,
            "flat_slab" => AmbientChoice::FlatSlab,
            "warped" => {
                let (w, line) = warp.clone().ok_or_else(|| Error::Parse {
                    line: 0,
                    message: "ambient.kind = warped requires ambient.warp".into(),
                })?;
                let coeffs = w
                    .split_whitespace()
                    .map(|c| c.parse::<f64>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|_| Error::Parse {
                        line,
                        message: format!("ambient.warp must be numbers, got {w:?}"),
                    })?;
                AmbientChoice::Warped { coeffs, x0_min, x0_max }
            }
            other => {
                return Err(Error::Parse {
                    line: 0,
                    message: format!("unknown ambient.kind {other:?}"),
                })
            }
        };
        if warp.is_some() && !matches!(ambient, AmbientChoice::Warped { .. }) {
            return Err(Error::Parse {
                line: warp.map_or(0, |w| w.1),
                message: "ambient.warp is only valid with ambient.kind = warped".into(),
            });
        }
        let function: String = e.value("curvature.kind", None)?;
        let k: Option<usize> = e.take("curvature.k").map(|(v, line)| {
            v.parse().map_err(|_| Error::Parse {
                line,
                message: format!("invalid curvature.k {v:?}"),
            })
        }).transpose()?;
        let curvature = match (function.as_str(), k) {
            ("mean", None) => CurvatureFunction::Mean,
            ("gauss_root", None) => CurvatureFunction::GaussRoot,
            ("sigma_k_root", Some(k)) => CurvatureFunction::SigmaKRoot { k },
            ("sigma_k_root", None) => {
                return Err(Error::Parse {
                    line: 0,
                    message: "sigma_k_root requires curvature.k".into(),
                })
            }
            (f, _) => {
                return Err(Error::Parse {
                    line: 0,
                    message: format!("unknown curvature.kind {f:?} or stray curvature.k"),
                })
            }
        };
        let sc = Scenario {
            name: e.value("name", Some("scenario".to_string()))?,
            seed: e.value("seed", Some(0))?,
            ambient,
            dim: e.value("ambient.dim_n", Some(1))?,
            psi_amplitude: e.value("ambient.psi_amplitude", Some(0.0))?,
            curvature,
            f: e.expr("rhs.f")?,
            c1: e.value("rhs.c1", None)?,
            c2: e.value("rhs.c2", None)?,
            clamp: e.value("rhs.clamp", Some(false))?,
            u1: e.expr("barriers.u1")?,
            u2: e.expr("barriers.u2")?,
            epsilon1: e.value("barriers.epsilon1", None)?,
            slack: e.value("barriers.slack", Some(crate::barriers::DEFAULT_SLACK))?,
            n_theta: e.value("grid.n_theta", Some(64))?,
            n_phi: e.value("grid.n_phi", Some(0))?,
            eps0: e.value("tubular.eps0", Some(0.2))?,
            n_levels: e.value("tubular.n_levels", Some(5))?,
            lambda: e.auto("homotopy.lambda")?,
            tau0: e.auto("homotopy.tau0")?,
            dt0: e.value("homotopy.dt0", Some(0.1))?,
            tol: e.value("homotopy.tol", Some(1e-10))?,
            max_steps: e.value("homotopy.max_steps", Some(2000))?,
            grad_cap: e.auto("monitors.grad_cap")?,
            kappa_cap: e.auto("monitors.kappa_cap")?,
            uniqueness_trials: e.value("diagnostics.uniqueness_trials", Some(20))?,
            fd_check: e.value("diagnostics.fd_check", Some(true))?,
            c2_monitor: e.value("diagnostics.c2_monitor", Some(true))?,
            lambda_w: e.value("diagnostics.lambda_w", Some(1.0))?,
            mu_w: e.value("diagnostics.mu_w", Some(1.0))?,
            expect_exit: e.value("expect.exit", Some(0))?,
        };
        if sc.name.chars().any(|c| c.is_whitespace()) {
            return Err(Error::Parse {
                line: 0,
                message: "name must not contain whitespace".into(),
            });
        }
        Ok(sc)
    }

    /// Canonical text: every key, fixed order, shortest round-trip floats.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put("name", self.name.clone());
        put("seed", self.seed.to_string());
        let kind = match &self.ambient {
            AmbientChoice::EuclideanPolar => "euclidean_polar",
            AmbientChoice::SpherePolar => "sphere_polar",
            AmbientChoice::HyperbolicPolar => "hyperbolic_polar",
            AmbientChoice::FlatSlab => "flat_slab",
            AmbientChoice::Warped { .. } => "warped",
        };
        put("ambient.kind", kind.into());
        put("ambient.dim_n", self.dim.to_string());
        if let AmbientChoice::Warped { coeffs, x0_min, x0_max } = &self.ambient {
            put(
                "ambient.warp",
                coeffs.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" "),
            );
            put("ambient.x0_min", x0_min.to_string());
            put("ambient.x0_max", x0_max.to_string());
        }
        put("ambient.psi_amplitude", self.psi_amplitude.to_string());
        match &self.curvature {
            CurvatureFunction::Mean => put("curvature.kind", "mean".into()),
            CurvatureFunction::GaussRoot => put("curvature.kind", "gauss_root".into()),
            CurvatureFunction::SigmaKRoot { k } => {
                put("curvature.kind", "sigma_k_root".into());
                put("curvature.k", k.to_string());
            }
        }
        put("rhs.f", self.f.source().into());
        put("rhs.c1", self.c1.to_string());
        put("rhs.c2", self.c2.to_string());
        put("rhs.clamp", self.clamp.to_string());
        put("barriers.u1", self.u1.source().into());
        put("barriers.u2", self.u2.source().into());
        put("barriers.epsilon1", self.epsilon1.to_string());
        put("barriers.slack", self.slack.to_string());
        put("grid.n_theta", self.n_theta.to_string());
        put("grid.n_phi", self.n_phi.to_string());
        put("tubular.eps0", self.eps0.to_string());
        put("tubular.n_levels", self.n_levels.to_string());
        put("homotopy.lambda", fmt_auto(self.lambda));
        put("homotopy.tau0", fmt_auto(self.tau0));
        put("homotopy.dt0", self.dt0.to_string());
        put("homotopy.tol", self.tol.to_string());
        put("homotopy.max_steps", self.max_steps.to_string());
        put("monitors.grad_cap", fmt_auto(self.grad_cap));
        put("monitors.kappa_cap", fmt_auto(self.kappa_cap));
        put("diagnostics.uniqueness_trials", self.uniqueness_trials.to_string());
        put("diagnostics.fd_check", self.fd_check.to_string());
        put("diagnostics.c2_monitor", self.c2_monitor.to_string());
        put("diagnostics.lambda_w", self.lambda_w.to_string());
        put("diagnostics.mu_w", self.mu_w.to_string());
        put("expect.exit", self.expect_exit.to_string());
        s
    }

    /// Overrides the angular resolution: `N` longitudes, and `N/2`
    /// latitude rows when `n = 2`.
    pub fn with_grid_n(mut self, n: usize) -> Self {
        self.n_theta = n;
        if self.dim == 2 {
            self.n_phi = n / 2;
        }
        self
    }

    pub fn ambient_manifold(&self) -> Result<AmbientManifold> {
        let amb = match &self.ambient {
            AmbientChoice::EuclideanPolar => AmbientManifold::new(AmbientKind::EuclideanPolar, self.dim)?,
            AmbientChoice::SpherePolar => AmbientManifold::new(AmbientKind::SpherePolar, self.dim)?,
            AmbientChoice::HyperbolicPolar => AmbientManifold::new(AmbientKind::HyperbolicPolar, self.dim)?,
            AmbientChoice::FlatSlab => {
                if !(1..=2).contains(&self.dim) {
                    return Err(Error::Configuration(format!("ambient.dim_n must be 1 or 2, got {}", self.dim)));
                }
                AmbientManifold::flat_slab(self.dim)
            }
            AmbientChoice::Warped { coeffs, x0_min, x0_max } => AmbientManifold::new(
                AmbientKind::Warped {
                    coeffs: coeffs.clone(),
                    x0_min: *x0_min,
                    x0_max: *x0_max,
                },
                self.dim,
            )?,
        };
        Ok(if self.psi_amplitude != 0.0 {
            amb.with_psi(ConformalFactor::Perturbed {
                amplitude: self.psi_amplitude,
            })
        } else {
            amb
        })
    }

    pub fn grid(&self) -> Result<Grid> {
        match self.dim {
            1 => Grid::circle(self.n_theta),
            2 => Grid::sphere(self.n_phi, self.n_theta),
            d => Err(Error::Configuration(format!("ambient.dim_n must be 1 or 2, got {d}"))),
        }
    }

    pub fn right_hand_side(&self) -> Result<RightHandSide> {
        let f = RightHandSide::new(self.f.clone(), self.c1, self.c2)?;
        if self.clamp {
            clamp_rhs(&f, self.c1, self.c2)
        } else {
            Ok(f)
        }
    }
}
