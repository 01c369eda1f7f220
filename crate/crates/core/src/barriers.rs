//! Validation of the barrier pair before any solve.

use serde::{Deserialize, Serialize};

use crate::ambient::AmbientManifold;
use crate::curvature::CurvatureFunction;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::hypersurface::{graph_quantities, GraphState};
use crate::rhs::RightHandSide;

/// Default absolute slack on the barrier inequalities.
pub const DEFAULT_SLACK: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct BarrierPair {
    pub u1: Vec<f64>,
    pub u2: Vec<f64>,
    pub epsilon1: f64,
    pub slack: f64,
}

/// Per-node gaps and their minima.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BarrierReport {
    /// `min (F − f)` over the upper barrier.
    pub margin_upper: f64,
    pub worst_upper: usize,
    /// `min (f − ε₁ − F)` over the admissible part `Σ` of the lower barrier.
    pub margin_lower: f64,
    pub worst_lower: Option<usize>,
    /// Number of admissible lower-barrier nodes.
    pub sigma_size: usize,
    pub nodes: usize,
    pub gaps_upper: Vec<f64>,
    /// `None` for nodes outside `Σ`.
    pub gaps_lower: Vec<Option<f64>>,
    pub max_graddsq: f64,
    pub max_kappa: f64,
}

/// `F − f` at every node of a graph; `None` where `κ ∉ Γ`.
pub fn curvature_gaps(
    state: &GraphState,
    grid: &Grid,
    f: &CurvatureFunction,
    rhs: &RightHandSide,
) -> Vec<Option<f64>> {
    state
        .nodes
        .iter()
        .enumerate()
        .map(|(i, node)| {
            let fv = f.evaluate(&node.kappa).ok()?;
            Some(fv - rhs.eval(state.u[i], grid.coords(i), node.nu))
        })
        .collect()
}

impl BarrierPair {
    pub fn new(u1: Vec<f64>, u2: Vec<f64>, epsilon1: f64) -> Self {
        Self {
            u1,
            u2,
            epsilon1,
            slack: DEFAULT_SLACK,
        }
    }

    pub fn check_ordering(&self) -> Result<()> {
        for (i, (a, b)) in self.u1.iter().zip(&self.u2).enumerate() {
            if !(a < b) {
                return Err(Error::Ordering {
                    node: i,
                    u1: *a,
                    u2: *b,
                });
            }
        }
        Ok(())
    }

    /// Checks `F > f` on `M₂` and `F ≤ f − ε₁` on the admissible part of `M₁`.
    pub fn validate(
        &self,
        amb: &AmbientManifold,
        grid: &Grid,
        f: &CurvatureFunction,
        rhs: &RightHandSide,
    ) -> Result<BarrierReport> {
        if self.u1.len() != grid.len() || self.u2.len() != grid.len() {
            return Err(Error::Configuration("barrier size does not match grid".into()));
        }
        if !(self.epsilon1 > 0.0) {
            return Err(Error::Configuration(format!(
                "barriers.epsilon1 must be positive, got {}",
                self.epsilon1
            )));
        }
        self.check_ordering()?;
        let s2 = graph_quantities(amb, grid, &self.u2)?;
        let s1 = graph_quantities(amb, grid, &self.u1)?;

        let upper = curvature_gaps(&s2, grid, f, rhs);
        let mut gaps_upper = Vec::with_capacity(upper.len());
        let (mut margin_upper, mut worst_upper) = (f64::INFINITY, 0);
        for (i, g) in upper.iter().enumerate() {
            // an inadmissible upper barrier cannot satisfy F > f
            let g = g.unwrap_or(f64::NEG_INFINITY);
            if g < margin_upper {
                margin_upper = g;
                worst_upper = i;
            }
            gaps_upper.push(g);
        }
        let gaps_lower: Vec<Option<f64>> = curvature_gaps(&s1, grid, f, rhs)
            .into_iter()
            .map(|g| g.map(|g| -g - self.epsilon1))
            .collect();
        let (mut margin_lower, mut worst_lower) = (f64::INFINITY, None);
        for (i, g) in gaps_lower.iter().enumerate() {
            if let Some(g) = g {
                if *g < margin_lower {
                    margin_lower = *g;
                    worst_lower = Some(i);
                }
            }
        }
        let sigma_size = gaps_lower.iter().filter(|g| g.is_some()).count();
        let report = BarrierReport {
            margin_upper,
            worst_upper,
            margin_lower,
            worst_lower,
            sigma_size,
            nodes: grid.len(),
            gaps_upper,
            gaps_lower,
            max_graddsq: s1.max_graddsq().max(s2.max_graddsq()),
            max_kappa: s1.max_kappa().max(s2.max_kappa()),
        };
        if !(report.margin_upper > -self.slack) {
            return Err(Error::Barrier {
                barrier: "upper (F > f on M2)",
                node: report.worst_upper,
                margin: report.margin_upper,
            });
        }
        if !(report.margin_lower > -self.slack) {
            return Err(Error::Barrier {
                barrier: "lower (F <= f - epsilon1 on Sigma)",
                node: report.worst_lower.unwrap_or(0),
                margin: report.margin_lower,
            });
        }
        Ok(report)
    }
}
