//! Forman-Ricci curvature with unit node weights and the Ricci-flow
//! right-hand sides built on it.
//!
//! For an edge `(i, j)`:
//!
//! ```text
//! R(i, j) = 2 − ( Σ_{u∼i, u≠j} √(w_ij / w_iu) + Σ_{v∼j, v≠i} √(w_ij / w_jv) )
//! ```
//!
//! The bracketed sum is exposed separately as [`edge_g`].

use crate::error::{Error, Result};
use crate::graph::{GraphTopology, WeightedGraph};
use crate::scalar::Real;

/// Per-edge curvature aligned with the graph's edge list.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeCurvature(pub Vec<f64>);

/// Per-edge `dw/dt` aligned with the graph's edge list.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowRhs(pub Vec<f64>);

/// The neighbour sums `g(e_ij)` for arbitrary scalars. Weights must be
/// positive.
pub fn edge_g_generic<T: Real>(topo: &GraphTopology, weights: &[T]) -> Vec<T> {
    let roots: Vec<T> = weights.iter().map(|&w| w.sqrt()).collect();
    topo.pairs()
        .iter()
        .enumerate()
        .map(|(e, &(i, j))| {
            let mut acc = T::zero();
            for end in [i, j] {
                for &f in topo.incident(end) {
                    if f != e {
                        acc = acc + roots[e] / roots[f];
                    }
                }
            }
            acc
        })
        .collect()
}

/// Forman curvature `2 − g(e)` for arbitrary scalars.
pub fn forman_generic<T: Real>(topo: &GraphTopology, weights: &[T]) -> Vec<T> {
    edge_g_generic(topo, weights)
        .into_iter()
        .map(|g| -g + 2.0)
        .collect()
}

pub fn forman_curvature(g: &WeightedGraph) -> EdgeCurvature {
    EdgeCurvature(forman_generic(g.topology(), g.weights()))
}

/// Per-edge diagnostic `g(e_ij)`.
pub fn edge_g(g: &WeightedGraph) -> Vec<f64> {
    edge_g_generic(g.topology(), g.weights())
}

/// Total curvature `Σ_e R(e)`.
pub fn ricci_total(g: &WeightedGraph) -> f64 {
    forman_curvature(g).0.iter().sum()
}

/// Canonical flow `dw/dt = −R w`.
pub fn canonical_flow_rhs(g: &WeightedGraph) -> FlowRhs {
    let r = forman_curvature(g).0;
    FlowRhs(r.iter().zip(g.weights()).map(|(r, w)| -r * w).collect())
}

/// Checks that constraint values are aligned and lie in the open unit
/// interval, so that `e^f` stays in `(1, e)`.
pub fn validate_constraint_values(num_edges: usize, f_vals: &[f64]) -> Result<()> {
    if f_vals.len() != num_edges {
        return Err(Error::Shape(format!(
            "{} constraint values for {num_edges} edges",
            f_vals.len()
        )));
    }
    if let Some(f) = f_vals.iter().find(|f| !(**f > 0.0 && **f < 1.0)) {
        return Err(Error::Contract(format!(
            "constraint value {f} outside (0, 1)"
        )));
    }
    Ok(())
}

/// Constrained flow `dw/dt = (R − e^f) w`.
pub fn constrained_flow_rhs(g: &WeightedGraph, f_vals: &[f64]) -> Result<FlowRhs> {
    validate_constraint_values(g.num_edges(), f_vals)?;
    let r = forman_curvature(g).0;
    Ok(FlowRhs(
        r.iter()
            .zip(f_vals)
            .zip(g.weights())
            .map(|((r, f), w)| (r - f.exp()) * w)
            .collect(),
    ))
}
