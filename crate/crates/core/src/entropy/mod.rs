//! Von Neumann entropy of the normalized Laplacian and monotonicity audits
//! of weight trajectories.
//!
//! `H = −Σ λ ln λ` over the eigenvalues of `L/n`, with
//! `L = I − D^{-1/2} A D^{-1/2}` and `0 ln 0 := 0`. Entropy is a monitor
//! only; nothing here is differentiated.

mod eigen;

use std::fmt::Write as _;

pub use eigen::{symmetric_eigen, SymmetricEigen, MAX_SWEEPS, OFF_DIAGONAL_TOL};

use crate::error::{Error, Result};
use crate::graph::WeightedGraph;
use crate::linalg::Matrix;

/// Default per-step slack for discretised trajectories.
pub const DEFAULT_TOL: f64 = 1e-6;

pub const CSV_HEADER: &str = "t,entropy,delta,violation";

pub fn normalized_laplacian(g: &WeightedGraph) -> Result<Matrix<f64>> {
    let n = g.num_nodes();
    let deg = g.weighted_degrees();
    if let Some(v) = deg.iter().position(|&d| d <= 0.0) {
        return Err(Error::domain(format!("node {v} has zero weighted degree")));
    }
    let inv_sqrt: Vec<f64> = deg.iter().map(|d| 1.0 / d.sqrt()).collect();
    let mut l = Matrix::identity(n);
    for (i, j, w) in g.edges() {
        let v = -w * inv_sqrt[i] * inv_sqrt[j];
        l.set(i, j, v);
        l.set(j, i, v);
    }
    Ok(l)
}

/// Eigenvalues of `L/n` in ascending order.
pub fn scaled_laplacian_spectrum(g: &WeightedGraph) -> Result<Vec<f64>> {
    let n = g.num_nodes() as f64;
    let l = normalized_laplacian(g)?.map(|x| x / n);
    Ok(symmetric_eigen(&l)?.values)
}

pub fn von_neumann_entropy(g: &WeightedGraph) -> Result<f64> {
    if g.num_nodes() < 2 {
        return Err(Error::domain("entropy needs at least two nodes"));
    }
    let spectrum = scaled_laplacian_spectrum(g)?;
    Ok(spectrum
        .into_iter()
        .filter(|&l| l > 0.0)
        .map(|l| -l * l.ln())
        .sum())
}

/// Timestamped entropy values.
#[derive(Clone, Debug, PartialEq)]
pub struct EntropySeries {
    pub points: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MonotonicityReport {
    pub series: EntropySeries,
    /// `(t, ΔH)` for every step with `ΔH < −tol`, stamped with the later time.
    pub violations: Vec<(f64, f64)>,
    pub verdict: bool,
    pub tol: f64,
}

impl MonotonicityReport {
    /// Most negative step change (0 for a single snapshot).
    pub fn min_delta(&self) -> f64 {
        self.series
            .points
            .windows(2)
            .map(|w| w[1].1 - w[0].1)
            .fold(0.0, f64::min)
    }

    /// One CSV row per snapshot under [`CSV_HEADER`].
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        self.write_rows(&mut out);
        out
    }

    /// Appends rows without the header.
    pub fn write_rows(&self, out: &mut String) {
        let mut prev: Option<f64> = None;
        for &(t, h) in &self.series.points {
            let delta = prev.map_or(0.0, |p| h - p);
            let violation = prev.is_some() && delta < -self.tol;
            let _ = writeln!(out, "{t},{h},{delta},{violation}");
            prev = Some(h);
        }
    }
}

/// Audits a trajectory of graphs over one fixed topology.
pub fn audit(trajectory: &[(f64, WeightedGraph)], tol: f64) -> Result<MonotonicityReport> {
    if !(tol >= 0.0) {
        return Err(Error::domain(format!("tolerance must be non-negative, got {tol}")));
    }
    if let Some((_, first)) = trajectory.first() {
        for (t, g) in trajectory {
            if g.topology() != first.topology() {
                return Err(Error::domain(format!(
                    "snapshot at t = {t} has a different topology"
                )));
            }
        }
    }
    for w in trajectory.windows(2) {
        if !(w[1].0 > w[0].0) {
            return Err(Error::domain(format!(
                "timestamps must increase strictly ({} then {})",
                w[0].0, w[1].0
            )));
        }
    }
    let mut points = Vec::with_capacity(trajectory.len());
    for (t, g) in trajectory {
        points.push((*t, von_neumann_entropy(g)?));
    }
    let violations: Vec<(f64, f64)> = points
        .windows(2)
        .map(|w| (w[1].0, w[1].1 - w[0].1))
        .filter(|&(_, d)| d < -tol)
        .collect();
    Ok(MonotonicityReport {
        verdict: violations.is_empty(),
        series: EntropySeries { points },
        violations,
        tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(n: usize, pairs: &[(usize, usize)]) -> WeightedGraph {
        let e: Vec<_> = pairs.iter().map(|&(i, j)| (i, j, 1.0)).collect();
        WeightedGraph::from_edges(n, &e).unwrap()
    }

    #[test]
    fn laplacian_examples() {
        let k2 = normalized_laplacian(&unit(2, &[(0, 1)])).unwrap();
        assert_eq!(k2.data(), &[1.0, -1.0, -1.0, 1.0]);
        let k3 = normalized_laplacian(&unit(3, &[(0, 1), (1, 2), (0, 2)])).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { -0.5 };
                assert!((k3.get(i, j) - expect).abs() < 1e-15);
            }
        }
        assert!(normalized_laplacian(&unit(3, &[(0, 1)])).is_err());
    }

    #[test]
    fn entropy_examples() {
        assert!(von_neumann_entropy(&unit(2, &[(0, 1)])).unwrap().abs() < 1e-12);
        let h3 = von_neumann_entropy(&unit(3, &[(0, 1), (1, 2), (0, 2)])).unwrap();
        assert!((h3 - 2f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn audit_constant_weights() {
        let g = unit(4, &[(0, 1), (1, 2), (2, 3), (0, 3)]);
        let traj: Vec<_> = (0..5).map(|k| (k as f64, g.clone())).collect();
        let r = audit(&traj, 0.0).unwrap();
        assert!(r.verdict);
        assert_eq!(r.series.points.len(), 5);
        let csv = r.to_csv();
        assert!(csv.starts_with("t,entropy,delta,violation\n"));
        assert_eq!(csv.lines().count(), 6);
    }

    #[test]
    fn audit_flags_decrease() {
        let a = WeightedGraph::from_edges(3, &[(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)]).unwrap();
        let b = a.with_weights(vec![1.0, 1.0, 0.01]).unwrap();
        let r = audit(&[(0.0, a), (1.0, b)], 1e-6).unwrap();
        assert!(!r.verdict);
        assert_eq!(r.violations.len(), 1);
        assert!(r.to_csv().lines().nth(2).unwrap().ends_with("true"));
    }

    #[test]
    fn audit_rejects_mismatch() {
        let a = unit(3, &[(0, 1), (1, 2)]);
        let b = unit(3, &[(0, 1), (0, 2)]);
        assert!(audit(&[(0.0, a.clone()), (1.0, b)], 1e-6).is_err());
        assert!(audit(&[(1.0, a.clone()), (1.0, a.clone())], 1e-6).is_err());
        assert!(audit(&[(0.0, a)], -1.0).is_err());
    }
}
