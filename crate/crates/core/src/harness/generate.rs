//! Seeded synthetic systems.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::curvature::forman_curvature;
use crate::entropy::{self, DEFAULT_TOL};
use crate::error::{Error, Result};
use crate::geometry::Curvature;
use crate::graph::WeightedGraph;
use crate::network::Snapshot;
use crate::scalar::sigmoid_f64;

use super::dataset::{make_snapshot, TrajectoryDataset};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SystemKind {
    /// Birds on the unit sphere: common rotation plus local attraction.
    SphericalFlock,
    /// Points in the hyperbolic ball drifting along a random tree.
    HyperbolicDiffusion,
    /// A fixed graph whose weights follow the constrained flow.
    HeatGraph,
}

impl SystemKind {
    pub fn name(self) -> &'static str {
        match self {
            SystemKind::SphericalFlock => "spherical_flock",
            SystemKind::HyperbolicDiffusion => "hyperbolic_diffusion",
            SystemKind::HeatGraph => "heat_graph",
        }
    }
}

impl std::str::FromStr for SystemKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        [
            SystemKind::SphericalFlock,
            SystemKind::HyperbolicDiffusion,
            SystemKind::HeatGraph,
        ]
        .into_iter()
        .find(|k| k.name() == s)
        .ok_or_else(|| Error::domain(format!("unknown system `{s}`")))
    }
}

/// Generator inputs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GenerateSpec {
    pub system: SystemKind,
    pub nodes: usize,
    /// Snapshots per sequence.
    pub snapshots: usize,
    pub sequences: usize,
    pub seed: u64,
}

impl GenerateSpec {
    pub const DEFAULT_SEQUENCES: usize = 4;

    pub fn new(system: SystemKind, nodes: usize, snapshots: usize, seed: u64) -> Self {
        Self {
            system,
            nodes,
            snapshots,
            sequences: Self::DEFAULT_SEQUENCES,
            seed,
        }
    }
}

/// Mean gap between snapshots.
const GAP: f64 = 0.1;
/// Integration step of the ground-truth simulators.
const FINE_DT: f64 = 1e-3;
const MAX_ATTEMPTS: usize = 10_000;

pub fn generate(spec: &GenerateSpec) -> Result<TrajectoryDataset> {
    if spec.nodes < 3 || spec.snapshots < 4 {
        return Err(Error::domain(format!(
            "need at least 3 nodes and 4 snapshots, got {} and {}",
            spec.nodes, spec.snapshots
        )));
    }
    if spec.sequences == 0 {
        return Err(Error::domain("need at least one sequence"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (kappa, feature_dim) = match spec.system {
        SystemKind::SphericalFlock => (Curvature::UNIT_SPHERICAL, 2),
        SystemKind::HyperbolicDiffusion => (Curvature::UNIT_HYPERBOLIC, 16),
        SystemKind::HeatGraph => (Curvature::UNIT_HYPERBOLIC, 4),
    };
    let sequences = (0..spec.sequences)
        .map(|_| {
            let times = jittered_times(&mut rng, spec.snapshots);
            match spec.system {
                SystemKind::SphericalFlock => flock_sequence(&mut rng, spec.nodes, &times, kappa),
                SystemKind::HyperbolicDiffusion => tree_sequence(&mut rng, spec.nodes, &times, kappa),
                SystemKind::HeatGraph => heat_sequence(&mut rng, spec.nodes, &times, kappa),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TrajectoryDataset {
        name: spec.system.name().to_string(),
        kappa,
        feature_dim,
        num_nodes: spec.nodes,
        sequences,
    })
}

/// `t_0 = 0`, then `k·GAP` jittered by up to 30% of a gap.
fn jittered_times(rng: &mut ChaCha8Rng, count: usize) -> Vec<f64> {
    (0..count)
        .map(|k| {
            if k == 0 {
                0.0
            } else {
                GAP * (k as f64 + rng.gen_range(-0.3..0.3))
            }
        })
        .collect()
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// A connected graph on `n` nodes with `m` edges: a random recursive tree
/// plus uniformly chosen extra pairs. `m` is clamped to `[n − 1, n(n−1)/2]`.
pub fn random_connected_graph(
    rng: &mut impl Rng,
    n: usize,
    m: usize,
    weight_range: (f64, f64),
) -> Result<WeightedGraph> {
    if n < 2 {
        return Err(Error::domain("a connected graph needs two nodes"));
    }
    let m = m.clamp(n - 1, n * (n - 1) / 2);
    let mut pairs: Vec<(usize, usize)> = (1..n).map(|i| (rng.gen_range(0..i), i)).collect();
    let mut rest: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .filter(|p| !pairs.contains(p))
        .collect();
    rest.shuffle(rng);
    pairs.extend(rest.into_iter().take(m - (n - 1)));
    let edges: Vec<_> = pairs
        .into_iter()
        .map(|(i, j)| (i, j, rng.gen_range(weight_range.0..weight_range.1)))
        .collect();
    WeightedGraph::from_edges(n, &edges)
}

// ---- spherical flock -----------------------------------------------------

type V3 = [f64; 3];

fn dot3(a: &V3, b: &V3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn normalize3(a: V3) -> V3 {
    let n = dot3(&a, &a).sqrt();
    [a[0] / n, a[1] / n, a[2] / n]
}

fn angle(a: &V3, b: &V3) -> f64 {
    dot3(a, b).clamp(-1.0, 1.0).acos()
}

/// Sphere point from polar angle about the chart pole `(1, 0, 0)` and azimuth.
fn sphere_point(theta: f64, phi: f64) -> V3 {
    [theta.cos(), theta.sin() * phi.cos(), theta.sin() * phi.sin()]
}

/// Origin-chart coordinates of a unit-sphere point: half the polar angle
/// along the azimuth direction.
fn sphere_chart(p: &V3) -> Vec<f64> {
    let theta = p[0].clamp(-1.0, 1.0).acos();
    let r = (p[1] * p[1] + p[2] * p[2]).sqrt();
    if r == 0.0 {
        return vec![0.0, 0.0];
    }
    vec![0.5 * theta * p[1] / r, 0.5 * theta * p[2] / r]
}

const FLOCK_OMEGA: f64 = 0.35;
const FLOCK_ATTRACTION: f64 = 0.8;
const FLOCK_SENSE: f64 = 0.5;
const FLOCK_EDGE: f64 = 0.8;

fn flock_sequence(rng: &mut ChaCha8Rng, n: usize, times: &[f64], kappa: Curvature) -> Result<Vec<Snapshot>> {
    let theta0 = 0.9 + rng.gen_range(-0.1..0.1);
    let phi0 = std::f64::consts::FRAC_PI_4 - 0.3 + rng.gen_range(-0.1..0.1);
    let mut p: Vec<V3> = (0..n)
        .map(|_| sphere_point(theta0 + 0.12 * normal(rng), phi0 + 0.15 * normal(rng)))
        .collect();
    let mut t = 0.0;
    let mut out = Vec::with_capacity(times.len());
    for &target in times {
        while t < target - 1e-12 {
            let h = FINE_DT.min(target - t);
            let prev = p.clone();
            for (i, pi) in p.iter_mut().enumerate() {
                let q = prev[i];
                // rotation about the pole axis
                let mut v = [0.0, -FLOCK_OMEGA * q[2], FLOCK_OMEGA * q[1]];
                let nbrs: Vec<&V3> = prev
                    .iter()
                    .enumerate()
                    .filter(|&(j, r)| j != i && angle(&q, r) < FLOCK_SENSE)
                    .map(|(_, r)| r)
                    .collect();
                if !nbrs.is_empty() {
                    for r in &nbrs {
                        let dot = dot3(&q, r);
                        for k in 0..3 {
                            // tangent projection of r − q
                            v[k] += FLOCK_ATTRACTION * (r[k] - dot * q[k]) / nbrs.len() as f64;
                        }
                    }
                }
                *pi = normalize3([q[0] + h * v[0], q[1] + h * v[1], q[2] + h * v[2]]);
            }
            t += h;
        }
        t = target;
        let raw: Vec<Vec<f64>> = p.iter().map(sphere_chart).collect();
        out.push(make_snapshot(target, raw, &proximity_edges(&p), kappa)?);
    }
    Ok(out)
}

/// Pairs closer than `FLOCK_EDGE`, weighted by a softmax of negative
/// geodesic distance over each endpoint's neighbours, averaged over the
/// two endpoints.
fn proximity_edges(p: &[V3]) -> Vec<(usize, usize, f64)> {
    let n = p.len();
    let mut score = vec![vec![0.0; n]; n];
    let mut total = vec![0.0; n];
    for i in 0..n {
        for j in 0..n {
            let a = angle(&p[i], &p[j]);
            if i != j && a < FLOCK_EDGE {
                score[i][j] = (-a).exp();
                total[i] += score[i][j];
            }
        }
    }
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if score[i][j] > 0.0 {
                edges.push((i, j, 0.5 * (score[i][j] / total[i] + score[j][i] / total[j])));
            }
        }
    }
    edges
}

// ---- hyperbolic diffusion ------------------------------------------------

const TREE_DIM: usize = 16;

fn tree_sequence(rng: &mut ChaCha8Rng, n: usize, times: &[f64], kappa: Curvature) -> Result<Vec<Snapshot>> {
    let mut anchor = vec![vec![0.0; TREE_DIM]; n];
    let mut drift = vec![vec![0.0; TREE_DIM]; n];
    let mut parent = vec![0; n];
    for d in drift[0].iter_mut() {
        *d = 0.1 * normal(rng);
    }
    for i in 1..n {
        parent[i] = rng.gen_range(0..i);
        let dir: Vec<f64> = (0..TREE_DIM).map(|_| normal(rng)).collect();
        let len = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
        for k in 0..TREE_DIM {
            anchor[i][k] = anchor[parent[i]][k] + 0.4 * dir[k] / len;
            drift[i][k] = 0.5 * drift[parent[i]][k] + 0.15 * normal(rng);
        }
    }
    let mut noise = vec![vec![0.0; TREE_DIM]; n];
    let mut prev_t = 0.0;
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        let sd = 0.02 * (t - prev_t).sqrt();
        prev_t = t;
        let raw: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..TREE_DIM)
                    .map(|k| {
                        noise[i][k] += sd * normal(rng);
                        anchor[i][k] + t * drift[i][k] + noise[i][k]
                    })
                    .collect()
            })
            .collect();
        let edges: Vec<_> = (1..n)
            .map(|i| {
                let d: f64 = raw[i]
                    .iter()
                    .zip(&raw[parent[i]])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                (parent[i], i, (-d).exp())
            })
            .collect();
        out.push(make_snapshot(t, raw, &edges, kappa)?);
    }
    Ok(out)
}

// ---- heat graph ----------------------------------------------------------

fn heat_features(g: &WeightedGraph, fixed: &[[f64; 2]]) -> Vec<Vec<f64>> {
    let deg = g.weighted_degrees();
    (0..g.num_nodes())
        .map(|i| {
            let k = g.topology().degree(i) as f64;
            vec![(1.0 + deg[i]).ln(), deg[i] / k, fixed[i][0], fixed[i][1]]
        })
        .collect()
}

/// Weights of `g` after `steps` log-space steps of the constrained flow
/// with fixed `e^f`.
fn advance_heat(g: &WeightedGraph, ef: &[f64], steps: usize, dt: f64) -> Result<WeightedGraph> {
    let mut g = g.clone();
    for _ in 0..steps {
        let r = forman_curvature(&g).0;
        let w = g
            .weights()
            .iter()
            .zip(&r)
            .zip(ef)
            .map(|((&w, &r), &e)| w * ((r - e) * dt).exp())
            .collect();
        g = g.with_weights(w)?;
    }
    Ok(g)
}

/// A relabelled circulant graph `C_n(1, s)`: every node has degree 4
/// (3 when `s = n/2`), so `m ≥ n`.
pub fn random_circulant_graph(rng: &mut impl Rng, n: usize, weight_range: (f64, f64)) -> Result<WeightedGraph> {
    if n < 3 {
        return Err(Error::domain("a circulant graph needs three nodes"));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    let s = if n < 4 { 1 } else { rng.gen_range(2..=n / 2) };
    let mut pairs = std::collections::BTreeSet::new();
    for i in 0..n {
        for off in [1, s] {
            let (a, b) = (perm[i], perm[(i + off) % n]);
            pairs.insert((a.min(b), a.max(b)));
        }
    }
    let edges: Vec<_> = pairs
        .into_iter()
        .map(|(i, j)| (i, j, rng.gen_range(weight_range.0..weight_range.1)))
        .collect();
    WeightedGraph::from_edges(n, &edges)
}

fn heat_attempt(rng: &mut ChaCha8Rng, n: usize, times: &[f64], kappa: Curvature) -> Result<Option<Vec<Snapshot>>> {
    let g0 = random_circulant_graph(rng, n, (0.5, 2.0))?;
    let ef: Vec<f64> = (0..g0.num_edges())
        .map(|_| sigmoid_f64(0.3 * normal(rng)).exp())
        .collect();
    let fixed: Vec<[f64; 2]> = (0..n)
        .map(|_| [rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)])
        .collect();
    let mut g = g0;
    let mut t = 0.0;
    let mut graphs = Vec::with_capacity(times.len());
    for &target in times {
        let steps = ((target - t) / FINE_DT).round() as usize;
        g = advance_heat(&g, &ef, steps, FINE_DT)?;
        t = target;
        graphs.push((t, g.clone()));
    }
    if !entropy::audit(&graphs, DEFAULT_TOL)?.verdict {
        return Ok(None);
    }
    graphs
        .into_iter()
        .map(|(t, g)| {
            let edges: Vec<_> = g.edges().collect();
            make_snapshot(t, heat_features(&g, &fixed), &edges, kappa)
        })
        .collect::<Result<Vec<_>>>()
        .map(Some)
}

/// Rejection-samples graphs and constraint surrogates until the snapshot
/// entropy series passes the audit.
fn heat_sequence(rng: &mut ChaCha8Rng, n: usize, times: &[f64], kappa: Curvature) -> Result<Vec<Snapshot>> {
    for attempt in 1..=MAX_ATTEMPTS {
        if let Some(seq) = heat_attempt(rng, n, times, kappa)? {
            log::debug!("heat graph accepted after {attempt} attempt(s)");
            return Ok(seq);
        }
    }
    Err(Error::Numeric {
        message: "no sampled heat graph had a non-decreasing entropy series".into(),
        iterations: MAX_ATTEMPTS,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::exp0;

    #[test]
    fn connected_graph_sizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in 2..12 {
            for m in [0, n, 2 * n, 100] {
                let g = random_connected_graph(&mut rng, n, m, (0.5, 2.0)).unwrap();
                assert!(g.topology().is_connected());
                assert_eq!(g.num_edges(), m.clamp(n - 1, n * (n - 1) / 2));
                assert!(g.weights().iter().all(|&w| (0.5..2.0).contains(&w)));
            }
        }
    }

    #[test]
    fn circulant_graphs_are_regular() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for n in 3..16 {
            let g = random_circulant_graph(&mut rng, n, (0.5, 2.0)).unwrap();
            assert!(g.topology().is_connected());
            assert!(g.num_edges() >= n);
            let d0 = g.topology().degree(0);
            assert!((0..n).all(|i| g.topology().degree(i) == d0));
        }
    }

    #[test]
    fn flock_rows_fit_the_sphere_chart() {
        let d = generate(&GenerateSpec::new(SystemKind::SphericalFlock, 10, 20, 3)).unwrap();
        assert_eq!(d.feature_dim, 2);
        for s in d.sequences.iter().flatten() {
            assert!(s.raw.iter().all(|r| (r[0] * r[0] + r[1] * r[1]).sqrt() < std::f64::consts::FRAC_PI_2));
            assert!(s.raw.iter().all(|r| exp0(r, d.kappa).is_ok()));
        }
    }

    #[test]
    fn generators_are_deterministic() {
        for sys in [SystemKind::SphericalFlock, SystemKind::HyperbolicDiffusion, SystemKind::HeatGraph] {
            let spec = GenerateSpec::new(sys, 6, 8, 11);
            let a = generate(&spec).unwrap().to_json();
            let b = generate(&spec).unwrap().to_json();
            assert_eq!(a, b, "{}", sys.name());
        }
    }

    #[test]
    fn heat_graph_passes_its_audit() {
        let d = generate(&GenerateSpec::new(SystemKind::HeatGraph, 8, 10, 5)).unwrap();
        for seq in &d.sequences {
            assert!(seq[0].graph.num_edges() >= 8);
            let traj: Vec<_> = seq.iter().map(|s| (s.t, s.graph.clone())).collect();
            assert!(entropy::audit(&traj, DEFAULT_TOL).unwrap().verdict);
        }
    }

    #[test]
    fn rejects_tiny_specs() {
        assert!(generate(&GenerateSpec::new(SystemKind::HeatGraph, 2, 10, 0)).is_err());
        assert!(generate(&GenerateSpec::new(SystemKind::HeatGraph, 5, 3, 0)).is_err());
    }
}
