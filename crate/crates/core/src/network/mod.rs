//! Learnable components: time encoding, temporal attention, the manifold
//! GCN encoder, the GAT vector field, the constraint MLP and the decoder.
//!
//! Everything is generic over [`Real`] so the same code runs on plain
//! floats and on the gradient tape.

mod params;

use std::collections::BTreeSet;
use std::sync::Arc;

pub use params::{init_params, Checkpoint, GatLayer, GradientSet, Mlp, ModelParams};

use crate::config::{Ablation, GatAttention, ModelConfig};
use crate::error::{Error, Result};
use crate::geometry::{
    distance_raw, exp0, gyro_midpoint, gyro_transform, log0, Curvature, ManifoldPoint,
};
use crate::graph::{GraphTopology, WeightedGraph};
use crate::linalg::Matrix;
use crate::scalar::{dot, Real};

const LEAKY_SLOPE: f64 = 0.2;

/// One observation: time, ingested manifold features, the raw features
/// they came from, and the interaction graph.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub points: Vec<ManifoldPoint>,
    pub raw: Vec<Vec<f64>>,
    pub graph: WeightedGraph,
}

impl Snapshot {
    pub fn num_nodes(&self) -> usize {
        self.points.len()
    }
}

/// Latent state at the start of the predicted window.
#[derive(Clone, Debug)]
pub struct InitialState<T = f64> {
    pub z0: Vec<ManifoldPoint<T>>,
    /// Per source node, `(target, w0)` over its candidate neighbours.
    pub w0_rows: Vec<Vec<(usize, T)>>,
    /// Union of the observed edge sets; fixed during integration.
    pub topology: Arc<GraphTopology>,
    /// Undirected flow weights: the mean of the two directed entries.
    pub edge_weights: Vec<T>,
}

/// Sinusoidal encoding `[sin(t/10000^{2i/d}), cos(t/10000^{2i/d})]_i`.
pub fn time_encode(t: f64, d_time: usize) -> Result<Vec<f64>> {
    if d_time < 2 || d_time % 2 != 0 {
        return Err(Error::domain(format!("d_time must be even and >= 2, got {d_time}")));
    }
    let mut out = Vec::with_capacity(d_time);
    for i in 0..d_time / 2 {
        let arg = t / 10000f64.powf(2.0 * i as f64 / d_time as f64);
        out.push(arg.sin());
        out.push(arg.cos());
    }
    Ok(out)
}

/// Numerically shifted softmax.
pub fn softmax<T: Real>(logits: &[T]) -> Vec<T> {
    let max = logits
        .iter()
        .map(|l| l.value())
        .fold(f64::NEG_INFINITY, f64::max);
    let ex: Vec<T> = logits.iter().map(|&l| (l - max).exp()).collect();
    let mut total = T::zero();
    for &e in &ex {
        total = total + e;
    }
    ex.into_iter().map(|e| e / total).collect()
}

/// Softmax over `attn_wᵀ [te(t_i) ‖ te(t_initial)]`.
pub fn temporal_attention<T: Real>(times: &[f64], t_initial: f64, attn_w: &[T]) -> Result<Vec<T>> {
    if times.is_empty() {
        return Err(Error::domain("temporal attention over no timestamps"));
    }
    if attn_w.len() % 4 != 0 || attn_w.is_empty() {
        return Err(Error::Shape(format!(
            "attention vector of length {} is not 2 * d_time",
            attn_w.len()
        )));
    }
    let d_time = attn_w.len() / 2;
    let anchor = time_encode(t_initial, d_time)?;
    let mut logits = Vec::with_capacity(times.len());
    for &t in times {
        let enc = time_encode(t, d_time)?;
        let mut acc = T::zero();
        for (&w, x) in attn_w.iter().zip(enc.iter().chain(&anchor)) {
            acc = acc + w * *x;
        }
        logits.push(acc);
    }
    Ok(softmax(&logits))
}

/// Manifold-to-manifold linear map: the Gyro-transform, or
/// `Exp_o(Log_o(z) W)` under the woGyr ablation.
pub fn feature_map<T: Real>(
    w: &Matrix<T>,
    z: &ManifoldPoint<T>,
    kappa: Curvature,
    ablation: Ablation,
) -> Result<ManifoldPoint<T>> {
    if ablation == Ablation::WoGyr {
        if w.rows() != z.dim() {
            return Err(Error::Shape(format!(
                "matrix has {} rows, point has dimension {}",
                w.rows(),
                z.dim()
            )));
        }
        let v = w.left_mul(&log0(z.coords(), kappa));
        return Ok(ManifoldPoint::from_raw(exp0(&v, kappa)?));
    }
    gyro_transform(w, z, kappa)
}

/// Row-normalised adjacency with a unit self-loop: for each node the
/// `(neighbour, coefficient)` list, self first.
fn normalized_rows<T: Real>(topo: &GraphTopology, weights: &[T]) -> Vec<Vec<(usize, T)>> {
    (0..topo.num_nodes())
        .map(|i| {
            let mut total = T::one();
            for &e in topo.incident(i) {
                total = total + weights[e];
            }
            let mut row = vec![(i, total.recip_scaled(1.0))];
            for &e in topo.incident(i) {
                row.push((topo.other(e, i), weights[e] / total));
            }
            row
        })
        .collect()
}

/// Transform every node with `W`, then aggregate each closed neighbourhood
/// with the gyro-midpoint under row-normalised adjacency weights.
pub fn manifold_gcn_layer<T: Real>(
    graph: &WeightedGraph,
    h: &[ManifoldPoint<T>],
    w: &Matrix<T>,
    kappa: Curvature,
    ablation: Ablation,
) -> Result<Vec<ManifoldPoint<T>>> {
    if h.len() != graph.num_nodes() {
        return Err(Error::Shape(format!(
            "{} features for {} nodes",
            h.len(),
            graph.num_nodes()
        )));
    }
    let transformed = h
        .iter()
        .map(|z| feature_map(w, z, kappa, ablation))
        .collect::<Result<Vec<_>>>()?;
    let weights: Vec<T> = graph.weights().iter().map(|&x| T::cst(x)).collect();
    normalized_rows(graph.topology(), &weights)
        .into_iter()
        .map(|row| {
            let pts: Vec<_> = row.iter().map(|&(j, _)| transformed[j].clone()).collect();
            let coef: Vec<T> = row.iter().map(|&(_, c)| c).collect();
            gyro_midpoint(&pts, &coef, kappa)
        })
        .collect()
}

/// Union of the edge sets of `snapshots`, sorted.
pub fn union_topology(snapshots: &[Snapshot]) -> Result<Arc<GraphTopology>> {
    let n = snapshots
        .first()
        .ok_or_else(|| Error::domain("no snapshots"))?
        .num_nodes();
    let mut pairs = BTreeSet::new();
    for s in snapshots {
        if s.num_nodes() != n {
            return Err(Error::Shape("snapshots disagree on node count".into()));
        }
        pairs.extend(s.graph.topology().pairs().iter().copied());
    }
    Ok(Arc::new(GraphTopology::new(n, pairs)?))
}

/// Encodes the observed window into the initial latent positions and the
/// initial flow weights.
pub fn encode_initial_state<T: Real>(
    obs: &[Snapshot],
    params: &ModelParams<T>,
    cfg: &ModelConfig,
    kappa: Curvature,
) -> Result<InitialState<T>> {
    let last = obs
        .last()
        .ok_or_else(|| Error::domain("empty observation window"))?;
    let n = last.num_nodes();
    let topology = union_topology(obs)?;

    let mut per_time: Vec<Vec<ManifoldPoint<T>>> = Vec::with_capacity(obs.len());
    for snap in obs {
        let mut h: Vec<ManifoldPoint<T>> = snap
            .points
            .iter()
            .map(|p| ManifoldPoint::from_raw(p.coords().iter().map(|&x| T::cst(x)).collect()))
            .collect();
        for w in &params.encoder_w {
            h = manifold_gcn_layer(&snap.graph, &h, w, kappa, cfg.ablation)?;
        }
        per_time.push(h);
    }

    let times: Vec<f64> = obs.iter().map(|s| s.t).collect();
    let alpha = temporal_attention(&times, last.t, &params.attn_w)?;
    let z0 = (0..n)
        .map(|i| {
            let pts: Vec<_> = per_time.iter().map(|h| h[i].clone()).collect();
            gyro_midpoint(&pts, &alpha, kappa)
        })
        .collect::<Result<Vec<_>>>()?;

    let w0_rows = initial_weight_rows(&z0, &topology, cfg.dense_init, kappa)?;
    let edge_weights = topology
        .pairs()
        .iter()
        .map(|&(i, j)| {
            let fwd = lookup(&w0_rows[i], j);
            let back = lookup(&w0_rows[j], i);
            (fwd + back) * 0.5
        })
        .collect();
    Ok(InitialState {
        z0,
        w0_rows,
        topology,
        edge_weights,
    })
}

fn lookup<T: Real>(row: &[(usize, T)], j: usize) -> T {
    row.iter()
        .find(|(k, _)| *k == j)
        .map(|&(_, w)| w)
        .expect("edge endpoints are in each other's rows")
}

/// `w0_ij = exp(−d(z_i, z_j)) / Σ_k exp(−d(z_i, z_k))`, with `k` over the
/// neighbours of `i`, or over every node when `dense`.
fn initial_weight_rows<T: Real>(
    z: &[ManifoldPoint<T>],
    topo: &GraphTopology,
    dense: bool,
    kappa: Curvature,
) -> Result<Vec<Vec<(usize, T)>>> {
    let n = z.len();
    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        let nbrs: Vec<usize> = topo.incident(i).iter().map(|&e| topo.other(e, i)).collect();
        let mut scores = Vec::with_capacity(nbrs.len());
        for &j in &nbrs {
            scores.push((-distance_raw(z[i].coords(), z[j].coords(), kappa)?).exp());
        }
        let mut total = T::zero();
        if dense {
            for zk in z {
                total = total + (-distance_raw(z[i].coords(), zk.coords(), kappa)?).exp();
            }
        } else {
            for &s in &scores {
                total = total + s;
            }
        }
        rows.push(nbrs.into_iter().zip(scores).map(|(j, s)| (j, s / total)).collect());
    }
    Ok(rows)
}

fn gat_coefficients<T: Real>(
    topo: &GraphTopology,
    weights: &[T],
    xw: &[Vec<T>],
    a: &[T],
    mode: GatAttention,
) -> Vec<Vec<(usize, T)>> {
    match mode {
        GatAttention::FlowWeights => normalized_rows(topo, weights),
        GatAttention::Learned => {
            let d = xw[0].len();
            // aᵀ[x_i ‖ x_j] splits into a per-source and a per-target score
            let src: Vec<T> = xw.iter().map(|x| crate::scalar::dot(&a[..d], x)).collect();
            let dst: Vec<T> = xw.iter().map(|x| crate::scalar::dot(&a[d..], x)).collect();
            (0..topo.num_nodes())
                .map(|i| {
                    let mut idx = vec![i];
                    idx.extend(topo.incident(i).iter().map(|&e| topo.other(e, i)));
                    let logits: Vec<T> = idx
                        .iter()
                        .map(|&j| (src[i] + dst[j]).leaky_relu(LEAKY_SLOPE))
                        .collect();
                    idx.into_iter().zip(softmax(&logits)).collect()
                })
                .collect()
        }
    }
}

/// GAT over `Log_o(Z)`: returns one origin-tangent vector per node.
/// Hidden layers use tanh, the last layer is linear.
pub fn vector_field<T: Real>(
    topo: &GraphTopology,
    weights: &[T],
    z: &[ManifoldPoint<T>],
    params: &ModelParams<T>,
    mode: GatAttention,
    kappa: Curvature,
) -> Result<Vec<Vec<T>>> {
    if z.len() != topo.num_nodes() || weights.len() != topo.num_edges() {
        return Err(Error::Shape("vector field inputs disagree with topology".into()));
    }
    let mut h: Vec<Vec<T>> = z.iter().map(|p| log0(p.coords(), kappa)).collect();
    let layers = params.gat_layers.len();
    for (k, layer) in params.gat_layers.iter().enumerate() {
        if layer.w.rows() != h[0].len() {
            return Err(Error::Shape(format!(
                "GAT layer {k} expects dimension {}, got {}",
                layer.w.rows(),
                h[0].len()
            )));
        }
        let xw: Vec<Vec<T>> = h.iter().map(|x| layer.w.left_mul(x)).collect();
        let coef = gat_coefficients(topo, weights, &xw, &layer.a, mode);
        let d_out = layer.w.cols();
        h = coef
            .iter()
            .map(|row| {
                let c: Vec<T> = row.iter().map(|&(_, c)| c).collect();
                let mut col = Vec::with_capacity(row.len());
                let acc: Vec<T> = (0..d_out)
                    .map(|o| {
                        col.clear();
                        col.extend(row.iter().map(|&(j, _)| xw[j][o]));
                        dot(&c, &col)
                    })
                    .collect();
                if k + 1 < layers {
                    acc.into_iter().map(Real::tanh).collect()
                } else {
                    acc
                }
            })
            .collect();
    }
    Ok(h)
}

/// `σ(MLP(Log_o(z_i) ‖ Log_o(z_j)))` for a single ordered pair.
pub fn constraint_f<T: Real>(
    z_i: &ManifoldPoint<T>,
    z_j: &ManifoldPoint<T>,
    mlp: &Mlp<T>,
    kappa: Curvature,
) -> Result<T> {
    let mut input = log0(z_i.coords(), kappa);
    input.extend(log0(z_j.coords(), kappa));
    if input.len() != mlp.w1.rows() {
        return Err(Error::Shape(format!(
            "constraint input has length {}, W1 has {} rows",
            input.len(),
            mlp.w1.rows()
        )));
    }
    let hidden: Vec<T> = mlp
        .w1
        .left_mul(&input)
        .into_iter()
        .zip(&mlp.b1)
        .map(|(x, &b)| (x + b).tanh())
        .collect();
    Ok((mlp.w2.left_mul(&hidden)[0] + mlp.b2[0]).sigmoid())
}

/// Constraint values for every undirected edge, symmetrised as
/// `½(f(z_i, z_j) + f(z_j, z_i))` so the flow does not depend on labels.
///
/// The first layer is applied once per node and per half of `W1`, which
/// is the same arithmetic as the concatenated form.
pub fn edge_constraints<T: Real>(
    topo: &GraphTopology,
    z: &[ManifoldPoint<T>],
    mlp: &Mlp<T>,
    kappa: Curvature,
) -> Result<Vec<T>> {
    let d = mlp.w1.rows() / 2;
    let logs: Vec<Vec<T>> = z.iter().map(|p| log0(p.coords(), kappa)).collect();
    if logs.iter().any(|v| v.len() != d) {
        return Err(Error::Shape("constraint inputs do not match W1".into()));
    }
    let w1_left = mlp.w1.row_block(0, d);
    let w1_right = mlp.w1.row_block(d, d);
    // the hidden bias is folded into the left half
    let left: Vec<Vec<T>> = logs
        .iter()
        .map(|v| {
            let mut h = w1_left.left_mul(v);
            for (x, &b) in h.iter_mut().zip(&mlp.b1) {
                *x = *x + b;
            }
            h
        })
        .collect();
    let right: Vec<Vec<T>> = logs.iter().map(|v| w1_right.left_mul(v)).collect();
    let w2 = mlp.w2.col(0);
    let eval = |a: &[T], b: &[T]| -> T {
        let h: Vec<T> = a.iter().zip(b).map(|(&x, &y)| (x + y).tanh()).collect();
        (dot(&h, &w2) + mlp.b2[0]).sigmoid()
    };
    Ok(topo
        .pairs()
        .iter()
        .map(|&(i, j)| (eval(&left[i], &right[j]) + eval(&left[j], &right[i])) * 0.5)
        .collect())
}

/// Row-wise decoder onto the output manifold.
pub fn decode<T: Real>(
    z: &[ManifoldPoint<T>],
    decoder_w: &Matrix<T>,
    kappa: Curvature,
    ablation: Ablation,
) -> Result<Vec<ManifoldPoint<T>>> {
    z.iter()
        .map(|p| feature_map(decoder_w, p, kappa, ablation))
        .collect()
}
