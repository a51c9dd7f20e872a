//! Weight trajectories for the entropy audit: observed, replayed under a
//! weight-only flow, or rolled out by a trained model.

use std::borrow::Cow;

use crate::config::Ablation;
use crate::dynamics::{simulate_flow_only, Dynamics, FMode, FlowKind, IntegratorConfig, SystemState};
use crate::entropy::{audit, MonotonicityReport};
use crate::error::{Error, Result};
use crate::graph::WeightedGraph;
use crate::learning::{resolve_kappa, split_point};
use crate::network::{encode_initial_state, Checkpoint, Snapshot};

use super::dataset::TrajectoryDataset;

/// Largest substep of [`flow_replay`].
pub const REPLAY_STEP: f64 = 1e-3;

/// Step halvings [`audit_flow`] may spend on a violation.
pub const MAX_AUDIT_HALVINGS: usize = 3;

#[derive(Clone, Debug, PartialEq)]
pub struct FlowAudit {
    pub report: MonotonicityReport,
    /// Halvings used; the report is for the finest run.
    pub halvings: usize,
    /// Graphs at the requested times from the finest run.
    pub trajectory: Vec<(f64, WeightedGraph)>,
}

/// Simulates a weight-only flow and audits its entropy. On a violation the
/// step is halved, up to [`MAX_AUDIT_HALVINGS`] times, and the finer run
/// is audited at the original sample times.
pub fn audit_flow(
    g0: &WeightedGraph,
    f_mode: &FMode<'_>,
    kind: FlowKind,
    steps: usize,
    dt: f64,
    tol: f64,
) -> Result<FlowAudit> {
    let mut halvings = 0;
    loop {
        let stride = 1usize << halvings;
        let run = simulate_flow_only(g0, f_mode, kind, steps * stride, dt / stride as f64)?;
        let trajectory: Vec<(f64, WeightedGraph)> = run
            .into_iter()
            .step_by(stride)
            .enumerate()
            .map(|(k, (_, g))| (k as f64 * dt, g))
            .collect();
        let report = audit(&trajectory, tol)?;
        if report.verdict || halvings == MAX_AUDIT_HALVINGS {
            return Ok(FlowAudit {
                report,
                halvings,
                trajectory,
            });
        }
        halvings += 1;
    }
}

fn sequence(dataset: &TrajectoryDataset, k: usize) -> Result<&[Snapshot]> {
    dataset
        .sequences
        .get(k)
        .map(Vec::as_slice)
        .ok_or_else(|| Error::domain(format!("dataset has {} sequences, asked for {k}", dataset.sequences.len())))
}

/// The dataset ingested at the model's curvature.
pub(crate) fn at_model_kappa<'a>(
    model: &Checkpoint,
    dataset: &'a TrajectoryDataset,
) -> Result<Cow<'a, TrajectoryDataset>> {
    let kappa = resolve_kappa(&model.config, dataset)?;
    if kappa == dataset.kappa {
        Ok(Cow::Borrowed(dataset))
    } else {
        Ok(Cow::Owned(dataset.with_kappa(kappa)?))
    }
}

/// The graphs of sequence `k` as stored.
pub fn observed_weights(dataset: &TrajectoryDataset, k: usize) -> Result<Vec<(f64, WeightedGraph)>> {
    Ok(sequence(dataset, k)?.iter().map(|s| (s.t, s.graph.clone())).collect())
}

/// Re-runs a weight-only flow from the first graph of sequence `k`,
/// sampled at the stored snapshot times. The constrained flow uses the
/// constant `f`. A flow that blows up ends the replay at the last
/// representable snapshot.
pub fn flow_replay(
    dataset: &TrajectoryDataset,
    k: usize,
    kind: FlowKind,
    f: f64,
) -> Result<Vec<(f64, WeightedGraph)>> {
    let seq = sequence(dataset, k)?;
    let first = seq.first().ok_or_else(|| Error::domain(format!("sequence {k} is empty")))?;
    let mode = FMode::Constant(f);
    let mut out = vec![(first.t, first.graph.clone())];
    for pair in seq.windows(2) {
        let span = pair[1].t - pair[0].t;
        let steps = (span / REPLAY_STEP).ceil().max(1.0) as usize;
        let from = &out.last().expect("seeded with the first graph").1;
        match simulate_flow_only(from, &mode, kind, steps, span / steps as f64) {
            Ok(mut run) => {
                let g = run.pop().expect("simulation returns the initial graph at least").1;
                out.push((pair[1].t, g));
            }
            Err(Error::Numeric { .. }) if out.len() > 1 => {
                log::warn!("flow left the representable range after t = {}; replay truncated", pair[0].t);
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// Rolls the model forward `steps` base steps from the encoded observed
/// window of sequence `k`. The canonical kind swaps the weight law for
/// `dw/dt = −R w`.
pub fn model_rollout(
    model: &Checkpoint,
    dataset: &TrajectoryDataset,
    k: usize,
    steps: usize,
    kind: FlowKind,
) -> Result<Vec<(f64, WeightedGraph)>> {
    let data = at_model_kappa(model, dataset)?;
    let kappa = data.kappa;
    let seq = sequence(&data, k)?;
    let at = split_point(seq.len(), model.config.split_ratio)
        .ok_or_else(|| Error::domain(format!("sequence {k} is too short to split")))?;
    let mut cfg = model.config.clone();
    if kind == FlowKind::Canonical {
        cfg.ablation = Ablation::WoCon;
    }
    let obs = &seq[..at];
    let init = encode_initial_state(obs, &model.params, &cfg, kappa)?;
    let t0 = obs[at - 1].t;
    let s0 = SystemState {
        t: t0,
        z: init.z0,
        w: init.edge_weights,
    };
    let icfg = IntegratorConfig::from_model(&cfg);
    let times: Vec<f64> = (1..=steps).map(|i| t0 + i as f64 * icfg.base_step).collect();
    let dynm = Dynamics::new(&init.topology, &model.params, &cfg, kappa);
    let states = dynm.integrate(&s0, &times, &icfg)?;
    std::iter::once(&s0)
        .chain(&states)
        .map(|s| Ok((s.t, WeightedGraph::new(init.topology.clone(), s.w.clone())?)))
        .collect()
}
