//! Gradient engine, reconstruction objective, Adam, and the training loop.

pub mod tape;

use std::sync::Arc;
use std::time::Instant;

use crate::config::ModelConfig;
use crate::dynamics::{Dynamics, IntegratorConfig, SystemState};
use crate::error::{Error, Result};
use crate::geometry::{distance_raw, Curvature, ManifoldPoint};
use crate::graph::GraphTopology;
use crate::harness::TrajectoryDataset;
use crate::network::{decode, encode_initial_state, init_params, GradientSet, ModelParams, Snapshot};
use crate::scalar::Real;

use tape::{Tape, Var};

/// The two parts of the reconstruction objective and their sum.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Objective {
    pub total: f64,
    pub position_term: f64,
    pub weight_term: f64,
}

impl Objective {
    pub const ZERO: Objective = Objective {
        total: 0.0,
        position_term: 0.0,
        weight_term: 0.0,
    };

    fn add(self, other: Objective) -> Objective {
        Objective {
            total: self.total + other.total,
            position_term: self.position_term + other.position_term,
            weight_term: self.weight_term + other.weight_term,
        }
    }
}

/// Generic loss terms before they are reduced to floats.
#[derive(Clone, Copy, Debug)]
pub struct LossTerms<T> {
    pub position: T,
    pub weight: T,
}

impl<T: Real> LossTerms<T> {
    pub fn total(&self) -> T {
        self.position + self.weight
    }

    pub fn objective(&self) -> Objective {
        Objective {
            total: self.total().value(),
            position_term: self.position.value(),
            weight_term: self.weight.value(),
        }
    }
}

/// Model output over a predicted window.
#[derive(Clone, Debug)]
pub struct Forecast<T = f64> {
    pub topology: Arc<GraphTopology>,
    pub states: Vec<SystemState<T>>,
    /// Decoded positions on the output manifold, one list per state.
    pub decoded: Vec<Vec<ManifoldPoint<T>>>,
}

/// Encode `obs`, integrate to each of `times`, decode.
pub fn forecast<T: Real>(
    obs: &[Snapshot],
    times: &[f64],
    params: &ModelParams<T>,
    cfg: &ModelConfig,
    kappa: Curvature,
) -> Result<Forecast<T>> {
    let init = encode_initial_state(obs, params, cfg, kappa)?;
    let t0 = obs.last().expect("encoder checked the window").t;
    let s0 = SystemState {
        t: t0,
        z: init.z0,
        w: init.edge_weights,
    };
    let dynm = Dynamics::new(&init.topology, params, cfg, kappa);
    let states = dynm.integrate(&s0, times, &IntegratorConfig::from_model(cfg))?;
    let decoded = states
        .iter()
        .map(|s| decode(&s.z, &params.decoder_w, kappa, cfg.ablation))
        .collect::<Result<Vec<_>>>()?;
    Ok(Forecast {
        topology: init.topology,
        states,
        decoded,
    })
}

/// `Σ_t [ Σ_i d²(y_i, ŷ_i) + Σ_(i,j) (w_ij − ŵ_ij)² ]`.
///
/// The weight sum runs over the model's edge set; an edge absent from an
/// observed snapshot counts as `ŵ = 0`.
pub fn loss_terms<T: Real>(
    topology: &GraphTopology,
    states: &[SystemState<T>],
    decoded: &[Vec<ManifoldPoint<T>>],
    observed: &[Snapshot],
    kappa: Curvature,
) -> Result<LossTerms<T>> {
    if states.len() != observed.len() || decoded.len() != observed.len() {
        return Err(Error::domain(format!(
            "{} predicted states, {} decoded, {} observations",
            states.len(),
            decoded.len(),
            observed.len()
        )));
    }
    let mut position = T::zero();
    let mut weight = T::zero();
    for ((s, y), obs) in states.iter().zip(decoded).zip(observed) {
        if s.t != obs.t {
            return Err(Error::domain(format!(
                "prediction at t = {} aligned with observation at t = {}",
                s.t, obs.t
            )));
        }
        if y.len() != obs.num_nodes() || s.w.len() != topology.num_edges() {
            return Err(Error::domain(format!("node or edge count mismatch at t = {}", obs.t)));
        }
        for (yi, oi) in y.iter().zip(&obs.points) {
            if yi.dim() != oi.dim() {
                return Err(Error::domain(format!(
                    "prediction dimension {} vs observation dimension {}",
                    yi.dim(),
                    oi.dim()
                )));
            }
            let target: Vec<T> = oi.coords().iter().map(|&c| T::cst(c)).collect();
            position = position + distance_raw(yi.coords(), &target, kappa)?.square();
        }
        let obs_topo = obs.graph.topology();
        for (&(i, j), &w) in topology.pairs().iter().zip(&s.w) {
            let hat = obs_topo
                .edge_index(i, j)
                .map_or(0.0, |e| obs.graph.weights()[e]);
            weight = weight + (w - hat).square();
        }
    }
    Ok(LossTerms { position, weight })
}

/// Objective of a forecast against aligned observations.
pub fn loss(
    forecast: &Forecast,
    observed: &[Snapshot],
    kappa: Curvature,
) -> Result<Objective> {
    loss_terms(
        &forecast.topology,
        &forecast.states,
        &forecast.decoded,
        observed,
        kappa,
    )
    .map(|t| t.objective())
}

/// Reverse-mode gradient of a scalar function of the parameters.
///
/// Returns the value and a gradient with the parameter layout; a
/// non-finite entry is reported with the name of its tensor.
pub fn grad<F>(params: &ModelParams, mut f: F) -> Result<(f64, GradientSet)>
where
    F: for<'t> FnMut(&ModelParams<Var<'t>>) -> Result<Var<'t>>,
{
    let tape = Tape::with_capacity(1 << 16);
    let vars = params.map(&mut |x| tape.var(x));
    let out = f(&vars)?;

    let adj = tape.gradient(out);
    let g = vars.map(&mut |v: Var<'_>| adj.wrt(v));
    if let Some(parameter) = g.first_non_finite() {
        return Err(Error::NonFiniteGradient { parameter });
    }
    Ok((out.value(), g))
}

/// Objective and gradient for one sequence split into an observed window
/// and a target window.
pub fn sequence_gradient(
    params: &ModelParams,
    obs: &[Snapshot],
    targets: &[Snapshot],
    cfg: &ModelConfig,
    kappa: Curvature,
) -> Result<(Objective, GradientSet)> {
    let times: Vec<f64> = targets.iter().map(|s| s.t).collect();
    let mut objective = Objective::ZERO;
    let (_, g) = grad(params, |p| {
        let fc = forecast(obs, &times, p, cfg, kappa)?;
        let terms = loss_terms(&fc.topology, &fc.states, &fc.decoded, targets, kappa)?;
        objective = terms.objective();
        Ok(terms.total())
    })?;
    Ok((objective, g))
}

/// Adam moments and hyperparameters.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl OptimizerState {
    pub fn new(num_params: usize, lr: f64) -> Self {
        Self {
            m: vec![0.0; num_params],
            v: vec![0.0; num_params],
            step: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One bias-corrected Adam update.
pub fn adam_step(
    params: &ModelParams,
    grads: &GradientSet,
    state: &mut OptimizerState,
) -> Result<ModelParams> {
    let p = params.flatten();
    let g = grads.flatten();
    if p.len() != g.len() || state.m.len() != p.len() || state.v.len() != p.len() {
        return Err(Error::Shape(format!(
            "{} parameters, {} gradients, {} moments",
            p.len(),
            g.len(),
            state.m.len()
        )));
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - state.beta1.powi(t);
    let c2 = 1.0 - state.beta2.powi(t);
    let mut out = Vec::with_capacity(p.len());
    for k in 0..p.len() {
        state.m[k] = state.beta1 * state.m[k] + (1.0 - state.beta1) * g[k];
        state.v[k] = state.beta2 * state.v[k] + (1.0 - state.beta2) * g[k] * g[k];
        let m_hat = state.m[k] / c1;
        let v_hat = state.v[k] / c2;
        out.push(p[k] - state.lr * m_hat / (v_hat.sqrt() + state.eps));
    }
    params.unflatten(&out)
}

/// One row of the training log.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub objective: Objective,
    pub wall_ms: u128,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainingLog {
    pub epochs: Vec<EpochLog>,
}

impl TrainingLog {
    pub const CSV_HEADER: &'static str = "epoch,total_loss,position_term,weight_term,wall_ms";

    pub fn to_csv(&self) -> String {
        let mut s = String::from(Self::CSV_HEADER);
        s.push('\n');
        for e in &self.epochs {
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                e.epoch,
                e.objective.total,
                e.objective.position_term,
                e.objective.weight_term,
                e.wall_ms
            ));
        }
        s
    }

    /// Loss columns only, which are reproducible bit for bit.
    pub fn losses(&self) -> Vec<Objective> {
        self.epochs.iter().map(|e| e.objective).collect()
    }
}

/// Trained parameters, the curvature they were trained at and the log.
#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub kappa: Curvature,
    pub log: TrainingLog,
}

/// Number of observed snapshots for a sequence of `len`, or `None` when
/// the split leaves either side empty.
pub fn split_point(len: usize, ratio: f64) -> Option<usize> {
    if len < 2 {
        return None;
    }
    let k = (len as f64 * ratio).round() as usize;
    Some(k.clamp(1, len - 1))
}

/// Curvature used for a dataset under a configuration.
pub fn resolve_kappa(cfg: &ModelConfig, dataset: &TrajectoryDataset) -> Result<Curvature> {
    match cfg.kappa {
        Some(k) => Curvature::new(k),
        None => Ok(dataset.kappa),
    }
}

/// Full-batch-per-sequence training: one Adam update per sequence per
/// epoch; the logged loss is the sum over sequences before each update.
pub fn train(dataset: &TrajectoryDataset, cfg: &ModelConfig, seed: u64) -> Result<TrainOutcome> {
    train_with(dataset, cfg, seed, |_| {})
}

/// [`train`] with a callback after every epoch.
pub fn train_with(
    dataset: &TrajectoryDataset,
    cfg: &ModelConfig,
    seed: u64,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let kappa = resolve_kappa(cfg, dataset)?;
    let reingested;
    let dataset = if kappa == dataset.kappa {
        dataset
    } else {
        reingested = dataset.with_kappa(kappa)?;
        &reingested
    };
    let f = dataset.feature_dim;
    let mut params = init_params(cfg, f, f, seed)?;
    let mut opt = OptimizerState::new(params.num_scalars(), cfg.lr);

    let mut splits = Vec::new();
    for (k, seq) in dataset.sequences.iter().enumerate() {
        match split_point(seq.len(), cfg.split_ratio) {
            Some(at) => splits.push((k, at)),
            None => log::warn!("skipping sequence {k}: {} snapshot(s)", seq.len()),
        }
    }
    if splits.is_empty() {
        return Err(Error::domain("no sequence has two or more snapshots"));
    }

    let mut log = TrainingLog::default();
    for epoch in 1..=cfg.epochs {
        let start = Instant::now();
        let mut total = Objective::ZERO;
        for &(k, at) in &splits {
            let seq = &dataset.sequences[k];
            let (obj, g) = sequence_gradient(&params, &seq[..at], &seq[at..], cfg, kappa)?;
            total = total.add(obj);
            params = adam_step(&params, &g, &mut opt)?;
        }
        let row = EpochLog {
            epoch,
            objective: total,
            wall_ms: start.elapsed().as_millis(),
        };
        log::info!(
            "epoch {epoch}: loss {:.6} (position {:.6}, weight {:.6})",
            total.total,
            total.position_term,
            total.weight_term
        );
        on_epoch(&row);
        log.epochs.push(row);
    }
    Ok(TrainOutcome { params, kappa, log })
}
