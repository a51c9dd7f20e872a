//! Coupled integration of the latent positions and the edge-weight flow,
//! plus weight-only flow simulation for entropy audits.

use std::sync::Arc;

use serde::Serialize;

use crate::config::{Ablation, GatAttention, ModelConfig, WeightUpdate};
use crate::curvature::{forman_curvature, forman_generic, validate_constraint_values};
use crate::error::{Error, Result};
use crate::geometry::{exp0, log0, Curvature, ManifoldPoint};
use crate::graph::{GraphTopology, WeightedGraph};
use crate::network::{edge_constraints, vector_field, ModelParams};
use crate::scalar::Real;

/// Positions and weights at one instant.
#[derive(Clone, Debug, PartialEq)]
pub struct SystemState<T = f64> {
    pub t: f64,
    pub z: Vec<ManifoldPoint<T>>,
    pub w: Vec<T>,
}

impl<T: Real> SystemState<T> {
    pub fn to_f64(&self) -> SystemState {
        SystemState {
            t: self.t,
            z: self.z.iter().map(ManifoldPoint::to_f64).collect(),
            w: self.w.iter().map(|w| w.value()).collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntegratorConfig {
    pub base_step: f64,
    /// How often a step may be halved after leaving the spherical chart.
    pub max_halvings: usize,
    pub weight_update: WeightUpdate,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            base_step: 0.01,
            max_halvings: 8,
            weight_update: WeightUpdate::LogSpace,
        }
    }
}

impl IntegratorConfig {
    pub fn from_model(cfg: &ModelConfig) -> Self {
        Self {
            base_step: cfg.base_step,
            max_halvings: cfg.max_halvings,
            weight_update: cfg.weight_update,
        }
    }
}

/// Everything the right-hand side needs besides the state.
#[derive(Clone, Copy, Debug)]
pub struct Dynamics<'a, T> {
    pub topology: &'a GraphTopology,
    pub params: &'a ModelParams<T>,
    pub kappa: Curvature,
    pub ablation: Ablation,
    pub attention: GatAttention,
}

impl<'a, T: Real> Dynamics<'a, T> {
    pub fn new(
        topology: &'a GraphTopology,
        params: &'a ModelParams<T>,
        cfg: &ModelConfig,
        kappa: Curvature,
    ) -> Self {
        Self {
            topology,
            params,
            kappa,
            ablation: cfg.ablation,
            attention: cfg.gat_attention,
        }
    }

    fn new_weights(&self, s: &SystemState<T>, dt: f64, update: WeightUpdate) -> Result<Vec<T>> {
        let w = &s.w;
        let out: Vec<T> = match self.ablation {
            Ablation::WoEvo => w.clone(),
            Ablation::WoRic => {
                let f = edge_constraints(self.topology, &s.z, &self.params.mlp, self.kappa)?;
                w.iter().zip(f).map(|(&w, f)| w + f * dt).collect()
            }
            Ablation::WoCon => {
                let r = forman_generic(self.topology, w);
                let rate: Vec<T> = r.into_iter().map(|r| -r).collect();
                apply_rate(w, &rate, dt, update)
                    .into_iter()
                    .map(clamp_canonical)
                    .collect()
            }
            Ablation::None | Ablation::WoGyr => {
                let f = edge_constraints(self.topology, &s.z, &self.params.mlp, self.kappa)?;
                let r = forman_generic(self.topology, w);
                let rate: Vec<T> = r.into_iter().zip(f).map(|(r, f)| r - f.exp()).collect();
                apply_rate(w, &rate, dt, update)
            }
        };
        if let Some(bad) = out.iter().find(|w| !(w.value() > 0.0 && w.value().is_finite())) {
            return Err(Error::Range(format!("edge weight left (0, inf): {:e}", bad.value())));
        }
        Ok(out)
    }

    /// One explicit step of size `dt`, coefficients frozen at `s`.
    pub fn step(&self, s: &SystemState<T>, dt: f64, update: WeightUpdate) -> Result<SystemState<T>> {
        if !(dt >= 0.0 && dt.is_finite()) {
            return Err(Error::domain(format!("step size must be non-negative, got {dt}")));
        }
        let w = self.new_weights(s, dt, update)?;
        let field = vector_field(
            self.topology,
            &s.w,
            &s.z,
            self.params,
            self.attention,
            self.kappa,
        )?;
        let z = s
            .z
            .iter()
            .zip(field)
            .map(|(p, v)| {
                let chart = log0(p.coords(), self.kappa);
                let moved: Vec<T> = chart.iter().zip(&v).map(|(&a, &b)| a + b * dt).collect();
                exp0(&moved, self.kappa).map(ManifoldPoint::from_raw)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SystemState { t: s.t + dt, z, w })
    }

    /// A step that splits itself in halves when it leaves the chart.
    pub fn coupled_step(
        &self,
        s: &SystemState<T>,
        dt: f64,
        cfg: &IntegratorConfig,
    ) -> Result<SystemState<T>> {
        self.step_with_halving(s, dt, cfg, cfg.max_halvings)
    }

    fn step_with_halving(
        &self,
        s: &SystemState<T>,
        dt: f64,
        cfg: &IntegratorConfig,
        left: usize,
    ) -> Result<SystemState<T>> {
        match self.step(s, dt, cfg.weight_update) {
            Err(Error::Range(msg)) => {
                if left == 0 {
                    return Err(Error::Range(format!(
                        "{msg}; gave up after {} halvings",
                        cfg.max_halvings
                    )));
                }
                log::debug!("halving step {dt:e} at t = {}", s.t);
                let mid = self.step_with_halving(s, dt / 2.0, cfg, left - 1)?;
                let mut end = self.step_with_halving(&mid, dt / 2.0, cfg, left - 1)?;
                end.t = s.t + dt;
                Ok(end)
            }
            other => other,
        }
    }

    /// States at each of `times`, stepping by at most `base_step` and
    /// landing exactly on every requested time.
    pub fn integrate(
        &self,
        s0: &SystemState<T>,
        times: &[f64],
        cfg: &IntegratorConfig,
    ) -> Result<Vec<SystemState<T>>> {
        if !(cfg.base_step > 0.0 && cfg.base_step.is_finite()) {
            return Err(Error::domain(format!("base_step must be positive, got {}", cfg.base_step)));
        }
        if let Some(&first) = times.first() {
            if !(first >= s0.t) {
                return Err(Error::domain(format!(
                    "first requested time {first} precedes the initial time {}",
                    s0.t
                )));
            }
        }
        if times.windows(2).any(|p| !(p[1] > p[0])) {
            return Err(Error::domain("requested times must be strictly increasing"));
        }
        let mut out = Vec::with_capacity(times.len());
        let mut state = s0.clone();
        for &target in times {
            while state.t < target {
                let remaining = target - state.t;
                // absorb a sliver below round-off into the current substep
                let dt = if remaining <= cfg.base_step * (1.0 + 1e-9) {
                    remaining
                } else {
                    cfg.base_step
                };
                state = self.coupled_step(&state, dt, cfg)?;
                if dt == remaining {
                    state.t = target;
                }
            }
            state.t = target;
            out.push(state.clone());
        }
        Ok(out)
    }
}

/// Bound on `|ln w|` for the canonical ablation inside the model.
pub const CANONICAL_LOG_WEIGHT_CAP: f64 = 20.0;

// −R w blows up in finite time on dense graphs; pin escaping weights to
// the band edge (zero gradient, like a clamp).
fn clamp_canonical<T: Real>(w: T) -> T {
    let hi = CANONICAL_LOG_WEIGHT_CAP.exp();
    let lo = (-CANONICAL_LOG_WEIGHT_CAP).exp();
    let v = w.value();
    if v < lo {
        T::cst(lo)
    } else if v > hi {
        T::cst(hi)
    } else {
        w
    }
}

fn apply_rate<T: Real>(w: &[T], rate: &[T], dt: f64, update: WeightUpdate) -> Vec<T> {
    match update {
        WeightUpdate::LogSpace => w
            .iter()
            .zip(rate)
            .map(|(&w, &r)| w * (r * dt).exp())
            .collect(),
        WeightUpdate::PlainEuler => w
            .iter()
            .zip(rate)
            .map(|(&w, &r)| w + w * r * dt)
            .collect(),
    }
}

/// Which flow drives a weight-only simulation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FlowKind {
    /// `dw/dt = (R − e^f) w`.
    Constrained,
    /// `dw/dt = −R w`.
    Canonical,
}

impl std::str::FromStr for FlowKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constrained" => Ok(FlowKind::Constrained),
            "canonical" => Ok(FlowKind::Canonical),
            _ => Err(Error::domain(format!("unknown flow mode `{s}`"))),
        }
    }
}

/// Source of the constraint values in a weight-only simulation.
#[derive(Clone, Debug)]
pub enum FMode<'a> {
    Constant(f64),
    PerEdge(Vec<f64>),
    /// The constraint network evaluated on fixed positions.
    Network {
        params: &'a ModelParams,
        z: &'a [ManifoldPoint],
        kappa: Curvature,
    },
}

impl FMode<'_> {
    fn resolve(&self, topo: &GraphTopology) -> Result<Vec<f64>> {
        let f = match self {
            FMode::Constant(c) => vec![*c; topo.num_edges()],
            FMode::PerEdge(v) => v.clone(),
            FMode::Network { params, z, kappa } => {
                if z.len() != topo.num_nodes() {
                    return Err(Error::Shape(format!(
                        "{} positions for {} nodes",
                        z.len(),
                        topo.num_nodes()
                    )));
                }
                edge_constraints(topo, z, &params.mlp, *kappa)?
            }
        };
        validate_constraint_values(topo.num_edges(), &f)?;
        Ok(f)
    }
}

/// Evolves only the weights of `g0` for `steps` log-space Euler steps.
/// Returns `steps + 1` graphs, starting with `g0` at `t = 0`.
pub fn simulate_flow_only(
    g0: &WeightedGraph,
    f_mode: &FMode<'_>,
    kind: FlowKind,
    steps: usize,
    dt: f64,
) -> Result<Vec<(f64, WeightedGraph)>> {
    if !(dt >= 0.0 && dt.is_finite()) {
        return Err(Error::domain(format!("dt must be non-negative, got {dt}")));
    }
    let topo: &Arc<GraphTopology> = g0.topology();
    let ef: Vec<f64> = match kind {
        FlowKind::Constrained => f_mode.resolve(topo)?.into_iter().map(f64::exp).collect(),
        FlowKind::Canonical => vec![0.0; topo.num_edges()],
    };
    let mut out = Vec::with_capacity(steps + 1);
    out.push((0.0, g0.clone()));
    let mut g = g0.clone();
    for k in 1..=steps {
        let r = forman_curvature(&g).0;
        let w: Vec<f64> = g
            .weights()
            .iter()
            .zip(&r)
            .zip(&ef)
            .map(|((&w, &r), &e)| match kind {
                FlowKind::Constrained => w * ((r - e) * dt).exp(),
                FlowKind::Canonical => w * (-r * dt).exp(),
            })
            .collect();
        if w.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::Numeric {
                message: "edge weights left the representable range".into(),
                iterations: k,
            });
        }
        g = g.with_weights(w)?;
        out.push((k as f64 * dt, g.clone()));
    }
    Ok(out)
}

#[derive(Serialize)]
struct TrajectoryLine<'a> {
    t: f64,
    #[serde(rename = "Z")]
    z: Vec<&'a [f64]>,
    w: &'a [f64],
}

/// JSON lines, one `{"t", "Z", "w"}` object per state.
pub fn trajectory_jsonl(states: &[SystemState]) -> String {
    let mut out = String::new();
    for s in states {
        let line = TrajectoryLine {
            t: s.t,
            z: s.z.iter().map(|p| p.coords()).collect(),
            w: &s.w,
        };
        out.push_str(&serde_json::to_string(&line).expect("trajectory serializes"));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ModelConfig;
    use crate::entropy;
    use crate::linalg::Matrix;
    use crate::network::init_params;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const HYP: Curvature = Curvature::UNIT_HYPERBOLIC;

    fn cfg() -> ModelConfig {
        ModelConfig {
            d: 4,
            d_time: 4,
            ..ModelConfig::default()
        }
    }

    fn triangle() -> WeightedGraph {
        WeightedGraph::from_edges(3, &[(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)]).unwrap()
    }

    fn state(rng: &mut ChaCha8Rng, n: usize, m: usize, d: usize) -> SystemState {
        SystemState {
            t: 0.0,
            z: (0..n)
                .map(|_| {
                    let v = (0..d).map(|_| rng.gen_range(-0.3..0.3)).collect();
                    ManifoldPoint::new(v, HYP).unwrap()
                })
                .collect(),
            w: (0..m).map(|_| rng.gen_range(0.5..2.0)).collect(),
        }
    }

    #[test]
    fn zero_field_unit_triangle() {
        let c = cfg();
        let mut p = init_params(&c, 3, 2, 0).unwrap();
        for l in &mut p.gat_layers {
            l.w = Matrix::zeros(4, 4);
        }
        // push f toward 0: large negative output bias
        p.mlp.b2 = vec![-40.0];
        let g = triangle();
        let dynm = Dynamics::new(g.topology(), &p, &c, HYP);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut s = state(&mut rng, 3, 3, 4);
        s.w = vec![1.0; 3];
        let next = dynm.coupled_step(&s, 0.01, &IntegratorConfig::default()).unwrap();
        assert_eq!(next.z, s.z.iter().map(|z| ManifoldPoint::from_raw(exp0(&log0(z.coords(), HYP), HYP).unwrap())).collect::<Vec<_>>());
        for w in &next.w {
            assert_abs_diff_eq!(*w, (-0.01f64).exp(), epsilon = 1e-12);
        }
    }

    #[test]
    fn integrate_lands_on_requested_times() {
        let c = cfg();
        let p = init_params(&c, 3, 2, 2).unwrap();
        let g = triangle();
        let dynm = Dynamics::new(g.topology(), &p, &c, HYP);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s0 = state(&mut rng, 3, 3, 4);
        let same = dynm.integrate(&s0, &[0.0], &IntegratorConfig::default()).unwrap();
        assert_eq!(same, vec![s0.clone()]);
        let times = [0.013, 0.05, 0.0501, 0.31];
        let out = dynm.integrate(&s0, &times, &IntegratorConfig::default()).unwrap();
        assert_eq!(out.iter().map(|s| s.t).collect::<Vec<_>>(), times);
        for s in &out {
            assert!(s.w.iter().all(|&w| w > 0.0));
            assert!(s.z.iter().all(|z| z.in_domain(HYP)));
        }
        assert!(dynm.integrate(&s0, &[0.2, 0.1], &IntegratorConfig::default()).is_err());
        assert!(dynm.integrate(&s0, &[0.2, 0.2], &IntegratorConfig::default()).is_err());
        let later = SystemState { t: 1.0, ..s0 };
        assert!(dynm.integrate(&later, &[0.5], &IntegratorConfig::default()).is_err());
    }

    #[test]
    fn weights_stay_positive() {
        let c = cfg();
        let p = init_params(&c, 3, 2, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = WeightedGraph::from_edges(4, &[(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (0, 3, 1.0), (0, 2, 1.0)])
            .unwrap();
        let dynm = Dynamics::new(g.topology(), &p, &c, HYP);
        let mut s = state(&mut rng, 4, 5, 4);
        for _ in 0..2000 {
            let dt = rng.gen_range(0.0..0.05);
            s = dynm.coupled_step(&s, dt, &IntegratorConfig::default()).unwrap();
            assert!(s.w.iter().all(|&w| w > 0.0));
        }
    }

    #[test]
    fn spherical_overflow_is_halved_or_reported() {
        let c = cfg();
        let mut p = init_params(&c, 3, 2, 4).unwrap();
        for l in &mut p.gat_layers {
            l.w = Matrix::<f64>::identity(4).map(|x| x * 50.0);
        }
        let g = WeightedGraph::from_edges(2, &[(0, 1, 1.0)]).unwrap();
        let k = Curvature::UNIT_SPHERICAL;
        let dynm = Dynamics::new(g.topology(), &p, &c, k);
        let s = SystemState {
            t: 0.0,
            z: vec![ManifoldPoint::new(vec![0.5, 0.2, 0.0, 0.1], k).unwrap(); 2],
            w: vec![1.0],
        };
        let icfg = IntegratorConfig {
            max_halvings: 0,
            ..IntegratorConfig::default()
        };
        assert!(matches!(dynm.coupled_step(&s, 1.0, &icfg), Err(Error::Range(_))));
        let ok = dynm.coupled_step(&s, 1.0, &IntegratorConfig::default());
        if let Ok(next) = ok {
            assert_eq!(next.t, 1.0);
        }
    }

    #[test]
    fn flow_only_examples() {
        let tri = triangle();
        let traj = simulate_flow_only(&tri, &FMode::Constant(0.5), FlowKind::Canonical, 50, 0.01).unwrap();
        assert!(traj.iter().all(|(_, g)| g.weights() == tri.weights()));
        let frozen = simulate_flow_only(&tri, &FMode::Constant(0.5), FlowKind::Constrained, 5, 0.0).unwrap();
        assert!(frozen.iter().all(|(t, g)| *t == 0.0 && g == &tri));
        assert_eq!(frozen.len(), 6);
        assert!(simulate_flow_only(&tri, &FMode::Constant(1.5), FlowKind::Constrained, 5, 0.1).is_err());
        let rep = entropy::audit(&traj, 1e-6).unwrap();
        assert!(rep.verdict);
    }

    #[test]
    fn canonical_ablation_stays_in_band() {
        let c = ModelConfig {
            ablation: Ablation::WoCon,
            ..cfg()
        };
        let edges: Vec<(usize, usize, f64)> = (0..6)
            .flat_map(|i| (i + 1..6).map(move |j| (i, j, 0.1 + 0.05 * (i + j) as f64)))
            .collect();
        let g = WeightedGraph::from_edges(6, &edges).unwrap();
        let p = init_params(&c, 4, 4, 0).unwrap();
        let dynm = Dynamics::new(g.topology(), &p, &c, HYP);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s0 = SystemState {
            w: g.weights().to_vec(),
            ..state(&mut rng, 6, 0, 4)
        };
        let out = dynm.integrate(&s0, &[5.0], &IntegratorConfig::default()).unwrap();
        let cap = CANONICAL_LOG_WEIGHT_CAP;
        assert!(out[0].w.iter().all(|w| w.ln().abs() <= cap + 1e-12));
        assert!(out[0].w.iter().any(|w| (w.ln() - cap).abs() < 1e-12));
    }

    #[test]
    fn jsonl_shape() {
        let s = SystemState {
            t: 0.5,
            z: vec![ManifoldPoint::origin(2)],
            w: vec![1.5],
        };
        assert_eq!(trajectory_jsonl(&[s]), "{\"t\":0.5,\"Z\":[[0.0,0.0]],\"w\":[1.5]}\n");
    }
}
