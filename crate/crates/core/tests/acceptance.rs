//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary so every line is printed; exits non-zero when any
//! criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use gyroflow::config::{Ablation, GatAttention, ModelConfig};
use gyroflow::curvature::forman_curvature;
use gyroflow::dynamics::{simulate_flow_only, Dynamics, FMode, FlowKind, IntegratorConfig, SystemState};
use gyroflow::error::Error;
use gyroflow::entropy::{audit, normalized_laplacian, symmetric_eigen, von_neumann_entropy};
use gyroflow::geometry::{
    distance, exp0, gyro_transform, log0, mobius_add, Curvature, ManifoldPoint,
};
use gyroflow::graph::WeightedGraph;
use gyroflow::harness::{
    audit_flow, evaluate, generate, geomcheck, model_rollout, predict, random_connected_graph,
    GenerateSpec, SystemKind, TrajectoryDataset,
};
use gyroflow::learning::{forecast, loss, sequence_gradient, split_point, train, TrainOutcome};
use gyroflow::linalg::Matrix;
use gyroflow::network::{encode_initial_state, init_params, Checkpoint, ModelParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// FNV-1a over the bit patterns of every recorded number.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Digest(u64);

impl Digest {
    fn new() -> Self {
        Digest(0xcbf2_9ce4_8422_2325)
    }

    fn push(&mut self, x: f64) {
        for b in x.to_bits().to_le_bytes() {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(0x0100_0000_01b3);
        }
    }

    fn extend(&mut self, xs: impl IntoIterator<Item = f64>) {
        for x in xs {
            self.push(x);
        }
    }

    fn graph(&mut self, g: &WeightedGraph) {
        self.extend(g.weights().iter().copied());
    }
}

struct Outcome {
    pass: bool,
    detail: String,
    digest: Digest,
}

/// Positivity of weights and membership of positions, over every state of
/// every run that integrates the coupled system.
#[derive(Default)]
struct Closure {
    states: usize,
    bad: usize,
}

impl Closure {
    fn weights(&mut self, w: &[f64]) {
        self.states += 1;
        if !w.iter().all(|w| w.is_finite() && *w > 0.0) {
            self.bad += 1;
        }
    }

    fn state(&mut self, s: &SystemState, kappa: Curvature) {
        self.weights(&s.w);
        if !s.z.iter().all(|p| p.in_domain(kappa)) {
            self.bad += 1;
        }
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn curvature(k: f64) -> Curvature {
    Curvature::new(k).unwrap()
}

fn random_tangent(rng: &mut ChaCha8Rng, dim: usize, scale: f64) -> Vec<f64> {
    (0..dim).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect()
}

// 1. closure of the Gyro-transform and membership of its Lorentz image
fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut digest = Digest::new();
    let mut worst_domain: f64 = f64::NEG_INFINITY;
    let mut worst_lorentz: f64 = 0.0;
    let mut pass = true;
    for (i, k) in [-2.0, -1.0, -0.5, 0.5, 1.0, 2.0].into_iter().enumerate() {
        for d in [2, 16] {
            let r = geomcheck(k, d, 10_000, 100 + i as u64).unwrap();
            for c in &r.checks {
                digest.push(c.worst);
                match c.name {
                    "gyro_transform_domain" => {
                        worst_domain = worst_domain.max(c.worst);
                        pass &= c.passed;
                    }
                    "gyro_transform_lorentz" => {
                        worst_lorentz = worst_lorentz.max(c.worst);
                        pass &= c.passed;
                    }
                    _ => {}
                }
            }
        }
    }
    let elapsed = start.elapsed();
    pass &= elapsed < Duration::from_secs(5);
    Outcome {
        pass,
        detail: format!(
            "max -k|out|^2 = {worst_domain:.6} (< 1), max Lorentz residual = {worst_lorentz:.2e} (<= 1e-9), {:.2} s (< 5 s)",
            elapsed.as_secs_f64()
        ),
        digest,
    }
}

struct FlowPool {
    graphs: Vec<WeightedGraph>,
    params: Vec<ModelParams>,
    positions: Vec<Vec<ManifoldPoint>>,
}

fn flow_pool() -> FlowPool {
    let kappa = curvature(-1.0);
    let cfg = ModelConfig::default();
    let mut pool = FlowPool {
        graphs: Vec::new(),
        params: Vec::new(),
        positions: Vec::new(),
    };
    for seed in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(2000 + seed);
        let n = rng.gen_range(5..=20);
        let m = rng.gen_range(n..=(3 * n).min(n * (n - 1) / 2));
        pool.graphs.push(random_connected_graph(&mut rng, n, m, (0.5, 2.0)).unwrap());
        pool.params.push(init_params(&cfg, cfg.d, cfg.d, 3000 + seed).unwrap());
        pool.positions.push(
            (0..n)
                .map(|_| {
                    let v = random_tangent(&mut rng, cfg.d, 0.5);
                    ManifoldPoint::new(exp0(&v, kappa).unwrap(), kappa).unwrap()
                })
                .collect(),
        );
    }
    pool
}

// 2. entropy monotonicity of the constrained flow, and its absence for the canonical one
fn criterion_2(closure: &mut Closure) -> Outcome {
    let start = Instant::now();
    let kappa = curvature(-1.0);
    let pool = flow_pool();
    let mut digest = Digest::new();
    let mut passed = 0;
    let mut worst = 0.0f64;
    let mut halvings = 0;
    let mut canonical_drop = 0.0f64;
    let mut diverged = 0;
    for ((g, params), z) in pool.graphs.iter().zip(&pool.params).zip(&pool.positions) {
        let mode = FMode::Network {
            params,
            z,
            kappa,
        };
        let a = audit_flow(g, &mode, FlowKind::Constrained, 200, 1e-3, 1e-6).unwrap();
        for (_, g) in &a.trajectory {
            closure.weights(g.weights());
        }
        digest.extend(a.report.series.points.iter().map(|p| p.1));
        worst = worst.min(a.report.min_delta());
        halvings += a.halvings;
        if a.report.verdict {
            passed += 1;
        }

        // the canonical flow can blow up in finite time; those runs are counted apart
        match simulate_flow_only(g, &mode, FlowKind::Canonical, 200, 1e-3) {
            Ok(traj) => {
                let c = audit(&traj, 1e-6).unwrap();
                digest.extend(c.series.points.iter().map(|p| p.1));
                canonical_drop = canonical_drop.min(c.min_delta());
            }
            Err(Error::Numeric { iterations, .. }) => {
                digest.push(iterations as f64);
                diverged += 1;
            }
            Err(e) => panic!("{e}"),
        }
    }
    let elapsed = start.elapsed();
    let pass = passed == 50 && canonical_drop < -1e-4 && elapsed < Duration::from_secs(60);
    Outcome {
        pass,
        detail: format!(
            "constrained verdict true on {passed}/50 (worst step dH = {worst:.3e}, {halvings} halvings), \
             canonical worst step dH = {canonical_drop:.3e} (< -1e-4) with {diverged} runs diverged, {:.1} s (< 60 s)",
            elapsed.as_secs_f64()
        ),
        digest,
    }
}

fn assert_curv(g: &WeightedGraph, expected: &[f64]) -> f64 {
    let r = forman_curvature(g).0;
    assert_eq!(r.len(), expected.len());
    max_abs_diff(&r, expected)
}

// 3. Forman curvature oracles and weight-scale invariance
fn criterion_3() -> Outcome {
    let mut digest = Digest::new();
    let unit = |n, e: &[(usize, usize)]| {
        WeightedGraph::from_edges(n, &e.iter().map(|&(i, j)| (i, j, 1.0)).collect::<Vec<_>>()).unwrap()
    };
    let cases = [
        (unit(2, &[(0, 1)]), vec![2.0]),
        (unit(3, &[(0, 1), (1, 2)]), vec![1.0, 1.0]),
        (unit(3, &[(0, 1), (1, 2), (0, 2)]), vec![0.0; 3]),
        (unit(4, &[(0, 1), (0, 2), (0, 3)]), vec![0.0; 3]),
    ];
    let mut oracle_err: f64 = 0.0;
    for (g, want) in &cases {
        oracle_err = oracle_err.max(assert_curv(g, want));
        digest.extend(forman_curvature(g).0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let mut scale_err: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.gen_range(3..=15);
        let m = rng.gen_range(n - 1..=n * (n - 1) / 2);
        let g = random_connected_graph(&mut rng, n, m, (0.1, 5.0)).unwrap();
        let c = rng.gen_range(0.01..100.0);
        let a = forman_curvature(&g).0;
        let b = forman_curvature(&g.scaled(c).unwrap()).0;
        scale_err = scale_err.max(max_abs_diff(&a, &b));
        digest.extend(a);
    }
    Outcome {
        pass: oracle_err <= 1e-12 && scale_err <= 1e-12,
        detail: format!("oracle error {oracle_err:.1e} (<= 1e-12), scale invariance error {scale_err:.1e} (<= 1e-12)"),
        digest,
    }
}

// 4. entropy of K2 and K3, eigensolver reconstruction
fn criterion_4() -> Outcome {
    let mut digest = Digest::new();
    let k2 = WeightedGraph::from_edges(2, &[(0, 1, 1.0)]).unwrap();
    let k3 = WeightedGraph::from_edges(3, &[(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)]).unwrap();
    let h2 = von_neumann_entropy(&k2).unwrap();
    let h3 = von_neumann_entropy(&k3).unwrap();
    digest.extend([h2, h3]);
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let mut recon: f64 = 0.0;
    for n in [2, 3, 5, 8, 16, 32, 48, 64] {
        for _ in 0..3 {
            let m = rng.gen_range(n - 1..=n * (n - 1) / 2);
            let g = random_connected_graph(&mut rng, n, m, (0.5, 2.0)).unwrap();
            let l = normalized_laplacian(&g).unwrap();
            let scaled = l.map(|x| x / n as f64);
            let e = symmetric_eigen(&scaled).unwrap();
            let back = e.reconstruct();
            recon = recon.max(max_abs_diff(back.data(), scaled.data()));
            digest.extend(e.values.iter().copied());
        }
    }
    let e2 = h2.abs();
    let e3 = (h3 - std::f64::consts::LN_2).abs();
    Outcome {
        pass: e2 <= 1e-12 && e3 <= 1e-9 && recon <= 1e-9,
        detail: format!("|H(K2)| = {e2:.1e} (<= 1e-12), |H(K3) - ln 2| = {e3:.1e} (<= 1e-9), reconstruction up to n = 64: {recon:.1e} (<= 1e-9)"),
        digest,
    }
}

// 5. inverse pairs, identities and the flat limit
fn criterion_5() -> Outcome {
    let start = Instant::now();
    let mut digest = Digest::new();
    let mut worst = std::collections::BTreeMap::<&str, f64>::new();
    for (i, k) in [-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0].into_iter().enumerate() {
        for d in [2, 16] {
            let r = geomcheck(k, d, 10_000, 500 + i as u64).unwrap();
            for c in &r.checks {
                if c.name != "gyro_transform_domain" && c.name != "gyro_transform_lorentz" {
                    let w = worst.entry(c.name).or_insert(0.0);
                    *w = w.max(c.worst);
                    digest.push(c.worst);
                }
            }
        }
    }
    // ops at |κ| = 1e-6 against the exact flat formulas
    let flat = Curvature::FLAT;
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let mut cont: f64 = 0.0;
    for _ in 0..1000 {
        let dim = rng.gen_range(2..=16);
        let x = random_tangent(&mut rng, dim, 0.3);
        let y = random_tangent(&mut rng, dim, 0.3);
        let w = Matrix::new(dim, dim, random_tangent(&mut rng, dim * dim, 1.0)).unwrap();
        for k in [-1e-6, 1e-6] {
            let kap = curvature(k);
            let px = ManifoldPoint::new(x.clone(), kap).unwrap();
            let py = ManifoldPoint::new(y.clone(), kap).unwrap();
            let fx = ManifoldPoint::new(x.clone(), flat).unwrap();
            let fy = ManifoldPoint::new(y.clone(), flat).unwrap();
            cont = cont.max(max_abs_diff(&exp0(&x, kap).unwrap(), &exp0(&x, flat).unwrap()));
            cont = cont.max(max_abs_diff(&log0(&x, kap), &log0(&x, flat)));
            cont = cont.max(max_abs_diff(
                mobius_add(&px, &py, kap).unwrap().coords(),
                mobius_add(&fx, &fy, flat).unwrap().coords(),
            ));
            cont = cont.max(
                (distance(&px, &py, kap).unwrap() - distance(&fx, &fy, flat).unwrap()).abs(),
            );
            cont = cont.max(max_abs_diff(
                gyro_transform(&w, &px, kap).unwrap().coords(),
                gyro_transform(&w, &fx, flat).unwrap().coords(),
            ));
        }
    }
    digest.push(cont);
    let elapsed = start.elapsed();
    let rt = worst["exp_log_round_trip"];
    let id = worst["mobius_identity"];
    let inv = worst["mobius_inverse"];
    let gid = worst["gyro_transform_identity"];
    let pass = rt <= 1e-8
        && id <= 1e-10
        && inv <= 1e-12
        && cont <= 1e-4
        && gid <= 1e-10
        && elapsed < Duration::from_secs(10);
    Outcome {
        pass,
        detail: format!(
            "round trip {rt:.1e} (<= 1e-8), Mobius identity {id:.1e} (<= 1e-10), inverse {inv:.1e} (<= 1e-12), \
             flat limit {cont:.1e} (<= 1e-4), gyro identity {gid:.1e} (<= 1e-10), {:.2} s (< 10 s)",
            elapsed.as_secs_f64()
        ),
        digest,
    }
}

fn gradient_instance(system: SystemKind, attention: GatAttention, seed: u64) -> (f64, usize) {
    let data = generate(&GenerateSpec {
        sequences: 1,
        ..GenerateSpec::new(system, 4, 6, seed)
    })
    .unwrap();
    let cfg = ModelConfig {
        d: 4,
        d_time: 4,
        gat_attention: attention,
        ..ModelConfig::default()
    };
    let mut params = init_params(&cfg, data.feature_dim, data.feature_dim, seed).unwrap();
    // move the zero-initialised tensors off zero so their gradients are generic
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 1);
    let mut flat = params.flatten();
    for x in flat.iter_mut() {
        *x += 0.05 * rng.sample::<f64, _>(StandardNormal);
    }
    params = params.unflatten(&flat).unwrap();

    let seq = &data.sequences[0];
    let at = split_point(seq.len(), cfg.split_ratio).unwrap();
    let (obs, targets) = seq.split_at(at);
    let times: Vec<f64> = targets.iter().map(|s| s.t).collect();
    let (_, g) = sequence_gradient(&params, obs, targets, &cfg, data.kappa).unwrap();
    let ad = g.flatten();

    let objective = |p: &[f64]| {
        let p = params.unflatten(p).unwrap();
        let fc = forecast(obs, &times, &p, &cfg, data.kappa).unwrap();
        loss(&fc, targets, data.kappa).unwrap().total
    };
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for i in 0..flat.len() {
        let mut up = flat.clone();
        let mut down = flat.clone();
        up[i] += h;
        down[i] -= h;
        let fd = (objective(&up) - objective(&down)) / (2.0 * h);
        let rel = (ad[i] - fd).abs() / ad[i].abs().max(fd.abs()).max(GRAD_FLOOR);
        worst = worst.max(rel);
    }
    (worst, flat.len())
}

/// Denominator floor of the gradient relative error.
const GRAD_FLOOR: f64 = 1e-6;

// 6. reverse-mode gradients against central differences
fn criterion_6() -> Outcome {
    let start = Instant::now();
    let mut digest = Digest::new();
    let (a, na) = gradient_instance(SystemKind::HyperbolicDiffusion, GatAttention::FlowWeights, 61);
    let (b, nb) = gradient_instance(SystemKind::SphericalFlock, GatAttention::Learned, 62);
    digest.extend([a, b]);
    let worst = a.max(b);
    let elapsed = start.elapsed();
    Outcome {
        pass: worst <= 1e-4 && elapsed < Duration::from_secs(30),
        detail: format!(
            "max relative error {worst:.2e} (<= 1e-4) over {na} + {nb} parameters, {:.1} s (< 30 s)",
            elapsed.as_secs_f64()
        ),
        digest,
    }
}

// 7. first-order convergence under step halving
fn criterion_7(closure: &mut Closure) -> Outcome {
    let data = generate(&GenerateSpec {
        sequences: 1,
        ..GenerateSpec::new(SystemKind::HeatGraph, 6, 6, 71)
    })
    .unwrap();
    let cfg = ModelConfig {
        d: 4,
        d_time: 4,
        ..ModelConfig::default()
    };
    let params = init_params(&cfg, data.feature_dim, data.feature_dim, 72).unwrap();
    let kappa = data.kappa;
    let seq = &data.sequences[0];
    let at = split_point(seq.len(), cfg.split_ratio).unwrap();
    let init = encode_initial_state(&seq[..at], &params, &cfg, kappa).unwrap();
    let s0 = SystemState {
        t: 0.0,
        z: init.z0.clone(),
        w: init.edge_weights.clone(),
    };
    let dynm = Dynamics::new(&init.topology, &params, &cfg, kappa);
    let horizon = 0.32;
    let end_state = |dt: f64, closure: &mut Closure| {
        let icfg = IntegratorConfig {
            base_step: dt,
            ..IntegratorConfig::from_model(&cfg)
        };
        let steps = (horizon / dt).round() as usize;
        let times: Vec<f64> = (1..=steps).map(|k| k as f64 * dt).collect();
        let states = dynm.integrate(&s0, &times, &icfg).unwrap();
        for s in &states {
            closure.state(s, kappa);
        }
        let last = states.last().unwrap();
        let mut v: Vec<f64> = last.z.iter().flat_map(|p| p.coords().to_vec()).collect();
        v.extend(&last.w);
        v
    };
    let reference = end_state(0.04 / 1024.0, closure);
    let steps: Vec<f64> = (0..5).map(|k| 0.04 / f64::powi(2.0, k)).collect();
    let mut digest = Digest::new();
    let mut pts = Vec::new();
    for &dt in &steps {
        let err = max_abs_diff(&end_state(dt, closure), &reference);
        digest.push(err);
        pts.push((dt.ln(), err.ln()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
        / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    Outcome {
        pass: (slope - 1.0).abs() <= 0.2,
        detail: format!("log-log error slope {slope:.3} (1.0 +- 0.2) over dt = 0.04 .. 0.0025"),
        digest,
    }
}

struct TrainRun {
    first: f64,
    last: f64,
    model: f64,
    persistence: f64,
    digest: Digest,
}

fn flock(seed: u64) -> TrajectoryDataset {
    generate(&GenerateSpec::new(SystemKind::SphericalFlock, 10, 20, seed)).unwrap()
}

fn checkpoint(out: TrainOutcome, cfg: &ModelConfig, seed: u64) -> Checkpoint {
    Checkpoint {
        config: ModelConfig {
            kappa: Some(out.kappa.value()),
            ..cfg.clone()
        },
        seed,
        params: out.params,
    }
}

fn training_run(ablation: Ablation, closure: &mut Closure) -> TrainRun {
    let train_data = flock(7);
    let held_out = flock(8);
    let cfg = ModelConfig {
        ablation,
        ..ModelConfig::default()
    };
    let out = train(&train_data, &cfg, 42).unwrap();
    let losses = out.log.losses();
    let mut digest = Digest::new();
    digest.extend(losses.iter().map(|o| o.total));
    let first = losses[0].total;
    let last = losses.last().unwrap().total;
    let ck = checkpoint(out, &cfg, 42);
    let horizon = held_out.sequences[0].len() - split_point(20, cfg.split_ratio).unwrap();
    for p in predict(&ck, &held_out, horizon).unwrap() {
        for s in &p.states {
            closure.state(s, train_data.kappa);
        }
    }
    let ev = evaluate(&ck, &held_out, horizon).unwrap();
    digest.extend([ev.model.mape, ev.model.rmse, ev.persistence.mape, ev.persistence.rmse]);
    digest.extend(ck.params.flatten());
    TrainRun {
        first,
        last,
        model: ev.model.mape,
        persistence: ev.persistence.mape,
        digest,
    }
}

// 8. training smoke test and ablations
fn criterion_8(closure: &mut Closure) -> Outcome {
    let start = Instant::now();
    let full = training_run(Ablation::None, closure);
    // the determinism rerun repeats the full model only
    let digest = full.digest;
    let ratio = full.last / full.first;
    let mut pass = ratio <= 0.5 && full.model < full.persistence;
    let mut ablations = Vec::new();
    for a in [Ablation::WoEvo, Ablation::WoRic, Ablation::WoCon, Ablation::WoGyr] {
        let r = training_run(a, closure);
        pass &= r.last.is_finite();
        ablations.push(format!("{} {:.3}", a.name(), r.last));
    }
    let elapsed = start.elapsed();
    pass &= elapsed < Duration::from_secs(600);
    Outcome {
        pass,
        detail: format!(
            "loss {:.4} -> {:.4} (ratio {ratio:.3} <= 0.5), held-out MAPE {:.3}% vs persistence {:.3}%, \
             ablations completed [{}], {:.0} s (< 600 s)",
            full.first,
            full.last,
            full.model,
            full.persistence,
            ablations.join(", "),
            elapsed.as_secs_f64()
        ),
        digest,
    }
}

// 9. entropy of the weights predicted by a model trained on heat_graph
fn criterion_9(closure: &mut Closure) -> Outcome {
    let spec = |seed| GenerateSpec::new(SystemKind::HeatGraph, 8, 12, seed);
    let train_data = generate(&spec(91)).unwrap();
    let held_out = generate(&spec(92)).unwrap();
    let cfg = ModelConfig::default();
    let out = train(&train_data, &cfg, 93).unwrap();
    let ck = checkpoint(out, &cfg, 93);
    let mut digest = Digest::new();
    let mut rollouts = 0;
    let mut passed = 0;
    let mut worst = 0.0f64;
    for data in [&train_data, &held_out] {
        for (k, seq) in data.sequences.iter().enumerate() {
            let at = split_point(seq.len(), cfg.split_ratio).unwrap();
            let span = seq.last().unwrap().t - seq[at - 1].t;
            let steps = (span / cfg.base_step).ceil() as usize;
            let traj = model_rollout(&ck, data, k, steps, FlowKind::Constrained).unwrap();
            for (_, g) in &traj {
                closure.weights(g.weights());
                digest.graph(g);
            }
            let r = audit(&traj, 1e-5).unwrap();
            rollouts += 1;
            worst = worst.min(r.min_delta());
            if r.verdict {
                passed += 1;
            }
        }
    }
    Outcome {
        pass: passed == rollouts,
        detail: format!(
            "verdict true on {passed}/{rollouts} predicted weight trajectories at tol 1e-5 (worst step dH = {worst:.3e})"
        ),
        digest,
    }
}

fn line(id: &str, o: &Outcome) {
    println!("criterion {id}: {} - {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
}

fn main() -> ExitCode {
    let total = Instant::now();
    let mut closure = Closure::default();
    let mut outcomes: Vec<(&str, Outcome)> = Vec::new();

    macro_rules! run {
        ($id:expr, $e:expr) => {{
            eprintln!("running criterion {}", $id);
            let o = $e;
            line($id, &o);
            outcomes.push(($id, o));
        }};
    }

    run!("1", criterion_1());
    run!("2", criterion_2(&mut closure));
    run!("3", criterion_3());
    run!("4", criterion_4());
    run!("5", criterion_5());
    run!("6", criterion_6());
    let mut c7 = criterion_7(&mut closure);
    run!("8", criterion_8(&mut closure));
    run!("9", criterion_9(&mut closure));

    let closure_ok = closure.bad == 0 && closure.states > 0;
    c7.pass &= closure_ok;
    c7.detail.push_str(&format!(
        "; positivity and closure violated in {}/{} recorded states",
        closure.bad, closure.states
    ));
    line("7", &c7);
    outcomes.insert(6, ("7", c7));

    // same seeds again; criterion 8 repeats the full model only
    eprintln!("running criterion 10");
    let mut scratch = Closure::default();
    let again = [
        criterion_1().digest,
        criterion_2(&mut scratch).digest,
        criterion_3().digest,
        criterion_4().digest,
        criterion_5().digest,
        criterion_6().digest,
        criterion_7(&mut scratch).digest,
        training_run(Ablation::None, &mut scratch).digest,
        criterion_9(&mut scratch).digest,
    ];
    let mismatched: Vec<String> = again
        .iter()
        .zip(&outcomes)
        .filter(|(d, (_, o))| **d != o.digest)
        .map(|(_, (id, _))| id.to_string())
        .collect();
    let c10 = Outcome {
        pass: mismatched.is_empty(),
        detail: if mismatched.is_empty() {
            "criteria 1-9 reproduced bit for bit".into()
        } else {
            format!("digests differ for criteria {}", mismatched.join(", "))
        },
        digest: Digest::new(),
    };
    line("10", &c10);
    outcomes.push(("10", c10));

    let failed: Vec<&str> = outcomes.iter().filter(|(_, o)| !o.pass).map(|(id, _)| *id).collect();
    println!(
        "acceptance: {}/{} criteria passed in {:.0} s",
        outcomes.len() - failed.len(),
        outcomes.len(),
        total.elapsed().as_secs_f64()
    );
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("failed: {}", failed.join(", "));
        ExitCode::FAILURE
    }
}
