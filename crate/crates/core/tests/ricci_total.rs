use gyroflow::curvature::ricci_total;
use gyroflow::dynamics::{simulate_flow_only, FMode, FlowKind};
use gyroflow::harness::random_connected_graph;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const STEP: f64 = 1e-4;
const TOL: f64 = 1e-3;

// dRic/dt ≥ (m − n)/2 along the constrained flow, by a forward difference
#[test]
fn total_curvature_grows_at_least_by_the_edge_surplus() {
    for seed in 0..25u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(500 + seed);
        let n = rng.gen_range(5..=20);
        let m = rng.gen_range(n..=(3 * n).min(n * (n - 1) / 2));
        let g = random_connected_graph(&mut rng, n, m, (0.5, 2.0)).unwrap();
        let f: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..1.0)).collect();
        let run = simulate_flow_only(&g, &FMode::PerEdge(f), FlowKind::Constrained, 1, STEP).unwrap();
        let rate = (ricci_total(&run[1].1) - ricci_total(&run[0].1)) / STEP;
        let bound = (m as f64 - n as f64) / 2.0;
        assert!(rate >= bound - TOL, "seed {seed}: n {n} m {m}, dRic/dt {rate} < {bound}");
    }
}
