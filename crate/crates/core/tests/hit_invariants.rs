use dyn_leiden::graph::{DeltaBatch, EdgeDelta, Graph};
use dyn_leiden::hit::HitState;
use dyn_leiden::leiden::run_leiden;
use dyn_leiden::metrics::{check_connectivity, modularity};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_graph(rng: &mut ChaCha8Rng, n: u32, edges: usize) -> Graph {
    let mut list = Vec::new();
    for _ in 0..edges {
        let u = rng.random_range(0..n);
        let v = rng.random_range(0..n);
        list.push((u, v, rng.random_range(1..4) as f64));
    }
    Graph::from_edges(n as usize, list).unwrap()
}

/// Mixed batch over existing edges plus a few new vertices.
fn random_batch(rng: &mut ChaCha8Rng, g: &Graph, size: usize, grow: bool) -> DeltaBatch {
    let mut batch = DeltaBatch::new();
    let mut scratch = g.clone();
    let n = g.num_vertices() as u32 + if grow { 2 } else { 0 };
    for _ in 0..size {
        let edges = scratch.edges();
        let d = if !edges.is_empty() && rng.random_bool(0.4) {
            let (u, v, w) = edges[rng.random_range(0..edges.len())];
            let amount = if rng.random_bool(0.5) { w } else { w / 2.0 };
            EdgeDelta::delete(u, v, amount)
        } else {
            EdgeDelta::insert(rng.random_range(0..n.max(1)), rng.random_range(0..n.max(1)), rng.random_range(1..3) as f64)
        };
        scratch.add_weight(d.u, d.v, d.alpha).unwrap();
        batch.push(d);
    }
    batch
}

fn run_sequence(seed: u64, n: u32, edges: usize, levels: usize, gamma: f64, steps: usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = random_graph(&mut rng, n, edges);
    let mut state = HitState::build(&g, levels, gamma);
    state.check_consistency().unwrap();
    for step in 0..steps {
        let size = rng.random_range(0..6);
        let batch = random_batch(&mut rng, &g, size, step % 3 == 0);
        g.apply_delta(&batch).unwrap();
        state.step(&batch).unwrap();
        if let Err(e) = state.check_consistency() {
            panic!("seed {seed} step {step}: {e}");
        }
        assert!(state.graph().approx_eq(&g, 1e-9), "seed {seed} step {step}: base graph drifted");
        let bad = check_connectivity(state.graph(), state.membership())
            .into_iter()
            .filter(|r| !r.connected)
            .count();
        assert_eq!(bad, 0, "seed {seed} step {step}: disconnected community");
    }
}

#[test]
fn random_sequences_keep_state_consistent() {
    for seed in 0..300 {
        run_sequence(seed, 12 + (seed % 30) as u32, 30 + (seed % 50) as usize, 1 + (seed % 5) as usize, [0.5, 1.0, 2.0][(seed % 3) as usize], 20);
    }
}

#[test]
fn modularity_tracks_static_on_small_sequences() {
    let mut worst: f64 = 0.0;
    for seed in 0..40 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let mut g = random_graph(&mut rng, 60, 200);
        let mut state = HitState::build(&g, 10, 1.0);
        for _ in 0..10 {
            let batch = random_batch(&mut rng, &g, 5, false);
            g.apply_delta(&batch).unwrap();
            state.step(&batch).unwrap();
            let q_hit = modularity(&g, state.membership(), 1.0).unwrap();
            let q_st = modularity(&g, &run_leiden(&g, None, 10, 1.0).membership, 1.0).unwrap();
            worst = worst.max(q_st - q_hit);
        }
    }
    eprintln!("worst static-minus-incremental gap {worst}");
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]
    #[test]
    fn consistent_under_random_batches(seed in 0u64..1_000_000, levels in 1usize..6) {
        run_sequence(seed, 20, 40, levels, 1.0, 8);
    }
}
