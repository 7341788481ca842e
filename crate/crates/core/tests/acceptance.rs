//! Acceptance criteria 1 to 10. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

use dyn_leiden::baselines::MaintainerKind;
use dyn_leiden::bench::{emit_report, make_batches, run_batches, run_benchmark, BenchConfig, ReportFormat};
use dyn_leiden::cc_index::CcIndex;
use dyn_leiden::graph::{DeltaBatch, EdgeDelta, Graph};
use dyn_leiden::hit::{inc_aggregation, HitState};
use dyn_leiden::leiden::{aggregate_graph, run_leiden};
use dyn_leiden::metrics::{
    check_connectivity, modularity, modularity_gain, verify_communities, DensityBudget, MoveTarget,
};
use dyn_leiden::partition::{groups, normalize_labels, Label, Partition};
use dyn_leiden::stream::StreamEdge;
use dyn_leiden::synth::PlantedPartition;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

const PARITY_TOLERANCE: f64 = 0.01;
const DENSE_FRACTION: f64 = 0.99;
const GAIN_TOLERANCE: f64 = 1e-9;
const LEVEL_TOLERANCE: f64 = 1e-9;
const FIDELITY_TOLERANCE: f64 = 1e-9;
const SPEEDUP: f64 = 5.0;

type Outcome = Result<String, String>;

fn stream_of(cfg: &PlantedPartition) -> Vec<StreamEdge> {
    cfg.edges()
        .into_iter()
        .map(|(u, v)| StreamEdge {
            u,
            v,
            weight: 1.0,
            timestamp: None,
        })
        .collect()
}

fn parity_graph(seed: u64) -> PlantedPartition {
    PlantedPartition {
        blocks: 20,
        size: 100,
        p_in: 0.08,
        p_out: 0.001,
        seed,
    }
}

fn parity_config(kind: MaintainerKind, seed: u64) -> BenchConfig {
    BenchConfig {
        batch_size: 100,
        batch_count: 9,
        algorithm: kind,
        seed,
        density_sample: usize::MAX,
        timings: false,
        ..BenchConfig::default()
    }
}

fn disconnected(g: &Graph, membership: &[Label]) -> usize {
    check_connectivity(g, membership).iter().filter(|r| !r.connected).count()
}

/// Per-batch results of the three maintainers on the parity graphs.
struct ParityRuns {
    worst_hit: f64,
    worst_nd: f64,
    dense: usize,
    checked: usize,
    disconnected_static: usize,
    disconnected_hit: usize,
    communities_hit: usize,
}

fn parity_runs() -> ParityRuns {
    let mut runs = ParityRuns {
        worst_hit: 0.0,
        worst_nd: 0.0,
        dense: 0,
        checked: 0,
        disconnected_static: 0,
        disconnected_hit: 0,
        communities_hit: 0,
    };
    for seed in [11, 22, 33] {
        let edges = stream_of(&parity_graph(seed));
        let (base, batches) = make_batches(&edges, &parity_config(MaintainerKind::Hit, seed)).unwrap();
        let st = run_batches(&base, &batches, &parity_config(MaintainerKind::Static, seed)).unwrap();
        let nd = run_batches(&base, &batches, &parity_config(MaintainerKind::NaiveDynamic, seed)).unwrap();
        let mut state = HitState::build(&base, 10, 1.0);
        let mut g = base.clone();
        for (i, batch) in batches.iter().enumerate() {
            state.step(batch).unwrap();
            g.apply_delta(batch).unwrap();
            let q_st = st.reports[i].modularity;
            let q_hit = modularity(&g, state.membership(), 1.0).unwrap();
            runs.worst_hit = runs.worst_hit.max((q_hit - q_st).abs());
            runs.worst_nd = runs.worst_nd.max((nd.reports[i].modularity - q_st).abs());
            let budget = DensityBudget {
                seed: seed + i as u64,
                ..DensityBudget::default()
            };
            let reports = verify_communities(&g, state.membership(), 1.0, &budget, usize::MAX);
            runs.checked += reports.len();
            runs.dense += reports.iter().filter(|r| r.gamma_dense).count();
            runs.communities_hit += reports.len();
            runs.disconnected_hit += reports.iter().filter(|r| !r.connected).count();
            let static_membership = run_leiden(&g, None, 10, 1.0).membership;
            runs.disconnected_static += disconnected(&g, &static_membership);
        }
    }
    runs
}

fn criterion_1(runs: &ParityRuns) -> Outcome {
    let detail = format!(
        "max |Q_hit - Q_st| = {:.5}, max |Q_nd - Q_st| = {:.5} (tolerance {PARITY_TOLERANCE})",
        runs.worst_hit, runs.worst_nd
    );
    if runs.worst_hit <= PARITY_TOLERANCE && runs.worst_nd <= PARITY_TOLERANCE {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_2(runs: &ParityRuns) -> Outcome {
    let fraction = runs.dense as f64 / runs.checked.max(1) as f64;
    let detail = format!("{}/{} communities dense ({:.2}%)", runs.dense, runs.checked, 100.0 * fraction);
    if runs.checked > 0 && fraction >= DENSE_FRACTION {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn random_graph(rng: &mut ChaCha8Rng, n: u32, edges: usize, loops: bool) -> Graph {
    let mut list = Vec::with_capacity(edges);
    while list.len() < edges {
        let u = rng.random_range(0..n);
        let v = rng.random_range(0..n);
        if u == v && !loops {
            continue;
        }
        list.push((u, v, rng.random_range(1..5) as f64 * 0.5));
    }
    Graph::from_edges(n as usize, list).unwrap()
}

fn random_batch(rng: &mut ChaCha8Rng, g: &Graph, size: usize, n: u32) -> DeltaBatch {
    let mut scratch = g.clone();
    let mut batch = DeltaBatch::new();
    for _ in 0..size {
        let edges = scratch.edges();
        let d = if !edges.is_empty() && rng.random_bool(0.4) {
            let (u, v, w) = edges[rng.random_range(0..edges.len())];
            EdgeDelta::delete(u, v, if rng.random_bool(0.5) { w } else { w / 2.0 })
        } else {
            EdgeDelta::insert(rng.random_range(0..n), rng.random_range(0..n), rng.random_range(1..4) as f64)
        };
        scratch.add_weight(d.u, d.v, d.alpha).unwrap();
        batch.push(d);
    }
    batch
}

fn criterion_3(runs: &ParityRuns, sequences: &SequenceRuns) -> Outcome {
    let bad = runs.disconnected_static + runs.disconnected_hit + sequences.disconnected;
    let detail = format!(
        "disconnected: static {}, hit {} of {} on synthetics, {} on random sequences",
        runs.disconnected_static, runs.disconnected_hit, runs.communities_hit, sequences.disconnected
    );
    if bad == 0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    let mut argmax_mismatch = 0;
    for case in 0..1000 {
        let n = rng.random_range(2..=30);
        let m = rng.random_range(1..=3 * n as usize);
        let g = random_graph(&mut rng, n, m, true);
        let k = rng.random_range(1..=n);
        let membership: Vec<Label> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let gamma = [0.5, 1.0, 1.5][case % 3];
        let v = rng.random_range(0..n);
        let q_before = modularity(&g, &membership, gamma).unwrap();
        let mut targets: Vec<(MoveTarget, Vec<Label>)> = Vec::new();
        for c in 0..k {
            if c != membership[v as usize] && membership.contains(&c) {
                let mut moved = membership.clone();
                moved[v as usize] = c;
                targets.push((MoveTarget::Community(c), moved));
            }
        }
        let mut alone = membership.clone();
        alone[v as usize] = k;
        targets.push((MoveTarget::Empty, alone));
        let mut best_formula = (f64::NEG_INFINITY, 0);
        let mut exact = Vec::with_capacity(targets.len());
        for (i, (target, moved)) in targets.iter().enumerate() {
            let gain = modularity_gain(&g, &membership, v, *target, gamma).unwrap();
            let diff = modularity(&g, moved, gamma).unwrap() - q_before;
            worst = worst.max((diff - 2.0 * gain).abs());
            if gain > best_formula.0 {
                best_formula = (gain, i);
            }
            exact.push(diff);
        }
        let best_exact = exact.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if exact[best_formula.1] < best_exact - GAIN_TOLERANCE {
            argmax_mismatch += 1;
        }
    }
    let detail = format!("max |dQ - 2 gain| = {worst:.2e}, argmax mismatches {argmax_mismatch}/1000");
    if worst <= GAIN_TOLERANCE && argmax_mismatch == 0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    let mut levels_checked = 0;
    for case in 0..100 {
        let n = rng.random_range(5..=80);
        let m = rng.random_range(n as usize..=4 * n as usize);
        let g = random_graph(&mut rng, n, m, case % 2 == 0);
        let gamma = [0.25, 0.5, 1.0, 2.0][case % 4];
        let out = run_leiden(&g, None, 6, gamma);
        let mut lift: Vec<Label> = (0..n).collect();
        for level in &out.hierarchy.levels {
            let base: Vec<Label> = lift.iter().map(|&x| level.community[x as usize]).collect();
            let q_level = modularity(&level.graph, &level.community, gamma).unwrap();
            let q_base = modularity(&g, &base, gamma).unwrap();
            worst = worst.max((q_level - q_base).abs());
            levels_checked += 1;
            for x in lift.iter_mut() {
                *x = level.sub[*x as usize];
            }
        }
    }
    let detail = format!("{levels_checked} levels over 100 hierarchies, max |Q_level - Q_base| = {worst:.2e}");
    if worst <= LEVEL_TOLERANCE {
        Ok(detail)
    } else {
        Err(detail)
    }
}

struct SequenceRuns {
    failures: Vec<String>,
    steps: usize,
    disconnected: usize,
}

/// Composes the sub-community maps from the base level to the top.
fn composed_chain(state: &HitState) -> Vec<Label> {
    let mut map: Vec<Label> = state.level(0).sub().assignment().to_vec();
    for p in 1..state.depth() {
        let s = state.level(p).sub().assignment();
        for x in map.iter_mut() {
            *x = s[*x as usize];
        }
    }
    map
}

fn check_fidelity(state: &HitState) -> Result<(), String> {
    state.check_consistency()?;
    for p in 0..state.depth() - 1 {
        let lower = state.level(p);
        let upper = state.level(p + 1);
        let rebuilt = aggregate_graph(lower.graph(), lower.sub().assignment(), upper.graph().num_vertices());
        if !rebuilt.approx_eq(upper.graph(), FIDELITY_TOLERANCE) {
            return Err(format!("level {} supergraph differs from aggregation", p + 2));
        }
    }
    if normalize_labels(&composed_chain(state)) != normalize_labels(state.membership()) {
        return Err("base membership differs from the composed sub-community chain".into());
    }
    Ok(())
}

fn sequence_runs() -> SequenceRuns {
    let mut out = SequenceRuns {
        failures: Vec::new(),
        steps: 0,
        disconnected: 0,
    };
    for seed in 0..200u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(600 + seed);
        let n = rng.random_range(10..=90);
        let m = rng.random_range(n as usize..=3 * n as usize);
        let mut g = random_graph(&mut rng, n, m, seed % 4 == 0);
        let levels = rng.random_range(1..=6);
        let gamma = [0.5, 1.0, 2.0][(seed % 3) as usize];
        let mut state = HitState::build(&g, levels, gamma);
        for step in 0..20 {
            let size = rng.random_range(0..8);
            let grow = (g.num_vertices() as u32 + 1).min(100);
            let batch = random_batch(&mut rng, &g, size, grow);
            g.apply_delta(&batch).unwrap();
            if let Err(e) = state.step(&batch) {
                out.failures.push(format!("sequence {seed} step {step}: {e}"));
                break;
            }
            out.steps += 1;
            if let Err(e) = check_fidelity(&state) {
                out.failures.push(format!("sequence {seed} step {step}: {e}"));
                break;
            }
            if !state.graph().approx_eq(&g, FIDELITY_TOLERANCE) {
                out.failures.push(format!("sequence {seed} step {step}: base graph drifted"));
                break;
            }
            out.disconnected += disconnected(&g, state.membership());
        }
    }
    out
}

fn criterion_6(sequences: &SequenceRuns) -> Outcome {
    let detail = format!("{} steps over 200 sequences, {} failures", sequences.steps, sequences.failures.len());
    match sequences.failures.first() {
        None => Ok(detail),
        Some(first) => Err(format!("{detail}; first: {first}")),
    }
}

fn criterion_7() -> Outcome {
    const GAMMA: f64 = 0.5;
    let g = Graph::from_edges(8, [(0, 1), (2, 3), (2, 4), (4, 5), (4, 6), (5, 6), (6, 7)].map(|(u, v)| (u, v, 1.0))).unwrap();
    let batch: DeltaBatch = vec![EdgeDelta::insert(0, 2, 1.0), EdgeDelta::delete(2, 4, 1.0)].into();
    let mut failures = Vec::new();

    let before = run_leiden(&g, None, 3, GAMMA);
    if groups(&before.membership) != vec![vec![0, 1], vec![2, 3, 4, 5, 6, 7]] {
        failures.push("communities before the update");
    }
    if groups(&before.hierarchy.levels[0].sub) != vec![vec![0, 1], vec![2, 3], vec![4, 5], vec![6, 7]] {
        failures.push("sub-community split of {v5..v8}");
    }
    let mut state = HitState::build(&g, 3, GAMMA);
    let step = state.step(&batch).unwrap();
    if groups(state.membership()) != vec![vec![0, 1, 2, 3], vec![4, 5, 6, 7]] {
        failures.push("communities after the update");
    }
    let top_a = state.level(1).sub().label(state.level(0).sub().label(0));
    let top_b = state.level(1).sub().label(state.level(0).sub().label(4));
    let mut top = step.deltas[2].clone();
    top.sort_by_key(|d| d.u);
    if top != vec![EdgeDelta::new(top_a, top_a, 2.0), EdgeDelta::new(top_b, top_b, -2.0)] {
        failures.push("level-3 superedge changes");
    }

    let tri = Graph::from_edges(3, [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)]).unwrap();
    let sub = Partition::from_assignment(&tri, &[0, 0, 0]);
    let mut cc = CcIndex::build(&tri, sub.assignment());
    let _ = cc.update_edge(0, 1, -1.0);
    let _ = cc.update_edge(1, 2, -1.0);
    let pieces = cc.extract_split_components(&[0, 1, 2], &sub);
    let kept: Vec<Vec<u32>> = pieces.iter().filter(|p| p.keeps_id).map(|p| p.vertices.clone()).collect();
    let split: Vec<Vec<u32>> = pieces.iter().filter(|p| !p.keeps_id).map(|p| p.vertices.clone()).collect();
    if kept != vec![vec![0, 2]] || split != vec![vec![1]] {
        failures.push("S1/S2 split after deletions");
    }

    let mut after = g.clone();
    after.apply_delta(&batch).unwrap();
    let mut s_pre = vec![0, 0, 1, 1, 1, 1, 1, 1];
    let s_cur = vec![0, 0, 0, 0, 1, 1, 1, 1];
    let compressed = inc_aggregation(&after, &batch.deltas, &mut s_pre, &s_cur, &[2, 3]);
    if compressed != vec![EdgeDelta::new(0, 0, 2.0), EdgeDelta::new(1, 1, -2.0)] {
        failures.push("compressed superedge changes");
    }
    if failures.is_empty() {
        Ok("before/after communities, {v5,v6}/{v7,v8}, S1/S2 split, (C1,C1,+2)/(C2,C2,-2)".into())
    } else {
        Err(failures.join(", "))
    }
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}

fn criterion_8() -> Outcome {
    let started = Instant::now();
    let synthetic = PlantedPartition {
        blocks: 200,
        size: 200,
        p_in: 0.045,
        p_out: 0.000026,
        seed: 8,
    };
    let edges = stream_of(&synthetic);
    let config = |kind| BenchConfig {
        batch_size: 10,
        batch_count: 9,
        algorithm: kind,
        seed: 8,
        density_sample: 0,
        ..BenchConfig::default()
    };
    let (base, batches) = make_batches(&edges, &config(MaintainerKind::Hit)).unwrap();
    let mut medians = Vec::new();
    for kind in [MaintainerKind::Hit, MaintainerKind::Static] {
        let run = run_batches(&base, &batches, &config(kind)).unwrap();
        let times: Vec<f64> = run.reports.iter().filter(|r| !r.warmup).map(|r| r.ms_total).collect();
        medians.push(median(times));
    }
    let elapsed = started.elapsed().as_secs_f64();
    let detail = format!(
        "{} edges: median step hit {:.3} ms, static {:.3} ms ({:.0}x); {:.1} s total",
        edges.len(),
        medians[0],
        medians[1],
        medians[1] / medians[0].max(1e-9),
        elapsed
    );
    if medians[0] * SPEEDUP <= medians[1] && elapsed < 600.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Community, sub, root and edge list of one level.
type LevelView = (Vec<Label>, Vec<Label>, Vec<Label>, Vec<(u32, u32, f64)>);

fn level_snapshot(state: &HitState) -> Vec<LevelView> {
    state
        .levels()
        .iter()
        .map(|l| {
            (
                l.community().assignment().to_vec(),
                l.sub().assignment().to_vec(),
                l.root().to_vec(),
                l.graph().edges(),
            )
        })
        .collect()
}

fn criterion_9() -> Outcome {
    let edges = stream_of(&parity_graph(9));
    let (base, batches) = make_batches(&edges, &parity_config(MaintainerKind::Hit, 9)).unwrap();
    let mut state = HitState::build(&base, 10, 1.0);
    for batch in batches.iter().take(3) {
        state.step(batch).unwrap();
    }
    let before = level_snapshot(&state);
    let out = state.step(&DeltaBatch::new()).unwrap();
    let unchanged = level_snapshot(&state) == before;
    let detail = format!(
        "levels unchanged: {unchanged}, CHANGED = {}, AFF = {}",
        out.stats.changed(),
        out.stats.affected()
    );
    if unchanged && out.stats.changed() == 0 && out.stats.affected() == 0 && out.changes.is_empty() {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_10() -> Outcome {
    let edges = stream_of(&parity_graph(10));
    let mut identical = 0;
    for kind in MaintainerKind::ALL {
        let config = BenchConfig {
            with_deletions: true,
            ..parity_config(kind, 10)
        };
        let render = || {
            let reports = run_benchmark(&edges, &config).unwrap();
            let mut buf = Vec::new();
            emit_report(&mut buf, &reports, ReportFormat::Csv).unwrap();
            buf
        };
        if render() == render() {
            identical += 1;
        }
    }
    let detail = format!("{identical}/3 algorithms produced byte-identical CSV across two runs");
    if identical == 3 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn main() {
    let runs = parity_runs();
    let sequences = sequence_runs();
    let results = [
        ("1 modularity parity", criterion_1(&runs)),
        ("2 subpartition gamma-density", criterion_2(&runs)),
        ("3 connectivity", criterion_3(&runs, &sequences)),
        ("4 gain oracle", criterion_4()),
        ("5 level consistency", criterion_5()),
        ("6 incremental vs scratch", criterion_6(&sequences)),
        ("7 golden examples", criterion_7()),
        ("8 desk-scale speed", criterion_8()),
        ("9 no-op stability", criterion_9()),
        ("10 determinism", criterion_10()),
    ];
    let mut failed = 0;
    for (name, result) in &results {
        match result {
            Ok(detail) => println!("criterion {name}: PASS ({detail})"),
            Err(detail) => {
                failed += 1;
                println!("criterion {name}: FAIL ({detail})");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
