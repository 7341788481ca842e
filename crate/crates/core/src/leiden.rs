//! Static Leiden over a fixed number of hierarchy levels.
//!
//! Each level runs movement to a fixpoint, a deterministic greedy refinement
//! and (except at the last level) aggregation of sub-communities into
//! supervertices. The base-level membership is read through the composed
//! sub-community maps.

use crate::graph::{Graph, VertexId};
use crate::metrics::MoveTarget;
use crate::partition::{normalize_labels, Label, Partition};
use serde::{Deserialize, Serialize};
use std::collections::{HashMap, VecDeque};
use std::time::{Duration, Instant};

/// Relative slack on scaled gains, to keep float noise from creating moves.
const GAIN_EPSILON: f64 = 1e-12;

/// Neighbor weights grouped by label, reused across vertices.
#[derive(Debug, Clone, Default)]
pub(crate) struct Scratch {
    weight: Vec<f64>,
    touched: Vec<Label>,
}

impl Scratch {
    pub(crate) fn accumulate<F: Fn(VertexId) -> Option<Label>>(&mut self, g: &Graph, v: VertexId, label_of: F) {
        for &(u, w) in g.neighbors(v) {
            if let Some(l) = label_of(u) {
                let i = l as usize;
                if i >= self.weight.len() {
                    self.weight.resize((i + 1).max(self.weight.len() * 2), 0.0);
                }
                if self.weight[i] == 0.0 {
                    self.touched.push(l);
                }
                self.weight[i] += w;
            }
        }
    }

    pub(crate) fn weight(&self, l: Label) -> f64 {
        self.weight.get(l as usize).copied().unwrap_or(0.0)
    }

    pub(crate) fn touched(&self) -> &[Label] {
        &self.touched
    }

    pub(crate) fn clear(&mut self) {
        for &l in &self.touched {
            self.weight[l as usize] = 0.0;
        }
        self.touched.clear();
    }
}

/// FIFO work queue with membership flags.
#[derive(Debug, Clone, Default)]
pub(crate) struct MoveQueue {
    queue: VecDeque<VertexId>,
    queued: Vec<bool>,
    pushes: usize,
}

impl MoveQueue {
    pub(crate) fn push(&mut self, v: VertexId) -> bool {
        let i = v as usize;
        if i >= self.queued.len() {
            self.queued.resize(i + 1, false);
        }
        if self.queued[i] {
            return false;
        }
        self.queued[i] = true;
        self.pushes += 1;
        self.queue.push_back(v);
        true
    }

    /// Successful pushes since creation.
    pub(crate) fn pushes(&self) -> usize {
        self.pushes
    }

    pub(crate) fn pop(&mut self) -> Option<VertexId> {
        let v = self.queue.pop_front()?;
        self.queued[v as usize] = false;
        Some(v)
    }
}

/// Scaled gain `(2m)^2 * dQ` of moving a vertex of degree `d_v` from a
/// community with degree `d_from` (including the vertex) and weight `w_from`
/// to one with `d_to`, `w_to`.
pub(crate) fn scaled_gain(two_m: f64, gamma: f64, d_v: f64, w_from: f64, d_from: f64, w_to: f64, d_to: f64) -> f64 {
    two_m * (w_to - w_from) + gamma * d_v * (d_from - d_v - d_to)
}

pub(crate) fn gain_tolerance(two_m: f64, gamma: f64, d_v: f64) -> f64 {
    GAIN_EPSILON * d_v.max(1.0) * two_m * (1.0 + gamma)
}

/// Best positive-gain destination for `v`, ties to the smallest label and the
/// empty community losing ties.
pub(crate) fn best_move(g: &Graph, part: &Partition, v: VertexId, gamma: f64, scratch: &mut Scratch) -> Option<MoveTarget> {
    let two_m = 2.0 * g.total_weight();
    let d_v = g.degree(v);
    if two_m <= 0.0 || d_v <= 0.0 {
        return None;
    }
    scratch.accumulate(g, v, |u| Some(part.label(u)));
    let current = part.label(v);
    let w_from = scratch.weight(current);
    let d_from = part.degree(current);
    let tol = gain_tolerance(two_m, gamma, d_v);
    let mut best: Option<(f64, Label)> = None;
    for &c in scratch.touched() {
        if c == current {
            continue;
        }
        let gain = scaled_gain(two_m, gamma, d_v, w_from, d_from, scratch.weight(c), part.degree(c));
        best = match best {
            None => Some((gain, c)),
            Some((b, bc)) if gain > b + tol || ((gain - b).abs() <= tol && c < bc) => Some((gain, c)),
            keep => keep,
        };
    }
    scratch.clear();
    let empty_gain = scaled_gain(two_m, gamma, d_v, w_from, d_from, 0.0, 0.0);
    let choice = match best {
        Some((b, c)) if b + tol >= empty_gain => (b, MoveTarget::Community(c)),
        _ => (empty_gain, MoveTarget::Empty),
    };
    (choice.0 > tol).then_some(choice.1)
}

/// Processes `queue` until empty, moving each popped vertex to its best
/// community. `on_move` sees every accepted move as `(v, old, new)`.
pub(crate) fn drain_move_queue<F: FnMut(VertexId, Label, Label)>(
    g: &Graph,
    part: &mut Partition,
    gamma: f64,
    queue: &mut MoveQueue,
    scratch: &mut Scratch,
    next_label: &mut Label,
    mut on_move: F,
) {
    while let Some(v) = queue.pop() {
        let Some(target) = best_move(g, part, v, gamma, scratch) else {
            continue;
        };
        let new = match target {
            MoveTarget::Community(c) => c,
            MoveTarget::Empty => {
                let l = *next_label;
                *next_label += 1;
                l
            }
        };
        let old = part.label(v);
        part.move_vertex(v, new, g.degree(v));
        on_move(v, old, new);
        for &(u, _) in g.neighbors(v) {
            if part.label(u) != new {
                queue.push(u);
            }
        }
    }
}

/// Movement to a fixpoint: every vertex starts queued in ascending order and
/// full sweeps re-queue any vertex left with a positive gain. Returns the
/// vertices whose community changed.
pub fn move_phase(g: &Graph, part: &mut Partition, gamma: f64) -> Vec<VertexId> {
    let n = g.num_vertices();
    let mut queue = MoveQueue::default();
    let mut scratch = Scratch::default();
    let mut next_label = part.fresh_label().max(n as Label);
    let original: Vec<Label> = part.assignment().to_vec();
    for v in 0..n as VertexId {
        queue.push(v);
    }
    loop {
        drain_move_queue(g, part, gamma, &mut queue, &mut scratch, &mut next_label, |_, _, _| {});
        let mut again = false;
        for v in 0..n as VertexId {
            if best_move(g, part, v, gamma, &mut scratch).is_some() {
                queue.push(v);
                again = true;
            }
        }
        if !again {
            break;
        }
    }
    (0..n as VertexId)
        .filter(|&v| part.label(v) != original[v as usize])
        .collect()
}

/// Greedy refinement within fixed communities. Vertices are visited by
/// ascending degree then id; a vertex that is still alone merges into the
/// neighboring sub-community of its own community with the best positive
/// gain, among those that are locally optimized. Returns sub-community labels
/// (a vertex id of some member).
pub fn refine_phase(g: &Graph, community: &Partition, gamma: f64) -> Vec<Label> {
    let n = g.num_vertices();
    let mut sub: Vec<Label> = (0..n as Label).collect();
    let two_m = 2.0 * g.total_weight();
    if two_m <= 0.0 {
        return sub;
    }
    let mut sub_degree: Vec<f64> = g.degrees().to_vec();
    let mut sub_size = vec![1u32; n];
    let mut ext: Vec<f64> = (0..n as VertexId)
        .map(|v| {
            let c = community.label(v);
            g.neighbors(v)
                .iter()
                .filter(|&&(u, _)| community.label(u) == c)
                .map(|&(_, w)| w)
                .sum()
        })
        .collect();
    let mut order: Vec<VertexId> = (0..n as VertexId).collect();
    order.sort_by(|&a, &b| g.degree(a).total_cmp(&g.degree(b)).then(a.cmp(&b)));
    let mut scratch = Scratch::default();
    for v in order {
        if sub_size[sub[v as usize] as usize] != 1 {
            continue;
        }
        let c = community.label(v);
        let d_c = community.degree(c);
        let d_v = g.degree(v);
        scratch.accumulate(g, v, |u| (community.label(u) == c).then(|| sub[u as usize]));
        let own = sub[v as usize];
        let tol = gain_tolerance(two_m, gamma, d_v);
        let mut best: Option<(f64, Label)> = None;
        for &s in scratch.touched() {
            if s == own {
                continue;
            }
            let d_s = sub_degree[s as usize];
            let rhs = gamma * d_s * (d_c - d_s);
            if two_m * ext[s as usize] < rhs - GAIN_EPSILON * rhs.abs().max(two_m) {
                continue;
            }
            let gain = scaled_gain(two_m, gamma, d_v, 0.0, d_v, scratch.weight(s), d_s);
            best = match best {
                None => Some((gain, s)),
                Some((b, bs)) if gain > b + tol || ((gain - b).abs() <= tol && s < bs) => Some((gain, s)),
                keep => keep,
            };
        }
        if let Some((gain, s)) = best {
            if gain > tol {
                let w_vs = scratch.weight(s);
                ext[s as usize] += ext[own as usize] - 2.0 * w_vs;
                sub_degree[s as usize] += d_v;
                sub_degree[own as usize] = 0.0;
                sub_size[s as usize] += 1;
                sub_size[own as usize] = 0;
                sub[v as usize] = s;
            }
        }
        scratch.clear();
    }
    sub
}

/// Collapses each sub-community into a supervertex. Returns the supergraph,
/// the supervertex community labels (the smallest supervertex id of each
/// community) and the dense vertex-to-supervertex map.
pub fn aggregate_phase(g: &Graph, community: &[Label], sub: &[Label]) -> (Graph, Vec<Label>, Vec<Label>) {
    let dense = normalize_labels(sub);
    let k = dense.iter().map(|&x| x as usize + 1).max().unwrap_or(0);
    let supergraph = aggregate_graph(g, &dense, k);
    let mut super_comm = vec![0; k];
    for (v, &x) in dense.iter().enumerate() {
        super_comm[x as usize] = community[v];
    }
    let mut first: HashMap<Label, Label> = HashMap::new();
    let labels = super_comm
        .iter()
        .enumerate()
        .map(|(x, &c)| *first.entry(c).or_insert(x as Label))
        .collect();
    (supergraph, labels, dense)
}

/// The graph on `k` supervertices induced by `map` (vertex to supervertex).
pub fn aggregate_graph(g: &Graph, map: &[Label], k: usize) -> Graph {
    let mut weights: HashMap<(Label, Label), f64> = HashMap::new();
    for (u, v, w) in g.edges() {
        let (a, b) = (map[u as usize], map[v as usize]);
        *weights.entry((a.min(b), a.max(b))).or_insert(0.0) += w;
    }
    let mut edges: Vec<((Label, Label), f64)> = weights.into_iter().filter(|&(_, w)| w > 0.0).collect();
    edges.sort_by_key(|&(k, _)| k);
    Graph::from_edges(k, edges.into_iter().map(|((a, b), w)| (a, b, w))).expect("positive weights")
}

/// One level of the hierarchy.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelState {
    pub graph: Graph,
    /// Community of each vertex after this level's movement.
    pub community: Vec<Label>,
    /// Supervertex (next-level vertex id) of each vertex.
    pub sub: Vec<Label>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hierarchy {
    pub levels: Vec<LevelState>,
    pub gamma: f64,
}

impl Hierarchy {
    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    /// `g^p`: the top-level sub-community of every vertex at level `p`
    /// (zero-based).
    pub fn root_map(&self, level: usize) -> Vec<Label> {
        let mut map = self.levels[level].sub.clone();
        for upper in &self.levels[level + 1..] {
            for x in map.iter_mut() {
                *x = upper.sub[*x as usize];
            }
        }
        map
    }

    /// Base-level membership through the composed sub-community maps.
    pub fn membership(&self) -> Vec<Label> {
        if self.levels.is_empty() {
            return Vec::new();
        }
        self.root_map(0)
    }

    pub fn snapshot(&self) -> HierarchySnapshot {
        HierarchySnapshot {
            gamma: self.gamma,
            levels: self
                .levels
                .iter()
                .enumerate()
                .map(|(p, l)| LevelSnapshot {
                    level: p + 1,
                    community: l.community.clone(),
                    sub: l.sub.clone(),
                    edges: l.graph.edges(),
                })
                .collect(),
        }
    }
}

/// Serializable view of a hierarchy: per level `f`, `s` and edge list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchySnapshot {
    pub gamma: f64,
    pub levels: Vec<LevelSnapshot>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSnapshot {
    pub level: usize,
    pub community: Vec<Label>,
    pub sub: Vec<Label>,
    pub edges: Vec<(VertexId, VertexId, f64)>,
}

/// Accumulated wall time per phase.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseTimings {
    pub movement: Duration,
    pub refinement: Duration,
    pub aggregation: Duration,
}

impl PhaseTimings {
    pub fn total(&self) -> Duration {
        self.movement + self.refinement + self.aggregation
    }

    pub fn add(&mut self, other: &PhaseTimings) {
        self.movement += other.movement;
        self.refinement += other.refinement;
        self.aggregation += other.aggregation;
    }
}

#[derive(Debug, Clone)]
pub struct LeidenOutput {
    pub membership: Vec<Label>,
    pub hierarchy: Hierarchy,
    pub timings: PhaseTimings,
}

/// Runs `levels` iterations of movement, refinement and aggregation starting
/// from `initial` (singletons when `None`).
///
/// Once a refinement leaves every vertex alone, the remaining levels would
/// repeat it exactly, so they are filled in by copying.
pub fn run_leiden(g: &Graph, initial: Option<&[Label]>, levels: usize, gamma: f64) -> LeidenOutput {
    assert!(levels >= 1, "at least one level is required");
    let n = g.num_vertices();
    let start: Vec<Label> = match initial {
        Some(f) => {
            assert_eq!(f.len(), n, "initial membership must cover every vertex");
            normalize_labels(f)
        }
        None => (0..n as Label).collect(),
    };
    let mut timings = PhaseTimings::default();
    let mut out: Vec<LevelState> = Vec::with_capacity(levels);
    let mut graph = g.clone();
    let mut community = start;
    for p in 0..levels {
        let t = Instant::now();
        let mut part = Partition::from_assignment(&graph, &community);
        move_phase(&graph, &mut part, gamma);
        timings.movement += t.elapsed();

        let t = Instant::now();
        let sub = refine_phase(&graph, &part, gamma);
        timings.refinement += t.elapsed();
        let community_now = part.assignment().to_vec();

        if p + 1 == levels {
            out.push(LevelState {
                sub: normalize_labels(&sub),
                graph,
                community: community_now,
            });
            break;
        }
        let t = Instant::now();
        let (next_graph, next_community, dense) = aggregate_phase(&graph, &community_now, &sub);
        timings.aggregation += t.elapsed();
        let settled = next_graph.num_vertices() == graph.num_vertices();
        out.push(LevelState {
            graph,
            community: community_now,
            sub: dense,
        });
        if settled {
            while out.len() < levels {
                out.push(LevelState {
                    graph: next_graph.clone(),
                    community: next_community.clone(),
                    sub: (0..next_graph.num_vertices() as Label).collect(),
                });
            }
            break;
        }
        graph = next_graph;
        community = next_community;
    }
    let hierarchy = Hierarchy { levels: out, gamma };
    LeidenOutput {
        membership: hierarchy.membership(),
        hierarchy,
        timings,
    }
}
