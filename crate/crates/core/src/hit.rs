//! Incremental maintenance of the hierarchical Leiden state.
//!
//! Each batch is pushed up the hierarchy: at every level the delta is applied
//! to the supergraph, affected vertices are re-moved, split sub-communities
//! are re-assigned and singleton leftovers merged, and the resulting
//! superedge changes feed the level above. Memberships are then synchronized
//! top-down.

use crate::cc_index::CcIndex;
use crate::graph::{DeltaBatch, EdgeDelta, Graph, GraphError, VertexId};
use crate::leiden::{
    aggregate_graph, drain_move_queue, gain_tolerance, run_leiden, scaled_gain, HierarchySnapshot, LevelSnapshot,
    MoveQueue, PhaseTimings, Scratch,
};
use crate::partition::{Label, Partition};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HitError {
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// State of one hierarchy level.
#[derive(Debug, Clone)]
pub struct HitLevel {
    graph: Graph,
    /// `f^p`; labels are shared by all levels.
    community: Partition,
    /// `s_cur^p`; labels are vertex ids of the next level.
    sub: Partition,
    /// `s_pre^p`.
    sub_pre: Vec<Label>,
    /// `g^p`; labels are top-level sub-community ids.
    root: Vec<Label>,
    cc: CcIndex,
    queue: MoveQueue,
    scratch: Scratch,
}

impl HitLevel {
    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn community(&self) -> &Partition {
        &self.community
    }

    pub fn sub(&self) -> &Partition {
        &self.sub
    }

    pub fn sub_pre(&self) -> &[Label] {
        &self.sub_pre
    }

    pub fn root(&self) -> &[Label] {
        &self.root
    }

    pub fn cc(&self) -> &CcIndex {
        &self.cc
    }
}

/// Per-level counters for one step.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelStats {
    /// Distinct vertices touched by this level's edge changes.
    pub changed: usize,
    /// Vertices whose community or sub-community changed, plus new vertices.
    pub affected: usize,
    pub queue_pushes: usize,
    pub splits: usize,
    pub moved: usize,
    pub refined: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BatchStats {
    pub levels: Vec<LevelStats>,
    pub timings: PhaseTimings,
    pub total: std::time::Duration,
}

impl BatchStats {
    pub fn changed(&self) -> usize {
        self.levels.iter().map(|l| l.changed).sum()
    }

    pub fn affected(&self) -> usize {
        self.levels.iter().map(|l| l.affected).sum()
    }
}

/// One line of the change feed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ChangeRecord {
    Community {
        level: usize,
        vertex: VertexId,
        old_community: Option<Label>,
        new_community: Label,
    },
    Sub {
        level: usize,
        vertex: VertexId,
        old_sub: Option<Label>,
        new_sub: Label,
    },
}

#[derive(Debug, Clone, Default)]
pub struct StepOutput {
    pub stats: BatchStats,
    pub changes: Vec<ChangeRecord>,
    /// Compressed edge changes applied at each level; level 0 is the batch.
    pub deltas: Vec<Vec<EdgeDelta>>,
}

/// Old `(f, s)` of each vertex touched this step; `None` for new vertices.
type TouchLog = BTreeMap<VertexId, Option<(Label, Label)>>;

fn touch(log: &mut TouchLog, level: &HitLevel, v: VertexId) {
    log.entry(v)
        .or_insert_with(|| Some((level.community.label(v), level.sub.label(v))));
}

/// Vertex maps over a hierarchy, as seen by [`def_update`].
pub trait HierarchyMaps {
    fn depth(&self) -> usize;
    /// `s^level(v)`.
    fn parent(&self, level: usize, v: VertexId) -> Label;
    /// Vertices at `level` whose parent is `x`.
    fn children(&self, level: usize, x: VertexId) -> Vec<VertexId>;
    fn get(&self, level: usize, v: VertexId) -> Label;
    fn set(&mut self, level: usize, v: VertexId, value: Label);
}

/// What the top level's map is derived from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TopRule {
    /// Top-level values are authoritative (community maps).
    Keep,
    /// Top-level values equal the parent id (root maps).
    Parent,
}

/// Top-down synchronization: every vertex in `changed[p]` takes the value of
/// its parent at level `p + 1`, and its children join `changed[p - 1]`.
/// Returns the expanded changed sets.
pub fn def_update<M: HierarchyMaps>(maps: &mut M, changed: Vec<Vec<VertexId>>, top: TopRule) -> Vec<BTreeSet<VertexId>> {
    let depth = maps.depth();
    let mut sets: Vec<BTreeSet<VertexId>> = changed.into_iter().map(|c| c.into_iter().collect()).collect();
    sets.resize(depth, BTreeSet::new());
    for p in (0..depth).rev() {
        let current: Vec<VertexId> = sets[p].iter().copied().collect();
        for &v in &current {
            let parent = maps.parent(p, v);
            let value = if p + 1 < depth {
                maps.get(p + 1, parent)
            } else if top == TopRule::Parent {
                parent
            } else {
                continue;
            };
            if maps.get(p, v) != value {
                maps.set(p, v, value);
            }
        }
        if p > 0 {
            for &x in &current {
                let kids = maps.children(p - 1, x);
                sets[p - 1].extend(kids);
            }
        }
    }
    sets
}

/// Plain-vector hierarchy maps, for reference computations.
#[derive(Debug, Clone, PartialEq)]
pub struct VecMaps {
    pub values: Vec<Vec<Label>>,
    pub parents: Vec<Vec<Label>>,
}

impl HierarchyMaps for VecMaps {
    fn depth(&self) -> usize {
        self.values.len()
    }

    fn parent(&self, level: usize, v: VertexId) -> Label {
        self.parents[level][v as usize]
    }

    fn children(&self, level: usize, x: VertexId) -> Vec<VertexId> {
        self.parents[level]
            .iter()
            .enumerate()
            .filter(|&(_, &p)| p == x)
            .map(|(v, _)| v as VertexId)
            .collect()
    }

    fn get(&self, level: usize, v: VertexId) -> Label {
        self.values[level][v as usize]
    }

    fn set(&mut self, level: usize, v: VertexId, value: Label) {
        self.values[level][v as usize] = value;
    }
}

struct CommunityMaps<'a> {
    levels: &'a mut [HitLevel],
    logs: &'a mut [TouchLog],
}

impl HierarchyMaps for CommunityMaps<'_> {
    fn depth(&self) -> usize {
        self.levels.len()
    }

    fn parent(&self, level: usize, v: VertexId) -> Label {
        self.levels[level].sub.label(v)
    }

    fn children(&self, level: usize, x: VertexId) -> Vec<VertexId> {
        self.levels[level].sub.members(x).to_vec()
    }

    fn get(&self, level: usize, v: VertexId) -> Label {
        self.levels[level].community.label(v)
    }

    fn set(&mut self, level: usize, v: VertexId, value: Label) {
        let l = &mut self.levels[level];
        touch(&mut self.logs[level], l, v);
        let d = l.graph.degree(v);
        l.community.move_vertex(v, value, d);
    }
}

struct RootMaps<'a> {
    levels: &'a mut [HitLevel],
}

impl HierarchyMaps for RootMaps<'_> {
    fn depth(&self) -> usize {
        self.levels.len()
    }

    fn parent(&self, level: usize, v: VertexId) -> Label {
        self.levels[level].sub.label(v)
    }

    fn children(&self, level: usize, x: VertexId) -> Vec<VertexId> {
        self.levels[level].sub.members(x).to_vec()
    }

    fn get(&self, level: usize, v: VertexId) -> Label {
        self.levels[level].root[v as usize]
    }

    fn set(&mut self, level: usize, v: VertexId, value: Label) {
        self.levels[level].root[v as usize] = value;
    }
}

/// Sums entries per unordered pair and drops those that cancel.
pub fn compress_deltas(entries: &[EdgeDelta]) -> Vec<EdgeDelta> {
    let mut sums: BTreeMap<(VertexId, VertexId), (f64, f64)> = BTreeMap::new();
    for d in entries {
        let key = (d.u.min(d.v), d.u.max(d.v));
        let e = sums.entry(key).or_insert((0.0, 0.0));
        e.0 += d.alpha;
        e.1 += d.alpha.abs();
    }
    sums.into_iter()
        .filter(|&(_, (sum, mag))| sum.abs() > 1e-10 * mag.max(1e-300))
        .map(|((u, v), (sum, _))| EdgeDelta::new(u, v, sum))
        .collect()
}

/// Superedge changes caused by edge changes `deltas` (already applied to
/// `g`) and by the vertices in `moved` switching from `s_pre` to `s_cur`.
/// Synchronizes `s_pre` for the moved vertices and returns the compressed
/// changes.
pub fn inc_aggregation(
    g: &Graph,
    deltas: &[EdgeDelta],
    s_pre: &mut [Label],
    s_cur: &[Label],
    moved: &[VertexId],
) -> Vec<EdgeDelta> {
    let mut out = Vec::with_capacity(deltas.len() + 4 * moved.len());
    for d in deltas {
        out.push(EdgeDelta::new(s_pre[d.u as usize], s_pre[d.v as usize], d.alpha));
    }
    for &v in moved {
        let vi = v as usize;
        for &(u, w) in g.neighbors(v) {
            let ui = u as usize;
            if s_cur[ui] == s_pre[ui] || v < u {
                out.push(EdgeDelta::new(s_pre[vi], s_pre[ui], -w));
                out.push(EdgeDelta::new(s_cur[vi], s_cur[ui], w));
            }
        }
        let c = g.self_loop(v);
        if c > 0.0 {
            out.push(EdgeDelta::new(s_pre[vi], s_pre[vi], -c));
            out.push(EdgeDelta::new(s_cur[vi], s_cur[vi], c));
        }
    }
    for &v in moved {
        s_pre[v as usize] = s_cur[v as usize];
    }
    compress_deltas(&out)
}

/// The full persistent state of the incremental maintainer.
#[derive(Debug, Clone)]
pub struct HitState {
    levels: Vec<HitLevel>,
    gamma: f64,
    next_community: Label,
    next_top: Label,
}

impl HitState {
    /// Runs static Leiden and indexes every level. Community labels are
    /// synchronized top-down so that each vertex carries the community of its
    /// supervertex.
    pub fn build(g: &Graph, levels: usize, gamma: f64) -> Self {
        let out = run_leiden(g, None, levels, gamma);
        let depth = out.hierarchy.levels.len();
        let mut community: Vec<Vec<Label>> = vec![Vec::new(); depth];
        community[depth - 1] = out.hierarchy.levels[depth - 1].community.clone();
        for p in (0..depth - 1).rev() {
            let upper = &community[p + 1];
            community[p] = out.hierarchy.levels[p]
                .sub
                .iter()
                .map(|&x| upper[x as usize])
                .collect();
        }
        let next_community = community
            .iter()
            .flat_map(|c| c.iter())
            .map(|&c| c + 1)
            .max()
            .unwrap_or(0);
        let next_top = out.hierarchy.levels[depth - 1]
            .sub
            .iter()
            .map(|&x| x + 1)
            .max()
            .unwrap_or(0);
        let mut built = Vec::with_capacity(depth);
        for (p, level) in out.hierarchy.levels.into_iter().enumerate() {
            let g = level.graph;
            let cc = CcIndex::build(&g, &level.sub);
            built.push(HitLevel {
                community: Partition::from_assignment(&g, &community[p]),
                sub: Partition::from_assignment(&g, &level.sub),
                sub_pre: level.sub.clone(),
                root: Vec::new(),
                cc,
                queue: MoveQueue::default(),
                scratch: Scratch::default(),
                graph: g,
            });
        }
        for p in (0..depth).rev() {
            let root: Vec<Label> = if p + 1 == depth {
                built[p].sub.assignment().to_vec()
            } else {
                built[p].sub.assignment().iter().map(|&x| built[p + 1].root[x as usize]).collect()
            };
            built[p].root = root;
        }
        Self {
            levels: built,
            gamma,
            next_community,
            next_top,
        }
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn level(&self, p: usize) -> &HitLevel {
        &self.levels[p]
    }

    pub fn levels(&self) -> &[HitLevel] {
        &self.levels
    }

    /// The maintained base graph.
    pub fn graph(&self) -> &Graph {
        &self.levels[0].graph
    }

    /// Base-level membership `g^1`.
    pub fn membership(&self) -> &[Label] {
        &self.levels[0].root
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
                    community: l.community.assignment().to_vec(),
                    sub: l.sub.assignment().to_vec(),
                    edges: l.graph.edges(),
                })
                .collect(),
        }
    }

    /// Creates vertex chains from `level` to the top, all in `community`.
    /// Returns the new vertex id at `level`.
    fn spawn_chain(&mut self, level: usize, community: Label, logs: &mut [TouchLog]) -> VertexId {
        let parent = self.new_parent(level, community, logs);
        let root = if level + 1 == self.levels.len() {
            parent
        } else {
            self.levels[level + 1].root[parent as usize]
        };
        let l = &mut self.levels[level];
        let v = l.graph.add_vertex();
        l.community.push_vertex(community, 0.0);
        l.sub.push_vertex(parent, 0.0);
        l.sub_pre.push(parent);
        l.root.push(root);
        l.cc.add_vertex();
        logs[level].insert(v, None);
        v
    }

    /// A fresh next-level id for a new sub-community at `level`.
    fn new_parent(&mut self, level: usize, community: Label, logs: &mut [TouchLog]) -> Label {
        if level + 1 < self.levels.len() {
            self.spawn_chain(level + 1, community, logs)
        } else {
            let t = self.next_top;
            self.next_top += 1;
            t
        }
    }

    /// Applies `deltas` to level `p`'s graph, keeping aggregate degrees exact.
    fn apply_level_deltas(&mut self, p: usize, deltas: &[EdgeDelta]) -> Result<(), GraphError> {
        let l = &mut self.levels[p];
        for d in deltas {
            let (du, dv) = (l.graph.degree(d.u), l.graph.degree(d.v));
            l.graph.add_weight(d.u, d.v, d.alpha)?;
            let change_u = l.graph.degree(d.u) - du;
            l.community.add_degree(l.community.label(d.u), change_u);
            l.sub.add_degree(l.sub.label(d.u), change_u);
            if d.u != d.v {
                let change_v = l.graph.degree(d.v) - dv;
                l.community.add_degree(l.community.label(d.v), change_v);
                l.sub.add_degree(l.sub.label(d.v), change_v);
            }
        }
        Ok(())
    }

    /// Re-moves vertices affected by `deltas` (already applied) and by forced
    /// community changes from the level below. Returns the movers and the
    /// endpoints of index splits.
    fn inc_movement(
        &mut self,
        p: usize,
        deltas: &[EdgeDelta],
        forced: &BTreeMap<VertexId, Label>,
        log: &mut TouchLog,
        stats: &mut LevelStats,
    ) -> (Vec<VertexId>, Vec<VertexId>) {
        let gamma = self.gamma;
        let HitState {
            levels, next_community, ..
        } = self;
        let HitLevel {
            graph,
            community,
            sub,
            cc,
            queue,
            scratch,
            ..
        } = &mut levels[p];
        let mut moved = Vec::new();
        let mut split = Vec::new();
        let start = queue.pushes();
        for d in deltas {
            let (u, v) = (d.u, d.v);
            let same_community = community.label(u) == community.label(v);
            if (d.alpha > 0.0 && !same_community) || (d.alpha < 0.0 && same_community) {
                queue.push(u);
                queue.push(v);
            }
            if u != v && sub.label(u) == sub.label(v) {
                match cc.update_edge(u, v, d.alpha) {
                    Ok(true) => split.extend([u, v]),
                    Ok(false) => {}
                    Err(err) => debug_assert!(false, "index out of sync: {err}"),
                }
            }
        }
        for (&x, &target) in forced {
            if community.label(x) == target {
                continue;
            }
            log.entry(x).or_insert(Some((community.label(x), sub.label(x))));
            community.move_vertex(x, target, graph.degree(x));
            moved.push(x);
            split.extend(cc.isolate(x));
            queue.push(x);
            for &(u, _) in graph.neighbors(x) {
                if community.label(u) != target {
                    queue.push(u);
                }
            }
        }
        drain_move_queue(graph, community, gamma, queue, scratch, next_community, |v, old, _| {
            log.entry(v).or_insert(Some((old, sub.label(v))));
            moved.push(v);
            split.extend(cc.isolate(v));
        });
        stats.queue_pushes += queue.pushes() - start;
        moved.sort_unstable();
        moved.dedup();
        (moved, split)
    }

    /// Re-assigns split components and merges singleton leftovers, including
    /// movers that were already alone in their sub-community. Returns the
    /// vertices whose sub-community changed.
    fn inc_refinement(
        &mut self,
        p: usize,
        split: &[VertexId],
        moved: &[VertexId],
        logs: &mut [TouchLog],
        stats: &mut LevelStats,
    ) -> Vec<VertexId> {
        let pieces = {
            let l = &mut self.levels[p];
            l.cc.extract_split_components(split, &l.sub)
        };
        let mut refined: Vec<VertexId> = Vec::new();
        for piece in pieces.into_iter().filter(|c| !c.keeps_id) {
            stats.splits += 1;
            let c = self.levels[p].community.label(piece.vertices[0]);
            let fresh = self.new_parent(p, c, logs);
            let l = &mut self.levels[p];
            l.sub.ensure_label(fresh);
            for &v in &piece.vertices {
                touch(&mut logs[p], l, v);
                let d = l.graph.degree(v);
                l.sub.move_vertex(v, fresh, d);
                refined.push(v);
            }
        }
        let gamma = self.gamma;
        let l = &mut self.levels[p];
        let HitLevel {
            graph,
            community,
            sub,
            cc,
            scratch,
            ..
        } = l;
        refined.extend(moved.iter().copied().filter(|&v| sub.size(sub.label(v)) == 1));
        refined.sort_unstable();
        refined.dedup();
        refined.sort_by(|&a, &b| graph.degree(a).total_cmp(&graph.degree(b)).then(a.cmp(&b)));
        let two_m = 2.0 * graph.total_weight();
        if two_m > 0.0 {
            for &v in &refined {
                let own = sub.label(v);
                if sub.size(own) != 1 {
                    continue;
                }
                let c = community.label(v);
                let d_c = community.degree(c);
                let d_v = graph.degree(v);
                scratch.accumulate(graph, v, |u| (community.label(u) == c).then(|| sub.label(u)));
                let tol = gain_tolerance(two_m, gamma, d_v);
                let mut best: Option<(f64, Label)> = None;
                let mut candidates: Vec<Label> = scratch.touched().iter().copied().filter(|&s| s != own).collect();
                candidates.sort_unstable();
                for s in candidates {
                    let d_s = sub.degree(s);
                    let ext: f64 = sub
                        .members(s)
                        .iter()
                        .flat_map(|&x| graph.neighbors(x))
                        .filter(|&&(y, _)| community.label(y) == c && sub.label(y) != s)
                        .map(|&(_, w)| w)
                        .sum();
                    let rhs = gamma * d_s * (d_c - d_s);
                    if two_m * ext < rhs - 1e-12 * rhs.abs().max(two_m) {
                        continue;
                    }
                    let gain = scaled_gain(two_m, gamma, d_v, 0.0, d_v, scratch.weight(s), d_s);
                    if best.is_none_or(|(b, _)| gain > b + tol) {
                        best = Some((gain, s));
                    }
                }
                scratch.clear();
                if let Some((gain, target)) = best {
                    if gain > tol {
                        log_touch(&mut logs[p], community, sub, v);
                        sub.move_vertex(v, target, d_v);
                        for &(u, w) in graph.neighbors(v) {
                            if sub.label(u) == target {
                                let _ = cc.update_edge(v, u, w);
                            }
                        }
                    }
                }
            }
        }
        let sub_pre = &l.sub_pre;
        let sub = &l.sub;
        refined.retain(|&v| sub_pre[v as usize] != sub.label(v));
        refined.sort_unstable();
        refined.dedup();
        refined
    }

    /// Processes one batch through every level and synchronizes memberships.
    pub fn step(&mut self, batch: &DeltaBatch) -> Result<StepOutput, HitError> {
        let started = Instant::now();
        self.levels[0].graph.validate_delta(batch)?;
        let depth = self.levels.len();
        let mut logs: Vec<TouchLog> = vec![TouchLog::new(); depth];
        let mut stats = BatchStats {
            levels: vec![LevelStats::default(); depth],
            ..Default::default()
        };
        if let Some(max) = batch.max_vertex() {
            while self.levels[0].graph.num_vertices() <= max as usize {
                let c = self.next_community;
                self.next_community += 1;
                self.spawn_chain(0, c, &mut logs);
            }
        }
        let mut deltas: Vec<EdgeDelta> = batch.deltas.clone();
        let mut forced: BTreeMap<VertexId, Label> = BTreeMap::new();
        let mut movers: Vec<Vec<VertexId>> = Vec::with_capacity(depth);
        let mut refined_sets: Vec<Vec<VertexId>> = Vec::with_capacity(depth);
        let mut level_deltas: Vec<Vec<EdgeDelta>> = Vec::with_capacity(depth);
        for p in 0..depth {
            let mut level_stats = LevelStats {
                changed: crate::metrics::distinct_endpoints(deltas.iter().map(|d| (d.u, d.v))),
                ..Default::default()
            };
            let t = Instant::now();
            self.apply_level_deltas(p, &deltas)?;
            level_deltas.push(deltas.clone());
            let (moved, split) = self.inc_movement(p, &deltas, &forced, &mut logs[p], &mut level_stats);
            stats.timings.movement += t.elapsed();

            let t = Instant::now();
            let refined = self.inc_refinement(p, &split, &moved, &mut logs, &mut level_stats);
            stats.timings.refinement += t.elapsed();

            let t = Instant::now();
            forced.clear();
            if p + 1 < depth {
                let (lower, upper) = self.levels.split_at_mut(p + 1);
                let l = &lower[p];
                for &v in &moved {
                    let x = l.sub.label(v);
                    let want = l.community.label(v);
                    if upper[0].community.label(x) != want {
                        forced.insert(x, want);
                    }
                }
                let l = &mut lower[p];
                deltas = inc_aggregation(&l.graph, &deltas, &mut l.sub_pre, l.sub.assignment(), &refined);
            } else {
                let l = &mut self.levels[p];
                for &v in &refined {
                    l.sub_pre[v as usize] = l.sub.label(v);
                }
                deltas.clear();
            }
            stats.timings.aggregation += t.elapsed();
            level_stats.moved = moved.len();
            level_stats.refined = refined.len();
            stats.levels[p] = level_stats;
            movers.push(moved);
            refined_sets.push(refined);
        }
        def_update(
            &mut CommunityMaps {
                levels: &mut self.levels,
                logs: &mut logs,
            },
            movers,
            TopRule::Keep,
        );
        def_update(&mut RootMaps { levels: &mut self.levels }, refined_sets, TopRule::Parent);

        let mut changes = Vec::new();
        for (p, log) in logs.iter().enumerate() {
            let l = &self.levels[p];
            let mut affected = 0;
            for (&v, old) in log {
                let (f, s) = (l.community.label(v), l.sub.label(v));
                let (old_f, old_s) = match old {
                    Some((of, os)) => (Some(*of), Some(*os)),
                    None => (None, None),
                };
                if old_f != Some(f) {
                    changes.push(ChangeRecord::Community {
                        level: p + 1,
                        vertex: v,
                        old_community: old_f,
                        new_community: f,
                    });
                }
                if old_s != Some(s) {
                    changes.push(ChangeRecord::Sub {
                        level: p + 1,
                        vertex: v,
                        old_sub: old_s,
                        new_sub: s,
                    });
                }
                if old_f != Some(f) || old_s != Some(s) {
                    affected += 1;
                }
            }
            stats.levels[p].affected = affected;
        }
        stats.total = started.elapsed();
        Ok(StepOutput {
            stats,
            changes,
            deltas: level_deltas,
        })
    }

    /// Verifies every structural invariant against from-scratch
    /// recomputation.
    pub fn check_consistency(&self) -> Result<(), String> {
        let depth = self.levels.len();
        for (p, l) in self.levels.iter().enumerate() {
            let tag = |msg: String| format!("level {}: {msg}", p + 1);
            let n = l.graph.num_vertices();
            if l.community.len() != n || l.sub.len() != n || l.sub_pre.len() != n || l.root.len() != n {
                return Err(tag("map sizes differ from vertex count".into()));
            }
            let (degrees, _) = l.graph.recomputed_degrees();
            for (v, (&a, &b)) in degrees.iter().zip(l.graph.degrees()).enumerate() {
                if (a - b).abs() > 1e-9 * a.abs().max(1.0) {
                    return Err(tag(format!("cached degree of {v} is stale")));
                }
            }
            l.community.check_consistency(l.graph.degrees(), 1e-8).map_err(tag)?;
            l.sub.check_consistency(l.graph.degrees(), 1e-8).map_err(tag)?;
            if l.sub.assignment() != l.sub_pre.as_slice() {
                return Err(tag("previous and current sub-community maps differ".into()));
            }
            l.cc.check_against(&l.graph, l.sub.assignment()).map_err(tag)?;
            for x in l.sub.labels() {
                let members = l.sub.members(x);
                if l.cc.component_size(members[0]) != members.len() {
                    return Err(tag(format!("sub-community {x} is not one component")));
                }
                let c = l.community.label(members[0]);
                if members.iter().any(|&v| l.community.label(v) != c) {
                    return Err(tag(format!("sub-community {x} spans communities")));
                }
            }
            if p + 1 < depth {
                let upper = &self.levels[p + 1];
                let m = upper.graph.num_vertices();
                if l.sub.label_capacity() > m {
                    return Err(tag("sub-community id beyond next level".into()));
                }
                for v in 0..n as VertexId {
                    let x = l.sub.label(v);
                    if upper.community.label(x) != l.community.label(v) {
                        return Err(tag(format!("community of {v} differs from its supervertex")));
                    }
                    if upper.root[x as usize] != l.root[v as usize] {
                        return Err(tag(format!("root of {v} differs from its supervertex")));
                    }
                }
                let rebuilt = aggregate_graph(&l.graph, l.sub.assignment(), m);
                if !rebuilt.approx_eq(&upper.graph, 1e-9) {
                    return Err(tag("supergraph differs from aggregation of this level".into()));
                }
            } else {
                for v in 0..n {
                    if l.root[v] != l.sub.label(v as VertexId) {
                        return Err(tag(format!("top-level root of {v} is stale")));
                    }
                }
            }
        }
        Ok(())
    }
}

fn log_touch(log: &mut TouchLog, community: &Partition, sub: &Partition, v: VertexId) {
    log.entry(v).or_insert_with(|| Some((community.label(v), sub.label(v))));
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::same_partition;

    fn two_triangles() -> Graph {
        Graph::from_edges(
            6,
            [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0), (3, 4, 1.0), (4, 5, 1.0), (3, 5, 1.0), (2, 3, 1.0)],
        )
        .unwrap()
    }

    #[test]
    fn build_matches_static() {
        let g = two_triangles();
        let state = HitState::build(&g, 3, 1.0);
        state.check_consistency().unwrap();
        let fresh = run_leiden(&g, None, 3, 1.0);
        assert!(same_partition(state.membership(), &fresh.membership));
    }

    #[test]
    fn empty_graph_state() {
        let state = HitState::build(&Graph::new(), 2, 1.0);
        state.check_consistency().unwrap();
        assert!(state.membership().is_empty());
    }

    #[test]
    fn empty_batch_is_a_no_op() {
        let g = two_triangles();
        let mut state = HitState::build(&g, 3, 1.0);
        let before = state.membership().to_vec();
        let out = state.step(&DeltaBatch::new()).unwrap();
        assert_eq!(state.membership(), before.as_slice());
        assert_eq!(out.stats.changed(), 0);
        assert_eq!(out.stats.affected(), 0);
        assert!(out.changes.is_empty());
    }

    #[test]
    fn new_vertices_join() {
        let g = two_triangles();
        let mut state = HitState::build(&g, 3, 1.0);
        let batch: DeltaBatch = vec![EdgeDelta::insert(6, 0, 1.0), EdgeDelta::insert(6, 1, 1.0)].into();
        state.step(&batch).unwrap();
        state.check_consistency().unwrap();
        let m = state.membership();
        assert_eq!(m.len(), 7);
        assert_eq!(m[6], m[0]);
    }

    #[test]
    fn compression_drops_cancelled_pairs() {
        let out = compress_deltas(&[
            EdgeDelta::new(2, 1, 1.0),
            EdgeDelta::new(1, 2, -1.0),
            EdgeDelta::new(3, 3, 2.0),
            EdgeDelta::new(3, 3, 0.5),
        ]);
        assert_eq!(out, vec![EdgeDelta::new(3, 3, 2.5)]);
    }

    #[test]
    fn def_update_matches_recomputation() {
        // Three levels: 6 -> 3 -> 2 vertices, top ids 0..2.
        let parents = vec![vec![0, 0, 1, 1, 2, 2], vec![0, 0, 1], vec![7, 8]];
        let mut maps = VecMaps {
            values: vec![vec![0; 6], vec![0; 3], vec![7, 8]],
            parents: parents.clone(),
        };
        def_update(&mut maps, vec![vec![], vec![], vec![0, 1]], TopRule::Parent);
        assert_eq!(maps.values[1], vec![7, 7, 8]);
        assert_eq!(maps.values[0], vec![7, 7, 7, 7, 8, 8]);
        let mut maps = VecMaps {
            values: vec![vec![0; 6], vec![0; 3], vec![7, 8]],
            parents,
        };
        def_update(&mut maps, vec![vec![], vec![], vec![]], TopRule::Parent);
        assert_eq!(maps.values[0], vec![0; 6]);
    }
}
