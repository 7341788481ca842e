//! Connectivity index over intra-sub-community edges.
//!
//! Holds the subgraph of edges whose endpoints share a sub-community and a
//! component label per vertex. Insertions merge components by relabelling the
//! smaller one; deletions re-test connectivity with a bidirectional search
//! that stops as soon as either side runs out, so the cost is bounded by the
//! smaller piece.

use crate::graph::{Graph, VertexId, WEIGHT_EPSILON};
use crate::partition::{Label, Partition};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, VecDeque};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CcError {
    #[error("edge ({u}, {v}) is not in the index")]
    EdgeNotInIndex { u: VertexId, v: VertexId },
}

/// How to choose which of several equally large components keeps the
/// original sub-community id.
#[derive(Debug, Clone)]
pub enum TieBreak {
    SmallestVertex,
    Random(Box<ChaCha8Rng>),
}

/// A connected piece of a sub-community that was found split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitComponent {
    pub sub: Label,
    pub vertices: Vec<VertexId>,
    pub keeps_id: bool,
}

#[derive(Debug, Clone)]
pub struct CcIndex {
    adjacency: Vec<Vec<(VertexId, f64)>>,
    label: Vec<u32>,
    size: Vec<u32>,
    seen: [Vec<u32>; 2],
    epoch: u32,
    tie_break: TieBreak,
}

impl Default for CcIndex {
    fn default() -> Self {
        Self {
            adjacency: Vec::new(),
            label: Vec::new(),
            size: Vec::new(),
            seen: [Vec::new(), Vec::new()],
            epoch: 0,
            tie_break: TieBreak::SmallestVertex,
        }
    }
}

impl CcIndex {
    /// Indexes every edge of `g` whose endpoints share a label in `sub`.
    pub fn build(g: &Graph, sub: &[Label]) -> Self {
        let n = g.num_vertices();
        assert_eq!(sub.len(), n, "sub-community map must cover every vertex");
        let mut idx = Self {
            adjacency: (0..n as VertexId)
                .map(|v| {
                    g.neighbors(v)
                        .iter()
                        .filter(|&&(u, _)| sub[u as usize] == sub[v as usize])
                        .copied()
                        .collect()
                })
                .collect(),
            label: vec![u32::MAX; n],
            ..Self::default()
        };
        for v in 0..n as VertexId {
            if idx.label[v as usize] == u32::MAX {
                let l = idx.size.len() as u32;
                idx.size.push(0);
                let mut queue = VecDeque::from([v]);
                idx.label[v as usize] = l;
                while let Some(x) = queue.pop_front() {
                    idx.size[l as usize] += 1;
                    for &(y, _) in &idx.adjacency[x as usize] {
                        if idx.label[y as usize] == u32::MAX {
                            idx.label[y as usize] = l;
                            queue.push_back(y);
                        }
                    }
                }
            }
        }
        idx
    }

    /// Uses a seeded random choice among tied largest components.
    pub fn with_random_ties(mut self, seed: u64) -> Self {
        self.tie_break = TieBreak::Random(Box::new(ChaCha8Rng::seed_from_u64(seed)));
        self
    }

    pub fn num_vertices(&self) -> usize {
        self.adjacency.len()
    }

    /// Adds an isolated vertex with its own component.
    pub fn add_vertex(&mut self) -> VertexId {
        let v = self.adjacency.len() as VertexId;
        self.adjacency.push(Vec::new());
        let c = self.fresh_component(1);
        self.label.push(c);
        v
    }

    fn fresh_component(&mut self, size: u32) -> u32 {
        self.size.push(size);
        (self.size.len() - 1) as u32
    }

    pub fn component(&self, v: VertexId) -> u32 {
        self.label[v as usize]
    }

    pub fn component_size(&self, v: VertexId) -> usize {
        self.size[self.label[v as usize] as usize] as usize
    }

    pub fn connected(&self, u: VertexId, v: VertexId) -> bool {
        self.label[u as usize] == self.label[v as usize]
    }

    pub fn weight(&self, u: VertexId, v: VertexId) -> f64 {
        self.adjacency[u as usize]
            .iter()
            .find(|&&(x, _)| x == v)
            .map_or(0.0, |&(_, w)| w)
    }

    pub fn neighbors(&self, v: VertexId) -> &[(VertexId, f64)] {
        &self.adjacency[v as usize]
    }

    pub fn num_edges(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Applies a weight change to an intra-sub-community edge. Returns true
    /// exactly when a deletion removed the edge and disconnected its
    /// endpoints. Self-loops never affect connectivity.
    pub fn update_edge(&mut self, u: VertexId, v: VertexId, alpha: f64) -> Result<bool, CcError> {
        while self.adjacency.len() <= u.max(v) as usize {
            self.add_vertex();
        }
        if u == v {
            return Ok(false);
        }
        let current = self.weight(u, v);
        let next = current + alpha;
        let scale = current.abs().max(alpha.abs()).max(1.0);
        if alpha > 0.0 {
            if current == 0.0 {
                if !self.connected(u, v) {
                    self.merge_components(u, v);
                }
                self.adjacency[u as usize].push((v, alpha));
                self.adjacency[v as usize].push((u, alpha));
            } else {
                self.set_weight(u, v, next);
            }
            return Ok(false);
        }
        if current == 0.0 {
            return Err(CcError::EdgeNotInIndex { u, v });
        }
        if next > WEIGHT_EPSILON * scale {
            self.set_weight(u, v, next);
            return Ok(false);
        }
        self.unlink(u, v);
        Ok(self.resolve_split(u, v))
    }

    /// Removes the edge entirely if present. `None` when it was absent.
    pub fn remove_edge(&mut self, u: VertexId, v: VertexId) -> Option<bool> {
        if u == v || (u.max(v) as usize) >= self.adjacency.len() {
            return None;
        }
        let w = self.weight(u, v);
        if w == 0.0 {
            return None;
        }
        self.unlink(u, v);
        Some(self.resolve_split(u, v))
    }

    /// Deletes every index edge at `v`; returns the endpoints (including `v`)
    /// of deletions that split a component.
    pub fn isolate(&mut self, v: VertexId) -> Vec<VertexId> {
        let mut split = Vec::new();
        let incident: Vec<VertexId> = self.adjacency[v as usize].iter().map(|&(u, _)| u).collect();
        for u in incident {
            if self.remove_edge(v, u) == Some(true) {
                split.push(v);
                split.push(u);
            }
        }
        split
    }

    fn set_weight(&mut self, u: VertexId, v: VertexId, w: f64) {
        for (a, b) in [(u, v), (v, u)] {
            if let Some(e) = self.adjacency[a as usize].iter_mut().find(|(x, _)| *x == b) {
                e.1 = w;
            }
        }
    }

    fn unlink(&mut self, u: VertexId, v: VertexId) {
        for (a, b) in [(u, v), (v, u)] {
            let list = &mut self.adjacency[a as usize];
            if let Some(pos) = list.iter().position(|&(x, _)| x == b) {
                list.swap_remove(pos);
            }
        }
    }

    fn next_epoch(&mut self) -> u32 {
        let n = self.adjacency.len();
        for side in &mut self.seen {
            if side.len() < n {
                side.resize(n, 0);
            }
        }
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            for side in &mut self.seen {
                side.iter_mut().for_each(|x| *x = 0);
            }
            self.epoch = 1;
        }
        self.epoch
    }

    /// Relabels the smaller of the two components to the larger one's label.
    fn merge_components(&mut self, u: VertexId, v: VertexId) {
        let (lu, lv) = (self.label[u as usize], self.label[v as usize]);
        let (from_vertex, into) = if self.size[lu as usize] <= self.size[lv as usize] {
            (u, lv)
        } else {
            (v, lu)
        };
        let old = self.label[from_vertex as usize];
        let mut queue = VecDeque::from([from_vertex]);
        self.label[from_vertex as usize] = into;
        let mut moved = 0;
        while let Some(x) = queue.pop_front() {
            moved += 1;
            for i in 0..self.adjacency[x as usize].len() {
                let y = self.adjacency[x as usize][i].0;
                if self.label[y as usize] == old {
                    self.label[y as usize] = into;
                    queue.push_back(y);
                }
            }
        }
        self.size[into as usize] += moved;
        self.size[old as usize] -= moved;
    }

    /// After removing edge (u, v): searches from both ends alternately. If one
    /// side is exhausted without meeting the other, that side becomes a new
    /// component.
    fn resolve_split(&mut self, u: VertexId, v: VertexId) -> bool {
        let epoch = self.next_epoch();
        let mut frontier = [VecDeque::from([u]), VecDeque::from([v])];
        let mut visited: [Vec<VertexId>; 2] = [vec![u], vec![v]];
        self.seen[0][u as usize] = epoch;
        self.seen[1][v as usize] = epoch;
        loop {
            for side in 0..2 {
                let Some(x) = frontier[side].pop_front() else {
                    self.split_off(&visited[side]);
                    return true;
                };
                for i in 0..self.adjacency[x as usize].len() {
                    let y = self.adjacency[x as usize][i].0 as usize;
                    if self.seen[1 - side][y] == epoch {
                        return false;
                    }
                    if self.seen[side][y] != epoch {
                        self.seen[side][y] = epoch;
                        frontier[side].push_back(y as VertexId);
                        visited[side].push(y as VertexId);
                    }
                }
            }
        }
    }

    fn split_off(&mut self, vertices: &[VertexId]) {
        let old = self.label[vertices[0] as usize];
        let fresh = self.fresh_component(vertices.len() as u32);
        for &x in vertices {
            self.label[x as usize] = fresh;
        }
        self.size[old as usize] -= vertices.len() as u32;
    }

    /// Components of every sub-community containing a vertex of `touched`
    /// that is no longer connected. The largest piece keeps the id; ties go
    /// to the piece with the smallest vertex unless random ties are enabled.
    pub fn extract_split_components(&mut self, touched: &[VertexId], sub: &Partition) -> Vec<SplitComponent> {
        let mut subs: Vec<Label> = touched.iter().map(|&v| sub.label(v)).collect();
        subs.sort_unstable();
        subs.dedup();
        let mut out = Vec::new();
        for s in subs {
            let members = sub.members(s);
            let Some(&first) = members.first() else { continue };
            if self.component_size(first) == members.len() {
                continue;
            }
            let mut pieces: BTreeMap<u32, Vec<VertexId>> = BTreeMap::new();
            for &x in members {
                pieces.entry(self.label[x as usize]).or_default().push(x);
            }
            if pieces.len() < 2 {
                continue;
            }
            let mut pieces: Vec<Vec<VertexId>> = pieces
                .into_values()
                .map(|mut p| {
                    p.sort_unstable();
                    p
                })
                .collect();
            pieces.sort_by_key(|p| p[0]);
            let largest = pieces.iter().map(Vec::len).max().unwrap_or(0);
            let tied: Vec<usize> = (0..pieces.len()).filter(|&i| pieces[i].len() == largest).collect();
            let keeper = match &mut self.tie_break {
                TieBreak::SmallestVertex => tied[0],
                TieBreak::Random(rng) => tied[rng.random_range(0..tied.len())],
            };
            out.extend(pieces.into_iter().enumerate().map(|(i, vertices)| SplitComponent {
                sub: s,
                vertices,
                keeps_id: i == keeper,
            }));
        }
        out
    }

    /// Checks edges and labels against a from-scratch build over `(g, sub)`.
    pub fn check_against(&self, g: &Graph, sub: &[Label]) -> Result<(), String> {
        let fresh = CcIndex::build(g, sub);
        if fresh.num_vertices() != self.num_vertices() {
            return Err("vertex count differs".into());
        }
        for v in 0..self.num_vertices() as VertexId {
            let mut a: Vec<(VertexId, f64)> = self.adjacency[v as usize].clone();
            let mut b: Vec<(VertexId, f64)> = fresh.adjacency[v as usize].clone();
            a.sort_by_key(|e| e.0);
            b.sort_by_key(|e| e.0);
            if a.len() != b.len()
                || a.iter().zip(&b).any(|(x, y)| x.0 != y.0 || (x.1 - y.1).abs() > 1e-9 * x.1.max(1.0))
            {
                return Err(format!("index edges at {v} differ: {a:?} vs {b:?}"));
            }
        }
        let mut forward: BTreeMap<u32, u32> = BTreeMap::new();
        let mut backward: BTreeMap<u32, u32> = BTreeMap::new();
        for v in 0..self.num_vertices() {
            let (x, y) = (self.label[v], fresh.label[v]);
            if *forward.entry(x).or_insert(y) != y || *backward.entry(y).or_insert(x) != x {
                return Err(format!("component labels disagree at vertex {v}"));
            }
        }
        for (&x, &y) in &forward {
            if self.size[x as usize] != fresh.size[y as usize] {
                return Err(format!("component size of label {x} is stale"));
            }
        }
        Ok(())
    }
}
