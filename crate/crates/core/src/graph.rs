//! Weighted undirected multigraph with self-loops and signed edge deltas.
//!
//! Degrees and the total weight `m` are cached and maintained under every
//! mutation. A self-loop of stored weight `c` contributes `2c` to the degree
//! of its vertex and `c` to `m`, so that `m == sum(degrees) / 2` always holds
//! and modularity is invariant under aggregation.

use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use thiserror::Error;

/// Dense vertex identifier.
pub type VertexId = u32;

/// Relative tolerance under which an edge weight is treated as exactly zero.
pub const WEIGHT_EPSILON: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("deletion of {amount} from edge ({u}, {v}) exceeds its weight {weight}")]
    DeletionExceedsWeight {
        u: VertexId,
        v: VertexId,
        weight: f64,
        amount: f64,
    },
    #[error("unknown vertex {0}")]
    UnknownVertex(VertexId),
    #[error("edge delta ({u}, {v}) has zero or non-finite weight change")]
    InvalidDelta { u: VertexId, v: VertexId },
}

/// A signed weight change on one undirected edge. `alpha > 0` inserts,
/// `alpha < 0` deletes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeDelta {
    pub u: VertexId,
    pub v: VertexId,
    pub alpha: f64,
}

impl EdgeDelta {
    pub fn new(u: VertexId, v: VertexId, alpha: f64) -> Self {
        Self { u, v, alpha }
    }

    pub fn insert(u: VertexId, v: VertexId, weight: f64) -> Self {
        Self::new(u, v, weight)
    }

    pub fn delete(u: VertexId, v: VertexId, weight: f64) -> Self {
        Self::new(u, v, -weight)
    }

    pub fn is_insertion(&self) -> bool {
        self.alpha > 0.0
    }

    pub fn is_self_loop(&self) -> bool {
        self.u == self.v
    }

    pub fn inverse(&self) -> Self {
        Self::new(self.u, self.v, -self.alpha)
    }
}

/// An ordered list of edge deltas, applied sequentially.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DeltaBatch {
    pub deltas: Vec<EdgeDelta>,
}

impl DeltaBatch {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, delta: EdgeDelta) {
        self.deltas.push(delta);
    }

    pub fn len(&self) -> usize {
        self.deltas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.deltas.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, EdgeDelta> {
        self.deltas.iter()
    }

    /// The batch that undoes this one when applied afterwards.
    pub fn inverse(&self) -> Self {
        Self {
            deltas: self.deltas.iter().rev().map(EdgeDelta::inverse).collect(),
        }
    }

    /// Largest vertex id referenced, if any.
    pub fn max_vertex(&self) -> Option<VertexId> {
        self.deltas.iter().map(|d| d.u.max(d.v)).max()
    }
}

impl From<Vec<EdgeDelta>> for DeltaBatch {
    fn from(deltas: Vec<EdgeDelta>) -> Self {
        Self { deltas }
    }
}

impl FromIterator<EdgeDelta> for DeltaBatch {
    fn from_iter<I: IntoIterator<Item = EdgeDelta>>(iter: I) -> Self {
        Self {
            deltas: iter.into_iter().collect(),
        }
    }
}

impl<'a> IntoIterator for &'a DeltaBatch {
    type Item = &'a EdgeDelta;
    type IntoIter = std::slice::Iter<'a, EdgeDelta>;

    fn into_iter(self) -> Self::IntoIter {
        self.deltas.iter()
    }
}

/// Weighted undirected graph over dense vertex ids `0..n`.
///
/// Neighbor lists exclude self-loops, which are kept separately.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Graph {
    adjacency: Vec<Vec<(VertexId, f64)>>,
    self_loops: Vec<f64>,
    degrees: Vec<f64>,
    total_weight: f64,
}

fn is_zero(value: f64, scale: f64) -> bool {
    value.abs() <= WEIGHT_EPSILON * scale.max(1.0)
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_vertices(n: usize) -> Self {
        let mut g = Self::default();
        g.ensure_vertex_count(n);
        g
    }

    /// Builds a graph from `(u, v, w)` triples; duplicate pairs accumulate.
    pub fn from_edges<I>(n: usize, edges: I) -> Result<Self, GraphError>
    where
        I: IntoIterator<Item = (VertexId, VertexId, f64)>,
    {
        let mut g = Self::with_vertices(n);
        for (u, v, w) in edges {
            g.add_weight(u, v, w)?;
        }
        Ok(g)
    }

    pub fn num_vertices(&self) -> usize {
        self.adjacency.len()
    }

    pub fn num_edges(&self) -> usize {
        let links: usize = self.adjacency.iter().map(Vec::len).sum();
        links / 2 + self.self_loops.iter().filter(|&&c| c > 0.0).count()
    }

    /// Total edge weight `m`.
    pub fn total_weight(&self) -> f64 {
        self.total_weight
    }

    pub fn degree(&self, v: VertexId) -> f64 {
        self.degrees[v as usize]
    }

    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    pub fn self_loop(&self, v: VertexId) -> f64 {
        self.self_loops[v as usize]
    }

    pub fn contains(&self, v: VertexId) -> bool {
        (v as usize) < self.adjacency.len()
    }

    /// Neighbors of `v` other than `v` itself, with edge weights.
    pub fn neighbors(&self, v: VertexId) -> &[(VertexId, f64)] {
        &self.adjacency[v as usize]
    }

    pub fn weight(&self, u: VertexId, v: VertexId) -> f64 {
        if !self.contains(u) || !self.contains(v) {
            return 0.0;
        }
        if u == v {
            return self.self_loops[u as usize];
        }
        let (a, b) = if self.adjacency[u as usize].len() <= self.adjacency[v as usize].len() {
            (u, v)
        } else {
            (v, u)
        };
        self.adjacency[a as usize]
            .iter()
            .find(|&&(x, _)| x == b)
            .map_or(0.0, |&(_, w)| w)
    }

    /// Grows the vertex set so that ids `0..n` exist.
    pub fn ensure_vertex_count(&mut self, n: usize) {
        if n > self.adjacency.len() {
            self.adjacency.resize_with(n, Vec::new);
            self.self_loops.resize(n, 0.0);
            self.degrees.resize(n, 0.0);
        }
    }

    pub fn add_vertex(&mut self) -> VertexId {
        let v = self.adjacency.len() as VertexId;
        self.ensure_vertex_count(v as usize + 1);
        v
    }

    /// Adds `alpha` to the weight of edge `(u, v)`, creating missing vertices.
    /// A weight that reaches zero removes the edge.
    pub fn add_weight(&mut self, u: VertexId, v: VertexId, alpha: f64) -> Result<(), GraphError> {
        if alpha == 0.0 || !alpha.is_finite() {
            return Err(GraphError::InvalidDelta { u, v });
        }
        self.ensure_vertex_count(u.max(v) as usize + 1);
        if u == v {
            let current = self.self_loops[u as usize];
            let next = current + alpha;
            let scale = current.abs().max(alpha.abs());
            let next = if is_zero(next, scale) {
                0.0
            } else if next < 0.0 {
                return Err(GraphError::DeletionExceedsWeight {
                    u,
                    v,
                    weight: current,
                    amount: -alpha,
                });
            } else {
                next
            };
            let change = next - current;
            self.self_loops[u as usize] = next;
            self.degrees[u as usize] += 2.0 * change;
            self.total_weight += change;
            return Ok(());
        }

        let current = self.weight(u, v);
        let next = current + alpha;
        let scale = current.abs().max(alpha.abs());
        if is_zero(next, scale) {
            if current == 0.0 {
                return Err(GraphError::DeletionExceedsWeight {
                    u,
                    v,
                    weight: current,
                    amount: -alpha,
                });
            }
            self.remove_link(u, v);
            self.remove_link(v, u);
            self.degrees[u as usize] -= current;
            self.degrees[v as usize] -= current;
            self.total_weight -= current;
            return Ok(());
        }
        if next < 0.0 {
            return Err(GraphError::DeletionExceedsWeight {
                u,
                v,
                weight: current,
                amount: -alpha,
            });
        }
        self.set_link(u, v, next);
        self.set_link(v, u, next);
        self.degrees[u as usize] += alpha;
        self.degrees[v as usize] += alpha;
        self.total_weight += alpha;
        Ok(())
    }

    fn set_link(&mut self, from: VertexId, to: VertexId, weight: f64) {
        let list = &mut self.adjacency[from as usize];
        match list.iter_mut().find(|(x, _)| *x == to) {
            Some(entry) => entry.1 = weight,
            None => list.push((to, weight)),
        }
    }

    fn remove_link(&mut self, from: VertexId, to: VertexId) {
        let list = &mut self.adjacency[from as usize];
        if let Some(pos) = list.iter().position(|&(x, _)| x == to) {
            list.swap_remove(pos);
        }
    }

    /// Applies a batch in order. On error the graph is left unchanged.
    pub fn apply_delta(&mut self, batch: &DeltaBatch) -> Result<(), GraphError> {
        self.validate_delta(batch)?;
        for delta in batch {
            self.add_weight(delta.u, delta.v, delta.alpha)
                .expect("validated delta applies");
        }
        Ok(())
    }

    /// Returns a copy with the batch applied.
    pub fn applied(&self, batch: &DeltaBatch) -> Result<Graph, GraphError> {
        let mut g = self.clone();
        g.apply_delta(batch)?;
        Ok(g)
    }

    /// Checks that a batch would apply cleanly without mutating the graph.
    pub fn validate_delta(&self, batch: &DeltaBatch) -> Result<(), GraphError> {
        let mut pending: HashMap<(VertexId, VertexId), f64> = HashMap::new();
        for d in batch {
            if d.alpha == 0.0 || !d.alpha.is_finite() {
                return Err(GraphError::InvalidDelta { u: d.u, v: d.v });
            }
            let key = (d.u.min(d.v), d.u.max(d.v));
            let current = *pending.entry(key).or_insert_with(|| self.weight(d.u, d.v));
            let next = current + d.alpha;
            let scale = current.abs().max(d.alpha.abs());
            if is_zero(next, scale) {
                if current == 0.0 {
                    return Err(GraphError::DeletionExceedsWeight {
                        u: d.u,
                        v: d.v,
                        weight: current,
                        amount: -d.alpha,
                    });
                }
                pending.insert(key, 0.0);
            } else if next < 0.0 {
                return Err(GraphError::DeletionExceedsWeight {
                    u: d.u,
                    v: d.v,
                    weight: current,
                    amount: -d.alpha,
                });
            } else {
                pending.insert(key, next);
            }
        }
        Ok(())
    }

    /// `w(v, S)`: weight from `v` into `set`, counting `v`'s self-loop twice
    /// when `v` itself is in the set.
    pub fn weight_to_set<F>(&self, v: VertexId, in_set: F) -> Result<f64, GraphError>
    where
        F: Fn(VertexId) -> bool,
    {
        if !self.contains(v) {
            return Err(GraphError::UnknownVertex(v));
        }
        let mut total: f64 = self
            .neighbors(v)
            .iter()
            .filter(|&&(u, _)| in_set(u))
            .map(|&(_, w)| w)
            .sum();
        if in_set(v) {
            total += 2.0 * self.self_loop(v);
        }
        Ok(total)
    }

    /// All edges as `(u, v, w)` with `u <= v`, sorted.
    pub fn edges(&self) -> Vec<(VertexId, VertexId, f64)> {
        let mut out = Vec::with_capacity(self.num_edges());
        for (u, list) in self.adjacency.iter().enumerate() {
            let u = u as VertexId;
            if self.self_loops[u as usize] > 0.0 {
                out.push((u, u, self.self_loops[u as usize]));
            }
            out.extend(list.iter().filter(|&&(v, _)| u < v).map(|&(v, w)| (u, v, w)));
        }
        out.sort_by_key(|&(u, v, _)| (u, v));
        out
    }

    /// Degrees and `m` recomputed from the adjacency lists.
    pub fn recomputed_degrees(&self) -> (Vec<f64>, f64) {
        let degrees: Vec<f64> = (0..self.num_vertices())
            .map(|v| {
                self.adjacency[v].iter().map(|&(_, w)| w).sum::<f64>() + 2.0 * self.self_loops[v]
            })
            .collect();
        let m = degrees.iter().sum::<f64>() / 2.0;
        (degrees, m)
    }

    /// Recomputes cached degrees and total weight from scratch.
    pub fn refresh_degrees(&mut self) {
        let (degrees, m) = self.recomputed_degrees();
        self.degrees = degrees;
        self.total_weight = m;
    }

    /// True when both graphs hold the same vertices and edge weights within
    /// `tolerance` (relative to the larger weight).
    pub fn approx_eq(&self, other: &Graph, tolerance: f64) -> bool {
        if self.num_vertices() != other.num_vertices() {
            return false;
        }
        let a = self.edges();
        let b = other.edges();
        a.len() == b.len()
            && a.iter().zip(&b).all(|(x, y)| {
                x.0 == y.0 && x.1 == y.1 && (x.2 - y.2).abs() <= tolerance * x.2.abs().max(y.2.abs()).max(1.0)
            })
    }
}
