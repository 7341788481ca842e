//! Vertex-to-label mappings with reverse index and per-label degree sums.
//!
//! Used both for community maps `f` and for sub-community maps `s`. Labels
//! index directly into the reverse index, so they should stay reasonably
//! dense; fresh labels come from [`Partition::fresh_label`].

use crate::graph::{Graph, VertexId};
use serde::{Deserialize, Serialize};

/// Community or sub-community label.
pub type Label = u32;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    assignment: Vec<Label>,
    position: Vec<u32>,
    members: Vec<Vec<VertexId>>,
    degree: Vec<f64>,
    nonempty: usize,
}

impl Partition {
    /// Builds a partition from a label per vertex, with degrees from `g`.
    pub fn from_assignment(g: &Graph, assignment: &[Label]) -> Self {
        assert_eq!(assignment.len(), g.num_vertices(), "assignment must cover every vertex");
        Self::with_degrees(assignment, g.degrees())
    }

    pub fn with_degrees(assignment: &[Label], degrees: &[f64]) -> Self {
        let mut p = Self::default();
        for (v, &label) in assignment.iter().enumerate() {
            p.push_vertex(label, degrees.get(v).copied().unwrap_or(0.0));
        }
        p
    }

    /// Every vertex in its own community, labelled by its id.
    pub fn singletons(g: &Graph) -> Self {
        let labels: Vec<Label> = (0..g.num_vertices() as Label).collect();
        Self::from_assignment(g, &labels)
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn label(&self, v: VertexId) -> Label {
        self.assignment[v as usize]
    }

    pub fn assignment(&self) -> &[Label] {
        &self.assignment
    }

    /// Members of `label`, in no particular order. Empty for unused labels.
    pub fn members(&self, label: Label) -> &[VertexId] {
        self.members.get(label as usize).map_or(&[], Vec::as_slice)
    }

    pub fn size(&self, label: Label) -> usize {
        self.members(label).len()
    }

    /// Aggregate degree `d(C)`.
    pub fn degree(&self, label: Label) -> f64 {
        self.degree.get(label as usize).copied().unwrap_or(0.0)
    }

    pub fn contains_label(&self, label: Label) -> bool {
        self.size(label) > 0
    }

    /// Number of non-empty labels.
    pub fn num_communities(&self) -> usize {
        self.nonempty
    }

    /// Exclusive upper bound on labels that have ever been used.
    pub fn label_capacity(&self) -> usize {
        self.members.len()
    }

    /// The smallest label that has never been allocated.
    pub fn fresh_label(&self) -> Label {
        self.members.len() as Label
    }

    /// Non-empty labels in ascending order.
    pub fn labels(&self) -> impl Iterator<Item = Label> + '_ {
        self.members
            .iter()
            .enumerate()
            .filter(|(_, m)| !m.is_empty())
            .map(|(l, _)| l as Label)
    }

    /// Non-empty communities as sorted member lists, ordered by label.
    pub fn communities(&self) -> Vec<Vec<VertexId>> {
        self.labels()
            .map(|l| {
                let mut m = self.members(l).to_vec();
                m.sort_unstable();
                m
            })
            .collect()
    }

    /// Makes sure `label` has a slot in the reverse index.
    pub fn ensure_label(&mut self, label: Label) {
        let need = label as usize + 1;
        if self.members.len() < need {
            self.members.resize_with(need, Vec::new);
            self.degree.resize(need, 0.0);
        }
    }

    /// Appends vertex `len()` with the given label and degree.
    pub fn push_vertex(&mut self, label: Label, degree: f64) -> VertexId {
        let v = self.assignment.len() as VertexId;
        self.ensure_label(label);
        let list = &mut self.members[label as usize];
        if list.is_empty() {
            self.nonempty += 1;
        }
        self.position.push(list.len() as u32);
        list.push(v);
        self.assignment.push(label);
        self.degree[label as usize] += degree;
        v
    }

    /// Moves `v` (whose degree is `degree`) to `label`.
    pub fn move_vertex(&mut self, v: VertexId, label: Label, degree: f64) {
        let old = self.assignment[v as usize];
        if old == label {
            return;
        }
        self.ensure_label(label);
        let pos = self.position[v as usize] as usize;
        let list = &mut self.members[old as usize];
        list.swap_remove(pos);
        if let Some(&moved) = list.get(pos) {
            self.position[moved as usize] = pos as u32;
        }
        if list.is_empty() {
            self.nonempty -= 1;
            self.degree[old as usize] = 0.0;
        } else {
            self.degree[old as usize] -= degree;
        }
        let list = &mut self.members[label as usize];
        if list.is_empty() {
            self.nonempty += 1;
        }
        self.position[v as usize] = list.len() as u32;
        list.push(v);
        self.assignment[v as usize] = label;
        self.degree[label as usize] += degree;
    }

    /// Adjusts `d(label)` after a degree change of one of its members.
    pub fn add_degree(&mut self, label: Label, delta: f64) {
        self.ensure_label(label);
        self.degree[label as usize] += delta;
    }

    /// Checks the forward/reverse index and degree sums against `degrees`.
    pub fn check_consistency(&self, degrees: &[f64], tolerance: f64) -> Result<(), String> {
        if degrees.len() != self.assignment.len() {
            return Err(format!(
                "partition covers {} vertices, graph has {}",
                self.assignment.len(),
                degrees.len()
            ));
        }
        let mut sums = vec![0.0; self.members.len()];
        for (v, &l) in self.assignment.iter().enumerate() {
            let pos = self.position[v] as usize;
            if self.members[l as usize].get(pos) != Some(&(v as VertexId)) {
                return Err(format!("vertex {v} missing from reverse index of {l}"));
            }
            sums[l as usize] += degrees[v];
        }
        let listed: usize = self.members.iter().map(Vec::len).sum();
        if listed != self.assignment.len() {
            return Err("reverse index lists extra vertices".into());
        }
        for (l, (&have, &want)) in self.degree.iter().zip(&sums).enumerate() {
            if (have - want).abs() > tolerance * want.abs().max(1.0) {
                return Err(format!("degree of label {l} is {have}, expected {want}"));
            }
        }
        let nonempty = self.members.iter().filter(|m| !m.is_empty()).count();
        if nonempty != self.nonempty {
            return Err("non-empty label count is stale".into());
        }
        Ok(())
    }
}

/// Renumbers labels densely in order of first appearance.
pub fn normalize_labels(labels: &[Label]) -> Vec<Label> {
    let mut map = std::collections::HashMap::new();
    labels
        .iter()
        .map(|&l| {
            let next = map.len() as Label;
            *map.entry(l).or_insert(next)
        })
        .collect()
}

/// Communities of a label vector as sorted member lists, sorted by first member.
pub fn groups(labels: &[Label]) -> Vec<Vec<VertexId>> {
    let dense = normalize_labels(labels);
    let count = dense.iter().map(|&l| l as usize + 1).max().unwrap_or(0);
    let mut out = vec![Vec::new(); count];
    for (v, &l) in dense.iter().enumerate() {
        out[l as usize].push(v as VertexId);
    }
    out
}

/// True when two label vectors describe the same partition up to renaming.
pub fn same_partition(a: &[Label], b: &[Label]) -> bool {
    a.len() == b.len() && normalize_labels(a) == normalize_labels(b)
}
