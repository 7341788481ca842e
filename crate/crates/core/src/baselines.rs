//! Reference maintainers and the interface shared with the incremental one.
//!
//! `Static` reruns Leiden from singletons after every batch. `NaiveDynamic`
//! reruns it starting from the previous membership.

use crate::graph::{DeltaBatch, Graph, GraphError};
use crate::hit::{ChangeRecord, HitError, HitState};
use crate::leiden::{run_leiden, Hierarchy, HierarchySnapshot, LeidenOutput, PhaseTimings};
use crate::metrics::distinct_endpoints;
use crate::partition::{normalize_labels, Label};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MaintainerKind {
    #[serde(rename = "static")]
    Static,
    #[serde(rename = "nd")]
    NaiveDynamic,
    #[serde(rename = "hit")]
    Hit,
}

impl MaintainerKind {
    pub const ALL: [MaintainerKind; 3] = [MaintainerKind::Static, MaintainerKind::NaiveDynamic, MaintainerKind::Hit];

    pub fn name(self) -> &'static str {
        match self {
            MaintainerKind::Static => "static",
            MaintainerKind::NaiveDynamic => "nd",
            MaintainerKind::Hit => "hit",
        }
    }
}

impl fmt::Display for MaintainerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MaintainerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "static" | "st" => Ok(MaintainerKind::Static),
            "nd" | "naive" => Ok(MaintainerKind::NaiveDynamic),
            "hit" => Ok(MaintainerKind::Hit),
            other => Err(format!("unknown algorithm {other:?} (expected static, nd or hit)")),
        }
    }
}

/// Applies `batch` and reruns Leiden from singletons.
pub fn st_leiden_step(g: &mut Graph, batch: &DeltaBatch, levels: usize, gamma: f64) -> Result<LeidenOutput, GraphError> {
    g.apply_delta(batch)?;
    Ok(run_leiden(g, None, levels, gamma))
}

/// Applies `batch` and reruns Leiden from `prev`; vertices new to the graph
/// start as singletons.
pub fn nd_leiden_step(
    prev: &[Label],
    g: &mut Graph,
    batch: &DeltaBatch,
    levels: usize,
    gamma: f64,
) -> Result<LeidenOutput, GraphError> {
    g.apply_delta(batch)?;
    let mut start = normalize_labels(prev);
    let mut next = start.iter().map(|&l| l + 1).max().unwrap_or(0);
    while start.len() < g.num_vertices() {
        start.push(next);
        next += 1;
    }
    Ok(run_leiden(g, Some(&start), levels, gamma))
}

/// What one maintainer step cost and touched.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepReport {
    pub timings: PhaseTimings,
    pub total: Duration,
    /// Per level: vertices involved in that level's edge changes.
    pub changed: Vec<usize>,
    /// Per level: vertices whose state the step changed or processed.
    pub affected: Vec<usize>,
    pub changes: Vec<ChangeRecord>,
}

/// A community maintainer driven batch by batch.
pub trait CommunityMaintainer {
    fn kind(&self) -> MaintainerKind;
    fn graph(&self) -> &Graph;
    fn membership(&self) -> &[Label];
    /// The hierarchy behind the current membership.
    fn snapshot(&self) -> HierarchySnapshot;
    fn step(&mut self, batch: &DeltaBatch) -> Result<StepReport, HitError>;
}

/// Rerun-from-scratch maintainer, either from singletons or warm-started.
#[derive(Debug, Clone)]
pub struct RerunMaintainer {
    kind: MaintainerKind,
    graph: Graph,
    membership: Vec<Label>,
    hierarchy: Hierarchy,
    levels: usize,
    gamma: f64,
}

impl RerunMaintainer {
    pub fn new(kind: MaintainerKind, g: &Graph, levels: usize, gamma: f64) -> Self {
        assert!(kind != MaintainerKind::Hit, "the incremental maintainer is HitMaintainer");
        let out = run_leiden(g, None, levels, gamma);
        Self {
            kind,
            membership: out.membership,
            hierarchy: out.hierarchy,
            graph: g.clone(),
            levels,
            gamma,
        }
    }
}

impl CommunityMaintainer for RerunMaintainer {
    fn kind(&self) -> MaintainerKind {
        self.kind
    }

    fn graph(&self) -> &Graph {
        &self.graph
    }

    fn membership(&self) -> &[Label] {
        &self.membership
    }

    fn snapshot(&self) -> HierarchySnapshot {
        self.hierarchy.snapshot()
    }

    fn step(&mut self, batch: &DeltaBatch) -> Result<StepReport, HitError> {
        let started = Instant::now();
        let out = match self.kind {
            MaintainerKind::Static => st_leiden_step(&mut self.graph, batch, self.levels, self.gamma)?,
            _ => nd_leiden_step(&self.membership, &mut self.graph, batch, self.levels, self.gamma)?,
        };
        let total = started.elapsed();
        let changed = distinct_endpoints(batch.iter().map(|d| (d.u, d.v)));
        let affected = out.hierarchy.levels.iter().map(|l| l.graph.num_vertices()).collect();
        self.membership = out.membership;
        self.hierarchy = out.hierarchy;
        Ok(StepReport {
            timings: out.timings,
            total,
            changed: vec![changed],
            affected,
            changes: Vec::new(),
        })
    }
}

#[derive(Debug, Clone)]
pub struct HitMaintainer {
    state: HitState,
}

impl HitMaintainer {
    pub fn new(g: &Graph, levels: usize, gamma: f64) -> Self {
        Self {
            state: HitState::build(g, levels, gamma),
        }
    }

    pub fn state(&self) -> &HitState {
        &self.state
    }
}

impl CommunityMaintainer for HitMaintainer {
    fn kind(&self) -> MaintainerKind {
        MaintainerKind::Hit
    }

    fn graph(&self) -> &Graph {
        self.state.graph()
    }

    fn membership(&self) -> &[Label] {
        self.state.membership()
    }

    fn snapshot(&self) -> HierarchySnapshot {
        self.state.snapshot()
    }

    fn step(&mut self, batch: &DeltaBatch) -> Result<StepReport, HitError> {
        let out = self.state.step(batch)?;
        Ok(StepReport {
            timings: out.stats.timings,
            total: out.stats.total,
            changed: out.stats.levels.iter().map(|l| l.changed).collect(),
            affected: out.stats.levels.iter().map(|l| l.affected).collect(),
            changes: out.changes,
        })
    }
}

pub fn new_maintainer(kind: MaintainerKind, g: &Graph, levels: usize, gamma: f64) -> Box<dyn CommunityMaintainer + Send> {
    match kind {
        MaintainerKind::Hit => Box::new(HitMaintainer::new(g, levels, gamma)),
        other => Box::new(RerunMaintainer::new(other, g, levels, gamma)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::EdgeDelta;
    use crate::partition::same_partition;

    fn two_triangles() -> Graph {
        Graph::from_edges(
            6,
            [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0), (3, 4, 1.0), (4, 5, 1.0), (3, 5, 1.0), (2, 3, 1.0)],
        )
        .unwrap()
    }

    #[test]
    fn static_empty_batch_equals_fresh_run() {
        let mut g = two_triangles();
        let out = st_leiden_step(&mut g, &DeltaBatch::new(), 5, 1.0).unwrap();
        assert_eq!(out.membership, run_leiden(&g, None, 5, 1.0).membership);
    }

    #[test]
    fn nd_from_singletons_equals_static() {
        let g0 = two_triangles();
        let batch: DeltaBatch = vec![EdgeDelta::insert(0, 4, 1.0)].into();
        let (mut a, mut b) = (g0.clone(), g0.clone());
        let st = st_leiden_step(&mut a, &batch, 5, 1.0).unwrap();
        let singletons: Vec<Label> = (0..6).collect();
        let nd = nd_leiden_step(&singletons, &mut b, &batch, 5, 1.0).unwrap();
        assert_eq!(st.membership, nd.membership);
    }

    #[test]
    fn nd_fixpoint_on_empty_batch() {
        let mut g = two_triangles();
        let prev = run_leiden(&g, None, 5, 1.0).membership;
        let out = nd_leiden_step(&prev, &mut g, &DeltaBatch::new(), 5, 1.0).unwrap();
        assert!(same_partition(&out.membership, &prev));
    }

    #[test]
    fn nd_handles_new_vertices() {
        let mut g = two_triangles();
        let prev = run_leiden(&g, None, 5, 1.0).membership;
        let batch: DeltaBatch = vec![EdgeDelta::insert(6, 0, 1.0), EdgeDelta::insert(6, 1, 1.0)].into();
        let out = nd_leiden_step(&prev, &mut g, &batch, 5, 1.0).unwrap();
        assert_eq!(out.membership.len(), 7);
        assert_eq!(out.membership[6], out.membership[0]);
    }

    #[test]
    fn kinds_parse() {
        for k in MaintainerKind::ALL {
            assert_eq!(k.name().parse::<MaintainerKind>().unwrap(), k);
        }
        assert!("ds".parse::<MaintainerKind>().is_err());
    }

    #[test]
    fn maintainers_agree_on_graph() {
        let g = two_triangles();
        let batch: DeltaBatch = vec![EdgeDelta::insert(0, 5, 2.0), EdgeDelta::delete(2, 3, 1.0)].into();
        for kind in MaintainerKind::ALL {
            let mut m = new_maintainer(kind, &g, 4, 1.0);
            let report = m.step(&batch).unwrap();
            assert!(!report.changed.is_empty());
            assert!(m.graph().approx_eq(&g.applied(&batch).unwrap(), 1e-12));
            assert_eq!(m.membership().len(), 6);
        }
    }
}
