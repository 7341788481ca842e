//! Dynamic community detection with hierarchical Leiden.
//!
//! [`hit::HitState`] maintains a multi-level Leiden hierarchy under batches of
//! edge insertions and deletions. [`leiden::run_leiden`] is the static
//! algorithm it starts from, and [`baselines`] holds the from-scratch and
//! naive-dynamic references it is measured against.

pub mod baselines;
pub mod bench;
pub mod cc_index;
pub mod graph;
pub mod hit;
pub mod leiden;
pub mod metrics;
pub mod partition;
pub mod stream;
pub mod synth;

pub use graph::{DeltaBatch, EdgeDelta, Graph, GraphError, VertexId};
pub use hit::{BatchStats, HitState};
pub use leiden::{run_leiden, Hierarchy, LeidenOutput};
pub use metrics::modularity;
pub use partition::{Label, Partition};
