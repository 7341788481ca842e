//! Sliding-window benchmark: build a base graph from the first part of an
//! edge stream, replay the rest in batches and report quality and cost per
//! batch.

use crate::baselines::{new_maintainer, CommunityMaintainer, MaintainerKind, StepReport};
use crate::graph::{DeltaBatch, EdgeDelta, Graph};
use crate::hit::{ChangeRecord, HitError};
use crate::leiden::HierarchySnapshot;
use crate::metrics::{check_connectivity, modularity, verify_communities, DensityBudget};
use crate::partition::Label;
use crate::stream::StreamEdge;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::io::Write;
use thiserror::Error;

/// Batches flagged as warm-up at the start of every run.
pub const WARMUP_BATCHES: usize = 2;

pub const CSV_COLUMNS: [&str; 12] = [
    "batch",
    "algorithm",
    "modularity",
    "communities",
    "pct_connected",
    "pct_gamma_dense",
    "ms_movement",
    "ms_refinement",
    "ms_aggregation",
    "ms_total",
    "changed",
    "aff",
];

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("stream has {available} edges, needs {needed} for the base graph and batches")]
    NotEnoughEdges { available: usize, needed: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Step(#[from] HitError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub initial_fraction: f64,
    pub batch_size: usize,
    pub batch_count: usize,
    pub gamma: f64,
    pub levels: usize,
    pub algorithm: MaintainerKind,
    pub seed: u64,
    /// Shuffle streams without timestamps; timestamped streams are sorted.
    pub shuffle: bool,
    /// Each batch also deletes the oldest `batch_size` live edges.
    pub with_deletions: bool,
    /// Communities checked for gamma-density per batch.
    pub density_sample: usize,
    /// Record phase timings; when off all `ms_*` columns are zero, which
    /// makes reports byte-identical across runs.
    pub timings: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            initial_fraction: 0.8,
            batch_size: 100,
            batch_count: 9,
            gamma: 1.0,
            levels: 10,
            algorithm: MaintainerKind::Hit,
            seed: 0,
            shuffle: true,
            with_deletions: false,
            density_sample: 500,
            timings: true,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: &str| Err(BenchError::InvalidConfig(m.to_owned()));
        if !(self.initial_fraction > 0.0 && self.initial_fraction < 1.0) {
            return bad("initial fraction must be in (0, 1)");
        }
        if self.batch_size == 0 || self.batch_count == 0 {
            return bad("batch size and count must be at least 1");
        }
        if self.levels == 0 {
            return bad("at least one level is required");
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return bad("gamma must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchReport {
    /// 1-based batch number.
    pub batch: usize,
    pub algorithm: MaintainerKind,
    pub warmup: bool,
    pub modularity: f64,
    pub communities: usize,
    pub pct_connected: f64,
    pub pct_gamma_dense: f64,
    pub ms_movement: f64,
    pub ms_refinement: f64,
    pub ms_aggregation: f64,
    pub ms_total: f64,
    pub changed: usize,
    pub aff: usize,
    pub changed_per_level: Vec<usize>,
    pub aff_per_level: Vec<usize>,
}

/// Orders the stream and splits it into the base graph and the batches.
pub fn make_batches(edges: &[StreamEdge], cfg: &BenchConfig) -> Result<(Graph, Vec<DeltaBatch>), BenchError> {
    cfg.validate()?;
    let mut order: Vec<StreamEdge> = edges.to_vec();
    if !order.is_empty() && order.iter().all(|e| e.timestamp.is_some()) {
        order.sort_by(|a, b| a.timestamp.unwrap().total_cmp(&b.timestamp.unwrap()));
    } else if cfg.shuffle {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed));
    }
    let base_len = (cfg.initial_fraction * order.len() as f64).floor() as usize;
    let needed = base_len + cfg.batch_size * cfg.batch_count;
    if order.is_empty() || base_len == 0 || needed > order.len() {
        return Err(BenchError::NotEnoughEdges {
            available: order.len(),
            needed: needed.max(1),
        });
    }
    let n = order[..base_len].iter().map(|e| e.v as usize + 1).max().unwrap_or(0);
    let base = Graph::from_edges(n, order[..base_len].iter().map(|e| (e.u, e.v, e.weight)))
        .map_err(|e| BenchError::InvalidConfig(e.to_string()))?;
    let mut batches = Vec::with_capacity(cfg.batch_count);
    for i in 0..cfg.batch_count {
        let start = base_len + i * cfg.batch_size;
        let mut batch: DeltaBatch = order[start..start + cfg.batch_size]
            .iter()
            .filter(|e| e.weight > 0.0)
            .map(|e| EdgeDelta::insert(e.u, e.v, e.weight))
            .collect();
        if cfg.with_deletions {
            let oldest = i * cfg.batch_size;
            for e in &order[oldest..oldest + cfg.batch_size] {
                if e.weight > 0.0 {
                    batch.push(EdgeDelta::delete(e.u, e.v, e.weight));
                }
            }
        }
        batches.push(batch);
    }
    Ok((base, batches))
}

fn millis(d: std::time::Duration, on: bool) -> f64 {
    if on {
        d.as_secs_f64() * 1e3
    } else {
        0.0
    }
}

/// Quality and cost of the maintainer's state after one step.
pub fn batch_report(
    batch: usize,
    maintainer: &dyn CommunityMaintainer,
    step: &StepReport,
    cfg: &BenchConfig,
) -> BatchReport {
    let g = maintainer.graph();
    let membership: &[Label] = maintainer.membership();
    let q = modularity(g, membership, cfg.gamma).unwrap_or(0.0);
    let connectivity = check_connectivity(g, membership);
    let communities = connectivity.len();
    let connected = connectivity.iter().filter(|r| r.connected).count();
    let budget = DensityBudget {
        seed: cfg.seed ^ batch as u64,
        ..DensityBudget::default()
    };
    let density = verify_communities(g, membership, cfg.gamma, &budget, cfg.density_sample);
    let dense = density.iter().filter(|r| r.gamma_dense).count();
    let pct = |a: usize, b: usize| if b == 0 { 100.0 } else { 100.0 * a as f64 / b as f64 };
    BatchReport {
        batch,
        algorithm: maintainer.kind(),
        warmup: batch <= WARMUP_BATCHES,
        modularity: q,
        communities,
        pct_connected: pct(connected, communities),
        pct_gamma_dense: pct(dense, density.len()),
        ms_movement: millis(step.timings.movement, cfg.timings),
        ms_refinement: millis(step.timings.refinement, cfg.timings),
        ms_aggregation: millis(step.timings.aggregation, cfg.timings),
        ms_total: millis(step.total, cfg.timings),
        changed: step.changed.iter().sum(),
        aff: step.affected.iter().sum(),
        changed_per_level: step.changed.clone(),
        aff_per_level: step.affected.clone(),
    }
}

/// Everything a run produced besides the reports.
pub struct BenchRun {
    pub reports: Vec<BatchReport>,
    pub changes: Vec<Vec<ChangeRecord>>,
    pub maintainer: Box<dyn CommunityMaintainer + Send>,
}

/// Replays `batches` on `base` with the configured maintainer.
pub fn run_batches(base: &Graph, batches: &[DeltaBatch], cfg: &BenchConfig) -> Result<BenchRun, BenchError> {
    cfg.validate()?;
    let mut maintainer = new_maintainer(cfg.algorithm, base, cfg.levels, cfg.gamma);
    let mut reports = Vec::with_capacity(batches.len());
    let mut changes = Vec::with_capacity(batches.len());
    for (i, batch) in batches.iter().enumerate() {
        let step = maintainer.step(batch)?;
        reports.push(batch_report(i + 1, maintainer.as_ref(), &step, cfg));
        changes.push(step.changes);
    }
    Ok(BenchRun {
        reports,
        changes,
        maintainer,
    })
}

pub fn run_benchmark(edges: &[StreamEdge], cfg: &BenchConfig) -> Result<Vec<BatchReport>, BenchError> {
    let (base, batches) = make_batches(edges, cfg)?;
    Ok(run_batches(&base, &batches, cfg)?.reports)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReportFormat {
    Csv,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(format!("unknown format {other:?} (expected csv or json)")),
        }
    }
}

pub fn emit_report<W: Write>(out: W, reports: &[BatchReport], format: ReportFormat) -> Result<(), BenchError> {
    match format {
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(CSV_COLUMNS)?;
            for r in reports {
                w.write_record([
                    r.batch.to_string(),
                    r.algorithm.to_string(),
                    r.modularity.to_string(),
                    r.communities.to_string(),
                    r.pct_connected.to_string(),
                    r.pct_gamma_dense.to_string(),
                    r.ms_movement.to_string(),
                    r.ms_refinement.to_string(),
                    r.ms_aggregation.to_string(),
                    r.ms_total.to_string(),
                    r.changed.to_string(),
                    r.aff.to_string(),
                ])?;
            }
            w.flush()?;
        }
        ReportFormat::Json => {
            let mut out = out;
            serde_json::to_writer_pretty(&mut out, reports)?;
            writeln!(out)?;
        }
    }
    Ok(())
}

/// The hierarchy snapshot as one JSON document.
pub fn write_snapshot<W: Write>(mut out: W, snapshot: &HierarchySnapshot) -> Result<(), BenchError> {
    serde_json::to_writer(&mut out, snapshot)?;
    writeln!(out)?;
    Ok(())
}

/// Change feed of one step as JSON lines.
pub fn write_change_feed<W: Write>(mut out: W, changes: &[ChangeRecord]) -> Result<(), BenchError> {
    for c in changes {
        serde_json::to_writer(&mut out, c)?;
        writeln!(out)?;
    }
    Ok(())
}
