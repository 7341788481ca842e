//! Text edge-stream ingestion.
//!
//! One edge per line: `u v [w] [timestamp]`, whitespace separated. Lines
//! starting with `#` or `%` are comments. Endpoints are arbitrary tokens and
//! are interned to dense ids in order of first appearance.

use crate::graph::VertexId;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::io::BufRead;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StreamError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: negative weight {weight}")]
    NegativeWeight { line: usize, weight: f64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One parsed edge with `u <= v` after normalization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StreamEdge {
    pub u: VertexId,
    pub v: VertexId,
    pub weight: f64,
    pub timestamp: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StreamStats {
    pub lines: usize,
    pub comments: usize,
    pub edges: usize,
    pub self_loops: usize,
    pub vertices: usize,
    pub timestamped: usize,
}

/// Maps external vertex tokens to dense ids.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IdMap {
    names: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, VertexId>,
}

impl IdMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern(&mut self, name: &str) -> VertexId {
        if let Some(&id) = self.index.get(name) {
            return id;
        }
        let id = self.names.len() as VertexId;
        self.names.push(name.to_owned());
        self.index.insert(name.to_owned(), id);
        id
    }

    pub fn get(&self, name: &str) -> Option<VertexId> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: VertexId) -> Option<&str> {
        self.names.get(id as usize).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string(&self.names)
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        let names: Vec<String> = serde_json::from_str(text)?;
        let index = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i as VertexId))
            .collect();
        Ok(Self { names, index })
    }
}

#[derive(Debug, Clone, Default)]
pub struct EdgeStream {
    pub edges: Vec<StreamEdge>,
    pub ids: IdMap,
    pub stats: StreamStats,
}

fn parse_number(token: &str, line: usize, what: &str) -> Result<f64, StreamError> {
    token.parse::<f64>().map_err(|_| StreamError::Parse {
        line,
        message: format!("invalid {what} {token:?}"),
    })
}

/// Parses an edge stream, keeping edges in file order.
pub fn load_edge_stream<R: BufRead>(source: R) -> Result<EdgeStream, StreamError> {
    let mut out = EdgeStream::default();
    for (i, line) in source.lines().enumerate() {
        let line = line?;
        let number = i + 1;
        out.stats.lines += 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if trimmed.starts_with('#') || trimmed.starts_with('%') {
            out.stats.comments += 1;
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if fields.len() < 2 || fields.len() > 4 {
            return Err(StreamError::Parse {
                line: number,
                message: format!("expected 2 to 4 fields, found {}", fields.len()),
            });
        }
        let weight = match fields.get(2) {
            Some(t) => parse_number(t, number, "weight")?,
            None => 1.0,
        };
        if !weight.is_finite() {
            return Err(StreamError::Parse {
                line: number,
                message: format!("non-finite weight {weight}"),
            });
        }
        if weight < 0.0 {
            return Err(StreamError::NegativeWeight { line: number, weight });
        }
        let timestamp = fields
            .get(3)
            .map(|t| parse_number(t, number, "timestamp"))
            .transpose()?;
        let a = out.ids.intern(fields[0]);
        let b = out.ids.intern(fields[1]);
        let (u, v) = if a <= b { (a, b) } else { (b, a) };
        if u == v {
            out.stats.self_loops += 1;
        }
        if timestamp.is_some() {
            out.stats.timestamped += 1;
        }
        out.edges.push(StreamEdge { u, v, weight, timestamp });
    }
    out.stats.edges = out.edges.len();
    out.stats.vertices = out.ids.len();
    Ok(out)
}

pub fn load_edge_stream_str(text: &str) -> Result<EdgeStream, StreamError> {
    load_edge_stream(text.as_bytes())
}

/// Writes edges in the stream format, using numeric ids.
pub fn write_edge_stream<W: std::io::Write>(mut out: W, edges: &[StreamEdge]) -> std::io::Result<()> {
    for e in edges {
        match e.timestamp {
            Some(t) => writeln!(out, "{} {} {} {}", e.u, e.v, e.weight, t)?,
            None => writeln!(out, "{} {} {}", e.u, e.v, e.weight)?,
        }
    }
    Ok(())
}
