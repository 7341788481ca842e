//! Planted-partition graph generator.

use crate::graph::VertexId;
use crate::partition::Label;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantedPartition {
    pub blocks: usize,
    /// Vertices per block.
    pub size: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub seed: u64,
}

impl PlantedPartition {
    pub fn num_vertices(&self) -> usize {
        self.blocks * self.size
    }

    /// Expected number of edges.
    pub fn expected_edges(&self) -> f64 {
        let k = self.blocks as f64;
        let s = self.size as f64;
        k * s * (s - 1.0) / 2.0 * self.p_in + k * (k - 1.0) / 2.0 * s * s * self.p_out
    }

    /// The planted block of every vertex.
    pub fn ground_truth(&self) -> Vec<Label> {
        (0..self.num_vertices()).map(|v| (v / self.size.max(1)) as Label).collect()
    }

    /// Unit-weight edges `(u, v)` with `u < v`, in lexicographic order.
    /// Pairs are skipped geometrically, so the cost is proportional to the
    /// number of edges rather than pairs.
    pub fn edges(&self) -> Vec<(VertexId, VertexId)> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut out = Vec::new();
        let s = self.size as u64;
        for a in 0..self.blocks as u64 {
            for b in a..self.blocks as u64 {
                let (p, pairs) = if a == b {
                    (self.p_in, s * s.saturating_sub(1) / 2)
                } else {
                    (self.p_out, s * s)
                };
                for k in sample_positions(&mut rng, pairs, p) {
                    let (i, j) = if a == b { triangle_pair(k) } else { (k / s, k % s) };
                    let u = (a * s + i) as VertexId;
                    let v = (b * s + j) as VertexId;
                    out.push((u.min(v), u.max(v)));
                }
            }
        }
        out.sort_unstable();
        out
    }
}

/// Positions in `0..n` each kept independently with probability `p`.
fn sample_positions(rng: &mut ChaCha8Rng, n: u64, p: f64) -> Vec<u64> {
    if p <= 0.0 || n == 0 {
        return Vec::new();
    }
    if p >= 1.0 {
        return (0..n).collect();
    }
    let skip = Geometric::new(p).expect("probability in (0, 1)");
    let mut out = Vec::new();
    let mut k = skip.sample(rng);
    while k < n {
        out.push(k);
        k = k.saturating_add(1).saturating_add(skip.sample(rng));
    }
    out
}

/// The `k`-th pair `(i, j)` with `i < j` in row order over `(j, i)`:
/// (0,1), (0,2), (1,2), (0,3), ...
fn triangle_pair(k: u64) -> (u64, u64) {
    let mut j = ((((8 * k + 1) as f64).sqrt() + 1.0) / 2.0) as u64;
    while j * (j - 1) / 2 > k {
        j -= 1;
    }
    while (j + 1) * j / 2 <= k {
        j += 1;
    }
    (k - j * (j - 1) / 2, j)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triangle_pairs_enumerate_in_order() {
        let mut expect = Vec::new();
        for j in 1..40u64 {
            for i in 0..j {
                expect.push((i, j));
            }
        }
        let got: Vec<_> = (0..expect.len() as u64).map(triangle_pair).collect();
        assert_eq!(got, expect);
    }

    #[test]
    fn deterministic_and_simple() {
        let cfg = PlantedPartition {
            blocks: 4,
            size: 50,
            p_in: 0.2,
            p_out: 0.01,
            seed: 7,
        };
        let a = cfg.edges();
        assert_eq!(a, cfg.edges());
        let mut dedup = a.clone();
        dedup.dedup();
        assert_eq!(dedup.len(), a.len());
        assert!(a.iter().all(|&(u, v)| u < v && (v as usize) < cfg.num_vertices()));
    }

    #[test]
    fn edge_count_near_expectation() {
        let cfg = PlantedPartition {
            blocks: 10,
            size: 100,
            p_in: 0.1,
            p_out: 0.002,
            seed: 1,
        };
        let e = cfg.edges().len() as f64;
        let mean = cfg.expected_edges();
        assert!((e - mean).abs() < 5.0 * mean.sqrt(), "{e} vs {mean}");
    }

    #[test]
    fn extreme_probabilities() {
        let full = PlantedPartition {
            blocks: 2,
            size: 3,
            p_in: 1.0,
            p_out: 0.0,
            seed: 0,
        };
        assert_eq!(full.edges(), vec![(0, 1), (0, 2), (1, 2), (3, 4), (3, 5), (4, 5)]);
    }
}
