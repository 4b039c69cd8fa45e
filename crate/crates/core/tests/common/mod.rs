//! Shared fixtures and a dense brute-force reference for the measures.

#![allow(dead_code)]

use std::collections::BTreeMap;

use noderoles::graph::{DirectedGraph, Partition};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Adjacency-matrix graph with community labels, nodes `0..n`.
pub struct Dense {
    pub adj: Vec<Vec<bool>>,
    pub labels: Vec<usize>,
}

#[derive(Clone, Copy)]
pub enum Mode {
    Undirected,
    In,
    Out,
}

impl Dense {
    pub fn random(seed: u64, max_nodes: usize) -> Dense {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(2..=max_nodes);
        let density: f64 = rng.random();
        let k = rng.random_range(1..=n);
        let adj = (0..n)
            .map(|u| (0..n).map(|v| u != v && rng.random_bool(density)).collect())
            .collect();
        let labels = (0..n).map(|_| rng.random_range(0..k)).collect();
        Dense { adj, labels }
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn graph(&self) -> DirectedGraph {
        let n = self.n();
        let arcs = (0..n).flat_map(|u| {
            (0..n)
                .filter(move |&v| self.adj[u][v])
                .map(move |v| (u as u64, v as u64))
        });
        DirectedGraph::from_arcs(0..n as u64, arcs.collect::<Vec<_>>()).0
    }

    pub fn partition(&self) -> Partition {
        Partition::from_labels(&self.labels)
    }

    fn linked(&self, u: usize, v: usize, mode: Mode) -> bool {
        u != v
            && match mode {
                Mode::Undirected => self.adj[u][v] || self.adj[v][u],
                Mode::In => self.adj[v][u],
                Mode::Out => self.adj[u][v],
            }
    }

    /// Link count per community label.
    fn per_label(&self, u: usize, mode: Mode) -> BTreeMap<usize, usize> {
        let mut counts = BTreeMap::new();
        for v in 0..self.n() {
            if self.linked(u, v, mode) {
                *counts.entry(self.labels[v]).or_insert(0) += 1;
            }
        }
        counts
    }

    pub fn participation(&self, u: usize, mode: Mode) -> f64 {
        let counts = self.per_label(u, mode);
        let d: usize = counts.values().sum();
        if d == 0 {
            return 0.0;
        }
        1.0 - counts
            .values()
            .map(|&k| (k as f64 / d as f64).powi(2))
            .sum::<f64>()
    }

    pub fn zscore(&self, values: &[f64]) -> Vec<f64> {
        (0..self.n())
            .map(|u| {
                let members: Vec<f64> = (0..self.n())
                    .filter(|&v| self.labels[v] == self.labels[u])
                    .map(|v| values[v])
                    .collect();
                if members.iter().all(|&x| x == members[0]) {
                    return 0.0;
                }
                let n = members.len() as f64;
                let mean = members.iter().sum::<f64>() / n;
                let sd = (members.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
                (values[u] - mean) / sd
            })
            .collect()
    }

    pub fn within_module(&self, mode: Mode) -> Vec<f64> {
        let internal: Vec<f64> = (0..self.n())
            .map(|u| *self.per_label(u, mode).get(&self.labels[u]).unwrap_or(&0) as f64)
            .collect();
        self.zscore(&internal)
    }

    /// `[d_int, d_ext, distinct other communities, std of external counts]`
    fn bases(&self, u: usize, mode: Mode) -> [f64; 4] {
        let counts = self.per_label(u, mode);
        let own = self.labels[u];
        let internal = *counts.get(&own).unwrap_or(&0) as f64;
        let mut external: Vec<f64> = counts
            .iter()
            .filter(|(&c, _)| c != own)
            .map(|(_, &k)| k as f64)
            .collect();
        // fixed summation order so equal multisets give bit-identical spreads
        external.sort_by(f64::total_cmp);
        let d_ext = external.iter().sum::<f64>();
        let spread = if external.is_empty() {
            0.0
        } else {
            let m = d_ext / external.len() as f64;
            (external.iter().map(|x| (x - m).powi(2)).sum::<f64>() / external.len() as f64).sqrt()
        };
        [internal, d_ext, external.len() as f64, spread]
    }

    /// The eight measures per node in the order int in/out, ext in/out,
    /// diversity in/out, heterogeneity in/out.
    pub fn measures(&self) -> Vec<[f64; 8]> {
        let mut columns = Vec::with_capacity(8);
        for base in 0..4 {
            for mode in [Mode::In, Mode::Out] {
                let raw: Vec<f64> = (0..self.n()).map(|u| self.bases(u, mode)[base]).collect();
                columns.push(self.zscore(&raw));
            }
        }
        (0..self.n())
            .map(|u| std::array::from_fn(|m| columns[m][u]))
            .collect()
    }
}

/// `count` points around each centre with Gaussian noise of `sigma`.
pub fn blobs<const D: usize>(
    centres: &[[f64; D]],
    count: usize,
    sigma: f64,
    seed: u64,
) -> Vec<[f64; D]> {
    use rand_distr::{Distribution, Normal};
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sigma).unwrap();
    centres
        .iter()
        .flat_map(|c| std::iter::repeat_n(*c, count))
        .map(|c| c.map(|x| x + noise.sample(&mut rng)))
        .collect()
}

/// Peak resident set size of this process in bytes.
pub fn peak_rss_bytes() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    let kib: u64 = line.split_whitespace().nth(1)?.parse().ok()?;
    Some(kib * 1024)
}
