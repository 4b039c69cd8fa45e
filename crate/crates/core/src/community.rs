//! Directed modularity and a Louvain optimiser for it.
//!
//! Modularity of a partition of a directed graph with `m` arcs:
//!
//! ```text
//! Q = 1/m * sum_{u,v} [ A_uv - γ * d_out(u) * d_in(v) / m ] * δ(c_u, c_v)
//! ```
//!
//! which per community reduces to `(W_c - γ * Sout_c * Sin_c / m) / m`, with
//! `W_c` the arc weight inside `c` and `Sout_c`, `Sin_c` the summed out- and
//! in-strengths of its members.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use log::info;
use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::graph::{parse_pair, CommunityId, DirectedGraph, NodeId, Partition};
use crate::rng;

#[derive(Clone, Debug, PartialEq)]
pub struct ModularityConfig {
    pub resolution: f64,
    /// Smallest modularity gain for which a node is moved.
    pub min_gain: f64,
    /// Upper bound on local-move sweeps per level.
    pub max_passes: usize,
    pub seed: u64,
}

impl Default for ModularityConfig {
    fn default() -> Self {
        ModularityConfig {
            resolution: 1.0,
            min_gain: 1e-9,
            max_passes: 100,
            seed: 0,
        }
    }
}

impl ModularityConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.resolution > 0.0) {
            return Err(Error::Config(format!(
                "resolution must be positive, got {}",
                self.resolution
            )));
        }
        if !(self.min_gain >= 0.0) {
            return Err(Error::Config(format!(
                "min_gain must be non-negative, got {}",
                self.min_gain
            )));
        }
        if self.max_passes == 0 {
            return Err(Error::Config("max_passes must be positive".into()));
        }
        Ok(())
    }
}

pub fn directed_modularity(g: &DirectedGraph, p: &Partition) -> Result<f64> {
    directed_modularity_with_resolution(g, p, 1.0)
}

pub fn directed_modularity_with_resolution(
    g: &DirectedGraph,
    p: &Partition,
    resolution: f64,
) -> Result<f64> {
    if g.node_count() != p.node_count() {
        return Err(Error::SizeMismatch {
            what: "partition",
            expected: g.node_count(),
            found: p.node_count(),
        });
    }
    if g.arc_count() == 0 {
        return Err(Error::EmptyGraph);
    }
    let m = g.arc_count() as f64;
    let mut q = 0.0;
    for c in p.communities() {
        let mut inside = 0usize;
        let mut s_out = 0usize;
        let mut s_in = 0usize;
        for &u in p.members(c) {
            s_out += g.out_degree(u);
            s_in += g.in_degree(u);
            inside += g
                .successors(u)
                .iter()
                .filter(|&&v| p.community_of(v) == c)
                .count();
        }
        q += inside as f64 - resolution * (s_out as f64) * (s_in as f64) / m;
    }
    Ok(q / m)
}

/// One aggregation level: the partition of the original nodes after the
/// level's local moves, and the modularity tracked incrementally while
/// moving.
#[derive(Clone, Debug)]
pub struct Level {
    pub partition: Partition,
    pub modularity: f64,
}

#[derive(Clone, Debug)]
pub struct LouvainResult {
    pub partition: Partition,
    pub levels: Vec<Level>,
    /// Modularity of `partition`, recomputed from scratch.
    pub modularity: f64,
}

impl LouvainResult {
    /// `level k: Q=...` lines, one per level.
    pub fn level_report(&self) -> String {
        self.levels
            .iter()
            .enumerate()
            .map(|(k, l)| format!("level {k}: Q={}\n", l.modularity))
            .collect()
    }
}

/// Weighted directed graph used at every Louvain level. Self-loop weight is
/// kept apart from the adjacency lists.
struct WeightedGraph {
    out_offsets: Vec<usize>,
    out_adj: Vec<(u32, f64)>,
    in_offsets: Vec<usize>,
    in_adj: Vec<(u32, f64)>,
    self_weight: Vec<f64>,
    out_strength: Vec<f64>,
    in_strength: Vec<f64>,
    total: f64,
}

impl WeightedGraph {
    fn node_count(&self) -> usize {
        self.self_weight.len()
    }

    fn from_graph(g: &DirectedGraph) -> Self {
        let arcs: Vec<(u32, u32, f64)> = g.arcs().map(|(u, v)| (u.0, v.0, 1.0)).collect();
        Self::from_sorted_arcs(g.node_count(), &arcs, vec![0.0; g.node_count()])
    }

    /// `arcs` must be sorted by (source, target) and free of self-loops.
    fn from_sorted_arcs(n: usize, arcs: &[(u32, u32, f64)], self_weight: Vec<f64>) -> Self {
        let mut out_offsets = vec![0usize; n + 1];
        let mut in_offsets = vec![0usize; n + 1];
        let mut out_strength = self_weight.clone();
        let mut in_strength = self_weight.clone();
        for &(u, v, w) in arcs {
            out_offsets[u as usize + 1] += 1;
            in_offsets[v as usize + 1] += 1;
            out_strength[u as usize] += w;
            in_strength[v as usize] += w;
        }
        for i in 0..n {
            out_offsets[i + 1] += out_offsets[i];
            in_offsets[i + 1] += in_offsets[i];
        }
        let out_adj = arcs.iter().map(|&(_, v, w)| (v, w)).collect();
        let mut cursor = in_offsets.clone();
        let mut in_adj = vec![(0u32, 0.0f64); arcs.len()];
        for &(u, v, w) in arcs {
            in_adj[cursor[v as usize]] = (u, w);
            cursor[v as usize] += 1;
        }
        let total = out_strength.iter().sum();
        WeightedGraph {
            out_offsets,
            out_adj,
            in_offsets,
            in_adj,
            self_weight,
            out_strength,
            in_strength,
            total,
        }
    }

    fn out_arcs(&self, u: usize) -> &[(u32, f64)] {
        &self.out_adj[self.out_offsets[u]..self.out_offsets[u + 1]]
    }

    fn in_arcs(&self, u: usize) -> &[(u32, f64)] {
        &self.in_adj[self.in_offsets[u]..self.in_offsets[u + 1]]
    }

    /// Modularity of the all-singletons partition.
    fn singleton_modularity(&self, resolution: f64) -> f64 {
        let m = self.total;
        (0..self.node_count())
            .map(|i| {
                self.self_weight[i] - resolution * self.out_strength[i] * self.in_strength[i] / m
            })
            .sum::<f64>()
            / m
    }

    /// Collapses each community into one node; `community` must be dense.
    fn aggregate(&self, community: &[u32], count: usize) -> WeightedGraph {
        let mut self_weight = vec![0.0; count];
        let mut arcs: Vec<(u32, u32, f64)> = Vec::with_capacity(self.out_adj.len());
        for u in 0..self.node_count() {
            let cu = community[u];
            self_weight[cu as usize] += self.self_weight[u];
            for &(v, w) in self.out_arcs(u) {
                let cv = community[v as usize];
                if cu == cv {
                    self_weight[cu as usize] += w;
                } else {
                    arcs.push((cu, cv, w));
                }
            }
        }
        arcs.sort_unstable_by_key(|a| (a.0, a.1));
        let mut merged: Vec<(u32, u32, f64)> = Vec::with_capacity(arcs.len());
        for (u, v, w) in arcs {
            match merged.last_mut() {
                Some(last) if last.0 == u && last.1 == v => last.2 += w,
                _ => merged.push((u, v, w)),
            }
        }
        WeightedGraph::from_sorted_arcs(count, &merged, self_weight)
    }
}

struct LocalMoveOutcome {
    community: Vec<u32>,
    modularity: f64,
    moves: usize,
}

/// Repeated sweeps of greedy single-node moves until a sweep moves nothing or
/// `max_passes` is reached. Each sweep visits nodes in a fresh random order.
fn local_moves<R: rand::Rng>(
    wg: &WeightedGraph,
    cfg: &ModularityConfig,
    rng: &mut R,
    start_modularity: f64,
) -> LocalMoveOutcome {
    let n = wg.node_count();
    let m = wg.total;
    let gamma = cfg.resolution;
    let mut community: Vec<u32> = (0..n as u32).collect();
    let mut sum_in = wg.in_strength.clone();
    let mut sum_out = wg.out_strength.clone();
    let mut size = vec![1usize; n];
    let mut empty: Vec<u32> = Vec::new();
    let mut link = vec![0.0f64; n];
    let mut touched: Vec<u32> = Vec::new();
    let mut order: Vec<usize> = (0..n).collect();
    let mut q = start_modularity;
    let mut total_moves = 0;

    for _ in 0..cfg.max_passes {
        order.shuffle(rng);
        let mut moves = 0;
        for &i in &order {
            let own = community[i];
            let k_out = wg.out_strength[i];
            let k_in = wg.in_strength[i];

            for &(j, w) in wg.out_arcs(i).iter().chain(wg.in_arcs(i)) {
                let c = community[j as usize];
                if link[c as usize] == 0.0 {
                    touched.push(c);
                }
                link[c as usize] += w;
            }

            sum_in[own as usize] -= k_in;
            sum_out[own as usize] -= k_out;
            size[own as usize] -= 1;

            let gain = |c: u32, link: f64| {
                link - gamma * (k_out * sum_in[c as usize] + k_in * sum_out[c as usize]) / m
            };
            let own_gain = gain(own, link[own as usize]);
            let mut best = own;
            let mut best_gain = own_gain;
            for &c in &touched {
                if c == own {
                    continue;
                }
                let candidate = gain(c, link[c as usize]);
                if candidate > best_gain || (candidate == best_gain && c < best) {
                    best = c;
                    best_gain = candidate;
                }
            }
            // isolating the node is worth 0
            if size[own as usize] > 0 && best_gain < 0.0 {
                if let Some(&c) = empty.last() {
                    best = c;
                    best_gain = 0.0;
                }
            }

            let improvement = (best_gain - own_gain) / m;
            let target = if best != own && improvement > cfg.min_gain {
                q += improvement;
                moves += 1;
                if empty.last() == Some(&best) && size[best as usize] == 0 {
                    empty.pop();
                }
                best
            } else {
                own
            };
            sum_in[target as usize] += k_in;
            sum_out[target as usize] += k_out;
            size[target as usize] += 1;
            community[i] = target;
            if size[own as usize] == 0 {
                empty.push(own);
            }

            for &c in &touched {
                link[c as usize] = 0.0;
            }
            touched.clear();
        }
        total_moves += moves;
        if moves == 0 {
            break;
        }
    }

    LocalMoveOutcome {
        community,
        modularity: q,
        moves: total_moves,
    }
}

/// Dense renumbering in order of first appearance.
fn densify(labels: &[u32]) -> (Vec<u32>, usize) {
    let mut map: HashMap<u32, u32> = HashMap::new();
    let dense = labels
        .iter()
        .map(|&l| {
            let next = map.len() as u32;
            *map.entry(l).or_insert(next)
        })
        .collect();
    (dense, map.len())
}

/// Multi-level Louvain optimisation of directed modularity.
pub fn louvain_directed(g: &DirectedGraph, cfg: &ModularityConfig) -> Result<LouvainResult> {
    cfg.validate()?;
    if g.arc_count() == 0 {
        return Err(Error::EmptyGraph);
    }
    let mut rng = rng::stream_rng(cfg.seed, rng::LOUVAIN);
    let mut wg = WeightedGraph::from_graph(g);
    // original node -> node of the current level's graph
    let mut membership: Vec<u32> = (0..g.node_count() as u32).collect();
    let mut levels: Vec<Level> = Vec::new();

    loop {
        let start = wg.singleton_modularity(cfg.resolution);
        let outcome = local_moves(&wg, cfg, &mut rng, start);
        if outcome.moves == 0 && !levels.is_empty() {
            break;
        }
        let (dense, count) = densify(&outcome.community);
        for m in membership.iter_mut() {
            *m = dense[*m as usize];
        }
        let labels: Vec<usize> = membership.iter().map(|&c| c as usize).collect();
        let level = Level {
            partition: Partition::canonical(&labels),
            modularity: outcome.modularity,
        };
        info!("level {}: Q={}", levels.len(), level.modularity);
        levels.push(level);
        if outcome.moves == 0 || count == wg.node_count() {
            break;
        }
        wg = wg.aggregate(&dense, count);
    }

    let partition = levels.last().expect("at least one level").partition.clone();
    let modularity = directed_modularity_with_resolution(g, &partition, cfg.resolution)?;
    Ok(LouvainResult {
        partition,
        levels,
        modularity,
    })
}

/// Pairwise Rand index between two labelings of the same node set.
pub fn rand_index(a: &Partition, b: &Partition) -> f64 {
    assert_eq!(a.node_count(), b.node_count());
    let n = a.node_count() as u64;
    if n < 2 {
        return 1.0;
    }
    let pairs = |k: u64| k * k.saturating_sub(1) / 2;
    let mut joint: HashMap<(CommunityId, CommunityId), u64> = HashMap::new();
    for (&x, &y) in a.assignment().iter().zip(b.assignment()) {
        *joint.entry((x, y)).or_default() += 1;
    }
    let same_both: u64 = joint.values().map(|&k| pairs(k)).sum();
    let same_a: u64 = a
        .communities()
        .map(|c| pairs(a.members(c).len() as u64))
        .sum();
    let same_b: u64 = b
        .communities()
        .map(|c| pairs(b.members(c).len() as u64))
        .sum();
    let total = pairs(n);
    let agree = total + 2 * same_both - same_a - same_b;
    agree as f64 / total as f64
}

/// Reads a `node community` file. Every graph node must appear exactly once;
/// community labels are densified in ascending order.
pub fn read_partition<R: BufRead>(reader: R, g: &DirectedGraph) -> Result<Partition> {
    let mut labels: Vec<Option<u64>> = vec![None; g.node_count()];
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<partition>", e))?;
        let Some((node, label)) = parse_pair(&line, i + 1)? else {
            continue;
        };
        let u = g.node(node)?;
        let slot = &mut labels[u.index()];
        if slot.is_some() {
            return Err(Error::DuplicateNode(node));
        }
        *slot = Some(label);
    }
    let labels = labels
        .into_iter()
        .enumerate()
        .map(|(i, l)| l.ok_or_else(|| Error::UnassignedNode(g.external_id(NodeId(i as u32)))))
        .collect::<Result<Vec<u64>>>()?;
    Ok(Partition::from_labels(&labels))
}

pub fn write_partition<W: Write>(
    mut w: W,
    g: &DirectedGraph,
    p: &Partition,
) -> std::io::Result<()> {
    for u in g.nodes() {
        writeln!(w, "{} {}", g.external_id(u), p.community_of(u).0)?;
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::tests::{g1, g1_partition};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn graph(arcs: &[(u64, u64)]) -> DirectedGraph {
        DirectedGraph::from_arcs([], arcs.iter().copied()).0
    }

    /// Straight double sum over all ordered node pairs.
    fn brute_modularity(g: &DirectedGraph, p: &Partition, gamma: f64) -> f64 {
        let m = g.arc_count() as f64;
        let mut q = 0.0;
        for u in g.nodes() {
            for v in g.nodes() {
                if p.community_of(u) != p.community_of(v) {
                    continue;
                }
                let a = if g.contains_arc(u, v) { 1.0 } else { 0.0 };
                q += a - gamma * g.out_degree(u) as f64 * g.in_degree(v) as f64 / m;
            }
        }
        q / m
    }

    fn random_graph(seed: u64, n: u64, density: f64, reciprocal: bool) -> DirectedGraph {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut arcs = Vec::new();
        for u in 0..n {
            for v in 0..n {
                if u < v && rng.random::<f64>() < density {
                    arcs.push((u, v));
                    if reciprocal || rng.random::<bool>() {
                        arcs.push((v, u));
                    }
                }
            }
        }
        DirectedGraph::from_arcs(0..n, arcs).0
    }

    #[test]
    fn modularity_examples() {
        let pair = graph(&[(1, 2), (2, 1)]);
        let whole = Partition::from_labels(&[0, 0]);
        let split = Partition::singletons(2);
        assert_eq!(directed_modularity(&pair, &whole).unwrap(), 0.0);
        assert_eq!(directed_modularity(&pair, &split).unwrap(), -0.5);

        let two = graph(&[(1, 2), (2, 1), (3, 4), (4, 3)]);
        let p = Partition::from_labels(&[0, 0, 1, 1]);
        assert_eq!(directed_modularity(&two, &p).unwrap(), 0.5);
    }

    #[test]
    fn modularity_of_empty_graph_is_undefined() {
        let g = DirectedGraph::from_arcs([1, 2], []).0;
        let err = directed_modularity(&g, &Partition::singletons(2)).unwrap_err();
        assert!(err.to_string().contains("undefined modularity"));
    }

    #[test]
    fn modularity_matches_double_sum() {
        for seed in 0..20 {
            let g = random_graph(seed, 12, 0.3, false);
            if g.arc_count() == 0 {
                continue;
            }
            let labels: Vec<u32> = (0..12).map(|i| (i * 7 + seed as u32) % 3).collect();
            let p = Partition::from_labels(&labels);
            for gamma in [0.5, 1.0, 2.0] {
                let fast = directed_modularity_with_resolution(&g, &p, gamma).unwrap();
                assert!((fast - brute_modularity(&g, &p, gamma)).abs() < 1e-12);
            }
        }
    }

    /// Best partition found by enumerating every set partition.
    fn exhaustive_optimum(g: &DirectedGraph) -> f64 {
        fn recurse(g: &DirectedGraph, labels: &mut Vec<usize>, next: usize, best: &mut f64) {
            if labels.len() == g.node_count() {
                let q = directed_modularity(g, &Partition::from_labels(labels)).unwrap();
                *best = best.max(q);
                return;
            }
            for l in 0..=next {
                labels.push(l);
                recurse(g, labels, next.max(l + 1), best);
                labels.pop();
            }
        }
        let mut best = f64::NEG_INFINITY;
        recurse(g, &mut Vec::new(), 0, &mut best);
        best
    }

    fn two_triangles() -> DirectedGraph {
        let mut arcs = Vec::new();
        for base in [0u64, 10] {
            for (a, b) in [(0, 1), (1, 2), (2, 0)] {
                arcs.push((base + a, base + b));
                arcs.push((base + b, base + a));
            }
        }
        graph(&arcs)
    }

    #[test]
    fn louvain_recovers_two_triangles() {
        let g = two_triangles();
        assert!((exhaustive_optimum(&g) - 0.5).abs() < 1e-12);
        let res = louvain_directed(&g, &ModularityConfig::default()).unwrap();
        assert_eq!(res.partition.community_count(), 2);
        assert!(res
            .partition
            .same_grouping(&Partition::from_labels(&[0, 0, 0, 1, 1, 1])));
        assert!((res.modularity - 0.5).abs() < 1e-12);
    }

    #[test]
    fn louvain_merges_reciprocal_pair() {
        let g = graph(&[(1, 2), (2, 1)]);
        assert_eq!(exhaustive_optimum(&g), 0.0);
        let res = louvain_directed(&g, &ModularityConfig::default()).unwrap();
        assert_eq!(res.partition.community_count(), 1);
        assert_eq!(res.modularity, 0.0);
    }

    #[test]
    fn louvain_rejects_empty_graph_and_bad_config() {
        let g = DirectedGraph::from_arcs([1], []).0;
        assert!(matches!(
            louvain_directed(&g, &ModularityConfig::default()),
            Err(Error::EmptyGraph)
        ));
        let cfg = ModularityConfig {
            resolution: 0.0,
            ..ModularityConfig::default()
        };
        assert!(matches!(
            louvain_directed(&two_triangles(), &cfg),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn louvain_is_deterministic_per_seed() {
        let g = random_graph(3, 60, 0.08, false);
        let cfg = ModularityConfig {
            seed: 17,
            ..ModularityConfig::default()
        };
        let a = louvain_directed(&g, &cfg).unwrap();
        let b = louvain_directed(&g, &cfg).unwrap();
        assert_eq!(a.partition, b.partition);
        assert_eq!(a.modularity.to_bits(), b.modularity.to_bits());
    }

    #[test]
    fn level_report_format() {
        let res = louvain_directed(&two_triangles(), &ModularityConfig::default()).unwrap();
        let report = res.level_report();
        for (k, line) in report.lines().enumerate() {
            let q: f64 = line
                .strip_prefix(&format!("level {k}: Q="))
                .unwrap()
                .parse()
                .unwrap();
            assert_eq!(q, res.levels[k].modularity);
        }
    }

    /// After a single level of local moves, no single node can be moved to
    /// another community (or isolated) with a gain above `min_gain`.
    #[test]
    fn first_level_is_locally_optimal() {
        for seed in 0..5 {
            let g = random_graph(seed, 30, 0.12, false);
            let cfg = ModularityConfig::default();
            let wg = WeightedGraph::from_graph(&g);
            let mut rng = rng::stream_rng(seed, rng::LOUVAIN);
            let out = local_moves(&wg, &cfg, &mut rng, wg.singleton_modularity(1.0));
            let labels: Vec<usize> = out.community.iter().map(|&c| c as usize).collect();
            let p = Partition::canonical(&labels);
            let q = directed_modularity(&g, &p).unwrap();
            assert!((q - out.modularity).abs() < 1e-9);
            let k = p.community_count();
            for u in 0..g.node_count() {
                for target in 0..=k {
                    let mut moved = labels.clone();
                    moved[u] = if target == k { usize::MAX } else { target };
                    let q2 = directed_modularity(&g, &Partition::canonical(&moved)).unwrap();
                    assert!(q2 - q <= cfg.min_gain, "node {u} -> {target}: {q2} > {q}");
                }
            }
        }
    }

    #[test]
    fn rand_index_matches_pair_enumeration() {
        let a = Partition::from_labels(&[0, 0, 1, 1, 2, 2, 2]);
        let b = Partition::from_labels(&[0, 1, 1, 1, 2, 2, 0]);
        let n = a.node_count();
        let mut agree = 0;
        let mut total = 0;
        for i in 0..n {
            for j in i + 1..n {
                let (u, v) = (NodeId(i as u32), NodeId(j as u32));
                let sa = a.community_of(u) == a.community_of(v);
                let sb = b.community_of(u) == b.community_of(v);
                agree += usize::from(sa == sb);
                total += 1;
            }
        }
        assert_eq!(rand_index(&a, &b), agree as f64 / total as f64);
        assert_eq!(rand_index(&a, &a), 1.0);
    }

    #[test]
    fn partition_round_trip() {
        let (g, p) = (g1(), g1_partition());
        let mut buf = Vec::new();
        write_partition(&mut buf, &g, &p).unwrap();
        let back = read_partition(buf.as_slice(), &g).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn partition_validation() {
        let g = g1();
        let missing = "1 0\n2 0\n3 0\n4 1\n5 1\n";
        let err = read_partition(missing.as_bytes(), &g).unwrap_err();
        assert_eq!(err.to_string(), "node 6 unassigned");

        let dup = "1 0\n1 0\n2 0\n3 0\n4 1\n5 1\n6 1\n";
        assert!(matches!(
            read_partition(dup.as_bytes(), &g),
            Err(Error::DuplicateNode(1))
        ));
        let unknown = "1 0\n2 0\n3 0\n4 1\n5 1\n6 1\n9 1\n";
        assert!(matches!(
            read_partition(unknown.as_bytes(), &g),
            Err(Error::UnknownNode(9))
        ));

        let sparse = "1 9\n2 0\n3 5\n4 9\n5 0\n6 5\n";
        let p = read_partition(sparse.as_bytes(), &g).unwrap();
        let got: Vec<u32> = p.assignment().iter().map(|c| c.0).collect();
        assert_eq!(got, vec![2, 0, 1, 2, 0, 1]);
    }

    proptest! {
        #[test]
        fn louvain_levels_track_modularity(seed in 0u64..1000, n in 4u64..40, density in 0.05f64..0.4) {
            let g = random_graph(seed, n, density, false);
            prop_assume!(g.arc_count() > 0);
            let cfg = ModularityConfig { seed, ..ModularityConfig::default() };
            let res = louvain_directed(&g, &cfg).unwrap();
            let mut prev = f64::NEG_INFINITY;
            for level in &res.levels {
                let scratch = directed_modularity(&g, &level.partition).unwrap();
                prop_assert!((scratch - level.modularity).abs() < 1e-9);
                prop_assert!(level.modularity >= prev - 1e-12);
                prev = level.modularity;
            }
            prop_assert!((res.modularity - res.levels.last().unwrap().modularity).abs() < 1e-9);
            prop_assert!(res.modularity < 1.0);
        }

        #[test]
        fn modularity_ignores_labels(seed in 0u64..1000, shift in 1usize..7) {
            let g = random_graph(seed, 15, 0.25, false);
            prop_assume!(g.arc_count() > 0);
            let labels: Vec<usize> = (0..15).map(|i| (i * 5 + seed as usize) % 4).collect();
            let relabeled: Vec<usize> = labels.iter().map(|l| (l + shift) * 3).collect();
            let a = directed_modularity(&g, &Partition::from_labels(&labels)).unwrap();
            let b = directed_modularity(&g, &Partition::from_labels(&relabeled)).unwrap();
            prop_assert!((a - b).abs() < 1e-15);
        }

        #[test]
        fn reciprocal_graphs_match_undirected_modularity(seed in 0u64..1000) {
            let g = random_graph(seed, 16, 0.25, true);
            prop_assume!(g.arc_count() > 0);
            let labels: Vec<usize> = (0..16).map(|i| (i * 3 + seed as usize) % 3).collect();
            let p = Partition::from_labels(&labels);
            // Newman-Girvan on the underlying undirected simple graph
            let edges = g.arc_count() as f64 / 2.0;
            let mut q = 0.0;
            for u in g.nodes() {
                for v in g.nodes() {
                    if p.community_of(u) == p.community_of(v) {
                        let a = if g.undirected_neighbors(u).contains(&v) { 1.0 } else { 0.0 };
                        let ku = g.undirected_neighbors(u).len() as f64;
                        let kv = g.undirected_neighbors(v).len() as f64;
                        q += a - ku * kv / (2.0 * edges);
                    }
                }
            }
            q /= 2.0 * edges;
            prop_assert!((directed_modularity(&g, &p).unwrap() - q).abs() < 1e-12);
        }
    }
}
