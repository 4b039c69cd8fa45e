//! Planted directed stochastic block models for validation runs.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};

use crate::error::{Error, Result};
use crate::graph::{DirectedGraph, Partition};
use crate::rng::{stream_rng, SYNTH};

/// Degree targets forced onto one node after the random draw. `None` leaves
/// that count as drawn.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PlantedRole {
    pub node: u32,
    pub label: String,
    pub int_in: Option<usize>,
    pub int_out: Option<usize>,
    pub ext_in: Option<usize>,
    pub ext_out: Option<usize>,
}

impl PlantedRole {
    /// A node linked both ways to `internal` members of its block.
    pub fn hub(node: u32, internal: usize) -> Self {
        PlantedRole {
            node,
            label: "hub".into(),
            int_in: Some(internal),
            int_out: Some(internal),
            ..Default::default()
        }
    }

    fn targets(&self) -> [Option<usize>; 4] {
        [self.int_in, self.int_out, self.ext_in, self.ext_out]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthParams {
    pub blocks: usize,
    pub block_size: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub planted: Vec<PlantedRole>,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            blocks: 4,
            block_size: 50,
            p_in: 0.3,
            p_out: 0.01,
            planted: Vec::new(),
            seed: 0,
        }
    }
}

impl SynthParams {
    pub fn node_count(&self) -> usize {
        self.blocks * self.block_size
    }

    pub fn validate(&self) -> Result<()> {
        if self.blocks < 2 {
            return Err(Error::Config("at least 2 blocks are required".into()));
        }
        if self.block_size == 0 {
            return Err(Error::Config("blocks must not be empty".into()));
        }
        if !(0.0 <= self.p_out && self.p_out < self.p_in && self.p_in <= 1.0) {
            return Err(Error::Config(format!(
                "need 0 <= p_out < p_in <= 1 (p_in = {}, p_out = {})",
                self.p_in, self.p_out
            )));
        }
        if self.node_count() > u32::MAX as usize {
            return Err(Error::Config("too many nodes".into()));
        }
        let n = self.node_count();
        let mut seen = BTreeSet::new();
        for role in &self.planted {
            let node = role.node as usize;
            if role.node as usize >= n {
                return Err(Error::InfeasibleTarget {
                    node,
                    message: format!("node index outside 0..{n}"),
                });
            }
            if !seen.insert(role.node) {
                return Err(Error::DuplicateNode(node as u64));
            }
            let internal = self.block_size - 1;
            let external = n - self.block_size;
            for (target, limit, what) in [
                (role.int_in, internal, "internal in-degree"),
                (role.int_out, internal, "internal out-degree"),
                (role.ext_in, external, "external in-degree"),
                (role.ext_out, external, "external out-degree"),
            ] {
                if let Some(t) = target {
                    if t > limit {
                        return Err(Error::InfeasibleTarget {
                            node,
                            message: format!("{what} {t} exceeds the {limit} available nodes"),
                        });
                    }
                }
            }
        }
        Ok(())
    }
}

/// Achieved counts of a planted node, in the order internal in, internal
/// out, external in, external out.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlantedReport {
    pub role: PlantedRole,
    pub achieved: [usize; 4],
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthNetwork {
    pub node_count: usize,
    /// Sorted, distinct, loop-free.
    pub arcs: Vec<(u32, u32)>,
    pub block_of: Vec<u32>,
    pub planted: Vec<PlantedReport>,
}

/// Draws every ordered pair in `0..rows x 0..cols` with probability `p`,
/// skipping the diagonal when `skip_diagonal`, by jumping geometric gaps.
fn sample_pairs(
    rng: &mut ChaCha8Rng,
    rows: usize,
    cols: usize,
    p: f64,
    skip_diagonal: bool,
    mut emit: impl FnMut(usize, usize),
) {
    if p <= 0.0 {
        return;
    }
    let total = (rows * cols) as u64;
    let gap = Geometric::new(p).expect("probability in (0, 1]");
    let mut pos = 0u64;
    loop {
        pos = pos.saturating_add(gap.sample(rng));
        if pos >= total {
            return;
        }
        let (i, j) = ((pos / cols as u64) as usize, (pos % cols as u64) as usize);
        if !(skip_diagonal && i == j) {
            emit(i, j);
        }
        pos += 1;
    }
}

struct Adjacency<'a> {
    out: Vec<BTreeSet<u32>>,
    inc: Vec<BTreeSet<u32>>,
    block_of: &'a [u32],
}

#[derive(Clone, Copy)]
enum Slot {
    IntIn,
    IntOut,
    ExtIn,
    ExtOut,
}

impl Slot {
    const ALL: [Slot; 4] = [Slot::IntIn, Slot::IntOut, Slot::ExtIn, Slot::ExtOut];

    fn internal(self) -> bool {
        matches!(self, Slot::IntIn | Slot::IntOut)
    }

    fn outgoing(self) -> bool {
        matches!(self, Slot::IntOut | Slot::ExtOut)
    }

    /// The slot of the other endpoint affected by an arc in this slot.
    fn mirror(self) -> usize {
        match self {
            Slot::IntIn => 1,
            Slot::IntOut => 0,
            Slot::ExtIn => 3,
            Slot::ExtOut => 2,
        }
    }
}

impl Adjacency<'_> {
    fn neighbors(&self, u: u32, slot: Slot) -> Vec<u32> {
        let set = if slot.outgoing() {
            &self.out[u as usize]
        } else {
            &self.inc[u as usize]
        };
        let home = self.block_of[u as usize];
        set.iter()
            .copied()
            .filter(|&v| (self.block_of[v as usize] == home) == slot.internal())
            .collect()
    }

    fn count(&self, u: u32, slot: Slot) -> usize {
        self.neighbors(u, slot).len()
    }

    fn set(&mut self, u: u32, v: u32, slot: Slot, present: bool) {
        let (src, dst) = if slot.outgoing() { (u, v) } else { (v, u) };
        if present {
            self.out[src as usize].insert(dst);
            self.inc[dst as usize].insert(src);
        } else {
            self.out[src as usize].remove(&dst);
            self.inc[dst as usize].remove(&src);
        }
    }
}

/// Moves every planted count onto its target. Arcs touching another planted
/// node whose matching count is pinned are changed only when nothing else
/// is available, and the pass repeats until all targets hold together.
fn plant(adj: &mut Adjacency<'_>, params: &SynthParams, rng: &mut ChaCha8Rng) -> Result<()> {
    let n = params.node_count() as u32;
    let mut pinned: Vec<[bool; 4]> = vec![[false; 4]; n as usize];
    for role in &params.planted {
        pinned[role.node as usize] = role.targets().map(|t| t.is_some());
    }
    let prefer_free = |pinned: &[[bool; 4]], slot: Slot, mut v: Vec<u32>, rng: &mut ChaCha8Rng| {
        v.shuffle(rng);
        v.sort_by_key(|&w| pinned[w as usize][slot.mirror()]);
        v
    };

    const ROUNDS: usize = 64;
    for _ in 0..ROUNDS {
        let mut changed = false;
        for role in &params.planted {
            let u = role.node;
            for (slot, target) in Slot::ALL.into_iter().zip(role.targets()) {
                let Some(target) = target else { continue };
                let current = adj.neighbors(u, slot);
                if current.len() > target {
                    let excess = current.len() - target;
                    for v in prefer_free(&pinned, slot, current, rng)
                        .into_iter()
                        .take(excess)
                    {
                        adj.set(u, v, slot, false);
                    }
                    changed = true;
                } else if current.len() < target {
                    let home = adj.block_of[u as usize];
                    let present: BTreeSet<u32> = current.iter().copied().collect();
                    let candidates: Vec<u32> = (0..n)
                        .filter(|&v| {
                            v != u
                                && (adj.block_of[v as usize] == home) == slot.internal()
                                && !present.contains(&v)
                        })
                        .collect();
                    let missing = target - current.len();
                    for v in prefer_free(&pinned, slot, candidates, rng)
                        .into_iter()
                        .take(missing)
                    {
                        adj.set(u, v, slot, true);
                    }
                    changed = true;
                }
            }
        }
        if !changed {
            return Ok(());
        }
    }
    let role = params
        .planted
        .iter()
        .find(|r| {
            Slot::ALL
                .into_iter()
                .zip(r.targets())
                .any(|(s, t)| t.is_some_and(|t| adj.count(r.node, s) != t))
        })
        .expect("some target unmet");
    Err(Error::InfeasibleTarget {
        node: role.node as usize,
        message: "planted targets conflict with each other".into(),
    })
}

/// Directed SBM: every ordered pair of distinct nodes gets an arc with
/// probability `p_in` inside a block and `p_out` across blocks, then planted
/// nodes are rewired onto their degree targets. Nodes `0..block_size` form
/// block 0, and so on.
pub fn synth_generate(params: &SynthParams) -> Result<SynthNetwork> {
    params.validate()?;
    let (b, s) = (params.blocks, params.block_size);
    let n = b * s;
    let block_of: Vec<u32> = (0..n).map(|u| (u / s) as u32).collect();
    let mut rng = stream_rng(params.seed, SYNTH);

    let mut arcs: Vec<(u32, u32)> = Vec::new();
    for a in 0..b {
        for c in 0..b {
            let p = if a == c { params.p_in } else { params.p_out };
            let (ra, rc) = ((a * s) as u32, (c * s) as u32);
            sample_pairs(&mut rng, s, s, p, a == c, |i, j| {
                arcs.push((ra + i as u32, rc + j as u32));
            });
        }
    }

    let mut planted = Vec::new();
    if !params.planted.is_empty() {
        let mut adj = Adjacency {
            out: vec![BTreeSet::new(); n],
            inc: vec![BTreeSet::new(); n],
            block_of: &block_of,
        };
        for &(u, v) in &arcs {
            adj.out[u as usize].insert(v);
            adj.inc[v as usize].insert(u);
        }
        plant(&mut adj, params, &mut rng)?;
        arcs = adj
            .out
            .iter()
            .enumerate()
            .flat_map(|(u, vs)| vs.iter().map(move |&v| (u as u32, v)))
            .collect();
        for role in &params.planted {
            planted.push(PlantedReport {
                role: role.clone(),
                achieved: Slot::ALL.map(|slot| adj.count(role.node, slot)),
            });
        }
    }
    arcs.sort_unstable();
    Ok(SynthNetwork {
        node_count: n,
        arcs,
        block_of,
        planted,
    })
}

impl SynthNetwork {
    pub fn graph(&self) -> DirectedGraph {
        DirectedGraph::from_arcs(
            0..self.node_count as u64,
            self.arcs.iter().map(|&(u, v)| (u as u64, v as u64)),
        )
        .0
    }

    pub fn partition(&self) -> Partition {
        Partition::from_labels(&self.block_of)
    }

    /// `follower followee` lines. Nodes without any arc appear as a
    /// self-pair so that loading keeps them.
    pub fn write_edge_list<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let mut touched = vec![false; self.node_count];
        for &(u, v) in &self.arcs {
            touched[u as usize] = true;
            touched[v as usize] = true;
            writeln!(w, "{u} {v}")?;
        }
        for (u, _) in touched.iter().enumerate().filter(|(_, t)| !**t) {
            writeln!(w, "{u} {u}")?;
        }
        w.flush()
    }

    pub fn write_partition<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for (u, b) in self.block_of.iter().enumerate() {
            writeln!(w, "{u} {b}")?;
        }
        w.flush()
    }

    pub fn write_planted<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "node,label,target_int_in,target_int_out,target_ext_in,target_ext_out,int_in,int_out,ext_in,ext_out"
        )?;
        for p in &self.planted {
            write!(w, "{},{}", p.role.node, p.role.label)?;
            for t in p.role.targets() {
                match t {
                    Some(t) => write!(w, ",{t}")?,
                    None => write!(w, ",")?,
                }
            }
            for a in p.achieved {
                write!(w, ",{a}")?;
            }
            writeln!(w)?;
        }
        w.flush()
    }

    /// Writes `edges.txt`, `truth.txt` and `planted.csv` into `dir`.
    pub fn write_to_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let write = |name: &str, f: &dyn Fn(BufWriter<File>) -> std::io::Result<()>| {
            let path = dir.join(name);
            let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
            f(BufWriter::new(file)).map_err(|e| Error::io(&path, e))
        };
        write("edges.txt", &|w| self.write_edge_list(w))?;
        write("truth.txt", &|w| self.write_partition(w))?;
        write("planted.csv", &|w| self.write_planted(w))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::community::read_partition;
    use crate::graph::{load_edge_list, Convention};

    #[test]
    fn extreme_probabilities() {
        let net = synth_generate(&SynthParams {
            blocks: 2,
            block_size: 3,
            p_in: 1.0,
            p_out: 0.0,
            ..Default::default()
        })
        .unwrap();
        assert_eq!(net.arcs.len(), 12);
        assert!(net.arcs.iter().all(|&(u, v)| u / 3 == v / 3 && u != v));
    }

    #[test]
    fn deterministic_given_seed() {
        let params = SynthParams {
            seed: 9,
            planted: vec![PlantedRole::hub(3, 30)],
            ..Default::default()
        };
        let a = synth_generate(&params).unwrap();
        let b = synth_generate(&params).unwrap();
        assert_eq!(a, b);
        let c = synth_generate(&SynthParams { seed: 10, ..params }).unwrap();
        assert_ne!(a.arcs, c.arcs);
    }

    #[test]
    fn density_matches_probabilities() {
        let params = SynthParams {
            blocks: 4,
            block_size: 100,
            p_in: 0.2,
            p_out: 0.01,
            ..Default::default()
        };
        let net = synth_generate(&params).unwrap();
        let internal = net
            .arcs
            .iter()
            .filter(|&&(u, v)| u / 100 == v / 100)
            .count() as f64;
        let external = net.arcs.len() as f64 - internal;
        let (pairs_in, pairs_out) = (4.0 * 100.0 * 99.0, 400.0 * 300.0);
        assert!((internal / pairs_in - 0.2).abs() < 0.01);
        assert!((external / pairs_out - 0.01).abs() < 0.002);
    }

    #[test]
    fn planted_hub_hits_target() {
        let mut role = PlantedRole::hub(10, 0);
        role.int_in = None;
        role.int_out = Some(40);
        let net = synth_generate(&SynthParams {
            planted: vec![role],
            ..Default::default()
        })
        .unwrap();
        assert_eq!(net.planted.len(), 1);
        assert_eq!(net.planted[0].achieved[1], 40);
        let g = net.graph();
        let u = g.node(10).unwrap();
        let internal = g
            .successors(u)
            .iter()
            .filter(|v| v.index() / 50 == 0)
            .count();
        assert_eq!(internal, 40);
    }

    #[test]
    fn several_planted_nodes_in_one_block() {
        let planted = vec![
            PlantedRole::hub(0, 45),
            PlantedRole::hub(1, 45),
            PlantedRole {
                node: 2,
                label: "loner".into(),
                int_in: Some(0),
                int_out: Some(0),
                ext_in: Some(3),
                ext_out: Some(0),
            },
        ];
        let net = synth_generate(&SynthParams {
            planted: planted.clone(),
            seed: 4,
            ..Default::default()
        })
        .unwrap();
        for (report, role) in net.planted.iter().zip(&planted) {
            for (got, want) in report.achieved.iter().zip(role.targets()) {
                if let Some(want) = want {
                    assert_eq!(*got, want, "node {}", role.node);
                }
            }
        }
    }

    #[test]
    fn infeasible_targets() {
        let err = synth_generate(&SynthParams {
            planted: vec![PlantedRole::hub(0, 50)],
            ..Default::default()
        })
        .unwrap_err();
        assert!(matches!(err, Error::InfeasibleTarget { node: 0, .. }));
        assert!(synth_generate(&SynthParams {
            p_in: 0.1,
            p_out: 0.1,
            ..Default::default()
        })
        .is_err());
        assert!(synth_generate(&SynthParams {
            blocks: 1,
            ..Default::default()
        })
        .is_err());
    }

    #[test]
    fn files_round_trip() {
        let net = synth_generate(&SynthParams {
            blocks: 3,
            block_size: 5,
            p_in: 0.2,
            p_out: 0.0,
            seed: 1,
            ..Default::default()
        })
        .unwrap();
        let mut edges = Vec::new();
        net.write_edge_list(&mut edges).unwrap();
        let (g, _) = load_edge_list(edges.as_slice(), Convention::SrcFollowsDst).unwrap();
        assert_eq!(g.node_count(), 15);
        assert_eq!(g.arc_count(), net.arcs.len());
        let mut truth = Vec::new();
        net.write_partition(&mut truth).unwrap();
        let p = read_partition(truth.as_slice(), &g).unwrap();
        assert!(p.same_grouping(&net.partition()));
    }
}
