//! Directed graph storage, edge-list ingestion and the degree primitives
//! every role measure is built from.

use std::fmt;
use std::io::BufRead;

use log::warn;

use crate::error::{Error, Result};

/// Dense internal node index in `[0, n)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[repr(transparent)]
pub struct NodeId(pub u32);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl From<usize> for NodeId {
    fn from(i: usize) -> Self {
        NodeId(i as u32)
    }
}

/// Dense community index in `[0, c)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[repr(transparent)]
pub struct CommunityId(pub u32);

impl CommunityId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for CommunityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "C{}", self.0)
    }
}

/// How a line `a b` of an edge list maps onto a follow arc.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Convention {
    /// `a b` means `a` follows `b`: arc `a -> b`.
    #[default]
    SrcFollowsDst,
    /// `a b` means `b` follows `a` ("user follower" dumps): arc `b -> a`.
    DstFollowsSrc,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    In,
    Out,
}

impl Direction {
    pub const BOTH: [Direction; 2] = [Direction::In, Direction::Out];
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DegreeKind {
    In,
    Out,
    Total,
}

impl From<Direction> for DegreeKind {
    fn from(dir: Direction) -> Self {
        match dir {
            Direction::In => DegreeKind::In,
            Direction::Out => DegreeKind::Out,
        }
    }
}

/// What the loader had to discard while building a simple graph.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct LoadStats {
    pub lines: usize,
    pub duplicates: usize,
    pub self_loops: usize,
}

/// Immutable simple directed graph in compressed sparse row form, with both
/// successor and predecessor lists sorted by internal id.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DirectedGraph {
    external: Vec<u64>,
    out_offsets: Vec<usize>,
    out_targets: Vec<NodeId>,
    in_offsets: Vec<usize>,
    in_sources: Vec<NodeId>,
}

impl DirectedGraph {
    /// Builds a graph over `nodes` plus every arc endpoint. Self-loops are
    /// dropped and repeated arcs collapsed; both are counted in the stats.
    pub fn from_arcs<N, A>(nodes: N, arcs: A) -> (Self, LoadStats)
    where
        N: IntoIterator<Item = u64>,
        A: IntoIterator<Item = (u64, u64)>,
    {
        let arcs: Vec<(u64, u64)> = arcs.into_iter().collect();
        let mut external: Vec<u64> = nodes.into_iter().collect();
        external.reserve(arcs.len() * 2);
        for &(u, v) in &arcs {
            external.push(u);
            external.push(v);
        }
        external.sort_unstable();
        external.dedup();

        let mut stats = LoadStats {
            lines: arcs.len(),
            ..LoadStats::default()
        };
        let lookup = |x: u64| external.binary_search(&x).unwrap() as u32;
        let mut internal: Vec<(u32, u32)> = Vec::with_capacity(arcs.len());
        for (u, v) in arcs {
            if u == v {
                stats.self_loops += 1;
                continue;
            }
            internal.push((lookup(u), lookup(v)));
        }
        internal.sort_unstable();
        let before = internal.len();
        internal.dedup();
        stats.duplicates = before - internal.len();

        (Self::from_sorted_internal(external, &internal), stats)
    }

    fn from_sorted_internal(external: Vec<u64>, arcs: &[(u32, u32)]) -> Self {
        let n = external.len();
        let mut out_offsets = vec![0usize; n + 1];
        let mut in_offsets = vec![0usize; n + 1];
        for &(u, v) in arcs {
            out_offsets[u as usize + 1] += 1;
            in_offsets[v as usize + 1] += 1;
        }
        for i in 0..n {
            out_offsets[i + 1] += out_offsets[i];
            in_offsets[i + 1] += in_offsets[i];
        }
        let out_targets = arcs.iter().map(|&(_, v)| NodeId(v)).collect();
        // arcs are sorted by source, so filling predecessor slots in arc order
        // keeps every predecessor list sorted
        let mut cursor = in_offsets.clone();
        let mut in_sources = vec![NodeId(0); arcs.len()];
        for &(u, v) in arcs {
            in_sources[cursor[v as usize]] = NodeId(u);
            cursor[v as usize] += 1;
        }
        DirectedGraph {
            external,
            out_offsets,
            out_targets,
            in_offsets,
            in_sources,
        }
    }

    #[inline]
    pub fn node_count(&self) -> usize {
        self.external.len()
    }

    #[inline]
    pub fn arc_count(&self) -> usize {
        self.out_targets.len()
    }

    pub fn nodes(&self) -> impl ExactSizeIterator<Item = NodeId> {
        (0..self.node_count() as u32).map(NodeId)
    }

    /// Every arc as `(source, target)`, ordered by source then target.
    pub fn arcs(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.nodes()
            .flat_map(move |u| self.successors(u).iter().map(move |&v| (u, v)))
    }

    /// Sorted original ids; position `i` holds the id of `NodeId(i)`.
    pub fn external_ids(&self) -> &[u64] {
        &self.external
    }

    #[inline]
    pub fn external_id(&self, u: NodeId) -> u64 {
        self.external[u.index()]
    }

    pub fn node(&self, external: u64) -> Result<NodeId> {
        self.external
            .binary_search(&external)
            .map(|i| NodeId(i as u32))
            .map_err(|_| Error::UnknownNode(external))
    }

    pub fn check(&self, u: NodeId) -> Result<NodeId> {
        if u.index() < self.node_count() {
            Ok(u)
        } else {
            Err(Error::InvalidNodeIndex(u.index()))
        }
    }

    #[inline]
    pub fn successors(&self, u: NodeId) -> &[NodeId] {
        let i = u.index();
        &self.out_targets[self.out_offsets[i]..self.out_offsets[i + 1]]
    }

    #[inline]
    pub fn predecessors(&self, u: NodeId) -> &[NodeId] {
        let i = u.index();
        &self.in_sources[self.in_offsets[i]..self.in_offsets[i + 1]]
    }

    #[inline]
    pub fn neighbors(&self, u: NodeId, dir: Direction) -> &[NodeId] {
        match dir {
            Direction::In => self.predecessors(u),
            Direction::Out => self.successors(u),
        }
    }

    #[inline]
    pub fn out_degree(&self, u: NodeId) -> usize {
        self.successors(u).len()
    }

    #[inline]
    pub fn in_degree(&self, u: NodeId) -> usize {
        self.predecessors(u).len()
    }

    pub fn degree(&self, u: NodeId, kind: DegreeKind) -> Result<usize> {
        let u = self.check(u)?;
        Ok(match kind {
            DegreeKind::In => self.in_degree(u),
            DegreeKind::Out => self.out_degree(u),
            DegreeKind::Total => self.in_degree(u) + self.out_degree(u),
        })
    }

    pub fn contains_arc(&self, u: NodeId, v: NodeId) -> bool {
        self.successors(u).binary_search(&v).is_ok()
    }

    /// Neighbours in the underlying undirected simple graph: the sorted union
    /// of predecessors and successors, so a reciprocal pair counts once.
    pub fn undirected_neighbors(&self, u: NodeId) -> Vec<NodeId> {
        let (a, b) = (self.predecessors(u), self.successors(u));
        let mut merged = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => {
                    merged.push(a[i]);
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    merged.push(b[j]);
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    merged.push(a[i]);
                    i += 1;
                    j += 1;
                }
            }
        }
        merged.extend_from_slice(&a[i..]);
        merged.extend_from_slice(&b[j..]);
        merged
    }

    /// Full scan checking that the predecessor lists are exactly the
    /// transpose of the successor lists.
    pub fn is_transpose_consistent(&self) -> bool {
        let mut seen = vec![0usize; self.node_count()];
        for (u, v) in self.arcs() {
            if self.predecessors(v).binary_search(&u).is_err() {
                return false;
            }
            seen[v.index()] += 1;
        }
        self.nodes().all(|v| seen[v.index()] == self.in_degree(v))
    }
}

/// Parses one `a b` line. Returns `None` for blank and `#` comment lines.
pub(crate) fn parse_pair(line: &str, lineno: usize) -> Result<Option<(u64, u64)>> {
    let trimmed = line.trim();
    if trimmed.is_empty() || trimmed.starts_with('#') {
        return Ok(None);
    }
    let mut tokens = trimmed.split_whitespace();
    let parse = |tok: Option<&str>| -> Result<u64> {
        let tok = tok.ok_or_else(|| Error::Parse {
            line: lineno,
            message: "expected two integer tokens".into(),
        })?;
        tok.parse::<u64>().map_err(|e| Error::Parse {
            line: lineno,
            message: format!("invalid integer `{tok}`: {e}"),
        })
    };
    let a = parse(tokens.next())?;
    let b = parse(tokens.next())?;
    if tokens.next().is_some() {
        return Err(Error::Parse {
            line: lineno,
            message: "expected exactly two tokens".into(),
        });
    }
    Ok(Some((a, b)))
}

/// Reads a whitespace-separated edge list. Node ids are re-indexed densely in
/// ascending order of their original value, so the result does not depend on
/// line order.
pub fn load_edge_list<R: BufRead>(
    mut reader: R,
    convention: Convention,
) -> Result<(DirectedGraph, LoadStats)> {
    let mut arcs = Vec::new();
    let mut line = String::new();
    let mut lineno = 0;
    loop {
        line.clear();
        let read = reader
            .read_line(&mut line)
            .map_err(|e| Error::io("<edge list>", e))?;
        if read == 0 {
            break;
        }
        lineno += 1;
        if let Some((a, b)) = parse_pair(&line, lineno)? {
            arcs.push(match convention {
                Convention::SrcFollowsDst => (a, b),
                Convention::DstFollowsSrc => (b, a),
            });
        }
    }
    let (graph, mut stats) = DirectedGraph::from_arcs(std::iter::empty(), arcs);
    stats.lines = lineno;
    if stats.self_loops > 0 {
        warn!("dropped {} self-loop(s)", stats.self_loops);
    }
    if stats.duplicates > 0 {
        warn!("collapsed {} duplicate arc(s)", stats.duplicates);
    }
    Ok((graph, stats))
}

/// Node to community assignment over dense indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition {
    assignment: Vec<CommunityId>,
    members: Vec<Vec<NodeId>>,
}

impl Partition {
    /// Every node in its own community.
    pub fn singletons(n: usize) -> Self {
        Self::from_dense((0..n as u32).map(CommunityId).collect())
    }

    /// Densifies arbitrary labels to `[0, c)` in ascending label order,
    /// preserving the grouping.
    pub fn from_labels<L: Ord + Copy>(labels: &[L]) -> Self {
        let mut distinct: Vec<L> = labels.to_vec();
        distinct.sort_unstable();
        distinct.dedup();
        let assignment = labels
            .iter()
            .map(|l| CommunityId(distinct.binary_search(l).unwrap() as u32))
            .collect();
        Self::from_dense(assignment)
    }

    /// Renumbers communities in order of first appearance along node order.
    pub fn canonical(labels: &[usize]) -> Self {
        let mut map = std::collections::HashMap::new();
        let assignment = labels
            .iter()
            .map(|&l| {
                let next = map.len() as u32;
                CommunityId(*map.entry(l).or_insert(next))
            })
            .collect();
        Self::from_dense(assignment)
    }

    fn from_dense(assignment: Vec<CommunityId>) -> Self {
        let count = assignment.iter().map(|c| c.index() + 1).max().unwrap_or(0);
        let mut members = vec![Vec::new(); count];
        for (u, c) in assignment.iter().enumerate() {
            members[c.index()].push(NodeId(u as u32));
        }
        debug_assert!(members.iter().all(|m| !m.is_empty()));
        Partition {
            assignment,
            members,
        }
    }

    #[inline]
    pub fn node_count(&self) -> usize {
        self.assignment.len()
    }

    #[inline]
    pub fn community_count(&self) -> usize {
        self.members.len()
    }

    #[inline]
    pub fn community_of(&self, u: NodeId) -> CommunityId {
        self.assignment[u.index()]
    }

    pub fn assignment(&self) -> &[CommunityId] {
        &self.assignment
    }

    pub fn members(&self, c: CommunityId) -> &[NodeId] {
        &self.members[c.index()]
    }

    pub fn communities(&self) -> impl ExactSizeIterator<Item = CommunityId> {
        (0..self.community_count() as u32).map(CommunityId)
    }

    pub fn check_community(&self, c: CommunityId) -> Result<CommunityId> {
        if c.index() < self.community_count() {
            Ok(c)
        } else {
            Err(Error::InvalidCommunity {
                index: c.index(),
                count: self.community_count(),
            })
        }
    }

    /// Same grouping, regardless of community numbering.
    pub fn same_grouping(&self, other: &Partition) -> bool {
        let relabel = |p: &Partition| {
            Partition::canonical(&p.assignment.iter().map(|c| c.index()).collect::<Vec<_>>())
        };
        relabel(self) == relabel(other)
    }
}

fn check_sizes(g: &DirectedGraph, p: &Partition) -> Result<()> {
    if g.node_count() != p.node_count() {
        return Err(Error::SizeMismatch {
            what: "partition",
            expected: g.node_count(),
            found: p.node_count(),
        });
    }
    Ok(())
}

/// Number of arcs between `u` and members of community `c` in direction
/// `dir` (`Out`: `u -> v`, `In`: `v -> u`).
pub fn community_degree(
    g: &DirectedGraph,
    p: &Partition,
    u: NodeId,
    c: CommunityId,
    dir: Direction,
) -> Result<usize> {
    check_sizes(g, p)?;
    let u = g.check(u)?;
    let c = p.check_community(c)?;
    Ok(g.neighbors(u, dir)
        .iter()
        .filter(|&&v| p.community_of(v) == c)
        .count())
}

/// `(internal, external)` split of the degree in direction `dir`.
pub fn degree_split(
    g: &DirectedGraph,
    p: &Partition,
    u: NodeId,
    dir: Direction,
) -> Result<(usize, usize)> {
    check_sizes(g, p)?;
    let u = g.check(u)?;
    let own = p.community_of(u);
    let neighbors = g.neighbors(u, dir);
    let internal = neighbors
        .iter()
        .filter(|&&v| p.community_of(v) == own)
        .count();
    Ok((internal, neighbors.len() - internal))
}

/// Per-community arc counts over the communities other than `u`'s own that
/// `u` touches in direction `dir`, sorted by community.
pub fn external_community_profile(
    g: &DirectedGraph,
    p: &Partition,
    u: NodeId,
    dir: Direction,
) -> Result<Vec<(CommunityId, usize)>> {
    check_sizes(g, p)?;
    let u = g.check(u)?;
    let own = p.community_of(u);
    let mut scratch = Vec::new();
    Ok(community_profile(g.neighbors(u, dir), p, &mut scratch)
        .into_iter()
        .filter(|&(c, _)| c != own)
        .collect())
}

/// Run-length counts of the communities of `neighbors`, sorted by community.
/// `scratch` is reused between calls to avoid reallocating.
pub(crate) fn community_profile(
    neighbors: &[NodeId],
    p: &Partition,
    scratch: &mut Vec<CommunityId>,
) -> Vec<(CommunityId, usize)> {
    scratch.clear();
    scratch.extend(neighbors.iter().map(|&v| p.community_of(v)));
    scratch.sort_unstable();
    let mut out: Vec<(CommunityId, usize)> = Vec::new();
    for &c in scratch.iter() {
        match out.last_mut() {
            Some((last, n)) if *last == c => *n += 1,
            _ => out.push((c, 1)),
        }
    }
    out
}
