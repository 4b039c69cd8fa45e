//! Community z-scores, participation coefficients and the eight role
//! measures.
//!
//! Every role measure is the z-score of a per-node base quantity relative to
//! the node's own community:
//!
//! | measure | base quantity                                              |
//! |---------|------------------------------------------------------------|
//! | `I_int` | internal degree                                            |
//! | `I_ext` | external degree                                            |
//! | `D`     | number of distinct other communities linked to             |
//! | `H`     | std. deviation of the per-community external link counts   |
//!
//! each computed separately on in-links and out-links.

use std::fmt;
use std::io::{BufRead, Write};
use std::ops::Index;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{community_profile, DirectedGraph, NodeId, Partition};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Measure {
    IntIn,
    IntOut,
    ExtIn,
    ExtOut,
    DivIn,
    DivOut,
    HetIn,
    HetOut,
}

impl Measure {
    /// Column order used by every measure table.
    pub const ALL: [Measure; 8] = [
        Measure::IntIn,
        Measure::IntOut,
        Measure::ExtIn,
        Measure::ExtOut,
        Measure::DivIn,
        Measure::DivOut,
        Measure::HetIn,
        Measure::HetOut,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Measure::IntIn => "I_int_in",
            Measure::IntOut => "I_int_out",
            Measure::ExtIn => "I_ext_in",
            Measure::ExtOut => "I_ext_out",
            Measure::DivIn => "D_in",
            Measure::DivOut => "D_out",
            Measure::HetIn => "H_in",
            Measure::HetOut => "H_out",
        }
    }

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The eight z-scored role measures of one node, in [`Measure::ALL`] order.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MeasureVector(pub [f64; 8]);

impl Index<Measure> for MeasureVector {
    type Output = f64;

    fn index(&self, m: Measure) -> &f64 {
        &self.0[m.index()]
    }
}

/// Per-node quantities before standardisation.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RawFeatures {
    pub d_int_in: u32,
    pub d_int_out: u32,
    pub d_ext_in: u32,
    pub d_ext_out: u32,
    pub eps_in: u32,
    pub eps_out: u32,
    pub lambda_in: f64,
    pub lambda_out: f64,
}

impl RawFeatures {
    pub const HEADER: [&'static str; 8] = [
        "d_int_in",
        "d_int_out",
        "d_ext_in",
        "d_ext_out",
        "eps_in",
        "eps_out",
        "lambda_in",
        "lambda_out",
    ];

    /// The base quantity standardised into measure `m`.
    pub fn base(&self, m: Measure) -> f64 {
        match m {
            Measure::IntIn => self.d_int_in as f64,
            Measure::IntOut => self.d_int_out as f64,
            Measure::ExtIn => self.d_ext_in as f64,
            Measure::ExtOut => self.d_ext_out as f64,
            Measure::DivIn => self.eps_in as f64,
            Measure::DivOut => self.eps_out as f64,
            Measure::HetIn => self.lambda_in,
            Measure::HetOut => self.lambda_out,
        }
    }
}

/// Mean and population standard deviation of one quantity per community.
#[derive(Clone, Debug, PartialEq)]
pub struct CommunityStats {
    pub mean: Vec<f64>,
    pub std_dev: Vec<f64>,
    /// All members share exactly the same value (includes singletons).
    pub degenerate: Vec<bool>,
}

impl CommunityStats {
    pub fn compute(values: &[f64], p: &Partition) -> Result<Self> {
        if values.len() != p.node_count() {
            return Err(Error::SizeMismatch {
                what: "values",
                expected: p.node_count(),
                found: values.len(),
            });
        }
        let c = p.community_count();
        let mut stats = CommunityStats {
            mean: Vec::with_capacity(c),
            std_dev: Vec::with_capacity(c),
            degenerate: Vec::with_capacity(c),
        };
        for community in p.communities() {
            let members = p.members(community);
            let n = members.len() as f64;
            let first = values[members[0].index()];
            let constant = members.iter().all(|u| values[u.index()] == first);
            let mean = members.iter().map(|u| values[u.index()]).sum::<f64>() / n;
            let var = members
                .iter()
                .map(|u| {
                    let d = values[u.index()] - mean;
                    d * d
                })
                .sum::<f64>()
                / n;
            stats.mean.push(mean);
            stats.std_dev.push(var.sqrt());
            stats.degenerate.push(constant);
        }
        Ok(stats)
    }
}

/// z-score of `values` relative to each node's community. Nodes of a
/// community whose members all share one value (singletons included) get 0.
pub fn community_zscore(values: &[f64], p: &Partition) -> Result<Vec<f64>> {
    let stats = CommunityStats::compute(values, p)?;
    Ok(values
        .iter()
        .zip(p.assignment())
        .map(|(&x, c)| {
            let c = c.index();
            if stats.degenerate[c] {
                0.0
            } else {
                (x - stats.mean[c]) / stats.std_dev[c]
            }
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParticipationMode {
    /// Over the underlying undirected graph.
    Undirected,
    In,
    Out,
}

impl ParticipationMode {
    pub const ALL: [ParticipationMode; 3] = [
        ParticipationMode::Undirected,
        ParticipationMode::In,
        ParticipationMode::Out,
    ];
}

/// `1 - Σ_i (d_i / d)^2` from per-community link counts, own community
/// included. Zero for a node without links.
pub fn participation_from_counts(counts: impl IntoIterator<Item = usize>) -> f64 {
    let mut d: u64 = 0;
    let mut squares: u64 = 0;
    for k in counts {
        d += k as u64;
        squares += (k as u64) * (k as u64);
    }
    if d == 0 {
        return 0.0;
    }
    let total = d * d;
    (total - squares) as f64 / total as f64
}

fn mode_neighbors(
    g: &DirectedGraph,
    u: NodeId,
    mode: ParticipationMode,
) -> std::borrow::Cow<'_, [NodeId]> {
    match mode {
        ParticipationMode::Undirected => g.undirected_neighbors(u).into(),
        ParticipationMode::In => g.predecessors(u).into(),
        ParticipationMode::Out => g.successors(u).into(),
    }
}

pub fn participation(
    g: &DirectedGraph,
    p: &Partition,
    u: NodeId,
    mode: ParticipationMode,
) -> Result<f64> {
    check(g, p)?;
    let u = g.check(u)?;
    let mut scratch = Vec::new();
    let profile = community_profile(&mode_neighbors(g, u, mode), p, &mut scratch);
    Ok(participation_from_counts(
        profile.into_iter().map(|(_, k)| k),
    ))
}

/// Participation coefficient of every node.
pub fn participation_all(
    g: &DirectedGraph,
    p: &Partition,
    mode: ParticipationMode,
) -> Result<Vec<f64>> {
    check(g, p)?;
    Ok((0..g.node_count())
        .into_par_iter()
        .map_init(Vec::new, |scratch, i| {
            let profile = community_profile(&mode_neighbors(g, NodeId(i as u32), mode), p, scratch);
            participation_from_counts(profile.into_iter().map(|(_, k)| k))
        })
        .collect())
}

/// Within-module degree: community z-score of the internal degree counted
/// in the given mode.
pub fn within_module_degree(
    g: &DirectedGraph,
    p: &Partition,
    mode: ParticipationMode,
) -> Result<Vec<f64>> {
    check(g, p)?;
    let internal: Vec<f64> = g
        .nodes()
        .map(|u| {
            let own = p.community_of(u);
            mode_neighbors(g, u, mode)
                .iter()
                .filter(|&&v| p.community_of(v) == own)
                .count() as f64
        })
        .collect();
    community_zscore(&internal, p)
}

fn check(g: &DirectedGraph, p: &Partition) -> Result<()> {
    if g.node_count() != p.node_count() {
        return Err(Error::SizeMismatch {
            what: "partition",
            expected: g.node_count(),
            found: p.node_count(),
        });
    }
    Ok(())
}

/// Population standard deviation of integer counts.
fn count_std_dev(counts: &[u64]) -> f64 {
    let n = counts.len() as u64;
    if n <= 1 {
        return 0.0;
    }
    let sum: u64 = counts.iter().sum();
    let squares: u64 = counts.iter().map(|k| k * k).sum();
    // n * Σx² - (Σx)² is exact in integers
    let numerator = (n * squares - sum * sum) as f64;
    (numerator / (n * n) as f64).sqrt()
}

/// `(d_int, d_ext, ε, λ)` for one node and direction.
fn direction_features(
    neighbors: &[NodeId],
    own: crate::graph::CommunityId,
    p: &Partition,
    scratch: &mut Vec<crate::graph::CommunityId>,
    external: &mut Vec<u64>,
) -> (u32, u32, u32, f64) {
    let profile = community_profile(neighbors, p, scratch);
    external.clear();
    let mut internal = 0;
    for (c, k) in profile {
        if c == own {
            internal = k;
        } else {
            external.push(k as u64);
        }
    }
    let d_ext = neighbors.len() - internal;
    (
        internal as u32,
        d_ext as u32,
        external.len() as u32,
        count_std_dev(external),
    )
}

pub fn raw_features(g: &DirectedGraph, p: &Partition) -> Result<Vec<RawFeatures>> {
    check(g, p)?;
    Ok((0..g.node_count())
        .into_par_iter()
        .map_init(
            || (Vec::new(), Vec::new()),
            |(scratch, external), i| {
                let u = NodeId(i as u32);
                let own = p.community_of(u);
                let (d_int_in, d_ext_in, eps_in, lambda_in) =
                    direction_features(g.predecessors(u), own, p, scratch, external);
                let (d_int_out, d_ext_out, eps_out, lambda_out) =
                    direction_features(g.successors(u), own, p, scratch, external);
                RawFeatures {
                    d_int_in,
                    d_int_out,
                    d_ext_in,
                    d_ext_out,
                    eps_in,
                    eps_out,
                    lambda_in,
                    lambda_out,
                }
            },
        )
        .collect())
}

/// Standardises each base quantity within communities.
pub fn measure_vectors(raw: &[RawFeatures], p: &Partition) -> Result<Vec<MeasureVector>> {
    if raw.len() != p.node_count() {
        return Err(Error::SizeMismatch {
            what: "raw features",
            expected: p.node_count(),
            found: raw.len(),
        });
    }
    let columns: Vec<Vec<f64>> = Measure::ALL
        .par_iter()
        .map(|&m| {
            let base: Vec<f64> = raw.iter().map(|r| r.base(m)).collect();
            community_zscore(&base, p)
        })
        .collect::<Result<_>>()?;
    Ok((0..raw.len())
        .map(|i| MeasureVector(std::array::from_fn(|m| columns[m][i])))
        .collect())
}

/// Pearson correlation; `None` when either side has zero variance or fewer
/// than two values.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    assert_eq!(x.len(), y.len());
    let n = x.len();
    if n < 2 {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Pairwise Pearson correlations between the eight measures.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationMatrix(pub [[Option<f64>; 8]; 8]);

impl CorrelationMatrix {
    pub fn get(&self, a: Measure, b: Measure) -> Option<f64> {
        self.0[a.index()][b.index()]
    }

    /// CSV with measure names on both axes; undefined entries read `NA`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(w, "measure")?;
        for m in Measure::ALL {
            write!(w, ",{m}")?;
        }
        writeln!(w)?;
        for a in Measure::ALL {
            write!(w, "{a}")?;
            for b in Measure::ALL {
                match self.get(a, b) {
                    Some(r) => write!(w, ",{r}")?,
                    None => write!(w, ",NA")?,
                }
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

pub fn correlation_matrix(vectors: &[MeasureVector]) -> Result<CorrelationMatrix> {
    if vectors.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "correlation needs at least 2 nodes, got {}",
            vectors.len()
        )));
    }
    let columns: Vec<Vec<f64>> = Measure::ALL
        .iter()
        .map(|&m| vectors.iter().map(|v| v[m]).collect())
        .collect();
    let mut out = [[None; 8]; 8];
    for a in 0..8 {
        for b in a..8 {
            let r = if a == b {
                pearson(&columns[a], &columns[a]).map(|_| 1.0)
            } else {
                pearson(&columns[a], &columns[b])
            };
            out[a][b] = r;
            out[b][a] = r;
        }
    }
    Ok(CorrelationMatrix(out))
}

pub fn write_measures_csv<W: Write>(
    mut w: W,
    g: &DirectedGraph,
    vectors: &[MeasureVector],
) -> std::io::Result<()> {
    write!(w, "node")?;
    for m in Measure::ALL {
        write!(w, ",{m}")?;
    }
    writeln!(w)?;
    for (u, v) in g.nodes().zip(vectors) {
        write!(w, "{}", g.external_id(u))?;
        for x in v.0 {
            write!(w, ",{x}")?;
        }
        writeln!(w)?;
    }
    w.flush()
}

pub fn write_raw_csv<W: Write>(
    mut w: W,
    g: &DirectedGraph,
    raw: &[RawFeatures],
) -> std::io::Result<()> {
    writeln!(w, "node,{}", RawFeatures::HEADER.join(","))?;
    for (u, r) in g.nodes().zip(raw) {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            g.external_id(u),
            r.d_int_in,
            r.d_int_out,
            r.d_ext_in,
            r.d_ext_out,
            r.eps_in,
            r.eps_out,
            r.lambda_in,
            r.lambda_out
        )?;
    }
    w.flush()
}

/// Parses a table written by [`write_measures_csv`].
pub fn read_measures_csv<R: BufRead>(reader: R) -> Result<Vec<(u64, MeasureVector)>> {
    let expected: Vec<&str> = std::iter::once("node")
        .chain(Measure::ALL.iter().map(|m| m.name()))
        .collect();
    let mut rows = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<measures>", e))?;
        let lineno = i + 1;
        let fields: Vec<&str> = line.trim().split(',').collect();
        if lineno == 1 {
            if fields != expected {
                return Err(Error::Parse {
                    line: 1,
                    message: format!("expected header `{}`", expected.join(",")),
                });
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        if fields.len() != 9 {
            return Err(Error::Parse {
                line: lineno,
                message: format!("expected 9 fields, found {}", fields.len()),
            });
        }
        let node = fields[0].parse::<u64>().map_err(|e| Error::Parse {
            line: lineno,
            message: format!("invalid node id: {e}"),
        })?;
        let mut v = [0.0; 8];
        for (slot, field) in v.iter_mut().zip(&fields[1..]) {
            *slot = field.parse::<f64>().map_err(|e| Error::Parse {
                line: lineno,
                message: format!("invalid value `{field}`: {e}"),
            })?;
        }
        rows.push((node, MeasureVector(v)));
    }
    Ok(rows)
}
