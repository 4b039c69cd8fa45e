//! From clusters to roles: the classic threshold taxonomy as a baseline,
//! descriptive labels for clusters, social-capitalist bands and crosstabs,
//! and the group-difference statistics.

use std::fmt;
use std::io::{BufRead, Write};

use log::warn;

use crate::error::{Error, Result};
use crate::measures::{Measure, MeasureVector};
use crate::stats::{bonferroni, one_way_anova, welch_t_test};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RoleLabel {
    UltraPeripheralNonHub,
    PeripheralNonHub,
    ConnectorNonHub,
    KinlessNonHub,
    ProvincialHub,
    ConnectorHub,
    KinlessHub,
}

impl RoleLabel {
    pub fn is_hub(self) -> bool {
        matches!(
            self,
            RoleLabel::ProvincialHub | RoleLabel::ConnectorHub | RoleLabel::KinlessHub
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            RoleLabel::UltraPeripheralNonHub => "ultra-peripheral non-hub",
            RoleLabel::PeripheralNonHub => "peripheral non-hub",
            RoleLabel::ConnectorNonHub => "connector non-hub",
            RoleLabel::KinlessNonHub => "kinless non-hub",
            RoleLabel::ProvincialHub => "provincial hub",
            RoleLabel::ConnectorHub => "connector hub",
            RoleLabel::KinlessHub => "kinless hub",
        }
    }
}

impl fmt::Display for RoleLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Cut points of the (within-module degree, participation) role plane.
#[derive(Clone, Debug, PartialEq)]
pub struct RoleThresholds {
    /// Hubs have `z >= hub_z`.
    pub hub_z: f64,
    /// Participation upper bounds of ultra-peripheral, peripheral and
    /// connector non-hubs; anything above is kinless.
    pub non_hub: [f64; 3],
    /// Participation upper bounds of provincial and connector hubs.
    pub hub: [f64; 2],
}

impl Default for RoleThresholds {
    fn default() -> Self {
        RoleThresholds {
            hub_z: 2.5,
            non_hub: [0.05, 0.62, 0.80],
            hub: [0.30, 0.75],
        }
    }
}

impl RoleThresholds {
    pub fn classify(&self, z: f64, p: f64) -> RoleLabel {
        if z >= self.hub_z {
            if p <= self.hub[0] {
                RoleLabel::ProvincialHub
            } else if p <= self.hub[1] {
                RoleLabel::ConnectorHub
            } else {
                RoleLabel::KinlessHub
            }
        } else if p <= self.non_hub[0] {
            RoleLabel::UltraPeripheralNonHub
        } else if p <= self.non_hub[1] {
            RoleLabel::PeripheralNonHub
        } else if p <= self.non_hub[2] {
            RoleLabel::ConnectorNonHub
        } else {
            RoleLabel::KinlessNonHub
        }
    }
}

/// Threshold classification of every node from its within-module degree
/// `z` and participation coefficient `p`.
pub fn ga_threshold_roles(
    z: &[f64],
    p: &[f64],
    thresholds: &RoleThresholds,
) -> Result<Vec<RoleLabel>> {
    if z.len() != p.len() {
        return Err(Error::SizeMismatch {
            what: "participation",
            expected: z.len(),
            found: p.len(),
        });
    }
    Ok(z.iter()
        .zip(p)
        .map(|(&z, &p)| thresholds.classify(z, p))
        .collect())
}

/// Size and mean measures of one cluster.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupProfile {
    pub cluster: usize,
    pub size: usize,
    pub proportion: f64,
    pub means: MeasureVector,
}

pub fn group_profiles(
    vectors: &[MeasureVector],
    assignment: &[usize],
) -> Result<Vec<GroupProfile>> {
    if vectors.len() != assignment.len() {
        return Err(Error::SizeMismatch {
            what: "assignment",
            expected: vectors.len(),
            found: assignment.len(),
        });
    }
    let k = assignment.iter().max().map_or(0, |&m| m + 1);
    let mut sums = vec![[0.0; 8]; k];
    let mut sizes = vec![0usize; k];
    for (v, &c) in vectors.iter().zip(assignment) {
        sizes[c] += 1;
        for (s, x) in sums[c].iter_mut().zip(v.0) {
            *s += x;
        }
    }
    let n = vectors.len() as f64;
    Ok((0..k)
        .map(|c| GroupProfile {
            cluster: c,
            size: sizes[c],
            proportion: sizes[c] as f64 / n,
            means: MeasureVector(if sizes[c] == 0 {
                [0.0; 8]
            } else {
                sums[c].map(|s| s / sizes[c] as f64)
            }),
        })
        .collect())
}

/// Descriptive role name of a cluster from its mean measures.
///
/// Hub when the larger internal intensity mean is at least 1. Negative mean
/// external intensity (averaged over both directions) makes a peripheral
/// node: ultra-peripheral when some diversity is below -0.5 and neither
/// exceeds 0.5, suffixed `(in)`/`(out)` when exactly one diversity exceeds
/// 0.5. Non-negative external intensity with a diversity of at least 1 makes
/// a connector, and all eight means at or above 5 a kinless hub.
pub fn label_profile(means: &MeasureVector) -> String {
    let hub = means[Measure::IntIn].max(means[Measure::IntOut]) >= 1.0;
    let ext = 0.5 * (means[Measure::ExtIn] + means[Measure::ExtOut]);
    let (d_in, d_out) = (means[Measure::DivIn], means[Measure::DivOut]);

    if hub {
        return if means.0.iter().all(|&m| m >= 5.0) {
            "kinless hub".into()
        } else if ext >= 0.0 && d_in.max(d_out) >= 1.0 {
            "connector hub".into()
        } else {
            "provincial hub".into()
        };
    }
    if ext < 0.0 {
        return match (d_in > 0.5, d_out > 0.5) {
            (true, false) => "non-hub peripheral (in)".into(),
            (false, true) => "non-hub peripheral (out)".into(),
            (false, false) if d_in.min(d_out) < -0.5 => "non-hub ultra-peripheral".into(),
            _ => "non-hub peripheral".into(),
        };
    }
    if d_in.max(d_out) >= 1.0 {
        "non-hub connector".into()
    } else {
        "non-hub peripheral".into()
    }
}

/// Labels follow the profiles, so permuting clusters permutes the labels.
pub fn label_clusters(profiles: &[GroupProfile]) -> Vec<String> {
    profiles.iter().map(|p| label_profile(&p.means)).collect()
}

/// `cluster,size,proportion,label,mean_I_int_in,...` table.
pub fn write_role_report<W: Write>(mut w: W, profiles: &[GroupProfile]) -> std::io::Result<()> {
    write!(w, "cluster,size,proportion,label")?;
    for m in Measure::ALL {
        write!(w, ",mean_{m}")?;
    }
    writeln!(w)?;
    for (p, label) in profiles.iter().zip(label_clusters(profiles)) {
        write!(w, "{},{},{},{}", p.cluster, p.size, p.proportion, label)?;
        for x in p.means.0 {
            write!(w, ",{x}")?;
        }
        writeln!(w)?;
    }
    w.flush()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DegreeBand {
    None,
    Low,
    High,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RatioBand {
    /// followees / followers < 0.7
    Below07,
    /// 0.7 <= ratio <= 1
    From07To1,
    /// ratio > 1, including nodes with followees but no followers
    Above1,
}

impl DegreeBand {
    pub fn name(self) -> &'static str {
        match self {
            DegreeBand::None => "none",
            DegreeBand::Low => "low",
            DegreeBand::High => "high",
        }
    }
}

impl RatioBand {
    pub const ALL: [RatioBand; 3] = [RatioBand::Below07, RatioBand::From07To1, RatioBand::Above1];

    pub fn name(self) -> &'static str {
        match self {
            RatioBand::Below07 => "lt_0_7",
            RatioBand::From07To1 => "0_7_to_1",
            RatioBand::Above1 => "gt_1",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct CapitalistCategory {
    pub degree_band: DegreeBand,
    /// `None` only for nodes without any arc.
    pub ratio_band: Option<RatioBand>,
}

/// Bands a node by follower count (in-degree) and by the followee/follower
/// ratio (out-degree over in-degree, arcs pointing from follower to
/// followee).
pub fn categorize_capitalist(in_degree: usize, out_degree: usize) -> CapitalistCategory {
    let degree_band = match in_degree {
        0..=499 => DegreeBand::None,
        500..=10_000 => DegreeBand::Low,
        _ => DegreeBand::High,
    };
    let (i, o) = (in_degree as u128, out_degree as u128);
    let ratio_band = if i == 0 && o == 0 {
        None
    } else if i == 0 || o > i {
        Some(RatioBand::Above1)
    } else if 10 * o < 7 * i {
        Some(RatioBand::Below07)
    } else {
        Some(RatioBand::From07To1)
    };
    CapitalistCategory {
        degree_band,
        ratio_band,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CrosstabRow {
    pub degree_band: DegreeBand,
    pub ratio_band: RatioBand,
    pub count: usize,
    /// Percentage of the category's nodes falling in each cluster.
    pub share_of_category: Vec<f64>,
    /// Percentage of each cluster's nodes that belong to the category.
    pub share_of_cluster: Vec<f64>,
}

impl CrosstabRow {
    pub fn is_empty(&self) -> bool {
        self.count == 0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Crosstab {
    pub cluster_sizes: Vec<usize>,
    pub rows: Vec<CrosstabRow>,
}

/// Distribution of capitalist categories over clusters. Nodes whose category
/// is `None` or whose degree band is `None` are not capitalists here.
pub fn crosstab(
    assignment: &[usize],
    categories: &[Option<CapitalistCategory>],
) -> Result<Crosstab> {
    if assignment.len() != categories.len() {
        return Err(Error::SizeMismatch {
            what: "categories",
            expected: assignment.len(),
            found: categories.len(),
        });
    }
    let k = assignment.iter().max().map_or(0, |&m| m + 1);
    let mut cluster_sizes = vec![0usize; k];
    for &c in assignment {
        cluster_sizes[c] += 1;
    }
    let mut rows = Vec::new();
    for degree_band in [DegreeBand::Low, DegreeBand::High] {
        for ratio_band in RatioBand::ALL {
            let mut counts = vec![0usize; k];
            for (&c, cat) in assignment.iter().zip(categories) {
                if let Some(cat) = cat {
                    if cat.degree_band == degree_band && cat.ratio_band == Some(ratio_band) {
                        counts[c] += 1;
                    }
                }
            }
            let count: usize = counts.iter().sum();
            if count == 0 {
                warn!(
                    "capitalist category ({}, {}) is empty",
                    degree_band.name(),
                    ratio_band.name()
                );
            }
            let share_of_category = counts
                .iter()
                .map(|&n| {
                    if count == 0 {
                        0.0
                    } else {
                        100.0 * n as f64 / count as f64
                    }
                })
                .collect();
            let share_of_cluster = counts
                .iter()
                .zip(&cluster_sizes)
                .map(|(&n, &size)| {
                    if size == 0 {
                        0.0
                    } else {
                        100.0 * n as f64 / size as f64
                    }
                })
                .collect();
            rows.push(CrosstabRow {
                degree_band,
                ratio_band,
                count,
                share_of_category,
                share_of_cluster,
            });
        }
    }
    Ok(Crosstab {
        cluster_sizes,
        rows,
    })
}

impl Crosstab {
    /// Two lines per category (share of the category per cluster, then share
    /// of the cluster), one column per cluster, values in percent.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(w, "degree_band,ratio_band,table,count")?;
        for c in 0..self.cluster_sizes.len() {
            write!(w, ",cluster_{c}")?;
        }
        writeln!(w)?;
        for row in &self.rows {
            for (table, values) in [
                ("share_of_category", &row.share_of_category),
                ("share_of_cluster", &row.share_of_cluster),
            ] {
                write!(
                    w,
                    "{},{},{},{}",
                    row.degree_band.name(),
                    row.ratio_band.name(),
                    table,
                    row.count
                )?;
                for v in values {
                    write!(w, ",{v}")?;
                }
                writeln!(w)?;
            }
        }
        w.flush()
    }
}

/// Reads one external node id per line; `#` comments and blank lines are
/// skipped.
pub fn read_node_list<R: BufRead>(reader: R) -> Result<Vec<u64>> {
    let mut ids = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<node list>", e))?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        ids.push(t.parse().map_err(|e| Error::Parse {
            line: i + 1,
            message: format!("invalid node id `{t}`: {e}"),
        })?);
    }
    Ok(ids)
}

#[derive(Clone, Debug, PartialEq)]
pub struct MeasureAnova {
    pub measure: Measure,
    pub f: f64,
    pub df_between: usize,
    pub df_within: usize,
    pub p_value: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PairwiseTest {
    pub measure: Measure,
    pub a: usize,
    pub b: usize,
    pub t: f64,
    pub df: f64,
    pub p_value: f64,
    pub p_bonferroni: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StatsReport {
    pub anova: Vec<MeasureAnova>,
    pub posthoc: Vec<PairwiseTest>,
    /// Groups with fewer than two members, left out of the post-hoc tests.
    pub excluded: Vec<usize>,
}

impl StatsReport {
    pub fn write_anova_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "measure,f,df_between,df_within,p_value")?;
        for a in &self.anova {
            writeln!(
                w,
                "{},{},{},{},{}",
                a.measure, a.f, a.df_between, a.df_within, a.p_value
            )?;
        }
        w.flush()
    }

    pub fn write_posthoc_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "measure,group_a,group_b,t,df,p_value,p_bonferroni")?;
        for t in &self.posthoc {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                t.measure, t.a, t.b, t.t, t.df, t.p_value, t.p_bonferroni
            )?;
        }
        for g in &self.excluded {
            writeln!(w, "# group {g} excluded: fewer than 2 members")?;
        }
        w.flush()
    }
}

/// Per-measure one-way ANOVA across clusters, then Welch t-tests between
/// every pair of clusters with at least two members, Bonferroni-corrected by
/// the number of pairs.
pub fn anova_bonferroni(vectors: &[MeasureVector], assignment: &[usize]) -> Result<StatsReport> {
    if vectors.len() != assignment.len() {
        return Err(Error::SizeMismatch {
            what: "assignment",
            expected: vectors.len(),
            found: assignment.len(),
        });
    }
    let k = assignment.iter().max().map_or(0, |&m| m + 1);
    let mut columns: Vec<Vec<Vec<f64>>> = vec![vec![Vec::new(); k]; 8];
    for (v, &c) in vectors.iter().zip(assignment) {
        for (column, x) in columns.iter_mut().zip(v.0) {
            column[c].push(x);
        }
    }
    let sizes: Vec<usize> = columns[0].iter().map(Vec::len).collect();
    let excluded: Vec<usize> = (0..k).filter(|&c| sizes[c] < 2).collect();
    for g in &excluded {
        warn!(
            "group {g} has {} member(s); excluded from post-hoc tests",
            sizes[*g]
        );
    }
    let included: Vec<usize> = (0..k).filter(|&c| sizes[c] >= 2).collect();
    let pairs = included.len() * included.len().saturating_sub(1) / 2;

    let mut anova = Vec::with_capacity(8);
    let mut posthoc = Vec::new();
    for m in Measure::ALL {
        let groups: Vec<&[f64]> = columns[m.index()].iter().map(Vec::as_slice).collect();
        let a = one_way_anova(&groups)?;
        anova.push(MeasureAnova {
            measure: m,
            f: a.f,
            df_between: a.df_between,
            df_within: a.df_within,
            p_value: a.p_value,
        });
        for (i, &ga) in included.iter().enumerate() {
            for &gb in &included[i + 1..] {
                let w = welch_t_test(groups[ga], groups[gb])?;
                posthoc.push(PairwiseTest {
                    measure: m,
                    a: ga,
                    b: gb,
                    t: w.t,
                    df: w.df,
                    p_value: w.p_value,
                    p_bonferroni: bonferroni(w.p_value, pairs),
                });
            }
        }
    }
    Ok(StatsReport {
        anova,
        posthoc,
        excluded,
    })
}
