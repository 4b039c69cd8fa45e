//! End-to-end runs: every stage, its artifacts and the run manifest.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};

use crate::clustering::{
    distinct_count, read_assignment_csv, select_k, standardize, write_assignment_csv,
    ClusteringConfig, Selection,
};
use crate::community::{louvain_directed, read_partition, write_partition, ModularityConfig};
use crate::error::{Error, Result};
use crate::graph::{load_edge_list, Convention, DirectedGraph, LoadStats, Partition};
use crate::measures::{
    correlation_matrix, measure_vectors, participation_all, raw_features, read_measures_csv,
    within_module_degree, write_measures_csv, write_raw_csv, MeasureVector, ParticipationMode,
};
use crate::roles::{
    anova_bonferroni, categorize_capitalist, crosstab, ga_threshold_roles, group_profiles,
    read_node_list, write_role_report, CapitalistCategory, DegreeBand, RoleThresholds,
};

#[derive(Clone, Debug, PartialEq)]
pub enum PartitionSource {
    Louvain,
    File(PathBuf),
}

#[derive(Clone, Debug, PartialEq)]
pub enum CapitalistSource {
    /// No capitalist crosstab.
    None,
    /// One external node id per line.
    File(PathBuf),
    /// Every node inside a degree band counts as a capitalist.
    Approximate,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub input: PathBuf,
    pub convention: Convention,
    pub partition: PartitionSource,
    pub modularity: ModularityConfig,
    pub clustering: ClusteringConfig,
    pub thresholds: RoleThresholds,
    pub capitalists: CapitalistSource,
    pub out_dir: PathBuf,
    pub seed: u64,
    /// Globally standardise the measures before clustering.
    pub standardize: bool,
    /// Record per-stage wall-clock times in the manifest. Off by default,
    /// since timings make otherwise identical runs differ.
    pub record_timings: bool,
}

impl PipelineConfig {
    pub fn new(input: impl Into<PathBuf>, out_dir: impl Into<PathBuf>) -> Self {
        PipelineConfig {
            input: input.into(),
            convention: Convention::default(),
            partition: PartitionSource::Louvain,
            modularity: ModularityConfig::default(),
            clustering: ClusteringConfig::default(),
            thresholds: RoleThresholds::default(),
            capitalists: CapitalistSource::None,
            out_dir: out_dir.into(),
            seed: 0,
            standardize: false,
            record_timings: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.modularity.validate()?;
        self.clustering.validate()?;
        if !self.input.is_file() {
            return Err(Error::Config(format!(
                "input {} is not a readable file",
                self.input.display()
            )));
        }
        for path in [&self.partition_file(), &self.capitalist_file()]
            .into_iter()
            .flatten()
        {
            if !path.is_file() {
                return Err(Error::Config(format!(
                    "{} is not a readable file",
                    path.display()
                )));
            }
        }
        Ok(())
    }

    fn partition_file(&self) -> Option<PathBuf> {
        match &self.partition {
            PartitionSource::File(p) => Some(p.clone()),
            PartitionSource::Louvain => None,
        }
    }

    fn capitalist_file(&self) -> Option<PathBuf> {
        match &self.capitalists {
            CapitalistSource::File(p) => Some(p.clone()),
            _ => None,
        }
    }
}

pub fn convention_name(c: Convention) -> &'static str {
    match c {
        Convention::SrcFollowsDst => "follow",
        Convention::DstFollowsSrc => "reverse",
    }
}

/// Files written into one output directory. Everything written through it
/// can be removed again when a later stage fails.
pub struct ArtifactWriter {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl ArtifactWriter {
    pub fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(ArtifactWriter {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn write(
        &mut self,
        name: &str,
        f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
    ) -> Result<()> {
        let path = self.dir.join(name);
        self.written.push(path.clone());
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut w = BufWriter::new(file);
        f(&mut w)
            .and_then(|()| w.flush())
            .map_err(|e| Error::io(&path, e))
    }

    pub fn names(&self) -> Vec<String> {
        self.written
            .iter()
            .filter_map(|p| p.file_name())
            .map(|n| n.to_string_lossy().into_owned())
            .collect()
    }

    pub fn remove_all(&mut self) {
        for path in self.written.drain(..) {
            if let Err(e) = fs::remove_file(&path) {
                if e.kind() != std::io::ErrorKind::NotFound {
                    warn!("could not remove {}: {e}", path.display());
                }
            }
        }
    }
}

const LOCK_NAME: &str = ".noderoles.lock";

/// Exclusive claim on an output directory, released on drop.
pub struct DirLock {
    path: PathBuf,
}

impl DirLock {
    pub fn acquire(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(LOCK_NAME);
        match fs::OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)
        {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
                Ok(DirLock { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(Error::Config(format!(
                "{} is in use by another run (remove {} if that run is gone)",
                dir.display(),
                path.display()
            ))),
            Err(e) => Err(Error::io(&path, e)),
        }
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

/// Attaches the file name to errors raised while parsing it.
fn in_file<T>(path: &Path, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        Error::Parse { line, message } => Error::Parse {
            line,
            message: format!("{}: {message}", path.display()),
        },
        other => other,
    })
}

pub fn load_graph(path: &Path, convention: Convention) -> Result<(DirectedGraph, LoadStats)> {
    in_file(path, load_edge_list(open(path)?, convention))
}

pub fn load_partition(path: &Path, g: &DirectedGraph) -> Result<Partition> {
    in_file(path, read_partition(open(path)?, g))
}

pub fn load_measures(path: &Path) -> Result<(Vec<u64>, Vec<MeasureVector>)> {
    let rows = in_file(path, read_measures_csv(open(path)?))?;
    Ok(rows.into_iter().unzip())
}

/// Cluster of every node in `nodes`, read from an assignment table.
pub fn load_assignment(path: &Path, nodes: &[u64]) -> Result<Vec<usize>> {
    let rows = in_file(path, read_assignment_csv(open(path)?))?;
    align(nodes, rows, "assignment")
}

fn align(nodes: &[u64], mut rows: Vec<(u64, usize)>, what: &'static str) -> Result<Vec<usize>> {
    if rows.len() != nodes.len() {
        return Err(Error::SizeMismatch {
            what,
            expected: nodes.len(),
            found: rows.len(),
        });
    }
    rows.sort_unstable();
    for w in rows.windows(2) {
        if w[0].0 == w[1].0 {
            return Err(Error::DuplicateNode(w[0].0));
        }
    }
    nodes
        .iter()
        .map(|id| {
            rows.binary_search_by_key(id, |r| r.0)
                .map(|i| rows[i].1)
                .map_err(|_| Error::UnassignedNode(*id))
        })
        .collect()
}

/// Louvain result or a partition file, plus the per-level report when
/// Louvain ran.
pub fn detect_communities(
    g: &DirectedGraph,
    source: &PartitionSource,
    cfg: &ModularityConfig,
) -> Result<(Partition, Option<String>)> {
    match source {
        PartitionSource::File(path) => Ok((load_partition(path, g)?, None)),
        PartitionSource::Louvain => {
            let result = louvain_directed(g, cfg)?;
            info!(
                "louvain: {} communities, Q = {}",
                result.partition.community_count(),
                result.modularity
            );
            let report = result.level_report();
            Ok((result.partition, Some(report)))
        }
    }
}

/// k-means sweep over the measure vectors. `k_max` is lowered to the
/// number of distinct vectors when there are fewer.
pub fn cluster_measures(
    vectors: &[MeasureVector],
    cfg: &ClusteringConfig,
    global_standardize: bool,
) -> Result<Selection<8>> {
    let mut points: Vec<[f64; 8]> = vectors.iter().map(|v| v.0).collect();
    if global_standardize {
        points = standardize(&points);
    }
    let distinct = distinct_count(&points);
    let mut cfg = cfg.clone();
    if cfg.k_max > distinct {
        warn!(
            "only {distinct} distinct measure vectors; sweeping k up to {distinct} instead of {}",
            cfg.k_max
        );
        cfg.k_max = distinct;
    }
    select_k(&points, &cfg)
}

/// Capitalist category of each node, or `None` for non-capitalists.
pub fn capitalist_categories(
    g: &DirectedGraph,
    source: &CapitalistSource,
) -> Result<Option<Vec<Option<CapitalistCategory>>>> {
    let all = || {
        g.nodes()
            .map(|u| categorize_capitalist(g.in_degree(u), g.out_degree(u)))
    };
    match source {
        CapitalistSource::None => Ok(None),
        CapitalistSource::Approximate => Ok(Some(
            all()
                .map(|c| (c.degree_band != DegreeBand::None).then_some(c))
                .collect(),
        )),
        CapitalistSource::File(path) => {
            let ids = in_file(path, read_node_list(open(path)?))?;
            let mut listed = vec![false; g.node_count()];
            for id in ids {
                listed[g.node(id)?.index()] = true;
            }
            Ok(Some(
                all()
                    .zip(listed)
                    .map(|(c, l)| (l && c.degree_band != DegreeBand::None).then_some(c))
                    .collect(),
            ))
        }
    }
}

pub fn write_capitalists<W: Write>(
    mut w: W,
    g: &DirectedGraph,
    categories: &[Option<CapitalistCategory>],
    assignment: &[usize],
) -> std::io::Result<()> {
    writeln!(
        w,
        "node,in_degree,out_degree,degree_band,ratio_band,cluster"
    )?;
    for ((u, cat), c) in g.nodes().zip(categories).zip(assignment) {
        if let Some(cat) = cat {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                g.external_id(u),
                g.in_degree(u),
                g.out_degree(u),
                cat.degree_band.name(),
                cat.ratio_band.map_or("", |r| r.name()),
                c
            )?;
        }
    }
    w.flush()
}

/// Threshold-taxonomy roles from the undirected within-module degree and
/// participation.
pub fn write_baseline_roles<W: Write>(
    mut w: W,
    g: &DirectedGraph,
    p: &Partition,
    thresholds: &RoleThresholds,
) -> Result<()> {
    let z = within_module_degree(g, p, ParticipationMode::Undirected)?;
    let part = participation_all(g, p, ParticipationMode::Undirected)?;
    let roles = ga_threshold_roles(&z, &part, thresholds)?;
    let io = |e| Error::io("<baseline roles>", e);
    writeln!(w, "node,z,P,role").map_err(io)?;
    for (((u, z), part), role) in g.nodes().zip(z).zip(part).zip(roles) {
        writeln!(w, "{},{z},{part},{role}", g.external_id(u)).map_err(io)?;
    }
    w.flush().map_err(io)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineReport {
    pub nodes: usize,
    pub arcs: usize,
    pub communities: usize,
    pub selected_k: usize,
    pub stages: Vec<&'static str>,
    pub artifacts: Vec<String>,
}

struct Run<'a> {
    cfg: &'a PipelineConfig,
    out: ArtifactWriter,
    stages: Vec<&'static str>,
    timings: Vec<(&'static str, u128)>,
    facts: Vec<(&'static str, String)>,
}

impl Run<'_> {
    fn stage<T>(
        &mut self,
        name: &'static str,
        f: impl FnOnce(&mut Self) -> Result<T>,
    ) -> Result<T> {
        info!("stage {name}");
        let start = Instant::now();
        let value = f(self).map_err(|e| Error::Stage {
            stage: name,
            source: Box::new(e),
        })?;
        self.stages.push(name);
        self.timings.push((name, start.elapsed().as_millis()));
        Ok(value)
    }

    fn fact(&mut self, key: &'static str, value: impl ToString) {
        self.facts.push((key, value.to_string()));
    }

    fn manifest(&self) -> String {
        let cfg = self.cfg;
        let mut s = String::new();
        let mut kv = |k: &str, v: &dyn std::fmt::Display| {
            let _ = writeln!(s, "{k}: {v}");
        };
        kv("tool", &env!("CARGO_PKG_NAME"));
        kv("version", &env!("CARGO_PKG_VERSION"));
        kv("input", &cfg.input.display());
        kv("convention", &convention_name(cfg.convention));
        kv(
            "partition",
            &match &cfg.partition {
                PartitionSource::Louvain => "louvain".to_string(),
                PartitionSource::File(p) => p.display().to_string(),
            },
        );
        kv("seed", &cfg.seed);
        kv("resolution", &cfg.modularity.resolution);
        kv("min_gain", &cfg.modularity.min_gain);
        kv("max_passes", &cfg.modularity.max_passes);
        kv("k_min", &cfg.clustering.k_min);
        kv("k_max", &cfg.clustering.k_max);
        kv("restarts", &cfg.clustering.restarts);
        kv("max_iterations", &cfg.clustering.max_iterations);
        kv("tolerance", &cfg.clustering.tolerance);
        kv("standardize", &cfg.standardize);
        kv("hub_z", &cfg.thresholds.hub_z);
        kv(
            "non_hub_p",
            &cfg.thresholds.non_hub.map(|x| x.to_string()).join(","),
        );
        kv(
            "hub_p",
            &cfg.thresholds.hub.map(|x| x.to_string()).join(","),
        );
        kv(
            "capitalists",
            &match &cfg.capitalists {
                CapitalistSource::None => "none".to_string(),
                CapitalistSource::Approximate => "approximate".to_string(),
                CapitalistSource::File(p) => p.display().to_string(),
            },
        );
        for (k, v) in &self.facts {
            kv(k, v);
        }
        kv("stages", &self.stages.join(","));
        if cfg.record_timings {
            for (name, ms) in &self.timings {
                kv(&format!("time_{name}_ms"), ms);
            }
        }
        let mut artifacts = self.out.names();
        artifacts.push("manifest.txt".into());
        kv("artifacts", &artifacts.join(","));
        s
    }
}

/// Runs every stage into `cfg.out_dir`. On failure the files written so far
/// are removed and the error names the failing stage.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineReport> {
    cfg.validate()?;
    let _lock = DirLock::acquire(&cfg.out_dir)?;
    let mut run = Run {
        cfg,
        out: ArtifactWriter::new(&cfg.out_dir)?,
        stages: Vec::new(),
        timings: Vec::new(),
        facts: Vec::new(),
    };
    match execute(&mut run) {
        Ok(mut report) => {
            let manifest = run.manifest();
            if let Err(e) = run
                .out
                .write("manifest.txt", |w| w.write_all(manifest.as_bytes()))
            {
                run.out.remove_all();
                return Err(e);
            }
            report.stages = run.stages;
            report.artifacts = run.out.names();
            Ok(report)
        }
        Err(e) => {
            run.out.remove_all();
            Err(e)
        }
    }
}

fn execute(run: &mut Run<'_>) -> Result<PipelineReport> {
    let cfg = run.cfg;
    let mut modularity = cfg.modularity.clone();
    modularity.seed = cfg.seed;
    let mut clustering = cfg.clustering.clone();
    clustering.seed = cfg.seed;

    let g = run.stage("ingest", |run| {
        let (g, stats) = load_graph(&cfg.input, cfg.convention)?;
        if g.arc_count() == 0 {
            return Err(Error::EmptyGraph);
        }
        run.fact("nodes", g.node_count());
        run.fact("arcs", g.arc_count());
        run.fact("input_lines", stats.lines);
        run.fact("self_loops", stats.self_loops);
        run.fact("duplicates", stats.duplicates);
        Ok(g)
    })?;

    let p = run.stage("communities", |run| {
        let (p, levels) = detect_communities(&g, &cfg.partition, &modularity)?;
        let q =
            crate::community::directed_modularity_with_resolution(&g, &p, modularity.resolution)?;
        run.fact("communities", p.community_count());
        run.fact("modularity", q);
        run.out
            .write("partition.txt", |w| write_partition(w, &g, &p))?;
        if let Some(levels) = levels {
            run.out
                .write("levels.txt", |w| w.write_all(levels.as_bytes()))?;
        }
        Ok(p)
    })?;

    let vectors = run.stage("measures", |run| {
        let raw = raw_features(&g, &p)?;
        let vectors = measure_vectors(&raw, &p)?;
        let corr = correlation_matrix(&vectors)?;
        run.out
            .write("raw_features.csv", |w| write_raw_csv(w, &g, &raw))?;
        run.out
            .write("measures.csv", |w| write_measures_csv(w, &g, &vectors))?;
        run.out.write("correlations.csv", |w| corr.write_csv(w))?;
        Ok(vectors)
    })?;

    let selection = run.stage("cluster", |run| {
        let selection = cluster_measures(&vectors, &clustering, cfg.standardize)?;
        run.fact("selected_k", selection.k);
        let sweep = selection.sweep_csv();
        run.out
            .write("sweep.csv", |w| w.write_all(sweep.as_bytes()))?;
        run.out.write("assignment.csv", |w| {
            write_assignment_csv(w, g.external_ids(), &selection.result.assignment)
        })?;
        Ok(selection)
    })?;
    let assignment = &selection.result.assignment;

    run.stage("roles", |run| {
        let profiles = group_profiles(&vectors, assignment)?;
        run.out
            .write("roles.csv", |w| write_role_report(w, &profiles))?;
        let mut baseline = Vec::new();
        write_baseline_roles(&mut baseline, &g, &p, &cfg.thresholds)?;
        run.out
            .write("baseline_roles.csv", |w| w.write_all(&baseline))
    })?;

    if cfg.capitalists != CapitalistSource::None {
        run.stage("capitalists", |run| {
            let categories = capitalist_categories(&g, &cfg.capitalists)?.expect("source given");
            let table = crosstab(assignment, &categories)?;
            run.fact("capitalist_count", categories.iter().flatten().count());
            run.out.write("capitalists.csv", |w| {
                write_capitalists(w, &g, &categories, assignment)
            })?;
            run.out.write("crosstab.csv", |w| table.write_csv(w))
        })?;
    }

    run.stage("stats", |run| {
        let report = anova_bonferroni(&vectors, assignment)?;
        run.out.write("anova.csv", |w| report.write_anova_csv(w))?;
        run.out
            .write("posthoc.csv", |w| report.write_posthoc_csv(w))
    })?;

    Ok(PipelineReport {
        nodes: g.node_count(),
        arcs: g.arc_count(),
        communities: p.community_count(),
        selected_k: selection.k,
        stages: Vec::new(),
        artifacts: Vec::new(),
    })
}

/// Reads a `key: value` manifest back into ordered pairs.
pub fn parse_manifest(text: &str) -> Vec<(String, String)> {
    text.lines()
        .filter_map(|l| l.split_once(": "))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const G1: &str = "1 2\n2 1\n1 3\n4 1\n1 5\n6 6\n";
    const G1_PARTITION: &str = "1 0\n2 0\n3 0\n4 1\n5 1\n6 1\n";

    fn fixture(dir: &Path) -> PipelineConfig {
        fs::write(dir.join("g1.txt"), G1).unwrap();
        fs::write(dir.join("g1.part"), G1_PARTITION).unwrap();
        let mut cfg = PipelineConfig::new(dir.join("g1.txt"), dir.join("out"));
        cfg.partition = PartitionSource::File(dir.join("g1.part"));
        cfg.capitalists = CapitalistSource::Approximate;
        cfg
    }

    #[test]
    fn g1_smoke() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = fixture(dir.path());
        let report = run_pipeline(&cfg).unwrap();
        assert_eq!(report.nodes, 6);
        assert_eq!(
            report.stages,
            [
                "ingest",
                "communities",
                "measures",
                "cluster",
                "roles",
                "capitalists",
                "stats"
            ]
        );
        let features = fs::read_to_string(cfg.out_dir.join("raw_features.csv")).unwrap();
        assert_eq!(features.lines().count(), 7);
        for name in &report.artifacts {
            assert!(cfg.out_dir.join(name).is_file(), "{name}");
        }
        let manifest = fs::read_to_string(cfg.out_dir.join("manifest.txt")).unwrap();
        let kv = parse_manifest(&manifest);
        let stages = kv.iter().find(|(k, _)| k == "stages").unwrap();
        assert_eq!(stages.1, report.stages.join(","));
        assert!(!cfg.out_dir.join(LOCK_NAME).exists());
    }

    #[test]
    fn failure_names_stage_and_cleans_up() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = fixture(dir.path());
        fs::write(dir.path().join("caps.txt"), "99\n").unwrap();
        cfg.capitalists = CapitalistSource::File(dir.path().join("caps.txt"));
        let err = run_pipeline(&cfg).unwrap_err();
        assert!(
            matches!(
                err,
                Error::Stage {
                    stage: "capitalists",
                    ..
                }
            ),
            "{err}"
        );
        assert!(err.is_data_error());
        let left: Vec<_> = fs::read_dir(&cfg.out_dir).unwrap().collect();
        assert!(left.is_empty());
    }

    #[test]
    fn lock_excludes_second_run() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = fixture(dir.path());
        let _held = DirLock::acquire(&cfg.out_dir).unwrap();
        assert!(run_pipeline(&cfg).is_err());
    }

    #[test]
    fn timings_only_on_request() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = fixture(dir.path());
        run_pipeline(&cfg).unwrap();
        let plain = fs::read_to_string(cfg.out_dir.join("manifest.txt")).unwrap();
        assert!(!plain.contains("time_"));
        cfg.record_timings = true;
        run_pipeline(&cfg).unwrap();
        let timed = fs::read_to_string(cfg.out_dir.join("manifest.txt")).unwrap();
        assert!(timed.contains("time_ingest_ms: "));
    }

    #[test]
    fn assignment_alignment() {
        assert_eq!(
            align(&[3, 1], vec![(1, 0), (3, 2)], "a").unwrap(),
            vec![2, 0]
        );
        assert!(align(&[3, 1], vec![(1, 0), (1, 2)], "a").is_err());
        assert!(align(&[3], vec![(1, 0), (3, 2)], "a").is_err());
    }
}
