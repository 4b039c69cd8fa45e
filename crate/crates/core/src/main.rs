use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};

use noderoles::clustering::ClusteringConfig;
use noderoles::community::{write_partition, ModularityConfig};
use noderoles::graph::Convention;
use noderoles::measures::{
    correlation_matrix, measure_vectors, raw_features, write_measures_csv, write_raw_csv,
};
use noderoles::pipeline::{
    capitalist_categories, cluster_measures, detect_communities, load_assignment, load_graph,
    load_measures, load_partition, run_pipeline, write_baseline_roles, write_capitalists,
    ArtifactWriter, CapitalistSource, DirLock, PartitionSource, PipelineConfig,
};
use noderoles::roles::{
    anova_bonferroni, crosstab, group_profiles, write_role_report, RoleThresholds,
};
use noderoles::synth::{synth_generate, PlantedRole, SynthParams};
use noderoles::{clustering, Error, Result};

#[derive(Parser)]
#[command(
    name = "noderoles",
    version,
    about = "Community-aware node roles for directed graphs"
)]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load an edge list and write it back normalised (`follower followee`).
    Ingest {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Detect communities or validate a partition file.
    Communities {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long, default_value = "louvain")]
        partition: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1.0)]
        resolution: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute raw features, the eight measures and their correlations.
    Measures {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long)]
        partition: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sweep k-means over the measures and keep the best k.
    Cluster {
        #[arg(long)]
        measures: PathBuf,
        #[command(flatten)]
        clustering: ClusterArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Describe each cluster; with a graph and partition also write the
    /// threshold-taxonomy baseline.
    Roles {
        #[arg(long)]
        measures: PathBuf,
        #[arg(long)]
        assignment: PathBuf,
        #[arg(long, requires = "partition")]
        input: Option<PathBuf>,
        #[arg(long, value_enum)]
        convention: Option<ConventionArg>,
        #[arg(long)]
        partition: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Band capitalists by degree and ratio and cross them with clusters.
    Capitalists {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long)]
        assignment: PathBuf,
        #[command(flatten)]
        capitalists: CapitalistArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// ANOVA and Bonferroni-corrected Welch tests per measure.
    Stats {
        #[arg(long)]
        measures: PathBuf,
        #[arg(long)]
        assignment: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a planted directed block model.
    Synth {
        #[arg(long, default_value_t = 4)]
        blocks: usize,
        #[arg(long, default_value_t = 50)]
        block_size: usize,
        #[arg(long, default_value_t = 0.3)]
        p_in: f64,
        #[arg(long, default_value_t = 0.01)]
        p_out: f64,
        /// Planted hub as NODE:DEGREE (internal in- and out-degree).
        #[arg(long = "hub", value_parser = parse_hub)]
        hubs: Vec<(u32, usize)>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run every stage.
    Run {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long, default_value = "louvain")]
        partition: String,
        #[command(flatten)]
        clustering: ClusterArgs,
        #[command(flatten)]
        capitalists: CapitalistArgs,
        #[arg(long, default_value_t = 1.0)]
        resolution: f64,
        /// Record per-stage wall-clock times in the manifest.
        #[arg(long)]
        timings: bool,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct GraphArgs {
    #[arg(long)]
    input: PathBuf,
    /// `follow`: a line `a b` means a follows b; `reverse`: b follows a.
    #[arg(long, value_enum)]
    convention: Option<ConventionArg>,
}

#[derive(Args)]
struct ClusterArgs {
    #[arg(long, default_value_t = 2)]
    k_min: usize,
    #[arg(long, default_value_t = 15)]
    k_max: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 8)]
    restarts: usize,
    /// Globally standardise the measures before clustering.
    #[arg(long)]
    standardize: bool,
}

#[derive(Args)]
struct CapitalistArgs {
    /// File with one capitalist node id per line.
    #[arg(long, conflicts_with = "approximate_capitalists")]
    capitalists: Option<PathBuf>,
    /// Treat every node inside a degree band as a capitalist.
    #[arg(long)]
    approximate_capitalists: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum ConventionArg {
    Follow,
    Reverse,
}

fn convention(arg: Option<ConventionArg>) -> Convention {
    match arg {
        Some(ConventionArg::Follow) => Convention::SrcFollowsDst,
        Some(ConventionArg::Reverse) => Convention::DstFollowsSrc,
        None => {
            warn!("--convention not given; assuming `follow` (a line `a b` means a follows b)");
            Convention::SrcFollowsDst
        }
    }
}

fn parse_hub(s: &str) -> std::result::Result<(u32, usize), String> {
    let (node, degree) = s.split_once(':').ok_or("expected NODE:DEGREE")?;
    Ok((
        node.parse().map_err(|e| format!("node: {e}"))?,
        degree.parse().map_err(|e| format!("degree: {e}"))?,
    ))
}

fn partition_source(arg: &str) -> PartitionSource {
    if arg == "louvain" {
        PartitionSource::Louvain
    } else {
        PartitionSource::File(arg.into())
    }
}

impl ClusterArgs {
    fn config(&self) -> ClusteringConfig {
        ClusteringConfig {
            k_min: self.k_min,
            k_max: self.k_max,
            seed: self.seed,
            restarts: self.restarts,
            ..ClusteringConfig::default()
        }
    }
}

impl CapitalistArgs {
    fn source(&self) -> CapitalistSource {
        match (&self.capitalists, self.approximate_capitalists) {
            (Some(path), _) => CapitalistSource::File(path.clone()),
            (None, true) => CapitalistSource::Approximate,
            (None, false) => CapitalistSource::None,
        }
    }
}

/// Runs `f` against a locked output directory, removing what it wrote when
/// it fails.
fn with_output(dir: &Path, f: impl FnOnce(&mut ArtifactWriter) -> Result<()>) -> Result<()> {
    let _lock = DirLock::acquire(dir)?;
    let mut out = ArtifactWriter::new(dir)?;
    let result = f(&mut out);
    if result.is_err() {
        out.remove_all();
    }
    result
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest { graph, out } => {
            let (g, stats) = load_graph(&graph.input, convention(graph.convention))?;
            println!(
                "nodes: {}\narcs: {}\nlines: {}\nself_loops: {}\nduplicates: {}",
                g.node_count(),
                g.arc_count(),
                stats.lines,
                stats.self_loops,
                stats.duplicates
            );
            with_output(&out, |w| {
                w.write("edges.txt", |w| {
                    for (u, v) in g.arcs() {
                        writeln!(w, "{} {}", g.external_id(u), g.external_id(v))?;
                    }
                    for u in g.nodes().filter(|&u| g.in_degree(u) + g.out_degree(u) == 0) {
                        let id = g.external_id(u);
                        writeln!(w, "{id} {id}")?;
                    }
                    Ok(())
                })
            })
        }
        Command::Communities {
            graph,
            partition,
            seed,
            resolution,
            out,
        } => {
            let (g, _) = load_graph(&graph.input, convention(graph.convention))?;
            let cfg = ModularityConfig {
                seed,
                resolution,
                ..ModularityConfig::default()
            };
            cfg.validate()?;
            let (p, levels) = detect_communities(&g, &partition_source(&partition), &cfg)?;
            let q = noderoles::community::directed_modularity_with_resolution(&g, &p, resolution)?;
            println!("communities: {}\nmodularity: {q}", p.community_count());
            with_output(&out, |w| {
                w.write("partition.txt", |w| write_partition(w, &g, &p))?;
                match levels {
                    Some(levels) => w.write("levels.txt", |w| w.write_all(levels.as_bytes())),
                    None => Ok(()),
                }
            })
        }
        Command::Measures {
            graph,
            partition,
            out,
        } => {
            let (g, _) = load_graph(&graph.input, convention(graph.convention))?;
            let p = load_partition(&partition, &g)?;
            let raw = raw_features(&g, &p)?;
            let vectors = measure_vectors(&raw, &p)?;
            let corr = correlation_matrix(&vectors)?;
            with_output(&out, |w| {
                w.write("raw_features.csv", |w| write_raw_csv(w, &g, &raw))?;
                w.write("measures.csv", |w| write_measures_csv(w, &g, &vectors))?;
                w.write("correlations.csv", |w| corr.write_csv(w))
            })
        }
        Command::Cluster {
            measures,
            clustering,
            out,
        } => {
            let (ids, vectors) = load_measures(&measures)?;
            let selection =
                cluster_measures(&vectors, &clustering.config(), clustering.standardize)?;
            println!("selected_k: {}", selection.k);
            with_output(&out, |w| {
                let sweep = selection.sweep_csv();
                w.write("sweep.csv", |w| w.write_all(sweep.as_bytes()))?;
                w.write("assignment.csv", |w| {
                    clustering::write_assignment_csv(w, &ids, &selection.result.assignment)
                })
            })
        }
        Command::Roles {
            measures,
            assignment,
            input,
            convention: conv,
            partition,
            out,
        } => {
            let (ids, vectors) = load_measures(&measures)?;
            let assignment = load_assignment(&assignment, &ids)?;
            let profiles = group_profiles(&vectors, &assignment)?;
            let baseline = match (input, partition) {
                (Some(input), Some(partition)) => {
                    let (g, _) = load_graph(&input, convention(conv))?;
                    let p = load_partition(&partition, &g)?;
                    let mut buf = Vec::new();
                    write_baseline_roles(&mut buf, &g, &p, &RoleThresholds::default())?;
                    Some(buf)
                }
                _ => None,
            };
            with_output(&out, |w| {
                w.write("roles.csv", |w| write_role_report(w, &profiles))?;
                match baseline {
                    Some(buf) => w.write("baseline_roles.csv", |w| w.write_all(&buf)),
                    None => Ok(()),
                }
            })
        }
        Command::Capitalists {
            graph,
            assignment,
            capitalists,
            out,
        } => {
            let (g, _) = load_graph(&graph.input, convention(graph.convention))?;
            let assignment = load_assignment(&assignment, g.external_ids())?;
            let Some(categories) = capitalist_categories(&g, &capitalists.source())? else {
                return Err(Error::Config(
                    "give --capitalists <file> or --approximate-capitalists".into(),
                ));
            };
            let table = crosstab(&assignment, &categories)?;
            with_output(&out, |w| {
                w.write("capitalists.csv", |w| {
                    write_capitalists(w, &g, &categories, &assignment)
                })?;
                w.write("crosstab.csv", |w| table.write_csv(w))
            })
        }
        Command::Stats {
            measures,
            assignment,
            out,
        } => {
            let (ids, vectors) = load_measures(&measures)?;
            let assignment = load_assignment(&assignment, &ids)?;
            let report = anova_bonferroni(&vectors, &assignment)?;
            with_output(&out, |w| {
                w.write("anova.csv", |w| report.write_anova_csv(w))?;
                w.write("posthoc.csv", |w| report.write_posthoc_csv(w))
            })
        }
        Command::Synth {
            blocks,
            block_size,
            p_in,
            p_out,
            hubs,
            seed,
            out,
        } => {
            let params = SynthParams {
                blocks,
                block_size,
                p_in,
                p_out,
                planted: hubs
                    .into_iter()
                    .map(|(node, degree)| PlantedRole::hub(node, degree))
                    .collect(),
                seed,
            };
            let net = synth_generate(&params)?;
            println!("nodes: {}\narcs: {}", net.node_count, net.arcs.len());
            let _lock = DirLock::acquire(&out)?;
            net.write_to_dir(&out)
        }
        Command::Run {
            graph,
            partition,
            clustering,
            capitalists,
            resolution,
            timings,
            out,
        } => {
            let mut cfg = PipelineConfig::new(graph.input, out);
            cfg.convention = convention(graph.convention);
            cfg.partition = partition_source(&partition);
            cfg.modularity.resolution = resolution;
            cfg.clustering = clustering.config();
            cfg.seed = clustering.seed;
            cfg.standardize = clustering.standardize;
            cfg.capitalists = capitalists.source();
            cfg.record_timings = timings;
            let report = run_pipeline(&cfg)?;
            info!("artifacts: {}", report.artifacts.join(", "));
            println!(
                "nodes: {}\narcs: {}\ncommunities: {}\nselected_k: {}",
                report.nodes, report.arcs, report.communities, report.selected_k
            );
            Ok(())
        }
    }
}

fn is_usage_error(e: &Error) -> bool {
    match e {
        Error::Config(_) => true,
        Error::Stage { source, .. } => is_usage_error(source),
        _ => false,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(3);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if is_usage_error(&e) {
                ExitCode::from(1)
            } else if e.is_data_error() {
                ExitCode::from(2)
            } else {
                ExitCode::from(3)
            }
        }
    }
}
