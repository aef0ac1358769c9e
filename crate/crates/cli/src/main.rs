use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use kronequilt::config::parse_model_config;
use kronequilt::kronecker::{
    expected_edge_sum, kpgm_sample, kpgm_sample_exact, naive_kpgm_sample, InitiatorChain, InitiatorMatrix,
};
use kronequilt::magm::{naive_magm_sample, quilt_sample_with, sample_attributes, KpgmMethod, MagmModel, QuiltOptions};
use kronequilt::rng::seeded;
use kronequilt::speedup::{fast_magm_sample_with_plan, plan_for_threshold, select_threshold};
use kronequilt::stats::{degree_distribution, largest_scc_fraction};
use kronequilt::{AttributeAssignment, EdgeList, Error, Result};
use kronequilt_bench::{
    graph_stats, partition_stats, run_experiment, write_rows, Experiment, ExperimentSpec, ThetaPreset,
};

#[derive(Parser)]
#[command(name = "kronequilt", version, about = "Sample Kronecker and multiplicative attribute graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a Kronecker product graph on 2^d nodes.
    SampleKpgm(KpgmArgs),
    /// Sample a multiplicative attribute graph.
    SampleMagm(MagmArgs),
    /// Partition, graph or degree statistics as CSV.
    Stats(StatsArgs),
    /// Run a benchmark experiment and write its CSV table.
    Bench(BenchArgs),
}

#[derive(Args)]
struct ThetaArgs {
    /// Initiator entries θ00,θ01,θ10,θ11 shared by every level.
    #[arg(long, value_name = "A,B,C,D", conflicts_with = "theta_preset")]
    theta: Option<String>,
    /// Named initiator [default: theta1].
    #[arg(long, value_enum)]
    theta_preset: Option<Preset>,
}

impl ThetaArgs {
    fn matrix(&self) -> Result<InitiatorMatrix> {
        let Some(text) = &self.theta else {
            return Ok(self.theta_preset.unwrap_or(Preset::Theta1).into_preset().matrix());
        };
        let entries = text
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::InvalidParameter(format!("--theta: {e}")))?;
        match entries[..] {
            [a, b, c, d] => InitiatorMatrix::new(a, b, c, d),
            _ => Err(Error::InvalidParameter(format!(
                "--theta needs four comma-separated entries, got {}",
                entries.len()
            ))),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Theta1,
    Theta2,
}

impl Preset {
    fn into_preset(self) -> ThetaPreset {
        match self {
            Preset::Theta1 => ThetaPreset::Theta1,
            Preset::Theta2 => ThetaPreset::Theta2,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Edgelist,
    Csv,
}

#[derive(Args)]
struct OutputArgs {
    /// Write to this file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Edgelist)]
    format: Format,
}

#[derive(Clone, Copy, ValueEnum)]
enum KpgmAlgorithm {
    /// Normal edge count, one descent per edge, duplicates rejected.
    Rejection,
    /// Independent cells with exact marginals.
    Exact,
    /// One Bernoulli trial per cell.
    Naive,
}

#[derive(Args)]
struct KpgmArgs {
    /// Number of Kronecker levels.
    #[arg(long)]
    d: usize,
    #[command(flatten)]
    theta: ThetaArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = KpgmAlgorithm::Rejection)]
    method: KpgmAlgorithm,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct MagmArgs {
    #[arg(long, required_unless_present = "config")]
    n: Option<u64>,
    #[arg(long, required_unless_present = "config")]
    d: Option<usize>,
    /// Probability of each attribute being 1.
    #[arg(long, default_value_t = 0.5)]
    mu: f64,
    #[command(flatten)]
    theta: ThetaArgs,
    /// Model file with per-level entries; replaces --n, --d, --mu and --theta.
    #[arg(long, conflicts_with_all = ["n", "d", "theta", "theta_preset"])]
    config: Option<PathBuf>,
    /// Read the attribute assignment instead of sampling it.
    #[arg(long)]
    attrs: Option<PathBuf>,
    /// Save the attribute assignment used.
    #[arg(long)]
    save_attrs: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Quilt only the rare configurations and sample the frequent ones directly.
    #[arg(long)]
    fast: bool,
    /// Override the threshold chosen for --fast.
    #[arg(long, requires = "fast")]
    bprime: Option<u64>,
    /// One Bernoulli trial per node pair.
    #[arg(long, conflicts_with = "fast")]
    naive: bool,
    /// Quilting blocks draw a normal edge count with duplicate rejection.
    #[arg(long)]
    rejection: bool,
    /// Skip block descents that cannot land on a node pair.
    #[arg(long)]
    prune: bool,
    /// Sample quilting blocks on all cores (same output).
    #[arg(long)]
    parallel: bool,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum StatsKind {
    /// Rows `n,d,mu,trial,B` for sampled attribute assignments.
    Partition,
    /// Rows `n,d,mu,trial,edges,scc_fraction` for quilted graphs.
    Graph,
    /// Largest SCC fraction of the graph given by --graph.
    Scc,
    /// Degree histogram of the graph given by --graph.
    Degrees,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(value_enum)]
    kind: StatsKind,
    /// Sizes n = 2^k for k in this range, e.g. 8..14.
    #[arg(long, value_parser = parse_range::<u32>, default_value = "8..14")]
    log2_n: RangeInclusive<u32>,
    #[arg(long, default_value_t = 10)]
    trials: usize,
    #[arg(long, default_value_t = 0.5)]
    mu: f64,
    #[arg(long, value_enum, default_value_t = Preset::Theta1)]
    theta_preset: Preset,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Edge list file for scc and degrees.
    #[arg(long, required_if_eq_any = [("kind", "scc"), ("kind", "degrees")])]
    graph: Option<PathBuf>,
    #[arg(long)]
    parallel_trials: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// edges-vs-n, scc-vs-n, runtime-vs-n, per-edge-time, mu-sweep, rho-max or d-sweep.
    experiment: String,
    #[arg(long, value_parser = parse_range::<u32>)]
    log2_n: Option<RangeInclusive<u32>>,
    /// d-sweep depth offsets from log2 n, e.g. -3..3.
    #[arg(long, value_parser = parse_range::<i32>, allow_hyphen_values = true)]
    d_offsets: Option<RangeInclusive<i32>>,
    /// Comma-separated μ values for mu-sweep and rho-max.
    #[arg(long, value_delimiter = ',')]
    mus: Option<Vec<f64>>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, value_enum)]
    theta_preset: Option<Preset>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    max_n: Option<u64>,
    #[arg(long)]
    edge_budget: Option<f64>,
    #[arg(long)]
    naive_max_n: Option<u64>,
    #[arg(long)]
    parallel_trials: bool,
    #[arg(long)]
    prune: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// `a..b` (inclusive) or a single value.
fn parse_range<T>(s: &str) -> std::result::Result<RangeInclusive<T>, String>
where
    T: std::str::FromStr + Copy,
    T::Err: std::fmt::Display,
{
    let parse = |v: &str| v.trim().parse::<T>().map_err(|e| format!("{v:?}: {e}"));
    match s.split_once("..") {
        Some((a, b)) => Ok(parse(a)?..=parse(b.trim_start_matches('='))?),
        None => {
            let v = parse(s)?;
            Ok(v..=v)
        }
    }
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_graph(graph: &EdgeList, output: &OutputArgs) -> Result<()> {
    let mut out = open_output(output.out.as_deref())?;
    match output.format {
        Format::Edgelist => graph.write_to(&mut out)?,
        Format::Csv => {
            writeln!(out, "source,target")?;
            for &(s, t) in graph.edges() {
                writeln!(out, "{s},{t}")?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

fn read_graph(path: &Path) -> Result<EdgeList> {
    EdgeList::read_from(BufReader::new(File::open(path)?))
}

fn sample_kpgm(args: &KpgmArgs) -> Result<()> {
    let chain = InitiatorChain::repeated(args.theta.matrix()?, args.d)?;
    let mut rng = seeded(args.seed);
    let graph = match args.method {
        KpgmAlgorithm::Rejection => kpgm_sample(&chain, &mut rng)?,
        KpgmAlgorithm::Exact => kpgm_sample_exact(&chain, &mut rng)?,
        KpgmAlgorithm::Naive => naive_kpgm_sample(&chain, &mut rng)?,
    };
    write_graph(&graph, &args.output)
}

fn magm_model(args: &MagmArgs) -> Result<MagmModel> {
    if let Some(path) = &args.config {
        return parse_model_config(&std::fs::read_to_string(path)?);
    }
    let (n, d) = (args.n.expect("required by clap"), args.d.expect("required by clap"));
    let chain = InitiatorChain::repeated(args.theta.matrix()?, d)?;
    MagmModel::with_shared_mu(chain, args.mu, n)
}

fn sample_magm(args: &MagmArgs) -> Result<()> {
    let model = magm_model(args)?;
    let (n, d) = (model.node_count(), model.depth());
    let gap = d as i64 - i64::from(n.ilog2());
    if gap >= 2 {
        eprintln!(
            "warning: d = {d} exceeds floor(log2 n) = {} by {gap}; quilting cost grows like 4^{gap} times the edge count",
            n.ilog2()
        );
    }

    let mut rng = seeded(args.seed);
    let attrs = match &args.attrs {
        Some(path) => AttributeAssignment::read_from(BufReader::new(File::open(path)?))?,
        None => sample_attributes(&model, &mut rng),
    };
    if let Some(path) = &args.save_attrs {
        let mut out = BufWriter::new(File::create(path)?);
        attrs.write_to(&mut out)?;
        out.flush()?;
    }

    let options = QuiltOptions {
        method: if args.rejection {
            KpgmMethod::NormalRejection
        } else {
            KpgmMethod::Exact
        },
        parallel: args.parallel,
        prune: args.prune,
        ..QuiltOptions::default()
    };
    let graph = if args.naive {
        naive_magm_sample(&model, &attrs, &mut rng)?
    } else if args.fast {
        let plan = match args.bprime {
            Some(0) => return Err(Error::InvalidParameter("--bprime must be at least 1".into())),
            Some(b) => plan_for_threshold(&attrs, model.chain(), b, expected_edge_sum(model.chain()).m),
            None => select_threshold(&attrs, model.chain()),
        };
        eprintln!("plan {}", plan.summary());
        fast_magm_sample_with_plan(&model, &attrs, &plan, &options, &mut rng)?
    } else {
        quilt_sample_with(&model, &attrs, &options, &mut rng)?
    };
    write_graph(&graph, &args.output)
}

fn stats(args: &StatsArgs) -> Result<()> {
    let spec = ExperimentSpec {
        theta: args.theta_preset.into_preset(),
        mu: args.mu,
        log2_n: args.log2_n.clone(),
        trials: args.trials,
        seed: args.seed,
        parallel_trials: args.parallel_trials,
        ..ExperimentSpec::new(Experiment::SccVsN)
    };
    let mut out = open_output(args.out.as_deref())?;
    match args.kind {
        StatsKind::Partition => write_rows(&partition_stats(&spec)?, &mut out)?,
        StatsKind::Graph => write_rows(&graph_stats(&spec)?, &mut out)?,
        StatsKind::Scc => {
            let graph = read_graph(args.graph.as_deref().expect("required by clap"))?;
            writeln!(out, "n,edges,scc_fraction")?;
            writeln!(out, "{},{},{}", graph.node_count(), graph.edge_count(), largest_scc_fraction(&graph))?;
        }
        StatsKind::Degrees => {
            let graph = read_graph(args.graph.as_deref().expect("required by clap"))?;
            let deg = degree_distribution(&graph);
            writeln!(out, "direction,degree,nodes")?;
            for (direction, histogram) in [("out", &deg.out_histogram), ("in", &deg.in_histogram)] {
                for (k, count) in histogram {
                    writeln!(out, "{direction},{k},{count}")?;
                }
            }
        }
    }
    out.flush()?;
    Ok(())
}

fn bench(args: &BenchArgs) -> Result<()> {
    let experiment: Experiment = args.experiment.parse()?;
    let mut spec = ExperimentSpec::new(experiment);
    spec.seed = args.seed;
    spec.parallel_trials = args.parallel_trials;
    spec.prune = args.prune;
    if let Some(r) = &args.log2_n {
        spec.log2_n = r.clone();
    }
    if let Some(r) = &args.d_offsets {
        spec.d_offsets = r.clone();
    }
    if let Some(m) = &args.mus {
        spec.mus = m.clone();
    }
    if let Some(mu) = args.mu {
        spec.mu = mu;
    }
    if let Some(t) = args.trials {
        spec.trials = t;
    }
    if let Some(p) = args.theta_preset {
        spec.theta = p.into_preset();
    }
    if let Some(v) = args.max_n {
        spec.max_n = v;
    }
    if let Some(v) = args.edge_budget {
        spec.edge_budget = v;
    }
    if let Some(v) = args.naive_max_n {
        spec.naive_max_n = v;
    }
    let table = run_experiment(&spec)?;
    let mut out = open_output(args.out.as_deref())?;
    table.write_csv(&mut out)?;
    out.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::SampleKpgm(args) => sample_kpgm(args),
        Command::SampleMagm(args) => sample_magm(args),
        Command::Stats(args) => stats(args),
        Command::Bench(args) => bench(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                _ if e.is_resource_guard() => 3,
                Error::Io(_) => 1,
                _ => 2,
            })
        }
    }
}
