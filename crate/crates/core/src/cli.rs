//! Command-line front end.
//!
//! Exit codes: 0 success, 1 infeasible or exhausted construction, 2 input
//! error. Every command writes `run-manifest.json` into `--out` with the full
//! configuration (minus output directory and worker count, which never
//! change results).

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::builder::{
    build_greedy, build_greedy_fp, build_proposed, BuildError, BuildReport, Termination,
    DEFAULT_GREEDY_LIMIT,
};
use crate::coherence::{MatrixSummary, RoutingMatrix};
use crate::paths::{enumerate_all_fps, enumerate_candidates, CandidateSet};
use crate::simulator::{sweep, DeclareRule, DelayScenario, SweepAxis, TrialOptions};
use crate::topology::{parse_topology, Topology};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INFEASIBLE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "reftomo",
    version,
    about = "Reflective network tomography toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// List measurement-path candidates.
    Paths(PathsArgs),
    /// Construct a routing matrix.
    Build(BuildArgs),
    /// Run bottleneck-detection sweeps.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum AlgorithmArg {
    Proposed,
    Greedy,
    GreedyFp,
}

#[derive(Debug, Args, Serialize)]
struct TopologyArgs {
    /// Topology file.
    #[arg(long, value_name = "FILE")]
    topology: Option<PathBuf>,
    /// Longest folded path added for greedy-fp, in hops [default: nodes - 1].
    #[arg(long, value_name = "N", value_parser = clap::value_parser!(u32).range(1..))]
    fp_max_hops: Option<u32>,
}

#[derive(Debug, Args, Serialize)]
struct BuilderArgs {
    #[arg(long, value_enum, default_value = "proposed")]
    algorithm: AlgorithmArg,
    /// Largest pool the exhaustive baselines will search.
    #[arg(long, value_name = "N", default_value_t = DEFAULT_GREEDY_LIMIT)]
    greedy_limit: usize,
}

#[derive(Debug, Args, Serialize)]
struct OutArgs {
    /// Output directory.
    #[arg(long, value_name = "DIR", default_value = "out")]
    #[serde(skip)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct PathsArgs {
    #[command(flatten)]
    #[serde(flatten)]
    topology: TopologyArgs,
    #[command(flatten)]
    #[serde(skip)]
    out: OutArgs,
}

#[derive(Debug, Args, Serialize)]
struct BuildArgs {
    #[command(flatten)]
    #[serde(flatten)]
    topology: TopologyArgs,
    #[command(flatten)]
    #[serde(flatten)]
    builder: BuilderArgs,
    #[command(flatten)]
    #[serde(skip)]
    out: OutArgs,
}

#[derive(Debug, Args, Serialize)]
struct SimulateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    topology: TopologyArgs,
    #[command(flatten)]
    #[serde(flatten)]
    builder: BuilderArgs,
    /// Use this routing-matrix CSV instead of building one from --topology.
    #[arg(long, value_name = "CSV")]
    matrix: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
    trials: u64,
    /// Bottleneck delay in ms; several values sweep over it.
    #[arg(
        long,
        value_name = "MS[,MS...]",
        value_delimiter = ',',
        default_value = "1000"
    )]
    xb: Vec<f64>,
    /// Number of bottleneck links; several values sweep over it.
    #[arg(
        long,
        value_name = "N[,N...]",
        value_delimiter = ',',
        default_value = "1"
    )]
    k: Vec<usize>,
    /// Sweep axis and values, such as `k=1,2,3` or `xb=50,100`.
    #[arg(long, value_name = "AXIS=V[,V...]")]
    sweep: Option<String>,
    /// Mean normal-link delay in ms.
    #[arg(long, default_value_t = 15.0)]
    alpha: f64,
    /// Standard deviation of normal-link delay in ms.
    #[arg(long, default_value_t = 3.0)]
    sigma: f64,
    /// Fixed regularization weight [default: 0.01 * max |A^T y|].
    #[arg(long)]
    lambda: Option<f64>,
    /// `topk` (true bottleneck count) or `threshold:T`.
    #[arg(long, default_value = "topk", value_parser = parse_declare)]
    declare: DeclareRule,
    /// Also write one JSON line per trial.
    #[arg(long)]
    trial_log: bool,
    #[arg(long, value_name = "N")]
    #[serde(skip)]
    workers: Option<usize>,
    #[command(flatten)]
    #[serde(skip)]
    out: OutArgs,
}

fn parse_declare(s: &str) -> Result<DeclareRule, String> {
    if s == "topk" {
        return Ok(DeclareRule::TopK);
    }
    let t = s
        .strip_prefix("threshold:")
        .ok_or_else(|| format!("expected `topk` or `threshold:T`, got `{s}`"))?;
    let t: f64 = t.parse().map_err(|e| format!("bad threshold `{t}`: {e}"))?;
    if t.is_nan() || t <= 0.0 {
        return Err(format!("threshold must be positive, got {t}"));
    }
    Ok(DeclareRule::Threshold(t))
}

/// Error carrying the process exit code.
#[derive(Debug)]
struct Failure {
    code: i32,
    error: anyhow::Error,
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        Failure {
            code: EXIT_INPUT,
            error,
        }
    }
}

fn infeasible(error: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code: EXIT_INFEASIBLE,
        error: error.into(),
    }
}

/// Parses `args` (including the program name), runs the command and
/// returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    let result = match &cli.command {
        Command::Paths(a) => cmd_paths(a),
        Command::Build(a) => cmd_build(a),
        Command::Simulate(a) => cmd_simulate(a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            f.code
        }
    }
}

fn load_topology(args: &TopologyArgs) -> anyhow::Result<Topology> {
    let path = args.topology.as_ref().context("--topology is required")?;
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_topology(&text).with_context(|| format!("parsing {}", path.display()))
}

fn fp_pool(top: &Topology, args: &TopologyArgs) -> CandidateSet {
    let hops = args
        .fp_max_hops
        .map_or(top.node_count() - 1, |h| h as usize);
    enumerate_all_fps(top, hops)
}

fn write(dir: &Path, name: &str, contents: &str) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("plain data");
    s.push('\n');
    s
}

#[derive(Serialize)]
struct Manifest<'a, C: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    config: &'a C,
}

fn write_manifest<C: Serialize>(
    out: &Path,
    command: &'static str,
    config: &C,
) -> anyhow::Result<()> {
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        command,
        config,
    };
    write(out, "run-manifest.json", &to_json(&manifest))
}

fn cmd_paths(args: &PathsArgs) -> Result<(), Failure> {
    let top = load_topology(&args.topology)?;
    let set = enumerate_candidates(&top);
    write(&args.out.out, "candidates.txt", &set.to_listing(&top))?;
    if args.topology.fp_max_hops.is_some() {
        let fps = fp_pool(&top, &args.topology);
        write(&args.out.out, "fps.txt", &fps.to_listing(&top))?;
        println!("folded paths: {}", fps.len());
    }
    write_manifest(&args.out.out, "paths", args)?;
    println!("candidates: {}", set.len());
    Ok(())
}

/// Candidate pool and report for the selected algorithm.
fn construct(
    top: &Topology,
    topo: &TopologyArgs,
    builder: &BuilderArgs,
) -> Result<(CandidateSet, BuildReport), Failure> {
    let step1 = enumerate_candidates(top);
    let result = match builder.algorithm {
        AlgorithmArg::Proposed => build_proposed(&step1).map(|r| (step1, r)),
        AlgorithmArg::Greedy => build_greedy(&step1, builder.greedy_limit).map(|r| (step1, r)),
        AlgorithmArg::GreedyFp => {
            let fps = fp_pool(top, topo);
            let pool = step1.union(&fps);
            build_greedy_fp(&step1, &fps, builder.greedy_limit).map(|r| (pool, r))
        }
    };
    match result {
        Ok(pair) => Ok(pair),
        Err(e @ BuildError::NoFeasibleSubset) => Err(infeasible(e)),
        Err(e) => Err(anyhow::Error::from(e).into()),
    }
}

fn write_matrix(out: &Path, m: &RoutingMatrix) -> anyhow::Result<()> {
    write(out, "matrix.csv", &m.to_csv())?;
    write(out, "matrix.json", &to_json(&MatrixSummary::of(m)))
}

fn cmd_build(args: &BuildArgs) -> Result<(), Failure> {
    let top = load_topology(&args.topology)?;
    let (pool, report) = construct(&top, &args.topology, &args.builder)?;
    let out = &args.out.out;
    write_matrix(out, &report.matrix)?;
    let json = report.to_json(&top, &pool);
    write(out, "report.json", &to_json(&json))?;
    write_manifest(out, "build", args)?;
    println!(
        "{}: I={} J={} traffic={} mu={} k_max={} cost_evaluations={}",
        serde_json::to_string(&json.algorithm)
            .unwrap()
            .trim_matches('"'),
        json.interval_factor,
        json.links,
        json.traffic_factor,
        json.mu,
        json.k_max,
        json.cost_evaluations
    );
    if report.terminated == Termination::Exhausted {
        return Err(infeasible(anyhow::anyhow!(
            "candidate pool exhausted with mutual coherence still >= 1"
        )));
    }
    Ok(())
}

fn parse_sweep(text: &str) -> anyhow::Result<SweepAxis> {
    let (axis, values) = text
        .split_once('=')
        .context("sweep must look like `k=1,2,3` or `xb=50,100`")?;
    let values: Vec<&str> = values.split(',').map(str::trim).collect();
    Ok(match axis.trim() {
        "k" => SweepAxis::BottleneckCount(
            values
                .iter()
                .map(|v| v.parse().with_context(|| format!("bad k `{v}`")))
                .collect::<anyhow::Result<_>>()?,
        ),
        "xb" => SweepAxis::BottleneckDelay(
            values
                .iter()
                .map(|v| v.parse().with_context(|| format!("bad xb `{v}`")))
                .collect::<anyhow::Result<_>>()?,
        ),
        other => bail!("unknown sweep axis `{other}`, expected `k` or `xb`"),
    })
}

fn resolve_axis(args: &SimulateArgs) -> anyhow::Result<(SweepAxis, f64, usize)> {
    if let Some(text) = &args.sweep {
        let axis = parse_sweep(text)?;
        if matches!(axis, SweepAxis::BottleneckCount(_)) && args.k.len() > 1
            || matches!(axis, SweepAxis::BottleneckDelay(_)) && args.xb.len() > 1
        {
            bail!("--sweep conflicts with a multi-valued --k/--xb");
        }
        return Ok((axis, args.xb[0], args.k[0]));
    }
    match (args.xb.len(), args.k.len()) {
        (_, 1) => Ok((
            SweepAxis::BottleneckDelay(args.xb.clone()),
            args.xb[0],
            args.k[0],
        )),
        (1, _) => Ok((
            SweepAxis::BottleneckCount(args.k.clone()),
            args.xb[0],
            args.k[0],
        )),
        _ => bail!("only one of --xb and --k may list several values"),
    }
}

fn cmd_simulate(args: &SimulateArgs) -> Result<(), Failure> {
    let (axis, xb, k) = resolve_axis(args)?;
    if let Some(l) = args.lambda {
        if !(l > 0.0 && l.is_finite()) {
            return Err(anyhow::anyhow!("--lambda must be positive, got {l}").into());
        }
    }
    let out = &args.out.out;
    let matrix = match &args.matrix {
        Some(path) => {
            let text =
                fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            RoutingMatrix::from_csv(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => {
            let top = load_topology(&args.topology)?;
            let (_, report) = construct(&top, &args.topology, &args.builder)?;
            if report.terminated == Termination::Exhausted {
                return Err(infeasible(anyhow::anyhow!(
                    "candidate pool exhausted with mutual coherence still >= 1"
                )));
            }
            report.matrix
        }
    };
    if matrix.is_empty() {
        return Err(anyhow::anyhow!("routing matrix has no rows").into());
    }

    let base = DelayScenario {
        alpha_normal: args.alpha,
        sigma_normal: args.sigma,
        x_bottleneck: xb,
        k,
        seed: args.seed,
        trials: args.trials as usize,
    };
    let opts = TrialOptions {
        lambda: args.lambda,
        declare: args.declare,
    };
    let workers = args
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let result = sweep(&matrix, &base, &axis, &opts, workers).map_err(anyhow::Error::from)?;

    write(out, "results.csv", &result.to_csv())?;
    if args.trial_log {
        write(out, "trials.jsonl", &result.to_jsonl())?;
    }
    write_matrix(out, &matrix)?;
    write_manifest(out, "simulate", args)?;
    for row in &result.rows {
        println!(
            "{}={} detection_ratio={} ({} trials)",
            result.axis, row.value, row.detection_ratio, row.trials
        );
    }
    Ok(())
}
