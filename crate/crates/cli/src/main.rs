//! Command-line harness: generate instances, sample datasets, estimate,
//! solve, and run seeded experiments with CSV output.
//!
//! Exit codes: 0 success or pass, 1 bound violated, 2 configuration or
//! input error, 3 insufficient samples.

mod config;
mod report;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use subseq::estimation::{concentration_report, BucketKind};
use subseq::oracle::{instance_curvature, measure_curvature};
use subseq::sampling::format_decimal;
use subseq::{
    build_buckets, build_dataset, compute_alpha, delta_bound, delta_tilde_matrix,
    sequencing_from_samples, solve_assignment, AlgoConfig, AlgoMode, Dataset, DeltaMatrix,
    EstimationMode, Family, Instance, InstanceRecord,
};

use config::{ExperimentConfig, ModelSpec};
use report::{make_row, optimum_if_small, write_rows, RowInput, Summary};

#[derive(Parser)]
#[command(name = "subseq", version, about = "Learn item sequences from sampled utilities")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a reproducible instance record.
    Gen(GenArgs),
    /// Draw a two-stage uniform dataset from an instance.
    Sample(SampleArgs),
    /// Estimate per-slot gains from a dataset (CSV).
    Estimate(EstimateArgs),
    /// Solve the assignment problem for a gain matrix.
    Solve(SolveArgs),
    /// Run the sequencing algorithm on a dataset.
    Run(RunArgs),
    /// Run a seeded experiment from a config file.
    Experiment(ExperimentArgs),
    /// Print the measured curvature of an instance.
    Curvature(CurvatureArgs),
    /// Print the avoidance probability for n, k.
    Alpha(AlphaArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FamilyArg {
    Modular,
    Coverage,
    Facility,
    PatienceScaled,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BaseArg {
    Modular,
    Coverage,
    Facility,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum)]
    family: FamilyArg,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Explicit modular weights, comma separated.
    #[arg(long, value_delimiter = ',')]
    weights: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0.0)]
    low: f64,
    #[arg(long, default_value_t = 1.0)]
    high: f64,
    #[arg(long, default_value_t = 10)]
    universe: usize,
    #[arg(long, default_value_t = 0.4)]
    density: f64,
    #[arg(long, default_value_t = 5)]
    clients: usize,
    /// Per-slot scales for patience-scaled instances (default 1/k each).
    #[arg(long, value_delimiter = ',')]
    scales: Option<Vec<f64>>,
    /// Base family for patience-scaled instances.
    #[arg(long, value_enum, default_value = "coverage")]
    base: BaseArg,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long)]
    instance: PathBuf,
    /// exact, bernoulli, or noise:<b>
    #[arg(long, default_value = "exact")]
    model: ModelSpec,
    #[arg(long)]
    m: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// Substitute 0 for empty buckets instead of failing.
    #[arg(long)]
    lenient: bool,
    /// Print the concentration report to stderr.
    #[arg(long)]
    report: bool,
    /// Overrides the dataset's value bound in the report.
    #[arg(long)]
    delta: Option<f64>,
    /// Per-bucket failure probability the report checks against.
    #[arg(long, default_value_t = 0.05)]
    target: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SolveArgs {
    /// Gain matrix CSV as written by `estimate`.
    #[arg(long)]
    weights: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// Instance file; enables exact scoring against the optimum.
    #[arg(long)]
    instance: Option<PathBuf>,
    #[arg(long)]
    curvature: Option<f64>,
    #[arg(long)]
    matching_only: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    lenient: bool,
    #[arg(long, default_value_t = 200)]
    fallback_draws: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the configured results path.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CurvatureArgs {
    #[arg(long)]
    instance: PathBuf,
}

#[derive(Args)]
struct AlphaArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    k: usize,
}

fn read(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn emit(path: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_instance(path: &Path) -> anyhow::Result<Instance> {
    Ok(InstanceRecord::from_toml(&read(path)?)?.build()?)
}

fn load_dataset(path: &Path) -> anyhow::Result<Dataset> {
    Ok(Dataset::from_text(&read(path)?)?)
}

fn estimation(lenient: bool) -> EstimationMode {
    if lenient {
        EstimationMode::Lenient
    } else {
        EstimationMode::Strict
    }
}

/// Explicit value, else the instance's hint, else the measured value.
fn resolve_curvature(explicit: Option<f64>, inst: Option<&Instance>) -> anyhow::Result<Option<f64>> {
    if explicit.is_some() {
        return Ok(explicit);
    }
    match inst {
        Some(inst) => match inst.curvature_hint() {
            Some(c) => Ok(Some(c)),
            None => Ok(Some(instance_curvature(inst)?)),
        },
        None => Ok(None),
    }
}

fn cmd_gen(a: GenArgs) -> anyhow::Result<()> {
    let family_of = |base: BaseArg| match base {
        BaseArg::Modular => Family::Modular { weights: a.weights.clone(), low: a.low, high: a.high },
        BaseArg::Coverage => Family::Coverage { universe: a.universe, density: a.density },
        BaseArg::Facility => Family::Facility { clients: a.clients },
    };
    let family = match a.family {
        FamilyArg::Modular => family_of(BaseArg::Modular),
        FamilyArg::Coverage => family_of(BaseArg::Coverage),
        FamilyArg::Facility => family_of(BaseArg::Facility),
        FamilyArg::PatienceScaled => Family::PatienceScaled {
            scales: a.scales.clone().unwrap_or_else(|| vec![1.0 / a.k.max(1) as f64; a.k]),
            base: Box::new(family_of(a.base)),
        },
    };
    let record = InstanceRecord { n: a.n, k: a.k, seed: a.seed, family };
    record.build()?;
    emit(a.out.as_deref(), &record.to_toml())
}

fn cmd_sample(a: SampleArgs) -> anyhow::Result<()> {
    let inst = load_instance(&a.instance)?;
    let ds = build_dataset(&inst, &a.model.model(), a.m, a.seed)?;
    emit(a.out.as_deref(), &ds.to_text())
}

fn cmd_estimate(a: EstimateArgs) -> anyhow::Result<()> {
    let ds = load_dataset(&a.dataset)?;
    let buckets = build_buckets(&ds);
    if a.report {
        let delta = delta_bound(&ds, a.delta);
        let floor = ds.records().iter().map(|r| r.phi).fold(0.0, f64::min);
        let rep = concentration_report(&buckets, delta, floor, a.target);
        let worst = rep
            .buckets
            .iter()
            .max_by(|x, y| x.failure_bound.total_cmp(&y.failure_bound))
            .expect("at least the full-length bucket");
        let kind = match worst.kind {
            BucketKind::Last => "last",
            BucketKind::Excl => "excl",
            BucketKind::Full => "full",
        };
        eprintln!(
            "epsilon={} range=[{}, {}] buckets={} min_bucket_size={} worst_bucket={kind}:{}:{} worst_failure_bound={} target={} meets_target={}",
            format_decimal(rep.epsilon),
            format_decimal(rep.range.0),
            format_decimal(rep.range.1),
            rep.buckets.len(),
            rep.min_bucket_size,
            worst.item.map_or_else(|| "-".to_string(), |i| i.to_string()),
            worst.len,
            format_decimal(worst.failure_bound),
            format_decimal(rep.target),
            rep.meets_target,
        );
    }
    let matrix = delta_tilde_matrix(&buckets, estimation(a.lenient))?;
    emit(a.out.as_deref(), &matrix.to_csv())
}

fn cmd_solve(a: SolveArgs) -> anyhow::Result<()> {
    let weights = DeltaMatrix::from_csv(&read(&a.weights)?)?;
    let assignment = solve_assignment(&weights)?;
    let seq = subseq::assignment_to_sequence(&assignment);
    println!("sequence: {seq}");
    println!("weight: {}", format_decimal(assignment.total_weight));
    Ok(())
}

fn cmd_run(a: RunArgs) -> anyhow::Result<()> {
    let ds = load_dataset(&a.dataset)?;
    let inst = a.instance.as_deref().map(load_instance).transpose()?;
    if let Some(inst) = &inst {
        if (inst.n(), inst.k()) != (ds.n(), ds.k()) {
            return Err(subseq::Error::Config(format!(
                "instance has n = {}, k = {} but the dataset has n = {}, k = {}",
                inst.n(),
                inst.k(),
                ds.n(),
                ds.k()
            ))
            .into());
        }
    }
    let mode = if a.matching_only { AlgoMode::MatchingOnly } else { AlgoMode::Full };
    let curvature = resolve_curvature(a.curvature, inst.as_ref())?;
    let cfg = AlgoConfig { curvature, mode, seed: a.seed, estimation: estimation(a.lenient) };
    let out = sequencing_from_samples(&ds, ds.n(), ds.k(), &cfg)?;
    let optimum = match &inst {
        Some(inst) => optimum_if_small(inst)?,
        None => None,
    };
    let input = RowInput {
        seed: a.seed,
        m: ds.len(),
        mode,
        instance: inst.as_ref(),
        optimum,
        fallback_draws: a.fallback_draws.max(1),
    };
    let row = make_row(&input, &out)?;
    let mut buf = Vec::new();
    write_rows(&[row], &mut buf)?;
    emit(a.out.as_deref(), &String::from_utf8(buf)?)
}

/// Runs every seed and returns the rows (in seed order) and summary.
fn run_experiment(cfg: &ExperimentConfig) -> anyhow::Result<(Vec<report::ResultRow>, Summary)> {
    let inst = cfg.instance.build().context("stage gen")?;
    let model = cfg.model.model();
    model.validate(&inst).context("stage sample")?;
    let mode = AlgoMode::from(cfg.algorithm.mode);
    let curvature = match resolve_curvature(cfg.algorithm.curvature, Some(&inst)) {
        Ok(c) => c,
        // matching-only runs do not need the curvature
        Err(_) if mode == AlgoMode::MatchingOnly => None,
        Err(e) => return Err(e.context("stage curvature")),
    };
    let optimum = optimum_if_small(&inst).context("stage oracle")?;

    let rows = cfg
        .seeds
        .par_iter()
        .map(|&seed| {
            let ds = build_dataset(&inst, &model, cfg.m, seed)
                .with_context(|| format!("stage sample (seed {seed})"))?;
            let algo = AlgoConfig { curvature, mode, seed, estimation: cfg.estimation() };
            let out = sequencing_from_samples(&ds, inst.n(), inst.k(), &algo)
                .with_context(|| format!("stage run (seed {seed})"))?;
            let input = RowInput {
                seed,
                m: cfg.m,
                mode,
                instance: Some(&inst),
                optimum,
                fallback_draws: cfg.fallback_draws,
            };
            make_row(&input, &out).with_context(|| format!("stage evaluate (seed {seed})"))
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    let summary = Summary::from_rows(&rows, cfg.tolerance);
    Ok((rows, summary))
}

fn cmd_experiment(a: ExperimentArgs) -> anyhow::Result<ExitCode> {
    let cfg = ExperimentConfig::load(&a.config)?;
    let base = a.config.parent().unwrap_or(Path::new("."));
    let (rows, summary) = run_experiment(&cfg)?;

    let results = a.out.unwrap_or_else(|| base.join(&cfg.output.results));
    let file = fs::File::create(&results).with_context(|| format!("writing {}", results.display()))?;
    write_rows(&rows, file)?;
    println!("{summary}");
    if let Some(path) = &cfg.output.summary {
        let path = base.join(path);
        fs::write(&path, format!("{summary}\n"))
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(if summary.pass == Some(false) { ExitCode::from(1) } else { ExitCode::SUCCESS })
}

fn cmd_curvature(a: CurvatureArgs) -> anyhow::Result<()> {
    let inst = load_instance(&a.instance)?;
    for (j, f) in inst.functions().iter().enumerate() {
        println!("f_{} {}", j + 1, format_decimal(measure_curvature(f.as_ref(), inst.n())?));
    }
    println!("instance {}", format_decimal(instance_curvature(&inst)?));
    Ok(())
}

fn cmd_alpha(a: AlphaArgs) -> anyhow::Result<()> {
    println!("{}", compute_alpha(a.n, a.k)?);
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let core = err.chain().find_map(|e| e.downcast_ref::<subseq::Error>());
    match core {
        Some(subseq::Error::InsufficientSamples { .. }) => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(a) => cmd_gen(a).map(|_| ExitCode::SUCCESS),
        Command::Sample(a) => cmd_sample(a).map(|_| ExitCode::SUCCESS),
        Command::Estimate(a) => cmd_estimate(a).map(|_| ExitCode::SUCCESS),
        Command::Solve(a) => cmd_solve(a).map(|_| ExitCode::SUCCESS),
        Command::Run(a) => cmd_run(a).map(|_| ExitCode::SUCCESS),
        Command::Experiment(a) => cmd_experiment(a),
        Command::Curvature(a) => cmd_curvature(a).map(|_| ExitCode::SUCCESS),
        Command::Alpha(a) => cmd_alpha(a).map(|_| ExitCode::SUCCESS),
    };
    result.unwrap_or_else(|err| {
        eprintln!("error: {err:#}");
        ExitCode::from(exit_code(&err))
    })
}
