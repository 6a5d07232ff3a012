use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use mlp_core::harness::{
    dimension_sweep, run_experiment, write_runs_csv, write_stats_csv, write_sweep_csv,
    ExperimentConfig, RunRecord, StatsRow,
};
use mlp_core::{
    build_example, fd_reference, ExampleName, Mlp, RngKey, SchemeParams, DEFAULT_BUDGET,
};

/// Multilevel Picard solver for semilinear parabolic PDEs.
#[derive(Parser, Debug)]
#[command(name = "mlp", version)]
struct Cli {
    /// TOML file with the same keys as the flags (dashes or underscores).
    /// Flags given on the command line take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// One estimate of u(0, x0).
    Solve(SolveArgs),
    /// Repeated runs over rho = 1..=rho_max with error statistics.
    Experiment(ExperimentArgs),
    /// Runtime against dimension at a fixed rho.
    Sweep(SweepArgs),
    /// One-dimensional finite-difference reference value.
    FdRef(FdRefArgs),
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[arg(long)]
    example: Option<ExampleName>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    rho: Option<u32>,
    /// Iteration level, defaults to rho.
    #[arg(long)]
    k: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    budget: Option<u64>,
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    #[arg(long)]
    example: Option<ExampleName>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    rho_max: Option<u32>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    budget: Option<u64>,
    /// Statistics CSV. Raw per-run rows go next to it with a `.runs.csv` suffix.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Time steps of the finite-difference reference.
    #[arg(long)]
    fd_steps: Option<usize>,
    /// Leave runtime columns empty so output is reproducible byte for byte.
    #[arg(long)]
    omit_runtime: bool,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long)]
    example: Option<ExampleName>,
    #[arg(long)]
    rho: Option<u32>,
    /// `a..b` (inclusive), `a..b:step` or a comma list.
    #[arg(long)]
    dims: Option<String>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    budget: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct FdRefArgs {
    #[arg(long)]
    example: Option<ExampleName>,
    #[arg(long)]
    nsteps: Option<usize>,
}

#[derive(Deserialize, Default, Debug)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    example: Option<String>,
    dim: Option<usize>,
    rho: Option<u32>,
    k: Option<u32>,
    #[serde(alias = "rho-max")]
    rho_max: Option<u32>,
    runs: Option<usize>,
    seed: Option<u64>,
    budget: Option<u64>,
    out: Option<PathBuf>,
    dims: Option<String>,
    nsteps: Option<usize>,
    #[serde(alias = "fd-steps")]
    fd_steps: Option<usize>,
    #[serde(alias = "omit-runtime")]
    omit_runtime: Option<bool>,
}

impl FileConfig {
    fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    fn example(&self, flag: Option<ExampleName>) -> Result<ExampleName> {
        match (flag, &self.example) {
            (Some(e), _) => Ok(e),
            (None, Some(s)) => Ok(s.parse()?),
            (None, None) => bail!("--example is required"),
        }
    }
}

fn need<T>(flag: Option<T>, file: Option<T>, name: &str) -> Result<T> {
    flag.or(file)
        .with_context(|| format!("--{name} is required"))
}

fn parse_dims(spec: &str) -> Result<Vec<usize>> {
    let spec = spec.trim();
    if let Some((range, step)) = spec
        .split_once("..")
        .map(|(a, rest)| (a, rest.split_once(':').unwrap_or((rest, "1"))))
        .map(|(a, (b, s))| ((a, b), s))
    {
        let lo: usize = range.0.trim().parse().context("range start")?;
        let hi: usize = range.1.trim().parse().context("range end")?;
        let step: usize = step.trim().parse().context("range step")?;
        if step == 0 || lo == 0 || lo > hi {
            bail!("bad dimension range {spec:?}");
        }
        return Ok((lo..=hi).step_by(step).collect());
    }
    let dims = spec
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .with_context(|| format!("bad dimension {s:?}"))
        })
        .collect::<Result<Vec<_>>>()?;
    if dims.is_empty() || dims.contains(&0) {
        bail!("bad dimension list {spec:?}");
    }
    Ok(dims)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn runs_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    out.with_file_name(format!("{stem}.runs.csv"))
}

fn solve(args: SolveArgs, file: &FileConfig) -> Result<()> {
    let example = file.example(args.example)?;
    let dim = need(args.dim, file.dim, "dim")?;
    let rho = need(args.rho, file.rho, "rho")?;
    let k = args.k.or(file.k).unwrap_or(rho);
    let seed = need(args.seed, file.seed, "seed")?;
    let budget = args.budget.or(file.budget).unwrap_or(DEFAULT_BUDGET);

    let cfg = build_example(example, dim)?;
    let mlp = Mlp::new(
        &cfg.problem,
        cfg.driver,
        SchemeParams::new(rho, cfg.variant),
    )?
    .with_budget(budget);
    let est = mlp.estimate(k, 0.0, cfg.problem.eval_point(), &RngKey::from_seed(seed))?;
    println!("{}", mlp_core::harness::fmt_sig6(est.value));
    Ok(())
}

fn experiment(args: ExperimentArgs, file: &FileConfig) -> Result<()> {
    let example = file.example(args.example)?;
    let dim = need(args.dim, file.dim, "dim")?;
    let rho_max = need(args.rho_max, file.rho_max, "rho-max")?;
    let mut cfg = ExperimentConfig::new(
        example,
        dim,
        (1..=rho_max).collect(),
        args.runs.or(file.runs).unwrap_or(10),
        need(args.seed, file.seed, "seed")?,
    );
    if let Some(b) = args.budget.or(file.budget) {
        cfg.budget = b;
    }
    if let Some(n) = args.fd_steps.or(file.fd_steps) {
        cfg.fd_steps = n;
    }
    let omit_runtime = args.omit_runtime || file.omit_runtime.unwrap_or(false);
    let out = args.out.or_else(|| file.out.clone());

    let mut result = run_experiment(&cfg)?;
    if omit_runtime {
        result
            .rows
            .iter_mut()
            .for_each(|r: &mut StatsRow| r.runtime_seconds = f64::NAN);
        result
            .runs
            .iter_mut()
            .for_each(|r: &mut RunRecord| r.runtime_seconds = f64::NAN);
    }
    if let Some(v) = result.reference {
        eprintln!("reference value {}", mlp_core::harness::fmt_sig6(v));
    }
    match out {
        Some(path) => {
            let mut w = create(&path)?;
            write_stats_csv(&mut w, &result.rows)?;
            w.flush()?;
            let mut w = create(&runs_path(&path))?;
            write_runs_csv(&mut w, &result.runs)?;
            w.flush()?;
        }
        None => {
            let stdout = std::io::stdout();
            write_stats_csv(stdout.lock(), &result.rows)?;
        }
    }
    Ok(())
}

fn sweep(args: SweepArgs, file: &FileConfig) -> Result<()> {
    let example = file.example(args.example)?;
    let rho = need(args.rho, file.rho, "rho")?;
    let dims = parse_dims(&need(args.dims, file.dims.clone(), "dims")?)?;
    let runs = args.runs.or(file.runs).unwrap_or(1);
    let seed = args.seed.or(file.seed).unwrap_or(0);
    let budget = args.budget.or(file.budget).unwrap_or(DEFAULT_BUDGET);
    let rows = dimension_sweep(example, rho, &dims, runs, seed, budget)?;
    match args.out.or_else(|| file.out.clone()) {
        Some(path) => {
            let mut w = create(&path)?;
            write_sweep_csv(&mut w, &rows)?;
            w.flush()?;
        }
        None => write_sweep_csv(std::io::stdout().lock(), &rows)?,
    }
    Ok(())
}

fn fd_ref(args: FdRefArgs, file: &FileConfig) -> Result<()> {
    let example = file.example(args.example)?;
    let nsteps = args
        .nsteps
        .or(file.nsteps)
        .unwrap_or(mlp_core::fdref::DEFAULT_STEPS);
    let cfg = build_example(example, 1)?;
    let v = fd_reference(&cfg, nsteps)?;
    println!("{}", mlp_core::harness::fmt_sig6(v));
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    match cli.command {
        Command::Solve(a) => solve(a, &file),
        Command::Experiment(a) => experiment(a, &file),
        Command::Sweep(a) => sweep(a, &file),
        Command::FdRef(a) => fd_ref(a, &file),
    }
}
