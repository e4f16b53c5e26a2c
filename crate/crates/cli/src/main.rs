//! `indirect-phys`: generate synthetic well fields, train and evaluate UCS
//! models supervised through sonic logs, and run hyperparameter sweeps.

mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use indirect_phys::data::{generate_synthetic_field, load_table, write_table};
use indirect_phys::trainer::run_repeated;
use indirect_phys::{Dataset, RepeatedSummary, TrainConfig};
use log::{info, warn};

use config::{ConfigFile, RunSection};
use output::SweepRow;

#[derive(Parser)]
#[command(name = "indirect-phys", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic multi-well log table.
    Generate(GenerateArgs),
    /// Split, train, evaluate and write reports, predictions and a checkpoint.
    Train(TrainArgs),
    /// Repeat training over a one-at-a-time hyperparameter grid.
    Sweep(SweepArgs),
    /// Repeated training with the covariance fix off, recording orientations.
    Symmetry(SymmetryArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Toggle {
    On,
    Off,
}

impl Toggle {
    fn is_on(self) -> bool {
        self == Toggle::On
    }

    fn name(self) -> &'static str {
        match self {
            Toggle::On => "on",
            Toggle::Off => "off",
        }
    }
}

fn at_least<const MIN: usize>(s: &str) -> Result<usize, String> {
    let v: usize = s.parse().map_err(|e| format!("{e}"))?;
    if v < MIN {
        return Err(format!("must be at least {MIN}"));
    }
    Ok(v)
}

#[derive(Args)]
struct GenerateArgs {
    /// Number of wells, at least 2 so a train/test split is possible.
    #[arg(long, value_parser = at_least::<2>)]
    wells: usize,
    #[arg(long, default_value_t = 2000, value_parser = at_least::<200>)]
    samples: usize,
    #[arg(long, env = "INDIRECT_PHYS_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CommonArgs {
    /// Log table produced by `generate` (or any file in the same format).
    #[arg(long)]
    data: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
    /// TOML file with `[train]` and `[run]` sections; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, env = "INDIRECT_PHYS_SEED")]
    seed: Option<u64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    seq_len: Option<usize>,
    #[arg(long)]
    batchnorm: Option<Toggle>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    normalize_projection: Option<Toggle>,
    #[arg(long)]
    detach_projection: Option<Toggle>,
    /// Parallel runs; 0 uses every core.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long)]
    covariance_fix: Option<Toggle>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Repetitions per grid point.
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long)]
    covariance_fix: Option<Toggle>,
    #[arg(long, value_delimiter = ',')]
    batch_sizes: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    seq_lens: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    batchnorm_grid: Vec<Toggle>,
}

#[derive(Args)]
struct SymmetryArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    repeats: Option<usize>,
}

/// Everything a training command needs after flags, config file and
/// defaults have been merged.
struct Experiment {
    data: PathBuf,
    out: PathBuf,
    file: ConfigFile,
    repeats: usize,
    jobs: usize,
}

impl Experiment {
    fn resolve(
        common: &CommonArgs,
        repeats: Option<usize>,
        default_repeats: usize,
        covariance_fix: Option<Toggle>,
    ) -> Result<Self> {
        let file = ConfigFile::load(common.config.as_deref())?;
        let mut cfg = file.train.clone();
        if let Some(v) = common.seed {
            cfg.seed = v;
        }
        if let Some(v) = common.batch_size {
            cfg.batch_size = v;
        }
        if let Some(v) = common.seq_len {
            cfg.seq_len = v;
        }
        if let Some(v) = common.batchnorm {
            cfg.use_batchnorm = v.is_on();
        }
        if let Some(v) = common.hidden {
            cfg.hidden_size = v;
        }
        if let Some(v) = common.lr {
            cfg.learning_rate = v;
        }
        if let Some(v) = common.iters {
            cfg.iterations = v;
        }
        if let Some(v) = common.normalize_projection {
            cfg.normalize_projection = v.is_on();
        }
        if let Some(v) = common.detach_projection {
            cfg.detach_projection_branch = v.is_on();
        }
        if let Some(v) = covariance_fix {
            cfg.covariance_fix_enabled = v.is_on();
        }
        let repeats = repeats.or(file.run.repeats).unwrap_or(default_repeats);
        if repeats == 0 {
            bail!("--repeats must be at least 1");
        }
        let jobs = common.jobs.or(file.run.jobs).unwrap_or(0);
        cfg.validate()?;
        Ok(Self {
            data: common.data.clone(),
            out: common.out.clone(),
            file: ConfigFile {
                train: cfg,
                run: RunSection {
                    repeats: Some(repeats),
                    jobs: Some(jobs),
                },
            },
            repeats,
            jobs,
        })
    }

    fn cfg(&self) -> &TrainConfig {
        &self.file.train
    }

    fn prepare(&self, command: &str) -> Result<Dataset> {
        let ds = load_dataset(&self.data)?;
        output::create_dir(&self.out)?;
        self.file.echo(
            &self.out,
            &format!("indirect-phys {command} --data {}", self.data.display()),
        )?;
        Ok(ds)
    }
}

fn load_dataset(path: &Path) -> Result<Dataset> {
    let (ds, report) = load_table(path)?;
    for r in &report.rejected {
        warn!(
            "{}:{} well {}: {}",
            path.display(),
            r.line,
            r.well_id,
            r.reason
        );
    }
    info!(
        "loaded {} wells, {} samples ({} rows rejected)",
        ds.wells().len(),
        ds.n_samples(),
        report.rejected.len()
    );
    Ok(ds)
}

fn report_failures(summary: &RepeatedSummary, context: &str) -> usize {
    for f in &summary.failures {
        eprintln!(
            "{context}run {} (seed {}) failed: {}",
            f.run, f.seed, f.message
        );
    }
    summary.failures.len()
}

fn cmd_generate(args: &GenerateArgs) -> Result<()> {
    let ds = generate_synthetic_field(args.seed, args.wells, args.samples)?;
    write_table(&ds, &args.out).with_context(|| format!("writing {}", args.out.display()))?;
    let (_, report) = load_table(&args.out)?;
    println!(
        "wrote {}: {} wells, {} samples, {} rows rejected",
        args.out.display(),
        ds.wells().len(),
        ds.n_samples(),
        report.rejected.len()
    );
    Ok(())
}

/// Shared by `train` and `symmetry`. Returns the number of failed runs.
fn train_and_report(exp: &Experiment, command: &str) -> Result<usize> {
    let ds = exp.prepare(command)?;
    let cfg = exp.cfg();
    let summary = run_repeated(cfg, &ds, exp.repeats, exp.jobs)?;

    if exp.repeats == 1 {
        if let Some(run) = summary.runs.first() {
            output::write_run(&exp.out, run, cfg)?;
        }
    } else {
        for run in &summary.runs {
            let index = run.report.seed.wrapping_sub(cfg.seed);
            let dir = exp.out.join(format!("run_{index:03}"));
            output::create_dir(&dir)?;
            let run_cfg = TrainConfig {
                seed: run.report.seed,
                ..cfg.clone()
            };
            output::write_run(&dir, run, &run_cfg)?;
        }
        output::write_aggregate(&exp.out, &summary, cfg)?;
    }
    output::write_orientations(&exp.out, &summary, cfg.seed)?;

    println!(
        "{} of {} runs completed; mse_normalized {:.4} ± {:.4}; pearson_r {:.4}; orientations +{} / -{}",
        summary.runs.len(),
        summary.requested,
        summary.mse_normalized.mean,
        summary.mse_normalized.std,
        summary.pearson_r.mean,
        summary.positive_orientations,
        summary.negative_orientations,
    );
    Ok(report_failures(&summary, ""))
}

fn cmd_sweep(args: &SweepArgs) -> Result<usize> {
    if args.batch_sizes.is_empty() && args.seq_lens.is_empty() && args.batchnorm_grid.is_empty() {
        bail!("sweep needs at least one of --batch-sizes, --seq-lens, --batchnorm-grid");
    }
    let exp = Experiment::resolve(&args.common, args.repeats, 10, args.covariance_fix)?;
    let base = exp.cfg().clone();

    let mut points: Vec<(&'static str, String, TrainConfig)> = Vec::new();
    for &b in &args.batch_sizes {
        points.push((
            "batch_size",
            b.to_string(),
            TrainConfig {
                batch_size: b,
                ..base.clone()
            },
        ));
    }
    for &s in &args.seq_lens {
        points.push((
            "seq_len",
            s.to_string(),
            TrainConfig {
                seq_len: s,
                ..base.clone()
            },
        ));
    }
    for &t in &args.batchnorm_grid {
        let cfg = TrainConfig {
            use_batchnorm: t.is_on(),
            ..base.clone()
        };
        points.push(("batchnorm", t.name().to_string(), cfg));
    }
    for (name, value, cfg) in &points {
        cfg.validate()
            .with_context(|| format!("grid point {name}={value}"))?;
    }

    let ds = exp.prepare("sweep")?;
    let mut rows = Vec::with_capacity(points.len());
    let mut failed = 0;
    for (name, value, cfg) in points {
        info!("sweep {name}={value}");
        let summary = run_repeated(&cfg, &ds, exp.repeats, exp.jobs)?;
        failed += report_failures(&summary, &format!("{name}={value}: "));
        rows.push(SweepRow {
            param_name: name,
            param_value: value,
            mse_mean: summary.mse_normalized.mean,
            mse_std: summary.mse_normalized.std,
            k: summary.runs.len(),
        });
    }
    output::write_sweep(&exp.out, &rows)?;
    for r in &rows {
        println!(
            "{}={}: mse {:.4} ± {:.4} over {} runs",
            r.param_name, r.param_value, r.mse_mean, r.mse_std, r.k
        );
    }
    Ok(failed)
}

fn run(cli: Cli) -> Result<usize> {
    match cli.command {
        Command::Generate(args) => cmd_generate(&args).map(|_| 0),
        Command::Train(args) => {
            let exp = Experiment::resolve(&args.common, args.repeats, 1, args.covariance_fix)?;
            train_and_report(&exp, "train")
        }
        Command::Symmetry(args) => {
            let exp = Experiment::resolve(&args.common, args.repeats, 50, Some(Toggle::Off))?;
            train_and_report(&exp, "symmetry")
        }
        Command::Sweep(args) => cmd_sweep(&args),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(0) => ExitCode::SUCCESS,
        Ok(n) => {
            eprintln!("error: {n} run(s) failed");
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
