use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use thiserror::Error;

use respverify::config::{Config, ConfigError, Mode};
use respverify::engine::{
    convergence_study, read_instances, AuditError, ConvergenceOptions, Engine, Instance,
    PointWriter,
};
use respverify::intervention::Severity;
use respverify::sampler::Sampler;
use respverify::stats;

#[derive(Parser)]
#[command(name = "respverify", version, about = "Estimate and test the responsiveness of model predictions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a configuration (and optionally a data file) for problems.
    Validate(Common),
    /// Write sampled reachable points for every instance.
    Sample {
        #[command(flatten)]
        common: Common,
        /// Points per instance (defaults to audit.n).
        #[arg(long)]
        n: Option<u64>,
    },
    /// Write the full reachable set of every instance.
    Enumerate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 100_000)]
        cap: usize,
    },
    /// Audit in estimate mode.
    Estimate(Common),
    /// Audit in test mode.
    Test(Common),
    /// Audit in the mode set by the configuration.
    Audit(Common),
    /// Minimum sample sizes for estimation (--width) or testing (--beta, --delta).
    Samplesize(SampleSizeArgs),
    /// Compare sampled estimates and tests with enumerated ground truth.
    Converge {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "10,20,30,50,100,200")]
        grid: Vec<u64>,
        #[arg(long, default_value_t = 100)]
        trials: u32,
        /// Effect size for the power column (defaults to epsilon / 2).
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long, default_value_t = 100_000)]
        cap: usize,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    data: Option<PathBuf>,
    /// Root seed (overrides audit.seed).
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, env = "RESPVERIFY_WORKERS")]
    workers: Option<usize>,
}

#[derive(Args)]
struct SampleSizeArgs {
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    width: Option<f64>,
}

/// Bad input files or flag combinations; reported with the configuration exit code.
#[derive(Debug, Error)]
#[error("{0}")]
struct InputError(String);

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if let Some(a) = cause.downcast_ref::<AuditError>() {
            return match a {
                AuditError::Integrity { .. } => 3,
                AuditError::Config(_) => 2,
            };
        }
        if cause.is::<ConfigError>() || cause.is::<InputError>() || cause.is::<stats::StatsError>() {
            return 2;
        }
    }
    1
}

impl Common {
    fn load(&self) -> Result<Config> {
        Ok(Config::load(&self.config)?)
    }

    fn instances(&self, cfg: &Config) -> Result<Vec<Instance>> {
        let path = self
            .data
            .as_ref()
            .ok_or_else(|| InputError("--data is required".into()))?;
        let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
        read_instances(file, &cfg.model)
            .map_err(|e| InputError(format!("{}: {e:#}", path.display())).into())
    }

    fn workers(&self) -> usize {
        self.workers
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
            .max(1)
    }

    fn output(&self) -> Result<Box<dyn Write>> {
        Ok(match &self.out {
            Some(p) => Box::new(BufWriter::new(
                File::create(p).with_context(|| format!("creating {}", p.display()))?,
            )),
            None => Box::new(BufWriter::new(io::stdout().lock())),
        })
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Validate(c) => validate(&c),
        Command::Sample { common, n } => sample(&common, n),
        Command::Enumerate { common, cap } => enumerate(&common, cap),
        Command::Estimate(c) => audit(&c, Some(Mode::Estimate)),
        Command::Test(c) => audit(&c, Some(Mode::Test)),
        Command::Audit(c) => audit(&c, None),
        Command::Samplesize(a) => samplesize(&a),
        Command::Converge {
            common,
            grid,
            trials,
            delta,
            cap,
        } => converge(&common, grid, trials, delta, cap),
    }
}

fn validate(c: &Common) -> Result<()> {
    let cfg = c.load()?;
    let partition = cfg.model.partition_with(cfg.effects.coupling_edges());
    println!(
        "ok: {} features, {} constraints, {} blocks",
        cfg.model.dim(),
        cfg.model.constraints().len(),
        partition.len()
    );
    if c.data.is_some() {
        let mut errors = 0;
        for inst in c.instances(&cfg)? {
            for d in cfg.model.check_point(&inst.x) {
                if d.severity == Severity::Error {
                    errors += 1;
                }
                println!("instance {}: {d}", inst.id);
            }
        }
        if errors > 0 {
            return Err(InputError(format!("{errors} out-of-bounds values in data")).into());
        }
    }
    Ok(())
}

fn sample(c: &Common, n: Option<u64>) -> Result<()> {
    let cfg = c.load()?;
    let n = n
        .or(cfg.file.audit.n)
        .ok_or_else(|| InputError("give --n or set audit.n".into()))? as usize;
    let seed = c.seed.unwrap_or(cfg.file.audit.seed);
    let instances = c.instances(&cfg)?;
    let sampler = Sampler::new(&cfg.model, &cfg.effects).with_budget(cfg.file.audit.budget);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(c.workers()).build()?;
    let batches = pool.install(|| {
        instances
            .par_iter()
            .map(|inst| sampler.sample_reachable(&inst.x, n, seed, &inst.id, 1))
            .collect::<Vec<_>>()
    });
    let mut w = PointWriter::new(c.output()?, &cfg.model, true)?;
    for (inst, b) in instances.iter().zip(batches) {
        let b = b.with_context(|| format!("instance {}", inst.id))?;
        for (k, p) in b.points.iter().enumerate() {
            w.write(&inst.id, k, p)?;
        }
    }
    w.finish()
}

fn enumerate(c: &Common, cap: usize) -> Result<()> {
    let cfg = c.load()?;
    let instances = c.instances(&cfg)?;
    let sampler = Sampler::new(&cfg.model, &cfg.effects);
    let mut w = PointWriter::new(c.output()?, &cfg.model, false)?;
    for inst in &instances {
        let pts = sampler
            .enumerate_reachable(&inst.x, cap)
            .with_context(|| format!("instance {}", inst.id))?;
        for p in &pts {
            w.write(&inst.id, 0, p)?;
        }
    }
    w.finish()
}

fn csv_sibling(json: &Path) -> PathBuf {
    let p = json.with_extension("csv");
    if p == json {
        let mut s = json.as_os_str().to_owned();
        s.push(".records.csv");
        PathBuf::from(s)
    } else {
        p
    }
}

fn audit(c: &Common, mode: Option<Mode>) -> Result<()> {
    let cfg = c.load()?;
    let mode = mode.unwrap_or(cfg.file.audit.mode);
    let mut engine = Engine::new(&cfg, mode).map_err(AuditError::from)?;
    if let Some(s) = c.seed {
        engine = engine.with_seed(s);
    }
    let instances = c.instances(&cfg)?;
    let report = engine.audit_population(&instances, c.workers())?;
    let mut out = c.output()?;
    serde_json::to_writer_pretty(&mut out, &report)?;
    writeln!(out)?;
    out.flush()?;
    if let Some(p) = &c.out {
        let csv_path = csv_sibling(p);
        let f = File::create(&csv_path).with_context(|| format!("creating {}", csv_path.display()))?;
        report.write_csv(BufWriter::new(f))?;
    }
    for f in &report.failures {
        eprintln!("warning: instance {} skipped: {}", f.instance_id, f.error);
    }
    Ok(())
}

fn samplesize(a: &SampleSizeArgs) -> Result<()> {
    match (a.width, a.epsilon) {
        (Some(width), None) => {
            println!("n_min {}", stats::min_n_estimation(a.alpha, width)?);
        }
        (None, Some(eps)) => {
            let beta = a.beta.ok_or_else(|| InputError("testing needs --beta".into()))?;
            let delta = a.delta.ok_or_else(|| InputError("testing needs --delta".into()))?;
            println!("n_min {}", stats::min_n_test(a.alpha, beta, eps, delta)?);
            let bound = stats::necessary_n(a.alpha, eps)?;
            println!(
                "necessary_n {bound} (rejection needs n >= {})",
                stats::necessary_n_integer(a.alpha, eps)?
            );
        }
        _ => {
            return Err(InputError(
                "give --width for estimation or --epsilon (with --beta, --delta) for testing".into(),
            )
            .into())
        }
    }
    Ok(())
}

fn converge(c: &Common, grid: Vec<u64>, trials: u32, delta: Option<f64>, cap: usize) -> Result<()> {
    let cfg = c.load()?;
    let epsilon = cfg
        .file
        .audit
        .epsilon
        .ok_or_else(|| InputError("converge needs audit.epsilon".into()))?;
    let opts = ConvergenceOptions {
        n_grid: grid,
        trials,
        alpha: cfg.file.audit.alpha,
        epsilon,
        delta: delta.or(cfg.file.audit.delta).unwrap_or(epsilon / 2.0),
        seed: c.seed.unwrap_or(cfg.file.audit.seed),
        cap,
        workers: c.workers(),
    };
    let instances = c.instances(&cfg)?;
    let study = convergence_study(&cfg, &instances, &opts)?;
    for e in &study.excluded {
        eprintln!("excluded instance {}: {}", e.instance_id, e.reason);
    }
    study.write_csv(c.output()?)?;
    Ok(())
}
