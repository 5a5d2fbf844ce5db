//! `schro-ula`: data generation, initialization, surrogate Langevin
//! sampling, MAP and diagnostics for the Schrödinger regression model.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure,
//! 4 I/O error.

mod config;
mod manifest;
mod stages;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use config::{ConfigError, ExperimentConfig, Overrides};
use manifest::Recorder;
use stages::ReportInputs;

#[derive(Debug, Parser)]
#[command(name = "schro-ula", version, about = "Surrogate Langevin posterior computation for the Schrödinger model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    overrides: Overrides,
    /// Cap on worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw a synthetic dataset.
    Generate,
    /// Compute the ridge initializer `θ_init`.
    Init(DataArgs),
    /// Run the surrogate Langevin chain from `θ_init`.
    Sample(ChainArgs),
    /// Maximize the surrogate posterior from `θ_init`.
    Map(ChainArgs),
    /// Write the bound certificate for the configured run.
    Bounds(ChainArgs),
    /// Curvature scaling study over `D`.
    Curvature,
    /// generate → initialize → surrogate → sample → MAP → diagnostics.
    Pipeline,
    /// Print the resolved configuration as TOML.
    Config,
}

#[derive(Debug, clap::Args)]
struct DataArgs {
    /// Dataset CSV (with JSON sidecar); generated from the config if absent.
    #[arg(long)]
    data: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
struct ChainArgs {
    #[command(flatten)]
    data: DataArgs,
    /// `init.json` from a previous `init` run.
    #[arg(long)]
    init: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    use schrodinger_ula::Error as E;
    for cause in err.chain() {
        if cause.is::<ConfigError>() || cause.is::<toml::de::Error>() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::Io { .. } | E::Csv { .. } | E::Json { .. } => 4,
                E::InvalidArgument(_) | E::DimensionMismatch { .. } => 2,
                _ => 3,
            };
        }
        if cause.is::<std::io::Error>() || cause.is::<csv::Error>() || cause.is::<serde_json::Error>() {
            return 4;
        }
    }
    3
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(ConfigError("--threads must be positive".into()).into());
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring the thread pool")?;
    }
    let cfg = ExperimentConfig::resolve(&cli.overrides)?;
    if let Command::Config = cli.command {
        print!("{}", toml::to_string(&cfg).context("serializing config")?);
        return Ok(());
    }
    let mut rec = Recorder::new(&cfg.output_dir())?;
    for w in cfg.warnings() {
        rec.warn(w);
    }
    let name = match &cli.command {
        Command::Generate => {
            rec.stage("generate", |r| stages::generate(&cfg, r))?;
            "generate"
        }
        Command::Init(a) => {
            let data = stages::load_or_generate(&cfg, &mut rec, a.data.as_deref())?;
            let m = stages::model(&cfg, cfg.dsz)?;
            rec.stage("initialize", |r| stages::init(&cfg, &m, &data, r))?;
            "init"
        }
        Command::Sample(a) | Command::Map(a) | Command::Bounds(a) => {
            let data = stages::load_or_generate(&cfg, &mut rec, a.data.data.as_deref())?;
            let p = stages::prepare(&cfg, &data, &mut rec, a.init.as_deref())?;
            let tuning = rec.stage("surrogate", |r| stages::tune(&cfg, &p.lik, &p.prior, &p.theta_init, r))?;
            match &cli.command {
                Command::Bounds(_) => {
                    rec.stage("bounds", |r| stages::bounds(&cfg, &tuning, &p.theta_init, r))?;
                    "bounds"
                }
                Command::Sample(_) => {
                    let post = stages::surrogate_posterior(&cfg, p.lik, &tuning)?;
                    rec.stage("sample", |r| stages::sample(&cfg, &post, &p.theta_init, &tuning, r))?;
                    "sample"
                }
                _ => {
                    let post = stages::surrogate_posterior(&cfg, p.lik, &tuning)?;
                    rec.stage("map", |r| stages::map(&cfg, &post, &p.theta_init, r))?;
                    "map"
                }
            }
        }
        Command::Curvature => {
            rec.stage("curvature", |r| stages::curvature(&cfg, r))?;
            "curvature"
        }
        Command::Pipeline => {
            pipeline(&cfg, &mut rec)?;
            "pipeline"
        }
        Command::Config => unreachable!(),
    };
    let file = if name == "pipeline" { "manifest.json".to_string() } else { format!("{name}.manifest.json") };
    let manifest = rec.finish(name, &cfg)?;
    let dir = cfg.output_dir();
    if file != "manifest.json" {
        std::fs::rename(dir.join("manifest.json"), dir.join(&file)).context("renaming manifest")?;
    }
    println!("{} → {}", manifest.command, dir.join(file).display());
    Ok(())
}

fn pipeline(cfg: &ExperimentConfig, rec: &mut Recorder) -> Result<()> {
    let data = rec.stage("generate", |r| stages::generate(cfg, r))?;
    let p = stages::prepare(cfg, &data, rec, None)?;
    let tuning = rec.stage("surrogate", |r| stages::tune(cfg, &p.lik, &p.prior, &p.theta_init, r))?;
    let post = stages::surrogate_posterior(cfg, p.lik, &tuning)?;
    let chain = rec.stage("sample", |r| stages::sample(cfg, &post, &p.theta_init, &tuning, r))?;
    let map = rec.stage("map", |r| stages::map(cfg, &post, &p.theta_init, r))?;
    rec.stage("diagnostics", |r| {
        stages::bounds(cfg, &tuning, &p.theta_init, r)?;
        stages::report(cfg, ReportInputs { data: &data, theta_init: &p.theta_init, chain: &chain, map: &map }, r)
    })?;
    Ok(())
}
