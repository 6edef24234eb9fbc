use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::error;
use spreadsurvey::config::parse_config;
use spreadsurvey::io::read_text;
use spreadsurvey::pipeline::{rerun, run_verb, Verb};
use spreadsurvey::{Error, ErrorKind};

/// Forecast invasive spread with an ecological diffusion model and search
/// for survey designs that most reduce forecast uncertainty.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the synthetic reference scenario and a ready-to-use config.
    Synth(Args),
    /// Fit the spread model to survey data by MCMC.
    Fit(Args),
    /// R-hat, acceptance rates and posterior predictive p-value of a fit.
    Diagnose(Args),
    /// Forecast total abundance from a fit.
    Forecast(Args),
    /// Score the design given by `search.design`.
    Evaluate(Args),
    /// Random search followed by the exchange algorithm.
    Optimize(Args),
    /// Human-readable summary of all completed steps.
    Report(Args),
    /// Repeat a run from the manifest in its artifact directory.
    Rerun {
        /// Path to a manifest.toml, or the directory containing it.
        manifest: PathBuf,
    },
}

#[derive(clap::Args)]
struct Args {
    /// Configuration file.
    #[arg(short, long)]
    config: PathBuf,
}

fn output_override() -> Option<PathBuf> {
    std::env::var_os("SPREADSURVEY_OUTPUT").map(PathBuf::from)
}

fn run(command: Command) -> Result<PathBuf, Error> {
    let (verb, args) = match command {
        Command::Rerun { manifest } => {
            let path = if manifest.is_dir() {
                manifest.join(spreadsurvey::pipeline::MANIFEST)
            } else {
                manifest
            };
            return rerun(&path, output_override());
        }
        Command::Synth(a) => (Verb::Synth, a),
        Command::Fit(a) => (Verb::Fit, a),
        Command::Diagnose(a) => (Verb::Diagnose, a),
        Command::Forecast(a) => (Verb::Forecast, a),
        Command::Evaluate(a) => (Verb::Evaluate, a),
        Command::Optimize(a) => (Verb::Optimize, a),
        Command::Report(a) => (Verb::Report, a),
    };
    let text = read_text(&args.config)?;
    let base = match args.config.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let base = std::path::absolute(base).map_err(|e| Error::Io {
        path: base.to_path_buf(),
        source: e,
    })?;
    let mut config = parse_config(&text, &base)?;
    if let Some(out) = output_override() {
        config = config.with_output(out);
    }
    run_verb(verb, &config)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(threads) = std::env::var("SPREADSURVEY_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            error!("cannot size the thread pool: {e}");
        }
    }
    match run(cli.command) {
        Ok(dir) => {
            println!("{}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            error!("{e}");
            ExitCode::from(match e.kind() {
                ErrorKind::Validation => 1,
                ErrorKind::Numeric => 2,
                ErrorKind::Io => 3,
            })
        }
    }
}
