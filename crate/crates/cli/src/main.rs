use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use serde_json::Value;
use sprayq_cli::commands::{self, Overrides};
use sprayq_cli::RunConfig;
use sprayq_core::QualityTarget;

/// Quality prediction for a thermal spray line: simulate a process, fit and
/// tune models, and serve rolling predictions over HTTP.
#[derive(Parser)]
#[command(name = "sprayq", version)]
struct Cli {
    /// Run configuration (TOML). Relative paths inside resolve against its directory.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config and scenario seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    target: Option<QualityTarget>,
    /// Output file, or directory for `simulate`; stdout for tables and event lines when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Stream milliseconds per wall millisecond; 0 is as fast as possible.
    #[arg(long, global = true)]
    speed: Option<f64>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write an event log, the effective scenario and labelled datasets.
    Simulate,
    /// Fit one model on the training set.
    Train {
        #[arg(long)]
        c: Option<f64>,
        #[arg(long)]
        p: Option<f64>,
    },
    /// Leave-one-out RMSD over the (p, C) grid as CSV.
    Tune,
    /// SEMKL against the linear baseline on the test set, as one CSV row.
    Eval {
        /// Model file; defaults to the config's entry for --target.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Run the predictor offline over a stream, one JSON line per engine event.
    Replay {
        /// Event log; defaults to paths.events, then a fresh scenario run.
        #[arg(long)]
        events: Option<PathBuf>,
    },
    /// Serve the HTTP API while feeding a live or recorded stream.
    Serve {
        #[arg(long)]
        events: Option<PathBuf>,
        /// Stop once the stream is exhausted instead of serving until interrupted.
        #[arg(long)]
        exit_when_done: bool,
    },
}

fn run(cli: Cli) -> Result<(Value, bool)> {
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let o = Overrides { seed: cli.seed, target: cli.target, out: cli.out.clone(), speed: cli.speed };
    // Commands whose main output goes to stdout report their summary on stderr.
    let data_on_stdout = o.out.is_none();
    Ok(match cli.cmd {
        Cmd::Simulate => (commands::simulate(&cfg, &o)?, false),
        Cmd::Train { c, p } => (commands::train(&cfg, &o, c, p)?, false),
        Cmd::Tune => (commands::tune(&cfg, &o)?, data_on_stdout),
        Cmd::Eval { model } => (commands::eval(&cfg, &o, model)?, data_on_stdout),
        Cmd::Replay { events } => (commands::replay(&cfg, &o, events)?, data_on_stdout),
        Cmd::Serve { events, exit_when_done } => {
            let rt = tokio::runtime::Runtime::new()?;
            (rt.block_on(commands::serve(&cfg, &o, events, exit_when_done))?, false)
        }
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok((summary, to_stderr)) => {
            if to_stderr {
                eprintln!("{summary}");
            } else {
                println!("{summary}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", commands::report(&e));
            ExitCode::FAILURE
        }
    }
}
