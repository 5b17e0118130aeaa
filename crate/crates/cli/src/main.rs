use std::net::{IpAddr, SocketAddr};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use safestop_cli::report::{report, ReportOptions};
use safestop_cli::run::run;
use safestop_cli::serve::serve;
use safestop_cli::{Monitoring, RunConfig};
use tracing_subscriber::EnvFilter;

/// Imminent-collision monitoring and safe-stop simulator.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run seeded trials and write trace logs plus summary.csv.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Only run with monitoring enabled.
        #[arg(long, conflicts_with = "disabled")]
        enabled: bool,
        /// Only run with monitoring disabled.
        #[arg(long)]
        disabled: bool,
        /// Trials per monitoring mode.
        #[arg(long)]
        trials: Option<u64>,
        /// Seed of the first trial.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Scatter data, stop-cost series and separability from trace logs.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Live teleoperation over a websocket at /ws.
    Serve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
    },
}

fn main() -> ExitCode {
    let filter = EnvFilter::try_from_env("SAFESTOP_LOG").unwrap_or_else(|_| EnvFilter::new("info"));
    tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .init();

    match Cli::parse().command {
        Command::Run {
            config,
            enabled,
            disabled,
            trials,
            seed,
            out,
        } => {
            let mut cfg = match RunConfig::load(&config) {
                Ok(c) => c,
                Err(e) => return usage_error(e),
            };
            if enabled {
                cfg.monitoring = Monitoring::Enabled;
            }
            if disabled {
                cfg.monitoring = Monitoring::Disabled;
            }
            cfg.trials = trials.unwrap_or(cfg.trials);
            cfg.seed = seed.unwrap_or(cfg.seed);
            let Some(out) = out.or_else(|| cfg.out.clone()) else {
                return usage_error("no output directory: pass --out or set \"out\" in the config");
            };
            match run(&cfg, &out) {
                Ok(o) => {
                    for r in &o.rows {
                        tracing::info!(
                            scenario = %r.scenario,
                            monitoring = r.monitoring_enabled,
                            trials = r.trials,
                            success_rate = r.success_rate,
                            "summary"
                        );
                    }
                    println!("{}", o.summary_file.display());
                    ExitCode::SUCCESS
                }
                Err(safestop_cli::run::RunError::Config(e)) => usage_error(e),
                Err(e) => failure(e),
            }
        }
        Command::Report { input, out } => match report(&input, &out, &ReportOptions::default()) {
            Ok(o) => {
                if let Some(n) = &o.separability.notice {
                    eprintln!("{n}");
                }
                if let Some(a) = o.separability.accuracy {
                    println!("linear separability accuracy {a}");
                }
                ExitCode::SUCCESS
            }
            Err(e) => failure(e),
        },
        Command::Serve { config, port, host } => {
            let cfg = match RunConfig::load(&config) {
                Ok(c) => c,
                Err(e) => return usage_error(e),
            };
            let rt = match tokio::runtime::Runtime::new() {
                Ok(rt) => rt,
                Err(e) => return failure(e),
            };
            rt.block_on(async {
                let listener = match tokio::net::TcpListener::bind(SocketAddr::new(host, port)).await {
                    Ok(l) => l,
                    Err(e) => return failure(e),
                };
                let ctrl_c = async {
                    let _ = tokio::signal::ctrl_c().await;
                };
                match serve(&cfg, listener, ctrl_c).await {
                    Ok(()) => ExitCode::SUCCESS,
                    Err(safestop_cli::serve::ServeError::Config(e)) => usage_error(e),
                    Err(e) => failure(e),
                }
            })
        }
    }
}

fn usage_error(e: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(2)
}

fn failure(e: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::FAILURE
}
