use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use socproto::ids::VersionId;
use socproto::model::{refinement_level, validate_structure, SocialProtocol};
use socproto::server::{parse_log, replay, run_scenario_file, serve, Config};

#[derive(Parser)]
#[command(name = "socproto", version, about = "Adaptive social-protocol engine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a protocol file and print its findings.
    Validate { file: PathBuf },
    /// Run a scenario script.
    Scenario {
        file: PathBuf,
        /// Print every executed line.
        #[arg(long)]
        verbose: bool,
    },
    /// Serve the REST API.
    Serve {
        #[arg(long)]
        port: Option<u16>,
        #[arg(long)]
        data_dir: Option<PathBuf>,
        /// TOML configuration file.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Replay an event log and print the resulting state.
    Replay { log: PathBuf },
    /// Print lineage edges as `parent -> child [ref]` lines.
    ExportLineage {
        version: Option<String>,
        /// Event log to rebuild the repository from.
        #[arg(long, default_value = "data/events.jsonl")]
        log: PathBuf,
    },
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .with_writer(std::io::stderr)
        .init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Validate { file } => {
            let text = std::fs::read_to_string(&file).with_context(|| file.display().to_string())?;
            let protocol = SocialProtocol::from_json(&text)?;
            let report = validate_structure(&protocol);
            for finding in &report.findings {
                println!("{:?} {:?} {}: {}", finding.severity, finding.code, finding.subject, finding.message);
            }
            if report.valid {
                println!("valid ({:?}) {}", refinement_level(&protocol)?, protocol.clone().sealed().version);
                Ok(ExitCode::SUCCESS)
            } else {
                println!("invalid");
                Ok(ExitCode::FAILURE)
            }
        }
        Command::Scenario { file, verbose } => {
            let report = run_scenario_file(&file)?;
            if verbose {
                for line in &report.transcript {
                    println!("{line}");
                }
            }
            match &report.failure {
                None => {
                    println!("PASS {} ({} commands)", file.display(), report.commands);
                    Ok(ExitCode::SUCCESS)
                }
                Some(failure) => {
                    println!("FAIL {}\n{failure}", file.display());
                    Ok(ExitCode::FAILURE)
                }
            }
        }
        Command::Serve { port, data_dir, config } => {
            let base = match config {
                Some(path) => Config::load(&path)?,
                None => Config::default(),
            };
            let mut config = base.with_env(std::env::vars())?;
            if let Some(port) = port {
                config.port = port;
            }
            if let Some(dir) = data_dir {
                config.data_dir = dir;
            }
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(serve(config))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Replay { log } => {
            let text = std::fs::read_to_string(&log).with_context(|| log.display().to_string())?;
            let state = replay(&parse_log(&text)?)?;
            print!("{}", state.to_canonical_json());
            Ok(ExitCode::SUCCESS)
        }
        Command::ExportLineage { version, log } => {
            let text = std::fs::read_to_string(&log).with_context(|| log.display().to_string())?;
            let state = replay(&parse_log(&text)?)?;
            let version = version.map(VersionId::new);
            if let Some(v) = &version {
                if !state.repository.contains(v) {
                    bail!("unknown version {v}");
                }
            }
            print!("{}", state.repository.export_lineage(version.as_ref())?);
            Ok(ExitCode::SUCCESS)
        }
    }
}
