mod commands;
mod config;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{CommandFactory, FromArgMatches, Parser};
use irrobust_core::{ErrorCategory, ParamSchedule};

use crate::commands::Command;
use crate::config::{FileConfig, GlobalConfig, SCHEDULE_ENV};

#[derive(Debug, Parser)]
#[command(name = "irrobust", about = "Corruption benchmarks, weight-space ensembling and AP50/mPC evaluation")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Global seed for corruption randomness [default: 1234].
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Corruption parameter schedule (TOML or JSON).
    #[arg(long, global = true, env = SCHEDULE_ENV)]
    schedule: Option<PathBuf>,

    /// TOML file with defaults for the global options.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// error, warn, info, debug or trace [default: info].
    #[arg(long, global = true)]
    log_level: Option<String>,

    #[command(subcommand)]
    command: Command,
}

/// Version line with the digest of the schedule the run would use.
fn version_line(args: &[OsString]) -> String {
    let mut schedule = std::env::var_os(SCHEDULE_ENV).filter(|v| !v.is_empty()).map(PathBuf::from);
    let mut it = args.iter().map(|a| a.to_string_lossy().into_owned());
    while let Some(a) = it.next() {
        if a == "--schedule" {
            schedule = it.next().map(PathBuf::from);
        } else if let Some(v) = a.strip_prefix("--schedule=") {
            schedule = Some(PathBuf::from(v));
        }
    }
    let digest = match schedule {
        Some(p) => match ParamSchedule::from_file(&p) {
            Ok(s) => s.digest(),
            Err(e) => format!("unavailable ({e})"),
        },
        None => ParamSchedule::default().digest(),
    };
    format!("{} (schedule sha256:{digest})", irrobust_core::VERSION)
}

fn category_of(err: &anyhow::Error) -> ErrorCategory {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<irrobust_core::Error>() {
            return e.category();
        }
        if cause.is::<std::io::Error>() {
            return ErrorCategory::Io;
        }
    }
    ErrorCategory::Domain
}

/// The error chain joined by ": ", skipping causes already spelled out by their parent.
fn message(err: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in err.chain() {
        let text = cause.to_string();
        if !out.ends_with(&text) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&text);
        }
    }
    out
}

fn exit_code(cat: ErrorCategory) -> u8 {
    match cat {
        ErrorCategory::Io => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let args: Vec<OsString> = std::env::args_os().collect();
    let version = version_line(&args);
    let matches = match Cli::command().version(version).try_get_matches_from(&args) {
        Ok(m) => m,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = e.print();
                    ExitCode::SUCCESS
                }
                ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
                    let _ = e.print();
                    ExitCode::from(1)
                }
                _ => {
                    let text = e.render().to_string();
                    let text = text.strip_prefix("error: ").unwrap_or(&text);
                    eprint!("error[usage]: {text}");
                    ExitCode::from(1)
                }
            };
        }
    };
    let cli = Cli::from_arg_matches(&matches).expect("matches come from the same definition");
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let cat = category_of(&e);
            eprintln!("error[{}]: {}", cat.as_str(), message(&e));
            ExitCode::from(exit_code(cat))
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let cfg = GlobalConfig::resolve(cli.schedule, cli.threads, cli.log_level, cli.seed, file)?;
    env_logger::Builder::new()
        .parse_filters(&cfg.log_level)
        .format_timestamp(None)
        .try_init()
        .ok();
    log::debug!("effective config: {}", serde_json::to_string(&cfg)?);
    if let Some(n) = cfg.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    commands::dispatch(cli.command, &cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn version_mentions_digest() {
        let line = version_line(&["irrobust".into(), "--version".into()]);
        assert!(line.contains(&ParamSchedule::default().digest()) || std::env::var_os(SCHEDULE_ENV).is_some());
    }

    #[test]
    fn io_errors_exit_two() {
        let e: anyhow::Error = irrobust_core::Error::Domain("x".into()).into();
        assert_eq!(exit_code(category_of(&e)), 1);
        let e = anyhow::Error::new(std::io::Error::other("disk")).context("writing");
        assert_eq!(exit_code(category_of(&e)), 2);
        assert_eq!(message(&e), "writing: disk");
    }

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }
}
