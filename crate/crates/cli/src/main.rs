mod args;
mod commands;
mod output;

use std::fmt;
use std::process::ExitCode;

use anyhow::Result;
use clap::Parser;
use rareval::Execution;

use args::{Cli, Command};
use output::{emit, Format};

const THREADS_ENV: &str = "RAREVAL_THREADS";

/// An invalid invocation detected after argument parsing.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn is_usage_error(e: &anyhow::Error) -> bool {
    if e.downcast_ref::<UsageError>().is_some() {
        return true;
    }
    matches!(
        e.downcast_ref::<rareval::Error>(),
        Some(rareval::Error::UnknownMetric { .. } | rareval::Error::Config(_))
    )
}

/// The error and its causes, skipping causes already quoted by an outer message.
fn describe(e: &anyhow::Error) -> String {
    let mut msg = e.to_string();
    for cause in e.chain().skip(1) {
        let c = cause.to_string();
        if !msg.contains(&c) {
            msg = format!("{msg}: {c}");
        }
    }
    msg
}

fn configure_threads(flag: Option<u32>) -> Result<()> {
    let requested = match flag {
        Some(n) => Some(n as usize),
        None => match std::env::var(THREADS_ENV) {
            Ok(v) => Some(
                v.trim()
                    .parse::<usize>()
                    .ok()
                    .filter(|&n| n >= 1)
                    .ok_or_else(|| UsageError(format!("{THREADS_ENV} must be a positive integer, got `{v}`")))?,
            ),
            Err(_) => None,
        },
    };
    #[cfg(feature = "parallel")]
    if let Some(n) = requested {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    #[cfg(not(feature = "parallel"))]
    if requested.is_some_and(|n| n > 1) {
        log::warn!("built without the `parallel` feature; running on one thread");
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    configure_threads(cli.threads)?;
    let exec = Execution::default();
    let tables = match &cli.command {
        Command::Eval(a) => commands::eval(a, exec)?,
        Command::Compare(a) => commands::compare(a, exec)?,
        Command::Discpower(a) => commands::discpower(a, exec)?,
        Command::Stability(a) => commands::stability(a, exec)?,
        Command::Subset(a) => commands::subset(a, exec)?,
        Command::Synth(a) => commands::synth(a)?,
        Command::Trajectory(a) => commands::trajectory(a, exec)?,
        Command::Report(a) => commands::report(a, exec)?,
    };
    let format = Format {
        json: cli.json,
        precision: cli.precision,
        header: cli.header,
    };
    emit(&tables, &format)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            if is_usage_error(&e) {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
