mod cli;
mod manifest;
mod run;

use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use clap::Parser;

use crate::cli::{Cli, Command, ReplayArgs};
use crate::manifest::{first_mismatch, load_manifest, manifest_path, save_manifest, FileDigest, RunManifest};

fn subcommand_name(command: &Command) -> &'static str {
    match command {
        Command::Simulate(_) => "simulate",
        Command::Sample(_) => "sample",
        Command::Summarize(_) => "summarize",
        Command::Metric(_) => "metric",
        Command::Kmeans(_) => "kmeans",
        Command::Replay(_) => "replay",
    }
}

/// Runs `command` and records a manifest next to its first output.
fn run_recorded(command: &Command, threads: Option<usize>) -> Result<String> {
    let started = SystemTime::now();
    let clock = Instant::now();
    let outcome = run::execute(command)?;
    if let Some(primary) = outcome.outputs.first() {
        let digests = |paths: &[std::path::PathBuf]| paths.iter().map(|p| FileDigest::of(p)).collect::<Result<Vec<_>>>();
        let manifest = RunManifest {
            tool: env!("CARGO_PKG_NAME").into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            artifact_version: manifest::ARTIFACT_VERSION,
            subcommand: subcommand_name(command).into(),
            command: command.clone(),
            seeds: outcome.seeds,
            threads,
            inputs: digests(&outcome.inputs)?,
            outputs: digests(&outcome.outputs)?,
            started_unix_secs: started.duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
            wall_clock_secs: clock.elapsed().as_secs_f64(),
        };
        save_manifest(&manifest, &manifest_path(primary))?;
    }
    Ok(outcome.report)
}

/// Reruns a recorded command; unless `no_verify`, inputs must be unchanged
/// beforehand and every output must match its recorded digest afterwards.
fn replay(args: &ReplayArgs) -> Result<String> {
    let m = load_manifest(&args.manifest)?;
    if !args.no_verify {
        if let Some((was, now)) = first_mismatch(&m.inputs)? {
            bail!(
                "input {} changed since the recorded run (sha256 {} -> {})",
                was.path.display(),
                was.sha256,
                now.sha256
            );
        }
    }
    let outcome = run::execute(&m.command).with_context(|| format!("replaying {}", m.subcommand))?;
    let recorded: Vec<_> = m.outputs.iter().map(|d| &d.path).collect();
    let produced: Vec<_> = outcome.outputs.iter().collect();
    if recorded != produced {
        bail!("replay wrote {produced:?}, manifest records {recorded:?}");
    }
    if !args.no_verify {
        if let Some((was, now)) = first_mismatch(&m.outputs)? {
            bail!(
                "output {} differs from the recorded run (sha256 {} -> {})",
                was.path.display(),
                was.sha256,
                now.sha256
            );
        }
    }
    Ok(format!("{}replayed {}: {} outputs identical\n", outcome.report, m.subcommand, m.outputs.len()))
}

fn main_inner(cli: Cli) -> Result<String> {
    if let Some(t) = cli.threads {
        if t == 0 {
            bail!("thread count must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .context("configuring the thread pool")?;
    }
    match &cli.command {
        Command::Replay(args) => replay(args),
        command => run_recorded(command, cli.threads),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match main_inner(cli) {
        Ok(report) => {
            print!("{report}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            let message = format!("{e:#}").replace(['\n', '\r'], " ");
            eprintln!("error: {message}");
            ExitCode::FAILURE
        }
    }
}
