//! `hyperff run <config>...`: runs scenario files and writes CSV/summary outputs.
//!
//! Exit codes: 0 success, 1 output I/O error, 2 configuration error,
//! 3 simulation error, 4 certificate failure under `--require-certificate`.
//! A scenario that fails leaves nothing on disk.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod experiment;
mod summary;

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use hyperff::Exec;

use config::{Overrides, Scenario};
use experiment::{Failure, Outcome};

#[derive(Debug, Parser)]
#[command(name = "hyperff", version, about = "Feedforward boundary control experiments for open-channel pools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one or more scenario files.
    Run(RunArgs),
}

#[derive(Debug, clap::Args)]
struct RunArgs {
    /// Scenario TOML files.
    #[arg(required = true)]
    configs: Vec<PathBuf>,
    /// Output root; each scenario writes to `<out>/<file stem>/`.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override the plant grid resolution.
    #[arg(long)]
    cells: Option<usize>,
    /// Override the Courant number.
    #[arg(long)]
    cfl: Option<f64>,
    /// Exit with status 4 unless every stability condition holds.
    #[arg(long)]
    require_certificate: bool,
    /// Number of scenarios run concurrently.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    jobs: u32,
}

struct Job {
    config: PathBuf,
    name: String,
}

struct Done {
    outcome: Outcome,
    dir: PathBuf,
    files: usize,
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "scenario".into())
}

fn execute(job: &Job, args: &RunArgs) -> Result<Done, Failure> {
    let mut scenario = Scenario::load(&job.config).map_err(experiment::config_error)?;
    scenario.apply(Overrides { cells: args.cells, cfl: args.cfl });
    scenario
        .validate()
        .with_context(|| format!("invalid scenario {}", job.config.display()))
        .map_err(experiment::config_error)?;
    let outcome = experiment::run(&scenario, Exec::default())?;
    if args.require_certificate && outcome.certified == Some(false) {
        return Err(Failure::Certificate(experiment::describe(&outcome.failed_conditions)));
    }
    let dir = args.out.join(&job.name);
    let files = write_atomically(&outcome, &args.out, &job.name).map_err(experiment::io_error)?;
    Ok(Done { outcome, dir, files })
}

/// Writes into a staging directory and renames it into place.
fn write_atomically(outcome: &Outcome, root: &Path, name: &str) -> anyhow::Result<usize> {
    fs::create_dir_all(root).with_context(|| format!("cannot create {}", root.display()))?;
    let staging = root.join(format!(".{name}.partial"));
    let target = root.join(name);
    if staging.exists() {
        fs::remove_dir_all(&staging).with_context(|| format!("cannot clear {}", staging.display()))?;
    }
    let written = outcome.outputs.write_to(&staging)?;
    if target.exists() {
        fs::remove_dir_all(&target).with_context(|| format!("cannot replace {}", target.display()))?;
    }
    fs::rename(&staging, &target).with_context(|| format!("cannot move outputs into {}", target.display()))?;
    Ok(written.len())
}

#[cfg(feature = "parallel")]
fn run_all(jobs: &[Job], args: &RunArgs) -> anyhow::Result<Vec<Result<Done, Failure>>> {
    use rayon::prelude::*;
    if args.jobs == 1 {
        return Ok(jobs.iter().map(|j| execute(j, args)).collect());
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(args.jobs as usize).build()?;
    Ok(pool.install(|| jobs.par_iter().map(|j| execute(j, args)).collect()))
}

#[cfg(not(feature = "parallel"))]
fn run_all(jobs: &[Job], args: &RunArgs) -> anyhow::Result<Vec<Result<Done, Failure>>> {
    Ok(jobs.iter().map(|j| execute(j, args)).collect())
}

fn run(args: RunArgs) -> ExitCode {
    let mut seen = BTreeSet::new();
    let mut jobs = Vec::new();
    for config in &args.configs {
        let name = stem(config);
        if !seen.insert(name.clone()) {
            eprintln!("error: configuration error: two scenarios share the output name `{name}`");
            return ExitCode::from(2);
        }
        jobs.push(Job { config: config.clone(), name });
    }

    let results = match run_all(&jobs, &args) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(1);
        }
    };

    let mut code = 0u8;
    for (job, result) in jobs.iter().zip(results) {
        match result {
            Ok(done) => {
                println!("# {} -> {} ({} files)", job.config.display(), done.dir.display(), done.files);
                print!("{}", done.outcome.summary.render());
            }
            Err(failure) => {
                eprintln!("error: {}: {failure}", job.config.display());
                if code == 0 {
                    code = failure.exit_code();
                }
            }
        }
    }
    ExitCode::from(code)
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run(args) => run(args),
    }
}
