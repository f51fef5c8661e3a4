//! The `dockref` command line.
//!
//! Exit codes: 0 success, 1 operational error, 2 build failure, 3 behavior
//! change.

pub mod commands;
pub mod config;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use serde::Serialize;

use config::{GlobalArgs, RunConfig};

/// Process exit status; the numeric values are a stable contract.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Exit {
    Ok = 0,
    Operational = 1,
    BuildFailure = 2,
    BehaviorChange = 3,
}

impl Exit {
    pub fn code(self) -> u8 {
        self as u8
    }
}

impl From<Exit> for ExitCode {
    fn from(e: Exit) -> Self {
        ExitCode::from(e.code())
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "dockref",
    version,
    about = "Refactor Dockerfiles with retrieved demonstrations"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Refactor one Dockerfile, build both versions and compare them.
    Refactor {
        dockerfile: PathBuf,
        /// Build context; defaults to the Dockerfile's directory.
        #[arg(long)]
        context: Option<PathBuf>,
    },
    /// Print the refactoring actions between two Dockerfiles as JSON.
    Detect { before: PathBuf, after: PathBuf },
    /// Rank corpus demonstrations for a Dockerfile, best first.
    Retrieve {
        dockerfile: PathBuf,
        #[arg(short, default_value_t = 5)]
        n: usize,
        /// Include every score component and the demonstration's actions.
        #[arg(long)]
        explain: bool,
    },
    /// Aggregate `report.json` files and pair files under a directory.
    Evaluate { records_dir: PathBuf },
    /// Measure a Dockerfile across its git history and profile its lifecycle.
    Evolve {
        repo: PathBuf,
        #[arg(default_value = "Dockerfile")]
        dockerfile: PathBuf,
        /// Further `REPO:DOCKERFILE` histories to average into the profile.
        #[arg(long = "project", value_name = "REPO:DOCKERFILE")]
        projects: Vec<String>,
    },
    /// Validate, measure and append candidate pairs to the corpus.
    Ingest {
        candidates: PathBuf,
        /// Keep candidates whose commit message does not declare a refactoring.
        #[arg(long)]
        skip_sar_filter: bool,
    },
}

pub fn run<I, T>(args: I) -> Exit
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                Exit::Operational
            } else {
                Exit::Ok
            };
        }
    };
    match dispatch(cli) {
        Ok(exit) => exit,
        Err(e) => {
            eprintln!("error: {e:#}");
            Exit::Operational
        }
    }
}

fn dispatch(cli: Cli) -> Result<Exit> {
    let cfg = RunConfig::resolve(&cli.global)?;
    match cli.command {
        Command::Refactor {
            dockerfile,
            context,
        } => commands::refactor::run(&cfg, &dockerfile, context.as_deref()),
        Command::Detect { before, after } => commands::detect::run(&cfg, &before, &after),
        Command::Retrieve {
            dockerfile,
            n,
            explain,
        } => commands::retrieve::run(&cfg, &dockerfile, n, explain),
        Command::Evaluate { records_dir } => commands::evaluate::run(&cfg, &records_dir),
        Command::Evolve {
            repo,
            dockerfile,
            projects,
        } => commands::evolve::run(&cfg, &repo, &dockerfile, &projects),
        Command::Ingest {
            candidates,
            skip_sar_filter,
        } => commands::ingest::run(&cfg, &candidates, skip_sar_filter),
    }
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

/// Pretty JSON with a trailing newline.
pub(crate) fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("artifacts serialize");
    s.push('\n');
    s
}

pub(crate) fn write_artifact(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("cannot write {}", path.display()))
}
