use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};

use anyhow::{bail, Context, Result};

use crate::config::RunConfig;
use crate::{to_json, write_artifact, Exit};
use dockref_core::build::{measure_with, BuildEngine, Ruleset};
use dockref_core::evaluation::{
    combine_profiles, lifecycle_profile, profile_csv, segment_lifecycle, CommitMeasurement,
    LifecycleProfile,
};
use dockref_core::parse;
use dockref_core::refactoring::Detector;

fn git(repo: &Path, args: &[&str]) -> Result<Vec<u8>> {
    let out = Command::new("git")
        .arg("-C")
        .arg(repo)
        .args(args)
        .stdin(Stdio::null())
        .output()
        .context("cannot run git")?;
    if !out.status.success() {
        bail!(
            "git {} failed in {}: {}",
            args.join(" "),
            repo.display(),
            String::from_utf8_lossy(&out.stderr).trim()
        );
    }
    Ok(out.stdout)
}

/// Commits touching `path`, oldest first.
fn history(repo: &Path, path: &str) -> Result<Vec<String>> {
    let out = git(repo, &["log", "--reverse", "--format=%H", "--", path])?;
    Ok(String::from_utf8_lossy(&out)
        .lines()
        .map(str::to_owned)
        .collect())
}

/// Exports the tree of `commit` into a fresh directory; the repository's
/// working tree and index are left alone.
fn export_tree(repo: &Path, commit: &str) -> Result<tempfile::TempDir> {
    let dir = tempfile::tempdir()?;
    let archive = git(repo, &["archive", "--format=tar", commit])?;
    tar::Archive::new(archive.as_slice())
        .unpack(dir.path())
        .with_context(|| format!("cannot unpack the tree of {commit}"))?;
    Ok(dir)
}

fn measure_history(
    cfg: &RunConfig,
    engine: &dyn BuildEngine,
    detector: &Detector,
    repo: &Path,
    path: &str,
    commits: &[String],
) -> Result<Vec<CommitMeasurement>> {
    let rules = Ruleset::default();
    let mut previous = None;
    let mut rows = Vec::with_capacity(commits.len());
    for commit in commits {
        let spec = format!("{commit}:{path}");
        // the file may be absent at a deleting commit
        let text = git(repo, &["show", &spec])
            .map(|b| String::from_utf8_lossy(&b).into_owned())
            .ok();
        let ast = text.as_deref().and_then(|t| parse(t).ok());
        let refactoring_detected = match (&previous, &ast) {
            (Some(a), Some(b)) => !detector.detect(a, b).is_empty(),
            _ => false,
        };
        let (size, duration) = match &text {
            Some(t) => {
                let tree = export_tree(repo, commit)?;
                let context = Path::new(path)
                    .parent()
                    .map(|p| tree.path().join(p))
                    .unwrap_or_else(|| tree.path().to_owned());
                let r = measure_with(engine, &rules, t, &context, &cfg.measurement)
                    .with_context(|| format!("cannot measure {spec}"))?;
                (r.image_size_mb, r.build_duration_s)
            }
            None => (None, None),
        };
        log::info!("{spec}: size {size:?} MB, duration {duration:?} s");
        rows.push(CommitMeasurement {
            commit: commit.clone(),
            image_size_mb: size,
            build_duration_s: duration,
            refactoring_detected,
        });
        if ast.is_some() {
            previous = ast;
        }
    }
    Ok(rows)
}

fn split_target(s: &str) -> Result<(PathBuf, String)> {
    match s.rsplit_once(':') {
        Some((repo, path)) if !repo.is_empty() && !path.is_empty() => {
            Ok((PathBuf::from(repo), path.to_owned()))
        }
        _ => bail!("expected REPO:DOCKERFILE, got {s:?}"),
    }
}

pub fn run(cfg: &RunConfig, repo: &Path, dockerfile: &Path, extra: &[String]) -> Result<Exit> {
    let mut targets = vec![(repo.to_owned(), dockerfile.to_string_lossy().into_owned())];
    for t in extra {
        targets.push(split_target(t)?);
    }

    // the commit-count check runs before anything is built
    let mut eligible = Vec::new();
    for (repo, path) in &targets {
        let commits = history(repo, path)?;
        match segment_lifecycle(commits.len()) {
            Ok(_) => eligible.push((repo, path, commits)),
            Err(e) => eprintln!("excluded {}:{path}: {e}", repo.display()),
        }
    }
    if eligible.is_empty() {
        bail!("no Dockerfile history has enough commits to profile");
    }

    let engine = cfg.engine()?;
    let detector = cfg.detector()?;
    let mut profiles: Vec<LifecycleProfile> = Vec::new();
    let mut histories = Vec::new();
    for (repo, path, commits) in eligible {
        let rows = measure_history(cfg, engine.as_ref(), &detector, repo, path, &commits)?;
        match lifecycle_profile(&rows) {
            Ok(p) => profiles.push(p),
            Err(e) => eprintln!("excluded {}:{path}: {e}", repo.display()),
        }
        histories.push(serde_json::json!({
            "repo": repo.display().to_string(),
            "dockerfile": path,
            "commits": rows,
        }));
    }
    let profile = combine_profiles(&profiles)?;
    let csv = profile_csv(&profile);
    if cfg.output_dir.is_some() {
        let out = cfg.output_dir()?;
        write_artifact(out, "lifecycle.csv", &csv)?;
        write_artifact(out, "lifecycle.json", &to_json(&profile))?;
        write_artifact(out, "commits.json", &to_json(&histories))?;
    }
    print!("{csv}");
    Ok(Exit::Ok)
}
