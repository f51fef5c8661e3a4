use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::{read_text, to_json, Exit};
use dockref_core::build::{measure_with, Ruleset};
use dockref_core::demo_store::{
    append_demonstration, ingest_pair, is_sar_candidate, load_corpus, DemoMetadata,
    PairMeasurements,
};

/// One line of the candidates file.
#[derive(Debug, Deserialize)]
struct Candidate {
    id: String,
    project: String,
    commit: String,
    /// Commit message; when present it must declare a Dockerfile refactoring.
    #[serde(default)]
    message: Option<String>,
    v_before: String,
    v_after: String,
    understandability: i8,
    maintainability: i8,
    /// Build context, relative to the candidates file.
    #[serde(default)]
    context: Option<PathBuf>,
}

#[derive(Serialize)]
struct Rejected {
    id: String,
    reason: String,
    detail: String,
}

#[derive(Serialize)]
struct Summary {
    accepted: Vec<String>,
    rejected: Vec<Rejected>,
}

pub fn run(cfg: &RunConfig, candidates: &Path, skip_sar_filter: bool) -> Result<Exit> {
    let corpus_path = cfg
        .corpus_path
        .as_deref()
        .context("ingest appends to a corpus (--corpus FILE)")?;
    let mut known: BTreeSet<String> = if corpus_path.exists() {
        load_corpus(corpus_path)
            .map(|c| c.corpus.demos().iter().map(|d| d.id.clone()).collect())
            .unwrap_or_default()
    } else {
        BTreeSet::new()
    };
    let base = candidates.parent().unwrap_or(Path::new("."));
    let empty = tempfile::tempdir()?;
    let detector = cfg.detector()?;
    let engine = cfg.engine()?;
    let rules = Ruleset::default();
    let mut summary = Summary {
        accepted: Vec::new(),
        rejected: Vec::new(),
    };

    for (i, line) in read_text(candidates)?.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let c: Candidate = serde_json::from_str(line)
            .with_context(|| format!("{}:{}: invalid candidate", candidates.display(), i + 1))?;
        let mut reject = |reason: &str, detail: String| {
            summary.rejected.push(Rejected {
                id: c.id.clone(),
                reason: reason.into(),
                detail,
            })
        };
        if known.contains(&c.id) {
            reject("duplicate-id", "already in the corpus".into());
            continue;
        }
        if let (Some(msg), false) = (&c.message, skip_sar_filter) {
            if !is_sar_candidate(msg) {
                reject("not-sar", format!("commit message: {msg:?}"));
                continue;
            }
        }
        let context = c
            .context
            .as_ref()
            .map(|p| base.join(p))
            .unwrap_or_else(|| empty.path().to_owned());
        let measure = |text: &str| {
            measure_with(engine.as_ref(), &rules, text, &context, &cfg.measurement)
                .with_context(|| format!("cannot measure candidate {}", c.id))
        };
        let measurements = PairMeasurements {
            before: measure(&c.v_before)?,
            after: measure(&c.v_after)?,
        };
        let meta = DemoMetadata {
            id: c.id.clone(),
            project: c.project.clone(),
            commit: c.commit.clone(),
            understandability: c.understandability,
            maintainability: c.maintainability,
        };
        match ingest_pair(&detector, &c.v_before, &c.v_after, &meta, &measurements) {
            Ok(demo) => {
                append_demonstration(corpus_path, &demo)
                    .with_context(|| format!("cannot append to {}", corpus_path.display()))?;
                known.insert(demo.id.clone());
                summary.accepted.push(demo.id);
            }
            Err(e) => reject(&e.reason.to_string(), e.detail),
        }
    }
    eprintln!(
        "ingested {} of {} candidates",
        summary.accepted.len(),
        summary.accepted.len() + summary.rejected.len()
    );
    print!("{}", to_json(&summary));
    Ok(Exit::Ok)
}
