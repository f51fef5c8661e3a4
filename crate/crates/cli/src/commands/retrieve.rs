use std::path::Path;

use anyhow::Result;
use serde::Serialize;

use super::{corpus, parse_file};
use crate::config::RunConfig;
use crate::{to_json, Exit};
use dockref_core::retrieval::select_demonstrations;
use dockref_core::{RefactoringAction, ScoreBreakdown};

#[derive(Serialize)]
struct Ranked<'a> {
    rank: usize,
    id: &'a str,
    project: &'a str,
    total: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    score: Option<&'a ScoreBreakdown>,
    #[serde(skip_serializing_if = "Option::is_none")]
    actions: Option<&'a [RefactoringAction]>,
}

pub fn run(cfg: &RunConfig, dockerfile: &Path, n: usize, explain: bool) -> Result<Exit> {
    let (_, query) = parse_file(dockerfile)?;
    let corpus = corpus(cfg)?;
    let selected = select_demonstrations(&corpus, &query, n)?;
    let ranked: Vec<Ranked> = selected
        .iter()
        .rev()
        .enumerate()
        .map(|(i, (d, s))| Ranked {
            rank: i + 1,
            id: &d.id,
            project: &d.project,
            total: s.total,
            score: explain.then_some(s),
            actions: explain.then_some(d.actions.as_slice()),
        })
        .collect();
    print!("{}", to_json(&ranked));
    Ok(Exit::Ok)
}
