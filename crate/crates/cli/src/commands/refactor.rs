use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Serialize;

use super::{corpus, parse_file};
use crate::config::RunConfig;
use crate::{to_json, write_artifact, Exit};
use dockref_core::build::{
    behavior_preserved, measure_with, BuildEngine, BuildResult, FailureCategory, MeasurementConfig,
    Ruleset,
};
use dockref_core::demo_store::Corpus;
use dockref_core::evaluation::{EvaluationPair, EvaluationRecord, Variant};
use dockref_core::llm::{extract_dockerfile, prompt_hash, ExtractionError};
use dockref_core::prompting::{assemble, max_shots, PromptTemplate, DEFAULT_SHOT_CAP};
use dockref_core::retrieval::select_demonstrations;
use dockref_core::{
    estimate_tokens, parse, serialize, DockerfileAst, RefactoringAction, ScoreBreakdown,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Success,
    OriginalBuildFailure,
    BuildFailure,
    BehaviorChange,
}

#[derive(Serialize)]
struct SelectedDemo<'a> {
    id: &'a str,
    project: &'a str,
    in_prompt: bool,
    score: &'a ScoreBreakdown,
}

#[derive(Debug, Serialize)]
pub struct RefactorReport {
    pub input: String,
    pub setting: String,
    pub shots: usize,
    pub demo_ids: Vec<String>,
    pub prompt_hash: Option<String>,
    pub token_estimate: Option<usize>,
    pub outcome: Outcome,
    pub exit_code: u8,
    pub failure: Option<FailureCategory>,
    pub behavior_preserved: Option<bool>,
    pub actions: Vec<RefactoringAction>,
    /// Absent when the original did not build.
    pub pair: Option<EvaluationPair>,
}

/// Fails when `shots` demonstrations of average size cannot fit the window.
fn check_budget(
    cfg: &RunConfig,
    template: &PromptTemplate,
    corpus: &Corpus,
    query: &DockerfileAst,
) -> Result<()> {
    let fixed = template.system.as_deref().map_or(0, estimate_tokens)
        + estimate_tokens(&template.preamble());
    let per_demo = corpus
        .demos()
        .iter()
        .map(|d| estimate_tokens(&template.render_demo(d)))
        .sum::<usize>()
        .div_ceil(corpus.len().max(1));
    let query_tokens = estimate_tokens(&template.render_query(&serialize(query)));
    let limit = max_shots(
        cfg.context_window,
        fixed,
        per_demo,
        query_tokens,
        Some(DEFAULT_SHOT_CAP),
    )?;
    if cfg.shots > limit {
        bail!(
            "{} shots do not fit a {}-token window (at most {limit} with this corpus)",
            cfg.shots,
            cfg.context_window
        );
    }
    Ok(())
}

fn measure(
    engine: &dyn BuildEngine,
    text: &str,
    context: &Path,
    measurement: &MeasurementConfig,
    what: &str,
) -> Result<BuildResult> {
    measure_with(engine, &Ruleset::default(), text, context, measurement)
        .with_context(|| format!("cannot measure the {what} Dockerfile"))
}

fn record(id: &str, variant: Variant, build: BuildResult, behavior_ok: bool) -> EvaluationRecord {
    EvaluationRecord {
        id: id.to_owned(),
        variant,
        build,
        understandability_delta: None,
        maintainability_delta: None,
        behavior_ok,
    }
}

pub fn run(cfg: &RunConfig, dockerfile: &Path, context: Option<&Path>) -> Result<Exit> {
    let out = cfg.output_dir()?;
    let (original, query) = parse_file(dockerfile)?;
    let context = match context {
        Some(c) => c.to_owned(),
        None => dockerfile
            .parent()
            .map(|p| {
                if p.as_os_str().is_empty() {
                    Path::new(".")
                } else {
                    p
                }
            })
            .unwrap_or(Path::new("."))
            .to_owned(),
    };
    let id = dockerfile
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let template = cfg.template()?;
    let corpus = if cfg.shots > 0 {
        let c = corpus(cfg)?;
        check_budget(cfg, &template, &c, &query)?;
        Some(c)
    } else {
        None
    };
    let mut measurement = cfg.measurement.clone();
    measurement.log_dir = Some(out.join("logs"));
    let engine = cfg.engine()?;

    let mut report = RefactorReport {
        input: dockerfile.display().to_string(),
        setting: format!("{}-shot", cfg.shots),
        shots: 0,
        demo_ids: Vec::new(),
        prompt_hash: None,
        token_estimate: None,
        outcome: Outcome::Success,
        exit_code: 0,
        failure: None,
        behavior_preserved: None,
        actions: Vec::new(),
        pair: None,
    };

    let before = measure(
        engine.as_ref(),
        &original,
        &context,
        &measurement,
        "original",
    )?;
    write_artifact(out, "build_before.json", &to_json(&before))?;
    if !before.success {
        eprintln!(
            "error: the original Dockerfile does not build ({})",
            before.failure.unwrap_or(FailureCategory::Other)
        );
        report.outcome = Outcome::OriginalBuildFailure;
        report.exit_code = Exit::BuildFailure.code();
        report.failure = before.failure;
        write_artifact(out, "report.json", &to_json(&report))?;
        return Ok(Exit::BuildFailure);
    }

    let selected = match &corpus {
        Some(c) => select_demonstrations(c, &query, cfg.shots)?,
        None => Vec::new(),
    };
    let prompt = assemble(&template, &selected, &query, cfg.context_window)?;
    if prompt.shots < selected.len() {
        eprintln!(
            "warning: dropped {} demonstrations to fit the context window",
            selected.len() - prompt.shots
        );
    }
    let breakdowns: Vec<SelectedDemo> = selected
        .iter()
        .map(|(d, s)| SelectedDemo {
            id: &d.id,
            project: &d.project,
            in_prompt: prompt.demo_ids.contains(&d.id),
            score: s,
        })
        .collect();
    write_artifact(out, "score_breakdowns.json", &to_json(&breakdowns))?;
    let mut prompt_txt = String::new();
    if let Some(system) = &prompt.system {
        prompt_txt.push_str("=== system ===\n");
        prompt_txt.push_str(system);
        prompt_txt.push_str("\n=== user ===\n");
    }
    prompt_txt.push_str(&prompt.text);
    write_artifact(out, "prompt.txt", &prompt_txt)?;
    report.shots = prompt.shots;
    report.demo_ids = prompt.demo_ids.clone();
    report.prompt_hash = Some(prompt_hash(&prompt));
    report.token_estimate = Some(prompt.token_estimate);

    let response = cfg.llm_client()?.complete(&prompt)?;
    write_artifact(out, "response.txt", &response)?;
    let refactored = match extract_dockerfile(&response) {
        Ok(text) => text,
        Err(ExtractionError::Unparseable { text, error }) => {
            eprintln!("warning: the refactored Dockerfile does not parse: {error}");
            text
        }
        Err(e @ ExtractionError::NotFound) => {
            write_artifact(out, "report.json", &to_json(&report))?;
            return Err(e).context("the completion has no Dockerfile (see response.txt)");
        }
    };
    write_artifact(out, "refactored.Dockerfile", &refactored)?;

    let after = measure(
        engine.as_ref(),
        &refactored,
        &context,
        &measurement,
        "refactored",
    )?;
    write_artifact(out, "build_after.json", &to_json(&after))?;

    let exit = match parse(&refactored) {
        Ok(ast) if after.success => {
            report.actions = cfg.detector()?.detect(&query, &ast);
            let preserved = behavior_preserved(&query, &ast);
            report.behavior_preserved = Some(preserved);
            if preserved {
                Exit::Ok
            } else {
                Exit::BehaviorChange
            }
        }
        _ => Exit::BuildFailure,
    };
    report.outcome = match exit {
        Exit::Ok => Outcome::Success,
        Exit::BehaviorChange => Outcome::BehaviorChange,
        _ => Outcome::BuildFailure,
    };
    report.failure = after.failure;
    report.exit_code = exit.code();
    let behavior_ok = report.behavior_preserved.unwrap_or(false);
    report.pair = Some(EvaluationPair {
        setting: report.setting.clone(),
        before: record(&id, Variant::Original, before, true),
        after: record(&id, Variant::Automated, after, behavior_ok),
    });
    write_artifact(out, "report.json", &to_json(&report))?;

    match exit {
        Exit::BuildFailure => eprintln!(
            "build failed: {}",
            report.failure.unwrap_or(FailureCategory::Other)
        ),
        Exit::BehaviorChange => {
            eprintln!("behavior changed: copied files or startup commands differ")
        }
        _ => {}
    }
    Ok(exit)
}
