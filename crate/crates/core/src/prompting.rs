//! Prompt assembly under a context-window budget.
//!
//! A prompt is the task description, the refactoring catalog, the selected
//! demonstrations in ascending score order, and finally the query Dockerfile.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::demo_store::Demonstration;
use crate::dockerfile::{estimate_tokens, serialize, DockerfileAst};
use crate::refactoring::{RefactoringAction, Taxonomy};
use crate::retrieval::ScoreBreakdown;

/// Upper bound on demonstrations per prompt.
pub const DEFAULT_SHOT_CAP: usize = 50;
pub const DEFAULT_CONTEXT_WINDOW: usize = 128_000;

const DEFAULT_TEMPLATE: &str = include_str!("../assets/prompt_template.txt");
const DEMO_SLOTS: [&str; 3] = ["v_before", "v_after", "actions"];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TemplateError {
    #[error("cannot read template: {0}")]
    Io(String),
    #[error("template is missing the `=== {0} ===` section")]
    MissingSection(&'static str),
    #[error("unknown template section `{0}`")]
    UnknownSection(String),
    #[error("section `{section}` must contain {{{{{slot}}}}} exactly once, found {count}")]
    Slot {
        section: &'static str,
        slot: &'static str,
        count: usize,
    },
    #[error("section `{section}` has unknown placeholder {{{{{name}}}}}")]
    UnknownSlot { section: &'static str, name: String },
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BudgetError {
    #[error("prompt without demonstrations needs {needed} tokens, window is {window}")]
    Overflow { needed: usize, window: usize },
    #[error("a demonstration cannot cost zero tokens")]
    ZeroDemoCost,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PromptTemplate {
    pub system: Option<String>,
    pub task_description: String,
    pub action_catalog: String,
    pub demo_format: String,
    pub query_format: String,
}

/// Splits `{{name}}` placeholders out of a skeleton.
fn placeholders(skeleton: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut rest = skeleton;
    while let Some(start) = rest.find("{{") {
        let Some(len) = rest[start + 2..].find("}}") else {
            break;
        };
        out.push(&rest[start + 2..start + 2 + len]);
        rest = &rest[start + 2 + len + 2..];
    }
    out
}

fn check_slots(
    section: &'static str,
    skeleton: &str,
    slots: &[&'static str],
) -> Result<(), TemplateError> {
    let found = placeholders(skeleton);
    if let Some(name) = found.iter().find(|n| !slots.contains(n)) {
        return Err(TemplateError::UnknownSlot {
            section,
            name: name.to_string(),
        });
    }
    for slot in slots {
        let count = found.iter().filter(|n| *n == slot).count();
        if count != 1 {
            return Err(TemplateError::Slot {
                section,
                slot,
                count,
            });
        }
    }
    Ok(())
}

/// Fills placeholders in one pass, so slot values are never re-scanned.
fn fill(skeleton: &str, values: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(skeleton.len());
    let mut rest = skeleton;
    while let Some(start) = rest.find("{{") {
        let Some(len) = rest[start + 2..].find("}}") else {
            break;
        };
        let name = &rest[start + 2..start + 2 + len];
        out.push_str(&rest[..start]);
        match values.iter().find(|(k, _)| *k == name) {
            Some((_, v)) => out.push_str(v),
            None => out.push_str(&rest[start..start + len + 4]),
        }
        rest = &rest[start + len + 4..];
    }
    out.push_str(rest);
    out
}

impl PromptTemplate {
    /// Parses a template file made of `=== task ===`, `=== demonstration ===`,
    /// `=== query ===` and an optional `=== system ===` section.
    pub fn parse(text: &str, action_catalog: &str) -> Result<Self, TemplateError> {
        let mut sections: Vec<(String, String)> = Vec::new();
        for line in text.split_inclusive('\n') {
            let trimmed = line.trim();
            if let Some(name) = trimmed
                .strip_prefix("=== ")
                .and_then(|r| r.strip_suffix(" ==="))
            {
                sections.push((name.trim().to_owned(), String::new()));
            } else if let Some((_, body)) = sections.last_mut() {
                body.push_str(line);
            }
        }
        let mut take = |name: &'static str| {
            sections
                .iter()
                .position(|(n, _)| n == name)
                .map(|i| sections.remove(i).1)
        };
        let system = take("system").map(|s| s.trim().to_owned());
        let task_description = take("task").ok_or(TemplateError::MissingSection("task"))?;
        let demo_format =
            take("demonstration").ok_or(TemplateError::MissingSection("demonstration"))?;
        let query_format = take("query").ok_or(TemplateError::MissingSection("query"))?;
        if let Some((name, _)) = sections.first() {
            return Err(TemplateError::UnknownSection(name.clone()));
        }
        check_slots("task", &task_description, &[])?;
        check_slots("demonstration", &demo_format, &DEMO_SLOTS)?;
        check_slots("query", &query_format, &["query"])?;
        Ok(PromptTemplate {
            system: system.filter(|s| !s.is_empty()),
            task_description,
            action_catalog: action_catalog.to_owned(),
            demo_format,
            query_format,
        })
    }

    pub fn load(path: &Path, action_catalog: &str) -> Result<Self, TemplateError> {
        let text = std::fs::read_to_string(path).map_err(|e| TemplateError::Io(e.to_string()))?;
        Self::parse(&text, action_catalog)
    }

    /// The bundled template with the catalog of `taxonomy`.
    pub fn with_taxonomy(taxonomy: &Taxonomy) -> Self {
        Self::parse(DEFAULT_TEMPLATE, &taxonomy.action_catalog())
            .expect("bundled template is valid")
    }

    /// Task description and catalog, the part every prompt carries.
    pub fn preamble(&self) -> String {
        format!("{}{}\n", self.task_description, self.action_catalog)
    }

    pub fn render_demo(&self, demo: &Demonstration) -> String {
        let actions = render_actions(&demo.actions);
        fill(
            &self.demo_format,
            &[
                ("v_before", demo.v_before.trim_end_matches('\n')),
                ("v_after", demo.v_after.trim_end_matches('\n')),
                ("actions", actions.trim_end_matches('\n')),
            ],
        )
    }

    pub fn render_query(&self, query: &str) -> String {
        fill(
            &self.query_format,
            &[("query", query.trim_end_matches('\n'))],
        )
    }
}

impl Default for PromptTemplate {
    fn default() -> Self {
        Self::with_taxonomy(&Taxonomy::default())
    }
}

/// One line per action: its type and parameters.
pub fn render_actions(actions: &[RefactoringAction]) -> String {
    if actions.is_empty() {
        return "- none\n".into();
    }
    let mut out = String::new();
    for a in actions {
        out.push_str("- ");
        out.push_str(a.kind.name());
        if !a.params.is_empty() {
            let params: Vec<String> = a.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
            let _ = write!(out, " ({})", params.join(", "));
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssembledPrompt {
    pub system: Option<String>,
    pub text: String,
    pub shots: usize,
    /// Estimate for `system` and `text` together.
    pub token_estimate: usize,
    pub demo_ids: Vec<String>,
}

/// Demonstrations that fit next to the template and query, capped.
pub fn max_shots(
    context_window: usize,
    template_tokens: usize,
    per_demo_tokens: usize,
    query_tokens: usize,
    cap: Option<usize>,
) -> Result<usize, BudgetError> {
    let fixed = template_tokens + query_tokens;
    if fixed >= context_window {
        return Err(BudgetError::Overflow {
            needed: fixed,
            window: context_window,
        });
    }
    if per_demo_tokens == 0 {
        return Err(BudgetError::ZeroDemoCost);
    }
    let n = (context_window - fixed) / per_demo_tokens;
    Ok(cap.map_or(n, |c| n.min(c)))
}

fn build_text(template: &PromptTemplate, demos: &[String], query: &str) -> String {
    let mut text = template.preamble();
    for d in demos {
        text.push_str(d);
    }
    text.push_str(query);
    text
}

fn estimate(system: Option<&str>, text: &str) -> usize {
    system.map_or(0, estimate_tokens) + estimate_tokens(text)
}

/// Builds the prompt, dropping the lowest-scored demonstrations first until
/// the estimate fits `window`.
pub fn assemble(
    template: &PromptTemplate,
    selected: &[(&Demonstration, ScoreBreakdown)],
    query: &DockerfileAst,
    window: usize,
) -> Result<AssembledPrompt, BudgetError> {
    let query_block = template.render_query(&serialize(query));
    let rendered: Vec<String> = selected
        .iter()
        .map(|(d, _)| template.render_demo(d))
        .collect();
    let system = template.system.as_deref();

    let zero_shot = estimate(system, &build_text(template, &[], &query_block));
    if zero_shot > window {
        return Err(BudgetError::Overflow {
            needed: zero_shot,
            window,
        });
    }
    let mut first = 0;
    loop {
        let text = build_text(template, &rendered[first..], &query_block);
        let tokens = estimate(system, &text);
        if tokens <= window {
            return Ok(AssembledPrompt {
                system: template.system.clone(),
                text,
                shots: rendered.len() - first,
                token_estimate: tokens,
                demo_ids: selected[first..]
                    .iter()
                    .map(|(d, _)| d.id.clone())
                    .collect(),
            });
        }
        first += 1;
    }
}
