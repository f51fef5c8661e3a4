//! The demonstration corpus: JSON Lines storage, validation, ingestion and
//! BM25 corpus statistics.

mod split;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::Path;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::build::{behavior_preserved, BuildResult};
use crate::dockerfile::{parse, serialize};
use crate::refactoring::{Detector, RefactoringAction};

pub use split::{stratified_split, Split, SplitError};

/// Quality deltas and measurements for a demonstration pair.
///
/// `understandability` and `maintainability` are -1 (worse), 0 (same) or
/// 1 (better). Sizes are decimal MB, durations seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityAnnotation {
    pub understandability: i8,
    pub maintainability: i8,
    pub image_size_before_mb: f64,
    pub image_size_after_mb: f64,
    pub build_duration_before_s: f64,
    pub build_duration_after_s: f64,
}

impl QualityAnnotation {
    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [
            ("understandability", self.understandability),
            ("maintainability", self.maintainability),
        ] {
            if !(-1..=1).contains(&v) {
                return Err(format!("{name} must be -1, 0 or 1, got {v}"));
            }
        }
        for (name, v) in [
            ("image_size_before_mb", self.image_size_before_mb),
            ("image_size_after_mb", self.image_size_after_mb),
            ("build_duration_before_s", self.build_duration_before_s),
            ("build_duration_after_s", self.build_duration_after_s),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("{name} must be positive, got {v}"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Demonstration {
    pub id: String,
    pub project: String,
    pub commit: String,
    pub v_before: String,
    pub v_after: String,
    pub actions: Vec<RefactoringAction>,
    pub annotation: QualityAnnotation,
}

impl Demonstration {
    /// Checks the annotation ranges, that both versions parse and round-trip,
    /// and that the pair preserves behavior.
    pub fn validate(&self) -> Result<(), String> {
        if self.id.trim().is_empty() {
            return Err("empty id".into());
        }
        self.annotation.validate()?;
        let mut asts = Vec::with_capacity(2);
        for (name, text) in [("v_before", &self.v_before), ("v_after", &self.v_after)] {
            let ast = parse(text).map_err(|e| format!("{name} does not parse: {e}"))?;
            if serialize(&ast) != *text {
                return Err(format!("{name} does not round-trip"));
            }
            asts.push(ast);
        }
        if !behavior_preserved(&asts[0], &asts[1]) {
            return Err("v_before and v_after differ in behavior".into());
        }
        Ok(())
    }
}

/// BM25 statistics over tokenized `v_before` texts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub doc_count: usize,
    pub avg_doc_len: f64,
    pub doc_freq: BTreeMap<String, usize>,
}

impl CorpusStats {
    pub fn from_documents<'a>(docs: impl IntoIterator<Item = &'a [String]>) -> CorpusStats {
        let mut doc_count = 0;
        let mut total = 0;
        let mut doc_freq = BTreeMap::new();
        for doc in docs {
            doc_count += 1;
            total += doc.len();
            let unique: BTreeSet<&String> = doc.iter().collect();
            for term in unique {
                *doc_freq.entry(term.clone()).or_insert(0) += 1;
            }
        }
        CorpusStats {
            doc_count,
            avg_doc_len: if doc_count == 0 {
                0.0
            } else {
                total as f64 / doc_count as f64
            },
            doc_freq,
        }
    }

    pub fn df(&self, term: &str) -> usize {
        self.doc_freq.get(term).copied().unwrap_or(0)
    }
}

static SPLIT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"[^\w:/=.\-]+").unwrap());

/// BM25 tokens: lowercase, split on whitespace and punctuation other than
/// `: / = . - _`, so image references and flags stay whole.
pub fn tokenize(text: &str) -> Vec<String> {
    let lower = text.to_lowercase();
    SPLIT
        .split(&lower)
        .filter(|t| t.chars().any(char::is_alphanumeric))
        .map(str::to_owned)
        .collect()
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("cannot read corpus {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("corpus has no valid demonstrations ({rejected} rejected)")]
    Empty { rejected: usize },
    #[error("duplicate demonstration id `{0}`")]
    DuplicateId(String),
}

/// Immutable set of demonstrations with their BM25 tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    demos: Vec<Demonstration>,
    tokens: Vec<Vec<String>>,
    stats: CorpusStats,
}

impl Corpus {
    /// Builds a corpus from already validated demonstrations.
    pub fn new(demos: Vec<Demonstration>) -> Result<Corpus, CorpusError> {
        if demos.is_empty() {
            return Err(CorpusError::Empty { rejected: 0 });
        }
        let mut ids = BTreeSet::new();
        for d in &demos {
            if !ids.insert(d.id.as_str()) {
                return Err(CorpusError::DuplicateId(d.id.clone()));
            }
        }
        let tokens: Vec<Vec<String>> = demos.iter().map(|d| tokenize(&d.v_before)).collect();
        let stats = CorpusStats::from_documents(tokens.iter().map(Vec::as_slice));
        Ok(Corpus {
            demos,
            tokens,
            stats,
        })
    }

    pub fn demos(&self) -> &[Demonstration] {
        &self.demos
    }

    pub fn tokens(&self, index: usize) -> &[String] {
        &self.tokens[index]
    }

    pub fn stats(&self) -> &CorpusStats {
        &self.stats
    }

    pub fn len(&self) -> usize {
        self.demos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.demos.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Demonstration> {
        self.demos.iter().find(|d| d.id == id)
    }
}

/// Why a corpus record was skipped.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RecordDiagnostic {
    /// 1-based line in the corpus file.
    pub line: usize,
    pub id: Option<String>,
    pub reason: String,
}

impl fmt::Display for RecordDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}", self.line)?;
        if let Some(id) = &self.id {
            write!(f, " ({id})")?;
        }
        write!(f, ": {}", self.reason)
    }
}

#[derive(Debug, Clone)]
pub struct LoadedCorpus {
    pub corpus: Corpus,
    pub rejected: Vec<RecordDiagnostic>,
}

/// Reads a JSON Lines corpus, keeping valid records and reporting the rest.
pub fn load_corpus(path: &Path) -> Result<LoadedCorpus, CorpusError> {
    let text = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut demos = Vec::new();
    let mut rejected = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let reject = |id: Option<String>, reason: String| RecordDiagnostic {
            line: i + 1,
            id,
            reason,
        };
        let demo: Demonstration = match serde_json::from_str(line) {
            Ok(d) => d,
            Err(e) => {
                rejected.push(reject(None, format!("malformed record: {e}")));
                continue;
            }
        };
        if let Err(reason) = demo.validate() {
            rejected.push(reject(Some(demo.id), reason));
            continue;
        }
        if !seen.insert(demo.id.clone()) {
            rejected.push(reject(Some(demo.id), "duplicate id".into()));
            continue;
        }
        demos.push(demo);
    }
    for d in &rejected {
        log::warn!("{}: skipped record at {d}", path.display());
    }
    if demos.is_empty() {
        return Err(CorpusError::Empty {
            rejected: rejected.len(),
        });
    }
    Ok(LoadedCorpus {
        corpus: Corpus::new(demos)?,
        rejected,
    })
}

/// Appends one demonstration to a JSON Lines corpus file.
pub fn append_demonstration(path: &Path, demo: &Demonstration) -> std::io::Result<()> {
    let mut file = OpenOptions::new().create(true).append(true).open(path)?;
    let line = serde_json::to_string(demo).map_err(std::io::Error::other)?;
    writeln!(file, "{line}")
}

static SAR_PATTERN: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\b(refactor|fix|improve)").unwrap());
static DOCKERFILE_WORD: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\bdockerfile").unwrap());

/// True for commit messages that declare a refactoring and mention Dockerfile.
pub fn is_sar_candidate(commit_message: &str) -> bool {
    SAR_PATTERN.is_match(commit_message) && DOCKERFILE_WORD.is_match(commit_message)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DemoMetadata {
    pub id: String,
    pub project: String,
    pub commit: String,
    pub understandability: i8,
    pub maintainability: i8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairMeasurements {
    pub before: BuildResult,
    pub after: BuildResult,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RejectReason {
    InvalidDockerfile,
    BuildBefore,
    BuildAfter,
    BehaviorChange,
    InvalidAnnotation,
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RejectReason::InvalidDockerfile => "invalid-dockerfile",
            RejectReason::BuildBefore => "build-before",
            RejectReason::BuildAfter => "build-after",
            RejectReason::BehaviorChange => "behavior-change",
            RejectReason::InvalidAnnotation => "invalid-annotation",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("pair rejected ({reason}): {detail}")]
pub struct IngestRejection {
    pub reason: RejectReason,
    pub detail: String,
}

/// Turns a measured before/after pair into a demonstration, or says which
/// filter it failed.
pub fn ingest_pair(
    detector: &Detector,
    v_before: &str,
    v_after: &str,
    metadata: &DemoMetadata,
    measurements: &PairMeasurements,
) -> Result<Demonstration, IngestRejection> {
    let reject = |reason, detail: String| IngestRejection { reason, detail };
    let before = parse(v_before)
        .map_err(|e| reject(RejectReason::InvalidDockerfile, format!("v_before: {e}")))?;
    let after = parse(v_after)
        .map_err(|e| reject(RejectReason::InvalidDockerfile, format!("v_after: {e}")))?;
    let (b, a) = (&measurements.before, &measurements.after);
    if !b.success {
        return Err(reject(RejectReason::BuildBefore, failure_detail(b)));
    }
    if !a.success {
        return Err(reject(RejectReason::BuildAfter, failure_detail(a)));
    }
    if !behavior_preserved(&before, &after) {
        return Err(reject(
            RejectReason::BehaviorChange,
            "copied files or startup commands differ".into(),
        ));
    }
    let annotation = QualityAnnotation {
        understandability: metadata.understandability,
        maintainability: metadata.maintainability,
        image_size_before_mb: b.image_size_mb.unwrap_or_default(),
        image_size_after_mb: a.image_size_mb.unwrap_or_default(),
        build_duration_before_s: b.build_duration_s.unwrap_or_default(),
        build_duration_after_s: a.build_duration_s.unwrap_or_default(),
    };
    annotation
        .validate()
        .map_err(|e| reject(RejectReason::InvalidAnnotation, e))?;
    Ok(Demonstration {
        id: metadata.id.clone(),
        project: metadata.project.clone(),
        commit: metadata.commit.clone(),
        v_before: v_before.to_owned(),
        v_after: v_after.to_owned(),
        actions: detector.detect(&before, &after),
        annotation,
    })
}

fn failure_detail(r: &BuildResult) -> String {
    match r.failure {
        Some(c) => format!("build failed ({c})"),
        None => "build failed".into(),
    }
}
