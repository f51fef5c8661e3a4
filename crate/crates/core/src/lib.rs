//! Dockerfile refactoring with in-context learning.
//!
//! The crate covers the whole pipeline: parsing Dockerfiles into a lossless
//! syntax tree, detecting refactoring actions between two versions, storing
//! and retrieving scored refactoring demonstrations, assembling token-budgeted
//! prompts, talking to a completion backend, building and measuring images, and
//! computing evaluation and lifecycle statistics.

// `!(x > 0.0)` is used on purpose: NaN must fail these range checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod build;
pub mod demo_store;
pub mod dockerfile;
pub mod evaluation;
pub mod llm;
pub mod prompting;
pub mod refactoring;
pub mod retrieval;

pub use build::{
    behavior_preserved, build_and_measure, classify_failure, BuildResult, FailureCategory,
    MeasurementConfig,
};
pub use demo_store::{load_corpus, Corpus, CorpusStats, Demonstration, QualityAnnotation};
pub use dockerfile::{
    estimate_tokens, functional_fingerprint, parse, serialize, DockerfileAst,
    FunctionalFingerprint, ImageRef, Instruction, InstructionKind, SourceSpan, Stage, SyntaxError,
};
pub use evaluation::{aggregate, spearman, AggregateReport, EvaluationRecord, LifecycleProfile};
pub use llm::{extract_dockerfile, LlmClient};
pub use prompting::{assemble, max_shots, AssembledPrompt, PromptTemplate};
pub use refactoring::{detect_refactorings, RefactoringAction, RefactoringType, Taxonomy};
pub use retrieval::{select_demonstrations, ScoreBreakdown};
