use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use dockref_core::build::{BuildResult, FailureCategory};
use dockref_core::demo_store::{
    append_demonstration, ingest_pair, is_sar_candidate, load_corpus, stratified_split, tokenize,
    CorpusError, DemoMetadata, Demonstration, PairMeasurements, RejectReason,
};
use dockref_core::refactoring::Detector;
use proptest::prelude::*;

fn fixture_pairs() -> Vec<(String, String, String)> {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/refactorings");
    let mut dirs: Vec<PathBuf> = fs::read_dir(root)
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    dirs.sort();
    dirs.into_iter()
        .map(|d| {
            (
                d.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read_to_string(d.join("before.Dockerfile")).unwrap(),
                fs::read_to_string(d.join("after.Dockerfile")).unwrap(),
            )
        })
        .collect()
}

fn ok(size: f64, duration: f64) -> BuildResult {
    BuildResult::succeeded(vec![duration; 3], (size * 1e6) as u64, String::new())
}

fn metadata(id: &str, project: &str) -> DemoMetadata {
    DemoMetadata {
        id: id.into(),
        project: project.into(),
        commit: format!("{:0>40}", id.len()),
        understandability: 1,
        maintainability: 0,
    }
}

/// Every behavior-preserving fixture pair, ingested with synthetic measurements.
fn demos() -> Vec<Demonstration> {
    let detector = Detector::default();
    let mut out = Vec::new();
    for (i, (name, before, after)) in fixture_pairs().into_iter().enumerate() {
        let m = PairMeasurements {
            before: ok(100.0 + i as f64, 60.0),
            after: ok(80.0 + i as f64, 50.0 + i as f64),
        };
        let project = format!("org/project-{}", i % 7);
        if let Ok(d) = ingest_pair(&detector, &before, &after, &metadata(&name, &project), &m) {
            out.push(d);
        }
    }
    out
}

fn write_corpus(demos: &[Demonstration]) -> tempfile::NamedTempFile {
    let file = tempfile::NamedTempFile::new().unwrap();
    for d in demos {
        append_demonstration(file.path(), d).unwrap();
    }
    file
}

#[test]
fn ingested_fixtures_round_trip_through_storage() {
    let demos = demos();
    assert!(
        demos.len() >= 20,
        "only {} fixture pairs ingested",
        demos.len()
    );
    let file = write_corpus(&demos);
    let loaded = load_corpus(file.path()).unwrap();
    assert!(loaded.rejected.is_empty(), "{:?}", loaded.rejected);
    assert_eq!(loaded.corpus.demos(), demos.as_slice());
    assert_eq!(loaded.corpus.stats().doc_count, demos.len());

    let again = load_corpus(file.path()).unwrap();
    assert_eq!(loaded.corpus, again.corpus);
}

#[test]
fn stats_match_direct_recomputation() {
    let demos = demos();
    let file = write_corpus(&demos);
    let corpus = load_corpus(file.path()).unwrap().corpus;
    let docs: Vec<Vec<String>> = demos.iter().map(|d| tokenize(&d.v_before)).collect();
    let mean = docs.iter().map(Vec::len).sum::<usize>() as f64 / docs.len() as f64;
    assert!((corpus.stats().avg_doc_len - mean).abs() < 1e-12);
    let mut df: BTreeMap<&str, usize> = BTreeMap::new();
    for doc in &docs {
        for term in doc.iter().map(String::as_str).collect::<BTreeSet<_>>() {
            *df.entry(term).or_default() += 1;
        }
    }
    assert_eq!(corpus.stats().doc_freq.len(), df.len());
    for (term, n) in &corpus.stats().doc_freq {
        assert_eq!(df[term.as_str()], *n);
        assert!((1..=corpus.stats().doc_count).contains(n));
    }
}

#[test]
fn invalid_records_are_reported_by_line() {
    let demos = demos();
    let mut bad_parse = demos[0].clone();
    bad_parse.id = "bad-parse".into();
    bad_parse.v_before = "FROM alpine\nFROBNICATE x\n".into();
    let mut bad_range = demos[1].clone();
    bad_range.id = "bad-range".into();
    bad_range.annotation.understandability = 2;

    let file = write_corpus(&[demos[2].clone(), bad_parse, demos[3].clone(), bad_range]);
    fs::write(
        file.path(),
        fs::read_to_string(file.path()).unwrap() + "{not json}\n",
    )
    .unwrap();
    let loaded = load_corpus(file.path()).unwrap();
    assert_eq!(loaded.corpus.len(), 2);
    let lines: Vec<usize> = loaded.rejected.iter().map(|d| d.line).collect();
    assert_eq!(lines, vec![2, 4, 5]);
    assert!(
        loaded.rejected[0].reason.contains("line 2"),
        "{}",
        loaded.rejected[0]
    );
    assert!(loaded.rejected[1].reason.contains("understandability"));
}

#[test]
fn corpus_without_valid_records_is_an_error() {
    let file = tempfile::NamedTempFile::new().unwrap();
    fs::write(file.path(), "{}\n\n").unwrap();
    assert!(matches!(
        load_corpus(file.path()),
        Err(CorpusError::Empty { rejected: 1 })
    ));
    assert!(matches!(
        load_corpus(Path::new("/nonexistent/corpus.jsonl")),
        Err(CorpusError::Io { .. })
    ));
}

#[test]
fn ingestion_filters() {
    let detector = Detector::default();
    let before = "FROM node:20\nCOPY . /app\nCMD [\"node\", \"a.js\"]\n";
    let after = "FROM node:20-slim\nCOPY . /app\nCMD [\"node\", \"a.js\"]\n";
    let changed = "FROM node:20\nCOPY . /app\nCMD [\"node\", \"b.js\"]\n";
    let meta = metadata("x", "org/x");
    let green = PairMeasurements {
        before: ok(1000.0, 90.0),
        after: ok(200.0, 80.0),
    };
    let demo = ingest_pair(&detector, before, after, &meta, &green).unwrap();
    assert_eq!(demo.annotation.image_size_before_mb, 1000.0);
    assert_eq!(demo.annotation.build_duration_after_s, 80.0);
    assert_eq!(demo.actions.len(), 1);
    demo.validate().unwrap();

    let reason = |b: &str, a: &str, m: &PairMeasurements| {
        ingest_pair(&detector, b, a, &meta, m).unwrap_err().reason
    };
    assert_eq!(
        reason(before, changed, &green),
        RejectReason::BehaviorChange
    );
    let failed = BuildResult::failed(
        vec![1.0],
        "E: Unable to locate package".into(),
        FailureCategory::Dependency,
    );
    let red_before = PairMeasurements {
        before: failed.clone(),
        after: ok(1.0, 1.0),
    };
    assert_eq!(
        reason(before, after, &red_before),
        RejectReason::BuildBefore
    );
    let red_after = PairMeasurements {
        before: ok(1.0, 1.0),
        after: failed,
    };
    assert_eq!(reason(before, after, &red_after), RejectReason::BuildAfter);
    assert_eq!(
        reason("FROM\n", after, &green),
        RejectReason::InvalidDockerfile
    );
}

#[test]
fn sar_filter() {
    assert!(is_sar_candidate(
        "Refactor Dockerfile to use multi-stage build"
    ));
    assert!(!is_sar_candidate("add feature X"));
    assert!(!is_sar_candidate("fix typo in README"));
}

#[test]
fn split_is_project_disjoint_and_seeded() {
    let demos = demos();
    let split = stratified_split(&demos, 0.25, 42).unwrap();
    assert_eq!(split, stratified_split(&demos, 0.25, 42).unwrap());
    let all: BTreeSet<_> = split.train.iter().chain(&split.test).collect();
    assert_eq!(all.len(), demos.len());
    assert_eq!(split.train.len() + split.test.len(), demos.len());
    let project = |id: &String| &demos.iter().find(|d| &d.id == id).unwrap().project;
    let train: BTreeSet<_> = split.train.iter().map(project).collect();
    let test: BTreeSet<_> = split.test.iter().map(project).collect();
    assert!(train.is_disjoint(&test));
    assert!(!split.test.is_empty() && !split.train.is_empty());
    assert!(stratified_split(&demos, 1.0, 0).is_err());
}

proptest! {
    #[test]
    fn tokens_are_lowercase_and_non_empty(text in "[ -~\n]{0,200}") {
        for t in tokenize(&text) {
            prop_assert!(!t.is_empty());
            prop_assert_eq!(t.to_lowercase(), t.clone());
            prop_assert!(t.chars().any(char::is_alphanumeric));
            prop_assert!(!t.chars().any(char::is_whitespace));
        }
    }
}
