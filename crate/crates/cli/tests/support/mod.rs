#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use dockref_cli::Exit;
use dockref_core::build::{dockerfile_hash, BuildRecord};
use dockref_core::llm::CompletionExchange;

pub const SHOTS: &str = "3";

pub fn e2e_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/e2e")
}

pub fn core_fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures")
}

pub fn cli(args: &[&str]) -> Exit {
    dockref_cli::run(std::iter::once("dockref").chain(args.iter().copied()))
}

pub fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Input names, sorted.
pub fn inputs() -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(e2e_dir().join("inputs"))
        .unwrap()
        .map(|e| {
            let path = e.unwrap().path();
            path.file_stem().unwrap().to_string_lossy().into_owned()
        })
        .collect();
    names.sort();
    names
}

pub fn fenced_block(markdown: &str) -> Option<String> {
    dockref_core::extract_dockerfile(markdown).ok()
}

fn ok_record(text: &str, size_mb: f64, durations: [f64; 3]) -> BuildRecord {
    BuildRecord {
        dockerfile_hash: dockerfile_hash(text),
        success: true,
        log: "#1 [internal] load build definition from Dockerfile\n#1 DONE 0.0s\n".into(),
        image_size_bytes: Some((size_mb * 1_000_000.0).round() as u64),
        run_durations_s: durations.to_vec(),
    }
}

fn failed_record(text: &str, log: &str) -> BuildRecord {
    BuildRecord {
        dockerfile_hash: dockerfile_hash(text),
        success: false,
        log: log.into(),
        image_size_bytes: None,
        run_durations_s: vec![4.5],
    }
}

/// Refactoring fixture pairs as `(name, before, after)`, sorted by name.
fn refactoring_pairs() -> Vec<(String, String, String)> {
    let mut dirs: Vec<PathBuf> = fs::read_dir(core_fixtures().join("refactorings"))
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

/// Writes `candidates.jsonl`, `builds.jsonl`, `corpus.jsonl` and `llm.jsonl`
/// into `dir`. Measurements are synthetic but fixed, so the output is
/// byte-stable.
pub fn generate_fixtures(dir: &Path) {
    fs::create_dir_all(dir).unwrap();
    let mut builds: BTreeMap<String, BuildRecord> = BTreeMap::new();
    let mut add = |r: BuildRecord| {
        builds.entry(r.dockerfile_hash.clone()).or_insert(r);
    };

    let mut candidates = String::new();
    for (i, (name, before, after)) in refactoring_pairs().into_iter().enumerate() {
        let k = i as f64;
        add(ok_record(
            &before,
            250.0 + 10.0 * k,
            [60.0 + k, 62.0 + k, 61.0 + k],
        ));
        if i == 6 {
            add(failed_record(
                &after,
                "#7 [3/4] RUN apt-get install -y build-essentialx\n#7 2.113 E: Unable to locate package build-essentialx\n",
            ));
        } else {
            let shrink = 0.45 + 0.1 * (i % 5) as f64;
            let pace = 0.8 + 0.1 * (i % 4) as f64;
            add(ok_record(
                &after,
                (250.0 + 10.0 * k) * shrink,
                [(60.0 + k) * pace, (62.0 + k) * pace, (61.0 + k) * pace],
            ));
        }
        let message = if i == 10 {
            "Bump base image version".to_string()
        } else {
            format!("Refactor Dockerfile ({name})")
        };
        let line = serde_json::json!({
            "id": name,
            "project": format!("org/project-{}", i % 5),
            "commit": format!("{:040x}", 0xd0c0_0000u64 + i as u64),
            "message": message,
            "v_before": before,
            "v_after": after,
            "understandability": ([1, 0, 1, -1])[i % 4],
            "maintainability": ([1, 1, 0, 0])[i % 4],
        });
        candidates.push_str(&serde_json::to_string(&line).unwrap());
        candidates.push('\n');
    }

    for (i, name) in inputs().iter().enumerate() {
        let k = i as f64;
        let original =
            fs::read_to_string(e2e_dir().join(format!("inputs/{name}.Dockerfile"))).unwrap();
        add(ok_record(
            &original,
            900.0 - 90.0 * k,
            [95.0 - k, 91.0 - k, 93.0 - k],
        ));
        let response = fs::read_to_string(e2e_dir().join(format!("responses/{name}.md"))).unwrap();
        if let Some(refactored) = fenced_block(&response) {
            add(ok_record(
                &refactored,
                (900.0 - 90.0 * k) * 0.4,
                [80.0 - k, 78.0 - k, 79.0 - k],
            ));
        }
    }

    let builds_path = dir.join("builds.jsonl");
    let mut text = String::new();
    for r in builds.values() {
        text.push_str(&serde_json::to_string(r).unwrap());
        text.push('\n');
    }
    fs::write(&builds_path, text).unwrap();
    let candidates_path = dir.join("candidates.jsonl");
    fs::write(&candidates_path, candidates).unwrap();

    let corpus = dir.join("corpus.jsonl");
    let _ = fs::remove_file(&corpus);
    let exit = cli(&[
        "ingest",
        p(&candidates_path),
        "--corpus",
        p(&corpus),
        "--build-replay",
        p(&builds_path),
    ]);
    assert_eq!(exit, Exit::Ok);

    let scratch = tempfile::tempdir().unwrap();
    let recorded = scratch.path().join("llm.jsonl");
    for name in inputs() {
        let out = scratch.path().join(&name);
        cli(&[
            "refactor",
            p(&e2e_dir().join(format!("inputs/{name}.Dockerfile"))),
            "--shots",
            SHOTS,
            "--corpus",
            p(&corpus),
            "--backend",
            "echo",
            "--echo-file",
            p(&e2e_dir().join(format!("responses/{name}.md"))),
            "--record",
            p(&recorded),
            "--build-replay",
            p(&builds_path),
            "--output",
            p(&out),
        ]);
    }
    let mut llm = String::new();
    for line in fs::read_to_string(&recorded).unwrap().lines() {
        let mut ex: CompletionExchange = serde_json::from_str(line).unwrap();
        ex.latency_ms = 0;
        ex.model = "fixture".into();
        llm.push_str(&serde_json::to_string(&ex).unwrap());
        llm.push('\n');
    }
    fs::write(dir.join("llm.jsonl"), llm).unwrap();
}

/// Every file under `dir` with its bytes, keyed by relative path.
pub fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for e in fs::read_dir(dir).unwrap() {
            let path = e.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                let rel = path
                    .strip_prefix(root)
                    .unwrap()
                    .to_string_lossy()
                    .into_owned();
                out.insert(rel, fs::read(&path).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

/// Runs `refactor` on a fixture input against the committed replay stores.
pub fn refactor_fixture(name: &str, out: &Path) -> Exit {
    let d = e2e_dir();
    cli(&[
        "refactor",
        p(&d.join(format!("inputs/{name}.Dockerfile"))),
        "--shots",
        SHOTS,
        "--corpus",
        p(&d.join("corpus.jsonl")),
        "--replay",
        p(&d.join("llm.jsonl")),
        "--build-replay",
        p(&d.join("builds.jsonl")),
        "--output",
        p(out),
    ])
}
