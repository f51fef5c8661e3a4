use std::fs;
use std::io::{Read, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::thread;

use dockref_core::build::{
    behavior_preserved, build_and_measure, classify_failure, dockerfile_hash, measure_with,
    BuildEngine, BuildError, BuildRecord, DockerApi, DockerCli, FailureCategory, MeasurementConfig,
    RecordingEngine, ReplayEngine, Ruleset,
};
use dockref_core::parse;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn log_fixtures() -> Vec<(FailureCategory, PathBuf)> {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/failure_logs");
    let mut out = Vec::new();
    for category in FailureCategory::ALL {
        let dir = root.join(category.to_string());
        let mut files: Vec<_> = fs::read_dir(&dir)
            .unwrap()
            .map(|e| e.unwrap().path())
            .collect();
        files.sort();
        out.extend(files.into_iter().map(|p| (category, p)));
    }
    out
}

#[test]
fn failure_log_fixtures_classify() {
    let fixtures = log_fixtures();
    for category in FailureCategory::ALL {
        let n = fixtures.iter().filter(|(c, _)| *c == category).count();
        assert!(n >= 3, "{category}: only {n} logs");
    }
    let wrong: Vec<_> = fixtures
        .iter()
        .filter_map(|(expected, path)| {
            let got = classify_failure(&fs::read_to_string(path).unwrap());
            (got != *expected).then(|| format!("{}: {got}", path.display()))
        })
        .collect();
    assert!(wrong.is_empty(), "misclassified: {wrong:#?}");
}

const FRAGMENTS: &[&str] = &[
    "Step 3/7 : RUN make",
    "unknown instruction: FORM",
    "manifest unknown",
    "pull access denied",
    "forbidden path outside the build context",
    "E: Unable to locate package",
    "npm ERR! code E404",
    "exit code: 137",
    "#5 DONE 0.3s",
    "",
    "\u{1b}[31merror\u{1b}[0m",
    "ñandú 日本語",
];

#[test]
fn classification_total_and_deterministic_on_fuzzed_logs() {
    let rules = Ruleset::default();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..1000 {
        let mut log = String::new();
        for _ in 0..rng.random_range(0..6) {
            if rng.random_bool(0.5) {
                log.push_str(FRAGMENTS[rng.random_range(0..FRAGMENTS.len())]);
            } else {
                let len = rng.random_range(0..80);
                log.extend((0..len).map(|_| rng.random_range(' '..='~')));
            }
            log.push('\n');
        }
        let first = rules.classify(&log);
        assert!(FailureCategory::ALL.contains(&first));
        assert_eq!(first, rules.classify(&log));
        assert_eq!(first, classify_failure(&log));
    }
}

fn record(text: &str, success: bool, log: &str, size: Option<u64>, d: &[f64]) -> BuildRecord {
    BuildRecord {
        dockerfile_hash: dockerfile_hash(text),
        success,
        log: log.into(),
        image_size_bytes: size,
        run_durations_s: d.to_vec(),
    }
}

fn config() -> MeasurementConfig {
    MeasurementConfig {
        engine_endpoint: "tcp://127.0.0.1:1".into(),
        ..MeasurementConfig::default()
    }
}

#[test]
fn replay_measurement() {
    let ok = "FROM alpine:3.19\n";
    let bad = "FROM alpine:3.19\nCOPY missing.txt /x\n";
    let engine = ReplayEngine::from_records(
        [
            record(ok, true, "done\n", Some(7_377_920), &[2.0, 3.0, 7.0]),
            record(
                bad,
                false,
                "ERROR: failed to solve: failed to compute cache key: \"/missing.txt\": not found",
                None,
                &[0.4],
            ),
        ],
        "mem",
    );
    let ctx = tempfile::tempdir().unwrap();
    let rules = Ruleset::default();

    let r = measure_with(&engine, &rules, ok, ctx.path(), &config()).unwrap();
    assert!(r.success && r.failure.is_none());
    assert_eq!(r.per_run_durations_s, vec![2.0, 3.0, 7.0]);
    assert_eq!(r.build_duration_s, Some(4.0));
    assert_eq!(r.image_size_mb, Some(7.37792));

    let r = measure_with(&engine, &rules, bad, ctx.path(), &config()).unwrap();
    assert!(!r.success);
    assert_eq!(r.failure, Some(FailureCategory::BuildContext));
    assert_eq!(
        r.per_run_durations_s.len(),
        1,
        "stops at the first failed run"
    );
    assert!(r.image_size_mb.is_none() && r.build_duration_s.is_none());

    let r = measure_with(
        &engine,
        &rules,
        "FROM alpine\nFORM x\n",
        ctx.path(),
        &config(),
    )
    .unwrap();
    assert_eq!(r.failure, Some(FailureCategory::Syntax));

    let missing = ctx.path().join("nope");
    assert!(matches!(
        measure_with(&engine, &rules, ok, &missing, &config()),
        Err(BuildError::Context(_))
    ));
    let zero = MeasurementConfig {
        runs: 0,
        ..config()
    };
    assert!(matches!(
        measure_with(&engine, &rules, ok, ctx.path(), &zero),
        Err(BuildError::Config(_))
    ));
}

#[test]
fn build_logs_are_written_per_run() {
    let text = "FROM busybox\n";
    let engine = ReplayEngine::from_records([record(text, true, "log\n", Some(1), &[1.0])], "mem");
    let ctx = tempfile::tempdir().unwrap();
    let logs = tempfile::tempdir().unwrap();
    let cfg = MeasurementConfig {
        log_dir: Some(logs.path().join("builds")),
        ..config()
    };
    measure_with(&engine, &Ruleset::default(), text, ctx.path(), &cfg).unwrap();
    assert_eq!(fs::read_dir(logs.path().join("builds")).unwrap().count(), 3);
}

#[test]
fn unreachable_engine() {
    let ctx = tempfile::tempdir().unwrap();
    let r = build_and_measure("FROM alpine:3.19\n", ctx.path(), &config());
    assert!(
        matches!(r, Err(BuildError::EngineUnavailable { .. })),
        "{r:?}"
    );

    let sock = ctx.path().join("no.sock");
    let cfg = MeasurementConfig {
        engine_endpoint: format!("unix://{}", sock.display()),
        ..config()
    };
    let r = build_and_measure("FROM alpine:3.19\n", ctx.path(), &cfg);
    assert!(
        matches!(r, Err(BuildError::EngineUnavailable { .. })),
        "{r:?}"
    );
}

/// Serves canned engine API responses and records request lines.
fn fake_api(size: u64) -> (String, Arc<Mutex<Vec<String>>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = seen.clone();
    thread::spawn(move || {
        for stream in listener.incoming() {
            let mut stream = stream.unwrap();
            let mut buf = Vec::new();
            let mut chunk = [0u8; 8192];
            let (line, tar_len) = loop {
                let n = stream.read(&mut chunk).unwrap();
                buf.extend_from_slice(&chunk[..n]);
                let mut headers = [httparse::EMPTY_HEADER; 32];
                let mut req = httparse::Request::new(&mut headers);
                if let Ok(httparse::Status::Complete(head)) = req.parse(&buf) {
                    let len: usize = req
                        .headers
                        .iter()
                        .find(|h| h.name.eq_ignore_ascii_case("content-length"))
                        .map(|h| std::str::from_utf8(h.value).unwrap().parse().unwrap())
                        .unwrap_or(0);
                    if buf.len() >= head + len {
                        let line = format!("{} {}", req.method.unwrap(), req.path.unwrap());
                        break (line, len);
                    }
                }
            };
            let body = if line.starts_with("GET /_ping") {
                "OK".to_owned()
            } else if line.starts_with("POST /build") {
                assert!(tar_len > 0);
                "{\"stream\":\"Step 1/1 : FROM alpine:3.19\\n\"}\r\n{\"stream\":\"Successfully built 0123\\n\"}\r\n".to_owned()
            } else if line.starts_with("POST /images/create") {
                "{\"status\":\"Pulling from library/alpine\"}".to_owned()
            } else if line.starts_with("GET /images/") {
                format!("{{\"Id\":\"sha256:0123\",\"Size\":{size}}}")
            } else {
                "[]".to_owned()
            };
            log.lock().unwrap().push(line);
            // chunked, as the engine streams build output
            let reply = format!(
                "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nTransfer-Encoding: chunked\r\n\r\n{:x}\r\n{body}\r\n0\r\n\r\n",
                body.len()
            );
            stream.write_all(reply.as_bytes()).unwrap();
        }
    });
    (format!("tcp://{addr}"), seen)
}

#[test]
fn api_engine_against_fake_server() {
    let (endpoint, seen) = fake_api(7_340_032);
    let ctx = tempfile::tempdir().unwrap();
    fs::write(ctx.path().join("app.txt"), "hi").unwrap();
    let cfg = MeasurementConfig {
        engine_endpoint: endpoint,
        ..MeasurementConfig::default()
    };
    let r = build_and_measure("FROM alpine:3.19\n", ctx.path(), &cfg).unwrap();
    assert!(r.success, "{}", r.log);
    assert_eq!(r.per_run_durations_s.len(), 3);
    assert_eq!(r.image_size_mb, Some(7.340032));
    assert!(r.log.contains("Successfully built"));

    let seen = seen.lock().unwrap();
    let builds: Vec<_> = seen
        .iter()
        .filter(|l| l.starts_with("POST /build"))
        .collect();
    assert_eq!(builds.len(), 3);
    assert!(builds.iter().all(|l| l.contains("nocache=1")));
    assert_eq!(
        seen.iter()
            .filter(|l| l.starts_with("POST /images/create?fromImage=alpine&tag=3.19"))
            .count(),
        1
    );
    assert_eq!(
        seen.iter()
            .filter(|l| l.starts_with("DELETE /images/"))
            .count(),
        3
    );
}

#[cfg(unix)]
fn fake_cli(dir: &Path) -> PathBuf {
    use std::os::unix::fs::PermissionsExt;
    let path = dir.join("fake-docker");
    fs::write(
        &path,
        r##"#!/bin/sh
case "$1" in
  version) echo 27.0.1 ;;
  pull) echo "pulled $3" ;;
  build)
    df=$(cat)
    case "$df" in
      *apt-get*) echo "E: Unable to locate package nope" >&2; exit 100 ;;
    esac
    echo "#1 DONE 0.1s" ;;
  image)
    if [ "$2" = inspect ]; then echo 5242880; fi ;;
esac
"##,
    )
    .unwrap();
    fs::set_permissions(&path, fs::Permissions::from_mode(0o755)).unwrap();
    path
}

#[cfg(unix)]
#[test]
fn cli_engine_with_fake_binary() {
    let dir = tempfile::tempdir().unwrap();
    let engine = DockerCli::new(fake_cli(dir.path()));
    let rules = Ruleset::default();
    let ok = measure_with(&engine, &rules, "FROM debian\n", dir.path(), &config()).unwrap();
    assert!(ok.success);
    assert_eq!(ok.image_size_mb, Some(5.24288));
    let bad = "FROM debian\nRUN apt-get install nope\n";
    let failed = measure_with(&engine, &rules, bad, dir.path(), &config()).unwrap();
    assert_eq!(failed.failure, Some(FailureCategory::Dependency));

    let missing = DockerCli::new(dir.path().join("no-such-binary"));
    assert!(matches!(
        measure_with(&missing, &rules, "FROM debian\n", dir.path(), &config()),
        Err(BuildError::EngineUnavailable { .. })
    ));
}

#[cfg(unix)]
#[test]
fn recorded_builds_replay_identically() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("builds.jsonl");
    let rules = Ruleset::default();
    let text = "FROM debian\nCMD [\"bash\"]\n";
    let live = {
        let engine = RecordingEngine::new(DockerCli::new(fake_cli(dir.path())), &store);
        measure_with(&engine, &rules, text, dir.path(), &config()).unwrap()
    };
    let replay = ReplayEngine::load(&store).unwrap();
    assert_eq!(replay.endpoint(), format!("replay:{}", store.display()));
    let again = measure_with(&replay, &rules, text, dir.path(), &config()).unwrap();
    assert_eq!(live, again);
}

#[test]
fn behavior_examples() {
    let a = parse("FROM node:20\nCOPY . /app\nCMD [\"node\",\"a\"]\n").unwrap();
    let b = parse("FROM node:20\nCOPY . /app\nCMD [\"node\",\"b\"]\n").unwrap();
    assert!(behavior_preserved(&a, &a));
    assert!(!behavior_preserved(&a, &b));
    let split =
        parse("FROM node:20\nRUN yarn\nRUN yarn build\nCOPY . /app\nCMD [\"node\",\"a\"]\n")
            .unwrap();
    let merged =
        parse("FROM node:20\nRUN yarn && yarn build\nCOPY . /app\nCMD [\"node\",\"a\"]\n").unwrap();
    assert!(behavior_preserved(&split, &merged));
}

fn corpus_texts() -> Vec<String> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/dockerfiles");
    let mut paths: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| fs::read_to_string(p).unwrap())
        .collect()
}

proptest! {
    #[test]
    fn behavior_is_reflexive_and_symmetric(i in 0usize..53, j in 0usize..53) {
        let texts = corpus_texts();
        let a = parse(&texts[i % texts.len()]).unwrap();
        let b = parse(&texts[j % texts.len()]).unwrap();
        prop_assert!(behavior_preserved(&a, &a));
        prop_assert_eq!(behavior_preserved(&a, &b), behavior_preserved(&b, &a));
    }
}

#[test]
fn api_engine_reports_endpoint() {
    let engine = DockerApi::new("tcp://127.0.0.1:2375").unwrap();
    assert_eq!(engine.endpoint(), "tcp://127.0.0.1:2375");
    assert!(DockerApi::new("ftp://x").is_err());
}
