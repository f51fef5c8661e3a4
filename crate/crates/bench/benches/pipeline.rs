use std::hint::black_box;
use std::path::Path;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use dockref_core::demo_store::{tokenize, Corpus, Demonstration, QualityAnnotation};
use dockref_core::prompting::DEFAULT_CONTEXT_WINDOW;
use dockref_core::retrieval::score_corpus;
use dockref_core::{assemble, parse, select_demonstrations, PromptTemplate, Taxonomy};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const WORDS: &[&str] = &[
    "apt-get",
    "install",
    "-y",
    "curl",
    "npm",
    "ci",
    "pip",
    "--no-cache-dir",
    "make",
    "build",
    "/app",
    "yarn",
    "go",
    "cargo",
    "rm",
    "-rf",
    "git",
    "python3",
    "openjdk",
    "maven",
];

fn reference() -> String {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/fixtures/dockerfiles/53-large-reference.Dockerfile");
    std::fs::read_to_string(path).unwrap()
}

fn dockerfile(rng: &mut ChaCha8Rng) -> String {
    let mut text = format!(
        "FROM {}\nWORKDIR /app\n",
        ["node:20", "python:3.12", "debian:12"][rng.random_range(0..3)]
    );
    for _ in 0..rng.random_range(3..15) {
        let words: Vec<&str> = (0..rng.random_range(2..8))
            .map(|_| WORDS[rng.random_range(0..WORDS.len())])
            .collect();
        text.push_str(&format!("RUN {}\n", words.join(" ")));
    }
    text.push_str("COPY . .\nCMD [\"./start\"]\n");
    text
}

fn corpus(size: usize) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(size as u64);
    let demos = (0..size)
        .map(|i| {
            let v_before = dockerfile(&mut rng);
            Demonstration {
                id: format!("d{i:04}"),
                project: format!("p{}", i % 40),
                commit: "0".repeat(40),
                v_after: v_before.replace("RUN ", "RUN set -e; "),
                v_before,
                actions: Vec::new(),
                annotation: QualityAnnotation {
                    understandability: rng.random_range(-1..=1),
                    maintainability: rng.random_range(-1..=1),
                    image_size_before_mb: rng.random_range(50.0..1500.0),
                    image_size_after_mb: rng.random_range(50.0..1500.0),
                    build_duration_before_s: rng.random_range(5.0..300.0),
                    build_duration_after_s: rng.random_range(5.0..300.0),
                },
            }
        })
        .collect();
    Corpus::new(demos).unwrap()
}

fn parsing(c: &mut Criterion) {
    let text = reference();
    c.bench_function("parse large Dockerfile", |b| {
        b.iter(|| parse(black_box(&text)).unwrap())
    });
}

fn retrieval(c: &mut Criterion) {
    let query_text = reference();
    let query = parse(&query_text).unwrap();
    let tokens = tokenize(&query_text);
    let mut group = c.benchmark_group("retrieval");
    for size in [100, 600] {
        let corpus = corpus(size);
        group.bench_with_input(
            BenchmarkId::new("score_corpus", size),
            &corpus,
            |b, corpus| b.iter(|| score_corpus(corpus, black_box(&tokens)).unwrap()),
        );
        group.bench_with_input(
            BenchmarkId::new("select top 50", size),
            &corpus,
            |b, corpus| b.iter(|| select_demonstrations(corpus, black_box(&query), 50).unwrap()),
        );
    }
    group.finish();
}

fn prompting(c: &mut Criterion) {
    let corpus = corpus(600);
    let query = parse(&reference()).unwrap();
    let template = PromptTemplate::with_taxonomy(&Taxonomy::default());
    let selected = select_demonstrations(&corpus, &query, 50).unwrap();
    c.bench_function("assemble 50-shot prompt", |b| {
        b.iter(|| {
            assemble(
                &template,
                black_box(&selected),
                &query,
                DEFAULT_CONTEXT_WINDOW,
            )
            .unwrap()
        })
    });
}

criterion_group!(benches, parsing, retrieval, prompting);
criterion_main!(benches);
