pub mod detect;
pub mod evaluate;
pub mod evolve;
pub mod ingest;
pub mod refactor;
pub mod retrieve;

use std::path::Path;

use anyhow::{Context, Result};

use crate::config::RunConfig;
use crate::read_text;
use dockref_core::demo_store::{load_corpus, Corpus};
use dockref_core::{parse, DockerfileAst};

pub(crate) fn parse_file(path: &Path) -> Result<(String, DockerfileAst)> {
    let text = read_text(path)?;
    let ast = parse(&text).with_context(|| format!("{} does not parse", path.display()))?;
    Ok((text, ast))
}

pub(crate) fn corpus(cfg: &RunConfig) -> Result<Corpus> {
    let path = cfg
        .corpus_path
        .as_deref()
        .context("a demonstration corpus is needed (--corpus FILE)")?;
    let loaded =
        load_corpus(path).with_context(|| format!("cannot load corpus {}", path.display()))?;
    for d in &loaded.rejected {
        eprintln!("warning: {}: skipped record at {d}", path.display());
    }
    Ok(loaded.corpus)
}
