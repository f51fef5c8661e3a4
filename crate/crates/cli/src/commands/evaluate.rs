use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use crate::config::RunConfig;
use crate::{read_text, to_json, write_artifact, Exit};
use dockref_core::evaluation::{aggregate, markdown_table, AggregateReport, EvaluationPair};

#[derive(Deserialize)]
struct ReportFile {
    pair: Option<EvaluationPair>,
}

fn walk(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("cannot list {}", dir.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()?;
    entries.sort();
    for p in entries {
        if p.is_dir() {
            walk(&p, out)?;
        } else {
            out.push(p);
        }
    }
    Ok(())
}

/// `report.json` files from `refactor`, plus `*.jsonl` files of pairs (for
/// pairs carrying quality annotations).
fn collect_pairs(dir: &Path) -> Result<Vec<EvaluationPair>> {
    let mut files = Vec::new();
    walk(dir, &mut files)?;
    let mut pairs = Vec::new();
    for f in files {
        let name = f.file_name().unwrap_or_default().to_string_lossy();
        if name == "report.json" {
            let r: ReportFile = serde_json::from_str(&read_text(&f)?)
                .with_context(|| format!("invalid report {}", f.display()))?;
            // originals that did not build carry no pair
            pairs.extend(r.pair);
        } else if name.ends_with(".jsonl") {
            for (i, line) in read_text(&f)?.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                pairs.push(
                    serde_json::from_str(line)
                        .with_context(|| format!("{}:{}: invalid pair", f.display(), i + 1))?,
                );
            }
        }
    }
    Ok(pairs)
}

pub fn run(cfg: &RunConfig, records_dir: &Path) -> Result<Exit> {
    let pairs = collect_pairs(records_dir)?;
    if pairs.is_empty() {
        bail!("no evaluation records under {}", records_dir.display());
    }
    let mut by_setting: BTreeMap<String, Vec<EvaluationPair>> = BTreeMap::new();
    for p in pairs {
        by_setting.entry(p.setting.clone()).or_default().push(p);
    }
    let mut rows: Vec<(String, AggregateReport)> = Vec::new();
    for (setting, pairs) in by_setting {
        let report = aggregate(&pairs)?;
        rows.push((setting, report));
    }
    let table = markdown_table(&rows);
    if let Some(dir) = &cfg.output_dir {
        let dir = cfg.output_dir().map(|_| dir.as_path())?;
        let json: BTreeMap<&str, &AggregateReport> =
            rows.iter().map(|(s, r)| (s.as_str(), r)).collect();
        write_artifact(dir, "evaluation.json", &to_json(&json))?;
        write_artifact(dir, "evaluation.md", &table)?;
    }
    print!("{table}");
    Ok(Exit::Ok)
}
