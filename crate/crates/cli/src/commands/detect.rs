use std::path::Path;

use anyhow::Result;

use super::parse_file;
use crate::config::RunConfig;
use crate::{to_json, Exit};

pub fn run(cfg: &RunConfig, before: &Path, after: &Path) -> Result<Exit> {
    let (_, a) = parse_file(before)?;
    let (_, b) = parse_file(after)?;
    let actions = cfg.detector()?.detect(&a, &b);
    print!("{}", to_json(&actions));
    Ok(Exit::Ok)
}
