use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Demonstration;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<String>,
    pub test: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SplitError {
    #[error("test fraction must lie strictly between 0 and 1, got {0}")]
    Fraction(f64),
}

/// Most frequent action type across a project's demonstrations; ties go to
/// the lexicographically smallest name.
fn project_stratum(demos: &[&Demonstration]) -> String {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for d in demos {
        let primary = d
            .actions
            .first()
            .map_or("None".to_owned(), |a| a.kind.name().to_owned());
        *counts.entry(primary).or_default() += 1;
    }
    let best = counts.values().copied().max().unwrap_or(0);
    counts
        .into_iter()
        .find(|(_, c)| *c == best)
        .map(|(k, _)| k)
        .unwrap_or_default()
}

/// Project-disjoint train/test split, stratified by each project's dominant
/// refactoring type. Whole projects are assigned to the test side in seeded
/// random order until each stratum's test share reaches `test_fraction`.
pub fn stratified_split(
    demos: &[Demonstration],
    test_fraction: f64,
    seed: u64,
) -> Result<Split, SplitError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(SplitError::Fraction(test_fraction));
    }
    let mut projects: BTreeMap<&str, Vec<&Demonstration>> = BTreeMap::new();
    for d in demos {
        projects.entry(d.project.as_str()).or_default().push(d);
    }
    let mut strata: BTreeMap<String, Vec<&str>> = BTreeMap::new();
    for (project, members) in &projects {
        strata
            .entry(project_stratum(members))
            .or_default()
            .push(project);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut split = Split {
        train: Vec::new(),
        test: Vec::new(),
    };
    for members in strata.values_mut() {
        members.shuffle(&mut rng);
        let total: usize = members.iter().map(|p| projects[p].len()).sum();
        let target = (total as f64 * test_fraction).round() as usize;
        let mut in_test = 0;
        for project in members.iter() {
            let size = projects[project].len();
            let ids = projects[project].iter().map(|d| d.id.clone());
            // take a project only if it brings the count closer to the target
            if in_test < target && (in_test + size).abs_diff(target) < target - in_test {
                in_test += size;
                split.test.extend(ids);
            } else {
                split.train.extend(ids);
            }
        }
    }
    split.train.sort();
    split.test.sort();
    Ok(split)
}
