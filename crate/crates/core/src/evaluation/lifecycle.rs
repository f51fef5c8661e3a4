use std::ops::Range;

use serde::{Deserialize, Serialize};

pub const DECILES: usize = 10;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LifecycleError {
    #[error("{0} commits; at least 10 are needed")]
    TooFewCommits(usize),
    #[error("no commit in the series has a measurement")]
    AllMissing,
    #[error("first measurement is {0}; increases are relative to it and it must be positive")]
    NonPositiveBaseline(f64),
    #[error("no profiles to combine")]
    NoProfiles,
}

/// Ten contiguous index ranges covering `0..commit_count`. Sizes differ by at
/// most one and the remainder goes to the earliest ranges.
pub fn segment_lifecycle(commit_count: usize) -> Result<Vec<Range<usize>>, LifecycleError> {
    if commit_count < DECILES {
        return Err(LifecycleError::TooFewCommits(commit_count));
    }
    let base = commit_count / DECILES;
    let extra = commit_count % DECILES;
    let mut start = 0;
    Ok((0..DECILES)
        .map(|i| {
            let len = base + usize::from(i < extra);
            let r = start..start + len;
            start += len;
            r
        })
        .collect())
}

/// Fills each gap with the next present value, and a trailing gap with the
/// last present value.
pub fn carry_forward(series: &[Option<f64>]) -> Result<Vec<f64>, LifecycleError> {
    let last = series
        .iter()
        .rev()
        .find_map(|v| *v)
        .ok_or(LifecycleError::AllMissing)?;
    let mut out = vec![0.0; series.len()];
    let mut next = last;
    for (slot, v) in out.iter_mut().zip(series).rev() {
        if let Some(v) = v {
            next = *v;
        }
        *slot = next;
    }
    Ok(out)
}

/// One commit that touched the Dockerfile, measured at its own checkout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommitMeasurement {
    pub commit: String,
    /// `None` when the build failed.
    pub image_size_mb: Option<f64>,
    pub build_duration_s: Option<f64>,
    pub refactoring_detected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LifecycleProfile {
    /// Number of projects averaged into this profile.
    pub projects: usize,
    pub mean_size_increase_pct: [f64; DECILES],
    pub mean_duration_increase_pct: [f64; DECILES],
    pub refactoring_commit_proportion: [f64; DECILES],
    /// Percentage of projects whose first refactoring commit falls in this
    /// decile or an earlier one.
    pub cumulative_first_refactoring_pct: [f64; DECILES],
}

fn increases(series: &[Option<f64>]) -> Result<Vec<f64>, LifecycleError> {
    let filled = carry_forward(series)?;
    let base = filled[0];
    if !(base > 0.0) {
        return Err(LifecycleError::NonPositiveBaseline(base));
    }
    Ok(filled.iter().map(|v| (v - base) / base * 100.0).collect())
}

/// Profile of a single Dockerfile history, oldest commit first.
pub fn lifecycle_profile(
    history: &[CommitMeasurement],
) -> Result<LifecycleProfile, LifecycleError> {
    let ranges = segment_lifecycle(history.len())?;
    let sizes: Vec<_> = history.iter().map(|c| c.image_size_mb).collect();
    let durations: Vec<_> = history.iter().map(|c| c.build_duration_s).collect();
    let size_inc = increases(&sizes)?;
    let dur_inc = increases(&durations)?;

    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
    let first_refactoring = history.iter().position(|c| c.refactoring_detected);

    let mut p = LifecycleProfile {
        projects: 1,
        mean_size_increase_pct: [0.0; DECILES],
        mean_duration_increase_pct: [0.0; DECILES],
        refactoring_commit_proportion: [0.0; DECILES],
        cumulative_first_refactoring_pct: [0.0; DECILES],
    };
    for (d, r) in ranges.into_iter().enumerate() {
        p.mean_size_increase_pct[d] = mean(&size_inc[r.clone()]);
        p.mean_duration_increase_pct[d] = mean(&dur_inc[r.clone()]);
        let refactorings = history[r.clone()]
            .iter()
            .filter(|c| c.refactoring_detected)
            .count();
        p.refactoring_commit_proportion[d] = refactorings as f64 / r.len() as f64;
        if first_refactoring.is_some_and(|i| i < r.end) {
            p.cumulative_first_refactoring_pct[d] = 100.0;
        }
    }
    Ok(p)
}

/// Unweighted mean over Dockerfiles, so every series is averaged per project.
pub fn combine_profiles(profiles: &[LifecycleProfile]) -> Result<LifecycleProfile, LifecycleError> {
    let total: usize = profiles.iter().map(|p| p.projects).sum();
    if total == 0 {
        return Err(LifecycleError::NoProfiles);
    }
    let avg = |f: fn(&LifecycleProfile) -> &[f64; DECILES]| {
        let mut out = [0.0; DECILES];
        for p in profiles {
            for (o, v) in out.iter_mut().zip(f(p)) {
                *o += v * p.projects as f64;
            }
        }
        out.map(|v| v / total as f64)
    };
    Ok(LifecycleProfile {
        projects: total,
        mean_size_increase_pct: avg(|p| &p.mean_size_increase_pct),
        mean_duration_increase_pct: avg(|p| &p.mean_duration_increase_pct),
        refactoring_commit_proportion: avg(|p| &p.refactoring_commit_proportion),
        cumulative_first_refactoring_pct: avg(|p| &p.cumulative_first_refactoring_pct),
    })
}
