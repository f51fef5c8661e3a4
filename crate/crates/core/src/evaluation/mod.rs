//! Aggregate quality metrics over before/after build pairs, rank correlation,
//! and per-project lifecycle profiles.

mod lifecycle;
mod report;

use serde::{Deserialize, Serialize};

use crate::build::BuildResult;

pub use lifecycle::{
    carry_forward, combine_profiles, lifecycle_profile, segment_lifecycle, CommitMeasurement,
    LifecycleError, LifecycleProfile,
};
pub use report::{format_rate, markdown_table, percent_rounded, profile_csv};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    Original,
    Developer,
    Automated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRecord {
    pub id: String,
    pub variant: Variant,
    pub build: BuildResult,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub understandability_delta: Option<i8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub maintainability_delta: Option<i8>,
    pub behavior_ok: bool,
}

/// An original Dockerfile and one refactored variant of it. Quality deltas
/// are read from `after`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationPair {
    /// Experimental setting the pair belongs to, e.g. `"50-shot"`.
    pub setting: String,
    pub before: EvaluationRecord,
    pub after: EvaluationRecord,
}

impl EvaluationPair {
    /// Both builds succeeded and the refactoring kept behavior.
    pub fn is_successful(&self) -> bool {
        self.before.build.success && self.after.build.success && self.after.behavior_ok
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvaluationError {
    #[error("no records to aggregate")]
    EmptyInput,
    #[error("series lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("at least two observations are needed, got {0}")]
    InsufficientData(usize),
    #[error("a series is constant; rank correlation is undefined")]
    ZeroVariance,
    #[error("series contains a non-finite value")]
    NonFinite,
    #[error("quality delta {0} is outside -1..=1")]
    InvalidDelta(i8),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    /// Pairs the metric was evaluated on.
    pub pairs: usize,
    pub improved: usize,
    pub worsened: usize,
    pub unchanged: usize,
    pub improvement_rate: f64,
    pub deterioration_rate: f64,
    /// Mean of `before - after`; absent for ordinal metrics or when `pairs` is 0.
    pub average_reduction_abs: Option<f64>,
    /// Mean of `(before - after) / before * 100`.
    pub average_reduction_pct: Option<f64>,
    pub total_reduction: Option<f64>,
}

impl MetricSummary {
    fn from_counts(improved: usize, worsened: usize, pairs: usize) -> Self {
        let rate = |k: usize| {
            if pairs == 0 {
                0.0
            } else {
                k as f64 / pairs as f64
            }
        };
        MetricSummary {
            pairs,
            improved,
            worsened,
            unchanged: pairs - improved - worsened,
            improvement_rate: rate(improved),
            deterioration_rate: rate(worsened),
            average_reduction_abs: None,
            average_reduction_pct: None,
            total_reduction: None,
        }
    }

    /// Lower is better. Equal values count as unchanged.
    fn continuous(values: &[(f64, f64)]) -> Self {
        let improved = values.iter().filter(|(b, a)| a < b).count();
        let worsened = values.iter().filter(|(b, a)| a > b).count();
        let mut s = Self::from_counts(improved, worsened, values.len());
        if !values.is_empty() {
            let n = values.len() as f64;
            let total: f64 = values.iter().map(|(b, a)| b - a).sum();
            let pct: f64 = values.iter().map(|(b, a)| (b - a) / b * 100.0).sum();
            s.average_reduction_abs = Some(total / n);
            s.average_reduction_pct = Some(pct / n);
            s.total_reduction = Some(total);
        }
        s
    }

    /// Positive delta is an improvement.
    fn ordinal(deltas: &[i8]) -> Self {
        let improved = deltas.iter().filter(|d| **d > 0).count();
        let worsened = deltas.iter().filter(|d| **d < 0).count();
        Self::from_counts(improved, worsened, deltas.len())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub total_pairs: usize,
    /// Refactored variants that built.
    pub built: usize,
    pub build_success_rate: f64,
    /// Built variants whose functional fingerprint differs from the original.
    pub behavior_changed: usize,
    pub successful_pairs: usize,
    pub image_size: MetricSummary,
    pub build_duration: MetricSummary,
    /// Over successful pairs that carry an annotation.
    pub understandability: MetricSummary,
    pub maintainability: MetricSummary,
}

pub fn aggregate(pairs: &[EvaluationPair]) -> Result<AggregateReport, EvaluationError> {
    if pairs.is_empty() {
        return Err(EvaluationError::EmptyInput);
    }
    let built = pairs.iter().filter(|p| p.after.build.success).count();
    let behavior_changed = pairs
        .iter()
        .filter(|p| p.after.build.success && !p.after.behavior_ok)
        .count();
    let ok: Vec<&EvaluationPair> = pairs.iter().filter(|p| p.is_successful()).collect();

    let measured = |f: fn(&BuildResult) -> Option<f64>| -> Vec<(f64, f64)> {
        ok.iter()
            .filter_map(|p| Some((f(&p.before.build)?, f(&p.after.build)?)))
            .collect()
    };
    let deltas = |f: fn(&EvaluationRecord) -> Option<i8>| -> Result<Vec<i8>, EvaluationError> {
        ok.iter()
            .filter_map(|p| f(&p.after))
            .map(|d| {
                if (-1..=1).contains(&d) {
                    Ok(d)
                } else {
                    Err(EvaluationError::InvalidDelta(d))
                }
            })
            .collect()
    };

    Ok(AggregateReport {
        total_pairs: pairs.len(),
        built,
        build_success_rate: built as f64 / pairs.len() as f64,
        behavior_changed,
        successful_pairs: ok.len(),
        image_size: MetricSummary::continuous(&measured(|b| b.image_size_mb)),
        build_duration: MetricSummary::continuous(&measured(|b| b.build_duration_s)),
        understandability: MetricSummary::ordinal(&deltas(|r| r.understandability_delta)?),
        maintainability: MetricSummary::ordinal(&deltas(|r| r.maintainability_delta)?),
    })
}

/// Average ranks, 1-based; ties share the mean of the positions they span.
fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut out = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            out[k] = rank;
        }
        i = j + 1;
    }
    out
}

/// Spearman's rank correlation: Pearson correlation of the average ranks.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64, EvaluationError> {
    if xs.len() != ys.len() {
        return Err(EvaluationError::LengthMismatch(xs.len(), ys.len()));
    }
    if xs.len() < 2 {
        return Err(EvaluationError::InsufficientData(xs.len()));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(EvaluationError::NonFinite);
    }
    let (rx, ry) = (ranks(xs), ranks(ys));
    let n = xs.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(EvaluationError::ZeroVariance);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}
