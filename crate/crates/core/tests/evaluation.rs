use dockref_core::build::{BuildResult, FailureCategory};
use dockref_core::evaluation::{
    aggregate, carry_forward, combine_profiles, format_rate, lifecycle_profile, markdown_table,
    profile_csv, segment_lifecycle, spearman, CommitMeasurement, EvaluationError, EvaluationPair,
    EvaluationRecord, LifecycleError, Variant,
};
use proptest::prelude::*;

fn built(size_mb: f64, duration_s: f64) -> BuildResult {
    BuildResult {
        success: true,
        image_size_mb: Some(size_mb),
        build_duration_s: Some(duration_s),
        per_run_durations_s: vec![duration_s; 3],
        log: String::new(),
        failure: None,
    }
}

fn record(id: &str, variant: Variant, build: BuildResult) -> EvaluationRecord {
    EvaluationRecord {
        id: id.into(),
        variant,
        build,
        understandability_delta: None,
        maintainability_delta: None,
        behavior_ok: true,
    }
}

fn pair(i: usize, before: (f64, f64), after: BuildResult) -> EvaluationPair {
    let id = format!("df{i}");
    EvaluationPair {
        setting: "50-shot".into(),
        before: record(&id, Variant::Original, built(before.0, before.1)),
        after: record(&id, Variant::Automated, after),
    }
}

/// 128 built pairs: 105 smaller, 16 larger, 7 equal.
fn table_fixture() -> Vec<EvaluationPair> {
    (0..128)
        .map(|i| {
            let after = match i {
                0..105 => 80.0,
                105..121 => 130.0,
                _ => 100.0,
            };
            pair(i, (100.0, 60.0), built(after, 60.0))
        })
        .collect()
}

#[test]
fn table_rates_reproduce_printed_fractions() {
    let r = aggregate(&table_fixture()).unwrap();
    assert_eq!(r.successful_pairs, 128);
    let size = &r.image_size;
    assert_eq!((size.improved, size.worsened, size.unchanged), (105, 16, 7));
    assert_eq!(format_rate(size.improved, size.pairs), "82% (105/128)");
    assert_eq!(format_rate(size.worsened, size.pairs), "13% (16/128)");
    assert!((size.improvement_rate - 105.0 / 128.0).abs() < 1e-12);
    let table = markdown_table(&[("50-shot".into(), r)]);
    assert!(table.contains("| 82% (105/128) | 13% (16/128) |"));
}

#[test]
fn reductions_over_successful_pairs() {
    let failed = BuildResult::failed(
        vec![],
        "E: Unable to locate package x".into(),
        FailureCategory::Dependency,
    );
    let mut changed = pair(3, (100.0, 10.0), built(1.0, 1.0));
    changed.after.behavior_ok = false;
    let pairs = vec![
        pair(0, (200.0, 10.0), built(100.0, 12.0)),
        pair(1, (100.0, 20.0), built(75.0, 20.0)),
        pair(2, (100.0, 10.0), failed),
        changed,
    ];
    let r = aggregate(&pairs).unwrap();
    assert_eq!(r.total_pairs, 4);
    assert_eq!(r.built, 3);
    assert_eq!(r.behavior_changed, 1);
    assert_eq!(r.successful_pairs, 2);
    assert_eq!(r.build_success_rate, 0.75);
    assert_eq!(r.image_size.average_reduction_abs, Some(62.5));
    assert_eq!(r.image_size.average_reduction_pct, Some(37.5));
    assert_eq!(r.image_size.total_reduction, Some(125.0));
    assert_eq!(r.build_duration.average_reduction_pct, Some(-10.0));
    assert_eq!(
        (
            r.build_duration.improved,
            r.build_duration.worsened,
            r.build_duration.unchanged
        ),
        (0, 1, 1)
    );
    assert_eq!(r.understandability.pairs, 0);
}

#[test]
fn quality_deltas() {
    let mut pairs = table_fixture();
    for (i, p) in pairs.iter_mut().enumerate() {
        p.after.understandability_delta = Some([1, 0, -1, 1][i % 4]);
        p.after.maintainability_delta = Some(1);
    }
    let r = aggregate(&pairs).unwrap();
    assert_eq!(r.understandability.improved, 64);
    assert_eq!(r.understandability.worsened, 32);
    assert_eq!(r.maintainability.improved, 128);
    pairs[0].after.maintainability_delta = Some(2);
    assert_eq!(aggregate(&pairs), Err(EvaluationError::InvalidDelta(2)));
}

#[test]
fn empty_input() {
    assert_eq!(aggregate(&[]), Err(EvaluationError::EmptyInput));
}

/// Ranks by counting, then Pearson from the textbook formula.
fn oracle_spearman(xs: &[f64], ys: &[f64]) -> f64 {
    let rank = |v: &[f64]| -> Vec<f64> {
        v.iter()
            .map(|x| {
                let less = v.iter().filter(|y| *y < x).count() as f64;
                let equal = v.iter().filter(|y| *y == x).count() as f64;
                less + (equal + 1.0) / 2.0
            })
            .collect()
    };
    let (a, b) = (rank(xs), rank(ys));
    let n = a.len() as f64;
    let sa: f64 = a.iter().sum();
    let sb: f64 = b.iter().sum();
    let sab: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
    let saa: f64 = a.iter().map(|x| x * x).sum();
    let sbb: f64 = b.iter().map(|x| x * x).sum();
    (n * sab - sa * sb) / ((n * saa - sa * sa).sqrt() * (n * sbb - sb * sb).sqrt())
}

#[test]
fn spearman_with_ties_matches_oracle() {
    let sizes = [
        412.0, 95.0, 95.0, 1200.0, 300.0, 300.0, 300.0, 57.0, 880.0, 95.0,
    ];
    let durations = [91.0, 30.0, 44.0, 210.0, 73.0, 73.0, 120.0, 12.0, 94.0, 30.0];
    let rho = spearman(&sizes, &durations).unwrap();
    assert!((rho - oracle_spearman(&sizes, &durations)).abs() < 1e-9);
    assert!(rho > 0.8 && rho < 1.0);
}

#[test]
fn spearman_monotone_cases() {
    let xs: Vec<f64> = (0..20).map(|i| i as f64).collect();
    let rev: Vec<f64> = xs.iter().rev().cloned().collect();
    assert_eq!(spearman(&xs, &xs), Ok(1.0));
    assert_eq!(spearman(&xs, &rev), Ok(-1.0));
}

#[test]
fn decile_examples() {
    assert!(segment_lifecycle(10).unwrap().iter().all(|r| r.len() == 1));
    assert_eq!(segment_lifecycle(9), Err(LifecycleError::TooFewCommits(9)));
    let sizes: Vec<usize> = segment_lifecycle(25)
        .unwrap()
        .iter()
        .map(|r| r.len())
        .collect();
    assert_eq!(sizes, vec![3, 3, 3, 3, 3, 2, 2, 2, 2, 2]);
}

#[test]
fn carry_forward_examples() {
    assert_eq!(
        carry_forward(&[Some(100.0), None, None, Some(130.0)]).unwrap(),
        vec![100.0, 130.0, 130.0, 130.0]
    );
    assert_eq!(
        carry_forward(&[Some(100.0), Some(120.0), None]).unwrap(),
        vec![100.0, 120.0, 120.0]
    );
    assert_eq!(
        carry_forward(&[None, None]),
        Err(LifecycleError::AllMissing)
    );
    assert_eq!(carry_forward(&[None, Some(5.0)]).unwrap(), vec![5.0, 5.0]);
}

fn history(sizes: &[Option<f64>], refactored: &[usize]) -> Vec<CommitMeasurement> {
    sizes
        .iter()
        .enumerate()
        .map(|(i, s)| CommitMeasurement {
            commit: format!("{i:040x}"),
            image_size_mb: *s,
            build_duration_s: s.map(|v| v / 2.0),
            refactoring_detected: refactored.contains(&i),
        })
        .collect()
}

#[test]
fn lifecycle_examples() {
    let flat = lifecycle_profile(&history(&[Some(50.0); 30], &[])).unwrap();
    assert_eq!(flat.mean_size_increase_pct, [0.0; 10]);
    assert_eq!(flat.refactoring_commit_proportion, [0.0; 10]);
    assert_eq!(flat.cumulative_first_refactoring_pct, [0.0; 10]);

    let mut doubling = vec![Some(100.0); 10];
    doubling.extend([Some(200.0); 10]);
    doubling[13] = None;
    let p = lifecycle_profile(&history(&doubling, &[4, 5, 17])).unwrap();
    assert_eq!(
        p.mean_size_increase_pct,
        [0.0, 0.0, 0.0, 0.0, 0.0, 100.0, 100.0, 100.0, 100.0, 100.0]
    );
    assert_eq!(p.mean_duration_increase_pct, p.mean_size_increase_pct);
    assert_eq!(
        p.refactoring_commit_proportion,
        [0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.5, 0.0]
    );
    assert_eq!(
        p.cumulative_first_refactoring_pct,
        [0.0, 0.0, 100.0, 100.0, 100.0, 100.0, 100.0, 100.0, 100.0, 100.0]
    );

    // a gap straddling a decile boundary takes the next successful value
    let mut gap = vec![Some(100.0); 10];
    gap[1] = None;
    gap[2] = Some(150.0);
    let p = lifecycle_profile(&history(&gap, &[])).unwrap();
    assert_eq!(p.mean_size_increase_pct[1], 50.0);

    let both = combine_profiles(&[
        flat.clone(),
        lifecycle_profile(&history(&doubling, &[4])).unwrap(),
    ])
    .unwrap();
    assert_eq!(both.projects, 2);
    assert_eq!(both.mean_size_increase_pct[9], 50.0);
    assert_eq!(both.cumulative_first_refactoring_pct[1], 0.0);
    assert_eq!(both.cumulative_first_refactoring_pct[2], 50.0);

    let csv = profile_csv(&p);
    assert!(csv.starts_with("decile,metric,value\n1,size_increase_pct,0\n"));
    assert_eq!(csv.lines().count(), 41);

    assert_eq!(
        lifecycle_profile(&history(&[Some(1.0); 9], &[])),
        Err(LifecycleError::TooFewCommits(9))
    );
    assert_eq!(
        lifecycle_profile(&history(&[None; 12], &[])),
        Err(LifecycleError::AllMissing)
    );
}

proptest! {
    #[test]
    fn deciles_partition(n in 10usize..=500) {
        let ranges = segment_lifecycle(n).unwrap();
        prop_assert_eq!(ranges.len(), 10);
        let mut seen = vec![0u8; n];
        for r in &ranges {
            for i in r.clone() { seen[i] += 1; }
        }
        prop_assert!(seen.iter().all(|c| *c == 1));
        let lens: Vec<usize> = ranges.iter().map(|r| r.len()).collect();
        prop_assert!(lens.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(lens[0] - lens[9] <= 1);
        prop_assert_eq!(ranges[0].start, 0);
        prop_assert!(ranges.windows(2).all(|w| w[0].end == w[1].start));
    }

    #[test]
    fn carry_forward_fills_in_place(series in prop::collection::vec(prop::option::of(1.0f64..1e4), 1..60)) {
        match carry_forward(&series) {
            Ok(out) => {
                prop_assert_eq!(out.len(), series.len());
                for (i, (o, s)) in out.iter().zip(&series).enumerate() {
                    match s {
                        Some(v) => prop_assert_eq!(o, v),
                        None => {
                            let expected = series[i..].iter().find_map(|v| *v)
                                .or_else(|| series[..i].iter().rev().find_map(|v| *v)).unwrap();
                            prop_assert_eq!(*o, expected);
                        }
                    }
                }
            }
            Err(e) => {
                prop_assert_eq!(e, LifecycleError::AllMissing);
                prop_assert!(series.iter().all(Option::is_none));
            }
        }
    }

    #[test]
    fn spearman_invariant_under_monotone_maps(
        pts in prop::collection::vec((0u8..20, 0u8..20), 3..40)
    ) {
        let xs: Vec<f64> = pts.iter().map(|p| p.0 as f64).collect();
        let ys: Vec<f64> = pts.iter().map(|p| p.1 as f64).collect();
        match spearman(&xs, &ys) {
            Ok(rho) => {
                prop_assert!((-1.0..=1.0).contains(&rho));
                prop_assert!((rho - oracle_spearman(&xs, &ys)).abs() < 1e-9);
                let tx: Vec<f64> = xs.iter().map(|x| (x * 0.3).exp() + 7.0).collect();
                let ty: Vec<f64> = ys.iter().map(|y| y.powi(3) - 2.0).collect();
                prop_assert!((spearman(&tx, &ty).unwrap() - rho).abs() < 1e-9);
                let neg: Vec<f64> = ys.iter().map(|y| -y).collect();
                prop_assert!((spearman(&xs, &neg).unwrap() + rho).abs() < 1e-9);
                prop_assert!((spearman(&xs, &xs).unwrap() - 1.0).abs() < 1e-12);
            }
            Err(e) => prop_assert_eq!(e, EvaluationError::ZeroVariance),
        }
    }

    #[test]
    fn aggregate_counts_partition(
        rows in prop::collection::vec((1.0f64..500.0, 1.0f64..500.0, any::<bool>(), any::<bool>()), 1..80)
    ) {
        let pairs: Vec<EvaluationPair> = rows.iter().enumerate().map(|(i, (b, a, ok, same))| {
            let after = if *ok { built(if *same { *b } else { *a }, *a) } else {
                BuildResult::failed(vec![], String::new(), FailureCategory::Other)
            };
            pair(i, (*b, *b), after)
        }).collect();
        let r = aggregate(&pairs).unwrap();
        for m in [&r.image_size, &r.build_duration, &r.understandability, &r.maintainability] {
            prop_assert_eq!(m.improved + m.worsened + m.unchanged, m.pairs);
            prop_assert!((0.0..=1.0).contains(&m.improvement_rate));
            prop_assert!((0.0..=1.0).contains(&m.deterioration_rate));
        }
        prop_assert_eq!(r.image_size.pairs, r.successful_pairs);
    }
}
