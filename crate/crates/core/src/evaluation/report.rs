use std::fmt::Write;

use super::lifecycle::LifecycleProfile;
use super::{AggregateReport, MetricSummary};

/// `100 * k / n` rounded half away from zero, in exact integer arithmetic.
pub fn percent_rounded(k: usize, n: usize) -> u64 {
    assert!(n > 0, "percentage of an empty set");
    let (k, n) = (k as u64, n as u64);
    (200 * k + n) / (2 * n)
}

/// `"82% (105/128)"`; `"-"` when there is nothing to count.
pub fn format_rate(k: usize, n: usize) -> String {
    if n == 0 {
        "-".into()
    } else {
        format!("{}% ({k}/{n})", percent_rounded(k, n))
    }
}

fn reduction(
    m: &MetricSummary,
    unit: &str,
    total_unit: &str,
    total_scale: f64,
) -> (String, String) {
    match (
        m.average_reduction_abs,
        m.average_reduction_pct,
        m.total_reduction,
    ) {
        (Some(abs), Some(pct), Some(total)) => (
            format!("{pct:.1}% ({abs:.1} {unit})"),
            format!("{:.1} {total_unit}", total / total_scale),
        ),
        _ => ("-".into(), "-".into()),
    }
}

/// Markdown table with one block of metric rows per setting.
pub fn markdown_table(rows: &[(String, AggregateReport)]) -> String {
    let mut out = String::from(
        "| Setting | Build Success | Metric | Improvement Rate (%) | Deterioration Rate (%) | Average Reduction | Total Reduction |\n\
         |---|---|---|---|---|---|---|\n",
    );
    for (setting, r) in rows {
        let success = format_rate(r.built, r.total_pairs);
        let metrics: [(&str, &MetricSummary, (String, String)); 4] = [
            (
                "Image size",
                &r.image_size,
                reduction(&r.image_size, "MB", "GB", 1024.0),
            ),
            (
                "Build duration",
                &r.build_duration,
                reduction(&r.build_duration, "s", "min", 60.0),
            ),
            (
                "Understandability",
                &r.understandability,
                ("-".into(), "-".into()),
            ),
            (
                "Maintainability",
                &r.maintainability,
                ("-".into(), "-".into()),
            ),
        ];
        for (i, (name, m, (avg, total))) in metrics.iter().enumerate() {
            let (setting, success) = if i == 0 {
                (setting.as_str(), success.as_str())
            } else {
                ("", "")
            };
            writeln!(
                out,
                "| {setting} | {success} | {name} | {} | {} | {avg} | {total} |",
                format_rate(m.improved, m.pairs),
                format_rate(m.worsened, m.pairs),
            )
            .unwrap();
        }
    }
    out
}

/// Long-format CSV: `decile,metric,value` with deciles numbered from 1.
pub fn profile_csv(profile: &LifecycleProfile) -> String {
    let series: [(&str, &[f64; 10]); 4] = [
        ("size_increase_pct", &profile.mean_size_increase_pct),
        ("duration_increase_pct", &profile.mean_duration_increase_pct),
        (
            "refactoring_proportion",
            &profile.refactoring_commit_proportion,
        ),
        (
            "cumulative_first_refactoring_pct",
            &profile.cumulative_first_refactoring_pct,
        ),
    ];
    let mut out = String::from("decile,metric,value\n");
    for d in 0..10 {
        for (name, values) in &series {
            writeln!(out, "{},{name},{}", d + 1, values[d]).unwrap();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding() {
        assert_eq!(format_rate(105, 128), "82% (105/128)");
        assert_eq!(format_rate(16, 128), "13% (16/128)");
        assert_eq!(percent_rounded(1, 8), 13); // 12.5
        assert_eq!(percent_rounded(1, 200), 1); // 0.5
        assert_eq!(percent_rounded(0, 3), 0);
        assert_eq!(percent_rounded(3, 3), 100);
        assert_eq!(format_rate(0, 0), "-");
    }
}
