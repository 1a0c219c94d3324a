use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{cohens_d, paired_t_with, EffectSizeMode, PairedSample, StatsError};
use crate::lingua::MetricRow;

/// Significance marker: `*` p<0.05, `**` p<0.01, `***` p<0.001.
pub fn significance_stars(p: f64) -> &'static str {
    if p < 0.001 {
        "***"
    } else if p < 0.01 {
        "**"
    } else if p < 0.05 {
        "*"
    } else {
        ""
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowFlag {
    /// The paired differences have zero variance.
    Degenerate,
    /// Fewer than two complete pairs.
    Insufficient,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub metric: String,
    pub n: usize,
    pub mean_a: f64,
    pub mean_b: f64,
    pub diff_percent: Option<f64>,
    pub d: Option<f64>,
    pub t: Option<f64>,
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_adjusted: Option<f64>,
    pub stars: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flag: Option<RowFlag>,
}

impl ReportRow {
    /// Paired comparison of one metric. `ids`, `a` and `b` are aligned.
    pub(crate) fn compute(metric: &str, ids: Vec<String>, a: Vec<f64>, b: Vec<f64>, mode: EffectSizeMode) -> Self {
        let n = a.len();
        let mean = |xs: &[f64]| if xs.is_empty() { f64::NAN } else { xs.iter().sum::<f64>() / xs.len() as f64 };
        let (mean_a, mean_b) = (mean(&a), mean(&b));
        let diff_percent = (mean_b != 0.0 && n > 0).then(|| (mean_a - mean_b) / mean_b * 100.0);
        let mut row = ReportRow {
            metric: metric.to_string(),
            n,
            mean_a,
            mean_b,
            diff_percent,
            d: None,
            t: None,
            p: None,
            p_adjusted: None,
            stars: String::new(),
            flag: None,
        };
        let sample = match PairedSample::new(ids, a, b) {
            Ok(s) => s,
            Err(_) => {
                row.flag = Some(RowFlag::Insufficient);
                return row;
            }
        };
        match paired_t_with(&sample, mode) {
            Ok(r) => {
                row.d = Some(r.effect_size_d);
                row.t = Some(r.statistic);
                row.p = Some(r.p_value);
                row.stars = significance_stars(r.p_value).to_string();
            }
            Err(_) => {
                row.flag = Some(RowFlag::Degenerate);
                row.d = cohens_d(&sample, mode).ok();
            }
        }
        row
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub label_a: String,
    pub label_b: String,
    pub rows: Vec<ReportRow>,
}

impl ComparisonReport {
    pub fn row(&self, metric: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.metric == metric)
    }

    /// Aligned plain-text table.
    pub fn to_table(&self) -> String {
        fn num(x: Option<f64>, prec: usize) -> String {
            match x {
                Some(v) if v.is_finite() => format!("{v:.prec$}"),
                _ => "-".to_string(),
            }
        }
        let header = [
            "Metric".to_string(),
            format!("mean ({})", self.label_a),
            format!("mean ({})", self.label_b),
            "Diff %".into(),
            "d".into(),
            "t".into(),
            "p".into(),
            "sig".into(),
        ];
        let mut cells: Vec<[String; 8]> = vec![header];
        for r in &self.rows {
            let p = r.p_adjusted.or(r.p);
            let sig = match r.flag {
                Some(RowFlag::Degenerate) => "degenerate".to_string(),
                Some(RowFlag::Insufficient) => "insufficient".to_string(),
                None => r.stars.clone(),
            };
            cells.push([
                r.metric.clone(),
                num(Some(r.mean_a), 3),
                num(Some(r.mean_b), 3),
                num(r.diff_percent, 2),
                num(r.d, 2),
                num(r.t, 2),
                num(p, 4),
                sig,
            ]);
        }
        let widths: Vec<usize> = (0..8).map(|c| cells.iter().map(|row| row[c].len()).max().unwrap_or(0)).collect();
        let mut out = String::new();
        for row in &cells {
            let mut line = format!("{:<w$}", row[0], w = widths[0]);
            for c in 1..8 {
                let _ = write!(line, "  {:>w$}", row[c], w = widths[c]);
            }
            out.push_str(line.trim_end());
            out.push('\n');
        }
        out
    }
}

/// Pairs every message id with itself.
pub fn identity_pairing<'a, I: IntoIterator<Item = &'a str>>(ids: I) -> BTreeMap<String, String> {
    ids.into_iter().map(|id| (id.to_string(), id.to_string())).collect()
}

const LEADING_CATEGORIES: [&str; 9] = [
    "pos_affect",
    "anger",
    "sad",
    "first_singular",
    "first_plural",
    "second_person",
    "third_singular",
    "third_plural",
    "impersonal_pronoun",
];

type Extractor = Box<dyn Fn(&MetricRow) -> Option<f64>>;

/// Compares two message corpora metric by metric.
///
/// `pairing` maps a message id of `rows_a` to the matching id in `rows_b`.
/// Rows keep a fixed order: structure metrics, style metrics, then category
/// rates. Pairs where either side lacks a value (adaptability, external
/// scores) are left out of that metric's test.
pub fn compare_corpora(
    rows_a: &[MetricRow],
    rows_b: &[MetricRow],
    pairing: &BTreeMap<String, String>,
    mode: EffectSizeMode,
) -> Result<ComparisonReport, StatsError> {
    let index_a: HashMap<&str, &MetricRow> = rows_a.iter().map(|r| (r.message_id.as_str(), r)).collect();
    let index_b: HashMap<&str, &MetricRow> = rows_b.iter().map(|r| (r.message_id.as_str(), r)).collect();
    let mut missing = Vec::new();
    let mut pairs = Vec::with_capacity(pairing.len());
    for (ida, idb) in pairing {
        match (index_a.get(ida.as_str()), index_b.get(idb.as_str())) {
            (Some(a), Some(b)) => pairs.push((ida.clone(), *a, *b)),
            (a, b) => {
                if a.is_none() {
                    missing.push(ida.clone());
                }
                if b.is_none() {
                    missing.push(idb.clone());
                }
            }
        }
    }
    if !missing.is_empty() {
        return Err(StatsError::Pairing(missing));
    }

    let mut metrics: Vec<(String, Extractor)> = vec![
        ("verbosity".into(), Box::new(|r: &MetricRow| Some(r.verbosity as f64))),
        ("repeatability".into(), Box::new(|r: &MetricRow| Some(r.repeatability))),
        ("readability".into(), Box::new(|r: &MetricRow| Some(r.cli))),
        ("cdi".into(), Box::new(|r: &MetricRow| Some(r.cdi))),
    ];
    let any = |f: fn(&MetricRow) -> Option<f64>| rows_a.iter().chain(rows_b).any(|r| f(r).is_some());
    if any(|r| r.external_empathy) {
        metrics.push(("empathy".into(), Box::new(|r: &MetricRow| r.external_empathy)));
    }
    if any(|r| r.external_reactivity) {
        metrics.push(("emotional_reactivity".into(), Box::new(|r: &MetricRow| r.external_reactivity)));
    }
    metrics.push(("adaptability".into(), Box::new(|r: &MetricRow| r.adaptability)));

    let categories: BTreeSet<&str> =
        rows_a.iter().chain(rows_b).flat_map(|r| r.category_rates.keys().map(String::as_str)).collect();
    let ordered = LEADING_CATEGORIES
        .iter()
        .copied()
        .filter(|c| categories.contains(c))
        .chain(categories.iter().copied().filter(|c| !LEADING_CATEGORIES.contains(c)));
    for cat in ordered {
        let key = cat.to_string();
        metrics.push((cat.to_string(), Box::new(move |r: &MetricRow| r.category_rates.get(&key).copied())));
    }

    let rows = metrics
        .iter()
        .map(|(name, get)| {
            let mut ids = Vec::new();
            let mut a = Vec::new();
            let mut b = Vec::new();
            for (id, ra, rb) in &pairs {
                if let (Some(x), Some(y)) = (get(ra), get(rb)) {
                    ids.push(id.clone());
                    a.push(x);
                    b.push(y);
                }
            }
            ReportRow::compute(name, ids, a, b, mode)
        })
        .collect();

    let label = |rows: &[MetricRow]| {
        let sources: BTreeSet<_> = rows.iter().map(|r| r.source).collect();
        match sources.iter().next() {
            Some(s) if sources.len() == 1 => {
                serde_json::to_value(s).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default()
            }
            _ => "mixed".to_string(),
        }
    };
    Ok(ComparisonReport { label_a: label(rows_a), label_b: label(rows_b), rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stars() {
        assert_eq!(significance_stars(0.0005), "***");
        assert_eq!(significance_stars(0.001), "**");
        assert_eq!(significance_stars(0.03), "*");
        assert_eq!(significance_stars(0.05), "");
    }

    #[test]
    fn insufficient_and_degenerate_flags() {
        let r = ReportRow::compute("x", vec!["a".into()], vec![1.0], vec![2.0], EffectSizeMode::Pooled);
        assert_eq!(r.flag, Some(RowFlag::Insufficient));
        let r = ReportRow::compute(
            "x",
            vec!["a".into(), "b".into()],
            vec![1.0, 3.0],
            vec![1.0, 3.0],
            EffectSizeMode::Pooled,
        );
        assert_eq!(r.flag, Some(RowFlag::Degenerate));
        assert_eq!(r.diff_percent, Some(0.0));
        assert_eq!(r.d, Some(0.0));
        assert!(r.to_owned().t.is_none());
    }

    #[test]
    fn zero_baseline_has_no_percent() {
        let r = ReportRow::compute(
            "x",
            vec!["a".into(), "b".into()],
            vec![1.0, 2.0],
            vec![0.0, 0.0],
            EffectSizeMode::Pooled,
        );
        assert_eq!(r.diff_percent, None);
    }
}
