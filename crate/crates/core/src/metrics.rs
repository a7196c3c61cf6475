//! Binary classification metrics, report rendering, and a logistic-regression
//! baseline.
//!
//! Rates whose denominator is zero (no predicted positives, a single label
//! class) are `None` and render as `undefined (0/0)`.

use std::fmt::Write as _;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, SplitDataset};
use crate::error::{Error, Result};
use crate::seed;

pub const LOGLOSS_CLIP: f64 = 1e-15;
pub const UNDEFINED: &str = "undefined (0/0)";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub accuracy: f64,
    pub auc_roc: Option<f64>,
    pub tpr: Option<f64>,
    pub fpr: Option<f64>,
    pub tnr: Option<f64>,
    pub logloss: f64,
    pub counts: ConfusionCounts,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

impl MetricsReport {
    /// Count-derived fields; AUC and logloss need scores and are left unset.
    pub fn from_counts(counts: ConfusionCounts) -> Self {
        let ConfusionCounts { tp, fp, tn, fn_ } = counts;
        let recall = ratio(tp, tp + fn_);
        Self {
            precision: ratio(tp, tp + fp),
            recall,
            f1: ratio(2 * tp, 2 * tp + fp + fn_),
            accuracy: ratio(tp + tn, counts.total()).unwrap_or(0.0),
            auc_roc: None,
            tpr: recall,
            fpr: ratio(fp, fp + tn),
            tnr: ratio(tn, fp + tn),
            logloss: 0.0,
            counts,
        }
    }

    /// F1 with undefined treated as 0, for ranking.
    pub fn f1_or_zero(&self) -> f64 {
        self.f1.unwrap_or(0.0)
    }

    pub fn precision_or_zero(&self) -> f64 {
        self.precision.unwrap_or(0.0)
    }
}

fn check_inputs(probs: &[f64], labels: &[u8]) -> Result<()> {
    if probs.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: probs.len(),
            right: labels.len(),
        });
    }
    if probs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if let Some(&p) = probs.iter().find(|p| !p.is_finite()) {
        return Err(Error::NonFiniteInput(p));
    }
    Ok(())
}

pub fn confusion(probs: &[f64], labels: &[u8], threshold: f64) -> ConfusionCounts {
    let mut c = ConfusionCounts::default();
    for (&p, &y) in probs.iter().zip(labels) {
        match (p >= threshold, y == 1) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    c
}

/// Rank-statistic AUC: the fraction of (positive, negative) pairs where the
/// positive scores higher, with ties credited 1/2.
pub fn auc_roc(scores: &[f64], labels: &[u8]) -> Option<f64> {
    let n_pos = labels.iter().filter(|&&l| l == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // 1-based average rank of the tie block i..=j
        let avg = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += avg * order[i..=j].iter().filter(|&&k| labels[k] == 1).count() as f64;
        i = j + 1;
    }
    let np = n_pos as f64;
    Some((rank_sum - np * (np + 1.0) / 2.0) / (np * n_neg as f64))
}

pub fn logloss(probs: &[f64], labels: &[u8]) -> f64 {
    let total: f64 = probs
        .iter()
        .zip(labels)
        .map(|(&p, &y)| {
            let p = p.clamp(LOGLOSS_CLIP, 1.0 - LOGLOSS_CLIP);
            if y == 1 {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum();
    total / probs.len() as f64
}

/// Thresholded (`p >= threshold` is positive) metrics plus AUC and logloss.
pub fn compute_metrics(probs: &[f64], labels: &[u8], threshold: f64) -> Result<MetricsReport> {
    check_inputs(probs, labels)?;
    let mut report = MetricsReport::from_counts(confusion(probs, labels, threshold));
    report.auc_roc = auc_roc(probs, labels);
    report.logloss = logloss(probs, labels);
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Text,
    Json,
    Csv,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "text" | "txt" => Ok(ReportFormat::Text),
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(Error::InvalidParameter(format!("unknown report format '{other}'"))),
        }
    }
}

/// Network shape and spline settings shown above the metrics.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfigSummary {
    pub width: Vec<usize>,
    pub k: usize,
    pub grid: usize,
}

pub fn format_width(width: &[usize]) -> String {
    let parts: Vec<String> = width.iter().map(usize::to_string).collect();
    format!("{{{}}}", parts.join(", "))
}

fn parse_width(s: &str) -> Option<Vec<usize>> {
    s.trim()
        .strip_prefix('{')?
        .strip_suffix('}')?
        .split(',')
        .map(|p| p.trim().parse().ok())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<ConfigSummary>,
    pub metrics: MetricsReport,
}

const ROW_PRECISION: &str = "Precision";
const ROW_RECALL: &str = "Recall";
const ROW_F1: &str = "F1 Score";
const ROW_ACCURACY: &str = "Accuracy";
const ROW_AUC: &str = "AUC-ROC";
const ROW_TPR: &str = "True Positive Rate (Sensitivity)";
const ROW_FPR: &str = "False Positive Rate";
const ROW_TNR: &str = "True Negative Rate";
const ROW_LOGLOSS: &str = "Logarithmic Loss";

/// Metric rows in report order.
pub const METRIC_ROWS: [&str; 9] = [
    ROW_PRECISION,
    ROW_RECALL,
    ROW_F1,
    ROW_ACCURACY,
    ROW_AUC,
    ROW_TPR,
    ROW_FPR,
    ROW_TNR,
    ROW_LOGLOSS,
];

/// Column header for one-row-per-report CSV, shared with trial logs.
pub const CSV_HEADER: [&str; 16] = [
    "Width",
    "K",
    "Grid",
    "Precision",
    "Recall",
    "F1 Score",
    "Accuracy",
    "AUC-ROC",
    "TPR",
    "FPR",
    "TNR",
    "Logarithmic Loss",
    "TP",
    "FP",
    "TN",
    "FN",
];

fn metric_values(m: &MetricsReport) -> [Option<f64>; 9] {
    [
        m.precision,
        m.recall,
        m.f1,
        Some(m.accuracy),
        m.auc_roc,
        m.tpr,
        m.fpr,
        m.tnr,
        Some(m.logloss),
    ]
}

fn text_value(v: Option<f64>) -> String {
    v.map_or_else(|| UNDEFINED.to_string(), |x| x.to_string())
}

/// CSV fields (everything after Width, K, Grid) for one report.
pub fn csv_metric_fields(m: &MetricsReport) -> Vec<String> {
    metric_values(m)
        .iter()
        .map(|v| v.map_or_else(|| "undefined".to_string(), |x| x.to_string()))
        .chain([m.counts.tp, m.counts.fp, m.counts.tn, m.counts.fn_].map(|c| c.to_string()))
        .collect()
}

pub fn render_report(report: &MetricsReport, config: Option<&ConfigSummary>, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => {
            let doc = ReportDocument {
                config: config.cloned(),
                metrics: report.clone(),
            };
            let mut s = serde_json::to_string_pretty(&doc).expect("report serializes");
            s.push('\n');
            s
        }
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(CSV_HEADER).expect("in-memory write");
            let mut row = match config {
                Some(c) => vec![format_width(&c.width), c.k.to_string(), c.grid.to_string()],
                None => vec![String::new(); 3],
            };
            row.extend(csv_metric_fields(report));
            w.write_record(&row).expect("in-memory write");
            String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
        }
        ReportFormat::Text => {
            let mut rows: Vec<(&str, String)> = Vec::new();
            if let Some(c) = config {
                rows.push(("Width", format_width(&c.width)));
                rows.push(("K", c.k.to_string()));
                rows.push(("Grid", c.grid.to_string()));
            }
            for (name, v) in METRIC_ROWS.iter().zip(metric_values(report)) {
                rows.push((name, text_value(v)));
            }
            let c = report.counts;
            for (name, v) in [
                ("True Positives", c.tp),
                ("False Positives", c.fp),
                ("True Negatives", c.tn),
                ("False Negatives", c.fn_),
            ] {
                rows.push((name, v.to_string()));
            }
            let width = rows.iter().map(|(n, _)| n.len()).max().unwrap_or(0).max(6);
            let mut out = String::new();
            writeln!(out, "{:<width$}  Value", "Metric").unwrap();
            for (name, value) in rows {
                writeln!(out, "{name:<width$}  {value}").unwrap();
            }
            out
        }
    }
}

/// Parses a rendered text or JSON report back into its parts.
pub fn parse_report(text: &str, format: ReportFormat) -> Result<ReportDocument> {
    match format {
        ReportFormat::Json => Ok(serde_json::from_str(text)?),
        ReportFormat::Csv => Err(Error::InvalidParameter("CSV reports are write-only".into())),
        ReportFormat::Text => parse_text(text),
    }
}

fn parse_text(text: &str) -> Result<ReportDocument> {
    let bad = |msg: String| Error::InvalidParameter(format!("malformed text report: {msg}"));
    let mut fields: std::collections::HashMap<&str, &str> = Default::default();
    let known = [
        "Width",
        "K",
        "Grid",
        "True Positives",
        "False Positives",
        "True Negatives",
        "False Negatives",
    ];
    for line in text.lines().skip(1) {
        let name = METRIC_ROWS
            .iter()
            .chain(known.iter())
            .filter(|n| line.starts_with(*n) && line[n.len()..].starts_with("  "))
            .max_by_key(|n| n.len())
            .ok_or_else(|| bad(format!("unknown row '{line}'")))?;
        fields.insert(name, line[name.len()..].trim());
    }
    let get = |name: &str| fields.get(name).copied().ok_or_else(|| bad(format!("missing row '{name}'")));
    let num = |name: &str| -> Result<Option<f64>> {
        let v = get(name)?;
        if v == UNDEFINED {
            return Ok(None);
        }
        v.parse().map(Some).map_err(|_| bad(format!("bad value '{v}' for {name}")))
    };
    let count = |name: &str| -> Result<u64> {
        let v = get(name)?;
        v.parse().map_err(|_| bad(format!("bad count '{v}' for {name}")))
    };
    let required = |name: &str| -> Result<f64> { num(name)?.ok_or_else(|| bad(format!("{name} is undefined"))) };

    let config = if fields.contains_key("Width") {
        Some(ConfigSummary {
            width: parse_width(get("Width")?).ok_or_else(|| bad("bad width".into()))?,
            k: count("K")? as usize,
            grid: count("Grid")? as usize,
        })
    } else {
        None
    };
    Ok(ReportDocument {
        config,
        metrics: MetricsReport {
            precision: num(ROW_PRECISION)?,
            recall: num(ROW_RECALL)?,
            f1: num(ROW_F1)?,
            accuracy: required(ROW_ACCURACY)?,
            auc_roc: num(ROW_AUC)?,
            tpr: num(ROW_TPR)?,
            fpr: num(ROW_FPR)?,
            tnr: num(ROW_TNR)?,
            logloss: required(ROW_LOGLOSS)?,
            counts: ConfusionCounts {
                tp: count("True Positives")?,
                fp: count("False Positives")?,
                tn: count("True Negatives")?,
                fn_: count("False Negatives")?,
            },
        },
    })
}

/// 2×2 confusion matrix as CSV (rows actual, columns predicted).
pub fn confusion_csv(c: &ConfusionCounts) -> String {
    format!(
        "actual\\predicted,0,1\n0,{},{}\n1,{},{}\n",
        c.tn, c.fp, c.fn_, c.tp
    )
}

/// L2-regularized logistic regression fitted by full-batch gradient descent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticRegression {
    pub weights: Vec<f64>,
    pub bias: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticSettings {
    pub l2: f64,
    pub learning_rate: f64,
    pub iterations: usize,
}

impl Default for LogisticSettings {
    fn default() -> Self {
        Self {
            l2: 1e-3,
            learning_rate: 0.5,
            iterations: 1000,
        }
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl LogisticRegression {
    pub fn fit(train: &Dataset, settings: LogisticSettings, seed: u64) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let d = train.n_cols();
        let n = train.n_rows() as f64;
        let mut rng = seed::rng(seed);
        let init = Normal::new(0.0, 0.01).expect("valid normal");
        let mut weights: Vec<f64> = (0..d).map(|_| init.sample(&mut rng)).collect();
        let mut bias = 0.0;
        for _ in 0..settings.iterations {
            let mut gw = vec![0.0; d];
            let mut gb = 0.0;
            for (x, &y) in train.features.iter().zip(&train.labels) {
                let z = bias + x.iter().zip(&weights).map(|(a, w)| a * w).sum::<f64>();
                let r = sigmoid(z) - f64::from(y);
                gb += r;
                for (g, a) in gw.iter_mut().zip(x) {
                    *g += r * a;
                }
            }
            for (w, g) in weights.iter_mut().zip(&gw) {
                *w -= settings.learning_rate * (g / n + settings.l2 * *w);
            }
            bias -= settings.learning_rate * gb / n;
        }
        Ok(Self { weights, bias })
    }

    pub fn predict_proba(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.weights.len() {
            return Err(Error::DimensionMismatch {
                expected: self.weights.len(),
                found: x.len(),
            });
        }
        Ok(sigmoid(
            self.bias + x.iter().zip(&self.weights).map(|(a, w)| a * w).sum::<f64>(),
        ))
    }
}

/// Fits on the training split and scores the test split at threshold 0.5.
pub fn logistic_baseline(data: &SplitDataset, seed: u64) -> Result<MetricsReport> {
    let model = LogisticRegression::fit(&data.train, LogisticSettings::default(), seed)?;
    let probs = data
        .test
        .features
        .iter()
        .map(|x| model.predict_proba(x))
        .collect::<Result<Vec<_>>>()?;
    compute_metrics(&probs, &data.test.labels, 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;

    fn pair_auc(scores: &[f64], labels: &[u8]) -> f64 {
        let mut credit = 0.0;
        let mut pairs = 0.0;
        for (i, &si) in scores.iter().enumerate() {
            for (j, &sj) in scores.iter().enumerate() {
                if labels[i] == 1 && labels[j] == 0 {
                    pairs += 1.0;
                    if si > sj {
                        credit += 1.0;
                    } else if si == sj {
                        credit += 0.5;
                    }
                }
            }
        }
        credit / pairs
    }

    fn counts_case(tp: u64, fp: u64, tn: u64, fn_: u64) -> (Vec<f64>, Vec<u8>) {
        let mut probs = Vec::new();
        let mut labels = Vec::new();
        for (n, p, y) in [(tp, 0.9, 1), (fp, 0.8, 0), (tn, 0.1, 0), (fn_, 0.2, 1)] {
            for _ in 0..n {
                probs.push(p);
                labels.push(y);
            }
        }
        (probs, labels)
    }

    #[test]
    fn hand_arithmetic() {
        let (p, y) = counts_case(9, 1, 9, 1);
        let m = compute_metrics(&p, &y, 0.5).unwrap();
        assert_eq!(m.counts, ConfusionCounts { tp: 9, fp: 1, tn: 9, fn_: 1 });
        for v in [m.precision.unwrap(), m.recall.unwrap(), m.f1.unwrap(), m.accuracy] {
            assert_relative_eq!(v, 0.9, epsilon = 1e-15);
        }
        assert_eq!(m.tpr, m.recall);
        assert_relative_eq!(m.tnr.unwrap(), 1.0 - m.fpr.unwrap(), epsilon = 1e-15);
    }

    #[test]
    fn perfect_ranking() {
        let p = [1e-20, 0.0, 1.0, 1.0 - 1e-17];
        let y = [0, 0, 1, 1];
        let m = compute_metrics(&p, &y, 0.5).unwrap();
        assert_eq!(m.auc_roc, Some(1.0));
        assert!(m.logloss < 1e-6);
    }

    #[test]
    fn auc_matches_pair_counting() {
        let mut rng = seed::rng(5);
        for _ in 0..20 {
            let p: Vec<f64> = (0..200).map(|_| (rng.random_range(0..50) as f64) / 50.0).collect();
            let y: Vec<u8> = (0..200).map(|_| rng.random_range(0..2)).collect();
            assert!((auc_roc(&p, &y).unwrap() - pair_auc(&p, &y)).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_cases() {
        let m = compute_metrics(&[0.1, 0.2], &[0, 1], 0.5).unwrap();
        assert_eq!(m.precision, None);
        assert_eq!(m.f1, Some(0.0));
        let m = compute_metrics(&[0.1, 0.2], &[0, 0], 0.5).unwrap();
        assert_eq!(m.auc_roc, None);
        assert_eq!(m.recall, None);
        let text = render_report(&m, None, ReportFormat::Text);
        assert!(text.contains(UNDEFINED));
        assert!(!text.contains("NaN"));
        assert!(matches!(compute_metrics(&[0.1], &[0, 1], 0.5), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn threshold_zero_is_all_positive() {
        let m = compute_metrics(&[0.0, 0.3, 0.9], &[1, 0, 1], 0.0).unwrap();
        assert_eq!(m.recall, Some(1.0));
        assert_eq!(m.tnr, Some(0.0));
    }

    fn reference_report() -> (MetricsReport, ConfigSummary) {
        let m = MetricsReport {
            precision: Some(0.9901),
            recall: Some(0.9091),
            f1: Some(0.9479),
            accuracy: 0.9442,
            auc_roc: Some(0.9794),
            tpr: Some(0.9091),
            fpr: Some(0.009),
            tnr: Some(0.9885),
            logloss: 0.2454,
            counts: ConfusionCounts { tp: 100, fp: 1, tn: 110, fn_: 10 },
        };
        (m, ConfigSummary { width: vec![30, 5, 1], k: 17, grid: 6 })
    }

    #[test]
    fn table_values_render() {
        let (m, c) = reference_report();
        let text = render_report(&m, Some(&c), ReportFormat::Text);
        let row = |name: &str| {
            text.lines()
                .find(|l| l.starts_with(name))
                .map(|l| l[name.len()..].trim().to_string())
                .unwrap()
        };
        assert_eq!(row("F1 Score"), "0.9479");
        assert_eq!(row("AUC-ROC"), "0.9794");
        assert_eq!(row("Logarithmic Loss"), "0.2454");
        assert_eq!(row("Width"), "{30, 5, 1}");
        for name in METRIC_ROWS {
            assert!(text.contains(name));
        }
    }

    #[test]
    fn json_text_json_roundtrip() {
        let (m, c) = reference_report();
        let json = render_report(&m, Some(&c), ReportFormat::Json);
        let doc = parse_report(&json, ReportFormat::Json).unwrap();
        let text = render_report(&doc.metrics, doc.config.as_ref(), ReportFormat::Text);
        let back = parse_report(&text, ReportFormat::Text).unwrap();
        assert_eq!(render_report(&back.metrics, back.config.as_ref(), ReportFormat::Json), json);

        let degenerate = compute_metrics(&[0.1, 0.2, 0.3], &[0, 0, 0], 0.5).unwrap();
        let text = render_report(&degenerate, None, ReportFormat::Text);
        assert_eq!(parse_report(&text, ReportFormat::Text).unwrap().metrics, degenerate);
    }

    #[test]
    fn csv_layout() {
        let (m, c) = reference_report();
        let csv = render_report(&m, Some(&c), ReportFormat::Csv);
        let mut lines = csv.lines();
        assert!(lines.next().unwrap().starts_with("Width,K,Grid,Precision,Recall,F1 Score"));
        assert!(lines.next().unwrap().starts_with("\"{30, 5, 1}\",17,6,0.9901,0.9091,0.9479"));
    }

    #[test]
    fn confusion_matrix_csv() {
        let c = ConfusionCounts { tp: 4, fp: 1, tn: 3, fn_: 2 };
        assert_eq!(confusion_csv(&c), "actual\\predicted,0,1\n0,3,1\n1,2,4\n");
    }

    fn blobs(n: usize, sep: f64, seed_: u64) -> Dataset {
        let mut rng = seed::rng(seed_);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let mut feats = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let y = (i % 2) as u8;
            let c = if y == 1 { sep } else { -sep };
            feats.push(vec![c + normal.sample(&mut rng), c + normal.sample(&mut rng)]);
            labels.push(y);
        }
        Dataset::from_rows(feats, labels).unwrap()
    }

    #[test]
    fn baseline_separable_and_deterministic() {
        let d = blobs(400, 3.0, 1);
        let s = crate::data::split(&d, crate::data::DEFAULT_FRACTIONS, 2).unwrap();
        let a = logistic_baseline(&s, 3).unwrap();
        assert!(a.f1.unwrap() >= 0.99);
        assert_eq!(a, logistic_baseline(&s, 3).unwrap());
    }

    #[test]
    fn baseline_null_data() {
        let d = blobs(5000, 0.0, 4);
        let mut rng = seed::rng(44);
        let labels = (0..d.n_rows()).map(|_| rng.random_range(0..2u8)).collect();
        let d = d.with_labels(labels).unwrap();
        let s = crate::data::split(&d, crate::data::DEFAULT_FRACTIONS, 5).unwrap();
        let m = logistic_baseline(&s, 6).unwrap();
        assert!((m.auc_roc.unwrap() - 0.5).abs() <= 0.05, "{:?}", m.auc_roc);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn counts_sum_and_rate_ranges(
                pairs in proptest::collection::vec((0.0f64..=1.0, 0u8..2), 1..100),
                threshold in 0.0f64..=1.0,
            ) {
                let (p, y): (Vec<f64>, Vec<u8>) = pairs.into_iter().unzip();
                let m = compute_metrics(&p, &y, threshold).unwrap();
                prop_assert_eq!(m.counts.total(), p.len() as u64);
                for v in [m.precision, m.recall, m.f1, Some(m.accuracy), m.auc_roc, m.fpr, m.tnr].into_iter().flatten() {
                    prop_assert!((0.0..=1.0).contains(&v));
                }
                prop_assert!(m.logloss >= 0.0);
                if let (Some(f), Some(t)) = (m.fpr, m.tnr) {
                    prop_assert!((t - (1.0 - f)).abs() < 1e-12);
                }
            }

            #[test]
            fn auc_invariant_under_monotone_transform(
                pairs in proptest::collection::vec((0.0f64..=1.0, 0u8..2), 2..80),
            ) {
                let (p, y): (Vec<f64>, Vec<u8>) = pairs.into_iter().unzip();
                let q: Vec<f64> = p.iter().map(|v| (3.0 * v).exp() - 7.0).collect();
                prop_assert_eq!(auc_roc(&p, &y), auc_roc(&q, &y));
            }

            #[test]
            fn logloss_minimized_at_base_rate(labels in proptest::collection::vec(0u8..2, 1..60)) {
                let rate = labels.iter().filter(|&&l| l == 1).count() as f64 / labels.len() as f64;
                let at_rate = logloss(&vec![rate; labels.len()], &labels);
                for i in 0..=100 {
                    let c = i as f64 / 100.0;
                    prop_assert!(at_rate <= logloss(&vec![c; labels.len()], &labels) + 1e-12);
                }
            }
        }
    }
}
