//! CSV ingestion, numeric encoding, class balancing, standardization and
//! stratified splitting.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use log::warn;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// Distinct-value limit for one-hot encoding; wider columns are frequency encoded.
pub const ONE_HOT_LIMIT: usize = 32;
pub const DEFAULT_CAP: usize = 7500;
pub const DEFAULT_FRACTIONS: [f64; 3] = [0.7, 0.1, 0.2];

/// Numeric feature matrix (row-major) with binary labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
    pub column_names: Vec<String>,
    pub label_name: String,
}

impl Dataset {
    pub fn new(
        features: Vec<Vec<f64>>,
        labels: Vec<u8>,
        column_names: Vec<String>,
        label_name: impl Into<String>,
    ) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(Error::LengthMismatch {
                left: features.len(),
                right: labels.len(),
            });
        }
        for row in &features {
            if row.len() != column_names.len() {
                return Err(Error::DimensionMismatch {
                    expected: column_names.len(),
                    found: row.len(),
                });
            }
            if let Some(&v) = row.iter().find(|v| !v.is_finite()) {
                return Err(Error::NonFiniteInput(v));
            }
        }
        if let Some(&l) = labels.iter().find(|&&l| l > 1) {
            return Err(Error::InvalidParameter(format!("label {l} is not 0 or 1")));
        }
        Ok(Self {
            features,
            labels,
            column_names,
            label_name: label_name.into(),
        })
    }

    /// Builds a dataset with generated column names `x0, x1, ...`.
    pub fn from_rows(features: Vec<Vec<f64>>, labels: Vec<u8>) -> Result<Self> {
        let d = features.first().map_or(0, Vec::len);
        let names = (0..d).map(|i| format!("x{i}")).collect();
        Self::new(features, labels, names, "label")
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_cols(&self) -> usize {
        self.column_names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// (positives, negatives)
    pub fn class_counts(&self) -> (usize, usize) {
        let pos = self.labels.iter().filter(|&&l| l == 1).count();
        (pos, self.labels.len() - pos)
    }

    pub fn positive_ratio(&self) -> f64 {
        self.class_counts().0 as f64 / self.n_rows().max(1) as f64
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            features: indices.iter().map(|&i| self.features[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            column_names: self.column_names.clone(),
            label_name: self.label_name.clone(),
        }
    }

    pub fn with_labels(&self, labels: Vec<u8>) -> Result<Dataset> {
        Dataset::new(
            self.features.clone(),
            labels,
            self.column_names.clone(),
            self.label_name.clone(),
        )
    }

    /// String view of the numeric data, for re-encoding or writing back out.
    pub fn to_raw(&self) -> RawDataset {
        RawDataset {
            column_names: self.column_names.clone(),
            rows: self
                .features
                .iter()
                .map(|r| r.iter().map(|v| v.to_string()).collect())
                .collect(),
            labels: self.labels.clone(),
            label_name: self.label_name.clone(),
        }
    }

    /// Writes the dataset as CSV with the label column last.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
        let mut header = self.column_names.clone();
        header.push(self.label_name.clone());
        w.write_record(&header)?;
        for (row, label) in self.features.iter().zip(&self.labels) {
            let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            rec.push(label.to_string());
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

/// Loaded CSV contents before numeric encoding. Empty cells are missing.
#[derive(Debug, Clone, PartialEq)]
pub struct RawDataset {
    pub column_names: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub labels: Vec<u8>,
    pub label_name: String,
}

fn csv_io(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::InvalidParameter(format!("{}: {other:?}", path.display())),
    }
}

fn is_missing(cell: &str) -> bool {
    let c = cell.trim();
    c.is_empty()
        || ["na", "n/a", "nan", "null"]
            .iter()
            .any(|m| c.eq_ignore_ascii_case(m))
}

fn label_matches(cell: &str, positive: &str) -> bool {
    let (c, p) = (cell.trim(), positive.trim());
    if c == p {
        return true;
    }
    matches!((c.parse::<f64>(), p.parse::<f64>()), (Ok(a), Ok(b)) if a == b)
}

/// Reads a headered, comma-separated CSV. The label column becomes 1 where it
/// equals `positive_label` and 0 elsewhere.
pub fn load_csv(path: &Path, label_column: &str, positive_label: &str) -> Result<RawDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| csv_io(path, e))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| csv_io(path, e))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let label_idx = headers
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| Error::MissingColumn(label_column.to_string()))?;
    let column_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != label_idx)
        .map(|(_, h)| h.clone())
        .collect();

    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            match e.into_kind() {
                csv::ErrorKind::UnequalLengths {
                    expected_len, len, ..
                } => Error::UnparseableRow {
                    line,
                    reason: format!("expected {expected_len} fields, found {len}"),
                },
                csv::ErrorKind::Io(io) => Error::io(path, io),
                other => Error::UnparseableRow {
                    line,
                    reason: format!("{other:?}"),
                },
            }
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let label_cell = &record[label_idx];
        if is_missing(label_cell) {
            return Err(Error::UnparseableRow {
                line,
                reason: format!("missing value in label column '{label_column}'"),
            });
        }
        labels.push(u8::from(label_matches(label_cell, positive_label)));
        rows.push(
            record
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != label_idx)
                .map(|(_, c)| c.trim().to_string())
                .collect(),
        );
    }
    Ok(RawDataset {
        column_names,
        rows,
        labels,
        label_name: label_column.to_string(),
    })
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Turns every column numeric. Numeric columns stay in place with median
/// imputation; categorical columns are replaced by one-hot indicators (up to
/// [`ONE_HOT_LIMIT`] values) or a frequency column. Columns with missing cells
/// gain a `<name>__missing` indicator. Generated columns follow the original
/// ones in alphabetical order.
pub fn encode_numeric(raw: &RawDataset) -> Result<Dataset> {
    let n = raw.rows.len();
    let mut kept: Vec<(String, Vec<f64>)> = Vec::new();
    let mut generated: BTreeMap<String, Vec<f64>> = BTreeMap::new();

    for (c, name) in raw.column_names.iter().enumerate() {
        let cells: Vec<&str> = raw.rows.iter().map(|r| r[c].as_str()).collect();
        let present: Vec<&str> = cells.iter().copied().filter(|s| !is_missing(s)).collect();
        if present.is_empty() {
            return Err(Error::AllMissingColumn(name.clone()));
        }
        let has_missing = present.len() < n;
        let parsed: Option<Vec<f64>> = present
            .iter()
            .map(|s| s.trim().parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect();

        match parsed {
            Some(mut values) => {
                let fill = median(&mut values);
                let col = cells
                    .iter()
                    .map(|s| if is_missing(s) { fill } else { s.trim().parse().unwrap() })
                    .collect();
                kept.push((name.clone(), col));
            }
            None => {
                let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
                for s in &present {
                    *counts.entry(s.trim()).or_default() += 1;
                }
                if counts.len() <= ONE_HOT_LIMIT {
                    for value in counts.keys() {
                        let col = cells
                            .iter()
                            .map(|s| f64::from(u8::from(!is_missing(s) && s.trim() == *value)))
                            .collect();
                        generated.insert(format!("{name}={value}"), col);
                    }
                } else {
                    let total = present.len() as f64;
                    let col = cells
                        .iter()
                        .map(|s| {
                            if is_missing(s) {
                                0.0
                            } else {
                                counts[s.trim()] as f64 / total
                            }
                        })
                        .collect();
                    generated.insert(format!("{name}__freq"), col);
                }
            }
        }
        if has_missing {
            let col = cells.iter().map(|s| f64::from(u8::from(is_missing(s)))).collect();
            generated.insert(format!("{name}__missing"), col);
        }
    }

    let columns: Vec<(String, Vec<f64>)> = kept.into_iter().chain(generated).collect();
    let column_names = columns.iter().map(|(n, _)| n.clone()).collect();
    let features = (0..n)
        .map(|r| columns.iter().map(|(_, col)| col[r]).collect())
        .collect();
    Dataset::new(features, raw.labels.clone(), column_names, raw.label_name.clone())
}

/// Convenience: [`load_csv`] followed by [`encode_numeric`].
pub fn load_numeric(path: &Path, label_column: &str, positive_label: &str) -> Result<Dataset> {
    encode_numeric(&load_csv(path, label_column, positive_label)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BalanceRule {
    Cap(usize),
    MatchMinority,
}

impl fmt::Display for BalanceRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BalanceRule::Cap(n) => write!(f, "cap-{n}"),
            BalanceRule::MatchMinority => f.write_str("match-minority"),
        }
    }
}

impl Serialize for BalanceRule {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BalanceRule {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        if s == "match-minority" {
            return Ok(BalanceRule::MatchMinority);
        }
        s.strip_prefix("cap-")
            .and_then(|n| n.parse().ok())
            .map(BalanceRule::Cap)
            .ok_or_else(|| serde::de::Error::custom(format!("unknown balance rule '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub fraud: usize,
    pub nonfraud: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BalanceReport {
    pub original_counts: ClassCounts,
    pub kept_counts: ClassCounts,
    pub rule_applied: BalanceRule,
}

/// Equal-class undersampling. With at least `cap` fraud rows, `cap` rows of
/// each class are kept; otherwise every fraud row is kept together with an
/// equal-sized random sample of non-fraud rows. Kept rows retain file order.
pub fn balance(data: &Dataset, cap: usize, seed: u64) -> Result<(Dataset, BalanceReport)> {
    let mut pos: Vec<usize> = (0..data.n_rows()).filter(|&i| data.labels[i] == 1).collect();
    let mut neg: Vec<usize> = (0..data.n_rows()).filter(|&i| data.labels[i] == 0).collect();
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::SingleClass);
    }
    if cap == 0 {
        return Err(Error::InvalidParameter("balance cap must be >= 1".into()));
    }
    let original_counts = ClassCounts {
        fraud: pos.len(),
        nonfraud: neg.len(),
    };
    let mut rng = seed::rng(seed);
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);

    let rule = if pos.len() >= cap {
        BalanceRule::Cap(cap)
    } else {
        BalanceRule::MatchMinority
    };
    let keep = pos.len().min(neg.len()).min(cap);
    let mut indices: Vec<usize> = pos[..keep].iter().chain(&neg[..keep]).copied().collect();
    indices.sort_unstable();

    let report = BalanceReport {
        original_counts,
        kept_counts: ClassCounts {
            fraud: keep,
            nonfraud: keep,
        },
        rule_applied: rule,
    };
    Ok((data.subset(&indices), report))
}

/// Per-column standardization fitted on one split and applied to any other.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub input_columns: Vec<String>,
    pub kept: Vec<usize>,
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    pub dropped: Vec<String>,
}

impl Standardizer {
    pub fn fit(data: &Dataset) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let n = data.n_rows() as f64;
        let mut kept = Vec::new();
        let mut means = Vec::new();
        let mut stds = Vec::new();
        let mut dropped = Vec::new();
        for c in 0..data.n_cols() {
            let mean = data.features.iter().map(|r| r[c]).sum::<f64>() / n;
            let var = data.features.iter().map(|r| (r[c] - mean).powi(2)).sum::<f64>() / n;
            let std = var.sqrt();
            if std <= 1e-12 * (1.0 + mean.abs()) {
                warn!("dropping zero-variance column '{}'", data.column_names[c]);
                dropped.push(data.column_names[c].clone());
            } else {
                kept.push(c);
                means.push(mean);
                stds.push(std);
            }
        }
        Ok(Self {
            input_columns: data.column_names.clone(),
            kept,
            means,
            stds,
            dropped,
        })
    }

    pub fn apply(&self, data: &Dataset) -> Result<Dataset> {
        if data.n_cols() != self.input_columns.len() {
            return Err(Error::DimensionMismatch {
                expected: self.input_columns.len(),
                found: data.n_cols(),
            });
        }
        let features = data
            .features
            .iter()
            .map(|row| {
                self.kept
                    .iter()
                    .zip(self.means.iter().zip(&self.stds))
                    .map(|(&c, (m, s))| (row[c] - m) / s)
                    .collect()
            })
            .collect();
        Ok(Dataset {
            features,
            labels: data.labels.clone(),
            column_names: self.kept.iter().map(|&c| data.column_names[c].clone()).collect(),
            label_name: data.label_name.clone(),
        })
    }

    pub fn output_dim(&self) -> usize {
        self.kept.len()
    }
}

pub fn standardize_fit(data: &Dataset) -> Result<Standardizer> {
    Standardizer::fit(data)
}

pub fn standardize_apply(scaler: &Standardizer, data: &Dataset) -> Result<Dataset> {
    scaler.apply(data)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitDataset {
    pub train: Dataset,
    pub valid: Dataset,
    pub test: Dataset,
    pub split_seed: u64,
    pub fractions: [f64; 3],
}

impl SplitDataset {
    /// Fits a standardizer on the training split and applies it to all three.
    pub fn standardized(&self) -> Result<(SplitDataset, Standardizer)> {
        let scaler = Standardizer::fit(&self.train)?;
        Ok((
            SplitDataset {
                train: scaler.apply(&self.train)?,
                valid: scaler.apply(&self.valid)?,
                test: scaler.apply(&self.test)?,
                split_seed: self.split_seed,
                fractions: self.fractions,
            },
            scaler,
        ))
    }

    pub fn n_features(&self) -> usize {
        self.train.n_cols()
    }
}

/// Largest-remainder apportionment of `n` items by `fractions`; ties go to the
/// earlier part.
pub fn largest_remainder(n: usize, fractions: &[f64]) -> Vec<usize> {
    let quotas: Vec<f64> = fractions.iter().map(|f| f * n as f64).collect();
    let mut sizes: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = sizes.iter().sum();
    let mut order: Vec<usize> = (0..fractions.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().take(n.saturating_sub(assigned)) {
        sizes[i] += 1;
    }
    sizes
}

fn validate_fractions(fractions: &[f64]) -> Result<()> {
    if fractions.iter().any(|&f| !(f > 0.0 && f.is_finite()))
        || (fractions.iter().sum::<f64>() - 1.0).abs() > 1e-9
    {
        return Err(Error::InvalidParameter(format!(
            "split fractions must be positive and sum to 1, got {fractions:?}"
        )));
    }
    Ok(())
}

/// Seeded stratified partition of row indices. Part sizes follow the
/// largest-remainder rule on the total count, and positives are apportioned
/// the same way within those sizes. Indices within a part are ascending.
pub fn stratified_partition(
    labels: &[u8],
    fractions: &[f64],
    names: &[&str],
    seed: u64,
) -> Result<Vec<Vec<usize>>> {
    validate_fractions(fractions)?;
    let mut pos: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == 1).collect();
    let mut neg: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == 0).collect();
    let mut rng = seed::rng(seed);
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);

    let sizes = largest_remainder(labels.len(), fractions);
    let mut pos_sizes = largest_remainder(pos.len(), fractions);
    while let Some(over) = (0..sizes.len()).find(|&i| pos_sizes[i] > sizes[i]) {
        let target = (0..sizes.len())
            .filter(|&j| pos_sizes[j] < sizes[j])
            .max_by(|&a, &b| {
                let da = fractions[a] * pos.len() as f64 - pos_sizes[a] as f64;
                let db = fractions[b] * pos.len() as f64 - pos_sizes[b] as f64;
                da.total_cmp(&db).then(b.cmp(&a))
            })
            .expect("total positives never exceed total size");
        pos_sizes[over] -= 1;
        pos_sizes[target] += 1;
    }

    let mut parts = Vec::with_capacity(sizes.len());
    let (mut p, mut q) = (0, 0);
    for (i, (&size, &npos)) in sizes.iter().zip(&pos_sizes).enumerate() {
        let nneg = size - npos;
        let name = names.get(i).copied().unwrap_or("part");
        if npos == 0 {
            return Err(Error::ClassTooSmall {
                split: name.to_string(),
                class: 1,
            });
        }
        if nneg == 0 {
            return Err(Error::ClassTooSmall {
                split: name.to_string(),
                class: 0,
            });
        }
        let mut part: Vec<usize> = pos[p..p + npos].iter().chain(&neg[q..q + nneg]).copied().collect();
        part.sort_unstable();
        parts.push(part);
        p += npos;
        q += nneg;
    }
    Ok(parts)
}

pub fn split(data: &Dataset, fractions: [f64; 3], seed: u64) -> Result<SplitDataset> {
    let parts = stratified_partition(&data.labels, &fractions, &["train", "valid", "test"], seed)?;
    Ok(SplitDataset {
        train: data.subset(&parts[0]),
        valid: data.subset(&parts[1]),
        test: data.subset(&parts[2]),
        split_seed: seed,
        fractions,
    })
}

pub const PIPELINE_CONFIG_VERSION: u32 = 1;

/// Key/value pipeline settings, read from a TOML document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub version: u32,
    pub label_column: String,
    pub positive_label: String,
    pub cap: usize,
    pub fractions: [f64; 3],
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            version: PIPELINE_CONFIG_VERSION,
            label_column: "Class".into(),
            positive_label: "1".into(),
            cap: DEFAULT_CAP,
            fractions: DEFAULT_FRACTIONS,
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: PipelineConfig =
            toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        if cfg.version != PIPELINE_CONFIG_VERSION {
            return Err(Error::InvalidConfig(format!(
                "unsupported pipeline config version {}",
                cfg.version
            )));
        }
        validate_fractions(&cfg.fractions).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("pipeline config serializes")
    }
}

/// Output of the full ingestion pipeline.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub balance: BalanceReport,
    pub split: SplitDataset,
    pub scaler: Standardizer,
}

/// encode → balance → split → standardize (fitted on train).
pub fn prepare(raw: &Dataset, cap: usize, fractions: [f64; 3], balance_seed: u64, split_seed: u64) -> Result<Prepared> {
    let (balanced, report) = balance(raw, cap, balance_seed)?;
    let parts = split(&balanced, fractions, split_seed)?;
    let (split, scaler) = parts.standardized()?;
    Ok(Prepared {
        balance: report,
        split,
        scaler,
    })
}
