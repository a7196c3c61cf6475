//! Kolmogorov-Arnold network for binary classification.
//!
//! Every edge carries `w * silu(x) + spline(x)`; nodes sum their incoming
//! edges plus a bias. The single output node is a logit trained with binary
//! cross-entropy by full-batch Adam.

use std::path::Path;

use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::metrics::{self, sigmoid};
use crate::optim::Adam;
use crate::seed;
use crate::spline::{dot_local, KnotVector, LocalBasis, SplineFunction};

/// Domain of every edge spline; inputs are expected to be standardized.
pub const SPLINE_DOMAIN: (f64, f64) = (-1.0, 1.0);
pub const DEFAULT_EPOCHS: usize = 200;
pub const DEFAULT_LEARNING_RATE: f64 = 0.01;
pub const DEFAULT_THRESHOLD: f64 = 0.5;
const INIT_COEFF_STD: f64 = 0.1;
const BATCH_CHUNK: usize = 32;

pub const MODEL_FORMAT: &str = "kanfraud-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KanConfig {
    pub width: Vec<usize>,
    pub k: usize,
    pub grid: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub classification_threshold: f64,
}

impl KanConfig {
    pub fn new(width: Vec<usize>, k: usize, grid: usize) -> Self {
        Self {
            width,
            k,
            grid,
            epochs: DEFAULT_EPOCHS,
            learning_rate: DEFAULT_LEARNING_RATE,
            seed: 0,
            classification_threshold: DEFAULT_THRESHOLD,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::InvalidConfig(m));
        if self.width.len() < 2 {
            return fail(format!("width needs at least 2 layers, got {:?}", self.width));
        }
        if self.width.iter().any(|&n| n == 0) {
            return fail(format!("width entries must be positive, got {:?}", self.width));
        }
        if *self.width.last().unwrap() != 1 {
            return fail(format!("last width entry must be 1, got {:?}", self.width));
        }
        if self.k < 1 || self.grid < 1 {
            return fail(format!("k and grid must be >= 1, got k={} grid={}", self.k, self.grid));
        }
        if self.epochs < 1 {
            return fail("epochs must be >= 1".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail(format!("learning rate must be positive, got {}", self.learning_rate));
        }
        if !(self.classification_threshold > 0.0 && self.classification_threshold < 1.0) {
            return fail(format!(
                "classification threshold must be in (0, 1), got {}",
                self.classification_threshold
            ));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.width[0]
    }

    pub fn summary(&self) -> metrics::ConfigSummary {
        metrics::ConfigSummary {
            width: self.width.clone(),
            k: self.k,
            grid: self.grid,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct File {
            version: u32,
            #[serde(flatten)]
            config: KanConfig,
        }
        let file: File = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        if file.version != MODEL_VERSION {
            return Err(Error::InvalidConfig(format!("unsupported config version {}", file.version)));
        }
        file.config.validate()?;
        Ok(file.config)
    }

    pub fn to_toml(&self) -> String {
        #[derive(Serialize)]
        struct File<'a> {
            version: u32,
            #[serde(flatten)]
            config: &'a KanConfig,
        }
        toml::to_string(&File {
            version: MODEL_VERSION,
            config: self,
        })
        .expect("config serializes")
    }
}

/// One layer; parameter arrays are row-major over (output, input[, basis]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KanLayer {
    pub in_dim: usize,
    pub out_dim: usize,
    pub knots: KnotVector,
    pub coeffs: Vec<f64>,
    pub base_weights: Vec<f64>,
    pub biases: Vec<f64>,
}

fn silu(x: f64) -> f64 {
    x * sigmoid(x)
}

fn silu_deriv(x: f64) -> f64 {
    let s = sigmoid(x);
    s * (1.0 + x * (1.0 - s))
}

/// Per-input quantities shared by every edge leaving that input.
struct InputCache {
    silu: f64,
    silu_deriv: f64,
    basis: LocalBasis,
    basis_deriv: Option<LocalBasis>,
}

impl KanLayer {
    fn new(in_dim: usize, out_dim: usize, k: usize, grid: usize, rng: &mut impl rand::Rng) -> Result<Self> {
        let knots = KnotVector::new(SPLINE_DOMAIN.0, SPLINE_DOMAIN.1, grid, k)?;
        let nb = knots.num_basis();
        let normal = Normal::new(0.0, INIT_COEFF_STD).expect("valid normal");
        let coeffs = (0..out_dim * in_dim * nb).map(|_| normal.sample(rng)).collect();
        Ok(Self {
            in_dim,
            out_dim,
            knots,
            coeffs,
            base_weights: vec![1.0 / (in_dim as f64).sqrt(); out_dim * in_dim],
            biases: vec![0.0; out_dim],
        })
    }

    fn num_basis(&self) -> usize {
        self.knots.num_basis()
    }

    fn edge_coeffs(&self, j: usize, i: usize) -> &[f64] {
        let nb = self.num_basis();
        let start = (j * self.in_dim + i) * nb;
        &self.coeffs[start..start + nb]
    }

    pub fn edge_spline(&self, out: usize, input: usize) -> SplineFunction {
        SplineFunction::new(self.knots.clone(), self.edge_coeffs(out, input).to_vec())
            .expect("edge coefficients match the knot vector")
    }

    fn cache(&self, x: &[f64], with_deriv: bool) -> Result<Vec<InputCache>> {
        x.iter()
            .map(|&v| {
                Ok(InputCache {
                    silu: silu(v),
                    silu_deriv: silu_deriv(v),
                    basis: self.knots.local_basis(v)?,
                    basis_deriv: if with_deriv {
                        Some(self.knots.local_basis_derivs(v)?)
                    } else {
                        None
                    },
                })
            })
            .collect()
    }

    fn forward_cached(&self, cache: &[InputCache]) -> Vec<f64> {
        (0..self.out_dim)
            .map(|j| {
                let mut acc = self.biases[j];
                for (i, c) in cache.iter().enumerate() {
                    acc += self.base_weights[j * self.in_dim + i] * c.silu;
                    acc += dot_local(&c.basis, self.edge_coeffs(j, i));
                }
                acc
            })
            .collect()
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.in_dim {
            return Err(Error::DimensionMismatch {
                expected: self.in_dim,
                found: x.len(),
            });
        }
        Ok(self.forward_cached(&self.cache(x, false)?))
    }

    fn validate(&self) -> Result<()> {
        self.knots.validate()?;
        let nb = self.num_basis();
        if self.in_dim == 0
            || self.out_dim == 0
            || self.coeffs.len() != self.out_dim * self.in_dim * nb
            || self.base_weights.len() != self.out_dim * self.in_dim
            || self.biases.len() != self.out_dim
        {
            return Err(Error::ModelFormat("layer parameter shapes are inconsistent".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerGrads {
    pub coeffs: Vec<f64>,
    pub base_weights: Vec<f64>,
    pub biases: Vec<f64>,
}

/// Gradients laid out exactly like the model's parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientSet {
    pub layers: Vec<LayerGrads>,
}

impl GradientSet {
    fn zeros_like(model: &KanModel) -> Self {
        Self {
            layers: model
                .layers
                .iter()
                .map(|l| LayerGrads {
                    coeffs: vec![0.0; l.coeffs.len()],
                    base_weights: vec![0.0; l.base_weights.len()],
                    biases: vec![0.0; l.biases.len()],
                })
                .collect(),
        }
    }

    fn add(&mut self, other: &GradientSet) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (x, y) in a
                .coeffs
                .iter_mut()
                .chain(a.base_weights.iter_mut())
                .chain(a.biases.iter_mut())
                .zip(b.coeffs.iter().chain(&b.base_weights).chain(&b.biases))
            {
                *x += y;
            }
        }
    }

    /// Flattened in the same order as [`KanModel::params`].
    pub fn flatten(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.coeffs.iter().chain(&l.base_weights).chain(&l.biases).copied())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean training cross-entropy of the parameters entering this epoch.
    pub loss: f64,
    /// Validation F1 after this epoch's update.
    pub valid_f1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KanModel {
    pub config: KanConfig,
    pub layers: Vec<KanLayer>,
    pub training_log: Vec<EpochRecord>,
    #[serde(default)]
    pub best_epoch: Option<usize>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    #[serde(flatten)]
    model: KanModel,
}

/// Numerically stable binary cross-entropy of `sigmoid(z)` against `y`.
fn bce_logit(z: f64, y: f64) -> f64 {
    z.max(0.0) - z * y + (-z.abs()).exp().ln_1p()
}

impl KanModel {
    pub fn new(config: KanConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = seed::rng(config.seed);
        let layers = config
            .width
            .windows(2)
            .map(|w| KanLayer::new(w[0], w[1], config.k, config.grid, &mut rng))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            config,
            layers,
            training_log: Vec::new(),
            best_epoch: None,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.config.input_dim()
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                found: x.len(),
            });
        }
        Ok(())
    }

    /// Total spline coefficients, `sum_l n_l * n_{l+1} * (grid + k)`.
    pub fn spline_coefficient_count(&self) -> usize {
        self.layers.iter().map(|l| l.coeffs.len()).sum()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.coeffs.len() + l.base_weights.len() + l.biases.len())
            .sum()
    }

    /// Pre-sigmoid output score.
    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        self.check_input(x)?;
        let mut act = x.to_vec();
        for layer in &self.layers {
            act = layer.forward(&act)?;
        }
        Ok(act[0])
    }

    pub fn forward_batch(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        rows.par_iter().map(|x| self.forward(x)).collect()
    }

    pub fn predict_proba(&self, x: &[f64]) -> Result<f64> {
        Ok(sigmoid(self.forward(x)?))
    }

    pub fn predict(&self, x: &[f64]) -> Result<(f64, u8)> {
        let p = self.predict_proba(x)?;
        Ok((p, u8::from(p >= self.config.classification_threshold)))
    }

    pub fn predict_proba_batch(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        rows.par_iter().map(|x| self.predict_proba(x)).collect()
    }

    pub fn evaluate(&self, data: &Dataset) -> Result<metrics::MetricsReport> {
        let probs = self.predict_proba_batch(&data.features)?;
        metrics::compute_metrics(&probs, &data.labels, self.config.classification_threshold)
    }

    /// Gradient of the cross-entropy loss for one example; returns the loss too.
    fn accumulate(&self, x: &[f64], target: u8, grads: &mut GradientSet) -> Result<f64> {
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut act = x.to_vec();
        for (l, layer) in self.layers.iter().enumerate() {
            let cache = layer.cache(&act, l > 0)?;
            act = layer.forward_cached(&cache);
            caches.push(cache);
        }
        let z = act[0];
        let y = f64::from(target);
        let loss = bce_logit(z, y);

        let mut delta = vec![sigmoid(z) - y];
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let cache = &caches[l];
            let g = &mut grads.layers[l];
            let nb = layer.num_basis();
            let mut prev = vec![0.0; layer.in_dim];
            for (j, &d) in delta.iter().enumerate() {
                g.biases[j] += d;
                if d == 0.0 {
                    continue;
                }
                for (i, c) in cache.iter().enumerate() {
                    let e = j * layer.in_dim + i;
                    g.base_weights[e] += d * c.silu;
                    let start = e * nb + c.basis.first;
                    for (gc, b) in g.coeffs[start..start + c.basis.values.len()].iter_mut().zip(&c.basis.values) {
                        *gc += d * b;
                    }
                    if let Some(db) = &c.basis_deriv {
                        prev[i] += d
                            * (layer.base_weights[e] * c.silu_deriv + dot_local(db, layer.edge_coeffs(j, i)));
                    }
                }
            }
            delta = prev;
        }
        Ok(loss)
    }

    /// Gradients of `BCE(sigmoid(forward(x)), target)` for every parameter.
    pub fn backward(&self, x: &[f64], target: u8) -> Result<GradientSet> {
        self.check_input(x)?;
        if target > 1 {
            return Err(Error::InvalidParameter(format!("target {target} is not 0 or 1")));
        }
        let mut grads = GradientSet::zeros_like(self);
        self.accumulate(x, target, &mut grads)?;
        Ok(grads)
    }

    /// Mean loss and mean gradient over a dataset. Rows are processed in
    /// fixed chunks and merged in order, so the result is schedule-independent.
    pub fn batch_gradient(&self, data: &Dataset) -> Result<(f64, GradientSet)> {
        let partials: Vec<(f64, GradientSet)> = data
            .features
            .par_chunks(BATCH_CHUNK)
            .zip(data.labels.par_chunks(BATCH_CHUNK))
            .map(|(rows, labels)| {
                let mut g = GradientSet::zeros_like(self);
                let mut loss = 0.0;
                for (x, &y) in rows.iter().zip(labels) {
                    loss += self.accumulate(x, y, &mut g)?;
                }
                Ok((loss, g))
            })
            .collect::<Result<_>>()?;
        let mut total = GradientSet::zeros_like(self);
        let mut loss = 0.0;
        for (l, g) in &partials {
            loss += l;
            total.add(g);
        }
        let n = data.n_rows() as f64;
        for layer in &mut total.layers {
            for v in layer
                .coeffs
                .iter_mut()
                .chain(layer.base_weights.iter_mut())
                .chain(layer.biases.iter_mut())
            {
                *v /= n;
            }
        }
        Ok((loss / n, total))
    }

    pub fn mean_loss(&self, data: &Dataset) -> Result<f64> {
        let scores = self.forward_batch(&data.features)?;
        Ok(scores
            .iter()
            .zip(&data.labels)
            .map(|(&z, &y)| bce_logit(z, f64::from(y)))
            .sum::<f64>()
            / data.n_rows() as f64)
    }

    /// All parameters, layer by layer: coefficients, base weights, biases.
    pub fn params(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.coeffs.iter().chain(&l.base_weights).chain(&l.biases).copied())
            .collect()
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.parameter_count() {
            return Err(Error::DimensionMismatch {
                expected: self.parameter_count(),
                found: params.len(),
            });
        }
        let mut it = params.iter().copied();
        for l in &mut self.layers {
            for v in l
                .coeffs
                .iter_mut()
                .chain(l.base_weights.iter_mut())
                .chain(l.biases.iter_mut())
            {
                *v = it.next().expect("length checked");
            }
        }
        Ok(())
    }

    fn check_dataset(&self, data: &Dataset) -> Result<()> {
        if data.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if data.n_cols() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                found: data.n_cols(),
            });
        }
        Ok(())
    }

    /// Full-batch Adam for `config.epochs` epochs. Keeps the parameters from
    /// the epoch with the best validation F1 (earliest on ties).
    pub fn train(&mut self, train: &Dataset, valid: &Dataset) -> Result<()> {
        self.check_dataset(train)?;
        self.check_dataset(valid)?;
        let mut params = self.params();
        let mut adam = Adam::new(params.len(), self.config.learning_rate);
        let mut best: Option<(f64, usize, Vec<f64>)> = None;
        self.training_log.clear();
        for epoch in 1..=self.config.epochs {
            let (loss, grads) = self.batch_gradient(train)?;
            adam.step(&mut params, &grads.flatten());
            self.set_params(&params)?;
            let valid_f1 = self.evaluate(valid)?.f1;
            let score = valid_f1.unwrap_or(0.0);
            if best.as_ref().is_none_or(|(s, _, _)| score > *s) {
                best = Some((score, epoch, params.clone()));
            }
            self.training_log.push(EpochRecord { epoch, loss, valid_f1 });
        }
        if let Some((_, epoch, p)) = best {
            self.set_params(&p)?;
            self.best_epoch = Some(epoch);
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let file = ModelFile {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            model: self.clone(),
        };
        let mut s = serde_json::to_string_pretty(&file).expect("model serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text).map_err(|e| Error::ModelFormat(e.to_string()))?;
        if file.format != MODEL_FORMAT {
            return Err(Error::ModelFormat(format!("unexpected format '{}'", file.format)));
        }
        if file.version != MODEL_VERSION {
            return Err(Error::ModelFormat(format!("unsupported version {}", file.version)));
        }
        let model = file.model;
        model.config.validate()?;
        let shape_ok = model.layers.len() == model.config.width.len() - 1
            && model.layers.iter().zip(model.config.width.windows(2)).all(|(l, w)| {
                l.in_dim == w[0] && l.out_dim == w[1] && l.knots.degree() == model.config.k && l.knots.grid() == model.config.grid
            });
        if !shape_ok {
            return Err(Error::ModelFormat("layers do not match the configured width".into()));
        }
        for l in &model.layers {
            l.validate()?;
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

pub fn kan_new(config: KanConfig) -> Result<KanModel> {
    KanModel::new(config)
}

pub fn kan_forward(model: &KanModel, x: &[f64]) -> Result<f64> {
    model.forward(x)
}

pub fn kan_backward(model: &KanModel, x: &[f64], target: u8) -> Result<GradientSet> {
    model.backward(x, target)
}

pub fn kan_train(mut model: KanModel, train: &Dataset, valid: &Dataset) -> Result<KanModel> {
    model.train(train, valid)?;
    Ok(model)
}

pub fn kan_predict(model: &KanModel, x: &[f64]) -> Result<(f64, u8)> {
    model.predict(x)
}
