//! Quick suitability check: project to two principal components and test
//! whether a single spline boundary separates the classes on held-out data.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Standardizer};
use crate::error::{Error, Result};
use crate::metrics::sigmoid;
use crate::optim::Adam;
use crate::pca::{pca_fit, PcaModel};
use crate::spline::{KnotVector, LocalBasis};

pub const DEFAULT_THRESHOLD: f64 = 0.9;
pub const DEFAULT_GRIDS: [usize; 6] = [3, 5, 8, 12, 20, 30];
pub const BOUNDARY_DEGREE: usize = 3;
pub const BOUNDARY_STEPS: usize = 500;
pub const BOUNDARY_LEARNING_RATE: f64 = 0.05;
pub const FIT_FRACTION: f64 = 0.7;
pub const MIN_POINTS: usize = 20;

/// Which projected coordinate the boundary is a function of.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Orientation {
    /// Boundary `pc2 = b(pc1)`.
    Pc2OfPc1,
    /// Boundary `pc1 = b(pc2)`.
    Pc1OfPc2,
}

impl Orientation {
    pub const BOTH: [Orientation; 2] = [Orientation::Pc2OfPc1, Orientation::Pc1OfPc2];

    /// `(independent, dependent)` coordinate indices.
    fn axes(self) -> (usize, usize) {
        match self {
            Orientation::Pc2OfPc1 => (0, 1),
            Orientation::Pc1OfPc2 => (1, 0),
        }
    }
}

impl fmt::Display for Orientation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Orientation::Pc2OfPc1 => "pc2 = b(pc1)",
            Orientation::Pc1OfPc2 => "pc1 = b(pc2)",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridScore {
    pub grid: usize,
    pub orientation: Orientation,
    /// Held-out balanced accuracy.
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparabilityReport {
    pub best_score: f64,
    pub best_grid: usize,
    pub best_orientation: Orientation,
    pub threshold: f64,
    pub suitable: bool,
    /// Sorted by `(grid, orientation)`.
    pub per_grid_scores: Vec<GridScore>,
    pub split_seed: u64,
}

impl SeparabilityReport {
    pub fn verdict(&self) -> &'static str {
        if self.suitable {
            "KAN recommended"
        } else {
            "KAN not recommended"
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{}: best balanced accuracy {:.4} (threshold {}, grid {}, {})\n",
            self.verdict(),
            self.best_score,
            self.threshold,
            self.best_grid,
            self.best_orientation
        );
        for s in &self.per_grid_scores {
            out.push_str(&format!("  grid {:>3}  {:<13} {:.4}\n", s.grid, s.orientation.to_string(), s.score));
        }
        out
    }
}

/// Fitted boundary `dep = b(indep)` with logit `scale * (dep - b(indep))`.
#[derive(Debug, Clone)]
pub struct Boundary {
    knots: KnotVector,
    coeffs: Vec<f64>,
    scale: f64,
}

impl Boundary {
    fn local(&self, x: f64) -> LocalBasis {
        self.knots.local_basis(x).expect("finite projected coordinates")
    }

    pub fn eval(&self, x: f64) -> f64 {
        let lb = self.local(x);
        lb.values.iter().enumerate().map(|(j, b)| b * self.coeffs[lb.first + j]).sum()
    }

    pub fn logit(&self, indep: f64, dep: f64) -> f64 {
        self.scale * (dep - self.eval(indep))
    }

    /// Minimizes mean logistic loss with Adam, starting from a flat boundary
    /// at the mean of `dep` and a unit scale signed by the class means.
    pub fn fit(indep: &[f64], dep: &[f64], labels: &[u8], grid: usize) -> Result<Boundary> {
        let n = indep.len();
        let lo = indep.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = indep.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
        let knots = KnotVector::new(lo, hi, grid, BOUNDARY_DEGREE)?;
        let nb = knots.num_basis();

        let mean_of = |class: u8| {
            let (s, c) = dep
                .iter()
                .zip(labels)
                .filter(|(_, &l)| l == class)
                .fold((0.0, 0usize), |(s, c), (d, _)| (s + d, c + 1));
            s / c.max(1) as f64
        };
        let dep_mean = dep.iter().sum::<f64>() / n as f64;
        let scale = if mean_of(1) >= mean_of(0) { 1.0 } else { -1.0 };

        let bases: Vec<LocalBasis> = indep.iter().map(|&x| knots.local_basis(x)).collect::<Result<_>>()?;
        let mut params = vec![dep_mean; nb + 1];
        params[nb] = scale;
        let mut adam = Adam::new(nb + 1, BOUNDARY_LEARNING_RATE);
        let mut grads = vec![0.0; nb + 1];
        for _ in 0..BOUNDARY_STEPS {
            grads.iter_mut().for_each(|g| *g = 0.0);
            let alpha = params[nb];
            for i in 0..n {
                let lb = &bases[i];
                let b: f64 = lb.values.iter().enumerate().map(|(j, v)| v * params[lb.first + j]).sum();
                let margin = dep[i] - b;
                let residual = (sigmoid(alpha * margin) - f64::from(labels[i])) / n as f64;
                grads[nb] += residual * margin;
                for (j, v) in lb.values.iter().enumerate() {
                    grads[lb.first + j] -= residual * alpha * v;
                }
            }
            adam.step(&mut params, &grads);
        }
        let scale = params.pop().expect("scale parameter");
        Ok(Boundary { knots, coeffs: params, scale })
    }
}

/// Mean of per-class recall; both classes must be present in `labels`.
pub fn balanced_accuracy(predicted: &[u8], labels: &[u8]) -> f64 {
    let mut hits = [0usize; 2];
    let mut totals = [0usize; 2];
    for (&p, &l) in predicted.iter().zip(labels) {
        totals[l as usize] += 1;
        hits[l as usize] += usize::from(p == l);
    }
    (hits[0] as f64 / totals[0] as f64 + hits[1] as f64 / totals[1] as f64) / 2.0
}

/// Indices of the stratified fit (70%) and held-out (30%) parts.
pub fn fit_holdout_split(labels: &[u8], seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut parts = crate::data::stratified_partition(labels, &[FIT_FRACTION, 1.0 - FIT_FRACTION], &["fit", "held-out"], seed)?;
    let held = parts.pop().expect("two parts");
    let fit = parts.pop().expect("two parts");
    Ok((fit, held))
}

fn check_inputs(n_points: usize, labels: &[u8], grids: &[usize], threshold: f64) -> Result<()> {
    if n_points != labels.len() {
        return Err(Error::LengthMismatch {
            left: n_points,
            right: labels.len(),
        });
    }
    if n_points < MIN_POINTS {
        return Err(Error::InsufficientData {
            needed: MIN_POINTS,
            found: n_points,
        });
    }
    if labels.iter().any(|&l| l > 1) {
        return Err(Error::InvalidParameter("labels must be 0 or 1".into()));
    }
    if labels.iter().all(|&l| l == labels[0]) {
        return Err(Error::SingleClass);
    }
    if grids.is_empty() || grids.contains(&0) {
        return Err(Error::InvalidParameter("grids must be a non-empty list of positive interval counts".into()));
    }
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::InvalidParameter(format!("threshold {threshold} must lie in [0, 1]")));
    }
    Ok(())
}

pub fn assess_separability(points: &[[f64; 2]], labels: &[u8], grids: &[usize], threshold: f64, seed: u64) -> Result<SeparabilityReport> {
    check_inputs(points.len(), labels, grids, threshold)?;
    if let Some(&x) = points.iter().flatten().find(|x| !x.is_finite()) {
        return Err(Error::NonFiniteInput(x));
    }
    let (fit, held) = fit_holdout_split(labels, seed)?;
    let held_labels: Vec<u8> = held.iter().map(|&i| labels[i]).collect();
    let fit_labels: Vec<u8> = fit.iter().map(|&i| labels[i]).collect();

    let mut jobs: Vec<(usize, Orientation)> = grids.iter().flat_map(|&g| Orientation::BOTH.map(|o| (g, o))).collect();
    jobs.sort_unstable();
    jobs.dedup();
    let per_grid_scores: Vec<GridScore> = jobs
        .par_iter()
        .map(|&(grid, orientation)| {
            let (a, b) = orientation.axes();
            let indep: Vec<f64> = fit.iter().map(|&i| points[i][a]).collect();
            let dep: Vec<f64> = fit.iter().map(|&i| points[i][b]).collect();
            let boundary = Boundary::fit(&indep, &dep, &fit_labels, grid)?;
            let predicted: Vec<u8> = held
                .iter()
                .map(|&i| u8::from(boundary.logit(points[i][a], points[i][b]) > 0.0))
                .collect();
            Ok(GridScore {
                grid,
                orientation,
                score: balanced_accuracy(&predicted, &held_labels),
            })
        })
        .collect::<Result<_>>()?;

    let best = *per_grid_scores
        .iter()
        .fold(None::<&GridScore>, |acc, s| match acc {
            Some(b) if b.score >= s.score => Some(b),
            _ => Some(s),
        })
        .expect("at least one grid");
    Ok(SeparabilityReport {
        best_score: best.score,
        best_grid: best.grid,
        best_orientation: best.orientation,
        threshold,
        suitable: best.score >= threshold,
        per_grid_scores,
        split_seed: seed,
    })
}

#[derive(Debug, Clone)]
pub struct QuickDecision {
    pub report: SeparabilityReport,
    pub pca: PcaModel,
    pub scaler: Standardizer,
    /// Projected coordinates of every input row.
    pub points: Vec<[f64; 2]>,
    pub labels: Vec<u8>,
}

/// Standardizes, projects to two components and assesses separability. The
/// scaler and projection are fit on the same 70% part used to fit boundaries.
pub fn quick_decision(raw: &Dataset, grids: &[usize], threshold: f64, seed: u64) -> Result<QuickDecision> {
    check_inputs(raw.n_rows(), &raw.labels, grids, threshold)?;
    let (fit, _) = fit_holdout_split(&raw.labels, seed)?;
    let scaler = Standardizer::fit(&raw.subset(&fit))?;
    let scaled = scaler.apply(raw)?;
    let fit_rows: Vec<Vec<f64>> = fit.iter().map(|&i| scaled.features[i].clone()).collect();
    let pca = pca_fit(&fit_rows)?;
    let points = pca.transform(&scaled.features)?;
    let report = assess_separability(&points, &raw.labels, grids, threshold, seed)?;
    Ok(QuickDecision {
        report,
        pca,
        scaler,
        points,
        labels: raw.labels.clone(),
    })
}
