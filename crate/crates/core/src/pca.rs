//! Two-component principal component analysis.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const JACOBI_TOLERANCE: f64 = 1e-12;
pub const JACOBI_MAX_SWEEPS: usize = 100;

/// Eigenpairs of a symmetric matrix, eigenvalues descending.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    /// `vectors[i]` is the unit eigenvector for `values[i]`.
    pub vectors: Vec<Vec<f64>>,
}

/// Cyclic Jacobi rotations. Stops once the off-diagonal mass falls below
/// `JACOBI_TOLERANCE` times the matrix norm, or after `JACOBI_MAX_SWEEPS`.
pub fn jacobi_eigen(matrix: &[Vec<f64>]) -> Result<SymmetricEigen> {
    let d = matrix.len();
    if matrix.iter().any(|r| r.len() != d) {
        return Err(Error::InvalidParameter("matrix must be square".into()));
    }
    let mut a: Vec<Vec<f64>> = matrix.to_vec();
    let mut v: Vec<Vec<f64>> = (0..d).map(|i| (0..d).map(|j| f64::from(u8::from(i == j))).collect()).collect();
    let norm = a.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
    let off = |a: &[Vec<f64>]| -> f64 {
        let mut s = 0.0;
        for p in 0..d {
            for q in p + 1..d {
                s += 2.0 * a[p][q] * a[p][q];
            }
        }
        s.sqrt()
    };

    for _ in 0..JACOBI_MAX_SWEEPS {
        if off(&a) <= JACOBI_TOLERANCE * norm {
            break;
        }
        for p in 0..d {
            for q in p + 1..d {
                let apq = a[p][q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..d {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..d {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let (vkp, vkq) = (row[p], row[q]);
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| a[j][j].total_cmp(&a[i][i]).then(i.cmp(&j)));
    Ok(SymmetricEigen {
        values: order.iter().map(|&i| a[i][i]).collect(),
        vectors: order.iter().map(|&i| v.iter().map(|row| row[i]).collect()).collect(),
    })
}

/// Flips `v` so its largest-magnitude entry (first on ties) is positive.
fn orient(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    pub components: [Vec<f64>; 2],
    pub explained_variance: [f64; 2],
    pub explained_ratio: [f64; 2],
    /// Trace of the covariance matrix.
    pub total_variance: f64,
}

impl PcaModel {
    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn transform_row(&self, row: &[f64]) -> Result<[f64; 2]> {
        if row.len() != self.mean.len() {
            return Err(Error::DimensionMismatch {
                expected: self.mean.len(),
                found: row.len(),
            });
        }
        let project = |c: &[f64]| row.iter().zip(&self.mean).zip(c).map(|((x, m), w)| (x - m) * w).sum();
        Ok([project(&self.components[0]), project(&self.components[1])])
    }

    pub fn transform(&self, data: &[Vec<f64>]) -> Result<Vec<[f64; 2]>> {
        data.iter().map(|r| self.transform_row(r)).collect()
    }

    /// Maps projected coordinates back to the input space.
    pub fn reconstruct(&self, point: [f64; 2]) -> Vec<f64> {
        (0..self.mean.len())
            .map(|j| self.mean[j] + point[0] * self.components[0][j] + point[1] * self.components[1][j])
            .collect()
    }
}

/// Column means and sample covariance (n − 1 denominator).
pub fn covariance(data: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = data.len();
    let d = data.first().map_or(0, Vec::len);
    let mut mean = vec![0.0; d];
    for row in data {
        for (m, x) in mean.iter_mut().zip(row) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut cov = vec![vec![0.0; d]; d];
    for row in data {
        for i in 0..d {
            let di = row[i] - mean[i];
            for j in i..d {
                cov[i][j] += di * (row[j] - mean[j]);
            }
        }
    }
    for i in 0..d {
        for j in i..d {
            cov[i][j] /= (n - 1) as f64;
            cov[j][i] = cov[i][j];
        }
    }
    (mean, cov)
}

pub fn pca_fit(data: &[Vec<f64>]) -> Result<PcaModel> {
    let n = data.len();
    if n < 3 {
        return Err(Error::InsufficientData { needed: 3, found: n });
    }
    let d = data[0].len();
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    for row in data {
        if row.len() != d {
            return Err(Error::DimensionMismatch { expected: d, found: row.len() });
        }
        if let Some(&x) = row.iter().find(|x| !x.is_finite()) {
            return Err(Error::NonFiniteInput(x));
        }
    }
    let (mean, cov) = covariance(data);
    if cov.iter().flatten().all(|&c| c == 0.0) {
        return Err(Error::DegenerateData("covariance matrix is all zero".into()));
    }
    let eig = jacobi_eigen(&cov)?;
    let total_variance: f64 = (0..d).map(|i| cov[i][i]).sum();
    let mut components = [eig.vectors[0].clone(), eig.vectors[1].clone()];
    components.iter_mut().for_each(|c| orient(c));
    let explained_variance = [eig.values[0].max(0.0), eig.values[1].max(0.0)];
    let explained_ratio = explained_variance.map(|v| (v / total_variance).clamp(0.0, 1.0));
    Ok(PcaModel {
        mean,
        components,
        explained_variance,
        explained_ratio,
        total_variance,
    })
}

pub fn pca_transform(model: &PcaModel, data: &[Vec<f64>]) -> Result<Vec<[f64; 2]>> {
    model.transform(data)
}

/// `pc1,pc2,label` rows.
pub fn scatter_csv(points: &[[f64; 2]], labels: &[u8]) -> String {
    let mut out = String::from("pc1,pc2,label\n");
    for (p, l) in points.iter().zip(labels) {
        writeln!(out, "{},{},{}", p[0], p[1], l).unwrap();
    }
    out
}
