//! Uniform B-spline bases on an extended knot grid.
//!
//! A [`KnotVector`] with `G` intervals and degree `k` carries `G + 2k + 1`
//! equally spaced knots: the `G + 1` grid points spanning the domain plus `k`
//! extension knots on each side. This yields `G + k` basis functions which
//! form a partition of unity everywhere inside the domain. Inputs outside the
//! domain are clamped to its ends, so evaluation is total.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnotVector {
    domain_lo: f64,
    domain_hi: f64,
    grid: usize,
    degree: usize,
    knots: Vec<f64>,
}

/// Nonzero basis values at a point: `values[j]` belongs to basis function
/// `first + j`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalBasis {
    pub first: usize,
    pub values: Vec<f64>,
}

impl KnotVector {
    pub fn new(domain_lo: f64, domain_hi: f64, grid: usize, degree: usize) -> Result<Self> {
        if !(domain_lo.is_finite() && domain_hi.is_finite()) || domain_lo >= domain_hi {
            return Err(Error::InvalidRange {
                lo: domain_lo,
                hi: domain_hi,
            });
        }
        if grid < 1 {
            return Err(Error::InvalidParameter(format!("grid must be >= 1, got {grid}")));
        }
        if degree < 1 {
            return Err(Error::InvalidParameter(format!(
                "degree must be >= 1, got {degree}"
            )));
        }
        let step = (domain_hi - domain_lo) / grid as f64;
        let knots = (0..grid + 2 * degree + 1)
            .map(|i| {
                let offset = i as i64 - degree as i64;
                if offset == grid as i64 {
                    domain_hi
                } else {
                    domain_lo + offset as f64 * step
                }
            })
            .collect();
        Ok(Self {
            domain_lo,
            domain_hi,
            grid,
            degree,
            knots,
        })
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.domain_lo, self.domain_hi)
    }

    pub fn grid(&self) -> usize {
        self.grid
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Number of basis functions, `G + k`.
    pub fn num_basis(&self) -> usize {
        self.grid + self.degree
    }

    /// Re-checks the structural invariants, e.g. after deserialization.
    pub fn validate(&self) -> Result<()> {
        let rebuilt = KnotVector::new(self.domain_lo, self.domain_hi, self.grid, self.degree)?;
        if rebuilt.knots.len() != self.knots.len()
            || self.knots.windows(2).any(|w| w[0] > w[1])
        {
            return Err(Error::ModelFormat(format!(
                "knot vector must hold {} non-decreasing knots",
                rebuilt.knots.len()
            )));
        }
        Ok(())
    }

    pub fn clamp(&self, t: f64) -> Result<f64> {
        if !t.is_finite() {
            return Err(Error::NonFiniteInput(t));
        }
        Ok(t.clamp(self.domain_lo, self.domain_hi))
    }

    fn is_outside(&self, t: f64) -> bool {
        t < self.domain_lo || t > self.domain_hi
    }

    /// Knot span `i` with `knots[i] <= t < knots[i + 1]`, restricted to the
    /// domain intervals; the upper domain end belongs to the last interval.
    fn span(&self, t: f64) -> usize {
        let k = self.degree;
        let last = k + self.grid - 1;
        let step = (self.domain_hi - self.domain_lo) / self.grid as f64;
        let guess = ((t - self.domain_lo) / step).floor();
        let mut i = if guess <= 0.0 {
            k
        } else {
            (k + guess as usize).min(last)
        };
        while i > k && t < self.knots[i] {
            i -= 1;
        }
        while i < last && t >= self.knots[i + 1] {
            i += 1;
        }
        i
    }

    /// Nonzero basis values at `t` (clamped into the domain).
    pub fn local_basis(&self, t: f64) -> Result<LocalBasis> {
        let t = self.clamp(t)?;
        let span = self.span(t);
        Ok(LocalBasis {
            first: span - self.degree,
            values: triangle(&self.knots, span, self.degree, t),
        })
    }

    /// Derivatives with respect to `t` of the nonzero basis functions. Zero
    /// outside the domain, where the clamped input is constant.
    pub fn local_basis_derivs(&self, t: f64) -> Result<LocalBasis> {
        let p = self.degree;
        if p == 0 {
            return Err(Error::UnsupportedDegree(p));
        }
        let clamped = self.clamp(t)?;
        let span = self.span(clamped);
        let first = span - p;
        if self.is_outside(t) {
            return Ok(LocalBasis {
                first,
                values: vec![0.0; p + 1],
            });
        }
        // lower[j] is N_{span-p+1+j, p-1}
        let lower = triangle(&self.knots, span, p - 1, clamped);
        let u = &self.knots;
        let pf = p as f64;
        let values = (0..=p)
            .map(|j| {
                let m = first + j;
                let mut d = 0.0;
                if j >= 1 {
                    d += pf * lower[j - 1] / (u[m + p] - u[m]);
                }
                if j < p {
                    d -= pf * lower[j] / (u[m + p + 1] - u[m + 1]);
                }
                d
            })
            .collect();
        Ok(LocalBasis { first, values })
    }

    /// Dense vector of all `G + k` basis values at `t`.
    pub fn basis_values(&self, t: f64) -> Result<Vec<f64>> {
        let local = self.local_basis(t)?;
        let mut out = vec![0.0; self.num_basis()];
        out[local.first..local.first + local.values.len()].copy_from_slice(&local.values);
        Ok(out)
    }
}

pub fn make_knots(domain_lo: f64, domain_hi: f64, grid: usize, degree: usize) -> Result<KnotVector> {
    KnotVector::new(domain_lo, domain_hi, grid, degree)
}

pub fn basis_values(kv: &KnotVector, t: f64) -> Result<Vec<f64>> {
    kv.basis_values(t)
}

/// Cox-de Boor triangle for the `degree + 1` basis functions that are
/// nonzero on knot span `span`. Requires `knots[span] <= t <= knots[span + 1]`.
pub(crate) fn triangle(knots: &[f64], span: usize, degree: usize, t: f64) -> Vec<f64> {
    let mut n = vec![0.0; degree + 1];
    let mut left = vec![0.0; degree + 1];
    let mut right = vec![0.0; degree + 1];
    n[0] = 1.0;
    for j in 1..=degree {
        left[j] = t - knots[span + 1 - j];
        right[j] = knots[span + j] - t;
        let mut saved = 0.0;
        for r in 0..j {
            let temp = n[r] / (right[r + 1] + left[j - r]);
            n[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        n[j] = saved;
    }
    n
}

/// A univariate spline `sum_i coeffs[i] * B_i(t)` over a uniform knot grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplineFunction {
    knots: KnotVector,
    coeffs: Vec<f64>,
}

impl SplineFunction {
    pub fn new(knots: KnotVector, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != knots.num_basis() {
            return Err(Error::DimensionMismatch {
                expected: knots.num_basis(),
                found: coeffs.len(),
            });
        }
        Ok(Self { knots, coeffs })
    }

    pub fn zeros(knots: KnotVector) -> Self {
        let coeffs = vec![0.0; knots.num_basis()];
        Self { knots, coeffs }
    }

    pub fn knots(&self) -> &KnotVector {
        &self.knots
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        let local = self.knots.local_basis(t)?;
        Ok(dot_local(&local, &self.coeffs))
    }

    /// Gradient of [`eval`](Self::eval) with respect to the coefficients,
    /// which is the basis vector itself.
    pub fn grad_coeffs(&self, t: f64) -> Result<Vec<f64>> {
        self.knots.basis_values(t)
    }

    /// `d/dt` of the spline: a degree `k - 1` spline whose coefficients are
    /// scaled differences of adjacent coefficients.
    pub fn deriv_input(&self, t: f64) -> Result<f64> {
        let p = self.knots.degree;
        if p == 0 {
            return Err(Error::UnsupportedDegree(p));
        }
        let clamped = self.knots.clamp(t)?;
        if self.knots.is_outside(t) {
            return Ok(0.0);
        }
        let span = self.knots.span(clamped);
        let lower = triangle(&self.knots.knots, span, p - 1, clamped);
        let u = &self.knots.knots;
        let c = &self.coeffs;
        let pf = p as f64;
        Ok(lower
            .iter()
            .enumerate()
            .map(|(j, &b)| {
                let m = span + 1 - p + j;
                pf * (c[m] - c[m - 1]) / (u[m + p] - u[m]) * b
            })
            .sum())
    }
}

pub fn spline_eval(f: &SplineFunction, t: f64) -> Result<f64> {
    f.eval(t)
}

pub fn spline_grad_coeffs(f: &SplineFunction, t: f64) -> Result<Vec<f64>> {
    f.grad_coeffs(t)
}

pub fn spline_deriv_input(f: &SplineFunction, t: f64) -> Result<f64> {
    f.deriv_input(t)
}

#[inline]
pub(crate) fn dot_local(local: &LocalBasis, coeffs: &[f64]) -> f64 {
    local
        .values
        .iter()
        .zip(&coeffs[local.first..])
        .map(|(b, c)| b * c)
        .sum()
}
