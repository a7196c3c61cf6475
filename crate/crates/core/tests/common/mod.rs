//! Shared synthetic fixtures for integration tests.
#![allow(dead_code)]

use std::path::Path;

use kanfraud::seed;
use kanfraud::Dataset;
use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

pub const EMBED_DIM: usize = 30;
const ROTATION_SEED: u64 = 0x5EED_0F_2024;
const NOISE_SD: f64 = 0.1;

/// Bumpy reference boundary on the leading latent coordinate.
pub fn reference_boundary(x: f64) -> f64 {
    0.8 * (1.7 * x).sin() + 0.3 * (0.9 * x).cos()
}

/// Fixed random orthogonal matrix (QR of a seeded Gaussian matrix).
pub fn rotation(dim: usize) -> DMatrix<f64> {
    rotation_seeded(dim, ROTATION_SEED)
}

pub fn rotation_seeded(dim: usize, seed_value: u64) -> DMatrix<f64> {
    let mut rng = seed::rng(seed_value);
    let g = DMatrix::from_fn(dim, dim, |_, _| StandardNormal.sample(&mut rng));
    g.qr().q()
}

/// Rows of the latent construction before embedding: two informative
/// coordinates followed by small isotropic noise.
fn latent_rows(n: usize, dim: usize, seed_value: u64) -> (Vec<Vec<f64>>, Vec<u8>) {
    let mut rng = seed::rng(seed_value);
    let noise = Normal::new(0.0, NOISE_SD).unwrap();
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let x1: f64 = rng.random_range(-3.0..3.0);
        let x2: f64 = rng.random_range(-1.5..1.5);
        let mut row = vec![x1, x2];
        row.extend((2..dim).map(|_| noise.sample(&mut rng)));
        labels.push(u8::from(x2 > reference_boundary(x1)));
        rows.push(row);
    }
    (rows, labels)
}

pub fn rotate(rows: &[Vec<f64>], r: &DMatrix<f64>) -> Vec<Vec<f64>> {
    rows.iter()
        .map(|z| (0..r.nrows()).map(|i| (0..r.ncols()).map(|j| r[(i, j)] * z[j]).sum()).collect())
        .collect()
}

/// `n` rows, label = x2 > s(x1), embedded in `EMBED_DIM` dimensions by a
/// fixed rotation.
pub fn spline_dataset(n: usize, seed_value: u64) -> Dataset {
    let (latent, labels) = latent_rows(n, EMBED_DIM, seed_value);
    let features = rotate(&latent, &rotation(EMBED_DIM));
    let names = (0..EMBED_DIM).map(|i| format!("f{i}")).collect();
    Dataset::new(features, labels, names, "Class").unwrap()
}

pub fn shuffled_labels(data: &Dataset, seed_value: u64) -> Dataset {
    let mut labels = data.labels.clone();
    labels.shuffle(&mut seed::rng(seed_value));
    data.with_labels(labels).unwrap()
}

pub fn write_csv(data: &Dataset, path: &Path) {
    data.write_csv(path).unwrap();
}
