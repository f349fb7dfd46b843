#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use polycf::diagnostics::dense::dense_normalized;
use polycf::synthetic::random_interactions;
use polycf::{CoefTable, InteractionMatrix};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// m, n in [5, 30], density in [0.2, 0.6].
pub fn random_instance<R: Rng>(rng: &mut R) -> InteractionMatrix {
    let m = rng.random_range(5..=30);
    let n = rng.random_range(5..=30);
    let density = rng.random_range(0.2..=0.6);
    random_interactions(m, n, density, rng).unwrap()
}

pub fn gaussian<R: Rng>(rng: &mut R, len: usize) -> Vec<f64> {
    (0..len).map(|_| StandardNormal.sample(rng)).collect()
}

pub fn random_theta<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> CoefTable<f64> {
    let flat = gaussian(rng, rows * cols);
    let rows: Vec<Vec<f64>> = flat.chunks(cols).map(<[f64]>::to_vec).collect();
    CoefTable::from_rows(&rows).unwrap()
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let diff: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt();
    let scale: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

/// Eigenvalues of `G^(1/2)` from the dense normalized matrix, descending.
pub fn dense_gram_spectrum(r: &InteractionMatrix) -> Vec<f64> {
    let rt = dense_normalized(r);
    let mut sv: Vec<f64> = rt.singular_values().iter().map(|s| s * s).collect();
    sv.resize(r.num_items(), 0.0);
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Largest `s <= target` at which the spectrum has a clear gap, so the
/// projector onto the leading `s` eigenvectors is unique.
pub fn gapped_cutoff(spectrum: &[f64], target: usize) -> usize {
    (0..=target.min(spectrum.len()))
        .rev()
        .find(|&s| s == 0 || s == spectrum.len() || spectrum[s - 1] - spectrum[s] > 1e-6)
        .unwrap_or(0)
}

pub fn numerical_rank(spectrum: &[f64]) -> usize {
    let top = spectrum.first().copied().unwrap_or(0.0);
    spectrum
        .iter()
        .filter(|&&v| v > 1e-10 * top.max(1e-300))
        .count()
}

pub fn to_vec(v: &DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}

pub fn matvec(a: &DMatrix<f64>, x: &[f64]) -> Vec<f64> {
    to_vec(&(a * DVector::from_column_slice(x)))
}

/// Central finite difference of `f` in every coefficient of `theta`.
pub fn finite_difference(
    theta: &CoefTable<f64>,
    h: f64,
    mut f: impl FnMut(&CoefTable<f64>) -> f64,
) -> CoefTable<f64> {
    let (rows, cols) = theta.shape();
    let mut out = CoefTable::zeros(rows, cols);
    for g in 0..rows {
        for k in 0..cols {
            let mut plus = theta.clone();
            plus.set(g, k, theta.get(g, k) + h);
            let mut minus = theta.clone();
            minus.set(g, k, theta.get(g, k) - h);
            out.set(g, k, (f(&plus) - f(&minus)) / (2.0 * h));
        }
    }
    out
}

/// Largest violation of `|a - b| <= rel * max(|a|, |b|)` or `<= abs`;
/// returns 0 when every entry passes.
pub fn gradient_violation(
    analytic: &CoefTable<f64>,
    numeric: &CoefTable<f64>,
    rel: f64,
    abs: f64,
) -> f64 {
    analytic
        .as_slice()
        .iter()
        .zip(numeric.as_slice())
        .map(|(a, b)| {
            let d = (a - b).abs();
            if d <= abs || d <= rel * a.abs().max(b.abs()) {
                0.0
            } else {
                d / a.abs().max(b.abs()).max(abs)
            }
        })
        .fold(0.0, f64::max)
}
