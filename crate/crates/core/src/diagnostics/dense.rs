//! Dense reference implementations for small instances.
//!
//! Nothing here calls into the sparse factored path, the basis recurrences or
//! the production SVD: operators are materialized from the 0/1 matrix,
//! spectra come from dense eigendecompositions and basis polynomials from
//! closed forms.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{PolyCfError, Result};
use crate::interaction::InteractionMatrix;
use crate::spectral::{BasisFamily, PolyBasis};

/// Largest item/user count the dense diagnostics accept.
pub const DENSE_LIMIT: usize = 100;

pub fn guard(n: usize) -> Result<()> {
    if n > DENSE_LIMIT {
        Err(PolyCfError::ScaleGuard {
            n,
            limit: DENSE_LIMIT,
        })
    } else {
        Ok(())
    }
}

pub fn dense_matrix(r: &InteractionMatrix) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(r.num_users(), r.num_items());
    for (u, i) in r.entries() {
        d[(u, i)] = 1.0;
    }
    d
}

/// `d^p`, with zero degree mapped to `zero_value`.
fn pow_or(d: f64, p: f64, zero_value: f64) -> f64 {
    if d == 0.0 {
        zero_value
    } else {
        d.powf(p)
    }
}

/// Row and column sums of a dense 0/1 matrix.
pub fn degrees(rm: &DMatrix<f64>) -> (Vec<f64>, Vec<f64>) {
    let du = (0..rm.nrows()).map(|u| rm.row(u).sum()).collect();
    let di = (0..rm.ncols()).map(|i| rm.column(i).sum()).collect();
    (du, di)
}

/// `D_I^{-gamma} R^T D_U^{-1} R D_I^{gamma-1}`, materialized.
pub fn dense_gram(r: &InteractionMatrix, gamma: f64) -> DMatrix<f64> {
    let rm = dense_matrix(r);
    let (du, di) = degrees(&rm);
    let left = DMatrix::from_diagonal(&DVector::from_iterator(
        di.len(),
        di.iter().map(|&d| pow_or(d, -gamma, 0.0)),
    ));
    let mid = DMatrix::from_diagonal(&DVector::from_iterator(
        du.len(),
        du.iter().map(|&d| pow_or(d, -1.0, 0.0)),
    ));
    let right = DMatrix::from_diagonal(&DVector::from_iterator(
        di.len(),
        di.iter().map(|&d| pow_or(d, gamma - 1.0, 0.0)),
    ));
    left * rm.transpose() * mid * &rm * right
}

/// `D_U^{-1/2} R D_I^{-1/2}`, materialized.
pub fn dense_normalized(r: &InteractionMatrix) -> DMatrix<f64> {
    let mut rm = dense_matrix(r);
    let (du, di) = degrees(&rm);
    for u in 0..rm.nrows() {
        for i in 0..rm.ncols() {
            if rm[(u, i)] != 0.0 {
                rm[(u, i)] /= (du[u] * di[i]).sqrt();
            }
        }
    }
    rm
}

/// Closed-form basis values at Gram eigenvalue `x` (clamped to `[0, 1]`).
pub fn closed_form_basis(basis: &PolyBasis, order: usize, x: f64) -> Vec<f64> {
    let x = x.clamp(0.0, 1.0);
    let t = 2.0 * x - 1.0;
    let binom =
        |top: f64, j: usize| (0..j).fold(1.0, |acc, i| acc * (top - i as f64) / (i + 1) as f64);
    let fact = |n: usize| (1..=n).map(|v| v as f64).product::<f64>();
    (0..=order)
        .map(|k| match basis.family {
            BasisFamily::Monomial => x.powi(k as i32),
            BasisFamily::Chebyshev => (k as f64 * t.acos()).cos(),
            BasisFamily::Bernstein => {
                binom(order as f64, k) * x.powi(k as i32) * (1.0 - x).powi((order - k) as i32)
            }
            BasisFamily::Hermite => (0..=k / 2)
                .map(|m| {
                    let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
                    sign * fact(k) * t.powi((k - 2 * m) as i32)
                        / (fact(m) * fact(k - 2 * m) * 2f64.powi(m as i32))
                })
                .sum(),
            BasisFamily::Jacobi => {
                let (a, b) = (basis.jacobi_a, basis.jacobi_b);
                (0..=k)
                    .map(|s| {
                        binom(k as f64 + a, k - s)
                            * binom(k as f64 + b, s)
                            * ((t - 1.0) / 2.0).powi(s as i32)
                            * ((t + 1.0) / 2.0).powi((k - s) as i32)
                    })
                    .sum()
            }
        })
        .collect()
}

/// Eigendecomposition of the symmetric `G^(1/2)` sorted by descending eigenvalue.
pub fn symmetric_spectrum(r: &InteractionMatrix) -> (DVector<f64>, DMatrix<f64>) {
    let g = dense_gram(r, 0.5);
    let sym = (&g + g.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let vals = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vecs = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vecs.set_column(dst, &eig.eigenvectors.column(src));
    }
    (vals, vecs)
}

/// Spectral filter `h(G^(gamma)) x` with `h(mu) = sum_k theta_k P_k(mu)`.
///
/// Uses `G^(gamma) = M S M^{-1}` with `S = G^(1/2) = Q diag(mu) Q^T` and
/// `M = D_I^{1/2 - gamma}` (identity on zero-degree items), so the
/// eigenvectors of `G^(gamma)` are the columns of `M Q`.
pub fn spectral_kernel_term(
    r: &InteractionMatrix,
    basis: &PolyBasis,
    order: usize,
    gamma: f64,
    theta: &[f64],
    x: &[f64],
) -> DVector<f64> {
    let (mu, q) = symmetric_spectrum(r);
    let (_, di) = degrees(&dense_matrix(r));
    let m: Vec<f64> = di.iter().map(|&d| pow_or(d, 0.5 - gamma, 1.0)).collect();
    let m_inv_x = DVector::from_iterator(x.len(), x.iter().zip(&m).map(|(v, s)| v / s));
    let mut coeffs = q.transpose() * m_inv_x;
    for (j, c) in coeffs.iter_mut().enumerate() {
        let p = closed_form_basis(basis, order, mu[j]);
        let h: f64 = p.iter().zip(theta).map(|(a, b)| a * b).sum();
        *c *= h;
    }
    let y = q * coeffs;
    DVector::from_iterator(y.len(), y.iter().zip(&m).map(|(v, s)| v * s))
}

/// Top-`s` right singular vectors of the dense `R~` and the matching
/// eigenvalues of `G^(1/2)` (squared singular values), descending.
pub fn dense_top_singular(r: &InteractionMatrix, s: usize) -> (DMatrix<f64>, Vec<f64>) {
    let rt = dense_normalized(r);
    let svd = rt.clone().svd(false, true);
    let vt = svd.v_t.expect("requested V^T");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let n = rt.ncols();
    let mut v = DMatrix::zeros(n, s);
    for (dst, &src) in order.iter().take(s).enumerate() {
        v.set_column(dst, &vt.row(src).transpose());
    }
    let sig = order
        .iter()
        .take(s)
        .map(|&i| svd.singular_values[i].powi(2))
        .collect();
    (v, sig)
}

/// Complete dense reference for the composite filter output.
pub fn composite_oracle(
    r: &InteractionMatrix,
    basis: &PolyBasis,
    order: usize,
    gammas: &[f64],
    theta: &[Vec<f64>],
    omega: f64,
    cutoff: usize,
    x: &[f64],
) -> DVector<f64> {
    let n = x.len();
    let mut out = DVector::zeros(n);
    for (g, &gamma) in gammas.iter().enumerate() {
        out += spectral_kernel_term(r, basis, order, gamma, &theta[g], x);
    }
    out /= gammas.len() as f64;
    if omega != 0.0 && cutoff > 0 {
        let (v, _) = dense_top_singular(r, cutoff);
        let xv = DVector::from_column_slice(x);
        out += (&v * (v.transpose() * xv)) * omega;
    }
    out
}

/// Real eigenvalues of a general square matrix, ascending, plus the largest
/// imaginary part seen.
pub fn general_eigenvalues(a: &DMatrix<f64>) -> (Vec<f64>, f64) {
    let ev = a.clone().complex_eigenvalues();
    let max_imag = ev.iter().map(|c| c.im.abs()).fold(0.0, f64::max);
    let mut re: Vec<f64> = ev.iter().map(|c| c.re).collect();
    re.sort_by(f64::total_cmp);
    (re, max_imag)
}

/// Unit null vector of `a - lambda I` (right singular vector of the smallest
/// singular value).
pub fn eigenvector_for(a: &DMatrix<f64>, lambda: f64) -> DVector<f64> {
    let n = a.nrows();
    let shifted = a - DMatrix::identity(n, n) * lambda;
    let svd = shifted.svd(false, true);
    let vt = svd.v_t.expect("requested V^T");
    let (idx, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty");
    vt.row(idx).transpose().normalize()
}

/// Distance between two directions after sign alignment (both normalized).
pub fn direction_residual(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let a = a.normalize();
    let b = b.normalize();
    let c = a.dot(&b).signum();
    (a - b * c).norm()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two_gram_by_hand() {
        let r = InteractionMatrix::from_dense(&[vec![1, 1], vec![0, 1]]).unwrap();
        let g = dense_gram(&r, 0.5);
        let h = 0.5 / 2f64.sqrt();
        let expected = DMatrix::from_row_slice(2, 2, &[0.5, h, h, 0.75]);
        assert!((g - expected).abs().max() < 1e-15);
        let g0 = dense_gram(&r, 0.0);
        let g1 = dense_gram(&r, 1.0);
        assert!((g0 - g1.transpose()).abs().max() < 1e-15);
    }

    #[test]
    fn guard_rejects_large() {
        assert!(guard(100).is_ok());
        assert!(guard(101).is_err());
    }
}
