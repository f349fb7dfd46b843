//! Numerical checks of the embedding rank bound and of the shared spectrum
//! of generalized Gram operators.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::diagnostics::dense::{
    degrees, dense_gram, dense_matrix, dense_normalized, direction_residual, eigenvector_for,
    general_eigenvalues, guard,
};
use crate::error::{PolyCfError, Result};
use crate::interaction::InteractionMatrix;

/// Embedding-propagation model: scores are inner products of
/// `P(A~) E = sum_k alpha_k A~^k E` between user and item rows.
#[derive(Debug, Clone)]
pub struct EmbeddingSim {
    pub embedding_dim: usize,
    pub user_emb: DMatrix<f64>,
    pub item_emb: DMatrix<f64>,
    pub poly_coeffs: Vec<f64>,
}

impl EmbeddingSim {
    pub fn random<R: Rng + ?Sized>(
        dim: usize,
        m: usize,
        n: usize,
        order: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(PolyCfError::invalid("embedding dimension must be >= 1"));
        }
        let mut draw = || -> f64 { StandardNormal.sample(rng) };
        let user_emb = DMatrix::from_fn(m, dim, |_, _| draw());
        let item_emb = DMatrix::from_fn(n, dim, |_, _| draw());
        let poly_coeffs = (0..=order).map(|_| draw()).collect();
        Ok(Self {
            embedding_dim: dim,
            user_emb,
            item_emb,
            poly_coeffs,
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RankReport {
    pub embedding_dim: usize,
    pub numerical_rank: usize,
    pub singular_values: Vec<f64>,
    pub bound_holds: bool,
}

/// Forms `R* = [P(A~)E]_users [P(A~)E]_items^T` and counts singular values
/// above `1e-8 * sigma_max`.
pub fn verify_rank_bound(sim: &EmbeddingSim, r: &InteractionMatrix) -> Result<RankReport> {
    let (m, n) = (r.num_users(), r.num_items());
    guard(m)?;
    guard(n)?;
    if sim.user_emb.shape() != (m, sim.embedding_dim)
        || sim.item_emb.shape() != (n, sim.embedding_dim)
    {
        return Err(PolyCfError::invalid(
            "embedding shapes do not match the interaction matrix",
        ));
    }
    if sim
        .user_emb
        .iter()
        .chain(sim.item_emb.iter())
        .any(|v| !v.is_finite())
    {
        return Err(PolyCfError::invalid("embeddings must be finite"));
    }
    let rt = dense_normalized(r);
    let mut adj = DMatrix::zeros(m + n, m + n);
    adj.view_mut((0, m), (m, n)).copy_from(&rt);
    adj.view_mut((m, 0), (n, m)).copy_from(&rt.transpose());
    let mut e = DMatrix::zeros(m + n, sim.embedding_dim);
    e.view_mut((0, 0), (m, sim.embedding_dim))
        .copy_from(&sim.user_emb);
    e.view_mut((m, 0), (n, sim.embedding_dim))
        .copy_from(&sim.item_emb);

    let mut power = e.clone();
    let mut prop = DMatrix::zeros(m + n, sim.embedding_dim);
    for (k, &alpha) in sim.poly_coeffs.iter().enumerate() {
        if k > 0 {
            power = &adj * power;
        }
        prop += &power * alpha;
    }
    let users = prop.rows(0, m).into_owned();
    let items = prop.rows(m, n).into_owned();
    let scores = users * items.transpose();
    let mut sv: Vec<f64> = scores.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    let top = sv.first().copied().unwrap_or(0.0);
    let rank = sv.iter().filter(|&&s| s > 1e-8 * top).count();
    Ok(RankReport {
        embedding_dim: sim.embedding_dim,
        numerical_rank: rank,
        singular_values: sv,
        bound_holds: rank <= sim.embedding_dim,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct PairReport {
    pub gamma_a: f64,
    pub gamma_b: f64,
    /// Max difference of sorted eigenvalues.
    pub eigenvalue_gap: f64,
    /// `mu_left^(a)` vs `D_I^{a-b} mu_left^(b)` (left eigenvectors).
    pub left_map_residual: f64,
    /// `mu_right^(a)` vs `D_I^{b-a} mu_right^(b)` (right eigenvectors).
    pub right_map_residual: f64,
    pub simple_eigenvalues_checked: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumReport {
    pub pairs: Vec<PairReport>,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    pub max_imaginary: f64,
    /// Eigenvalues outside `[-1e-9, 1 + 1e-9]`.
    pub range_violations: usize,
}

impl SpectrumReport {
    pub fn max_eigenvalue_gap(&self) -> f64 {
        self.pairs
            .iter()
            .map(|p| p.eigenvalue_gap)
            .fold(0.0, f64::max)
    }

    pub fn max_map_residual(&self) -> f64 {
        self.pairs
            .iter()
            .map(|p| p.left_map_residual.max(p.right_map_residual))
            .fold(0.0, f64::max)
    }
}

/// Minimum separation for an eigenvalue to count as simple.
const SIMPLE_GAP: f64 = 1e-3;

fn simple_indices(vals: &[f64]) -> Vec<usize> {
    (0..vals.len())
        .filter(|&i| {
            let left = i == 0 || vals[i] - vals[i - 1] > SIMPLE_GAP;
            let right = i + 1 == vals.len() || vals[i + 1] - vals[i] > SIMPLE_GAP;
            left && right
        })
        .collect()
}

fn scaled(v: &DVector<f64>, di: &[f64], p: f64) -> DVector<f64> {
    DVector::from_iterator(
        v.len(),
        v.iter()
            .zip(di)
            .map(|(x, &d)| if d == 0.0 { *x } else { x * d.powf(p) }),
    )
}

/// Dense spectra of `G^(gamma)` for every gamma in `gamma_pairs`: eigenvalue
/// agreement across each pair, the eigenvalue range, and the eigenvector map.
pub fn verify_theorem2(
    r: &InteractionMatrix,
    gamma_pairs: &[(f64, f64)],
) -> Result<SpectrumReport> {
    guard(r.num_items())?;
    let (_, di) = degrees(&dense_matrix(r));
    let mut min_eig = f64::INFINITY;
    let mut max_eig = f64::NEG_INFINITY;
    let mut max_imag: f64 = 0.0;
    let mut violations = 0;
    let mut pairs = Vec::with_capacity(gamma_pairs.len());
    for &(ga, gb) in gamma_pairs {
        let a = dense_gram(r, ga);
        let b = dense_gram(r, gb);
        let (ea, ia) = general_eigenvalues(&a);
        let (eb, ib) = general_eigenvalues(&b);
        max_imag = max_imag.max(ia).max(ib);
        for &v in ea.iter().chain(&eb) {
            min_eig = min_eig.min(v);
            max_eig = max_eig.max(v);
            if !(-1e-9..=1.0 + 1e-9).contains(&v) {
                violations += 1;
            }
        }
        let gap = ea
            .iter()
            .zip(&eb)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);

        let simple = simple_indices(&ea);
        let (at, bt) = (a.transpose(), b.transpose());
        let mut left_res: f64 = 0.0;
        let mut right_res: f64 = 0.0;
        for &i in &simple {
            let lam = ea[i];
            let left_a = eigenvector_for(&at, lam);
            let left_b = eigenvector_for(&bt, lam);
            left_res = left_res.max(direction_residual(&left_a, &scaled(&left_b, &di, ga - gb)));
            let right_a = eigenvector_for(&a, lam);
            let right_b = eigenvector_for(&b, lam);
            right_res = right_res.max(direction_residual(
                &right_a,
                &scaled(&right_b, &di, gb - ga),
            ));
        }
        pairs.push(PairReport {
            gamma_a: ga,
            gamma_b: gb,
            eigenvalue_gap: gap,
            left_map_residual: left_res,
            right_map_residual: right_res,
            simple_eigenvalues_checked: simple.len(),
        });
    }
    Ok(SpectrumReport {
        pairs,
        min_eigenvalue: min_eig,
        max_eigenvalue: max_eig,
        max_imaginary: max_imag,
        range_violations: violations,
    })
}
