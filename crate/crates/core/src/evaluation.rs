//! Full-ranking Recall@K / NDCG@K under the implicit-feedback protocol:
//! every non-train item is a candidate, train items are masked out, ties are
//! broken by ascending item index.

use std::cmp::Ordering;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::Result;
use crate::interaction::InteractionMatrix;
use crate::scalar::Real;
use crate::spectral::{CompositeFilter, GramBank};

/// Scores of every item for user `u`; train items are set to `-inf`.
pub fn score_user<T: Real>(
    f: &CompositeFilter<T>,
    bank: &GramBank<T>,
    r: &InteractionMatrix,
    u: usize,
) -> Result<Vec<T>> {
    let x = r.user_signal::<T>(u);
    let mut scores = f.apply(bank, &x)?;
    for &i in r.user_items(u) {
        scores[i] = T::neg_infinity();
    }
    Ok(scores)
}

#[inline]
fn rank_order<T: Real>(scores: &[T], a: usize, b: usize) -> Ordering {
    scores[b]
        .as_f64()
        .total_cmp(&scores[a].as_f64())
        .then(a.cmp(&b))
}

/// Indices of the `k` best-scoring items, best first. Masked (`-inf`) items
/// are never returned. Uses partial selection, so the full list is not sorted.
pub fn top_k<T: Real>(scores: &[T], k: usize) -> Vec<usize> {
    if k == 0 {
        return Vec::new();
    }
    let mut cand: Vec<usize> = (0..scores.len())
        .filter(|&i| scores[i] != T::neg_infinity())
        .collect();
    if cand.len() > k {
        cand.select_nth_unstable_by(k - 1, |&a, &b| rank_order(scores, a, b));
        cand.truncate(k);
    }
    cand.sort_unstable_by(|&a, &b| rank_order(scores, a, b));
    cand
}

/// 0-based positions within the first `k` ranks that hit a test item.
fn hits<'a>(
    ranked: &'a [usize],
    test_items: &'a [usize],
    k: usize,
) -> impl Iterator<Item = usize> + 'a {
    ranked
        .iter()
        .take(k)
        .enumerate()
        .filter(move |(_, i)| test_items.contains(i))
        .map(|(p, _)| p)
}

/// `|top-k ∩ test| / |test|`.
pub fn recall_at_k(ranked: &[usize], test_items: &[usize], k: usize) -> f64 {
    if test_items.is_empty() {
        return 0.0;
    }
    hits(ranked, test_items, k).count() as f64 / test_items.len() as f64
}

/// Binary-relevance NDCG with `1/log2(p+1)` discount; the ideal DCG places
/// `min(|test|, k)` hits at the top.
/// NDCG@0 is 0.
pub fn ndcg_at_k(ranked: &[usize], test_items: &[usize], k: usize) -> f64 {
    if test_items.is_empty() || k == 0 {
        return 0.0;
    }
    let dcg: f64 = hits(ranked, test_items, k)
        .map(|p| 1.0 / ((p + 2) as f64).log2())
        .sum();
    let idcg: f64 = (0..test_items.len().min(k))
        .map(|p| 1.0 / ((p + 2) as f64).log2())
        .sum();
    dcg / idcg
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UserMetrics {
    pub user: usize,
    pub recall: f64,
    pub ndcg: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    pub k: usize,
    pub recall_at_k: f64,
    pub ndcg_at_k: f64,
    pub users_evaluated: usize,
    /// Users with test items but no train interactions, excluded from the means.
    pub cold_users: usize,
    pub per_user: Option<Vec<UserMetrics>>,
}

/// Machine-readable result file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub dataset: String,
    pub k: usize,
    pub recall: f64,
    pub ndcg: f64,
    pub users_evaluated: usize,
    pub config_hash: String,
}

impl EvalResult {
    pub fn report(&self, dataset: &str, config_hash: &str) -> EvalReport {
        EvalReport {
            dataset: dataset.to_string(),
            k: self.k,
            recall: self.recall_at_k,
            ndcg: self.ndcg_at_k,
            users_evaluated: self.users_evaluated,
            config_hash: config_hash.to_string(),
        }
    }

    pub fn write_per_user_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "user,recall,ndcg")?;
        for m in self.per_user.iter().flatten() {
            writeln!(w, "{},{},{}", m.user, m.recall, m.ndcg)?;
        }
        Ok(())
    }
}

/// Evaluates `f` on every user with a non-empty test set.
pub fn evaluate<T: Real>(
    f: &CompositeFilter<T>,
    dataset: &Dataset,
    k: usize,
) -> Result<EvalResult> {
    let bank = f.operators(&dataset.train)?;
    evaluate_with(f, &bank, dataset, k, false)
}

pub fn evaluate_with<T: Real>(
    f: &CompositeFilter<T>,
    bank: &GramBank<T>,
    dataset: &Dataset,
    k: usize,
    keep_per_user: bool,
) -> Result<EvalResult> {
    let r = &dataset.train;
    let users: Vec<usize> = (0..r.num_users())
        .filter(|&u| !dataset.test[u].is_empty())
        .collect();
    let cold_users = users.iter().filter(|&&u| r.user_degrees()[u] == 0).count();
    let per_user = users
        .par_iter()
        .filter(|&&u| r.user_degrees()[u] > 0)
        .map(|&u| {
            let scores = score_user(f, bank, r, u)?;
            let ranked = top_k(&scores, k);
            let test = &dataset.test[u];
            Ok(UserMetrics {
                user: u,
                recall: recall_at_k(&ranked, test, k),
                ndcg: ndcg_at_k(&ranked, test, k),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let count = per_user.len();
    let (recall, ndcg) = per_user
        .iter()
        .fold((0.0, 0.0), |(r, n), m| (r + m.recall, n + m.ndcg));
    let denom = count.max(1) as f64;
    Ok(EvalResult {
        k,
        recall_at_k: recall / denom,
        ndcg_at_k: ndcg / denom,
        users_evaluated: count,
        cold_users,
        per_user: keep_per_user.then_some(per_user),
    })
}
