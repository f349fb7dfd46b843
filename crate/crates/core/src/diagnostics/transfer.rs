//! Applying coefficients trained on one dataset to another.

use log::warn;
use serde::Serialize;

use crate::dataset::Dataset;
use crate::error::Result;
use crate::evaluation::{evaluate_with, EvalResult};
use crate::spectral::{CompositeFilter, LowPassProjector, PolyBasis};
use crate::training::{Checkpoint, FilterSpec, KernelInit};

#[derive(Debug, Clone)]
pub struct TransferOptions {
    pub k: usize,
    /// Basis and order the caller expects; a mismatch is an error.
    pub expected: Option<(PolyBasis, usize)>,
    pub baseline_seeds: Vec<u64>,
    pub init_jitter: f64,
}

impl Default for TransferOptions {
    fn default() -> Self {
        Self {
            k: 20,
            expected: None,
            baseline_seeds: (0..5).collect(),
            init_jitter: 0.1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TransferResult {
    pub transferred: EvalResult,
    /// Baseline averaged over the random initializations.
    pub random_init: EvalResult,
    pub baseline_runs: Vec<EvalResult>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TransferReport {
    pub transferred_recall: f64,
    pub transferred_ndcg: f64,
    pub random_recall: f64,
    pub random_ndcg: f64,
    pub relative_improvement_recall: f64,
    pub relative_improvement_ndcg: f64,
}

fn relative(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        if a == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (a - b) / b
    }
}

impl TransferResult {
    pub fn report(&self) -> TransferReport {
        TransferReport {
            transferred_recall: self.transferred.recall_at_k,
            transferred_ndcg: self.transferred.ndcg_at_k,
            random_recall: self.random_init.recall_at_k,
            random_ndcg: self.random_init.ndcg_at_k,
            relative_improvement_recall: relative(
                self.transferred.recall_at_k,
                self.random_init.recall_at_k,
            ),
            relative_improvement_ndcg: relative(
                self.transferred.ndcg_at_k,
                self.random_init.ndcg_at_k,
            ),
        }
    }
}

/// Evaluates the checkpoint's kernel on `target`, with `low_pass` built from
/// the target itself, against jittered-identity kernels of the same shape.
pub fn transfer_kernel(
    checkpoint: &Checkpoint,
    target: &Dataset,
    low_pass: Option<LowPassProjector<f64>>,
    opts: &TransferOptions,
) -> Result<TransferResult> {
    if let Some((basis, order)) = opts.expected {
        checkpoint.check_compatible(basis, order)?;
    }
    let hash = target.content_hash();
    if checkpoint.dataset_hash != hash {
        warn!(
            "checkpoint was trained on dataset {} but target is {hash}; transferring",
            checkpoint.dataset_hash
        );
    }
    let filter: CompositeFilter<f64> = checkpoint.filter(low_pass.clone())?;
    let bank = filter.operators(&target.train)?;
    let transferred = evaluate_with(&filter, &bank, target, opts.k, false)?;

    let spec = FilterSpec {
        basis: checkpoint.poly_basis(),
        order: checkpoint.order,
        gammas: checkpoint.gammas.clone(),
        omega: checkpoint.omega,
        low_pass,
        init: KernelInit::JitteredIdentity,
        trainable: false,
    };
    let mut runs = Vec::with_capacity(opts.baseline_seeds.len());
    for &seed in &opts.baseline_seeds {
        let f = spec.initial_filter(opts.init_jitter, seed)?;
        runs.push(evaluate_with(&f, &bank, target, opts.k, false)?);
    }
    let count = runs.len().max(1) as f64;
    let random_init = EvalResult {
        k: opts.k,
        recall_at_k: runs.iter().map(|r| r.recall_at_k).sum::<f64>() / count,
        ndcg_at_k: runs.iter().map(|r| r.ndcg_at_k).sum::<f64>() / count,
        users_evaluated: transferred.users_evaluated,
        cold_users: transferred.cold_users,
        per_user: None,
    };
    Ok(TransferResult {
        transferred,
        random_init,
        baseline_runs: runs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::PolyCfError;
    use crate::evaluation::evaluate;
    use crate::spectral::{BasisFamily, PolyBasis, PolynomialKernel};
    use crate::synthetic::{block_dataset, BlockConfig};

    #[test]
    fn self_transfer_matches_native() {
        let ds = block_dataset(&BlockConfig {
            users: 40,
            items: 30,
            ..Default::default()
        })
        .unwrap();
        let kernel =
            PolynomialKernel::identity(PolyBasis::new(BasisFamily::Chebyshev), 2, vec![0.4, 0.6])
                .unwrap();
        let mut f = CompositeFilter::kernel_only(kernel);
        f.kernel.theta.set(0, 2, 0.3);
        let ckpt = Checkpoint::from_filter(&f, 0, &ds.content_hash());
        let res = transfer_kernel(&ckpt, &ds, None, &TransferOptions::default()).unwrap();
        let native = evaluate(&f, &ds, 20).unwrap();
        assert_eq!(res.transferred, native);
        assert_eq!(res.baseline_runs.len(), 5);
    }

    #[test]
    fn order_mismatch_is_an_error() {
        let ds = block_dataset(&BlockConfig {
            users: 20,
            items: 20,
            ..Default::default()
        })
        .unwrap();
        let kernel =
            PolynomialKernel::identity(PolyBasis::new(BasisFamily::Monomial), 2, vec![0.5])
                .unwrap();
        let ckpt = Checkpoint::from_filter(&CompositeFilter::kernel_only(kernel), 0, "x");
        let opts = TransferOptions {
            expected: Some((PolyBasis::new(BasisFamily::Monomial), 3)),
            ..Default::default()
        };
        assert!(matches!(
            transfer_kernel(&ckpt, &ds, None, &opts),
            Err(PolyCfError::Incompatible(_))
        ));
    }
}
