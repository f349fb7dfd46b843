use std::sync::atomic::{AtomicUsize, Ordering};

use crate::error::{check_len, Result};
use crate::interaction::{normalized_interaction, InteractionMatrix, NormalizedFactors};
use crate::scalar::Real;

/// Implicit generalized Gram operator `G^(gamma)`, applied as two sparse
/// matvecs through the user dimension. The `n x n` matrix is never formed.
#[derive(Debug)]
pub struct GramOperator<T> {
    factors: NormalizedFactors<T>,
    applications: AtomicUsize,
}

impl<T: Real> GramOperator<T> {
    pub fn new(r: &InteractionMatrix, gamma: T) -> Result<Self> {
        Ok(Self {
            factors: normalized_interaction(r, gamma)?,
            applications: AtomicUsize::new(0),
        })
    }

    pub fn gamma(&self) -> T {
        self.factors.gamma
    }

    pub fn num_items(&self) -> usize {
        self.factors.right.cols()
    }

    pub fn factors(&self) -> &NormalizedFactors<T> {
        &self.factors
    }

    /// Number of operator applications since construction or the last reset.
    pub fn applications(&self) -> usize {
        self.applications.load(Ordering::Relaxed)
    }

    pub fn reset_applications(&self) {
        self.applications.store(0, Ordering::Relaxed);
    }

    /// `out = G^(gamma) x`.
    pub fn apply_into(&self, x: &[T], out: &mut [T]) -> Result<()> {
        let n = self.num_items();
        check_len(n, x.len())?;
        check_len(n, out.len())?;
        self.applications.fetch_add(1, Ordering::Relaxed);
        let mid = self.factors.right.matvec(x);
        self.factors.left.matvec_into(&mid, out);
        Ok(())
    }

    pub fn apply(&self, x: &[T]) -> Result<Vec<T>> {
        let mut out = vec![T::zero(); self.num_items()];
        self.apply_into(x, &mut out)?;
        Ok(out)
    }
}

/// `G^(gamma) x` for a one-off product.
pub fn apply_gram<T: Real>(op: &GramOperator<T>, x: &[T]) -> Result<Vec<T>> {
    op.apply(x)
}
