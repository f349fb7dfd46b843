use rand::Rng;

use crate::error::{PolyCfError, Result};
use crate::scalar::Real;
use crate::spectral::CoefTable;

/// Inverted-dropout mask: each entry is `0` with probability `rate`, else
/// `1 / (1 - rate)`.
pub fn dropout_mask<T: Real, R: Rng + ?Sized>(
    rows: usize,
    cols: usize,
    rate: f64,
    rng: &mut R,
) -> Result<CoefTable<T>> {
    if !(0.0..1.0).contains(&rate) {
        return Err(PolyCfError::invalid(format!(
            "dropout rate {rate} outside [0, 1)"
        )));
    }
    let mut mask = CoefTable::zeros(rows, cols);
    let keep = T::lit(1.0 / (1.0 - rate));
    for v in mask.as_mut_slice() {
        *v = if rate > 0.0 && rng.random::<f64>() < rate {
            T::zero()
        } else {
            keep
        };
    }
    Ok(mask)
}

/// `theta` with a fresh dropout mask applied (training forward passes only).
pub fn apply_kernel_dropout<T: Real, R: Rng + ?Sized>(
    theta: &CoefTable<T>,
    rate: f64,
    rng: &mut R,
) -> Result<CoefTable<T>> {
    let (rows, cols) = theta.shape();
    let mask = dropout_mask::<T, R>(rows, cols, rate, rng)?;
    Ok(hadamard(theta, &mask))
}

pub(crate) fn hadamard<T: Real>(a: &CoefTable<T>, b: &CoefTable<T>) -> CoefTable<T> {
    let mut out = a.clone();
    for (x, &y) in out.as_mut_slice().iter_mut().zip(b.as_slice()) {
        *x = *x * y;
    }
    out
}
