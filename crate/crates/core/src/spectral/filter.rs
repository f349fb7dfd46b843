use crate::error::{check_len, PolyCfError, Result};
use crate::interaction::InteractionMatrix;
use crate::scalar::{axpy, Real};
use crate::spectral::kernel::{BasisSignals, CoefTable, GramBank, PolynomialKernel};
use crate::spectral::lowpass::LowPassProjector;

/// Deployable filter `H_g = H_P + omega * V_s V_s^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositeFilter<T> {
    pub kernel: PolynomialKernel<T>,
    pub low_pass: Option<LowPassProjector<T>>,
    pub omega: T,
}

impl<T: Real> CompositeFilter<T> {
    pub fn new(
        kernel: PolynomialKernel<T>,
        low_pass: Option<LowPassProjector<T>>,
        omega: T,
    ) -> Result<Self> {
        if !(omega.as_f64() >= 0.0) || !omega.is_finite() {
            return Err(PolyCfError::invalid(format!(
                "omega must be finite and >= 0, got {omega}"
            )));
        }
        Ok(Self {
            kernel,
            low_pass,
            omega,
        })
    }

    pub fn kernel_only(kernel: PolynomialKernel<T>) -> Self {
        Self {
            kernel,
            low_pass: None,
            omega: T::zero(),
        }
    }

    pub fn operators(&self, r: &InteractionMatrix) -> Result<GramBank<T>> {
        self.kernel.operators(r)
    }

    /// `omega * V_s V_s^T x`, or `None` when the low-pass term is inactive.
    pub fn low_pass_term(&self, x: &[T]) -> Result<Option<Vec<T>>> {
        match &self.low_pass {
            Some(p) if self.omega != T::zero() && p.cutoff() > 0 => {
                let mut y = p.apply(x)?;
                y.iter_mut().for_each(|v| *v = *v * self.omega);
                Ok(Some(y))
            }
            _ => Ok(None),
        }
    }

    /// Combines precomputed basis signals of `x` under `theta`, adding the
    /// low-pass term of the same `x`.
    pub fn output_from_signals(
        &self,
        theta: &CoefTable<T>,
        signals: &BasisSignals<T>,
        x: &[T],
    ) -> Result<Vec<T>> {
        let mut out = PolynomialKernel::combine(theta, signals);
        if let Some(lp) = self.low_pass_term(x)? {
            axpy(T::one(), &lp, &mut out);
        }
        Ok(out)
    }

    /// `H_g x` via the factored sparse path.
    pub fn apply(&self, bank: &GramBank<T>, x: &[T]) -> Result<Vec<T>> {
        if let Some(p) = &self.low_pass {
            check_len(p.num_items(), x.len())?;
        }
        let signals = self.kernel.basis_signals(bank, x)?;
        self.output_from_signals(&self.kernel.theta, &signals, x)
    }

    /// Multiplies theta and omega by `c` (rankings are invariant for `c > 0`).
    pub fn scaled(&self, c: T) -> Self {
        let mut out = self.clone();
        out.kernel.theta.scale(c);
        out.omega = out.omega * c;
        out
    }
}

/// One-shot `H_g x`; builds the Gram operators for this call.
pub fn apply_composite<T: Real>(
    f: &CompositeFilter<T>,
    r: &InteractionMatrix,
    x: &[T],
) -> Result<Vec<T>> {
    let bank = f.operators(r)?;
    f.apply(&bank, x)
}
