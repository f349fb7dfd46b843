//! Reduced configurations used to measure what each filter component adds.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::PolyCfError;
use crate::scalar::Real;
use crate::spectral::{BasisFamily, CoefTable, PolyBasis};
use crate::training::{FilterSpec, KernelInit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AblationVariant {
    /// Low-pass term only: zero kernel, frozen.
    #[serde(rename = "WO_Poly")]
    WoPoly,
    /// A fixed first-order Gram in place of the learned polynomial.
    #[serde(rename = "WO_Kernel")]
    WoKernel,
    /// Symmetric normalization only, `Gamma = {1/2}`.
    #[serde(rename = "WO_Norm")]
    WoNorm,
    /// Polynomial only, `omega = 0`.
    #[serde(rename = "WO_Low")]
    WoLow,
    Full,
}

impl AblationVariant {
    pub const ALL: [AblationVariant; 5] = [
        Self::WoPoly,
        Self::WoKernel,
        Self::WoNorm,
        Self::WoLow,
        Self::Full,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::WoPoly => "WO_Poly",
            Self::WoKernel => "WO_Kernel",
            Self::WoNorm => "WO_Norm",
            Self::WoLow => "WO_Low",
            Self::Full => "Full",
        }
    }
}

impl fmt::Display for AblationVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AblationVariant {
    type Err = PolyCfError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|v| {
                v.name().eq_ignore_ascii_case(s)
                    || v.name().replace('_', "").eq_ignore_ascii_case(s)
            })
            .ok_or_else(|| PolyCfError::invalid(format!("unknown ablation variant {s:?}")))
    }
}

/// Derives the filter spec of `variant` from `base`.
pub fn build_ablation<T: Real>(variant: AblationVariant, base: &FilterSpec<T>) -> FilterSpec<T> {
    let mut spec = base.clone();
    match variant {
        AblationVariant::Full => {}
        AblationVariant::WoLow => spec.omega = T::zero(),
        AblationVariant::WoPoly => {
            spec.init = KernelInit::Fixed(CoefTable::zeros(base.gammas.len(), base.order + 1));
            spec.trainable = false;
        }
        AblationVariant::WoKernel => {
            let mut theta = CoefTable::zeros(base.gammas.len(), 2);
            for g in 0..base.gammas.len() {
                theta.set(g, 1, T::one());
            }
            spec.basis = PolyBasis::new(BasisFamily::Monomial);
            spec.order = 1;
            spec.init = KernelInit::Fixed(theta);
            spec.trainable = false;
        }
        AblationVariant::WoNorm => {
            spec.gammas = vec![T::lit(0.5)];
            if let KernelInit::Fixed(theta) = &base.init {
                // Average the per-gamma rows so the overall scale is kept.
                let (rows, cols) = theta.shape();
                let mut row = CoefTable::zeros(1, cols);
                for k in 0..cols {
                    let sum: T = (0..rows).map(|g| theta.get(g, k)).sum();
                    row.set(0, k, sum / T::from_usize_lossy(rows));
                }
                spec.init = KernelInit::Fixed(row);
            }
        }
    }
    spec
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interaction::InteractionMatrix;
    use crate::spectral::{apply_composite, apply_low_pass, truncated_svd};

    fn base(r: &InteractionMatrix) -> FilterSpec<f64> {
        FilterSpec {
            basis: PolyBasis::new(BasisFamily::Jacobi),
            order: 3,
            gammas: vec![0.3, 0.5, 0.7],
            omega: 0.4,
            low_pass: Some(truncated_svd(r, 2, 1).unwrap()),
            init: KernelInit::JitteredIdentity,
            trainable: true,
        }
    }

    fn sample() -> InteractionMatrix {
        InteractionMatrix::from_dense(&[
            vec![1, 1, 0, 0],
            vec![0, 1, 1, 0],
            vec![1, 0, 0, 1],
            vec![0, 0, 1, 1],
        ])
        .unwrap()
    }

    #[test]
    fn wo_low_is_kernel_only() {
        let r = sample();
        let spec = build_ablation(AblationVariant::WoLow, &base(&r));
        let f = spec.initial_filter(0.1, 3).unwrap();
        let x = r.user_signal::<f64>(1);
        let plain = crate::spectral::CompositeFilter::kernel_only(f.kernel.clone());
        assert_eq!(
            apply_composite(&f, &r, &x).unwrap(),
            apply_composite(&plain, &r, &x).unwrap()
        );
    }

    #[test]
    fn wo_poly_is_scaled_projection() {
        let r = sample();
        let b = base(&r);
        let spec = build_ablation(AblationVariant::WoPoly, &b);
        assert!(!spec.trainable);
        let f = spec.initial_filter(0.1, 3).unwrap();
        let x = r.user_signal::<f64>(2);
        let proj = apply_low_pass(b.low_pass.as_ref().unwrap(), &x).unwrap();
        let out = apply_composite(&f, &r, &x).unwrap();
        for (a, p) in out.iter().zip(&proj) {
            assert!((a - 0.4 * p).abs() < 1e-15);
        }
    }

    #[test]
    fn variant_shapes() {
        let r = sample();
        let b = base(&r);
        let k = build_ablation(AblationVariant::WoKernel, &b);
        assert_eq!((k.order, k.basis.family), (1, BasisFamily::Monomial));
        let n = build_ablation(AblationVariant::WoNorm, &b);
        assert_eq!(n.gammas, vec![0.5]);
        assert_eq!(build_ablation(AblationVariant::Full, &b), b);
        assert_eq!(
            "wo_norm".parse::<AblationVariant>().unwrap(),
            AblationVariant::WoNorm
        );
    }
}
