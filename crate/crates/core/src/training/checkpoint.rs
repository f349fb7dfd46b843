use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{PolyCfError, Result};
use crate::scalar::Real;
use crate::spectral::{
    BasisFamily, CoefTable, CompositeFilter, LowPassProjector, PolyBasis, PolynomialKernel,
};

pub const CHECKPOINT_VERSION: u32 = 1;

fn one() -> f64 {
    1.0
}

/// Trained kernel plus the settings needed to rebuild its projector. The
/// projector itself lives in the binary SVD cache.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub basis: BasisFamily,
    #[serde(rename = "K")]
    pub order: usize,
    pub gammas: Vec<f64>,
    pub theta: Vec<Vec<f64>>,
    pub omega: f64,
    pub svd_cutoff: usize,
    pub svd_seed: u64,
    pub dataset_hash: String,
    #[serde(default = "one")]
    pub jacobi_a: f64,
    #[serde(default = "one")]
    pub jacobi_b: f64,
}

impl Checkpoint {
    pub fn from_filter<T: Real>(f: &CompositeFilter<T>, svd_seed: u64, dataset_hash: &str) -> Self {
        let k = &f.kernel;
        Self {
            version: CHECKPOINT_VERSION,
            basis: k.basis.family,
            order: k.order,
            gammas: k.gammas.iter().map(|g| g.as_f64()).collect(),
            theta: k.theta.cast::<f64>().to_rows(),
            omega: f.omega.as_f64(),
            svd_cutoff: f.low_pass.as_ref().map_or(0, LowPassProjector::cutoff),
            svd_seed,
            dataset_hash: dataset_hash.to_string(),
            jacobi_a: k.basis.jacobi_a,
            jacobi_b: k.basis.jacobi_b,
        }
    }

    pub fn poly_basis(&self) -> PolyBasis {
        PolyBasis {
            family: self.basis,
            jacobi_a: self.jacobi_a,
            jacobi_b: self.jacobi_b,
        }
    }

    pub fn kernel<T: Real>(&self) -> Result<PolynomialKernel<T>> {
        if self.version != CHECKPOINT_VERSION {
            return Err(PolyCfError::Incompatible(format!(
                "unsupported version {}",
                self.version
            )));
        }
        let rows: Vec<Vec<T>> = self
            .theta
            .iter()
            .map(|row| row.iter().map(|&v| T::lit(v)).collect())
            .collect();
        let theta = CoefTable::from_rows(&rows)?;
        PolynomialKernel::new(
            self.poly_basis(),
            self.order,
            self.gammas.iter().map(|&g| T::lit(g)).collect(),
            theta,
        )
    }

    /// Rebuilds the filter around a projector built for the target data.
    pub fn filter<T: Real>(
        &self,
        low_pass: Option<LowPassProjector<T>>,
    ) -> Result<CompositeFilter<T>> {
        if let Some(p) = &low_pass {
            if p.cutoff() != self.svd_cutoff {
                return Err(PolyCfError::Incompatible(format!(
                    "projector cutoff {} differs from checkpoint cutoff {}",
                    p.cutoff(),
                    self.svd_cutoff
                )));
            }
        }
        CompositeFilter::new(self.kernel()?, low_pass, T::lit(self.omega))
    }

    /// Errors unless basis and order match; the coefficients are never reshaped.
    pub fn check_compatible(&self, basis: PolyBasis, order: usize) -> Result<()> {
        if self.poly_basis() != basis || self.order != order {
            return Err(PolyCfError::Incompatible(format!(
                "checkpoint has {} K={}, expected {} K={}",
                self.basis, self.order, basis.family, order
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()?).map_err(|e| PolyCfError::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| PolyCfError::io(path, e))?;
        Self::from_json(&text)
    }
}
