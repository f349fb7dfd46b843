//! The trainable polynomial kernel over a set of generalized Gram operators.

use std::io::Write;

use crate::error::{check_len, PolyCfError, Result};
use crate::interaction::InteractionMatrix;
use crate::scalar::{axpy, Real};
use crate::spectral::basis::PolyBasis;
use crate::spectral::gram::GramOperator;

/// Dense `|Gamma| x (K+1)` table, used for coefficients and their gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefTable<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> CoefTable<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.is_empty() || cols == 0 || rows.iter().any(|r| r.len() != cols) {
            return Err(PolyCfError::invalid(
                "coefficient table must be a non-empty rectangle",
            ));
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn get(&self, g: usize, k: usize) -> T {
        self.data[g * self.cols + k]
    }

    #[inline]
    pub fn set(&mut self, g: usize, k: usize, v: T) {
        self.data[g * self.cols + k] = v;
    }

    pub fn row(&self, g: usize) -> &[T] {
        &self.data[g * self.cols..(g + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        self.data.chunks(self.cols).map(<[T]>::to_vec).collect()
    }

    pub fn fill(&mut self, v: T) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    /// `self += alpha * other`.
    pub fn add_scaled(&mut self, alpha: T, other: &CoefTable<T>) {
        assert_eq!(self.shape(), other.shape());
        axpy(alpha, &other.data, &mut self.data);
    }

    pub fn scale(&mut self, alpha: T) {
        self.data.iter_mut().for_each(|x| *x = *x * alpha);
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, x| m.max(x.abs()))
    }

    pub fn cast<U: Real>(&self) -> CoefTable<U> {
        CoefTable {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| U::lit(x.as_f64())).collect(),
        }
    }
}

/// `H_P = (1/|Gamma|) sum_gamma sum_k theta[gamma][k] P_k(G^(gamma))`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialKernel<T> {
    pub basis: PolyBasis,
    pub order: usize,
    pub gammas: Vec<T>,
    pub theta: CoefTable<T>,
}

impl<T: Real> PolynomialKernel<T> {
    pub fn new(
        basis: PolyBasis,
        order: usize,
        gammas: Vec<T>,
        theta: CoefTable<T>,
    ) -> Result<Self> {
        let kernel = Self {
            basis,
            order,
            gammas,
            theta,
        };
        kernel.validate()?;
        Ok(kernel)
    }

    /// `theta[.][0] = 1`, zero elsewhere.
    pub fn identity(basis: PolyBasis, order: usize, gammas: Vec<T>) -> Result<Self> {
        let mut theta = CoefTable::zeros(gammas.len(), order + 1);
        for g in 0..gammas.len() {
            theta.set(g, 0, T::one());
        }
        Self::new(basis, order, gammas, theta)
    }

    pub fn zero(basis: PolyBasis, order: usize, gammas: Vec<T>) -> Result<Self> {
        let theta = CoefTable::zeros(gammas.len(), order + 1);
        Self::new(basis, order, gammas, theta)
    }

    pub fn validate(&self) -> Result<()> {
        self.basis.validate()?;
        if self.gammas.is_empty() {
            return Err(PolyCfError::invalid("normalization set must be non-empty"));
        }
        if let Some(g) = self
            .gammas
            .iter()
            .find(|g| !(g.as_f64() >= 0.0 && g.as_f64() <= 1.0))
        {
            return Err(PolyCfError::invalid(format!("gamma {g} outside [0, 1]")));
        }
        if self.theta.shape() != (self.gammas.len(), self.order + 1) {
            return Err(PolyCfError::invalid(format!(
                "theta shape {:?} does not match (|Gamma|, K+1) = ({}, {})",
                self.theta.shape(),
                self.gammas.len(),
                self.order + 1
            )));
        }
        if !self.theta.is_finite() {
            return Err(PolyCfError::invalid("theta has non-finite entries"));
        }
        Ok(())
    }

    pub fn num_gammas(&self) -> usize {
        self.gammas.len()
    }

    /// Builds one Gram operator per gamma.
    pub fn operators(&self, r: &InteractionMatrix) -> Result<GramBank<T>> {
        GramBank::new(r, &self.gammas)
    }

    /// `b[gamma][k] = P_k(G^(gamma)) x`; exactly `order` Gram applications per gamma.
    pub fn basis_signals(&self, bank: &GramBank<T>, x: &[T]) -> Result<BasisSignals<T>> {
        check_len(self.gammas.len(), bank.ops.len())?;
        let per_gamma = bank
            .ops
            .iter()
            .map(|op| {
                check_len(op.num_items(), x.len())?;
                self.basis
                    .lift(self.order, x, |src, dst| op.apply_into(src, dst))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(BasisSignals { per_gamma })
    }

    /// `(1/|Gamma|) sum theta[g][k] b[g][k]` for an arbitrary coefficient table.
    pub fn combine(theta: &CoefTable<T>, signals: &BasisSignals<T>) -> Vec<T> {
        let n = signals.num_items();
        let scale = T::one() / T::from_usize_lossy(signals.per_gamma.len());
        let mut out = vec![T::zero(); n];
        for (g, row) in signals.per_gamma.iter().enumerate() {
            for (k, b) in row.iter().enumerate() {
                let c = theta.get(g, k);
                if c != T::zero() {
                    axpy(c * scale, b, &mut out);
                }
            }
        }
        out
    }

    /// Per-gamma response `h(lambda) = sum_k theta[g][k] P_k(1 - lambda)` on a
    /// uniform grid over `[0, 1]`, plus the gamma-average.
    pub fn response_curve(&self, num_points: usize) -> Result<ResponseCurve<T>> {
        if num_points < 2 {
            return Err(PolyCfError::invalid(
                "response curve needs at least 2 points",
            ));
        }
        let lambdas: Vec<T> = (0..num_points)
            .map(|i| T::from_usize_lossy(i) / T::from_usize_lossy(num_points - 1))
            .collect();
        let per_gamma: Vec<Vec<T>> = (0..self.gammas.len())
            .map(|g| {
                lambdas
                    .iter()
                    .map(|&l| {
                        let p = self.basis.values(self.order, T::one() - l);
                        p.iter()
                            .zip(self.theta.row(g))
                            .map(|(&pk, &t)| pk * t)
                            .sum()
                    })
                    .collect()
            })
            .collect();
        let scale = T::one() / T::from_usize_lossy(self.gammas.len());
        let total = (0..num_points)
            .map(|i| per_gamma.iter().map(|row| row[i]).sum::<T>() * scale)
            .collect();
        Ok(ResponseCurve {
            gammas: self.gammas.clone(),
            lambdas,
            per_gamma,
            total,
        })
    }
}

/// One Gram operator per gamma of a kernel, built once and reused.
#[derive(Debug)]
pub struct GramBank<T> {
    pub ops: Vec<GramOperator<T>>,
}

impl<T: Real> GramBank<T> {
    pub fn new(r: &InteractionMatrix, gammas: &[T]) -> Result<Self> {
        let ops = gammas
            .iter()
            .map(|&g| GramOperator::new(r, g))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { ops })
    }

    pub fn applications(&self) -> usize {
        self.ops.iter().map(GramOperator::applications).sum()
    }

    pub fn reset_applications(&self) {
        self.ops.iter().for_each(GramOperator::reset_applications);
    }
}

/// Table of basis signals `b[gamma][k]`, each an item-length vector.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisSignals<T> {
    pub per_gamma: Vec<Vec<Vec<T>>>,
}

impl<T: Real> BasisSignals<T> {
    pub fn get(&self, g: usize, k: usize) -> &[T] {
        &self.per_gamma[g][k]
    }

    pub fn num_items(&self) -> usize {
        self.per_gamma
            .first()
            .and_then(|r| r.first())
            .map_or(0, Vec::len)
    }
}

/// Convenience form that builds the operators on the fly.
pub fn basis_signals<T: Real>(
    kernel: &PolynomialKernel<T>,
    r: &InteractionMatrix,
    x: &[T],
) -> Result<BasisSignals<T>> {
    let bank = kernel.operators(r)?;
    kernel.basis_signals(&bank, x)
}

#[derive(Debug, Clone)]
pub struct ResponseCurve<T> {
    pub gammas: Vec<T>,
    pub lambdas: Vec<T>,
    pub per_gamma: Vec<Vec<T>>,
    pub total: Vec<T>,
}

impl<T: Real> ResponseCurve<T> {
    /// CSV with header `lambda,gamma,response,total`, one row per (gamma, lambda).
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "lambda,gamma,response,total")?;
        for (g, gamma) in self.gammas.iter().enumerate() {
            for (i, lambda) in self.lambdas.iter().enumerate() {
                writeln!(
                    w,
                    "{},{},{},{}",
                    lambda.as_f64(),
                    gamma.as_f64(),
                    self.per_gamma[g][i].as_f64(),
                    self.total[i].as_f64()
                )?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::basis::BasisFamily;

    fn toy() -> InteractionMatrix {
        InteractionMatrix::from_dense(&[vec![1, 1, 0, 1], vec![0, 1, 1, 0], vec![1, 0, 1, 1]])
            .unwrap()
    }

    #[test]
    fn monomial_signals_are_powers() {
        let r = toy();
        let kernel =
            PolynomialKernel::identity(PolyBasis::new(BasisFamily::Monomial), 3, vec![0.3, 0.7])
                .unwrap();
        let bank = kernel.operators(&r).unwrap();
        let x: Vec<f64> = vec![0.2, -1.0, 0.5, 2.0];
        let b = kernel.basis_signals(&bank, &x).unwrap();
        assert_eq!(bank.applications(), 2 * 3);
        for (g, op) in bank.ops.iter().enumerate() {
            assert_eq!(b.get(g, 0), &x[..]);
            let mut p = x.clone();
            for k in 1..=3 {
                p = op.apply(&p).unwrap();
                for (a, e) in b.get(g, k).iter().zip(&p) {
                    assert!((a - e).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn chebyshev_first_signal() {
        let r = toy();
        let kernel =
            PolynomialKernel::identity(PolyBasis::new(BasisFamily::Chebyshev), 2, vec![0.5])
                .unwrap();
        let bank = kernel.operators(&r).unwrap();
        let x: Vec<f64> = vec![1.0, 0.0, -0.5, 0.25];
        let b = kernel.basis_signals(&bank, &x).unwrap();
        let gx = bank.ops[0].apply(&x).unwrap();
        for i in 0..4 {
            assert!((b.get(0, 1)[i] - (2.0 * gx[i] - x[i])).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_signal_stays_zero() {
        let r = toy();
        for fam in BasisFamily::ALL {
            let kernel = PolynomialKernel::identity(PolyBasis::new(fam), 4, vec![0.4]).unwrap();
            let b = basis_signals(&kernel, &r, &[0.0; 4]).unwrap();
            assert!(b.per_gamma[0].iter().flatten().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn validation_catches_shape_and_gamma() {
        let basis = PolyBasis::default();
        assert!(PolynomialKernel::<f64>::identity(basis, 2, vec![]).is_err());
        assert!(PolynomialKernel::identity(basis, 2, vec![1.2]).is_err());
        let theta = CoefTable::zeros(2, 2);
        assert!(PolynomialKernel::new(basis, 2, vec![0.5, 0.6], theta).is_err());
        let mut theta = CoefTable::zeros(1, 3);
        theta.set(0, 1, f64::NAN);
        assert!(PolynomialKernel::new(basis, 2, vec![0.5], theta).is_err());
    }

    #[test]
    fn identity_response_is_flat() {
        let k = PolynomialKernel::identity(PolyBasis::default(), 4, vec![0.5, 0.2]).unwrap();
        let c = k.response_curve(11).unwrap();
        assert!(c.total.iter().all(|&v| (v - 1.0f64).abs() < 1e-15));
    }

    #[test]
    fn linear_response_decreases() {
        let theta = CoefTable::<f64>::from_rows(&[vec![0.0, 1.0, 0.0]]).unwrap();
        let k = PolynomialKernel::new(PolyBasis::default(), 2, vec![0.5], theta).unwrap();
        let c = k.response_curve(5).unwrap();
        for (l, h) in c.lambdas.iter().zip(&c.per_gamma[0]) {
            assert!((h - (1.0 - l)).abs() < 1e-15);
        }
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("lambda,gamma,response,total\n"));
        assert_eq!(text.lines().count(), 6);
        assert!(k.response_curve(1).is_err());
    }
}
