//! Polynomial basis families on `[0, 1]`.
//!
//! Every family except Bernstein is a three-term recurrence
//! `P_k(x) = (a_k x + b_k) P_{k-1}(x) - c_k P_{k-2}(x)` written directly in
//! the Gram variable `x`, so the same coefficients drive both the scalar
//! evaluation and the operator form where `x` becomes a Gram matvec.
//! Chebyshev, Jacobi and Hermite are evaluated at `t = 2x - 1`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{PolyCfError, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisFamily {
    Monomial,
    Chebyshev,
    Bernstein,
    Jacobi,
    Hermite,
}

impl BasisFamily {
    pub const ALL: [BasisFamily; 5] = [
        BasisFamily::Monomial,
        BasisFamily::Chebyshev,
        BasisFamily::Bernstein,
        BasisFamily::Jacobi,
        BasisFamily::Hermite,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BasisFamily::Monomial => "monomial",
            BasisFamily::Chebyshev => "chebyshev",
            BasisFamily::Bernstein => "bernstein",
            BasisFamily::Jacobi => "jacobi",
            BasisFamily::Hermite => "hermite",
        }
    }
}

impl fmt::Display for BasisFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BasisFamily {
    type Err = PolyCfError;

    fn from_str(s: &str) -> Result<Self> {
        BasisFamily::ALL
            .into_iter()
            .find(|f| f.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| PolyCfError::invalid(format!("unknown basis family {s:?}")))
    }
}

/// A basis family plus its shape parameters (only Jacobi has any).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolyBasis {
    pub family: BasisFamily,
    pub jacobi_a: f64,
    pub jacobi_b: f64,
}

impl Default for PolyBasis {
    fn default() -> Self {
        Self::new(BasisFamily::Monomial)
    }
}

/// `P_k = (a x + b) P_{k-1} - c P_{k-2}`.
#[derive(Debug, Clone, Copy)]
struct Step {
    a: f64,
    b: f64,
    c: f64,
}

impl PolyBasis {
    pub fn new(family: BasisFamily) -> Self {
        Self {
            family,
            jacobi_a: 1.0,
            jacobi_b: 1.0,
        }
    }

    pub fn jacobi(a: f64, b: f64) -> Result<Self> {
        let basis = Self {
            family: BasisFamily::Jacobi,
            jacobi_a: a,
            jacobi_b: b,
        };
        basis.validate()?;
        Ok(basis)
    }

    pub fn validate(&self) -> Result<()> {
        if self.family == BasisFamily::Jacobi
            && !(self.jacobi_a > -1.0
                && self.jacobi_b > -1.0
                && self.jacobi_a.is_finite()
                && self.jacobi_b.is_finite())
        {
            return Err(PolyCfError::invalid(format!(
                "Jacobi parameters must exceed -1, got ({}, {})",
                self.jacobi_a, self.jacobi_b
            )));
        }
        Ok(())
    }

    /// Recurrence step producing `P_k` (k >= 1). `None` for Bernstein.
    fn step(&self, k: usize) -> Option<Step> {
        let kf = k as f64;
        let s = match self.family {
            BasisFamily::Monomial => Step {
                a: 1.0,
                b: 0.0,
                c: 0.0,
            },
            // T_1 = t, T_k = 2t T_{k-1} - T_{k-2}
            BasisFamily::Chebyshev if k == 1 => Step {
                a: 2.0,
                b: -1.0,
                c: 0.0,
            },
            BasisFamily::Chebyshev => Step {
                a: 4.0,
                b: -2.0,
                c: 1.0,
            },
            // He_k = t He_{k-1} - (k-1) He_{k-2}
            BasisFamily::Hermite => Step {
                a: 2.0,
                b: -1.0,
                c: kf - 1.0,
            },
            BasisFamily::Jacobi => {
                let (a, b) = (self.jacobi_a, self.jacobi_b);
                // coefficients in t, then substitute t = 2x - 1
                let (at, bt, c) = if k == 1 {
                    ((a + b + 2.0) / 2.0, (a - b) / 2.0, 0.0)
                } else {
                    let s = 2.0 * kf + a + b;
                    let denom = 2.0 * kf * (kf + a + b) * (s - 2.0);
                    (
                        (s - 1.0) * s * (s - 2.0) / denom,
                        (s - 1.0) * (a * a - b * b) / denom,
                        2.0 * (kf + a - 1.0) * (kf + b - 1.0) * s / denom,
                    )
                };
                Step {
                    a: 2.0 * at,
                    b: bt - at,
                    c,
                }
            }
            BasisFamily::Bernstein => return None,
        };
        Some(s)
    }

    /// `[P_0(x), ..., P_K(x)]`, with `x` clamped to `[0, 1]`.
    pub fn values<T: Real>(&self, order: usize, x: T) -> Vec<T> {
        let x = x.max(T::zero()).min(T::one());
        if self.family == BasisFamily::Bernstein {
            let one_minus = T::one() - x;
            return (0..=order)
                .map(|k| {
                    T::lit(binomial(order, k))
                        * x.powi(k as i32)
                        * one_minus.powi((order - k) as i32)
                })
                .collect();
        }
        let mut out = Vec::with_capacity(order + 1);
        out.push(T::one());
        for k in 1..=order {
            let s = self.step(k).expect("recurrence family");
            let prev2 = if k >= 2 { out[k - 2] } else { T::zero() };
            let v = (T::lit(s.a) * x + T::lit(s.b)) * out[k - 1] - T::lit(s.c) * prev2;
            out.push(v);
        }
        out
    }

    /// Operator form: returns `[P_0(G) x, ..., P_K(G) x]`, where `apply(src, dst)`
    /// writes `G src` into `dst`. Calls `apply` exactly `order` times.
    pub fn lift<T: Real>(
        &self,
        order: usize,
        x: &[T],
        mut apply: impl FnMut(&[T], &mut [T]) -> Result<()>,
    ) -> Result<Vec<Vec<T>>> {
        let n = x.len();
        if self.family == BasisFamily::Bernstein {
            let mut powers = Vec::with_capacity(order + 1);
            powers.push(x.to_vec());
            for j in 1..=order {
                let mut next = vec![T::zero(); n];
                apply(&powers[j - 1], &mut next)?;
                powers.push(next);
            }
            let out = (0..=order)
                .map(|k| {
                    let mut acc = vec![T::zero(); n];
                    for (j, pw) in powers.iter().enumerate().skip(k) {
                        let coef = bernstein_monomial_coef(order, k, j);
                        crate::scalar::axpy(T::lit(coef), pw, &mut acc);
                    }
                    acc
                })
                .collect();
            return Ok(out);
        }
        let mut out: Vec<Vec<T>> = Vec::with_capacity(order + 1);
        out.push(x.to_vec());
        let mut gx = vec![T::zero(); n];
        for k in 1..=order {
            let s = self.step(k).expect("recurrence family");
            apply(&out[k - 1], &mut gx)?;
            let (a, b, c) = (T::lit(s.a), T::lit(s.b), T::lit(s.c));
            let prev = &out[k - 1];
            let next: Vec<T> = if k >= 2 {
                let prev2 = &out[k - 2];
                (0..n)
                    .map(|i| a * gx[i] + b * prev[i] - c * prev2[i])
                    .collect()
            } else {
                (0..n).map(|i| a * gx[i] + b * prev[i]).collect()
            };
            out.push(next);
        }
        Ok(out)
    }
}

/// Scalar evaluation `[P_0(x), ..., P_K(x)]`.
///
/// The order is signed so that callers passing user input get an error
/// rather than a wrap-around.
pub fn basis_values<T: Real>(basis: &PolyBasis, order: i64, x: T) -> Result<Vec<T>> {
    if order < 0 {
        return Err(PolyCfError::invalid(format!(
            "polynomial order {order} < 0"
        )));
    }
    basis.validate()?;
    Ok(basis.values(order as usize, x))
}

pub(crate) fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Coefficient of `x^j` in `B_{k,K}(x) = C(K,k) x^k (1-x)^{K-k}`.
fn bernstein_monomial_coef(order: usize, k: usize, j: usize) -> f64 {
    let sign = if (j - k) % 2 == 0 { 1.0 } else { -1.0 };
    sign * binomial(order, k) * binomial(order - k, j - k)
}
