//! Graph-smoothness and BPR objectives with closed-form coefficient gradients.
//!
//! The filter output is linear in theta, so for any loss `L(r*)` the gradient
//! is `dL/dtheta[g][k] = (1/|Gamma|) <dL/dr*, b[g][k]>` with `b` the basis
//! signals of the filter input.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{PolyCfError, Result};
use crate::interaction::InteractionMatrix;
use crate::scalar::{dot, Real};
use crate::spectral::{BasisSignals, CoefTable, CompositeFilter, GramBank, GramOperator};
use crate::training::sampling::Triple;

/// Everything the objectives need besides the coefficients being evaluated.
#[derive(Debug)]
pub struct Objective<'a, T> {
    pub filter: &'a CompositeFilter<T>,
    pub bank: &'a GramBank<T>,
    /// `G^(1/2)`, the operator of the quadratic form.
    pub smooth: &'a GramOperator<T>,
    pub interactions: &'a InteractionMatrix,
}

/// Loss and its gradient with respect to the coefficient table.
#[derive(Debug, Clone, PartialEq)]
pub struct LossGrad<T> {
    pub loss: T,
    pub grad: CoefTable<T>,
}

fn gradient_from<T: Real>(signals: &BasisSignals<T>, direction: &[T], factor: T) -> CoefTable<T> {
    let rows = signals.per_gamma.len();
    let cols = signals.per_gamma[0].len();
    let mut grad = CoefTable::zeros(rows, cols);
    let scale = factor / T::from_usize_lossy(rows);
    for g in 0..rows {
        for k in 0..cols {
            grad.set(g, k, scale * dot(signals.get(g, k), direction));
        }
    }
    grad
}

/// `log(1 + exp(-d))` without overflow.
pub(crate) fn softplus_neg<T: Real>(d: T) -> T {
    if d > T::zero() {
        (-d).exp().ln_1p()
    } else {
        -d + d.exp().ln_1p()
    }
}

pub(crate) fn sigmoid<T: Real>(d: T) -> T {
    if d >= T::zero() {
        T::one() / (T::one() + (-d).exp())
    } else {
        let e = d.exp();
        e / (T::one() + e)
    }
}

/// Draws `z ~ N(0, eps I)` over `n` item slots.
pub fn draw_noise<T: Real, R: Rng + ?Sized>(n: usize, eps: f64, rng: &mut R) -> Result<Vec<T>> {
    if !(eps >= 0.0) {
        return Err(PolyCfError::invalid(format!(
            "noise level {eps} must be >= 0"
        )));
    }
    let sd = eps.sqrt();
    Ok((0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            T::lit(sd * z)
        })
        .collect())
}

impl<'a, T: Real> Objective<'a, T> {
    pub fn new(
        filter: &'a CompositeFilter<T>,
        bank: &'a GramBank<T>,
        smooth: &'a GramOperator<T>,
        interactions: &'a InteractionMatrix,
    ) -> Self {
        Self {
            filter,
            bank,
            smooth,
            interactions,
        }
    }

    /// `L_g = e^T (I - G^(1/2)) e` with `e = H_g(r_u + z) - r_u`, evaluated
    /// under `theta`, and `dL_g/dtheta = (2/|Gamma|) b^T (I - G^(1/2)) e`.
    pub fn graph(&self, theta: &CoefTable<T>, u: usize, noise: &[T]) -> Result<LossGrad<T>> {
        let r_u = self.interactions.user_signal::<T>(u);
        crate::error::check_len(r_u.len(), noise.len())?;
        let input: Vec<T> = r_u.iter().zip(noise).map(|(&a, &b)| a + b).collect();
        let signals = self.filter.kernel.basis_signals(self.bank, &input)?;
        let out = self.filter.output_from_signals(theta, &signals, &input)?;
        let resid: Vec<T> = out.iter().zip(&r_u).map(|(&a, &b)| a - b).collect();
        let g_resid = self.smooth.apply(&resid)?;
        let lap: Vec<T> = resid.iter().zip(&g_resid).map(|(&a, &b)| a - b).collect();
        Ok(LossGrad {
            loss: dot(&resid, &lap),
            grad: gradient_from(&signals, &lap, T::lit(2.0)),
        })
    }

    /// Summed BPR loss `sum -ln sigma(r*_ui - r*_uj)` over `triples`, all of
    /// which must belong to user `u`. Noise-free input.
    pub fn bpr_user(
        &self,
        theta: &CoefTable<T>,
        u: usize,
        triples: &[Triple],
    ) -> Result<LossGrad<T>> {
        let x = self.interactions.user_signal::<T>(u);
        let signals = self.filter.kernel.basis_signals(self.bank, &x)?;
        let scores = self.filter.output_from_signals(theta, &signals, &x)?;
        // dL/dr* is sparse: -sigma(-d) at i, +sigma(-d) at j
        let mut direction = vec![T::zero(); x.len()];
        let mut loss = T::zero();
        for t in triples {
            debug_assert_eq!(t.user, u);
            let d = scores[t.pos] - scores[t.neg];
            loss = loss + softplus_neg(d);
            let w = sigmoid(-d);
            direction[t.pos] = direction[t.pos] - w;
            direction[t.neg] = direction[t.neg] + w;
        }
        Ok(LossGrad {
            loss,
            grad: gradient_from(&signals, &direction, T::one()),
        })
    }

    /// BPR over a batch of triples; basis signals are computed once per user.
    pub fn bpr(&self, theta: &CoefTable<T>, triples: &[Triple]) -> Result<LossGrad<T>> {
        let mut sorted = triples.to_vec();
        sorted.sort_by_key(|t| t.user);
        let (rows, cols) = theta.shape();
        let mut total = LossGrad {
            loss: T::zero(),
            grad: CoefTable::zeros(rows, cols),
        };
        for chunk in sorted.chunk_by(|a, b| a.user == b.user) {
            let part = self.bpr_user(theta, chunk[0].user, chunk)?;
            total.loss = total.loss + part.loss;
            total.grad.add_scaled(T::one(), &part.grad);
        }
        Ok(total)
    }
}

/// Graph objective for user `u` under the filter's own coefficients with a
/// freshly drawn noise vector.
pub fn graph_objective<T: Real, R: Rng + ?Sized>(
    f: &CompositeFilter<T>,
    r: &InteractionMatrix,
    u: usize,
    noise_eps: f64,
    rng: &mut R,
) -> Result<LossGrad<T>> {
    let noise = draw_noise::<T, R>(r.num_items(), noise_eps, rng)?;
    let bank = f.operators(r)?;
    let smooth = GramOperator::new(r, T::lit(0.5))?;
    Objective::new(f, &bank, &smooth, r).graph(&f.kernel.theta, u, &noise)
}

/// Summed BPR loss of a batch under the filter's own coefficients.
pub fn bpr_loss<T: Real>(
    f: &CompositeFilter<T>,
    r: &InteractionMatrix,
    triples: &[Triple],
) -> Result<LossGrad<T>> {
    if triples.is_empty() {
        return Err(PolyCfError::invalid("BPR batch is empty"));
    }
    let bank = f.operators(r)?;
    let smooth = GramOperator::new(r, T::lit(0.5))?;
    Objective::new(f, &bank, &smooth, r).bpr(&f.kernel.theta, triples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{BasisFamily, PolyBasis, PolynomialKernel};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn toy() -> InteractionMatrix {
        InteractionMatrix::from_dense(&[
            vec![1, 1, 0, 1, 0],
            vec![0, 1, 1, 0, 0],
            vec![1, 0, 1, 1, 1],
            vec![0, 1, 0, 1, 1],
        ])
        .unwrap()
    }

    #[test]
    fn identity_filter_has_zero_graph_loss_without_noise() {
        let r = toy();
        let k =
            PolynomialKernel::identity(PolyBasis::new(BasisFamily::Monomial), 3, vec![0.3, 0.5])
                .unwrap();
        let f = CompositeFilter::kernel_only(k);
        let out = graph_objective(&f, &r, 2, 0.0, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(out.loss, 0.0);
        assert_eq!(out.grad.max_abs(), 0.0);
    }

    #[test]
    fn graph_loss_is_non_negative() {
        let r = toy();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for fam in BasisFamily::ALL {
            let mut k = PolynomialKernel::identity(PolyBasis::new(fam), 4, vec![0.1, 0.9]).unwrap();
            k.theta.set(1, 3, -0.8);
            let f = CompositeFilter::kernel_only(k);
            for u in 0..4 {
                let out = graph_objective(&f, &r, u, 0.5, &mut rng).unwrap();
                assert!(out.loss >= -1e-9, "{fam}: {}", out.loss);
            }
        }
    }

    #[test]
    fn negative_noise_rejected() {
        let r = toy();
        let f = CompositeFilter::kernel_only(
            PolynomialKernel::identity(PolyBasis::default(), 1, vec![0.5]).unwrap(),
        );
        assert!(graph_objective(&f, &r, 0, -0.1, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    }

    #[test]
    fn tied_scores_give_ln2() {
        let r = toy();
        // zero kernel: every item scores 0
        let f = CompositeFilter::kernel_only(
            PolynomialKernel::zero(PolyBasis::default(), 1, vec![0.5]).unwrap(),
        );
        let t = [Triple {
            user: 1,
            pos: 1,
            neg: 3,
        }];
        let out = bpr_loss(&f, &r, &t).unwrap();
        assert!((out.loss - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(bpr_loss(&f, &r, &[]).is_err());
    }

    #[test]
    fn saturated_margin_gives_zero_loss() {
        assert!(softplus_neg(800.0f64) < 1e-300);
        assert!((softplus_neg(-800.0f64) - 800.0).abs() < 1e-12);
        assert!((sigmoid(0.0f64) - 0.5).abs() < 1e-16);
    }
}
