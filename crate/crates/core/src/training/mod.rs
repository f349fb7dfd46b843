//! Mini-batch SGD on the kernel coefficients under `L = L_g + L_bpr`.

pub mod checkpoint;
pub mod dropout;
pub mod objective;
pub mod sampling;

use std::io::Write;

use log::info;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::dataset::Dataset;
use crate::error::{PolyCfError, Result};
use crate::evaluation::evaluate_with;
use crate::scalar::Real;
use crate::spectral::{
    CoefTable, CompositeFilter, GramOperator, LowPassProjector, PolyBasis, PolynomialKernel,
};

pub use checkpoint::Checkpoint;
pub use dropout::{apply_kernel_dropout, dropout_mask};
pub use objective::{bpr_loss, draw_noise, graph_objective, LossGrad, Objective};
pub use sampling::{eligible_users, sample_triples, Triple, TripleBatch};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_users: usize,
    /// Variance of the input noise of the graph objective.
    pub noise_eps: f64,
    pub kernel_dropout: f64,
    pub negatives_per_positive: usize,
    pub rng_seed: u64,
    /// Standard deviation of the Gaussian jitter added to the initial kernel.
    pub init_jitter: f64,
    /// Defaults to one pass over the eligible users.
    pub batches_per_epoch: Option<usize>,
    /// Fixed reduction order; off trades bit-reproducibility for throughput.
    pub deterministic: bool,
    /// Evaluate on `dataset.test` after every epoch.
    pub validate: bool,
    pub eval_k: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            epochs: 50,
            batch_users: 1024,
            noise_eps: 0.1,
            kernel_dropout: 0.2,
            negatives_per_positive: 1,
            rng_seed: 2024,
            init_jitter: 0.1,
            batches_per_epoch: None,
            deterministic: true,
            validate: false,
            eval_k: 20,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(PolyCfError::invalid("learning rate must be positive"));
        }
        if self.batch_users == 0 || self.negatives_per_positive == 0 {
            return Err(PolyCfError::invalid(
                "batch_users and negatives must be >= 1",
            ));
        }
        if !(self.noise_eps >= 0.0) {
            return Err(PolyCfError::invalid("noise level must be >= 0"));
        }
        if !(0.0..1.0).contains(&self.kernel_dropout) {
            return Err(PolyCfError::invalid("dropout rate must lie in [0, 1)"));
        }
        if self.init_jitter < 0.0 {
            return Err(PolyCfError::invalid("init jitter must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum KernelInit<T> {
    /// `theta[.][0] = 1` plus `N(0, init_jitter^2)` on every entry.
    JitteredIdentity,
    Fixed(CoefTable<T>),
}

/// Everything about the filter that is chosen rather than learned.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterSpec<T> {
    pub basis: PolyBasis,
    pub order: usize,
    pub gammas: Vec<T>,
    pub omega: T,
    pub low_pass: Option<LowPassProjector<T>>,
    pub init: KernelInit<T>,
    pub trainable: bool,
}

impl<T: Real> FilterSpec<T> {
    pub fn initial_kernel(&self, jitter: f64, seed: u64) -> Result<PolynomialKernel<T>> {
        let theta = match &self.init {
            KernelInit::Fixed(theta) => theta.clone(),
            KernelInit::JitteredIdentity => {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[0]));
                let mut theta = CoefTable::zeros(self.gammas.len(), self.order + 1);
                for g in 0..self.gammas.len() {
                    for k in 0..=self.order {
                        let base = if k == 0 { 1.0 } else { 0.0 };
                        let z: f64 = StandardNormal.sample(&mut rng);
                        theta.set(g, k, T::lit(base + jitter * z));
                    }
                }
                theta
            }
        };
        PolynomialKernel::new(self.basis, self.order, self.gammas.clone(), theta)
    }

    pub fn initial_filter(&self, jitter: f64, seed: u64) -> Result<CompositeFilter<T>> {
        CompositeFilter::new(
            self.initial_kernel(jitter, seed)?,
            self.low_pass.clone(),
            self.omega,
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub loss_graph: f64,
    pub loss_bpr: f64,
    pub val_recall: Option<f64>,
    pub val_ndcg: Option<f64>,
}

impl EpochLog {
    pub fn loss_total(&self) -> f64 {
        self.loss_graph + self.loss_bpr
    }
}

/// CSV `epoch,loss_graph,loss_bpr,loss_total,val_recall20,val_ndcg20`.
pub fn write_loss_log<W: Write>(log: &[EpochLog], mut w: W) -> std::io::Result<()> {
    writeln!(
        w,
        "epoch,loss_graph,loss_bpr,loss_total,val_recall20,val_ndcg20"
    )?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for e in log {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            e.epoch,
            e.loss_graph,
            e.loss_bpr,
            e.loss_total(),
            opt(e.val_recall),
            opt(e.val_ndcg)
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    pub filter: CompositeFilter<T>,
    pub log: Vec<EpochLog>,
}

/// SplitMix64-style mixing of a base seed with stream coordinates.
pub(crate) fn derive_seed(seed: u64, coords: &[u64]) -> u64 {
    let mut x = seed ^ 0x9E37_79B9_7F4A_7C15;
    for &c in coords {
        x = x
            .wrapping_add(c.wrapping_mul(0xBF58_476D_1CE4_E5B9))
            .wrapping_add(0x94D0_49BB_1331_11EB);
        x ^= x >> 30;
        x = x.wrapping_mul(0xBF58_476D_1CE4_E5B9);
        x ^= x >> 27;
        x = x.wrapping_mul(0x94D0_49BB_1331_11EB);
        x ^= x >> 31;
    }
    x
}

struct UserTerms<T> {
    graph: LossGrad<T>,
    bpr: LossGrad<T>,
}

/// Trains the kernel coefficients of `spec` on `dataset.train`.
pub fn train<T: Real>(
    dataset: &Dataset,
    cfg: &TrainConfig,
    spec: &FilterSpec<T>,
) -> Result<TrainOutcome<T>> {
    cfg.validate()?;
    let r = &dataset.train;
    let mut filter = spec.initial_filter(cfg.init_jitter, cfg.rng_seed)?;
    if let Some(p) = &filter.low_pass {
        crate::error::check_len(r.num_items(), p.num_items())?;
    }
    let mut log = Vec::with_capacity(cfg.epochs);
    if !spec.trainable || cfg.epochs == 0 {
        return Ok(TrainOutcome { filter, log });
    }

    let bank = filter.operators(r)?;
    let smooth = GramOperator::new(r, T::lit(0.5))?;
    let eligible = eligible_users(r);
    if eligible.is_empty() {
        return Err(PolyCfError::invalid(
            "no user has both seen and unseen items",
        ));
    }
    let skipped = r.num_users() - eligible.len();
    let batches = cfg
        .batches_per_epoch
        .unwrap_or_else(|| eligible.len().div_ceil(cfg.batch_users))
        .max(1);
    let mut sample_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.rng_seed, &[1]));
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.rng_seed, &[2]));
    let (rows, cols) = filter.kernel.theta.shape();
    let lr = T::lit(cfg.learning_rate);

    for epoch in 0..cfg.epochs {
        let (mut sum_graph, mut sum_bpr) = (0.0, 0.0);
        for batch in 0..batches {
            let tb = sampling::sample_from(
                r,
                &eligible,
                cfg.batch_users,
                cfg.negatives_per_positive,
                skipped,
                &mut sample_rng,
            );
            let mask = dropout_mask::<T, _>(rows, cols, cfg.kernel_dropout, &mut dropout_rng)?;
            let theta_eff = dropout::hadamard(&filter.kernel.theta, &mask);
            let obj = Objective::new(&filter, &bank, &smooth, r);
            let negs = cfg.negatives_per_positive;

            let per_user = |(idx, &u): (usize, &usize)| -> Result<UserTerms<T>> {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
                    cfg.rng_seed,
                    &[3, epoch as u64, batch as u64, u as u64],
                ));
                let noise = draw_noise::<T, _>(r.num_items(), cfg.noise_eps, &mut rng)?;
                Ok(UserTerms {
                    graph: obj.graph(&theta_eff, u, &noise)?,
                    bpr: obj.bpr_user(&theta_eff, u, &tb.triples[idx * negs..(idx + 1) * negs])?,
                })
            };
            let zero = || UserTerms {
                graph: LossGrad {
                    loss: T::zero(),
                    grad: CoefTable::zeros(rows, cols),
                },
                bpr: LossGrad {
                    loss: T::zero(),
                    grad: CoefTable::zeros(rows, cols),
                },
            };
            let accumulate = |mut acc: UserTerms<T>, t: UserTerms<T>| {
                acc.graph.loss = acc.graph.loss + t.graph.loss;
                acc.graph.grad.add_scaled(T::one(), &t.graph.grad);
                acc.bpr.loss = acc.bpr.loss + t.bpr.loss;
                acc.bpr.grad.add_scaled(T::one(), &t.bpr.grad);
                acc
            };
            let total = if cfg.deterministic {
                let terms = tb
                    .users
                    .par_iter()
                    .enumerate()
                    .map(per_user)
                    .collect::<Result<Vec<_>>>()?;
                terms.into_iter().fold(zero(), accumulate)
            } else {
                tb.users
                    .par_iter()
                    .enumerate()
                    .map(per_user)
                    .try_fold(zero, |acc, t| t.map(|t| accumulate(acc, t)))
                    .try_reduce(zero, |a, b| Ok(accumulate(a, b)))?
            };

            let n_users = T::from_usize_lossy(tb.users.len());
            let n_triples = T::from_usize_lossy(tb.triples.len());
            let loss_graph = total.graph.loss / n_users;
            let loss_bpr = total.bpr.loss / n_triples;
            let mut grad = total.graph.grad;
            grad.scale(T::one() / n_users);
            grad.add_scaled(T::one() / n_triples, &total.bpr.grad);
            let grad = dropout::hadamard(&grad, &mask);
            if !(loss_graph + loss_bpr).is_finite() || !grad.is_finite() {
                return Err(PolyCfError::NonFiniteLoss {
                    epoch,
                    batch,
                    theta: filter.kernel.theta.cast::<f64>().to_rows(),
                });
            }
            filter.kernel.theta.add_scaled(-lr, &grad);
            sum_graph += loss_graph.as_f64();
            sum_bpr += loss_bpr.as_f64();
        }
        let (val_recall, val_ndcg) = if cfg.validate {
            let res = evaluate_with(&filter, &bank, dataset, cfg.eval_k, false)?;
            (Some(res.recall_at_k), Some(res.ndcg_at_k))
        } else {
            (None, None)
        };
        let entry = EpochLog {
            epoch,
            loss_graph: sum_graph / batches as f64,
            loss_bpr: sum_bpr / batches as f64,
            val_recall,
            val_ndcg,
        };
        info!(
            "epoch {epoch}: L_g {:.6} L_bpr {:.6}{}",
            entry.loss_graph,
            entry.loss_bpr,
            val_recall.map_or(String::new(), |v| format!(" recall@{} {v:.4}", cfg.eval_k))
        );
        log.push(entry);
    }
    Ok(TrainOutcome { filter, log })
}

/// Draws a fresh jittered-identity kernel; used as the untrained baseline.
pub fn random_init_kernel<T: Real, R: Rng + ?Sized>(
    basis: PolyBasis,
    order: usize,
    gammas: Vec<T>,
    jitter: f64,
    rng: &mut R,
) -> Result<PolynomialKernel<T>> {
    let spec = FilterSpec {
        basis,
        order,
        gammas,
        omega: T::zero(),
        low_pass: None,
        init: KernelInit::JitteredIdentity,
        trainable: true,
    };
    spec.initial_kernel(jitter, rng.random())
}
