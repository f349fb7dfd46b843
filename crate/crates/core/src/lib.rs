//! Polynomial spectral filtering over generalized-normalized item Gram
//! operators for implicit-feedback recommendation.
//!
//! A user's interaction row `r_u` is filtered as
//!
//! ```text
//! r*_u = (1/|Gamma|) sum_gamma sum_k theta[gamma][k] P_k(G^(gamma)) r_u + omega V_s V_s^T r_u
//! ```
//!
//! where `G^(gamma) = D_I^{-gamma} R^T D_U^{-1} R D_I^{gamma-1}` is applied
//! through its two sparse factors, `P_k` is one of five polynomial bases and
//! `V_s` spans the leading eigenvectors of `G^(1/2)`. Only `theta` is trained.
//!
//! Numeric code is generic over [`Real`] (`f32` or `f64`); the aliases below
//! fix the usual double-precision instantiation.

pub mod dataset;
pub mod diagnostics;
pub mod error;
pub mod evaluation;
pub mod interaction;
pub mod scalar;
pub mod sparse;
pub mod spectral;
pub mod synthetic;
pub mod training;

pub use dataset::{load_dataset, Dataset};
pub use error::{PolyCfError, Result};
pub use evaluation::{evaluate, ndcg_at_k, recall_at_k, EvalReport, EvalResult};
pub use interaction::{normalized_interaction, InteractionMatrix};
pub use scalar::Real;
pub use spectral::{
    apply_composite, apply_gram, apply_low_pass, basis_signals, basis_values, truncated_svd,
    BasisFamily, CoefTable, CompositeFilter, GramOperator, LowPassProjector, PolyBasis,
    PolynomialKernel,
};
pub use training::{train, Checkpoint, FilterSpec, KernelInit, TrainConfig};

pub type Filter = CompositeFilter<f64>;
pub type Kernel = PolynomialKernel<f64>;
pub type Projector = LowPassProjector<f64>;
pub type Gram = GramOperator<f64>;
pub type Coefficients = CoefTable<f64>;

pub type FilterF32 = CompositeFilter<f32>;
pub type KernelF32 = PolynomialKernel<f32>;
pub type ProjectorF32 = LowPassProjector<f32>;
