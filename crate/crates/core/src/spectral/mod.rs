//! Generalized Gram operators, polynomial kernels, the low-pass projector and
//! their composite.

pub mod basis;
pub mod filter;
pub mod gram;
pub mod kernel;
pub mod lowpass;

pub use basis::{basis_values, BasisFamily, PolyBasis};
pub use filter::{apply_composite, CompositeFilter};
pub use gram::{apply_gram, GramOperator};
pub use kernel::{
    basis_signals, BasisSignals, CoefTable, GramBank, PolynomialKernel, ResponseCurve,
};
pub use lowpass::{
    apply_low_pass, truncated_svd, truncated_svd_with, LowPassProjector, SvdOptions,
};
