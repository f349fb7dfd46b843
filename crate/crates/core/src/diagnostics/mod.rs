//! Desk-scale correctness tools: dense oracles, theorem checks, ablations
//! and kernel transfer. Everything here is single-threaded.

pub mod ablation;
pub mod dense;
pub mod theorems;
pub mod transfer;

pub use ablation::{build_ablation, AblationVariant};
pub use theorems::{
    verify_rank_bound, verify_theorem2, EmbeddingSim, PairReport, RankReport, SpectrumReport,
};
pub use transfer::{transfer_kernel, TransferOptions, TransferReport, TransferResult};
