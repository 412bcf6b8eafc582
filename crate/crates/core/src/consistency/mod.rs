//! Self-consistency audits of density-ratio data.

pub mod feasible;
pub mod identity;
pub mod normalization;
pub mod reconstruct;

pub use feasible::{feasible_set, interval_product_test, FeasibleSet, PairBox, VertexEvaluation};
pub use identity::{
    factor_ratios, is_block_standard, partition_wv, ratio_identity_check, standard_form,
    total_probability_check, IdentityReport, Partition, RatioMatrix, StandardForm, IDENTITY_TOL,
};
pub use normalization::{normalization_check, PairResidual, QuadBox, RatioSource};
pub use reconstruct::{reconstruct_binary_densities, Reconstruction};
