//! Differentiable scorers, prevalence-weighted losses and pairwise family
//! training.

pub mod conjecture;
pub mod data;
pub mod loss;
pub mod model;
pub mod train;

pub use conjecture::{conjecture_probe, AnalyticFamily, ConjectureReport, SoftmaxFamily};
pub use data::TrainingDataset;
pub use loss::{
    empirical_01_loss, homotopy_loss, loss_gradient, model_01_loss, per_sample_term,
    prevalence_weighted_cross_entropy,
};
pub use model::{Architecture, ScorerModel};
pub use train::{
    train_cross_entropy_family, train_pairwise_family, CrossEntropySettings, FamilyCheckpoint,
    FamilySet, HomotopySchedule, HomotopyStage, PairwiseFamily, ScorerKind, TrainSettings,
};
