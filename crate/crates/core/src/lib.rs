//! Concept erasure for fixed vector embeddings.
//!
//! This crate learns rank-`r` orthogonal projections that erase a discrete
//! concept from a set of embeddings by making the class-conditional
//! distributions of the projected vectors indistinguishable (measured with a
//! Gaussian-mixture MMD), while the orthogonality of the projection preserves
//! the local geometry of whatever survives.
//!
//! The main entry points are:
//!
//! - [`dataset`] - the labelled embedding table and its CSV format,
//! - [`projector`] - orthogonal projectors, the trainable candidate matrix,
//!   the projection penalty, and the snap to the nearest projector,
//! - [`kernel`] - the MMD estimator, the erasure loss, and its gradient,
//! - [`linear`] - the closed-form mean-matching linear eraser,
//! - [`train`] - the standard and cascaded training loops,
//! - [`probe`] - post-hoc classifiers and MDL used to evaluate erasure,
//! - [`metrics`] - neighborhood overlap, similarity correlation, fairness gaps,
//! - [`synthetic`] - seeded dataset generators with known concept structure.

pub mod dataset;
pub mod error;
pub mod kernel;
pub mod linalg;
pub mod linear;
pub mod metrics;
pub mod probe;
pub mod projector;
pub mod synthetic;
pub mod train;

pub use dataset::{load_dataset, save_dataset, Dataset};
pub use error::{Error, Result};
pub use kernel::{
    erasure_loss, kernel_value, loss_and_grad, mean_bandwidth, mmd2_unbiased, Bandwidth,
    KernelSpec,
};
pub use linear::{factor, fit_linear_eraser};
pub use metrics::{
    demographic_parity, load_predictions, load_similarity_pairs, neighborhood_overlap,
    save_predictions, similarity_spearman, tpr_gaps, PredictionRow, SimilarityPair, TprGapReport,
};
pub use probe::{
    default_mdl_schedule, mdl_online, probe_accuracy, train_probe, MdlReport, ProbeConfig,
    ProbeKind, ProbeModel,
};
pub use projector::{
    load_projector, projection_loss, save_projector, snap_to_projector, ProjectionCandidate,
    Projector,
};
pub use synthetic::{gen_linear_concept, gen_nonlinear_concept};
pub use train::{
    train_cascaded, train_standard, Adam, AdamParams, BatchSize, EpochLoss, TrainConfig,
    TrainReport,
};
