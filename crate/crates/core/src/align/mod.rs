//! Representation equivalence: almost-affine stitching into frozen decoders,
//! equivalence-score matrices, CKA, PCA and feature alignment.

mod aat;
mod cka;
mod es;
mod features;
mod pca;

pub use aat::{
    fit_aat, quadratic_features, AatConfig, AatEvaluation, AatFit, AatObjective, AatParams,
    TargetDecoder, DEFAULT_REFERENCE_EPSILON,
};
pub use cka::cka;
pub use es::{es_cell, es_matrix, majority_rate, random_baseline_es, EsHistogram, EsMatrix};
pub use features::{balanced_threshold_accuracy, feature_alignment, Attribute};
pub use pca::{pca_project, Pca};
