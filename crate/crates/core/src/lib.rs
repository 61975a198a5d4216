//! Classification constrained dimensionality reduction (CCDR).
//!
//! CCDR is a Laplacian-eigenmaps style spectral embedding in which every
//! class gets an extra graph node (its *class center*) joined with unit
//! weight to each labeled point of that class. Minimising the combined
//! graph energy pulls same-labeled points together while the heat-kernel
//! kNN weights keep the embedding smooth along the data manifold. The
//! trade-off is controlled by `beta`.
//!
//! The crate is `no_std` (with `alloc`) and contains only the numerics:
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`dataset`] | labeled data, class indicators, Statlog text parsing, synthetic circles |
//! | [`graph`] | symmetric kNN graph, heat-kernel weights, out-of-sample kernel rows |
//! | [`spectral`] | generalized eigenproblem `L u = λ D u` with diagonal `D` |
//! | [`ccdr`] | augmented graph, model fitting, out-of-sample extension, cost |
//! | [`baselines`] | PCA, classical MDS, LDA, Laplacian eigenmaps |
//! | [`classify`] | kNN and least-squares linear classifiers |
//!
//! File IO, model persistence, the experiment harness and the CLI live in
//! the companion `ccdr` crate.

#![cfg_attr(not(feature = "std"), no_std)]
// `!(x > 0.0)` is used on purpose to reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

pub mod baselines;
pub mod ccdr;
pub mod classify;
pub mod dataset;
mod error;
pub mod graph;
pub mod matrix;
pub mod spectral;

pub use crate::ccdr::{
    build_augmented, cost, fit, fit_with_weights, AugmentedLaplacian, CcdrModel, ConstraintReport,
    FitParams, OosKernel,
};
pub use crate::classify::{error_rate, KnnClassifier, LinearClassifier};
pub use crate::dataset::{ClassIndicator, LabelRemap, LabeledDataset};
pub use crate::error::{Error, Result};
pub use crate::graph::{heat_weights, kernel_row, knn_graph, NeighborGraph, WeightMatrix};
pub use crate::matrix::Matrix;
pub use crate::spectral::{generalized_eig, sym_eig_desc, EigenSolution};
