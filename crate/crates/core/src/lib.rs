//! Tabular risk-prediction toolkit.
//!
//! Six classifier families (random forest, gradient boosting, second-order
//! boosting with level-wise or leaf-wise growth, SAMME AdaBoost and
//! L1-regularized logistic regression), stratified cross-validated grid
//! search, binary classification metrics, and three explanation methods:
//! path-dependent tree Shapley values, local linear surrogates and
//! permutation feature importance.

pub mod data;
pub mod ensemble;
pub mod error;
pub mod explain;
pub mod json;
pub mod linear;
pub mod metrics;
pub mod rng;
pub mod tree;
pub mod tuning;

pub use data::{Dataset, FeatureSchema, Matrix, SplitPair};
pub use ensemble::{Model, ModelFamily};
pub use error::{Error, Result};
