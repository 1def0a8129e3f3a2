//! Model explanations: path-dependent tree Shapley values, local linear
//! surrogates and permutation feature importance.

mod lime;
mod pfi;
mod shap;

pub use lime::{lime_explain, FeatureStats, FeatureWeight, LimeConfig, LimeExplanation};
pub use pfi::{permutation_importance, PfiFeature, PfiReport};
pub use shap::{
    shap_summary, shap_waterfall, tree_expected_value, tree_shap, tree_shap_single, Attribution,
    RankedFeature, ShapSummary, Waterfall, WaterfallRow, WATERFALL_TOP,
};
