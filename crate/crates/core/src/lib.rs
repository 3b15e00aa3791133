//! Penalized regression (lasso, elastic net, MCP, SCAD) for linear,
//! logistic, and Cox models, with a per-lambda estimate of the expected
//! number and rate of false selections among independent features.
//!
//! The central objects are [`Dataset`] (standardized design plus response),
//! [`fit_path`] (coordinate descent over a lambda grid with KKT
//! certificates), and [`mfdr_path`] (expected false discoveries and the
//! marginal false discovery rate along the fitted path). Selection rules
//! ([`cross_validate`], [`select_by_mfdr`]), comparator methods
//! ([`univariate_screen`], [`sample_split`]), and a seeded simulation
//! harness ([`run_scenario`]) build on those.

mod compare;
mod data;
mod erf;
mod error;
mod family;
mod glm_fit;
mod mfdr;
mod path;
mod penalty;
mod select;
mod sim;

pub use compare::{
    benjamini_hochberg, sample_split, univariate_screen, SampleSplitResult, TestResult,
    DEFAULT_SCREEN_LIMIT,
};
pub use data::{
    standardize, unstandardize_coefficients, Dataset, Response, StandardizationRecord,
};
pub use erf::normal_cdf;
pub use error::{Error, Result};
pub use family::{
    cox_full_curvature, cox_log_partial_likelihood, deviance, family_state, FamilyKind,
    FamilyState,
};
pub use mfdr::{expected_false_discoveries, mfdr_path, MfdrRow, MfdrTable};
pub use path::{
    fit_path, make_lambda_grid, FitControls, LambdaGrid, PathFit, PathStep,
};
pub use penalty::{
    kkt_residual, penalty_derivative, penalty_value, selection_condition, threshold,
    PenaltyFamily, PenaltySpec, DEFAULT_MCP_GAMMA, DEFAULT_SCAD_GAMMA,
};
pub use select::{cross_validate, select_by_mfdr, CvResult};
pub use sim::{
    generate_features, generate_response, run_scenario, FeatureCorrelation, LambdaSummary,
    MethodSummary, Scenario, ScenarioResult, SimulationConfig, VariableClass,
};
