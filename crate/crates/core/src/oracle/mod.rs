//! Exact enumeration on finite latent-confounder models.
//!
//! Every quantity is computed by summing over the finite supports, so the
//! identities behind the sensitivity envelope can be checked to rounding
//! error, one model at a time or over a seeded random corpus.

mod fuzz;
mod model;
mod suite;

pub use fuzz::{fuzz_model, random_model};
pub use model::{
    check_balancing, check_bound_and_sharpness, check_projection, check_quantile_representation,
    check_scalar_reduction, check_tightening, constant_xi_model, corrupted_model, exact_bridge_partition,
    exact_sensitivity, popoviciu, sharpness_model, DiscreteModel, QuantileBlock, QuantileReport,
    ScalarReductionReport, SensitivityReport, SharpnessReport, TighteningReport, EXACT_TOL,
};
pub use suite::{
    check_model, sharpness_grid, verify_models, verify_suite, CheckOutcome, ModelResiduals, SuiteReport,
    CHECK_NAMES, FUZZ_TOL, SHARPNESS_ETAS, SHARPNESS_GAMMAS,
};
