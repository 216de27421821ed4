//! Bridge-score sensitivity analysis for natural direct and indirect effects.
//!
//! The cross-world mean `theta = E[Y(1, M(0))]` is identified under sequential
//! ignorability given the bridge score `B = (f0(m|x), f1(m|x))`. When a latent
//! confounder breaks that, the pointwise bias is bounded by
//! `eta * (gamma - 1) / gamma`, and the bias of `theta` reduces to two scalars
//! per posterior draw. This crate fits the working models, calibrates the
//! bound, propagates it through g-computation, and checks the underlying
//! identities on exactly solvable discrete models.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bridge;
pub mod calibration;
pub mod data;
pub mod envelope;
pub mod error;
pub mod gcomp;
pub mod linear_bayes;
pub mod oracle;
pub mod seed;
pub mod summation;
pub mod working_model;

pub use error::{Error, Result};
