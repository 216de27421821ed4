//! Bayesian g-computation with sensitivity corrections.
//!
//! Each posterior draw samples the working models, pushes `L` counterfactual
//! mediators per unit through the outcome regression, aggregates the
//! pointwise envelope over those same points, then draws the two scalar
//! corrections `delta_bar_a` from a prior supported on `[-xi_bar_a, xi_bar_a]`.

mod engine;
mod summary;
mod sweep;

pub use engine::{model_draws, run, run_settings, DrawRecord, RunOptions, RunResult};
pub use summary::{quantile_type7, effective_sample_size, QuantitySummary, RunSummary};
pub use sweep::{sweep, sweep_with_overlay, Overlay, SweepAxis, SweepRow, SweepTable};

use rand::Rng;
use rand_distr::{Beta, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::bridge::{BridgeScore, MediatorLaw};
use crate::calibration::{check_amplification, check_budget_share, check_selection_grid, BenchmarkScale};
use crate::error::{Error, Result};
use crate::linear_bayes::LinearModelDraw;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "route", rename_all = "snake_case")]
pub enum Calibration {
    SiAnchor,
    Benchmark {
        scale: BenchmarkScale,
        lambda: [f64; 2],
        kappa: [f64; 2],
    },
    ResidualBudget {
        k: [f64; 2],
        g: [f64; 2],
    },
}

impl Calibration {
    pub fn validate(&self) -> Result<()> {
        match self {
            Calibration::SiAnchor => Ok(()),
            Calibration::Benchmark { lambda, kappa, .. } => {
                for a in 0..2 {
                    check_amplification("lambda", lambda[a])?;
                    check_amplification("kappa", kappa[a])?;
                }
                Ok(())
            }
            Calibration::ResidualBudget { k, g } => {
                for a in 0..2 {
                    check_budget_share(k[a])?;
                    check_selection_grid(g[a])?;
                }
                Ok(())
            }
        }
    }

    pub fn route_name(&self) -> &'static str {
        match self {
            Calibration::SiAnchor => "si_anchor",
            Calibration::Benchmark {
                scale: BenchmarkScale::Raw,
                ..
            } => "benchmark_raw",
            Calibration::Benchmark {
                scale: BenchmarkScale::Rank,
                ..
            } => "benchmark_rank",
            Calibration::ResidualBudget { .. } => "residual_budget",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DeltaPrior {
    #[default]
    Uniform,
    Beta {
        shape1: f64,
        shape2: f64,
    },
    EndpointLower,
    EndpointUpper,
}

impl DeltaPrior {
    pub fn validate(&self) -> Result<()> {
        if let DeltaPrior::Beta { shape1, shape2 } = self {
            if !(*shape1 > 0.0 && *shape2 > 0.0 && shape1.is_finite() && shape2.is_finite()) {
                return Err(Error::InvalidPrior(format!(
                    "beta shapes must be finite and > 0, got ({shape1}, {shape2})"
                )));
            }
        }
        Ok(())
    }

    /// Position in `[-1, 1]` of a draw, before scaling by `xi_bar`.
    fn unit_draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        Ok(match self {
            DeltaPrior::Uniform => 2.0 * rng.random::<f64>() - 1.0,
            DeltaPrior::Beta { shape1, shape2 } => {
                let b = Beta::new(*shape1, *shape2)
                    .map_err(|e| Error::InvalidPrior(e.to_string()))?;
                2.0 * b.sample(rng) - 1.0
            }
            DeltaPrior::EndpointLower => -1.0,
            DeltaPrior::EndpointUpper => 1.0,
        })
    }
}

/// One draw of a scalar correction from `prior` on `[-xi_bar, xi_bar]`.
pub fn delta_bar_draw<R: Rng + ?Sized>(xi_bar: f64, prior: &DeltaPrior, rng: &mut R) -> Result<f64> {
    if !(xi_bar >= 0.0) {
        return Err(Error::InvalidSensitivityParam(format!(
            "xi_bar must be >= 0, got {xi_bar}"
        )));
    }
    prior.validate()?;
    Ok(xi_bar * prior.unit_draw(rng)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensitivitySetting {
    pub calibration: Calibration,
    #[serde(default)]
    pub delta_prior: DeltaPrior,
    /// Use one prior variate for both arms instead of two independent ones.
    #[serde(default)]
    pub comonotone: bool,
}

impl SensitivitySetting {
    pub fn si_anchor() -> Self {
        SensitivitySetting {
            calibration: Calibration::SiAnchor,
            delta_prior: DeltaPrior::Uniform,
            comonotone: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.calibration.validate()?;
        self.delta_prior.validate()
    }

    /// `(delta_bar_0, delta_bar_1)` given the aggregated envelopes.
    ///
    /// The endpoint priors are directional in the indirect effect: the upper
    /// endpoint sets `delta_bar_1 = +xi_bar_1` and `delta_bar_0 = -xi_bar_0`,
    /// which maximizes `NIE = delta1 - theta_si - delta_bar_0 + delta_bar_1`.
    pub(crate) fn draw_deltas<R: Rng + ?Sized>(&self, xi_bar: [f64; 2], rng: &mut R) -> Result<[f64; 2]> {
        if matches!(self.calibration, Calibration::SiAnchor) {
            return Ok([0.0, 0.0]);
        }
        let (u0, u1) = match self.delta_prior {
            DeltaPrior::EndpointLower => (1.0, -1.0),
            DeltaPrior::EndpointUpper => (-1.0, 1.0),
            prior => {
                let u0 = prior.unit_draw(rng)?;
                let u1 = if self.comonotone { u0 } else { prior.unit_draw(rng)? };
                (u0, u1)
            }
        };
        Ok([xi_bar[0] * u0, xi_bar[1] * u1])
    }
}

/// `L` draws from `f0(.|x)` under one mediator draw, each with its bridge score.
pub fn counterfactual_mediator_draws<R: Rng + ?Sized>(
    x: &[f64],
    draw: &LinearModelDraw,
    l: usize,
    rng: &mut R,
) -> Result<Vec<(f64, BridgeScore)>> {
    let law = MediatorLaw::new(draw, x.len())?;
    let means = law.arm_means(x);
    let sd = law.sd();
    Ok((0..l)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            let m = means.0 + sd * z;
            (m, law.score(m, means))
        })
        .collect())
}
