//! Sharp additive envelope arithmetic and the scalar reduction of the
//! cross-world mean.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::summation::NeumaierSum;

/// Pointwise envelope inputs and the resulting bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointwiseEnvelope {
    pub eta: f64,
    pub gamma: f64,
    pub xi: f64,
}

impl PointwiseEnvelope {
    pub fn new(eta: f64, gamma: f64) -> Result<Self> {
        Ok(PointwiseEnvelope {
            eta,
            gamma,
            xi: xi_pointwise(eta, gamma)?,
        })
    }
}

/// `eta * (gamma - 1) / gamma`, the largest attainable `|Delta|` given an
/// outcome range `eta` and a residual selection ratio `gamma`.
///
/// `gamma = +inf` is accepted and yields `eta`.
pub fn xi_pointwise(eta: f64, gamma: f64) -> Result<f64> {
    if !(eta >= 0.0) || eta.is_infinite() {
        return Err(Error::InvalidSensitivityParam(format!(
            "outcome range must be finite and >= 0, got {eta}"
        )));
    }
    if !(gamma >= 1.0) {
        return Err(Error::InvalidSensitivityParam(format!(
            "selection ratio must be >= 1, got {gamma}"
        )));
    }
    Ok(xi_unchecked(eta, gamma))
}

/// [`xi_pointwise`] without validation, for inner loops whose inputs were
/// already checked. Written as `1 - 1/gamma` so it is monotone in floating
/// point and exact at both `gamma = 1` and `gamma = inf`.
#[inline]
pub fn xi_unchecked(eta: f64, gamma: f64) -> f64 {
    eta * (1.0 - gamma.recip())
}

/// Mean of pointwise bounds over all `(unit, mediator draw)` pairs.
pub fn aggregate_xi_bar(pointwise: &[f64]) -> Result<f64> {
    if pointwise.is_empty() {
        return Err(Error::EmptyCollection);
    }
    if let Some(bad) = pointwise.iter().find(|v| !(**v >= 0.0)) {
        return Err(Error::InvalidSensitivityParam(format!(
            "pointwise bound must be >= 0, got {bad}"
        )));
    }
    let total = pointwise.iter().copied().collect::<NeumaierSum>().total();
    Ok(total / pointwise.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Effects {
    pub nde: f64,
    pub nie: f64,
    pub te: f64,
}

/// `NDE = theta - delta0`, `NIE = delta1 - theta`, `TE = NDE + NIE`.
pub fn mediation_effects(theta: f64, delta0: f64, delta1: f64) -> Effects {
    let nde = theta - delta0;
    let nie = delta1 - theta;
    Effects {
        nde,
        nie,
        te: nde + nie,
    }
}

/// Per-draw decomposition `theta = theta_si + delta_bar_0 - delta_bar_1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalarDecomposition {
    pub theta_si: f64,
    pub delta_bar_0: f64,
    pub delta_bar_1: f64,
    pub xi_bar_0: f64,
    pub xi_bar_1: f64,
    pub theta: f64,
    pub delta0: f64,
    pub delta1: f64,
}

impl ScalarDecomposition {
    pub fn assemble(
        theta_si: f64,
        delta_bar: [f64; 2],
        xi_bar: [f64; 2],
        delta0: f64,
        delta1: f64,
    ) -> Self {
        ScalarDecomposition {
            theta_si,
            delta_bar_0: delta_bar[0],
            delta_bar_1: delta_bar[1],
            xi_bar_0: xi_bar[0],
            xi_bar_1: xi_bar[1],
            theta: theta_si + delta_bar[0] - delta_bar[1],
            delta0,
            delta1,
        }
    }

    pub fn effects(&self) -> Effects {
        mediation_effects(self.theta, self.delta0, self.delta1)
    }

    /// Exact check of the scalar identity and the prior-support contract.
    pub fn is_consistent(&self) -> bool {
        self.theta == self.theta_si + self.delta_bar_0 - self.delta_bar_1
            && self.delta_bar_0.abs() <= self.xi_bar_0
            && self.delta_bar_1.abs() <= self.xi_bar_1
    }
}
