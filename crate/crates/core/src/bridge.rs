//! Bridge scores `B(m, x) = (f0(m|x), f1(m|x))` under a Gaussian mediator
//! working model, and the outcome-model regressors built from them.
//!
//! The mediator model has regressors `(1, A, X)`. Both bridge components are
//! evaluated at the same mediator value `m`, with the treatment indicator
//! switched between 0 and 1.

use serde::{Deserialize, Serialize};

use crate::data::Arm;
use crate::error::{Error, Result};
use crate::linear_bayes::{GaussianKernel, LinearModelDraw};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BridgeScore {
    pub b0: f64,
    pub b1: f64,
    pub l0: f64,
    pub l1: f64,
}

impl BridgeScore {
    pub fn from_logs(l0: f64, l1: f64) -> Self {
        BridgeScore {
            b0: l0.exp(),
            b1: l1.exp(),
            l0,
            l1,
        }
    }

    pub fn log(&self, arm: Arm) -> f64 {
        match arm {
            Arm::Control => self.l0,
            Arm::Treated => self.l1,
        }
    }
}

/// Fitted mediator laws `f0(.|x)`, `f1(.|x)` for one mediator-model draw.
#[derive(Debug, Clone)]
pub struct MediatorLaw<'a> {
    draw: &'a LinearModelDraw,
    kernel: GaussianKernel,
}

impl<'a> MediatorLaw<'a> {
    pub fn new(draw: &'a LinearModelDraw, p: usize) -> Result<Self> {
        if draw.beta.len() != p + 2 {
            return Err(Error::DimensionMismatch {
                expected: p + 2,
                found: draw.beta.len(),
            });
        }
        Ok(MediatorLaw {
            draw,
            kernel: GaussianKernel::new(draw.sigma2)?,
        })
    }

    pub fn sd(&self) -> f64 {
        self.draw.sigma2.sqrt()
    }

    /// Conditional means `(E[M | A=0, x], E[M | A=1, x])`.
    #[inline]
    pub fn arm_means(&self, x: &[f64]) -> (f64, f64) {
        let b = &self.draw.beta;
        let base = b[0] + b[2..].iter().zip(x).map(|(c, xi)| c * xi).sum::<f64>();
        (base, base + b[1])
    }

    #[inline]
    pub fn score(&self, m: f64, means: (f64, f64)) -> BridgeScore {
        BridgeScore::from_logs(
            self.kernel.log_density(m, means.0),
            self.kernel.log_density(m, means.1),
        )
    }

    /// Log-scale bridge score without exponentiating; `b0`/`b1` are left 0.
    #[inline]
    pub fn log_score(&self, m: f64, means: (f64, f64)) -> BridgeScore {
        BridgeScore {
            b0: 0.0,
            b1: 0.0,
            l0: self.kernel.log_density(m, means.0),
            l1: self.kernel.log_density(m, means.1),
        }
    }
}

pub fn bridge_at(m: f64, x: &[f64], draw: &LinearModelDraw) -> Result<BridgeScore> {
    if draw.beta.len() != x.len() + 2 {
        return Err(Error::DimensionMismatch {
            expected: draw.beta.len().saturating_sub(2),
            found: x.len(),
        });
    }
    let law = MediatorLaw::new(draw, x.len())?;
    Ok(law.score(m, law.arm_means(x)))
}

pub const OUTCOME_REGRESSOR_COUNT: usize = 8;

/// Column labels of [`outcome_regressors`], in order.
pub const OUTCOME_REGRESSOR_NAMES: [&str; OUTCOME_REGRESSOR_COUNT] =
    ["intercept", "m", "a", "l0", "l1", "m_l0", "m_l1", "l0_l1"];

/// Index of the treatment indicator within the outcome regressors.
pub const OUTCOME_TREATMENT_INDEX: usize = 2;

/// `(1, m, a, l0, l1, m*l0, m*l1, l0*l1)`. The order is part of the public
/// contract: calibration code addresses coefficients by position.
#[inline]
pub fn outcome_regressors(m: f64, a: Arm, bs: &BridgeScore) -> [f64; OUTCOME_REGRESSOR_COUNT] {
    [
        1.0,
        m,
        a.indicator(),
        bs.l0,
        bs.l1,
        m * bs.l0,
        m * bs.l1,
        bs.l0 * bs.l1,
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linear_bayes::normal_log_density;

    fn phi(z: f64) -> f64 {
        (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
    }

    #[test]
    fn zero_treatment_coefficient_gives_equal_components() {
        let draw = LinearModelDraw {
            beta: vec![0.3, 0.0, -1.2],
            sigma2: 0.7,
        };
        for (m, x) in [(0.0, 1.0), (2.5, -0.3), (-4.0, 10.0)] {
            let bs = bridge_at(m, &[x], &draw).unwrap();
            assert_eq!(bs.b0, bs.b1);
            assert_eq!(bs.l0, bs.l1);
        }
    }

    #[test]
    fn standard_normal_table_values() {
        let draw = LinearModelDraw {
            beta: vec![0.0, 1.0, 0.0],
            sigma2: 1.0,
        };
        let bs = bridge_at(0.0, &[3.7], &draw).unwrap();
        assert!((bs.b0 - phi(0.0)).abs() < 1e-15);
        assert!((bs.b1 - phi(-1.0)).abs() < 1e-15);
        assert!((bs.b0 - 0.398_942_3).abs() < 1e-7);
        assert!((bs.b1 - 0.241_970_7).abs() < 1e-7);
    }

    #[test]
    fn logs_match_direct_density() {
        let draw = LinearModelDraw {
            beta: vec![0.5, -0.8, 0.25, 1.5],
            sigma2: 2.2,
        };
        let x = [0.4, -1.1];
        let m = 1.3;
        let bs = bridge_at(m, &x, &draw).unwrap();
        let mu0 = 0.5 + 0.25 * 0.4 + 1.5 * -1.1;
        let mu1 = mu0 - 0.8;
        assert!((bs.l0 - normal_log_density(m, mu0, 2.2).unwrap()).abs() < 1e-12);
        assert!((bs.l1 - normal_log_density(m, mu1, 2.2).unwrap()).abs() < 1e-12);
        assert_eq!(bs.b0, bs.l0.exp());
    }

    #[test]
    fn dimension_checked() {
        let draw = LinearModelDraw {
            beta: vec![0.0, 1.0, 0.0],
            sigma2: 1.0,
        };
        assert!(matches!(
            bridge_at(0.0, &[1.0, 2.0], &draw),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn regressor_layout() {
        let bs = BridgeScore::from_logs(-1.0, -2.0);
        assert_eq!(
            outcome_regressors(2.0, Arm::Treated, &bs),
            [1.0, 2.0, 1.0, -1.0, -2.0, -2.0, -4.0, 2.0]
        );
        let r = outcome_regressors(0.0, Arm::Control, &bs);
        assert_eq!(r, [1.0, 0.0, 0.0, -1.0, -2.0, 0.0, 0.0, 2.0]);
        let same = BridgeScore::from_logs(-0.7, -0.7);
        let r = outcome_regressors(1.3, Arm::Treated, &same);
        assert_eq!(r[3], r[4]);
        assert_eq!(r[5], r[6]);
    }

    #[test]
    fn density_integrates_to_one() {
        // composite Gauss-Legendre (5 nodes) over mean +- 8 sd
        let nodes = [
            0.0,
            -0.538_469_310_105_683_1,
            0.538_469_310_105_683_1,
            -0.906_179_845_938_664,
            0.906_179_845_938_664,
        ];
        let weights = [
            0.568_888_888_888_888_9,
            0.478_628_670_499_366_5,
            0.478_628_670_499_366_5,
            0.236_926_885_056_189_1,
            0.236_926_885_056_189_1,
        ];
        let draw = LinearModelDraw {
            beta: vec![0.2, 1.4, -0.6],
            sigma2: 0.8,
        };
        let x = [0.9];
        let law = MediatorLaw::new(&draw, 1).unwrap();
        let (mu0, mu1) = law.arm_means(&x);
        for (arm, mu) in [(0, mu0), (1, mu1)] {
            let (lo, hi) = (mu - 8.0 * law.sd(), mu + 8.0 * law.sd());
            let panels = 200;
            let h = (hi - lo) / panels as f64;
            let mut total = 0.0;
            for k in 0..panels {
                let mid = lo + (k as f64 + 0.5) * h;
                for (t, w) in nodes.iter().zip(weights) {
                    let bs = bridge_at(mid + 0.5 * h * t, &x, &draw).unwrap();
                    total += 0.5 * h * w * if arm == 0 { bs.b0 } else { bs.b1 };
                }
            }
            assert!((total - 1.0).abs() < 1e-6, "arm {arm}: {total}");
        }
    }
}
