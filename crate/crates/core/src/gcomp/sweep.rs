use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::engine::{run_settings, RunOptions, RunResult};
use super::summary::quantile_type7;
use super::{Calibration, SensitivitySetting};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::summation::compensated_mean;

/// A sensitivity parameter that can be swept. The unsuffixed names set both
/// arms to the same value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum SweepAxis {
    Lambda(Option<usize>),
    Kappa(Option<usize>),
    K(Option<usize>),
    G(Option<usize>),
}

impl SweepAxis {
    pub fn name(&self) -> String {
        let (base, arm) = match self {
            SweepAxis::Lambda(a) => ("lambda", a),
            SweepAxis::Kappa(a) => ("kappa", a),
            SweepAxis::K(a) => ("k", a),
            SweepAxis::G(a) => ("g", a),
        };
        match arm {
            Some(a) => format!("{base}{a}"),
            None => base.to_string(),
        }
    }

    /// `setting` with this parameter set to `value`.
    pub fn apply(&self, setting: &SensitivitySetting, value: f64) -> Result<SensitivitySetting> {
        let set = |pair: &mut [f64; 2], arm: &Option<usize>| match arm {
            Some(a) => pair[*a] = value,
            None => *pair = [value, value],
        };
        let mut out = *setting;
        match (&mut out.calibration, self) {
            (Calibration::Benchmark { lambda, .. }, SweepAxis::Lambda(a)) => set(lambda, a),
            (Calibration::Benchmark { kappa, .. }, SweepAxis::Kappa(a)) => set(kappa, a),
            (Calibration::ResidualBudget { k, .. }, SweepAxis::K(a)) => set(k, a),
            (Calibration::ResidualBudget { g, .. }, SweepAxis::G(a)) => set(g, a),
            (c, axis) => {
                return Err(Error::ConfigMismatch(format!(
                    "route {} has no parameter {}",
                    c.route_name(),
                    axis.name()
                )))
            }
        }
        out.validate()?;
        Ok(out)
    }

    /// Value at which the envelope of a symmetric axis must vanish.
    fn anchor(&self) -> Option<f64> {
        match self {
            SweepAxis::K(None) => Some(0.0),
            SweepAxis::G(None) => Some(1.0),
            _ => None,
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (base, arm) = match s.strip_suffix('0') {
            Some(b) => (b, Some(0)),
            None => match s.strip_suffix('1') {
                Some(b) => (b, Some(1)),
                None => (s, None),
            },
        };
        match base {
            "lambda" => Ok(SweepAxis::Lambda(arm)),
            "kappa" => Ok(SweepAxis::Kappa(arm)),
            "k" => Ok(SweepAxis::K(arm)),
            "g" => Ok(SweepAxis::G(arm)),
            _ => Err(Error::InvalidSpec(format!("unknown sweep axis {s:?}"))),
        }
    }
}

impl TryFrom<String> for SweepAxis {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<SweepAxis> for String {
    fn from(a: SweepAxis) -> String {
        a.name()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Overlay {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

/// One grid point of an envelope sweep. The envelope columns use the
/// directional endpoints `delta_bar_1 = +-xi_bar_1`, `delta_bar_0 = -+xi_bar_0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub overlay: Option<f64>,
    pub value: f64,
    /// Posterior mean of `delta1 - theta_si`.
    pub si_center: f64,
    pub lower: f64,
    pub upper: f64,
    /// Posterior mean of `xi_bar_0 + xi_bar_1`.
    pub half_width: f64,
    /// 2.5% quantile of the lower-envelope draws.
    pub lower_credible: f64,
    /// 97.5% quantile of the upper-envelope draws.
    pub upper_credible: f64,
    /// Posterior mean NIE under the setting's own correction prior.
    pub nie_mean: f64,
}

impl SweepRow {
    fn from_result(overlay: Option<f64>, value: f64, result: &RunResult) -> Result<Self> {
        let si: Vec<f64> = result.draws.iter().map(|d| d.nie_si()).collect();
        let width: Vec<f64> = result.draws.iter().map(|d| d.xi_bar_0 + d.xi_bar_1).collect();
        let mut lower: Vec<f64> = si.iter().zip(&width).map(|(s, w)| s - w).collect();
        let mut upper: Vec<f64> = si.iter().zip(&width).map(|(s, w)| s + w).collect();
        let mean = |v: &[f64]| compensated_mean(v).ok_or(Error::EmptyCollection);
        let row = SweepRow {
            overlay,
            value,
            si_center: mean(&si)?,
            lower: mean(&lower)?,
            upper: mean(&upper)?,
            half_width: mean(&width)?,
            lower_credible: 0.0,
            upper_credible: 0.0,
            nie_mean: result.summary.get("nie").map_or(f64::NAN, |q| q.mean),
        };
        lower.sort_by(f64::total_cmp);
        upper.sort_by(f64::total_cmp);
        Ok(SweepRow {
            lower_credible: quantile_type7(&lower, 0.025),
            upper_credible: quantile_type7(&upper, 0.975),
            ..row
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub axis: SweepAxis,
    pub overlay_axis: Option<SweepAxis>,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub const COLUMNS: [&'static str; 9] = [
        "overlay",
        "value",
        "si_center",
        "lower",
        "upper",
        "half_width",
        "lower_credible",
        "upper_credible",
        "nie_mean",
    ];

    /// Monotone half-width along the axis within each overlay group, a common
    /// SI center, and a zero half-width at the `k = 0` / `g = 1` anchors.
    pub fn check_contracts(&self) -> Result<()> {
        let center = self.rows.first().map(|r| r.si_center);
        let mut groups: Vec<Option<f64>> = Vec::new();
        for r in &self.rows {
            if Some(r.si_center.to_bits()) != center.map(f64::to_bits) {
                return Err(Error::NumericalFailure(format!(
                    "SI center varies across the {} sweep",
                    self.axis
                )));
            }
            if self.axis.anchor() == Some(r.value) && r.half_width != 0.0 {
                return Err(Error::NumericalFailure(format!(
                    "half-width {} at the {} = {} anchor",
                    r.half_width, self.axis, r.value
                )));
            }
            if !groups.iter().any(|g| g.map(f64::to_bits) == r.overlay.map(f64::to_bits)) {
                groups.push(r.overlay);
            }
        }
        for g in groups {
            let mut rows: Vec<&SweepRow> = self
                .rows
                .iter()
                .filter(|r| r.overlay.map(f64::to_bits) == g.map(f64::to_bits))
                .collect();
            rows.sort_by(|a, b| a.value.total_cmp(&b.value));
            for w in rows.windows(2) {
                if w[1].half_width < w[0].half_width {
                    return Err(Error::NumericalFailure(format!(
                        "half-width decreases along {} between {} and {}",
                        self.axis, w[0].value, w[1].value
                    )));
                }
            }
        }
        Ok(())
    }
}

pub fn sweep(
    data: &Dataset,
    base: &SensitivitySetting,
    axis: SweepAxis,
    grid: &[f64],
    opts: &RunOptions,
) -> Result<SweepTable> {
    sweep_with_overlay(data, base, axis, grid, None, opts)
}

/// Runs every `(overlay value, grid value)` pair on shared draws. Rows are
/// ordered by overlay value, then grid value, as given.
pub fn sweep_with_overlay(
    data: &Dataset,
    base: &SensitivitySetting,
    axis: SweepAxis,
    grid: &[f64],
    overlay: Option<&Overlay>,
    opts: &RunOptions,
) -> Result<SweepTable> {
    if grid.is_empty() || overlay.is_some_and(|o| o.values.is_empty()) {
        return Err(Error::InvalidSpec("sweep grids must be nonempty".into()));
    }
    let overlay_values: Vec<Option<f64>> = match overlay {
        Some(o) => o.values.iter().map(|&v| Some(v)).collect(),
        None => vec![None],
    };
    let mut keys = Vec::new();
    let mut settings = Vec::new();
    for &ov in &overlay_values {
        let outer = match (overlay, ov) {
            (Some(o), Some(v)) => o.axis.apply(base, v)?,
            _ => *base,
        };
        for &value in grid {
            settings.push(axis.apply(&outer, value)?);
            keys.push((ov, value));
        }
    }
    let results = run_settings(data, &settings, opts)?;
    let rows = keys
        .iter()
        .zip(&results)
        .map(|(&(ov, value), r)| SweepRow::from_result(ov, value, r))
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepTable {
        axis,
        overlay_axis: overlay.map(|o| o.axis),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calibration::BenchmarkScale;

    #[test]
    fn axis_names_round_trip() {
        for name in ["lambda", "kappa", "k", "g", "kappa0", "lambda1", "k0", "g1"] {
            assert_eq!(name.parse::<SweepAxis>().unwrap().name(), name);
        }
        assert!("gamma".parse::<SweepAxis>().is_err());
    }

    #[test]
    fn apply_checks_route() {
        let si = SensitivitySetting::si_anchor();
        assert!(matches!(SweepAxis::Kappa(None).apply(&si, 2.0), Err(Error::ConfigMismatch(_))));
        let bench = SensitivitySetting {
            calibration: Calibration::Benchmark {
                scale: BenchmarkScale::Raw,
                lambda: [1.0, 1.0],
                kappa: [1.0, 1.0],
            },
            ..si
        };
        let s = SweepAxis::Kappa(Some(1)).apply(&bench, 3.0).unwrap();
        assert_eq!(
            s.calibration,
            Calibration::Benchmark {
                scale: BenchmarkScale::Raw,
                lambda: [1.0, 1.0],
                kappa: [1.0, 3.0]
            }
        );
        assert!(SweepAxis::Kappa(None).apply(&bench, 0.5).is_err());
        assert!(SweepAxis::G(None).apply(&bench, 2.0).is_err());
    }
}
