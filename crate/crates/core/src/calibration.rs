//! Calibration of the pointwise envelope inputs `(eta, gamma)`.
//!
//! Two routes:
//!
//! * **Benchmark**: an observed covariate `W` stands in for the latent
//!   confounder. `eta_hat` comes from an auxiliary outcome regression that adds
//!   `W'` to the bridge-score regressors; `gamma_hat` is the supremum, over the
//!   observed `W'` values of the arm, of the density ratio between the fitted
//!   laws of `W'` given `(M, l0, l1)` and given `(l0, l1)` only. `W'` is `W`
//!   itself (raw scale) or its within-arm fractional rank (rank scale).
//! * **Residual budget**: `eta <= 2 sigma_eta sqrt(k)` with `sigma_eta` the
//!   treated-arm residual scale of the outcome model, and `gamma <= g`.
//!
//! All benchmark regressions run on a within-arm z-score of `W'`. The fitted
//! density ratio and `|coef| * range` are both unchanged by that affine map,
//! and it makes the weak coefficient and variance priors unit-free, so raw
//! results are invariant to linear rescaling of `W`.

use log::warn;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::bridge::{outcome_regressors, BridgeScore};
use crate::data::{Arm, Dataset};
use crate::envelope::xi_pointwise;
use crate::error::{Error, Result};
use crate::linear_bayes::{nig_update, GaussianKernel, LinearModelDraw, PriorSpec};
use crate::summation::NeumaierSum;
use crate::working_model::{observed_scores, ModelDraw};

/// Residual selection grid that parallels the multiplicative selection-ratio scale.
pub const DEFAULT_G_GRID: [f64; 4] = [1.25, 1.5, 2.0, 3.0];

pub const DEFAULT_GAMMA_CAP: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchmarkScale {
    Raw,
    Rank,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkCalib {
    pub lambda: [f64; 2],
    pub kappa: [f64; 2],
    pub scale: BenchmarkScale,
    pub eta_hat: [f64; 2],
    pub gamma_hat: [f64; 2],
}

impl BenchmarkCalib {
    pub fn validate(&self) -> Result<()> {
        for a in 0..2 {
            check_amplification("lambda", self.lambda[a])?;
            check_amplification("kappa", self.kappa[a])?;
            if !(self.gamma_hat[a] >= 1.0) {
                return Err(Error::InvalidSensitivityParam(format!(
                    "gamma_hat must be >= 1, got {}",
                    self.gamma_hat[a]
                )));
            }
        }
        Ok(())
    }

    pub fn envelope(&self, arm: Arm) -> Result<f64> {
        let a = arm.index();
        benchmark_envelope(self.eta_hat[a], self.gamma_hat[a], self.lambda[a], self.kappa[a])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualBudgetCalib {
    pub k: [f64; 2],
    pub g: [f64; 2],
    pub sigma_eta: f64,
}

impl ResidualBudgetCalib {
    pub fn envelope(&self, arm: Arm) -> Result<f64> {
        let a = arm.index();
        residual_envelope(self.sigma_eta, self.k[a], self.g[a])
    }
}

pub(crate) fn check_amplification(name: &str, v: f64) -> Result<()> {
    if v >= 1.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidSensitivityParam(format!(
            "{name} must be a finite value >= 1, got {v}"
        )))
    }
}

pub(crate) fn check_budget_share(v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::InvalidSensitivityParam(format!(
            "residual budget share k must lie in [0, 1], got {v}"
        )))
    }
}

pub(crate) fn check_selection_grid(v: f64) -> Result<()> {
    if v >= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidSensitivityParam(format!(
            "selection grid value g must be >= 1, got {v}"
        )))
    }
}

/// `lambda * eta_hat * (kappa * gamma_hat - 1) / (kappa * gamma_hat)`.
pub fn benchmark_envelope(eta_hat: f64, gamma_hat: f64, lambda: f64, kappa: f64) -> Result<f64> {
    check_amplification("lambda", lambda)?;
    check_amplification("kappa", kappa)?;
    if !(gamma_hat >= 1.0) {
        return Err(Error::InvalidSensitivityParam(format!(
            "gamma_hat must be >= 1, got {gamma_hat}"
        )));
    }
    xi_pointwise(lambda * eta_hat, kappa * gamma_hat)
}

/// `2 sigma_eta sqrt(k) (g - 1) / g`.
pub fn residual_envelope(sigma_eta: f64, k: f64, g: f64) -> Result<f64> {
    check_budget_share(k)?;
    check_selection_grid(g)?;
    if !(sigma_eta >= 0.0) {
        return Err(Error::InvalidSensitivityParam(format!(
            "sigma_eta must be >= 0, got {sigma_eta}"
        )));
    }
    xi_pointwise(2.0 * sigma_eta * k.sqrt(), g)
}

/// `W'` for the rows of `arm`, in dataset order.
pub fn benchmark_values(data: &Dataset, arm: Arm, scale: BenchmarkScale) -> Result<Vec<f64>> {
    match scale {
        BenchmarkScale::Raw => data.benchmark_in_arm(arm),
        BenchmarkScale::Rank => data.fractional_rank_within_arm(arm),
    }
}

/// Within-arm z-score; `None` when the values are constant.
fn zscore(values: &[f64]) -> Option<Vec<f64>> {
    let n = values.len() as f64;
    let mean = values.iter().copied().collect::<NeumaierSum>().total() / n;
    let var = values
        .iter()
        .map(|v| (v - mean).powi(2))
        .collect::<NeumaierSum>()
        .total()
        / n;
    let sd = var.sqrt();
    if !(sd > 0.0) {
        return None;
    }
    Some(values.iter().map(|v| (v - mean) / sd).collect())
}

fn range(values: &[f64]) -> f64 {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    hi - lo
}

/// Posterior-mean coefficients and point variance of a conjugate fit.
fn point_fit(rows: &[Vec<f64>], response: &[f64], prior: &PriorSpec) -> Result<(Vec<f64>, f64)> {
    let q = rows.first().map_or(0, Vec::len);
    let design = DMatrix::from_fn(rows.len(), q, |i, j| rows[i][j]);
    let y = DVector::from_column_slice(response);
    let post = nig_update(&prior.build(q)?, &design, &y)?;
    Ok((post.mean().iter().copied().collect(), post.sigma2_point()))
}

/// Benchmark-calibrated outcome range per arm, from precomputed observed
/// bridge scores.
pub fn benchmark_eta_from_scores(
    data: &Dataset,
    scores: &[BridgeScore],
    scale: BenchmarkScale,
    prior: &PriorSpec,
) -> Result<[f64; 2]> {
    let mut out = [0.0; 2];
    for arm in Arm::BOTH {
        let w = benchmark_values(data, arm, scale)?;
        let Some(wz) = zscore(&w) else {
            warn!("benchmark is constant in arm {}; eta_hat set to 0", arm.index());
            continue;
        };
        let mut design = Vec::with_capacity(w.len());
        let mut response = Vec::with_capacity(w.len());
        let arm_rows = data
            .rows()
            .iter()
            .zip(scores)
            .filter(|(r, _)| r.a == arm);
        for ((row, bs), &wv) in arm_rows.zip(&wz) {
            let full = outcome_regressors(row.m, arm, bs);
            // the treatment column is constant within an arm
            let mut x: Vec<f64> = full
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != crate::bridge::OUTCOME_TREATMENT_INDEX)
                .map(|(_, v)| *v)
                .collect();
            x.push(wv);
            design.push(x);
            response.push(row.y);
        }
        let (coef, _) = point_fit(&design, &response, prior)?;
        out[arm.index()] = coef.last().copied().unwrap_or(0.0).abs() * range(&wz);
    }
    Ok(out)
}

pub fn estimate_benchmark_eta(
    data: &Dataset,
    draw: &ModelDraw,
    scale: BenchmarkScale,
    prior: &PriorSpec,
) -> Result<[f64; 2]> {
    let scores = observed_scores(data, &draw.mediator)?;
    benchmark_eta_from_scores(data, &scores, scale, prior)
}

/// `sup_{w in support} N(w; cond) / N(w; reduced)` for Gaussian laws given as
/// `(mean, variance)`. `sorted_support` must be sorted ascending and nonempty.
///
/// The log ratio is quadratic in `w`, so the supremum over a finite set is at
/// an endpoint (convex or linear case) or at a neighbour of the vertex
/// (concave case); only those candidates are evaluated.
pub fn sup_density_ratio(cond: (f64, f64), reduced: (f64, f64), sorted_support: &[f64]) -> Result<f64> {
    let kc = GaussianKernel::new(cond.1)?;
    let kr = GaussianKernel::new(reduced.1)?;
    Ok(sup_log_ratio(&kc, cond.0, &kr, reduced.0, cond.1, reduced.1, sorted_support).exp())
}

#[inline]
fn sup_log_ratio(
    kc: &GaussianKernel,
    mean_c: f64,
    kr: &GaussianKernel,
    mean_r: f64,
    var_c: f64,
    var_r: f64,
    support: &[f64],
) -> f64 {
    let log_ratio = |w: f64| kc.log_density(w, mean_c) - kr.log_density(w, mean_r);
    let first = support[0];
    let last = support[support.len() - 1];
    let mut best = log_ratio(first).max(log_ratio(last));
    let quad = 0.5 * (1.0 / var_r - 1.0 / var_c);
    if quad < 0.0 {
        let lin = mean_c / var_c - mean_r / var_r;
        let vertex = -lin / (2.0 * quad);
        let idx = support.partition_point(|&s| s < vertex);
        for j in [idx.saturating_sub(1), idx.min(support.len() - 1)] {
            best = best.max(log_ratio(support[j]));
        }
    }
    best
}

/// Fitted laws of `W'` within one arm, with and without the mediator.
#[derive(Debug, Clone)]
pub struct SelectionRatioModel {
    full_coef: [f64; 4],
    reduced_coef: [f64; 3],
    full_var: f64,
    reduced_var: f64,
    full_kernel: GaussianKernel,
    reduced_kernel: GaussianKernel,
    support: Vec<f64>,
}

impl SelectionRatioModel {
    /// Uncapped `sup_w` density ratio at evaluation point `(m, b)`.
    #[inline]
    pub fn ratio_at(&self, m: f64, bs: &BridgeScore) -> f64 {
        let f = &self.full_coef;
        let r = &self.reduced_coef;
        let mean_full = f[0] + f[1] * m + f[2] * bs.l0 + f[3] * bs.l1;
        let mean_red = r[0] + r[1] * bs.l0 + r[2] * bs.l1;
        sup_log_ratio(
            &self.full_kernel,
            mean_full,
            &self.reduced_kernel,
            mean_red,
            self.full_var,
            self.reduced_var,
            &self.support,
        )
        .exp()
    }

    /// `gamma_hat(m, b)`: the ratio clamped to `[1, cap]`.
    #[inline]
    pub fn gamma_at(&self, m: f64, bs: &BridgeScore, cap: f64) -> f64 {
        self.ratio_at(m, bs).clamp(1.0, cap)
    }
}

/// Per-arm selection-ratio models; `None` for an arm whose benchmark is
/// constant (its `gamma_hat` is identically 1).
pub fn fit_selection_models(
    data: &Dataset,
    scores: &[BridgeScore],
    scale: BenchmarkScale,
    prior: &PriorSpec,
) -> Result<[Option<SelectionRatioModel>; 2]> {
    let mut out = [None, None];
    for arm in Arm::BOTH {
        let w = benchmark_values(data, arm, scale)?;
        let Some(wz) = zscore(&w) else {
            warn!("benchmark is constant in arm {}; gamma_hat set to 1", arm.index());
            continue;
        };
        let (full_rows, reduced_rows): (Vec<Vec<f64>>, Vec<Vec<f64>>) = data
            .rows()
            .iter()
            .zip(scores)
            .filter(|(r, _)| r.a == arm)
            .map(|(r, bs)| (vec![1.0, r.m, bs.l0, bs.l1], vec![1.0, bs.l0, bs.l1]))
            .unzip();
        let (fc, fv) = point_fit(&full_rows, &wz, prior)?;
        let (rc, rv) = point_fit(&reduced_rows, &wz, prior)?;
        let mut support = wz;
        support.sort_by(f64::total_cmp);
        support.dedup();
        out[arm.index()] = Some(SelectionRatioModel {
            full_coef: [fc[0], fc[1], fc[2], fc[3]],
            reduced_coef: [rc[0], rc[1], rc[2]],
            full_var: fv,
            reduced_var: rv,
            full_kernel: GaussianKernel::new(fv)?,
            reduced_kernel: GaussianKernel::new(rv)?,
            support,
        });
    }
    Ok(out)
}

/// `gamma_hat_a(m, b)` at each evaluation point, for both arms.
pub fn estimate_benchmark_gamma(
    data: &Dataset,
    draw: &ModelDraw,
    scale: BenchmarkScale,
    prior: &PriorSpec,
    points: &[(f64, BridgeScore)],
    cap: f64,
) -> Result<[Vec<f64>; 2]> {
    if !(cap >= 1.0) {
        return Err(Error::InvalidSensitivityParam(format!("gamma cap must be >= 1, got {cap}")));
    }
    let scores = observed_scores(data, &draw.mediator)?;
    let models = fit_selection_models(data, &scores, scale, prior)?;
    let per_arm = |model: &Option<SelectionRatioModel>| match model {
        Some(m) => points.iter().map(|(mv, bs)| m.gamma_at(*mv, bs, cap)).collect(),
        None => vec![1.0; points.len()],
    };
    Ok([per_arm(&models[0]), per_arm(&models[1])])
}

/// Treated-arm residual scale from precomputed observed bridge scores.
pub fn sigma_eta_from_scores(data: &Dataset, scores: &[BridgeScore], outcome: &LinearModelDraw) -> Result<f64> {
    let mut acc = NeumaierSum::new();
    let mut n = 0usize;
    for (row, bs) in data.rows().iter().zip(scores) {
        if row.a != Arm::Treated {
            continue;
        }
        let resid = row.y - outcome.predict(&outcome_regressors(row.m, Arm::Treated, bs));
        acc.add(resid * resid);
        n += 1;
    }
    if n == 0 {
        return Err(Error::EmptyArm { arm: 1 });
    }
    Ok((acc.total() / n as f64).sqrt())
}

/// Square root of the mean squared treated-arm residual under one draw.
pub fn estimate_sigma_eta(data: &Dataset, draw: &ModelDraw) -> Result<f64> {
    let scores = observed_scores(data, &draw.mediator)?;
    sigma_eta_from_scores(data, &scores, &draw.outcome)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_sup(cond: (f64, f64), red: (f64, f64), support: &[f64]) -> f64 {
        let dens = |w: f64, (m, v): (f64, f64)| {
            (-(w - m).powi(2) / (2.0 * v)).exp() / (2.0 * std::f64::consts::PI * v).sqrt()
        };
        support
            .iter()
            .map(|&w| dens(w, cond) / dens(w, red))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    #[test]
    fn two_normal_ratio_closed_form() {
        let support: Vec<f64> = (0..=60).map(|i| -3.0 + 0.1 * i as f64).collect();
        let got = sup_density_ratio((0.5, 1.0), (0.0, 1.0), &support).unwrap();
        let expected = (0.5f64 * 3.0 - 0.125).exp();
        assert!((got - expected).abs() < 1e-12 * expected);
    }

    #[test]
    fn identical_laws_give_unit_ratio() {
        let support = [-1.0, 0.0, 2.0];
        assert_eq!(sup_density_ratio((0.3, 2.0), (0.3, 2.0), &support).unwrap(), 1.0);
    }

    #[test]
    fn fast_supremum_matches_brute_force() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        for _ in 0..2000 {
            let n = rng.random_range(1..40);
            let mut support: Vec<f64> = (0..n).map(|_| rng.random_range(-4.0..4.0)).collect();
            support.sort_by(f64::total_cmp);
            let cond = (rng.random_range(-2.0..2.0), rng.random_range(0.2..3.0));
            let red = (rng.random_range(-2.0..2.0), rng.random_range(0.2..3.0));
            let fast = sup_density_ratio(cond, red, &support).unwrap();
            let brute = brute_sup(cond, red, &support);
            assert!((fast - brute).abs() <= 1e-10 * brute, "{fast} vs {brute}");
        }
    }

    #[test]
    fn benchmark_envelope_examples() {
        for eta in [0.0, 0.5, 7.0] {
            assert_eq!(benchmark_envelope(eta, 1.0, 1.0, 1.0).unwrap(), 0.0);
        }
        assert!((benchmark_envelope(2.0, 1.5, 1.0, 2.0).unwrap() - 4.0 / 3.0).abs() < 1e-15);
        let sweep: Vec<f64> = [1.0, 1.5, 2.0, 3.0]
            .iter()
            .map(|&k| benchmark_envelope(1.2, 1.3, 1.0, k).unwrap())
            .collect();
        assert!(sweep.windows(2).all(|w| w[0] <= w[1]));
        assert!(benchmark_envelope(1.0, 1.5, 0.9, 1.0).is_err());
        assert!(benchmark_envelope(1.0, 1.5, 1.0, 0.5).is_err());
    }

    #[test]
    fn residual_envelope_examples() {
        assert_eq!(residual_envelope(3.0, 0.0, 2.0).unwrap(), 0.0);
        assert_eq!(residual_envelope(3.0, 0.7, 1.0).unwrap(), 0.0);
        assert_eq!(residual_envelope(1.0, 0.25, 2.0).unwrap(), 0.5);
        assert!(residual_envelope(1.0, 1.5, 2.0).is_err());
        assert!(residual_envelope(1.0, 0.5, 0.5).is_err());
    }

    #[test]
    fn default_grid() {
        assert_eq!(DEFAULT_G_GRID, [1.25, 1.5, 2.0, 3.0]);
    }
}
