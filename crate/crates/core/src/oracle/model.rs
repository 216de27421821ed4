use serde::{Deserialize, Serialize};

use crate::envelope::xi_pointwise;
use crate::error::{Error, Result};
use crate::summation::{compensated_sum, NeumaierSum};

/// Tolerance for equality of bridge-score pairs and for law normalization.
pub const EXACT_TOL: f64 = 1e-12;

/// Finite joint law of `(X, U, M)` given each arm, with `A` randomized and
/// a latent `U` drawn given `X` only.
///
/// `outcome_mean[x][u][m]` is `E[Y(1, m) | X = x, U = u]`; the potential
/// outcome is independent of `(A, M)` given `(X, U)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteModel {
    pub x_support: Vec<f64>,
    pub u_support: Vec<f64>,
    pub m_support: Vec<f64>,
    pub p_x: Vec<f64>,
    /// `[x][u]`
    pub p_u_given_x: Vec<Vec<f64>>,
    /// `[a][x][u][m]`
    pub p_m_given_axu: Vec<Vec<Vec<Vec<f64>>>>,
    /// `[x][u][m]`
    pub outcome_mean: Vec<Vec<Vec<f64>>>,
}

fn check_law(name: &str, p: &[f64], len: usize) -> Result<()> {
    if p.len() != len {
        return Err(Error::DimensionMismatch {
            expected: len,
            found: p.len(),
        });
    }
    if let Some(v) = p.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
        return Err(Error::InvalidSpec(format!("{name} has invalid probability {v}")));
    }
    let total = compensated_sum(p.iter().copied());
    if (total - 1.0).abs() > EXACT_TOL {
        return Err(Error::InvalidSpec(format!("{name} sums to {total}")));
    }
    Ok(())
}

impl DiscreteModel {
    pub fn nx(&self) -> usize {
        self.x_support.len()
    }

    pub fn nu(&self) -> usize {
        self.u_support.len()
    }

    pub fn nm(&self) -> usize {
        self.m_support.len()
    }

    pub fn validate(&self) -> Result<()> {
        let (nx, nu, nm) = (self.nx(), self.nu(), self.nm());
        if nx == 0 || nu == 0 || nm == 0 {
            return Err(Error::InvalidSpec("empty support".into()));
        }
        check_law("p_x", &self.p_x, nx)?;
        if self.p_u_given_x.len() != nx || self.outcome_mean.len() != nx || self.p_m_given_axu.len() != 2 {
            return Err(Error::InvalidSpec("table dimensions do not match supports".into()));
        }
        for x in 0..nx {
            check_law(&format!("p_u_given_x[{x}]"), &self.p_u_given_x[x], nu)?;
            if self.outcome_mean[x].len() != nu
                || self.outcome_mean[x].iter().any(|r| r.len() != nm || r.iter().any(|v| !v.is_finite()))
            {
                return Err(Error::InvalidSpec(format!("outcome_mean[{x}] malformed")));
            }
        }
        for a in 0..2 {
            if self.p_m_given_axu[a].len() != nx {
                return Err(Error::InvalidSpec("p_m_given_axu dimensions".into()));
            }
            for x in 0..nx {
                if self.p_m_given_axu[a][x].len() != nu {
                    return Err(Error::InvalidSpec("p_m_given_axu dimensions".into()));
                }
                for u in 0..nu {
                    check_law(&format!("p_m_given_axu[{a}][{x}][{u}]"), &self.p_m_given_axu[a][x][u], nm)?;
                }
            }
        }
        Ok(())
    }

    /// `f_a(m | x)`, summing the latent out.
    pub fn mediator_density(&self, arm: usize, x: usize, m: usize) -> f64 {
        compensated_sum((0..self.nu()).map(|u| self.p_u_given_x[x][u] * self.p_m_given_axu[arm][x][u][m]))
    }

    pub fn bridge(&self, m: usize, x: usize) -> (f64, f64) {
        (self.mediator_density(0, x, m), self.mediator_density(1, x, m))
    }
}

/// Groups `x` indices whose bridge-score pairs at `m` agree within
/// [`EXACT_TOL`] in both components. Groups are ordered by first member.
pub fn exact_bridge_partition(model: &DiscreteModel, m: usize) -> Vec<Vec<usize>> {
    let mut groups: Vec<((f64, f64), Vec<usize>)> = Vec::new();
    for x in 0..model.nx() {
        let b = model.bridge(m, x);
        match groups
            .iter_mut()
            .find(|(rep, _)| (rep.0 - b.0).abs() <= EXACT_TOL && (rep.1 - b.1).abs() <= EXACT_TOL)
        {
            Some((_, members)) => members.push(x),
            None => groups.push((b, vec![x])),
        }
    }
    groups.into_iter().map(|(_, g)| g).collect()
}

/// Latent and covariate laws within one `(arm, m, stratum)` cell.
#[derive(Debug, Clone)]
pub(crate) struct StratumLaws {
    pub members: Vec<usize>,
    /// `P(x | S)` aligned with `members`.
    pub weight: Vec<f64>,
    /// `P(x | A=a, M=m, S)` aligned with `members`.
    pub weight_m: Vec<f64>,
    /// `P(u | A=a, S)`
    pub reduced: Vec<f64>,
    /// `P(u | A=a, M=m, S)`
    pub conditional: Vec<f64>,
    /// `E[Y(1,m) | A=a, S, U=u]`; `NaN` where `reduced[u] == 0`.
    pub psi: Vec<f64>,
    /// `P(x, u | S)` and `P(x, u | A=a, M=m, S)`, `[member][u]`.
    pub joint: Vec<Vec<f64>>,
    pub joint_m: Vec<Vec<f64>>,
}

impl StratumLaws {
    pub fn new(model: &DiscreteModel, arm: usize, m: usize, members: &[usize]) -> Result<Self> {
        let nu = model.nu();
        let mass = compensated_sum(members.iter().map(|&x| model.p_x[x]));
        if !(mass > 0.0) {
            return Err(Error::ZeroMassStratum(format!("P(S) = 0 at m = {m}")));
        }
        let weight: Vec<f64> = members.iter().map(|&x| model.p_x[x] / mass).collect();
        let joint: Vec<Vec<f64>> = members
            .iter()
            .zip(&weight)
            .map(|(&x, w)| model.p_u_given_x[x].iter().map(|p| w * p).collect())
            .collect();
        let raw_m: Vec<Vec<f64>> = members
            .iter()
            .zip(&joint)
            .map(|(&x, row)| {
                row.iter()
                    .enumerate()
                    .map(|(u, p)| p * model.p_m_given_axu[arm][x][u][m])
                    .collect()
            })
            .collect();
        let mass_m = compensated_sum(raw_m.iter().flatten().copied());
        if !(mass_m > 0.0) {
            return Err(Error::ZeroMassStratum(format!(
                "P(M = {m} | A = {arm}, S) = 0"
            )));
        }
        let joint_m: Vec<Vec<f64>> = raw_m
            .iter()
            .map(|row| row.iter().map(|p| p / mass_m).collect())
            .collect();
        let column = |t: &[Vec<f64>], u: usize| compensated_sum(t.iter().map(|row| row[u]));
        let reduced: Vec<f64> = (0..nu).map(|u| column(&joint, u)).collect();
        let conditional: Vec<f64> = (0..nu).map(|u| column(&joint_m, u)).collect();
        let weight_m: Vec<f64> = joint_m.iter().map(|row| compensated_sum(row.iter().copied())).collect();
        let psi = (0..nu)
            .map(|u| {
                if reduced[u] > 0.0 {
                    let num = compensated_sum(
                        members
                            .iter()
                            .zip(&joint)
                            .map(|(&x, row)| row[u] * model.outcome_mean[x][u][m]),
                    );
                    num / reduced[u]
                } else {
                    f64::NAN
                }
            })
            .collect();
        Ok(StratumLaws {
            members: members.to_vec(),
            weight,
            weight_m,
            reduced,
            conditional,
            psi,
            joint,
            joint_m,
        })
    }

    /// `E[Y(1,m) | A=a, M=m, S] - E[Y(1,m) | A=a, S]` from the covariate-level table.
    pub fn delta_definitional(&self, model: &DiscreteModel, m: usize) -> f64 {
        let mut acc = NeumaierSum::new();
        for (i, &x) in self.members.iter().enumerate() {
            for u in 0..model.nu() {
                acc.add(model.outcome_mean[x][u][m] * (self.joint_m[i][u] - self.joint[i][u]));
            }
        }
        acc.total()
    }

    /// `sum_u psi(u) [P(u | a, m, S) - P(u | a, S)]`.
    pub fn delta_latent(&self) -> f64 {
        compensated_sum(
            (0..self.psi.len())
                .filter(|&u| self.reduced[u] > 0.0)
                .map(|u| self.psi[u] * (self.conditional[u] - self.reduced[u])),
        )
    }

    pub fn gamma(&self) -> f64 {
        let mut g: f64 = 0.0;
        for (c, r) in self.conditional.iter().zip(&self.reduced) {
            if *r > 0.0 {
                g = g.max(c / r);
            } else if *c > 0.0 {
                return f64::INFINITY;
            }
        }
        g
    }

    pub fn eta(&self) -> f64 {
        let (lo, hi) = self
            .psi
            .iter()
            .zip(&self.reduced)
            .filter(|(_, r)| **r > 0.0)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (p, _)| (lo.min(*p), hi.max(*p)));
        hi - lo
    }

    /// Whether `P(u | x)` is the same for every member, so `X` and `U` are
    /// independent given `(A, B)`.
    pub fn decoupled(&self, model: &DiscreteModel) -> bool {
        let first = &model.p_u_given_x[self.members[0]];
        self.members.iter().all(|&x| {
            model.p_u_given_x[x]
                .iter()
                .zip(first)
                .all(|(a, b)| (a - b).abs() <= EXACT_TOL)
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    /// From the covariate-level outcome table.
    pub delta: f64,
    /// From the latent representation `psi(u)`.
    pub delta_latent: f64,
    pub gamma: f64,
    pub eta: f64,
    pub delta_star: Vec<f64>,
    pub gamma_star: Vec<f64>,
    pub eta_star: Vec<f64>,
}

impl SensitivityReport {
    pub fn xi(&self) -> f64 {
        xi_pointwise(self.eta, self.gamma).unwrap_or(f64::NAN)
    }
}

pub fn exact_sensitivity(model: &DiscreteModel, arm: usize, m: usize, stratum: &[usize]) -> Result<SensitivityReport> {
    let laws = StratumLaws::new(model, arm, m, stratum)?;
    let mut delta_star = Vec::with_capacity(stratum.len());
    let mut gamma_star = Vec::with_capacity(stratum.len());
    let mut eta_star = Vec::with_capacity(stratum.len());
    for &x in stratum {
        let single = StratumLaws::new(model, arm, m, &[x])?;
        delta_star.push(single.delta_definitional(model, m));
        gamma_star.push(single.gamma());
        eta_star.push(single.eta());
    }
    Ok(SensitivityReport {
        delta: laws.delta_definitional(model, m),
        delta_latent: laws.delta_latent(),
        gamma: laws.gamma(),
        eta: laws.eta(),
        delta_star,
        gamma_star,
        eta_star,
    })
}

/// Largest total-variation distance, over the strata at `m`, between
/// `P(X | A=a, M=m, B=b)` and `P(X | A=a, B=b)`.
pub fn check_balancing(model: &DiscreteModel, m: usize, arm: usize) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for stratum in exact_bridge_partition(model, m) {
        let laws = StratumLaws::new(model, arm, m, &stratum)?;
        let tv = 0.5 * compensated_sum(laws.weight.iter().zip(&laws.weight_m).map(|(a, b)| (a - b).abs()));
        worst = worst.max(tv);
    }
    Ok(worst)
}

/// `|Delta(m, b) - E[Delta*(m, X) | A=a, B=b]|`.
pub fn check_projection(model: &DiscreteModel, arm: usize, m: usize, stratum: &[usize]) -> Result<f64> {
    let laws = StratumLaws::new(model, arm, m, stratum)?;
    let report = exact_sensitivity(model, arm, m, stratum)?;
    let mixed = compensated_sum(laws.weight.iter().zip(&report.delta_star).map(|(w, d)| w * d));
    Ok((report.delta - mixed).abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TighteningReport {
    /// `max_x gamma*(m, x) - gamma(m, b)`; never negative.
    pub gamma_gap: f64,
    /// `max_x eta*(m, x) - eta(m, b)`; never negative when `decoupled`.
    pub eta_gap: f64,
    pub decoupled: bool,
}

pub fn check_tightening(model: &DiscreteModel, arm: usize, m: usize, stratum: &[usize]) -> Result<TighteningReport> {
    let laws = StratumLaws::new(model, arm, m, stratum)?;
    let report = exact_sensitivity(model, arm, m, stratum)?;
    let max = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(TighteningReport {
        gamma_gap: max(&report.gamma_star) - report.gamma,
        eta_gap: max(&report.eta_star) - report.eta,
        decoupled: laws.decoupled(model),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarReductionReport {
    /// `E[Y(1, M(0))]` by direct enumeration of the latent law.
    pub theta: f64,
    pub theta_si: f64,
    pub delta_bar: [f64; 2],
    pub xi_bar: [f64; 2],
    /// Largest pointwise envelope over cells with positive control-arm mass.
    pub xi_max: [f64; 2],
    /// `|theta - theta_si - delta_bar_0 + delta_bar_1|`
    pub residual: f64,
}

impl ScalarReductionReport {
    /// Corrections inside their envelopes and envelopes below their suprema.
    pub fn envelopes_consistent(&self, tol: f64) -> bool {
        (0..2).all(|a| self.delta_bar[a].abs() <= self.xi_bar[a] + tol && self.xi_bar[a] <= self.xi_max[a] + tol)
    }
}

pub fn check_scalar_reduction(model: &DiscreteModel) -> Result<ScalarReductionReport> {
    let (nx, nu, nm) = (model.nx(), model.nu(), model.nm());
    let mut theta = NeumaierSum::new();
    for x in 0..nx {
        for u in 0..nu {
            for m in 0..nm {
                theta.add(
                    model.p_x[x]
                        * model.p_u_given_x[x][u]
                        * model.p_m_given_axu[0][x][u][m]
                        * model.outcome_mean[x][u][m],
                );
            }
        }
    }

    let mut theta_si = NeumaierSum::new();
    let mut delta_bar = [NeumaierSum::new(), NeumaierSum::new()];
    let mut xi_bar = [NeumaierSum::new(), NeumaierSum::new()];
    let mut xi_max = [0.0f64; 2];
    for m in 0..nm {
        for stratum in exact_bridge_partition(model, m) {
            // mass of (X in S, M = m) under the control mediator law
            let weight = compensated_sum(
                stratum
                    .iter()
                    .map(|&x| model.p_x[x] * model.mediator_density(0, x, m)),
            );
            if weight == 0.0 {
                continue;
            }
            let treated = StratumLaws::new(model, 1, m, &stratum)?;
            let mu1 = compensated_sum(
                stratum
                    .iter()
                    .enumerate()
                    .flat_map(|(i, &x)| (0..nu).map(move |u| (i, x, u)))
                    .map(|(i, x, u)| treated.joint_m[i][u] * model.outcome_mean[x][u][m]),
            );
            theta_si.add(weight * mu1);
            for a in 0..2 {
                let laws = if a == 1 {
                    treated.clone()
                } else {
                    StratumLaws::new(model, 0, m, &stratum)?
                };
                let xi = xi_pointwise(laws.eta(), laws.gamma())?;
                delta_bar[a].add(weight * laws.delta_definitional(model, m));
                xi_bar[a].add(weight * xi);
                xi_max[a] = xi_max[a].max(xi);
            }
        }
    }
    let theta = theta.total();
    let theta_si = theta_si.total();
    let delta_bar = [delta_bar[0].total(), delta_bar[1].total()];
    Ok(ScalarReductionReport {
        theta,
        theta_si,
        delta_bar,
        xi_bar: [xi_bar[0].total(), xi_bar[1].total()],
        xi_max,
        residual: (theta - theta_si - delta_bar[0] + delta_bar[1]).abs(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileBlock {
    pub start: f64,
    pub width: f64,
    pub psi: f64,
    /// Tilt `dF1/dF0` on the block.
    pub h: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileReport {
    pub blocks: Vec<QuantileBlock>,
    /// `|int psi_dagger - E_F0[psi]|`
    pub mean0_residual: f64,
    /// `|int psi_dagger h - E_F1[psi]|`
    pub mean1_residual: f64,
    /// `|int h - 1|`
    pub mass_residual: f64,
    pub eta_preserved: bool,
    pub gamma_preserved: bool,
}

impl QuantileReport {
    pub fn max_residual(&self) -> f64 {
        self.mean0_residual.max(self.mean1_residual).max(self.mass_residual)
    }
}

/// Re-expresses the latent law of a cell on `[0, 1]` through the quantile
/// transform of `F0 = P(U | A=a, S)`, ordering `U` by its support values.
pub fn check_quantile_representation(
    model: &DiscreteModel,
    arm: usize,
    m: usize,
    stratum: &[usize],
) -> Result<QuantileReport> {
    let laws = StratumLaws::new(model, arm, m, stratum)?;
    let mut order: Vec<usize> = (0..model.nu()).collect();
    order.sort_by(|&i, &j| model.u_support[i].total_cmp(&model.u_support[j]).then(i.cmp(&j)));

    let mut cdf = NeumaierSum::new();
    let mut prev = 0.0;
    let mut blocks = Vec::new();
    for &u in &order {
        cdf.add(laws.reduced[u]);
        let next = cdf.total();
        if laws.reduced[u] > 0.0 {
            blocks.push(QuantileBlock {
                start: prev,
                width: next - prev,
                psi: laws.psi[u],
                h: laws.conditional[u] / laws.reduced[u],
            });
        }
        prev = next;
    }

    let direct0 = compensated_sum(
        (0..model.nu())
            .filter(|&u| laws.reduced[u] > 0.0)
            .map(|u| laws.reduced[u] * laws.psi[u]),
    );
    let direct1 = compensated_sum(
        (0..model.nu())
            .filter(|&u| laws.reduced[u] > 0.0)
            .map(|u| laws.conditional[u] * laws.psi[u]),
    );
    let int0 = compensated_sum(blocks.iter().map(|b| b.width * b.psi));
    let int1 = compensated_sum(blocks.iter().map(|b| b.width * b.h * b.psi));
    let mass = compensated_sum(blocks.iter().map(|b| b.width * b.h));
    let (lo, hi) = blocks
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), b| (lo.min(b.psi), hi.max(b.psi)));
    let gamma_dagger = blocks.iter().map(|b| b.h).fold(0.0, f64::max);
    Ok(QuantileReport {
        mean0_residual: (int0 - direct0).abs(),
        mean1_residual: (int1 - direct1).abs(),
        mass_residual: (mass - 1.0).abs(),
        eta_preserved: hi - lo == laws.eta(),
        gamma_preserved: gamma_dagger == laws.gamma(),
        blocks,
    })
}

/// `(var_F0(psi), eta^2 / 4)` for one cell.
pub fn popoviciu(model: &DiscreteModel, arm: usize, m: usize, stratum: &[usize]) -> Result<(f64, f64)> {
    let laws = StratumLaws::new(model, arm, m, stratum)?;
    let support: Vec<usize> = (0..model.nu()).filter(|&u| laws.reduced[u] > 0.0).collect();
    let mean = compensated_sum(support.iter().map(|&u| laws.reduced[u] * laws.psi[u]));
    let var = compensated_sum(support.iter().map(|&u| laws.reduced[u] * (laws.psi[u] - mean).powi(2)));
    let eta = laws.eta();
    Ok((var, eta * eta / 4.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharpnessReport {
    pub model: DiscreteModel,
    pub bound: f64,
    /// `Delta` of the construction, equal to `+bound`.
    pub achieved: f64,
    /// `Delta` of the sign-flipped construction, equal to `-bound`.
    pub achieved_flipped: f64,
}

/// Single-covariate model with a two-point latent in which conditioning on
/// `M = m_1` moves all mass to `u_1`, whose reduced mass is `1/gamma`.
pub fn sharpness_model(gamma: f64, psi: [f64; 2]) -> DiscreteModel {
    let p1 = 1.0 / gamma;
    let kernel = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
    DiscreteModel {
        x_support: vec![0.0],
        u_support: vec![0.0, 1.0],
        m_support: vec![0.0, 1.0],
        p_x: vec![1.0],
        p_u_given_x: vec![vec![p1, 1.0 - p1]],
        p_m_given_axu: vec![vec![kernel.clone()], vec![kernel]],
        outcome_mean: vec![vec![vec![psi[0], psi[0]], vec![psi[1], psi[1]]]],
    }
}

pub fn check_bound_and_sharpness(gamma: f64, eta: f64) -> Result<SharpnessReport> {
    if !(gamma >= 1.0) || !gamma.is_finite() {
        return Err(Error::InvalidSensitivityParam(format!(
            "gamma must be finite and >= 1, got {gamma}"
        )));
    }
    let bound = xi_pointwise(eta, gamma)?;
    let model = sharpness_model(gamma, [eta, 0.0]);
    let flipped = sharpness_model(gamma, [0.0, eta]);
    let achieved = exact_sensitivity(&model, 1, 0, &[0])?.delta;
    let achieved_flipped = exact_sensitivity(&flipped, 1, 0, &[0])?.delta;
    Ok(SharpnessReport {
        model,
        bound,
        achieved,
        achieved_flipped,
    })
}

/// Single covariate, `P(u) = (1/2, 1/2)`, `f(m_1 | u) = (3/4, 1/4)`, and
/// outcome tables chosen so that `eta = 1` and `gamma = 3/2` in both mediator
/// cells: the pointwise envelope is `1/3` everywhere.
pub fn constant_xi_model() -> DiscreteModel {
    let kernel = vec![vec![0.75, 0.25], vec![0.25, 0.75]];
    DiscreteModel {
        x_support: vec![0.0],
        u_support: vec![0.0, 1.0],
        m_support: vec![0.0, 1.0],
        p_x: vec![1.0],
        p_u_given_x: vec![vec![0.5, 0.5]],
        p_m_given_axu: vec![vec![kernel.clone()], vec![kernel]],
        outcome_mean: vec![vec![vec![0.0, 1.0], vec![1.0, 0.0]]],
    }
}

/// Two covariate values sharing a bridge score whose outcome table depends
/// on `(x, u)` jointly, so the latent representation fails: the latent
/// envelope is 0 but the covariate-level `Delta` is 0.4.
pub fn corrupted_model() -> DiscreteModel {
    DiscreteModel {
        x_support: vec![0.0, 1.0],
        u_support: vec![0.0, 1.0],
        m_support: vec![0.0, 1.0],
        p_x: vec![0.5, 0.5],
        p_u_given_x: vec![vec![0.5, 0.5], vec![0.5, 0.5]],
        p_m_given_axu: vec![
            vec![vec![vec![0.9, 0.1], vec![0.1, 0.9]], vec![vec![0.1, 0.9], vec![0.9, 0.1]]],
            vec![vec![vec![0.9, 0.1], vec![0.1, 0.9]], vec![vec![0.1, 0.9], vec![0.9, 0.1]]],
        ],
        outcome_mean: vec![
            vec![vec![1.0, 1.0], vec![0.0, 0.0]],
            vec![vec![0.0, 0.0], vec![1.0, 1.0]],
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_x_model(p_u: Vec<f64>, kernel: Vec<Vec<f64>>, nu_table: Vec<Vec<f64>>) -> DiscreteModel {
        DiscreteModel {
            x_support: vec![0.0],
            u_support: (0..p_u.len()).map(|u| u as f64).collect(),
            m_support: (0..kernel[0].len()).map(|m| m as f64).collect(),
            p_x: vec![1.0],
            p_u_given_x: vec![p_u],
            p_m_given_axu: vec![vec![kernel.clone()], vec![kernel]],
            outcome_mean: vec![nu_table],
        }
    }

    #[test]
    fn partition_examples() {
        let same = DiscreteModel {
            x_support: vec![0.0, 1.0, 2.0],
            u_support: vec![0.0],
            m_support: vec![0.0, 1.0],
            p_x: vec![0.2, 0.3, 0.5],
            p_u_given_x: vec![vec![1.0]; 3],
            p_m_given_axu: vec![vec![vec![vec![0.3, 0.7]]; 3], vec![vec![vec![0.6, 0.4]]; 3]],
            outcome_mean: vec![vec![vec![0.0, 0.0]]; 3],
        };
        same.validate().unwrap();
        assert_eq!(exact_bridge_partition(&same, 0), vec![vec![0, 1, 2]]);

        let swapped = DiscreteModel {
            x_support: vec![0.0, 1.0],
            p_x: vec![0.5, 0.5],
            p_u_given_x: vec![vec![1.0]; 2],
            p_m_given_axu: vec![
                vec![vec![vec![0.3, 0.7]], vec![vec![0.6, 0.4]]],
                vec![vec![vec![0.6, 0.4]], vec![vec![0.3, 0.7]]],
            ],
            outcome_mean: vec![vec![vec![0.0, 0.0]]; 2],
            ..same.clone()
        };
        assert_eq!(exact_bridge_partition(&swapped, 0), vec![vec![0], vec![1]]);

        let mut dup = same.clone();
        dup.p_m_given_axu[0][2] = vec![vec![0.1, 0.9]];
        let sizes: Vec<usize> = exact_bridge_partition(&dup, 0).iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![2, 1]);
    }

    #[test]
    fn two_point_sensitivity_by_hand() {
        // P(u1 | a, b) = 1/2, P(u1 | a, m, b) = 3/4, psi = (0, 1)
        let model = one_x_model(
            vec![0.5, 0.5],
            vec![vec![0.75, 0.25], vec![0.25, 0.75]],
            vec![vec![0.0, 0.0], vec![1.0, 1.0]],
        );
        let r = exact_sensitivity(&model, 1, 0, &[0]).unwrap();
        assert!((r.delta + 0.25).abs() < 1e-15);
        assert!((r.delta.abs() - 0.25).abs() < 1e-15);
        assert!((r.gamma - 1.5).abs() < 1e-15);
        assert_eq!(r.eta, 1.0);
        assert!((r.xi() - 1.0 / 3.0).abs() < 1e-15);
        assert!(r.delta.abs() <= r.xi());
    }

    #[test]
    fn no_selection_and_constant_psi() {
        let independent = one_x_model(
            vec![0.3, 0.7],
            vec![vec![0.4, 0.6], vec![0.4, 0.6]],
            vec![vec![0.1, 0.5], vec![0.9, 0.2]],
        );
        let r = exact_sensitivity(&independent, 0, 1, &[0]).unwrap();
        assert!(r.delta.abs() < 1e-15);
        assert!((r.gamma - 1.0).abs() < 1e-15);

        let flat = one_x_model(
            vec![0.3, 0.7],
            vec![vec![0.9, 0.1], vec![0.2, 0.8]],
            vec![vec![0.4, 0.4], vec![0.4, 0.4]],
        );
        let r = exact_sensitivity(&flat, 1, 0, &[0]).unwrap();
        assert!(r.gamma > 1.5);
        assert!(r.delta.abs() < 1e-15);
        assert!(r.eta < 1e-15);
    }

    #[test]
    fn sharpness_examples() {
        let r = check_bound_and_sharpness(2.0, 1.0).unwrap();
        assert_eq!(r.achieved, 0.5);
        assert_eq!(r.achieved_flipped, -0.5);
        let r = check_bound_and_sharpness(1.0, 3.0).unwrap();
        assert_eq!(r.achieved, 0.0);
        assert_eq!(r.bound, 0.0);
        assert!(check_bound_and_sharpness(0.5, 1.0).is_err());
        assert!(check_bound_and_sharpness(f64::INFINITY, 1.0).is_err());
        assert!(check_bound_and_sharpness(2.0, -1.0).is_err());
    }

    #[test]
    fn symmetric_projection() {
        // two covariate values in one stratum with opposite covariate-level Delta*
        let model = DiscreteModel {
            x_support: vec![0.0, 1.0],
            u_support: vec![0.0, 1.0],
            m_support: vec![0.0, 1.0],
            p_x: vec![0.5, 0.5],
            p_u_given_x: vec![vec![0.5, 0.5]; 2],
            p_m_given_axu: vec![vec![vec![vec![0.7, 0.3], vec![0.3, 0.7]]; 2]; 2],
            outcome_mean: vec![
                vec![vec![0.0, 0.0], vec![1.0, 1.0]],
                vec![vec![1.0, 1.0], vec![0.0, 0.0]],
            ],
        };
        let strata = exact_bridge_partition(&model, 0);
        assert_eq!(strata, vec![vec![0, 1]]);
        let r = exact_sensitivity(&model, 1, 0, &strata[0]).unwrap();
        assert!((r.delta_star[0] + 0.2).abs() < 1e-15);
        assert!((r.delta_star[1] - 0.2).abs() < 1e-15);
        assert!(r.delta.abs() < 1e-15);
        assert!(check_projection(&model, 1, 0, &strata[0]).unwrap() < 1e-15);
    }

    #[test]
    fn single_x_cells_are_trivial() {
        let model = one_x_model(
            vec![0.2, 0.5, 0.3],
            vec![vec![0.1, 0.9], vec![0.6, 0.4], vec![0.5, 0.5]],
            vec![vec![0.3, 0.8], vec![0.1, 0.2], vec![0.9, 0.0]],
        );
        for m in 0..2 {
            assert_eq!(check_balancing(&model, m, 1).unwrap(), 0.0);
            let r = exact_sensitivity(&model, 1, m, &[0]).unwrap();
            assert_eq!(r.delta, r.delta_star[0]);
            let t = check_tightening(&model, 1, m, &[0]).unwrap();
            assert_eq!((t.gamma_gap, t.eta_gap, t.decoupled), (0.0, 0.0, true));
        }
    }

    #[test]
    fn decoupled_tightening_example() {
        // gamma* = 1.2 and 3.0 for the two members; the stratum value is 2.1
        let model = DiscreteModel {
            x_support: vec![0.0, 1.0],
            u_support: vec![0.0, 1.0],
            m_support: vec![0.0, 1.0],
            p_x: vec![0.5, 0.5],
            p_u_given_x: vec![vec![0.25, 0.75]; 2],
            p_m_given_axu: vec![
                vec![vec![vec![0.36, 0.64], vec![0.28, 0.72]], vec![vec![0.9, 0.1], vec![0.1, 0.9]]];
                2
            ],
            outcome_mean: vec![vec![vec![0.0, 0.0], vec![1.0, 1.0]]; 2],
        };
        model.validate().unwrap();
        let strata = exact_bridge_partition(&model, 0);
        assert_eq!(strata, vec![vec![0, 1]]);
        let r = exact_sensitivity(&model, 0, 0, &strata[0]).unwrap();
        assert!((r.gamma_star[0] - 1.2).abs() < 1e-12);
        assert!((r.gamma_star[1] - 3.0).abs() < 1e-12);
        assert!((r.gamma - 2.1).abs() < 1e-12);
        let t = check_tightening(&model, 0, 0, &strata[0]).unwrap();
        assert!(t.decoupled && t.gamma_gap > 0.0);
    }

    #[test]
    fn ignorable_model_anchors_reduction() {
        let model = one_x_model(
            vec![0.4, 0.6],
            vec![vec![0.3, 0.7], vec![0.3, 0.7]],
            vec![vec![0.2, 0.9], vec![0.6, 0.1]],
        );
        let r = check_scalar_reduction(&model).unwrap();
        assert!(r.delta_bar.iter().all(|d| d.abs() < 1e-15));
        assert!((r.theta - r.theta_si).abs() < 1e-15);
    }

    #[test]
    fn constant_xi_reaches_supremum() {
        let model = constant_xi_model();
        let r = check_scalar_reduction(&model).unwrap();
        for a in 0..2 {
            assert!((r.xi_bar[a] - 1.0 / 3.0).abs() < 1e-15);
            assert!((r.xi_max[a] - 1.0 / 3.0).abs() < 1e-15);
        }
        assert!(r.residual < 1e-15);
    }

    #[test]
    fn quantile_blocks() {
        let model = one_x_model(
            vec![0.5, 0.5],
            vec![vec![0.75, 0.25], vec![0.25, 0.75]],
            vec![vec![0.0, 0.0], vec![1.0, 1.0]],
        );
        let q = check_quantile_representation(&model, 0, 0, &[0]).unwrap();
        assert_eq!(q.blocks.len(), 2);
        assert!(q.blocks.iter().all(|b| b.width == 0.5));
        assert!(q.eta_preserved && q.gamma_preserved);

        let flat = one_x_model(
            vec![0.2, 0.3, 0.5],
            vec![vec![0.4, 0.6]; 3],
            vec![vec![0.1, 0.1], vec![0.5, 0.5], vec![0.7, 0.7]],
        );
        let q = check_quantile_representation(&flat, 1, 1, &[0]).unwrap();
        assert!(q.blocks.iter().all(|b| (b.h - 1.0).abs() < 1e-15));
    }

    #[test]
    fn corrupted_model_breaks_bound() {
        let model = corrupted_model();
        model.validate().unwrap();
        let strata = exact_bridge_partition(&model, 0);
        assert_eq!(strata, vec![vec![0, 1]]);
        let r = exact_sensitivity(&model, 1, 0, &strata[0]).unwrap();
        assert!((r.delta - 0.4).abs() < 1e-12);
        assert!(r.xi() < 1e-12);
    }

    #[test]
    fn validation_rejects_bad_laws() {
        let mut model = constant_xi_model();
        model.p_u_given_x[0] = vec![0.5, 0.6];
        assert!(model.validate().is_err());
        let mut model = constant_xi_model();
        model.p_m_given_axu[1][0][0] = vec![1.2, -0.2];
        assert!(model.validate().is_err());
    }
}
