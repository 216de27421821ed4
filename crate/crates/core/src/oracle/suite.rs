use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fuzz::fuzz_model;
use super::model::{
    check_balancing, check_bound_and_sharpness, check_projection, check_quantile_representation,
    check_scalar_reduction, check_tightening, exact_bridge_partition, exact_sensitivity, popoviciu,
    DiscreteModel, EXACT_TOL,
};
use crate::envelope::xi_pointwise;
use crate::error::Result;

/// Tolerance for identities evaluated on the fuzz corpus.
pub const FUZZ_TOL: f64 = 1e-10;

pub const SHARPNESS_GAMMAS: [f64; 5] = [1.1, 1.5, 2.0, 5.0, 50.0];
pub const SHARPNESS_ETAS: [f64; 3] = [0.5, 1.0, 6.0];

pub const CHECK_NAMES: [&str; 12] = [
    "sharpness",
    "bridge_partition",
    "balancing",
    "identification",
    "sharp_bound",
    "projection",
    "gamma_tightening",
    "eta_tightening",
    "scalar_reduction",
    "envelope_aggregation",
    "quantile_representation",
    "popoviciu",
];

/// Per-model worst-case residual of each corpus check; a check passes when
/// its residual is at most its tolerance.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelResiduals {
    pub bridge_partition: f64,
    pub balancing: f64,
    pub identification: f64,
    /// `max(|Delta| - xi)` over cells.
    pub sharp_bound: f64,
    pub projection: f64,
    /// `max(-gamma_gap)`
    pub gamma_tightening: f64,
    /// `max(-eta_gap)` over decoupled cells.
    pub eta_tightening: f64,
    pub decoupled_cells: usize,
    pub scalar_reduction: f64,
    pub envelope_aggregation: f64,
    pub quantile_representation: f64,
    /// `max(var(psi) - eta^2 / 4)`
    pub popoviciu: f64,
    pub cells: usize,
}

impl ModelResiduals {
    fn named(&self) -> [(&'static str, f64, f64); 11] {
        [
            ("bridge_partition", self.bridge_partition, EXACT_TOL),
            ("balancing", self.balancing, FUZZ_TOL),
            ("identification", self.identification, FUZZ_TOL),
            ("sharp_bound", self.sharp_bound, FUZZ_TOL),
            ("projection", self.projection, FUZZ_TOL),
            ("gamma_tightening", self.gamma_tightening, FUZZ_TOL),
            ("eta_tightening", self.eta_tightening, FUZZ_TOL),
            ("scalar_reduction", self.scalar_reduction, FUZZ_TOL),
            ("envelope_aggregation", self.envelope_aggregation, EXACT_TOL),
            ("quantile_representation", self.quantile_representation, FUZZ_TOL),
            ("popoviciu", self.popoviciu, EXACT_TOL),
        ]
    }
}

/// Runs every cell-level check on one model.
pub fn check_model(model: &DiscreteModel) -> Result<ModelResiduals> {
    model.validate()?;
    let mut r = ModelResiduals::default();
    for m in 0..model.nm() {
        let strata = exact_bridge_partition(model, m);
        for s in &strata {
            let b = model.bridge(m, s[0]);
            for &x in s {
                let bx = model.bridge(m, x);
                r.bridge_partition = r.bridge_partition.max((bx.0 - b.0).abs()).max((bx.1 - b.1).abs());
            }
        }
        for arm in 0..2 {
            r.balancing = r.balancing.max(check_balancing(model, m, arm)?);
            for s in &strata {
                r.cells += 1;
                let sens = exact_sensitivity(model, arm, m, s)?;
                r.identification = r.identification.max((sens.delta - sens.delta_latent).abs());
                let xi = xi_pointwise(sens.eta, sens.gamma)?;
                r.sharp_bound = r.sharp_bound.max(sens.delta.abs() - xi);
                r.projection = r.projection.max(check_projection(model, arm, m, s)?);
                let t = check_tightening(model, arm, m, s)?;
                r.gamma_tightening = r.gamma_tightening.max(-t.gamma_gap);
                if t.decoupled {
                    r.decoupled_cells += 1;
                    r.eta_tightening = r.eta_tightening.max(-t.eta_gap);
                }
                let q = check_quantile_representation(model, arm, m, s)?;
                let qres = if q.eta_preserved && q.gamma_preserved {
                    q.max_residual()
                } else {
                    f64::INFINITY
                };
                r.quantile_representation = r.quantile_representation.max(qres);
                let (var, cap) = popoviciu(model, arm, m, s)?;
                r.popoviciu = r.popoviciu.max(var - cap);
            }
        }
    }
    let red = check_scalar_reduction(model)?;
    r.scalar_reduction = red.residual;
    r.envelope_aggregation = (0..2)
        .map(|a| {
            (red.delta_bar[a].abs() - red.xi_bar[a])
                .max(red.xi_bar[a] - red.xi_max[a])
                .max(0.0)
        })
        .fold(0.0, f64::max);
    Ok(r)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub max_residual: f64,
    pub tolerance: f64,
    /// Number of models (or grid points) the check was evaluated on.
    pub evaluated: usize,
    pub failing_models: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub seed: u64,
    pub models: usize,
    pub checks: Vec<CheckOutcome>,
    /// Models whose checks could not be evaluated at all.
    pub errored_models: Vec<usize>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.errored_models.is_empty() && self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&CheckOutcome> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failing_models(&self) -> BTreeSet<usize> {
        self.checks
            .iter()
            .flat_map(|c| c.failing_models.iter().copied())
            .chain(self.errored_models.iter().copied())
            .collect()
    }
}

/// `(gamma, eta, achieved, flipped, bound)` over the sharpness grid.
pub fn sharpness_grid() -> Result<Vec<(f64, f64, f64, f64, f64)>> {
    let mut out = Vec::new();
    for &g in &SHARPNESS_GAMMAS {
        for &e in &SHARPNESS_ETAS {
            let r = check_bound_and_sharpness(g, e)?;
            out.push((g, e, r.achieved, r.achieved_flipped, r.bound));
        }
    }
    Ok(out)
}

/// Evaluates `models` (index, model) pairs and the sharpness grid.
pub fn verify_models(seed: u64, models: &[(usize, DiscreteModel)]) -> Result<SuiteReport> {
    let results: Vec<(usize, Result<ModelResiduals>)> = models
        .par_iter()
        .map(|(i, m)| (*i, check_model(m)))
        .collect();

    let sharp = sharpness_grid()?;
    let sharp_res = sharp
        .iter()
        .map(|&(_, _, a, f, b)| (a - b).abs().max((f + b).abs()))
        .fold(0.0, f64::max);
    let mut checks = vec![CheckOutcome {
        name: "sharpness".into(),
        passed: sharp_res <= EXACT_TOL,
        max_residual: sharp_res,
        tolerance: EXACT_TOL,
        evaluated: sharp.len(),
        failing_models: Vec::new(),
    }];

    let mut errored = Vec::new();
    let ok: Vec<(usize, ModelResiduals)> = results
        .into_iter()
        .filter_map(|(i, r)| match r {
            Ok(r) => Some((i, r)),
            Err(e) => {
                log::error!("model {i}: {e}");
                errored.push(i);
                None
            }
        })
        .collect();

    for (k, name) in CHECK_NAMES[1..].iter().enumerate() {
        let mut worst: f64 = 0.0;
        let mut tol = FUZZ_TOL;
        let mut failing = Vec::new();
        let mut evaluated = 0;
        for (i, r) in &ok {
            let (label, res, t) = r.named()[k];
            debug_assert_eq!(label, *name);
            tol = t;
            if *name == "eta_tightening" && r.decoupled_cells == 0 {
                continue;
            }
            evaluated += 1;
            worst = worst.max(res);
            if !(res <= t) {
                failing.push(*i);
            }
        }
        checks.push(CheckOutcome {
            name: name.to_string(),
            passed: failing.is_empty(),
            max_residual: worst + 0.0,
            tolerance: tol,
            evaluated,
            failing_models: failing,
        });
    }
    Ok(SuiteReport {
        seed,
        models: models.len(),
        checks,
        errored_models: errored,
    })
}

/// Runs every check over `n_models` corpus models rooted at `seed`.
pub fn verify_suite(seed: u64, n_models: usize) -> Result<SuiteReport> {
    let models: Vec<(usize, DiscreteModel)> = (0..n_models)
        .into_par_iter()
        .map(|i| (i, fuzz_model(seed, i)))
        .collect();
    verify_models(seed, &models)
}
