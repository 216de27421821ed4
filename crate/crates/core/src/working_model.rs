//! The two conjugate Gaussian working models and their two-stage sampler.
//!
//! The mediator model `M ~ (1, A, X)` is fit once. For each mediator draw the
//! bridge-score regressors of the outcome model are rebuilt at the observed
//! mediators and the outcome posterior is updated conditionally on them, then
//! sampled. Both stages are exact conjugate draws, so successive draws are
//! independent.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bridge::{outcome_regressors, BridgeScore, MediatorLaw, OUTCOME_REGRESSOR_COUNT};
use crate::data::{Arm, Dataset};
use crate::error::Result;
use crate::linear_bayes::{nig_update, update_from_stats, LinearModelDraw, NigParams, PriorSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDraw {
    pub mediator: LinearModelDraw,
    pub outcome: LinearModelDraw,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct WorkingPriors {
    pub mediator: PriorSpec,
    pub outcome: PriorSpec,
}

#[derive(Debug, Clone)]
pub struct WorkingModels {
    mediator_posterior: NigParams,
    outcome_prior: NigParams,
    p: usize,
}

pub fn mediator_regressors(a: Arm, x: &[f64]) -> Vec<f64> {
    let mut r = Vec::with_capacity(x.len() + 2);
    r.push(1.0);
    r.push(a.indicator());
    r.extend_from_slice(x);
    r
}

/// Bridge scores at each observed `(M_i, X_i)` under one mediator draw.
pub fn observed_scores(data: &Dataset, mediator: &LinearModelDraw) -> Result<Vec<BridgeScore>> {
    let law = MediatorLaw::new(mediator, data.p())?;
    Ok(data
        .rows()
        .iter()
        .map(|r| law.log_score(r.m, law.arm_means(&r.x)))
        .collect())
}

impl WorkingModels {
    pub fn fit(data: &Dataset, priors: &WorkingPriors) -> Result<Self> {
        let p = data.p();
        let q = p + 2;
        let design = DMatrix::from_fn(data.n(), q, |i, j| {
            let r = &data.rows()[i];
            match j {
                0 => 1.0,
                1 => r.a.indicator(),
                _ => r.x[j - 2],
            }
        });
        let response = DVector::from_iterator(data.n(), data.rows().iter().map(|r| r.m));
        let mediator_posterior = nig_update(&priors.mediator.build(q)?, &design, &response)?;
        let outcome_prior = priors.outcome.build(OUTCOME_REGRESSOR_COUNT)?;
        Ok(WorkingModels {
            mediator_posterior,
            outcome_prior,
            p,
        })
    }

    pub fn mediator_posterior(&self) -> &NigParams {
        &self.mediator_posterior
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Outcome posterior given observed bridge scores from one mediator draw.
    pub fn outcome_posterior(&self, data: &Dataset, scores: &[BridgeScore]) -> Result<NigParams> {
        let q = OUTCOME_REGRESSOR_COUNT;
        let mut xtx = DMatrix::<f64>::zeros(q, q);
        let mut xty = DVector::<f64>::zeros(q);
        let mut yty = 0.0;
        for (row, bs) in data.rows().iter().zip(scores) {
            let x = outcome_regressors(row.m, row.a, bs);
            for i in 0..q {
                xty[i] += x[i] * row.y;
                for j in 0..=i {
                    xtx[(i, j)] += x[i] * x[j];
                }
            }
            yty += row.y * row.y;
        }
        for i in 0..q {
            for j in 0..i {
                xtx[(j, i)] = xtx[(i, j)];
            }
        }
        update_from_stats(&self.outcome_prior, &xtx, &xty, yty, data.n())
    }

    /// One joint draw. Returns the observed bridge scores used for the outcome
    /// stage alongside the draw.
    pub fn draw<R1: Rng, R2: Rng>(
        &self,
        data: &Dataset,
        mediator_rng: &mut R1,
        outcome_rng: &mut R2,
    ) -> Result<(ModelDraw, Vec<BridgeScore>)> {
        let mediator = self.mediator_posterior.sample(mediator_rng)?;
        let scores = observed_scores(data, &mediator)?;
        let outcome = self.outcome_posterior(data, &scores)?.sample(outcome_rng)?;
        Ok((ModelDraw { mediator, outcome }, scores))
    }
}
