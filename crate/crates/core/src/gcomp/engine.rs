use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::summary::RunSummary;
use super::{Calibration, SensitivitySetting};
use crate::bridge::{outcome_regressors, BridgeScore, MediatorLaw};
use crate::calibration::{
    benchmark_eta_from_scores, fit_selection_models, residual_envelope, sigma_eta_from_scores,
    BenchmarkScale, SelectionRatioModel, DEFAULT_GAMMA_CAP,
};
use crate::data::{Arm, Dataset};
use crate::envelope::{xi_pointwise, xi_unchecked, ScalarDecomposition};
use crate::error::{Error, Result};
use crate::linear_bayes::{LinearModelDraw, PriorSpec};
use crate::seed::{purpose, substream};
use crate::summation::NeumaierSum;
use crate::working_model::{ModelDraw, WorkingModels, WorkingPriors};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    /// Retained draws per chain.
    pub draws: usize,
    pub burn_in: usize,
    pub chains: usize,
    /// Counterfactual mediator draws per unit, `L`.
    pub mediator_draws: usize,
    pub seed: u64,
    pub gamma_cap: f64,
    /// Replace pointwise `gamma_hat(m, b)` by its per-draw mean over the
    /// counterfactual points.
    pub pooled_gamma: bool,
    pub priors: WorkingPriors,
    /// Prior for the benchmark auxiliary regressions.
    pub calibration_prior: PriorSpec,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            draws: 2000,
            burn_in: 500,
            chains: 1,
            mediator_draws: 50,
            seed: 0,
            gamma_cap: DEFAULT_GAMMA_CAP,
            pooled_gamma: false,
            priors: WorkingPriors::default(),
            calibration_prior: PriorSpec::default(),
        }
    }
}

impl RunOptions {
    pub fn validate(&self) -> Result<()> {
        if self.draws == 0 || self.chains == 0 || self.mediator_draws == 0 {
            return Err(Error::InvalidSpec(
                "draws, chains and mediator_draws must all be >= 1".into(),
            ));
        }
        if !(self.gamma_cap >= 1.0) {
            return Err(Error::InvalidSensitivityParam(format!(
                "gamma_cap must be >= 1, got {}",
                self.gamma_cap
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DrawRecord {
    pub chain: usize,
    pub draw: usize,
    pub theta_si: f64,
    pub xi_bar_0: f64,
    pub xi_bar_1: f64,
    pub delta_bar_0: f64,
    pub delta_bar_1: f64,
    pub theta: f64,
    pub delta0: f64,
    pub delta1: f64,
    pub nde: f64,
    pub nie: f64,
    pub te: f64,
}

impl DrawRecord {
    pub const COLUMNS: [&'static str; 13] = [
        "chain",
        "draw",
        "theta_si",
        "xi_bar_0",
        "xi_bar_1",
        "delta_bar_0",
        "delta_bar_1",
        "theta",
        "delta0",
        "delta1",
        "nde",
        "nie",
        "te",
    ];

    fn from_decomposition(chain: usize, draw: usize, d: &ScalarDecomposition) -> Self {
        let e = d.effects();
        DrawRecord {
            chain,
            draw,
            theta_si: d.theta_si,
            xi_bar_0: d.xi_bar_0,
            xi_bar_1: d.xi_bar_1,
            delta_bar_0: d.delta_bar_0,
            delta_bar_1: d.delta_bar_1,
            theta: d.theta,
            delta0: d.delta0,
            delta1: d.delta1,
            nde: e.nde,
            nie: e.nie,
            te: e.te,
        }
    }

    /// Indirect effect with both corrections set to zero.
    pub fn nie_si(&self) -> f64 {
        self.delta1 - self.theta_si
    }

    pub fn values(&self) -> [f64; 11] {
        [
            self.theta_si,
            self.xi_bar_0,
            self.xi_bar_1,
            self.delta_bar_0,
            self.delta_bar_1,
            self.theta,
            self.delta0,
            self.delta1,
            self.nde,
            self.nie,
            self.te,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub setting: SensitivitySetting,
    pub draws: Vec<DrawRecord>,
    pub summary: RunSummary,
}

struct BenchmarkCache {
    scale: BenchmarkScale,
    eta_hat: [f64; 2],
    models: [Option<SelectionRatioModel>; 2],
}

struct Context<'a> {
    data: &'a Dataset,
    models: WorkingModels,
    settings: &'a [SensitivitySetting],
    opts: &'a RunOptions,
    scales: Vec<BenchmarkScale>,
    needs_sigma: bool,
}

pub fn run(data: &Dataset, setting: &SensitivitySetting, opts: &RunOptions) -> Result<RunResult> {
    Ok(run_settings(data, std::slice::from_ref(setting), opts)?.remove(0))
}

/// Runs several settings on one shared set of posterior draws and
/// counterfactual mediators, so results differ only through the envelope and
/// the correction prior.
pub fn run_settings(
    data: &Dataset,
    settings: &[SensitivitySetting],
    opts: &RunOptions,
) -> Result<Vec<RunResult>> {
    opts.validate()?;
    if settings.is_empty() {
        return Err(Error::EmptyCollection);
    }
    let mut scales = Vec::new();
    for s in settings {
        s.validate()?;
        if let Calibration::Benchmark { scale, .. } = s.calibration {
            if !data.has_benchmark() {
                return Err(Error::ConfigMismatch(
                    "benchmark calibration requires a benchmark column".into(),
                ));
            }
            if !scales.contains(&scale) {
                scales.push(scale);
            }
        }
    }
    let needs_sigma = settings
        .iter()
        .any(|s| matches!(s.calibration, Calibration::ResidualBudget { .. }));
    let ctx = Context {
        data,
        models: WorkingModels::fit(data, &opts.priors)?,
        settings,
        opts,
        scales,
        needs_sigma,
    };

    let total = opts.chains * opts.draws;
    let per_draw: Vec<Vec<DrawRecord>> = (0..total)
        .into_par_iter()
        .map(|idx| ctx.evaluate(idx / opts.draws, idx % opts.draws))
        .collect::<Result<_>>()?;

    settings
        .iter()
        .enumerate()
        .map(|(s, setting)| {
            let draws: Vec<DrawRecord> = per_draw.iter().map(|d| d[s]).collect();
            let summary = RunSummary::from_draws(&draws, opts.chains)?;
            Ok(RunResult {
                setting: *setting,
                draws,
                summary,
            })
        })
        .collect()
}

fn draw_working_models(
    models: &WorkingModels,
    data: &Dataset,
    opts: &RunOptions,
    chain: usize,
    draw: usize,
) -> Result<(ModelDraw, Vec<BridgeScore>)> {
    let t = (opts.burn_in + draw) as u64;
    let c = chain as u64;
    let mut med_rng = substream(opts.seed, &[purpose::MEDIATOR_MODEL, c, t]);
    let mut out_rng = substream(opts.seed, &[purpose::OUTCOME_MODEL, c, t]);
    models.draw(data, &mut med_rng, &mut out_rng)
}

/// The working-model draws behind [`run_settings`] with the same options,
/// in (chain, draw) order.
pub fn model_draws(data: &Dataset, opts: &RunOptions) -> Result<Vec<ModelDraw>> {
    opts.validate()?;
    let models = WorkingModels::fit(data, &opts.priors)?;
    (0..opts.chains * opts.draws)
        .into_par_iter()
        .map(|idx| Ok(draw_working_models(&models, data, opts, idx / opts.draws, idx % opts.draws)?.0))
        .collect()
}

impl Context<'_> {
    fn evaluate(&self, chain: usize, draw: usize) -> Result<Vec<DrawRecord>> {
        let data = self.data;
        let opts = self.opts;
        let t = (opts.burn_in + draw) as u64;
        let c = chain as u64;
        let (model, obs_scores) = draw_working_models(&self.models, data, opts, chain, draw)?;

        let bench: Vec<BenchmarkCache> = self
            .scales
            .iter()
            .map(|&scale| {
                Ok(BenchmarkCache {
                    scale,
                    eta_hat: benchmark_eta_from_scores(data, &obs_scores, scale, &opts.calibration_prior)?,
                    models: fit_selection_models(data, &obs_scores, scale, &opts.calibration_prior)?,
                })
            })
            .collect::<Result<_>>()?;
        let sigma_eta = if self.needs_sigma {
            sigma_eta_from_scores(data, &obs_scores, &model.outcome)?
        } else {
            0.0
        };

        // (cache index, lambda * eta_hat, kappa) per arm for pointwise benchmark settings
        let pointwise: Vec<(usize, usize, [f64; 2], [f64; 2])> = if opts.pooled_gamma {
            Vec::new()
        } else {
            self.settings
                .iter()
                .enumerate()
                .filter_map(|(s, setting)| match setting.calibration {
                    Calibration::Benchmark { scale, lambda, kappa } => {
                        let b = self.scales.iter().position(|&x| x == scale)?;
                        let eta = &bench[b].eta_hat;
                        Some((s, b, [lambda[0] * eta[0], lambda[1] * eta[1]], kappa))
                    }
                    _ => None,
                })
                .collect()
        };

        let law = MediatorLaw::new(&model.mediator, data.p())?;
        let sd = law.sd();
        let l = opts.mediator_draws;
        let cap = opts.gamma_cap;
        let mut theta_si = NeumaierSum::new();
        let mut delta0 = NeumaierSum::new();
        let mut delta1 = NeumaierSum::new();
        let mut gamma_sum = vec![[NeumaierSum::new(), NeumaierSum::new()]; bench.len()];
        let mut xi_sum = vec![[NeumaierSum::new(), NeumaierSum::new()]; self.settings.len()];
        let mut gammas = vec![[1.0f64; 2]; bench.len()];

        for (i, row) in data.rows().iter().enumerate() {
            let mut rng = substream(opts.seed, &[purpose::UNIT_MEDIATORS, c, t, i as u64]);
            let means = law.arm_means(&row.x);
            for _ in 0..l {
                let z: f64 = StandardNormal.sample(&mut rng);
                let m = means.0 + sd * z;
                let bs = law.log_score(m, means);
                theta_si.add(predict(&model.outcome, m, Arm::Treated, &bs));
                delta0.add(predict(&model.outcome, m, Arm::Control, &bs));
                for (b, cache) in bench.iter().enumerate() {
                    for a in 0..2 {
                        let g = cache.models[a].as_ref().map_or(1.0, |sel| sel.gamma_at(m, &bs, cap));
                        gammas[b][a] = g;
                        gamma_sum[b][a].add(g);
                    }
                }
                for &(s, b, eta, kappa) in &pointwise {
                    for a in 0..2 {
                        xi_sum[s][a].add(xi_unchecked(eta[a], kappa[a] * gammas[b][a]));
                    }
                }
            }
            for _ in 0..l {
                let z: f64 = StandardNormal.sample(&mut rng);
                let m = means.1 + sd * z;
                let bs = law.log_score(m, means);
                delta1.add(predict(&model.outcome, m, Arm::Treated, &bs));
            }
        }

        let points = (data.n() * l) as f64;
        let theta_si = theta_si.total() / points;
        let delta0 = delta0.total() / points;
        let delta1 = delta1.total() / points;

        let mut records = Vec::with_capacity(self.settings.len());
        for (s, setting) in self.settings.iter().enumerate() {
            let xi_bar = match setting.calibration {
                Calibration::SiAnchor => [0.0, 0.0],
                Calibration::ResidualBudget { k, g } => [
                    residual_envelope(sigma_eta, k[0], g[0])?,
                    residual_envelope(sigma_eta, k[1], g[1])?,
                ],
                Calibration::Benchmark { scale, lambda, kappa } => {
                    if opts.pooled_gamma {
                        let b = bench.iter().position(|x| x.scale == scale).expect("scale cached");
                        let mut xi = [0.0; 2];
                        for a in 0..2 {
                            let gamma = gamma_sum[b][a].total() / points;
                            xi[a] = xi_pointwise(lambda[a] * bench[b].eta_hat[a], kappa[a] * gamma.max(1.0))?;
                        }
                        xi
                    } else {
                        [xi_sum[s][0].total() / points, xi_sum[s][1].total() / points]
                    }
                }
            };
            let mut prior_rng = substream(opts.seed, &[purpose::DELTA_PRIOR, c, t]);
            let delta_bar = setting.draw_deltas(xi_bar, &mut prior_rng)?;
            let d = ScalarDecomposition::assemble(theta_si, delta_bar, xi_bar, delta0, delta1);
            if !d.is_consistent() {
                return Err(Error::NumericalFailure(format!(
                    "scalar decomposition violated at chain {chain}, draw {draw}"
                )));
            }
            records.push(DrawRecord::from_decomposition(chain, draw, &d));
        }
        Ok(records)
    }
}

#[inline]
fn predict(outcome: &LinearModelDraw, m: f64, a: Arm, bs: &BridgeScore) -> f64 {
    outcome.predict(&outcome_regressors(m, a, bs))
}
