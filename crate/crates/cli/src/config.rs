use std::path::{Path, PathBuf};

use bridgesens::calibration::DEFAULT_GAMMA_CAP;
use bridgesens::data::{ColumnSchema, SyntheticSpec};
use bridgesens::gcomp::{Overlay, RunOptions, SensitivitySetting, SweepAxis};
use bridgesens::linear_bayes::PriorSpec;
use bridgesens::working_model::WorkingPriors;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// A single JSON document describing one analysis. Relative paths are
/// resolved against the directory holding the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub input: Option<PathBuf>,
    #[serde(default)]
    pub columns: Option<ColumnSchema>,
    #[serde(default = "SensitivitySetting::si_anchor")]
    pub setting: SensitivitySetting,
    #[serde(default)]
    pub sweeps: Vec<SweepConfig>,
    #[serde(default)]
    pub priors: WorkingPriors,
    #[serde(default)]
    pub calibration_prior: PriorSpec,
    #[serde(default = "default_draws")]
    pub draws: usize,
    #[serde(default = "default_mediator_draws")]
    pub mediator_draws: usize,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    #[serde(default = "default_chains")]
    pub chains: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub standardize_covariates: bool,
    #[serde(default)]
    pub pooled_gamma: bool,
    #[serde(default = "default_gamma_cap")]
    pub gamma_cap: f64,
    #[serde(default)]
    pub simulate: Option<SyntheticSpec>,
    #[serde(default = "default_verify_models")]
    pub verify_models: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub setting: SensitivitySetting,
    pub axis: SweepAxis,
    pub grid: Vec<f64>,
    #[serde(default)]
    pub overlay: Option<Overlay>,
}

fn default_draws() -> usize {
    2000
}
fn default_mediator_draws() -> usize {
    50
}
fn default_burn_in() -> usize {
    500
}
fn default_chains() -> usize {
    1
}
fn default_gamma_cap() -> f64 {
    DEFAULT_GAMMA_CAP
}
fn default_verify_models() -> usize {
    1000
}

impl Default for RunConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

impl SweepConfig {
    /// Output file stem, e.g. `sweep_kappa_by_lambda`.
    pub fn file_stem(&self) -> String {
        match &self.overlay {
            Some(o) => format!("sweep_{}_by_{}", self.axis, o.axis),
            None => format!("sweep_{}", self.axis),
        }
    }

    fn validate(&self) -> Result<(), CliError> {
        if self.grid.is_empty() || self.overlay.as_ref().is_some_and(|o| o.values.is_empty()) {
            return Err(CliError::Config(format!("{}: grids must be nonempty", self.file_stem())));
        }
        let outer = match &self.overlay {
            Some(o) => o
                .values
                .iter()
                .map(|&v| o.axis.apply(&self.setting, v))
                .collect::<bridgesens::Result<Vec<_>>>()?,
            None => vec![self.setting],
        };
        for s in &outer {
            for &v in &self.grid {
                self.axis.apply(s, v)?;
            }
        }
        Ok(())
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("invalid config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.input, &mut cfg.output_dir].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn run_options(&self) -> RunOptions {
        RunOptions {
            draws: self.draws,
            burn_in: self.burn_in,
            chains: self.chains,
            mediator_draws: self.mediator_draws,
            seed: self.seed,
            gamma_cap: self.gamma_cap,
            pooled_gamma: self.pooled_gamma,
            priors: self.priors,
            calibration_prior: self.calibration_prior,
        }
    }

    /// Checks everything that does not need the data.
    pub fn validate(&self) -> Result<(), CliError> {
        self.run_options().validate()?;
        self.setting.validate()?;
        self.priors.mediator.build(1)?;
        self.priors.outcome.build(1)?;
        self.calibration_prior.build(1)?;
        let mut stems = Vec::new();
        for s in &self.sweeps {
            s.validate()?;
            let stem = s.file_stem();
            if stems.contains(&stem) {
                return Err(CliError::Config(format!("two sweeps would both write {stem}.csv")));
            }
            stems.push(stem);
        }
        Ok(())
    }
}
