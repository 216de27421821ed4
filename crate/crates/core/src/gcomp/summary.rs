use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::engine::DrawRecord;
use crate::error::{Error, Result};
use crate::summation::compensated_mean;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantitySummary {
    pub mean: f64,
    pub sd: f64,
    pub q025: f64,
    pub q25: f64,
    pub q50: f64,
    pub q75: f64,
    pub q975: f64,
    pub ess: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rhat: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub draws: usize,
    pub chains: usize,
    pub quantities: BTreeMap<String, QuantitySummary>,
}

const SUMMARY_FIELDS: [&str; 11] = [
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

impl RunSummary {
    /// `draws` must be ordered chain-major with equal chain lengths.
    pub fn from_draws(draws: &[DrawRecord], chains: usize) -> Result<Self> {
        let mut quantities = BTreeMap::new();
        for (j, name) in SUMMARY_FIELDS.iter().enumerate() {
            let values: Vec<f64> = draws.iter().map(|d| d.values()[j]).collect();
            quantities.insert(name.to_string(), QuantitySummary::from_values(&values, chains)?);
        }
        Ok(RunSummary {
            draws: draws.len(),
            chains,
            quantities,
        })
    }

    pub fn get(&self, name: &str) -> Option<&QuantitySummary> {
        self.quantities.get(name)
    }
}

impl QuantitySummary {
    /// Summary of chain-major `values` split into `chains` equal chains.
    pub fn from_values(values: &[f64], chains: usize) -> Result<Self> {
        if values.is_empty() || chains == 0 || !values.len().is_multiple_of(chains) {
            return Err(Error::EmptyCollection);
        }
        let mean = compensated_mean(values).ok_or(Error::EmptyCollection)?;
        let sd = sample_sd(values, mean);
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let q = |p| quantile_type7(&sorted, p);
        let len = values.len() / chains;
        let split: Vec<&[f64]> = values.chunks(len).collect();
        Ok(QuantitySummary {
            mean,
            sd,
            q025: q(0.025),
            q25: q(0.25),
            q50: q(0.5),
            q75: q(0.75),
            q975: q(0.975),
            ess: split.iter().map(|c| effective_sample_size(c)).sum(),
            rhat: (chains > 1 && len > 1).then(|| potential_scale_reduction(&split)),
        })
    }
}

fn sample_sd(values: &[f64], mean: f64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let ss: Vec<f64> = values.iter().map(|v| (v - mean).powi(2)).collect();
    let total = crate::summation::compensated_sum(ss);
    (total / (values.len() - 1) as f64).sqrt()
}

/// Linear-interpolation quantile of ascending `sorted` values (Hyndman-Fan type 7).
pub fn quantile_type7(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    if lo + 1 >= n {
        return sorted[n - 1];
    }
    sorted[lo] + (h - lo as f64) * (sorted[lo + 1] - sorted[lo])
}

/// Effective sample size of one chain by Geyer's initial positive sequence.
pub fn effective_sample_size(chain: &[f64]) -> f64 {
    let n = chain.len();
    if n < 4 {
        return n as f64;
    }
    let mean = compensated_mean(chain).unwrap_or(0.0);
    let acov = |lag: usize| -> f64 {
        let terms = chain[..n - lag]
            .iter()
            .zip(&chain[lag..])
            .map(|(a, b)| (a - mean) * (b - mean));
        crate::summation::compensated_sum(terms) / n as f64
    };
    let c0 = acov(0);
    if !(c0 > 0.0) {
        return n as f64;
    }
    let mut tau = -1.0;
    let mut k = 0;
    while 2 * k + 1 < n {
        let pair = (acov(2 * k) + acov(2 * k + 1)) / c0;
        if pair <= 0.0 {
            break;
        }
        tau += 2.0 * pair;
        k += 1;
    }
    let tau = tau.max(1.0 / n as f64);
    n as f64 / tau
}

fn potential_scale_reduction(chains: &[&[f64]]) -> f64 {
    let m = chains.len() as f64;
    let n = chains[0].len() as f64;
    let means: Vec<f64> = chains.iter().map(|c| compensated_mean(c).unwrap_or(0.0)).collect();
    let grand = compensated_mean(&means).unwrap_or(0.0);
    let b = n / (m - 1.0) * means.iter().map(|x| (x - grand).powi(2)).sum::<f64>();
    let w = chains
        .iter()
        .zip(&means)
        .map(|(c, &mu)| sample_sd(c, mu).powi(2))
        .sum::<f64>()
        / m;
    if !(w > 0.0) {
        return 1.0;
    }
    (((n - 1.0) / n * w + b / n) / w).sqrt()
}
