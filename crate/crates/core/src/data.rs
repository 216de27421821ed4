//! Observational data: ingestion, validation, ranking and synthetic generation.

use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::{purpose, substream};

/// Treatment arm. `Control` is `A = 0`, `Treated` is `A = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Arm {
    Control,
    Treated,
}

impl Arm {
    pub const BOTH: [Arm; 2] = [Arm::Control, Arm::Treated];

    pub fn index(self) -> usize {
        match self {
            Arm::Control => 0,
            Arm::Treated => 1,
        }
    }

    pub fn indicator(self) -> f64 {
        self.index() as f64
    }

    pub fn from_index(i: usize) -> Arm {
        if i == 0 {
            Arm::Control
        } else {
            Arm::Treated
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObsRow {
    pub x: Vec<f64>,
    pub a: Arm,
    pub m: f64,
    pub y: f64,
    pub w: Option<f64>,
}

/// Maps dataset roles onto CSV column names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub treatment: String,
    pub mediator: String,
    pub outcome: String,
    #[serde(default)]
    pub covariates: Vec<String>,
    #[serde(default)]
    pub benchmark: Option<String>,
}

impl ColumnSchema {
    pub fn synthetic(p: usize, with_benchmark: bool) -> Self {
        ColumnSchema {
            treatment: "a".into(),
            mediator: "m".into(),
            outcome: "y".into(),
            covariates: (1..=p).map(|j| format!("x{j}")).collect(),
            benchmark: with_benchmark.then(|| "w".into()),
        }
    }
}

/// Validated, immutable set of observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    rows: Vec<ObsRow>,
    schema: ColumnSchema,
}

impl Dataset {
    pub fn new(rows: Vec<ObsRow>, schema: ColumnSchema) -> Result<Self> {
        let p = schema.covariates.len();
        let with_benchmark = schema.benchmark.is_some();
        let mut counts = [0usize; 2];
        for (i, row) in rows.iter().enumerate() {
            if row.x.len() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    found: row.x.len(),
                });
            }
            let check = |column: &str, v: f64| {
                if v.is_finite() {
                    Ok(())
                } else {
                    Err(Error::NonFiniteValue {
                        row: i,
                        column: column.to_string(),
                        value: v.to_string(),
                    })
                }
            };
            for (name, &v) in schema.covariates.iter().zip(&row.x) {
                check(name, v)?;
            }
            check(&schema.mediator, row.m)?;
            check(&schema.outcome, row.y)?;
            match (row.w, &schema.benchmark) {
                (Some(w), Some(name)) => check(name, w)?,
                (None, None) => {}
                _ => return Err(Error::PartialBenchmark),
            }
            counts[row.a.index()] += 1;
        }
        for arm in Arm::BOTH {
            let n_arm = counts[arm.index()];
            if n_arm == 0 {
                return Err(Error::EmptyArm {
                    arm: arm.index() as u8,
                });
            }
            if n_arm < p + 2 {
                return Err(Error::InsufficientRows {
                    arm: arm.index() as u8,
                    rows: n_arm,
                    required: p + 2,
                    covariates: p,
                });
            }
        }
        debug_assert!(with_benchmark == rows.iter().all(|r| r.w.is_some()));
        Ok(Dataset { rows, schema })
    }

    pub fn rows(&self) -> &[ObsRow] {
        &self.rows
    }

    pub fn schema(&self) -> &ColumnSchema {
        &self.schema
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn p(&self) -> usize {
        self.schema.covariates.len()
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.schema.covariates
    }

    pub fn benchmark_name(&self) -> Option<&str> {
        self.schema.benchmark.as_deref()
    }

    pub fn has_benchmark(&self) -> bool {
        self.schema.benchmark.is_some()
    }

    pub fn arm_rows(&self, arm: Arm) -> impl Iterator<Item = &ObsRow> {
        self.rows.iter().filter(move |r| r.a == arm)
    }

    pub fn arm_count(&self, arm: Arm) -> usize {
        self.arm_rows(arm).count()
    }

    /// Benchmark values of the rows in `arm`, in row order.
    pub fn benchmark_in_arm(&self, arm: Arm) -> Result<Vec<f64>> {
        if !self.has_benchmark() {
            return Err(Error::NoBenchmark);
        }
        Ok(self.arm_rows(arm).filter_map(|r| r.w).collect())
    }

    /// Within-arm fractional rank of the benchmark, aligned with the rows of
    /// `arm` in dataset order.
    pub fn fractional_rank_within_arm(&self, arm: Arm) -> Result<Vec<f64>> {
        let w = self.benchmark_in_arm(arm)?;
        if w.is_empty() {
            return Err(Error::EmptyArm {
                arm: arm.index() as u8,
            });
        }
        Ok(fractional_ranks(&w))
    }

    /// Returns a copy with the benchmark column replaced by `f(w)`.
    pub fn map_benchmark(&self, f: impl Fn(f64) -> f64) -> Result<Dataset> {
        if !self.has_benchmark() {
            return Err(Error::NoBenchmark);
        }
        let rows = self
            .rows
            .iter()
            .map(|r| ObsRow {
                w: r.w.map(&f),
                ..r.clone()
            })
            .collect();
        Dataset::new(rows, self.schema.clone())
    }

    /// Z-scores every covariate column over the pooled sample. Constant
    /// columns are centred only. The benchmark column is left on its own scale.
    pub fn standardize_covariates(&self) -> Dataset {
        let n = self.n() as f64;
        let p = self.p();
        let mut rows = self.rows.clone();
        for j in 0..p {
            let mean = self.rows.iter().map(|r| r.x[j]).sum::<f64>() / n;
            let var = self
                .rows
                .iter()
                .map(|r| (r.x[j] - mean).powi(2))
                .sum::<f64>()
                / n;
            let sd = var.sqrt();
            for r in rows.iter_mut() {
                r.x[j] -= mean;
                if sd > 0.0 {
                    r.x[j] /= sd;
                }
            }
        }
        Dataset {
            rows,
            schema: self.schema.clone(),
        }
    }
}

/// Fractional rank `#{j : v_j <= v_i} / n`. Ties share the largest rank of
/// their block, so every output lies in `(0, 1]`.
pub fn fractional_ranks(values: &[f64]) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = values.len() as f64;
    values
        .iter()
        .map(|&v| sorted.partition_point(|&s| s <= v) as f64 / n)
        .collect()
}

/// Formats a number with 17 significant digits, enough to round-trip any f64.
pub fn format_number(v: f64) -> String {
    if v == 0.0 {
        // keep the sign of negative zero out of output files
        return "0".to_string();
    }
    format!("{v:.16e}")
}

pub fn load_dataset(path: impl AsRef<Path>, schema: &ColumnSchema) -> Result<Dataset> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let headers = reader.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn {
                column: name.to_string(),
                path: path.to_path_buf(),
            })
    };
    let a_idx = find(&schema.treatment)?;
    let m_idx = find(&schema.mediator)?;
    let y_idx = find(&schema.outcome)?;
    let x_idx = schema
        .covariates
        .iter()
        .map(|c| find(c))
        .collect::<Result<Vec<_>>>()?;
    let w_idx = schema.benchmark.as_deref().map(find).transpose()?;

    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let field = |idx: usize, name: &str| -> Result<f64> {
            let raw = record.get(idx).unwrap_or("");
            match raw.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(Error::NonFiniteValue {
                    row: i,
                    column: name.to_string(),
                    value: raw.to_string(),
                }),
            }
        };
        let a_raw = record.get(a_idx).unwrap_or("");
        let a = match a_raw.parse::<f64>() {
            Ok(0.0) => Arm::Control,
            Ok(1.0) => Arm::Treated,
            _ => {
                return Err(Error::NonBinaryTreatment {
                    row: i,
                    column: schema.treatment.clone(),
                    value: a_raw.to_string(),
                })
            }
        };
        let x = x_idx
            .iter()
            .zip(&schema.covariates)
            .map(|(&idx, name)| field(idx, name))
            .collect::<Result<Vec<_>>>()?;
        let w = match (w_idx, schema.benchmark.as_deref()) {
            (Some(idx), Some(name)) => Some(field(idx, name)?),
            _ => None,
        };
        rows.push(ObsRow {
            x,
            a,
            m: field(m_idx, &schema.mediator)?,
            y: field(y_idx, &schema.outcome)?,
            w,
        });
    }
    Dataset::new(rows, schema.clone())
}

pub fn save_dataset(path: impl AsRef<Path>, data: &Dataset) -> Result<()> {
    let schema = data.schema();
    let mut writer = csv::Writer::from_path(path)?;
    let mut header: Vec<&str> = schema.covariates.iter().map(String::as_str).collect();
    header.extend([
        schema.treatment.as_str(),
        schema.mediator.as_str(),
        schema.outcome.as_str(),
    ]);
    if let Some(b) = &schema.benchmark {
        header.push(b);
    }
    writer.write_record(&header)?;
    for row in data.rows() {
        let mut rec: Vec<String> = row.x.iter().map(|&v| format_number(v)).collect();
        rec.push(row.a.index().to_string());
        rec.push(format_number(row.m));
        rec.push(format_number(row.y));
        if let Some(w) = row.w {
            rec.push(format_number(w));
        }
        writer.write_record(&rec)?;
    }
    writer.flush()?;
    Ok(())
}

/// Structural outcome equation of the synthetic generator:
/// `Y = intercept + treatment*A + mediator*M + interaction*A*M + covariates.X
///      + benchmark_coef*W + latent*U + noise`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeCoefficients {
    pub intercept: f64,
    pub treatment: f64,
    pub mediator: f64,
    #[serde(default)]
    pub interaction: f64,
    #[serde(default)]
    pub covariates: Vec<f64>,
}

/// Benchmark covariate `W ~ Uniform(low, high)`, entering the mediator and
/// outcome equations linearly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSpec {
    pub low: f64,
    pub high: f64,
    #[serde(default)]
    pub outcome_coef: f64,
    #[serde(default)]
    pub mediator_coef: f64,
}

/// Generator parameters. Covariates are iid standard normal; the mediator is
/// `M = mediator_coefs . (1, A, X) + mediator_coef*W + latent*U + noise`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n: usize,
    pub p: usize,
    pub treat_prob: f64,
    /// Intercept, treatment, then one coefficient per covariate.
    pub mediator_coefs: Vec<f64>,
    pub mediator_variance: f64,
    pub outcome: OutcomeCoefficients,
    pub outcome_variance: f64,
    /// Loading of a shared standard-normal latent confounder on M and Y.
    #[serde(default)]
    pub latent_strength: f64,
    #[serde(default)]
    pub benchmark: Option<BenchmarkSpec>,
}

/// Population values of the estimands implied by a [`SyntheticSpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticTruth {
    pub theta: f64,
    pub delta0: f64,
    pub delta1: f64,
    pub nde: f64,
    pub nie: f64,
    pub te: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticData {
    pub spec: SyntheticSpec,
    pub seed: u64,
    pub truth: SyntheticTruth,
    pub dataset: Dataset,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSpec(msg));
        if self.n < 1 {
            return bad("n must be at least 1".into());
        }
        if !(self.treat_prob > 0.0 && self.treat_prob < 1.0) {
            return bad(format!("treat_prob {} outside (0, 1)", self.treat_prob));
        }
        if self.mediator_coefs.len() != self.p + 2 {
            return bad(format!(
                "mediator_coefs has length {}, expected p + 2 = {}",
                self.mediator_coefs.len(),
                self.p + 2
            ));
        }
        if !self.outcome.covariates.is_empty() && self.outcome.covariates.len() != self.p {
            return bad(format!(
                "outcome covariate coefficients have length {}, expected {}",
                self.outcome.covariates.len(),
                self.p
            ));
        }
        for (name, v) in [
            ("mediator_variance", self.mediator_variance),
            ("outcome_variance", self.outcome_variance),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be a finite non-negative number, got {v}"));
            }
        }
        if let Some(b) = &self.benchmark {
            if !(b.high >= b.low) {
                return bad(format!("benchmark range [{}, {}] is empty", b.low, b.high));
            }
        }
        Ok(())
    }

    pub fn truth(&self) -> SyntheticTruth {
        let o = &self.outcome;
        let w_mean = self
            .benchmark
            .as_ref()
            .map(|b| 0.5 * (b.low + b.high))
            .unwrap_or(0.0);
        let (w_out, w_med) = self
            .benchmark
            .as_ref()
            .map(|b| (b.outcome_coef, b.mediator_coef))
            .unwrap_or((0.0, 0.0));
        // covariates and the latent confounder have mean zero
        let mean_m = |a: f64| self.mediator_coefs[0] + self.mediator_coefs[1] * a + w_med * w_mean;
        let mean_y = |a: f64, m_mean: f64| {
            o.intercept + o.treatment * a + (o.mediator + o.interaction * a) * m_mean + w_out * w_mean
        };
        let delta0 = mean_y(0.0, mean_m(0.0));
        let delta1 = mean_y(1.0, mean_m(1.0));
        let theta = mean_y(1.0, mean_m(0.0));
        SyntheticTruth {
            theta,
            delta0,
            delta1,
            nde: theta - delta0,
            nie: delta1 - theta,
            te: delta1 - delta0,
        }
    }
}

pub fn generate_synthetic(spec: &SyntheticSpec, seed: u64) -> Result<SyntheticData> {
    spec.validate()?;
    let mut rng = substream(seed, &[purpose::SYNTHETIC]);
    let sd_m = spec.mediator_variance.sqrt();
    let sd_y = spec.outcome_variance.sqrt();
    let o = &spec.outcome;
    let mut rows = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let x: Vec<f64> = (0..spec.p).map(|_| StandardNormal.sample(&mut rng)).collect();
        let a = if rng.random::<f64>() < spec.treat_prob {
            Arm::Treated
        } else {
            Arm::Control
        };
        let u: f64 = StandardNormal.sample(&mut rng);
        let w = spec
            .benchmark
            .as_ref()
            .map(|b| b.low + (b.high - b.low) * rng.random::<f64>());
        let e_m: f64 = StandardNormal.sample(&mut rng);
        let e_y: f64 = StandardNormal.sample(&mut rng);

        let av = a.indicator();
        let mut m = spec.mediator_coefs[0] + spec.mediator_coefs[1] * av;
        m += x
            .iter()
            .zip(&spec.mediator_coefs[2..])
            .map(|(xi, b)| xi * b)
            .sum::<f64>();
        let mut y = o.intercept + o.treatment * av;
        y += o.covariates.iter().zip(&x).map(|(b, xi)| b * xi).sum::<f64>();
        if let (Some(b), Some(w)) = (&spec.benchmark, w) {
            m += b.mediator_coef * w;
            y += b.outcome_coef * w;
        }
        m += spec.latent_strength * u + sd_m * e_m;
        y += (o.mediator + o.interaction * av) * m + spec.latent_strength * u + sd_y * e_y;
        rows.push(ObsRow { x, a, m, y, w });
    }
    let schema = ColumnSchema::synthetic(spec.p, spec.benchmark.is_some());
    let dataset = Dataset::new(rows, schema)?;
    Ok(SyntheticData {
        spec: spec.clone(),
        seed,
        truth: spec.truth(),
        dataset,
    })
}
