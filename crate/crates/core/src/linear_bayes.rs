//! Conjugate normal-inverse-gamma linear regression.
//!
//! Parameterisation: `sigma2 ~ InvGamma(shape, scale)` and
//! `beta | sigma2 ~ N(mean, sigma2 * precision^{-1})`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Hyperparameters of a normal-inverse-gamma law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NigParams {
    mean: DVector<f64>,
    precision: DMatrix<f64>,
    shape: f64,
    scale: f64,
}

/// Weakly informative prior settings shared by the working models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    /// Multiple of the identity used as prior precision of the coefficients.
    pub precision: f64,
    pub shape: f64,
    pub scale: f64,
}

impl Default for PriorSpec {
    fn default() -> Self {
        PriorSpec {
            precision: 1e-2,
            shape: 2.0,
            scale: 2.0,
        }
    }
}

impl PriorSpec {
    pub fn build(&self, q: usize) -> Result<NigParams> {
        NigParams::new(
            DVector::zeros(q),
            DMatrix::identity(q, q) * self.precision,
            self.shape,
            self.scale,
        )
    }
}

fn factor(precision: &DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    Cholesky::new(precision.clone()).ok_or_else(|| {
        Error::NumericalFailure("precision matrix is not positive definite".into())
    })
}

impl NigParams {
    pub fn new(mean: DVector<f64>, precision: DMatrix<f64>, shape: f64, scale: f64) -> Result<Self> {
        let q = mean.len();
        if precision.nrows() != q || precision.ncols() != q {
            return Err(Error::DimensionMismatch {
                expected: q,
                found: precision.nrows(),
            });
        }
        if !(shape > 0.0 && shape.is_finite() && scale > 0.0 && scale.is_finite()) {
            return Err(Error::NumericalFailure(format!(
                "inverse-gamma shape and scale must be positive, got ({shape}, {scale})"
            )));
        }
        let tol = 1e-12 * precision.amax().max(1.0);
        if (&precision - precision.transpose()).amax() > tol {
            return Err(Error::NumericalFailure("precision matrix is not symmetric".into()));
        }
        factor(&precision)?;
        Ok(NigParams {
            mean,
            precision,
            shape,
            scale,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn precision(&self) -> &DMatrix<f64> {
        &self.precision
    }

    pub fn shape(&self) -> f64 {
        self.shape
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Posterior mean of `sigma2` when it exists (`shape > 1`), otherwise the
    /// mode-like fallback `scale / shape`.
    pub fn sigma2_point(&self) -> f64 {
        if self.shape > 1.0 {
            self.scale / (self.shape - 1.0)
        } else {
            self.scale / self.shape
        }
    }

    /// Marginal covariance of `beta`, `scale / (shape - 1) * precision^{-1}`.
    /// Requires `shape > 1`.
    pub fn beta_covariance(&self) -> Result<DMatrix<f64>> {
        if self.shape <= 1.0 {
            return Err(Error::NumericalFailure(
                "coefficient covariance undefined for shape <= 1".into(),
            ));
        }
        Ok(factor(&self.precision)?.inverse() * (self.scale / (self.shape - 1.0)))
    }

    pub fn update(&self, design: &DMatrix<f64>, response: &DVector<f64>) -> Result<NigParams> {
        nig_update(self, design, response)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<LinearModelDraw> {
        sample_draw(self, rng)
    }
}

/// One posterior draw of regression coefficients and error variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModelDraw {
    pub beta: Vec<f64>,
    pub sigma2: f64,
}

impl LinearModelDraw {
    #[inline]
    pub fn predict(&self, regressors: &[f64]) -> f64 {
        self.beta.iter().zip(regressors).map(|(b, x)| b * x).sum()
    }
}

/// Conjugate update of `prior` with `response ~ N(design * beta, sigma2)`.
pub fn nig_update(prior: &NigParams, design: &DMatrix<f64>, response: &DVector<f64>) -> Result<NigParams> {
    let q = prior.dim();
    if design.ncols() != q {
        return Err(Error::DimensionMismatch {
            expected: q,
            found: design.ncols(),
        });
    }
    if design.nrows() != response.len() {
        return Err(Error::DimensionMismatch {
            expected: design.nrows(),
            found: response.len(),
        });
    }
    let n = design.nrows();
    if n == 0 {
        return Ok(prior.clone());
    }
    let xtx = design.tr_mul(design);
    let xty = design.tr_mul(response);
    let yty = response.dot(response);
    update_from_stats(prior, &xtx, &xty, yty, n)
}

/// Same update as [`nig_update`] from the sufficient statistics
/// `(X'X, X'y, y'y, n)`.
pub fn update_from_stats(
    prior: &NigParams,
    xtx: &DMatrix<f64>,
    xty: &DVector<f64>,
    yty: f64,
    n: usize,
) -> Result<NigParams> {
    if n == 0 {
        return Ok(prior.clone());
    }
    let precision = &prior.precision + xtx;
    let chol = factor(&precision)?;
    let prior_moment = &prior.precision * &prior.mean;
    let mean = chol.solve(&(&prior_moment + xty));
    let quad_prior = prior.mean.dot(&prior_moment);
    let quad_post = mean.dot(&(&precision * &mean));
    let shape = prior.shape + 0.5 * n as f64;
    let scale = prior.scale + 0.5 * (yty + quad_prior - quad_post);
    if !(scale > 0.0 && scale.is_finite()) || mean.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalFailure(format!(
            "conjugate update produced invalid scale {scale}"
        )));
    }
    Ok(NigParams {
        mean,
        precision,
        shape,
        scale,
    })
}

/// Draws `sigma2 ~ InvGamma(shape, scale)`, then
/// `beta ~ N(mean, sigma2 * precision^{-1})`.
pub fn sample_draw<R: Rng + ?Sized>(posterior: &NigParams, rng: &mut R) -> Result<LinearModelDraw> {
    let gamma = Gamma::new(posterior.shape, 1.0)
        .map_err(|e| Error::NumericalFailure(format!("gamma sampler: {e}")))?;
    let g: f64 = gamma.sample(rng);
    let sigma2 = posterior.scale / g;
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::NumericalFailure(format!("sampled variance {sigma2}")));
    }
    let chol = factor(&posterior.precision)?;
    let z = DVector::from_iterator(
        posterior.dim(),
        (0..posterior.dim()).map(|_| StandardNormal.sample(rng)),
    );
    // precision = L L', so L'^{-1} z has covariance precision^{-1}
    let shift = chol
        .l()
        .tr_solve_lower_triangular(&z)
        .ok_or_else(|| Error::NumericalFailure("triangular solve failed".into()))?;
    let beta = &posterior.mean + shift * sigma2.sqrt();
    Ok(LinearModelDraw {
        beta: beta.iter().copied().collect(),
        sigma2,
    })
}

pub fn normal_log_density(value: f64, mean: f64, variance: f64) -> Result<f64> {
    if !(variance > 0.0) {
        return Err(Error::NonPositiveVariance(variance));
    }
    let d = value - mean;
    Ok(-0.5 * (LN_2PI + variance.ln()) - 0.5 * d * d / variance)
}

/// Gaussian log density with the normalising constant precomputed, for hot
/// loops where the variance is fixed.
#[derive(Debug, Clone, Copy)]
pub struct GaussianKernel {
    log_norm: f64,
    half_precision: f64,
}

impl GaussianKernel {
    pub fn new(variance: f64) -> Result<Self> {
        if !(variance > 0.0) {
            return Err(Error::NonPositiveVariance(variance));
        }
        Ok(GaussianKernel {
            log_norm: -0.5 * (LN_2PI + variance.ln()),
            half_precision: 0.5 / variance,
        })
    }

    #[inline]
    pub fn log_density(&self, value: f64, mean: f64) -> f64 {
        let d = value - mean;
        self.log_norm - self.half_precision * d * d
    }
}
