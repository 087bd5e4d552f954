//! Centered Gaussian process models.
//!
//! Every model is a `d`-dimensional process whose coordinates are
//! independent copies of a scalar process; covariances, conditional laws and
//! LND profiles are therefore computed for one coordinate and act as
//! multiples of the identity across coordinates.

mod conditional;
mod covariance;
mod lnd;
mod sample;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use conditional::{conditional_law, ConditionalLaw, Innovations};
pub use covariance::{covariance_matrix, factorize, CholeskyFactor, CovarianceMatrix, DEFAULT_JITTER};
pub use lnd::{lnd_profile, LndProfile, LndSettings};
pub use sample::{sample, sample_batch, SamplePath, Sampler};

/// Volterra kernel `k(u) = scale · u^exponent · e^{-rate·u}` for
/// `w_t = ∫_0^t k(t - r) dB_r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    pub scale: f64,
    pub exponent: f64,
    #[serde(default)]
    pub rate: f64,
}

impl Kernel {
    pub fn eval(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        self.scale * u.powf(self.exponent) * (-self.rate * u).exp()
    }
}

/// Which process a [`GaussianModel`] describes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelKind {
    /// Fractional Brownian motion with Hurst exponent `hurst ∈ (0, 1)`.
    Fbm { hurst: f64 },
    /// p-log Brownian motion, kernel `k(t) = (t ln(1/t)^{2p})^{-1/2}`.
    PLogBm { p: f64 },
    /// Finite series `Σ λ_n B^{H_n}` of independent fBms.
    FbmSeries { lambdas: Vec<f64>, hursts: Vec<f64> },
    /// Volterra process with a user-supplied convolution kernel.
    CustomKernel { kernel: Kernel },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianModel {
    #[serde(flatten)]
    pub kind: ModelKind,
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
}

fn default_dim() -> usize {
    1
}

fn default_horizon() -> f64 {
    1.0
}

impl GaussianModel {
    pub fn new(kind: ModelKind, dim: usize, horizon: f64) -> Result<Self> {
        let m = Self { kind, dim, horizon };
        m.validate()?;
        Ok(m)
    }

    pub fn fbm(hurst: f64, dim: usize, horizon: f64) -> Result<Self> {
        Self::new(ModelKind::Fbm { hurst }, dim, horizon)
    }

    pub fn brownian(dim: usize, horizon: f64) -> Result<Self> {
        Self::fbm(0.5, dim, horizon)
    }

    pub fn plog(p: f64, dim: usize, horizon: f64) -> Result<Self> {
        Self::new(ModelKind::PLogBm { p }, dim, horizon)
    }

    pub fn fbm_series(lambdas: Vec<f64>, hursts: Vec<f64>, dim: usize, horizon: f64) -> Result<Self> {
        Self::new(ModelKind::FbmSeries { lambdas, hursts }, dim, horizon)
    }

    /// Checks the parameter constraints of the model kind.
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::param("model.dim", "must be >= 1"));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::param("model.horizon", "must be finite and > 0"));
        }
        match &self.kind {
            ModelKind::Fbm { hurst } => check_hurst("model.hurst", *hurst),
            ModelKind::PLogBm { p } => {
                if !(p.is_finite() && *p > 0.5) {
                    return Err(Error::param("model.p", "p-log Brownian motion needs p > 1/2"));
                }
                if self.horizon >= 1.0 {
                    return Err(Error::param(
                        "model.horizon",
                        "p-log Brownian motion needs T < 1 (kernel not square integrable at t = 1)",
                    ));
                }
                Ok(())
            }
            ModelKind::FbmSeries { lambdas, hursts } => {
                if lambdas.is_empty() {
                    return Err(Error::param("model.lambdas", "series needs at least one term"));
                }
                if lambdas.len() != hursts.len() {
                    return Err(Error::param(
                        "model.hursts",
                        format!("expected {} entries, got {}", lambdas.len(), hursts.len()),
                    ));
                }
                for (i, l) in lambdas.iter().enumerate() {
                    if !(l.is_finite() && *l > 0.0) {
                        return Err(Error::param(format!("model.lambdas[{i}]"), "must be > 0"));
                    }
                }
                for (i, h) in hursts.iter().enumerate() {
                    check_hurst(&format!("model.hursts[{i}]"), *h)?;
                }
                Ok(())
            }
            ModelKind::CustomKernel { kernel } => {
                if !(kernel.scale.is_finite() && kernel.exponent.is_finite() && kernel.rate.is_finite()) {
                    return Err(Error::param("model.kernel", "parameters must be finite"));
                }
                if kernel.exponent <= -0.5 {
                    return Err(Error::param(
                        "model.kernel.exponent",
                        "must be > -1/2 for a square-integrable kernel",
                    ));
                }
                Ok(())
            }
        }
    }

    /// True when the increments are stationary, which allows circulant
    /// embedding.
    pub fn has_stationary_increments(&self) -> bool {
        matches!(self.kind, ModelKind::Fbm { .. } | ModelKind::FbmSeries { .. })
    }

    /// Sum of the series coefficients and the largest tail weight given up by
    /// the truncation. A finite list always has a finite coefficient sum; the
    /// condition `Σ λ_n E[sup |B^{H_n}|] < ∞` of an infinite series cannot
    /// be checked from finite data, so only the truncated part is reported.
    pub fn series_summary(&self) -> Option<SeriesSummary> {
        match &self.kind {
            ModelKind::FbmSeries { lambdas, .. } => Some(SeriesSummary {
                terms: lambdas.len(),
                lambda_sum: lambdas.iter().sum(),
                last_lambda: *lambdas.last().expect("validated non-empty"),
            }),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesSummary {
    pub terms: usize,
    pub lambda_sum: f64,
    pub last_lambda: f64,
}

fn check_hurst(field: &str, h: f64) -> Result<()> {
    if !(h > 0.0 && h < 1.0) {
        return Err(Error::param(field, "Hurst exponent must lie in (0, 1)"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plog_requires_short_horizon() {
        assert!(GaussianModel::plog(2.0, 1, 0.5).is_ok());
        assert!(GaussianModel::plog(2.0, 1, 1.0).is_err());
        assert!(GaussianModel::plog(0.4, 1, 0.5).is_err());
    }

    #[test]
    fn series_rejects_nonpositive_lambda() {
        let err = GaussianModel::fbm_series(vec![1.0, 0.0], vec![0.3, 0.4], 1, 1.0).unwrap_err();
        assert!(err.to_string().contains("lambdas[1]"));
        assert!(GaussianModel::fbm_series(vec![1.0], vec![0.3, 0.4], 1, 1.0).is_err());
    }

    #[test]
    fn config_round_trip() {
        let m = GaussianModel::fbm_series(vec![1.0, 0.5], vec![0.2, 0.7], 2, 1.0).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        assert!(s.contains("\"kind\":\"fbm_series\""));
        let back: GaussianModel = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
    }
}
