use serde::{Deserialize, Serialize};

use super::conditional::Innovations;
use super::GaussianModel;
use crate::error::{Error, Result};
use crate::numerics::linear_fit;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LndSettings {
    /// The infimum must exceed this to count as positive.
    pub tolerance: f64,
    /// Lags (in grid steps) of the near-diagonal profile.
    pub lags: Vec<usize>,
    /// Largest log-log slope of the near-diagonal profile still compatible
    /// with a quotient bounded away from zero as the lag shrinks.
    pub slope_tolerance: f64,
}

impl Default for LndSettings {
    fn default() -> Self {
        Self {
            tolerance: 1e-3,
            lags: vec![1, 2, 4, 8, 16],
            slope_tolerance: 0.05,
        }
    }
}

/// Quotients `cov(w_t | F_s) / (t-s)^{2ζ}` (strong form) and
/// `cov(w_t - w_s) / (t-s)^{2ζ}` (weak form) over all grid pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LndProfile {
    pub zeta: f64,
    pub steps: usize,
    pub horizon: f64,
    pub jitter: f64,
    pub strong_infimum: f64,
    /// Grid indices `(k, j)` of the strong infimum.
    pub strong_argmin: (usize, usize),
    pub weak_infimum: f64,
    /// `(lag, min_s quotient)` for each configured lag.
    pub near_diagonal: Vec<(usize, f64)>,
    /// Slope of `ln quotient` against `ln (t-s)` over the near-diagonal lags.
    pub near_diagonal_slope: f64,
    pub lnd: bool,
    /// Row-major `n × n` strong quotients, entry `(k, j-1)` for `k < j`; zero elsewhere.
    #[serde(skip)]
    pub strong: Vec<f64>,
}

impl LndProfile {
    pub fn strong_quotient(&self, k: usize, j: usize) -> f64 {
        assert!(k < j && j <= self.steps);
        self.strong[k * self.steps + j - 1]
    }
}

pub fn lnd_profile(model: &GaussianModel, steps: usize, zeta: f64, settings: &LndSettings) -> Result<LndProfile> {
    if !(zeta > 0.0 && zeta < 1.0) {
        return Err(Error::param("zeta", "must lie in (0, 1)"));
    }
    if steps < 2 {
        return Err(Error::param("n", "need a grid with at least 3 points"));
    }
    let inn = Innovations::new(model, steps)?;
    let grid = inn.grid();
    let dt = grid.dt();
    let n = steps;
    let mut strong = vec![0.0; n * n];
    let mut strong_inf = f64::INFINITY;
    let mut argmin = (0, 1);
    let mut weak_inf = f64::INFINITY;
    for k in 0..n {
        for j in k + 1..=n {
            let h = (j - k) as f64 * dt;
            let scale = h.powf(2.0 * zeta);
            let q = inn.conditional_variance(k, j) / scale;
            strong[k * n + j - 1] = q;
            if q < strong_inf {
                strong_inf = q;
                argmin = (k, j);
            }
            let w = model.increment_variance(grid.time(k), grid.time(j)) / scale;
            weak_inf = weak_inf.min(w);
        }
    }
    let near_diagonal: Vec<(usize, f64)> = settings
        .lags
        .iter()
        .filter(|&&l| l >= 1 && l <= n)
        .map(|&l| {
            let m = (0..=n - l)
                .map(|k| strong[k * n + k + l - 1])
                .fold(f64::INFINITY, f64::min);
            (l, m)
        })
        .collect();
    let xs: Vec<f64> = near_diagonal.iter().map(|(l, _)| (*l as f64 * dt).ln()).collect();
    let ys: Vec<f64> = near_diagonal.iter().map(|(_, q)| q.max(f64::MIN_POSITIVE).ln()).collect();
    let slope = linear_fit(&xs, &ys).map_or(0.0, |f| f.slope);
    let lnd = strong_inf > settings.tolerance && slope <= settings.slope_tolerance;
    Ok(LndProfile {
        zeta,
        steps,
        horizon: model.horizon,
        jitter: inn.jitter(),
        strong_infimum: strong_inf,
        strong_argmin: argmin,
        weak_infimum: weak_inf,
        near_diagonal,
        near_diagonal_slope: slope,
        lnd,
        strong,
    })
}
