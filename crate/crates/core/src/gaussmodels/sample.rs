use std::sync::Arc;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::covariance::{covariance_matrix, factorize, CholeskyFactor, DEFAULT_JITTER};
use super::{GaussianModel, ModelKind};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;

/// A `d`-dimensional path on a uniform time grid.
///
/// Values are stored row-major: point `i` occupies `values[i*d..(i+1)*d]`.
/// Sampled paths start at the origin and carry their seed and model;
/// hand-built paths (constant, linear) carry neither.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePath {
    pub grid: TimeGrid,
    pub dim: usize,
    values: Vec<f64>,
    pub seed: Option<u64>,
    pub model: Option<GaussianModel>,
    /// Diagonal jitter used by the covariance factorization, if any.
    pub jitter: Option<f64>,
}

impl SamplePath {
    pub fn from_values(grid: TimeGrid, dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 || values.len() != grid.len() * dim {
            return Err(Error::GridMismatch(format!(
                "expected {} values for {} points in dimension {dim}, got {}",
                grid.len() * dim,
                grid.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("values", "path values must be finite"));
        }
        Ok(Self {
            grid,
            dim,
            values,
            seed: None,
            model: None,
            jitter: None,
        })
    }

    /// The constant path `w ≡ 0`.
    pub fn zero(grid: TimeGrid, dim: usize) -> Self {
        Self::from_values(grid, dim, vec![0.0; grid.len() * dim]).expect("consistent sizes")
    }

    /// The linear path `w_r = a + b r`.
    pub fn linear(grid: TimeGrid, a: &[f64], b: &[f64]) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::param("b", "offset and slope must have equal length"));
        }
        let values = grid
            .times()
            .iter()
            .flat_map(|&t| a.iter().zip(b).map(move |(ai, bi)| ai + bi * t))
            .collect();
        Self::from_values(grid, a.len(), values)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn coordinate(&self, a: usize) -> Vec<f64> {
        self.values.iter().skip(a).step_by(self.dim).copied().collect()
    }

    /// Smallest and largest value of each coordinate.
    pub fn range(&self) -> Vec<(f64, f64)> {
        (0..self.dim)
            .map(|a| {
                self.values.iter().skip(a).step_by(self.dim).fold(
                    (f64::INFINITY, f64::NEG_INFINITY),
                    |(lo, hi), &v| (lo.min(v), hi.max(v)),
                )
            })
            .collect()
    }
}

enum Method {
    /// Circulant embedding of fractional Gaussian noise, one entry per
    /// series term: `(λ, Hurst, √eigenvalues)`.
    Circulant {
        terms: Vec<(f64, f64, Vec<f64>)>,
        fft: Arc<dyn Fft<f64>>,
    },
    Cholesky(CholeskyFactor),
}

/// Pre-factorized sampler for one `(model, n)` pair.
pub struct Sampler {
    model: GaussianModel,
    grid: TimeGrid,
    method: Method,
}

impl std::fmt::Debug for Sampler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Sampler")
            .field("model", &self.model)
            .field("grid", &self.grid)
            .finish()
    }
}

/// fGn autocovariance at integer lag `k` for unit spacing.
fn fgn_autocov(hurst: f64, k: usize) -> f64 {
    let k = k as f64;
    let h2 = 2.0 * hurst;
    0.5 * ((k + 1.0).powf(h2) - 2.0 * k.powf(h2) + (k - 1.0).abs().powf(h2))
}

/// Square roots of the eigenvalues of the minimal circulant embedding of
/// `n` fGn increments, or `None` if the embedding is not PSD.
fn circulant_sqrt_eigen(hurst: f64, n: usize, fft: &Arc<dyn Fft<f64>>) -> Option<Vec<f64>> {
    let m = 2 * n;
    let mut c: Vec<Complex64> = (0..m)
        .map(|j| {
            let lag = if j <= n { j } else { m - j };
            Complex64::new(fgn_autocov(hurst, lag), 0.0)
        })
        .collect();
    fft.process(&mut c);
    let max = c.iter().map(|v| v.re).fold(0.0_f64, f64::max);
    let mut out = Vec::with_capacity(m);
    for v in c {
        if v.re < -1e-10 * max {
            return None;
        }
        out.push((v.re.max(0.0) / m as f64).sqrt());
    }
    Some(out)
}

impl Sampler {
    pub fn new(model: &GaussianModel, steps: usize) -> Result<Self> {
        model.validate()?;
        if steps < 2 {
            return Err(Error::param("n", "need at least 2 steps"));
        }
        let grid = TimeGrid::new(model.horizon, steps)?;
        let hursts: Option<Vec<(f64, f64)>> = match &model.kind {
            ModelKind::Fbm { hurst } => Some(vec![(1.0, *hurst)]),
            ModelKind::FbmSeries { lambdas, hursts } => {
                Some(lambdas.iter().copied().zip(hursts.iter().copied()).collect())
            }
            _ => None,
        };
        if let Some(hursts) = hursts {
            let fft = FftPlanner::new().plan_fft_forward(2 * steps);
            let terms: Option<Vec<_>> = hursts
                .iter()
                .map(|&(l, h)| circulant_sqrt_eigen(h, steps, &fft).map(|e| (l, h, e)))
                .collect();
            if let Some(terms) = terms {
                return Ok(Self {
                    model: model.clone(),
                    grid,
                    method: Method::Circulant { terms, fft },
                });
            }
        }
        let times: Vec<f64> = (1..=steps).map(|i| grid.time(i)).collect();
        let cov = covariance_matrix(model, &times)?;
        let factor = factorize(&cov.matrix, DEFAULT_JITTER)?;
        Ok(Self {
            model: model.clone(),
            grid,
            method: Method::Cholesky(factor),
        })
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn jitter(&self) -> Option<f64> {
        match &self.method {
            Method::Cholesky(f) => Some(f.jitter),
            Method::Circulant { .. } => None,
        }
    }

    /// One exact-in-law sample; bit-identical for identical `(model, n, seed)`.
    pub fn sample(&self, seed: u64) -> SamplePath {
        let n = self.grid.steps();
        let d = self.model.dim;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut values = vec![0.0; (n + 1) * d];
        for a in 0..d {
            let coord = match &self.method {
                Method::Circulant { terms, fft } => {
                    let mut acc = vec![0.0; n];
                    for (lambda, hurst, sqrt_eig) in terms {
                        let mut buf: Vec<Complex64> = sqrt_eig
                            .iter()
                            .map(|s| {
                                let re: f64 = StandardNormal.sample(&mut rng);
                                let im: f64 = StandardNormal.sample(&mut rng);
                                Complex64::new(re * s, im * s)
                            })
                            .collect();
                        fft.process(&mut buf);
                        let scale = lambda * self.grid.dt().powf(*hurst);
                        let mut level = 0.0;
                        for (slot, inc) in acc.iter_mut().zip(&buf) {
                            level += inc.re * scale;
                            *slot += level;
                        }
                    }
                    acc
                }
                Method::Cholesky(f) => {
                    let xi = DVector::from_iterator(n, (0..n).map(|_| StandardNormal.sample(&mut rng)));
                    (&f.lower * xi).iter().copied().collect()
                }
            };
            for (i, v) in coord.into_iter().enumerate() {
                values[(i + 1) * d + a] = v;
            }
        }
        SamplePath {
            grid: self.grid,
            dim: d,
            values,
            seed: Some(seed),
            model: Some(self.model.clone()),
            jitter: self.jitter(),
        }
    }
}

/// Sample one path of `model` with `n` steps.
pub fn sample(model: &GaussianModel, n: usize, seed: u64) -> Result<SamplePath> {
    Ok(Sampler::new(model, n)?.sample(seed))
}

/// `count` paths with seeds `base_seed + i`; the result does not depend on
/// the number of worker threads.
pub fn sample_batch(model: &GaussianModel, n: usize, base_seed: u64, count: usize) -> Result<Vec<SamplePath>> {
    let sampler = Sampler::new(model, n)?;
    Ok((0..count as u64)
        .into_par_iter()
        .map(|i| sampler.sample(base_seed.wrapping_add(i)))
        .collect())
}
