use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::covariance::{covariance_matrix, factorize, CholeskyFactor, DEFAULT_JITTER};
use super::{GaussianModel, SamplePath};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;

/// Law of `w_r` given the grid observations `w_{t_0}, ..., w_s`.
///
/// Coordinates are independent, so the conditional covariance is
/// `variance · I_d` and the conditional mean of every coordinate is the same
/// linear functional of that coordinate's prefix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalLaw {
    pub s: f64,
    pub r: f64,
    pub dim: usize,
    pub variance: f64,
    /// Weights on `w_{t_1}, ..., w_{t_k}` with `t_k = s` (`w_{t_0} = 0` carries
    /// no information).
    pub coefficients: Vec<f64>,
    pub jitter: f64,
}

impl ConditionalLaw {
    /// Conditional mean `E[w_r | F_s]` for an observed path.
    pub fn mean(&self, path: &SamplePath) -> Result<Vec<f64>> {
        if path.dim != self.dim {
            return Err(Error::GridMismatch(format!(
                "path dimension {} differs from law dimension {}",
                path.dim, self.dim
            )));
        }
        if path.len() <= self.coefficients.len() {
            return Err(Error::GridMismatch("path shorter than the conditioning prefix".into()));
        }
        let mut out = vec![0.0; self.dim];
        for (i, c) in self.coefficients.iter().enumerate() {
            for (o, v) in out.iter_mut().zip(path.point(i + 1)) {
                *o += c * v;
            }
        }
        Ok(out)
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        DMatrix::identity(self.dim, self.dim) * self.variance
    }
}

/// Conditional law via the Schur complement of the joint covariance of
/// `(w_{t_1..s}, w_r)`.
pub fn conditional_law(model: &GaussianModel, grid: TimeGrid, s: f64, r: f64) -> Result<ConditionalLaw> {
    if !(s < r) {
        return Err(Error::param("r", format!("need s < r, got s = {s}, r = {r}")));
    }
    if (grid.horizon() - model.horizon).abs() > 1e-12 * model.horizon {
        return Err(Error::GridMismatch("grid horizon differs from model horizon".into()));
    }
    let k = grid.index_of(s)?;
    let j = grid.index_of(r)?;
    let r = grid.time(j);
    let var_r = model.covariance(r, r);
    if k == 0 {
        return Ok(ConditionalLaw {
            s: 0.0,
            r,
            dim: model.dim,
            variance: var_r,
            coefficients: Vec::new(),
            jitter: 0.0,
        });
    }
    let prefix: Vec<f64> = (1..=k).map(|i| grid.time(i)).collect();
    let cov = covariance_matrix(model, &prefix)?;
    let factor = factorize(&cov.matrix, DEFAULT_JITTER)?;
    let c = DVector::from_iterator(k, prefix.iter().map(|&t| model.covariance(t, r)));
    let y = factor.lower.solve_lower_triangular(&c).expect("nonzero diagonal");
    let coeffs = factor.lower.tr_solve_lower_triangular(&y).expect("nonzero diagonal");
    Ok(ConditionalLaw {
        s: grid.time(k),
        r,
        dim: model.dim,
        variance: var_r - c.dot(&coeffs),
        coefficients: coeffs.iter().copied().collect(),
        jitter: factor.jitter,
    })
}

/// Innovation form of the grid filtration.
///
/// With `Σ = L Lᵀ` on `t_1..t_n`, `w_{t_j} = Σ_m L[j-1, m] ξ_m` for i.i.d.
/// standard normals `ξ`, and the conditional variance of `w_{t_j}` given
/// `w_{t_1..t_k}` is `Σ_{m ≥ k} L[j-1, m]²`. One factorization serves every
/// pair `(s, t)`.
#[derive(Debug, Clone)]
pub struct Innovations {
    grid: TimeGrid,
    factor: CholeskyFactor,
    /// `tails[(i, m)] = Σ_{m' ≥ m} L[i, m']²`.
    tails: DMatrix<f64>,
}

impl Innovations {
    pub fn new(model: &GaussianModel, steps: usize) -> Result<Self> {
        let grid = TimeGrid::new(model.horizon, steps)?;
        let times: Vec<f64> = (1..=steps).map(|i| grid.time(i)).collect();
        let cov = covariance_matrix(model, &times)?;
        let factor = factorize(&cov.matrix, DEFAULT_JITTER)?;
        let n = steps;
        let mut tails = DMatrix::zeros(n, n);
        for i in 0..n {
            let mut acc = 0.0;
            for m in (0..=i).rev() {
                acc += factor.lower[(i, m)].powi(2);
                tails[(i, m)] = acc;
            }
        }
        Ok(Self { grid, factor, tails })
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn jitter(&self) -> f64 {
        self.factor.jitter
    }

    /// Conditional variance of `w_{t_j}` given the observations up to `t_k`.
    pub fn conditional_variance(&self, k: usize, j: usize) -> f64 {
        assert!(k < j && j <= self.grid.steps());
        self.tails[(j - 1, k)]
    }

    /// Innovations `ξ = L⁻¹ (w_{t_1}, ..., w_{t_n})` of one coordinate.
    pub fn innovations(&self, values: &[f64]) -> Result<Vec<f64>> {
        let n = self.grid.steps();
        if values.len() != n {
            return Err(Error::GridMismatch(format!("expected {n} values, got {}", values.len())));
        }
        let xi = self
            .factor
            .lower
            .solve_lower_triangular(&DVector::from_column_slice(values))
            .expect("nonzero diagonal");
        Ok(xi.iter().copied().collect())
    }

    /// Row `j - 1` of the factor: weights of `ξ_0..ξ_{j-1}` in `w_{t_j}`.
    pub(crate) fn factor_row(&self, j: usize) -> Vec<f64> {
        (0..j).map(|m| self.factor.lower[(j - 1, m)]).collect()
    }

    /// Conditional variance of `w_{t_j}` given observations up to `t_k`; zero for `j ≤ k`.
    pub(crate) fn tail(&self, k: usize, j: usize) -> f64 {
        if j <= k {
            0.0
        } else {
            self.tails[(j - 1, k)]
        }
    }

    /// Conditional mean of `w_{t_j}` given the innovations `ξ_0..ξ_{k-1}`.
    pub fn conditional_mean(&self, k: usize, j: usize, xi: &[f64]) -> f64 {
        (0..k).map(|m| self.factor.lower[(j - 1, m)] * xi[m]).sum()
    }
}
