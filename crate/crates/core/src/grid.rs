//! Uniform time grids and symmetric frequency grids.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform grid `0 = t_0 < t_1 < ... < t_n = T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    horizon: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::param("horizon", "must be finite and > 0"));
        }
        if steps < 1 {
            return Err(Error::param("steps", "must be >= 1"));
        }
        Ok(Self { horizon, steps })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Number of steps `n`; the grid has `n + 1` points.
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn time(&self, i: usize) -> f64 {
        if i == self.steps {
            self.horizon
        } else {
            i as f64 * self.dt()
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps).map(|i| self.time(i)).collect()
    }

    /// Index of the grid point at time `t`, if `t` lies on the grid.
    pub fn index_of(&self, t: f64) -> Result<usize> {
        let x = t / self.dt();
        let i = x.round();
        if !(0.0..=self.steps as f64).contains(&i) || (x - i).abs() > 1e-9 * x.abs().max(1.0) {
            return Err(Error::GridMismatch(format!(
                "time {t} is not a point of the grid with step {}",
                self.dt()
            )));
        }
        Ok(i as usize)
    }
}

/// Symmetric frequency grid `{-z_max, ..., z_max}^d` with `m` points per axis.
///
/// `m` is odd so that `z = 0` is a grid point. The grid is paired with the
/// spatial grid `x_n = (n - (m-1)/2) Δx`, `Δx = 2π / (m Δz)`, on which the
/// discrete Fourier pair is exact.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    pub z_max: f64,
    pub m: usize,
    pub dim: usize,
}

impl FrequencyGrid {
    pub fn new(z_max: f64, m: usize, dim: usize) -> Result<Self> {
        if !(z_max.is_finite() && z_max > 0.0) {
            return Err(Error::param("z_max", "must be finite and > 0"));
        }
        if m < 3 || m % 2 == 0 {
            return Err(Error::param("m", "must be odd and >= 3"));
        }
        if dim == 0 {
            return Err(Error::param("dim", "must be >= 1"));
        }
        Ok(Self { z_max, m, dim })
    }

    /// Default grids: `m = 513, z_max = 128` in one dimension and
    /// `m = 129, z_max = 48` per axis in two or more dimensions.
    pub fn default_for(dim: usize) -> Self {
        if dim <= 1 {
            Self { z_max: 128.0, m: 513, dim: 1 }
        } else {
            Self { z_max: 48.0, m: 129, dim }
        }
    }

    pub fn dz(&self) -> f64 {
        2.0 * self.z_max / (self.m - 1) as f64
    }

    pub fn center(&self) -> usize {
        (self.m - 1) / 2
    }

    /// Frequency of the 1-d index `k`.
    pub fn axis_value(&self, k: usize) -> f64 {
        (k as f64 - self.center() as f64) * self.dz()
    }

    pub fn axis(&self) -> Vec<f64> {
        (0..self.m).map(|k| self.axis_value(k)).collect()
    }

    /// Total number of grid points, `m^d`.
    pub fn len(&self) -> usize {
        self.m.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Cell volume `Δz^d`.
    pub fn cell(&self) -> f64 {
        self.dz().powi(self.dim as i32)
    }

    /// Multi-index of a flat (row-major) index.
    pub fn multi_index(&self, mut flat: usize, out: &mut [usize]) {
        for a in (0..self.dim).rev() {
            out[a] = flat % self.m;
            flat /= self.m;
        }
    }

    /// Frequency vector at a flat index.
    pub fn point(&self, flat: usize) -> Vec<f64> {
        let mut idx = vec![0; self.dim];
        self.multi_index(flat, &mut idx);
        idx.iter().map(|&k| self.axis_value(k)).collect()
    }

    /// Iterator over all frequency vectors in flat order.
    pub fn points(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        (0..self.len()).map(move |i| self.point(i))
    }

    /// Flat index of the reflected point `-z`.
    pub fn reflect(&self, flat: usize) -> usize {
        let mut idx = vec![0; self.dim];
        self.multi_index(flat, &mut idx);
        idx.iter().fold(0, |acc, &k| acc * self.m + (self.m - 1 - k))
    }

    /// Flat index of `z = 0`.
    pub fn origin(&self) -> usize {
        (0..self.dim).fold(0, |acc, _| acc * self.m + self.center())
    }

    /// Flat index of the grid point equal to `z`, if there is one.
    pub fn index_of(&self, z: &[f64]) -> Option<usize> {
        if z.len() != self.dim {
            return None;
        }
        let mut flat = 0;
        for &za in z {
            let k = za / self.dz() + self.center() as f64;
            let kr = k.round();
            if (k - kr).abs() > 1e-9 || kr < 0.0 || kr >= self.m as f64 {
                return None;
            }
            flat = flat * self.m + kr as usize;
        }
        Some(flat)
    }

    /// Spacing of the dual spatial grid.
    pub fn dx(&self) -> f64 {
        2.0 * std::f64::consts::PI / (self.m as f64 * self.dz())
    }

    /// Spatial coordinate of the 1-d index `n` on the dual grid.
    pub fn space_value(&self, n: usize) -> f64 {
        (n as f64 - self.center() as f64) * self.dx()
    }

    pub fn space_axis(&self) -> Vec<f64> {
        (0..self.m).map(|n| self.space_value(n)).collect()
    }

    pub fn space_point(&self, flat: usize) -> Vec<f64> {
        let mut idx = vec![0; self.dim];
        self.multi_index(flat, &mut idx);
        idx.iter().map(|&n| self.space_value(n)).collect()
    }

    /// Half-width of the periodic spatial box, `π / Δz`.
    pub fn half_period(&self) -> f64 {
        std::f64::consts::PI / self.dz()
    }

    /// Spatial cell volume `Δx^d`.
    pub fn space_cell(&self) -> f64 {
        self.dx().powi(self.dim as i32)
    }

    pub(crate) fn check_same(&self, other: &FrequencyGrid) -> Result<()> {
        if self != other {
            return Err(Error::GridMismatch(format!(
                "frequency grids differ: {self:?} vs {other:?}"
            )));
        }
        Ok(())
    }
}
