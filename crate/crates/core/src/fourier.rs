//! Discrete Fourier pair between a [`FrequencyGrid`] and its dual spatial grid.
//!
//! Conventions: `f̂(z) = ∫ f(x) e^{-i⟨z,x⟩} dx` and
//! `f(x) = (2π)^{-d} ∫ f̂(z) e^{i⟨z,x⟩} dz`, both discretised as grid sums.
//! With `Δx Δz = 2π / m` the two sums are exact inverses of each other.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::grid::FrequencyGrid;

pub struct Fourier {
    grid: FrequencyGrid,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Fourier {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fourier").field("grid", &self.grid).finish()
    }
}

impl Fourier {
    pub fn new(grid: FrequencyGrid) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            grid,
            forward: planner.plan_fft_forward(grid.m),
            inverse: planner.plan_fft_inverse(grid.m),
        }
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    /// Frequency samples to spatial samples: `(2π)^{-d} Σ_z f̂(z) e^{i⟨z,x⟩} Δz^d`.
    pub fn to_space(&self, spectrum: &[Complex64]) -> Vec<Complex64> {
        let mut data = spectrum.to_vec();
        self.transform(&mut data, true);
        let scale = self.grid.cell() / (2.0 * PI).powi(self.grid.dim as i32);
        data.iter_mut().for_each(|v| *v *= scale);
        data
    }

    /// Spatial samples to frequency samples: `Σ_x f(x) e^{-i⟨z,x⟩} Δx^d`.
    pub fn to_frequency(&self, field: &[Complex64]) -> Vec<Complex64> {
        let mut data = field.to_vec();
        self.transform(&mut data, false);
        let scale = self.grid.space_cell();
        data.iter_mut().for_each(|v| *v *= scale);
        data
    }

    /// Unnormalised centred DFT along every axis.
    ///
    /// Both grids are indexed symmetrically around the centre `c = (m-1)/2`,
    /// so the kernel is `exp(±2πi (k-c)(n-c)/m)`; rotating by `c` before and
    /// after a standard FFT realises it.
    fn transform(&self, data: &mut [Complex64], inverse: bool) {
        let m = self.grid.m;
        let d = self.grid.dim;
        let c = self.grid.center();
        assert_eq!(data.len(), self.grid.len());
        let fft = if inverse { &self.inverse } else { &self.forward };
        let mut line = vec![Complex64::new(0.0, 0.0); m];
        let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        for axis in 0..d {
            let stride = m.pow((d - 1 - axis) as u32);
            let outer = self.grid.len() / (m * stride);
            for o in 0..outer {
                for inner in 0..stride {
                    let base = o * m * stride + inner;
                    for k in 0..m {
                        line[(k + m - c) % m] = data[base + k * stride];
                    }
                    fft.process_with_scratch(&mut line, &mut scratch);
                    for n in 0..m {
                        data[base + n * stride] = line[(n + m - c) % m];
                    }
                }
            }
        }
    }
}
