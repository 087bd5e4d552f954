//! Occupation measures on the Fourier side and reconstructed local times.

mod regularity;

use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::Fourier;
use crate::funcspaces::SpatialField;
use crate::gaussmodels::SamplePath;
use crate::grid::FrequencyGrid;
use crate::io::write_csv;

pub use regularity::{
    holder_exponent, interpolation_check, sobolev_norm, window_set, ExponentReport, InterpolationReport, WindowSettings,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quadrature {
    /// `Σ_{i=k}^{j-1} e^{i⟨z, w_{t_i}⟩} Δt`; exactly additive in time.
    #[default]
    LeftRiemann,
    Trapezoid,
}

/// `μ̂_{s,t}(z) = ∫_s^t e^{i⟨z, w_r⟩} dr` on a frequency grid.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupationSpectrum {
    pub grid: FrequencyGrid,
    pub window: (f64, f64),
    pub quadrature: Quadrature,
    pub values: Vec<Complex64>,
    /// Per-coordinate range of the path over the window.
    pub range: Vec<(f64, f64)>,
}

/// Adds `weight · e^{i⟨z, w⟩}` to `out` for every grid point `z`.
///
/// Phases are built per axis by repeated multiplication from `z = 0`
/// outwards; negative frequencies are conjugates, so the result is exactly
/// Hermitian.
pub(crate) struct PhaseAccumulator {
    grid: FrequencyGrid,
    axes: Vec<Vec<Complex64>>,
}

impl PhaseAccumulator {
    pub(crate) fn new(grid: FrequencyGrid) -> Self {
        Self {
            grid,
            axes: vec![vec![Complex64::new(0.0, 0.0); grid.m]; grid.dim],
        }
    }

    pub(crate) fn add(&mut self, w: &[f64], weight: f64, out: &mut [Complex64]) {
        let m = self.grid.m;
        let c = self.grid.center();
        let dz = self.grid.dz();
        for (axis, &wa) in self.axes.iter_mut().zip(w) {
            let step = Complex64::from_polar(1.0, dz * wa);
            let mut p = Complex64::new(1.0, 0.0);
            axis[c] = p;
            for k in 1..=c {
                // Re-anchor every 64 steps to keep the recurrence error flat.
                p = if k % 64 == 0 {
                    Complex64::from_polar(1.0, k as f64 * dz * wa)
                } else {
                    p * step
                };
                axis[c + k] = p;
                axis[c - k] = p.conj();
            }
        }
        if self.grid.dim == 1 {
            for (o, p) in out.iter_mut().zip(&self.axes[0]) {
                *o += p * weight;
            }
            return;
        }
        let stride = m.pow(self.grid.dim as u32 - 1);
        let mut partial = vec![Complex64::new(0.0, 0.0); stride];
        for (flat, slot) in partial.iter_mut().enumerate() {
            let mut f = flat;
            let mut v = Complex64::new(weight, 0.0);
            for axis in self.axes[1..].iter().rev() {
                v *= axis[f % m];
                f /= m;
            }
            *slot = v;
        }
        for (k0, p0) in self.axes[0].iter().enumerate() {
            let row = &mut out[k0 * stride..(k0 + 1) * stride];
            for (o, q) in row.iter_mut().zip(&partial) {
                *o += p0 * q;
            }
        }
    }
}

fn quadrature_weight(q: Quadrature, i: usize, k: usize, j: usize, dt: f64) -> f64 {
    match q {
        Quadrature::LeftRiemann => {
            if i < j {
                dt
            } else {
                0.0
            }
        }
        Quadrature::Trapezoid => {
            if i == k || i == j {
                0.5 * dt
            } else {
                dt
            }
        }
    }
}

pub fn occupation_spectrum(
    path: &SamplePath,
    s: f64,
    t: f64,
    grid: FrequencyGrid,
    quadrature: Quadrature,
) -> Result<OccupationSpectrum> {
    if grid.dim != path.dim {
        return Err(Error::GridMismatch(format!(
            "frequency grid dimension {} differs from path dimension {}",
            grid.dim, path.dim
        )));
    }
    if !(s < t) {
        return Err(Error::param("t", format!("need s < t, got s = {s}, t = {t}")));
    }
    let k = path.grid.index_of(s)?;
    let j = path.grid.index_of(t)?;
    let dt = path.grid.dt();
    let mut values = vec![Complex64::new(0.0, 0.0); grid.len()];
    let mut acc = PhaseAccumulator::new(grid);
    let mut range = vec![(f64::INFINITY, f64::NEG_INFINITY); path.dim];
    for i in k..=j {
        let w = path.point(i);
        for (r, &v) in range.iter_mut().zip(w) {
            *r = (r.0.min(v), r.1.max(v));
        }
        let weight = quadrature_weight(quadrature, i, k, j, dt);
        if weight != 0.0 {
            acc.add(w, weight, &mut values);
        }
    }
    let (s, t) = (path.grid.time(k), path.grid.time(j));
    // The quadrature of the constant 1 is the window length.
    values[grid.origin()] = Complex64::new(t - s, 0.0);
    Ok(OccupationSpectrum {
        grid,
        window: (s, t),
        quadrature,
        values,
        range,
    })
}

impl OccupationSpectrum {
    pub fn length(&self) -> f64 {
        self.window.1 - self.window.0
    }

    /// `max_z |μ̂(-z) - conj μ̂(z)|`.
    pub fn hermitian_defect(&self) -> f64 {
        (0..self.grid.len())
            .map(|i| (self.values[self.grid.reflect(i)] - self.values[i].conj()).norm())
            .fold(0.0, f64::max)
    }

    /// CSV with columns `z_1..z_d, re, im`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut header: Vec<String> = (1..=self.grid.dim).map(|a| format!("z_{a}")).collect();
        header.extend(["re".to_string(), "im".to_string()]);
        let rows = (0..self.grid.len()).map(|i| {
            let mut r = self.grid.point(i);
            r.extend([self.values[i].re, self.values[i].im]);
            r
        });
        write_csv(w, &header, rows)
    }
}

/// Density of the occupation measure on the dual spatial grid.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalTimeField {
    pub field: SpatialField,
    pub window: (f64, f64),
    /// `Σ L Δx^d`.
    pub mass: f64,
    /// Largest imaginary part before it was discarded, relative to `max L`.
    pub imag_residue: f64,
    pub min_value: f64,
    pub max_value: f64,
    pub warnings: Vec<String>,
}

/// Spatial samples per unit of path range below which a warning is issued.
const MIN_CELLS_PER_RANGE: f64 = 8.0;
/// Negativity (relative to the maximum) treated as severe Gibbs ringing.
const SEVERE_NEGATIVITY: f64 = 0.05;

/// Inverse Fourier transform of a spectrum.
pub fn local_time(spectrum: &OccupationSpectrum) -> LocalTimeField {
    let grid = spectrum.grid;
    // μ̂(z) = ∫ L(x) e^{izx} dx is the transform of L at -z, so L is the
    // inverse transform of μ̂(-z) = conj μ̂(z), symmetrized first.
    let mut sym: Vec<Complex64> = spectrum.values.iter().map(|v| v.conj()).collect();
    for i in 0..grid.len() {
        let r = grid.reflect(i);
        if r > i {
            let avg = 0.5 * (sym[i] + sym[r].conj());
            sym[i] = avg;
            sym[r] = avg.conj();
        }
    }
    let space = Fourier::new(grid).to_space(&sym);
    let values: Vec<f64> = space.iter().map(|v| v.re).collect();
    let max_value = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min_value = values.iter().copied().fold(f64::INFINITY, f64::min);
    let imag = space.iter().map(|v| v.im.abs()).fold(0.0, f64::max);
    let scale = max_value.abs().max(f64::MIN_POSITIVE);
    let mass = crate::numerics::compensated_sum(values.iter().copied()) * grid.space_cell();
    let mut warnings = Vec::new();
    let half = grid.half_period();
    for (a, &(lo, hi)) in spectrum.range.iter().enumerate() {
        if lo < -half || hi > half {
            warnings.push(format!(
                "coordinate {} ranges over [{lo:.3}, {hi:.3}], outside the periodic box [-{half:.3}, {half:.3}]; the local time is aliased",
                a + 1
            ));
        }
        let span = hi - lo;
        if span > 0.0 && grid.z_max < std::f64::consts::PI * MIN_CELLS_PER_RANGE / span {
            warnings.push(format!(
                "coordinate {} spans {span:.3}, under {MIN_CELLS_PER_RANGE} spatial cells; increase z_max to at least {:.1}",
                a + 1,
                std::f64::consts::PI * MIN_CELLS_PER_RANGE / span
            ));
        }
    }
    if min_value < -SEVERE_NEGATIVITY * max_value {
        warnings.push(format!(
            "local time dips to {:.3} of its maximum; the frequency cutoff z_max = {} is too aggressive",
            min_value / max_value,
            grid.z_max
        ));
    }
    LocalTimeField {
        field: SpatialField { grid, values },
        window: spectrum.window,
        mass,
        imag_residue: imag / scale,
        min_value,
        max_value,
        warnings,
    }
}

impl LocalTimeField {
    /// CSV with columns `x_1..x_d, L`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let grid = self.field.grid;
        let mut header: Vec<String> = (1..=grid.dim).map(|a| format!("x_{a}")).collect();
        header.push("L".into());
        let rows = (0..grid.len()).map(|i| {
            let mut r = grid.space_point(i);
            r.push(self.field.values[i]);
            r
        });
        write_csv(w, &header, rows)
    }
}
