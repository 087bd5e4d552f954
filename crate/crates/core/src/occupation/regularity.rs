use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{OccupationSpectrum, PhaseAccumulator};
use crate::error::{Error, Result};
use crate::fourier::Fourier;
use crate::funcspaces::{build_partition, Radii};
use crate::gaussmodels::SamplePath;
use crate::grid::{FrequencyGrid, TimeGrid};
use crate::numerics::{linear_fit, mean_stderr};

/// `(Σ_z |μ̂(z)|² (1+|z|²)^λ Δz^d)^{1/2}`.
pub fn sobolev_norm(spectrum: &OccupationSpectrum, lambda: f64) -> f64 {
    sobolev_weights(spectrum.grid, lambda)
        .iter()
        .zip(&spectrum.values)
        .map(|(w, v)| w * v.norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// `(1+|z|²)^λ Δz^d` per grid point.
fn sobolev_weights(grid: FrequencyGrid, lambda: f64) -> Vec<f64> {
    let cell = grid.cell();
    grid.points()
        .map(|z| (1.0 + z.iter().map(|v| v * v).sum::<f64>()).powf(lambda) * cell)
        .collect()
}

/// Dyadic window set `h = T 2^{-j}`, `j ∈ levels`, with `positions` evenly
/// spaced left endpoints per scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WindowSettings {
    pub min_level: u32,
    pub max_level: u32,
    pub positions: usize,
}

impl Default for WindowSettings {
    fn default() -> Self {
        Self {
            min_level: 2,
            max_level: 7,
            positions: 16,
        }
    }
}

/// Windows as grid index pairs, grouped by scale: `(h, [(k, j)])`.
pub fn window_set(grid: TimeGrid, settings: &WindowSettings) -> Result<Vec<(f64, Vec<(usize, usize)>)>> {
    if settings.max_level < settings.min_level + 1 {
        return Err(Error::param("windows", "need at least two dyadic scales for a regression"));
    }
    if settings.positions == 0 {
        return Err(Error::param("windows.positions", "must be >= 1"));
    }
    let n = grid.steps();
    let mut out = Vec::new();
    for level in settings.min_level..=settings.max_level {
        let parts = 1usize << level;
        if n % parts != 0 {
            return Err(Error::GridMismatch(format!(
                "window T/2^{level} is not a whole number of the {n} grid steps"
            )));
        }
        let len = n / parts;
        let p = settings.positions;
        let mut windows: Vec<(usize, usize)> = (0..p)
            .map(|i| {
                let k = if p == 1 {
                    0
                } else {
                    ((i * (n - len)) as f64 / (p - 1) as f64).round() as usize
                };
                (k, k + len)
            })
            .collect();
        windows.dedup();
        out.push((grid.horizon() / parts as f64, windows));
    }
    Ok(out)
}

/// Left-Riemann spectra of many windows of one path from a single sweep of
/// running sums `S_i = Σ_{l<i} e^{i⟨z, w_{t_l}⟩}`.
fn windowed_spectra(path: &SamplePath, grid: FrequencyGrid, windows: &[(usize, usize)]) -> Vec<Vec<Complex64>> {
    let mut marks: Vec<usize> = windows.iter().flat_map(|&(k, j)| [k, j]).collect();
    marks.sort_unstable();
    marks.dedup();
    let mut snapshots: Vec<Vec<Complex64>> = Vec::with_capacity(marks.len());
    let mut running = vec![Complex64::new(0.0, 0.0); grid.len()];
    let mut acc = PhaseAccumulator::new(grid);
    let mut next = 0;
    let last = *marks.last().unwrap_or(&0);
    for i in 0..=last {
        if marks[next] == i {
            snapshots.push(running.clone());
            next += 1;
            if next == marks.len() {
                break;
            }
        }
        acc.add(path.point(i), 1.0, &mut running);
    }
    let dt = path.grid.dt();
    let origin = grid.origin();
    windows
        .iter()
        .map(|&(k, j)| {
            let a = &snapshots[marks.binary_search(&k).expect("marked")];
            let b = &snapshots[marks.binary_search(&j).expect("marked")];
            let mut v: Vec<Complex64> = b.iter().zip(a).map(|(x, y)| (x - y) * dt).collect();
            v[origin] = Complex64::new(path.grid.time(j) - path.grid.time(k), 0.0);
            v
        })
        .collect()
}

/// Batch fit of the time-Hölder exponent of `‖μ_{s,s+h}‖_{H^λ}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentReport {
    pub lambda: f64,
    pub gamma_hat: f64,
    pub stderr: f64,
    pub n_paths: usize,
    /// Window lengths `h` used in the regression.
    pub windows: Vec<f64>,
    /// Fitted slope per path.
    pub per_path: Vec<f64>,
    /// Batch mean of `sup_s ‖μ_{s,s+h}‖_{H^λ}` per window length.
    pub mean_sup_norms: Vec<f64>,
}

/// Minimum batch size for an exponent fit.
pub const MIN_PATHS: usize = 20;

pub fn holder_exponent(
    paths: &[SamplePath],
    lambda: f64,
    grid: FrequencyGrid,
    settings: &WindowSettings,
) -> Result<ExponentReport> {
    if paths.len() < MIN_PATHS {
        return Err(Error::param(
            "paths",
            format!("need at least {MIN_PATHS} paths, got {}", paths.len()),
        ));
    }
    let tgrid = paths[0].grid;
    if paths.iter().any(|p| p.grid != tgrid || p.dim != grid.dim) {
        return Err(Error::GridMismatch("paths must share one time grid and the grid dimension".into()));
    }
    let scales = window_set(tgrid, settings)?;
    let flat: Vec<(usize, usize)> = scales.iter().flat_map(|(_, w)| w.iter().copied()).collect();
    let weights = sobolev_weights(grid, lambda);
    let log_h: Vec<f64> = scales.iter().map(|(h, _)| h.ln()).collect();
    let sups: Vec<Vec<f64>> = paths
        .par_iter()
        .map(|p| {
            let spectra = windowed_spectra(p, grid, &flat);
            let norms: Vec<f64> = spectra
                .iter()
                .map(|v| weights.iter().zip(v).map(|(w, x)| w * x.norm_sqr()).sum::<f64>().sqrt())
                .collect();
            let mut offset = 0;
            scales
                .iter()
                .map(|(_, w)| {
                    let s = norms[offset..offset + w.len()].iter().copied().fold(0.0, f64::max);
                    offset += w.len();
                    s
                })
                .collect()
        })
        .collect();
    let per_path: Vec<f64> = sups
        .iter()
        .map(|s| {
            let ys: Vec<f64> = s.iter().map(|v| v.ln()).collect();
            linear_fit(&log_h, &ys).map_or(f64::NAN, |f| f.slope)
        })
        .collect();
    let (gamma_hat, stderr) = mean_stderr(&per_path);
    let mean_sup_norms = (0..scales.len())
        .map(|i| sups.iter().map(|s| s[i]).sum::<f64>() / sups.len() as f64)
        .collect();
    Ok(ExponentReport {
        lambda,
        gamma_hat,
        stderr,
        n_paths: paths.len(),
        windows: scales.iter().map(|(h, _)| *h).collect(),
        per_path,
        mean_sup_norms,
    })
}

/// Both sides of
/// `‖L‖_{C^γ C^α} ≤ ‖L‖_{C^1 C^{-d}}^γ sup_{s,t} ‖L_{s,t}‖_{C^κ}^{1-γ}`,
/// `κ = (α + γd)/(1 - γ)`, from Littlewood–Paley block suprema over a
/// dyadic window set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterpolationReport {
    pub alpha: f64,
    pub gamma: f64,
    pub kappa: f64,
    /// `sup_{s,t,j} 2^{jα} ‖Δ_j L_{s,t}‖_∞ / |t-s|^γ`.
    pub lhs: f64,
    /// `sup_{s,t,j} 2^{-jd} ‖Δ_j L_{s,t}‖_∞ / |t-s|`.
    pub time_lipschitz: f64,
    /// `sup_{s,t,j} 2^{jκ} ‖Δ_j L_{s,t}‖_∞`.
    pub space_sup: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub windows: usize,
}

pub fn interpolation_check(
    path: &SamplePath,
    alpha: f64,
    gamma: f64,
    grid: FrequencyGrid,
    settings: &WindowSettings,
) -> Result<InterpolationReport> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::param("alpha", "must be > 0"));
    }
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::Precondition(format!(
            "gamma = {gamma} must lie in [0, 1); kappa = (alpha + gamma d)/(1 - gamma) diverges as gamma -> 1"
        )));
    }
    if path.dim != grid.dim {
        return Err(Error::GridMismatch("path and frequency grid dimensions differ".into()));
    }
    let d = grid.dim as f64;
    let kappa = (alpha + gamma * d) / (1.0 - gamma);
    let partition = build_partition(grid, Radii::default())?;
    let fourier = Fourier::new(grid);
    let scales = window_set(path.grid, settings)?;
    let flat: Vec<(usize, usize)> = scales.iter().flat_map(|(_, w)| w.iter().copied()).collect();
    let spectra = windowed_spectra(path, grid, &flat);
    let (mut lhs, mut a, mut b) = (0.0_f64, 0.0_f64, 0.0_f64);
    for (&(k, j), spec) in flat.iter().zip(&spectra) {
        let h = path.grid.time(j) - path.grid.time(k);
        for level in partition.levels() {
            let masked: Vec<Complex64> = spec.iter().zip(partition.level(level)).map(|(v, w)| v * w).collect();
            let x = fourier.to_space(&masked).iter().map(|v| v.re.abs()).fold(0.0, f64::max);
            let jf = level as f64;
            lhs = lhs.max(2f64.powf(jf * alpha) * x / h.powf(gamma));
            a = a.max(2f64.powf(-jf * d) * x / h);
            b = b.max(2f64.powf(jf * kappa) * x);
        }
    }
    let rhs = a.powf(gamma) * b.powf(1.0 - gamma);
    Ok(InterpolationReport {
        alpha,
        gamma,
        kappa,
        lhs,
        time_lipschitz: a,
        space_sup: b,
        rhs,
        ratio: lhs / rhs,
        windows: flat.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussmodels::{sample, sample_batch, GaussianModel};
    use crate::occupation::{occupation_spectrum, Quadrature};

    #[test]
    fn zero_path_sobolev_is_flat_sum() {
        let g = FrequencyGrid::new(16.0, 65, 1).unwrap();
        let p = SamplePath::zero(TimeGrid::new(1.0, 8).unwrap(), 1);
        let s = occupation_spectrum(&p, 0.0, 0.5, g, Quadrature::LeftRiemann).unwrap();
        let expect = 0.5 * (g.len() as f64 * g.dz()).sqrt();
        assert!((sobolev_norm(&s, 0.0) - expect).abs() < 1e-12);
    }

    #[test]
    fn windowed_sweep_matches_direct_spectra() {
        let m = GaussianModel::fbm(0.4, 1, 1.0).unwrap();
        let p = sample(&m, 256, 5).unwrap();
        let g = FrequencyGrid::new(16.0, 65, 1).unwrap();
        let windows = [(0, 64), (10, 42), (128, 256), (200, 232)];
        let fast = windowed_spectra(&p, g, &windows);
        for (&(k, j), v) in windows.iter().zip(&fast) {
            let direct = occupation_spectrum(&p, p.grid.time(k), p.grid.time(j), g, Quadrature::LeftRiemann).unwrap();
            for (a, b) in v.iter().zip(&direct.values) {
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn window_set_layout() {
        let sets = window_set(TimeGrid::new(1.0, 1024).unwrap(), &WindowSettings::default()).unwrap();
        assert_eq!(sets.len(), 6);
        assert_eq!(sets[0].0, 0.25);
        assert_eq!(sets[0].1.len(), 16);
        assert_eq!(sets[5].1[15], (1016, 1024));
        let single = WindowSettings { min_level: 3, max_level: 3, positions: 16 };
        assert!(window_set(TimeGrid::new(1.0, 1024).unwrap(), &single).is_err());
    }

    #[test]
    fn linear_path_exponent_matches_closed_form() {
        // Oracle: |μ̂_{s,s+h}(z)| = |2 sin(zh/2)/z| for w_r = r, independent
        // of s; the grid sum and the regression are redone from it.
        let g = TimeGrid::new(1.0, 1024).unwrap();
        let fg = FrequencyGrid::default_for(1);
        let paths = vec![SamplePath::linear(g, &[0.0], &[1.0]).unwrap(); 20];
        let r = holder_exponent(&paths, 0.0, fg, &WindowSettings::default()).unwrap();
        let (xs, ys): (Vec<f64>, Vec<f64>) = r
            .windows
            .iter()
            .map(|&h| {
                let sq: f64 = fg
                    .axis()
                    .iter()
                    .map(|&z| if z == 0.0 { h * h } else { (2.0 * (z * h / 2.0).sin() / z).powi(2) })
                    .sum();
                (h.ln(), (sq * fg.dz()).sqrt().ln())
            })
            .unzip();
        let oracle = linear_fit(&xs, &ys).unwrap().slope;
        assert!((r.gamma_hat - oracle).abs() < 0.01, "{} vs {oracle}", r.gamma_hat);
        assert!(r.stderr < 1e-12);
    }

    #[test]
    fn requires_a_batch() {
        let m = GaussianModel::brownian(1, 1.0).unwrap();
        let paths = sample_batch(&m, 256, 0, 5).unwrap();
        assert!(holder_exponent(&paths, 0.0, FrequencyGrid::default_for(1), &WindowSettings::default()).is_err());
    }

    #[test]
    fn interpolation_ratio_bounded() {
        let m = GaussianModel::brownian(1, 1.0).unwrap();
        let p = sample(&m, 1024, 3).unwrap();
        let g = FrequencyGrid::default_for(1);
        let r = interpolation_check(&p, 0.2, 0.6, g, &WindowSettings::default()).unwrap();
        assert!(r.ratio <= 1.0 + 1e-12, "{}", r.ratio);
        let r0 = interpolation_check(&p, 0.2, 0.0, g, &WindowSettings::default()).unwrap();
        assert!((r0.ratio - 1.0).abs() < 1e-9);
        assert!(interpolation_check(&p, 0.2, 1.0, g, &WindowSettings::default()).is_err());
    }
}
