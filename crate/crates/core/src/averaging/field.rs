use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::drift::{add_atom_levels, DriftEvaluator, SpectralDrift};
use crate::error::{Error, Result};
use crate::fourier::Fourier;
use crate::gaussmodels::SamplePath;
use crate::grid::FrequencyGrid;
use crate::io::{write_csv, ColumnFile};
use crate::occupation::{OccupationSpectrum, Quadrature};
use crate::tensor::{level_len, Jet};

/// Fraction of symbol mass beyond `z_max` that triggers a truncation warning.
const TAIL_WARNING: f64 = 0.1;

/// `∇^ℓ T^w_{s,t} b`, `ℓ = 0..=order`, on the spatial grid dual to `grid`,
/// for a list of windows.
#[derive(Debug, Clone, PartialEq)]
pub struct AveragedField {
    pub grid: FrequencyGrid,
    pub windows: Vec<(f64, f64)>,
    pub order: usize,
    pub dim: usize,
    /// `jets[w][ℓ][p * d^{ℓ+1} + c]`: component `c` of level `ℓ` at point `p`.
    pub jets: Vec<Vec<Vec<f64>>>,
    pub kappa: f64,
    pub warnings: Vec<String>,
}

impl AveragedField {
    fn zeros(grid: FrequencyGrid, windows: Vec<(f64, f64)>, order: usize, kappa: f64) -> Self {
        let d = grid.dim;
        let jets = windows
            .iter()
            .map(|_| (0..=order).map(|l| vec![0.0; grid.len() * level_len(d, l)]).collect())
            .collect();
        Self {
            grid,
            windows,
            order,
            dim: d,
            jets,
            kappa,
            warnings: Vec::new(),
        }
    }

    /// Jet at spatial point `p` of window `w`.
    pub fn jet_at(&self, w: usize, p: usize) -> Jet {
        let d = self.dim;
        Jet {
            dim: d,
            levels: (0..=self.order)
                .map(|l| {
                    let n = level_len(d, l);
                    self.jets[w][l][p * n..(p + 1) * n].to_vec()
                })
                .collect(),
        }
    }

    /// Window index of `(s, t)`.
    pub fn window_index(&self, s: f64, t: f64) -> Option<usize> {
        let tol = 1e-12 * (1.0 + s.abs().max(t.abs()));
        self.windows
            .iter()
            .position(|&(a, b)| (a - s).abs() <= tol && (b - t).abs() <= tol)
    }

    /// Pointwise `self - other`; grids, windows and orders must agree.
    pub fn difference(&self, other: &AveragedField) -> Result<AveragedField> {
        self.grid.check_same(&other.grid)?;
        if self.windows != other.windows || self.order != other.order {
            return Err(Error::GridMismatch("fields have different windows or jet orders".into()));
        }
        let mut out = self.clone();
        for (a, b) in out.jets.iter_mut().flatten().zip(other.jets.iter().flatten()) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x -= y);
        }
        out.kappa = self.kappa.max(other.kappa);
        out.warnings.extend(other.warnings.iter().cloned());
        Ok(out)
    }

    /// Largest `|jets(s,t) - jets(s,u) - jets(u,t)|` over points and levels.
    pub fn additivity_defect(&self, s: f64, u: f64, t: f64) -> Result<f64> {
        let find = |a, b| {
            self.window_index(a, b)
                .ok_or_else(|| Error::Precondition(format!("window ({a}, {b}) is not in the field")))
        };
        let (st, su, ut) = (find(s, t)?, find(s, u)?, find(u, t)?);
        let mut worst: f64 = 0.0;
        for l in 0..=self.order {
            for ((a, b), c) in self.jets[st][l].iter().zip(&self.jets[su][l]).zip(&self.jets[ut][l]) {
                worst = worst.max((a - b - c).abs());
            }
        }
        Ok(worst)
    }

    fn header(&self) -> Vec<String> {
        let d = self.dim;
        let mut h: Vec<String> = (1..=d).map(|a| format!("x_{a}")).collect();
        for l in 0..=self.order {
            for c in 0..level_len(d, l) {
                h.push(format!("d{l}_{}", index_label(c, d, l)));
            }
        }
        h
    }

    fn rows(&self, w: usize) -> impl Iterator<Item = Vec<f64>> + '_ {
        (0..self.grid.len()).map(move |p| {
            let mut r = self.grid.space_point(p);
            for l in 0..=self.order {
                let n = level_len(self.dim, l);
                r.extend_from_slice(&self.jets[w][l][p * n..(p + 1) * n]);
            }
            r
        })
    }

    /// CSV of window `w`: columns `x_1..x_d`, then every jet entry; the
    /// entry `d{ℓ}_{c}_{i_1..i_ℓ}` is `∂_{i_1}..∂_{i_ℓ}` of component `c`.
    pub fn write_csv<W: Write>(&self, w: usize, out: W) -> Result<()> {
        write_csv(out, &self.header(), self.rows(w))
    }

    /// Binary column file (version 2) of window `w`; `axis` is the number
    /// of jet levels and `steps` the number of windows.
    pub fn write_binary<W: Write>(&self, w: usize, out: W) -> Result<()> {
        let rows: Vec<Vec<f64>> = self.rows(w).collect();
        let cols = rows.first().map_or(0, Vec::len);
        let columns = (0..cols).map(|c| rows.iter().map(|r| r[c]).collect()).collect();
        ColumnFile {
            version: 2,
            dim: self.dim as u32,
            steps: self.windows.len() as u64,
            axis: Some(self.order as u32 + 1),
            columns,
        }
        .write(out)
    }
}

fn index_label(mut c: usize, d: usize, l: usize) -> String {
    // Flat index is component-major: c = comp * d^ℓ + i_1 d^{ℓ-1} + ... + i_ℓ.
    let mut idx = vec![0; l + 1];
    for slot in idx.iter_mut().rev() {
        *slot = c % d + 1;
        c /= d;
    }
    idx.iter().map(|i| i.to_string()).collect::<Vec<_>>().join("_")
}

/// `T^w_{s,t} b` and its jets up to `order` for every spectrum, via the
/// convolution theorem. Trigonometric and sine atoms need their frequencies
/// on the spectrum grid; polynomial and linear terms are rejected (see
/// [`average_along_path`]).
pub fn average(drift: &SpectralDrift, spectra: &[OccupationSpectrum], order: usize) -> Result<AveragedField> {
    drift.validate()?;
    let first = spectra
        .first()
        .ok_or_else(|| Error::Precondition("need at least one occupation spectrum".into()))?;
    let grid = first.grid;
    for s in spectra {
        grid.check_same(&s.grid)?;
    }
    if grid.dim != drift.dim {
        return Err(Error::GridMismatch(format!(
            "drift dimension {} differs from grid dimension {}",
            drift.dim, grid.dim
        )));
    }
    if drift
        .terms
        .iter()
        .any(|t| matches!(t.symbol, super::Symbol::Linear { .. } | super::Symbol::Polynomial { .. }))
    {
        return Err(Error::Precondition(
            "polynomial and linear drift terms have no grid symbol; use average_along_path".into(),
        ));
    }
    let d = drift.dim;
    let mut field = AveragedField::zeros(grid, spectra.iter().map(|s| s.window).collect(), order, drift.effective_kappa());
    let tail = drift.tail_fraction(grid);
    if tail > TAIL_WARNING {
        field.warnings.push(format!(
            "{:.1}% of the drift's symbol mass lies beyond z_max = {}; the averaged field is a band-limited truncation",
            100.0 * tail,
            grid.z_max
        ));
    }
    let atoms = drift.fourier_atoms();
    let mut atom_index = Vec::with_capacity(atoms.len());
    for (xi, _, _) in &atoms {
        let i = grid.index_of(xi).ok_or_else(|| {
            Error::Precondition(format!("atom frequency {xi:?} is not a point of the frequency grid"))
        })?;
        atom_index.push(i);
    }
    let band = if drift.has_band_limited_terms() {
        Some(drift.band_symbol(grid)?)
    } else {
        None
    };
    let points: Vec<Vec<f64>> = (0..grid.len()).map(|p| grid.space_point(p)).collect();
    let freqs: Vec<Vec<f64>> = grid.points().collect();

    let jets: Vec<Vec<Vec<f64>>> = spectra
        .par_iter()
        .map(|spec| {
            let mut levels: Vec<Vec<f64>> = (0..=order).map(|l| vec![0.0; grid.len() * level_len(d, l)]).collect();
            if spec.length() == 0.0 {
                return levels;
            }
            if let Some(band) = &band {
                let fft = Fourier::new(grid);
                let mut buf = vec![Complex64::new(0.0, 0.0); grid.len()];
                for (l, lvl) in levels.iter_mut().enumerate() {
                    let inner = d.pow(l as u32);
                    let n = level_len(d, l);
                    for (a, sym) in band.iter().enumerate() {
                        for f in 0..inner {
                            let mut axes = vec![0; l];
                            let mut g = f;
                            for slot in axes.iter_mut().rev() {
                                *slot = g % d;
                                g /= d;
                            }
                            for (i, slot) in buf.iter_mut().enumerate() {
                                let mut v = sym[i] * spec.values[i];
                                for &ax in &axes {
                                    v *= Complex64::new(0.0, freqs[i][ax]);
                                }
                                *slot = v;
                            }
                            let space = fft.to_space(&buf);
                            for (p, v) in space.iter().enumerate() {
                                lvl[p * n + a * inner + f] += v.re;
                            }
                        }
                    }
                }
            }
            for ((xi, coef, dir), &i) in atoms.iter().zip(&atom_index) {
                let mu = spec.values[i];
                let mut jet = Jet::zeros(d, order);
                for (p, x) in points.iter().enumerate() {
                    jet.levels.iter_mut().for_each(|v| v.fill(0.0));
                    let arg: f64 = xi.iter().zip(x).map(|(a, b)| a * b).sum();
                    add_atom_levels(coef * mu * Complex64::from_polar(1.0, arg), xi, dir, &mut jet);
                    for (l, lvl) in levels.iter_mut().enumerate() {
                        let n = level_len(d, l);
                        for (o, v) in lvl[p * n..(p + 1) * n].iter_mut().zip(&jet.levels[l]) {
                            *o += v;
                        }
                    }
                }
            }
            levels
        })
        .collect();
    field.jets = jets;
    Ok(field)
}

/// Direct time quadrature `Σ_i ω_i ∇^ℓ b(x + w_{t_i})` on the spatial grid
/// dual to `grid`, for drifts made of atoms and smooth terms only.
pub fn average_along_path(
    drift: &SpectralDrift,
    path: &SamplePath,
    windows: &[(f64, f64)],
    order: usize,
    grid: FrequencyGrid,
    quadrature: Quadrature,
) -> Result<AveragedField> {
    if drift.has_band_limited_terms() {
        return Err(Error::Precondition(
            "band-limited drift terms are averaged through the occupation spectrum; use average".into(),
        ));
    }
    if path.dim != drift.dim || grid.dim != drift.dim {
        return Err(Error::GridMismatch("drift, path and grid dimensions differ".into()));
    }
    let ev = DriftEvaluator::new(drift, None, order)?;
    let d = drift.dim;
    let dt = path.grid.dt();
    let mut idx = Vec::with_capacity(windows.len());
    let mut exact = Vec::with_capacity(windows.len());
    for &(s, t) in windows {
        if t < s {
            return Err(Error::param("t", format!("need s <= t, got s = {s}, t = {t}")));
        }
        let (k, j) = (path.grid.index_of(s)?, path.grid.index_of(t)?);
        idx.push((k, j));
        exact.push((path.grid.time(k), path.grid.time(j)));
    }
    let mut field = AveragedField::zeros(grid, exact, order, drift.effective_kappa());
    let jets: Vec<Vec<Vec<f64>>> = idx
        .par_iter()
        .map(|&(k, j)| -> Result<Vec<Vec<f64>>> {
            let mut levels: Vec<Vec<f64>> = (0..=order).map(|l| vec![0.0; grid.len() * level_len(d, l)]).collect();
            if k == j {
                return Ok(levels);
            }
            let mut jet = ev.zero_jet();
            let mut y = vec![0.0; d];
            for p in 0..grid.len() {
                let x = grid.space_point(p);
                jet.levels.iter_mut().for_each(|v| v.fill(0.0));
                for i in k..=j {
                    let weight = match quadrature {
                        Quadrature::LeftRiemann if i == j => continue,
                        Quadrature::LeftRiemann => dt,
                        Quadrature::Trapezoid if i == k || i == j => 0.5 * dt,
                        Quadrature::Trapezoid => dt,
                    };
                    for ((ya, xa), wa) in y.iter_mut().zip(&x).zip(path.point(i)) {
                        *ya = xa + wa;
                    }
                    ev.add_jet(&y, weight, &mut jet)?;
                }
                for (l, lvl) in levels.iter_mut().enumerate() {
                    let n = level_len(d, l);
                    lvl[p * n..(p + 1) * n].copy_from_slice(&jet.levels[l]);
                }
            }
            Ok(levels)
        })
        .collect::<Result<_>>()?;
    field.jets = jets;
    Ok(field)
}

/// Sup of one jet order together with the window attaining it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderSup {
    pub order: usize,
    pub value: f64,
    pub window: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderNormReport {
    pub gamma: f64,
    pub alpha: f64,
    pub kappa: f64,
    /// `sup |∇^ℓ T_{s,t}(x)| ⟨x⟩^{-κ} / |t-s|^γ` for every stored order.
    pub per_order: Vec<OrderSup>,
    /// Spatial Hölder quotient of order `α - ⌊α⌋` of `∇^{⌊α⌋} T`, when
    /// `α` is fractional and `⌊α⌋` is stored.
    pub fractional: Option<OrderSup>,
    /// Max of the orders `ℓ ≤ α` and the fractional part.
    pub total: f64,
}

/// Weighted `C^γ_t C^α_x` estimate of an averaged field over its
/// non-degenerate windows.
pub fn holder_in_time_norm(field: &AveragedField, gamma: f64, alpha: f64, kappa: f64) -> Result<HolderNormReport> {
    let live: Vec<usize> = (0..field.windows.len())
        .filter(|&w| field.windows[w].1 > field.windows[w].0)
        .collect();
    if live.len() < 3 {
        return Err(Error::Precondition(format!(
            "need at least 3 non-degenerate windows, got {}",
            live.len()
        )));
    }
    if !(alpha >= 0.0) {
        return Err(Error::param("alpha", "must be >= 0"));
    }
    let grid = field.grid;
    let d = field.dim;
    let weights: Vec<f64> = (0..grid.len())
        .map(|p| {
            let x2: f64 = grid.space_point(p).iter().map(|v| v * v).sum();
            (1.0 + x2).powf(-0.5 * kappa)
        })
        .collect();
    let mut per_order = Vec::new();
    for l in 0..=field.order {
        let n = level_len(d, l);
        let mut best = OrderSup { order: l, value: 0.0, window: field.windows[live[0]] };
        for &w in &live {
            let (s, t) = field.windows[w];
            let scale = (t - s).powf(-gamma);
            let jets = &field.jets[w][l];
            for (p, wt) in weights.iter().enumerate() {
                let m = jets[p * n..(p + 1) * n].iter().map(|v| v * v).sum::<f64>().sqrt();
                let v = m * wt * scale;
                if v > best.value {
                    best = OrderSup { order: l, value: v, window: (s, t) };
                }
            }
        }
        per_order.push(best);
    }
    let base = alpha.floor() as usize;
    let frac = alpha - alpha.floor();
    let fractional = if frac > 0.0 && base <= field.order {
        Some(fractional_quotient(field, &live, &weights, base, frac, gamma))
    } else {
        None
    };
    let total = per_order
        .iter()
        .filter(|o| o.order as f64 <= alpha)
        .map(|o| o.value)
        .chain(fractional.iter().map(|f| f.value))
        .fold(0.0, f64::max);
    Ok(HolderNormReport {
        gamma,
        alpha,
        kappa,
        per_order,
        fractional,
        total,
    })
}

/// `sup |∇^ℓ T(x + h e_a) - ∇^ℓ T(x)| / |h|^θ` over dyadic offsets
/// `h = 2^i Δx` along each axis, weighted by the smaller of the two
/// polynomial weights.
fn fractional_quotient(
    field: &AveragedField,
    live: &[usize],
    weights: &[f64],
    l: usize,
    theta: f64,
    gamma: f64,
) -> OrderSup {
    let grid = field.grid;
    let (m, d) = (grid.m, field.dim);
    let n = level_len(d, l);
    let dx = grid.dx();
    let mut best = OrderSup { order: l, value: 0.0, window: field.windows[live[0]] };
    let mut idx = vec![0; d];
    for &w in live {
        let (s, t) = field.windows[w];
        let scale = (t - s).powf(-gamma);
        let jets = &field.jets[w][l];
        for a in 0..d {
            let stride = m.pow((d - 1 - a) as u32);
            let mut step = 1;
            while step <= m / 4 {
                let denom = (step as f64 * dx).powf(theta);
                for p in 0..grid.len() {
                    grid.multi_index(p, &mut idx);
                    if idx[a] + step >= m {
                        continue;
                    }
                    let q = p + step * stride;
                    let diff = jets[p * n..(p + 1) * n]
                        .iter()
                        .zip(&jets[q * n..(q + 1) * n])
                        .map(|(u, v)| (u - v) * (u - v))
                        .sum::<f64>()
                        .sqrt();
                    let v = diff * weights[p].min(weights[q]) * scale / denom;
                    if v > best.value {
                        best = OrderSup { order: l, value: v, window: (s, t) };
                    }
                }
                step *= 2;
            }
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MollifyReport {
    pub scales: Vec<f64>,
    /// `‖T b - T b_ε‖` per scale (total of [`holder_in_time_norm`]).
    pub differences: Vec<f64>,
    /// Differences below this are treated as quadrature noise.
    pub floor: f64,
    pub monotone: bool,
    /// Indices `i` with `differences[i] >= differences[i-1]` above the floor.
    pub flagged: Vec<usize>,
}

/// Distance between `T b` and `T b_ε` for decreasing Gaussian mollifier
/// scales `ε`.
pub fn mollify_convergence(
    drift: &SpectralDrift,
    scales: &[f64],
    spectra: &[OccupationSpectrum],
    order: usize,
    gamma: f64,
    alpha: f64,
    kappa: f64,
) -> Result<MollifyReport> {
    if scales.is_empty() {
        return Err(Error::param("scales", "need at least one mollifier scale"));
    }
    if scales.iter().any(|e| !(*e > 0.0)) || scales.windows(2).any(|p| p[1] >= p[0]) {
        return Err(Error::param("scales", "must be positive and strictly decreasing"));
    }
    let base = average(drift, spectra, order)?;
    let base_norm = holder_in_time_norm(&base, gamma, alpha, kappa)?.total;
    let floor = 1e-10 * base_norm.max(1.0);
    let differences = scales
        .iter()
        .map(|&eps| {
            let other = average(&drift.mollified(eps), spectra, order)?;
            Ok(holder_in_time_norm(&base.difference(&other)?, gamma, alpha, kappa)?.total)
        })
        .collect::<Result<Vec<f64>>>()?;
    let flagged: Vec<usize> = (1..differences.len())
        .filter(|&i| differences[i] >= differences[i - 1] && differences[i] > floor)
        .collect();
    Ok(MollifyReport {
        scales: scales.to_vec(),
        monotone: flagged.is_empty(),
        differences,
        floor,
        flagged,
    })
}

#[cfg(test)]
mod tests {
    use super::super::{DriftTerm, Symbol};
    use super::*;
    use crate::gaussmodels::{sample, GaussianModel};
    use crate::occupation::{local_time, occupation_spectrum};

    fn bm_path(seed: u64) -> SamplePath {
        sample(&GaussianModel::brownian(1, 1.0).unwrap(), 256, seed).unwrap()
    }

    fn spectra(path: &SamplePath, grid: FrequencyGrid, windows: &[(f64, f64)]) -> Vec<OccupationSpectrum> {
        windows
            .iter()
            .map(|&(s, t)| occupation_spectrum(path, s, t, grid, Quadrature::LeftRiemann).unwrap())
            .collect()
    }

    fn bump(width: f64) -> SpectralDrift {
        SpectralDrift::scalar(1, Symbol::GaussianBump { amplitude: 1.0, width, center: vec![] }).unwrap()
    }

    #[test]
    fn gaussian_density_matches_direct_quadrature() {
        let path = bm_path(3);
        let grid = FrequencyGrid::default_for(1);
        let sp = spectra(&path, grid, &[(0.25, 0.75)]);
        let field = average(&bump(0.3), &sp, 0).unwrap();
        let (k, j) = (path.grid.index_of(0.25).unwrap(), path.grid.index_of(0.75).unwrap());
        let dens = |x: f64| (-x * x / 0.18).exp() / (0.3 * (2.0 * std::f64::consts::PI).sqrt());
        let mut worst: f64 = 0.0;
        let peak = field.jets[0][0].iter().copied().fold(0.0, f64::max);
        for p in (0..grid.len()).step_by(7) {
            let x = grid.space_value(p);
            if x.abs() > 2.0 {
                continue;
            }
            let direct: f64 = (k..j).map(|i| dens(x + path.point(i)[0]) * path.grid.dt()).sum();
            worst = worst.max((field.jets[0][0][p] - direct).abs() / peak);
        }
        assert!(worst < 1e-6, "relative error {worst}");
    }

    #[test]
    fn dirac_gives_reflected_local_time() {
        let path = bm_path(5);
        let grid = FrequencyGrid::default_for(1);
        let sp = spectra(&path, grid, &[(0.0, 1.0)]);
        let dirac = SpectralDrift::scalar(1, Symbol::Dirac { amplitude: 1.0, center: vec![] }).unwrap();
        let field = average(&dirac, &sp, 0).unwrap();
        let lt = local_time(&sp[0]);
        let m = grid.m;
        let scale = lt.max_value;
        for p in 0..m {
            let diff = field.jets[0][0][p] - lt.field.values[m - 1 - p];
            assert!(diff.abs() < 1e-10 * scale, "at {p}: {diff}");
        }
        assert!(field.warnings.iter().any(|w| w.contains("beyond z_max")));
    }

    #[test]
    fn constant_averages_to_window_length() {
        let path = bm_path(7);
        let grid = FrequencyGrid::new(8.0, 33, 1).unwrap();
        let one = SpectralDrift::scalar(1, Symbol::Trig { frequency: vec![0.0], cos: 1.0, sin: 0.0 }).unwrap();
        let field = average(&one, &spectra(&path, grid, &[(0.0, 0.5), (0.25, 1.0)]), 2).unwrap();
        for (w, &(s, t)) in field.windows.iter().enumerate() {
            assert!(field.jets[w][0].iter().all(|v| (v - (t - s)).abs() < 1e-14));
            assert!(field.jets[w][1].iter().all(|v| v.abs() < 1e-14));
        }
    }

    #[test]
    fn linear_and_additive() {
        let path = bm_path(11);
        let grid = FrequencyGrid::new(24.0, 129, 1).unwrap();
        let sp = spectra(&path, grid, &[(0.0, 1.0), (0.0, 0.5), (0.5, 1.0)]);
        let b1 = bump(0.4);
        let b2 = SpectralDrift::scalar(1, Symbol::Trig { frequency: vec![1.5], cos: 0.3, sin: -0.7 }).unwrap();
        let combo = SpectralDrift::new(
            1,
            vec![
                DriftTerm { symbol: b1.terms[0].symbol.clone(), direction: vec![2.5] },
                b2.terms[0].clone(),
            ],
        )
        .unwrap();
        let (f1, f2, fc) = (average(&b1, &sp, 2).unwrap(), average(&b2, &sp, 2).unwrap(), average(&combo, &sp, 2).unwrap());
        for w in 0..3 {
            for l in 0..=2 {
                for ((a, b), c) in f1.jets[w][l].iter().zip(&f2.jets[w][l]).zip(&fc.jets[w][l]) {
                    assert!((2.5 * a + b - c).abs() < 1e-12);
                }
            }
        }
        assert!(fc.additivity_defect(0.0, 0.5, 1.0).unwrap() < 1e-10);
    }

    #[test]
    fn jets_are_finite_difference_consistent() {
        let path = bm_path(13);
        let grid = FrequencyGrid::new(16.0, 257, 1).unwrap();
        let sp = spectra(&path, grid, &[(0.0, 1.0)]);
        let field = average(&bump(1.0), &sp, 2).unwrap();
        let h = grid.dx();
        let c = grid.center();
        // Central differences with steps h and 2h; the error ratio gives the order.
        let err = |step: usize| {
            let mut worst: f64 = 0.0;
            for p in c - 20..c + 20 {
                for l in 0..2 {
                    let jl = &field.jets[0][l];
                    let fd = (jl[p + step] - jl[p - step]) / (2.0 * step as f64 * h);
                    worst = worst.max((fd - field.jets[0][l + 1][p]).abs());
                }
            }
            worst
        };
        let order = (err(2) / err(1)).log2();
        assert!(order >= 1.9, "measured order {order}");
    }

    #[test]
    fn along_path_matches_spectral_for_atoms() {
        let path = bm_path(17);
        let grid = FrequencyGrid::new(8.0, 33, 1).unwrap();
        let sine = SpectralDrift::scalar(1, Symbol::Sine { amplitude: 1.3, frequency: vec![1.0], phase: 0.4 }).unwrap();
        let windows = [(0.0, 1.0), (0.25, 0.5)];
        let a = average(&sine, &spectra(&path, grid, &windows), 3).unwrap();
        let b = average_along_path(&sine, &path, &windows, 3, grid, Quadrature::LeftRiemann).unwrap();
        let diff = a.difference(&b).unwrap();
        assert!(diff.jets.iter().flatten().flatten().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn holder_norm_of_constant_is_one() {
        let path = bm_path(19);
        let grid = FrequencyGrid::new(8.0, 33, 1).unwrap();
        let one = SpectralDrift::scalar(1, Symbol::Trig { frequency: vec![0.0], cos: 1.0, sin: 0.0 }).unwrap();
        let field = average(&one, &spectra(&path, grid, &[(0.0, 0.5), (0.5, 0.625), (0.0, 1.0)]), 0).unwrap();
        let r = holder_in_time_norm(&field, 1.0, 0.0, 0.0).unwrap();
        assert!((r.total - 1.0).abs() < 1e-14);
        let two = average(&one, &spectra(&path, grid, &[(0.0, 0.5), (0.0, 1.0)]), 0).unwrap();
        assert!(holder_in_time_norm(&two, 1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn mollified_bump_converges() {
        let path = bm_path(23);
        let grid = FrequencyGrid::new(24.0, 129, 1).unwrap();
        let sp = spectra(&path, grid, &[(0.0, 0.25), (0.25, 0.5), (0.0, 1.0)]);
        let r = mollify_convergence(&bump(0.3), &[0.2, 0.1, 0.05, 0.025], &sp, 0, 0.5, 0.0, 0.0).unwrap();
        assert!(r.monotone, "{r:?}");
        assert!(r.differences[3] < r.differences[0] / 10.0);
    }

    #[test]
    fn rejects_off_grid_atoms_and_polynomials() {
        let path = bm_path(29);
        let grid = FrequencyGrid::new(8.0, 33, 1).unwrap();
        let sp = spectra(&path, grid, &[(0.0, 1.0)]);
        let off = SpectralDrift::scalar(1, Symbol::Trig { frequency: vec![0.3], cos: 1.0, sin: 0.0 }).unwrap();
        assert!(matches!(average(&off, &sp, 0), Err(Error::Precondition(_))));
        let poly = SpectralDrift::scalar(1, Symbol::Polynomial { axis: 0, coefficients: vec![0.0, 1.0] }).unwrap();
        assert!(matches!(average(&poly, &sp, 0), Err(Error::Precondition(_))));
    }
}
