use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::FrequencyGrid;
use crate::tensor::{level_len, Jet};

fn one() -> f64 {
    1.0
}

/// Scalar part of a drift term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Symbol {
    /// `A · N(c, σ² I)` density; symbol `A e^{-σ²|z|²/2} e^{-i⟨z,c⟩}`.
    GaussianBump {
        #[serde(default = "one")]
        amplitude: f64,
        width: f64,
        #[serde(default)]
        center: Vec<f64>,
    },
    /// `A δ_c`; symbol `A e^{-i⟨z,c⟩}`.
    Dirac {
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default)]
        center: Vec<f64>,
    },
    /// `A ∂_k δ`; symbol `A i z_k`.
    DiracDerivative {
        #[serde(default = "one")]
        amplitude: f64,
        axis: usize,
    },
    /// `cos_coef · cos⟨ξ,x⟩ + sin_coef · sin⟨ξ,x⟩`, a pair of Fourier atoms at `±ξ`.
    /// `ξ = 0` with `cos = 1` is the constant 1.
    Trig {
        frequency: Vec<f64>,
        #[serde(default)]
        cos: f64,
        #[serde(default)]
        sin: f64,
    },
    /// Symbol sampled on a frequency grid; must be Hermitian.
    Gridded { grid: FrequencyGrid, re: Vec<f64>, im: Vec<f64> },
    /// `⟨c, x⟩ + offset`.
    Linear {
        coefficients: Vec<f64>,
        #[serde(default)]
        offset: f64,
    },
    /// `Σ_p c_p x_axis^p`.
    Polynomial { axis: usize, coefficients: Vec<f64> },
    /// `A sin(⟨ξ, x⟩ + φ)`.
    Sine {
        #[serde(default = "one")]
        amplitude: f64,
        frequency: Vec<f64>,
        #[serde(default)]
        phase: f64,
    },
}

impl Symbol {
    fn is_band_limited(&self) -> bool {
        matches!(
            self,
            Symbol::GaussianBump { .. } | Symbol::Dirac { .. } | Symbol::DiracDerivative { .. } | Symbol::Gridded { .. }
        )
    }

    /// Closed-form symbol of a band-limited term (gridded symbols excluded).
    fn closed_symbol(&self, z: &[f64]) -> Option<Complex64> {
        let dot = |c: &[f64]| c.iter().zip(z).map(|(a, b)| a * b).sum::<f64>();
        match self {
            Symbol::GaussianBump { amplitude, width, center } => {
                let r2: f64 = z.iter().map(|v| v * v).sum();
                Some(Complex64::from_polar(amplitude * (-0.5 * width * width * r2).exp(), -dot(center)))
            }
            Symbol::Dirac { amplitude, center } => Some(Complex64::from_polar(*amplitude, -dot(center))),
            Symbol::DiracDerivative { amplitude, axis } => Some(Complex64::new(0.0, amplitude * z[*axis])),
            _ => None,
        }
    }
}

/// Declared Besov class `B^α_{p,q}` of a drift (metadata only).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BesovTag {
    pub alpha: f64,
    pub p: f64,
    pub q: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftTerm {
    #[serde(flatten)]
    pub symbol: Symbol,
    /// Output direction `v`; empty means `(1, ..., 1)`.
    #[serde(default)]
    pub direction: Vec<f64>,
}

/// Vector field `b = Σ_terms v · φ`, optionally convolved with a Gaussian
/// of standard deviation `mollifier`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralDrift {
    pub dim: usize,
    pub terms: Vec<DriftTerm>,
    /// Polynomial weight exponent; required for gridded symbols.
    #[serde(default)]
    pub kappa: Option<f64>,
    #[serde(default)]
    pub besov: Option<BesovTag>,
    #[serde(default)]
    pub mollifier: Option<f64>,
}

impl SpectralDrift {
    pub fn new(dim: usize, terms: Vec<DriftTerm>) -> Result<Self> {
        let d = Self {
            dim,
            terms,
            kappa: None,
            besov: None,
            mollifier: None,
        };
        d.validate()?;
        Ok(d)
    }

    /// A single term along `(1, ..., 1)`.
    pub fn scalar(dim: usize, symbol: Symbol) -> Result<Self> {
        Self::new(dim, vec![DriftTerm { symbol, direction: Vec::new() }])
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim;
        if d == 0 {
            return Err(Error::param("drift.dim", "must be >= 1"));
        }
        if self.terms.is_empty() {
            return Err(Error::param("drift.terms", "need at least one term"));
        }
        for (n, t) in self.terms.iter().enumerate() {
            let field = |s: &str| format!("drift.terms[{n}].{s}");
            if !t.direction.is_empty() && t.direction.len() != d {
                return Err(Error::param(field("direction"), format!("expected {d} entries")));
            }
            let check_len = |v: &[f64], name: &str, allow_empty: bool| {
                if (allow_empty && v.is_empty()) || v.len() == d {
                    Ok(())
                } else {
                    Err(Error::param(field(name), format!("expected {d} entries")))
                }
            };
            match &t.symbol {
                Symbol::GaussianBump { width, center, .. } => {
                    if !(*width > 0.0) {
                        return Err(Error::param(field("width"), "must be > 0"));
                    }
                    check_len(center, "center", true)?;
                }
                Symbol::Dirac { center, .. } => check_len(center, "center", true)?,
                Symbol::DiracDerivative { axis, .. } => {
                    if *axis >= d {
                        return Err(Error::param(field("axis"), format!("must be < {d}")));
                    }
                }
                Symbol::Trig { frequency, .. } | Symbol::Sine { frequency, .. } => {
                    check_len(frequency, "frequency", false)?
                }
                Symbol::Gridded { grid, re, im } => {
                    if grid.dim != d || re.len() != grid.len() || im.len() != grid.len() {
                        return Err(Error::GridMismatch(format!(
                            "{}: symbol must have one value per point of a {d}-dimensional grid",
                            field("grid")
                        )));
                    }
                    if self.kappa.is_none() {
                        return Err(Error::param("drift.kappa", "gridded symbols must declare kappa"));
                    }
                    for i in 0..grid.len() {
                        let r = grid.reflect(i);
                        let defect = (re[i] - re[r]).abs() + (im[i] + im[r]).abs();
                        if defect > 1e-12 * (re[i].abs() + im[i].abs()).max(1.0) {
                            return Err(Error::param(field("im"), "symbol is not Hermitian; the drift would be complex"));
                        }
                    }
                }
                Symbol::Linear { coefficients, .. } => check_len(coefficients, "coefficients", false)?,
                Symbol::Polynomial { axis, .. } => {
                    if *axis >= d {
                        return Err(Error::param(field("axis"), format!("must be < {d}")));
                    }
                }
            }
        }
        if let Some(e) = self.mollifier {
            if !(e > 0.0 && e.is_finite()) {
                return Err(Error::param("drift.mollifier", "must be > 0"));
            }
        }
        Ok(())
    }

    /// Convolution with a centred Gaussian of standard deviation `eps`.
    pub fn mollified(&self, eps: f64) -> Self {
        let mut out = self.clone();
        let prev = self.mollifier.unwrap_or(0.0);
        out.mollifier = Some((prev * prev + eps * eps).sqrt());
        out
    }

    /// Declared κ, or 0 for closed-form distributions and the growth degree
    /// of smooth terms.
    pub fn effective_kappa(&self) -> f64 {
        if let Some(k) = self.kappa {
            return k;
        }
        self.terms
            .iter()
            .map(|t| match &t.symbol {
                Symbol::Linear { .. } => 1.0,
                Symbol::Polynomial { coefficients, .. } => coefficients.len().saturating_sub(1) as f64,
                _ => 0.0,
            })
            .fold(0.0, f64::max)
    }

    pub fn has_band_limited_terms(&self) -> bool {
        self.terms.iter().any(|t| t.symbol.is_band_limited())
    }

    pub fn has_smooth_terms(&self) -> bool {
        self.terms
            .iter()
            .any(|t| matches!(t.symbol, Symbol::Linear { .. } | Symbol::Polynomial { .. } | Symbol::Sine { .. }))
    }

    fn mollifier_factor(&self, z: &[f64]) -> f64 {
        match self.mollifier {
            Some(e) => (-0.5 * e * e * z.iter().map(|v| v * v).sum::<f64>()).exp(),
            None => 1.0,
        }
    }

    /// Fraction of the radial symbol mass `∫ |b̂| r^{d-1} dr` of the
    /// closed-form band-limited terms lying in `z_max < r ≤ 4 z_max`.
    pub fn tail_fraction(&self, grid: FrequencyGrid) -> f64 {
        let samples = 4096;
        let top = 4.0 * grid.z_max;
        let (mut inside, mut outside) = (0.0, 0.0);
        for i in 0..samples {
            let r = (i as f64 + 0.5) * top / samples as f64;
            let mut z = vec![0.0; self.dim];
            z[0] = r;
            let mass: f64 = self
                .terms
                .iter()
                .filter_map(|t| t.symbol.closed_symbol(&z))
                .map(|v| v.norm())
                .sum::<f64>()
                * self.mollifier_factor(&z)
                * r.powi(self.dim as i32 - 1);
            if r <= grid.z_max {
                inside += mass;
            } else {
                outside += mass;
            }
        }
        if inside + outside == 0.0 {
            0.0
        } else {
            outside / (inside + outside)
        }
    }

    /// Combined band-limited symbol per output component on `grid`.
    pub(crate) fn band_symbol(&self, grid: FrequencyGrid) -> Result<Vec<Vec<Complex64>>> {
        let d = self.dim;
        let mut out = vec![vec![Complex64::new(0.0, 0.0); grid.len()]; d];
        for t in self.terms.iter().filter(|t| t.symbol.is_band_limited()) {
            let dir = direction(t, d);
            for i in 0..grid.len() {
                let z = grid.point(i);
                let v = match &t.symbol {
                    Symbol::Gridded { grid: g, re, im } => {
                        g.check_same(&grid)?;
                        Complex64::new(re[i], im[i])
                    }
                    s => s.closed_symbol(&z).expect("band-limited"),
                } * self.mollifier_factor(&z);
                for (a, comp) in out.iter_mut().enumerate() {
                    comp[i] += v * dir[a];
                }
            }
        }
        Ok(out)
    }

    /// Trigonometric atoms as `(ξ, coefficient, direction)` with
    /// `φ(x) = Re[coefficient · e^{i⟨ξ,x⟩}]`.
    pub(crate) fn atoms(&self) -> Vec<(Vec<f64>, Complex64, Vec<f64>)> {
        self.terms
            .iter()
            .filter_map(|t| match &t.symbol {
                Symbol::Trig { frequency, cos, sin } => Some((
                    frequency.clone(),
                    Complex64::new(*cos, -*sin) * self.mollifier_factor(frequency),
                    direction(t, self.dim),
                )),
                _ => None,
            })
            .collect()
    }

    /// [`Self::atoms`] plus the sine terms written as atoms:
    /// `A sin(⟨ξ,x⟩ + φ) = Re[-iA e^{iφ} e^{i⟨ξ,x⟩}]`.
    pub(crate) fn fourier_atoms(&self) -> Vec<(Vec<f64>, Complex64, Vec<f64>)> {
        let mut out = self.atoms();
        for t in &self.terms {
            if let Symbol::Sine { amplitude, frequency, phase } = &t.symbol {
                let coef = Complex64::new(0.0, -amplitude) * Complex64::from_polar(1.0, *phase);
                out.push((frequency.clone(), coef * self.mollifier_factor(frequency), direction(t, self.dim)));
            }
        }
        out
    }

    pub(crate) fn smooth_terms(&self) -> Vec<(SmoothFn, Vec<f64>)> {
        let eps = self.mollifier.unwrap_or(0.0);
        self.terms
            .iter()
            .filter_map(|t| {
                let f = match &t.symbol {
                    Symbol::Linear { coefficients, offset } => SmoothFn::Linear {
                        coefficients: coefficients.clone(),
                        offset: *offset,
                    },
                    Symbol::Polynomial { axis, coefficients } => SmoothFn::Polynomial {
                        axis: *axis,
                        coefficients: gaussian_smooth_polynomial(coefficients, eps),
                    },
                    Symbol::Sine { amplitude, frequency, phase } => SmoothFn::Sine {
                        amplitude: amplitude * self.mollifier_factor(frequency),
                        frequency: frequency.clone(),
                        phase: *phase,
                    },
                    _ => return None,
                };
                Some((f, direction(t, self.dim)))
            })
            .collect()
    }
}

fn direction(t: &DriftTerm, d: usize) -> Vec<f64> {
    if t.direction.is_empty() {
        vec![1.0; d]
    } else {
        t.direction.clone()
    }
}

/// Coefficients of `E[p(x + εZ)]` for a standard normal `Z`.
fn gaussian_smooth_polynomial(c: &[f64], eps: f64) -> Vec<f64> {
    if eps == 0.0 {
        return c.to_vec();
    }
    let mut out = vec![0.0; c.len()];
    for (p, &cp) in c.iter().enumerate() {
        // (x + εZ)^p = Σ_k C(p, k) x^{p-k} ε^k Z^k, E[Z^k] = (k-1)!! for even k.
        let mut k = 0;
        while k <= p {
            let moment: f64 = (1..k).step_by(2).map(|v| v as f64).product();
            out[p - k] += cp * binomial(p, k) * eps.powi(k as i32) * moment;
            k += 2;
        }
    }
    out
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Smooth scalar functions evaluated pointwise with exact derivatives.
#[derive(Debug, Clone, PartialEq)]
pub enum SmoothFn {
    Linear { coefficients: Vec<f64>, offset: f64 },
    Polynomial { axis: usize, coefficients: Vec<f64> },
    Sine { amplitude: f64, frequency: Vec<f64>, phase: f64 },
}

impl SmoothFn {
    /// Adds `weight · v ⊗ ∇^ℓ φ(x)` to every level of `out`.
    fn add_jet(&self, x: &[f64], dir: &[f64], weight: f64, out: &mut Jet) {
        let d = out.dim;
        for (l, level) in out.levels.iter_mut().enumerate() {
            let inner = d.pow(l as u32);
            match self {
                SmoothFn::Linear { coefficients, offset } => {
                    let v = match l {
                        0 => vec![coefficients.iter().zip(x).map(|(c, xi)| c * xi).sum::<f64>() + offset],
                        1 => coefficients.clone(),
                        _ => continue,
                    };
                    for a in 0..d {
                        for (i, vi) in v.iter().enumerate() {
                            level[a * inner + i] += weight * dir[a] * vi;
                        }
                    }
                }
                SmoothFn::Polynomial { axis, coefficients } => {
                    // ∂^ℓ along `axis` only: Σ_p c_p p!/(p-ℓ)! x^{p-ℓ}.
                    let xa = x[*axis];
                    let v: f64 = coefficients
                        .iter()
                        .enumerate()
                        .skip(l)
                        .map(|(p, c)| c * falling(p, l) * xa.powi((p - l) as i32))
                        .sum();
                    let flat = (0..l).fold(0, |acc, _| acc * d + axis);
                    for a in 0..d {
                        level[a * inner + flat] += weight * dir[a] * v;
                    }
                }
                SmoothFn::Sine {
                    amplitude,
                    frequency,
                    phase,
                } => {
                    let arg: f64 = frequency.iter().zip(x).map(|(f, xi)| f * xi).sum::<f64>() + phase;
                    let v = amplitude * (arg + l as f64 * PI / 2.0).sin();
                    for flat in 0..inner {
                        let mut f = flat;
                        let mut prod = v;
                        for _ in 0..l {
                            prod *= frequency[f % d];
                            f /= d;
                        }
                        for a in 0..d {
                            level[a * inner + flat] += weight * dir[a] * prod;
                        }
                    }
                }
            }
        }
    }
}

fn falling(p: usize, l: usize) -> f64 {
    (0..l).map(|i| (p - i) as f64).product()
}

/// Pointwise evaluation of `∇^ℓ B(x)`, `ℓ ≤ order`, where `B` is the drift
/// with its band-limited part replaced by the grid sum
/// `(2π)^{-d} Σ_z b̂(z) e^{i⟨z,x⟩} Δz^d`. That sum is periodic with period
/// `2π/Δz`, so points outside `[-π/Δz, π/Δz]^d` are rejected.
#[derive(Debug, Clone)]
pub struct DriftEvaluator {
    dim: usize,
    order: usize,
    grid: Option<FrequencyGrid>,
    /// Band symbol per component, scaled by `Δz^d / (2π)^d`.
    band: Vec<Vec<Complex64>>,
    atoms: Vec<(Vec<f64>, Complex64, Vec<f64>)>,
    smooth: Vec<(SmoothFn, Vec<f64>)>,
}

impl DriftEvaluator {
    pub fn new(drift: &SpectralDrift, grid: Option<FrequencyGrid>, order: usize) -> Result<Self> {
        drift.validate()?;
        let band = if drift.has_band_limited_terms() {
            let g = grid.ok_or_else(|| {
                Error::Precondition("band-limited drift terms need a frequency grid".into())
            })?;
            if g.dim != drift.dim {
                return Err(Error::GridMismatch("drift and frequency grid dimensions differ".into()));
            }
            let scale = g.cell() / (2.0 * PI).powi(drift.dim as i32);
            let mut b = drift.band_symbol(g)?;
            b.iter_mut().flatten().for_each(|v| *v *= scale);
            b
        } else {
            Vec::new()
        };
        Ok(Self {
            dim: drift.dim,
            order,
            grid: if band.is_empty() { None } else { grid },
            band,
            atoms: drift.atoms(),
            smooth: drift.smooth_terms(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Half-width of the box on which the band-limited part is valid.
    pub fn half_width(&self) -> Option<f64> {
        self.grid.map(|g| g.half_period())
    }

    pub fn zero_jet(&self) -> Jet {
        Jet::zeros(self.dim, self.order)
    }

    /// `out += weight · (B(x), ∇B(x), ..., ∇^k B(x))`.
    pub fn add_jet(&self, x: &[f64], weight: f64, out: &mut Jet) -> Result<()> {
        let d = self.dim;
        if let Some(g) = self.grid {
            let h = g.half_period();
            if let Some(&bad) = x.iter().find(|v| !(v.abs() <= h)) {
                return Err(Error::OutOfBox { x: bad, half_width: h });
            }
            self.add_band(g, x, weight, out);
        }
        for (xi, coef, dir) in &self.atoms {
            let arg: f64 = xi.iter().zip(x).map(|(a, b)| a * b).sum();
            let base = coef * Complex64::from_polar(weight, arg);
            add_atom_levels(base, xi, dir, out);
        }
        for (f, dir) in &self.smooth {
            f.add_jet(x, dir, weight, out);
        }
        debug_assert!(out.levels.iter().enumerate().all(|(l, v)| v.len() == level_len(d, l)));
        Ok(())
    }

    fn add_band(&self, g: FrequencyGrid, x: &[f64], weight: f64, out: &mut Jet) {
        let d = self.dim;
        let m = g.m;
        let c = g.center();
        let dz = g.dz();
        // Per-axis phases e^{i z_k x_a}.
        let phases: Vec<Vec<Complex64>> = x
            .iter()
            .map(|&xa| {
                let mut p = vec![Complex64::new(0.0, 0.0); m];
                for (k, slot) in p.iter_mut().enumerate() {
                    *slot = Complex64::from_polar(1.0, (k as f64 - c as f64) * dz * xa);
                }
                p
            })
            .collect();
        let mut idx = vec![0usize; d];
        let mut iz_pow: Vec<Vec<Complex64>> = (0..=self.order).map(|l| vec![Complex64::new(0.0, 0.0); d.pow(l as u32)]).collect();
        let mut acc: Vec<Vec<Complex64>> = (0..=self.order)
            .map(|l| vec![Complex64::new(0.0, 0.0); level_len(d, l)])
            .collect();
        for flat in 0..g.len() {
            g.multi_index(flat, &mut idx);
            let mut phase = Complex64::new(1.0, 0.0);
            for (a, &k) in idx.iter().enumerate() {
                phase *= phases[a][k];
            }
            // (iz)^{⊗ℓ} built level by level.
            iz_pow[0][0] = Complex64::new(1.0, 0.0);
            for l in 1..=self.order {
                let (lo, hi) = iz_pow.split_at_mut(l);
                let prev = &lo[l - 1];
                for (pf, pv) in prev.iter().enumerate() {
                    for (b, &kb) in idx.iter().enumerate() {
                        hi[0][pf * d + b] = pv * Complex64::new(0.0, (kb as f64 - c as f64) * dz);
                    }
                }
            }
            for a in 0..d {
                let v = self.band[a][flat];
                if v == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let base = v * phase;
                for (l, lvl) in acc.iter_mut().enumerate() {
                    let inner = d.pow(l as u32);
                    for (f, p) in iz_pow[l].iter().enumerate() {
                        lvl[a * inner + f] += base * p;
                    }
                }
            }
        }
        for (dst, src) in out.levels.iter_mut().zip(&acc) {
            for (o, v) in dst.iter_mut().zip(src) {
                *o += weight * v.re;
            }
        }
    }
}

/// `out += Re[base · (iξ)^{⊗ℓ}] ⊗ v` for every level.
pub(crate) fn add_atom_levels(base: Complex64, xi: &[f64], dir: &[f64], out: &mut Jet) {
    let d = out.dim;
    for (l, level) in out.levels.iter_mut().enumerate() {
        let inner = d.pow(l as u32);
        for flat in 0..inner {
            let mut f = flat;
            let mut prod = base;
            for _ in 0..l {
                prod *= Complex64::new(0.0, xi[f % d]);
                f /= d;
            }
            for a in 0..d {
                level[a * inner + flat] += dir[a] * prod.re;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine(freq: f64) -> SpectralDrift {
        SpectralDrift::scalar(1, Symbol::Sine { amplitude: 1.0, frequency: vec![freq], phase: 0.0 }).unwrap()
    }

    #[test]
    fn smooth_jets_are_exact_derivatives() {
        let ev = DriftEvaluator::new(&sine(2.0), None, 3).unwrap();
        let mut j = ev.zero_jet();
        ev.add_jet(&[0.3], 1.0, &mut j).unwrap();
        let x: f64 = 0.6;
        assert!((j.levels[0][0] - x.sin()).abs() < 1e-15);
        assert!((j.levels[1][0] - 2.0 * x.cos()).abs() < 1e-15);
        assert!((j.levels[2][0] + 4.0 * x.sin()).abs() < 1e-14);
        assert!((j.levels[3][0] + 8.0 * x.cos()).abs() < 1e-14);
    }

    #[test]
    fn trig_atom_equals_sine_term() {
        let trig = SpectralDrift::scalar(1, Symbol::Trig { frequency: vec![1.5], cos: 0.0, sin: 1.0 }).unwrap();
        let a = DriftEvaluator::new(&trig, None, 2).unwrap();
        let b = DriftEvaluator::new(&sine(1.5), None, 2).unwrap();
        for x in [-1.0, 0.2, 2.7] {
            let (mut ja, mut jb) = (a.zero_jet(), b.zero_jet());
            a.add_jet(&[x], 1.0, &mut ja).unwrap();
            b.add_jet(&[x], 1.0, &mut jb).unwrap();
            for (u, v) in ja.levels.iter().flatten().zip(jb.levels.iter().flatten()) {
                assert!((u - v).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn band_limited_bump_matches_density() {
        let g = FrequencyGrid::new(32.0, 257, 1).unwrap();
        let bump = SpectralDrift::scalar(1, Symbol::GaussianBump { amplitude: 1.0, width: 0.3, center: vec![] }).unwrap();
        let ev = DriftEvaluator::new(&bump, Some(g), 1).unwrap();
        for x in [-0.5, 0.0, 0.41] {
            let mut j = ev.zero_jet();
            ev.add_jet(&[x], 1.0, &mut j).unwrap();
            let dens = (-x * x / 0.18_f64).exp() / (0.3 * (2.0 * PI).sqrt());
            assert!((j.levels[0][0] - dens).abs() < 1e-10);
            assert!((j.levels[1][0] + x / 0.09 * dens).abs() < 1e-9);
        }
        let mut j = ev.zero_jet();
        assert!(matches!(ev.add_jet(&[20.0], 1.0, &mut j), Err(Error::OutOfBox { .. })));
    }

    #[test]
    fn polynomial_mollification_adds_variance() {
        let sq = SpectralDrift::scalar(1, Symbol::Polynomial { axis: 0, coefficients: vec![0.0, 0.0, 1.0] }).unwrap();
        let ev = DriftEvaluator::new(&sq.mollified(0.5), None, 0).unwrap();
        let mut j = ev.zero_jet();
        ev.add_jet(&[2.0], 1.0, &mut j).unwrap();
        assert!((j.levels[0][0] - 4.25).abs() < 1e-14);
    }

    #[test]
    fn tail_fraction_flags_dirac() {
        let g = FrequencyGrid::default_for(1);
        let dirac = SpectralDrift::scalar(1, Symbol::Dirac { amplitude: 1.0, center: vec![] }).unwrap();
        assert!(dirac.tail_fraction(g) > 0.7);
        assert!(dirac.mollified(0.1).tail_fraction(g) < 1e-10);
    }

    #[test]
    fn rejects_non_hermitian_grid_symbol() {
        let g = FrequencyGrid::new(2.0, 5, 1).unwrap();
        let mut d = SpectralDrift::scalar(
            1,
            Symbol::Gridded { grid: g, re: vec![1.0; 5], im: vec![0.0, 0.0, 0.0, 0.0, 1.0] },
        );
        assert!(d.is_err());
        let mut ok = SpectralDrift {
            dim: 1,
            terms: vec![DriftTerm { symbol: Symbol::Gridded { grid: g, re: vec![1.0; 5], im: vec![0.0; 5] }, direction: vec![] }],
            kappa: None,
            besov: None,
            mollifier: None,
        };
        assert!(ok.validate().is_err(), "kappa must be declared");
        ok.kappa = Some(0.0);
        assert!(ok.validate().is_ok());
        d = Ok(ok);
        assert!(d.is_ok());
    }
}
