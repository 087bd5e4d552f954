//! Sewing of two-parameter germs `Ξ_{s,t}` over dyadic partitions, and a
//! Monte Carlo check of the stochastic sewing hypotheses for the germ
//! `A_{s,t} = ∫_s^t E[e^{i⟨z,w_r⟩} | F_s] dr`.

mod stochastic;

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::io::write_csv;
use crate::numerics::{linear_fit, CompensatedSum};

pub use stochastic::{
    stochastic_sewing_check, HypothesisReport, MeshRow, ScaleMoments, SewingCheck, StochasticSettings,
};

/// A germ `Ξ: Δ₂ → R^d` with `Ξ_{s,s} = 0`.
pub trait Germ: Sync {
    fn dim(&self) -> usize;
    fn eval(&self, s: f64, t: f64, out: &mut [f64]) -> Result<()>;
}

/// Germ backed by a closure writing `Ξ_{s,t}` into its output slice.
pub struct FnGerm<F> {
    dim: usize,
    f: F,
}

impl<F> FnGerm<F>
where
    F: Fn(f64, f64, &mut [f64]) -> Result<()> + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F> Germ for FnGerm<F>
where
    F: Fn(f64, f64, &mut [f64]) -> Result<()> + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, s: f64, t: f64, out: &mut [f64]) -> Result<()> {
        (self.f)(s, t, out)
    }
}

/// Scalar germ from an infallible closure.
pub fn scalar_germ<F>(f: F) -> FnGerm<impl Fn(f64, f64, &mut [f64]) -> Result<()> + Sync>
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    FnGerm::new(1, move |s, t, out: &mut [f64]| {
        out[0] = f(s, t);
        Ok(())
    })
}

/// `I(Ξ)` on a time grid together with the dyadic convergence record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SewnPath {
    pub grid: TimeGrid,
    pub dim: usize,
    /// Dyadic depth of the finest partition.
    pub depth: u32,
    values: Vec<f64>,
    /// `‖S_k - S_{k-1}‖_∞` on the level-`(k-1)` points, `k = 1..=depth`.
    pub level_differences: Vec<f64>,
    /// `β̂ = 1 + mean log2(D_k / D_{k+1})` over the last four usable ratios;
    /// `None` when the sums are already exact to rounding.
    pub rate_estimate: Option<f64>,
}

impl SewnPath {
    pub fn value(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `I(Ξ)_{s,t} = I_t - I_s`.
    pub fn increment(&self, s: f64, t: f64) -> Result<Vec<f64>> {
        let (a, b) = (self.grid.index_of(s)?, self.grid.index_of(t)?);
        Ok(self.value(b).iter().zip(self.value(a)).map(|(x, y)| x - y).collect())
    }

    /// `sup |I_{s,t} - Ξ_{s,t}| / |t-s|^β` over dyadic grid pairs.
    pub fn remainder_constant<G: Germ + ?Sized>(&self, germ: &G, beta: f64) -> Result<f64> {
        let mut xi = vec![0.0; self.dim];
        let mut worst: f64 = 0.0;
        for (h, pairs) in dyadic_pairs(self.grid, usize::MAX) {
            for (k, j) in pairs {
                germ.eval(self.grid.time(k), self.grid.time(j), &mut xi)?;
                for a in 0..self.dim {
                    let r = self.value(j)[a] - self.value(k)[a] - xi[a];
                    worst = worst.max(r.abs() / h.powf(beta));
                }
            }
        }
        Ok(worst)
    }

    /// CSV with columns `t, I_1..I_d`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.dim).map(|a| format!("I_{a}")));
        let rows = (0..self.grid.len()).map(|i| {
            let mut r = vec![self.grid.time(i)];
            r.extend_from_slice(self.value(i));
            r
        });
        write_csv(w, &header, rows)
    }
}

fn log2_exact(n: usize) -> Option<u32> {
    n.is_power_of_two().then(|| n.trailing_zeros())
}

/// Sews `germ` over the dyadic partitions of `[0, T]` with `2^k` pieces,
/// `k ≤ depth`, and reads the finest level off on `grid`.
pub fn sew<G: Germ + ?Sized>(germ: &G, grid: TimeGrid, depth: u32) -> Result<SewnPath> {
    let d = germ.dim();
    let base = log2_exact(grid.steps())
        .ok_or_else(|| Error::param("steps", format!("need a power of two, got {}", grid.steps())))?;
    if depth < base {
        return Err(Error::param(
            "depth",
            format!("depth {depth} is coarser than the {} grid steps", grid.steps()),
        ));
    }
    if depth > 26 {
        return Err(Error::param("depth", "at most 26 dyadic levels"));
    }
    let horizon = grid.horizon();
    let mut previous: Option<Vec<f64>> = None;
    let mut differences = Vec::with_capacity(depth as usize);
    let mut scale: f64 = 0.0;
    for k in 0..=depth {
        let pieces = 1usize << k;
        let node = |i: usize| horizon * i as f64 / pieces as f64;
        let chunks: Vec<Vec<f64>> = (0..pieces)
            .into_par_iter()
            .map(|i| {
                let mut out = vec![0.0; d];
                germ.eval(node(i), node(i + 1), &mut out)?;
                Ok(out)
            })
            .collect::<Result<_>>()?;
        // Cumulative sums at the level-k points.
        let mut sums = vec![0.0; (pieces + 1) * d];
        let mut acc: Vec<CompensatedSum> = (0..d).map(|_| CompensatedSum::new()).collect();
        for (i, c) in chunks.iter().enumerate() {
            for a in 0..d {
                if !c[a].is_finite() {
                    return Err(Error::Domain(format!("germ is not finite on [{}, {}]", node(i), node(i + 1))));
                }
                acc[a].add(c[a]);
                sums[(i + 1) * d + a] = acc[a].value();
            }
        }
        scale = sums.iter().fold(scale, |m, v| m.max(v.abs()));
        if let Some(prev) = &previous {
            let diff = (0..=pieces / 2)
                .flat_map(|i| (0..d).map(move |a| (i, a)))
                .map(|(i, a)| (sums[2 * i * d + a] - prev[i * d + a]).abs())
                .fold(0.0, f64::max);
            differences.push(diff);
        }
        previous = Some(sums);
    }
    let finest = previous.expect("at least one level");
    let stride = 1usize << (depth - base);
    let mut values = vec![0.0; grid.len() * d];
    for i in 0..grid.len() {
        values[i * d..(i + 1) * d].copy_from_slice(&finest[i * stride * d..(i * stride + 1) * d]);
    }
    let floor = 64.0 * f64::EPSILON * scale.max(f64::MIN_POSITIVE);
    let rate_estimate = rate_from_differences(&differences, floor);
    let tail = &differences[differences.len().saturating_sub(3)..];
    let stalled = tail.len() == 3 && tail.iter().all(|&v| v > floor) && tail.windows(2).all(|p| p[1] >= p[0]);
    if stalled && rate_estimate.is_none_or(|b| b <= 1.0) {
        return Err(Error::Divergence {
            reason: format!(
                "level differences stopped shrinking (fitted rate {})",
                rate_estimate.map_or("n/a".into(), |b| format!("{b:.3}"))
            ),
            level_differences: differences,
        });
    }
    Ok(SewnPath {
        grid,
        dim: d,
        depth,
        values,
        level_differences: differences,
        rate_estimate,
    })
}

fn rate_from_differences(diffs: &[f64], floor: f64) -> Option<f64> {
    let logs: Vec<f64> = diffs
        .windows(2)
        .filter(|p| p[0] > floor && p[1] > floor)
        .map(|p| (p[0] / p[1]).log2())
        .collect();
    let last = &logs[logs.len().saturating_sub(4)..];
    (!last.is_empty()).then(|| 1.0 + last.iter().sum::<f64>() / last.len() as f64)
}

/// Dyadic grid pairs `(k, k + n/2^j)` grouped by `h = T/2^j`, for every
/// `j ≥ 0` whose half-window is still a whole number of steps. At most
/// `max_positions` evenly spread pairs per scale.
fn dyadic_pairs(grid: TimeGrid, max_positions: usize) -> Vec<(f64, Vec<(usize, usize)>)> {
    let n = grid.steps();
    let mut out = Vec::new();
    let mut parts = 1usize;
    while n % (2 * parts) == 0 {
        let len = n / parts;
        let count = parts.min(max_positions);
        let pairs = (0..count)
            .map(|i| {
                let k = i * parts / count * len;
                (k, k + len)
            })
            .collect();
        out.push((grid.horizon() / parts as f64, pairs));
        parts *= 2;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherenceScale {
    pub h: f64,
    /// `max |Ξ_{s,s+h}|`.
    pub size_sup: f64,
    /// `max |δ_u Ξ_{s,s+h}|` with `u` the midpoint.
    pub defect_sup: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherenceReport {
    pub scales: Vec<CoherenceScale>,
    /// Log-log slope of `size_sup` against `h`.
    pub alpha_hat: f64,
    /// Log-log slope of `defect_sup`; `None` when `δΞ` vanishes to rounding.
    pub beta_hat: Option<f64>,
    /// `sup |Ξ_{s,t}| / |t-s|^{α̂}`.
    pub size_norm: f64,
    /// `sup |δ_u Ξ_{s,t}| / |t-s|^{β̂}`, or the largest defect when `β̂` is undefined.
    pub defect_norm: f64,
}

/// Sup-quotient estimates of `‖Ξ‖_α` and `‖δΞ‖_β` over dyadic triples.
pub fn coherence_norm<G: Germ + ?Sized>(germ: &G, grid: TimeGrid) -> Result<CoherenceReport> {
    if grid.len() < 16 {
        return Err(Error::param("steps", "need a grid with at least 16 points"));
    }
    let d = germ.dim();
    let (mut a, mut b, mut c) = (vec![0.0; d], vec![0.0; d], vec![0.0; d]);
    let sup = |v: &[f64]| v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let mut scales = Vec::new();
    for (h, pairs) in dyadic_pairs(grid, 256) {
        let (mut size, mut defect) = (0.0_f64, 0.0_f64);
        for (k, j) in pairs {
            let u = (k + j) / 2;
            let (s, m, t) = (grid.time(k), grid.time(u), grid.time(j));
            germ.eval(s, t, &mut a)?;
            germ.eval(s, m, &mut b)?;
            germ.eval(m, t, &mut c)?;
            size = size.max(sup(&a));
            let delta: Vec<f64> = (0..d).map(|i| a[i] - b[i] - c[i]).collect();
            defect = defect.max(sup(&delta));
        }
        scales.push(CoherenceScale { h, size_sup: size, defect_sup: defect });
    }
    if scales.len() < 2 {
        return Err(Error::param("steps", "need at least two dyadic scales"));
    }
    let fit = |f: &dyn Fn(&CoherenceScale) -> f64| {
        let pts: Vec<(f64, f64)> = scales
            .iter()
            .filter(|s| f(s) > 0.0)
            .map(|s| (s.h.ln(), f(s).ln()))
            .collect();
        let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
        linear_fit(&x, &y).map(|l| l.slope)
    };
    let alpha_hat = fit(&|s| s.size_sup).unwrap_or(0.0);
    let size_scale = scales.iter().fold(0.0_f64, |m, s| m.max(s.size_sup));
    let floor = 1e-13 * size_scale.max(f64::MIN_POSITIVE);
    let beta_hat = if scales.iter().all(|s| s.defect_sup <= floor) {
        None
    } else {
        fit(&|s| if s.defect_sup > floor { s.defect_sup } else { 0.0 })
    };
    let size_norm = scales
        .iter()
        .map(|s| s.size_sup / s.h.powf(alpha_hat))
        .fold(0.0, f64::max);
    let defect_norm = scales
        .iter()
        .map(|s| match beta_hat {
            Some(b) => s.defect_sup / s.h.powf(b),
            None => s.defect_sup,
        })
        .fold(0.0, f64::max);
    Ok(CoherenceReport {
        scales,
        alpha_hat,
        beta_hat,
        size_norm,
        defect_norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussmodels::{sample, GaussianModel};

    #[test]
    fn left_riemann_germ_integrates_sine() {
        let germ = scalar_germ(|s, t| (5.0 * s).sin() * (t - s));
        let grid = TimeGrid::new(1.0, 16).unwrap();
        let path = sew(&germ, grid, 12).unwrap();
        for i in 0..grid.len() {
            let t = grid.time(i);
            let exact = (1.0 - (5.0 * t).cos()) / 5.0;
            assert!((path.value(i)[0] - exact).abs() < 1e-3, "t = {t}");
        }
        let beta = path.rate_estimate.unwrap();
        assert!((beta - 2.0).abs() < 0.05, "beta {beta}");
    }

    #[test]
    fn square_germ_sews_to_zero() {
        let germ = scalar_germ(|s, t| (t - s).powi(2));
        let path = sew(&germ, TimeGrid::new(1.0, 4).unwrap(), 20).unwrap();
        assert!(path.values().iter().all(|v| v.abs() < 1e-5));
        assert!((path.rate_estimate.unwrap() - 2.0).abs() < 1e-9);
    }

    #[test]
    fn additive_germ_is_exact_and_coherent() {
        let germ = scalar_germ(|s, t| t - s);
        let grid = TimeGrid::new(2.0, 64).unwrap();
        let path = sew(&germ, grid, 8).unwrap();
        assert!(path.rate_estimate.is_none());
        assert!((path.value(64)[0] - 2.0).abs() < 1e-14);
        let r = coherence_norm(&germ, grid).unwrap();
        assert!((r.alpha_hat - 1.0).abs() < 1e-12);
        assert!(r.beta_hat.is_none());
    }

    #[test]
    fn lipschitz_germ_has_defect_exponent_two() {
        let germ = scalar_germ(|s, t| (3.0 * s).cos() * (t - s));
        let grid = TimeGrid::new(1.0, 1024).unwrap();
        let r = coherence_norm(&germ, grid).unwrap();
        let beta = r.beta_hat.unwrap();
        assert!((beta - 2.0).abs() < 0.1, "beta {beta}");
        // δ_u Ξ_{s,t} = (f(s) - f(u))(t - u), so |δ_u Ξ| ≤ ‖f'‖_∞ h²/4.
        assert!(r.defect_norm <= 0.75 + 1e-12);
    }

    #[test]
    fn young_integral_matches_trapezoid() {
        let model = GaussianModel::fbm(0.8, 2, 1.0).unwrap();
        let n = 1 << 14;
        let w = sample(&model, n, 9).unwrap();
        let grid = w.grid;
        let germ = FnGerm::new(1, |s: f64, t: f64, out: &mut [f64]| {
            let (k, j) = (grid.index_of(s)?, grid.index_of(t)?);
            out[0] = w.point(k)[0] * (w.point(j)[1] - w.point(k)[1]);
            Ok(())
        });
        let path = sew(&germ, grid, 14).unwrap();
        let trap: f64 = (0..n)
            .map(|i| 0.5 * (w.point(i)[0] + w.point(i + 1)[0]) * (w.point(i + 1)[1] - w.point(i)[1]))
            .sum();
        assert!((path.value(n)[0] - trap).abs() < 1e-4, "{} vs {trap}", path.value(n)[0]);
    }

    #[test]
    fn incoherent_germ_diverges() {
        // |t-s|^{1/2} sums grow like 2^{k/2}.
        let germ = scalar_germ(|s, t| (t - s).sqrt());
        match sew(&germ, TimeGrid::new(1.0, 2).unwrap(), 10) {
            Err(Error::Divergence { level_differences, .. }) => assert_eq!(level_differences.len(), 10),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn remainder_bound_for_classical_germ() {
        let germ = scalar_germ(|s, t| (2.0 * s).sin() * (t - s));
        let grid = TimeGrid::new(1.0, 64).unwrap();
        let path = sew(&germ, grid, 16).unwrap();
        let c = path.remainder_constant(&germ, 2.0).unwrap();
        let defect = coherence_norm(&germ, grid).unwrap().defect_norm;
        // |I - Ξ| ≤ C ‖δΞ‖_β |t-s|^β with C = (1 - 2^{1-β})^{-1} = 2 for β = 2.
        assert!(c <= 2.0 * defect * 2.0 && c >= defect / 2.0, "c {c}, defect {defect}");
        let inc = path.increment(0.25, 0.75).unwrap()[0];
        assert!((inc - (path.value(48)[0] - path.value(16)[0])).abs() == 0.0);
    }
}
