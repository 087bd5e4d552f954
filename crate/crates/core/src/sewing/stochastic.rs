use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussmodels::{GaussianModel, Innovations, Sampler};
use crate::numerics::{linear_fit, CompensatedSum};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StochasticSettings {
    /// Grid steps; a power of two.
    pub steps: usize,
    pub batch: usize,
    pub base_seed: u64,
    /// Triples use windows `h = T/2^j` for `j = min_level..=max_level`.
    pub min_level: u32,
    /// Defaults to `log2(steps) - 1`, the finest window with a grid midpoint.
    pub max_level: Option<u32>,
    /// Left endpoints per window length.
    pub positions: usize,
    /// Moment order of the `L^p(Ω)` norms.
    pub p: f64,
    /// Regularity gain `λ′` in the prefactor `(1 + |z|²)^{-λ′/2}`.
    pub lambda_prime: f64,
}

impl Default for StochasticSettings {
    fn default() -> Self {
        Self {
            steps: 1024,
            batch: 100,
            base_seed: 0,
            min_level: 2,
            max_level: None,
            positions: 8,
            p: 2.0,
            lambda_prime: 1.0,
        }
    }
}

/// Moment estimates at one window length `h = t - s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleMoments {
    pub h: f64,
    /// `max_s ‖E[δ_u A_{s,t} | F_s]‖_{L^p}`.
    pub k1: f64,
    /// `max_s ‖δ_u A_{s,t}‖_{L^p}`.
    pub k2: f64,
}

/// `‖A^P_{0,T} - μ̂_{0,T}(z)‖_{L^p}` for the dyadic partition with mesh `T/2^level`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshRow {
    pub level: u32,
    pub mesh: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub z: Vec<f64>,
    /// Slope of `K₁(h)`; `None` when the conditional expectation vanishes to rounding.
    pub beta_hat: Option<f64>,
    /// Slope of `K₂(h)` against `h`.
    pub kappa_hat: f64,
    #[serde(rename = "K1_est")]
    pub k1_est: f64,
    /// `max_h K₂(h) / h^{κ̂}`.
    #[serde(rename = "K2_est")]
    pub k2_est: f64,
    pub scales: Vec<ScaleMoments>,
    pub mesh_table: Vec<MeshRow>,
    /// Mesh errors decrease across the last three halvings.
    pub mesh_converges: bool,
    /// `κ̂ > 1/2`.
    pub hypothesis_holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SewingCheck {
    pub model: GaussianModel,
    pub settings: StochasticSettings,
    pub reports: Vec<HypothesisReport>,
    /// Slope of `max_z (1+|z|²)^{λ′/2} K₂(z, h)` against `h`.
    pub kappa_envelope: f64,
    /// Slope of `log max_h K₂(z,h)/h^{κ_env}` against `½ log(1+|z|²)`.
    pub prefactor_slope: Option<f64>,
    /// Largest conditional-expectation estimate over all `z` and triples.
    pub tower_max: f64,
    pub jitter: f64,
}

struct Triple {
    level: usize,
    s: usize,
    u: usize,
    t: usize,
}

/// Per-sample quantities, `[triple][z]` and `[level][z]`.
struct SampleStats {
    delta: Vec<Vec<Complex64>>,
    tower: Vec<Vec<Complex64>>,
    mesh: Vec<Vec<Complex64>>,
}

/// Monte Carlo check of the stochastic sewing hypotheses for
/// `A_{s,t} = ∫_s^t E[e^{i⟨z,w_r⟩} | F_s] dr`, one report per `z`.
///
/// The conditional characteristic function is Gaussian,
/// `exp(i⟨z, m_r^s⟩ - ½|z|² σ²_{s,r})`, with mean and variance read off the
/// innovations factor of the grid covariance. Time integrals are left
/// Riemann sums on the grid, matching the occupation spectrum quadrature.
pub fn stochastic_sewing_check(
    model: &GaussianModel,
    zs: &[Vec<f64>],
    settings: &StochasticSettings,
) -> Result<SewingCheck> {
    model.validate()?;
    let n = settings.steps;
    let log_n = n
        .is_power_of_two()
        .then(|| n.trailing_zeros())
        .ok_or_else(|| Error::param("steps", format!("need a power of two, got {n}")))?;
    let max_level = settings.max_level.unwrap_or(log_n.saturating_sub(1));
    if max_level >= log_n || settings.min_level + 1 > max_level {
        return Err(Error::param(
            "max_level",
            format!("need min_level < max_level < log2(steps) = {log_n}"),
        ));
    }
    if settings.batch < 2 || settings.positions == 0 || !(settings.p >= 1.0) {
        return Err(Error::param("batch", "need batch >= 2, positions >= 1 and p >= 1"));
    }
    if zs.is_empty() || zs.iter().any(|z| z.len() != model.dim) {
        return Err(Error::param("z", format!("need frequencies with {} components", model.dim)));
    }
    let innov = Innovations::new(model, n)?;
    let sampler = Sampler::new(model, n)?;
    let grid = innov.grid();
    let dt = grid.dt();
    let rows: Vec<Vec<f64>> = (1..=n).map(|r| innov.factor_row(r)).collect();

    let mut triples = Vec::new();
    for level in settings.min_level..=max_level {
        let len = n >> level;
        let p = settings.positions;
        let mut starts: Vec<usize> = (0..p)
            .map(|i| if p == 1 { 0 } else { ((i * (n - len)) as f64 / (p - 1) as f64).round() as usize })
            .collect();
        starts.dedup();
        for s in starts {
            triples.push(Triple {
                level: (level - settings.min_level) as usize,
                s,
                u: s + len / 2,
                t: s + len,
            });
        }
    }
    // Triples whose second half [u, t) contains r.
    let mut active: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, tr) in triples.iter().enumerate() {
        for slot in &mut active[tr.u..tr.t] {
            slot.push(i);
        }
    }
    let levels = log_n as usize + 1;
    let d = model.dim;
    let nz = zs.len();
    let z2: Vec<f64> = zs.iter().map(|z| z.iter().map(|v| v * v).sum()).collect();

    let per_sample: Vec<SampleStats> = (0..settings.batch)
        .into_par_iter()
        .map(|b| -> Result<SampleStats> {
            let path = sampler.sample(settings.base_seed + b as u64);
            let xi: Vec<Vec<f64>> = (0..d)
                .map(|a| innov.innovations(&(1..=n).map(|i| path.point(i)[a]).collect::<Vec<_>>()))
                .collect::<Result<_>>()?;
            let zero = Complex64::new(0.0, 0.0);
            let mut stats = SampleStats {
                delta: vec![vec![zero; nz]; triples.len()],
                tower: vec![vec![zero; nz]; triples.len()],
                mesh: vec![vec![zero; nz]; levels],
            };
            let mut mu = vec![zero; nz];
            let mut means = vec![vec![0.0; n + 1]; d];
            let mut squares = vec![0.0; n + 1];
            for r in 0..n {
                // Prefix sums over the factor row of w_{t_r}.
                if r > 0 {
                    let row = &rows[r - 1];
                    for a in 0..d {
                        let mut acc = 0.0;
                        for (m, (l, x)) in row.iter().zip(&xi[a]).enumerate() {
                            means[a][m] = acc;
                            acc += l * x;
                        }
                        means[a][r] = acc;
                    }
                    let mut acc = 0.0;
                    for (m, l) in row.iter().enumerate() {
                        squares[m] = acc;
                        acc += l * l;
                    }
                    squares[r] = acc;
                } else {
                    means.iter_mut().for_each(|v| v[0] = 0.0);
                    squares[0] = 0.0;
                }
                let phase = |k: usize, z: &[f64]| -> f64 { (0..d).map(|a| z[a] * means[a][k]).sum() };
                let phi = |k: usize, zi: usize| -> Complex64 {
                    let var = if r == 0 { 0.0 } else { innov.tail(k, r) };
                    Complex64::from_polar((-0.5 * z2[zi] * var).exp(), phase(k, &zs[zi]))
                };
                for (zi, z) in zs.iter().enumerate() {
                    let w: f64 = (0..d).map(|a| z[a] * path.point(r)[a]).sum();
                    mu[zi] += Complex64::from_polar(dt, w);
                }
                for (l, slot) in stats.mesh.iter_mut().enumerate() {
                    let stride = n >> l;
                    let k = r / stride * stride;
                    for (zi, v) in slot.iter_mut().enumerate() {
                        *v += phi(k, zi) * dt;
                    }
                }
                for &ti in &active[r] {
                    let tr = &triples[ti];
                    for zi in 0..nz {
                        let from_s = phi(tr.s, zi);
                        stats.delta[ti][zi] += (from_s - phi(tr.u, zi)) * dt;
                        // E[E[e^{i⟨z,w_r⟩} | F_u] | F_s]: the F_u-mean is Gaussian given F_s
                        // with variance Σ_{s ≤ m < u} L[r, m]².
                        let var = (squares[tr.u] - squares[tr.s]) + innov.tail(tr.u, r);
                        let nested = Complex64::from_polar((-0.5 * z2[zi] * var).exp(), phase(tr.s, &zs[zi]));
                        stats.tower[ti][zi] += (from_s - nested) * dt;
                    }
                }
            }
            for slot in &mut stats.mesh {
                for (v, m) in slot.iter_mut().zip(&mu) {
                    *v -= m;
                }
            }
            Ok(stats)
        })
        .collect::<Result<_>>()?;

    let p = settings.p;
    let lp = |values: &mut dyn Iterator<Item = Complex64>| -> f64 {
        let acc: CompensatedSum = values.map(|v| v.norm().powf(p)).collect();
        (acc.value() / settings.batch as f64).powf(1.0 / p)
    };
    let scale_count = (max_level - settings.min_level + 1) as usize;
    let hs: Vec<f64> = (settings.min_level..=max_level)
        .map(|j| grid.horizon() / (1u64 << j) as f64)
        .collect();
    let mut reports = Vec::with_capacity(nz);
    let mut k2_table = vec![vec![0.0; scale_count]; nz];
    for (zi, z) in zs.iter().enumerate() {
        let mut scales: Vec<ScaleMoments> = hs.iter().map(|&h| ScaleMoments { h, k1: 0.0, k2: 0.0 }).collect();
        for (ti, tr) in triples.iter().enumerate() {
            let k1 = lp(&mut per_sample.iter().map(|s| s.tower[ti][zi]));
            let k2 = lp(&mut per_sample.iter().map(|s| s.delta[ti][zi]));
            let sc = &mut scales[tr.level];
            sc.k1 = sc.k1.max(k1);
            sc.k2 = sc.k2.max(k2);
        }
        let ln_h: Vec<f64> = scales.iter().map(|s| s.h.ln()).collect();
        let ln_k2: Vec<f64> = scales.iter().map(|s| s.k2.max(f64::MIN_POSITIVE).ln()).collect();
        let kappa_hat = linear_fit(&ln_h, &ln_k2).map_or(f64::NAN, |f| f.slope);
        let k2_max = scales.iter().fold(0.0_f64, |m, s| m.max(s.k2));
        let k1_est = scales.iter().fold(0.0_f64, |m, s| m.max(s.k1));
        let beta_hat = if k1_est <= 1e-12 * k2_max.max(f64::MIN_POSITIVE) {
            None
        } else {
            let ln_k1: Vec<f64> = scales.iter().map(|s| s.k1.max(f64::MIN_POSITIVE).ln()).collect();
            linear_fit(&ln_h, &ln_k1).map(|f| f.slope)
        };
        let k2_est = scales.iter().map(|s| s.k2 / s.h.powf(kappa_hat)).fold(0.0, f64::max);
        let mesh_table: Vec<MeshRow> = (0..levels)
            .map(|l| MeshRow {
                level: l as u32,
                mesh: grid.horizon() / (1u64 << l) as f64,
                error: lp(&mut per_sample.iter().map(|s| s.mesh[l][zi])),
            })
            .collect();
        let tail = &mesh_table[mesh_table.len().saturating_sub(4)..];
        let mesh_converges = tail.len() == 4 && tail.windows(2).all(|w| w[1].error < w[0].error);
        for (slot, s) in k2_table[zi].iter_mut().zip(&scales) {
            *slot = s.k2;
        }
        reports.push(HypothesisReport {
            z: z.clone(),
            beta_hat,
            kappa_hat,
            k1_est,
            k2_est,
            scales,
            mesh_table,
            mesh_converges,
            hypothesis_holds: kappa_hat > 0.5,
        });
    }
    let weight = |zi: usize| (1.0 + z2[zi]).powf(0.5 * settings.lambda_prime);
    let ln_h: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
    let envelope: Vec<f64> = (0..scale_count)
        .map(|j| (0..nz).map(|zi| k2_table[zi][j] * weight(zi)).fold(0.0, f64::max).max(f64::MIN_POSITIVE).ln())
        .collect();
    let kappa_envelope = linear_fit(&ln_h, &envelope).map_or(f64::NAN, |f| f.slope);
    let prefactor_slope = if nz >= 2 {
        let x: Vec<f64> = z2.iter().map(|v| 0.5 * (1.0 + v).ln()).collect();
        let y: Vec<f64> = (0..nz)
            .map(|zi| {
                hs.iter()
                    .zip(&k2_table[zi])
                    .map(|(h, k)| k / h.powf(kappa_envelope))
                    .fold(0.0, f64::max)
                    .max(f64::MIN_POSITIVE)
                    .ln()
            })
            .collect();
        linear_fit(&x, &y).map(|f| f.slope)
    } else {
        None
    };
    let tower_max = reports.iter().fold(0.0_f64, |m, r| m.max(r.k1_est));
    Ok(SewingCheck {
        model: model.clone(),
        settings: settings.clone(),
        reports,
        kappa_envelope,
        prefactor_slope,
        tower_max,
        jitter: innov.jitter(),
    })
}
