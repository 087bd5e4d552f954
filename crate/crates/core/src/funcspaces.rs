//! Discrete Littlewood–Paley blocks and weighted Besov norms.
//!
//! The partition is built from `ψ`, equal to 1 on `[0, a]`, 0 on `[c, ∞)`,
//! with the `e^{-1/x}` transition in between:
//! `χ(z) = ψ(|z|)` and `ρ(z) = ψ(|z|/2) - ψ(|z|)`, so `supp ρ ⊂ {a ≤ |z| ≤ 2c}`.
//! The sum `χ + Σ_{j≤J} ρ(2^{-j}·) = ψ(2^{-J-1}|·|)` telescopes, which makes
//! the partition of unity exact up to rounding.

use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::Fourier;
use crate::grid::FrequencyGrid;
use crate::io::write_csv;

/// Real samples on the spatial grid dual to a [`FrequencyGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialField {
    pub grid: FrequencyGrid,
    pub values: Vec<f64>,
}

impl SpatialField {
    pub fn new(grid: FrequencyGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "field has {} samples, grid has {}",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: FrequencyGrid, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..grid.len()).map(|i| f(&grid.space_point(i))).collect();
        Self { grid, values }
    }

    /// `(Σ |f|^p Δx^d)^{1/p}`, or the grid maximum for `p = ∞`.
    pub fn lp_norm(&self, p: f64) -> f64 {
        lp_norm(&self.values, p, self.grid.space_cell())
    }
}

pub(crate) fn lp_norm(values: &[f64], p: f64, cell: f64) -> f64 {
    if p.is_infinite() {
        values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    } else {
        (values.iter().map(|v| v.abs().powf(p)).sum::<f64>() * cell).powf(1.0 / p)
    }
}

/// Support radii of the bump functions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Radii {
    /// `χ = 1` on `|z| ≤ a`.
    pub a: f64,
    /// Outer radius of `supp ρ`; must equal `2c`.
    pub b: f64,
    /// `χ = 0` on `|z| ≥ c`.
    pub c: f64,
}

impl Default for Radii {
    fn default() -> Self {
        Self { a: 0.75, b: 2.0, c: 1.0 }
    }
}

impl Radii {
    pub fn validate(&self) -> Result<()> {
        let Radii { a, b, c } = *self;
        if !(a > 0.0 && a.is_finite() && c.is_finite()) {
            return Err(Error::param("partition.a", "must be finite and > 0"));
        }
        if a >= c {
            return Err(Error::param("partition.c", "need a < c so that χ has a transition zone"));
        }
        if c > 2.0 * a {
            return Err(Error::param(
                "partition.c",
                "need c ≤ 2a: otherwise supp χ meets supp ρ(2^{-1}·) and blocks j, j+2 overlap",
            ));
        }
        if (b - 2.0 * c).abs() > 1e-12 * b.abs() {
            return Err(Error::param(
                "partition.b",
                format!("need b = 2c = {} for χ + Σ ρ_j to telescope to 1", 2.0 * c),
            ));
        }
        Ok(())
    }
}

fn smooth_step(x: f64) -> f64 {
    // 0 for x ≤ 0, 1 for x ≥ 1, C^∞ in between.
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let f = (-1.0 / x).exp();
    let g = (-1.0 / (1.0 - x)).exp();
    f / (f + g)
}

fn psi(r: Radii, x: f64) -> f64 {
    1.0 - smooth_step((x - r.a) / (r.c - r.a))
}

/// Dyadic partition of unity sampled on a frequency grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DyadicPartition {
    pub grid: FrequencyGrid,
    pub radii: Radii,
    pub j_max: i32,
    /// Levels whose outer radius `b·2^j` exceeds `z_max`, so part of the
    /// annulus lies beyond the grid.
    pub truncated_levels: Vec<i32>,
    /// `weights[j + 1]` holds level `j` for `j = -1..=j_max`.
    #[serde(skip)]
    weights: Vec<Vec<f64>>,
}

impl DyadicPartition {
    pub fn levels(&self) -> std::ops::RangeInclusive<i32> {
        -1..=self.j_max
    }

    /// Bump values of level `j` (`-1` is the low-pass `χ`).
    pub fn level(&self, j: i32) -> &[f64] {
        &self.weights[(j + 1) as usize]
    }

    /// `max |1 - χ - Σ_j ρ_j|` over the grid.
    pub fn residual(&self) -> f64 {
        (0..self.grid.len())
            .map(|i| (1.0 - self.weights.iter().map(|w| w[i]).sum::<f64>()).abs())
            .fold(0.0, f64::max)
    }

    /// Largest pointwise product between the low-pass and levels `j ≥ 1`
    /// and between levels at distance ≥ 2; zero for an admissible partition.
    pub fn overlap(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in self.levels() {
            for j in self.levels() {
                let disjoint = if i == -1 { j >= 1 } else { j - i >= 2 };
                if j > i && disjoint {
                    for (x, y) in self.level(i).iter().zip(self.level(j)) {
                        worst = worst.max(x * y);
                    }
                }
            }
        }
        worst
    }

    /// Audit CSV: `z_1..z_d, chi, rho_0..rho_J`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut header: Vec<String> = (1..=self.grid.dim).map(|a| format!("z_{a}")).collect();
        header.push("chi".into());
        header.extend((0..=self.j_max).map(|j| format!("rho_{j}")));
        let rows = (0..self.grid.len()).map(|i| {
            let mut r = self.grid.point(i);
            r.extend(self.weights.iter().map(|w| w[i]));
            r
        });
        write_csv(w, &header, rows)
    }
}

pub fn build_partition(grid: FrequencyGrid, radii: Radii) -> Result<DyadicPartition> {
    radii.validate()?;
    // Smallest J for which ψ(2^{-J-1}|z|) = 1 on the whole grid, corners included.
    let reach = grid.z_max * (grid.dim as f64).sqrt();
    let mut j_max = -1;
    while radii.a * 2f64.powi(j_max + 1) < reach {
        j_max += 1;
    }
    let norms: Vec<f64> = grid
        .points()
        .map(|z| z.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    let mut weights = vec![norms.iter().map(|&r| psi(radii, r)).collect::<Vec<_>>()];
    for j in 0..=j_max {
        let s = 2f64.powi(-j);
        weights.push(
            norms
                .iter()
                .map(|&r| (psi(radii, r * s / 2.0) - psi(radii, r * s)).max(0.0))
                .collect(),
        );
    }
    let truncated_levels = (0..=j_max).filter(|&j| radii.b * 2f64.powi(j) > grid.z_max).collect();
    Ok(DyadicPartition {
        grid,
        radii,
        j_max,
        truncated_levels,
        weights,
    })
}

/// All Littlewood–Paley blocks of a field, level `-1` first.
pub fn lp_blocks(field: &SpatialField, partition: &DyadicPartition) -> Result<Vec<Vec<f64>>> {
    field.grid.check_same(&partition.grid)?;
    let fourier = Fourier::new(field.grid);
    let spectrum = fourier.to_frequency(&to_complex(&field.values));
    Ok(partition
        .levels()
        .map(|j| {
            let masked: Vec<Complex64> = spectrum.iter().zip(partition.level(j)).map(|(s, w)| s * w).collect();
            fourier.to_space(&masked).iter().map(|v| v.re).collect()
        })
        .collect())
}

/// `Δ_j f = F^{-1}(ρ_j F f)`.
pub fn lp_block(field: &SpatialField, partition: &DyadicPartition, j: i32) -> Result<Vec<f64>> {
    field.grid.check_same(&partition.grid)?;
    if !partition.levels().contains(&j) {
        return Err(Error::param("j", format!("level must lie in -1..={}", partition.j_max)));
    }
    let fourier = Fourier::new(field.grid);
    let spectrum = fourier.to_frequency(&to_complex(&field.values));
    let masked: Vec<Complex64> = spectrum.iter().zip(partition.level(j)).map(|(s, w)| s * w).collect();
    Ok(fourier.to_space(&masked).iter().map(|v| v.re).collect())
}

fn to_complex(v: &[f64]) -> Vec<Complex64> {
    v.iter().map(|&x| Complex64::new(x, 0.0)).collect()
}

/// Per-level norms and their `ℓ^q` aggregate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BesovReport {
    pub alpha: f64,
    #[serde(with = "index_serde")]
    pub p: f64,
    #[serde(with = "index_serde")]
    pub q: f64,
    pub kappa: f64,
    /// `(j, ‖⟨x⟩^κ Δ_j f‖_{L^p})` for `j = -1..=J`.
    pub block_norms: Vec<(i32, f64)>,
    pub total: f64,
    pub truncated_levels: Vec<i32>,
}

/// Integrability indices serialize as numbers, with `"inf"` for `∞`.
mod index_serde {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() {
            Repr::Text("inf".into()).serialize(s)
        } else {
            Repr::Num(*v).serialize(s)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) if t == "inf" => Ok(f64::INFINITY),
            Repr::Text(t) => Err(serde::de::Error::custom(format!("bad index `{t}`"))),
        }
    }
}

/// Aggregate `2^{jα}·norms[j]` in `ℓ^q`.
pub fn aggregate(alpha: f64, q: f64, block_norms: &[(i32, f64)]) -> f64 {
    let weighted = block_norms.iter().map(|&(j, n)| 2f64.powf(j as f64 * alpha) * n);
    if q.is_infinite() {
        weighted.fold(0.0, f64::max)
    } else {
        weighted.map(|v| v.powf(q)).sum::<f64>().powf(1.0 / q)
    }
}

/// `‖f‖_{B^α_{p,q}(⟨x⟩^κ)} = ‖(2^{jα} ‖⟨x⟩^κ Δ_j f‖_{L^p})_j‖_{ℓ^q}`.
pub fn besov_norm(
    field: &SpatialField,
    partition: &DyadicPartition,
    alpha: f64,
    p: f64,
    q: f64,
    kappa: f64,
) -> Result<BesovReport> {
    if !(p >= 1.0 && q >= 1.0) {
        return Err(Error::param("p", "integrability indices must lie in [1, ∞]"));
    }
    let blocks = lp_blocks(field, partition)?;
    let weight: Vec<f64> = (0..field.grid.len())
        .map(|i| {
            let x = field.grid.space_point(i);
            (1.0 + x.iter().map(|v| v * v).sum::<f64>()).powf(kappa / 2.0)
        })
        .collect();
    let cell = field.grid.space_cell();
    let block_norms: Vec<(i32, f64)> = partition
        .levels()
        .zip(&blocks)
        .map(|(j, b)| {
            let wb: Vec<f64> = b.iter().zip(&weight).map(|(v, w)| v * w).collect();
            (j, lp_norm(&wb, p, cell))
        })
        .collect();
    Ok(BesovReport {
        alpha,
        p,
        q,
        kappa,
        total: aggregate(alpha, q, &block_norms),
        block_norms,
        truncated_levels: partition.truncated_levels.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> FrequencyGrid {
        FrequencyGrid::new(64.0, 257, 1).unwrap()
    }

    #[test]
    fn partition_of_unity_and_supports() {
        for g in [grid(), FrequencyGrid::new(12.0, 25, 2).unwrap()] {
            let p = build_partition(g, Radii::default()).unwrap();
            assert!(p.residual() < 1e-12);
            assert_eq!(p.overlap(), 0.0);
        }
    }

    #[test]
    fn low_frequencies_belong_to_chi() {
        let g = grid();
        let p = build_partition(g, Radii::default()).unwrap();
        for k in 0..g.m {
            if g.axis_value(k).abs() <= 0.75 {
                assert_eq!(p.level(-1)[k], 1.0);
                assert!((0..=p.j_max).all(|j| p.level(j)[k] == 0.0));
            }
        }
    }

    #[test]
    fn inadmissible_radii_are_named() {
        let g = grid();
        let err = build_partition(g, Radii { a: 0.75, b: 1.5, c: 1.0 }).unwrap_err();
        assert!(err.to_string().contains("partition.b"));
        assert!(build_partition(g, Radii { a: 0.4, b: 2.0, c: 1.0 }).is_err());
        assert!(build_partition(g, Radii { a: 1.0, b: 2.0, c: 1.0 }).is_err());
    }

    #[test]
    fn constant_lives_in_low_pass() {
        let g = grid();
        let p = build_partition(g, Radii::default()).unwrap();
        let f = SpatialField::new(g, vec![2.5; g.len()]).unwrap();
        let blocks = lp_blocks(&f, &p).unwrap();
        assert!(blocks[0].iter().all(|v| (v - 2.5).abs() < 1e-12));
        assert!(blocks[1..].iter().flatten().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn plane_wave_selects_its_band() {
        let g = grid();
        let p = build_partition(g, Radii::default()).unwrap();
        // ρ_j = 1 on 2^j c ≤ |z| ≤ 2^{j+1} a, i.e. [4, 6] for j = 2.
        let z = 5.0;
        let f = SpatialField::from_fn(g, |x| (z * x[0]).cos());
        let blocks = lp_blocks(&f, &p).unwrap();
        let active: Vec<i32> = p
            .levels()
            .zip(&blocks)
            .filter(|(_, b)| b.iter().any(|v| v.abs() > 1e-9))
            .map(|(j, _)| j)
            .collect();
        assert_eq!(active, vec![2]);
        let r = besov_norm(&f, &p, 0.5, f64::INFINITY, f64::INFINITY, 0.0).unwrap();
        assert!((r.total - 2.0).abs() < 1e-9);
    }

    #[test]
    fn report_serializes_infinite_indices() {
        let g = grid();
        let p = build_partition(g, Radii::default()).unwrap();
        let f = SpatialField::from_fn(g, |x| (-x[0] * x[0]).exp());
        let r = besov_norm(&f, &p, 0.3, f64::INFINITY, 2.0, -1.0).unwrap();
        let s = serde_json::to_string(&r).unwrap();
        assert!(s.contains("\"p\":\"inf\""));
        let back: BesovReport = serde_json::from_str(&s).unwrap();
        assert_eq!(back, r);
    }
}
