use serde::{Deserialize, Serialize};

use crate::averaging::{DriftEvaluator, SpectralDrift};
use crate::error::{Error, Result};
use crate::gaussmodels::SamplePath;
use crate::grid::{FrequencyGrid, TimeGrid};
use crate::tensor::Jet;

/// Spatial field `Y_{s,t}(x)` that is additive in time over a grid.
///
/// Only single steps are exposed; windows are sums of steps.
pub trait NonlinearField: Sync {
    fn dim(&self) -> usize;
    fn grid(&self) -> TimeGrid;
    /// Highest available jet level.
    fn order(&self) -> usize;
    /// Declared time-Hölder exponent.
    fn gamma(&self) -> f64;
    /// Declared spatial exponent: `∇Y` is `(δ-1)`-Hölder.
    fn delta(&self) -> f64;
    /// `out += ∇^ℓ Y_{t_i, t_{i+1}}(x)` for `ℓ ≤ out.order()`.
    fn add_step_jet(&self, i: usize, x: &[f64], out: &mut Jet) -> Result<()>;
    /// Whether the drift carries a regularity tag under which explosion is
    /// not expected.
    fn expects_global(&self) -> bool {
        false
    }
}

/// `∇^ℓ Y_{t_k, t_j}(x)` as a sum of steps.
pub fn window_jet<F: NonlinearField + ?Sized>(field: &F, k: usize, j: usize, x: &[f64], order: usize) -> Result<Jet> {
    let mut out = Jet::zeros(field.dim(), order);
    for i in k..j {
        field.add_step_jet(i, x, &mut out)?;
    }
    Ok(out)
}

pub(crate) fn check_exponents(gamma: f64, delta: f64) -> Result<()> {
    if !(gamma > 0.5 && gamma < 1.0) {
        return Err(Error::param("gamma", format!("need 1/2 < gamma < 1, got {gamma}")));
    }
    if !(delta * gamma > 1.0) {
        return Err(Error::param("delta", format!("need delta * gamma > 1, got {}", delta * gamma)));
    }
    Ok(())
}

/// `Y = T^w b` on the time grid of `w`: each step is the trapezoid rule
/// `Y_{t_i,t_{i+1}}(x) = Δt/2 (b(x + w_{t_i}) + b(x + w_{t_{i+1}}))`, with `b`
/// and its jets evaluated pointwise by a [`DriftEvaluator`].
#[derive(Debug, Clone)]
pub struct AveragedDrift {
    pub drift: SpectralDrift,
    pub path: SamplePath,
    evaluator: DriftEvaluator,
    gamma: f64,
    delta: f64,
}

impl AveragedDrift {
    pub fn new(
        drift: &SpectralDrift,
        path: SamplePath,
        grid: Option<FrequencyGrid>,
        order: usize,
        gamma: f64,
        delta: f64,
    ) -> Result<Self> {
        check_exponents(gamma, delta)?;
        if path.dim != drift.dim {
            return Err(Error::GridMismatch(format!(
                "path dimension {} differs from drift dimension {}",
                path.dim, drift.dim
            )));
        }
        Ok(Self {
            drift: drift.clone(),
            evaluator: DriftEvaluator::new(drift, grid, order)?,
            path,
            gamma,
            delta,
        })
    }

    /// Smooth-drift defaults: `γ = 3/4`, `δ = 2` (Lipschitz gradient).
    pub fn smooth(drift: &SpectralDrift, path: SamplePath, order: usize) -> Result<Self> {
        Self::new(drift, path, None, order, 0.75, 2.0)
    }

    pub fn evaluator(&self) -> &DriftEvaluator {
        &self.evaluator
    }
}

impl NonlinearField for AveragedDrift {
    fn dim(&self) -> usize {
        self.path.dim
    }

    fn grid(&self) -> TimeGrid {
        self.path.grid
    }

    fn order(&self) -> usize {
        self.evaluator.order()
    }

    fn gamma(&self) -> f64 {
        self.gamma
    }

    fn delta(&self) -> f64 {
        self.delta
    }

    fn expects_global(&self) -> bool {
        self.drift.besov.is_some()
    }

    fn add_step_jet(&self, i: usize, x: &[f64], out: &mut Jet) -> Result<()> {
        let half = 0.5 * self.path.grid.dt();
        let mut y = vec![0.0; x.len()];
        for r in [i, i + 1] {
            for ((ya, xa), wa) in y.iter_mut().zip(x).zip(self.path.point(r)) {
                *ya = xa + wa;
            }
            self.evaluator.add_jet(&y, half, out)?;
        }
        Ok(())
    }
}

/// `Y - Ỹ` for two fields on the same grid.
pub struct DifferenceField<'a, A: ?Sized, B: ?Sized> {
    pub left: &'a A,
    pub right: &'a B,
}

impl<A: NonlinearField + ?Sized, B: NonlinearField + ?Sized> NonlinearField for DifferenceField<'_, A, B> {
    fn dim(&self) -> usize {
        self.left.dim()
    }

    fn grid(&self) -> TimeGrid {
        self.left.grid()
    }

    fn order(&self) -> usize {
        self.left.order().min(self.right.order())
    }

    fn gamma(&self) -> f64 {
        self.left.gamma().min(self.right.gamma())
    }

    fn delta(&self) -> f64 {
        self.left.delta().min(self.right.delta())
    }

    fn add_step_jet(&self, i: usize, x: &[f64], out: &mut Jet) -> Result<()> {
        let mut tmp = Jet::zeros(out.dim, out.order());
        self.right.add_step_jet(i, x, &mut tmp)?;
        self.left.add_step_jet(i, x, out)?;
        out.axpy(-1.0, &tmp);
        Ok(())
    }
}

/// Measured envelopes on a ball: `G ≥ (|Y_{s,t}(x)| + |∇Y_{s,t}(x)|)/|t-s|^γ`
/// and `F ≥ |∇Y_{s,t}(x) - ∇Y_{s,t}(y)| / (|t-s|^γ |x-y|^{δ-1})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldBounds {
    pub center: Vec<f64>,
    pub radius: f64,
    pub g: f64,
    pub f: f64,
    pub windows: usize,
    pub points: usize,
}

/// Grid maxima of the envelopes over dyadic windows `T/2^j`, `j ≤ 6`
/// (four positions each) and the points `center`, `center ± radius/2 e_a`,
/// `center ± radius e_a`.
pub fn field_bounds<F: NonlinearField + ?Sized>(field: &F, center: &[f64], radius: f64) -> Result<FieldBounds> {
    let d = field.dim();
    if center.len() != d || !(radius > 0.0) {
        return Err(Error::param("radius", "need a positive radius and a center of the field dimension"));
    }
    let grid = field.grid();
    let n = grid.steps();
    let mut points = vec![center.to_vec()];
    for a in 0..d {
        for f in [-1.0, -0.5, 0.5, 1.0] {
            let mut p = center.to_vec();
            p[a] += f * radius;
            points.push(p);
        }
    }
    let (gamma, delta) = (field.gamma(), field.delta());
    let (mut g, mut f) = (0.0_f64, 0.0_f64);
    let mut windows = 0;
    for j in 0..=6u32 {
        let len = n >> j;
        if len == 0 {
            break;
        }
        let positions = (1usize << j).min(4);
        for p in 0..positions {
            let k = if positions == 1 { 0 } else { p * (n - len) / (positions - 1) };
            let h = grid.time(k + len) - grid.time(k);
            windows += 1;
            let jets: Vec<Jet> = points
                .iter()
                .map(|x| window_jet(field, k, k + len, x, 1))
                .collect::<Result<_>>()?;
            for (x, jet) in points.iter().zip(&jets) {
                let size = sup_norm(&jet.levels[0]) + sup_norm(&jet.levels[1]);
                g = g.max(size / h.powf(gamma));
                for (y, other) in points.iter().zip(&jets) {
                    let dist = x.iter().zip(y).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt();
                    if dist > 0.0 {
                        let diff: Vec<f64> = jet.levels[1].iter().zip(&other.levels[1]).map(|(u, v)| u - v).collect();
                        f = f.max(sup_norm(&diff) / (h.powf(gamma) * dist.powf(delta - 1.0)));
                    }
                }
            }
        }
    }
    Ok(FieldBounds {
        center: center.to_vec(),
        radius,
        g,
        f,
        windows,
        points: points.len(),
    })
}

pub(crate) fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}
