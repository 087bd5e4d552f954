use serde::{Deserialize, Serialize};

use super::field::NonlinearField;
use crate::error::{Error, Result};
use crate::gaussmodels::SamplePath;
use crate::grid::TimeGrid;
use crate::numerics::linear_fit;
use crate::sewing::{sew, FnGerm};
use crate::tensor::Jet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YoungIntegral {
    pub value: Vec<f64>,
    /// Hölder exponent of the integrand path fitted over dyadic lags.
    pub path_exponent: f64,
    pub rate_estimate: Option<f64>,
    pub level_differences: Vec<f64>,
}

/// Exponent fitted to `log max_i |y_{i+h} - y_i|` against `log(h Δt)` over
/// dyadic lags up to a sixteenth of the window (longer lags see curvature
/// rather than roughness). A constant path reports 1.
pub fn fitted_holder_exponent(values: &[f64], dim: usize, dt: f64) -> f64 {
    let points = values.len() / dim.max(1);
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    let max_lag = ((points - 1) / 16).max(4);
    let mut h = 1;
    while h <= max_lag && h < points {
        let m = (0..points - h)
            .flat_map(|i| (0..dim).map(move |a| (i, a)))
            .map(|(i, a)| (values[(i + h) * dim + a] - values[i * dim + a]).abs())
            .fold(0.0, f64::max);
        if m > 0.0 {
            xs.push((h as f64 * dt).ln());
            ys.push(m.ln());
        }
        h *= 2;
    }
    match linear_fit(&xs, &ys) {
        Some(fit) if xs.len() >= 3 => fit.slope.min(1.0),
        _ => 1.0,
    }
}

/// `∫_s^t Y_{dr}(y_r)` as the sewing of `Ξ_{u,v} = Y_{u,v}(y_u)`.
///
/// `s` and `t` must be grid points with a power-of-two number of steps
/// between them, and `y` must live on the field's grid.
pub fn nonlinear_young_integral<F: NonlinearField + ?Sized>(
    field: &F,
    y: &SamplePath,
    s: f64,
    t: f64,
) -> Result<YoungIntegral> {
    let grid = field.grid();
    let d = field.dim();
    if y.grid != grid || y.dim != d {
        return Err(Error::GridMismatch("integrand path and field use different grids".into()));
    }
    let (ks, kt) = (grid.index_of(s)?, grid.index_of(t)?);
    if kt <= ks || !(kt - ks).is_power_of_two() {
        return Err(Error::param("t", "the window must span a positive power-of-two number of steps"));
    }
    let m = kt - ks;
    let window = &y.values()[ks * d..(kt + 1) * d];
    let exponent = fitted_holder_exponent(window, d, grid.dt());
    if field.gamma() + exponent <= 1.0 {
        return Err(Error::Precondition(format!(
            "integrand exponent {exponent:.3} plus field exponent {} does not exceed 1",
            field.gamma()
        )));
    }
    let local = TimeGrid::new(t - s, m)?;
    let germ = FnGerm::new(d, |u: f64, v: f64, out: &mut [f64]| {
        let a = ks + local.index_of(u)?;
        let b = ks + local.index_of(v)?;
        let mut jet = Jet::zeros(d, 0);
        for i in a..b {
            field.add_step_jet(i, y.point(a), &mut jet)?;
        }
        out.copy_from_slice(&jet.levels[0]);
        Ok(())
    });
    let sewn = sew(&germ, local, m.trailing_zeros())?;
    Ok(YoungIntegral {
        value: sewn.value(m).to_vec(),
        path_exponent: exponent,
        rate_estimate: sewn.rate_estimate,
        level_differences: sewn.level_differences.clone(),
    })
}
