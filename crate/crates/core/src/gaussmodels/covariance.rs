use nalgebra::{DMatrix, SymmetricEigen};

use super::{GaussianModel, Kernel, ModelKind};
use crate::error::{Error, Result};
use crate::numerics::integrate;

/// Relative diagonal jitter: `DEFAULT_JITTER · trace / n` is added before
/// every Cholesky factorization.
pub const DEFAULT_JITTER: f64 = 1e-12;

/// Relative tolerance of the kernel quadrature for Volterra covariances.
const KERNEL_QUAD_TOL: f64 = 1e-8;

/// Covariance `Cov(w_{t_i}, w_{t_j})` of one coordinate on a list of times.
#[derive(Debug, Clone)]
pub struct CovarianceMatrix {
    pub times: Vec<f64>,
    pub matrix: DMatrix<f64>,
}

/// Lower Cholesky factor of a jittered covariance matrix.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    pub lower: DMatrix<f64>,
    /// Absolute jitter added to the diagonal.
    pub jitter: f64,
}

pub(crate) fn fbm_cov(hurst: f64, s: f64, t: f64) -> f64 {
    let h2 = 2.0 * hurst;
    0.5 * (s.abs().powf(h2) + t.abs().powf(h2) - (t - s).abs().powf(h2))
}

fn plog_kernel(p: f64, u: f64) -> f64 {
    if u <= 0.0 {
        return 0.0;
    }
    1.0 / (u * (1.0 / u).ln().powf(2.0 * p)).sqrt()
}

/// `Var(w_t^p) = ∫_0^t k(r)^2 dr = (2p-1)^{-1} ln(1/t)^{1-2p}`, which is also
/// the continuous-filtration conditional variance over a lag `t`.
pub fn plog_variance(p: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    (1.0 / t).ln().powf(1.0 - 2.0 * p) / (2.0 * p - 1.0)
}

/// `∫_0^s k(h + u) k(u) du` with the substitution `u = v²`, which removes the
/// `u^{-1/2}` singularity of both kernels at the origin.
fn volterra_cov<K: Fn(f64) -> f64>(k: K, s: f64, h: f64) -> f64 {
    if s <= 0.0 {
        return 0.0;
    }
    let f = |v: f64| {
        let u = v * v;
        2.0 * v * k(u) * k(h + u)
    };
    integrate(f, 0.0, s.sqrt(), KERNEL_QUAD_TOL, 1e-300).0
}

impl GaussianModel {
    /// `Cov(w_s, w_t)` of a single coordinate.
    pub fn covariance(&self, s: f64, t: f64) -> f64 {
        let (lo, hi) = if s <= t { (s, t) } else { (t, s) };
        match &self.kind {
            ModelKind::Fbm { hurst } => fbm_cov(*hurst, lo, hi),
            ModelKind::FbmSeries { lambdas, hursts } => lambdas
                .iter()
                .zip(hursts)
                .map(|(l, h)| l * l * fbm_cov(*h, lo, hi))
                .sum(),
            ModelKind::PLogBm { p } => {
                if lo == hi {
                    plog_variance(*p, lo)
                } else {
                    volterra_cov(|u| plog_kernel(*p, u), lo, hi - lo)
                }
            }
            ModelKind::CustomKernel { kernel } => kernel_cov(kernel, lo, hi),
        }
    }

    /// `Var(w_t - w_s)` of a single coordinate.
    pub fn increment_variance(&self, s: f64, t: f64) -> f64 {
        match &self.kind {
            ModelKind::Fbm { hurst } => (t - s).abs().powf(2.0 * hurst),
            ModelKind::FbmSeries { lambdas, hursts } => lambdas
                .iter()
                .zip(hursts)
                .map(|(l, h)| l * l * (t - s).abs().powf(2.0 * h))
                .sum(),
            _ => self.covariance(t, t) + self.covariance(s, s) - 2.0 * self.covariance(s, t),
        }
    }
}

fn kernel_cov(k: &Kernel, lo: f64, hi: f64) -> f64 {
    let k = *k;
    volterra_cov(move |u| k.eval(u), lo, hi - lo)
}

/// Covariance matrix of one coordinate on `times`.
///
/// Fails with a domain error when a p-log grid reaches `t = 1` and when a
/// time lies outside `[0, T]`.
pub fn covariance_matrix(model: &GaussianModel, times: &[f64]) -> Result<CovarianceMatrix> {
    model.validate()?;
    for &t in times {
        if !(0.0..=model.horizon * (1.0 + 1e-12)).contains(&t) {
            return Err(Error::Domain(format!("time {t} outside [0, {}]", model.horizon)));
        }
        if matches!(model.kind, ModelKind::PLogBm { .. }) && t >= 1.0 {
            return Err(Error::Domain(format!(
                "p-log Brownian motion is undefined at t = {t} >= 1"
            )));
        }
    }
    let n = times.len();
    let mut matrix = DMatrix::zeros(n, n);
    let entries: Vec<(usize, usize, f64)> = {
        use rayon::prelude::*;
        (0..n)
            .into_par_iter()
            .flat_map_iter(|i| (0..=i).map(move |j| (i, j)))
            .map(|(i, j)| (i, j, model.covariance(times[i], times[j])))
            .collect()
    };
    for (i, j, v) in entries {
        matrix[(i, j)] = v;
        matrix[(j, i)] = v;
    }
    Ok(CovarianceMatrix {
        times: times.to_vec(),
        matrix,
    })
}

/// Cholesky factorization after adding `rel_jitter · trace / n` to the diagonal.
///
/// On failure the error carries the smallest eigenvalue of the jittered
/// matrix.
pub fn factorize(matrix: &DMatrix<f64>, rel_jitter: f64) -> Result<CholeskyFactor> {
    let n = matrix.nrows();
    if n == 0 {
        return Ok(CholeskyFactor {
            lower: DMatrix::zeros(0, 0),
            jitter: 0.0,
        });
    }
    let jitter = rel_jitter * matrix.trace() / n as f64;
    let mut m = matrix.clone();
    for i in 0..n {
        m[(i, i)] += jitter;
    }
    match m.clone().cholesky() {
        Some(c) => Ok(CholeskyFactor {
            lower: c.l(),
            jitter,
        }),
        None => {
            let eig = SymmetricEigen::new(m);
            let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
            Err(Error::NotPositiveDefinite {
                min_eigenvalue: min,
                jitter,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brownian_variance_is_time() {
        let m = GaussianModel::brownian(1, 1.0).unwrap();
        assert!((m.covariance(1.0, 1.0) - 1.0).abs() < 1e-15);
        assert!((m.covariance(0.3, 0.7) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn plog_diagonal_matches_closed_form_by_quadrature() {
        // Oracle: ∫_0^t k(r)^2 dr by quadrature in r = t e^{-v}, where
        // k(r)^2 r = ln(1/r)^{-2p} and ln(1/r) = ln(1/t) + v stays representable.
        let p = 2.0_f64;
        for &t in &[0.05_f64, 0.2, 0.45] {
            // r = t e^{-v}, v = x / (1 - x) maps (0, ∞) onto (0, 1).
            let (q, _) = integrate(
                |x: f64| {
                    let v = x / (1.0 - x);
                    ((1.0 / t).ln() + v).powf(-2.0 * p) / (1.0 - x).powi(2)
                },
                0.0,
                1.0,
                1e-12,
                0.0,
            );
            let closed = plog_variance(p, t);
            assert!((q / closed - 1.0).abs() < 1e-8, "t={t}: {q} vs {closed}");
        }
    }

    #[test]
    fn plog_off_diagonal_tends_to_diagonal() {
        let m = GaussianModel::plog(2.0, 1, 0.5).unwrap();
        let v = m.covariance(0.3, 0.3);
        let c = m.covariance(0.3, 0.3 + 1e-9);
        assert!((c / v - 1.0).abs() < 1e-3);
        // Cauchy-Schwarz.
        let c2 = m.covariance(0.1, 0.4);
        assert!(c2 * c2 <= m.covariance(0.1, 0.1) * m.covariance(0.4, 0.4));
    }

    /// Mandelbrot-Van Ness second moment `∫ k_s(u) k_t(u) du` of the kernels
    /// `k_t(u) = (t-u)_+^{H-1/2} - (-u)_+^{H-1/2}`, by quadrature.
    fn mvn_moment(h: f64, s: f64, t: f64) -> f64 {
        let a = h - 0.5;
        let past = |y: f64| {
            let v = y.exp();
            ((t + v).powf(a) - v.powf(a)) * ((s + v).powf(a) - v.powf(a)) * v
        };
        let (p1, _) = integrate(past, -60.0, 60.0, 1e-12, 0.0);
        let lo = s.min(t);
        // lo - u = y^m flattens the (lo - u)^{2a} endpoint singularity.
        let m = 1.0 / (2.0 * a + 1.0);
        let recent = |y: f64| {
            let u = lo - y.powf(m);
            m * y.powf(m - 1.0) * (t - u).powf(a) * (s - u).powf(a)
        };
        let (p2, _) = integrate(recent, 0.0, lo.powf(1.0 / m), 1e-12, 1e-15);
        p1 + p2
    }

    #[test]
    fn series_covariance_matches_kernel_quadrature() {
        let lambdas = [1.0, 0.5];
        let hursts = [0.3, 0.7];
        let m = GaussianModel::fbm_series(lambdas.to_vec(), hursts.to_vec(), 1, 1.0).unwrap();
        for &(s, t) in &[(0.2, 0.9), (0.5, 0.5), (0.35, 0.6)] {
            let oracle: f64 = lambdas
                .iter()
                .zip(&hursts)
                .map(|(l, &h)| l * l * mvn_moment(h, s, t) / mvn_moment(h, 1.0, 1.0))
                .sum();
            let closed = m.covariance(s, t);
            assert!((oracle - closed).abs() < 1e-7, "({s},{t}): {oracle} vs {closed}");
        }
    }

    #[test]
    fn rejects_plog_grid_touching_one() {
        let m = GaussianModel::plog(2.0, 1, 0.9).unwrap();
        assert!(covariance_matrix(&m, &[0.5, 1.0]).is_err());
    }

    #[test]
    fn factorization_reports_negative_eigenvalue() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        match factorize(&m, DEFAULT_JITTER) {
            Err(Error::NotPositiveDefinite { min_eigenvalue, .. }) => {
                assert!((min_eigenvalue + 1.0).abs() < 1e-9)
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
