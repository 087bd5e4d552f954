use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::field::{sup_norm, NonlinearField};
use crate::error::{Error, Result};
use crate::gaussmodels::SamplePath;
use crate::grid::TimeGrid;
use crate::io::ColumnFile;
use crate::tensor::{chain_rule_level, identity, level_len, symmetrize, Jet};

/// Solver settings. `gamma_prime = None` picks the midpoint of the admissible
/// interval `(1-γ, min(γ, 1-(1-γ)/δ))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveConfig {
    pub gamma_prime: Option<f64>,
    /// Relative Picard tolerance: stop once `‖z_new - z‖_∞ ≤ tol (1 + ‖z‖_∞)`.
    pub picard_tol: f64,
    pub max_picard_iters: usize,
    /// Target bound for `Σ_i sup |∇Y_{t_i,t_{i+1}}|` over one subinterval.
    pub step_factor: f64,
    pub explosion_threshold: f64,
    /// Take one explicit step `z + Y(z)` when Picard fails on a single step.
    pub explicit_fallback: bool,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            gamma_prime: None,
            picard_tol: 1e-12,
            max_picard_iters: 200,
            step_factor: 0.5,
            explosion_threshold: 1e6,
            explicit_fallback: true,
        }
    }
}

impl SolveConfig {
    /// Checks the settings against the field exponents and returns `γ'`.
    pub fn resolve(&self, gamma: f64, delta: f64) -> Result<f64> {
        super::field::check_exponents(gamma, delta)?;
        if !(self.picard_tol > 0.0) || self.max_picard_iters == 0 {
            return Err(Error::param("picard_tol", "need a positive tolerance and at least one iteration"));
        }
        if !(self.step_factor > 0.0 && self.step_factor < 1.0) {
            return Err(Error::param("step_factor", "need 0 < step_factor < 1"));
        }
        if !(self.explosion_threshold > 0.0) {
            return Err(Error::param("explosion_threshold", "must be positive"));
        }
        let lo = 1.0 - gamma;
        let hi = gamma.min(1.0 - (1.0 - gamma) / delta);
        let gp = self.gamma_prime.unwrap_or(0.5 * (lo + hi));
        if !(gp > lo && gp < gamma) {
            return Err(Error::param("gamma_prime", format!("need {lo} < gamma_prime < {gamma}, got {gp}")));
        }
        if !(gamma + delta * (1.0 - gp) > 1.0) {
            return Err(Error::param(
                "gamma_prime",
                format!("need gamma + delta (1 - gamma_prime) > 1, got {}", gamma + delta * (1.0 - gp)),
            ));
        }
        Ok(gp)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SolveStatus {
    Complete,
    Exploded { t_star: f64 },
    MaxIterations { t: f64, contraction: f64 },
}

/// One accepted subinterval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionEntry {
    pub t_start: f64,
    pub t_end: f64,
    pub iterations: usize,
    /// Largest ratio of successive Picard differences.
    pub contraction: f64,
    pub explicit: bool,
}

/// Solution jet `(z⁰, z¹, ..., z^k)` on a prefix of the time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowJet {
    pub order: usize,
    pub dim: usize,
    pub grid: TimeGrid,
    pub gamma_prime: f64,
    pub status: SolveStatus,
    pub contraction_log: Vec<ContractionEntry>,
    /// `(t, 1/τ)` per subinterval, `τ` being its length.
    pub tau_inverse_profile: Vec<(f64, f64)>,
    pub symmetry_residual: f64,
    pub warnings: Vec<String>,
    len: usize,
    levels: Vec<Vec<f64>>,
}

/// Serializable summary of a [`FlowJet`] without the trajectories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowSummary {
    pub order: usize,
    pub dim: usize,
    pub horizon: f64,
    pub steps: usize,
    pub points: usize,
    pub status: SolveStatus,
    #[serde(rename = "T_star")]
    pub t_star: Option<f64>,
    pub gamma_prime: f64,
    pub holder_quotient: f64,
    pub contraction_log: Vec<ContractionEntry>,
    pub tau_inverse_profile: Vec<(f64, f64)>,
    pub symmetry_residual: f64,
    pub warnings: Vec<String>,
}

impl FlowJet {
    /// Number of stored time points (`n + 1` unless the solve stopped early).
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// `z^ℓ_{t_i}` as a flat level-`ℓ` tensor.
    pub fn value(&self, level: usize, i: usize) -> &[f64] {
        let l = level_len(self.dim, level);
        &self.levels[level][i * l..(i + 1) * l]
    }

    /// All points of level `ℓ`, time-major.
    pub fn level(&self, level: usize) -> &[f64] {
        &self.levels[level]
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len).map(|i| self.grid.time(i)).collect()
    }

    pub fn t_star(&self) -> Option<f64> {
        match self.status {
            SolveStatus::Exploded { t_star } => Some(t_star),
            _ => None,
        }
    }

    /// Turns a `MaxIterations` status into the corresponding error.
    pub fn check(self) -> Result<Self> {
        match self.status {
            SolveStatus::MaxIterations { contraction, .. } => Err(Error::MaxIterations {
                iterations: self.contraction_log.last().map_or(0, |e| e.iterations),
                contraction,
            }),
            _ => Ok(self),
        }
    }

    /// Measured `γ'`-Hölder quotient of `z⁰`.
    pub fn holder_quotient(&self) -> f64 {
        holder_quotient(&self.levels[0][..self.len * self.dim], self.dim, self.grid, self.gamma_prime)
    }

    pub fn summary(&self) -> FlowSummary {
        FlowSummary {
            order: self.order,
            dim: self.dim,
            horizon: self.grid.horizon(),
            steps: self.grid.steps(),
            points: self.len,
            status: self.status,
            t_star: self.t_star(),
            gamma_prime: self.gamma_prime,
            holder_quotient: self.holder_quotient(),
            contraction_log: self.contraction_log.clone(),
            tau_inverse_profile: self.tau_inverse_profile.clone(),
            symmetry_residual: self.symmetry_residual,
            warnings: self.warnings.clone(),
        }
    }

    /// Binary column file: `t`, then every entry of `z⁰, ..., z^k`.
    pub fn write_binary<W: Write>(&self, w: W) -> Result<()> {
        let mut columns = vec![self.times()];
        for (l, data) in self.levels.iter().enumerate() {
            let ll = level_len(self.dim, l);
            for e in 0..ll {
                columns.push((0..self.len).map(|i| data[i * ll + e]).collect());
            }
        }
        ColumnFile {
            version: 2,
            dim: self.dim as u32,
            steps: self.len.saturating_sub(1) as u64,
            axis: Some(self.order as u32 + 1),
            columns,
        }
        .write(w)
    }
}

/// `sup |z_{i+h} - z_i| / (h Δt)^γ` over dyadic lags `h`.
pub fn holder_quotient(values: &[f64], dim: usize, grid: TimeGrid, gamma: f64) -> f64 {
    let points = values.len() / dim.max(1);
    let mut q: f64 = 0.0;
    let mut h = 1;
    while h < points {
        let scale = (h as f64 * grid.dt()).powf(gamma);
        for i in 0..points - h {
            let inc = (0..dim)
                .map(|a| (values[(i + h) * dim + a] - values[i * dim + a]).abs())
                .fold(0.0, f64::max);
            q = q.max(inc / scale);
        }
        h *= 2;
    }
    q
}

/// Result of Picard iteration on one subinterval.
#[derive(Debug, Clone, PartialEq)]
pub struct PicardOutcome {
    /// Trajectory on `t_start, ..., t_start + steps`, flat.
    pub values: Vec<f64>,
    pub iterations: usize,
    pub contraction: f64,
    pub converged: bool,
}

fn eval_step<F: NonlinearField + ?Sized>(field: &F, i: usize, x: &[f64], out: &mut Jet) -> Result<()> {
    out.levels.iter_mut().for_each(|l| l.fill(0.0));
    field.add_step_jet(i, x, out)
}

/// Picard iteration of `Γ(z)_{j+1} = Γ(z)_j + ½(Y_j(z_j) + Y_j(z_{j+1}))`,
/// `Γ(z)_start = x`, on grid steps `start..start + steps`. The initial guess
/// defaults to the constant path `x`.
pub fn picard_subinterval<F: NonlinearField + ?Sized>(
    field: &F,
    start: usize,
    steps: usize,
    x: &[f64],
    guess: Option<&[f64]>,
    config: &SolveConfig,
) -> Result<PicardOutcome> {
    let d = field.dim();
    let len = (steps + 1) * d;
    let mut z: Vec<f64> = match guess {
        Some(g) if g.len() == len => g.to_vec(),
        Some(_) => return Err(Error::param("guess", "initial guess has the wrong length")),
        None => x.iter().copied().cycle().take(len).collect(),
    };
    let mut new = vec![0.0; len];
    let mut jet = Jet::zeros(d, 0);
    let mut incr = vec![0.0; d];
    let mut prev_diff = f64::INFINITY;
    let mut contraction: f64 = 0.0;
    for iteration in 1..=config.max_picard_iters {
        new[..d].copy_from_slice(x);
        for j in 0..steps {
            let i = start + j;
            eval_step(field, i, &z[j * d..(j + 1) * d], &mut jet)?;
            incr.copy_from_slice(&jet.levels[0]);
            eval_step(field, i, &z[(j + 1) * d..(j + 2) * d], &mut jet)?;
            for a in 0..d {
                new[(j + 1) * d + a] = new[j * d + a] + 0.5 * (incr[a] + jet.levels[0][a]);
            }
        }
        if new.iter().any(|v| !v.is_finite()) {
            return Ok(PicardOutcome { values: new, iterations: iteration, contraction, converged: false });
        }
        let diff = new.iter().zip(&z).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let scale = 1.0 + sup_norm(&new);
        if prev_diff.is_finite() && prev_diff > 1e3 * config.picard_tol * scale {
            contraction = contraction.max(diff / prev_diff);
        }
        std::mem::swap(&mut z, &mut new);
        if diff <= config.picard_tol * scale {
            return Ok(PicardOutcome { values: z, iterations: iteration, contraction, converged: contraction < 0.9 });
        }
        prev_diff = diff;
    }
    Ok(PicardOutcome { values: z, iterations: config.max_picard_iters, contraction, converged: false })
}

/// Subinterval length from the measured gradient envelope on `B(x, max(|x|,1))`.
fn subinterval_steps<F: NonlinearField + ?Sized>(field: &F, start: usize, x: &[f64], factor: f64) -> Result<usize> {
    let d = field.dim();
    let n = field.grid().steps();
    let r = sup_norm(x).max(1.0);
    let mut points = vec![x.to_vec()];
    for a in 0..d {
        for sign in [-1.0, 1.0] {
            let mut p = x.to_vec();
            p[a] += sign * r;
            points.push(p);
        }
    }
    let mut jet = Jet::zeros(d, 1);
    let mut total = 0.0;
    let mut steps = 0;
    for i in start..n {
        let mut g: f64 = 0.0;
        for p in &points {
            match eval_step(field, i, p, &mut jet) {
                Ok(()) => g = g.max(sup_norm(&jet.levels[1])),
                Err(Error::OutOfBox { .. }) => {}
                Err(e) => return Err(e),
            }
        }
        if total + g > factor && steps > 0 {
            break;
        }
        total += g;
        steps += 1;
    }
    Ok(steps.max(1))
}

struct Level0 {
    values: Vec<f64>,
    explicit: Vec<bool>,
    status: SolveStatus,
    log: Vec<ContractionEntry>,
    tau: Vec<(f64, f64)>,
}

fn solve_level0<F: NonlinearField + ?Sized>(field: &F, x: &[f64], config: &SolveConfig) -> Result<Level0> {
    let d = field.dim();
    let grid = field.grid();
    let n = grid.steps();
    let mut values = Vec::with_capacity((n + 1) * d);
    values.extend_from_slice(x);
    let mut explicit = Vec::with_capacity(n);
    let mut log = Vec::new();
    let mut tau = Vec::new();
    let mut a = 0;
    let mut status = SolveStatus::Complete;
    while a < n {
        let za = values[a * d..(a + 1) * d].to_vec();
        let mut steps = subinterval_steps(field, a, &za, config.step_factor)?;
        let (traj, entry_iters, contraction, is_explicit) = loop {
            let outcome = match picard_subinterval(field, a, steps, &za, None, config) {
                Ok(o) => Some(o),
                Err(Error::OutOfBox { .. }) if steps > 1 => None,
                Err(e) => return Err(e),
            };
            match outcome {
                Some(o) if o.converged => break (o.values, o.iterations, o.contraction, false),
                Some(o) if steps == 1 => {
                    if !config.explicit_fallback {
                        status = SolveStatus::MaxIterations { t: grid.time(a), contraction: o.contraction };
                        log.push(ContractionEntry {
                            t_start: grid.time(a),
                            t_end: grid.time(a + 1),
                            iterations: o.iterations,
                            contraction: o.contraction,
                            explicit: false,
                        });
                        break (Vec::new(), 0, 0.0, false);
                    }
                    let mut jet = Jet::zeros(d, 0);
                    eval_step(field, a, &za, &mut jet)?;
                    let mut t = za.clone();
                    t.extend(za.iter().zip(&jet.levels[0]).map(|(z, y)| z + y));
                    break (t, 1, o.contraction, true);
                }
                _ => steps = (steps / 2).max(1),
            }
        };
        if traj.is_empty() {
            break;
        }
        log.push(ContractionEntry {
            t_start: grid.time(a),
            t_end: grid.time(a + steps),
            iterations: entry_iters,
            contraction,
            explicit: is_explicit,
        });
        tau.push((grid.time(a), 1.0 / (grid.time(a + steps) - grid.time(a))));
        let mut exploded = None;
        for j in 1..=steps {
            let p = &traj[j * d..(j + 1) * d];
            values.extend_from_slice(p);
            explicit.push(is_explicit);
            if !(sup_norm(p) <= config.explosion_threshold) {
                exploded = Some(a + j);
                break;
            }
        }
        if let Some(k) = exploded {
            status = SolveStatus::Exploded { t_star: grid.time(k) };
            break;
        }
        a += steps;
    }
    Ok(Level0 { values, explicit, status, log, tau })
}

fn explosion_warning<F: NonlinearField + ?Sized>(field: &F, status: SolveStatus) -> Vec<String> {
    match status {
        SolveStatus::Exploded { t_star } if field.expects_global() => vec![format!(
            "explosion at t = {t_star} for a drift with a regularity tag that predicts global existence; the frequency or time grid is likely under-resolved"
        )],
        _ => Vec::new(),
    }
}

/// Solve `z_t = x + ∫_0^t Y_{dr}(z_r)` by Picard continuation.
///
/// A `MaxIterations` outcome is returned in-band; see [`FlowJet::check`].
pub fn solve<F: NonlinearField + ?Sized>(field: &F, x: &[f64], config: &SolveConfig) -> Result<FlowJet> {
    solve_flow(field, x, 0, config)
}

/// Solve the lower-triangular system for `(z⁰, ∇z, ..., ∇^k z)`.
///
/// Level 0 is computed exactly as in [`solve`]. Level `ℓ ≥ 1` is affine in
/// `z^ℓ`, so each trapezoid step is a linear solve with `(I - ½∇Y)`.
pub fn solve_flow<F: NonlinearField + ?Sized>(field: &F, x: &[f64], k: usize, config: &SolveConfig) -> Result<FlowJet> {
    let d = field.dim();
    if x.len() != d {
        return Err(Error::param("x", format!("expected {d} components, got {}", x.len())));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::param("x", "initial condition must be finite"));
    }
    let need = (k + 1).max(1);
    if field.order() < need {
        return Err(Error::Precondition(format!(
            "flow order {k} needs field jets to order {need}, the field provides {}",
            field.order()
        )));
    }
    let gamma_prime = config.resolve(field.gamma(), field.delta())?;
    let grid = field.grid();
    let level0 = solve_level0(field, x, config)?;
    let len = level0.values.len() / d;
    let mut levels = vec![level0.values];
    let mut residual: f64 = 0.0;
    if k >= 1 {
        for l in 1..=k {
            let mut data = vec![0.0; len * level_len(d, l)];
            if l == 1 {
                data[..d * d].copy_from_slice(&identity(d));
            }
            levels.push(data);
        }
        let mut jm = Jet::zeros(d, k);
        let mut jp = Jet::zeros(d, k);
        for i in 0..len - 1 {
            let explicit = level0.explicit[i];
            eval_step(field, i, &levels[0][i * d..(i + 1) * d], &mut jm)?;
            if !explicit {
                eval_step(field, i, &levels[0][(i + 1) * d..(i + 2) * d], &mut jp)?;
            }
            let am = DMatrix::from_row_slice(d, d, &jm.levels[1]);
            let lu = if explicit {
                None
            } else {
                let ap = DMatrix::from_row_slice(d, d, &jp.levels[1]);
                Some((DMatrix::identity(d, d) - ap * 0.5).lu())
            };
            for l in 1..=k {
                let cols = d.pow(l as u32);
                let ll = d * cols;
                let rm = forcing(&jm, &levels, i, l, d);
                let cur = DMatrix::from_row_slice(d, cols, &levels[l][i * ll..(i + 1) * ll]);
                let next = match &lu {
                    None => &cur + &am * &cur + DMatrix::from_row_slice(d, cols, &rm),
                    Some(lu) => {
                        let rp = forcing(&jp, &levels, i + 1, l, d);
                        let f: Vec<f64> = rm.iter().zip(&rp).map(|(a, b)| 0.5 * (a + b)).collect();
                        let rhs = &cur + (&am * &cur) * 0.5 + DMatrix::from_row_slice(d, cols, &f);
                        lu.solve(&rhs).ok_or_else(|| {
                            Error::Domain(format!("singular implicit step for the level-{l} flow at t = {}", grid.time(i)))
                        })?
                    }
                };
                let mut flat: Vec<f64> = Vec::with_capacity(ll);
                for a in 0..d {
                    flat.extend(next.row(a).iter());
                }
                residual = residual.max(symmetrize(&mut flat, d, l));
                levels[l][(i + 1) * ll..(i + 2) * ll].copy_from_slice(&flat);
            }
        }
    }
    let warnings = explosion_warning(field, level0.status);
    Ok(FlowJet {
        order: k,
        dim: d,
        grid,
        gamma_prime,
        status: level0.status,
        contraction_log: level0.log,
        tau_inverse_profile: level0.tau,
        symmetry_residual: residual,
        warnings,
        len,
        levels,
    })
}

/// Chain-rule terms of level `ℓ` at time index `i`, with `z^ℓ` set to zero.
fn forcing(jet: &Jet, levels: &[Vec<f64>], i: usize, l: usize, d: usize) -> Vec<f64> {
    if l == 1 {
        return vec![0.0; d * d];
    }
    let zero = vec![0.0; level_len(d, l)];
    let z: Vec<&[f64]> = (1..=l)
        .map(|j| {
            if j == l {
                &zero[..]
            } else {
                let ll = level_len(d, j);
                &levels[j][i * ll..(i + 1) * ll]
            }
        })
        .collect();
    chain_rule_level(jet, &z, l)
}

/// `ỹ = z⁰ + w` on the solved part of the grid.
pub fn reconstruct_solution(jet: &FlowJet, w: &SamplePath) -> Result<SamplePath> {
    if w.grid != jet.grid || w.dim != jet.dim {
        return Err(Error::GridMismatch(format!(
            "flow jet on {} steps over [0, {}] in dimension {} does not match the path on {} steps over [0, {}] in dimension {}",
            jet.grid.steps(),
            jet.grid.horizon(),
            jet.dim,
            w.grid.steps(),
            w.grid.horizon(),
            w.dim
        )));
    }
    let n = jet.len * jet.dim;
    let values: Vec<f64> = jet.levels[0][..n].iter().zip(w.values()).map(|(z, w)| z + w).collect();
    let grid = if jet.len == jet.grid.len() {
        jet.grid
    } else {
        TimeGrid::new(jet.grid.time(jet.len - 1), jet.len - 1)?
    };
    SamplePath::from_values(grid, jet.dim, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::averaging::{DriftTerm, SpectralDrift, Symbol};
    use crate::gaussmodels::{sample, GaussianModel};
    use crate::yode::AveragedDrift;

    fn linear(rows: &[[f64; 2]]) -> SpectralDrift {
        let terms = rows
            .iter()
            .enumerate()
            .map(|(a, r)| {
                let mut dir = vec![0.0; rows.len()];
                dir[a] = 1.0;
                DriftTerm {
                    symbol: Symbol::Linear { coefficients: r[..rows.len()].to_vec(), offset: 0.0 },
                    direction: dir,
                }
            })
            .collect();
        SpectralDrift::new(rows.len(), terms).unwrap()
    }

    fn sine() -> SpectralDrift {
        SpectralDrift::scalar(1, Symbol::Sine { amplitude: 1.0, frequency: vec![1.0], phase: 0.0 }).unwrap()
    }

    fn brownian_field(n: usize, seed: u64, order: usize) -> AveragedDrift {
        let w = sample(&GaussianModel::brownian(1, 1.0).unwrap(), n, seed).unwrap();
        AveragedDrift::smooth(&sine(), w, order).unwrap()
    }

    #[test]
    fn linear_decay_without_noise() {
        let grid = TimeGrid::new(1.0, 4096).unwrap();
        let field = AveragedDrift::smooth(&linear(&[[-1.0, 0.0]]), SamplePath::zero(grid, 1), 1).unwrap();
        let jet = solve(&field, &[1.5], &SolveConfig::default()).unwrap();
        assert_eq!(jet.status, SolveStatus::Complete);
        assert_eq!(jet.len(), 4097);
        let err = (0..jet.len())
            .map(|i| (jet.value(0, i)[0] - 1.5 * (-grid.time(i)).exp()).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-5, "{err}");
        assert!(jet.contraction_log.iter().all(|e| e.contraction < 0.9 && !e.explicit));
    }

    #[test]
    fn quadratic_blows_up_near_one() {
        let grid = TimeGrid::new(2.0, 4096).unwrap();
        let drift = SpectralDrift::scalar(1, Symbol::Polynomial { axis: 0, coefficients: vec![0.0, 0.0, 1.0] }).unwrap();
        let field = AveragedDrift::smooth(&drift, SamplePath::zero(grid, 1), 1).unwrap();
        let config = SolveConfig { explosion_threshold: 1e3, ..SolveConfig::default() };
        let jet = solve(&field, &[1.0], &config).unwrap();
        let t_star = jet.t_star().expect("explosion");
        assert!((0.9..=1.1).contains(&t_star), "{t_star}");
        assert!(jet.value(0, jet.len() - 1)[0] > 1e3);
        assert!(jet.value(0, jet.len() - 2)[0] <= 1e3);
        // 1/τ grows as the solution does.
        let first = jet.tau_inverse_profile[0].1;
        let last = jet.tau_inverse_profile.last().unwrap().1;
        assert!(last > 10.0 * first);
    }

    #[test]
    fn failed_single_step_without_fallback_is_reported() {
        let grid = TimeGrid::new(2.0, 4096).unwrap();
        let drift = SpectralDrift::scalar(1, Symbol::Polynomial { axis: 0, coefficients: vec![0.0, 0.0, 1.0] }).unwrap();
        let field = AveragedDrift::smooth(&drift, SamplePath::zero(grid, 1), 1).unwrap();
        let config = SolveConfig { explicit_fallback: false, ..SolveConfig::default() };
        let jet = solve(&field, &[1.0], &config).unwrap();
        assert!(matches!(jet.status, SolveStatus::MaxIterations { .. }), "{:?}", jet.status);
        assert!(matches!(jet.check(), Err(Error::MaxIterations { .. })));
    }

    #[test]
    fn rotation_flow_matches_matrix_exponential() {
        let grid = TimeGrid::new(1.0, 4096).unwrap();
        let field = AveragedDrift::smooth(&linear(&[[-1.0, 2.0], [-2.0, -1.0]]), SamplePath::zero(grid, 2), 2).unwrap();
        let jet = solve_flow(&field, &[0.5, -0.25], 1, &SolveConfig::default()).unwrap();
        let mut err: f64 = 0.0;
        for i in 0..jet.len() {
            let t = grid.time(i);
            let (c, s, e) = ((2.0 * t).cos(), (2.0 * t).sin(), (-t).exp());
            let exact = [e * c, e * s, -e * s, e * c];
            for (a, b) in jet.value(1, i).iter().zip(exact) {
                err = err.max((a - b).abs());
            }
        }
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn first_and_second_derivatives_match_differences() {
        let field = brownian_field(1024, 7, 3);
        let config = SolveConfig::default();
        let x = 0.3;
        let jet = solve_flow(&field, &[x], 2, &config).unwrap();
        let at = |x: f64| solve(&field, &[x], &config).unwrap();
        let (p, m) = (at(x + 1e-4), at(x - 1e-4));
        let (p2, c2, m2) = (at(x + 1e-3), at(x), at(x - 1e-3));
        let (mut e1, mut e2): (f64, f64) = (0.0, 0.0);
        for i in 0..jet.len() {
            let fd1 = (p.value(0, i)[0] - m.value(0, i)[0]) / 2e-4;
            let fd2 = (p2.value(0, i)[0] - 2.0 * c2.value(0, i)[0] + m2.value(0, i)[0]) / 1e-6;
            e1 = e1.max((jet.value(1, i)[0] - fd1).abs());
            e2 = e2.max((jet.value(2, i)[0] - fd2).abs());
        }
        assert!(e1 < 1e-3, "{e1}");
        assert!(e2 < 1e-2, "{e2}");
    }

    #[test]
    fn flow_shares_level_zero_and_is_triangular() {
        let field = brownian_field(512, 3, 3);
        let config = SolveConfig::default();
        let y = solve(&field, &[-0.4], &config).unwrap();
        let j1 = solve_flow(&field, &[-0.4], 1, &config).unwrap();
        let j2 = solve_flow(&field, &[-0.4], 2, &config).unwrap();
        assert_eq!(y.level(0), j1.level(0));
        assert_eq!(y.level(0), j2.level(0));
        assert_eq!(j1.level(1), j2.level(1));
        assert_eq!(j2.value(1, 0), &[1.0]);
        assert_eq!(j2.value(2, 0), &[0.0]);
    }

    #[test]
    fn flow_order_must_be_supported() {
        let field = brownian_field(64, 1, 1);
        assert!(matches!(
            solve_flow(&field, &[0.0], 1, &SolveConfig::default()),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn picard_limit_does_not_depend_on_the_guess() {
        let field = brownian_field(256, 11, 1);
        let config = SolveConfig::default();
        let a = picard_subinterval(&field, 0, 32, &[0.2], None, &config).unwrap();
        let guess: Vec<f64> = (0..33).map(|j| 0.2 + 0.01 * j as f64).collect();
        let b = picard_subinterval(&field, 0, 32, &[0.2], Some(&guess), &config).unwrap();
        assert!(a.converged && b.converged);
        let dist = a.values.iter().zip(&b.values).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
        let scale = 1.0 + sup_norm(&a.values);
        assert!(dist < 2.0 * config.picard_tol * scale, "{dist}");
    }

    #[test]
    fn reconstruction_adds_the_path() {
        let field = brownian_field(256, 5, 1);
        let jet = solve(&field, &[0.1], &SolveConfig::default()).unwrap();
        let y = reconstruct_solution(&jet, &field.path).unwrap();
        assert_eq!(y.point(0), &[0.1]);
        for i in 0..y.len() {
            assert_eq!(y.point(i)[0], jet.value(0, i)[0] + field.path.point(i)[0]);
        }
        let zero = reconstruct_solution(&jet, &SamplePath::zero(field.path.grid, 1)).unwrap();
        assert_eq!(zero.values(), jet.level(0));
        let other = SamplePath::zero(TimeGrid::new(1.0, 128).unwrap(), 1);
        assert!(matches!(reconstruct_solution(&jet, &other), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn config_checks_exponent_arithmetic() {
        let c = SolveConfig::default();
        let gp = c.resolve(0.75, 2.0).unwrap();
        assert!(gp > 0.25 && gp < 0.75 && 0.75 + 2.0 * (1.0 - gp) > 1.0);
        assert!(SolveConfig { gamma_prime: Some(0.2), ..c.clone() }.resolve(0.75, 2.0).is_err());
        assert!(SolveConfig { gamma_prime: Some(0.8), ..c.clone() }.resolve(0.75, 2.0).is_err());
        assert!(SolveConfig { step_factor: 1.5, ..c }.resolve(0.75, 2.0).is_err());
    }

    #[test]
    fn binary_output_has_one_column_per_entry() {
        let field = brownian_field(64, 2, 3);
        let jet = solve_flow(&field, &[0.0], 2, &SolveConfig::default()).unwrap();
        let mut buf = Vec::new();
        jet.write_binary(&mut buf).unwrap();
        let file = ColumnFile::read(&buf[..]).unwrap();
        assert_eq!(file.axis, Some(3));
        assert_eq!(file.columns.len(), 4);
        assert_eq!(file.columns[2], jet.level(1));
        let summary = serde_json::to_value(jet.summary()).unwrap();
        assert_eq!(summary["status"]["kind"], "complete");
    }
}
