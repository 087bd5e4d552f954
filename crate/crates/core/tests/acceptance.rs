//! Acceptance criteria, one line each. Runs without the libtest harness so the
//! lines are always printed. With `REGNOISE_ACCEPTANCE_STRICT=1` the process
//! exits non-zero when any criterion fails.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regnoise::averaging::{SpectralDrift, Symbol};
use regnoise::funcspaces::{build_partition, lp_blocks, Radii, SpatialField};
use regnoise::gaussmodels::{
    lnd_profile, sample, sample_batch, GaussianModel, Innovations, LndSettings, SamplePath,
};
use regnoise::occupation::{holder_exponent, local_time, occupation_spectrum, Quadrature, WindowSettings};
use regnoise::sewing::{scalar_germ, sew, stochastic_sewing_check, StochasticSettings};
use regnoise::yode::{classical_solution, reconstruct_solution, solve, solve_flow, AveragedDrift, SolveConfig};
use regnoise::{FrequencyGrid, TimeGrid};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn sine() -> SpectralDrift {
    SpectralDrift::scalar(1, Symbol::Sine { amplitude: 1.0, frequency: vec![1.0], phase: 0.0 }).unwrap()
}

fn brownian_path(n: usize, seed: u64) -> SamplePath {
    sample(&GaussianModel::brownian(1, 1.0).unwrap(), n, seed).unwrap()
}

fn closed_form_local_time() -> Outcome {
    let path = SamplePath::linear(TimeGrid::new(1.0, 4096).unwrap(), &[0.0], &[1.0]).unwrap();
    let grid = FrequencyGrid::new(128.0, 513, 1).unwrap();
    let spectrum = occupation_spectrum(&path, 0.0, 1.0, grid, Quadrature::LeftRiemann).unwrap();
    let l = local_time(&spectrum);
    let dx = grid.dx();
    let band = 3.0 * dx;
    let l1: f64 = (0..grid.len())
        .filter_map(|i| {
            let x = grid.space_point(i)[0];
            let near_jump = x.abs() <= band || (x - 1.0).abs() <= band;
            let exact = if x > 0.0 && x <= 1.0 { 1.0 } else { 0.0 };
            (!near_jump).then(|| (l.field.values[i] - exact).abs() * dx)
        })
        .sum();
    outcome(
        l1 < 0.02 && (l.mass - 1.0).abs() < 0.01,
        format!("L1 distance {l1:.2e} (< 2e-2), box mass {:.6} (1 ± 1e-2)", l.mass),
    )
}

fn plog_conditional_variance() -> Outcome {
    let (p, horizon, n) = (2.0, 0.5, 512);
    let model = GaussianModel::plog(p, 1, horizon).unwrap();
    let inn = Innovations::new(&model, n).unwrap();
    let dt = horizon / n as f64;
    let mut worst: f64 = 0.0;
    for i in 0..20 {
        let lag = 32 + 22 * i;
        let k = 1 + (37 * i) % (n - lag);
        let numeric = inn.conditional_variance(k, k + lag);
        let exact = (1.0 / (lag as f64 * dt)).ln().powf(1.0 - 2.0 * p) / (2.0 * p - 1.0);
        worst = worst.max((numeric / exact - 1.0).abs());
    }
    outcome(worst < 0.01, format!("max relative error {worst:.4} over 20 pairs (< 0.01)"))
}

fn lnd_discrimination() -> Outcome {
    let model = GaussianModel::fbm(0.3, 1, 1.0).unwrap();
    let s = LndSettings::default();
    let inf = lnd_profile(&model, 256, 0.3, &s).unwrap().strong_infimum;
    let lag_one = |n| {
        let p = lnd_profile(&model, n, 0.2, &s).unwrap();
        p.near_diagonal.iter().find(|(l, _)| *l == 1).unwrap().1
    };
    let ratio = lag_one(256) / lag_one(1024);
    outcome(
        inf > 0.5 && ratio >= 4.0,
        format!("infimum(ζ=0.3) {inf:.4} (> 0.5); near-diagonal drop under 4x refinement {ratio:.3} (≥ 4)"),
    )
}

fn brownian_exponent_band() -> Outcome {
    let paths = sample_batch(&GaussianModel::brownian(1, 1.0).unwrap(), 4096, 0, 200).unwrap();
    let r = holder_exponent(&paths, 0.0, FrequencyGrid::default_for(1), &WindowSettings::default()).unwrap();
    outcome(
        (0.6..=0.8).contains(&r.gamma_hat) && r.stderr < 0.03,
        format!("gamma_hat {:.4} ([0.6, 0.8]), stderr {:.4} (< 0.03)", r.gamma_hat, r.stderr),
    )
}

fn tower_exactness() -> Outcome {
    let models = [
        GaussianModel::brownian(1, 1.0).unwrap(),
        GaussianModel::fbm(0.3, 1, 1.0).unwrap(),
        GaussianModel::fbm(0.75, 1, 1.0).unwrap(),
        GaussianModel::fbm_series(vec![1.0, 0.5], vec![0.3, 0.6], 1, 1.0).unwrap(),
        GaussianModel::plog(1.0, 1, 0.5).unwrap(),
    ];
    let settings = StochasticSettings { steps: 256, batch: 16, ..Default::default() };
    let z = [vec![1.0], vec![8.0], vec![-3.5]];
    let worst = models
        .iter()
        .map(|m| stochastic_sewing_check(m, &z, &settings).unwrap().tower_max)
        .fold(0.0, f64::max);
    outcome(worst <= 1e-10, format!("max tower estimate {worst:.2e} over 5 models (≤ 1e-10)"))
}

fn sewing_exponent() -> Outcome {
    let model = GaussianModel::fbm(0.4, 1, 0.5).unwrap();
    let settings = StochasticSettings { steps: 4096, batch: 100, lambda_prime: 1.0, ..Default::default() };
    let z = [vec![4.0], vec![8.0], vec![16.0], vec![32.0]];
    let c = stochastic_sewing_check(&model, &z, &settings).unwrap();
    let slope = c.prefactor_slope.unwrap_or(f64::NAN);
    outcome(
        c.kappa_envelope >= 0.5 && (slope + 1.0).abs() <= 0.2,
        format!("kappa_hat {:.3} (≥ 0.5), prefactor slope {slope:.3} (-1 ± 0.2)", c.kappa_envelope),
    )
}

fn sewing_order() -> Outcome {
    let germ = scalar_germ(|s, t| (5.0 * s).sin() * (t - s));
    let exact = (1.0 - 5f64.cos()) / 5.0;
    let errors: Vec<f64> = (1..=12)
        .map(|k| (sew(&germ, TimeGrid::new(1.0, 1).unwrap(), k).unwrap().value(1)[0] - exact).abs())
        .collect();
    let xs: Vec<f64> = (1..=12).map(f64::from).collect();
    let ys: Vec<f64> = errors.iter().map(|e| -e.log2()).collect();
    let order = regnoise::numerics::linear_fit(&xs[4..], &ys[4..]).unwrap().slope;
    let last = errors[11];
    outcome(
        order >= 0.95 && last < 1e-8,
        format!("order per level {order:.3} (≥ 0.95), error at depth 12 {last:.2e} (< 1e-8)"),
    )
}

fn oracle_equivalence() -> Outcome {
    let mut worst: f64 = 0.0;
    for seed in 0..10 {
        let w = brownian_path(4096, seed);
        let field = AveragedDrift::smooth(&sine(), w.clone(), 1).unwrap();
        let jet = solve(&field, &[0.5], &SolveConfig::default()).unwrap();
        let reference = classical_solution(&sine(), &w, &[0.5], None, 1e-12).unwrap();
        worst = worst.max(sup_diff(jet.level(0), reference.values()));
    }
    outcome(worst < 1e-4, format!("max sup-norm error {worst:.2e} over 10 seeds (< 1e-4)"))
}

fn flow_derivative() -> Outcome {
    let w = brownian_path(4096, 0);
    let field = AveragedDrift::smooth(&sine(), w, 3).unwrap();
    let config = SolveConfig::default();
    let x = 0.5;
    let jet = solve_flow(&field, &[x], 2, &config).unwrap();
    let at = |x: f64| solve(&field, &[x], &config).unwrap().level(0).to_vec();
    let (p1, m1) = (at(x + 1e-4), at(x - 1e-4));
    let (p2, c2, m2) = (at(x + 1e-3), at(x), at(x - 1e-3));
    let (mut e1, mut e2): (f64, f64) = (0.0, 0.0);
    for i in 0..jet.len() {
        let fd1 = (p1[i] - m1[i]) / 2e-4;
        let fd2 = (p2[i] - 2.0 * c2[i] + m2[i]) / 1e-6;
        e1 = e1.max((jet.value(1, i)[0] - fd1).abs());
        e2 = e2.max((jet.value(2, i)[0] - fd2).abs());
    }
    outcome(
        e1 < 1e-3 && e2 < 1e-2,
        format!("first-order error {e1:.2e} (< 1e-3), second-order error {e2:.2e} (< 1e-2)"),
    )
}

fn blow_up() -> Outcome {
    let grid = TimeGrid::new(2.0, 4096).unwrap();
    let drift = SpectralDrift::scalar(1, Symbol::Polynomial { axis: 0, coefficients: vec![0.0, 0.0, 1.0] }).unwrap();
    let field = AveragedDrift::smooth(&drift, SamplePath::zero(grid, 1), 1).unwrap();
    let config = SolveConfig { explosion_threshold: 1e3, ..SolveConfig::default() };
    let jet = solve(&field, &[1.0], &config).unwrap();
    match jet.t_star() {
        Some(t) => outcome((0.9..=1.1).contains(&t), format!("exploded at T* = {t:.4} ([0.9, 1.1])")),
        None => outcome(false, format!("status {:?}", jet.status)),
    }
}

fn mollification_stability() -> Outcome {
    let w = brownian_path(4096, 0);
    let dirac = SpectralDrift::scalar(1, Symbol::Dirac { amplitude: 1.0, center: vec![0.0] }).unwrap();
    let grid = FrequencyGrid::default_for(1);
    let solutions: Vec<Vec<f64>> = [0.2, 0.1, 0.05]
        .iter()
        .map(|&eps| {
            let field = AveragedDrift::new(&dirac.mollified(eps), w.clone(), Some(grid), 1, 0.75, 2.0).unwrap();
            let jet = solve(&field, &[0.0], &SolveConfig::default()).unwrap().check().unwrap();
            reconstruct_solution(&jet, &w).unwrap().values().to_vec()
        })
        .collect();
    let d1 = sup_diff(&solutions[0], &solutions[1]);
    let d2 = sup_diff(&solutions[1], &solutions[2]);
    outcome(d2 < d1, format!("successive differences {d1:.3e}, {d2:.3e} (decreasing)"))
}

fn littlewood_paley() -> Outcome {
    let (mut residual, mut recon): (f64, f64) = (0.0, 0.0);
    for seed in 0..20u64 {
        let grid = FrequencyGrid::default_for(if seed < 10 { 1 } else { 2 });
        let partition = build_partition(grid, Radii::default()).unwrap();
        residual = residual.max(partition.residual());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values: Vec<f64> = (0..grid.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let field = SpatialField::new(grid, values.clone()).unwrap();
        let blocks = lp_blocks(&field, &partition).unwrap();
        let (mut err, mut norm) = (0.0, 0.0);
        for (i, v) in values.iter().enumerate() {
            let s: f64 = blocks.iter().map(|b| b[i]).sum();
            err += (s - v) * (s - v);
            norm += v * v;
        }
        recon = recon.max((err / norm).sqrt());
    }
    outcome(
        residual < 1e-10 && recon < 1e-8,
        format!("partition residual {residual:.2e} (< 1e-10), reconstruction {recon:.2e} (< 1e-8)"),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome, Duration); 12] = [
        ("1 closed-form local time", closed_form_local_time, Duration::from_secs(5)),
        ("2 p-log conditional variance", plog_conditional_variance, Duration::from_secs(30)),
        ("3 LND discrimination", lnd_discrimination, Duration::from_secs(60)),
        ("4 Brownian exponent band", brownian_exponent_band, Duration::from_secs(600)),
        ("5 stochastic-sewing tower exactness", tower_exactness, Duration::from_secs(10)),
        ("6 stochastic-sewing exponent", sewing_exponent, Duration::from_secs(300)),
        ("7 sewing engine order", sewing_order, Duration::from_secs(1)),
        ("8 solver oracle equivalence", oracle_equivalence, Duration::from_secs(120)),
        ("9 flow derivative", flow_derivative, Duration::from_secs(300)),
        ("10 blow-up detection", blow_up, Duration::from_secs(5)),
        ("11 mollification stability", mollification_stability, Duration::from_secs(600)),
        ("12 Littlewood-Paley soundness", littlewood_paley, Duration::from_secs(10)),
    ];
    let mut failed = 0;
    for (name, run, budget) in criteria {
        let start = Instant::now();
        let o = run();
        let elapsed = start.elapsed();
        let pass = o.pass && elapsed <= budget;
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {name}: {} | {} | {:.2} s (budget {} s)",
            if pass { "PASS" } else { "FAIL" },
            o.detail,
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    println!("acceptance: {} passed, {failed} failed", 12 - failed);
    if failed > 0 && std::env::var("REGNOISE_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
