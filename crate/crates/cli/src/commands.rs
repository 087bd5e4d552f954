use regnoise::averaging::{average, average_along_path, SpectralDrift};
use regnoise::gaussmodels::{lnd_profile, sample, sample_batch, GaussianModel, SamplePath, Sampler};
use regnoise::io::{write_csv, write_path_binary, write_path_csv};
use regnoise::occupation::{holder_exponent, local_time, occupation_spectrum};
use regnoise::sewing::stochastic_sewing_check;
use regnoise::yode::{classical_solution, reconstruct_solution, solve_flow, AveragedDrift};
use regnoise::{FrequencyGrid, TimeGrid};
use serde_json::{json, Value};

use crate::config::*;
use crate::manifest::Run;
use crate::CliError;

fn path_for(model: Option<&GaussianModel>, dim: usize, steps: usize, seed: u64) -> regnoise::Result<SamplePath> {
    match model {
        Some(m) => {
            if m.dim != dim {
                return Err(regnoise::Error::GridMismatch(format!(
                    "model dimension {} differs from drift dimension {dim}",
                    m.dim
                )));
            }
            sample(m, steps, seed)
        }
        None => Ok(SamplePath::zero(TimeGrid::new(1.0, steps)?, dim)),
    }
}

fn jitter_warning(path: &SamplePath) -> Vec<String> {
    match path.jitter {
        Some(j) if j > 0.0 => vec![format!("covariance factorization needed a diagonal jitter of {j:e}")],
        _ => Vec::new(),
    }
}

pub fn simulate(cfg: &SimulateConfig, run: &mut Run) -> Result<Value, CliError> {
    let sampler = Sampler::new(&cfg.model, cfg.steps)?;
    if let Some(j) = sampler.jitter().filter(|j| *j > 0.0) {
        run.warn([format!("covariance factorization needed a diagonal jitter of {j:e}")]);
    }
    let paths = sample_batch(&cfg.model, cfg.steps, cfg.seed, cfg.count)?;
    run.stage("sample");
    let width = cfg.count.saturating_sub(1).to_string().len();
    for (i, p) in paths.iter().enumerate() {
        match cfg.format {
            PathFormat::Csv => run.write_with(&format!("path_{i:0width$}.csv"), |b| write_path_csv(p, b))?,
            PathFormat::Binary => run.write_with(&format!("path_{i:0width$}.bin"), |b| write_path_binary(p, b))?,
        }
    }
    run.stage("write");
    Ok(json!({ "paths": cfg.count, "steps": cfg.steps, "first_seed": cfg.seed, "last_seed": cfg.seed.wrapping_add(cfg.count.saturating_sub(1) as u64) }))
}

pub fn localtime(cfg: &LocaltimeConfig, run: &mut Run) -> Result<Value, CliError> {
    let path = match (&cfg.model, &cfg.linear) {
        (Some(m), None) => sample(m, cfg.steps, cfg.seed)?,
        (None, Some(l)) => SamplePath::linear(TimeGrid::new(l.horizon, cfg.steps)?, &l.a, &l.b)?,
        _ => return Err(CliError::Usage("config: give exactly one of `model` and `linear`".into())),
    };
    run.warn(jitter_warning(&path));
    let grid = cfg.grid.unwrap_or_else(|| FrequencyGrid::default_for(path.dim));
    let (s, t) = cfg.window.unwrap_or((0.0, path.grid.horizon()));
    let spectrum = occupation_spectrum(&path, s, t, grid, cfg.quadrature)?;
    let field = local_time(&spectrum);
    run.stage("transform");
    run.warn(field.warnings.clone());
    run.write_with("spectrum.csv", |b| spectrum.write_csv(b))?;
    run.write_with("localtime.csv", |b| field.write_csv(b))?;
    run.write_with("path.csv", |b| write_path_csv(&path, b))?;
    run.stage("write");
    Ok(json!({
        "window": [spectrum.window.0, spectrum.window.1],
        "mass": field.mass,
        "min_value": field.min_value,
        "max_value": field.max_value,
        "imag_residue": field.imag_residue,
        "hermitian_defect": spectrum.hermitian_defect(),
    }))
}

pub fn regularity(cfg: &RegularityConfig, run: &mut Run) -> Result<Value, CliError> {
    let paths = sample_batch(&cfg.model, cfg.steps, cfg.seed, cfg.paths)?;
    if let Some(p) = paths.first() {
        run.warn(jitter_warning(p));
    }
    run.stage("sample");
    let grid = cfg.grid.unwrap_or_else(|| FrequencyGrid::default_for(cfg.model.dim));
    let reports = cfg
        .lambdas
        .iter()
        .map(|&l| holder_exponent(&paths, l, grid, &cfg.windows))
        .collect::<regnoise::Result<Vec<_>>>()?;
    run.stage("fit");
    let mut header = vec!["h".to_string()];
    header.extend(cfg.lambdas.iter().map(|l| format!("sup_norm_lambda_{l}")));
    let rows: Vec<Vec<f64>> = reports[0]
        .windows
        .iter()
        .enumerate()
        .map(|(i, h)| {
            let mut r = vec![*h];
            r.extend(reports.iter().map(|rep| rep.mean_sup_norms[i]));
            r
        })
        .collect();
    run.write_with("sup_norms.csv", |b| write_csv(b, &header, rows))?;
    run.write_json("report.json", &reports)?;
    run.stage("write");
    Ok(json!(reports
        .iter()
        .map(|r| json!({ "lambda": r.lambda, "gamma_hat": r.gamma_hat, "stderr": r.stderr }))
        .collect::<Vec<_>>()))
}

pub fn average_cmd(cfg: &AverageConfig, run: &mut Run) -> Result<Value, CliError> {
    let path = path_for(cfg.model.as_ref(), cfg.drift.dim, cfg.steps, cfg.seed)?;
    run.warn(jitter_warning(&path));
    let grid = cfg.grid.unwrap_or_else(|| FrequencyGrid::default_for(cfg.drift.dim));
    let windows = if cfg.windows.is_empty() {
        vec![(0.0, path.grid.horizon())]
    } else {
        cfg.windows.clone()
    };
    let field = if cfg.drift.has_smooth_terms() {
        average_along_path(&cfg.drift, &path, &windows, cfg.order, grid, cfg.quadrature)?
    } else {
        let spectra = windows
            .iter()
            .map(|&(s, t)| occupation_spectrum(&path, s, t, grid, cfg.quadrature))
            .collect::<regnoise::Result<Vec<_>>>()?;
        average(&cfg.drift, &spectra, cfg.order)?
    };
    run.stage("average");
    run.warn(field.warnings.clone());
    for w in 0..windows.len() {
        run.write_with(&format!("field_{w}.csv"), |b| field.write_csv(w, b))?;
        run.write_with(&format!("field_{w}.bin"), |b| field.write_binary(w, b))?;
    }
    run.stage("write");
    Ok(json!({ "windows": windows, "order": cfg.order, "kappa": field.kappa }))
}

fn band_grid(drift: &SpectralDrift, grid: Option<FrequencyGrid>) -> Option<FrequencyGrid> {
    drift
        .has_band_limited_terms()
        .then(|| grid.unwrap_or_else(|| FrequencyGrid::default_for(drift.dim)))
}

pub fn solve_cmd(cfg: &SolveRunConfig, run: &mut Run) -> Result<Value, CliError> {
    let w = path_for(cfg.model.as_ref(), cfg.drift.dim, cfg.steps, cfg.seed)?;
    run.warn(jitter_warning(&w));
    let grid = band_grid(&cfg.drift, cfg.grid);
    let field = AveragedDrift::new(&cfg.drift, w.clone(), grid, cfg.k + 1, cfg.gamma, cfg.delta)?;
    run.stage("setup");
    let jet = solve_flow(&field, &cfg.x, cfg.k, &cfg.solver)?;
    run.stage("solve");
    run.warn(jet.warnings.clone());
    let y = reconstruct_solution(&jet, &w)?;
    run.write_with("flow.bin", |b| jet.write_binary(b))?;
    let d = jet.dim;
    let mut header = vec!["t".to_string()];
    header.extend((1..=d).map(|a| format!("z_{a}")));
    header.extend((1..=d).map(|a| format!("y_{a}")));
    let rows = (0..jet.len()).map(|i| {
        let mut r = vec![jet.grid.time(i)];
        r.extend_from_slice(jet.value(0, i));
        r.extend_from_slice(y.point(i));
        r
    });
    run.write_with("trajectory.csv", |b| write_csv(b, &header, rows))?;
    let mut result = serde_json::to_value(jet.summary()).map_err(|e| CliError::Usage(e.to_string()))?;
    if cfg.oracle == Some(Oracle::Classical) {
        let reference = classical_solution(&cfg.drift, &w, &cfg.x, grid, cfg.oracle_tol)?;
        run.stage("oracle");
        let mut max_error: f64 = 0.0;
        let mut header = vec!["t".to_string()];
        for a in 1..=d {
            header.extend([format!("young_{a}"), format!("classical_{a}"), format!("abs_error_{a}")]);
        }
        let rows: Vec<Vec<f64>> = (0..jet.len())
            .map(|i| {
                let mut r = vec![jet.grid.time(i)];
                for a in 0..d {
                    let (u, v) = (jet.value(0, i)[a], reference.point(i)[a]);
                    max_error = max_error.max((u - v).abs());
                    r.extend([u, v, (u - v).abs()]);
                }
                r
            })
            .collect();
        run.write_with("oracle.csv", |b| write_csv(b, &header, rows))?;
        result["oracle"] = json!({ "kind": "classical", "tolerance": cfg.oracle_tol, "max_error": max_error });
    }
    run.stage("write");
    Ok(result)
}

pub fn lnd(cfg: &LndConfig, run: &mut Run) -> Result<Value, CliError> {
    if cfg.zetas.is_empty() {
        return Err(CliError::Usage("config: `zetas` must not be empty".into()));
    }
    let profiles = cfg
        .zetas
        .iter()
        .map(|&z| lnd_profile(&cfg.model, cfg.steps, z, &cfg.settings))
        .collect::<regnoise::Result<Vec<_>>>()?;
    run.stage("profile");
    run.write_json("lnd.json", &profiles)?;
    run.stage("write");
    Ok(json!(profiles
        .iter()
        .map(|p| json!({ "zeta": p.zeta, "strong_infimum": p.strong_infimum, "near_diagonal_slope": p.near_diagonal_slope, "lnd": p.lnd }))
        .collect::<Vec<_>>()))
}

pub fn sewcheck(cfg: &SewcheckConfig, run: &mut Run) -> Result<Value, CliError> {
    let mut settings = cfg.settings.clone();
    if let Some(seed) = cfg.seed {
        settings.base_seed = seed;
    }
    let check = stochastic_sewing_check(&cfg.model, &cfg.z, &settings)?;
    run.stage("check");
    if check.jitter > 0.0 {
        run.warn([format!("covariance factorization needed a diagonal jitter of {:e}", check.jitter)]);
    }
    for r in check.reports.iter().filter(|r| !r.hypothesis_holds) {
        run.warn([format!("hypothesis fails at z = {:?}: kappa_hat = {:.3}", r.z, r.kappa_hat)]);
    }
    run.write_json("sewcheck.json", &check)?;
    run.stage("write");
    Ok(json!({
        "tower_max": check.tower_max,
        "kappa_envelope": check.kappa_envelope,
        "prefactor_slope": check.prefactor_slope,
    }))
}
