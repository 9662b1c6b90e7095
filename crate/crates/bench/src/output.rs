//! Result files. Everything except `wall_times.csv` and `timing.csv` is a
//! pure function of the configuration, so reruns with the same seed produce
//! identical bytes.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use crate::config::{Algorithm, ExperimentConfig};
use crate::error::{BenchError, Result};
use crate::experiments::{curve_correlation, DeriveResult, ReconstructReport, SweepResult};

#[derive(Debug, Serialize)]
struct TrialRow<'a> {
    n: usize,
    point: f64,
    trial: usize,
    seed: u64,
    truth_purity: f64,
    linear_physical: bool,
    algorithm: &'a str,
    infidelity: Option<f64>,
    purity: Option<f64>,
    iterations: Option<usize>,
    converged: Option<bool>,
    error: Option<&'a str>,
}

#[derive(Debug, Serialize)]
struct WallTimeRow<'a> {
    n: usize,
    point: f64,
    trial: usize,
    algorithm: &'a str,
    seconds: f64,
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| BenchError::Write { path: dir.to_path_buf(), source })
}

pub fn write_csv<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|source| BenchError::Write { path: path.to_path_buf(), source })
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("serializable");
    write_text(path, &text)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| BenchError::Write { path: path.to_path_buf(), source })
}

/// Conventions shared by every run that readers of the numbers need.
fn conventions(cfg: &ExperimentConfig) -> serde_json::Value {
    json!({
        "noise_model": cfg.noise,
        "shots_per_setting": "round(N / 3^n) for each of the 3^n product measurement settings",
        "a_mod": "signed: the sum of the removed negative eigenvalues, so a_mod <= 0",
        "linear_infidelity": "reported only when the linear estimate is physical; other trials are listed as failures",
        "mle_start": "EO output",
        "imle_start": "maximally mixed state",
        "trial_seeds": "state seed = derive_seed(seed, trial); noise seed = derive_seed(state seed, 1 + sweep point index)",
    })
}

fn sidecar(cfg: &ExperimentConfig, extra: serde_json::Value) -> serde_json::Value {
    let mut v = json!({
        "experiment": cfg.kind.name(),
        "version": env!("CARGO_PKG_VERSION"),
        "config": cfg,
        "conventions": conventions(cfg),
    });
    if let (Some(obj), Some(more)) = (v.as_object_mut(), extra.as_object()) {
        obj.extend(more.clone());
    }
    v
}

/// Writes `summary.csv`, `trials.csv`, `timing.csv` and `run.json` into `dir`.
pub fn write_sweep(dir: &Path, cfg: &ExperimentConfig, result: &SweepResult) -> Result<Vec<PathBuf>> {
    ensure_dir(dir)?;
    let algorithms: &[Algorithm] = &cfg.algorithms;
    let summary = dir.join("summary.csv");
    write_csv(&summary, result.summary(algorithms))?;

    let mut trial_rows = Vec::new();
    let mut wall_rows = Vec::new();
    for p in &result.points {
        for (k, t) in p.trials.iter().enumerate() {
            for o in &t.outcomes {
                trial_rows.push(TrialRow {
                    n: p.n,
                    point: p.point,
                    trial: k,
                    seed: t.seed,
                    truth_purity: t.truth_purity,
                    linear_physical: t.linear_physical,
                    algorithm: o.algorithm.name(),
                    infidelity: Some(o.infidelity),
                    purity: Some(o.purity),
                    iterations: Some(o.iterations),
                    converged: Some(o.converged),
                    error: None,
                });
                wall_rows.push(WallTimeRow { n: p.n, point: p.point, trial: k, algorithm: o.algorithm.name(), seconds: o.wall_time.as_secs_f64() });
            }
            for (a, e) in &t.failures {
                trial_rows.push(TrialRow {
                    n: p.n,
                    point: p.point,
                    trial: k,
                    seed: t.seed,
                    truth_purity: t.truth_purity,
                    linear_physical: t.linear_physical,
                    algorithm: a.name(),
                    infidelity: None,
                    purity: None,
                    iterations: None,
                    converged: None,
                    error: Some(e),
                });
            }
        }
    }
    let trials = dir.join("trials.csv");
    write_csv(&trials, trial_rows)?;
    let walls = dir.join("wall_times.csv");
    write_csv(&walls, wall_rows)?;
    let mut files = vec![summary, trials, walls];
    if !result.timing.is_empty() {
        let timing = dir.join("timing.csv");
        write_csv(&timing, &result.timing)?;
        files.push(timing);
    }
    let run = dir.join("run.json");
    write_json(&run, &sidecar(cfg, json!({ "nondeterministic_files": ["wall_times.csv", "timing.csv"] })))?;
    files.push(run);
    Ok(files)
}

/// Writes `profile.csv`, `distances.csv`, `fit_curve.json` and `run.json`.
pub fn write_derivation(dir: &Path, cfg: &ExperimentConfig, result: &DeriveResult) -> Result<Vec<PathBuf>> {
    #[derive(Serialize)]
    struct DistanceRow {
        trial: usize,
        purity: Option<f64>,
        index: usize,
        eigenvalue: f64,
        distance: f64,
        positive_count: usize,
    }
    ensure_dir(dir)?;
    let profile = dir.join("profile.csv");
    write_csv(&profile, &result.profile.bins)?;
    let distances = dir.join("distances.csv");
    write_csv(
        &distances,
        result.trials.iter().enumerate().flat_map(|(k, t)| {
            t.eigenvalues.iter().zip(&t.distances).enumerate().map(move |(i, (&eigenvalue, &distance))| DistanceRow {
                trial: k,
                purity: t.purity,
                index: i,
                eigenvalue,
                distance,
                positive_count: t.positive_count,
            })
        }),
    )?;
    let curve = dir.join("fit_curve.json");
    write_text(&curve, &result.curve.to_json()?)?;
    let run = dir.join("run.json");
    let shipped = tomo_core::correction::FitCurve::default();
    write_json(
        &run,
        &sidecar(
            cfg,
            json!({
                "trials_used": result.trials.len(),
                "trials_skipped_physical": result.skipped,
                "improved_fraction": result.improved_fraction,
                "chi_square": result.chi_square,
                "coefficients": result.curve.coefficients,
                "pearson_vs_default_curve": curve_correlation(&result.curve, &shipped),
                "leading_scaled_distance": result.leading_distance(),
            }),
        ),
    )?;
    Ok(vec![profile, distances, curve, run])
}

/// Writes `density.json` and `report.json`.
pub fn write_reconstruction(dir: &Path, cfg: &ExperimentConfig, report: &ReconstructReport) -> Result<Vec<PathBuf>> {
    ensure_dir(dir)?;
    let mut files = Vec::new();
    if let Some(out) = &report.output {
        let density = dir.join("density.json");
        write_text(&density, &out.to_json()?)?;
        files.push(density);
    }
    let path = dir.join("report.json");
    write_json(&path, &sidecar(cfg, json!({ "report": report })))?;
    files.push(path);
    Ok(files)
}
