//! End-to-end experiments: simulate data, reconstruct, correct, and score
//! every algorithm against the generating state.

use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use tomo_core::correction::{eo_correct, imle_correct, mle_correct, sgs_correct, CorrectionReport, FitCurve};
use tomo_core::density::{infidelity, purity};
use tomo_core::derivation::{aggregate_profiles_with_bins, fit_odd_series, optimize_distances, DistanceProfile, TrialDistances, PROFILE_BINS};
use tomo_core::linear::linear_reconstruct;
use tomo_core::measurement::shots_for_total;
use tomo_core::rng::{derive_seed, rng_from_seed};
use tomo_core::states::{rank_deficient_state, solve_purity_param, StateRecipe};
use tomo_core::{cube_projectors, eigendecompose, simulate_counts, CountRecord, DensityMatrix, ProjectorSet, Spectrum};

use crate::config::{Algorithm, ExperimentConfig, ExperimentKind};
use crate::error::{BenchError, Result};
use crate::stats;

/// Infidelity of a physical estimate. Non-physical estimates have no
/// fidelity and are rejected.
pub fn score(estimate: &DensityMatrix, truth: &DensityMatrix) -> Result<f64> {
    if !estimate.is_physical() {
        return Err(BenchError::Tomo(tomo_core::TomoError::NonPhysicalInput { min_eigenvalue: estimate.min_eigenvalue() }));
    }
    Ok(infidelity(estimate, truth)?)
}

/// The benchmark state for one trial: a rank-deficient mixed state whose
/// purity is solved to `target`.
pub fn benchmark_state(cfg: &ExperimentConfig, n: usize, target: f64, seed: u64) -> Result<DensityMatrix> {
    let template = StateRecipe::new(n, 1.0, seed)
        .with_zero_fraction(cfg.state.zero_fraction)
        .with_rotation(cfg.state.rotation_strength);
    let recipe = solve_purity_param(&template, target)?;
    Ok(rank_deficient_state(&recipe)?)
}

#[derive(Debug, Clone, Serialize)]
pub struct AlgorithmOutcome {
    pub algorithm: Algorithm,
    pub infidelity: f64,
    pub purity: f64,
    pub wall_time: Duration,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrialResult {
    pub seed: u64,
    pub truth_purity: f64,
    /// Whether the linear reconstruction was already physical.
    pub linear_physical: bool,
    pub outcomes: Vec<AlgorithmOutcome>,
    pub failures: Vec<(Algorithm, String)>,
}

impl TrialResult {
    pub fn outcome(&self, a: Algorithm) -> Option<&AlgorithmOutcome> {
        self.outcomes.iter().find(|o| o.algorithm == a)
    }
}

/// Shared read-only inputs of a run.
pub struct Toolkit {
    pub curve: FitCurve,
}

impl Toolkit {
    pub fn from_config(cfg: &ExperimentConfig) -> Result<Self> {
        let curve = match &cfg.fit_curve {
            Some(path) => load_fit_curve(path)?,
            None => FitCurve::default(),
        };
        Ok(Self { curve })
    }
}

pub fn load_fit_curve(path: &Path) -> Result<FitCurve> {
    let text = std::fs::read_to_string(path).map_err(|e| BenchError::Config(format!("cannot read fit curve {}: {e}", path.display())))?;
    FitCurve::from_json(&text).map_err(|e| BenchError::Config(format!("fit curve {}: {e}", path.display())))
}

fn timed<T>(f: impl FnOnce() -> tomo_core::Result<T>) -> tomo_core::Result<(T, Duration)> {
    let start = Instant::now();
    let out = f()?;
    Ok((out, start.elapsed()))
}

/// Runs `algorithms` on one count record. SGS and EO times include the
/// eigendecomposition; MLE starts from the EO output and its time includes
/// producing that start.
pub fn run_algorithms(
    truth: &DensityMatrix,
    cr: &CountRecord,
    algorithms: &[Algorithm],
    toolkit: &Toolkit,
    seed: u64,
) -> Result<TrialResult> {
    let (linear, linear_time) = timed(|| linear_reconstruct(cr))?;
    let linear_physical = linear.is_physical();
    let mut result = TrialResult { seed, truth_purity: purity(truth), linear_physical, outcomes: Vec::new(), failures: Vec::new() };

    let spectral = |f: &dyn Fn(&Spectrum) -> tomo_core::Result<CorrectionReport>| -> tomo_core::Result<(CorrectionReport, Duration)> {
        timed(|| {
            let s = eigendecompose(&linear)?;
            let s = normalize_spectrum(s);
            f(&s)
        })
    };

    for &a in algorithms {
        let attempt: tomo_core::Result<(DensityMatrix, Duration, usize, bool)> = match a {
            Algorithm::Linear => Ok((linear.clone(), linear_time, 0, true)),
            Algorithm::Sgs => spectral(&|s| sgs_correct(s)).map(|(r, t)| (r.output, t + linear_time, r.iterations, r.converged)),
            Algorithm::Eo => {
                spectral(&|s| eo_correct(s, &toolkit.curve)).map(|(r, t)| (r.output, t + linear_time, r.iterations, r.converged))
            }
            Algorithm::Mle => timed(|| {
                let s = normalize_spectrum(eigendecompose(&linear)?);
                let start = eo_correct(&s, &toolkit.curve)?.output;
                mle_correct(cr, &start)
            })
            .map(|(r, t)| (r.output, t + linear_time, r.iterations, r.converged)),
            Algorithm::Imle => timed(|| imle_correct(cr, &DensityMatrix::maximally_mixed(cr.qubits())))
                .map(|(r, t)| (r.output, t, r.iterations, r.converged)),
        };
        match attempt.map_err(BenchError::from).and_then(|(out, time, iterations, converged)| {
            Ok(AlgorithmOutcome { algorithm: a, infidelity: score(&out, truth)?, purity: purity(&out), wall_time: time, iterations, converged })
        }) {
            Ok(outcome) => result.outcomes.push(outcome),
            Err(e) => result.failures.push((a, e.to_string())),
        }
    }
    Ok(result)
}

/// Rescales eigenvalues to sum to one; linear reconstructions are
/// trace-one only up to round-off.
fn normalize_spectrum(s: Spectrum) -> Spectrum {
    let total = s.sum();
    let values = s.eigenvalues.iter().map(|v| v / total).collect();
    s.with_eigenvalues(values)
}

#[derive(Debug, Clone, Serialize)]
pub struct SummaryRow {
    pub experiment: String,
    pub n: usize,
    /// Swept quantity: `N`, purity, or qubit count.
    pub point: f64,
    pub algorithm: String,
    pub mean_infidelity: f64,
    pub std_infidelity: f64,
    pub stderr_infidelity: f64,
    pub trials: usize,
    pub failures: usize,
    pub nonphysical_fraction: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TimingRow {
    pub n: usize,
    pub algorithm: String,
    /// `full` includes the eigendecomposition; `spectral` starts from a
    /// known spectrum.
    pub scope: String,
    pub median_seconds: f64,
    pub mean_seconds: f64,
    pub samples: usize,
}

#[derive(Debug, Clone)]
pub struct PointResults {
    pub n: usize,
    pub point: f64,
    pub trials: Vec<TrialResult>,
}

impl PointResults {
    /// Infidelities of `a` in trial order, skipping failed trials.
    pub fn infidelities(&self, a: Algorithm) -> Vec<f64> {
        self.trials.iter().filter_map(|t| t.outcome(a)).map(|o| o.infidelity).collect()
    }

    /// `(a, b)` infidelity pairs from trials where both succeeded.
    pub fn paired(&self, a: Algorithm, b: Algorithm) -> (Vec<f64>, Vec<f64>) {
        self.trials.iter().filter_map(|t| Some((t.outcome(a)?.infidelity, t.outcome(b)?.infidelity))).unzip()
    }

    pub fn wall_times(&self, a: Algorithm) -> Vec<f64> {
        self.trials.iter().filter_map(|t| t.outcome(a)).map(|o| o.wall_time.as_secs_f64()).collect()
    }
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub kind: ExperimentKind,
    pub points: Vec<PointResults>,
    pub timing: Vec<TimingRow>,
}

impl SweepResult {
    pub fn summary(&self, algorithms: &[Algorithm]) -> Vec<SummaryRow> {
        let mut rows = Vec::new();
        for p in &self.points {
            let nonphysical = p.trials.iter().filter(|t| !t.linear_physical).count() as f64 / p.trials.len().max(1) as f64;
            for &a in algorithms {
                let xs = p.infidelities(a);
                if xs.is_empty() && p.trials.iter().all(|t| t.failures.iter().all(|(f, _)| *f != a)) {
                    continue;
                }
                rows.push(SummaryRow {
                    experiment: self.kind.name().into(),
                    n: p.n,
                    point: p.point,
                    algorithm: a.name().into(),
                    mean_infidelity: stats::mean(&xs),
                    std_infidelity: stats::std_dev(&xs),
                    stderr_infidelity: stats::std_error(&xs),
                    trials: xs.len(),
                    failures: p.trials.len() - xs.len(),
                    nonphysical_fraction: nonphysical,
                });
            }
        }
        rows
    }

    pub fn point(&self, point: f64) -> Option<&PointResults> {
        self.points.iter().find(|p| (p.point - point).abs() <= 1e-9 * point.abs().max(1.0))
    }

    pub fn mean_curve(&self, a: Algorithm) -> Vec<(f64, f64)> {
        self.points.iter().map(|p| (p.point, stats::mean(&p.infidelities(a)))).collect()
    }
}

/// Runs `f` on a pool of `cfg.threads` workers (all cores when unset).
pub fn with_pool<T: Send>(cfg: &ExperimentConfig, f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cfg.threads {
        builder = builder.num_threads(t);
    }
    let pool = builder.build().map_err(|e| BenchError::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

fn trial_seed(cfg: &ExperimentConfig, trial: usize) -> u64 {
    derive_seed(cfg.seed, trial as u64)
}

/// Noise stream of `trial` at sweep point `point`.
fn noise_seed(state_seed: u64, point: usize) -> u64 {
    derive_seed(state_seed, 1 + point as u64)
}

fn run_point(
    cfg: &ExperimentConfig,
    toolkit: &Toolkit,
    ps: &Arc<ProjectorSet>,
    truths: &[DensityMatrix],
    shots: u64,
    point_index: usize,
    algorithms: &[Algorithm],
) -> Result<Vec<TrialResult>> {
    truths
        .par_iter()
        .enumerate()
        .map(|(t, truth)| {
            let seed = trial_seed(cfg, t);
            let cr = simulate_counts(truth, ps, shots, noise_seed(seed, point_index), cfg.noise)?;
            run_algorithms(truth, &cr, algorithms, toolkit, seed)
        })
        .collect()
}

fn generate_truths(cfg: &ExperimentConfig, n: usize, target: f64) -> Result<Vec<DensityMatrix>> {
    (0..cfg.trials).into_par_iter().map(|t| benchmark_state(cfg, n, target, trial_seed(cfg, t))).collect()
}

/// Infidelity against total counts `N` at fixed purity. Each trial keeps its
/// state across the sweep and draws fresh noise per `N`.
pub fn run_counts_sweep(cfg: &ExperimentConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let toolkit = Toolkit::from_config(cfg)?;
    with_pool(cfg, || {
        let ps = Arc::new(cube_projectors(cfg.n));
        let truths = generate_truths(cfg, cfg.n, cfg.state.purity)?;
        let mut points = Vec::new();
        for (k, &total) in cfg.counts.iter().enumerate() {
            let shots = shots_for_total(&ps, total);
            let trials = run_point(cfg, &toolkit, &ps, &truths, shots, k, &cfg.algorithms)?;
            points.push(PointResults { n: cfg.n, point: total, trials });
        }
        Ok(SweepResult { kind: ExperimentKind::CountsSweep, points, timing: Vec::new() })
    })?
}

/// Infidelity against state purity at `N = 4^n * counts_per_element`.
pub fn run_purity_sweep(cfg: &ExperimentConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let toolkit = Toolkit::from_config(cfg)?;
    with_pool(cfg, || {
        let ps = Arc::new(cube_projectors(cfg.n));
        let shots = shots_for_total(&ps, cfg.total_counts_for(cfg.n));
        let mut points = Vec::new();
        for (k, &target) in cfg.purities.iter().enumerate() {
            let truths = generate_truths(cfg, cfg.n, target)?;
            let trials = run_point(cfg, &toolkit, &ps, &truths, shots, k, &cfg.algorithms)?;
            points.push(PointResults { n: cfg.n, point: target, trials });
        }
        Ok(SweepResult { kind: ExperimentKind::PuritySweep, points, timing: Vec::new() })
    })?
}

/// Infidelity and runtime against qubit count at `N = 4^n *
/// counts_per_element`. MLE and iMLE are skipped above their qubit caps.
pub fn run_qubit_sweep(cfg: &ExperimentConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let toolkit = Toolkit::from_config(cfg)?;
    let mut points = Vec::new();
    let mut timing = Vec::new();
    for &n in &cfg.qubits {
        let algorithms: Vec<Algorithm> =
            cfg.algorithms.iter().copied().filter(|&a| cfg.runs_at(a, n)).collect();
        let ps = Arc::new(cube_projectors(n));
        let shots = shots_for_total(&ps, cfg.total_counts_for(n));
        let trials = with_pool(cfg, || -> Result<Vec<TrialResult>> {
            let truths = generate_truths(cfg, n, cfg.state.purity)?;
            run_point(cfg, &toolkit, &ps, &truths, shots, 0, &algorithms)
        })??;
        points.push(PointResults { n, point: n as f64, trials });
        timing.extend(time_qubit_count(cfg, &toolkit, n, &ps, shots, &algorithms)?);
    }
    Ok(SweepResult { kind: ExperimentKind::QubitSweep, points, timing })
}

/// Repeats `f` until at least `budget` has elapsed and returns the mean time
/// per call. Short operations are thus timed over many calls.
fn time_per_call(budget: Duration, mut f: impl FnMut()) -> f64 {
    let start = Instant::now();
    let mut calls = 0u32;
    loop {
        f();
        calls += 1;
        let elapsed = start.elapsed();
        if elapsed >= budget {
            return elapsed.as_secs_f64() / calls as f64;
        }
    }
}

/// Samples per qubit count for MLE and iMLE, which take seconds each.
pub const ITERATIVE_TIMING_SAMPLES: usize = 3;

/// Serial timing pass on the calling thread. SGS and EO are timed with and
/// without the eigendecomposition, alternating which runs first.
fn time_qubit_count(
    cfg: &ExperimentConfig,
    toolkit: &Toolkit,
    n: usize,
    ps: &Arc<ProjectorSet>,
    shots: u64,
    algorithms: &[Algorithm],
) -> Result<Vec<TimingRow>> {
    const BUDGET: Duration = Duration::from_millis(20);
    let samples = cfg.timing_repeats;
    let mut full: Vec<(Algorithm, Vec<f64>)> = algorithms.iter().map(|&a| (a, Vec::new())).collect();
    let mut spectral: Vec<(Algorithm, Vec<f64>)> = vec![(Algorithm::Sgs, Vec::new()), (Algorithm::Eo, Vec::new())];

    for t in 0..samples {
        let seed = trial_seed(cfg, t);
        let truth = benchmark_state(cfg, n, cfg.state.purity, seed)?;
        let cr = simulate_counts(&truth, ps, shots, noise_seed(seed, 0), cfg.noise)?;
        let linear = linear_reconstruct(&cr)?;
        let spectrum = normalize_spectrum(eigendecompose(&linear)?);

        let mut order: Vec<usize> = (0..full.len()).collect();
        if t % 2 == 1 {
            order.reverse();
        }
        for &k in &order {
            let a = full[k].0;
            if matches!(a, Algorithm::Mle | Algorithm::Imle) && t >= ITERATIVE_TIMING_SAMPLES {
                continue;
            }
            let seconds = match a {
                Algorithm::Linear => time_per_call(BUDGET, || {
                    std::hint::black_box(linear_reconstruct(&cr).ok());
                }),
                Algorithm::Sgs => time_per_call(BUDGET, || {
                    let s = normalize_spectrum(eigendecompose(&linear).expect("hermitian"));
                    std::hint::black_box(sgs_correct(&s).ok());
                }),
                Algorithm::Eo => time_per_call(BUDGET, || {
                    let s = normalize_spectrum(eigendecompose(&linear).expect("hermitian"));
                    std::hint::black_box(eo_correct(&s, &toolkit.curve).ok());
                }),
                // The slow iterative methods are timed once per sample.
                Algorithm::Mle => {
                    let start = Instant::now();
                    let s = normalize_spectrum(eigendecompose(&linear)?);
                    let init = eo_correct(&s, &toolkit.curve)?.output;
                    std::hint::black_box(mle_correct(&cr, &init)?);
                    start.elapsed().as_secs_f64()
                }
                Algorithm::Imle => {
                    let start = Instant::now();
                    std::hint::black_box(imle_correct(&cr, &DensityMatrix::maximally_mixed(n))?);
                    start.elapsed().as_secs_f64()
                }
            };
            full[k].1.push(seconds);
        }
        let mut order = [0usize, 1];
        if t % 2 == 1 {
            order.reverse();
        }
        for k in order {
            let seconds = match spectral[k].0 {
                Algorithm::Sgs => time_per_call(BUDGET, || {
                    std::hint::black_box(sgs_correct(&spectrum).ok());
                }),
                _ => time_per_call(BUDGET, || {
                    std::hint::black_box(eo_correct(&spectrum, &toolkit.curve).ok());
                }),
            };
            spectral[k].1.push(seconds);
        }
    }

    let row = |a: Algorithm, scope: &str, xs: &[f64]| TimingRow {
        n,
        algorithm: a.name().into(),
        scope: scope.into(),
        median_seconds: stats::median(xs),
        mean_seconds: stats::mean(xs),
        samples: xs.len(),
    };
    let mut rows: Vec<TimingRow> = full.iter().map(|(a, xs)| row(*a, "full", xs)).collect();
    rows.extend(spectral.iter().filter(|(a, _)| algorithms.contains(a)).map(|(a, xs)| row(*a, "spectral", xs)));
    Ok(rows)
}

#[derive(Debug, Clone)]
pub struct DeriveResult {
    pub n: usize,
    pub trials: Vec<TrialDistances>,
    /// Trials whose linear reconstruction was already physical.
    pub skipped: usize,
    pub profile: DistanceProfile,
    pub curve: FitCurve,
    pub chi_square: f64,
    /// Fraction of trials where the optimizer beat the SGS start.
    pub improved_fraction: f64,
}

impl DeriveResult {
    /// Mean scaled distance of the leading eigenvalue.
    pub fn leading_distance(&self) -> Option<f64> {
        self.profile.bins.first().filter(|b| b.scaled_index < 1e-12).map(|b| b.mean_scaled_distance)
    }
}

/// Optimized distances for `trials` random non-physical reconstructions of
/// `n`-qubit states with purity drawn uniformly from `state.purity_range`.
pub fn derive_trials(cfg: &ExperimentConfig, n: usize) -> Result<(Vec<TrialDistances>, usize, f64)> {
    let ps = Arc::new(cube_projectors(n));
    let shots = shots_for_total(&ps, cfg.total_counts_for(n));
    let [lo, hi] = cfg.state.purity_range;
    let results: Vec<Option<(TrialDistances, bool)>> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| -> Result<Option<(TrialDistances, bool)>> {
            let seed = derive_seed(cfg.seed ^ ((n as u64) << 56), t as u64);
            let mut rng = rng_from_seed(seed);
            let target = if hi > lo { rng.random_range(lo..=hi) } else { lo };
            let truth = benchmark_state(cfg, n, target, seed)?;
            let cr = simulate_counts(&truth, &ps, shots, noise_seed(seed, 0), cfg.noise)?;
            let s = normalize_spectrum(eigendecompose(&linear_reconstruct(&cr)?)?);
            if s.min() >= 0.0 {
                return Ok(None);
            }
            let solution = optimize_distances(&s, &cr)?;
            let improved = solution.cost < solution.start_cost;
            let mut trial = TrialDistances::new(n, s.eigenvalues.clone(), &solution);
            trial.purity = Some(purity(&truth));
            Ok(Some((trial, improved)))
        })
        .collect::<Result<_>>()?;
    let skipped = results.iter().filter(|r| r.is_none()).count();
    let kept: Vec<(TrialDistances, bool)> = results.into_iter().flatten().collect();
    let improved = kept.iter().filter(|(_, i)| *i).count() as f64 / kept.len().max(1) as f64;
    Ok((kept.into_iter().map(|(t, _)| t).collect(), skipped, improved))
}

/// Derives a weighting curve from `cfg.trials` random `cfg.n`-qubit states.
pub fn run_derive_fit(cfg: &ExperimentConfig) -> Result<DeriveResult> {
    cfg.validate()?;
    with_pool(cfg, || {
        let (trials, skipped, improved_fraction) = derive_trials(cfg, cfg.n)?;
        if trials.is_empty() {
            return Err(BenchError::Tomo(tomo_core::TomoError::DegenerateInput(
                "no trial produced a non-physical reconstruction".into(),
            )));
        }
        let profile = aggregate_profiles_with_bins(&trials, PROFILE_BINS)?;
        let (curve, chi_square) = fit_odd_series(&profile, cfg.fit_terms)?;
        Ok(DeriveResult { n: cfg.n, trials, skipped, profile, curve, chi_square, improved_fraction })
    })?
}

/// Pearson correlation of two curves sampled on `x in [0.1, 1]` in steps of
/// 0.01.
pub fn curve_correlation(a: &FitCurve, b: &FitCurve) -> Option<f64> {
    let xs: Vec<f64> = (10..=100).map(|k| k as f64 / 100.0).collect();
    let ya: Vec<f64> = xs.iter().map(|x| a.value_at_offset(x - 1.0)).collect();
    let yb: Vec<f64> = xs.iter().map(|x| b.value_at_offset(x - 1.0)).collect();
    stats::pearson(&ya, &yb)
}

#[derive(Debug, Clone, Serialize)]
pub struct ReconstructReport {
    pub algorithm: Algorithm,
    pub n: usize,
    pub total_counts: u64,
    pub linear_min_eigenvalue: f64,
    pub linear_physical: bool,
    pub output_min_eigenvalue: f64,
    pub output_trace: f64,
    pub purity: f64,
    pub infidelity: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    #[serde(skip)]
    pub output: Option<DensityMatrix>,
}

pub fn read_count_file(path: &Path) -> Result<CountRecord> {
    let text = std::fs::read_to_string(path).map_err(|source| BenchError::Read { path: path.to_path_buf(), source })?;
    CountRecord::from_json(&text).map_err(|source| BenchError::Ingestion { path: path.to_path_buf(), source })
}

pub fn read_density_file(path: &Path) -> Result<DensityMatrix> {
    let text = std::fs::read_to_string(path).map_err(|source| BenchError::Read { path: path.to_path_buf(), source })?;
    DensityMatrix::from_json(&text).map_err(|source| BenchError::Ingestion { path: path.to_path_buf(), source })
}

/// Reconstructs the state behind an ingested count file with one algorithm,
/// optionally scoring it against a reference density matrix.
pub fn reconstruct_file(counts: &Path, algorithm: Algorithm, curve: &FitCurve, reference: Option<&Path>) -> Result<ReconstructReport> {
    let cr = read_count_file(counts)?;
    let reference = reference.map(read_density_file).transpose()?;
    if let Some(r) = &reference {
        if r.qubits() != cr.qubits() {
            return Err(BenchError::Ingestion {
                path: counts.to_path_buf(),
                source: tomo_core::TomoError::DimensionMismatch { expected: r.qubits(), actual: cr.qubits() },
            });
        }
    }
    let linear = linear_reconstruct(&cr)?;
    let linear_min_eigenvalue = linear.min_eigenvalue();
    let spectrum = || -> tomo_core::Result<Spectrum> { Ok(normalize_spectrum(eigendecompose(&linear)?)) };
    let (output, iterations, converged) = match algorithm {
        Algorithm::Linear => (linear.clone(), 0, true),
        Algorithm::Sgs => {
            let r = sgs_correct(&spectrum()?)?;
            (r.output, r.iterations, r.converged)
        }
        Algorithm::Eo => {
            let r = eo_correct(&spectrum()?, curve)?;
            (r.output, r.iterations, r.converged)
        }
        Algorithm::Mle => {
            let start = eo_correct(&spectrum()?, curve)?.output;
            let r = mle_correct(&cr, &start)?;
            (r.output, r.iterations, r.converged)
        }
        Algorithm::Imle => {
            let r = imle_correct(&cr, &DensityMatrix::maximally_mixed(cr.qubits()))?;
            (r.output, r.iterations, r.converged)
        }
    };
    let infidelity = reference.as_ref().map(|r| score(&output, r)).transpose()?;
    Ok(ReconstructReport {
        algorithm,
        n: cr.qubits(),
        total_counts: cr.total_counts(),
        linear_min_eigenvalue,
        linear_physical: linear.is_physical(),
        output_min_eigenvalue: output.min_eigenvalue(),
        output_trace: output.trace().re,
        purity: purity(&output),
        infidelity,
        iterations,
        converged,
        output: Some(output),
    })
}
