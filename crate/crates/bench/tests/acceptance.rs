//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails. Runs without the libtest harness so the lines are
//! never captured and the timing criterion runs alone.

use std::process::{Command, ExitCode};
use std::sync::Arc;
use std::time::Instant;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use tomo_bench::experiments::{benchmark_state, curve_correlation, derive_trials, run_counts_sweep, run_purity_sweep, run_qubit_sweep};
use tomo_bench::stats::{self, bootstrap_positive_fraction, confidence_interval_95, log_log_slope, ols, paired_differences};
use tomo_bench::{Algorithm, ExperimentConfig, ExperimentKind};
use tomo_core::correction::{eo_correct, eo_eigenvalues, eval_fit, imle_correct, mle_correct, quadratic_cost, sgs_correct, FitCurve};
use tomo_core::derivation::{aggregate_profiles, fit_odd_series, optimize_distances};
use tomo_core::linear::linear_reconstruct;
use tomo_core::measurement::shots_for_total;
use tomo_core::rng::{derive_seed, rng_from_seed};
use tomo_core::states::{mixed_state, StateRecipe};
use tomo_core::{cube_projectors, eigendecompose, from_spectrum, infidelity, simulate_counts, CountRecord, DensityMatrix, NoiseModel, Spectrum};

const SEED: u64 = 42;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn normalized(s: Spectrum) -> Spectrum {
    let total = s.sum();
    let values = s.eigenvalues.iter().map(|v| v / total).collect();
    s.with_eigenvalues(values)
}

fn random_unitary(dim: usize, rng: &mut impl Rng) -> DMatrix<Complex64> {
    let g = DMatrix::from_fn(dim, dim, |_, _| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)));
    g.qr().q()
}

/// A unit-sum spectrum in descending order with at least one negative entry.
fn random_non_physical_spectrum(dim: usize, rng: &mut impl Rng) -> Vec<f64> {
    loop {
        let base: Vec<f64> = (0..dim).map(|_| -rng.random::<f64>().ln()).collect();
        let total: f64 = base.iter().sum();
        let sigma = rng.random_range(0.01..0.2) / dim as f64;
        let mut v: Vec<f64> = base.iter().map(|b| b / total + sigma * rng.sample::<f64, _>(StandardNormal)).collect();
        let sum: f64 = v.iter().sum();
        v.iter_mut().for_each(|x| *x /= sum);
        v.sort_by(|a, b| b.total_cmp(a));
        if v[dim - 1] < 0.0 && v[0] > 0.0 {
            return v;
        }
    }
}

fn criterion_1() -> Outcome {
    let mut rng = rng_from_seed(SEED);
    let curve = FitCurve::default();
    let (mut worst_eig, mut worst_trace, mut worst_sum) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..10_000 {
        let n = rng.random_range(2..=5);
        let dim = 1 << n;
        let values = random_non_physical_spectrum(dim, &mut rng);
        let s = Spectrum { eigenvalues: values.clone(), eigenvectors: random_unitary(dim, &mut rng) };
        for out in [sgs_correct(&s).unwrap().output, eo_correct(&s, &curve).unwrap().output] {
            worst_eig = worst_eig.min(out.min_eigenvalue());
            worst_trace = worst_trace.max((out.trace().re - 1.0).abs());
        }
        for round in eo_eigenvalues(&values, &curve).unwrap().rounds {
            worst_sum = worst_sum.max((round.redistributed - round.removed).abs());
        }
    }
    outcome(
        worst_eig >= -1e-10 && worst_trace <= 1e-9 && worst_sum <= 1e-12,
        format!("10000 spectra: min eigenvalue {worst_eig:.2e}, max |trace-1| {worst_trace:.2e}, max |sum d - a_mod| {worst_sum:.2e}"),
    )
}

fn criterion_2() -> Outcome {
    let mut worst = [0.0f64; 3];
    for n in 2..=4 {
        for k in 0..3u64 {
            let seed = derive_seed(SEED, 100 * n as u64 + k);
            let param = 0.3 + 0.2 * k as f64;
            let truth = mixed_state(&StateRecipe::new(n, param, seed)).unwrap();
            let cr = CountRecord::exact(&truth, Arc::new(cube_projectors(n)), 1000).unwrap();
            let start = DensityMatrix::maximally_mixed(n);
            worst[0] = worst[0].max(infidelity(&linear_reconstruct(&cr).unwrap(), &truth).unwrap());
            worst[2] = worst[2].max(infidelity(&imle_correct(&cr, &start).unwrap().output, &truth).unwrap());
            // MLE runs at the qubit counts the harness enables it for.
            if n <= ExperimentConfig::default().mle_max_qubits {
                worst[1] = worst[1].max(infidelity(&mle_correct(&cr, &start).unwrap().output, &truth).unwrap());
            }
        }
    }
    outcome(
        worst.iter().all(|&w| w < 1e-6),
        format!("max infidelity: linear {:.2e}, MLE (n<=3) {:.2e}, iMLE {:.2e}", worst[0], worst[1], worst[2]),
    )
}

fn criterion_3() -> Outcome {
    let mut cfg = ExperimentConfig::for_kind(ExperimentKind::CountsSweep);
    cfg.counts = vec![16_000.0];
    cfg.algorithms = vec![Algorithm::Sgs, Algorithm::Eo, Algorithm::Mle];
    let result = run_counts_sweep(&cfg).unwrap();
    let p = &result.points[0];
    let mean = |a| stats::mean(&p.infidelities(a));
    let (sgs, eo) = p.paired(Algorithm::Sgs, Algorithm::Eo);
    let sgs_eo = paired_differences(&sgs, &eo);
    let (eo2, mle) = p.paired(Algorithm::Eo, Algorithm::Mle);
    let eo_mle = paired_differences(&eo2, &mle);
    let confidence = bootstrap_positive_fraction(&sgs_eo, 10_000, SEED);
    let gap1 = stats::mean(&sgs_eo);
    let gap2 = stats::mean(&eo_mle);
    let pass = p.trials.len() >= 200
        && sgs.len() == p.trials.len()
        && mle.len() == p.trials.len()
        && gap1 > stats::std_error(&sgs_eo)
        && gap2 > stats::std_error(&eo_mle)
        && confidence >= 0.95;
    outcome(
        pass,
        format!(
            "{} trials: SGS {:.3e}, EO {:.3e}, MLE {:.3e}; SGS-EO {:.2e} (SE {:.1e}), EO-MLE {:.2e} (SE {:.1e}); bootstrap P(EO<SGS) {:.4}",
            p.trials.len(),
            mean(Algorithm::Sgs),
            mean(Algorithm::Eo),
            mean(Algorithm::Mle),
            gap1,
            stats::std_error(&sgs_eo),
            gap2,
            stats::std_error(&eo_mle),
            confidence
        ),
    )
}

fn criterion_4() -> Outcome {
    let mut cfg = ExperimentConfig::for_kind(ExperimentKind::CountsSweep);
    cfg.algorithms = vec![Algorithm::Sgs, Algorithm::Eo];
    let result = run_counts_sweep(&cfg).unwrap();
    let mut parts = Vec::new();
    let mut pass = cfg.counts.first() == Some(&1e3) && cfg.counts.last() == Some(&1e6);
    for a in [Algorithm::Sgs, Algorithm::Eo] {
        let (x, y): (Vec<f64>, Vec<f64>) = result.mean_curve(a).into_iter().unzip();
        let fit = log_log_slope(&x, &y).unwrap();
        pass &= (fit.slope + 0.5).abs() <= 0.15;
        parts.push(format!("{a} slope {:.3} (SE {:.3})", fit.slope, fit.slope_std_error));
    }
    outcome(pass, format!("{} trials over N = 1e3..1e6: {}", cfg.trials, parts.join(", ")))
}

fn criterion_5() -> Outcome {
    let cfg = ExperimentConfig::for_kind(ExperimentKind::PuritySweep);
    let result = run_purity_sweep(&cfg).unwrap();
    let mut pass = cfg.trials >= 100;
    let mut parts = Vec::new();
    for a in [Algorithm::Sgs, Algorithm::Eo, Algorithm::Mle, Algorithm::Imle] {
        let curve = result.mean_curve(a);
        let (peak, _) = curve.iter().copied().fold((f64::NAN, f64::NEG_INFINITY), |best, (p, m)| if m > best.1 { (p, m) } else { best });
        pass &= (0.8..=0.97).contains(&peak);
        parts.push(format!("{a} peak at {peak:.2}"));
    }
    outcome(pass, format!("{} trials/point: {}", cfg.trials, parts.join(", ")))
}

fn criterion_6() -> Outcome {
    let mut cfg = ExperimentConfig::for_kind(ExperimentKind::QubitSweep);
    cfg.qubits = vec![2, 3, 4, 5];
    cfg.trials = 3;
    cfg.algorithms = vec![Algorithm::Sgs, Algorithm::Eo, Algorithm::Mle];
    cfg.threads = Some(1);
    let result = run_qubit_sweep(&cfg).unwrap();
    let time = |n: usize, a: Algorithm, scope: &str| {
        result.timing.iter().find(|r| r.n == n && r.algorithm == a.name() && r.scope == scope).map(|r| r.median_seconds)
    };
    let mut pass = true;
    let mut parts = Vec::new();
    for &n in &cfg.qubits {
        let (sgs, eo) = (time(n, Algorithm::Sgs, "full").unwrap(), time(n, Algorithm::Eo, "full").unwrap());
        let gap = (eo - sgs).abs() / sgs;
        pass &= gap <= 0.15;
        parts.push(format!("n={n} EO/SGS {:.3}", eo / sgs));
    }
    let ratio = time(3, Algorithm::Mle, "full").unwrap() / time(3, Algorithm::Eo, "full").unwrap();
    pass &= ratio >= 100.0;
    let ns: Vec<f64> = cfg.qubits.iter().map(|&n| n as f64).collect();
    let logs: Vec<f64> = cfg.qubits.iter().map(|&n| time(n, Algorithm::Eo, "spectral").unwrap().ln()).collect();
    let growth = ols(&ns, &logs).unwrap().slope.exp();
    pass &= growth <= 4.0;
    outcome(pass, format!("{}; MLE/EO at n=3 {ratio:.0}x; EO steps 2-5 grow {growth:.2}x per qubit", parts.join(", ")))
}

fn criterion_7() -> Outcome {
    let curve = FitCurve::default();
    let c = &curve.coefficients;
    let naive = |x: f64| -> f64 { c.iter().enumerate().map(|(k, ck)| ck * (x - 1.0).powi(2 * k as i32 + 1)).sum() };
    let at_one = eval_fit(&curve, 1.0).unwrap();
    // Dyadic offsets keep 1 +- u exact, so any asymmetry is the evaluator's.
    let symmetry = (0..=1024)
        .map(|k| k as f64 / 1024.0)
        .map(|u| {
            let (a, b) = (eval_fit(&curve, 1.0 + u).unwrap(), eval_fit(&curve, 1.0 - u).unwrap());
            (a + b).abs() / a.abs().max(f64::MIN_POSITIVE)
        })
        .fold(0.0, f64::max);
    let gap = (eval_fit(&curve, 0.8).unwrap() - naive(0.8)).abs();
    outcome(
        at_one == 0.0 && symmetry <= f64::EPSILON && gap <= 1e-12,
        format!("F(1) = {at_one:e}, max relative |F(1+u)+F(1-u)| {symmetry:.1e}, F(0.8) = {:.12} (gap {gap:.1e})", eval_fit(&curve, 0.8).unwrap()),
    )
}

/// Non-physical 2-qubit reconstructions from benchmark states of random
/// purity, with their count records.
fn two_qubit_instances(count: usize, seed: u64) -> Vec<(Spectrum, CountRecord)> {
    let cfg = ExperimentConfig::default();
    let ps = Arc::new(cube_projectors(2));
    let shots = shots_for_total(&ps, cfg.total_counts_for(2));
    let mut out = Vec::new();
    let mut t = 0;
    while out.len() < count {
        let s = derive_seed(seed, t);
        t += 1;
        let purity = rng_from_seed(s).random_range(0.5..=1.0);
        let truth = benchmark_state(&cfg, 2, purity, s).unwrap();
        let cr = simulate_counts(&truth, &ps, shots, derive_seed(s, 1), NoiseModel::Gaussian).unwrap();
        let spectrum = normalized(eigendecompose(&linear_reconstruct(&cr).unwrap()).unwrap());
        if spectrum.min() < 0.0 {
            out.push((spectrum, cr));
        }
    }
    out
}

/// Grid search over `(l1, l2)` with `l3 = 1 - l1 - l2` and the rest zero:
/// a coarse pass then a fine pass around the best point.
fn grid_minimum(s: &Spectrum, cr: &CountRecord) -> f64 {
    let dim = s.dim();
    // Predicted probabilities are linear in the eigenvalues.
    let columns = cr.projectors.columns();
    let overlaps: Vec<[f64; 3]> = (0..columns.ncols())
        .map(|j| {
            let m = columns.column(j);
            [0, 1, 2].map(|i| s.eigenvectors.column(i).dotc(&m).norm_sqr())
        })
        .collect();
    let cost = |l1: f64, l2: f64| -> f64 {
        let l3 = 1.0 - l1 - l2;
        overlaps.iter().zip(&cr.probabilities).map(|(o, m)| (o[0] * l1 + o[1] * l2 + o[2] * l3 - m).powi(2)).sum()
    };
    let search = |c1: f64, c2: f64, half: f64, steps: usize| -> (f64, f64, f64) {
        let mut best = (f64::INFINITY, c1, c2);
        for a in 0..=steps {
            let l1 = c1 - half + 2.0 * half * a as f64 / steps as f64;
            if !(0.0..=1.0).contains(&l1) {
                continue;
            }
            for b in 0..=steps {
                let l2 = c2 - half + 2.0 * half * b as f64 / steps as f64;
                if l2 < 0.0 || l1 + l2 > 1.0 {
                    continue;
                }
                let c = cost(l1, l2);
                if c < best.0 {
                    best = (c, l1, l2);
                }
            }
        }
        best
    };
    let (_, l1, l2) = search(0.5, 0.5, 0.5, 1000);
    let (best, l1, l2) = search(l1, l2, 2e-3, 400);
    // Cross-check the fast cost against the full one.
    let mut values = vec![0.0; dim];
    values[..3].copy_from_slice(&[l1, l2, 1.0 - l1 - l2]);
    let full = quadratic_cost(&from_spectrum(&s.with_eigenvalues(values)), cr);
    assert!((full - best).abs() <= 1e-9 * best.max(1e-12) + 1e-15, "{full} vs {best}");
    best
}

/// Full quadratic cost of the eigenvalues `v + d` on the original eigenvectors.
fn cost_of(s: &Spectrum, distances: &[f64], cr: &CountRecord) -> f64 {
    let values = s.eigenvalues.iter().zip(distances).map(|(v, d)| v + d).collect();
    quadratic_cost(&from_spectrum(&s.with_eigenvalues(values)), cr)
}

fn criterion_8() -> Outcome {
    let instances = two_qubit_instances(100, derive_seed(SEED, 8));
    let beats = instances
        .iter()
        .filter(|(s, cr)| {
            let solution = optimize_distances(s, cr).unwrap();
            let uniform = quadratic_cost(&sgs_correct(s).unwrap().output, cr);
            cost_of(s, &solution.distances, cr) < uniform
        })
        .count();

    let mut worst_gap = 0.0f64;
    let mut grid_cases = 0;
    for (s, cr) in instances.iter().filter(|(s, _)| s.positive_count() == 3).take(10) {
        let solution = optimize_distances(s, cr).unwrap();
        let oracle = grid_minimum(s, cr);
        worst_gap = worst_gap.max((cost_of(s, &solution.distances, cr) - oracle).abs() / oracle);
        grid_cases += 1;
    }

    let cfg = ExperimentConfig::for_kind(ExperimentKind::DeriveFit);
    let (trials, skipped, _) = derive_trials(&cfg, 3).unwrap();
    let profile = aggregate_profiles(&trials).unwrap();
    let (curve, _) = fit_odd_series(&profile, cfg.fit_terms).unwrap();
    let r = curve_correlation(&curve, &FitCurve::default()).unwrap_or(f64::NAN);
    let leading = profile.bins.first().filter(|b| b.scaled_index < 1e-12).map(|b| b.mean_scaled_distance).unwrap_or(f64::NAN);

    let checks = [
        ("beats uniform spreading", beats >= 90),
        ("grid oracle", grid_cases > 0 && worst_gap <= 0.01),
        ("Pearson", r >= 0.9),
        ("leading distance", leading.abs() < 0.05),
    ];
    let failing: Vec<&str> = checks.iter().filter(|(_, ok)| !ok).map(|(name, _)| *name).collect();
    outcome(
        failing.is_empty(),
        format!(
            "beats uniform spreading {beats}/100; worst gap to grid {worst_gap:.2e} over {grid_cases} n+=3 cases; 3-qubit fit ({} trials, {skipped} physical skipped) Pearson r {r:.4}; scaled d1 {leading:.4}{}",
            trials.len(),
            if failing.is_empty() { String::new() } else { format!("; failing: {}", failing.join(", ")) }
        ),
    )
}

fn bell_state() -> DensityMatrix {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut phi = nalgebra::DVector::zeros(4);
    phi[0] = Complex64::new(h, 0.0);
    phi[3] = Complex64::new(h, 0.0);
    let pure = DensityMatrix::pure(&phi).unwrap();
    let mixed = pure.matrix() * Complex64::new(0.9, 0.0) + DensityMatrix::maximally_mixed(2).matrix() * Complex64::new(0.1, 0.0);
    DensityMatrix::new(2, mixed).unwrap()
}

fn criterion_9() -> Outcome {
    const TRIALS: u64 = 100;
    let truth = bell_state();
    let ps = Arc::new(cube_projectors(2));
    let shots = shots_for_total(&ps, 16_000.0);
    let dir = tempfile::tempdir().unwrap();
    let reference = dir.path().join("reference.json");
    std::fs::write(&reference, truth.to_json().unwrap()).unwrap();
    let curve = FitCurve::default();

    let mut ingested = Vec::new();
    for t in 0..TRIALS {
        let cr = simulate_counts(&truth, &ps, shots, derive_seed(SEED ^ 0x9, t), NoiseModel::Gaussian).unwrap();
        let counts = dir.path().join("counts.json");
        std::fs::write(&counts, cr.to_json().unwrap()).unwrap();
        let out = dir.path().join("out");
        let status = Command::new(env!("CARGO_BIN_EXE_tomo-bench"))
            .args(["reconstruct", "--algos", "eo", "--input"])
            .arg(&counts)
            .arg("--reference")
            .arg(&reference)
            .arg("--out")
            .arg(&out)
            .output()
            .unwrap();
        assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
        let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
        ingested.push(report["report"]["infidelity"].as_f64().unwrap());
    }
    let direct: Vec<f64> = (0..TRIALS)
        .map(|t| {
            let cr = simulate_counts(&truth, &ps, shots, derive_seed(SEED ^ 0x90, t), NoiseModel::Gaussian).unwrap();
            let s = normalized(eigendecompose(&linear_reconstruct(&cr).unwrap()).unwrap());
            infidelity(&eo_correct(&s, &curve).unwrap().output, &truth).unwrap()
        })
        .collect();
    let (a_lo, a_hi) = confidence_interval_95(&ingested);
    let (b_lo, b_hi) = confidence_interval_95(&direct);
    outcome(
        a_lo <= b_hi && b_lo <= a_hi,
        format!("ingested EO infidelity 95% CI [{a_lo:.3e}, {a_hi:.3e}], in-memory [{b_lo:.3e}, {b_hi:.3e}]"),
    )
}

fn main() -> ExitCode {
    let criteria: [(u32, fn() -> Outcome); 9] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
    ];
    // Numeric arguments select a subset, e.g. `cargo test --test acceptance -- 3 8`.
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    let mut ran = 0;
    for (k, run) in criteria {
        if !selected.is_empty() && !selected.contains(&k) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let o = run();
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {k}: {verdict} ({:.1} s) {}", start.elapsed().as_secs_f64(), o.detail);
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {} of {ran} criteria passed", ran - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
