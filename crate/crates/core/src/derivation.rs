//! Re-deriving the EO weighting curve: optimal eigenvalue shifts per trial,
//! scaled distance profiles, and an odd power-series fit.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::correction::{sgs_eigenvalues, FitCurve};
use crate::density::Spectrum;
use crate::error::{Result, TomoError};
use crate::measurement::CountRecord;
use crate::optim::{cobyla, projected_nelder_mead, CobylaOptions, LinearConstraint, NelderMeadOptions};

/// Uniform bins on the scaled index axis `[0, 1]`.
pub const PROFILE_BINS: usize = 64;

/// Points with a smaller scaled index count as the leading eigenvalue.
const LEADING_INDEX: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistanceOptimizer {
    Cobyla,
    ProjectedNelderMead,
}

#[derive(Debug, Clone)]
pub struct DistanceOptions {
    pub optimizer: DistanceOptimizer,
    pub cobyla: CobylaOptions,
    pub simplex: NelderMeadOptions,
    /// Largest constraint violation accepted from the primary optimizer
    /// before falling back to the projected simplex search.
    pub feasibility_tolerance: f64,
}

impl Default for DistanceOptions {
    fn default() -> Self {
        Self {
            optimizer: DistanceOptimizer::Cobyla,
            cobyla: CobylaOptions::default(),
            simplex: NelderMeadOptions { initial_step: 0.01, ..Default::default() },
            feasibility_tolerance: 1e-9,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DistanceSolution {
    /// `d_i` for every eigenvalue, in descending eigenvalue order.
    pub distances: Vec<f64>,
    pub cost: f64,
    /// Cost at the starting point (the SGS result).
    pub start_cost: f64,
    pub positive_count: usize,
    /// Optimizer that produced `distances`.
    pub method: DistanceOptimizer,
    /// False when the optimizers failed to improve on or reach a verified
    /// feasible point; `distances` is then the best feasible point seen.
    pub converged: bool,
}

/// Quadratic cost in the free variables `y = (d_1, ..., d_{n_+ - 1})`:
/// `C(y) = y^T G y + 2 g.y + c`.
struct ReducedCost {
    gram: DMatrix<f64>,
    linear: DVector<f64>,
    constant: f64,
}

impl ReducedCost {
    fn value(&self, y: &[f64]) -> f64 {
        let y = DVector::from_column_slice(y);
        (y.dot(&(&self.gram * &y)) + 2.0 * self.linear.dot(&y) + self.constant).max(0.0)
    }
}

/// Shifts `d_i` that minimize `sum_j [sum_{i<=n_+} d_i A_ji + c0_j]^2` where
/// `A_ji = |<v_i|m_j>|^2` and `c0_j = -sum_{i>n_+} v_i A_ji`.
///
/// Eigenvalues past the `n_+` positive ones are removed (`d_i = -v_i`),
/// `d_{n_+}` is fixed by the trace, and `d_i >= -v_i` holds for the rest.
/// The search starts at the SGS result.
pub fn optimize_distances(s: &Spectrum, cr: &CountRecord) -> Result<DistanceSolution> {
    optimize_distances_with(s, cr, &DistanceOptions::default())
}

pub fn optimize_distances_with(s: &Spectrum, cr: &CountRecord, options: &DistanceOptions) -> Result<DistanceSolution> {
    let dim = s.dim();
    if cr.projectors.dim() != dim {
        return Err(TomoError::DimensionMismatch { expected: dim, actual: cr.projectors.dim() });
    }
    let v = &s.eigenvalues;
    let positive_count = s.positive_count();
    if positive_count == 0 {
        return Err(TomoError::DegenerateInput("no positive eigenvalues".into()));
    }
    let removed: f64 = v[positive_count..].iter().sum();

    // |<v_i|m_j>|^2 for every eigenvector and projector.
    let overlaps = (cr.projectors.columns().adjoint() * &s.eigenvectors).map(|z| z.norm_sqr());
    let jcount = overlaps.nrows();
    let mut distances: Vec<f64> = (0..dim).map(|i| if i < positive_count { 0.0 } else { -v[i] }).collect();

    let k = positive_count - 1;
    let last = positive_count - 1;
    // Residual: sum_{i<n_+} y_i (A_i - A_last) + removed * A_last + c0.
    let mut q = DMatrix::<f64>::zeros(jcount, k);
    let mut b = DVector::<f64>::zeros(jcount);
    for j in 0..jcount {
        for i in 0..k {
            q[(j, i)] = overlaps[(j, i)] - overlaps[(j, last)];
        }
        let c0: f64 = (positive_count..dim).map(|i| -v[i] * overlaps[(j, i)]).sum();
        b[j] = removed * overlaps[(j, last)] + c0;
    }
    let reduced = ReducedCost { gram: q.transpose() * &q, linear: q.transpose() * &b, constant: b.dot(&b) };

    let sgs = sgs_eigenvalues(v)?;
    let start: Vec<f64> = (0..k).map(|i| sgs.eigenvalues[i] - v[i]).collect();
    let start_cost = reduced.value(&start);

    let expand = |y: &[f64], distances: &mut Vec<f64>| {
        distances[..k].copy_from_slice(y);
        distances[last] = removed - y.iter().sum::<f64>();
    };

    if k == 0 {
        expand(&[], &mut distances);
        return Ok(DistanceSolution {
            distances,
            cost: start_cost,
            start_cost,
            positive_count,
            method: options.optimizer,
            converged: true,
        });
    }

    let violation = |y: &[f64]| {
        let lower = (0..k).map(|i| -v[i] - y[i]).fold(0.0, f64::max);
        lower.max(y.iter().sum::<f64>() - removed - v[last])
    };

    let mut best = (start.clone(), start_cost);
    let mut method = options.optimizer;
    let mut converged = false;

    if options.optimizer == DistanceOptimizer::Cobyla {
        let bounds: Vec<(f64, f64)> = (0..k).map(|i| (-v[i], 1.0 - v[i])).collect();
        let cap = LinearConstraint { coefficients: vec![-1.0; k], offset: removed + v[last] };
        let cobyla_options = CobylaOptions { rho_begin: removed.abs().max(1e-4), ..options.cobyla.clone() };
        let found = cobyla(|y| reduced.value(y), &start, &bounds, &[cap], &cobyla_options);
        if found.success && violation(&found.x) <= options.feasibility_tolerance && found.value <= start_cost {
            best = (found.x, found.value);
            converged = true;
        }
    }

    if !converged {
        // Projected simplex search over lambda_i = v_i + y_i, i < n_+, which
        // must lie in the capped simplex {x >= 0, sum x <= 1}.
        method = DistanceOptimizer::ProjectedNelderMead;
        let x0: Vec<f64> = (0..k).map(|i| v[i] + best.0[i]).collect();
        let objective = |x: &[f64]| {
            let y: Vec<f64> = x.iter().zip(v).map(|(xi, vi)| xi - vi).collect();
            reduced.value(&y)
        };
        let found = projected_nelder_mead(objective, &x0, project_capped_simplex, &options.simplex);
        if found.value <= best.1 {
            best = ((0..k).map(|i| found.x[i] - v[i]).collect(), found.value);
        }
        converged = found.converged;
    }

    expand(&best.0, &mut distances);
    Ok(DistanceSolution { distances, cost: best.1, start_cost, positive_count, method, converged })
}

/// Euclidean projection onto `{x >= 0, sum x <= 1}`.
pub fn project_capped_simplex(x: &mut [f64]) {
    let clipped_sum: f64 = x.iter().map(|v| v.max(0.0)).sum();
    if clipped_sum <= 1.0 {
        x.iter_mut().for_each(|v| *v = v.max(0.0));
        return;
    }
    let mut sorted = x.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (j, u) in sorted.iter().enumerate() {
        cumulative += u;
        let candidate = (cumulative - 1.0) / (j + 1) as f64;
        if u - candidate > 0.0 {
            theta = candidate;
        }
    }
    x.iter_mut().for_each(|v| *v = (*v - theta).max(0.0));
}

/// One trial's spectrum and optimized shifts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialDistances {
    pub n: usize,
    pub eigenvalues: Vec<f64>,
    pub distances: Vec<f64>,
    pub positive_count: usize,
    /// Purity of the generating state, when known.
    pub purity: Option<f64>,
}

impl TrialDistances {
    pub fn new(n: usize, eigenvalues: Vec<f64>, solution: &DistanceSolution) -> Self {
        Self { n, eigenvalues, distances: solution.distances.clone(), positive_count: solution.positive_count, purity: None }
    }

    /// `((i-1)/(2^n-1), d_i 2^n / sum_{i>n_+} |d_i|)`, or `None` when no
    /// eigenvalue was removed.
    pub fn scaled_points(&self) -> Option<Vec<(f64, f64)>> {
        let dim = self.distances.len();
        let removed: f64 = self.distances[self.positive_count..].iter().map(|d| d.abs()).sum();
        if removed <= 0.0 || dim < 2 {
            return None;
        }
        let scale = dim as f64 / removed;
        Some(self.distances.iter().enumerate().map(|(i, d)| (i as f64 / (dim - 1) as f64, d * scale)).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileBin {
    /// Mean scaled index of the points in the bin.
    pub scaled_index: f64,
    pub mean_scaled_distance: f64,
    pub std: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DistanceProfile {
    pub qubits: Vec<usize>,
    /// Trials that contributed points.
    pub trials: usize,
    pub purity_range: Option<(f64, f64)>,
    /// Non-empty bins in increasing index order.
    pub bins: Vec<ProfileBin>,
}

impl DistanceProfile {
    /// Piecewise-linear interpolation between bin centroids, clamped at the
    /// ends.
    pub fn interpolate(&self, x: f64) -> Option<f64> {
        let first = self.bins.first()?;
        let last = self.bins.last()?;
        if x <= first.scaled_index {
            return Some(first.mean_scaled_distance);
        }
        if x >= last.scaled_index {
            return Some(last.mean_scaled_distance);
        }
        let k = self.bins.partition_point(|b| b.scaled_index <= x);
        let (a, b) = (&self.bins[k - 1], &self.bins[k]);
        let t = (x - a.scaled_index) / (b.scaled_index - a.scaled_index);
        Some(a.mean_scaled_distance + t * (b.mean_scaled_distance - a.mean_scaled_distance))
    }

    /// Root-mean-square gap to `other` over `points` evenly spaced indices in
    /// `(0, 1]`, skipping the leading eigenvalue.
    pub fn rms_gap(&self, other: &Self, points: usize) -> Option<f64> {
        let mut acc = 0.0;
        for p in 1..=points {
            let x = p as f64 / points as f64;
            acc += (self.interpolate(x)? - other.interpolate(x)?).powi(2);
        }
        Some((acc / points as f64).sqrt())
    }

    /// Pooled standard deviation across bins, excluding the leading one.
    pub fn mean_spread(&self) -> f64 {
        let spreads: Vec<f64> = self.bins.iter().filter(|b| b.scaled_index >= LEADING_INDEX).map(|b| b.std).collect();
        if spreads.is_empty() {
            return 0.0;
        }
        (spreads.iter().map(|s| s * s).sum::<f64>() / spreads.len() as f64).sqrt()
    }
}

/// Bins scaled points from every trial onto [`PROFILE_BINS`] uniform bins and
/// averages within each bin. Trials without removed eigenvalues are skipped.
pub fn aggregate_profiles(trials: &[TrialDistances]) -> Result<DistanceProfile> {
    aggregate_profiles_with_bins(trials, PROFILE_BINS)
}

pub fn aggregate_profiles_with_bins(trials: &[TrialDistances], bins: usize) -> Result<DistanceProfile> {
    if trials.is_empty() || bins == 0 {
        return Err(TomoError::DegenerateInput("no trials to aggregate".into()));
    }
    let mut index_sum = vec![0.0; bins];
    // Welford running mean and squared deviation per bin.
    let mut mean = vec![0.0; bins];
    let mut m2 = vec![0.0; bins];
    let mut count = vec![0usize; bins];
    let mut qubits = Vec::new();
    let mut used = 0;
    let mut purity_range: Option<(f64, f64)> = None;

    for trial in trials {
        let Some(points) = trial.scaled_points() else { continue };
        used += 1;
        if !qubits.contains(&trial.n) {
            qubits.push(trial.n);
        }
        if let Some(p) = trial.purity {
            purity_range = Some(purity_range.map_or((p, p), |(lo, hi)| (lo.min(p), hi.max(p))));
        }
        for (x, y) in points {
            let b = ((x * bins as f64) as usize).min(bins - 1);
            index_sum[b] += x;
            count[b] += 1;
            let delta = y - mean[b];
            mean[b] += delta / count[b] as f64;
            m2[b] += delta * (y - mean[b]);
        }
    }
    qubits.sort_unstable();

    let bins = (0..bins)
        .filter(|&b| count[b] > 0)
        .map(|b| {
            let c = count[b] as f64;
            let variance = if count[b] > 1 { m2[b] / (c - 1.0) } else { 0.0 };
            ProfileBin { scaled_index: index_sum[b] / c, mean_scaled_distance: mean[b], std: variance.sqrt(), count: count[b] }
        })
        .collect();
    Ok(DistanceProfile { qubits, trials: used, purity_range, bins })
}

/// Least-squares fit of `sum_k c_k (x-1)^(2k-1)` to the profile on the axis
/// `x = 2 * scaled_index`, leaving out the leading-eigenvalue point.
/// Returns the curve and the mean squared residual.
pub fn fit_odd_series(profile: &DistanceProfile, terms: usize) -> Result<(FitCurve, f64)> {
    let points: Vec<(f64, f64)> = profile
        .bins
        .iter()
        .filter(|b| b.scaled_index >= LEADING_INDEX)
        .map(|b| (2.0 * b.scaled_index, b.mean_scaled_distance))
        .collect();
    fit_odd_series_points(&points, terms)
}

/// As [`fit_odd_series`] on raw `(x, y)` points with `x` in `[0, 2]`.
pub fn fit_odd_series_points(points: &[(f64, f64)], terms: usize) -> Result<(FitCurve, f64)> {
    if terms == 0 || points.len() < terms {
        return Err(TomoError::IllConditioned { terms });
    }
    if let Some(&(x, _)) = points.iter().find(|(x, _)| !(0.0..=2.0).contains(x)) {
        return Err(TomoError::DomainError { x });
    }
    let design = DMatrix::from_fn(points.len(), terms, |r, k| (points[r].0 - 1.0).powi(2 * k as i32 + 1));
    let target = DVector::from_iterator(points.len(), points.iter().map(|p| p.1));

    let svd = design.clone().svd(true, true);
    let largest = svd.singular_values.max();
    let cutoff = largest * 1e-12 * points.len().max(terms) as f64;
    let rank = svd.singular_values.iter().filter(|&&s| s > cutoff).count();
    if rank < terms {
        return Err(TomoError::IllConditioned { terms });
    }
    let c = svd.solve(&target, cutoff).map_err(|_| TomoError::IllConditioned { terms })?;
    let residual = &design * &c - &target;
    let chi_square = residual.norm_squared() / points.len() as f64;
    Ok((FitCurve::new(c.iter().copied().collect()), chi_square))
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::density::eigendecompose;
    use crate::linear::linear_reconstruct;
    use crate::measurement::{cube_projectors, simulate_counts, NoiseModel};
    use crate::states::{rank_deficient_state, StateRecipe};

    fn non_physical_instance(n: usize, positives: Option<usize>, mut seed: u64) -> (Spectrum, CountRecord) {
        let ps = Arc::new(cube_projectors(n));
        loop {
            let truth = rank_deficient_state(&StateRecipe::new(n, 0.9, seed).with_zero_fraction(0.5)).unwrap();
            let cr = simulate_counts(&truth, &ps, 100, seed, NoiseModel::Gaussian).unwrap();
            let s = eigendecompose(&linear_reconstruct(&cr).unwrap()).unwrap();
            if s.min() < 0.0 && positives.map_or(true, |p| s.positive_count() == p) {
                return (s, cr);
            }
            seed += 1000;
        }
    }

    /// Direct residual sum, built without the reduced form.
    fn brute_cost(s: &Spectrum, cr: &CountRecord, d: &[f64]) -> f64 {
        let vectors: Vec<_> = (0..s.dim()).map(|i| s.eigenvector(i)).collect();
        cr.projectors
            .projectors()
            .iter()
            .map(|p| {
                let r: f64 = vectors.iter().zip(d).map(|(v, di)| di * v.dotc(&p.vector).norm_sqr()).sum();
                r * r
            })
            .sum()
    }

    #[test]
    fn physical_input_needs_no_shift() {
        let ps = Arc::new(cube_projectors(2));
        let truth = rank_deficient_state(&StateRecipe::new(2, 0.5, 1)).unwrap();
        let cr = CountRecord::exact(&truth, ps, 100).unwrap();
        let s = eigendecompose(&linear_reconstruct(&cr).unwrap()).unwrap();
        let s = s.with_eigenvalues(s.eigenvalues.iter().map(|v| v.max(0.0)).collect());
        let s = s.with_eigenvalues(s.eigenvalues.iter().map(|v| v / s.sum()).collect());
        let out = optimize_distances(&s, &cr).unwrap();
        assert!(out.cost < 1e-20);
        assert!(out.distances.iter().all(|d| d.abs() < 1e-9), "{:?}", out.distances);
    }

    #[test]
    fn solutions_are_feasible_and_beat_sgs() {
        for seed in 0..20 {
            let (s, cr) = non_physical_instance(2, None, seed);
            let out = optimize_distances(&s, &cr).unwrap();
            let lambdas: Vec<f64> = s.eigenvalues.iter().zip(&out.distances).map(|(v, d)| v + d).collect();
            assert!(lambdas.iter().all(|&l| l >= -1e-9), "{lambdas:?}");
            assert!(out.distances.iter().sum::<f64>().abs() < 1e-9);
            for i in out.positive_count..s.dim() {
                assert_eq!(out.distances[i], -s.eigenvalues[i]);
            }
            assert!(out.cost <= out.start_cost + 1e-15);
            assert!((brute_cost(&s, &cr, &out.distances) - out.cost).abs() < 1e-12);
        }
    }

    #[test]
    fn matches_dense_grid_with_two_free_variables() {
        for seed in [3, 40, 77] {
            let (s, cr) = non_physical_instance(2, Some(3), seed);
            let out = optimize_distances(&s, &cr).unwrap();
            let v = &s.eigenvalues;
            let removed = v[3];
            let mut grid_best = f64::INFINITY;
            let steps = 1000;
            for a in 0..=steps {
                let l1 = a as f64 / steps as f64;
                for b in 0..=(steps - a) {
                    let l2 = b as f64 / steps as f64;
                    let (d1, d2) = (l1 - v[0], l2 - v[1]);
                    let d3 = removed - d1 - d2;
                    if v[2] + d3 < 0.0 {
                        continue;
                    }
                    grid_best = grid_best.min(brute_cost(&s, &cr, &[d1, d2, d3, -v[3]]));
                }
            }
            assert!(out.cost <= grid_best * 1.01 + 1e-15, "optimizer {} vs grid {}", out.cost, grid_best);
        }
    }

    #[test]
    fn fallback_agrees_with_cobyla() {
        let (s, cr) = non_physical_instance(3, None, 5);
        let primary = optimize_distances(&s, &cr).unwrap();
        let options = DistanceOptions { optimizer: DistanceOptimizer::ProjectedNelderMead, ..Default::default() };
        let fallback = optimize_distances_with(&s, &cr, &options).unwrap();
        assert_eq!(fallback.method, DistanceOptimizer::ProjectedNelderMead);
        assert!(fallback.cost <= fallback.start_cost);
        assert!((fallback.cost - primary.cost).abs() <= 0.05 * primary.start_cost.max(1e-12));
    }

    #[test]
    fn capped_simplex_projection() {
        let mut x = [0.2, -0.1, 0.3];
        project_capped_simplex(&mut x);
        assert_eq!(x, [0.2, 0.0, 0.3]);
        let mut x = [0.9, 0.6, -0.2];
        project_capped_simplex(&mut x);
        assert!((x[0] - 0.65).abs() < 1e-15 && (x[1] - 0.35).abs() < 1e-15 && x[2] == 0.0);
    }

    fn trial(distances: Vec<f64>, positive_count: usize) -> TrialDistances {
        let n = distances.len().trailing_zeros() as usize;
        TrialDistances { n, eigenvalues: vec![0.0; distances.len()], distances, positive_count, purity: Some(0.7) }
    }

    #[test]
    fn single_trial_profile_is_its_points() {
        let t = trial(vec![0.0, 0.02, -0.01, -0.01], 3);
        let profile = aggregate_profiles(std::slice::from_ref(&t)).unwrap();
        let points = t.scaled_points().unwrap();
        assert_eq!(profile.bins.len(), 4);
        for (bin, (x, y)) in profile.bins.iter().zip(points) {
            assert!((bin.scaled_index - x).abs() < 1e-15);
            assert!((bin.mean_scaled_distance - y).abs() < 1e-15);
        }
        // d_4 = -0.01 of a removed total 0.01, scaled by 2^2.
        assert!((profile.bins[3].mean_scaled_distance + 4.0).abs() < 1e-12);
        assert_eq!(profile.purity_range, Some((0.7, 0.7)));
    }

    #[test]
    fn copies_average_to_the_trial() {
        let t = trial(vec![0.001, 0.03, -0.011, -0.02, 0.0, 0.0, 0.0, 0.0], 3);
        let one = aggregate_profiles(std::slice::from_ref(&t)).unwrap();
        let many = aggregate_profiles(&vec![t; 7]).unwrap();
        assert_eq!(many.trials, 7);
        for (a, b) in one.bins.iter().zip(&many.bins) {
            assert!((a.mean_scaled_distance - b.mean_scaled_distance).abs() < 1e-12);
            assert!(b.std < 1e-12);
        }
    }

    #[test]
    fn fit_recovers_shipped_coefficients() {
        let truth = FitCurve::default();
        let points: Vec<(f64, f64)> =
            (1..64).map(|i| 2.0 * i as f64 / 63.0).map(|x| (x, truth.value_at_offset(x - 1.0))).collect();
        let (fit, chi_square) = fit_odd_series_points(&points, 6).unwrap();
        for (a, b) in fit.coefficients.iter().zip(&truth.coefficients) {
            assert!((a - b).abs() < 1e-6, "{:?}", fit.coefficients);
        }
        assert!(chi_square < 1e-12);
    }

    #[test]
    fn single_term_is_projection() {
        // y = (x-1)^3 fitted by c (x-1): c = sum u^4 / sum u^2.
        let points: Vec<(f64, f64)> = (0..=10).map(|i| i as f64 * 0.2).map(|x| (x, (x - 1.0).powi(3))).collect();
        let (fit, chi_square) = fit_odd_series_points(&points, 1).unwrap();
        let u4: f64 = points.iter().map(|p| (p.0 - 1.0).powi(4)).sum();
        let u2: f64 = points.iter().map(|p| (p.0 - 1.0).powi(2)).sum();
        let c = u4 / u2;
        assert!((fit.coefficients[0] - c).abs() < 1e-12);
        let remainder: f64 = points.iter().map(|p| (p.1 - c * (p.0 - 1.0)).powi(2)).sum::<f64>() / points.len() as f64;
        assert!((chi_square - remainder).abs() < 1e-14);
        assert_eq!(fit.value_at_offset(0.3), -fit.value_at_offset(-0.3));
    }

    #[test]
    fn too_many_terms_is_ill_conditioned() {
        let points = [(0.5, 1.0), (1.5, -1.0)];
        assert!(matches!(fit_odd_series_points(&points, 3), Err(TomoError::IllConditioned { .. })));
        // Symmetric pairs only determine odd terms up to the number of
        // distinct |x - 1| values.
        let points = [(0.5, 1.0), (1.5, -1.0), (0.5, 1.1), (1.5, -1.1)];
        assert!(matches!(fit_odd_series_points(&points, 2), Err(TomoError::IllConditioned { .. })));
    }
}
