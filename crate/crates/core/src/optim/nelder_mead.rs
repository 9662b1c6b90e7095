//! Nelder-Mead simplex search with restarts and an optional projection onto
//! a convex feasible set.
//!
//! Reflection, expansion, contraction and shrink coefficients follow the
//! dimension-adaptive choice of Gao and Han (2012), which keeps the method
//! effective beyond a handful of variables.

#[derive(Debug, Clone)]
pub struct NelderMeadOptions {
    /// Edge length of the initial simplex along each axis.
    pub initial_step: f64,
    /// Stop once `f_worst - f_best` falls below this.
    pub ftol_abs: f64,
    /// Stop once every vertex lies within this distance of the best one.
    pub xtol_abs: f64,
    /// Budget over all restarts.
    pub max_evals: usize,
    /// Fresh simplices built around the incumbent after convergence.
    pub restarts: usize,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self { initial_step: 0.05, ftol_abs: 1e-10, xtol_abs: 1e-10, max_evals: 100_000, restarts: 4 }
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub iterations: usize,
    /// False when the evaluation budget ran out first.
    pub converged: bool,
}

pub fn nelder_mead<F>(f: F, x0: &[f64], options: &NelderMeadOptions) -> Minimum
where
    F: FnMut(&[f64]) -> f64,
{
    projected_nelder_mead(f, x0, |_: &mut [f64]| {}, options)
}

/// Nelder-Mead where every trial point is first mapped through `project`.
/// With a projection onto a convex set, all evaluated points are feasible.
pub fn projected_nelder_mead<F, P>(mut f: F, x0: &[f64], project: P, options: &NelderMeadOptions) -> Minimum
where
    F: FnMut(&[f64]) -> f64,
    P: Fn(&mut [f64]),
{
    let mut best = x0.to_vec();
    project(&mut best);
    let mut best_value = f(&best);
    let mut evaluations = 1;
    let mut iterations = 0;
    let mut converged = false;
    let mut step = options.initial_step;

    for _ in 0..=options.restarts {
        if evaluations >= options.max_evals {
            converged = false;
            break;
        }
        let run = simplex_run(&mut f, &best, best_value, step, &project, options, options.max_evals - evaluations);
        evaluations += run.evaluations;
        iterations += run.iterations;
        converged = run.converged;
        let improvement = best_value - run.value;
        if run.value <= best_value {
            best = run.x;
            best_value = run.value;
        }
        if converged && improvement <= options.ftol_abs {
            break;
        }
        step = (step * 0.5).max(10.0 * options.xtol_abs);
    }

    Minimum { x: best, value: best_value, evaluations, iterations, converged }
}

struct Run {
    x: Vec<f64>,
    value: f64,
    evaluations: usize,
    iterations: usize,
    converged: bool,
}

fn simplex_run<F, P>(
    f: &mut F,
    start: &[f64],
    start_value: f64,
    step: f64,
    project: &P,
    options: &NelderMeadOptions,
    budget: usize,
) -> Run
where
    F: FnMut(&[f64]) -> f64,
    P: Fn(&mut [f64]),
{
    let dim = start.len();
    let nf = dim.max(1) as f64;
    let (alpha, gamma) = (1.0, 1.0 + 2.0 / nf);
    let rho = (0.75 - 1.0 / (2.0 * nf)).max(0.25);
    let sigma = (1.0 - 1.0 / nf).max(0.25);

    let mut evaluations = 0usize;
    let mut eval = |x: &mut Vec<f64>, evaluations: &mut usize| -> f64 {
        project(x);
        *evaluations += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut vertices: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
    vertices.push((start.to_vec(), start_value));
    for i in 0..dim {
        let mut x = start.to_vec();
        x[i] += step;
        let mut v = eval(&mut x, &mut evaluations);
        // A projection can collapse the vertex onto the start; step the
        // other way instead.
        if x == start {
            x[i] -= 2.0 * step;
            v = eval(&mut x, &mut evaluations);
        }
        vertices.push((x, v));
    }

    let mut iterations = 0;
    let mut converged = false;
    while evaluations < budget {
        vertices.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (best_value, worst_value) = (vertices[0].1, vertices[dim].1);
        let spread = worst_value - best_value;
        let size = vertices[1..]
            .iter()
            .map(|(x, _)| x.iter().zip(&vertices[0].0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if (spread.is_finite() && spread <= options.ftol_abs) || size <= options.xtol_abs {
            converged = true;
            break;
        }
        iterations += 1;

        let mut centroid = vec![0.0; dim];
        for (x, _) in &vertices[..dim] {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi / nf;
            }
        }
        let along = |t: f64| -> Vec<f64> {
            centroid.iter().zip(&vertices[dim].0).map(|(c, w)| c + t * (c - w)).collect()
        };

        let mut reflected = along(alpha);
        let fr = eval(&mut reflected, &mut evaluations);
        if fr < vertices[0].1 {
            let mut expanded = along(alpha * gamma);
            let fe = eval(&mut expanded, &mut evaluations);
            vertices[dim] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
            continue;
        }
        if fr < vertices[dim - 1].1 {
            vertices[dim] = (reflected, fr);
            continue;
        }
        let (mut contracted, outside) = if fr < worst_value { (along(alpha * rho), true) } else { (along(-rho), false) };
        let fc = eval(&mut contracted, &mut evaluations);
        if (outside && fc <= fr) || (!outside && fc < worst_value) {
            vertices[dim] = (contracted, fc);
            continue;
        }
        let anchor = vertices[0].0.clone();
        for (x, v) in vertices.iter_mut().skip(1) {
            for (xi, ai) in x.iter_mut().zip(&anchor) {
                *xi = ai + sigma * (*xi - ai);
            }
            *v = eval(x, &mut evaluations);
        }
    }

    vertices.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, value) = vertices.swap_remove(0);
    Run { x, value, evaluations, iterations, converged }
}
