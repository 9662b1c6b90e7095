//! Derivative-free minimizers.

mod nelder_mead;

pub use nelder_mead::{nelder_mead, projected_nelder_mead, Minimum, NelderMeadOptions};

/// `coefficients . x + offset >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraint {
    pub coefficients: Vec<f64>,
    pub offset: f64,
}

impl LinearConstraint {
    pub fn value(&self, x: &[f64]) -> f64 {
        self.coefficients.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + self.offset
    }
}

#[derive(Debug, Clone)]
pub struct CobylaOptions {
    pub rho_begin: f64,
    pub xtol_abs: f64,
    pub ftol_abs: f64,
    pub max_evals: usize,
}

impl Default for CobylaOptions {
    fn default() -> Self {
        Self { rho_begin: 0.05, xtol_abs: 1e-10, ftol_abs: 1e-15, max_evals: 20_000 }
    }
}

#[derive(Debug, Clone)]
pub struct ConstrainedMinimum {
    pub x: Vec<f64>,
    pub value: f64,
    /// Largest violation `max(0, -c(x))` over all constraints and bounds.
    pub max_violation: f64,
    /// The optimizer reported a normal termination.
    pub success: bool,
}

/// COBYLA over box `bounds` plus linear inequality constraints.
pub fn cobyla<F>(f: F, x0: &[f64], bounds: &[(f64, f64)], constraints: &[LinearConstraint], options: &CobylaOptions) -> ConstrainedMinimum
where
    F: Fn(&[f64]) -> f64,
{
    let objective = |x: &[f64], _: &mut ()| f(x);
    let closures: Vec<_> = constraints.iter().map(|c| move |x: &[f64], _: &mut ()| c.value(x)).collect();
    let refs: Vec<&dyn cobyla::Func<()>> = closures.iter().map(|c| c as &dyn cobyla::Func<()>).collect();
    let tolerances = cobyla::StopTols {
        ftol_abs: options.ftol_abs,
        xtol_abs: vec![options.xtol_abs; x0.len()],
        ..Default::default()
    };

    let (success, x) = match cobyla::minimize(
        objective,
        x0,
        bounds,
        &refs,
        (),
        options.max_evals,
        cobyla::RhoBeg::All(options.rho_begin),
        Some(tolerances),
    ) {
        Ok((_, x, _)) => (true, x),
        Err((_, x, _)) => (false, x),
    };

    let bound_violation = x
        .iter()
        .zip(bounds)
        .map(|(v, (lo, hi))| (lo - v).max(v - hi).max(0.0))
        .fold(0.0, f64::max);
    let max_violation = constraints.iter().map(|c| (-c.value(&x)).max(0.0)).fold(bound_violation, f64::max);
    ConstrainedMinimum { value: f(&x), x, max_violation, success }
}
