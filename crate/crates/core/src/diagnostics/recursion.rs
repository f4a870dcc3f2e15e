use super::RetainedStep;
use crate::error::{Error, Result};
use crate::optimizers::corrected_momentum;

/// Outcome of re-deriving `ε_t` through the error dynamics.
#[derive(Debug, Clone, PartialEq)]
pub struct RecursionReport {
    pub steps_checked: usize,
    pub max_abs_deviation: f64,
    pub max_eps_norm: f64,
}

impl RecursionReport {
    /// `max deviation ≤ rel_tol · (1 + max ‖ε_t‖)`.
    pub fn holds(&self, rel_tol: f64) -> bool {
        self.max_abs_deviation <= rel_tol * (1.0 + self.max_eps_norm)
    }
}

fn consecutive_pairs(steps: &[RetainedStep]) -> Result<impl Iterator<Item = (&RetainedStep, &RetainedStep)>> {
    if steps.is_empty() {
        return Err(Error::invalid("no retained steps to verify"));
    }
    if steps.windows(2).any(|w| w[1].t != w[0].t + 1) {
        return Err(Error::invalid(
            "error recursion needs consecutive retained steps (log stride 1)",
        ));
    }
    if steps.iter().skip(1).any(|s| s.tilde_prev.is_none()) {
        return Err(Error::invalid(
            "retained step lacks g̃_{t-1}; only corrected-momentum runs can be verified",
        ));
    }
    Ok(steps.windows(2).map(|w| (&w[0], &w[1])))
}

/// Checks `ε_t = (1−a_t)ε_{t−1} + a_t(g_t − ∇f(x_t)) + (1−a_t)Z_t` on every
/// consecutive pair, with `ε_t = d_t − ∇f(x_t)` computed directly and the
/// right-hand side assembled from the retained `g_t`, `g̃_{t−1}` and exact
/// gradients.
pub fn verify_error_recursion(steps: &[RetainedStep]) -> Result<RecursionReport> {
    let pairs = consecutive_pairs(steps)?;
    let mut max_dev = 0.0f64;
    let mut max_eps = steps[0]
        .direction
        .dist_sq(&steps[0].exact_grad)?
        .sqrt();
    let mut checked = 0;
    for (prev, cur) in pairs {
        let a = cur.a;
        let tilde = cur.tilde_prev.as_ref().expect("checked above");
        let mut eps_sq = 0.0;
        for i in 0..cur.direction.dim() {
            let eps_prev = prev.direction[i] - prev.exact_grad[i];
            let eps = cur.direction[i] - cur.exact_grad[i];
            let z = (cur.sample_grad[i] - tilde[i]) - (cur.exact_grad[i] - prev.exact_grad[i]);
            let rhs = (1.0 - a) * eps_prev + a * (cur.sample_grad[i] - cur.exact_grad[i]) + (1.0 - a) * z;
            max_dev = max_dev.max((eps - rhs).abs());
            eps_sq += eps * eps;
        }
        max_eps = max_eps.max(eps_sq.sqrt());
        checked += 1;
    }
    Ok(RecursionReport {
        steps_checked: checked,
        max_abs_deviation: max_dev,
        max_eps_norm: max_eps,
    })
}

/// Number of steps where the logged `d_t` is not bitwise equal to
/// `g_t + (1 − a_t)(d_{t−1} − g̃_{t−1})` recomputed from the logged values.
pub fn momentum_consistency_violations(steps: &[RetainedStep]) -> Result<usize> {
    let pairs = consecutive_pairs(steps)?;
    Ok(pairs
        .filter(|(prev, cur)| {
            let tilde = cur.tilde_prev.as_ref().expect("checked above");
            corrected_momentum(&cur.sample_grad, cur.a, &prev.direction, tilde) != cur.direction
        })
        .count())
}
