//! Trajectory instrumentation and convergence-rate estimation.
//!
//! The quantities here are the observable parts of the convergence
//! analysis: the error `ε_t = d_t − ∇f(x_t)`, the drift `Z_t`, the schedule
//! `(a_t, η_t)` and the stationarity surrogate `√((1/T) Σ ‖∇f(x_t)‖²)`.
//! They use the oracle's exact gradient, which optimizers never see.

mod rate;
mod record;
mod recursion;

pub use rate::{fit_rate, geometric_grid, RateFit};
pub use record::{Recorder, RecorderOptions, RetainedStep, TrajectoryRecord};
pub use recursion::{momentum_consistency_violations, verify_error_recursion, RecursionReport};

use crate::error::{Error, Result};

/// `√((1/T) Σ_t ‖∇f(x_t)‖²)` over the logged records, which bounds
/// `E‖∇f(x̄_T)‖` for a uniformly selected output by Jensen.
pub fn stationarity_metric(records: &[TrajectoryRecord]) -> Result<f64> {
    Ok(mean_sq_grad(records)?.sqrt())
}

/// `(1/T) Σ_t ‖∇f(x_t)‖²`, the square of [`stationarity_metric`].
pub fn mean_sq_grad(records: &[TrajectoryRecord]) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::invalid("stationarity metric of an empty trajectory"));
    }
    let sum: f64 = records.iter().map(|r| r.norm_exact_grad_sq).sum();
    Ok(sum / records.len() as f64)
}

/// Violations of the momentum/step-size schedule along a trajectory.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ScheduleViolations {
    /// `a_t ∉ (0, 1]`.
    pub momentum_out_of_range: usize,
    /// `a_{t+1} > a_t`.
    pub momentum_increase: usize,
    /// `η_{t+1} > η_t`.
    pub eta_increase: usize,
}

impl ScheduleViolations {
    pub fn total(&self) -> usize {
        self.momentum_out_of_range + self.momentum_increase + self.eta_increase
    }
}

pub fn schedule_violations(records: &[TrajectoryRecord]) -> ScheduleViolations {
    let mut v = ScheduleViolations {
        momentum_out_of_range: records.iter().filter(|r| !(r.a > 0.0 && r.a <= 1.0)).count(),
        ..Default::default()
    };
    for w in records.windows(2) {
        if w[1].a > w[0].a {
            v.momentum_increase += 1;
        }
        if w[1].eta > w[0].eta {
            v.eta_increase += 1;
        }
    }
    v
}

/// Steps where `‖Z_t‖ > 2Lη_{t−1}‖d_{t−1}‖`, and how many steps carried the
/// quantity at all. A relative slack of `1e-9` plus `1e-12` absorbs
/// rounding in the four-gradient difference.
pub fn z_bound_violations(records: &[TrajectoryRecord]) -> (usize, usize) {
    let mut checked = 0;
    let mut bad = 0;
    for r in records {
        if let (Some(z), Some(bound)) = (r.norm_z_sq, r.z_bound) {
            checked += 1;
            if z.sqrt() > bound * (1.0 + 1e-9) + 1e-12 {
                bad += 1;
            }
        }
    }
    (bad, checked)
}

/// Mean and standard error of the mean.
pub fn mean_and_stderr(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return Some((mean, 0.0));
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    Some((mean, (var / n).sqrt()))
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(t: u64, g2: f64) -> TrajectoryRecord {
        TrajectoryRecord {
            t,
            eta: 1.0,
            a: 1.0,
            norm_d_sq: g2,
            norm_exact_grad_sq: g2,
            norm_eps_sq: 0.0,
            norm_g_sq: g2,
            norm_z_sq: None,
            z_bound: None,
            f_gap: None,
        }
    }

    #[test]
    fn metric_examples() {
        assert_eq!(stationarity_metric(&[rec(1, 0.0), rec(2, 0.0)]).unwrap(), 0.0);
        assert_eq!(stationarity_metric(&[rec(1, 4.0)]).unwrap(), 2.0);
        assert!(stationarity_metric(&[]).is_err());
    }

    /// Brute force: enumerate the uniform output distribution over all T
    /// iterates and average ‖∇f‖².
    #[test]
    fn metric_matches_enumeration() {
        let g2 = [0.3, 1.7, 0.0, 2.2, 9.1, 0.004];
        let records: Vec<_> = g2.iter().enumerate().map(|(i, &v)| rec(i as u64 + 1, v)).collect();
        let mut expected = 0.0;
        for (i, _) in records.iter().enumerate() {
            expected += (1.0 / g2.len() as f64) * g2[i];
        }
        let got = stationarity_metric(&records).unwrap();
        assert!((got - expected.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn schedule_checks() {
        let mut r = vec![rec(1, 1.0), rec(2, 1.0), rec(3, 1.0)];
        r[1].a = 0.5;
        r[2].a = 0.6;
        r[2].eta = 2.0;
        let v = schedule_violations(&r);
        assert_eq!(v.momentum_increase, 1);
        assert_eq!(v.eta_increase, 1);
        assert_eq!(v.momentum_out_of_range, 0);
        r[0].a = 0.0;
        assert_eq!(schedule_violations(&r).momentum_out_of_range, 1);
    }

    #[test]
    fn summary_statistics() {
        let (m, se) = mean_and_stderr(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(m, 2.5);
        assert!((se - (1.666_666_666_666_666_7f64 / 4.0).sqrt()).abs() < 1e-15);
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(mean_and_stderr(&[]), None);
    }
}
