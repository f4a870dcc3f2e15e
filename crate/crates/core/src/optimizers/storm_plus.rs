use super::{check_start, corrected_momentum, descend, Algorithm, Optimizer, StepReport};
use crate::error::{Error, Result};
use crate::oracle::{SampleStream, StochasticOracle};
use crate::vecmath::DenseVector;

/// How the momentum weight `a_{t+1}` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MomentumSchedule {
    /// `a_{t+1} = (1 + Σ_{i≤t} ‖g_i‖²)^{−2/3}`, fully adaptive.
    Adaptive,
    /// `a_1 = 1`, `a_{t+1} = t^{−2/3}`, independent of the gradients.
    Simplified,
}

/// Parameter-free corrected-momentum method.
///
/// Step size and momentum weight are set from the observed history only:
///
/// ```text
/// a_{t+1} = (1 + Σ_{i=1}^{t} ‖g_i‖²)^{−2/3}
/// η_t     = lr_scale · (Σ_{i=1}^{t} ‖d_i‖² / a_{i+1})^{−1/3}
/// x_{t+1} = x_t − η_t d_t
/// d_{t+1} = g_{t+1} + (1 − a_{t+1})(d_t − g̃_t)
/// ```
///
/// where `g_{t+1} = ∇f(x_{t+1}; ξ_{t+1})` and `g̃_t = ∇f(x_t; ξ_{t+1})` share
/// one sample. Within a step the accumulators are updated in a fixed order:
/// gradient sum, then `a_{t+2}`, then the direction sum, then `η_{t+1}`.
#[derive(Debug, Clone)]
pub struct StormPlus {
    x: DenseVector,
    d: DenseVector,
    /// `g_t`, kept for the step report.
    g: DenseVector,
    /// `g̃_{t−1}`; none at `t = 1`.
    g_tilde_prev: Option<DenseVector>,
    sum_g_sq: f64,
    sum_d_over_a: f64,
    t: u64,
    /// `a_t` (1 at `t = 1`, where `d_1 = g_1`).
    a_cur: f64,
    /// `a_{t+1}`.
    a_next: f64,
    /// `η_t`.
    eta: f64,
    lr_scale: f64,
    schedule: MomentumSchedule,
    calls: u64,
}

impl StormPlus {
    /// Draws `ξ_1` and sets `d_1 = g_1 = ∇f(x_1; ξ_1)`.
    ///
    /// Fails with [`Error::StationaryAtInit`] when `d_1 = 0`: the step-size
    /// denominator is then exactly zero, and on a deterministic oracle `x_1`
    /// is a stationary point.
    pub fn init(
        oracle: &dyn StochasticOracle,
        x1: DenseVector,
        lr_scale: f64,
        schedule: MomentumSchedule,
        stream: &mut SampleStream,
    ) -> Result<Self> {
        check_start(oracle, &x1)?;
        if !(lr_scale.is_finite() && lr_scale > 0.0) {
            return Err(Error::invalid("lr_scale must be positive"));
        }
        let token = oracle.draw_sample(stream);
        let g1 = oracle.stoch_grad(&x1, &token)?;
        let sum_g_sq = g1.norm_sq();
        let a_next = next_momentum(schedule, 1, sum_g_sq);
        let sum_d_over_a = g1.norm_sq() / a_next;
        if sum_d_over_a == 0.0 {
            return Err(Error::StationaryAtInit);
        }
        if !sum_d_over_a.is_finite() {
            return Err(Error::DivergenceDetected { step: 1 });
        }
        Ok(Self {
            x: x1,
            d: g1.clone(),
            g: g1,
            g_tilde_prev: None,
            sum_g_sq,
            sum_d_over_a,
            t: 1,
            a_cur: 1.0,
            a_next,
            eta: lr_scale * sum_d_over_a.powf(-1.0 / 3.0),
            lr_scale,
            schedule,
            calls: 1,
        })
    }

    pub fn direction(&self) -> &DenseVector {
        &self.d
    }

    /// `η_t`.
    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// `a_t`.
    pub fn momentum(&self) -> f64 {
        self.a_cur
    }

    /// `a_{t+1}`.
    pub fn next_momentum(&self) -> f64 {
        self.a_next
    }

    pub fn sum_g_sq(&self) -> f64 {
        self.sum_g_sq
    }

    pub fn sum_d_over_a(&self) -> f64 {
        self.sum_d_over_a
    }

    pub fn lr_scale(&self) -> f64 {
        self.lr_scale
    }

    pub fn schedule(&self) -> MomentumSchedule {
        self.schedule
    }
}

/// `a_{t+1}` given the state after `t` gradients.
fn next_momentum(schedule: MomentumSchedule, t: u64, sum_g_sq: f64) -> f64 {
    match schedule {
        MomentumSchedule::Adaptive => (1.0 + sum_g_sq).powf(-2.0 / 3.0),
        MomentumSchedule::Simplified => (t as f64).powf(-2.0 / 3.0),
    }
}

impl Optimizer for StormPlus {
    fn algorithm(&self) -> Algorithm {
        match self.schedule {
            MomentumSchedule::Adaptive => Algorithm::StormPlus,
            MomentumSchedule::Simplified => Algorithm::SimplifiedStormPlus,
        }
    }

    fn iterate(&self) -> &DenseVector {
        &self.x
    }

    fn t(&self) -> u64 {
        self.t
    }

    fn oracle_calls(&self) -> u64 {
        self.calls
    }

    fn step(
        &mut self,
        oracle: &dyn StochasticOracle,
        stream: &mut SampleStream,
    ) -> Result<StepReport> {
        let t = self.t;
        let x_next = descend(&self.x, self.eta, &self.d, t)?;

        let token = oracle.draw_sample(stream);
        let g_next = oracle.stoch_grad(&x_next, &token)?;
        let g_tilde = oracle.stoch_grad(&self.x, &token)?;
        self.calls += 2;

        let d_next = corrected_momentum(&g_next, self.a_next, &self.d, &g_tilde);
        if !d_next.is_finite() {
            return Err(Error::DivergenceDetected { step: t + 1 });
        }

        // Order matters: a_{t+2} needs Σ‖g‖² through t+1, and the direction
        // sum divides by that a_{t+2}.
        let sum_g_sq = self.sum_g_sq + g_next.norm_sq();
        let a_after = next_momentum(self.schedule, t + 1, sum_g_sq);
        let sum_d_over_a = self.sum_d_over_a + d_next.norm_sq() / a_after;
        let eta_next = self.lr_scale * sum_d_over_a.powf(-1.0 / 3.0);
        if !(sum_g_sq.is_finite() && sum_d_over_a.is_finite()) {
            return Err(Error::DivergenceDetected { step: t + 1 });
        }

        let report = StepReport {
            t,
            x: std::mem::replace(&mut self.x, x_next),
            eta: self.eta,
            momentum: self.a_cur,
            direction: std::mem::replace(&mut self.d, d_next),
            sample_grad: std::mem::replace(&mut self.g, g_next),
            tilde_prev: self.g_tilde_prev.replace(g_tilde),
        };
        self.sum_g_sq = sum_g_sq;
        self.sum_d_over_a = sum_d_over_a;
        self.a_cur = self.a_next;
        self.a_next = a_after;
        self.eta = eta_next;
        self.t = t + 1;
        Ok(report)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{Problem, ProblemKind, ProblemParams};

    fn problem(kind: ProblemKind, dim: usize, sigma: f64) -> Problem {
        Problem::build(&ProblemParams::new(kind, dim, sigma)).unwrap()
    }

    /// Quadratic with no noise: g_1 = x_1, so ‖g_1‖² is set by the start.
    fn unit_gradient_start() -> (Problem, DenseVector) {
        (
            problem(ProblemKind::NoisyQuadratic, 1, 0.0),
            DenseVector::new(vec![1.0]).unwrap(),
        )
    }

    #[test]
    fn init_with_unit_gradient() {
        let (p, x1) = unit_gradient_start();
        let mut s = SampleStream::from_seed(0);
        let opt = StormPlus::init(&p, x1, 1.0, MomentumSchedule::Adaptive, &mut s).unwrap();
        // a_2 = 2^{-2/3}, ‖d_1‖²/a_2 = 2^{2/3}, η_1 = 2^{-2/9}
        assert!((opt.next_momentum() - 0.629_960_524_947_436_6).abs() < 1e-15);
        assert!((opt.sum_d_over_a() - 2f64.powf(2.0 / 3.0)).abs() < 1e-15);
        assert!((opt.eta() - 0.857_243_982_853_072_8).abs() < 1e-14);
        assert_eq!(opt.momentum(), 1.0);
        assert_eq!(opt.t(), 1);
        assert_eq!(opt.oracle_calls(), 1);
    }

    #[test]
    fn stationary_start_is_reported() {
        let p = problem(ProblemKind::NoisyQuadratic, 3, 0.0);
        let mut s = SampleStream::from_seed(0);
        let err = StormPlus::init(
            &p,
            DenseVector::zeros(3),
            1.0,
            MomentumSchedule::Adaptive,
            &mut s,
        )
        .unwrap_err();
        assert!(matches!(err, Error::StationaryAtInit));
    }

    #[test]
    fn lr_scale_multiplies_step() {
        let (p, x1) = unit_gradient_start();
        let mut s = SampleStream::from_seed(0);
        let opt = StormPlus::init(&p, x1, 0.25, MomentumSchedule::Adaptive, &mut s).unwrap();
        assert!((opt.eta() - 0.25 * 2f64.powf(-2.0 / 9.0)).abs() < 1e-15);
    }

    #[test]
    fn simplified_schedule_values() {
        assert_eq!(next_momentum(MomentumSchedule::Simplified, 1, 123.0), 1.0);
        assert!((next_momentum(MomentumSchedule::Simplified, 4, 0.0) - 0.396_850_262_992_049_9).abs() < 1e-15);
        // the gap 1/a_{t+1} - 1/a_t = t^{2/3} - (t-1)^{2/3} never exceeds 2/3
        for t in 2..200_000u64 {
            let gap = 1.0 / next_momentum(MomentumSchedule::Simplified, t, 0.0)
                - 1.0 / next_momentum(MomentumSchedule::Simplified, t - 1, 0.0);
            assert!(gap <= 2.0 / 3.0 + 1e-12, "t={t}: {gap}");
        }
    }

    #[test]
    fn step_follows_the_recursion() {
        let p = problem(ProblemKind::SigmoidWell, 6, 1.0);
        let mut s = SampleStream::from_seed(3);
        let mut opt = StormPlus::init(
            &p,
            DenseVector::filled(6, 1.5),
            1.0,
            MomentumSchedule::Adaptive,
            &mut s,
        )
        .unwrap();
        let mut prev: Option<StepReport> = None;
        for _ in 0..50 {
            let a_next = opt.next_momentum();
            let r = opt.step(&p, &mut s).unwrap();
            if let Some(prev) = &prev {
                let tilde = r.tilde_prev.as_ref().unwrap();
                let expected = corrected_momentum(&r.sample_grad, r.momentum, &prev.direction, tilde);
                assert_eq!(expected, r.direction);
            }
            assert!(r.momentum > 0.0 && r.momentum <= 1.0);
            assert!(opt.momentum() == a_next);
            prev = Some(r);
        }
        assert_eq!(opt.oracle_calls(), 101);
    }

    #[test]
    fn bitwise_deterministic() {
        let p = problem(ProblemKind::SigmoidWell, 5, 1.0);
        let run = || {
            let mut s = SampleStream::from_seed(77);
            let mut opt = StormPlus::init(
                &p,
                DenseVector::filled(5, 2.0),
                1.0,
                MomentumSchedule::Adaptive,
                &mut s,
            )
            .unwrap();
            for _ in 0..1000 {
                opt.step(&p, &mut s).unwrap();
            }
            opt
        };
        let (a, b) = (run(), run());
        assert_eq!(a.iterate(), b.iterate());
        assert_eq!(a.direction(), b.direction());
        assert_eq!(a.eta().to_bits(), b.eta().to_bits());
        assert_eq!(a.sum_d_over_a().to_bits(), b.sum_d_over_a().to_bits());
    }

    #[test]
    fn deterministic_oracle_tracks_exact_gradient() {
        let p = problem(ProblemKind::SigmoidWell, 4, 0.0);
        let mut s = SampleStream::from_seed(1);
        let mut opt = StormPlus::init(
            &p,
            DenseVector::filled(4, 1.3),
            1.0,
            MomentumSchedule::Adaptive,
            &mut s,
        )
        .unwrap();
        for _ in 0..1000 {
            let exact = p.exact_grad(opt.iterate()).unwrap();
            let dev = opt.direction().dist_sq(&exact).unwrap().sqrt();
            assert!(dev <= 1e-9 * (1.0 + exact.norm()));
            opt.step(&p, &mut s).unwrap();
        }
    }
}
