use super::{check_start, corrected_momentum, descend, Algorithm, Optimizer, StepReport};
use crate::error::{Error, Result};
use crate::oracle::{SampleStream, StochasticOracle};
use crate::vecmath::DenseVector;

/// Constants of the original corrected-momentum method. None of them has a
/// problem-independent value; they must be tuned against `L` and `G`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StormParams {
    pub theta: f64,
    pub w: f64,
    pub c: f64,
    pub l_hint: f64,
}

impl StormParams {
    /// `η_0 = θ / w^{1/3}`.
    pub fn initial_eta(&self) -> f64 {
        self.theta / self.w.cbrt()
    }

    fn eta(&self, sum_g_sq: f64) -> f64 {
        self.theta / (self.w + sum_g_sq).cbrt()
    }

    /// `min(1, c L² η²)`.
    fn momentum(&self, eta: f64) -> f64 {
        (self.c * self.l_hint * self.l_hint * eta * eta).min(1.0)
    }
}

/// Original STORM: `η_t = θ/(w + Σ_{i≤t}‖g_i‖²)^{1/3}`,
/// `a_{t+1} = min(1, c L² η_t²)`, with the same corrected-momentum recursion
/// as [`StormPlus`](super::StormPlus).
#[derive(Debug, Clone)]
pub struct Storm {
    params: StormParams,
    x: DenseVector,
    d: DenseVector,
    g: DenseVector,
    g_tilde_prev: Option<DenseVector>,
    sum_g_sq: f64,
    /// `η_t`.
    eta: f64,
    /// `a_t = min(1, c L² η_{t−1}²)`.
    a_cur: f64,
    t: u64,
    calls: u64,
}

impl Storm {
    pub fn init(
        oracle: &dyn StochasticOracle,
        x1: DenseVector,
        params: StormParams,
        stream: &mut SampleStream,
    ) -> Result<Self> {
        check_start(oracle, &x1)?;
        for (name, v) in [
            ("theta", params.theta),
            ("w", params.w),
            ("c", params.c),
            ("l_hint", params.l_hint),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("{name} must be positive")));
            }
        }
        let token = oracle.draw_sample(stream);
        let g1 = oracle.stoch_grad(&x1, &token)?;
        let sum_g_sq = g1.norm_sq();
        Ok(Self {
            params,
            x: x1,
            d: g1.clone(),
            g: g1,
            g_tilde_prev: None,
            sum_g_sq,
            eta: params.eta(sum_g_sq),
            a_cur: params.momentum(params.initial_eta()),
            t: 1,
            calls: 1,
        })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn momentum(&self) -> f64 {
        self.a_cur
    }

    pub fn direction(&self) -> &DenseVector {
        &self.d
    }

    pub fn params(&self) -> &StormParams {
        &self.params
    }
}

impl Optimizer for Storm {
    fn algorithm(&self) -> Algorithm {
        Algorithm::Storm
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
        let a_next = self.params.momentum(self.eta);

        let token = oracle.draw_sample(stream);
        let g_next = oracle.stoch_grad(&x_next, &token)?;
        let g_tilde = oracle.stoch_grad(&self.x, &token)?;
        self.calls += 2;

        let d_next = corrected_momentum(&g_next, a_next, &self.d, &g_tilde);
        let sum_g_sq = self.sum_g_sq + g_next.norm_sq();
        if !(d_next.is_finite() && sum_g_sq.is_finite()) {
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
        self.eta = self.params.eta(sum_g_sq);
        self.a_cur = a_next;
        self.t = t + 1;
        Ok(report)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{Problem, ProblemKind, ProblemParams};

    fn params(c: f64, l: f64) -> StormParams {
        StormParams {
            theta: 1.0,
            w: 1.0,
            c,
            l_hint: l,
        }
    }

    #[test]
    fn initial_eta_is_one_for_unit_constants() {
        assert_eq!(params(28.0, 1.0).initial_eta(), 1.0);
    }

    #[test]
    fn eta_after_first_gradient() {
        // ‖g_1‖² = 7 from x_1 = (2, √3) on the noiseless quadratic
        let p = Problem::build(&ProblemParams::new(ProblemKind::NoisyQuadratic, 2, 0.0)).unwrap();
        let x1 = DenseVector::new(vec![2.0, 3f64.sqrt()]).unwrap();
        let mut s = SampleStream::from_seed(0);
        let opt = Storm::init(&p, x1, params(28.0, 1.0), &mut s).unwrap();
        assert!((opt.eta() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn momentum_clamps_to_one() {
        let pr = params(28.0, 10.0);
        assert_eq!(pr.momentum(1.0), 1.0);
        assert!((params(1.0, 1.0).momentum(0.5) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn clamped_momentum_makes_direction_the_fresh_gradient() {
        let p = Problem::build(&ProblemParams::new(ProblemKind::SigmoidWell, 3, 1.0)).unwrap();
        let mut s = SampleStream::from_seed(4);
        // c L² η² ≥ 1 throughout for huge c
        let mut opt = Storm::init(&p, DenseVector::filled(3, 1.0), params(1e12, 1.0), &mut s).unwrap();
        for _ in 0..20 {
            let r = opt.step(&p, &mut s).unwrap();
            assert_eq!(opt.momentum(), 1.0);
            let _ = r;
            assert_eq!(opt.direction(), &opt.g);
        }
    }

    #[test]
    fn schedule_is_monotone() {
        let p = Problem::build(&ProblemParams::new(ProblemKind::SigmoidWell, 5, 1.0)).unwrap();
        let mut s = SampleStream::from_seed(9);
        let mut opt = Storm::init(&p, DenseVector::filled(5, 2.0), params(28.0, 2.0), &mut s).unwrap();
        let (mut eta, mut a) = (opt.eta(), opt.momentum());
        for _ in 0..500 {
            opt.step(&p, &mut s).unwrap();
            assert!(opt.eta() <= eta && opt.momentum() <= a);
            assert!(opt.momentum() > 0.0 && opt.momentum() <= 1.0);
            eta = opt.eta();
            a = opt.momentum();
        }
        assert_eq!(opt.oracle_calls(), 1001);
    }
}
