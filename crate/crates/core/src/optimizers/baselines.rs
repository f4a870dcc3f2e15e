//! Textbook single-sample baselines: SGD with heavy-ball momentum,
//! diagonal AdaGrad and Adam.

use super::{check_start, Algorithm, Optimizer, StepReport};
use crate::error::{Error, Result};
use crate::oracle::{SampleStream, StochasticOracle};
use crate::vecmath::DenseVector;

fn finite_or_diverged(x: DenseVector, t: u64) -> Result<DenseVector> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::DivergenceDetected { step: t })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SgdParams {
    pub lr: f64,
    pub momentum: f64,
}

/// `v ← μ v + g`, `x ← x − γ v` (the buffer starts at `g_1`).
#[derive(Debug, Clone)]
pub struct Sgd {
    params: SgdParams,
    x: DenseVector,
    buf: Option<DenseVector>,
    t: u64,
}

impl Sgd {
    pub fn new(oracle: &dyn StochasticOracle, x1: DenseVector, params: SgdParams) -> Result<Self> {
        check_start(oracle, &x1)?;
        Ok(Self {
            params,
            x: x1,
            buf: None,
            t: 1,
        })
    }
}

impl Optimizer for Sgd {
    fn algorithm(&self) -> Algorithm {
        Algorithm::Sgd
    }

    fn iterate(&self) -> &DenseVector {
        &self.x
    }

    fn t(&self) -> u64 {
        self.t
    }

    fn oracle_calls(&self) -> u64 {
        self.t - 1
    }

    fn step(
        &mut self,
        oracle: &dyn StochasticOracle,
        stream: &mut SampleStream,
    ) -> Result<StepReport> {
        let token = oracle.draw_sample(stream);
        let g = oracle.stoch_grad(&self.x, &token)?;
        let buf = match self.buf.take() {
            None => g.clone(),
            Some(mut v) => {
                let mu = self.params.momentum;
                for (v, g) in v.as_mut_slice().iter_mut().zip(g.iter()) {
                    *v = mu * *v + g;
                }
                v
            }
        };
        let mut next = self.x.clone();
        next.axpy_assign(-self.params.lr, &buf);
        let next = finite_or_diverged(next, self.t)?;
        let report = StepReport {
            t: self.t,
            x: std::mem::replace(&mut self.x, next),
            eta: self.params.lr,
            momentum: 1.0,
            direction: buf.clone(),
            sample_grad: g,
            tilde_prev: None,
        };
        self.buf = Some(buf);
        self.t += 1;
        Ok(report)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaGradParams {
    pub lr: f64,
    pub eps: f64,
}

/// Diagonal AdaGrad: `s ← s + g²`, `x ← x − γ g / (√s + ε)`.
#[derive(Debug, Clone)]
pub struct AdaGrad {
    params: AdaGradParams,
    x: DenseVector,
    accum: Vec<f64>,
    t: u64,
}

impl AdaGrad {
    pub fn new(
        oracle: &dyn StochasticOracle,
        x1: DenseVector,
        params: AdaGradParams,
    ) -> Result<Self> {
        check_start(oracle, &x1)?;
        let accum = vec![0.0; x1.dim()];
        Ok(Self {
            params,
            x: x1,
            accum,
            t: 1,
        })
    }

    /// Per-coordinate `Σ g²`.
    pub fn accumulator(&self) -> &[f64] {
        &self.accum
    }
}

impl Optimizer for AdaGrad {
    fn algorithm(&self) -> Algorithm {
        Algorithm::AdaGrad
    }

    fn iterate(&self) -> &DenseVector {
        &self.x
    }

    fn t(&self) -> u64 {
        self.t
    }

    fn oracle_calls(&self) -> u64 {
        self.t - 1
    }

    fn step(
        &mut self,
        oracle: &dyn StochasticOracle,
        stream: &mut SampleStream,
    ) -> Result<StepReport> {
        let token = oracle.draw_sample(stream);
        let g = oracle.stoch_grad(&self.x, &token)?;
        let AdaGradParams { lr, eps } = self.params;
        let mut next = self.x.clone();
        for ((x, s), g) in next
            .as_mut_slice()
            .iter_mut()
            .zip(self.accum.iter_mut())
            .zip(g.iter())
        {
            *s += g * g;
            let denom = s.sqrt() + eps;
            // a coordinate whose gradients have all been exactly zero does not move
            if denom > 0.0 {
                *x -= lr * g / denom;
            }
        }
        let next = finite_or_diverged(next, self.t)?;
        let report = StepReport {
            t: self.t,
            x: std::mem::replace(&mut self.x, next),
            eta: lr,
            momentum: 1.0,
            direction: g.clone(),
            sample_grad: g,
            tilde_prev: None,
        };
        self.t += 1;
        Ok(report)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamParams {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    params: AdamParams,
    x: DenseVector,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(oracle: &dyn StochasticOracle, x1: DenseVector, params: AdamParams) -> Result<Self> {
        check_start(oracle, &x1)?;
        let dim = x1.dim();
        Ok(Self {
            params,
            x: x1,
            m: vec![0.0; dim],
            v: vec![0.0; dim],
            t: 1,
        })
    }

    pub fn moments(&self) -> (&[f64], &[f64]) {
        (&self.m, &self.v)
    }
}

impl Optimizer for Adam {
    fn algorithm(&self) -> Algorithm {
        Algorithm::Adam
    }

    fn iterate(&self) -> &DenseVector {
        &self.x
    }

    fn t(&self) -> u64 {
        self.t
    }

    fn oracle_calls(&self) -> u64 {
        self.t - 1
    }

    fn step(
        &mut self,
        oracle: &dyn StochasticOracle,
        stream: &mut SampleStream,
    ) -> Result<StepReport> {
        let token = oracle.draw_sample(stream);
        let g = oracle.stoch_grad(&self.x, &token)?;
        let AdamParams {
            lr,
            beta1,
            beta2,
            eps,
        } = self.params;
        let k = self.t as i32;
        let c1 = 1.0 - beta1.powi(k);
        let c2 = 1.0 - beta2.powi(k);
        let mut next = self.x.clone();
        let mut first = Vec::with_capacity(g.dim());
        for (((x, m), v), g) in next
            .as_mut_slice()
            .iter_mut()
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
            .zip(g.iter())
        {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *x -= lr * m_hat / (v_hat.sqrt() + eps);
            first.push(m_hat);
        }
        let next = finite_or_diverged(next, self.t)?;
        let report = StepReport {
            t: self.t,
            x: std::mem::replace(&mut self.x, next),
            eta: lr,
            momentum: 1.0,
            direction: DenseVector::from_raw(first),
            sample_grad: g,
            tilde_prev: None,
        };
        self.t += 1;
        Ok(report)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{Problem, ProblemKind, ProblemParams};

    fn quadratic(dim: usize) -> Problem {
        Problem::build(&ProblemParams::new(ProblemKind::NoisyQuadratic, dim, 0.0)).unwrap()
    }

    #[test]
    fn plain_sgd_contracts_linearly() {
        let p = quadratic(2);
        let mut s = SampleStream::from_seed(0);
        let x1 = DenseVector::new(vec![3.0, -1.0]).unwrap();
        let mut opt = Sgd::new(&p, x1.clone(), SgdParams { lr: 0.25, momentum: 0.0 }).unwrap();
        let mut expect = x1;
        for _ in 0..10 {
            opt.step(&p, &mut s).unwrap();
            expect = expect.scale(0.75);
            assert_eq!(opt.iterate(), &expect);
        }
        assert_eq!(opt.oracle_calls(), 10);
    }

    #[test]
    fn sgd_momentum_accumulates() {
        let p = quadratic(1);
        let mut s = SampleStream::from_seed(0);
        let mut opt = Sgd::new(
            &p,
            DenseVector::new(vec![1.0]).unwrap(),
            SgdParams { lr: 0.1, momentum: 0.5 },
        )
        .unwrap();
        let r1 = opt.step(&p, &mut s).unwrap();
        assert_eq!(r1.direction[0], 1.0);
        assert!((opt.iterate()[0] - 0.9).abs() < 1e-15);
        let r2 = opt.step(&p, &mut s).unwrap();
        // v_2 = 0.5 * 1 + 0.9
        assert!((r2.direction[0] - 1.4).abs() < 1e-15);
    }

    /// Near-constant gradient on one coordinate: the t-th step has size
    /// γ/√t and the accumulator grows like t·g².
    #[test]
    fn adagrad_constant_gradient_step_sizes() {
        // with a tiny lr the quadratic's gradient x stays at 1 to ~1e-8
        let p = quadratic(1);
        let mut s = SampleStream::from_seed(0);
        let lr = 1e-9;
        let mut opt = AdaGrad::new(
            &p,
            DenseVector::new(vec![1.0]).unwrap(),
            AdaGradParams { lr, eps: 0.0 },
        )
        .unwrap();
        for t in 1..=20u32 {
            let before = opt.iterate()[0];
            opt.step(&p, &mut s).unwrap();
            let step = before - opt.iterate()[0];
            let closed = lr / (t as f64).sqrt();
            assert!((step - closed).abs() <= 1e-6 * closed, "t={t}");
            assert!((opt.accumulator()[0] - t as f64).abs() <= 1e-6 * t as f64);
        }
    }

    #[test]
    fn adam_without_moments_is_sign_like() {
        let p = quadratic(3);
        let mut s = SampleStream::from_seed(0);
        let x1 = DenseVector::new(vec![2.0, -0.5, 0.0]).unwrap();
        let (lr, eps) = (0.01, 1e-8);
        let mut opt = Adam::new(
            &p,
            x1.clone(),
            AdamParams {
                lr,
                beta1: 0.0,
                beta2: 0.0,
                eps,
            },
        )
        .unwrap();
        opt.step(&p, &mut s).unwrap();
        for i in 0..3 {
            let g = x1[i];
            let expected = x1[i] - lr * g / (g.abs() + eps);
            assert!((opt.iterate()[i] - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn adam_moments_stay_finite() {
        let p = Problem::build(&ProblemParams::new(ProblemKind::SigmoidWell, 4, 1.0)).unwrap();
        let mut s = SampleStream::from_seed(2);
        let mut opt = Adam::new(
            &p,
            DenseVector::filled(4, 2.0),
            AdamParams {
                lr: 0.01,
                beta1: 0.9,
                beta2: 0.999,
                eps: 1e-8,
            },
        )
        .unwrap();
        for _ in 0..1000 {
            opt.step(&p, &mut s).unwrap();
        }
        let (m, v) = opt.moments();
        assert!(m.iter().chain(v).all(|x| x.is_finite()));
    }

    #[test]
    fn adagrad_accumulator_never_decreases() {
        let p = Problem::build(&ProblemParams::new(ProblemKind::SigmoidWell, 4, 1.0)).unwrap();
        let mut s = SampleStream::from_seed(2);
        let mut opt = AdaGrad::new(
            &p,
            DenseVector::filled(4, 2.0),
            AdaGradParams { lr: 0.1, eps: 1e-10 },
        )
        .unwrap();
        let mut prev = opt.accumulator().to_vec();
        for _ in 0..200 {
            opt.step(&p, &mut s).unwrap();
            for (a, b) in opt.accumulator().iter().zip(&prev) {
                assert!(a >= b);
            }
            prev = opt.accumulator().to_vec();
        }
    }

    #[test]
    fn divergence_is_detected() {
        let p = quadratic(2);
        let mut s = SampleStream::from_seed(0);
        // lr 1e200 overflows within a couple of steps
        let mut opt = Sgd::new(
            &p,
            DenseVector::filled(2, 1e200),
            SgdParams { lr: 1e200, momentum: 0.0 },
        )
        .unwrap();
        let err = opt.step(&p, &mut s).unwrap_err();
        assert!(matches!(err, Error::DivergenceDetected { step: 1 }));
    }
}
