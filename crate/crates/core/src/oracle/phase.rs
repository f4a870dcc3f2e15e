use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{
    check_dim, payload_mismatch, ProblemKind, ProblemSpec, SamplePayload, SampleStream,
    SampleToken, StochasticOracle,
};
use crate::error::{Error, Result};
use crate::vecmath::DenseVector;

/// Real phase retrieval as a finite sum:
/// `f(x) = (1/n) Σ_i (⟨a_i, x⟩² − b_i)² / 4` with `a_i ~ N(0, I)`,
/// a unit-norm signal `x♮` and `b_i = ⟨a_i, x♮⟩² + σ·N(0,1)`.
///
/// The quartic loss has no global smoothness or gradient bound. The
/// declared `L`, `G`, `B` hold on the ball `‖x‖ ≤ R`:
/// per-sample Hessian `(3⟨a,x⟩² − b) a aᵀ` gives
/// `L = max_i (3‖a_i‖²R² + |b_i|)‖a_i‖²`, and similarly
/// `G = max_i (‖a_i‖²R² + |b_i|)‖a_i‖²R`.
#[derive(Debug, Clone)]
pub struct PhaseRetrieval {
    spec: ProblemSpec,
    rows: Vec<Vec<f64>>,
    targets: Vec<f64>,
    signal: DenseVector,
    batch: usize,
}

impl PhaseRetrieval {
    pub fn new(
        dim: usize,
        n: usize,
        batch: usize,
        sigma: f64,
        data_seed: u64,
        radius: f64,
    ) -> Result<Self> {
        if n == 0 || batch == 0 {
            return Err(Error::invalid("phase retrieval needs n >= 1 and batch >= 1"));
        }
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::invalid("region radius must be positive"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(data_seed);
        let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };
        let raw: Vec<f64> = (0..dim).map(|_| normal()).collect();
        let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
        let signal = DenseVector::from_raw(raw.iter().map(|v| v / norm).collect());
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..dim).map(|_| normal()).collect())
            .collect();
        let targets: Vec<f64> = rows
            .iter()
            .map(|a| {
                let ip: f64 = a.iter().zip(signal.iter()).map(|(a, x)| a * x).sum();
                ip * ip + sigma * normal()
            })
            .collect();

        let r2 = radius * radius;
        let (mut l, mut g, mut b) = (0.0f64, 0.0f64, 0.0f64);
        for (a, &t) in rows.iter().zip(&targets) {
            let a2: f64 = a.iter().map(|v| v * v).sum();
            l = l.max((3.0 * a2 * r2 + t.abs()) * a2);
            g = g.max((a2 * r2 + t.abs()) * a2 * radius);
            b = b.max((a2 * r2 + t.abs()).powi(2) / 4.0);
        }
        Ok(Self {
            spec: ProblemSpec {
                kind: ProblemKind::FiniteSumPhaseRetrieval,
                dim,
                sigma,
                lipschitz: l,
                grad_bound: g,
                value_bound: b,
                // Sampling variance of a uniform mini-batch, bounded via
                // E‖g‖² ≤ G² on the region.
                variance_bound: if n == 1 { 0.0 } else { g * g / batch as f64 },
                region_radius: Some(radius),
            },
            rows,
            targets,
            signal,
            batch,
        })
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn signal(&self) -> &DenseVector {
        &self.signal
    }

    fn accumulate_term(&self, i: usize, x: &[f64], out: &mut [f64], weight: f64) {
        let a = &self.rows[i];
        let ip: f64 = a.iter().zip(x).map(|(a, x)| a * x).sum();
        let c = weight * (ip * ip - self.targets[i]) * ip;
        for (o, a) in out.iter_mut().zip(a) {
            *o += c * a;
        }
    }

    fn term_value(&self, i: usize, x: &[f64]) -> f64 {
        let ip: f64 = self.rows[i].iter().zip(x).map(|(a, x)| a * x).sum();
        let r = ip * ip - self.targets[i];
        0.25 * r * r
    }
}

impl StochasticOracle for PhaseRetrieval {
    fn spec(&self) -> &ProblemSpec {
        &self.spec
    }

    fn draw_sample(&self, stream: &mut SampleStream) -> SampleToken {
        let index = stream.next_draw_index();
        let n = self.rows.len();
        let indices = (0..self.batch).map(|_| stream.uniform_index(n)).collect();
        SampleToken::new(SamplePayload::Indices(indices), index)
    }

    fn stoch_grad(&self, x: &DenseVector, token: &SampleToken) -> Result<DenseVector> {
        check_dim(&self.spec, x)?;
        let SamplePayload::Indices(idx) = token.payload() else {
            return Err(payload_mismatch("finite-sum indices"));
        };
        if idx.is_empty() {
            return Err(Error::invalid("empty mini-batch"));
        }
        let mut out = vec![0.0; self.spec.dim];
        let w = 1.0 / idx.len() as f64;
        for &i in idx {
            if i >= self.rows.len() {
                return Err(Error::invalid(format!("sample index {i} out of range")));
            }
            self.accumulate_term(i, x.as_slice(), &mut out, w);
        }
        Ok(DenseVector::from_raw(out))
    }

    fn exact_grad(&self, x: &DenseVector) -> Result<DenseVector> {
        check_dim(&self.spec, x)?;
        let mut out = vec![0.0; self.spec.dim];
        let w = 1.0 / self.rows.len() as f64;
        for i in 0..self.rows.len() {
            self.accumulate_term(i, x.as_slice(), &mut out, w);
        }
        Ok(DenseVector::from_raw(out))
    }

    fn exact_value(&self, x: &DenseVector) -> Result<f64> {
        check_dim(&self.spec, x)?;
        let total: f64 = (0..self.rows.len())
            .map(|i| self.term_value(i, x.as_slice()))
            .sum();
        Ok(total / self.rows.len() as f64)
    }

    fn min_value(&self) -> Option<f64> {
        // Noiseless measurements are fit exactly by ±x♮.
        (self.spec.sigma == 0.0).then_some(0.0)
    }
}
