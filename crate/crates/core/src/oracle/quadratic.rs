use rand_distr::{Distribution, StandardNormal};

use super::{
    check_dim, payload_mismatch, ProblemKind, ProblemSpec, SamplePayload, SampleStream,
    SampleToken, StochasticOracle,
};
use crate::error::Result;
use crate::vecmath::DenseVector;

/// `f(x; ξ) = ½‖x − ξ‖²` with `ξ ~ N(0, σ²I)`.
///
/// `∇f(x) = x`, `f(x) = ½‖x‖² + ½dσ²`. The per-sample gradient is
/// 1-Lipschitz; gradients and values are unbounded, so `G = B = ∞`.
#[derive(Debug, Clone)]
pub struct NoisyQuadratic {
    spec: ProblemSpec,
}

impl NoisyQuadratic {
    pub fn new(dim: usize, sigma: f64) -> Self {
        Self {
            spec: ProblemSpec {
                kind: ProblemKind::NoisyQuadratic,
                dim,
                sigma,
                lipschitz: 1.0,
                grad_bound: f64::INFINITY,
                value_bound: f64::INFINITY,
                variance_bound: dim as f64 * sigma * sigma,
                region_radius: None,
            },
        }
    }
}

impl StochasticOracle for NoisyQuadratic {
    fn spec(&self) -> &ProblemSpec {
        &self.spec
    }

    fn draw_sample(&self, stream: &mut SampleStream) -> SampleToken {
        let index = stream.next_draw_index();
        let sigma = self.spec.sigma;
        let noise = if sigma == 0.0 {
            vec![0.0; self.spec.dim]
        } else {
            let rng = stream.rng();
            (0..self.spec.dim)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(rng);
                    sigma * z
                })
                .collect()
        };
        SampleToken::new(SamplePayload::Noise(noise), index)
    }

    fn stoch_grad(&self, x: &DenseVector, token: &SampleToken) -> Result<DenseVector> {
        check_dim(&self.spec, x)?;
        let SamplePayload::Noise(xi) = token.payload() else {
            return Err(payload_mismatch("a noise vector"));
        };
        Ok(DenseVector::from_raw(
            x.iter().zip(xi).map(|(x, xi)| x - xi).collect(),
        ))
    }

    fn exact_grad(&self, x: &DenseVector) -> Result<DenseVector> {
        check_dim(&self.spec, x)?;
        Ok(x.clone())
    }

    fn exact_value(&self, x: &DenseVector) -> Result<f64> {
        check_dim(&self.spec, x)?;
        let s = self.spec.sigma;
        Ok(0.5 * x.norm_sq() + 0.5 * self.spec.dim as f64 * s * s)
    }

    fn min_value(&self) -> Option<f64> {
        let s = self.spec.sigma;
        Some(0.5 * self.spec.dim as f64 * s * s)
    }
}
