use super::{
    check_dim, ProblemKind, ProblemSpec, SamplePayload, SampleStream, SampleToken,
    StochasticOracle,
};
use crate::error::{Error, Result};
use crate::vecmath::DenseVector;

/// Chained Rosenbrock `Σ_{i<d−1} 100(x_{i+1} − x_i²)² + (1 − x_i)²` with a
/// deterministic oracle.
///
/// Constants are declared on the box `|x_i| ≤ R`: Gershgorin on the
/// tridiagonal Hessian gives `L = 1200R² + 1200R + 202`.
#[derive(Debug, Clone)]
pub struct Rosenbrock {
    spec: ProblemSpec,
}

impl Rosenbrock {
    pub fn new(dim: usize, radius: f64) -> Result<Self> {
        if dim < 2 {
            return Err(Error::invalid("rosenbrock needs dim >= 2"));
        }
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::invalid("region radius must be positive"));
        }
        let r = radius;
        let coord_grad = 400.0 * r * (r + r * r) + 2.0 * (1.0 + r) + 200.0 * (r + r * r);
        let term = 100.0 * (r + r * r).powi(2) + (1.0 + r).powi(2);
        Ok(Self {
            spec: ProblemSpec {
                kind: ProblemKind::DeterministicRosenbrock,
                dim,
                sigma: 0.0,
                lipschitz: 1200.0 * r * r + 1200.0 * r + 202.0,
                grad_bound: (dim as f64).sqrt() * coord_grad,
                value_bound: (dim - 1) as f64 * term,
                variance_bound: 0.0,
                region_radius: Some(radius),
            },
        })
    }

    fn gradient(x: &[f64]) -> Vec<f64> {
        let d = x.len();
        let mut g = vec![0.0; d];
        for i in 0..d - 1 {
            let r = x[i + 1] - x[i] * x[i];
            g[i] += -400.0 * x[i] * r - 2.0 * (1.0 - x[i]);
            g[i + 1] += 200.0 * r;
        }
        g
    }
}

impl StochasticOracle for Rosenbrock {
    fn spec(&self) -> &ProblemSpec {
        &self.spec
    }

    fn draw_sample(&self, stream: &mut SampleStream) -> SampleToken {
        SampleToken::new(SamplePayload::Empty, stream.next_draw_index())
    }

    fn stoch_grad(&self, x: &DenseVector, _token: &SampleToken) -> Result<DenseVector> {
        self.exact_grad(x)
    }

    fn exact_grad(&self, x: &DenseVector) -> Result<DenseVector> {
        check_dim(&self.spec, x)?;
        Ok(DenseVector::from_raw(Self::gradient(x.as_slice())))
    }

    fn exact_value(&self, x: &DenseVector) -> Result<f64> {
        check_dim(&self.spec, x)?;
        let x = x.as_slice();
        Ok(x.windows(2)
            .map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (1.0 - w[0]).powi(2))
            .sum())
    }

    fn min_value(&self) -> Option<f64> {
        Some(0.0)
    }
}
