use rand::Rng;

use super::{
    check_dim, payload_mismatch, ProblemKind, ProblemSpec, SamplePayload, SampleStream,
    SampleToken, StochasticOracle,
};
use crate::error::Result;
use crate::vecmath::DenseVector;

/// `max |φ'(z)|`, attained at `z² = 1/3`: `2·(1/√3)/(4/3)² = 9/(8√3)`.
pub const PHI_PRIME_MAX: f64 = 0.649_519_052_838_329;

/// `max |φ''(z)|`, attained at `z = 0`.
pub const PHI_SECOND_MAX: f64 = 2.0;

#[inline]
pub fn phi(z: f64) -> f64 {
    let z2 = z * z;
    z2 / (1.0 + z2)
}

#[inline]
pub fn phi_prime(z: f64) -> f64 {
    let s = 1.0 + z * z;
    2.0 * z / (s * s)
}

/// Separable bounded non-convex well: `f(x; ξ) = Σ_j φ(x_j − ξ_j)` with
/// `φ(z) = z²/(1+z²)` and Rademacher-scaled data `ξ_j = ±σ`.
///
/// Every standing assumption holds globally with finite constants:
/// `L = 2`, `G = √d·9/(8√3)`, `0 ≤ f < d` so `B = d`, and per-coordinate
/// variance `¼(φ'(x−σ) − φ'(x+σ))² ≤ min(4σ², (9/(8√3))²)`.
/// The two-point distribution keeps `∇f(x) = ½(φ'(x−σ) + φ'(x+σ))` in
/// closed form.
#[derive(Debug, Clone)]
pub struct SigmoidWell {
    spec: ProblemSpec,
    min_value: f64,
}

impl SigmoidWell {
    pub fn new(dim: usize, sigma: f64) -> Self {
        let d = dim as f64;
        let per_coord_var = (4.0 * sigma * sigma).min(PHI_PRIME_MAX * PHI_PRIME_MAX);
        Self {
            spec: ProblemSpec {
                kind: ProblemKind::SigmoidWell,
                dim,
                sigma,
                lipschitz: PHI_SECOND_MAX,
                grad_bound: d.sqrt() * PHI_PRIME_MAX,
                value_bound: d,
                variance_bound: d * per_coord_var,
                region_radius: None,
            },
            min_value: d * min_smoothed_phi(sigma),
        }
    }
}

/// `min_z ½(φ(z−σ) + φ(z+σ))`: coarse grid then golden-section refinement.
/// The function is even, so `z ≥ 0` suffices.
fn min_smoothed_phi(sigma: f64) -> f64 {
    if sigma == 0.0 {
        return 0.0;
    }
    let h = |z: f64| 0.5 * (phi(z - sigma) + phi(z + sigma));
    let hi = sigma + 2.0;
    let steps = 4000;
    let dz = hi / steps as f64;
    let best = (0..=steps)
        .map(|i| i as f64 * dz)
        .min_by(|a, b| h(*a).total_cmp(&h(*b)))
        .unwrap_or(0.0);
    let (mut a, mut b) = ((best - dz).max(0.0), best + dz);
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..100 {
        let c = b - ratio * (b - a);
        let e = a + ratio * (b - a);
        if h(c) < h(e) {
            b = e;
        } else {
            a = c;
        }
    }
    h(0.5 * (a + b)).min(h(best))
}

impl StochasticOracle for SigmoidWell {
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
                .map(|_| if rng.random::<bool>() { sigma } else { -sigma })
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
            x.iter().zip(xi).map(|(x, xi)| phi_prime(x - xi)).collect(),
        ))
    }

    fn exact_grad(&self, x: &DenseVector) -> Result<DenseVector> {
        check_dim(&self.spec, x)?;
        let s = self.spec.sigma;
        if s == 0.0 {
            return Ok(DenseVector::from_raw(x.iter().map(|&x| phi_prime(x)).collect()));
        }
        Ok(DenseVector::from_raw(
            x.iter()
                .map(|&x| 0.5 * (phi_prime(x - s) + phi_prime(x + s)))
                .collect(),
        ))
    }

    fn exact_value(&self, x: &DenseVector) -> Result<f64> {
        check_dim(&self.spec, x)?;
        let s = self.spec.sigma;
        Ok(x.iter().map(|&x| 0.5 * (phi(x - s) + phi(x + s))).sum())
    }

    fn min_value(&self) -> Option<f64> {
        Some(self.min_value)
    }
}
