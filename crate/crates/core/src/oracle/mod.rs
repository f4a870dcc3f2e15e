//! Stochastic first-order oracles and the synthetic problem suite.
//!
//! A problem exposes `f(x; ξ)` through sample tokens: the token stores the
//! realization of `ξ`, so the same sample can be evaluated at two points
//! (`g_{t+1}` at `x_{t+1}` and `g̃_t` at `x_t`), which the corrected momentum
//! update requires. Diagnostics additionally get the exact expectation
//! `∇f(x)` and `f(x)`.
//!
//! Problem constants (`L`, `G`, `B` and the variance bound) are declared per
//! problem. Where an assumption only holds on a bounded region, the region
//! is part of the declaration; iterates are never projected onto it.

mod phase;
mod quadratic;
mod rosenbrock;
mod sigmoid;
mod stream;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use phase::PhaseRetrieval;
pub use quadratic::NoisyQuadratic;
pub use rosenbrock::Rosenbrock;
pub use sigmoid::SigmoidWell;
pub use stream::SampleStream;

use crate::error::{Error, Result};
use crate::vecmath::DenseVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    NoisyQuadratic,
    SigmoidWell,
    FiniteSumPhaseRetrieval,
    DeterministicRosenbrock,
}

impl ProblemKind {
    pub const ALL: [ProblemKind; 4] = [
        ProblemKind::NoisyQuadratic,
        ProblemKind::SigmoidWell,
        ProblemKind::FiniteSumPhaseRetrieval,
        ProblemKind::DeterministicRosenbrock,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ProblemKind::NoisyQuadratic => "noisy_quadratic",
            ProblemKind::SigmoidWell => "sigmoid_well",
            ProblemKind::FiniteSumPhaseRetrieval => "finite_sum_phase_retrieval",
            ProblemKind::DeterministicRosenbrock => "deterministic_rosenbrock",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            ProblemKind::NoisyQuadratic => {
                "f(x;xi) = 0.5*|x - xi|^2, xi ~ N(0, sigma^2 I); L = 1, G and B unbounded"
            }
            ProblemKind::SigmoidWell => {
                "f(x;xi) = sum_j phi(x_j - xi_j), phi(z) = z^2/(1+z^2), xi_j = +-sigma; L = 2, G, B finite"
            }
            ProblemKind::FiniteSumPhaseRetrieval => {
                "f(x;i) = (<a_i,x>^2 - b_i)^2/4 over n synthetic measurements; constants hold on a ball"
            }
            ProblemKind::DeterministicRosenbrock => {
                "chained Rosenbrock, sigma = 0; constants hold on a box"
            }
        }
    }

    /// Start point used when the config does not set one.
    pub fn default_start(self) -> f64 {
        match self {
            ProblemKind::NoisyQuadratic => 1.0,
            ProblemKind::SigmoidWell => 2.0,
            ProblemKind::FiniteSumPhaseRetrieval => 0.5,
            ProblemKind::DeterministicRosenbrock => -0.5,
        }
    }
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProblemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ProblemKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown problem kind {s:?}")))
    }
}

/// Declared problem constants.
///
/// `sigma` is the noise scale parameter of the problem; `variance_bound` is
/// the declared bound on `E‖∇f(x;ξ) − ∇f(x)‖²` it implies. Unbounded
/// constants are `f64::INFINITY`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub kind: ProblemKind,
    pub dim: usize,
    pub sigma: f64,
    pub lipschitz: f64,
    pub grad_bound: f64,
    pub value_bound: f64,
    pub variance_bound: f64,
    /// Radius of the region (Euclidean ball or sup-norm box) on which the
    /// finite constants hold. `None` when they hold globally.
    pub region_radius: Option<f64>,
}

impl ProblemSpec {
    pub fn is_deterministic(&self) -> bool {
        self.variance_bound == 0.0
    }
}

/// Problem-specific realization of `ξ`.
#[derive(Debug, Clone, PartialEq)]
pub enum SamplePayload {
    /// Additive noise vector (zero when `sigma = 0`).
    Noise(Vec<f64>),
    /// Indices of a finite-sum mini-batch; the gradient is averaged.
    Indices(Vec<usize>),
    /// Deterministic oracle.
    Empty,
}

/// One draw `ξ ~ D`. Optimizers treat the payload as opaque; evaluating the
/// same token twice at the same point is bitwise reproducible.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleToken {
    payload: SamplePayload,
    draw_index: u64,
}

impl SampleToken {
    pub(crate) fn new(payload: SamplePayload, draw_index: u64) -> Self {
        Self {
            payload,
            draw_index,
        }
    }

    pub fn draw_index(&self) -> u64 {
        self.draw_index
    }

    pub fn payload(&self) -> &SamplePayload {
        &self.payload
    }
}

/// Stochastic first-order oracle with diagnostics-only exact access.
pub trait StochasticOracle: Send + Sync {
    fn spec(&self) -> &ProblemSpec;

    fn dim(&self) -> usize {
        self.spec().dim
    }

    /// Draws a fresh i.i.d. token, advancing `stream`.
    fn draw_sample(&self, stream: &mut SampleStream) -> SampleToken;

    /// `∇f(x; ξ)` for the token's realization of `ξ`.
    fn stoch_grad(&self, x: &DenseVector, token: &SampleToken) -> Result<DenseVector>;

    /// `∇f(x) = E[∇f(x; ξ)]`, closed form or full finite sum.
    fn exact_grad(&self, x: &DenseVector) -> Result<DenseVector>;

    /// `f(x) = E[f(x; ξ)]`.
    fn exact_value(&self, x: &DenseVector) -> Result<f64>;

    /// `f(x*)` when known.
    fn min_value(&self) -> Option<f64>;
}

pub(crate) fn check_dim(spec: &ProblemSpec, x: &DenseVector) -> Result<()> {
    if x.dim() != spec.dim {
        return Err(Error::DimensionMismatch {
            expected: spec.dim,
            found: x.dim(),
        });
    }
    Ok(())
}

/// Parameters from which a problem instance is built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemParams {
    pub kind: ProblemKind,
    pub dim: usize,
    #[serde(default)]
    pub sigma: f64,
    /// Number of finite-sum terms (phase retrieval only).
    #[serde(default = "default_n")]
    pub n: usize,
    /// Mini-batch size for finite-sum problems.
    #[serde(default = "default_batch")]
    pub batch: usize,
    /// Seed of the synthetic measurement data.
    #[serde(default)]
    pub data_seed: u64,
    /// Radius of the region on which declared constants hold, for problems
    /// whose assumptions are only local.
    #[serde(default = "default_region")]
    pub region_radius: f64,
    /// Every coordinate of `x_1` is set to this value.
    #[serde(default)]
    pub x0: Option<f64>,
}

fn default_n() -> usize {
    64
}

fn default_batch() -> usize {
    1
}

fn default_region() -> f64 {
    2.0
}

impl ProblemParams {
    pub fn new(kind: ProblemKind, dim: usize, sigma: f64) -> Self {
        Self {
            kind,
            dim,
            sigma,
            n: default_n(),
            batch: default_batch(),
            data_seed: 0,
            region_radius: default_region(),
            x0: None,
        }
    }

    pub fn start_point(&self) -> DenseVector {
        DenseVector::filled(self.dim, self.x0.unwrap_or(self.kind.default_start()))
    }
}

/// A concrete problem from the suite.
#[derive(Debug, Clone)]
pub enum Problem {
    NoisyQuadratic(NoisyQuadratic),
    SigmoidWell(SigmoidWell),
    PhaseRetrieval(PhaseRetrieval),
    Rosenbrock(Rosenbrock),
}

impl Problem {
    pub fn build(params: &ProblemParams) -> Result<Self> {
        if params.dim == 0 {
            return Err(Error::invalid("problem dimension must be positive"));
        }
        if !(params.sigma.is_finite() && params.sigma >= 0.0) {
            return Err(Error::invalid("sigma must be finite and nonnegative"));
        }
        if params.kind != ProblemKind::FiniteSumPhaseRetrieval && params.batch != 1 {
            return Err(Error::invalid(
                "mini-batches are only defined for finite-sum problems",
            ));
        }
        if let Some(x0) = params.x0 {
            if !x0.is_finite() {
                return Err(Error::invalid("x0 must be finite"));
            }
        }
        Ok(match params.kind {
            ProblemKind::NoisyQuadratic => {
                Problem::NoisyQuadratic(NoisyQuadratic::new(params.dim, params.sigma))
            }
            ProblemKind::SigmoidWell => {
                Problem::SigmoidWell(SigmoidWell::new(params.dim, params.sigma))
            }
            ProblemKind::FiniteSumPhaseRetrieval => Problem::PhaseRetrieval(PhaseRetrieval::new(
                params.dim,
                params.n,
                params.batch,
                params.sigma,
                params.data_seed,
                params.region_radius,
            )?),
            ProblemKind::DeterministicRosenbrock => {
                if params.sigma != 0.0 {
                    return Err(Error::invalid("rosenbrock is deterministic; sigma must be 0"));
                }
                Problem::Rosenbrock(Rosenbrock::new(params.dim, params.region_radius)?)
            }
        })
    }

    fn inner(&self) -> &dyn StochasticOracle {
        match self {
            Problem::NoisyQuadratic(p) => p,
            Problem::SigmoidWell(p) => p,
            Problem::PhaseRetrieval(p) => p,
            Problem::Rosenbrock(p) => p,
        }
    }
}

impl StochasticOracle for Problem {
    fn spec(&self) -> &ProblemSpec {
        self.inner().spec()
    }

    fn draw_sample(&self, stream: &mut SampleStream) -> SampleToken {
        self.inner().draw_sample(stream)
    }

    fn stoch_grad(&self, x: &DenseVector, token: &SampleToken) -> Result<DenseVector> {
        self.inner().stoch_grad(x, token)
    }

    fn exact_grad(&self, x: &DenseVector) -> Result<DenseVector> {
        self.inner().exact_grad(x)
    }

    fn exact_value(&self, x: &DenseVector) -> Result<f64> {
        self.inner().exact_value(x)
    }

    fn min_value(&self) -> Option<f64> {
        self.inner().min_value()
    }
}

fn payload_mismatch(expected: &str) -> Error {
    Error::invalid(format!("sample token does not carry {expected}"))
}
