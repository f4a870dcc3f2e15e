//! The algorithm zoo behind one stepping interface.
//!
//! All optimizers hold the current iterate `x_t`. A call to
//! [`Optimizer::step`] moves to `x_{t+1}` and returns a [`StepReport`]
//! describing iterate `t`: the point, the step size and momentum weight in
//! effect, the direction that was applied and the stochastic gradients
//! behind it. Diagnostics are built from these reports only.

mod baselines;
mod output;
mod storm;
mod storm_plus;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use baselines::{AdaGrad, AdaGradParams, Adam, AdamParams, Sgd, SgdParams};
pub use output::{select_index, select_output};
pub use storm::{Storm, StormParams};
pub use storm_plus::{MomentumSchedule, StormPlus};

use crate::error::{Error, Result};
use crate::oracle::{SampleStream, StochasticOracle};
use crate::vecmath::DenseVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    StormPlus,
    SimplifiedStormPlus,
    Storm,
    Sgd,
    #[serde(rename = "adagrad")]
    AdaGrad,
    Adam,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::StormPlus,
        Algorithm::SimplifiedStormPlus,
        Algorithm::Storm,
        Algorithm::Sgd,
        Algorithm::AdaGrad,
        Algorithm::Adam,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::StormPlus => "storm_plus",
            Algorithm::SimplifiedStormPlus => "simplified_storm_plus",
            Algorithm::Storm => "storm",
            Algorithm::Sgd => "sgd",
            Algorithm::AdaGrad => "adagrad",
            Algorithm::Adam => "adam",
        }
    }

    /// Corrected-momentum methods evaluate two stochastic gradients per
    /// step (plus one at initialization).
    pub fn is_storm_family(self) -> bool {
        matches!(
            self,
            Algorithm::StormPlus | Algorithm::SimplifiedStormPlus | Algorithm::Storm
        )
    }

    /// Oracle calls for a run of `t` steps.
    pub fn oracle_calls(self, t: u64) -> u64 {
        if self.is_storm_family() {
            2 * t + 1
        } else {
            t
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown algorithm {s:?}")))
    }
}

/// Everything known about iterate `t` once the step away from it is done.
#[derive(Debug, Clone)]
pub struct StepReport {
    pub t: u64,
    /// `x_t`.
    pub x: DenseVector,
    /// Step size `η_t` used to leave `x_t`.
    pub eta: f64,
    /// Momentum weight `a_t` that formed the direction; 1 for methods
    /// without corrected momentum.
    pub momentum: f64,
    /// Gradient estimate at `x_t` (`d_t` for corrected-momentum methods,
    /// the momentum buffer or first moment for baselines).
    pub direction: DenseVector,
    /// Fresh stochastic gradient `g_t = ∇f(x_t; ξ_t)`.
    pub sample_grad: DenseVector,
    /// `g̃_{t−1} = ∇f(x_{t−1}; ξ_t)`, present for corrected-momentum
    /// methods from `t = 2` on.
    pub tilde_prev: Option<DenseVector>,
}

pub trait Optimizer: Send {
    fn algorithm(&self) -> Algorithm;

    /// Current iterate `x_t`.
    fn iterate(&self) -> &DenseVector;

    /// Index `t` of the current iterate, starting at 1.
    fn t(&self) -> u64;

    fn oracle_calls(&self) -> u64;

    /// Moves from `x_t` to `x_{t+1}`.
    fn step(
        &mut self,
        oracle: &dyn StochasticOracle,
        stream: &mut SampleStream,
    ) -> Result<StepReport>;
}

/// Algorithm choice plus its hyperparameters, as read from a config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum AlgorithmConfig {
    StormPlus {
        #[serde(default = "one")]
        lr_scale: f64,
    },
    SimplifiedStormPlus {
        #[serde(default = "one")]
        lr_scale: f64,
    },
    /// No defaults: the constants of the original method must be tuned per
    /// problem, so every one of them has to be spelled out.
    Storm {
        theta: f64,
        w: f64,
        c: f64,
        l_hint: f64,
    },
    Sgd {
        lr: f64,
        #[serde(default)]
        momentum: f64,
    },
    #[serde(rename = "adagrad")]
    AdaGrad {
        lr: f64,
        #[serde(default = "adagrad_eps")]
        eps: f64,
    },
    Adam {
        lr: f64,
        #[serde(default = "beta1")]
        beta1: f64,
        #[serde(default = "beta2")]
        beta2: f64,
        #[serde(default = "adam_eps")]
        eps: f64,
    },
}

fn one() -> f64 {
    1.0
}
fn adagrad_eps() -> f64 {
    1e-10
}
fn beta1() -> f64 {
    0.9
}
fn beta2() -> f64 {
    0.999
}
fn adam_eps() -> f64 {
    1e-8
}

impl AlgorithmConfig {
    pub fn algorithm(&self) -> Algorithm {
        match self {
            AlgorithmConfig::StormPlus { .. } => Algorithm::StormPlus,
            AlgorithmConfig::SimplifiedStormPlus { .. } => Algorithm::SimplifiedStormPlus,
            AlgorithmConfig::Storm { .. } => Algorithm::Storm,
            AlgorithmConfig::Sgd { .. } => Algorithm::Sgd,
            AlgorithmConfig::AdaGrad { .. } => Algorithm::AdaGrad,
            AlgorithmConfig::Adam { .. } => Algorithm::Adam,
        }
    }

    /// The initial learning-rate knob: `lr_scale` for STORM+, `θ` for
    /// STORM, `lr` for the baselines.
    pub fn learning_rate(&self) -> f64 {
        match *self {
            AlgorithmConfig::StormPlus { lr_scale }
            | AlgorithmConfig::SimplifiedStormPlus { lr_scale } => lr_scale,
            AlgorithmConfig::Storm { theta, .. } => theta,
            AlgorithmConfig::Sgd { lr, .. }
            | AlgorithmConfig::AdaGrad { lr, .. }
            | AlgorithmConfig::Adam { lr, .. } => lr,
        }
    }

    pub fn with_learning_rate(&self, value: f64) -> Self {
        let mut out = self.clone();
        match &mut out {
            AlgorithmConfig::StormPlus { lr_scale }
            | AlgorithmConfig::SimplifiedStormPlus { lr_scale } => *lr_scale = value,
            AlgorithmConfig::Storm { theta, .. } => *theta = value,
            AlgorithmConfig::Sgd { lr, .. }
            | AlgorithmConfig::AdaGrad { lr, .. }
            | AlgorithmConfig::Adam { lr, .. } => *lr = value,
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} must be positive and finite, got {v}")))
            }
        };
        let unit = |name: &str, v: f64| {
            if (0.0..1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} must lie in [0, 1), got {v}")))
            }
        };
        match *self {
            AlgorithmConfig::StormPlus { lr_scale }
            | AlgorithmConfig::SimplifiedStormPlus { lr_scale } => positive("lr_scale", lr_scale),
            AlgorithmConfig::Storm {
                theta,
                w,
                c,
                l_hint,
            } => {
                positive("theta", theta)?;
                positive("w", w)?;
                positive("c", c)?;
                positive("l_hint", l_hint)
            }
            AlgorithmConfig::Sgd { lr, momentum } => {
                positive("lr", lr)?;
                unit("momentum", momentum)
            }
            AlgorithmConfig::AdaGrad { lr, eps } => {
                positive("lr", lr)?;
                if eps.is_finite() && eps >= 0.0 {
                    Ok(())
                } else {
                    Err(Error::invalid("eps must be nonnegative"))
                }
            }
            AlgorithmConfig::Adam {
                lr,
                beta1,
                beta2,
                eps,
            } => {
                positive("lr", lr)?;
                unit("beta1", beta1)?;
                unit("beta2", beta2)?;
                positive("eps", eps)
            }
        }
    }

    /// Builds the optimizer at `x1`. Corrected-momentum methods draw their
    /// first sample here.
    pub fn build(
        &self,
        oracle: &dyn StochasticOracle,
        x1: DenseVector,
        stream: &mut SampleStream,
    ) -> Result<Box<dyn Optimizer>> {
        self.validate()?;
        Ok(match *self {
            AlgorithmConfig::StormPlus { lr_scale } => Box::new(StormPlus::init(
                oracle,
                x1,
                lr_scale,
                MomentumSchedule::Adaptive,
                stream,
            )?),
            AlgorithmConfig::SimplifiedStormPlus { lr_scale } => Box::new(StormPlus::init(
                oracle,
                x1,
                lr_scale,
                MomentumSchedule::Simplified,
                stream,
            )?),
            AlgorithmConfig::Storm {
                theta,
                w,
                c,
                l_hint,
            } => Box::new(Storm::init(
                oracle,
                x1,
                StormParams {
                    theta,
                    w,
                    c,
                    l_hint,
                },
                stream,
            )?),
            AlgorithmConfig::Sgd { lr, momentum } => {
                Box::new(Sgd::new(oracle, x1, SgdParams { lr, momentum })?)
            }
            AlgorithmConfig::AdaGrad { lr, eps } => {
                Box::new(AdaGrad::new(oracle, x1, AdaGradParams { lr, eps })?)
            }
            AlgorithmConfig::Adam {
                lr,
                beta1,
                beta2,
                eps,
            } => Box::new(Adam::new(
                oracle,
                x1,
                AdamParams {
                    lr,
                    beta1,
                    beta2,
                    eps,
                },
            )?),
        })
    }
}

/// `d_{t+1} = g_{t+1} + (1 − a)(d_t − g̃_t)`, elementwise. Shared by the
/// update and by the consistency check so both evaluate the same
/// floating-point expression.
#[inline]
pub fn corrected_momentum(
    fresh: &DenseVector,
    momentum: f64,
    prev_direction: &DenseVector,
    tilde: &DenseVector,
) -> DenseVector {
    let keep = 1.0 - momentum;
    DenseVector::from_raw(
        fresh
            .iter()
            .zip(prev_direction.iter())
            .zip(tilde.iter())
            .map(|((g, d), gt)| g + keep * (d - gt))
            .collect(),
    )
}

/// `x − η d`, reporting divergence at step `t`.
pub(crate) fn descend(x: &DenseVector, eta: f64, d: &DenseVector, t: u64) -> Result<DenseVector> {
    let next = DenseVector::from_raw(x.iter().zip(d.iter()).map(|(x, d)| x - eta * d).collect());
    if !next.is_finite() {
        return Err(Error::DivergenceDetected { step: t });
    }
    Ok(next)
}

pub(crate) fn check_start(oracle: &dyn StochasticOracle, x1: &DenseVector) -> Result<()> {
    if x1.dim() != oracle.dim() {
        return Err(Error::DimensionMismatch {
            expected: oracle.dim(),
            found: x1.dim(),
        });
    }
    if !x1.is_finite() {
        return Err(Error::invalid("start point must be finite"));
    }
    Ok(())
}
