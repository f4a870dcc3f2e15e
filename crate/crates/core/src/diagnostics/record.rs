use crate::error::{Error, Result};
use crate::optimizers::StepReport;
use crate::oracle::StochasticOracle;
use crate::vecmath::DenseVector;

/// Per-iterate log line.
///
/// `norm_eps_sq` is `‖d_t − ∇f(x_t)‖²`. `norm_z_sq` is the squared drift
/// `‖Z_t‖²`, `Z_t = (g_t − g̃_{t−1}) − (∇f(x_t) − ∇f(x_{t−1}))`, and
/// `z_bound` its smoothness bound `2Lη_{t−1}‖d_{t−1}‖`; both only exist for
/// corrected-momentum methods from `t = 2` on.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub t: u64,
    pub eta: f64,
    pub a: f64,
    pub norm_d_sq: f64,
    pub norm_exact_grad_sq: f64,
    pub norm_eps_sq: f64,
    pub norm_g_sq: f64,
    pub norm_z_sq: Option<f64>,
    pub z_bound: Option<f64>,
    pub f_gap: Option<f64>,
}

impl TrajectoryRecord {
    pub fn is_finite(&self) -> bool {
        [
            self.eta,
            self.a,
            self.norm_d_sq,
            self.norm_exact_grad_sq,
            self.norm_eps_sq,
            self.norm_g_sq,
        ]
        .iter()
        .chain(self.norm_z_sq.iter())
        .chain(self.z_bound.iter())
        .chain(self.f_gap.iter())
        .all(|v| v.is_finite())
    }

    /// `‖d_t‖ ≤ ‖∇f(x_t)‖ + ‖ε_t‖`, with rounding slack.
    pub fn satisfies_triangle(&self) -> bool {
        let lhs = self.norm_d_sq.sqrt();
        let rhs = self.norm_exact_grad_sq.sqrt() + self.norm_eps_sq.sqrt();
        lhs <= rhs * (1.0 + 1e-12) + 1e-300
    }
}

/// Full vectors of one step, kept when the error recursion is to be
/// re-derived.
#[derive(Debug, Clone)]
pub struct RetainedStep {
    pub t: u64,
    pub a: f64,
    pub direction: DenseVector,
    pub sample_grad: DenseVector,
    pub tilde_prev: Option<DenseVector>,
    pub exact_grad: DenseVector,
}

#[derive(Debug, Clone, Copy)]
pub struct RecorderOptions {
    /// Log every `stride`-th iterate, starting with `t = 1`.
    pub stride: u64,
    /// Keep full vectors for [`verify_error_recursion`](super::verify_error_recursion).
    pub retain_vectors: bool,
    /// Evaluate `f(x_t) − f(x*)` when the minimum is known.
    pub track_f_gap: bool,
}

impl Default for RecorderOptions {
    fn default() -> Self {
        Self {
            stride: 1,
            retain_vectors: false,
            track_f_gap: false,
        }
    }
}

/// What the recorder remembers about iterate `t − 1`.
struct Previous {
    t: u64,
    x: DenseVector,
    eta: f64,
    norm_d: f64,
    exact_grad: Option<DenseVector>,
}

/// Turns a stream of [`StepReport`]s into [`TrajectoryRecord`]s, using
/// exact-gradient access to the oracle.
pub struct Recorder {
    options: RecorderOptions,
    lipschitz: f64,
    prev: Option<Previous>,
    records: Vec<TrajectoryRecord>,
    retained: Vec<RetainedStep>,
}

impl Recorder {
    pub fn new(options: RecorderOptions, lipschitz: f64) -> Result<Self> {
        if options.stride == 0 {
            return Err(Error::invalid("log stride must be positive"));
        }
        Ok(Self {
            options,
            lipschitz,
            prev: None,
            records: Vec::new(),
            retained: Vec::new(),
        })
    }

    pub fn is_logged(&self, t: u64) -> bool {
        (t - 1) % self.options.stride == 0
    }

    /// Consumes the report for iterate `t`. Returns the new record when `t`
    /// is on the logging grid.
    pub fn observe(
        &mut self,
        report: StepReport,
        oracle: &dyn StochasticOracle,
    ) -> Result<Option<&TrajectoryRecord>> {
        let t = report.t;
        if !self.is_logged(t) {
            self.prev = Some(Previous {
                t,
                eta: report.eta,
                norm_d: report.direction.norm(),
                x: report.x,
                exact_grad: None,
            });
            return Ok(None);
        }

        let exact = oracle.exact_grad(&report.x)?;
        let norm_eps_sq = report.direction.dist_sq(&exact)?;

        let mut norm_z_sq = None;
        let mut z_bound = None;
        if let (Some(tilde), Some(prev)) = (&report.tilde_prev, self.prev.as_mut()) {
            if prev.t + 1 == t {
                let prev_exact = match prev.exact_grad.take() {
                    Some(g) => g,
                    None => oracle.exact_grad(&prev.x)?,
                };
                let z: f64 = report
                    .sample_grad
                    .iter()
                    .zip(tilde.iter())
                    .zip(exact.iter().zip(prev_exact.iter()))
                    .map(|((g, gt), (e, pe))| {
                        let v = (g - gt) - (e - pe);
                        v * v
                    })
                    .sum();
                norm_z_sq = Some(z);
                z_bound = Some(2.0 * self.lipschitz * prev.eta * prev.norm_d);
            }
        }

        let f_gap = if self.options.track_f_gap {
            match oracle.min_value() {
                Some(m) => Some(oracle.exact_value(&report.x)? - m),
                None => None,
            }
        } else {
            None
        };

        let record = TrajectoryRecord {
            t,
            eta: report.eta,
            a: report.momentum,
            norm_d_sq: report.direction.norm_sq(),
            norm_exact_grad_sq: exact.norm_sq(),
            norm_eps_sq,
            norm_g_sq: report.sample_grad.norm_sq(),
            norm_z_sq,
            z_bound,
            f_gap,
        };
        self.records.push(record);

        let norm_d = report.direction.norm();
        if self.options.retain_vectors {
            self.retained.push(RetainedStep {
                t,
                a: report.momentum,
                direction: report.direction,
                sample_grad: report.sample_grad,
                tilde_prev: report.tilde_prev,
                exact_grad: exact.clone(),
            });
        }
        self.prev = Some(Previous {
            t,
            x: report.x,
            eta: report.eta,
            norm_d,
            exact_grad: Some(exact),
        });
        Ok(self.records.last())
    }

    pub fn records(&self) -> &[TrajectoryRecord] {
        &self.records
    }

    pub fn retained(&self) -> &[RetainedStep] {
        &self.retained
    }

    pub fn into_parts(self) -> (Vec<TrajectoryRecord>, Vec<RetainedStep>) {
        (self.records, self.retained)
    }
}
