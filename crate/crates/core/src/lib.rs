//! Parameter-free recursive-momentum optimization for stochastic
//! non-convex problems.
//!
//! - [`optimizers`]: STORM+ (adaptive and simplified schedules), the
//!   original STORM, SGD, AdaGrad and Adam behind one [`Optimizer`] trait.
//! - [`oracle`]: synthetic problems with declared smoothness, gradient,
//!   value and variance constants.
//! - [`diagnostics`]: per-iterate error tracking and rate fitting.
//! - [`lemmas`]: numerical checks of the summation inequalities used in the
//!   convergence analysis.
//! - [`harness`]: seeded, reproducible experiments written to CSV.
//!
//! ```
//! use storm_core::{AlgorithmConfig, ProblemKind, ProblemParams, RunSpec, run_single};
//!
//! let problem = ProblemParams::new(ProblemKind::SigmoidWell, 5, 1.0);
//! let spec = RunSpec::new(problem, AlgorithmConfig::StormPlus { lr_scale: 1.0 }, 500);
//! let out = run_single(&spec, 0).unwrap();
//! assert!(out.row.stationarity_metric.unwrap() < 1.0);
//! ```

pub mod diagnostics;
pub mod error;
pub mod harness;
pub mod lemmas;
pub mod optimizers;
pub mod oracle;
pub mod vecmath;

pub use diagnostics::{fit_rate, stationarity_metric, RateFit, TrajectoryRecord};
pub use error::{Error, Result};
pub use harness::{run_single, run_sweep, ExperimentConfig, ResultRow, RunSpec, RunStatus};
pub use optimizers::{Algorithm, AlgorithmConfig, Optimizer, StepReport};
pub use oracle::{Problem, ProblemKind, ProblemParams, ProblemSpec, SampleStream, StochasticOracle};
pub use vecmath::DenseVector;
