use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimizers::AlgorithmConfig;
use crate::oracle::{Problem, ProblemParams};

/// How repetitions are reduced to one number per grid cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregate {
    #[default]
    Mean,
    Median,
}

/// The `[experiment]` section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSettings {
    #[serde(rename = "T")]
    pub t: u64,
    pub repetitions: u32,
    pub master_seed: u64,
    #[serde(default = "one")]
    pub log_stride: u64,
    /// Horizons for a rate sweep; `T` is used alone when absent.
    #[serde(default)]
    pub t_grid: Option<Vec<u64>>,
    /// Grid points dropped before fitting the rate.
    #[serde(default)]
    pub burn_in: usize,
    #[serde(default)]
    pub aggregate: Aggregate,
    /// Sweep the learning-rate knob of every algorithm over `lr_grid`.
    #[serde(default)]
    pub lr_sweep: bool,
    /// Defaults to [`default_lr_grid`] when `lr_sweep` is set.
    #[serde(default)]
    pub lr_grid: Option<Vec<f64>>,
    /// Fill the `wall_ms` column. Off by default so that output files are a
    /// pure function of the config.
    #[serde(default)]
    pub record_wall_time: bool,
    /// Write one per-iterate CSV per repetition (`run` only).
    #[serde(default)]
    pub dump_trajectories: bool,
}

fn one() -> u64 {
    1
}

/// `10^{-3}, 10^{-2.5}, …, 10^0`.
pub fn default_lr_grid() -> Vec<f64> {
    (0..=6).map(|k| 10f64.powf(-3.0 + 0.5 * k as f64)).collect()
}

/// A complete experiment: one problem, one or more algorithms.
///
/// ```toml
/// [experiment]
/// T = 10000
/// repetitions = 20
/// master_seed = 1
///
/// [problem]
/// kind = "sigmoid_well"
/// dim = 20
/// sigma = 1.0
///
/// [[algorithm]]
/// name = "storm_plus"
/// lr_scale = 0.5
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: RunSettings,
    pub problem: ProblemParams,
    pub algorithms: Vec<AlgorithmConfig>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    experiment: RunSettings,
    problem: ProblemParams,
    /// A single `[algorithm]` table or an `[[algorithm]]` array.
    algorithm: toml::Value,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let parse = |v: toml::Value| -> Result<AlgorithmConfig> {
            v.try_into()
                .map_err(|e: toml::de::Error| Error::Config(format!("[algorithm]: {}", e.message())))
        };
        let algorithms = match raw.algorithm {
            toml::Value::Array(items) => items.into_iter().map(parse).collect::<Result<_>>()?,
            table @ toml::Value::Table(_) => vec![parse(table)?],
            other => {
                return Err(Error::Config(format!(
                    "algorithm must be a table, got a {}",
                    other.type_str()
                )))
            }
        };
        let cfg = Self {
            experiment: raw.experiment,
            problem: raw.problem,
            algorithms,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let e = &self.experiment;
        let bad = |m: String| Err(Error::Config(m));
        if e.t == 0 {
            return bad("T must be positive".into());
        }
        if e.repetitions == 0 {
            return bad("repetitions must be positive".into());
        }
        if e.log_stride == 0 {
            return bad("log_stride must be positive".into());
        }
        if let Some(grid) = &e.t_grid {
            if grid.is_empty() || grid[0] == 0 || grid.windows(2).any(|w| w[1] <= w[0]) {
                return bad("t_grid must be non-empty, positive and strictly increasing".into());
            }
        }
        if let Some(grid) = &e.lr_grid {
            if grid.is_empty() || grid.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                return bad("lr_grid must be non-empty with positive entries".into());
            }
        }
        if self.algorithms.is_empty() {
            return bad("at least one [[algorithm]] is required".into());
        }
        for a in &self.algorithms {
            a.validate().map_err(|err| Error::Config(err.to_string()))?;
        }
        Problem::build(&self.problem).map_err(|err| Error::Config(err.to_string()))?;
        Ok(())
    }

    /// Horizons to run: `t_grid` if present, else `[T]`.
    pub fn horizons(&self) -> Vec<u64> {
        self.experiment
            .t_grid
            .clone()
            .unwrap_or_else(|| vec![self.experiment.t])
    }

    /// Learning-rate values to try for `algorithm`.
    pub fn learning_rates(&self, algorithm: &AlgorithmConfig) -> Vec<f64> {
        if self.experiment.lr_sweep {
            self.experiment.lr_grid.clone().unwrap_or_else(default_lr_grid)
        } else {
            vec![algorithm.learning_rate()]
        }
    }
}
