use std::time::Instant;

use serde::Serialize;

use super::config::ExperimentConfig;
use super::results::{config_hash, ResultRow, RunStatus};
use super::seed::child_seed;
use crate::diagnostics::{stationarity_metric, Recorder, RecorderOptions, RetainedStep, TrajectoryRecord};
use crate::error::{Error, Result};
use crate::optimizers::{select_index, AlgorithmConfig, Optimizer};
use crate::oracle::{Problem, ProblemParams, SampleStream, StochasticOracle};
use crate::vecmath::DenseVector;

/// Everything a single run depends on. Its TOML form is what the
/// `config_hash` column digests.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSpec {
    /// Written as a string: TOML integers stop at `i64::MAX`.
    #[serde(serialize_with = "as_decimal")]
    pub master_seed: u64,
    #[serde(rename = "T")]
    pub t: u64,
    /// Position of `T` in the horizon grid; feeds the seed.
    pub grid_index: u64,
    pub log_stride: u64,
    pub problem: ProblemParams,
    pub algorithm: AlgorithmConfig,
    /// Keep full vectors so the error recursion can be re-derived.
    #[serde(skip)]
    pub retain_vectors: bool,
    #[serde(skip)]
    pub record_wall_time: bool,
}

impl RunSpec {
    pub fn new(problem: ProblemParams, algorithm: AlgorithmConfig, t: u64) -> Self {
        Self {
            master_seed: 0,
            t,
            grid_index: 0,
            log_stride: 1,
            problem,
            algorithm,
            retain_vectors: false,
            record_wall_time: false,
        }
    }

    /// The run of `algorithm` at horizon `cfg.horizons()[grid_index]`.
    pub fn from_config(cfg: &ExperimentConfig, algorithm: &AlgorithmConfig, grid_index: usize) -> Self {
        let e = &cfg.experiment;
        Self {
            master_seed: e.master_seed,
            t: cfg.horizons()[grid_index],
            grid_index: grid_index as u64,
            log_stride: e.log_stride,
            problem: cfg.problem.clone(),
            algorithm: algorithm.clone(),
            retain_vectors: false,
            record_wall_time: e.record_wall_time,
        }
    }

    pub fn hash(&self) -> String {
        let canonical = toml::to_string(self).expect("run spec serializes to TOML");
        config_hash(&canonical)
    }

    pub fn seed(&self, repetition: u32) -> u64 {
        child_seed(self.master_seed, u64::from(repetition), self.grid_index)
    }
}

fn as_decimal<S: serde::Serializer>(v: &u64, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_str(v)
}

/// A finished run: its CSV row plus what the recorder kept.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub row: ResultRow,
    pub records: Vec<TrajectoryRecord>,
    pub retained: Vec<RetainedStep>,
}

/// Runs `spec` for `T` steps under the seed of `repetition`.
///
/// The sample stream is substream 0 of the child seed and the output index
/// is drawn from substream 1 before the run starts, so choosing `x̄_T` never
/// perturbs the samples. Divergence and a stationary start become the row
/// status; only usage errors are returned as `Err`.
pub fn run_single(spec: &RunSpec, repetition: u32) -> Result<RunOutcome> {
    if spec.t == 0 {
        return Err(Error::invalid("T must be positive"));
    }
    let problem = Problem::build(&spec.problem)?;
    let seed = spec.seed(repetition);
    let mut stream = SampleStream::substream(seed, 0);
    let output_index = select_index(spec.t as usize, &mut SampleStream::substream(seed, 1))?;
    let mut recorder = Recorder::new(
        RecorderOptions {
            stride: spec.log_stride,
            retain_vectors: spec.retain_vectors,
            track_f_gap: false,
        },
        problem.spec().lipschitz,
    )?;

    let started = Instant::now();
    let mut row = ResultRow {
        config_hash: spec.hash(),
        algorithm: spec.algorithm.algorithm().name().to_string(),
        problem: spec.problem.kind.name().to_string(),
        dim: spec.problem.dim,
        sigma: spec.problem.sigma,
        t: spec.t,
        repetition,
        seed,
        status: RunStatus::Ok,
        stationarity_metric: None,
        grad_norm_at_output: None,
        output_index: None,
        oracle_calls: 0,
        wall_ms: None,
        learning_rate: spec.algorithm.learning_rate(),
    };

    let outcome = drive(spec, &problem, &mut stream, output_index, &mut recorder);
    let (status, calls, output) = match outcome {
        Ok((calls, x)) => (RunStatus::Ok, calls, Some(x)),
        Err(Failure::Stationary) => (RunStatus::StationaryAtInit, stream.draws(), None),
        Err(Failure::Diverged(calls)) => (RunStatus::DivergenceDetected, calls, None),
        Err(Failure::Usage(e)) => return Err(e),
    };
    row.oracle_calls = calls;
    row.status = status;
    if spec.record_wall_time {
        row.wall_ms = Some(started.elapsed().as_secs_f64() * 1e3);
    }

    if let Some(x) = output {
        let metric = stationarity_metric(recorder.records())?;
        let out_norm = problem.exact_grad(&x)?.norm();
        if metric.is_finite() && out_norm.is_finite() {
            row.stationarity_metric = Some(metric);
            row.grad_norm_at_output = Some(out_norm);
            row.output_index = Some(output_index);
        } else {
            row.status = RunStatus::DivergenceDetected;
        }
    }

    let (records, retained) = recorder.into_parts();
    Ok(RunOutcome {
        row,
        records,
        retained,
    })
}

enum Failure {
    Stationary,
    /// Oracle calls made before the failure.
    Diverged(u64),
    Usage(Error),
}

/// Runs the optimizer; returns the oracle-call count and `x̄_T`.
fn drive(
    spec: &RunSpec,
    problem: &Problem,
    stream: &mut SampleStream,
    output_index: usize,
    recorder: &mut Recorder,
) -> std::result::Result<(u64, DenseVector), Failure> {
    let mut opt: Box<dyn Optimizer> = match spec.algorithm.build(problem, spec.problem.start_point(), stream) {
        Ok(o) => o,
        Err(Error::StationaryAtInit) => return Err(Failure::Stationary),
        Err(Error::DivergenceDetected { .. }) => return Err(Failure::Diverged(stream.draws())),
        Err(e) => return Err(Failure::Usage(e)),
    };
    let mut output = None;
    for _ in 0..spec.t {
        let report = match opt.step(problem, stream) {
            Ok(r) => r,
            Err(Error::DivergenceDetected { .. }) => return Err(Failure::Diverged(opt.oracle_calls())),
            Err(e) => return Err(Failure::Usage(e)),
        };
        if report.t - 1 == output_index as u64 {
            output = Some(report.x.clone());
        }
        match recorder.observe(report, problem) {
            Ok(Some(rec)) if !rec.is_finite() => return Err(Failure::Diverged(opt.oracle_calls())),
            Ok(_) => {}
            Err(e) => return Err(Failure::Usage(e)),
        }
    }
    Ok((opt.oracle_calls(), output.expect("output index lies in 0..T")))
}
