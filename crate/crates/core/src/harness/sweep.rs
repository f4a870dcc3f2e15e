use rayon::prelude::*;
use serde::Serialize;

use super::config::{Aggregate, ExperimentConfig};
use super::results::{compare_rows, ResultRow};
use super::runner::{run_single, RunOutcome, RunSpec};
use crate::diagnostics::{
    fit_rate, mean_and_stderr, median, schedule_violations, z_bound_violations, RateFit,
    ScheduleViolations,
};
use crate::error::Result;
use crate::optimizers::AlgorithmConfig;

/// Trajectory checks kept from each run after its records are dropped.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunDiagnostics {
    pub schedule: ScheduleViolations,
    pub z_violations: usize,
    pub z_checked: usize,
}

impl RunDiagnostics {
    pub fn from_outcome(out: &RunOutcome) -> Self {
        let (z_violations, z_checked) = z_bound_violations(&out.records);
        Self {
            schedule: schedule_violations(&out.records),
            z_violations,
            z_checked,
        }
    }
}

/// Aggregate of the repetitions of one `(algorithm, lr, T)` cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellSummary {
    pub algorithm: String,
    pub problem: String,
    pub learning_rate: f64,
    #[serde(rename = "T")]
    pub t: u64,
    pub runs: u32,
    pub runs_ok: u32,
    /// Aggregate of the squared stationarity metric `(1/T)Σ‖∇f(x_t)‖²`
    /// over the `Ok` repetitions; empty when none finished.
    pub metric_sq: Option<f64>,
    pub metric_sq_stderr: Option<f64>,
}

/// Rate fit for one algorithm at its selected learning rate.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgorithmFit {
    pub algorithm: String,
    pub problem: String,
    pub learning_rate: f64,
    /// `None` when the grid is too short to fit or a cell had no `Ok` run.
    pub fit: Option<RateFit>,
    pub valid: bool,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    /// Sorted as in the results file.
    pub rows: Vec<ResultRow>,
    /// Aligned with `rows`.
    pub diagnostics: Vec<RunDiagnostics>,
    pub cells: Vec<CellSummary>,
    pub fits: Vec<AlgorithmFit>,
}

impl SweepOutcome {
    pub fn all_failed(&self) -> bool {
        !self.rows.is_empty() && self.rows.iter().all(|r| !r.is_ok())
    }

    pub fn fit_for(&self, algorithm: &str) -> Option<&AlgorithmFit> {
        self.fits.iter().find(|f| f.algorithm == algorithm)
    }

    /// Cell of `algorithm` at its selected learning rate and horizon `t`.
    pub fn selected_cell(&self, algorithm: &str, t: u64) -> Option<&CellSummary> {
        let lr = self.fit_for(algorithm)?.learning_rate;
        self.cells
            .iter()
            .find(|c| c.algorithm == algorithm && c.t == t && c.learning_rate == lr)
    }
}

/// [`run_sweep_with`] using [`run_single`].
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepOutcome> {
    run_sweep_with(cfg, run_single)
}

/// Runs every `(algorithm, learning rate, T, repetition)` cell of `cfg`
/// through `runner`, in parallel, and reduces the results.
///
/// Per algorithm the learning rate with the smallest aggregated metric at
/// the largest horizon is selected (among rates whose cells all have an
/// `Ok` run), and a power law is fitted to its metric-versus-`T` grid.
pub fn run_sweep_with<F>(cfg: &ExperimentConfig, runner: F) -> Result<SweepOutcome>
where
    F: Fn(&RunSpec, u32) -> Result<RunOutcome> + Sync,
{
    let horizons = cfg.horizons();
    let reps = cfg.experiment.repetitions;
    let mut jobs = Vec::new();
    for alg in &cfg.algorithms {
        for lr in cfg.learning_rates(alg) {
            let alg = alg.with_learning_rate(lr);
            for g in 0..horizons.len() {
                let spec = RunSpec::from_config(cfg, &alg, g);
                for rep in 0..reps {
                    jobs.push((spec.clone(), rep));
                }
            }
        }
    }

    let mut results: Vec<(ResultRow, RunDiagnostics)> = jobs
        .par_iter()
        .map(|(spec, rep)| {
            let out = runner(spec, *rep)?;
            let diag = RunDiagnostics::from_outcome(&out);
            Ok((out.row, diag))
        })
        .collect::<Result<_>>()?;
    results.sort_by(|a, b| compare_rows(&a.0, &b.0));
    let (rows, diagnostics): (Vec<_>, Vec<_>) = results.into_iter().unzip();

    let cells = summarize(cfg, &rows);
    let fits = cfg
        .algorithms
        .iter()
        .map(|alg| fit_algorithm(cfg, alg, &cells))
        .collect();
    Ok(SweepOutcome {
        rows,
        diagnostics,
        cells,
        fits,
    })
}

fn summarize(cfg: &ExperimentConfig, rows: &[ResultRow]) -> Vec<CellSummary> {
    let mut cells: Vec<CellSummary> = Vec::new();
    for alg in &cfg.algorithms {
        let name = alg.algorithm().name();
        for lr in cfg.learning_rates(alg) {
            for &t in &cfg.horizons() {
                let members: Vec<&ResultRow> = rows
                    .iter()
                    .filter(|r| r.algorithm == name && r.learning_rate == lr && r.t == t)
                    .collect();
                let sq: Vec<f64> = members
                    .iter()
                    .filter_map(|r| r.stationarity_metric)
                    .map(|m| m * m)
                    .collect();
                let (metric_sq, metric_sq_stderr) = match cfg.experiment.aggregate {
                    Aggregate::Mean => match mean_and_stderr(&sq) {
                        Some((m, se)) => (Some(m), Some(se)),
                        None => (None, None),
                    },
                    Aggregate::Median => (median(&sq), None),
                };
                cells.push(CellSummary {
                    algorithm: name.to_string(),
                    problem: cfg.problem.kind.name().to_string(),
                    learning_rate: lr,
                    t,
                    runs: members.len() as u32,
                    runs_ok: sq.len() as u32,
                    metric_sq,
                    metric_sq_stderr,
                });
            }
        }
    }
    cells
}

fn fit_algorithm(cfg: &ExperimentConfig, alg: &AlgorithmConfig, cells: &[CellSummary]) -> AlgorithmFit {
    let name = alg.algorithm().name();
    let t_last = *cfg.horizons().last().expect("non-empty horizons");
    let grid_for = |lr: f64| -> Vec<&CellSummary> {
        cells
            .iter()
            .filter(|c| c.algorithm == name && c.learning_rate == lr)
            .collect()
    };
    let complete = |lr: f64| grid_for(lr).iter().all(|c| c.metric_sq.is_some());

    let rates = cfg.learning_rates(alg);
    let best = rates
        .iter()
        .copied()
        .filter(|&lr| complete(lr))
        .min_by(|&a, &b| {
            let at_last = |lr: f64| {
                grid_for(lr)
                    .iter()
                    .find(|c| c.t == t_last)
                    .and_then(|c| c.metric_sq)
                    .unwrap_or(f64::INFINITY)
            };
            at_last(a).total_cmp(&at_last(b))
        });

    let problem = cfg.problem.kind.name().to_string();
    match best {
        None => AlgorithmFit {
            algorithm: name.to_string(),
            problem,
            learning_rate: rates[0],
            fit: None,
            valid: false,
        },
        Some(lr) => {
            let points: Vec<(f64, f64)> = grid_for(lr)
                .iter()
                .map(|c| (c.t as f64, c.metric_sq.expect("complete grid")))
                .collect();
            let fit = fit_rate(&points, cfg.experiment.burn_in).ok();
            AlgorithmFit {
                algorithm: name.to_string(),
                problem,
                learning_rate: lr,
                valid: fit.is_some(),
                fit,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::results::RunStatus;

    fn config(extra: &str, algorithms: &str) -> ExperimentConfig {
        ExperimentConfig::from_toml(&format!(
            "[experiment]\nT = 100\nrepetitions = 3\nmaster_seed = 1\n{extra}\n\
             [problem]\nkind = \"sigmoid_well\"\ndim = 3\nsigma = 1.0\n{algorithms}"
        ))
        .unwrap()
    }

    const STORM_PLUS: &str = "[[algorithm]]\nname = \"storm_plus\"\n";

    /// Test double: metric² = lr · T^{−1/3} without running anything.
    fn planted(spec: &RunSpec, rep: u32) -> Result<RunOutcome> {
        let metric_sq = spec.algorithm.learning_rate() * (spec.t as f64).powf(-1.0 / 3.0);
        Ok(RunOutcome {
            row: ResultRow {
                config_hash: spec.hash(),
                algorithm: spec.algorithm.algorithm().name().into(),
                problem: spec.problem.kind.name().into(),
                dim: spec.problem.dim,
                sigma: spec.problem.sigma,
                t: spec.t,
                repetition: rep,
                seed: spec.seed(rep),
                status: RunStatus::Ok,
                stationarity_metric: Some(metric_sq.sqrt()),
                grad_norm_at_output: Some(0.0),
                output_index: Some(0),
                oracle_calls: spec.t,
                wall_ms: None,
                learning_rate: spec.algorithm.learning_rate(),
            },
            records: Vec::new(),
            retained: Vec::new(),
        })
    }

    #[test]
    fn planted_rate_is_recovered() {
        let cfg = config("t_grid = [100, 1000, 10000, 100000]", STORM_PLUS);
        let out = run_sweep_with(&cfg, planted).unwrap();
        assert_eq!(out.rows.len(), 12);
        let fit = out.fit_for("storm_plus").unwrap();
        assert!(fit.valid);
        assert!((fit.fit.as_ref().unwrap().slope + 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn best_learning_rate_is_selected() {
        let cfg = config(
            "t_grid = [10, 100, 1000, 10000]\nlr_sweep = true\nlr_grid = [0.5, 0.01, 0.1]",
            STORM_PLUS,
        );
        let out = run_sweep_with(&cfg, planted).unwrap();
        assert_eq!(out.fit_for("storm_plus").unwrap().learning_rate, 0.01);
        assert_eq!(out.cells.len(), 12);
        let cell = out.selected_cell("storm_plus", 10_000).unwrap();
        assert!((cell.metric_sq.unwrap() - 0.01 * 1e4f64.powf(-1.0 / 3.0)).abs() < 1e-15);
    }

    #[test]
    fn fully_diverged_cell_invalidates_only_that_fit() {
        let cfg = config(
            "t_grid = [10, 100, 1000, 10000]",
            "[[algorithm]]\nname = \"storm_plus\"\n[[algorithm]]\nname = \"sgd\"\nlr = 0.1\n",
        );
        let runner = |spec: &RunSpec, rep: u32| {
            let mut out = planted(spec, rep)?;
            if out.row.algorithm == "sgd" && spec.t == 100 {
                out.row.status = RunStatus::DivergenceDetected;
                out.row.stationarity_metric = None;
            }
            Ok(out)
        };
        let out = run_sweep_with(&cfg, runner).unwrap();
        assert!(!out.fit_for("sgd").unwrap().valid);
        assert!(out.fit_for("storm_plus").unwrap().valid);
        assert!(!out.all_failed());
    }

    #[test]
    fn one_repetition_matches_run_single() {
        let mut cfg = config("", STORM_PLUS);
        cfg.experiment.repetitions = 1;
        let out = run_sweep(&cfg).unwrap();
        let direct = run_single(&RunSpec::from_config(&cfg, &cfg.algorithms[0], 0), 0).unwrap();
        assert_eq!(out.rows, vec![direct.row]);
    }

    #[test]
    fn sweep_is_deterministic() {
        let cfg = config(
            "t_grid = [50, 100]",
            "[[algorithm]]\nname = \"storm_plus\"\n[[algorithm]]\nname = \"adam\"\nlr = 0.01\n",
        );
        let a = run_sweep(&cfg).unwrap();
        let b = run_sweep(&cfg).unwrap();
        assert_eq!(a.rows, b.rows);
        assert_eq!(a.cells, b.cells);
        assert_eq!(a.rows.len(), 12);
        assert_eq!(a.diagnostics.len(), 12);
    }
}
