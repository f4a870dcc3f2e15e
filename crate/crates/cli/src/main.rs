use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use storm_core::harness::{run_single, run_sweep, write_results, write_trajectory, RunSpec, SweepOutcome};
use storm_core::lemmas::{run_random_suite, write_margins, Harvest, SuiteOptions};
use storm_core::{Error, ExperimentConfig, ProblemKind, ProblemParams, ResultRow};

#[derive(Parser)]
#[command(name = "storm", version, about = "Parameter-free stochastic optimization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every algorithm at horizon T for each repetition.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Sweep the T grid (and learning rates, if enabled) and fit rates.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check the technical inequalities on random and harvested sequences.
    VerifyLemmas {
        #[arg(long, default_value_t = 1000)]
        cases: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Where to write the worst-case margins.
        #[arg(long, default_value = "lemma_margins.csv")]
        margins: PathBuf,
    },
    /// List the built-in problems and their constants.
    ListProblems,
}

/// Exit statuses beyond plain success.
mod exit {
    pub const INVALID_CONFIG: u8 = 1;
    pub const ALL_DIVERGED: u8 = 2;
    pub const IO: u8 = 3;
    pub const LEMMA_VIOLATION: u8 = 4;
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, out } => run(&config, &out),
        Command::Sweep { config, out } => sweep(&config, &out),
        Command::VerifyLemmas { cases, seed, margins } => verify_lemmas(cases, seed, &margins),
        Command::ListProblems => {
            list_problems();
            Ok(ExitCode::SUCCESS)
        }
    };
    match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Io { .. } | Error::Csv(_)) => exit::IO,
        Some(Error::Config(_) | Error::InvalidInput(_)) => exit::INVALID_CONFIG,
        _ if err.downcast_ref::<std::io::Error>().is_some() => exit::IO,
        _ => exit::INVALID_CONFIG,
    }
}

fn load(path: &Path) -> anyhow::Result<ExperimentConfig> {
    ExperimentConfig::load(path).with_context(|| format!("loading {}", path.display()))
}

fn ensure_dir(dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir)
        .map_err(|e| Error::Io { path: dir.to_path_buf(), source: e })
        .with_context(|| "creating output directory")?;
    Ok(())
}

fn status_code(rows: &[ResultRow]) -> ExitCode {
    if !rows.is_empty() && rows.iter().all(|r| !r.is_ok()) {
        eprintln!("every run diverged or started at a stationary point");
        ExitCode::from(exit::ALL_DIVERGED)
    } else {
        ExitCode::SUCCESS
    }
}

fn run(config: &Path, out: &Path) -> anyhow::Result<ExitCode> {
    let mut cfg = load(config)?;
    // `run` is a single horizon: the grid and the learning-rate sweep belong
    // to `sweep`.
    cfg.experiment.t_grid = None;
    ensure_dir(out)?;

    let mut rows = Vec::new();
    for alg in &cfg.algorithms {
        let spec = RunSpec::from_config(&cfg, alg, 0);
        for rep in 0..cfg.experiment.repetitions {
            let outcome = run_single(&spec, rep)?;
            if cfg.experiment.dump_trajectories {
                let name = format!("trajectory_{}_rep{rep}.csv", outcome.row.algorithm);
                write_trajectory(&outcome.records, &out.join(name))?;
            }
            rows.push(outcome.row);
        }
    }
    write_results(&rows, &out.join("results.csv"))?;

    println!("{:<22} {:>5} {:>20} {:>14}", "algorithm", "rep", "status", "metric");
    let mut sorted = rows.clone();
    storm_core::harness::sort_rows(&mut sorted);
    for r in &sorted {
        let metric = r.stationarity_metric.map_or_else(|| "-".into(), |m| format!("{m:.6e}"));
        println!("{:<22} {:>5} {:>20} {:>14}", r.algorithm, r.repetition, format!("{:?}", r.status), metric);
    }
    Ok(status_code(&rows))
}

fn sweep(config: &Path, out: &Path) -> anyhow::Result<ExitCode> {
    let cfg = load(config)?;
    ensure_dir(out)?;
    let outcome = run_sweep(&cfg)?;
    write_results(&outcome.rows, &out.join("results.csv"))?;
    write_cells(&outcome, &out.join("cells.csv"))?;
    write_fits(&outcome, &out.join("fits.csv"))?;

    println!("{:<22} {:>10} {:>10} {:>8}  valid", "algorithm", "lr", "slope", "R^2");
    for f in &outcome.fits {
        let (slope, r2) = f
            .fit
            .as_ref()
            .map_or(("-".into(), "-".into()), |fit| (format!("{:.4}", fit.slope), format!("{:.4}", fit.r_squared)));
        println!("{:<22} {:>10.4e} {:>10} {:>8}  {}", f.algorithm, f.learning_rate, slope, r2, f.valid);
    }
    Ok(status_code(&outcome.rows))
}

fn write_cells(outcome: &SweepOutcome, path: &Path) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(Error::from)?;
    for c in &outcome.cells {
        w.serialize(c).map_err(Error::from)?;
    }
    w.flush().map_err(|e| Error::Io { path: path.to_path_buf(), source: e })?;
    Ok(())
}

fn write_fits(outcome: &SweepOutcome, path: &Path) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(Error::from)?;
    w.write_record(["algorithm", "problem", "learning_rate", "slope", "intercept", "r_squared", "valid"])
        .map_err(Error::from)?;
    for f in &outcome.fits {
        let cell = |v: Option<f64>| v.map_or_else(String::new, |v| v.to_string());
        w.write_record([
            f.algorithm.clone(),
            f.problem.clone(),
            f.learning_rate.to_string(),
            cell(f.fit.as_ref().map(|x| x.slope)),
            cell(f.fit.as_ref().map(|x| x.intercept)),
            cell(f.fit.as_ref().map(|x| x.r_squared)),
            f.valid.to_string(),
        ])
        .map_err(Error::from)?;
    }
    w.flush().map_err(|e| Error::Io { path: path.to_path_buf(), source: e })?;
    Ok(())
}

fn verify_lemmas(cases: usize, seed: u64, margins: &Path) -> anyhow::Result<ExitCode> {
    let opts = SuiteOptions { cases, seed, ..SuiteOptions::default() };
    let summaries = run_random_suite(&opts)?;
    write_margins(&summaries, margins)?;

    println!("{:<22} {:>7} {:>10} {:>14}  result", "lemma", "cases", "violations", "worst lhs/rhs");
    let mut ok = true;
    for s in &summaries {
        ok &= s.passed();
        println!(
            "{:<22} {:>7} {:>10} {:>14.6}  {}",
            s.lemma.name(),
            s.cases,
            s.violations,
            s.worst_ratio,
            if s.passed() { "PASS" } else { "FAIL" }
        );
    }

    let harvest = Harvest::collect(&ProblemParams::new(ProblemKind::SigmoidWell, 10, 1.0), 2000, 1.0, seed)?;
    for (name, check) in harvest.check_all()? {
        ok &= check.holds;
        println!(
            "{:<22} {:>7} {:>10} {:>14.6}  {}",
            format!("harvested:{name}"),
            1,
            usize::from(!check.holds),
            check.ratio(),
            if check.holds { "PASS" } else { "FAIL" }
        );
    }
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(exit::LEMMA_VIOLATION) })
}

fn list_problems() {
    for kind in ProblemKind::ALL {
        println!("{:<28} {}", kind.name(), kind.description());
    }
}
