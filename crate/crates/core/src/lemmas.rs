//! Executable forms of the summation inequalities behind the convergence
//! analysis, checked on random sequences and on sequences replayed from real
//! optimizer runs.
//!
//! Every check computes both sides in `f64` and declares the inequality to
//! hold when `lhs ≤ rhs·(1 + 1e-12) + 1e-300`. All terms are positive sums,
//! so that slack absorbs rounding without hiding a genuine violation.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::diagnostics::{Recorder, RecorderOptions, TrajectoryRecord};
use crate::error::{Error, Result};
use crate::optimizers::{MomentumSchedule, Optimizer, StormPlus};
use crate::oracle::{Problem, ProblemParams, ProblemSpec, SampleStream, StochasticOracle};

/// Relative slack of the "holds" test.
pub const REL_TOL: f64 = 1e-12;

pub fn within_tolerance(lhs: f64, rhs: f64) -> bool {
    lhs <= rhs * (1.0 + REL_TOL) + 1e-300
}

/// Input shared by the sequence lemmas. Not every field is used by every
/// check: `p` by the two power-sum bounds, `b0` by the shifted one, `bmax`
/// by the two bounded variants.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceCase {
    pub values: Vec<f64>,
    pub p: f64,
    pub b0: f64,
    pub bmax: f64,
}

impl SequenceCase {
    /// `p = 1/2`, `b0 = 1`, `bmax = max(values)`.
    pub fn new(values: Vec<f64>) -> Self {
        let bmax = values.iter().copied().fold(0.0, f64::max);
        Self {
            values,
            p: 0.5,
            b0: 1.0,
            bmax,
        }
    }

    pub fn with_p(mut self, p: f64) -> Self {
        self.p = p;
        self
    }

    pub fn with_b0(mut self, b0: f64) -> Self {
        self.b0 = b0;
        self
    }

    pub fn with_bmax(mut self, bmax: f64) -> Self {
        self.bmax = bmax;
        self
    }

    fn check_p(&self) -> Result<()> {
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(Error::invalid(format!("p must lie in (0, 1), got {}", self.p)));
        }
        Ok(())
    }

    fn check_nonnegative(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::invalid("empty sequence"));
        }
        if let Some(v) = self.values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::invalid(format!("values must be finite and ≥ 0, got {v}")));
        }
        Ok(())
    }
}

/// Both sides of one inequality.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Check {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

impl Check {
    fn new(lhs: f64, rhs: f64) -> Self {
        Self {
            lhs,
            rhs,
            holds: within_tolerance(lhs, rhs),
        }
    }

    /// `lhs / rhs`; a value above 1 is a violation.
    pub fn ratio(&self) -> f64 {
        if self.rhs > 0.0 {
            self.lhs / self.rhs
        } else if self.lhs > 0.0 {
            f64::INFINITY
        } else {
            0.0
        }
    }
}

/// `Σ_i b_i / (Σ_{j≤i} b_j)^p ≤ (Σ_i b_i)^{1−p} / (1−p)` for `b_1 > 0`,
/// `b_i ≥ 0`.
pub fn check_technical_1(case: &SequenceCase) -> Result<Check> {
    case.check_p()?;
    case.check_nonnegative()?;
    if case.values[0] <= 0.0 {
        return Err(Error::invalid("the first value must be positive"));
    }
    let mut partial: f64 = 0.0;
    let mut lhs = 0.0;
    for &b in &case.values {
        partial += b;
        lhs += b / partial.powf(case.p);
    }
    Ok(Check::new(lhs, partial.powf(1.0 - case.p) / (1.0 - case.p)))
}

/// `Σ_i a_i / (1 + Σ_{j≤i} a_j)^{4/3} ≤ 12` for `a_i ≥ 0`.
///
/// The bound does not depend on any upper limit for the `a_i`, so none is
/// required here.
pub fn check_const_sum(case: &SequenceCase) -> Result<Check> {
    case.check_nonnegative()?;
    let mut partial: f64 = 1.0;
    let mut lhs = 0.0;
    for &a in &case.values {
        partial += a;
        lhs += a / partial.powf(4.0 / 3.0);
    }
    Ok(Check::new(lhs, 12.0))
}

/// `Σ_i a_i / (1 + Σ_{j<i} a_j)^{4/3} ≤ 12 + 2·a_max` for `a_i ∈ [0, a_max]`.
pub fn check_const_sum_delayed(case: &SequenceCase) -> Result<Check> {
    case.check_nonnegative()?;
    if let Some(v) = case.values.iter().find(|v| **v > case.bmax) {
        return Err(Error::invalid(format!(
            "value {v} exceeds the declared bound {}",
            case.bmax
        )));
    }
    let mut partial: f64 = 1.0;
    let mut lhs = 0.0;
    for &a in &case.values {
        lhs += a / partial.powf(4.0 / 3.0);
        partial += a;
    }
    Ok(Check::new(lhs, 12.0 + 2.0 * case.bmax))
}

/// `Σ_i b_i / (b_0 + Σ_{j<i} b_j)^p ≤ b / b_0^p + (2/(1−p))(b_0 + Σ_i b_i)^{1−p}`
/// for `b_i ∈ (0, b]`, `b_0 > 0`.
pub fn check_shifted_technical_1(case: &SequenceCase) -> Result<Check> {
    case.check_p()?;
    case.check_nonnegative()?;
    if !(case.b0 > 0.0 && case.b0.is_finite()) {
        return Err(Error::invalid(format!("b0 must be positive, got {}", case.b0)));
    }
    if let Some(v) = case.values.iter().find(|v| !(**v > 0.0 && **v <= case.bmax)) {
        return Err(Error::invalid(format!(
            "values must lie in (0, {}], got {v}",
            case.bmax
        )));
    }
    let mut partial = case.b0;
    let mut lhs = 0.0;
    for &b in &case.values {
        lhs += b / partial.powf(case.p);
        partial += b;
    }
    let rhs = case.bmax / case.b0.powf(case.p)
        + 2.0 / (1.0 - case.p) * partial.powf(1.0 - case.p);
    Ok(Check::new(lhs, rhs))
}

/// Outcome of [`check_momentum_gap`].
#[derive(Debug, Clone, PartialEq)]
pub struct MomentumGapReport {
    /// `β = min(1, 1/G⁴)`.
    pub beta: f64,
    /// Last `t` with `a_t ≥ β`.
    pub tau_star: usize,
    /// Largest `1/a_{t+1} − 1/a_t` over `t > τ*`; 0 when there is no such `t`.
    pub max_gap: f64,
    /// Largest `1/a_{t+1}` over `t ≤ τ*`.
    pub max_early: f64,
    /// `(β^{−3/2} + G²)^{2/3}`.
    pub early_bound: f64,
    pub gap_violations: usize,
    pub early_violations: usize,
}

impl MomentumGapReport {
    pub fn holds(&self) -> bool {
        self.gap_violations == 0 && self.early_violations == 0
    }

    /// Worst of the two normalized margins; above 1 means a violation.
    pub fn ratio(&self) -> f64 {
        (self.max_gap / (2.0 / 3.0)).max(self.max_early / self.early_bound)
    }
}

/// Rebuilds `a_{t+1} = (1 + Σ_{i≤t} ‖g_i‖²)^{−2/3}` from the squared gradient
/// norms and checks that the reciprocal momentum grows by at most 2/3 per
/// step once `a_t` has fallen below `β`, and stays below
/// `(β^{−3/2} + G²)^{2/3}` before that.
pub fn check_momentum_gap(gnorm_sq: &[f64], grad_bound: f64) -> Result<MomentumGapReport> {
    if gnorm_sq.is_empty() {
        return Err(Error::invalid("empty gradient sequence"));
    }
    if !(grad_bound > 0.0 && grad_bound.is_finite()) {
        return Err(Error::invalid(format!("gradient bound must be positive, got {grad_bound}")));
    }
    let g2_bound = grad_bound * grad_bound;
    if let Some(v) = gnorm_sq.iter().find(|v| !(**v >= 0.0 && within_tolerance(**v, g2_bound))) {
        return Err(Error::invalid(format!(
            "squared gradient norm {v} exceeds the declared bound G² = {g2_bound}"
        )));
    }
    let beta = 1f64.min(g2_bound.powi(-2));
    let early_bound = (beta.powf(-1.5) + g2_bound).powf(2.0 / 3.0);

    // recip[t-1] = 1/a_t = (1 + S_{t−1})^{2/3}
    let n = gnorm_sq.len();
    let mut sums = Vec::with_capacity(n + 1);
    sums.push(1.0);
    for &g in gnorm_sq {
        sums.push(sums.last().unwrap() + g);
    }
    // a_t ≥ β ⟺ 1 + S_{t−1} ≤ β^{−3/2}; a_1 = 1 ≥ β always.
    let threshold = beta.powf(-1.5);
    let tau_star = (1..=n).rev().find(|&t| sums[t - 1] <= threshold).unwrap_or(1);

    let mut report = MomentumGapReport {
        beta,
        tau_star,
        max_gap: 0.0,
        max_early: 0.0,
        early_bound,
        gap_violations: 0,
        early_violations: 0,
    };
    for t in 1..=n {
        let (y, x) = (sums[t - 1], sums[t]);
        if t <= tau_star {
            let recip_next = x.powf(2.0 / 3.0);
            report.max_early = report.max_early.max(recip_next);
            if !within_tolerance(recip_next, early_bound) {
                report.early_violations += 1;
            }
        } else {
            // x^{2/3} − y^{2/3} = (x − y)(u + v)/(u² + uv + v²) with u, v the
            // cube roots; avoids cancellation when S is large.
            let (u, v) = (x.cbrt(), y.cbrt());
            let gap = gnorm_sq[t - 1] * (u + v) / (u * u + u * v + v * v);
            report.max_gap = report.max_gap.max(gap);
            if !within_tolerance(gap, 2.0 / 3.0) {
                report.gap_violations += 1;
            }
        }
    }
    Ok(report)
}

/// The lemma families covered by the randomized suite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Lemma {
    #[serde(rename = "technical_1")]
    Technical1,
    ConstSum,
    ConstSumDelayed,
    #[serde(rename = "shifted_technical_1")]
    ShiftedTechnical1,
    MomentumGap,
}

impl Lemma {
    pub const ALL: [Lemma; 5] = [
        Lemma::Technical1,
        Lemma::ConstSum,
        Lemma::ConstSumDelayed,
        Lemma::ShiftedTechnical1,
        Lemma::MomentumGap,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Lemma::Technical1 => "technical_1",
            Lemma::ConstSum => "const_sum",
            Lemma::ConstSumDelayed => "const_sum_delayed",
            Lemma::ShiftedTechnical1 => "shifted_technical_1",
            Lemma::MomentumGap => "momentum_gap",
        }
    }
}

impl std::fmt::Display for Lemma {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SuiteOptions {
    pub cases: usize,
    pub seed: u64,
    pub max_len: usize,
    /// Values are drawn log-uniformly from this range.
    pub value_range: (f64, f64),
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self {
            cases: 1000,
            seed: 0,
            max_len: 10_000,
            value_range: (1e-6, 1e3),
        }
    }
}

/// Worst case of one lemma over a batch of cases.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaSummary {
    pub lemma: Lemma,
    pub cases: usize,
    pub violations: usize,
    /// Largest `lhs/rhs` seen.
    pub worst_ratio: f64,
    pub worst_case: usize,
    pub worst_len: usize,
}

impl LemmaSummary {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (rng.random_range(lo.ln()..=hi.ln())).exp()
}

/// Random case for `lemma`, satisfying its preconditions. Lengths are
/// log-uniform on `[1, max_len]` so short sequences are not drowned out;
/// `p` is a random fraction `k/m` with `m ≤ 12`; a tenth of the entries
/// after the first are zeroed where zeros are allowed.
fn random_case(lemma: Lemma, opts: &SuiteOptions, rng: &mut ChaCha8Rng) -> SequenceCase {
    let n = log_uniform(rng, 1.0, opts.max_len as f64).round().max(1.0) as usize;
    let (lo, hi) = opts.value_range;
    let zeros_ok = !matches!(lemma, Lemma::ShiftedTechnical1);
    let values: Vec<f64> = (0..n)
        .map(|i| {
            if zeros_ok && i > 0 && rng.random_bool(0.1) {
                0.0
            } else {
                log_uniform(rng, lo, hi)
            }
        })
        .collect();
    let m = rng.random_range(2..=12u32);
    let k = rng.random_range(1..m);
    let b0 = log_uniform(rng, lo, hi);
    SequenceCase::new(values)
        .with_p(f64::from(k) / f64::from(m))
        .with_b0(b0)
}

/// `(holds, lhs/rhs)` for one case.
pub fn evaluate(lemma: Lemma, case: &SequenceCase) -> Result<(bool, f64)> {
    Ok(match lemma {
        Lemma::Technical1 => {
            let c = check_technical_1(case)?;
            (c.holds, c.ratio())
        }
        Lemma::ConstSum => {
            let c = check_const_sum(case)?;
            (c.holds, c.ratio())
        }
        Lemma::ConstSumDelayed => {
            let c = check_const_sum_delayed(case)?;
            (c.holds, c.ratio())
        }
        Lemma::ShiftedTechnical1 => {
            let c = check_shifted_technical_1(case)?;
            (c.holds, c.ratio())
        }
        Lemma::MomentumGap => {
            let r = check_momentum_gap(&case.values, case.bmax.sqrt())?;
            (r.holds(), r.ratio())
        }
    })
}

/// Runs `opts.cases` random cases of every lemma. Case `i` of lemma `k` uses
/// ChaCha stream `k·2³² + i` of `opts.seed`, so results do not depend on the
/// thread schedule.
pub fn run_random_suite(opts: &SuiteOptions) -> Result<Vec<LemmaSummary>> {
    if opts.cases == 0 || opts.max_len == 0 {
        return Err(Error::invalid("suite needs at least one case of length ≥ 1"));
    }
    let (lo, hi) = opts.value_range;
    if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
        return Err(Error::invalid("value range must satisfy 0 < lo ≤ hi < ∞"));
    }
    Lemma::ALL
        .iter()
        .enumerate()
        .map(|(k, &lemma)| {
            let outcomes: Vec<(bool, f64, usize)> = (0..opts.cases)
                .into_par_iter()
                .map(|i| {
                    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
                    rng.set_stream(((k as u64) << 32) + i as u64);
                    let case = random_case(lemma, opts, &mut rng);
                    let (holds, ratio) = evaluate(lemma, &case)?;
                    Ok((holds, ratio, case.values.len()))
                })
                .collect::<Result<_>>()?;
            let mut summary = LemmaSummary {
                lemma,
                cases: opts.cases,
                violations: outcomes.iter().filter(|o| !o.0).count(),
                worst_ratio: f64::NEG_INFINITY,
                worst_case: 0,
                worst_len: 0,
            };
            for (i, &(_, ratio, len)) in outcomes.iter().enumerate() {
                if ratio > summary.worst_ratio {
                    summary.worst_ratio = ratio;
                    summary.worst_case = i;
                    summary.worst_len = len;
                }
            }
            Ok(summary)
        })
        .collect()
}

/// One row per lemma: `lemma,cases,violations,worst_ratio,worst_case,worst_len`.
pub fn write_margins(summaries: &[LemmaSummary], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for s in summaries {
        w.serialize(s)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Scalar sequences taken from one STORM+ trajectory (`t = 1..T`).
#[derive(Debug, Clone)]
pub struct Harvest {
    pub g_sq: Vec<f64>,
    pub d_sq: Vec<f64>,
    pub exact_grad_sq: Vec<f64>,
    pub eps_sq: Vec<f64>,
    /// `a_1, …, a_{T+1}`.
    pub momentum: Vec<f64>,
    pub lr_scale: f64,
    pub lipschitz: f64,
    pub value_bound: f64,
    pub grad_bound: f64,
}

impl Harvest {
    /// Needs the full trajectory (`log_stride = 1`) of an adaptive STORM+
    /// run; `a_{T+1}` is rebuilt from the logged gradient norms.
    pub fn from_records(records: &[TrajectoryRecord], lr_scale: f64, spec: &ProblemSpec) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::invalid("empty trajectory"));
        }
        if records.iter().enumerate().any(|(i, r)| r.t != i as u64 + 1) {
            return Err(Error::invalid("harvesting needs every iterate logged from t = 1"));
        }
        let g_sq: Vec<f64> = records.iter().map(|r| r.norm_g_sq).collect();
        let mut momentum: Vec<f64> = records.iter().map(|r| r.a).collect();
        momentum.push((1.0 + g_sq.iter().sum::<f64>()).powf(-2.0 / 3.0));
        Ok(Self {
            d_sq: records.iter().map(|r| r.norm_d_sq).collect(),
            exact_grad_sq: records.iter().map(|r| r.norm_exact_grad_sq).collect(),
            eps_sq: records.iter().map(|r| r.norm_eps_sq).collect(),
            g_sq,
            momentum,
            lr_scale,
            lipschitz: spec.lipschitz,
            value_bound: spec.value_bound,
            grad_bound: spec.grad_bound,
        })
    }

    /// Runs adaptive STORM+ for `steps` iterations and harvests it.
    pub fn collect(params: &ProblemParams, steps: u64, lr_scale: f64, seed: u64) -> Result<Self> {
        let problem = Problem::build(params)?;
        let mut stream = SampleStream::substream(seed, 0);
        let mut opt = StormPlus::init(
            &problem,
            params.start_point(),
            lr_scale,
            MomentumSchedule::Adaptive,
            &mut stream,
        )?;
        let mut recorder = Recorder::new(RecorderOptions::default(), problem.spec().lipschitz)?;
        for _ in 0..steps {
            let report = opt.step(&problem, &mut stream)?;
            recorder.observe(report, &problem)?;
        }
        Self::from_records(recorder.records(), lr_scale, problem.spec())
    }

    /// The gradient-sum inequality for step-size scale `s`:
    ///
    /// `Σ‖∇f(x_t)‖² ≤ Σ‖ε_t‖² + (2B/s)·a_{T+1}^{−1/3}(Σ‖d_t‖²)^{1/3} + s·(3/2)L(Σ‖d_t‖²)^{2/3}`
    ///
    /// It follows from smoothness along the trajectory, so it holds
    /// pathwise, with `B` bounding `f − min f`. `None` when `B` or `L` is
    /// not finite.
    pub fn check_gradient_sum(&self) -> Option<Check> {
        if !(self.value_bound.is_finite() && self.lipschitz.is_finite()) {
            return None;
        }
        let s = self.lr_scale;
        let sum_d: f64 = self.d_sq.iter().sum();
        let a_final = *self.momentum.last().expect("non-empty");
        let lhs: f64 = self.exact_grad_sq.iter().sum();
        let rhs = self.eps_sq.iter().sum::<f64>()
            + 2.0 * self.value_bound / s * a_final.powf(-1.0 / 3.0) * sum_d.cbrt()
            + s * 1.5 * self.lipschitz * sum_d.powf(2.0 / 3.0);
        Some(Check::new(lhs, rhs))
    }

    /// Every lemma instantiated on the sequences it is applied to in the
    /// analysis, plus the gradient-sum inequality.
    pub fn check_all(&self) -> Result<Vec<(&'static str, Check)>> {
        let mut out = Vec::new();
        // the step-size denominator Σ‖d_i‖²/a_{i+1}
        let b: Vec<f64> = self
            .d_sq
            .iter()
            .zip(&self.momentum[1..])
            .map(|(d, a)| d / a)
            .collect();
        if b[0] > 0.0 {
            let c = check_technical_1(&SequenceCase::new(b).with_p(1.0 / 3.0))?;
            out.push((Lemma::Technical1.name(), c));
        }
        out.push((
            Lemma::ConstSum.name(),
            check_const_sum(&SequenceCase::new(self.g_sq.clone()))?,
        ));
        let g2_bound = if self.grad_bound.is_finite() {
            self.grad_bound * self.grad_bound
        } else {
            self.g_sq.iter().copied().fold(0.0, f64::max)
        };
        out.push((
            Lemma::ConstSumDelayed.name(),
            check_const_sum_delayed(&SequenceCase::new(self.g_sq.clone()).with_bmax(g2_bound))?,
        ));
        if self.g_sq.iter().all(|g| *g > 0.0) {
            let case = SequenceCase::new(self.g_sq.clone())
                .with_p(2.0 / 3.0)
                .with_b0(1.0)
                .with_bmax(g2_bound);
            out.push((Lemma::ShiftedTechnical1.name(), check_shifted_technical_1(&case)?));
        }
        let gap = check_momentum_gap(&self.g_sq, g2_bound.sqrt())?;
        out.push((
            Lemma::MomentumGap.name(),
            Check {
                lhs: gap.ratio(),
                rhs: 1.0,
                holds: gap.holds(),
            },
        ));
        if let Some(c) = self.check_gradient_sum() {
            out.push(("gradient_sum", c));
        }
        Ok(out)
    }
}
