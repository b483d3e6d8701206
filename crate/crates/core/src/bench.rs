//! Seeded Monte-Carlo experiments over scenarios and algorithms.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::baselines::{self, BaselineAlgo, BaselineConfig};
use crate::concentration::ConfidenceSchedule;
use crate::convex::{self, ConvexConfig};
use crate::environments::scenario;
use crate::error::{Error, Result};
use crate::instance::{BanditInstance, RunResult};
use crate::pairwise::{self, PairwiseConfig, DEFAULT_MAX_ROUNDS};
use crate::protocol::trial_rng;

/// Column order of the results file.
pub const CSV_HEADER: [&str; 12] =
    ["scenario", "algo", "trial", "seed", "delta", "chosen", "true_best", "correct", "total_queries", "rounds", "flag", "wall_ms"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AlgoKind {
    /// Pairwise tests, eliminated arms queried until `82 t`.
    Pairwise,
    /// Pairwise tests, eliminated arms queried until `2 t`.
    PairwisePlus,
    /// Pairwise tests, eliminated arms dropped at once.
    PairwiseNoOversample,
    /// Convex-combination tests, eliminated arms queried until `98 t`.
    Convex,
    Hoeffding,
    Lucb,
    EmpVarSe,
}

impl AlgoKind {
    pub const ALL: [AlgoKind; 7] = [
        AlgoKind::Pairwise,
        AlgoKind::PairwisePlus,
        AlgoKind::PairwiseNoOversample,
        AlgoKind::Convex,
        AlgoKind::Hoeffding,
        AlgoKind::Lucb,
        AlgoKind::EmpVarSe,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AlgoKind::Pairwise => "pairwise",
            AlgoKind::PairwisePlus => "pairwise-plus",
            AlgoKind::PairwiseNoOversample => "pairwise-nooversample",
            AlgoKind::Convex => "convex",
            AlgoKind::Hoeffding => "hoeffding",
            AlgoKind::Lucb => "lucb",
            AlgoKind::EmpVarSe => "empvar-se",
        }
    }

    /// One run of this algorithm. `mult_override` replaces the oversampling
    /// multiplier of `pairwise` and `convex`; other variants keep theirs.
    pub fn run(
        self,
        instance: &BanditInstance,
        rng: crate::protocol::TrialRng,
        sched: &ConfidenceSchedule,
        max_rounds: u64,
        mult_override: Option<f64>,
    ) -> Result<RunResult> {
        let pw = |mult: f64| PairwiseConfig { max_rounds, ..PairwiseConfig::with_mult(mult) };
        let base = |algo| BaselineConfig { max_rounds, ..BaselineConfig::for_instance(algo, instance) };
        match self {
            AlgoKind::Pairwise => {
                pairwise::run(instance, rng, sched, &pw(mult_override.unwrap_or(PairwiseConfig::DEFAULT_MULT)))
            }
            AlgoKind::PairwisePlus => pairwise::run(instance, rng, sched, &pw(PairwiseConfig::PLUS_MULT)),
            AlgoKind::PairwiseNoOversample => pairwise::run(instance, rng, sched, &pw(0.0)),
            AlgoKind::Convex => {
                let cfg = ConvexConfig {
                    oversample_mult: mult_override.unwrap_or(ConvexConfig::DEFAULT_MULT),
                    max_rounds,
                    ..ConvexConfig::default()
                };
                convex::run(instance, rng, sched, &cfg)
            }
            AlgoKind::Hoeffding => baselines::run(instance, rng, sched, &base(BaselineAlgo::HoeffdingRace)),
            AlgoKind::Lucb => baselines::run(instance, rng, sched, &base(BaselineAlgo::Lucb)),
            AlgoKind::EmpVarSe => baselines::run(instance, rng, sched, &base(BaselineAlgo::EmpVarSE)),
        }
    }
}

impl fmt::Display for AlgoKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AlgoKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AlgoKind::ALL.into_iter().find(|a| a.name() == s).ok_or_else(|| Error::UnknownAlgo(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    /// Preset names or instance file paths.
    pub scenarios: Vec<String>,
    pub algos: Vec<AlgoKind>,
    pub delta: f64,
    pub trials: u64,
    pub seed: u64,
    pub max_rounds: u64,
    /// Use `delta` as the schedule level instead of `delta / 4`.
    pub raw_delta: bool,
    pub oversample_mult: Option<f64>,
    pub parallel: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            scenarios: Vec::new(),
            algos: Vec::new(),
            delta: 0.1,
            trials: 100,
            seed: 0,
            max_rounds: DEFAULT_MAX_ROUNDS,
            raw_delta: false,
            oversample_mult: None,
            parallel: true,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials < 1 {
            return Err(Error::BadConfig("trials must be at least 1".into()));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::BadDelta(self.delta));
        }
        if let Some(m) = self.oversample_mult {
            if !(m >= 0.0 && m.is_finite()) {
                return Err(Error::BadConfig(format!("oversample_mult must be >= 0, got {m}")));
            }
        }
        Ok(())
    }
}

/// One line of the results file. `chosen` and `true_best` are 1-based.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub scenario: String,
    pub algo: String,
    pub trial: u64,
    pub seed: u64,
    pub delta: f64,
    pub chosen: usize,
    pub true_best: usize,
    pub correct: bool,
    pub total_queries: u64,
    pub rounds: u64,
    pub flag: String,
    pub wall_ms: f64,
}

/// Runs one trial of `algo` on a resolved scenario.
pub fn run_trial(
    name: &str,
    instance: &BanditInstance,
    algo: AlgoKind,
    trial: u64,
    cfg: &BenchConfig,
) -> Result<(RunResult, BenchRow)> {
    let sched = ConfidenceSchedule::with_split(cfg.delta, instance.arms(), cfg.raw_delta)?;
    let rng = trial_rng(cfg.seed, name, trial);
    let start = Instant::now();
    let res = algo.run(instance, rng, &sched, cfg.max_rounds, cfg.oversample_mult)?;
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    let row = BenchRow {
        scenario: name.to_string(),
        algo: algo.name().to_string(),
        trial,
        seed: cfg.seed,
        delta: cfg.delta,
        chosen: res.chosen.0 + 1,
        true_best: instance.best().0 + 1,
        correct: res.correct,
        total_queries: res.total_queries,
        rounds: res.rounds,
        flag: res.flag.as_str().to_string(),
        wall_ms: (wall_ms * 1e3).round() / 1e3,
    };
    Ok((res, row))
}

/// Runs every (scenario, algo, trial) cell; rows come back sorted by
/// scenario, algorithm and trial regardless of execution order.
pub fn run_bench(cfg: &BenchConfig) -> Result<Vec<BenchRow>> {
    cfg.validate()?;
    let instances: Vec<(String, BanditInstance)> =
        cfg.scenarios.iter().map(|s| Ok((s.clone(), scenario(s)?))).collect::<Result<_>>()?;
    let jobs: Vec<(usize, AlgoKind, u64)> = (0..instances.len())
        .flat_map(|s| cfg.algos.iter().flat_map(move |&a| (0..cfg.trials).map(move |t| (s, a, t))))
        .collect();
    let work = |&(s, a, t): &(usize, AlgoKind, u64)| {
        let (name, inst) = &instances[s];
        run_trial(name, inst, a, t, cfg).map(|(_, row)| row)
    };
    let mut rows: Vec<BenchRow> = if cfg.parallel {
        jobs.par_iter().map(work).collect::<Result<_>>()?
    } else {
        jobs.iter().map(work).collect::<Result<_>>()?
    };
    rows.sort_by(|a, b| (&a.scenario, &a.algo, a.trial).cmp(&(&b.scenario, &b.algo, b.trial)));
    Ok(rows)
}

pub fn write_csv<W: Write>(rows: &[BenchRow], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Aggregates over the trials of one (scenario, algo) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub scenario: String,
    pub algo: String,
    pub trials: u64,
    pub mean_queries: f64,
    /// Standard error of `mean_queries`; 0 for a single trial.
    pub se_queries: f64,
    pub error_rate: f64,
    pub flagged: u64,
}

/// Mean and standard error of a sample.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub fn summarize(rows: &[BenchRow]) -> Vec<CellSummary> {
    let mut out: Vec<CellSummary> = Vec::new();
    let mut start = 0;
    while start < rows.len() {
        let key = (&rows[start].scenario, &rows[start].algo);
        let end = start + rows[start..].iter().take_while(|r| (&r.scenario, &r.algo) == key).count();
        let cell = &rows[start..end];
        let q: Vec<f64> = cell.iter().map(|r| r.total_queries as f64).collect();
        let (mean, se) = mean_se(&q);
        out.push(CellSummary {
            scenario: key.0.clone(),
            algo: key.1.clone(),
            trials: cell.len() as u64,
            mean_queries: mean,
            se_queries: se,
            error_rate: cell.iter().filter(|r| !r.correct).count() as f64 / cell.len() as f64,
            flagged: cell.iter().filter(|r| r.flag != "ok").count() as u64,
        });
        start = end;
    }
    out
}

/// Aligned text table of cell summaries.
pub fn format_summary(cells: &[CellSummary]) -> String {
    let mut s = format!(
        "{:<22}{:<24}{:>7}{:>16}{:>12}{:>9}{:>9}\n",
        "scenario", "algo", "trials", "mean queries", "se", "error", "flagged"
    );
    for c in cells {
        s.push_str(&format!(
            "{:<22}{:<24}{:>7}{:>16.1}{:>12.1}{:>9.4}{:>9}\n",
            c.scenario, c.algo, c.trials, c.mean_queries, c.se_queries, c.error_rate, c.flagged
        ));
    }
    s
}
