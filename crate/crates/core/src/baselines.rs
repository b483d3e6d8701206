//! Comparison algorithms that only use per-arm marginal statistics.
//!
//! They run inside the same query protocol and accounting as the
//! covariance-aware algorithms, querying one sample per arm per round.

use crate::concentration::{gaussian_variance_lower_from_log, ConfidenceSchedule};
use crate::environments::Environment;
use crate::error::{Error, Result};
use crate::instance::{ArmId, BanditInstance, Evidence, RunResult, SoundnessFlag, TraceEvent};
use crate::pairwise::{check_schedule, DEFAULT_MAX_ROUNDS};
use crate::protocol::{GameProtocol, TrialRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineAlgo {
    /// Successive elimination with known-variance Gaussian intervals.
    HoeffdingRace,
    /// Leader versus highest upper bound, with known variances.
    Lucb,
    /// Successive elimination with inflated empirical variances.
    EmpVarSE,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineConfig {
    pub algo: BaselineAlgo,
    pub known_sigma2: Option<Vec<f64>>,
    pub max_rounds: u64,
}

impl BaselineConfig {
    pub fn new(algo: BaselineAlgo, known_sigma2: Option<Vec<f64>>) -> Self {
        Self { algo, known_sigma2, max_rounds: DEFAULT_MAX_ROUNDS }
    }

    /// Uses the instance marginal variances as the known variances.
    pub fn for_instance(algo: BaselineAlgo, instance: &BanditInstance) -> Self {
        Self::new(algo, Some(instance.marginal_variances()))
    }
}

#[derive(Debug, Clone)]
struct ArmStats {
    n: Vec<u64>,
    sum: Vec<f64>,
    sumsq: Vec<f64>,
}

impl ArmStats {
    fn new(k: usize) -> Self {
        Self { n: vec![0; k], sum: vec![0.0; k], sumsq: vec![0.0; k] }
    }

    fn add(&mut self, batch: &[(ArmId, f64)]) {
        for &(a, x) in batch {
            self.n[a.0] += 1;
            self.sum[a.0] += x;
            self.sumsq[a.0] += x * x;
        }
    }

    fn mean(&self, a: usize) -> f64 {
        self.sum[a] / self.n[a] as f64
    }

    /// Unbiased sample variance; needs two samples.
    fn variance(&self, a: usize) -> f64 {
        let n = self.n[a] as f64;
        ((self.sumsq[a] - self.sum[a] * self.sum[a] / n) / (n - 1.0)).max(0.0)
    }

    fn best_of(&self, arms: &[usize]) -> ArmId {
        let mut best = arms[0];
        for &a in &arms[1..] {
            if self.mean(a) > self.mean(best) {
                best = a;
            }
        }
        ArmId(best)
    }
}

fn known_variances(config: &BaselineConfig, k: usize) -> Result<Vec<f64>> {
    let s = config.known_sigma2.as_ref().ok_or(Error::MissingVariance)?;
    if s.len() != k {
        return Err(Error::BadConfig(format!("expected {k} known variances, got {}", s.len())));
    }
    if let Some(v) = s.iter().find(|&&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::BadConfig(format!("known variances must be positive, got {v}")));
    }
    Ok(s.clone())
}

pub fn run(instance: &BanditInstance, rng: TrialRng, sched: &ConfidenceSchedule, config: &BaselineConfig) -> Result<RunResult> {
    let mut protocol = GameProtocol::new(Environment::from_instance(instance)?, rng);
    run_on(instance, &mut protocol, sched, config)
}

pub fn run_on(
    instance: &BanditInstance,
    protocol: &mut GameProtocol,
    sched: &ConfidenceSchedule,
    config: &BaselineConfig,
) -> Result<RunResult> {
    match config.algo {
        BaselineAlgo::HoeffdingRace => run_hoeffding_race(instance, protocol, sched, config),
        BaselineAlgo::Lucb => run_lucb(instance, protocol, sched, config),
        BaselineAlgo::EmpVarSE => run_empvar_se(instance, protocol, sched, config),
    }
}

fn check_common(instance: &BanditInstance, sched: &ConfidenceSchedule, config: &BaselineConfig) -> Result<()> {
    check_schedule(instance, sched)?;
    if instance.arms() < 2 {
        return Err(Error::BadConfig("need at least two arms".into()));
    }
    if config.max_rounds < 1 {
        return Err(Error::BadConfig("max_rounds must be positive".into()));
    }
    Ok(())
}

/// Successive elimination where round `t` gives every survivor the interval
/// `mean +/- radius(arm, t)`; `radius` returns `None` while too few samples
/// exist to test.
fn successive_elimination<R>(
    instance: &BanditInstance,
    protocol: &mut GameProtocol,
    max_rounds: u64,
    mut radius: R,
) -> Result<RunResult>
where
    R: FnMut(&ArmStats, usize, u64) -> Option<f64>,
{
    let k = instance.arms();
    let mut survivors: Vec<usize> = (0..k).collect();
    let mut stats = ArmStats::new(k);
    let mut events = Vec::new();
    let mut batch = Vec::with_capacity(k);
    let mut r = vec![0.0; k];
    let flag = loop {
        if survivors.len() <= 1 {
            break SoundnessFlag::Ok;
        }
        if protocol.rounds() >= max_rounds {
            break SoundnessFlag::RoundCapHit;
        }
        protocol.query(&survivors, &mut batch);
        stats.add(&batch);
        let t = protocol.rounds();
        let mut ready = true;
        for &a in &survivors {
            match radius(&stats, a, t) {
                Some(x) => r[a] = x,
                None => ready = false,
            }
        }
        if !ready {
            continue;
        }
        let (by, lcb) = survivors
            .iter()
            .map(|&a| (a, stats.mean(a) - r[a]))
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .expect("survivors is not empty");
        let mut kept = Vec::with_capacity(survivors.len());
        for &a in &survivors {
            let ucb = stats.mean(a) + r[a];
            if ucb < lcb {
                let evidence = Evidence::Interval { by: ArmId(by), margin: lcb - ucb };
                events.push(TraceEvent::Eliminated { round: t, arm: ArmId(a), evidence });
                events.push(TraceEvent::LeftQuerySet { round: t, arm: ArmId(a) });
            } else {
                kept.push(a);
            }
        }
        survivors = kept;
    };
    let chosen = match flag {
        SoundnessFlag::Ok => ArmId(survivors[0]),
        _ => stats.best_of(&survivors),
    };
    Ok(finish(instance, protocol, chosen, flag, events))
}

fn finish(
    instance: &BanditInstance,
    protocol: &GameProtocol,
    chosen: ArmId,
    flag: SoundnessFlag,
    mut events: Vec<TraceEvent>,
) -> RunResult {
    let rounds = protocol.rounds();
    events.push(TraceEvent::Stopped { round: rounds, chosen, flag });
    RunResult {
        chosen,
        correct: chosen == instance.best(),
        total_queries: protocol.total_queries(),
        rounds,
        per_arm_queries: protocol.per_arm_queries().to_vec(),
        flag,
        events,
    }
}

/// Intervals `mean +/- sqrt(2 sigma^2 log(1/delta_t) / t)` with known
/// `sigma^2`; arm `i` is dropped once some lower bound exceeds its upper bound.
pub fn run_hoeffding_race(
    instance: &BanditInstance,
    protocol: &mut GameProtocol,
    sched: &ConfidenceSchedule,
    config: &BaselineConfig,
) -> Result<RunResult> {
    check_common(instance, sched, config)?;
    let sigma2 = known_variances(config, instance.arms())?;
    successive_elimination(instance, protocol, config.max_rounds, |_, a, t| {
        Some((2.0 * sigma2[a] * sched.log_inv_delta_t(t) / t as f64).sqrt())
    })
}

/// As the race, with `sigma^2` replaced by the sample variance divided by
/// its high-probability lower ratio bound.
pub fn run_empvar_se(
    instance: &BanditInstance,
    protocol: &mut GameProtocol,
    sched: &ConfidenceSchedule,
    config: &BaselineConfig,
) -> Result<RunResult> {
    check_common(instance, sched, config)?;
    successive_elimination(instance, protocol, config.max_rounds, |stats, a, t| {
        if t < 2 {
            return None;
        }
        let l = sched.log_inv_delta_t(t);
        let sigma2 = stats.variance(a) / gaussian_variance_lower_from_log(t, l);
        Some((2.0 * sigma2 * l / t as f64).sqrt())
    })
}

/// Each round samples the empirical leader and the non-leader with the
/// highest upper bound; stops once that upper bound is below the leader's
/// lower bound. Radii use per-arm counts and the shared schedule at the
/// current round.
pub fn run_lucb(
    instance: &BanditInstance,
    protocol: &mut GameProtocol,
    sched: &ConfidenceSchedule,
    config: &BaselineConfig,
) -> Result<RunResult> {
    check_common(instance, sched, config)?;
    let k = instance.arms();
    let sigma2 = known_variances(config, k)?;
    let mut stats = ArmStats::new(k);
    let mut batch = Vec::with_capacity(k);
    let all: Vec<usize> = (0..k).collect();
    protocol.query(&all, &mut batch);
    stats.add(&batch);
    let (flag, leader) = loop {
        let t = protocol.rounds();
        let l = sched.log_inv_delta_t(t);
        let rad = |a: usize| (2.0 * sigma2[a] * l / stats.n[a] as f64).sqrt();
        let h = stats.best_of(&all).0;
        let c = (0..k)
            .filter(|&a| a != h)
            .max_by(|&x, &y| (stats.mean(x) + rad(x)).total_cmp(&(stats.mean(y) + rad(y))))
            .expect("at least two arms");
        if stats.mean(c) + rad(c) < stats.mean(h) - rad(h) {
            break (SoundnessFlag::Ok, h);
        }
        if t >= config.max_rounds {
            break (SoundnessFlag::RoundCapHit, h);
        }
        let pair = if h < c { [h, c] } else { [c, h] };
        protocol.query(&pair, &mut batch);
        stats.add(&batch);
    };
    Ok(finish(instance, protocol, ArmId(leader), flag, Vec::new()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::trial_rng;

    fn unit_pair() -> BanditInstance {
        BanditInstance::gaussian("pair", vec![0.0, 1.0], vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap()
    }

    fn degenerate_pair() -> BanditInstance {
        BanditInstance::gaussian("flat", vec![0.0, 1.0], vec![vec![1e-12, 0.0], vec![0.0, 1e-12]]).unwrap()
    }

    #[test]
    fn missing_variance() {
        let inst = unit_pair();
        let sched = ConfidenceSchedule::new(0.1, 2).unwrap();
        for algo in [BaselineAlgo::HoeffdingRace, BaselineAlgo::Lucb] {
            let cfg = BaselineConfig::new(algo, None);
            assert!(matches!(run(&inst, trial_rng(0, "m", 0), &sched, &cfg), Err(Error::MissingVariance)));
        }
        let cfg = BaselineConfig::new(BaselineAlgo::EmpVarSE, None);
        assert!(run(&inst, trial_rng(0, "m", 0), &sched, &cfg).is_ok());
    }

    #[test]
    fn degenerate_variances_stop_at_once() {
        let inst = degenerate_pair();
        let sched = ConfidenceSchedule::new(0.1, 2).unwrap();
        let race = run(&inst, trial_rng(0, "d", 0), &sched, &BaselineConfig::for_instance(BaselineAlgo::HoeffdingRace, &inst)).unwrap();
        assert!(race.correct);
        assert_eq!(race.rounds, 1);
        let lucb = run(&inst, trial_rng(0, "d", 0), &sched, &BaselineConfig::for_instance(BaselineAlgo::Lucb, &inst)).unwrap();
        assert!(lucb.correct);
        assert_eq!(lucb.total_queries, 2);
    }

    #[test]
    fn lucb_queries_two_arms_per_round() {
        let inst = BanditInstance::gaussian(
            "three",
            vec![0.0, 0.5, 1.0],
            vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]],
        )
        .unwrap();
        let sched = ConfidenceSchedule::new(0.1, 3).unwrap();
        let r = run(&inst, trial_rng(4, "l", 0), &sched, &BaselineConfig::for_instance(BaselineAlgo::Lucb, &inst)).unwrap();
        assert_eq!(r.total_queries, 3 + 2 * (r.rounds - 1));
    }

    #[test]
    fn near_identical_arms_hit_the_cap() {
        let inst = BanditInstance::gaussian("same", vec![0.0, 1e-9], vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let sched = ConfidenceSchedule::new(0.1, 2).unwrap();
        let cfg = BaselineConfig { max_rounds: 500, ..BaselineConfig::new(BaselineAlgo::EmpVarSE, None) };
        let r = run(&inst, trial_rng(0, "c", 0), &sched, &cfg).unwrap();
        assert_eq!(r.flag, SoundnessFlag::RoundCapHit);
        assert_eq!(r.rounds, 500);
    }
}
