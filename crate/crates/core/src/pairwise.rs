//! Successive elimination with pairwise difference tests, and the round
//! loop shared with the convex-combination variant.
//!
//! Arms live in two sets: the candidates `S` and the queried arms `C`. An arm
//! leaves `S` when some queried arm certifiably beats it; it then keeps being
//! queried until round `floor(mult * t)` so it can still serve as a
//! low-variance comparator for the arms it is correlated with.

use crate::concentration::{delta_hat_bounded_from, delta_hat_gaussian_from, ConfidenceSchedule};
use crate::environments::Environment;
use crate::error::{Error, Result};
use crate::instance::{ArmId, BanditInstance, Evidence, InstanceKind, RunResult, SoundnessFlag, TraceEvent};
use crate::protocol::{GameProtocol, TrialRng};
use crate::stats::PairStats;

/// Full-query rounds before the first test.
pub const WARMUP_ROUNDS: u64 = 2;

pub const DEFAULT_MAX_ROUNDS: u64 = 10_000_000;

/// Which pairwise statistic drives eliminations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestMode {
    /// Rewards in `[0, 1]`: empirical Bernstein radius.
    Bounded,
    /// Jointly Gaussian rewards: variance-corrected radius without the
    /// second-order term.
    Gaussian,
}

impl TestMode {
    pub fn for_kind(kind: InstanceKind) -> Self {
        match kind {
            InstanceKind::Gaussian => TestMode::Gaussian,
            InstanceKind::BoundedCoupledBernoulli => TestMode::Bounded,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairwiseConfig {
    /// `None` picks the mode matching the instance kind.
    pub mode: Option<TestMode>,
    pub oversample_mult: f64,
    pub max_rounds: u64,
}

impl PairwiseConfig {
    pub const DEFAULT_MULT: f64 = 82.0;
    pub const PLUS_MULT: f64 = 2.0;

    pub fn with_mult(oversample_mult: f64) -> Self {
        Self { mode: None, oversample_mult, max_rounds: DEFAULT_MAX_ROUNDS }
    }

    /// Eliminated arms are queried up to round `2t`.
    pub fn plus() -> Self {
        Self::with_mult(Self::PLUS_MULT)
    }

    /// Eliminated arms stop being queried at once.
    pub fn no_oversample() -> Self {
        Self::with_mult(0.0)
    }
}

impl Default for PairwiseConfig {
    fn default() -> Self {
        Self::with_mult(Self::DEFAULT_MULT)
    }
}

/// Candidate set, queried set and the pending removals from the queried set.
#[derive(Debug, Clone)]
pub struct AlgState {
    t: u64,
    candidates: Vec<usize>,
    queried: Vec<usize>,
    removal: Vec<Option<u64>>,
    mult: f64,
    last_eliminated: Option<usize>,
}

impl AlgState {
    /// State before warm-up: every arm is a candidate and queried, and the
    /// first test happens at round `WARMUP_ROUNDS + 1`.
    pub fn init(k: usize, oversample_mult: f64) -> Result<Self> {
        if k < 2 {
            return Err(Error::BadConfig(format!("need at least two arms, got {k}")));
        }
        if !(oversample_mult >= 0.0 && oversample_mult.is_finite()) {
            return Err(Error::BadConfig(format!("oversample_mult must be >= 0, got {oversample_mult}")));
        }
        Ok(Self {
            t: WARMUP_ROUNDS + 1,
            candidates: (0..k).collect(),
            queried: (0..k).collect(),
            removal: vec![None; k],
            mult: oversample_mult,
            last_eliminated: None,
        })
    }

    /// Round at which the next test runs.
    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn candidates(&self) -> &[usize] {
        &self.candidates
    }

    pub fn queried(&self) -> &[usize] {
        &self.queried
    }

    pub fn removal_round(&self, arm: ArmId) -> Option<u64> {
        self.removal.get(arm.0).copied().flatten()
    }

    pub fn last_eliminated(&self) -> Option<ArmId> {
        self.last_eliminated.map(ArmId)
    }

    /// One round of tests. `test(stats, i, queried)` returns evidence when
    /// arm `i` is certified sub-optimal. All tests see the same queried set;
    /// arms eliminated earlier in the round still act as comparators.
    pub fn step_with<F>(&mut self, stats: &mut PairStats, mut test: F, events: &mut Vec<TraceEvent>) -> Result<Vec<ArmId>>
    where
        F: FnMut(&PairStats, usize, &[usize]) -> Result<Option<Evidence>>,
    {
        let t = self.t;
        let mut eliminated = Vec::new();
        let mut kept = Vec::with_capacity(self.candidates.len());
        for &i in &self.candidates {
            match test(stats, i, &self.queried)? {
                Some(evidence) => {
                    let until = (self.mult * t as f64).floor() as u64;
                    self.removal[i] = Some(until);
                    self.last_eliminated = Some(i);
                    eliminated.push(ArmId(i));
                    events.push(TraceEvent::Eliminated { round: t, arm: ArmId(i), evidence });
                }
                None => kept.push(i),
            }
        }
        self.candidates = kept;
        let removal = &self.removal;
        let mut leaving = Vec::new();
        self.queried.retain(|&a| match removal[a] {
            Some(r) if r <= t => {
                leaving.push(a);
                false
            }
            _ => true,
        });
        for a in leaving {
            stats.untrack(ArmId(a));
            events.push(TraceEvent::LeftQuerySet { round: t, arm: ArmId(a) });
        }
        self.t += 1;
        Ok(eliminated)
    }
}

/// Pairwise test for arm `i`: every queried `j` whose statistic is positive.
pub fn pairwise_test(stats: &PairStats, alpha: f64, mode: TestMode, i: usize, queried: &[usize]) -> Option<Evidence> {
    let t = stats.t() as f64;
    let sum = stats.sum();
    let mi = sum[i] / t;
    let mut fired = Vec::new();
    for &j in queried {
        let gap = sum[j] / t - mi;
        // Both statistics are at most the raw gap.
        if j == i || gap <= 0.0 {
            continue;
        }
        let v = stats.pair_variance_unchecked(i, j);
        let d = match mode {
            TestMode::Bounded => delta_hat_bounded_from(gap, v, alpha),
            TestMode::Gaussian => delta_hat_gaussian_from(gap, v, alpha),
        };
        if d > 0.0 {
            fired.push((ArmId(j), d));
        }
    }
    (!fired.is_empty()).then_some(Evidence::Pairs(fired))
}

/// Pairwise elimination tests for one round.
pub fn step(
    state: &mut AlgState,
    stats: &mut PairStats,
    sched: &ConfidenceSchedule,
    mode: TestMode,
    events: &mut Vec<TraceEvent>,
) -> Result<Vec<ArmId>> {
    let alpha = sched.alpha(stats.t())?;
    state.step_with(stats, |s, i, c| Ok(pairwise_test(s, alpha, mode, i, c)), events)
}

/// Drives the warm-up, query, test and stopping logic shared by the
/// elimination algorithms. `test(stats, i, queried, t)` certifies arm `i`.
pub(crate) fn run_elimination<F>(
    instance: &BanditInstance,
    protocol: &mut GameProtocol,
    oversample_mult: f64,
    max_rounds: u64,
    mut test: F,
) -> Result<RunResult>
where
    F: FnMut(&PairStats, usize, &[usize]) -> Result<Option<Evidence>>,
{
    let k = instance.arms();
    if max_rounds < WARMUP_ROUNDS + 1 {
        return Err(Error::BadConfig(format!("max_rounds must be at least {}", WARMUP_ROUNDS + 1)));
    }
    let mut state = AlgState::init(k, oversample_mult)?;
    let mut stats = PairStats::new(k);
    let mut events = Vec::new();
    let mut batch = Vec::with_capacity(k);
    for _ in 0..WARMUP_ROUNDS {
        protocol.query(state.queried(), &mut batch);
        stats.update(&batch)?;
    }
    let flag = loop {
        if state.candidates().len() <= 1 {
            break if state.candidates().is_empty() { SoundnessFlag::EmptyCandidateSet } else { SoundnessFlag::Ok };
        }
        if protocol.rounds() >= max_rounds {
            break SoundnessFlag::RoundCapHit;
        }
        protocol.query(state.queried(), &mut batch);
        stats.update(&batch)?;
        debug_assert_eq!(stats.t(), state.t());
        state.step_with(&mut stats, &mut test, &mut events)?;
    };
    let chosen = match flag {
        SoundnessFlag::Ok => ArmId(state.candidates()[0]),
        SoundnessFlag::EmptyCandidateSet => state.last_eliminated().expect("an arm was eliminated"),
        SoundnessFlag::RoundCapHit => empirical_best(&stats, state.candidates()),
    };
    let rounds = protocol.rounds();
    events.push(TraceEvent::Stopped { round: rounds, chosen, flag });
    Ok(RunResult {
        chosen,
        correct: chosen == instance.best(),
        total_queries: protocol.total_queries(),
        rounds,
        per_arm_queries: protocol.per_arm_queries().to_vec(),
        flag,
        events,
    })
}

/// Candidate with the largest empirical mean; ties go to the lower index.
pub(crate) fn empirical_best(stats: &PairStats, candidates: &[usize]) -> ArmId {
    let sum = stats.sum();
    let mut best = candidates[0];
    for &c in &candidates[1..] {
        if sum[c] > sum[best] {
            best = c;
        }
    }
    ArmId(best)
}

/// One pairwise run against a fresh environment.
pub fn run(
    instance: &BanditInstance,
    rng: TrialRng,
    sched: &ConfidenceSchedule,
    config: &PairwiseConfig,
) -> Result<RunResult> {
    let mut protocol = GameProtocol::new(Environment::from_instance(instance)?, rng);
    run_on(instance, &mut protocol, sched, config)
}

/// One pairwise run on an existing protocol.
pub fn run_on(
    instance: &BanditInstance,
    protocol: &mut GameProtocol,
    sched: &ConfidenceSchedule,
    config: &PairwiseConfig,
) -> Result<RunResult> {
    check_schedule(instance, sched)?;
    let mode = config.mode.unwrap_or_else(|| TestMode::for_kind(instance.kind()));
    run_elimination(instance, protocol, config.oversample_mult, config.max_rounds, |stats, i, c| {
        let alpha = sched.alpha(stats.t())?;
        Ok(pairwise_test(stats, alpha, mode, i, c))
    })
}

pub(crate) fn check_schedule(instance: &BanditInstance, sched: &ConfidenceSchedule) -> Result<()> {
    if sched.arms() != instance.arms() {
        return Err(Error::BadConfig(format!(
            "schedule built for {} arms, instance has {}",
            sched.arms(),
            instance.arms()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environments::make_toy2;
    use crate::protocol::trial_rng;

    #[test]
    fn init_shapes() {
        let s = AlgState::init(10, 82.0).unwrap();
        assert_eq!(s.candidates().len(), 10);
        assert_eq!(s.queried().len(), 10);
        assert_eq!(s.t(), 3);
        assert!(AlgState::init(2, 0.0).is_ok());
        assert!(matches!(AlgState::init(1, 82.0), Err(Error::BadConfig(_))));
        assert!(matches!(AlgState::init(3, -1.0), Err(Error::BadConfig(_))));
    }

    fn fed_stats(k: usize, rounds: u64) -> PairStats {
        let mut s = PairStats::new(k);
        for r in 0..rounds {
            let batch: Vec<_> = (0..k).map(|a| (ArmId(a), (a as f64) + (r % 2) as f64)).collect();
            s.update(&batch).unwrap();
        }
        s
    }

    #[test]
    fn step_without_eliminations_only_advances() {
        let mut state = AlgState::init(3, 82.0).unwrap();
        let mut stats = fed_stats(3, 3);
        let mut events = Vec::new();
        let out = state.step_with(&mut stats, |_, _, _| Ok(None), &mut events).unwrap();
        assert!(out.is_empty() && events.is_empty());
        assert_eq!(state.t(), 4);
        assert_eq!(state.candidates(), &[0, 1, 2]);
    }

    #[test]
    fn removal_scheduled_at_mult_t() {
        let mut state = AlgState::init(3, 82.0).unwrap();
        state.t = 100;
        let mut stats = fed_stats(3, 100);
        let mut events = Vec::new();
        state
            .step_with(&mut stats, |_, i, _| Ok((i == 0).then(|| Evidence::Pairs(vec![(ArmId(2), 1.0)]))), &mut events)
            .unwrap();
        assert_eq!(state.removal_round(ArmId(0)), Some(8200));
        assert_eq!(state.candidates(), &[1, 2]);
        assert_eq!(state.queried(), &[0, 1, 2]);
    }

    #[test]
    fn zero_mult_leaves_at_once() {
        let mut state = AlgState::init(3, 0.0).unwrap();
        let mut stats = fed_stats(3, 3);
        let mut events = Vec::new();
        state
            .step_with(&mut stats, |_, i, _| Ok((i == 1).then(|| Evidence::Pairs(vec![(ArmId(2), 1.0)]))), &mut events)
            .unwrap();
        assert_eq!(state.queried(), &[0, 2]);
        assert!(!stats.is_tracked(ArmId(1)));
        assert_eq!(events.len(), 2);
    }

    #[test]
    fn eliminated_arm_still_compares_in_same_round() {
        let mut state = AlgState::init(3, 0.0).unwrap();
        let mut stats = fed_stats(3, 3);
        let mut seen = Vec::new();
        let mut events = Vec::new();
        state
            .step_with(
                &mut stats,
                |_, i, c| {
                    seen.push(c.to_vec());
                    Ok((i == 0).then(|| Evidence::Pairs(vec![(ArmId(1), 1.0)])))
                },
                &mut events,
            )
            .unwrap();
        assert!(seen.iter().all(|c| c == &[0, 1, 2]));
    }

    #[test]
    fn pairwise_test_hand_values() {
        // X_2 - X_1 constant 1: zero variance, gap 1.
        let mut s = PairStats::new(2);
        for r in 0..5 {
            let x = r as f64 * 0.25;
            s.update(&[(ArmId(0), x), (ArmId(1), x + 1.0)]).unwrap();
        }
        let ev = pairwise_test(&s, 0.2, TestMode::Bounded, 0, &[0, 1]).unwrap();
        let Evidence::Pairs(p) = ev else { panic!() };
        assert_eq!(p[0].0, ArmId(1));
        assert!((p[0].1 - (1.0 - 9.0 * 0.04)).abs() < 1e-12);
        assert!(pairwise_test(&s, 0.4, TestMode::Bounded, 0, &[0, 1]).is_none());
        assert!(pairwise_test(&s, 5.0, TestMode::Gaussian, 0, &[0, 1]).is_some());
        assert!(pairwise_test(&s, 0.2, TestMode::Gaussian, 1, &[0, 1]).is_none());
    }

    #[test]
    fn round_cap_flags() {
        let inst = make_toy2(0.001).unwrap();
        let sched = ConfidenceSchedule::new(0.1, 2).unwrap();
        let cfg = PairwiseConfig { max_rounds: 3, ..PairwiseConfig::no_oversample() };
        let r = run(&inst, trial_rng(0, "cap", 0), &sched, &cfg).unwrap();
        assert_eq!(r.flag, SoundnessFlag::RoundCapHit);
        assert_eq!(r.rounds, 3);
        assert_eq!(r.total_queries, 6);
        let bad = PairwiseConfig { max_rounds: 2, ..PairwiseConfig::no_oversample() };
        assert!(run(&inst, trial_rng(0, "cap", 0), &sched, &bad).is_err());
    }

    #[test]
    fn same_seed_same_result() {
        let inst = make_toy2(0.1).unwrap();
        let sched = ConfidenceSchedule::new(0.1, 2).unwrap();
        let cfg = PairwiseConfig::default();
        let a = run(&inst, trial_rng(5, "d", 2), &sched, &cfg).unwrap();
        let b = run(&inst, trial_rng(5, "d", 2), &sched, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.per_arm_queries.iter().sum::<u64>(), a.total_queries);
    }
}
