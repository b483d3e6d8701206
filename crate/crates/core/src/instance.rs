//! Shared domain types: arms, bandit instances, run results and the
//! instance-level helpers every algorithm relies on.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::environments::{cholesky_with_jitter, BernoulliCoupledEnv};
use crate::error::{Error, Result};

/// Index of an arm, 0-based. Displayed 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ArmId(pub usize);

impl ArmId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for ArmId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "arm {}", self.0 + 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InstanceKind {
    Gaussian,
    BoundedCoupledBernoulli,
}

/// Dependence structure of the joint reward law.
#[derive(Debug, Clone, PartialEq)]
pub enum Dependence {
    /// Full covariance matrix, row-major `K x K`.
    Gaussian { covariance: Vec<f64> },
    /// Target `Var(X_best - X_i)` per arm; the entry at the best arm is ignored.
    Bernoulli { v_target: Vec<f64> },
}

/// Means plus dependence structure of a `K`-armed joint reward law.
///
/// Construction validates every invariant, so a value of this type always has
/// a unique optimal arm.
#[derive(Debug, Clone, PartialEq)]
pub struct BanditInstance {
    label: String,
    means: Vec<f64>,
    dependence: Dependence,
    best: usize,
}

impl BanditInstance {
    /// Multivariate normal instance. `covariance` is given as rows.
    pub fn gaussian(label: impl Into<String>, means: Vec<f64>, covariance: Vec<Vec<f64>>) -> Result<Self> {
        let k = means.len();
        if covariance.len() != k || covariance.iter().any(|r| r.len() != k) {
            return Err(Error::InvalidInstance(format!("covariance must be {k}x{k}")));
        }
        let flat: Vec<f64> = covariance.into_iter().flatten().collect();
        Self::gaussian_flat(label, means, flat)
    }

    pub(crate) fn gaussian_flat(label: impl Into<String>, means: Vec<f64>, covariance: Vec<f64>) -> Result<Self> {
        let k = means.len();
        check_means(&means)?;
        if covariance.len() != k * k {
            return Err(Error::InvalidInstance(format!("covariance must be {k}x{k}")));
        }
        if covariance.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInstance("covariance has non-finite entries".into()));
        }
        for i in 0..k {
            if covariance[i * k + i] < 0.0 {
                return Err(Error::InvalidInstance(format!("negative variance on arm {}", i + 1)));
            }
            for j in 0..i {
                let (a, b) = (covariance[i * k + j], covariance[j * k + i]);
                if (a - b).abs() > 1e-12 * (1.0 + a.abs().max(b.abs())) {
                    return Err(Error::InvalidInstance("covariance is not symmetric".into()));
                }
            }
        }
        cholesky_with_jitter(&covariance, k)
            .ok_or_else(|| Error::InvalidInstance("covariance is not positive semidefinite".into()))?;
        let best = unique_argmax(&means)?;
        Ok(Self { label: label.into(), means, dependence: Dependence::Gaussian { covariance }, best })
    }

    /// Coupled-Bernoulli instance built from the lower-bound construction.
    ///
    /// Means must lie in `[1/4, 3/4]` and each `v_target[i]` (for `i` not the
    /// best arm) must be an attainable `Var(X_best - X_i)` for Bernoulli pairs.
    pub fn bernoulli(label: impl Into<String>, means: Vec<f64>, v_target: Vec<f64>) -> Result<Self> {
        check_means(&means)?;
        if v_target.len() != means.len() {
            return Err(Error::InvalidInstance("one variance target per arm is required".into()));
        }
        let best = unique_argmax(&means)?;
        // Validates means range and variance feasibility.
        BernoulliCoupledEnv::new(&means, &v_target)?;
        Ok(Self { label: label.into(), means, dependence: Dependence::Bernoulli { v_target }, best })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn arms(&self) -> usize {
        self.means.len()
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn dependence(&self) -> &Dependence {
        &self.dependence
    }

    pub fn kind(&self) -> InstanceKind {
        match self.dependence {
            Dependence::Gaussian { .. } => InstanceKind::Gaussian,
            Dependence::Bernoulli { .. } => InstanceKind::BoundedCoupledBernoulli,
        }
    }

    pub fn best(&self) -> ArmId {
        ArmId(self.best)
    }

    /// Full covariance of the joint law, row-major.
    pub fn covariance(&self) -> Vec<f64> {
        match &self.dependence {
            Dependence::Gaussian { covariance } => covariance.clone(),
            Dependence::Bernoulli { v_target } => BernoulliCoupledEnv::new(&self.means, v_target)
                .expect("validated at construction")
                .covariance(),
        }
    }

    /// Per-arm marginal variances.
    pub fn marginal_variances(&self) -> Vec<f64> {
        let k = self.arms();
        let cov = self.covariance();
        (0..k).map(|i| cov[i * k + i]).collect()
    }

    /// `V_ij = Var(X_i - X_j)` for every pair, row-major.
    pub fn difference_variances(&self) -> Vec<f64> {
        let k = self.arms();
        let cov = self.covariance();
        let mut v = vec![0.0; k * k];
        for i in 0..k {
            for j in 0..k {
                v[i * k + j] = (cov[i * k + i] + cov[j * k + j] - 2.0 * cov[i * k + j]).max(0.0);
            }
        }
        v
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let file: InstanceFile = serde_json::from_str(s)?;
        file.try_into()
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&InstanceFile::from(self))?)
    }
}

fn check_means(means: &[f64]) -> Result<()> {
    if means.is_empty() {
        return Err(Error::InvalidInstance("at least one arm is required".into()));
    }
    if means.iter().any(|m| !m.is_finite()) {
        return Err(Error::InvalidInstance("means must be finite".into()));
    }
    Ok(())
}

fn unique_argmax(means: &[f64]) -> Result<usize> {
    let mut best = 0;
    for (i, &m) in means.iter().enumerate().skip(1) {
        if m > means[best] {
            best = i;
        }
    }
    if let Some(other) = (0..means.len()).find(|&i| i != best && means[i] == means[best]) {
        let (first, second) = (best.min(other), best.max(other));
        return Err(Error::AmbiguousOptimum { first, second });
    }
    Ok(best)
}

/// Unique argmax of the instance means.
pub fn best_arm(instance: &BanditInstance) -> ArmId {
    instance.best()
}

/// Unique argmax of a raw mean vector.
pub fn best_arm_of(means: &[f64]) -> Result<ArmId> {
    check_means(means)?;
    unique_argmax(means).map(ArmId)
}

/// `gap[i] = mu_best - mu_i`.
pub fn gaps(instance: &BanditInstance) -> Vec<f64> {
    let top = instance.means[instance.best];
    instance.means.iter().map(|m| top - m).collect()
}

/// On-disk instance description.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceFile {
    pub kind: InstanceKind,
    pub means: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub covariance: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bernoulli_params: Option<BernoulliParams>,
    #[serde(default)]
    pub label: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BernoulliParams {
    pub v_target: Vec<f64>,
}

impl TryFrom<InstanceFile> for BanditInstance {
    type Error = Error;

    fn try_from(f: InstanceFile) -> Result<Self> {
        match f.kind {
            InstanceKind::Gaussian => {
                let cov = f
                    .covariance
                    .ok_or_else(|| Error::InvalidInstance("gaussian instance needs `covariance`".into()))?;
                BanditInstance::gaussian(f.label, f.means, cov)
            }
            InstanceKind::BoundedCoupledBernoulli => {
                let p = f.bernoulli_params.ok_or_else(|| {
                    Error::InvalidInstance("bernoulli instance needs `bernoulli_params`".into())
                })?;
                BanditInstance::bernoulli(f.label, f.means, p.v_target)
            }
        }
    }
}

impl From<&BanditInstance> for InstanceFile {
    fn from(inst: &BanditInstance) -> Self {
        let k = inst.arms();
        let (covariance, bernoulli_params) = match &inst.dependence {
            Dependence::Gaussian { covariance } => (Some(covariance.chunks(k).map(<[f64]>::to_vec).collect()), None),
            Dependence::Bernoulli { v_target } => (None, Some(BernoulliParams { v_target: v_target.clone() })),
        };
        Self { kind: inst.kind(), means: inst.means.clone(), covariance, bernoulli_params, label: inst.label.clone() }
    }
}

/// How a run terminated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SoundnessFlag {
    Ok,
    EmptyCandidateSet,
    RoundCapHit,
}

impl SoundnessFlag {
    pub fn as_str(self) -> &'static str {
        match self {
            SoundnessFlag::Ok => "ok",
            SoundnessFlag::EmptyCandidateSet => "empty_candidate_set",
            SoundnessFlag::RoundCapHit => "round_cap_hit",
        }
    }
}

impl fmt::Display for SoundnessFlag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// What certified an elimination.
#[derive(Debug, Clone, PartialEq)]
pub enum Evidence {
    /// Every comparator whose pairwise statistic was positive, with its value.
    Pairs(Vec<(ArmId, f64)>),
    /// Best convex comparison found, as sparse weights and the statistic value.
    Combination { weights: Vec<(ArmId, f64)>, value: f64 },
    /// Disjoint confidence intervals: `by`'s lower bound exceeded the upper bound.
    Interval { by: ArmId, margin: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum TraceEvent {
    Eliminated { round: u64, arm: ArmId, evidence: Evidence },
    LeftQuerySet { round: u64, arm: ArmId },
    Stopped { round: u64, chosen: ArmId, flag: SoundnessFlag },
}

impl fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TraceEvent::Eliminated { round, arm, evidence } => {
                write!(f, "round {round}: eliminate {arm} from candidates")?;
                match evidence {
                    Evidence::Pairs(pairs) => {
                        for (j, v) in pairs {
                            write!(f, "; beaten by {j} (stat {v:.6})")?;
                        }
                        Ok(())
                    }
                    Evidence::Combination { weights, value } => {
                        write!(f, "; beaten by combination [")?;
                        for (n, (j, w)) in weights.iter().enumerate() {
                            if n > 0 {
                                write!(f, ", ")?;
                            }
                            write!(f, "{}:{w:.4}", j.0 + 1)?;
                        }
                        write!(f, "] (stat {value:.6})")
                    }
                    Evidence::Interval { by, margin } => write!(f, "; interval of {by} clears it by {margin:.6}"),
                }
            }
            TraceEvent::LeftQuerySet { round, arm } => write!(f, "round {round}: stop querying {arm}"),
            TraceEvent::Stopped { round, chosen, flag } => write!(f, "round {round}: return {chosen} [{flag}]"),
        }
    }
}

/// Outcome of one run of an identification algorithm.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub chosen: ArmId,
    pub correct: bool,
    pub total_queries: u64,
    pub rounds: u64,
    pub per_arm_queries: Vec<u64>,
    pub flag: SoundnessFlag,
    pub events: Vec<TraceEvent>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(k: usize) -> Vec<Vec<f64>> {
        (0..k).map(|i| (0..k).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect()
    }

    #[test]
    fn best_arm_of_figure_means() {
        let means: Vec<f64> = (1..=10).map(|i| i as f64 / 10.0).collect();
        let inst = BanditInstance::gaussian("fig", means, diag(10)).unwrap();
        assert_eq!(best_arm(&inst), ArmId(9));
    }

    #[test]
    fn single_arm_is_best() {
        let inst = BanditInstance::gaussian("one", vec![0.5], diag(1)).unwrap();
        assert_eq!(best_arm(&inst), ArmId(0));
    }

    #[test]
    fn tie_is_ambiguous() {
        let err = BanditInstance::gaussian("tie", vec![0.3, 0.3], diag(2)).unwrap_err();
        assert!(matches!(err, Error::AmbiguousOptimum { first: 0, second: 1 }));
    }

    #[test]
    fn gaps_by_subtraction() {
        let inst = BanditInstance::gaussian("g", vec![0.5, 0.3, 0.1], diag(3)).unwrap();
        let g = gaps(&inst);
        assert_eq!(g[0], 0.0);
        assert!((g[1] - 0.2).abs() < 1e-15 && (g[2] - 0.4).abs() < 1e-15);

        let eps = 1e-3;
        let inst = BanditInstance::gaussian("e", vec![1.0, 1.0 - eps], diag(2)).unwrap();
        assert!((gaps(&inst)[1] - eps).abs() < 1e-15);
    }

    #[test]
    fn figure_gaps() {
        let means: Vec<f64> = (1..=10).map(|i| i as f64 / 10.0).collect();
        let inst = BanditInstance::gaussian("fig", means, diag(10)).unwrap();
        let g = gaps(&inst);
        for (i, gi) in g.iter().enumerate() {
            assert!((gi - (9 - i) as f64 / 10.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_asymmetric_and_indefinite() {
        let asym = vec![vec![1.0, 0.5], vec![0.2, 1.0]];
        assert!(BanditInstance::gaussian("a", vec![0.0, 1.0], asym).is_err());
        let indef = vec![vec![1.0, 2.0], vec![2.0, 1.0]];
        assert!(BanditInstance::gaussian("b", vec![0.0, 1.0], indef).is_err());
    }

    #[test]
    fn json_roundtrip() {
        let inst = BanditInstance::gaussian("j", vec![0.1, 0.4], vec![vec![1.0, 0.5], vec![0.5, 2.0]]).unwrap();
        let back = BanditInstance::from_json_str(&inst.to_json_string().unwrap()).unwrap();
        assert_eq!(inst, back);

        let b = BanditInstance::bernoulli("b", vec![0.6, 0.4], vec![0.0, 0.3]).unwrap();
        let back = BanditInstance::from_json_str(&b.to_json_string().unwrap()).unwrap();
        assert_eq!(b, back);
    }

    #[test]
    fn json_missing_fields() {
        let s = r#"{"kind":"Gaussian","means":[0.0,1.0],"label":"x"}"#;
        assert!(matches!(BanditInstance::from_json_str(s), Err(Error::InvalidInstance(_))));
    }

    use proptest::prelude::*;

    proptest! {
        #[test]
        fn gaps_nonnegative_single_zero(means in proptest::collection::vec(-5.0f64..5.0, 2..12)) {
            let k = means.len();
            if let Ok(inst) = BanditInstance::gaussian("p", means, diag(k)) {
                let g = gaps(&inst);
                prop_assert!(g.iter().all(|&x| x >= 0.0));
                prop_assert_eq!(g.iter().filter(|&&x| x == 0.0).count(), 1);
            }
        }

        #[test]
        fn best_arm_shift_invariant(means in proptest::collection::vec(-5.0f64..5.0, 2..12), c in -3.0f64..3.0) {
            if let Ok(a) = best_arm_of(&means) {
                let shifted: Vec<f64> = means.iter().map(|m| m + c).collect();
                if let Ok(b) = best_arm_of(&shifted) {
                    prop_assert_eq!(a, b);
                }
            }
        }
    }
}
