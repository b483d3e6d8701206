//! Confidence radii and the elimination statistics built on them.
//!
//! Every `log` is natural. The per-round confidence level is
//! `delta_t = delta_eff / (2 K^2 t (t + 1))` and the common scale of all radii
//! is `alpha(t) = sqrt(log(1 / delta_t) / (t - 1))`.

use crate::error::{Error, Result};
use crate::instance::ArmId;
use crate::stats::PairStats;

/// Split applied to the input confidence so the union of the concentration
/// events used by the tests stays below `delta`.
pub const SOUNDNESS_SPLIT: f64 = 4.0;

/// Tolerance on simplex membership of weight vectors.
pub const SIMPLEX_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfidenceSchedule {
    delta: f64,
    arms: usize,
    effective_delta: f64,
}

impl ConfidenceSchedule {
    /// Schedule with `effective_delta = delta / 4`.
    pub fn new(delta: f64, arms: usize) -> Result<Self> {
        Self::with_split(delta, arms, false)
    }

    /// Schedule passing `delta` through unchanged.
    pub fn raw(delta: f64, arms: usize) -> Result<Self> {
        Self::with_split(delta, arms, true)
    }

    pub fn with_split(delta: f64, arms: usize, raw_delta: bool) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::BadDelta(delta));
        }
        if arms == 0 {
            return Err(Error::BadConfig("schedule needs at least one arm".into()));
        }
        let effective_delta = if raw_delta { delta } else { delta / SOUNDNESS_SPLIT };
        Ok(Self { delta, arms, effective_delta })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn arms(&self) -> usize {
        self.arms
    }

    pub fn effective_delta(&self) -> f64 {
        self.effective_delta
    }

    /// `delta_eff / (2 K^2 t (t + 1))`.
    pub fn delta_t(&self, t: u64) -> f64 {
        let k = self.arms as f64;
        let t = t as f64;
        self.effective_delta / (2.0 * k * k * t * (t + 1.0))
    }

    /// `log(1 / delta_t)`, evaluated in log space.
    pub fn log_inv_delta_t(&self, t: u64) -> f64 {
        let k = self.arms as f64;
        let tf = t as f64;
        std::f64::consts::LN_2 + 2.0 * k.ln() + tf.ln() + (tf + 1.0).ln() - self.effective_delta.ln()
    }

    /// `sqrt(log(1 / delta_t) / (t - 1))`, defined for `t >= 2`.
    pub fn alpha(&self, t: u64) -> Result<f64> {
        if t < 2 {
            return Err(Error::InsufficientData { needed: 2, have: t });
        }
        Ok((self.log_inv_delta_t(t) / (t - 1) as f64).sqrt())
    }
}

/// Variance inflation used by the Gaussian test:
/// `exp(2x + 1)` for `x >= 1/3`, `1 / (1 - 2x)` otherwise.
pub fn f_gauss(x: f64) -> f64 {
    if x >= 1.0 / 3.0 {
        (2.0 * x + 1.0).exp()
    } else {
        1.0 / (1.0 - 2.0 * x)
    }
}

/// Empirical Bernstein radius `sqrt(2 v x / t) + 3 b x / t`, holding with
/// probability at least `1 - 3 e^{-x}` for i.i.d. variables in `[0, b]`.
pub fn eb_radius(x: f64, v_hat: f64, t: u64, b: f64) -> f64 {
    let t = t as f64;
    (2.0 * v_hat * x / t).sqrt() + 3.0 * b * x / t
}

/// Bounded-reward statistic from its ingredients:
/// `gap - 1.5 alpha sqrt(2 v) - 9 alpha^2`.
pub fn delta_hat_bounded_from(mean_gap: f64, v_hat: f64, alpha: f64) -> f64 {
    mean_gap - 1.5 * alpha * (2.0 * v_hat).sqrt() - 9.0 * alpha * alpha
}

/// Gaussian statistic from its ingredients:
/// `gap - 1.5 alpha sqrt(2 f(alpha) v)`.
pub fn delta_hat_gaussian_from(mean_gap: f64, v_hat: f64, alpha: f64) -> f64 {
    mean_gap - 1.5 * alpha * (2.0 * f_gauss(alpha) * v_hat).sqrt()
}

/// Convex-comparison statistic from its ingredients:
/// `adv - 2 sqrt(2 K v) alpha - 14 K l1 alpha^2`.
pub fn gamma_hat_from(advantage: f64, v_hat: f64, l1_dist: f64, alpha: f64, k: usize) -> f64 {
    let k = k as f64;
    advantage - 2.0 * (2.0 * k * v_hat).sqrt() * alpha - 14.0 * k * l1_dist * alpha * alpha
}

fn pair_inputs(stats: &PairStats, sched: &ConfidenceSchedule, i: ArmId, j: ArmId) -> Result<(f64, f64, f64)> {
    let alpha = sched.alpha(stats.t())?;
    let gap = stats.mean(j)? - stats.mean(i)?;
    let v = stats.pair_variance(i, j)?;
    Ok((gap, v, alpha))
}

/// Positive value certifies `mu_i < mu_j` on the bounded concentration event.
pub fn delta_hat_bounded(stats: &PairStats, sched: &ConfidenceSchedule, i: ArmId, j: ArmId) -> Result<f64> {
    let (gap, v, alpha) = pair_inputs(stats, sched, i, j)?;
    Ok(delta_hat_bounded_from(gap, v, alpha))
}

/// Positive value certifies `mu_i < mu_j` on the Gaussian concentration event.
pub fn delta_hat_gaussian(stats: &PairStats, sched: &ConfidenceSchedule, i: ArmId, j: ArmId) -> Result<f64> {
    let (gap, v, alpha) = pair_inputs(stats, sched, i, j)?;
    Ok(delta_hat_gaussian_from(gap, v, alpha))
}

/// Checks `w` is a probability vector (within [`SIMPLEX_TOL`]).
pub fn check_simplex(w: &[f64]) -> Result<()> {
    if let Some((n, x)) = w.iter().enumerate().find(|(_, &x)| !(x >= -SIMPLEX_TOL)) {
        return Err(Error::BadWeights(format!("entry {n} is {x}")));
    }
    let total: f64 = w.iter().sum();
    if (total - 1.0).abs() > SIMPLEX_TOL {
        return Err(Error::BadWeights(format!("weights sum to {total}")));
    }
    Ok(())
}

/// Compares arm `i` against the convex combination `<w, X>`.
pub fn gamma_hat(stats: &PairStats, sched: &ConfidenceSchedule, i: ArmId, w: &[f64]) -> Result<f64> {
    if w.len() != stats.arms() {
        return Err(Error::BadWeights(format!("expected {} weights, got {}", stats.arms(), w.len())));
    }
    check_simplex(w)?;
    let alpha = sched.alpha(stats.t())?;
    let mut a = w.to_vec();
    a[i.0] -= 1.0;
    let mut advantage = 0.0;
    for (n, &wn) in w.iter().enumerate() {
        if wn != 0.0 {
            advantage += wn * stats.mean(ArmId(n))?;
        }
    }
    advantage -= stats.mean(i)?;
    let v = stats.combo_variance(&a)?;
    let l1: f64 = a.iter().map(|x| x.abs()).sum();
    Ok(gamma_hat_from(advantage, v, l1, alpha, sched.arms()))
}

/// Ratio bounds on the sample variance of `n` i.i.d. unit-variance normals,
/// jointly valid with probability at least `1 - 3 delta`.
pub fn gaussian_variance_bounds(n: u64, delta: f64) -> Result<(f64, f64)> {
    if n < 2 {
        return Err(Error::InsufficientData { needed: 2, have: n });
    }
    if !(delta > 0.0 && delta < 1.0 / 3.0) {
        return Err(Error::BadDelta(delta));
    }
    let l = (1.0 / delta).ln();
    let m = (n - 1) as f64;
    let lower = (1.0 - 2.0 * (l / m).sqrt()).max((-1.0f64).exp() * delta.powf(2.0 / m));
    let upper = 1.0 + 2.0 * (l / m).sqrt() + 2.0 * l / m;
    Ok((lower, upper))
}

/// Same bounds with `log(1/delta)` supplied directly, for levels too small to
/// represent as `f64`.
pub(crate) fn gaussian_variance_lower_from_log(n: u64, log_inv_delta: f64) -> f64 {
    let m = (n - 1) as f64;
    (1.0 - 2.0 * (log_inv_delta / m).sqrt()).max((-1.0 - 2.0 * log_inv_delta / m).exp())
}
