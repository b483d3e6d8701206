//! Online sufficient statistics over jointly observed rewards.
//!
//! All tracked arms are observed together every round, so a single round
//! counter, the per-arm sums and the Gram matrix of cross-products are enough
//! to recover the empirical mean of every arm and the unbiased sample variance
//! of any linear combination of arms.

use crate::error::{Error, Result};
use crate::instance::ArmId;

/// Relative tolerance under which a negative variance is treated as rounding.
const CANCELLATION_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct PairStats {
    k: usize,
    t: u64,
    sum: Vec<f64>,
    gram: Vec<f64>,
    tracked: Vec<bool>,
    active: Vec<usize>,
    scratch: Vec<f64>,
    seen: Vec<bool>,
}

impl PairStats {
    /// Empty statistics tracking all `k` arms.
    pub fn new(k: usize) -> Self {
        Self {
            k,
            t: 0,
            sum: vec![0.0; k],
            gram: vec![0.0; k * k],
            tracked: vec![true; k],
            active: (0..k).collect(),
            scratch: vec![0.0; k],
            seen: vec![false; k],
        }
    }

    pub fn arms(&self) -> usize {
        self.k
    }

    /// Rounds observed so far.
    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn sum(&self) -> &[f64] {
        &self.sum
    }

    /// Row-major `K x K` matrix of `sum_s X_{i,s} X_{j,s}`.
    pub fn gram(&self) -> &[f64] {
        &self.gram
    }

    pub fn is_tracked(&self, arm: ArmId) -> bool {
        self.tracked.get(arm.0).copied().unwrap_or(false)
    }

    /// Stops tracking an arm. Its accumulators freeze and it may no longer
    /// appear in updates or queries.
    pub fn untrack(&mut self, arm: ArmId) {
        if self.is_tracked(arm) {
            self.tracked[arm.0] = false;
            self.active.retain(|&a| a != arm.0);
        }
    }

    /// Adds one joint observation. Every tracked arm must appear exactly once.
    pub fn update(&mut self, rewards: &[(ArmId, f64)]) -> Result<()> {
        self.seen.iter_mut().for_each(|s| *s = false);
        for &(arm, x) in rewards {
            if !self.is_tracked(arm) {
                return Err(Error::UntrackedArm(arm.0));
            }
            if self.seen[arm.0] {
                return Err(Error::DuplicateArm(arm.0));
            }
            self.seen[arm.0] = true;
            self.scratch[arm.0] = x;
        }
        if let Some(&missing) = self.active.iter().find(|&&a| !self.seen[a]) {
            return Err(Error::MissingArm(missing));
        }
        let k = self.k;
        for (n, &i) in self.active.iter().enumerate() {
            let xi = self.scratch[i];
            self.sum[i] += xi;
            for &j in &self.active[n..] {
                let p = xi * self.scratch[j];
                self.gram[i * k + j] += p;
                if i != j {
                    self.gram[j * k + i] += p;
                }
            }
        }
        self.t += 1;
        Ok(())
    }

    fn check_arm(&self, arm: ArmId) -> Result<()> {
        if self.is_tracked(arm) {
            Ok(())
        } else {
            Err(Error::UntrackedArm(arm.0))
        }
    }

    fn need(&self, needed: u64) -> Result<()> {
        if self.t < needed {
            Err(Error::InsufficientData { needed, have: self.t })
        } else {
            Ok(())
        }
    }

    /// Empirical mean `sum_i / t`.
    pub fn mean(&self, arm: ArmId) -> Result<f64> {
        self.check_arm(arm)?;
        self.need(1)?;
        Ok(self.sum[arm.0] / self.t as f64)
    }

    /// Unbiased sample variance of the scalar sequence `<a, X_s>`.
    ///
    /// Computed as `(a' G a - (a' s)^2 / t) / (t - 1)`, which equals the
    /// pairwise U-statistic `sum_{u<v} (Y_u - Y_v)^2 / (t (t - 1))`.
    pub fn combo_variance(&self, a: &[f64]) -> Result<f64> {
        if a.len() != self.k {
            return Err(Error::BadWeights(format!("expected {} coefficients, got {}", self.k, a.len())));
        }
        self.need(2)?;
        let k = self.k;
        let mut quad = 0.0;
        let mut lin = 0.0;
        for i in 0..k {
            if a[i] == 0.0 {
                continue;
            }
            self.check_arm(ArmId(i))?;
            lin += a[i] * self.sum[i];
            let row = &self.gram[i * k..(i + 1) * k];
            let mut acc = 0.0;
            for j in 0..k {
                if a[j] != 0.0 {
                    acc += row[j] * a[j];
                }
            }
            quad += a[i] * acc;
        }
        let t = self.t as f64;
        clamp_variance((quad - lin * lin / t) / (t - 1.0), quad / (t - 1.0))
    }

    /// Sample variance of `X_i - X_j`.
    pub fn pair_variance(&self, i: ArmId, j: ArmId) -> Result<f64> {
        self.check_arm(i)?;
        self.check_arm(j)?;
        self.need(2)?;
        if i == j {
            return Ok(0.0);
        }
        Ok(self.pair_variance_unchecked(i.0, j.0))
    }

    /// Pair variance for arms already known to be tracked, with `t >= 2`.
    pub(crate) fn pair_variance_unchecked(&self, i: usize, j: usize) -> f64 {
        let k = self.k;
        let t = self.t as f64;
        let quad = self.gram[i * k + i] + self.gram[j * k + j] - 2.0 * self.gram[i * k + j];
        let lin = self.sum[i] - self.sum[j];
        let v = (quad - lin * lin / t) / (t - 1.0);
        // Rounding noise only: the Gram matrix is PSD by construction.
        if v < 0.0 {
            0.0
        } else {
            v
        }
    }

    /// Unbiased sample covariance matrix restricted to `arms`, row-major in
    /// the order given.
    pub fn covariance_of(&self, arms: &[usize], out: &mut Vec<f64>) -> Result<()> {
        self.need(2)?;
        for &a in arms {
            self.check_arm(ArmId(a))?;
        }
        let m = arms.len();
        let k = self.k;
        let t = self.t as f64;
        out.clear();
        out.resize(m * m, 0.0);
        for (p, &i) in arms.iter().enumerate() {
            for (q, &j) in arms.iter().enumerate().skip(p) {
                let c = (self.gram[i * k + j] - self.sum[i] * self.sum[j] / t) / (t - 1.0);
                out[p * m + q] = c;
                out[q * m + p] = c;
            }
        }
        Ok(())
    }
}

pub(crate) fn clamp_variance(value: f64, scale: f64) -> Result<f64> {
    if value >= 0.0 {
        Ok(value)
    } else if value >= -CANCELLATION_TOL * scale.abs() - f64::MIN_POSITIVE {
        Ok(0.0)
    } else {
        Err(Error::NumericalIntegrity { value, scale })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn feed(stats: &mut PairStats, rows: &[Vec<f64>]) {
        for row in rows {
            let r: Vec<(ArmId, f64)> = row.iter().enumerate().map(|(i, &x)| (ArmId(i), x)).collect();
            stats.update(&r).unwrap();
        }
    }

    /// Direct U-statistic, kept independent of the Gram-matrix route.
    fn u_statistic(y: &[f64]) -> f64 {
        let t = y.len() as f64;
        let mut acc = 0.0;
        for u in 0..y.len() {
            for v in (u + 1)..y.len() {
                acc += (y[u] - y[v]).powi(2);
            }
        }
        acc / (t * (t - 1.0))
    }

    #[test]
    fn single_observation() {
        let mut s = PairStats::new(2);
        feed(&mut s, &[vec![1.0, 2.0]]);
        assert_eq!(s.t(), 1);
        assert_eq!(s.sum(), &[1.0, 2.0]);
        assert_eq!(s.gram(), &[1.0, 2.0, 2.0, 4.0]);
    }

    #[test]
    fn two_rounds_accumulate() {
        let mut s = PairStats::new(2);
        feed(&mut s, &[vec![0.0, 1.0], vec![1.0, 0.0]]);
        assert_eq!(s.sum(), &[1.0, 1.0]);
        assert_eq!(s.gram(), &[1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn missing_arm_rejected() {
        let mut s = PairStats::new(2);
        let err = s.update(&[(ArmId(0), 1.0)]).unwrap_err();
        assert!(matches!(err, Error::MissingArm(1)));
        assert_eq!(s.t(), 0);
    }

    #[test]
    fn duplicate_and_untracked_rejected() {
        let mut s = PairStats::new(2);
        assert!(matches!(s.update(&[(ArmId(0), 1.0), (ArmId(0), 1.0)]), Err(Error::DuplicateArm(0))));
        s.untrack(ArmId(1));
        assert!(matches!(s.update(&[(ArmId(0), 1.0), (ArmId(1), 1.0)]), Err(Error::UntrackedArm(1))));
        s.update(&[(ArmId(0), 1.0)]).unwrap();
        assert_eq!(s.t(), 1);
    }

    #[test]
    fn means() {
        let mut s = PairStats::new(1);
        assert!(matches!(s.mean(ArmId(0)), Err(Error::InsufficientData { .. })));
        feed(&mut s, &[vec![0.0], vec![1.0], vec![1.0]]);
        assert!((s.mean(ArmId(0)).unwrap() - 2.0 / 3.0).abs() < 1e-15);

        let mut s = PairStats::new(1);
        feed(&mut s, &[vec![1.0], vec![1.0], vec![1.0]]);
        assert_eq!(s.mean(ArmId(0)).unwrap(), 1.0);
    }

    #[test]
    fn difference_variance_hand_value() {
        // d = X_i - X_j = [1, 2, 4]; brute force gives (1 + 9 + 4) / 6.
        let mut s = PairStats::new(2);
        feed(&mut s, &[vec![1.0, 0.0], vec![2.0, 0.0], vec![4.0, 0.0]]);
        let expected = 14.0 / 6.0;
        assert!((s.pair_variance(ArmId(0), ArmId(1)).unwrap() - expected).abs() < 1e-12);
        assert!((s.combo_variance(&[1.0, -1.0]).unwrap() - expected).abs() < 1e-12);
        assert!((u_statistic(&[1.0, 2.0, 4.0]) - expected).abs() < 1e-15);
    }

    #[test]
    fn degenerate_variances() {
        let mut s = PairStats::new(2);
        feed(&mut s, &[vec![0.0, 1.0], vec![0.0, 1.0], vec![0.0, 1.0]]);
        assert_eq!(s.pair_variance(ArmId(0), ArmId(1)).unwrap(), 0.0);
        assert_eq!(s.pair_variance(ArmId(1), ArmId(1)).unwrap(), 0.0);
        assert_eq!(s.combo_variance(&[0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(s.combo_variance(&[0.3, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn variance_needs_two_rounds() {
        let mut s = PairStats::new(2);
        feed(&mut s, &[vec![0.0, 1.0]]);
        assert!(matches!(s.combo_variance(&[1.0, -1.0]), Err(Error::InsufficientData { needed: 2, have: 1 })));
    }

    #[test]
    fn clamp_policy() {
        assert_eq!(clamp_variance(-1e-12, 1.0).unwrap(), 0.0);
        assert!(matches!(clamp_variance(-1e-3, 1.0), Err(Error::NumericalIntegrity { .. })));
    }

    #[test]
    fn covariance_matches_combo() {
        let mut s = PairStats::new(3);
        feed(&mut s, &[vec![0.1, 0.7, -1.0], vec![0.4, 0.2, 0.5], vec![-0.3, 0.9, 0.0], vec![1.2, -0.4, 0.3]]);
        let mut cov = Vec::new();
        s.covariance_of(&[0, 1, 2], &mut cov).unwrap();
        let a = [0.5, -1.0, 0.25];
        let mut quad = 0.0;
        for p in 0..3 {
            for q in 0..3 {
                quad += a[p] * cov[p * 3 + q] * a[q];
            }
        }
        assert!((quad - s.combo_variance(&a).unwrap()).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn pair_variance_matches_u_statistic(rows in proptest::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 2..40)) {
            let mut s = PairStats::new(2);
            for &(a, b) in &rows {
                s.update(&[(ArmId(0), a), (ArmId(1), b)]).unwrap();
            }
            let d: Vec<f64> = rows.iter().map(|(a, b)| a - b).collect();
            let oracle = u_statistic(&d);
            let got = s.pair_variance(ArmId(0), ArmId(1)).unwrap();
            prop_assert!((got - oracle).abs() <= 1e-10 * oracle.max(1e-12) + 1e-13);
        }

        #[test]
        fn combo_variance_scales_quadratically(
            rows in proptest::collection::vec((0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0), 2..30),
            a in proptest::collection::vec(-2.0f64..2.0, 3),
            lambda in -4.0f64..4.0,
        ) {
            let mut s = PairStats::new(3);
            for &(x, y, z) in &rows {
                s.update(&[(ArmId(0), x), (ArmId(1), y), (ArmId(2), z)]).unwrap();
            }
            let base = s.combo_variance(&a).unwrap();
            let scaled: Vec<f64> = a.iter().map(|c| c * lambda).collect();
            let got = s.combo_variance(&scaled).unwrap();
            prop_assert!((got - lambda * lambda * base).abs() <= 1e-9 * (1.0 + got.abs()));
        }

        #[test]
        fn combo_variance_location_invariant(
            rows in proptest::collection::vec((0.0f64..1.0, 0.0f64..1.0), 2..30),
            a in proptest::collection::vec(-2.0f64..2.0, 2),
            shift in (-5.0f64..5.0, -5.0f64..5.0),
        ) {
            let mut s = PairStats::new(2);
            let mut moved = PairStats::new(2);
            for &(x, y) in &rows {
                s.update(&[(ArmId(0), x), (ArmId(1), y)]).unwrap();
                moved.update(&[(ArmId(0), x + shift.0), (ArmId(1), y + shift.1)]).unwrap();
            }
            let v0 = s.combo_variance(&a).unwrap();
            let v1 = moved.combo_variance(&a).unwrap();
            prop_assert!((v0 - v1).abs() <= 1e-8 * (1.0 + v0.abs()));
        }

        #[test]
        fn gram_symmetric_and_cauchy_schwarz(rows in proptest::collection::vec((-3.0f64..3.0, -3.0f64..3.0, -3.0f64..3.0), 1..30)) {
            let mut s = PairStats::new(3);
            for &(x, y, z) in &rows {
                s.update(&[(ArmId(0), x), (ArmId(1), y), (ArmId(2), z)]).unwrap();
            }
            let t = s.t() as f64;
            for i in 0..3 {
                for j in 0..3 {
                    prop_assert_eq!(s.gram()[i * 3 + j], s.gram()[j * 3 + i]);
                }
                prop_assert!(s.gram()[i * 4] >= s.sum()[i].powi(2) / t - 1e-9);
            }
            prop_assert_eq!(s.t(), rows.len() as u64);
        }
    }
}
