//! Instance-dependent complexity measures, upper-bound sums and lower bounds.
//!
//! `Lambda[i][j]` is the cost of certifying `mu_i < mu_j` from paired samples
//! of `X_i - X_j`; it is `+inf` when `mu_j <= mu_i`. Three forms are used:
//!
//! * bounded (reference form): `V / gap^2 + 3 / gap`
//! * bounded (reporting form): `V / gap^2 + 1 / gap`
//! * Gaussian: `V / gap^2`

use std::fmt;
use std::io::Write;

use crate::concentration::check_simplex;
use crate::environments::bernoulli_variance_range;
use crate::error::{Error, Result};
use crate::instance::{gaps, BanditInstance, InstanceKind};

pub fn lambda_bounded(v: f64, gap: f64) -> f64 {
    if gap > 0.0 {
        v / (gap * gap) + 3.0 / gap
    } else {
        f64::INFINITY
    }
}

pub fn lambda_main(v: f64, gap: f64) -> f64 {
    if gap > 0.0 {
        v / (gap * gap) + 1.0 / gap
    } else {
        f64::INFINITY
    }
}

pub fn lambda_gaussian(v: f64, gap: f64) -> f64 {
    if gap > 0.0 {
        v / (gap * gap)
    } else {
        f64::INFINITY
    }
}

/// All three `Lambda` tables, row-major, entry `(i, j)` for eliminating `i` by `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaTables {
    k: usize,
    pub bounded: Vec<f64>,
    pub main: Vec<f64>,
    pub gaussian: Vec<f64>,
}

impl LambdaTables {
    pub fn arms(&self) -> usize {
        self.k
    }

    pub fn bounded(&self, i: usize, j: usize) -> f64 {
        self.bounded[i * self.k + j]
    }

    pub fn main(&self, i: usize, j: usize) -> f64 {
        self.main[i * self.k + j]
    }

    pub fn gaussian(&self, i: usize, j: usize) -> f64 {
        self.gaussian[i * self.k + j]
    }

    /// Gaussian form floored at `floor` (1 in the upper bounds, 1/4 in the
    /// comparator sets).
    pub fn gaussian_floored(&self, i: usize, j: usize, floor: f64) -> f64 {
        self.gaussian(i, j).max(floor)
    }
}

/// Tables from means and a row-major `V_ij = Var(X_i - X_j)` matrix.
pub fn lambda_tables_from(means: &[f64], v: &[f64]) -> LambdaTables {
    let k = means.len();
    let mut t = LambdaTables { k, bounded: vec![0.0; k * k], main: vec![0.0; k * k], gaussian: vec![0.0; k * k] };
    for i in 0..k {
        for j in 0..k {
            let (gap, vij) = (means[j] - means[i], v[i * k + j]);
            t.bounded[i * k + j] = lambda_bounded(vij, gap);
            t.main[i * k + j] = lambda_main(vij, gap);
            t.gaussian[i * k + j] = lambda_gaussian(vij, gap);
        }
    }
    t
}

pub fn lambda_tables(instance: &BanditInstance) -> LambdaTables {
    lambda_tables_from(instance.means(), &instance.difference_variances())
}

/// `sum_{i != best} sigma2 / gap_i^2`.
pub fn h_complexity(instance: &BanditInstance, sigma2: f64) -> f64 {
    gaps(instance).iter().filter(|&&g| g > 0.0).map(|g| sigma2 / (g * g)).sum()
}

fn argmin_set(row: impl Iterator<Item = f64>) -> Vec<usize> {
    let row: Vec<f64> = row.collect();
    let min = row.iter().copied().fold(f64::INFINITY, f64::min);
    if !min.is_finite() {
        return Vec::new();
    }
    let tol = 1e-12 * min.abs().max(1.0);
    row.iter().enumerate().filter(|(_, &x)| x - min <= tol).map(|(j, _)| j).collect()
}

/// Best comparators per arm under the bounded reference form; empty for the
/// optimal arm.
pub fn upsilon(tables: &LambdaTables) -> Vec<Vec<usize>> {
    let k = tables.k;
    (0..k).map(|i| argmin_set((0..k).map(|j| tables.bounded(i, j)))).collect()
}

/// Best comparators per arm under the Gaussian form floored at 1/4.
pub fn upsilon_prime(tables: &LambdaTables) -> Vec<Vec<usize>> {
    let k = tables.k;
    (0..k).map(|i| argmin_set((0..k).map(|j| tables.gaussian_floored(i, j, 0.25)))).collect()
}

/// Constant-free cores of the query upper bounds and their log multipliers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpperBounds {
    /// `sum_i min_j (V_ij / gap^2 + 1 / gap)`, with oversampling.
    pub b1: f64,
    /// `sum_i (V_i,best / gap^2 + 1 / gap)`, without oversampling.
    pub b2: f64,
    /// `sum_i min_j max(V_ij / gap^2, 1)`.
    pub g1: f64,
    /// `sum_i 1 / log(1 + gap^2 / V_i,best)`; the bound adds `3K`.
    pub g2: f64,
    /// `log(K Lambda / delta)` with `Lambda = max_i min_j` of the bounded summand.
    pub log_b: f64,
    /// Same with the Gaussian summand.
    pub log_g1: f64,
    /// `log((K / delta) / log(1 + 1 / Lambda))` with the Gaussian `Lambda`.
    pub log_g2: f64,
}

fn max_min(k: usize, best: usize, f: impl Fn(usize, usize) -> f64) -> (f64, f64) {
    let mut total = 0.0;
    let mut worst = 0.0f64;
    for i in (0..k).filter(|&i| i != best) {
        let m = (0..k).map(|j| f(i, j)).fold(f64::INFINITY, f64::min);
        total += m;
        worst = worst.max(m);
    }
    (total, worst)
}

pub fn upper_bounds(instance: &BanditInstance, delta: f64) -> Result<UpperBounds> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::BadDelta(delta));
    }
    let k = instance.arms();
    let best = instance.best().0;
    let tables = lambda_tables(instance);
    let (b1, lam_b) = max_min(k, best, |i, j| tables.main(i, j));
    let (g1, lam_g) = max_min(k, best, |i, j| tables.gaussian_floored(i, j, 1.0));
    let v = instance.difference_variances();
    let gp = gaps(instance);
    let mut b2 = 0.0;
    let mut g2 = 0.0;
    for i in (0..k).filter(|&i| i != best) {
        let (g, vi) = (gp[i], v[i * k + best]);
        b2 += lambda_main(vi, g);
        g2 += gaussian_lb_summand(g, vi);
    }
    let kf = k as f64;
    Ok(UpperBounds {
        b1,
        b2,
        g1,
        g2,
        log_b: (kf * lam_b / delta).ln(),
        log_g1: (kf * lam_g / delta).ln(),
        log_g2: ((kf / delta) / (1.0 + 1.0 / lam_g).ln()).ln(),
    })
}

/// `1 / log(1 + gap^2 / V)`, tending to 0 as `V -> 0`.
fn gaussian_lb_summand(gap: f64, v: f64) -> f64 {
    if v <= 0.0 {
        return 0.0;
    }
    1.0 / (gap * gap / v).ln_1p()
}

fn log_quarter_delta(delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::BadDelta(delta));
    }
    Ok((1.0 / (4.0 * delta)).ln().max(0.0))
}

/// Worst-case expected queries over Bernoulli laws with the given means and
/// `Var(X_i - X_best) <= v[i]`:
/// `(1/8) log(1/(4 delta)) sum_i max(v_i / gap^2, 1 / gap)`.
///
/// Zero for `delta >= 1/4`.
pub fn lower_bound_bernoulli(mu: &[f64], v: &[f64], delta: f64) -> Result<f64> {
    if mu.len() != v.len() {
        return Err(Error::InvalidInstance("one variance per arm is required".into()));
    }
    let best = crate::instance::best_arm_of(mu)?.0;
    let l = log_quarter_delta(delta)?;
    let mut total = 0.0;
    for i in (0..mu.len()).filter(|&i| i != best) {
        if !(0.25..=0.75).contains(&mu[i]) || !(0.25..=0.75).contains(&mu[best]) {
            return Err(Error::InfeasibleInstance(format!("means must lie in [1/4, 3/4], arm {} has {}", i + 1, mu[i])));
        }
        let (lo, hi) = bernoulli_variance_range(mu[best], mu[i]);
        if !(v[i] >= lo - 1e-12 && v[i] <= hi + 1e-12) {
            return Err(Error::InfeasibleInstance(format!(
                "Var(X_best - X_{}) = {} is outside [{lo}, {hi}]",
                i + 1,
                v[i]
            )));
        }
        let g = mu[best] - mu[i];
        total += (v[i] / (g * g)).max(1.0 / g);
    }
    Ok(l * total / 8.0)
}

/// Worst-case expected queries over Gaussian laws with the given means,
/// `Var(X_i - X_best) = v[i]` and unit-or-larger marginals:
/// `2 log(1/(4 delta)) sum_i 1 / log(1 + gap^2 / v_i)`.
pub fn lower_bound_gaussian(mu: &[f64], v: &[f64], delta: f64) -> Result<f64> {
    if mu.len() != v.len() {
        return Err(Error::InvalidInstance("one variance per arm is required".into()));
    }
    let best = crate::instance::best_arm_of(mu)?.0;
    let l = log_quarter_delta(delta)?;
    let total: f64 = (0..mu.len())
        .filter(|&i| i != best)
        .map(|i| gaussian_lb_summand(mu[best] - mu[i], v[i]))
        .sum();
    Ok(2.0 * l * total)
}

/// Cost of certifying `mu_i < <w, mu>`:
/// `max(Var(<X, w> - X_i) / adv^2, 3 ||w - e_i||_1 / adv)`, `+inf` if
/// `adv <= 0`.
pub fn xi(instance: &BanditInstance, i: usize, w: &[f64]) -> Result<f64> {
    let k = instance.arms();
    if w.len() != k {
        return Err(Error::BadWeights(format!("expected {k} weights, got {}", w.len())));
    }
    check_simplex(w)?;
    let means = instance.means();
    let adv: f64 = w.iter().zip(means).map(|(a, m)| a * m).sum::<f64>() - means[i];
    if adv <= 0.0 {
        return Ok(f64::INFINITY);
    }
    let mut a = w.to_vec();
    a[i] -= 1.0;
    let cov = instance.covariance();
    let mut var = 0.0;
    for p in 0..k {
        for q in 0..k {
            var += a[p] * cov[p * k + q] * a[q];
        }
    }
    let l1: f64 = a.iter().map(|x| x.abs()).sum();
    Ok((var.max(0.0) / (adv * adv)).max(3.0 * l1 / adv))
}

/// Exact Bernoulli KL divergence `KL(Ber(x) || Ber(y))`.
pub fn kl_bernoulli(x: f64, y: f64) -> f64 {
    let term = |p: f64, q: f64| if p == 0.0 { 0.0 } else { p * (p / q).ln() };
    term(x, y) + term(1.0 - x, 1.0 - y)
}

/// Chi-square upper bound on the Bernoulli KL: `(x - y)^2 / (y (1 - y))`.
pub fn kl_bernoulli_upper(x: f64, y: f64) -> f64 {
    (x - y) * (x - y) / (y * (1.0 - y))
}

/// Everything the `bounds` command prints.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexityReport {
    pub label: String,
    pub kind: InstanceKind,
    pub delta: f64,
    /// `h` with `sigma^2` set to the largest marginal variance.
    pub h: f64,
    pub sigma2: f64,
    pub tables: LambdaTables,
    pub upsilon: Vec<Vec<usize>>,
    pub upsilon_prime: Vec<Vec<usize>>,
    pub upper: UpperBounds,
    pub lb_bernoulli: std::result::Result<f64, String>,
    pub lb_gaussian: f64,
}

pub fn report(instance: &BanditInstance, delta: f64) -> Result<ComplexityReport> {
    let k = instance.arms();
    let best = instance.best().0;
    let sigma2 = instance.marginal_variances().into_iter().fold(0.0, f64::max);
    let tables = lambda_tables(instance);
    let v = instance.difference_variances();
    let v_best: Vec<f64> = (0..k).map(|i| v[i * k + best]).collect();
    let lb_bernoulli = lower_bound_bernoulli(instance.means(), &v_best, delta).map_err(|e| e.to_string());
    Ok(ComplexityReport {
        label: instance.label().to_string(),
        kind: instance.kind(),
        delta,
        h: h_complexity(instance, sigma2),
        sigma2,
        upsilon: upsilon(&tables),
        upsilon_prime: upsilon_prime(&tables),
        upper: upper_bounds(instance, delta)?,
        lb_bernoulli,
        lb_gaussian: lower_bound_gaussian(instance.means(), &v_best, delta)?,
        tables,
    })
}

impl ComplexityReport {
    /// Named scalar quantities, in report order.
    pub fn scalars(&self) -> Vec<(&'static str, f64)> {
        let u = &self.upper;
        let mut rows = vec![
            ("delta", self.delta),
            ("sigma2_max", self.sigma2),
            ("h", self.h),
            ("ub_b1", u.b1),
            ("ub_b2", u.b2),
            ("ub_g1", u.g1),
            ("ub_g2", u.g2),
            ("log_b", u.log_b),
            ("log_g1", u.log_g1),
            ("log_g2", u.log_g2),
        ];
        if let Ok(lb) = self.lb_bernoulli {
            rows.push(("lb_bernoulli", lb));
        }
        rows.push(("lb_gaussian", self.lb_gaussian));
        rows
    }

    /// Two-column `quantity,value` CSV, followed by the Lambda tables as
    /// `lambda_<form>_<i>_<j>` rows (1-based arms, finite entries only).
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["quantity", "value"])?;
        for (name, value) in self.scalars() {
            w.write_record([name.to_string(), value.to_string()])?;
        }
        let k = self.tables.arms();
        for (form, table) in
            [("bounded", &self.tables.bounded), ("main", &self.tables.main), ("gaussian", &self.tables.gaussian)]
        {
            for i in 0..k {
                for j in 0..k {
                    let x = table[i * k + j];
                    if x.is_finite() {
                        w.write_record([format!("lambda_{form}_{}_{}", i + 1, j + 1), x.to_string()])?;
                    }
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn fmt_set(s: &[usize]) -> String {
    if s.is_empty() {
        return "-".into();
    }
    s.iter().map(|j| (j + 1).to_string()).collect::<Vec<_>>().join(",")
}

impl fmt::Display for ComplexityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "instance {} ({:?}, K = {})", self.label, self.kind, self.tables.arms())?;
        for (name, value) in self.scalars() {
            writeln!(f, "  {name:<14}{value:>16.6}")?;
        }
        if let Err(reason) = &self.lb_bernoulli {
            writeln!(f, "  {:<14}{:>16}  ({reason})", "lb_bernoulli", "n/a")?;
        }
        writeln!(f)?;
        writeln!(f, "  {:<6}{:>14}{:>14}{:>14}  {:<12}{:<12}", "arm", "min bnd", "min main", "min gauss", "best j", "best j (g)")?;
        let k = self.tables.arms();
        for i in 0..k {
            let m = |g: &dyn Fn(usize) -> f64| (0..k).map(g).fold(f64::INFINITY, f64::min);
            writeln!(
                f,
                "  {:<6}{:>14.4}{:>14.4}{:>14.4}  {:<12}{:<12}",
                i + 1,
                m(&|j| self.tables.bounded(i, j)),
                m(&|j| self.tables.main(i, j)),
                m(&|j| self.tables.gaussian(i, j)),
                fmt_set(&self.upsilon[i]),
                fmt_set(&self.upsilon_prime[i]),
            )?;
        }
        writeln!(f)?;
        writeln!(f, "  upper-bound cores omit their numerical constant; multiply by the matching log factor.")?;
        writeln!(f, "  ub_g2 and lb_gaussian use 1 / log(1 + gap^2 / V) per arm; ub_g2 also carries + 3K.")?;
        write!(f, "  best comparator sets use V/gap^2 + 3/gap (bounded) and max(V/gap^2, 1/4) (gaussian).")
    }
}
