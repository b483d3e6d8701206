//! Joint reward samplers and the named scenario presets.

use std::path::Path;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::instance::{BanditInstance, Dependence};

/// Tolerance used when checking Bernoulli feasibility ranges.
const FEASIBILITY_TOL: f64 = 1e-12;

/// Lower-triangular factor `L` (row-major) with `L L' = cov`.
///
/// If the plain factorization fails, `1e-10 * trace / k` is added to the
/// diagonal once. Returns `None` if that also fails.
pub fn cholesky_with_jitter(cov: &[f64], k: usize) -> Option<Vec<f64>> {
    let m = DMatrix::from_row_slice(k, k, cov);
    let factor = match m.clone().cholesky() {
        Some(c) => c,
        None => {
            let jitter = 1e-10 * m.trace() / k as f64;
            let shifted = m + DMatrix::identity(k, k) * jitter.max(f64::MIN_POSITIVE);
            shifted.cholesky()?
        }
    };
    let l = factor.l();
    let mut out = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..=i {
            out[i * k + j] = l[(i, j)];
        }
    }
    Some(out)
}

/// Multivariate normal sampler.
#[derive(Debug, Clone)]
pub struct GaussianEnv {
    mean: Vec<f64>,
    factor: Vec<f64>,
    diagonal: bool,
    z: Vec<f64>,
}

impl GaussianEnv {
    pub fn new(mean: &[f64], cov: &[f64]) -> Result<Self> {
        let k = mean.len();
        if cov.len() != k * k {
            return Err(Error::InvalidInstance(format!("covariance must be {k}x{k}")));
        }
        let factor = cholesky_with_jitter(cov, k)
            .ok_or_else(|| Error::InvalidInstance("covariance is not positive semidefinite".into()))?;
        let diagonal = (0..k).all(|i| (0..i).all(|j| factor[i * k + j] == 0.0));
        Ok(Self { mean: mean.to_vec(), factor, diagonal, z: vec![0.0; k] })
    }

    pub fn arms(&self) -> usize {
        self.mean.len()
    }

    pub fn factor(&self) -> &[f64] {
        &self.factor
    }

    /// Draws one full reward vector into `out`.
    pub fn sample_into<R: Rng + ?Sized>(&mut self, rng: &mut R, out: &mut [f64]) {
        let k = self.mean.len();
        for z in self.z.iter_mut() {
            *z = rng.sample(StandardNormal);
        }
        if self.diagonal {
            for i in 0..k {
                out[i] = self.mean[i] + self.factor[i * k + i] * self.z[i];
            }
            return;
        }
        for i in 0..k {
            let row = &self.factor[i * k..i * k + i + 1];
            let mut x = self.mean[i];
            for (l, z) in row.iter().zip(&self.z) {
                x += l * z;
            }
            out[i] = x;
        }
    }
}

/// How a non-optimal Bernoulli arm is tied to the optimal one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BernoulliBranch {
    /// `X = 1{U <= mu}` with the shared uniform `U`.
    Best,
    /// `X = 1{U <= a or W <= b}`.
    Coupled { a: f64, b: f64 },
    /// `X = 1{W <= mu}`, independent of everything else.
    Independent,
}

/// Coupled Bernoulli arms sharing one uniform draw with the optimal arm.
///
/// Arm `i` is coupled when its target `Var(X_best - X_i)` is at most
/// `mu_best + mu_i - mu_best^2 - mu_i^2`; otherwise it is independent, which
/// then yields a smaller difference variance than the target.
#[derive(Debug, Clone, PartialEq)]
pub struct BernoulliCoupledEnv {
    means: Vec<f64>,
    best: usize,
    branches: Vec<BernoulliBranch>,
}

/// Feasible range of `Var(X - Y)` for Bernoulli variables with means `x >= y`.
pub fn bernoulli_variance_range(x: f64, y: f64) -> (f64, f64) {
    let d = x - y;
    (d - d * d, (2.0 - (x + y)).min(x + y) - d * d)
}

impl BernoulliCoupledEnv {
    pub fn new(means: &[f64], v_target: &[f64]) -> Result<Self> {
        let k = means.len();
        if k == 0 || v_target.len() != k {
            return Err(Error::InvalidInstance("one variance target per arm is required".into()));
        }
        if let Some((i, m)) = means.iter().enumerate().find(|(_, &m)| !(0.25..=0.75).contains(&m)) {
            return Err(Error::InfeasibleInstance(format!("mean {m} of arm {} is outside [1/4, 3/4]", i + 1)));
        }
        let best = crate::instance::best_arm_of(means)?.0;
        let mu1 = means[best];
        let mut branches = Vec::with_capacity(k);
        for i in 0..k {
            if i == best {
                branches.push(BernoulliBranch::Best);
                continue;
            }
            let (mi, v) = (means[i], v_target[i]);
            let (lo, hi) = bernoulli_variance_range(mu1, mi);
            if !(v >= lo - FEASIBILITY_TOL && v <= hi + FEASIBILITY_TOL) {
                return Err(Error::InfeasibleInstance(format!(
                    "Var(X_best - X_{}) = {v} is outside [{lo}, {hi}]",
                    i + 1
                )));
            }
            if v <= mu1 + mi - mu1 * mu1 - mi * mi {
                let d = mu1 - mi;
                let b = ((v - (d - d * d)) / (2.0 * (1.0 - mu1))).clamp(0.0, mi);
                let a = (mi - b) / (1.0 - b);
                let resid = a + b - a * b - mi;
                assert!(resid.abs() <= 1e-12, "coupling parameters miss the mean by {resid}");
                branches.push(BernoulliBranch::Coupled { a, b });
            } else {
                branches.push(BernoulliBranch::Independent);
            }
        }
        Ok(Self { means: means.to_vec(), best, branches })
    }

    pub fn arms(&self) -> usize {
        self.means.len()
    }

    pub fn branches(&self) -> &[BernoulliBranch] {
        &self.branches
    }

    pub fn best(&self) -> usize {
        self.best
    }

    /// `(a, b)` such that `X_i = 1{U <= a or W_i <= b}`; independent arms
    /// report `None`. The optimal arm is `(mu_best, 0)`.
    fn coupling(&self, i: usize) -> Option<(f64, f64)> {
        match self.branches[i] {
            BernoulliBranch::Best => Some((self.means[i], 0.0)),
            BernoulliBranch::Coupled { a, b } => Some((a, b)),
            BernoulliBranch::Independent => None,
        }
    }

    /// `E[X_i X_j]` of the realized coupling.
    pub fn second_moment(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return self.means[i];
        }
        match (self.coupling(i), self.coupling(j)) {
            (Some((ai, bi)), Some((aj, bj))) => {
                let (a_lo, b_lo, a_hi) = if ai <= aj { (ai, bi, aj) } else { (aj, bj, ai) };
                a_lo + (a_hi - a_lo) * b_lo + (1.0 - a_hi) * bi * bj
            }
            _ => self.means[i] * self.means[j],
        }
    }

    /// Exact covariance of the realized joint law, row-major.
    pub fn covariance(&self) -> Vec<f64> {
        let k = self.arms();
        let mut cov = vec![0.0; k * k];
        for i in 0..k {
            for j in 0..k {
                cov[i * k + j] = self.second_moment(i, j) - self.means[i] * self.means[j];
            }
        }
        cov
    }

    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let u: f64 = rng.random();
        for (i, branch) in self.branches.iter().enumerate() {
            let x = match *branch {
                BernoulliBranch::Best => u <= self.means[i],
                BernoulliBranch::Coupled { a, b } => {
                    let w: f64 = rng.random();
                    u <= a || w <= b
                }
                BernoulliBranch::Independent => rng.random::<f64>() <= self.means[i],
            };
            out[i] = if x { 1.0 } else { 0.0 };
        }
    }
}

/// Sampler for any supported instance.
#[derive(Debug, Clone)]
pub enum Environment {
    Gaussian(GaussianEnv),
    Bernoulli(BernoulliCoupledEnv),
}

impl Environment {
    pub fn from_instance(instance: &BanditInstance) -> Result<Self> {
        Ok(match instance.dependence() {
            Dependence::Gaussian { covariance } => Environment::Gaussian(GaussianEnv::new(instance.means(), covariance)?),
            Dependence::Bernoulli { v_target } => {
                Environment::Bernoulli(BernoulliCoupledEnv::new(instance.means(), v_target)?)
            }
        })
    }

    pub fn arms(&self) -> usize {
        match self {
            Environment::Gaussian(g) => g.arms(),
            Environment::Bernoulli(b) => b.arms(),
        }
    }

    /// One i.i.d. draw of the full reward vector.
    pub fn sample_into<R: Rng + ?Sized>(&mut self, rng: &mut R, out: &mut [f64]) {
        match self {
            Environment::Gaussian(g) => g.sample_into(rng, out),
            Environment::Bernoulli(b) => b.sample_into(rng, out),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Vec<f64> {
        let mut out = vec![0.0; self.arms()];
        self.sample_into(rng, &mut out);
        out
    }
}

fn fig1_means(k: usize) -> Vec<f64> {
    (1..=k).map(|i| i as f64 / 10.0).collect()
}

/// Ten unit-variance arms with means `i/10` and common correlation `rho`.
pub fn make_fig1_equicorrelated(rho: f64) -> Result<BanditInstance> {
    const K: usize = 10;
    if !(rho > -1.0 / (K as f64 - 1.0) && rho < 1.0) {
        return Err(Error::BadRho(rho));
    }
    let cov: Vec<f64> = (0..K * K).map(|n| if n / K == n % K { 1.0 } else { rho }).collect();
    BanditInstance::gaussian_flat(format!("fig1-rho-{rho}"), fig1_means(K), cov)
}

/// Sixteen unit-variance arms with means `i/10`, split into `n_cl`
/// contiguous equal-size blocks of correlation 0.99; blocks are independent.
pub fn make_fig1_clusters(n_cl: usize) -> Result<BanditInstance> {
    const K: usize = 16;
    const INTRA: f64 = 0.99;
    if n_cl == 0 || !K.is_multiple_of(n_cl) {
        return Err(Error::BadClusterCount(n_cl));
    }
    let size = K / n_cl;
    let cov: Vec<f64> = (0..K * K)
        .map(|n| {
            let (i, j) = (n / K, n % K);
            if i == j {
                1.0
            } else if i / size == j / size {
                INTRA
            } else {
                0.0
            }
        })
        .collect();
    BanditInstance::gaussian_flat(format!("fig1-clusters-{n_cl}"), fig1_means(K), cov)
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInstance(format!("eps must be positive, got {eps}")))
    }
}

/// `X_1 ~ N(0, 1)` and `X_2 = X_1 + Y` with independent `Y ~ N(eps, eps^2)`.
pub fn make_toy2(eps: f64) -> Result<BanditInstance> {
    check_eps(eps)?;
    let cov = vec![vec![1.0, 1.0], vec![1.0, 1.0 + eps * eps]];
    BanditInstance::gaussian(format!("toy2-{eps}"), vec![0.0, eps], cov)
}

/// The two arms of [`make_toy2`] plus an independent `N(2 eps, 1)` arm.
pub fn make_toy3(eps: f64) -> Result<BanditInstance> {
    check_eps(eps)?;
    let cov = vec![vec![1.0, 1.0, 0.0], vec![1.0, 1.0 + eps * eps, 0.0], vec![0.0, 0.0, 1.0]];
    BanditInstance::gaussian(format!("toy3-{eps}"), vec![0.0, eps, 2.0 * eps], cov)
}

/// Named presets listed by the CLI.
pub const PRESET_NAMES: &[&str] = &[
    "fig1-rho-0",
    "fig1-rho-0.5",
    "fig1-rho-0.7",
    "fig1-rho-0.9",
    "fig1-clusters-8",
    "fig1-clusters-4",
    "fig1-clusters-2",
    "fig1-clusters-1",
    "toy2-0.1",
    "toy2-0.05",
    "toy3-0.2",
];

fn parse_num<T: std::str::FromStr>(name: &str, s: &str) -> Result<T> {
    s.parse().map_err(|_| Error::UnknownScenario(name.to_string()))
}

/// Resolves a preset name (`fig1-rho-R`, `fig1-clusters-N`, `toy2-E`,
/// `toy3-E`) or a path to a JSON instance file.
pub fn scenario(name: &str) -> Result<BanditInstance> {
    let inst = if let Some(r) = name.strip_prefix("fig1-rho-") {
        make_fig1_equicorrelated(parse_num(name, r)?)?
    } else if let Some(n) = name.strip_prefix("fig1-clusters-") {
        make_fig1_clusters(parse_num(name, n)?)?
    } else if let Some(e) = name.strip_prefix("toy2-") {
        make_toy2(parse_num(name, e)?)?
    } else if let Some(e) = name.strip_prefix("toy3-") {
        make_toy3(parse_num(name, e)?)?
    } else if Path::new(name).is_file() {
        let mut inst = BanditInstance::from_json_file(name)?;
        if inst.label().is_empty() {
            inst = inst.with_label(name);
        }
        return Ok(inst);
    } else {
        return Err(Error::UnknownScenario(name.to_string()));
    };
    Ok(inst.with_label(name))
}
