//! The query protocol: each round the learner names a subset of arms, the
//! environment draws a full reward vector and reveals only those coordinates.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::environments::Environment;
use crate::instance::ArmId;

pub type TrialRng = ChaCha8Rng;

/// Generator for one trial: keyed by the experiment seed and scenario name,
/// with the trial index selecting the stream.
pub fn trial_rng(seed: u64, scenario: &str, trial: u64) -> TrialRng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(scenario.as_bytes());
    let key: [u8; 32] = h.finalize().into();
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(trial);
    rng
}

/// Environment plus query accounting for a single run.
#[derive(Debug, Clone)]
pub struct GameProtocol {
    env: Environment,
    rng: TrialRng,
    draw: Vec<f64>,
    rounds: u64,
    total_queries: u64,
    per_arm: Vec<u64>,
}

impl GameProtocol {
    pub fn new(env: Environment, rng: TrialRng) -> Self {
        let k = env.arms();
        Self { env, rng, draw: vec![0.0; k], rounds: 0, total_queries: 0, per_arm: vec![0; k] }
    }

    pub fn arms(&self) -> usize {
        self.per_arm.len()
    }

    /// Plays one round on `arms`, writing the revealed rewards into `out`.
    pub fn query(&mut self, arms: &[usize], out: &mut Vec<(ArmId, f64)>) {
        self.env.sample_into(&mut self.rng, &mut self.draw);
        out.clear();
        for &a in arms {
            out.push((ArmId(a), self.draw[a]));
            self.per_arm[a] += 1;
        }
        self.rounds += 1;
        self.total_queries += arms.len() as u64;
    }

    pub fn rounds(&self) -> u64 {
        self.rounds
    }

    pub fn total_queries(&self) -> u64 {
        self.total_queries
    }

    pub fn per_arm_queries(&self) -> &[u64] {
        &self.per_arm
    }
}
