//! Best-arm identification with joint queries and covariance-adaptive
//! elimination tests.
//!
//! Each round the learner queries a subset of arms and observes all their
//! rewards from the same underlying draw. Because paired observations share
//! the draw, the variance of a reward difference can be far smaller than the
//! sum of the marginal variances, and elimination tests built on empirical
//! difference variances stop much earlier on positively correlated arms.

pub mod baselines;
pub mod bench;
pub mod complexity;
pub mod concentration;
pub mod convex;
pub mod environments;
pub mod error;
pub mod instance;
pub mod pairwise;
pub mod protocol;
pub mod stats;

pub use concentration::ConfidenceSchedule;
pub use environments::{scenario, Environment};
pub use error::{Error, Result};
pub use instance::{ArmId, BanditInstance, Evidence, InstanceKind, RunResult, SoundnessFlag, TraceEvent};
pub use stats::PairStats;
