//! Offline optimum.
//!
//! [`optimal_exact`] searches the machine's state space directly and works for
//! any delay at desk scale. [`solve_z2`] is the delay-2 pipeline: compress
//! runs of equal requests into a weighted caching instance, solve that by
//! min-cost flow, and rebuild an eviction schedule from the solution.

mod dp;
pub mod flow;
pub mod weighted;
mod z2;

use thiserror::Error;

use crate::instance::{EvictionSchedule, InstanceError};

pub use dp::{optimal_exact, optimal_exact_with_budget, state_estimate};
pub use weighted::{
    compress_runs, evaluate_weighted, weighted_caching_optimal, CacheDecision, LayeredMetricGraph,
    WeightedError, WeightedRequest, WeightedSolution,
};
pub use z2::solve_z2;

/// Default cap on `C(n, k) · 2^Z · T` for the exact search.
pub const DEFAULT_BUDGET: u64 = 100_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OptimalError {
    #[error("state space estimate {estimate} exceeds budget {budget}")]
    BudgetExceeded { estimate: u128, budget: u64 },
    #[error("universe n = {0} is too large for the exact search (max 64)")]
    UniverseTooLarge(u32),
    #[error("this solver requires Z = {expected}, got Z = {got}")]
    UnsupportedDelay { expected: u32, got: u32 },
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error(transparent)]
    Weighted(#[from] WeightedError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OptimalSolution {
    pub cost: u64,
    pub schedule: EvictionSchedule,
}
