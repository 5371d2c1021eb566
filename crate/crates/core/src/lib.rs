//! Caching with delayed hits.
//!
//! A request for a page that is not cached is fetched from the backing store
//! and only lands in the cache `Z` requests later. Requests for a page that is
//! still in flight are *delayed hits* and pay the remaining fetch time. This
//! crate provides:
//!
//! * [`fsm`]: the exact step-by-step cost model, replaying an eviction schedule
//!   against a request sequence;
//! * [`policies`]: LRU, FIFO, LFU and a farthest-in-future rule adapted to
//!   delayed hits;
//! * [`phases`]: phase / superphase decompositions and an audit of the
//!   per-phase and per-superphase bounds behind LRU's `O(kZ)` competitive ratio;
//! * [`optimal`]: an exact offline optimum (dynamic programming over machine
//!   states) and the delay-2 pipeline through weighted caching and min-cost flow;
//! * [`traces`]: truncated Zipf workloads and trace ingestion.
//!
//! Pages are numbered `1..=n`. Time steps are numbered `1..=T` in the model;
//! all slices in this crate are indexed from zero, so step `t` lives at index
//! `t - 1`.

pub mod fsm;
pub mod instance;
pub mod optimal;
pub mod phases;
pub mod policies;
pub mod traces;

pub use fsm::{
    evaluate, evaluate_by_steps, ConfigError, FsmState, SimulationConfig, SimulationResult, Status, StepRecord,
    StepViolation, Violation,
};
pub use instance::{EvictionSchedule, InstanceError, Page, RequestSequence};
pub use optimal::{optimal_exact, solve_z2, OptimalError, OptimalSolution};
pub use phases::{
    check_lemma_bounds, partition_phases, partition_superphases, superphase_latencies, LemmaAudit, PhasePartition,
    Ratio, SuperphasePartition,
};
pub use policies::{is_marking, run_policy, PolicyKind, TieBreak};
