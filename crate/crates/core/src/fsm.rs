//! Exact semantics of delayed-hits caching.
//!
//! At every step `t` the machine first applies the eviction `e_t`: if the
//! request `Z` steps ago was a miss, its page arrives now and `e_t` names the
//! page leaving (possibly the arriving page itself); otherwise `e_t` must be
//! `None`. Then `r_t` is classified as a hit (latency 0), a delayed hit on a
//! miss `i < Z` steps earlier (latency `Z - i`), or a miss (latency `Z`).
//!
//! [`evaluate`] runs the machine over a whole sequence with full history;
//! [`FsmState`] is the bounded-memory automaton view. The two are kept
//! separate and cross-checked in tests.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use thiserror::Error;

use crate::instance::{EvictionSchedule, InstanceError, Page, RequestSequence};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("delay Z must be at least 1")]
    ZeroDelay,
    #[error("cache size k must be at least 1")]
    ZeroCacheSize,
    #[error("universe size n = {n} is smaller than cache size k = {k}")]
    UniverseTooSmall { n: u32, k: usize },
    #[error("initial cache holds {got} distinct pages, expected k = {expected}")]
    InitialCacheSize { expected: usize, got: usize },
    #[error("initial cache page {page} is outside 1..={n}")]
    InitialPageOutOfRange { page: Page, n: u32 },
}

/// Parameters `(Z, k, n)` and the starting cache contents.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SimulationConfig {
    delay: u32,
    cache_size: usize,
    universe: u32,
    initial_cache: Vec<Page>,
}

impl SimulationConfig {
    /// Config with the default initial cache `{1, ..., k}`.
    pub fn new(delay: u32, cache_size: usize, universe: u32) -> Result<Self, ConfigError> {
        if delay == 0 {
            return Err(ConfigError::ZeroDelay);
        }
        if cache_size == 0 {
            return Err(ConfigError::ZeroCacheSize);
        }
        if (universe as usize) < cache_size {
            return Err(ConfigError::UniverseTooSmall { n: universe, k: cache_size });
        }
        Ok(Self {
            delay,
            cache_size,
            universe,
            initial_cache: (1..=cache_size as Page).collect(),
        })
    }

    pub fn with_initial_cache(mut self, pages: impl IntoIterator<Item = Page>) -> Result<Self, ConfigError> {
        let set: BTreeSet<Page> = pages.into_iter().collect();
        if let Some(&page) = set.iter().find(|&&p| p == 0 || p > self.universe) {
            return Err(ConfigError::InitialPageOutOfRange { page, n: self.universe });
        }
        if set.len() != self.cache_size {
            return Err(ConfigError::InitialCacheSize { expected: self.cache_size, got: set.len() });
        }
        self.initial_cache = set.into_iter().collect();
        Ok(self)
    }

    /// Same parameters with a different delay.
    pub fn with_delay(&self, delay: u32) -> Result<Self, ConfigError> {
        if delay == 0 {
            return Err(ConfigError::ZeroDelay);
        }
        Ok(Self { delay, ..self.clone() })
    }

    pub fn delay(&self) -> u32 {
        self.delay
    }

    pub fn cache_size(&self) -> usize {
        self.cache_size
    }

    pub fn universe(&self) -> u32 {
        self.universe
    }

    /// Sorted initial cache contents.
    pub fn initial_cache(&self) -> &[Page] {
        &self.initial_cache
    }

    fn check_request(&self, r: &RequestSequence) -> Result<(), InstanceError> {
        for (index, &page) in r.as_slice().iter().enumerate() {
            if page == 0 || page > self.universe {
                return Err(InstanceError::PageOutOfRange { index, page, n: self.universe });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Status {
    Hit,
    DelayedHit,
    Miss,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Hit => "H",
            Status::DelayedHit => "DH",
            Status::Miss => "M",
        })
    }
}

/// Why a schedule was rejected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Violation {
    /// `e_t` names a page although nothing arrives at `t`.
    EvictionWithoutMiss,
    /// A page arrives at `t` but `e_t` is not in the cache or the arriving page.
    EvictionTargetAbsent,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Violation::EvictionWithoutMiss => "EvictionWithoutMiss",
            Violation::EvictionTargetAbsent => "EvictionTargetAbsent",
        })
    }
}

/// A rejected step: model time `t` (1-based) and the reason.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("invalid schedule at t = {time}: {reason}")]
pub struct StepViolation {
    pub time: usize,
    pub reason: Violation,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StepRecord {
    /// Model time, 1-based.
    pub time: usize,
    pub request: Page,
    pub eviction: Option<Page>,
    pub status: Status,
    pub latency: u64,
    /// Sorted cache contents after the eviction at this step.
    pub cache_after: Vec<Page>,
    /// `i` such that the miss at `t - i` serves this delayed hit.
    pub delayed_hit_offset: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SimulationResult {
    Valid { total_latency: u64, steps: Vec<StepRecord> },
    Invalid { time: usize, reason: Violation },
}

impl SimulationResult {
    pub fn is_valid(&self) -> bool {
        matches!(self, SimulationResult::Valid { .. })
    }

    /// Total latency, or `None` for an invalid schedule (infinite cost).
    pub fn cost(&self) -> Option<u64> {
        match self {
            SimulationResult::Valid { total_latency, .. } => Some(*total_latency),
            SimulationResult::Invalid { .. } => None,
        }
    }

    pub fn steps(&self) -> &[StepRecord] {
        match self {
            SimulationResult::Valid { steps, .. } => steps,
            SimulationResult::Invalid { .. } => &[],
        }
    }

    pub fn statuses(&self) -> Vec<Status> {
        self.steps().iter().map(|s| s.status).collect()
    }

    pub fn latencies(&self) -> Vec<u64> {
        self.steps().iter().map(|s| s.latency).collect()
    }
}

/// Runs the machine over `r` with schedule `e`.
///
/// Errors are reserved for malformed inputs; an infeasible schedule is an
/// [`SimulationResult::Invalid`] outcome.
pub fn evaluate(
    config: &SimulationConfig,
    r: &RequestSequence,
    e: &EvictionSchedule,
) -> Result<SimulationResult, InstanceError> {
    if r.len() != e.len() {
        return Err(InstanceError::LengthMismatch { requests: r.len(), schedule: e.len() });
    }
    config.check_request(r)?;
    for (index, ev) in e.as_slice().iter().enumerate() {
        if let Some(page) = *ev {
            if page == 0 || page > config.universe {
                return Err(InstanceError::PageOutOfRange { index, page, n: config.universe });
            }
        }
    }

    let z = config.delay as usize;
    let reqs = r.as_slice();
    let evs = e.as_slice();
    let len = reqs.len();
    // status[t] for model time t; slot 0 stands in for the initialization symbol.
    let mut status: Vec<Option<Status>> = vec![None; len + 1];
    let mut cache: BTreeSet<Page> = config.initial_cache.iter().copied().collect();
    let mut steps = Vec::with_capacity(len);
    let mut total = 0u64;

    for t in 1..=len {
        let arrival = (t > z && status[t - z] == Some(Status::Miss)).then(|| reqs[t - z - 1]);
        match arrival {
            Some(arriving) => {
                assert!(
                    !cache.contains(&arriving),
                    "page {arriving} arriving at t = {t} is already cached"
                );
                match evs[t - 1] {
                    Some(victim) if victim == arriving || cache.contains(&victim) => {
                        if victim != arriving {
                            cache.remove(&victim);
                            cache.insert(arriving);
                        }
                    }
                    _ => {
                        return Ok(SimulationResult::Invalid { time: t, reason: Violation::EvictionTargetAbsent });
                    }
                }
            }
            None => {
                if evs[t - 1].is_some() {
                    return Ok(SimulationResult::Invalid { time: t, reason: Violation::EvictionWithoutMiss });
                }
            }
        }
        debug_assert_eq!(cache.len(), config.cache_size);

        let request = reqs[t - 1];
        let pending: Vec<usize> = (1..z.min(t))
            .filter(|&i| status[t - i] == Some(Status::Miss) && reqs[t - i - 1] == request)
            .collect();
        assert!(pending.len() <= 1, "request at t = {t} matches several in-flight misses");

        let (st, latency, offset) = if cache.contains(&request) {
            (Status::Hit, 0, None)
        } else if let Some(&i) = pending.first() {
            (Status::DelayedHit, (z - i) as u64, Some(i as u32))
        } else {
            (Status::Miss, z as u64, None)
        };
        status[t] = Some(st);
        total += latency;
        steps.push(StepRecord {
            time: t,
            request,
            eviction: evs[t - 1],
            status: st,
            latency,
            cache_after: cache.iter().copied().collect(),
            delayed_hit_offset: offset,
        });
    }
    Ok(SimulationResult::Valid { total_latency: total, steps })
}

/// Automaton state after some prefix: the cache plus the last `Z`
/// `(status, request)` pairs, most recent first.
///
/// `Z` pairs are needed rather than `Z - 1`: the arrival at the next step is
/// decided by the status `Z` steps back.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FsmState {
    delay: u32,
    time: usize,
    cache: BTreeSet<Page>,
    window: VecDeque<(Status, Page)>,
}

impl FsmState {
    pub fn new(config: &SimulationConfig) -> Self {
        Self {
            delay: config.delay,
            time: 0,
            cache: config.initial_cache.iter().copied().collect(),
            window: VecDeque::with_capacity(config.delay as usize),
        }
    }

    /// Number of steps taken so far.
    pub fn time(&self) -> usize {
        self.time
    }

    pub fn cache(&self) -> impl Iterator<Item = Page> + '_ {
        self.cache.iter().copied()
    }

    pub fn contains(&self, page: Page) -> bool {
        self.cache.contains(&page)
    }

    /// Page arriving at the next step, i.e. `r_{t+1-Z}` if that request missed.
    pub fn arriving(&self) -> Option<Page> {
        match self.window.get(self.delay as usize - 1) {
            Some(&(Status::Miss, page)) => Some(page),
            _ => None,
        }
    }

    /// Recent `(status, request)` pairs, most recent first.
    pub fn window(&self) -> impl Iterator<Item = (Status, Page)> + '_ {
        self.window.iter().copied()
    }

    /// One transition, leaving `self` untouched.
    pub fn step(&self, request: Page, eviction: Option<Page>) -> Result<(FsmState, StepRecord), StepViolation> {
        let mut next = self.clone();
        let record = next.advance(request, eviction)?;
        Ok((next, record))
    }

    /// One transition in place. On error the state is unchanged.
    pub fn advance(&mut self, request: Page, eviction: Option<Page>) -> Result<StepRecord, StepViolation> {
        let t = self.time + 1;
        match (self.arriving(), eviction) {
            (Some(arriving), Some(victim)) if victim == arriving || self.cache.contains(&victim) => {
                assert!(!self.cache.contains(&arriving), "arriving page {arriving} already cached");
                if victim != arriving {
                    self.cache.remove(&victim);
                    self.cache.insert(arriving);
                }
            }
            (Some(_), _) => return Err(StepViolation { time: t, reason: Violation::EvictionTargetAbsent }),
            (None, Some(_)) => return Err(StepViolation { time: t, reason: Violation::EvictionWithoutMiss }),
            (None, None) => {}
        }

        let z = self.delay;
        let mut matches = self
            .window
            .iter()
            .take(z as usize - 1)
            .enumerate()
            .filter(|(_, &(st, page))| st == Status::Miss && page == request)
            .map(|(idx, _)| idx as u32 + 1);
        let pending = matches.next();
        assert!(matches.next().is_none(), "request at t = {t} matches several in-flight misses");

        let (status, latency, offset) = if self.cache.contains(&request) {
            (Status::Hit, 0, None)
        } else if let Some(i) = pending {
            (Status::DelayedHit, u64::from(z - i), Some(i))
        } else {
            (Status::Miss, u64::from(z), None)
        };

        self.window.push_front((status, request));
        self.window.truncate(z as usize);
        self.time = t;
        Ok(StepRecord {
            time: t,
            request,
            eviction,
            status,
            latency,
            cache_after: self.cache.iter().copied().collect(),
            delayed_hit_offset: offset,
        })
    }
}

/// [`evaluate`] expressed as a fold of [`FsmState::step`].
pub fn evaluate_by_steps(
    config: &SimulationConfig,
    r: &RequestSequence,
    e: &EvictionSchedule,
) -> Result<SimulationResult, InstanceError> {
    if r.len() != e.len() {
        return Err(InstanceError::LengthMismatch { requests: r.len(), schedule: e.len() });
    }
    config.check_request(r)?;
    let folded = r.as_slice().iter().zip(e.as_slice()).try_fold(
        (FsmState::new(config), Vec::with_capacity(r.len()), 0u64),
        |(state, mut steps, total), (&req, &ev)| {
            let (next, rec) = state.step(req, ev)?;
            let total = total + rec.latency;
            steps.push(rec);
            Ok::<_, StepViolation>((next, steps, total))
        },
    );
    Ok(match folded {
        Ok((_, steps, total_latency)) => SimulationResult::Valid { total_latency, steps },
        Err(v) => SimulationResult::Invalid { time: v.time, reason: v.reason },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use Status::*;

    fn seq(pages: &[Page], n: u32) -> RequestSequence {
        RequestSequence::new(n, pages.to_vec()).unwrap()
    }

    fn sched(e: &[Option<Page>]) -> EvictionSchedule {
        EvictionSchedule(e.to_vec())
    }

    #[test]
    fn delayed_hit_walkthrough() {
        let cfg = SimulationConfig::new(10, 3, 7).unwrap().with_initial_cache([1, 2, 4]).unwrap();
        let r = seq(&[3, 1, 3, 2, 4, 1, 5, 2], 7);
        let res = evaluate(&cfg, &r, &EvictionSchedule::none(8)).unwrap();
        assert_eq!(res.cost(), Some(28));
        assert_eq!(res.statuses(), vec![Miss, Hit, DelayedHit, Hit, Hit, Hit, Miss, Hit]);
        assert_eq!(res.steps()[2].latency, 8);
        assert_eq!(res.steps()[2].delayed_hit_offset, Some(2));
    }

    #[test]
    fn alternating_pair_replay() {
        let cfg = SimulationConfig::new(2, 1, 2).unwrap();
        let r = seq(&[2, 1, 2, 1, 2, 1], 2);
        let e = sched(&[None, None, Some(1), None, None, Some(2)]);
        let res = evaluate(&cfg, &r, &e).unwrap();
        assert_eq!(res.cost(), Some(4));
        assert_eq!(res.statuses(), vec![Miss, Hit, Hit, Miss, Hit, Hit]);
        let caches: Vec<Vec<Page>> = res.steps().iter().map(|s| s.cache_after.clone()).collect();
        assert_eq!(caches, vec![vec![1], vec![1], vec![2], vec![2], vec![2], vec![1]]);
    }

    #[test]
    fn in_transit_reuse_replay() {
        let cfg = SimulationConfig::new(3, 3, 4).unwrap();
        let r = seq(&[1, 2, 4, 3, 4, 2, 4], 4);
        let e = sched(&[None, None, None, None, None, Some(3), None]);
        let res = evaluate(&cfg, &r, &e).unwrap();
        assert_eq!(res.cost(), Some(4));
        assert_eq!(res.latencies(), vec![0, 0, 3, 0, 1, 0, 0]);
        assert_eq!(res.statuses()[2], Miss);
        assert_eq!(res.statuses()[4], DelayedHit);
    }

    #[test]
    fn all_hits_cost_nothing() {
        let cfg = SimulationConfig::new(4, 3, 5).unwrap();
        let r = seq(&[1, 2, 3, 3, 1, 2], 5);
        let res = evaluate(&cfg, &r, &EvictionSchedule::none(6)).unwrap();
        assert_eq!(res.cost(), Some(0));
        assert!(res.statuses().iter().all(|&s| s == Hit));
    }

    #[test]
    fn eviction_without_miss_is_invalid() {
        let cfg = SimulationConfig::new(2, 1, 2).unwrap();
        let res = evaluate(&cfg, &seq(&[1, 1], 2), &sched(&[Some(2), None])).unwrap();
        assert_eq!(res, SimulationResult::Invalid { time: 1, reason: Violation::EvictionWithoutMiss });
    }

    #[test]
    fn missing_eviction_on_arrival_is_invalid() {
        let cfg = SimulationConfig::new(1, 1, 2).unwrap();
        let res = evaluate(&cfg, &seq(&[2, 1], 2), &sched(&[None, None])).unwrap();
        assert_eq!(res, SimulationResult::Invalid { time: 2, reason: Violation::EvictionTargetAbsent });
        // Naming a page that is neither cached nor arriving.
        let cfg = SimulationConfig::new(1, 1, 3).unwrap();
        let res = evaluate(&cfg, &seq(&[2, 1], 3), &sched(&[None, Some(3)])).unwrap();
        assert_eq!(res, SimulationResult::Invalid { time: 2, reason: Violation::EvictionTargetAbsent });
    }

    #[test]
    fn self_eviction_discards_arrival() {
        let cfg = SimulationConfig::new(1, 1, 2).unwrap();
        let res = evaluate(&cfg, &seq(&[2, 1, 2], 2), &sched(&[None, Some(2), None])).unwrap();
        assert_eq!(res.statuses(), vec![Miss, Hit, Miss]);
        assert_eq!(res.cost(), Some(2));
    }

    #[test]
    fn empty_instance_is_free() {
        let cfg = SimulationConfig::new(3, 2, 2).unwrap();
        let res = evaluate(&cfg, &seq(&[], 2), &EvictionSchedule::none(0)).unwrap();
        assert_eq!(res.cost(), Some(0));
    }

    #[test]
    fn malformed_inputs_are_errors() {
        let cfg = SimulationConfig::new(2, 1, 2).unwrap();
        assert!(matches!(
            evaluate(&cfg, &seq(&[1, 2], 2), &EvictionSchedule::none(1)),
            Err(InstanceError::LengthMismatch { .. })
        ));
        assert!(evaluate(&cfg, &seq(&[1, 3], 3), &EvictionSchedule::none(2)).is_err());
        assert!(evaluate(&cfg, &seq(&[1], 2), &sched(&[Some(9)])).is_err());
    }

    #[test]
    fn config_validation() {
        assert_eq!(SimulationConfig::new(0, 1, 1), Err(ConfigError::ZeroDelay));
        assert_eq!(SimulationConfig::new(1, 0, 1), Err(ConfigError::ZeroCacheSize));
        assert!(matches!(SimulationConfig::new(1, 3, 2), Err(ConfigError::UniverseTooSmall { .. })));
        let cfg = SimulationConfig::new(1, 2, 4).unwrap();
        assert_eq!(cfg.initial_cache(), &[1, 2]);
        assert!(cfg.clone().with_initial_cache([1]).is_err());
        assert!(cfg.clone().with_initial_cache([1, 5]).is_err());
        assert_eq!(cfg.with_initial_cache([4, 3]).unwrap().initial_cache(), &[3, 4]);
    }

    #[test]
    fn step_from_initial_state() {
        let cfg = SimulationConfig::new(2, 1, 2).unwrap();
        let (state, rec) = FsmState::new(&cfg).step(2, None).unwrap();
        assert_eq!((rec.status, rec.latency), (Miss, 2));
        assert_eq!(state.arriving(), None);
        let (state, _) = state.step(1, None).unwrap();
        assert_eq!(state.arriving(), Some(2));
    }

    #[test]
    fn step_delayed_hit_one_step_after_miss() {
        let cfg = SimulationConfig::new(5, 1, 3).unwrap();
        let (state, _) = FsmState::new(&cfg).step(2, None).unwrap();
        let (_, rec) = state.step(2, None).unwrap();
        assert_eq!((rec.status, rec.latency, rec.delayed_hit_offset), (DelayedHit, 4, Some(1)));
    }

    #[test]
    fn delay_one_is_classical_paging() {
        let cfg = SimulationConfig::new(1, 1, 3).unwrap();
        let mut state = FsmState::new(&cfg);
        assert_eq!(state.advance(2, None).unwrap().status, Miss);
        // Page 2 arrives at the very next step and any cached page can make room.
        assert_eq!(state.arriving(), Some(2));
        assert!(state.clone().advance(3, Some(3)).is_err());
        let rec = state.advance(2, Some(1)).unwrap();
        assert_eq!((rec.status, rec.cache_after.clone()), (Hit, vec![2]));
    }

    #[test]
    fn step_error_leaves_state_untouched() {
        let cfg = SimulationConfig::new(2, 1, 2).unwrap();
        let mut state = FsmState::new(&cfg);
        let before = state.clone();
        assert_eq!(
            state.advance(1, Some(1)),
            Err(StepViolation { time: 1, reason: Violation::EvictionWithoutMiss })
        );
        assert_eq!(state, before);
    }
}
