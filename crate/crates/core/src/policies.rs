//! Eviction policies adapted to delayed hits.
//!
//! A policy acts only when a page arrives, i.e. at `t` with `σ(t - Z) = Miss`,
//! and picks its victim from the current cache plus the arriving page. LRU,
//! FIFO and LFU see only `r_1..r_{t-1}` and their own run; `BeladyFif` reads
//! the future.

use std::cmp::Reverse;
use std::fmt;
use std::str::FromStr;

use crate::fsm::{evaluate, FsmState, SimulationConfig, SimulationResult};
use crate::instance::{EvictionSchedule, Page, RequestSequence};
use crate::phases::partition_phases;

/// Order used among candidates that the policy's own key cannot separate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum TieBreak {
    #[default]
    SmallestPage,
    LargestPage,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PolicyKind {
    /// Least recently requested; never-requested pages first, smallest id on ties.
    Lru,
    /// Earliest cache entry; initial pages entered at time 0.
    Fifo(TieBreak),
    /// Fewest requests so far.
    Lfu(TieBreak),
    /// Next request farthest in the future (offline).
    BeladyFif(TieBreak),
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 4] = [
        PolicyKind::Lru,
        PolicyKind::Fifo(TieBreak::SmallestPage),
        PolicyKind::Lfu(TieBreak::SmallestPage),
        PolicyKind::BeladyFif(TieBreak::SmallestPage),
    ];

    pub fn name(&self) -> &'static str {
        match self {
            PolicyKind::Lru => "lru",
            PolicyKind::Fifo(_) => "fifo",
            PolicyKind::Lfu(_) => "lfu",
            PolicyKind::BeladyFif(_) => "belady",
        }
    }

    pub fn is_online(&self) -> bool {
        !matches!(self, PolicyKind::BeladyFif(_))
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown policy {0:?} (expected lru, fifo, lfu or belady)")]
pub struct UnknownPolicy(pub String);

impl FromStr for PolicyKind {
    type Err = UnknownPolicy;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "lru" => Ok(PolicyKind::Lru),
            "fifo" => Ok(PolicyKind::Fifo(TieBreak::default())),
            "lfu" => Ok(PolicyKind::Lfu(TieBreak::default())),
            "belady" | "fif" => Ok(PolicyKind::BeladyFif(TieBreak::default())),
            _ => Err(UnknownPolicy(s.to_string())),
        }
    }
}

/// Bookkeeping over the prefix seen so far, indexed by page.
struct History {
    last_request: Vec<Option<usize>>,
    entry_time: Vec<usize>,
    count: Vec<u64>,
}

impl History {
    fn new(n: u32) -> Self {
        let n = n as usize + 1;
        Self { last_request: vec![None; n], entry_time: vec![0; n], count: vec![0; n] }
    }

    fn record(&mut self, t: usize, page: Page) {
        self.last_request[page as usize] = Some(t);
        self.count[page as usize] += 1;
    }
}

/// Request times of each page, for next-use queries.
struct Occurrences(Vec<Vec<usize>>);

impl Occurrences {
    fn new(r: &RequestSequence, n: u32) -> Self {
        let mut occ = vec![Vec::new(); n as usize + 1];
        for (idx, &p) in r.as_slice().iter().enumerate() {
            occ[p as usize].push(idx + 1);
        }
        Self(occ)
    }

    /// First request of `page` at or after `t`.
    fn next_at_or_after(&self, page: Page, t: usize) -> Option<usize> {
        let times = &self.0[page as usize];
        times.get(times.partition_point(|&s| s < t)).copied()
    }
}

fn pick<K: Ord>(candidates: &[Page], tie: TieBreak, key: impl Fn(Page) -> K) -> Page {
    let chosen = match tie {
        TieBreak::SmallestPage => candidates.iter().min_by_key(|&&p| (key(p), p)),
        TieBreak::LargestPage => candidates.iter().min_by_key(|&&p| (key(p), Reverse(p))),
    };
    *chosen.expect("candidate set is never empty")
}

/// Runs `kind` on `r` and returns its schedule together with the replay.
pub fn run_policy(
    kind: PolicyKind,
    config: &SimulationConfig,
    r: &RequestSequence,
) -> (EvictionSchedule, SimulationResult) {
    let n = config.universe().max(r.universe());
    let mut history = History::new(n);
    let future = (!kind.is_online()).then(|| Occurrences::new(r, n));
    let mut state = FsmState::new(config);
    let mut schedule = Vec::with_capacity(r.len());
    let mut candidates = Vec::with_capacity(config.cache_size() + 1);

    for (idx, &request) in r.as_slice().iter().enumerate() {
        let t = idx + 1;
        let eviction = state.arriving().map(|arriving| {
            candidates.clear();
            candidates.extend(state.cache());
            candidates.push(arriving);
            let victim = match kind {
                PolicyKind::Lru => pick(&candidates, TieBreak::SmallestPage, |p| history.last_request[p as usize]),
                PolicyKind::Fifo(tie) => pick(&candidates, tie, |p| {
                    if p == arriving {
                        t
                    } else {
                        history.entry_time[p as usize]
                    }
                }),
                PolicyKind::Lfu(tie) => pick(&candidates, tie, |p| history.count[p as usize]),
                PolicyKind::BeladyFif(tie) => {
                    let occ = future.as_ref().expect("offline policy has the future");
                    pick(&candidates, tie, |p| Reverse(occ.next_at_or_after(p, t).unwrap_or(usize::MAX)))
                }
            };
            if victim != arriving {
                history.entry_time[arriving as usize] = t;
            }
            victim
        });
        state
            .advance(request, eviction)
            .expect("policy schedules respect the arrival rule by construction");
        history.record(t, request);
        schedule.push(eviction);
    }

    let schedule = EvictionSchedule(schedule);
    let result = evaluate(config, r, &schedule).expect("policy inputs are well formed");
    assert!(result.is_valid(), "{kind} produced an invalid schedule");
    (schedule, result)
}

/// True iff no page is evicted after being requested earlier in the same phase.
pub fn is_marking(k: usize, r: &RequestSequence, e: &EvictionSchedule) -> bool {
    let reqs = r.as_slice();
    let evs = e.as_slice();
    partition_phases(k, r).phases().iter().all(|phase| {
        let mut requested: Vec<Page> = Vec::with_capacity(k);
        phase.times().all(|t| {
            let ok = evs.get(t - 1).copied().flatten().is_none_or(|victim| !requested.contains(&victim));
            if !requested.contains(&reqs[t - 1]) {
                requested.push(reqs[t - 1]);
            }
            ok
        })
    })
}
