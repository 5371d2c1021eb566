//! Delay-2 pipeline: run compression, weighted caching, schedule rebuild.

use super::weighted::{compress_runs, weighted_caching_optimal, CacheDecision};
use super::{OptimalError, OptimalSolution};
use crate::fsm::{FsmState, SimulationConfig};
use crate::instance::{EvictionSchedule, Page, RequestSequence};

/// Solves a `Z = 2` instance through weighted caching.
///
/// `cost` is the weighted optimum of the compressed instance. The schedule
/// follows the weighted plan: at each arrival it keeps every page whose next
/// request is planned as a hit or continues a run, and otherwise evicts the
/// candidate requested farthest in the future.
pub fn solve_z2(config: &SimulationConfig, r: &RequestSequence) -> Result<OptimalSolution, OptimalError> {
    if config.delay() != 2 {
        return Err(OptimalError::UnsupportedDelay { expected: 2, got: config.delay() });
    }
    let reqs = r.as_slice();
    for (index, &page) in reqs.iter().enumerate() {
        if page == 0 || page > config.universe() {
            return Err(crate::instance::InstanceError::PageOutOfRange { index, page, n: config.universe() }.into());
        }
    }
    let wreqs = compress_runs(r);
    let plan = weighted_caching_optimal(config.cache_size(), config.initial_cache(), &wreqs)?;

    // Run index of every step, and whether the step opens its run.
    let mut run_of = Vec::with_capacity(reqs.len());
    let mut opens = Vec::with_capacity(reqs.len());
    for (i, &p) in reqs.iter().enumerate() {
        let fresh = i == 0 || reqs[i - 1] != p;
        let run = if fresh { run_of.last().map_or(0, |&j: &usize| j + 1) } else { run_of[i - 1] };
        run_of.push(run);
        opens.push(fresh);
    }
    let next_request = |page: Page, from: usize| (from..reqs.len()).find(|&i| reqs[i] == page);

    let mut state = FsmState::new(config);
    let mut schedule = Vec::with_capacity(reqs.len());
    for (i, &request) in reqs.iter().enumerate() {
        let eviction = state.arriving().map(|arriving| {
            let mut candidates: Vec<Page> = state.cache().collect();
            candidates.push(arriving);
            let keep = |q: Page| match next_request(q, i) {
                Some(u) => !opens[u] || plan.decisions[run_of[u]] == CacheDecision::Hit,
                None => false,
            };
            let farthest = |pool: &mut dyn Iterator<Item = Page>| {
                pool.max_by_key(|&q| (next_request(q, i).unwrap_or(usize::MAX), std::cmp::Reverse(q)))
            };
            farthest(&mut candidates.iter().copied().filter(|&q| !keep(q)))
                .or_else(|| farthest(&mut candidates.iter().copied()))
                .expect("candidate set is never empty")
        });
        state.advance(request, eviction).expect("rebuilt schedule respects the arrival rule");
        schedule.push(eviction);
    }

    Ok(OptimalSolution { cost: plan.cost, schedule: EvictionSchedule(schedule) })
}
