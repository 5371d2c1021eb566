//! Exact optimum by forward search over machine states.
//!
//! A state after step `t` is the cache (bitmask over pages) plus a `Z`-bit
//! mask whose bit `i - 1` records `σ(t + 1 - i) = Miss`; the requests behind
//! those bits are read from `r`. States are merged per layer and only the
//! cheapest predecessor is kept, so the search is exact.

use std::collections::HashMap;

use super::{OptimalError, OptimalSolution, DEFAULT_BUDGET};
use crate::fsm::{evaluate, SimulationConfig};
use crate::instance::{EvictionSchedule, Page, RequestSequence};

/// `C(n, k) · 2^Z · T`, saturating.
pub fn state_estimate(config: &SimulationConfig, len: usize) -> u128 {
    let n = config.universe() as u128;
    let k = config.cache_size() as u128;
    let mut binom: u128 = 1;
    for i in 0..k.min(n - k) {
        binom = binom.saturating_mul(n - i) / (i + 1);
    }
    let window = if config.delay() >= 127 { u128::MAX } else { 1u128 << config.delay() };
    binom.saturating_mul(window).saturating_mul(len as u128)
}

fn budget_from_env() -> u64 {
    std::env::var("DHITS_BUDGET").ok().and_then(|v| v.trim().parse().ok()).unwrap_or(DEFAULT_BUDGET)
}

/// Exact optimum with the default budget (overridden by `DHITS_BUDGET`).
pub fn optimal_exact(config: &SimulationConfig, r: &RequestSequence) -> Result<OptimalSolution, OptimalError> {
    optimal_exact_with_budget(config, r, budget_from_env())
}

#[derive(Clone, Copy)]
struct Node {
    cache: u64,
    misses: u64,
    cost: u64,
    parent: u32,
    evict: Option<Page>,
}

pub fn optimal_exact_with_budget(
    config: &SimulationConfig,
    r: &RequestSequence,
    budget: u64,
) -> Result<OptimalSolution, OptimalError> {
    if config.universe() > 64 {
        return Err(OptimalError::UniverseTooLarge(config.universe()));
    }
    let estimate = state_estimate(config, r.len());
    if estimate > u128::from(budget) {
        return Err(OptimalError::BudgetExceeded { estimate, budget });
    }
    // The estimate bounds Z well below 64 for any budget that fits in u64.
    let z = config.delay() as usize;
    let reqs = r.as_slice();
    for (index, &page) in reqs.iter().enumerate() {
        if page == 0 || page > config.universe() {
            return Err(crate::instance::InstanceError::PageOutOfRange { index, page, n: config.universe() }.into());
        }
    }
    let bit = |p: Page| 1u64 << (p - 1);
    let window_mask = if z >= 64 { u64::MAX } else { (1u64 << z) - 1 };
    let initial = config.initial_cache().iter().fold(0u64, |m, &p| m | bit(p));

    let mut layers: Vec<Vec<Node>> = Vec::with_capacity(reqs.len() + 1);
    layers.push(vec![Node { cache: initial, misses: 0, cost: 0, parent: u32::MAX, evict: None }]);
    let mut index: HashMap<(u64, u64), u32> = HashMap::new();

    for t in 1..=reqs.len() {
        let request = reqs[t - 1];
        let prev = layers.last().expect("at least the initial layer");
        let mut next: Vec<Node> = Vec::new();
        index.clear();
        let mut relax = |cache: u64, misses: u64, cost: u64, parent: u32, evict: Option<Page>| {
            // Status of r_t given the cache after the eviction step.
            let (latency, miss) = if cache & bit(request) != 0 {
                (0, false)
            } else if let Some(i) = (1..z).find(|&i| misses >> (i - 1) & 1 == 1 && reqs[t - i - 1] == request) {
                ((z - i) as u64, false)
            } else {
                (z as u64, true)
            };
            let key_misses = ((misses << 1) | u64::from(miss)) & window_mask;
            let cost = cost + latency;
            match index.get(&(cache, key_misses)) {
                Some(&at) => {
                    let node = &mut next[at as usize];
                    if cost < node.cost {
                        *node = Node { cache, misses: key_misses, cost, parent, evict };
                    }
                }
                None => {
                    index.insert((cache, key_misses), next.len() as u32);
                    next.push(Node { cache, misses: key_misses, cost, parent, evict });
                }
            }
        };

        for (pi, node) in prev.iter().enumerate() {
            let pi = pi as u32;
            if t > z && node.misses >> (z - 1) & 1 == 1 {
                let arriving = reqs[t - z - 1];
                debug_assert_eq!(node.cache & bit(arriving), 0);
                let pool = node.cache | bit(arriving);
                let mut rest = pool;
                while rest != 0 {
                    let victim_bit = rest & rest.wrapping_neg();
                    rest ^= victim_bit;
                    let victim = victim_bit.trailing_zeros() + 1;
                    relax(pool & !victim_bit, node.misses, node.cost, pi, Some(victim));
                }
            } else {
                relax(node.cache, node.misses, node.cost, pi, None);
            }
        }
        layers.push(next);
    }

    let last = layers.last().expect("at least the initial layer");
    let (mut at, best) = last
        .iter()
        .enumerate()
        .min_by_key(|(i, n)| (n.cost, *i))
        .map(|(i, n)| (i, n.cost))
        .expect("a valid schedule always exists");
    let mut schedule = vec![None; reqs.len()];
    for t in (1..=reqs.len()).rev() {
        let node = layers[t][at];
        schedule[t - 1] = node.evict;
        at = node.parent as usize;
    }
    let schedule = EvictionSchedule(schedule);
    let replay = evaluate(config, r, &schedule)?;
    assert_eq!(replay.cost(), Some(best), "optimal schedule must replay to its cost");
    Ok(OptimalSolution { cost: best, schedule })
}
