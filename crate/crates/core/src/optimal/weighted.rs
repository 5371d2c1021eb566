//! Weighted caching and its min-cost-flow solution.
//!
//! Request `t` for page `p` costs `w_t` unless `p` is cached. After a miss the
//! page may be brought in, evicting one cached page, or bypassed. The cache
//! always holds `k` pages.
//!
//! Flow network: `k` units, one per cache slot. Each request is a node pair
//! `in_t -> out_t` whose visit edge has cost `-w_t`. A slot holding `p` moves
//! for free to the next request of `p`; reaching any request `s` from a
//! different page goes through the hub chain `H_1 -> ... -> H_{T+1}` and costs
//! `w_s`, which cancels the visit gain. The optimum is `Σ w_t` plus the flow
//! cost. The hub chain replaces the quadratic set of cross-page edges of the
//! layered graph without changing any path cost.

use std::collections::BTreeSet;

use thiserror::Error;

use super::flow::MinCostFlow;
use crate::instance::{Page, RequestSequence};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct WeightedRequest {
    pub page: Page,
    pub weight: u64,
}

impl WeightedRequest {
    pub fn new(page: Page, weight: u64) -> Self {
        Self { page, weight }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WeightedError {
    #[error("initial cache has {got} distinct pages, expected {expected}")]
    InitialCacheSize { expected: usize, got: usize },
    #[error("request {index} has weight 0")]
    ZeroWeight { index: usize },
    #[error("request {index} is for page 0")]
    ZeroPage { index: usize },
    #[error("{got} decisions for {expected} requests")]
    LengthMismatch { expected: usize, got: usize },
    #[error("decision {index}: {reason}")]
    BadDecision { index: usize, reason: &'static str },
}

/// What happens at one weighted request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CacheDecision {
    Hit,
    /// Miss; the page is not cached.
    Bypass,
    /// Miss; the page replaces `evict`.
    Fetch { evict: Page },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightedSolution {
    pub cost: u64,
    pub decisions: Vec<CacheDecision>,
}

/// One weighted request per maximal run of equal pages: weight 2 for a run
/// of length one, 3 for longer runs.
pub fn compress_runs(r: &RequestSequence) -> Vec<WeightedRequest> {
    let mut out: Vec<WeightedRequest> = Vec::new();
    let mut prev: Option<Page> = None;
    for &p in r.as_slice() {
        if prev == Some(p) {
            out.last_mut().expect("run in progress").weight = 3;
        } else {
            out.push(WeightedRequest::new(p, 2));
        }
        prev = Some(p);
    }
    out
}

fn check_inputs(k: usize, initial: &[Page], wreqs: &[WeightedRequest]) -> Result<BTreeSet<Page>, WeightedError> {
    let cache: BTreeSet<Page> = initial.iter().copied().collect();
    if cache.len() != k || cache.contains(&0) {
        return Err(WeightedError::InitialCacheSize { expected: k, got: cache.len() });
    }
    for (index, w) in wreqs.iter().enumerate() {
        if w.weight == 0 {
            return Err(WeightedError::ZeroWeight { index });
        }
        if w.page == 0 {
            return Err(WeightedError::ZeroPage { index });
        }
    }
    Ok(cache)
}

/// Replays `decisions` and returns the total weight of missed requests.
pub fn evaluate_weighted(
    k: usize,
    initial: &[Page],
    wreqs: &[WeightedRequest],
    decisions: &[CacheDecision],
) -> Result<u64, WeightedError> {
    let mut cache = check_inputs(k, initial, wreqs)?;
    if decisions.len() != wreqs.len() {
        return Err(WeightedError::LengthMismatch { expected: wreqs.len(), got: decisions.len() });
    }
    let mut cost = 0;
    for (index, (w, d)) in wreqs.iter().zip(decisions).enumerate() {
        let cached = cache.contains(&w.page);
        match *d {
            CacheDecision::Hit if cached => {}
            CacheDecision::Hit => return Err(WeightedError::BadDecision { index, reason: "hit on an uncached page" }),
            _ if cached => return Err(WeightedError::BadDecision { index, reason: "miss on a cached page" }),
            CacheDecision::Bypass => cost += w.weight,
            CacheDecision::Fetch { evict } => {
                if !cache.remove(&evict) {
                    return Err(WeightedError::BadDecision { index, reason: "evicted page is not cached" });
                }
                cache.insert(w.page);
                cost += w.weight;
            }
        }
    }
    Ok(cost)
}

/// The layered digraph on `[T] × [n]`: `(t, a) -> (s, b)` exists only for
/// `t < s`, and costs 0 when `a = b` and `w_s` otherwise.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayeredMetricGraph {
    weights: Vec<u64>,
    n: u32,
}

impl LayeredMetricGraph {
    pub fn new(wreqs: &[WeightedRequest], n: u32) -> Self {
        Self { weights: wreqs.iter().map(|w| w.weight).collect(), n }
    }

    pub fn layers(&self) -> usize {
        self.weights.len()
    }

    pub fn universe(&self) -> u32 {
        self.n
    }

    /// Edge weight between vertices `(t, a)` and `(s, b)`, 1-based layers.
    pub fn edge_weight(&self, from: (usize, Page), to: (usize, Page)) -> Option<u64> {
        let ((t, a), (s, b)) = (from, to);
        if t >= s || s > self.weights.len() {
            None
        } else if a == b {
            Some(0)
        } else {
            Some(self.weights[s - 1])
        }
    }
}

/// Node and edge bookkeeping for the flow network.
struct Network {
    graph: MinCostFlow,
    source: usize,
    sink: usize,
    visit: Vec<usize>,
    /// Edge entering `in_t` from the previous request of the same page, or
    /// from the initial slot of that page.
    chain_in: Vec<Option<usize>>,
}

fn build_network(initial: &BTreeSet<Page>, wreqs: &[WeightedRequest], k: usize) -> Network {
    let len = wreqs.len();
    // source, k initial slots, then per step: H_t, in_t, out_t; finally H_{T+1}.
    let source = 0;
    let slot = |i: usize| 1 + i;
    let hub = |t: usize| 1 + k + 3 * (t - 1);
    let node_in = |t: usize| hub(t) + 1;
    let node_out = |t: usize| hub(t) + 2;
    let sink = hub(len + 1);
    let cap = k as i64;
    let mut graph = MinCostFlow::new(sink + 1);

    let mut next_of: Vec<Option<usize>> = vec![None; len + 1];
    let mut first_of = std::collections::HashMap::new();
    for t in (1..=len).rev() {
        let p = wreqs[t - 1].page;
        if let Some(&s) = first_of.get(&p) {
            next_of[t] = Some(s);
        }
        first_of.insert(p, t);
    }

    let mut chain_in = vec![None; len + 1];
    for (i, &p) in initial.iter().enumerate() {
        graph.add_edge(source, slot(i), 1, 0);
        graph.add_edge(slot(i), hub(1), 1, 0);
        if let Some(&s) = first_of.get(&p) {
            chain_in[s] = Some(graph.add_edge(slot(i), node_in(s), 1, 0));
        }
    }
    let mut visit = vec![usize::MAX; len + 1];
    for t in 1..=len {
        let w = wreqs[t - 1].weight as i64;
        graph.add_edge(hub(t), hub(t + 1), cap, 0);
        graph.add_edge(hub(t), node_in(t), cap, w);
        visit[t] = graph.add_edge(node_in(t), node_out(t), 1, -w);
        graph.add_edge(node_in(t), node_out(t), cap, 0);
        graph.add_edge(node_out(t), hub(t + 1), cap, 0);
        if let Some(s) = next_of[t] {
            chain_in[s] = Some(graph.add_edge(node_out(t), node_in(s), cap, 0));
        }
    }
    Network { graph, source, sink, visit, chain_in }
}

/// Exact weighted caching optimum with decisions that replay to it.
pub fn weighted_caching_optimal(
    k: usize,
    initial: &[Page],
    wreqs: &[WeightedRequest],
) -> Result<WeightedSolution, WeightedError> {
    let cache = check_inputs(k, initial, wreqs)?;
    let len = wreqs.len();
    let mut net = build_network(&cache, wreqs, k);
    let result = net.graph.run(net.source, net.sink, k as i64);
    assert_eq!(result.flow, k as i64, "every slot reaches the end of the horizon");
    let total: u64 = wreqs.iter().map(|w| w.weight).sum();
    let cost = u64::try_from(total as i64 + result.cost).expect("flow gain never exceeds total weight");

    let visited: Vec<bool> = (0..=len).map(|t| t > 0 && net.graph.flow(net.visit[t]) > 0).collect();
    let chain_hit: Vec<bool> =
        (0..=len).map(|t| visited.get(t) == Some(&true) && net.chain_in[t].is_some_and(|e| net.graph.flow(e) > 0)).collect();

    // A chain hit at s keeps its page pinned from the previous request of that
    // page (or from the start) up to s.
    let mut prev_of: Vec<usize> = vec![0; len + 1];
    let mut last = std::collections::HashMap::new();
    for t in 1..=len {
        prev_of[t] = last.insert(wreqs[t - 1].page, t).unwrap_or(0);
    }
    let pins: Vec<(usize, usize, Page)> =
        (1..=len).filter(|&s| chain_hit[s]).map(|s| (prev_of[s], s, wreqs[s - 1].page)).collect();

    let mut real = cache;
    let mut decisions = Vec::with_capacity(len);
    for t in 1..=len {
        let p = wreqs[t - 1].page;
        let decision = if real.contains(&p) {
            CacheDecision::Hit
        } else if visited[t] && !chain_hit[t] {
            let pinned: BTreeSet<Page> =
                pins.iter().filter(|&&(from, to, _)| from < t && t <= to).map(|&(_, _, q)| q).collect();
            let evict = *real
                .iter()
                .find(|q| !pinned.contains(q))
                .expect("some cached page is free when a slot reloads");
            real.remove(&evict);
            real.insert(p);
            CacheDecision::Fetch { evict }
        } else {
            assert!(!chain_hit[t], "chain hit at t = {t} on an uncached page");
            CacheDecision::Bypass
        };
        decisions.push(decision);
    }

    let replay = evaluate_weighted(k, initial, wreqs, &decisions)?;
    assert_eq!(replay, cost, "reconstructed decisions must match the flow optimum");
    Ok(WeightedSolution { cost, decisions })
}
