//! Independent oracles and seeded instance generators shared by the
//! integration tests. Nothing here calls into the code under test except to
//! build inputs.

#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap};

use dhits::optimal::WeightedRequest;
use dhits::{EvictionSchedule, Page, RequestSequence, SimulationConfig, Status};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A configured instance.
#[derive(Debug, Clone)]
pub struct Instance {
    pub config: SimulationConfig,
    pub r: RequestSequence,
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random instance with `n ≤ max_n`, `k ≤ max_k`, `Z` in `zs`, `T ≤ max_t`,
/// and a random initial cache.
pub fn random_instance(
    rng: &mut ChaCha8Rng,
    max_n: u32,
    max_k: usize,
    zs: std::ops::RangeInclusive<u32>,
    max_t: usize,
) -> Instance {
    let k = rng.gen_range(1..=max_k);
    let n = rng.gen_range((k as u32).max(2)..=max_n.max(k as u32 + 1).max(2));
    let z = rng.gen_range(zs);
    let len = rng.gen_range(0..=max_t);
    let mut pages: Vec<Page> = (1..=n).collect();
    pages.shuffle(rng);
    let config = SimulationConfig::new(z, k, n)
        .unwrap()
        .with_initial_cache(pages[..k].iter().copied())
        .unwrap();
    let r = RequestSequence::new(n, (0..len).map(|_| rng.gen_range(1..=n)).collect()).unwrap();
    Instance { config, r }
}

/// The shared corpus: `n ≤ 8`, `k ≤ 4`, `Z ≤ 5`, `T ≤ 40`.
pub fn corpus(seed: u64, count: usize) -> Vec<Instance> {
    let mut rng = rng(seed);
    (0..count).map(|_| random_instance(&mut rng, 8, 4, 1..=5, 40)).collect()
}

/// Outcome of the queue-based replay.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Replay {
    Valid { cost: u64, statuses: Vec<Status>, latencies: Vec<u64>, caches: Vec<Vec<Page>> },
    Invalid { time: usize, eviction_without_arrival: bool },
}

/// Replays a schedule by tracking the set of in-flight fetches explicitly:
/// a miss at `t` schedules an arrival at `t + Z`; a request for an in-flight
/// page waits for its arrival.
pub fn queue_replay(config: &SimulationConfig, r: &[Page], e: &[Option<Page>]) -> Replay {
    let z = config.delay() as usize;
    let mut cache: BTreeSet<Page> = config.initial_cache().iter().copied().collect();
    let mut in_flight: Vec<(usize, Page)> = Vec::new();
    let mut out = (0, Vec::new(), Vec::new(), Vec::new());
    for t in 1..=r.len() {
        let arriving = in_flight.iter().position(|&(at, _)| at == t).map(|i| in_flight.remove(i).1);
        match (arriving, e[t - 1]) {
            (None, None) => {}
            (None, Some(_)) => return Replay::Invalid { time: t, eviction_without_arrival: true },
            (Some(a), Some(v)) if v == a || cache.contains(&v) => {
                cache.insert(a);
                cache.remove(&v);
            }
            (Some(_), _) => return Replay::Invalid { time: t, eviction_without_arrival: false },
        }
        let p = r[t - 1];
        let (status, latency) = if cache.contains(&p) {
            (Status::Hit, 0)
        } else if let Some(&(at, _)) = in_flight.iter().find(|&&(_, q)| q == p) {
            (Status::DelayedHit, (at - t) as u64)
        } else {
            in_flight.push((t + z, p));
            (Status::Miss, z as u64)
        };
        out.0 += latency;
        out.1.push(status);
        out.2.push(latency);
        out.3.push(cache.iter().copied().collect());
    }
    Replay::Valid { cost: out.0, statuses: out.1, latencies: out.2, caches: out.3 }
}

/// Minimum cost over every valid schedule, by depth-first search that
/// branches over all `k + 1` candidates at each arrival.
pub fn exhaustive_optimum(config: &SimulationConfig, r: &[Page]) -> u64 {
    fn go(
        t: usize,
        z: usize,
        r: &[Page],
        cache: &mut BTreeSet<Page>,
        in_flight: &mut Vec<(usize, Page)>,
        cost: u64,
        best: &mut u64,
    ) {
        if cost >= *best {
            return;
        }
        if t > r.len() {
            *best = cost;
            return;
        }
        let serve = |cache: &BTreeSet<Page>, in_flight: &mut Vec<(usize, Page)>| -> u64 {
            let p = r[t - 1];
            if cache.contains(&p) {
                0
            } else if let Some(&(at, _)) = in_flight.iter().find(|&&(_, q)| q == p) {
                (at - t) as u64
            } else {
                in_flight.push((t + z, p));
                z as u64
            }
        };
        match in_flight.iter().position(|&(at, _)| at == t) {
            Some(i) => {
                let (_, a) = in_flight.remove(i);
                let mut victims: Vec<Page> = cache.iter().copied().collect();
                victims.push(a);
                for v in victims {
                    let mut c = cache.clone();
                    c.insert(a);
                    c.remove(&v);
                    let mut f = in_flight.clone();
                    let d = serve(&c, &mut f);
                    go(t + 1, z, r, &mut c, &mut f, cost + d, best);
                }
                in_flight.insert(i, (t, a));
            }
            None => {
                let mut f = in_flight.clone();
                let d = serve(cache, &mut f);
                go(t + 1, z, r, cache, &mut f, cost + d, best);
            }
        }
    }
    let mut cache: BTreeSet<Page> = config.initial_cache().iter().copied().collect();
    let mut best = u64::MAX;
    go(1, config.delay() as usize, r, &mut cache, &mut Vec::new(), 0, &mut best);
    best
}

/// Every schedule in `([n] ∪ {⊥})^T`, for tiny instances.
pub fn all_schedules(n: u32, len: usize) -> impl Iterator<Item = EvictionSchedule> {
    let base = n as u64 + 1;
    let total = base.pow(len as u32);
    (0..total).map(move |mut code| {
        EvictionSchedule(
            (0..len)
                .map(|_| {
                    let d = (code % base) as Page;
                    code /= base;
                    (d > 0).then_some(d)
                })
                .collect(),
        )
    })
}

/// Classical offline paging with bypass: on a miss, keep whichever of the
/// cache and the requested page is needed farthest in the future.
pub fn classical_belady_misses(initial: &[Page], r: &[Page]) -> u64 {
    let mut cache: BTreeSet<Page> = initial.iter().copied().collect();
    let next_use = |p: Page, after: usize| r.iter().skip(after).position(|&q| q == p).map_or(usize::MAX, |d| after + d);
    let mut misses = 0;
    for (i, &p) in r.iter().enumerate() {
        if cache.contains(&p) {
            continue;
        }
        misses += 1;
        cache.insert(p);
        let victim = *cache.iter().max_by_key(|&&q| (next_use(q, i + 1), std::cmp::Reverse(q))).unwrap();
        cache.remove(&victim);
    }
    misses
}

/// Weighted caching optimum by dynamic programming over cache subsets.
pub fn weighted_subset_dp(initial: &[Page], wreqs: &[WeightedRequest]) -> u64 {
    let start: Vec<Page> = {
        let mut v = initial.to_vec();
        v.sort_unstable();
        v
    };
    let mut layer: HashMap<Vec<Page>, u64> = HashMap::from([(start, 0)]);
    for w in wreqs {
        let mut next: HashMap<Vec<Page>, u64> = HashMap::new();
        let mut offer = |cache: Vec<Page>, cost: u64| {
            let slot = next.entry(cache).or_insert(u64::MAX);
            *slot = (*slot).min(cost);
        };
        for (cache, &cost) in &layer {
            if cache.contains(&w.page) {
                offer(cache.clone(), cost);
                continue;
            }
            let cost = cost + w.weight;
            offer(cache.clone(), cost);
            for i in 0..cache.len() {
                let mut c = cache.clone();
                c[i] = w.page;
                c.sort_unstable();
                offer(c, cost);
            }
        }
        layer = next;
    }
    layer.values().copied().min().unwrap_or(0)
}

pub fn random_weighted(rng: &mut ChaCha8Rng, max_n: u32, max_k: usize, max_t: usize) -> (usize, Vec<Page>, Vec<WeightedRequest>) {
    let k = rng.gen_range(1..=max_k);
    let n = rng.gen_range((k as u32 + 1).max(2)..=max_n.max(k as u32 + 1));
    let mut pages: Vec<Page> = (1..=n).collect();
    pages.shuffle(rng);
    let initial = pages[..k].to_vec();
    let len = rng.gen_range(0..=max_t);
    let wreqs = (0..len).map(|_| WeightedRequest::new(rng.gen_range(1..=n), rng.gen_range(1..=9))).collect();
    (k, initial, wreqs)
}

/// Least-squares R² of `ys` against `xs`.
pub fn r_squared(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if syy == 0.0 {
        return 1.0;
    }
    sxy * sxy / (sxx * syy)
}

/// Proptest strategy over small instances: `Z ≤ max_z`, `k ≤ 3`, `n ≤ k + 3`,
/// `T ≤ max_t`, with a shuffled initial cache.
pub fn instance_strategy(max_z: u32, max_t: usize) -> impl proptest::strategy::Strategy<Value = Instance> {
    use proptest::prelude::*;
    (1..=max_z, 1..=3usize, 0..=3u32, any::<u64>(), proptest::collection::vec(any::<u32>(), 0..=max_t)).prop_map(
        |(z, k, extra, shuffle, raw)| {
            let n = k as u32 + extra.max(1);
            let mut pages: Vec<Page> = (1..=n).collect();
            pages.shuffle(&mut rng(shuffle));
            let config = SimulationConfig::new(z, k, n)
                .unwrap()
                .with_initial_cache(pages[..k].iter().copied())
                .unwrap();
            let r = RequestSequence::new(n, raw.iter().map(|x| x % n + 1).collect()).unwrap();
            Instance { config, r }
        },
    )
}

/// A schedule that is valid by construction: random choices at arrivals only.
pub fn random_valid_schedule(config: &SimulationConfig, r: &[Page], seed: u64) -> EvictionSchedule {
    let mut rng = rng(seed);
    let z = config.delay() as usize;
    let mut cache: BTreeSet<Page> = config.initial_cache().iter().copied().collect();
    let mut in_flight: Vec<(usize, Page)> = Vec::new();
    let mut e = Vec::with_capacity(r.len());
    for t in 1..=r.len() {
        let ev = in_flight.iter().position(|&(at, _)| at == t).map(|i| {
            let (_, a) = in_flight.remove(i);
            let mut pool: Vec<Page> = cache.iter().copied().collect();
            pool.push(a);
            let v = *pool.choose(&mut rng).unwrap();
            cache.insert(a);
            cache.remove(&v);
            v
        });
        e.push(ev);
        let p = r[t - 1];
        if !cache.contains(&p) && !in_flight.iter().any(|&(_, q)| q == p) {
            in_flight.push((t + z, p));
        }
    }
    EvictionSchedule(e)
}

/// A schedule with arbitrary entries, mostly `⊥`, usually invalid.
pub fn random_any_schedule(n: u32, len: usize, seed: u64) -> EvictionSchedule {
    let mut rng = rng(seed);
    EvictionSchedule((0..len).map(|_| rng.gen_bool(0.3).then(|| rng.gen_range(1..=n))).collect())
}
