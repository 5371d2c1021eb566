mod common;

use std::collections::BTreeSet;

use common::*;
use dhits::phases::{check_lemma_bounds, partition_phases, partition_superphases, superphase_latencies, Ratio};
use dhits::policies::{run_policy, PolicyKind};
use dhits::{evaluate, optimal_exact, EvictionSchedule, RequestSequence, SimulationConfig};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn phase_structure(inst in instance_strategy(5, 40)) {
        let k = inst.config.cache_size();
        let r = inst.r.as_slice();
        let p = partition_phases(k, &inst.r);
        let phases = p.phases();
        prop_assert_eq!(p.lengths().iter().sum::<usize>(), r.len());
        for (i, ph) in phases.iter().enumerate() {
            let pages: BTreeSet<_> = r[ph.start - 1..ph.end].iter().copied().collect();
            prop_assert_eq!(&pages.iter().copied().collect::<Vec<_>>(), &ph.pages);
            if i + 1 < phases.len() {
                prop_assert_eq!(pages.len(), k);
                prop_assert!(ph.len() >= k);
                prop_assert!(!pages.contains(&r[ph.end]));
            } else {
                prop_assert!(pages.len() <= k);
            }
            if i > 0 {
                prop_assert_eq!(phases[i - 1].end + 1, ph.start);
                prop_assert!(!phases[i - 1].pages.contains(&r[ph.start - 1]));
                prop_assert!(ph.fresh.contains(&r[ph.start - 1]));
            }
        }
    }

    #[test]
    fn phases_ignore_delay(inst in instance_strategy(5, 40), z in 1..=9u32) {
        let other = inst.config.with_delay(z).unwrap();
        let lengths = |cfg: &dhits::SimulationConfig| {
            let (_, run) = run_policy(PolicyKind::Lru, cfg, &inst.r);
            let audit = check_lemma_bounds(cfg, &inst.r, &run, &run).unwrap();
            audit.phases.iter().map(|row| row.len).collect::<Vec<_>>()
        };
        prop_assert_eq!(lengths(&inst.config), lengths(&other));
        prop_assert_eq!(lengths(&other), partition_phases(inst.config.cache_size(), &inst.r).lengths());
    }

    #[test]
    fn superphase_rule(lengths in proptest::collection::vec(1..=12usize, 0..20), z in 1..=15u32) {
        let q = partition_superphases(z, &lengths);
        let mut next = 1;
        for (j, range) in q.superphases().iter().enumerate() {
            prop_assert_eq!(*range.start(), next);
            next = range.end() + 1;
            let members: Vec<usize> = lengths[range.start() - 1..*range.end()].to_vec();
            let last = j + 1 == q.len();
            // Accumulation stops at the first prefix reaching Z.
            let mut acc = 0;
            let mut reached = None;
            for (i, &l) in members.iter().enumerate() {
                acc += l;
                if acc >= z as usize {
                    reached = Some(i);
                    break;
                }
            }
            match reached {
                Some(i) => {
                    let tail = members.len() - 1 - i;
                    prop_assert!(tail <= 2);
                    if !last {
                        prop_assert_eq!(tail, 2);
                    }
                }
                None => prop_assert!(last),
            }
        }
        prop_assert_eq!(next, lengths.len() + 1);
    }

    #[test]
    fn latency_reports_reconcile(inst in instance_strategy(5, 40)) {
        let (_, res) = run_policy(PolicyKind::Lru, &inst.config, &inst.r);
        let p = partition_phases(inst.config.cache_size(), &inst.r);
        let q = partition_superphases(inst.config.delay(), &p.lengths());
        let rep = superphase_latencies(&p, &q, &res).unwrap();
        prop_assert_eq!(rep.per_superphase.iter().sum::<u64>(), res.cost().unwrap());
        prop_assert_eq!(rep.per_phase.iter().sum::<u64>(), res.cost().unwrap());
    }

    #[test]
    fn lru_bounds_hold(inst in instance_strategy(4, 24)) {
        let (_, lru) = run_policy(PolicyKind::Lru, &inst.config, &inst.r);
        let opt = optimal_exact(&inst.config, &inst.r).unwrap();
        let opt_run = evaluate(&inst.config, &inst.r, &opt.schedule).unwrap();
        let audit = check_lemma_bounds(&inst.config, &inst.r, &lru, &opt_run).unwrap();
        prop_assert!(audit.is_clean(), "{:?}", audit.violations);
    }
}

#[test]
fn alternating_pair_audit() {
    let cfg = SimulationConfig::new(2, 1, 2).unwrap();
    let r = RequestSequence::new(2, vec![2, 1, 2, 1, 2, 1]).unwrap();
    let (_, lru) = run_policy(PolicyKind::Lru, &cfg, &r);
    let opt = optimal_exact(&cfg, &r).unwrap();
    let opt_run = evaluate(&cfg, &r, &opt.schedule).unwrap();
    let audit = check_lemma_bounds(&cfg, &r, &lru, &opt_run).unwrap();
    assert_eq!((audit.lru_total, audit.opt_total), (6, 4));
    assert_eq!(audit.ratio, Ratio::Finite(1.5));
    assert_eq!(audit.ratio_bound, 16);
    assert_eq!(audit.superphase_count(), 2);
    assert!(audit.is_clean());
}

#[test]
fn all_hit_audit_is_zero() {
    let cfg = SimulationConfig::new(3, 2, 4).unwrap();
    let r = RequestSequence::new(4, vec![1, 2, 1, 1, 2]).unwrap();
    let (_, lru) = run_policy(PolicyKind::Lru, &cfg, &r);
    let audit = check_lemma_bounds(&cfg, &r, &lru, &lru).unwrap();
    assert_eq!(audit.ratio, Ratio::BothZero);
    assert!(audit.phases.iter().all(|p| p.lru_latency == 0));
    assert!(audit.is_clean());
}

#[test]
fn walkthrough_is_one_superphase() {
    let cfg = SimulationConfig::new(10, 3, 7).unwrap().with_initial_cache([1, 2, 4]).unwrap();
    let r = RequestSequence::new(7, vec![3, 1, 3, 2, 4, 1, 5, 2]).unwrap();
    let res = evaluate(&cfg, &r, &EvictionSchedule::none(8)).unwrap();
    let p = partition_phases(3, &r);
    let q = partition_superphases(10, &p.lengths());
    let rep = superphase_latencies(&p, &q, &res).unwrap();
    assert_eq!(rep.per_superphase, vec![28]);
}

#[test]
fn mismatched_runs_are_rejected() {
    let r = RequestSequence::new(2, vec![1, 2]).unwrap();
    let cfg = SimulationConfig::new(1, 1, 2).unwrap();
    let short = evaluate(&cfg, &r.prefix(1), &EvictionSchedule::none(1)).unwrap();
    let p = partition_phases(1, &r);
    let q = partition_superphases(1, &p.lengths());
    assert!(superphase_latencies(&p, &q, &short).is_err());
}
