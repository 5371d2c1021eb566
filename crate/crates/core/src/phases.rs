//! Phase and superphase decompositions and the bound audit for LRU.
//!
//! Phases depend only on `k` and `r`: a phase is extended while its set of
//! requested pages stays within `k`. Superphases depend only on `Z` and the
//! phase lengths: phases are accumulated until their total length reaches
//! `Z`, then two more phases are appended.

use std::collections::BTreeSet;
use std::ops::RangeInclusive;

use thiserror::Error;

use crate::fsm::{SimulationConfig, SimulationResult, Status};
use crate::instance::{Page, RequestSequence};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PhaseError {
    #[error("run is invalid and has no latencies")]
    InvalidRun,
    #[error("run covers {got} steps but the partition covers {expected}")]
    LengthMismatch { expected: usize, got: usize },
}

/// One phase `P^i`: steps `start..=end` (model time).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Phase {
    pub start: usize,
    pub end: usize,
    /// Distinct pages requested in the phase, sorted.
    pub pages: Vec<Page>,
    /// Pages requested here but not in the previous phase; for the first
    /// phase, every page it requests.
    pub fresh: Vec<Page>,
}

impl Phase {
    pub fn len(&self) -> usize {
        self.end + 1 - self.start
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn times(&self) -> RangeInclusive<usize> {
        self.start..=self.end
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhasePartition {
    k: usize,
    phases: Vec<Phase>,
}

impl PhasePartition {
    pub fn cache_size(&self) -> usize {
        self.k
    }

    pub fn phases(&self) -> &[Phase] {
        &self.phases
    }

    /// Phase count `ℓ`.
    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }

    pub fn lengths(&self) -> Vec<usize> {
        self.phases.iter().map(Phase::len).collect()
    }

    /// Total number of steps covered.
    pub fn horizon(&self) -> usize {
        self.phases.last().map_or(0, |p| p.end)
    }
}

pub fn partition_phases(k: usize, r: &RequestSequence) -> PhasePartition {
    assert!(k >= 1, "cache size must be positive");
    let mut phases = Vec::new();
    let mut start = 1;
    let mut current: BTreeSet<Page> = BTreeSet::new();
    let mut previous: BTreeSet<Page> = BTreeSet::new();

    let close = |start: usize, end: usize, current: &BTreeSet<Page>, previous: &BTreeSet<Page>, first: bool| Phase {
        start,
        end,
        pages: current.iter().copied().collect(),
        fresh: if first {
            current.iter().copied().collect()
        } else {
            current.difference(previous).copied().collect()
        },
    };

    for (idx, &page) in r.as_slice().iter().enumerate() {
        let t = idx + 1;
        if !current.contains(&page) && current.len() == k {
            phases.push(close(start, t - 1, &current, &previous, phases.is_empty()));
            previous = std::mem::take(&mut current);
            start = t;
        }
        current.insert(page);
    }
    if !r.is_empty() {
        phases.push(close(start, r.len(), &current, &previous, phases.is_empty()));
    }
    PhasePartition { k, phases }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuperphasePartition {
    /// 1-based phase indices of each `Q^j`.
    superphases: Vec<RangeInclusive<usize>>,
}

impl SuperphasePartition {
    pub fn superphases(&self) -> &[RangeInclusive<usize>] {
        &self.superphases
    }

    /// Superphase count `m`.
    pub fn len(&self) -> usize {
        self.superphases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.superphases.is_empty()
    }

    /// Step range covered by superphase `j` (0-based index into the list).
    pub fn times(&self, phases: &PhasePartition, j: usize) -> RangeInclusive<usize> {
        let q = &self.superphases[j];
        phases.phases[*q.start() - 1].start..=phases.phases[*q.end() - 1].end
    }
}

pub fn partition_superphases(z: u32, phase_lengths: &[usize]) -> SuperphasePartition {
    let z = z as usize;
    let l = phase_lengths.len();
    let mut superphases = Vec::new();
    let mut next = 0;
    while next < l {
        let first = next;
        let mut total = 0;
        while next < l && total < z {
            total += phase_lengths[next];
            next += 1;
        }
        next = (next + 2).min(l);
        superphases.push(first + 1..=next);
    }
    SuperphasePartition { superphases }
}

/// Latency of one run summed per phase and per superphase.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuperphaseLatencyReport {
    pub per_phase: Vec<u64>,
    pub per_superphase: Vec<u64>,
    pub total: u64,
}

pub fn superphase_latencies(
    phases: &PhasePartition,
    superphases: &SuperphasePartition,
    result: &SimulationResult,
) -> Result<SuperphaseLatencyReport, PhaseError> {
    let SimulationResult::Valid { total_latency, steps } = result else {
        return Err(PhaseError::InvalidRun);
    };
    if steps.len() != phases.horizon() {
        return Err(PhaseError::LengthMismatch { expected: phases.horizon(), got: steps.len() });
    }
    let per_phase: Vec<u64> = phases
        .phases
        .iter()
        .map(|p| steps[p.start - 1..p.end].iter().map(|s| s.latency).sum())
        .collect();
    let per_superphase: Vec<u64> =
        superphases.superphases.iter().map(|q| per_phase[*q.start() - 1..*q.end()].iter().sum()).collect();
    debug_assert_eq!(per_superphase.iter().sum::<u64>(), *total_latency);
    Ok(SuperphaseLatencyReport { per_phase, per_superphase, total: *total_latency })
}

/// `L_LRU / L_OPT`, with the conventions for zero optimum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Ratio {
    Finite(f64),
    /// Both costs are zero; counted as 1.
    BothZero,
    /// `L_OPT = 0 < L_LRU`.
    Unbounded,
}

impl Ratio {
    pub fn new(policy: u64, opt: u64) -> Self {
        match (policy, opt) {
            (0, 0) => Ratio::BothZero,
            (_, 0) => Ratio::Unbounded,
            (p, o) => Ratio::Finite(p as f64 / o as f64),
        }
    }

    pub fn value(&self) -> Option<f64> {
        match self {
            Ratio::Finite(x) => Some(*x),
            Ratio::BothZero => Some(1.0),
            Ratio::Unbounded => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhaseRow {
    pub phase: usize,
    pub len: usize,
    pub lru_latency: u64,
    /// `kZ · min{Z, |P^i|}`.
    pub bound: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuperphaseRow {
    pub superphase: usize,
    pub phases: RangeInclusive<usize>,
    pub lru_latency: u64,
    /// `4kZ²`.
    pub lru_bound: u64,
    pub opt_latency: u64,
    /// First step of the optimal run inside this superphase with status Miss.
    pub opt_witness_miss: Option<usize>,
    /// Whether the lower bound `L_OPT^j ≥ Z` applies (every superphase but the last).
    pub lower_bound_applies: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum AuditViolation {
    PhaseUpper { phase: usize, latency: u64, bound: u64 },
    SuperphaseUpper { superphase: usize, latency: u64, bound: u64 },
    SuperphaseLower { superphase: usize, latency: u64, witness: Option<usize> },
    RatioBound { ratio: Ratio, bound: u64 },
    SingleSuperphaseOpt { latency: u64 },
    SingleSuperphaseLru { latency: u64, bound: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LemmaAudit {
    pub k: usize,
    pub z: u32,
    pub phases: Vec<PhaseRow>,
    pub superphases: Vec<SuperphaseRow>,
    pub lru_total: u64,
    pub opt_total: u64,
    pub ratio: Ratio,
    /// `8kZ`, checked when `m ≥ 2`.
    pub ratio_bound: u64,
    pub violations: Vec<AuditViolation>,
}

impl LemmaAudit {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn phase_count(&self) -> usize {
        self.phases.len()
    }

    pub fn superphase_count(&self) -> usize {
        self.superphases.len()
    }
}

/// Checks every per-phase and per-superphase bound of the LRU analysis
/// against one LRU run and one optimal run of the same instance.
pub fn check_lemma_bounds(
    config: &SimulationConfig,
    r: &RequestSequence,
    lru: &SimulationResult,
    opt: &SimulationResult,
) -> Result<LemmaAudit, PhaseError> {
    let k = config.cache_size();
    let z = config.delay();
    let kz = k as u64 * u64::from(z);
    let phases = partition_phases(k, r);
    let supers = partition_superphases(z, &phases.lengths());
    let lru_rep = superphase_latencies(&phases, &supers, lru)?;
    let opt_rep = superphase_latencies(&phases, &supers, opt)?;
    let opt_steps = opt.steps();
    let m = supers.len();
    let mut violations = Vec::new();

    let phase_rows: Vec<PhaseRow> = phases
        .phases
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let bound = kz * (u64::from(z)).min(p.len() as u64);
            let latency = lru_rep.per_phase[i];
            if latency > bound {
                violations.push(AuditViolation::PhaseUpper { phase: i + 1, latency, bound });
            }
            PhaseRow { phase: i + 1, len: p.len(), lru_latency: latency, bound }
        })
        .collect();

    let lru_bound = 4 * kz * u64::from(z);
    let super_rows: Vec<SuperphaseRow> = (0..m)
        .map(|j| {
            let times = supers.times(&phases, j);
            let witness = times.clone().find(|&t| opt_steps[t - 1].status == Status::Miss);
            let lower_bound_applies = j + 1 < m;
            let row = SuperphaseRow {
                superphase: j + 1,
                phases: supers.superphases[j].clone(),
                lru_latency: lru_rep.per_superphase[j],
                lru_bound,
                opt_latency: opt_rep.per_superphase[j],
                opt_witness_miss: witness,
                lower_bound_applies,
            };
            if row.lru_latency > lru_bound {
                violations.push(AuditViolation::SuperphaseUpper {
                    superphase: j + 1,
                    latency: row.lru_latency,
                    bound: lru_bound,
                });
            }
            if lower_bound_applies && (witness.is_none() || row.opt_latency < u64::from(z)) {
                violations.push(AuditViolation::SuperphaseLower {
                    superphase: j + 1,
                    latency: row.opt_latency,
                    witness,
                });
            }
            row
        })
        .collect();

    let ratio = Ratio::new(lru_rep.total, opt_rep.total);
    let ratio_bound = 8 * kz;
    if m >= 2 {
        let within = matches!(ratio.value(), Some(x) if x <= ratio_bound as f64);
        if !within {
            violations.push(AuditViolation::RatioBound { ratio, bound: ratio_bound });
        }
    } else if m == 1 {
        let initial = config.initial_cache();
        if r.as_slice().iter().any(|p| initial.binary_search(p).is_err()) {
            if opt_rep.total < u64::from(z) {
                violations.push(AuditViolation::SingleSuperphaseOpt { latency: opt_rep.total });
            }
            if lru_rep.total > lru_bound {
                violations.push(AuditViolation::SingleSuperphaseLru { latency: lru_rep.total, bound: lru_bound });
            }
        }
    }

    Ok(LemmaAudit {
        k,
        z,
        phases: phase_rows,
        superphases: super_rows,
        lru_total: lru_rep.total,
        opt_total: opt_rep.total,
        ratio,
        ratio_bound,
        violations,
    })
}
