//! Workloads: truncated Zipf generation and text trace ingestion.
//!
//! Both routes end in the same densification: distinct keys get ids `1..=n`
//! by descending request count, ties broken by first appearance.
//!
//! Sampling uses `ChaCha8Rng` seeded from the 64-bit seed, one `f64` draw per
//! request, inverted through the cumulative table.

use std::collections::HashMap;
use std::hash::Hash;
use std::io::{self, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::instance::{Page, RequestSequence};

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("Zipf exponent must be finite and > 1, got {0}")]
    InvalidAlpha(f64),
    #[error("Zipf support must be at least 1")]
    ZeroSupport,
    #[error("n_cap must be at least 1")]
    ZeroCap,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("no requests left after filtering")]
    Empty,
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZipfConfig {
    pub alpha: f64,
    /// Truncation rank `n_max`.
    pub support: u32,
    pub len: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyEntry {
    pub key: String,
    pub id: Page,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceMeta {
    pub source: String,
    /// Distinct keys before any filtering.
    pub original_distinct: usize,
    pub n: u32,
    pub len: usize,
    /// Retained keys in id order.
    pub keys: Vec<KeyEntry>,
}

/// `p(m) = m^-α / H` for `m = 1..=n_max`.
pub fn zipf_pmf(alpha: f64, support: u32) -> Vec<f64> {
    let raw: Vec<f64> = (1..=support).map(|m| f64::from(m).powf(-alpha)).collect();
    let h: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / h).collect()
}

/// Raw Zipf ranks in `1..=n_max`, before densification.
pub fn sample_zipf_ranks(cfg: &ZipfConfig) -> Result<Vec<u32>, TraceError> {
    if !cfg.alpha.is_finite() || cfg.alpha <= 1.0 {
        return Err(TraceError::InvalidAlpha(cfg.alpha));
    }
    if cfg.support == 0 {
        return Err(TraceError::ZeroSupport);
    }
    let mut cdf = zipf_pmf(cfg.alpha, cfg.support);
    let mut acc = 0.0;
    for p in cdf.iter_mut() {
        acc += *p;
        *p = acc;
    }
    let last = cdf.len() - 1;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    Ok((0..cfg.len)
        .map(|_| {
            let u: f64 = rng.gen();
            cdf.partition_point(|&c| c <= u).min(last) as u32 + 1
        })
        .collect())
}

pub fn generate_zipf(cfg: &ZipfConfig) -> Result<(RequestSequence, TraceMeta), TraceError> {
    let ranks = sample_zipf_ranks(cfg)?;
    let source = format!("zipf(alpha={},n_max={},T={},seed={})", cfg.alpha, cfg.support, cfg.len, cfg.seed);
    let distinct = ranks.iter().collect::<std::collections::HashSet<_>>().len();
    Ok(finish(&ranks, source, distinct, |rank| rank.to_string()))
}

/// Ids `1..=n` by descending count, ties by first appearance.
pub fn densify<K: Eq + Hash + Clone>(keys: &[K]) -> (Vec<Page>, Vec<(K, Page, u64)>) {
    let mut order: Vec<(K, usize, u64)> = Vec::new();
    let mut slot: HashMap<&K, usize> = HashMap::new();
    for (i, k) in keys.iter().enumerate() {
        match slot.get(k) {
            Some(&s) => order[s].2 += 1,
            None => {
                slot.insert(k, order.len());
                order.push((k.clone(), i, 1));
            }
        }
    }
    order.sort_by_key(|&(_, first, count)| (std::cmp::Reverse(count), first));
    let id_of: HashMap<&K, Page> = order.iter().enumerate().map(|(i, (k, _, _))| (k, i as Page + 1)).collect();
    let pages = keys.iter().map(|k| id_of[k]).collect();
    let table = order.iter().enumerate().map(|(i, (k, _, c))| (k.clone(), i as Page + 1, *c)).collect();
    (pages, table)
}

fn finish<K: Eq + Hash + Clone>(
    keys: &[K],
    source: String,
    original_distinct: usize,
    name: impl Fn(&K) -> String,
) -> (RequestSequence, TraceMeta) {
    let (pages, table) = densify(keys);
    let n = table.len() as u32;
    let r = RequestSequence::new(n, pages).expect("densified ids are in range");
    let meta = TraceMeta {
        source,
        original_distinct,
        n,
        len: r.len(),
        keys: table.into_iter().map(|(k, id, count)| KeyEntry { key: name(&k), id, count }).collect(),
    };
    (r, meta)
}

/// Extracts one key per non-blank line; on comma-separated lines the last
/// field is the key.
pub fn parse_keys(bytes: &[u8]) -> Result<Vec<String>, TraceError> {
    let mut keys = Vec::new();
    for (idx, raw) in bytes.split(|&b| b == b'\n').enumerate() {
        let line = idx + 1;
        let text = std::str::from_utf8(raw)
            .map_err(|e| TraceError::Parse { line, message: format!("invalid UTF-8: {e}") })?;
        let text = text.trim_end_matches('\r');
        if text.trim().is_empty() {
            continue;
        }
        let key = text.rsplit(',').next().unwrap_or("").trim();
        if key.is_empty() {
            return Err(TraceError::Parse { line, message: "empty key".into() });
        }
        keys.push(key.to_string());
    }
    Ok(keys)
}

/// Keeps the `n_cap` most requested keys, drops other requests, truncates to
/// `t_cap` and densifies.
pub fn normalize_keys(
    keys: &[String],
    source: String,
    t_cap: usize,
    n_cap: usize,
) -> Result<(RequestSequence, TraceMeta), TraceError> {
    if n_cap == 0 {
        return Err(TraceError::ZeroCap);
    }
    let (_, table) = densify(keys);
    let original_distinct = table.len();
    let kept: std::collections::HashSet<&String> = table.iter().take(n_cap).map(|(k, _, _)| k).collect();
    let filtered: Vec<String> = keys.iter().filter(|k| kept.contains(k)).take(t_cap).cloned().collect();
    if filtered.is_empty() {
        return Err(TraceError::Empty);
    }
    Ok(finish(&filtered, source, original_distinct, String::clone))
}

pub fn ingest_trace(path: &Path, t_cap: usize, n_cap: usize) -> Result<(RequestSequence, TraceMeta), TraceError> {
    let bytes = std::fs::read(path)?;
    let keys = parse_keys(&bytes)?;
    normalize_keys(&keys, path.display().to_string(), t_cap, n_cap)
}

/// One page id per line.
pub fn write_trace(mut w: impl Write, r: &RequestSequence) -> io::Result<()> {
    for p in r.as_slice() {
        writeln!(w, "{p}")?;
    }
    Ok(())
}

/// `key<TAB>id<TAB>count` per retained key, in id order.
pub fn write_sidecar(mut w: impl Write, meta: &TraceMeta) -> io::Result<()> {
    for e in &meta.keys {
        writeln!(w, "{}\t{}\t{}", e.key, e.id, e.count)?;
    }
    Ok(())
}

/// Reads a normalized trace (one positive page id per line, blank lines
/// ignored). The universe is the largest id.
pub fn read_page_ids(bytes: &[u8]) -> Result<RequestSequence, TraceError> {
    let text = std::str::from_utf8(bytes)
        .map_err(|e| TraceError::Parse { line: 1 + bytes[..e.valid_up_to()].iter().filter(|&&b| b == b'\n').count(), message: "invalid UTF-8".into() })?;
    let mut pages = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let s = line.trim();
        if s.is_empty() {
            continue;
        }
        match s.parse::<Page>() {
            Ok(p) if p > 0 => pages.push(p),
            _ => return Err(TraceError::Parse { line: line_no, message: format!("expected a positive page id, got {s:?}") }),
        }
    }
    Ok(RequestSequence::from_pages(pages, 0).expect("ids are positive"))
}
