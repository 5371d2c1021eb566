//! `(trace, Z, k, policy)` sweeps.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use dhits::optimal::optimal_exact_with_budget;
use dhits::traces::{generate_zipf, ZipfConfig};
use dhits::{partition_phases, partition_superphases, run_policy, solve_z2, PolicyKind, Ratio, RequestSequence, SimulationConfig};
use rayon::prelude::*;

use crate::input::{field, output, ratio_cell, read_trace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Oracle {
    Exact,
    Z2,
    None,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    /// Trace files of page ids (repeatable).
    #[arg(long)]
    pub trace: Vec<PathBuf>,
    /// Zipf exponents; each adds one generated trace.
    #[arg(long, value_delimiter = ',')]
    pub alpha: Vec<f64>,
    /// Length of generated traces.
    #[arg(long = "T", default_value_t = 5000)]
    pub t: usize,
    /// Truncation rank of generated traces.
    #[arg(long, default_value_t = 1000)]
    pub support: u32,
    #[arg(long = "Z", value_delimiter = ',')]
    pub z: Vec<u32>,
    #[arg(long, value_delimiter = ',')]
    pub k: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "lru")]
    pub policy: Vec<PolicyKind>,
    #[arg(long, value_enum, default_value_t = Oracle::None)]
    pub oracle: Oracle,
    /// Master seed; generated trace `i` uses `seed + i`.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Directory for aggregated CSVs.
    #[arg(long)]
    pub agg_dir: Option<PathBuf>,
    /// Adds a wall_ms column (output is then no longer reproducible).
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub trace: String,
    pub z: u32,
    pub k: usize,
    pub policy: String,
    pub latency: Option<u64>,
    pub opt: Option<u64>,
    pub cr: Option<f64>,
    pub phases: Option<usize>,
    pub superphases: Option<usize>,
    pub error: String,
    pub wall_ms: f64,
}

struct Trace {
    id: String,
    r: RequestSequence,
}

fn load_traces(args: &BenchArgs) -> Result<Vec<Trace>> {
    let mut out = Vec::new();
    for path in &args.trace {
        out.push(Trace { id: path.display().to_string(), r: read_trace(path)? });
    }
    for (i, &alpha) in args.alpha.iter().enumerate() {
        let cfg = ZipfConfig { alpha, support: args.support, len: args.t, seed: args.seed.wrapping_add(i as u64) };
        let (r, _) = generate_zipf(&cfg)?;
        out.push(Trace { id: format!("zipf-{alpha}"), r });
    }
    Ok(out)
}

fn run_cell(trace: &Trace, z: u32, k: usize, policies: &[PolicyKind], oracle: Oracle, budget: u64) -> Vec<BenchRow> {
    let start = Instant::now();
    let blank = |policy: &PolicyKind, error: String| BenchRow {
        trace: trace.id.clone(),
        z,
        k,
        policy: policy.name().to_string(),
        latency: None,
        opt: None,
        cr: None,
        phases: None,
        superphases: None,
        error,
        wall_ms: 0.0,
    };
    let n = trace.r.universe().max(k as u32);
    let config = match SimulationConfig::new(z, k, n) {
        Ok(c) => c,
        Err(e) => return policies.iter().map(|p| blank(p, e.to_string())).collect(),
    };
    let r = RequestSequence::new(n, trace.r.as_slice().to_vec()).expect("universe covers the trace");
    let phases = partition_phases(k, &r);
    let supers = partition_superphases(z, &phases.lengths());
    let (opt, oracle_error) = match oracle {
        Oracle::None => (None, String::new()),
        Oracle::Exact => match optimal_exact_with_budget(&config, &r, budget) {
            Ok(s) => (Some(s.cost), String::new()),
            Err(e) => (None, e.to_string()),
        },
        Oracle::Z2 => match solve_z2(&config, &r) {
            Ok(s) => (Some(s.cost), String::new()),
            Err(e) => (None, e.to_string()),
        },
    };
    let setup_ms = start.elapsed().as_secs_f64() * 1e3;
    policies
        .iter()
        .map(|policy| {
            let t0 = Instant::now();
            let (_, res) = run_policy(*policy, &config, &r);
            let latency = res.cost().expect("policy schedules are valid");
            let cr = opt.and_then(|o| Ratio::new(latency, o).value());
            BenchRow {
                latency: Some(latency),
                opt,
                cr,
                phases: Some(phases.len()),
                superphases: Some(supers.len()),
                wall_ms: setup_ms + t0.elapsed().as_secs_f64() * 1e3,
                ..blank(policy, oracle_error.clone())
            }
        })
        .collect()
}

pub fn run_grid(args: &BenchArgs, budget: u64) -> Result<Vec<BenchRow>> {
    if args.jobs == 0 {
        bail!("--jobs must be at least 1");
    }
    let traces = load_traces(args)?;
    let cells: Vec<(usize, u32, usize)> = (0..traces.len())
        .flat_map(|t| args.z.iter().flat_map(move |&z| args.k.iter().map(move |&k| (t, z, k))))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(args.jobs).build()?;
    let rows: Vec<Vec<BenchRow>> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(t, z, k)| run_cell(&traces[t], z, k, &args.policy, args.oracle, budget))
            .collect()
    });
    Ok(rows.into_iter().flatten().collect())
}

fn opt_cell<T: ToString>(x: Option<T>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub fn write_rows(mut w: impl Write, rows: &[BenchRow], timing: bool) -> std::io::Result<()> {
    write!(w, "trace,Z,k,policy,latency,opt,cr,phases,superphases,error")?;
    writeln!(w, "{}", if timing { ",wall_ms" } else { "" })?;
    for row in rows {
        write!(
            w,
            "{},{},{},{},{},{},{},{},{},{}",
            field(&row.trace),
            row.z,
            row.k,
            row.policy,
            opt_cell(row.latency),
            opt_cell(row.opt),
            ratio_cell(row.cr),
            opt_cell(row.phases),
            opt_cell(row.superphases),
            field(&row.error)
        )?;
        if timing {
            write!(w, ",{:.3}", row.wall_ms)?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Mean of `value` over traces, grouped by `(policy, a, b)`.
fn group(
    rows: &[BenchRow],
    key: impl Fn(&BenchRow) -> (u64, u64),
    value: impl Fn(&BenchRow) -> Option<f64>,
) -> BTreeMap<(&str, u64, u64), (f64, usize)> {
    let mut out: BTreeMap<(&str, u64, u64), (f64, usize)> = BTreeMap::new();
    for row in rows {
        let (a, b) = key(row);
        let slot = out.entry((row.policy.as_str(), a, b)).or_default();
        if let Some(v) = value(row) {
            slot.0 += v;
            slot.1 += 1;
        }
    }
    out
}

fn write_group(path: &Path, header: &str, groups: &BTreeMap<(&str, u64, u64), (f64, usize)>) -> Result<()> {
    let mut w = output(Some(path))?;
    writeln!(w, "{header}")?;
    for (&(policy, a, b), &(sum, cells)) in groups {
        let mean = (cells > 0).then(|| sum / cells as f64);
        writeln!(w, "{policy},{a},{b},{},{cells}", ratio_cell(mean))?;
    }
    w.flush()?;
    Ok(())
}

/// `latency_vs_z.csv`, `cr_vs_z.csv`, `cr_vs_k.csv` and the `cr_vs_zk.csv` matrix.
pub fn write_aggregates(dir: &Path, rows: &[BenchRow]) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let by_kz = |r: &BenchRow| (r.k as u64, u64::from(r.z));
    let by_zk = |r: &BenchRow| (u64::from(r.z), r.k as u64);
    let latency = |r: &BenchRow| r.latency.map(|l| l as f64);
    let cr = |r: &BenchRow| r.cr;
    write_group(&dir.join("latency_vs_z.csv"), "policy,k,Z,mean_latency,cells", &group(rows, by_kz, latency))?;
    write_group(&dir.join("cr_vs_z.csv"), "policy,k,Z,mean_cr,cells", &group(rows, by_kz, cr))?;
    let zk = group(rows, by_zk, cr);
    write_group(&dir.join("cr_vs_k.csv"), "policy,Z,k,mean_cr,cells", &zk)?;

    let ks: Vec<u64> = zk.keys().map(|&(_, _, k)| k).collect::<std::collections::BTreeSet<_>>().into_iter().collect();
    let mut w = output(Some(&dir.join("cr_vs_zk.csv")))?;
    write!(w, "policy,Z")?;
    for k in &ks {
        write!(w, ",k{k}")?;
    }
    writeln!(w)?;
    let mut current: Option<(&str, u64)> = None;
    let mut line: BTreeMap<u64, String> = BTreeMap::new();
    let flush = |w: &mut Box<dyn Write>, key: (&str, u64), line: &BTreeMap<u64, String>| -> std::io::Result<()> {
        write!(w, "{},{}", key.0, key.1)?;
        for k in &ks {
            write!(w, ",{}", line.get(k).map(String::as_str).unwrap_or(""))?;
        }
        writeln!(w)
    };
    for (&(policy, z, k), &(sum, cells)) in &zk {
        if current.is_some_and(|c| c != (policy, z)) {
            flush(&mut w, current.unwrap(), &line)?;
            line.clear();
        }
        current = Some((policy, z));
        line.insert(k, ratio_cell((cells > 0).then(|| sum / cells as f64)));
    }
    if let Some(key) = current {
        flush(&mut w, key, &line)?;
    }
    w.flush()?;
    Ok(())
}
