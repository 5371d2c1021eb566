//! `dhits`: replay, policy runs, optimal solves, audits, sweeps and traces.
//!
//! Exit codes: 0 success, 1 other errors, 2 invalid schedule, 3 oracle budget
//! exceeded, 4 parse error.

mod bench;
mod input;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use dhits::optimal::{optimal_exact_with_budget, DEFAULT_BUDGET};
use dhits::phases::LemmaAudit;
use dhits::traces::{generate_zipf, ingest_trace, write_sidecar, write_trace, TraceError, ZipfConfig};
use dhits::{
    check_lemma_bounds, evaluate, partition_phases, partition_superphases, run_policy, solve_z2, InstanceError,
    OptimalError, Page, PolicyKind, RequestSequence, SimulationConfig, SimulationResult,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use input::{field, join, output, ratio_cell, read_schedule, write_schedule, InstanceArgs};

#[derive(Debug)]
pub enum Failure {
    Invalid(String),
    Parse(String),
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Invalid(m) => write!(f, "invalid schedule: {m}"),
            Failure::Parse(m) => write!(f, "parse error: {m}"),
        }
    }
}

impl std::error::Error for Failure {}

#[derive(Debug, Parser)]
#[command(name = "dhits", version, about = "Caching with delayed hits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Replay a policy or an eviction schedule and report the latency.
    Simulate(SimulateArgs),
    /// Print the phase and superphase partitions.
    Phases(PhasesArgs),
    /// Check the LRU phase and superphase bounds against the exact optimum.
    Audit(AuditArgs),
    /// Solve for the offline optimum.
    Optimal(OptimalArgs),
    /// Sweep traces, delays, cache sizes and policies.
    Bench(bench::BenchArgs),
    /// Generate a truncated Zipf trace.
    GenZipf(GenZipfArgs),
    /// Normalize a raw key trace into dense page ids.
    Ingest(IngestArgs),
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[arg(long, conflicts_with = "schedule")]
    policy: Option<PolicyKind>,
    /// Eviction schedule file, one page id or `-` per line.
    #[arg(long)]
    schedule: Option<PathBuf>,
    /// Per-step CSV.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the schedule that was replayed.
    #[arg(long)]
    schedule_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PhasesArgs {
    #[arg(long, required_unless_present = "lengths")]
    trace: Option<PathBuf>,
    #[arg(long = "Z")]
    z: u32,
    #[arg(long, required_unless_present = "lengths")]
    k: Option<usize>,
    /// Partition these phase lengths into superphases instead of reading a trace.
    #[arg(long, value_delimiter = ',', conflicts_with_all = ["trace", "k"])]
    lengths: Option<Vec<usize>>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct AuditArgs {
    #[arg(long, required_unless_present = "count")]
    trace: Option<PathBuf>,
    #[arg(long = "Z", required_unless_present = "count")]
    z: Option<u32>,
    #[arg(long, required_unless_present = "count")]
    k: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    initial: Option<Vec<Page>>,
    #[arg(long)]
    n: Option<u32>,
    /// Audit this many random instances (n ≤ 8, k ≤ 4, Z ≤ 5, T ≤ 40) instead.
    #[arg(long, conflicts_with = "trace")]
    count: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    budget: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct OptimalArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    /// Use the delay-2 weighted caching pipeline.
    #[arg(long)]
    z2: bool,
    #[arg(long)]
    budget: Option<u64>,
    /// Write the optimal schedule.
    #[arg(long)]
    schedule_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GenZipfArgs {
    #[arg(long)]
    alpha: f64,
    #[arg(long = "T")]
    t: usize,
    #[arg(long, default_value_t = 1000)]
    support: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Key table (`key<TAB>id<TAB>count`); defaults to `<out>.keys`.
    #[arg(long)]
    meta: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct IngestArgs {
    /// Raw trace, one key per line (last comma-separated field).
    #[arg(long)]
    trace: PathBuf,
    #[arg(long = "T", default_value_t = 5000)]
    t: usize,
    #[arg(long, default_value_t = 500)]
    n_cap: usize,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    meta: Option<PathBuf>,
}

fn budget(flag: Option<u64>) -> u64 {
    flag.or_else(|| std::env::var("DHITS_BUDGET").ok().and_then(|v| v.trim().parse().ok()))
        .unwrap_or(DEFAULT_BUDGET)
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let (config, r) = args.instance.load()?;
    let (schedule, res) = match (&args.policy, &args.schedule) {
        (_, Some(path)) => {
            let e = read_schedule(path)?;
            let res = evaluate(&config, &r, &e)?;
            (e, res)
        }
        (Some(kind), None) => run_policy(*kind, &config, &r),
        (None, None) => run_policy(PolicyKind::Lru, &config, &r),
    };
    if let Some(path) = &args.schedule_out {
        write_schedule(path, &schedule)?;
    }
    match &res {
        SimulationResult::Valid { total_latency, steps } => {
            if let Some(path) = &args.out {
                let mut w = output(Some(path))?;
                writeln!(w, "t,request,eviction,status,latency,cache")?;
                for s in steps {
                    let ev = s.eviction.map(|p| p.to_string()).unwrap_or_default();
                    writeln!(w, "{},{},{ev},{},{},{}", s.time, s.request, s.status, s.latency, join(&s.cache_after, " "))?;
                }
                w.flush()?;
            }
            let statuses: Vec<String> = res.statuses().iter().map(ToString::to_string).collect();
            println!("total_latency {total_latency}");
            println!("statuses {}", statuses.join(" "));
            Ok(())
        }
        SimulationResult::Invalid { time, reason } => Err(Failure::Invalid(format!("{reason:?} at t={time}")).into()),
    }
}

fn phases(args: PhasesArgs) -> Result<()> {
    let lengths = match (&args.lengths, &args.trace) {
        (Some(l), _) => l.clone(),
        (None, Some(path)) => partition_phases(args.k.expect("required by clap"), &input::read_trace(path)?).lengths(),
        (None, None) => unreachable!("required by clap"),
    };
    // Step ranges follow from the lengths alone.
    let mut starts = vec![1];
    for l in &lengths {
        starts.push(starts.last().unwrap() + l);
    }
    let mut w = output(args.out.as_deref())?;
    writeln!(w, "level,index,first_phase,last_phase,start,end,length")?;
    if args.lengths.is_none() {
        for (i, l) in lengths.iter().enumerate() {
            writeln!(w, "phase,{0},{0},{0},{1},{2},{l}", i + 1, starts[i], starts[i + 1] - 1)?;
        }
    }
    let q = partition_superphases(args.z, &lengths);
    for (j, range) in q.superphases().iter().enumerate() {
        let (a, b) = (*range.start(), *range.end());
        let (start, end) = (starts[a - 1], starts[b] - 1);
        writeln!(w, "superphase,{},{a},{b},{start},{end},{}", j + 1, end + 1 - start)?;
    }
    w.flush()?;
    Ok(())
}

fn audit_one(config: &SimulationConfig, r: &RequestSequence, budget: u64) -> Result<LemmaAudit> {
    let (_, lru) = run_policy(PolicyKind::Lru, config, r);
    let opt = optimal_exact_with_budget(config, r, budget)?;
    let opt_run = evaluate(config, r, &opt.schedule)?;
    Ok(check_lemma_bounds(config, r, &lru, &opt_run)?)
}

fn write_audit(mut w: impl Write, a: &LemmaAudit) -> std::io::Result<()> {
    writeln!(w, "level,index,first_phase,last_phase,lru_latency,lru_bound,opt_latency,opt_witness_miss,ratio,within_bounds")?;
    let violated = |level: &str, idx: usize| {
        use dhits::phases::AuditViolation::*;
        a.violations.iter().any(|v| match v {
            PhaseUpper { phase, .. } => level == "phase" && *phase == idx,
            SuperphaseUpper { superphase, .. } | SuperphaseLower { superphase, .. } => {
                level == "superphase" && *superphase == idx
            }
            _ => false,
        })
    };
    for row in &a.phases {
        writeln!(w, "phase,{0},{0},{0},{1},{2},,,,{3}", row.phase, row.lru_latency, row.bound, !violated("phase", row.phase))?;
    }
    for row in &a.superphases {
        let witness = row.opt_witness_miss.map(|t| t.to_string()).unwrap_or_default();
        writeln!(
            w,
            "superphase,{},{},{},{},{},{},{witness},,{}",
            row.superphase,
            row.phases.start(),
            row.phases.end(),
            row.lru_latency,
            row.lru_bound,
            row.opt_latency,
            !violated("superphase", row.superphase)
        )?;
    }
    writeln!(
        w,
        "total,,,,{},{},{},,{},{}",
        a.lru_total,
        a.ratio_bound,
        a.opt_total,
        field(&ratio_cell(a.ratio.value())),
        a.is_clean()
    )?;
    Ok(())
}

fn random_instance(rng: &mut ChaCha8Rng) -> (SimulationConfig, RequestSequence) {
    let k = rng.gen_range(1..=4usize);
    let n = rng.gen_range((k as u32 + 1).max(2)..=8);
    let z = rng.gen_range(1..=5);
    let len = rng.gen_range(0..=40);
    let mut pages: Vec<Page> = (1..=n).collect();
    pages.shuffle(rng);
    let config = SimulationConfig::new(z, k, n).unwrap().with_initial_cache(pages[..k].iter().copied()).unwrap();
    let r = RequestSequence::new(n, (0..len).map(|_| rng.gen_range(1..=n)).collect()).unwrap();
    (config, r)
}

fn audit(args: AuditArgs) -> Result<()> {
    let budget = budget(args.budget);
    if let Some(count) = args.count {
        let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
        let mut dirty = 0;
        let mut violations = 0;
        for _ in 0..count {
            let (config, r) = random_instance(&mut rng);
            let a = audit_one(&config, &r, budget)?;
            violations += a.violations.len();
            dirty += usize::from(!a.is_clean());
        }
        println!("instances {count}");
        println!("instances_with_violations {dirty}");
        println!("violations {violations}");
        return Ok(());
    }
    let instance = InstanceArgs {
        trace: args.trace.expect("required by clap"),
        z: args.z.expect("required by clap"),
        k: args.k.expect("required by clap"),
        initial: args.initial,
        n: args.n,
    };
    let (config, r) = instance.load()?;
    let a = audit_one(&config, &r, budget)?;
    let mut w = output(args.out.as_deref())?;
    write_audit(&mut w, &a)?;
    w.flush()?;
    Ok(())
}

fn optimal(args: OptimalArgs) -> Result<()> {
    let (config, r) = args.instance.load()?;
    let sol = if args.z2 { solve_z2(&config, &r)? } else { optimal_exact_with_budget(&config, &r, budget(args.budget))? };
    if let Some(path) = &args.schedule_out {
        write_schedule(path, &sol.schedule)?;
    }
    println!("cost {}", sol.cost);
    if args.z2 {
        let replay = evaluate(&config, &r, &sol.schedule)?;
        let replay = replay.cost().map(|c| c.to_string()).unwrap_or_else(|| "invalid".into());
        println!("schedule_replay_cost {replay}");
    }
    Ok(())
}

fn bench_cmd(args: bench::BenchArgs) -> Result<()> {
    let rows = bench::run_grid(&args, budget(None))?;
    let mut w = output(args.out.as_deref())?;
    bench::write_rows(&mut w, &rows, args.timing)?;
    w.flush()?;
    if let Some(dir) = &args.agg_dir {
        bench::write_aggregates(dir, &rows)?;
    }
    Ok(())
}

fn sidecar_path(out: &std::path::Path, meta: Option<PathBuf>) -> PathBuf {
    meta.unwrap_or_else(|| {
        let mut s = out.as_os_str().to_owned();
        s.push(".keys");
        s.into()
    })
}

fn save_trace(out: &std::path::Path, meta_path: PathBuf, r: &RequestSequence, meta: &dhits::traces::TraceMeta) -> Result<()> {
    let mut w = output(Some(out))?;
    write_trace(&mut w, r)?;
    w.flush()?;
    let mut m = output(Some(&meta_path))?;
    write_sidecar(&mut m, meta)?;
    m.flush()?;
    println!("source {}", meta.source);
    println!("distinct_keys {}", meta.original_distinct);
    println!("n {}", meta.n);
    println!("T {}", meta.len);
    Ok(())
}

fn gen_zipf(args: GenZipfArgs) -> Result<()> {
    let cfg = ZipfConfig { alpha: args.alpha, support: args.support, len: args.t, seed: args.seed };
    let (r, meta) = generate_zipf(&cfg)?;
    save_trace(&args.out, sidecar_path(&args.out, args.meta), &r, &meta)
}

fn ingest(args: IngestArgs) -> Result<()> {
    let (r, meta) = ingest_trace(&args.trace, args.t, args.n_cap)
        .with_context(|| format!("ingesting {}", args.trace.display()))?;
    save_trace(&args.out, sidecar_path(&args.out, args.meta), &r, &meta)
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(f) = cause.downcast_ref::<Failure>() {
            return match f {
                Failure::Invalid(_) => 2,
                Failure::Parse(_) => 4,
            };
        }
        if let Some(OptimalError::BudgetExceeded { .. }) = cause.downcast_ref::<OptimalError>() {
            return 3;
        }
        if let Some(TraceError::Parse { .. }) = cause.downcast_ref::<TraceError>() {
            return 4;
        }
        if cause.downcast_ref::<InstanceError>().is_some() {
            return 4;
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Usage errors exit with 1 so that 2 stays reserved for invalid schedules.
            let _ = e.print();
            return if e.use_stderr() { ExitCode::FAILURE } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Phases(a) => phases(a),
        Command::Audit(a) => audit(a),
        Command::Optimal(a) => optimal(a),
        Command::Bench(a) => bench_cmd(a),
        Command::GenZipf(a) => gen_zipf(a),
        Command::Ingest(a) => ingest(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
