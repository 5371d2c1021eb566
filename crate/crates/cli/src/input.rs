//! Reading instances and schedules, writing CSV.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;
use dhits::traces::read_page_ids;
use dhits::{EvictionSchedule, Page, RequestSequence, SimulationConfig};

use crate::Failure;

#[derive(Debug, Clone, Args)]
pub struct InstanceArgs {
    /// Trace of page ids, one per line.
    #[arg(long)]
    pub trace: PathBuf,
    /// Fetch delay Z.
    #[arg(long = "Z")]
    pub z: u32,
    /// Cache size k.
    #[arg(long)]
    pub k: usize,
    /// Initial cache contents, comma separated (default 1..=k).
    #[arg(long, value_delimiter = ',')]
    pub initial: Option<Vec<Page>>,
    /// Universe size (default: the largest page id seen, at least k).
    #[arg(long)]
    pub n: Option<u32>,
}

impl InstanceArgs {
    pub fn load(&self) -> Result<(SimulationConfig, RequestSequence)> {
        let r = read_trace(&self.trace)?;
        let mut n = self.n.unwrap_or(0).max(r.universe()).max(self.k as u32);
        if let Some(init) = &self.initial {
            n = n.max(init.iter().copied().max().unwrap_or(0));
        }
        let mut config = SimulationConfig::new(self.z, self.k, n)?;
        if let Some(init) = &self.initial {
            config = config.with_initial_cache(init.iter().copied())?;
        }
        let r = RequestSequence::new(n, r.into_vec())?;
        Ok((config, r))
    }
}

pub fn read_trace(path: &Path) -> Result<RequestSequence> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    read_page_ids(&bytes).map_err(|e| Failure::Parse(format!("{}: {e}", path.display())).into())
}

/// One token per line: a page id, or `-` for no eviction.
pub fn parse_schedule(text: &str) -> Result<EvictionSchedule, Failure> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let tok = line.trim();
        if tok.is_empty() {
            continue;
        }
        if tok == "-" {
            out.push(None);
        } else {
            match tok.parse::<Page>() {
                Ok(p) if p > 0 => out.push(Some(p)),
                _ => return Err(Failure::Parse(format!("schedule line {}: expected a page id or '-', got {tok:?}", i + 1))),
            }
        }
    }
    Ok(EvictionSchedule(out))
}

pub fn read_schedule(path: &Path) -> Result<EvictionSchedule> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(parse_schedule(&text)?)
}

pub fn write_schedule(path: &Path, e: &EvictionSchedule) -> Result<()> {
    fs::write(path, e.to_string()).with_context(|| format!("writing {}", path.display()))
}

/// Writer for `--out`, or stdout when absent.
pub fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(io::BufWriter::new(
            fs::File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(io::BufWriter::new(io::stdout().lock())),
    })
}

pub fn ratio_cell(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.6}")).unwrap_or_default()
}

pub fn join<T: ToString>(xs: &[T], sep: &str) -> String {
    xs.iter().map(ToString::to_string).collect::<Vec<_>>().join(sep)
}

/// Quotes a CSV field when needed.
pub fn field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
