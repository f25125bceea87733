//! One-call analysis with the named detector variants, and report formatting.

use std::fmt::{self, Write as _};
use std::str::FromStr;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::baseline::{hb_config, run_lockset, shb_config};
use crate::engine::{run_first_pass, EngineConfig, EngineStats, HistoryMode};
use crate::graph::{dedup_by_event, dedup_by_location, GraphError, RaceCandidate, Tally};
use crate::trace::{Trace, TraceError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    /// Unbounded two-pass analysis.
    PwrEe,
    /// Bounded edges and histories, expanded on the fly.
    PwrLEe,
    /// Bounded histories, first-pass pairs only.
    PwrL,
    ShbLEe,
    Shb,
    Hb,
    Lockset,
}

impl Algorithm {
    pub const ALL: [Algorithm; 7] = [
        Algorithm::PwrEe,
        Algorithm::PwrLEe,
        Algorithm::PwrL,
        Algorithm::ShbLEe,
        Algorithm::Shb,
        Algorithm::Hb,
        Algorithm::Lockset,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::PwrEe => "pwr-ee",
            Algorithm::PwrLEe => "pwr-l-ee",
            Algorithm::PwrL => "pwr-l",
            Algorithm::ShbLEe => "shb-l-ee",
            Algorithm::Shb => "shb",
            Algorithm::Hb => "hb",
            Algorithm::Lockset => "lockset",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Algorithm::ALL.into_iter().find(|a| a.name() == s).ok_or_else(|| format!("unknown algorithm {s:?}"))
    }
}

/// A configurable bound: a number or unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Limit {
    At(usize),
    Unbounded,
}

impl Limit {
    pub fn as_option(self) -> Option<usize> {
        match self {
            Limit::At(n) => Some(n),
            Limit::Unbounded => None,
        }
    }
}

impl FromStr for Limit {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "inf" | "unbounded" | "none" => Ok(Limit::Unbounded),
            _ => s.parse().map(Limit::At).map_err(|_| format!("expected a number or `inf`, got {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dedup {
    Location,
    Event,
}

#[derive(Debug, Clone)]
pub struct AnalyzeOptions {
    pub algorithm: Algorithm,
    /// Overrides the algorithm's default edge bound.
    pub edge_limit: Option<Limit>,
    /// Overrides the algorithm's default history bound.
    pub history_limit: Option<Limit>,
    pub rr_optimization: bool,
    pub global_history: bool,
    pub dedup: Dedup,
}

impl AnalyzeOptions {
    pub fn new(algorithm: Algorithm) -> Self {
        AnalyzeOptions {
            algorithm,
            edge_limit: None,
            history_limit: None,
            rr_optimization: true,
            global_history: false,
            dedup: Dedup::Location,
        }
    }

    pub fn with_dedup(mut self, dedup: Dedup) -> Self {
        self.dedup = dedup;
        self
    }

    /// Engine configuration for the chosen algorithm; `None` for lockset.
    pub fn engine_config(&self) -> Option<EngineConfig> {
        let mut cfg = match self.algorithm {
            Algorithm::PwrEe => EngineConfig::default(),
            Algorithm::PwrLEe => EngineConfig::limited(25),
            Algorithm::PwrL => EngineConfig::limited(0),
            Algorithm::ShbLEe => shb_config(Some(25)),
            Algorithm::Shb => shb_config(Some(0)),
            Algorithm::Hb => hb_config(),
            Algorithm::Lockset => return None,
        };
        if let Some(l) = self.edge_limit {
            cfg.edge_limit = l.as_option();
        }
        if let Some(l) = self.history_limit {
            cfg.history_limit = l.as_option();
        }
        cfg.rr_optimization = self.rr_optimization;
        if self.global_history {
            cfg.history = HistoryMode::Global;
        }
        Some(cfg)
    }
}

#[derive(Debug, Error)]
pub enum AnalyzeError {
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub algorithm: Algorithm,
    pub candidates: Vec<RaceCandidate>,
    pub stats: Option<EngineStats>,
    pub elapsed: Duration,
}

impl RunReport {
    pub fn tally(&self) -> Tally {
        Tally::of(&self.candidates)
    }
}

pub fn analyze(trace: &Trace, opts: &AnalyzeOptions) -> Result<RunReport, AnalyzeError> {
    let start = Instant::now();
    let (cands, stats) = match opts.engine_config() {
        None => (run_lockset(trace)?, None),
        Some(cfg) => {
            let a = run_first_pass(trace, cfg)?;
            (a.finish()?, Some(a.stats().clone()))
        }
    };
    let candidates = match opts.dedup {
        Dedup::Location => dedup_by_location(cands),
        Dedup::Event => dedup_by_event(cands),
    };
    Ok(RunReport { algorithm: opts.algorithm, candidates, stats, elapsed: start.elapsed() })
}

pub fn format_text(trace: &Trace, report: &RunReport, with_stats: bool) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "algorithm: {}", report.algorithm);
    let _ = writeln!(out, "races: {}", report.tally());
    for c in &report.candidates {
        let _ = writeln!(
            out,
            "{} on {}: {} at {} ({}) / {} at {} ({}) [{}]",
            c.kind,
            trace.var_name(c.var),
            c.a,
            c.pos_a,
            c.loc_a,
            c.b,
            c.pos_b,
            c.loc_b,
            c.pass
        );
    }
    if with_stats {
        out.push_str(&format_stats(report));
    }
    out
}

pub fn format_stats(report: &RunReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "time_ms: {:.3}", report.elapsed.as_secs_f64() * 1e3);
    if let Some(s) = &report.stats {
        let _ = writeln!(out, "events: {}", s.events);
        let _ = writeln!(out, "max_history: {}", s.max_history);
        let _ = writeln!(out, "max_edges_per_var: {}", s.max_edges);
        let _ = writeln!(out, "concurrent_pairs: {}", s.conc_total);
        let _ = writeln!(out, "peak_records: {}", s.peak_records);
        let _ = writeln!(out, "history_walks: {} (skipped {})", s.syncs, s.skipped_syncs);
    }
    out
}

pub const TSV_HEADER: &str = "kind\tvar\tepochA\tposA\tlocA\tepochB\tposB\tlocB\tpass";

pub fn format_tsv(trace: &Trace, report: &RunReport) -> String {
    let mut out = String::from(TSV_HEADER);
    out.push('\n');
    for c in &report.candidates {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            c.kind,
            trace.var_name(c.var),
            c.a,
            c.pos_a,
            c.loc_a,
            c.b,
            c.pos_b,
            c.loc_b,
            c.pass
        );
    }
    out
}
