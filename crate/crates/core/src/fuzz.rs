//! Randomized differential checks between the analyzers and the oracle.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::baseline::run_shb;
use crate::clock::{Epoch, VectorClock};
use crate::engine::{run_first_pass, Analyzer, EngineConfig, HistoryMode};
use crate::graph::{filter_pair, second_pass, RaceKey};
use crate::oracle::{all_predictable_races, closure, trace_specific_races, OrderRelation, RelationKind};
use crate::engine::SyncPolicy;
use crate::trace::{event_locksets, serialize_trace, Trace};
use crate::tracegen::{generate, GenConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Property {
    /// Every predictable race is reported by the unbounded analysis.
    Completeness,
    /// On two-thread traces, reports whose events hold no locks are predictable.
    Soundness2,
    PwrEqPwra,
    WdpSubset,
    PwrrSubset,
    /// Engine clocks order exactly the access pairs the closure orders.
    EngineVsClosure,
    /// The earliest schedulable happens-before report is a predictable race.
    ShbFirst,
    /// Schedulable happens-before reports are trace-specific predictable races.
    ShbSound,
    /// Optimizations and modes that must not change results agree.
    Differential,
    /// Larger edge or history bounds never lose reports or orderings.
    Monotonic,
}

impl Property {
    pub const ALL: [Property; 10] = [
        Property::Completeness,
        Property::Soundness2,
        Property::PwrEqPwra,
        Property::WdpSubset,
        Property::PwrrSubset,
        Property::EngineVsClosure,
        Property::ShbFirst,
        Property::ShbSound,
        Property::Differential,
        Property::Monotonic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Property::Completeness => "completeness",
            Property::Soundness2 => "soundness2",
            Property::PwrEqPwra => "pwr-eq-pwra",
            Property::WdpSubset => "wdp-subset",
            Property::PwrrSubset => "pwrr-subset",
            Property::EngineVsClosure => "engine-vs-closure",
            Property::ShbFirst => "shb-first",
            Property::ShbSound => "shb-sound",
            Property::Differential => "differential",
            Property::Monotonic => "monotonic",
        }
    }
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Property {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Property::ALL.into_iter().find(|p| p.name() == s).ok_or_else(|| format!("unknown property {s:?}"))
    }
}

#[derive(Debug, Clone)]
pub struct FuzzConfig {
    pub seed: u64,
    pub cases: usize,
    pub max_events: usize,
    pub max_threads: usize,
    pub max_vars: usize,
    pub max_locks: usize,
    /// Run the engine with its write-read comparison reversed.
    pub broken_engine: bool,
}

impl Default for FuzzConfig {
    fn default() -> Self {
        FuzzConfig {
            seed: 1,
            cases: 1000,
            max_events: 10,
            max_threads: 3,
            max_vars: 2,
            max_locks: 2,
            broken_engine: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Failure {
    pub case: usize,
    pub seed: u64,
    pub message: String,
    pub trace: String,
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "case {} (trace seed {}): {}", self.case, self.seed, self.message)?;
        for line in self.trace.lines() {
            writeln!(f, "    {line}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct FuzzSummary {
    pub property: Property,
    pub cases: usize,
    pub failures: Vec<Failure>,
}

/// Seed of the trace generated for case `i`.
pub fn case_seed(base: u64, i: usize) -> u64 {
    base.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(i as u64)
}

pub fn case_trace(cfg: &FuzzConfig, property: Property, i: usize) -> (u64, Trace) {
    let seed = case_seed(cfg.seed, i);
    let threads = if property == Property::Soundness2 { 2 } else { cfg.max_threads };
    let gen = GenConfig::small(seed, threads, cfg.max_vars, cfg.max_locks, cfg.max_events);
    (seed, generate(&gen))
}

pub fn run_fuzz(property: Property, cfg: &FuzzConfig) -> FuzzSummary {
    let mut failures: Vec<Failure> = (0..cfg.cases)
        .into_par_iter()
        .filter_map(|i| {
            let (seed, trace) = case_trace(cfg, property, i);
            check_property(property, &trace, cfg.broken_engine).err().map(|message| Failure {
                case: i,
                seed,
                message,
                trace: serialize_trace(&trace),
            })
        })
        .collect();
    failures.sort_by_key(|f| f.case);
    FuzzSummary { property, cases: cfg.cases, failures }
}

fn oracle_cap(trace: &Trace) -> usize {
    trace.len().max(crate::oracle::DEFAULT_REORDER_CAP)
}

fn engine_config(broken: bool) -> EngineConfig {
    EngineConfig { invert_write_read_check: broken, ..Default::default() }
}

/// Event-granularity race keys of a finished analysis.
pub fn candidate_keys(trace: &Trace, cfg: EngineConfig) -> Result<BTreeSet<RaceKey>, String> {
    let a = run_first_pass(trace, cfg).map_err(|e| e.to_string())?;
    Ok(a.finish().map_err(|e| e.to_string())?.iter().map(|c| c.key()).collect())
}

/// Position-indexed epoch and clock of every access the analyzer recorded.
pub fn access_clocks(a: &Analyzer) -> HashMap<usize, (Epoch, VectorClock)> {
    a.event_store().iter().map(|(e, r)| (r.pos, (*e, r.clock.clone()))).collect()
}

/// Ordered event pairs, by trace position.
pub type Ordering = BTreeSet<(usize, usize)>;

/// Ordered access pairs according to the analyzer's clocks.
pub fn engine_ordering(trace: &Trace, a: &Analyzer) -> Ordering {
    let clocks = access_clocks(a);
    let mut out = BTreeSet::new();
    for e in trace.events.iter().filter(|e| e.op.is_access()) {
        for f in trace.events[e.pos..].iter().filter(|f| f.op.is_access()) {
            let (ee, _) = &clocks[&e.pos];
            let (_, fc) = &clocks[&f.pos];
            if ee.ordered_before(fc) {
                out.insert((e.pos, f.pos));
            }
        }
    }
    out
}

fn relation_ordering(trace: &Trace, r: &OrderRelation) -> BTreeSet<(usize, usize)> {
    r.pairs()
        .into_iter()
        .filter(|&(a, b)| trace.event(a).op.is_access() && trace.event(b).op.is_access())
        .collect()
}

fn compare_orderings(
    what: &str,
    engine: &BTreeSet<(usize, usize)>,
    reference: &BTreeSet<(usize, usize)>,
) -> Result<(), String> {
    if engine == reference {
        return Ok(());
    }
    let extra: Vec<_> = engine.difference(reference).collect();
    let missing: Vec<_> = reference.difference(engine).collect();
    Err(format!("{what}: engine orders extra {extra:?}, misses {missing:?}"))
}

fn subset(what: &str, small: &BTreeSet<RaceKey>, big: &BTreeSet<RaceKey>) -> Result<(), String> {
    let missing: Vec<String> = small.difference(big).map(ToString::to_string).collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(format!("{what}: {}", missing.join(", ")))
    }
}

pub fn check_property(property: Property, trace: &Trace, broken: bool) -> Result<(), String> {
    let cap = oracle_cap(trace);
    let closure_of = |k| closure(trace, k, cap).map_err(|e| e.to_string());
    match property {
        Property::Completeness => {
            let pred: BTreeSet<RaceKey> =
                all_predictable_races(trace, cap).map_err(|e| e.to_string())?.into_keys().collect();
            let reported = candidate_keys(trace, engine_config(broken))?;
            subset("predictable races not reported", &pred, &reported)
        }
        Property::Soundness2 => {
            if trace.num_threads != 2 {
                return Ok(());
            }
            let pred: BTreeSet<RaceKey> =
                all_predictable_races(trace, cap).map_err(|e| e.to_string())?.into_keys().collect();
            let ls = event_locksets(trace);
            let lock_free: BTreeSet<RaceKey> = candidate_keys(trace, engine_config(broken))?
                .into_iter()
                .filter(|k| ls[k.a - 1].is_empty() && ls[k.b - 1].is_empty())
                .collect();
            subset("lock-free reports that are not predictable", &lock_free, &pred)
        }
        Property::PwrEqPwra => {
            if closure_of(RelationKind::Pwr)? == closure_of(RelationKind::Pwra)? {
                Ok(())
            } else {
                Err("closures differ".into())
            }
        }
        Property::WdpSubset | Property::PwrrSubset => {
            let k = if property == Property::WdpSubset { RelationKind::Wdp } else { RelationKind::Pwrr };
            if closure_of(k)?.is_subset_of(&closure_of(RelationKind::Pwr)?) {
                Ok(())
            } else {
                Err(format!("{k} orders a pair that pwr does not"))
            }
        }
        Property::EngineVsClosure => {
            let cases = [
                ("pwr", EngineConfig::default(), RelationKind::Pwr),
                (
                    "pwr/global",
                    EngineConfig { history: HistoryMode::Global, ..Default::default() },
                    RelationKind::Pwr,
                ),
                ("shb", EngineConfig { policy: SyncPolicy::Shb, ..Default::default() }, RelationKind::Shb),
                ("hb", EngineConfig { policy: SyncPolicy::Hb, ..Default::default() }, RelationKind::Hb),
            ];
            for (what, cfg, kind) in cases {
                let a = run_first_pass(trace, cfg).map_err(|e| e.to_string())?;
                let r = closure_of(kind)?;
                compare_orderings(what, &engine_ordering(trace, &a), &relation_ordering(trace, &r))?;
            }
            Ok(())
        }
        Property::ShbFirst => {
            let found = run_shb(trace, Some(0)).map_err(|e| e.to_string())?;
            // Earliest by the later of its two events.
            let Some(first) = found.iter().min_by_key(|c| (c.pos_a.max(c.pos_b), c.pos_a.min(c.pos_b))) else {
                return Ok(());
            };
            let pred = all_predictable_races(trace, cap).map_err(|e| e.to_string())?;
            if pred.contains_key(&first.key()) {
                Ok(())
            } else {
                Err(format!("first shb report {} is not predictable", first.key()))
            }
        }
        Property::ShbSound => {
            let specific: BTreeSet<RaceKey> =
                trace_specific_races(trace, cap).map_err(|e| e.to_string())?.into_keys().collect();
            let got: BTreeSet<RaceKey> =
                run_shb(trace, Some(0)).map_err(|e| e.to_string())?.iter().map(|c| c.key()).collect();
            subset("shb reports not schedulable", &got, &specific)
        }
        Property::Differential => differential(trace),
        Property::Monotonic => monotonic(trace),
    }
}

fn differential(trace: &Trace) -> Result<(), String> {
    let base = EngineConfig::default();
    let reference = candidate_keys(trace, base.clone())?;
    let variants = [
        ("read-read optimization off", EngineConfig { rr_optimization: false, ..base.clone() }),
        ("history-walk skipping off", EngineConfig { skip_redundant_sync: false, ..base.clone() }),
        ("global history", EngineConfig { history: HistoryMode::Global, ..base.clone() }),
        ("merged unbounded", EngineConfig { merged: true, ..base.clone() }),
    ];
    for (what, cfg) in variants {
        let got = candidate_keys(trace, cfg)?;
        if got != reference {
            return Err(format!("{what}: {got:?} vs {reference:?}"));
        }
    }

    let with_skip = run_first_pass(trace, base.clone()).map_err(|e| e.to_string())?;
    let without =
        run_first_pass(trace, EngineConfig { skip_redundant_sync: false, ..base.clone() }).map_err(|e| e.to_string())?;
    if access_clocks(&with_skip) != access_clocks(&without) {
        return Err("history-walk skipping changed a clock".into());
    }

    for rr in [true, false] {
        let a = run_first_pass(trace, EngineConfig { rr_optimization: rr, ..base.clone() })
            .map_err(|e| e.to_string())?;
        let mut filtered = BTreeSet::new();
        for x in 0..a.num_vars() {
            let v = a.var(crate::trace::VarId(x as u32)).expect("var");
            for (pair, pass) in second_pass(v.conc(), v.edges(), a.event_store()).map_err(|e| e.to_string())? {
                if let Some(c) = filter_pair(pair, pass, a.event_store()).map_err(|e| e.to_string())? {
                    filtered.insert(c.key());
                }
            }
        }
        let streamed: BTreeSet<RaceKey> = a.emitted().iter().map(|c| c.key()).collect();
        let folded: BTreeSet<RaceKey> =
            a.finish().map_err(|e| e.to_string())?.iter().map(|c| c.key()).collect::<BTreeSet<_>>();
        let combined: BTreeSet<RaceKey> = streamed.union(&filtered).copied().collect();
        if combined != folded {
            return Err(format!("filtered second pass differs from folded filtering (rr {rr})"));
        }
    }
    Ok(())
}

fn monotonic(trace: &Trace) -> Result<(), String> {
    let mut prev: Option<(Option<usize>, BTreeSet<RaceKey>)> = None;
    for limit in [Some(0), Some(5), Some(25), None] {
        let cfg = EngineConfig { edge_limit: limit, merged: true, ..Default::default() };
        let got = candidate_keys(trace, cfg)?;
        if let Some((pl, p)) = &prev {
            subset(&format!("edge limit {pl:?} reports missing at {limit:?}"), p, &got)?;
        }
        prev = Some((limit, got));
    }

    let mut prev: Option<(Option<usize>, Ordering)> = None;
    for limit in [Some(1), Some(5), None] {
        let a = run_first_pass(trace, EngineConfig { history_limit: limit, ..Default::default() })
            .map_err(|e| e.to_string())?;
        let ord = engine_ordering(trace, &a);
        if let Some((pl, p)) = &prev {
            if !p.is_subset(&ord) {
                let extra: Vec<_> = p.difference(&ord).collect();
                return Err(format!("history limit {pl:?} orders {extra:?} but {limit:?} does not"));
            }
        }
        prev = Some((limit, ord));
    }
    Ok(())
}
