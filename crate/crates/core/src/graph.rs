//! Concurrent pairs, ordering edges, and the second pass that turns them into
//! race candidates.

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::clock::{Epoch, VectorClock};
use crate::trace::{Lockset, VarId};

/// What the analyzer keeps about a processed read or write.
#[derive(Debug, Clone)]
pub struct EventRecord {
    pub pos: usize,
    pub var: VarId,
    pub is_write: bool,
    pub clock: VectorClock,
    pub lockset: Lockset,
    pub location: Arc<str>,
    /// For reads: the write it reads from.
    pub last_write: Option<Epoch>,
}

pub type EventStore = HashMap<Epoch, EventRecord>;

/// A pair found unordered during the first pass; `first` happened earlier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ConcPair {
    pub first: Epoch,
    pub second: Epoch,
}

/// `from` is ordered before `to` and was dropped from the access set because of it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EdgeConstraint {
    pub from: Epoch,
    pub to: Epoch,
}

/// Per-variable edge set, optionally bounded with oldest-first eviction.
#[derive(Debug, Clone, Default)]
pub struct EdgeStore {
    limit: Option<usize>,
    order: VecDeque<EdgeConstraint>,
    preds: HashMap<Epoch, Vec<Epoch>>,
    peak: usize,
    inserted: usize,
}

impl EdgeStore {
    pub fn new(limit: Option<usize>) -> Self {
        EdgeStore { limit, ..Default::default() }
    }

    pub fn push(&mut self, from: Epoch, to: Epoch) {
        self.inserted += 1;
        if self.limit == Some(0) {
            return;
        }
        self.order.push_back(EdgeConstraint { from, to });
        self.preds.entry(to).or_default().push(from);
        if self.limit.is_some_and(|l| self.order.len() > l) {
            let old = self.order.pop_front().expect("non-empty");
            if let Some(v) = self.preds.get_mut(&old.to) {
                if let Some(i) = v.iter().position(|&g| g == old.from) {
                    v.remove(i);
                }
                if v.is_empty() {
                    self.preds.remove(&old.to);
                }
            }
        }
        self.peak = self.peak.max(self.order.len());
    }

    /// Direct predecessors of `e`.
    pub fn predecessors(&self, e: Epoch) -> &[Epoch] {
        self.preds.get(&e).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn peak(&self) -> usize {
        self.peak
    }

    pub fn inserted(&self) -> usize {
        self.inserted
    }

    pub fn iter(&self) -> impl Iterator<Item = &EdgeConstraint> {
        self.order.iter()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RaceKind {
    WriteWrite,
    ReadWrite,
    WriteRead,
}

impl fmt::Display for RaceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RaceKind::WriteWrite => "write-write",
            RaceKind::ReadWrite => "read-write",
            RaceKind::WriteRead => "write-read",
        })
    }
}

impl std::str::FromStr for RaceKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "write-write" | "ww" => Ok(RaceKind::WriteWrite),
            "read-write" | "rw" => Ok(RaceKind::ReadWrite),
            "write-read" | "wr" => Ok(RaceKind::WriteRead),
            _ => Err(format!("unknown race kind {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pass {
    First,
    Second,
}

impl fmt::Display for Pass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Pass::First => "first",
            Pass::Second => "second",
        })
    }
}

/// A reported race. For write-write `a` is the earlier event; for write-read `a`
/// is the write; for read-write `a` is the read.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RaceCandidate {
    pub kind: RaceKind,
    pub var: VarId,
    pub a: Epoch,
    pub b: Epoch,
    pub pos_a: usize,
    pub pos_b: usize,
    pub loc_a: Arc<str>,
    pub loc_b: Arc<str>,
    pub pass: Pass,
}

impl RaceCandidate {
    /// Event-granularity identity.
    pub fn key(&self) -> RaceKey {
        RaceKey::new(self.kind, self.pos_a, self.pos_b)
    }
}

/// Race identified by kind and positions, with write-write pairs in position order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RaceKey {
    pub kind: RaceKind,
    pub a: usize,
    pub b: usize,
}

impl RaceKey {
    pub fn new(kind: RaceKind, a: usize, b: usize) -> Self {
        if kind == RaceKind::WriteWrite && a > b {
            RaceKey { kind, a: b, b: a }
        } else {
            RaceKey { kind, a, b }
        }
    }
}

impl fmt::Display for RaceKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({}, {})", self.kind, self.a, self.b)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("no event record for epoch {0}")]
    MissingEvent(Epoch),
}

fn record(evt: &EventStore, e: Epoch) -> Result<&EventRecord, GraphError> {
    evt.get(&e).ok_or(GraphError::MissingEvent(e))
}

/// Kind and orientation of a conflicting pair; `None` for two reads.
/// The returned flag is true when the pair must be swapped so that `a` comes first.
pub fn classify_pair(first: &EventRecord, first_epoch: Epoch, second: &EventRecord) -> Option<(RaceKind, bool)> {
    match (first.is_write, second.is_write) {
        (true, true) => Some((RaceKind::WriteWrite, first.pos > second.pos)),
        (false, false) => None,
        (true, false) => {
            if second.last_write == Some(first_epoch) {
                Some((RaceKind::WriteRead, false))
            } else {
                Some((RaceKind::ReadWrite, true))
            }
        }
        (false, true) => Some((RaceKind::ReadWrite, false)),
    }
}

fn build_candidate(
    pair: ConcPair,
    f: &EventRecord,
    s: &EventRecord,
    kind: RaceKind,
    swap: bool,
    pass: Pass,
) -> RaceCandidate {
    let (ea, ra, eb, rb) = if swap { (pair.second, s, pair.first, f) } else { (pair.first, f, pair.second, s) };
    RaceCandidate {
        kind,
        var: f.var,
        a: ea,
        b: eb,
        pos_a: ra.pos,
        pos_b: rb.pos,
        loc_a: ra.location.clone(),
        loc_b: rb.location.clone(),
        pass,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Verdict {
    Ordered,
    Rejected,
    Race(RaceKind, bool),
}

fn judge(pair: ConcPair, f: &EventRecord, s: &EventRecord) -> Verdict {
    if !pair.first.concurrent_with(&s.clock) {
        return Verdict::Ordered;
    }
    if !f.lockset.is_disjoint(&s.lockset) {
        return Verdict::Rejected;
    }
    match classify_pair(f, pair.first, s) {
        Some((k, swap)) => Verdict::Race(k, swap),
        None => Verdict::Rejected,
    }
}

/// Keeps a pair only if the two events are unordered, conflicting, and hold no common lock.
pub fn filter_pair(pair: ConcPair, pass: Pass, evt: &EventStore) -> Result<Option<RaceCandidate>, GraphError> {
    let f = record(evt, pair.first)?;
    let s = record(evt, pair.second)?;
    Ok(match judge(pair, f, s) {
        Verdict::Race(kind, swap) => Some(build_candidate(pair, f, s, kind, swap, pass)),
        _ => None,
    })
}

struct Worklist {
    queue: BTreeMap<(usize, usize), (ConcPair, Pass)>,
    seen: HashSet<ConcPair>,
}

impl Worklist {
    fn new() -> Self {
        Worklist { queue: BTreeMap::new(), seen: HashSet::new() }
    }

    fn push(&mut self, pair: ConcPair, pass: Pass, evt: &EventStore) -> Result<(), GraphError> {
        if self.seen.insert(pair) {
            let key = (record(evt, pair.first)?.pos, record(evt, pair.second)?.pos);
            self.queue.insert(key, (pair, pass));
        }
        Ok(())
    }

    fn pop(&mut self) -> Option<(ConcPair, Pass)> {
        self.queue.pop_first().map(|(_, v)| v)
    }
}

/// Closes the concurrent pairs under the edge predecessors: every emitted `(e, f)`
/// adds `(g, f)` for each direct predecessor `g` of `e`. Pairs come out smallest
/// `pos(e)` first, ties broken by `pos(f)`, and no pair is emitted twice.
pub fn second_pass(
    conc: &[ConcPair],
    edges: &EdgeStore,
    evt: &EventStore,
) -> Result<Vec<(ConcPair, Pass)>, GraphError> {
    let mut wl = Worklist::new();
    for &p in conc {
        wl.push(p, Pass::First, evt)?;
    }
    let mut out = Vec::new();
    while let Some((pair, pass)) = wl.pop() {
        out.push((pair, pass));
        for &g in edges.predecessors(pair.first) {
            wl.push(ConcPair { first: g, second: pair.second }, Pass::Second, evt)?;
        }
    }
    Ok(out)
}

/// Second pass with filtering folded in: ordered pairs are dropped without
/// expansion, pairs failing the lockset or conflict test are expanded but not
/// reported. Yields the same set as filtering the plain second pass.
pub fn aggressive_second_pass(
    conc: &[ConcPair],
    edges: &EdgeStore,
    evt: &EventStore,
) -> Result<Vec<RaceCandidate>, GraphError> {
    let mut wl = Worklist::new();
    for &p in conc {
        wl.push(p, Pass::First, evt)?;
    }
    let mut out = Vec::new();
    while let Some((pair, pass)) = wl.pop() {
        let f = record(evt, pair.first)?;
        let s = record(evt, pair.second)?;
        match judge(pair, f, s) {
            Verdict::Ordered => continue,
            Verdict::Rejected => {}
            Verdict::Race(kind, swap) => out.push(build_candidate(pair, f, s, kind, swap, pass)),
        }
        for &g in edges.predecessors(pair.first) {
            wl.push(ConcPair { first: g, second: pair.second }, Pass::Second, evt)?;
        }
    }
    Ok(out)
}

/// Keeps the first candidate per kind and unordered pair of locations.
pub fn dedup_by_location(cands: Vec<RaceCandidate>) -> Vec<RaceCandidate> {
    let mut seen = HashSet::new();
    cands
        .into_iter()
        .filter(|c| {
            let (l, r) = if c.loc_a <= c.loc_b { (&c.loc_a, &c.loc_b) } else { (&c.loc_b, &c.loc_a) };
            seen.insert((c.kind, l.clone(), r.clone()))
        })
        .collect()
}

/// Drops repeated event pairs, keeping the first.
pub fn dedup_by_event(cands: Vec<RaceCandidate>) -> Vec<RaceCandidate> {
    let mut seen = HashSet::new();
    cands.into_iter().filter(|c| seen.insert(c.key())).collect()
}

/// Total and second-pass counts, written `N(M)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Tally {
    pub total: usize,
    pub second: usize,
}

impl Tally {
    pub fn of(cands: &[RaceCandidate]) -> Self {
        Tally { total: cands.len(), second: cands.iter().filter(|c| c.pass == Pass::Second).count() }
    }
}

impl fmt::Display for Tally {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.total, self.second)
    }
}
