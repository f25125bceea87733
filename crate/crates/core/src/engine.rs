//! Streaming vector-clock analyzer.
//!
//! Each thread carries a clock built from program order, write-to-read
//! dependencies and, for the default policy, release-ordering through
//! per-lock histories of finished critical sections. Per variable the analyzer
//! keeps the set of accesses not yet ordered before the latest one, the pairs
//! found unordered, and the edges recorded when an access left the set.

use std::collections::{HashSet, VecDeque};
use std::sync::Arc;

use crate::clock::{Epoch, VectorClock};
use crate::graph::{
    aggressive_second_pass, ConcPair, EdgeStore, EventRecord, EventStore, GraphError, Pass, RaceCandidate,
    RaceKind,
};
use crate::trace::{ensure_well_formed, Event, LockId, Lockset, Op, ThreadId, Trace, TraceError, VarId};

/// Which ordering the clocks track.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SyncPolicy {
    /// Program order, write-to-read, and release ordering via critical-section histories.
    Pwr,
    /// Program order, write-to-read, and release-to-later-acquire on each lock.
    Shb,
    /// Program order and release-to-later-acquire on each lock.
    Hb,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HistoryMode {
    /// One bounded history per (thread, lock); entries already seen are dropped.
    ThreadLocal,
    /// One unbounded history per lock.
    Global,
}

#[derive(Debug, Clone)]
pub struct EngineConfig {
    pub policy: SyncPolicy,
    /// Bound on retained edges per variable; `None` keeps all.
    pub edge_limit: Option<usize>,
    /// Bound on history entries per (thread, lock); `None` keeps all.
    pub history_limit: Option<usize>,
    pub history: HistoryMode,
    /// Drop read-read pairs and keep writes in the access set past later reads.
    pub rr_optimization: bool,
    /// Expand and filter each new concurrent pair immediately instead of in a second pass.
    pub merged: bool,
    /// Skip the history walk when nothing relevant changed since the last one.
    pub skip_redundant_sync: bool,
    /// Report a read racing with its own last write while streaming.
    pub report_write_read: bool,
    /// Test fixture: reverses the write-read comparison in the read handler.
    #[doc(hidden)]
    pub invert_write_read_check: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            policy: SyncPolicy::Pwr,
            edge_limit: None,
            history_limit: None,
            history: HistoryMode::ThreadLocal,
            rr_optimization: true,
            merged: false,
            skip_redundant_sync: true,
            report_write_read: true,
            invert_write_read_check: false,
        }
    }
}

impl EngineConfig {
    /// Bounded single-pass configuration with `edge_limit` edges per variable
    /// and five history entries per (thread, lock).
    pub fn limited(edge_limit: usize) -> Self {
        EngineConfig { edge_limit: Some(edge_limit), history_limit: Some(5), merged: true, ..Default::default() }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EngineStats {
    pub events: usize,
    /// Largest history observed for one (thread, lock), or one lock in global mode.
    pub max_history: usize,
    /// Largest edge set observed for one variable.
    pub max_edges: usize,
    /// Concurrent pairs found during the first pass, over all variables.
    pub conc_total: usize,
    /// Largest number of retained event records.
    pub peak_records: usize,
    pub syncs: usize,
    pub skipped_syncs: usize,
}

#[derive(Debug, Clone)]
struct HistoryEntry {
    acquire: Epoch,
    clock: Arc<VectorClock>,
}

#[derive(Debug, Clone)]
struct ThreadState {
    clock: VectorClock,
    lockset: Lockset,
    history: Vec<VecDeque<HistoryEntry>>,
    needs_sync: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AccessEntry {
    pub epoch: Epoch,
    pub is_write: bool,
}

#[derive(Debug, Clone)]
struct LastWrite {
    epoch: Epoch,
    pos: usize,
    location: Arc<str>,
    clock: VectorClock,
    lockset: Lockset,
}

#[derive(Debug, Clone)]
pub struct VarState {
    last_write: Option<LastWrite>,
    access: Vec<AccessEntry>,
    edges: EdgeStore,
    conc: Vec<ConcPair>,
}

impl VarState {
    /// Accesses not yet ordered before the latest one.
    pub fn access_set(&self) -> &[AccessEntry] {
        &self.access
    }

    pub fn edges(&self) -> &EdgeStore {
        &self.edges
    }

    /// Concurrent pairs kept for the second pass (empty in merged mode).
    pub fn conc(&self) -> &[ConcPair] {
        &self.conc
    }
}

#[derive(Debug, Clone, Default)]
struct LockState {
    acquire: Option<Epoch>,
    global: Vec<HistoryEntry>,
    release_clock: Option<VectorClock>,
}

#[derive(Debug, Clone)]
pub struct Analyzer {
    cfg: EngineConfig,
    n: usize,
    threads: Vec<ThreadState>,
    vars: Vec<VarState>,
    locks: Vec<LockState>,
    evt: EventStore,
    emitted: Vec<RaceCandidate>,
    stats: EngineStats,
    gc_threshold: usize,
}

const GC_FLOOR: usize = 4096;

impl Analyzer {
    pub fn new(num_threads: usize, cfg: EngineConfig) -> Self {
        let threads = (0..num_threads)
            .map(|t| ThreadState {
                clock: VectorClock::initial(num_threads, ThreadId(t as u32)),
                lockset: Lockset::new(),
                history: Vec::new(),
                needs_sync: true,
            })
            .collect();
        Analyzer {
            cfg,
            n: num_threads,
            threads,
            vars: Vec::new(),
            locks: Vec::new(),
            evt: EventStore::new(),
            emitted: Vec::new(),
            stats: EngineStats::default(),
            gc_threshold: GC_FLOOR,
        }
    }

    pub fn config(&self) -> &EngineConfig {
        &self.cfg
    }

    pub fn stats(&self) -> &EngineStats {
        &self.stats
    }

    pub fn thread_clock(&self, t: ThreadId) -> &VectorClock {
        &self.threads[t.index()].clock
    }

    pub fn var(&self, x: VarId) -> Option<&VarState> {
        self.vars.get(x.index())
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn event_store(&self) -> &EventStore {
        &self.evt
    }

    /// Candidates emitted while streaming: write-read reports, plus expanded
    /// pairs in merged mode.
    pub fn emitted(&self) -> &[RaceCandidate] {
        &self.emitted
    }

    fn var_mut(&mut self, x: VarId) -> &mut VarState {
        if self.vars.len() <= x.index() {
            let limit = self.cfg.edge_limit;
            self.vars.resize_with(x.index() + 1, || VarState {
                last_write: None,
                access: Vec::new(),
                edges: EdgeStore::new(limit),
                conc: Vec::new(),
            });
        }
        &mut self.vars[x.index()]
    }

    fn lock_mut(&mut self, y: LockId) -> &mut LockState {
        if self.locks.len() <= y.index() {
            self.locks.resize_with(y.index() + 1, LockState::default);
        }
        &mut self.locks[y.index()]
    }

    pub fn process(&mut self, e: &Event) {
        match e.op {
            Op::Acquire(y) => self.acquire(e.thread, y),
            Op::Release(y) => self.release(e.thread, y),
            Op::Write(x) => self.write(e.thread, x, e.pos, e.location.clone()),
            Op::Read(x) => self.read(e.thread, x, e.pos, e.location.clone()),
        }
        self.stats.events += 1;
    }

    /// Joins into `v` the release clock of every history entry for a lock in
    /// `ls` whose acquire `v` has already seen, repeating until nothing changes.
    /// Thread-local entries already covered by `v` are dropped.
    pub fn w3_sync(&mut self, thread: ThreadId, mut v: VectorClock, ls: &Lockset) -> VectorClock {
        self.sync_into(thread.index(), &mut v, ls);
        v
    }

    fn sync_into(&mut self, t: usize, v: &mut VectorClock, ls: &Lockset) -> bool {
        let mut grew = false;
        loop {
            let mut changed = false;
            for y in ls.iter() {
                match self.cfg.history {
                    HistoryMode::ThreadLocal => {
                        let Some(hist) = self.threads[t].history.get_mut(y.index()) else { continue };
                        hist.retain(|h| {
                            let j = h.acquire.thread;
                            if h.clock.get(j) < v.get(j) {
                                return false;
                            }
                            if h.acquire.stamp < v.get(j) {
                                changed |= v.join_unchecked(&h.clock);
                            }
                            true
                        });
                    }
                    HistoryMode::Global => {
                        let Some(lock) = self.locks.get(y.index()) else { continue };
                        for h in &lock.global {
                            if h.acquire.stamp < v.get(h.acquire.thread) {
                                changed |= v.join_unchecked(&h.clock);
                            }
                        }
                    }
                }
            }
            grew |= changed;
            if !changed {
                return grew;
            }
        }
    }

    fn sync_thread(&mut self, t: usize) {
        if self.cfg.policy != SyncPolicy::Pwr {
            return;
        }
        if self.cfg.skip_redundant_sync && !self.threads[t].needs_sync {
            self.stats.skipped_syncs += 1;
            return;
        }
        self.stats.syncs += 1;
        let mut clock = std::mem::take(&mut self.threads[t].clock);
        let ls = std::mem::take(&mut self.threads[t].lockset);
        self.sync_into(t, &mut clock, &ls);
        let ts = &mut self.threads[t];
        ts.clock = clock;
        ts.lockset = ls;
        ts.needs_sync = false;
    }

    pub fn acquire(&mut self, thread: ThreadId, y: LockId) {
        let t = thread.index();
        self.lock_mut(y);
        match self.cfg.policy {
            SyncPolicy::Pwr => self.sync_thread(t),
            SyncPolicy::Shb | SyncPolicy::Hb => {
                if let Some(c) = &self.locks[y.index()].release_clock {
                    self.threads[t].clock.join_unchecked(c);
                }
            }
        }
        let ts = &mut self.threads[t];
        ts.lockset.insert(y);
        ts.needs_sync = true;
        self.locks[y.index()].acquire = Some(Epoch::new(thread, ts.clock.get(thread)));
        ts.clock.increment(thread);
    }

    pub fn release(&mut self, thread: ThreadId, y: LockId) {
        let t = thread.index();
        self.lock_mut(y);
        self.sync_thread(t);
        self.threads[t].lockset.remove(y);
        let clock = self.threads[t].clock.clone();
        match self.cfg.policy {
            SyncPolicy::Pwr => {
                let acquire = self.locks[y.index()].acquire.unwrap_or(Epoch::new(thread, 0));
                let entry = HistoryEntry { acquire, clock: Arc::new(clock) };
                match self.cfg.history {
                    HistoryMode::ThreadLocal => {
                        let limit = self.cfg.history_limit;
                        let mut longest = 0;
                        for (u, ts) in self.threads.iter_mut().enumerate() {
                            if u == t {
                                continue;
                            }
                            if ts.history.len() <= y.index() {
                                ts.history.resize_with(y.index() + 1, VecDeque::new);
                            }
                            let h = &mut ts.history[y.index()];
                            h.push_back(entry.clone());
                            if limit.is_some_and(|l| h.len() > l) {
                                h.pop_front();
                            }
                            longest = longest.max(h.len());
                            ts.needs_sync = true;
                        }
                        self.stats.max_history = self.stats.max_history.max(longest);
                    }
                    HistoryMode::Global => {
                        let g = &mut self.locks[y.index()].global;
                        g.push(entry);
                        self.stats.max_history = self.stats.max_history.max(g.len());
                        for (u, ts) in self.threads.iter_mut().enumerate() {
                            if u != t {
                                ts.needs_sync = true;
                            }
                        }
                    }
                }
            }
            SyncPolicy::Shb | SyncPolicy::Hb => self.locks[y.index()].release_clock = Some(clock),
        }
        self.threads[t].clock.increment(thread);
    }

    pub fn write(&mut self, thread: ThreadId, x: VarId, pos: usize, location: Arc<str>) {
        let t = thread.index();
        self.var_mut(x);
        self.sync_thread(t);
        let ts = &self.threads[t];
        let epoch = Epoch::new(thread, ts.clock.get(thread));
        let lockset = ts.lockset.clone();
        let clock = ts.clock.clone();
        self.evt.insert(
            epoch,
            EventRecord {
                pos,
                var: x,
                is_write: true,
                clock: clock.clone(),
                lockset: lockset.clone(),
                location: location.clone(),
                last_write: None,
            },
        );
        self.update_access(t, x, epoch, true);
        self.vars[x.index()].last_write = Some(LastWrite { epoch, pos, location, clock, lockset });
        self.threads[t].clock.increment(thread);
        self.after_access();
    }

    pub fn read(&mut self, thread: ThreadId, x: VarId, pos: usize, location: Arc<str>) {
        let t = thread.index();
        self.var_mut(x);
        let mut last_epoch = None;
        if let Some(lw) = &self.vars[x.index()].last_write {
            last_epoch = Some(lw.epoch);
            let ts = &self.threads[t];
            let seen = ts.clock.get(lw.epoch.thread);
            let unseen = if self.cfg.invert_write_read_check { seen > lw.epoch.stamp } else { lw.epoch.stamp > seen };
            if self.cfg.report_write_read && unseen && lw.lockset.is_disjoint(&ts.lockset) {
                let cand = RaceCandidate {
                    kind: RaceKind::WriteRead,
                    var: x,
                    a: lw.epoch,
                    b: Epoch::new(thread, ts.clock.get(thread)),
                    pos_a: lw.pos,
                    pos_b: pos,
                    loc_a: lw.location.clone(),
                    loc_b: location.clone(),
                    pass: Pass::First,
                };
                self.emitted.push(cand);
            }
            if self.cfg.policy != SyncPolicy::Hb && self.threads[t].clock.join_unchecked(&lw.clock) {
                self.threads[t].needs_sync = true;
            }
        }
        self.sync_thread(t);
        let ts = &self.threads[t];
        let epoch = Epoch::new(thread, ts.clock.get(thread));
        self.evt.insert(
            epoch,
            EventRecord {
                pos,
                var: x,
                is_write: false,
                clock: ts.clock.clone(),
                lockset: ts.lockset.clone(),
                location,
                last_write: last_epoch,
            },
        );
        self.update_access(t, x, epoch, false);
        self.threads[t].clock.increment(thread);
        self.after_access();
    }

    /// Splits the access set of `x` against the clock of the new access: ordered
    /// entries become edges, unordered ones become concurrent pairs.
    fn update_access(&mut self, t: usize, x: VarId, epoch: Epoch, is_write: bool) {
        let rr = self.cfg.rr_optimization && !is_write;
        let clock = &self.threads[t].clock;
        let var = &mut self.vars[x.index()];
        let mut fresh = Vec::new();
        let mut kept = Vec::with_capacity(var.access.len() + 1);
        for entry in var.access.drain(..) {
            if entry.epoch.concurrent_with(clock) {
                if !rr || entry.is_write {
                    fresh.push(ConcPair { first: entry.epoch, second: epoch });
                }
                kept.push(entry);
            } else {
                var.edges.push(entry.epoch, epoch);
                if rr && entry.is_write {
                    kept.push(entry);
                }
            }
        }
        kept.push(AccessEntry { epoch, is_write });
        var.access = kept;
        self.stats.conc_total += fresh.len();
        self.stats.max_edges = self.stats.max_edges.max(var.edges.len());
        if fresh.is_empty() {
            return;
        }
        if self.cfg.merged {
            let found = aggressive_second_pass(&fresh, &var.edges, &self.evt)
                .expect("records of retained epochs are kept");
            self.emitted.extend(found);
        } else {
            var.conc.extend(fresh);
        }
    }

    fn after_access(&mut self) {
        self.stats.peak_records = self.stats.peak_records.max(self.evt.len());
        if self.cfg.edge_limit.is_some() && self.evt.len() > self.gc_threshold {
            self.collect_records();
        }
    }

    /// Drops records no access set, edge or pending pair refers to.
    fn collect_records(&mut self) {
        let mut live: HashSet<Epoch> = HashSet::new();
        for v in &self.vars {
            live.extend(v.access.iter().map(|a| a.epoch));
            for e in v.edges.iter() {
                live.insert(e.from);
                live.insert(e.to);
            }
            for p in &v.conc {
                live.insert(p.first);
                live.insert(p.second);
            }
        }
        self.evt.retain(|e, _| live.contains(e));
        self.gc_threshold = GC_FLOOR.max(2 * self.evt.len());
    }

    /// Report order: streamed candidates first, then each variable's second
    /// pass in variable order. In merged mode everything was streamed.
    pub fn finish(&self) -> Result<Vec<RaceCandidate>, GraphError> {
        let mut out = self.emitted.clone();
        if !self.cfg.merged {
            for v in &self.vars {
                out.extend(aggressive_second_pass(&v.conc, &v.edges, &self.evt)?);
            }
        }
        Ok(out)
    }

    pub fn num_threads(&self) -> usize {
        self.n
    }
}

/// Runs the analyzer over a whole trace. Lock-discipline violations are
/// rejected; reads without an earlier write are tolerated.
pub fn run_first_pass(trace: &Trace, cfg: EngineConfig) -> Result<Analyzer, TraceError> {
    ensure_well_formed(trace)?;
    let mut a = Analyzer::new(trace.num_threads, cfg);
    for e in &trace.events {
        a.process(e);
    }
    Ok(a)
}
