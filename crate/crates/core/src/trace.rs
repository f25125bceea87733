//! Execution traces: events, parsing, serialization and well-formedness.
//!
//! A trace file holds one event per line, `<thread>,<op>,<target>[,<location>]`,
//! with `op` one of `r`, `w`, `acq`, `rel`. Blank lines and lines starting with
//! `#` are skipped. Positions are 1-based over the accepted lines; a missing
//! location defaults to `L<pos>`.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

macro_rules! id_type {
    ($name:ident, $prefix:literal) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub struct $name(pub u32);

        impl $name {
            pub fn index(self) -> usize {
                self.0 as usize
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, concat!($prefix, "{}"), self.0)
            }
        }
    };
}

id_type!(ThreadId, "T");
id_type!(VarId, "v");
id_type!(LockId, "l");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Op {
    Read(VarId),
    Write(VarId),
    Acquire(LockId),
    Release(LockId),
}

impl Op {
    pub fn var(self) -> Option<VarId> {
        match self {
            Op::Read(x) | Op::Write(x) => Some(x),
            _ => None,
        }
    }

    pub fn lock(self) -> Option<LockId> {
        match self {
            Op::Acquire(y) | Op::Release(y) => Some(y),
            _ => None,
        }
    }

    pub fn is_write(self) -> bool {
        matches!(self, Op::Write(_))
    }

    pub fn is_read(self) -> bool {
        matches!(self, Op::Read(_))
    }

    pub fn is_access(self) -> bool {
        self.var().is_some()
    }

    fn mnemonic(self) -> &'static str {
        match self {
            Op::Read(_) => "r",
            Op::Write(_) => "w",
            Op::Acquire(_) => "acq",
            Op::Release(_) => "rel",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Event {
    /// 1-based position in the trace.
    pub pos: usize,
    pub thread: ThreadId,
    pub op: Op,
    pub location: Arc<str>,
}

/// Name table mapping identifiers to dense ids in first-occurrence order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Registry {
    names: Vec<String>,
    index: HashMap<String, u32>,
}

impl Registry {
    pub fn intern(&mut self, name: &str) -> u32 {
        if let Some(&id) = self.index.get(name) {
            return id;
        }
        let id = self.names.len() as u32;
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), id);
        id
    }

    pub fn lookup(&self, name: &str) -> Option<u32> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: u32) -> &str {
        &self.names[id as usize]
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Trace {
    pub events: Vec<Event>,
    pub num_threads: usize,
    pub vars: Registry,
    pub locks: Registry,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("line {line}: expected `<thread>,<op>,<target>[,<location>]`, got {text:?}")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown operation {op:?}")]
    UnknownOp { line: usize, op: String },
    #[error("line {line}: invalid thread id {text:?}")]
    BadThread { line: usize, text: String },
    #[error("line {line}: thread {thread} exceeds the maximum of {max} threads")]
    TooManyThreads { line: usize, thread: u64, max: usize },
    #[error("line {line}: empty target identifier")]
    EmptyTarget { line: usize },
}

#[derive(Debug, Clone, Copy)]
pub struct ParseOptions {
    pub max_threads: usize,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions { max_threads: 1024 }
    }
}

pub fn parse_trace(text: &str) -> Result<Trace, ParseError> {
    parse_trace_with(text, ParseOptions::default())
}

pub fn parse_trace_with(text: &str, opts: ParseOptions) -> Result<Trace, ParseError> {
    let mut b = TraceBuilder::default();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let s = raw.trim();
        if s.is_empty() || s.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = s.splitn(4, ',').map(str::trim).collect();
        if fields.len() < 3 {
            return Err(ParseError::Syntax { line, text: s.to_string() });
        }
        let thread: u64 = fields[0]
            .parse()
            .map_err(|_| ParseError::BadThread { line, text: fields[0].to_string() })?;
        if thread >= opts.max_threads as u64 {
            return Err(ParseError::TooManyThreads { line, thread, max: opts.max_threads });
        }
        let target = fields[2];
        if target.is_empty() {
            return Err(ParseError::EmptyTarget { line });
        }
        let kind = match fields[1] {
            "r" => OpKind::Read,
            "w" => OpKind::Write,
            "acq" => OpKind::Acquire,
            "rel" => OpKind::Release,
            other => return Err(ParseError::UnknownOp { line, op: other.to_string() }),
        };
        let location = fields.get(3).copied().filter(|l| !l.is_empty());
        b.push(ThreadId(thread as u32), kind, target, location);
    }
    Ok(b.finish())
}

/// Renders a trace in the line format accepted by [`parse_trace`].
pub fn serialize_trace(trace: &Trace) -> String {
    let mut out = String::new();
    for e in &trace.events {
        let target = match e.op {
            Op::Read(x) | Op::Write(x) => trace.vars.name(x.0),
            Op::Acquire(y) | Op::Release(y) => trace.locks.name(y.0),
        };
        out.push_str(&format!("{},{},{},{}\n", e.thread.0, e.op.mnemonic(), target, e.location));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpKind {
    Read,
    Write,
    Acquire,
    Release,
}

/// Incremental trace construction, used by the parser and the generators.
#[derive(Debug, Default)]
pub struct TraceBuilder {
    trace: Trace,
}

impl TraceBuilder {
    pub fn push(&mut self, thread: ThreadId, kind: OpKind, target: &str, location: Option<&str>) -> usize {
        let t = &mut self.trace;
        let pos = t.events.len() + 1;
        let op = match kind {
            OpKind::Read => Op::Read(VarId(t.vars.intern(target))),
            OpKind::Write => Op::Write(VarId(t.vars.intern(target))),
            OpKind::Acquire => Op::Acquire(LockId(t.locks.intern(target))),
            OpKind::Release => Op::Release(LockId(t.locks.intern(target))),
        };
        let location: Arc<str> = match location {
            Some(l) => Arc::from(l),
            None => Arc::from(format!("L{pos}")),
        };
        t.num_threads = t.num_threads.max(thread.index() + 1);
        t.events.push(Event { pos, thread, op, location });
        pos
    }

    pub fn finish(self) -> Trace {
        self.trace
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ViolationKind {
    AcquireHeldLock { holder: ThreadId },
    ReleaseUnheldLock,
    ReleaseByNonHolder { holder: ThreadId },
    ReadWithoutWrite,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ViolationKind::AcquireHeldLock { holder } => write!(f, "acquire of held lock (held by {holder})"),
            ViolationKind::ReleaseUnheldLock => write!(f, "release of unheld lock"),
            ViolationKind::ReleaseByNonHolder { holder } => {
                write!(f, "release of lock held by another thread ({holder})")
            }
            ViolationKind::ReadWithoutWrite => write!(f, "read without a preceding write"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub pos: usize,
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "event {}: {}", self.pos, self.kind)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub lock_violations: Vec<Violation>,
    pub initial_write_violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn well_formed(&self) -> bool {
        self.lock_violations.is_empty()
    }

    pub fn is_clean(&self) -> bool {
        self.lock_violations.is_empty() && self.initial_write_violations.is_empty()
    }
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("malformed trace: {0}")]
    Malformed(Violation),
    #[error("trace violates the initial-write property: {0}")]
    InitialWrite(Violation),
    #[error("unknown thread {0}")]
    UnknownThread(ThreadId),
}

pub fn validate(trace: &Trace) -> ValidationReport {
    let mut report = ValidationReport::default();
    let mut holder: Vec<Option<ThreadId>> = vec![None; trace.locks.len()];
    let mut written = vec![false; trace.vars.len()];
    for e in &trace.events {
        match e.op {
            Op::Acquire(y) => match holder[y.index()] {
                Some(h) => report
                    .lock_violations
                    .push(Violation { pos: e.pos, kind: ViolationKind::AcquireHeldLock { holder: h } }),
                None => holder[y.index()] = Some(e.thread),
            },
            Op::Release(y) => match holder[y.index()] {
                Some(h) if h == e.thread => holder[y.index()] = None,
                Some(h) => report
                    .lock_violations
                    .push(Violation { pos: e.pos, kind: ViolationKind::ReleaseByNonHolder { holder: h } }),
                None => report
                    .lock_violations
                    .push(Violation { pos: e.pos, kind: ViolationKind::ReleaseUnheldLock }),
            },
            Op::Write(x) => written[x.index()] = true,
            Op::Read(x) => {
                if !written[x.index()] {
                    report
                        .initial_write_violations
                        .push(Violation { pos: e.pos, kind: ViolationKind::ReadWithoutWrite });
                }
            }
        }
    }
    report
}

/// Fails on the first lock-discipline violation.
pub fn ensure_well_formed(trace: &Trace) -> Result<(), TraceError> {
    let report = validate(trace);
    match report.lock_violations.into_iter().next() {
        Some(v) => Err(TraceError::Malformed(v)),
        None => Ok(()),
    }
}

/// Fails on lock-discipline violations and on reads without an earlier write.
pub fn ensure_strict(trace: &Trace) -> Result<(), TraceError> {
    let report = validate(trace);
    if let Some(v) = report.lock_violations.into_iter().next() {
        return Err(TraceError::Malformed(v));
    }
    match report.initial_write_violations.into_iter().next() {
        Some(v) => Err(TraceError::InitialWrite(v)),
        None => Ok(()),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CriticalSection {
    pub lock: LockId,
    pub thread: ThreadId,
    pub acquire_pos: usize,
    pub release_pos: Option<usize>,
}

impl CriticalSection {
    /// Whether the thread's event at `pos` belongs to this section, acquire and release included.
    pub fn contains(&self, e: &Event) -> bool {
        e.thread == self.thread
            && e.pos >= self.acquire_pos
            && self.release_pos.is_none_or(|r| e.pos <= r)
    }
}

/// Critical sections in acquire order. Assumes a well-formed trace.
pub fn critical_sections(trace: &Trace) -> Vec<CriticalSection> {
    let mut out: Vec<CriticalSection> = Vec::new();
    let mut open: Vec<Option<usize>> = vec![None; trace.locks.len()];
    for e in &trace.events {
        match e.op {
            Op::Acquire(y) => {
                open[y.index()] = Some(out.len());
                out.push(CriticalSection { lock: y, thread: e.thread, acquire_pos: e.pos, release_pos: None });
            }
            Op::Release(y) => {
                if let Some(i) = open[y.index()].take() {
                    out[i].release_pos = Some(e.pos);
                }
            }
            _ => {}
        }
    }
    out
}

pub fn project(trace: &Trace, thread: ThreadId) -> Result<Vec<&Event>, TraceError> {
    if thread.index() >= trace.num_threads {
        return Err(TraceError::UnknownThread(thread));
    }
    Ok(trace.events.iter().filter(|e| e.thread == thread).collect())
}

/// Sorted set of held locks.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Lockset(Vec<LockId>);

impl Lockset {
    pub fn new() -> Self {
        Lockset(Vec::new())
    }

    pub fn insert(&mut self, y: LockId) {
        if let Err(i) = self.0.binary_search(&y) {
            self.0.insert(i, y);
        }
    }

    pub fn remove(&mut self, y: LockId) {
        if let Ok(i) = self.0.binary_search(&y) {
            self.0.remove(i);
        }
    }

    pub fn contains(&self, y: LockId) -> bool {
        self.0.binary_search(&y).is_ok()
    }

    pub fn is_disjoint(&self, other: &Lockset) -> bool {
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() && j < other.0.len() {
            match self.0[i].cmp(&other.0[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => return false,
            }
        }
        true
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = LockId> + '_ {
        self.0.iter().copied()
    }
}

/// Lockset held by each event's thread when the event executes, indexed by `pos - 1`.
/// For an acquire the acquired lock is not included; for a release it is.
pub fn event_locksets(trace: &Trace) -> Vec<Lockset> {
    let mut held = vec![Lockset::new(); trace.num_threads];
    let mut out = Vec::with_capacity(trace.events.len());
    for e in &trace.events {
        let ls = &mut held[e.thread.index()];
        out.push(ls.clone());
        match e.op {
            Op::Acquire(y) => ls.insert(y),
            Op::Release(y) => ls.remove(y),
            _ => {}
        }
    }
    out
}

/// Position of each read's last write in trace order, indexed by `pos - 1`.
pub fn last_writes(trace: &Trace) -> Vec<Option<usize>> {
    let mut last = vec![None; trace.vars.len()];
    trace
        .events
        .iter()
        .map(|e| match e.op {
            Op::Write(x) => {
                last[x.index()] = Some(e.pos);
                None
            }
            Op::Read(x) => last[x.index()],
            _ => None,
        })
        .collect()
}

impl Trace {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn event(&self, pos: usize) -> &Event {
        &self.events[pos - 1]
    }

    pub fn var_name(&self, x: VarId) -> &str {
        self.vars.name(x.0)
    }

    pub fn lock_name(&self, y: LockId) -> &str {
        self.locks.name(y.0)
    }

    /// Same thread excluded; same variable; at least one write.
    pub fn conflicting(&self, a: usize, b: usize) -> bool {
        let (ea, eb) = (self.event(a), self.event(b));
        ea.thread != eb.thread
            && ea.op.var().is_some()
            && ea.op.var() == eb.op.var()
            && (ea.op.is_write() || eb.op.is_write())
    }
}
