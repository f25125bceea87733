//! Exhaustive search over correctly reordered prefixes.
//!
//! A reordered prefix keeps each thread's events as a prefix of its program
//! order, lets every read see the same write it saw originally, and respects
//! mutual exclusion. An acquire whose release is missing must be the last
//! acquire of that lock. Trace-specific prefixes additionally take each lock's
//! critical sections in their original order.

use std::collections::{BTreeMap, HashSet};
use std::ops::ControlFlow;

use super::{check_size, OracleError};
use crate::graph::{RaceKey, RaceKind};
use crate::trace::{critical_sections, ensure_strict, last_writes, Op, Trace};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReorderOptions {
    pub cap: usize,
    pub trace_specific: bool,
}

impl Default for ReorderOptions {
    fn default() -> Self {
        ReorderOptions { cap: super::DEFAULT_REORDER_CAP, trace_specific: false }
    }
}

/// Maps each predictable race to a witness prefix ending in the racing pair.
pub type RaceWitnesses = BTreeMap<RaceKey, Vec<usize>>;

struct Explorer<'t> {
    trace: &'t Trace,
    trace_specific: bool,
    per_thread: Vec<Vec<usize>>,
    last_write: Vec<Option<usize>>,
    section_index: Vec<usize>,
    progress: Vec<usize>,
    holder: Vec<Option<usize>>,
    acquired: Vec<usize>,
    current_write: Vec<Option<usize>>,
    path: Vec<usize>,
}

enum Undo {
    Nothing,
    Write(usize, Option<usize>),
    Acquire(usize),
    Release(usize, usize),
}

impl<'t> Explorer<'t> {
    fn new(trace: &'t Trace, trace_specific: bool) -> Self {
        let mut per_thread = vec![Vec::new(); trace.num_threads];
        for e in &trace.events {
            per_thread[e.thread.index()].push(e.pos);
        }
        let mut section_index = vec![0; trace.len() + 1];
        let mut count = vec![0; trace.locks.len()];
        for cs in critical_sections(trace) {
            section_index[cs.acquire_pos] = count[cs.lock.index()];
            count[cs.lock.index()] += 1;
        }
        Explorer {
            trace,
            trace_specific,
            per_thread,
            last_write: last_writes(trace),
            section_index,
            progress: vec![0; trace.num_threads],
            holder: vec![None; trace.locks.len()],
            acquired: vec![0; trace.locks.len()],
            current_write: vec![None; trace.vars.len()],
            path: Vec::new(),
        }
    }

    fn next_of(&self, t: usize) -> Option<usize> {
        self.per_thread[t].get(self.progress[t]).copied()
    }

    fn enabled(&self, pos: usize) -> bool {
        match self.trace.event(pos).op {
            Op::Read(x) => {
                let w = self.last_write[pos - 1];
                w.is_some() && self.current_write[x.index()] == w
            }
            Op::Write(_) | Op::Release(_) => true,
            Op::Acquire(y) => {
                self.holder[y.index()].is_none()
                    && (!self.trace_specific || self.section_index[pos] == self.acquired[y.index()])
            }
        }
    }

    fn enabled_events(&self) -> Vec<usize> {
        (0..self.per_thread.len()).filter_map(|t| self.next_of(t)).filter(|&p| self.enabled(p)).collect()
    }

    fn apply(&mut self, pos: usize) -> Undo {
        let e = self.trace.event(pos);
        self.progress[e.thread.index()] += 1;
        self.path.push(pos);
        match e.op {
            Op::Write(x) => Undo::Write(x.index(), self.current_write[x.index()].replace(pos)),
            Op::Acquire(y) => {
                self.holder[y.index()] = Some(e.thread.index());
                self.acquired[y.index()] += 1;
                Undo::Acquire(y.index())
            }
            Op::Release(y) => {
                let h = self.holder[y.index()].take().expect("released lock is held");
                Undo::Release(y.index(), h)
            }
            Op::Read(_) => Undo::Nothing,
        }
    }

    fn undo(&mut self, pos: usize, u: Undo) {
        self.progress[self.trace.event(pos).thread.index()] -= 1;
        self.path.pop();
        match u {
            Undo::Write(x, old) => self.current_write[x] = old,
            Undo::Acquire(y) => {
                self.holder[y] = None;
                self.acquired[y] -= 1;
            }
            Undo::Release(y, h) => self.holder[y] = Some(h),
            Undo::Nothing => {}
        }
    }

    fn state_key(&self) -> Vec<u32> {
        let mut k: Vec<u32> = self.progress.iter().map(|&p| p as u32).collect();
        k.extend(self.current_write.iter().map(|w| w.map_or(0, |p| p as u32)));
        k
    }

    fn all_prefixes(&mut self, visit: &mut dyn FnMut(&[usize]) -> ControlFlow<()>) -> ControlFlow<()> {
        for f in self.enabled_events() {
            let u = self.apply(f);
            let flow = match visit(&self.path) {
                ControlFlow::Continue(()) => self.all_prefixes(visit),
                brk => brk,
            };
            self.undo(f, u);
            flow?;
        }
        ControlFlow::Continue(())
    }

    fn races(&mut self, last: Option<usize>, seen: &mut HashSet<Vec<u32>>, out: &mut RaceWitnesses) {
        let enabled = self.enabled_events();
        if let Some(e) = last {
            for &f in &enabled {
                if self.trace.conflicting(e, f) {
                    let key = race_key(self.trace, e, f);
                    out.entry(key).or_insert_with(|| {
                        let mut w = self.path.clone();
                        w.push(f);
                        w
                    });
                }
            }
        }
        if !seen.insert(self.state_key()) {
            return;
        }
        for f in enabled {
            let u = self.apply(f);
            self.races(Some(f), seen, out);
            self.undo(f, u);
        }
    }
}

/// Orientation for an adjacent conflicting pair `e` then `f`.
fn race_key(trace: &Trace, e: usize, f: usize) -> RaceKey {
    let kind = match (trace.event(e).op.is_write(), trace.event(f).op.is_write()) {
        (true, true) => RaceKind::WriteWrite,
        (true, false) => RaceKind::WriteRead,
        _ => RaceKind::ReadWrite,
    };
    RaceKey::new(kind, e, f)
}

fn prepare(trace: &Trace, cap: usize) -> Result<(), OracleError> {
    check_size(trace, cap)?;
    ensure_strict(trace)?;
    Ok(())
}

/// Calls `visit` on every non-empty correctly reordered prefix, without
/// merging prefixes that reach the same state.
pub fn enumerate_reorderings(
    trace: &Trace,
    opts: ReorderOptions,
    mut visit: impl FnMut(&[usize]) -> ControlFlow<()>,
) -> Result<(), OracleError> {
    prepare(trace, opts.cap)?;
    let mut ex = Explorer::new(trace, opts.trace_specific);
    let _ = ex.all_prefixes(&mut visit);
    Ok(())
}

/// Every conflicting pair that is adjacent in some correctly reordered prefix.
pub fn predictable_races(trace: &Trace, opts: ReorderOptions) -> Result<RaceWitnesses, OracleError> {
    prepare(trace, opts.cap)?;
    let mut ex = Explorer::new(trace, opts.trace_specific);
    let mut out = RaceWitnesses::new();
    ex.races(None, &mut HashSet::new(), &mut out);
    Ok(out)
}

pub fn all_predictable_races(trace: &Trace, cap: usize) -> Result<RaceWitnesses, OracleError> {
    predictable_races(trace, ReorderOptions { cap, trace_specific: false })
}

pub fn trace_specific_races(trace: &Trace, cap: usize) -> Result<RaceWitnesses, OracleError> {
    predictable_races(trace, ReorderOptions { cap, trace_specific: true })
}

/// Independent re-check that `seq` is a correctly reordered prefix of `trace`.
pub fn check_reordering(trace: &Trace, seq: &[usize], trace_specific: bool) -> Result<(), String> {
    let lw = last_writes(trace);
    let sections = critical_sections(trace);
    let mut placed = vec![false; trace.len() + 1];
    for (i, &p) in seq.iter().enumerate() {
        if p == 0 || p > trace.len() {
            return Err(format!("position {p} out of range"));
        }
        if placed[p] {
            return Err(format!("event {p} appears twice"));
        }
        let e = trace.event(p);
        if let Some(prev) = trace.events[..p - 1].iter().rev().find(|o| o.thread == e.thread) {
            if !placed[prev.pos] {
                return Err(format!("event {p} placed before its program-order predecessor {}", prev.pos));
            }
        }
        match e.op {
            Op::Read(x) => {
                let seen = seq[..i].iter().rev().find(|&&q| trace.event(q).op == Op::Write(x)).copied();
                if seen.is_none() || seen != lw[p - 1] {
                    return Err(format!("read {p} sees {seen:?} instead of {:?}", lw[p - 1]));
                }
            }
            Op::Acquire(y) => {
                for cs in sections.iter().filter(|c| c.lock == y && c.acquire_pos != p) {
                    if placed[cs.acquire_pos] && !cs.release_pos.is_some_and(|r| placed[r]) {
                        return Err(format!("acquire {p} while lock is held since {}", cs.acquire_pos));
                    }
                    if trace_specific && cs.acquire_pos < p && !placed[cs.acquire_pos] {
                        return Err(format!("acquire {p} precedes earlier section at {}", cs.acquire_pos));
                    }
                }
            }
            _ => {}
        }
        placed[p] = true;
    }
    Ok(())
}
