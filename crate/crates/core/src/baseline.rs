//! Comparison detectors: happens-before, schedulable happens-before, and plain lockset.

use std::sync::Arc;

use crate::clock::Epoch;
use crate::engine::{run_first_pass, EngineConfig, SyncPolicy};
use crate::graph::{Pass, RaceCandidate, RaceKind};
use crate::trace::{ensure_well_formed, event_locksets, last_writes, Trace, TraceError};

/// Happens-before: conflicting accesses not ordered by program order and
/// release-to-acquire. Read-from dependencies are ignored.
pub fn hb_config() -> EngineConfig {
    EngineConfig {
        policy: SyncPolicy::Hb,
        edge_limit: Some(0),
        merged: true,
        report_write_read: false,
        ..Default::default()
    }
}

/// Happens-before with write-to-read edges. `edge_limit` of `Some(0)` is the
/// plain streaming detector; larger limits also report pairs reached through
/// retained edges.
pub fn shb_config(edge_limit: Option<usize>) -> EngineConfig {
    EngineConfig { policy: SyncPolicy::Shb, edge_limit, merged: true, ..Default::default() }
}

pub fn run_hb(trace: &Trace) -> Result<Vec<RaceCandidate>, TraceError> {
    finish(trace, hb_config())
}

pub fn run_shb(trace: &Trace, edge_limit: Option<usize>) -> Result<Vec<RaceCandidate>, TraceError> {
    finish(trace, shb_config(edge_limit))
}

fn finish(trace: &Trace, cfg: EngineConfig) -> Result<Vec<RaceCandidate>, TraceError> {
    let a = run_first_pass(trace, cfg)?;
    Ok(a.finish().expect("merged mode keeps every record it needs"))
}

/// Every conflicting pair whose locksets are disjoint, in position order.
pub fn run_lockset(trace: &Trace) -> Result<Vec<RaceCandidate>, TraceError> {
    ensure_well_formed(trace)?;
    let ls = event_locksets(trace);
    let lw = last_writes(trace);
    let mut stamp = vec![0u32; trace.num_threads];
    let epochs: Vec<Epoch> = trace
        .events
        .iter()
        .map(|e| {
            stamp[e.thread.index()] += 1;
            Epoch::new(e.thread, stamp[e.thread.index()])
        })
        .collect();
    let mut out = Vec::new();
    for e in &trace.events {
        for f in &trace.events[e.pos..] {
            if !trace.conflicting(e.pos, f.pos) || !ls[e.pos - 1].is_disjoint(&ls[f.pos - 1]) {
                continue;
            }
            let (kind, a, b) = match (e.op.is_write(), f.op.is_write()) {
                (true, true) => (RaceKind::WriteWrite, e, f),
                (true, false) if lw[f.pos - 1] == Some(e.pos) => (RaceKind::WriteRead, e, f),
                (true, false) => (RaceKind::ReadWrite, f, e),
                _ => (RaceKind::ReadWrite, e, f),
            };
            out.push(RaceCandidate {
                kind,
                var: e.op.var().expect("access"),
                a: epochs[a.pos - 1],
                b: epochs[b.pos - 1],
                pos_a: a.pos,
                pos_b: b.pos,
                loc_a: Arc::clone(&a.location),
                loc_b: Arc::clone(&b.location),
                pass: Pass::First,
            });
        }
    }
    Ok(out)
}
