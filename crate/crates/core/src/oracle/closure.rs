//! Ordering relations computed as explicit fixpoints over an event matrix.

use std::fmt;

use super::{check_size, OracleError};
use crate::trace::{critical_sections, ensure_well_formed, last_writes, Op, Trace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RelationKind {
    /// Program order, write-to-read, and release ordering triggered by any event of an earlier section.
    Pwr,
    /// As `Pwr`, but the trigger is the earlier section's acquire.
    Pwra,
    /// As `Pwr`, but release ordering only applies when the later event is a read.
    Pwrr,
    /// Program order, release-to-read for reads of a write in an earlier section,
    /// and release-to-release between sections with an ordered pair of events.
    Wdp,
    /// Program order and release-to-later-acquire.
    Hb,
    /// `Hb` plus write-to-read.
    Shb,
}

impl RelationKind {
    pub const ALL: [RelationKind; 6] =
        [RelationKind::Pwr, RelationKind::Pwra, RelationKind::Pwrr, RelationKind::Wdp, RelationKind::Hb, RelationKind::Shb];

    fn has_write_read(self) -> bool {
        matches!(self, RelationKind::Pwr | RelationKind::Pwra | RelationKind::Pwrr | RelationKind::Shb)
    }
}

impl fmt::Display for RelationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RelationKind::Pwr => "pwr",
            RelationKind::Pwra => "pwra",
            RelationKind::Pwrr => "pwrr",
            RelationKind::Wdp => "wdp",
            RelationKind::Hb => "hb",
            RelationKind::Shb => "shb",
        })
    }
}

impl std::str::FromStr for RelationKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RelationKind::ALL
            .into_iter()
            .find(|k| k.to_string() == s.to_ascii_lowercase())
            .ok_or_else(|| format!("unknown relation {s:?}"))
    }
}

/// Strict order over the events of one trace, indexed by 1-based position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrderRelation {
    n: usize,
    words: usize,
    bits: Vec<u64>,
}

impl OrderRelation {
    fn empty(n: usize) -> Self {
        let words = n.div_ceil(64).max(1);
        OrderRelation { n, words, bits: vec![0; n * words] }
    }

    fn row(&self, i: usize) -> &[u64] {
        &self.bits[i * self.words..(i + 1) * self.words]
    }

    fn test(&self, i: usize, j: usize) -> bool {
        self.row(i)[j / 64] >> (j % 64) & 1 == 1
    }

    fn set(&mut self, i: usize, j: usize) -> bool {
        let w = &mut self.bits[i * self.words + j / 64];
        let m = 1u64 << (j % 64);
        let fresh = *w & m == 0;
        *w |= m;
        fresh
    }

    fn close(&mut self) {
        for k in 0..self.n {
            for i in 0..self.n {
                if i != k && self.test(i, k) {
                    for w in 0..self.words {
                        let v = self.bits[k * self.words + w];
                        self.bits[i * self.words + w] |= v;
                    }
                }
            }
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Whether the event at position `a` is ordered before the one at `b`.
    pub fn ordered(&self, a: usize, b: usize) -> bool {
        self.test(a - 1, b - 1)
    }

    pub fn is_subset_of(&self, other: &OrderRelation) -> bool {
        self.n == other.n && self.bits.iter().zip(&other.bits).all(|(a, b)| a & !b == 0)
    }

    /// All ordered position pairs.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.n {
            for j in 0..self.n {
                if self.test(i, j) {
                    out.push((i + 1, j + 1));
                }
            }
        }
        out
    }
}

struct Section {
    acquire: usize,
    release: Option<usize>,
    members: Vec<usize>,
}

/// Computes the named relation on a well-formed trace of at most `cap` events.
pub fn closure(trace: &Trace, kind: RelationKind, cap: usize) -> Result<OrderRelation, OracleError> {
    check_size(trace, cap)?;
    ensure_well_formed(trace)?;
    let n = trace.len();
    let mut r = OrderRelation::empty(n);
    let lw = last_writes(trace);

    let mut prev = vec![None; trace.num_threads];
    for e in &trace.events {
        let i = e.pos - 1;
        if let Some(p) = prev[e.thread.index()].replace(i) {
            r.set(p, i);
        }
        if kind.has_write_read() && e.op.is_read() {
            if let Some(w) = lw[i] {
                r.set(w - 1, i);
            }
        }
    }

    let mut by_lock: Vec<Vec<Section>> = (0..trace.locks.len()).map(|_| Vec::new()).collect();
    for cs in critical_sections(trace) {
        let members = trace.events.iter().filter(|e| cs.contains(e)).map(|e| e.pos - 1).collect();
        by_lock[cs.lock.index()].push(Section {
            acquire: cs.acquire_pos - 1,
            release: cs.release_pos.map(|p| p - 1),
            members,
        });
    }

    if matches!(kind, RelationKind::Hb | RelationKind::Shb) {
        for secs in &by_lock {
            for (a, s1) in secs.iter().enumerate() {
                let Some(rel) = s1.release else { continue };
                for s2 in &secs[a + 1..] {
                    r.set(rel, s2.acquire);
                }
            }
        }
    }
    if kind == RelationKind::Wdp {
        for secs in &by_lock {
            for (a, s1) in secs.iter().enumerate() {
                let Some(rel) = s1.release else { continue };
                for s2 in &secs[a + 1..] {
                    for &f in &s2.members {
                        if let (Op::Read(_), Some(w)) = (trace.events[f].op, lw[f]) {
                            if s1.members.contains(&(w - 1)) {
                                r.set(rel, f);
                            }
                        }
                    }
                }
            }
        }
    }
    r.close();

    if matches!(kind, RelationKind::Hb | RelationKind::Shb) {
        return Ok(r);
    }
    loop {
        let mut changed = false;
        for secs in &by_lock {
            for (a, s1) in secs.iter().enumerate() {
                let Some(rel) = s1.release else { continue };
                let mut reach = vec![0u64; r.words];
                for &e in &s1.members {
                    for (acc, w) in reach.iter_mut().zip(r.row(e)) {
                        *acc |= w;
                    }
                }
                let hit = |f: usize| reach[f / 64] >> (f % 64) & 1 == 1;
                for s2 in &secs[a + 1..] {
                    match kind {
                        RelationKind::Pwr => {
                            for &f in &s2.members {
                                if hit(f) {
                                    changed |= r.set(rel, f);
                                }
                            }
                        }
                        RelationKind::Pwra => {
                            for &f in &s2.members {
                                if r.test(s1.acquire, f) {
                                    changed |= r.set(rel, f);
                                }
                            }
                        }
                        RelationKind::Pwrr => {
                            for &f in &s2.members {
                                if trace.events[f].op.is_read() && hit(f) {
                                    changed |= r.set(rel, f);
                                }
                            }
                        }
                        RelationKind::Wdp => {
                            if let Some(rel2) = s2.release {
                                if s2.members.iter().any(|&f| hit(f)) {
                                    changed |= r.set(rel, rel2);
                                }
                            }
                        }
                        RelationKind::Hb | RelationKind::Shb => unreachable!(),
                    }
                }
            }
        }
        if !changed {
            return Ok(r);
        }
        r.close();
    }
}
