//! Vector clocks and epochs.

use std::fmt;

use thiserror::Error;

use crate::trace::ThreadId;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ClockError {
    #[error("vector clock length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct VectorClock(Vec<u32>);

impl VectorClock {
    pub fn zero(n: usize) -> Self {
        VectorClock(vec![0; n])
    }

    /// Initial clock of thread `t`: zero everywhere except 1 at `t`.
    pub fn initial(n: usize, t: ThreadId) -> Self {
        let mut v = Self::zero(n);
        v.0[t.index()] = 1;
        v
    }

    pub fn from_vec(v: Vec<u32>) -> Self {
        VectorClock(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, t: ThreadId) -> u32 {
        self.0[t.index()]
    }

    pub fn set(&mut self, t: ThreadId, v: u32) {
        self.0[t.index()] = v;
    }

    pub fn increment(&mut self, t: ThreadId) {
        self.0[t.index()] += 1;
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }

    pub fn join(&self, other: &VectorClock) -> Result<VectorClock, ClockError> {
        let mut out = self.clone();
        out.join_in_place(other)?;
        Ok(out)
    }

    /// Pointwise max into `self`; returns whether any entry grew.
    pub fn join_in_place(&mut self, other: &VectorClock) -> Result<bool, ClockError> {
        if self.len() != other.len() {
            return Err(ClockError::LengthMismatch(self.len(), other.len()));
        }
        Ok(self.join_unchecked(other))
    }

    pub(crate) fn join_unchecked(&mut self, other: &VectorClock) -> bool {
        let mut changed = false;
        for (a, &b) in self.0.iter_mut().zip(&other.0) {
            if b > *a {
                *a = b;
                changed = true;
            }
        }
        changed
    }

    /// Pointwise `<=`.
    pub fn leq(&self, other: &VectorClock) -> Result<bool, ClockError> {
        if self.len() != other.len() {
            return Err(ClockError::LengthMismatch(self.len(), other.len()));
        }
        Ok(self.0.iter().zip(&other.0).all(|(a, b)| a <= b))
    }
}

/// Strict vector-clock order: pointwise `<=` and different somewhere.
pub fn vc_less(a: &VectorClock, b: &VectorClock) -> Result<bool, ClockError> {
    Ok(a.leq(b)? && a != b)
}

impl fmt::Display for VectorClock {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, "]")
    }
}

/// Thread id and that thread's clock entry when the event executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Epoch {
    pub thread: ThreadId,
    pub stamp: u32,
}

impl Epoch {
    pub fn new(thread: ThreadId, stamp: u32) -> Self {
        Epoch { thread, stamp }
    }

    /// The event has not been observed by a clock `v`.
    pub fn concurrent_with(self, v: &VectorClock) -> bool {
        self.stamp > v.get(self.thread)
    }

    /// The event has been observed by `v`. Equality counts: it arises only when
    /// `v` joined the write clock of exactly this event.
    pub fn ordered_before(self, v: &VectorClock) -> bool {
        !self.concurrent_with(v)
    }
}

impl fmt::Display for Epoch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.thread.0, self.stamp)
    }
}

/// Strict comparison `stamp < v[thread]`.
pub fn epoch_before(e: Epoch, v: &VectorClock) -> bool {
    e.stamp < v.get(e.thread)
}
