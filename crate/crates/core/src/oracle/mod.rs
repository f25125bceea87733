//! Brute-force reference checks for small traces.

mod closure;
mod reorder;

use std::collections::BTreeSet;

use thiserror::Error;

pub use closure::{closure, OrderRelation, RelationKind};
pub use reorder::{
    all_predictable_races, check_reordering, enumerate_reorderings, predictable_races, trace_specific_races,
    RaceWitnesses, ReorderOptions,
};

use crate::graph::{RaceKey, RaceKind};
use crate::trace::{event_locksets, last_writes, Trace, TraceError};

pub const DEFAULT_CLOSURE_CAP: usize = 20;
pub const DEFAULT_REORDER_CAP: usize = 14;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("trace has {events} events, above the oracle limit of {cap}")]
    TooLarge { events: usize, cap: usize },
    #[error(transparent)]
    Trace(#[from] TraceError),
}

fn check_size(trace: &Trace, cap: usize) -> Result<(), OracleError> {
    if trace.len() > cap {
        return Err(OracleError::TooLarge { events: trace.len(), cap });
    }
    Ok(())
}

/// Write-read pairs `(e, f)` where `e` is the last write of read `f`, the two
/// hold no common lock, and no event lies strictly between them in the
/// release-ordered relation.
pub fn check_def33_wrd_pairs(trace: &Trace, cap: usize) -> Result<BTreeSet<RaceKey>, OracleError> {
    let r = closure(trace, RelationKind::Pwr, cap)?;
    Ok(write_read_pairs(trace, &r))
}

fn write_read_pairs(trace: &Trace, r: &OrderRelation) -> BTreeSet<RaceKey> {
    let ls = event_locksets(trace);
    let lw = last_writes(trace);
    let mut out = BTreeSet::new();
    for f in &trace.events {
        if !f.op.is_read() {
            continue;
        }
        let Some(e) = lw[f.pos - 1] else { continue };
        if trace.event(e).thread == f.thread || !ls[e - 1].is_disjoint(&ls[f.pos - 1]) || !r.ordered(e, f.pos) {
            continue;
        }
        let between = (e + 1..f.pos).any(|g| r.ordered(e, g) && r.ordered(g, f.pos));
        if !between {
            out.insert(RaceKey::new(RaceKind::WriteRead, e, f.pos));
        }
    }
    out
}

/// Conflicting pairs unordered by the relation with disjoint locksets, plus
/// the write-read pairs of [`check_def33_wrd_pairs`].
pub fn potential_pwr_races(trace: &Trace, cap: usize) -> Result<BTreeSet<RaceKey>, OracleError> {
    let r = closure(trace, RelationKind::Pwr, cap)?;
    let ls = event_locksets(trace);
    let mut out = write_read_pairs(trace, &r);
    for e in 1..=trace.len() {
        for f in e + 1..=trace.len() {
            if !trace.conflicting(e, f) || r.ordered(e, f) || !ls[e - 1].is_disjoint(&ls[f - 1]) {
                continue;
            }
            let key = match (trace.event(e).op.is_write(), trace.event(f).op.is_write()) {
                (true, true) => RaceKey::new(RaceKind::WriteWrite, e, f),
                (false, _) => RaceKey::new(RaceKind::ReadWrite, e, f),
                (true, false) => RaceKey::new(RaceKind::ReadWrite, f, e),
            };
            out.insert(key);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::parse_trace;
    use proptest::prelude::*;

    #[test]
    fn test_def33_pairs() {
        let t = parse_trace("1,w,x\n0,w,x\n0,acq,y\n0,rel,y\n1,acq,y\n1,rel,y\n1,r,x\n").unwrap();
        let got = check_def33_wrd_pairs(&t, 20).unwrap();
        assert_eq!(got.into_iter().collect::<Vec<_>>(), vec![RaceKey::new(RaceKind::WriteRead, 2, 7)]);
    }

    #[test]
    fn test_def33_excludes_intermediate() {
        // w2 reaches r8 through r5 and the release at 6.
        let t = parse_trace("0,acq,y\n0,w,z\n1,r,z\n1,w,x\n0,r,x\n0,rel,y\n2,acq,y\n2,r,x\n2,rel,y\n").unwrap();
        let got = check_def33_wrd_pairs(&t, 20).unwrap();
        assert!(!got.contains(&RaceKey::new(RaceKind::WriteRead, 4, 8)));
    }

    #[test]
    fn test_potential_excludes_unpredictable_protected() {
        let t = parse_trace(
            "0,acq,y\n0,w,z\n1,r,z\n1,w,x\n1,w,z\n0,r,z\n0,rel,y\n\
             2,acq,y\n2,w,z\n3,r,z\n3,w,x\n3,w,z\n2,r,z\n2,rel,y\n",
        )
        .unwrap();
        let pot = potential_pwr_races(&t, 20).unwrap();
        assert!(pot.contains(&RaceKey::new(RaceKind::WriteWrite, 4, 11)));
        let pred = all_predictable_races(&t, 14).unwrap();
        assert!(!pred.contains_key(&RaceKey::new(RaceKind::WriteWrite, 4, 11)));
        for k in pred.keys() {
            assert!(pot.contains(k), "{k} predictable but not potential");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]
        #[test]
        fn prop_predictable_within_potential(seed in 0u64..1_000_000) {
            let t = crate::tracegen::generate(&crate::tracegen::GenConfig::small(seed, 3, 2, 2, 10));
            let pred = all_predictable_races(&t, 14).unwrap();
            let pot = potential_pwr_races(&t, 20).unwrap();
            for (k, w) in &pred {
                prop_assert!(pot.contains(k), "{} not potential", k);
                prop_assert!(check_reordering(&t, w, false).is_ok());
            }
            let specific = trace_specific_races(&t, 14).unwrap();
            for k in specific.keys() {
                prop_assert!(pred.contains_key(k));
            }
        }

        #[test]
        fn prop_closures_irreflexive_and_forward(seed in 0u64..1_000_000) {
            let t = crate::tracegen::generate(&crate::tracegen::GenConfig::small(seed, 3, 2, 2, 12));
            for kind in RelationKind::ALL {
                let r = closure(&t, kind, 20).unwrap();
                for (a, b) in r.pairs() {
                    prop_assert!(a < b, "{} orders {} before {}", kind, a, b);
                }
            }
        }
    }
}
