//! Seeded random generation of well-formed traces.
//!
//! Generated traces always satisfy lock discipline and the initial-write
//! property, and leave at most one critical section open at the end.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::trace::{OpKind, ThreadId, Trace, TraceBuilder};

#[derive(Debug, Clone, PartialEq)]
pub struct GenConfig {
    pub seed: u64,
    pub threads: usize,
    pub vars: usize,
    pub locks: usize,
    pub length: usize,
    /// Probability that a step is a lock operation.
    pub lock_density: f64,
    /// Probability that an access to an already written variable is a read.
    pub read_ratio: f64,
    pub allow_open_section: bool,
    /// Draw locations from this many shared labels instead of one per event.
    pub locations: Option<usize>,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            seed: 0,
            threads: 2,
            vars: 2,
            locks: 1,
            length: 10,
            lock_density: 0.3,
            read_ratio: 0.5,
            allow_open_section: true,
            locations: None,
        }
    }
}

impl GenConfig {
    /// Shape drawn from `seed` within the given maxima; at least two threads
    /// whenever `max_threads >= 2`.
    pub fn small(seed: u64, max_threads: usize, max_vars: usize, max_locks: usize, max_len: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x05ee_d0f5_ca1e);
        GenConfig {
            seed,
            threads: rng.gen_range(max_threads.min(2)..=max_threads.max(1)),
            vars: rng.gen_range(1..=max_vars.max(1)),
            locks: rng.gen_range(0..=max_locks),
            length: rng.gen_range(1..=max_len.max(1)),
            lock_density: rng.gen_range(0.1..0.6),
            read_ratio: rng.gen_range(0.3..0.7),
            allow_open_section: true,
            locations: None,
        }
    }

    /// Long-trace profile: eight threads, eight locks, sixteen variables.
    pub fn scaling(seed: u64) -> Self {
        GenConfig {
            seed,
            threads: 8,
            vars: 16,
            locks: 8,
            length: 0,
            lock_density: 0.2,
            read_ratio: 0.6,
            allow_open_section: true,
            locations: Some(400),
        }
    }
}

pub fn generate(cfg: &GenConfig) -> Trace {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let threads = cfg.threads.max(1);
    let mut b = TraceBuilder::default();
    let mut held: Vec<Vec<usize>> = vec![Vec::new(); threads];
    let mut holder: Vec<Option<usize>> = vec![None; cfg.locks];
    let mut written = vec![false; cfg.vars.max(1)];
    let slack = usize::from(cfg.allow_open_section);
    let var_names: Vec<String> = (0..written.len()).map(|i| format!("x{i}")).collect();
    let lock_names: Vec<String> = (0..cfg.locks).map(|i| format!("m{i}")).collect();

    for step in 0..cfg.length {
        let remaining = cfg.length - step;
        let outstanding: usize = held.iter().map(Vec::len).sum();
        let location = cfg.locations.map(|k| format!("loc{}", rng.gen_range(0..k.max(1))));
        let loc = location.as_deref();

        if outstanding > 0 && outstanding >= remaining + slack {
            let holders: Vec<usize> = (0..threads).filter(|&t| !held[t].is_empty()).collect();
            let t = holders[rng.gen_range(0..holders.len())];
            let i = rng.gen_range(0..held[t].len());
            let y = held[t].swap_remove(i);
            holder[y] = None;
            b.push(ThreadId(t as u32), OpKind::Release, &lock_names[y], loc);
            continue;
        }

        let t = rng.gen_range(0..threads);
        if cfg.locks > 0 && rng.gen_bool(cfg.lock_density.clamp(0.0, 1.0)) {
            let free: Vec<usize> = (0..cfg.locks).filter(|&y| holder[y].is_none()).collect();
            let can_acquire = !free.is_empty() && outstanding + 1 < remaining + slack;
            if !held[t].is_empty() && (!can_acquire || rng.gen_bool(0.5)) {
                let i = rng.gen_range(0..held[t].len());
                let y = held[t].swap_remove(i);
                holder[y] = None;
                b.push(ThreadId(t as u32), OpKind::Release, &lock_names[y], loc);
                continue;
            }
            if can_acquire {
                let y = free[rng.gen_range(0..free.len())];
                holder[y] = Some(t);
                held[t].push(y);
                b.push(ThreadId(t as u32), OpKind::Acquire, &lock_names[y], loc);
                continue;
            }
        }
        let x = rng.gen_range(0..written.len());
        let kind = if written[x] && rng.gen_bool(cfg.read_ratio.clamp(0.0, 1.0)) {
            OpKind::Read
        } else {
            written[x] = true;
            OpKind::Write
        };
        b.push(ThreadId(t as u32), kind, &var_names[x], loc);
    }
    b.finish()
}

/// Trace of exactly `events` events with the shape of `cfg`.
pub fn generate_scaling(cfg: &GenConfig, events: usize) -> Trace {
    generate(&GenConfig { length: events, ..cfg.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::{critical_sections, parse_trace, serialize_trace, validate, Op};
    use proptest::prelude::*;

    #[test]
    fn test_deterministic() {
        let cfg = GenConfig { seed: 42, threads: 3, locks: 2, length: 40, ..Default::default() };
        assert_eq!(generate(&cfg), generate(&cfg));
        let other = GenConfig { seed: 43, ..cfg.clone() };
        assert_ne!(generate(&cfg), generate(&other));
    }

    #[test]
    fn test_scaling_has_sync() {
        let t = generate_scaling(&GenConfig::scaling(7), 5000);
        assert_eq!(t.len(), 5000);
        let cs = critical_sections(&t);
        let lw = crate::trace::last_writes(&t);
        for chunk in 0..5 {
            let range = chunk * 1000 + 1..=(chunk + 1) * 1000;
            let cross_wrd = t.events.iter().filter(|e| range.contains(&e.pos)).any(|e| {
                matches!(e.op, Op::Read(_)) && lw[e.pos - 1].is_some_and(|w| t.event(w).thread != e.thread)
            });
            assert!(cross_wrd);
            let sections = cs.iter().filter(|c| range.contains(&c.acquire_pos)).count();
            assert!(sections >= 2);
        }
    }

    proptest! {
        #[test]
        fn prop_generated_traces_valid(seed in any::<u64>(), threads in 1usize..5, vars in 1usize..4,
                                       locks in 0usize..4, length in 0usize..60) {
            let cfg = GenConfig { seed, threads, vars, locks, length, ..Default::default() };
            let t = generate(&cfg);
            prop_assert_eq!(t.len(), length);
            prop_assert!(validate(&t).is_clean());
            let open = critical_sections(&t).iter().filter(|c| c.release_pos.is_none()).count();
            prop_assert!(open <= 1);
            prop_assert_eq!(parse_trace(&serialize_trace(&t)).unwrap(), t);
        }
    }
}
