//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

mod golden;

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use racepred::analysis::{analyze, Algorithm, AnalyzeOptions, Dedup};
use racepred::engine::{run_first_pass, EngineConfig};
use racepred::fuzz::{run_fuzz, FuzzConfig, FuzzSummary, Property};
use racepred::graph::RaceKey;
use racepred::oracle::{closure, RelationKind};
use racepred::trace::parse_trace;
use racepred::tracegen::{generate_scaling, GenConfig};

const FUZZ_CASES: usize = 10_000;
const MONOTONIC_CASES: usize = 1_000;

struct Outcome {
    name: &'static str,
    pass: bool,
    detail: String,
    elapsed: Duration,
}

fn fuzz_cfg(cases: usize) -> FuzzConfig {
    FuzzConfig { seed: 2024, cases, ..Default::default() }
}

fn summarize(summaries: &[FuzzSummary]) -> (bool, String) {
    let mut parts = Vec::new();
    let mut first = None;
    for s in summaries {
        parts.push(format!("{} {}/{} violations", s.property, s.failures.len(), s.cases));
        if first.is_none() {
            first = s.failures.first().map(|f| format!("{}: {f}", s.property));
        }
    }
    let pass = summaries.iter().all(|s| s.failures.is_empty());
    let mut detail = parts.join(", ");
    if !pass {
        let messages: Vec<&str> = summaries.iter().flat_map(|s| &s.failures).map(|f| f.message.as_str()).collect();
        let kinds: Vec<String> = ["write-write", "read-write", "write-read"]
            .iter()
            .map(|k| format!("{k} {}", messages.iter().filter(|m| m.contains(k)).count()))
            .collect();
        detail.push_str(&format!("; violating cases by pair kind: {}", kinds.join(", ")));
    }
    if let Some(f) = first {
        detail.push_str("\n    first violation, ");
        detail.push_str(f.trim_end());
    }
    (pass, detail)
}

fn fuzz_criterion(name: &'static str, props: &[Property], cases: usize) -> Outcome {
    let start = Instant::now();
    let summaries: Vec<FuzzSummary> = props.iter().map(|&p| run_fuzz(p, &fuzz_cfg(cases))).collect();
    let (pass, detail) = summarize(&summaries);
    Outcome { name, pass, detail, elapsed: start.elapsed() }
}

fn golden() -> Outcome {
    let start = Instant::now();
    let mismatches = golden::run_all();
    let elapsed = start.elapsed();
    let fast = elapsed < Duration::from_secs(1);
    let detail = format!(
        "{} traces, {} mismatches, {:.0} ms{}",
        golden::CASES.len(),
        mismatches.len(),
        elapsed.as_secs_f64() * 1e3,
        mismatches.iter().map(|m| format!("\n    {m}")).collect::<String>()
    );
    Outcome { name: "golden-suite", pass: mismatches.is_empty() && fast && golden::CASES.len() >= 12, detail, elapsed }
}

fn lattice() -> Outcome {
    let start = Instant::now();
    let mut out = fuzz_criterion(
        "relation-lattice",
        &[Property::PwrEqPwra, Property::PwrrSubset, Property::WdpSubset],
        FUZZ_CASES,
    );
    let strict = |file: &str, weaker: RelationKind| {
        let t = golden::load(file);
        let pwr = closure(&t, RelationKind::Pwr, 20).unwrap();
        let w = closure(&t, weaker, 20).unwrap();
        w.is_subset_of(&pwr) && !pwr.is_subset_of(&w)
    };
    let pwrr = strict("read_section_not_ordered", RelationKind::Pwrr);
    let wdp = strict("write_read_chain_orders_sections", RelationKind::Wdp);
    out.pass &= pwrr && wdp;
    out.detail.insert_str(0, &format!("strict pwrr witness {pwrr}, strict wdp witness {wdp}, "));
    out.elapsed = start.elapsed();
    out
}

fn limit_27_writes() -> Outcome {
    let start = Instant::now();
    let mut text = String::new();
    for i in 1..=27 {
        text.push_str(&format!("0,w,x,l{i}\n"));
    }
    text.push_str("1,w,x,l28\n");
    let t = parse_trace(&text).unwrap();
    let first = RaceKey::new(racepred::graph::RaceKind::WriteWrite, 1, 28);
    let keys = |algo| -> BTreeSet<RaceKey> {
        analyze(&t, &AnalyzeOptions::new(algo).with_dedup(Dedup::Event)).unwrap().candidates.iter().map(|c| c.key()).collect()
    };
    let limited = keys(Algorithm::PwrLEe);
    let full = keys(Algorithm::PwrEe);
    let pass = !limited.contains(&first) && full.contains(&first) && limited.len() == 26 && full.len() == 27;
    let detail = format!(
        "edge limit 25 reports {} pairs, first location missed: {}; unlimited reports {} pairs, first location found: {}",
        limited.len(),
        !limited.contains(&first),
        full.len(),
        full.contains(&first)
    );
    Outcome { name: "limit-27-writes", pass, detail, elapsed: start.elapsed() }
}

fn scaling() -> Outcome {
    let start = Instant::now();
    let cfg = GenConfig::scaling(99);
    let engine = EngineConfig::limited(25);
    let mut runs = Vec::new();
    for n in [100_000, 1_000_000] {
        let t = generate_scaling(&cfg, n);
        let t0 = Instant::now();
        let a = run_first_pass(&t, engine.clone()).unwrap();
        let found = a.finish().unwrap().len();
        runs.push((n, t0.elapsed(), a.stats().clone(), found));
    }
    let ratio = runs[1].1.as_secs_f64() / runs[0].1.as_secs_f64().max(1e-9);
    let bounded = runs.iter().all(|(_, _, s, _)| s.max_edges <= 25 && s.max_history <= 5);
    let elapsed = start.elapsed();
    let pass = ratio <= 15.0 && bounded && elapsed < Duration::from_secs(120);
    let detail = runs
        .iter()
        .map(|(n, d, s, found)| {
            format!(
                "{n} events {:.0} ms (edges {}, history {}, {found} candidates)",
                d.as_secs_f64() * 1e3,
                s.max_edges,
                s.max_history
            )
        })
        .collect::<Vec<_>>()
        .join("; ")
        + &format!("; ratio {ratio:.2}")
        + &format!("; total {:.1} s", elapsed.as_secs_f64());
    Outcome { name: "scaling", pass, detail, elapsed }
}

fn main() -> ExitCode {
    let criteria: Vec<fn() -> Outcome> = vec![
        golden,
        || fuzz_criterion("completeness", &[Property::Completeness], FUZZ_CASES),
        || fuzz_criterion("two-thread-soundness", &[Property::Soundness2], FUZZ_CASES),
        || fuzz_criterion("engine-vs-closure", &[Property::EngineVsClosure], FUZZ_CASES),
        lattice,
        limit_27_writes,
        || fuzz_criterion("monotonicity", &[Property::Monotonic], MONOTONIC_CASES),
        scaling,
        || fuzz_criterion("differential", &[Property::Differential], FUZZ_CASES),
    ];
    let mut failed = 0;
    for run in criteria {
        let o = run();
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        println!("{verdict} {} ({:.1} s): {}", o.name, o.elapsed.as_secs_f64(), o.detail);
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {} criteria, {failed} failed", 9);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
