//! Frozen expectations for the bundled example traces.
//!
//! Sets are at event granularity, written as kind(posA,posB) with WW for
//! write-write, RW for read-write (read first) and WR for write-read.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use racepred::analysis::{analyze, Algorithm, AnalyzeOptions, Dedup};
use racepred::graph::{RaceKey, RaceKind};
use racepred::oracle::{all_predictable_races, trace_specific_races, DEFAULT_REORDER_CAP};
use racepred::trace::{parse_trace, Trace};

pub struct Case {
    pub file: &'static str,
    pub expect: &'static [(&'static str, &'static str)],
}

/// Location-deduplicated tallies and report lines for selected runs.
pub struct LocationCase {
    pub file: &'static str,
    pub algorithm: Algorithm,
    pub tally: &'static str,
    /// `locA-locB pass` per reported race, in report order.
    pub reports: &'static [&'static str],
}

pub const CASES: &[Case] = &[
    Case {
        file: "both_writes_locked",
        expect: &[
            ("pwr-ee", ""),
            ("pwr-l-ee", ""),
            ("pwr-l", ""),
            ("shb-l-ee", ""),
            ("shb", ""),
            ("hb", ""),
            ("lockset", ""),
            ("predictable", ""),
            ("trace-specific", ""),
        ],
    },
    Case {
        file: "edges_reach_earlier_writes",
        expect: &[
            ("pwr-ee", "WW(1,3) WW(2,3) RW(4,1) RW(4,2)"),
            ("pwr-l-ee", "WW(1,3) WW(2,3) RW(4,1) RW(4,2)"),
            ("pwr-l", "WW(2,3) RW(4,2)"),
            ("shb-l-ee", "WW(1,3) WW(2,3) RW(4,1) RW(4,2)"),
            ("shb", "WW(2,3) RW(4,2)"),
            ("hb", "WW(2,3) RW(4,2)"),
            ("lockset", "WW(1,3) WW(2,3) RW(4,1) RW(4,2)"),
            ("predictable", "WW(1,3) WW(2,3) RW(4,1) RW(4,2)"),
            ("trace-specific", "WW(1,3) WW(2,3) RW(4,1) RW(4,2)"),
        ],
    },
    Case {
        file: "filter_keeps_expanding",
        expect: &[
            ("pwr-ee", "WW(1,7) WW(5,7)"),
            ("pwr-l-ee", "WW(1,7) WW(5,7)"),
            ("pwr-l", "WW(5,7)"),
            ("shb-l-ee", "WW(5,7)"),
            ("shb", "WW(5,7)"),
            ("hb", "WW(5,7)"),
            ("lockset", "WW(1,7) WW(5,7)"),
            ("predictable", "WW(1,7) WW(5,7)"),
            ("trace-specific", "WW(5,7)"),
        ],
    },
    Case {
        file: "location_dedup",
        expect: &[
            ("pwr-ee", "WW(1,3) WW(2,3) WW(3,4)"),
            ("pwr-l-ee", "WW(1,3) WW(2,3) WW(3,4)"),
            ("pwr-l", "WW(2,3) WW(3,4)"),
            ("shb-l-ee", "WW(1,3) WW(2,3) WW(3,4)"),
            ("shb", "WW(2,3) WW(3,4)"),
            ("hb", "WW(2,3) WW(3,4)"),
            ("lockset", "WW(1,3) WW(2,3) WW(3,4)"),
            ("predictable", "WW(1,3) WW(2,3) WW(3,4)"),
            ("trace-specific", "WW(1,3) WW(2,3) WW(3,4)"),
        ],
    },
    Case {
        file: "locked_read_unsound",
        expect: &[
            ("pwr-ee", "WW(4,9) WR(1,3)"),
            ("pwr-l-ee", "WW(4,9) WR(1,3)"),
            ("pwr-l", "WW(4,9) WR(1,3)"),
            ("shb-l-ee", "WR(1,3)"),
            ("shb", "WR(1,3)"),
            ("hb", "WR(1,3)"),
            ("lockset", "WW(4,9) WR(1,3)"),
            ("predictable", "WR(1,3)"),
            ("trace-specific", "WR(1,3)"),
        ],
    },
    Case {
        file: "protected_by_write_reads",
        expect: &[
            ("pwr-ee", "WW(4,11) WR(2,3) WR(5,6) WR(9,10) WR(12,13)"),
            ("pwr-l-ee", "WW(4,11) WR(2,3) WR(5,6) WR(9,10) WR(12,13)"),
            ("pwr-l", "WW(4,11) WR(2,3) WR(5,6) WR(9,10) WR(12,13)"),
            ("shb-l-ee", "WR(2,3) WR(5,6) WR(9,10) WR(12,13)"),
            ("shb", "WR(2,3) WR(5,6) WR(9,10) WR(12,13)"),
            ("hb", "WW(4,11) WR(2,3) WR(5,6) WR(9,10) WR(12,13)"),
            ("lockset", "WW(4,11) WR(2,3) WR(5,6) WR(9,10) WR(12,13)"),
            ("predictable", "WR(2,3) WR(5,6) WR(9,10) WR(12,13)"),
            ("trace-specific", "WR(2,3) WR(5,6) WR(9,10) WR(12,13)"),
        ],
    },
    Case {
        file: "race_only_in_prefix",
        expect: &[
            ("pwr-ee", "WW(1,6)"),
            ("pwr-l-ee", "WW(1,6)"),
            ("pwr-l", "WW(1,6)"),
            ("shb-l-ee", ""),
            ("shb", ""),
            ("hb", ""),
            ("lockset", "WW(1,6)"),
            ("predictable", "WW(1,6)"),
            ("trace-specific", ""),
        ],
    },
    Case {
        file: "read_orders_later_writes",
        expect: &[
            ("pwr-ee", "WW(1,3) WR(3,4)"),
            ("pwr-l-ee", "WW(1,3) WR(3,4)"),
            ("pwr-l", "WW(1,3) WR(3,4)"),
            ("shb-l-ee", "WW(1,3) WR(3,4)"),
            ("shb", "WW(1,3) WR(3,4)"),
            ("hb", "WW(1,3) WW(2,5) WR(3,4)"),
            ("lockset", "WW(1,3) WW(2,5) WR(3,4)"),
            ("predictable", "WW(1,3) WR(3,4)"),
            ("trace-specific", "WW(1,3) WR(3,4)"),
        ],
    },
    Case {
        file: "read_read_pairs",
        expect: &[
            ("pwr-ee", "WW(1,3) RW(2,3) RW(4,1) RW(5,1) WR(3,5)"),
            ("pwr-l-ee", "WW(1,3) RW(2,3) RW(4,1) RW(5,1) WR(3,5)"),
            ("pwr-l", "WW(1,3) RW(2,3) RW(4,1) RW(5,1) WR(3,5)"),
            ("shb-l-ee", "WW(1,3) RW(2,3) RW(4,1) RW(5,1) WR(3,5)"),
            ("shb", "WW(1,3) RW(2,3) RW(4,1) RW(5,1) WR(3,5)"),
            ("hb", "WW(1,3) RW(2,3) RW(4,1) RW(5,1) WR(3,5)"),
            ("lockset", "WW(1,3) RW(2,3) RW(4,1) RW(5,1) WR(3,5)"),
            ("predictable", "WW(1,3) RW(2,3) RW(4,1) RW(5,1) WR(3,5)"),
            ("trace-specific", "WW(1,3) RW(2,3) RW(4,1) RW(5,1) WR(3,5)"),
        ],
    },
    Case {
        file: "read_section_not_ordered",
        expect: &[
            ("pwr-ee", "WR(2,5)"),
            ("pwr-l-ee", "WR(2,5)"),
            ("pwr-l", "WR(2,5)"),
            ("shb-l-ee", "WR(2,5)"),
            ("shb", "WR(2,5)"),
            ("hb", "WR(2,5)"),
            ("lockset", "WW(3,9) WR(2,5)"),
            ("predictable", "WR(2,5)"),
            ("trace-specific", "WR(2,5)"),
        ],
    },
    Case {
        file: "read_write_edges_needed",
        expect: &[
            ("pwr-ee", "WW(1,7) WW(6,7) RW(2,7) RW(5,7) WR(3,4)"),
            ("pwr-l-ee", "WW(1,7) WW(6,7) RW(2,7) RW(5,7) WR(3,4)"),
            ("pwr-l", "WW(6,7) WR(3,4)"),
            ("shb-l-ee", "WW(1,7) WW(6,7) RW(2,7) RW(5,7) WR(3,4)"),
            ("shb", "WW(6,7) WR(3,4)"),
            ("hb", "WW(1,6) WW(1,7) WW(6,7) RW(2,6) RW(2,7) WR(1,5) WR(3,4)"),
            ("lockset", "WW(1,6) WW(1,7) WW(6,7) RW(2,6) RW(2,7) RW(5,7) WR(1,5) WR(3,4)"),
            ("predictable", "WW(1,7) WW(6,7) RW(2,7) RW(5,7) WR(3,4)"),
            ("trace-specific", "WW(1,7) WW(6,7) RW(2,7) RW(5,7) WR(3,4)"),
        ],
    },
    Case {
        file: "read_write_sections",
        expect: &[
            ("pwr-ee", "WW(1,7) WW(4,9)"),
            ("pwr-l-ee", "WW(1,7) WW(4,9)"),
            ("pwr-l", "WW(1,7) WW(4,9)"),
            ("shb-l-ee", ""),
            ("shb", ""),
            ("hb", ""),
            ("lockset", "WW(1,7) WW(4,9)"),
            ("predictable", "WW(1,7) WW(4,9)"),
            ("trace-specific", ""),
        ],
    },
    Case {
        file: "release_orders_read",
        expect: &[
            ("pwr-ee", ""),
            ("pwr-l-ee", ""),
            ("pwr-l", ""),
            ("shb-l-ee", ""),
            ("shb", ""),
            ("hb", ""),
            ("lockset", "WW(1,8)"),
            ("predictable", ""),
            ("trace-specific", ""),
        ],
    },
    Case {
        file: "sections_in_trace_order",
        expect: &[
            ("pwr-ee", "WW(1,5)"),
            ("pwr-l-ee", "WW(1,5)"),
            ("pwr-l", "WW(1,5)"),
            ("shb-l-ee", ""),
            ("shb", ""),
            ("hb", ""),
            ("lockset", "WW(1,5)"),
            ("predictable", "WW(1,5)"),
            ("trace-specific", ""),
        ],
    },
    Case {
        file: "swap_sections_second_pass",
        expect: &[
            ("pwr-ee", "WW(1,6)"),
            ("pwr-l-ee", "WW(1,6)"),
            ("pwr-l", ""),
            ("shb-l-ee", ""),
            ("shb", ""),
            ("hb", ""),
            ("lockset", "WW(1,6)"),
            ("predictable", "WW(1,6)"),
            ("trace-specific", ""),
        ],
    },
    Case {
        file: "three_threads_no_locks",
        expect: &[
            ("pwr-ee", "WW(1,2) WW(1,5) RW(3,1) RW(3,5) RW(4,1) WR(2,4)"),
            ("pwr-l-ee", "WW(1,2) WW(1,5) RW(3,1) RW(3,5) RW(4,1) WR(2,4)"),
            ("pwr-l", "WW(1,2) WW(1,5) RW(3,1) RW(3,5) RW(4,1) WR(2,4)"),
            ("shb-l-ee", "WW(1,2) WW(1,5) RW(3,1) RW(3,5) RW(4,1) WR(2,4)"),
            ("shb", "WW(1,2) WW(1,5) RW(3,1) RW(3,5) RW(4,1) WR(2,4)"),
            ("hb", "WW(1,2) WW(1,5) WW(2,5) RW(3,1) RW(3,5) RW(4,1) WR(2,4)"),
            ("lockset", "WW(1,2) WW(1,5) WW(2,5) RW(3,1) RW(3,5) RW(4,1) WR(2,4)"),
            ("predictable", "WW(1,2) WW(1,5) RW(3,1) RW(3,5) RW(4,1) WR(2,4)"),
            ("trace-specific", "WW(1,2) WW(1,5) RW(3,1) RW(3,5) RW(4,1) WR(2,4)"),
        ],
    },
    Case {
        file: "write_read_chain_filtered",
        expect: &[
            ("pwr-ee", "WW(5,7) WR(2,3) WR(4,6)"),
            ("pwr-l-ee", "WW(5,7) WR(2,3) WR(4,6)"),
            ("pwr-l", "WW(5,7) WR(2,3) WR(4,6)"),
            ("shb-l-ee", "WW(5,7) WR(2,3) WR(4,6)"),
            ("shb", "WW(5,7) WR(2,3) WR(4,6)"),
            ("hb", "WW(1,5) WW(1,7) WW(5,7) WR(2,3) WR(4,6)"),
            ("lockset", "WW(1,5) WW(1,7) WW(5,7) WR(2,3) WR(4,6)"),
            ("predictable", "WW(5,7) WR(2,3) WR(4,6)"),
            ("trace-specific", "WW(5,7) WR(2,3) WR(4,6)"),
        ],
    },
    Case {
        file: "write_read_chain_orders_sections",
        expect: &[
            ("pwr-ee", "WR(2,5) WR(6,8)"),
            ("pwr-l-ee", "WR(2,5) WR(6,8)"),
            ("pwr-l", "WR(2,5) WR(6,8)"),
            ("shb-l-ee", "WR(2,5) WR(6,8)"),
            ("shb", "WR(2,5) WR(6,8)"),
            ("hb", "WR(2,5) WR(6,8)"),
            ("lockset", "WW(3,10) WR(2,5) WR(6,8)"),
            ("predictable", "WR(2,5) WR(6,8)"),
            ("trace-specific", "WR(2,5) WR(6,8)"),
        ],
    },
    Case {
        file: "write_read_other_schedule",
        expect: &[
            ("pwr-ee", "WW(1,2) WR(2,7)"),
            ("pwr-l-ee", "WW(1,2) WR(2,7)"),
            ("pwr-l", "WW(1,2) WR(2,7)"),
            ("shb-l-ee", "WW(1,2)"),
            ("shb", "WW(1,2)"),
            ("hb", "WW(1,2)"),
            ("lockset", "WW(1,2) WR(2,7)"),
            ("predictable", "WW(1,2) WR(2,7)"),
            ("trace-specific", "WW(1,2)"),
        ],
    },
    Case {
        file: "write_read_skips_history",
        expect: &[
            ("pwr-ee", "WR(4,5)"),
            ("pwr-l-ee", "WR(4,5)"),
            ("pwr-l", "WR(4,5)"),
            ("shb-l-ee", "WR(4,5)"),
            ("shb", "WR(4,5)"),
            ("hb", "WR(4,5)"),
            ("lockset", "WR(4,5)"),
            ("predictable", "WR(4,5)"),
            ("trace-specific", "WR(4,5)"),
        ],
    },
];

pub const LOCATION_CASES: &[LocationCase] = &[
    LocationCase {
        file: "location_dedup",
        algorithm: Algorithm::PwrEe,
        tally: "2(1)",
        reports: &["b-c first", "a-c second"],
    },
    LocationCase {
        file: "location_dedup",
        algorithm: Algorithm::PwrL,
        tally: "2(0)",
        reports: &["b-c first", "c-a first"],
    },
    LocationCase {
        file: "swap_sections_second_pass",
        algorithm: Algorithm::PwrEe,
        tally: "1(1)",
        reports: &["L1-L6 second"],
    },
    LocationCase {
        file: "swap_sections_second_pass",
        algorithm: Algorithm::Hb,
        tally: "0(0)",
        reports: &[],
    },
    LocationCase {
        file: "filter_keeps_expanding",
        algorithm: Algorithm::PwrEe,
        tally: "2(1)",
        reports: &["L5-L7 first", "L1-L7 second"],
    },
];

pub fn traces_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("traces")
}

pub fn load(file: &str) -> Trace {
    let path = traces_dir().join(format!("{file}.trace"));
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    parse_trace(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

pub fn render(keys: &BTreeSet<RaceKey>) -> String {
    keys.iter()
        .map(|k| {
            let kind = match k.kind {
                RaceKind::WriteWrite => "WW",
                RaceKind::ReadWrite => "RW",
                RaceKind::WriteRead => "WR",
            };
            format!("{kind}({},{})", k.a, k.b)
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn actual(trace: &Trace, what: &str) -> String {
    let keys: BTreeSet<RaceKey> = match what {
        "predictable" => all_predictable_races(trace, DEFAULT_REORDER_CAP).unwrap().into_keys().collect(),
        "trace-specific" => trace_specific_races(trace, DEFAULT_REORDER_CAP).unwrap().into_keys().collect(),
        algo => {
            let algorithm: Algorithm = algo.parse().unwrap();
            let report = analyze(trace, &AnalyzeOptions::new(algorithm).with_dedup(Dedup::Event)).unwrap();
            report.candidates.iter().map(|c| c.key()).collect()
        }
    };
    render(&keys)
}

/// Mismatches of one case, as human-readable lines.
pub fn check_case(case: &Case) -> Vec<String> {
    let trace = load(case.file);
    case.expect
        .iter()
        .filter_map(|&(what, want)| {
            let got = actual(&trace, what);
            (got != want).then(|| format!("{} {what}: expected [{want}], got [{got}]", case.file))
        })
        .collect()
}

pub fn check_location_case(case: &LocationCase) -> Vec<String> {
    let trace = load(case.file);
    let report = analyze(&trace, &AnalyzeOptions::new(case.algorithm)).unwrap();
    let mut out = Vec::new();
    let tally = report.tally().to_string();
    if tally != case.tally {
        out.push(format!("{} {}: tally {tally}, expected {}", case.file, case.algorithm, case.tally));
    }
    let lines: Vec<String> =
        report.candidates.iter().map(|c| format!("{}-{} {}", c.loc_a, c.loc_b, c.pass)).collect();
    if lines != case.reports {
        out.push(format!("{} {}: reports {lines:?}, expected {:?}", case.file, case.algorithm, case.reports));
    }
    out
}

/// Runs every golden check; returns all mismatches.
pub fn run_all() -> Vec<String> {
    let mut out: Vec<String> = CASES.iter().flat_map(check_case).collect();
    out.extend(LOCATION_CASES.iter().flat_map(check_location_case));
    out
}
