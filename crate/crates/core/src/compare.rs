//! Precision comparison of the detector variants over a directory of traces.
//!
//! Every `*.trace` file is analyzed with each requested algorithm at event
//! granularity. Ground truth comes from a sibling `*.races` file when one
//! exists, otherwise from the reordering oracle when the trace is small
//! enough, otherwise there is none and only counts are reported.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use thiserror::Error;

use crate::analysis::{analyze, Algorithm, AnalyzeOptions, Dedup};
use crate::graph::{RaceKey, RaceKind};
use crate::oracle::{all_predictable_races, DEFAULT_REORDER_CAP};
use crate::trace::{ensure_strict, parse_trace, Trace};

pub const TRACE_EXT: &str = "trace";
pub const TRUTH_EXT: &str = "races";

#[derive(Debug, Error)]
pub enum CompareError {
    #[error("{0}: not a readable directory")]
    MissingDir(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TruthSource {
    File,
    Oracle,
    Unknown,
}

impl TruthSource {
    fn name(self) -> &'static str {
        match self {
            TruthSource::File => "file",
            TruthSource::Oracle => "oracle",
            TruthSource::Unknown => "-",
        }
    }
}

#[derive(Debug, Clone)]
pub struct CompareRow {
    pub file: String,
    pub algorithm: Algorithm,
    pub candidates: usize,
    pub second: usize,
    pub false_positives: Option<usize>,
    pub false_negatives: Option<usize>,
    pub truth: TruthSource,
    pub time_ms: f64,
}

#[derive(Debug, Clone)]
pub struct FileError {
    pub file: String,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct CompareReport {
    pub rows: Vec<CompareRow>,
    pub errors: Vec<FileError>,
}

impl CompareReport {
    pub fn rows_for(&self, algorithm: Algorithm) -> impl Iterator<Item = &CompareRow> {
        self.rows.iter().filter(move |r| r.algorithm == algorithm)
    }
}

/// Parses a truth file: one `kind posA posB` per line, `#` comments allowed.
pub fn parse_race_keys(text: &str) -> Result<BTreeSet<RaceKey>, String> {
    let mut out = BTreeSet::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [kind, a, b] = fields[..] else {
            return Err(format!("line {}: expected `kind posA posB`", i + 1));
        };
        let kind: RaceKind = kind.parse().map_err(|e| format!("line {}: {e}", i + 1))?;
        let pos = |s: &str| s.parse::<usize>().map_err(|_| format!("line {}: bad position {s:?}", i + 1));
        out.insert(RaceKey::new(kind, pos(a)?, pos(b)?));
    }
    Ok(out)
}

pub fn format_race_keys(keys: &BTreeSet<RaceKey>) -> String {
    keys.iter().map(|k| format!("{} {} {}\n", k.kind, k.a, k.b)).collect()
}

fn truth_for(path: &Path, trace: &Trace) -> Result<(TruthSource, Option<BTreeSet<RaceKey>>), String> {
    let truth_path = path.with_extension(TRUTH_EXT);
    if truth_path.exists() {
        let text = fs::read_to_string(&truth_path).map_err(|e| format!("{}: {e}", truth_path.display()))?;
        let keys = parse_race_keys(&text).map_err(|e| format!("{}: {e}", truth_path.display()))?;
        return Ok((TruthSource::File, Some(keys)));
    }
    if trace.len() <= DEFAULT_REORDER_CAP && ensure_strict(trace).is_ok() {
        let keys = all_predictable_races(trace, DEFAULT_REORDER_CAP).map_err(|e| e.to_string())?;
        return Ok((TruthSource::Oracle, Some(keys.into_keys().collect())));
    }
    Ok((TruthSource::Unknown, None))
}

fn compare_file(path: &Path, algorithms: &[Algorithm]) -> Result<Vec<CompareRow>, String> {
    let text = fs::read_to_string(path).map_err(|e| e.to_string())?;
    let trace = parse_trace(&text).map_err(|e| e.to_string())?;
    let (source, truth) = truth_for(path, &trace)?;
    let file = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let mut rows = Vec::new();
    for &algorithm in algorithms {
        let start = Instant::now();
        let report =
            analyze(&trace, &AnalyzeOptions::new(algorithm).with_dedup(Dedup::Event)).map_err(|e| e.to_string())?;
        let time_ms = start.elapsed().as_secs_f64() * 1e3;
        let got: BTreeSet<RaceKey> = report.candidates.iter().map(|c| c.key()).collect();
        let tally = report.tally();
        rows.push(CompareRow {
            file: file.clone(),
            algorithm,
            candidates: tally.total,
            second: tally.second,
            false_positives: truth.as_ref().map(|t| got.difference(t).count()),
            false_negatives: truth.as_ref().map(|t| t.difference(&got).count()),
            truth: source,
            time_ms,
        });
    }
    Ok(rows)
}

pub fn compare_dir(dir: &Path, algorithms: &[Algorithm]) -> Result<CompareReport, CompareError> {
    let entries = fs::read_dir(dir).map_err(|_| CompareError::MissingDir(dir.to_path_buf()))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == TRACE_EXT))
        .collect();
    files.sort();

    let results: Vec<(PathBuf, Result<Vec<CompareRow>, String>)> =
        files.into_par_iter().map(|p| (p.clone(), compare_file(&p, algorithms))).collect();
    let mut report = CompareReport::default();
    for (path, result) in results {
        match result {
            Ok(rows) => report.rows.extend(rows),
            Err(message) => report.errors.push(FileError {
                file: path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(),
                message,
            }),
        }
    }
    Ok(report)
}

fn opt(v: Option<usize>) -> String {
    v.map_or_else(|| "-".to_string(), |n| n.to_string())
}

/// Aligned table with a per-algorithm total line.
pub fn format_table(report: &CompareReport) -> String {
    let header = ["file", "algorithm", "races", "fp", "fn", "truth", "ms"];
    let mut lines: Vec<[String; 7]> = report
        .rows
        .iter()
        .map(|r| {
            [
                r.file.clone(),
                r.algorithm.to_string(),
                format!("{}({})", r.candidates, r.second),
                opt(r.false_positives),
                opt(r.false_negatives),
                r.truth.name().to_string(),
                format!("{:.2}", r.time_ms),
            ]
        })
        .collect();
    for algorithm in Algorithm::ALL {
        let rows: Vec<&CompareRow> = report.rows_for(algorithm).collect();
        if rows.is_empty() {
            continue;
        }
        let sum = |f: fn(&CompareRow) -> Option<usize>| rows.iter().filter_map(|r| f(r)).sum::<usize>();
        lines.push([
            "total".to_string(),
            algorithm.to_string(),
            format!("{}({})", rows.iter().map(|r| r.candidates).sum::<usize>(), rows.iter().map(|r| r.second).sum::<usize>()),
            sum(|r| r.false_positives).to_string(),
            sum(|r| r.false_negatives).to_string(),
            format!("{}/{}", rows.iter().filter(|r| r.truth != TruthSource::Unknown).count(), rows.len()),
            format!("{:.2}", rows.iter().map(|r| r.time_ms).sum::<f64>()),
        ]);
    }
    let mut width = header.map(str::len);
    for l in &lines {
        for (w, cell) in width.iter_mut().zip(l) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    let mut emit = |cells: &[&str]| {
        let row: Vec<String> = cells.iter().zip(width).map(|(c, w)| format!("{c:<w$}")).collect();
        let _ = writeln!(out, "{}", row.join("  ").trim_end());
    };
    emit(&header);
    for l in &lines {
        emit(&l.iter().map(String::as_str).collect::<Vec<_>>());
    }
    for e in &report.errors {
        let _ = writeln!(out, "error: {}: {}", e.file, e.message);
    }
    out
}

pub const ROWS_HEADER: &str = "file\talgorithm\tcandidates\tsecond\tfp\tfn\ttruth";

/// Tab-separated rows without timings, so output is stable for fixed input.
pub fn format_rows(report: &CompareReport) -> String {
    let mut out = String::from(ROWS_HEADER);
    out.push('\n');
    for r in &report.rows {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.file,
            r.algorithm,
            r.candidates,
            r.second,
            opt(r.false_positives),
            opt(r.false_negatives),
            r.truth.name()
        );
    }
    for e in &report.errors {
        let _ = writeln!(out, "{}\terror\t{}", e.file, e.message.replace(['\t', '\n'], " "));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn test_parse_race_keys() {
        let keys = parse_race_keys("# truth\nwrite-write 6 1\nwr 2 3\n\n").unwrap();
        let v: Vec<RaceKey> = keys.iter().copied().collect();
        assert_eq!(v, vec![RaceKey::new(RaceKind::WriteWrite, 1, 6), RaceKey::new(RaceKind::WriteRead, 2, 3)]);
        assert_eq!(parse_race_keys(&format_race_keys(&keys)).unwrap(), keys);
        assert!(parse_race_keys("write-write 1\n").is_err());
        assert!(parse_race_keys("racy 1 2\n").is_err());
    }

    #[test]
    fn test_missing_dir() {
        assert!(matches!(
            compare_dir(Path::new("/nonexistent/racepred"), &Algorithm::ALL),
            Err(CompareError::MissingDir(_))
        ));
    }
}
