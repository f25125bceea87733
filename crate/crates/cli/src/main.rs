use std::collections::BTreeSet;
use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use racepred::analysis::{analyze, format_text, format_tsv, Algorithm, AnalyzeOptions, Dedup, Limit};
use racepred::compare::{compare_dir, format_race_keys, format_rows, format_table};
use racepred::engine::run_first_pass;
use racepred::fuzz::{run_fuzz, FuzzConfig, Property};
use racepred::graph::RaceKey;
use racepred::oracle::{
    all_predictable_races, closure, trace_specific_races, OracleError, RelationKind, DEFAULT_REORDER_CAP,
};
use racepred::trace::{ensure_well_formed, parse_trace, serialize_trace, Trace};
use racepred::tracegen::{generate, generate_scaling, GenConfig};

/// Writes to stdout; a closed pipe (`racepred ... | head`) ends the process quietly.
fn emit(s: &str) {
    if let Err(e) = io::stdout().lock().write_all(s.as_bytes()) {
        if e.kind() != io::ErrorKind::BrokenPipe {
            eprintln!("error: writing output: {e}");
            std::process::exit(2);
        }
        std::process::exit(0);
    }
}

macro_rules! out {
    ($($t:tt)*) => { emit(&format!($($t)*)) };
}

macro_rules! outln {
    ($($t:tt)*) => { emit(&format!("{}\n", format_args!($($t)*))) };
}

/// Predictive data-race detection over recorded traces.
#[derive(Parser)]
#[command(name = "racepred", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Report race candidates in a trace.
    Analyze(AnalyzeArgs),
    /// Exhaustive reference results for a small trace.
    Oracle(OracleArgs),
    /// Check properties on random traces.
    Fuzz(FuzzArgs),
    /// Candidate, false positive and false negative counts over a directory.
    Compare(CompareArgs),
    /// Time an analysis on generated traces of growing length.
    Bench(BenchArgs),
    /// Write a random well-formed trace.
    Gen(GenArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum DedupArg {
    Loc,
    Event,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Tsv,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Trace file, or `-` for standard input.
    #[arg(long)]
    trace: PathBuf,
    #[arg(long, default_value = "pwr-l-ee", value_parser = parse_algorithm)]
    algo: Algorithm,
    /// Edge bound per variable (number or `inf`); defaults to the algorithm's.
    #[arg(long, value_parser = parse_limit)]
    edge_limit: Option<Limit>,
    /// History bound per thread and lock (number or `inf`); defaults to the algorithm's.
    #[arg(long, value_parser = parse_limit)]
    history_limit: Option<Limit>,
    /// Keep read-read pairs instead of dropping them.
    #[arg(long)]
    no_rr_opt: bool,
    /// Share one history per lock instead of one per thread.
    #[arg(long)]
    global_history: bool,
    #[arg(long, value_enum, default_value = "loc")]
    dedup: DedupArg,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
    /// Print timing and retained-state sizes.
    #[arg(long)]
    stats: bool,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    trace: PathBuf,
    /// Only schedules that keep each lock's critical sections in trace order.
    #[arg(long)]
    trace_specific: bool,
    /// Print a witness reordering for each pair.
    #[arg(long)]
    witnesses: bool,
    /// Print the ordered pairs of a relation instead of races.
    #[arg(long, value_parser = parse_relation)]
    closure: Option<RelationKind>,
    /// Largest trace the oracle accepts.
    #[arg(long, default_value_t = DEFAULT_REORDER_CAP)]
    cap: usize,
    /// Print pairs as `kind posA posB` lines, the ground-truth file format.
    #[arg(long)]
    truth: bool,
}

#[derive(Args)]
struct FuzzArgs {
    /// Property to check, or `all`.
    #[arg(long, default_value = "completeness")]
    property: String,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 1000)]
    cases: usize,
    #[arg(long, default_value_t = 10)]
    max_events: usize,
    #[arg(long, default_value_t = 3)]
    max_threads: usize,
    #[arg(long, default_value_t = 2)]
    max_vars: usize,
    #[arg(long, default_value_t = 2)]
    max_locks: usize,
    /// Reverse the write-read comparison, to check that the harness notices.
    #[arg(long)]
    broken_engine: bool,
    /// Print at most this many failures per property.
    #[arg(long, default_value_t = 10)]
    show: usize,
}

#[derive(Args)]
struct CompareArgs {
    /// Directory of `.trace` files, optionally with `.races` truth files.
    #[arg(long)]
    dir: PathBuf,
    /// Comma-separated algorithms; all by default.
    #[arg(long, value_delimiter = ',', value_parser = parse_algorithm)]
    algo: Vec<Algorithm>,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

#[derive(Args)]
struct BenchArgs {
    /// Comma-separated trace lengths.
    #[arg(long, value_delimiter = ',', default_value = "100000,1000000")]
    max_events: Vec<usize>,
    #[arg(long, default_value = "pwr-l-ee", value_parser = parse_algorithm)]
    algo: Algorithm,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 3)]
    threads: usize,
    #[arg(long, default_value_t = 2)]
    vars: usize,
    #[arg(long, default_value_t = 2)]
    locks: usize,
    #[arg(long, default_value_t = 20)]
    max_events: usize,
    /// Use the long-trace profile (8 threads, 8 locks, 16 variables).
    #[arg(long)]
    scaling: bool,
    /// Output file; standard output by default.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_algorithm(s: &str) -> Result<Algorithm, String> {
    s.parse()
}

fn parse_limit(s: &str) -> Result<Limit, String> {
    s.parse()
}

fn parse_relation(s: &str) -> Result<RelationKind, String> {
    s.parse().map_err(|_| {
        let names: Vec<String> = RelationKind::ALL.iter().map(ToString::to_string).collect();
        format!("expected one of {}", names.join(", "))
    })
}

fn read_trace(path: &Path) -> Result<Trace> {
    let text = if path == Path::new("-") {
        let mut s = String::new();
        io::stdin().read_to_string(&mut s).context("reading standard input")?;
        s
    } else {
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?
    };
    parse_trace(&text).with_context(|| format!("parsing {}", path.display()))
}

fn analyze_cmd(args: AnalyzeArgs) -> Result<ExitCode> {
    let trace = read_trace(&args.trace)?;
    let opts = AnalyzeOptions {
        algorithm: args.algo,
        edge_limit: args.edge_limit,
        history_limit: args.history_limit,
        rr_optimization: !args.no_rr_opt,
        global_history: args.global_history,
        dedup: match args.dedup {
            DedupArg::Loc => Dedup::Location,
            DedupArg::Event => Dedup::Event,
        },
    };
    let report = analyze(&trace, &opts).with_context(|| format!("analyzing {}", args.trace.display()))?;
    let out = match args.format {
        Format::Text => format_text(&trace, &report, args.stats),
        Format::Tsv => {
            if args.stats {
                eprint!("{}", racepred::analysis::format_stats(&report));
            }
            format_tsv(&trace, &report)
        }
    };
    out!("{out}");
    Ok(ExitCode::SUCCESS)
}

fn print_keys(trace: &Trace, keys: &BTreeSet<RaceKey>, truth: bool) {
    if truth {
        out!("{}", format_race_keys(keys));
        return;
    }
    for k in keys {
        let a = trace.event(k.a);
        let b = trace.event(k.b);
        outln!("{k}: {} / {}", a.location, b.location);
    }
}

fn oracle_cmd(args: OracleArgs) -> Result<ExitCode> {
    let trace = read_trace(&args.trace)?;
    let refuse = |e: OracleError| -> anyhow::Error {
        match e {
            OracleError::TooLarge { events, cap } => {
                anyhow::anyhow!("refusing {}: {events} events exceeds the oracle cap of {cap}", args.trace.display())
            }
            other => other.into(),
        }
    };
    if let Some(kind) = args.closure {
        let r = closure(&trace, kind, args.cap).map_err(refuse)?;
        outln!("{kind}: {} ordered pairs", r.len());
        for (a, b) in r.pairs() {
            outln!("{a} < {b}");
        }
        return Ok(ExitCode::SUCCESS);
    }
    let races = if args.trace_specific {
        trace_specific_races(&trace, args.cap)
    } else {
        all_predictable_races(&trace, args.cap)
    }
    .map_err(refuse)?;
    if !args.truth {
        let label = if args.trace_specific { "trace-specific" } else { "predictable" };
        outln!("{label} races: {}", races.len());
    }
    let keys: BTreeSet<RaceKey> = races.keys().copied().collect();
    if args.witnesses && !args.truth {
        for (k, w) in &races {
            let seq: Vec<String> = w.iter().map(ToString::to_string).collect();
            outln!("{k}: witness [{}]", seq.join(", "));
        }
    } else {
        print_keys(&trace, &keys, args.truth);
    }
    Ok(ExitCode::SUCCESS)
}

fn fuzz_cmd(args: FuzzArgs) -> Result<ExitCode> {
    let props: Vec<Property> = if args.property == "all" {
        Property::ALL.to_vec()
    } else {
        vec![args.property.parse().map_err(anyhow::Error::msg)?]
    };
    let cfg = FuzzConfig {
        seed: args.seed,
        cases: args.cases,
        max_events: args.max_events,
        max_threads: args.max_threads,
        max_vars: args.max_vars,
        max_locks: args.max_locks,
        broken_engine: args.broken_engine,
    };
    let mut violations = 0;
    for p in props {
        let start = Instant::now();
        let s = run_fuzz(p, &cfg);
        let verdict = if s.failures.is_empty() { "ok" } else { "FAILED" };
        outln!(
            "{p}: {verdict}, {} of {} cases violate ({:.1} s)",
            s.failures.len(),
            s.cases,
            start.elapsed().as_secs_f64()
        );
        for f in s.failures.iter().take(args.show) {
            out!("{f}");
        }
        if s.failures.len() > args.show {
            outln!("... {} more", s.failures.len() - args.show);
        }
        violations += s.failures.len();
    }
    Ok(if violations == 0 { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn compare_cmd(args: CompareArgs) -> Result<ExitCode> {
    let algos = if args.algo.is_empty() { Algorithm::ALL.to_vec() } else { args.algo };
    let report = compare_dir(&args.dir, &algos)?;
    match args.format {
        Format::Text => out!("{}", format_table(&report)),
        Format::Tsv => out!("{}", format_rows(&report)),
    }
    Ok(if report.errors.is_empty() { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn bench_cmd(args: BenchArgs) -> Result<ExitCode> {
    let opts = AnalyzeOptions::new(args.algo).with_dedup(Dedup::Event);
    let cfg = opts.engine_config();
    outln!("events\tms\tcandidates\tmax_edges\tmax_history\tpeak_records");
    let mut first: Option<(usize, f64)> = None;
    for &n in &args.max_events {
        let trace = generate_scaling(&GenConfig::scaling(args.seed), n);
        let start = Instant::now();
        let (found, stats) = match &cfg {
            Some(cfg) => {
                let a = run_first_pass(&trace, cfg.clone())?;
                (a.finish()?.len(), Some(a.stats().clone()))
            }
            None => (analyze(&trace, &opts)?.candidates.len(), None),
        };
        let ms = start.elapsed().as_secs_f64() * 1e3;
        let (edges, hist, recs) = stats.map_or(("-".into(), "-".into(), "-".into()), |s| {
            (s.max_edges.to_string(), s.max_history.to_string(), s.peak_records.to_string())
        });
        outln!("{n}\t{ms:.1}\t{found}\t{edges}\t{hist}\t{recs}");
        match first {
            None => first = Some((n, ms)),
            Some((n0, ms0)) => {
                eprintln!("{n} vs {n0} events: time ratio {:.2}", ms / ms0.max(1e-9));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn gen_cmd(args: GenArgs) -> Result<ExitCode> {
    let trace = if args.scaling {
        generate_scaling(&GenConfig::scaling(args.seed), args.max_events)
    } else {
        generate(&GenConfig {
            seed: args.seed,
            threads: args.threads,
            vars: args.vars,
            locks: args.locks,
            length: args.max_events,
            ..Default::default()
        })
    };
    ensure_well_formed(&trace)?;
    let text = serialize_trace(&trace);
    match args.out {
        Some(path) => fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?,
        None => emit(&text),
    }
    Ok(ExitCode::SUCCESS)
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Analyze(a) => analyze_cmd(a),
        Command::Oracle(a) => oracle_cmd(a),
        Command::Fuzz(a) => fuzz_cmd(a),
        Command::Compare(a) => compare_cmd(a),
        Command::Bench(a) => bench_cmd(a),
        Command::Gen(a) => gen_cmd(a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
