//! `nsd`: NSD values, synthetic drift streams, stream detection and the
//! calibration / benchmark suites.
//!
//! Exit codes: 0 success, 2 usage, 3 I/O, 4 malformed input data.

mod config;

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nsd_core::datagen::{
    generate_stream, read_csv, read_drift_indices, write_csv, write_drift_indices, Distribution, ScenarioConfig,
    SearchMode, StreamKind, StreamSpec,
};
use nsd_core::harness::{
    benchmark_cases, preset, run_calibration, run_drift_suite, run_efficiency, write_drift_csv, write_efficiency_csv,
    DriftSuiteConfig, DEFAULT_SEED, PRESET_NAMES,
};
use nsd_core::stream_eval::{run_stream, score, summary_table, BatchRecord, WindowConfig};
use nsd_core::{nsd, DetectorConfig, Error, RealVector};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "nsd", version, about = "Neighbor-searching discrepancy and kNN concept drift detection")]
#[command(after_help = "Any subcommand also takes --config FILE: `key = value` lines named like the long flags; \
                        flags given on the command line override the file.")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print NSD(k1, k2), the regularized incomplete beta I_0.5(k1, k2).
    #[command(args_override_self = true)]
    Nsd { k1: u64, k2: u64 },
    /// Write a synthetic labeled stream as CSV plus a `<out>.drifts` sidecar.
    #[command(args_override_self = true)]
    Generate(GenerateArgs),
    /// Run batch drift detection over a CSV stream and write a JSONL report.
    #[command(args_override_self = true)]
    Detect(DetectArgs),
    /// Monte Carlo calibration of a preset or custom scenario.
    #[command(args_override_self = true)]
    Simulate(SimulateArgs),
    /// Drift benchmark or efficiency measurements.
    #[command(args_override_self = true)]
    Bench(BenchArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// linear-shift, linear-rotate or normal-shift.
    #[arg(long)]
    kind: StreamKind,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    #[arg(long)]
    delta: f64,
    #[arg(long, default_value_t = 20_000)]
    length: usize,
    /// Instances between concept switches.
    #[arg(long, default_value_t = 2_000)]
    period: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DetectArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 1000)]
    window: usize,
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[arg(long, default_value_t = 0.05)]
    theta: f64,
    /// JSONL report, one record per batch.
    #[arg(long)]
    out: PathBuf,
    /// Also write a fixed-width summary table here.
    #[arg(long)]
    table: Option<PathBuf>,
    /// Drift-index sidecar; when given, the run is scored against it.
    #[arg(long)]
    drifts: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Preset name; see --list. Custom flags below override its fields.
    #[arg(long)]
    scenario: Option<String>,
    /// List preset names and exit.
    #[arg(long)]
    list: bool,
    /// uniform, normal:MU:SIGMA, gamma:SHAPE:SCALE or poisson:LAMBDA.
    #[arg(long)]
    distribution: Option<String>,
    #[arg(long)]
    dim: Option<usize>,
    /// Points per sample.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    /// Starting points, e.g. "0.5,0.5;0.6,0.5".
    #[arg(long)]
    starts: Option<String>,
    /// Comma-separated thresholds c of P(K2 < c).
    #[arg(long)]
    thresholds: Option<String>,
    /// Claim k fresh neighbors per starting point instead of searching independently.
    #[arg(long)]
    stepped: bool,
    #[arg(long)]
    nominal_k1: Option<u64>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Per-repetition CSV trace.
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON summary.
    #[arg(long)]
    summary: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum Suite {
    Drift,
    Efficiency,
}

#[derive(Args)]
struct BenchArgs {
    suite: Suite,
    #[arg(long)]
    out: PathBuf,
    /// JSON summary (drift suite).
    #[arg(long)]
    summary: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    seeds: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long, default_value_t = 20_000)]
    length: usize,
    #[arg(long, default_value_t = 2_000)]
    period: usize,
    #[arg(long, default_value_t = 1000)]
    window: usize,
    #[arg(long, default_value_t = 0.05)]
    theta: f64,
    /// Efficiency dimensions.
    #[arg(long, value_delimiter = ',', default_value = "2,4,10")]
    dims: Vec<usize>,
    /// Efficiency window sizes.
    #[arg(long, value_delimiter = ',', default_value = "1000,2000,5000,10000")]
    windows: Vec<usize>,
    /// Efficiency k values.
    #[arg(long, value_delimiter = ',', default_value = "1,5")]
    ks: Vec<usize>,
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

/// A failure carrying its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }

    fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        Self { code: 3, message: format!("{}: {e}", path.display()) }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Io(_) => 3,
            Error::Format { .. } => 4,
            _ => 2,
        };
        Self { code, message: e.to_string() }
    }
}

type CmdResult = Result<(), Failure>;

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path).map(BufWriter::new).map_err(|e| Failure::io(path, e))
}

fn open(path: &Path) -> Result<BufReader<File>, Failure> {
    File::open(path).map(BufReader::new).map_err(|e| Failure::io(path, e))
}

/// Runs a writer callback against a file, mapping core I/O errors to that path.
fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> Result<(), Error>) -> CmdResult {
    let mut w = create(path)?;
    f(&mut w).map_err(|e| match e {
        Error::Io(m) => Failure::io(path, m),
        other => other.into(),
    })?;
    w.flush().map_err(|e| Failure::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CmdResult {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Failure::io(path, e))?;
    writeln!(w).and_then(|_| w.flush()).map_err(|e| Failure::io(path, e))
}

fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T, Failure> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Failure::usage(format!("cannot build a pool of {threads} threads: {e}")))?;
    Ok(pool.install(f))
}

fn cmd_nsd(k1: u64, k2: u64) -> CmdResult {
    println!("{:.6}", nsd(k1, k2)?);
    Ok(())
}

fn cmd_generate(a: &GenerateArgs) -> CmdResult {
    let spec = StreamSpec { kind: a.kind, dim: a.dim, delta: a.delta, length: a.length, drift_period: a.period, seed: a.seed };
    let stream = generate_stream(&spec)?;
    write_file(&a.out, |w| write_csv(&stream.data, w))?;
    let mut sidecar = a.out.clone().into_os_string();
    sidecar.push(".drifts");
    let sidecar = PathBuf::from(sidecar);
    write_file(&sidecar, |w| write_drift_indices(&stream.drift_indices, w))?;
    println!("rows={} drifts={}", stream.data.len(), stream.drift_indices.len());
    Ok(())
}

fn cmd_detect(a: &DetectArgs) -> CmdResult {
    let cfg = WindowConfig { window_size: a.window, detector: DetectorConfig::new(a.k, a.theta)? };
    cfg.validate()?;
    let data = read_csv(open(&a.input)?).map_err(|e| match e {
        Error::Io(m) => Failure::io(&a.input, m),
        other => Failure::from(other),
    })?;
    let drifts = a.drifts.as_deref().map(|p| read_drift_indices(open(p)?).map_err(Failure::from)).transpose()?;

    let detections = run_stream(&data, &cfg)?;
    let mut w = create(&a.out)?;
    for d in &detections {
        let line = serde_json::to_string(&BatchRecord::from(d)).map_err(|e| Failure::io(&a.out, e))?;
        writeln!(w, "{line}").map_err(|e| Failure::io(&a.out, e))?;
    }
    w.flush().map_err(|e| Failure::io(&a.out, e))?;
    if let Some(path) = &a.table {
        let mut t = create(path)?;
        t.write_all(summary_table(&detections).as_bytes()).and_then(|_| t.flush()).map_err(|e| Failure::io(path, e))?;
    }

    let flags = detections.iter().filter(|d| d.flagged()).count();
    println!("flags={flags} batches={}", detections.len());
    if let Some(drifts) = drifts {
        let card = score(&detections, &drifts, a.window);
        println!(
            "detections={} false_alarms={} drifts={} tested={}",
            card.true_detections, card.false_alarms, card.n_drifts, card.n_batches
        );
    }
    Ok(())
}

fn parse_distribution(s: &str) -> Result<Distribution, Failure> {
    let parts: Vec<&str> = s.split(':').collect();
    let num = |i: usize| -> Result<f64, Failure> {
        parts
            .get(i)
            .ok_or_else(|| Failure::usage(format!("distribution '{s}' is missing a parameter")))?
            .parse()
            .map_err(|_| Failure::usage(format!("bad number in distribution '{s}'")))
    };
    let d = match (parts[0], parts.len()) {
        ("uniform", 1) => Distribution::UniformCube,
        ("normal", 3) => Distribution::Normal { mu: num(1)?, sigma: num(2)? },
        ("gamma", 3) => Distribution::Gamma { alpha: num(1)?, beta: num(2)? },
        ("poisson", 2) => Distribution::PoissonTrivariate { lambda: num(1)? },
        _ => {
            return Err(Failure::usage(format!(
                "unknown distribution '{s}' (uniform, normal:MU:SIGMA, gamma:SHAPE:SCALE, poisson:LAMBDA)"
            )))
        }
    };
    Ok(d)
}

fn parse_starts(s: &str) -> Result<Vec<RealVector>, Failure> {
    s.split(';')
        .map(|p| {
            let coords = p
                .split(',')
                .map(|c| c.trim().parse::<f64>().map_err(|_| Failure::usage(format!("bad coordinate in '{p}'"))))
                .collect::<Result<Vec<_>, _>>()?;
            RealVector::new(coords).map_err(Failure::from)
        })
        .collect()
}

fn parse_list(s: &str) -> Result<Vec<u64>, Failure> {
    s.split(',').map(|c| c.trim().parse().map_err(|_| Failure::usage(format!("bad threshold list '{s}'")))).collect()
}

fn scenario_from(a: &SimulateArgs) -> Result<ScenarioConfig, Failure> {
    let mut sc = match &a.scenario {
        Some(name) => preset(name).ok_or_else(|| {
            Failure::usage(format!("unknown scenario '{name}'; known: {}", PRESET_NAMES.join(", ")))
        })?,
        None => {
            if a.starts.is_none() {
                return Err(Failure::usage("give --scenario NAME or a custom scenario with --starts"));
            }
            ScenarioConfig {
                id: "custom".into(),
                distribution: Distribution::UniformCube,
                dim: 0,
                n: 1000,
                starting_points: Vec::new(),
                k: 10,
                thresholds: vec![14, 10, 6],
                reps: 1000,
                seed: DEFAULT_SEED,
                search_mode: SearchMode::Independent,
                nominal_k1: None,
            }
        }
    };
    if let Some(s) = &a.distribution {
        sc.distribution = parse_distribution(s)?;
    }
    if let Some(s) = &a.starts {
        sc.starting_points = parse_starts(s)?;
        sc.dim = sc.starting_points[0].dim();
    }
    if let Some(d) = a.dim {
        sc.dim = d;
    }
    if let Some(s) = &a.thresholds {
        sc.thresholds = parse_list(s)?;
    }
    sc.n = a.n.unwrap_or(sc.n);
    sc.k = a.k.unwrap_or(sc.k);
    sc.reps = a.reps.unwrap_or(sc.reps);
    sc.seed = a.seed.unwrap_or(sc.seed);
    if a.nominal_k1.is_some() {
        sc.nominal_k1 = a.nominal_k1;
    }
    if a.stepped {
        sc.search_mode = SearchMode::Stepped;
    }
    sc.validate()?;
    Ok(sc)
}

fn cmd_simulate(a: &SimulateArgs) -> CmdResult {
    if a.list {
        for name in PRESET_NAMES {
            println!("{name}");
        }
        return Ok(());
    }
    let sc = scenario_from(a)?;
    let trace = with_threads(a.threads, || run_calibration(&sc))??;
    if let Some(path) = &a.out {
        write_file(path, |w| trace.write_csv(w))?;
    }
    let summary = trace.summary(sc.seed);
    if let Some(path) = &a.summary {
        write_json(path, &summary)?;
    }
    println!("scenario={} reps={} k1={} mean_k1={:.3}", summary.scenario, summary.reps, summary.k1_target, summary.mean_k1);
    for ((c, f), t) in summary.thresholds.iter().zip(&summary.final_frequencies).zip(&summary.targets) {
        println!("P(K2<{c}) = {f:.4}  NSD = {t:.4}  |diff| = {:.4}", (f - t).abs());
    }
    Ok(())
}

#[derive(Serialize)]
struct DriftSummaryRow {
    label: String,
    k: usize,
    mean_detection_rate: f64,
    sd_detection_rate: f64,
    mean_false_alarms: f64,
    sd_false_alarms: f64,
}

fn cmd_bench(a: &BenchArgs) -> CmdResult {
    match a.suite {
        Suite::Drift => {
            let suite = DriftSuiteConfig {
                length: a.length,
                drift_period: a.period,
                window_size: a.window,
                theta: a.theta,
                seeds: a.seeds,
                master_seed: a.seed,
            };
            let results = with_threads(a.threads, || run_drift_suite(&benchmark_cases(), &suite))??;
            write_file(&a.out, |w| write_drift_csv(&results, w))?;
            let rows: Vec<DriftSummaryRow> = results
                .iter()
                .map(|r| DriftSummaryRow {
                    label: r.case.label.clone(),
                    k: r.case.k,
                    mean_detection_rate: r.mean_detection_rate,
                    sd_detection_rate: r.sd_detection_rate,
                    mean_false_alarms: r.mean_false_alarms,
                    sd_false_alarms: r.sd_false_alarms,
                })
                .collect();
            if let Some(path) = &a.summary {
                write_json(path, &rows)?;
            }
            println!("{:<24} {:>2} {:>10} {:>12}", "dataset", "k", "detection", "false alarms");
            for r in &rows {
                println!("{:<24} {:>2} {:>10.3} {:>12.2}", r.label, r.k, r.mean_detection_rate, r.mean_false_alarms);
            }
        }
        Suite::Efficiency => {
            let rows = with_threads(a.threads, || run_efficiency(&a.dims, &a.windows, &a.ks, a.seed))??;
            write_file(&a.out, |w| write_efficiency_csv(&rows, w))?;
            if let Some(path) = &a.summary {
                write_json(path, &rows)?;
            }
            for r in &rows {
                println!("dim={} window={} k={} seconds={:.4}", r.dim, r.window_size, r.k, r.wall_time);
            }
        }
    }
    Ok(())
}

fn run(cli: Cli) -> CmdResult {
    match &cli.command {
        Command::Nsd { k1, k2 } => cmd_nsd(*k1, *k2),
        Command::Generate(a) => cmd_generate(a),
        Command::Detect(a) => cmd_detect(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Bench(a) => cmd_bench(a),
    }
}

fn main() -> ExitCode {
    let args: Vec<OsString> = std::env::args_os().collect();
    let args = match config::expand(args) {
        Ok(a) => a,
        Err(e) => {
            let (code, msg) = match e {
                config::ConfigError::Io(m) => (3, m),
                config::ConfigError::Syntax { line, message } => (2, format!("config line {line}: {message}")),
                config::ConfigError::Usage(m) => (2, m),
            };
            eprintln!("error: {msg}");
            return ExitCode::from(code);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
