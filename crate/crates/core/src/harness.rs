//! Scripted experiment suites.
//!
//! - Calibration: draw two independent samples per repetition, build the
//!   search step on the first, count the second inside it, and track how
//!   often `K2 < c` against `NSD(K1, c)`.
//! - Drift benchmark: synthetic streams scored by detection / false alarms.
//! - Efficiency: single-threaded wall time of one `detect_drift` call.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datagen::{generate_stream, Distribution, ScenarioConfig, SearchMode, StreamKind, StreamSpec};
use crate::detector::{detect_drift, DetectorConfig, GapModel};
use crate::error::{Error, Result};
use crate::geometry::{ball_volume, RealVector};
use crate::rng::{substream, substream_seed};
use crate::stats::nsd;
use crate::stream_eval::{run_stream, score, ScoreCard, WindowConfig};

/// Master seed of the shipped presets.
pub const DEFAULT_SEED: u64 = 2019;

/// Names accepted by [`preset`], in suite order.
pub const PRESET_NAMES: &[&str] = &[
    "exp1_center",
    "exp1_border",
    "exp1_outer",
    "exp1_remote",
    "exp2_d10",
    "exp2_d100",
    "exp2_d1000",
    "exp3_mu0",
    "exp3_mu3",
    "exp4_a2_b05",
    "exp4_a20_b1",
    "exp5_lambda10",
    "exp5_lambda100",
    "exp5_lambda200",
    "exp6_c2",
    "exp6_c4",
    "exp6_c10",
    "exp7_c2",
    "exp7_c4",
    "exp7_c10",
    "exp8_inner",
    "exp8_border",
    "exp8_outer",
];

fn points(rows: &[&[f64]]) -> Vec<RealVector> {
    rows.iter().map(|r| RealVector::new(r.to_vec()).expect("finite preset point")).collect()
}

/// The calibration scenario registered under `name`, seeded with a
/// per-preset substream of [`DEFAULT_SEED`].
pub fn preset(name: &str) -> Option<ScenarioConfig> {
    let ordinal = PRESET_NAMES.iter().position(|&p| p == name)?;
    let single = [14, 10, 6].to_vec();
    let multi = [15, 20, 25].to_vec();
    let base = |distribution, dim, n, starts: Vec<RealVector>, k, thresholds: &Vec<u64>| ScenarioConfig {
        id: name.to_string(),
        distribution,
        dim,
        n,
        starting_points: starts,
        k,
        thresholds: thresholds.clone(),
        reps: 1000,
        seed: substream_seed(DEFAULT_SEED, ordinal as u64),
        search_mode: SearchMode::Independent,
        nominal_k1: None,
    };
    let uniform2 = |starts: &[&[f64]], k, th: &Vec<u64>| base(Distribution::UniformCube, 2, 1000, points(starts), k, th);
    let origin2: &[&[f64]] = &[&[0.0, 0.0]];

    let cfg = match name {
        "exp1_center" => uniform2(&[&[0.5, 0.5]], 10, &single),
        "exp1_border" => uniform2(&[&[1.0, 0.3]], 10, &single),
        "exp1_outer" => uniform2(&[&[1.1, 0.3]], 10, &single),
        "exp1_remote" => uniform2(&[&[200.0, 0.3]], 10, &single),
        "exp2_d10" | "exp2_d100" | "exp2_d1000" => {
            let d: usize = name.trim_start_matches("exp2_d").parse().ok()?;
            let start = vec![RealVector::new(vec![0.0; d]).ok()?];
            base(Distribution::UniformCube, d, 500, start, 10, &single)
        }
        "exp3_mu0" => base(Distribution::Normal { mu: 0.0, sigma: 1.0 }, 2, 1000, points(origin2), 10, &single),
        "exp3_mu3" => base(Distribution::Normal { mu: 3.0, sigma: 1.0 }, 2, 1000, points(origin2), 10, &single),
        "exp4_a2_b05" => base(Distribution::Gamma { alpha: 2.0, beta: 0.5 }, 2, 1000, points(origin2), 10, &single),
        "exp4_a20_b1" => base(Distribution::Gamma { alpha: 20.0, beta: 1.0 }, 2, 1000, points(origin2), 10, &single),
        "exp5_lambda10" | "exp5_lambda100" | "exp5_lambda200" => {
            let lambda: f64 = name.trim_start_matches("exp5_lambda").parse().ok()?;
            base(Distribution::PoissonTrivariate { lambda }, 2, 1000, points(origin2), 10, &single)
        }
        "exp6_c2" | "exp6_c4" | "exp6_c10" => {
            let c: usize = name.trim_start_matches("exp6_c").parse().ok()?;
            let starts: Vec<RealVector> = (0..c)
                .map(|i| {
                    let t = (i as f64 + 0.5) / c as f64;
                    RealVector::new(vec![t, t]).expect("finite")
                })
                .collect();
            base(Distribution::UniformCube, 2, 1000, starts, 20 / c, &multi)
        }
        "exp7_c2" => {
            let mut cfg = uniform2(&[&[0.5, 0.5], &[0.536, 0.5]], 15, &multi);
            cfg.nominal_k1 = Some(20);
            cfg
        }
        "exp7_c4" => {
            let mut cfg = uniform2(&[&[0.5, 0.5], &[0.53, 0.5], &[0.56, 0.5], &[0.586, 0.5]], 10, &multi);
            cfg.nominal_k1 = Some(20);
            cfg
        }
        "exp7_c10" => {
            let starts: &[&[f64]] = &[
                &[0.0, 0.5],
                &[0.0, 0.52],
                &[0.0, 0.54],
                &[0.0, 0.56],
                &[0.0, 0.585],
                &[1.0, 0.5],
                &[1.0, 0.52],
                &[1.0, 0.54],
                &[1.0, 0.56],
                &[1.0, 0.585],
            ];
            let mut cfg = uniform2(starts, 5, &multi);
            cfg.nominal_k1 = Some(20);
            cfg
        }
        "exp8_inner" | "exp8_border" | "exp8_outer" => {
            let y = match name {
                "exp8_inner" => 0.5,
                "exp8_border" => 0.0,
                _ => 10.5,
            };
            let mut cfg = uniform2(&[&[0.5, y], &[0.52, y], &[0.54, y], &[0.56, y]], 5, &multi);
            cfg.search_mode = SearchMode::Stepped;
            cfg
        }
        _ => return None,
    };
    Some(cfg)
}

/// Per-repetition outcome of a calibration run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RepRecord {
    pub rep: usize,
    pub k1: u64,
    pub k2: u64,
    /// Sum of the per-origin ball volumes; the search-step volume when the
    /// balls do not overlap. May overflow to infinity in very high dimension.
    pub search_volume: f64,
}

/// Cumulative `K2 < c` frequencies of a calibration run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTrace {
    pub scenario: String,
    pub thresholds: Vec<u64>,
    pub k1_target: u64,
    /// `NSD(k1_target, c)` per threshold.
    pub targets: Vec<f64>,
    /// `frequencies[j][t]` = share of repetitions `0..=t` with `K2 < thresholds[j]`.
    pub frequencies: Vec<Vec<f64>>,
    pub records: Vec<RepRecord>,
}

impl ConvergenceTrace {
    pub fn reps(&self) -> usize {
        self.records.len()
    }

    pub fn final_frequencies(&self) -> Vec<f64> {
        self.frequencies.iter().map(|f| *f.last().expect("at least one repetition")).collect()
    }

    pub fn deviations(&self) -> Vec<f64> {
        self.final_frequencies().iter().zip(&self.targets).map(|(f, t)| (f - t).abs()).collect()
    }

    pub fn max_deviation(&self) -> f64 {
        self.deviations().into_iter().fold(0.0, f64::max)
    }

    /// Mean over repetitions of `NSD(K1_rep, c)`: the target conditioned on
    /// the realised K1, which differs from `targets` when steps overlap.
    pub fn conditional_targets(&self) -> Vec<f64> {
        self.thresholds
            .iter()
            .map(|&c| {
                let sum: f64 = self.records.iter().map(|r| nsd(r.k1, c).expect("positive")).sum();
                sum / self.records.len() as f64
            })
            .collect()
    }

    pub fn mean_k1(&self) -> f64 {
        self.records.iter().map(|r| r.k1 as f64).sum::<f64>() / self.records.len() as f64
    }

    pub fn mean_search_volume(&self) -> f64 {
        self.records.iter().map(|r| r.search_volume).sum::<f64>() / self.records.len() as f64
    }

    /// First repetition count from which every frequency stays within `tol`
    /// of its target; `None` if the trace never settles.
    pub fn settle_rep(&self, tol: f64) -> Option<usize> {
        let n = self.reps();
        let mut settle = 0;
        for (freq, target) in self.frequencies.iter().zip(&self.targets) {
            let last_out = (0..n).rev().find(|&t| (freq[t] - target).abs() > tol);
            match last_out {
                Some(t) if t + 1 == n => return None,
                Some(t) => settle = settle.max(t + 2),
                None => settle = settle.max(1),
            }
        }
        Some(settle)
    }

    pub fn summary(&self, seed: u64) -> CalibrationSummary {
        CalibrationSummary {
            scenario: self.scenario.clone(),
            reps: self.reps(),
            seed,
            k1_target: self.k1_target,
            thresholds: self.thresholds.clone(),
            targets: self.targets.clone(),
            final_frequencies: self.final_frequencies(),
            conditional_targets: self.conditional_targets(),
            max_deviation: self.max_deviation(),
            settle_rep_0_05: self.settle_rep(0.05),
            mean_k1: self.mean_k1(),
            mean_search_volume: self.mean_search_volume(),
        }
    }

    /// One row per repetition: `rep,k1,k2,search_volume,freq_lt_<c>...`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["rep".to_string(), "k1".into(), "k2".into(), "search_volume".into()];
        header.extend(self.thresholds.iter().map(|c| format!("freq_lt_{c}")));
        w.write_record(&header).map_err(csv_err)?;
        for (t, r) in self.records.iter().enumerate() {
            let mut row = vec![(r.rep + 1).to_string(), r.k1.to_string(), r.k2.to_string(), format!("{:.10e}", r.search_volume)];
            row.extend(self.frequencies.iter().map(|f| format!("{:.6}", f[t])));
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSummary {
    pub scenario: String,
    pub reps: usize,
    pub seed: u64,
    pub k1_target: u64,
    pub thresholds: Vec<u64>,
    pub targets: Vec<f64>,
    pub final_frequencies: Vec<f64>,
    pub conditional_targets: Vec<f64>,
    pub max_deviation: f64,
    pub settle_rep_0_05: Option<usize>,
    pub mean_k1: f64,
    pub mean_search_volume: f64,
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

fn calibration_rep(sc: &ScenarioConfig, starts: &crate::geometry::PointSet, rep: usize) -> Result<RepRecord> {
    let mut rng = substream(sc.seed, rep as u64);
    let reference = sc.distribution.sample(sc.n, sc.dim, &mut rng)?;
    let test = sc.distribution.sample(sc.n, sc.dim, &mut rng)?;
    let gap = match sc.search_mode {
        SearchMode::Independent => GapModel::estimate(starts, &reference, sc.k)?,
        SearchMode::Stepped => GapModel::estimate_stepped(starts, &reference, sc.k)?,
    };
    let k2 = gap.count_test(&test)?;
    let search_volume = gap.radii().iter().map(|&r| ball_volume(sc.dim, r)).sum();
    Ok(RepRecord { rep, k1: gap.pooled_k1() as u64, k2: k2 as u64, search_volume })
}

/// Monte Carlo convergence of `P(K2 < c)` towards `NSD(K1, c)`.
///
/// Repetitions run on the rayon pool, each with its own RNG substream, so the
/// trace does not depend on the thread count.
pub fn run_calibration(sc: &ScenarioConfig) -> Result<ConvergenceTrace> {
    sc.validate()?;
    let starts = sc.starts();
    let records = (0..sc.reps)
        .into_par_iter()
        .map(|rep| calibration_rep(sc, &starts, rep))
        .collect::<Result<Vec<_>>>()?;

    let frequencies = sc
        .thresholds
        .iter()
        .map(|&c| {
            let mut hits = 0usize;
            records
                .iter()
                .enumerate()
                .map(|(t, r)| {
                    hits += (r.k2 < c) as usize;
                    hits as f64 / (t + 1) as f64
                })
                .collect()
        })
        .collect();
    let k1_target = sc.target_k1();
    let targets = sc.thresholds.iter().map(|&c| nsd(k1_target, c)).collect::<Result<Vec<_>>>()?;
    Ok(ConvergenceTrace {
        scenario: sc.id.clone(),
        thresholds: sc.thresholds.clone(),
        k1_target,
        targets,
        frequencies,
        records,
    })
}

/// Generates the stream, runs the batch detector and scores it.
pub fn run_drift_benchmark(spec: &StreamSpec, cfg: &WindowConfig) -> Result<ScoreCard> {
    let stream = generate_stream(spec)?;
    let detections = run_stream(&stream.data, cfg)?;
    Ok(score(&detections, &stream.drift_indices, cfg.window_size))
}

/// One dataset/k cell of the drift benchmark table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftCase {
    pub label: String,
    pub kind: StreamKind,
    pub dim: usize,
    pub delta: f64,
    pub k: usize,
}

/// The nine synthetic datasets, each with k = 1 and k = 5.
pub fn benchmark_cases() -> Vec<DriftCase> {
    let datasets: [(&str, StreamKind, usize, f64); 9] = [
        ("linear-shift-2d-0.03", StreamKind::LinearShift, 2, 0.03),
        ("linear-shift-2d-0.02", StreamKind::LinearShift, 2, 0.02),
        ("linear-shift-2d-0.01", StreamKind::LinearShift, 2, 0.01),
        ("linear-shift-4d-0.03", StreamKind::LinearShift, 4, 0.03),
        ("linear-shift-10d-0.03", StreamKind::LinearShift, 10, 0.03),
        ("linear-rotate-2d-15", StreamKind::LinearRotate, 2, 15.0),
        ("linear-rotate-2d-10", StreamKind::LinearRotate, 2, 10.0),
        ("normal-shift-2d-0.7", StreamKind::NormalShift, 2, 0.7),
        ("normal-shift-2d-0.5", StreamKind::NormalShift, 2, 0.5),
    ];
    datasets
        .iter()
        .flat_map(|&(label, kind, dim, delta)| {
            [1usize, 5].map(|k| DriftCase { label: label.to_string(), kind, dim, delta, k })
        })
        .collect()
}

/// Stream geometry and seeding shared by every case of a benchmark run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftSuiteConfig {
    pub length: usize,
    pub drift_period: usize,
    pub window_size: usize,
    pub theta: f64,
    pub seeds: usize,
    pub master_seed: u64,
}

impl Default for DriftSuiteConfig {
    /// Desk scale: 20,000 instances, a drift every 2,000, windows of 1,000, ten seeds.
    fn default() -> Self {
        Self { length: 20_000, drift_period: 2_000, window_size: 1_000, theta: 0.05, seeds: 10, master_seed: DEFAULT_SEED }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftCaseResult {
    pub case: DriftCase,
    pub cards: Vec<ScoreCard>,
    pub mean_detection_rate: f64,
    pub sd_detection_rate: f64,
    pub mean_false_alarms: f64,
    pub sd_false_alarms: f64,
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Runs one case over `suite.seeds` streams. Seed `i` is shared by all cases,
/// so cases on the same dataset see identical streams.
pub fn run_drift_case(case: &DriftCase, suite: &DriftSuiteConfig) -> Result<DriftCaseResult> {
    if suite.seeds == 0 {
        return Err(Error::InvalidConfig("at least one seed is required".into()));
    }
    let cfg = WindowConfig { window_size: suite.window_size, detector: DetectorConfig::new(case.k, suite.theta)? };
    let cards = (0..suite.seeds)
        .into_par_iter()
        .map(|i| {
            let spec = StreamSpec {
                kind: case.kind,
                dim: case.dim,
                delta: case.delta,
                length: suite.length,
                drift_period: suite.drift_period,
                seed: substream_seed(suite.master_seed, i as u64),
            };
            run_drift_benchmark(&spec, &cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    let rates: Vec<f64> = cards.iter().map(|c| c.detection_rate().unwrap_or(0.0)).collect();
    let alarms: Vec<f64> = cards.iter().map(|c| c.false_alarms as f64).collect();
    let (mean_detection_rate, sd_detection_rate) = mean_sd(&rates);
    let (mean_false_alarms, sd_false_alarms) = mean_sd(&alarms);
    Ok(DriftCaseResult { case: case.clone(), cards, mean_detection_rate, sd_detection_rate, mean_false_alarms, sd_false_alarms })
}

pub fn run_drift_suite(cases: &[DriftCase], suite: &DriftSuiteConfig) -> Result<Vec<DriftCaseResult>> {
    cases.iter().map(|c| run_drift_case(c, suite)).collect()
}

/// One row per seed and case: `label,kind,dim,delta,k,seed_index,detections,false_alarms,n_drifts,n_batches`.
pub fn write_drift_csv<W: Write>(results: &[DriftCaseResult], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["label", "kind", "dim", "delta", "k", "seed_index", "detections", "false_alarms", "n_drifts", "n_batches"])
        .map_err(csv_err)?;
    for r in results {
        for (i, c) in r.cards.iter().enumerate() {
            w.write_record([
                r.case.label.clone(),
                r.case.kind.name().to_string(),
                r.case.dim.to_string(),
                r.case.delta.to_string(),
                r.case.k.to_string(),
                i.to_string(),
                c.true_detections.to_string(),
                c.false_alarms.to_string(),
                c.n_drifts.to_string(),
                c.n_batches.to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyRow {
    pub dim: usize,
    pub window_size: usize,
    pub k: usize,
    /// Median seconds per `detect_drift` call.
    pub wall_time: f64,
}

const TIMING_RUNS: usize = 5;

/// Median wall time of `detect_drift` on two consecutive linear-shift windows,
/// after one warm-up call. Runs on the calling thread only.
pub fn time_detection(dim: usize, window_size: usize, k: usize, seed: u64) -> Result<f64> {
    let spec = StreamSpec {
        kind: StreamKind::LinearShift,
        dim,
        delta: 0.03,
        length: 2 * window_size,
        drift_period: window_size,
        seed,
    };
    let stream = generate_stream(&spec)?;
    let x1 = stream.data.slice(0, window_size);
    let x2 = stream.data.slice(window_size, 2 * window_size);
    let cfg = DetectorConfig::new(k, 0.05)?;

    std::hint::black_box(detect_drift(&x1, &x2, &cfg)?);
    let mut times = Vec::with_capacity(TIMING_RUNS);
    for _ in 0..TIMING_RUNS {
        let start = Instant::now();
        std::hint::black_box(detect_drift(&x1, &x2, &cfg)?);
        times.push(start.elapsed().as_secs_f64());
    }
    times.sort_by(f64::total_cmp);
    Ok(times[TIMING_RUNS / 2].max(f64::MIN_POSITIVE))
}

/// Wall time for every (dim, window, k) combination, measured sequentially.
pub fn run_efficiency(dims: &[usize], window_sizes: &[usize], ks: &[usize], seed: u64) -> Result<Vec<EfficiencyRow>> {
    let mut rows = Vec::new();
    for &dim in dims {
        for &window_size in window_sizes {
            for &k in ks {
                let wall_time = time_detection(dim, window_size, k, seed)?;
                rows.push(EfficiencyRow { dim, window_size, k, wall_time });
            }
        }
    }
    Ok(rows)
}

pub fn write_efficiency_csv<W: Write>(rows: &[EfficiencyRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_is_valid() {
        for name in PRESET_NAMES {
            let sc = preset(name).unwrap_or_else(|| panic!("missing preset {name}"));
            sc.validate().unwrap();
            assert_eq!(sc.id, *name);
        }
        assert!(preset("exp9").is_none());
    }

    #[test]
    fn multi_start_presets_target_twenty() {
        for name in PRESET_NAMES.iter().filter(|n| n.starts_with("exp6") || n.starts_with("exp7") || n.starts_with("exp8")) {
            assert_eq!(preset(name).unwrap().target_k1(), 20, "{name}");
        }
    }

    #[test]
    fn single_rep_trace() {
        let mut sc = preset("exp1_center").unwrap();
        sc.reps = 1;
        let trace = run_calibration(&sc).unwrap();
        assert_eq!(trace.reps(), 1);
        for f in trace.final_frequencies() {
            assert!(f == 0.0 || f == 1.0);
        }
        assert_eq!(trace.records[0].k1, 10);
    }

    #[test]
    fn calibration_is_reproducible() {
        let mut sc = preset("exp3_mu3").unwrap();
        sc.reps = 20;
        assert_eq!(run_calibration(&sc).unwrap(), run_calibration(&sc).unwrap());
    }

    #[test]
    fn settle_rep_logic() {
        let trace = ConvergenceTrace {
            scenario: "t".into(),
            thresholds: vec![1],
            k1_target: 1,
            targets: vec![0.5],
            frequencies: vec![vec![1.0, 0.5, 0.6, 0.52]],
            records: vec![RepRecord { rep: 0, k1: 1, k2: 0, search_volume: 1.0 }; 4],
        };
        assert_eq!(trace.settle_rep(0.05), Some(4));
        assert_eq!(trace.settle_rep(0.2), Some(2));
        assert_eq!(trace.settle_rep(0.6), Some(1));
        let mut never = trace.clone();
        never.frequencies[0][3] = 0.9;
        assert_eq!(never.settle_rep(0.05), None);
    }

    #[test]
    fn benchmark_case_grid() {
        let cases = benchmark_cases();
        assert_eq!(cases.len(), 18);
        assert!(cases.iter().any(|c| c.kind == StreamKind::NormalShift && c.delta == 0.5 && c.k == 5));
    }

    #[test]
    fn stationary_stream_has_no_drifts_to_score() {
        let spec = StreamSpec { kind: StreamKind::LinearShift, dim: 2, delta: 0.0, length: 4000, drift_period: 4000, seed: 5 };
        let card = run_drift_benchmark(&spec, &WindowConfig::default()).unwrap();
        assert_eq!(card.n_drifts, 0);
        assert_eq!(card.detection_rate(), None);
        assert_eq!(card.n_batches, 3);
    }
}
