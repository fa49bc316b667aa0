//! Batch-by-batch detection over a labeled stream and scoring against known
//! drift locations.
//!
//! The stream is cut into consecutive, non-overlapping windows; window `t`
//! (t >= 1) is tested against window `t - 1`. A drift at instance `D` is
//! credited to the first window starting at or after `D`, and only if that
//! window was flagged.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::detector::{detect_drift, DetectorConfig, DriftEvidence, DriftReport};
use crate::error::{Error, Result};
use crate::geometry::LabeledSet;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowConfig {
    pub window_size: usize,
    pub detector: DetectorConfig,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self { window_size: 1000, detector: DetectorConfig::default() }
    }
}

impl WindowConfig {
    pub fn validate(&self) -> Result<()> {
        self.detector.validate()?;
        if self.window_size < 2 * (self.detector.k + 1) {
            return Err(Error::InvalidConfig(format!(
                "window size {} is below 2 * (k + 1) = {}",
                self.window_size,
                2 * (self.detector.k + 1)
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum BatchOutcome {
    Tested(DriftReport),
    /// The window pair could not be tested (a class missing or too thin).
    Skipped { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchDetection {
    pub batch_index: usize,
    pub outcome: BatchOutcome,
}

impl BatchDetection {
    pub fn report(&self) -> Option<&DriftReport> {
        match &self.outcome {
            BatchOutcome::Tested(r) => Some(r),
            BatchOutcome::Skipped { .. } => None,
        }
    }

    pub fn flagged(&self) -> bool {
        self.report().is_some_and(|r| r.drift_flag)
    }

    pub fn is_skipped(&self) -> bool {
        self.report().is_none()
    }
}

/// Runs the detector on every consecutive window pair. A trailing partial
/// window is dropped.
pub fn run_stream(stream: &LabeledSet, cfg: &WindowConfig) -> Result<Vec<BatchDetection>> {
    cfg.validate()?;
    let w = cfg.window_size;
    if stream.len() < 2 * w {
        return Err(Error::InvalidConfig(format!(
            "stream of {} instances is shorter than two windows of {w}",
            stream.len()
        )));
    }
    let n_batches = stream.len() / w;
    let windows: Vec<LabeledSet> = (0..n_batches).map(|t| stream.slice(t * w, (t + 1) * w)).collect();
    windows
        .windows(2)
        .enumerate()
        .map(|(i, pair)| {
            let batch_index = i + 1;
            let outcome = match detect_drift(&pair[0], &pair[1], &cfg.detector) {
                Ok(report) => BatchOutcome::Tested(report),
                Err(e @ (Error::ClassMissing(_) | Error::KTooLarge { .. })) => {
                    BatchOutcome::Skipped { reason: e.to_string() }
                }
                Err(e) => return Err(e),
            };
            Ok(BatchDetection { batch_index, outcome })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ScoreCard {
    pub true_detections: usize,
    pub false_alarms: usize,
    /// Drifts that fell on a tested batch.
    pub n_drifts: usize,
    /// Tested (non-skipped) batches.
    pub n_batches: usize,
}

impl ScoreCard {
    /// `None` when the stream has no scorable drift.
    pub fn detection_rate(&self) -> Option<f64> {
        (self.n_drifts > 0).then(|| self.true_detections as f64 / self.n_drifts as f64)
    }

    pub fn false_alarm_rate(&self) -> Option<f64> {
        (self.n_batches > 0).then(|| self.false_alarms as f64 / self.n_batches as f64)
    }

    /// `"detections/false alarms"`, the layout of the benchmark tables.
    pub fn cell(&self) -> String {
        format!("{}/{}", self.true_detections, self.false_alarms)
    }
}

/// Matches flagged batches to drift locations.
///
/// Drifts whose credited batch was skipped, or lies past the last tested
/// batch, count neither as detected nor as missed.
pub fn score(detections: &[BatchDetection], drift_indices: &[usize], window_size: usize) -> ScoreCard {
    assert!(window_size > 0, "window size must be positive");
    let tested: std::collections::HashMap<usize, bool> =
        detections.iter().filter(|d| !d.is_skipped()).map(|d| (d.batch_index, d.flagged())).collect();

    let mut used = std::collections::HashSet::new();
    let mut card = ScoreCard { n_batches: tested.len(), ..Default::default() };
    for &drift in drift_indices {
        let batch = drift.div_ceil(window_size);
        let Some(&flagged) = tested.get(&batch) else { continue };
        card.n_drifts += 1;
        if flagged && used.insert(batch) {
            card.true_detections += 1;
        }
    }
    let total_flags = tested.values().filter(|&&f| f).count();
    card.false_alarms = total_flags - card.true_detections;
    card
}

/// Flat per-batch record for line-delimited output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchRecord {
    pub batch_index: usize,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub minus: Option<DriftEvidence>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub plus: Option<DriftEvidence>,
    pub drift_flag: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

impl From<&BatchDetection> for BatchRecord {
    fn from(d: &BatchDetection) -> Self {
        match &d.outcome {
            BatchOutcome::Tested(r) => BatchRecord {
                batch_index: d.batch_index,
                status: "tested".into(),
                minus: Some(r.direction_minus),
                plus: Some(r.direction_plus),
                drift_flag: r.drift_flag,
                reason: None,
            },
            BatchOutcome::Skipped { reason } => BatchRecord {
                batch_index: d.batch_index,
                status: "skipped".into(),
                minus: None,
                plus: None,
                drift_flag: false,
                reason: Some(reason.clone()),
            },
        }
    }
}

/// Fixed-width text table, one row per batch.
pub fn summary_table(detections: &[BatchDetection]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:>6}  {:>6} {:>6} {:>10} {:>10} {:>2}  {:>6} {:>6} {:>10} {:>10} {:>2}  {:>4}",
        "batch", "K1-", "K2-", "p_ret-", "p_inv-", "v-", "K1+", "K2+", "p_ret+", "p_inv+", "v+", "flag"
    );
    for d in detections {
        match d.report() {
            Some(r) => {
                let (m, p) = (&r.direction_minus, &r.direction_plus);
                let _ = writeln!(
                    out,
                    "{:>6}  {:>6} {:>6} {:>10.3e} {:>10.3e} {:>2}  {:>6} {:>6} {:>10.3e} {:>10.3e} {:>2}  {:>4}",
                    d.batch_index,
                    m.k1,
                    m.k2,
                    m.p_retreat,
                    m.p_invasion,
                    m.verdict.code(),
                    p.k1,
                    p.k2,
                    p.p_retreat,
                    p.p_invasion,
                    p.verdict.code(),
                    if r.drift_flag { "yes" } else { "no" }
                );
            }
            None => {
                let _ = writeln!(out, "{:>6}  skipped", d.batch_index);
            }
        }
    }
    out
}
