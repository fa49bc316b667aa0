//! Seeded samplers for the calibration runs and the synthetic drift streams.
//!
//! Gamma variates use the shape/scale convention: `Gamma(alpha, beta)` has
//! mean `alpha * beta`.
//!
//! Drift streams alternate between two concepts A and B every
//! `drift_period` instances (A, B, A, ...), giving `length / drift_period - 1`
//! drift points at the multiples of the period.

use std::io::{Read, Write};

use rand::Rng;
use rand_distr::{Distribution as _, Gamma, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{LabeledSet, PointSet, RealVector};
use crate::rng::{seeded, StreamRng};

/// Point distribution of a calibration scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Distribution {
    UniformCube,
    Normal { mu: f64, sigma: f64 },
    Gamma { alpha: f64, beta: f64 },
    /// Bivariate Poisson by trivariate reduction; always two-dimensional.
    PoissonTrivariate { lambda: f64 },
}

impl Distribution {
    pub fn sample(&self, n: usize, dim: usize, rng: &mut StreamRng) -> Result<PointSet> {
        match *self {
            Distribution::UniformCube => gen_uniform_cube(n, dim, rng),
            Distribution::Normal { mu, sigma } => gen_normal(n, dim, mu, sigma, rng),
            Distribution::Gamma { alpha, beta } => gen_gamma(n, dim, alpha, beta, rng),
            Distribution::PoissonTrivariate { lambda } => {
                if dim != 2 {
                    return Err(Error::InvalidConfig(format!("trivariate Poisson is 2-D, got dim {dim}")));
                }
                gen_poisson_trivariate(n, lambda, rng)
            }
        }
    }
}

/// How search steps of several starting points are built.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SearchMode {
    /// Each starting point takes its own k nearest neighbors; steps may overlap.
    Independent,
    /// Starting points are processed in order, each claiming k neighbors not yet claimed.
    Stepped,
}

/// A Monte Carlo calibration scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub id: String,
    pub distribution: Distribution,
    pub dim: usize,
    /// Points per sample.
    pub n: usize,
    pub starting_points: Vec<RealVector>,
    pub k: usize,
    pub thresholds: Vec<u64>,
    pub reps: usize,
    pub seed: u64,
    pub search_mode: SearchMode,
    /// K1 used for the target values; defaults to `starting_points.len() * k`.
    /// Overlapping steps only hit it approximately.
    pub nominal_k1: Option<u64>,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.dim == 0 || self.n == 0 || self.k == 0 || self.reps == 0 {
            return bad("dim, n, k and reps must be positive".into());
        }
        if self.thresholds.is_empty() || self.thresholds.contains(&0) {
            return bad("thresholds must be a nonempty list of positive integers".into());
        }
        if self.starting_points.is_empty() {
            return bad("at least one starting point is required".into());
        }
        if let Some(p) = self.starting_points.iter().find(|p| p.dim() != self.dim) {
            return bad(format!("starting point of dim {} in a {}-D scenario", p.dim(), self.dim));
        }
        let needed = match self.search_mode {
            SearchMode::Independent => self.k,
            SearchMode::Stepped => self.k * self.starting_points.len(),
        };
        if needed > self.n {
            return bad(format!("search needs {needed} neighbors but samples hold {} points", self.n));
        }
        if matches!(self.distribution, Distribution::PoissonTrivariate { .. }) && self.dim != 2 {
            return bad("trivariate Poisson scenarios are 2-D".into());
        }
        if self.nominal_k1 == Some(0) {
            return bad("nominal K1 must be positive".into());
        }
        Ok(())
    }

    pub fn target_k1(&self) -> u64 {
        self.nominal_k1.unwrap_or((self.starting_points.len() * self.k) as u64)
    }

    pub fn starts(&self) -> PointSet {
        PointSet::from_rows(self.dim, self.starting_points.iter().map(|p| p.coords()))
            .expect("starting points validated")
    }
}

/// `n` points with i.i.d. coordinates uniform on `[0, 1)`.
pub fn gen_uniform_cube(n: usize, d: usize, rng: &mut StreamRng) -> Result<PointSet> {
    let data = (0..n * d).map(|_| rng.random::<f64>()).collect();
    PointSet::from_flat(d, data)
}

/// Isotropic normal with every coordinate `N(mu, sigma^2)`.
pub fn gen_normal(n: usize, d: usize, mu: f64, sigma: f64, rng: &mut StreamRng) -> Result<PointSet> {
    let normal = Normal::new(mu, sigma).map_err(|e| Error::InvalidConfig(format!("normal: {e}")))?;
    let data = (0..n * d).map(|_| normal.sample(rng)).collect();
    PointSet::from_flat(d, data)
}

/// Coordinates i.i.d. `Gamma(alpha, beta)` with shape `alpha` and scale `beta`.
pub fn gen_gamma(n: usize, d: usize, alpha: f64, beta: f64, rng: &mut StreamRng) -> Result<PointSet> {
    let gamma = Gamma::new(alpha, beta).map_err(|e| Error::InvalidConfig(format!("gamma: {e}")))?;
    let data = (0..n * d).map(|_| gamma.sample(rng)).collect();
    PointSet::from_flat(d, data)
}

/// `X = A + C`, `Y = B + C` with `A, B, C ~ Poisson(lambda / 2)` independent:
/// Poisson(lambda) marginals with correlation 1/2.
pub fn gen_poisson_trivariate(n: usize, lambda: f64, rng: &mut StreamRng) -> Result<PointSet> {
    if lambda.is_nan() || lambda <= 0.0 {
        return Err(Error::InvalidConfig(format!("Poisson intensity must be positive, got {lambda}")));
    }
    let pois = Poisson::new(0.5 * lambda).map_err(|e| Error::InvalidConfig(format!("poisson: {e}")))?;
    let mut data = Vec::with_capacity(2 * n);
    for _ in 0..n {
        let (a, b, c): (f64, f64, f64) = (pois.sample(rng), pois.sample(rng), pois.sample(rng));
        data.push(a + c);
        data.push(b + c);
    }
    PointSet::from_flat(2, data)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StreamKind {
    LinearShift,
    LinearRotate,
    NormalShift,
}

impl StreamKind {
    pub fn name(self) -> &'static str {
        match self {
            StreamKind::LinearShift => "linear-shift",
            StreamKind::LinearRotate => "linear-rotate",
            StreamKind::NormalShift => "normal-shift",
        }
    }
}

impl std::str::FromStr for StreamKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "linear-shift" => Ok(StreamKind::LinearShift),
            "linear-rotate" => Ok(StreamKind::LinearRotate),
            "normal-shift" => Ok(StreamKind::NormalShift),
            other => Err(Error::InvalidConfig(format!("unknown stream kind '{other}'"))),
        }
    }
}

/// Description of a synthetic drift stream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StreamSpec {
    pub kind: StreamKind,
    pub dim: usize,
    /// Boundary offset (linear shift), rotation in degrees (linear rotate)
    /// or class-1 mean offset (normal shift).
    pub delta: f64,
    pub length: usize,
    pub drift_period: usize,
    pub seed: u64,
}

impl StreamSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.dim == 0 || self.length == 0 || self.drift_period == 0 {
            return bad("dim, length and drift period must be positive".into());
        }
        if !self.length.is_multiple_of(self.drift_period) {
            return bad(format!(
                "length {} is not a multiple of the drift period {}",
                self.length, self.drift_period
            ));
        }
        if !self.delta.is_finite() || self.delta < 0.0 {
            return bad(format!("delta must be finite and nonnegative, got {}", self.delta));
        }
        match self.kind {
            StreamKind::LinearShift => Ok(()),
            StreamKind::LinearRotate | StreamKind::NormalShift if self.dim != 2 => {
                bad(format!("{} streams are 2-D, got dim {}", self.kind.name(), self.dim))
            }
            StreamKind::LinearRotate if self.delta >= 45.0 => Err(Error::Domain(format!(
                "rotation of {} degrees puts the boundary at or past vertical",
                self.delta
            ))),
            _ => Ok(()),
        }
    }

    /// `{drift_period * i : 1 <= i < length / drift_period}`.
    pub fn drift_indices(&self) -> Vec<usize> {
        (1..self.length / self.drift_period).map(|i| i * self.drift_period).collect()
    }
}

/// A labeled stream plus the instance indices where the concept switches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledStream {
    pub data: LabeledSet,
    pub drift_indices: Vec<usize>,
}

fn concept_b(i: usize, period: usize) -> bool {
    (i / period) % 2 == 1
}

/// Threshold offset `d * sqrt(delta^2 / d)` on the coordinate sum.
pub fn linear_shift_offset(dim: usize, delta: f64) -> f64 {
    let d = dim as f64;
    d * (delta * delta / d).sqrt()
}

/// Uniform cube; A labels 1 iff `sum x > d/2`, B iff `sum x > d/2 + d sqrt(delta^2/d)`.
pub fn gen_linear_shift_stream(spec: &StreamSpec, rng: &mut StreamRng) -> Result<LabeledStream> {
    spec.validate()?;
    if spec.kind != StreamKind::LinearShift {
        return Err(Error::InvalidConfig("expected a linear-shift spec".into()));
    }
    let d = spec.dim;
    let base = d as f64 / 2.0;
    let shifted = base + linear_shift_offset(d, spec.delta);
    let points = gen_uniform_cube(spec.length, d, rng)?;
    let labels = points
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let threshold = if concept_b(i, spec.drift_period) { shifted } else { base };
            x.iter().sum::<f64>() > threshold
        })
        .collect();
    Ok(LabeledStream { data: LabeledSet::new(points, labels)?, drift_indices: spec.drift_indices() })
}

/// Unit square; A labels 1 iff `x1 > x0` (45 degrees), B iff `x1 > x0 tan(45 + delta degrees)`.
pub fn gen_linear_rotate_stream(spec: &StreamSpec, rng: &mut StreamRng) -> Result<LabeledStream> {
    spec.validate()?;
    if spec.kind != StreamKind::LinearRotate {
        return Err(Error::InvalidConfig("expected a linear-rotate spec".into()));
    }
    let slope_b = ((45.0 + spec.delta) * std::f64::consts::PI / 180.0).tan();
    let points = gen_uniform_cube(spec.length, 2, rng)?;
    let labels = points
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let slope = if concept_b(i, spec.drift_period) { slope_b } else { 1.0 };
            x[1] > x[0] * slope
        })
        .collect();
    Ok(LabeledStream { data: LabeledSet::new(points, labels)?, drift_indices: spec.drift_indices() })
}

/// Class-1 mean of the normal-shift stream under concept A.
pub const NORMAL_SHIFT_BASE_MEAN: f64 = 2.0;

/// Fair-coin class; class 0 ~ N((0,0), I), class 1 ~ N((m,m), I) with
/// `m = 2` under A and `m = 2 + delta` under B.
pub fn gen_normal_shift_stream(spec: &StreamSpec, rng: &mut StreamRng) -> Result<LabeledStream> {
    spec.validate()?;
    if spec.kind != StreamKind::NormalShift {
        return Err(Error::InvalidConfig("expected a normal-shift spec".into()));
    }
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut points = PointSet::with_capacity(2, spec.length)?;
    let mut labels = Vec::with_capacity(spec.length);
    for i in 0..spec.length {
        let positive: bool = rng.random();
        let mean = match (positive, concept_b(i, spec.drift_period)) {
            (false, _) => 0.0,
            (true, false) => NORMAL_SHIFT_BASE_MEAN,
            (true, true) => NORMAL_SHIFT_BASE_MEAN + spec.delta,
        };
        let x = [mean + std_normal.sample(rng), mean + std_normal.sample(rng)];
        points.push(&x)?;
        labels.push(positive);
    }
    Ok(LabeledStream { data: LabeledSet::new(points, labels)?, drift_indices: spec.drift_indices() })
}

/// Generates the stream described by `spec` from its own seed.
pub fn generate_stream(spec: &StreamSpec) -> Result<LabeledStream> {
    let mut rng = seeded(spec.seed);
    match spec.kind {
        StreamKind::LinearShift => gen_linear_shift_stream(spec, &mut rng),
        StreamKind::LinearRotate => gen_linear_rotate_stream(spec, &mut rng),
        StreamKind::NormalShift => gen_normal_shift_stream(spec, &mut rng),
    }
}

/// 17 significant digits in scientific notation.
pub fn format_coord(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes `x0,...,x{d-1},label` with one instance per line.
pub fn write_csv<W: Write>(data: &LabeledSet, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (0..data.dim()).map(|i| format!("x{i}")).collect();
    header.push("label".into());
    w.write_record(&header).map_err(csv_io)?;
    let mut row = Vec::with_capacity(data.dim() + 1);
    for (x, &label) in data.points().iter().zip(data.labels()) {
        row.clear();
        row.extend(x.iter().map(|&c| format_coord(c)));
        row.push(if label { "1".into() } else { "0".into() });
        w.write_record(&row).map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io.to_string()),
        other => Error::Io(format!("{other:?}")),
    }
}

/// Reads the CSV written by [`write_csv`]. Format problems report a 1-based line number.
pub fn read_csv<R: Read>(input: R) -> Result<LabeledSet> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(input);
    let header = rdr.headers().map_err(|e| format_error(1, e))?.clone();
    let dim = header.len().saturating_sub(1);
    if header.get(dim).map(str::trim) != Some("label") {
        return Err(Error::Format { line: 1, message: "last column must be 'label'".into() });
    }
    if dim == 0 {
        return Err(Error::Format { line: 1, message: "no feature columns".into() });
    }
    for (i, name) in header.iter().take(dim).enumerate() {
        if name.trim() != format!("x{i}") {
            return Err(Error::Format { line: 1, message: format!("column {i} should be 'x{i}', found '{name}'") });
        }
    }

    let mut points = PointSet::new(dim)?;
    let mut labels = Vec::new();
    let mut coords = Vec::with_capacity(dim);
    for (row_no, record) in rdr.records().enumerate() {
        let line = row_no + 2;
        let record = record.map_err(|e| format_error(line, e))?;
        if record.len() != dim + 1 {
            return Err(Error::Format {
                line,
                message: format!("expected {} fields, found {}", dim + 1, record.len()),
            });
        }
        coords.clear();
        for field in record.iter().take(dim) {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| Error::Format { line, message: format!("bad number '{field}'") })?;
            if !v.is_finite() {
                return Err(Error::Format { line, message: format!("non-finite value '{field}'") });
            }
            coords.push(v);
        }
        let label = match record[dim].trim() {
            "0" => false,
            "1" => true,
            other => return Err(Error::Format { line, message: format!("label must be 0 or 1, found '{other}'") }),
        };
        points.push(&coords)?;
        labels.push(label);
    }
    LabeledSet::new(points, labels)
}

fn format_error(line: usize, e: csv::Error) -> Error {
    match e.kind() {
        csv::ErrorKind::Io(io) => Error::Io(io.to_string()),
        _ => Error::Format { line, message: e.to_string() },
    }
}

/// One drift index per line.
pub fn write_drift_indices<W: Write>(indices: &[usize], mut out: W) -> Result<()> {
    for i in indices {
        writeln!(out, "{i}")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_drift_indices<R: Read>(mut input: R) -> Result<Vec<usize>> {
    let mut text = String::new();
    input.read_to_string(&mut text)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim()
                .parse()
                .map_err(|_| Error::Format { line: i + 1, message: format!("bad drift index '{l}'") })
        })
        .collect()
}
