//! Points, Euclidean distance and brute-force neighbor queries.
//!
//! Every query here is a linear scan. The detector's cost model assumes
//! O(n) per kNN query, and a scan keeps tie-breaking trivially deterministic:
//! equal distances are ordered by the lower point index.

use std::collections::HashSet;
use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A finite point in d-dimensional Euclidean space, d >= 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealVector(Vec<f64>);

impl RealVector {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidPoint("zero-dimensional point".into()));
        }
        if let Some(bad) = coords.iter().find(|c| !c.is_finite()) {
            return Err(Error::InvalidPoint(format!("non-finite coordinate {bad}")));
        }
        Ok(Self(coords))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for RealVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for RealVector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

/// A set of points sharing one dimension, stored row-major in a flat buffer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSet {
    dim: usize,
    data: Vec<f64>,
}

impl PointSet {
    /// An empty set of `dim`-dimensional points.
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidPoint("zero-dimensional point set".into()));
        }
        Ok(Self { dim, data: Vec::new() })
    }

    pub fn with_capacity(dim: usize, n: usize) -> Result<Self> {
        let mut set = Self::new(dim)?;
        set.data.reserve(n * dim);
        Ok(set)
    }

    /// Builds a set from a flat row-major buffer.
    pub fn from_flat(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidPoint("zero-dimensional point set".into()));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(Error::InvalidPoint(format!(
                "buffer of {} values is not a multiple of dim {dim}",
                data.len()
            )));
        }
        if data.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidPoint("non-finite coordinate".into()));
        }
        Ok(Self { dim, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(dim: usize, rows: impl IntoIterator<Item = R>) -> Result<Self> {
        let mut set = Self::new(dim)?;
        for row in rows {
            set.push(row.as_ref())?;
        }
        Ok(set)
    }

    pub fn push(&mut self, point: &[f64]) -> Result<()> {
        check_dim(self.dim, point.len())?;
        if point.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidPoint("non-finite coordinate".into()));
        }
        self.data.extend_from_slice(point);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// The `i`th point. Panics if out of range.
    pub fn get(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    /// A new set holding the points at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> PointSet {
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            data.extend_from_slice(self.get(i));
        }
        PointSet { dim: self.dim, data }
    }

    /// Applies `f` to every coordinate. Used for scaling and translation tests.
    pub fn map_coords(&self, mut f: impl FnMut(usize, f64) -> f64) -> PointSet {
        let dim = self.dim;
        let data = self.data.iter().enumerate().map(|(i, &c)| f(i % dim, c)).collect();
        PointSet { dim, data }
    }
}

/// Points with a binary class label; `true` is the positive class (label 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSet {
    points: PointSet,
    labels: Vec<bool>,
}

impl LabeledSet {
    pub fn new(points: PointSet, labels: Vec<bool>) -> Result<Self> {
        if points.len() != labels.len() {
            return Err(Error::InvalidConfig(format!(
                "{} points but {} labels",
                points.len(),
                labels.len()
            )));
        }
        Ok(Self { points, labels })
    }

    pub fn points(&self) -> &PointSet {
        &self.points
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    pub fn dim(&self) -> usize {
        self.points.dim()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Points of one class, in stream order.
    pub fn class(&self, positive: bool) -> PointSet {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| self.labels[i] == positive).collect();
        self.points.select(&idx)
    }

    pub fn class_count(&self, positive: bool) -> usize {
        self.labels.iter().filter(|&&l| l == positive).count()
    }

    /// Contiguous sub-range `[start, end)`.
    pub fn slice(&self, start: usize, end: usize) -> LabeledSet {
        let dim = self.points.dim();
        LabeledSet {
            points: PointSet { dim, data: self.points.data[start * dim..end * dim].to_vec() },
            labels: self.labels[start..end].to_vec(),
        }
    }
}

/// Result of a kNN query: indices and distances, nearest first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborResult {
    pub indices: Vec<usize>,
    pub distances: Vec<f64>,
}

impl NeighborResult {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Distance to the farthest returned neighbor (the kth).
    pub fn kth_distance(&self) -> Option<f64> {
        self.distances.last().copied()
    }
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

#[inline]
pub(crate) fn distance_unchecked(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

pub fn euclidean_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    check_dim(a.len(), b.len())?;
    Ok(distance_unchecked(a, b))
}

/// The `k` nearest points of `points` to `query`.
pub fn knn(query: &[f64], points: &PointSet, k: usize) -> Result<NeighborResult> {
    knn_filtered(query, points, k, |_| true)
}

/// The `k` nearest points of `points` to `query`, ignoring indices in `excluded`.
pub fn knn_excluding(
    query: &[f64],
    points: &PointSet,
    k: usize,
    excluded: &HashSet<usize>,
) -> Result<NeighborResult> {
    knn_filtered(query, points, k, |i| !excluded.contains(&i))
}

fn knn_filtered(
    query: &[f64],
    points: &PointSet,
    k: usize,
    keep: impl Fn(usize) -> bool,
) -> Result<NeighborResult> {
    if points.is_empty() {
        return Err(Error::EmptySet);
    }
    check_dim(points.dim(), query.len())?;
    if k == 0 {
        return Err(Error::InvalidConfig("k must be at least 1".into()));
    }

    let mut cand: Vec<(f64, usize)> = points
        .iter()
        .enumerate()
        .filter(|(i, _)| keep(*i))
        .map(|(i, p)| (distance_unchecked(query, p), i))
        .collect();
    if k > cand.len() {
        return Err(Error::KTooLarge { k, available: cand.len() });
    }

    let by_dist_then_index = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k < cand.len() {
        cand.select_nth_unstable_by(k - 1, by_dist_then_index);
        cand.truncate(k);
    }
    cand.sort_unstable_by(by_dist_then_index);

    let (distances, indices) = cand.into_iter().unzip();
    Ok(NeighborResult { indices, distances })
}

/// Number of distinct `targets` lying strictly inside at least one ball
/// `B(origins[i], radii[i])`.
pub fn count_within_union(origins: &PointSet, radii: &[f64], targets: &PointSet) -> Result<usize> {
    if origins.len() != radii.len() {
        return Err(Error::InvalidConfig(format!(
            "{} origins but {} radii",
            origins.len(),
            radii.len()
        )));
    }
    if let Some(r) = radii.iter().find(|r| !r.is_finite() || **r < 0.0) {
        return Err(Error::Domain(format!("radius {r} is not a finite nonnegative number")));
    }
    if targets.is_empty() || origins.is_empty() {
        return Ok(0);
    }
    check_dim(origins.dim(), targets.dim())?;

    // Squared-distance screening with a relative guard band; anything near
    // the boundary falls back to the exact comparison `sqrt(d2) < r`.
    const GUARD: f64 = 1e-9;
    let balls: Vec<(&[f64], f64, f64, f64)> = origins
        .iter()
        .zip(radii)
        .filter(|(_, &r)| r > 0.0)
        .map(|(o, &r)| {
            let r2 = r * r;
            (o, r, r2 * (1.0 - GUARD), r2 * (1.0 + GUARD))
        })
        .collect();

    let inside = |t: &[f64]| {
        balls.iter().any(|&(o, r, lo, hi)| {
            let d2: f64 = o
                .iter()
                .zip(t)
                .map(|(x, y)| {
                    let d = x - y;
                    d * d
                })
                .sum();
            if d2 < lo {
                true
            } else if d2 > hi {
                false
            } else {
                d2.sqrt() < r
            }
        })
    };
    Ok(targets.iter().filter(|t| inside(t)).count())
}

/// Volume of the d-dimensional ball of radius `r`: pi^(d/2) r^d / Gamma(d/2 + 1).
pub fn ball_volume(d: usize, r: f64) -> f64 {
    assert!(d >= 1, "ball_volume needs d >= 1");
    assert!(r >= 0.0, "ball_volume needs r >= 0");
    if r == 0.0 {
        return 0.0;
    }
    let half = d as f64 / 2.0;
    (half * std::f64::consts::PI.ln() + d as f64 * r.ln() - ln_gamma_half_integer(d + 2)).exp()
}

/// ln Gamma(m / 2) for integer m >= 1, by the recurrence Gamma(x + 1) = x Gamma(x).
fn ln_gamma_half_integer(m: usize) -> f64 {
    // Gamma(1/2) = sqrt(pi), Gamma(1) = 1.
    let (mut acc, mut x) = if m % 2 == 1 { (0.5 * std::f64::consts::PI.ln(), 0.5) } else { (0.0, 1.0) };
    while x < m as f64 / 2.0 {
        acc += x.ln();
        x += 1.0;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn line(xs: &[f64]) -> PointSet {
        PointSet::from_rows(2, xs.iter().map(|&x| [x, 0.0])).unwrap()
    }

    #[test]
    fn distance_examples() {
        assert_eq!(euclidean_distance(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), 5.0);
        assert_eq!(euclidean_distance(&[1.5, -2.0], &[1.5, -2.0]).unwrap(), 0.0);
        assert_eq!(euclidean_distance(&[2.0], &[5.0]).unwrap(), 3.0);
        assert_eq!(
            euclidean_distance(&[1.0], &[1.0, 2.0]),
            Err(Error::DimensionMismatch { expected: 1, found: 2 })
        );
    }

    #[test]
    fn knn_on_a_line() {
        let pts = line(&[1.0, 2.0, 3.0]);
        let res = knn(&[0.0, 0.0], &pts, 2).unwrap();
        assert_eq!(res.indices, vec![0, 1]);
        assert_eq!(res.distances, vec![1.0, 2.0]);

        let all = knn(&[2.9, 0.0], &pts, 3).unwrap();
        assert_eq!(all.indices, vec![2, 1, 0]);
    }

    #[test]
    fn knn_ties_go_to_lower_index() {
        let pts = line(&[-1.0, 1.0, 2.0, -2.0]);
        let res = knn(&[0.0, 0.0], &pts, 3).unwrap();
        assert_eq!(res.indices, vec![0, 1, 2]);
    }

    #[test]
    fn knn_errors() {
        let pts = line(&[1.0, 2.0]);
        assert_eq!(knn(&[0.0, 0.0], &pts, 3), Err(Error::KTooLarge { k: 3, available: 2 }));
        assert_eq!(knn(&[0.0, 0.0], &PointSet::new(2).unwrap(), 1), Err(Error::EmptySet));
        assert!(matches!(knn(&[0.0], &pts, 1), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn knn_excluding_skips_excluded() {
        let pts = line(&[1.0, 2.0, 3.0]);
        let none = HashSet::new();
        assert_eq!(knn_excluding(&[0.0, 0.0], &pts, 2, &none).unwrap(), knn(&[0.0, 0.0], &pts, 2).unwrap());

        let nearest: HashSet<usize> = [0].into_iter().collect();
        let res = knn_excluding(&[0.0, 0.0], &pts, 2, &nearest).unwrap();
        assert_eq!(res.indices, vec![1, 2]);
        assert_eq!(knn_excluding(&[0.0, 0.0], &pts, 3, &nearest), Err(Error::KTooLarge { k: 3, available: 2 }));
    }

    #[test]
    fn union_counts_distinct_targets() {
        let origins = PointSet::from_rows(2, [[0.0, 0.0], [10.0, 0.0]]).unwrap();
        let targets = PointSet::from_rows(2, [[0.5, 0.0], [10.5, 0.0], [5.0, 0.0]]).unwrap();
        assert_eq!(count_within_union(&origins, &[1.0, 1.0], &targets).unwrap(), 2);

        let overlapping = PointSet::from_rows(2, [[0.0, 0.0], [1.0, 0.0]]).unwrap();
        let one = PointSet::from_rows(2, [[0.5, 0.0]]).unwrap();
        assert_eq!(count_within_union(&overlapping, &[1.0, 1.0], &one).unwrap(), 1);
    }

    #[test]
    fn union_boundary_is_excluded() {
        let origins = PointSet::from_rows(2, [[0.0, 0.0]]).unwrap();
        let targets = PointSet::from_rows(2, [[3.0, 4.0], [0.0, 0.0]]).unwrap();
        assert_eq!(count_within_union(&origins, &[5.0], &targets).unwrap(), 1);
        assert_eq!(count_within_union(&origins, &[0.0], &targets).unwrap(), 0);
    }

    #[test]
    fn union_errors() {
        let origins = PointSet::from_rows(2, [[0.0, 0.0]]).unwrap();
        let targets3 = PointSet::from_rows(3, [[0.0, 0.0, 0.0]]).unwrap();
        assert!(matches!(
            count_within_union(&origins, &[1.0], &targets3),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(count_within_union(&origins, &[1.0, 2.0], &targets3).is_err());
        assert_eq!(count_within_union(&origins, &[1.0], &PointSet::new(2).unwrap()).unwrap(), 0);
    }

    #[test]
    fn ball_volume_examples() {
        assert_relative_eq!(ball_volume(1, 2.0), 4.0, max_relative = 1e-14);
        assert_relative_eq!(ball_volume(2, 1.0), PI, max_relative = 1e-14);
        assert_relative_eq!(ball_volume(3, 1.0), 4.0 * PI / 3.0, max_relative = 1e-14);
        assert_relative_eq!(ball_volume(4, 1.0), PI * PI / 2.0, max_relative = 1e-14);
        assert_eq!(ball_volume(5, 0.0), 0.0);
        // Remote search step of the single-start calibration run.
        assert_relative_eq!(ball_volume(2, 199.028), 124410.21, max_relative = 1e-3);
    }

    #[test]
    fn real_vector_validation() {
        assert!(RealVector::new(vec![]).is_err());
        assert!(RealVector::new(vec![1.0, f64::NAN]).is_err());
        let v = RealVector::new(vec![1.0, 2.0]).unwrap();
        assert_eq!(v.dim(), 2);
        assert_eq!(&v[..], &[1.0, 2.0]);
    }

    #[test]
    fn point_set_validation() {
        assert!(PointSet::new(0).is_err());
        assert!(PointSet::from_flat(2, vec![1.0, 2.0, 3.0]).is_err());
        let mut s = PointSet::new(2).unwrap();
        assert!(s.push(&[1.0]).is_err());
        assert!(s.push(&[1.0, f64::INFINITY]).is_err());
        s.push(&[1.0, 2.0]).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s.select(&[0, 0]).len(), 2);
    }
}
