//! Real concept drift detection through changes of the classification gap.
//!
//! The gap on the side of class `R` is estimated as a union of balls: each
//! origin point (the opposite class) gets the radius of its kth nearest
//! neighbor in `R`. `K1` is the number of distinct reference points picked
//! that way and `K2` the number of test points of the same class that fall
//! strictly inside the union. Too few test points means the class retreated
//! from the gap, too many means it invaded it; both are judged with NSD.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{count_within_union, knn, knn_excluding, LabeledSet, PointSet};
use crate::stats::nsd;

/// One side of the classification gap: a union of balls around the origins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapModel {
    origins: PointSet,
    radii: Vec<f64>,
    k: usize,
    pooled_k1: usize,
}

impl GapModel {
    /// Radius of origin `i` is the distance to its `k`th nearest reference point;
    /// `K1` is the size of the union of all per-origin neighbor sets.
    pub fn estimate(origins: &PointSet, reference: &PointSet, k: usize) -> Result<Self> {
        check_inputs(origins, reference, k)?;
        let mut pooled = HashSet::new();
        let mut radii = Vec::with_capacity(origins.len());
        for origin in origins.iter() {
            let nb = knn(origin, reference, k)?;
            radii.push(nb.distances[k - 1]);
            pooled.extend(nb.indices);
        }
        Ok(Self { origins: origins.clone(), radii, k, pooled_k1: pooled.len() })
    }

    /// Stepped search: origins are processed in order and each one takes its
    /// `k` nearest reference points among those not already claimed, so
    /// `K1 = |origins| * k` exactly.
    pub fn estimate_stepped(origins: &PointSet, reference: &PointSet, k: usize) -> Result<Self> {
        check_inputs(origins, reference, k)?;
        let mut claimed = HashSet::new();
        let mut radii = Vec::with_capacity(origins.len());
        for origin in origins.iter() {
            let nb = knn_excluding(origin, reference, k, &claimed)?;
            radii.push(nb.distances[k - 1]);
            claimed.extend(nb.indices);
        }
        Ok(Self { origins: origins.clone(), radii, k, pooled_k1: claimed.len() })
    }

    pub fn origins(&self) -> &PointSet {
        &self.origins
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// `K1`.
    pub fn pooled_k1(&self) -> usize {
        self.pooled_k1
    }

    /// `K2`: distinct test points strictly inside the union of balls.
    pub fn count_test(&self, test: &PointSet) -> Result<usize> {
        count_within_union(&self.origins, &self.radii, test)
    }
}

fn check_inputs(origins: &PointSet, reference: &PointSet, k: usize) -> Result<()> {
    if origins.is_empty() || reference.is_empty() {
        return Err(Error::EmptySet);
    }
    if origins.dim() != reference.dim() {
        return Err(Error::DimensionMismatch { expected: origins.dim(), found: reference.dim() });
    }
    if k == 0 {
        return Err(Error::InvalidConfig("k must be at least 1".into()));
    }
    if k > reference.len() {
        return Err(Error::KTooLarge { k, available: reference.len() });
    }
    Ok(())
}

pub fn estimate_gap(origins: &PointSet, reference: &PointSet, k: usize) -> Result<GapModel> {
    GapModel::estimate(origins, reference, k)
}

pub fn count_test(gap: &GapModel, test: &PointSet) -> Result<usize> {
    gap.count_test(test)
}

/// Outcome of one directional test. Serialized as its code 0/1/2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Verdict {
    NoDrift = 0,
    Invasion = 1,
    Retreat = 2,
}

impl Verdict {
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn is_drift(self) -> bool {
        self != Verdict::NoDrift
    }
}

impl From<Verdict> for u8 {
    fn from(v: Verdict) -> u8 {
        v.code()
    }
}

impl TryFrom<u8> for Verdict {
    type Error = String;

    fn try_from(code: u8) -> std::result::Result<Self, String> {
        match code {
            0 => Ok(Verdict::NoDrift),
            1 => Ok(Verdict::Invasion),
            2 => Ok(Verdict::Retreat),
            other => Err(format!("unknown verdict code {other}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftEvidence {
    pub k1: u64,
    pub k2: u64,
    /// `NSD(K1, K2 + 1)`.
    pub p_retreat: f64,
    /// `1 - NSD(K1, K2)`; 1 when `K2 = 0`.
    pub p_invasion: f64,
    pub verdict: Verdict,
}

/// The two directional tests of one window pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftReport {
    /// Origins = old positives, reference = old negatives, test = new negatives.
    pub direction_minus: DriftEvidence,
    /// Origins = old negatives, reference = old positives, test = new positives.
    pub direction_plus: DriftEvidence,
    pub drift_flag: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub k: usize,
    pub theta: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self { k: 1, theta: 0.05 }
    }
}

impl DetectorConfig {
    pub fn new(k: usize, theta: f64) -> Result<Self> {
        let cfg = Self { k, theta };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidConfig("k must be at least 1".into()));
        }
        check_theta(self.theta)
    }
}

fn check_theta(theta: f64) -> Result<()> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::InvalidConfig(format!("theta must lie in (0, 1), got {theta}")));
    }
    Ok(())
}

/// Retreat iff `K1 > K2` and `NSD(K1, K2 + 1) < theta`;
/// invasion iff `K1 < K2` and `1 - NSD(K1, K2) < theta`.
pub fn decide(k1: u64, k2: u64, theta: f64) -> Result<DriftEvidence> {
    check_theta(theta)?;
    let p_retreat = nsd(k1, k2 + 1)?;
    let p_invasion = if k2 == 0 { 1.0 } else { 1.0 - nsd(k1, k2)? };
    let verdict = if k1 > k2 && p_retreat < theta {
        Verdict::Retreat
    } else if k1 < k2 && p_invasion < theta {
        Verdict::Invasion
    } else {
        Verdict::NoDrift
    };
    Ok(DriftEvidence { k1, k2, p_retreat, p_invasion, verdict })
}

/// Gap estimate on `origins`/`reference`, counted on `test`, then [`decide`].
pub fn test_direction(
    origins: &PointSet,
    reference: &PointSet,
    test: &PointSet,
    cfg: &DetectorConfig,
) -> Result<DriftEvidence> {
    let gap = GapModel::estimate(origins, reference, cfg.k)?;
    let k2 = gap.count_test(test)?;
    decide(gap.pooled_k1() as u64, k2 as u64, cfg.theta)
}

/// Compares window `x2` against window `x1`, testing both sides of the gap.
pub fn detect_drift(x1: &LabeledSet, x2: &LabeledSet, cfg: &DetectorConfig) -> Result<DriftReport> {
    cfg.validate()?;
    if x1.dim() != x2.dim() {
        return Err(Error::DimensionMismatch { expected: x1.dim(), found: x2.dim() });
    }
    for window in [x1, x2] {
        for positive in [true, false] {
            let n = window.class_count(positive);
            if n == 0 {
                return Err(Error::ClassMissing(positive as u8));
            }
            if n < cfg.k + 1 {
                return Err(Error::KTooLarge { k: cfg.k + 1, available: n });
            }
        }
    }
    let (x1_pos, x1_neg) = (x1.class(true), x1.class(false));
    let direction_minus = test_direction(&x1_pos, &x1_neg, &x2.class(false), cfg)?;
    let direction_plus = test_direction(&x1_neg, &x1_pos, &x2.class(true), cfg)?;
    Ok(DriftReport {
        direction_minus,
        direction_plus,
        drift_flag: direction_minus.verdict.is_drift() || direction_plus.verdict.is_drift(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn decide_examples() {
        let even = decide(20, 20, 0.05).unwrap();
        assert_eq!(even.verdict, Verdict::NoDrift);
        assert_abs_diff_eq!(even.p_invasion, 0.5, epsilon = 1e-12);

        let empty = decide(10, 0, 0.05).unwrap();
        assert_eq!(empty.verdict, Verdict::Retreat);
        assert_abs_diff_eq!(empty.p_retreat, 0.5f64.powi(10), epsilon = 1e-15);
        assert_eq!(empty.p_invasion, 1.0);

        // I_0.5(20, 6) = 0.0020386576652526855 from the binomial tail.
        let r = decide(20, 5, 0.05).unwrap();
        assert_abs_diff_eq!(r.p_retreat, 0.002_038_657_665_252_685_5, epsilon = 1e-12);
        assert_eq!(r.verdict, Verdict::Retreat);

        // 1 - I_0.5(10, 30) = 0.00053250981727615.
        let i = decide(10, 30, 0.05).unwrap();
        assert_abs_diff_eq!(i.p_invasion, 0.000_532_509_817_276_15, epsilon = 1e-12);
        assert_eq!(i.verdict, Verdict::Invasion);
    }

    #[test]
    fn decide_rejects_bad_input() {
        assert_eq!(decide(0, 3, 0.05), Err(Error::NsdParamNonPositive { k1: 0, k2: 4 }));
        assert!(decide(3, 3, 0.0).is_err());
        assert!(decide(3, 3, 1.0).is_err());
    }

    #[test]
    fn verdict_codes_round_trip() {
        for v in [Verdict::NoDrift, Verdict::Invasion, Verdict::Retreat] {
            assert_eq!(Verdict::try_from(v.code()).unwrap(), v);
        }
        assert!(Verdict::try_from(3).is_err());
    }

    #[test]
    fn disjoint_origins_pool_all_neighbors() {
        let origins = PointSet::from_rows(2, [[0.0, 0.0], [100.0, 0.0]]).unwrap();
        let reference =
            PointSet::from_rows(2, [[1.0, 0.0], [2.0, 0.0], [3.0, 0.0], [101.0, 0.0], [102.0, 0.0], [103.0, 0.0]])
                .unwrap();
        let gap = estimate_gap(&origins, &reference, 2).unwrap();
        assert_eq!(gap.pooled_k1(), 4);
        assert_eq!(gap.radii(), &[2.0, 2.0]);
    }

    #[test]
    fn identical_origins_share_neighbors() {
        let origins = PointSet::from_rows(2, [[0.0, 0.0], [0.0, 0.0]]).unwrap();
        let reference = PointSet::from_rows(2, [[1.0, 0.0], [0.0, 2.0], [3.0, 0.0]]).unwrap();
        let gap = estimate_gap(&origins, &reference, 2).unwrap();
        assert_eq!(gap.pooled_k1(), 2);
    }

    #[test]
    fn stepped_search_claims_new_neighbors() {
        let origins = PointSet::from_rows(1, [[0.0], [0.1]]).unwrap();
        let reference = PointSet::from_rows(1, [[1.0], [2.0], [3.0], [4.0]]).unwrap();
        let plain = estimate_gap(&origins, &reference, 2).unwrap();
        assert_eq!(plain.pooled_k1(), 2);
        let stepped = GapModel::estimate_stepped(&origins, &reference, 2).unwrap();
        assert_eq!(stepped.pooled_k1(), 4);
        assert_abs_diff_eq!(stepped.radii()[1], 3.9, epsilon = 1e-12);
    }

    #[test]
    fn estimate_errors() {
        let o = PointSet::from_rows(2, [[0.0, 0.0]]).unwrap();
        let r = PointSet::from_rows(2, [[1.0, 0.0]]).unwrap();
        assert_eq!(estimate_gap(&o, &r, 2), Err(Error::KTooLarge { k: 2, available: 1 }));
        assert_eq!(estimate_gap(&PointSet::new(2).unwrap(), &r, 1), Err(Error::EmptySet));
        let r3 = PointSet::from_rows(3, [[1.0, 0.0, 0.0]]).unwrap();
        assert!(matches!(estimate_gap(&o, &r3, 1), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn count_test_edges() {
        let o = PointSet::from_rows(2, [[0.0, 0.0]]).unwrap();
        let r = PointSet::from_rows(2, [[1.0, 0.0], [0.0, 2.0]]).unwrap();
        let gap = estimate_gap(&o, &r, 1).unwrap();
        assert_eq!(count_test(&gap, &PointSet::new(2).unwrap()).unwrap(), 0);
        let far = PointSet::from_rows(2, [[5.0, 5.0], [-3.0, 0.0]]).unwrap();
        assert_eq!(count_test(&gap, &far).unwrap(), 0);
    }

    #[test]
    fn detect_requires_both_classes() {
        let pts = PointSet::from_rows(1, [[0.0], [1.0], [2.0], [3.0]]).unwrap();
        let only_pos = LabeledSet::new(pts.clone(), vec![true; 4]).unwrap();
        let mixed = LabeledSet::new(pts.clone(), vec![true, true, false, false]).unwrap();
        let cfg = DetectorConfig::default();
        assert_eq!(detect_drift(&only_pos, &mixed, &cfg), Err(Error::ClassMissing(0)));
        assert_eq!(detect_drift(&mixed, &only_pos, &cfg), Err(Error::ClassMissing(0)));

        let thin = LabeledSet::new(pts, vec![true, false, false, false]).unwrap();
        assert_eq!(detect_drift(&thin, &mixed, &cfg), Err(Error::KTooLarge { k: 2, available: 1 }));
        assert!(detect_drift(&mixed, &mixed, &DetectorConfig { k: 0, theta: 0.05 }).is_err());
    }
}
