//! Per-attribute score classifiers.
//!
//! A classifier turns a raw score into a ternary outcome using two
//! thresholds learned per environment bin: one tuned for positive
//! predictive value, one for negative predictive value. Scores between the
//! two are uncertain and carry no evidence. A bin whose thresholds cannot
//! meet the targets is outside the classifier's reliable region and every
//! score there is uncertain.
//!
//! Internally all sweeps run on an oriented key where lower means more
//! positive; `HigherIsPositive` scores are negated on the way in and out.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::catalog::ObjectCatalog;
use crate::error::{CalibrationError, ModelError};

pub const DEFAULT_TARGET_PPV: f64 = 0.96;
pub const DEFAULT_TARGET_NPV: f64 = 0.96;
pub const DEFAULT_MIN_DETECTION_RATE: f64 = 0.09;
pub const DEFAULT_KDE_BANDWIDTH: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Orientation {
    /// Matching distances, outlier fractions: small score means "has it".
    #[default]
    LowerIsPositive,
    HigherIsPositive,
}

impl Orientation {
    #[inline]
    fn key(self, score: f64) -> f64 {
        match self {
            Orientation::LowerIsPositive => score,
            Orientation::HigherIsPositive => -score,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Orientation::LowerIsPositive => Orientation::HigherIsPositive,
            Orientation::HigherIsPositive => Orientation::LowerIsPositive,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Positive,
    Negative,
    Uncertain,
}

impl Outcome {
    pub fn is_adopted(self) -> bool {
        self != Outcome::Uncertain
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationTargets {
    pub target_ppv: f64,
    pub target_npv: f64,
    pub min_detection_rate: f64,
}

impl Default for CalibrationTargets {
    fn default() -> Self {
        Self {
            target_ppv: DEFAULT_TARGET_PPV,
            target_npv: DEFAULT_TARGET_NPV,
            min_detection_rate: DEFAULT_MIN_DETECTION_RATE,
        }
    }
}

impl CalibrationTargets {
    fn validate(&self) -> Result<(), CalibrationError> {
        for (name, value) in [("ppv", self.target_ppv), ("npv", self.target_npv)] {
            if !(value > 0.0 && value <= 1.0) {
                return Err(CalibrationError::BadTarget { name, value });
            }
        }
        if !(0.0..=1.0).contains(&self.min_detection_rate) {
            return Err(CalibrationError::BadDetectionFloor(self.min_detection_rate));
        }
        Ok(())
    }
}

/// Thresholds and empirical rates for one environment bin.
///
/// Rates are measured on the calibration sample. When a threshold does not
/// exist its rates are zero and the matching predictive value is `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinCalibration {
    pub bin_index: usize,
    pub theta_pos: Option<f64>,
    pub theta_neg: Option<f64>,
    pub ppv: Option<f64>,
    pub npv: Option<f64>,
    #[serde(rename = "d")]
    pub detection_rate: f64,
    #[serde(rename = "s")]
    pub true_negative_rate: f64,
    #[serde(rename = "q")]
    pub false_positive_rate: f64,
    #[serde(rename = "v")]
    pub false_negative_rate: f64,
    pub reliable: bool,
}

impl BinCalibration {
    /// Calibration record for a bin with fixed predictive values, as used by
    /// the analytic harnesses that bypass scores.
    pub fn with_rates(
        bin_index: usize,
        ppv: f64,
        npv: f64,
        detection_rate: f64,
        true_negative_rate: f64,
        false_positive_rate: f64,
        false_negative_rate: f64,
    ) -> Self {
        Self {
            bin_index,
            theta_pos: Some(0.0),
            theta_neg: Some(1.0),
            ppv: Some(ppv),
            npv: Some(npv),
            detection_rate,
            true_negative_rate,
            false_positive_rate,
            false_negative_rate,
            reliable: true,
        }
    }

    pub fn unreliable(bin_index: usize) -> Self {
        Self {
            bin_index,
            theta_pos: None,
            theta_neg: None,
            ppv: None,
            npv: None,
            detection_rate: 0.0,
            true_negative_rate: 0.0,
            false_positive_rate: 0.0,
            false_negative_rate: 0.0,
            reliable: false,
        }
    }
}

/// Sorted oriented keys with counting helpers.
struct Sample {
    keys: Vec<f64>,
}

impl Sample {
    fn new(scores: &[f64], orientation: Orientation, label: &'static str) -> Result<Self, CalibrationError> {
        if scores.is_empty() {
            return Err(CalibrationError::EmptySample(label));
        }
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(CalibrationError::NonFinite(label));
        }
        let mut keys: Vec<f64> = scores.iter().map(|&s| orientation.key(s)).collect();
        keys.sort_by(f64::total_cmp);
        Ok(Self { keys })
    }

    fn len(&self) -> usize {
        self.keys.len()
    }

    fn at_most(&self, t: f64) -> usize {
        self.keys.partition_point(|&k| k <= t)
    }

    fn at_least(&self, t: f64) -> usize {
        self.keys.len() - self.keys.partition_point(|&k| k < t)
    }
}

/// Candidate cut points: midpoints between consecutive distinct keys plus a
/// sentinel below the minimum and one above the maximum.
fn candidates(pos: &Sample, neg: &Sample) -> Vec<f64> {
    let mut all: Vec<f64> = pos.keys.iter().chain(&neg.keys).copied().collect();
    all.sort_by(f64::total_cmp);
    all.dedup();
    let lo = all[0];
    let hi = all[all.len() - 1];
    let pad = (hi - lo).max(1.0);
    let mut out = Vec::with_capacity(all.len() + 1);
    out.push(lo - pad);
    out.extend(all.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    out.push(hi + pad);
    out
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn ppv_at(pos: &Sample, neg: &Sample, t: f64) -> Option<f64> {
    let tp = pos.at_most(t);
    let fp = neg.at_most(t);
    (tp + fp > 0).then(|| ratio(tp, tp + fp))
}

fn npv_at(pos: &Sample, neg: &Sample, t: f64) -> Option<f64> {
    let tn = neg.at_least(t);
    let fn_ = pos.at_least(t);
    (tn + fn_ > 0).then(|| ratio(tn, tn + fn_))
}

fn qualifies_pos(pos: &Sample, neg: &Sample, t: f64, targets: &CalibrationTargets) -> bool {
    ppv_at(pos, neg, t).is_some_and(|p| p >= targets.target_ppv)
        && ratio(pos.at_most(t), pos.len()) >= targets.min_detection_rate
}

fn qualifies_neg(pos: &Sample, neg: &Sample, t: f64, targets: &CalibrationTargets) -> bool {
    npv_at(pos, neg, t).is_some_and(|p| p >= targets.target_npv)
        && ratio(neg.at_least(t), neg.len()) >= targets.min_detection_rate
}

/// Learns the two thresholds of one bin by counting.
///
/// `theta_pos` is the most permissive cut whose empirical PPV and detection
/// rate meet the targets; `theta_neg` is the most permissive cut meeting the
/// NPV target and the same floor on the true-negative rate. When both exist
/// but cross, a single cut meeting both targets (fewest training errors,
/// lowest key on ties) is used for both; if there is none the bin is
/// unreliable.
pub fn calibrate_bin(
    bin_index: usize,
    pos_scores: &[f64],
    neg_scores: &[f64],
    orientation: Orientation,
    targets: &CalibrationTargets,
) -> Result<BinCalibration, CalibrationError> {
    targets.validate()?;
    let pos = Sample::new(pos_scores, orientation, "positive")?;
    let neg = Sample::new(neg_scores, orientation, "negative")?;
    let cands = candidates(&pos, &neg);

    let mut theta_pos = cands
        .iter()
        .rev()
        .copied()
        .find(|&t| qualifies_pos(&pos, &neg, t, targets));
    let mut theta_neg = cands.iter().copied().find(|&t| qualifies_neg(&pos, &neg, t, targets));

    let mut reliable = theta_pos.is_some() && theta_neg.is_some();
    if let (Some(tp), Some(tn)) = (theta_pos, theta_neg) {
        if tp > tn {
            let errors = |c: f64| neg.at_most(c) + (pos.len() - pos.at_most(c));
            let shared = cands
                .iter()
                .copied()
                .filter(|&c| c >= tn && c <= tp)
                .filter(|&c| qualifies_pos(&pos, &neg, c, targets) && qualifies_neg(&pos, &neg, c, targets))
                .min_by(|&a, &b| errors(a).cmp(&errors(b)).then(a.total_cmp(&b)));
            match shared {
                Some(c) => {
                    theta_pos = Some(c);
                    theta_neg = Some(c);
                }
                None => reliable = false,
            }
        }
    }

    let (ppv, d, q) = match theta_pos {
        Some(t) => (
            ppv_at(&pos, &neg, t),
            ratio(pos.at_most(t), pos.len()),
            ratio(neg.at_most(t), neg.len()),
        ),
        None => (None, 0.0, 0.0),
    };
    let (npv, s, v) = match theta_neg {
        Some(t) => (
            npv_at(&pos, &neg, t),
            ratio(neg.at_least(t), neg.len()),
            ratio(pos.at_least(t), pos.len()),
        ),
        None => (None, 0.0, 0.0),
    };
    let unkey = |t: f64| orientation.key(t);
    Ok(BinCalibration {
        bin_index,
        theta_pos: theta_pos.map(unkey),
        theta_neg: theta_neg.map(unkey),
        ppv,
        npv,
        detection_rate: d,
        true_negative_rate: s,
        false_positive_rate: q,
        false_negative_rate: v,
        reliable,
    })
}

/// Calibrated classifier for one attribute, one record per environment bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierModel {
    pub attribute: String,
    #[serde(default)]
    pub orientation: Orientation,
    pub calibrations: Vec<BinCalibration>,
}

impl ClassifierModel {
    pub fn num_bins(&self) -> usize {
        self.calibrations.len()
    }

    pub fn bin(&self, bin: usize) -> Result<&BinCalibration, ModelError> {
        self.calibrations.get(bin).ok_or(ModelError::UnknownBin {
            bin,
            bins: self.calibrations.len(),
        })
    }

    pub fn is_reliable(&self, bin: usize) -> bool {
        self.calibrations.get(bin).is_some_and(|c| c.reliable)
    }

    /// The reliable working region: bins flagged reliable.
    pub fn reliable_region(&self) -> BTreeSet<usize> {
        self.calibrations
            .iter()
            .enumerate()
            .filter(|(_, c)| c.reliable)
            .map(|(k, _)| k)
            .collect()
    }

    pub fn classify(&self, bin: usize, score: f64) -> Result<Outcome, ModelError> {
        let cal = self.bin(bin)?;
        if !cal.reliable {
            return Ok(Outcome::Uncertain);
        }
        let key = self.orientation.key(score);
        if let Some(tp) = cal.theta_pos {
            if key <= self.orientation.key(tp) {
                return Ok(Outcome::Positive);
            }
        }
        if let Some(tn) = cal.theta_neg {
            if key >= self.orientation.key(tn) {
                return Ok(Outcome::Negative);
            }
        }
        Ok(Outcome::Uncertain)
    }
}

/// Classifiers for every attribute of a catalog, in catalog attribute order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSet {
    /// Environment bin edges `[lower, upper)`, informational.
    #[serde(default)]
    pub bins: Vec<[f64; 2]>,
    pub classifiers: Vec<ClassifierModel>,
}

impl ModelSet {
    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        serde_json::from_str(text).map_err(|e| ModelError::Parse(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model set serializes")
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let text = std::fs::read_to_string(path).map_err(|e| ModelError::Parse(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Reorders the classifiers to match the catalog's attribute order.
    pub fn aligned_to(mut self, catalog: &ObjectCatalog) -> Result<Self, ModelError> {
        if self.classifiers.len() != catalog.num_attributes() {
            return Err(ModelError::AttributeCount {
                models: self.classifiers.len(),
                attributes: catalog.num_attributes(),
            });
        }
        let mut ordered = Vec::with_capacity(self.classifiers.len());
        for id in catalog.attributes() {
            let pos = self
                .classifiers
                .iter()
                .position(|c| &c.attribute == id)
                .ok_or_else(|| ModelError::UnknownAttribute(id.clone()))?;
            ordered.push(self.classifiers.swap_remove(pos));
        }
        self.classifiers = ordered;
        Ok(self)
    }

    pub fn get(&self, attribute: usize) -> Option<&ClassifierModel> {
        self.classifiers.get(attribute)
    }
}

/// Single cut minimizing training misclassifications.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BayesThreshold {
    pub threshold: f64,
    pub orientation: Orientation,
    pub errors: usize,
    /// Training PPV / NPV of the cut, `None` when a side predicts nothing.
    pub ppv: Option<f64>,
    pub npv: Option<f64>,
}

impl BayesThreshold {
    pub fn classify(&self, score: f64) -> Outcome {
        if self.orientation.key(score) <= self.orientation.key(self.threshold) {
            Outcome::Positive
        } else {
            Outcome::Negative
        }
    }
}

/// Error-minimizing single threshold over the same candidate sweep as
/// [`calibrate_bin`]. Among tied minimizers the one closest to the middle of
/// the tied range wins, lower key first.
pub fn single_threshold_baseline(
    pos_scores: &[f64],
    neg_scores: &[f64],
    orientation: Orientation,
) -> Result<BayesThreshold, CalibrationError> {
    let pos = Sample::new(pos_scores, orientation, "positive")?;
    let neg = Sample::new(neg_scores, orientation, "negative")?;
    let cands = candidates(&pos, &neg);
    let errors = |c: f64| neg.at_most(c) + (pos.len() - pos.at_most(c));
    let best = cands.iter().map(|&c| errors(c)).min().expect("non-empty");
    let tied: Vec<f64> = cands.iter().copied().filter(|&c| errors(c) == best).collect();
    let centre = 0.5 * (tied[0] + tied[tied.len() - 1]);
    let key = tied
        .iter()
        .copied()
        .min_by(|a, b| (a - centre).abs().total_cmp(&(b - centre).abs()).then(a.total_cmp(b)))
        .expect("non-empty");
    let positives = pos.at_most(key) + neg.at_most(key);
    let negatives = pos.len() + neg.len() - positives;
    Ok(BayesThreshold {
        threshold: orientation.key(key),
        orientation,
        errors: best,
        ppv: (positives > 0).then(|| ratio(pos.at_most(key), positives)),
        npv: (negatives > 0).then(|| ratio(neg.len() - neg.at_most(key), negatives)),
    })
}

/// Gaussian kernel density estimate with fixed bandwidth.
pub fn kde_density(scores: &[f64], bandwidth: f64, eval_points: &[f64]) -> Result<Vec<f64>, CalibrationError> {
    if scores.is_empty() {
        return Err(CalibrationError::EmptySample("kde"));
    }
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return Err(CalibrationError::BadBandwidth(bandwidth));
    }
    let norm = 1.0 / (scores.len() as f64 * bandwidth * (2.0 * PI).sqrt());
    Ok(eval_points
        .iter()
        .map(|&x| {
            let sum: f64 = scores
                .iter()
                .map(|&s| {
                    let u = (x - s) / bandwidth;
                    (-0.5 * u * u).exp()
                })
                .sum();
            sum * norm
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn targets(ppv: f64, det: f64) -> CalibrationTargets {
        CalibrationTargets {
            target_ppv: ppv,
            target_npv: ppv,
            min_detection_rate: det,
        }
    }

    /// Independent brute force: every midpoint of the merged sorted sample
    /// plus generous sentinels, scanned in plain loops.
    fn brute_theta_pos(pos: &[f64], neg: &[f64], ppv: f64, det: f64) -> Option<f64> {
        let mut v: Vec<f64> = pos.iter().chain(neg).copied().collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        let mut cands = vec![f64::NEG_INFINITY];
        for i in 1..v.len() {
            cands.push((v[i - 1] + v[i]) / 2.0);
        }
        cands.push(f64::INFINITY);
        let mut best = None;
        for &t in &cands {
            let tp = pos.iter().filter(|&&x| x <= t).count();
            let fp = neg.iter().filter(|&&x| x <= t).count();
            if tp + fp == 0 {
                continue;
            }
            if tp as f64 / (tp + fp) as f64 >= ppv && tp as f64 / pos.len() as f64 >= det {
                best = Some(t);
            }
        }
        best
    }

    #[test]
    fn separable_sample_cuts_in_the_gap() {
        let pos = [1.0, 2.0, 3.0];
        let neg = [10.0, 11.0, 12.0];
        assert_eq!(brute_theta_pos(&pos, &neg, 1.0, 0.5), Some(6.5));
        let cal = calibrate_bin(0, &pos, &neg, Orientation::LowerIsPositive, &targets(1.0, 0.5)).unwrap();
        assert_eq!(cal.theta_pos, Some(6.5));
        assert_eq!(cal.theta_neg, Some(6.5));
        assert_eq!(cal.ppv, Some(1.0));
        assert_eq!(cal.detection_rate, 1.0);
        assert!(cal.reliable);
    }

    #[test]
    fn total_overlap_is_unreliable() {
        let s = [5.0, 5.0, 5.0];
        let cal = calibrate_bin(0, &s, &s, Orientation::LowerIsPositive, &CalibrationTargets::default()).unwrap();
        assert!(!cal.reliable);
        assert_eq!(cal.theta_pos, None);
    }

    #[test]
    fn default_targets_match_system_parameters() {
        let t = CalibrationTargets::default();
        assert_eq!(t.target_ppv, 0.96);
        assert_eq!(t.min_detection_rate, 0.09);
    }

    #[test]
    fn empty_samples_and_bad_targets_error() {
        let o = Orientation::LowerIsPositive;
        let t = CalibrationTargets::default();
        assert_eq!(
            calibrate_bin(0, &[], &[1.0], o, &t),
            Err(CalibrationError::EmptySample("positive"))
        );
        assert_eq!(
            calibrate_bin(0, &[1.0], &[], o, &t),
            Err(CalibrationError::EmptySample("negative"))
        );
        assert!(calibrate_bin(0, &[1.0], &[2.0], o, &targets(0.0, 0.1)).is_err());
        assert!(calibrate_bin(0, &[1.0], &[2.0], o, &targets(0.9, 1.5)).is_err());
        assert!(calibrate_bin(0, &[f64::NAN], &[2.0], o, &t).is_err());
    }

    #[test]
    fn overlapping_sample_leaves_an_uncertain_zone() {
        // Interleaved middle region forces theta_pos < theta_neg.
        let pos = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.5, 9.5];
        let neg = [5.5, 7.0, 8.0, 9.0, 10.0, 11.0, 12.0, 13.0];
        let cal = calibrate_bin(0, &pos, &neg, Orientation::LowerIsPositive, &targets(1.0, 0.1)).unwrap();
        assert_eq!(cal.theta_pos, Some(5.25));
        assert_eq!(cal.theta_neg, Some(9.75));
        assert!(cal.reliable);
        assert_eq!(cal.detection_rate, 5.0 / 8.0);
        assert_eq!(cal.true_negative_rate, 4.0 / 8.0);
        assert_eq!(cal.false_positive_rate, 0.0);
        assert_eq!(cal.false_negative_rate, 0.0);
    }

    #[test]
    fn crossing_thresholds_collapse_to_a_shared_cut() {
        // One stray sample on each side; at 0.8 the raw cuts are 11.5 and
        // 9.5. Of the shared cuts 9.5, 10.5, 11.5 the middle one makes the
        // fewest training errors.
        let pos = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0, 21.0];
        let neg = [0.5, 11.0, 12.0, 13.0, 14.0, 15.0, 16.0, 17.0, 18.0, 19.0, 20.0];
        let t = targets(0.8, 0.1);
        assert_eq!(brute_theta_pos(&pos, &neg, 0.8, 0.1), Some(11.5));
        let cal = calibrate_bin(0, &pos, &neg, Orientation::LowerIsPositive, &t).unwrap();
        assert!(cal.reliable);
        assert_eq!(cal.theta_pos, Some(10.5));
        assert_eq!(cal.theta_neg, Some(10.5));
        assert!(cal.ppv.unwrap() >= 0.8 && cal.npv.unwrap() >= 0.8);
    }

    #[test]
    fn classify_examples() {
        let model = ClassifierModel {
            attribute: "a".into(),
            orientation: Orientation::LowerIsPositive,
            calibrations: vec![
                BinCalibration {
                    theta_pos: Some(6.5),
                    theta_neg: Some(8.0),
                    ..BinCalibration::with_rates(0, 0.96, 0.96, 0.5, 0.5, 0.0, 0.0)
                },
                BinCalibration::unreliable(1),
            ],
        };
        assert_eq!(model.classify(0, 2.0), Ok(Outcome::Positive));
        assert_eq!(model.classify(0, 7.0), Ok(Outcome::Uncertain));
        assert_eq!(model.classify(0, 9.0), Ok(Outcome::Negative));
        assert_eq!(model.classify(1, 2.0), Ok(Outcome::Uncertain));
        assert_eq!(model.classify(1, 90.0), Ok(Outcome::Uncertain));
        assert_eq!(model.classify(2, 0.0), Err(ModelError::UnknownBin { bin: 2, bins: 2 }));
        assert_eq!(model.reliable_region(), BTreeSet::from([0]));
    }

    #[test]
    fn baseline_examples() {
        let b = single_threshold_baseline(&[1.0, 2.0, 3.0], &[10.0, 11.0, 12.0], Orientation::LowerIsPositive).unwrap();
        assert_eq!(b.threshold, 6.5);
        assert_eq!(b.errors, 0);

        // Candidates 1.5 and 3.5 each make one error; midpoint of the tied
        // range is 2.5, equidistant, so the lower one wins.
        let b = single_threshold_baseline(&[1.0, 3.0], &[2.0, 4.0], Orientation::LowerIsPositive).unwrap();
        assert_eq!(b.errors, 1);
        assert_eq!(b.threshold, 1.5);

        let s = [1.0, 2.0, 3.0];
        let b = single_threshold_baseline(&s, &s, Orientation::LowerIsPositive).unwrap();
        assert_eq!(b.errors, 3);
        let again = single_threshold_baseline(&s, &s, Orientation::LowerIsPositive).unwrap();
        assert_eq!(b, again);
        assert!(single_threshold_baseline(&[], &s, Orientation::LowerIsPositive).is_err());
    }

    #[test]
    fn kde_examples() {
        let d = kde_density(&[0.0], 1.0, &[0.0]).unwrap();
        assert!((d[0] - 1.0 / (2.0 * PI).sqrt()).abs() < 1e-15);
        let d = kde_density(&[-2.0, 2.0], 1.5, &[-0.7, 0.7, -3.1, 3.1]).unwrap();
        assert!((d[0] - d[1]).abs() < 1e-15);
        assert!((d[2] - d[3]).abs() < 1e-15);
        assert!(kde_density(&[], 1.0, &[0.0]).is_err());
        assert!(kde_density(&[1.0], 0.0, &[0.0]).is_err());
    }

    #[test]
    fn kde_integrates_to_one() {
        let scores = [3.0, 10.0, 11.5, 20.0, 40.0];
        let grid: Vec<f64> = (0..=8000).map(|i| -40.0 + 0.015 * i as f64).collect();
        let dens = kde_density(&scores, 3.0, &grid).unwrap();
        let area: f64 = dens.windows(2).map(|w| 0.5 * (w[0] + w[1]) * 0.015).sum();
        assert!((area - 1.0).abs() < 1e-3);
    }

    fn sample_strategy() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        let v = || prop::collection::vec((0i32..60).prop_map(|x| x as f64 * 0.5), 1..25);
        (v(), v())
    }

    proptest! {
        #[test]
        fn theta_pos_matches_brute_force((pos, neg) in sample_strategy(), ppv in 0.5f64..=1.0, det in 0.0f64..0.6) {
            let cal = calibrate_bin(0, &pos, &neg, Orientation::LowerIsPositive, &targets(ppv, det)).unwrap();
            let brute = brute_theta_pos(&pos, &neg, ppv, det);
            // A crossed pair may pull theta_pos back, never forward.
            match (brute, cal.theta_pos) {
                (None, got) => prop_assert_eq!(got, None),
                (Some(b), Some(got)) => {
                    if cal.theta_neg.is_none_or(|tn| tn >= b) {
                        // Sentinels differ between the two sweeps.
                        prop_assert!(got == b || (b.is_infinite() && got > *pos.iter().chain(&neg).max_by(|a, b| a.total_cmp(b)).unwrap()));
                    } else {
                        prop_assert!(got <= b);
                    }
                }
                (Some(_), None) => prop_assert!(false, "missing theta_pos"),
            }
        }

        #[test]
        fn reliable_bins_meet_targets_on_their_sample((pos, neg) in sample_strategy(), ppv in 0.5f64..=1.0, det in 0.0f64..0.6) {
            let t = targets(ppv, det);
            let cal = calibrate_bin(0, &pos, &neg, Orientation::LowerIsPositive, &t).unwrap();
            if cal.reliable {
                let tp = cal.theta_pos.unwrap();
                let tn = cal.theta_neg.unwrap();
                prop_assert!(tp <= tn);
                let hits = pos.iter().filter(|&&x| x <= tp).count();
                let fps = neg.iter().filter(|&&x| x <= tp).count();
                prop_assert!(hits as f64 / (hits + fps) as f64 >= ppv);
                prop_assert!(hits as f64 / pos.len() as f64 >= det);
                let tns = neg.iter().filter(|&&x| x >= tn).count();
                let fns = pos.iter().filter(|&&x| x >= tn).count();
                prop_assert!(tns as f64 / (tns + fns) as f64 >= ppv);
                let unc_pos = pos.iter().filter(|&&x| x > tp && x < tn).count() as f64 / pos.len() as f64;
                prop_assert!((cal.detection_rate + cal.false_negative_rate + unc_pos - 1.0).abs() < 1e-12);
                let unc_neg = neg.iter().filter(|&&x| x > tp && x < tn).count() as f64 / neg.len() as f64;
                prop_assert!((cal.true_negative_rate + cal.false_positive_rate + unc_neg - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn raising_target_ppv_never_loosens_theta_pos((pos, neg) in sample_strategy(), a in 0.5f64..=1.0, b in 0.5f64..=1.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let loose = brute_theta_pos(&pos, &neg, lo, 0.0);
            let strict = brute_theta_pos(&pos, &neg, hi, 0.0);
            if let Some(s) = strict {
                prop_assert!(loose.is_some_and(|l| s <= l));
            }
        }

        #[test]
        fn orientation_mirror((pos, neg) in sample_strategy(), probes in prop::collection::vec(-5.0f64..35.0, 1..20)) {
            let t = CalibrationTargets::default();
            let lower = ClassifierModel {
                attribute: "a".into(),
                orientation: Orientation::LowerIsPositive,
                calibrations: vec![calibrate_bin(0, &pos, &neg, Orientation::LowerIsPositive, &t).unwrap()],
            };
            let npos: Vec<f64> = pos.iter().map(|x| -x).collect();
            let nneg: Vec<f64> = neg.iter().map(|x| -x).collect();
            let higher = ClassifierModel {
                attribute: "a".into(),
                orientation: Orientation::HigherIsPositive,
                calibrations: vec![calibrate_bin(0, &npos, &nneg, Orientation::HigherIsPositive, &t).unwrap()],
            };
            for x in probes {
                prop_assert_eq!(lower.classify(0, x).unwrap(), higher.classify(0, -x).unwrap());
            }
        }

        #[test]
        fn classify_is_a_two_breakpoint_step(tp in -10.0f64..10.0, gap in 0.0f64..10.0, xs in prop::collection::vec(-30.0f64..30.0, 2..30)) {
            let model = ClassifierModel {
                attribute: "a".into(),
                orientation: Orientation::LowerIsPositive,
                calibrations: vec![BinCalibration {
                    theta_pos: Some(tp),
                    theta_neg: Some(tp + gap),
                    ..BinCalibration::with_rates(0, 0.97, 0.97, 0.5, 0.5, 0.0, 0.0)
                }],
            };
            let mut xs = xs;
            xs.sort_by(f64::total_cmp);
            let outs: Vec<Outcome> = xs.iter().map(|&x| model.classify(0, x).unwrap()).collect();
            // Outcomes along increasing score are positive*, uncertain*, negative*.
            let rank = |o: &Outcome| match o { Outcome::Positive => 0, Outcome::Uncertain => 1, Outcome::Negative => 2 };
            prop_assert!(outs.windows(2).all(|w| rank(&w[0]) <= rank(&w[1])));
        }

        #[test]
        fn sweep_is_deterministic((pos, neg) in sample_strategy()) {
            let t = CalibrationTargets::default();
            let a = calibrate_bin(3, &pos, &neg, Orientation::LowerIsPositive, &t).unwrap();
            let mut rpos = pos.clone();
            rpos.reverse();
            let b = calibrate_bin(3, &rpos, &neg, Orientation::LowerIsPositive, &t).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
