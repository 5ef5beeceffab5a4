//! Predictive-value requirements for guaranteed MAP recognition.
//!
//! If the adopted evidence is correct and singles out one object, MAP
//! fusion returns that object provided every classifier's PPV and NPV clear
//! a bound that depends only on the attribute prior `w` and the prior
//! ratios `r+`, `r-`:
//!
//! ```text
//! p+ >= r+ w / (1 + (r+ - 1) w)
//! p- >= r- (1 - w) / (w + r- (1 - w))
//! ```
//!
//! This module evaluates those bounds, certifies evidence sets against
//! them, bounds the false-positive / false-negative rates a calibration can
//! imply, and runs a randomized end-to-end check of the guarantee.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::catalog::{CatalogStats, ObjectCatalog};
use crate::classifier::{BinCalibration, ClassifierModel, ModelSet, Outcome};
use crate::error::FusionError;
use crate::fusion::{Observation, PosteriorState};

/// Absolute slack on every bound comparison.
pub const BOUND_TOLERANCE: f64 = 1e-12;

/// `(ppv_bound, npv_bound)` for a mixed attribute.
pub fn theorem1_bounds(stats: &CatalogStats, attribute: usize) -> Result<(f64, f64), FusionError> {
    let w = *stats.w.get(attribute).ok_or(FusionError::UnknownAttribute(attribute))?;
    let (Some(rp), Some(rm)) = (stats.r_plus[attribute], stats.r_minus[attribute]) else {
        return Err(FusionError::UnusableAttribute(attribute));
    };
    Ok(bounds_from(w, rp, rm))
}

pub fn bounds_from(w: f64, r_plus: f64, r_minus: f64) -> (f64, f64) {
    let ppv = r_plus * w / (1.0 + (r_plus - 1.0) * w);
    let npv = r_minus * (1.0 - w) / (w + r_minus * (1.0 - w));
    (ppv, npv)
}

fn meets(value: Option<f64>, bound: f64) -> bool {
    value.is_some_and(|v| v >= bound - BOUND_TOLERANCE)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinRequirement {
    pub bin: usize,
    pub reliable: bool,
    pub ppv: Option<f64>,
    pub npv: Option<f64>,
    pub ppv_ok: bool,
    pub npv_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeRequirement {
    pub attribute: String,
    /// `None` for constant attributes, which never enter fusion.
    pub ppv_bound: Option<f64>,
    pub npv_bound: Option<f64>,
    pub bins: Vec<BinRequirement>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequirementReport {
    pub attributes: Vec<AttributeRequirement>,
    /// All flags hold over every reliable bin.
    pub overall_ok: bool,
}

pub fn requirement_report(catalog: &ObjectCatalog, stats: &CatalogStats, models: &ModelSet) -> RequirementReport {
    let mut overall_ok = true;
    let attributes = catalog
        .attributes()
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let bounds = theorem1_bounds(stats, i).ok();
            let bins = models
                .get(i)
                .map(|m| {
                    m.calibrations
                        .iter()
                        .enumerate()
                        .map(|(k, cal)| {
                            let (ppv_ok, npv_ok) = match bounds {
                                Some((pb, nb)) => (meets(cal.ppv, pb), meets(cal.npv, nb)),
                                None => (false, false),
                            };
                            if cal.reliable && bounds.is_some() {
                                overall_ok &= ppv_ok && npv_ok;
                            }
                            BinRequirement {
                                bin: k,
                                reliable: cal.reliable,
                                ppv: cal.ppv,
                                npv: cal.npv,
                                ppv_ok,
                                npv_ok,
                            }
                        })
                        .collect()
                })
                .unwrap_or_default();
            AttributeRequirement {
                attribute: name.clone(),
                ppv_bound: bounds.map(|b| b.0),
                npv_bound: bounds.map(|b| b.1),
                bins,
            }
        })
        .collect();
    RequirementReport { attributes, overall_ok }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Positive,
    Negative,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Failure {
    OverlappingEvidence,
    Contradictory,
    Ambiguous(Vec<usize>),
    UnusableAttribute(usize),
    MissingModel(usize),
    BoundViolation { attribute: usize, bin: usize, side: Side },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Guaranteed(usize),
    NotGuaranteed(Failure),
}

/// Checks whether correct evidence `(pos, neg)` is guaranteed to be
/// recognized as a single object: the evidence must isolate exactly one
/// candidate, and every reliable bin of every attribute involved must meet
/// its predictive-value bound on the side the evidence uses.
pub fn certify_guaranteed_recognition(
    catalog: &ObjectCatalog,
    models: &ModelSet,
    pos: &BTreeSet<usize>,
    neg: &BTreeSet<usize>,
) -> Verdict {
    use Verdict::NotGuaranteed;
    if !pos.is_disjoint(neg) {
        return NotGuaranteed(Failure::OverlappingEvidence);
    }
    let candidates = catalog.unique_candidates(pos, neg);
    let object = match candidates.objects.as_slice() {
        [] => return NotGuaranteed(Failure::Contradictory),
        [only] => *only,
        many => return NotGuaranteed(Failure::Ambiguous(many.to_vec())),
    };
    let stats = catalog.stats();
    let sides = pos
        .iter()
        .map(|&i| (i, Side::Positive))
        .chain(neg.iter().map(|&i| (i, Side::Negative)));
    for (i, side) in sides {
        let Ok((pb, nb)) = theorem1_bounds(&stats, i) else {
            return NotGuaranteed(Failure::UnusableAttribute(i));
        };
        let Some(model) = models.get(i) else {
            return NotGuaranteed(Failure::MissingModel(i));
        };
        for (k, cal) in model.calibrations.iter().enumerate().filter(|(_, c)| c.reliable) {
            let ok = match side {
                Side::Positive => meets(cal.ppv, pb),
                Side::Negative => meets(cal.npv, nb),
            };
            if !ok {
                return NotGuaranteed(Failure::BoundViolation {
                    attribute: i,
                    bin: k,
                    side,
                });
            }
        }
    }
    Verdict::Guaranteed(object)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinRateBound {
    pub bin: usize,
    /// `(1 - p+) / (1 - w)`; `None` without a PPV.
    pub q_upper: Option<f64>,
    /// `(1 - p-) / w`; `None` without an NPV.
    pub v_upper: Option<f64>,
    pub q: f64,
    pub v: f64,
    pub q_ok: bool,
    pub v_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateBounds {
    pub attribute: String,
    pub bins: Vec<BinRateBound>,
}

pub fn rate_upper_bounds(w: f64, ppv: f64, npv: f64) -> (f64, f64) {
    ((1.0 - ppv) / (1.0 - w), (1.0 - npv) / w)
}

pub fn rate_bounds(model: &ClassifierModel, stats: &CatalogStats, attribute: usize) -> Result<RateBounds, FusionError> {
    if !stats.is_usable(attribute) {
        return Err(FusionError::UnusableAttribute(attribute));
    }
    let w = stats.w[attribute];
    let bins = model
        .calibrations
        .iter()
        .enumerate()
        .map(|(k, cal)| {
            let q_upper = cal.ppv.map(|p| (1.0 - p) / (1.0 - w));
            let v_upper = cal.npv.map(|p| (1.0 - p) / w);
            BinRateBound {
                bin: k,
                q_upper,
                v_upper,
                q: cal.false_positive_rate,
                v: cal.false_negative_rate,
                q_ok: q_upper.is_some_and(|u| cal.false_positive_rate <= u + BOUND_TOLERANCE),
                v_ok: v_upper.is_some_and(|u| cal.false_negative_rate <= u + BOUND_TOLERANCE),
            }
        })
        .collect();
    Ok(RateBounds {
        attribute: model.attribute.clone(),
        bins,
    })
}

/// False-positive and false-negative rates consistent with the given
/// predictive values, attribute prior and detection / true-negative rates.
pub fn implied_false_rates(w: f64, ppv: f64, npv: f64, detection: f64, true_negative: f64) -> (f64, f64) {
    let q = detection * w * (1.0 - ppv) / (ppv * (1.0 - w));
    let v = true_negative * (1.0 - w) * (1.0 - npv) / (npv * w);
    (q, v)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theorem1Case {
    pub catalog_size: (usize, usize),
    pub truth: usize,
    pub decided: Option<usize>,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theorem1Report {
    pub cases: usize,
    pub correct: usize,
    pub certified: usize,
    /// First few failing cases, for diagnosis.
    pub failures: Vec<Theorem1Case>,
}

impl Theorem1Report {
    pub fn passed(&self) -> bool {
        self.cases > 0 && self.correct == self.cases && self.certified == self.cases
    }
}

const MAX_OBJECTS: usize = 6;
const MAX_ATTRIBUTES: usize = 8;
const MIN_PRIOR_WEIGHT: f64 = 0.05;

/// Randomized end-to-end check: small catalogs with random priors,
/// calibrations above the bounds, and correct evidence that singles out the
/// ground truth. Every case must decide the truth uniquely.
pub fn theorem1_suite(cases: usize, seed: u64) -> Theorem1Report {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = Theorem1Report {
        cases: 0,
        correct: 0,
        certified: 0,
        failures: Vec::new(),
    };
    while report.cases < cases {
        let Some(case) = theorem1_case(&mut rng) else {
            continue;
        };
        report.cases += 1;
        let ok = case.decided == Some(case.truth);
        let certified = case.verdict == Verdict::Guaranteed(case.truth);
        report.correct += ok as usize;
        report.certified += certified as usize;
        if !(ok && certified) && report.failures.len() < 10 {
            report.failures.push(case);
        }
    }
    report
}

fn random_catalog<R: Rng>(rng: &mut R) -> ObjectCatalog {
    let n = rng.random_range(2..=MAX_OBJECTS);
    let m = rng.random_range(1..=MAX_ATTRIBUTES);
    let matrix = (0..n).map(|_| (0..m).map(|_| rng.random_bool(0.5)).collect()).collect();
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(MIN_PRIOR_WEIGHT..1.0)).collect();
    let sum: f64 = raw.iter().sum();
    ObjectCatalog::new(
        (0..n).map(|j| format!("o{j}")).collect(),
        (0..m).map(|i| format!("f{i}")).collect(),
        matrix,
        raw.iter().map(|p| p / sum).collect(),
    )
    .expect("generated catalog is valid")
}

/// Predictive value strictly inside `(bound, 1)`.
fn above<R: Rng>(rng: &mut R, bound: f64) -> f64 {
    bound + (1.0 - bound) * rng.random_range(0.05..0.95)
}

fn theorem1_case<R: Rng>(rng: &mut R) -> Option<Theorem1Case> {
    let catalog = random_catalog(rng);
    let stats = catalog.stats();
    let n = catalog.num_objects();
    let m = catalog.num_attributes();
    let truth = rng.random_range(0..n);

    // Two reliable bins with independent predictive values, one unreliable.
    let models = ModelSet {
        bins: Vec::new(),
        classifiers: (0..m)
            .map(|i| {
                let calibrations = match theorem1_bounds(&stats, i) {
                    Ok((pb, nb)) => (0..2)
                        .map(|k| BinCalibration::with_rates(k, above(rng, pb), above(rng, nb), 0.5, 0.5, 0.0, 0.0))
                        .chain([BinCalibration::unreliable(2)])
                        .collect(),
                    Err(_) => (0..3).map(BinCalibration::unreliable).collect(),
                };
                ClassifierModel {
                    attribute: catalog.attributes()[i].clone(),
                    orientation: Default::default(),
                    calibrations,
                }
            })
            .collect(),
    };

    // Grow correct evidence over usable attributes until it isolates truth.
    let mut order: Vec<usize> = (0..m).filter(|&i| stats.is_usable(i)).collect();
    order.shuffle(rng);
    let mut pos = BTreeSet::new();
    let mut neg = BTreeSet::new();
    let mut observations = Vec::new();
    let correct = |i: usize| {
        if catalog.has(truth, i) {
            Outcome::Positive
        } else {
            Outcome::Negative
        }
    };
    for &i in &order {
        if catalog.unique_candidates(&pos, &neg).unique() == Some(truth) {
            break;
        }
        let outcome = correct(i);
        if outcome == Outcome::Positive {
            pos.insert(i);
        } else {
            neg.insert(i);
        }
        for _ in 0..rng.random_range(1..=3) {
            observations.push(Observation::new(i, rng.random_range(0..2), outcome, true));
        }
    }
    if catalog.unique_candidates(&pos, &neg).unique() != Some(truth) {
        return None;
    }
    // Extra correct evidence, and observations that must be ignored.
    for _ in 0..rng.random_range(0..4) {
        let i = order[rng.random_range(0..order.len())];
        let outcome = correct(i);
        if outcome == Outcome::Positive {
            pos.insert(i);
        } else {
            neg.insert(i);
        }
        observations.push(Observation::new(i, rng.random_range(0..2), outcome, true));
    }
    for _ in 0..rng.random_range(0..3) {
        let i = rng.random_range(0..m);
        observations.push(Observation::new(i, rng.random_range(0..2), Outcome::Uncertain, true));
        observations.push(Observation::new(i, 2, Outcome::Positive, false));
    }
    observations.shuffle(rng);

    let mut state = PosteriorState::new(&catalog);
    for obs in &observations {
        let model = models.get(obs.attribute).expect("model per attribute");
        state.update(&catalog, &stats, model, obs).expect("valid observation");
    }
    let decided = state.decide(&catalog).winner;
    let verdict = certify_guaranteed_recognition(&catalog, &models, &pos, &neg);
    Some(Theorem1Case {
        catalog_size: (n, m),
        truth,
        decided,
        verdict,
    })
}
