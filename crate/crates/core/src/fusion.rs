//! Sequential MAP fusion of ternary attribute observations.
//!
//! Each adopted observation multiplies every object's weight by the ratio
//! of the attribute's predictive value to its prior, chosen by whether the
//! object has the attribute:
//!
//! | outcome  | object has it | object lacks it |
//! |----------|---------------|-----------------|
//! | positive | `p+ / w`      | `(1-p+) / (1-w)`|
//! | negative | `(1-p-) / w`  | `p- / (1-w)`    |
//!
//! Uncertain observations and observations outside the classifier's
//! reliable region leave the weights untouched: their conditional
//! probability equals the attribute prior, so the ratio is exactly one.
//! Weights live in log domain and the global normalizer is never formed;
//! normalizing over the finite object set replaces it.

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::catalog::{CatalogStats, ObjectCatalog};
use crate::classifier::{ClassifierModel, ModelSet, Outcome};
use crate::error::{FusionError, ModelError};

/// Smallest factor applied before taking logs; a zero factor saturates here.
pub const SATURATION_FLOOR: f64 = 1e-300;
/// Relative tolerance for treating posterior weights or priors as tied.
pub const TIE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub attribute: usize,
    pub bin: usize,
    pub outcome: Outcome,
    pub in_reliable_region: bool,
}

impl Observation {
    /// Forces the outcome to uncertain outside the reliable region.
    pub fn new(attribute: usize, bin: usize, outcome: Outcome, in_reliable_region: bool) -> Self {
        let outcome = if in_reliable_region {
            outcome
        } else {
            Outcome::Uncertain
        };
        Self {
            attribute,
            bin,
            outcome,
            in_reliable_region,
        }
    }

    pub fn classified(model: &ClassifierModel, attribute: usize, bin: usize, score: f64) -> Result<Self, ModelError> {
        let outcome = model.classify(bin, score)?;
        Ok(Self::new(attribute, bin, outcome, model.is_reliable(bin)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorState {
    pub log_weights: Vec<f64>,
    pub n_pos: Vec<u32>,
    pub n_neg: Vec<u32>,
    pub adopted_pos: BTreeSet<usize>,
    pub adopted_neg: BTreeSet<usize>,
    /// Set once some factor hit [`SATURATION_FLOOR`].
    pub saturated: bool,
}

impl PosteriorState {
    pub fn new(catalog: &ObjectCatalog) -> Self {
        let m = catalog.num_attributes();
        Self {
            log_weights: catalog.priors().iter().map(|p| p.ln()).collect(),
            n_pos: vec![0; m],
            n_neg: vec![0; m],
            adopted_pos: BTreeSet::new(),
            adopted_neg: BTreeSet::new(),
            saturated: false,
        }
    }

    pub fn num_adopted(&self) -> u32 {
        self.n_pos.iter().sum::<u32>() + self.n_neg.iter().sum::<u32>()
    }

    /// Applies one observation. Returns whether it was adopted.
    pub fn update(
        &mut self,
        catalog: &ObjectCatalog,
        stats: &CatalogStats,
        model: &ClassifierModel,
        obs: &Observation,
    ) -> Result<bool, FusionError> {
        if obs.attribute >= catalog.num_attributes() {
            return Err(FusionError::UnknownAttribute(obs.attribute));
        }
        let cal = model.bin(obs.bin)?;
        if !obs.outcome.is_adopted() || !obs.in_reliable_region || !cal.reliable {
            return Ok(false);
        }
        let p = match obs.outcome {
            Outcome::Positive => cal.ppv,
            _ => cal.npv,
        }
        .ok_or(FusionError::MissingPredictiveValue {
            attribute: obs.attribute,
            bin: obs.bin,
        })?;
        self.adopt(catalog, stats, obs.attribute, obs.outcome, p)?;
        Ok(true)
    }

    /// Multiplies in the factor of an adopted outcome with predictive value
    /// `p` (PPV for positives, NPV for negatives).
    pub fn adopt(
        &mut self,
        catalog: &ObjectCatalog,
        stats: &CatalogStats,
        attribute: usize,
        outcome: Outcome,
        p: f64,
    ) -> Result<(), FusionError> {
        if attribute >= catalog.num_attributes() {
            return Err(FusionError::UnknownAttribute(attribute));
        }
        if !stats.is_usable(attribute) {
            return Err(FusionError::UnusableAttribute(attribute));
        }
        let w = stats.w[attribute];
        let (has, lacks) = match outcome {
            Outcome::Positive => (p / w, (1.0 - p) / (1.0 - w)),
            Outcome::Negative => ((1.0 - p) / w, p / (1.0 - w)),
            Outcome::Uncertain => return Ok(()),
        };
        let log_has = self.log_factor(has);
        let log_lacks = self.log_factor(lacks);
        for (j, lw) in self.log_weights.iter_mut().enumerate() {
            *lw += if catalog.has(j, attribute) { log_has } else { log_lacks };
        }
        match outcome {
            Outcome::Positive => {
                self.n_pos[attribute] += 1;
                self.adopted_pos.insert(attribute);
            }
            _ => {
                self.n_neg[attribute] += 1;
                self.adopted_neg.insert(attribute);
            }
        }
        Ok(())
    }

    fn log_factor(&mut self, factor: f64) -> f64 {
        if factor < SATURATION_FLOOR {
            self.saturated = true;
            SATURATION_FLOOR.ln()
        } else {
            factor.ln()
        }
    }

    /// Posterior probabilities (max-shifted exponentiation).
    pub fn normalized(&self) -> Vec<f64> {
        let max = self.max_log_weight();
        let exp: Vec<f64> = self.log_weights.iter().map(|&l| (l - max).exp()).collect();
        let sum: f64 = exp.iter().sum();
        exp.into_iter().map(|e| e / sum).collect()
    }

    pub fn log_normalized(&self) -> Vec<f64> {
        let max = self.max_log_weight();
        let lse = max + self.log_weights.iter().map(|&l| (l - max).exp()).sum::<f64>().ln();
        self.log_weights.iter().map(|&l| l - lse).collect()
    }

    fn max_log_weight(&self) -> f64 {
        self.log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `log P(a | evidence) - log P(b | evidence)`.
    pub fn posterior_ratio(&self, a: usize, b: usize) -> Result<f64, FusionError> {
        let la = *self.log_weights.get(a).ok_or(FusionError::UnknownObject(a))?;
        let lb = *self.log_weights.get(b).ok_or(FusionError::UnknownObject(b))?;
        Ok(la - lb)
    }

    /// MAP decision. Near-ties in weight fall back to the largest prior
    /// among the tied objects; if priors tie as well the whole set is
    /// returned.
    pub fn decide(&self, catalog: &ObjectCatalog) -> Decision {
        let max = self.max_log_weight();
        let slack = (1.0 - TIE_TOLERANCE).ln();
        let tied: Vec<usize> = (0..self.log_weights.len())
            .filter(|&j| self.log_weights[j] >= max + slack)
            .collect();
        if let [only] = tied[..] {
            return Decision {
                winner: Some(only),
                candidates: vec![only],
                tie_broken_by: TieBreak::None,
            };
        }
        let best_prior = tied.iter().map(|&j| catalog.prior(j)).fold(0.0, f64::max);
        let by_prior: Vec<usize> = tied
            .into_iter()
            .filter(|&j| catalog.prior(j) >= best_prior * (1.0 - TIE_TOLERANCE))
            .collect();
        match by_prior[..] {
            [only] => Decision {
                winner: Some(only),
                candidates: vec![only],
                tie_broken_by: TieBreak::Prior,
            },
            _ => Decision {
                winner: None,
                candidates: by_prior,
                tie_broken_by: TieBreak::Unresolved,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TieBreak {
    None,
    Prior,
    /// Weights and priors both tie; the candidate set is the answer.
    Unresolved,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decision {
    pub winner: Option<usize>,
    pub candidates: Vec<usize>,
    pub tie_broken_by: TieBreak,
}

impl Decision {
    pub fn is_unique(&self) -> bool {
        self.winner.is_some()
    }

    /// Single answer for callers that need one: the winner, or a uniform
    /// draw from the tied candidates.
    pub fn forced_pick<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        match self.winner {
            Some(w) => w,
            None => self.candidates[rng.random_range(0..self.candidates.len())],
        }
    }
}

/// Catalog, derived statistics and per-attribute classifiers bundled for
/// scoring raw observations.
#[derive(Debug, Clone)]
pub struct Recognizer {
    pub catalog: ObjectCatalog,
    pub stats: CatalogStats,
    pub models: ModelSet,
}

impl Recognizer {
    pub fn new(catalog: ObjectCatalog, models: ModelSet) -> Result<Self, ModelError> {
        let models = models.aligned_to(&catalog)?;
        let stats = catalog.stats();
        Ok(Self { catalog, stats, models })
    }

    pub fn start(&self) -> PosteriorState {
        PosteriorState::new(&self.catalog)
    }

    pub fn model(&self, attribute: usize) -> Result<&ClassifierModel, FusionError> {
        self.models
            .get(attribute)
            .ok_or(FusionError::UnknownAttribute(attribute))
    }

    /// Classifies a raw score and folds it into `state`.
    pub fn observe_score(
        &self,
        state: &mut PosteriorState,
        attribute: usize,
        bin: usize,
        score: f64,
    ) -> Result<Observation, FusionError> {
        let model = self.model(attribute)?;
        let obs = Observation::classified(model, attribute, bin, score)?;
        state.update(&self.catalog, &self.stats, model, &obs)?;
        Ok(obs)
    }

    pub fn observe(&self, state: &mut PosteriorState, obs: &Observation) -> Result<bool, FusionError> {
        let model = self.model(obs.attribute)?;
        state.update(&self.catalog, &self.stats, model, obs)
    }

    pub fn record(&self, state: &PosteriorState, observations: &[Observation]) -> DecisionRecord {
        DecisionRecord::new(&self.catalog, state, observations)
    }
}

/// Exported decision with the full posterior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub winner: Option<String>,
    pub candidates: Vec<String>,
    pub tie_broken_by: TieBreak,
    pub posterior: Vec<PosteriorEntry>,
    pub observations: usize,
    pub adopted: u32,
    pub saturated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorEntry {
    pub object: String,
    pub probability: f64,
    pub log_weight: f64,
}

impl DecisionRecord {
    pub fn new(catalog: &ObjectCatalog, state: &PosteriorState, observations: &[Observation]) -> Self {
        let decision = state.decide(catalog);
        let name = |j: usize| catalog.objects()[j].clone();
        Self {
            winner: decision.winner.map(name),
            candidates: decision.candidates.iter().map(|&j| name(j)).collect(),
            tie_broken_by: decision.tie_broken_by,
            posterior: state
                .normalized()
                .into_iter()
                .zip(&state.log_weights)
                .enumerate()
                .map(|(j, (probability, &log_weight))| PosteriorEntry {
                    object: name(j),
                    probability,
                    log_weight,
                })
                .collect(),
            observations: observations.len(),
            adopted: state.num_adopted(),
            saturated: state.saturated,
        }
    }
}
