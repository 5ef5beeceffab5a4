//! Synthetic, distance-dependent classifier scores.
//!
//! A [`Scenario`] assigns every (attribute, ground truth, environment bin)
//! triple a Gaussian score distribution. Overlap between the positive and
//! negative distributions typically grows with distance, which is what
//! makes some bins unreliable for some attributes.
//!
//! Randomness comes from ChaCha8 streams. Every consumer derives its own
//! generator from the scenario seed, a fixed domain tag, and an index
//! (trial number, training replicate, ...) so results do not depend on
//! evaluation order or thread count.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::catalog::ObjectCatalog;
use crate::classifier::{
    calibrate_bin, BinCalibration, CalibrationTargets, ClassifierModel, ModelSet, Orientation, Outcome,
};
use crate::error::ScenarioError;
use crate::fusion::{Decision, Observation, Recognizer};

/// Positive and negative calibration scores of one attribute and bin.
pub type TrainingSample = (Vec<f64>, Vec<f64>);

/// Stand-in for a zero standard deviation.
pub const DEGENERATE_STDDEV: f64 = 1e-9;

/// Independent random streams, one per purpose.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    Training,
    Trial,
    Distribution,
    Theorem,
    Pick,
}

impl Domain {
    fn tag(self) -> u64 {
        match self {
            Domain::Training => 0x7472_6169_6e00_0001,
            Domain::Trial => 0x7472_6961_6c00_0002,
            Domain::Distribution => 0x6469_7374_0000_0003,
            Domain::Theorem => 0x7468_6d00_0000_0004,
            Domain::Pick => 0x7069_636b_0000_0005,
        }
    }
}

/// Generator for stream `index` of `domain` under `seed`.
pub fn stream(seed: u64, domain: Domain, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ domain.tag());
    rng.set_stream(index);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Truth {
    Pos,
    Neg,
}

impl Truth {
    pub fn of(has: bool) -> Self {
        if has {
            Truth::Pos
        } else {
            Truth::Neg
        }
    }

    fn label(self) -> &'static str {
        match self {
            Truth::Pos => "pos",
            Truth::Neg => "neg",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    #[default]
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreDistribution {
    pub family: Family,
    pub mean: f64,
    pub stddev: f64,
}

impl ScoreDistribution {
    pub fn gaussian(mean: f64, stddev: f64) -> Self {
        Self {
            family: Family::Gaussian,
            mean,
            stddev,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.family {
            Family::Gaussian => Normal::new(self.mean, self.stddev.max(DEGENERATE_STDDEV))
                .expect("validated stddev")
                .sample(rng),
        }
    }
}

/// Per-attribute score model as written in scenario files: one entry per
/// bin in each of the four arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttributeScores {
    pub attribute: String,
    /// Attribute family ("fine", "coarse", "color", ...).
    #[serde(default)]
    pub group: Option<String>,
    #[serde(default)]
    pub orientation: Orientation,
    #[serde(default)]
    pub family: Family,
    pub pos_mean: Vec<f64>,
    pub pos_stddev: Vec<f64>,
    pub neg_mean: Vec<f64>,
    pub neg_stddev: Vec<f64>,
}

/// How calibration data is drawn. Shifts move the training means relative
/// to the test distributions; the stddev scale widens or narrows them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingConfig {
    /// Draws per object carrying the attribute, per bin.
    pub pos_per_object: usize,
    /// Draws per object lacking the attribute, per bin.
    pub neg_per_object: usize,
    #[serde(default)]
    pub pos_mean_shift: f64,
    #[serde(default)]
    pub neg_mean_shift: f64,
    #[serde(default = "one")]
    pub stddev_scale: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViewBlock {
    pub bin: usize,
    pub count: usize,
}

/// Sequence of views taken in one episode; each view scores every active
/// attribute once.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schedule {
    pub views: Vec<ViewBlock>,
}

impl Schedule {
    pub fn single_bin(bin: usize, count: usize) -> Self {
        Self {
            views: vec![ViewBlock { bin, count }],
        }
    }

    pub fn total_views(&self) -> usize {
        self.views.iter().map(|b| b.count).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Exp1Config {
    pub attribute: String,
    /// Positive and negative draws per bin.
    #[serde(default = "default_exp1_pos")]
    pub n_pos: usize,
    #[serde(default = "default_exp1_neg")]
    pub n_neg: usize,
    #[serde(default = "default_bandwidth")]
    pub bandwidth: f64,
    /// Independent replicates used for the overlap spread.
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
}

fn default_bandwidth() -> f64 {
    crate::classifier::DEFAULT_KDE_BANDWIDTH
}

fn default_exp1_pos() -> usize {
    120
}

fn default_exp1_neg() -> usize {
    210
}

fn default_replicates() -> usize {
    30
}

fn default_grid_points() -> usize {
    241
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Exp2Config {
    pub k_values: Vec<usize>,
    pub bin: usize,
    /// Independent training draws the trials are spread over.
    #[serde(default = "default_training_sets")]
    pub training_sets: usize,
}

fn default_training_sets() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Exp3Config {
    pub views_per_bin: usize,
    /// System name to the attribute groups it uses.
    pub systems: BTreeMap<String, Vec<String>>,
    #[serde(default = "default_training_sets")]
    pub training_sets: usize,
}

/// Scenario file layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: String,
    /// Catalog path, relative to the scenario file.
    pub catalog: String,
    pub seed: u64,
    pub bins: Vec<[f64; 2]>,
    #[serde(default)]
    pub calibration: Option<CalibrationTargets>,
    pub training: TrainingConfig,
    #[serde(default)]
    pub schedule: Schedule,
    pub score_models: Vec<AttributeScores>,
    #[serde(default)]
    pub exp1: Option<Exp1Config>,
    #[serde(default)]
    pub exp2: Option<Exp2Config>,
    #[serde(default)]
    pub exp3: Option<Exp3Config>,
}

/// A validated scenario with its catalog resolved and score models indexed
/// by catalog attribute order.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub file: ScenarioFile,
    pub catalog: ObjectCatalog,
    pub targets: CalibrationTargets,
    /// `scores[i]` for catalog attribute `i`; `None` if the scenario does
    /// not model it.
    scores: Vec<Option<AttributeScores>>,
}

const BUILTIN_SCENARIOS: [(&str, &str); 3] = [
    ("exp1", include_str!("../scenarios/exp1.toml")),
    ("exp2", include_str!("../scenarios/exp2.toml")),
    ("exp3", include_str!("../scenarios/exp3.toml")),
];

const BUILTIN_CATALOGS: [(&str, &str); 2] = [
    ("table1", include_str!("../catalogs/table1.toml")),
    ("fine5", include_str!("../catalogs/fine5.toml")),
];

/// Bundled catalog by file stem (`table1`, `fine5`).
pub fn builtin_catalog(name: &str) -> Option<ObjectCatalog> {
    BUILTIN_CATALOGS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| ObjectCatalog::from_toml_str(text).expect("bundled catalog parses"))
}

pub fn builtin_scenario_names() -> impl Iterator<Item = &'static str> {
    BUILTIN_SCENARIOS.iter().map(|(n, _)| *n)
}

impl Scenario {
    pub fn from_parts(file: ScenarioFile, catalog: ObjectCatalog) -> Result<Self, ScenarioError> {
        let invalid = |msg: String| Err(ScenarioError::Invalid(msg));
        if file.bins.is_empty() {
            return invalid("no bins".into());
        }
        for (k, [lo, hi]) in file.bins.iter().enumerate() {
            if !(lo < hi) {
                return invalid(format!("bin {k} is empty: [{lo}, {hi})"));
            }
            if k > 0 && file.bins[k - 1][1] != *lo {
                return invalid(format!("bin {k} does not start where bin {} ends", k - 1));
            }
        }
        let nb = file.bins.len();
        let mut scores: Vec<Option<AttributeScores>> = vec![None; catalog.num_attributes()];
        for s in &file.score_models {
            let Some(i) = catalog.attribute_index(&s.attribute) else {
                return invalid(format!("score model for unknown attribute {:?}", s.attribute));
            };
            if scores[i].is_some() {
                return invalid(format!("duplicate score model for {:?}", s.attribute));
            }
            for (name, v) in [
                ("pos_mean", &s.pos_mean),
                ("pos_stddev", &s.pos_stddev),
                ("neg_mean", &s.neg_mean),
                ("neg_stddev", &s.neg_stddev),
            ] {
                if v.len() != nb {
                    return invalid(format!("{}: {name} has {} entries for {nb} bins", s.attribute, v.len()));
                }
                if v.iter().any(|x| !x.is_finite()) {
                    return invalid(format!("{}: {name} is not finite", s.attribute));
                }
            }
            if s.pos_stddev.iter().chain(&s.neg_stddev).any(|&sd| sd <= 0.0) {
                return invalid(format!("{}: stddev must be positive", s.attribute));
            }
            scores[i] = Some(s.clone());
        }
        if let Some(i) = scores.iter().position(Option::is_none) {
            return invalid(format!("no score model for attribute {:?}", catalog.attributes()[i]));
        }
        if file.training.pos_per_object == 0 || file.training.neg_per_object == 0 {
            return Err(ScenarioError::EmptyTrainingSet);
        }
        if !(file.training.stddev_scale > 0.0) {
            return invalid("training stddev_scale must be positive".into());
        }
        for block in &file.schedule.views {
            if block.bin >= nb {
                return Err(ScenarioError::UnknownBin(block.bin));
            }
        }
        let targets = file.calibration.unwrap_or_default();
        Ok(Self {
            file,
            catalog,
            targets,
            scores,
        })
    }

    /// Parses a scenario; `resolve` maps the `catalog` field to a catalog.
    pub fn parse_with(
        text: &str,
        resolve: impl FnOnce(&str) -> Result<ObjectCatalog, ScenarioError>,
    ) -> Result<Self, ScenarioError> {
        let file: ScenarioFile = toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        let catalog = resolve(&file.catalog)?;
        Self::from_parts(file, catalog)
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse_with(&text, |rel| {
            let p: PathBuf = dir.join(rel);
            Ok(ObjectCatalog::load(&p)?)
        })
    }

    /// One of the bundled scenarios (`exp1`, `exp2`, `exp3`).
    pub fn builtin(name: &str) -> Option<Self> {
        let (_, text) = BUILTIN_SCENARIOS.iter().find(|(n, _)| *n == name)?;
        let scenario = Self::parse_with(text, |rel| {
            let stem = Path::new(rel).file_stem().and_then(|s| s.to_str()).unwrap_or_default();
            builtin_catalog(stem).ok_or_else(|| ScenarioError::Invalid(format!("unknown bundled catalog {rel}")))
        })
        .expect("bundled scenario is valid");
        Some(scenario)
    }

    /// Raw text of a bundled scenario.
    pub fn builtin_text(name: &str) -> Option<&'static str> {
        BUILTIN_SCENARIOS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
    }

    pub fn name(&self) -> &str {
        &self.file.name
    }

    pub fn seed(&self) -> u64 {
        self.file.seed
    }

    pub fn num_bins(&self) -> usize {
        self.file.bins.len()
    }

    pub fn bins(&self) -> &[[f64; 2]] {
        &self.file.bins
    }

    /// All catalog attributes; each has a score model.
    pub fn modeled_attributes(&self) -> Vec<usize> {
        (0..self.scores.len()).filter(|&i| self.scores[i].is_some()).collect()
    }

    /// Catalog attributes whose score model belongs to `group`.
    pub fn attributes_in_group(&self, group: &str) -> Vec<usize> {
        (0..self.scores.len())
            .filter(|&i| {
                self.scores[i]
                    .as_ref()
                    .is_some_and(|s| s.group.as_deref() == Some(group))
            })
            .collect()
    }

    pub fn scores(&self, attribute: usize) -> Option<&AttributeScores> {
        self.scores.get(attribute).and_then(Option::as_ref)
    }

    pub fn orientation(&self, attribute: usize) -> Orientation {
        self.scores(attribute).map(|s| s.orientation).unwrap_or_default()
    }

    /// Test-time distribution of a triple.
    pub fn distribution(&self, attribute: usize, truth: Truth, bin: usize) -> Result<ScoreDistribution, ScenarioError> {
        let missing = ScenarioError::MissingModel {
            attribute,
            truth: truth.label(),
            bin,
        };
        let s = self.scores(attribute).ok_or(missing)?;
        if bin >= self.num_bins() {
            return Err(ScenarioError::UnknownBin(bin));
        }
        let (mean, stddev) = match truth {
            Truth::Pos => (s.pos_mean[bin], s.pos_stddev[bin]),
            Truth::Neg => (s.neg_mean[bin], s.neg_stddev[bin]),
        };
        Ok(ScoreDistribution {
            family: s.family,
            mean,
            stddev,
        })
    }

    /// Distribution calibration data is drawn from.
    pub fn training_distribution(
        &self,
        attribute: usize,
        truth: Truth,
        bin: usize,
    ) -> Result<ScoreDistribution, ScenarioError> {
        let mut d = self.distribution(attribute, truth, bin)?;
        let t = &self.file.training;
        d.mean += match truth {
            Truth::Pos => t.pos_mean_shift,
            Truth::Neg => t.neg_mean_shift,
        };
        d.stddev *= t.stddev_scale;
        Ok(d)
    }

    pub fn sample_score<R: Rng + ?Sized>(
        &self,
        attribute: usize,
        truth: Truth,
        bin: usize,
        rng: &mut R,
    ) -> Result<f64, ScenarioError> {
        Ok(self.distribution(attribute, truth, bin)?.sample(rng))
    }

    /// Calibration sample for one attribute and bin, drawn from the
    /// training distributions.
    pub fn generate_training_set<R: Rng + ?Sized>(
        &self,
        attribute: usize,
        bin: usize,
        n_pos: usize,
        n_neg: usize,
        rng: &mut R,
    ) -> Result<(Vec<f64>, Vec<f64>), ScenarioError> {
        if n_pos == 0 || n_neg == 0 {
            return Err(ScenarioError::EmptyTrainingSet);
        }
        let pos = self.training_distribution(attribute, Truth::Pos, bin)?;
        let neg = self.training_distribution(attribute, Truth::Neg, bin)?;
        let p = (0..n_pos).map(|_| pos.sample(rng)).collect();
        let n = (0..n_neg).map(|_| neg.sample(rng)).collect();
        Ok((p, n))
    }

    /// Sample sizes for an attribute from the per-object counts.
    pub fn training_counts(&self, attribute: usize) -> (usize, usize) {
        let with = (0..self.catalog.num_objects())
            .filter(|&j| self.catalog.has(j, attribute))
            .count();
        let without = self.catalog.num_objects() - with;
        let t = &self.file.training;
        (t.pos_per_object * with, t.neg_per_object * without)
    }

    /// Draws the calibration sample of every attribute and bin:
    /// `samples[i][k] = (pos, neg)`.
    pub fn calibration_samples<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<Vec<TrainingSample>>, ScenarioError> {
        (0..self.catalog.num_attributes())
            .map(|i| {
                let (n_pos, n_neg) = self.training_counts(i);
                (0..self.num_bins())
                    .map(|k| self.generate_training_set(i, k, n_pos.max(1), n_neg.max(1), rng))
                    .collect()
            })
            .collect()
    }

    /// Calibrates every attribute and bin on `samples`. Attributes constant
    /// over the catalog get all-unreliable bins.
    pub fn calibrate_on(&self, samples: &[Vec<TrainingSample>]) -> Result<ModelSet, ScenarioError> {
        let stats = self.catalog.stats();
        let mut classifiers = Vec::with_capacity(self.catalog.num_attributes());
        for (i, name) in self.catalog.attributes().iter().enumerate() {
            let orientation = self.orientation(i);
            let calibrations = if stats.is_usable(i) {
                samples[i]
                    .iter()
                    .enumerate()
                    .map(|(k, (pos, neg))| calibrate_bin(k, pos, neg, orientation, &self.targets))
                    .collect::<Result<Vec<_>, _>>()?
            } else {
                (0..self.num_bins()).map(BinCalibration::unreliable).collect()
            };
            classifiers.push(ClassifierModel {
                attribute: name.clone(),
                orientation,
                calibrations,
            });
        }
        Ok(ModelSet {
            bins: self.file.bins.clone(),
            classifiers,
        })
    }

    pub fn calibrate<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<ModelSet, ScenarioError> {
        self.calibrate_on(&self.calibration_samples(rng)?)
    }

    /// Calibration sample drawn from training stream `replicate`.
    pub fn training_replicate(&self, replicate: u64) -> Result<Vec<Vec<TrainingSample>>, ScenarioError> {
        self.calibration_samples(&mut stream(self.seed(), Domain::Training, replicate))
    }

    /// Calibrates with the scenario's own training stream `replicate`.
    pub fn calibrate_replicate(&self, replicate: u64) -> Result<ModelSet, ScenarioError> {
        self.calibrate_on(&self.training_replicate(replicate)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredObservation {
    pub attribute: usize,
    pub bin: usize,
    pub score: f64,
    pub outcome: Outcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: u64,
    pub truth: usize,
    pub observations: Vec<ScoredObservation>,
    pub decision: Decision,
    /// Final single answer (the winner, or the forced pick).
    pub answer: usize,
    /// Seed and stream used when the answer was a forced random pick.
    pub forced_pick: Option<(u64, u64)>,
    pub correct: bool,
}

/// Draws scores per the schedule for `attributes`, fuses them and decides.
/// `rng` must be the trial's own stream; `stream_id` is recorded with any
/// forced pick.
#[allow(clippy::too_many_arguments)]
pub fn run_episode<R: Rng>(
    scenario: &Scenario,
    truth: usize,
    recognizer: &Recognizer,
    schedule: &Schedule,
    attributes: &[usize],
    trial: u64,
    stream_id: (u64, u64),
    rng: &mut R,
) -> Result<TrialRecord, ScenarioError> {
    let catalog = &recognizer.catalog;
    let mut state = recognizer.start();
    let mut observations = Vec::with_capacity(schedule.total_views() * attributes.len());
    for block in &schedule.views {
        if block.bin >= scenario.num_bins() {
            return Err(ScenarioError::UnknownBin(block.bin));
        }
        for _ in 0..block.count {
            for &i in attributes {
                let score = scenario.sample_score(i, Truth::of(catalog.has(truth, i)), block.bin, rng)?;
                let obs = recognizer.observe_score(&mut state, i, block.bin, score)?;
                observations.push(ScoredObservation {
                    attribute: i,
                    bin: block.bin,
                    score,
                    outcome: obs.outcome,
                });
            }
        }
    }
    let decision = state.decide(catalog);
    let answer = decision.forced_pick(rng);
    Ok(TrialRecord {
        trial,
        truth,
        correct: answer == truth,
        forced_pick: (!decision.is_unique()).then_some(stream_id),
        observations,
        decision,
        answer,
    })
}

/// Outcomes of the same scores under several recognizers, scored in one
/// pass so the systems see identical inputs.
pub fn paired_outcomes(
    recognizer: &Recognizer,
    observations: &[ScoredObservation],
    attributes: &[usize],
) -> Result<Decision, ScenarioError> {
    let mut state = recognizer.start();
    for o in observations.iter().filter(|o| attributes.contains(&o.attribute)) {
        let model = recognizer.model(o.attribute)?;
        let obs =
            Observation::classified(model, o.attribute, o.bin, o.score).map_err(crate::error::FusionError::from)?;
        state.update(&recognizer.catalog, &recognizer.stats, model, &obs)?;
    }
    Ok(state.decide(&recognizer.catalog))
}
