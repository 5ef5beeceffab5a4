//! Monte Carlo reproductions of the distribution-shift, threshold
//! comparison and attribute-family experiments, plus the guarantee and convergence suites.
//!
//! Every run is a deterministic function of the scenario and seed. Trials
//! draw from their own ChaCha streams and results are reduced in trial
//! order, so tables are byte-identical across runs.

use std::fmt::Write as _;

use rand::Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::catalog::ObjectCatalog;
use crate::classifier::{kde_density, single_threshold_baseline, BinCalibration, ClassifierModel, ModelSet, Outcome};
use crate::error::ScenarioError;
use crate::fusion::{Decision, Observation, Recognizer};
use crate::simulator::{paired_outcomes, stream, Domain, Scenario, ScoredObservation, TrainingSample, Truth};
use crate::theory::{implied_false_rates, theorem1_suite, Theorem1Report};

/// z value of a two-sided 95% normal interval.
pub const Z95: f64 = 1.96;

/// Normal-approximation 95% halfwidth of a proportion.
pub fn halfwidth(rate: f64, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    Z95 * (rate * (1.0 - rate) / n as f64).sqrt()
}

/// `a > b` with the gap exceeding both halfwidths.
pub fn separated_above(a: f64, hw_a: f64, b: f64, hw_b: f64) -> bool {
    a - b > hw_a + hw_b
}

/// `a >= b` unless `b` exceeds `a` by more than both halfwidths.
pub fn not_below(a: f64, hw_a: f64, b: f64, hw_b: f64) -> bool {
    a - b >= -(hw_a + hw_b)
}

/// Non-increasing sequence, allowing at most one increase and only one that
/// stays within the two points' halfwidths.
pub fn monotone_non_increasing(values: &[(f64, f64)]) -> bool {
    let mut inversions = 0;
    for w in values.windows(2) {
        let ((a, ha), (b, hb)) = (w[0], w[1]);
        if b > a {
            inversions += 1;
            if b - a > ha + hb {
                return false;
            }
        }
    }
    inversions <= 1
}

fn fmt(x: f64) -> String {
    format!("{x:.6}")
}

/// Decision outcome split into its two error sources.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct ErrorTally {
    pub trials: usize,
    /// Unique decisions naming the wrong object.
    pub wrong: usize,
    /// Tied decisions whose forced random pick was wrong.
    pub tie: usize,
}

impl ErrorTally {
    pub fn record(&mut self, decision: &Decision, answer: usize, truth: usize) {
        self.trials += 1;
        if answer != truth {
            if decision.is_unique() {
                self.wrong += 1;
            } else {
                self.tie += 1;
            }
        }
    }

    fn rate(&self, n: usize) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            n as f64 / self.trials as f64
        }
    }

    pub fn error(&self) -> f64 {
        self.rate(self.wrong + self.tie)
    }

    pub fn wrong_rate(&self) -> f64 {
        self.rate(self.wrong)
    }

    pub fn tie_rate(&self) -> f64 {
        self.rate(self.tie)
    }

    pub fn halfwidth(&self) -> f64 {
        halfwidth(self.error(), self.trials)
    }

    pub fn tie_halfwidth(&self) -> f64 {
        halfwidth(self.tie_rate(), self.trials)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct AccuracyTally {
    pub trials: usize,
    pub correct: usize,
}

impl AccuracyTally {
    pub fn accuracy(&self) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            self.correct as f64 / self.trials as f64
        }
    }

    pub fn halfwidth(&self) -> f64 {
        halfwidth(self.accuracy(), self.trials)
    }
}

/// Uniform forced pick on stream `(trial, slot)`.
fn pick(decision: &Decision, seed: u64, trial: u64, slot: u64) -> usize {
    decision.forced_pick(&mut stream(seed, Domain::Pick, trial * 1024 + slot))
}

// ---------------------------------------------------------------------------
// Distribution shift

#[derive(Debug, Clone, Serialize)]
pub struct Exp1Bin {
    pub bin: usize,
    pub range: [f64; 2],
    /// Mean overlap coefficient over the replicates.
    pub overlap: f64,
    /// Standard error of `overlap`.
    pub stderr: f64,
    /// KDE curves of the first replicate on the shared grid.
    pub pos_density: Vec<f64>,
    pub neg_density: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Exp1Result {
    pub attribute: String,
    pub bandwidth: f64,
    pub n_pos: usize,
    pub n_neg: usize,
    pub replicates: usize,
    pub grid: Vec<f64>,
    pub bins: Vec<Exp1Bin>,
}

impl Exp1Result {
    /// (far - near) overlap over its combined standard error.
    pub fn separation_z(&self) -> f64 {
        let near = &self.bins[0];
        let far = &self.bins[self.bins.len() - 1];
        (far.overlap - near.overlap) / (far.stderr.powi(2) + near.stderr.powi(2)).sqrt()
    }

    pub fn kde_csv(&self) -> String {
        let mut out = String::from("bin,score,pos_density,neg_density\n");
        for b in &self.bins {
            for (g, x) in self.grid.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{},{},{},{}",
                    b.bin,
                    fmt(*x),
                    fmt(b.pos_density[g]),
                    fmt(b.neg_density[g])
                );
            }
        }
        out
    }

    pub fn overlap_csv(&self) -> String {
        let mut out = String::from("bin,lower,upper,overlap,stderr\n");
        for b in &self.bins {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                b.bin,
                fmt(b.range[0]),
                fmt(b.range[1]),
                fmt(b.overlap),
                fmt(b.stderr)
            );
        }
        out
    }
}

/// Overlap coefficient: trapezoid integral of `min(f_pos, f_neg)`.
pub fn overlap_coefficient(grid: &[f64], pos: &[f64], neg: &[f64]) -> f64 {
    (1..grid.len())
        .map(|g| {
            let a = pos[g - 1].min(neg[g - 1]);
            let b = pos[g].min(neg[g]);
            0.5 * (a + b) * (grid[g] - grid[g - 1])
        })
        .sum()
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let n = n.max(2);
    (0..n).map(|g| lo + (hi - lo) * g as f64 / (n - 1) as f64).collect()
}

/// Per-bin KDE curves and overlap statistics for the scenario's exp1
/// attribute. `replicates` overrides the scenario's count when given.
pub fn experiment1(scenario: &Scenario, replicates: Option<usize>, seed: u64) -> Result<Exp1Result, ScenarioError> {
    let cfg = scenario
        .file
        .exp1
        .as_ref()
        .ok_or_else(|| ScenarioError::Invalid("scenario has no [exp1] table".into()))?;
    if scenario.num_bins() < 2 {
        return Err(ScenarioError::Invalid(
            "distribution shift needs at least 2 bins".into(),
        ));
    }
    let attribute = scenario
        .catalog
        .attribute_index(&cfg.attribute)
        .ok_or_else(|| ScenarioError::Invalid(format!("unknown attribute {:?}", cfg.attribute)))?;
    let replicates = replicates.unwrap_or(cfg.replicates).max(2);
    let nb = scenario.num_bins();
    let draw = |bin: usize, r: usize| -> Result<TrainingSample, ScenarioError> {
        let mut rng = stream(seed, Domain::Distribution, (bin * replicates + r) as u64);
        let pos = scenario.distribution(attribute, Truth::Pos, bin)?;
        let neg = scenario.distribution(attribute, Truth::Neg, bin)?;
        Ok((
            (0..cfg.n_pos).map(|_| pos.sample(&mut rng)).collect(),
            (0..cfg.n_neg).map(|_| neg.sample(&mut rng)).collect(),
        ))
    };
    let pad = 3.0 * cfg.bandwidth;
    let span = |samples: &[&TrainingSample]| {
        samples
            .iter()
            .flat_map(|(p, n)| p.iter().chain(n))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
                (lo.min(x), hi.max(x))
            })
    };

    let first: Vec<TrainingSample> = (0..nb).map(|k| draw(k, 0)).collect::<Result<_, _>>()?;
    let (lo, hi) = span(&first.iter().collect::<Vec<_>>());
    let grid = linspace(lo - pad, hi + pad, cfg.grid_points);

    let mut bins = Vec::with_capacity(nb);
    for (k, sample) in first.iter().enumerate() {
        let pos_density = kde_density(&sample.0, cfg.bandwidth, &grid)?;
        let neg_density = kde_density(&sample.1, cfg.bandwidth, &grid)?;
        let mut overlaps = Vec::with_capacity(replicates);
        overlaps.push(overlap_coefficient(&grid, &pos_density, &neg_density));
        for r in 1..replicates {
            let s = draw(k, r)?;
            let (lo, hi) = span(&[&s]);
            let g = linspace(lo - pad, hi + pad, cfg.grid_points);
            let p = kde_density(&s.0, cfg.bandwidth, &g)?;
            let n = kde_density(&s.1, cfg.bandwidth, &g)?;
            overlaps.push(overlap_coefficient(&g, &p, &n));
        }
        let mean = overlaps.iter().sum::<f64>() / replicates as f64;
        let var = overlaps.iter().map(|o| (o - mean).powi(2)).sum::<f64>() / (replicates - 1) as f64;
        bins.push(Exp1Bin {
            bin: k,
            range: scenario.bins()[k],
            overlap: mean,
            stderr: (var / replicates as f64).sqrt(),
            pos_density,
            neg_density,
        });
    }
    Ok(Exp1Result {
        attribute: cfg.attribute.clone(),
        bandwidth: cfg.bandwidth,
        n_pos: cfg.n_pos,
        n_neg: cfg.n_neg,
        replicates,
        grid,
        bins,
    })
}

// ---------------------------------------------------------------------------
// Threshold comparison

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    TwoThreshold,
    SingleThreshold,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::TwoThreshold => "two-threshold",
            Method::SingleThreshold => "single-threshold",
        }
    }
}

/// Error rate against number of views for both thresholding methods.
#[derive(Debug, Clone, Serialize)]
pub struct ErrorCurve {
    pub k_values: Vec<usize>,
    pub trials: usize,
    pub two_threshold: Vec<ErrorTally>,
    pub single_threshold: Vec<ErrorTally>,
}

impl ErrorCurve {
    pub fn tallies(&self, method: Method) -> &[ErrorTally] {
        match method {
            Method::TwoThreshold => &self.two_threshold,
            Method::SingleThreshold => &self.single_threshold,
        }
    }

    /// `(error, halfwidth)` per K.
    pub fn series(&self, method: Method) -> Vec<(f64, f64)> {
        self.tallies(method)
            .iter()
            .map(|t| (t.error(), t.halfwidth()))
            .collect()
    }

    pub fn csv(&self) -> String {
        let mut out = String::from("K,method,error,halfwidth\n");
        for (idx, k) in self.k_values.iter().enumerate() {
            for method in [Method::TwoThreshold, Method::SingleThreshold] {
                let t = &self.tallies(method)[idx];
                let _ = writeln!(out, "{k},{},{},{}", method.label(), fmt(t.error()), fmt(t.halfwidth()));
                let _ = writeln!(
                    out,
                    "{k},{}-random-tie,{},{}",
                    method.label(),
                    fmt(t.tie_rate()),
                    fmt(t.tie_halfwidth())
                );
            }
        }
        out
    }
}

/// Single-threshold counterpart of a calibrated model set: every bin
/// classifies with the error-minimizing cut of the same calibration
/// sample, weighted by that cut's training PPV and NPV.
pub fn single_threshold_models(
    scenario: &Scenario,
    samples: &[Vec<TrainingSample>],
) -> Result<ModelSet, ScenarioError> {
    let stats = scenario.catalog.stats();
    let mut classifiers = Vec::with_capacity(samples.len());
    for (i, per_bin) in samples.iter().enumerate() {
        let orientation = scenario.orientation(i);
        let calibrations = per_bin
            .iter()
            .enumerate()
            .map(|(k, (pos, neg))| {
                if !stats.is_usable(i) {
                    return Ok(BinCalibration::unreliable(k));
                }
                let b = single_threshold_baseline(pos, neg, orientation)?;
                let (Some(ppv), Some(npv)) = (b.ppv, b.npv) else {
                    return Ok(BinCalibration::unreliable(k));
                };
                let tp = pos.iter().filter(|&&s| b.classify(s) == Outcome::Positive).count();
                let tn = neg.iter().filter(|&&s| b.classify(s) == Outcome::Negative).count();
                let d = tp as f64 / pos.len() as f64;
                let s = tn as f64 / neg.len() as f64;
                Ok(BinCalibration {
                    bin_index: k,
                    theta_pos: Some(b.threshold),
                    theta_neg: Some(b.threshold),
                    ppv: Some(ppv),
                    npv: Some(npv),
                    detection_rate: d,
                    true_negative_rate: s,
                    false_positive_rate: 1.0 - s,
                    false_negative_rate: 1.0 - d,
                    reliable: true,
                })
            })
            .collect::<Result<Vec<_>, ScenarioError>>()?;
        classifiers.push(ClassifierModel {
            attribute: scenario.catalog.attributes()[i].clone(),
            orientation,
            calibrations,
        });
    }
    Ok(ModelSet {
        bins: scenario.bins().to_vec(),
        classifiers,
    })
}

/// Both recognizers built from one training replicate.
struct PairedSystems {
    two: Recognizer,
    single: Recognizer,
}

fn paired_systems(scenario: &Scenario, replicate: u64) -> Result<PairedSystems, ScenarioError> {
    let samples = scenario.training_replicate(replicate)?;
    let two = Recognizer::new(scenario.catalog.clone(), scenario.calibrate_on(&samples)?)
        .map_err(crate::error::FusionError::from)?;
    let single = Recognizer::new(scenario.catalog.clone(), single_threshold_models(scenario, &samples)?)
        .map_err(crate::error::FusionError::from)?;
    Ok(PairedSystems { two, single })
}

/// Draws `views` views of `truth` at `bin`, scoring every attribute.
fn draw_views<R: Rng>(
    scenario: &Scenario,
    truth: usize,
    bin: usize,
    views: usize,
    rng: &mut R,
) -> Result<Vec<ScoredObservation>, ScenarioError> {
    let catalog = &scenario.catalog;
    let mut out = Vec::with_capacity(views * catalog.num_attributes());
    for _ in 0..views {
        for i in 0..catalog.num_attributes() {
            let score = scenario.sample_score(i, Truth::of(catalog.has(truth, i)), bin, rng)?;
            out.push(ScoredObservation {
                attribute: i,
                bin,
                score,
                outcome: Outcome::Uncertain,
            });
        }
    }
    Ok(out)
}

/// Error against number of views for the two-threshold fusion and the
/// single-threshold baseline. Both methods see the same scores; the first
/// K views of each trial are used for the K-view estimate.
pub fn experiment2(scenario: &Scenario, trials: usize, seed: u64) -> Result<ErrorCurve, ScenarioError> {
    let cfg = scenario
        .file
        .exp2
        .as_ref()
        .ok_or_else(|| ScenarioError::Invalid("scenario has no [exp2] table".into()))?;
    if cfg.bin >= scenario.num_bins() {
        return Err(ScenarioError::UnknownBin(cfg.bin));
    }
    let k_max = cfg.k_values.iter().copied().max().unwrap_or(0);
    let sets = cfg.training_sets.max(1);
    let systems: Vec<PairedSystems> = (0..sets as u64)
        .map(|r| paired_systems(scenario, r))
        .collect::<Result<_, _>>()?;
    let all: Vec<usize> = (0..scenario.catalog.num_attributes()).collect();
    let per_view = all.len();
    let mut two = vec![ErrorTally::default(); cfg.k_values.len()];
    let mut single = vec![ErrorTally::default(); cfg.k_values.len()];
    for t in 0..trials as u64 {
        let sys = &systems[(t % sets as u64) as usize];
        let mut rng = stream(seed, Domain::Trial, t);
        let truth = rng.random_range(0..scenario.catalog.num_objects());
        let views = draw_views(scenario, truth, cfg.bin, k_max, &mut rng)?;
        for (idx, &k) in cfg.k_values.iter().enumerate() {
            let prefix = &views[..k * per_view];
            let d2 = paired_outcomes(&sys.two, prefix, &all)?;
            two[idx].record(&d2, pick(&d2, seed, t, k as u64), truth);
            let d1 = paired_outcomes(&sys.single, prefix, &all)?;
            single[idx].record(&d1, pick(&d1, seed, t, k as u64), truth);
        }
    }
    Ok(ErrorCurve {
        k_values: cfg.k_values.clone(),
        trials,
        two_threshold: two,
        single_threshold: single,
    })
}

// ---------------------------------------------------------------------------
// Attribute families

#[derive(Debug, Clone, Serialize)]
pub struct FamilyTable {
    pub systems: Vec<String>,
    pub bins: Vec<[f64; 2]>,
    /// `accuracy[s][k]` for system `s` in bin `k`.
    pub accuracy: Vec<Vec<AccuracyTally>>,
}

impl FamilyTable {
    pub fn get(&self, system: &str, bin: usize) -> Option<&AccuracyTally> {
        let s = self.systems.iter().position(|n| n == system)?;
        self.accuracy[s].get(bin)
    }

    pub fn csv(&self) -> String {
        let mut out = String::from("bin,method,accuracy,halfwidth\n");
        for k in 0..self.bins.len() {
            for (s, name) in self.systems.iter().enumerate() {
                let t = &self.accuracy[s][k];
                let _ = writeln!(out, "{k},{name},{},{}", fmt(t.accuracy()), fmt(t.halfwidth()));
            }
        }
        out
    }
}

/// Per-bin accuracy of each attribute system after a fixed number of views
/// in that bin. Systems share the scores drawn for each trial.
pub fn experiment3(scenario: &Scenario, trials: usize, seed: u64) -> Result<FamilyTable, ScenarioError> {
    let cfg = scenario
        .file
        .exp3
        .as_ref()
        .ok_or_else(|| ScenarioError::Invalid("scenario has no [exp3] table".into()))?;
    let systems: Vec<(String, Vec<usize>)> = cfg
        .systems
        .iter()
        .map(|(name, groups)| {
            let mut attrs: Vec<usize> = groups.iter().flat_map(|g| scenario.attributes_in_group(g)).collect();
            attrs.sort_unstable();
            attrs.dedup();
            if attrs.is_empty() {
                return Err(ScenarioError::Invalid(format!("system {name:?} has no attributes")));
            }
            Ok((name.clone(), attrs))
        })
        .collect::<Result<_, _>>()?;
    let sets = cfg.training_sets.max(1);
    let recognizers: Vec<Recognizer> = (0..sets as u64)
        .map(|r| {
            let models = scenario.calibrate_replicate(r)?;
            Recognizer::new(scenario.catalog.clone(), models).map_err(|e| crate::error::FusionError::from(e).into())
        })
        .collect::<Result<_, ScenarioError>>()?;
    let nb = scenario.num_bins();
    let mut accuracy = vec![vec![AccuracyTally::default(); nb]; systems.len()];
    for k in 0..nb {
        for t in 0..trials as u64 {
            let trial = k as u64 * trials as u64 + t;
            let rec = &recognizers[(t % sets as u64) as usize];
            let mut rng = stream(seed, Domain::Trial, trial);
            let truth = rng.random_range(0..scenario.catalog.num_objects());
            let views = draw_views(scenario, truth, k, cfg.views_per_bin, &mut rng)?;
            for (s, (_, attrs)) in systems.iter().enumerate() {
                let d = paired_outcomes(rec, &views, attrs)?;
                let tally = &mut accuracy[s][k];
                tally.trials += 1;
                // Systems share the pick stream, so equal decisions pick alike.
                if pick(&d, seed, trial, 0) == truth {
                    tally.correct += 1;
                }
            }
        }
    }
    Ok(FamilyTable {
        systems: systems.into_iter().map(|(n, _)| n).collect(),
        bins: scenario.bins().to_vec(),
        accuracy,
    })
}

// ---------------------------------------------------------------------------
// Guarantee and convergence suites

/// Two-object worst case: complementary attributes, equal priors, every
/// false outcome pulls toward the wrong object.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceConfig {
    pub ppv: f64,
    pub npv: f64,
    pub detection: f64,
    pub true_negative: f64,
    /// Largest acceptable error at the largest K.
    pub ceiling: f64,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        Self {
            ppv: 0.98,
            npv: 0.98,
            detection: 0.5,
            true_negative: 0.5,
            ceiling: 0.02,
        }
    }
}

pub const CONVERGENCE_K: [usize; 8] = [1, 2, 5, 10, 20, 50, 100, 200];

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub config: ConvergenceConfig,
    pub false_positive_rate: f64,
    pub false_negative_rate: f64,
    pub k_values: Vec<usize>,
    pub trials: usize,
    pub errors: Vec<ErrorTally>,
}

impl ConvergenceReport {
    fn at(&self, k: usize) -> Option<&ErrorTally> {
        self.k_values.iter().position(|&x| x == k).map(|i| &self.errors[i])
    }

    /// Strict decrease from K = 5 to K = 50.
    pub fn decreases(&self) -> bool {
        match (self.at(5), self.at(50)) {
            (Some(a), Some(b)) => b.error() < a.error(),
            _ => false,
        }
    }

    pub fn final_error(&self) -> f64 {
        self.errors.last().map_or(1.0, ErrorTally::error)
    }

    pub fn passed(&self) -> bool {
        self.decreases() && self.final_error() < self.config.ceiling
    }

    pub fn csv(&self) -> String {
        let mut out = String::from("K,method,error,halfwidth\n");
        for (k, t) in self.k_values.iter().zip(&self.errors) {
            let _ = writeln!(out, "{k},two-threshold,{},{}", fmt(t.error()), fmt(t.halfwidth()));
        }
        out
    }
}

/// The two-object catalog: `a` has only attribute 0, `b` only attribute 1.
pub fn complementary_pair() -> ObjectCatalog {
    ObjectCatalog::with_equal_priors(
        vec!["a".into(), "b".into()],
        vec!["attr0".into(), "attr1".into()],
        vec![vec![true, false], vec![false, true]],
    )
    .expect("valid catalog")
}

/// Simulates ternary outcomes straight from the rates implied by the
/// predictive values and fuses them; each K uses the first K views.
pub fn convergence_trials(
    config: ConvergenceConfig,
    k_values: &[usize],
    trials: usize,
    seed: u64,
) -> Result<ConvergenceReport, ScenarioError> {
    let catalog = complementary_pair();
    let w = 0.5;
    let (q, v) = implied_false_rates(w, config.ppv, config.npv, config.detection, config.true_negative);
    let cal = BinCalibration::with_rates(0, config.ppv, config.npv, config.detection, config.true_negative, q, v);
    let models = ModelSet {
        bins: vec![[0.0, 1.0]],
        classifiers: ["attr0", "attr1"]
            .iter()
            .map(|a| ClassifierModel {
                attribute: (*a).into(),
                orientation: Default::default(),
                calibrations: vec![cal.clone()],
            })
            .collect(),
    };
    let rec = Recognizer::new(catalog.clone(), models).map_err(crate::error::FusionError::from)?;
    let k_max = k_values.iter().copied().max().unwrap_or(0);
    let mut errors = vec![ErrorTally::default(); k_values.len()];
    for t in 0..trials as u64 {
        let mut rng = stream(seed, Domain::Theorem, t);
        let truth = rng.random_range(0..2usize);
        let mut state = rec.start();
        let mut next = 0;
        for view in 1..=k_max {
            for i in 0..2 {
                let u: f64 = rng.random();
                let outcome = if catalog.has(truth, i) {
                    if u < config.detection {
                        Outcome::Positive
                    } else if u < config.detection + v {
                        Outcome::Negative
                    } else {
                        Outcome::Uncertain
                    }
                } else if u < config.true_negative {
                    Outcome::Negative
                } else if u < config.true_negative + q {
                    Outcome::Positive
                } else {
                    Outcome::Uncertain
                };
                rec.observe(&mut state, &Observation::new(i, 0, outcome, true))?;
            }
            while next < k_values.len() && k_values[next] == view {
                let d = state.decide(&catalog);
                errors[next].record(&d, pick(&d, seed, t, view as u64), truth);
                next += 1;
            }
        }
        // K = 0 entries, if any, see the prior only.
        for (idx, &k) in k_values.iter().enumerate() {
            if k == 0 {
                let d = rec.start().decide(&catalog);
                errors[idx].record(&d, pick(&d, seed, t, 0), truth);
            }
        }
    }
    Ok(ConvergenceReport {
        config,
        false_positive_rate: q,
        false_negative_rate: v,
        k_values: k_values.to_vec(),
        trials,
        errors,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct TheoremReport {
    pub theorem1: Theorem1Report,
    pub convergence: ConvergenceReport,
}

impl TheoremReport {
    pub fn passed(&self) -> bool {
        self.theorem1.passed() && self.convergence.passed()
    }
}

/// Randomized guaranteed-recognition suite over `cases` catalogs and the
/// two-object convergence run over `trials` episodes.
pub fn theorem_suites(cases: usize, trials: usize, seed: u64) -> Result<TheoremReport, ScenarioError> {
    Ok(TheoremReport {
        theorem1: theorem1_suite(cases, seed),
        convergence: convergence_trials(ConvergenceConfig::default(), &CONVERGENCE_K, trials, seed)?,
    })
}

// ---------------------------------------------------------------------------
// Run manifests

#[derive(Debug, Clone, PartialEq, Eq, Serialize, serde::Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub trials: usize,
    pub scenario: Option<String>,
    pub scenario_sha256: Option<String>,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, seed: u64, trials: usize, scenario: Option<(&str, &str)>, outputs: &[&str]) -> Self {
        Self {
            command: command.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            seed,
            trials,
            scenario: scenario.map(|(name, _)| name.into()),
            scenario_sha256: scenario.map(|(_, text)| sha256_hex(text.as_bytes())),
            outputs: outputs.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes") + "\n"
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}
