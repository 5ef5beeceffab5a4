//! Attribute-based object recognition with two-threshold classifiers.
//!
//! Attribute classifiers emit positive / negative / uncertain outcomes
//! using a high-PPV and a high-NPV threshold learned per environment bin.
//! Outcomes from bins inside each classifier's reliable region are fused
//! across observations by MAP estimation over a catalog of objects.

pub mod catalog;
pub mod classifier;
pub mod error;
pub mod experiments;
pub mod fusion;
pub mod simulator;
pub mod theory;

pub use catalog::{CandidateSet, CatalogStats, ObjectCatalog};
pub use classifier::{
    calibrate_bin, kde_density, single_threshold_baseline, BayesThreshold, BinCalibration, CalibrationTargets,
    ClassifierModel, ModelSet, Orientation, Outcome,
};
pub use error::{CalibrationError, CatalogError, FusionError, ModelError, ScenarioError};
pub use fusion::{Decision, DecisionRecord, Observation, PosteriorState, Recognizer, TieBreak};
pub use simulator::{Scenario, TrialRecord};
