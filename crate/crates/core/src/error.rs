use thiserror::Error;

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("catalog has no {0}")]
    Empty(&'static str),
    #[error("catalog shape mismatch: {0}")]
    Shape(String),
    #[error("duplicate {kind} id {id:?}")]
    Duplicate { kind: &'static str, id: String },
    #[error("object {object:?} has invalid prior {prior}")]
    BadPrior { object: String, prior: f64 },
    #[error("priors sum to {0}, expected 1")]
    PriorSum(f64),
    #[error("attribute index {index} out of range ({len} attributes)")]
    AttributeOutOfRange { index: usize, len: usize },
    #[error("attribute {attribute:?} is constant across the catalog")]
    NonDiscriminative { attribute: String },
    #[error("failed to parse catalog: {0}")]
    Parse(String),
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Error, PartialEq)]
pub enum CalibrationError {
    #[error("empty {0} score sample")]
    EmptySample(&'static str),
    #[error("non-finite score in {0} sample")]
    NonFinite(&'static str),
    #[error("target {name} = {value} outside (0, 1]")]
    BadTarget { name: &'static str, value: f64 },
    #[error("minimum detection rate {0} outside [0, 1]")]
    BadDetectionFloor(f64),
    #[error("bandwidth must be positive, got {0}")]
    BadBandwidth(f64),
}

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("bin {bin} not in model ({bins} bins)")]
    UnknownBin { bin: usize, bins: usize },
    #[error("no classifier for attribute {0}")]
    UnknownAttribute(String),
    #[error("model covers {models} attributes, catalog has {attributes}")]
    AttributeCount { models: usize, attributes: usize },
    #[error("failed to parse model file: {0}")]
    Parse(String),
}

#[derive(Debug, Error, PartialEq)]
pub enum FusionError {
    #[error("attribute index {0} out of range")]
    UnknownAttribute(usize),
    #[error("object index {0} out of range")]
    UnknownObject(usize),
    #[error("attribute {0} is constant across the catalog and cannot be fused")]
    UnusableAttribute(usize),
    #[error("reliable bin {bin} of attribute {attribute} has no predictive value")]
    MissingPredictiveValue { attribute: usize, bin: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("failed to parse scenario: {0}")]
    Parse(String),
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("no score model for attribute {attribute}, truth {truth}, bin {bin}")]
    MissingModel {
        attribute: usize,
        truth: &'static str,
        bin: usize,
    },
    #[error("schedule references unknown bin {0}")]
    UnknownBin(usize),
    #[error("sample counts must be at least 1")]
    EmptyTrainingSet,
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error(transparent)]
    Calibration(#[from] CalibrationError),
    #[error(transparent)]
    Fusion(#[from] FusionError),
}
