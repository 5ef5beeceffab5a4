//! Object catalog: object set, binary attribute matrix and object priors.
//!
//! Everything here is immutable once built. [`CatalogStats`] caches the
//! per-attribute quantities that the fusion update and the correctness
//! bounds need (`w`, `r+`, `r-`) together with each object's positive and
//! negative attribute index sets.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::CatalogError;

/// Tolerance on the prior sum accepted by the loader before rescaling.
pub const PRIOR_SUM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectEntry {
    pub id: String,
    pub prior: f64,
}

/// On-disk layout of a catalog file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CatalogFile {
    pub objects: Vec<ObjectEntry>,
    pub attributes: Vec<String>,
    pub matrix: Vec<Vec<u8>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectCatalog {
    objects: Vec<String>,
    attributes: Vec<String>,
    /// Row-major, `matrix[j][i]` is attribute `i` of object `j`.
    matrix: Vec<Vec<bool>>,
    priors: Vec<f64>,
}

impl ObjectCatalog {
    /// Builds a catalog, rescaling priors whose sum is within
    /// [`PRIOR_SUM_TOLERANCE`] of one.
    pub fn new(
        objects: Vec<String>,
        attributes: Vec<String>,
        matrix: Vec<Vec<bool>>,
        priors: Vec<f64>,
    ) -> Result<Self, CatalogError> {
        if objects.is_empty() {
            return Err(CatalogError::Empty("objects"));
        }
        if attributes.is_empty() {
            return Err(CatalogError::Empty("attributes"));
        }
        if priors.len() != objects.len() {
            return Err(CatalogError::Shape(format!(
                "{} priors for {} objects",
                priors.len(),
                objects.len()
            )));
        }
        if matrix.len() != objects.len() {
            return Err(CatalogError::Shape(format!(
                "{} matrix rows for {} objects",
                matrix.len(),
                objects.len()
            )));
        }
        for (j, row) in matrix.iter().enumerate() {
            if row.len() != attributes.len() {
                return Err(CatalogError::Shape(format!(
                    "row {} has {} entries, expected {}",
                    j,
                    row.len(),
                    attributes.len()
                )));
            }
        }
        check_unique("object", &objects)?;
        check_unique("attribute", &attributes)?;
        for (id, &p) in objects.iter().zip(&priors) {
            if !(p.is_finite() && p > 0.0) {
                return Err(CatalogError::BadPrior {
                    object: id.clone(),
                    prior: p,
                });
            }
        }
        let sum: f64 = priors.iter().sum();
        if (sum - 1.0).abs() > PRIOR_SUM_TOLERANCE {
            return Err(CatalogError::PriorSum(sum));
        }
        // Leave already-normalized priors untouched so save/load is stable.
        let priors = if (sum - 1.0).abs() > 1e-12 {
            priors.into_iter().map(|p| p / sum).collect()
        } else {
            priors
        };
        Ok(Self {
            objects,
            attributes,
            matrix,
            priors,
        })
    }

    /// Catalog with equal priors `1 / |objects|`.
    pub fn with_equal_priors(
        objects: Vec<String>,
        attributes: Vec<String>,
        matrix: Vec<Vec<bool>>,
    ) -> Result<Self, CatalogError> {
        let n = objects.len().max(1);
        let priors = vec![1.0 / n as f64; objects.len()];
        Self::new(objects, attributes, matrix, priors)
    }

    pub fn from_file_repr(file: CatalogFile) -> Result<Self, CatalogError> {
        let mut matrix = Vec::with_capacity(file.matrix.len());
        for (j, row) in file.matrix.iter().enumerate() {
            let mut out = Vec::with_capacity(row.len());
            for &v in row {
                match v {
                    0 => out.push(false),
                    1 => out.push(true),
                    other => return Err(CatalogError::Shape(format!("row {j} holds {other}, expected 0 or 1"))),
                }
            }
            matrix.push(out);
        }
        let (objects, priors) = file.objects.into_iter().map(|o| (o.id, o.prior)).unzip();
        Self::new(objects, file.attributes, matrix, priors)
    }

    pub fn to_file_repr(&self) -> CatalogFile {
        CatalogFile {
            objects: self
                .objects
                .iter()
                .zip(&self.priors)
                .map(|(id, &prior)| ObjectEntry { id: id.clone(), prior })
                .collect(),
            attributes: self.attributes.clone(),
            matrix: self
                .matrix
                .iter()
                .map(|row| row.iter().map(|&b| b as u8).collect())
                .collect(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, CatalogError> {
        let file: CatalogFile = toml::from_str(text).map_err(|e| CatalogError::Parse(e.to_string()))?;
        Self::from_file_repr(file)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(&self.to_file_repr()).expect("catalog serializes")
    }

    pub fn load(path: &Path) -> Result<Self, CatalogError> {
        let text = std::fs::read_to_string(path).map_err(|e| CatalogError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn num_objects(&self) -> usize {
        self.objects.len()
    }

    pub fn num_attributes(&self) -> usize {
        self.attributes.len()
    }

    pub fn objects(&self) -> &[String] {
        &self.objects
    }

    pub fn attributes(&self) -> &[String] {
        &self.attributes
    }

    pub fn priors(&self) -> &[f64] {
        &self.priors
    }

    pub fn prior(&self, object: usize) -> f64 {
        self.priors[object]
    }

    /// `f_ij`: whether object `object` has attribute `attribute`.
    pub fn has(&self, object: usize, attribute: usize) -> bool {
        self.matrix[object][attribute]
    }

    pub fn row(&self, object: usize) -> &[bool] {
        &self.matrix[object]
    }

    pub fn object_index(&self, id: &str) -> Option<usize> {
        self.objects.iter().position(|o| o == id)
    }

    pub fn attribute_index(&self, id: &str) -> Option<usize> {
        self.attributes.iter().position(|a| a == id)
    }

    fn check_attribute(&self, attribute: usize) -> Result<(), CatalogError> {
        if attribute < self.attributes.len() {
            Ok(())
        } else {
            Err(CatalogError::AttributeOutOfRange {
                index: attribute,
                len: self.attributes.len(),
            })
        }
    }

    /// `w_i`: total prior mass of the objects that carry the attribute.
    pub fn attribute_prior(&self, attribute: usize) -> Result<f64, CatalogError> {
        self.check_attribute(attribute)?;
        Ok(self
            .matrix
            .iter()
            .zip(&self.priors)
            .filter(|(row, _)| row[attribute])
            .map(|(_, &p)| p)
            .sum())
    }

    /// `(r+, r-)` worst-case prior ratios between the negative and positive
    /// object groups of an attribute, each floored at one.
    pub fn prior_ratios(&self, attribute: usize) -> Result<(f64, f64), CatalogError> {
        self.check_attribute(attribute)?;
        let mut pos_min = f64::INFINITY;
        let mut pos_max = f64::NEG_INFINITY;
        let mut neg_min = f64::INFINITY;
        let mut neg_max = f64::NEG_INFINITY;
        for (row, &p) in self.matrix.iter().zip(&self.priors) {
            if row[attribute] {
                pos_min = pos_min.min(p);
                pos_max = pos_max.max(p);
            } else {
                neg_min = neg_min.min(p);
                neg_max = neg_max.max(p);
            }
        }
        if !pos_min.is_finite() || !neg_min.is_finite() {
            return Err(CatalogError::NonDiscriminative {
                attribute: self.attributes[attribute].clone(),
            });
        }
        Ok(((neg_max / pos_min).max(1.0), (pos_max / neg_min).max(1.0)))
    }

    /// Objects whose positive set contains `pos` and whose negative set
    /// contains `neg`. An empty result means the evidence is contradictory.
    pub fn unique_candidates(&self, pos: &BTreeSet<usize>, neg: &BTreeSet<usize>) -> CandidateSet {
        let objects = (0..self.objects.len())
            .filter(|&j| pos.iter().all(|&i| self.matrix[j][i]) && neg.iter().all(|&i| !self.matrix[j][i]))
            .collect();
        CandidateSet { objects }
    }

    pub fn stats(&self) -> CatalogStats {
        CatalogStats::new(self)
    }
}

fn check_unique(kind: &'static str, ids: &[String]) -> Result<(), CatalogError> {
    let mut seen = BTreeSet::new();
    for id in ids {
        if !seen.insert(id.as_str()) {
            return Err(CatalogError::Duplicate { kind, id: id.clone() });
        }
    }
    Ok(())
}

/// Result of [`ObjectCatalog::unique_candidates`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub objects: Vec<usize>,
}

impl CandidateSet {
    pub fn is_contradictory(&self) -> bool {
        self.objects.is_empty()
    }

    pub fn unique(&self) -> Option<usize> {
        match self.objects.as_slice() {
            [only] => Some(*only),
            _ => None,
        }
    }
}

/// Catalog-derived quantities for every attribute.
///
/// `r_plus` / `r_minus` are `None` for constant attributes; those are kept
/// in the catalog but cannot take part in fusion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogStats {
    pub w: Vec<f64>,
    pub r_plus: Vec<Option<f64>>,
    pub r_minus: Vec<Option<f64>>,
    pub pos_index_sets: Vec<BTreeSet<usize>>,
    pub neg_index_sets: Vec<BTreeSet<usize>>,
}

impl CatalogStats {
    pub fn new(catalog: &ObjectCatalog) -> Self {
        let m = catalog.num_attributes();
        let mut w = Vec::with_capacity(m);
        let mut r_plus = Vec::with_capacity(m);
        let mut r_minus = Vec::with_capacity(m);
        for i in 0..m {
            w.push(catalog.attribute_prior(i).expect("index in range"));
            match catalog.prior_ratios(i) {
                Ok((rp, rm)) => {
                    r_plus.push(Some(rp));
                    r_minus.push(Some(rm));
                }
                Err(_) => {
                    r_plus.push(None);
                    r_minus.push(None);
                }
            }
        }
        let (pos_index_sets, neg_index_sets) = (0..catalog.num_objects())
            .map(|j| {
                let row = catalog.row(j);
                let pos = (0..m).filter(|&i| row[i]).collect::<BTreeSet<_>>();
                let neg = (0..m).filter(|&i| !row[i]).collect::<BTreeSet<_>>();
                (pos, neg)
            })
            .unzip();
        Self {
            w,
            r_plus,
            r_minus,
            pos_index_sets,
            neg_index_sets,
        }
    }

    /// Whether the attribute is mixed across the catalog (`0 < w < 1`).
    pub fn is_usable(&self, attribute: usize) -> bool {
        self.r_plus.get(attribute).is_some_and(Option::is_some)
    }
}
