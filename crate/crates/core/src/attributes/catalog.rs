use crate::esm::SystemModel;
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("duplicate attribute `{0}`")]
    DuplicateAttribute(String),
    #[error("attribute `{attribute}` has no coefficient for technology `{technology}`")]
    MissingCoefficient { attribute: String, technology: String },
    #[error("decomposable attribute `{0}` has no contribution data")]
    NoContributionData(String),
    #[error("coefficients given for unknown attribute `{0}`")]
    UnknownAttribute(String),
    #[error("expert score range [{min}, {max}] of `{attribute}`/`{technology}` outside 1..=7 or inverted")]
    ExpertRange { attribute: String, technology: String, min: f64, max: f64 },
    #[error("invalid coefficient {value} for `{attribute}`/`{technology}`")]
    InvalidCoefficient { attribute: String, technology: String, value: f64 },
    #[error("cannot read catalog: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed catalog: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    LowerBetter,
    HigherBetter,
}

/// Which decision variables an attribute responds to.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    Generation,
    Capacity,
    Systemic,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum ModelQuantity {
    /// Fixed and variable O&M, fuel and auxiliary cost.
    OperatingCost,
    InvestmentCost,
    TotalCost,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Aggregation {
    /// Σ coefficient × generation (or capacity).
    Sum,
    /// Σ coefficient × generation / Σ generation, optionally restricted to
    /// technologies serving the listed carriers.
    DemandWeightedMean {
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        carriers: Vec<String>,
    },
    /// Capacity-weighted mean of expert scores, clamped to the 1..7 scale.
    CapacityWeightedMean,
    /// Shannon index of annual-generation shares.
    Shannon,
    /// Read directly from the cost breakdown.
    ModelDirect { quantity: ModelQuantity },
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum Uncertainty {
    /// Normal around the mean with `sd` as a fraction of |mean|.
    NormalRelative { sd: f64 },
    /// Uniform over the capacity-weighted expert score support.
    UniformSupport,
    None,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Attribute {
    pub id: String,
    pub name: String,
    pub unit: String,
    /// High-level objective the attribute belongs to.
    pub objective: String,
    pub direction: Direction,
    pub basis: Basis,
    pub aggregation: Aggregation,
    pub decomposable: bool,
    pub uncertainty: Uncertainty,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct ScoreRange {
    pub min: f64,
    pub max: f64,
}

impl ScoreRange {
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.min + self.max)
    }
}

fn default_envelope() -> f64 {
    2.0
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct AttributeCatalog {
    pub attributes: Vec<Attribute>,
    /// Per attribute, per technology: per MWh for generation basis, per MW for capacity basis.
    #[serde(default)]
    pub coefficients: IndexMap<String, IndexMap<String, f64>>,
    #[serde(default)]
    pub expert_ranges: IndexMap<String, IndexMap<String, ScoreRange>>,
    /// Half-width of the normal uncertainty envelope in standard deviations.
    #[serde(default = "default_envelope")]
    pub envelope_sd: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<String>,
}

impl AttributeCatalog {
    pub fn from_json(text: &str) -> Result<Self, CatalogError> {
        let c: AttributeCatalog = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self, CatalogError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<(), CatalogError> {
        let mut seen = std::collections::BTreeSet::new();
        for a in &self.attributes {
            if !seen.insert(a.id.as_str()) {
                return Err(CatalogError::DuplicateAttribute(a.id.clone()));
            }
        }
        for (attr, map) in &self.coefficients {
            if !seen.contains(attr.as_str()) {
                return Err(CatalogError::UnknownAttribute(attr.clone()));
            }
            for (tech, &value) in map {
                if !value.is_finite() {
                    return Err(CatalogError::InvalidCoefficient {
                        attribute: attr.clone(),
                        technology: tech.clone(),
                        value,
                    });
                }
            }
        }
        for (attr, map) in &self.expert_ranges {
            if !seen.contains(attr.as_str()) {
                return Err(CatalogError::UnknownAttribute(attr.clone()));
            }
            for (tech, r) in map {
                if !(1.0..=7.0).contains(&r.min) || !(1.0..=7.0).contains(&r.max) || r.min > r.max {
                    return Err(CatalogError::ExpertRange {
                        attribute: attr.clone(),
                        technology: tech.clone(),
                        min: r.min,
                        max: r.max,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn attribute(&self, id: &str) -> Option<&Attribute> {
        self.attributes.iter().find(|a| a.id == id)
    }

    fn missing(attribute: &Attribute, technology: &str) -> CatalogError {
        CatalogError::MissingCoefficient {
            attribute: attribute.id.clone(),
            technology: technology.to_string(),
        }
    }

    /// Specific contribution of each technology to `attribute`, in model order.
    /// Used both for evaluation and for ranking technologies into MGA groups.
    /// Cost attributes read the model's cost data; expert attributes use the
    /// midpoint of the score range.
    pub fn contributions(&self, attribute: &Attribute, model: &SystemModel) -> Result<Vec<f64>, CatalogError> {
        model
            .technologies
            .iter()
            .map(|t| match &attribute.aggregation {
                Aggregation::ModelDirect { quantity } => Ok(match (quantity, attribute.basis) {
                    (ModelQuantity::InvestmentCost, _) => t.invest_cost,
                    (ModelQuantity::OperatingCost, Basis::Capacity) => t.fom_cost,
                    (ModelQuantity::OperatingCost, _) => t.vom_cost + t.fuel_cost + t.aux_cost,
                    (ModelQuantity::TotalCost, Basis::Capacity) => t.invest_cost + t.fom_cost,
                    (ModelQuantity::TotalCost, _) => t.vom_cost + t.fuel_cost + t.aux_cost,
                }),
                Aggregation::CapacityWeightedMean => self
                    .expert_ranges
                    .get(&attribute.id)
                    .and_then(|m| m.get(&t.id))
                    .map(ScoreRange::midpoint)
                    .ok_or_else(|| Self::missing(attribute, &t.id)),
                Aggregation::Shannon => Err(CatalogError::NoContributionData(attribute.id.clone())),
                Aggregation::Sum | Aggregation::DemandWeightedMean { .. } => self
                    .coefficients
                    .get(&attribute.id)
                    .ok_or_else(|| CatalogError::NoContributionData(attribute.id.clone()))?
                    .get(&t.id)
                    .copied()
                    .ok_or_else(|| Self::missing(attribute, &t.id)),
            })
            .collect()
    }

    pub fn expert_range(&self, attribute: &str, technology: &str) -> Option<ScoreRange> {
        self.expert_ranges.get(attribute)?.get(technology).copied()
    }
}
