//! Attribute catalog and evaluation of alternatives into attribute profiles.

mod catalog;

pub use catalog::{
    Aggregation, Attribute, AttributeCatalog, Basis, CatalogError, Direction, ModelQuantity, ScoreRange,
    Uncertainty,
};

use crate::esm::{Decomposition, SystemModel};
use indexmap::IndexMap;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
#[error("shares sum to {0}, expected 1")]
pub struct NormalizationError(pub f64);

/// Shannon index `-Σ s ln s` over positive shares.
pub fn shannon_index(shares: &[f64]) -> Result<f64, NormalizationError> {
    let total: f64 = shares.iter().sum();
    if (total - 1.0).abs() > 1e-9 || shares.iter().any(|&s| s < 0.0 || !s.is_finite()) {
        return Err(NormalizationError(total));
    }
    Ok(-shares.iter().filter(|&&s| s > 0.0).map(|&s| s * s.ln()).sum::<f64>())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct AttributeValue {
    pub mean: f64,
    pub low: f64,
    pub high: f64,
}

impl AttributeValue {
    pub fn exact(v: f64) -> Self {
        Self { mean: v, low: v, high: v }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct AttributeProfile {
    pub alternative: String,
    pub values: IndexMap<String, AttributeValue>,
}

impl AttributeProfile {
    pub fn mean(&self, attribute: &str) -> Option<f64> {
        self.values.get(attribute).map(|v| v.mean)
    }
}

/// Catalog resolved against a system model: per-technology coefficients are
/// looked up once so evaluation is a plain weighted sum.
#[derive(Clone, Debug)]
pub struct Evaluator<'a> {
    catalog: &'a AttributeCatalog,
    technologies: Vec<String>,
    /// Per attribute: coefficient per technology (empty for systemic/model-direct).
    coefficients: Vec<Vec<f64>>,
    /// Per attribute: technologies included in a carrier-restricted mean.
    included: Vec<Vec<bool>>,
    /// Per attribute: expert score ranges per technology.
    ranges: Vec<Vec<ScoreRange>>,
}

impl<'a> Evaluator<'a> {
    pub fn new(catalog: &'a AttributeCatalog, model: &SystemModel) -> Result<Self, CatalogError> {
        let mut coefficients = Vec::new();
        let mut included = Vec::new();
        let mut ranges = Vec::new();
        for a in &catalog.attributes {
            let coefs = match a.aggregation {
                Aggregation::Sum | Aggregation::DemandWeightedMean { .. } | Aggregation::CapacityWeightedMean => {
                    catalog.contributions(a, model)?
                }
                _ => Vec::new(),
            };
            coefficients.push(coefs);
            included.push(
                model
                    .technologies
                    .iter()
                    .map(|t| match &a.aggregation {
                        Aggregation::DemandWeightedMean { carriers } if !carriers.is_empty() => {
                            carriers.contains(&t.sector)
                        }
                        _ => true,
                    })
                    .collect(),
            );
            ranges.push(if a.aggregation == Aggregation::CapacityWeightedMean {
                model
                    .technologies
                    .iter()
                    .map(|t| catalog.expert_range(&a.id, &t.id).expect("checked by contributions"))
                    .collect()
            } else {
                Vec::new()
            });
        }
        Ok(Self {
            catalog,
            technologies: model.technologies.iter().map(|t| t.id.clone()).collect(),
            coefficients,
            included,
            ranges,
        })
    }

    pub fn catalog(&self) -> &AttributeCatalog {
        self.catalog
    }

    pub fn evaluate(&self, alternative: &str, d: &Decomposition) -> AttributeProfile {
        let figures: Vec<_> = self
            .technologies
            .iter()
            .map(|id| d.technologies.get(id).copied().unwrap_or_default())
            .collect();
        let gen: Vec<f64> = figures.iter().map(|f| f.generation.max(0.0)).collect();
        let cap: Vec<f64> = figures.iter().map(|f| f.capacity.max(0.0)).collect();
        let mut values = IndexMap::new();
        for (k, a) in self.catalog.attributes.iter().enumerate() {
            let coef = &self.coefficients[k];
            let activity = if a.basis == Basis::Capacity { &cap } else { &gen };
            let mut support = None;
            let mean = match &a.aggregation {
                Aggregation::Sum => coef.iter().zip(activity).map(|(c, x)| c * x).sum(),
                Aggregation::DemandWeightedMean { .. } => {
                    let inc = &self.included[k];
                    let (num, den) = (0..gen.len())
                        .filter(|&i| inc[i])
                        .fold((0.0, 0.0), |(n, d), i| (n + coef[i] * gen[i], d + gen[i]));
                    if den > 0.0 { num / den } else { 0.0 }
                }
                Aggregation::CapacityWeightedMean => {
                    let total: f64 = cap.iter().sum();
                    // no capacity at all: fall back to an unweighted mean
                    let w: Vec<f64> = if total > 0.0 {
                        cap.iter().map(|c| c / total).collect()
                    } else {
                        vec![1.0 / cap.len() as f64; cap.len()]
                    };
                    let r = &self.ranges[k];
                    let mix = |f: &dyn Fn(&ScoreRange) -> f64| {
                        w.iter().zip(r).map(|(w, r)| w * f(r)).sum::<f64>().clamp(1.0, 7.0)
                    };
                    support = Some((mix(&|r| r.min), mix(&|r| r.max)));
                    mix(&ScoreRange::midpoint)
                }
                Aggregation::Shannon => generation_shannon(&gen),
                Aggregation::ModelDirect { quantity } => match quantity {
                    ModelQuantity::OperatingCost => d.costs.operating(),
                    ModelQuantity::InvestmentCost => d.costs.invest,
                    ModelQuantity::TotalCost => d.costs.total,
                },
            };
            let (mut low, mut high) = match a.uncertainty {
                Uncertainty::NormalRelative { sd } => {
                    let half = self.catalog.envelope_sd * sd * mean.abs();
                    (mean - half, mean + half)
                }
                Uncertainty::UniformSupport => support.unwrap_or((mean, mean)),
                Uncertainty::None => (mean, mean),
            };
            if a.aggregation == Aggregation::Shannon {
                let max = (gen.len() as f64).ln();
                low = low.clamp(0.0, max);
                high = high.clamp(0.0, max);
            }
            values.insert(a.id.clone(), AttributeValue { mean, low, high });
        }
        AttributeProfile {
            alternative: alternative.to_string(),
            values,
        }
    }
}

fn generation_shannon(gen: &[f64]) -> f64 {
    let total: f64 = gen.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    let shares: Vec<f64> = gen.iter().map(|g| g / total).collect();
    let sum: f64 = shares.iter().sum();
    // renormalise away rounding so the strict check in shannon_index holds
    let shares: Vec<f64> = shares.iter().map(|s| s / sum).collect();
    shannon_index(&shares).unwrap_or(0.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct ImpactRange {
    pub worst: f64,
    pub best: f64,
}

/// Worst and best state of every attribute over all profiles, including the
/// uncertainty envelopes.
pub fn impact_ranges(profiles: &[AttributeProfile], catalog: &AttributeCatalog) -> IndexMap<String, ImpactRange> {
    catalog
        .attributes
        .iter()
        .map(|a| {
            let (lo, hi) = profiles
                .iter()
                .filter_map(|p| p.values.get(&a.id))
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v.low), hi.max(v.high)));
            let range = match a.direction {
                Direction::LowerBetter => ImpactRange { worst: hi, best: lo },
                Direction::HigherBetter => ImpactRange { worst: lo, best: hi },
            };
            (a.id.clone(), range)
        })
        .collect()
}
