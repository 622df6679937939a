use super::value::{fit_savf, Midpoint, ValueFunction};
use super::MavtError;
use crate::attributes::{AttributeCatalog, ImpactRange};
use indexmap::IndexMap;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Default aggregation curvature: low compensation between objectives.
pub const DEFAULT_GAMMA: f64 = 0.2;

/// SWING weights: each rating divided by the sum of ratings. The most important
/// attribute is rated 100; declined attributes are rated 0.
pub fn swing_weights(ratings: &IndexMap<String, f64>) -> Result<IndexMap<String, f64>, MavtError> {
    for (attr, &r) in ratings {
        if !(0.0..=100.0).contains(&r) {
            return Err(MavtError::RatingOutOfRange { attribute: attr.clone(), rating: r });
        }
    }
    let total: f64 = ratings.values().sum();
    if total == 0.0 {
        return Err(MavtError::AllRatingsZero);
    }
    let top = ratings.values().copied().fold(0.0, f64::max);
    if top != 100.0 {
        return Err(MavtError::NoReferenceRating(top));
    }
    Ok(ratings.iter().map(|(k, r)| (k.clone(), r / total)).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct StakeholderPreferences {
    pub stakeholder: String,
    pub weights: IndexMap<String, f64>,
    pub value_functions: IndexMap<String, ValueFunction>,
    pub gamma: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl StakeholderPreferences {
    pub fn validate(&self) -> Result<(), MavtError> {
        let total: f64 = self.weights.values().sum();
        if (total - 1.0).abs() > 1e-9 || self.weights.values().any(|&w| !(w >= 0.0)) {
            return Err(MavtError::WeightsNotNormalised(total));
        }
        if !self.gamma.is_finite() || self.gamma < 0.0 {
            return Err(MavtError::InvalidGamma(self.gamma));
        }
        for attr in self.weights.keys() {
            if !self.value_functions.contains_key(attr) {
                return Err(MavtError::MissingValueFunction(attr.clone()));
            }
        }
        Ok(())
    }

    /// Same preferences with replaced weights (renormalised) and curvature.
    pub fn with_weights(&self, weights: &IndexMap<String, f64>, gamma: f64) -> Result<Self, MavtError> {
        let total: f64 = weights.values().sum();
        if !(total > 0.0) {
            return Err(MavtError::AllRatingsZero);
        }
        let mut next = self.clone();
        next.weights = self
            .weights
            .keys()
            .map(|k| (k.clone(), weights.get(k).copied().unwrap_or(0.0) / total))
            .collect();
        next.gamma = gamma;
        next.validate()?;
        Ok(next)
    }
}

/// Position of an elicited midpoint, either as an attribute state or as a
/// fraction of the way from worst to best.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(untagged)]
pub enum MidpointInput {
    State { state: f64, value: f64 },
    Fraction { fraction: f64, value: f64 },
}

/// Raw answers of one stakeholder as stored in `preferences.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct StakeholderInput {
    pub stakeholder: String,
    /// SWING ratings, most important attribute 100, declined attributes 0.
    pub ratings: IndexMap<String, f64>,
    #[serde(default)]
    pub midpoints: IndexMap<String, Vec<MidpointInput>>,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

fn default_gamma() -> f64 {
    DEFAULT_GAMMA
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct PreferenceSet {
    pub stakeholders: Vec<StakeholderInput>,
}

impl PreferenceSet {
    pub fn load(path: &Path) -> Result<Self, MavtError> {
        let text = std::fs::read_to_string(path).map_err(|e| MavtError::Io(e.to_string()))?;
        serde_json::from_str(&text).map_err(|e| MavtError::Json(e.to_string()))
    }

    pub fn is_empty(&self) -> bool {
        self.stakeholders.is_empty()
    }
}

impl StakeholderInput {
    /// Derives weights and value functions against the impact ranges of a run.
    /// Attributes without midpoints get linear value functions.
    pub fn derive(
        &self,
        catalog: &AttributeCatalog,
        ranges: &IndexMap<String, ImpactRange>,
    ) -> Result<StakeholderPreferences, MavtError> {
        let mut ratings = IndexMap::new();
        for a in &catalog.attributes {
            ratings.insert(a.id.clone(), self.ratings.get(&a.id).copied().unwrap_or(0.0));
        }
        if let Some(extra) = self.ratings.keys().find(|k| !ratings.contains_key(*k)) {
            return Err(MavtError::UnknownAttribute(extra.clone()));
        }
        let weights = swing_weights(&ratings)?;
        let mut value_functions = IndexMap::new();
        for a in &catalog.attributes {
            let r = ranges
                .get(&a.id)
                .ok_or_else(|| MavtError::UnknownAttribute(a.id.clone()))?;
            let points: Vec<Midpoint> = self
                .midpoints
                .get(&a.id)
                .map(|v| {
                    v.iter()
                        .map(|m| match *m {
                            MidpointInput::State { state, value } => Midpoint { state, value },
                            MidpointInput::Fraction { fraction, value } => Midpoint {
                                state: r.worst + fraction * (r.best - r.worst),
                                value,
                            },
                        })
                        .collect()
                })
                .unwrap_or_default();
            let vf = if r.worst == r.best {
                // no spread across alternatives: every state is equally good
                ValueFunction::linear(r.worst, r.best)
            } else {
                fit_savf(r.worst, r.best, &points)?
            };
            value_functions.insert(a.id.clone(), vf);
        }
        let prefs = StakeholderPreferences {
            stakeholder: self.stakeholder.clone(),
            weights,
            value_functions,
            gamma: self.gamma,
            notes: self.notes.clone(),
        };
        prefs.validate()?;
        Ok(prefs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ratings(v: &[f64]) -> IndexMap<String, f64> {
        v.iter().enumerate().map(|(i, r)| (format!("a{i}"), *r)).collect()
    }

    #[test]
    fn swing_examples() {
        let w = swing_weights(&ratings(&[100.0, 50.0, 50.0])).unwrap();
        assert_eq!(w.values().copied().collect::<Vec<_>>(), vec![0.5, 0.25, 0.25]);
        let w = swing_weights(&ratings(&[100.0])).unwrap();
        assert_eq!(w["a0"], 1.0);
        let w = swing_weights(&ratings(&[100.0, 80.0, 60.0, 40.0, 20.0])).unwrap();
        let expect = [1.0 / 3.0, 4.0 / 15.0, 1.0 / 5.0, 2.0 / 15.0, 1.0 / 15.0];
        for (got, want) in w.values().zip(expect) {
            assert!((got - want).abs() < 1e-15);
        }
        assert!((w.values().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn swing_errors() {
        assert!(matches!(swing_weights(&ratings(&[0.0, 0.0])), Err(MavtError::AllRatingsZero)));
        assert!(swing_weights(&ratings(&[120.0, 50.0])).is_err());
        assert!(matches!(swing_weights(&ratings(&[80.0, 50.0])), Err(MavtError::NoReferenceRating(_))));
        // declined attributes keep weight zero
        let w = swing_weights(&ratings(&[100.0, 0.0])).unwrap();
        assert_eq!(w["a1"], 0.0);
    }
}
