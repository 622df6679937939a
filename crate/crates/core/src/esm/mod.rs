//! Multi-carrier energy-system cost model.
//!
//! A [`SystemModel`] is a declarative description of carriers, technologies,
//! weighted time slices and demands. [`compile`] turns it into a cost-minimising
//! [`LinearProgram`](crate::lp::LinearProgram) and [`decompose`] maps any solution
//! of that program (or of an MGA variant sharing its variables) back to costs and
//! per-technology figures.
//!
//! Units: generation and demand are MWh over the whole slice (already scaled by
//! the slice weight), capacities are MW, costs are EUR per year.

mod compile;

pub use compile::{compile, decompose, CompiledModel, CostBreakdown, Decomposition, TechnologyFigures};

use crate::lp::LpError;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EsmError {
    #[error("technology `{tech}` references undeclared carrier `{carrier}`")]
    UnknownCarrier { tech: String, carrier: String },
    #[error("demand given for undeclared carrier `{0}`")]
    UnknownDemandCarrier(String),
    #[error("slice weights sum to {total} h, expected {expected} h")]
    SliceHours { total: f64, expected: f64 },
    #[error("`{owner}` has {got} per-slice values, expected {expected}")]
    ProfileLength { owner: String, got: usize, expected: usize },
    #[error("invalid value for `{field}` of `{owner}`: {value}")]
    InvalidValue { owner: String, field: String, value: f64 },
    #[error("duplicate id `{0}`")]
    DuplicateId(String),
    #[error("technology `{0}` does not list its sector carrier among its outputs")]
    SectorNotOutput(String),
    #[error("maximum annual generation of `{tech}` ({limit} MWh) exceeds its capacity envelope ({envelope} MWh)")]
    PotentialExceedsCapacity { tech: String, limit: f64, envelope: f64 },
    #[error("demand for `{carrier}` in slice `{slice}` ({demand} MWh) exceeds maximum supply ({supply} MWh)")]
    InfeasibleByConstruction { carrier: String, slice: String, demand: f64, supply: f64 },
    #[error("solution has {got} variables, model compiles to {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("cannot read system model: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed system model: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Carrier {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct TimeSlice {
    pub id: String,
    /// Hours of the year represented by this slice.
    pub weight: f64,
}

/// A value that is either constant or given per time slice.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum Profile {
    Constant(f64),
    PerSlice(Vec<f64>),
}

impl Default for Profile {
    fn default() -> Self {
        Profile::Constant(1.0)
    }
}

impl Profile {
    pub fn at(&self, slice: usize) -> f64 {
        match self {
            Profile::Constant(v) => *v,
            Profile::PerSlice(v) => v[slice],
        }
    }

    fn values(&self) -> Vec<f64> {
        match self {
            Profile::Constant(v) => vec![*v],
            Profile::PerSlice(v) => v.clone(),
        }
    }

    fn check_len(&self, owner: &str, slices: usize) -> Result<(), EsmError> {
        match self {
            Profile::PerSlice(v) if v.len() != slices => Err(EsmError::ProfileLength {
                owner: owner.to_string(),
                got: v.len(),
                expected: slices,
            }),
            _ => Ok(()),
        }
    }
}

/// Carrier consumed per unit of primary output, e.g. electricity for a heat pump.
/// Consumption in a slice is `generation / cop`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Input {
    pub carrier: String,
    pub cop: Profile,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Technology {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// Carrier the technology primarily serves. Generation variables are measured
    /// in this carrier.
    pub sector: String,
    /// Output per MWh of primary generation, by carrier. Must include the sector.
    pub outputs: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<Input>,
    #[serde(default)]
    pub existing_capacity: f64,
    #[serde(default)]
    pub max_investment: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_annual_generation: Option<f64>,
    /// Annualised investment cost, EUR/MW/a.
    #[serde(default)]
    pub invest_cost: f64,
    /// Fixed O&M, EUR/MW/a, charged on existing and invested capacity.
    #[serde(default)]
    pub fom_cost: f64,
    /// EUR/MWh.
    #[serde(default)]
    pub vom_cost: f64,
    /// Fuel and CO2 cost, EUR/MWh.
    #[serde(default)]
    pub fuel_cost: f64,
    /// EUR/MWh.
    #[serde(default)]
    pub aux_cost: f64,
    #[serde(default)]
    pub availability: Profile,
    /// t CO2 per MWh of primary generation.
    #[serde(default)]
    pub emission_factor: f64,
    /// Grid procurement: no investment, capacity fixed at a multiple of peak demand.
    #[serde(default)]
    pub procurement: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

fn default_hours() -> f64 {
    8760.0
}

fn default_hours_tolerance() -> f64 {
    1e-6
}

fn default_procurement_factor() -> f64 {
    3.0
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SystemModel {
    #[serde(default)]
    pub name: String,
    pub carriers: Vec<Carrier>,
    pub slices: Vec<TimeSlice>,
    /// Demand per carrier, one value per slice in MWh.
    pub demands: BTreeMap<String, Vec<f64>>,
    pub technologies: Vec<Technology>,
    /// t CO2 per year; `None` leaves emissions unconstrained.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub emission_cap: Option<f64>,
    #[serde(default = "default_hours")]
    pub hours_per_year: f64,
    #[serde(default = "default_hours_tolerance")]
    pub hours_tolerance: f64,
    /// Procurement capacity as a multiple of the sector's peak demand.
    #[serde(default = "default_procurement_factor")]
    pub procurement_capacity_factor: f64,
}

impl SystemModel {
    pub fn from_json(text: &str) -> Result<Self, EsmError> {
        let model: SystemModel = serde_json::from_str(text)?;
        model.validate()?;
        Ok(model)
    }

    pub fn load(path: &Path) -> Result<Self, EsmError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<(), EsmError> {
        let nonneg = |owner: &str, field: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(EsmError::InvalidValue {
                    owner: owner.to_string(),
                    field: field.to_string(),
                    value: v,
                })
            }
        };
        let mut seen = std::collections::BTreeSet::new();
        for id in self
            .carriers
            .iter()
            .map(|c| &c.id)
            .chain(self.slices.iter().map(|s| &s.id))
            .chain(self.technologies.iter().map(|t| &t.id))
        {
            if !seen.insert(id.as_str()) {
                return Err(EsmError::DuplicateId(id.clone()));
            }
        }
        let n = self.slices.len();
        let mut total = 0.0;
        for s in &self.slices {
            if !(s.weight.is_finite() && s.weight > 0.0) {
                return Err(EsmError::InvalidValue {
                    owner: s.id.clone(),
                    field: "weight".into(),
                    value: s.weight,
                });
            }
            total += s.weight;
        }
        if (total - self.hours_per_year).abs() > self.hours_tolerance {
            return Err(EsmError::SliceHours {
                total,
                expected: self.hours_per_year,
            });
        }
        for (carrier, values) in &self.demands {
            if !self.has_carrier(carrier) {
                return Err(EsmError::UnknownDemandCarrier(carrier.clone()));
            }
            if values.len() != n {
                return Err(EsmError::ProfileLength {
                    owner: format!("demand:{carrier}"),
                    got: values.len(),
                    expected: n,
                });
            }
            for &d in values {
                nonneg(carrier, "demand", d)?;
            }
        }
        if let Some(cap) = self.emission_cap {
            nonneg("system", "emission_cap", cap)?;
        }
        nonneg("system", "procurement_capacity_factor", self.procurement_capacity_factor)?;

        for t in &self.technologies {
            let unknown = |carrier: &str| EsmError::UnknownCarrier {
                tech: t.id.clone(),
                carrier: carrier.to_string(),
            };
            for carrier in t.outputs.keys().chain(std::iter::once(&t.sector)) {
                if !self.has_carrier(carrier) {
                    return Err(unknown(carrier));
                }
            }
            if !t.outputs.get(&t.sector).is_some_and(|&r| r > 0.0) {
                return Err(EsmError::SectorNotOutput(t.id.clone()));
            }
            for (carrier, &r) in &t.outputs {
                nonneg(&t.id, &format!("outputs.{carrier}"), r)?;
            }
            if let Some(input) = &t.input {
                if !self.has_carrier(&input.carrier) {
                    return Err(unknown(&input.carrier));
                }
                input.cop.check_len(&t.id, n)?;
                for cop in input.cop.values() {
                    if !(cop.is_finite() && cop > 0.0) {
                        return Err(EsmError::InvalidValue {
                            owner: t.id.clone(),
                            field: "input.cop".into(),
                            value: cop,
                        });
                    }
                }
            }
            for (field, v) in [
                ("existing_capacity", t.existing_capacity),
                ("max_investment", t.max_investment),
                ("invest_cost", t.invest_cost),
                ("fom_cost", t.fom_cost),
                ("vom_cost", t.vom_cost),
                ("fuel_cost", t.fuel_cost),
                ("aux_cost", t.aux_cost),
                ("emission_factor", t.emission_factor),
            ] {
                nonneg(&t.id, field, v)?;
            }
            t.availability.check_len(&t.id, n)?;
            for a in t.availability.values() {
                if !(0.0..=1.0).contains(&a) {
                    return Err(EsmError::InvalidValue {
                        owner: t.id.clone(),
                        field: "availability".into(),
                        value: a,
                    });
                }
            }
            if let Some(limit) = t.max_annual_generation {
                nonneg(&t.id, "max_annual_generation", limit)?;
                let envelope = (t.existing_capacity + t.max_investment) * total;
                if !t.procurement && limit > envelope * (1.0 + 1e-9) {
                    return Err(EsmError::PotentialExceedsCapacity {
                        tech: t.id.clone(),
                        limit,
                        envelope,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn has_carrier(&self, id: &str) -> bool {
        self.carriers.iter().any(|c| c.id == id)
    }

    pub fn technology_index(&self, id: &str) -> Option<usize> {
        self.technologies.iter().position(|t| t.id == id)
    }

    pub fn demand(&self, carrier: &str, slice: usize) -> f64 {
        self.demands.get(carrier).map_or(0.0, |d| d[slice])
    }

    pub fn annual_demand(&self, carrier: &str) -> f64 {
        self.demands.get(carrier).map_or(0.0, |d| d.iter().sum())
    }

    pub fn total_demand(&self) -> f64 {
        self.demands.values().flatten().sum()
    }

    /// Highest average power demand over any slice, MW.
    pub fn peak_demand(&self, carrier: &str) -> f64 {
        self.slices
            .iter()
            .enumerate()
            .map(|(t, s)| self.demand(carrier, t) / s.weight)
            .fold(0.0, f64::max)
    }

    /// Capacity available without investment, MW. Procurement capacity is
    /// derived from peak demand.
    pub fn base_capacity(&self, tech: usize) -> f64 {
        let t = &self.technologies[tech];
        if t.procurement {
            self.procurement_capacity_factor * self.peak_demand(&t.sector)
        } else {
            t.existing_capacity
        }
    }

    /// Whether the technology has an investment decision.
    pub fn is_investable(&self, tech: usize) -> bool {
        let t = &self.technologies[tech];
        !t.procurement && t.max_investment > 0.0
    }

    /// Largest annual generation the technology could deliver on its own: full
    /// capacity at availability in every slice, capped by its annual potential.
    pub fn max_feasible_generation(&self, tech: usize) -> f64 {
        let t = &self.technologies[tech];
        let cap = self.base_capacity(tech) + if self.is_investable(tech) { t.max_investment } else { 0.0 };
        let envelope: f64 = self
            .slices
            .iter()
            .enumerate()
            .map(|(s, sl)| t.availability.at(s) * sl.weight * cap)
            .sum();
        t.max_annual_generation.map_or(envelope, |m| envelope.min(m))
    }

    /// Per-carrier share of the primary output that lands in `carrier`.
    pub fn output_ratio(&self, tech: usize, carrier: &str) -> f64 {
        self.technologies[tech].outputs.get(carrier).copied().unwrap_or(0.0)
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn single(cap: f64, demand: f64, vom: f64) -> SystemModel {
        SystemModel {
            name: "single".into(),
            carriers: vec![Carrier { id: "heat".into(), name: None }],
            slices: vec![TimeSlice { id: "t0".into(), weight: 1.0 }],
            demands: BTreeMap::from([("heat".to_string(), vec![demand])]),
            technologies: vec![Technology {
                id: "boiler".into(),
                name: None,
                sector: "heat".into(),
                outputs: BTreeMap::from([("heat".to_string(), 1.0)]),
                input: None,
                existing_capacity: cap,
                max_investment: 0.0,
                max_annual_generation: None,
                invest_cost: 0.0,
                fom_cost: 0.0,
                vom_cost: vom,
                fuel_cost: 0.0,
                aux_cost: 0.0,
                availability: Profile::Constant(1.0),
                emission_factor: 0.0,
                procurement: false,
                note: None,
            }],
            emission_cap: None,
            hours_per_year: 1.0,
            hours_tolerance: 1e-9,
            procurement_capacity_factor: 3.0,
        }
    }

    #[test]
    fn slice_hours_checked() {
        let mut m = single(10.0, 5.0, 2.0);
        m.hours_per_year = 8760.0;
        assert!(matches!(m.validate(), Err(EsmError::SliceHours { .. })));
    }

    #[test]
    fn unknown_carrier_rejected() {
        let mut m = single(10.0, 5.0, 2.0);
        m.technologies[0].input = Some(Input {
            carrier: "hydrogen".into(),
            cop: Profile::Constant(1.0),
        });
        assert!(matches!(m.validate(), Err(EsmError::UnknownCarrier { .. })));
        let mut m = single(10.0, 5.0, 2.0);
        m.demands.insert("cooling".into(), vec![1.0]);
        assert!(matches!(m.validate(), Err(EsmError::UnknownDemandCarrier(_))));
    }

    #[test]
    fn invalid_technology_data_rejected() {
        let mut m = single(10.0, 5.0, 2.0);
        m.technologies[0].availability = Profile::Constant(1.2);
        assert!(m.validate().is_err());
        let mut m = single(10.0, 5.0, 2.0);
        m.technologies[0].vom_cost = -1.0;
        assert!(m.validate().is_err());
        let mut m = single(10.0, 5.0, 2.0);
        m.technologies[0].max_annual_generation = Some(11.0);
        assert!(matches!(m.validate(), Err(EsmError::PotentialExceedsCapacity { .. })));
    }

    #[test]
    fn json_round_trip_with_constant_and_series_profiles() {
        let mut m = single(10.0, 5.0, 2.0);
        m.technologies[0].availability = Profile::PerSlice(vec![0.5]);
        let text = serde_json::to_string(&m).unwrap();
        let back = SystemModel::from_json(&text).unwrap();
        assert_eq!(back, m);
        let minimal = r#"{"carriers":[{"id":"heat"}],"slices":[{"id":"t","weight":8760}],
            "demands":{"heat":[1]},"technologies":[{"id":"b","sector":"heat","outputs":{"heat":1},
            "existing_capacity":1,"availability":0.9}]}"#;
        let m = SystemModel::from_json(minimal).unwrap();
        assert_eq!(m.technologies[0].availability.at(0), 0.9);
        assert_eq!(m.hours_per_year, 8760.0);
    }
}
