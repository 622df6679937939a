use super::{EsmError, SystemModel};
use crate::lp::{Constraint, LinearProgram, Objective, Relation, VarId};
use indexmap::IndexMap;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

/// The cost-minimising program of a [`SystemModel`] plus the variable layout
/// needed to build MGA variants and read solutions back.
#[derive(Clone, Debug)]
pub struct CompiledModel {
    pub lp: LinearProgram,
    /// Generation variables, indexed `[technology][slice]`.
    pub generation: Vec<Vec<VarId>>,
    /// Investment variable per technology, `None` when it cannot invest.
    pub investment: Vec<Option<VarId>>,
    /// Linear part of the system cost.
    pub cost_terms: Vec<(VarId, f64)>,
    /// Fixed O&M on capacity that exists regardless of the solution.
    pub cost_constant: f64,
    /// Carrier balance rows as (carrier, slice, row index).
    pub balance_rows: Vec<(String, usize, usize)>,
}

impl CompiledModel {
    pub fn cost(&self, values: &[f64]) -> f64 {
        self.cost_constant + self.cost_terms.iter().map(|&(v, c)| c * values[v.0]).sum::<f64>()
    }

    /// Supply minus consumption minus demand for every balance row.
    pub fn balance_residuals(&self, values: &[f64]) -> Vec<f64> {
        self.balance_rows
            .iter()
            .map(|&(_, _, row)| {
                let c = &self.lp.constraints()[row];
                c.terms.iter().map(|&(v, a)| a * values[v.0]).sum::<f64>() - c.rhs
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct CostBreakdown {
    pub total: f64,
    pub invest: f64,
    pub fixed_om: f64,
    pub variable_om: f64,
    pub fuel: f64,
    pub auxiliary: f64,
}

impl CostBreakdown {
    /// Annual operating expenditure: fixed and variable O&M, fuel and auxiliary.
    pub fn operating(&self) -> f64 {
        self.fixed_om + self.variable_om + self.fuel + self.auxiliary
    }

    pub fn components(&self) -> [(&'static str, f64); 5] {
        [
            ("invest", self.invest),
            ("fixed_om", self.fixed_om),
            ("variable_om", self.variable_om),
            ("fuel", self.fuel),
            ("auxiliary", self.auxiliary),
        ]
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct TechnologyFigures {
    /// Annual generation of the primary output, MWh.
    pub generation: f64,
    /// Newly invested capacity, MW.
    pub invested: f64,
    /// Existing plus invested capacity, MW. For procurement this is the peak
    /// power drawn.
    pub capacity: f64,
    /// Smallest capacity that would still carry the realised generation profile, MW.
    pub required_capacity: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Decomposition {
    pub costs: CostBreakdown,
    pub technologies: IndexMap<String, TechnologyFigures>,
}

/// Builds the cost-minimising program.
///
/// Constraints: one balance per (carrier, slice) with demand on the right-hand
/// side; generation within availability times capacity per slice; annual
/// generation within the technology's potential; emissions within the cap.
/// Investment is bounded by `max_investment`. Technologies without an investment
/// decision get their capacity limit as a plain variable bound.
pub fn compile(model: &SystemModel) -> Result<CompiledModel, EsmError> {
    model.validate()?;
    check_supply(model)?;
    let slices = &model.slices;
    let mut lp = LinearProgram::new();

    let mut generation = Vec::with_capacity(model.technologies.len());
    let mut investment = Vec::with_capacity(model.technologies.len());
    for (i, t) in model.technologies.iter().enumerate() {
        let base = model.base_capacity(i);
        let cap = base + if model.is_investable(i) { t.max_investment } else { 0.0 };
        let gens = slices
            .iter()
            .enumerate()
            .map(|(s, sl)| {
                let upper = t.availability.at(s) * sl.weight * cap;
                lp.add_variable(format!("gen:{}:{}", t.id, sl.id), 0.0, upper)
            })
            .collect::<Result<Vec<_>, _>>()?;
        generation.push(gens);
        investment.push(if model.is_investable(i) {
            Some(lp.add_variable(format!("inv:{}", t.id), 0.0, t.max_investment)?)
        } else {
            None
        });
    }

    let mut balance_rows = Vec::new();
    for carrier in &model.carriers {
        for (s, sl) in slices.iter().enumerate() {
            let mut terms = Vec::new();
            for (i, t) in model.technologies.iter().enumerate() {
                let mut coef = t.outputs.get(&carrier.id).copied().unwrap_or(0.0);
                if let Some(input) = t.input.as_ref().filter(|inp| inp.carrier == carrier.id) {
                    coef -= 1.0 / input.cop.at(s);
                }
                if coef != 0.0 {
                    terms.push((generation[i][s], coef));
                }
            }
            let demand = model.demand(&carrier.id, s);
            if terms.is_empty() && demand == 0.0 {
                continue;
            }
            balance_rows.push((carrier.id.clone(), s, lp.num_constraints()));
            lp.push_constraint(Constraint::new(
                format!("balance:{}:{}", carrier.id, sl.id),
                terms,
                Relation::Eq,
                demand,
            ))?;
        }
    }

    for (i, t) in model.technologies.iter().enumerate() {
        let Some(inv) = investment[i] else { continue };
        let base = model.base_capacity(i);
        for (s, sl) in slices.iter().enumerate() {
            let a = t.availability.at(s) * sl.weight;
            lp.push_constraint(Constraint::new(
                format!("capacity:{}:{}", t.id, sl.id),
                vec![(generation[i][s], 1.0), (inv, -a)],
                Relation::Le,
                a * base,
            ))?;
        }
    }

    for (i, t) in model.technologies.iter().enumerate() {
        if let Some(limit) = t.max_annual_generation {
            let terms = generation[i].iter().map(|&v| (v, 1.0)).collect();
            lp.push_constraint(Constraint::new(
                format!("potential:{}", t.id),
                terms,
                Relation::Le,
                limit,
            ))?;
        }
    }

    if let Some(cap) = model.emission_cap {
        let terms: Vec<(VarId, f64)> = model
            .technologies
            .iter()
            .enumerate()
            .filter(|(_, t)| t.emission_factor > 0.0)
            .flat_map(|(i, t)| generation[i].iter().map(move |&v| (v, t.emission_factor)))
            .collect();
        if !terms.is_empty() {
            lp.push_constraint(Constraint::new("emissions", terms, Relation::Le, cap))?;
        }
    }

    let mut cost_terms = Vec::new();
    let mut cost_constant = 0.0;
    for (i, t) in model.technologies.iter().enumerate() {
        let per_mwh = t.vom_cost + t.fuel_cost + t.aux_cost;
        if per_mwh != 0.0 {
            cost_terms.extend(generation[i].iter().map(|&v| (v, per_mwh)));
        }
        if let Some(inv) = investment[i] {
            let per_mw = t.invest_cost + t.fom_cost;
            if per_mw != 0.0 {
                cost_terms.push((inv, per_mw));
            }
        }
        cost_constant += t.fom_cost * model.base_capacity(i);
    }
    lp.set_objective(Objective {
        terms: cost_terms.clone(),
        offset: cost_constant,
    })?;

    Ok(CompiledModel {
        lp,
        generation,
        investment,
        cost_terms,
        cost_constant,
        balance_rows,
    })
}

/// Rejects models where some carrier cannot be supplied in some slice even with
/// every producer at full capacity (consumption by converters is ignored, so this
/// catches only hopeless cases).
fn check_supply(model: &SystemModel) -> Result<(), EsmError> {
    for carrier in &model.carriers {
        for (s, sl) in model.slices.iter().enumerate() {
            let demand = model.demand(&carrier.id, s);
            if demand == 0.0 {
                continue;
            }
            let supply: f64 = model
                .technologies
                .iter()
                .enumerate()
                .map(|(i, t)| {
                    let cap = model.base_capacity(i) + if model.is_investable(i) { t.max_investment } else { 0.0 };
                    let slice_max = t.availability.at(s) * sl.weight * cap;
                    let slice_max = t.max_annual_generation.map_or(slice_max, |m| slice_max.min(m));
                    model.output_ratio(i, &carrier.id) * slice_max
                })
                .sum();
            if supply < demand * (1.0 - 1e-12) {
                return Err(EsmError::InfeasibleByConstruction {
                    carrier: carrier.id.clone(),
                    slice: sl.id.clone(),
                    demand,
                    supply,
                });
            }
        }
    }
    Ok(())
}

/// Splits a solution of `compiled` (or of any program built on the same
/// variables) into cost components and per-technology figures.
pub fn decompose(
    model: &SystemModel,
    compiled: &CompiledModel,
    values: &[f64],
) -> Result<Decomposition, EsmError> {
    let expected = compiled.lp.num_variables();
    if values.len() != expected {
        return Err(EsmError::DimensionMismatch {
            expected,
            got: values.len(),
        });
    }
    let mut costs = CostBreakdown::default();
    let mut technologies = IndexMap::new();
    for (i, t) in model.technologies.iter().enumerate() {
        let gen: f64 = compiled.generation[i].iter().map(|v| values[v.0]).sum();
        let invested = compiled.investment[i].map_or(0.0, |v| values[v.0]);
        let capacity = model.base_capacity(i) + invested;
        costs.invest += t.invest_cost * invested;
        costs.fixed_om += t.fom_cost * capacity;
        costs.variable_om += t.vom_cost * gen;
        costs.fuel += t.fuel_cost * gen;
        costs.auxiliary += t.aux_cost * gen;
        let required_capacity = model
            .slices
            .iter()
            .enumerate()
            .map(|(s, sl)| {
                let a = t.availability.at(s) * sl.weight;
                let g = values[compiled.generation[i][s].0];
                if a > 0.0 { g / a } else { 0.0 }
            })
            .fold(0.0, f64::max);
        // procurement has no real capacity decision; report the power it drew
        let capacity = if t.procurement { required_capacity } else { capacity };
        technologies.insert(
            t.id.clone(),
            TechnologyFigures {
                generation: gen,
                invested,
                capacity,
                required_capacity,
            },
        );
    }
    costs.total = costs.invest + costs.operating();
    Ok(Decomposition {
        costs,
        technologies,
    })
}
