use super::{Dimension, MgaConfig, MgaError, MgaGroup, Scheme, WeightVector};
use crate::esm::{compile, decompose, CompiledModel, CostBreakdown, Decomposition, SystemModel, TechnologyFigures};
use crate::lp::{solve_with, Basis, Constraint, LinearProgram, LpSolution, LpStatus, Objective, Relation, SolverOptions, VarId};
use indexmap::IndexMap;
use rayon::prelude::*;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fmt::Write as _;

/// Cost-optimal solve of a system model, the anchor for every MGA run.
#[derive(Clone, Debug)]
pub struct CostOptimum {
    pub compiled: CompiledModel,
    pub solution: LpSolution,
    pub f_star: f64,
    pub decomposition: Decomposition,
}

impl CostOptimum {
    pub fn solve(model: &SystemModel) -> Result<Self, MgaError> {
        let compiled = compile(model)?;
        let solution = solve_with(&compiled.lp, &SolverOptions::default(), None)?;
        if solution.status != LpStatus::Optimal {
            return Err(MgaError::NotOptimal(solution.status));
        }
        let decomposition = decompose(model, &compiled, &solution.values)?;
        Ok(Self {
            f_star: compiled.cost(&solution.values),
            compiled,
            solution,
            decomposition,
        })
    }
}

#[derive(Clone, Debug)]
pub struct NearOptimal {
    pub solution: LpSolution,
    /// Realised cost including the constant part.
    pub cost: f64,
    /// Value of the weighted group sum alone, without the cost term.
    pub mga_objective: f64,
}

/// Minimises `objective + rho * cost / f_star` subject to the rows of `lp` and
/// `cost <= (1 + eps) * f_star`. The cost row is divided by `f_star` so its
/// tolerance is relative to the optimum. `warm` may be an optimal basis of `lp`.
#[allow(clippy::too_many_arguments)]
pub fn solve_near_optimal(
    lp: &LinearProgram,
    cost_terms: &[(VarId, f64)],
    cost_constant: f64,
    f_star: f64,
    objective: &[(VarId, f64)],
    eps: f64,
    rho: f64,
    warm: Option<&Basis>,
) -> Result<NearOptimal, MgaError> {
    if eps.is_nan() || eps < 0.0 {
        return Err(MgaError::NegativeSlack(eps));
    }
    if !(f_star > 0.0) {
        return Err(MgaError::NonPositiveOptimum(f_star));
    }
    let row: Vec<(VarId, f64)> = cost_terms.iter().map(|&(v, c)| (v, c / f_star)).collect();
    let rhs = 1.0 + eps - cost_constant / f_star;
    let lp = lp.add_constraint(Constraint::new("mga:slack", row.clone(), Relation::Le, rhs))?;
    let mut terms = objective.to_vec();
    terms.extend(row.iter().map(|&(v, c)| (v, rho * c)));
    let lp = lp.with_objective(Objective {
        terms,
        offset: rho * cost_constant / f_star,
    })?;
    let solution = solve_with(&lp, &SolverOptions::default(), warm)?;
    if solution.status != LpStatus::Optimal {
        return Err(MgaError::NotOptimal(solution.status));
    }
    let cost = cost_constant + cost_terms.iter().map(|&(v, c)| c * solution.values[v.0]).sum::<f64>();
    let mga_objective = objective.iter().map(|&(v, w)| w * solution.values[v.0]).sum();
    Ok(NearOptimal {
        solution,
        cost,
        mga_objective,
    })
}

/// Decision variables of a group with weight `w`: every generation variable of
/// its members, or their investment variables for capacity groups.
pub fn group_terms(model: &SystemModel, compiled: &CompiledModel, group: &MgaGroup, w: f64) -> Vec<(VarId, f64)> {
    let mut terms = Vec::new();
    for id in &group.members {
        let Some(i) = model.technology_index(id) else { continue };
        match group.dimension {
            Dimension::Generation => terms.extend(compiled.generation[i].iter().map(|&v| (v, w))),
            Dimension::Capacity => terms.extend(compiled.investment[i].map(|v| (v, w))),
        }
    }
    terms
}

fn vector_terms(
    model: &SystemModel,
    compiled: &CompiledModel,
    groups: &[MgaGroup],
    vector: &WeightVector,
) -> Result<Vec<(VarId, f64)>, MgaError> {
    let mut terms = Vec::new();
    for (gid, w) in &vector.weights {
        let g = groups
            .iter()
            .find(|g| &g.id == gid)
            .ok_or_else(|| MgaError::UnknownGroup(gid.clone()))?;
        terms.extend(group_terms(model, compiled, g, *w));
    }
    Ok(terms)
}

/// One MGA run on the system model, warm-started from the cost optimum.
pub fn mga_solve(
    model: &SystemModel,
    optimum: &CostOptimum,
    groups: &[MgaGroup],
    vector: &WeightVector,
    eps: f64,
    rho: f64,
) -> Result<(NearOptimal, Decomposition), MgaError> {
    let c = &optimum.compiled;
    let objective = vector_terms(model, c, groups, vector)?;
    let near = solve_near_optimal(
        &c.lp,
        &c.cost_terms,
        c.cost_constant,
        optimum.f_star,
        &objective,
        eps,
        rho,
        optimum.solution.basis.as_ref(),
    )?;
    let d = decompose(model, c, &near.solution.values)?;
    Ok((near, d))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Provenance {
    /// Index of the run in the sweep; absent for the cost optimum.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run: Option<usize>,
    /// Weight vector id; absent for the cost optimum.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vector: Option<String>,
    pub groups: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<Scheme>,
    pub slack: f64,
    pub direction: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Alternative {
    pub id: String,
    pub provenance: Vec<Provenance>,
    pub costs: CostBreakdown,
    /// Realised cost relative to the optimum, minus one.
    pub slack_used: f64,
    /// Some technology holds more than the configured multiple of the capacity
    /// its generation needs.
    pub capacity_artefact: bool,
    pub technologies: IndexMap<String, TechnologyFigures>,
}

impl Alternative {
    pub fn generation(&self, tech: &str) -> f64 {
        self.technologies.get(tech).map_or(0.0, |f| f.generation)
    }

    /// Smallest slack among the runs that produced this alternative.
    pub fn min_slack(&self) -> f64 {
        self.provenance.iter().map(|p| p.slack).fold(f64::INFINITY, f64::min)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunStatus {
    Solved {
        alternative: String,
        cost: f64,
        mga_objective: f64,
        iterations: usize,
    },
    Failed {
        error: String,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct RunRecord {
    pub run: usize,
    pub vector: String,
    pub scheme: Scheme,
    pub direction: String,
    pub slack: f64,
    #[serde(flatten)]
    pub status: RunStatus,
    /// Realised total of each group in the vector, for diagnosing how the
    /// composition shifted.
    pub group_totals: IndexMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct GenerationReport {
    pub f_star: f64,
    /// MGA runs attempted, excluding the cost optimum.
    pub raw_runs: usize,
    pub failed_runs: usize,
    /// Alternatives after deduplication, cost optimum first.
    pub alternatives: Vec<Alternative>,
    pub runs: Vec<RunRecord>,
}

fn snap(v: f64) -> f64 {
    if v.abs() < 1e-9 {
        0.0
    } else {
        v
    }
}

fn snapped(d: &Decomposition) -> IndexMap<String, TechnologyFigures> {
    d.technologies
        .iter()
        .map(|(k, f)| {
            (
                k.clone(),
                TechnologyFigures {
                    generation: snap(f.generation),
                    invested: snap(f.invested),
                    capacity: snap(f.capacity),
                    required_capacity: snap(f.required_capacity),
                },
            )
        })
        .collect()
}

/// Generation and capacity rounded to six significant digits.
fn dedup_key(techs: &IndexMap<String, TechnologyFigures>) -> String {
    let mut key = String::new();
    for f in techs.values() {
        let _ = write!(key, "{:.5e}|{:.5e};", f.generation, f.capacity);
    }
    key
}

fn artefact(techs: &IndexMap<String, TechnologyFigures>, factor: f64) -> bool {
    techs
        .values()
        .any(|f| f.invested > 1e-9 && f.capacity > factor * f.required_capacity + 1e-9)
}

/// Solves every (weight vector, slack) pair, prepends the cost optimum and
/// merges identical alternatives. Failed runs are recorded, not fatal.
///
/// Runs are ordered vector-major, slack-minor; alternative ids follow that order
/// after the optimum (`A000`), so parallel and serial sweeps agree.
pub fn generate_all(
    model: &SystemModel,
    optimum: &CostOptimum,
    groups: &[MgaGroup],
    vectors: &[WeightVector],
    config: &MgaConfig,
) -> Result<GenerationReport, MgaError> {
    if config.slacks.is_empty() {
        return Err(MgaError::NoSlacks);
    }
    if let Some(&bad) = config.slacks.iter().find(|s| !(**s >= 0.0)) {
        return Err(MgaError::NegativeSlack(bad));
    }
    let keys: Vec<(usize, f64)> = (0..vectors.len())
        .flat_map(|v| config.slacks.iter().map(move |&s| (v, s)))
        .collect();
    let run = |&(v, s): &(usize, f64)| mga_solve(model, optimum, groups, &vectors[v], s, config.rho);
    let results: Vec<_> = if config.parallel {
        keys.par_iter().map(run).collect()
    } else {
        keys.iter().map(run).collect()
    };

    let f_star = optimum.f_star;
    let base = snapped(&optimum.decomposition);
    let mut alternatives = vec![Alternative {
        id: "A000".into(),
        provenance: vec![Provenance {
            run: None,
            vector: None,
            groups: Vec::new(),
            scheme: None,
            slack: 0.0,
            direction: "cost_optimum".into(),
        }],
        costs: optimum.decomposition.costs,
        slack_used: optimum.decomposition.costs.total / f_star - 1.0,
        capacity_artefact: artefact(&base, config.capacity_artefact_factor),
        technologies: base,
    }];
    let mut index: HashMap<String, usize> = HashMap::from([(dedup_key(&alternatives[0].technologies), 0)]);
    let mut runs = Vec::with_capacity(keys.len());
    let mut failed_runs = 0;

    for (run, (&(v, slack), result)) in keys.iter().zip(results).enumerate() {
        let vector = &vectors[v];
        let mut record = RunRecord {
            run,
            vector: vector.id.clone(),
            scheme: vector.scheme,
            direction: vector.direction.clone(),
            slack,
            status: RunStatus::Failed { error: String::new() },
            group_totals: IndexMap::new(),
        };
        match result {
            Err(e) => {
                failed_runs += 1;
                record.status = RunStatus::Failed { error: e.to_string() };
            }
            Ok((near, d)) => {
                for (gid, _) in &vector.weights {
                    if let Some(g) = groups.iter().find(|g| &g.id == gid) {
                        let total = group_terms(model, &optimum.compiled, g, 1.0)
                            .iter()
                            .map(|&(var, _)| near.solution.values[var.0])
                            .sum();
                        record.group_totals.insert(gid.clone(), total);
                    }
                }
                let provenance = Provenance {
                    run: Some(run),
                    vector: Some(vector.id.clone()),
                    groups: vector.weights.iter().map(|(g, _)| g.clone()).collect(),
                    scheme: Some(vector.scheme),
                    slack,
                    direction: vector.direction.clone(),
                };
                let techs = snapped(&d);
                let key = dedup_key(&techs);
                let slot = match index.get(&key) {
                    Some(&k) => {
                        alternatives[k].provenance.push(provenance);
                        k
                    }
                    None => {
                        let id = format!("A{:03}", alternatives.len());
                        alternatives.push(Alternative {
                            id,
                            provenance: vec![provenance],
                            costs: d.costs,
                            slack_used: d.costs.total / f_star - 1.0,
                            capacity_artefact: artefact(&techs, config.capacity_artefact_factor),
                            technologies: techs,
                        });
                        index.insert(key, alternatives.len() - 1);
                        alternatives.len() - 1
                    }
                };
                record.status = RunStatus::Solved {
                    alternative: alternatives[slot].id.clone(),
                    cost: near.cost,
                    mga_objective: near.mga_objective,
                    iterations: near.solution.iterations,
                };
            }
        }
        runs.push(record);
    }

    Ok(GenerationReport {
        f_star,
        raw_runs: keys.len(),
        failed_runs,
        alternatives,
        runs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> (LinearProgram, VarId, VarId) {
        let mut lp = LinearProgram::new();
        let x1 = lp.add_variable("x1", 0.0, 1.0).unwrap();
        let x2 = lp.add_variable("x2", 0.0, 1.0).unwrap();
        lp.push_constraint(Constraint::new("cover", vec![(x1, 1.0), (x2, 1.0)], Relation::Ge, 1.0))
            .unwrap();
        (lp, x1, x2)
    }

    #[test]
    fn augmentation_removes_slack_filling() {
        let (lp, x1, x2) = toy();
        let cost = [(x1, 1.0), (x2, 1.0)];
        let r = solve_near_optimal(&lp, &cost, 0.0, 1.0, &[(x1, -1.0)], 0.5, 1e-4, None).unwrap();
        assert_eq!(r.solution.value(x1), 1.0);
        assert_eq!(r.solution.value(x2), 0.0);
        assert_eq!(r.cost, 1.0);
        assert_eq!(r.mga_objective, -1.0);
    }

    #[test]
    fn zero_slack_returns_the_optimum_cost() {
        let (lp, x1, x2) = toy();
        let cost = [(x1, 1.0), (x2, 1.0)];
        let r = solve_near_optimal(&lp, &cost, 0.0, 1.0, &[(x2, -1.0)], 0.0, 1e-4, None).unwrap();
        assert!((r.cost - 1.0).abs() <= 1e-12);
        assert_eq!(r.solution.value(x2), 1.0);
    }

    #[test]
    fn negative_slack_rejected() {
        let (lp, x1, _) = toy();
        let err = solve_near_optimal(&lp, &[(x1, 1.0)], 0.0, 1.0, &[], -0.1, 1e-4, None).unwrap_err();
        assert!(matches!(err, MgaError::NegativeSlack(_)));
    }
}
