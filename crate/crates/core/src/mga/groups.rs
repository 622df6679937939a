use super::{Dimension, GroupKind, MgaConfig, MgaError, MgaGroup, Strategy};
use crate::attributes::{AttributeCatalog, Basis};
use crate::esm::SystemModel;

/// One technology-benchmark group per technology, on the generation dimension.
pub fn benchmark_groups(model: &SystemModel) -> Vec<MgaGroup> {
    model
        .technologies
        .iter()
        .map(|t| MgaGroup {
            id: format!("{}:{}", Strategy::Benchmark.tag(), t.id),
            kind: GroupKind::Benchmark,
            attribute: None,
            dimension: Dimension::Generation,
            members: vec![t.id.clone()],
            strategy: Strategy::Benchmark,
        })
        .collect()
}

/// Driver and avoider groups for every decomposable attribute.
///
/// Candidates are ordered by specific contribution (descending for drivers,
/// ascending for avoiders). Technologies whose contributions lie within the tie
/// tolerance of a class leader enter together. An avoider is omitted when fewer
/// than `min_contributors_for_avoider` candidates contribute at all.
pub fn construct_groups(
    catalog: &AttributeCatalog,
    model: &SystemModel,
    strategy: Strategy,
    config: &MgaConfig,
) -> Result<Vec<MgaGroup>, MgaError> {
    if strategy == Strategy::Benchmark {
        return Ok(benchmark_groups(model));
    }
    let potential: Vec<f64> = (0..model.technologies.len())
        .map(|i| model.max_feasible_generation(i))
        .collect();
    let mut groups = Vec::new();
    for attr in catalog.attributes.iter().filter(|a| a.decomposable) {
        let contrib = catalog.contributions(attr, model)?;
        let dimension = match attr.basis {
            Basis::Capacity => Dimension::Capacity,
            _ => Dimension::Generation,
        };
        let candidates: Vec<usize> = (0..model.technologies.len())
            .filter(|&i| match dimension {
                Dimension::Capacity => model.is_investable(i),
                Dimension::Generation => potential[i] > 0.0,
            })
            .collect();
        let contributors = candidates.iter().filter(|&&i| contrib[i] != 0.0).count();
        let ctx = Selection {
            model,
            config,
            contrib: &contrib,
            potential: &potential,
        };
        for kind in [GroupKind::Driver, GroupKind::Avoider] {
            if kind == GroupKind::Avoider && contributors < config.min_contributors_for_avoider {
                continue;
            }
            let mut ordered: Vec<usize> = candidates
                .iter()
                .copied()
                .filter(|&i| kind == GroupKind::Avoider || contrib[i] > 0.0)
                .collect();
            // stable sort keeps model order among equal contributions
            match kind {
                GroupKind::Driver => ordered.sort_by(|&a, &b| contrib[b].total_cmp(&contrib[a])),
                _ => ordered.sort_by(|&a, &b| contrib[a].total_cmp(&contrib[b])),
            }
            let members = match strategy {
                Strategy::ContributionBased => ctx.contribution_based(&ordered),
                _ => ctx.domain_balanced(&ordered),
            };
            if members.is_empty() {
                continue;
            }
            let mut members = members;
            members.sort_unstable();
            groups.push(MgaGroup {
                id: format!("{}:{}:{}", strategy.tag(), attr.id, kind.tag()),
                kind,
                attribute: Some(attr.id.clone()),
                dimension,
                members: members.iter().map(|&i| model.technologies[i].id.clone()).collect(),
                strategy,
            });
        }
    }
    Ok(groups)
}

struct Selection<'a> {
    model: &'a SystemModel,
    config: &'a MgaConfig,
    contrib: &'a [f64],
    potential: &'a [f64],
}

impl Selection<'_> {
    fn tied(&self, a: usize, b: usize) -> bool {
        let (x, y) = (self.contrib[a], self.contrib[b]);
        (x - y).abs() <= self.config.tie_tolerance * x.abs().max(y.abs())
    }

    /// Splits an ordered candidate list into tie classes.
    fn classes(&self, ordered: &[usize]) -> Vec<Vec<usize>> {
        let mut out: Vec<Vec<usize>> = Vec::new();
        for &i in ordered {
            match out.last_mut() {
                Some(class) if self.tied(class[0], i) => class.push(i),
                _ => out.push(vec![i]),
            }
        }
        out
    }

    fn coverage(&self, members: &[usize]) -> f64 {
        members.iter().map(|&i| self.potential[i]).sum()
    }

    /// Top two, then further classes until members can jointly cover the
    /// relevance share of total demand.
    fn contribution_based(&self, ordered: &[usize]) -> Vec<usize> {
        let target = self.config.relevance_threshold * self.model.total_demand();
        let mut members = Vec::new();
        for class in self.classes(ordered) {
            if members.len() >= 2 && self.coverage(&members) >= target {
                break;
            }
            members.extend(class);
        }
        members
    }

    /// At least one option per sector, extended within threshold sectors until
    /// they can cover the sectoral share, then across sectors until the overall
    /// relevance threshold is met.
    fn domain_balanced(&self, ordered: &[usize]) -> Vec<usize> {
        let mut members: Vec<usize> = Vec::new();
        for carrier in &self.model.carriers {
            let in_sector: Vec<usize> = ordered
                .iter()
                .copied()
                .filter(|&i| self.model.technologies[i].sector == carrier.id)
                .collect();
            let target = if self.config.domain_threshold_sectors.contains(&carrier.id) {
                self.config.domain_threshold * self.model.annual_demand(&carrier.id)
            } else {
                0.0
            };
            let mut picked: Vec<usize> = Vec::new();
            for class in self.classes(&in_sector) {
                if !picked.is_empty() && self.coverage(&picked) >= target {
                    break;
                }
                picked.extend(class);
            }
            members.extend(picked);
        }
        let target = self.config.relevance_threshold * self.model.total_demand();
        let rest: Vec<usize> = ordered.iter().copied().filter(|i| !members.contains(i)).collect();
        for class in self.classes(&rest) {
            if self.coverage(&members) >= target {
                break;
            }
            members.extend(class);
        }
        members
    }
}
