use super::aggregate::{kendall_tau_distance, rank, Ranking};
use super::prefs::StakeholderPreferences;
use super::MavtError;
use crate::attributes::AttributeProfile;
use crate::esm::SystemModel;
use crate::mga::Alternative;
use indexmap::IndexMap;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashMap};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum TechClass {
    MustHave,
    RealChoice,
    MustAvoid,
}

impl TechClass {
    fn from_counts(present: usize, of: usize) -> Self {
        if present == of {
            TechClass::MustHave
        } else if present == 0 {
            TechClass::MustAvoid
        } else {
            TechClass::RealChoice
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct GenerationRange {
    pub min: f64,
    pub max: f64,
}

impl GenerationRange {
    fn of(values: impl Iterator<Item = f64>) -> Self {
        let (min, max) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        Self { min, max }
    }

    pub fn span(&self) -> f64 {
        self.max - self.min
    }

    /// Share of `full`'s span that this range no longer covers.
    pub fn reduction_from(&self, full: &GenerationRange) -> f64 {
        if full.span() > 0.0 {
            1.0 - self.span() / full.span()
        } else {
            0.0
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct TechnologyClass {
    pub technology: String,
    pub sector: String,
    /// Annual generation above which the technology counts as present.
    pub presence_limit: f64,
    pub full: TechClass,
    pub value_focused: TechClass,
    pub full_range: GenerationRange,
    /// Range over the union of all stakeholders' top sets.
    pub top_range: GenerationRange,
    pub reduction: f64,
    pub stakeholder_ranges: IndexMap<String, GenerationRange>,
    pub stakeholder_reductions: IndexMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Classification {
    pub top_fraction: f64,
    pub presence_threshold: f64,
    pub alternatives: usize,
    /// Best-ranked alternatives per stakeholder, in rank order.
    pub top_sets: IndexMap<String, Vec<String>>,
    pub technologies: Vec<TechnologyClass>,
}

fn presence_limits(model: &SystemModel, threshold: f64) -> Vec<f64> {
    model
        .technologies
        .iter()
        .map(|t| threshold * model.annual_demand(&t.sector))
        .collect()
}

fn top_sets<'a>(
    alternatives: &'a [Alternative],
    rankings: &[Ranking],
    q: f64,
) -> Result<IndexMap<String, Vec<&'a Alternative>>, MavtError> {
    let by_id: HashMap<&str, &Alternative> = alternatives.iter().map(|a| (a.id.as_str(), a)).collect();
    let mut sets = IndexMap::new();
    for r in rankings {
        if r.entries.len() != alternatives.len() {
            return Err(MavtError::MismatchedAlternatives(r.stakeholder.clone()));
        }
        let top = r
            .top(q)?
            .iter()
            .map(|e| {
                by_id
                    .get(e.alternative.as_str())
                    .copied()
                    .ok_or_else(|| MavtError::UnknownAlternative(e.alternative.clone()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        sets.insert(r.stakeholder.clone(), top);
    }
    Ok(sets)
}

/// Must-have / real-choice / must-avoid classes over all alternatives and
/// over the union of every stakeholder's best `q` share, with generation
/// ranges and their narrowing.
///
/// A technology is present when its annual generation exceeds `threshold`
/// times the annual demand of its sector.
pub fn classify_technologies(
    model: &SystemModel,
    alternatives: &[Alternative],
    rankings: &[Ranking],
    q: f64,
    threshold: f64,
) -> Result<Classification, MavtError> {
    if alternatives.is_empty() {
        return Err(MavtError::NoProfiles);
    }
    if rankings.is_empty() {
        return Err(MavtError::TooFewRankings { needed: 1, got: 0 });
    }
    let sets = top_sets(alternatives, rankings, q)?;
    let mut seen = BTreeSet::new();
    let pooled: Vec<&Alternative> = sets
        .values()
        .flatten()
        .copied()
        .filter(|a| seen.insert(a.id.as_str()))
        .collect();
    let limits = presence_limits(model, threshold);

    let technologies = model
        .technologies
        .iter()
        .zip(&limits)
        .map(|(t, &limit)| {
            let id = t.id.as_str();
            let present = |set: &[&Alternative]| set.iter().filter(|a| a.generation(id) > limit).count();
            let all: Vec<&Alternative> = alternatives.iter().collect();
            let full_range = GenerationRange::of(all.iter().map(|a| a.generation(id)));
            let top_range = GenerationRange::of(pooled.iter().map(|a| a.generation(id)));
            let mut stakeholder_ranges = IndexMap::new();
            let mut stakeholder_reductions = IndexMap::new();
            for (s, set) in &sets {
                let r = GenerationRange::of(set.iter().map(|a| a.generation(id)));
                stakeholder_reductions.insert(s.clone(), r.reduction_from(&full_range));
                stakeholder_ranges.insert(s.clone(), r);
            }
            TechnologyClass {
                technology: t.id.clone(),
                sector: t.sector.clone(),
                presence_limit: limit,
                full: TechClass::from_counts(present(&all), all.len()),
                value_focused: TechClass::from_counts(present(&pooled), pooled.len()),
                full_range,
                top_range,
                reduction: top_range.reduction_from(&full_range),
                stakeholder_ranges,
                stakeholder_reductions,
            }
        })
        .collect();

    Ok(Classification {
        top_fraction: q,
        presence_threshold: threshold,
        alternatives: alternatives.len(),
        top_sets: sets
            .into_iter()
            .map(|(s, v)| (s, v.into_iter().map(|a| a.id.clone()).collect()))
            .collect(),
        technologies,
    })
}

/// Share of each stakeholder's top `q` alternatives in which each technology
/// is present, keyed stakeholder → technology.
pub fn occurrence_frequency(
    model: &SystemModel,
    alternatives: &[Alternative],
    rankings: &[Ranking],
    q: f64,
    threshold: f64,
) -> Result<IndexMap<String, IndexMap<String, f64>>, MavtError> {
    let sets = top_sets(alternatives, rankings, q)?;
    let limits = presence_limits(model, threshold);
    Ok(sets
        .into_iter()
        .map(|(s, set)| {
            let row = model
                .technologies
                .iter()
                .zip(&limits)
                .map(|(t, &limit)| {
                    let n = set.iter().filter(|a| a.generation(&t.id) > limit).count();
                    (t.id.clone(), n as f64 / set.len() as f64)
                })
                .collect();
            (s, row)
        })
        .collect())
}

/// Ranks with ties replaced by the mean of the positions they occupy.
fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut out = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = avg;
        }
        i = j + 1;
    }
    out
}

/// Spearman correlation: Pearson correlation of average ranks. Two constant
/// vectors correlate perfectly; a constant against a varying vector gives 0.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    let (ra, rb) = (average_ranks(a), average_ranks(b));
    let n = ra.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in ra.iter().zip(&rb) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    match (saa > 0.0, sbb > 0.0) {
        (true, true) => sab / (saa * sbb).sqrt(),
        (false, false) => 1.0,
        _ => 0.0,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Merge {
    /// Node ids: stakeholders are `0..n`, the cluster made by merge `k` is `n + k`.
    pub left: usize,
    pub right: usize,
    pub height: f64,
    pub size: usize,
    pub members: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Dendrogram {
    pub stakeholders: Vec<String>,
    /// `1 - ρ` between stakeholders.
    pub distances: Vec<Vec<f64>>,
    pub merges: Vec<Merge>,
    /// Leaf order for plotting.
    pub order: Vec<String>,
}

/// Average-linkage agglomerative clustering of stakeholders on Spearman
/// distance between their rankings. Equal distances merge the pair with the
/// lowest node ids first.
pub fn cluster_stakeholders(rankings: &[Ranking]) -> Result<Dendrogram, MavtError> {
    if rankings.len() < 2 {
        return Err(MavtError::TooFewRankings { needed: 2, got: rankings.len() });
    }
    let mut order: Vec<String> = rankings[0].entries.iter().map(|e| e.alternative.clone()).collect();
    order.sort();
    let ranks = rankings
        .iter()
        .map(|r| {
            if r.entries.len() != order.len() {
                return Err(MavtError::MismatchedAlternatives(r.stakeholder.clone()));
            }
            r.rank_vector(&order)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let n = rankings.len();
    let distances: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 0.0 } else { 1.0 - spearman(&ranks[i], &ranks[j]) }).collect())
        .collect();

    // active clusters as (node id, leaf indices), kept in node-id order
    let mut active: Vec<(usize, Vec<usize>)> = (0..n).map(|i| (i, vec![i])).collect();
    let linkage = |a: &[usize], b: &[usize]| {
        let s: f64 = a.iter().flat_map(|&i| b.iter().map(move |&j| (i, j))).map(|(i, j)| distances[i][j]).sum();
        s / (a.len() * b.len()) as f64
    };
    let mut merges = Vec::with_capacity(n - 1);
    while active.len() > 1 {
        let mut best = (0, 1, f64::INFINITY);
        for i in 0..active.len() {
            for j in i + 1..active.len() {
                let d = linkage(&active[i].1, &active[j].1);
                if d < best.2 {
                    best = (i, j, d);
                }
            }
        }
        let (i, j, height) = best;
        let (right, rl) = active.remove(j);
        let (left, ll) = active.remove(i);
        let leaves: Vec<usize> = ll.into_iter().chain(rl).collect();
        merges.push(Merge {
            left,
            right,
            height,
            size: leaves.len(),
            members: leaves.iter().map(|&k| rankings[k].stakeholder.clone()).collect(),
        });
        active.push((n + merges.len() - 1, leaves));
    }
    let order = active
        .pop()
        .map(|(_, leaves)| leaves.iter().map(|&k| rankings[k].stakeholder.clone()).collect())
        .unwrap_or_default();
    Ok(Dendrogram {
        stakeholders: rankings.iter().map(|r| r.stakeholder.clone()).collect(),
        distances,
        merges,
        order,
    })
}

/// Perturbations applied around a stakeholder's elicited preferences.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Perturbation {
    #[serde(default)]
    pub gammas: Vec<f64>,
    /// Each weight in turn is moved by `±delta` (floored at 0), then all
    /// weights are renormalised.
    #[serde(default)]
    pub weight_delta: Option<f64>,
}

impl Default for Perturbation {
    fn default() -> Self {
        Self {
            gammas: vec![0.0, 0.2, 1.0],
            weight_delta: Some(0.05),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct SensitivityRow {
    pub stakeholder: String,
    pub perturbation: String,
    pub gamma: f64,
    pub kendall_tau: f64,
    pub top_alternative: String,
    pub designated_ranks: IndexMap<String, usize>,
}

/// Ranking stability under γ and weight perturbations. The first row is the
/// unperturbed baseline.
pub fn sensitivity(
    prefs: &StakeholderPreferences,
    profiles: &[AttributeProfile],
    perturbation: &Perturbation,
    designated: &[String],
) -> Result<Vec<SensitivityRow>, MavtError> {
    let baseline = rank(profiles, prefs)?;
    let row = |label: String, p: &StakeholderPreferences, r: &Ranking| -> Result<SensitivityRow, MavtError> {
        let designated_ranks = designated
            .iter()
            .map(|id| {
                r.rank_of(id)
                    .map(|k| (id.clone(), k))
                    .ok_or_else(|| MavtError::UnknownAlternative(id.clone()))
            })
            .collect::<Result<_, _>>()?;
        Ok(SensitivityRow {
            stakeholder: prefs.stakeholder.clone(),
            perturbation: label,
            gamma: p.gamma,
            kendall_tau: kendall_tau_distance(&baseline, r)?,
            top_alternative: r.entries[0].alternative.clone(),
            designated_ranks,
        })
    };
    let mut rows = vec![row("baseline".into(), prefs, &baseline)?];
    for &g in &perturbation.gammas {
        let p = prefs.with_weights(&prefs.weights, g)?;
        rows.push(row(format!("gamma={g}"), &p, &rank(profiles, &p)?)?);
    }
    if let Some(delta) = perturbation.weight_delta {
        for attr in prefs.weights.keys() {
            for (sign, tag) in [(1.0, '+'), (-1.0, '-')] {
                let mut w = prefs.weights.clone();
                let x = &mut w[attr];
                *x = (*x + sign * delta).max(0.0);
                if w.values().all(|&v| v == 0.0) {
                    continue;
                }
                let p = prefs.with_weights(&w, prefs.gamma)?;
                rows.push(row(format!("w:{attr}{tag}{delta}"), &p, &rank(profiles, &p)?)?);
            }
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn average_ranks_share_ties() {
        assert_eq!(average_ranks(&[10.0, 20.0, 20.0, 5.0]), vec![2.0, 3.5, 3.5, 1.0]);
    }

    #[test]
    fn spearman_extremes() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let b = [4.0, 3.0, 2.0, 1.0];
        assert!((spearman(&a, &a) - 1.0).abs() < 1e-15);
        assert!((spearman(&a, &b) + 1.0).abs() < 1e-15);
    }

    fn ranking(name: &str, ranks: &[f64]) -> Ranking {
        // higher value = better, so value = -rank
        Ranking::from_values(name, ranks.iter().enumerate().map(|(i, r)| (format!("x{i}"), -r)).collect())
    }

    #[test]
    fn identical_rankings_merge_at_zero() {
        let d = cluster_stakeholders(&[ranking("a", &[1.0, 2.0, 3.0]), ranking("b", &[1.0, 2.0, 3.0])]).unwrap();
        assert_eq!(d.merges.len(), 1);
        assert_eq!(d.merges[0].height, 0.0);
        let d = cluster_stakeholders(&[ranking("a", &[1.0, 2.0, 3.0]), ranking("b", &[3.0, 2.0, 1.0])]).unwrap();
        assert!((d.merges[0].height - 2.0).abs() < 1e-15);
    }

    #[test]
    fn mismatched_alternatives_rejected() {
        let a = ranking("a", &[1.0, 2.0, 3.0]);
        let b = ranking("b", &[1.0, 2.0]);
        assert!(matches!(cluster_stakeholders(&[a, b]), Err(MavtError::MismatchedAlternatives(_))));
    }

    #[test]
    fn reduction_arithmetic() {
        let full = GenerationRange { min: 0.0, max: 60.0 };
        let top = GenerationRange { min: 10.0, max: 20.0 };
        assert!((top.reduction_from(&full) - 5.0 / 6.0).abs() < 1e-15);
        assert_eq!(full.reduction_from(&full), 0.0);
    }
}
