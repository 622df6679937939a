//! Interview state machine: SWING rank order and ratings, bisection of
//! value functions for the lead attribute of each objective, then two
//! compensation probes that set the aggregation curvature.

use crate::attributes::{AttributeCatalog, ImpactRange};
use crate::mavt::{fit_savf, Midpoint, MidpointInput, StakeholderInput, StakeholderPreferences, ValueFunction};
use indexmap::IndexMap;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const DEFAULT_BISECTION_DEPTH: usize = 3;

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("expected a `{expected}` answer")]
    WrongAnswer { expected: &'static str },
    #[error("{0}")]
    Invalid(String),
    #[error("session is complete")]
    Complete,
    #[error("bisection depth must be between 1 and 7, got {0}")]
    Depth(usize),
    #[error(transparent)]
    Mavt(#[from] crate::mavt::MavtError),
    #[error("{path}: {message}")]
    Storage { path: PathBuf, message: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    SwingRanking,
    SwingRating,
    SavfBisection,
    CompensationCheck,
    Complete,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct AttributeInfo {
    pub id: String,
    pub name: String,
    pub unit: String,
    pub objective: String,
    pub worst: f64,
    pub best: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Interval {
    pub lower_state: f64,
    pub lower_value: f64,
    pub upper_state: f64,
    pub upper_value: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum CompensationResponse {
    /// The two hypothetical alternatives are equally good.
    Accept,
    /// The balanced alternative is better.
    Reject,
    /// The unbalanced alternative is unacceptable at any level.
    StronglyReject,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Question {
    /// Order all attributes by how much moving from worst to best matters.
    RankOrder { attributes: Vec<AttributeInfo> },
    /// Rate each attribute's swing; the first in `order` is fixed at 100.
    Ratings { order: Vec<String>, reference: String },
    /// Which state is worth `target_value`, between the two reference states?
    Bisection {
        attribute: String,
        step: usize,
        of: usize,
        interval: Interval,
        target_value: f64,
    },
    /// Is option A (best on `first`, worst on `second`) as good as option B
    /// (both at value `level`)? States are given for each option.
    Compensation {
        probe: usize,
        of: usize,
        first: String,
        second: String,
        level: f64,
        option_a: IndexMap<String, f64>,
        option_b: IndexMap<String, f64>,
    },
    Complete,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Answer {
    RankOrder { order: Vec<String> },
    Ratings { ratings: IndexMap<String, f64> },
    Bisection { state: f64 },
    Compensation { response: CompensationResponse },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct SessionResult {
    /// Raw answers in the `preferences.json` input format.
    pub input: StakeholderInput,
    pub preferences: StakeholderPreferences,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct ElicitationSession {
    pub id: String,
    pub stakeholder: String,
    pub phase: Phase,
    pub bisection_depth: usize,
    pub attributes: Vec<AttributeInfo>,
    pub rank_order: Vec<String>,
    pub ratings: IndexMap<String, f64>,
    /// Attributes whose value function is elicited, in interview order.
    pub designated: Vec<String>,
    pub current: usize,
    pub pending: VecDeque<Interval>,
    pub midpoints: IndexMap<String, Vec<Midpoint>>,
    pub probes: Vec<(String, String)>,
    pub responses: Vec<CompensationResponse>,
    pub result: Option<SessionResult>,
}

/// γ from the compensation probes: accepted throughout → additive, strongly
/// rejected throughout → geometric, anything else → low compensation.
pub fn gamma_from_responses(responses: &[CompensationResponse]) -> f64 {
    use CompensationResponse::*;
    if !responses.is_empty() && responses.iter().all(|r| *r == Accept) {
        1.0
    } else if !responses.is_empty() && responses.iter().all(|r| *r == StronglyReject) {
        0.0
    } else {
        crate::mavt::DEFAULT_GAMMA
    }
}

fn invalid(msg: impl Into<String>) -> SessionError {
    SessionError::Invalid(msg.into())
}

/// State at which `vf` reaches `v`, by bisection on the normalised scale.
fn state_for_value(vf: &ValueFunction, v: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if vf.value(vf.worst + mid * (vf.best - vf.worst)) < v {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    vf.worst + 0.5 * (lo + hi) * (vf.best - vf.worst)
}

impl ElicitationSession {
    pub fn new(
        id: &str,
        stakeholder: &str,
        catalog: &AttributeCatalog,
        ranges: &IndexMap<String, ImpactRange>,
        bisection_depth: usize,
    ) -> Result<Self, SessionError> {
        if !(1..=7).contains(&bisection_depth) {
            return Err(SessionError::Depth(bisection_depth));
        }
        let attributes = catalog
            .attributes
            .iter()
            .map(|a| {
                let r = ranges
                    .get(&a.id)
                    .ok_or_else(|| invalid(format!("no impact range for `{}`", a.id)))?;
                Ok(AttributeInfo {
                    id: a.id.clone(),
                    name: a.name.clone(),
                    unit: a.unit.clone(),
                    objective: a.objective.clone(),
                    worst: r.worst,
                    best: r.best,
                })
            })
            .collect::<Result<_, SessionError>>()?;
        Ok(Self {
            id: id.into(),
            stakeholder: stakeholder.into(),
            phase: Phase::SwingRanking,
            bisection_depth,
            attributes,
            rank_order: Vec::new(),
            ratings: IndexMap::new(),
            designated: Vec::new(),
            current: 0,
            pending: VecDeque::new(),
            midpoints: IndexMap::new(),
            probes: Vec::new(),
            responses: Vec::new(),
            result: None,
        })
    }

    fn info(&self, id: &str) -> &AttributeInfo {
        self.attributes.iter().find(|a| a.id == id).expect("validated attribute id")
    }

    fn value_function(&self, id: &str) -> Result<ValueFunction, SessionError> {
        let a = self.info(id);
        if a.worst == a.best {
            return Ok(ValueFunction::linear(a.worst, a.best));
        }
        let pts = self.midpoints.get(id).map(Vec::as_slice).unwrap_or(&[]);
        Ok(fit_savf(a.worst, a.best, pts)?)
    }

    pub fn question(&self) -> Result<Question, SessionError> {
        Ok(match self.phase {
            Phase::SwingRanking => Question::RankOrder {
                attributes: self.attributes.clone(),
            },
            Phase::SwingRating => Question::Ratings {
                order: self.rank_order.clone(),
                reference: self.rank_order[0].clone(),
            },
            Phase::SavfBisection => {
                let attribute = self.designated[self.current].clone();
                let interval = self.pending[0];
                Question::Bisection {
                    step: self.midpoints.get(&attribute).map_or(0, Vec::len) + 1,
                    of: self.bisection_depth,
                    target_value: 0.5 * (interval.lower_value + interval.upper_value),
                    attribute,
                    interval,
                }
            }
            Phase::CompensationCheck => {
                let k = self.responses.len();
                let (first, second) = self.probes[k].clone();
                let (wf, ws) = (self.ratings[&first], self.ratings[&second]);
                // the level at which an additive model is indifferent
                let level = wf / (wf + ws);
                let (vf, vs) = (self.value_function(&first)?, self.value_function(&second)?);
                let option_a = IndexMap::from([(first.clone(), vf.best), (second.clone(), vs.worst)]);
                let option_b = IndexMap::from([
                    (first.clone(), state_for_value(&vf, level)),
                    (second.clone(), state_for_value(&vs, level)),
                ]);
                Question::Compensation {
                    probe: k + 1,
                    of: self.probes.len(),
                    first,
                    second,
                    level,
                    option_a,
                    option_b,
                }
            }
            Phase::Complete => Question::Complete,
        })
    }

    pub fn submit(
        &mut self,
        answer: Answer,
        catalog: &AttributeCatalog,
        ranges: &IndexMap<String, ImpactRange>,
    ) -> Result<Question, SessionError> {
        match (self.phase, answer) {
            (Phase::Complete, _) => return Err(SessionError::Complete),
            (Phase::SwingRanking, Answer::RankOrder { order }) => self.accept_order(order)?,
            (Phase::SwingRanking, _) => return Err(SessionError::WrongAnswer { expected: "rank_order" }),
            (Phase::SwingRating, Answer::Ratings { ratings }) => self.accept_ratings(ratings)?,
            (Phase::SwingRating, _) => return Err(SessionError::WrongAnswer { expected: "ratings" }),
            (Phase::SavfBisection, Answer::Bisection { state }) => self.accept_bisection(state)?,
            (Phase::SavfBisection, _) => return Err(SessionError::WrongAnswer { expected: "bisection" }),
            (Phase::CompensationCheck, Answer::Compensation { response }) => {
                self.responses.push(response);
                if self.responses.len() == self.probes.len() {
                    self.phase = Phase::Complete;
                }
            }
            (Phase::CompensationCheck, _) => return Err(SessionError::WrongAnswer { expected: "compensation" }),
        }
        if self.phase == Phase::Complete && self.result.is_none() {
            self.finish(catalog, ranges)?;
        }
        self.question()
    }

    fn accept_order(&mut self, order: Vec<String>) -> Result<(), SessionError> {
        let mut sorted = order.clone();
        sorted.sort();
        let mut ids: Vec<String> = self.attributes.iter().map(|a| a.id.clone()).collect();
        ids.sort();
        if sorted != ids {
            return Err(invalid("rank order must list every attribute exactly once"));
        }
        self.rank_order = order;
        self.phase = Phase::SwingRating;
        Ok(())
    }

    fn accept_ratings(&mut self, ratings: IndexMap<String, f64>) -> Result<(), SessionError> {
        if ratings.len() != self.attributes.len() || self.rank_order.iter().any(|a| !ratings.contains_key(a)) {
            return Err(invalid("one rating per attribute is required"));
        }
        if ratings[&self.rank_order[0]] != 100.0 {
            return Err(invalid("the first attribute in the rank order is rated 100"));
        }
        let ordered: Vec<f64> = self.rank_order.iter().map(|a| ratings[a]).collect();
        if ordered.iter().any(|r| !(0.0..=100.0).contains(r)) {
            return Err(invalid("ratings must lie in [0, 100]"));
        }
        if ordered.windows(2).any(|w| w[1] > w[0]) {
            return Err(invalid("ratings must not increase along the rank order"));
        }
        // keep catalog order so results do not depend on the interview path
        self.ratings = self.attributes.iter().map(|a| (a.id.clone(), ratings[&a.id])).collect();

        let mut lead: IndexMap<String, String> = IndexMap::new();
        for id in &self.rank_order {
            let a = self.info(id);
            if ratings[id] > 0.0 && a.worst != a.best && !lead.contains_key(&a.objective) {
                lead.insert(a.objective.clone(), id.clone());
            }
        }
        let objectives: Vec<&str> = self.attributes.iter().map(|a| a.objective.as_str()).collect();
        let mut designated: Vec<(usize, String)> = lead
            .into_iter()
            .map(|(o, id)| (objectives.iter().position(|x| *x == o).unwrap_or(0), id))
            .collect();
        designated.sort();
        self.designated = designated.into_iter().map(|(_, id)| id).collect();

        let rated: Vec<&String> = self.rank_order.iter().filter(|a| ratings[*a] > 0.0).collect();
        self.probes = match rated.as_slice() {
            [] | [_] => Vec::new(),
            [a, b] => vec![((*a).clone(), (*b).clone()), ((*b).clone(), (*a).clone())],
            [a, b, c, ..] => vec![((*a).clone(), (*b).clone()), ((*a).clone(), (*c).clone())],
        };
        self.current = 0;
        self.start_attribute();
        Ok(())
    }

    /// Moves to the next designated attribute or, when none is left, onward.
    fn start_attribute(&mut self) {
        if let Some(id) = self.designated.get(self.current) {
            let a = self.info(id);
            self.pending = VecDeque::from([Interval {
                lower_state: a.worst,
                lower_value: 0.0,
                upper_state: a.best,
                upper_value: 1.0,
            }]);
            self.phase = Phase::SavfBisection;
        } else if self.probes.is_empty() {
            self.phase = Phase::Complete;
        } else {
            self.phase = Phase::CompensationCheck;
        }
    }

    fn accept_bisection(&mut self, state: f64) -> Result<(), SessionError> {
        let i = self.pending[0];
        let (lo, hi) = (i.lower_state.min(i.upper_state), i.lower_state.max(i.upper_state));
        if !(state > lo && state < hi) {
            return Err(invalid(format!("state must lie strictly between {lo} and {hi}")));
        }
        self.pending.pop_front();
        let value = 0.5 * (i.lower_value + i.upper_value);
        let attr = self.designated[self.current].clone();
        let points = self.midpoints.entry(attr).or_default();
        points.push(Midpoint { state, value });
        if points.len() < self.bisection_depth {
            self.pending.push_back(Interval {
                upper_state: state,
                upper_value: value,
                ..i
            });
            self.pending.push_back(Interval {
                lower_state: state,
                lower_value: value,
                ..i
            });
        } else {
            self.current += 1;
            self.start_attribute();
        }
        Ok(())
    }

    fn finish(&mut self, catalog: &AttributeCatalog, ranges: &IndexMap<String, ImpactRange>) -> Result<(), SessionError> {
        let input = StakeholderInput {
            stakeholder: self.stakeholder.clone(),
            ratings: self.ratings.clone(),
            midpoints: self
                .midpoints
                .iter()
                .map(|(k, v)| {
                    let pts = v
                        .iter()
                        .map(|m| MidpointInput::State {
                            state: m.state,
                            value: m.value,
                        })
                        .collect();
                    (k.clone(), pts)
                })
                .collect(),
            gamma: gamma_from_responses(&self.responses),
            notes: self
                .ratings
                .iter()
                .filter(|(_, r)| **r == 0.0)
                .map(|(a, _)| format!("declined {a}"))
                .collect(),
        };
        let preferences = input.derive(catalog, ranges)?;
        self.result = Some(SessionResult { input, preferences });
        Ok(())
    }

    pub fn path(dir: &Path, id: &str) -> PathBuf {
        dir.join(format!("{id}.json"))
    }

    pub fn save(&self, dir: &Path) -> Result<(), SessionError> {
        let path = Self::path(dir, &self.id);
        let storage = |e: &dyn std::fmt::Display| SessionError::Storage {
            path: path.clone(),
            message: e.to_string(),
        };
        std::fs::create_dir_all(dir).map_err(|e| storage(&e))?;
        let text = serde_json::to_string_pretty(self).map_err(|e| storage(&e))?;
        // write then rename so readers never see a partial file
        let tmp = path.with_extension("json.tmp");
        std::fs::write(&tmp, text).map_err(|e| storage(&e))?;
        std::fs::rename(&tmp, &path).map_err(|e| storage(&e))
    }

    pub fn load(path: &Path) -> Result<Self, SessionError> {
        let storage = |e: &dyn std::fmt::Display| SessionError::Storage {
            path: path.into(),
            message: e.to_string(),
        };
        let text = std::fs::read_to_string(path).map_err(|e| storage(&e))?;
        serde_json::from_str(&text).map_err(|e| storage(&e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use CompensationResponse::*;

    #[test]
    fn gamma_mapping() {
        assert_eq!(gamma_from_responses(&[Accept, Accept]), 1.0);
        assert_eq!(gamma_from_responses(&[Reject, Reject]), 0.2);
        assert_eq!(gamma_from_responses(&[StronglyReject, StronglyReject]), 0.0);
        assert_eq!(gamma_from_responses(&[Accept, StronglyReject]), 0.2);
        assert_eq!(gamma_from_responses(&[]), 0.2);
    }
}
