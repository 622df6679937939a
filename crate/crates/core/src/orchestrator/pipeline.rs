use super::{sha256_hex, Inputs, RunError};
use crate::attributes::{impact_ranges, AttributeProfile, Evaluator};
use crate::esm::Decomposition;
use crate::lp::write_mps;
use crate::mavt::{
    classify_technologies, cluster_stakeholders, occurrence_frequency, rank, sensitivity, Perturbation, Ranking,
    StakeholderPreferences,
};
use crate::mga::{
    benchmark_groups, build_weight_vectors, construct_groups, generate_all, Alternative, CostOptimum, MgaGroup,
    Scheme, Strategy, WeightVector,
};
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

/// Pipeline phases in execution order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Optimize,
    Groups,
    Generate,
    Evaluate,
    Rank,
    Analyse,
}

impl Stage {
    pub const ALL: [Stage; 6] = [
        Stage::Optimize,
        Stage::Groups,
        Stage::Generate,
        Stage::Evaluate,
        Stage::Rank,
        Stage::Analyse,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Optimize => "optimize",
            Stage::Groups => "groups",
            Stage::Generate => "generate",
            Stage::Evaluate => "evaluate",
            Stage::Rank => "rank",
            Stage::Analyse => "analyse",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Counts {
    pub groups_per_strategy: IndexMap<String, usize>,
    pub weight_vectors: usize,
    pub raw_runs: usize,
    pub failed_runs: usize,
    pub alternatives: usize,
    pub capacity_artefacts: usize,
    pub stakeholders: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigSnapshot {
    pub slacks: Vec<f64>,
    pub strategies: Vec<Strategy>,
    pub schemes: Vec<Scheme>,
    pub benchmark: bool,
    pub rho: f64,
    pub relevance_threshold: f64,
    pub domain_threshold: f64,
    pub top_fraction: f64,
    pub presence_threshold: f64,
    pub sensitivity: Perturbation,
}

/// Summary of a run. Contains no wall-clock data, so identical inputs give an
/// identical manifest; timings go to `timings.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub inputs: IndexMap<String, String>,
    pub config: ConfigSnapshot,
    pub stages: Vec<Stage>,
    pub counts: Counts,
    pub f_star: Option<f64>,
    /// SHA-256 of every artifact written, by file name.
    pub artifacts: IndexMap<String, String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: Stage,
    pub started_unix_ms: u128,
    pub seconds: f64,
}

#[derive(Serialize)]
struct OptimumArtifact<'a> {
    f_star: f64,
    iterations: usize,
    costs: &'a crate::esm::CostBreakdown,
    technologies: &'a IndexMap<String, crate::esm::TechnologyFigures>,
}

#[derive(Serialize)]
struct GroupsArtifact<'a> {
    groups: &'a [MgaGroup],
    weight_vectors: &'a [WeightVector],
}

struct Writer {
    dir: PathBuf,
    digests: IndexMap<String, String>,
}

impl Writer {
    fn bytes(&mut self, name: &str, bytes: &[u8]) -> Result<(), RunError> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|source| RunError::Io { path: parent.into(), source })?;
        }
        std::fs::write(&path, bytes).map_err(|source| RunError::Io { path, source })?;
        self.digests.insert(name.to_string(), sha256_hex(bytes));
        Ok(())
    }

    fn json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<(), RunError> {
        let mut text = serde_json::to_vec_pretty(value).map_err(|source| RunError::Json {
            path: self.dir.join(name),
            source,
        })?;
        text.push(b'\n');
        self.bytes(name, &text)
    }

    fn csv<R: Serialize>(&mut self, name: &str, rows: impl IntoIterator<Item = R>) -> Result<(), RunError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in rows {
            w.serialize(r)?;
        }
        let bytes = w.into_inner().map_err(|e| RunError::Csv(e.into_error().into()))?;
        self.bytes(name, &bytes)
    }
}

#[derive(Serialize)]
struct CostRow<'a> {
    alternative: &'a str,
    total: f64,
    invest: f64,
    fixed_om: f64,
    variable_om: f64,
    fuel: f64,
    auxiliary: f64,
    slack_used: f64,
    capacity_artefact: bool,
}

#[derive(Serialize)]
struct TechRow<'a> {
    alternative: &'a str,
    technology: &'a str,
    generation: f64,
    invested: f64,
    capacity: f64,
    required_capacity: f64,
}

#[derive(Serialize)]
struct ProfileRow<'a> {
    alternative: &'a str,
    attribute: &'a str,
    mean: f64,
    low: f64,
    high: f64,
}

#[derive(Serialize)]
struct RankRow<'a> {
    stakeholder: &'a str,
    alternative: &'a str,
    value: f64,
    rank: usize,
}

#[derive(Serialize)]
struct FrequencyRow<'a> {
    stakeholder: &'a str,
    technology: &'a str,
    frequency: f64,
}

#[derive(Serialize)]
struct SensitivityCsv<'a> {
    stakeholder: &'a str,
    perturbation: &'a str,
    gamma: f64,
    kendall_tau: f64,
    top_alternative: &'a str,
    cost_optimum_rank: usize,
}

/// Writes the cost-minimising program in fixed MPS format.
pub fn write_mps_file(inputs: &Inputs, path: &Path) -> Result<(), RunError> {
    let compiled = crate::esm::compile(&inputs.model)?;
    let file = std::fs::File::create(path).map_err(|source| RunError::Io { path: path.into(), source })?;
    write_mps(&compiled.lp, &inputs.model.name, std::io::BufWriter::new(file))
        .map_err(|source| RunError::Io { path: path.into(), source })
}

/// Derives each stakeholder's preferences against the run's impact ranges.
pub fn derive_preferences(
    inputs: &Inputs,
    ranges: &IndexMap<String, crate::attributes::ImpactRange>,
) -> Result<Vec<StakeholderPreferences>, RunError> {
    Ok(inputs
        .preferences
        .stakeholders
        .iter()
        .map(|s| s.derive(&inputs.catalog, ranges))
        .collect::<Result<_, _>>()?)
}

/// Runs every stage up to and including `until`, writing artifacts into
/// `out_dir`. Ranking and analysis are skipped when there are no preferences.
pub fn run_pipeline(inputs: &Inputs, out_dir: &Path, until: Stage) -> Result<RunManifest, RunError> {
    inputs.validate()?;
    let mut w = Writer {
        dir: out_dir.to_path_buf(),
        digests: IndexMap::new(),
    };
    let mut input_digests = IndexMap::new();
    for (name, bytes) in &inputs.files {
        w.bytes(&format!("inputs/{name}"), bytes)?;
        input_digests.insert(name.clone(), sha256_hex(bytes));
    }
    let run_id = sha256_hex(
        input_digests
            .iter()
            .map(|(k, v)| format!("{k}={v}\n"))
            .collect::<String>()
            .as_bytes(),
    )[..16]
        .to_string();
    let mga = &inputs.mga;
    let mut manifest = RunManifest {
        run_id,
        inputs: input_digests,
        config: ConfigSnapshot {
            slacks: mga.slacks.clone(),
            strategies: mga.strategies.clone(),
            schemes: mga.schemes.clone(),
            benchmark: mga.benchmark,
            rho: mga.rho,
            relevance_threshold: mga.relevance_threshold,
            domain_threshold: mga.domain_threshold,
            top_fraction: inputs.config.top_fraction,
            presence_threshold: inputs.config.presence_threshold,
            sensitivity: inputs.config.sensitivity.clone(),
        },
        stages: Vec::new(),
        counts: Counts::default(),
        f_star: None,
        artifacts: IndexMap::new(),
    };
    let mut timings = Vec::new();
    let mut clock = |stage: Stage, started: Instant, wall: SystemTime, manifest: &mut RunManifest| {
        manifest.stages.push(stage);
        timings.push(StageTiming {
            stage,
            started_unix_ms: wall.duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis()),
            seconds: started.elapsed().as_secs_f64(),
        });
    };
    let begin = || (Instant::now(), SystemTime::now());

    let model = &inputs.model;
    let (t0, s0) = begin();
    let optimum = CostOptimum::solve(model)?;
    manifest.f_star = Some(optimum.f_star);
    w.json(
        "optimum.json",
        &OptimumArtifact {
            f_star: optimum.f_star,
            iterations: optimum.solution.iterations,
            costs: &optimum.decomposition.costs,
            technologies: &optimum.decomposition.technologies,
        },
    )?;
    clock(Stage::Optimize, t0, s0, &mut manifest);

    'stages: {
        if until < Stage::Groups {
            break 'stages;
        }
        let (t0, s0) = begin();
        let mut groups = Vec::new();
        if mga.benchmark {
            let b = benchmark_groups(model);
            manifest.counts.groups_per_strategy.insert(Strategy::Benchmark.tag().into(), b.len());
            groups.extend(b);
        }
        for &s in &mga.strategies {
            let g = construct_groups(&inputs.catalog, model, s, mga)?;
            manifest.counts.groups_per_strategy.insert(s.tag().into(), g.len());
            groups.extend(g);
        }
        let vectors = build_weight_vectors(&groups, &mga.schemes);
        manifest.counts.weight_vectors = vectors.len();
        w.json(
            "groups.json",
            &GroupsArtifact {
                groups: &groups,
                weight_vectors: &vectors,
            },
        )?;
        clock(Stage::Groups, t0, s0, &mut manifest);

        if until < Stage::Generate {
            break 'stages;
        }
        let (t0, s0) = begin();
        let report = generate_all(model, &optimum, &groups, &vectors, mga)?;
        let alternatives = report.alternatives;
        manifest.counts.raw_runs = report.raw_runs;
        manifest.counts.failed_runs = report.failed_runs;
        manifest.counts.alternatives = alternatives.len();
        manifest.counts.capacity_artefacts = alternatives.iter().filter(|a| a.capacity_artefact).count();
        w.json("alternatives.json", &alternatives)?;
        w.json("runs.json", &report.runs)?;
        w.csv(
            "costs.csv",
            alternatives.iter().map(|a| CostRow {
                alternative: &a.id,
                total: a.costs.total,
                invest: a.costs.invest,
                fixed_om: a.costs.fixed_om,
                variable_om: a.costs.variable_om,
                fuel: a.costs.fuel,
                auxiliary: a.costs.auxiliary,
                slack_used: a.slack_used,
                capacity_artefact: a.capacity_artefact,
            }),
        )?;
        w.csv(
            "technologies.csv",
            alternatives.iter().flat_map(|a| {
                a.technologies.iter().map(move |(t, f)| TechRow {
                    alternative: &a.id,
                    technology: t,
                    generation: f.generation,
                    invested: f.invested,
                    capacity: f.capacity,
                    required_capacity: f.required_capacity,
                })
            }),
        )?;
        clock(Stage::Generate, t0, s0, &mut manifest);

        if until < Stage::Evaluate {
            break 'stages;
        }
        let (t0, s0) = begin();
        let profiles = evaluate(inputs, &alternatives)?;
        let ranges = impact_ranges(&profiles, &inputs.catalog);
        w.json("profiles.json", &profiles)?;
        w.csv(
            "profiles.csv",
            profiles.iter().flat_map(|p| {
                p.values.iter().map(move |(attr, v)| ProfileRow {
                    alternative: &p.alternative,
                    attribute: attr,
                    mean: v.mean,
                    low: v.low,
                    high: v.high,
                })
            }),
        )?;
        w.json("impact_ranges.json", &ranges)?;
        clock(Stage::Evaluate, t0, s0, &mut manifest);

        if until < Stage::Rank || inputs.preferences.is_empty() {
            break 'stages;
        }
        let (t0, s0) = begin();
        let prefs = derive_preferences(inputs, &ranges)?;
        manifest.counts.stakeholders = prefs.len();
        let rankings = prefs
            .iter()
            .map(|p| rank(&profiles, p))
            .collect::<Result<Vec<_>, _>>()?;
        w.json("preferences.json", &prefs)?;
        w.json("rankings.json", &rankings)?;
        w.csv(
            "rankings.csv",
            rankings.iter().flat_map(|r| {
                r.entries.iter().map(move |e| RankRow {
                    stakeholder: &r.stakeholder,
                    alternative: &e.alternative,
                    value: e.value,
                    rank: e.rank,
                })
            }),
        )?;
        w.bytes("rank_matrix.csv", &rank_matrix(&rankings)?)?;
        clock(Stage::Rank, t0, s0, &mut manifest);

        if until < Stage::Analyse {
            break 'stages;
        }
        let (t0, s0) = begin();
        let q = inputs.config.top_fraction;
        let threshold = inputs.config.presence_threshold;
        let classification = classify_technologies(model, &alternatives, &rankings, q, threshold)?;
        w.json("classification.json", &classification)?;
        let freq = occurrence_frequency(model, &alternatives, &rankings, q, threshold)?;
        w.csv(
            "frequency.csv",
            freq.iter().flat_map(|(s, row)| {
                row.iter().map(move |(t, f)| FrequencyRow {
                    stakeholder: s,
                    technology: t,
                    frequency: *f,
                })
            }),
        )?;
        if rankings.len() >= 2 {
            w.json("dendrogram.json", &cluster_stakeholders(&rankings)?)?;
        }
        let optimum_id = alternatives[0].id.clone();
        let mut rows = Vec::new();
        for p in &prefs {
            rows.extend(sensitivity(p, &profiles, &inputs.config.sensitivity, std::slice::from_ref(&optimum_id))?);
        }
        w.csv(
            "sensitivity.csv",
            rows.iter().map(|r| SensitivityCsv {
                stakeholder: &r.stakeholder,
                perturbation: &r.perturbation,
                gamma: r.gamma,
                kendall_tau: r.kendall_tau,
                top_alternative: &r.top_alternative,
                cost_optimum_rank: r.designated_ranks[&optimum_id],
            }),
        )?;
        clock(Stage::Analyse, t0, s0, &mut manifest);
    }

    w.json("timings.json", &timings)?;
    manifest.artifacts = w.digests.clone();
    manifest.artifacts.shift_remove("timings.json");
    w.json("manifest.json", &manifest)?;
    Ok(manifest)
}

/// Attribute profiles of every alternative, in alternative order.
pub fn evaluate(inputs: &Inputs, alternatives: &[Alternative]) -> Result<Vec<AttributeProfile>, RunError> {
    let evaluator = Evaluator::new(&inputs.catalog, &inputs.model)?;
    Ok(alternatives
        .iter()
        .map(|a| {
            let d = Decomposition {
                costs: a.costs,
                technologies: a.technologies.clone(),
            };
            evaluator.evaluate(&a.id, &d)
        })
        .collect())
}

/// Alternatives × stakeholders rank matrix ordered by mean rank, then id.
fn rank_matrix(rankings: &[Ranking]) -> Result<Vec<u8>, RunError> {
    let mut ids: Vec<String> = rankings[0].entries.iter().map(|e| e.alternative.clone()).collect();
    ids.sort();
    let vectors = rankings
        .iter()
        .map(|r| r.rank_vector(&ids))
        .collect::<Result<Vec<_>, _>>()?;
    let mean = |i: usize| vectors.iter().map(|v| v[i]).sum::<f64>() / vectors.len() as f64;
    let mut order: Vec<usize> = (0..ids.len()).collect();
    order.sort_by(|&a, &b| mean(a).total_cmp(&mean(b)).then_with(|| ids[a].cmp(&ids[b])));
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["alternative".to_string(), "mean_rank".to_string()];
    header.extend(rankings.iter().map(|r| r.stakeholder.clone()));
    w.write_record(&header)?;
    for i in order {
        let mut row = vec![ids[i].clone(), mean(i).to_string()];
        row.extend(vectors.iter().map(|v| v[i].to_string()));
        w.write_record(&row)?;
    }
    w.into_inner().map_err(|e| RunError::Csv(e.into_error().into()))
}
