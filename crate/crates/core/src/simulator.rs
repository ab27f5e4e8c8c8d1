//! Simulated learners and batch experiments comparing teaching policies.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::PathBuf;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid_argument, Error, Result};
use crate::memory::{ConceptParams, History};
use crate::objective::{objective_f, recall_at, TeachingInstance, DEFAULT_RECALL_OFFSET};
use crate::policies::{Policy, PolicyKind};
use crate::seed::derive_seed;

pub const METRIC_OBJECTIVE: &str = "objective";
pub const METRIC_RECALL: &str = "recall_at_t_plus_s";

/// Seed stream tags, so learner and policy streams never collide.
const LEARNER_STREAM: u64 = 0;
const POLICY_STREAM: u64 = 1;

/// A learner answering from a known memory model with a seeded random stream.
///
/// Exactly one uniform draw is consumed per presentation, so two learners with
/// the same seed answer identically to identical teaching sequences.
#[derive(Debug, Clone)]
pub struct SimulatedLearner {
    truth: TeachingInstance,
    seed: u64,
    rng: ChaCha8Rng,
}

impl SimulatedLearner {
    pub fn new(truth: TeachingInstance, seed: u64) -> Self {
        Self {
            truth,
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn truth(&self) -> &TeachingInstance {
        &self.truth
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Whether the learner recalls `concept` when it is presented next.
    pub fn respond(&mut self, history: &History, concept: usize) -> Result<bool> {
        let p = self.truth.presentation_recall(history, concept)?;
        let u: f64 = self.rng.gen();
        Ok(u < p)
    }
}

/// Outcome of one simulated session, with metrics under the learner's true model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub policy: String,
    pub trial: usize,
    pub n: usize,
    pub horizon: usize,
    pub recall_offset: usize,
    pub objective: f64,
    pub recall_at: f64,
    pub concepts: Vec<usize>,
    pub outcomes: Vec<bool>,
}

impl TrialResult {
    pub fn history(&self) -> Result<History> {
        History::from_parts(
            self.n,
            self.horizon,
            self.concepts.clone(),
            self.outcomes.clone(),
        )
    }
}

/// Teaches for `T` steps with `policy` planning under `teacher`, and scores the
/// session under the learner's true parameters.
pub fn simulate_session(
    policy: &Policy,
    teacher: &TeachingInstance,
    learner: &mut SimulatedLearner,
    recall_offset: usize,
    trial: usize,
) -> Result<TrialResult> {
    let truth = learner.truth().clone();
    if teacher.n() != truth.n() || teacher.horizon() != truth.horizon() {
        return Err(invalid_argument(
            "teacher and learner models disagree on n or T",
        ));
    }
    let mut history = teacher.empty_history();
    while !history.is_full() {
        let concept = policy.next(teacher, &history)?;
        let recalled = learner.respond(&history, concept)?;
        history.push(concept, recalled)?;
    }
    Ok(TrialResult {
        policy: policy.kind.label().to_string(),
        trial,
        n: truth.n(),
        horizon: truth.horizon(),
        recall_offset,
        objective: objective_f(&truth, &history)?,
        recall_at: recall_at(&truth, &history, recall_offset)?,
        concepts: history.concepts().to_vec(),
        outcomes: history.outcomes().to_vec(),
    })
}

/// Memory model the teacher plans with.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TeacherModel {
    /// The learner's per-concept parameters.
    #[default]
    True,
    /// One parameter triple for every concept.
    Uniform { params: ConceptParams },
    /// Explicit per-concept parameters.
    PerConcept { params: Vec<ConceptParams> },
}

fn default_recall_offset() -> usize {
    DEFAULT_RECALL_OFFSET
}

fn default_trials() -> usize {
    10
}

fn default_policies() -> Vec<String> {
    ["GR", "LR", "RR", "RD"].map(String::from).to_vec()
}

fn default_easy() -> ConceptParams {
    ConceptParams::EASY
}

fn default_hard() -> ConceptParams {
    ConceptParams::HARD
}

fn default_true() -> bool {
    true
}

/// A batch experiment, readable from TOML.
///
/// ```toml
/// n = 20
/// T = 40
/// s = 10
/// trials = 10
/// seed = 7
/// policies = ["GR", "LR", "RR", "RD"]
/// n_easy = 10
/// easy_params = [10.0, 5.0, 0.0]
/// hard_params = [3.0, 1.5, 0.0]
/// teacher = { kind = "uniform", params = [6.0, 2.0, 0.0] }
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n: usize,
    #[serde(rename = "T")]
    pub horizon: usize,
    #[serde(rename = "s", default = "default_recall_offset")]
    pub recall_offset: usize,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_policies")]
    pub policies: Vec<String>,
    /// Number of easy concepts; they take the lowest indices. Defaults to `n / 2`.
    #[serde(default)]
    pub n_easy: Option<usize>,
    #[serde(default = "default_easy")]
    pub easy_params: ConceptParams,
    #[serde(default = "default_hard")]
    pub hard_params: ConceptParams,
    /// Explicit learner parameters; overrides the easy/hard split.
    #[serde(default)]
    pub learner_params: Option<Vec<ConceptParams>>,
    #[serde(default)]
    pub teacher: TeacherModel,
    /// Give every policy the same learner stream within a trial.
    #[serde(default = "default_true")]
    pub shared_learner_streams: bool,
    #[serde(default)]
    pub no_consecutive_repeat: bool,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(n: usize, horizon: usize) -> Self {
        Self {
            n,
            horizon,
            recall_offset: DEFAULT_RECALL_OFFSET,
            trials: default_trials(),
            seed: 0,
            policies: default_policies(),
            n_easy: None,
            easy_params: ConceptParams::EASY,
            hard_params: ConceptParams::HARD,
            learner_params: None,
            teacher: TeacherModel::True,
            shared_learner_streams: true,
            no_consecutive_repeat: false,
            output: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text)
            .map_err(|e| invalid_argument(format!("experiment config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.horizon == 0 {
            return Err(invalid_argument("n and T must be at least 1"));
        }
        if self.trials == 0 {
            return Err(invalid_argument("trials must be at least 1"));
        }
        if self.recall_offset == 0 {
            return Err(invalid_argument("s must be at least 1"));
        }
        if self.policies.is_empty() {
            return Err(invalid_argument("at least one policy is required"));
        }
        self.policy_kinds()?;
        if let Some(k) = self.n_easy {
            if k > self.n {
                return Err(invalid_argument(format!("n_easy {k} exceeds n {}", self.n)));
            }
        }
        if let Some(p) = &self.learner_params {
            if p.len() != self.n {
                return Err(invalid_argument(format!(
                    "{} learner parameter triples for n = {}",
                    p.len(),
                    self.n
                )));
            }
        }
        if let TeacherModel::PerConcept { params } = &self.teacher {
            if params.len() != self.n {
                return Err(invalid_argument(format!(
                    "{} teacher parameter triples for n = {}",
                    params.len(),
                    self.n
                )));
            }
        }
        Ok(())
    }

    pub fn policy_kinds(&self) -> Result<Vec<PolicyKind>> {
        self.policies.iter().map(|p| p.parse()).collect()
    }

    pub fn learner_params(&self) -> Vec<ConceptParams> {
        if let Some(p) = &self.learner_params {
            return p.clone();
        }
        let n_easy = self.n_easy.unwrap_or(self.n / 2);
        (0..self.n)
            .map(|i| {
                if i < n_easy {
                    self.easy_params
                } else {
                    self.hard_params
                }
            })
            .collect()
    }

    pub fn teacher_params(&self) -> Vec<ConceptParams> {
        match &self.teacher {
            TeacherModel::True => self.learner_params(),
            TeacherModel::Uniform { params } => vec![*params; self.n],
            TeacherModel::PerConcept { params } => params.clone(),
        }
    }

    /// Seed of the learner stream for one (policy, trial) pair.
    pub fn learner_seed(&self, policy_index: usize, trial: usize) -> u64 {
        if self.shared_learner_streams {
            derive_seed(self.seed, &[LEARNER_STREAM, trial as u64])
        } else {
            derive_seed(
                self.seed,
                &[LEARNER_STREAM, trial as u64, policy_index as u64 + 1],
            )
        }
    }

    /// Seed of a random policy for one (policy, trial) pair.
    pub fn policy_seed(&self, policy_index: usize, trial: usize) -> u64 {
        derive_seed(
            self.seed,
            &[POLICY_STREAM, policy_index as u64, trial as u64],
        )
    }
}

/// Trial results of one or more experiments, in (experiment, policy, trial) order.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ExperimentTable {
    pub results: Vec<TrialResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub policy: String,
    pub n: usize,
    #[serde(rename = "T")]
    pub horizon: usize,
    pub metric: &'static str,
    pub trials: usize,
    pub mean: f64,
    pub stderr: f64,
}

#[derive(Serialize)]
struct LongRow<'a> {
    policy: &'a str,
    trial: usize,
    n: usize,
    #[serde(rename = "T")]
    horizon: usize,
    metric: &'static str,
    value: f64,
}

/// Mean and standard error of the mean (0 for a single value).
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let k = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / k;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (mean, (var / k).sqrt())
}

impl ExperimentTable {
    /// Long format: `policy, trial, n, T, metric, value`, two metric rows per trial.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        for r in &self.results {
            for (metric, value) in [
                (METRIC_OBJECTIVE, r.objective),
                (METRIC_RECALL, r.recall_at),
            ] {
                out.serialize(LongRow {
                    policy: &r.policy,
                    trial: r.trial,
                    n: r.n,
                    horizon: r.horizon,
                    metric,
                    value,
                })?;
            }
        }
        out.flush()?;
        Ok(())
    }

    /// Mean and standard error per (policy, n, T, metric), in first-seen order.
    pub fn summary(&self) -> Vec<SummaryRow> {
        type Cell = (String, usize, usize);
        let mut order: Vec<Cell> = Vec::new();
        let mut groups: BTreeMap<Cell, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
        for r in &self.results {
            let key = (r.policy.clone(), r.n, r.horizon);
            let entry = groups.entry(key.clone()).or_insert_with(|| {
                order.push(key);
                (Vec::new(), Vec::new())
            });
            entry.0.push(r.objective);
            entry.1.push(r.recall_at);
        }
        let mut rows = Vec::new();
        for key in order {
            let (objective, recall) = &groups[&key];
            for (metric, values) in [(METRIC_OBJECTIVE, objective), (METRIC_RECALL, recall)] {
                let (mean, stderr) = mean_stderr(values);
                rows.push(SummaryRow {
                    policy: key.0.clone(),
                    n: key.1,
                    horizon: key.2,
                    metric,
                    trials: values.len(),
                    mean,
                    stderr,
                });
            }
        }
        rows
    }

    pub fn write_summary_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        for row in self.summary() {
            out.serialize(row)?;
        }
        out.flush()?;
        Ok(())
    }

    /// Mean of a metric for one policy label at given `n` and `T`.
    pub fn mean(&self, policy: &str, n: usize, horizon: usize, metric: &str) -> Option<f64> {
        self.summary()
            .into_iter()
            .find(|r| r.policy == policy && r.n == n && r.horizon == horizon && r.metric == metric)
            .map(|r| r.mean)
    }
}

/// Runs every policy for every trial; trials run in parallel and are merged in order.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentTable> {
    config.validate()?;
    let kinds = config.policy_kinds()?;
    let truth = TeachingInstance::new(config.horizon, config.learner_params())?;
    let teacher = TeachingInstance::new(config.horizon, config.teacher_params())?;
    let tasks: Vec<(usize, usize)> = (0..kinds.len())
        .flat_map(|p| (0..config.trials).map(move |t| (p, t)))
        .collect();
    let results = tasks
        .into_par_iter()
        .map(|(p, trial)| {
            let policy = Policy {
                kind: kinds[p].reseeded(config.policy_seed(p, trial)),
                no_consecutive_repeat: config.no_consecutive_repeat,
            };
            let mut learner = SimulatedLearner::new(truth.clone(), config.learner_seed(p, trial));
            simulate_session(&policy, &teacher, &mut learner, config.recall_offset, trial)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentTable { results })
}

/// Runs several experiments and concatenates their tables in order.
pub fn run_sweep(configs: &[ExperimentConfig]) -> Result<ExperimentTable> {
    let mut table = ExperimentTable::default();
    for config in configs {
        table.results.extend(run_experiment(config)?.results);
    }
    Ok(table)
}

/// Named experiment grids.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// `n = 20`, half easy, `T` in 40..=80 step 10.
    Fig4T,
    /// `T = 60`, `n` in 10..=30 step 5, half easy.
    Fig4N,
}

impl Preset {
    pub fn name(&self) -> &'static str {
        match self {
            Preset::Fig4T => "fig4-T",
            Preset::Fig4N => "fig4-n",
        }
    }

    /// One config per grid point, sharing `base` for everything else.
    pub fn configs(&self, base: &ExperimentConfig) -> Vec<ExperimentConfig> {
        let point = |n: usize, horizon: usize| ExperimentConfig {
            n,
            horizon,
            n_easy: Some(n / 2),
            learner_params: None,
            ..base.clone()
        };
        match self {
            Preset::Fig4T => [40, 50, 60, 70, 80].map(|t| point(20, t)).to_vec(),
            Preset::Fig4N => [10, 15, 20, 25, 30].map(|n| point(n, 60)).to_vec(),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fig4-T" | "fig4-t" => Ok(Preset::Fig4T),
            "fig4-n" | "fig4-N" => Ok(Preset::Fig4N),
            other => Err(invalid_argument(format!("unknown preset {other:?}"))),
        }
    }
}

/// Teacher assumption in the sensitivity study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TeacherAssumption {
    /// Every concept is easy.
    Easy,
    /// Every concept is hard.
    Hard,
    /// The learner's true parameters.
    True,
    /// A single compromise triple for every concept.
    Robust,
}

impl TeacherAssumption {
    pub const ALL: [TeacherAssumption; 4] = [
        TeacherAssumption::Easy,
        TeacherAssumption::Hard,
        TeacherAssumption::True,
        TeacherAssumption::Robust,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            TeacherAssumption::Easy => "easy",
            TeacherAssumption::Hard => "hard",
            TeacherAssumption::True => "true",
            TeacherAssumption::Robust => "robust",
        }
    }

    fn model(&self, config: &SensitivityConfig) -> TeacherModel {
        match self {
            TeacherAssumption::Easy => TeacherModel::Uniform {
                params: config.easy_params,
            },
            TeacherAssumption::Hard => TeacherModel::Uniform {
                params: config.hard_params,
            },
            TeacherAssumption::True => TeacherModel::True,
            TeacherAssumption::Robust => TeacherModel::Uniform {
                params: config.robust_params,
            },
        }
    }
}

/// Greedy teaching under misspecified teacher models, swept over the number of easy concepts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensitivityConfig {
    pub n: usize,
    #[serde(rename = "T")]
    pub horizon: usize,
    #[serde(rename = "s")]
    pub recall_offset: usize,
    pub trials: usize,
    pub seed: u64,
    pub max_easy: usize,
    pub easy_params: ConceptParams,
    pub hard_params: ConceptParams,
    pub robust_params: ConceptParams,
}

impl Default for SensitivityConfig {
    fn default() -> Self {
        Self {
            n: 15,
            horizon: 40,
            recall_offset: DEFAULT_RECALL_OFFSET,
            trials: 10,
            seed: 0,
            max_easy: 8,
            easy_params: ConceptParams::EASY,
            hard_params: ConceptParams::HARD,
            robust_params: ConceptParams::ROBUST,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensitivityCell {
    pub teacher: &'static str,
    pub n_easy: usize,
    pub objective_mean: f64,
    pub objective_stderr: f64,
    pub recall_mean: f64,
    pub recall_stderr: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SensitivityTable {
    pub cells: Vec<SensitivityCell>,
}

#[derive(Serialize)]
struct SensitivityRow {
    teacher: &'static str,
    n_easy: usize,
    metric: &'static str,
    mean: f64,
    stderr: f64,
}

impl SensitivityTable {
    /// Long format: `teacher, n_easy, metric, mean, stderr`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        for c in &self.cells {
            out.serialize(SensitivityRow {
                teacher: c.teacher,
                n_easy: c.n_easy,
                metric: METRIC_OBJECTIVE,
                mean: c.objective_mean,
                stderr: c.objective_stderr,
            })?;
            out.serialize(SensitivityRow {
                teacher: c.teacher,
                n_easy: c.n_easy,
                metric: METRIC_RECALL,
                mean: c.recall_mean,
                stderr: c.recall_stderr,
            })?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn cell(&self, teacher: TeacherAssumption, n_easy: usize) -> Option<&SensitivityCell> {
        self.cells
            .iter()
            .find(|c| c.teacher == teacher.label() && c.n_easy == n_easy)
    }
}

/// Every (teacher assumption, #easy) cell, with learner streams shared across teachers.
pub fn sensitivity_study(config: &SensitivityConfig) -> Result<SensitivityTable> {
    if config.max_easy > config.n {
        return Err(invalid_argument("max_easy exceeds n"));
    }
    let mut cells = Vec::new();
    for n_easy in 0..=config.max_easy {
        for assumption in TeacherAssumption::ALL {
            let experiment = ExperimentConfig {
                recall_offset: config.recall_offset,
                trials: config.trials,
                seed: config.seed,
                policies: vec!["GR".into()],
                n_easy: Some(n_easy),
                easy_params: config.easy_params,
                hard_params: config.hard_params,
                teacher: assumption.model(config),
                ..ExperimentConfig::new(config.n, config.horizon)
            };
            let table = run_experiment(&experiment)?;
            let objective: Vec<f64> = table.results.iter().map(|r| r.objective).collect();
            let recall: Vec<f64> = table.results.iter().map(|r| r.recall_at).collect();
            let (objective_mean, objective_stderr) = mean_stderr(&objective);
            let (recall_mean, recall_stderr) = mean_stderr(&recall);
            cells.push(SensitivityCell {
                teacher: assumption.label(),
                n_easy,
                objective_mean,
                objective_stderr,
                recall_mean,
                recall_stderr,
            });
        }
    }
    Ok(SensitivityTable { cells })
}
