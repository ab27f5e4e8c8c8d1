//! Teaching policies: the adaptive greedy teacher, three baselines, and
//! exhaustive optimal-value search for tiny instances.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid_argument, invalid_state, Error, Result};
use crate::memory::{ConceptStats, History};
use crate::objective::{marginal_gain, objective_f, TeachingInstance};
use crate::seed::derive_seed;

/// Largest number of leaves an exhaustive search may visit.
pub const ENUMERATION_LIMIT: u128 = 20_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    /// Maximal conditional marginal gain (GR).
    Greedy,
    /// Fixed cyclic schedule in concept order (RR).
    RoundRobin,
    /// Uniformly random concept from a seeded stream (RD).
    Random { seed: u64 },
    /// Concept with the lowest modeled recall (LR).
    LowestRecall,
}

impl PolicyKind {
    pub fn label(&self) -> &'static str {
        match self {
            PolicyKind::Greedy => "GR",
            PolicyKind::RoundRobin => "RR",
            PolicyKind::Random { .. } => "RD",
            PolicyKind::LowestRecall => "LR",
        }
    }

    /// Same kind, with a new seed when random.
    pub fn reseeded(self, seed: u64) -> Self {
        match self {
            PolicyKind::Random { .. } => PolicyKind::Random { seed },
            other => other,
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Accepts the short labels (`GR`, `RR`, `RD`, `LR`) or long names, case-insensitively.
/// A parsed random policy has seed 0; use [`PolicyKind::reseeded`].
impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gr" | "greedy" => Ok(PolicyKind::Greedy),
            "rr" | "round_robin" | "round-robin" | "roundrobin" => Ok(PolicyKind::RoundRobin),
            "rd" | "random" => Ok(PolicyKind::Random { seed: 0 }),
            "lr" | "lowest_recall" | "lowest-recall" | "lowestrecall" => {
                Ok(PolicyKind::LowestRecall)
            }
            other => Err(invalid_argument(format!("unknown policy {other:?}"))),
        }
    }
}

/// A decision rule from a history to the next concept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Policy {
    pub kind: PolicyKind,
    /// Never present the same concept at two consecutive steps (when `n >= 2`).
    #[serde(default)]
    pub no_consecutive_repeat: bool,
}

impl Policy {
    pub fn new(kind: PolicyKind) -> Self {
        Self {
            kind,
            no_consecutive_repeat: false,
        }
    }

    pub fn greedy() -> Self {
        Self::new(PolicyKind::Greedy)
    }

    pub fn without_repeats(mut self) -> Self {
        self.no_consecutive_repeat = true;
        self
    }

    /// Next concept to present given the teacher's model and the history so far.
    pub fn next(&self, teacher: &TeachingInstance, history: &History) -> Result<usize> {
        match self.kind {
            PolicyKind::Greedy => greedy_next(teacher, history, self.no_consecutive_repeat),
            kind => baseline_next(teacher, history, kind, self.no_consecutive_repeat),
        }
    }
}

fn ensure_open(teacher: &TeachingInstance, history: &History) -> Result<()> {
    if history.n() != teacher.n() || history.horizon() != teacher.horizon() {
        return Err(invalid_argument(
            "history does not match the teacher's instance",
        ));
    }
    if history.is_full() {
        return Err(invalid_state("history is complete; no step left to teach"));
    }
    Ok(())
}

/// Concepts a policy may pick next.
fn allowed(history: &History, no_repeat: bool) -> impl Iterator<Item = usize> + '_ {
    let excluded = if no_repeat && history.n() > 1 {
        history.last_concept()
    } else {
        None
    };
    (0..history.n()).filter(move |&i| Some(i) != excluded)
}

/// First index attaining the maximum score.
fn argmax(candidates: impl Iterator<Item = (usize, f64)>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, score) in candidates {
        if best.is_none_or(|(_, b)| score > b) {
            best = Some((i, score));
        }
    }
    best.map(|(i, _)| i)
}

/// Concept with the largest marginal gain; ties go to the smallest index.
pub fn greedy_next(
    teacher: &TeachingInstance,
    history: &History,
    no_repeat: bool,
) -> Result<usize> {
    ensure_open(teacher, history)?;
    let gains = allowed(history, no_repeat)
        .map(|i| marginal_gain(teacher, history, i).map(|g| (i, g)))
        .collect::<Result<Vec<_>>>()?;
    Ok(argmax(gains.into_iter()).expect("at least one concept is allowed"))
}

/// Next pick of one of the baseline policies.
pub fn baseline_next(
    teacher: &TeachingInstance,
    history: &History,
    kind: PolicyKind,
    no_repeat: bool,
) -> Result<usize> {
    ensure_open(teacher, history)?;
    let t = history.len();
    match kind {
        PolicyKind::Greedy => greedy_next(teacher, history, no_repeat),
        PolicyKind::RoundRobin => Ok(t % history.n()),
        PolicyKind::Random { seed } => {
            let choices: Vec<usize> = allowed(history, no_repeat).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[t as u64]));
            Ok(choices[rng.gen_range(0..choices.len())])
        }
        PolicyKind::LowestRecall => {
            let stats = history.all_stats();
            let recalls = allowed(history, no_repeat)
                .map(|i| (i, -teacher.recall_from_stats(i, &stats[i], t + 1)));
            Ok(argmax(recalls).expect("at least one concept is allowed"))
        }
    }
}

/// A policy bound to the teacher's model, together with the session history.
#[derive(Debug, Clone)]
pub struct PolicyState {
    teacher: TeachingInstance,
    policy: Policy,
    history: History,
}

impl PolicyState {
    pub fn new(teacher: TeachingInstance, policy: Policy) -> Self {
        let history = teacher.empty_history();
        Self {
            teacher,
            policy,
            history,
        }
    }

    pub fn next(&self) -> Result<usize> {
        self.policy.next(&self.teacher, &self.history)
    }

    pub fn observe(&mut self, concept: usize, recalled: bool) -> Result<()> {
        self.history.push(concept, recalled)
    }

    pub fn history(&self) -> &History {
        &self.history
    }

    pub fn teacher(&self) -> &TeachingInstance {
        &self.teacher
    }

    pub fn policy(&self) -> &Policy {
        &self.policy
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMode {
    /// All `n^T` sequences; requires `a == b` so outcomes do not matter.
    Deterministic,
    /// Full select/outcome tree with outcome probabilities from the model.
    Expectimax,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OptimalValue {
    /// Maximal expected objective over all policies.
    pub value: f64,
    pub first_action: usize,
}

fn check_budget(what: &'static str, base: u128, depth: usize) -> Result<()> {
    let required = u32::try_from(depth)
        .ok()
        .and_then(|d| base.checked_pow(d))
        .unwrap_or(u128::MAX);
    if required > ENUMERATION_LIMIT {
        return Err(Error::ResourceLimit {
            what,
            required,
            limit: ENUMERATION_LIMIT,
        });
    }
    Ok(())
}

/// Unnormalized recall mass `sum_j g_j(tau + 1)` after step `tau`.
fn step_reward(instance: &TeachingInstance, stats: &[ConceptStats], tau: usize) -> f64 {
    stats
        .iter()
        .enumerate()
        .map(|(j, s)| instance.recall_from_stats(j, s, tau + 1))
        .sum()
}

/// Best achievable remaining reward from step `tau`, first action fixed when given.
fn search(
    instance: &TeachingInstance,
    mode: SearchMode,
    stats: &mut [ConceptStats],
    tau: usize,
    forced: Option<usize>,
) -> f64 {
    if tau > instance.horizon() {
        return 0.0;
    }
    let mut best = f64::NEG_INFINITY;
    let actions: Box<dyn Iterator<Item = usize>> = match forced {
        Some(i) => Box::new(std::iter::once(i)),
        None => Box::new(0..instance.n()),
    };
    for i in actions {
        let saved = stats[i];
        let outcomes: [(bool, f64); 2] = match mode {
            SearchMode::Deterministic => [(false, 1.0), (true, 0.0)],
            SearchMode::Expectimax => {
                let p = instance.recall_from_stats(i, &saved, tau);
                [(true, p), (false, 1.0 - p)]
            }
        };
        let mut value = 0.0;
        for (recalled, weight) in outcomes {
            if weight == 0.0 {
                continue;
            }
            stats[i].record(tau, recalled);
            let reward = step_reward(instance, stats, tau);
            value += weight * (reward + search(instance, mode, stats, tau + 1, None));
            stats[i] = saved;
        }
        if value > best {
            best = value;
        }
    }
    best
}

/// Optimal expected objective by exhaustive search.
///
/// Subtrees rooted at each first action are searched in parallel; the result
/// does not depend on the partitioning.
pub fn brute_force_optimal(instance: &TeachingInstance, mode: SearchMode) -> Result<OptimalValue> {
    let n = instance.n() as u128;
    match mode {
        SearchMode::Deterministic => {
            if !instance.is_outcome_independent() {
                return Err(Error::UnsupportedRegime(
                    "deterministic search needs a == b for every concept".into(),
                ));
            }
            check_budget("deterministic enumeration (n^T)", n, instance.horizon())?;
        }
        SearchMode::Expectimax => {
            check_budget("expectimax tree ((2n)^T)", 2 * n, instance.horizon())?;
        }
    }
    let norm = (instance.n() * instance.horizon()) as f64;
    let values: Vec<f64> = (0..instance.n())
        .into_par_iter()
        .map(|first| {
            let mut stats = vec![ConceptStats::default(); instance.n()];
            search(instance, mode, &mut stats, 1, Some(first))
        })
        .collect();
    let first_action = argmax(values.iter().copied().enumerate()).expect("n >= 1");
    Ok(OptimalValue {
        value: values[first_action] / norm,
        first_action,
    })
}

/// Exact expected objective of a policy, enumerating every outcome sequence.
pub fn exact_policy_value(instance: &TeachingInstance, policy: &Policy) -> Result<f64> {
    check_budget("policy outcome tree (2^T)", 2, instance.horizon())?;
    fn walk(instance: &TeachingInstance, policy: &Policy, history: &History) -> Result<f64> {
        if history.is_full() {
            return objective_f(instance, history);
        }
        let concept = policy.next(instance, history)?;
        let p = instance.presentation_recall(history, concept)?;
        let mut value = 0.0;
        for (recalled, weight) in [(true, p), (false, 1.0 - p)] {
            if weight == 0.0 {
                continue;
            }
            let mut next = history.clone();
            next.push(concept, recalled)?;
            value += weight * walk(instance, policy, &next)?;
        }
        Ok(value)
    }
    walk(instance, policy, &instance.empty_history())
}

/// Runs a policy to completion with every outcome fixed to `recalled`.
///
/// Meant for `a == b` instances, where outcomes do not affect the objective.
pub fn rollout_fixed_outcome(
    instance: &TeachingInstance,
    policy: &Policy,
    recalled: bool,
) -> Result<History> {
    let mut history = instance.empty_history();
    while !history.is_full() {
        let concept = policy.next(instance, &history)?;
        history.push(concept, recalled)?;
    }
    Ok(history)
}
