//! Area-under-recall teaching objective, conditional marginal gain, and the
//! recall-at-`T+s` metric.

use serde::{Deserialize, Serialize};

use crate::error::{invalid_argument, invalid_state, Result};
use crate::memory::{concept_stats, ConceptParams, ConceptStats, History};

/// Offset `s` used for "recall at `T+s`" when none is given.
pub const DEFAULT_RECALL_OFFSET: usize = 10;

/// A teaching problem: `n` concepts, a horizon `T`, and the memory model the
/// objective is evaluated under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeachingInstance {
    horizon: usize,
    params: Vec<ConceptParams>,
    priors: Vec<f64>,
}

impl TeachingInstance {
    pub fn new(horizon: usize, params: Vec<ConceptParams>) -> Result<Self> {
        if params.is_empty() {
            return Err(invalid_argument("an instance needs at least one concept"));
        }
        if horizon == 0 {
            return Err(invalid_argument("horizon must be at least 1"));
        }
        let priors = vec![0.0; params.len()];
        Ok(Self {
            horizon,
            params,
            priors,
        })
    }

    /// `n` concepts sharing the same parameters.
    pub fn uniform(n: usize, horizon: usize, params: ConceptParams) -> Result<Self> {
        Self::new(horizon, vec![params; n])
    }

    /// Recall probabilities assumed for concepts before their first presentation.
    pub fn with_priors(mut self, priors: Vec<f64>) -> Result<Self> {
        if priors.len() != self.params.len() {
            return Err(invalid_argument(format!(
                "{} priors for {} concepts",
                priors.len(),
                self.params.len()
            )));
        }
        if let Some(p) = priors.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(invalid_argument(format!("prior recall {p} outside [0, 1]")));
        }
        self.priors = priors;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.params.len()
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn params(&self) -> &[ConceptParams] {
        &self.params
    }

    pub fn priors(&self) -> &[f64] {
        &self.priors
    }

    pub fn empty_history(&self) -> History {
        History::new(self.n(), self.horizon).expect("instance dimensions are validated")
    }

    /// True when every concept has `a == b`, so `f` depends on the taught sequence only.
    pub fn is_outcome_independent(&self) -> bool {
        self.params
            .iter()
            .all(ConceptParams::is_outcome_independent)
    }

    /// Recall of concept `i` at time `tau` from its statistics.
    pub fn recall_from_stats(&self, i: usize, stats: &ConceptStats, tau: usize) -> f64 {
        self.params[i].recall(stats, tau, self.priors[i])
    }

    fn check_history(&self, history: &History) -> Result<()> {
        if history.n() != self.n() || history.horizon() != self.horizon {
            return Err(invalid_argument(format!(
                "history is for n={}, T={} but the instance has n={}, T={}",
                history.n(),
                history.horizon(),
                self.n(),
                self.horizon
            )));
        }
        Ok(())
    }

    /// Probability that concept `i` is recalled when presented at the next step.
    pub fn presentation_recall(&self, history: &History, i: usize) -> Result<f64> {
        self.check_history(history)?;
        let stats = concept_stats(history, i)?;
        Ok(self.recall_from_stats(i, &stats, history.len() + 1))
    }
}

/// `f(sigma, y) = 1/(nT) * sum_i sum_{tau=1..T} g_i(tau + 1, prefix of length min(tau, t))`.
///
/// A history shorter than `T` is frozen: recall keeps decaying with no further
/// presentations.
pub fn objective_f(instance: &TeachingInstance, history: &History) -> Result<f64> {
    instance.check_history(history)?;
    let n = instance.n();
    let horizon = instance.horizon();
    let mut stats = vec![ConceptStats::default(); n];
    let mut total = 0.0;
    for tau in 1..=horizon {
        if let Some(&concept) = history.concepts().get(tau - 1) {
            stats[concept].record(tau, history.outcomes()[tau - 1]);
        }
        total += stats
            .iter()
            .enumerate()
            .map(|(i, s)| instance.recall_from_stats(i, s, tau + 1))
            .sum::<f64>();
    }
    Ok(total / (n * horizon) as f64)
}

/// Sum of `g_i(tau + 1)` for `tau` in `from..=T`, with the concept's statistics frozen.
fn tail_area(instance: &TeachingInstance, i: usize, stats: &ConceptStats, from: usize) -> f64 {
    (from..=instance.horizon())
        .map(|tau| instance.recall_from_stats(i, stats, tau + 1))
        .sum()
}

/// Expected objective increase from presenting concept `i` at time `slot`,
/// given the concept's statistics accumulated before that slot.
///
/// Concepts are independent, so only concept `i`'s own presentations matter and
/// the rest of the history may be arbitrary (including steps with no
/// presentation). The outcome is Bernoulli with the recall probability at `slot`.
/// Returns 0 for `slot > T`.
pub fn concept_gain(
    instance: &TeachingInstance,
    i: usize,
    stats: &ConceptStats,
    slot: usize,
) -> f64 {
    let horizon = instance.horizon();
    if slot > horizon {
        return 0.0;
    }
    let p = instance.recall_from_stats(i, stats, slot);
    let before = tail_area(instance, i, stats, slot);
    let mut expected = 0.0;
    for (recalled, weight) in [(true, p), (false, 1.0 - p)] {
        if weight == 0.0 {
            continue;
        }
        let mut after = *stats;
        after.record(slot, recalled);
        expected += weight * (tail_area(instance, i, &after, slot) - before);
    }
    expected / (instance.n() * horizon) as f64
}

/// Conditional marginal gain of teaching concept `i` next.
pub fn marginal_gain(instance: &TeachingInstance, history: &History, i: usize) -> Result<f64> {
    instance.check_history(history)?;
    if history.is_full() {
        return Err(invalid_state(format!(
            "history already has {} steps; no slot left",
            history.len()
        )));
    }
    let stats = concept_stats(history, i)?;
    Ok(concept_gain(instance, i, &stats, history.len() + 1))
}

/// Mean recall across concepts `s` steps after a complete session.
pub fn recall_at(instance: &TeachingInstance, history: &History, s: usize) -> Result<f64> {
    instance.check_history(history)?;
    if !history.is_full() {
        return Err(invalid_state(format!(
            "recall at T+s needs a complete history ({} of {} steps)",
            history.len(),
            instance.horizon()
        )));
    }
    if s == 0 {
        return Err(invalid_argument("offset s must be at least 1"));
    }
    let tau = instance.horizon() + s;
    let total: f64 = history
        .all_stats()
        .iter()
        .enumerate()
        .map(|(i, stats)| instance.recall_from_stats(i, stats, tau))
        .sum();
    Ok(total / instance.n() as f64)
}
