//! Half-life regression (HLR) forgetting model.
//!
//! Each concept `i` carries retention weights `(a, b, c)`. After `n+` correct
//! and `n-` incorrect recalls, the half life is `h = 2^(a*n+ + b*n- + c)` and
//! the recall probability at time `tau` is `2^(-(tau - last_shown) / h)`.
//!
//! Time steps are 1-based; step `t` is the `t`-th presentation of a session.
//! Concepts are addressed by 0-based index `0..n`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid_argument, Error, Result};

/// Retention weights of one concept.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 3]", into = "[f64; 3]")]
pub struct ConceptParams {
    a: f64,
    b: f64,
    c: f64,
}

impl ConceptParams {
    /// "Easy" concept: recall is about 0.999 / 0.979 one step after a correct / incorrect recall.
    pub const EASY: ConceptParams = ConceptParams {
        a: 10.0,
        b: 5.0,
        c: 0.0,
    };
    /// "Hard" concept: recall is about 0.917 / 0.783 one step after a correct / incorrect recall.
    pub const HARD: ConceptParams = ConceptParams {
        a: 3.0,
        b: 1.5,
        c: 0.0,
    };
    /// Compromise assumption that works reasonably on both easy and hard learners.
    pub const ROBUST: ConceptParams = ConceptParams {
        a: 6.0,
        b: 2.0,
        c: 0.0,
    };

    pub fn new(a: f64, b: f64, c: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && c.is_finite()) {
            return Err(invalid_argument(format!(
                "concept parameters must be finite, got ({a}, {b}, {c})"
            )));
        }
        if a < 0.0 {
            return Err(invalid_argument(format!(
                "correct-recall weight a must be non-negative, got {a}"
            )));
        }
        Ok(Self { a, b, c })
    }

    /// Parameters with `a == b`, for which recall does not depend on outcomes.
    pub fn symmetric(a: f64, c: f64) -> Result<Self> {
        Self::new(a, a, c)
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn is_outcome_independent(&self) -> bool {
        self.a == self.b
    }

    /// Recall probability at time `tau` given the concept's statistics.
    ///
    /// `prior` is returned for a concept that was never shown.
    pub fn recall(&self, stats: &ConceptStats, tau: usize, prior: f64) -> f64 {
        if stats.last_shown == 0 {
            return prior;
        }
        debug_assert!(tau >= stats.last_shown);
        let delay = tau.saturating_sub(stats.last_shown);
        if delay == 0 {
            return 1.0;
        }
        let h = half_life(self, stats);
        (-(delay as f64) / h).exp2()
    }
}

impl TryFrom<[f64; 3]> for ConceptParams {
    type Error = Error;

    fn try_from([a, b, c]: [f64; 3]) -> Result<Self> {
        Self::new(a, b, c)
    }
}

impl From<ConceptParams> for [f64; 3] {
    fn from(p: ConceptParams) -> Self {
        [p.a, p.b, p.c]
    }
}

impl std::fmt::Display for ConceptParams {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {}, {})", self.a, self.b, self.c)
    }
}

/// Presentation counts of a single concept within a history.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConceptStats {
    pub n_plus: u32,
    pub n_minus: u32,
    /// Time step of the most recent presentation, 0 if never shown.
    pub last_shown: usize,
}

impl ConceptStats {
    pub fn record(&mut self, time: usize, recalled: bool) {
        if recalled {
            self.n_plus += 1;
        } else {
            self.n_minus += 1;
        }
        self.last_shown = time;
    }

    pub fn presentations(&self) -> u32 {
        self.n_plus + self.n_minus
    }

    pub fn was_shown(&self) -> bool {
        self.last_shown > 0
    }
}

/// `2^(a*n+ + b*n- + c)`. Saturates to +inf on overflow, making recall 1 at any finite delay.
pub fn half_life(params: &ConceptParams, stats: &ConceptStats) -> f64 {
    let exponent =
        params.a * f64::from(stats.n_plus) + params.b * f64::from(stats.n_minus) + params.c;
    exponent.exp2()
}

/// Taught concepts and observed recall outcomes of a session.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct History {
    n: usize,
    horizon: usize,
    concepts: Vec<usize>,
    outcomes: Vec<bool>,
}

impl History {
    pub fn new(n: usize, horizon: usize) -> Result<Self> {
        if n == 0 {
            return Err(invalid_argument("concept count must be at least 1"));
        }
        if horizon == 0 {
            return Err(invalid_argument("horizon must be at least 1"));
        }
        Ok(Self {
            n,
            horizon,
            concepts: Vec::with_capacity(horizon),
            outcomes: Vec::with_capacity(horizon),
        })
    }

    pub fn from_parts(
        n: usize,
        horizon: usize,
        concepts: Vec<usize>,
        outcomes: Vec<bool>,
    ) -> Result<Self> {
        if concepts.len() != outcomes.len() {
            return Err(invalid_argument(format!(
                "{} concepts but {} outcomes",
                concepts.len(),
                outcomes.len()
            )));
        }
        let mut history = Self::new(n, horizon)?;
        for (concept, recalled) in concepts.into_iter().zip(outcomes) {
            history.push(concept, recalled)?;
        }
        Ok(history)
    }

    pub fn push(&mut self, concept: usize, recalled: bool) -> Result<()> {
        if self.is_full() {
            return Err(Error::InvalidState(format!(
                "history already holds {} steps",
                self.horizon
            )));
        }
        self.check_concept(concept)?;
        self.concepts.push(concept);
        self.outcomes.push(recalled);
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn len(&self) -> usize {
        self.concepts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.concepts.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.concepts.len() >= self.horizon
    }

    pub fn concepts(&self) -> &[usize] {
        &self.concepts
    }

    pub fn outcomes(&self) -> &[bool] {
        &self.outcomes
    }

    pub fn last_concept(&self) -> Option<usize> {
        self.concepts.last().copied()
    }

    /// `(concept, recalled)` pairs in presentation order.
    pub fn steps(&self) -> impl Iterator<Item = (usize, bool)> + '_ {
        self.concepts
            .iter()
            .copied()
            .zip(self.outcomes.iter().copied())
    }

    /// The first `len` steps (clamped to the history length).
    pub fn prefix(&self, len: usize) -> History {
        let len = len.min(self.len());
        History {
            n: self.n,
            horizon: self.horizon,
            concepts: self.concepts[..len].to_vec(),
            outcomes: self.outcomes[..len].to_vec(),
        }
    }

    pub(crate) fn check_concept(&self, concept: usize) -> Result<()> {
        if concept >= self.n {
            return Err(invalid_argument(format!(
                "concept index {concept} out of range for {} concepts",
                self.n
            )));
        }
        Ok(())
    }

    /// Statistics of every concept in one pass.
    pub fn all_stats(&self) -> Vec<ConceptStats> {
        let mut stats = vec![ConceptStats::default(); self.n];
        for (step, (concept, recalled)) in self.steps().enumerate() {
            stats[concept].record(step + 1, recalled);
        }
        stats
    }
}

/// Counts and last presentation time of concept `i` over the whole history.
pub fn concept_stats(history: &History, i: usize) -> Result<ConceptStats> {
    history.check_concept(i)?;
    let mut stats = ConceptStats::default();
    for (step, (concept, recalled)) in history.steps().enumerate() {
        if concept == i {
            stats.record(step + 1, recalled);
        }
    }
    Ok(stats)
}

/// Recall probability of concept `i` at time `tau`; 0 if it was never shown.
pub fn recall(params: &ConceptParams, history: &History, i: usize, tau: usize) -> Result<f64> {
    recall_with_prior(params, history, i, tau, 0.0)
}

/// Like [`recall`], returning `prior` for a concept that was never shown.
pub fn recall_with_prior(
    params: &ConceptParams,
    history: &History,
    i: usize,
    tau: usize,
    prior: f64,
) -> Result<f64> {
    if tau == 0 {
        return Err(invalid_argument("time index tau must be at least 1"));
    }
    let stats = concept_stats(history, i)?;
    if tau < stats.last_shown {
        return Err(invalid_argument(format!(
            "tau {tau} precedes the last presentation of concept {i} at {}",
            stats.last_shown
        )));
    }
    Ok(params.recall(&stats, tau, prior))
}
