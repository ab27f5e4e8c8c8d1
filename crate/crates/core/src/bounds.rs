//! Online stepwise submodularity (gamma) and backward curvature (omega) of the
//! objective along a greedy run, and the approximation ratios built from them.
//!
//! All estimators assume `a == b` for every concept, where the objective does
//! not depend on the learner's answers.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{invalid_argument, invalid_state, Error, Result};
use crate::memory::{concept_stats, ConceptStats, History};
use crate::objective::{concept_gain, objective_f, TeachingInstance};
use crate::policies::{rollout_fixed_outcome, Policy};

/// Largest number of continuation sequences the exact estimators may enumerate.
pub const EXACT_SEQUENCE_LIMIT: u128 = 5_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundMethod {
    /// Polynomial-time estimators.
    Empirical,
    /// Full enumeration of continuations.
    Exact,
}

impl BoundMethod {
    pub fn label(&self) -> &'static str {
        match self {
            BoundMethod::Empirical => "empirical",
            BoundMethod::Exact => "exact",
        }
    }
}

/// Per-step coefficients of a greedy run and the ratios they certify.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub method: BoundMethod,
    /// Greedy sequence the coefficients were evaluated along.
    pub sequence: Vec<usize>,
    /// `gamma_t` for `t = 0..T-1`; `+inf` where no continuation constrains it.
    pub gamma: Vec<f64>,
    /// `omega_t` for `t = 0..T-1`.
    pub omega: Vec<f64>,
    pub thm2_ratio: f64,
    pub cor1_finite_ratio: f64,
    pub cor1_limit_ratio: f64,
}

impl BoundReport {
    /// True when some certified ratio is non-positive and so says nothing.
    pub fn is_vacuous(&self) -> bool {
        self.thm2_ratio <= 0.0 || self.cor1_finite_ratio <= 0.0 || self.cor1_limit_ratio <= 0.0
    }

    /// One row per step: `t, gamma_t, omega_t, thm2_ratio, cor1_finite, cor1_limit`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record([
            "t",
            "concept",
            "gamma_t",
            "omega_t",
            "thm2_ratio",
            "cor1_finite",
            "cor1_limit",
        ])?;
        for (t, (gamma, omega)) in self.gamma.iter().zip(&self.omega).enumerate() {
            out.write_record([
                t.to_string(),
                (self.sequence[t] + 1).to_string(),
                gamma.to_string(),
                omega.to_string(),
                self.thm2_ratio.to_string(),
                self.cor1_finite_ratio.to_string(),
                self.cor1_limit_ratio.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

fn require_symmetric(instance: &TeachingInstance) -> Result<()> {
    if instance.is_outcome_independent() {
        Ok(())
    } else {
        Err(Error::UnsupportedRegime(
            "bounds are only available when a == b for every concept".into(),
        ))
    }
}

fn require_open(instance: &TeachingInstance, history: &History) -> Result<()> {
    if history.n() != instance.n() || history.horizon() != instance.horizon() {
        return Err(invalid_argument("history does not match the instance"));
    }
    if history.is_full() {
        return Err(invalid_state("coefficients are defined for t < T only"));
    }
    Ok(())
}

/// Lower bound on `gamma_t` from placements of the concept itself and empty slots.
///
/// For each concept `i` the gain at the current slot is compared with the
/// largest gain `i` could have after `tau` more steps of which `s` present `i`
/// and the rest advance time only. With a single concept every step must
/// present it, so only `s == tau` is searched.
pub fn gamma_lower_empirical(instance: &TeachingInstance, history: &History) -> Result<f64> {
    require_symmetric(instance)?;
    require_open(instance, history)?;
    let t = history.len();
    let horizon = instance.horizon();
    let mut best = f64::INFINITY;
    for i in 0..instance.n() {
        let stats = concept_stats(history, i)?;
        let current = concept_gain(instance, i, &stats, t + 1);
        let mut future = current;
        for tau in 1..horizon - t {
            let placements = if instance.n() == 1 {
                tau..=tau
            } else {
                0..=tau
            };
            for s in placements {
                let mut shifted: ConceptStats = stats;
                for step in 1..=s {
                    shifted.record(t + step, false);
                }
                future = future.max(concept_gain(instance, i, &shifted, t + tau + 1));
            }
        }
        if future > 0.0 {
            best = best.min(current / future);
        }
    }
    Ok(best)
}

/// Upper bound on `omega_t` comparing all-`i` tails with the greedy prefix.
///
/// Returns 0 for the empty history.
pub fn omega_upper_empirical(instance: &TeachingInstance, history: &History) -> Result<f64> {
    require_symmetric(instance)?;
    require_open(instance, history)?;
    let t = history.len();
    if t == 0 {
        return Ok(0.0);
    }
    let f = objective_f(instance, history)?;
    if f <= 0.0 {
        return Err(invalid_state("objective of the greedy prefix is 0"));
    }
    let horizon = instance.horizon();
    let mut total = 0.0;
    for i in 0..instance.n() {
        for tau in horizon - t + 1..=horizon {
            let all_i = ConceptStats {
                n_plus: 0,
                n_minus: tau as u32,
                last_shown: tau,
            };
            total += instance.recall_from_stats(i, &all_i, tau + 1);
        }
    }
    let mut stats = vec![ConceptStats::default(); instance.n()];
    for (step, (concept, recalled)) in history.steps().enumerate() {
        let tau = step + 1;
        stats[concept].record(tau, recalled);
        for (i, s) in stats.iter().enumerate() {
            total -= instance.recall_from_stats(i, s, tau + 1);
        }
    }
    Ok(1.0 + total / ((instance.n() * horizon) as f64 * f))
}

fn sequence_count(n: usize, lengths: std::ops::RangeInclusive<usize>) -> u128 {
    let n = n as u128;
    lengths
        .map(|k| n.checked_pow(k as u32).unwrap_or(u128::MAX))
        .fold(0u128, u128::saturating_add)
}

fn check_sequences(what: &'static str, required: u128) -> Result<()> {
    if required > EXACT_SEQUENCE_LIMIT {
        return Err(Error::ResourceLimit {
            what,
            required,
            limit: EXACT_SEQUENCE_LIMIT,
        });
    }
    Ok(())
}

fn extended(history: &History, concept: usize) -> Result<History> {
    let mut next = history.clone();
    next.push(concept, false)?;
    Ok(next)
}

/// `f(history + i) - f(history)`, evaluated on the objective directly.
fn definitional_gain(instance: &TeachingInstance, history: &History, i: usize) -> Result<f64> {
    Ok(objective_f(instance, &extended(history, i)?)? - objective_f(instance, history)?)
}

/// `gamma_t` by enumerating every continuation that leaves a slot to teach.
///
/// The empty continuation is included, so the value never exceeds 1 when some
/// gain is positive; `+inf` marks a step where every gain is 0.
pub fn exact_gamma(instance: &TeachingInstance, history: &History) -> Result<f64> {
    require_symmetric(instance)?;
    require_open(instance, history)?;
    let n = instance.n();
    let remaining = instance.horizon() - history.len();
    check_sequences(
        "exact gamma continuations",
        sequence_count(n, 1..=remaining - 1).saturating_mul(n as u128),
    )?;
    let current = (0..n)
        .map(|i| definitional_gain(instance, history, i))
        .collect::<Result<Vec<_>>>()?;
    let mut best = f64::INFINITY;
    if current.iter().any(|&g| g > 0.0) {
        best = 1.0;
    }

    fn visit(
        instance: &TeachingInstance,
        prefix: &History,
        current: &[f64],
        best: &mut f64,
    ) -> Result<()> {
        if prefix.len() + 1 >= instance.horizon() {
            return Ok(());
        }
        for next in 0..instance.n() {
            let continued = extended(prefix, next)?;
            for (i, &gain) in current.iter().enumerate() {
                let later = definitional_gain(instance, &continued, i)?;
                if later > 0.0 {
                    *best = best.min(gain / later);
                }
            }
            visit(instance, &continued, current, best)?;
        }
        Ok(())
    }
    visit(instance, history, &current, &mut best)?;
    Ok(best)
}

/// `omega_t` by enumerating every completion sequence of length `0..=T`.
///
/// Returns 0 for the empty history.
pub fn exact_omega(instance: &TeachingInstance, history: &History) -> Result<f64> {
    require_symmetric(instance)?;
    require_open(instance, history)?;
    if history.is_empty() {
        return Ok(0.0);
    }
    let f_history = objective_f(instance, history)?;
    if f_history <= 0.0 {
        return Err(invalid_state("objective of the history is 0"));
    }
    check_sequences(
        "exact omega completions",
        sequence_count(instance.n(), 0..=instance.horizon()),
    )?;

    // `joined` is history followed by `alone`, truncated at the horizon.
    fn visit(
        instance: &TeachingInstance,
        f_history: f64,
        alone: &History,
        joined: &History,
        best: &mut f64,
    ) -> Result<()> {
        let curvature =
            1.0 - (objective_f(instance, joined)? - objective_f(instance, alone)?) / f_history;
        *best = best.max(curvature);
        if alone.is_full() {
            return Ok(());
        }
        for next in 0..instance.n() {
            let alone_next = extended(alone, next)?;
            let joined_next = if joined.is_full() {
                joined.clone()
            } else {
                extended(joined, next)?
            };
            visit(instance, f_history, &alone_next, &joined_next, best)?;
        }
        Ok(())
    }
    let mut best = f64::NEG_INFINITY;
    visit(
        instance,
        f_history,
        &instance.empty_history(),
        history,
        &mut best,
    )?;
    Ok(best)
}

fn clamp_unconstrained(gamma: f64) -> f64 {
    if gamma.is_infinite() {
        1.0
    } else {
        gamma
    }
}

/// `sum_{t=1..T} (gamma_{T-t} / T) * prod_{tau=0..t-1} (1 - omega_tau * gamma_tau / T)`.
pub fn thm2_ratio(gamma: &[f64], omega: &[f64], horizon: usize) -> Result<f64> {
    if gamma.len() != horizon || omega.len() != horizon {
        return Err(invalid_argument(format!(
            "need {horizon} gamma and omega values, got {} and {}",
            gamma.len(),
            omega.len()
        )));
    }
    let gamma: Vec<f64> = gamma.iter().copied().map(clamp_unconstrained).collect();
    let big_t = horizon as f64;
    let mut product = 1.0;
    let mut total = 0.0;
    for t in 1..=horizon {
        product *= 1.0 - omega[t - 1] * gamma[t - 1] / big_t;
        total += gamma[horizon - t] / big_t * product;
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Cor1Ratio {
    /// `(1/omega) * (1 - (1 - gamma*omega/T)^T)`.
    pub finite: f64,
    /// `(1/omega) * (1 - exp(-gamma*omega))`.
    pub limit: f64,
}

/// Ratio certified by the worst-case coefficients; both forms equal `gamma` at `omega == 0`.
pub fn cor1_ratio(gamma_min: f64, omega_max: f64, horizon: usize) -> Result<Cor1Ratio> {
    if horizon == 0 {
        return Err(invalid_argument("horizon must be at least 1"));
    }
    let gamma = clamp_unconstrained(gamma_min);
    if omega_max == 0.0 {
        return Ok(Cor1Ratio {
            finite: gamma,
            limit: gamma,
        });
    }
    let x = gamma * omega_max;
    let finite = (1.0 - (1.0 - x / horizon as f64).powi(horizon as i32)) / omega_max;
    let limit = -(-x).exp_m1() / omega_max;
    Ok(Cor1Ratio { finite, limit })
}

/// Memory strength `a` (with `theta = (a, a, 0)`) sufficient for greedy to reach `1 - epsilon`.
pub fn sufficient_strength(n: usize, horizon: usize, epsilon: f64) -> Result<f64> {
    if n == 0 || horizon == 0 {
        return Err(invalid_argument("n and T must be at least 1"));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(invalid_argument(format!(
            "epsilon {epsilon} outside (0, 1)"
        )));
    }
    let (n, big_t) = (n as f64, horizon as f64);
    Ok(big_t
        .log2()
        .max((3.0 * n).log2())
        .max((2.0 * n * n / (epsilon * big_t)).log2()))
}

/// Runs greedy (answers fixed, irrelevant under `a == b`) and evaluates the
/// coefficients at every prefix.
pub fn greedy_bound_report(
    instance: &TeachingInstance,
    method: BoundMethod,
) -> Result<BoundReport> {
    require_symmetric(instance)?;
    let run = rollout_fixed_outcome(instance, &Policy::greedy(), false)?;
    bound_report_for(instance, &run, method)
}

/// Coefficients along a given complete sequence.
pub fn bound_report_for(
    instance: &TeachingInstance,
    run: &History,
    method: BoundMethod,
) -> Result<BoundReport> {
    require_symmetric(instance)?;
    if !run.is_full() {
        return Err(invalid_argument("bound report needs a complete sequence"));
    }
    let horizon = instance.horizon();
    let mut gamma = Vec::with_capacity(horizon);
    let mut omega = Vec::with_capacity(horizon);
    for t in 0..horizon {
        let prefix = run.prefix(t);
        let (g, w) = match method {
            BoundMethod::Empirical => (
                gamma_lower_empirical(instance, &prefix)?,
                omega_upper_empirical(instance, &prefix)?,
            ),
            BoundMethod::Exact => (
                exact_gamma(instance, &prefix)?,
                exact_omega(instance, &prefix)?,
            ),
        };
        gamma.push(g);
        omega.push(w);
    }
    let thm2 = thm2_ratio(&gamma, &omega, horizon)?;
    let gamma_min = gamma
        .iter()
        .copied()
        .map(clamp_unconstrained)
        .fold(f64::INFINITY, f64::min);
    let omega_max = omega.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let cor1 = cor1_ratio(gamma_min, omega_max, horizon)?;
    Ok(BoundReport {
        method,
        sequence: run.concepts().to_vec(),
        gamma,
        omega,
        thm2_ratio: thm2,
        cor1_finite_ratio: cor1.finite,
        cor1_limit_ratio: cor1.limit,
    })
}
