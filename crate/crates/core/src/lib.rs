//! Adaptive teaching under a half-life regression memory model.
//!
//! The crate provides the forgetting model, the area-under-recall objective,
//! a greedy teacher with baselines and exhaustive optima, bounds on the greedy
//! approximation ratio, and a simulator for batch experiments.

pub mod bounds;
pub mod error;
pub mod memory;
pub mod objective;
pub mod policies;
pub mod seed;
pub mod simulator;

pub use bounds::{
    bound_report_for, cor1_ratio, exact_gamma, exact_omega, gamma_lower_empirical,
    greedy_bound_report, omega_upper_empirical, sufficient_strength, thm2_ratio, BoundMethod,
    BoundReport, Cor1Ratio,
};
pub use error::{Error, Result};
pub use memory::{concept_stats, half_life, recall, ConceptParams, ConceptStats, History};
pub use objective::{
    concept_gain, marginal_gain, objective_f, recall_at, TeachingInstance, DEFAULT_RECALL_OFFSET,
};
pub use policies::{
    baseline_next, brute_force_optimal, exact_policy_value, greedy_next, rollout_fixed_outcome,
    OptimalValue, Policy, PolicyKind, PolicyState, SearchMode,
};
pub use seed::derive_seed;
pub use simulator::{
    run_experiment, run_sweep, sensitivity_study, simulate_session, ExperimentConfig,
    ExperimentTable, Preset, SensitivityConfig, SensitivityTable, SimulatedLearner,
    TeacherAssumption, TeacherModel, TrialResult,
};
