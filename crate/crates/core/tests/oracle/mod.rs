//! Reference implementations written directly from the definitions, sharing no
//! code with the library beyond its public data types.
#![allow(dead_code)]

use teach_core::{ConceptParams, History};

/// Recall of concept `i` at `tau` counting presentations in `steps` from scratch.
pub fn recall(theta: [f64; 3], steps: &[(usize, bool)], i: usize, tau: usize) -> f64 {
    let mut plus = 0.0;
    let mut minus = 0.0;
    let mut last = None;
    for (k, &(c, y)) in steps.iter().enumerate() {
        if c == i {
            if y {
                plus += 1.0;
            } else {
                minus += 1.0;
            }
            last = Some(k + 1);
        }
    }
    match last {
        None => 0.0,
        Some(l) => {
            let h = 2f64.powf(theta[0] * plus + theta[1] * minus + theta[2]);
            2f64.powf(-((tau - l) as f64) / h)
        }
    }
}

/// Objective of a (possibly partial) trajectory, one prefix per time step.
pub fn objective(thetas: &[[f64; 3]], horizon: usize, steps: &[(usize, bool)]) -> f64 {
    let n = thetas.len();
    let mut total = 0.0;
    for (i, theta) in thetas.iter().enumerate() {
        for tau in 1..=horizon {
            let prefix = &steps[..tau.min(steps.len())];
            total += recall(*theta, prefix, i, tau + 1);
        }
    }
    total / (n * horizon) as f64
}

/// Expected objective change from teaching `i` next, enumerating both outcomes.
pub fn gain(thetas: &[[f64; 3]], horizon: usize, steps: &[(usize, bool)], i: usize) -> f64 {
    let p = recall(thetas[i], steps, i, steps.len() + 1);
    let base = objective(thetas, horizon, steps);
    let mut expected = 0.0;
    for (y, w) in [(true, p), (false, 1.0 - p)] {
        let mut next = steps.to_vec();
        next.push((i, y));
        expected += w * (objective(thetas, horizon, &next) - base);
    }
    expected
}

pub fn steps_of(history: &History) -> Vec<(usize, bool)> {
    history.steps().collect()
}

pub fn thetas(params: &[ConceptParams]) -> Vec<[f64; 3]> {
    params.iter().map(|&p| p.into()).collect()
}

/// Every concept sequence of length `len` over `n` concepts.
pub fn sequences(n: usize, len: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|s| {
                (0..n).map(move |c| {
                    let mut t = s.clone();
                    t.push(c);
                    t
                })
            })
            .collect();
    }
    out
}

/// Best objective over all length-`T` sequences, outcomes fixed (valid when `a == b`).
pub fn best_sequence_value(thetas: &[[f64; 3]], horizon: usize) -> f64 {
    sequences(thetas.len(), horizon)
        .into_iter()
        .map(|s| {
            let steps: Vec<_> = s.into_iter().map(|c| (c, false)).collect();
            objective(thetas, horizon, &steps)
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Greedy run with outcomes fixed to incorrect, ties to the smallest index.
pub fn greedy_sequence(thetas: &[[f64; 3]], horizon: usize) -> Vec<(usize, bool)> {
    let mut steps = Vec::new();
    for _ in 0..horizon {
        let mut best = 0;
        let mut best_gain = f64::NEG_INFINITY;
        for i in 0..thetas.len() {
            let g = gain(thetas, horizon, &steps, i);
            if g > best_gain {
                best = i;
                best_gain = g;
            }
        }
        steps.push((best, false));
    }
    steps
}
