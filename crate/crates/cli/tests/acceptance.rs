//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.
//!
//! Run with `cargo test -p teach-cli --test acceptance`.

use std::collections::HashMap;
use std::io::{BufRead, BufReader};
use std::path::PathBuf;
use std::process::{Child, Command, ExitCode, Stdio};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use teach_core::simulator::{SensitivityConfig, METRIC_OBJECTIVE, METRIC_RECALL};
use teach_core::{
    brute_force_optimal, cor1_ratio, exact_gamma, exact_omega, gamma_lower_empirical, objective_f,
    omega_upper_empirical, rollout_fixed_outcome, run_sweep, sensitivity_study,
    sufficient_strength, thm2_ratio, ConceptParams, ExperimentConfig, ExperimentTable, Policy,
    Preset, SearchMode, TeacherAssumption, TeachingInstance,
};
use teach_service::store::parse_log;
use teach_service::{Phase, ServiceConfig, SessionRecord, SessionService};

const SEED: u64 = 7;
const POLICIES: [&str; 4] = ["GR", "LR", "RR", "RD"];
const BASELINES: [&str; 3] = ["LR", "RR", "RD"];

type Check = Box<dyn Fn() -> Outcome>;

struct Outcome {
    passed: bool,
    detail: String,
}

impl Outcome {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Self {
            passed,
            detail: detail.into(),
        }
    }
}

fn teach() -> Command {
    Command::new(env!("CARGO_BIN_EXE_teach"))
}

fn deck_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../service/decks")
}

fn recall_formula() -> Outcome {
    let cases = [(10.0, 0.99), (5.0, 0.98), (3.0, 0.92), (1.5, 0.78)];
    let mut detail = Vec::new();
    let mut passed = true;
    for (log_h, printed) in cases {
        let g = 2f64.powf(-1.0 / 2f64.powf(log_h));
        let ok = (g - printed).abs() <= 0.005;
        passed &= ok;
        detail.push(format!(
            "2^(-1/2^{log_h}) = {g:.5} vs {printed}{}",
            if ok { "" } else { " (off)" }
        ));
    }
    Outcome::new(passed, detail.join(", "))
}

/// Checks GR against every baseline on both metrics for each grid cell.
fn dominance(table: &ExperimentTable, cells: &[(usize, usize)]) -> (bool, Vec<String>) {
    let mut passed = true;
    let mut misses = Vec::new();
    for &(n, t) in cells {
        for metric in [METRIC_OBJECTIVE, METRIC_RECALL] {
            let gr = table.mean("GR", n, t, metric).expect("GR cell");
            for b in BASELINES {
                let other = table.mean(b, n, t, metric).expect("baseline cell");
                if gr < other {
                    passed = false;
                    misses.push(format!("n={n} T={t} {metric}: GR {gr:.4} < {b} {other:.4}"));
                }
            }
        }
    }
    (passed, misses)
}

fn preset_table(preset: Preset, keep: impl Fn(&ExperimentConfig) -> bool) -> ExperimentTable {
    let base = ExperimentConfig {
        seed: SEED,
        trials: 10,
        recall_offset: 10,
        policies: POLICIES.iter().map(|p| p.to_string()).collect(),
        ..ExperimentConfig::new(20, 40)
    };
    let configs: Vec<_> = preset.configs(&base).into_iter().filter(keep).collect();
    run_sweep(&configs).expect("sweep runs")
}

fn fig4_t_dominance() -> Outcome {
    let horizons = [40, 60, 80];
    let table = preset_table(Preset::Fig4T, |c| horizons.contains(&c.horizon));
    let cells: Vec<_> = horizons.iter().map(|&t| (20, t)).collect();
    let (dominates, mut misses) = dominance(&table, &cells);
    let gap = |t| {
        table.mean("GR", 20, t, METRIC_OBJECTIVE).unwrap()
            - table.mean("RD", 20, t, METRIC_OBJECTIVE).unwrap()
    };
    let (g40, g80) = (gap(40), gap(80));
    let shrinks = g40 > g80;
    if !shrinks {
        misses.push(format!(
            "GR-RD objective gap T=40 {g40:.4} <= T=80 {g80:.4}"
        ));
    }
    let detail = if misses.is_empty() {
        format!("GR dominates at T in {{40,60,80}}; GR-RD gap {g40:.4} (T=40) > {g80:.4} (T=80)")
    } else {
        misses.join("; ")
    };
    Outcome::new(dominates && shrinks, detail)
}

fn fig4_n_dominance() -> Outcome {
    let sizes = [10, 20, 30];
    let table = preset_table(Preset::Fig4N, |c| sizes.contains(&c.n));
    let cells: Vec<_> = sizes.iter().map(|&n| (n, 60)).collect();
    let (dominates, mut misses) = dominance(&table, &cells);
    let gap = |n| {
        table.mean("GR", n, 60, METRIC_OBJECTIVE).unwrap()
            - table.mean("RR", n, 60, METRIC_OBJECTIVE).unwrap()
    };
    let (g10, g30) = (gap(10), gap(30));
    let grows = g30 > g10;
    if !grows {
        misses.push(format!(
            "GR-RR objective gap n=30 {g30:.4} <= n=10 {g10:.4}"
        ));
    }
    let detail = if misses.is_empty() {
        format!("GR dominates at n in {{10,20,30}}; GR-RR gap {g30:.4} (n=30) > {g10:.4} (n=10)")
    } else {
        format!(
            "{}; GR-RR gap n=30 {g30:.4} vs n=10 {g10:.4}",
            misses.join("; ")
        )
    };
    Outcome::new(dominates && grows, detail)
}

fn strength_threshold() -> Outcome {
    let mut passed = true;
    let mut detail = Vec::new();
    for (n, t, eps) in [(3, 9, 0.2), (5, 20, 0.1)] {
        let a = sufficient_strength(n, t, eps).expect("strength");
        let inst =
            TeachingInstance::uniform(n, t, ConceptParams::symmetric(a, 0.0).unwrap()).unwrap();
        let run = rollout_fixed_outcome(&inst, &Policy::greedy(), false).unwrap();
        let f = objective_f(&inst, &run).unwrap();
        let ok = f >= 1.0 - eps;
        passed &= ok;
        detail.push(format!(
            "(n={n}, T={t}, eps={eps}): a={a:.4} f={f:.5} {} {}",
            if ok { ">=" } else { "<" },
            1.0 - eps
        ));
    }
    Outcome::new(passed, detail.join("; "))
}

/// Random outcome-independent instances with n <= 3 and T <= 7.
fn instance_set() -> Vec<TeachingInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    (0..30)
        .map(|_| {
            let n = rng.gen_range(1..=3);
            let t = rng.gen_range(2..=7);
            let params = (0..n)
                .map(|_| {
                    ConceptParams::symmetric(rng.gen_range(0.0..3.0), rng.gen_range(-2.0..2.0))
                        .unwrap()
                })
                .collect();
            TeachingInstance::new(t, params).unwrap()
        })
        .collect()
}

fn oracle_soundness() -> Outcome {
    let instances = instance_set();
    let mut violations = Vec::new();
    let mut worst_margin = f64::INFINITY;
    for (k, inst) in instances.iter().enumerate() {
        let run = rollout_fixed_outcome(inst, &Policy::greedy(), false).unwrap();
        let greedy = objective_f(inst, &run).unwrap();
        let optimum = brute_force_optimal(inst, SearchMode::Deterministic)
            .unwrap()
            .value;
        let ratio = greedy / optimum;
        let (mut gamma, mut omega) = (Vec::new(), Vec::new());
        for t in 0..inst.horizon() {
            gamma.push(exact_gamma(inst, &run.prefix(t)).unwrap());
            omega.push(exact_omega(inst, &run.prefix(t)).unwrap());
        }
        let thm2 = thm2_ratio(&gamma, &omega, inst.horizon()).unwrap();
        let g_min = gamma.iter().copied().fold(f64::INFINITY, f64::min).min(1.0);
        let w_max = omega.iter().copied().fold(0.0, f64::max);
        let cor1 = cor1_ratio(g_min, w_max, inst.horizon()).unwrap().finite;
        worst_margin = worst_margin.min(ratio - thm2.max(cor1));
        if ratio + 1e-12 < thm2 || ratio + 1e-12 < cor1 {
            violations.push(format!(
                "instance {k}: ratio {ratio:.6}, thm2 {thm2:.6}, cor1 {cor1:.6}"
            ));
        }
    }
    let detail = if violations.is_empty() {
        format!(
            "{} instances, 0 violations, smallest margin {worst_margin:.4}",
            instances.len()
        )
    } else {
        violations.join("; ")
    };
    Outcome::new(violations.is_empty(), detail)
}

fn estimator_sandwich() -> Outcome {
    let instances = instance_set();
    let mut violations = Vec::new();
    let mut steps = 0;
    for (k, inst) in instances.iter().enumerate() {
        let run = rollout_fixed_outcome(inst, &Policy::greedy(), false).unwrap();
        for t in 0..inst.horizon() {
            let prefix = run.prefix(t);
            let (ge, gx) = (
                gamma_lower_empirical(inst, &prefix).unwrap(),
                exact_gamma(inst, &prefix).unwrap(),
            );
            let (we, wx) = (
                omega_upper_empirical(inst, &prefix).unwrap(),
                exact_omega(inst, &prefix).unwrap(),
            );
            let gamma_ok = (ge.is_infinite() && gx.is_infinite()) || (ge - gx).abs() <= 1e-9;
            if !gamma_ok {
                violations.push(format!("instance {k} t={t}: gamma {ge} vs {gx}"));
            }
            if we + 1e-9 < wx {
                violations.push(format!("instance {k} t={t}: omega {we} < {wx}"));
            }
            steps += 1;
        }
    }
    let detail = if violations.is_empty() {
        format!("{} instances, {steps} steps, 0 violations", instances.len())
    } else {
        violations.join("; ")
    };
    Outcome::new(violations.is_empty(), detail)
}

fn classical_limit() -> Outcome {
    let limit = cor1_ratio(1.0, 1.0, 40).unwrap().limit;
    let target = 1.0 - (-1f64).exp();
    Outcome::new(
        (limit - target).abs() <= 1e-12,
        format!("limit {limit:.15} vs 1-1/e {target:.15}"),
    )
}

fn sensitivity() -> Outcome {
    let config = SensitivityConfig {
        seed: SEED,
        ..SensitivityConfig::default()
    };
    let table = sensitivity_study(&config).unwrap();
    let mut misses = Vec::new();
    let mut worst: f64 = 0.0;
    for n_easy in 0..=config.max_easy {
        let value = |a: TeacherAssumption| table.cell(a, n_easy).unwrap().objective_mean;
        let best = TeacherAssumption::ALL
            .iter()
            .map(|&a| value(a))
            .fold(f64::NEG_INFINITY, f64::max);
        let shortfall = best - value(TeacherAssumption::Robust);
        worst = worst.max(shortfall);
        if shortfall > 0.05 {
            misses.push(format!("#easy={n_easy}: robust {shortfall:.4} behind"));
        }
    }
    let detail = if misses.is_empty() {
        format!("robust within {worst:.4} of the best teacher in every cell")
    } else {
        misses.join("; ")
    };
    Outcome::new(misses.is_empty(), detail)
}

fn sweep_bytes(jobs: &str) -> Vec<u8> {
    let output = teach()
        .args([
            "--jobs", jobs, "sweep", "--preset", "fig4-n", "--seed", "11", "--trials", "3",
        ])
        .output()
        .expect("teach runs");
    assert!(
        output.status.success(),
        "{}",
        String::from_utf8_lossy(&output.stderr)
    );
    output.stdout
}

fn determinism_and_replay() -> Outcome {
    let first = sweep_bytes("1");
    let second = sweep_bytes("4");
    let identical = !first.is_empty() && first == second;

    let dir = tempfile::tempdir().unwrap();
    let config = || ServiceConfig {
        data_dir: Some(dir.path().to_path_buf()),
        deck_dirs: vec![deck_dir()],
        ..ServiceConfig::default()
    };
    let service = SessionService::new(config()).unwrap();
    let created = service
        .create_session(
            serde_json::from_value(
                json!({"deck_id": "biodiversity", "n": 6, "T": 12, "policy": "RD", "seed": 3}),
            )
            .unwrap(),
        )
        .unwrap();
    let id = created.session.session_id;
    let deck = service.deck("biodiversity").unwrap();
    let answers: HashMap<_, _> = deck
        .cards
        .iter()
        .map(|c| (c.id.clone(), c.answer.clone()))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut replays_match = true;
    for _ in 0..3 {
        while let Some(c) = service.record(id).unwrap().current {
            let card = service.record(id).unwrap().cards[c].card_id.clone();
            let text = if rng.gen_bool(0.5) {
                answers[&card].clone()
            } else {
                String::new()
            };
            let elapsed = rng.gen_range(0..30_000u64);
            service
                .submit_answer(
                    id,
                    serde_json::from_value(
                        json!({"card_id": card, "text": text, "elapsed_ms": elapsed}),
                    )
                    .unwrap(),
                )
                .unwrap();
            replays_match &= service.replay(id).unwrap() == service.record(id).unwrap();
        }
        service.advance(id).unwrap();
        replays_match &= service.replay(id).unwrap() == service.record(id).unwrap();
    }
    let restarted = SessionService::new(config()).unwrap();
    let restart_matches = restarted.record(id).unwrap() == service.record(id).unwrap();
    Outcome::new(
        identical && replays_match && restart_matches,
        format!(
            "sweep CSV {} bytes identical across reruns: {identical}; log replay equals live state after every call: {replays_match}; restart: {restart_matches}",
            first.len()
        ),
    )
}

struct Server {
    child: Child,
    base: String,
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

fn start_server(data_dir: &std::path::Path) -> Server {
    let mut child = teach()
        .args(["serve", "--addr", "127.0.0.1:0", "--decks"])
        .arg(deck_dir())
        .arg("--data-dir")
        .arg(data_dir)
        .stderr(Stdio::piped())
        .spawn()
        .expect("teach serve starts");
    let stderr = child.stderr.take().unwrap();
    let mut lines = BufReader::new(stderr).lines();
    let base = loop {
        let line = lines.next().expect("server reports its address").unwrap();
        if let Some(addr) = line.strip_prefix("listening on ") {
            break addr.to_string();
        }
    };
    std::thread::spawn(move || for _ in lines {});
    Server { child, base }
}

fn service_protocol() -> Result<Outcome, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let server = start_server(dir.path());
    let client = reqwest::blocking::Client::new();
    let url = |path: &str| format!("{}{path}", server.base);
    let send = |req: reqwest::blocking::RequestBuilder| -> Result<Value, String> {
        let resp = req.send().map_err(|e| e.to_string())?;
        let status = resp.status();
        let body: Value = resp.json().map_err(|e| e.to_string())?;
        if status.is_success() {
            Ok(body)
        } else {
            Err(format!("{status}: {body}"))
        }
    };

    let deck = send(client.get(url("/decks/german-basics")))?;
    let answers: HashMap<String, String> = deck["cards"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| {
            (
                c["id"].as_str().unwrap().into(),
                c["answer"].as_str().unwrap().into(),
            )
        })
        .collect();
    let created = send(
        client
            .post(url("/sessions"))
            .json(&json!({"deck_id": "german-basics", "seed": 2024})),
    )?;
    let id = created["session"]["session_id"]
        .as_str()
        .unwrap()
        .to_string();
    let (n, horizon) = (
        created["session"]["n"].as_u64().unwrap(),
        created["session"]["T"].as_u64().unwrap(),
    );

    let mut counts = HashMap::new();
    let mut shown = Vec::new();
    let mut timeout_step = None;
    let mut timeout_graded_incorrect = false;
    let mut step = 0;
    for phase in ["prequiz", "learning", "postquiz"] {
        loop {
            let view = send(client.get(url(&format!("/sessions/{id}"))))?;
            if view["phase"] != phase {
                return Err(format!("expected phase {phase}, got {}", view["phase"]));
            }
            let Some(card) = view["current_card"].as_object() else {
                break;
            };
            let card_id = card["card_id"].as_str().unwrap().to_string();
            let correct_text = answers[&card_id].clone();
            // Learning: recall every third card, and answer step 17 correctly but too late.
            let (text, elapsed) = match phase {
                "learning" => {
                    shown.push(card_id.clone());
                    step += 1;
                    if step == 17 {
                        (correct_text, 25_000)
                    } else if step % 3 == 0 {
                        (correct_text, 4_000)
                    } else {
                        ("keine Ahnung".into(), 6_000)
                    }
                }
                "prequiz" => (
                    if card_id.ends_with(['1', '4']) {
                        correct_text
                    } else {
                        String::new()
                    },
                    3_000,
                ),
                _ => (
                    if card_id.ends_with(['1', '4', '7', '9']) {
                        correct_text
                    } else {
                        String::new()
                    },
                    3_000,
                ),
            };
            let response = send(
                client
                    .post(url(&format!("/sessions/{id}/answers")))
                    .json(&json!({"card_id": card_id, "text": text, "elapsed_ms": elapsed})),
            )?;
            if phase == "learning" && step == 17 {
                timeout_step = Some(16);
                timeout_graded_incorrect =
                    response["timed_out"] == true && response["correct"] == false;
            }
            *counts.entry(phase).or_insert(0u64) += 1;
        }
        send(client.post(url(&format!("/sessions/{id}/advance"))))?;
    }
    let gain = send(client.get(url(&format!("/sessions/{id}/gain"))))?;
    let final_view = send(client.get(url(&format!("/sessions/{id}"))))?;

    let log = std::fs::read_to_string(dir.path().join("sessions").join(format!("{id}.jsonl")))
        .map_err(|e| e.to_string())?;
    let lines: Vec<String> = log.lines().map(String::from).collect();
    let record = SessionRecord::replay(&parse_log(&lines).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let teacher = record.teacher().map_err(|e| e.to_string())?;
    let policy = record.policy();
    let history = &record.history;
    let policy_matches = (0..history.len())
        .all(|t| policy.next(&teacher, &history.prefix(t)).ok() == Some(history.concepts()[t]));
    let logged_cards: Vec<&str> = history
        .concepts()
        .iter()
        .map(|&c| record.cards[c].card_id.as_str())
        .collect();
    let client_saw_logged = logged_cards == shown.iter().map(String::as_str).collect::<Vec<_>>();
    let no_repeats = history.concepts().windows(2).all(|w| w[0] != w[1]);
    let timeout_logged = timeout_step.is_some_and(|t| !history.outcomes()[t]);
    let phases_ok = counts.get("prequiz") == Some(&15)
        && counts.get("learning") == Some(&40)
        && counts.get("postquiz") == Some(&15)
        && (n, horizon) == (15, 40)
        && final_view["phase"] == "done"
        && record.phase == Phase::Done;
    let passed = phases_ok
        && no_repeats
        && timeout_graded_incorrect
        && timeout_logged
        && policy_matches
        && client_saw_logged;
    Ok(Outcome::new(
        passed,
        format!(
            "phases 15/40/15: {phases_ok}; no consecutive repeats: {no_repeats}; timeout graded incorrect: {}; \
             learning sequence equals policy on logged History: {}; average gain {}",
            timeout_graded_incorrect && timeout_logged,
            policy_matches && client_saw_logged,
            gain["average_gain"]
        ),
    ))
}

fn main() -> ExitCode {
    let criteria: Vec<(&str, Check)> = vec![
        ("recall formula fidelity", Box::new(recall_formula)),
        ("fig4-T dominance", Box::new(fig4_t_dominance)),
        ("fig4-n dominance", Box::new(fig4_n_dominance)),
        (
            "sufficient strength threshold",
            Box::new(strength_threshold),
        ),
        ("oracle ratio soundness", Box::new(oracle_soundness)),
        ("bound estimator sandwich", Box::new(estimator_sandwich)),
        ("classical limit", Box::new(classical_limit)),
        ("sensitivity study", Box::new(sensitivity)),
        ("determinism and replay", Box::new(determinism_and_replay)),
        (
            "service protocol fidelity",
            Box::new(|| service_protocol().unwrap_or_else(|e| Outcome::new(false, e))),
        ),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        failed += usize::from(!outcome.passed);
        println!(
            "{} {:>2} {name} [{:.1}s]: {}",
            if outcome.passed { "PASS" } else { "FAIL" },
            k + 1,
            start.elapsed().as_secs_f64(),
            outcome.detail
        );
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
