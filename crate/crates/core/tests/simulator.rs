use teach_core::simulator::{METRIC_OBJECTIVE, METRIC_RECALL};
use teach_core::{
    objective_f, recall_at, run_experiment, sensitivity_study, sufficient_strength, ConceptParams,
    ExperimentConfig, SensitivityConfig, TeacherAssumption, TeacherModel, TeachingInstance,
};

fn small(seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        trials: 3,
        seed,
        ..ExperimentConfig::new(6, 15)
    }
}

fn csv_of(config: &ExperimentConfig) -> String {
    let mut buf = Vec::new();
    run_experiment(config).unwrap().write_csv(&mut buf).unwrap();
    String::from_utf8(buf).unwrap()
}

#[test]
fn reruns_are_byte_identical() {
    assert_eq!(csv_of(&small(5)), csv_of(&small(5)));
    assert_ne!(csv_of(&small(5)), csv_of(&small(6)));
}

#[test]
fn metrics_replay_from_trajectories() {
    let config = small(11);
    let table = run_experiment(&config).unwrap();
    let truth = TeachingInstance::new(config.horizon, config.learner_params()).unwrap();
    assert_eq!(table.results.len(), 4 * 3);
    for r in &table.results {
        let h = r.history().unwrap();
        assert!((objective_f(&truth, &h).unwrap() - r.objective).abs() < 1e-12);
        assert!((recall_at(&truth, &h, config.recall_offset).unwrap() - r.recall_at).abs() < 1e-12);
    }
}

#[test]
fn shared_streams_give_policies_identical_learner_draws() {
    let shared = small(3);
    assert_eq!(shared.learner_seed(0, 2), shared.learner_seed(3, 2));
    let split = ExperimentConfig {
        shared_learner_streams: false,
        ..small(3)
    };
    assert_ne!(split.learner_seed(0, 2), split.learner_seed(3, 2));
    assert_ne!(csv_of(&shared), csv_of(&split));
}

#[test]
fn summary_has_mean_and_stderr_per_policy_and_metric() {
    let table = run_experiment(&small(1)).unwrap();
    let summary = table.summary();
    assert_eq!(summary.len(), 8);
    let gr = summary
        .iter()
        .find(|r| r.policy == "GR" && r.metric == METRIC_OBJECTIVE)
        .unwrap();
    let values: Vec<f64> = table
        .results
        .iter()
        .filter(|r| r.policy == "GR")
        .map(|r| r.objective)
        .collect();
    let mean = values.iter().sum::<f64>() / 3.0;
    let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 2.0).sqrt();
    assert!((gr.mean - mean).abs() < 1e-15);
    assert!((gr.stderr - sd / 3f64.sqrt()).abs() < 1e-15);
    assert!(summary.iter().any(|r| r.metric == METRIC_RECALL));
    let mut buf = Vec::new();
    table.write_summary_csv(&mut buf).unwrap();
    assert!(String::from_utf8(buf)
        .unwrap()
        .starts_with("policy,n,T,metric,trials,mean,stderr"));
}

#[test]
fn misspecified_teacher_is_scored_under_truth() {
    let config = ExperimentConfig {
        teacher: TeacherModel::Uniform {
            params: ConceptParams::ROBUST,
        },
        policies: vec!["GR".into()],
        ..small(2)
    };
    let table = run_experiment(&config).unwrap();
    let truth = TeachingInstance::new(config.horizon, config.learner_params()).unwrap();
    for r in &table.results {
        let h = r.history().unwrap();
        assert_eq!(objective_f(&truth, &h).unwrap(), r.objective);
    }
}

#[test]
fn strong_symmetric_memory_reaches_the_target() {
    let (n, horizon, eps) = (3, 9, 0.2);
    let a = sufficient_strength(n, horizon, eps).unwrap();
    let config = ExperimentConfig {
        learner_params: Some(vec![ConceptParams::symmetric(a, 0.0).unwrap(); n]),
        policies: vec!["GR".into()],
        trials: 4,
        ..ExperimentConfig::new(n, horizon)
    };
    for r in run_experiment(&config).unwrap().results {
        assert!(r.objective >= 1.0 - eps, "{}", r.objective);
    }
}

#[test]
fn sensitivity_cells_coincide_where_teachers_do() {
    let config = SensitivityConfig {
        n: 4,
        horizon: 12,
        trials: 3,
        max_easy: 4,
        seed: 9,
        ..SensitivityConfig::default()
    };
    let table = sensitivity_study(&config).unwrap();
    assert_eq!(table.cells.len(), 5 * 4);
    let cell = |t, k| table.cell(t, k).unwrap();
    let strip = |c: &teach_core::simulator::SensitivityCell| {
        (
            c.objective_mean,
            c.objective_stderr,
            c.recall_mean,
            c.recall_stderr,
        )
    };
    assert_eq!(
        strip(cell(TeacherAssumption::True, 4)),
        strip(cell(TeacherAssumption::Easy, 4))
    );
    assert_eq!(
        strip(cell(TeacherAssumption::True, 0)),
        strip(cell(TeacherAssumption::Hard, 0))
    );
    let mut buf = Vec::new();
    table.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("teacher,n_easy,metric,mean,stderr"));
    assert_eq!(text.lines().count(), 1 + 2 * 20);
}

#[test]
fn config_file_round_trip() {
    let text = r#"
n = 5
T = 12
s = 4
trials = 2
seed = 77
policies = ["GR", "RD"]
n_easy = 1
no_consecutive_repeat = true
teacher = { kind = "per_concept", params = [[6.0, 2.0, 0.0], [6.0, 2.0, 0.0], [3.0, 1.5, 0.0], [3.0, 1.5, 0.0], [3.0, 1.5, 0.0]] }
"#;
    let config = ExperimentConfig::from_toml(text).unwrap();
    assert_eq!(config.recall_offset, 4);
    assert_eq!(config.learner_params()[0], ConceptParams::EASY);
    assert_eq!(config.learner_params()[1], ConceptParams::HARD);
    let table = run_experiment(&config).unwrap();
    for r in &table.results {
        assert!(r.concepts.windows(2).all(|w| w[0] != w[1]));
    }
    let bad = text.replace("[3.0, 1.5, 0.0]] }", "] }");
    assert!(ExperimentConfig::from_toml(&bad).is_err());
}
