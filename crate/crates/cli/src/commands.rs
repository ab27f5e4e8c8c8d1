//! Subcommand implementations.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::net::SocketAddr;
use std::path::Path;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use teach_core::simulator::SensitivityConfig;
use teach_core::{
    brute_force_optimal, exact_policy_value, greedy_bound_report, objective_f,
    rollout_fixed_outcome, run_experiment, run_sweep, sensitivity_study, BoundMethod,
    ExperimentConfig, Policy, Preset, SearchMode,
};
use teach_service::{ServiceConfig, SessionService};

use crate::theta::{self, APPENDIX_TOY};
use crate::{Cli, Command, InstanceArgs, RunArgs, ServeArgs};

/// Slack for floating-point noise when comparing a ratio with its certified bound.
const RATIO_TOLERANCE: f64 = 1e-12;

pub fn dispatch(cli: Cli) -> Result<ExitCode> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            bail!("--jobs must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .context("configuring the worker pool")?;
    }
    match cli.command {
        Command::Simulate(run) => simulate(&run),
        Command::Sweep {
            run,
            preset,
            summary,
        } => sweep(&run, preset.as_deref(), summary.as_deref()),
        Command::Sensitivity { run, max_easy } => sensitivity(&run, max_easy),
        Command::Bounds {
            instance,
            preset,
            method,
            out,
        } => bounds(&instance, preset.as_deref(), &method, out.as_deref()),
        Command::Oracle { instance, out } => oracle(&instance, out.as_deref()),
        Command::Serve(args) => serve(&args),
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn report_config(label: &str, config: &impl serde::Serialize, seed: u64) -> Result<()> {
    eprintln!("{label} config: {}", serde_json::to_string(config)?);
    eprintln!("seed: {seed}");
    Ok(())
}

/// Config file (or defaults) with command-line overrides applied.
fn experiment_config(
    run: &RunArgs,
    n: usize,
    horizon: usize,
    trials: usize,
) -> Result<ExperimentConfig> {
    let mut config = match &run.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            ExperimentConfig::from_toml(&text)?
        }
        None => ExperimentConfig {
            trials,
            ..ExperimentConfig::new(n, horizon)
        },
    };
    if let Some(n) = run.n {
        config.n = n;
        if config.n_easy.is_some_and(|k| k > n) {
            config.n_easy = None;
        }
    }
    if let Some(t) = run.horizon {
        config.horizon = t;
    }
    if let Some(s) = run.recall_offset {
        config.recall_offset = s;
    }
    if let Some(k) = run.trials {
        config.trials = k;
    }
    if let Some(seed) = run.seed {
        config.seed = seed;
    }
    if let Some(p) = &run.policies {
        config.policies = p.clone();
    }
    if let Some(out) = &run.out {
        config.output = Some(out.clone());
    }
    config.validate()?;
    Ok(config)
}

fn simulate(run: &RunArgs) -> Result<ExitCode> {
    let config = experiment_config(run, 20, 40, 1)?;
    report_config("simulate", &config, config.seed)?;
    let table = run_experiment(&config)?;
    let mut out = output(config.output.as_deref())?;
    for result in &table.results {
        serde_json::to_writer(&mut out, result)?;
        writeln!(out)?;
    }
    out.flush()?;
    Ok(ExitCode::SUCCESS)
}

fn sweep(run: &RunArgs, preset: Option<&str>, summary: Option<&Path>) -> Result<ExitCode> {
    let base = experiment_config(run, 20, 40, 10)?;
    let configs = match preset {
        Some(name) => {
            if run.n.is_some() || run.horizon.is_some() {
                bail!("--n and --T are fixed by the preset");
            }
            let preset: Preset = name.parse()?;
            eprintln!("preset: {preset}");
            preset.configs(&base)
        }
        None => vec![base.clone()],
    };
    for config in &configs {
        report_config("sweep", config, config.seed)?;
    }
    let table = run_sweep(&configs)?;
    let mut out = output(base.output.as_deref())?;
    table.write_csv(&mut out)?;
    out.flush()?;
    if let Some(path) = summary {
        table.write_summary_csv(
            File::create(path).with_context(|| format!("creating {}", path.display()))?,
        )?;
    }
    Ok(ExitCode::SUCCESS)
}

fn sensitivity(run: &RunArgs, max_easy: Option<usize>) -> Result<ExitCode> {
    if run.policies.is_some() {
        bail!("the sensitivity study always runs the greedy policy");
    }
    let mut config = match &run.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            toml::from_str::<SensitivityConfig>(&text)
                .with_context(|| format!("parsing {}", path.display()))?
        }
        None => SensitivityConfig::default(),
    };
    if let Some(n) = run.n {
        config.n = n;
    }
    if let Some(t) = run.horizon {
        config.horizon = t;
    }
    if let Some(s) = run.recall_offset {
        config.recall_offset = s;
    }
    if let Some(k) = run.trials {
        config.trials = k;
    }
    if let Some(seed) = run.seed {
        config.seed = seed;
    }
    if let Some(m) = max_easy {
        config.max_easy = m;
    }
    report_config("sensitivity", &config, config.seed)?;
    let table = sensitivity_study(&config)?;
    let mut out = output(run.out.as_deref())?;
    table.write_csv(&mut out)?;
    out.flush()?;
    Ok(ExitCode::SUCCESS)
}

fn bounds(
    instance: &InstanceArgs,
    preset: Option<&str>,
    method: &str,
    out: Option<&Path>,
) -> Result<ExitCode> {
    let method = match method {
        "empirical" => BoundMethod::Empirical,
        "exact" => BoundMethod::Exact,
        other => bail!("unknown bound method {other:?}; expected empirical or exact"),
    };
    let theta = match preset {
        Some(APPENDIX_TOY) => {
            if instance.theta.is_some() {
                bail!("--theta is fixed by the preset");
            }
            Some(APPENDIX_TOY)
        }
        Some(other) => bail!("unknown bounds preset {other:?}"),
        None => instance.theta.as_deref(),
    };
    let inst = theta::instance(instance.n, instance.horizon, theta)?;
    eprintln!(
        "bounds config: {{\"n\":{},\"T\":{},\"theta\":{},\"method\":\"{}\"}}",
        inst.n(),
        inst.horizon(),
        serde_json::to_string(inst.params())?,
        method.label()
    );
    let report = greedy_bound_report(&inst, method)?;
    let mut w = output(out)?;
    report.write_csv(&mut w)?;
    w.flush()?;
    eprintln!(
        "thm2 ratio {:.6}, cor1 finite {:.6}, cor1 limit {:.6}",
        report.thm2_ratio, report.cor1_finite_ratio, report.cor1_limit_ratio
    );
    Ok(ExitCode::SUCCESS)
}

fn oracle(instance: &InstanceArgs, out: Option<&Path>) -> Result<ExitCode> {
    let inst = theta::instance(instance.n, instance.horizon, instance.theta.as_deref())?;
    eprintln!(
        "oracle config: {{\"n\":{},\"T\":{},\"theta\":{}}}",
        inst.n(),
        inst.horizon(),
        serde_json::to_string(inst.params())?
    );
    let symmetric = inst.is_outcome_independent();
    let (greedy, optimum) = if symmetric {
        let run = rollout_fixed_outcome(&inst, &Policy::greedy(), false)?;
        (
            objective_f(&inst, &run)?,
            brute_force_optimal(&inst, SearchMode::Deterministic)?,
        )
    } else {
        (
            exact_policy_value(&inst, &Policy::greedy())?,
            brute_force_optimal(&inst, SearchMode::Expectimax)?,
        )
    };
    let ratio = greedy / optimum.value;
    let bound = if symmetric {
        Some(greedy_bound_report(&inst, BoundMethod::Exact)?)
    } else {
        eprintln!("bounds need a == b for every concept; reporting the ratio only");
        None
    };
    let holds = bound.as_ref().is_none_or(|b| {
        ratio + RATIO_TOLERANCE >= b.thm2_ratio && ratio + RATIO_TOLERANCE >= b.cor1_finite_ratio
    });

    let mut w = csv::Writer::from_writer(output(out)?);
    w.write_record([
        "n",
        "T",
        "f_greedy",
        "f_optimal",
        "ratio",
        "thm2_bound",
        "cor1_finite",
        "holds",
    ])?;
    let cell = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    w.write_record([
        inst.n().to_string(),
        inst.horizon().to_string(),
        greedy.to_string(),
        optimum.value.to_string(),
        ratio.to_string(),
        cell(bound.as_ref().map(|b| b.thm2_ratio)),
        cell(bound.as_ref().map(|b| b.cor1_finite_ratio)),
        holds.to_string(),
    ])?;
    w.flush()?;
    if holds {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("greedy ratio {ratio} is below the certified bound");
        Ok(ExitCode::from(2))
    }
}

fn serve(args: &ServeArgs) -> Result<ExitCode> {
    let addr: SocketAddr = args
        .addr
        .parse()
        .with_context(|| format!("listen address {:?}", args.addr))?;
    let config = ServiceConfig {
        data_dir: args.data_dir.clone(),
        deck_dirs: args.deck_dirs.clone(),
        answer_window_ms: args.answer_window_ms,
        review_window_ms: args.review_window_ms,
        prequiz_prior: args.prequiz_prior,
        case_sensitive: args.case_sensitive,
    };
    eprintln!("serve config: {config:?}");
    let service = Arc::new(SessionService::new(config)?);
    eprintln!("decks: {}", service.deck_ids().join(", "));
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(addr).await?;
        eprintln!("listening on http://{}", listener.local_addr()?);
        teach_service::serve_on(service, listener).await
    })?;
    Ok(ExitCode::SUCCESS)
}
