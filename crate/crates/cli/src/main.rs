//! Batch entry point: theorem verification suites, regularized solves,
//! gridworld training, perturbation evaluation, adversarial-reward emission
//! and log aggregation.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use robust_entropy::adversary::{
    fig2_boundary, robust_return_closed_form, worst_case_reward, UncertaintySpec,
};
use robust_entropy::grid::{apply_perturbation, build_grid, evaluate, GridSpec, PerturbationSpec};
use robust_entropy::mdp::{Mdp, Policy, RegularizerKind};
use robust_entropy::solver::{solve_regularized_with_report, SolveOptions};
use robust_entropy::train::{sweep_state_temperature, train_rollout_agent, LogEntry, TrainConfig};

use robust_entropy_cli::manifest::Manifest;
use robust_entropy_cli::{verify, with_pool, worker_count};

/// Exit codes: 0 success, 1 verification failure, 2 usage (clap),
/// 3 malformed input, 4 missing file.
const EXIT_VERIFY_FAILED: u8 = 1;
const EXIT_MALFORMED: u8 = 3;
const EXIT_MISSING_FILE: u8 = 4;

#[derive(Parser)]
#[command(name = "robust-entropy", version, about = "Tabular entropy-regularization robustness workbench")]
struct Cli {
    /// Worker threads for fan-out (ROBUST_ENTROPY_WORKERS overrides).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run theorem verification suites (1-5).
    Verify(VerifyArgs),
    /// Solve a regularized objective on an MDP file.
    Solve(SolveArgs),
    /// Train a gridworld agent from a JSON config.
    Train(TrainArgs),
    /// Evaluate a policy against a grid and its perturbations.
    Evaluate(EvaluateArgs),
    /// Emit worst-case rewards or uncertainty-set boundary data.
    Adversary(AdversaryArgs),
    /// Aggregate JSON-lines training logs into a summary CSV.
    Report(ReportArgs),
}

#[derive(Args)]
struct VerifyArgs {
    /// Restrict to one theorem (1-5); all by default.
    #[arg(long)]
    theorem: Option<u8>,
    #[arg(long, default_value_t = 100)]
    instances: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Write the machine-readable JSON report here.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    mdp: PathBuf,
    #[arg(long)]
    reg: RegularizerKind,
    #[arg(long)]
    alpha: f64,
    #[arg(long, default_value_t = 1e-8)]
    tolerance: f64,
    /// Write the solved policy JSON here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    /// JSON config: {"grid": GridSpec, "train": TrainConfig}.
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "train_out")]
    out_dir: PathBuf,
    /// Override seeds (comma-separated); one run per seed.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Run an intrinsic-temperature sweep over these values instead of a
    /// plain training run; writes sweep.csv.
    #[arg(long, value_delimiter = ',')]
    sweep: Option<Vec<f64>>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    policy: PathBuf,
    /// Nominal grid spec JSON.
    #[arg(long)]
    grid: PathBuf,
    /// Optional JSON array of perturbation specs evaluated alongside nominal.
    #[arg(long)]
    perturbations: Option<PathBuf>,
    #[arg(long, default_value_t = 200)]
    episodes: usize,
    #[arg(long, default_value_t = 100)]
    horizon: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value = "evaluation.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct AdversaryArgs {
    #[arg(long)]
    mdp: PathBuf,
    /// Emit boundary polylines for these temperatures (two-state MDPs).
    #[arg(long, value_delimiter = ',')]
    alphas: Option<Vec<f64>>,
    /// Worst-case mode: policy file (uniform if omitted).
    #[arg(long)]
    policy: Option<PathBuf>,
    #[arg(long, default_value = "state")]
    reg: RegularizerKind,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 0.5)]
    epsilon: f64,
    #[arg(long, default_value_t = 64)]
    samples: usize,
    #[arg(long, default_value = "adversary.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// JSON-lines training logs.
    #[arg(long, required = true, num_args = 1..)]
    logs: Vec<PathBuf>,
    #[arg(long, default_value = "summary.csv")]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let workers = worker_count(cli.workers);
    let result = with_pool(workers, || match cli.command {
        Command::Verify(args) => cmd_verify(args),
        Command::Solve(args) => cmd_solve(args),
        Command::Train(args) => cmd_train(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Adversary(args) => cmd_adversary(args),
        Command::Report(args) => cmd_report(args),
    });
    match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            let code = if err.downcast_ref::<std::io::Error>().is_some() {
                EXIT_MISSING_FILE
            } else {
                EXIT_MALFORMED
            };
            ExitCode::from(code)
        }
    }
}

fn read_text(path: &Path) -> anyhow::Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| anyhow::Error::new(e).context(format!("reading {}", path.display())))
}

fn cmd_verify(args: VerifyArgs) -> anyhow::Result<ExitCode> {
    let results = match args.theorem {
        Some(t) => {
            anyhow::ensure!((1..=5).contains(&t), "theorem must be 1-5, got {t}");
            verify::run_theorem(t, args.instances, args.seed)
        }
        None => verify::run_all(args.instances, args.seed),
    };
    for r in &results {
        println!("{}", r.line());
    }
    let all_passed = results.iter().all(|r| r.passed);
    let report_json = serde_json::to_string_pretty(&results)?;
    if let Some(path) = &args.report {
        std::fs::write(path, &report_json)?;
        let config = format!(
            "{{\"theorem\":{:?},\"instances\":{},\"seed\":{}}}",
            args.theorem, args.instances, args.seed
        );
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            Manifest::new("verify", &config, args.seed, vec![path.display().to_string()])
                .write(dir)?;
        }
    }
    if all_passed {
        Ok(ExitCode::SUCCESS)
    } else {
        if args.report.is_none() {
            println!("{report_json}");
        }
        Ok(ExitCode::from(EXIT_VERIFY_FAILED))
    }
}

fn cmd_solve(args: SolveArgs) -> anyhow::Result<ExitCode> {
    let mdp = Mdp::<f64>::from_json(&read_text(&args.mdp)?)?;
    let opts = SolveOptions::new(args.reg, args.alpha).with_tolerance(args.tolerance);
    let (policy, _, report) = solve_regularized_with_report(&mdp, &opts)?;
    println!(
        "objective = {:.12}, certified gap = {:.3e}, iterations = {}",
        report.objective, report.gap, report.iterations
    );
    if let Some(out) = &args.out {
        std::fs::write(out, policy.to_json())?;
        let config = format!(
            "{{\"mdp\":{:?},\"reg\":\"{}\",\"alpha\":{},\"tolerance\":{}}}",
            args.mdp, args.reg.name(), args.alpha, args.tolerance
        );
        if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
            Manifest::new("solve", &config, 0, vec![out.display().to_string()]).write(dir)?;
        }
        println!("policy written to {}", out.display());
    }
    Ok(ExitCode::SUCCESS)
}

#[derive(serde::Deserialize, Serialize)]
struct TrainFile {
    grid: GridSpec<f64>,
    train: TrainConfig<f64>,
}

fn cmd_train(args: TrainArgs) -> anyhow::Result<ExitCode> {
    let config_text = read_text(&args.config)?;
    let file: TrainFile = serde_json::from_str(&config_text)?;
    file.grid.validate_nominal()?;
    std::fs::create_dir_all(&args.out_dir)?;

    if let Some(candidates) = &args.sweep {
        let (chosen, results) = sweep_state_temperature(
            &file.grid,
            &file.train,
            candidates,
            200,
            100,
            0.05,
        )?;
        let path = args.out_dir.join("sweep.csv");
        let mut writer = csv::Writer::from_path(&path)?;
        writer.write_record(["beta", "nominal_success"])?;
        for (beta, success) in &results {
            writer.write_record([beta.to_string(), success.to_string()])?;
        }
        writer.flush()?;
        match chosen {
            Some(beta) => println!("largest non-degrading temperature: {beta}"),
            None => println!("no candidate stayed within the degradation budget"),
        }
        Manifest::new("train-sweep", &config_text, file.train.seed, vec![path.display().to_string()])
            .write(&args.out_dir)?;
        return Ok(ExitCode::SUCCESS);
    }

    let seeds = args.seeds.clone().unwrap_or_else(|| vec![file.train.seed]);
    let mdp = build_grid(&file.grid, file.train.discount)?;
    let features = file.grid.state_features();
    let runs: Vec<anyhow::Result<(u64, Vec<LogEntry<f64>>, Policy<f64>)>> = {
        use rayon::prelude::*;
        seeds
            .par_iter()
            .map(|&seed| {
                let mut config = file.train.clone();
                config.seed = seed;
                let outcome = train_rollout_agent(&mdp, &features, &config)?;
                Ok((seed, outcome.log, outcome.policy))
            })
            .collect()
    };
    let mut outputs = Vec::new();
    for run in runs {
        let (seed, log, policy) = run?;
        let policy_path = args.out_dir.join(format!("policy_{seed}.json"));
        std::fs::write(&policy_path, policy.to_json())?;
        let log_path = args.out_dir.join(format!("log_{seed}.jsonl"));
        let mut lines = String::new();
        for entry in &log {
            lines.push_str(&serde_json::to_string(entry)?);
            lines.push('\n');
        }
        std::fs::write(&log_path, lines)?;
        println!(
            "seed {seed}: final return {:.3}, state entropy {:.3}",
            log.last().map_or(0.0, |e| e.mean_return),
            log.last().map_or(0.0, |e| e.state_entropy),
        );
        outputs.push(policy_path.display().to_string());
        outputs.push(log_path.display().to_string());
    }
    let seed0 = seeds.first().copied().unwrap_or(0);
    let effective = serde_json::to_string(&(&file.train, &file.grid, &seeds))?;
    Manifest::new("train", &effective, seed0, outputs).write(&args.out_dir)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_evaluate(args: EvaluateArgs) -> anyhow::Result<ExitCode> {
    let policy = Policy::<f64>::from_json(&read_text(&args.policy)?)?;
    let grid: GridSpec<f64> = serde_json::from_str(&read_text(&args.grid)?)?;
    grid.validate()?;
    let mut specs = vec![grid.clone()];
    let mut labels = vec!["nominal".to_string()];
    if let Some(path) = &args.perturbations {
        let perts: Vec<PerturbationSpec> = serde_json::from_str(&read_text(path)?)?;
        for (i, pert) in perts.iter().enumerate() {
            specs.push(apply_perturbation(&grid, pert)?);
            labels.push(format!("pert{i}"));
        }
    }
    let report = evaluate(&policy, &specs, args.episodes, args.horizon, args.seed)?;
    let mut writer = csv::Writer::from_path(&args.out)?;
    writer.write_record(["spec_id", "horizon", "success", "ci_low", "ci_high"])?;
    for (label, spec_eval) in labels.iter().zip(&report.per_spec) {
        for (h, &success) in spec_eval.success_by_horizon.iter().enumerate() {
            let hits = (success * args.episodes as f64).round() as usize;
            let (lo, hi) = robust_entropy::grid::wilson_interval::<f64>(hits, args.episodes);
            writer.write_record([
                label.clone(),
                (h + 1).to_string(),
                success.to_string(),
                lo.to_string(),
                hi.to_string(),
            ])?;
        }
        println!(
            "{label}: success {:.3} [{:.3}, {:.3}] at horizon {}",
            spec_eval.success, spec_eval.ci_low, spec_eval.ci_high, args.horizon
        );
    }
    writer.flush()?;
    let config = serde_json::to_string(&(&grid, &labels, args.episodes, args.horizon, args.seed))?;
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        Manifest::new("evaluate", &config, args.seed, vec![args.out.display().to_string()])
            .write(dir)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_adversary(args: AdversaryArgs) -> anyhow::Result<ExitCode> {
    let mdp = Mdp::<f64>::from_json(&read_text(&args.mdp)?)?;
    if let Some(alphas) = &args.alphas {
        anyhow::ensure!(
            mdp.n_states() == 2,
            "boundary emission needs a two-state MDP, got {} states",
            mdp.n_states()
        );
        let policy = match &args.policy {
            Some(path) => Policy::from_json(&read_text(path)?)?,
            None => Policy::uniform(2, mdp.n_actions()),
        };
        let r_pi = mdp.policy_reward(&policy);
        let rows = fig2_boundary([r_pi[0], r_pi[1]], args.epsilon, alphas, args.samples);
        let mut writer = csv::Writer::from_path(&args.out)?;
        writer.write_record(["alpha", "r_tilde_1", "r_tilde_2"])?;
        for row in rows {
            writer.write_record([
                row.alpha.to_string(),
                row.r_tilde_1.to_string(),
                row.r_tilde_2.to_string(),
            ])?;
        }
        writer.flush()?;
        println!("boundary polylines for {} temperatures written to {}", alphas.len(), args.out.display());
    } else {
        let policy = match &args.policy {
            Some(path) => Policy::from_json(&read_text(path)?)?,
            None => Policy::uniform(mdp.n_states(), mdp.n_actions()),
        };
        let spec = UncertaintySpec::new(args.reg, args.alpha, args.epsilon)?;
        let pert = worst_case_reward(&mdp, &policy, &spec)?;
        let robust = robust_return_closed_form(&mdp, &policy, &spec)?;
        let mut writer = csv::Writer::from_path(&args.out)?;
        writer.write_record(["state", "action", "r", "r_tilde", "delta"])?;
        for s in 0..mdp.n_states() {
            for a in 0..mdp.n_actions() {
                writer.write_record([
                    s.to_string(),
                    a.to_string(),
                    mdp.reward()[[s, a]].to_string(),
                    pert.r_tilde[[s, a]].to_string(),
                    pert.delta[[s, a]].to_string(),
                ])?;
            }
        }
        writer.flush()?;
        println!("robust return (closed form) = {robust:.12}");
        println!("worst-case reward written to {}", args.out.display());
    }
    let config = serde_json::to_string(&(
        args.mdp.display().to_string(),
        &args.alphas,
        args.reg.name(),
        args.alpha,
        args.epsilon,
        args.samples,
    ))?;
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        Manifest::new("adversary", &config, 0, vec![args.out.display().to_string()]).write(dir)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_report(args: ReportArgs) -> anyhow::Result<ExitCode> {
    let mut writer = csv::Writer::from_path(&args.out)?;
    writer.write_record([
        "run",
        "updates",
        "final_return",
        "final_state_entropy",
        "final_policy_entropy",
    ])?;
    let mut sorted = args.logs.clone();
    sorted.sort();
    for path in &sorted {
        let text = read_text(path)?;
        let entries: Vec<LogEntry<f64>> = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<Result<_, _>>()?;
        anyhow::ensure!(!entries.is_empty(), "{} has no log entries", path.display());
        let last = entries.last().expect("nonempty");
        writer.write_record([
            path.display().to_string(),
            entries.len().to_string(),
            last.mean_return.to_string(),
            last.state_entropy.to_string(),
            last.policy_entropy.to_string(),
        ])?;
    }
    writer.flush()?;
    println!("summary for {} logs written to {}", sorted.len(), args.out.display());
    Ok(ExitCode::SUCCESS)
}
