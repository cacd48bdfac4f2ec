use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ldp_drift_cli::config::ExperimentConfig;
use ldp_drift_cli::runner::{self, RunExperimentError};

const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;
const EXIT_AUDIT_VIOLATION: u8 = 4;

/// Track evolving statistics under local differential privacy: run the
/// protocols on synthetic data, audit their privacy, validate configs.
#[derive(Parser)]
#[command(name = "ldp-drift", version, arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Config file (line-oriented `key = value`).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override any config key: `--set key=value`, repeatable. Flag names
    /// below are shorthands for the same keys.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    sets: Vec<String>,

    #[arg(long, global = true)]
    protocol: Option<String>,
    #[arg(long, global = true)]
    n: Option<String>,
    #[arg(long, global = true)]
    m: Option<String>,
    #[arg(long = "L", global = true)]
    l_min: Option<String>,
    #[arg(long, global = true)]
    ell: Option<String>,
    #[arg(long = "T", global = true)]
    t_epochs: Option<String>,
    #[arg(long, global = true)]
    epsilon: Option<String>,
    #[arg(long, global = true)]
    delta: Option<String>,
    #[arg(long, global = true)]
    d: Option<String>,
    #[arg(long, global = true)]
    sizes: Option<String>,
    #[arg(long, global = true)]
    seed: Option<String>,
    #[arg(long, global = true)]
    runs: Option<String>,
    #[arg(long, global = true)]
    slack_mode: Option<String>,
    #[arg(long, global = true)]
    output: Option<String>,
    #[arg(long, global = true)]
    mid_epoch_changes: Option<String>,
    #[arg(long, global = true)]
    audit_mode: Option<String>,
    #[arg(long, global = true)]
    audit_pairs: Option<String>,
    #[arg(long, global = true)]
    audit_gate: Option<String>,
    /// Replace the schedule's initial parameters (repeatable).
    #[arg(long, global = true)]
    init: Vec<String>,
    /// Replace the change schedule (repeatable).
    #[arg(long, global = true)]
    change: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured experiment and write per-run + aggregate CSVs.
    Simulate,
    /// Audit privacy: replay a full run, or brute-force a tiny instance.
    Audit,
    /// Validate the config and print every derived constant.
    Validate,
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, String> {
    let text = match &cli.config {
        Some(path) => std::fs::read_to_string(path)
            .map_err(|e| format!("{}: {e}", path.display()))?,
        None => String::new(),
    };
    let mut cfg = ExperimentConfig::parse(&text).map_err(|e| e.to_string())?;

    let mut overrides: Vec<(String, String)> = Vec::new();
    let mut flag = |key: &str, value: &Option<String>| {
        if let Some(v) = value {
            overrides.push((key.to_string(), v.clone()));
        }
    };
    flag("protocol", &cli.protocol);
    flag("n", &cli.n);
    flag("m", &cli.m);
    flag("L", &cli.l_min);
    flag("ell", &cli.ell);
    flag("T", &cli.t_epochs);
    flag("epsilon", &cli.epsilon);
    flag("delta", &cli.delta);
    flag("d", &cli.d);
    flag("sizes", &cli.sizes);
    flag("seed", &cli.seed);
    flag("runs", &cli.runs);
    flag("slack_mode", &cli.slack_mode);
    flag("output", &cli.output);
    flag("mid_epoch_changes", &cli.mid_epoch_changes);
    flag("audit_mode", &cli.audit_mode);
    flag("audit_pairs", &cli.audit_pairs);
    flag("audit_gate", &cli.audit_gate);
    for raw in &cli.sets {
        let (k, v) = raw
            .split_once('=')
            .ok_or_else(|| format!("--set expects KEY=VALUE, got `{raw}`"))?;
        overrides.push((k.trim().to_string(), v.trim().to_string()));
    }
    if !cli.init.is_empty() {
        cfg.init.clear();
        for v in &cli.init {
            overrides.push(("init".into(), v.clone()));
        }
    }
    if !cli.change.is_empty() {
        cfg.changes.clear();
        for v in &cli.change {
            overrides.push(("change".into(), v.clone()));
        }
    }
    for (k, v) in overrides {
        cfg.apply_kv(&k, &v).map_err(|e| e.to_string())?;
    }

    // The only environment hook: a master-seed override.
    if let Ok(seed) = std::env::var("LDP_DRIFT_SEED") {
        cfg.seed = seed
            .parse()
            .map_err(|e| format!("LDP_DRIFT_SEED: bad value `{seed}`: {e}"))?;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match load_config(&cli) {
        Ok(cfg) => cfg,
        Err(msg) => {
            eprintln!("config error:\n{msg}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    match &cli.command {
        Command::Simulate => match runner::run_experiment(&cfg) {
            Ok(summary) => {
                println!("{}", summary.human_line(&cfg));
                ExitCode::SUCCESS
            }
            Err(RunExperimentError::Config(e)) => {
                eprintln!("config error:\n{e}");
                ExitCode::from(EXIT_CONFIG)
            }
            Err(RunExperimentError::Run(e)) => {
                eprintln!("runtime error: {e}");
                ExitCode::from(EXIT_RUNTIME)
            }
        },
        Command::Audit => match runner::run_audit(&cfg) {
            Ok(summary) => {
                println!(
                    "{} checked={} violations={} report={}",
                    summary.max_ratio_line,
                    summary.checked,
                    summary.violations,
                    summary.csv_path.display()
                );
                if summary.violations > 0 {
                    ExitCode::from(EXIT_AUDIT_VIOLATION)
                } else {
                    ExitCode::SUCCESS
                }
            }
            Err(RunExperimentError::Config(e)) => {
                eprintln!("config error:\n{e}");
                ExitCode::from(EXIT_CONFIG)
            }
            Err(RunExperimentError::Run(e)) => {
                eprintln!("runtime error: {e}");
                ExitCode::from(EXIT_RUNTIME)
            }
        },
        Command::Validate => match runner::describe_plan(&cfg) {
            Ok(text) => {
                print!("{text}");
                println!("ok");
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("config error:\n{e}");
                ExitCode::from(EXIT_CONFIG)
            }
        },
    }
}
