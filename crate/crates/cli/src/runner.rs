//! Experiment orchestration and CSV emission.
//!
//! One experiment = `runs` seeded protocol runs (seed, seed+1, ...), each
//! scored against exact ground truth. Every run writes its own CSV; a final
//! aggregate CSV summarizes per-run accuracy and budget usage. Output is
//! deterministic given the config: rerunning produces byte-identical files.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use ldp_drift::audit::{
    brute_force_dp_check, replay_audit, replay_audit_heavy, within_bound, BruteForceConfig,
};
use ldp_drift::bernoulli::run_protocol;
use ldp_drift::heavy::run_heavy_protocol;
use ldp_drift::params::floor_log2;
use ldp_drift::sim::{
    evaluate_heavy_run, evaluate_run, gen_bernoulli_stream, gen_dictionary_stream, EpochReport,
};

use crate::config::{format_float, AuditMode, ExperimentConfig, RunPlan};

/// Failures after the config validated: I/O and oversize audits.
#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] ldp_drift::Error),
}

fn write_file(path: &Path, contents: &str) -> Result<(), RunError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| RunError::Io {
            path: parent.to_path_buf(),
            source: e,
        })?;
    }
    let mut f = fs::File::create(path).map_err(|e| RunError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    f.write_all(contents.as_bytes()).map_err(|e| RunError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

const RUN_HEADER: &str = "epoch,global_update,p_true,p_est_raw,p_est_clamped,error,bound,\
within_bound,changes_so_far,budget_active,votes_cast,estimates_sent";

fn run_csv(reports: &[EpochReport]) -> String {
    let mut out = String::from(RUN_HEADER);
    out.push('\n');
    for r in reports {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.epoch,
            r.global_update,
            format_float(r.true_value),
            format_float(r.est_raw),
            format_float(r.est_clamped),
            format_float(r.error),
            format_float(r.bound),
            r.within_bound,
            r.changes_so_far,
            r.budget_active,
            r.votes_cast,
            r.estimates_sent
        ));
    }
    out
}

/// Per-run aggregate row.
#[derive(Debug, Clone)]
pub struct RunAggregate {
    pub run: usize,
    pub seed: u64,
    pub updates: usize,
    pub budget_active_epochs: usize,
    pub within_bound_budget_active: usize,
    pub max_error: f64,
    pub max_error_budget_active: f64,
    /// Final vote-counter percentiles across users (p50, p90, max).
    pub vote_spend: [f64; 3],
    /// Final estimate-counter percentiles across users (p50, p90, max).
    pub est_spend: [f64; 3],
}

fn percentiles(mut xs: Vec<f64>) -> [f64; 3] {
    xs.sort_by(|a, b| a.total_cmp(b));
    let pick = |q: f64| xs[((xs.len() - 1) as f64 * q).round() as usize];
    [pick(0.5), pick(0.9), xs[xs.len() - 1]]
}

const AGG_HEADER: &str = "run,seed,updates,budget_active_epochs,within_bound_budget_active,\
frac_within_bound_budget_active,max_error,max_error_budget_active,cv_p50,cv_p90,cv_max,\
ce_p50,ce_p90,ce_max";

fn aggregate_csv(rows: &[RunAggregate]) -> String {
    let mut out = String::from(AGG_HEADER);
    out.push('\n');
    for r in rows {
        let frac = if r.budget_active_epochs == 0 {
            1.0
        } else {
            r.within_bound_budget_active as f64 / r.budget_active_epochs as f64
        };
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.run,
            r.seed,
            r.updates,
            r.budget_active_epochs,
            r.within_bound_budget_active,
            format_float(frac),
            format_float(r.max_error),
            format_float(r.max_error_budget_active),
            format_float(r.vote_spend[0]),
            format_float(r.vote_spend[1]),
            format_float(r.vote_spend[2]),
            format_float(r.est_spend[0]),
            format_float(r.est_spend[1]),
            format_float(r.est_spend[2]),
        ));
    }
    out
}

/// Everything an experiment produced, for callers that want more than files.
pub struct ExperimentSummary {
    pub aggregates: Vec<RunAggregate>,
    pub reports_per_run: Vec<Vec<EpochReport>>,
    pub output_dir: PathBuf,
}

impl ExperimentSummary {
    /// The one-line human summary printed after a run.
    pub fn human_line(&self, cfg: &ExperimentConfig) -> String {
        let runs = self.aggregates.len();
        let ok = self
            .aggregates
            .iter()
            .filter(|a| a.within_bound_budget_active == a.budget_active_epochs)
            .count();
        let max_err = self
            .aggregates
            .iter()
            .map(|a| a.max_error)
            .fold(0.0f64, f64::max);
        let mean_updates =
            self.aggregates.iter().map(|a| a.updates as f64).sum::<f64>() / runs.max(1) as f64;
        format!(
            "protocol={} runs={} epochs={} mean_updates={:.2} max_error={:.4} runs_within_bound={}/{}",
            cfg.protocol, runs, cfg.epochs, mean_updates, max_err, ok, runs
        )
    }
}

fn aggregate(run: usize, seed: u64, reports: &[EpochReport], cv: Vec<f64>, ce: Vec<f64>) -> RunAggregate {
    let budget_active: Vec<&EpochReport> = reports.iter().filter(|r| r.budget_active).collect();
    RunAggregate {
        run,
        seed,
        updates: reports.iter().filter(|r| r.global_update).count(),
        budget_active_epochs: budget_active.len(),
        within_bound_budget_active: budget_active.iter().filter(|r| r.within_bound).count(),
        max_error: reports.iter().map(|r| r.error).fold(0.0, f64::max),
        max_error_budget_active: budget_active.iter().map(|r| r.error).fold(0.0, f64::max),
        vote_spend: percentiles(cv),
        est_spend: percentiles(ce),
    }
}

/// Execute the configured number of seeded runs, writing one CSV per run
/// plus the aggregate CSV.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentSummary, RunExperimentError> {
    let plan = cfg.build().map_err(RunExperimentError::Config)?;
    let out_dir = PathBuf::from(&cfg.output);
    let mut aggregates = Vec::with_capacity(cfg.runs);
    let mut reports_per_run = Vec::with_capacity(cfg.runs);
    for run in 0..cfg.runs {
        let master = cfg.seed.wrapping_add(run as u64);
        let (reports, cv, ce) = match &plan {
            RunPlan::Bernoulli(p) => {
                let (data, truth) =
                    gen_bernoulli_stream(p.model.clone(), p.schedule.clone(), master)
                        .map_err(|e| RunExperimentError::Run(e.into()))?;
                let (transcript, users, _) =
                    run_protocol(&p.params, &p.levels, cfg.slack_mode, &data, master);
                let reports = evaluate_run(&transcript, &truth, &p.params, &p.budget);
                let cv = users.iter().map(|u| u.vote_spent()).collect();
                let ce = users.iter().map(|u| u.est_spent()).collect();
                (reports, cv, ce)
            }
            RunPlan::Heavy(p) => {
                let dict = p.params.dict_size.expect("heavy plan has a dictionary");
                let (data, truth) =
                    gen_dictionary_stream(p.model.clone(), p.schedule.clone(), dict, master)
                        .map_err(|e| RunExperimentError::Run(e.into()))?;
                let (transcript, users, _, proj) =
                    run_heavy_protocol(&p.params, &p.levels, cfg.slack_mode, &data, master);
                let reports =
                    evaluate_heavy_run(&transcript, &proj, &truth, &p.params, &p.levels, &p.budget);
                let cv = users.iter().map(|u| u.vote_spent()).collect();
                let ce = users.iter().map(|u| u.est_spent()).collect();
                (reports, cv, ce)
            }
        };
        write_file(&out_dir.join(format!("run_{run:03}.csv")), &run_csv(&reports))
            .map_err(RunExperimentError::Run)?;
        aggregates.push(aggregate(run, master, &reports, cv, ce));
        reports_per_run.push(reports);
    }
    write_file(&out_dir.join("aggregate.csv"), &aggregate_csv(&aggregates))
        .map_err(RunExperimentError::Run)?;
    Ok(ExperimentSummary {
        aggregates,
        reports_per_run,
        output_dir: out_dir,
    })
}

/// Distinguishes "bad config" from "failed while running" for exit codes.
#[derive(Debug, thiserror::Error)]
pub enum RunExperimentError {
    #[error("{0}")]
    Config(crate::config::ConfigErrors),
    #[error(transparent)]
    Run(#[from] RunError),
}

/// Audit outcome: rows already serialized, plus the violation count.
pub struct AuditSummary {
    pub violations: usize,
    pub checked: usize,
    pub max_ratio_line: String,
    pub csv_path: PathBuf,
}

/// Noise levels the tiny brute-force grid sweeps: a boundary pair spending
/// the whole per-role budget in one shot, and an uneven pair allowing
/// multiple participations.
fn brute_force_noise_grid(epsilon: f64) -> Vec<(f64, f64)> {
    vec![(epsilon / 4.0, epsilon / 4.0), (epsilon / 6.0, epsilon / 10.0)]
}

fn tiny_ladder(epochs: usize) -> Vec<f64> {
    (0..floor_log2(epochs) + 2).map(|i| 0.4 * i as f64).collect()
}

/// Run the configured audit. Replay mode replays one full run of the
/// configured protocol against random adjacent input pairs; brute mode
/// enumerates the privacy definition on the tiny configured instance.
pub fn run_audit(cfg: &ExperimentConfig) -> Result<AuditSummary, RunExperimentError> {
    let out_dir = PathBuf::from(&cfg.output);
    let csv_path = out_dir.join("audit.csv");
    match cfg.audit_mode {
        AuditMode::Replay => {
            let plan = cfg.build().map_err(RunExperimentError::Config)?;
            let master = cfg.seed;
            let report = match &plan {
                RunPlan::Bernoulli(p) => {
                    let (data, _) =
                        gen_bernoulli_stream(p.model.clone(), p.schedule.clone(), master)
                            .map_err(|e| RunExperimentError::Run(e.into()))?;
                    let (transcript, _, _) =
                        run_protocol(&p.params, &p.levels, cfg.slack_mode, &data, master);
                    replay_audit(&transcript, &p.params, &p.levels, cfg.audit_pairs, master)
                        .map_err(|e| RunExperimentError::Run(e.into()))?
                }
                RunPlan::Heavy(p) => {
                    let dict = p.params.dict_size.expect("heavy plan has a dictionary");
                    let (data, _) =
                        gen_dictionary_stream(p.model.clone(), p.schedule.clone(), dict, master)
                            .map_err(|e| RunExperimentError::Run(e.into()))?;
                    let (transcript, _, _, proj) =
                        run_heavy_protocol(&p.params, &p.levels, cfg.slack_mode, &data, master);
                    replay_audit_heavy(
                        &transcript,
                        &proj,
                        &p.params,
                        &p.levels,
                        cfg.audit_pairs,
                        master,
                    )
                    .map_err(|e| RunExperimentError::Run(e.into()))?
                }
            };
            let mut out = String::from("user,max_log_ratio,epsilon,ok\n");
            let mut violations = 0usize;
            for (user, &lr) in report.per_user_max.iter().enumerate() {
                let ok = within_bound(lr, cfg.epsilon, 16.0);
                violations += !ok as usize;
                out.push_str(&format!(
                    "{user},{},{},{}\n",
                    format_float(lr),
                    format_float(cfg.epsilon),
                    ok
                ));
            }
            write_file(&csv_path, &out).map_err(RunExperimentError::Run)?;
            Ok(AuditSummary {
                violations,
                checked: report.per_user_max.len(),
                max_ratio_line: format!(
                    "replay max_log_ratio={} epsilon={}",
                    format_float(report.global_max),
                    format_float(cfg.epsilon)
                ),
                csv_path,
            })
        }
        AuditMode::Brute => {
            let mut out = String::from("n,T,ell,epsilon,a,b,gate,max_ratio,bound,ok\n");
            let mut violations = 0usize;
            let mut checked = 0usize;
            let mut worst = 0.0f64;
            for (a, b) in brute_force_noise_grid(cfg.epsilon) {
                let bf = BruteForceConfig {
                    users: cfg.users,
                    epochs: cfg.epochs,
                    epoch_len: cfg.epoch_len,
                    epsilon: cfg.epsilon,
                    vote_noise: a,
                    est_noise: b,
                    thresholds: tiny_ladder(cfg.epochs),
                    budget_gate: !cfg.audit_gate_disabled,
                };
                let report = brute_force_dp_check(&bf).map_err(|e| {
                    RunExperimentError::Run(RunError::Core(e))
                })?;
                violations += !report.ok as usize;
                checked += 1;
                worst = worst.max(report.max_ratio);
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{},{}\n",
                    cfg.users,
                    cfg.epochs,
                    cfg.epoch_len,
                    format_float(cfg.epsilon),
                    format_float(a),
                    format_float(b),
                    if cfg.audit_gate_disabled { "disabled" } else { "enforced" },
                    format_float(report.max_ratio),
                    format_float(report.bound),
                    report.ok
                ));
            }
            write_file(&csv_path, &out).map_err(RunExperimentError::Run)?;
            Ok(AuditSummary {
                violations,
                checked,
                max_ratio_line: format!(
                    "brute max_ratio={} bound={}",
                    format_float(worst),
                    format_float(cfg.epsilon.exp())
                ),
                csv_path,
            })
        }
    }
}

/// Text block the `validate` subcommand prints: every derived constant.
pub fn describe_plan(cfg: &ExperimentConfig) -> Result<String, ConfigDescribeError> {
    let plan = cfg.build().map_err(ConfigDescribeError)?;
    let mut out = String::new();
    let (params, levels, budget) = match &plan {
        RunPlan::Bernoulli(p) => (&p.params, &p.levels, &p.budget),
        RunPlan::Heavy(p) => (&p.params, &p.levels, &p.budget),
    };
    out.push_str(&format!("protocol = {}\n", cfg.protocol));
    out.push_str(&format!("vote_noise_a = {}\n", format_float(levels.vote_noise)));
    out.push_str(&format!("estimate_noise_b = {}\n", format_float(levels.est_noise)));
    let ladder: Vec<String> = levels.thresholds.iter().map(|t| format_float(*t)).collect();
    out.push_str(&format!("thresholds = {}\n", ladder.join(",")));
    if let Some(w) = levels.hash_width {
        out.push_str(&format!("hash_width_w = {w}\n"));
    }
    out.push_str(&format!(
        "assumption_min_L = {}\n",
        format_float(params.assumption_min_group())
    ));
    out.push_str(&format!("change_budget = {}\n", format_float(budget.max_changes)));
    out.push_str(&format!(
        "change_budget_theorem_floor = {}\n",
        format_float(budget.theorem_floor)
    ));
    let bound = match &plan {
        RunPlan::Bernoulli(p) => ldp_drift::params::accuracy_bound_bernoulli(&p.params),
        RunPlan::Heavy(p) => ldp_drift::params::accuracy_bound_heavy(
            &p.params,
            p.levels.hash_width.expect("heavy has a width"),
        ),
    };
    out.push_str(&format!("accuracy_bound = {}\n", format_float(bound)));
    Ok(out)
}

/// Wrapper so `validate` failures map to the config exit code.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct ConfigDescribeError(pub crate::config::ConfigErrors);
