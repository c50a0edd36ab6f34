//! Multi-trial experiments, parameter sweeps and standalone audits, with
//! their on-disk outputs.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use chainfair::audit::{audit_fairness, per_round_regret, AuditSummary};
use chainfair::instances::{adversarial_conjunction_sequence, InstanceDump};
use chainfair::io::{read_trace_csv, write_intervals_csv, write_trace_csv};
use chainfair::kwik::{kwik_feedback, kwik_predict, KwikBudget};
use chainfair::{ConjunctionEnum, LearnerState};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Axis, ExperimentConfig, InstanceConfig};
use crate::error::{CliError, Result};
use crate::harness::{run_trial, TrialResult};

/// Compact per-trial record kept after the full trace has been written out.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialSummary {
    pub audit: AuditSummary,
    pub cumulative_regret: Vec<f64>,
    pub final_round_regret: f64,
    pub dont_know_rounds: u64,
}

impl TrialSummary {
    fn from_result(r: &TrialResult) -> Self {
        Self {
            audit: r.report.summary(run_id(r.trial)),
            cumulative_regret: r.cumulative_regret(),
            final_round_regret: r.final_round_regret(),
            dont_know_rounds: r.dont_know_rounds,
        }
    }

    pub fn total_regret(&self) -> f64 {
        self.cumulative_regret.last().copied().unwrap_or(0.0)
    }
}

fn run_id(trial: u64) -> String {
    format!("trial_{trial}")
}

/// Contents of `audit.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditFile {
    pub runs: Vec<AuditSummary>,
    pub violated_runs: usize,
    pub violation_fraction: f64,
}

impl AuditFile {
    pub fn new(runs: Vec<AuditSummary>) -> Self {
        let violated_runs = runs.iter().filter(|r| r.violated).count();
        let violation_fraction = if runs.is_empty() {
            0.0
        } else {
            violated_runs as f64 / runs.len() as f64
        };
        Self {
            runs,
            violated_runs,
            violation_fraction,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSummary {
    pub algorithm: String,
    pub trials: Vec<TrialSummary>,
}

impl ExperimentSummary {
    pub fn audit(&self) -> AuditFile {
        AuditFile::new(self.trials.iter().map(|t| t.audit.clone()).collect())
    }

    pub fn mean_total_regret(&self) -> f64 {
        mean(self.trials.iter().map(TrialSummary::total_regret))
    }

    pub fn mean_final_round_regret(&self) -> f64 {
        mean(self.trials.iter().map(|t| t.final_round_regret))
    }

    pub fn mean_dont_know(&self) -> f64 {
        mean(self.trials.iter().map(|t| t.dont_know_rounds as f64))
    }

    /// Mean and standard error of cumulative regret at every round.
    pub fn regret_curve(&self) -> Vec<(f64, f64)> {
        let n = self.trials.len();
        let horizon = self.trials.first().map_or(0, |t| t.cumulative_regret.len());
        (0..horizon)
            .map(|i| {
                let m = mean(self.trials.iter().map(|t| t.cumulative_regret[i]));
                let se = if n > 1 {
                    let var = self
                        .trials
                        .iter()
                        .map(|t| (t.cumulative_regret[i] - m).powi(2))
                        .sum::<f64>()
                        / (n - 1) as f64;
                    (var / n as f64).sqrt()
                } else {
                    0.0
                };
                (m, se)
            })
            .collect()
    }
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::io(path, e))
}

fn finish(mut w: BufWriter<File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| CliError::io(path, e))
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(chainfair::Error::from)?;
    writeln!(w).map_err(|e| CliError::io(path, e))?;
    finish(w, path)
}

fn write_trial_files(dir: &Path, r: &TrialResult) -> Result<()> {
    let i = r.trial;
    let path = dir.join(format!("trace_{i}.csv"));
    let w = create(&path)?;
    write_trace_csv(w, &r.trace, r.predictions.as_deref())?;
    if let Some(rows) = &r.intervals {
        let path = dir.join(format!("intervals_{i}.csv"));
        write_intervals_csv(create(&path)?, rows)?;
    }
    write_json(&dir.join(format!("instance_{i}.json")), &r.dump)
}

/// Writes `t,mean,stderr` rows of cumulative regret.
pub fn write_regret_csv(path: &Path, curve: &[(f64, f64)]) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| CliError::io(path, e);
    writeln!(w, "t,mean,stderr").map_err(io)?;
    for (i, (m, se)) in curve.iter().enumerate() {
        writeln!(w, "{},{m},{se}", i + 1).map_err(io)?;
    }
    finish(w, path)
}

fn pool(jobs: Option<usize>) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Config(format!("cannot start worker pool: {e}")))
}

fn run_trials(
    cfg: &ExperimentConfig,
    jobs: Option<usize>,
    dir: Option<&Path>,
) -> Result<ExperimentSummary> {
    let algorithm = cfg.validate()?;
    let record = dir.is_some();
    let trials = pool(jobs)?.install(|| {
        (0..cfg.trials)
            .into_par_iter()
            .map(|trial| {
                let r = run_trial(cfg, trial, record)?;
                if let Some(dir) = dir {
                    write_trial_files(dir, &r)?;
                }
                Ok(TrialSummary::from_result(&r))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(ExperimentSummary {
        algorithm: algorithm.name().to_string(),
        trials,
    })
}

/// Runs every trial of `cfg` on up to `jobs` threads and writes results to
/// `cfg.output_dir`. Output is identical whatever the thread count.
pub fn run_experiment(cfg: &ExperimentConfig, jobs: Option<usize>) -> Result<ExperimentSummary> {
    cfg.validate()?;
    let dir = cfg.output_dir.clone();
    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    let summary = run_trials(cfg, jobs, cfg.write_traces.then_some(dir.as_path()))?;
    write_json(&dir.join("audit.json"), &summary.audit())?;
    write_regret_csv(&dir.join("regret.csv"), &summary.regret_curve())?;
    Ok(summary)
}

/// One row of a sweep table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: u64,
    pub mean_cum_regret: f64,
    /// Mean cumulative regret divided by the horizon.
    pub avg_regret: f64,
    /// Mean per-round regret over the last 1% of rounds.
    pub final_round_regret: f64,
    pub violation_fraction: f64,
    /// Mean number of rounds in which some learner abstained.
    pub mean_dont_know: f64,
    /// Abstentions a conjunction learner is forced into on the adversarial sequence.
    pub adversarial_dont_know: Option<u64>,
}

/// Abstentions of a fresh conjunction learner fed the adversarial sequence in `d` variables.
pub fn adversarial_dont_know(d: usize) -> Result<u64> {
    let mut learner = ConjunctionEnum::new(d)?;
    let mut budget = KwikBudget::for_learner(&LearnerState::ConjunctionEnum(learner.clone()));
    for (x, y) in adversarial_conjunction_sequence(d)? {
        if kwik_predict(&learner, &mut budget, &x)?.is_dont_know() {
            kwik_feedback(&mut learner, &x, y)?;
        }
    }
    Ok(budget.dont_know_count())
}

/// Runs `base` once per value of `axis`. Values must be strictly increasing.
pub fn sweep(
    base: &ExperimentConfig,
    axis: Axis,
    values: &[u64],
    jobs: Option<usize>,
) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(CliError::Config("sweep needs at least one value".into()));
    }
    if values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CliError::Config(
            "sweep values must be strictly increasing".into(),
        ));
    }
    values
        .iter()
        .map(|&value| {
            let cfg = base.with_axis(axis, value)?;
            let s = run_trials(&cfg, jobs, None)?;
            let adversarial = match cfg.instance {
                InstanceConfig::Conjunction { d, .. } if (2..=16).contains(&d) => {
                    Some(adversarial_dont_know(d)?)
                }
                _ => None,
            };
            let total = s.mean_total_regret();
            Ok(SweepRow {
                value,
                mean_cum_regret: total,
                avg_regret: total / cfg.horizon as f64,
                final_round_regret: s.mean_final_round_regret(),
                violation_fraction: s.audit().violation_fraction,
                mean_dont_know: s.mean_dont_know(),
                adversarial_dont_know: adversarial,
            })
        })
        .collect()
}

pub fn write_sweep_csv(path: &Path, axis: Axis, rows: &[SweepRow]) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| CliError::io(path, e);
    writeln!(
        w,
        "{axis},mean_cum_regret,avg_regret,final_round_regret,violation_fraction,mean_dont_know,adversarial_dont_know"
    )
    .map_err(io)?;
    for r in rows {
        let adv = r
            .adversarial_dont_know
            .map(|n| n.to_string())
            .unwrap_or_default();
        writeln!(
            w,
            "{},{},{},{},{},{},{adv}",
            r.value,
            r.mean_cum_regret,
            r.avg_regret,
            r.final_round_regret,
            r.violation_fraction,
            r.mean_dont_know
        )
        .map_err(io)?;
    }
    finish(w, path)
}

/// Audit of a trace file against a dumped instance.
#[derive(Clone, Debug, PartialEq)]
pub struct FileAudit {
    pub summary: AuditSummary,
    pub cumulative_regret: Vec<f64>,
}

pub fn audit_files(trace_path: &Path, instance_path: &Path) -> Result<FileAudit> {
    let file = File::open(trace_path).map_err(|e| CliError::io(trace_path, e))?;
    let trace = read_trace_csv(BufReader::new(file))?;
    let file = File::open(instance_path).map_err(|e| CliError::io(instance_path, e))?;
    let dump: InstanceDump =
        serde_json::from_reader(BufReader::new(file)).map_err(chainfair::Error::from)?;
    let instance = dump.to_instance()?;
    let report = audit_fairness(trace.rows(), &instance)?;
    let run = trace_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "trace".into());
    let mut total = 0.0;
    let cumulative_regret = per_round_regret(trace.rows(), &instance)?
        .into_iter()
        .map(|r| {
            total += r;
            total
        })
        .collect();
    Ok(FileAudit {
        summary: report.summary(run),
        cumulative_regret,
    })
}
