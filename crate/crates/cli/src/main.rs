use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context as _;
use chainfair_cli::experiment::{write_regret_csv, write_sweep_csv};
use chainfair_cli::{
    audit_files, run_experiment, run_kwik_bound, sweep, Axis, CliError, ExperimentConfig,
    KwikBoundRequest, LearnerKind,
};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "chainfair",
    version,
    about = "Simulate, sweep and audit fair bandit algorithms"
)]
struct Cli {
    /// Experiment config (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config's master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Maximum number of trials run concurrently (default: one per core).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Overrides the output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every trial of one config.
    Simulate,
    /// Rerun the config for each value of one axis.
    Sweep {
        /// k, d or T.
        #[arg(long)]
        axis: String,
        /// Comma-separated, strictly increasing.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<u64>,
    },
    /// Re-audit a stored trace against its instance file.
    Audit {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        instance: PathBuf,
    },
    /// Feed a KWIK learner a stream and count its abstentions.
    KwikBound {
        /// conjunction_enum, noiseless_linear or bernoulli_mean.
        #[arg(long)]
        learner: String,
        #[arg(long, default_value_t = 1)]
        d: usize,
        #[arg(long, default_value_t = 0.1)]
        epsilon: f64,
        #[arg(long, default_value_t = 0.05)]
        delta: f64,
        #[arg(long)]
        length: Option<usize>,
        /// CSV with columns x,y used instead of a generated stream.
        #[arg(long)]
        sequence: Option<PathBuf>,
    },
}

fn load_config(cli: &Cli) -> anyhow::Result<ExperimentConfig> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config is required for this subcommand".into()))?;
    let mut cfg =
        ExperimentConfig::load(path).with_context(|| format!("loading {}", path.display()))?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    Ok(cfg)
}

fn ensure_dir(dir: &PathBuf) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    Ok(())
}

fn print_json<T: serde::Serialize>(value: &T) -> anyhow::Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match &cli.command {
        Command::Simulate => {
            let cfg = load_config(&cli)?;
            let summary = run_experiment(&cfg, cli.jobs)?;
            let audit = summary.audit();
            print_json(&serde_json::json!({
                "algorithm": summary.algorithm,
                "trials": summary.trials.len(),
                "violated_runs": audit.violated_runs,
                "violation_fraction": audit.violation_fraction,
                "mean_cum_regret": summary.mean_total_regret(),
                "final_round_regret": summary.mean_final_round_regret(),
                "output_dir": cfg.output_dir,
            }))
        }
        Command::Sweep { axis, values } => {
            let cfg = load_config(&cli)?;
            let axis: Axis = axis.parse()?;
            let rows = sweep(&cfg, axis, values, cli.jobs)?;
            ensure_dir(&cfg.output_dir)?;
            let path = cfg.output_dir.join(format!("sweep_{axis}.csv"));
            write_sweep_csv(&path, axis, &rows)?;
            print!(
                "{}",
                std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?
            );
            Ok(())
        }
        Command::Audit { trace, instance } => {
            let audit = audit_files(trace, instance)?;
            if let Some(out) = &cli.out {
                ensure_dir(out)?;
                let run = &audit.summary.run_id;
                write_regret_csv(
                    &out.join(format!("regret_{run}.csv")),
                    &audit
                        .cumulative_regret
                        .iter()
                        .map(|&r| (r, 0.0))
                        .collect::<Vec<_>>(),
                )?;
            }
            print_json(&audit.summary)
        }
        Command::KwikBound {
            learner,
            d,
            epsilon,
            delta,
            length,
            sequence,
        } => {
            let learner: LearnerKind = learner.parse()?;
            let report = run_kwik_bound(&KwikBoundRequest {
                learner,
                d: *d,
                epsilon: *epsilon,
                delta: *delta,
                length: *length,
                seed: cli.seed.unwrap_or(0),
                sequence: sequence.clone(),
            })?;
            print_json(&report)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e.downcast_ref::<CliError>().map_or(2, CliError::exit_code);
            ExitCode::from(code as u8)
        }
    }
}
