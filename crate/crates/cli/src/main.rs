use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use blocksmith_core::config::{Config, RunConfig};
use blocksmith_core::orchestrator::{self, RunOptions, RunReport};
use blocksmith_core::Error;

#[derive(Parser)]
#[command(
    name = "blocksmith",
    version,
    about = "Search for ML solution scripts with LLM agents"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Start a new run on a task directory.
    Run {
        task_dir: PathBuf,
        /// Config file (TOML).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Scenario directory with canned agent answers; no provider is contacted.
        #[arg(long)]
        mock: Option<PathBuf>,
        /// Run directory. Defaults to `runs/<task>-<unix time>`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
        /// Stop after a checkpoint, e.g. `lane-1:step-1`.
        #[arg(long, hide = true)]
        halt_after: Option<String>,
    },
    /// Continue an interrupted run.
    Resume {
        run_dir: PathBuf,
        #[arg(long, hide = true)]
        halt_after: Option<String>,
    },
    /// Print each journal stream's decisions and best-score trajectory.
    Audit { run_dir: PathBuf },
}

/// Flags that take precedence over the config file.
#[derive(Args, Default)]
struct Overrides {
    /// Models retrieved and tried as initial candidates.
    #[arg(long)]
    num_candidates: Option<u32>,
    /// Code blocks refined per lane.
    #[arg(long)]
    outer_steps: Option<u32>,
    /// Plans tried per code block.
    #[arg(long)]
    inner_steps: Option<u32>,
    /// Independent lanes run in parallel.
    #[arg(long)]
    parallel_solutions: Option<u32>,
    #[arg(long)]
    ensemble_rounds: Option<u32>,
    #[arg(long)]
    max_debug_rounds: Option<u32>,
    /// Per-execution timeout in seconds.
    #[arg(long, value_name = "SECS")]
    exec_timeout: Option<u64>,
    /// Total search budget in seconds.
    #[arg(long, value_name = "SECS")]
    budget: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
}

impl Overrides {
    fn apply(&self, run: &mut RunConfig) {
        let set = |slot: &mut u32, v: Option<u32>| {
            if let Some(v) = v {
                *slot = v;
            }
        };
        set(&mut run.num_candidates, self.num_candidates);
        set(&mut run.outer_steps, self.outer_steps);
        set(&mut run.inner_steps, self.inner_steps);
        set(&mut run.parallel_solutions, self.parallel_solutions);
        set(&mut run.ensemble_rounds, self.ensemble_rounds);
        set(&mut run.max_debug_rounds, self.max_debug_rounds);
        if let Some(v) = self.exec_timeout {
            run.per_exec_timeout_secs = v;
        }
        if let Some(v) = self.budget {
            run.total_budget_secs = v;
        }
        if let Some(v) = self.seed {
            run.seed = v;
        }
    }
}

fn default_run_dir(task_dir: &Path) -> PathBuf {
    let task = task_dir
        .canonicalize()
        .ok()
        .and_then(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
        .unwrap_or_else(|| "task".into());
    let now = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs());
    PathBuf::from("runs").join(format!("{task}-{now}"))
}

fn load_config(path: Option<&Path>, overrides: &Overrides) -> anyhow::Result<Config> {
    let mut config = match path {
        Some(p) => Config::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => Config::default(),
    };
    overrides.apply(&mut config.run);
    config.validate()?;
    Ok(config)
}

fn finish(result: blocksmith_core::Result<RunReport>, run_dir: &Path) -> ExitCode {
    match result {
        Ok(report) => {
            println!("{report}");
            if report.submission.is_file() {
                ExitCode::SUCCESS
            } else {
                eprintln!(
                    "error: submission {} is missing",
                    report.submission.display()
                );
                ExitCode::FAILURE
            }
        }
        Err(Error::Halted(at)) => {
            eprintln!(
                "halted after {at}; continue with `blocksmith resume {}`",
                run_dir.display()
            );
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn main() -> anyhow::Result<ExitCode> {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info")),
        )
        .with_writer(std::io::stderr)
        .init();

    let cli = Cli::parse();
    Ok(match cli.command {
        Command::Run {
            task_dir,
            config,
            mock,
            out,
            overrides,
            halt_after,
        } => {
            let config = load_config(config.as_deref(), &overrides)?;
            let run_dir = out.unwrap_or_else(|| default_run_dir(&task_dir));
            let options = RunOptions {
                config,
                mock,
                halt_after,
            };
            finish(orchestrator::run(&task_dir, &run_dir, options), &run_dir)
        }
        Command::Resume {
            run_dir,
            halt_after,
        } => finish(orchestrator::resume_with(&run_dir, halt_after), &run_dir),
        Command::Audit { run_dir } => {
            for stream in orchestrator::audit(&run_dir)? {
                print!("{stream}");
            }
            ExitCode::SUCCESS
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_values() {
        let cli = Cli::try_parse_from([
            "blocksmith",
            "run",
            "task",
            "--outer-steps",
            "2",
            "--budget",
            "600",
        ])
        .unwrap();
        let Command::Run { overrides, .. } = cli.command else {
            panic!("not a run command");
        };
        let mut run = RunConfig::default();
        overrides.apply(&mut run);
        assert_eq!(run.outer_steps, 2);
        assert_eq!(run.total_budget_secs, 600);
        assert_eq!(run.inner_steps, RunConfig::default().inner_steps);
    }

    #[test]
    fn invalid_override_is_rejected() {
        let overrides = Overrides {
            parallel_solutions: Some(0),
            ..Default::default()
        };
        assert!(load_config(None, &overrides).is_err());
    }
}
