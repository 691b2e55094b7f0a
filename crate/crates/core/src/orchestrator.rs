//! End-to-end runs: parallel lanes (initial solution + refinement), then
//! ensembling and finalization on the main stream. Runs can be resumed
//! from their journal and audited afterwards.

use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::config::Config;
use crate::error::{Error, Result};
use crate::exec::{
    Budget, Clock, ExecPool, ProcessRunner, ScriptRunner, ScriptedRunner, SystemClock, Workspace,
};
use crate::journal::{
    decision_trace, read_events, Event, JournalStream, NoteLevel, Phase, Verdict,
};
use crate::llm::{Gateway, HttpProvider, MockProvider, Provider, TemplateSet};
use crate::scenario::Scenario;
use crate::session::{Engine, Session};
use crate::solution::{Solution, SolutionId};
use crate::task::TaskDescription;
use crate::{ensemble, finalize, init, refine, robustness};

pub const MAIN_STREAM: &str = "main";

/// How to start a run.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub config: Config,
    /// Scenario directory; replaces the model provider (and, if it scripts
    /// executions, the interpreter) with canned behaviour.
    pub mock: Option<PathBuf>,
    /// Stop at the checkpoint `<stream>:<label>`, e.g. `lane-1:step-1`.
    pub halt_after: Option<String>,
}

/// Outcome of a completed run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub run_dir: PathBuf,
    pub solution: SolutionId,
    pub score: Option<f64>,
    pub submission: PathBuf,
}

impl fmt::Display for RunReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "run directory: {}", self.run_dir.display())?;
        match self.score {
            Some(s) => writeln!(
                f,
                "final solution: {} (validation score {s})",
                self.solution
            )?,
            None => writeln!(f, "final solution: {}", self.solution)?,
        }
        write!(f, "submission: {}", self.submission.display())
    }
}

pub fn journal_path(run_dir: &Path, stream: &str) -> PathBuf {
    run_dir.join("journal").join(format!("{stream}.jsonl"))
}

pub fn lane_name(lane: u32) -> String {
    format!("lane-{lane}")
}

fn absolute(path: &Path) -> Result<PathBuf> {
    std::fs::canonicalize(path).map_err(Error::io(format!("resolving {}", path.display())))
}

fn build_engine(
    task_dir: &Path,
    config: &Config,
    mock: Option<&Path>,
    run_dir: &Path,
    halt_after: Option<String>,
    fresh: bool,
) -> Result<Engine> {
    config.validate()?;
    let task = TaskDescription::load(task_dir)?;
    let templates = match &config.prompts_dir {
        Some(dir) => TemplateSet::with_overrides(dir)?,
        None => TemplateSet::bundled(),
    };
    let mut retry = config.retry;
    let process = || -> Result<Arc<dyn ScriptRunner>> {
        Ok(Arc::new(ProcessRunner::new(
            &config.executor.command_prefix,
            &config.executor.interpreter,
        )?))
    };
    let (provider, runner, clock): (Arc<dyn Provider>, Arc<dyn ScriptRunner>, Arc<dyn Clock>) =
        match mock {
            Some(dir) => {
                let scenario = Arc::new(Scenario::load(dir)?);
                // Canned answers never fail transiently.
                retry.backoff_ms = 0;
                let provider = Arc::new(MockProvider::new(scenario.clone()));
                if scenario.has_executions() {
                    let runner = Arc::new(ScriptedRunner::new(scenario));
                    let clock = runner.clock();
                    (provider, runner, clock)
                } else {
                    (provider, process()?, Arc::new(SystemClock::new()))
                }
            }
            None => (
                Arc::new(HttpProvider::from_config(&config.provider)?),
                process()?,
                Arc::new(SystemClock::new()),
            ),
        };
    let workspace = if fresh {
        Workspace::prepare(run_dir, &task.data_root)?
    } else {
        Workspace::open(run_dir)?
    };
    Ok(Engine {
        gateway: Gateway::new(provider, templates, retry),
        runner,
        workspace,
        pool: ExecPool::new(config.executor.pool_size()),
        budget: Budget::new(clock, config.run.total_budget()),
        task,
        config: config.clone(),
        halt_after,
    })
}

/// Starts a new run of the task in `run_dir`.
pub fn run(task_dir: &Path, run_dir: &Path, options: RunOptions) -> Result<RunReport> {
    if journal_path(run_dir, MAIN_STREAM).exists() {
        return Err(Error::InvalidInput(format!(
            "{} already holds a run; resume it instead",
            run_dir.display()
        )));
    }
    options.config.validate()?;
    std::fs::create_dir_all(run_dir)
        .map_err(Error::io(format!("creating {}", run_dir.display())))?;
    let run_dir = &absolute(run_dir)?;
    let task_dir = absolute(task_dir)?;
    let mock = options.mock.as_deref().map(absolute).transpose()?;
    let engine = build_engine(
        &task_dir,
        &options.config,
        mock.as_deref(),
        run_dir,
        options.halt_after,
        true,
    )?;
    let open = |name: &str| JournalStream::create(name, &journal_path(run_dir, name));
    execute(&engine, run_dir, &task_dir, mock, open)
}

/// Continues an interrupted run from its journal. Completed runs are
/// reported without doing any work.
pub fn resume(run_dir: &Path) -> Result<RunReport> {
    resume_with(run_dir, None)
}

/// [`resume`] with an optional new stop point.
pub fn resume_with(run_dir: &Path, halt_after: Option<String>) -> Result<RunReport> {
    let run_dir = absolute(run_dir)?;
    let main_path = journal_path(&run_dir, MAIN_STREAM);
    let events = read_events(&main_path)?;
    let corrupt = |reason: &str| Error::CorruptJournal {
        path: main_path.clone(),
        reason: reason.to_string(),
    };
    let Some(Event::RunStarted {
        config,
        task_dir,
        mock,
        ..
    }) = events.first().cloned()
    else {
        return Err(corrupt("first event is not run_started"));
    };
    if let Some(Event::RunCompleted {
        solution,
        score,
        submission,
    }) = events
        .iter()
        .rev()
        .find(|e| matches!(e, Event::RunCompleted { .. }))
    {
        return Ok(RunReport {
            run_dir,
            solution: solution.clone(),
            score: *score,
            submission: submission.clone(),
        });
    }
    let has_checkpoint = std::iter::once(MAIN_STREAM.to_string())
        .chain((1..=config.run.parallel_solutions).map(lane_name))
        .map(|name| journal_path(&run_dir, &name))
        .filter(|p| p.exists())
        .map(|p| read_events(&p))
        .collect::<Result<Vec<_>>>()?
        .iter()
        .flatten()
        .any(|e| matches!(e, Event::Checkpoint { .. }));
    if !has_checkpoint {
        return Err(corrupt("no checkpoint to resume from"));
    }

    let engine = build_engine(
        &task_dir,
        &config,
        mock.as_deref(),
        &run_dir,
        halt_after,
        false,
    )?;
    let open = |name: &str| JournalStream::resume(name, &journal_path(&run_dir, name));
    execute(&engine, &run_dir, &task_dir, mock, open)
}

fn execute(
    engine: &Engine,
    run_dir: &Path,
    task_dir: &Path,
    mock: Option<PathBuf>,
    open: impl Fn(&str) -> Result<JournalStream> + Sync,
) -> Result<RunReport> {
    let config = &engine.config;
    let lanes = config.run.parallel_solutions;
    let seeds: Vec<u64> = (1..=lanes)
        .map(|l| config.run.seed + u64::from(l))
        .collect();
    let mut main = Session::new(engine, open(MAIN_STREAM)?, config.run.seed);
    main.record(Event::RunStarted {
        config: Box::new(config.clone()),
        task_dir: task_dir.to_path_buf(),
        mock,
        seeds: seeds.clone(),
    })?;

    tracing::info!(lanes, "starting lanes");
    let outcomes: Vec<Result<Option<Solution>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (1..=lanes)
            .zip(&seeds)
            .map(|(lane, &seed)| {
                let open = &open;
                scope.spawn(move || run_lane(engine, lane, seed, open))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| {
                h.join()
                    .unwrap_or_else(|_| Err(Error::Halted("lane panicked".into())))
            })
            .collect()
    });

    let mut finished = Vec::new();
    for outcome in outcomes {
        match outcome {
            Ok(Some(s)) => finished.push(s),
            Ok(None) => {}
            Err(e) => return Err(e),
        }
    }
    if finished.is_empty() {
        return Err(Error::AllCandidatesFailed);
    }

    let best = if finished.len() >= 2 {
        tracing::info!(inputs = finished.len(), "ensembling");
        ensemble::ensemble(&mut main, &finished)?
    } else {
        main.note(NoteLevel::Info, "single solution; ensembling skipped")?;
        finished.remove(0)
    };
    main.checkpoint("ensemble", Some(&best))?;

    tracing::info!("finalizing");
    let submission = finalize::finalize(&mut main, best)?;
    let report = RunReport {
        run_dir: run_dir.to_path_buf(),
        solution: submission.solution.id.clone(),
        score: submission.solution.score.map(|s| s.value()),
        submission: submission.path.clone(),
    };
    main.record(Event::RunCompleted {
        solution: report.solution.clone(),
        score: report.score,
        submission: report.submission.clone(),
    })?;
    Ok(report)
}

/// One lane: initial solution, data-usage check and refinement. `None`
/// when the lane produced no solution; fatal errors abort the run.
fn run_lane(
    engine: &Engine,
    lane: u32,
    seed: u64,
    open: &(impl Fn(&str) -> Result<JournalStream> + Sync),
) -> Result<Option<Solution>> {
    let name = lane_name(lane);
    let mut sess = Session::new(engine, open(&name)?, seed);
    sess.record(Event::LaneStarted { lane, seed })?;
    match lane_body(&mut sess) {
        Ok(solution) => {
            sess.record(Event::LaneFinished {
                lane,
                solution: Box::new(solution.clone()),
            })?;
            tracing::info!(lane, score = ?solution.score.map(|s| s.value()), "lane finished");
            Ok(Some(solution))
        }
        Err(e) if e.is_fatal() => Err(e),
        Err(e) => {
            sess.note(
                NoteLevel::Warning,
                format!("lane produced no solution: {e}"),
            )?;
            Ok(None)
        }
    }
}

fn lane_body(sess: &mut Session<'_>) -> Result<Solution> {
    let s0 = init::generate_initial_solution(sess)?;
    let s0 = match robustness::check_data_usage(sess, s0.clone()) {
        Err(Error::BudgetExhausted) => {
            sess.decide(
                Phase::Budget,
                Verdict::Truncate,
                Some(&s0.id),
                s0.score,
                "data usage",
            )?;
            s0
        }
        other => other?,
    };
    sess.checkpoint("init", Some(&s0))?;
    refine::refine(sess, s0)
}

/// Decision trace and best-score trajectory of one journal stream.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamAudit {
    pub name: String,
    pub trace: Vec<String>,
    /// `(checkpoint label, best score)` in order.
    pub trajectory: Vec<(String, Option<f64>)>,
    pub completed: bool,
}

impl fmt::Display for StreamAudit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "== {}", self.name)?;
        for line in &self.trace {
            writeln!(f, "  {line}")?;
        }
        let steps: Vec<String> = self
            .trajectory
            .iter()
            .map(|(label, s)| match s {
                Some(s) => format!("{label}={s}"),
                None => format!("{label}=-"),
            })
            .collect();
        writeln!(
            f,
            "  best: {}",
            if steps.is_empty() {
                "-".into()
            } else {
                steps.join(" -> ")
            }
        )
    }
}

/// Reads every journal stream of a run.
pub fn audit(run_dir: &Path) -> Result<Vec<StreamAudit>> {
    let dir = run_dir.join("journal");
    let mut names: Vec<String> = std::fs::read_dir(&dir)
        .map_err(Error::io(format!("reading {}", dir.display())))?
        .filter_map(|e| e.ok())
        .filter_map(|e| {
            let path = e.path();
            (path.extension()? == "jsonl")
                .then(|| path.file_stem()?.to_str().map(str::to_string))?
        })
        .collect();
    names.sort_by_key(
        |n| match n.strip_prefix("lane-").and_then(|l| l.parse::<u32>().ok()) {
            Some(l) => (1, l, n.clone()),
            None => (0, 0, n.clone()),
        },
    );
    names
        .into_iter()
        .map(|name| {
            let events = read_events(&journal_path(run_dir, &name))?;
            let trajectory = events
                .iter()
                .filter_map(|e| match e {
                    Event::Checkpoint {
                        label, best_score, ..
                    } => Some((label.clone(), *best_score)),
                    _ => None,
                })
                .collect();
            let completed = events
                .iter()
                .any(|e| matches!(e, Event::RunCompleted { .. } | Event::LaneFinished { .. }));
            Ok(StreamAudit {
                trace: decision_trace(&events),
                trajectory,
                completed,
                name,
            })
        })
        .collect()
}
