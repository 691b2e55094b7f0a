//! Shared run resources and the per-pipeline session every stage works through.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use crate::config::Config;
use crate::error::{Error, Result};
use crate::exec::{
    exec_dir_name, parse_score, script_file, Budget, BugRecord, ExecPool, ExecutionResult,
    RunRequest, ScriptRunner, Workspace,
};
use crate::journal::{Event, JournalStream, NoteLevel, Phase, Purpose, Verdict};
use crate::llm::{AgentRole, Bindings, Gateway};
use crate::score::ScoreRecord;
use crate::solution::{Solution, SolutionId};
use crate::task::TaskDescription;

/// Everything a run shares between its pipelines.
pub struct Engine {
    pub gateway: Gateway,
    pub runner: Arc<dyn ScriptRunner>,
    pub workspace: Workspace,
    pub pool: ExecPool,
    pub budget: Budget,
    pub task: TaskDescription,
    pub config: Config,
    /// Stop with [`Error::Halted`] at the checkpoint `<channel>:<label>`.
    /// Used to simulate interruptions.
    pub halt_after: Option<String>,
}

/// What a successful execution yielded, depending on its purpose.
#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Scored(ScoreRecord),
    Completed(String),
    Produced(PathBuf),
}

impl Outcome {
    pub fn score(&self) -> Option<ScoreRecord> {
        match self {
            Outcome::Scored(s) => Some(*s),
            _ => None,
        }
    }
}

/// Either what the script produced or why it failed.
pub type Attempt = std::result::Result<Outcome, BugRecord>;

/// One pipeline's view of the engine: its own journal stream, seed,
/// solution ids and leakage cache.
pub struct Session<'e> {
    engine: &'e Engine,
    journal: JournalStream,
    seed: u64,
    next_id: u64,
    leakage_cache: HashMap<String, String>,
    budget_exempt: bool,
}

impl<'e> Session<'e> {
    pub fn new(engine: &'e Engine, journal: JournalStream, seed: u64) -> Self {
        Self {
            engine,
            journal,
            seed,
            next_id: 0,
            leakage_cache: HashMap::new(),
            budget_exempt: false,
        }
    }

    pub fn engine(&self) -> &'e Engine {
        self.engine
    }

    pub fn config(&self) -> &'e Config {
        &self.engine.config
    }

    pub fn task(&self) -> &'e TaskDescription {
        &self.engine.task
    }

    pub fn channel(&self) -> &str {
        self.journal.name()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn journal(&self) -> &JournalStream {
        &self.journal
    }

    pub fn into_journal(self) -> JournalStream {
        self.journal
    }

    pub fn new_id(&mut self) -> SolutionId {
        self.next_id += 1;
        SolutionId::new(format!("{}/{}", self.journal.name(), self.next_id))
    }

    /// Lets every later execution of this session ignore the time budget.
    pub fn exempt_from_budget(&mut self) {
        self.budget_exempt = true;
    }

    fn budgeted(&self, purpose: Purpose) -> bool {
        purpose != Purpose::Submission && !self.budget_exempt
    }

    pub(crate) fn leakage_cache(&mut self) -> &mut HashMap<String, String> {
        &mut self.leakage_cache
    }

    pub fn render(
        &self,
        role: AgentRole,
        variant: Option<&str>,
        bindings: &Bindings,
    ) -> Result<String> {
        self.engine.gateway.render(role, variant, bindings)
    }

    pub fn invoke(&mut self, role: AgentRole, bindings: &Bindings) -> Result<String> {
        let prompt = self.render(role, None, bindings)?;
        self.invoke_prompt(role, &prompt)
    }

    pub fn invoke_prompt(&mut self, role: AgentRole, prompt: &str) -> Result<String> {
        self.engine
            .gateway
            .invoke(&mut self.journal, role, prompt, self.seed)
    }

    /// Invokes and parses, re-prompting on parse failures up to `tries` times.
    pub fn invoke_parsed<T>(
        &mut self,
        role: AgentRole,
        prompt: &str,
        tries: u32,
        parse: impl Fn(&str) -> Result<T>,
    ) -> Result<T> {
        self.engine.gateway.invoke_parsed_prompt(
            &mut self.journal,
            role,
            prompt,
            self.seed,
            tries,
            parse,
        )
    }

    pub fn max_attempts(&self) -> u32 {
        self.engine.gateway.retry().max_attempts.max(1)
    }

    /// Runs a script once. Submission runs, and every run once the session
    /// is exempted, ignore the budget; any other run fails with [`Error::BudgetExhausted`] once it is spent.
    pub fn execute(&mut self, script: &str, purpose: Purpose) -> Result<ExecutionResult> {
        let index = self.journal.count_executions();
        let name = exec_dir_name(self.journal.name(), index);

        if self.journal.replaying_truncation() && self.budgeted(purpose) {
            return Err(Error::BudgetExhausted);
        }
        if let Some(event) = self.journal.replay_execution()? {
            self.engine.runner.skip(self.journal.name());
            let Event::Execution {
                exit_status,
                timed_out,
                duration_ms,
                stdout,
                stderr,
                ..
            } = event
            else {
                unreachable!("replay_execution only yields executions");
            };
            let duration = Duration::from_millis(duration_ms);
            self.engine.budget.carry(duration);
            return Ok(ExecutionResult {
                stdout,
                stderr,
                exit_status,
                duration,
                timed_out,
            });
        }

        let budget = &self.engine.budget;
        let mut timeout = self.config().run.per_exec_timeout();
        if self.budgeted(purpose) {
            if budget.exhausted() {
                return Err(Error::BudgetExhausted);
            }
            timeout = timeout.min(budget.remaining().max(Duration::from_secs(1)));
        }

        let dir = self.engine.workspace.fresh_exec_dir(&name)?;
        let script_path = script_file(&dir, &self.task().script_ext);
        std::fs::write(&script_path, script)
            .map_err(Error::io(format!("writing {}", script_path.display())))?;
        let artifact =
            (purpose == Purpose::Submission).then_some(self.task().submission_name.as_str());
        let request = RunRequest {
            channel: self.journal.name(),
            script_path: &script_path,
            output_dir: &dir,
            timeout,
            artifact,
        };
        let result = {
            let _permit = self.engine.pool.acquire();
            self.engine.runner.run(&request)?
        };
        self.journal.record(Event::Execution {
            exec: name,
            purpose,
            exit_status: result.exit_status,
            timed_out: result.timed_out,
            duration_ms: result.duration.as_millis() as u64,
            stdout: result.stdout.clone(),
            stderr: result.stderr.clone(),
        })?;
        Ok(result)
    }

    /// Runs a script and judges the run according to its purpose.
    pub fn evaluate(&mut self, script: &str, purpose: Purpose) -> Result<Attempt> {
        let exec = exec_dir_name(self.journal.name(), self.journal.count_executions());
        let result = self.execute(script, purpose)?;
        if !result.succeeded() {
            // A timed-out run lasted exactly its (possibly budget-capped) limit.
            return Ok(Err(BugRecord::from_result(
                &result,
                script,
                result.duration,
            )));
        }
        Ok(match purpose {
            Purpose::Solution => match parse_score(&result.stdout, self.task().direction) {
                Ok(score) => {
                    self.journal.record(Event::Score {
                        exec,
                        value: score.value(),
                        direction: score.direction(),
                    })?;
                    Ok(Outcome::Scored(score))
                }
                Err(e) => Err(BugRecord::new(
                    format!(
                        "{e}. The script must print `Final Validation Performance: <number>` \
                         with a finite value as its last score line.\nstdout tail:\n{}",
                        tail(&result.stdout)
                    ),
                    script,
                )),
            },
            Purpose::Ablation => Ok(Outcome::Completed(result.stdout)),
            Purpose::Submission => {
                let path = self
                    .engine
                    .workspace
                    .root()
                    .join(&exec)
                    .join(&self.task().submission_name);
                let written = std::fs::metadata(&path)
                    .map(|m| m.len() > 0)
                    .unwrap_or(false);
                if written {
                    Ok(Outcome::Produced(path))
                } else {
                    Err(BugRecord::new(
                        format!(
                            "The script finished but did not write a non-empty `{}` into its \
                             working directory.",
                            self.task().submission_name
                        ),
                        script,
                    ))
                }
            }
        })
    }

    pub fn decide(
        &mut self,
        phase: Phase,
        verdict: Verdict,
        solution: Option<&SolutionId>,
        score: Option<ScoreRecord>,
        detail: impl Into<String>,
    ) -> Result<()> {
        tracing::debug!(channel = self.journal.name(), ?phase, ?verdict, "decision");
        self.journal.record(Event::Decision {
            phase,
            verdict,
            solution: solution.cloned(),
            score: score.map(|s| s.value()),
            detail: detail.into(),
        })
    }

    pub fn note(&mut self, level: NoteLevel, message: impl Into<String>) -> Result<()> {
        let message = message.into();
        if level == NoteLevel::Warning {
            tracing::warn!(channel = self.journal.name(), "{message}");
        }
        self.journal.record(Event::Note { level, message })
    }

    pub fn record(&mut self, event: Event) -> Result<()> {
        self.journal.record(event)
    }

    /// Journals a resumable point. Fails with [`Error::Halted`] if the run
    /// was asked to stop here.
    pub fn checkpoint(&mut self, label: &str, best: Option<&Solution>) -> Result<()> {
        let replaying = self.journal.is_replaying();
        self.journal.record(Event::Checkpoint {
            label: label.to_string(),
            best: best.map(|s| s.id.clone()),
            best_score: best.and_then(|s| s.score).map(|s| s.value()),
            elapsed_ms: self.engine.budget.elapsed().as_millis() as u64,
        })?;
        let here = format!("{}:{label}", self.journal.name());
        if !replaying && self.engine.halt_after.as_deref() == Some(here.as_str()) {
            return Err(Error::Halted(here));
        }
        Ok(())
    }
}

fn tail(text: &str) -> String {
    let lines: Vec<&str> = text.lines().collect();
    lines[lines.len().saturating_sub(20)..].join("\n")
}
