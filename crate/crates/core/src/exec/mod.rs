//! Script execution: workspaces, runners, score parsing and the time budget.

mod budget;
mod process;
mod scripted;
mod workspace;

use std::path::{Path, PathBuf};
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::score::{Direction, ScoreRecord};

pub use budget::{Budget, Clock, SystemClock, VirtualClock};
pub use process::ProcessRunner;
pub use scripted::{OutcomeKind, ScriptedOutcome, ScriptedRunner};
pub use workspace::Workspace;

/// Exit status reported for processes killed at their deadline (128 + SIGKILL).
pub const FORCED_TERMINATION: i32 = 137;

pub const SCORE_MARKER: &str = "Final Validation Performance: ";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionResult {
    pub stdout: String,
    pub stderr: String,
    pub exit_status: i32,
    pub duration: Duration,
    pub timed_out: bool,
}

impl ExecutionResult {
    pub fn succeeded(&self) -> bool {
        self.exit_status == 0 && !self.timed_out
    }
}

/// A failed run, fed back to the debugger.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BugRecord {
    pub traceback: String,
    pub script: String,
}

impl BugRecord {
    pub fn new(traceback: impl Into<String>, script: impl Into<String>) -> Self {
        let mut traceback = traceback.into();
        if traceback.trim().is_empty() {
            traceback = "process failed without error output".into();
        }
        Self {
            traceback,
            script: script.into(),
        }
    }

    /// Builds the bug report for a failed run.
    pub fn from_result(result: &ExecutionResult, script: &str, timeout: Duration) -> Self {
        if result.timed_out {
            let mut tb = format!(
                "TimeoutError: execution exceeded the time limit of {} seconds and was terminated.",
                timeout.as_secs()
            );
            if !result.stderr.trim().is_empty() {
                tb = format!("{}\n{tb}", result.stderr.trim_end());
            }
            return Self::new(tb, script);
        }
        let tb = if result.stderr.trim().is_empty() {
            format!(
                "Process exited with status {}.\n{}",
                result.exit_status,
                tail(&result.stdout, 40)
            )
        } else {
            result.stderr.clone()
        };
        Self::new(tb, script)
    }
}

fn tail(text: &str, lines: usize) -> String {
    let all: Vec<&str> = text.lines().collect();
    all[all.len().saturating_sub(lines)..].join("\n")
}

/// Finds the last `Final Validation Performance: <number>` line.
pub fn parse_score(stdout: &str, direction: Direction) -> Result<ScoreRecord> {
    let mut last: Option<&str> = None;
    for line in stdout.lines() {
        if let Some(rest) = line.trim_end().strip_prefix(SCORE_MARKER) {
            let token = rest.trim();
            if is_decimal(token) || is_non_finite_word(token) {
                last = Some(token);
            }
        }
    }
    let token = last.ok_or(Error::MissingScore)?;
    if is_non_finite_word(token) {
        return Err(Error::NonFiniteScore(token.to_string()));
    }
    let value: f64 = token
        .parse()
        .map_err(|_| Error::NonFiniteScore(token.to_string()))?;
    ScoreRecord::new(value, direction).map_err(|_| Error::NonFiniteScore(token.to_string()))
}

/// `[+-]digits[.digits][e[+-]digits]`, also `.5` and `5.`.
fn is_decimal(s: &str) -> bool {
    let s = s.strip_prefix(['+', '-']).unwrap_or(s);
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], Some(&s[i + 1..])),
        None => (s, None),
    };
    let (int, frac) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    let digits = |t: &str| t.bytes().all(|b| b.is_ascii_digit());
    let mantissa_ok = digits(int) && digits(frac) && !(int.is_empty() && frac.is_empty());
    let exponent_ok = exponent.is_none_or(|e| {
        let e = e.strip_prefix(['+', '-']).unwrap_or(e);
        !e.is_empty() && digits(e)
    });
    mantissa_ok && exponent_ok
}

fn is_non_finite_word(s: &str) -> bool {
    let s = s.strip_prefix(['+', '-']).unwrap_or(s).to_ascii_lowercase();
    matches!(s.as_str(), "nan" | "inf" | "infinity")
}

/// One execution handed to a runner.
#[derive(Debug, Clone)]
pub struct RunRequest<'a> {
    /// Journal stream that issued the run; scripted runners key on it.
    pub channel: &'a str,
    pub script_path: &'a Path,
    /// Fresh working directory of this execution.
    pub output_dir: &'a Path,
    pub timeout: Duration,
    /// File the script is expected to leave in `output_dir`, if any.
    pub artifact: Option<&'a str>,
}

/// Runs a script file and reports what happened.
pub trait ScriptRunner: Send + Sync {
    fn run(&self, request: &RunRequest<'_>) -> Result<ExecutionResult>;

    /// Called when a journaled execution is replayed instead of run.
    fn skip(&self, _channel: &str) {}
}

/// Counting semaphore bounding concurrent executions.
#[derive(Debug)]
pub struct ExecPool {
    free: Mutex<usize>,
    released: Condvar,
}

pub struct PoolPermit<'a> {
    pool: &'a ExecPool,
}

impl ExecPool {
    pub fn new(size: usize) -> Self {
        Self {
            free: Mutex::new(size.max(1)),
            released: Condvar::new(),
        }
    }

    pub fn acquire(&self) -> PoolPermit<'_> {
        let mut free = self.free.lock().unwrap_or_else(|e| e.into_inner());
        while *free == 0 {
            free = self.released.wait(free).unwrap_or_else(|e| e.into_inner());
        }
        *free -= 1;
        PoolPermit { pool: self }
    }
}

impl Drop for PoolPermit<'_> {
    fn drop(&mut self) {
        let mut free = self.pool.free.lock().unwrap_or_else(|e| e.into_inner());
        *free += 1;
        self.pool.released.notify_one();
    }
}

/// Layout helper for per-execution directories.
pub fn exec_dir_name(channel: &str, index: usize) -> String {
    format!("exec-{channel}-{index:04}")
}

pub(crate) fn script_file(dir: &Path, ext: &str) -> PathBuf {
    dir.join(format!("solution.{ext}"))
}
