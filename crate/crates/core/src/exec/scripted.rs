use std::collections::HashMap;
use std::str::FromStr;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use crate::error::{Error, Result};
use crate::scenario::Scenario;

use super::{
    ExecutionResult, RunRequest, ScriptRunner, VirtualClock, FORCED_TERMINATION, SCORE_MARKER,
};

#[derive(Debug, Clone, PartialEq)]
pub enum OutcomeKind {
    /// Exit 0, printing the score marker line.
    Score(f64),
    /// Exit 0 with the given stdout.
    Output(String),
    /// Exit 1 with a Python-style traceback ending in the message.
    Crash(String),
    /// Exit 0 with no output.
    Silent,
    /// Exit 0 after writing the requested artifact.
    Submit,
    Timeout,
}

/// One scripted execution result, written as a line such as
/// `score 0.92`, `+30s crash KeyError: 'age'`, `output a\nb`, `submit`,
/// `silent` or `timeout`. The optional `+<secs>s` prefix sets the
/// duration charged to the virtual clock (default one second).
#[derive(Debug, Clone, PartialEq)]
pub struct ScriptedOutcome {
    pub duration: Duration,
    pub kind: OutcomeKind,
}

impl ScriptedOutcome {
    pub fn new(kind: OutcomeKind) -> Self {
        Self {
            duration: Duration::from_secs(1),
            kind,
        }
    }

    pub fn score(value: f64) -> Self {
        Self::new(OutcomeKind::Score(value))
    }

    pub fn crash(message: &str) -> Self {
        Self::new(OutcomeKind::Crash(message.into()))
    }

    pub fn taking(mut self, duration: Duration) -> Self {
        self.duration = duration;
        self
    }
}

impl FromStr for ScriptedOutcome {
    type Err = Error;

    fn from_str(line: &str) -> Result<Self> {
        let bad = || Error::InvalidInput(format!("bad scripted outcome `{line}`"));
        let mut rest = line.trim();
        let mut duration = Duration::from_secs(1);
        if let Some(stripped) = rest.strip_prefix('+') {
            let (head, tail) = stripped.split_once(char::is_whitespace).ok_or_else(bad)?;
            let secs: f64 = head
                .strip_suffix('s')
                .ok_or_else(bad)?
                .parse()
                .map_err(|_| bad())?;
            duration = Duration::try_from_secs_f64(secs).map_err(|_| bad())?;
            rest = tail.trim_start();
        }
        let (word, arg) = match rest.split_once(char::is_whitespace) {
            Some((w, a)) => (w, a.trim()),
            None => (rest, ""),
        };
        let kind = match word {
            "score" => OutcomeKind::Score(arg.parse().map_err(|_| bad())?),
            "output" => OutcomeKind::Output(arg.replace("\\n", "\n")),
            "crash" => OutcomeKind::Crash(arg.to_string()),
            "silent" => OutcomeKind::Silent,
            "submit" => OutcomeKind::Submit,
            "timeout" => OutcomeKind::Timeout,
            _ => return Err(bad()),
        };
        Ok(Self { duration, kind })
    }
}

/// Replays scripted outcomes in order, per journal channel, without running
/// anything. Each run still gets `stdout.txt` / `stderr.txt` written.
#[derive(Debug)]
pub struct ScriptedRunner {
    scenario: Arc<Scenario>,
    cursors: Mutex<HashMap<String, usize>>,
    clock: Arc<VirtualClock>,
}

impl ScriptedRunner {
    pub fn new(scenario: Arc<Scenario>) -> Self {
        Self {
            scenario,
            cursors: Mutex::new(HashMap::new()),
            clock: Arc::new(VirtualClock::new()),
        }
    }

    /// Clock advanced by every scripted duration.
    pub fn clock(&self) -> Arc<VirtualClock> {
        self.clock.clone()
    }

    fn next(&self, channel: &str) -> Option<ScriptedOutcome> {
        let mut cursors = self.cursors.lock().unwrap_or_else(|e| e.into_inner());
        let cursor = cursors.entry(channel.to_string()).or_default();
        let outcome = self.scenario.outcome_at(channel, *cursor).cloned();
        *cursor += 1;
        outcome
    }
}

impl ScriptRunner for ScriptedRunner {
    fn run(&self, request: &RunRequest<'_>) -> Result<ExecutionResult> {
        let outcome = self.next(request.channel).ok_or_else(|| {
            Error::SpawnFailure(format!(
                "no scripted outcome left on channel {}",
                request.channel
            ))
        })?;
        // Outcomes that would outlast the timeout are cut short.
        let kind = if outcome.duration > request.timeout {
            OutcomeKind::Timeout
        } else {
            outcome.kind
        };
        let mut result = ExecutionResult {
            stdout: String::new(),
            stderr: String::new(),
            exit_status: 0,
            duration: outcome.duration,
            timed_out: false,
        };
        match kind {
            OutcomeKind::Score(v) => result.stdout = format!("{SCORE_MARKER}{v}\n"),
            OutcomeKind::Output(text) => result.stdout = text,
            OutcomeKind::Crash(message) => {
                result.exit_status = 1;
                result.stderr = format!(
                    "Traceback (most recent call last):\n  File \"{}\", line 1, in <module>\n{message}\n",
                    request.script_path.display()
                );
            }
            OutcomeKind::Silent => {}
            OutcomeKind::Submit => {
                if let Some(name) = request.artifact {
                    let path = request.output_dir.join(name);
                    std::fs::write(&path, "id,prediction\n0,0\n")
                        .map_err(Error::io(format!("writing {}", path.display())))?;
                }
            }
            OutcomeKind::Timeout => {
                result.exit_status = FORCED_TERMINATION;
                result.timed_out = true;
                result.duration = request.timeout;
            }
        }
        self.clock.advance(result.duration);
        for (name, text) in [
            ("stdout.txt", &result.stdout),
            ("stderr.txt", &result.stderr),
        ] {
            let path = request.output_dir.join(name);
            std::fs::write(&path, text)
                .map_err(Error::io(format!("writing {}", path.display())))?;
        }
        Ok(result)
    }

    fn skip(&self, channel: &str) {
        let _ = self.next(channel);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Clock;

    #[test]
    fn parses_outcome_lines() {
        assert_eq!(
            "score 0.92".parse::<ScriptedOutcome>().unwrap(),
            ScriptedOutcome::score(0.92)
        );
        let o: ScriptedOutcome = "+30s crash KeyError: 'age'".parse().unwrap();
        assert_eq!(o.duration, Duration::from_secs(30));
        assert_eq!(o.kind, OutcomeKind::Crash("KeyError: 'age'".into()));
        let o: ScriptedOutcome = "output a\\nb".parse().unwrap();
        assert_eq!(o.kind, OutcomeKind::Output("a\nb".into()));
        assert!("explode".parse::<ScriptedOutcome>().is_err());
        assert!("+xs score 1".parse::<ScriptedOutcome>().is_err());
    }

    #[test]
    fn overlong_outcomes_time_out() {
        let mut sc = Scenario::new();
        sc.run("+90s score 0.5".parse().unwrap())
            .run("+30s score 0.5".parse().unwrap());
        let runner = ScriptedRunner::new(Arc::new(sc));
        let dir = tempfile::tempdir().unwrap();
        let request = RunRequest {
            channel: "main",
            script_path: &dir.path().join("solution.py"),
            output_dir: dir.path(),
            timeout: Duration::from_secs(60),
            artifact: None,
        };
        let first = runner.run(&request).unwrap();
        assert!(first.timed_out);
        assert_eq!(first.duration, Duration::from_secs(60));
        assert!(!runner.run(&request).unwrap().timed_out);
        assert_eq!(runner.clock().now(), Duration::from_secs(90));
    }
}
