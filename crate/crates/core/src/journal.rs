//! Append-only JSON-lines run journal.
//!
//! A run writes one stream per pipeline (`main`, `lane-1`, ...). Every agent
//! attempt, execution, score and search decision is appended as one line:
//!
//! ```text
//! {"v":1,"seq":0,"event":"lane_started","lane":1,"seed":1}
//! {"v":1,"seq":1,"event":"agent_call","role":"retriever","attempt":1,...}
//! ```
//!
//! Reopening a stream for resumption loads its events into a replay queue.
//! While the queue is non-empty, agent calls and executions are answered
//! from it and every other event is checked against it instead of being
//! written, so the resumed process rebuilds the exact same state without
//! repeating work.

use std::collections::VecDeque;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::error::{Error, Result};
use crate::llm::AgentRole;
use crate::score::Direction;
use crate::solution::{Solution, SolutionId};

pub const SCHEMA_VERSION: u32 = 1;

/// What an execution was for; decides how its outcome is judged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Purpose {
    Solution,
    Ablation,
    Submission,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Candidate,
    Merge,
    DataUsage,
    Refine,
    Step,
    Ensemble,
    Budget,
    Finalize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Accept,
    Reject,
    Stop,
    Discard,
    Skip,
    Advance,
    Hold,
    Score,
    Select,
    Fallback,
    Truncate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoteLevel {
    Info,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    RunStarted {
        config: Box<Config>,
        task_dir: PathBuf,
        mock: Option<PathBuf>,
        seeds: Vec<u64>,
    },
    LaneStarted {
        lane: u32,
        seed: u64,
    },
    AgentCall {
        role: AgentRole,
        attempt: u32,
        seed: u64,
        prompt: String,
        response: Option<String>,
        error: Option<String>,
        wall_ms: u64,
    },
    Execution {
        exec: String,
        purpose: Purpose,
        exit_status: i32,
        timed_out: bool,
        duration_ms: u64,
        stdout: String,
        stderr: String,
    },
    Score {
        exec: String,
        value: f64,
        direction: Direction,
    },
    Decision {
        phase: Phase,
        verdict: Verdict,
        solution: Option<SolutionId>,
        score: Option<f64>,
        detail: String,
    },
    LeakageChecked {
        hash: String,
        cached: bool,
        flagged: bool,
        changed: bool,
    },
    Checkpoint {
        label: String,
        best: Option<SolutionId>,
        best_score: Option<f64>,
        elapsed_ms: u64,
    },
    Note {
        level: NoteLevel,
        message: String,
    },
    LaneFinished {
        lane: u32,
        solution: Box<Solution>,
    },
    RunCompleted {
        solution: SolutionId,
        score: Option<f64>,
        submission: PathBuf,
    },
}

impl Event {
    /// Equality ignoring wall-clock measurements.
    pub fn same_as(&self, other: &Event) -> bool {
        self.without_timing() == other.without_timing()
    }

    fn without_timing(&self) -> Event {
        let mut e = self.clone();
        match &mut e {
            Event::AgentCall { wall_ms, .. } => *wall_ms = 0,
            Event::Checkpoint { elapsed_ms, .. } => *elapsed_ms = 0,
            _ => {}
        }
        e
    }

    /// One-line rendering of a decision, e.g. `merge accept 0.92`.
    pub fn trace_line(&self) -> Option<String> {
        match self {
            Event::Decision {
                phase,
                verdict,
                score,
                ..
            } => {
                let mut line = format!("{} {}", to_word(phase), to_word(verdict));
                if let Some(s) = score {
                    line.push_str(&format!(" {s}"));
                }
                Some(line)
            }
            _ => None,
        }
    }
}

fn to_word<T: Serialize>(value: &T) -> String {
    serde_json::to_value(value)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}

#[derive(Serialize, Deserialize)]
struct Record {
    v: u32,
    seq: u64,
    #[serde(flatten)]
    event: Event,
}

/// Recorded outcome of an agent attempt.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordedCall {
    pub response: Option<String>,
    pub error: Option<String>,
}

/// One journal stream, optionally backed by a file.
#[derive(Debug)]
pub struct JournalStream {
    name: String,
    path: Option<PathBuf>,
    file: Option<File>,
    events: Vec<Event>,
    pending: VecDeque<Event>,
}

impl JournalStream {
    /// A stream that is kept in memory only.
    pub fn in_memory(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            path: None,
            file: None,
            events: Vec::new(),
            pending: VecDeque::new(),
        }
    }

    /// Starts a fresh stream file. Fails if it already exists.
    pub fn create(name: impl Into<String>, path: &Path) -> Result<Self> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)
                .map_err(Error::io(format!("creating {}", dir.display())))?;
        }
        let file = OpenOptions::new()
            .create_new(true)
            .append(true)
            .open(path)
            .map_err(Error::io(format!("creating journal {}", path.display())))?;
        Ok(Self {
            name: name.into(),
            path: Some(path.to_path_buf()),
            file: Some(file),
            events: Vec::new(),
            pending: VecDeque::new(),
        })
    }

    /// Reopens an existing stream (or starts it if missing) with its
    /// recorded events queued for replay.
    pub fn resume(name: impl Into<String>, path: &Path) -> Result<Self> {
        let recorded = if path.exists() {
            read_events(path)?
        } else {
            Vec::new()
        };
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)
                .map_err(Error::io(format!("creating {}", dir.display())))?;
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(Error::io(format!("opening journal {}", path.display())))?;
        Ok(Self {
            name: name.into(),
            path: Some(path.to_path_buf()),
            file: Some(file),
            events: Vec::new(),
            pending: recorded.into(),
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Every event of this stream so far, replayed ones included.
    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn is_replaying(&self) -> bool {
        !self.pending.is_empty()
    }

    fn corrupt(&self, reason: String) -> Error {
        Error::CorruptJournal {
            path: self
                .path
                .clone()
                .unwrap_or_else(|| PathBuf::from(&self.name)),
            reason,
        }
    }

    /// Appends an event, or checks it against the replay queue.
    pub fn record(&mut self, event: Event) -> Result<()> {
        if let Some(expected) = self.pending.pop_front() {
            if !expected.same_as(&event) {
                return Err(self.corrupt(format!(
                    "replay diverged at event {}: journal has {:?}, run produced {:?}",
                    self.events.len(),
                    expected,
                    event
                )));
            }
            self.events.push(expected);
            return Ok(());
        }
        if let Some(file) = &mut self.file {
            let record = Record {
                v: SCHEMA_VERSION,
                seq: self.events.len() as u64,
                event: event.clone(),
            };
            let mut line = serde_json::to_string(&record).expect("journal events serialize");
            line.push('\n');
            file.write_all(line.as_bytes())
                .and_then(|_| file.flush())
                .map_err(Error::io(format!("appending to journal {}", self.name)))?;
        }
        self.events.push(event);
        Ok(())
    }

    /// Pops a recorded agent attempt for `role`, if replaying.
    pub fn replay_call(&mut self, role: AgentRole) -> Result<Option<RecordedCall>> {
        let Some(next) = self.pending.front() else {
            return Ok(None);
        };
        match next {
            Event::AgentCall {
                role: recorded,
                response,
                error,
                ..
            } if *recorded == role => {
                let call = RecordedCall {
                    response: response.clone(),
                    error: error.clone(),
                };
                let event = self.pending.pop_front().expect("front exists");
                self.events.push(event);
                Ok(Some(call))
            }
            other => Err(self.corrupt(format!(
                "replay diverged: expected a {role} call, journal has {other:?}"
            ))),
        }
    }

    /// Pops a recorded execution, if replaying.
    pub fn replay_execution(&mut self) -> Result<Option<Event>> {
        match self.pending.front() {
            None => Ok(None),
            Some(Event::Execution { .. }) => {
                let event = self.pending.pop_front().expect("front exists");
                self.events.push(event.clone());
                Ok(Some(event))
            }
            Some(other) => Err(self.corrupt(format!(
                "replay diverged: expected an execution, journal has {other:?}"
            ))),
        }
    }

    /// True when the next replayed event records a budget truncation.
    pub fn replaying_truncation(&self) -> bool {
        matches!(
            self.pending.front(),
            Some(Event::Decision {
                phase: Phase::Budget,
                ..
            })
        )
    }

    pub fn count_executions(&self) -> usize {
        self.events
            .iter()
            .filter(|e| matches!(e, Event::Execution { .. }))
            .count()
    }
}

/// Reads and validates a stream file.
pub fn read_events(path: &Path) -> Result<Vec<Event>> {
    let corrupt = |reason: String| Error::CorruptJournal {
        path: path.to_path_buf(),
        reason,
    };
    let text = std::fs::read_to_string(path)
        .map_err(Error::io(format!("reading journal {}", path.display())))?;
    if !text.is_empty() && !text.ends_with('\n') {
        return Err(corrupt("last record is truncated".into()));
    }
    let mut events = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let record: Record =
            serde_json::from_str(line).map_err(|e| corrupt(format!("line {}: {e}", i + 1)))?;
        if record.v != SCHEMA_VERSION {
            return Err(corrupt(format!(
                "line {}: unsupported schema {}",
                i + 1,
                record.v
            )));
        }
        if record.seq != i as u64 {
            return Err(corrupt(format!(
                "line {}: sequence {} out of order",
                i + 1,
                record.seq
            )));
        }
        events.push(record.event);
    }
    Ok(events)
}

/// Decision trace lines of a stream, in order.
pub fn decision_trace(events: &[Event]) -> Vec<String> {
    events.iter().filter_map(Event::trace_line).collect()
}
