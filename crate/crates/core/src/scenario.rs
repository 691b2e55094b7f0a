//! Scripted scenarios: per-role mock transcripts, scripted execution
//! outcomes and an optional expected decision trace.
//!
//! On disk a scenario is a directory:
//!
//! ```text
//! <scenario>/
//!   <role>.txt               responses, separated by `-----8<-----` lines
//!   <role>.default.txt       response returned once the transcript runs out
//!   executions.txt           one scripted outcome per line
//!   executions.default.txt   outcome repeated once the list runs out
//!   expected_trace.txt       decision trace lines
//!   <channel>/...            the same files, for one journal stream only
//! ```
//!
//! Channel directories (`main`, `lane-1`, ...) override the top-level file
//! of the same name for that stream. Each stream reads its transcripts with
//! its own cursor, so parallel pipelines never compete for responses.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::exec::ScriptedOutcome;
use crate::llm::AgentRole;

pub const RECORD_SEPARATOR: &str = "-----8<-----";

const SHARED: &str = "";

#[derive(Debug, Clone, Default, PartialEq)]
struct ChannelScript {
    responses: BTreeMap<AgentRole, Vec<String>>,
    fallbacks: BTreeMap<AgentRole, String>,
    outcomes: Option<Vec<ScriptedOutcome>>,
    fallback_outcome: Option<ScriptedOutcome>,
    expected_trace: Option<Vec<String>>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Scenario {
    channels: BTreeMap<String, ChannelScript>,
}

/// Splits a transcript file into records. A trailing separator is allowed.
pub fn split_records(text: &str) -> Vec<String> {
    let mut records = vec![Vec::new()];
    for line in text.lines() {
        if line.trim_end() == RECORD_SEPARATOR {
            records.push(Vec::new());
        } else {
            records.last_mut().expect("non-empty").push(line);
        }
    }
    let mut out: Vec<String> = records.into_iter().map(|lines| lines.join("\n")).collect();
    if out.last().is_some_and(|r| r.trim().is_empty()) {
        out.pop();
    }
    out
}

/// Joins records into the transcript file format.
pub fn join_records<S: AsRef<str>>(records: &[S]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(r.as_ref());
        out.push('\n');
        out.push_str(RECORD_SEPARATOR);
        out.push('\n');
    }
    out
}

fn parse_outcomes(text: &str) -> Result<Vec<ScriptedOutcome>> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::parse)
        .collect()
}

fn trace_lines(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect()
}

impl Scenario {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let mut scenario = Self::new();
        scenario.load_channel(dir, SHARED)?;
        let entries =
            std::fs::read_dir(dir).map_err(Error::io(format!("reading {}", dir.display())))?;
        for entry in entries {
            let path = entry.map_err(Error::io("listing scenario"))?.path();
            if path.is_dir() {
                if let Some(name) = path.file_name().and_then(|n| n.to_str()) {
                    scenario.load_channel(&path, name)?;
                }
            }
        }
        Ok(scenario)
    }

    fn load_channel(&mut self, dir: &Path, channel: &str) -> Result<()> {
        let read = |name: &str| -> Result<Option<String>> {
            let path = dir.join(name);
            if !path.is_file() {
                return Ok(None);
            }
            std::fs::read_to_string(&path)
                .map(Some)
                .map_err(Error::io(format!("reading {}", path.display())))
        };
        let script = self.channels.entry(channel.to_string()).or_default();
        for role in AgentRole::ALL {
            if let Some(text) = read(&format!("{}.txt", role.stem()))? {
                script.responses.insert(role, split_records(&text));
            }
            if let Some(text) = read(&format!("{}.default.txt", role.stem()))? {
                let record = split_records(&text).into_iter().next().unwrap_or_default();
                script.fallbacks.insert(role, record);
            }
        }
        if let Some(text) = read("executions.txt")? {
            script.outcomes = Some(parse_outcomes(&text)?);
        }
        if let Some(text) = read("executions.default.txt")? {
            script.fallback_outcome = parse_outcomes(&text)?.into_iter().next();
        }
        if let Some(text) = read("expected_trace.txt")? {
            script.expected_trace = Some(trace_lines(&text));
        }
        Ok(())
    }

    fn channel_mut(&mut self, channel: &str) -> &mut ChannelScript {
        self.channels.entry(channel.to_string()).or_default()
    }

    /// Appends a response to the shared transcript of `role`.
    pub fn respond(&mut self, role: AgentRole, text: impl Into<String>) -> &mut Self {
        self.respond_on(SHARED, role, text)
    }

    pub fn respond_on(
        &mut self,
        channel: &str,
        role: AgentRole,
        text: impl Into<String>,
    ) -> &mut Self {
        self.channel_mut(channel)
            .responses
            .entry(role)
            .or_default()
            .push(text.into());
        self
    }

    /// Response returned for `role` once its transcript is exhausted.
    pub fn fallback(&mut self, role: AgentRole, text: impl Into<String>) -> &mut Self {
        self.channel_mut(SHARED).fallbacks.insert(role, text.into());
        self
    }

    pub fn fallback_on(
        &mut self,
        channel: &str,
        role: AgentRole,
        text: impl Into<String>,
    ) -> &mut Self {
        self.channel_mut(channel)
            .fallbacks
            .insert(role, text.into());
        self
    }

    /// Appends an execution outcome to the shared list.
    pub fn run(&mut self, outcome: ScriptedOutcome) -> &mut Self {
        self.run_on(SHARED, outcome)
    }

    pub fn run_on(&mut self, channel: &str, outcome: ScriptedOutcome) -> &mut Self {
        self.channel_mut(channel)
            .outcomes
            .get_or_insert_with(Vec::new)
            .push(outcome);
        self
    }

    pub fn fallback_run(&mut self, outcome: ScriptedOutcome) -> &mut Self {
        self.channel_mut(SHARED).fallback_outcome = Some(outcome);
        self
    }

    pub fn expect_trace(&mut self, channel: &str, lines: &[&str]) -> &mut Self {
        self.channel_mut(channel).expected_trace =
            Some(lines.iter().map(|l| l.to_string()).collect());
        self
    }

    fn lookup<'a, T>(
        &'a self,
        channel: &str,
        pick: impl Fn(&'a ChannelScript) -> Option<T>,
    ) -> Option<T> {
        self.channels
            .get(channel)
            .and_then(&pick)
            .or_else(|| self.channels.get(SHARED).and_then(&pick))
    }

    /// The `index`-th response of `role` on `channel`, falling back to the
    /// role's default once the transcript is exhausted.
    pub fn response_at(&self, channel: &str, role: AgentRole, index: usize) -> Option<&str> {
        let list = self.lookup(channel, |c| c.responses.get(&role));
        if let Some(r) = list.and_then(|l| l.get(index)) {
            return Some(r);
        }
        self.lookup(channel, |c| c.fallbacks.get(&role))
            .map(String::as_str)
    }

    pub fn outcome_at(&self, channel: &str, index: usize) -> Option<&ScriptedOutcome> {
        let list = self.lookup(channel, |c| c.outcomes.as_ref());
        if let Some(o) = list.and_then(|l| l.get(index)) {
            return Some(o);
        }
        self.lookup(channel, |c| c.fallback_outcome.as_ref())
    }

    /// True if any channel scripts execution outcomes.
    pub fn has_executions(&self) -> bool {
        self.channels
            .values()
            .any(|c| c.outcomes.is_some() || c.fallback_outcome.is_some())
    }

    pub fn expected_trace(&self, channel: &str) -> Option<&[String]> {
        self.lookup(channel, |c| c.expected_trace.as_deref())
    }
}
