//! Debugging, leakage checking and data-usage checking.

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::exec::BugRecord;
use crate::journal::{Event, NoteLevel, Phase, Purpose, Verdict};
use crate::llm::{extract_script, AgentRole, Bindings, LeakageAnswer};
use crate::session::{Outcome, Session};
use crate::solution::{replace_in_script, Origin, Solution, SolutionId};

/// Result of running a script with the debugger's help.
#[derive(Debug, Clone, PartialEq)]
pub enum Repair {
    Fixed { script: String, outcome: Outcome },
    DebugFailed(BugRecord),
}

/// Evaluates a script, handing failures to [`debug_loop`].
pub fn evaluate_with_repair(
    sess: &mut Session<'_>,
    script: &str,
    purpose: Purpose,
) -> Result<Repair> {
    match sess.evaluate(script, purpose)? {
        Ok(outcome) => Ok(Repair::Fixed {
            script: script.to_string(),
            outcome,
        }),
        Err(bug) => debug_loop(sess, bug, purpose),
    }
}

/// Asks the debugger for a fix up to `max_debug_rounds` times, re-running
/// each proposed script. Returns the last bug if no round succeeds.
pub fn debug_loop(sess: &mut Session<'_>, bug: BugRecord, purpose: Purpose) -> Result<Repair> {
    let mut bug = bug;
    for _ in 0..sess.config().run.max_debug_rounds {
        let bindings = Bindings::from([
            ("task", sess.task().prompt_text()),
            ("code", bug.script.clone()),
            ("bug", bug.traceback.clone()),
        ]);
        let response = match sess.invoke(AgentRole::Debugger, &bindings) {
            Ok(r) => r,
            Err(Error::EmptyResponse { .. }) => continue,
            Err(e) => return Err(e),
        };
        let script = extract_script(&response);
        if script.trim().is_empty() {
            continue;
        }
        match sess.evaluate(&script, purpose)? {
            Ok(outcome) => return Ok(Repair::Fixed { script, outcome }),
            Err(next) => bug = next,
        }
    }
    Ok(Repair::DebugFailed(bug))
}

/// Leakage-checks a proposed script, then runs and debugs it. Yields the
/// scored solution, or the last bug when it never ran cleanly.
pub fn score_script(
    sess: &mut Session<'_>,
    script: &str,
    origin: Origin,
    parents: &[SolutionId],
) -> Result<std::result::Result<Solution, BugRecord>> {
    let script = check_leakage(sess, script)?;
    match evaluate_with_repair(sess, &script, Purpose::Solution)? {
        Repair::Fixed {
            script,
            outcome: Outcome::Scored(score),
        } => {
            let id = sess.new_id();
            Ok(Ok(Solution::new(id, script, origin)?
                .with_parents(parents.iter().cloned())
                .with_score(score)))
        }
        Repair::Fixed { script, .. } => Ok(Err(BugRecord::new("run produced no score", script))),
        Repair::DebugFailed(bug) => Ok(Err(bug)),
    }
}

fn digest(script: &str) -> String {
    hex::encode(Sha256::digest(script.as_bytes()))
}

/// Looks for preprocessing fitted on validation or test data and rewrites
/// the offending block. Scripts already checked in this session are served
/// from a cache. Unusable checker answers leave the script unchanged.
pub fn check_leakage(sess: &mut Session<'_>, script: &str) -> Result<String> {
    let hash = digest(script);
    if let Some(cached) = sess.leakage_cache().get(&hash).cloned() {
        let changed = cached != script;
        sess.record(Event::LeakageChecked {
            hash,
            cached: true,
            flagged: changed,
            changed,
        })?;
        return Ok(cached);
    }

    let prompt = sess.render(
        AgentRole::LeakageExtractor,
        None,
        &Bindings::from([("code", script.to_string())]),
    )?;
    let tries = sess.max_attempts();
    let answer = match sess.invoke_parsed(
        AgentRole::LeakageExtractor,
        &prompt,
        tries,
        LeakageAnswer::parse,
    ) {
        Ok(a) => Some(a),
        Err(e @ (Error::MalformedStructuredOutput(_) | Error::EmptyResponse { .. })) => {
            sess.note(NoteLevel::Warning, format!("leakage check skipped: {e}"))?;
            None
        }
        Err(e) => return Err(e),
    };

    let mut output = script.to_string();
    let flagged = answer.as_ref().is_some_and(|a| a.leakage);
    if let Some(answer) = answer.filter(|a| a.leakage && !a.code_block.trim().is_empty()) {
        let corrected = match sess.invoke(
            AgentRole::LeakageCorrector,
            &Bindings::from([("code_block", answer.code_block.clone())]),
        ) {
            Ok(r) => extract_script(&r),
            Err(Error::EmptyResponse { .. }) => String::new(),
            Err(e) => return Err(e),
        };
        if corrected.trim().is_empty() {
            sess.note(NoteLevel::Warning, "leakage corrector returned no code")?;
        } else {
            match replace_in_script(script, &answer.code_block, &corrected) {
                Ok(s) => output = s,
                Err(e) => sess.note(NoteLevel::Warning, format!("leakage fix not applied: {e}"))?,
            }
        }
    }

    let changed = output != script;
    sess.record(Event::LeakageChecked {
        hash: hash.clone(),
        cached: false,
        flagged,
        changed,
    })?;
    let cache = sess.leakage_cache();
    cache.insert(hash, output.clone());
    cache.insert(digest(&output), output.clone());
    Ok(output)
}

/// Checks once whether the solution uses every provided file and adopts
/// the revision if it runs. A revision that cannot be made to run is
/// dropped and the original kept.
pub fn check_data_usage(sess: &mut Session<'_>, solution: Solution) -> Result<Solution> {
    let files = sess.task().data_files()?;
    if files.is_empty() {
        sess.note(NoteLevel::Info, "no data files to check usage against")?;
        return Ok(solution);
    }
    let bindings = Bindings::from([
        ("task", sess.task().prompt_text()),
        ("data_files", files.join("\n")),
        ("code", solution.script.clone()),
    ]);
    let revised = match sess.invoke(AgentRole::DataUsage, &bindings) {
        Ok(r) => extract_script(&r),
        Err(Error::EmptyResponse { .. }) => String::new(),
        Err(e) => return Err(e),
    };
    if revised.trim().is_empty() || revised == solution.script {
        sess.decide(
            Phase::DataUsage,
            Verdict::Skip,
            Some(&solution.id),
            solution.score,
            "unchanged",
        )?;
        return Ok(solution);
    }
    match score_script(
        sess,
        &revised,
        Origin::Refined,
        std::slice::from_ref(&solution.id),
    )? {
        Ok(out) => {
            sess.decide(
                Phase::DataUsage,
                Verdict::Accept,
                Some(&out.id),
                out.score,
                "",
            )?;
            Ok(out)
        }
        Err(_) => {
            sess.decide(
                Phase::DataUsage,
                Verdict::Reject,
                Some(&solution.id),
                solution.score,
                "revision failed to run",
            )?;
            Ok(solution)
        }
    }
}
