//! Final clean-up and submission: undo training-set subsampling, then have
//! the script predict the test set and write the submission file.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::journal::{NoteLevel, Phase, Purpose, Verdict};
use crate::llm::{extract_script, AgentRole, Bindings, BlockAnswer};
use crate::robustness::{check_leakage, evaluate_with_repair, score_script, Repair};
use crate::session::{Outcome, Session};
use crate::solution::{replace_in_script, Origin, Solution};

/// Files written for a finished run.
#[derive(Debug, Clone, PartialEq)]
pub struct Submission {
    /// The solution that was finalized (after subsampling removal).
    pub solution: Solution,
    /// Final script, `<run>/final/solution.<ext>`.
    pub script_path: PathBuf,
    /// Copy of the produced submission, `<run>/final/<submission_name>`.
    pub path: PathBuf,
}

/// Removes training-set subsampling if the checker finds any and the
/// full-data script still runs. Otherwise returns the solution unchanged.
pub fn remove_subsampling(sess: &mut Session<'_>, solution: Solution) -> Result<Solution> {
    let prompt = sess.render(
        AgentRole::SubsampleExtractor,
        None,
        &Bindings::from([("code", solution.script.clone())]),
    )?;
    let tries = sess.max_attempts();
    let block = match sess.invoke_parsed(
        AgentRole::SubsampleExtractor,
        &prompt,
        tries,
        BlockAnswer::parse,
    ) {
        Ok(b) => b,
        Err(e @ (Error::MalformedStructuredOutput(_) | Error::EmptyResponse { .. })) => {
            sess.note(
                NoteLevel::Warning,
                format!("subsampling check skipped: {e}"),
            )?;
            return Ok(solution);
        }
        Err(e) => return Err(e),
    };
    let Some(block) = block else {
        sess.decide(
            Phase::Finalize,
            Verdict::Skip,
            Some(&solution.id),
            solution.score,
            "no subsampling",
        )?;
        return Ok(solution);
    };
    let rewritten = match sess.invoke(
        AgentRole::SubsampleRemover,
        &Bindings::from([("code_block", block.clone())]),
    ) {
        Ok(r) => extract_script(&r),
        Err(Error::EmptyResponse { .. }) => String::new(),
        Err(e) => return Err(e),
    };
    let script = if rewritten.trim().is_empty() {
        Err(Error::EmptyBlock)
    } else {
        replace_in_script(&solution.script, &block, &rewritten)
    };
    let script = match script {
        Ok(s) => s,
        Err(e) => {
            sess.note(NoteLevel::Warning, format!("subsampling not removed: {e}"))?;
            return Ok(solution);
        }
    };
    match score_script(
        sess,
        &script,
        Origin::Finalized,
        std::slice::from_ref(&solution.id),
    )? {
        Ok(full) => {
            sess.decide(
                Phase::Finalize,
                Verdict::Accept,
                Some(&full.id),
                full.score,
                "subsampling removed",
            )?;
            Ok(full)
        }
        Err(_) => {
            sess.decide(
                Phase::Finalize,
                Verdict::Reject,
                Some(&solution.id),
                solution.score,
                "full-data run failed",
            )?;
            Ok(solution)
        }
    }
}

/// Extends the solution to predict the test set and runs it until it
/// writes the submission file, debugging as needed.
pub fn make_submission(sess: &mut Session<'_>, solution: Solution) -> Result<Submission> {
    let task = sess.task();
    let bindings = Bindings::from([
        ("task", task.prompt_text()),
        ("code", solution.script.clone()),
        ("submission_name", task.submission_name.clone()),
    ]);
    let script = match sess.invoke(AgentRole::Test, &bindings) {
        Ok(r) => extract_script(&r),
        Err(Error::EmptyResponse { .. }) => String::new(),
        Err(e) => return Err(e),
    };
    let script = if script.trim().is_empty() {
        sess.note(
            NoteLevel::Warning,
            "test agent returned no script; running the solution as is",
        )?;
        solution.script.clone()
    } else {
        check_leakage(sess, &script)?
    };
    match evaluate_with_repair(sess, &script, Purpose::Submission)? {
        Repair::Fixed {
            script,
            outcome: Outcome::Produced(produced),
        } => {
            let (script_path, path) = publish(sess, &script, &produced)?;
            sess.decide(
                Phase::Finalize,
                Verdict::Select,
                Some(&solution.id),
                solution.score,
                "submission written",
            )?;
            Ok(Submission {
                solution,
                script_path,
                path,
            })
        }
        Repair::Fixed { .. } => unreachable!("submission runs produce files"),
        Repair::DebugFailed(bug) => Err(Error::SubmissionMissing(bug.traceback)),
    }
}

fn publish(sess: &Session<'_>, script: &str, produced: &Path) -> Result<(PathBuf, PathBuf)> {
    let dir = sess.engine().workspace.root().join("final");
    std::fs::create_dir_all(&dir).map_err(Error::io(format!("creating {}", dir.display())))?;
    let script_path = dir.join(format!("solution.{}", sess.task().script_ext));
    std::fs::write(&script_path, script)
        .map_err(Error::io(format!("writing {}", script_path.display())))?;
    let path = dir.join(&sess.task().submission_name);
    std::fs::copy(produced, &path).map_err(Error::io(format!("copying {}", produced.display())))?;
    Ok((script_path, path))
}

/// Subsampling removal then submission. Exempt from the time budget.
pub fn finalize(sess: &mut Session<'_>, solution: Solution) -> Result<Submission> {
    sess.exempt_from_budget();
    let solution = remove_subsampling(sess, solution)?;
    make_submission(sess, solution)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Config;
    use crate::exec::ScriptedOutcome;
    use crate::journal::decision_trace;
    use crate::scenario::Scenario;
    use crate::score::{Direction, ScoreRecord};
    use crate::solution::SolutionId;
    use crate::testkit::Harness;

    const CLEAN: &str = r#"{"code_block": "", "leakage": false}"#;
    const SCRIPT: &str = "df = load()\ndf = df.sample(100)\nfit(df)\n";

    fn solution() -> Solution {
        Solution::new(SolutionId::new("main/1"), SCRIPT, Origin::Ensembled)
            .unwrap()
            .with_score(ScoreRecord::new(0.9, Direction::Maximize).unwrap())
    }

    fn base() -> Scenario {
        let mut sc = Scenario::new();
        sc.fallback(AgentRole::LeakageExtractor, CLEAN)
            .fallback(AgentRole::Test, "```python\npredict_and_write()\n```");
        sc
    }

    #[test]
    fn subsampling_is_removed_when_full_run_works() {
        let mut sc = base();
        sc.respond(
            AgentRole::SubsampleExtractor,
            r#"{"code_block": "df = df.sample(100)"}"#,
        )
        .respond(AgentRole::SubsampleRemover, "```python\ndf = df\n```")
        .run(ScriptedOutcome::score(0.92));
        let h = Harness::new(sc);
        let mut sess = h.session("main");
        let out = remove_subsampling(&mut sess, solution()).unwrap();
        assert_eq!(out.script, "df = load()\ndf = df\nfit(df)\n");
        assert_eq!(out.origin, Origin::Finalized);
    }

    #[test]
    fn no_subsampling_is_a_no_op() {
        let mut sc = base();
        sc.respond(AgentRole::SubsampleExtractor, r#"{"code_block": ""}"#);
        let h = Harness::new(sc);
        let mut sess = h.session("main");
        assert_eq!(
            remove_subsampling(&mut sess, solution()).unwrap(),
            solution()
        );
        assert!(h.provider().prompts(AgentRole::SubsampleRemover).is_empty());
    }

    #[test]
    fn failing_full_data_run_keeps_original() {
        let mut sc = base();
        sc.respond(
            AgentRole::SubsampleExtractor,
            r#"{"code_block": "df = df.sample(100)"}"#,
        )
        .respond(AgentRole::SubsampleRemover, "```python\ndf = df\n```")
        .fallback(AgentRole::Debugger, "```python\nstill()\n```")
        .fallback_run(ScriptedOutcome::crash("MemoryError"));
        let h = Harness::new(sc);
        let mut sess = h.session("main");
        assert_eq!(
            remove_subsampling(&mut sess, solution()).unwrap(),
            solution()
        );
    }

    #[test]
    fn submission_is_published() {
        let mut sc = base();
        sc.respond(AgentRole::SubsampleExtractor, r#"{"code_block": ""}"#)
            .run("submit".parse().unwrap());
        let h = Harness::new(sc);
        let mut sess = h.session("main");
        let sub = finalize(&mut sess, solution()).unwrap();
        assert_eq!(sub.path, h.run_dir().join("final/submission.csv"));
        assert!(std::fs::read_to_string(&sub.path)
            .unwrap()
            .starts_with("id,"));
        assert_eq!(
            std::fs::read_to_string(&sub.script_path).unwrap(),
            "predict_and_write()"
        );
        assert_eq!(
            decision_trace(sess.journal().events()),
            ["finalize skip 0.9", "finalize select 0.9"]
        );
    }

    #[test]
    fn submission_debugging_then_failure() {
        let mut sc = base();
        sc.respond(AgentRole::SubsampleExtractor, r#"{"code_block": ""}"#)
            .fallback(AgentRole::Debugger, "```python\nwrite_nothing()\n```")
            .fallback_run(ScriptedOutcome::score(0.9));
        let h = Harness::new(sc);
        let mut sess = h.session("main");
        assert!(matches!(
            finalize(&mut sess, solution()),
            Err(Error::SubmissionMissing(_))
        ));
        assert_eq!(sess.journal().count_executions(), 4);
    }

    #[test]
    fn finalization_ignores_spent_budget() {
        let mut c = Config::default();
        c.run.total_budget_secs = 10;
        let mut sc = base();
        sc.respond(
            AgentRole::SubsampleExtractor,
            r#"{"code_block": "df = df.sample(100)"}"#,
        )
        .respond(AgentRole::SubsampleRemover, "```python\ndf = df\n```")
        .run(ScriptedOutcome::score(0.92))
        .run("submit".parse().unwrap());
        let h = Harness::builder(sc).config(c).build();
        h.clock().advance(std::time::Duration::from_secs(60));
        let mut sess = h.session("main");
        let sub = finalize(&mut sess, solution()).unwrap();
        assert_eq!(sub.solution.origin, Origin::Finalized);
    }
}
