//! Ablation-guided refinement: each outer step studies the current
//! solution, picks the code block that matters most, and tries several
//! plans for it in an inner loop.

use crate::error::{Error, Result};
use crate::journal::{NoteLevel, Phase, Purpose, Verdict};
use crate::llm::{extract_script, AgentRole, Bindings, TargetAnswer};
use crate::robustness::{evaluate_with_repair, score_script, Repair};
use crate::score::{improves, improves_or_ties};
use crate::session::{Outcome, Session};
use crate::solution::{locate_block, replace_in_script, CodeBlock, Origin, Solution};

/// Summary recorded when an ablation study produced nothing usable.
pub const ABLATION_UNAVAILABLE: &str = "ablation unavailable";

/// A plan tried on the current target and how it scored (`None`: failed).
#[derive(Debug, Clone, PartialEq)]
pub struct PlanAttempt {
    pub plan: String,
    pub score: Option<f64>,
}

fn format_attempts(attempts: &[PlanAttempt]) -> String {
    attempts
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let score = a
                .score
                .map_or("failed to run".to_string(), |s| s.to_string());
            format!("Plan {}: {}\nScore: {score}", i + 1, a.plan.trim())
        })
        .collect::<Vec<_>>()
        .join("\n\n")
}

fn format_list(items: &[String], empty: &str) -> String {
    if items.is_empty() {
        return empty.to_string();
    }
    items
        .iter()
        .enumerate()
        .map(|(i, s)| format!("## {}\n{}", i + 1, s.trim_end()))
        .collect::<Vec<_>>()
        .join("\n\n")
}

/// Runs an ablation study of `solution` and summarizes its output. Any
/// failure along the way yields [`ABLATION_UNAVAILABLE`].
pub fn run_ablation(
    sess: &mut Session<'_>,
    solution: &Solution,
    previous: &[String],
) -> Result<String> {
    let bindings = Bindings::from([
        ("task", sess.task().prompt_text()),
        ("solution", solution.script.clone()),
        ("previous_ablations", format_list(previous, "None.")),
    ]);
    let script = match sess.invoke(AgentRole::Abl, &bindings) {
        Ok(r) => extract_script(&r),
        Err(Error::EmptyResponse { .. }) => String::new(),
        Err(e) => return Err(e),
    };
    if script.trim().is_empty() {
        sess.note(NoteLevel::Warning, "ablation agent returned no script")?;
        return Ok(ABLATION_UNAVAILABLE.into());
    }
    let (script, output) = match evaluate_with_repair(sess, &script, Purpose::Ablation)? {
        Repair::Fixed {
            script,
            outcome: Outcome::Completed(out),
        } => (script, out),
        _ => {
            sess.note(NoteLevel::Warning, "ablation study failed to run")?;
            return Ok(ABLATION_UNAVAILABLE.into());
        }
    };
    let bindings = Bindings::from([("ablation_code", script), ("ablation_output", output)]);
    match sess.invoke(AgentRole::Summarize, &bindings) {
        Ok(summary) => Ok(summary.trim().to_string()),
        Err(Error::EmptyResponse { .. }) => Ok(ABLATION_UNAVAILABLE.into()),
        Err(e) => Err(e),
    }
}

/// Asks for the block to refine and a first plan. The block must occur
/// exactly once in the solution; otherwise the extractor is asked again
/// once. `None` when no usable block was named.
pub fn extract_target(
    sess: &mut Session<'_>,
    summary: &str,
    solution: &Solution,
    prior_blocks: &[String],
) -> Result<Option<(CodeBlock, String)>> {
    let base = sess.render(
        AgentRole::Extractor,
        None,
        &Bindings::from([
            ("task", sess.task().prompt_text()),
            ("ablation_summary", summary.to_string()),
            ("solution", solution.script.clone()),
            ("prior_blocks", format_list(prior_blocks, "None.")),
        ]),
    )?;
    let mut prompt = base.clone();
    let tries = sess.max_attempts();
    for _ in 0..2 {
        let answer =
            match sess.invoke_parsed(AgentRole::Extractor, &prompt, tries, TargetAnswer::parse) {
                Ok(a) => a,
                Err(e @ (Error::MalformedStructuredOutput(_) | Error::EmptyResponse { .. })) => {
                    sess.note(
                        NoteLevel::Warning,
                        format!("extractor answer unusable: {e}"),
                    )?;
                    return Ok(None);
                }
                Err(e) => return Err(e),
            };
        match locate_block(&solution.script, &answer.code_block) {
            Ok(range) => {
                let block = CodeBlock::new(&solution.script[range])?;
                return Ok(Some((block, answer.plan)));
            }
            Err(e @ (Error::BlockNotFound | Error::AmbiguousBlock(_) | Error::EmptyBlock)) => {
                prompt = format!(
                    "{base}\n\nThe block you chose cannot be used: {e}. Copy a block that appears exactly once in the current solution."
                );
            }
            Err(e) => return Err(e),
        }
    }
    Ok(None)
}

/// A new plan for the block. A plan identical to one already tried is
/// asked for again once, then used anyway.
pub fn propose_plan(
    sess: &mut Session<'_>,
    block: &CodeBlock,
    attempts: &[PlanAttempt],
) -> Result<Option<String>> {
    let base = sess.render(
        AgentRole::Planner,
        None,
        &Bindings::from([
            ("code_block", block.text().to_string()),
            ("attempts", format_attempts(attempts)),
        ]),
    )?;
    let mut prompt = base.clone();
    for round in 0..2 {
        let plan = match sess.invoke_prompt(AgentRole::Planner, &prompt) {
            Ok(p) => p.trim().to_string(),
            Err(Error::EmptyResponse { .. }) => return Ok(None),
            Err(e) => return Err(e),
        };
        let repeated = attempts.iter().any(|a| a.plan.trim() == plan);
        if !repeated {
            return Ok(Some(plan));
        }
        if round == 1 {
            sess.note(NoteLevel::Warning, "planner repeated an earlier plan")?;
            return Ok(Some(plan));
        }
        prompt = format!("{base}\n\nThat plan was already tried. Propose a different one.");
    }
    unreachable!("loop returns on its second round")
}

/// Implements a plan on the block and scores the resulting solution.
/// `None` if the coder produced nothing usable or the result never ran.
pub fn apply_plan(
    sess: &mut Session<'_>,
    current: &Solution,
    block: &CodeBlock,
    plan: &str,
) -> Result<Option<Solution>> {
    let bindings = Bindings::from([
        ("code_block", block.text().to_string()),
        ("plan", plan.to_string()),
    ]);
    let new_block = match sess.invoke(AgentRole::Coder, &bindings) {
        Ok(r) => extract_script(&r),
        Err(Error::EmptyResponse { .. }) => String::new(),
        Err(e) => return Err(e),
    };
    if new_block.trim().is_empty() {
        sess.decide(
            Phase::Refine,
            Verdict::Discard,
            None,
            None,
            Error::EmptyBlock.to_string(),
        )?;
        return Ok(None);
    }
    let script = match replace_in_script(&current.script, block.text(), &new_block) {
        Ok(s) => s,
        Err(e) => {
            sess.decide(Phase::Refine, Verdict::Discard, None, None, e.to_string())?;
            return Ok(None);
        }
    };
    match score_script(
        sess,
        &script,
        Origin::Refined,
        std::slice::from_ref(&current.id),
    )? {
        Ok(s) => Ok(Some(s)),
        Err(bug) => {
            sess.decide(Phase::Refine, Verdict::Discard, None, None, bug.traceback)?;
            Ok(None)
        }
    }
}

/// Outer/inner refinement of `s0`. Returns the best solution seen; stops
/// early, keeping that best, when the time budget runs out.
pub fn refine(sess: &mut Session<'_>, s0: Solution) -> Result<Solution> {
    let mut state = RefineState {
        best: s0.clone(),
        current: s0,
        summaries: Vec::new(),
        blocks: Vec::new(),
    };
    let steps = sess.config().run.outer_steps;
    for step in 1..=steps {
        match state.outer_step(sess, step) {
            Ok(()) => {}
            Err(Error::BudgetExhausted) => {
                let best = &state.best;
                sess.decide(
                    Phase::Budget,
                    Verdict::Truncate,
                    Some(&best.id),
                    best.score,
                    "refinement",
                )?;
                return Ok(state.best);
            }
            Err(e) => return Err(e),
        }
        sess.checkpoint(&format!("step-{step}"), Some(&state.best))?;
    }
    Ok(state.best)
}

struct RefineState {
    /// Best solution found so far (ties go to the later one).
    best: Solution,
    /// Solution the next outer step starts from.
    current: Solution,
    summaries: Vec<String>,
    blocks: Vec<String>,
}

impl RefineState {
    fn outer_step(&mut self, sess: &mut Session<'_>, step: u32) -> Result<()> {
        let summary = match sess.config().guidance.ablation_override(step) {
            Some(s) => s.to_string(),
            None => run_ablation(sess, &self.current, &self.summaries)?,
        };
        self.summaries.push(summary.clone());

        let Some((block, first_plan)) =
            extract_target(sess, &summary, &self.current, &self.blocks)?
        else {
            sess.decide(
                Phase::Refine,
                Verdict::Skip,
                Some(&self.current.id),
                None,
                "no usable code block",
            )?;
            sess.decide(
                Phase::Step,
                Verdict::Hold,
                Some(&self.current.id),
                self.current.score,
                "",
            )?;
            return Ok(());
        };
        self.blocks.push(block.text().to_string());

        let mut attempts: Vec<PlanAttempt> = Vec::new();
        let mut step_best: Option<Solution> = None;
        for k in 0..sess.config().run.inner_steps {
            let plan = if k == 0 {
                first_plan.clone()
            } else {
                match propose_plan(sess, &block, &attempts)? {
                    Some(p) => p,
                    None => {
                        sess.decide(
                            Phase::Refine,
                            Verdict::Discard,
                            None,
                            None,
                            "planner gave no plan",
                        )?;
                        continue;
                    }
                }
            };
            let candidate = apply_plan(sess, &self.current, &block, &plan)?;
            attempts.push(PlanAttempt {
                plan,
                score: candidate.as_ref().and_then(|c| c.score).map(|s| s.value()),
            });
            let Some(candidate) = candidate else { continue };
            let score = candidate.score()?;
            let verdict = if improves_or_ties(&score, &self.best.score()?)? {
                self.best = candidate.clone();
                Verdict::Accept
            } else {
                Verdict::Reject
            };
            sess.decide(Phase::Refine, verdict, Some(&candidate.id), Some(score), "")?;
            let better = match &step_best {
                None => true,
                Some(b) => improves(&score, &b.score()?)?,
            };
            if better {
                step_best = Some(candidate);
            }
        }

        match step_best {
            Some(b) if improves_or_ties(&b.score()?, &self.current.score()?)? => {
                sess.decide(Phase::Step, Verdict::Advance, Some(&b.id), b.score, "")?;
                self.current = b;
            }
            _ => {
                sess.decide(
                    Phase::Step,
                    Verdict::Hold,
                    Some(&self.current.id),
                    self.current.score,
                    "",
                )?;
            }
        }
        Ok(())
    }
}
