//! Iterative ensembling of the per-lane solutions.

use crate::error::{Error, Result};
use crate::journal::{NoteLevel, Phase, Verdict};
use crate::llm::{extract_script, AgentRole, Bindings};
use crate::robustness::score_script;
use crate::score::{first_argmax, improves, rank_scores};
use crate::session::Session;
use crate::solution::{Origin, Solution};

/// One ensemble round: the plan and its score (`None`: failed to run).
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleRound {
    pub plan: String,
    pub score: Option<f64>,
}

fn format_solutions(solutions: &[Solution]) -> String {
    solutions
        .iter()
        .enumerate()
        .map(|(i, s)| {
            format!(
                "## Solution {}\n```python\n{}\n```",
                i + 1,
                s.script.trim_end()
            )
        })
        .collect::<Vec<_>>()
        .join("\n\n")
}

fn format_history(history: &[EnsembleRound]) -> String {
    history
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let score = r
                .score
                .map_or("failed to run".to_string(), |s| s.to_string());
            format!("Plan {}: {}\nScore: {score}", i + 1, r.plan.trim())
        })
        .collect::<Vec<_>>()
        .join("\n\n")
}

fn require_several(solutions: &[Solution]) -> Result<()> {
    if solutions.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "ensembling needs at least two solutions, got {}",
            solutions.len()
        )));
    }
    Ok(())
}

/// Next ensemble plan given the plans tried so far.
pub fn propose_ensemble_plan(
    sess: &mut Session<'_>,
    solutions: &[Solution],
    history: &[EnsembleRound],
) -> Result<String> {
    require_several(solutions)?;
    let mut bindings = Bindings::from([
        ("task", sess.task().prompt_text()),
        ("solutions", format_solutions(solutions)),
    ]);
    let variant = if history.is_empty() {
        Some("initial")
    } else {
        bindings.insert("history", format_history(history));
        None
    };
    let prompt = sess.render(AgentRole::EnsPlanner, variant, &bindings)?;
    Ok(sess
        .invoke_prompt(AgentRole::EnsPlanner, &prompt)?
        .trim()
        .to_string())
}

/// Script implementing `plan` over the solutions.
pub fn implement_ensemble(
    sess: &mut Session<'_>,
    solutions: &[Solution],
    plan: &str,
) -> Result<String> {
    require_several(solutions)?;
    let bindings = Bindings::from([
        ("task", sess.task().prompt_text()),
        ("solutions", format_solutions(solutions)),
        ("plan", plan.to_string()),
    ]);
    let script = extract_script(&sess.invoke(AgentRole::Ensembler, &bindings)?);
    if script.trim().is_empty() {
        return Err(Error::EmptyScript);
    }
    Ok(script)
}

/// Runs the configured number of ensemble rounds and returns the first
/// best-scoring ensemble, or the best input if no round produced one.
pub fn ensemble(sess: &mut Session<'_>, solutions: &[Solution]) -> Result<Solution> {
    require_several(solutions)?;
    let parents: Vec<_> = solutions.iter().map(|s| s.id.clone()).collect();
    let mut history: Vec<EnsembleRound> = Vec::new();
    let mut scored: Vec<Solution> = Vec::new();
    for _ in 0..sess.config().run.ensemble_rounds {
        match ensemble_round(sess, solutions, &history, &parents) {
            Ok((plan, outcome)) => {
                match &outcome {
                    Some(s) => {
                        sess.decide(Phase::Ensemble, Verdict::Score, Some(&s.id), s.score, "")?
                    }
                    None => sess.decide(Phase::Ensemble, Verdict::Discard, None, None, "")?,
                }
                history.push(EnsembleRound {
                    plan,
                    score: outcome.as_ref().and_then(|s| s.score).map(|s| s.value()),
                });
                scored.extend(outcome);
            }
            Err(Error::BudgetExhausted) => {
                sess.decide(Phase::Budget, Verdict::Truncate, None, None, "ensembling")?;
                break;
            }
            Err(e) => return Err(e),
        }
    }

    let scores = solutions
        .iter()
        .map(Solution::score)
        .collect::<Result<Vec<_>>>()?;
    let best_input = solutions[rank_scores(&scores)?[0]].clone();
    let round_scores = scored
        .iter()
        .map(Solution::score)
        .collect::<Result<Vec<_>>>()?;
    match first_argmax(&round_scores)? {
        Some(i) => {
            let pick = scored.swap_remove(i);
            sess.decide(
                Phase::Ensemble,
                Verdict::Select,
                Some(&pick.id),
                pick.score,
                "",
            )?;
            if improves(&best_input.score()?, &pick.score()?)? {
                sess.note(
                    NoteLevel::Info,
                    format!("ensemble {} scores below input {}", pick.id, best_input.id),
                )?;
            }
            Ok(pick)
        }
        None => {
            sess.decide(
                Phase::Ensemble,
                Verdict::Fallback,
                Some(&best_input.id),
                best_input.score,
                "",
            )?;
            Ok(best_input)
        }
    }
}

fn ensemble_round(
    sess: &mut Session<'_>,
    solutions: &[Solution],
    history: &[EnsembleRound],
    parents: &[crate::solution::SolutionId],
) -> Result<(String, Option<Solution>)> {
    let plan = match propose_ensemble_plan(sess, solutions, history) {
        Ok(p) => p,
        Err(Error::EmptyResponse { .. }) => return Ok((String::new(), None)),
        Err(e) => return Err(e),
    };
    let script = match implement_ensemble(sess, solutions, &plan) {
        Ok(s) => s,
        Err(Error::EmptyScript | Error::EmptyResponse { .. }) => return Ok((plan, None)),
        Err(e) => return Err(e),
    };
    Ok((
        plan,
        score_script(sess, &script, Origin::Ensembled, parents)?.ok(),
    ))
}
