//! Initial solution: retrieve model cards, build one candidate per card,
//! then merge candidates best-first while the merged script keeps up.

use crate::error::{Error, Result};
use crate::journal::{Phase, Verdict};
use crate::llm::{extract_script, parse_model_cards, AgentRole, Bindings, ModelCard};
use crate::robustness::score_script;
use crate::score::improves_or_ties;
use crate::session::Session;
use crate::solution::{sort_candidates, Origin, Solution};

/// `count` model cards: injected ones first, the rest from the retriever.
pub fn retrieve_models(sess: &mut Session<'_>, count: usize) -> Result<Vec<ModelCard>> {
    let mut cards: Vec<ModelCard> = sess
        .config()
        .guidance
        .model_cards
        .iter()
        .take(count)
        .cloned()
        .collect();
    let wanted = count - cards.len();
    if wanted == 0 {
        return Ok(cards);
    }
    let prompt = sess.render(
        AgentRole::Retriever,
        None,
        &Bindings::from([
            ("task", sess.task().prompt_text()),
            ("num_models", wanted.to_string()),
        ]),
    )?;
    let tries = sess.max_attempts();
    cards.extend(
        sess.invoke_parsed(AgentRole::Retriever, &prompt, tries, |r| {
            parse_model_cards(r, wanted)
        })?,
    );
    Ok(cards)
}

/// Writes, runs and debugs a script for one model card. `None` if the
/// candidate could not be made to run.
pub fn build_candidate(sess: &mut Session<'_>, card: &ModelCard) -> Result<Option<Solution>> {
    let bindings = Bindings::from([
        ("task", sess.task().prompt_text()),
        ("model_description", card.model_description.clone()),
        ("example_code", card.example_code.clone()),
    ]);
    let script = match sess.invoke(AgentRole::Init, &bindings) {
        Ok(r) => extract_script(&r),
        Err(Error::EmptyResponse { .. }) => String::new(),
        Err(e) => return Err(e),
    };
    if script.trim().is_empty() {
        sess.decide(
            Phase::Candidate,
            Verdict::Discard,
            None,
            None,
            "no script produced",
        )?;
        return Ok(None);
    }
    match score_script(sess, &script, Origin::Candidate, &[])? {
        Ok(s) => {
            sess.decide(
                Phase::Candidate,
                Verdict::Score,
                Some(&s.id),
                s.score,
                &card.model_description,
            )?;
            Ok(Some(s))
        }
        Err(bug) => {
            sess.decide(
                Phase::Candidate,
                Verdict::Discard,
                None,
                None,
                bug.traceback,
            )?;
            Ok(None)
        }
    }
}

/// Folds best-first candidates into the base solution. A merge is kept if
/// it scores at least as well as the base; the first merge that does not
/// ends the process.
pub fn merge_candidates(sess: &mut Session<'_>, ranked: &[Solution]) -> Result<Solution> {
    let (first, rest) = ranked.split_first().ok_or(Error::AllCandidatesFailed)?;
    let mut base = first.clone();
    for reference in rest {
        let merged = match merge_pair(sess, &base, reference) {
            Err(Error::BudgetExhausted) => {
                sess.decide(
                    Phase::Budget,
                    Verdict::Truncate,
                    Some(&base.id),
                    base.score,
                    "merging",
                )?;
                return Ok(base);
            }
            other => other?,
        };
        match merged {
            Some(m) if improves_or_ties(&m.score()?, &base.score()?)? => {
                sess.decide(Phase::Merge, Verdict::Accept, Some(&m.id), m.score, "")?;
                base = m;
            }
            rejected => {
                let score = rejected.as_ref().and_then(|m| m.score);
                let id = rejected.as_ref().map(|m| &m.id);
                let detail = if rejected.is_some() {
                    ""
                } else {
                    "merge failed to run"
                };
                sess.decide(Phase::Merge, Verdict::Reject, id, score, detail)?;
                sess.decide(Phase::Merge, Verdict::Stop, Some(&base.id), None, "")?;
                break;
            }
        }
    }
    Ok(base)
}

fn merge_pair(
    sess: &mut Session<'_>,
    base: &Solution,
    reference: &Solution,
) -> Result<Option<Solution>> {
    let bindings = Bindings::from([
        ("task", sess.task().prompt_text()),
        ("base_code", base.script.clone()),
        ("reference_code", reference.script.clone()),
    ]);
    let script = match sess.invoke(AgentRole::Merger, &bindings) {
        Ok(r) => extract_script(&r),
        Err(Error::EmptyResponse { .. }) => String::new(),
        Err(e) => return Err(e),
    };
    if script.trim().is_empty() {
        return Ok(None);
    }
    let parents = [base.id.clone(), reference.id.clone()];
    Ok(score_script(sess, &script, Origin::Merged, &parents)?.ok())
}

/// Retrieval, candidate generation and merging.
pub fn generate_initial_solution(sess: &mut Session<'_>) -> Result<Solution> {
    let count = sess.config().run.num_candidates as usize;
    let cards = retrieve_models(sess, count)?;
    let mut candidates = Vec::new();
    for card in &cards {
        match build_candidate(sess, card) {
            Ok(Some(s)) => candidates.push(s),
            Ok(None) => {}
            Err(Error::BudgetExhausted) => {
                sess.decide(
                    Phase::Budget,
                    Verdict::Truncate,
                    None,
                    None,
                    "building candidates",
                )?;
                break;
            }
            Err(e) => return Err(e),
        }
    }
    if candidates.is_empty() {
        return Err(Error::AllCandidatesFailed);
    }
    let ranked: Vec<Solution> = sort_candidates(&candidates)?
        .into_iter()
        .map(|i| candidates[i].clone())
        .collect();
    merge_candidates(sess, &ranked)
}
