//! Solutions, code blocks and the textual block replacement primitive.

use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::score::{rank_scores, ScoreRecord};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SolutionId(String);

impl SolutionId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for SolutionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Which stage of the search produced a solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Candidate,
    Merged,
    Refined,
    Ensembled,
    Finalized,
}

/// A complete runnable script plus its provenance and (once evaluated) its score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub id: SolutionId,
    pub script: String,
    pub origin: Origin,
    pub lineage: Vec<SolutionId>,
    pub score: Option<ScoreRecord>,
}

impl Solution {
    pub fn new(id: SolutionId, script: impl Into<String>, origin: Origin) -> Result<Self> {
        let script = script.into();
        if script.trim().is_empty() {
            return Err(Error::EmptyScript);
        }
        Ok(Self {
            id,
            script,
            origin,
            lineage: Vec::new(),
            score: None,
        })
    }

    pub fn with_parents(mut self, parents: impl IntoIterator<Item = SolutionId>) -> Self {
        self.lineage.extend(parents);
        self
    }

    pub fn with_score(mut self, score: ScoreRecord) -> Self {
        self.score = Some(score);
        self
    }

    pub fn score(&self) -> Result<ScoreRecord> {
        self.score
            .ok_or_else(|| Error::UnscoredSolution(self.id.to_string()))
    }

    /// Same script, new identity and origin, with `self` as the sole parent.
    pub fn derive(&self, id: SolutionId, origin: Origin) -> Self {
        Self {
            id,
            script: self.script.clone(),
            origin,
            lineage: vec![self.id.clone()],
            score: self.score,
        }
    }
}

/// A contiguous span of a script, as text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CodeBlock(String);

impl CodeBlock {
    pub fn new(text: impl Into<String>) -> Result<Self> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(Error::EmptyBlock);
        }
        Ok(Self(text))
    }

    pub fn text(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for CodeBlock {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Best-first stable ordering of scored solutions (zero-based indices).
pub fn sort_candidates(solutions: &[Solution]) -> Result<Vec<usize>> {
    let scores = solutions
        .iter()
        .map(Solution::score)
        .collect::<Result<Vec<_>>>()?;
    rank_scores(&scores)
}

/// Byte range of the unique occurrence of `block` in `script`.
///
/// Exact matching is tried first. If the block does not occur verbatim, both
/// texts are compared after normalizing line endings, collapsing runs of
/// spaces and tabs, and dropping trailing whitespace on each line; the
/// returned range then covers the matching span of the original script.
pub fn locate_block(script: &str, block: &str) -> Result<Range<usize>> {
    if block.trim().is_empty() {
        return Err(Error::EmptyBlock);
    }
    let exact = occurrences(script, block);
    match exact.len() {
        1 => return Ok(exact[0]..exact[0] + block.len()),
        n if n > 1 => return Err(Error::AmbiguousBlock(n)),
        _ => {}
    }

    let haystack = Normalized::new(script);
    let needle = Normalized::new(block.trim());
    if needle.text.is_empty() {
        return Err(Error::EmptyBlock);
    }
    let found = occurrences(&haystack.text, &needle.text);
    match found.len() {
        0 => Err(Error::BlockNotFound),
        1 => {
            let start = found[0];
            let end = start + needle.text.len();
            Ok(haystack.starts[start]..haystack.ends[end - 1])
        }
        n => Err(Error::AmbiguousBlock(n)),
    }
}

/// `script` with the unique occurrence of `old` substituted by `new`.
pub fn replace_in_script(script: &str, old: &str, new: &str) -> Result<String> {
    let span = locate_block(script, old)?;
    let mut out = String::with_capacity(script.len() - span.len() + new.len());
    out.push_str(&script[..span.start]);
    out.push_str(new);
    out.push_str(&script[span.end..]);
    Ok(out)
}

/// A new solution whose script has `old` replaced by `new`; `s` is recorded
/// as its parent.
pub fn replace_block(
    s: &Solution,
    old: &CodeBlock,
    new: &CodeBlock,
    id: SolutionId,
) -> Result<Solution> {
    let script = replace_in_script(&s.script, old.text(), new.text())?;
    Ok(Solution {
        id,
        script,
        origin: s.origin,
        lineage: vec![s.id.clone()],
        score: None,
    })
}

/// Start offsets of every (possibly overlapping) occurrence.
fn occurrences(haystack: &str, needle: &str) -> Vec<usize> {
    let mut hits = Vec::new();
    let mut from = 0;
    while let Some(pos) = haystack[from..].find(needle) {
        hits.push(from + pos);
        // Advance by one character so overlapping matches are counted.
        let step = haystack[from + pos..]
            .chars()
            .next()
            .map_or(1, char::len_utf8);
        from += pos + step;
        if from > haystack.len() {
            break;
        }
    }
    hits
}

/// Whitespace-normalized text with a byte map back into the source.
struct Normalized {
    text: String,
    /// For each byte of `text`, the source offset where it starts.
    starts: Vec<usize>,
    /// For each byte of `text`, the source offset just past it.
    ends: Vec<usize>,
}

impl Normalized {
    fn new(source: &str) -> Self {
        let mut text = String::with_capacity(source.len());
        let mut starts = Vec::with_capacity(source.len());
        let mut ends = Vec::with_capacity(source.len());
        // A pending run of horizontal whitespace: (start, end) in source.
        let mut pending: Option<(usize, usize)> = None;

        let mut iter = source.char_indices().peekable();
        while let Some((i, c)) = iter.next() {
            match c {
                ' ' | '\t' => {
                    let end = i + 1;
                    pending = Some(pending.map_or((i, end), |(s, _)| (s, end)));
                }
                '\r' if matches!(iter.peek(), Some((_, '\n'))) => {
                    // Folded into the following '\n'.
                    pending = None;
                    let (j, _) = iter.next().unwrap_or((i + 1, '\n'));
                    push(&mut text, &mut starts, &mut ends, '\n', i, j + 1);
                }
                '\n' | '\r' => {
                    // Trailing whitespace before a line break is dropped.
                    pending = None;
                    push(&mut text, &mut starts, &mut ends, '\n', i, i + 1);
                }
                _ => {
                    if let Some((s, e)) = pending.take() {
                        push(&mut text, &mut starts, &mut ends, ' ', s, e);
                    }
                    push(&mut text, &mut starts, &mut ends, c, i, i + c.len_utf8());
                }
            }
        }
        Self { text, starts, ends }
    }
}

fn push(
    text: &mut String,
    starts: &mut Vec<usize>,
    ends: &mut Vec<usize>,
    c: char,
    s: usize,
    e: usize,
) {
    text.push(c);
    for _ in 0..c.len_utf8() {
        starts.push(s);
        ends.push(e);
    }
}
