//! Direction-aware scores and the orderings every search loop relies on.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Whether larger or smaller metric values are better.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Maximize,
    Minimize,
}

impl Direction {
    pub fn flipped(self) -> Self {
        match self {
            Direction::Maximize => Direction::Minimize,
            Direction::Minimize => Direction::Maximize,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Maximize => "maximize",
            Direction::Minimize => "minimize",
        })
    }
}

impl std::str::FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "maximize" | "max" | "higher" => Ok(Direction::Maximize),
            "minimize" | "min" | "lower" => Ok(Direction::Minimize),
            other => Err(Error::Config(format!("unknown direction `{other}`"))),
        }
    }
}

/// Outcome of [`compare_scores`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    ABetter,
    BBetter,
    Equal,
}

/// A finite metric value together with the direction it is judged in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    value: f64,
    direction: Direction,
}

impl ScoreRecord {
    pub fn new(value: f64, direction: Direction) -> Result<Self> {
        if !value.is_finite() {
            return Err(Error::NonFiniteScore(value.to_string()));
        }
        Ok(Self { value, direction })
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    /// The value mapped so that larger is always better.
    fn normalized(&self) -> f64 {
        match self.direction {
            Direction::Maximize => self.value,
            Direction::Minimize => -self.value,
        }
    }
}

impl fmt::Display for ScoreRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value)
    }
}

pub fn compare_scores(a: &ScoreRecord, b: &ScoreRecord) -> Result<Verdict> {
    if a.direction != b.direction {
        return Err(Error::DirectionMismatch(a.direction, b.direction));
    }
    // Both values are finite, so partial_cmp always succeeds.
    Ok(match a.normalized().partial_cmp(&b.normalized()) {
        Some(Ordering::Greater) => Verdict::ABetter,
        Some(Ordering::Less) => Verdict::BBetter,
        _ => Verdict::Equal,
    })
}

/// Acceptance test used by merging and refinement: ties are accepted.
pub fn improves_or_ties(candidate: &ScoreRecord, incumbent: &ScoreRecord) -> Result<bool> {
    Ok(compare_scores(candidate, incumbent)? != Verdict::BBetter)
}

/// Strict improvement.
pub fn improves(candidate: &ScoreRecord, incumbent: &ScoreRecord) -> Result<bool> {
    Ok(compare_scores(candidate, incumbent)? == Verdict::ABetter)
}

/// Best-first stable ordering of scores. Returns zero-based indices.
pub fn rank_scores(scores: &[ScoreRecord]) -> Result<Vec<usize>> {
    if let Some(first) = scores.first() {
        if let Some(bad) = scores.iter().find(|s| s.direction != first.direction) {
            return Err(Error::DirectionMismatch(first.direction, bad.direction));
        }
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    // sort_by is stable, so ties keep their original order.
    order.sort_by(|&i, &j| {
        scores[j]
            .normalized()
            .partial_cmp(&scores[i].normalized())
            .unwrap_or(Ordering::Equal)
    });
    Ok(order)
}

/// Index of the first best score, if any.
pub fn first_argmax(scores: &[ScoreRecord]) -> Result<Option<usize>> {
    let mut best: Option<usize> = None;
    for (i, s) in scores.iter().enumerate() {
        match best {
            None => best = Some(i),
            Some(b) if improves(s, &scores[b])? => best = Some(i),
            _ => {}
        }
    }
    Ok(best)
}
