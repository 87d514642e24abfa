//! Source-to-source passes over scripts.
//!
//! `reroll` and `fuse` are meaning-preserving by construction for the
//! patterns they accept; [`suggest`] additionally replays each candidate on
//! fixtures and drops any that changes the result. `generalize` proposes
//! predicates that extrapolate singleton edits to future data, so its
//! suggestions are data-dependent and never verified.
//!
//! Readability is compared by [`readability`]: statement count, then total
//! AST size.

mod fuse;
mod generalize;
mod reroll;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::executor::{replay, Sources, StabilityPolicy};
use crate::formula::Expr;
use crate::lang::{Script, Statement, Step};
use crate::model::RowId;

pub use fuse::fuse;
pub use generalize::generalize;
pub use reroll::reroll;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RewriteKind {
    Reroll,
    Fuse,
    Generalize,
}

/// Why a generalization was proposed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    /// Candidate predicate in script syntax.
    pub predicate: String,
    /// Rows the predicate selects on the state it was derived from.
    pub rows: Vec<RowId>,
    /// `(a, b)` when the new values fit `a * column + b` exactly.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub affine: Option<AffineFit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineFit {
    pub column: String,
    pub a: f64,
    pub b: f64,
}

/// A proposed replacement of `original` (statements `start..end`) by
/// `replacement`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewriteSuggestion {
    pub id: String,
    pub kind: RewriteKind,
    pub start: usize,
    pub end: usize,
    pub original: Vec<Step>,
    pub replacement: Vec<Step>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evidence: Option<Evidence>,
    /// Replay on fixtures showed no change in the result.
    pub verified: bool,
    /// Behaviour on other data may differ from the original script.
    pub data_dependent: bool,
}

impl RewriteSuggestion {
    pub(crate) fn new(kind: RewriteKind, script: &Script, start: usize, end: usize, replacement: Vec<Step>) -> Self {
        let original = script.steps[start..end].to_vec();
        let mut h = Sha256::new();
        h.update(format!("{kind:?}|{start}|{end}|"));
        for s in original.iter().chain(&replacement) {
            h.update(s.stmt.to_string());
            h.update(b";");
        }
        RewriteSuggestion {
            id: hex::encode(&h.finalize()[..8]),
            kind,
            start,
            end,
            original,
            replacement,
            evidence: None,
            verified: false,
            data_dependent: kind == RewriteKind::Generalize,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RewriteError {
    #[error("NO_CANDIDATE: no predicate separates the edited rows of column '{column}' from the others")]
    NoCandidate { column: String },
    #[error("STALE_SUGGESTION: the script no longer has the statements this suggestion replaces")]
    Stale,
    #[error("INCOMPARABLE: {0}")]
    Incomparable(String),
}

impl RewriteError {
    pub fn code(&self) -> &'static str {
        match self {
            RewriteError::NoCandidate { .. } => "NO_CANDIDATE",
            RewriteError::Stale => "STALE_SUGGESTION",
            RewriteError::Incomparable(_) => "INCOMPARABLE",
        }
    }
}

/// Statement count, then total AST size; smaller reads better.
pub fn readability(s: &Script) -> (usize, usize) {
    (s.len(), s.size())
}

/// The script with the suggestion's range replaced.
pub fn apply_suggestion(s: &Script, sug: &RewriteSuggestion) -> Result<Script, RewriteError> {
    if sug.end > s.steps.len() || sug.start > sug.end || s.steps[sug.start..sug.end] != sug.original[..] {
        return Err(RewriteError::Stale);
    }
    let mut out = s.clone();
    out.steps.splice(sug.start..sug.end, sug.replacement.iter().cloned());
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Equal,
    Different { detail: String },
    Incomparable { cause: String },
}

/// Replay both scripts and compare the values at every occupied position.
pub fn equivalence_check(original: &Script, rewritten: &Script, fixtures: &dyn Sources) -> Verdict {
    let policy = StabilityPolicy::default();
    let run = |s: &Script, which: &str| {
        replay(s, fixtures, &policy).map_err(|e| Verdict::Incomparable {
            cause: format!("{which} script: {e}"),
        })
    };
    let a = match run(original, "original") {
        Ok(r) => r.state,
        Err(v) => return v,
    };
    let b = match run(rewritten, "rewritten") {
        Ok(r) => r.state,
        Err(v) => return v,
    };
    if (a.width(), a.height()) != (b.width(), b.height()) {
        return Verdict::Different {
            detail: format!(
                "shape {}x{} vs {}x{}",
                a.width(),
                a.height(),
                b.width(),
                b.height()
            ),
        };
    }
    for ((p, x), (_, y)) in a.position_values().into_iter().zip(b.position_values()) {
        if x != y {
            return Verdict::Different {
                detail: format!("{p}: {x} vs {y}"),
            };
        }
    }
    Verdict::Equal
}

/// Verified readability suggestions: every `reroll` and `fuse` candidate
/// whose application leaves the replayed result unchanged.
pub fn suggest(s: &Script, fixtures: &dyn Sources) -> Result<Vec<RewriteSuggestion>, RewriteError> {
    if let Verdict::Incomparable { cause } = equivalence_check(s, s, fixtures) {
        return Err(RewriteError::Incomparable(cause));
    }
    let mut ranked = Vec::new();
    for sug in reroll(s).into_iter().chain(fuse(s)) {
        let rewritten = apply_suggestion(s, &sug)?;
        ranked.push((readability(&rewritten), sug, rewritten));
    }
    // Of overlapping candidates only the most readable result is offered.
    ranked.sort_by_key(|a| a.0);
    let mut out: Vec<RewriteSuggestion> = Vec::new();
    for (score, mut sug, rewritten) in ranked {
        let overlaps = out.iter().any(|o| o.start < sug.end && sug.start < o.end);
        if !overlaps && score.0 < s.len() && equivalence_check(s, &rewritten, fixtures) == Verdict::Equal {
            sug.verified = true;
            out.push(sug);
        }
    }
    out.sort_by_key(|o| o.start);
    Ok(out)
}

/// Columns a statement reads and writes, or `None` when it is positional
/// or structural and so is treated as touching everything.
pub(crate) struct Footprint {
    pub reads: Vec<String>,
    pub write: String,
    /// `ROWID = r` singleton target.
    pub row: Option<i64>,
}

fn expr_is_row_local(e: &Expr) -> bool {
    let mut ok = true;
    e.walk(&mut |n| ok &= !matches!(n, Expr::Ref(_) | Expr::Agg(..)));
    ok
}

pub(crate) fn rowid_target(c: &Expr) -> Option<i64> {
    use crate::value::{BinOp, Value};
    match c {
        Expr::Binary(BinOp::Eq, a, b) => match (&**a, &**b) {
            (Expr::RowId, Expr::Lit(Value::Int(r))) | (Expr::Lit(Value::Int(r)), Expr::RowId) => Some(*r),
            _ => None,
        },
        _ => None,
    }
}

pub(crate) fn footprint(stmt: &Statement) -> Option<Footprint> {
    match stmt {
        Statement::Update {
            column,
            formula,
            condition,
        } => {
            let mut reads = formula.expr().column_names();
            if !expr_is_row_local(formula.expr()) {
                return None;
            }
            if let Some(c) = condition {
                if !expr_is_row_local(c.expr()) || c.expr().mentions_prior() {
                    return None;
                }
                reads.extend(c.expr().column_names());
            }
            Some(Footprint {
                reads,
                write: column.clone(),
                row: condition.as_ref().and_then(|c| rowid_target(c.expr())),
            })
        }
        _ => None,
    }
}

/// The two statements give the same result in either order.
pub(crate) fn commute(a: &Statement, b: &Statement) -> bool {
    let (Some(x), Some(y)) = (footprint(a), footprint(b)) else {
        return false;
    };
    if x.write == y.write {
        // Same column, provably different rows.
        return matches!((x.row, y.row), (Some(r), Some(s)) if r != s);
    }
    !x.reads.contains(&y.write) && !y.reads.contains(&x.write)
}

#[cfg(test)]
mod tests;
