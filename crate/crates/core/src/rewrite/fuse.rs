//! Fold consecutive updates of one column into a single conditional
//! formula, absorbing a preceding `ADD COLUMN` into a derived column.
//!
//! `UPDATE c = g WHERE p` after a definition `F` becomes `IF(p, g', F)`
//! where `g'` is `g` with `VALUE` replaced by `F`. The original condition
//! is evaluated once, when its statement runs; the fused one is live. The
//! two agree when nothing later changes the columns `p` reads, which is
//! checked here, and when `p` is never an error, which only replay can
//! show.

use super::{RewriteKind, RewriteSuggestion};
use crate::formula::{Expr, Formula, UnOp};
use crate::lang::{Script, Statement, Step};
use crate::value::{BinOp, Value};

fn row_local(e: &Expr) -> bool {
    let mut ok = true;
    e.walk(&mut |n| ok &= !matches!(n, Expr::Ref(_) | Expr::Agg(..)));
    ok
}

fn boolean_shaped(e: &Expr) -> bool {
    match e {
        Expr::Lit(v) => matches!(v, Value::Bool(_)),
        Expr::Binary(op, ..) => matches!(
            op,
            BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge | BinOp::And | BinOp::Or
        ),
        Expr::Unary(UnOp::Not, _) | Expr::Between(..) | Expr::In(..) => true,
        _ => false,
    }
}

/// The condition can be made live: boolean, row-local, blind to `column`
/// and to `VALUE`, and reading nothing a later statement changes.
fn liftable(p: &Formula, column: &str, later: &[Step]) -> bool {
    let e = p.expr();
    if !boolean_shaped(e) || !row_local(e) || e.mentions_prior() {
        return false;
    }
    let reads = e.column_names();
    if reads.iter().any(|c| c == column) {
        return false;
    }
    later.iter().all(|s| match &s.stmt {
        Statement::Update { column, .. } | Statement::RemoveColumn { name: column } => !reads.contains(column),
        Statement::UpdateRegion { .. } | Statement::Move { .. } => false,
        _ => true,
    })
}

/// Fold the update at `step` into the definition `def` of `column`.
fn fold(def: Expr, step: &Statement, column: &str, later: &[Step]) -> Option<Expr> {
    let Statement::Update {
        column: c,
        formula,
        condition,
    } = step
    else {
        return None;
    };
    if c != column || !row_local(formula.expr()) {
        return None;
    }
    let new = formula.expr().clone().substitute_prior(&def);
    match condition {
        None => Some(new),
        Some(p) if liftable(p, column, later) => Some(Expr::if_(p.expr().clone(), new, def)),
        Some(_) => None,
    }
}

fn chain(s: &Script, i: usize) -> Option<RewriteSuggestion> {
    let steps = &s.steps;
    let (column, mut def, derived, mut j) = match &steps[i].stmt {
        Statement::AddColumn { name, formula, at } => match formula {
            Some(f) => (name.clone(), f.expr().clone(), Some(*at), i + 1),
            None => {
                let def = fold(Expr::Prior, &steps.get(i + 1)?.stmt, name, &steps[i + 1..])?;
                (name.clone(), def, Some(*at), i + 2)
            }
        },
        Statement::Update { column, .. } => {
            let def = fold(Expr::Prior, &steps[i].stmt, column, &steps[i..])?;
            (column.clone(), def, None, i + 1)
        }
        _ => return None,
    };
    while j < steps.len() {
        match fold(def.clone(), &steps[j].stmt, &column, &steps[j..]) {
            Some(d) => def = d,
            None => break,
        }
        j += 1;
    }
    if j - i < 2 {
        return None;
    }
    let stmt = match derived {
        Some(at) => Statement::AddColumn {
            name: column,
            formula: Some(Formula::new(def.substitute_prior(&Expr::Lit(Value::Null)))),
            at,
        },
        None => Statement::Update {
            column,
            formula: Formula::new(def),
            condition: None,
        },
    };
    let group = steps[i].group.filter(|g| steps[i..j].iter().all(|s| s.group == Some(*g)));
    Some(RewriteSuggestion::new(RewriteKind::Fuse, s, i, j, vec![Step { stmt, group }]))
}

/// Maximal fusable chains, left to right and non-overlapping.
pub fn fuse(s: &Script) -> Vec<RewriteSuggestion> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < s.steps.len() {
        match chain(s, i) {
            Some(sug) => {
                i = sug.end;
                out.push(sug);
            }
            None => i += 1,
        }
    }
    out
}
