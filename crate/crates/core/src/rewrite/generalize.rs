//! Propose set-at-a-time updates that cover a group of singleton edits.
//!
//! A singleton is `UPDATE c = f WHERE key = literal`. Singletons on one
//! column whose formulas share a shape form a group; the rows they hit on
//! the given state are the targets. Candidate predicates are conjunctions
//! of at most two atoms `attr = v` or `attr BETWEEN lo AND hi` that every
//! target satisfies, kept when they select exactly the targets.

use std::collections::BTreeMap;

use super::{AffineFit, Evidence, RewriteError, RewriteKind, RewriteSuggestion};
use crate::formula::{evaluate, Expr, Formula};
use crate::lang::{Script, Statement, Step};
use crate::model::{Pos, RowId, SheetState};
use crate::value::{sort_cmp, BinOp, Value};

/// Suggestions per group, best first.
const PER_GROUP: usize = 3;

struct Singleton {
    index: usize,
    formula: Formula,
    rows: Vec<usize>,
}

#[derive(Clone)]
struct Atom {
    expr: Expr,
    attr: usize,
    /// 2 for `=`, 3 for `BETWEEN`.
    arity: usize,
    matches: Vec<bool>,
}

fn shape(e: &Expr) -> Expr {
    e.clone().map(&mut |n| match n {
        Expr::Lit(_) => Expr::Lit(Value::Null),
        n => n,
    })
}

fn singleton(index: usize, stmt: &Statement, state: &SheetState) -> Option<(String, Singleton)> {
    let Statement::Update {
        column,
        formula,
        condition: Some(c),
    } = stmt
    else {
        return None;
    };
    let Expr::Binary(BinOp::Eq, a, b) = c.expr() else {
        return None;
    };
    let keyed = |k: &Expr, v: &Expr| matches!(k, Expr::RowId | Expr::Column(_)) && matches!(v, Expr::Lit(_));
    if !(keyed(a, b) || keyed(b, a)) || c.expr().column_names().contains(column) {
        return None;
    }
    let mut local = true;
    formula.expr().walk(&mut |e| local &= !matches!(e, Expr::Ref(_) | Expr::Agg(..) | Expr::Prior));
    if !local {
        return None;
    }
    let rows: Vec<usize> = (0..state.height())
        .filter(|&r| evaluate(c, state, Pos::new(0, r)).is_true())
        .collect();
    (!rows.is_empty()).then(|| {
        (
            column.clone(),
            Singleton {
                index,
                formula: formula.clone(),
                rows,
            },
        )
    })
}

fn atoms(state: &SheetState, target_col: usize, targets: &[usize]) -> Vec<Atom> {
    let mut out = Vec::new();
    let names = state.column_names();
    for (attr, name) in names.iter().enumerate() {
        if attr == target_col {
            continue;
        }
        let value = |r: usize| state.value_at(Pos::new(attr, r)).cloned().unwrap_or(Value::Null);
        let mut vals: Vec<Value> = targets.iter().map(|&r| value(r)).collect();
        if vals.iter().any(|v| v.is_null() || v.is_error()) {
            continue;
        }
        vals.sort_by(|a, b| sort_cmp(a, b, false));
        let (lo, hi) = (vals[0].clone(), vals[vals.len() - 1].clone());
        let col = Expr::col(name);
        let mut exprs = Vec::new();
        if vals.iter().all(|v| v.sql_eq(&lo)) {
            exprs.push((Expr::bin(BinOp::Eq, col.clone(), Expr::Lit(lo.clone())), 2));
        } else if vals.iter().all(|v| v.as_f64().is_some()) {
            exprs.push((
                Expr::Between(Box::new(col), Box::new(Expr::Lit(lo)), Box::new(Expr::Lit(hi))),
                3,
            ));
        }
        for (expr, arity) in exprs {
            let f = Formula::new(expr.clone());
            let matches = (0..state.height())
                .map(|r| evaluate(&f, state, Pos::new(0, r)).is_true())
                .collect();
            out.push(Atom {
                expr,
                attr,
                arity,
                matches,
            });
        }
    }
    out
}

/// Sort key of a predicate: conjunct count, arity, attributes.
type Rank = (usize, usize, Vec<usize>);

/// Exact predicates over `targets`, best first.
fn predicates(state: &SheetState, target_col: usize, targets: &[usize]) -> Vec<(Expr, Vec<usize>)> {
    let wanted: Vec<bool> = (0..state.height()).map(|r| targets.contains(&r)).collect();
    let atoms = atoms(state, target_col, targets);
    let exact: Vec<bool> = atoms.iter().map(|a| a.matches == wanted).collect();
    let mut found: Vec<(Rank, Expr)> = Vec::new();
    for (i, a) in atoms.iter().enumerate() {
        if exact[i] {
            found.push(((1, a.arity, vec![a.attr]), a.expr.clone()));
        }
    }
    for (i, a) in atoms.iter().enumerate() {
        for (j, b) in atoms.iter().enumerate().skip(i + 1) {
            if exact[i] || exact[j] || a.attr == b.attr {
                continue;
            }
            let both: Vec<bool> = a.matches.iter().zip(&b.matches).map(|(x, y)| *x && *y).collect();
            if both == wanted {
                found.push((
                    (2, a.arity + b.arity, vec![a.attr, b.attr]),
                    Expr::bin(BinOp::And, a.expr.clone(), b.expr.clone()),
                ));
            }
        }
    }
    found.sort_by(|a, b| a.0.cmp(&b.0));
    found.into_iter().map(|(_, e)| (e, targets.to_vec())).collect()
}

/// Round to ten decimal places so `0.85` comes out as written.
fn tidy(x: f64) -> f64 {
    let t = (x * 1e10).round() / 1e10;
    if t == 0.0 {
        0.0
    } else {
        t
    }
}

fn number(x: f64) -> Expr {
    if x.fract() == 0.0 && x.abs() < 1e15 {
        Expr::Lit(Value::Int(x as i64))
    } else {
        Expr::Lit(Value::Float(x))
    }
}

/// `v = a * x + b` through every point, with `x` from one other column.
fn affine(state: &SheetState, target_col: usize, points: &[(usize, f64)]) -> Option<(AffineFit, Expr)> {
    for (attr, name) in state.column_names().iter().enumerate() {
        if attr == target_col {
            continue;
        }
        let xs: Option<Vec<(f64, f64)>> = points
            .iter()
            .map(|&(r, v)| Some((state.value_at(Pos::new(attr, r))?.as_f64()?, v)))
            .collect();
        let Some(xs) = xs else { continue };
        let Some(&(x2, v2)) = xs.iter().find(|(x, _)| *x != xs[0].0) else {
            continue;
        };
        let (x1, v1) = xs[0];
        let a = tidy((v2 - v1) / (x2 - x1));
        let b = tidy(v1 - a * x1);
        let exact = xs
            .iter()
            .all(|&(x, v)| (a * x + b - v).abs() <= 1e-9 * v.abs().max(1.0));
        if !exact {
            continue;
        }
        let mut e = Expr::col(name);
        if a != 1.0 {
            e = Expr::bin(BinOp::Mul, number(a), e);
        }
        if b != 0.0 {
            e = Expr::bin(BinOp::Add, e, number(b));
        }
        return Some((
            AffineFit {
                column: name.to_string(),
                a,
                b,
            },
            e,
        ));
    }
    None
}

/// Generalizations of singleton groups with at least two members, judged
/// on `state`. Fails with `NO_CANDIDATE` when some group exists but no
/// group has a separating predicate.
pub fn generalize(s: &Script, state: &SheetState) -> Result<Vec<RewriteSuggestion>, RewriteError> {
    let mut groups: BTreeMap<(String, String), Vec<Singleton>> = BTreeMap::new();
    for (i, step) in s.steps.iter().enumerate() {
        if let Some((column, single)) = singleton(i, &step.stmt, state) {
            let key = (column, format!("{:?}", shape(single.formula.expr())));
            groups.entry(key).or_default().push(single);
        }
    }
    let mut out = Vec::new();
    let mut failed = None;
    for ((column, _), members) in groups {
        if members.len() < 2 {
            continue;
        }
        let Some(target_col) = state.column_names().iter().position(|c| *c == column) else {
            continue;
        };
        let mut targets: Vec<usize> = members.iter().flat_map(|m| m.rows.iter().copied()).collect();
        targets.sort_unstable();
        targets.dedup();
        let same = members.iter().all(|m| m.formula == members[0].formula);
        let (formula, fit) = if same {
            (members[0].formula.expr().clone(), None)
        } else {
            let points: Option<Vec<(usize, f64)>> = members
                .iter()
                .flat_map(|m| m.rows.iter().map(move |&r| m.formula.as_literal()?.as_f64().map(|v| (r, v))))
                .collect();
            match points.and_then(|p| affine(state, target_col, &p)) {
                Some((fit, e)) => (e, Some(fit)),
                None => continue,
            }
        };
        let preds = predicates(state, target_col, &targets);
        if preds.is_empty() {
            failed.get_or_insert(column);
            continue;
        }
        let start = members[0].index;
        let end = members.last().expect("two or more").index + 1;
        let indexes: Vec<usize> = members.iter().map(|m| m.index).collect();
        for (pred, rows) in preds.into_iter().take(PER_GROUP) {
            let condition = Formula::new(pred);
            let mut replacement: Vec<Step> = (start..end)
                .filter(|i| !indexes.contains(i))
                .map(|i| s.steps[i].clone())
                .collect();
            replacement.push(Step::new(Statement::Update {
                column: column.clone(),
                formula: Formula::new(formula.clone()),
                condition: Some(condition.clone()),
            }));
            let mut sug = RewriteSuggestion::new(RewriteKind::Generalize, s, start, end, replacement);
            sug.evidence = Some(Evidence {
                predicate: condition.script_text(),
                rows: rows.iter().map(|&r| state.coords().rows()[r]).collect::<Vec<RowId>>(),
                affine: fit.clone(),
            });
            out.push(sug);
        }
    }
    match (out.is_empty(), failed) {
        (true, Some(column)) => Err(RewriteError::NoCandidate { column }),
        _ => Ok(out),
    }
}
