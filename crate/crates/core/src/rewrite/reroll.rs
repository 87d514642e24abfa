//! Collapse families of statements that differ only in the literal of a
//! `key = literal` condition into one statement over `IN` or `BETWEEN`.

use std::collections::BTreeSet;

use super::{commute, RewriteKind, RewriteSuggestion};
use crate::formula::{Expr, Formula};
use crate::lang::{Script, Statement, Step};
use crate::value::{sort_cmp, BinOp, Value};

/// A statement with its condition's literal cut out.
#[derive(Debug, Clone, PartialEq)]
struct Holed {
    skeleton: Statement,
    key: Expr,
    value: Value,
}

fn split_condition(c: &Formula) -> Option<(Expr, Value)> {
    let Expr::Binary(BinOp::Eq, a, b) = c.expr() else {
        return None;
    };
    let (key, lit) = match (&**a, &**b) {
        (k @ (Expr::RowId | Expr::Column(_)), Expr::Lit(v)) | (Expr::Lit(v), k @ (Expr::RowId | Expr::Column(_))) => {
            (k.clone(), v.clone())
        }
        _ => return None,
    };
    if matches!(lit, Value::Null | Value::Error(_)) {
        return None;
    }
    Some((key, lit))
}

fn holed(stmt: &Statement) -> Option<Holed> {
    let blank = || Some(Formula::null());
    match stmt {
        Statement::Update {
            column,
            formula,
            condition: Some(c),
        } => {
            let (key, value) = split_condition(c)?;
            // The key must not be the column being rewritten, or later
            // members would test values written by earlier ones.
            if key == Expr::Column(column.clone()) {
                return None;
            }
            let mut local = true;
            formula.expr().walk(&mut |e| local &= !matches!(e, Expr::Ref(_) | Expr::Agg(..)));
            if !local {
                return None;
            }
            Some(Holed {
                skeleton: Statement::Update {
                    column: column.clone(),
                    formula: formula.clone(),
                    condition: blank(),
                },
                key,
                value,
            })
        }
        Statement::Delete { condition } => {
            let (key, value) = split_condition(condition)?;
            Some(Holed {
                skeleton: Statement::Delete {
                    condition: Formula::null(),
                },
                key,
                value,
            })
        }
        _ => None,
    }
}

fn collapsed_condition(key: &Expr, values: &[Value]) -> Formula {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| sort_cmp(a, b, false));
    let ints: Option<Vec<i64>> = sorted
        .iter()
        .map(|v| match v {
            Value::Int(i) => Some(*i),
            _ => None,
        })
        .collect();
    if let (Expr::RowId, Some(ints)) = (key, ints) {
        if ints.windows(2).all(|w| w[1] == w[0] + 1) {
            return Formula::new(Expr::Between(
                Box::new(Expr::RowId),
                Box::new(Expr::Lit(Value::Int(ints[0]))),
                Box::new(Expr::Lit(Value::Int(*ints.last().expect("two or more")))),
            ));
        }
    }
    Formula::new(Expr::In(
        Box::new(key.clone()),
        sorted.into_iter().map(Expr::Lit).collect(),
    ))
}

/// Grow a family from `first`; members move down to the last member's
/// position, so each must commute with every non-member it passes.
fn family(s: &Script, first: usize, claimed: &BTreeSet<usize>, same_group: bool) -> Vec<usize> {
    let Some(head) = holed(&s.steps[first].stmt) else {
        return Vec::new();
    };
    let group = s.steps[first].group;
    if same_group && group.is_none() {
        return Vec::new();
    }
    let mut members = vec![first];
    let mut values = vec![head.value.clone()];
    let mut passed: Vec<usize> = Vec::new();
    for j in first + 1..s.steps.len() {
        let step = &s.steps[j];
        let candidate = (!claimed.contains(&j) && (!same_group || step.group == group))
            .then(|| holed(&step.stmt))
            .flatten()
            .filter(|h| h.skeleton == head.skeleton && h.key == head.key && !values.contains(&h.value));
        match candidate {
            Some(h) => {
                let movable = members.iter().all(|&m| {
                    passed
                        .iter()
                        .filter(|&&n| n > m)
                        .all(|&n| commute(&s.steps[m].stmt, &s.steps[n].stmt))
                });
                if !movable {
                    break;
                }
                members.push(j);
                values.push(h.value);
            }
            None => {
                // A statement no member can pass ends the family.
                if !commute(&s.steps[first].stmt, &step.stmt) {
                    break;
                }
                passed.push(j);
            }
        }
    }
    members
}

fn suggestion(s: &Script, members: &[usize]) -> RewriteSuggestion {
    let start = members[0];
    let end = *members.last().expect("non-empty") + 1;
    let head = holed(&s.steps[start].stmt).expect("member");
    let values: Vec<Value> = members
        .iter()
        .map(|&m| holed(&s.steps[m].stmt).expect("member").value)
        .collect();
    let condition = collapsed_condition(&head.key, &values);
    let stmt = match head.skeleton {
        Statement::Update { column, formula, .. } => Statement::Update {
            column,
            formula,
            condition: Some(condition),
        },
        Statement::Delete { .. } => Statement::Delete { condition },
        _ => unreachable!("only updates and deletes have holes"),
    };
    let group = s.steps[start].group.filter(|g| members.iter().all(|&m| s.steps[m].group == Some(*g)));
    let mut replacement: Vec<Step> = (start..end)
        .filter(|i| !members.contains(i))
        .map(|i| s.steps[i].clone())
        .collect();
    replacement.push(Step { stmt, group });
    RewriteSuggestion::new(RewriteKind::Reroll, s, start, end, replacement)
}

/// Families of two or more statements that collapse to one. Families whose
/// members share a gesture group are found first.
pub fn reroll(s: &Script) -> Vec<RewriteSuggestion> {
    let mut claimed = BTreeSet::new();
    let mut out = Vec::new();
    for same_group in [true, false] {
        for i in 0..s.steps.len() {
            if claimed.contains(&i) {
                continue;
            }
            let members = family(s, i, &claimed, same_group);
            if members.len() >= 2 {
                claimed.extend(members.iter().copied());
                out.push(suggestion(s, &members));
            }
        }
    }
    out
}
