//! Translation of UI gestures into statements.

use serde::{Deserialize, Serialize};

use super::{rowid_eq, ExecError};
use crate::formula::{adapt, parse_formula, Expr, Formula};
use crate::lang::{GroupId, RegionSpec, RegionTarget, SortKey, Statement, Step};
use crate::model::{Pos, RowId, SheetState};
use crate::value::{infer_literal, CastType, Value};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Gesture {
    /// Type into a cell. Text starting with `=` is a formula; anything else
    /// is a literal.
    EditCell { pos: Pos, text: String },
    Typecast { region: RegionSpec, ty: CastType },
    /// Copy the source rectangle's formulas onto the target, tiling the
    /// source when the target is larger.
    CopyPaste { source: (Pos, Pos), target: (Pos, Pos) },
    CutPaste { source: (Pos, Pos), dest: Pos },
    /// Move the listed rows, in order, so they start at index `to` of the
    /// remaining rows.
    DragRows { rows: Vec<RowId>, to: usize },
    DragColumns { columns: Vec<String>, to: usize },
    InsertRow { index: usize, after: bool },
    InsertColumn {
        index: usize,
        after: bool,
        name: Option<String>,
    },
    DeleteRows { rows: Vec<RowId> },
    Sort { keys: Vec<SortKey> },
    /// Keep only rows satisfying `predicate` (host-free formula text).
    Filter { predicate: String },
}

fn rect(a: Pos, b: Pos) -> (Pos, Pos) {
    (
        Pos::new(a.col.min(b.col), a.row.min(b.row)),
        Pos::new(a.col.max(b.col), a.row.max(b.row)),
    )
}

fn in_grid(state: &SheetState, p: Pos) -> Result<(), ExecError> {
    if state.coords().in_grid(p) {
        Ok(())
    } else {
        Err(ExecError::EmptyTarget)
    }
}

fn column_name(state: &SheetState, col: usize) -> String {
    state.coords().columns()[col].name.clone()
}

fn row_id(state: &SheetState, row: usize) -> RowId {
    state.coords().rows()[row]
}

/// Minimal contiguous window of `old` that differs from `new`, as the items
/// of `new` in that window.
fn changed_window<T: PartialEq + Clone>(old: &[T], new: &[T]) -> Vec<T> {
    let lo = old.iter().zip(new).take_while(|(a, b)| a == b).count();
    if lo == old.len() {
        return Vec::new();
    }
    let hi = old.len() - old.iter().rev().zip(new.iter().rev()).take_while(|(a, b)| a == b).count();
    new[lo..hi].to_vec()
}

fn drag<T: PartialEq + Clone>(all: &[T], moved: &[T], to: usize) -> Vec<T> {
    let mut rest: Vec<T> = all.iter().filter(|x| !moved.contains(x)).cloned().collect();
    let to = to.min(rest.len());
    rest.splice(to..to, moved.iter().cloned());
    rest
}

/// Statements realizing `g` on `state`, all tagged with `group`.
pub fn gesture_to_statements(
    g: &Gesture,
    state: &SheetState,
    group: GroupId,
) -> Result<Vec<Step>, ExecError> {
    let stmts = match g {
        Gesture::EditCell { pos, text } => {
            in_grid(state, *pos)?;
            let formula = if text.trim_start().starts_with('=') {
                parse_formula(text, *pos).map_err(|e| ExecError::Syntax(e.to_string()))?
            } else {
                Formula::literal(infer_literal(text))
            };
            vec![Statement::Update {
                column: column_name(state, pos.col),
                formula,
                condition: Some(rowid_eq(row_id(state, pos.row))),
            }]
        }
        Gesture::Typecast { region, ty } => {
            let any = state
                .coords()
                .cells_row_major()
                .iter()
                .any(|(p, _)| region.contains(*p));
            if !any {
                return Err(ExecError::EmptyTarget);
            }
            vec![Statement::UpdateRegion {
                region: RegionTarget {
                    spec: region.clone(),
                    predicate: None,
                },
                formula: Formula::new(Expr::Cast(Box::new(Expr::Prior), *ty)),
            }]
        }
        Gesture::CopyPaste { source, target } => {
            let (s0, s1) = rect(source.0, source.1);
            let (t0, t1) = rect(target.0, target.1);
            for p in [s0, s1, t0, t1] {
                in_grid(state, p)?;
            }
            let (w, h) = (s1.col - s0.col + 1, s1.row - s0.row + 1);
            let mut out = Vec::new();
            for r in t0.row..=t1.row {
                for c in t0.col..=t1.col {
                    let src = Pos::new(s0.col + (c - t0.col) % w, s0.row + (r - t0.row) % h);
                    let f = &state.cell_at(src).expect("in grid").formula;
                    let offset = (c as i64 - src.col as i64, r as i64 - src.row as i64);
                    out.push(Statement::Update {
                        column: column_name(state, c),
                        formula: adapt(f, offset),
                        condition: Some(rowid_eq(row_id(state, r))),
                    });
                }
            }
            out
        }
        Gesture::CutPaste { source, dest } => {
            let (s0, s1) = rect(source.0, source.1);
            for p in [s0, s1, *dest] {
                in_grid(state, p)?;
            }
            vec![Statement::Move {
                from: s0,
                to: s1,
                dest: *dest,
            }]
        }
        Gesture::DragRows { rows, to } => {
            if rows.is_empty() {
                return Err(ExecError::EmptyTarget);
            }
            for r in rows {
                state.coords().row_index(*r).ok_or(ExecError::UnknownRowId(*r))?;
            }
            let all = state.coords().rows();
            let window = changed_window(all, &drag(all, rows, *to));
            if window.is_empty() {
                Vec::new()
            } else {
                vec![Statement::ReorderRows { rows: window }]
            }
        }
        Gesture::DragColumns { columns, to } => {
            if columns.is_empty() {
                return Err(ExecError::EmptyTarget);
            }
            for c in columns {
                super::column_index(state, c)?;
            }
            let all = state.column_names().into_iter().map(str::to_string).collect::<Vec<_>>();
            let window = changed_window(&all, &drag(&all, columns, *to));
            if window.is_empty() {
                Vec::new()
            } else {
                vec![Statement::ReorderColumns { names: window }]
            }
        }
        Gesture::InsertRow { index, after } => {
            let at = index + *after as usize;
            if at > state.height() {
                return Err(ExecError::OutOfRange(format!("row {} beyond the sheet", at + 1)));
            }
            vec![Statement::InsertRow {
                assignments: Vec::new(),
                at: (at < state.height()).then_some(at),
            }]
        }
        Gesture::InsertColumn { index, after, name } => {
            let at = index + *after as usize;
            if at > state.width() {
                return Err(ExecError::OutOfRange(format!("column {} beyond the sheet", at + 1)));
            }
            let name = name.clone().unwrap_or_else(|| {
                (1..)
                    .map(|k| format!("column_{k}"))
                    .find(|n| state.coords().column_by_name(n).is_none())
                    .expect("unbounded")
            });
            vec![Statement::AddColumn {
                name,
                formula: None,
                at: (at < state.width()).then_some(at),
            }]
        }
        Gesture::DeleteRows { rows } => {
            for r in rows {
                state.coords().row_index(*r).ok_or(ExecError::UnknownRowId(*r))?;
            }
            let condition = match rows.as_slice() {
                [] => return Err(ExecError::EmptyTarget),
                [r] => rowid_eq(*r),
                rs => Formula::new(Expr::In(
                    Box::new(Expr::RowId),
                    rs.iter().map(|r| Expr::Lit(Value::Int(r.0 as i64))).collect(),
                )),
            };
            vec![Statement::Delete { condition }]
        }
        Gesture::Sort { keys } => {
            if keys.is_empty() {
                return Err(ExecError::EmptyTarget);
            }
            for k in keys {
                super::column_index(state, &k.column)?;
            }
            vec![Statement::Sort { keys: keys.clone() }]
        }
        Gesture::Filter { predicate } => {
            let p = crate::formula::parse_formula_text(predicate, None)
                .map_err(|e| ExecError::Syntax(e.to_string()))?;
            vec![Statement::Delete {
                condition: Formula::new(Expr::not_(p.into_expr())),
            }]
        }
    };
    Ok(stmts.into_iter().map(|s| Step::grouped(s, group)).collect())
}
