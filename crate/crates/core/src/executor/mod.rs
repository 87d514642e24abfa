//! Statement execution with stability semantics, CSV loading, script replay
//! and translation of UI gestures into statements.

mod csv_load;
mod gesture;
mod replay;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formula::graph::recompute_in_place;
use crate::formula::{
    dependency_graph, evaluate, rebase, Expr, Formula, Stability, Transform,
};
use crate::lang::{RegionSpec, SortKey, Statement};
use crate::model::{CellId, ColId, ModelError, Pos, RowId, SheetState};
use crate::value::{sort_cmp, Value};

pub use csv_load::{load_csv, load_csv_bytes, LoadOptions};
pub use gesture::{gesture_to_statements, Gesture};
pub use replay::{
    load_source, replay, replay_steps, FsSources, NoSources, Replay, ReplayError, Sources,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExecError {
    #[error("UNKNOWN_COLUMN: no column named '{0}'")]
    UnknownColumn(String),
    #[error("UNKNOWN_ROWID: no row with id {0}")]
    UnknownRowId(RowId),
    #[error("DUPLICATE_ROWID: row {0} listed twice")]
    DuplicateRowId(RowId),
    #[error("DUPLICATE_COLUMN: column '{0}' already exists or is listed twice")]
    DuplicateColumn(String),
    #[error("OUT_OF_RANGE: {0}")]
    OutOfRange(String),
    #[error("EMPTY_TARGET: the gesture selects no cells")]
    EmptyTarget,
    #[error("IO: {path}: {message}")]
    Io { path: String, message: String },
    #[error("CSV: {0}")]
    Csv(String),
    #[error("UNKNOWN_PAGE: {0}")]
    UnknownPage(String),
    #[error("SYNTAX: {0}")]
    Syntax(String),
}

impl ExecError {
    pub fn code(&self) -> &'static str {
        match self {
            ExecError::UnknownColumn(_) => "UNKNOWN_COLUMN",
            ExecError::UnknownRowId(_) => "UNKNOWN_ROWID",
            ExecError::DuplicateRowId(_) => "DUPLICATE_ROWID",
            ExecError::DuplicateColumn(_) => "DUPLICATE_COLUMN",
            ExecError::OutOfRange(_) => "OUT_OF_RANGE",
            ExecError::EmptyTarget => "EMPTY_TARGET",
            ExecError::Io { .. } => "IO",
            ExecError::Csv(_) => "CSV",
            ExecError::UnknownPage(_) => "UNKNOWN_PAGE",
            ExecError::Syntax(_) => "SYNTAX",
        }
    }
}

impl From<ModelError> for ExecError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::DuplicateColumn(n) => ExecError::DuplicateColumn(n),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Info,
    Warning,
    Error,
}

/// A structured note produced while loading or executing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    /// Index of the statement in its script; `None` for the source.
    pub statement: Option<usize>,
    pub severity: Severity,
    pub message: String,
}

impl Diagnostic {
    pub fn warning(statement: Option<usize>, message: impl Into<String>) -> Self {
        Diagnostic {
            statement,
            severity: Severity::Warning,
            message: message.into(),
        }
    }
}

/// Stability mode per kind of structural action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StabilityPolicy {
    pub insert: Stability,
    pub reorder: Stability,
    pub delete: Stability,
    pub cut_paste: Stability,
    pub sort: Stability,
}

impl Default for StabilityPolicy {
    fn default() -> Self {
        StabilityPolicy {
            insert: Stability::ValueStable,
            reorder: Stability::ValueStable,
            delete: Stability::ValueStable,
            cut_paste: Stability::ValueStable,
            sort: Stability::FormulaStable,
        }
    }
}

/// Result of applying one statement.
#[derive(Debug, Clone, PartialEq)]
pub struct Applied {
    pub state: SheetState,
    pub diagnostics: Vec<Diagnostic>,
}

/// Apply a statement, discarding diagnostics.
pub fn apply(
    state: &SheetState,
    stmt: &Statement,
    policy: &StabilityPolicy,
) -> Result<SheetState, ExecError> {
    apply_with_diagnostics(state, stmt, policy, None).map(|a| a.state)
}

fn column_index(state: &SheetState, name: &str) -> Result<usize, ExecError> {
    state
        .coords()
        .column_by_name(name)
        .ok_or_else(|| ExecError::UnknownColumn(name.to_string()))
}

fn check_columns(state: &SheetState, f: &Formula) -> Result<(), ExecError> {
    for n in f.expr().column_names() {
        column_index(state, &n)?;
    }
    Ok(())
}

/// New formula for a cell whose previous formula was `prior`: `VALUE` in
/// `f` stands for the prior formula.
fn with_prior(f: &Formula, prior: &Formula) -> Formula {
    if f.expr().mentions_prior() {
        Formula::new(f.expr().clone().substitute_prior(prior.expr()))
    } else {
        f.clone()
    }
}

/// Formula for a freshly created cell: `VALUE` has nothing to refer to.
fn fresh_formula(f: &Formula) -> Formula {
    with_prior(f, &Formula::null())
}

pub fn apply_with_diagnostics(
    state: &SheetState,
    stmt: &Statement,
    policy: &StabilityPolicy,
    index: Option<usize>,
) -> Result<Applied, ExecError> {
    let mut diagnostics = Vec::new();
    let state = match stmt {
        Statement::Update {
            column,
            formula,
            condition,
        } => {
            let c = column_index(state, column)?;
            check_columns(state, formula)?;
            if let Some(cond) = condition {
                check_columns(state, cond)?;
            }
            let targets: Vec<Pos> = (0..state.height()).map(|r| Pos::new(c, r)).collect();
            assign(state, &targets, condition.as_ref(), formula, index, &mut diagnostics)
        }
        Statement::UpdateRegion { region, formula } => {
            check_columns(state, formula)?;
            if let Some(p) = &region.predicate {
                check_columns(state, p)?;
            }
            let targets: Vec<Pos> = state
                .coords()
                .cells_row_major()
                .into_iter()
                .map(|(p, _)| p)
                .filter(|p| region.spec.contains(*p))
                .collect();
            if targets.is_empty() && region.spec != RegionSpec::All {
                diagnostics.push(Diagnostic::warning(index, "region selects no cells"));
            }
            assign(
                state,
                &targets,
                region.predicate.as_ref(),
                formula,
                index,
                &mut diagnostics,
            )
        }
        Statement::AddColumn { name, formula, at } => {
            let at = at.unwrap_or(state.width());
            if at > state.width() {
                return Err(ExecError::OutOfRange(format!(
                    "column position {} beyond width {}",
                    at + 1,
                    state.width()
                )));
            }
            if let Some(f) = formula {
                check_columns(state, f)?;
            }
            let mut next = state.clone();
            let col = next.insert_column_at(at, name)?;
            if let Some(f) = formula {
                let f = fresh_formula(f);
                for r in next.coords().rows().to_vec() {
                    let id = next.coords().cell_in_slot(col, r).expect("fresh cell");
                    next.cell_mut(id).expect("exists").formula = f.clone();
                }
            }
            restructure(state, next, policy.insert)
        }
        Statement::RemoveColumn { name } => {
            let c = column_index(state, name)?;
            let mut next = state.clone();
            let removed = next.coords.remove_column(c);
            next.remove_cells(&removed);
            restructure(state, next, policy.delete)
        }
        Statement::InsertRow { assignments, at } => {
            let at = at.unwrap_or(state.height());
            if at > state.height() {
                return Err(ExecError::OutOfRange(format!(
                    "row position {} beyond height {}",
                    at + 1,
                    state.height()
                )));
            }
            let mut formulas = vec![Formula::null(); state.width()];
            let mut seen = BTreeSet::new();
            for (c, f) in assignments {
                let idx = column_index(state, c)?;
                if !seen.insert(idx) {
                    return Err(ExecError::DuplicateColumn(c.clone()));
                }
                check_columns(state, f)?;
                formulas[idx] = fresh_formula(f);
            }
            let mut next = state.clone();
            next.insert_row_at(at, formulas);
            restructure(state, next, policy.insert)
        }
        Statement::Delete { condition } => {
            check_columns(state, condition)?;
            let mut doomed = BTreeSet::new();
            for (r, row) in state.coords().rows().iter().enumerate() {
                match evaluate(condition, state, Pos::new(0, r)) {
                    Value::Bool(true) => {
                        doomed.insert(*row);
                    }
                    Value::Error(k) => diagnostics.push(Diagnostic::warning(
                        index,
                        format!("condition is {} on row {row}; row kept", k.code()),
                    )),
                    _ => {}
                }
            }
            let mut next = state.clone();
            let removed = next.coords.remove_rows(&doomed);
            next.remove_cells(&removed);
            restructure(state, next, policy.delete)
        }
        Statement::ReorderColumns { names } => {
            let mut listed = Vec::new();
            for n in names {
                let c = column_index(state, n)?;
                if listed.contains(&c) {
                    return Err(ExecError::DuplicateColumn(n.clone()));
                }
                listed.push(c);
            }
            let order = partial_permutation(state.width(), &listed);
            let cols: Vec<ColId> = order.iter().map(|i| state.coords().columns()[*i].id).collect();
            apply_transform(state, state.coords().rows().to_vec(), cols, policy.reorder)
        }
        Statement::ReorderRows { rows } => {
            let mut listed = Vec::new();
            for r in rows {
                let i = state.coords().row_index(*r).ok_or(ExecError::UnknownRowId(*r))?;
                if listed.contains(&i) {
                    return Err(ExecError::DuplicateRowId(*r));
                }
                listed.push(i);
            }
            let order = partial_permutation(state.height(), &listed);
            let rows: Vec<RowId> = order.iter().map(|i| state.coords().rows()[*i]).collect();
            apply_transform(state, rows, column_ids(state), policy.reorder)
        }
        Statement::Sort { keys } => {
            let rows = sorted_rows(state, keys)?;
            apply_transform(state, rows, column_ids(state), policy.sort)
        }
        Statement::Move { from, to, dest } => move_block(state, *from, *to, *dest, policy.cut_paste)?,
    };
    Ok(Applied { state, diagnostics })
}

fn column_ids(state: &SheetState) -> Vec<ColId> {
    state.coords().columns().iter().map(|c| c.id).collect()
}

/// Assign `formula` to the cells at `targets` whose condition holds, then
/// recompute. A condition that evaluates to an error skips that cell.
fn assign(
    state: &SheetState,
    targets: &[Pos],
    condition: Option<&Formula>,
    formula: &Formula,
    index: Option<usize>,
    diagnostics: &mut Vec<Diagnostic>,
) -> SheetState {
    let mut next = state.clone();
    let mut dirty = BTreeSet::new();
    for &pos in targets {
        let Some(id) = state.coords().cell_at(pos) else {
            continue;
        };
        if let Some(c) = condition {
            match evaluate(c, state, pos) {
                Value::Bool(true) => {}
                Value::Error(k) => {
                    diagnostics.push(Diagnostic::warning(
                        index,
                        format!("condition is {} at {pos}; cell skipped", k.code()),
                    ));
                    continue;
                }
                _ => continue,
            }
        }
        let prior = &state.cell(id).expect("placed").formula;
        next.cell_mut(id).expect("placed").formula = with_prior(formula, prior);
        dirty.insert(id);
    }
    recompute_in_place(&mut next, &dirty);
    next
}

/// Positions `0..len` after moving the items at `listed` (in that order)
/// into the ascending set of positions they occupy.
fn partial_permutation(len: usize, listed: &[usize]) -> Vec<usize> {
    let mut slots: Vec<usize> = listed.to_vec();
    slots.sort_unstable();
    let mut order: Vec<usize> = (0..len).collect();
    for (slot, item) in slots.into_iter().zip(listed) {
        order[slot] = *item;
    }
    order
}

fn sorted_rows(state: &SheetState, keys: &[SortKey]) -> Result<Vec<RowId>, ExecError> {
    let cols: Vec<(usize, bool)> = keys
        .iter()
        .map(|k| Ok((column_index(state, &k.column)?, k.descending)))
        .collect::<Result<_, ExecError>>()?;
    let mut idx: Vec<usize> = (0..state.height()).collect();
    let key = |r: usize, c: usize| {
        state
            .value_at(Pos::new(c, r))
            .cloned()
            .unwrap_or(Value::Null)
    };
    idx.sort_by(|&a, &b| {
        cols.iter()
            .map(|&(c, desc)| sort_cmp(&key(a, c), &key(b, c), desc))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    Ok(idx.into_iter().map(|i| state.coords().rows()[i]).collect())
}

/// Reposition rows and columns (a permutation of both orders) under the
/// given stability mode.
pub fn apply_transform(
    state: &SheetState,
    rows: Vec<RowId>,
    columns: Vec<ColId>,
    mode: Stability,
) -> SheetState {
    let mut next = state.clone();
    next.coords.set_row_order(rows);
    let cols = columns
        .into_iter()
        .map(|id| {
            let i = state.coords().column_index(id).expect("known column");
            state.coords().columns()[i].clone()
        })
        .collect();
    next.coords.set_column_order(cols);
    restructure(state, next, mode)
}

/// Finish a structural edit. `next` carries the new coordinates, with fresh
/// cells added and removed cells dropped; formulas of surviving cells are
/// still those of `old`.
pub(crate) fn restructure(old: &SheetState, mut next: SheetState, mode: Stability) -> SheetState {
    let fresh: BTreeSet<CellId> = next
        .cells()
        .map(|c| c.id)
        .filter(|id| old.cell(*id).is_none())
        .collect();
    match mode {
        Stability::FormulaStable => {
            let all: BTreeSet<CellId> = next.cells().map(|c| c.id).collect();
            recompute_in_place(&mut next, &all);
        }
        Stability::ValueStable => {
            let removed: BTreeSet<CellId> = old
                .cells()
                .map(|c| c.id)
                .filter(|id| next.cell(*id).is_none())
                .collect();
            let t = Transform {
                old: &old.coords,
                new: &next.coords.clone(),
            };
            let mut dirty = fresh.clone();
            let graph = if removed.is_empty() {
                BTreeMap::new()
            } else {
                dependency_graph(old)
            };
            for (pos, id) in old.coords().cells_row_major() {
                let Some(cell) = next.cell_mut(id) else {
                    continue;
                };
                cell.formula = rebase(&old.cell(id).expect("exists").formula, pos, &t, mode);
                if graph.get(&id).is_some_and(|d| !d.is_disjoint(&removed)) {
                    dirty.insert(id);
                }
            }
            recompute_in_place(&mut next, &dirty);
        }
    }
    next
}

/// Cut the rectangle `from..to` and paste it with its top-left at `dest`.
/// Vacated positions get fresh empty cells; overwritten cells are deleted.
fn move_block(
    state: &SheetState,
    from: Pos,
    to: Pos,
    dest: Pos,
    mode: Stability,
) -> Result<SheetState, ExecError> {
    let (c0, c1) = (from.col.min(to.col), from.col.max(to.col));
    let (r0, r1) = (from.row.min(to.row), from.row.max(to.row));
    let (w, h) = (state.width(), state.height());
    let fits = |c: usize, r: usize| c < w && r < h;
    if !fits(c1, r1) || !fits(dest.col + (c1 - c0), dest.row + (r1 - r0)) {
        return Err(ExecError::OutOfRange(format!(
            "move {}:{} to {} leaves the sheet",
            from.a1(),
            to.a1(),
            dest.a1()
        )));
    }
    let coords = state.coords();
    let slot = |p: Pos| (coords.columns()[p.col].id, coords.rows()[p.row]);
    let mut grid: BTreeMap<(ColId, RowId), CellId> = coords.grid().clone();
    let mut moved = Vec::new();
    for r in r0..=r1 {
        for c in c0..=c1 {
            let src = Pos::new(c, r);
            let dst = Pos::new(dest.col + c - c0, dest.row + r - r0);
            moved.push((coords.cell_at(src).expect("in grid"), slot(src), slot(dst)));
        }
    }
    let sources: BTreeSet<(ColId, RowId)> = moved.iter().map(|m| m.1).collect();
    let mut removed = Vec::new();
    for (_, src, _) in &moved {
        grid.remove(src);
    }
    for (id, _, dst) in &moved {
        if !sources.contains(dst) {
            if let Some(old) = grid.get(dst) {
                removed.push(*old);
            }
        }
        grid.insert(*dst, *id);
    }
    let mut next = state.clone();
    next.coords.set_grid(grid);
    next.remove_cells(&removed);
    let dests: BTreeSet<(ColId, RowId)> = moved.iter().map(|m| m.2).collect();
    for s in sources.difference(&dests) {
        next.new_cell(s.0, s.1, Formula::null());
    }
    Ok(restructure(state, next, mode))
}

/// Expression `ROWID = r`.
pub fn rowid_eq(r: RowId) -> Formula {
    Formula::new(Expr::bin(
        crate::value::BinOp::Eq,
        Expr::RowId,
        Expr::Lit(Value::Int(r.0 as i64)),
    ))
}

#[cfg(test)]
mod tests;
