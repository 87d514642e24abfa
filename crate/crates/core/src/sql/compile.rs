//! Script to SQL compilation.
//!
//! Every row belongs to a segment: the loaded table, or one row appended by
//! `INSERT ROW`. Each segment keeps, per column, a decision tree whose
//! conditions are frozen SQL (evaluated when their statement ran) and whose
//! leaves are live formulas: a leaf's unqualified column references read the
//! row's final values, as cell formulas do. Qualified references read the
//! source table.
//!
//! Row order is a static key over `ROWID` (changed by `REORDER ROWS`) behind
//! any frozen sort keys, most recent sort first.

use std::collections::{BTreeMap, BTreeSet};

use super::{FromItem, OrderKey, Query, Select, SelectItem, SqlError, SqlExpr, SqlQuery, SourceTable, ROWID};
use crate::formula::{Axis, CellRef, Expr, Formula};
use crate::lang::{RegionSpec, Script, Source, Statement};
use crate::value::{BinOp, Value};

/// Table name standing for a script source: the file stem or page name
/// with every character outside `[A-Za-z0-9_]` replaced by `_`.
pub fn table_name(source: &Source) -> String {
    let raw = match source {
        Source::File { path, .. } => std::path::Path::new(path)
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default(),
        Source::Page { name } => name.clone(),
    };
    let mut t: String = raw
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' })
        .collect();
    if !t.starts_with(|c: char| c.is_ascii_alphabetic() || c == '_') {
        t.insert_str(0, "t_");
    }
    t
}

#[derive(Debug, Clone, PartialEq)]
enum Def {
    Leaf(SqlExpr),
    /// Running accumulation: the leaf's expression plus the value of the
    /// same column one row up.
    Acc(SqlExpr),
    Case(SqlExpr, Box<Def>, Box<Def>),
}

impl Def {
    fn map_leaves(&self, f: &mut dyn FnMut(&SqlExpr) -> Result<Def, SqlError>, acc: &dyn Fn() -> SqlError) -> Result<Def, SqlError> {
        Ok(match self {
            Def::Leaf(e) => f(e)?,
            Def::Acc(_) => return Err(acc()),
            Def::Case(c, a, b) => Def::Case(
                c.clone(),
                Box::new(a.map_leaves(f, acc)?),
                Box::new(b.map_leaves(f, acc)?),
            ),
        })
    }

    fn has_acc(&self) -> bool {
        match self {
            Def::Leaf(_) => false,
            Def::Acc(_) => true,
            Def::Case(_, a, b) => a.has_acc() || b.has_acc(),
        }
    }

    fn live_columns(&self, out: &mut BTreeSet<String>) {
        let mut grab = |e: &SqlExpr| {
            e.walk(&mut |n| {
                if let SqlExpr::Column { table: None, name } = n {
                    out.insert(name.clone());
                }
            })
        };
        match self {
            Def::Leaf(e) | Def::Acc(e) => grab(e),
            Def::Case(_, a, b) => {
                a.live_columns(out);
                b.live_columns(out);
            }
        }
    }
}

#[derive(Debug, Clone)]
struct Segment {
    rowid: SqlExpr,
    from_source: bool,
    defs: BTreeMap<String, Def>,
    /// Keep-conditions, all of which must hold.
    filters: Vec<SqlExpr>,
}

#[derive(Debug, Clone)]
struct OrderTerm {
    /// One expression per segment.
    exprs: Vec<SqlExpr>,
    /// Expression for segments created later.
    fill: SqlExpr,
    descending: bool,
}

#[derive(Clone, Copy, PartialEq)]
enum Mode {
    /// Unqualified references stay live.
    Live,
    /// References are expanded to the current values.
    Frozen,
}

struct Compiler {
    table: String,
    positional: bool,
    source_error_free: bool,
    columns: Vec<String>,
    segs: Vec<Segment>,
    order: Vec<OrderTerm>,
    /// Static order keys that differ from the row's ROWID.
    keys: BTreeMap<u64, u64>,
    sorted: bool,
    deleted: bool,
    inserted: usize,
    accumulating: bool,
    index: usize,
    statement: String,
}

fn rowid_literal(c: &SqlExpr, rowid: &SqlExpr) -> Option<i64> {
    match c {
        SqlExpr::Binary(BinOp::Eq, a, b) => match (&**a, &**b) {
            (x, SqlExpr::Lit(Value::Int(r))) | (SqlExpr::Lit(Value::Int(r)), x) if x == rowid => Some(*r),
            _ => None,
        },
        _ => None,
    }
}

/// The row reference `R[-1]C[0]` to the host's own column.
fn is_row_above(e: &Expr, host_col: usize) -> bool {
    match e {
        Expr::Ref(CellRef::Coord { col, row }) => {
            *row == Axis::Rel(-1) && (*col == Axis::Rel(0) || *col == Axis::Abs(host_col))
        }
        _ => false,
    }
}

/// The expression is a boolean or null and never an error.
fn safe_bool(e: &SqlExpr, src_ok: bool) -> bool {
    match e {
        SqlExpr::Lit(v) => matches!(v, Value::Bool(_) | Value::Null),
        SqlExpr::IsTrue { .. } => true,
        SqlExpr::Binary(BinOp::Eq | BinOp::Ne, a, b) => no_error(a, src_ok) && no_error(b, src_ok),
        SqlExpr::Binary(BinOp::And | BinOp::Or, a, b) => safe_bool(a, src_ok) && safe_bool(b, src_ok),
        SqlExpr::Unary(crate::formula::UnOp::Not, x) => safe_bool(x, src_ok),
        SqlExpr::In(x, items) => no_error(x, src_ok) && items.iter().all(|i| no_error(i, src_ok)),
        _ => false,
    }
}

fn no_error(e: &SqlExpr, src_ok: bool) -> bool {
    match e {
        SqlExpr::Lit(v) => !v.is_error(),
        SqlExpr::Column { table: Some(_), name } => src_ok || name == ROWID,
        SqlExpr::CountRows(_) => true,
        SqlExpr::Binary(BinOp::Add, a, b) => {
            // Only the row-id arithmetic of appended rows.
            matches!(**a, SqlExpr::CountRows(_)) && matches!(**b, SqlExpr::Lit(Value::Int(_)))
        }
        SqlExpr::Binary(BinOp::Concat, a, b) => no_error(a, src_ok) && no_error(b, src_ok),
        e => safe_bool(e, src_ok),
    }
}

impl Compiler {
    fn unsupported(&self, reason: impl Into<String>) -> SqlError {
        SqlError::UnsupportedPattern {
            index: self.index,
            statement: self.statement.clone(),
            reason: reason.into(),
        }
    }

    fn positional_error(&self, formula: &Formula, reason: &str) -> SqlError {
        SqlError::PositionalNotCompilable {
            index: self.index,
            statement: self.statement.clone(),
            formula: formula.script_text(),
            reason: reason.to_string(),
        }
    }

    fn column_index(&self, name: &str) -> Result<usize, SqlError> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| SqlError::UnknownColumn(name.to_string()))
    }

    fn check_columns(&self, f: &Formula) -> Result<(), SqlError> {
        for n in f.expr().column_names() {
            self.column_index(&n)?;
        }
        Ok(())
    }

    /// Current value of `col` in segment `seg` as SQL over the source.
    fn expand(&self, seg: usize, col: &str) -> Result<SqlExpr, SqlError> {
        let mut stack = Vec::new();
        self.expand_in(seg, col, &mut stack)
    }

    fn expand_in(&self, seg: usize, col: &str, stack: &mut Vec<String>) -> Result<SqlExpr, SqlError> {
        if stack.iter().any(|c| c == col) {
            return Err(self.unsupported(format!("column '{col}' depends on itself")));
        }
        let def = self.segs[seg]
            .defs
            .get(col)
            .ok_or_else(|| SqlError::UnknownColumn(col.to_string()))?;
        stack.push(col.to_string());
        let out = if def.has_acc() {
            self.window(seg, col, def, stack)
        } else {
            self.render_def(seg, def, stack)
        };
        stack.pop();
        out
    }

    fn substitute(&self, seg: usize, e: &SqlExpr, stack: &mut Vec<String>) -> Result<SqlExpr, SqlError> {
        let mut err = None;
        let out = e.clone().map(&mut |n| match n {
            SqlExpr::Column { table: None, name } => match self.expand_in(seg, &name, stack) {
                Ok(x) => x,
                Err(e) => {
                    err.get_or_insert(e);
                    SqlExpr::Lit(Value::Null)
                }
            },
            n => n,
        });
        match err {
            Some(e) => Err(e),
            None => Ok(out),
        }
    }

    fn render_def(&self, seg: usize, def: &Def, stack: &mut Vec<String>) -> Result<SqlExpr, SqlError> {
        match def {
            Def::Leaf(e) | Def::Acc(e) => self.substitute(seg, e, stack),
            Def::Case(..) => {
                let mut whens = Vec::new();
                let mut d = def;
                while let Def::Case(c, a, b) = d {
                    whens.push((c.clone(), self.render_def(seg, a, stack)?));
                    d = b;
                }
                Ok(SqlExpr::Case {
                    whens,
                    otherwise: Box::new(self.render_def(seg, d, stack)?),
                })
            }
        }
    }

    /// Row id of the first row under the static order.
    fn first_rowid(&self) -> i64 {
        self.keys
            .iter()
            .find(|(_, k)| **k == 1)
            .map_or(1, |(r, _)| *r as i64)
    }

    /// A running accumulation as a window. The first row must take a plain
    /// value and every other row must accumulate; anything else would need
    /// resets or an error seed the window cannot express.
    fn window(&self, seg: usize, col: &str, def: &Def, stack: &mut Vec<String>) -> Result<SqlExpr, SqlError> {
        let rowid = &self.segs[seg].rowid;
        let first = self.first_rowid();
        fn check(def: &Def, rowid: &SqlExpr, first: i64, first_possible: bool, other_possible: bool) -> Result<(), &'static str> {
            match def {
                Def::Leaf(_) if other_possible => Err("a row other than the first takes a plain value"),
                Def::Acc(_) if first_possible => Err("the first row would accumulate from above the sheet"),
                Def::Leaf(_) | Def::Acc(_) => Ok(()),
                Def::Case(c, a, b) => match rowid_literal(c, rowid) {
                    Some(r) if r == first => {
                        check(a, rowid, first, first_possible, false)?;
                        check(b, rowid, first, false, other_possible)
                    }
                    Some(_) => {
                        check(a, rowid, first, false, other_possible)?;
                        check(b, rowid, first, first_possible, other_possible)
                    }
                    None => {
                        check(a, rowid, first, first_possible, other_possible)?;
                        check(b, rowid, first, first_possible, other_possible)
                    }
                },
            }
        }
        check(def, rowid, first, true, true)
            .map_err(|r| self.unsupported(format!("running accumulation in '{col}': {r}")))?;
        let arg = self.render_def(seg, def, stack)?;
        let mut nested = false;
        arg.walk(&mut |n| nested |= matches!(n, SqlExpr::RunningSum { .. }));
        if nested {
            return Err(self.unsupported(format!("running accumulation in '{col}' reads another accumulation")));
        }
        Ok(SqlExpr::RunningSum {
            arg: Box::new(arg),
            order: vec![OrderKey {
                expr: self.static_key(rowid.clone()),
                descending: false,
            }],
        })
    }

    fn static_key(&self, rowid: SqlExpr) -> SqlExpr {
        if self.keys.is_empty() {
            return rowid;
        }
        SqlExpr::Case {
            whens: self
                .keys
                .iter()
                .map(|(r, k)| {
                    (
                        SqlExpr::bin(BinOp::Eq, rowid.clone(), SqlExpr::Lit(Value::Int(*r as i64))),
                        SqlExpr::Lit(Value::Int(*k as i64)),
                    )
                })
                .collect(),
            otherwise: Box::new(rowid),
        }
    }

    /// Formula expression to SQL for segment `seg`. `host` is the column
    /// the formula sits in; `prior` stands for `VALUE`.
    fn sql_expr(
        &self,
        e: &Expr,
        formula: &Formula,
        seg: usize,
        host: usize,
        prior: &SqlExpr,
        mode: Mode,
    ) -> Result<SqlExpr, SqlError> {
        let rec = |x: &Expr| self.sql_expr(x, formula, seg, host, prior, mode);
        let column = |name: &str| -> Result<SqlExpr, SqlError> {
            self.column_index(name)?;
            match mode {
                Mode::Live => Ok(SqlExpr::col(name)),
                Mode::Frozen => self.expand(seg, name),
            }
        };
        Ok(match e {
            Expr::Lit(v) if v.is_error() => {
                return Err(self.unsupported(format!("error literal {} has no SQL form", crate::formula::render::literal_text(v))))
            }
            Expr::Lit(v) => SqlExpr::Lit(v.clone()),
            Expr::Ref(CellRef::Coord { col, row: Axis::Rel(0) }) => {
                let name = col
                    .resolve(host)
                    .and_then(|c| self.columns.get(c))
                    .ok_or_else(|| self.unsupported("reference outside the sheet"))?;
                column(name)?
            }
            Expr::Ref(CellRef::Dangling) => return Err(self.unsupported("dangling reference")),
            Expr::Ref(_) => return Err(self.positional_error(formula, "cross-row reference")),
            Expr::Column(name) => column(name)?,
            Expr::RowId => self.segs[seg].rowid.clone(),
            Expr::Prior => prior.clone(),
            Expr::Unary(op, x) => SqlExpr::Unary(*op, Box::new(rec(x)?)),
            Expr::Binary(op, a, b) => SqlExpr::bin(*op, rec(a)?, rec(b)?),
            Expr::If(c, t, f) => SqlExpr::Case {
                whens: vec![(rec(c)?, rec(t)?)],
                otherwise: Box::new(rec(f)?),
            },
            Expr::Agg(..) => return Err(self.unsupported("aggregate functions are not row-local")),
            Expr::Cast(x, ty) => SqlExpr::Cast(Box::new(rec(x)?), *ty),
            Expr::Between(x, lo, hi) => SqlExpr::Between(Box::new(rec(x)?), Box::new(rec(lo)?), Box::new(rec(hi)?)),
            Expr::In(x, items) => SqlExpr::In(
                Box::new(rec(x)?),
                items.iter().map(rec).collect::<Result<_, _>>()?,
            ),
        })
    }

    /// Condition taken exactly when it evaluates to TRUE.
    fn frozen_condition(&self, c: &Formula, seg: usize, host: usize) -> Result<SqlExpr, SqlError> {
        let prior = match self.columns.get(host) {
            Some(name) if c.expr().mentions_prior() => self.expand(seg, name)?,
            _ => SqlExpr::Lit(Value::Null),
        };
        let e = self.sql_expr(c.expr(), c, seg, host, &prior, Mode::Frozen)?;
        let src_ok = self.source_error_free || !self.segs[seg].from_source;
        Ok(if safe_bool(&e, src_ok) {
            e
        } else {
            SqlExpr::IsTrue {
                expr: Box::new(e),
                negated: false,
            }
        })
    }

    /// New definition of column `host` in `seg` after assigning `f`.
    fn assigned(&self, f: &Formula, seg: usize, host: usize) -> Result<Def, SqlError> {
        let old = &self.segs[seg].defs[&self.columns[host]];
        if let Expr::Binary(BinOp::Add, a, b) = f.expr() {
            if is_row_above(b, host) && self.positional {
                if a.mentions_prior() {
                    return Err(self.unsupported("VALUE inside a running accumulation"));
                }
                let e = self.sql_expr(a, f, seg, host, &SqlExpr::Lit(Value::Null), Mode::Live)?;
                return Ok(Def::Acc(e));
            }
            if is_row_above(a, host) && self.positional {
                return Err(self.unsupported("write the accumulation as expr + R[-1]C[0]"));
            }
        }
        if !f.expr().mentions_prior() {
            let e = self.sql_expr(f.expr(), f, seg, host, &SqlExpr::Lit(Value::Null), Mode::Live)?;
            return Ok(Def::Leaf(e));
        }
        old.map_leaves(
            &mut |leaf| Ok(Def::Leaf(self.sql_expr(f.expr(), f, seg, host, leaf, Mode::Live)?)),
            &|| self.unsupported("VALUE over a running accumulation"),
        )
    }

    fn mentions_accumulation(f: &Formula) -> bool {
        let mut found = false;
        f.expr().walk(&mut |e| {
            if let Expr::Ref(CellRef::Coord { row, .. }) = e {
                found |= *row != Axis::Rel(0);
            }
        });
        found
    }

    /// Assign `f` to columns `targets` where `cond` holds. Conditions are
    /// all frozen before any definition changes.
    fn update(&mut self, targets: &[usize], f: &Formula, cond: Option<&Formula>) -> Result<(), SqlError> {
        self.check_columns(f)?;
        if let Some(c) = cond {
            self.check_columns(c)?;
        }
        for &host in targets {
            let acc = matches!(f.expr(), Expr::Binary(BinOp::Add, _, b) if is_row_above(b, host));
            if acc && self.positional {
                if self.sorted || self.deleted || self.inserted > 0 {
                    return Err(self.unsupported(
                        "a running accumulation needs the loaded rows in a static order",
                    ));
                }
                self.accumulating = true;
            }
        }
        let mut plans = Vec::new();
        for &host in targets {
            for seg in 0..self.segs.len() {
                let c = match cond {
                    Some(c) => Some(self.frozen_condition(c, seg, host)?),
                    None => None,
                };
                let new = self.assigned(f, seg, host)?;
                plans.push((seg, host, c, new));
            }
        }
        for (seg, host, c, new) in plans {
            let name = self.columns[host].clone();
            let defs = &mut self.segs[seg].defs;
            let old = defs.remove(&name).expect("known column");
            let def = match c {
                Some(c) => Def::Case(c, Box::new(new), Box::new(old)),
                None => new,
            };
            defs.insert(name, def);
        }
        Ok(())
    }

    fn forbid_after_accumulation(&self, what: &str) -> Result<(), SqlError> {
        if self.accumulating {
            Err(self.unsupported(format!("{what} after a running accumulation")))
        } else {
            Ok(())
        }
    }

    fn statement(&mut self, stmt: &Statement) -> Result<(), SqlError> {
        match stmt {
            Statement::Update {
                column,
                formula,
                condition,
            } => {
                for f in std::iter::once(formula).chain(condition) {
                    if Self::mentions_accumulation(f) && !self.positional {
                        return Err(self.positional_error(f, "cross-row reference"));
                    }
                }
                if let Some(c) = condition {
                    if Self::mentions_accumulation(c) {
                        return Err(self.unsupported("cross-row reference in a condition"));
                    }
                }
                let host = self.column_index(column)?;
                self.update(&[host], formula, condition.as_ref())
            }
            Statement::UpdateRegion { region, formula } => {
                let targets: Vec<usize> = match region.spec {
                    RegionSpec::All => (0..self.columns.len()).collect(),
                    RegionSpec::Columns { from, to } => {
                        (from.min(to)..=from.max(to)).filter(|c| *c < self.columns.len()).collect()
                    }
                    RegionSpec::Rect { .. } | RegionSpec::Rows { .. } => {
                        return Err(self.positional_error(formula, "region addressed by row position"))
                    }
                };
                for f in std::iter::once(formula).chain(&region.predicate) {
                    if Self::mentions_accumulation(f) {
                        return Err(self.positional_error(f, "cross-row reference"));
                    }
                }
                self.update(&targets, formula, region.predicate.as_ref())
            }
            Statement::AddColumn { name, formula, at } => {
                if self.columns.contains(name) {
                    return Err(SqlError::DuplicateColumn(name.clone()));
                }
                let at = at.unwrap_or(self.columns.len());
                if at > self.columns.len() {
                    return Err(SqlError::OutOfRange(format!(
                        "column position {} beyond width {}",
                        at + 1,
                        self.columns.len()
                    )));
                }
                if let Some(f) = formula {
                    self.check_columns(f)?;
                    if Self::mentions_accumulation(f) {
                        return Err(self.positional_error(f, "cross-row reference"));
                    }
                }
                self.columns.insert(at, name.clone());
                for seg in 0..self.segs.len() {
                    let def = match formula {
                        Some(f) => Def::Leaf(self.sql_expr(f.expr(), f, seg, at, &SqlExpr::Lit(Value::Null), Mode::Live)?),
                        None => Def::Leaf(SqlExpr::Lit(Value::Null)),
                    };
                    self.segs[seg].defs.insert(name.clone(), def);
                }
                Ok(())
            }
            Statement::RemoveColumn { name } => {
                let c = self.column_index(name)?;
                self.columns.remove(c);
                for seg in &mut self.segs {
                    seg.defs.remove(name);
                }
                let mut live = BTreeSet::new();
                for seg in &self.segs {
                    for d in seg.defs.values() {
                        d.live_columns(&mut live);
                    }
                }
                if live.contains(name) {
                    return Err(self.unsupported(format!("column '{name}' is still read by formulas")));
                }
                Ok(())
            }
            Statement::InsertRow { assignments, at } => {
                if let Some(n) = at {
                    return Err(SqlError::PositionalNotCompilable {
                        index: self.index,
                        statement: self.statement.clone(),
                        formula: format!("AT {}", n + 1),
                        reason: "row inserted at a position".into(),
                    });
                }
                self.forbid_after_accumulation("INSERT ROW")?;
                let mut seen = BTreeSet::new();
                for (c, f) in assignments {
                    self.column_index(c)?;
                    if !seen.insert(c) {
                        return Err(SqlError::DuplicateColumn(c.clone()));
                    }
                    self.check_columns(f)?;
                    if Self::mentions_accumulation(f) {
                        return Err(self.positional_error(f, "cross-row reference"));
                    }
                }
                self.inserted += 1;
                self.segs.push(Segment {
                    rowid: SqlExpr::bin(
                        BinOp::Add,
                        SqlExpr::CountRows(self.table.clone()),
                        SqlExpr::Lit(Value::Int(self.inserted as i64)),
                    ),
                    from_source: false,
                    defs: self
                        .columns
                        .iter()
                        .map(|c| (c.clone(), Def::Leaf(SqlExpr::Lit(Value::Null))))
                        .collect(),
                    filters: Vec::new(),
                });
                let seg = self.segs.len() - 1;
                for (c, f) in assignments {
                    let host = self.column_index(c)?;
                    let e = self.sql_expr(f.expr(), f, seg, host, &SqlExpr::Lit(Value::Null), Mode::Live)?;
                    self.segs[seg].defs.insert(c.clone(), Def::Leaf(e));
                }
                for t in &mut self.order {
                    t.exprs.push(t.fill.clone());
                }
                Ok(())
            }
            Statement::Delete { condition } => {
                if Self::mentions_accumulation(condition) {
                    return Err(self.positional_error(condition, "cross-row reference"));
                }
                self.forbid_after_accumulation("DELETE")?;
                self.check_columns(condition)?;
                for seg in 0..self.segs.len() {
                    let c = self.frozen_condition(condition, seg, 0)?;
                    let keep = match c {
                        SqlExpr::IsTrue { expr, .. } => SqlExpr::IsTrue { expr, negated: true },
                        c => SqlExpr::IsTrue {
                            expr: Box::new(c),
                            negated: true,
                        },
                    };
                    self.segs[seg].filters.push(keep);
                }
                self.deleted = true;
                Ok(())
            }
            Statement::ReorderColumns { names } => {
                let mut listed = Vec::new();
                for n in names {
                    let c = self.column_index(n)?;
                    if listed.contains(&c) {
                        return Err(SqlError::DuplicateColumn(n.clone()));
                    }
                    listed.push(c);
                }
                let mut slots = listed.clone();
                slots.sort_unstable();
                let old = self.columns.clone();
                for (slot, item) in slots.into_iter().zip(&listed) {
                    self.columns[slot] = old[*item].clone();
                }
                Ok(())
            }
            Statement::ReorderRows { rows } => {
                if self.sorted {
                    return Err(self.unsupported("rows reordered after a sort depend on the data order"));
                }
                self.forbid_after_accumulation("REORDER ROWS")?;
                let mut seen = BTreeSet::new();
                for r in rows {
                    if !seen.insert(*r) {
                        return Err(SqlError::DuplicateRowId(r.0));
                    }
                }
                let key = |r: u64| *self.keys.get(&r).unwrap_or(&r);
                let mut slots: Vec<u64> = rows.iter().map(|r| key(r.0)).collect();
                slots.sort_unstable();
                let assigned: Vec<(u64, u64)> = rows.iter().map(|r| r.0).zip(slots).collect();
                for (r, k) in assigned {
                    if r == k {
                        self.keys.remove(&r);
                    } else {
                        self.keys.insert(r, k);
                    }
                }
                Ok(())
            }
            Statement::Sort { keys } => {
                self.forbid_after_accumulation("SORT ROWS")?;
                let mut terms = vec![OrderTerm {
                    exprs: vec![SqlExpr::Lit(Value::Int(0)); self.segs.len()],
                    fill: SqlExpr::Lit(Value::Int(1)),
                    descending: false,
                }];
                for k in keys {
                    self.column_index(&k.column)?;
                    let exprs = (0..self.segs.len())
                        .map(|s| self.expand(s, &k.column))
                        .collect::<Result<_, _>>()?;
                    terms.push(OrderTerm {
                        exprs,
                        fill: SqlExpr::Lit(Value::Null),
                        descending: k.descending,
                    });
                }
                terms.append(&mut self.order);
                self.order = terms;
                self.sorted = true;
                Ok(())
            }
            Statement::Move { .. } => Err(SqlError::PositionalNotCompilable {
                index: self.index,
                statement: self.statement.clone(),
                formula: stmt.to_string(),
                reason: "cells moved by position".into(),
            }),
        }
    }

    fn filter(seg: &Segment) -> Option<SqlExpr> {
        seg.filters
            .iter()
            .cloned()
            .reduce(|a, b| SqlExpr::bin(BinOp::And, a, b))
    }

    fn finish(self) -> Result<Query, SqlError> {
        if self.columns.is_empty() {
            return Err(self.unsupported("the result has no columns"));
        }
        // Terms whose value is the same literal in every segment do not
        // order anything.
        let terms: Vec<&OrderTerm> = self
            .order
            .iter()
            .filter(|t| !(matches!(t.exprs[0], SqlExpr::Lit(_)) && t.exprs.iter().all(|e| *e == t.exprs[0])))
            .collect();
        let items = |seg: usize| -> Result<Vec<SelectItem>, SqlError> {
            self.columns
                .iter()
                .map(|c| Ok(item(self.expand(seg, c)?.unqualified(), c)))
                .collect()
        };
        if self.segs.len() == 1 {
            let seg = &self.segs[0];
            // Order keys read the source; qualify names an output shadows.
            let order_expr = |e: SqlExpr| {
                e.map(&mut |n| match n {
                    SqlExpr::Column { table: Some(t), name } => {
                        let t = self.columns.contains(&name).then_some(t);
                        SqlExpr::Column { table: t, name }
                    }
                    n => n,
                })
            };
            let mut order_by: Vec<OrderKey> = terms
                .iter()
                .map(|t| OrderKey {
                    expr: order_expr(t.exprs[0].clone()),
                    descending: t.descending,
                })
                .collect();
            order_by.push(OrderKey {
                expr: order_expr(self.static_key(seg.rowid.clone())),
                descending: false,
            });
            return Ok(Query {
                selects: vec![Select {
                    items: items(0)?,
                    from: Some(FromItem::Table(self.table.clone())),
                    filter: Self::filter(seg).map(SqlExpr::unqualified),
                }],
                order_by,
            });
        }
        let hidden = |i: usize| {
            let mut n = format!("__k{}", i + 1);
            while self.columns.contains(&n) {
                n.insert(0, '_');
            }
            n
        };
        let mut selects = Vec::new();
        for (s, seg) in self.segs.iter().enumerate() {
            let mut its = items(s)?;
            its.push(item(seg.rowid.clone().unqualified(), ROWID));
            for (i, t) in terms.iter().enumerate() {
                its.push(item(t.exprs[s].clone().unqualified(), &hidden(i)));
            }
            selects.push(Select {
                items: its,
                from: seg.from_source.then(|| FromItem::Table(self.table.clone())),
                filter: Self::filter(seg).map(SqlExpr::unqualified),
            });
        }
        let mut order_by: Vec<OrderKey> = terms
            .iter()
            .enumerate()
            .map(|(i, t)| OrderKey {
                expr: SqlExpr::col(&hidden(i)),
                descending: t.descending,
            })
            .collect();
        order_by.push(OrderKey {
            expr: self.static_key(SqlExpr::col(ROWID)),
            descending: false,
        });
        Ok(Query {
            selects: vec![Select {
                items: self
                    .columns
                    .iter()
                    .map(|c| SelectItem::Expr {
                        expr: SqlExpr::col(c),
                        alias: None,
                    })
                    .collect(),
                from: Some(FromItem::Subquery {
                    query: Box::new(Query {
                        selects,
                        order_by: Vec::new(),
                    }),
                    alias: "v".into(),
                }),
                filter: None,
            }],
            order_by,
        })
    }
}

/// Select item with the alias left off when the column already has it.
fn item(expr: SqlExpr, alias: &str) -> SelectItem {
    let alias = match &expr {
        SqlExpr::Column { table: None, name } if name == alias => None,
        _ => Some(alias.to_string()),
    };
    SelectItem::Expr { expr, alias }
}

fn compile(s: &Script, schema: &[String], positional: bool) -> Result<SqlQuery, SqlError> {
    let table = table_name(&s.source);
    let mut seen = BTreeSet::new();
    for c in schema {
        if c == ROWID {
            return Err(SqlError::DuplicateColumn(c.clone()));
        }
        if !seen.insert(c) {
            return Err(SqlError::DuplicateColumn(c.clone()));
        }
    }
    let source = Segment {
        rowid: SqlExpr::Column {
            table: Some(table.clone()),
            name: ROWID.into(),
        },
        from_source: true,
        defs: schema
            .iter()
            .map(|c| {
                (
                    c.clone(),
                    Def::Leaf(SqlExpr::Column {
                        table: Some(table.clone()),
                        name: c.clone(),
                    }),
                )
            })
            .collect(),
        filters: Vec::new(),
    };
    let mut c = Compiler {
        table: table.clone(),
        positional,
        source_error_free: matches!(s.source, Source::File { .. }),
        columns: schema.to_vec(),
        segs: vec![source],
        order: Vec::new(),
        keys: BTreeMap::new(),
        sorted: false,
        deleted: false,
        inserted: 0,
        accumulating: false,
        index: 0,
        statement: String::new(),
    };
    for (i, stmt) in s.statements().enumerate() {
        c.index = i;
        c.statement = stmt.to_string();
        c.statement(stmt)?;
    }
    Ok(SqlQuery {
        query: c.finish()?,
        sources: vec![SourceTable {
            table,
            source: s.source.clone(),
        }],
    })
}

/// Compile a row-local script to one query over its source. `schema` is
/// the loaded table's column names.
pub fn compile_script(s: &Script, schema: &[String]) -> Result<SqlQuery, SqlError> {
    compile(s, schema, false)
}

/// Like [`compile_script`], also accepting running accumulations
/// `UPDATE x = e + R[-1]C[0]` whose first row is given a plain value with
/// `WHERE ROWID = r`. They compile to a running-sum window.
pub fn compile_positional(s: &Script, schema: &[String]) -> Result<SqlQuery, SqlError> {
    compile(s, schema, true)
}

/// SQL expression text for a row-local formula over columns `schema`,
/// placed in column `host`.
pub fn compile_formula(f: &Formula, schema: &[String], host: usize) -> Result<String, SqlError> {
    let c = Compiler {
        table: String::new(),
        positional: false,
        source_error_free: true,
        columns: schema.to_vec(),
        segs: vec![Segment {
            rowid: SqlExpr::col(ROWID),
            from_source: true,
            defs: BTreeMap::new(),
            filters: Vec::new(),
        }],
        order: Vec::new(),
        keys: BTreeMap::new(),
        sorted: false,
        deleted: false,
        inserted: 0,
        accumulating: false,
        index: 0,
        statement: f.script_text(),
    };
    if f.expr().mentions_prior() {
        return Err(c.unsupported("VALUE has no meaning outside an update"));
    }
    c.sql_expr(f.expr(), f, 0, host, &SqlExpr::Lit(Value::Null), Mode::Live)
        .map(|e| e.to_string())
}
