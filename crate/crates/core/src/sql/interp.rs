//! A small interpreter for the emitted dialect: projection, selection,
//! `CASE`, `UNION ALL`, `ORDER BY`, row counts and the running-sum window.

use std::collections::BTreeMap;

use super::{FromItem, OrderKey, Query, Select, SelectItem, SqlError, SqlExpr, SqlQuery, ROWID};
use crate::executor::{load_source, Sources};
use crate::formula::UnOp;
use crate::model::SheetState;
use crate::value::{self, sort_cmp, BinOp, ErrorKind, Value};

/// A relation with named columns. A column named `ROWID` is the row
/// identity and is hidden from `*`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    /// The sheet as a source table: `ROWID` first, then the columns in
    /// display order.
    pub fn from_state(state: &SheetState) -> Table {
        let mut columns = vec![ROWID.to_string()];
        columns.extend(state.column_names().into_iter().map(str::to_string));
        let rows = state
            .coords()
            .rows()
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let mut row = vec![Value::Int(r.0 as i64)];
                row.extend(state.row_values(i));
                row
            })
            .collect();
        Table { columns, rows }
    }

    /// The sheet's visible content, as the compiled query returns it.
    pub fn visible(state: &SheetState) -> Table {
        Table {
            columns: state.column_names().into_iter().map(str::to_string).collect(),
            rows: (0..state.height()).map(|i| state.row_values(i)).collect(),
        }
    }
}

/// Column names and values of one input row, with the window results of
/// the current select.
struct Env<'a> {
    table: Option<&'a str>,
    names: &'a [String],
    values: &'a [Value],
    windows: &'a [(*const SqlExpr, Value)],
    /// Output columns visible to a single select's ORDER BY.
    outputs: Option<(&'a [String], &'a [Value])>,
}

impl Env<'_> {
    fn lookup(&self, table: &Option<String>, name: &str) -> Result<Value, SqlError> {
        if table.is_none() {
            if let Some((names, values)) = self.outputs {
                if let Some(i) = names.iter().position(|n| n == name) {
                    return Ok(values[i].clone());
                }
            }
        }
        if let (Some(t), Some(own)) = (table, self.table) {
            if t != own {
                return Err(SqlError::UnknownTable(t.clone()));
            }
        }
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.values[i].clone())
            .ok_or_else(|| SqlError::UnknownColumn(name.to_string()))
    }
}

fn count_rows(tables: &BTreeMap<String, Table>, t: &str) -> Result<Value, SqlError> {
    tables
        .get(t)
        .map(|t| Value::Int(t.rows.len() as i64))
        .ok_or_else(|| SqlError::UnknownTable(t.to_string()))
}

fn eval(e: &SqlExpr, env: &Env, tables: &BTreeMap<String, Table>) -> Result<Value, SqlError> {
    let ev = |x: &SqlExpr| eval(x, env, tables);
    Ok(match e {
        SqlExpr::Lit(v) => v.clone(),
        SqlExpr::Column { table, name } => env.lookup(table, name)?,
        SqlExpr::Unary(UnOp::Neg, x) => value::negate(&ev(x)?),
        SqlExpr::Unary(UnOp::Not, x) => value::not(&ev(x)?),
        SqlExpr::Binary(op, a, b) => value::binary(*op, &ev(a)?, &ev(b)?),
        SqlExpr::IsTrue { expr, negated } => Value::Bool(matches!(ev(expr)?, Value::Bool(true)) != *negated),
        SqlExpr::Case { whens, otherwise } => {
            for (c, t) in whens {
                let taken = match ev(c)? {
                    v @ Value::Error(_) => return Ok(v),
                    Value::Bool(b) => b,
                    Value::Null => false,
                    Value::Int(i) => i != 0,
                    Value::Float(x) => x != 0.0,
                    Value::String(_) => return Ok(Value::Error(ErrorKind::Type)),
                };
                if taken {
                    return ev(t);
                }
            }
            ev(otherwise)?
        }
        SqlExpr::Cast(x, ty) => value::cast(&ev(x)?, *ty),
        SqlExpr::Between(x, lo, hi) => {
            let v = ev(x)?;
            let ge = value::binary(BinOp::Ge, &v, &ev(lo)?);
            let le = value::binary(BinOp::Le, &v, &ev(hi)?);
            value::binary(BinOp::And, &ge, &le)
        }
        SqlExpr::In(x, items) => {
            let v = ev(x)?;
            let mut acc = Value::Bool(false);
            for item in items {
                let eq = value::binary(BinOp::Eq, &v, &ev(item)?);
                acc = value::binary(BinOp::Or, &acc, &eq);
            }
            acc
        }
        SqlExpr::CountRows(t) => count_rows(tables, t)?,
        SqlExpr::RunningSum { .. } => env
            .windows
            .iter()
            .find(|(p, _)| std::ptr::eq(*p, e))
            .map(|(_, v)| v.clone())
            .ok_or_else(|| SqlError::Arity("window function outside a select list".into()))?,
    })
}

fn order_cmp(a: &[Value], b: &[Value], keys: &[OrderKey]) -> std::cmp::Ordering {
    a.iter()
        .zip(b)
        .zip(keys)
        .map(|((x, y), k)| sort_cmp(x, y, k.descending))
        .find(|o| o.is_ne())
        .unwrap_or(std::cmp::Ordering::Equal)
}

/// Stable order of `0..n` by precomputed key tuples.
fn sorted_indexes(keys: &[Vec<Value>], order: &[OrderKey]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..keys.len()).collect();
    idx.sort_by(|&a, &b| order_cmp(&keys[a], &keys[b], order));
    idx
}

fn input(select: &Select, tables: &BTreeMap<String, Table>) -> Result<(Option<String>, Table), SqlError> {
    match &select.from {
        None => Ok((
            None,
            Table {
                columns: Vec::new(),
                rows: vec![Vec::new()],
            },
        )),
        Some(FromItem::Table(t)) => tables
            .get(t)
            .cloned()
            .map(|tb| (Some(t.clone()), tb))
            .ok_or_else(|| SqlError::UnknownTable(t.clone())),
        Some(FromItem::Subquery { query, alias }) => Ok((Some(alias.clone()), execute(query, tables)?)),
    }
}

/// Evaluated select: output table plus, per output row, the input row it
/// came from (for ORDER BY on input columns).
struct Evaluated {
    out: Table,
    source: Table,
    source_rows: Vec<usize>,
    table: Option<String>,
}

fn run_select(select: &Select, tables: &BTreeMap<String, Table>) -> Result<Evaluated, SqlError> {
    let (table, src) = input(select, tables)?;
    let no_windows: Vec<(*const SqlExpr, Value)> = Vec::new();
    let env = |i: usize| Env {
        table: table.as_deref(),
        names: &src.columns,
        values: &src.rows[i],
        windows: &no_windows,
        outputs: None,
    };
    let mut kept = Vec::new();
    for i in 0..src.rows.len() {
        match &select.filter {
            Some(f) => {
                if matches!(eval(f, &env(i), tables)?, Value::Bool(true)) {
                    kept.push(i);
                }
            }
            None => kept.push(i),
        }
    }

    // Window results over the filtered rows, in input order.
    let mut window_nodes: Vec<(*const SqlExpr, SqlExpr)> = Vec::new();
    for item in &select.items {
        if let SelectItem::Expr { expr, .. } = item {
            expr.walk(&mut |e| {
                if let SqlExpr::RunningSum { .. } = e {
                    window_nodes.push((e as *const SqlExpr, e.clone()));
                }
            });
        }
    }
    let mut windows: Vec<Vec<(*const SqlExpr, Value)>> = vec![Vec::new(); kept.len()];
    for (ptr, node) in &window_nodes {
        let SqlExpr::RunningSum { arg, order } = node else {
            unreachable!("collected windows only");
        };
        let mut keys = Vec::new();
        let mut args = Vec::new();
        for &i in &kept {
            let keys_i: Result<Vec<Value>, SqlError> =
                order.iter().map(|k| eval(&k.expr, &env(i), tables)).collect();
            keys.push(keys_i?);
            args.push(eval(arg, &env(i), tables)?);
        }
        let mut acc: Option<Value> = None;
        for j in sorted_indexes(&keys, order) {
            let next = match &acc {
                None => args[j].clone(),
                Some(prev) => value::binary(BinOp::Add, &args[j], prev),
            };
            windows[j].push((*ptr, next.clone()));
            acc = Some(next);
        }
    }

    let mut out = Table::default();
    for item in &select.items {
        match item {
            SelectItem::Star => out
                .columns
                .extend(src.columns.iter().filter(|c| *c != ROWID).cloned()),
            SelectItem::Expr { expr, alias } => out.columns.push(match (alias, expr) {
                (Some(a), _) => a.clone(),
                (None, SqlExpr::Column { name, .. }) => name.clone(),
                (None, e) => e.to_string(),
            }),
        }
    }
    for (j, &i) in kept.iter().enumerate() {
        let e = Env {
            windows: &windows[j],
            ..env(i)
        };
        let mut row = Vec::new();
        for item in &select.items {
            match item {
                SelectItem::Star => {
                    for (c, v) in src.columns.iter().zip(&src.rows[i]) {
                        if c != ROWID {
                            row.push(v.clone());
                        }
                    }
                }
                SelectItem::Expr { expr, .. } => row.push(eval(expr, &e, tables)?),
            }
        }
        out.rows.push(row);
    }
    Ok(Evaluated {
        out,
        source: src,
        source_rows: kept,
        table,
    })
}

/// Run a query against named tables.
pub fn execute(q: &Query, tables: &BTreeMap<String, Table>) -> Result<Table, SqlError> {
    let mut parts = Vec::new();
    for s in &q.selects {
        parts.push(run_select(s, tables)?);
    }
    let width = parts[0].out.columns.len();
    if parts.iter().any(|p| p.out.columns.len() != width) {
        return Err(SqlError::Arity("UNION ALL branches differ in width".into()));
    }
    if q.order_by.is_empty() {
        let mut it = parts.into_iter();
        let mut out = it.next().expect("at least one select").out;
        for p in it {
            out.rows.extend(p.out.rows);
        }
        return Ok(out);
    }
    let no_windows: Vec<(*const SqlExpr, Value)> = Vec::new();
    let mut keys = Vec::new();
    let mut rows = Vec::new();
    let single = parts.len() == 1;
    let columns = parts[0].out.columns.clone();
    for p in &parts {
        for (j, row) in p.out.rows.iter().enumerate() {
            // A lone select may order by its input columns as well.
            let env = if single {
                Env {
                    table: p.table.as_deref(),
                    names: &p.source.columns,
                    values: &p.source.rows[p.source_rows[j]],
                    windows: &no_windows,
                    outputs: Some((&columns, row)),
                }
            } else {
                Env {
                    table: None,
                    names: &columns,
                    values: row,
                    windows: &no_windows,
                    outputs: None,
                }
            };
            let k: Result<Vec<Value>, SqlError> =
                q.order_by.iter().map(|k| eval(&k.expr, &env, tables)).collect();
            keys.push(k?);
            rows.push(row.clone());
        }
    }
    let order = sorted_indexes(&keys, &q.order_by);
    Ok(Table {
        columns,
        rows: order.into_iter().map(|i| rows[i].clone()).collect(),
    })
}

/// Load every source in the manifest and run the query.
pub fn run_query(q: &SqlQuery, sources: &dyn Sources) -> Result<Table, SqlError> {
    let mut tables = BTreeMap::new();
    for s in &q.sources {
        let (state, _) = load_source(&s.source, sources).map_err(|e| SqlError::Source(e.to_string()))?;
        tables.insert(s.table.clone(), Table::from_state(&state));
    }
    execute(&q.query, &tables)
}
