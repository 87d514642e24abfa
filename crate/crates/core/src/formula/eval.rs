//! Single-step evaluation: references read the stored values of other cells.

use super::{AggArg, CellRef, Expr, Formula, UnOp};
use crate::model::{CellId, Pos, SheetState};
use crate::value::{self, BinOp, ErrorKind, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefTarget {
    Cell(CellId),
    Missing,
}

/// Resolve a reference at `host` to a cell id.
pub fn resolve_ref(r: &CellRef, state: &SheetState, host: Pos) -> RefTarget {
    match r {
        CellRef::Explicit(id) if state.coords().position_of(*id).is_some() => RefTarget::Cell(*id),
        CellRef::Explicit(_) | CellRef::Dangling => RefTarget::Missing,
        CellRef::Coord { col, row } => {
            let pos = col
                .resolve(host.col)
                .zip(row.resolve(host.row))
                .map(|(c, r)| Pos::new(c, r));
            match pos.and_then(|p| state.coords().cell_at(p)) {
                Some(id) => RefTarget::Cell(id),
                None => RefTarget::Missing,
            }
        }
    }
}

fn ref_pos(r: &CellRef, state: &SheetState, host: Pos) -> Option<Pos> {
    match resolve_ref(r, state, host) {
        RefTarget::Cell(id) => state.coords().position_of(id),
        RefTarget::Missing => None,
    }
}

/// Members of the rectangle spanned by two corners, row-major, or `None`
/// when a corner does not resolve.
pub(crate) fn range_members(
    a: &CellRef,
    b: &CellRef,
    state: &SheetState,
    host: Pos,
) -> Option<Vec<CellId>> {
    let pa = ref_pos(a, state, host)?;
    let pb = ref_pos(b, state, host)?;
    let mut out = Vec::new();
    for row in pa.row.min(pb.row)..=pa.row.max(pb.row) {
        for col in pa.col.min(pb.col)..=pa.col.max(pb.col) {
            out.push(state.coords().cell_at(Pos::new(col, row))?);
        }
    }
    Some(out)
}

/// Cell read by a `Column` node at `host`.
pub(crate) fn column_target(name: &str, state: &SheetState, host: Pos) -> Option<CellId> {
    let c = state.coords().column_by_name(name)?;
    state.coords().cell_at(Pos::new(c, host.row))
}

fn read(state: &SheetState, id: Option<CellId>) -> Value {
    id.and_then(|id| state.cell(id))
        .map_or(Value::Error(ErrorKind::RefDangling), |c| c.value.clone())
}

fn eval(e: &Expr, state: &SheetState, host: Pos) -> Value {
    match e {
        Expr::Lit(v) => v.clone(),
        Expr::Ref(r) => match resolve_ref(r, state, host) {
            RefTarget::Cell(id) => read(state, Some(id)),
            RefTarget::Missing => Value::Error(ErrorKind::RefDangling),
        },
        Expr::Column(name) => read(state, column_target(name, state, host)),
        Expr::RowId => state
            .coords()
            .row(host.row)
            .map_or(Value::Error(ErrorKind::RefDangling), |r| Value::Int(r.0 as i64)),
        Expr::Prior => read(state, state.coords().cell_at(host)),
        Expr::Unary(UnOp::Neg, x) => value::negate(&eval(x, state, host)),
        Expr::Unary(UnOp::Not, x) => value::not(&eval(x, state, host)),
        Expr::Binary(op, a, b) => value::binary(*op, &eval(a, state, host), &eval(b, state, host)),
        Expr::If(c, t, f) => match eval(c, state, host) {
            v @ Value::Error(_) => v,
            Value::Bool(true) => eval(t, state, host),
            Value::Bool(false) | Value::Null => eval(f, state, host),
            Value::Int(i) => eval(if i != 0 { t } else { f }, state, host),
            Value::Float(x) => eval(if x != 0.0 { t } else { f }, state, host),
            Value::String(_) => Value::Error(ErrorKind::Type),
        },
        Expr::Agg(func, args) => {
            let mut vals = Vec::new();
            for a in args {
                match a {
                    AggArg::Range(x, y) => match range_members(x, y, state, host) {
                        Some(ids) => vals.extend(ids.into_iter().map(|id| (read(state, Some(id)), false))),
                        None => vals.push((Value::Error(ErrorKind::RefDangling), false)),
                    },
                    // References are lenient like range members; direct
                    // values must be numeric.
                    AggArg::Expr(x) => {
                        let strict = !matches!(x, Expr::Ref(_) | Expr::Column(_));
                        vals.push((eval(x, state, host), strict));
                    }
                }
            }
            value::aggregate(*func, &vals)
        }
        Expr::Cast(x, ty) => value::cast(&eval(x, state, host), *ty),
        Expr::Between(x, lo, hi) => {
            let v = eval(x, state, host);
            let ge = value::binary(BinOp::Ge, &v, &eval(lo, state, host));
            let le = value::binary(BinOp::Le, &v, &eval(hi, state, host));
            value::binary(BinOp::And, &ge, &le)
        }
        Expr::In(x, items) => {
            let v = eval(x, state, host);
            let mut acc = Value::Bool(false);
            for item in items {
                let eq = value::binary(BinOp::Eq, &v, &eval(item, state, host));
                acc = value::binary(BinOp::Or, &acc, &eq);
            }
            acc
        }
    }
}

/// Evaluate `f` as if placed at `host`, reading stored values.
pub fn evaluate(f: &Formula, state: &SheetState, host: Pos) -> Value {
    eval(f.expr(), state, host)
}
