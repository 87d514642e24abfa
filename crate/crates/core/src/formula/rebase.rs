//! Rewriting formulas across a change of coordinate system.
//!
//! Under value stability every reference keeps designating the same cell
//! identity; targets that no longer exist become `#REF!`. Under formula
//! stability the formula text is left alone and references follow
//! positions.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{AggArg, Axis, CellRef, Expr, Formula};
use crate::model::{CellId, CoordinateSystem, Pos};
use crate::value::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Stability {
    ValueStable,
    FormulaStable,
}

/// Old and new coordinate systems of a structural change.
#[derive(Debug, Clone, Copy)]
pub struct Transform<'a> {
    pub old: &'a CoordinateSystem,
    pub new: &'a CoordinateSystem,
}

impl Transform<'_> {
    fn resolve_old(&self, r: &CellRef, host: Pos) -> Option<CellId> {
        match r {
            CellRef::Explicit(id) => self.old.position_of(*id).map(|_| *id),
            CellRef::Dangling => None,
            CellRef::Coord { col, row } => {
                let p = Pos::new(col.resolve(host.col)?, row.resolve(host.row)?);
                self.old.cell_at(p)
            }
        }
    }

    fn fresh(&self, id: CellId) -> bool {
        self.old.position_of(id).is_none()
    }
}

fn re_axis(a: Axis, target: usize, host: usize) -> Axis {
    match a {
        Axis::Abs(_) => Axis::Abs(target),
        Axis::Rel(_) => Axis::Rel(target as i64 - host as i64),
    }
}

struct Ctx<'a> {
    t: &'a Transform<'a>,
    old_host: Pos,
    new_host: Pos,
}

impl Ctx<'_> {
    /// Re-express a reference to the same cell identity from the new host.
    fn retarget(&self, style: &CellRef, id: Option<CellId>) -> CellRef {
        let Some(id) = id else {
            return CellRef::Dangling;
        };
        let Some(np) = self.t.new.position_of(id) else {
            return CellRef::Dangling;
        };
        match style {
            CellRef::Explicit(_) => CellRef::Explicit(id),
            CellRef::Coord { col, row } => CellRef::Coord {
                col: re_axis(*col, np.col, self.new_host.col),
                row: re_axis(*row, np.row, self.new_host.row),
            },
            CellRef::Dangling => CellRef::relative(
                np.col as i64 - self.new_host.col as i64,
                np.row as i64 - self.new_host.row as i64,
            ),
        }
    }

    fn cell_ref(&self, r: &CellRef) -> CellRef {
        self.retarget(r, self.t.resolve_old(r, self.old_host))
    }

    fn members(&self, coords: &CoordinateSystem, a: Pos, b: Pos) -> Option<Vec<CellId>> {
        let mut out = Vec::new();
        for row in a.row.min(b.row)..=a.row.max(b.row) {
            for col in a.col.min(b.col)..=a.col.max(b.col) {
                out.push(coords.cell_at(Pos::new(col, row))?);
            }
        }
        Some(out)
    }

    fn range(&self, a: &CellRef, b: &CellRef) -> Vec<AggArg> {
        let old = self.t.old;
        let ca = self.t.resolve_old(a, self.old_host);
        let cb = self.t.resolve_old(b, self.old_host);
        let old_members = match (ca, cb) {
            (Some(x), Some(y)) => {
                self.members(old, old.position_of(x).unwrap(), old.position_of(y).unwrap())
            }
            _ => None,
        };
        let Some(old_members) = old_members else {
            return vec![AggArg::Expr(Expr::Ref(CellRef::Dangling))];
        };
        let new = self.t.new;
        let (na, nb) = (self.retarget(a, ca), self.retarget(b, cb));
        let pa = ca.and_then(|id| new.position_of(id));
        let pb = cb.and_then(|id| new.position_of(id));
        if let (Some(pa), Some(pb)) = (pa, pb) {
            if let Some(new_members) = self.members(new, pa, pb) {
                let now: BTreeSet<CellId> = new_members.iter().copied().collect();
                let before: BTreeSet<CellId> = old_members.iter().copied().collect();
                let extra_fresh = now.difference(&before).all(|id| self.t.fresh(*id));
                if before.is_subset(&now) && extra_fresh {
                    return vec![AggArg::Range(na, nb)];
                }
            }
        }
        // The rectangle no longer holds exactly the old members: list them.
        old_members
            .into_iter()
            .map(|id| AggArg::Expr(Expr::Ref(self.retarget(&CellRef::relative(0, 0), Some(id)))))
            .collect()
    }

    fn expr(&self, e: &Expr) -> Expr {
        let b = |x: &Expr| Box::new(self.expr(x));
        match e {
            Expr::Lit(_) | Expr::Prior => e.clone(),
            Expr::Ref(r) => Expr::Ref(self.cell_ref(r)),
            Expr::Column(name) => {
                let old = self.t.old;
                let id = old
                    .column_by_name(name)
                    .and_then(|c| old.cell_at(Pos::new(c, self.old_host.row)));
                let keep = id
                    .and_then(|id| self.t.new.position_of(id))
                    .is_some_and(|np| {
                        np.row == self.new_host.row
                            && self.t.new.column(np.col).is_some_and(|c| &c.name == name)
                    });
                if keep {
                    e.clone()
                } else {
                    Expr::Ref(self.retarget(&CellRef::relative(0, 0), id))
                }
            }
            Expr::RowId => {
                let before = self.t.old.row(self.old_host.row);
                let after = self.t.new.row(self.new_host.row);
                match before {
                    Some(r) if before != after => Expr::Lit(Value::Int(r.0 as i64)),
                    _ => Expr::RowId,
                }
            }
            Expr::Unary(op, x) => Expr::Unary(*op, b(x)),
            Expr::Cast(x, ty) => Expr::Cast(b(x), *ty),
            Expr::Binary(op, x, y) => Expr::Binary(*op, b(x), b(y)),
            Expr::If(x, y, z) => Expr::If(b(x), b(y), b(z)),
            Expr::Between(x, y, z) => Expr::Between(b(x), b(y), b(z)),
            Expr::In(x, items) => Expr::In(b(x), items.iter().map(|i| self.expr(i)).collect()),
            Expr::Agg(func, args) => Expr::Agg(
                *func,
                args.iter()
                    .flat_map(|a| match a {
                        AggArg::Range(x, y) => self.range(x, y),
                        AggArg::Expr(x) => vec![AggArg::Expr(self.expr(x))],
                    })
                    .collect(),
            ),
        }
    }
}

/// Rebase `f`, hosted at `host` in `t.old`, into `t.new`. A host that does
/// not survive the change leaves the formula unchanged.
pub fn rebase(f: &Formula, host: Pos, t: &Transform, mode: Stability) -> Formula {
    if mode == Stability::FormulaStable {
        return f.clone();
    }
    let Some(new_host) = t.old.cell_at(host).and_then(|id| t.new.position_of(id)) else {
        return f.clone();
    };
    let ctx = Ctx {
        t,
        old_host: host,
        new_host,
    };
    Formula::new(ctx.expr(f.expr()))
}

/// Formula for a copy of `f` placed `offset` cells away. Relative
/// references are stored as offsets, so the copy is structurally identical;
/// absolute and explicit references likewise stay put.
pub fn adapt(f: &Formula, _offset: (i64, i64)) -> Formula {
    f.clone()
}
