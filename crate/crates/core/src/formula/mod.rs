//! Formula language: AST, parsing, rendering, evaluation, dependency
//! tracking and rebasing across coordinate changes.
//!
//! Relative references are stored as offsets from the host cell, so a
//! formula's structure is independent of where it sits. Rendering to A1
//! notation needs the host position.

mod eval;
pub(crate) mod graph;
pub(crate) mod parse;
mod rebase;
pub(crate) mod render;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::model::CellId;
use crate::value::{AggFn, BinOp, CastType, Value};

pub use eval::{evaluate, resolve_ref, RefTarget};
pub use graph::{
    cyclic_cells, dependencies, dependency_graph, detect_cycles, recompute, recompute_all, Deps,
};
pub use parse::{parse_formula, parse_formula_text, FormulaError};
pub use rebase::{adapt, rebase, Stability, Transform};
pub use render::{is_bare_identifier, quote_identifier, render_formula, RenderError};

/// One axis of a coordinate reference. `Abs` holds a zero-based index,
/// `Rel` an offset from the host.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Axis {
    Abs(usize),
    Rel(i64),
}

impl Axis {
    /// Index this axis designates from `host`, if non-negative.
    pub fn resolve(self, host: usize) -> Option<usize> {
        match self {
            Axis::Abs(i) => Some(i),
            Axis::Rel(d) => usize::try_from(host as i64 + d).ok(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum CellRef {
    /// Reference to a specific cell identity, written `@17`.
    Explicit(CellId),
    Coord { col: Axis, row: Axis },
    /// A reference whose target no longer exists, written `#REF!`.
    Dangling,
}

impl CellRef {
    pub fn relative(dcol: i64, drow: i64) -> Self {
        CellRef::Coord {
            col: Axis::Rel(dcol),
            row: Axis::Rel(drow),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnOp {
    Neg,
    Not,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum AggArg {
    /// Rectangle spanned by two corners, inclusive.
    Range(CellRef, CellRef),
    Expr(Expr),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Expr {
    Lit(Value),
    Ref(CellRef),
    /// Cell of the named column in the host's row.
    Column(String),
    /// Identity of the host's row.
    RowId,
    /// The keyword `VALUE`: the host cell's own content.
    Prior,
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    If(Box<Expr>, Box<Expr>, Box<Expr>),
    Agg(AggFn, Vec<AggArg>),
    Cast(Box<Expr>, CastType),
    /// `x BETWEEN lo AND hi`, inclusive.
    Between(Box<Expr>, Box<Expr>, Box<Expr>),
    /// `x IN (a, b, ...)`.
    In(Box<Expr>, Vec<Expr>),
}

impl Expr {
    pub fn bin(op: BinOp, a: Expr, b: Expr) -> Expr {
        Expr::Binary(op, Box::new(a), Box::new(b))
    }

    pub fn if_(c: Expr, t: Expr, e: Expr) -> Expr {
        Expr::If(Box::new(c), Box::new(t), Box::new(e))
    }

    pub fn not_(e: Expr) -> Expr {
        Expr::Unary(UnOp::Not, Box::new(e))
    }

    pub fn col(name: &str) -> Expr {
        Expr::Column(name.to_string())
    }

    /// Number of AST nodes, counting range corners as one node each.
    pub fn size(&self) -> usize {
        1 + match self {
            Expr::Lit(_) | Expr::Ref(_) | Expr::Column(_) | Expr::RowId | Expr::Prior => 0,
            Expr::Unary(_, e) | Expr::Cast(e, _) => e.size(),
            Expr::Binary(_, a, b) => a.size() + b.size(),
            Expr::If(a, b, c) | Expr::Between(a, b, c) => a.size() + b.size() + c.size(),
            Expr::Agg(_, args) => args
                .iter()
                .map(|a| match a {
                    AggArg::Range(..) => 2,
                    AggArg::Expr(e) => e.size(),
                })
                .sum(),
            Expr::In(x, list) => x.size() + list.iter().map(Expr::size).sum::<usize>(),
        }
    }

    /// Visit every node, parents before children.
    pub fn walk(&self, f: &mut dyn FnMut(&Expr)) {
        f(self);
        match self {
            Expr::Lit(_) | Expr::Ref(_) | Expr::Column(_) | Expr::RowId | Expr::Prior => {}
            Expr::Unary(_, e) | Expr::Cast(e, _) => e.walk(f),
            Expr::Binary(_, a, b) => {
                a.walk(f);
                b.walk(f);
            }
            Expr::If(a, b, c) | Expr::Between(a, b, c) => {
                a.walk(f);
                b.walk(f);
                c.walk(f);
            }
            Expr::Agg(_, args) => {
                for a in args {
                    if let AggArg::Expr(e) = a {
                        e.walk(f);
                    }
                }
            }
            Expr::In(x, list) => {
                x.walk(f);
                for e in list {
                    e.walk(f);
                }
            }
        }
    }

    /// Rebuild bottom-up, applying `f` to every node after its children.
    pub fn map(self, f: &mut dyn FnMut(Expr) -> Expr) -> Expr {
        let b = |e: Box<Expr>, f: &mut dyn FnMut(Expr) -> Expr| Box::new(e.map(f));
        let node = match self {
            Expr::Unary(op, e) => Expr::Unary(op, b(e, f)),
            Expr::Cast(e, t) => Expr::Cast(b(e, f), t),
            Expr::Binary(op, x, y) => {
                let x = b(x, f);
                Expr::Binary(op, x, b(y, f))
            }
            Expr::If(x, y, z) => {
                let x = b(x, f);
                let y = b(y, f);
                Expr::If(x, y, b(z, f))
            }
            Expr::Between(x, y, z) => {
                let x = b(x, f);
                let y = b(y, f);
                Expr::Between(x, y, b(z, f))
            }
            Expr::Agg(func, args) => Expr::Agg(
                func,
                args.into_iter()
                    .map(|a| match a {
                        AggArg::Expr(e) => AggArg::Expr(e.map(f)),
                        r => r,
                    })
                    .collect(),
            ),
            Expr::In(x, list) => {
                let x = b(x, f);
                Expr::In(x, list.into_iter().map(|e| e.map(f)).collect())
            }
            leaf => leaf,
        };
        f(node)
    }

    /// Replace every `VALUE` with `with`.
    pub fn substitute_prior(self, with: &Expr) -> Expr {
        self.map(&mut |e| match e {
            Expr::Prior => with.clone(),
            e => e,
        })
    }

    pub fn mentions_prior(&self) -> bool {
        let mut found = false;
        self.walk(&mut |e| found |= matches!(e, Expr::Prior));
        found
    }

    /// Column names read by `Column` nodes.
    pub fn column_names(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.walk(&mut |e| {
            if let Expr::Column(n) = e {
                if !out.contains(n) {
                    out.push(n.clone());
                }
            }
        });
        out
    }
}

/// A cell formula. Serializes as its host-independent text.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Formula(Expr);

impl Formula {
    pub fn new(expr: Expr) -> Self {
        Formula(expr)
    }

    pub fn literal(v: Value) -> Self {
        Formula(Expr::Lit(v))
    }

    pub fn null() -> Self {
        Formula::literal(Value::Null)
    }

    pub fn expr(&self) -> &Expr {
        &self.0
    }

    pub fn into_expr(self) -> Expr {
        self.0
    }

    pub fn as_literal(&self) -> Option<&Value> {
        match &self.0 {
            Expr::Lit(v) => Some(v),
            _ => None,
        }
    }

    /// Canonical text. With a host, coordinate refs use A1 notation where
    /// possible; without one every relative ref is written R1C1.
    pub fn to_text(&self, host: Option<crate::model::Pos>) -> String {
        render::canonical(&self.0, host, false)
    }

    /// Host-free text with spaced operators, as written in scripts.
    pub fn script_text(&self) -> String {
        render::canonical(&self.0, None, true)
    }

    /// Relative normal form: the host-free canonical text.
    pub fn rnf(&self) -> String {
        self.to_text(None)
    }
}

impl From<Expr> for Formula {
    fn from(e: Expr) -> Self {
        Formula(e)
    }
}

impl Serialize for Formula {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.rnf())
    }
}

impl<'de> Deserialize<'de> for Formula {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        parse_formula_text(&text, None).map_err(serde::de::Error::custom)
    }
}
