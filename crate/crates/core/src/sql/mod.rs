//! Compilation of scripts to a single SQL query, plus a parser, printer and
//! a small interpreter for the emitted dialect.
//!
//! The dialect is ANSI-flavoured with a few fixed semantics of its own:
//! values and operators are those of the formula engine (errors are values
//! and propagate), `CASE WHEN` tests its condition the way formula `IF`
//! does, and `SUM(x) OVER (ORDER BY .. ROWS BETWEEN UNBOUNDED PRECEDING AND
//! CURRENT ROW)` folds with the engine's `+`, so nulls and errors carry
//! forward instead of being skipped. Every table has a `ROWID`
//! pseudo-column that `*` does not expand.

mod compile;
mod interp;
mod parse;
mod print;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formula::UnOp;
use crate::lang::Source;
use crate::value::{BinOp, CastType, Value};

pub use compile::{compile_formula, compile_positional, compile_script, table_name};
pub use interp::{execute, run_query, Table};
pub use parse::parse_query;

/// Name of the synthetic row identity column.
pub const ROWID: &str = "ROWID";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SqlError {
    #[error(
        "POSITIONAL_NOT_COMPILABLE: statement {} `{statement}`: {reason} in `{formula}`; \
         running accumulations can be compiled with compile_positional",
        index + 1
    )]
    PositionalNotCompilable {
        index: usize,
        statement: String,
        formula: String,
        reason: String,
    },
    #[error("UNSUPPORTED_PATTERN: statement {} `{statement}`: {reason}", index + 1)]
    UnsupportedPattern {
        index: usize,
        statement: String,
        reason: String,
    },
    #[error("UNKNOWN_COLUMN: no column named '{0}'")]
    UnknownColumn(String),
    #[error("DUPLICATE_COLUMN: column '{0}' appears twice")]
    DuplicateColumn(String),
    #[error("DUPLICATE_ROWID: row {0} listed twice")]
    DuplicateRowId(u64),
    #[error("OUT_OF_RANGE: {0}")]
    OutOfRange(String),
    #[error("UNKNOWN_TABLE: no table named '{0}'")]
    UnknownTable(String),
    #[error("SQL_SYNTAX: {message} at offset {offset}")]
    Syntax { offset: usize, message: String },
    #[error("ARITY: {0}")]
    Arity(String),
    #[error("SOURCE: {0}")]
    Source(String),
}

impl SqlError {
    pub fn code(&self) -> &'static str {
        match self {
            SqlError::PositionalNotCompilable { .. } => "POSITIONAL_NOT_COMPILABLE",
            SqlError::UnsupportedPattern { .. } => "UNSUPPORTED_PATTERN",
            SqlError::UnknownColumn(_) => "UNKNOWN_COLUMN",
            SqlError::DuplicateColumn(_) => "DUPLICATE_COLUMN",
            SqlError::DuplicateRowId(_) => "DUPLICATE_ROWID",
            SqlError::OutOfRange(_) => "OUT_OF_RANGE",
            SqlError::UnknownTable(_) => "UNKNOWN_TABLE",
            SqlError::Syntax { .. } => "SQL_SYNTAX",
            SqlError::Arity(_) => "ARITY",
            SqlError::Source(_) => "SOURCE",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum SqlExpr {
    Lit(Value),
    /// Column reference, optionally qualified by a table name or alias.
    Column {
        table: Option<String>,
        name: String,
    },
    Unary(UnOp, Box<SqlExpr>),
    Binary(BinOp, Box<SqlExpr>, Box<SqlExpr>),
    /// `x IS TRUE` or `x IS NOT TRUE`; never an error.
    IsTrue {
        expr: Box<SqlExpr>,
        negated: bool,
    },
    Case {
        whens: Vec<(SqlExpr, SqlExpr)>,
        otherwise: Box<SqlExpr>,
    },
    Cast(Box<SqlExpr>, CastType),
    Between(Box<SqlExpr>, Box<SqlExpr>, Box<SqlExpr>),
    In(Box<SqlExpr>, Vec<SqlExpr>),
    /// `(SELECT COUNT(*) FROM table)`.
    CountRows(String),
    /// Cumulative `SUM(arg) OVER (ORDER BY ..)` from the first row through
    /// the current one.
    RunningSum {
        arg: Box<SqlExpr>,
        order: Vec<OrderKey>,
    },
}

impl SqlExpr {
    pub fn col(name: &str) -> SqlExpr {
        SqlExpr::Column {
            table: None,
            name: name.to_string(),
        }
    }

    pub fn bin(op: BinOp, a: SqlExpr, b: SqlExpr) -> SqlExpr {
        SqlExpr::Binary(op, Box::new(a), Box::new(b))
    }

    /// Rebuild bottom-up, applying `f` to every node after its children.
    pub fn map(self, f: &mut dyn FnMut(SqlExpr) -> SqlExpr) -> SqlExpr {
        let b = |e: Box<SqlExpr>, f: &mut dyn FnMut(SqlExpr) -> SqlExpr| Box::new(e.map(f));
        let node = match self {
            SqlExpr::Unary(op, e) => SqlExpr::Unary(op, b(e, f)),
            SqlExpr::Binary(op, x, y) => {
                let x = b(x, f);
                SqlExpr::Binary(op, x, b(y, f))
            }
            SqlExpr::IsTrue { expr, negated } => SqlExpr::IsTrue {
                expr: b(expr, f),
                negated,
            },
            SqlExpr::Case { whens, otherwise } => {
                let whens = whens.into_iter().map(|(c, t)| (c.map(f), t.map(f))).collect();
                SqlExpr::Case {
                    whens,
                    otherwise: b(otherwise, f),
                }
            }
            SqlExpr::Cast(e, t) => SqlExpr::Cast(b(e, f), t),
            SqlExpr::Between(x, y, z) => {
                let x = b(x, f);
                let y = b(y, f);
                SqlExpr::Between(x, y, b(z, f))
            }
            SqlExpr::In(x, list) => {
                let x = b(x, f);
                SqlExpr::In(x, list.into_iter().map(|e| e.map(f)).collect())
            }
            SqlExpr::RunningSum { arg, order } => {
                let arg = b(arg, f);
                SqlExpr::RunningSum {
                    arg,
                    order: order
                        .into_iter()
                        .map(|k| OrderKey {
                            expr: k.expr.map(f),
                            descending: k.descending,
                        })
                        .collect(),
                }
            }
            leaf => leaf,
        };
        f(node)
    }

    /// Visit every node, parents before children.
    pub fn walk(&self, f: &mut dyn FnMut(&SqlExpr)) {
        f(self);
        match self {
            SqlExpr::Lit(_) | SqlExpr::Column { .. } | SqlExpr::CountRows(_) => {}
            SqlExpr::Unary(_, e) | SqlExpr::Cast(e, _) | SqlExpr::IsTrue { expr: e, .. } => e.walk(f),
            SqlExpr::Binary(_, a, b) => {
                a.walk(f);
                b.walk(f);
            }
            SqlExpr::Case { whens, otherwise } => {
                for (c, t) in whens {
                    c.walk(f);
                    t.walk(f);
                }
                otherwise.walk(f);
            }
            SqlExpr::Between(a, b, c) => {
                a.walk(f);
                b.walk(f);
                c.walk(f);
            }
            SqlExpr::In(x, list) => {
                x.walk(f);
                for e in list {
                    e.walk(f);
                }
            }
            SqlExpr::RunningSum { arg, order } => {
                arg.walk(f);
                for k in order {
                    k.expr.walk(f);
                }
            }
        }
    }

    /// Drop table qualifiers from column references.
    pub fn unqualified(self) -> SqlExpr {
        self.map(&mut |e| match e {
            SqlExpr::Column { name, .. } => SqlExpr::Column { table: None, name },
            e => e,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct OrderKey {
    pub expr: SqlExpr,
    pub descending: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum SelectItem {
    /// `*`: every column of the input except `ROWID`.
    Star,
    Expr { expr: SqlExpr, alias: Option<String> },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum FromItem {
    Table(String),
    Subquery { query: Box<Query>, alias: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Select {
    pub items: Vec<SelectItem>,
    pub from: Option<FromItem>,
    pub filter: Option<SqlExpr>,
}

/// `UNION ALL` of one or more selects, then an optional ordering.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Query {
    pub selects: Vec<Select>,
    pub order_by: Vec<OrderKey>,
}

/// A table the query reads and the script source it stands for.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceTable {
    pub table: String,
    pub source: Source,
}

/// A compiled script: the query and the manifest of its source tables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SqlQuery {
    pub query: Query,
    pub sources: Vec<SourceTable>,
}

impl SqlQuery {
    pub fn text(&self) -> String {
        self.query.to_string()
    }
}
