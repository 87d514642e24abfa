//! The statement language: scripts of view operations over a loaded table.
//!
//! ```text
//! script := source ';' { stmt ';' [ '-- group' N ] }
//! source := LOAD 'file' [ WITH ( HEADER = bool, INFER = bool ) ] | LOAD PAGE 'name'
//! stmt   := UPDATE col = f [ WHERE c ]
//!         | UPDATE '[' region [ WHERE p ] ']' = f
//!         | ADD COLUMN col [ AS f ] [ AT n ]
//!         | REMOVE COLUMN col
//!         | INSERT ROW ( col = f, ... ) [ AT n ]
//!         | DELETE WHERE c
//!         | REORDER COLUMNS ( col, ... )
//!         | REORDER ROWS ( rowid, ... )
//!         | SORT ROWS col [ ASC | DESC ], ...
//!         | MOVE A1:B2 TO C3
//! region := '*' | A1 [ ':' A1 ] | letters ':' letters | n ':' n
//! ```
//!
//! Formulas inside scripts are host-free: relative references are written
//! `R[-1]C[0]`. Positions after `AT` and in regions are 1-based in text and
//! zero-based in the AST.

mod parse;

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::formula::{quote_identifier, Formula};
use crate::model::{column_letters, Pos, RowId};

pub use parse::{parse_script, parse_statement, LangError};

/// Provenance tag shared by all statements produced by one UI gesture.
pub type GroupId = u64;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RegionSpec {
    /// Inclusive rectangle between two corners.
    Rect { from: Pos, to: Pos },
    /// Columns `from..=to` by index, every row.
    Columns { from: usize, to: usize },
    /// Rows `from..=to` by index, every column.
    Rows { from: usize, to: usize },
    All,
}

impl RegionSpec {
    /// Whether the cell at `pos` lies in the region.
    pub fn contains(&self, pos: Pos) -> bool {
        let within = |x: usize, a: usize, b: usize| a.min(b) <= x && x <= a.max(b);
        match *self {
            RegionSpec::Rect { from, to } => {
                within(pos.col, from.col, to.col) && within(pos.row, from.row, to.row)
            }
            RegionSpec::Columns { from, to } => within(pos.col, from, to),
            RegionSpec::Rows { from, to } => within(pos.row, from, to),
            RegionSpec::All => true,
        }
    }
}

impl fmt::Display for RegionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RegionSpec::Rect { from, to } => write!(f, "{}:{}", from.a1(), to.a1()),
            RegionSpec::Columns { from, to } => {
                write!(f, "{}:{}", column_letters(*from), column_letters(*to))
            }
            RegionSpec::Rows { from, to } => write!(f, "{}:{}", from + 1, to + 1),
            RegionSpec::All => f.write_str("*"),
        }
    }
}

/// A region plus an optional per-cell predicate (`VALUE` is the cell's
/// current value).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RegionTarget {
    pub spec: RegionSpec,
    pub predicate: Option<Formula>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SortKey {
    pub column: String,
    #[serde(default)]
    pub descending: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Statement {
    Update {
        column: String,
        formula: Formula,
        condition: Option<Formula>,
    },
    UpdateRegion {
        region: RegionTarget,
        formula: Formula,
    },
    AddColumn {
        name: String,
        /// Derived column definition; produced by fusing an ADD with its
        /// first unconditional UPDATE.
        formula: Option<Formula>,
        at: Option<usize>,
    },
    RemoveColumn {
        name: String,
    },
    InsertRow {
        assignments: Vec<(String, Formula)>,
        at: Option<usize>,
    },
    Delete {
        condition: Formula,
    },
    ReorderColumns {
        names: Vec<String>,
    },
    ReorderRows {
        rows: Vec<RowId>,
    },
    Sort {
        keys: Vec<SortKey>,
    },
    /// Cut the rectangle `from..to` and paste it with its top-left at `dest`.
    Move {
        from: Pos,
        to: Pos,
        dest: Pos,
    },
}

impl Statement {
    /// True for forms beyond the base grammar: positional `AT`, region
    /// targets, derived columns and moves.
    pub fn is_extension(&self) -> bool {
        match self {
            Statement::UpdateRegion { .. } | Statement::Move { .. } => true,
            Statement::AddColumn { formula, at, .. } => formula.is_some() || at.is_some(),
            Statement::InsertRow { at, .. } => at.is_some(),
            _ => false,
        }
    }

    /// Statement keyword, e.g. `UPDATE` or `REORDER ROWS`.
    pub fn kind(&self) -> &'static str {
        match self {
            Statement::Update { .. } | Statement::UpdateRegion { .. } => "UPDATE",
            Statement::AddColumn { .. } => "ADD COLUMN",
            Statement::RemoveColumn { .. } => "REMOVE COLUMN",
            Statement::InsertRow { .. } => "INSERT ROW",
            Statement::Delete { .. } => "DELETE",
            Statement::ReorderColumns { .. } => "REORDER COLUMNS",
            Statement::ReorderRows { .. } => "REORDER ROWS",
            Statement::Sort { .. } => "SORT ROWS",
            Statement::Move { .. } => "MOVE",
        }
    }

    /// AST node count, used as a readability measure.
    pub fn size(&self) -> usize {
        let f = |x: &Formula| x.expr().size();
        let of = |x: &Option<Formula>| x.as_ref().map_or(0, f);
        1 + match self {
            Statement::Update {
                formula, condition, ..
            } => 1 + f(formula) + of(condition),
            Statement::UpdateRegion { region, formula } => 1 + of(&region.predicate) + f(formula),
            Statement::AddColumn { formula, at, .. } => 1 + of(formula) + at.is_some() as usize,
            Statement::RemoveColumn { .. } => 1,
            Statement::InsertRow { assignments, at } => {
                assignments.iter().map(|(_, x)| 1 + f(x)).sum::<usize>() + at.is_some() as usize
            }
            Statement::Delete { condition } => f(condition),
            Statement::ReorderColumns { names } => names.len(),
            Statement::ReorderRows { rows } => rows.len(),
            Statement::Sort { keys } => keys.len(),
            Statement::Move { .. } => 3,
        }
    }
}

impl fmt::Display for Statement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let at = |f: &mut fmt::Formatter<'_>, at: &Option<usize>| match at {
            Some(n) => write!(f, " AT {}", n + 1),
            None => Ok(()),
        };
        let names = |ns: &[String]| {
            ns.iter()
                .map(|n| quote_identifier(n))
                .collect::<Vec<_>>()
                .join(", ")
        };
        match self {
            Statement::Update {
                column,
                formula,
                condition,
            } => {
                write!(f, "UPDATE {} = {}", quote_identifier(column), formula.script_text())?;
                if let Some(c) = condition {
                    write!(f, " WHERE {}", c.script_text())?;
                }
                Ok(())
            }
            Statement::UpdateRegion { region, formula } => {
                write!(f, "UPDATE [{}", region.spec)?;
                if let Some(p) = &region.predicate {
                    write!(f, " WHERE {}", p.script_text())?;
                }
                write!(f, "] = {}", formula.script_text())
            }
            Statement::AddColumn {
                name,
                formula,
                at: pos,
            } => {
                write!(f, "ADD COLUMN {}", quote_identifier(name))?;
                if let Some(x) = formula {
                    write!(f, " AS {}", x.script_text())?;
                }
                at(f, pos)
            }
            Statement::RemoveColumn { name } => write!(f, "REMOVE COLUMN {}", quote_identifier(name)),
            Statement::InsertRow {
                assignments,
                at: pos,
            } => {
                let body = assignments
                    .iter()
                    .map(|(c, x)| format!("{} = {}", quote_identifier(c), x.script_text()))
                    .collect::<Vec<_>>()
                    .join(", ");
                write!(f, "INSERT ROW ({body})")?;
                at(f, pos)
            }
            Statement::Delete { condition } => write!(f, "DELETE WHERE {}", condition.script_text()),
            Statement::ReorderColumns { names: ns } => write!(f, "REORDER COLUMNS ({})", names(ns)),
            Statement::ReorderRows { rows } => {
                let ids: Vec<String> = rows.iter().map(|r| r.to_string()).collect();
                write!(f, "REORDER ROWS ({})", ids.join(", "))
            }
            Statement::Sort { keys } => {
                let ks: Vec<String> = keys
                    .iter()
                    .map(|k| {
                        let dir = if k.descending { " DESC" } else { "" };
                        format!("{}{dir}", quote_identifier(&k.column))
                    })
                    .collect();
                write!(f, "SORT ROWS {}", ks.join(", "))
            }
            Statement::Move { from, to, dest } => {
                write!(f, "MOVE {}:{} TO {}", from.a1(), to.a1(), dest.a1())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Source {
    File { path: String, header: bool, infer: bool },
    /// The output of another page in the same notebook branch.
    Page { name: String },
}

impl Source {
    pub fn file(path: &str) -> Self {
        Source::File {
            path: path.to_string(),
            header: true,
            infer: true,
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let q = |s: &str| format!("'{}'", s.replace('\'', "''"));
        match self {
            Source::File {
                path,
                header,
                infer,
            } => {
                write!(f, "LOAD {}", q(path))?;
                if !*header || !*infer {
                    let b = |x: bool| if x { "TRUE" } else { "FALSE" };
                    write!(f, " WITH (HEADER = {}, INFER = {})", b(*header), b(*infer))?;
                }
                Ok(())
            }
            Source::Page { name } => write!(f, "LOAD PAGE {}", q(name)),
        }
    }
}

/// Statements serialize as their script text.
impl Serialize for Statement {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Statement {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        parse_statement(&text).map_err(serde::de::Error::custom)
    }
}

/// A statement with its gesture-group tag. The statement index is its
/// position in the script.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Step {
    #[serde(rename = "statement")]
    pub stmt: Statement,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<GroupId>,
}

impl Step {
    pub fn new(stmt: Statement) -> Self {
        Step { stmt, group: None }
    }

    pub fn grouped(stmt: Statement, group: GroupId) -> Self {
        Step {
            stmt,
            group: Some(group),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Script {
    pub source: Source,
    pub steps: Vec<Step>,
}

impl Script {
    pub fn new(source: Source) -> Self {
        Script {
            source,
            steps: Vec::new(),
        }
    }

    pub fn push(&mut self, stmt: Statement) {
        self.steps.push(Step::new(stmt));
    }

    pub fn statements(&self) -> impl Iterator<Item = &Statement> {
        self.steps.iter().map(|s| &s.stmt)
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// SHA-256 of the canonical text.
    pub fn content_hash(&self) -> String {
        use sha2::{Digest, Sha256};
        hex::encode(Sha256::digest(render_script(self).as_bytes()))
    }

    /// Total AST size of all statements.
    pub fn size(&self) -> usize {
        self.statements().map(Statement::size).sum()
    }
}

/// Canonical text, one statement per line.
pub fn render_script(s: &Script) -> String {
    let mut out = format!("{};\n", s.source);
    for step in &s.steps {
        out.push_str(&format!("{};", step.stmt));
        if let Some(g) = step.group {
            out.push_str(&format!(" -- group {g}"));
        }
        out.push('\n');
    }
    out
}

impl fmt::Display for Script {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render_script(self))
    }
}
