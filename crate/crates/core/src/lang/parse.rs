//! Script parser.

use thiserror::Error;

use super::{RegionSpec, RegionTarget, Script, SortKey, Source, Statement, Step};
use crate::formula::parse::{describe, parse_expr, Cursor};
use crate::formula::{Formula, FormulaError};
use crate::lex::{tokenize, Tok};
use crate::model::{parse_column_letters, Pos, RowId};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LangError {
    #[error("SYNTAX at line {line}, column {col}: {message}")]
    Syntax {
        line: usize,
        col: usize,
        message: String,
    },
    #[error("UNKNOWN_STATEMENT at line {line}, column {col}: {word}")]
    UnknownStatement {
        line: usize,
        col: usize,
        word: String,
    },
}

impl LangError {
    pub fn code(&self) -> &'static str {
        match self {
            LangError::Syntax { .. } => "SYNTAX",
            LangError::UnknownStatement { .. } => "UNKNOWN_STATEMENT",
        }
    }
}

impl From<FormulaError> for LangError {
    fn from(e: FormulaError) -> Self {
        match e {
            FormulaError::Syntax {
                line, col, message, ..
            } => LangError::Syntax { line, col, message },
            FormulaError::MissingHost {
                line, col, text, ..
            } => LangError::Syntax {
                line,
                col,
                message: format!("A1 reference {text} is not allowed in scripts; write it as R1C1"),
            },
        }
    }
}

type Result<T> = std::result::Result<T, LangError>;

fn err(cur: &Cursor, message: impl Into<String>) -> LangError {
    cur.error(message).into()
}

fn name(cur: &mut Cursor) -> Result<String> {
    match cur.peek().clone() {
        Tok::QuotedIdent(s) => {
            cur.next();
            Ok(s)
        }
        Tok::Ident(s) if !crate::formula::render::is_keyword(&s) => {
            cur.next();
            Ok(s)
        }
        Tok::A1 { .. } => Err(err(cur, "column names that look like cell references must be double-quoted")),
        t => Err(err(cur, format!("expected a column name, found {}", describe(&t)))),
    }
}

fn formula(cur: &mut Cursor) -> Result<Formula> {
    Ok(Formula::new(parse_expr(cur, None)?))
}

fn integer(cur: &mut Cursor) -> Result<u64> {
    match cur.peek().clone() {
        Tok::Number(n) => {
            let v = n.parse::<u64>().map_err(|_| err(cur, "expected an integer"))?;
            cur.next();
            Ok(v)
        }
        t => Err(err(cur, format!("expected an integer, found {}", describe(&t)))),
    }
}

fn position(cur: &mut Cursor) -> Result<usize> {
    let n = integer(cur)?;
    if n == 0 {
        return Err(err(cur, "positions start at 1"));
    }
    Ok(n as usize - 1)
}

fn at_clause(cur: &mut Cursor) -> Result<Option<usize>> {
    if cur.eat_kw("AT") {
        Ok(Some(position(cur)?))
    } else {
        Ok(None)
    }
}

fn string(cur: &mut Cursor) -> Result<String> {
    match cur.next() {
        Tok::Str(s) => Ok(s),
        t => Err(err(cur, format!("expected a quoted string, found {}", describe(&t)))),
    }
}

fn cell(cur: &mut Cursor) -> Result<Pos> {
    match cur.peek().clone() {
        Tok::A1 { col, row, .. } => {
            cur.next();
            Ok(Pos::new(col, row))
        }
        t => Err(err(cur, format!("expected a cell like B3, found {}", describe(&t)))),
    }
}

fn region(cur: &mut Cursor) -> Result<RegionSpec> {
    match cur.peek().clone() {
        Tok::Op("*") => {
            cur.next();
            Ok(RegionSpec::All)
        }
        Tok::A1 { .. } => {
            let from = cell(cur)?;
            let to = if cur.eat_op(":") { cell(cur)? } else { from };
            Ok(RegionSpec::Rect { from, to })
        }
        Tok::Ident(a) => {
            let letters = |cur: &Cursor, s: &str| {
                parse_column_letters(s).ok_or_else(|| err(cur, format!("'{s}' is not a column letter")))
            };
            let from = letters(cur, &a)?;
            cur.next();
            cur.expect_op(":")?;
            let b = match cur.next() {
                Tok::Ident(b) => b,
                t => return Err(err(cur, format!("expected column letters, found {}", describe(&t)))),
            };
            let to = letters(cur, &b)?;
            Ok(RegionSpec::Columns { from, to })
        }
        Tok::Number(_) => {
            let from = position(cur)?;
            cur.expect_op(":")?;
            let to = position(cur)?;
            Ok(RegionSpec::Rows { from, to })
        }
        t => Err(err(cur, format!("expected a region, found {}", describe(&t)))),
    }
}

fn boolean(cur: &mut Cursor) -> Result<bool> {
    if cur.eat_kw("TRUE") {
        Ok(true)
    } else if cur.eat_kw("FALSE") {
        Ok(false)
    } else {
        Err(err(cur, "expected TRUE or FALSE"))
    }
}

fn source(cur: &mut Cursor) -> Result<Source> {
    if !cur.is_kw("LOAD") {
        let t = cur.token().clone();
        return Err(LangError::Syntax {
            line: t.line,
            col: t.col,
            message: "a script starts with LOAD".into(),
        });
    }
    cur.next();
    if cur.eat_kw("PAGE") {
        return Ok(Source::Page { name: string(cur)? });
    }
    let path = string(cur)?;
    let (mut header, mut infer) = (true, true);
    if cur.eat_kw("WITH") {
        cur.expect_op("(")?;
        loop {
            if cur.eat_kw("HEADER") {
                cur.expect_op("=")?;
                header = boolean(cur)?;
            } else if cur.eat_kw("INFER") {
                cur.expect_op("=")?;
                infer = boolean(cur)?;
            } else {
                return Err(err(cur, "expected HEADER or INFER"));
            }
            if !cur.eat_op(",") {
                break;
            }
        }
        cur.expect_op(")")?;
    }
    Ok(Source::File {
        path,
        header,
        infer,
    })
}

fn statement(cur: &mut Cursor) -> Result<Statement> {
    let t = cur.token().clone();
    let word = match &t.tok {
        Tok::Ident(w) => w.to_ascii_uppercase(),
        other => return Err(err(cur, format!("expected a statement, found {}", describe(other)))),
    };
    cur.next();
    let stmt = match word.as_str() {
        "UPDATE" => {
            if cur.eat_op("[") {
                let spec = region(cur)?;
                let predicate = if cur.eat_kw("WHERE") {
                    Some(formula(cur)?)
                } else {
                    None
                };
                cur.expect_op("]")?;
                cur.expect_op("=")?;
                Statement::UpdateRegion {
                    region: RegionTarget { spec, predicate },
                    formula: formula(cur)?,
                }
            } else {
                let column = name(cur)?;
                cur.expect_op("=")?;
                let f = formula(cur)?;
                let condition = if cur.eat_kw("WHERE") {
                    Some(formula(cur)?)
                } else {
                    None
                };
                Statement::Update {
                    column,
                    formula: f,
                    condition,
                }
            }
        }
        "ADD" => {
            cur.expect_kw("COLUMN")?;
            let name = name(cur)?;
            let formula = if cur.eat_kw("AS") {
                Some(formula(cur)?)
            } else {
                None
            };
            Statement::AddColumn {
                name,
                formula,
                at: at_clause(cur)?,
            }
        }
        "REMOVE" => {
            cur.expect_kw("COLUMN")?;
            Statement::RemoveColumn { name: name(cur)? }
        }
        "INSERT" => {
            cur.expect_kw("ROW")?;
            cur.expect_op("(")?;
            let mut assignments = Vec::new();
            if !cur.is_op(")") {
                loop {
                    let c = name(cur)?;
                    cur.expect_op("=")?;
                    assignments.push((c, formula(cur)?));
                    if !cur.eat_op(",") {
                        break;
                    }
                }
            }
            cur.expect_op(")")?;
            Statement::InsertRow {
                assignments,
                at: at_clause(cur)?,
            }
        }
        "DELETE" => {
            cur.expect_kw("WHERE")?;
            Statement::Delete {
                condition: formula(cur)?,
            }
        }
        "REORDER" => {
            let rows = if cur.eat_kw("ROWS") {
                true
            } else {
                cur.expect_kw("COLUMNS")?;
                false
            };
            cur.expect_op("(")?;
            let mut names = Vec::new();
            let mut ids = Vec::new();
            if !cur.is_op(")") {
                loop {
                    if rows {
                        ids.push(RowId(integer(cur)?));
                    } else {
                        names.push(name(cur)?);
                    }
                    if !cur.eat_op(",") {
                        break;
                    }
                }
            }
            cur.expect_op(")")?;
            if rows {
                Statement::ReorderRows { rows: ids }
            } else {
                Statement::ReorderColumns { names }
            }
        }
        "SORT" => {
            cur.expect_kw("ROWS")?;
            let mut keys = Vec::new();
            loop {
                let column = name(cur)?;
                let descending = if cur.eat_kw("DESC") {
                    true
                } else {
                    cur.eat_kw("ASC");
                    false
                };
                keys.push(SortKey { column, descending });
                if !cur.eat_op(",") {
                    break;
                }
            }
            Statement::Sort { keys }
        }
        "MOVE" => {
            let from = cell(cur)?;
            cur.expect_op(":")?;
            let to = cell(cur)?;
            cur.expect_kw("TO")?;
            let dest = cell(cur)?;
            Statement::Move { from, to, dest }
        }
        "LOAD" => {
            return Err(LangError::Syntax {
                line: t.line,
                col: t.col,
                message: "LOAD may only appear as the first statement".into(),
            })
        }
        _ => {
            return Err(LangError::UnknownStatement {
                line: t.line,
                col: t.col,
                word: word.clone(),
            })
        }
    };
    Ok(stmt)
}

fn end_of_statement(cur: &mut Cursor) -> Result<()> {
    if cur.eat_op(";") || cur.at_eof() {
        Ok(())
    } else {
        Err(err(cur, format!("expected ';', found {}", describe(cur.peek()))))
    }
}

fn cursor(text: &str) -> Result<Cursor> {
    let toks = tokenize(text, true).map_err(|e| LangError::Syntax {
        line: e.line,
        col: e.col,
        message: e.message,
    })?;
    Ok(Cursor::new(toks))
}

/// Parse a complete script. Keywords are case-insensitive; statements end
/// with `;` and may carry a trailing `-- group N` tag.
pub fn parse_script(text: &str) -> Result<Script> {
    let mut cur = cursor(text)?;
    let source = source(&mut cur)?;
    end_of_statement(&mut cur)?;
    let mut script = Script::new(source);
    while matches!(cur.peek(), Tok::GroupTag(_)) {
        cur.next();
    }
    while !cur.at_eof() {
        if cur.eat_op(";") {
            continue;
        }
        let stmt = statement(&mut cur)?;
        end_of_statement(&mut cur)?;
        let mut step = Step::new(stmt);
        if let Tok::GroupTag(g) = *cur.peek() {
            step.group = Some(g);
            cur.next();
        }
        script.steps.push(step);
    }
    Ok(script)
}

/// Parse one statement (without LOAD); a trailing `;` is optional.
pub fn parse_statement(text: &str) -> Result<Statement> {
    let mut cur = cursor(text)?;
    let stmt = statement(&mut cur)?;
    cur.eat_op(";");
    if let Tok::GroupTag(_) = cur.peek() {
        cur.next();
    }
    if !cur.at_eof() {
        return Err(err(&cur, "unexpected input after statement"));
    }
    Ok(stmt)
}
