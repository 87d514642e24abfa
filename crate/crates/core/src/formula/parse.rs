//! Recursive-descent formula parser.
//!
//! Precedence, loosest first: OR, AND, NOT, comparisons / BETWEEN / IN, `&`,
//! `+ -`, `* /`, unary minus. A minus sign directly applied to a numeric
//! literal folds into a negative literal.

use thiserror::Error;

use super::{AggArg, Axis, CellRef, Expr, Formula, UnOp};
use crate::lex::{tokenize, LexError, Tok, Token};
use crate::model::{CellId, Pos};
use crate::value::{AggFn, BinOp, CastType, ErrorKind, Value};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormulaError {
    #[error("line {line}, column {col}: {message}")]
    Syntax {
        offset: usize,
        line: usize,
        col: usize,
        message: String,
    },
    #[error("line {line}, column {col}: A1 reference {text} needs a host cell")]
    MissingHost {
        offset: usize,
        line: usize,
        col: usize,
        text: String,
    },
}

impl From<LexError> for FormulaError {
    fn from(e: LexError) -> Self {
        FormulaError::Syntax {
            offset: e.offset,
            line: e.line,
            col: e.col,
            message: e.message,
        }
    }
}

/// Token cursor shared with the script parser.
pub(crate) struct Cursor {
    toks: Vec<Token>,
    pos: usize,
}

impl Cursor {
    pub(crate) fn new(toks: Vec<Token>) -> Self {
        Cursor { toks, pos: 0 }
    }

    pub(crate) fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    pub(crate) fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.pos + k).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    pub(crate) fn token(&self) -> &Token {
        &self.toks[self.pos]
    }

    pub(crate) fn next(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    pub(crate) fn at_eof(&self) -> bool {
        matches!(self.peek(), Tok::Eof)
    }

    pub(crate) fn error(&self, message: impl Into<String>) -> FormulaError {
        let t = self.token();
        FormulaError::Syntax {
            offset: t.offset,
            line: t.line,
            col: t.col,
            message: message.into(),
        }
    }

    pub(crate) fn is_op(&self, op: &str) -> bool {
        matches!(self.peek(), Tok::Op(o) if *o == op)
    }

    pub(crate) fn eat_op(&mut self, op: &str) -> bool {
        if self.is_op(op) {
            self.next();
            true
        } else {
            false
        }
    }

    pub(crate) fn expect_op(&mut self, op: &str) -> Result<(), FormulaError> {
        if self.eat_op(op) {
            Ok(())
        } else {
            Err(self.error(format!("expected '{op}'")))
        }
    }

    pub(crate) fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s.eq_ignore_ascii_case(kw))
    }

    pub(crate) fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.next();
            true
        } else {
            false
        }
    }

    pub(crate) fn expect_kw(&mut self, kw: &str) -> Result<(), FormulaError> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            Err(self.error(format!("expected {kw}")))
        }
    }
}

/// Parse formula text; a leading `=` is optional. A1 references with a
/// relative axis need `host`.
pub fn parse_formula_text(text: &str, host: Option<Pos>) -> Result<Formula, FormulaError> {
    let body = text.trim_start();
    let body = body.strip_prefix('=').unwrap_or(body);
    let skipped = text.len() - body.len();
    let mut toks = tokenize(body, false)?;
    for t in &mut toks {
        t.offset += skipped;
    }
    let mut cur = Cursor::new(toks);
    let e = parse_expr(&mut cur, host)?;
    if !cur.at_eof() {
        return Err(cur.error("unexpected trailing input"));
    }
    Ok(Formula::new(e))
}

/// Parse formula text typed into the cell at `host`.
pub fn parse_formula(text: &str, host: Pos) -> Result<Formula, FormulaError> {
    parse_formula_text(text, Some(host))
}

pub(crate) fn parse_expr(cur: &mut Cursor, host: Option<Pos>) -> Result<Expr, FormulaError> {
    Parser { cur, host }.or()
}

struct Parser<'a> {
    cur: &'a mut Cursor,
    host: Option<Pos>,
}

fn cmp_op(t: &Tok) -> Option<BinOp> {
    match t {
        Tok::Op("=") => Some(BinOp::Eq),
        Tok::Op("<>") => Some(BinOp::Ne),
        Tok::Op("<") => Some(BinOp::Lt),
        Tok::Op("<=") => Some(BinOp::Le),
        Tok::Op(">") => Some(BinOp::Gt),
        Tok::Op(">=") => Some(BinOp::Ge),
        _ => None,
    }
}

fn number(text: &str, negative: bool) -> Option<Value> {
    let s = if negative {
        format!("-{text}")
    } else {
        text.to_string()
    };
    if !text.contains(['.', 'e', 'E']) {
        if let Ok(i) = s.parse::<i64>() {
            return Some(Value::Int(i));
        }
    }
    s.parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .map(Value::Float)
}

impl Parser<'_> {
    fn or(&mut self) -> Result<Expr, FormulaError> {
        let mut lhs = self.and()?;
        while self.cur.eat_kw("OR") {
            let rhs = self.and()?;
            lhs = Expr::bin(BinOp::Or, lhs, rhs);
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Expr, FormulaError> {
        let mut lhs = self.not()?;
        while self.cur.eat_kw("AND") {
            let rhs = self.not()?;
            lhs = Expr::bin(BinOp::And, lhs, rhs);
        }
        Ok(lhs)
    }

    fn not(&mut self) -> Result<Expr, FormulaError> {
        if self.cur.eat_kw("NOT") {
            let e = self.not()?;
            return Ok(Expr::Unary(UnOp::Not, Box::new(e)));
        }
        self.cmp()
    }

    fn cmp(&mut self) -> Result<Expr, FormulaError> {
        let mut lhs = self.concat()?;
        loop {
            if let Some(op) = cmp_op(self.cur.peek()) {
                self.cur.next();
                let rhs = self.concat()?;
                lhs = Expr::bin(op, lhs, rhs);
            } else if self.cur.eat_kw("BETWEEN") {
                let lo = self.concat()?;
                self.cur.expect_kw("AND")?;
                let hi = self.concat()?;
                lhs = Expr::Between(Box::new(lhs), Box::new(lo), Box::new(hi));
            } else if self.cur.is_kw("IN") {
                self.cur.next();
                self.cur.expect_op("(")?;
                let mut list = vec![self.or()?];
                while self.cur.eat_op(",") {
                    list.push(self.or()?);
                }
                self.cur.expect_op(")")?;
                lhs = Expr::In(Box::new(lhs), list);
            } else {
                return Ok(lhs);
            }
        }
    }

    fn concat(&mut self) -> Result<Expr, FormulaError> {
        let mut lhs = self.add()?;
        while self.cur.eat_op("&") {
            let rhs = self.add()?;
            lhs = Expr::bin(BinOp::Concat, lhs, rhs);
        }
        Ok(lhs)
    }

    fn add(&mut self) -> Result<Expr, FormulaError> {
        let mut lhs = self.mul()?;
        loop {
            let op = match self.cur.peek() {
                Tok::Op("+") => BinOp::Add,
                Tok::Op("-") => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.cur.next();
            let rhs = self.mul()?;
            lhs = Expr::bin(op, lhs, rhs);
        }
    }

    fn mul(&mut self) -> Result<Expr, FormulaError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.cur.peek() {
                Tok::Op("*") => BinOp::Mul,
                Tok::Op("/") => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.cur.next();
            let rhs = self.unary()?;
            lhs = Expr::bin(op, lhs, rhs);
        }
    }

    fn unary(&mut self) -> Result<Expr, FormulaError> {
        if self.cur.eat_op("-") {
            if let Tok::Number(n) = self.cur.peek().clone() {
                let v = number(&n, true).ok_or_else(|| self.cur.error("number out of range"))?;
                self.cur.next();
                return Ok(Expr::Lit(v));
            }
            let e = self.unary()?;
            return Ok(Expr::Unary(UnOp::Neg, Box::new(e)));
        }
        self.primary()
    }

    fn cell_ref(&mut self) -> Result<Option<CellRef>, FormulaError> {
        let r = match self.cur.peek().clone() {
            Tok::A1 {
                col,
                col_abs,
                row,
                row_abs,
            } => {
                let axis = |abs: bool, idx: usize, h: Option<usize>| -> Option<Axis> {
                    if abs {
                        Some(Axis::Abs(idx))
                    } else {
                        h.map(|h| Axis::Rel(idx as i64 - h as i64))
                    }
                };
                let c = axis(col_abs, col, self.host.map(|h| h.col));
                let r = axis(row_abs, row, self.host.map(|h| h.row));
                match (c, r) {
                    (Some(col), Some(row)) => CellRef::Coord { col, row },
                    _ => {
                        let t = self.cur.token();
                        return Err(FormulaError::MissingHost {
                            offset: t.offset,
                            line: t.line,
                            col: t.col,
                            text: format!(
                                "{}{}{}{}",
                                if col_abs { "$" } else { "" },
                                crate::model::column_letters(col),
                                if row_abs { "$" } else { "" },
                                row + 1
                            ),
                        });
                    }
                }
            }
            Tok::R1C1 { row, col } => CellRef::Coord { col, row },
            Tok::Explicit(id) => CellRef::Explicit(CellId(id)),
            Tok::ErrorLit(ErrorKind::RefDangling) => CellRef::Dangling,
            _ => return Ok(None),
        };
        self.cur.next();
        Ok(Some(r))
    }

    fn agg_arg(&mut self) -> Result<AggArg, FormulaError> {
        let is_ref = matches!(
            self.cur.peek(),
            Tok::A1 { .. } | Tok::R1C1 { .. } | Tok::Explicit(_) | Tok::ErrorLit(ErrorKind::RefDangling)
        );
        if is_ref && matches!(self.cur.peek_at(1), Tok::Op(":")) {
            let a = self.cell_ref()?.expect("checked");
            self.cur.next();
            let b = self
                .cell_ref()?
                .ok_or_else(|| self.cur.error("expected a cell reference after ':'"))?;
            return Ok(AggArg::Range(a, b));
        }
        Ok(AggArg::Expr(self.or()?))
    }

    fn primary(&mut self) -> Result<Expr, FormulaError> {
        if let Some(r) = self.cell_ref()? {
            return Ok(Expr::Ref(r));
        }
        match self.cur.peek().clone() {
            Tok::Number(n) => {
                let v = number(&n, false).ok_or_else(|| self.cur.error("number out of range"))?;
                self.cur.next();
                Ok(Expr::Lit(v))
            }
            Tok::Str(s) => {
                self.cur.next();
                Ok(Expr::Lit(Value::String(s)))
            }
            Tok::ErrorLit(k) => {
                self.cur.next();
                Ok(Expr::Lit(Value::Error(k)))
            }
            Tok::QuotedIdent(s) => {
                self.cur.next();
                Ok(Expr::Column(s))
            }
            Tok::Op("(") => {
                self.cur.next();
                let e = self.or()?;
                self.cur.expect_op(")")?;
                Ok(e)
            }
            Tok::Ident(s) => self.word(&s),
            Tok::Eof => Err(self.cur.error("unexpected end of formula")),
            t => Err(self.cur.error(format!("unexpected {}", describe(&t)))),
        }
    }

    fn word(&mut self, s: &str) -> Result<Expr, FormulaError> {
        let upper = s.to_ascii_uppercase();
        let call = matches!(self.cur.peek_at(1), Tok::Op("("));
        let lit = match upper.as_str() {
            "TRUE" => Some(Expr::Lit(Value::Bool(true))),
            "FALSE" => Some(Expr::Lit(Value::Bool(false))),
            "NULL" => Some(Expr::Lit(Value::Null)),
            "ROWID" => Some(Expr::RowId),
            "VALUE" => Some(Expr::Prior),
            _ => None,
        };
        if let Some(e) = lit {
            self.cur.next();
            return Ok(e);
        }
        if upper == "IF" && call {
            self.cur.next();
            self.cur.next();
            let c = self.or()?;
            self.cur.expect_op(",")?;
            let t = self.or()?;
            self.cur.expect_op(",")?;
            let e = self.or()?;
            self.cur.expect_op(")")?;
            return Ok(Expr::if_(c, t, e));
        }
        if upper == "CAST" && call {
            self.cur.next();
            self.cur.next();
            let e = self.or()?;
            self.cur.expect_kw("AS")?;
            let ty = match self.cur.next() {
                Tok::Ident(t) => CastType::from_keyword(&t),
                _ => None,
            }
            .ok_or_else(|| self.cur.error("expected INT, FLOAT, STRING or BOOL"))?;
            self.cur.expect_op(")")?;
            return Ok(Expr::Cast(Box::new(e), ty));
        }
        if let (Some(func), true) = (AggFn::from_name(&upper), call) {
            self.cur.next();
            self.cur.next();
            let mut args = Vec::new();
            if !self.cur.is_op(")") {
                args.push(self.agg_arg()?);
                while self.cur.eat_op(",") {
                    args.push(self.agg_arg()?);
                }
            }
            self.cur.expect_op(")")?;
            return Ok(Expr::Agg(func, args));
        }
        if super::render::is_keyword(s) {
            return Err(self.cur.error(format!("unexpected keyword {upper}")));
        }
        self.cur.next();
        Ok(Expr::Column(s.to_string()))
    }
}

pub(crate) fn describe(t: &Tok) -> String {
    match t {
        Tok::Op(o) => format!("'{o}'"),
        Tok::Eof => "end of input".into(),
        Tok::Number(n) => format!("number {n}"),
        Tok::Str(s) => format!("string '{s}'"),
        Tok::Ident(s) => format!("'{s}'"),
        Tok::QuotedIdent(s) => format!("\"{s}\""),
        Tok::GroupTag(n) => format!("group tag {n}"),
        other => format!("{other:?}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Expr {
        parse_formula_text(s, Some(Pos::new(1, 3))).unwrap().into_expr()
    }

    #[test]
    fn a1_refs_become_offsets() {
        // Host is B4.
        assert_eq!(p("=B4+C2"), Expr::bin(
            BinOp::Add,
            Expr::Ref(CellRef::relative(0, 0)),
            Expr::Ref(CellRef::relative(1, -2)),
        ));
        assert_eq!(
            p("$A$1"),
            Expr::Ref(CellRef::Coord { col: Axis::Abs(0), row: Axis::Abs(0) })
        );
        assert_eq!(
            p("A$1"),
            Expr::Ref(CellRef::Coord { col: Axis::Rel(-1), row: Axis::Abs(0) })
        );
    }

    #[test]
    fn a1_without_host_is_rejected() {
        assert!(matches!(
            parse_formula_text("B2+1", None),
            Err(FormulaError::MissingHost { .. })
        ));
        assert!(parse_formula_text("$B$2+R[0]C[-1]", None).is_ok());
    }

    #[test]
    fn precedence_and_folding() {
        assert_eq!(
            p("1+2*3"),
            Expr::bin(
                BinOp::Add,
                Expr::Lit(Value::Int(1)),
                Expr::bin(BinOp::Mul, Expr::Lit(Value::Int(2)), Expr::Lit(Value::Int(3)))
            )
        );
        assert_eq!(p("-5"), Expr::Lit(Value::Int(-5)));
        assert_eq!(
            p("-(5)"),
            Expr::Unary(UnOp::Neg, Box::new(Expr::Lit(Value::Int(5))))
        );
        assert_eq!(p("2.0"), Expr::Lit(Value::Float(2.0)));
        assert_eq!(p("1e3"), Expr::Lit(Value::Float(1000.0)));
        assert_eq!(
            p("NOT a = 1 AND b"),
            Expr::bin(
                BinOp::And,
                Expr::not_(Expr::bin(BinOp::Eq, Expr::col("a"), Expr::Lit(Value::Int(1)))),
                Expr::col("b")
            )
        );
    }

    #[test]
    fn keywords_and_calls() {
        assert_eq!(
            p("x BETWEEN 1 AND 3 AND y IN (1, 2)"),
            Expr::bin(
                BinOp::And,
                Expr::Between(
                    Box::new(Expr::col("x")),
                    Box::new(Expr::Lit(Value::Int(1))),
                    Box::new(Expr::Lit(Value::Int(3)))
                ),
                Expr::In(
                    Box::new(Expr::col("y")),
                    vec![Expr::Lit(Value::Int(1)), Expr::Lit(Value::Int(2))]
                )
            )
        );
        assert_eq!(
            p("sum(B1:B3, 4)"),
            Expr::Agg(
                AggFn::Sum,
                vec![
                    AggArg::Range(CellRef::relative(0, -3), CellRef::relative(0, -1)),
                    AggArg::Expr(Expr::Lit(Value::Int(4)))
                ]
            )
        );
        assert_eq!(
            p("cast(value as int)"),
            Expr::Cast(Box::new(Expr::Prior), CastType::Int)
        );
        assert_eq!(p("#REF!"), Expr::Ref(CellRef::Dangling));
        assert_eq!(p("#DIV/0!"), Expr::Lit(Value::Error(ErrorKind::DivZero)));
        assert_eq!(p("@12"), Expr::Ref(CellRef::Explicit(CellId(12))));
        assert_eq!(p("\"unit price\""), Expr::col("unit price"));
    }

    #[test]
    fn syntax_errors_carry_positions() {
        match parse_formula_text("1 +\n  )", None) {
            Err(FormulaError::Syntax { line, col, .. }) => assert_eq!((line, col), (2, 3)),
            other => panic!("{other:?}"),
        }
        assert!(parse_formula_text("IF(1, 2)", None).is_err());
        assert!(parse_formula_text("1 2", None).is_err());
        assert!(parse_formula_text("AND", None).is_err());
        assert!(parse_formula_text("1e999", None).is_err());
    }
}
