//! Parser for the emitted SQL dialect.

use super::print::is_sql_keyword;
use super::{FromItem, OrderKey, Query, Select, SelectItem, SqlError, SqlExpr};
use crate::formula::UnOp;
use crate::value::{BinOp, CastType, Value};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Quoted(String),
    Str(String),
    Number(String),
    Sym(&'static str),
    Eof,
}

const SYMBOLS: &[&str] = &[
    "<>", "!=", "<=", ">=", "||", "(", ")", ",", ".", "*", "+", "-", "/", "=", "<", ">", ";",
];

fn lex(src: &str) -> Result<Vec<(Tok, usize)>, SqlError> {
    let b = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    let err = |offset: usize, message: &str| SqlError::Syntax {
        offset,
        message: message.to_string(),
    };
    while i < b.len() {
        let c = b[i];
        if c.is_ascii_whitespace() {
            i += 1;
        } else if src[i..].starts_with("--") {
            while i < b.len() && b[i] != b'\n' {
                i += 1;
            }
        } else if c == b'\'' || c == b'"' {
            let start = i;
            let mut text = String::new();
            i += 1;
            loop {
                let Some(ch) = src[i..].chars().next() else {
                    return Err(err(start, "unterminated quote"));
                };
                i += ch.len_utf8();
                if ch as u32 == c as u32 {
                    if i < b.len() && b[i] == c {
                        text.push(ch);
                        i += 1;
                    } else {
                        break;
                    }
                } else {
                    text.push(ch);
                }
            }
            out.push((if c == b'\'' { Tok::Str(text) } else { Tok::Quoted(text) }, start));
        } else if c.is_ascii_digit() {
            let start = i;
            while i < b.len() && b[i].is_ascii_digit() {
                i += 1;
            }
            if i + 1 < b.len() && b[i] == b'.' && b[i + 1].is_ascii_digit() {
                i += 1;
                while i < b.len() && b[i].is_ascii_digit() {
                    i += 1;
                }
            }
            if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
                let mut j = i + 1;
                if j < b.len() && (b[j] == b'+' || b[j] == b'-') {
                    j += 1;
                }
                if j < b.len() && b[j].is_ascii_digit() {
                    i = j;
                    while i < b.len() && b[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            out.push((Tok::Number(src[start..i].to_string()), start));
        } else if c.is_ascii_alphabetic() || c == b'_' {
            let start = i;
            while i < b.len() && (b[i].is_ascii_alphanumeric() || b[i] == b'_') {
                i += 1;
            }
            out.push((Tok::Ident(src[start..i].to_string()), start));
        } else if let Some(s) = SYMBOLS.iter().find(|s| src[i..].starts_with(**s)) {
            out.push((Tok::Sym(s), i));
            i += s.len();
        } else {
            let ch = src[i..].chars().next().unwrap_or('?');
            return Err(err(i, &format!("unexpected character '{ch}'")));
        }
    }
    out.push((Tok::Eof, src.len()));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T, SqlError> {
        Err(SqlError::Syntax {
            offset: self.offset(),
            message: message.into(),
        })
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s.eq_ignore_ascii_case(kw))
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), SqlError> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            self.error(format!("expected {kw}"))
        }
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(x) if *x == s)
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if self.is_sym(s) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, s: &str) -> Result<(), SqlError> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            self.error(format!("expected '{s}'"))
        }
    }

    fn ident(&mut self) -> Result<String, SqlError> {
        match self.peek().clone() {
            Tok::Ident(s) if !is_sql_keyword(&s) => {
                self.bump();
                Ok(s)
            }
            Tok::Quoted(s) => {
                self.bump();
                Ok(s)
            }
            _ => self.error("expected an identifier"),
        }
    }

    fn query(&mut self) -> Result<Query, SqlError> {
        let mut selects = vec![self.select()?];
        while self.eat_kw("UNION") {
            self.expect_kw("ALL")?;
            selects.push(self.select()?);
        }
        let mut order_by = Vec::new();
        if self.eat_kw("ORDER") {
            self.expect_kw("BY")?;
            order_by = self.order_keys()?;
        }
        Ok(Query { selects, order_by })
    }

    fn order_keys(&mut self) -> Result<Vec<OrderKey>, SqlError> {
        let mut keys = Vec::new();
        loop {
            let expr = self.expr()?;
            let descending = if self.eat_kw("DESC") {
                true
            } else {
                self.eat_kw("ASC");
                false
            };
            keys.push(OrderKey { expr, descending });
            if !self.eat_sym(",") {
                return Ok(keys);
            }
        }
    }

    fn select(&mut self) -> Result<Select, SqlError> {
        self.expect_kw("SELECT")?;
        let mut items = Vec::new();
        loop {
            if self.eat_sym("*") {
                items.push(SelectItem::Star);
            } else {
                let expr = self.expr()?;
                let alias = if self.eat_kw("AS") {
                    Some(self.ident()?)
                } else {
                    None
                };
                items.push(SelectItem::Expr { expr, alias });
            }
            if !self.eat_sym(",") {
                break;
            }
        }
        let from = if self.eat_kw("FROM") {
            if self.eat_sym("(") {
                let query = self.query()?;
                self.expect_sym(")")?;
                self.eat_kw("AS");
                let alias = self.ident()?;
                Some(FromItem::Subquery {
                    query: Box::new(query),
                    alias,
                })
            } else {
                Some(FromItem::Table(self.ident()?))
            }
        } else {
            None
        };
        let filter = if self.eat_kw("WHERE") {
            Some(self.expr()?)
        } else {
            None
        };
        Ok(Select {
            items,
            from,
            filter,
        })
    }

    fn expr(&mut self) -> Result<SqlExpr, SqlError> {
        self.or()
    }

    fn or(&mut self) -> Result<SqlExpr, SqlError> {
        let mut e = self.and()?;
        while self.eat_kw("OR") {
            e = SqlExpr::bin(BinOp::Or, e, self.and()?);
        }
        Ok(e)
    }

    fn and(&mut self) -> Result<SqlExpr, SqlError> {
        let mut e = self.not()?;
        while self.eat_kw("AND") {
            e = SqlExpr::bin(BinOp::And, e, self.not()?);
        }
        Ok(e)
    }

    fn not(&mut self) -> Result<SqlExpr, SqlError> {
        if self.eat_kw("NOT") {
            Ok(SqlExpr::Unary(UnOp::Not, Box::new(self.not()?)))
        } else {
            self.comparison()
        }
    }

    fn comparison_op(&self) -> Option<BinOp> {
        let Tok::Sym(s) = self.peek() else {
            return None;
        };
        Some(match *s {
            "=" => BinOp::Eq,
            "<>" | "!=" => BinOp::Ne,
            "<" => BinOp::Lt,
            "<=" => BinOp::Le,
            ">" => BinOp::Gt,
            ">=" => BinOp::Ge,
            _ => return None,
        })
    }

    fn comparison(&mut self) -> Result<SqlExpr, SqlError> {
        let mut e = self.concat()?;
        loop {
            if let Some(op) = self.comparison_op() {
                self.bump();
                e = SqlExpr::bin(op, e, self.concat()?);
            } else if self.eat_kw("IS") {
                let negated = self.eat_kw("NOT");
                self.expect_kw("TRUE")?;
                e = SqlExpr::IsTrue {
                    expr: Box::new(e),
                    negated,
                };
            } else if self.eat_kw("BETWEEN") {
                let lo = self.concat()?;
                self.expect_kw("AND")?;
                let hi = self.concat()?;
                e = SqlExpr::Between(Box::new(e), Box::new(lo), Box::new(hi));
            } else if self.eat_kw("IN") {
                self.expect_sym("(")?;
                let mut items = vec![self.expr()?];
                while self.eat_sym(",") {
                    items.push(self.expr()?);
                }
                self.expect_sym(")")?;
                e = SqlExpr::In(Box::new(e), items);
            } else {
                return Ok(e);
            }
        }
    }

    fn concat(&mut self) -> Result<SqlExpr, SqlError> {
        let mut e = self.additive()?;
        while self.eat_sym("||") {
            e = SqlExpr::bin(BinOp::Concat, e, self.additive()?);
        }
        Ok(e)
    }

    fn additive(&mut self) -> Result<SqlExpr, SqlError> {
        let mut e = self.term()?;
        loop {
            let op = if self.eat_sym("+") {
                BinOp::Add
            } else if self.eat_sym("-") {
                BinOp::Sub
            } else {
                return Ok(e);
            };
            e = SqlExpr::bin(op, e, self.term()?);
        }
    }

    fn term(&mut self) -> Result<SqlExpr, SqlError> {
        let mut e = self.unary()?;
        loop {
            let op = if self.eat_sym("*") {
                BinOp::Mul
            } else if self.eat_sym("/") {
                BinOp::Div
            } else {
                return Ok(e);
            };
            e = SqlExpr::bin(op, e, self.unary()?);
        }
    }

    fn unary(&mut self) -> Result<SqlExpr, SqlError> {
        if self.eat_sym("-") {
            if let Tok::Number(n) = self.peek().clone() {
                self.bump();
                return self.number(&n, true);
            }
            return Ok(SqlExpr::Unary(UnOp::Neg, Box::new(self.unary()?)));
        }
        self.primary()
    }

    fn number(&self, text: &str, negative: bool) -> Result<SqlExpr, SqlError> {
        if text.bytes().all(|b| b.is_ascii_digit()) {
            if let Ok(i) = text.parse::<i128>() {
                let i = if negative { -i } else { i };
                if let Ok(i) = i64::try_from(i) {
                    return Ok(SqlExpr::Lit(Value::Int(i)));
                }
            }
        }
        match text.parse::<f64>() {
            Ok(x) if x.is_finite() => Ok(SqlExpr::Lit(Value::Float(if negative { -x } else { x }))),
            _ => self.error(format!("number '{text}' out of range")),
        }
    }

    fn primary(&mut self) -> Result<SqlExpr, SqlError> {
        match self.peek().clone() {
            Tok::Number(n) => {
                self.bump();
                self.number(&n, false)
            }
            Tok::Str(s) => {
                self.bump();
                Ok(SqlExpr::Lit(Value::String(s)))
            }
            Tok::Sym("(") => {
                self.bump();
                if self.is_kw("SELECT") {
                    self.bump();
                    self.expect_kw("COUNT")?;
                    self.expect_sym("(")?;
                    self.expect_sym("*")?;
                    self.expect_sym(")")?;
                    self.expect_kw("FROM")?;
                    let t = self.ident()?;
                    self.expect_sym(")")?;
                    return Ok(SqlExpr::CountRows(t));
                }
                let e = self.expr()?;
                self.expect_sym(")")?;
                Ok(e)
            }
            Tok::Ident(w) if is_sql_keyword(&w) => self.keyword_expr(&w.to_ascii_uppercase()),
            Tok::Ident(_) | Tok::Quoted(_) => {
                let first = self.ident()?;
                if self.is_sym(".") && !matches!(self.peek_at(1), Tok::Sym(_)) {
                    self.bump();
                    let name = self.ident()?;
                    return Ok(SqlExpr::Column {
                        table: Some(first),
                        name,
                    });
                }
                Ok(SqlExpr::Column {
                    table: None,
                    name: first,
                })
            }
            Tok::Eof => self.error("unexpected end of query"),
            t => self.error(format!("unexpected {t:?}")),
        }
    }

    fn keyword_expr(&mut self, kw: &str) -> Result<SqlExpr, SqlError> {
        match kw {
            "TRUE" | "FALSE" | "NULL" => {
                self.bump();
                Ok(SqlExpr::Lit(match kw {
                    "TRUE" => Value::Bool(true),
                    "FALSE" => Value::Bool(false),
                    _ => Value::Null,
                }))
            }
            "CASE" => {
                self.bump();
                let mut whens = Vec::new();
                while self.eat_kw("WHEN") {
                    let c = self.expr()?;
                    self.expect_kw("THEN")?;
                    whens.push((c, self.expr()?));
                }
                if whens.is_empty() {
                    return self.error("CASE needs at least one WHEN");
                }
                let otherwise = if self.eat_kw("ELSE") {
                    self.expr()?
                } else {
                    SqlExpr::Lit(Value::Null)
                };
                self.expect_kw("END")?;
                Ok(SqlExpr::Case {
                    whens,
                    otherwise: Box::new(otherwise),
                })
            }
            "CAST" => {
                self.bump();
                self.expect_sym("(")?;
                let e = self.expr()?;
                self.expect_kw("AS")?;
                let ty = match self.bump() {
                    Tok::Ident(t) => CastType::from_keyword(&t),
                    _ => None,
                };
                let Some(ty) = ty else {
                    return self.error("expected a type name");
                };
                self.expect_sym(")")?;
                Ok(SqlExpr::Cast(Box::new(e), ty))
            }
            "SUM" => {
                self.bump();
                self.expect_sym("(")?;
                let arg = self.expr()?;
                self.expect_sym(")")?;
                self.expect_kw("OVER")?;
                self.expect_sym("(")?;
                self.expect_kw("ORDER")?;
                self.expect_kw("BY")?;
                let order = self.order_keys()?;
                for kw in ["ROWS", "BETWEEN", "UNBOUNDED", "PRECEDING", "AND", "CURRENT", "ROW"] {
                    self.expect_kw(kw)?;
                }
                self.expect_sym(")")?;
                Ok(SqlExpr::RunningSum {
                    arg: Box::new(arg),
                    order,
                })
            }
            _ => self.error(format!("unexpected keyword {kw}")),
        }
    }
}

/// Parse one query; a trailing `;` is allowed.
pub fn parse_query(text: &str) -> Result<Query, SqlError> {
    let mut p = Parser {
        toks: lex(text)?,
        pos: 0,
    };
    let q = p.query()?;
    p.eat_sym(";");
    if *p.peek() != Tok::Eof {
        return p.error("unexpected text after the query");
    }
    Ok(q)
}
