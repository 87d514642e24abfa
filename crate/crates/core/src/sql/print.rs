//! Canonical SQL text with minimal parentheses.

use std::fmt;

use super::{FromItem, OrderKey, Query, Select, SelectItem, SqlExpr};
use crate::formula::render::literal_text;
use crate::formula::UnOp;
use crate::value::{BinOp, Value};

pub(crate) const SQL_KEYWORDS: &[&str] = &[
    "SELECT", "FROM", "WHERE", "AS", "CASE", "WHEN", "THEN", "ELSE", "END", "AND", "OR", "NOT",
    "IS", "TRUE", "FALSE", "NULL", "BETWEEN", "IN", "CAST", "UNION", "ALL", "ORDER", "BY", "ASC",
    "DESC", "COUNT", "SUM", "OVER", "ROWS", "UNBOUNDED", "PRECEDING", "CURRENT", "ROW",
];

pub(crate) fn is_sql_keyword(s: &str) -> bool {
    SQL_KEYWORDS.iter().any(|k| k.eq_ignore_ascii_case(s))
}

pub fn quote_sql_identifier(name: &str) -> String {
    let mut chars = name.chars();
    let bare = chars
        .next()
        .is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
        && !is_sql_keyword(name);
    if bare {
        name.to_string()
    } else {
        format!("\"{}\"", name.replace('"', "\"\""))
    }
}

fn op_symbol(op: BinOp) -> &'static str {
    match op {
        BinOp::Concat => "||",
        op => op.symbol(),
    }
}

fn precedence(e: &SqlExpr) -> u8 {
    match e {
        SqlExpr::Binary(op, ..) => op.precedence(),
        SqlExpr::Unary(UnOp::Not, _) => 3,
        SqlExpr::IsTrue { .. } | SqlExpr::Between(..) | SqlExpr::In(..) => 4,
        SqlExpr::Unary(UnOp::Neg, _) => 8,
        _ => 9,
    }
}

fn child(e: &SqlExpr, min: u8) -> String {
    let t = expr_text(e);
    if precedence(e) < min {
        format!("({t})")
    } else {
        t
    }
}

fn order_text(keys: &[OrderKey]) -> String {
    keys.iter()
        .map(|k| {
            let dir = if k.descending { " DESC" } else { "" };
            format!("{}{dir}", expr_text(&k.expr))
        })
        .collect::<Vec<_>>()
        .join(", ")
}

pub(crate) fn expr_text(e: &SqlExpr) -> String {
    match e {
        SqlExpr::Lit(v) => literal_text(v),
        SqlExpr::Column { table, name } => match table {
            Some(t) => format!("{}.{}", quote_sql_identifier(t), quote_sql_identifier(name)),
            None => quote_sql_identifier(name),
        },
        SqlExpr::Unary(UnOp::Not, x) => format!("NOT {}", child(x, 3)),
        SqlExpr::Unary(UnOp::Neg, x) => {
            if let SqlExpr::Lit(Value::Int(_) | Value::Float(_)) = **x {
                return format!("-({})", expr_text(x));
            }
            let t = child(x, 8);
            if t.starts_with('-') {
                format!("-({t})")
            } else {
                format!("-{t}")
            }
        }
        SqlExpr::Binary(op, a, b) => {
            let p = op.precedence();
            format!("{} {} {}", child(a, p), op_symbol(*op), child(b, p + 1))
        }
        SqlExpr::IsTrue { expr, negated } => {
            let not = if *negated { "NOT " } else { "" };
            format!("{} IS {not}TRUE", child(expr, 5))
        }
        SqlExpr::Case { whens, otherwise } => {
            let mut s = String::from("CASE");
            for (c, t) in whens {
                s.push_str(&format!(" WHEN {} THEN {}", expr_text(c), expr_text(t)));
            }
            s.push_str(&format!(" ELSE {} END", expr_text(otherwise)));
            s
        }
        SqlExpr::Cast(x, ty) => format!("CAST({} AS {})", expr_text(x), ty.keyword()),
        SqlExpr::Between(x, lo, hi) => {
            format!("{} BETWEEN {} AND {}", child(x, 5), child(lo, 5), child(hi, 5))
        }
        SqlExpr::In(x, items) => {
            let list: Vec<String> = items.iter().map(expr_text).collect();
            format!("{} IN ({})", child(x, 5), list.join(", "))
        }
        SqlExpr::CountRows(t) => format!("(SELECT COUNT(*) FROM {})", quote_sql_identifier(t)),
        SqlExpr::RunningSum { arg, order } => format!(
            "SUM({}) OVER (ORDER BY {} ROWS BETWEEN UNBOUNDED PRECEDING AND CURRENT ROW)",
            expr_text(arg),
            order_text(order)
        ),
    }
}

impl fmt::Display for SqlExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&expr_text(self))
    }
}

fn item_text(item: &SelectItem) -> String {
    match item {
        SelectItem::Star => "*".into(),
        SelectItem::Expr { expr, alias } => {
            let t = expr_text(expr);
            match (alias, expr) {
                (None, _) => t,
                (Some(a), SqlExpr::Column { table: None, name }) if a == name => t,
                (Some(a), _) => format!("{t} AS {}", quote_sql_identifier(a)),
            }
        }
    }
}

fn indent(text: &str) -> String {
    text.lines()
        .map(|l| format!("  {l}"))
        .collect::<Vec<_>>()
        .join("\n")
}

fn select_text(s: &Select) -> String {
    let items: Vec<String> = s.items.iter().map(item_text).collect();
    let mut out = format!("SELECT {}", items.join(", "));
    match &s.from {
        Some(FromItem::Table(t)) => out.push_str(&format!("\nFROM {}", quote_sql_identifier(t))),
        Some(FromItem::Subquery { query, alias }) => out.push_str(&format!(
            "\nFROM (\n{}\n) AS {}",
            indent(&query.to_string()),
            quote_sql_identifier(alias)
        )),
        None => {}
    }
    if let Some(c) = &s.filter {
        out.push_str(&format!("\nWHERE {}", expr_text(c)));
    }
    out
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let selects: Vec<String> = self.selects.iter().map(select_text).collect();
        f.write_str(&selects.join("\nUNION ALL\n"))?;
        if !self.order_by.is_empty() {
            write!(f, "\nORDER BY {}", order_text(&self.order_by))?;
        }
        Ok(())
    }
}
