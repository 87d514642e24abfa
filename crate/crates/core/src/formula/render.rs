//! Formula rendering with minimal parentheses.

use thiserror::Error;

use super::{AggArg, Axis, CellRef, Expr, Formula, UnOp};
use crate::lex::{tokenize, Tok};
use crate::model::{column_letters, CellId, CoordinateSystem, Pos};
use crate::value::{format_float, Value};

/// Words that are never bare column names.
pub(crate) const KEYWORDS: &[&str] = &[
    "AND", "OR", "NOT", "IF", "TRUE", "FALSE", "NULL", "ROWID", "VALUE", "BETWEEN", "IN", "CAST",
    "AS", "SUM", "AVG", "AVERAGE", "MIN", "MAX", "COUNT", "UPDATE", "SET", "WHERE", "ADD",
    "COLUMN", "COLUMNS", "REMOVE", "INSERT", "ROW", "ROWS", "DELETE", "REORDER", "SORT", "ASC",
    "DESC", "LOAD", "PAGE", "WITH", "AT", "MOVE", "TO", "HEADER", "INFER",
];

pub(crate) fn is_keyword(s: &str) -> bool {
    KEYWORDS.iter().any(|k| k.eq_ignore_ascii_case(s))
}

/// True when `name` lexes as a single plain identifier that is not a keyword.
pub fn is_bare_identifier(name: &str) -> bool {
    if is_keyword(name) {
        return false;
    }
    match tokenize(name, true) {
        Ok(t) => t.len() == 2 && t[0].tok == Tok::Ident(name.to_string()),
        Err(_) => false,
    }
}

/// Column name as written in formulas and scripts.
pub fn quote_identifier(name: &str) -> String {
    if is_bare_identifier(name) {
        name.to_string()
    } else {
        format!("\"{}\"", name.replace('"', "\"\""))
    }
}

pub(crate) fn quote_string(s: &str) -> String {
    format!("'{}'", s.replace('\'', "''"))
}

pub(crate) fn literal_text(v: &Value) -> String {
    match v {
        Value::Null => "NULL".into(),
        Value::Int(i) => i.to_string(),
        Value::Float(x) => format_float(*x),
        Value::String(s) => quote_string(s),
        Value::Bool(true) => "TRUE".into(),
        Value::Bool(false) => "FALSE".into(),
        Value::Error(k) => k.literal().into(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RenderError {
    #[error("UNRESOLVED_REF: cell @{0} has no position")]
    UnresolvedRef(CellId),
}

fn axis_r1c1(prefix: char, a: Axis) -> String {
    match a {
        Axis::Abs(i) => format!("{prefix}{}", i + 1),
        Axis::Rel(d) => format!("{prefix}[{d}]"),
    }
}

fn coord_text(col: Axis, row: Axis, host: Option<Pos>) -> String {
    let resolved = match (col, row) {
        (Axis::Abs(c), Axis::Abs(r)) => Some((c, r)),
        _ => host.and_then(|h| Some((col.resolve(h.col)?, row.resolve(h.row)?))),
    };
    match resolved {
        Some((c, r)) => format!(
            "{}{}{}{}",
            if matches!(col, Axis::Abs(_)) { "$" } else { "" },
            column_letters(c),
            if matches!(row, Axis::Abs(_)) { "$" } else { "" },
            r + 1
        ),
        None => format!("{}{}", axis_r1c1('R', row), axis_r1c1('C', col)),
    }
}

type RefFn<'a> = dyn Fn(&CellRef) -> Result<String, RenderError> + 'a;

fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Binary(op, ..) => op.precedence(),
        Expr::Unary(UnOp::Not, _) => 3,
        Expr::Between(..) | Expr::In(..) => 4,
        Expr::Unary(UnOp::Neg, _) => 8,
        _ => 9,
    }
}

fn child(e: &Expr, min: u8, r: &RefFn, sp: bool) -> Result<String, RenderError> {
    let s = render(e, r, sp)?;
    Ok(if prec(e) < min { format!("({s})") } else { s })
}

fn list(items: &[Expr], r: &RefFn, sp: bool) -> Result<String, RenderError> {
    Ok(items
        .iter()
        .map(|e| render(e, r, sp))
        .collect::<Result<Vec<_>, _>>()?
        .join(", "))
}

/// `sp` puts spaces around symbolic binary operators.
fn render(e: &Expr, r: &RefFn, sp: bool) -> Result<String, RenderError> {
    Ok(match e {
        Expr::Lit(v) => literal_text(v),
        Expr::Ref(c) => r(c)?,
        Expr::Column(n) => quote_identifier(n),
        Expr::RowId => "ROWID".into(),
        Expr::Prior => "VALUE".into(),
        Expr::Unary(UnOp::Not, x) => format!("NOT {}", child(x, 3, r, sp)?),
        Expr::Unary(UnOp::Neg, x) => {
            let s = child(x, 8, r, sp)?;
            let numeric = matches!(**x, Expr::Lit(Value::Int(_) | Value::Float(_)));
            if numeric || s.starts_with('-') {
                format!("-({s})")
            } else {
                format!("-{s}")
            }
        }
        Expr::Binary(op, a, b) => {
            let p = op.precedence();
            let l = child(a, p, r, sp)?;
            let mut rt = child(b, p + 1, r, sp)?;
            if rt.starts_with('-') {
                rt = format!("({rt})");
            }
            if op.is_keyword() || sp {
                format!("{l} {} {rt}", op.symbol())
            } else {
                format!("{l}{}{rt}", op.symbol())
            }
        }
        Expr::If(c, t, f) => format!("IF({}, {}, {})", render(c, r, sp)?, render(t, r, sp)?, render(f, r, sp)?),
        Expr::Agg(func, args) => {
            let parts = args
                .iter()
                .map(|a| match a {
                    AggArg::Range(x, y) => Ok(format!("{}:{}", r(x)?, r(y)?)),
                    AggArg::Expr(e) => render(e, r, sp),
                })
                .collect::<Result<Vec<_>, _>>()?;
            format!("{}({})", func.name(), parts.join(", "))
        }
        Expr::Cast(x, ty) => format!("CAST({} AS {})", render(x, r, sp)?, ty.keyword()),
        Expr::Between(x, lo, hi) => format!(
            "{} BETWEEN {} AND {}",
            child(x, 4, r, sp)?,
            child(lo, 5, r, sp)?,
            child(hi, 5, r, sp)?
        ),
        Expr::In(x, items) => format!("{} IN ({})", child(x, 4, r, sp)?, list(items, r, sp)?),
    })
}

/// Canonical text: explicit refs stay `@id`; coordinate refs use A1 when a
/// host is given and the target is on the sheet's index space, else R1C1.
pub(crate) fn canonical(e: &Expr, host: Option<Pos>, sp: bool) -> String {
    let r = move |c: &CellRef| -> Result<String, RenderError> {
        Ok(match c {
            CellRef::Explicit(id) => format!("@{id}"),
            CellRef::Dangling => "#REF!".into(),
            CellRef::Coord { col, row } => coord_text(*col, *row, host),
        })
    };
    render(e, &r, sp).expect("canonical rendering is total")
}

/// Display text for the formula bar of the cell at `host`: explicit refs
/// are shown as A1 references at their current position.
pub fn render_formula(
    f: &Formula,
    host: Pos,
    coords: &CoordinateSystem,
) -> Result<String, RenderError> {
    let r = move |c: &CellRef| -> Result<String, RenderError> {
        Ok(match c {
            CellRef::Explicit(id) => {
                let p = coords.position_of(*id).ok_or(RenderError::UnresolvedRef(*id))?;
                p.a1()
            }
            CellRef::Dangling => "#REF!".into(),
            CellRef::Coord { col, row } => coord_text(*col, *row, Some(host)),
        })
    };
    Ok(format!("={}", render(f.expr(), &r, false)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::parse_formula_text;
    use crate::value::BinOp;

    fn rt(s: &str, host: Option<Pos>) -> String {
        parse_formula_text(s, host).unwrap().to_text(host)
    }

    #[test]
    fn minimal_parentheses() {
        let h = Some(Pos::new(1, 3));
        assert_eq!(rt("=(B4)+(C2)", h), "B4+C2");
        assert_eq!(rt("(1+2)*3", None), "(1+2)*3");
        assert_eq!(rt("1-(2-3)", None), "1-(2-3)");
        assert_eq!(rt("(1-2)-3", None), "1-2-3");
        assert_eq!(rt("NOT (a AND b)", None), "NOT (a AND b)");
        assert_eq!(rt("(NOT a) AND b", None), "NOT a AND b");
        assert_eq!(rt("-(a+1)", None), "-(a+1)");
        assert_eq!(rt("1-(-2)", None), "1-(-2)");
        assert_eq!(rt("-(-a)", None), "-(-a)");
        assert_eq!(rt("-(5)", None), "-(5)");
        assert_eq!(rt("(a = 1) = TRUE", None), "a=1=TRUE");
        assert_eq!(rt("a = (1 = TRUE)", None), "a=(1=TRUE)");
        assert_eq!(rt("(a & b) BETWEEN 1 AND (2 & 3)", None), "a&b BETWEEN 1 AND 2&3");
    }

    #[test]
    fn host_free_text_uses_r1c1() {
        let h = Pos::new(1, 3);
        let f = parse_formula_text("B4+C2+$A1+SUM(B1:B3)", Some(h)).unwrap();
        assert_eq!(f.rnf(), "R[0]C[0]+R[-2]C[1]+R[-3]C1+SUM(R[-3]C[0]:R[-1]C[0])");
        assert_eq!(f.to_text(Some(h)), "B4+C2+$A1+SUM(B1:B3)");
        // Off-sheet targets fall back to R1C1 even with a host.
        let g = parse_formula_text("R[-9]C[0]", None).unwrap();
        assert_eq!(g.to_text(Some(h)), "R[-9]C[0]");
    }

    #[test]
    fn identifiers_are_quoted_when_needed() {
        assert_eq!(quote_identifier("price"), "price");
        assert_eq!(quote_identifier("B2"), "\"B2\"");
        assert_eq!(quote_identifier("value"), "\"value\"");
        assert_eq!(quote_identifier("unit price"), "\"unit price\"");
        assert_eq!(quote_identifier("a\"b"), "\"a\"\"b\"");
        assert_eq!(quote_identifier(""), "\"\"");
        let e = Expr::bin(BinOp::Add, Expr::col("Q1"), Expr::Lit(Value::Float(1.0)));
        assert_eq!(Formula::new(e).rnf(), "\"Q1\"+1.0");
    }

    #[test]
    fn display_resolves_explicit_refs() {
        let mut s = crate::model::new_sheet(&["a", "b"]).unwrap();
        s.push_row(vec![Value::Int(1), Value::Int(2)]);
        let id = s.coords().cell_at(Pos::new(1, 0)).unwrap();
        let f = Formula::new(Expr::Ref(CellRef::Explicit(id)));
        assert_eq!(render_formula(&f, Pos::new(0, 0), s.coords()).unwrap(), "=B1");
        let g = Formula::new(Expr::Ref(CellRef::Explicit(CellId(999))));
        assert_eq!(
            render_formula(&g, Pos::new(0, 0), s.coords()),
            Err(RenderError::UnresolvedRef(CellId(999)))
        );
    }
}
