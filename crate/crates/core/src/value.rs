//! Primitive cell values and the operator semantics shared by the formula
//! evaluator and the relational interpreter.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Error kinds carried as first-class values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ErrorKind {
    RefDangling,
    Cycle,
    Type,
    DivZero,
    /// Non-finite numeric result (overflow to infinity, NaN).
    Num,
}

impl ErrorKind {
    pub fn code(self) -> &'static str {
        match self {
            ErrorKind::RefDangling => "REF_DANGLING",
            ErrorKind::Cycle => "CYCLE",
            ErrorKind::Type => "TYPE",
            ErrorKind::DivZero => "DIV_ZERO",
            ErrorKind::Num => "NUM",
        }
    }

    /// Spreadsheet-style literal spelling, accepted by the formula parser.
    pub fn literal(self) -> &'static str {
        match self {
            ErrorKind::RefDangling => "#REF!",
            ErrorKind::Cycle => "#CYCLE!",
            ErrorKind::Type => "#VALUE!",
            ErrorKind::DivZero => "#DIV/0!",
            ErrorKind::Num => "#NUM!",
        }
    }

    pub fn from_literal(s: &str) -> Option<Self> {
        [
            ErrorKind::RefDangling,
            ErrorKind::Cycle,
            ErrorKind::Type,
            ErrorKind::DivZero,
            ErrorKind::Num,
        ]
        .into_iter()
        .find(|k| k.literal().eq_ignore_ascii_case(s))
    }

    pub fn from_code(s: &str) -> Option<Self> {
        [
            ErrorKind::RefDangling,
            ErrorKind::Cycle,
            ErrorKind::Type,
            ErrorKind::DivZero,
            ErrorKind::Num,
        ]
        .into_iter()
        .find(|k| k.code().eq_ignore_ascii_case(s))
    }
}

/// Target type of a `CAST`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CastType {
    Int,
    Float,
    String,
    Bool,
}

impl CastType {
    pub fn keyword(self) -> &'static str {
        match self {
            CastType::Int => "INT",
            CastType::Float => "FLOAT",
            CastType::String => "STRING",
            CastType::Bool => "BOOL",
        }
    }

    pub fn from_keyword(s: &str) -> Option<Self> {
        match s.to_ascii_uppercase().as_str() {
            "INT" | "INTEGER" => Some(CastType::Int),
            "FLOAT" | "REAL" | "DOUBLE" => Some(CastType::Float),
            "STRING" | "TEXT" | "VARCHAR" => Some(CastType::String),
            "BOOL" | "BOOLEAN" => Some(CastType::Bool),
            _ => None,
        }
    }
}

/// A primitive cell value.
///
/// Equality is structural and bitwise for floats, so `Int(1) != Float(1.0)`
/// and states can be compared exactly. Use [`Value::sql_eq`] for the
/// numeric-aware comparison operators.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "lowercase")]
pub enum Value {
    Null,
    Int(i64),
    Float(f64),
    String(String),
    Bool(bool),
    Error(ErrorKind),
}

impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Value::Null, Value::Null) => true,
            (Value::Int(a), Value::Int(b)) => a == b,
            (Value::Float(a), Value::Float(b)) => a.to_bits() == b.to_bits(),
            (Value::String(a), Value::String(b)) => a == b,
            (Value::Bool(a), Value::Bool(b)) => a == b,
            (Value::Error(a), Value::Error(b)) => a == b,
            _ => false,
        }
    }
}

impl Eq for Value {}

impl std::hash::Hash for Value {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        std::mem::discriminant(self).hash(state);
        match self {
            Value::Null => {}
            Value::Int(i) => i.hash(state),
            Value::Float(f) => f.to_bits().hash(state),
            Value::String(s) => s.hash(state),
            Value::Bool(b) => b.hash(state),
            Value::Error(e) => e.hash(state),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Null => Ok(()),
            Value::Int(i) => write!(f, "{i}"),
            Value::Float(x) => f.write_str(&format_float(*x)),
            Value::String(s) => f.write_str(s),
            Value::Bool(true) => f.write_str("TRUE"),
            Value::Bool(false) => f.write_str("FALSE"),
            Value::Error(e) => f.write_str(e.literal()),
        }
    }
}

/// Shortest round-tripping decimal form that always reads back as a float.
pub fn format_float(x: f64) -> String {
    let s = format!("{x:?}");
    if s.contains(['.', 'e', 'E']) || !x.is_finite() {
        s
    } else {
        format!("{s}.0")
    }
}

/// Infer a literal from raw text: integer when lossless, else finite float,
/// else boolean, else string. Empty text is null.
pub fn infer_literal(raw: &str) -> Value {
    let t = raw.trim();
    if t.is_empty() {
        return Value::Null;
    }
    let digits = t.strip_prefix(['-', '+']).unwrap_or(t);
    if !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit()) {
        // Integers that do not survive a round trip (leading zeros, out of
        // range) keep their text.
        return match t.parse::<i64>() {
            Ok(i) if i.to_string() == t => Value::Int(i),
            _ => Value::String(raw.to_string()),
        };
    }
    if t.bytes().any(|b| b.is_ascii_digit()) {
        if let Ok(x) = t.parse::<f64>() {
            if x.is_finite() {
                return Value::Float(x);
            }
        }
    }
    if t.eq_ignore_ascii_case("true") {
        return Value::Bool(true);
    }
    if t.eq_ignore_ascii_case("false") {
        return Value::Bool(false);
    }
    Value::String(raw.to_string())
}

impl Value {
    pub fn is_error(&self) -> bool {
        matches!(self, Value::Error(_))
    }

    pub fn is_null(&self) -> bool {
        matches!(self, Value::Null)
    }

    pub fn type_name(&self) -> &'static str {
        match self {
            Value::Null => "null",
            Value::Int(_) => "int",
            Value::Float(_) => "float",
            Value::String(_) => "string",
            Value::Bool(_) => "bool",
            Value::Error(_) => "error",
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(i) => Some(*i as f64),
            Value::Float(x) => Some(*x),
            _ => None,
        }
    }

    fn is_numeric(&self) -> bool {
        matches!(self, Value::Int(_) | Value::Float(_))
    }

    /// True only for `Bool(true)`; used for WHERE clauses and predicates.
    pub fn is_true(&self) -> bool {
        matches!(self, Value::Bool(true))
    }

    /// Numeric-aware equality used by `=`: `Int(1)` equals `Float(1.0)`.
    pub fn sql_eq(&self, other: &Value) -> bool {
        match (self, other) {
            (a, b) if a.is_numeric() && b.is_numeric() => match (a, b) {
                (Value::Int(x), Value::Int(y)) => x == y,
                _ => a.as_f64() == b.as_f64(),
            },
            (a, b) => a == b,
        }
    }
}

/// Binary operators over values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Concat,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Concat => "&",
            BinOp::Eq => "=",
            BinOp::Ne => "<>",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::And => "AND",
            BinOp::Or => "OR",
        }
    }

    /// Binding strength; higher binds tighter.
    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 4,
            BinOp::Concat => 5,
            BinOp::Add | BinOp::Sub => 6,
            BinOp::Mul | BinOp::Div => 7,
        }
    }

    pub fn is_keyword(self) -> bool {
        matches!(self, BinOp::And | BinOp::Or)
    }
}

fn num_result(x: f64) -> Value {
    if x.is_finite() {
        Value::Float(x)
    } else {
        Value::Error(ErrorKind::Num)
    }
}

fn arith(op: BinOp, a: &Value, b: &Value) -> Value {
    if a.is_null() || b.is_null() {
        return Value::Null;
    }
    if !a.is_numeric() || !b.is_numeric() {
        return Value::Error(ErrorKind::Type);
    }
    if let (Value::Int(x), Value::Int(y)) = (a, b) {
        let exact = match op {
            BinOp::Add => x.checked_add(*y),
            BinOp::Sub => x.checked_sub(*y),
            BinOp::Mul => x.checked_mul(*y),
            _ => None,
        };
        if let Some(v) = exact {
            return Value::Int(v);
        }
    }
    let (x, y) = (a.as_f64().unwrap(), b.as_f64().unwrap());
    match op {
        BinOp::Add => num_result(x + y),
        BinOp::Sub => num_result(x - y),
        BinOp::Mul => num_result(x * y),
        BinOp::Div => {
            if y == 0.0 {
                Value::Error(ErrorKind::DivZero)
            } else {
                num_result(x / y)
            }
        }
        _ => unreachable!("not an arithmetic operator"),
    }
}

/// Ordering used by comparison operators. `None` means the operands are not
/// comparable (mixed types).
fn compare(a: &Value, b: &Value) -> Option<Ordering> {
    match (a, b) {
        (Value::Int(x), Value::Int(y)) => Some(x.cmp(y)),
        (x, y) if x.is_numeric() && y.is_numeric() => x.as_f64()?.partial_cmp(&y.as_f64()?),
        (Value::String(x), Value::String(y)) => Some(x.cmp(y)),
        (Value::Bool(x), Value::Bool(y)) => Some(x.cmp(y)),
        _ => None,
    }
}

fn comparison(op: BinOp, a: &Value, b: &Value) -> Value {
    if a.is_null() || b.is_null() {
        return Value::Null;
    }
    match op {
        BinOp::Eq => return Value::Bool(a.sql_eq(b)),
        BinOp::Ne => return Value::Bool(!a.sql_eq(b)),
        _ => {}
    }
    let Some(ord) = compare(a, b) else {
        return Value::Error(ErrorKind::Type);
    };
    Value::Bool(match op {
        BinOp::Lt => ord == Ordering::Less,
        BinOp::Le => ord != Ordering::Greater,
        BinOp::Gt => ord == Ordering::Greater,
        BinOp::Ge => ord != Ordering::Less,
        _ => unreachable!("not a comparison"),
    })
}

fn as_logic(v: &Value) -> Result<Option<bool>, Value> {
    match v {
        Value::Bool(b) => Ok(Some(*b)),
        Value::Null => Ok(None),
        _ => Err(Value::Error(ErrorKind::Type)),
    }
}

/// Kleene three-valued AND/OR.
fn logic(op: BinOp, a: &Value, b: &Value) -> Value {
    let (x, y) = match (as_logic(a), as_logic(b)) {
        (Ok(x), Ok(y)) => (x, y),
        (Err(e), _) | (_, Err(e)) => return e,
    };
    let r = match op {
        BinOp::And => match (x, y) {
            (Some(false), _) | (_, Some(false)) => Some(false),
            (Some(true), Some(true)) => Some(true),
            _ => None,
        },
        BinOp::Or => match (x, y) {
            (Some(true), _) | (_, Some(true)) => Some(true),
            (Some(false), Some(false)) => Some(false),
            _ => None,
        },
        _ => unreachable!("not a logical operator"),
    };
    r.map_or(Value::Null, Value::Bool)
}

/// Apply a binary operator. Errors in either operand propagate, the left
/// operand's error taking precedence.
pub fn binary(op: BinOp, a: &Value, b: &Value) -> Value {
    if let Value::Error(_) = a {
        return a.clone();
    }
    if let Value::Error(_) = b {
        return b.clone();
    }
    match op {
        BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div => arith(op, a, b),
        BinOp::Concat => Value::String(format!("{a}{b}")),
        BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
            comparison(op, a, b)
        }
        BinOp::And | BinOp::Or => logic(op, a, b),
    }
}

pub fn negate(v: &Value) -> Value {
    match v {
        Value::Error(_) | Value::Null => v.clone(),
        Value::Int(i) => i
            .checked_neg()
            .map(Value::Int)
            .unwrap_or_else(|| Value::Float(-(*i as f64))),
        Value::Float(x) => Value::Float(-x),
        _ => Value::Error(ErrorKind::Type),
    }
}

pub fn not(v: &Value) -> Value {
    match v {
        Value::Error(_) | Value::Null => v.clone(),
        Value::Bool(b) => Value::Bool(!b),
        _ => Value::Error(ErrorKind::Type),
    }
}

pub fn cast(v: &Value, ty: CastType) -> Value {
    if v.is_error() || v.is_null() {
        return v.clone();
    }
    let type_err = Value::Error(ErrorKind::Type);
    match ty {
        CastType::Int => match v {
            Value::Int(_) => v.clone(),
            Value::Float(x) => {
                let t = x.trunc();
                if t >= i64::MIN as f64 && t < i64::MAX as f64 {
                    Value::Int(t as i64)
                } else {
                    Value::Error(ErrorKind::Num)
                }
            }
            Value::Bool(b) => Value::Int(*b as i64),
            Value::String(s) => match infer_literal(s) {
                Value::Int(i) => Value::Int(i),
                Value::Float(x) => cast(&Value::Float(x), CastType::Int),
                _ => type_err,
            },
            _ => type_err,
        },
        CastType::Float => match v {
            Value::Int(i) => Value::Float(*i as f64),
            Value::Float(_) => v.clone(),
            Value::Bool(b) => Value::Float(*b as i64 as f64),
            Value::String(s) => match infer_literal(s) {
                Value::Int(i) => Value::Float(i as f64),
                Value::Float(x) => Value::Float(x),
                _ => type_err,
            },
            _ => type_err,
        },
        CastType::String => Value::String(v.to_string()),
        CastType::Bool => match v {
            Value::Bool(_) => v.clone(),
            Value::Int(i) => Value::Bool(*i != 0),
            Value::Float(x) => Value::Bool(*x != 0.0),
            Value::String(s) => match infer_literal(s) {
                Value::Bool(b) => Value::Bool(b),
                _ => type_err,
            },
            _ => type_err,
        },
    }
}

/// Sort collation: numbers < strings < booleans; nulls and then errors sort
/// last regardless of direction.
pub fn sort_cmp(a: &Value, b: &Value, descending: bool) -> Ordering {
    fn rank(v: &Value) -> u8 {
        match v {
            Value::Int(_) | Value::Float(_) => 0,
            Value::String(_) => 1,
            Value::Bool(_) => 2,
            Value::Null => 3,
            Value::Error(_) => 4,
        }
    }
    let (ra, rb) = (rank(a), rank(b));
    if ra >= 3 || rb >= 3 {
        return ra.cmp(&rb).then_with(|| match (a, b) {
            (Value::Error(x), Value::Error(y)) => x.cmp(y),
            _ => Ordering::Equal,
        });
    }
    let ord = if ra != rb {
        ra.cmp(&rb)
    } else {
        match (a, b) {
            (Value::Int(x), Value::Int(y)) => x.cmp(y),
            (x, y) if x.is_numeric() => x
                .as_f64()
                .unwrap()
                .total_cmp(&y.as_f64().unwrap()),
            _ => compare(a, b).unwrap_or(Ordering::Equal),
        }
    };
    if descending {
        ord.reverse()
    } else {
        ord
    }
}

/// Aggregate functions over cell ranges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AggFn {
    Sum,
    Avg,
    Min,
    Max,
    Count,
}

impl AggFn {
    pub fn name(self) -> &'static str {
        match self {
            AggFn::Sum => "SUM",
            AggFn::Avg => "AVG",
            AggFn::Min => "MIN",
            AggFn::Max => "MAX",
            AggFn::Count => "COUNT",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s.to_ascii_uppercase().as_str() {
            "SUM" => Some(AggFn::Sum),
            "AVG" | "AVERAGE" => Some(AggFn::Avg),
            "MIN" => Some(AggFn::Min),
            "MAX" => Some(AggFn::Max),
            "COUNT" => Some(AggFn::Count),
            _ => None,
        }
    }
}

/// Evaluate an aggregate over a multiset of values.
///
/// The result does not depend on the order of `values`: errors resolve to
/// the smallest error kind present and float sums are accumulated in sorted
/// order. Non-numeric, non-null values are a type error only when
/// `strict` is set (direct arguments); range members that are strings or
/// booleans are skipped.
pub fn aggregate(func: AggFn, values: &[(Value, bool)]) -> Value {
    if let Some(kind) = values
        .iter()
        .filter_map(|(v, _)| match v {
            Value::Error(k) => Some(*k),
            _ => None,
        })
        .min()
    {
        return Value::Error(kind);
    }
    let mut ints: Vec<i64> = Vec::new();
    let mut floats: Vec<f64> = Vec::new();
    let mut non_null = 0i64;
    for (v, strict) in values {
        match v {
            Value::Null => continue,
            Value::Int(i) => ints.push(*i),
            Value::Float(x) => floats.push(*x),
            _ if *strict => return Value::Error(ErrorKind::Type),
            _ => {}
        }
        non_null += 1;
    }
    if func == AggFn::Count {
        return Value::Int(non_null);
    }
    let n = ints.len() + floats.len();
    match func {
        AggFn::Sum | AggFn::Avg => {
            if func == AggFn::Avg && n == 0 {
                return Value::Error(ErrorKind::DivZero);
            }
            let int_sum: i128 = ints.iter().map(|&i| i as i128).sum();
            let total = if floats.is_empty() {
                match i64::try_from(int_sum) {
                    Ok(i) => Value::Int(i),
                    Err(_) => num_result(int_sum as f64),
                }
            } else {
                floats.sort_by(|a, b| a.total_cmp(b));
                let fsum: f64 = floats.iter().sum();
                num_result(int_sum as f64 + fsum)
            };
            if func == AggFn::Sum {
                total
            } else {
                binary(BinOp::Div, &total, &Value::Float(n as f64))
            }
        }
        AggFn::Min | AggFn::Max => {
            let mut best: Option<Value> = None;
            for v in ints
                .iter()
                .map(|&i| Value::Int(i))
                .chain(floats.iter().map(|&x| Value::Float(x)))
            {
                best = Some(match best {
                    None => v,
                    Some(b) => {
                        let ord = sort_cmp(&v, &b, false)
                            .then_with(|| v.type_name().cmp(b.type_name()));
                        let take = if func == AggFn::Min {
                            ord == Ordering::Less
                        } else {
                            ord == Ordering::Greater
                        };
                        if take {
                            v
                        } else {
                            b
                        }
                    }
                });
            }
            best.unwrap_or(Value::Null)
        }
        AggFn::Count => unreachable!(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn infer_prefers_lossless_int() {
        assert_eq!(infer_literal("10"), Value::Int(10));
        assert_eq!(infer_literal("007"), Value::String("007".into()));
        assert_eq!(infer_literal("0.05"), Value::Float(0.05));
        assert_eq!(infer_literal("TRUE"), Value::Bool(true));
        assert_eq!(infer_literal("inf"), Value::String("inf".into()));
        assert_eq!(infer_literal(""), Value::Null);
        assert_eq!(infer_literal("table"), Value::String("table".into()));
    }

    #[test]
    fn errors_propagate_left_first() {
        let l = Value::Error(ErrorKind::DivZero);
        let r = Value::Error(ErrorKind::Type);
        assert_eq!(binary(BinOp::Add, &l, &r), l);
        assert_eq!(binary(BinOp::Add, &Value::Int(1), &r), r);
        assert_eq!(binary(BinOp::And, &r, &Value::Bool(false)), r);
    }

    #[test]
    fn arithmetic_promotes_on_overflow() {
        assert_eq!(
            binary(BinOp::Add, &Value::Int(i64::MAX), &Value::Int(1)),
            Value::Float(i64::MAX as f64 + 1.0)
        );
        assert_eq!(
            binary(BinOp::Div, &Value::Int(1), &Value::Int(0)),
            Value::Error(ErrorKind::DivZero)
        );
        assert_eq!(binary(BinOp::Div, &Value::Int(7), &Value::Int(2)), Value::Float(3.5));
        assert_eq!(
            binary(BinOp::Mul, &Value::Float(1e308), &Value::Int(10)),
            Value::Error(ErrorKind::Num)
        );
    }

    #[test]
    fn comparisons_mix_numeric_types() {
        assert_eq!(binary(BinOp::Eq, &Value::Int(1), &Value::Float(1.0)), Value::Bool(true));
        assert_eq!(
            binary(BinOp::Lt, &Value::Int(1), &Value::String("a".into())),
            Value::Error(ErrorKind::Type)
        );
        assert_eq!(
            binary(BinOp::Eq, &Value::Int(1), &Value::String("1".into())),
            Value::Bool(false)
        );
        assert_eq!(binary(BinOp::Gt, &Value::Null, &Value::Int(1)), Value::Null);
    }

    #[test]
    fn kleene_logic() {
        let t = Value::Bool(true);
        let f = Value::Bool(false);
        assert_eq!(binary(BinOp::And, &Value::Null, &f), f);
        assert_eq!(binary(BinOp::Or, &Value::Null, &t), t);
        assert_eq!(binary(BinOp::And, &Value::Null, &t), Value::Null);
    }

    #[test]
    fn sort_collation_puts_nulls_last_both_ways() {
        let mut v = vec![
            Value::Null,
            Value::Bool(true),
            Value::String("b".into()),
            Value::Int(3),
            Value::Float(1.5),
        ];
        v.sort_by(|a, b| sort_cmp(a, b, false));
        assert_eq!(
            v,
            vec![
                Value::Float(1.5),
                Value::Int(3),
                Value::String("b".into()),
                Value::Bool(true),
                Value::Null
            ]
        );
        v.sort_by(|a, b| sort_cmp(a, b, true));
        assert_eq!(v.last(), Some(&Value::Null));
        assert_eq!(v[0], Value::Bool(true));
    }

    #[test]
    fn aggregates_are_order_independent() {
        let vals = [0.1, 0.2, 0.3, 1e16, -1e16];
        let a: Vec<_> = vals.iter().map(|&x| (Value::Float(x), false)).collect();
        let mut b = a.clone();
        b.reverse();
        assert_eq!(aggregate(AggFn::Sum, &a), aggregate(AggFn::Sum, &b));
        let with_err = vec![
            (Value::Error(ErrorKind::Type), false),
            (Value::Error(ErrorKind::RefDangling), false),
        ];
        assert_eq!(aggregate(AggFn::Sum, &with_err), Value::Error(ErrorKind::RefDangling));
        assert_eq!(aggregate(AggFn::Avg, &[]), Value::Error(ErrorKind::DivZero));
        assert_eq!(
            aggregate(AggFn::Count, &[(Value::Null, false), (Value::Int(2), false)]),
            Value::Int(1)
        );
    }

    #[test]
    fn float_format_reads_back_as_float() {
        assert_eq!(format_float(1.0), "1.0");
        assert_eq!(format_float(0.05), "0.05");
        assert_eq!(format_float(1e21), "1e21");
    }

    #[test]
    fn casts() {
        assert_eq!(cast(&Value::String("10".into()), CastType::Int), Value::Int(10));
        assert_eq!(cast(&Value::Float(2.9), CastType::Int), Value::Int(2));
        assert_eq!(cast(&Value::Int(3), CastType::String), Value::String("3".into()));
        assert_eq!(
            cast(&Value::String("x".into()), CastType::Float),
            Value::Error(ErrorKind::Type)
        );
    }
}
