//! CSV ingestion.

use std::path::Path;

use super::{Diagnostic, ExecError, Severity};
use crate::model::{column_letters, SheetState};
use crate::value::{infer_literal, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LoadOptions {
    /// First record holds column names.
    pub header: bool,
    /// Infer ints, floats and booleans; otherwise every datum is a string.
    pub infer: bool,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            header: true,
            infer: true,
        }
    }
}

pub fn load_csv(path: &Path, opts: LoadOptions) -> Result<(SheetState, Vec<Diagnostic>), ExecError> {
    let bytes = std::fs::read(path).map_err(|e| ExecError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    load_csv_bytes(&bytes, opts)
}

fn datum(raw: &str, infer: bool) -> Value {
    if raw.is_empty() {
        Value::Null
    } else if infer {
        infer_literal(raw)
    } else {
        Value::String(raw.to_string())
    }
}

/// Load CSV text. Rows shorter than the header are padded with nulls and
/// longer rows truncated, each with a diagnostic. Row ids follow file order
/// starting at 1.
pub fn load_csv_bytes(
    bytes: &[u8],
    opts: LoadOptions,
) -> Result<(SheetState, Vec<Diagnostic>), ExecError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(bytes);
    let mut records = Vec::new();
    for rec in reader.records() {
        records.push(rec.map_err(|e| ExecError::Csv(e.to_string()))?);
    }
    let mut diagnostics = Vec::new();
    let mut rows = records.into_iter();
    let names: Vec<String> = if opts.header {
        match rows.next() {
            Some(h) => h.iter().map(str::to_string).collect(),
            None => Vec::new(),
        }
    } else {
        let rest: Vec<csv::StringRecord> = rows.collect();
        let width = rest.first().map_or(0, |r| r.len());
        rows = rest.into_iter();
        (0..width).map(column_letters).collect()
    };
    let mut state = SheetState::default();
    for (i, n) in names.iter().enumerate() {
        let mut name = if n.is_empty() { column_letters(i) } else { n.clone() };
        if state.coords().column_by_name(&name).is_some() {
            let mut k = 2;
            while state.coords().column_by_name(&format!("{name}_{k}")).is_some() {
                k += 1;
            }
            let renamed = format!("{name}_{k}");
            diagnostics.push(Diagnostic::warning(
                None,
                format!("duplicate column name '{name}' renamed to '{renamed}'"),
            ));
            name = renamed;
        }
        state.push_column(&name)?;
    }
    let width = state.width();
    for (i, rec) in rows.enumerate() {
        let line = i + 1 + opts.header as usize;
        if rec.len() != width {
            diagnostics.push(Diagnostic {
                statement: None,
                severity: Severity::Warning,
                message: format!(
                    "RAGGED_ROW: record {line} has {} fields, expected {width}; {}",
                    rec.len(),
                    if rec.len() < width { "padded with nulls" } else { "extra fields dropped" }
                ),
            });
        }
        let values: Vec<Value> = rec.iter().take(width).map(|f| datum(f, opts.infer)).collect();
        state.push_row(values);
    }
    Ok((state, diagnostics))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{validate_state, Pos, RowId};

    #[test]
    fn header_and_inference() {
        let (s, d) = load_csv_bytes(b"name,qty\nchair,4\ntable,2.5\nlamp,\nrug,true\n", LoadOptions::default()).unwrap();
        assert!(d.is_empty());
        assert_eq!((s.width(), s.height()), (2, 4));
        assert_eq!(s.column_names(), vec!["name", "qty"]);
        assert_eq!(s.value_at(Pos::new(1, 0)), Some(&Value::Int(4)));
        assert_eq!(s.value_at(Pos::new(1, 1)), Some(&Value::Float(2.5)));
        assert_eq!(s.value_at(Pos::new(1, 2)), Some(&Value::Null));
        assert_eq!(s.value_at(Pos::new(1, 3)), Some(&Value::Bool(true)));
        assert_eq!(s.coords().rows(), &[RowId(1), RowId(2), RowId(3), RowId(4)]);
        assert!(validate_state(&s).is_empty());
        assert!(s.cells().all(|c| c.formula.as_literal().is_some()));
    }

    #[test]
    fn no_header_and_ragged_rows() {
        let opts = LoadOptions { header: false, infer: false };
        let (s, d) = load_csv_bytes(b"1,2\n3\n4,5,6\n", opts).unwrap();
        assert_eq!(s.column_names(), vec!["A", "B"]);
        assert_eq!(s.value_at(Pos::new(0, 0)), Some(&Value::String("1".into())));
        assert_eq!(s.value_at(Pos::new(1, 1)), Some(&Value::Null));
        assert_eq!(d.len(), 2);
        assert!(d[0].message.starts_with("RAGGED_ROW"));
    }

    #[test]
    fn duplicate_and_empty_names() {
        let (s, d) = load_csv_bytes(b"a,a,\n1,2,3\n", LoadOptions::default()).unwrap();
        assert_eq!(s.column_names(), vec!["a", "a_2", "C"]);
        assert_eq!(d.len(), 1);
    }

    #[test]
    fn empty_input() {
        let (s, _) = load_csv_bytes(b"", LoadOptions::default()).unwrap();
        assert_eq!((s.width(), s.height()), (0, 0));
    }
}
