//! Windowed sheet reads.

use serde::Serialize;
use vizual_core::formula::render_formula;
use vizual_core::model::{CellId, ColId, Pos, RowId, SheetState};
use vizual_core::value::Value;

use crate::error::ApiError;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ColumnHeader {
    pub index: usize,
    pub name: String,
    pub id: ColId,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RowHeader {
    pub index: usize,
    pub id: RowId,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellPayload {
    pub id: CellId,
    pub value: Value,
    /// Formula bar text, absent for literal cells.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub formula: Option<String>,
}

/// A rectangle of a sheet. Ranges are half-open and already clamped to the
/// sheet, so they report what was actually returned.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SheetWindow {
    pub columns: Vec<ColumnHeader>,
    pub rows: Vec<RowHeader>,
    /// Row-major, `rows.len()` rows of `columns.len()` entries; `null` for
    /// an empty slot.
    pub cells: Vec<Vec<Option<CellPayload>>>,
    pub col_range: [usize; 2],
    pub row_range: [usize; 2],
    pub total_columns: usize,
    pub total_rows: usize,
}

/// Parse `start:end` (half-open). A missing parameter means everything.
pub fn parse_range(text: Option<&str>, name: &str) -> Result<(usize, usize), ApiError> {
    let Some(text) = text else {
        return Ok((0, usize::MAX));
    };
    let bad = || ApiError::invalid("INVALID_RANGE", format!("{name} must be 'start:end' with start <= end, got '{text}'"));
    let (a, b) = text.split_once(':').ok_or_else(bad)?;
    let a: usize = a.trim().parse().map_err(|_| bad())?;
    let b: usize = if b.trim().is_empty() {
        usize::MAX
    } else {
        b.trim().parse().map_err(|_| bad())?
    };
    if a > b {
        return Err(bad());
    }
    Ok((a, b))
}

fn clamp((a, b): (usize, usize), total: usize) -> [usize; 2] {
    [a.min(total), b.min(total)]
}

pub fn window(state: &SheetState, cols: (usize, usize), rows: (usize, usize)) -> SheetWindow {
    let coords = state.coords();
    let col_range = clamp(cols, state.width());
    let row_range = clamp(rows, state.height());
    let columns = (col_range[0]..col_range[1])
        .map(|i| {
            let c = &coords.columns()[i];
            ColumnHeader {
                index: i,
                name: c.name.clone(),
                id: c.id,
            }
        })
        .collect();
    let rows = (row_range[0]..row_range[1])
        .map(|i| RowHeader {
            index: i,
            id: coords.rows()[i],
        })
        .collect();
    let cells = (row_range[0]..row_range[1])
        .map(|r| {
            (col_range[0]..col_range[1])
                .map(|c| {
                    let pos = Pos::new(c, r);
                    state.cell_at(pos).map(|cell| CellPayload {
                        id: cell.id,
                        value: cell.value.clone(),
                        formula: cell.formula.as_literal().is_none().then(|| {
                            render_formula(&cell.formula, pos, coords)
                                .unwrap_or_else(|_| format!("={}", cell.formula.to_text(Some(pos))))
                        }),
                    })
                })
                .collect()
        })
        .collect();
    SheetWindow {
        columns,
        rows,
        cells,
        col_range,
        row_range,
        total_columns: state.width(),
        total_rows: state.height(),
    }
}
