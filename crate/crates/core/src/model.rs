//! Cells, identities, the coordinate system and regions.
//!
//! A sheet state is a set of cells keyed by [`CellId`] plus a one-to-one
//! [`CoordinateSystem`] placing cell ids in a grid. Row and column order are
//! kept as explicit id lists, so repositioning never touches identities.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formula::{self, Formula};
use crate::value::Value;

macro_rules! id_type {
    ($(#[$m:meta])* $name:ident) => {
        $(#[$m])*
        #[derive(
            Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
        )]
        #[serde(transparent)]
        pub struct $name(pub u64);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}", self.0)
            }
        }
    };
}

id_type!(
    /// Identity of a cell; survives every repositioning.
    CellId
);
id_type!(
    /// Identity of a row. Rows loaded from a file are numbered from 1 in
    /// file order.
    RowId
);
id_type!(
    /// Identity of a column, distinct from its display name.
    ColId
);

/// Monotone id counters. Ids are never reused, even after deletion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdAllocator {
    next_cell: u64,
    next_row: u64,
    next_col: u64,
}

impl Default for IdAllocator {
    fn default() -> Self {
        IdAllocator {
            next_cell: 1,
            next_row: 1,
            next_col: 1,
        }
    }
}

impl IdAllocator {
    pub fn cell(&mut self) -> CellId {
        let id = CellId(self.next_cell);
        self.next_cell += 1;
        id
    }

    pub fn row(&mut self) -> RowId {
        let id = RowId(self.next_row);
        self.next_row += 1;
        id
    }

    pub fn col(&mut self) -> ColId {
        let id = ColId(self.next_col);
        self.next_col += 1;
        id
    }

    pub fn peek_row(&self) -> RowId {
        RowId(self.next_row)
    }
}

/// A zero-based grid position. Column 0 displays as `A`, row 0 as `1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Pos {
    pub col: usize,
    pub row: usize,
}

impl Pos {
    pub fn new(col: usize, row: usize) -> Self {
        Pos { col, row }
    }

    /// Apply a signed offset; `None` when it leaves the non-negative grid.
    pub fn offset(self, dcol: i64, drow: i64) -> Option<Pos> {
        let col = usize::try_from(self.col as i64 + dcol).ok()?;
        let row = usize::try_from(self.row as i64 + drow).ok()?;
        Some(Pos { col, row })
    }

    pub fn a1(self) -> String {
        format!("{}{}", column_letters(self.col), self.row + 1)
    }
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.a1())
    }
}

/// Spreadsheet column letters for a zero-based index: 0 → `A`, 26 → `AA`.
pub fn column_letters(mut idx: usize) -> String {
    let mut out = Vec::new();
    loop {
        out.push(b'A' + (idx % 26) as u8);
        if idx < 26 {
            break;
        }
        idx = idx / 26 - 1;
    }
    out.reverse();
    String::from_utf8(out).expect("ascii")
}

/// Inverse of [`column_letters`]; accepts upper-case letters only.
pub fn parse_column_letters(s: &str) -> Option<usize> {
    if s.is_empty() || s.len() > 4 || !s.bytes().all(|b| b.is_ascii_uppercase()) {
        return None;
    }
    let mut n: usize = 0;
    for b in s.bytes() {
        n = n * 26 + (b - b'A' + 1) as usize;
    }
    Some(n - 1)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub id: ColId,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct CoordsRepr {
    columns: Vec<Column>,
    rows: Vec<RowId>,
    grid: Vec<(ColId, RowId, CellId)>,
}

/// Bijective placement of cell ids in the grid.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(from = "CoordsRepr", into = "CoordsRepr")]
pub struct CoordinateSystem {
    columns: Vec<Column>,
    rows: Vec<RowId>,
    grid: BTreeMap<(ColId, RowId), CellId>,
    col_index: HashMap<ColId, usize>,
    row_index: HashMap<RowId, usize>,
    slot_of: HashMap<CellId, (ColId, RowId)>,
}

impl PartialEq for CoordinateSystem {
    fn eq(&self, other: &Self) -> bool {
        self.columns == other.columns && self.rows == other.rows && self.grid == other.grid
    }
}

impl Eq for CoordinateSystem {}

impl From<CoordsRepr> for CoordinateSystem {
    fn from(r: CoordsRepr) -> Self {
        let mut cs = CoordinateSystem {
            columns: r.columns,
            rows: r.rows,
            grid: r.grid.into_iter().map(|(c, r, id)| ((c, r), id)).collect(),
            ..Default::default()
        };
        cs.reindex();
        cs
    }
}

impl From<CoordinateSystem> for CoordsRepr {
    fn from(c: CoordinateSystem) -> Self {
        CoordsRepr {
            columns: c.columns,
            rows: c.rows,
            grid: c.grid.into_iter().map(|((c, r), id)| (c, r, id)).collect(),
        }
    }
}

impl CoordinateSystem {
    fn reindex(&mut self) {
        self.col_index = self.columns.iter().enumerate().map(|(i, c)| (c.id, i)).collect();
        self.row_index = self.rows.iter().enumerate().map(|(i, r)| (*r, i)).collect();
        self.slot_of = self.grid.iter().map(|(slot, id)| (*id, *slot)).collect();
    }

    pub fn width(&self) -> usize {
        self.columns.len()
    }

    pub fn height(&self) -> usize {
        self.rows.len()
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn rows(&self) -> &[RowId] {
        &self.rows
    }

    pub fn column(&self, idx: usize) -> Option<&Column> {
        self.columns.get(idx)
    }

    pub fn row(&self, idx: usize) -> Option<RowId> {
        self.rows.get(idx).copied()
    }

    pub fn column_index(&self, id: ColId) -> Option<usize> {
        self.col_index.get(&id).copied()
    }

    pub fn row_index(&self, id: RowId) -> Option<usize> {
        self.row_index.get(&id).copied()
    }

    pub fn column_by_name(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn cell_at(&self, pos: Pos) -> Option<CellId> {
        let col = self.columns.get(pos.col)?;
        let row = self.rows.get(pos.row)?;
        self.grid.get(&(col.id, *row)).copied()
    }

    pub fn cell_in_slot(&self, col: ColId, row: RowId) -> Option<CellId> {
        self.grid.get(&(col, row)).copied()
    }

    pub fn slot_of(&self, id: CellId) -> Option<(ColId, RowId)> {
        self.slot_of.get(&id).copied()
    }

    pub fn position_of(&self, id: CellId) -> Option<Pos> {
        let (c, r) = self.slot_of(id)?;
        Some(Pos {
            col: self.column_index(c)?,
            row: self.row_index(r)?,
        })
    }

    pub fn in_grid(&self, pos: Pos) -> bool {
        pos.col < self.width() && pos.row < self.height()
    }

    /// All mapped cells in row-major order.
    pub fn cells_row_major(&self) -> Vec<(Pos, CellId)> {
        let mut out = Vec::with_capacity(self.grid.len());
        for (r, row) in self.rows.iter().enumerate() {
            for (c, col) in self.columns.iter().enumerate() {
                if let Some(id) = self.grid.get(&(col.id, *row)) {
                    out.push((Pos::new(c, r), *id));
                }
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub(crate) fn insert_column(&mut self, at: usize, col: Column) {
        if at >= self.columns.len() {
            self.col_index.insert(col.id, self.columns.len());
            self.columns.push(col);
        } else {
            self.columns.insert(at, col);
            self.reindex();
        }
    }

    pub(crate) fn insert_row(&mut self, at: usize, row: RowId) {
        if at >= self.rows.len() {
            self.row_index.insert(row, self.rows.len());
            self.rows.push(row);
        } else {
            self.rows.insert(at, row);
            self.reindex();
        }
    }

    /// Remove a column; returns the cells that were placed in it.
    pub(crate) fn remove_column(&mut self, idx: usize) -> Vec<CellId> {
        let col = self.columns.remove(idx);
        let removed: Vec<CellId> = self
            .rows
            .iter()
            .filter_map(|r| self.grid.remove(&(col.id, *r)))
            .collect();
        self.reindex();
        removed
    }

    /// Remove rows; returns the cells that were placed in them.
    pub(crate) fn remove_rows(&mut self, rows: &BTreeSet<RowId>) -> Vec<CellId> {
        let mut removed = Vec::new();
        for r in rows {
            for c in &self.columns {
                if let Some(id) = self.grid.remove(&(c.id, *r)) {
                    removed.push(id);
                }
            }
        }
        self.rows.retain(|r| !rows.contains(r));
        self.reindex();
        removed
    }

    pub(crate) fn set_row_order(&mut self, rows: Vec<RowId>) {
        debug_assert_eq!(rows.len(), self.rows.len());
        self.rows = rows;
        self.reindex();
    }

    pub(crate) fn set_column_order(&mut self, columns: Vec<Column>) {
        debug_assert_eq!(columns.len(), self.columns.len());
        self.columns = columns;
        self.reindex();
    }

    /// Replace the whole slot → cell assignment.
    pub(crate) fn set_grid(&mut self, grid: BTreeMap<(ColId, RowId), CellId>) {
        self.grid = grid;
        self.reindex();
    }

    pub(crate) fn grid(&self) -> &BTreeMap<(ColId, RowId), CellId> {
        &self.grid
    }

    pub(crate) fn place(&mut self, col: ColId, row: RowId, id: CellId) {
        if let Some(old) = self.grid.insert((col, row), id) {
            self.slot_of.remove(&old);
        }
        self.slot_of.insert(id, (col, row));
    }

    /// Structural invariants: injective placement, every slot within the
    /// current columns × rows. Returns a description of the first breach.
    pub fn check(&self) -> Result<(), String> {
        let mut seen = BTreeSet::new();
        for ((c, r), id) in &self.grid {
            if !seen.insert(*id) {
                return Err(format!("cell {id} placed twice"));
            }
            if !self.col_index.contains_key(c) || !self.row_index.contains_key(r) {
                return Err(format!("cell {id} placed outside the grid"));
            }
        }
        let names: BTreeSet<&str> = self.columns.iter().map(|c| c.name.as_str()).collect();
        if names.len() != self.columns.len() {
            return Err("duplicate column name".into());
        }
        Ok(())
    }
}

/// The atom of state: identity, formula and cached value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub id: CellId,
    pub formula: Formula,
    pub value: Value,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("duplicate column name '{0}'")]
    DuplicateColumn(String),
}

/// Cells plus their coordinate system. Operations never mutate a state in
/// place from the outside; they return a new one.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SheetState {
    pub(crate) cells: BTreeMap<CellId, Cell>,
    pub(crate) coords: CoordinateSystem,
    pub(crate) alloc: IdAllocator,
}

/// Create an empty sheet with the given column names.
pub fn new_sheet<S: AsRef<str>>(columns: &[S]) -> Result<SheetState, ModelError> {
    let mut state = SheetState::default();
    for name in columns {
        state.push_column(name.as_ref())?;
    }
    Ok(state)
}

impl SheetState {
    pub fn coords(&self) -> &CoordinateSystem {
        &self.coords
    }

    pub fn cells(&self) -> impl Iterator<Item = &Cell> {
        self.cells.values()
    }

    pub fn cell(&self, id: CellId) -> Option<&Cell> {
        self.cells.get(&id)
    }

    pub fn cell_at(&self, pos: Pos) -> Option<&Cell> {
        self.coords.cell_at(pos).and_then(|id| self.cells.get(&id))
    }

    pub fn value_at(&self, pos: Pos) -> Option<&Value> {
        self.cell_at(pos).map(|c| &c.value)
    }

    pub fn allocator(&self) -> &IdAllocator {
        &self.alloc
    }

    pub fn width(&self) -> usize {
        self.coords.width()
    }

    pub fn height(&self) -> usize {
        self.coords.height()
    }

    pub fn column_names(&self) -> Vec<&str> {
        self.coords.columns().iter().map(|c| c.name.as_str()).collect()
    }

    /// Map of every cell id to its value.
    pub fn value_map(&self) -> BTreeMap<CellId, Value> {
        self.cells.iter().map(|(id, c)| (*id, c.value.clone())).collect()
    }

    /// Values of one row in column order.
    pub fn row_values(&self, row: usize) -> Vec<Value> {
        (0..self.width())
            .map(|c| self.value_at(Pos::new(c, row)).cloned().unwrap_or(Value::Null))
            .collect()
    }

    /// Occupied positions with their values, row-major.
    pub fn position_values(&self) -> Vec<(Pos, Value)> {
        self.coords
            .cells_row_major()
            .into_iter()
            .map(|(p, id)| (p, self.cells[&id].value.clone()))
            .collect()
    }

    /// Append a column of null literal cells.
    pub fn push_column(&mut self, name: &str) -> Result<ColId, ModelError> {
        let at = self.width();
        self.insert_column_at(at, name)
    }

    pub(crate) fn insert_column_at(&mut self, at: usize, name: &str) -> Result<ColId, ModelError> {
        if self.coords.column_by_name(name).is_some() {
            return Err(ModelError::DuplicateColumn(name.to_string()));
        }
        let col = self.alloc.col();
        self.coords.insert_column(
            at,
            Column {
                id: col,
                name: name.to_string(),
            },
        );
        let rows: Vec<RowId> = self.coords.rows().to_vec();
        for r in rows {
            self.new_cell(col, r, Formula::null());
        }
        Ok(col)
    }

    /// Append a row whose cells take the given literal formulas, padded with
    /// nulls. Values are set to the literals; the state stays valid.
    pub fn push_row(&mut self, literals: Vec<Value>) -> RowId {
        let at = self.height();
        let formulas = literals.into_iter().map(Formula::literal).collect();
        self.insert_row_at(at, formulas)
    }

    /// Insert a row of cells with the given formulas (missing trailing
    /// columns get null). Values are left null until recomputed, except for
    /// literal formulas which are their own value.
    pub(crate) fn insert_row_at(&mut self, at: usize, formulas: Vec<Formula>) -> RowId {
        let row = self.alloc.row();
        self.coords.insert_row(at, row);
        let cols: Vec<ColId> = self.coords.columns().iter().map(|c| c.id).collect();
        let mut formulas = formulas.into_iter();
        for c in cols {
            let f = formulas.next().unwrap_or_else(Formula::null);
            self.new_cell(c, row, f);
        }
        row
    }

    pub(crate) fn new_cell(&mut self, col: ColId, row: RowId, formula: Formula) -> CellId {
        let id = self.alloc.cell();
        let value = formula.as_literal().cloned().unwrap_or(Value::Null);
        self.cells.insert(id, Cell { id, formula, value });
        self.coords.place(col, row, id);
        id
    }

    pub(crate) fn cell_mut(&mut self, id: CellId) -> Option<&mut Cell> {
        self.cells.get_mut(&id)
    }

    pub(crate) fn remove_cells(&mut self, ids: &[CellId]) {
        for id in ids {
            self.cells.remove(id);
        }
    }

    /// Structural invariants of the state (not formula validity).
    pub fn check_structure(&self) -> Result<(), String> {
        self.coords.check()?;
        for id in self.coords.grid().values() {
            if !self.cells.contains_key(id) {
                return Err(format!("placed cell {id} does not exist"));
            }
        }
        for id in self.cells.keys() {
            if self.coords.slot_of(*id).is_none() {
                return Err(format!("cell {id} is not reachable from the grid"));
            }
        }
        Ok(())
    }

    /// Stable content hash of the full state (ids, formulas, values, order).
    pub fn content_hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let bytes = serde_json::to_vec(self).expect("state serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}

/// A set of ids, or every id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Selection<T: Ord> {
    All,
    Only(BTreeSet<T>),
}

impl<T: Ord> Selection<T> {
    pub fn contains(&self, t: &T) -> bool {
        match self {
            Selection::All => true,
            Selection::Only(s) => s.contains(t),
        }
    }
}

impl<T: Ord> FromIterator<T> for Selection<T> {
    fn from_iter<I: IntoIterator<Item = T>>(iter: I) -> Self {
        Selection::Only(iter.into_iter().collect())
    }
}

/// Cells qualified by columns, rows and a per-cell boolean predicate.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub columns: Selection<ColId>,
    pub rows: Selection<RowId>,
    pub predicate: Formula,
}

impl Region {
    pub fn all() -> Self {
        Region {
            columns: Selection::All,
            rows: Selection::All,
            predicate: Formula::literal(Value::Bool(true)),
        }
    }
}

/// Region members plus the cells whose predicate failed to evaluate.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Resolved {
    pub cells: Vec<CellId>,
    pub errors: Vec<(CellId, Value)>,
}

/// Cells of `region`, row-major. A predicate that evaluates to an error
/// excludes that cell and is reported in [`Resolved::errors`].
pub fn region_resolve(state: &SheetState, region: &Region) -> Resolved {
    let mut out = Resolved::default();
    for (pos, id) in state.coords.cells_row_major() {
        let col = state.coords.columns()[pos.col].id;
        let row = state.coords.rows()[pos.row];
        if !region.columns.contains(&col) || !region.rows.contains(&row) {
            continue;
        }
        match formula::evaluate(&region.predicate, state, pos) {
            Value::Bool(true) => out.cells.push(id),
            v @ Value::Error(_) => out.errors.push((id, v)),
            _ => {}
        }
    }
    out
}

/// A cell whose stored value disagrees with its formula.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub cell: CellId,
    pub expected: Value,
    pub stored: Value,
}

/// Check that every cell's formula evaluates to its stored value. Cells on a
/// reference cycle are always reported, with an expected `CYCLE` value.
pub fn validate_state(state: &SheetState) -> Vec<Violation> {
    let cyclic: BTreeSet<CellId> = formula::cyclic_cells(state);
    let mut out = Vec::new();
    for (pos, id) in state.coords.cells_row_major() {
        let cell = &state.cells[&id];
        let expected = if cyclic.contains(&id) {
            Value::Error(crate::value::ErrorKind::Cycle)
        } else {
            formula::evaluate(&cell.formula, state, pos)
        };
        if cyclic.contains(&id) || expected != cell.value {
            out.push(Violation {
                cell: id,
                expected,
                stored: cell.value.clone(),
            });
        }
    }
    out
}
