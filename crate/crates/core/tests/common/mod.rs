//! Generators and oracles shared by the integration suites.
//!
//! The sheet oracle evaluates the generator's own formula trees over a
//! position layout. It shares no code with the engine's evaluator, so it
//! can judge values the engine computes after structural actions.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vizual_core::executor::{apply, gesture_to_statements, Gesture, StabilityPolicy};
use vizual_core::formula::{AggArg, Axis, CellRef, Expr, UnOp};
use vizual_core::lang::{RegionSpec, RegionTarget, Script, SortKey, Source, Statement, Step};
use vizual_core::model::{column_letters, new_sheet, CellId, Pos, RowId, SheetState};
use vizual_core::value::{AggFn, BinOp, CastType, ErrorKind, Value};
use vizual_core::formula::Formula;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------------
// Random DAG sheets.

/// Formula tree over relative offsets.
#[derive(Debug, Clone, PartialEq)]
pub enum Tree {
    Lit(i64),
    /// `(dcol, drow)` from the host.
    Ref(i64, i64),
    Op(char, Box<Tree>, Box<Tree>),
}

impl Tree {
    /// A1 text at `host`.
    pub fn a1(&self, host: Pos) -> String {
        match self {
            Tree::Lit(v) if *v < 0 => format!("({v})"),
            Tree::Lit(v) => v.to_string(),
            Tree::Ref(dc, dr) => {
                let c = (host.col as i64 + dc) as usize;
                let r = (host.row as i64 + dr) as usize;
                format!("{}{}", column_letters(c), r + 1)
            }
            Tree::Op(op, a, b) => format!("({}{op}{})", a.a1(host), b.a1(host)),
        }
    }

    fn offsets(&self, out: &mut Vec<(i64, i64)>) {
        match self {
            Tree::Lit(_) => {}
            Tree::Ref(dc, dr) => out.push((*dc, *dr)),
            Tree::Op(_, a, b) => {
                a.offsets(out);
                b.offsets(out);
            }
        }
    }
}

/// A sheet with literal integers and formulas whose references all point
/// to earlier cells in row-major order, so the reference graph is acyclic
/// in every row order.
pub struct GenSheet {
    pub state: SheetState,
    pub trees: BTreeMap<CellId, Tree>,
    pub literals: BTreeMap<CellId, i64>,
}

fn tree(rng: &mut ChaCha8Rng, host: Pos, width: usize, depth: u32) -> Tree {
    let k = host.row * width + host.col;
    if depth == 0 || rng.random_bool(0.4) {
        if k > 0 && rng.random_bool(0.75) {
            let t = rng.random_range(0..k);
            let (c, r) = (t % width, t / width);
            return Tree::Ref(c as i64 - host.col as i64, r as i64 - host.row as i64);
        }
        return Tree::Lit(rng.random_range(-9..=9));
    }
    let op = *['+', '-', '*'].choose(rng).unwrap();
    Tree::Op(
        op,
        Box::new(tree(rng, host, width, depth - 1)),
        Box::new(tree(rng, host, width, depth - 1)),
    )
}

pub fn gen_sheet(rng: &mut ChaCha8Rng) -> GenSheet {
    let width = rng.random_range(1..=8);
    let height = rng.random_range(1..=8);
    let names: Vec<String> = (0..width).map(|i| format!("c{i}")).collect();
    let mut state = new_sheet(&names).unwrap();
    let mut literals = BTreeMap::new();
    for _ in 0..height {
        let row: Vec<Value> = (0..width).map(|_| Value::Int(rng.random_range(-50..=50))).collect();
        state.push_row(row);
    }
    for (pos, id) in state.coords().cells_row_major() {
        if let Some(Value::Int(v)) = state.value_at(pos) {
            literals.insert(id, *v);
        }
    }
    let mut trees = BTreeMap::new();
    let policy = StabilityPolicy::default();
    for r in 0..height {
        for c in 0..width {
            let host = Pos::new(c, r);
            if !rng.random_bool(0.45) {
                continue;
            }
            let t = tree(rng, host, width, 2);
            let edit = Gesture::EditCell {
                pos: host,
                text: format!("={}", t.a1(host)),
            };
            for step in gesture_to_statements(&edit, &state, 1).unwrap() {
                state = apply(&state, &step.stmt, &policy).unwrap();
            }
            let id = state.coords().cell_at(host).unwrap();
            literals.remove(&id);
            trees.insert(id, t);
        }
    }
    GenSheet { state, trees, literals }
}

/// Oracle value: the engine's numeric semantics restated. Integer overflow
/// promotes to float; non-finite floats and unresolvable references are
/// errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Num {
    I(i64),
    F(f64),
    Err,
}

impl Num {
    fn f(self) -> Option<f64> {
        match self {
            Num::I(i) => Some(i as f64),
            Num::F(x) => Some(x),
            Num::Err => None,
        }
    }

    fn op(op: char, a: Num, b: Num) -> Num {
        if let (Num::I(x), Num::I(y)) = (a, b) {
            let exact = match op {
                '+' => x.checked_add(y),
                '-' => x.checked_sub(y),
                _ => x.checked_mul(y),
            };
            if let Some(v) = exact {
                return Num::I(v);
            }
        }
        let (Some(x), Some(y)) = (a.f(), b.f()) else {
            return Num::Err;
        };
        let v = match op {
            '+' => x + y,
            '-' => x - y,
            _ => x * y,
        };
        if v.is_finite() {
            Num::F(v)
        } else {
            Num::Err
        }
    }

    /// Whether the engine value agrees. Error kinds are not compared.
    pub fn matches(self, v: &Value) -> bool {
        match (self, v) {
            (Num::I(a), Value::Int(b)) => a == *b,
            (Num::F(a), Value::Float(b)) => a.to_bits() == b.to_bits(),
            (Num::Err, Value::Error(_)) => true,
            _ => false,
        }
    }
}

/// Evaluate every generated cell over `layout` (cell ids by row, then
/// column). Cells missing from the layout are ignored.
pub fn oracle(g: &GenSheet, layout: &[Vec<Option<CellId>>]) -> BTreeMap<CellId, Num> {
    let mut at: BTreeMap<CellId, Pos> = BTreeMap::new();
    for (r, row) in layout.iter().enumerate() {
        for (c, id) in row.iter().enumerate() {
            if let Some(id) = id {
                at.insert(*id, Pos::new(c, r));
            }
        }
    }
    fn eval(
        id: CellId,
        g: &GenSheet,
        layout: &[Vec<Option<CellId>>],
        at: &BTreeMap<CellId, Pos>,
        memo: &mut BTreeMap<CellId, Num>,
    ) -> Num {
        if let Some(v) = memo.get(&id) {
            return *v;
        }
        let v = match (g.literals.get(&id), g.trees.get(&id)) {
            (Some(v), _) => Num::I(*v),
            (None, Some(t)) => tree_value(t, at[&id], g, layout, at, memo),
            (None, None) => Num::Err,
        };
        memo.insert(id, v);
        v
    }
    fn tree_value(
        t: &Tree,
        host: Pos,
        g: &GenSheet,
        layout: &[Vec<Option<CellId>>],
        at: &BTreeMap<CellId, Pos>,
        memo: &mut BTreeMap<CellId, Num>,
    ) -> Num {
        match t {
            Tree::Lit(v) => Num::I(*v),
            Tree::Ref(dc, dr) => {
                let (c, r) = (host.col as i64 + dc, host.row as i64 + dr);
                if c < 0 || r < 0 {
                    return Num::Err;
                }
                match layout.get(r as usize).and_then(|row| row.get(c as usize)).copied().flatten() {
                    Some(target) => eval(target, g, layout, at, memo),
                    None => Num::Err,
                }
            }
            Tree::Op(op, a, b) => {
                let x = tree_value(a, host, g, layout, at, memo);
                let y = tree_value(b, host, g, layout, at, memo);
                Num::op(*op, x, y)
            }
        }
    }
    let mut memo = BTreeMap::new();
    for id in at.keys() {
        eval(*id, g, layout, &at, &mut memo);
    }
    memo
}

pub fn layout(s: &SheetState) -> Vec<Vec<Option<CellId>>> {
    (0..s.height())
        .map(|r| (0..s.width()).map(|c| s.coords().cell_at(Pos::new(c, r))).collect())
        .collect()
}

/// Cells whose value depends, directly or not, on any cell in `changed`,
/// following the generated references on `layout`. Includes `changed`.
pub fn affected(g: &GenSheet, layout: &[Vec<Option<CellId>>], changed: &BTreeSet<CellId>) -> BTreeSet<CellId> {
    let mut deps: BTreeMap<CellId, Vec<CellId>> = BTreeMap::new();
    for (r, row) in layout.iter().enumerate() {
        for (c, id) in row.iter().enumerate() {
            let Some(id) = id else { continue };
            let mut offs = Vec::new();
            if let Some(t) = g.trees.get(id) {
                t.offsets(&mut offs);
            }
            let targets = offs
                .into_iter()
                .filter_map(|(dc, dr)| {
                    let (c, r) = (c as i64 + dc, r as i64 + dr);
                    (c >= 0 && r >= 0).then_some(())?;
                    layout.get(r as usize)?.get(c as usize).copied().flatten()
                })
                .collect();
            deps.insert(*id, targets);
        }
    }
    let mut out = changed.clone();
    loop {
        let before = out.len();
        for (id, ts) in &deps {
            if ts.iter().any(|t| out.contains(t)) {
                out.insert(*id);
            }
        }
        if out.len() == before {
            return out;
        }
    }
}

// ---------------------------------------------------------------------
// Random formulas and scripts for round trips.

const NAMES: &[&str] = &[
    "a", "total", "price", "my col", "select", "value", "rowid", "between", "x'y", "Ünï", "_k9", "2nd", "A1",
];

fn name(rng: &mut ChaCha8Rng) -> String {
    NAMES.choose(rng).unwrap().to_string()
}

fn literal(rng: &mut ChaCha8Rng) -> Value {
    match rng.random_range(0..9) {
        0 => Value::Null,
        1 => Value::Bool(rng.random_bool(0.5)),
        2 => Value::Int(rng.random_range(-1000..=1000)),
        3 => Value::Int(rng.random::<i64>()),
        4 => Value::Float(rng.random_range(-1e6..1e6)),
        5 => Value::Float([0.5, 1e-9, 2.5e20, 0.1, -0.0][rng.random_range(0..5)]),
        6 => Value::String(["", "it's", "a\"b", "héllo", "x y", "1e5", "TRUE"][rng.random_range(0..7)].into()),
        7 => Value::Error([ErrorKind::Cycle, ErrorKind::DivZero, ErrorKind::Type, ErrorKind::Num, ErrorKind::RefDangling][rng.random_range(0..5)]),
        _ => Value::Int(rng.random_range(0..10)),
    }
}

fn axis(rng: &mut ChaCha8Rng, host_free: bool) -> Axis {
    if rng.random_bool(0.3) {
        Axis::Abs(rng.random_range(0..30))
    } else if host_free {
        Axis::Rel(rng.random_range(-5..=5))
    } else {
        // Relative axes must resolve from the host used for rendering.
        Axis::Rel(rng.random_range(0..=5))
    }
}

fn cell_ref(rng: &mut ChaCha8Rng, host_free: bool) -> CellRef {
    match rng.random_range(0..8) {
        0 => CellRef::Explicit(CellId(rng.random_range(1..500))),
        1 => CellRef::Dangling,
        _ => CellRef::Coord {
            col: axis(rng, host_free),
            row: axis(rng, host_free),
        },
    }
}

const BINOPS: &[BinOp] = &[
    BinOp::Add,
    BinOp::Sub,
    BinOp::Mul,
    BinOp::Div,
    BinOp::Concat,
    BinOp::Eq,
    BinOp::Ne,
    BinOp::Lt,
    BinOp::Le,
    BinOp::Gt,
    BinOp::Ge,
    BinOp::And,
    BinOp::Or,
];

pub fn gen_expr(rng: &mut ChaCha8Rng, depth: u32, host_free: bool) -> Expr {
    let leaf = depth == 0 || rng.random_bool(0.25);
    if leaf {
        return match rng.random_range(0..6) {
            0 | 1 => Expr::Lit(literal(rng)),
            2 => Expr::Ref(cell_ref(rng, host_free)),
            3 => Expr::Column(name(rng)),
            4 => Expr::RowId,
            _ => Expr::Prior,
        };
    }
    let sub = |rng: &mut ChaCha8Rng| gen_expr(rng, depth - 1, host_free);
    match rng.random_range(0..9) {
        0 => Expr::Unary(if rng.random_bool(0.5) { UnOp::Neg } else { UnOp::Not }, Box::new(sub(rng))),
        1..=3 => Expr::bin(*BINOPS.choose(rng).unwrap(), sub(rng), sub(rng)),
        4 => Expr::if_(sub(rng), sub(rng), sub(rng)),
        5 => {
            let f = [AggFn::Sum, AggFn::Avg, AggFn::Min, AggFn::Max, AggFn::Count][rng.random_range(0..5)];
            let n = rng.random_range(1..=3);
            let args = (0..n)
                .map(|_| {
                    if rng.random_bool(0.5) {
                        AggArg::Range(cell_ref(rng, host_free), cell_ref(rng, host_free))
                    } else {
                        AggArg::Expr(sub(rng))
                    }
                })
                .collect();
            Expr::Agg(f, args)
        }
        6 => Expr::Cast(
            Box::new(sub(rng)),
            [CastType::Int, CastType::Float, CastType::String, CastType::Bool][rng.random_range(0..4)],
        ),
        7 => Expr::Between(Box::new(sub(rng)), Box::new(sub(rng)), Box::new(sub(rng))),
        _ => {
            let n = rng.random_range(1..=3);
            Expr::In(Box::new(sub(rng)), (0..n).map(|_| sub(rng)).collect())
        }
    }
}

fn formula(rng: &mut ChaCha8Rng) -> Formula {
    Formula::new(gen_expr(rng, 3, true))
}

fn pos(rng: &mut ChaCha8Rng) -> Pos {
    Pos::new(rng.random_range(0..30), rng.random_range(0..200))
}

fn at(rng: &mut ChaCha8Rng) -> Option<usize> {
    rng.random_bool(0.5).then(|| rng.random_range(0..50))
}

pub fn gen_statement(rng: &mut ChaCha8Rng) -> Statement {
    match rng.random_range(0..11) {
        0 | 1 => Statement::Update {
            column: name(rng),
            formula: formula(rng),
            condition: rng.random_bool(0.6).then(|| formula(rng)),
        },
        2 => Statement::UpdateRegion {
            region: RegionTarget {
                spec: match rng.random_range(0..4) {
                    0 => RegionSpec::All,
                    1 => RegionSpec::Rect { from: pos(rng), to: pos(rng) },
                    2 => RegionSpec::Columns {
                        from: rng.random_range(0..30),
                        to: rng.random_range(0..30),
                    },
                    _ => RegionSpec::Rows {
                        from: rng.random_range(0..100),
                        to: rng.random_range(0..100),
                    },
                },
                predicate: rng.random_bool(0.5).then(|| formula(rng)),
            },
            formula: formula(rng),
        },
        3 => Statement::AddColumn {
            name: name(rng),
            formula: rng.random_bool(0.4).then(|| formula(rng)),
            at: at(rng),
        },
        4 => Statement::RemoveColumn { name: name(rng) },
        5 => Statement::InsertRow {
            assignments: (0..rng.random_range(0..3)).map(|_| (name(rng), formula(rng))).collect(),
            at: at(rng),
        },
        6 => Statement::Delete { condition: formula(rng) },
        7 => Statement::ReorderColumns {
            names: (0..rng.random_range(1..4)).map(|_| name(rng)).collect(),
        },
        8 => Statement::ReorderRows {
            rows: (0..rng.random_range(1..5)).map(|_| RowId(rng.random_range(1..100))).collect(),
        },
        9 => Statement::Sort {
            keys: (0..rng.random_range(1..3))
                .map(|_| SortKey {
                    column: name(rng),
                    descending: rng.random_bool(0.5),
                })
                .collect(),
        },
        _ => Statement::Move {
            from: pos(rng),
            to: pos(rng),
            dest: pos(rng),
        },
    }
}

pub fn gen_script(rng: &mut ChaCha8Rng) -> Script {
    let source = if rng.random_bool(0.8) {
        Source::File {
            path: ["data.csv", "dir/it's.csv", "x y.csv"][rng.random_range(0..3)].into(),
            header: rng.random_bool(0.7),
            infer: rng.random_bool(0.7),
        }
    } else {
        Source::Page { name: name(rng) }
    };
    let mut s = Script::new(source);
    for _ in 0..rng.random_range(0..8) {
        let stmt = gen_statement(rng);
        s.steps.push(match rng.random_bool(0.3) {
            true => Step::grouped(stmt, rng.random_range(1..20)),
            false => Step::new(stmt),
        });
    }
    s
}

// ---------------------------------------------------------------------
// In-memory fixtures.

pub struct Mem(pub BTreeMap<String, String>);

impl Mem {
    pub fn new(files: &[(&str, &str)]) -> Self {
        Mem(files.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect())
    }
}

impl vizual_core::executor::Sources for Mem {
    fn file(&self, path: &str) -> Result<Vec<u8>, vizual_core::executor::ExecError> {
        self.0.get(path).map(|s| s.clone().into_bytes()).ok_or_else(|| vizual_core::executor::ExecError::Io {
            path: path.into(),
            message: "missing".into(),
        })
    }
    fn page(&self, name: &str) -> Result<SheetState, vizual_core::executor::ExecError> {
        Err(vizual_core::executor::ExecError::UnknownPage(name.into()))
    }
}

pub const LINEITEM: &str = "ID,name,price,discount\n7,chair,100,0.1\n90,desk,1200,0.15\n12,lamp,30,0\n";

pub const EXAMPLE: &str = "LOAD 'lineitem.csv';
ADD COLUMN total;
UPDATE total = price * (1 - discount);
UPDATE total = 1020 WHERE ID = 90;
INSERT ROW (name = 'table', price = 10, discount = 0.05, total = 9.5);";
