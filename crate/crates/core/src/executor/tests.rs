use super::*;
use crate::formula::{adapt, parse_formula_text, recompute_all};
use crate::lang::{parse_script, parse_statement, RegionTarget, Script, Source, Step};
use crate::model::{new_sheet, validate_state};

fn stmt(text: &str) -> Statement {
    parse_statement(text).unwrap()
}

fn run(state: &SheetState, text: &str) -> SheetState {
    let next = apply(state, &stmt(text), &StabilityPolicy::default()).unwrap();
    assert!(validate_state(&next).is_empty(), "invalid after {text}");
    next
}

fn set(s: &mut SheetState, pos: Pos, text: &str) {
    let id = s.coords().cell_at(pos).unwrap();
    s.cell_mut(id).unwrap().formula = parse_formula_text(text, Some(pos)).unwrap();
}

fn text_at(s: &SheetState, col: usize, row: usize) -> String {
    let p = Pos::new(col, row);
    s.cell_at(p).unwrap().formula.to_text(Some(p))
}

fn column(s: &SheetState, col: usize) -> Vec<Value> {
    (0..s.height()).map(|r| s.value_at(Pos::new(col, r)).unwrap().clone()).collect()
}

fn ints(xs: &[i64]) -> Vec<Value> {
    xs.iter().map(|x| Value::Int(*x)).collect()
}

/// Four people with a running total in column C.
fn running_total() -> SheetState {
    let mut s = new_sheet(&["name", "amount", "running"]).unwrap();
    for (n, v) in [("Alice", 10), ("Bob", 4), ("Carol", 8), ("Dave", 9)] {
        s.push_row(vec![Value::String(n.into()), Value::Int(v)]);
    }
    set(&mut s, Pos::new(2, 0), "B1");
    for r in 1..4 {
        set(&mut s, Pos::new(2, r), &format!("B{}+C{}", r + 1, r));
    }
    let s = recompute_all(&s);
    assert_eq!(column(&s, 2), ints(&[10, 14, 22, 31]));
    s
}

#[test]
fn swap_is_value_stable() {
    let s = running_total();
    let before = s.value_map();
    let out = run(&s, "REORDER ROWS (3, 2)");
    assert_eq!(out.value_map(), before);
    assert_eq!(column(&out, 2), ints(&[10, 22, 14, 31]));
    assert_eq!(text_at(&out, 2, 1), "B2+C3");
    assert_eq!(text_at(&out, 2, 2), "B3+C1");
    // Dave still adds Carol's total, which now sits one row higher.
    assert_eq!(text_at(&out, 2, 3), "B4+C2");
}

#[test]
fn sort_is_formula_stable() {
    let s = running_total();
    let out = run(&s, "SORT ROWS amount DESC");
    let names: Vec<Value> = column(&out, 0);
    assert_eq!(
        names,
        ["Alice", "Dave", "Carol", "Bob"].map(|n| Value::String(n.into())).to_vec()
    );
    assert_eq!(column(&out, 2), ints(&[10, 19, 27, 31]));
    for r in 1..4 {
        assert_eq!(text_at(&out, 2, r), format!("B{}+C{}", r + 1, r));
    }
    let rnf = |s: &SheetState| {
        let mut v: Vec<_> = s.cells().map(|c| (c.id, c.formula.rnf())).collect();
        v.sort();
        v
    };
    assert_eq!(rnf(&out), rnf(&s));
}

#[test]
fn sort_under_value_stable_policy_keeps_values() {
    let s = running_total();
    let policy = StabilityPolicy {
        sort: Stability::ValueStable,
        ..Default::default()
    };
    let out = apply(&s, &stmt("SORT ROWS amount DESC"), &policy).unwrap();
    assert_eq!(out.value_map(), s.value_map());
}

#[test]
fn partial_reorder_fills_occupied_positions() {
    assert_eq!(partial_permutation(5, &[3, 1]), vec![0, 3, 2, 1, 4]);
    assert_eq!(partial_permutation(3, &[]), vec![0, 1, 2]);
    let s = running_total();
    let out = run(&s, "REORDER ROWS (4, 1)");
    let rows: Vec<u64> = out.coords().rows().iter().map(|r| r.0).collect();
    assert_eq!(rows, vec![4, 2, 3, 1]);
    assert_eq!(out.value_map(), s.value_map());
    let out = run(&s, "REORDER COLUMNS (running, name)");
    assert_eq!(out.column_names(), vec!["running", "amount", "name"]);
    assert_eq!(out.value_map(), s.value_map());
}

#[test]
fn delete_makes_dependents_dangle() {
    let s = running_total();
    let out = run(&s, "DELETE WHERE name = 'Bob'");
    assert_eq!(out.height(), 3);
    assert_eq!(column(&out, 1), ints(&[10, 8, 9]));
    let c = column(&out, 2);
    assert_eq!(c[0], Value::Int(10));
    // Carol read Bob's total; Dave read Carol's.
    assert_eq!(c[1], Value::Error(crate::value::ErrorKind::RefDangling));
    assert_eq!(c[2], Value::Error(crate::value::ErrorKind::RefDangling));
    assert_eq!(text_at(&out, 2, 1), "B2+#REF!");
    assert_eq!(text_at(&out, 2, 2), "B3+C2");
}

#[test]
fn delete_condition_error_keeps_row() {
    let s = running_total();
    let a = apply_with_diagnostics(&s, &stmt("DELETE WHERE amount / 0 = 1"), &StabilityPolicy::default(), Some(3))
        .unwrap();
    assert_eq!(a.state.height(), 4);
    assert_eq!(a.diagnostics.len(), 4);
    assert!(a.diagnostics.iter().all(|d| d.statement == Some(3)));
}

#[test]
fn update_with_value_and_condition() {
    let s = running_total();
    let out = run(&s, "UPDATE amount = VALUE * 2 WHERE amount > 5");
    assert_eq!(column(&out, 1), ints(&[20, 4, 16, 18]));
    assert_eq!(column(&out, 2), ints(&[20, 24, 40, 58]));
    assert_eq!(text_at(&out, 1, 0), "10*2");
}

#[test]
fn region_update_and_typecast() {
    let s = running_total();
    let out = run(&s, "UPDATE [B1:B2] = CAST(VALUE AS TEXT)");
    assert_eq!(out.value_at(Pos::new(1, 0)), Some(&Value::String("10".into())));
    assert_eq!(out.value_at(Pos::new(1, 2)), Some(&Value::Int(8)));
    let none = apply_with_diagnostics(
        &s,
        &Statement::UpdateRegion {
            region: RegionTarget {
                spec: RegionSpec::Rows { from: 9, to: 9 },
                predicate: None,
            },
            formula: Formula::null(),
        },
        &StabilityPolicy::default(),
        None,
    )
    .unwrap();
    assert_eq!(none.diagnostics.len(), 1);
}

#[test]
fn add_and_remove_column() {
    let s = running_total();
    let out = run(&s, "ADD COLUMN double AS amount * 2 AT 3");
    assert_eq!(out.column_names(), vec!["name", "amount", "double", "running"]);
    assert_eq!(column(&out, 2), ints(&[20, 8, 16, 18]));
    assert_eq!(column(&out, 3), column(&s, 2));
    assert_eq!(text_at(&out, 3, 1), "B2+D1");
    let back = run(&out, "REMOVE COLUMN double");
    assert_eq!(back.value_map(), s.value_map());
    let gone = run(&s, "REMOVE COLUMN amount");
    assert_eq!(column(&gone, 1)[0], Value::Error(crate::value::ErrorKind::RefDangling));
}

#[test]
fn insert_row_in_the_middle_keeps_references() {
    let s = running_total();
    let out = run(&s, "INSERT ROW (name = 'Eve', amount = 1) AT 2");
    assert_eq!(out.height(), 5);
    assert_eq!(out.value_map().len(), s.value_map().len() + 3);
    for (id, v) in s.value_map() {
        assert_eq!(out.cell(id).unwrap().value, v);
    }
    assert_eq!(text_at(&out, 2, 2), "B3+C1");
    assert_eq!(out.value_at(Pos::new(2, 1)), Some(&Value::Null));
}

#[test]
fn move_block_overwrites_and_vacates() {
    let s = running_total();
    let out = run(&s, "MOVE B1:B2 TO B3");
    assert_eq!(column(&out, 1), vec![Value::Null, Value::Null, Value::Int(10), Value::Int(4)]);
    // Overwritten cells B3 and B4 were deleted; C3 and C4 read them.
    assert_eq!(text_at(&out, 2, 0), "B3");
    assert_eq!(column(&out, 2)[0], Value::Int(10));
    assert_eq!(column(&out, 2)[2], Value::Error(crate::value::ErrorKind::RefDangling));
    assert!(matches!(
        apply(&s, &stmt("MOVE A1:B2 TO C4"), &StabilityPolicy::default()),
        Err(ExecError::OutOfRange(_))
    ));
}

#[test]
fn errors_carry_codes() {
    let s = running_total();
    let p = StabilityPolicy::default();
    let e = apply(&s, &stmt("UPDATE nope = 1"), &p).unwrap_err();
    assert_eq!(e.code(), "UNKNOWN_COLUMN");
    let e = apply(&s, &stmt("UPDATE amount = nope"), &p).unwrap_err();
    assert_eq!(e.code(), "UNKNOWN_COLUMN");
    let e = apply(&s, &stmt("REORDER ROWS (99)"), &p).unwrap_err();
    assert_eq!(e.code(), "UNKNOWN_ROWID");
    let e = apply(&s, &stmt("REORDER ROWS (1, 1)"), &p).unwrap_err();
    assert_eq!(e.code(), "DUPLICATE_ROWID");
    let e = apply(&s, &stmt("ADD COLUMN name"), &p).unwrap_err();
    assert_eq!(e.code(), "DUPLICATE_COLUMN");
    let e = apply(&s, &stmt("INSERT ROW (name = 1) AT 9"), &p).unwrap_err();
    assert_eq!(e.code(), "OUT_OF_RANGE");
}

const LINEITEM: &str = "ID,name,price,discount\n7,chair,100,0.1\n90,desk,1200,0.15\n12,lamp,30,0\n";

struct Mem;

impl Sources for Mem {
    fn file(&self, path: &str) -> Result<Vec<u8>, ExecError> {
        assert_eq!(path, "lineitem.csv");
        Ok(LINEITEM.as_bytes().to_vec())
    }
    fn page(&self, name: &str) -> Result<SheetState, ExecError> {
        Err(ExecError::UnknownPage(name.into()))
    }
}

#[test]
fn example_script_replays() {
    let script = parse_script(
        "LOAD 'lineitem.csv';
         ADD COLUMN total;
         UPDATE total = price * (1 - discount);
         UPDATE total = 1020 WHERE ID = 90;
         INSERT ROW (name = 'table', price = 10, discount = 0.05, total = 9.5);",
    )
    .unwrap();
    let out = replay(&script, &Mem, &StabilityPolicy::default()).unwrap();
    assert!(out.diagnostics.is_empty());
    let s = out.state;
    assert_eq!(s.column_names(), vec!["ID", "name", "price", "discount", "total"]);
    assert_eq!(
        column(&s, 4),
        vec![Value::Float(90.0), Value::Int(1020), Value::Int(30), Value::Float(9.5)]
    );
    assert_eq!(s.row_values(3)[0], Value::Null);
    assert_eq!(s.row_values(3)[1], Value::String("table".into()));
    assert!(validate_state(&s).is_empty());
}

#[test]
fn replay_reports_failing_statement() {
    let mut script = Script::new(Source::file("lineitem.csv"));
    script.push(stmt("ADD COLUMN total"));
    script.push(stmt("UPDATE missing = 1"));
    let e = replay(&script, &Mem, &StabilityPolicy::default()).unwrap_err();
    assert_eq!(e.index, Some(1));
    assert_eq!(e.to_string(), "statement 2: UNKNOWN_COLUMN: no column named 'missing'");
    let e = replay(&script, &NoSources, &StabilityPolicy::default()).unwrap_err();
    assert_eq!(e.index, None);
}

fn apply_steps(s: &SheetState, steps: &[Step]) -> SheetState {
    replay_steps(s.clone(), steps, &StabilityPolicy::default(), 0).unwrap().state
}

#[test]
fn edit_cell_gesture() {
    let s = running_total();
    let steps = gesture_to_statements(
        &Gesture::EditCell {
            pos: Pos::new(1, 1),
            text: "5".into(),
        },
        &s,
        7,
    )
    .unwrap();
    assert_eq!(steps.len(), 1);
    assert_eq!(steps[0].group, Some(7));
    assert_eq!(steps[0].stmt.to_string(), "UPDATE amount = 5 WHERE ROWID = 2");
    let out = apply_steps(&s, &steps);
    assert_eq!(column(&out, 2), ints(&[10, 15, 23, 32]));

    let steps = gesture_to_statements(
        &Gesture::EditCell {
            pos: Pos::new(2, 0),
            text: "=B1*3".into(),
        },
        &s,
        1,
    )
    .unwrap();
    assert_eq!(column(&apply_steps(&s, &steps), 2), ints(&[30, 34, 42, 51]));
    let bad = gesture_to_statements(
        &Gesture::EditCell {
            pos: Pos::new(9, 9),
            text: "1".into(),
        },
        &s,
        1,
    );
    assert_eq!(bad.unwrap_err().code(), "EMPTY_TARGET");
}

#[test]
fn copy_paste_tiles_with_adapted_references() {
    let s = running_total();
    let g = Gesture::CopyPaste {
        source: (Pos::new(2, 1), Pos::new(2, 1)),
        target: (Pos::new(2, 1), Pos::new(2, 3)),
    };
    let steps = gesture_to_statements(&g, &s, 2).unwrap();
    assert_eq!(steps.len(), 3);
    let out = apply_steps(&s, &steps);
    for r in 1..4 {
        assert_eq!(text_at(&out, 2, r), format!("B{}+C{}", r + 1, r));
    }
    assert_eq!(out.value_map(), s.value_map());

    // A 1x2 source tiled over a 2x3 target; each cell gets the source
    // formula shifted by its own offset.
    let g = Gesture::CopyPaste {
        source: (Pos::new(1, 0), Pos::new(2, 0)),
        target: (Pos::new(1, 1), Pos::new(2, 3)),
    };
    let steps = gesture_to_statements(&g, &s, 3).unwrap();
    let out = apply_steps(&s, &steps);
    for r in 1..4 {
        for c in 1..3 {
            let src = Pos::new(c, 0);
            let want = adapt(&s.cell_at(src).unwrap().formula, (0, r as i64));
            assert_eq!(out.cell_at(Pos::new(c, r)).unwrap().formula, want);
        }
    }
    assert_eq!(column(&out, 2), ints(&[10, 10, 10, 10]));
}

#[test]
fn drag_rows_emits_minimal_window() {
    let s = running_total();
    let g = Gesture::DragRows {
        rows: vec![RowId(3)],
        to: 1,
    };
    let steps = gesture_to_statements(&g, &s, 4).unwrap();
    assert_eq!(steps.len(), 1);
    assert_eq!(steps[0].stmt.to_string(), "REORDER ROWS (3, 2)");
    let noop = Gesture::DragRows {
        rows: vec![RowId(1)],
        to: 0,
    };
    assert!(gesture_to_statements(&noop, &s, 4).unwrap().is_empty());
    let g = Gesture::DragColumns {
        columns: vec!["name".into()],
        to: 2,
    };
    let steps = gesture_to_statements(&g, &s, 5).unwrap();
    let out = apply_steps(&s, &steps);
    assert_eq!(out.column_names(), vec!["amount", "running", "name"]);
}

#[test]
fn structural_gestures() {
    let s = running_total();
    let ins = gesture_to_statements(&Gesture::InsertRow { index: 1, after: true }, &s, 1).unwrap();
    assert_eq!(ins[0].stmt.to_string(), "INSERT ROW () AT 3");
    let col = gesture_to_statements(
        &Gesture::InsertColumn {
            index: 2,
            after: true,
            name: None,
        },
        &s,
        1,
    )
    .unwrap();
    assert_eq!(col[0].stmt.to_string(), "ADD COLUMN column_1");
    let del = gesture_to_statements(
        &Gesture::DeleteRows {
            rows: vec![RowId(1), RowId(4)],
        },
        &s,
        1,
    )
    .unwrap();
    assert_eq!(del[0].stmt.to_string(), "DELETE WHERE ROWID IN (1, 4)");
    assert_eq!(apply_steps(&s, &del).height(), 2);
    let filt = gesture_to_statements(
        &Gesture::Filter {
            predicate: "amount >= 9".into(),
        },
        &s,
        1,
    )
    .unwrap();
    assert_eq!(column(&apply_steps(&s, &filt), 1), ints(&[10, 9]));
    let err = gesture_to_statements(&Gesture::DeleteRows { rows: vec![RowId(42)] }, &s, 1);
    assert_eq!(err.unwrap_err().code(), "UNKNOWN_ROWID");
    let err = gesture_to_statements(&Gesture::Sort { keys: vec![] }, &s, 1);
    assert_eq!(err.unwrap_err().code(), "EMPTY_TARGET");
}

#[test]
fn gesture_json_shape() {
    let g: Gesture =
        serde_json::from_str(r#"{"kind":"sort","keys":[{"column":"amount","descending":true}]}"#).unwrap();
    assert_eq!(
        g,
        Gesture::Sort {
            keys: vec![SortKey {
                column: "amount".into(),
                descending: true
            }]
        }
    );
}
