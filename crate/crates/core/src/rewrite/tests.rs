use proptest::prelude::*;

use super::*;
use crate::executor::ExecError;
use crate::lang::{parse_script, parse_statement, render_script, Source};
use crate::model::SheetState;

struct Mem;

const LINEITEM: &str = "ID,name,price,discount\n7,chair,100,0.1\n90,desk,1200,0.15\n12,lamp,30,0\n";
/// Two items at 1200; everything else is cheaper.
const ORDERS: &str = "ID,name,price,qty\n1,desk,1200,2\n2,chair,100,4\n3,bench,1200,1\n4,lamp,30,4\n5,shelf,250,1\n";

impl Sources for Mem {
    fn file(&self, path: &str) -> Result<Vec<u8>, ExecError> {
        let text = match path {
            "lineitem.csv" => LINEITEM.to_string(),
            "orders.csv" => ORDERS.to_string(),
            "twelve.csv" => {
                let mut t = "A,B\n".to_string();
                for i in 1..=12 {
                    t.push_str(&format!("{},{}\n", i * 10, i % 3));
                }
                t
            }
            p => {
                return Err(ExecError::Io {
                    path: p.into(),
                    message: "missing".into(),
                })
            }
        };
        Ok(text.into_bytes())
    }
    fn page(&self, name: &str) -> Result<SheetState, ExecError> {
        Err(ExecError::UnknownPage(name.into()))
    }
}

fn script(lines: &[String]) -> Script {
    parse_script(&lines.join("\n")).unwrap()
}

fn final_state(s: &Script) -> SheetState {
    replay(s, &Mem, &StabilityPolicy::default()).unwrap().state
}

fn ten_updates() -> Script {
    let mut lines = vec!["LOAD 'twelve.csv';".to_string()];
    lines.extend((1..=10).map(|i| format!("UPDATE A = 3 WHERE ROWID = {i};")));
    script(&lines)
}

#[test]
fn ten_singletons_reroll_to_between() {
    let s = ten_updates();
    let sugs = suggest(&s, &Mem).unwrap();
    assert_eq!(sugs.len(), 1);
    let sug = &sugs[0];
    assert_eq!(sug.kind, RewriteKind::Reroll);
    assert!(sug.verified && !sug.data_dependent);
    assert_eq!((sug.start, sug.end), (0, 10));
    assert_eq!(sug.replacement.len(), 1);
    assert_eq!(sug.replacement[0].stmt.to_string(), "UPDATE A = 3 WHERE ROWID BETWEEN 1 AND 10");
    let out = apply_suggestion(&s, sug).unwrap();
    assert_eq!((s.len(), out.len()), (10, 1));
    assert_eq!(equivalence_check(&s, &out, &Mem), Verdict::Equal);
    assert!(reroll(&out).is_empty());
    assert!(readability(&out) < readability(&s));
}

#[test]
fn scattered_rows_reroll_to_in() {
    let s = script(&[
        "LOAD 'twelve.csv';".into(),
        "UPDATE B = 0 WHERE ROWID = 9;".into(),
        "UPDATE B = 0 WHERE ROWID = 2;".into(),
        "UPDATE B = 0 WHERE ROWID = 5;".into(),
    ]);
    let sugs = reroll(&s);
    assert_eq!(sugs.len(), 1);
    assert_eq!(sugs[0].replacement[0].stmt.to_string(), "UPDATE B = 0 WHERE ROWID IN (2, 5, 9)");
}

#[test]
fn single_statement_has_no_suggestion() {
    let s = script(&["LOAD 'twelve.csv';".into(), "UPDATE A = 3 WHERE ROWID = 1;".into()]);
    assert!(reroll(&s).is_empty());
    assert!(fuse(&s).is_empty());
    assert!(suggest(&s, &Mem).unwrap().is_empty());
}

#[test]
fn grouped_family_is_preferred() {
    let mut s = script(&["LOAD 'twelve.csv';".into()]);
    for (i, g) in [(1, Some(7)), (2, None), (3, Some(7)), (4, Some(7))] {
        let stmt = parse_statement(&format!("UPDATE A = 3 WHERE ROWID = {i}")).unwrap();
        s.steps.push(Step { stmt, group: g });
    }
    let sugs = reroll(&s);
    assert_eq!(sugs.len(), 1);
    assert_eq!(sugs[0].replacement.last().unwrap().group, Some(7));
    assert_eq!(
        sugs[0].replacement.last().unwrap().stmt.to_string(),
        "UPDATE A = 3 WHERE ROWID IN (1, 3, 4)"
    );
    // The ungrouped row-2 update stays in place ahead of the family.
    assert_eq!(sugs[0].replacement.len(), 2);
}

#[test]
fn reroll_stops_at_statements_it_cannot_pass() {
    let s = script(&[
        "LOAD 'twelve.csv';".into(),
        "UPDATE A = 3 WHERE ROWID = 1;".into(),
        "SORT ROWS B;".into(),
        "UPDATE A = 3 WHERE ROWID = 2;".into(),
    ]);
    assert!(reroll(&s).is_empty());
    let s = script(&[
        "LOAD 'twelve.csv';".into(),
        "UPDATE A = B WHERE ROWID = 1;".into(),
        "UPDATE B = 5 WHERE ROWID = 3;".into(),
        "UPDATE A = B WHERE ROWID = 2;".into(),
    ]);
    assert!(reroll(&s).is_empty());
}

#[test]
fn example_fuses_into_derived_column() {
    let s = parse_script(
        "LOAD 'lineitem.csv';
         ADD COLUMN total;
         UPDATE total = price * (1 - discount);
         UPDATE total = 1020 WHERE ID = 90;
         INSERT ROW (name = 'table', price = 10, discount = 0.05, total = 9.5);",
    )
    .unwrap();
    let sugs = suggest(&s, &Mem).unwrap();
    assert_eq!(sugs.len(), 1);
    let sug = &sugs[0];
    assert_eq!(sug.kind, RewriteKind::Fuse);
    assert_eq!((sug.start, sug.end), (0, 3));
    assert_eq!(
        sug.replacement[0].stmt.to_string(),
        "ADD COLUMN total AS IF(ID = 90, 1020, price * (1 - discount))"
    );
    let out = apply_suggestion(&s, sug).unwrap();
    assert_eq!(out.len(), 2);
    assert_eq!(equivalence_check(&s, &out, &Mem), Verdict::Equal);
}

#[test]
fn fuse_leaves_unrelated_statements() {
    let s = script(&[
        "LOAD 'lineitem.csv';".into(),
        "ADD COLUMN total;".into(),
        "UPDATE price = 1;".into(),
        "UPDATE total = 2 WHERE price > 10;".into(),
    ]);
    assert!(fuse(&s).is_empty());
}

#[test]
fn fuse_respects_later_writes_to_condition_columns() {
    let s = script(&[
        "LOAD 'lineitem.csv';".into(),
        "UPDATE discount = 0;".into(),
        "UPDATE discount = 0.5 WHERE price > 500;".into(),
        "UPDATE price = 1;".into(),
    ]);
    assert!(fuse(&s).is_empty());
}

#[test]
fn equivalence_reports_difference_and_failure() {
    let s = ten_updates();
    let mut t = s.clone();
    t.steps.pop();
    assert!(matches!(equivalence_check(&s, &t, &Mem), Verdict::Different { .. }));
    let mut bad = s.clone();
    bad.source = Source::file("missing.csv");
    assert!(matches!(equivalence_check(&s, &bad, &Mem), Verdict::Incomparable { .. }));
    assert_eq!(equivalence_check(&s, &s, &Mem), Verdict::Equal);
    assert_eq!(suggest(&bad, &Mem).unwrap_err().code(), "INCOMPARABLE");
}

#[test]
fn stale_suggestions_are_refused() {
    let s = ten_updates();
    let sug = reroll(&s).remove(0);
    let mut changed = s.clone();
    changed.steps[3] = Step::new(parse_statement("UPDATE A = 4 WHERE ROWID = 4").unwrap());
    assert_eq!(apply_suggestion(&changed, &sug).unwrap_err(), RewriteError::Stale);
}

#[test]
fn generalize_finds_price_predicate() {
    let s = script(&[
        "LOAD 'orders.csv';".into(),
        "ADD COLUMN total AS price * qty;".into(),
        "UPDATE total = 1020 WHERE ID = 1;".into(),
        "UPDATE total = 1020 WHERE ID = 3;".into(),
    ]);
    let state = final_state(&s);
    let sugs = generalize(&s, &state).unwrap();
    assert!(!sugs.is_empty());
    let best = &sugs[0];
    assert!(best.data_dependent && !best.verified);
    let ev = best.evidence.as_ref().unwrap();
    assert_eq!(ev.predicate, "price = 1200");
    assert_eq!(ev.rows, vec![RowId(1), RowId(3)]);
    assert_eq!(best.replacement[0].stmt.to_string(), "UPDATE total = 1020 WHERE price = 1200");
    // Every candidate selects exactly the edited rows.
    for sug in &sugs {
        let out = apply_suggestion(&s, sug).unwrap();
        assert_eq!(equivalence_check(&s, &out, &Mem), Verdict::Equal, "{}", render_script(&out));
    }
}

#[test]
fn generalize_fits_affine_values() {
    // Totals of 0.85 * price on the rows with qty between 2 and 4.
    let s = script(&[
        "LOAD 'orders.csv';".into(),
        "ADD COLUMN total;".into(),
        "UPDATE total = 1020 WHERE ROWID = 1;".into(),
        "UPDATE total = 85 WHERE ROWID = 2;".into(),
        "UPDATE total = 25.5 WHERE ROWID = 4;".into(),
    ]);
    let state = final_state(&s);
    let sugs = generalize(&s, &state).unwrap();
    let best = &sugs[0];
    let fit = best.evidence.as_ref().unwrap().affine.clone().unwrap();
    assert_eq!(fit.column, "price");
    assert_eq!((fit.a, fit.b), (0.85, 0.0));
    let Statement::Update { formula, .. } = &best.replacement.last().unwrap().stmt else {
        panic!("expected an update");
    };
    assert_eq!(formula.script_text(), "0.85 * price");
    assert_eq!(best.evidence.as_ref().unwrap().predicate, "qty BETWEEN 2 AND 4");
    // The fitted formula yields floats where the edits wrote integers, so
    // compare numerically.
    let (a, b) = (final_state(&s), final_state(&apply_suggestion(&s, best).unwrap()));
    for ((_, x), (_, y)) in a.position_values().into_iter().zip(b.position_values()) {
        match (x.as_f64(), y.as_f64()) {
            (Some(x), Some(y)) => assert!((x - y).abs() < 1e-9),
            _ => assert_eq!(x, y),
        }
    }
}

#[test]
fn generalize_needs_two_singletons_and_a_separator() {
    let one = script(&["LOAD 'orders.csv';".into(), "UPDATE qty = 0 WHERE ID = 1;".into()]);
    assert!(generalize(&one, &final_state(&one)).unwrap().is_empty());
    // Rows 1 and 3 are identical to row 6 in every other column.
    let dup = script(&[
        "LOAD 'orders.csv';".into(),
        "INSERT ROW (ID = 1, name = 'desk', price = 1200, qty = 2);".into(),
        "UPDATE name = 'x' WHERE ROWID = 1;".into(),
        "UPDATE name = 'x' WHERE ROWID = 2;".into(),
    ]);
    let e = generalize(&dup, &final_state(&dup)).unwrap_err();
    assert_eq!(e.code(), "NO_CANDIDATE");
}

#[test]
fn suggestion_json_shape() {
    let sug = reroll(&ten_updates()).remove(0);
    let v = serde_json::to_value(&sug).unwrap();
    assert_eq!(v["kind"], "REROLL");
    assert_eq!(v["replacement"][0]["statement"], "UPDATE A = 3 WHERE ROWID BETWEEN 1 AND 10");
    let back: RewriteSuggestion = serde_json::from_value(v).unwrap();
    assert_eq!(back, sug);
}

fn interleaved() -> impl Strategy<Value = Vec<(char, u32)>> {
    let fam_a = prop::sample::subsequence((1u32..=12).collect::<Vec<_>>(), 1..6);
    let fam_b = prop::sample::subsequence((1u32..=12).collect::<Vec<_>>(), 1..6);
    (fam_a, fam_b, any::<u64>()).prop_map(|(a, b, seed)| {
        let mut items: Vec<(char, u32)> = a.into_iter().map(|r| ('A', r)).chain(b.into_iter().map(|r| ('B', r))).collect();
        // Deterministic shuffle from the seed.
        let mut x = seed | 1;
        for i in (1..items.len()).rev() {
            x ^= x << 13;
            x ^= x >> 7;
            x ^= x << 17;
            items.swap(i, (x % (i as u64 + 1)) as usize);
        }
        items
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    /// Every reroll candidate over two interleaved families replays to the
    /// same sheet, and applying them all leaves nothing to reroll.
    #[test]
    fn reroll_candidates_preserve_output(items in interleaved(), k in 0i64..4) {
        let mut lines = vec!["LOAD 'twelve.csv';".to_string()];
        for (fam, r) in &items {
            let rhs = if *fam == 'A' { format!("{k}") } else { "A + 1".to_string() };
            lines.push(format!("UPDATE {fam} = {rhs} WHERE ROWID = {r};"));
        }
        let mut s = script(&lines);
        for sug in reroll(&s) {
            let out = apply_suggestion(&s, &sug).unwrap();
            prop_assert_eq!(equivalence_check(&s, &out, &Mem), Verdict::Equal);
            prop_assert!(out.len() < s.len());
        }
        while let Some(sug) = suggest(&s, &Mem).unwrap().into_iter().next() {
            let out = apply_suggestion(&s, &sug).unwrap();
            prop_assert_eq!(equivalence_check(&s, &out, &Mem), Verdict::Equal);
            s = out;
        }
        prop_assert!(reroll(&s).is_empty());
    }

    /// Fusion over conditions on loaded columns never changes the result.
    #[test]
    fn fuse_candidates_preserve_output(
        steps in prop::collection::vec((0u8..4, 0i64..1300, 0i64..9), 1..5),
        add in any::<bool>(),
    ) {
        let mut lines = vec!["LOAD 'lineitem.csv';".to_string()];
        if add {
            lines.push("ADD COLUMN total;".into());
        } else {
            lines.push("ADD COLUMN total AS 0;".into());
        }
        for (kind, threshold, k) in steps {
            lines.push(match kind {
                0 => format!("UPDATE total = price * {k};"),
                1 => format!("UPDATE total = VALUE + {k} WHERE price > {threshold};"),
                2 => format!("UPDATE total = {k} WHERE ID = {} OR discount = 0;", threshold % 100),
                _ => format!("UPDATE total = IF(VALUE > {k}, VALUE, {k}) WHERE name <> 'desk';"),
            });
        }
        let s = script(&lines);
        let sugs = fuse(&s);
        prop_assert!(!sugs.is_empty());
        for sug in sugs {
            let out = apply_suggestion(&s, &sug).unwrap();
            prop_assert_eq!(equivalence_check(&s, &out, &Mem), Verdict::Equal, "{}", render_script(&out));
        }
    }

    /// Generalization candidates select exactly the edited rows.
    #[test]
    fn generalize_matches_targets(rows in prop::sample::subsequence(vec![1u64, 2, 3, 4, 5], 2..4)) {
        let mut lines = vec!["LOAD 'orders.csv';".to_string()];
        lines.extend(rows.iter().map(|r| format!("UPDATE name = 'x' WHERE ROWID = {r};")));
        let s = script(&lines);
        let state = final_state(&s);
        if let Ok(sugs) = generalize(&s, &state) {
            for sug in sugs {
                let ev = sug.evidence.unwrap();
                let want: Vec<RowId> = rows.iter().map(|r| RowId(*r)).collect();
                prop_assert_eq!(&ev.rows, &want);
                let f = crate::formula::parse_formula_text(&ev.predicate, None).unwrap();
                let hit: Vec<RowId> = (0..state.height())
                    .filter(|&r| crate::formula::evaluate(&f, &state, crate::model::Pos::new(0, r)).is_true())
                    .map(|r| state.coords().rows()[r])
                    .collect();
                prop_assert_eq!(hit, want);
            }
        }
    }
}
