use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;
use vizual_core::formula::parse_formula;
use vizual_core::model::Pos;
use vizual_service::{router, Store, SCHEMA};

const PEOPLE: &str = "name,amount,running\nAlice,10,\nBob,4,\nCarol,8,\nDave,9,\n";
const LINEITEM: &str = "ID,name,price,discount\n7,chair,100,0.1\n90,desk,1200,0.15\n12,lamp,30,0\n";

struct Client {
    app: Router,
}

/// Response body checked against the named schema definition.
fn check(def: &str, v: &Value) {
    let mut schema: Value = serde_json::from_str(SCHEMA).unwrap();
    schema["$ref"] = json!(format!("#/$defs/{def}"));
    let validator = jsonschema::validator_for(&schema).unwrap();
    if let Err(e) = validator.validate(v) {
        panic!("{def} does not match the schema: {e}\n{v:#}");
    }
}

impl Client {
    fn new() -> Self {
        Client {
            app: router(Store::open(None).unwrap()),
        }
    }

    async fn call(&self, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
        let req = Request::builder()
            .method(method)
            .uri(uri)
            .header("content-type", "application/json")
            .body(body.map_or_else(Body::empty, |b| Body::from(b.to_string())))
            .unwrap();
        let res = self.app.clone().oneshot(req).await.unwrap();
        let status = res.status();
        let bytes = res.into_body().collect().await.unwrap().to_bytes();
        let v = if bytes.is_empty() {
            Value::Null
        } else {
            serde_json::from_slice(&bytes).unwrap_or_else(|_| panic!("non-JSON body: {}", String::from_utf8_lossy(&bytes)))
        };
        if !status.is_success() {
            check("Error", &v);
        }
        (status, v)
    }

    async fn ok(&self, method: &str, uri: &str, body: Option<Value>, def: &str) -> Value {
        let (status, v) = self.call(method, uri, body).await;
        assert!(status.is_success(), "{method} {uri}: {status} {v:#}");
        check(def, &v);
        v
    }

    async fn err(&self, method: &str, uri: &str, body: Option<Value>, want: StatusCode, code: &str) -> Value {
        let (status, v) = self.call(method, uri, body).await;
        assert_eq!((status, v["code"].as_str().unwrap_or("")), (want, code), "{v:#}");
        v
    }

    /// Notebook `id` with one page `p` over `file`.
    async fn page(&self, id: &str, file: &str, content: &str) {
        self.ok(
            "POST",
            "/notebooks",
            Some(json!({"id": id, "fixtures": {file: content}})),
            "NotebookSummary",
        )
        .await;
        self.ok(
            "POST",
            &format!("/notebooks/{id}/pages"),
            Some(json!({"name": "p", "source": {"kind": "file", "path": file, "header": true, "infer": true}})),
            "PageSummary",
        )
        .await;
    }

    async fn gestures(&self, id: &str, gestures: Value) -> Value {
        self.ok(
            "POST",
            &format!("/notebooks/{id}/pages/p/gestures"),
            Some(json!({ "gestures": gestures })),
            "Mutation",
        )
        .await
    }

    async fn statements(&self, id: &str, texts: &[&str]) -> Value {
        let steps: Vec<Value> = texts.iter().map(|t| json!({ "statement": t })).collect();
        self.ok(
            "POST",
            &format!("/notebooks/{id}/pages/p/statements"),
            Some(json!({ "statements": steps })),
            "Mutation",
        )
        .await
    }

    async fn window(&self, id: &str, query: &str) -> Value {
        self.ok("GET", &format!("/notebooks/{id}/pages/p/window{query}"), None, "SheetWindow")
            .await
    }

    async fn export(&self, id: &str) -> String {
        let (s, v) = self.call("GET", &format!("/notebooks/{id}/export"), None).await;
        assert_eq!(s, StatusCode::OK);
        check("NotebookFile", &v);
        v.to_string()
    }
}

fn pos(col: usize, row: usize) -> Value {
    json!({"col": col, "row": row})
}

fn edit(col: usize, row: usize, text: &str) -> Value {
    json!({"kind": "edit_cell", "pos": pos(col, row), "text": text})
}

/// The running-total sheet built through gestures.
async fn running_total(c: &Client, id: &str) {
    c.page(id, "people.csv", PEOPLE).await;
    c.gestures(id, json!([edit(2, 0, "=B1"), edit(2, 1, "=B2+C1")])).await;
    let m = c
        .gestures(
            id,
            json!([{"kind": "copy_paste", "source": [pos(2, 1), pos(2, 1)], "target": [pos(2, 2), pos(2, 3)]}]),
        )
        .await;
    assert_eq!(m["applied"].as_array().unwrap().len(), 2);
}

/// (name, formula text, value) per row of column C.
fn rows_of(w: &Value) -> Vec<(String, String, i64)> {
    w["cells"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| {
            (
                r[0]["value"]["value"].as_str().unwrap().to_string(),
                r[2]["formula"].as_str().unwrap().to_string(),
                r[2]["value"]["value"].as_i64().unwrap(),
            )
        })
        .collect()
}

fn owned(rows: &[(&str, &str, i64)]) -> Vec<(String, String, i64)> {
    rows.iter().map(|(a, b, c)| (a.to_string(), b.to_string(), *c)).collect()
}

#[tokio::test]
async fn initial_window_and_drag() {
    let c = Client::new();
    running_total(&c, "rt").await;
    let w = c.window("rt", "").await;
    assert_eq!((w["total_columns"].as_u64(), w["total_rows"].as_u64()), (Some(3), Some(4)));
    assert_eq!(
        rows_of(&w),
        owned(&[
            ("Alice", "=B1", 10),
            ("Bob", "=B2+C1", 14),
            ("Carol", "=B3+C2", 22),
            ("Dave", "=B4+C3", 31)
        ])
    );
    // Every non-literal cell's formula bar text parses at its position.
    for (r, row) in w["cells"].as_array().unwrap().iter().enumerate() {
        for (col, cell) in row.as_array().unwrap().iter().enumerate() {
            if let Some(f) = cell["formula"].as_str() {
                parse_formula(f, Pos::new(col, r)).unwrap();
            }
        }
    }
    // Drag Carol (row id 3) above Bob.
    c.gestures("rt", json!([{"kind": "drag_rows", "rows": [3], "to": 1}])).await;
    let script = c.ok("GET", "/notebooks/rt/pages/p/script", None, "ScriptText").await;
    assert!(script["text"].as_str().unwrap().contains("REORDER ROWS (3, 2)"), "{script:#}");
    assert_eq!(
        rows_of(&c.window("rt", "").await),
        owned(&[
            ("Alice", "=B1", 10),
            ("Carol", "=B2+C3", 22),
            ("Bob", "=B3+C1", 14),
            ("Dave", "=B4+C2", 31)
        ])
    );
}

#[tokio::test]
async fn mutation_tail_mirrors_the_script() {
    let c = Client::new();
    c.page("m", "people.csv", PEOPLE).await;
    let before = c.ok("GET", "/notebooks/m/pages/p/statements", None, "Statements").await;
    let m = c
        .gestures(
            "m",
            json!([{"kind": "copy_paste", "source": [pos(1, 0), pos(1, 0)], "target": [pos(1, 1), pos(1, 3)]}]),
        )
        .await;
    let applied = m["applied"].as_array().unwrap();
    assert_eq!(applied.len(), 3);
    let groups: Vec<&Value> = applied.iter().map(|s| &s["group"]).collect();
    assert!(groups.iter().all(|g| *g == groups[0] && g.is_u64()));
    assert_eq!(m["script_tail"], m["applied"]);
    assert_eq!(m["tail_start"], json!(0));
    let after = c.ok("GET", "/notebooks/m/pages/p/statements", None, "Statements").await;
    let n = before["statements"].as_array().unwrap().len();
    assert_eq!(after["statements"].as_array().unwrap()[n..], applied[..]);
    assert_eq!(after["script_hash"], m["script_hash"]);

    // An empty gesture list changes nothing.
    let m = c.gestures("m", json!([])).await;
    assert_eq!(m["applied"], json!([]));
    assert_eq!(m["script_hash"], after["script_hash"]);
}

#[tokio::test]
async fn cell_edit_becomes_one_singleton_update() {
    let c = Client::new();
    c.page("li", "lineitem.csv", LINEITEM).await;
    c.statements("li", &["ADD COLUMN total", "UPDATE total = price * (1 - discount)"])
        .await;
    let m = c.gestures("li", json!([edit(4, 1, "1020")])).await;
    let applied = m["applied"].as_array().unwrap();
    assert_eq!(applied.len(), 1);
    let text = applied[0]["statement"].as_str().unwrap();
    // The edited row is identified by its row id; here that is the row
    // whose ID is 90.
    assert_eq!(text, "UPDATE total = 1020 WHERE ROWID = 2");
    let w = c.window("li", "?rows=1:2").await;
    assert_eq!(w["cells"][0][0]["value"], json!({"kind": "int", "value": 90}));
    assert_eq!(w["cells"][0][4]["value"], json!({"kind": "int", "value": 1020}));
}

#[tokio::test]
async fn sql_export_of_the_example_page() {
    let c = Client::new();
    c.page("ex", "lineitem.csv", LINEITEM).await;
    c.statements(
        "ex",
        &[
            "ADD COLUMN total",
            "UPDATE total = price * (1 - discount)",
            "UPDATE total = 1020 WHERE ID = 90",
            "INSERT ROW (name = 'table', price = 10, discount = 0.05, total = 9.5)",
        ],
    )
    .await;
    let sql = c.ok("GET", "/notebooks/ex/pages/p/sql", None, "SqlText").await;
    let text = sql["text"].as_str().unwrap();
    let q = vizual_core::sql::parse_query(text).unwrap();
    assert!(q.to_string().contains("CASE WHEN ID = 90 THEN 1020 ELSE price * (1 - discount) END"), "{text}");
    assert!(text.contains("UNION ALL"), "{text}");
    assert_eq!(sql["sources"][0]["table"], json!("lineitem"));
}

#[tokio::test]
async fn reroll_suggestion_round_trip() {
    let c = Client::new();
    let csv: String = std::iter::once("A,B\n".to_string())
        .chain((1..=12).map(|i| format!("{i},{}\n", i * 2)))
        .collect();
    c.page("r", "t.csv", &csv).await;
    let texts: Vec<String> = (1..=10).map(|i| format!("UPDATE A = 3 WHERE ROWID = {i}")).collect();
    let texts: Vec<&str> = texts.iter().map(String::as_str).collect();
    c.statements("r", &texts).await;
    let s = c.ok("GET", "/notebooks/r/pages/p/suggestions", None, "Suggestions").await;
    let list = s["suggestions"].as_array().unwrap();
    assert_eq!(list.len(), 1, "{s:#}");
    assert_eq!(list[0]["kind"], json!("REROLL"));
    assert_eq!(list[0]["verified"], json!(true));
    let before = c.window("r", "").await;
    let m = c
        .ok(
            "POST",
            "/notebooks/r/pages/p/suggestions",
            Some(json!({"id": list[0]["id"]})),
            "Mutation",
        )
        .await;
    assert_eq!(m["tail_start"], json!(0));
    assert_eq!(
        m["script_tail"],
        json!([{"statement": "UPDATE A = 3 WHERE ROWID BETWEEN 1 AND 10"}])
    );
    assert_eq!(c.window("r", "").await, before);
    let s = c.ok("GET", "/notebooks/r/pages/p/suggestions", None, "Suggestions").await;
    assert_eq!(s["suggestions"], json!([]));
    c.err(
        "POST",
        "/notebooks/r/pages/p/suggestions",
        Some(json!({"id": list[0]["id"]})),
        StatusCode::NOT_FOUND,
        "UNKNOWN_SUGGESTION",
    )
    .await;
}

#[tokio::test]
async fn generalizations_are_opt_in() {
    let c = Client::new();
    c.page("g", "lineitem.csv", LINEITEM).await;
    c.statements("g", &["UPDATE discount = 0.2 WHERE ID = 7", "UPDATE discount = 0.2 WHERE ID = 90"])
        .await;
    let plain = c.ok("GET", "/notebooks/g/pages/p/suggestions", None, "Suggestions").await;
    assert!(plain["suggestions"]
        .as_array()
        .unwrap()
        .iter()
        .all(|s| s["kind"] != json!("GENERALIZE")));
    let s = c
        .ok("GET", "/notebooks/g/pages/p/suggestions?generalize=true", None, "Suggestions")
        .await;
    let g: Vec<&Value> = s["suggestions"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|s| s["kind"] == json!("GENERALIZE"))
        .collect();
    assert!(!g.is_empty(), "{s:#}");
    assert!(g.iter().all(|s| s["data_dependent"] == json!(true) && s["evidence"].is_object()));
}

#[tokio::test]
async fn windows_clamp_and_tile() {
    let c = Client::new();
    running_total(&c, "w").await;
    let full = c.window("w", "").await;
    let w = c.window("w", "?cols=1:1&rows=0:4").await;
    assert_eq!(w["columns"], json!([]));
    assert_eq!(w["rows"].as_array().unwrap().len(), 4);
    assert!(w["cells"].as_array().unwrap().iter().all(|r| r == &json!([])));
    let w = c.window("w", "?cols=2:99&rows=3:").await;
    assert_eq!((w["col_range"].clone(), w["row_range"].clone()), (json!([2, 3]), json!([3, 4])));
    let w = c.window("w", "?cols=7:9").await;
    assert_eq!(w["col_range"], json!([3, 3]));
    for bad in ["?rows=-1:2", "?rows=3:1", "?cols=x"] {
        c.err("GET", &format!("/notebooks/w/pages/p/window{bad}"), None, StatusCode::UNPROCESSABLE_ENTITY, "INVALID_RANGE")
            .await;
    }
    // Every split of the sheet into four tiles covers each cell exactly once.
    for cs in 0..=3 {
        for rs in 0..=4 {
            let mut seen = vec![vec![0; 3]; 4];
            for (c0, c1) in [(0, cs), (cs, 3)] {
                for (r0, r1) in [(0, rs), (rs, 4)] {
                    let t = c.window("w", &format!("?cols={c0}:{c1}&rows={r0}:{r1}")).await;
                    for (i, row) in t["cells"].as_array().unwrap().iter().enumerate() {
                        for (j, cell) in row.as_array().unwrap().iter().enumerate() {
                            assert_eq!(cell, &full["cells"][r0 + i][c0 + j]);
                            seen[r0 + i][c0 + j] += 1;
                        }
                    }
                }
            }
            assert!(seen.iter().flatten().all(|&n| n == 1), "split {cs},{rs}: {seen:?}");
        }
    }
}

#[tokio::test]
async fn errors_have_stable_codes_and_statuses() {
    let c = Client::new();
    c.page("e", "people.csv", PEOPLE).await;
    let nf = StatusCode::NOT_FOUND;
    let bad = StatusCode::UNPROCESSABLE_ENTITY;
    let conflict = StatusCode::CONFLICT;
    c.err("GET", "/notebooks/zz/pages/p/window", None, nf, "UNKNOWN_NOTEBOOK").await;
    c.err("GET", "/notebooks/e/pages/q/window", None, nf, "UNKNOWN_PAGE").await;
    c.err("GET", "/notebooks/e/pages/p/script?branch=b", None, nf, "UNKNOWN_BRANCH").await;
    c.err(
        "POST",
        "/notebooks/e/pages/p/gestures",
        Some(json!({"gestures": [edit(9, 9, "1")]})),
        bad,
        "EMPTY_TARGET",
    )
    .await;
    c.err(
        "POST",
        "/notebooks/e/pages/p/gestures",
        Some(json!({"gestures": [{"kind": "wave"}]})),
        bad,
        "INVALID_PAYLOAD",
    )
    .await;
    c.err(
        "POST",
        "/notebooks/e/pages/p/statements",
        Some(json!({"statements": [{"statement": "UPDATE WHERE"}]})),
        bad,
        "INVALID_PAYLOAD",
    )
    .await;
    let v = c
        .err(
            "POST",
            "/notebooks/e/pages/p/statements",
            Some(json!({"statements": [{"statement": "UPDATE nope = 1"}]})),
            conflict,
            "UNKNOWN_COLUMN",
        )
        .await;
    assert_eq!((v["page"].clone(), v["statement"].clone()), (json!("p"), json!(0)));
    c.err(
        "POST",
        "/notebooks/e/pages",
        Some(json!({"name": "p", "source": {"kind": "page", "name": "p"}})),
        conflict,
        "DUPLICATE_PAGE_NAME",
    )
    .await;
    c.err(
        "POST",
        "/notebooks/e/pages",
        Some(json!({"name": "x", "source": {"kind": "file", "path": "../etc/passwd", "header": true, "infer": true}})),
        bad,
        "INVALID_PATH",
    )
    .await;
    c.err("POST", "/notebooks", Some(json!({"id": "e"})), conflict, "DUPLICATE_NOTEBOOK").await;
    c.err("POST", "/notebooks", Some(json!({"id": "a/b"})), bad, "INVALID_ID").await;
    c.err(
        "POST",
        "/notebooks/e/branches",
        Some(json!({"page": "p", "index": 0, "name": "main"})),
        conflict,
        "DUPLICATE_BRANCH_NAME",
    )
    .await;
    // None of the failures changed anything.
    let s = c.ok("GET", "/notebooks/e/pages/p/statements", None, "Statements").await;
    assert_eq!(s["statements"], json!([]));
}

#[tokio::test]
async fn reads_never_mutate() {
    let c = Client::new();
    running_total(&c, "ro").await;
    c.ok(
        "POST",
        "/notebooks/ro/branches",
        Some(json!({"page": "p", "index": 1, "name": "alt"})),
        "NotebookSummary",
    )
    .await;
    let before = c.export("ro").await;
    for (uri, def) in [
        ("/notebooks", "NotebookList"),
        ("/notebooks/ro", "NotebookSummary"),
        ("/notebooks/ro/pages/p/statements", "Statements"),
        ("/notebooks/ro/pages/p/statements?branch=alt", "Statements"),
        ("/notebooks/ro/pages/p/window?cols=0:2", "SheetWindow"),
        ("/notebooks/ro/pages/p/script", "ScriptText"),
        ("/notebooks/ro/pages/p/suggestions?generalize=true", "Suggestions"),
    ] {
        c.ok("GET", uri, None, def).await;
        assert_eq!(c.export("ro").await, before, "{uri} mutated the notebook");
    }
    // The running total cannot be compiled without positional mode.
    c.err("GET", "/notebooks/ro/pages/p/sql", None, StatusCode::CONFLICT, "POSITIONAL_NOT_COMPILABLE").await;
    assert_eq!(c.export("ro").await, before);
}

#[tokio::test]
async fn branches_are_independent() {
    let c = Client::new();
    running_total(&c, "b").await;
    let nb = c
        .ok(
            "POST",
            "/notebooks/b/branches",
            Some(json!({"from": "main", "page": "p", "index": 0, "name": "raw"})),
            "NotebookSummary",
        )
        .await;
    assert_eq!(nb["branches"][1]["pages"][0]["statements"], json!(0));
    let w = c.window("b", "?branch=raw").await;
    assert_eq!(w["cells"][0][2]["value"], json!({"kind": "null"}));
    c.ok(
        "POST",
        "/notebooks/b/pages/p/statements?branch=raw",
        Some(json!({"statements": [{"statement": "SORT ROWS amount"}]})),
        "Mutation",
    )
    .await;
    let main = c.ok("GET", "/notebooks/b/pages/p/statements", None, "Statements").await;
    assert_eq!(main["statements"].as_array().unwrap().len(), 4);
}

#[tokio::test]
async fn imported_notebooks_replay_to_the_same_state() {
    let c = Client::new();
    running_total(&c, "src").await;
    let file: Value = serde_json::from_str(&c.export("src").await).unwrap();
    let a = c.ok("GET", "/notebooks/src", None, "NotebookSummary").await;
    let b = c
        .ok("POST", "/notebooks", Some(json!({"id": "copy", "notebook": file})), "NotebookSummary")
        .await;
    assert_eq!(a["content_hash"], b["content_hash"]);
    let mut tampered = file.clone();
    tampered["branches"][0]["pages"][0]["output_hash"] = json!("0");
    c.err(
        "POST",
        "/notebooks",
        Some(json!({"notebook": tampered})),
        StatusCode::CONFLICT,
        "OUTPUT_MISMATCH",
    )
    .await;
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_mutations_are_serialized() {
    let c = std::sync::Arc::new(Client::new());
    c.page("cc", "people.csv", PEOPLE).await;
    let mut tasks = Vec::new();
    for i in 0..16 {
        let c = c.clone();
        tasks.push(tokio::spawn(async move {
            let m = c.statements("cc", &[&format!("UPDATE amount = {i} WHERE ROWID = 1")]).await;
            m["tail_start"].as_u64().unwrap()
        }));
    }
    let mut starts = Vec::new();
    for t in tasks {
        starts.push(t.await.unwrap());
    }
    starts.sort_unstable();
    assert_eq!(starts, (0..16).collect::<Vec<u64>>());
}

#[tokio::test]
async fn data_dir_persists_notebooks() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("people.csv"), PEOPLE).unwrap();
    let c = Client {
        app: router(Store::open(Some(dir.path().to_path_buf())).unwrap()),
    };
    c.ok("POST", "/notebooks", Some(json!({"id": "d"})), "NotebookSummary").await;
    c.ok(
        "POST",
        "/notebooks/d/pages",
        Some(json!({"name": "p", "source": {"kind": "file", "path": "people.csv", "header": true, "infer": true}})),
        "PageSummary",
    )
    .await;
    c.statements("d", &["SORT ROWS amount DESC"]).await;
    let hash = c.ok("GET", "/notebooks/d", None, "NotebookSummary").await["content_hash"].clone();
    // The file on disk changes, the snapshot does not.
    std::fs::write(dir.path().join("people.csv"), "name,amount,running\nZed,1,\n").unwrap();
    let reopened = Client {
        app: router(Store::open(Some(dir.path().to_path_buf())).unwrap()),
    };
    let again = reopened.ok("GET", "/notebooks/d", None, "NotebookSummary").await;
    assert_eq!(again["content_hash"], hash);
}
