//! HTTP/JSON facade over notebooks.
//!
//! Routes (page routes take an optional `?branch=`, default `main`):
//!
//! | method | path | |
//! |---|---|---|
//! | GET, POST | `/notebooks` | list, create or import |
//! | GET | `/notebooks/{id}` | branches and page summaries |
//! | GET | `/notebooks/{id}/export` | the notebook file |
//! | POST | `/notebooks/{id}/pages` | add a page |
//! | POST | `/notebooks/{id}/branches` | fork a branch |
//! | GET, POST | `/notebooks/{id}/pages/{p}/statements` | read, append |
//! | POST | `/notebooks/{id}/pages/{p}/gestures` | append via gestures |
//! | GET | `/notebooks/{id}/pages/{p}/window?cols=a:b&rows=c:d` | sheet window |
//! | GET | `/notebooks/{id}/pages/{p}/script` | canonical text |
//! | GET | `/notebooks/{id}/pages/{p}/sql?positional=` | compiled query |
//! | GET, POST | `/notebooks/{id}/pages/{p}/suggestions` | list, accept |
//!
//! Field names are fixed by `schema/api.schema.json`.

mod error;
mod store;
mod window;

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use vizual_core::executor::{Diagnostic, Gesture};
use vizual_core::lang::{render_script, Source, Step};
use vizual_core::notebook::{Fixture, Notebook, MAIN};
use vizual_core::rewrite::RewriteSuggestion;
use vizual_core::sql::SourceTable;

pub use error::{ApiError, ErrorBody};
pub use store::Store;
pub use window::{CellPayload, ColumnHeader, RowHeader, SheetWindow};

/// The JSON schema of every request and response body.
pub const SCHEMA: &str = include_str!("../schema/api.schema.json");

type Shared = Arc<Store>;
type ApiResult<T> = Result<T, ApiError>;

pub fn router(store: Store) -> Router {
    let page = "/notebooks/{id}/pages/{page}";
    Router::new()
        .route("/notebooks", get(list_notebooks).post(create_notebook))
        .route("/notebooks/{id}", get(get_notebook))
        .route("/notebooks/{id}/export", get(export_notebook))
        .route("/notebooks/{id}/pages", post(add_page))
        .route("/notebooks/{id}/branches", post(create_branch))
        .route(&format!("{page}/statements"), get(get_statements).post(post_statements))
        .route(&format!("{page}/gestures"), post(post_gestures))
        .route(&format!("{page}/window"), get(get_window))
        .route(&format!("{page}/script"), get(get_script))
        .route(&format!("{page}/sql"), get(get_sql))
        .route(&format!("{page}/suggestions"), get(get_suggestions).post(accept_suggestion))
        .with_state(Arc::new(store))
}

/// Bodies are decoded here rather than by the `Json` extractor so that
/// malformed input gets the structured error body.
fn body<T: DeserializeOwned>(bytes: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(bytes).map_err(|e| ApiError::invalid("INVALID_PAYLOAD", e.to_string()))
}

#[derive(Debug, Default, Deserialize)]
struct BranchQuery {
    branch: Option<String>,
}

impl BranchQuery {
    fn name(&self) -> &str {
        self.branch.as_deref().unwrap_or(MAIN)
    }
}

#[derive(Debug, Serialize)]
pub struct PageSummary {
    pub name: String,
    pub source: Source,
    pub statements: usize,
    pub script_hash: String,
    pub output_hash: String,
    pub total_columns: usize,
    pub total_rows: usize,
}

#[derive(Debug, Serialize)]
pub struct BranchSummary {
    pub name: String,
    pub pages: Vec<PageSummary>,
}

#[derive(Debug, Serialize)]
pub struct NotebookSummary {
    pub id: String,
    pub content_hash: String,
    pub branches: Vec<BranchSummary>,
}

fn summary(id: &str, nb: &Notebook) -> NotebookSummary {
    NotebookSummary {
        id: id.to_string(),
        content_hash: nb.content_hash(),
        branches: nb
            .branches
            .iter()
            .map(|b| BranchSummary {
                name: b.name.clone(),
                pages: b
                    .pages
                    .iter()
                    .map(|p| PageSummary {
                        name: p.name.clone(),
                        source: p.script.source.clone(),
                        statements: p.script.len(),
                        script_hash: p.script.content_hash(),
                        output_hash: p.output.content_hash(),
                        total_columns: p.output.width(),
                        total_rows: p.output.height(),
                    })
                    .collect(),
            })
            .collect(),
    }
}

#[derive(Debug, Serialize)]
struct NotebookList {
    notebooks: Vec<String>,
}

async fn list_notebooks(State(store): State<Shared>) -> Json<NotebookList> {
    Json(NotebookList { notebooks: store.ids() })
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateNotebook {
    id: Option<String>,
    /// Inline file snapshots, path to CSV text.
    #[serde(default)]
    fixtures: std::collections::BTreeMap<String, String>,
    /// A notebook file to import instead of starting empty.
    notebook: Option<serde_json::Value>,
}

async fn create_notebook(State(store): State<Shared>, bytes: Bytes) -> ApiResult<(StatusCode, Json<NotebookSummary>)> {
    let req: CreateNotebook = body(&bytes)?;
    let mut nb = match &req.notebook {
        Some(v) => Notebook::from_json(&v.to_string())?,
        None => Notebook::new(),
    };
    for (path, content) in req.fixtures {
        if !store::valid_file_path(&path) {
            return Err(ApiError::invalid("INVALID_PATH", format!("'{path}' is not a relative path")));
        }
        nb.fixtures.insert(path, Fixture::new(content));
    }
    let id = req.id.unwrap_or_else(|| uuid::Uuid::new_v4().simple().to_string());
    let out = summary(&id, &nb);
    store.insert(&id, nb).await?;
    Ok((StatusCode::CREATED, Json(out)))
}

async fn get_notebook(State(store): State<Shared>, Path(id): Path<String>) -> ApiResult<Json<NotebookSummary>> {
    Ok(Json(summary(&id, &*store.get(&id)?)))
}

async fn export_notebook(
    State(store): State<Shared>,
    Path(id): Path<String>,
) -> ApiResult<([(&'static str, &'static str); 1], String)> {
    Ok(([("content-type", "application/json")], store.get(&id)?.to_json()))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AddPage {
    name: String,
    source: Source,
    branch: Option<String>,
}

async fn add_page(
    State(store): State<Shared>,
    Path(id): Path<String>,
    bytes: Bytes,
) -> ApiResult<(StatusCode, Json<PageSummary>)> {
    let req: AddPage = body(&bytes)?;
    if let Source::File { path, .. } = &req.source {
        if !store::valid_file_path(path) {
            return Err(ApiError::invalid("INVALID_PATH", format!("'{path}' is not a relative path")));
        }
    }
    let branch = req.branch.unwrap_or_else(|| MAIN.to_string());
    let files = store.files();
    let (_, nb) = store
        .mutate(&id, |nb| Ok(nb.add_page(&branch, &req.name, req.source, &files)?))
        .await?;
    let page = summary(&id, &nb)
        .branches
        .into_iter()
        .find(|b| b.name == branch)
        .and_then(|b| b.pages.into_iter().find(|p| p.name == req.name))
        .expect("page was just added");
    Ok((StatusCode::CREATED, Json(page)))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateBranch {
    from: Option<String>,
    page: String,
    /// Statements of `page` to keep.
    index: usize,
    name: String,
}

async fn create_branch(
    State(store): State<Shared>,
    Path(id): Path<String>,
    bytes: Bytes,
) -> ApiResult<(StatusCode, Json<NotebookSummary>)> {
    let req: CreateBranch = body(&bytes)?;
    let from = req.from.unwrap_or_else(|| MAIN.to_string());
    let (_, nb) = store
        .mutate(&id, |nb| Ok(nb.create_branch(&from, &req.page, req.index, &req.name)?))
        .await?;
    Ok((StatusCode::CREATED, Json(summary(&id, &nb))))
}

#[derive(Debug, Serialize)]
pub struct Statements {
    pub statements: Vec<Step>,
    pub script_hash: String,
}

async fn get_statements(
    State(store): State<Shared>,
    Path((id, page)): Path<(String, String)>,
    Query(q): Query<BranchQuery>,
) -> ApiResult<Json<Statements>> {
    let nb = store.get(&id)?;
    let p = nb.page(q.name(), &page)?;
    Ok(Json(Statements {
        statements: p.script.steps.clone(),
        script_hash: p.script.content_hash(),
    }))
}

/// Result of a mutation. `script_tail` is the page's new script from
/// `tail_start` on; everything before `tail_start` is unchanged.
#[derive(Debug, Serialize)]
pub struct Mutation {
    pub applied: Vec<Step>,
    pub tail_start: usize,
    pub script_tail: Vec<Step>,
    pub diagnostics: Vec<Diagnostic>,
    pub script_hash: String,
}

fn mutation(before: &[Step], after: &[Step], applied: Vec<Step>, diagnostics: Vec<Diagnostic>, hash: String) -> Mutation {
    let common = before.iter().zip(after).take_while(|(a, b)| a == b).count();
    Mutation {
        applied,
        tail_start: common,
        script_tail: after[common..].to_vec(),
        diagnostics,
        script_hash: hash,
    }
}

/// Run a page mutation and describe how the page's script changed.
async fn mutate_page(
    store: &Store,
    id: &str,
    branch: &str,
    page: &str,
    f: impl FnOnce(&mut Notebook) -> ApiResult<(Vec<Step>, Vec<Diagnostic>)>,
) -> ApiResult<Json<Mutation>> {
    let ((before, applied, diagnostics), nb) = store
        .mutate(id, |nb| {
            let before = nb.page(branch, page)?.script.steps.clone();
            let (applied, diagnostics) = f(nb)?;
            Ok((before, applied, diagnostics))
        })
        .await?;
    let script = &nb.page(branch, page)?.script;
    Ok(Json(mutation(&before, &script.steps, applied, diagnostics, script.content_hash())))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AppendStatements {
    statements: Vec<Step>,
}

async fn post_statements(
    State(store): State<Shared>,
    Path((id, page)): Path<(String, String)>,
    Query(q): Query<BranchQuery>,
    bytes: Bytes,
) -> ApiResult<Json<Mutation>> {
    let req: AppendStatements = body(&bytes)?;
    mutate_page(&store, &id, q.name(), &page, |nb| {
        let d = nb.append_steps(q.name(), &page, req.statements.clone())?;
        Ok((req.statements, d))
    })
    .await
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ApplyGestures {
    gestures: Vec<Gesture>,
}

async fn post_gestures(
    State(store): State<Shared>,
    Path((id, page)): Path<(String, String)>,
    Query(q): Query<BranchQuery>,
    bytes: Bytes,
) -> ApiResult<Json<Mutation>> {
    let req: ApplyGestures = body(&bytes)?;
    mutate_page(&store, &id, q.name(), &page, |nb| {
        Ok(nb.apply_gestures(q.name(), &page, &req.gestures)?)
    })
    .await
}

#[derive(Debug, Deserialize)]
struct WindowQuery {
    branch: Option<String>,
    cols: Option<String>,
    rows: Option<String>,
}

async fn get_window(
    State(store): State<Shared>,
    Path((id, page)): Path<(String, String)>,
    Query(q): Query<WindowQuery>,
) -> ApiResult<Json<SheetWindow>> {
    let cols = window::parse_range(q.cols.as_deref(), "cols")?;
    let rows = window::parse_range(q.rows.as_deref(), "rows")?;
    let nb = store.get(&id)?;
    let p = nb.page(q.branch.as_deref().unwrap_or(MAIN), &page)?;
    Ok(Json(window::window(&p.output, cols, rows)))
}

#[derive(Debug, Serialize)]
pub struct ScriptText {
    pub text: String,
    pub script_hash: String,
}

async fn get_script(
    State(store): State<Shared>,
    Path((id, page)): Path<(String, String)>,
    Query(q): Query<BranchQuery>,
) -> ApiResult<Json<ScriptText>> {
    let nb = store.get(&id)?;
    let p = nb.page(q.name(), &page)?;
    Ok(Json(ScriptText {
        text: render_script(&p.script),
        script_hash: p.script.content_hash(),
    }))
}

#[derive(Debug, Deserialize)]
struct SqlQueryParams {
    branch: Option<String>,
    #[serde(default)]
    positional: bool,
}

#[derive(Debug, Serialize)]
pub struct SqlText {
    pub text: String,
    pub sources: Vec<SourceTable>,
}

async fn get_sql(
    State(store): State<Shared>,
    Path((id, page)): Path<(String, String)>,
    Query(q): Query<SqlQueryParams>,
) -> ApiResult<Json<SqlText>> {
    let nb = store.get(&id)?;
    let sql = nb.export_sql(q.branch.as_deref().unwrap_or(MAIN), &page, q.positional)?;
    Ok(Json(SqlText {
        text: sql.text(),
        sources: sql.sources,
    }))
}

#[derive(Debug, Deserialize)]
struct SuggestionQuery {
    branch: Option<String>,
    /// Also propose data-dependent generalizations of singleton edits.
    #[serde(default)]
    generalize: bool,
}

#[derive(Debug, Serialize)]
pub struct Suggestions {
    pub suggestions: Vec<RewriteSuggestion>,
}

fn all_suggestions(nb: &Notebook, branch: &str, page: &str, generalize: bool) -> ApiResult<Vec<RewriteSuggestion>> {
    let mut out = nb.suggestions(branch, page)?;
    if generalize {
        match nb.generalizations(branch, page) {
            Ok(g) => out.extend(g),
            // No separating predicate means nothing to propose.
            Err(vizual_core::notebook::NotebookError::Rewrite(vizual_core::rewrite::RewriteError::NoCandidate {
                ..
            })) => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok(out)
}

async fn get_suggestions(
    State(store): State<Shared>,
    Path((id, page)): Path<(String, String)>,
    Query(q): Query<SuggestionQuery>,
) -> ApiResult<Json<Suggestions>> {
    let nb = store.get(&id)?;
    let suggestions = all_suggestions(&nb, q.branch.as_deref().unwrap_or(MAIN), &page, q.generalize)?;
    Ok(Json(Suggestions { suggestions }))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Accept {
    id: String,
}

async fn accept_suggestion(
    State(store): State<Shared>,
    Path((id, page)): Path<(String, String)>,
    Query(q): Query<BranchQuery>,
    bytes: Bytes,
) -> ApiResult<Json<Mutation>> {
    let req: Accept = body(&bytes)?;
    let branch = q.name().to_string();
    mutate_page(&store, &id, &branch, &page, |nb| {
        let sug = all_suggestions(nb, &branch, &page, true)?
            .into_iter()
            .find(|s| s.id == req.id)
            .ok_or_else(|| ApiError::not_found("UNKNOWN_SUGGESTION", format!("no current suggestion '{}'", req.id)))?;
        nb.accept_suggestion(&branch, &page, &sug)?;
        Ok((sug.replacement, Vec::new()))
    })
    .await
}
