//! Notebooks: ordered pages per branch, each a script over a loaded file or
//! over the output of an earlier page.
//!
//! Files are snapshotted into a fixture registry by content hash the first
//! time a page loads them, and every replay reads the snapshot, so replays
//! are hermetic. Every mutation works on a copy of the branch and commits
//! only if the edited page and all pages downstream of it replay.

mod format;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::executor::{
    apply_with_diagnostics, gesture_to_statements, load_source, replay, Diagnostic, ExecError, Gesture, ReplayError,
    Sources, StabilityPolicy,
};
use crate::lang::{Script, Source, Step};
use crate::model::SheetState;
use crate::rewrite::{self, RewriteError, RewriteSuggestion};
use crate::sql::{self, SqlError, SqlQuery};

pub use format::FORMAT;

pub const MAIN: &str = "main";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NotebookError {
    #[error("UNKNOWN_BRANCH: no branch named '{0}'")]
    UnknownBranch(String),
    #[error("UNKNOWN_PAGE: no page named '{0}'")]
    UnknownPage(String),
    #[error("DUPLICATE_PAGE_NAME: page '{0}' already exists")]
    DuplicatePage(String),
    #[error("DUPLICATE_BRANCH_NAME: branch '{0}' already exists")]
    DuplicateBranch(String),
    #[error("INVALID_PAGE_SOURCE: page '{page}' can only load earlier pages, not '{source_page}'")]
    InvalidSource { page: String, source_page: String },
    #[error("OUT_OF_RANGE: statement index {index} on page '{page}' with {len} statements")]
    OutOfRange { page: String, index: usize, len: usize },
    #[error("page '{page}', {}: {error}", match .index { Some(i) => format!("statement {}", i + 1), None => "source".to_string() })]
    Exec {
        page: String,
        index: Option<usize>,
        error: ExecError,
    },
    #[error("invalid gesture on page '{page}': {error}")]
    Gesture { page: String, error: ExecError },
    #[error("FIXTURE: {0}")]
    Fixture(String),
    #[error("{0}")]
    Rewrite(#[from] RewriteError),
    #[error("{0}")]
    Sql(#[from] SqlError),
    #[error("FORMAT: {0}")]
    Format(String),
    #[error("OUTPUT_MISMATCH: page '{page}' on branch '{branch}' replays to a different output")]
    OutputMismatch { branch: String, page: String },
}

impl NotebookError {
    pub fn code(&self) -> &'static str {
        match self {
            NotebookError::UnknownBranch(_) => "UNKNOWN_BRANCH",
            NotebookError::UnknownPage(_) => "UNKNOWN_PAGE",
            NotebookError::DuplicatePage(_) => "DUPLICATE_PAGE_NAME",
            NotebookError::DuplicateBranch(_) => "DUPLICATE_BRANCH_NAME",
            NotebookError::InvalidSource { .. } => "INVALID_PAGE_SOURCE",
            NotebookError::OutOfRange { .. } => "OUT_OF_RANGE",
            NotebookError::Exec { error, .. } | NotebookError::Gesture { error, .. } => error.code(),
            NotebookError::Fixture(_) => "FIXTURE",
            NotebookError::Rewrite(e) => e.code(),
            NotebookError::Sql(e) => e.code(),
            NotebookError::Format(_) => "FORMAT",
            NotebookError::OutputMismatch { .. } => "OUTPUT_MISMATCH",
        }
    }
}

type Result<T> = std::result::Result<T, NotebookError>;

/// A file snapshot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fixture {
    pub sha256: String,
    pub content: String,
}

impl Fixture {
    pub fn new(content: String) -> Self {
        Fixture {
            sha256: hex::encode(Sha256::digest(content.as_bytes())),
            content,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Page {
    pub name: String,
    pub script: Script,
    pub output: SheetState,
    pub diagnostics: Vec<Diagnostic>,
    /// Set while a cascade is pending; never observable after a mutation.
    pub dirty: bool,
}

impl Page {
    pub fn source(&self) -> &Source {
        &self.script.source
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub name: String,
    pub pages: Vec<Page>,
}

/// Record of an accepted rewrite, pointing back at what it replaced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcceptedRewrite {
    pub branch: String,
    pub page: String,
    pub suggestion: RewriteSuggestion,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Notebook {
    pub branches: Vec<Branch>,
    pub fixtures: BTreeMap<String, Fixture>,
    pub accepted: Vec<AcceptedRewrite>,
    pub policy: StabilityPolicy,
}

impl Default for Notebook {
    fn default() -> Self {
        Notebook {
            branches: vec![Branch {
                name: MAIN.to_string(),
                pages: Vec::new(),
            }],
            fixtures: BTreeMap::new(),
            accepted: Vec::new(),
            policy: StabilityPolicy::default(),
        }
    }
}

/// Replay inputs for one page: registered fixtures and the outputs of the
/// pages before it.
struct PageInputs<'a> {
    fixtures: &'a BTreeMap<String, Fixture>,
    earlier: &'a [Page],
}

impl Sources for PageInputs<'_> {
    fn file(&self, path: &str) -> std::result::Result<Vec<u8>, ExecError> {
        self.fixtures
            .get(path)
            .map(|f| f.content.clone().into_bytes())
            .ok_or_else(|| ExecError::Io {
                path: path.to_string(),
                message: "no fixture registered for this file".into(),
            })
    }

    fn page(&self, name: &str) -> std::result::Result<SheetState, ExecError> {
        self.earlier
            .iter()
            .find(|p| p.name == name)
            .map(|p| p.output.clone())
            .ok_or_else(|| ExecError::UnknownPage(name.to_string()))
    }
}

fn exec_error(page: &str, e: ReplayError) -> NotebookError {
    NotebookError::Exec {
        page: page.to_string(),
        index: e.index,
        error: e.error,
    }
}

impl Branch {
    fn page_index(&self, name: &str) -> Result<usize> {
        self.pages
            .iter()
            .position(|p| p.name == name)
            .ok_or_else(|| NotebookError::UnknownPage(name.to_string()))
    }

    /// Pages after `i` whose source chain leads back to page `i`.
    fn downstream(&self, i: usize) -> Vec<usize> {
        let mut hit = vec![false; self.pages.len()];
        hit[i] = true;
        for j in i + 1..self.pages.len() {
            if let Source::Page { name } = self.pages[j].source() {
                if let Some(k) = self.pages[..j].iter().position(|p| &p.name == name) {
                    hit[j] = hit[k];
                }
            }
        }
        (i + 1..self.pages.len()).filter(|&j| hit[j]).collect()
    }

    fn replay_page(&mut self, i: usize, fixtures: &BTreeMap<String, Fixture>, policy: &StabilityPolicy) -> Result<()> {
        let (earlier, rest) = self.pages.split_at_mut(i);
        let page = &mut rest[0];
        let inputs = PageInputs { fixtures, earlier };
        let out = replay(&page.script, &inputs, policy).map_err(|e| exec_error(&page.name, e))?;
        page.output = out.state;
        page.diagnostics = out.diagnostics;
        page.dirty = false;
        Ok(())
    }

    /// Recompute every page downstream of `i`, in order.
    fn cascade(&mut self, i: usize, fixtures: &BTreeMap<String, Fixture>, policy: &StabilityPolicy) -> Result<()> {
        let down = self.downstream(i);
        for &j in &down {
            self.pages[j].dirty = true;
        }
        for j in down {
            self.replay_page(j, fixtures, policy)?;
        }
        Ok(())
    }
}

impl Notebook {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn branch_names(&self) -> Vec<&str> {
        self.branches.iter().map(|b| b.name.as_str()).collect()
    }

    pub fn branch(&self, name: &str) -> Result<&Branch> {
        self.branches
            .iter()
            .find(|b| b.name == name)
            .ok_or_else(|| NotebookError::UnknownBranch(name.to_string()))
    }

    fn branch_index(&self, name: &str) -> Result<usize> {
        self.branches
            .iter()
            .position(|b| b.name == name)
            .ok_or_else(|| NotebookError::UnknownBranch(name.to_string()))
    }

    pub fn page(&self, branch: &str, page: &str) -> Result<&Page> {
        let b = self.branch(branch)?;
        Ok(&b.pages[b.page_index(page)?])
    }

    /// Snapshot `path` unless it is already registered.
    pub fn register_fixture(&mut self, path: &str, sources: &dyn Sources) -> Result<&Fixture> {
        if !self.fixtures.contains_key(path) {
            let bytes = sources.file(path).map_err(|e| NotebookError::Fixture(e.to_string()))?;
            let content = String::from_utf8(bytes)
                .map_err(|_| NotebookError::Fixture(format!("{path}: fixtures must be UTF-8 text")))?;
            self.fixtures.insert(path.to_string(), Fixture::new(content));
        }
        Ok(&self.fixtures[path])
    }

    /// Replace the snapshot of `path` with the file's current content and
    /// recompute every page that loads it.
    pub fn refresh_fixture(&mut self, path: &str, sources: &dyn Sources) -> Result<()> {
        let mut next = self.clone();
        next.fixtures.remove(path);
        next.register_fixture(path, sources)?;
        for b in 0..next.branches.len() {
            let branch = &mut next.branches[b];
            for i in 0..branch.pages.len() {
                if matches!(branch.pages[i].source(), Source::File { path: p, .. } if p == path) {
                    branch.replay_page(i, &next.fixtures, &next.policy)?;
                    branch.cascade(i, &next.fixtures, &next.policy)?;
                }
            }
        }
        *self = next;
        Ok(())
    }

    /// Append a page with an empty script. File sources are snapshotted;
    /// page sources must name an earlier page of the same branch.
    pub fn add_page(&mut self, branch: &str, name: &str, source: Source, sources: &dyn Sources) -> Result<()> {
        let mut next = self.clone();
        let b = next.branch_index(branch)?;
        if next.branches[b].pages.iter().any(|p| p.name == name) {
            return Err(NotebookError::DuplicatePage(name.to_string()));
        }
        match &source {
            Source::File { path, .. } => {
                next.register_fixture(path, sources)?;
            }
            Source::Page { name: src } => {
                if !next.branches[b].pages.iter().any(|p| &p.name == src) {
                    return Err(NotebookError::InvalidSource {
                        page: name.to_string(),
                        source_page: src.clone(),
                    });
                }
            }
        }
        let inputs = PageInputs {
            fixtures: &next.fixtures,
            earlier: &next.branches[b].pages,
        };
        let (output, diagnostics) = load_source(&source, &inputs).map_err(|error| NotebookError::Exec {
            page: name.to_string(),
            index: None,
            error,
        })?;
        next.branches[b].pages.push(Page {
            name: name.to_string(),
            script: Script::new(source),
            output,
            diagnostics,
            dirty: false,
        });
        *self = next;
        Ok(())
    }

    /// Apply one statement to the end of a page, then recompute downstream
    /// pages. Returns the statement's diagnostics.
    pub fn append_statement(&mut self, branch: &str, page: &str, step: Step) -> Result<Vec<Diagnostic>> {
        self.append_steps(branch, page, vec![step])
    }

    /// Apply statements in order as one atomic mutation.
    pub fn append_steps(&mut self, branch: &str, page: &str, steps: Vec<Step>) -> Result<Vec<Diagnostic>> {
        let mut next = self.clone();
        let b = next.branch_index(branch)?;
        let br = &mut next.branches[b];
        let i = br.page_index(page)?;
        let mut diagnostics = Vec::new();
        {
            let p = &mut br.pages[i];
            for step in steps {
                let index = p.script.len();
                let applied = apply_with_diagnostics(&p.output, &step.stmt, &next.policy, Some(index)).map_err(|error| {
                    NotebookError::Exec {
                        page: page.to_string(),
                        index: Some(index),
                        error,
                    }
                })?;
                p.output = applied.state;
                diagnostics.extend(applied.diagnostics.iter().cloned());
                p.diagnostics.extend(applied.diagnostics);
                p.script.steps.push(step);
            }
        }
        br.cascade(i, &next.fixtures, &next.policy)?;
        *self = next;
        Ok(diagnostics)
    }

    /// Translate gestures in order, each into statements sharing a fresh
    /// group id, and append them as one atomic mutation. Returns the
    /// appended steps and their diagnostics.
    pub fn apply_gestures(
        &mut self,
        branch: &str,
        page: &str,
        gestures: &[Gesture],
    ) -> Result<(Vec<Step>, Vec<Diagnostic>)> {
        let mut next = self.clone();
        let mut steps = Vec::new();
        let mut diagnostics = Vec::new();
        for g in gestures {
            let p = next.page(branch, page)?;
            let group = p.script.steps.iter().filter_map(|s| s.group).max().map_or(1, |g| g + 1);
            let new = gesture_to_statements(g, &p.output, group).map_err(|error| NotebookError::Gesture {
                page: page.to_string(),
                error,
            })?;
            diagnostics.extend(next.append_steps(branch, page, new.clone())?);
            steps.extend(new);
        }
        *self = next;
        Ok((steps, diagnostics))
    }

    /// Replace statements `start..end` of a page, replay it from its source
    /// and recompute downstream pages.
    pub fn replace_steps(&mut self, branch: &str, page: &str, start: usize, end: usize, steps: Vec<Step>) -> Result<()> {
        let mut next = self.clone();
        let b = next.branch_index(branch)?;
        let br = &mut next.branches[b];
        let i = br.page_index(page)?;
        let len = br.pages[i].script.len();
        if start > end || end > len {
            return Err(NotebookError::OutOfRange {
                page: page.to_string(),
                index: end,
                len,
            });
        }
        br.pages[i].script.steps.splice(start..end, steps);
        br.pages[i].dirty = true;
        br.replay_page(i, &next.fixtures, &next.policy)?;
        br.cascade(i, &next.fixtures, &next.policy)?;
        *self = next;
        Ok(())
    }

    pub fn edit_statement(&mut self, branch: &str, page: &str, index: usize, step: Step) -> Result<()> {
        let len = self.page(branch, page)?.script.len();
        if index >= len {
            return Err(NotebookError::OutOfRange {
                page: page.to_string(),
                index,
                len,
            });
        }
        self.replace_steps(branch, page, index, index + 1, vec![step])
    }

    /// Fork `from` at statement `index` of `page`: the new branch has the
    /// pages before `page` and the first `index` statements of `page`.
    pub fn create_branch(&mut self, from: &str, page: &str, index: usize, name: &str) -> Result<()> {
        if self.branches.iter().any(|b| b.name == name) {
            return Err(NotebookError::DuplicateBranch(name.to_string()));
        }
        let src = self.branch(from)?;
        let i = src.page_index(page)?;
        let len = src.pages[i].script.len();
        if index > len {
            return Err(NotebookError::OutOfRange {
                page: page.to_string(),
                index,
                len,
            });
        }
        let mut fork = Branch {
            name: name.to_string(),
            pages: src.pages[..=i].to_vec(),
        };
        fork.pages[i].script.steps.truncate(index);
        fork.replay_page(i, &self.fixtures, &self.policy)?;
        self.branches.push(fork);
        Ok(())
    }

    /// Page inputs for replays and compiled queries.
    fn inputs(&self, branch: &str, page: &str) -> Result<(PageInputs<'_>, &Page)> {
        let b = self.branch(branch)?;
        let i = b.page_index(page)?;
        Ok((
            PageInputs {
                fixtures: &self.fixtures,
                earlier: &b.pages[..i],
            },
            &b.pages[i],
        ))
    }

    /// Verified readability suggestions for a page's script.
    pub fn suggestions(&self, branch: &str, page: &str) -> Result<Vec<RewriteSuggestion>> {
        let (inputs, p) = self.inputs(branch, page)?;
        Ok(rewrite::suggest(&p.script, &inputs)?)
    }

    /// Generalizations of singleton edits on a page, judged on its output.
    pub fn generalizations(&self, branch: &str, page: &str) -> Result<Vec<RewriteSuggestion>> {
        let p = self.page(branch, page)?;
        Ok(rewrite::generalize(&p.script, &p.output)?)
    }

    /// Replace the suggestion's statements and record the acceptance.
    pub fn accept_suggestion(&mut self, branch: &str, page: &str, sug: &RewriteSuggestion) -> Result<()> {
        let old = &self.page(branch, page)?.script;
        // Checks staleness before anything changes.
        rewrite::apply_suggestion(old, sug)?;
        let mut next = self.clone();
        next.replace_steps(branch, page, sug.start, sug.end, sug.replacement.clone())?;
        next.accepted.push(AcceptedRewrite {
            branch: branch.to_string(),
            page: page.to_string(),
            suggestion: sug.clone(),
        });
        *self = next;
        Ok(())
    }

    /// The page's script compiled to one query over its source.
    pub fn export_sql(&self, branch: &str, page: &str, positional: bool) -> Result<SqlQuery> {
        let (inputs, p) = self.inputs(branch, page)?;
        let (loaded, _) = load_source(p.source(), &inputs).map_err(|error| NotebookError::Exec {
            page: page.to_string(),
            index: None,
            error,
        })?;
        let schema: Vec<String> = loaded.column_names().into_iter().map(str::to_string).collect();
        Ok(if positional {
            sql::compile_positional(&p.script, &schema)?
        } else {
            sql::compile_script(&p.script, &schema)?
        })
    }

    /// Run a compiled page query against the same inputs the page reads.
    pub fn run_sql(&self, branch: &str, page: &str, q: &SqlQuery) -> Result<sql::Table> {
        let (inputs, _) = self.inputs(branch, page)?;
        Ok(sql::run_query(q, &inputs)?)
    }

    /// Hash over every page output of every branch.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        for b in &self.branches {
            h.update(b.name.as_bytes());
            for p in &b.pages {
                h.update(p.name.as_bytes());
                h.update(p.output.content_hash().as_bytes());
            }
        }
        hex::encode(h.finalize())
    }

    /// Replay every page from fixtures and compare with the cached outputs.
    pub fn verify(&self) -> Result<()> {
        for b in &self.branches {
            let mut fresh = b.clone();
            for i in 0..fresh.pages.len() {
                fresh.replay_page(i, &self.fixtures, &self.policy)?;
                if fresh.pages[i].output.content_hash() != b.pages[i].output.content_hash() {
                    return Err(NotebookError::OutputMismatch {
                        branch: b.name.clone(),
                        page: b.pages[i].name.clone(),
                    });
                }
            }
        }
        Ok(())
    }
}
