//! Deterministic replay of a script from its source.

use std::path::PathBuf;

use thiserror::Error;

use super::{apply_with_diagnostics, load_csv_bytes, Diagnostic, ExecError, LoadOptions, StabilityPolicy};
use crate::lang::{Script, Source, Step};
use crate::model::SheetState;

/// Where LOAD statements get their input.
pub trait Sources {
    fn file(&self, path: &str) -> Result<Vec<u8>, ExecError>;
    fn page(&self, name: &str) -> Result<SheetState, ExecError>;
}

/// Files relative to a base directory; no pages.
#[derive(Debug, Clone)]
pub struct FsSources {
    pub base: PathBuf,
}

impl Sources for FsSources {
    fn file(&self, path: &str) -> Result<Vec<u8>, ExecError> {
        let p = self.base.join(path);
        std::fs::read(&p).map_err(|e| ExecError::Io {
            path: p.display().to_string(),
            message: e.to_string(),
        })
    }

    fn page(&self, name: &str) -> Result<SheetState, ExecError> {
        Err(ExecError::UnknownPage(name.to_string()))
    }
}

/// Provides nothing.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoSources;

impl Sources for NoSources {
    fn file(&self, path: &str) -> Result<Vec<u8>, ExecError> {
        Err(ExecError::Io {
            path: path.to_string(),
            message: "no file sources available".into(),
        })
    }

    fn page(&self, name: &str) -> Result<SheetState, ExecError> {
        Err(ExecError::UnknownPage(name.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Replay {
    pub state: SheetState,
    pub diagnostics: Vec<Diagnostic>,
}

/// Failure of one statement during replay; `index` is `None` for the source.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{}: {error}", match .index { Some(i) => format!("statement {}", i + 1), None => "source".to_string() })]
pub struct ReplayError {
    pub index: Option<usize>,
    pub error: ExecError,
}

pub fn load_source(
    source: &Source,
    sources: &dyn Sources,
) -> Result<(SheetState, Vec<Diagnostic>), ExecError> {
    match source {
        Source::File {
            path,
            header,
            infer,
        } => load_csv_bytes(
            &sources.file(path)?,
            LoadOptions {
                header: *header,
                infer: *infer,
            },
        ),
        Source::Page { name } => Ok((sources.page(name)?, Vec::new())),
    }
}

/// Apply `steps` to `state`; statement indexes start at `first_index`.
pub fn replay_steps(
    state: SheetState,
    steps: &[Step],
    policy: &StabilityPolicy,
    first_index: usize,
) -> Result<Replay, ReplayError> {
    let mut out = Replay {
        state,
        diagnostics: Vec::new(),
    };
    for (k, step) in steps.iter().enumerate() {
        let index = first_index + k;
        let applied = apply_with_diagnostics(&out.state, &step.stmt, policy, Some(index))
            .map_err(|error| ReplayError {
                index: Some(index),
                error,
            })?;
        out.state = applied.state;
        out.diagnostics.extend(applied.diagnostics);
    }
    Ok(out)
}

/// Load the script's source and apply every statement in order.
pub fn replay(
    script: &Script,
    sources: &dyn Sources,
    policy: &StabilityPolicy,
) -> Result<Replay, ReplayError> {
    let (state, mut diagnostics) =
        load_source(&script.source, sources).map_err(|error| ReplayError { index: None, error })?;
    let mut out = replay_steps(state, &script.steps, policy, 0)?;
    diagnostics.append(&mut out.diagnostics);
    out.diagnostics = diagnostics;
    Ok(out)
}
