//! JSON container for notebooks.
//!
//! Pages carry their script as canonical text and the content hash of the
//! output it produced. Outputs themselves are not stored: decoding replays
//! every page from the embedded fixtures and rejects the file when a hash
//! differs.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{AcceptedRewrite, Branch, Fixture, Notebook, NotebookError, Page, MAIN};
use crate::executor::StabilityPolicy;
use crate::lang::{parse_script, render_script, Script};
use crate::model::SheetState;

pub const FORMAT: &str = "vizual-notebook";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct File {
    format: String,
    version: u32,
    #[serde(default)]
    policy: StabilityPolicy,
    #[serde(default)]
    fixtures: BTreeMap<String, Fixture>,
    branches: Vec<BranchFile>,
    #[serde(default)]
    accepted: Vec<AcceptedRewrite>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BranchFile {
    name: String,
    pages: Vec<PageFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PageFile {
    name: String,
    script: String,
    output_hash: String,
}

fn bad(msg: impl Into<String>) -> NotebookError {
    NotebookError::Format(msg.into())
}

impl Notebook {
    pub fn to_json(&self) -> String {
        let file = File {
            format: FORMAT.to_string(),
            version: VERSION,
            policy: self.policy,
            fixtures: self.fixtures.clone(),
            branches: self
                .branches
                .iter()
                .map(|b| BranchFile {
                    name: b.name.clone(),
                    pages: b
                        .pages
                        .iter()
                        .map(|p| PageFile {
                            name: p.name.clone(),
                            script: render_script(&p.script),
                            output_hash: p.output.content_hash(),
                        })
                        .collect(),
                })
                .collect(),
            accepted: self.accepted.clone(),
        };
        serde_json::to_string_pretty(&file).expect("notebook serializes")
    }

    /// Decode and replay. Fails on malformed input, on fixtures whose hash
    /// does not match their content, and on pages whose replayed output
    /// differs from the recorded hash.
    pub fn from_json(text: &str) -> Result<Notebook, NotebookError> {
        let file: File = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
        if file.format != FORMAT {
            return Err(bad(format!("format is '{}', expected '{FORMAT}'", file.format)));
        }
        if file.version != VERSION {
            return Err(bad(format!("unsupported version {}", file.version)));
        }
        for (path, f) in &file.fixtures {
            if Fixture::new(f.content.clone()).sha256 != f.sha256 {
                return Err(bad(format!("fixture '{path}' does not match its sha256")));
            }
        }
        if file.branches.first().map(|b| b.name.as_str()) != Some(MAIN) {
            return Err(bad(format!("the first branch must be '{MAIN}'")));
        }
        let mut nb = Notebook {
            branches: Vec::new(),
            fixtures: file.fixtures,
            accepted: file.accepted,
            policy: file.policy,
        };
        for bf in file.branches {
            if nb.branches.iter().any(|b| b.name == bf.name) {
                return Err(NotebookError::DuplicateBranch(bf.name));
            }
            let mut branch = Branch {
                name: bf.name.clone(),
                pages: Vec::new(),
            };
            for pf in bf.pages {
                if branch.pages.iter().any(|p| p.name == pf.name) {
                    return Err(NotebookError::DuplicatePage(pf.name));
                }
                let script: Script = parse_script(&pf.script).map_err(|e| bad(format!("page '{}': {e}", pf.name)))?;
                if let crate::lang::Source::File { path, .. } = &script.source {
                    if !nb.fixtures.contains_key(path) {
                        return Err(bad(format!("page '{}' loads '{path}', which has no fixture", pf.name)));
                    }
                }
                branch.pages.push(Page {
                    name: pf.name.clone(),
                    script,
                    output: SheetState::default(),
                    diagnostics: Vec::new(),
                    dirty: true,
                });
                let i = branch.pages.len() - 1;
                branch.replay_page(i, &nb.fixtures, &nb.policy)?;
                if branch.pages[i].output.content_hash() != pf.output_hash {
                    return Err(NotebookError::OutputMismatch {
                        branch: bf.name.clone(),
                        page: pf.name,
                    });
                }
            }
            nb.branches.push(branch);
        }
        Ok(nb)
    }
}
