//! Notebook registry.
//!
//! Each notebook has a published snapshot and a mutation queue. Readers
//! clone the snapshot `Arc` and never wait for writers. Writers take the
//! queue lock (FIFO), mutate a private copy, persist it, and only then
//! publish it, so no response can observe a partially applied mutation.

use std::collections::BTreeMap;
use std::path::{Component, Path, PathBuf};
use std::sync::{Arc, RwLock};

use vizual_core::executor::FsSources;
use vizual_core::notebook::Notebook;

use crate::error::ApiError;

struct Slot {
    queue: tokio::sync::Mutex<()>,
    snapshot: RwLock<Arc<Notebook>>,
}

impl Slot {
    fn new(nb: Notebook) -> Self {
        Slot {
            queue: tokio::sync::Mutex::new(()),
            snapshot: RwLock::new(Arc::new(nb)),
        }
    }

    fn current(&self) -> Arc<Notebook> {
        self.snapshot.read().expect("snapshot lock").clone()
    }
}

pub struct Store {
    data_dir: Option<PathBuf>,
    notebooks: RwLock<BTreeMap<String, Arc<Slot>>>,
}

/// Ids double as file names, so they are kept to a safe alphabet.
pub fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 64 && id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_')
}

/// Relative paths without `..`, so LOAD cannot escape the data directory.
pub fn valid_file_path(path: &str) -> bool {
    let p = Path::new(path);
    !path.is_empty() && p.components().all(|c| matches!(c, Component::Normal(_) | Component::CurDir))
}

impl Store {
    /// An empty in-memory store, or one backed by `data_dir`: notebooks are
    /// read from `*.json` files there and written back after every
    /// mutation, and page sources load files relative to it.
    pub fn open(data_dir: Option<PathBuf>) -> std::io::Result<Self> {
        let mut notebooks = BTreeMap::new();
        if let Some(dir) = &data_dir {
            std::fs::create_dir_all(dir.join("notebooks"))?;
            for entry in std::fs::read_dir(dir.join("notebooks"))? {
                let path = entry?.path();
                let Some(id) = path.file_stem().and_then(|s| s.to_str()) else {
                    continue;
                };
                if path.extension().and_then(|e| e.to_str()) != Some("json") || !valid_id(id) {
                    continue;
                }
                let text = std::fs::read_to_string(&path)?;
                match Notebook::from_json(&text) {
                    Ok(nb) => {
                        notebooks.insert(id.to_string(), Arc::new(Slot::new(nb)));
                    }
                    Err(e) => tracing::warn!("skipping {}: {e}", path.display()),
                }
            }
        }
        Ok(Store {
            data_dir,
            notebooks: RwLock::new(notebooks),
        })
    }

    pub fn files(&self) -> FsSources {
        FsSources {
            base: self.data_dir.clone().unwrap_or_else(|| PathBuf::from(".")),
        }
    }

    pub fn ids(&self) -> Vec<String> {
        self.notebooks.read().expect("registry lock").keys().cloned().collect()
    }

    fn slot(&self, id: &str) -> Result<Arc<Slot>, ApiError> {
        self.notebooks
            .read()
            .expect("registry lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found("UNKNOWN_NOTEBOOK", format!("no notebook '{id}'")))
    }

    /// The published snapshot.
    pub fn get(&self, id: &str) -> Result<Arc<Notebook>, ApiError> {
        Ok(self.slot(id)?.current())
    }

    async fn persist(&self, id: &str, nb: &Notebook) -> Result<(), ApiError> {
        let Some(dir) = &self.data_dir else {
            return Ok(());
        };
        let dir = dir.join("notebooks");
        let tmp = dir.join(format!(".{id}.json.tmp"));
        let write = async {
            tokio::fs::write(&tmp, nb.to_json()).await?;
            tokio::fs::rename(&tmp, dir.join(format!("{id}.json"))).await
        };
        write.await.map_err(|e| ApiError::internal(format!("saving notebook '{id}': {e}")))
    }

    pub async fn insert(&self, id: &str, nb: Notebook) -> Result<(), ApiError> {
        if !valid_id(id) {
            return Err(ApiError::invalid(
                "INVALID_ID",
                "notebook ids are 1 to 64 characters from A-Z, a-z, 0-9, '-' and '_'",
            ));
        }
        if self.notebooks.read().expect("registry lock").contains_key(id) {
            return Err(ApiError::conflict("DUPLICATE_NOTEBOOK", format!("notebook '{id}' already exists")));
        }
        self.persist(id, &nb).await?;
        let mut map = self.notebooks.write().expect("registry lock");
        if map.contains_key(id) {
            return Err(ApiError::conflict("DUPLICATE_NOTEBOOK", format!("notebook '{id}' already exists")));
        }
        map.insert(id.to_string(), Arc::new(Slot::new(nb)));
        Ok(())
    }

    /// Run `f` on a copy of the notebook in arrival order, then persist and
    /// publish the copy. On error nothing is published.
    pub async fn mutate<T>(
        &self,
        id: &str,
        f: impl FnOnce(&mut Notebook) -> Result<T, ApiError>,
    ) -> Result<(T, Arc<Notebook>), ApiError> {
        let slot = self.slot(id)?;
        let _turn = slot.queue.lock().await;
        let mut nb = (*slot.current()).clone();
        let out = f(&mut nb)?;
        self.persist(id, &nb).await?;
        let nb = Arc::new(nb);
        *slot.snapshot.write().expect("snapshot lock") = nb.clone();
        Ok((out, nb))
    }
}
