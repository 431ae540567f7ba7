//! Content-addressed cache of expensive artifacts, written atomically.

use std::io::Write;
use std::path::PathBuf;

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::VERSION;

#[derive(Clone, Debug)]
pub struct Cache {
    dir: Option<PathBuf>,
}

impl Cache {
    pub fn new(dir: PathBuf) -> Self {
        Self { dir: Some(dir) }
    }

    pub fn disabled() -> Self {
        Self { dir: None }
    }

    /// Key over the module, operation, code version and the JSON of `inputs`.
    pub fn key<K: Serialize>(module: &str, op: &str, inputs: &K) -> Result<String> {
        let mut h = Sha256::new();
        for part in [module, op, VERSION] {
            h.update(part.as_bytes());
            h.update([0]);
        }
        h.update(serde_json::to_vec(inputs)?);
        Ok(format!("{module}-{op}-{}", &hex::encode(h.finalize())[..24]))
    }

    fn path(&self, key: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(format!("{key}.json")))
    }

    pub fn get<T: DeserializeOwned>(&self, key: &str) -> Option<T> {
        let bytes = std::fs::read(self.path(key)?).ok()?;
        serde_json::from_slice(&bytes).ok()
    }

    /// Writes through a temporary file in the cache directory and renames it into place, so
    /// readers never see a partial entry.
    pub fn put<T: Serialize>(&self, key: &str, value: &T) -> Result<()> {
        let (Some(dir), Some(path)) = (&self.dir, self.path(key)) else { return Ok(()) };
        std::fs::create_dir_all(dir).with_context(|| format!("creating cache directory {}", dir.display()))?;
        let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
        serde_json::to_writer(&mut tmp, value)?;
        tmp.flush()?;
        tmp.persist(&path).with_context(|| format!("writing cache entry {}", path.display()))?;
        Ok(())
    }

    /// Cached value for `key`, computing and storing it on a miss.
    pub fn get_or<T, F>(&self, key: &str, compute: F) -> Result<T>
    where
        T: Serialize + DeserializeOwned,
        F: FnOnce() -> Result<T>,
    {
        if let Some(v) = self.get(key) {
            return Ok(v);
        }
        let v = compute()?;
        self.put(key, &v)?;
        Ok(v)
    }
}
