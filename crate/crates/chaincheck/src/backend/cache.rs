//! Content-addressed on-disk cache for backend completions.
//!
//! One JSON file per request key, written atomically (temp file, then
//! rename) so concurrent writers for the same key leave exactly one entry.
//! Corrupt entries are quarantined and treated as misses.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use super::{cache_key, Backend, BackendError, Completion, CompletionRequest};

#[derive(Debug, Serialize, Deserialize)]
struct CacheEntry {
    key: String,
    completion: Completion,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheStats {
    pub hits: u64,
    pub misses: u64,
    pub quarantined: u64,
}

pub struct ResponseCache {
    dir: PathBuf,
    hits: AtomicU64,
    misses: AtomicU64,
    quarantined: AtomicU64,
    tmp_counter: AtomicU64,
}

impl ResponseCache {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self, BackendError> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        Ok(ResponseCache {
            dir,
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
            quarantined: AtomicU64::new(0),
            tmp_counter: AtomicU64::new(0),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn stats(&self) -> CacheStats {
        CacheStats {
            hits: self.hits.load(Ordering::SeqCst),
            misses: self.misses.load(Ordering::SeqCst),
            quarantined: self.quarantined.load(Ordering::SeqCst),
        }
    }

    fn entry_path(&self, key: &str) -> PathBuf {
        // Strip the "sha256:" scheme; the filename is the key hex.
        self.dir.join(key.rsplit(':').next().unwrap_or(key))
    }

    /// Serve `request` from the cache when possible, otherwise call the
    /// backend and persist the fresh completion.
    pub fn cached_complete(
        &self,
        backend: &dyn Backend,
        request: &CompletionRequest,
    ) -> Result<Completion, BackendError> {
        let key = cache_key(request, backend.id());
        let path = self.entry_path(&key);

        match std::fs::read_to_string(&path) {
            Ok(raw) => match serde_json::from_str::<CacheEntry>(&raw) {
                Ok(entry) if entry.key == key => {
                    self.hits.fetch_add(1, Ordering::SeqCst);
                    let mut completion = entry.completion;
                    completion.cached = true;
                    return Ok(completion);
                }
                _ => self.quarantine(&path),
            },
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
            Err(e) => return Err(e.into()),
        }

        self.misses.fetch_add(1, Ordering::SeqCst);
        let mut completion = backend.complete(request)?;
        completion.cached = false;
        let entry = CacheEntry {
            key,
            completion: completion.clone(),
        };
        self.persist(&path, &entry)?;
        Ok(completion)
    }

    fn persist(&self, path: &Path, entry: &CacheEntry) -> Result<(), BackendError> {
        let payload = serde_json::to_vec(entry)
            .map_err(|e| BackendError::InvalidResponse(format!("cache serialize: {e}")))?;
        let tmp = self.dir.join(format!(
            ".tmp-{}-{}",
            std::process::id(),
            self.tmp_counter.fetch_add(1, Ordering::SeqCst)
        ));
        std::fs::write(&tmp, payload)?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    fn quarantine(&self, path: &Path) {
        self.quarantined.fetch_add(1, Ordering::SeqCst);
        let mut corrupt = path.as_os_str().to_owned();
        corrupt.push(".corrupt");
        if std::fs::rename(path, PathBuf::from(corrupt)).is_err() {
            let _ = std::fs::remove_file(path);
        }
    }
}
