//! Append-only response cache, one JSON record per line.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::{ClientError, RawCompletion};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheRecord {
    pub digest: String,
    pub model_name: String,
    pub prompt: String,
    pub top_tokens: Vec<(String, f64)>,
    pub chosen_text: String,
    /// Seconds since the Unix epoch when the record was written.
    pub timestamp: u64,
}

impl CacheRecord {
    pub fn completion(&self) -> RawCompletion {
        RawCompletion {
            prompt_digest: self.digest.clone(),
            top_tokens: self.top_tokens.clone(),
            chosen_text: self.chosen_text.clone(),
        }
    }
}

/// Many readers, one appender at a time. Without a backing file the cache
/// lives only in memory.
#[derive(Debug, Default)]
pub struct ResponseCache {
    path: Option<PathBuf>,
    entries: RwLock<HashMap<String, RawCompletion>>,
    file: Mutex<Option<File>>,
    skipped_lines: usize,
}

impl ResponseCache {
    pub fn in_memory() -> Self {
        ResponseCache::default()
    }

    /// Loads every record from `path` (creating it if needed) and appends new
    /// records to it. A truncated final line from an interrupted run is
    /// skipped; later records for the same digest win.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, ClientError> {
        let path = path.as_ref();
        let io_err = |e: std::io::Error| ClientError::Cache(format!("{}: {e}", path.display()));
        let mut entries = HashMap::new();
        let mut skipped_lines = 0;
        if path.exists() {
            let reader = BufReader::new(File::open(path).map_err(io_err)?);
            for line in reader.lines() {
                let line = line.map_err(io_err)?;
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<CacheRecord>(&line) {
                    Ok(rec) => {
                        entries.insert(rec.digest.clone(), rec.completion());
                    }
                    Err(_) => skipped_lines += 1,
                }
            }
        }
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(io_err)?;
        // Terminate a partial last line so the next append starts clean.
        let raw = std::fs::read(path).map_err(io_err)?;
        if raw.last().is_some_and(|&b| b != b'\n') {
            file.write_all(b"\n").map_err(io_err)?;
        }
        Ok(ResponseCache {
            path: Some(path.to_path_buf()),
            entries: RwLock::new(entries),
            file: Mutex::new(Some(file)),
            skipped_lines,
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    /// Unreadable lines ignored while loading.
    pub fn skipped_lines(&self) -> usize {
        self.skipped_lines
    }

    pub fn len(&self) -> usize {
        self.entries.read().map(|m| m.len()).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, digest: &str) -> Option<RawCompletion> {
        self.entries.read().ok()?.get(digest).cloned()
    }

    pub fn insert(
        &self,
        model_name: &str,
        prompt: &str,
        completion: &RawCompletion,
    ) -> Result<(), ClientError> {
        let record = CacheRecord {
            digest: completion.prompt_digest.clone(),
            model_name: model_name.to_string(),
            prompt: prompt.to_string(),
            top_tokens: completion.top_tokens.clone(),
            chosen_text: completion.chosen_text.clone(),
            timestamp: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        };
        {
            let mut guard = self
                .file
                .lock()
                .map_err(|_| ClientError::Cache("cache file lock poisoned".into()))?;
            if let Some(file) = guard.as_mut() {
                let mut line = serde_json::to_string(&record)
                    .map_err(|e| ClientError::Cache(e.to_string()))?;
                line.push('\n');
                file.write_all(line.as_bytes())
                    .and_then(|_| file.flush())
                    .map_err(|e| ClientError::Cache(e.to_string()))?;
            }
        }
        self.entries
            .write()
            .map_err(|_| ClientError::Cache("cache map lock poisoned".into()))?
            .insert(record.digest, completion.clone());
        Ok(())
    }
}
