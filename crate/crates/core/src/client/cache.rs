use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Backend, ClientError, CompletionRequest};
use crate::taskgen::TaskInstance;

/// One cache line: request hash, model and completions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub key: String,
    pub model: String,
    pub completions: Vec<String>,
}

#[derive(Serialize)]
struct KeyMaterial<'a> {
    prompt: &'a str,
    n: usize,
    temperature: f64,
    max_tokens: usize,
    model: &'a str,
}

/// SHA-256 hex of the request parameters and model name.
pub fn request_key(req: &CompletionRequest, model: &str) -> String {
    let material = serde_json::to_vec(&KeyMaterial {
        prompt: &req.prompt,
        n: req.n,
        temperature: req.temperature,
        max_tokens: req.max_tokens,
        model,
    })
    .expect("key material serializes");
    hex::encode(Sha256::digest(&material))
}

/// Append-only JSONL cache; writes from many threads are serialized.
pub struct CacheWriter {
    file: Mutex<File>,
}

impl CacheWriter {
    pub fn open(path: &Path) -> Result<Self, ClientError> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(CacheWriter {
            file: Mutex::new(file),
        })
    }

    pub fn append(&self, entry: &CacheEntry) -> Result<(), ClientError> {
        let mut line = serde_json::to_string(entry).expect("cache entry serializes");
        line.push('\n');
        let mut file = self.file.lock().expect("cache lock poisoned");
        file.write_all(line.as_bytes())?;
        Ok(())
    }
}

/// Answers only requests seen before, bytewise as recorded.
pub struct ReplayBackend {
    model: String,
    entries: HashMap<String, Vec<String>>,
}

impl ReplayBackend {
    /// Loads a cache file. Without an explicit model the file must hold a
    /// single model's entries.
    pub fn load(path: &Path, model: Option<&str>) -> Result<Self, ClientError> {
        let reader = BufReader::new(File::open(path)?);
        let mut entries = HashMap::new();
        let mut models: Vec<String> = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: CacheEntry = serde_json::from_str(&line).map_err(|e| {
                ClientError::Config(format!("{}:{}: bad cache entry: {e}", path.display(), i + 1))
            })?;
            if !models.contains(&entry.model) {
                models.push(entry.model.clone());
            }
            entries.insert(entry.key, entry.completions);
        }
        let model = match (model, models.as_slice()) {
            (Some(m), _) => m.to_string(),
            (None, [only]) => only.clone(),
            (None, []) => String::new(),
            (None, many) => {
                return Err(ClientError::Config(format!(
                    "cache holds several models ({}); pick one",
                    many.join(", ")
                )))
            }
        };
        Ok(ReplayBackend { model, entries })
    }

    pub fn from_entries(model: &str, entries: impl IntoIterator<Item = CacheEntry>) -> Self {
        ReplayBackend {
            model: model.to_string(),
            entries: entries.into_iter().map(|e| (e.key, e.completions)).collect(),
        }
    }
}

impl Backend for ReplayBackend {
    fn id(&self) -> String {
        format!("replay:{}", self.model)
    }

    fn model(&self) -> &str {
        &self.model
    }

    fn complete(&self, req: &CompletionRequest, _: &TaskInstance) -> Result<Vec<String>, ClientError> {
        let key = request_key(req, &self.model);
        self.entries
            .get(&key)
            .cloned()
            .ok_or(ClientError::CacheMiss(key))
    }

    fn records(&self) -> bool {
        false
    }
}
