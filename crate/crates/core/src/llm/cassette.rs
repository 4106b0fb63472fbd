use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use super::{fingerprint, CompletionBackend, CompletionRequest, LlmError};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CassetteEntry {
    pub fingerprint: String,
    /// Request snapshot. Credentials never enter requests, so nothing needs
    /// redacting.
    pub request: CompletionRequest,
    pub response_text: String,
    pub recorded_at: String,
}

/// Recorded completions, stored as a JSON array of entries.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Cassette {
    entries: Vec<CassetteEntry>,
}

impl Cassette {
    pub fn load(path: &Path) -> Result<Self, LlmError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LlmError::Cassette(format!("{}: {e}", path.display())))?;
        let entries: Vec<CassetteEntry> = serde_json::from_str(&text)
            .map_err(|e| LlmError::Cassette(format!("{}: {e}", path.display())))?;
        let mut c = Cassette::default();
        for e in entries {
            c.insert(e);
        }
        Ok(c)
    }

    /// Loads `path` if it exists, otherwise starts empty.
    pub fn load_or_default(path: &Path) -> Result<Self, LlmError> {
        if path.exists() {
            Self::load(path)
        } else {
            Ok(Self::default())
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), LlmError> {
        let json = serde_json::to_string_pretty(&self.entries).expect("entries serialize");
        std::fs::write(path, json + "\n")
            .map_err(|e| LlmError::Cassette(format!("{}: {e}", path.display())))
    }

    pub fn entries(&self) -> &[CassetteEntry] {
        &self.entries
    }

    pub fn get(&self, fingerprint: &str) -> Option<&CassetteEntry> {
        self.entries.iter().find(|e| e.fingerprint == fingerprint)
    }

    /// Adds an entry, replacing any earlier one with the same fingerprint.
    pub fn insert(&mut self, entry: CassetteEntry) {
        match self
            .entries
            .iter_mut()
            .find(|e| e.fingerprint == entry.fingerprint)
        {
            Some(slot) => *slot = entry,
            None => self.entries.push(entry),
        }
    }

    pub fn record(&mut self, req: &CompletionRequest, response: &str) {
        self.insert(CassetteEntry {
            fingerprint: fingerprint(req),
            request: req.clone(),
            response_text: response.to_string(),
            recorded_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        });
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Answers from a cassette by request fingerprint.
#[derive(Debug)]
pub struct ReplayBackend {
    responses: HashMap<String, String>,
}

impl ReplayBackend {
    pub fn new(cassette: &Cassette) -> Self {
        ReplayBackend {
            responses: cassette
                .entries()
                .iter()
                .map(|e| (e.fingerprint.clone(), e.response_text.clone()))
                .collect(),
        }
    }

    pub fn from_file(path: &Path) -> Result<Self, LlmError> {
        Ok(Self::new(&Cassette::load(path)?))
    }
}

impl CompletionBackend for ReplayBackend {
    fn name(&self) -> &str {
        "replay"
    }

    fn complete(&self, req: &CompletionRequest) -> Result<String, LlmError> {
        let fp = fingerprint(req);
        self.responses
            .get(&fp)
            .cloned()
            .ok_or(LlmError::ReplayMiss(fp))
    }
}

/// Forwards to another backend and appends every successful exchange to a
/// cassette file, rewriting it after each call.
pub struct RecordingBackend {
    inner: Arc<dyn CompletionBackend>,
    path: PathBuf,
    cassette: Mutex<Cassette>,
}

impl RecordingBackend {
    pub fn new(
        inner: Arc<dyn CompletionBackend>,
        path: impl Into<PathBuf>,
    ) -> Result<Self, LlmError> {
        let path = path.into();
        let cassette = Cassette::load_or_default(&path)?;
        Ok(RecordingBackend {
            inner,
            path,
            cassette: Mutex::new(cassette),
        })
    }

    pub fn cassette(&self) -> Cassette {
        self.cassette.lock().unwrap().clone()
    }
}

impl CompletionBackend for RecordingBackend {
    fn name(&self) -> &str {
        "recording"
    }

    fn complete(&self, req: &CompletionRequest) -> Result<String, LlmError> {
        let text = self.inner.complete(req)?;
        let mut cassette = self.cassette.lock().unwrap();
        cassette.record(req, &text);
        cassette.save(&self.path)?;
        Ok(text)
    }
}
