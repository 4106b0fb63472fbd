use std::collections::VecDeque;
use std::path::Path;
use std::sync::Mutex;

use super::{CompletionBackend, CompletionRequest, LlmError};

/// Returns queued responses in order, ignoring the request.
#[derive(Debug, Default)]
pub struct ScriptedBackend {
    queue: Mutex<VecDeque<String>>,
}

impl ScriptedBackend {
    pub fn new<I, S>(responses: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        ScriptedBackend {
            queue: Mutex::new(responses.into_iter().map(Into::into).collect()),
        }
    }

    /// Reads a JSON array of response strings.
    pub fn from_file(path: &Path) -> Result<Self, LlmError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LlmError::Config(format!("{}: {e}", path.display())))?;
        let responses: Vec<String> = serde_json::from_str(&text)
            .map_err(|e| LlmError::Config(format!("{}: {e}", path.display())))?;
        Ok(Self::new(responses))
    }

    pub fn remaining(&self) -> usize {
        self.queue.lock().unwrap().len()
    }
}

impl CompletionBackend for ScriptedBackend {
    fn name(&self) -> &str {
        "scripted"
    }

    fn complete(&self, _req: &CompletionRequest) -> Result<String, LlmError> {
        self.queue
            .lock()
            .unwrap()
            .pop_front()
            .ok_or(LlmError::QueueEmpty)
    }
}
