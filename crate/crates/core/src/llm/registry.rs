use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use super::{
    CompletionBackend, LiveBackend, LiveConfig, LlmError, RecordingBackend, ReplayBackend,
    ScriptedBackend,
};

/// Everything a backend factory may need.
#[derive(Clone, Debug, Default)]
pub struct BackendConfig {
    pub cassette: Option<PathBuf>,
    pub script: Option<PathBuf>,
    /// Wrap the backend so every exchange is written to `cassette`.
    pub record: bool,
    pub live: LiveConfig,
}

pub type BackendFactory =
    Box<dyn Fn(&BackendConfig) -> Result<Arc<dyn CompletionBackend>, LlmError> + Send + Sync>;

/// Named backend constructors.
pub struct BackendRegistry {
    factories: BTreeMap<String, BackendFactory>,
}

impl Default for BackendRegistry {
    fn default() -> Self {
        Self::with_defaults()
    }
}

impl BackendRegistry {
    pub fn empty() -> Self {
        BackendRegistry {
            factories: BTreeMap::new(),
        }
    }

    /// `live`, `replay` and `scripted`.
    pub fn with_defaults() -> Self {
        let mut r = Self::empty();
        r.register("live", |cfg| {
            Ok(Arc::new(LiveBackend::new(cfg.live.clone())?))
        });
        r.register("replay", |cfg| {
            let path = cfg
                .cassette
                .as_ref()
                .ok_or_else(|| LlmError::Config("replay backend needs a cassette path".into()))?;
            Ok(Arc::new(ReplayBackend::from_file(path)?))
        });
        r.register("scripted", |cfg| {
            let path = cfg
                .script
                .as_ref()
                .ok_or_else(|| LlmError::Config("scripted backend needs a script file".into()))?;
            Ok(Arc::new(ScriptedBackend::from_file(path)?))
        });
        r
    }

    pub fn register<F>(&mut self, name: &str, factory: F)
    where
        F: Fn(&BackendConfig) -> Result<Arc<dyn CompletionBackend>, LlmError>
            + Send
            + Sync
            + 'static,
    {
        self.factories.insert(name.to_string(), Box::new(factory));
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }

    pub fn build(
        &self,
        name: &str,
        cfg: &BackendConfig,
    ) -> Result<Arc<dyn CompletionBackend>, LlmError> {
        let factory = self.factories.get(name).ok_or_else(|| {
            let known: Vec<_> = self.names().collect();
            LlmError::Config(format!(
                "unknown backend `{name}` (known: {})",
                known.join(", ")
            ))
        })?;
        let backend = factory(cfg)?;
        if !cfg.record {
            return Ok(backend);
        }
        let path = cfg
            .cassette
            .as_ref()
            .ok_or_else(|| LlmError::Config("recording needs a cassette path".into()))?;
        Ok(Arc::new(RecordingBackend::new(backend, path)?))
    }
}
