use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One classification request.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChatRequest {
    pub paper_id: String,
    pub repetition: usize,
    pub prompt: String,
}

/// A request/response channel to a chat model.
pub trait Transport: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<String>;

    /// Whether a failed request is worth retrying.
    fn retryable(&self) -> bool {
        true
    }
}

impl<T: Transport + ?Sized> Transport for &T {
    fn complete(&self, request: &ChatRequest) -> Result<String> {
        (**self).complete(request)
    }

    fn retryable(&self) -> bool {
        (**self).retryable()
    }
}

/// Adapts a closure; handy for fixtures.
pub struct FnTransport<F>(pub F);

impl<F> Transport for FnTransport<F>
where
    F: Fn(&ChatRequest) -> Result<String> + Send + Sync,
{
    fn complete(&self, request: &ChatRequest) -> Result<String> {
        (self.0)(request)
    }
}

/// What was asked and answered for one (paper, repetition).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub paper_id: String,
    pub repetition: usize,
    pub prompt: String,
    /// Raw model reply; absent when every attempt failed.
    pub response: Option<String>,
    pub error: Option<String>,
    /// Parsed class name; absent on parse or transport failure.
    pub parsed: Option<String>,
    pub attempts: usize,
}

/// Directory of transcripts, one JSON file per (paper, repetition).
#[derive(Debug, Clone)]
pub struct TranscriptStore {
    dir: PathBuf,
}

fn file_stem(paper_id: &str) -> String {
    paper_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' })
        .collect()
}

impl TranscriptStore {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// `<dir>/<paper_id>__rep<r>.json`, with characters outside
    /// `[A-Za-z0-9.-]` in the id replaced by `_`.
    pub fn path(&self, paper_id: &str, repetition: usize) -> PathBuf {
        self.dir.join(format!("{}__rep{repetition}.json", file_stem(paper_id)))
    }

    pub fn save(&self, t: &Transcript) -> Result<()> {
        fs::create_dir_all(&self.dir)?;
        fs::write(self.path(&t.paper_id, t.repetition), serde_json::to_string_pretty(t)? + "\n")?;
        Ok(())
    }

    pub fn load(&self, paper_id: &str, repetition: usize) -> Result<Transcript> {
        let path = self.path(paper_id, repetition);
        let text = fs::read_to_string(&path)
            .map_err(|e| Error::Transport(format!("no recorded transcript {}: {e}", path.display())))?;
        let t: Transcript = serde_json::from_str(&text)?;
        if t.paper_id != paper_id || t.repetition != repetition {
            return Err(Error::format(&path, "transcript key does not match its file name"));
        }
        Ok(t)
    }
}

/// Answers from a [`TranscriptStore`]. A recorded failure replays as a
/// failure; a missing file is a transport error.
pub struct ReplayTransport {
    store: TranscriptStore,
}

impl ReplayTransport {
    pub fn new(store: TranscriptStore) -> Self {
        Self { store }
    }
}

impl Transport for ReplayTransport {
    fn complete(&self, request: &ChatRequest) -> Result<String> {
        let t = self.store.load(&request.paper_id, request.repetition)?;
        if t.prompt != request.prompt {
            log::warn!("prompt for {} rep {} differs from the recording", request.paper_id, request.repetition);
        }
        t.response
            .ok_or_else(|| Error::Transport(t.error.unwrap_or_else(|| "recorded failure".into())))
    }

    fn retryable(&self) -> bool {
        false
    }
}

#[cfg(feature = "live")]
pub use http::HttpTransport;

#[cfg(feature = "live")]
mod http {
    use std::time::Duration;

    use serde_json::{json, Value};

    use super::{ChatRequest, Transport};
    use crate::error::{Error, Result};

    pub const ENV_BASE_URL: &str = "SURVEYTAX_LLM_BASE_URL";
    pub const ENV_MODEL: &str = "SURVEYTAX_LLM_MODEL";
    pub const ENV_API_KEY: &str = "SURVEYTAX_LLM_API_KEY";

    /// OpenAI-style `POST {base_url}/chat/completions` client.
    pub struct HttpTransport {
        agent: ureq::Agent,
        base_url: String,
        model: String,
        api_key: Option<String>,
        pub temperature: Option<f64>,
    }

    impl HttpTransport {
        pub fn new(base_url: impl Into<String>, model: impl Into<String>, api_key: Option<String>) -> Self {
            let agent = ureq::Agent::config_builder()
                .timeout_global(Some(Duration::from_secs(120)))
                .build()
                .into();
            Self {
                agent,
                base_url: base_url.into().trim_end_matches('/').to_string(),
                model: model.into(),
                api_key,
                temperature: None,
            }
        }

        /// Reads the endpoint, model and optional key from the environment.
        pub fn from_env() -> Result<Self> {
            let get = |k: &str| std::env::var(k).ok().filter(|v| !v.is_empty());
            let base = get(ENV_BASE_URL).ok_or_else(|| Error::Config(format!("{ENV_BASE_URL} is not set")))?;
            let model = get(ENV_MODEL).ok_or_else(|| Error::Config(format!("{ENV_MODEL} is not set")))?;
            Ok(Self::new(base, model, get(ENV_API_KEY)))
        }

        pub fn endpoint(&self) -> String {
            format!("{}/chat/completions", self.base_url)
        }
    }

    impl Transport for HttpTransport {
        fn complete(&self, request: &ChatRequest) -> Result<String> {
            let mut body = json!({
                "model": self.model,
                "messages": [{"role": "user", "content": request.prompt}],
            });
            if let Some(t) = self.temperature {
                body["temperature"] = json!(t);
            }
            let mut req = self.agent.post(self.endpoint()).header("Content-Type", "application/json");
            if let Some(key) = &self.api_key {
                req = req.header("Authorization", format!("Bearer {key}"));
            }
            let mut resp = req.send_json(&body).map_err(|e| Error::Transport(e.to_string()))?;
            let value: Value = resp.body_mut().read_json().map_err(|e| Error::Transport(e.to_string()))?;
            value["choices"][0]["message"]["content"]
                .as_str()
                .map(String::from)
                .ok_or_else(|| Error::Transport("response has no choices[0].message.content".into()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn store_round_trip_and_replay() {
        let dir = tempfile::tempdir().unwrap();
        let store = TranscriptStore::new(dir.path());
        let t = Transcript {
            paper_id: "2401.00001v2".into(),
            repetition: 3,
            prompt: "p".into(),
            response: Some("Law".into()),
            error: None,
            parsed: Some("Law".into()),
            attempts: 1,
        };
        store.save(&t).unwrap();
        assert!(store.path("2401.00001v2", 3).ends_with("2401.00001v2__rep3.json"));
        assert_eq!(store.load("2401.00001v2", 3).unwrap(), t);
        let replay = ReplayTransport::new(store);
        let req = ChatRequest { paper_id: "2401.00001v2".into(), repetition: 3, prompt: "p".into() };
        assert_eq!(replay.complete(&req).unwrap(), "Law");
        let missing = ChatRequest { repetition: 4, ..req };
        assert!(matches!(replay.complete(&missing), Err(Error::Transport(_))));
    }

    #[test]
    fn ids_are_sanitized() {
        let store = TranscriptStore::new("/x");
        assert!(store.path("cs/0101001", 0).ends_with("cs_0101001__rep0.json"));
    }
}
