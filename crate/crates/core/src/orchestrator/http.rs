//! Chat-completion provider speaking the OpenAI-compatible wire protocol.

use std::fmt;
use std::sync::mpsc;
use std::thread;
use std::time::Duration;

use serde_json::{json, Value};

use super::provider::{CompletionRequest, Provider, ProviderError};

/// Environment variable holding the bearer token.
pub const API_KEY_ENV: &str = "FLEXMIND_API_KEY";

const CANCEL_POLL: Duration = Duration::from_millis(50);

#[derive(Clone)]
pub struct HttpProviderConfig {
    /// Base URL up to and including the version segment, e.g. `https://api.openai.com/v1`.
    pub base_url: String,
    pub timeout: Duration,
    pub api_key: Option<String>,
}

impl HttpProviderConfig {
    /// Config with the key taken from [`API_KEY_ENV`].
    pub fn from_env(base_url: impl Into<String>, timeout: Duration) -> Self {
        Self {
            base_url: base_url.into(),
            timeout,
            api_key: std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty()),
        }
    }
}

impl fmt::Debug for HttpProviderConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HttpProviderConfig")
            .field("base_url", &self.base_url)
            .field("timeout", &self.timeout)
            .field("api_key", &self.api_key.as_ref().map(|_| "<redacted>"))
            .finish()
    }
}

#[derive(Debug, Clone)]
pub struct HttpProvider {
    config: HttpProviderConfig,
    agent: ureq::Agent,
}

impl HttpProvider {
    pub fn new(config: HttpProviderConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self { config, agent }
    }

    fn endpoint(&self) -> String {
        format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'))
    }

    fn send(
        agent: ureq::Agent,
        url: String,
        key: Option<String>,
        body: Value,
        timeout: Duration,
    ) -> Result<String, ProviderError> {
        let mut request = agent.post(&url).header("Content-Type", "application/json");
        if let Some(key) = &key {
            request = request.header("Authorization", format!("Bearer {key}"));
        }
        let mut response = request.send_json(&body).map_err(|e| map_error(e, timeout))?;
        let status = response.status().as_u16();
        let text = response
            .body_mut()
            .read_to_string()
            .map_err(|e| map_error(e, timeout))?;
        if !(200..300).contains(&status) {
            return Err(ProviderError::Status {
                status,
                body: text.chars().take(500).collect(),
            });
        }
        let value: Value = serde_json::from_str(&text).map_err(|e| ProviderError::BadResponse(e.to_string()))?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| ProviderError::BadResponse("missing choices[0].message.content".into()))
    }
}

fn map_error(err: ureq::Error, timeout: Duration) -> ProviderError {
    match err {
        ureq::Error::Timeout(_) => ProviderError::Timeout(timeout.as_secs()),
        other => ProviderError::Transport(other.to_string()),
    }
}

impl Provider for HttpProvider {
    fn id(&self) -> String {
        "http".into()
    }

    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, ProviderError> {
        let body = json!({
            "model": request.params.model_name,
            "messages": [{ "role": "user", "content": request.prompt }],
            "temperature": request.params.temperature,
        });
        let (tx, rx) = mpsc::channel();
        let agent = self.agent.clone();
        let url = self.endpoint();
        let key = self.config.api_key.clone();
        let timeout = self.config.timeout;
        // The call runs on its own thread so a cancel can return immediately;
        // an abandoned call finishes (or times out) in the background.
        thread::spawn(move || {
            let _ = tx.send(Self::send(agent, url, key, body, timeout));
        });
        let reply = loop {
            if request.cancel.is_some_and(|c| c.is_cancelled()) {
                return Err(ProviderError::Cancelled);
            }
            match rx.recv_timeout(CANCEL_POLL) {
                Ok(result) => break result?,
                Err(mpsc::RecvTimeoutError::Timeout) => continue,
                Err(mpsc::RecvTimeoutError::Disconnected) => {
                    return Err(ProviderError::Transport("request thread exited".into()));
                }
            }
        };
        Ok(reply.chars().take(request.params.max_output_chars).collect())
    }
}
