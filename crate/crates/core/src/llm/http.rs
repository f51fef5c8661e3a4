use std::time::Duration;

use serde_json::{json, Value};

use super::{Backend, BackendConfig, LlmError};
use crate::prompting::AssembledPrompt;

/// Chat-completions client: one optional system message and one user message.
pub struct HttpChat {
    agent: ureq::Agent,
    url: String,
    model: String,
    token: Option<String>,
}

impl HttpChat {
    /// Reads the bearer token from the variable named by `config.auth_env`.
    pub fn new(config: &BackendConfig) -> Result<Self, LlmError> {
        config.validate()?;
        let token =
            match &config.auth_env {
                Some(var) => Some(std::env::var(var).map_err(|_| {
                    LlmError::Config(format!("environment variable {var} is not set"))
                })?),
                None => None,
            };
        let base = config.endpoint.trim_end_matches('/');
        let url = if base.ends_with("/chat/completions") {
            base.to_owned()
        } else {
            format!("{base}/chat/completions")
        };
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(config.timeout_s)))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(HttpChat {
            agent,
            url,
            model: config.model.clone(),
            token,
        })
    }
}

impl Backend for HttpChat {
    fn model(&self) -> String {
        self.model.clone()
    }

    fn send(&self, prompt: &AssembledPrompt) -> Result<String, LlmError> {
        let mut messages = Vec::new();
        if let Some(system) = &prompt.system {
            messages.push(json!({"role": "system", "content": system}));
        }
        messages.push(json!({"role": "user", "content": prompt.text}));
        let body = json!({
            "model": self.model,
            "temperature": 0,
            "messages": messages,
        });
        let mut request = self.agent.post(&self.url);
        if let Some(token) = &self.token {
            request = request.header("Authorization", &format!("Bearer {token}"));
        }
        let mut response = request
            .send_json(&body)
            .map_err(|e| LlmError::Transport(e.to_string()))?;
        let status = response.status().as_u16();
        let text = response
            .body_mut()
            .read_to_string()
            .map_err(|e| LlmError::Transport(e.to_string()))?;
        if !(200..300).contains(&status) {
            return Err(LlmError::Backend { status, body: text });
        }
        let value: Value = serde_json::from_str(&text).map_err(|e| LlmError::Backend {
            status,
            body: format!("unparseable response ({e}): {text}"),
        })?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_owned)
            .ok_or_else(|| LlmError::Backend {
                status,
                body: format!("response has no message content: {text}"),
            })
    }
}
