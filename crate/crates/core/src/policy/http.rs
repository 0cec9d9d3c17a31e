//! Blocking chat-completion client with transport retries.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{ChatMessage, ChatRole, Policy, PolicyError, PolicyRequest};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provider {
    /// `POST {base_url}/chat/completions`, bearer auth, `choices[0].message.content`.
    #[default]
    OpenaiCompatible,
    /// `POST {base_url}/messages`, `x-api-key` auth, system prompt outside the
    /// message list, `content[].text`.
    Anthropic,
}

/// Where and how to reach a model. The API key itself is only ever read from
/// the environment variable named here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndpointConfig {
    #[serde(default)]
    pub provider: Provider,
    pub base_url: String,
    pub model: String,
    /// Name of the environment variable holding the API key; `None` sends no credential.
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    #[serde(default = "default_retries")]
    pub max_transport_retries: u32,
    /// First backoff delay; doubles on each retry.
    #[serde(default = "default_backoff")]
    pub backoff_ms: u64,
}

fn default_max_tokens() -> u32 {
    1024
}
fn default_timeout() -> u64 {
    60
}
fn default_retries() -> u32 {
    3
}
fn default_backoff() -> u64 {
    500
}

impl EndpointConfig {
    pub fn new(provider: Provider, base_url: impl Into<String>, model: impl Into<String>) -> Self {
        EndpointConfig {
            provider,
            base_url: base_url.into(),
            model: model.into(),
            api_key_env: None,
            temperature: 0.0,
            max_tokens: default_max_tokens(),
            timeout_secs: default_timeout(),
            max_transport_retries: default_retries(),
            backoff_ms: default_backoff(),
        }
    }

    fn api_key(&self) -> Result<Option<String>, PolicyError> {
        match &self.api_key_env {
            None => Ok(None),
            Some(var) => std::env::var(var).map(Some).map_err(|_| PolicyError::MissingCredential(var.clone())),
        }
    }

    fn url(&self) -> String {
        let base = self.base_url.trim_end_matches('/');
        match self.provider {
            Provider::OpenaiCompatible => format!("{base}/chat/completions"),
            Provider::Anthropic => format!("{base}/messages"),
        }
    }
}

fn role_name(role: ChatRole) -> &'static str {
    match role {
        ChatRole::System => "system",
        ChatRole::User => "user",
        ChatRole::Assistant => "assistant",
    }
}

fn request_body(messages: &[ChatMessage], cfg: &EndpointConfig, seed: Option<u64>) -> Value {
    match cfg.provider {
        Provider::OpenaiCompatible => {
            let msgs: Vec<Value> =
                messages.iter().map(|m| json!({"role": role_name(m.role), "content": m.content})).collect();
            let mut body = json!({
                "model": cfg.model,
                "messages": msgs,
                "temperature": cfg.temperature,
                "max_tokens": cfg.max_tokens,
            });
            if let Some(seed) = seed {
                body["seed"] = json!(seed);
            }
            body
        }
        Provider::Anthropic => {
            let system: Vec<&str> =
                messages.iter().filter(|m| m.role == ChatRole::System).map(|m| m.content.as_str()).collect();
            // consecutive turns of the same role are merged; the API wants strict alternation
            let mut turns: Vec<(ChatRole, String)> = Vec::new();
            for m in messages.iter().filter(|m| m.role != ChatRole::System) {
                match turns.last_mut() {
                    Some((role, content)) if *role == m.role => {
                        content.push_str("\n\n");
                        content.push_str(&m.content);
                    }
                    _ => turns.push((m.role, m.content.clone())),
                }
            }
            let msgs: Vec<Value> =
                turns.iter().map(|(r, c)| json!({"role": role_name(*r), "content": c})).collect();
            json!({
                "model": cfg.model,
                "system": system.join("\n\n"),
                "messages": msgs,
                "temperature": cfg.temperature,
                "max_tokens": cfg.max_tokens,
            })
        }
    }
}

fn extract_text(body: &Value, provider: Provider) -> Result<String, PolicyError> {
    let text = match provider {
        Provider::OpenaiCompatible => body
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string),
        Provider::Anthropic => body.get("content").and_then(Value::as_array).map(|blocks| {
            blocks
                .iter()
                .filter(|b| b.get("type").and_then(Value::as_str) == Some("text"))
                .filter_map(|b| b.get("text").and_then(Value::as_str))
                .collect::<Vec<_>>()
                .join("")
        }),
    };
    text.ok_or_else(|| {
        let mut preview = body.to_string();
        preview.truncate(200);
        PolicyError::MalformedProviderResponse(format!("no completion text in {preview}"))
    })
}

fn build_agent(cfg: &EndpointConfig) -> ureq::Agent {
    ureq::Agent::config_builder()
        .timeout_global(Some(Duration::from_secs(cfg.timeout_secs)))
        .http_status_as_error(false)
        .build()
        .into()
}

fn send_once(agent: &ureq::Agent, cfg: &EndpointConfig, key: Option<&str>, body: &Value) -> Result<String, PolicyError> {
    let mut request = agent.post(cfg.url()).header("content-type", "application/json");
    if let Some(key) = key {
        request = match cfg.provider {
            Provider::OpenaiCompatible => request.header("authorization", format!("Bearer {key}")),
            Provider::Anthropic => request.header("x-api-key", key).header("anthropic-version", "2023-06-01"),
        };
    }
    let mut response = request.send_json(body).map_err(|e| match e {
        ureq::Error::Timeout(_) => PolicyError::Timeout(cfg.timeout_secs),
        other => PolicyError::Transport(other.to_string()),
    })?;
    let code = response.status().as_u16();
    let text = response.body_mut().read_to_string().map_err(|e| match e {
        ureq::Error::Timeout(_) => PolicyError::Timeout(cfg.timeout_secs),
        other => PolicyError::Transport(other.to_string()),
    })?;
    if !(200..300).contains(&code) {
        let mut body = text;
        body.truncate(200);
        return Err(PolicyError::HttpStatus { code, body });
    }
    let value: Value = serde_json::from_str(&text)
        .map_err(|e| PolicyError::MalformedProviderResponse(format!("invalid JSON: {e}")))?;
    extract_text(&value, cfg.provider)
}

fn retryable(err: &PolicyError) -> bool {
    match err {
        PolicyError::Timeout(_) | PolicyError::Transport(_) => true,
        PolicyError::HttpStatus { code, .. } => *code == 429 || *code >= 500,
        _ => false,
    }
}

fn complete_with(agent: &ureq::Agent, messages: &[ChatMessage], cfg: &EndpointConfig, seed: Option<u64>) -> Result<String, PolicyError> {
    let key = cfg.api_key()?;
    let body = request_body(messages, cfg, seed);
    let mut attempt = 0;
    loop {
        match send_once(agent, cfg, key.as_deref(), &body) {
            Ok(text) => return Ok(text),
            Err(e) if retryable(&e) && attempt < cfg.max_transport_retries => {
                let delay = cfg.backoff_ms.saturating_mul(1u64 << attempt.min(16));
                std::thread::sleep(Duration::from_millis(delay));
                attempt += 1;
            }
            Err(e) => return Err(e),
        }
    }
}

/// One chat completion; transport failures and 5xx/429 are retried with
/// exponential backoff, anything else is returned as is.
pub fn complete(messages: &[ChatMessage], cfg: &EndpointConfig) -> Result<String, PolicyError> {
    complete_with(&build_agent(cfg), messages, cfg, None)
}

/// Live model behind an endpoint.
pub struct HttpPolicy {
    cfg: EndpointConfig,
    agent: ureq::Agent,
}

impl HttpPolicy {
    pub fn new(cfg: EndpointConfig) -> Self {
        let agent = build_agent(&cfg);
        HttpPolicy { cfg, agent }
    }
}

impl Policy for HttpPolicy {
    fn name(&self) -> String {
        self.cfg.model.clone()
    }

    fn respond(&mut self, request: &PolicyRequest<'_>) -> Result<String, PolicyError> {
        complete_with(&self.agent, request.messages, &self.cfg, Some(request.seed))
    }
}
