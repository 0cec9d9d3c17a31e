//! Response generators that stand behind an agent: remote chat endpoints, the
//! deterministic heuristic baseline, scripted responses and record/replay
//! cassettes.

mod cassette;
mod heuristic;
mod http;

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cassette::{fingerprint, Cassette, CassetteEntry, CassetteHandle, CassettePolicy, CASSETTE_VERSION};
pub use heuristic::{heuristic_respond, HeuristicPolicy};
pub use http::{complete, EndpointConfig, HttpPolicy, Provider};

use crate::harness::CognitiveConfig;
use crate::sim::{Observation, ResourceKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChatRole {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: ChatRole,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage { role: ChatRole::System, content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage { role: ChatRole::User, content: content.into() }
    }

    /// Empty policy output still has to be recorded; it is stored as a single space.
    pub fn assistant(content: impl Into<String>) -> Self {
        let content = content.into();
        let content = if content.is_empty() { " ".to_string() } else { content };
        ChatMessage { role: ChatRole::Assistant, content }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PolicyError {
    #[error("request timed out after {0} s")]
    Timeout(u64),
    #[error("endpoint returned HTTP {code}: {body}")]
    HttpStatus { code: u16, body: String },
    #[error("malformed provider response: {0}")]
    MalformedProviderResponse(String),
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("credential environment variable {0} is not set")]
    MissingCredential(String),
    #[error("cassette fingerprint mismatch at call {index}")]
    FingerprintMismatch { index: usize },
    #[error("cassette exhausted at call {index}")]
    CassetteExhausted { index: usize },
    #[error("script exhausted after {0} responses")]
    ScriptExhausted(usize),
}

/// Everything a policy may look at when producing one response.
#[derive(Debug, Clone, Copy)]
pub struct PolicyRequest<'a> {
    pub role: ResourceKind,
    pub config: CognitiveConfig,
    pub messages: &'a [ChatMessage],
    pub observation: &'a Observation,
    /// Rendered shared-memory window the prompt shows.
    pub shared_window: &'a str,
    pub seed: u64,
}

pub trait Policy: Send {
    fn name(&self) -> String;
    fn respond(&mut self, request: &PolicyRequest<'_>) -> Result<String, PolicyError>;
}

impl<P: Policy + ?Sized> Policy for Box<P> {
    fn name(&self) -> String {
        (**self).name()
    }

    fn respond(&mut self, request: &PolicyRequest<'_>) -> Result<String, PolicyError> {
        (**self).respond(request)
    }
}

/// Returns canned responses in order; errors once they run out.
#[derive(Debug, Clone, Default)]
pub struct ScriptedPolicy {
    responses: VecDeque<String>,
    served: usize,
}

impl ScriptedPolicy {
    pub fn new<I, S>(responses: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        ScriptedPolicy { responses: responses.into_iter().map(Into::into).collect(), served: 0 }
    }
}

impl Policy for ScriptedPolicy {
    fn name(&self) -> String {
        "scripted".into()
    }

    fn respond(&mut self, _request: &PolicyRequest<'_>) -> Result<String, PolicyError> {
        let next = self.responses.pop_front().ok_or(PolicyError::ScriptExhausted(self.served))?;
        self.served += 1;
        Ok(next)
    }
}
