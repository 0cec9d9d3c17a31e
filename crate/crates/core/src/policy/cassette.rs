//! Record/replay of policy responses keyed by a fingerprint of the request.

use std::path::Path;
use std::sync::{Arc, Mutex, MutexGuard};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{ChatMessage, Policy, PolicyError, PolicyRequest};
use crate::sim::ResourceKind;

pub const CASSETTE_VERSION: u32 = 1;

/// SHA-256 over the canonical JSON encoding of the message list.
pub fn fingerprint(messages: &[ChatMessage]) -> String {
    let bytes = serde_json::to_vec(messages).expect("messages serialize");
    hex::encode(Sha256::digest(&bytes))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CassetteEntry {
    pub fingerprint: String,
    pub role: ResourceKind,
    pub response: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cassette {
    pub version: u32,
    pub entries: Vec<CassetteEntry>,
}

impl Default for Cassette {
    fn default() -> Self {
        Cassette { version: CASSETTE_VERSION, entries: Vec::new() }
    }
}

impl Cassette {
    pub fn load(path: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let mut text = serde_json::to_string_pretty(self).expect("cassette serializes");
        text.push('\n');
        std::fs::write(path, text)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mode {
    Record,
    Replay,
}

#[derive(Debug)]
struct State {
    mode: Mode,
    cassette: Cassette,
    cursor: usize,
}

/// One cassette shared by the policies of a single trial; calls from all roles
/// interleave in turn order.
#[derive(Debug, Clone)]
pub struct CassetteHandle(Arc<Mutex<State>>);

impl CassetteHandle {
    pub fn recording() -> Self {
        CassetteHandle(Arc::new(Mutex::new(State { mode: Mode::Record, cassette: Cassette::default(), cursor: 0 })))
    }

    pub fn replaying(cassette: Cassette) -> Self {
        CassetteHandle(Arc::new(Mutex::new(State { mode: Mode::Replay, cassette, cursor: 0 })))
    }

    fn lock(&self) -> MutexGuard<'_, State> {
        self.0.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Snapshot of the recorded (or loaded) entries.
    pub fn cassette(&self) -> Cassette {
        self.lock().cassette.clone()
    }

    /// Number of calls served so far.
    pub fn position(&self) -> usize {
        self.lock().cursor
    }
}

/// Wraps an inner policy in record mode, or stands alone in replay mode.
pub struct CassettePolicy {
    handle: CassetteHandle,
    inner: Option<Box<dyn Policy>>,
    label: String,
}

impl CassettePolicy {
    pub fn record(inner: Box<dyn Policy>, handle: CassetteHandle) -> Self {
        let label = format!("record:{}", inner.name());
        CassettePolicy { handle, inner: Some(inner), label }
    }

    pub fn replay(handle: CassetteHandle, label: impl Into<String>) -> Self {
        CassettePolicy { handle, inner: None, label: label.into() }
    }
}

impl Policy for CassettePolicy {
    fn name(&self) -> String {
        self.label.clone()
    }

    fn respond(&mut self, request: &PolicyRequest<'_>) -> Result<String, PolicyError> {
        let fp = fingerprint(request.messages);
        let mode = self.handle.lock().mode;
        match mode {
            Mode::Record => {
                let inner = self.inner.as_mut().expect("record mode has an inner policy");
                let response = inner.respond(request)?;
                let mut state = self.handle.lock();
                state.cassette.entries.push(CassetteEntry {
                    fingerprint: fp,
                    role: request.role,
                    response: response.clone(),
                });
                state.cursor += 1;
                Ok(response)
            }
            Mode::Replay => {
                let mut state = self.handle.lock();
                let index = state.cursor;
                let entry = state.cassette.entries.get(index).ok_or(PolicyError::CassetteExhausted { index })?;
                if entry.fingerprint != fp || entry.role != request.role {
                    return Err(PolicyError::FingerprintMismatch { index });
                }
                let response = entry.response.clone();
                state.cursor += 1;
                Ok(response)
            }
        }
    }
}
