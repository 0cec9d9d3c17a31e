use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::sim::ResourceKind;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SharedEntry {
    pub round: u32,
    pub role: ResourceKind,
    pub response: String,
}

/// Team-visible log of RESPONSE sections, in turn order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SharedMemory {
    entries: Vec<SharedEntry>,
}

impl SharedMemory {
    pub fn append(&mut self, round: u32, role: ResourceKind, response: impl Into<String>) {
        self.entries.push(SharedEntry { round, role, response: response.into() });
    }

    pub fn entries(&self) -> &[SharedEntry] {
        &self.entries
    }

    /// Entries from the current and the previous round.
    pub fn window(&self, round: u32) -> impl Iterator<Item = &SharedEntry> {
        let from = round.saturating_sub(1);
        self.entries.iter().filter(move |e| e.round >= from && e.round <= round)
    }

    pub fn render_window(&self, round: u32) -> String {
        let mut out = String::new();
        for e in self.window(round) {
            out.push_str(&format!("[round {}] {}:\n{}\n", e.round + 1, e.role.agent_name(), e.response));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrivateEntry {
    pub round: u32,
    pub internal_beliefs: Option<String>,
    pub beliefs_on_others: Option<String>,
    pub action_text: String,
}

/// Per-agent log of the sections that are never shared.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrivateMemory {
    entries: BTreeMap<ResourceKind, Vec<PrivateEntry>>,
}

impl PrivateMemory {
    pub fn append(&mut self, role: ResourceKind, entry: PrivateEntry) {
        self.entries.entry(role).or_default().push(entry);
    }

    pub fn latest(&self, role: ResourceKind) -> Option<&PrivateEntry> {
        self.entries.get(&role).and_then(|v| v.last())
    }

    pub fn entries(&self, role: ResourceKind) -> &[PrivateEntry] {
        self.entries.get(&role).map(Vec::as_slice).unwrap_or_default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_covers_two_rounds() {
        let mut m = SharedMemory::default();
        for r in 0..4 {
            m.append(r, ResourceKind::Food, format!("r{r}"));
        }
        let rounds: Vec<u32> = m.window(2).map(|e| e.round).collect();
        assert_eq!(rounds, vec![1, 2]);
        assert_eq!(m.window(0).count(), 1);
        assert!(SharedMemory::default().render_window(0).is_empty());
    }

    #[test]
    fn private_latest() {
        let mut m = PrivateMemory::default();
        assert!(m.latest(ResourceKind::Food).is_none());
        let e = PrivateEntry { round: 0, internal_beliefs: None, beliefs_on_others: None, action_text: "MOVE(d2)".into() };
        m.append(ResourceKind::Food, e.clone());
        assert_eq!(m.latest(ResourceKind::Food), Some(&e));
        assert!(m.latest(ResourceKind::Security).is_none());
    }
}
