//! Prompt templates and prompt assembly.

use std::collections::BTreeMap;
use std::path::Path;

use super::memory::{PrivateMemory, SharedMemory};
use super::response::{ACTION, BELIEFS_ON_OTHERS, INTERNAL_BELIEFS, RESPONSE};
use super::CognitiveConfig;
use crate::belief::GRAMMAR;
use crate::policy::ChatMessage;
use crate::sim::{DistrictId, Observation, ResourceKind};

/// Editable prompt texts with `{name}` placeholders.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplates {
    pub system: String,
    pub tom_instructions: String,
    pub ib_instructions: String,
    pub state: String,
    pub feedback_format: String,
    pub feedback_verification: String,
    pub feedback_action: String,
}

impl Default for PromptTemplates {
    fn default() -> Self {
        PromptTemplates {
            system: include_str!("../../templates/system.txt").into(),
            tom_instructions: include_str!("../../templates/tom_instructions.txt").into(),
            ib_instructions: include_str!("../../templates/ib_instructions.txt").into(),
            state: include_str!("../../templates/state.txt").into(),
            feedback_format: include_str!("../../templates/feedback_format.txt").into(),
            feedback_verification: include_str!("../../templates/feedback_verification.txt").into(),
            feedback_action: include_str!("../../templates/feedback_action.txt").into(),
        }
    }
}

impl PromptTemplates {
    /// Defaults, overridden by any `<name>.txt` present in `dir`.
    pub fn from_dir(dir: &Path) -> std::io::Result<Self> {
        let mut t = PromptTemplates::default();
        let slots: [(&str, &mut String); 7] = [
            ("system", &mut t.system),
            ("tom_instructions", &mut t.tom_instructions),
            ("ib_instructions", &mut t.ib_instructions),
            ("state", &mut t.state),
            ("feedback_format", &mut t.feedback_format),
            ("feedback_verification", &mut t.feedback_verification),
            ("feedback_action", &mut t.feedback_action),
        ];
        for (name, slot) in slots {
            let path = dir.join(format!("{name}.txt"));
            if path.exists() {
                *slot = std::fs::read_to_string(path)?;
            }
        }
        Ok(t)
    }
}

/// Replaces `{name}` for every name in `vars`; other braces are left alone.
pub fn render(template: &str, vars: &BTreeMap<&str, String>) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let close = after.find('}');
        match close.map(|c| &after[..c]).and_then(|name| vars.get(name).map(|v| (name.len(), v))) {
            Some((len, value)) => {
                out.push_str(value);
                rest = &after[len + 1..];
            }
            None => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

pub fn required_headers(config: CognitiveConfig) -> Vec<&'static str> {
    let mut headers = Vec::new();
    if config.ib_enabled {
        headers.push(INTERNAL_BELIEFS);
    }
    if config.tom_enabled {
        headers.push(BELIEFS_ON_OTHERS);
    }
    headers.push(RESPONSE);
    headers.push(ACTION);
    headers
}

fn join_districts(ds: impl IntoIterator<Item = DistrictId>) -> String {
    ds.into_iter().map(DistrictId::as_str).collect::<Vec<_>>().join(", ")
}

fn base_vars(role: ResourceKind, obs: &Observation) -> BTreeMap<&'static str, String> {
    let edges: Vec<String> = obs.topology.edges().map(|(a, b)| format!("{a}-{b}")).collect();
    BTreeMap::from([
        ("agent_name", role.agent_name().to_string()),
        ("resource", role.as_str().to_string()),
        ("resource_label", role.label().to_string()),
        ("rounds", obs.rounds.to_string()),
        ("capacity", obs.capacity.to_string()),
        ("consumption_rate", obs.consumption_rate.to_string()),
        ("edges", edges.join(", ")),
    ])
}

pub fn render_system(templates: &PromptTemplates, role: ResourceKind, config: CognitiveConfig, obs: &Observation) -> String {
    let mut vars = base_vars(role, obs);
    vars.insert("grammar", GRAMMAR.trim_end().to_string());
    let tom = if config.tom_enabled { render(&templates.tom_instructions, &vars) } else { String::new() };
    let ib = if config.ib_enabled { render(&templates.ib_instructions, &vars) } else { String::new() };
    vars.insert("tom_block", tom);
    vars.insert("ib_block", ib);
    vars.insert("sections", required_headers(config).join("\n"));
    render(&templates.system, &vars)
}

pub fn render_state(templates: &PromptTemplates, obs: &Observation) -> String {
    let mut vars = base_vars(obs.role, obs);
    let health: Vec<String> = obs.health.iter().map(|(d, h)| format!("{d}={h}")).collect();
    let local: Vec<String> = if obs.location.is_supply() {
        vec!["unlimited stock (supply district)".to_string()]
    } else {
        obs.local_resources.iter().map(|(k, v)| format!("{}={v}", k.label())).collect()
    };
    vars.insert("round", (obs.round + 1).to_string());
    vars.insert("location", obs.location.to_string());
    vars.insert("inventory", obs.inventory.to_string());
    vars.insert("neighbors", join_districts(obs.topology.neighbors(obs.location)));
    vars.insert("health", health.join(", "));
    vars.insert("local_resources", local.join(", "));
    render(&templates.state, &vars)
}

/// Initial conversation for one agent turn.
pub fn assemble_prompt(
    templates: &PromptTemplates,
    role: ResourceKind,
    config: CognitiveConfig,
    obs: &Observation,
    shared: &SharedMemory,
    private: &PrivateMemory,
) -> Vec<ChatMessage> {
    let mut messages = vec![
        ChatMessage::system(render_system(templates, role, config, obs)),
        ChatMessage::user(render_state(templates, obs)),
    ];
    let window = shared.render_window(obs.round);
    messages.push(ChatMessage::user(if window.is_empty() {
        "Shared memory: no messages yet.".to_string()
    } else {
        format!("Shared memory (this round and the previous one):\n{window}")
    }));
    if let Some(entry) = private.latest(role) {
        let mut note = format!("Your private notes from round {}:\n", entry.round + 1);
        if let Some(ib) = &entry.internal_beliefs {
            note.push_str(&format!("{INTERNAL_BELIEFS}\n{ib}\n"));
        }
        if let Some(tom) = &entry.beliefs_on_others {
            note.push_str(&format!("{BELIEFS_ON_OTHERS}\n{tom}\n"));
        }
        note.push_str(&format!("{ACTION}\n{}\n", entry.action_text));
        messages.push(ChatMessage::user(note));
    }
    messages
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::memory::PrivateEntry;
    use crate::sim::{SimParams, Topology, WorldState};

    fn obs(role: ResourceKind) -> Observation {
        WorldState::new(SimParams::default(), Topology::default()).unwrap().observation_for(role).unwrap()
    }

    #[test]
    fn render_leaves_unknown_braces() {
        let vars = BTreeMap::from([("x", "1".to_string())]);
        assert_eq!(render("{x} { y } {z} {", &vars), "1 { y } {z} {");
    }

    #[test]
    fn base_prompt_has_only_response_and_action() {
        let t = PromptTemplates::default();
        let m = assemble_prompt(&t, ResourceKind::Food, CognitiveConfig::BASE, &obs(ResourceKind::Food), &Default::default(), &Default::default());
        let system = &m[0].content;
        assert!(system.contains("RESPONSE:") && system.contains("ACTION:"));
        assert!(!system.contains(INTERNAL_BELIEFS));
        assert!(!system.contains(BELIEFS_ON_OTHERS));
        assert!(!system.contains("plan_supply"));
        assert!(!system.contains("{"), "unrendered placeholder in {system}");
    }

    #[test]
    fn tom_prompt_omits_grammar() {
        let t = PromptTemplates::default();
        let m = assemble_prompt(&t, ResourceKind::Food, CognitiveConfig::TOM, &obs(ResourceKind::Food), &Default::default(), &Default::default());
        assert!(m[0].content.contains(BELIEFS_ON_OTHERS));
        assert!(!m[0].content.contains("statement ="));
    }

    #[test]
    fn ib_prompt_includes_grammar() {
        let t = PromptTemplates::default();
        let m = assemble_prompt(&t, ResourceKind::Medicine, CognitiveConfig::IB, &obs(ResourceKind::Medicine), &Default::default(), &Default::default());
        assert!(m[0].content.contains("statement ="));
        assert!(m[0].content.contains("carrying(medicine, n)"));
        assert!(m[0].content.contains("MEDICAL_AGENT"));
    }

    #[test]
    fn round_zero_window_is_empty() {
        let t = PromptTemplates::default();
        let m = assemble_prompt(&t, ResourceKind::Food, CognitiveConfig::TOM_IB, &obs(ResourceKind::Food), &Default::default(), &Default::default());
        assert_eq!(m.len(), 3);
        assert_eq!(m[2].content, "Shared memory: no messages yet.");
        assert!(m[1].content.contains("round 1 of 7"));
    }

    #[test]
    fn own_private_entry_included() {
        let t = PromptTemplates::default();
        let mut private = PrivateMemory::default();
        private.append(
            ResourceKind::Food,
            PrivateEntry { round: 0, internal_beliefs: Some("at(self,d1).".into()), beliefs_on_others: None, action_text: "MOVE(d2)".into() },
        );
        let m = assemble_prompt(&t, ResourceKind::Food, CognitiveConfig::IB, &obs(ResourceKind::Food), &Default::default(), &private);
        assert!(m[3].content.contains("at(self,d1)."));
        let other = assemble_prompt(&t, ResourceKind::Security, CognitiveConfig::IB, &obs(ResourceKind::Security), &Default::default(), &private);
        assert!(other.iter().all(|msg| !msg.content.contains("at(self,d1).")));
    }

    #[test]
    fn templates_from_dir_override() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("state.txt"), "Round {round}.").unwrap();
        let t = PromptTemplates::from_dir(dir.path()).unwrap();
        assert_eq!(render_state(&t, &obs(ResourceKind::Food)), "Round 1.");
        assert_eq!(t.system, PromptTemplates::default().system);
    }
}
