//! Rule-based baseline agent. Pure function of its inputs, so trials driven by
//! it are fully reproducible without any network access.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::OnceLock;

use regex::Regex;

use super::{Policy, PolicyError, PolicyRequest};
use crate::harness::response::{ACTION, BELIEFS_ON_OTHERS, INTERNAL_BELIEFS, RESPONSE};
use crate::harness::CognitiveConfig;
use crate::sim::{Action, DistrictId, Observation, ResourceKind};

/// Own-kind level at which the heuristic starts supplying.
const SUPPLY_THRESHOLD: u32 = 20;
/// Margin added on top of the threshold when topping a district up.
const SUPPLY_MARGIN: u32 = 10;

#[derive(Debug, Clone, Copy, Default)]
pub struct HeuristicPolicy;

impl Policy for HeuristicPolicy {
    fn name(&self) -> String {
        "heuristic".into()
    }

    fn respond(&mut self, request: &PolicyRequest<'_>) -> Result<String, PolicyError> {
        Ok(heuristic_respond(request.observation, request.config, request.shared_window))
    }
}

fn report_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"REPORT (d\d) round (\d+): food=(\d+) medicine=(\d+) security=(\d+)").expect("valid regex")
    })
}

fn position_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"([A-Z]+_AGENT) at (d\d) in round (\d+)").expect("valid regex"))
}

/// Latest reported own-kind level per district, with the (1-based) round it
/// was reported in.
fn reported_levels(kind: ResourceKind, window: &str) -> BTreeMap<DistrictId, (u32, u32)> {
    let mut out = BTreeMap::new();
    for caps in report_regex().captures_iter(window) {
        let Ok(district) = caps[1].parse::<DistrictId>() else { continue };
        let Ok(round) = caps[2].parse::<u32>() else { continue };
        let column = match kind {
            ResourceKind::Food => 3,
            ResourceKind::Medicine => 4,
            ResourceKind::Security => 5,
        };
        let Ok(level) = caps[column].parse::<u32>() else { continue };
        match out.get(&district) {
            Some(&(_, seen)) if seen > round => {}
            _ => {
                out.insert(district, (level, round));
            }
        }
    }
    out
}

fn estimate_levels(obs: &Observation, window: &str) -> BTreeMap<DistrictId, u32> {
    let now = obs.round + 1;
    let reported = reported_levels(obs.role, window);
    DistrictId::regular()
        .map(|d| {
            let level = if d == obs.location {
                obs.local_resources.get(&obs.role).copied().unwrap_or(0)
            } else if let Some(&(level, round)) = reported.get(&d) {
                level.saturating_sub(obs.consumption_rate.saturating_mul(now.saturating_sub(round)))
            } else {
                // unseen districts are assumed empty
                0
            };
            (d, level)
        })
        .collect()
}

fn choose_action(obs: &Observation, estimates: &BTreeMap<DistrictId, u32>) -> Action {
    let topology = &obs.topology;
    let first_neighbor = || topology.neighbors(obs.location).first().copied().unwrap_or(obs.location);

    if obs.inventory == 0 {
        if let Some(hop) = topology.next_hop(obs.location, DistrictId::SUPPLY) {
            return Action::Move { target: hop };
        }
    }
    if obs.inventory > 0 && !obs.location.is_supply() {
        let level = obs.local_resources.get(&obs.role).copied().unwrap_or(0);
        if level < SUPPLY_THRESHOLD {
            let amount = obs.inventory.min(SUPPLY_THRESHOLD - level + SUPPLY_MARGIN);
            return Action::Supply { amount: i64::from(amount) };
        }
    }
    let target = estimates
        .iter()
        .filter(|(d, _)| **d != obs.location)
        .min_by_key(|(d, level)| (**level, **d))
        .map(|(d, _)| *d);
    let hop = target.and_then(|t| topology.next_hop(obs.location, t)).unwrap_or_else(first_neighbor);
    Action::Move { target: hop }
}

fn beliefs(obs: &Observation, action: Action) -> String {
    let kind = obs.role.as_str();
    let mut out = String::new();
    let _ = writeln!(out, "at(self,{}).", obs.location);
    let _ = writeln!(out, "carrying({kind},{}).", obs.inventory);
    for (d, h) in &obs.health {
        let _ = writeln!(out, "health({d},{h}).");
    }
    if !obs.location.is_supply() {
        for (k, level) in &obs.local_resources {
            let _ = writeln!(out, "resource_level({},{},{level}).", obs.location, k.as_str());
        }
        let own = obs.local_resources.get(&obs.role).copied().unwrap_or(0);
        if own < SUPPLY_THRESHOLD {
            let _ = writeln!(out, "needs({},{kind},{}).", obs.location, SUPPLY_THRESHOLD - own);
            let _ = writeln!(out, "shortage(D,{kind}) :- needs(D,{kind},N).");
        }
    }
    match action {
        Action::Move { target } => {
            let _ = write!(out, "plan_move({target}).");
        }
        Action::Supply { amount } => {
            let _ = write!(out, "plan_supply({amount}).");
        }
    }
    out
}

fn beliefs_on_others(obs: &Observation, window: &str) -> String {
    let mut last_seen: BTreeMap<&str, (String, String)> = BTreeMap::new();
    for caps in position_regex().captures_iter(window) {
        let name = caps.get(1).map(|m| m.as_str()).unwrap_or_default();
        last_seen.insert(name, (caps[2].to_string(), caps[3].to_string()));
    }
    let me = obs.role.agent_name();
    ResourceKind::ALL
        .into_iter()
        .filter(|k| *k != obs.role)
        .map(|other| match last_seen.get(other.agent_name()) {
            Some((district, round)) => format!(
                "{me} expects {} (last at {district} in round {round}) to keep bringing {} to the district that needs it most.",
                other.agent_name(),
                other.label()
            ),
            None => format!(
                "{me} has no report from {} yet and expects it to leave d1 with a full load of {}.",
                other.agent_name(),
                other.label()
            ),
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn response(obs: &Observation, action: Action) -> String {
    let mut out = format!(
        "{} at {} in round {} carrying {} {}. Plan: {action}.",
        obs.role.agent_name(),
        obs.location,
        obs.round + 1,
        obs.inventory,
        obs.role.label()
    );
    if !obs.location.is_supply() {
        let mut levels = obs.local_resources.clone();
        if let Action::Supply { amount } = action {
            *levels.entry(obs.role).or_insert(0) += amount as u32;
        }
        let level = |k| levels.get(&k).copied().unwrap_or(0);
        let _ = write!(
            out,
            "\nREPORT {} round {}: food={} medicine={} security={}",
            obs.location,
            obs.round + 1,
            level(ResourceKind::Food),
            level(ResourceKind::Medicine),
            level(ResourceKind::Security)
        );
    }
    out
}

/// Deterministic response in the sectioned format the configuration demands.
pub fn heuristic_respond(obs: &Observation, config: CognitiveConfig, shared_window: &str) -> String {
    let estimates = estimate_levels(obs, shared_window);
    let action = choose_action(obs, &estimates);
    let mut out = String::new();
    if config.ib_enabled {
        let _ = writeln!(out, "{INTERNAL_BELIEFS}\n{}", beliefs(obs, action));
    }
    if config.tom_enabled {
        let _ = writeln!(out, "{BELIEFS_ON_OTHERS}\n{}", beliefs_on_others(obs, shared_window));
    }
    let _ = writeln!(out, "{RESPONSE}\n{}", response(obs, action));
    let _ = write!(out, "{ACTION}\n{action}");
    out
}
