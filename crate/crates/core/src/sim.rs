//! City environment: districts, agents, dynamics and scoring.
//!
//! Every operation takes a `&WorldState` and returns a fresh value, so any
//! retained snapshot can be replayed from later without interference.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SimError {
    #[error("invalid simulation parameters: {0}")]
    InvalidParams(String),
    #[error("invalid topology: {0}")]
    InvalidTopology(String),
    #[error("no agent with role {0}")]
    UnknownRole(ResourceKind),
    #[error("action rejected: {0}")]
    InvalidAction(ActionRejection),
}

/// The three resource kinds; each agent is responsible for exactly one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResourceKind {
    Food,
    Medicine,
    Security,
}

impl ResourceKind {
    /// Kinds in the fixed turn order.
    pub const ALL: [ResourceKind; 3] = [ResourceKind::Food, ResourceKind::Medicine, ResourceKind::Security];

    /// Lowercase name used in the belief language and config files.
    pub fn as_str(self) -> &'static str {
        match self {
            ResourceKind::Food => "food",
            ResourceKind::Medicine => "medicine",
            ResourceKind::Security => "security",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ResourceKind::Food => "FOOD",
            ResourceKind::Medicine => "MEDICINE",
            ResourceKind::Security => "SECURITY",
        }
    }

    /// Name of the agent role responsible for this kind.
    pub fn agent_name(self) -> &'static str {
        match self {
            ResourceKind::Food => "FOOD_AGENT",
            ResourceKind::Medicine => "MEDICAL_AGENT",
            ResourceKind::Security => "SECURITY_AGENT",
        }
    }
}

impl fmt::Display for ResourceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ResourceKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "food" | "food_agent" => Ok(ResourceKind::Food),
            "medicine" | "medical" | "medical_agent" => Ok(ResourceKind::Medicine),
            "security" | "security_agent" => Ok(ResourceKind::Security),
            other => Err(format!("unknown resource kind '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistrictId {
    D1,
    D2,
    D3,
    D4,
}

impl DistrictId {
    pub const ALL: [DistrictId; 4] = [DistrictId::D1, DistrictId::D2, DistrictId::D3, DistrictId::D4];
    pub const SUPPLY: DistrictId = DistrictId::D1;

    pub fn as_str(self) -> &'static str {
        match self {
            DistrictId::D1 => "d1",
            DistrictId::D2 => "d2",
            DistrictId::D3 => "d3",
            DistrictId::D4 => "d4",
        }
    }

    /// 1-based district number.
    pub fn number(self) -> u8 {
        self as u8 + 1
    }

    pub fn from_number(n: u64) -> Option<Self> {
        match n {
            1 => Some(DistrictId::D1),
            2 => Some(DistrictId::D2),
            3 => Some(DistrictId::D3),
            4 => Some(DistrictId::D4),
            _ => None,
        }
    }

    pub fn is_supply(self) -> bool {
        self == DistrictId::SUPPLY
    }

    /// Districts whose health counts toward the score.
    pub fn regular() -> impl Iterator<Item = DistrictId> {
        DistrictId::ALL.into_iter().filter(|d| !d.is_supply())
    }
}

impl fmt::Display for DistrictId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DistrictId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        lower
            .strip_prefix('d')
            .and_then(|n| n.parse::<u64>().ok())
            .and_then(DistrictId::from_number)
            .ok_or_else(|| format!("unknown district '{s}'"))
    }
}

/// Undirected district graph. Edges are stored normalized (lower id first).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "TopologySpec", into = "TopologySpec")]
pub struct Topology {
    edges: BTreeSet<(DistrictId, DistrictId)>,
}

#[derive(Serialize, Deserialize)]
struct TopologySpec {
    edges: Vec<(DistrictId, DistrictId)>,
}

impl TryFrom<TopologySpec> for Topology {
    type Error = SimError;

    fn try_from(spec: TopologySpec) -> Result<Self, Self::Error> {
        Topology::from_edges(spec.edges)
    }
}

impl From<Topology> for TopologySpec {
    fn from(t: Topology) -> Self {
        TopologySpec { edges: t.edges.into_iter().collect() }
    }
}

impl Default for Topology {
    fn default() -> Self {
        use DistrictId::*;
        Topology::from_edges([(D1, D2), (D1, D3), (D2, D4), (D3, D4)]).expect("default topology is valid")
    }
}

impl Topology {
    pub fn from_edges(edges: impl IntoIterator<Item = (DistrictId, DistrictId)>) -> Result<Self, SimError> {
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            if a == b {
                return Err(SimError::InvalidTopology(format!("self-loop at {a}")));
            }
            set.insert((a.min(b), a.max(b)));
        }
        Ok(Topology { edges: set })
    }

    pub fn adjacent(&self, a: DistrictId, b: DistrictId) -> bool {
        a != b && self.edges.contains(&(a.min(b), a.max(b)))
    }

    /// Neighbours of `d` in ascending id order.
    pub fn neighbors(&self, d: DistrictId) -> Vec<DistrictId> {
        DistrictId::ALL.into_iter().filter(|&o| self.adjacent(d, o)).collect()
    }

    pub fn edges(&self) -> impl Iterator<Item = (DistrictId, DistrictId)> + '_ {
        self.edges.iter().copied()
    }

    /// Hop distances from `from` to every reachable district.
    pub fn distances(&self, from: DistrictId) -> BTreeMap<DistrictId, u32> {
        let mut dist = BTreeMap::from([(from, 0u32)]);
        let mut queue = VecDeque::from([from]);
        while let Some(cur) = queue.pop_front() {
            let d = dist[&cur];
            for n in self.neighbors(cur) {
                if !dist.contains_key(&n) {
                    dist.insert(n, d + 1);
                    queue.push_back(n);
                }
            }
        }
        dist
    }

    /// First hop on a shortest path from `from` to `to`, preferring the
    /// lowest-numbered neighbour on ties. `None` if already there or unreachable.
    pub fn next_hop(&self, from: DistrictId, to: DistrictId) -> Option<DistrictId> {
        if from == to {
            return None;
        }
        let to_target = self.distances(to);
        let here = *to_target.get(&from)?;
        self.neighbors(from).into_iter().find(|n| to_target.get(n) == Some(&(here - 1)))
    }
}

/// Tunable environment constants.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimParams {
    /// Units of each resource consumed per district per round.
    pub consumption_rate: u32,
    /// Agent carrying capacity.
    pub capacity: u32,
    pub initial_health: u32,
    /// Starting level of every resource kind in every regular district.
    pub initial_resource_level: u32,
    pub rounds: u32,
    /// Stock reported at the supply district; never depleted.
    pub supply_level: u32,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            consumption_rate: 10,
            capacity: 50,
            initial_health: 100,
            initial_resource_level: 30,
            rounds: 7,
            supply_level: 1_000_000,
        }
    }
}

impl SimParams {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::InvalidParams(m.to_string()));
        if self.consumption_rate == 0 {
            return bad("consumption_rate must be positive");
        }
        if self.capacity == 0 {
            return bad("capacity must be positive");
        }
        if self.rounds == 0 {
            return bad("rounds must be at least 1");
        }
        if self.initial_health > MAX_HEALTH {
            return bad("initial_health must be within [0, 100]");
        }
        Ok(())
    }
}

pub const MAX_HEALTH: u32 = 100;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DistrictState {
    pub health: u32,
    pub resources: BTreeMap<ResourceKind, u32>,
}

impl DistrictState {
    pub fn level(&self, kind: ResourceKind) -> u32 {
        self.resources.get(&kind).copied().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentState {
    pub role: ResourceKind,
    pub location: DistrictId,
    pub inventory: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Action {
    Move { target: DistrictId },
    Supply { amount: i64 },
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Move { target } => write!(f, "MOVE({target})"),
            Action::Supply { amount } => write!(f, "SUPPLY_RESOURCE({amount})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InvalidReason {
    NotAdjacent,
    InsufficientInventory,
    NonPositiveAmount,
    SupplyAtDepot,
    UnknownDistrict,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionRejection {
    pub reason: InvalidReason,
    pub message: String,
}

impl fmt::Display for ActionRejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

/// What one agent can see at the start of its turn.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub round: u32,
    pub rounds: u32,
    pub role: ResourceKind,
    pub location: DistrictId,
    pub inventory: u32,
    pub capacity: u32,
    pub consumption_rate: u32,
    pub health: BTreeMap<DistrictId, u32>,
    /// Resource levels of the current district only.
    pub local_resources: BTreeMap<ResourceKind, u32>,
    pub topology: Topology,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorldState {
    pub round: u32,
    pub districts: BTreeMap<DistrictId, DistrictState>,
    pub agents: BTreeMap<ResourceKind, AgentState>,
    pub params: SimParams,
    pub topology: Topology,
}

/// Health lost in one round because of a single resource's level.
pub fn health_decrease(level: u32) -> u32 {
    if level < 10 {
        10
    } else if level < 20 {
        5
    } else {
        0
    }
}

/// Level remaining after one round of consumption.
pub fn consume(level: u32, rate: u32) -> u32 {
    level.saturating_sub(rate)
}

impl WorldState {
    /// Round-0 state: every agent at the supply district with a full load.
    pub fn new(params: SimParams, topology: Topology) -> Result<Self, SimError> {
        params.validate()?;
        let districts = DistrictId::ALL
            .into_iter()
            .map(|d| {
                let level = if d.is_supply() { params.supply_level } else { params.initial_resource_level };
                let resources = ResourceKind::ALL.into_iter().map(|k| (k, level)).collect();
                (d, DistrictState { health: params.initial_health, resources })
            })
            .collect();
        let agents = ResourceKind::ALL
            .into_iter()
            .map(|role| (role, AgentState { role, location: DistrictId::SUPPLY, inventory: params.capacity }))
            .collect();
        Ok(WorldState { round: 0, districts, agents, params, topology })
    }

    pub fn agent(&self, role: ResourceKind) -> Result<&AgentState, SimError> {
        self.agents.get(&role).ok_or(SimError::UnknownRole(role))
    }

    pub fn is_finished(&self) -> bool {
        self.round >= self.params.rounds
    }

    pub fn validate_action(&self, role: ResourceKind, action: Action) -> Result<(), ActionRejection> {
        let agent = match self.agents.get(&role) {
            Some(a) => a,
            None => {
                return Err(ActionRejection {
                    reason: InvalidReason::UnknownDistrict,
                    message: format!("no agent with role {role}"),
                })
            }
        };
        match action {
            Action::Move { target } => {
                if !self.districts.contains_key(&target) {
                    return Err(ActionRejection {
                        reason: InvalidReason::UnknownDistrict,
                        message: format!("district {target} does not exist"),
                    });
                }
                if !self.topology.adjacent(agent.location, target) {
                    let neighbors: Vec<&str> =
                        self.topology.neighbors(agent.location).into_iter().map(DistrictId::as_str).collect();
                    return Err(ActionRejection {
                        reason: InvalidReason::NotAdjacent,
                        message: format!(
                            "cannot move from {} to {target}: not adjacent (neighbours of {}: {})",
                            agent.location,
                            agent.location,
                            neighbors.join(", ")
                        ),
                    });
                }
                Ok(())
            }
            Action::Supply { amount } => {
                if amount <= 0 {
                    return Err(ActionRejection {
                        reason: InvalidReason::NonPositiveAmount,
                        message: format!("supply amount must be positive, got {amount}"),
                    });
                }
                if agent.location.is_supply() {
                    return Err(ActionRejection {
                        reason: InvalidReason::SupplyAtDepot,
                        message: format!("cannot supply at the supply district {}", agent.location),
                    });
                }
                if amount > i64::from(agent.inventory) {
                    return Err(ActionRejection {
                        reason: InvalidReason::InsufficientInventory,
                        message: format!("cannot supply {amount} units: only {} carried", agent.inventory),
                    });
                }
                Ok(())
            }
        }
    }

    pub fn apply_action(&self, role: ResourceKind, action: Action) -> Result<WorldState, SimError> {
        self.validate_action(role, action).map_err(SimError::InvalidAction)?;
        let mut next = self.clone();
        let agent = next.agents.get_mut(&role).ok_or(SimError::UnknownRole(role))?;
        match action {
            Action::Move { target } => agent.location = target,
            Action::Supply { amount } => {
                // validated: 0 < amount <= inventory
                let amount = amount as u32;
                agent.inventory -= amount;
                let district = next.districts.get_mut(&agent.location).expect("agent location exists");
                let level = district.resources.entry(role).or_insert(0);
                *level = level.saturating_add(amount);
            }
        }
        Ok(next)
    }

    /// Refill to capacity when standing on the supply district.
    pub fn resupply(&self, role: ResourceKind) -> WorldState {
        let mut next = self.clone();
        if let Some(agent) = next.agents.get_mut(&role) {
            if agent.location.is_supply() {
                agent.inventory = next.params.capacity;
            }
        }
        next
    }

    /// Apply health loss and consumption to every regular district and
    /// advance the round counter.
    pub fn end_of_round(&self) -> WorldState {
        let mut next = self.clone();
        let rate = next.params.consumption_rate;
        for (id, district) in next.districts.iter_mut() {
            if id.is_supply() {
                continue;
            }
            let total: u32 = ResourceKind::ALL.into_iter().map(|k| health_decrease(district.level(k))).sum();
            district.health = district.health.saturating_sub(total);
            for level in district.resources.values_mut() {
                *level = consume(*level, rate);
            }
        }
        next.round += 1;
        next
    }

    /// Mean health over the regular districts.
    pub fn final_score(&self) -> f64 {
        let healths: Vec<u32> = DistrictId::regular().filter_map(|d| self.districts.get(&d)).map(|d| d.health).collect();
        if healths.is_empty() {
            return 0.0;
        }
        f64::from(healths.iter().sum::<u32>()) / healths.len() as f64
    }

    pub fn observation_for(&self, role: ResourceKind) -> Result<Observation, SimError> {
        let agent = self.agent(role)?;
        let health = self.districts.iter().map(|(d, s)| (*d, s.health)).collect();
        let local_resources = self.districts.get(&agent.location).map(|d| d.resources.clone()).unwrap_or_default();
        Ok(Observation {
            round: self.round,
            rounds: self.params.rounds,
            role,
            location: agent.location,
            inventory: agent.inventory,
            capacity: self.params.capacity,
            consumption_rate: self.params.consumption_rate,
            health,
            local_resources,
            topology: self.topology.clone(),
        })
    }
}
