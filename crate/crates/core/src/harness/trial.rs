//! A full trial: every round, every agent in turn order, with a transcript
//! that is enough to re-derive all world states.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::memory::{PrivateMemory, SharedMemory};
use super::prompt::PromptTemplates;
use super::turn::{run_agent_turn, TurnContext, TurnRecord};
use super::CognitiveConfig;
use crate::policy::{Policy, PolicyError};
use crate::sim::{ResourceKind, SimError, SimParams, Topology, WorldState};

pub const TRANSCRIPT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub struct TrialSetup {
    pub params: SimParams,
    pub topology: Topology,
    pub config: CognitiveConfig,
    pub seed: u64,
    pub templates: PromptTemplates,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub schema_version: u32,
    pub params: SimParams,
    pub topology: Topology,
    pub config: CognitiveConfig,
    /// Policy name per role.
    pub policies: BTreeMap<ResourceKind, String>,
    pub seed: u64,
    pub turns: Vec<TurnRecord>,
    /// Initial state, then the state after each completed round.
    pub snapshots: Vec<WorldState>,
    /// Present only for completed trials.
    pub final_score: Option<f64>,
    /// Reason the trial stopped early, if it did.
    pub aborted: Option<String>,
}

impl Transcript {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("transcript serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Share of turns whose committed action came from verified beliefs.
    pub fn verified_turn_fraction(&self) -> f64 {
        if self.turns.is_empty() {
            return 0.0;
        }
        self.turns.iter().filter(|t| t.verified).count() as f64 / self.turns.len() as f64
    }

    /// Number of rejected action attempts across the trial.
    pub fn invalid_actions(&self) -> usize {
        self.turns.iter().map(|t| t.action_feedback.len()).sum()
    }
}

#[derive(Debug, Error)]
pub enum TrialAbort {
    #[error("invalid trial setup: {0}")]
    Setup(#[from] SimError),
    #[error("missing policy for {0:?}")]
    MissingPolicy(ResourceKind),
    #[error("policy failed in round {round} for {role:?}: {error}")]
    Policy { round: u32, role: ResourceKind, error: PolicyError, transcript: Box<Transcript> },
}

impl TrialAbort {
    /// Partial transcript for aborts that happened mid-trial.
    pub fn transcript(&self) -> Option<&Transcript> {
        match self {
            TrialAbort::Policy { transcript, .. } => Some(transcript),
            _ => None,
        }
    }
}

/// Per-call seed handed to policies; derived from the trial seed and turn index.
fn turn_seed(seed: u64, turn: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(turn as u64)
}

pub fn run_trial(setup: &TrialSetup, policies: &mut BTreeMap<ResourceKind, Box<dyn Policy>>) -> Result<Transcript, TrialAbort> {
    for role in ResourceKind::ALL {
        if !policies.contains_key(&role) {
            return Err(TrialAbort::MissingPolicy(role));
        }
    }
    let mut world = WorldState::new(setup.params.clone(), setup.topology.clone())?;
    let mut transcript = Transcript {
        schema_version: TRANSCRIPT_SCHEMA_VERSION,
        params: setup.params.clone(),
        topology: setup.topology.clone(),
        config: setup.config,
        policies: policies.iter().map(|(r, p)| (*r, p.name())).collect(),
        seed: setup.seed,
        turns: Vec::new(),
        snapshots: vec![world.clone()],
        final_score: None,
        aborted: None,
    };
    let mut shared = SharedMemory::default();
    let mut private = PrivateMemory::default();

    while !world.is_finished() {
        for role in ResourceKind::ALL {
            let ctx = TurnContext {
                config: setup.config,
                templates: &setup.templates,
                seed: turn_seed(setup.seed, transcript.turns.len()),
            };
            let policy = policies.get_mut(&role).expect("checked above");
            match run_agent_turn(&world, role, &ctx, policy.as_mut(), &mut shared, &mut private) {
                Ok((next, record)) => {
                    world = next;
                    transcript.turns.push(record);
                }
                Err(abort) => {
                    transcript.turns.push(abort.record);
                    transcript.aborted = Some(abort.error.to_string());
                    return Err(TrialAbort::Policy {
                        round: world.round,
                        role,
                        error: abort.error,
                        transcript: Box::new(transcript),
                    });
                }
            }
        }
        world = world.end_of_round();
        transcript.snapshots.push(world.clone());
    }
    transcript.final_score = Some(world.final_score());
    Ok(transcript)
}

#[derive(Debug, Error, PartialEq)]
pub enum ReplayError {
    #[error("transcript schema version {0} is not supported")]
    Schema(u32),
    #[error("invalid transcript: {0}")]
    Sim(#[from] SimError),
    #[error("turn {turn}: recorded action {action} is rejected: {reason}")]
    Rejected { turn: usize, action: String, reason: String },
    #[error("snapshot {index} differs from the recorded state")]
    SnapshotMismatch { index: usize },
    #[error("transcript has {found} snapshots, replay produced {expected}")]
    SnapshotCount { expected: usize, found: usize },
    #[error("final score {found:?} differs from replayed {expected}")]
    Score { expected: f64, found: Option<f64> },
}

/// Re-applies the committed actions and checks that every snapshot is
/// reproduced byte for byte.
pub fn replay_transcript(t: &Transcript) -> Result<WorldState, ReplayError> {
    if t.schema_version != TRANSCRIPT_SCHEMA_VERSION {
        return Err(ReplayError::Schema(t.schema_version));
    }
    let mut world = WorldState::new(t.params.clone(), t.topology.clone())?;
    let mut produced = vec![world.clone()];
    let check = |index: usize, w: &WorldState| -> Result<(), ReplayError> {
        match t.snapshots.get(index) {
            Some(s) if serde_json::to_vec(s).ok() == serde_json::to_vec(w).ok() => Ok(()),
            Some(_) => Err(ReplayError::SnapshotMismatch { index }),
            None => Ok(()),
        }
    };
    check(0, &world)?;
    for (i, turn) in t.turns.iter().enumerate() {
        world = world.resupply(turn.role);
        if let (true, Some(action)) = (turn.committed, turn.action) {
            world = world.apply_action(turn.role, action).map_err(|e| ReplayError::Rejected {
                turn: i,
                action: action.to_string(),
                reason: e.to_string(),
            })?;
        }
        if turn.role == *ResourceKind::ALL.last().expect("three roles") {
            world = world.end_of_round();
            produced.push(world.clone());
            check(produced.len() - 1, &world)?;
        }
    }
    if produced.len() != t.snapshots.len() {
        return Err(ReplayError::SnapshotCount { expected: produced.len(), found: t.snapshots.len() });
    }
    if t.aborted.is_none() {
        let expected = world.final_score();
        if t.final_score != Some(expected) {
            return Err(ReplayError::Score { expected, found: t.final_score });
        }
    }
    Ok(world)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::{HeuristicPolicy, ScriptedPolicy};

    fn setup(config: CognitiveConfig) -> TrialSetup {
        TrialSetup {
            params: SimParams::default(),
            topology: Topology::default(),
            config,
            seed: 7,
            templates: PromptTemplates::default(),
        }
    }

    fn heuristic() -> BTreeMap<ResourceKind, Box<dyn Policy>> {
        ResourceKind::ALL.into_iter().map(|r| (r, Box::new(HeuristicPolicy) as Box<dyn Policy>)).collect()
    }

    #[test]
    fn heuristic_trial_runs_and_replays() {
        for config in CognitiveConfig::ALL {
            let t = run_trial(&setup(config), &mut heuristic()).unwrap();
            assert_eq!(t.turns.len(), 21);
            assert_eq!(t.snapshots.len(), 8);
            assert!(t.turns.iter().all(|r| r.committed));
            assert_eq!(t.verified_turn_fraction(), 1.0);
            let back = Transcript::from_json(&t.to_json()).unwrap();
            assert_eq!(back, t);
            replay_transcript(&back).unwrap();
        }
    }

    #[test]
    fn deterministic() {
        let a = run_trial(&setup(CognitiveConfig::TOM_IB), &mut heuristic()).unwrap();
        let b = run_trial(&setup(CognitiveConfig::TOM_IB), &mut heuristic()).unwrap();
        assert_eq!(a.to_json(), b.to_json());
    }

    #[test]
    fn abort_keeps_partial_transcript() {
        let mut policies = heuristic();
        policies.insert(ResourceKind::Medicine, Box::new(ScriptedPolicy::new(["RESPONSE: hi\nACTION: MOVE(d2)"])));
        let err = run_trial(&setup(CognitiveConfig::BASE), &mut policies).unwrap_err();
        let t = err.transcript().unwrap();
        assert!(t.aborted.is_some());
        // food r1, medicine r1, security r1, food r2, then medicine fails
        assert_eq!(t.turns.len(), 5);
        assert!(t.final_score.is_none());
    }

    #[test]
    fn tampered_snapshot_is_detected() {
        let mut t = run_trial(&setup(CognitiveConfig::BASE), &mut heuristic()).unwrap();
        t.snapshots[3].districts.get_mut(&crate::sim::DistrictId::D2).unwrap().health += 1;
        assert_eq!(replay_transcript(&t), Err(ReplayError::SnapshotMismatch { index: 3 }));
    }
}
