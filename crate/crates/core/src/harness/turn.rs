//! One agent turn: prompt, response parsing, belief verification with repair
//! feedback, action validation with retries, and memory updates.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::memory::{PrivateEntry, PrivateMemory, SharedMemory};
use super::prompt::{assemble_prompt, render, required_headers, PromptTemplates};
use super::response::{parse_action, parse_response, ParsedResponse};
use super::CognitiveConfig;
use crate::policy::{ChatMessage, Policy, PolicyError, PolicyRequest};
use crate::sim::{Action, ActionRejection, Observation, ResourceKind, WorldState};
use crate::verify::{verify, FixedTheory, VerificationReport};

pub const MAX_VERIFICATION_ATTEMPTS: usize = 3;
pub const MAX_ACTION_RETRIES: u32 = 2;
pub const MAX_FORMAT_RETRIES: u32 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnRecord {
    pub round: u32,
    pub role: ResourceKind,
    /// Messages sent on the first call of the turn.
    pub prompt: Vec<ChatMessage>,
    /// Every policy output, one per call.
    pub raw_outputs: Vec<String>,
    /// Corrective messages appended after rejected outputs, in order.
    pub feedback: Vec<String>,
    pub format_errors: Vec<String>,
    pub verification_reports: Vec<VerificationReport>,
    pub parsed: Option<ParsedResponse>,
    pub action: Option<Action>,
    pub action_feedback: Vec<ActionRejection>,
    pub committed: bool,
    /// False only when belief verification was enabled and every attempt failed.
    pub verified: bool,
}

/// Turn failed because the policy itself failed; the record so far is kept.
#[derive(Debug)]
pub struct TurnAbort {
    pub record: TurnRecord,
    pub error: PolicyError,
}

pub struct TurnContext<'a> {
    pub config: CognitiveConfig,
    pub templates: &'a PromptTemplates,
    pub seed: u64,
}

struct Exchange<'a, 'p> {
    policy: &'p mut dyn Policy,
    templates: &'a PromptTemplates,
    config: CognitiveConfig,
    role: ResourceKind,
    observation: &'a Observation,
    shared_window: String,
    seed: u64,
    messages: Vec<ChatMessage>,
    record: TurnRecord,
    format_retries: u32,
}

impl Exchange<'_, '_> {
    fn call(&mut self) -> Result<String, PolicyError> {
        let request = PolicyRequest {
            role: self.role,
            config: self.config,
            messages: &self.messages,
            observation: self.observation,
            shared_window: &self.shared_window,
            seed: self.seed,
        };
        let raw = self.policy.respond(&request)?;
        self.record.raw_outputs.push(raw.clone());
        self.messages.push(ChatMessage::assistant(raw.clone()));
        Ok(raw)
    }

    fn feedback(&mut self, text: String) {
        self.record.feedback.push(text.clone());
        self.messages.push(ChatMessage::user(text));
    }

    /// Charges one format retry; false once they are used up.
    fn format_retry(&mut self, error: String) -> bool {
        self.record.format_errors.push(error.clone());
        if self.format_retries >= MAX_FORMAT_RETRIES {
            return false;
        }
        self.format_retries += 1;
        let vars = BTreeMap::from([("error", error), ("sections", required_headers(self.config).join(", "))]);
        let text = render(&self.templates.feedback_format, &vars);
        self.feedback(text.trim_end().to_string());
        true
    }

    /// Queries until a response with all required sections arrives.
    fn next_response(&mut self) -> Result<Option<ParsedResponse>, PolicyError> {
        loop {
            let raw = self.call()?;
            match parse_response(&raw, self.config) {
                Ok(parsed) => return Ok(Some(parsed)),
                Err(e) => {
                    if !self.format_retry(e.to_string()) {
                        return Ok(None);
                    }
                }
            }
        }
    }
}

/// Up to three rounds of query, parse and verify. Returns the first response
/// whose beliefs check out, or the last one with `verified = false`; `None`
/// when format retries ran out first.
fn verification_loop(exchange: &mut Exchange<'_, '_>, theory: &FixedTheory) -> Result<Option<(ParsedResponse, bool)>, PolicyError> {
    for attempt in 1..=MAX_VERIFICATION_ATTEMPTS {
        let Some(parsed) = exchange.next_response()? else { return Ok(None) };
        let report = verify(parsed.internal_beliefs.as_deref().unwrap_or_default(), theory);
        let consistent = report.is_consistent();
        let feedback = report.feedback().to_string();
        exchange.record.verification_reports.push(report);
        if consistent {
            return Ok(Some((parsed, true)));
        }
        if attempt == MAX_VERIFICATION_ATTEMPTS {
            return Ok(Some((parsed, false)));
        }
        let vars = BTreeMap::from([
            ("attempt", attempt.to_string()),
            ("max_attempts", MAX_VERIFICATION_ATTEMPTS.to_string()),
            ("feedback", feedback),
        ]);
        let text = render(&exchange.templates.feedback_verification, &vars);
        exchange.feedback(text.trim_end().to_string());
    }
    unreachable!("loop returns on the last attempt")
}

pub fn run_agent_turn(
    world: &WorldState,
    role: ResourceKind,
    ctx: &TurnContext<'_>,
    policy: &mut dyn Policy,
    shared: &mut SharedMemory,
    private: &mut PrivateMemory,
) -> Result<(WorldState, TurnRecord), TurnAbort> {
    let world = world.resupply(role);
    let observation = world.observation_for(role).expect("role has an agent");
    let prompt = assemble_prompt(ctx.templates, role, ctx.config, &observation, shared, private);
    let record = TurnRecord {
        round: world.round,
        role,
        prompt: prompt.clone(),
        raw_outputs: Vec::new(),
        feedback: Vec::new(),
        format_errors: Vec::new(),
        verification_reports: Vec::new(),
        parsed: None,
        action: None,
        action_feedback: Vec::new(),
        committed: false,
        verified: true,
    };
    let mut ex = Exchange {
        policy,
        templates: ctx.templates,
        config: ctx.config,
        role,
        observation: &observation,
        shared_window: shared.render_window(world.round),
        seed: ctx.seed,
        messages: prompt,
        record,
        format_retries: 0,
    };

    let outcome = (|| -> Result<(WorldState, Option<ParsedResponse>), PolicyError> {
        let mut parsed = if ctx.config.ib_enabled {
            let theory = FixedTheory::new(world.topology.clone(), world.params.capacity, role);
            match verification_loop(&mut ex, &theory)? {
                Some((parsed, verified)) => {
                    ex.record.verified = verified;
                    parsed
                }
                None => return Ok((world.clone(), None)),
            }
        } else {
            match ex.next_response()? {
                Some(p) => p,
                None => return Ok((world.clone(), None)),
            }
        };

        let mut action_retries = 0;
        loop {
            let retry = match parse_action(&parsed.action_text) {
                Err(e) => ex.format_retry(e.to_string()),
                Ok(action) => match world.validate_action(role, action) {
                    Ok(()) => {
                        let next = world.apply_action(role, action).expect("validated action applies");
                        ex.record.action = Some(action);
                        ex.record.committed = true;
                        return Ok((next, Some(parsed)));
                    }
                    Err(rejection) => {
                        ex.record.action_feedback.push(rejection.clone());
                        if action_retries < MAX_ACTION_RETRIES {
                            action_retries += 1;
                            let vars = BTreeMap::from([
                                ("action", action.to_string()),
                                ("reason", rejection.message.clone()),
                            ]);
                            let text = render(&ex.templates.feedback_action, &vars);
                            ex.feedback(text.trim_end().to_string());
                            true
                        } else {
                            false
                        }
                    }
                },
            };
            if !retry {
                return Ok((world.clone(), Some(parsed)));
            }
            match ex.next_response()? {
                Some(p) => parsed = p,
                None => return Ok((world.clone(), None)),
            }
        }
    })();

    let mut record = ex.record;
    let (next, parsed) = match outcome {
        Ok(v) => v,
        Err(error) => return Err(TurnAbort { record, error }),
    };

    let response_text = parsed.as_ref().map(|p| p.response.clone()).unwrap_or_else(|| "(no valid response)".into());
    shared.append(world.round, role, response_text);
    private.append(
        role,
        PrivateEntry {
            round: world.round,
            internal_beliefs: parsed.as_ref().and_then(|p| p.internal_beliefs.clone()),
            beliefs_on_others: parsed.as_ref().and_then(|p| p.beliefs_on_others.clone()),
            action_text: parsed.as_ref().map(|p| p.action_text.clone()).unwrap_or_default(),
        },
    );
    record.parsed = parsed;
    Ok((next, record))
}
