//! Turn orchestration: prompts, response parsing, memory, the verification
//! loop and whole trials.

mod memory;
mod prompt;
pub mod response;
mod trial;
mod turn;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use memory::{PrivateEntry, PrivateMemory, SharedEntry, SharedMemory};
pub use prompt::{assemble_prompt, render, render_state, render_system, required_headers, PromptTemplates};
pub use response::{parse_action, parse_response, ActionParseError, FormatError, ParsedResponse};
pub use trial::{replay_transcript, run_trial, ReplayError, TrialAbort, TrialSetup, Transcript, TRANSCRIPT_SCHEMA_VERSION};
pub use turn::{
    run_agent_turn, TurnAbort, TurnContext, TurnRecord, MAX_ACTION_RETRIES, MAX_FORMAT_RETRIES,
    MAX_VERIFICATION_ATTEMPTS,
};

/// Which cognitive modules are switched on for every agent of a trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct CognitiveConfig {
    pub tom_enabled: bool,
    pub ib_enabled: bool,
}

impl CognitiveConfig {
    pub const BASE: Self = CognitiveConfig { tom_enabled: false, ib_enabled: false };
    pub const TOM: Self = CognitiveConfig { tom_enabled: true, ib_enabled: false };
    pub const IB: Self = CognitiveConfig { tom_enabled: false, ib_enabled: true };
    pub const TOM_IB: Self = CognitiveConfig { tom_enabled: true, ib_enabled: true };
    pub const ALL: [Self; 4] = [Self::BASE, Self::TOM, Self::IB, Self::TOM_IB];

    pub fn label(self) -> &'static str {
        match (self.tom_enabled, self.ib_enabled) {
            (false, false) => "base",
            (true, false) => "tom",
            (false, true) => "ib",
            (true, true) => "tom_ib",
        }
    }

    pub fn display_name(self) -> &'static str {
        match (self.tom_enabled, self.ib_enabled) {
            (false, false) => "Base",
            (true, false) => "ToM Only",
            (false, true) => "IB Only",
            (true, true) => "ToM + IB",
        }
    }
}

impl fmt::Display for CognitiveConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for CognitiveConfig {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace(['-', ' ', '+'], "_");
        match norm.as_str() {
            "base" => Ok(Self::BASE),
            "tom" | "tom_only" => Ok(Self::TOM),
            "ib" | "ib_only" => Ok(Self::IB),
            "tom_ib" | "tom__ib" | "tom___ib" => Ok(Self::TOM_IB),
            _ => Err(format!("unknown configuration '{s}' (expected base, tom, ib or tom_ib)")),
        }
    }
}
