//! Parsing of the sectioned agent responses and of the action grammar.

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::CognitiveConfig;
use crate::sim::{Action, DistrictId};

pub const INTERNAL_BELIEFS: &str = "INTERNAL_BELIEFS:";
pub const BELIEFS_ON_OTHERS: &str = "BELIEFS_ON_OTHERS:";
pub const RESPONSE: &str = "RESPONSE:";
pub const ACTION: &str = "ACTION:";

const HEADERS: [&str; 4] = [INTERNAL_BELIEFS, BELIEFS_ON_OTHERS, RESPONSE, ACTION];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedResponse {
    pub internal_beliefs: Option<String>,
    pub beliefs_on_others: Option<String>,
    pub response: String,
    pub action_text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[error("{}", self.describe())]
pub struct FormatError {
    pub missing: Vec<String>,
    pub duplicated: Vec<String>,
}

impl FormatError {
    fn describe(&self) -> String {
        let mut parts = Vec::new();
        if !self.missing.is_empty() {
            parts.push(format!("missing section(s) {}", self.missing.join(", ")));
        }
        if !self.duplicated.is_empty() {
            parts.push(format!("duplicated section(s) {}", self.duplicated.join(", ")));
        }
        parts.join("; ")
    }
}

/// Splits `text` on the section headers, each of which must start a line.
/// Prose before the first header is ignored; sections the configuration does
/// not enable are dropped.
pub fn parse_response(text: &str, config: CognitiveConfig) -> Result<ParsedResponse, FormatError> {
    let mut sections: [Option<String>; 4] = Default::default();
    let mut duplicated = Vec::new();
    let mut current: Option<usize> = None;

    for line in text.lines() {
        let trimmed = line.trim_start();
        if let Some(idx) = HEADERS.iter().position(|h| trimmed.starts_with(h)) {
            let rest = trimmed[HEADERS[idx].len()..].trim_start();
            if sections[idx].is_some() {
                let name = HEADERS[idx].trim_end_matches(':').to_string();
                if !duplicated.contains(&name) {
                    duplicated.push(name);
                }
            }
            sections[idx] = Some(rest.to_string());
            current = Some(idx);
            continue;
        }
        if let Some(idx) = current {
            let body = sections[idx].get_or_insert_with(String::new);
            body.push('\n');
            body.push_str(line);
        }
    }

    let [ib, tom, response, action] = sections.map(|s| s.map(|b| b.trim().to_string()));
    let mut missing = Vec::new();
    let mut require = |present: bool, header: &str| {
        if !present {
            missing.push(header.trim_end_matches(':').to_string());
        }
    };
    if config.ib_enabled {
        require(ib.is_some(), INTERNAL_BELIEFS);
    }
    if config.tom_enabled {
        require(tom.is_some(), BELIEFS_ON_OTHERS);
    }
    require(response.is_some(), RESPONSE);
    require(action.is_some(), ACTION);

    if !missing.is_empty() || !duplicated.is_empty() {
        return Err(FormatError { missing, duplicated });
    }
    Ok(ParsedResponse {
        internal_beliefs: if config.ib_enabled { ib } else { None },
        beliefs_on_others: if config.tom_enabled { tom } else { None },
        response: response.unwrap_or_default(),
        action_text: action.unwrap_or_default(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[serde(tag = "kind", content = "detail", rename_all = "snake_case")]
pub enum ActionParseError {
    #[error("no MOVE(dk) or SUPPLY_RESOURCE(n) action found")]
    NoAction,
    #[error("unknown district '{0}' (expected d1..d4)")]
    UnknownDistrict(String),
    #[error("invalid supply amount '{0}' (expected a whole number)")]
    BadAmount(String),
}

fn action_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)\b(MOVE|SUPPLY_RESOURCE)\s*\(\s*([^)]*?)\s*\)").expect("valid regex"))
}

/// First `MOVE(dk)` or `SUPPLY_RESOURCE(n)` call in the text.
pub fn parse_action(action_text: &str) -> Result<Action, ActionParseError> {
    let caps = action_regex().captures(action_text).ok_or(ActionParseError::NoAction)?;
    let arg = &caps[2];
    if caps[1].eq_ignore_ascii_case("MOVE") {
        let digits = arg.strip_prefix(['d', 'D']).unwrap_or(arg);
        let valid = !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit());
        valid
            .then(|| digits.parse::<u64>().ok().and_then(DistrictId::from_number))
            .flatten()
            .map(|target| Action::Move { target })
            .ok_or_else(|| ActionParseError::UnknownDistrict(arg.to_string()))
    } else {
        arg.parse::<i64>().map(|amount| Action::Supply { amount }).map_err(|_| ActionParseError::BadAmount(arg.to_string()))
    }
}
