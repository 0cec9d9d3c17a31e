use std::fmt;

use serde::{Deserialize, Serialize};

use super::ast::Term;
use crate::sim::{DistrictId, ResourceKind};

/// Argument sort of a built-in predicate position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sort {
    District,
    Resource,
    Integer,
    Agent,
}

impl fmt::Display for Sort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sort::District => "district",
            Sort::Resource => "resource",
            Sort::Integer => "integer",
            Sort::Agent => "agent",
        })
    }
}

impl Sort {
    /// Variables match every sort.
    pub fn admits(self, term: &Term) -> bool {
        match (self, term) {
            (_, Term::Variable(_)) => true,
            (Sort::Integer, Term::Integer(_)) => true,
            (Sort::District, Term::Constant(c)) => DistrictId::ALL.iter().any(|d| d.as_str() == c.as_str()),
            (Sort::Resource, Term::Constant(c)) => {
                ResourceKind::ALL.iter().any(|k| k.as_str() == c.as_str())
            }
            (Sort::Agent, Term::Constant(_)) => true,
            _ => false,
        }
    }
}

/// The fixed built-in vocabulary.
pub const BUILTINS: &[(&str, &[Sort])] = &[
    ("at", &[Sort::Agent, Sort::District]),
    ("carrying", &[Sort::Resource, Sort::Integer]),
    ("resource_level", &[Sort::District, Sort::Resource, Sort::Integer]),
    ("health", &[Sort::District, Sort::Integer]),
    ("needs", &[Sort::District, Sort::Resource, Sort::Integer]),
    ("adjacent", &[Sort::District, Sort::District]),
    ("plan_move", &[Sort::District]),
    ("plan_supply", &[Sort::Integer]),
];

pub fn builtin(predicate: &str) -> Option<&'static [Sort]> {
    BUILTINS.iter().find(|(name, _)| *name == predicate).map(|(_, sorts)| *sorts)
}
