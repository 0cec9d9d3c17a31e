//! Consistency checking of belief programs: evaluate, check the fixed domain
//! constraints, and on failure extract a minimal core and explain it.

mod constraints;
mod core;
mod eval;
mod explain;
mod theory;

use serde::{Deserialize, Serialize};

pub use self::constraints::{check_constraints, ConstraintId, Violation};
pub use self::core::{is_consistent, minimal_core, quickxplain, violations_of, CoreError, CoreResult};
pub use self::eval::{evaluate, EvalError, Model};
pub use self::explain::explain;
pub use self::theory::FixedTheory;

use crate::belief::{check_safety, find_cycles, parse, ParseError, UnsafeVariable};

/// Reason a program could not be checked at all.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Diagnostic {
    Parse { error: ParseError, message: String },
    UnsafeVariable { statement: usize, variable: String },
    Cycle { predicates: Vec<String> },
}

impl Diagnostic {
    pub fn message(&self) -> String {
        match self {
            Diagnostic::Parse { message, .. } => format!("syntax error at {message}"),
            Diagnostic::UnsafeVariable { statement, variable } => format!(
                "statement {}: head variable {variable} does not appear in the rule body",
                statement + 1
            ),
            Diagnostic::Cycle { predicates } => {
                format!("predicates {} depend on each other in a loop", predicates.join(", "))
            }
        }
    }
}

impl From<UnsafeVariable> for Diagnostic {
    fn from(u: UnsafeVariable) -> Self {
        Diagnostic::UnsafeVariable { statement: u.statement, variable: u.variable }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum VerificationReport {
    Consistent { derived_fact_count: usize },
    Inconsistent { violations: Vec<Violation>, core: CoreResult, explanation: String },
    Malformed { diagnostics: Vec<Diagnostic>, feedback: String },
}

impl VerificationReport {
    pub fn is_consistent(&self) -> bool {
        matches!(self, VerificationReport::Consistent { .. })
    }

    /// Text handed back to the agent; empty for consistent programs.
    pub fn feedback(&self) -> &str {
        match self {
            VerificationReport::Consistent { .. } => "",
            VerificationReport::Inconsistent { explanation, .. } => explanation,
            VerificationReport::Malformed { feedback, .. } => feedback,
        }
    }

    pub fn status(&self) -> &'static str {
        match self {
            VerificationReport::Consistent { .. } => "consistent",
            VerificationReport::Inconsistent { .. } => "inconsistent",
            VerificationReport::Malformed { .. } => "malformed",
        }
    }
}

fn malformed(diagnostics: Vec<Diagnostic>) -> VerificationReport {
    let details: Vec<String> = diagnostics.iter().map(Diagnostic::message).collect();
    let feedback = format!(
        "Your INTERNAL_BELIEFS could not be checked: {}. Rewrite them in the belief language.",
        details.join("; ")
    );
    VerificationReport::Malformed { diagnostics, feedback }
}

/// Full pipeline: parse, safety, cycles, evaluation, constraints, core, explanation.
pub fn verify(program_text: &str, theory: &FixedTheory) -> VerificationReport {
    let program = match parse(program_text) {
        Ok(p) => p,
        Err(error) => {
            let message = error.to_string();
            return malformed(vec![Diagnostic::Parse { error, message }]);
        }
    };
    let mut diagnostics: Vec<Diagnostic> = check_safety(&program).into_iter().map(Diagnostic::from).collect();
    diagnostics.extend(find_cycles(&program).into_iter().map(|predicates| Diagnostic::Cycle { predicates }));
    if !diagnostics.is_empty() {
        return malformed(diagnostics);
    }
    let model = match evaluate(&program, theory) {
        Ok(m) => m,
        Err(e) => unreachable!("safety and cycles already checked: {e}"),
    };
    let violations = check_constraints(&model.atoms, theory);
    if violations.is_empty() {
        return VerificationReport::Consistent { derived_fact_count: model.derived(theory).count() };
    }
    match minimal_core(&program, Some(program_text), theory) {
        Ok(core) => {
            let explanation = explain(&core);
            VerificationReport::Inconsistent { violations, core, explanation }
        }
        Err(e) => unreachable!("program has violations but no core: {e}"),
    }
}
