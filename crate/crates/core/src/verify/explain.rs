use super::constraints::{ConstraintId, Violation};
use super::core::CoreResult;
use crate::belief::Atom;

fn list(atoms: &[Atom]) -> String {
    atoms.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
}

fn sentence(v: &Violation) -> String {
    let atoms = list(&v.offending_atoms);
    match v.constraint {
        ConstraintId::C1 => {
            let count = match v.offending_atoms.len() {
                2 => "two".to_string(),
                n => n.to_string(),
            };
            format!("You believe you are in {count} districts at once: {atoms}. Revise your location belief.")
        }
        ConstraintId::C2 => {
            format!("You hold more than one value for the same quantity: {atoms}. Keep a single value for each.")
        }
        ConstraintId::C3 => {
            format!("Your carried amount is outside what an agent can hold: {atoms}. Revise your inventory belief.")
        }
        ConstraintId::C4 => format!("A resource level cannot be negative: {atoms}. Revise your resource observations."),
        ConstraintId::C5 => {
            format!("District health must lie between 0 and 100: {atoms}. Revise your health observations.")
        }
        ConstraintId::C6 => {
            let location = v.offending_atoms.iter().find(|a| a.predicate == "at").and_then(|a| a.args.get(1));
            let target = v.offending_atoms.iter().find(|a| a.predicate == "plan_move").and_then(|a| a.args.first());
            let neighbours: Vec<String> = v.context_atoms.iter().filter_map(|a| a.args.get(1)).map(ToString::to_string).collect();
            match (location, target) {
                (Some(l), Some(t)) => format!(
                    "You plan to move from {l} to {t}, but {t} is not adjacent to {l}: {atoms}. \
                     Districts adjacent to {l}: {}.",
                    if neighbours.is_empty() { "none".to_string() } else { neighbours.join(", ") }
                ),
                _ => format!("Your planned move does not follow the district graph: {atoms}."),
            }
        }
        ConstraintId::C7 => {
            let amount = v.offending_atoms.iter().find(|a| a.predicate == "plan_supply").and_then(|a| a.args.first());
            let held = v.offending_atoms.iter().find(|a| a.predicate == "carrying");
            match (amount, held) {
                (Some(x), Some(h)) => format!(
                    "You plan to supply {x} units but believe you carry only {}: {atoms}. \
                     Lower the amount or resupply at d1.",
                    h.args[1]
                ),
                _ => format!("A planned supply must be a positive amount: {atoms}."),
            }
        }
        ConstraintId::C8 => {
            format!("You hold more than one plan: {atoms}. Keep exactly one plan_move or plan_supply.")
        }
    }
}

/// Templated feedback for an inconsistent core; deterministic in its input.
pub fn explain(core: &CoreResult) -> String {
    let mut out: Vec<String> = core.violations_witnessed.iter().map(sentence).collect();
    if out.is_empty() {
        out.push("Your beliefs are inconsistent.".to_string());
    }
    out.push(format!("Conflicting statements: {}", core.statements.join(" ")));
    out.join(" ")
}
