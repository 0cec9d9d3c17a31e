//! Domain constraints over a closed fact set.
//!
//! Every constraint is a denial: it fires on the presence of atoms, never on
//! their absence. Adding facts can therefore only add violations, which is what
//! makes minimal-core extraction well defined.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::theory::FixedTheory;
use crate::belief::{Atom, Term};
use crate::sim::{DistrictId, MAX_HEALTH};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ConstraintId {
    /// At most one believed own location.
    C1,
    /// One value per carried kind, per district resource level, per district health.
    C2,
    /// Carried amounts within [0, capacity].
    C3,
    /// Resource levels non-negative.
    C4,
    /// Health within [0, 100].
    C5,
    /// Planned move targets a neighbour of the believed location.
    C6,
    /// Planned supply is positive and within believed holdings of the own kind.
    C7,
    /// At most one plan.
    C8,
}

impl ConstraintId {
    pub const ALL: [ConstraintId; 8] = [
        ConstraintId::C1,
        ConstraintId::C2,
        ConstraintId::C3,
        ConstraintId::C4,
        ConstraintId::C5,
        ConstraintId::C6,
        ConstraintId::C7,
        ConstraintId::C8,
    ];

    pub fn template_id(self) -> &'static str {
        match self {
            ConstraintId::C1 => "location_unique",
            ConstraintId::C2 => "functional_value",
            ConstraintId::C3 => "carrying_range",
            ConstraintId::C4 => "resource_nonnegative",
            ConstraintId::C5 => "health_range",
            ConstraintId::C6 => "move_adjacent",
            ConstraintId::C7 => "supply_holdings",
            ConstraintId::C8 => "single_plan",
        }
    }
}

impl fmt::Display for ConstraintId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub constraint: ConstraintId,
    pub offending_atoms: Vec<Atom>,
    /// Background atoms quoted by the explanation (e.g. adjacency facts).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub context_atoms: Vec<Atom>,
    pub template_id: String,
}

impl Violation {
    fn new(constraint: ConstraintId, offending_atoms: Vec<Atom>) -> Self {
        Violation { constraint, offending_atoms, context_atoms: Vec::new(), template_id: constraint.template_id().into() }
    }
}

fn args<'a>(facts: &'a BTreeSet<Atom>, predicate: &'a str, arity: usize) -> impl Iterator<Item = &'a Atom> + 'a {
    facts.iter().filter(move |a| a.predicate == predicate && a.arity() == arity)
}

fn is_self(t: &Term) -> bool {
    t.as_constant() == Some("self")
}

fn self_locations(facts: &BTreeSet<Atom>) -> Vec<&Atom> {
    args(facts, "at", 2).filter(|a| is_self(&a.args[0])).collect()
}

/// Groups atoms of `predicate` by their key positions and reports every key
/// that has more than one distinct value.
fn functional<'a>(facts: &'a BTreeSet<Atom>, predicate: &str, arity: usize, out: &mut Vec<Violation>) {
    let mut groups: BTreeMap<&[Term], Vec<&Atom>> = BTreeMap::new();
    for a in args(facts, predicate, arity) {
        groups.entry(&a.args[..arity - 1]).or_default().push(a);
    }
    for atoms in groups.into_values() {
        if atoms.len() > 1 {
            out.push(Violation::new(ConstraintId::C2, atoms.into_iter().cloned().collect()));
        }
    }
}

fn out_of_range(facts: &BTreeSet<Atom>, predicate: &str, arity: usize, lo: i64, hi: i64) -> Vec<Atom> {
    args(facts, predicate, arity)
        .filter(|a| a.args[arity - 1].as_int().is_some_and(|v| v < lo || v > hi))
        .cloned()
        .collect()
}

/// All violations, ordered by constraint and then by atom order.
pub fn check_constraints(facts: &BTreeSet<Atom>, theory: &FixedTheory) -> Vec<Violation> {
    let mut out = Vec::new();

    let locations = self_locations(facts);
    if locations.len() > 1 {
        out.push(Violation::new(ConstraintId::C1, locations.iter().map(|a| (*a).clone()).collect()));
    }

    functional(facts, "carrying", 2, &mut out);
    functional(facts, "resource_level", 3, &mut out);
    functional(facts, "health", 2, &mut out);

    for a in out_of_range(facts, "carrying", 2, 0, i64::from(theory.capacity)) {
        out.push(Violation::new(ConstraintId::C3, vec![a]));
    }
    for a in out_of_range(facts, "resource_level", 3, 0, i64::MAX) {
        out.push(Violation::new(ConstraintId::C4, vec![a]));
    }
    for a in out_of_range(facts, "health", 2, 0, i64::from(MAX_HEALTH)) {
        out.push(Violation::new(ConstraintId::C5, vec![a]));
    }

    for plan in args(facts, "plan_move", 1) {
        let Some(target) = plan.args[0].as_constant().and_then(|c| c.parse::<DistrictId>().ok()) else { continue };
        for loc_atom in &locations {
            let Some(loc) = loc_atom.args[1].as_constant().and_then(|c| c.parse::<DistrictId>().ok()) else {
                continue;
            };
            if !theory.topology.adjacent(loc, target) {
                let mut v = Violation::new(ConstraintId::C6, vec![(*loc_atom).clone(), plan.clone()]);
                v.context_atoms = theory
                    .topology
                    .neighbors(loc)
                    .into_iter()
                    .map(|n| Atom::new("adjacent", [Term::constant(loc.as_str()), Term::constant(n.as_str())]))
                    .collect();
                out.push(v);
            }
        }
    }

    let own = theory.own_kind.as_str();
    for plan in args(facts, "plan_supply", 1) {
        let Some(amount) = plan.args[0].as_int() else { continue };
        if amount <= 0 {
            out.push(Violation::new(ConstraintId::C7, vec![plan.clone()]));
            continue;
        }
        for held in args(facts, "carrying", 2).filter(|a| a.args[0].as_constant() == Some(own)) {
            if held.args[1].as_int().is_some_and(|c| amount > c) {
                out.push(Violation::new(ConstraintId::C7, vec![held.clone(), plan.clone()]));
            }
        }
    }

    let plans: Vec<Atom> =
        facts.iter().filter(|a| a.predicate == "plan_move" || a.predicate == "plan_supply").cloned().collect();
    if plans.len() > 1 {
        out.push(Violation::new(ConstraintId::C8, plans));
    }

    out
}
