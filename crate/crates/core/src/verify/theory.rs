use std::collections::BTreeSet;

use crate::belief::{Atom, Term};
use crate::sim::{DistrictId, ResourceKind, Topology};

/// Background knowledge every belief program is checked against.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FixedTheory {
    pub topology: Topology,
    /// Maximum amount an agent can carry.
    pub capacity: u32,
    /// Resource kind of the agent whose beliefs are checked.
    pub own_kind: ResourceKind,
    background: BTreeSet<Atom>,
}

impl Default for FixedTheory {
    fn default() -> Self {
        FixedTheory::new(Topology::default(), 50, ResourceKind::Food)
    }
}

impl FixedTheory {
    pub fn new(topology: Topology, capacity: u32, own_kind: ResourceKind) -> Self {
        let mut background = BTreeSet::new();
        for d in DistrictId::ALL {
            background.insert(Atom::new("district", [Term::constant(d.as_str())]));
        }
        for (a, b) in topology.edges() {
            background.insert(Atom::new("adjacent", [Term::constant(a.as_str()), Term::constant(b.as_str())]));
            background.insert(Atom::new("adjacent", [Term::constant(b.as_str()), Term::constant(a.as_str())]));
        }
        for k in ResourceKind::ALL {
            background.insert(Atom::new("resource", [Term::constant(k.as_str())]));
        }
        FixedTheory { topology, capacity, own_kind, background }
    }

    pub fn with_own_kind(mut self, kind: ResourceKind) -> Self {
        self.own_kind = kind;
        self
    }

    pub fn background(&self) -> &BTreeSet<Atom> {
        &self.background
    }

    pub fn is_background(&self, atom: &Atom) -> bool {
        self.background.contains(atom)
    }
}
