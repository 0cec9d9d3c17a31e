//! Static diagnostics: rule safety and predicate dependency cycles.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::{Deserialize, Serialize};

use super::ast::{BeliefProgram, Statement};

/// A head variable that never occurs in the rule body.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct UnsafeVariable {
    pub statement: usize,
    pub variable: String,
}

impl fmt::Display for UnsafeVariable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "statement {}: variable {} is unsafe", self.statement + 1, self.variable)
    }
}

pub fn check_safety(program: &BeliefProgram) -> Vec<UnsafeVariable> {
    let mut out = Vec::new();
    for (idx, statement) in program.statements.iter().enumerate() {
        let Statement::Rule { head, body } = statement else { continue };
        let bound: BTreeSet<&str> = body.iter().flat_map(|a| a.variables()).collect();
        let mut seen = BTreeSet::new();
        for v in head.variables() {
            if !bound.contains(v) && seen.insert(v) {
                out.push(UnsafeVariable { statement: idx, variable: v.to_string() });
            }
        }
    }
    out
}

/// Head-to-body predicate dependency edges over the program's rules.
pub fn dependency_edges(program: &BeliefProgram) -> BTreeSet<(String, String)> {
    program
        .statements
        .iter()
        .filter_map(|s| match s {
            Statement::Rule { head, body } => Some((head, body)),
            Statement::Fact { .. } => None,
        })
        .flat_map(|(head, body)| body.iter().map(move |b| (head.predicate.clone(), b.predicate.clone())))
        .collect()
}

/// Strongly connected components of size >= 2 plus self-loops, each sorted by
/// predicate name; the list itself is sorted.
pub fn find_cycles(program: &BeliefProgram) -> Vec<Vec<String>> {
    let edges = dependency_edges(program);
    let mut graph = DiGraph::<&str, ()>::new();
    let mut nodes = BTreeMap::new();
    for (from, to) in &edges {
        for name in [from, to] {
            nodes.entry(name.as_str()).or_insert_with(|| graph.add_node(name.as_str()));
        }
        graph.add_edge(nodes[from.as_str()], nodes[to.as_str()], ());
    }
    let mut cycles: Vec<Vec<String>> = tarjan_scc(&graph)
        .into_iter()
        .filter(|scc| scc.len() >= 2 || graph.contains_edge(scc[0], scc[0]))
        .map(|scc| {
            let mut names: Vec<String> = scc.iter().map(|&n| graph[n].to_string()).collect();
            names.sort();
            names
        })
        .collect();
    cycles.sort();
    cycles
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::belief::parse;

    #[test]
    fn unsafe_head_variable() {
        let p = parse("needs(D, food, N) :- resource_level(D, food, 0).").unwrap();
        assert_eq!(check_safety(&p), vec![UnsafeVariable { statement: 0, variable: "N".into() }]);
    }

    #[test]
    fn safe_programs() {
        let p = parse("at(self, d1). health(d2, 40).").unwrap();
        assert!(check_safety(&p).is_empty());
        let p = parse("needs(D,food,20) :- resource_level(D,food,L).").unwrap();
        assert!(check_safety(&p).is_empty());
    }

    #[test]
    fn repeated_unsafe_variable_reported_once() {
        let p = parse("p(X, X, Y) :- q(Y).").unwrap();
        assert_eq!(check_safety(&p), vec![UnsafeVariable { statement: 0, variable: "X".into() }]);
    }

    #[test]
    fn mutual_recursion() {
        let p = parse("p(X) :- q(X). q(X) :- p(X).").unwrap();
        assert_eq!(find_cycles(&p), vec![vec!["p".to_string(), "q".to_string()]]);
    }

    #[test]
    fn self_loop() {
        let p = parse("p(X) :- p(X).").unwrap();
        assert_eq!(find_cycles(&p), vec![vec!["p".to_string()]]);
    }

    #[test]
    fn acyclic_chain() {
        let p = parse("p(X) :- q(X). q(X) :- r(X). r(1).").unwrap();
        assert!(find_cycles(&p).is_empty());
    }
}
