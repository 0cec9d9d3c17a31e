//! Bottom-up least-fixpoint evaluation of negation-free, acyclic programs.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::theory::FixedTheory;
use crate::belief::{check_safety, find_cycles, Atom, BeliefProgram, Statement, Term, UnsafeVariable};

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
pub enum EvalError {
    #[error("cyclic predicate dependencies: {0:?}")]
    Cycle(Vec<Vec<String>>),
    #[error("unsafe rule variables: {0:?}")]
    Unsafe(Vec<UnsafeVariable>),
}

/// Closed fact set of a program plus the background theory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Model {
    pub atoms: BTreeSet<Atom>,
    /// Number of passes that derived at least one new atom.
    pub iterations: usize,
}

impl Model {
    /// Atoms that are not part of the background theory.
    pub fn derived<'a>(&'a self, theory: &'a FixedTheory) -> impl Iterator<Item = &'a Atom> + 'a {
        self.atoms.iter().filter(move |a| !theory.is_background(a))
    }
}

type Bindings<'a> = HashMap<&'a str, &'a Term>;

fn match_atom<'a>(pattern: &'a Atom, fact: &'a Atom, bindings: &Bindings<'a>) -> Option<Bindings<'a>> {
    if pattern.args.len() != fact.args.len() {
        return None;
    }
    let mut out = bindings.clone();
    for (p, f) in pattern.args.iter().zip(&fact.args) {
        match p {
            Term::Variable(v) => match out.get(v.as_str()) {
                Some(bound) if *bound != f => return None,
                Some(_) => {}
                None => {
                    out.insert(v.as_str(), f);
                }
            },
            ground => {
                if ground != f {
                    return None;
                }
            }
        }
    }
    Some(out)
}

fn instantiate(atom: &Atom, bindings: &Bindings<'_>) -> Atom {
    let args = atom
        .args
        .iter()
        .map(|t| match t {
            Term::Variable(v) => (*bindings.get(v.as_str()).expect("safe rule binds every head variable")).clone(),
            other => other.clone(),
        })
        .collect();
    Atom { predicate: atom.predicate.clone(), args }
}

fn fire(head: &Atom, body: &[Atom], index: &BTreeMap<&str, Vec<&Atom>>, out: &mut Vec<Atom>) {
    let mut frontier: Vec<Bindings<'_>> = vec![HashMap::new()];
    for pattern in body {
        let Some(candidates) = index.get(pattern.predicate.as_str()) else { return };
        let mut next = Vec::new();
        for b in &frontier {
            for fact in candidates {
                if let Some(extended) = match_atom(pattern, fact, b) {
                    next.push(extended);
                }
            }
        }
        if next.is_empty() {
            return;
        }
        frontier = next;
    }
    out.extend(frontier.iter().map(|b| instantiate(head, b)));
}

/// Least fixpoint of the program's facts and rules over the background theory.
pub fn evaluate(program: &BeliefProgram, theory: &FixedTheory) -> Result<Model, EvalError> {
    let cycles = find_cycles(program);
    if !cycles.is_empty() {
        return Err(EvalError::Cycle(cycles));
    }
    let unsafe_vars = check_safety(program);
    if !unsafe_vars.is_empty() {
        return Err(EvalError::Unsafe(unsafe_vars));
    }

    let mut atoms: BTreeSet<Atom> = theory.background().clone();
    let mut rules = Vec::new();
    for s in &program.statements {
        match s {
            Statement::Fact { head } => {
                atoms.insert(head.clone());
            }
            Statement::Rule { head, body } => rules.push((head, body)),
        }
    }

    let mut iterations = 0;
    loop {
        let mut index: BTreeMap<&str, Vec<&Atom>> = BTreeMap::new();
        for a in &atoms {
            index.entry(a.predicate.as_str()).or_default().push(a);
        }
        let mut produced = Vec::new();
        for (head, body) in &rules {
            fire(head, body, &index, &mut produced);
        }
        let fresh: Vec<Atom> = produced.into_iter().filter(|a| !atoms.contains(a)).collect();
        if fresh.is_empty() {
            break;
        }
        atoms.extend(fresh);
        iterations += 1;
    }
    Ok(Model { atoms, iterations })
}
