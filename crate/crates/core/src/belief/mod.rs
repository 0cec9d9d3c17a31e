//! The constrained belief language agents use for their internal beliefs:
//! ground facts and negation-free Horn rules over a small built-in vocabulary.

mod analysis;
mod ast;
mod parser;
mod signature;

pub use analysis::{check_safety, dependency_edges, find_cycles, UnsafeVariable};
pub use ast::{Atom, BeliefProgram, Position, Span, Statement, Term};
pub use parser::{parse, ParseError};
pub use signature::{builtin, Sort, BUILTINS};

/// EBNF of the belief language, as shown to agents and in the docs.
pub const GRAMMAR: &str = include_str!("../../templates/belief_grammar.txt");
