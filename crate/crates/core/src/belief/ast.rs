use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

/// 1-based source position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Position {
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}", self.line, self.column)
    }
}

/// Half-open source range: `start` is the first character, `end` is one past the last.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: Position,
    pub end: Position,
    /// Byte offsets into the source text.
    pub start_byte: usize,
    pub end_byte: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Term {
    Integer(i64),
    Constant(String),
    Variable(String),
}

impl Term {
    pub fn constant(s: impl Into<String>) -> Self {
        Term::Constant(s.into())
    }

    pub fn var(s: impl Into<String>) -> Self {
        Term::Variable(s.into())
    }

    pub fn is_variable(&self) -> bool {
        matches!(self, Term::Variable(_))
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Term::Integer(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_constant(&self) -> Option<&str> {
        match self {
            Term::Constant(c) => Some(c),
            _ => None,
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Integer(v) => write!(f, "{v}"),
            Term::Constant(c) | Term::Variable(c) => f.write_str(c),
        }
    }
}

impl From<i64> for Term {
    fn from(v: i64) -> Self {
        Term::Integer(v)
    }
}

impl From<&str> for Term {
    fn from(s: &str) -> Self {
        if s.starts_with(|c: char| c.is_ascii_uppercase()) {
            Term::Variable(s.to_string())
        } else {
            Term::Constant(s.to_string())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Atom {
    pub predicate: String,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(predicate: impl Into<String>, args: impl IntoIterator<Item = Term>) -> Self {
        Atom { predicate: predicate.into(), args: args.into_iter().collect() }
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }

    pub fn is_ground(&self) -> bool {
        !self.args.iter().any(Term::is_variable)
    }

    /// Variables in order of first occurrence.
    pub fn variables(&self) -> impl Iterator<Item = &str> {
        self.args.iter().filter_map(|t| match t {
            Term::Variable(v) => Some(v.as_str()),
            _ => None,
        })
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.predicate)?;
        if !self.args.is_empty() {
            f.write_str("(")?;
            for (i, a) in self.args.iter().enumerate() {
                if i > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{a}")?;
            }
            f.write_str(")")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Statement {
    Fact { head: Atom },
    Rule { head: Atom, body: Vec<Atom> },
}

impl Statement {
    pub fn head(&self) -> &Atom {
        match self {
            Statement::Fact { head } | Statement::Rule { head, .. } => head,
        }
    }

    pub fn body(&self) -> &[Atom] {
        match self {
            Statement::Fact { .. } => &[],
            Statement::Rule { body, .. } => body,
        }
    }

    pub fn is_rule(&self) -> bool {
        matches!(self, Statement::Rule { .. })
    }
}

impl fmt::Display for Statement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Statement::Fact { head } => write!(f, "{head}."),
            Statement::Rule { head, body } => {
                write!(f, "{head} :- ")?;
                for (i, b) in body.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{b}")?;
                }
                f.write_str(".")
            }
        }
    }
}

/// Parsed belief statements in source order.
///
/// Equality is structural: spans are ignored, so a program compares equal to
/// the re-parse of its pretty-printed form.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct BeliefProgram {
    pub statements: Vec<Statement>,
    pub spans: Vec<Span>,
}

impl PartialEq for BeliefProgram {
    fn eq(&self, other: &Self) -> bool {
        self.statements == other.statements
    }
}

impl Eq for BeliefProgram {}

impl BeliefProgram {
    /// Program with no source text behind it; spans are left empty.
    pub fn from_statements(statements: Vec<Statement>) -> Self {
        BeliefProgram { statements, spans: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.statements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.statements.is_empty()
    }

    /// Sub-program made of the statements at `indices` (kept in index order).
    pub fn subset(&self, indices: &BTreeSet<usize>) -> BeliefProgram {
        let statements = indices.iter().filter_map(|&i| self.statements.get(i).cloned()).collect();
        let spans = if self.spans.len() == self.statements.len() {
            indices.iter().filter_map(|&i| self.spans.get(i).copied()).collect()
        } else {
            Vec::new()
        };
        BeliefProgram { statements, spans }
    }

    /// Canonical rendering, one statement per line.
    pub fn pretty_print(&self) -> String {
        let mut out = String::new();
        for s in &self.statements {
            out.push_str(&s.to_string());
            out.push('\n');
        }
        out
    }
}
