//! Recursive-descent parser for belief programs.
//!
//! ```text
//! program   = { statement } ;
//! statement = atom [ ":-" atom { "," atom } ] "." ;
//! atom      = ident [ "(" term { "," term } ")" ] ;
//! term      = integer | ident | variable ;
//! ident     = lower { letter | digit | "_" } ;
//! variable  = upper { letter | digit | "_" } ;
//! integer   = [ "-" ] digit { digit } ;
//! ```
//!
//! Whitespace is insignificant and `%` starts a comment running to the end of
//! the line.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::ast::{Atom, BeliefProgram, Position, Span, Statement, Term};
use super::signature::{builtin, Sort};

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ParseError {
    #[error("{position}: {message}")]
    Syntax { position: Position, message: String },
    #[error("{position}: predicate {predicate} expects {expected} argument(s), found {found}")]
    Arity { position: Position, predicate: String, expected: usize, found: usize },
    #[error("{position}: argument {argument} of {predicate} must be a {expected}, found '{found}'")]
    Sort { position: Position, predicate: String, argument: usize, expected: Sort, found: String },
    #[error("{position}: fact {fact} contains variable {variable}")]
    NonGroundFact { position: Position, fact: String, variable: String },
}

impl ParseError {
    pub fn position(&self) -> Position {
        match self {
            ParseError::Syntax { position, .. }
            | ParseError::Arity { position, .. }
            | ParseError::Sort { position, .. }
            | ParseError::NonGroundFact { position, .. } => *position,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Var(String),
    Int(i64),
    LParen,
    RParen,
    Comma,
    Dot,
    If,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) | Tok::Var(s) => format!("'{s}'"),
            Tok::Int(v) => format!("'{v}'"),
            Tok::LParen => "'('".into(),
            Tok::RParen => "')'".into(),
            Tok::Comma => "','".into(),
            Tok::Dot => "'.'".into(),
            Tok::If => "':-'".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    span: Span,
}

struct Lexer<'a> {
    src: &'a str,
    chars: std::iter::Peekable<std::str::CharIndices<'a>>,
    line: usize,
    column: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer { src, chars: src.char_indices().peekable(), line: 1, column: 1 }
    }

    fn pos(&self) -> Position {
        Position { line: self.line, column: self.column }
    }

    fn offset(&mut self) -> usize {
        self.chars.peek().map(|&(i, _)| i).unwrap_or(self.src.len())
    }

    fn bump(&mut self) -> Option<char> {
        let (_, c) = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn peek(&mut self) -> Option<char> {
        self.chars.peek().map(|&(_, c)| c)
    }

    fn skip_trivia(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_whitespace() {
                self.bump();
            } else if c == '%' {
                while let Some(c) = self.peek() {
                    if c == '\n' {
                        break;
                    }
                    self.bump();
                }
            } else {
                break;
            }
        }
    }

    fn tokenize(mut self) -> Result<Vec<Token>, ParseError> {
        let mut out = Vec::new();
        loop {
            self.skip_trivia();
            let start = self.pos();
            let start_byte = self.offset();
            let Some(c) = self.peek() else {
                let span = Span { start, end: start, start_byte, end_byte: start_byte };
                out.push(Token { tok: Tok::Eof, span });
                return Ok(out);
            };
            let tok = match c {
                '(' => {
                    self.bump();
                    Tok::LParen
                }
                ')' => {
                    self.bump();
                    Tok::RParen
                }
                ',' => {
                    self.bump();
                    Tok::Comma
                }
                '.' => {
                    self.bump();
                    Tok::Dot
                }
                ':' => {
                    self.bump();
                    if self.peek() == Some('-') {
                        self.bump();
                        Tok::If
                    } else {
                        return Err(ParseError::Syntax { position: start, message: "expected ':-'".into() });
                    }
                }
                '-' | '0'..='9' => {
                    let mut text = String::new();
                    if c == '-' {
                        text.push('-');
                        self.bump();
                    }
                    while let Some(d) = self.peek().filter(char::is_ascii_digit) {
                        text.push(d);
                        self.bump();
                    }
                    if text == "-" {
                        return Err(ParseError::Syntax {
                            position: start,
                            message: "expected digits after '-'".into(),
                        });
                    }
                    let value = text.parse::<i64>().map_err(|_| ParseError::Syntax {
                        position: start,
                        message: format!("integer {text} out of range"),
                    })?;
                    Tok::Int(value)
                }
                c if c.is_ascii_alphabetic() => {
                    let mut text = String::new();
                    while let Some(d) = self.peek().filter(|d| d.is_ascii_alphanumeric() || *d == '_') {
                        text.push(d);
                        self.bump();
                    }
                    if c.is_ascii_uppercase() {
                        Tok::Var(text)
                    } else {
                        Tok::Ident(text)
                    }
                }
                other => {
                    return Err(ParseError::Syntax {
                        position: start,
                        message: format!("unexpected character '{other}'"),
                    })
                }
            };
            let span = Span { start, end: self.pos(), start_byte, end_byte: self.offset() };
            out.push(Token { tok, span });
        }
    }
}

struct Parser {
    tokens: Vec<Token>,
    idx: usize,
    arities: HashMap<String, usize>,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.idx]
    }

    fn advance(&mut self) -> Token {
        let t = self.tokens[self.idx].clone();
        if self.idx + 1 < self.tokens.len() {
            self.idx += 1;
        }
        t
    }

    fn error(&self, expected: &str) -> ParseError {
        let t = self.peek();
        ParseError::Syntax {
            position: t.span.start,
            message: format!("expected {expected}, found {}", t.tok.describe()),
        }
    }

    fn expect(&mut self, tok: Tok, expected: &str) -> Result<Token, ParseError> {
        if self.peek().tok == tok {
            Ok(self.advance())
        } else {
            Err(self.error(expected))
        }
    }

    fn program(&mut self) -> Result<BeliefProgram, ParseError> {
        let mut program = BeliefProgram::default();
        while self.peek().tok != Tok::Eof {
            let (statement, span) = self.statement()?;
            program.statements.push(statement);
            program.spans.push(span);
        }
        Ok(program)
    }

    fn statement(&mut self) -> Result<(Statement, Span), ParseError> {
        let first = self.peek().span;
        let head = self.atom()?;
        let statement = if self.peek().tok == Tok::If {
            self.advance();
            let mut body = vec![self.atom()?];
            while self.peek().tok == Tok::Comma {
                self.advance();
                body.push(self.atom()?);
            }
            Statement::Rule { head: head.0, body: body.into_iter().map(|(a, _)| a).collect() }
        } else {
            if let Some(v) = head.0.variables().next() {
                return Err(ParseError::NonGroundFact {
                    position: head.1,
                    fact: head.0.to_string(),
                    variable: v.to_string(),
                });
            }
            Statement::Fact { head: head.0 }
        };
        let dot = if matches!(statement, Statement::Rule { .. }) {
            self.expect(Tok::Dot, "',' or '.'")?
        } else {
            self.expect(Tok::Dot, "':-' or '.'")?
        };
        let span = Span { start: first.start, end: dot.span.end, start_byte: first.start_byte, end_byte: dot.span.end_byte };
        Ok((statement, span))
    }

    fn atom(&mut self) -> Result<(Atom, Position), ParseError> {
        let t = self.peek().clone();
        let predicate = match t.tok {
            Tok::Ident(name) => name,
            Tok::Var(_) => {
                return Err(ParseError::Syntax {
                    position: t.span.start,
                    message: format!("expected a predicate name, found variable {}", t.tok.describe()),
                })
            }
            _ => return Err(self.error("a predicate name")),
        };
        self.advance();
        let mut args = Vec::new();
        let mut arg_positions = Vec::new();
        if self.peek().tok == Tok::LParen {
            self.advance();
            loop {
                let (term, pos) = self.term()?;
                args.push(term);
                arg_positions.push(pos);
                match self.peek().tok {
                    Tok::Comma => {
                        self.advance();
                    }
                    Tok::RParen => {
                        self.advance();
                        break;
                    }
                    _ => return Err(self.error("',' or ')'")),
                }
            }
        }
        let atom = Atom { predicate, args };
        self.check_signature(&atom, t.span.start, &arg_positions)?;
        Ok((atom, t.span.start))
    }

    fn term(&mut self) -> Result<(Term, Position), ParseError> {
        let t = self.peek().clone();
        let term = match t.tok {
            Tok::Int(v) => Term::Integer(v),
            Tok::Ident(s) => Term::Constant(s),
            Tok::Var(s) => Term::Variable(s),
            _ => return Err(self.error("a term")),
        };
        self.advance();
        Ok((term, t.span.start))
    }

    fn check_signature(&mut self, atom: &Atom, position: Position, arg_positions: &[Position]) -> Result<(), ParseError> {
        let expected = match builtin(&atom.predicate) {
            Some(sorts) => {
                if sorts.len() == atom.arity() {
                    for (i, (sort, term)) in sorts.iter().zip(&atom.args).enumerate() {
                        if !sort.admits(term) {
                            return Err(ParseError::Sort {
                                position: arg_positions[i],
                                predicate: atom.predicate.clone(),
                                argument: i + 1,
                                expected: *sort,
                                found: term.to_string(),
                            });
                        }
                    }
                    return Ok(());
                }
                sorts.len()
            }
            None => *self.arities.entry(atom.predicate.clone()).or_insert(atom.arity()),
        };
        if expected == atom.arity() {
            Ok(())
        } else {
            Err(ParseError::Arity { position, predicate: atom.predicate.clone(), expected, found: atom.arity() })
        }
    }
}

/// Parse belief-language source text.
pub fn parse(text: &str) -> Result<BeliefProgram, ParseError> {
    let tokens = Lexer::new(text).tokenize()?;
    Parser { tokens, idx: 0, arities: HashMap::new() }.program()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_fact() {
        let p = parse("at(self, d2).").unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(
            p.statements[0],
            Statement::Fact { head: Atom::new("at", [Term::constant("self"), Term::constant("d2")]) }
        );
        assert_eq!(p.spans[0].start, Position { line: 1, column: 1 });
        assert_eq!(p.spans[0].end, Position { line: 1, column: 14 });
    }

    #[test]
    fn single_rule() {
        let p = parse("needs(D, food, 20) :- resource_level(D, food, 0).").unwrap();
        assert_eq!(p.len(), 1);
        let Statement::Rule { head, body } = &p.statements[0] else { panic!("expected rule") };
        assert_eq!(head.args[0], Term::var("D"));
        assert_eq!(body.len(), 1);
        assert_eq!(body[0].args[2], Term::Integer(0));
    }

    #[test]
    fn missing_comma() {
        let err = parse("at(self d2).").unwrap_err();
        let ParseError::Syntax { position, message } = &err else { panic!("{err:?}") };
        assert_eq!(*position, Position { line: 1, column: 9 });
        assert!(message.contains("','"), "{message}");
    }

    #[test]
    fn unterminated_atom() {
        let err = parse("at(self,d1 .").unwrap_err();
        assert_eq!(err.position(), Position { line: 1, column: 12 });
    }

    #[test]
    fn comments_and_lines() {
        let src = "% header\nat(self, d1). % trailing\n\ncarrying(food, 50).\n";
        let p = parse(src).unwrap();
        assert_eq!(p.len(), 2);
        assert_eq!(p.spans[1].start, Position { line: 4, column: 1 });
    }

    #[test]
    fn negative_integers() {
        let p = parse("carrying(food,-5).").unwrap();
        assert_eq!(p.statements[0].head().args[1], Term::Integer(-5));
        assert!(parse("carrying(food,-).").is_err());
    }

    #[test]
    fn builtin_arity_and_sorts() {
        assert!(matches!(parse("at(self)."), Err(ParseError::Arity { expected: 2, found: 1, .. })));
        assert!(matches!(
            parse("health(d2, high)."),
            Err(ParseError::Sort { argument: 2, expected: Sort::Integer, .. })
        ));
        assert!(matches!(parse("at(self, d5)."), Err(ParseError::Sort { expected: Sort::District, .. })));
        assert!(matches!(parse("carrying(water, 3)."), Err(ParseError::Sort { expected: Sort::Resource, .. })));
    }

    #[test]
    fn unknown_predicates_infer_arity() {
        assert!(parse("likes(a, b). likes(c, d).").is_ok());
        let err = parse("likes(a, b). likes(c).").unwrap_err();
        assert!(matches!(err, ParseError::Arity { expected: 2, found: 1, .. }));
        assert_eq!(err.position(), Position { line: 1, column: 14 });
    }

    #[test]
    fn facts_must_be_ground() {
        assert!(matches!(parse("at(self, D)."), Err(ParseError::NonGroundFact { .. })));
    }

    #[test]
    fn zero_arity_atoms() {
        let p = parse("alarm :- health(d2, 0).").unwrap();
        assert_eq!(p.statements[0].head().arity(), 0);
    }

    #[test]
    fn stray_characters() {
        let err = parse("at(self, d1)!").unwrap_err();
        assert_eq!(err.position(), Position { line: 1, column: 13 });
        assert!(parse("at(self, d1) : health(d1, 3).").is_err());
        assert!(parse("X(a).").is_err());
    }

    #[test]
    fn empty_program() {
        assert!(parse("").unwrap().is_empty());
        assert!(parse("  % only a comment").unwrap().is_empty());
    }

    #[test]
    fn pretty_print_roundtrip() {
        for src in ["at(self, d2).", "needs(D, food, 20) :- resource_level(D, food, 0).", "a. b :- a, c(1). c(2)."] {
            let p = parse(src).unwrap();
            assert_eq!(parse(&p.pretty_print()).unwrap(), p);
        }
        assert_eq!(BeliefProgram::default().pretty_print(), "");
        let p = parse("b(1). a :- b(1). c(2).").unwrap();
        assert_eq!(p.pretty_print(), "b(1).\na :- b(1).\nc(2).\n");
    }
}
