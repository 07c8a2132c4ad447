//! S-expression surface syntax for types and terms.
//!
//! ```text
//! term := (v NAME TYPE) | (c NAME TYPE) | (app term term) | (abs (v NAME TYPE) term)
//! TYPE := NAME | (NAME TYPE...)
//! ```
//!
//! A bare type `NAME` starting with `'` is a type variable; any other bare
//! name is a nullary constructor.

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::term::{Term, TermError, TermKind, Var};
use crate::types::{SimpleType, TypeKind, FUN};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("typing error in `{subexpr}`: {reason}")]
    Typing { subexpr: String, reason: String },
}

/// Line and column (both 1-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Span {
    pub line: usize,
    pub column: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Sexp {
    Atom(String, Span),
    List(Vec<Sexp>, Span),
}

impl Sexp {
    pub fn span(&self) -> Span {
        match self {
            Sexp::Atom(_, s) | Sexp::List(_, s) => *s,
        }
    }

    pub fn as_atom(&self) -> Option<&str> {
        match self {
            Sexp::Atom(a, _) => Some(a),
            Sexp::List(..) => None,
        }
    }

    fn syntax_error(&self, message: impl Into<String>) -> ParseError {
        let span = self.span();
        ParseError::Syntax {
            line: span.line,
            column: span.column,
            message: message.into(),
        }
    }
}

impl std::fmt::Display for Sexp {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Sexp::Atom(a, _) => write!(f, "{a}"),
            Sexp::List(items, _) => {
                write!(f, "(")?;
                for (i, it) in items.iter().enumerate() {
                    if i > 0 {
                        write!(f, " ")?;
                    }
                    write!(f, "{it}")?;
                }
                write!(f, ")")
            }
        }
    }
}

/// Reads every top-level s-expression in `text`.
pub fn read_sexps(text: &str) -> Result<Vec<Sexp>, ParseError> {
    let mut stack: Vec<(Vec<Sexp>, Span)> = Vec::new();
    let mut out = Vec::new();
    let mut atom = String::new();
    let mut atom_start = Span { line: 1, column: 1 };
    let (mut line, mut column) = (1usize, 0usize);

    fn push(item: Sexp, stack: &mut [(Vec<Sexp>, Span)], out: &mut Vec<Sexp>) {
        match stack.last_mut() {
            Some((items, _)) => items.push(item),
            None => out.push(item),
        }
    }

    for ch in text.chars() {
        if ch == '\n' {
            line += 1;
            column = 0;
        } else {
            column += 1;
        }
        let here = Span { line, column };
        if ch.is_whitespace() || ch == '(' || ch == ')' {
            if !atom.is_empty() {
                push(Sexp::Atom(std::mem::take(&mut atom), atom_start), &mut stack, &mut out);
            }
            match ch {
                '(' => stack.push((Vec::new(), here)),
                ')' => {
                    let (items, span) = stack.pop().ok_or(ParseError::Syntax {
                        line,
                        column,
                        message: "unexpected `)`".into(),
                    })?;
                    push(Sexp::List(items, span), &mut stack, &mut out);
                }
                _ => {}
            }
        } else {
            if atom.is_empty() {
                atom_start = here;
            }
            atom.push(ch);
        }
    }
    if !atom.is_empty() {
        push(Sexp::Atom(atom, atom_start), &mut stack, &mut out);
    }
    if let Some((_, span)) = stack.last() {
        return Err(ParseError::Syntax {
            line: span.line,
            column: span.column,
            message: "unclosed `(`".into(),
        });
    }
    Ok(out)
}

fn read_one(text: &str) -> Result<Sexp, ParseError> {
    let mut all = read_sexps(text)?;
    match all.len() {
        1 => Ok(all.pop().unwrap()),
        0 => Err(ParseError::Syntax {
            line: 1,
            column: 1,
            message: "empty input".into(),
        }),
        _ => Err(all[1].syntax_error("trailing input after term")),
    }
}

/// Converts s-expressions to types and terms, checking that every type
/// constructor is used with a single arity.
#[derive(Default)]
pub struct TermReader {
    arities: HashMap<String, usize>,
}

impl TermReader {
    pub fn new() -> Self {
        let mut arities = HashMap::new();
        arities.insert(FUN.to_string(), 2);
        TermReader { arities }
    }

    pub fn read_type(&mut self, s: &Sexp) -> Result<SimpleType, ParseError> {
        match s {
            Sexp::Atom(name, _) if name.starts_with('\'') => Ok(SimpleType::var(name.clone())),
            Sexp::Atom(name, _) => {
                self.check_arity(name, 0, s)?;
                Ok(SimpleType::base(name.clone()))
            }
            Sexp::List(items, _) => {
                let (head, rest) = items.split_first().ok_or_else(|| s.syntax_error("empty type"))?;
                let name = head.as_atom().ok_or_else(|| head.syntax_error("type constructor name expected"))?;
                if name.starts_with('\'') {
                    return Err(head.syntax_error("type variables take no arguments"));
                }
                self.check_arity(name, rest.len(), s)?;
                let args = rest.iter().map(|a| self.read_type(a)).collect::<Result<Vec<_>, _>>()?;
                Ok(SimpleType::con(name, args))
            }
        }
    }

    fn check_arity(&mut self, name: &str, arity: usize, s: &Sexp) -> Result<(), ParseError> {
        match self.arities.get(name) {
            Some(&a) if a != arity => Err(ParseError::Typing {
                subexpr: s.to_string(),
                reason: format!("type constructor `{name}` used with {arity} arguments, expected {a}"),
            }),
            Some(_) => Ok(()),
            None => {
                self.arities.insert(name.to_string(), arity);
                Ok(())
            }
        }
    }

    pub fn read_term(&mut self, s: &Sexp) -> Result<Term, ParseError> {
        let items = match s {
            Sexp::List(items, _) => items,
            Sexp::Atom(a, _) => return Err(s.syntax_error(format!("expected a term, found atom `{a}`"))),
        };
        let (head, rest) = items.split_first().ok_or_else(|| s.syntax_error("empty term"))?;
        let tag = head.as_atom().ok_or_else(|| head.syntax_error("term tag expected"))?;
        let arity_error = |expected: usize| ParseError::Typing {
            subexpr: s.to_string(),
            reason: format!("`{tag}` node takes {expected} arguments, found {}", rest.len()),
        };
        match tag {
            "v" | "c" => {
                if rest.len() != 2 {
                    return Err(arity_error(2));
                }
                let name = rest[0].as_atom().ok_or_else(|| rest[0].syntax_error("name expected"))?;
                let ty = self.read_type(&rest[1])?;
                Ok(if tag == "v" {
                    Term::var(name, ty)
                } else {
                    Term::constant(name, ty)
                })
            }
            "app" => {
                if rest.len() != 2 {
                    return Err(arity_error(2));
                }
                let f = self.read_term(&rest[0])?;
                let a = self.read_term(&rest[1])?;
                Term::app(f, a).map_err(|e: TermError| ParseError::Typing {
                    subexpr: s.to_string(),
                    reason: e.to_string(),
                })
            }
            "abs" => {
                if rest.len() != 2 {
                    return Err(arity_error(2));
                }
                let bound = self.read_term(&rest[0])?;
                let v = bound
                    .as_var()
                    .cloned()
                    .ok_or_else(|| rest[0].syntax_error("abstraction binder must be a `v` node"))?;
                let body = self.read_term(&rest[1])?;
                Ok(Term::abs(v, body))
            }
            other => Err(head.syntax_error(format!("unknown term tag `{other}`"))),
        }
    }
}

/// Parses one term.
pub fn parse_term(text: &str) -> Result<Term, ParseError> {
    TermReader::new().read_term(&read_one(text)?)
}

pub fn parse_type(text: &str) -> Result<SimpleType, ParseError> {
    TermReader::new().read_type(&read_one(text)?)
}

pub fn print_type(ty: &SimpleType) -> String {
    ty.to_string()
}

/// Canonical s-expression for a term. Bound names are printed as stored.
pub fn print_term(t: &Term) -> String {
    let mut out = String::with_capacity(t.size() * 16);
    write_term(t, &mut out);
    out
}

fn write_term(t: &Term, out: &mut String) {
    match t.kind() {
        TermKind::Var(Var { name, ty }) => {
            let _ = write!(out, "(v {name} {ty})");
        }
        TermKind::Const { name, ty } => {
            let _ = write!(out, "(c {name} {ty})");
        }
        TermKind::App(f, a) => {
            out.push_str("(app ");
            write_term(f, out);
            out.push(' ');
            write_term(a, out);
            out.push(')');
        }
        TermKind::Abs(Var { name, ty }, b) => {
            let _ = write!(out, "(abs (v {name} {ty}) ");
            write_term(b, out);
            out.push(')');
        }
    }
}

/// Whether `ty` only uses the `'`-prefix convention for type variables.
pub fn type_is_printable(ty: &SimpleType) -> bool {
    match ty.kind() {
        TypeKind::Var(v) => v.starts_with('\''),
        TypeKind::Con(n, args) => !n.starts_with('\'') && args.iter().all(type_is_printable),
    }
}
