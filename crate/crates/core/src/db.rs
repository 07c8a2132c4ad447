//! Theorem databases and their line-oriented file format.
//!
//! ```text
//! lrwt-db 1
//! (thm NAME SPLIT term)
//! ...
//! ```

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::fs;
use std::io;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sexp::{print_term, read_sexps, ParseError, TermReader};
use crate::term::Term;
use crate::types::SimpleType;

pub const DB_HEADER: &str = "lrwt-db 1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "valid" => Ok(Split::Valid),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Theorem {
    pub name: String,
    pub index: usize,
    pub statement: Term,
    pub split: Split,
}

#[derive(Debug, Error)]
pub enum DbError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("database file is empty")]
    Empty,
    #[error("bad header: expected `{DB_HEADER}`, found `{0}`")]
    BadHeader(String),
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: {source}")]
    Parse { line: usize, source: ParseError },
    #[error("duplicate theorem name `{0}`")]
    DuplicateName(String),
    #[error("theorem `{name}` is invalid: {reason}")]
    Invalid { name: String, reason: String },
}

/// An ordered collection of closed boolean theorems.
#[derive(Debug, Clone, PartialEq)]
pub struct TheoremDatabase {
    theorems: Vec<Theorem>,
    signature: BTreeSet<(String, SimpleType)>,
}

impl TheoremDatabase {
    /// Builds a database from `(name, statement, split)` entries in index order.
    pub fn new(entries: Vec<(String, Term, Split)>) -> Result<Self, DbError> {
        let mut seen = HashSet::new();
        let mut theorems = Vec::with_capacity(entries.len());
        let mut signature = BTreeSet::new();
        for (index, (name, statement, split)) in entries.into_iter().enumerate() {
            if !seen.insert(name.clone()) {
                return Err(DbError::DuplicateName(name));
            }
            if !statement.ty().is_bool() {
                return Err(DbError::Invalid {
                    name,
                    reason: format!("statement has type {}, expected bool", statement.ty()),
                });
            }
            if !statement.is_closed() {
                return Err(DbError::Invalid {
                    name,
                    reason: "statement has free variables".into(),
                });
            }
            signature.extend(statement.constants());
            theorems.push(Theorem {
                name,
                index,
                statement,
                split,
            });
        }
        Ok(TheoremDatabase { theorems, signature })
    }

    pub fn theorems(&self) -> &[Theorem] {
        &self.theorems
    }

    pub fn len(&self) -> usize {
        self.theorems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theorems.is_empty()
    }

    /// Typed constants occurring in the statements.
    pub fn signature(&self) -> &BTreeSet<(String, SimpleType)> {
        &self.signature
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &Theorem> {
        self.theorems.iter().filter(move |t| t.split == split)
    }

    pub fn split_sizes(&self) -> BTreeMap<Split, usize> {
        let mut out = BTreeMap::new();
        for t in &self.theorems {
            *out.entry(t.split).or_insert(0) += 1;
        }
        out
    }

    pub fn get(&self, name: &str) -> Option<&Theorem> {
        self.theorems.iter().find(|t| t.name == name)
    }

    /// Name → theorem lookup table.
    pub fn by_name(&self) -> BTreeMap<&str, &Theorem> {
        self.theorems.iter().map(|t| (t.name.as_str(), t)).collect()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from(DB_HEADER);
        out.push('\n');
        for t in &self.theorems {
            out.push_str(&format!("(thm {} {} {})\n", t.name, t.split, print_term(&t.statement)));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, DbError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or(DbError::Empty)?;
        if header.trim() != DB_HEADER {
            return Err(DbError::BadHeader(header.trim().to_string()));
        }
        let mut entries = Vec::new();
        for (i, line) in lines {
            let lineno = i + 1;
            let malformed = |message: &str| DbError::Malformed {
                line: lineno,
                message: message.to_string(),
            };
            let sexps = read_sexps(line).map_err(|source| DbError::Parse { line: lineno, source })?;
            let [record] = sexps.as_slice() else {
                return Err(malformed("expected exactly one record"));
            };
            let crate::sexp::Sexp::List(items, _) = record else {
                return Err(malformed("record must be a list"));
            };
            if items.len() != 4 || items[0].as_atom() != Some("thm") {
                return Err(malformed("expected (thm NAME SPLIT term)"));
            }
            let name = items[1].as_atom().ok_or_else(|| malformed("theorem name must be an atom"))?;
            let split: Split = items[2]
                .as_atom()
                .ok_or_else(|| malformed("split must be an atom"))?
                .parse()
                .map_err(|e: String| malformed(&e))?;
            let statement = TermReader::new()
                .read_term(&items[3])
                .map_err(|source| DbError::Parse { line: lineno, source })?;
            entries.push((name.to_string(), statement, split));
        }
        Self::new(entries)
    }
}

pub fn save_database(db: &TheoremDatabase, path: &Path) -> Result<(), DbError> {
    fs::write(path, db.to_text())?;
    Ok(())
}

pub fn load_database(path: &Path) -> Result<TheoremDatabase, DbError> {
    TheoremDatabase::from_text(&fs::read_to_string(path)?)
}
