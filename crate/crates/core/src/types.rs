//! Simple types: type variables and constructor applications.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

/// Name of the function-type constructor.
pub const FUN: &str = "fun";
/// Name of the boolean type constructor.
pub const BOOL: &str = "bool";

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TypeKind {
    Var(String),
    Con(String, Vec<SimpleType>),
}

/// A simple type. Cheap to clone; equality is structural.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SimpleType(Arc<TypeKind>);

impl SimpleType {
    pub fn var(name: impl Into<String>) -> Self {
        SimpleType(Arc::new(TypeKind::Var(name.into())))
    }

    pub fn con(name: impl Into<String>, args: Vec<SimpleType>) -> Self {
        SimpleType(Arc::new(TypeKind::Con(name.into(), args)))
    }

    /// A nullary constructor such as `num` or `bool`.
    pub fn base(name: impl Into<String>) -> Self {
        Self::con(name, Vec::new())
    }

    pub fn bool() -> Self {
        Self::base(BOOL)
    }

    pub fn fun(domain: SimpleType, codomain: SimpleType) -> Self {
        Self::con(FUN, vec![domain, codomain])
    }

    /// Right-nested function type `a1 -> a2 -> ... -> result`.
    pub fn curried(args: &[SimpleType], result: SimpleType) -> Self {
        args.iter()
            .rev()
            .fold(result, |acc, a| Self::fun(a.clone(), acc))
    }

    pub fn kind(&self) -> &TypeKind {
        &self.0
    }

    /// Domain and codomain when this is a function type.
    pub fn dest_fun(&self) -> Option<(&SimpleType, &SimpleType)> {
        match &*self.0 {
            TypeKind::Con(name, args) if name == FUN && args.len() == 2 => Some((&args[0], &args[1])),
            _ => None,
        }
    }

    pub fn is_bool(&self) -> bool {
        matches!(&*self.0, TypeKind::Con(name, args) if name == BOOL && args.is_empty())
    }

    pub fn type_vars(&self, out: &mut Vec<String>) {
        match &*self.0 {
            TypeKind::Var(v) => {
                if !out.contains(v) {
                    out.push(v.clone());
                }
            }
            TypeKind::Con(_, args) => args.iter().for_each(|a| a.type_vars(out)),
        }
    }

    pub fn has_type_vars(&self) -> bool {
        match &*self.0 {
            TypeKind::Var(_) => true,
            TypeKind::Con(_, args) => args.iter().any(SimpleType::has_type_vars),
        }
    }

    /// Replaces type variables according to `map`; unmapped variables are kept.
    pub fn instantiate(&self, map: &BTreeMap<String, SimpleType>) -> SimpleType {
        if map.is_empty() || !self.has_type_vars() {
            return self.clone();
        }
        match &*self.0 {
            TypeKind::Var(v) => map.get(v).cloned().unwrap_or_else(|| self.clone()),
            TypeKind::Con(name, args) => {
                SimpleType::con(name.clone(), args.iter().map(|a| a.instantiate(map)).collect())
            }
        }
    }

    /// One-way matching of `self` (pattern) against `subject`, extending `map`.
    /// Type variables of `subject` are rigid.
    pub fn match_into(&self, subject: &SimpleType, map: &mut BTreeMap<String, SimpleType>) -> bool {
        match (&*self.0, &*subject.0) {
            (TypeKind::Var(v), _) => match map.get(v) {
                Some(bound) => bound == subject,
                None => {
                    map.insert(v.clone(), subject.clone());
                    true
                }
            },
            (TypeKind::Con(n1, a1), TypeKind::Con(n2, a2)) => {
                n1 == n2
                    && a1.len() == a2.len()
                    && a1.iter().zip(a2).all(|(p, s)| p.match_into(s, map))
            }
            _ => false,
        }
    }
}

impl fmt::Display for SimpleType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &*self.0 {
            TypeKind::Var(v) => write!(f, "{v}"),
            TypeKind::Con(name, args) if args.is_empty() => write!(f, "{name}"),
            TypeKind::Con(name, args) => {
                write!(f, "({name}")?;
                for a in args {
                    write!(f, " {a}")?;
                }
                write!(f, ")")
            }
        }
    }
}

impl fmt::Debug for SimpleType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}
