//! Sorts and runtime values.
//!
//! Three sorts: booleans, bounded integer intervals, and named enumerations.
//! Every sort has a default value (false, the lower bound, the first literal)
//! used when a term falls off the trace or an event trigger never fires.

use std::fmt;
use std::sync::Arc;

/// The sort of a variable or term.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Sort {
    Bool,
    /// Integers in the inclusive interval `lo..=hi`.
    Int { lo: i64, hi: i64 },
    /// A named enumeration with at least one literal.
    Enum { name: Arc<str>, literals: Arc<[Arc<str>]> },
}

impl Sort {
    /// Builds a bounded integer sort, ordering the endpoints.
    pub fn int(lo: i64, hi: i64) -> Sort {
        Sort::Int { lo: lo.min(hi), hi: lo.max(hi) }
    }

    /// Builds a named enumeration sort from its literals.
    pub fn enumeration(name: &str, literals: &[&str]) -> Sort {
        assert!(!literals.is_empty(), "enum sort needs at least one literal");
        Sort::Enum {
            name: Arc::from(name),
            literals: literals.iter().map(|l| Arc::from(*l)).collect(),
        }
    }

    /// The default value: `false`, the lower bound, or the first literal.
    pub fn default_value(&self) -> Value {
        match self {
            Sort::Bool => Value::Bool(false),
            Sort::Int { lo, .. } => Value::Int(*lo),
            Sort::Enum { literals, .. } => Value::Enum(literals[0].clone()),
        }
    }

    /// Whether `v` inhabits this sort.
    pub fn admits(&self, v: &Value) -> bool {
        match (self, v) {
            (Sort::Bool, Value::Bool(_)) => true,
            (Sort::Int { lo, hi }, Value::Int(n)) => lo <= n && n <= hi,
            (Sort::Enum { literals, .. }, Value::Enum(l)) => {
                literals.iter().any(|k| k == l)
            }
            _ => false,
        }
    }

    /// All values of the sort, in canonical order.
    pub fn values(&self) -> Vec<Value> {
        match self {
            Sort::Bool => vec![Value::Bool(false), Value::Bool(true)],
            Sort::Int { lo, hi } => (*lo..=*hi).map(Value::Int).collect(),
            Sort::Enum { literals, .. } => {
                literals.iter().map(|l| Value::Enum(l.clone())).collect()
            }
        }
    }

    /// Whether two sorts share a kind (bool/bool, int/int, same enum).
    pub fn same_kind(&self, other: &Sort) -> bool {
        match (self, other) {
            (Sort::Bool, Sort::Bool) => true,
            (Sort::Int { .. }, Sort::Int { .. }) => true,
            (Sort::Enum { name: a, .. }, Sort::Enum { name: b, .. }) => a == b,
            _ => false,
        }
    }

    /// Smallest sort containing both, for same-kind sorts.
    pub fn hull(&self, other: &Sort) -> Option<Sort> {
        match (self, other) {
            (Sort::Bool, Sort::Bool) => Some(Sort::Bool),
            (Sort::Int { lo: a, hi: b }, Sort::Int { lo: c, hi: d }) => {
                Some(Sort::Int { lo: *a.min(c), hi: *b.max(d) })
            }
            (Sort::Enum { name: a, .. }, Sort::Enum { name: b, .. }) if a == b => {
                Some(self.clone())
            }
            _ => None,
        }
    }
}

impl fmt::Display for Sort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sort::Bool => write!(f, "bool"),
            Sort::Int { lo, hi } => write!(f, "int {lo}..{hi}"),
            Sort::Enum { name, .. } => write!(f, "{name}"),
        }
    }
}

/// A runtime value.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Value {
    Bool(bool),
    Int(i64),
    /// An enumeration literal, identified by name.
    Enum(Arc<str>),
}

impl Value {
    /// The boolean payload; panics on non-boolean values (callers guarantee
    /// sort correctness before evaluation).
    pub fn as_bool(&self) -> bool {
        match self {
            Value::Bool(b) => *b,
            other => panic!("expected bool value, got {other}"),
        }
    }

    /// The integer payload; panics on non-integer values.
    pub fn as_int(&self) -> i64 {
        match self {
            Value::Int(n) => *n,
            other => panic!("expected int value, got {other}"),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bool(b) => write!(f, "{b}"),
            Value::Int(n) => write!(f, "{n}"),
            Value::Enum(l) => write!(f, "{l}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_per_sort() {
        assert_eq!(Sort::Bool.default_value(), Value::Bool(false));
        assert_eq!(Sort::int(2, 5).default_value(), Value::Int(2));
        let e = Sort::enumeration("mode", &["idle", "busy"]);
        assert_eq!(e.default_value(), Value::Enum(Arc::from("idle")));
    }

    #[test]
    fn admits_checks_bounds_and_literals() {
        let s = Sort::int(0, 3);
        assert!(s.admits(&Value::Int(0)));
        assert!(s.admits(&Value::Int(3)));
        assert!(!s.admits(&Value::Int(4)));
        assert!(!s.admits(&Value::Bool(true)));
        let e = Sort::enumeration("mode", &["idle", "busy"]);
        assert!(e.admits(&Value::Enum(Arc::from("busy"))));
        assert!(!e.admits(&Value::Enum(Arc::from("off"))));
    }

    #[test]
    fn values_enumerate_in_order() {
        assert_eq!(
            Sort::int(1, 3).values(),
            vec![Value::Int(1), Value::Int(2), Value::Int(3)]
        );
        assert_eq!(Sort::Bool.values().len(), 2);
    }

    #[test]
    fn hull_merges_intervals() {
        let a = Sort::int(0, 2);
        let b = Sort::int(1, 5);
        assert_eq!(a.hull(&b), Some(Sort::int(0, 5)));
        assert_eq!(a.hull(&Sort::Bool), None);
    }
}
