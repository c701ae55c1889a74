//! Formulas and terms.
//!
//! Terms read the current state (`x`), the next state (`next(x)` / `x'`), the
//! value at the next or most recent state satisfying a condition (`x @F (c)`,
//! `x @P (c)`), or select between branches (`ite(c, u, v)`). Each
//! state-crossing term node carries an optional default value used when the
//! read falls outside the trace or the trigger never fires; an absent default
//! means the payload sort's default.
//!
//! Formulas combine boolean atoms (boolean terms and comparisons) with the
//! usual future and past temporal operators. Derived operators (release,
//! finally, globally, once, historically, weak-yesterday, the bounded forms,
//! and operator powers) are first-class until desugaring.

use crate::sort::{Sort, Value};
use std::fmt;
use std::sync::Arc;

/// Whether a variable is read from the environment or produced by the
/// component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum IoClass {
    Input,
    Output,
}

/// A declared variable: name, sort, and direction.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct VarInfo {
    pub name: Arc<str>,
    pub sort: Sort,
    pub io: IoClass,
}

impl VarInfo {
    pub fn new(name: &str, sort: Sort, io: IoClass) -> Arc<VarInfo> {
        Arc::new(VarInfo { name: Arc::from(name), sort, io })
    }

    /// Shorthand for a boolean input variable.
    pub fn bool_input(name: &str) -> Arc<VarInfo> {
        VarInfo::new(name, Sort::Bool, IoClass::Input)
    }

    /// Shorthand for a boolean output variable.
    pub fn bool_output(name: &str) -> Arc<VarInfo> {
        VarInfo::new(name, Sort::Bool, IoClass::Output)
    }
}

/// Binary arithmetic on bounded integers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FuncOp {
    Add,
    Sub,
    Mul,
}

impl FuncOp {
    pub fn apply(self, a: i64, b: i64) -> i64 {
        match self {
            FuncOp::Add => a.saturating_add(b),
            FuncOp::Sub => a.saturating_sub(b),
            FuncOp::Mul => a.saturating_mul(b),
        }
    }
}

/// Comparison operators. Equality applies to every sort; the orderings only
/// to integers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn apply(self, a: &Value, b: &Value) -> bool {
        match self {
            CmpOp::Eq => a == b,
            CmpOp::Ne => a != b,
            CmpOp::Lt => a.as_int() < b.as_int(),
            CmpOp::Le => a.as_int() <= b.as_int(),
            CmpOp::Gt => a.as_int() > b.as_int(),
            CmpOp::Ge => a.as_int() >= b.as_int(),
        }
    }

    pub fn is_order(self) -> bool {
        matches!(self, CmpOp::Lt | CmpOp::Le | CmpOp::Gt | CmpOp::Ge)
    }
}

pub type TermRef = Arc<Term>;
pub type FormulaRef = Arc<Formula>;

/// A term over the trace.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Term {
    /// A constant with an explicit sort (integer constants carry the
    /// singleton interval, enum constants their enumeration).
    Const { value: Value, sort: Sort },
    Var(Arc<VarInfo>),
    App { op: FuncOp, lhs: TermRef, rhs: TermRef },
    /// The argument's value one state later; `default` if there is none.
    Next { arg: TermRef, default: Option<Value> },
    /// The argument's value at the nearest strictly future state strongly
    /// satisfying `cond`; `default` if the scan hits an indeterminate
    /// position or the end of the trace first.
    AtNext { arg: TermRef, cond: FormulaRef, default: Option<Value> },
    /// The argument's value at the nearest strictly past state strongly
    /// satisfying `cond`; `default` if blocked, at position 0, or outside
    /// the trace.
    AtLast { arg: TermRef, cond: FormulaRef, default: Option<Value> },
    /// `then_t` when `cond` holds strongly, `else_t` when its negation
    /// does, `default` otherwise.
    Ite { cond: FormulaRef, then_t: TermRef, else_t: TermRef, default: Option<Value> },
}

/// Errors raised when inferring a term's sort.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SortError {
    #[error("arithmetic needs integer operands, got {lhs} and {rhs}")]
    NonIntegerArithmetic { lhs: Sort, rhs: Sort },
    #[error("ite branches have incompatible sorts {then_t} and {else_t}")]
    BranchMismatch { then_t: Sort, else_t: Sort },
    #[error("comparison mixes sorts {lhs} and {rhs}")]
    CmpMismatch { lhs: Sort, rhs: Sort },
    #[error("ordering comparison needs integer operands, got {lhs} and {rhs}")]
    NonIntegerOrder { lhs: Sort, rhs: Sort },
    #[error("default value {value} does not inhabit sort {sort}")]
    BadDefault { value: Value, sort: Sort },
}

impl Term {
    pub fn constant(value: Value, sort: Sort) -> TermRef {
        Arc::new(Term::Const { value, sort })
    }

    pub fn bool_const(b: bool) -> TermRef {
        Term::constant(Value::Bool(b), Sort::Bool)
    }

    pub fn int_const(n: i64) -> TermRef {
        Term::constant(Value::Int(n), Sort::Int { lo: n, hi: n })
    }

    pub fn var(info: Arc<VarInfo>) -> TermRef {
        Arc::new(Term::Var(info))
    }

    pub fn app(op: FuncOp, lhs: TermRef, rhs: TermRef) -> TermRef {
        Arc::new(Term::App { op, lhs, rhs })
    }

    pub fn next(arg: TermRef, default: Option<Value>) -> TermRef {
        Arc::new(Term::Next { arg, default })
    }

    pub fn at_next(arg: TermRef, cond: FormulaRef, default: Option<Value>) -> TermRef {
        Arc::new(Term::AtNext { arg, cond, default })
    }

    pub fn at_last(arg: TermRef, cond: FormulaRef, default: Option<Value>) -> TermRef {
        Arc::new(Term::AtLast { arg, cond, default })
    }

    pub fn ite(
        cond: FormulaRef,
        then_t: TermRef,
        else_t: TermRef,
        default: Option<Value>,
    ) -> TermRef {
        Arc::new(Term::Ite { cond, then_t, else_t, default })
    }

    /// Infers the term's sort, checking arithmetic operands, branch
    /// compatibility, and declared defaults.
    pub fn sort(&self) -> Result<Sort, SortError> {
        match self {
            Term::Const { sort, .. } => Ok(sort.clone()),
            Term::Var(v) => Ok(v.sort.clone()),
            Term::App { op, lhs, rhs } => {
                let (l, r) = (lhs.sort()?, rhs.sort()?);
                match (&l, &r) {
                    (Sort::Int { lo: a, hi: b }, Sort::Int { lo: c, hi: d }) => {
                        let corners = [
                            op.apply(*a, *c),
                            op.apply(*a, *d),
                            op.apply(*b, *c),
                            op.apply(*b, *d),
                        ];
                        Ok(Sort::Int {
                            lo: *corners.iter().min().unwrap(),
                            hi: *corners.iter().max().unwrap(),
                        })
                    }
                    _ => Err(SortError::NonIntegerArithmetic { lhs: l, rhs: r }),
                }
            }
            Term::Next { arg, default }
            | Term::AtNext { arg, default, .. }
            | Term::AtLast { arg, default, .. } => {
                let s = arg.sort()?;
                check_default(&s, default)?;
                Ok(s)
            }
            Term::Ite { then_t, else_t, default, .. } => {
                let (a, b) = (then_t.sort()?, else_t.sort()?);
                let s = a.hull(&b).ok_or(SortError::BranchMismatch {
                    then_t: a.clone(),
                    else_t: b,
                })?;
                check_default(&s, default)?;
                Ok(s)
            }
        }
    }

    /// The default used when this node's read is unresolved: the declared
    /// override, or the payload sort's default. Only meaningful for
    /// state-crossing nodes and `ite`.
    pub fn effective_default(&self) -> Option<Value> {
        let (arg_sort, default) = match self {
            Term::Next { arg, default }
            | Term::AtNext { arg, default, .. }
            | Term::AtLast { arg, default, .. } => (arg.sort().ok()?, default),
            Term::Ite { then_t, else_t, default, .. } => {
                let s = then_t.sort().ok()?.hull(&else_t.sort().ok()?)?;
                (s, default)
            }
            _ => return None,
        };
        Some(default.clone().unwrap_or_else(|| arg_sort.default_value()))
    }

    /// Tree node count: every operator, constant, and variable occurrence
    /// counts one; condition formulas count their own nodes.
    pub fn size(&self) -> usize {
        match self {
            Term::Const { .. } | Term::Var(_) => 1,
            Term::App { lhs, rhs, .. } => 1 + lhs.size() + rhs.size(),
            Term::Next { arg, .. } => 1 + arg.size(),
            Term::AtNext { arg, cond, .. } | Term::AtLast { arg, cond, .. } => {
                1 + arg.size() + cond.size()
            }
            Term::Ite { cond, then_t, else_t, .. } => {
                1 + cond.size() + then_t.size() + else_t.size()
            }
        }
    }
}

fn check_default(sort: &Sort, default: &Option<Value>) -> Result<(), SortError> {
    match default {
        Some(v) if !sort.admits(v) => {
            Err(SortError::BadDefault { value: v.clone(), sort: sort.clone() })
        }
        _ => Ok(()),
    }
}

/// Bounded derived operators: `F<=n`, `G<=n`, `O<=n`, `H<=n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundedOp {
    Finally,
    Globally,
    Once,
    Historically,
}

/// Operator powers: `X^n`, `Y^n`, `Z^n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PowerOp {
    Next,
    Yesterday,
    WeakYesterday,
}

/// A temporal formula.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Formula {
    True,
    False,
    /// A boolean-sorted term used as an atom.
    Atom(TermRef),
    /// A comparison between two terms of the same sort.
    Cmp { op: CmpOp, lhs: TermRef, rhs: TermRef },
    Not(FormulaRef),
    Or(FormulaRef, FormulaRef),
    And(FormulaRef, FormulaRef),
    Next(FormulaRef),
    Until(FormulaRef, FormulaRef),
    Yesterday(FormulaRef),
    Since(FormulaRef, FormulaRef),
    // Derived operators, kept first-class until desugaring.
    Release(FormulaRef, FormulaRef),
    Finally(FormulaRef),
    Globally(FormulaRef),
    Once(FormulaRef),
    Historically(FormulaRef),
    WeakYesterday(FormulaRef),
    Bounded { op: BoundedOp, n: u32, arg: FormulaRef },
    Power { op: PowerOp, n: u32, arg: FormulaRef },
}

impl Formula {
    pub fn tt() -> FormulaRef {
        Arc::new(Formula::True)
    }

    pub fn ff() -> FormulaRef {
        Arc::new(Formula::False)
    }

    pub fn atom(t: TermRef) -> FormulaRef {
        Arc::new(Formula::Atom(t))
    }

    /// Atom reading a boolean variable.
    pub fn var(v: Arc<VarInfo>) -> FormulaRef {
        Formula::atom(Term::var(v))
    }

    pub fn cmp(op: CmpOp, lhs: TermRef, rhs: TermRef) -> FormulaRef {
        Arc::new(Formula::Cmp { op, lhs, rhs })
    }

    pub fn eq(lhs: TermRef, rhs: TermRef) -> FormulaRef {
        Formula::cmp(CmpOp::Eq, lhs, rhs)
    }

    pub fn not(f: FormulaRef) -> FormulaRef {
        Arc::new(Formula::Not(f))
    }

    pub fn or(l: FormulaRef, r: FormulaRef) -> FormulaRef {
        Arc::new(Formula::Or(l, r))
    }

    pub fn and(l: FormulaRef, r: FormulaRef) -> FormulaRef {
        Arc::new(Formula::And(l, r))
    }

    pub fn implies(l: FormulaRef, r: FormulaRef) -> FormulaRef {
        Formula::or(Formula::not(l), r)
    }

    pub fn next(f: FormulaRef) -> FormulaRef {
        Arc::new(Formula::Next(f))
    }

    pub fn until(l: FormulaRef, r: FormulaRef) -> FormulaRef {
        Arc::new(Formula::Until(l, r))
    }

    pub fn yesterday(f: FormulaRef) -> FormulaRef {
        Arc::new(Formula::Yesterday(f))
    }

    pub fn since(l: FormulaRef, r: FormulaRef) -> FormulaRef {
        Arc::new(Formula::Since(l, r))
    }

    pub fn release(l: FormulaRef, r: FormulaRef) -> FormulaRef {
        Arc::new(Formula::Release(l, r))
    }

    pub fn finally(f: FormulaRef) -> FormulaRef {
        Arc::new(Formula::Finally(f))
    }

    pub fn globally(f: FormulaRef) -> FormulaRef {
        Arc::new(Formula::Globally(f))
    }

    pub fn once(f: FormulaRef) -> FormulaRef {
        Arc::new(Formula::Once(f))
    }

    pub fn historically(f: FormulaRef) -> FormulaRef {
        Arc::new(Formula::Historically(f))
    }

    pub fn weak_yesterday(f: FormulaRef) -> FormulaRef {
        Arc::new(Formula::WeakYesterday(f))
    }

    pub fn bounded(op: BoundedOp, n: u32, arg: FormulaRef) -> FormulaRef {
        Arc::new(Formula::Bounded { op, n, arg })
    }

    pub fn power(op: PowerOp, n: u32, arg: FormulaRef) -> FormulaRef {
        Arc::new(Formula::Power { op, n, arg })
    }

    /// Conjunction of a non-empty list, right-nested; `true` when empty.
    pub fn conj(fs: impl IntoIterator<Item = FormulaRef>) -> FormulaRef {
        let mut it = fs.into_iter().collect::<Vec<_>>().into_iter().rev();
        match it.next() {
            None => Formula::tt(),
            Some(last) => it.fold(last, |acc, f| Formula::and(f, acc)),
        }
    }

    /// Tree node count: `true`/`false` count one, every operator, constant,
    /// and variable occurrence counts one.
    pub fn size(&self) -> usize {
        match self {
            Formula::True | Formula::False => 1,
            Formula::Atom(t) => t.size(),
            Formula::Cmp { lhs, rhs, .. } => 1 + lhs.size() + rhs.size(),
            Formula::Not(f)
            | Formula::Next(f)
            | Formula::Yesterday(f)
            | Formula::Finally(f)
            | Formula::Globally(f)
            | Formula::Once(f)
            | Formula::Historically(f)
            | Formula::WeakYesterday(f) => 1 + f.size(),
            Formula::Or(l, r)
            | Formula::And(l, r)
            | Formula::Until(l, r)
            | Formula::Since(l, r)
            | Formula::Release(l, r) => 1 + l.size() + r.size(),
            Formula::Bounded { arg, .. } | Formula::Power { arg, .. } => 1 + arg.size(),
        }
    }
}

// Printing. Binding strength, ascending: `|`, `&`, the binary temporal
// operators (right-associative), unary operators, comparisons, `+`/`-`, `*`,
// postfix term operators. Implication is not reconstructed.

const PREC_OR: u8 = 1;
const PREC_AND: u8 = 2;
const PREC_BIN_TEMPORAL: u8 = 3;
const PREC_UNARY: u8 = 4;

const TPREC_ADD: u8 = 1;
const TPREC_MUL: u8 = 2;
const TPREC_POSTFIX: u8 = 3;

impl Formula {
    fn prec(&self) -> u8 {
        match self {
            Formula::Or(..) => PREC_OR,
            Formula::And(..) => PREC_AND,
            Formula::Until(..) | Formula::Since(..) | Formula::Release(..) => {
                PREC_BIN_TEMPORAL
            }
            Formula::Not(_)
            | Formula::Next(_)
            | Formula::Yesterday(_)
            | Formula::Finally(_)
            | Formula::Globally(_)
            | Formula::Once(_)
            | Formula::Historically(_)
            | Formula::WeakYesterday(_)
            | Formula::Bounded { .. }
            | Formula::Power { .. } => PREC_UNARY,
            _ => u8::MAX,
        }
    }

    fn binary_symbol(&self) -> &'static str {
        match self {
            Formula::Or(..) => "|",
            Formula::And(..) => "&",
            Formula::Until(..) => "U",
            Formula::Since(..) => "S",
            Formula::Release(..) => "R",
            _ => unreachable!(),
        }
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        let prec = self.prec();
        let parens = prec < min;
        if parens {
            write!(f, "(")?;
        }
        match self {
            Formula::True => write!(f, "true")?,
            Formula::False => write!(f, "false")?,
            Formula::Atom(t) => t.fmt_prec(f, 0)?,
            Formula::Cmp { op, lhs, rhs } => {
                lhs.fmt_prec(f, 0)?;
                let sym = match op {
                    CmpOp::Eq => "=",
                    CmpOp::Ne => "!=",
                    CmpOp::Lt => "<",
                    CmpOp::Le => "<=",
                    CmpOp::Gt => ">",
                    CmpOp::Ge => ">=",
                };
                write!(f, " {sym} ")?;
                rhs.fmt_prec(f, 0)?;
            }
            Formula::Or(l, r) | Formula::And(l, r) => {
                // Associative: same-operator children print flat.
                l.fmt_same_op_or(f, self, prec)?;
                write!(f, " {} ", self.binary_symbol())?;
                r.fmt_same_op_or(f, self, prec)?;
            }
            Formula::Until(l, r) | Formula::Since(l, r) | Formula::Release(l, r) => {
                // Right-associative; left child at the same level needs parens,
                // and differing operators at the same level always do.
                l.fmt_prec(f, prec + 1)?;
                write!(f, " {} ", self.binary_symbol())?;
                if matches!(
                    (self, r.as_ref()),
                    (Formula::Until(..), Formula::Until(..))
                        | (Formula::Since(..), Formula::Since(..))
                        | (Formula::Release(..), Formula::Release(..))
                ) {
                    r.fmt_prec(f, prec)?;
                } else {
                    r.fmt_prec(f, prec + 1)?;
                }
            }
            Formula::Not(g) => {
                write!(f, "!")?;
                g.fmt_prec(f, PREC_UNARY)?;
            }
            Formula::Next(g)
            | Formula::Yesterday(g)
            | Formula::Finally(g)
            | Formula::Globally(g)
            | Formula::Once(g)
            | Formula::Historically(g)
            | Formula::WeakYesterday(g) => {
                let sym = match self {
                    Formula::Next(_) => "X",
                    Formula::Yesterday(_) => "Y",
                    Formula::Finally(_) => "F",
                    Formula::Globally(_) => "G",
                    Formula::Once(_) => "O",
                    Formula::Historically(_) => "H",
                    Formula::WeakYesterday(_) => "Z",
                    _ => unreachable!(),
                };
                write!(f, "{sym} ")?;
                g.fmt_prec(f, PREC_UNARY)?;
            }
            Formula::Bounded { op, n, arg } => {
                let sym = match op {
                    BoundedOp::Finally => "F",
                    BoundedOp::Globally => "G",
                    BoundedOp::Once => "O",
                    BoundedOp::Historically => "H",
                };
                write!(f, "{sym}<={n} ")?;
                arg.fmt_prec(f, PREC_UNARY)?;
            }
            Formula::Power { op, n, arg } => {
                let sym = match op {
                    PowerOp::Next => "X",
                    PowerOp::Yesterday => "Y",
                    PowerOp::WeakYesterday => "Z",
                };
                write!(f, "{sym}^{n} ")?;
                arg.fmt_prec(f, PREC_UNARY)?;
            }
        }
        if parens {
            write!(f, ")")?;
        }
        Ok(())
    }

    fn fmt_same_op_or(
        &self,
        f: &mut fmt::Formatter<'_>,
        parent: &Formula,
        parent_prec: u8,
    ) -> fmt::Result {
        let same = matches!(
            (parent, self),
            (Formula::Or(..), Formula::Or(..)) | (Formula::And(..), Formula::And(..))
        );
        if same {
            self.fmt_prec(f, parent_prec)
        } else {
            self.fmt_prec(f, parent_prec + 1)
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}

impl Term {
    fn prec(&self) -> u8 {
        match self {
            Term::App { op: FuncOp::Add | FuncOp::Sub, .. } => TPREC_ADD,
            Term::App { op: FuncOp::Mul, .. } => TPREC_MUL,
            Term::AtNext { .. } | Term::AtLast { .. } => TPREC_POSTFIX,
            _ => u8::MAX,
        }
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        let prec = self.prec();
        let parens = prec < min;
        if parens {
            write!(f, "(")?;
        }
        match self {
            Term::Const { value, .. } => write!(f, "{value}")?,
            Term::Var(v) => write!(f, "{}", v.name)?,
            Term::App { op, lhs, rhs } => {
                let sym = match op {
                    FuncOp::Add => "+",
                    FuncOp::Sub => "-",
                    FuncOp::Mul => "*",
                };
                lhs.fmt_prec(f, prec)?;
                write!(f, " {sym} ")?;
                rhs.fmt_prec(f, prec + 1)?;
            }
            Term::Next { arg, .. } => {
                if let Term::Var(v) = arg.as_ref() {
                    write!(f, "{}'", v.name)?;
                } else {
                    write!(f, "next(")?;
                    arg.fmt_prec(f, 0)?;
                    write!(f, ")")?;
                }
            }
            Term::AtNext { arg, cond, .. } | Term::AtLast { arg, cond, .. } => {
                let sym = if matches!(self, Term::AtNext { .. }) { "@F" } else { "@P" };
                arg.fmt_prec(f, TPREC_POSTFIX)?;
                write!(f, " {sym} ({cond})")?;
            }
            Term::Ite { cond, then_t, else_t, .. } => {
                write!(f, "ite({cond}, ")?;
                then_t.fmt_prec(f, 0)?;
                write!(f, ", ")?;
                else_t.fmt_prec(f, 0)?;
                write!(f, ")")?;
            }
        }
        if parens {
            write!(f, ")")?;
        }
        Ok(())
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}
