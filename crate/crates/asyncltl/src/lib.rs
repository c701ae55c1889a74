//! Linear temporal logic with truncated semantics over finite and lasso
//! traces, stutter rewritings, and asynchronous composition of interface
//! transition systems.
//!
//! The crate provides:
//!
//! - a formula and term language with input/output variables, `next`,
//!   event-triggered reads (`@F`, `@P`), and conditional terms (`ite`),
//! - weak/strong truncated evaluation on finite traces and standard
//!   evaluation on lasso traces,
//! - four formula rewritings connecting a component's local view to the
//!   scheduled global view: tail extension (`tr`), weakness-to-safety
//!   (`w2s`), the base and stutter-optimized global rewritings, and the
//!   fairness rewriting,
//! - asynchronous composition of interface transition systems with
//!   projection and embedding between local and global traces,
//! - a bounded verification pipeline and a brute-force oracle harness that
//!   mechanically checks the underlying theorems at desk scale.

pub mod classify;
pub mod cli;
pub mod eval;
pub mod harness;
pub mod its;
pub mod lasso;
pub mod norm;
pub mod parser;
pub mod rewrite;
pub mod sort;
pub mod spec;
pub mod syntax;
pub mod trace;

pub use syntax::{
    BoundedOp, CmpOp, Formula, FormulaRef, FuncOp, IoClass, PowerOp, SortError, Term,
    TermRef, VarInfo,
};

pub use sort::{Sort, Value};

pub use parser::{is_reserved, parse_formula, parse_term, ParseError, Scope};

pub use spec::{ComponentDef, SpecError, SpecMode, SystemDef, SystemSpec};

pub use rewrite::{
    extend_with_tail, gamma_p, psi_cond_property, psi_cond_step, rewrite_base,
    rewrite_base_top, rewrite_fair, rewrite_fair_top, rewrite_opt, rewrite_opt_top,
    top_rewrite, tr_rewrite, tr_top, w2s, ComponentInterface, ComponentSymbols, GammaOutput,
    RewriteError, RewriteMode, RewriteWarning, RewriterKind,
};

pub use its::{
    bounded_check, bounded_entailment, certify_projection, check_membership, compatible,
    compose, enumerate_traces, is_trace_of, CertifyOutcome, ComposedComponent, ComposedIts,
    EnumBounds, EnumOptions, Its, ItsError, MembershipVerdict, Verdict, DEFAULT_STATE_CAP,
    STATE_CAP_ENV,
};

pub use harness::{
    check_base_rewrite_with, check_theorem, check_theorem_named, enumerate_formulas,
    replay_case, shrink, witness_fails, CaseOutcome, EquivalenceReport, HarnessError,
    Mismatch, SuiteConfig, TailKind, Theorem, Witness,
};
