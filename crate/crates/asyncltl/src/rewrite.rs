//! Formula rewritings between local and global views, the tail encoding
//! that reduces truncated semantics to standard LTL, and the weak-to-safety
//! translation.
//!
//! A local property speaks about one component's own trace. Inside a
//! composed system the component moves only when its scheduling flag `run`
//! holds, so the property must be re-targeted at the global trace. Three
//! rewritings do this with different trade-offs: [`rewrite_base_top`] works
//! on any formula, [`rewrite_opt_top`] exploits syntactic stutter tolerance
//! to emit smaller formulas, and [`rewrite_fair_top`] additionally assumes
//! the component is scheduled infinitely often.
//!
//! Independently, [`tr_rewrite`] turns a truncated-semantics question on a
//! finite trace into a standard LTL question on an infinite extension of the
//! trace marked by a fresh `Tail` variable, and [`w2s`] maps weak
//! satisfaction into the safety fragment by replacing until with release.

use std::sync::Arc;

use crate::classify::{
    is_stutter_tolerant_term, is_syntactically_stutter_tolerant, predicate_class, PredClass,
};
use crate::eval::Polarity;
use crate::norm::{desugar, formula_vars};
use crate::sort::Value;
use crate::syntax::{Formula, FormulaRef, IoClass, Term, TermRef, VarInfo};
use crate::trace::{FiniteTrace, LassoTrace, TraceError, Vocab};

/// Errors from the rewriting front ends.
#[derive(Debug, thiserror::Error)]
pub enum RewriteError {
    #[error("{rewriting} does not support {construct}")]
    UnsupportedConstruct { rewriting: &'static str, construct: String },
    #[error("formula already mentions the reserved symbol {name}")]
    SymbolCollision { name: String },
}

/// Which rewriting a front end applies to local properties.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RewriteMode {
    Base,
    Optimized,
    Fairness,
}

/// Selects the shipped rewriting or a deliberately broken variant, used to
/// confirm that the differential harness detects an injected defect.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RewriterKind {
    Correct,
    /// Drops the end-of-trace disjunct from the weak until clause.
    MutantDropYEnd,
}

/// The scheduling symbols of one component: the `run` flag input (the
/// scheduler grants a step now) and the `end` prophecy output (the
/// component never runs again).
#[derive(Debug, Clone)]
pub struct ComponentSymbols {
    pub run: Arc<VarInfo>,
    pub end: Arc<VarInfo>,
}

impl ComponentSymbols {
    pub fn new(run: &str, end: &str) -> ComponentSymbols {
        ComponentSymbols {
            run: VarInfo::bool_input(run),
            end: VarInfo::bool_output(end),
        }
    }

    /// The composition's naming convention: `run_<name>` and `end_<name>`.
    pub fn for_component(name: &str) -> ComponentSymbols {
        ComponentSymbols::new(&format!("run_{name}"), &format!("end_{name}"))
    }

    pub fn run_atom(&self) -> FormulaRef {
        Formula::var(self.run.clone())
    }

    pub fn end_atom(&self) -> FormulaRef {
        Formula::var(self.end.clone())
    }

    /// The derived signal marking positions that carry a local-trace sample:
    /// the component runs now, or it ran at the previous position and never
    /// runs again, which marks the position holding the final output-only
    /// assignment of a finite local trace.
    pub fn state(&self) -> FormulaRef {
        Formula::or(
            self.run_atom(),
            Formula::and(Formula::weak_yesterday(self.run_atom()), self.end_atom()),
        )
    }

    fn check_fresh(&self, f: &FormulaRef) -> Result<(), RewriteError> {
        let vars = formula_vars(f);
        for name in [&self.run.name, &self.end.name] {
            if vars.contains_key(name.as_ref()) {
                return Err(RewriteError::SymbolCollision { name: name.to_string() });
            }
        }
        Ok(())
    }
}

fn op_name(f: &Formula) -> &'static str {
    match f {
        Formula::True | Formula::False => "a constant",
        Formula::Atom(_) | Formula::Cmp { .. } => "a predicate",
        Formula::Not(_) => "negation",
        Formula::Or(..) => "disjunction",
        Formula::And(..) => "conjunction",
        Formula::Next(_) => "next",
        Formula::Until(..) => "until",
        Formula::Release(..) => "release",
        Formula::Finally(_) => "finally",
        Formula::Globally(_) => "globally",
        Formula::Yesterday(_) => "yesterday",
        Formula::WeakYesterday(_) => "weak yesterday",
        Formula::Since(..) => "since",
        Formula::Once(_) => "once",
        Formula::Historically(_) => "historically",
        Formula::Bounded { .. } => "a bounded operator",
        Formula::Power { .. } => "an iterated step operator",
    }
}

/// Rejects terms whose sorts do not line up, so the rewriting cores can rely
/// on every conditional carrying a usable default.
fn check_sorted(f: &FormulaRef, rewriting: &'static str) -> Result<(), RewriteError> {
    fn term(t: &TermRef, rewriting: &'static str) -> Result<(), RewriteError> {
        t.sort().map(|_| ()).map_err(|e| RewriteError::UnsupportedConstruct {
            rewriting,
            construct: format!("the ill-sorted term `{t}` ({e})"),
        })
    }
    match f.as_ref() {
        Formula::True | Formula::False => Ok(()),
        Formula::Atom(t) => term(t, rewriting),
        Formula::Cmp { lhs, rhs, .. } => {
            term(lhs, rewriting)?;
            term(rhs, rewriting)
        }
        Formula::Not(g)
        | Formula::Next(g)
        | Formula::Yesterday(g)
        | Formula::Finally(g)
        | Formula::Globally(g)
        | Formula::Once(g)
        | Formula::Historically(g)
        | Formula::WeakYesterday(g)
        | Formula::Bounded { arg: g, .. }
        | Formula::Power { arg: g, .. } => check_sorted(g, rewriting),
        Formula::Or(l, r)
        | Formula::And(l, r)
        | Formula::Until(l, r)
        | Formula::Since(l, r)
        | Formula::Release(l, r) => {
            check_sorted(l, rewriting)?;
            check_sorted(r, rewriting)
        }
    }
}

fn guard_pred(
    pred: FormulaRef,
    class: PredClass,
    pol: Polarity,
    cs: &ComponentSymbols,
) -> FormulaRef {
    match (class, pol) {
        (PredClass::Output, _) => pred,
        (PredClass::Input, Polarity::Weak) => Formula::or(Formula::not(cs.run_atom()), pred),
        (PredClass::Input, Polarity::Strong) => Formula::and(cs.run_atom(), pred),
    }
}

// The base rewriting. Predicates over inputs are guarded by `run`, future
// operators step from one `state` sample to the next, past operators step
// backwards over `run` samples, and terms that cross states are re-targeted
// with `@F`/`@P` reads conditioned on `state`.

fn r_base(f: &FormulaRef, pol: Polarity, cs: &ComponentSymbols, kind: RewriterKind) -> FormulaRef {
    match f.as_ref() {
        Formula::True => Formula::tt(),
        Formula::False => Formula::ff(),
        Formula::Atom(t) => {
            let class = predicate_class(f);
            guard_pred(Formula::atom(r_base_term(t, cs, kind)), class, pol, cs)
        }
        Formula::Cmp { op, lhs, rhs } => {
            let class = predicate_class(f);
            let pred =
                Formula::cmp(*op, r_base_term(lhs, cs, kind), r_base_term(rhs, cs, kind));
            guard_pred(pred, class, pol, cs)
        }
        Formula::Not(g) => Formula::not(r_base(g, pol.flip(), cs, kind)),
        Formula::Or(l, r) => {
            Formula::or(r_base(l, pol, cs, kind), r_base(r, pol, cs, kind))
        }
        Formula::And(l, r) => {
            Formula::and(r_base(l, pol, cs, kind), r_base(r, pol, cs, kind))
        }
        Formula::Next(g) => {
            let inner = r_base(g, pol, cs, kind);
            Formula::next(sample_shift(inner, pol, cs))
        }
        Formula::Until(l, r) => {
            let hold = Formula::or(Formula::not(cs.state()), r_base(l, pol, cs, kind));
            let hit = Formula::and(cs.state(), r_base(r, pol, cs, kind));
            let hit = match (pol, kind) {
                (Polarity::Weak, RewriterKind::Correct) => {
                    Formula::or(hit, Formula::yesterday(cs.end_atom()))
                }
                _ => hit,
            };
            Formula::until(hold, hit)
        }
        Formula::Yesterday(g) => {
            let inner = r_base(g, pol, cs, kind);
            Formula::yesterday(Formula::since(
                Formula::not(cs.run_atom()),
                Formula::and(cs.run_atom(), inner),
            ))
        }
        Formula::Since(l, r) => Formula::since(
            Formula::or(Formula::not(cs.state()), r_base(l, pol, cs, kind)),
            Formula::and(cs.state(), r_base(r, pol, cs, kind)),
        ),
        _ => unreachable!("rewriting cores receive desugared formulas"),
    }
}

/// Relocates a rewritten subformula from an arbitrary global position to the
/// nearest `state` sample at or after it.
fn sample_shift(inner: FormulaRef, pol: Polarity, cs: &ComponentSymbols) -> FormulaRef {
    match pol {
        Polarity::Weak => Formula::release(
            cs.state(),
            Formula::or(Formula::not(cs.state()), inner),
        ),
        Polarity::Strong => Formula::until(
            Formula::not(cs.state()),
            Formula::and(cs.state(), inner),
        ),
    }
}

fn r_base_term(t: &TermRef, cs: &ComponentSymbols, kind: RewriterKind) -> TermRef {
    match t.as_ref() {
        Term::Const { .. } | Term::Var(_) => t.clone(),
        Term::App { op, lhs, rhs } => {
            Term::app(*op, r_base_term(lhs, cs, kind), r_base_term(rhs, cs, kind))
        }
        Term::Next { arg, default } => {
            Term::at_next(r_base_term(arg, cs, kind), cs.state(), default.clone())
        }
        Term::AtNext { arg, cond, default } => Term::at_next(
            r_base_term(arg, cs, kind),
            Formula::and(cs.state(), r_base(cond, Polarity::Strong, cs, kind)),
            default.clone(),
        ),
        Term::AtLast { arg, cond, default } => Term::at_last(
            r_base_term(arg, cs, kind),
            Formula::and(cs.state(), r_base(cond, Polarity::Strong, cs, kind)),
            default.clone(),
        ),
        Term::Ite { cond, then_t, else_t, default } => {
            let keep = t.effective_default().expect("checked terms carry a default");
            let sort = t.sort().expect("rewritten terms are sort-checked up front");
            let inner = Term::ite(
                Formula::not(r_base(cond, Polarity::Weak, cs, kind)),
                r_base_term(else_t, cs, kind),
                Term::constant(keep, sort),
                default.clone(),
            );
            Term::ite(
                r_base(cond, Polarity::Strong, cs, kind),
                r_base_term(then_t, cs, kind),
                inner,
                default.clone(),
            )
        }
    }
}

/// Rewrites a local property for evaluation on the global trace under the
/// given polarity, with input predicates guarded by `run` and temporal steps
/// relocated to `state` samples.
pub fn rewrite_base(
    f: &FormulaRef,
    pol: Polarity,
    cs: &ComponentSymbols,
) -> Result<FormulaRef, RewriteError> {
    rewrite_base_with(f, pol, cs, RewriterKind::Correct)
}

/// [`rewrite_base`] with an explicit rewriter variant.
pub fn rewrite_base_with(
    f: &FormulaRef,
    pol: Polarity,
    cs: &ComponentSymbols,
    kind: RewriterKind,
) -> Result<FormulaRef, RewriteError> {
    cs.check_fresh(f)?;
    check_sorted(f, "the global embedding rewriting")?;
    Ok(r_base(&desugar(f), pol, cs, kind))
}

fn wrap_top(body: FormulaRef, cs: &ComponentSymbols) -> FormulaRef {
    Formula::release(cs.state(), Formula::or(Formula::not(cs.state()), body))
}

/// Top-level base rewriting: the weak rewrite relocated to the first
/// `state` sample, so the result can be evaluated from global position zero.
pub fn rewrite_base_top(
    f: &FormulaRef,
    cs: &ComponentSymbols,
) -> Result<FormulaRef, RewriteError> {
    rewrite_base_top_with(f, cs, RewriterKind::Correct)
}

/// [`rewrite_base_top`] with an explicit rewriter variant.
pub fn rewrite_base_top_with(
    f: &FormulaRef,
    cs: &ComponentSymbols,
    kind: RewriterKind,
) -> Result<FormulaRef, RewriteError> {
    Ok(wrap_top(rewrite_base_with(f, Polarity::Weak, cs, kind)?, cs))
}

// The stutter-optimized rewriting. Where a subformula is syntactically
// stutter tolerant its rewritten form keeps its value across non-sample
// positions, so the relocation machinery shrinks to `end` guards; all other
// cases fall back to the base clauses, recursing through the optimized
// rewriting.

fn r_opt(f: &FormulaRef, pol: Polarity, cs: &ComponentSymbols) -> FormulaRef {
    match f.as_ref() {
        Formula::True => Formula::tt(),
        Formula::False => Formula::ff(),
        Formula::Atom(t) => {
            let class = predicate_class(f);
            guard_pred(Formula::atom(r_opt_term(t, pol, cs)), class, pol, cs)
        }
        Formula::Cmp { op, lhs, rhs } => {
            let class = predicate_class(f);
            let pred = Formula::cmp(*op, r_opt_term(lhs, pol, cs), r_opt_term(rhs, pol, cs));
            guard_pred(pred, class, pol, cs)
        }
        Formula::Not(g) => Formula::not(r_opt(g, pol.flip(), cs)),
        Formula::Or(l, r) => Formula::or(r_opt(l, pol, cs), r_opt(r, pol, cs)),
        Formula::And(l, r) => Formula::and(r_opt(l, pol, cs), r_opt(r, pol, cs)),
        Formula::Next(g) => {
            let inner = r_opt(g, pol, cs);
            if is_syntactically_stutter_tolerant(g) {
                match pol {
                    Polarity::Weak => Formula::or(cs.end_atom(), Formula::next(inner)),
                    Polarity::Strong => {
                        Formula::and(Formula::not(cs.end_atom()), Formula::next(inner))
                    }
                }
            } else {
                Formula::next(sample_shift(inner, pol, cs))
            }
        }
        Formula::Until(l, r) => {
            let rl = r_opt(l, pol, cs);
            let rr = r_opt(r, pol, cs);
            if is_syntactically_stutter_tolerant(l) && is_syntactically_stutter_tolerant(r) {
                let hit = match pol {
                    Polarity::Weak => Formula::or(Formula::yesterday(cs.end_atom()), rr),
                    Polarity::Strong => {
                        Formula::and(Formula::not(Formula::yesterday(cs.end_atom())), rr)
                    }
                };
                Formula::until(rl, hit)
            } else {
                let hold = Formula::or(Formula::not(cs.state()), rl);
                let hit = Formula::and(cs.state(), rr);
                let hit = match pol {
                    Polarity::Weak => Formula::or(hit, Formula::yesterday(cs.end_atom())),
                    Polarity::Strong => hit,
                };
                Formula::until(hold, hit)
            }
        }
        Formula::Yesterday(g) => Formula::yesterday(Formula::since(
            Formula::not(cs.run_atom()),
            Formula::and(cs.run_atom(), r_opt(g, pol, cs)),
        )),
        Formula::Since(l, r) => Formula::since(
            Formula::or(Formula::not(cs.state()), r_opt(l, pol, cs)),
            Formula::and(cs.state(), r_opt(r, pol, cs)),
        ),
        _ => unreachable!("rewriting cores receive desugared formulas"),
    }
}

fn r_opt_term(t: &TermRef, pol: Polarity, cs: &ComponentSymbols) -> TermRef {
    match t.as_ref() {
        Term::Const { .. } | Term::Var(_) => t.clone(),
        Term::App { op, lhs, rhs } => {
            Term::app(*op, r_opt_term(lhs, pol, cs), r_opt_term(rhs, pol, cs))
        }
        Term::Next { arg, default } => {
            // The relaxed read may land on a stuttering position, so it is
            // only safe when the payload evaluates the same there as at the
            // next genuine sample. Positions after the final sample are
            // marked by Y end and must stay unreadable.
            let cond = if is_stutter_tolerant_term(arg) {
                Formula::not(Formula::yesterday(cs.end_atom()))
            } else {
                cs.state()
            };
            Term::at_next(r_opt_term(arg, pol, cs), cond, default.clone())
        }
        Term::AtNext { arg, cond, default } => {
            let cond = if is_syntactically_stutter_tolerant(cond) && is_stutter_tolerant_term(arg)
            {
                Formula::and(
                    r_opt(cond, pol, cs),
                    Formula::not(Formula::yesterday(cs.end_atom())),
                )
            } else {
                Formula::and(cs.state(), r_opt(cond, Polarity::Strong, cs))
            };
            Term::at_next(r_opt_term(arg, pol, cs), cond, default.clone())
        }
        Term::AtLast { arg, cond, default } => Term::at_last(
            r_opt_term(arg, pol, cs),
            Formula::and(cs.state(), r_opt(cond, Polarity::Strong, cs)),
            default.clone(),
        ),
        Term::Ite { cond, then_t, else_t, default } => {
            let keep = t.effective_default().expect("checked terms carry a default");
            let sort = t.sort().expect("rewritten terms are sort-checked up front");
            let inner = Term::ite(
                Formula::not(r_opt(cond, Polarity::Weak, cs)),
                r_opt_term(else_t, Polarity::Weak, cs),
                Term::constant(keep, sort),
                default.clone(),
            );
            Term::ite(
                r_opt(cond, Polarity::Strong, cs),
                r_opt_term(then_t, Polarity::Weak, cs),
                inner,
                default.clone(),
            )
        }
    }
}

/// Stutter-optimized rewriting of a local property under the given polarity.
pub fn rewrite_opt(
    f: &FormulaRef,
    pol: Polarity,
    cs: &ComponentSymbols,
) -> Result<FormulaRef, RewriteError> {
    cs.check_fresh(f)?;
    check_sorted(f, "the stutter-optimized rewriting")?;
    Ok(r_opt(&desugar(f), pol, cs))
}

/// Top-level optimized rewriting: stutter-tolerant roots need no relocation
/// wrapper at all.
pub fn rewrite_opt_top(
    f: &FormulaRef,
    cs: &ComponentSymbols,
) -> Result<FormulaRef, RewriteError> {
    cs.check_fresh(f)?;
    check_sorted(f, "the stutter-optimized rewriting")?;
    let d = desugar(f);
    let body = r_opt(&d, Polarity::Weak, cs);
    if is_syntactically_stutter_tolerant(&d) {
        Ok(body)
    } else {
        Ok(wrap_top(body, cs))
    }
}

// The fairness rewriting. Assuming the component runs infinitely often, the
// local trace is infinite: weak and strong collapse, `end` never holds, and
// `state` coincides with `run`, so predicates need no guards and `next`
// terms survive unchanged.

fn r_fair(f: &FormulaRef, cs: &ComponentSymbols) -> FormulaRef {
    match f.as_ref() {
        Formula::True => Formula::tt(),
        Formula::False => Formula::ff(),
        Formula::Atom(t) => Formula::atom(r_fair_term(t, cs)),
        Formula::Cmp { op, lhs, rhs } => {
            Formula::cmp(*op, r_fair_term(lhs, cs), r_fair_term(rhs, cs))
        }
        Formula::Not(g) => Formula::not(r_fair(g, cs)),
        Formula::Or(l, r) => Formula::or(r_fair(l, cs), r_fair(r, cs)),
        Formula::And(l, r) => Formula::and(r_fair(l, cs), r_fair(r, cs)),
        Formula::Next(g) => {
            let inner = r_fair(g, cs);
            if is_syntactically_stutter_tolerant(g) {
                Formula::next(inner)
            } else {
                Formula::next(Formula::release(
                    cs.run_atom(),
                    Formula::or(Formula::not(cs.run_atom()), inner),
                ))
            }
        }
        Formula::Until(l, r) => {
            let rl = r_fair(l, cs);
            let rr = r_fair(r, cs);
            if is_syntactically_stutter_tolerant(l) && is_syntactically_stutter_tolerant(r) {
                Formula::until(rl, rr)
            } else {
                Formula::until(
                    Formula::or(Formula::not(cs.run_atom()), rl),
                    Formula::and(cs.run_atom(), rr),
                )
            }
        }
        Formula::Yesterday(g) => Formula::yesterday(Formula::since(
            Formula::not(cs.run_atom()),
            Formula::and(cs.run_atom(), r_fair(g, cs)),
        )),
        Formula::Since(l, r) => {
            let rl = r_fair(l, cs);
            let rr = r_fair(r, cs);
            if is_syntactically_stutter_tolerant(l) && is_syntactically_stutter_tolerant(r) {
                Formula::since(rl, rr)
            } else {
                Formula::since(
                    Formula::or(Formula::not(cs.run_atom()), rl),
                    Formula::and(cs.run_atom(), rr),
                )
            }
        }
        _ => unreachable!("rewriting cores receive desugared formulas"),
    }
}

fn r_fair_term(t: &TermRef, cs: &ComponentSymbols) -> TermRef {
    match t.as_ref() {
        Term::Const { .. } | Term::Var(_) => t.clone(),
        Term::App { op, lhs, rhs } => {
            Term::app(*op, r_fair_term(lhs, cs), r_fair_term(rhs, cs))
        }
        Term::Next { arg, default } => Term::next(r_fair_term(arg, cs), default.clone()),
        Term::AtNext { arg, cond, default } => {
            let cond = if is_syntactically_stutter_tolerant(cond) {
                r_fair(cond, cs)
            } else {
                Formula::and(cs.run_atom(), r_fair(cond, cs))
            };
            Term::at_next(r_fair_term(arg, cs), cond, default.clone())
        }
        Term::AtLast { arg, cond, default } => Term::at_last(
            r_fair_term(arg, cs),
            Formula::and(cs.run_atom(), r_fair(cond, cs)),
            default.clone(),
        ),
        Term::Ite { cond, then_t, else_t, default } => Term::ite(
            r_fair(cond, cs),
            r_fair_term(then_t, cs),
            r_fair_term(else_t, cs),
            default.clone(),
        ),
    }
}

/// Fairness rewriting of a local property; polarity-free because the
/// assumed-infinite local trace collapses weak and strong.
pub fn rewrite_fair(f: &FormulaRef, cs: &ComponentSymbols) -> Result<FormulaRef, RewriteError> {
    cs.check_fresh(f)?;
    check_sorted(f, "the fairness rewriting")?;
    Ok(r_fair(&desugar(f), cs))
}

/// Top-level fairness rewriting.
pub fn rewrite_fair_top(
    f: &FormulaRef,
    cs: &ComponentSymbols,
) -> Result<FormulaRef, RewriteError> {
    cs.check_fresh(f)?;
    check_sorted(f, "the fairness rewriting")?;
    let d = desugar(f);
    let body = r_fair(&d, cs);
    if is_syntactically_stutter_tolerant(&d) {
        Ok(body)
    } else {
        Ok(Formula::release(
            cs.run_atom(),
            Formula::or(Formula::not(cs.run_atom()), body),
        ))
    }
}

/// Applies the top-level rewriting selected by `mode`.
pub fn top_rewrite(
    f: &FormulaRef,
    mode: RewriteMode,
    cs: &ComponentSymbols,
) -> Result<FormulaRef, RewriteError> {
    match mode {
        RewriteMode::Base => rewrite_base_top(f, cs),
        RewriteMode::Optimized => rewrite_opt_top(f, cs),
        RewriteMode::Fairness => rewrite_fair_top(f, cs),
    }
}

// The tail encoding. A finite trace is extended to an infinite one whose
// marker output `Tail` becomes true at the final position and stays true,
// with outputs frozen from there on and inputs arbitrary; the rewriting
// guards input predicates and `next` steps by the marker so that standard
// LTL on the extension agrees with truncated semantics on the original.

const TR_NAME: &str = "the tail encoding";

/// The reserved marker output used by the tail encoding.
pub fn tail_var() -> Arc<VarInfo> {
    VarInfo::bool_output("Tail")
}

fn tail_atom() -> FormulaRef {
    Formula::var(tail_var())
}

/// Rewrites a formula for standard LTL evaluation on a tail extension of the
/// original finite trace.
pub fn tr_rewrite(f: &FormulaRef, pol: Polarity) -> Result<FormulaRef, RewriteError> {
    if formula_vars(f).contains_key(tail_var().name.as_ref()) {
        return Err(RewriteError::SymbolCollision { name: tail_var().name.to_string() });
    }
    tr_rec(&desugar(f), pol)
}

fn tr_rec(f: &FormulaRef, pol: Polarity) -> Result<FormulaRef, RewriteError> {
    match f.as_ref() {
        Formula::True => Ok(Formula::tt()),
        Formula::False => Ok(Formula::ff()),
        Formula::Atom(t) => {
            tr_check_term(t)?;
            Ok(tr_guard(f.clone(), pol))
        }
        Formula::Cmp { lhs, rhs, .. } => {
            tr_check_term(lhs)?;
            tr_check_term(rhs)?;
            Ok(tr_guard(f.clone(), pol))
        }
        Formula::Not(g) => Ok(Formula::not(tr_rec(g, pol.flip())?)),
        Formula::Or(l, r) => Ok(Formula::or(tr_rec(l, pol)?, tr_rec(r, pol)?)),
        Formula::And(l, r) => Ok(Formula::and(tr_rec(l, pol)?, tr_rec(r, pol)?)),
        Formula::Next(g) => {
            let step = Formula::next(tr_rec(g, pol)?);
            Ok(match pol {
                Polarity::Weak => Formula::or(tail_atom(), step),
                Polarity::Strong => Formula::and(Formula::not(tail_atom()), step),
            })
        }
        Formula::Until(l, r) => {
            let l2 = tr_rec(l, pol)?;
            let r2 = tr_rec(r, pol)?;
            Ok(match pol {
                // A weak until may discharge at the virtual position past
                // the end with nothing demanded of the right side, provided
                // the left side stayed weakly true through the final
                // position; on the extension that frontier is the first
                // marked position.
                Polarity::Weak => Formula::until(
                    l2.clone(),
                    Formula::or(r2, Formula::and(tail_atom(), l2)),
                ),
                Polarity::Strong => Formula::until(l2, r2),
            })
        }
        Formula::Yesterday(_) | Formula::Since(_, _) => {
            Err(RewriteError::UnsupportedConstruct {
                rewriting: TR_NAME,
                construct: "past operators".to_string(),
            })
        }
        _ => unreachable!("rewriting cores receive desugared formulas"),
    }
}

fn tr_guard(pred: FormulaRef, pol: Polarity) -> FormulaRef {
    match (predicate_class(&pred), pol) {
        (PredClass::Output, _) => pred,
        (PredClass::Input, Polarity::Weak) => Formula::or(tail_atom(), pred),
        (PredClass::Input, Polarity::Strong) => Formula::and(Formula::not(tail_atom()), pred),
    }
}

/// The tail extension freezes outputs past the original final position, so
/// the only state-crossing reads that survive are single steps into frozen
/// output territory; everything else would see values the original trace
/// never determined.
fn tr_check_term(t: &TermRef) -> Result<(), RewriteError> {
    let reject = |construct: &str| -> Result<(), RewriteError> {
        Err(RewriteError::UnsupportedConstruct {
            rewriting: TR_NAME,
            construct: construct.to_string(),
        })
    };
    match t.as_ref() {
        Term::Const { .. } | Term::Var(_) => Ok(()),
        Term::App { lhs, rhs, .. } => {
            tr_check_term(lhs)?;
            tr_check_term(rhs)
        }
        Term::Next { arg, .. } => {
            if is_present_output_term(arg) {
                Ok(())
            } else {
                reject("next over anything but present output-only terms")
            }
        }
        Term::AtNext { .. } => reject("at-next terms"),
        Term::AtLast { .. } => reject("at-last terms"),
        Term::Ite { cond, then_t, else_t, .. } => {
            if !is_present_formula(cond) {
                return reject("conditionals with temporal or state-crossing conditions");
            }
            tr_check_term(then_t)?;
            tr_check_term(else_t)
        }
    }
}

fn is_present_output_term(t: &TermRef) -> bool {
    match t.as_ref() {
        Term::Const { .. } => true,
        Term::Var(v) => v.io == IoClass::Output,
        Term::App { lhs, rhs, .. } => {
            is_present_output_term(lhs) && is_present_output_term(rhs)
        }
        Term::Next { .. } | Term::AtNext { .. } | Term::AtLast { .. } => false,
        Term::Ite { cond, then_t, else_t, .. } => {
            is_present_output_formula(cond)
                && is_present_output_term(then_t)
                && is_present_output_term(else_t)
        }
    }
}

fn is_present_output_formula(f: &FormulaRef) -> bool {
    match f.as_ref() {
        Formula::True | Formula::False => true,
        Formula::Atom(t) => is_present_output_term(t),
        Formula::Cmp { lhs, rhs, .. } => {
            is_present_output_term(lhs) && is_present_output_term(rhs)
        }
        Formula::Not(g) => is_present_output_formula(g),
        Formula::Or(l, r) | Formula::And(l, r) => {
            is_present_output_formula(l) && is_present_output_formula(r)
        }
        _ => false,
    }
}

fn is_present_term(t: &TermRef) -> bool {
    match t.as_ref() {
        Term::Const { .. } | Term::Var(_) => true,
        Term::App { lhs, rhs, .. } => is_present_term(lhs) && is_present_term(rhs),
        Term::Next { .. } | Term::AtNext { .. } | Term::AtLast { .. } => false,
        Term::Ite { cond, then_t, else_t, .. } => {
            is_present_formula(cond) && is_present_term(then_t) && is_present_term(else_t)
        }
    }
}

fn is_present_formula(f: &FormulaRef) -> bool {
    match f.as_ref() {
        Formula::True | Formula::False => true,
        Formula::Atom(t) => is_present_term(t),
        Formula::Cmp { lhs, rhs, .. } => is_present_term(lhs) && is_present_term(rhs),
        Formula::Not(g) => is_present_formula(g),
        Formula::Or(l, r) | Formula::And(l, r) => {
            is_present_formula(l) && is_present_formula(r)
        }
        _ => false,
    }
}

/// Top-level tail encoding: the marker starts false, once raised it stays
/// raised with every output frozen, and the weak rewrite of the property
/// holds from position zero.
pub fn tr_top(f: &FormulaRef, outputs: &[Arc<VarInfo>]) -> Result<FormulaRef, RewriteError> {
    for v in outputs {
        if v.name.as_ref() == tail_var().name.as_ref() {
            return Err(RewriteError::SymbolCollision { name: v.name.to_string() });
        }
    }
    let body = tr_rewrite(f, Polarity::Weak)?;
    let frozen: Vec<FormulaRef> = outputs
        .iter()
        .map(|v| Formula::eq(Term::var(v.clone()), Term::next(Term::var(v.clone()), None)))
        .collect();
    let mut step = Formula::next(tail_atom());
    if !frozen.is_empty() {
        step = Formula::and(step, Formula::conj(frozen));
    }
    Ok(Formula::conj([
        Formula::not(tail_atom()),
        Formula::globally(Formula::implies(tail_atom(), step)),
        body,
    ]))
}

/// Builds the infinite tail extension of a finite trace: every position
/// before the final one keeps its assignment with the marker false; the
/// final output-only position gets `filler` values for its inputs, the
/// marker true, and repeats forever.
pub fn extend_with_tail(
    t: &FiniteTrace,
    filler: impl Fn(&Arc<VarInfo>) -> Value,
) -> Result<LassoTrace, TraceError> {
    let mut vars = t.vocab.vars().to_vec();
    vars.push(tail_var());
    let vocab = Vocab::new(vars)?;
    let n = t.len();
    let mut stem = Vec::with_capacity(n - 1);
    for s in &t.states()[..n - 1] {
        let mut s = s.clone();
        s.push(Some(Value::Bool(false)));
        stem.push(s);
    }
    let last = &t.states()[n - 1];
    let mut fin = Vec::with_capacity(last.len() + 1);
    for (slot, v) in t.vocab.vars().iter().enumerate() {
        match &last[slot] {
            Some(value) => fin.push(Some(value.clone())),
            None => fin.push(Some(filler(v))),
        }
    }
    fin.push(Some(Value::Bool(true)));
    LassoTrace::new(vocab, stem, vec![fin])
}

// The weak-to-safety translation. Under weak semantics on finite traces,
// until behaves as weak until, which release expresses directly; replacing
// every until moves the formula into the safety fragment without changing
// its weak value.

const W2S_NAME: &str = "the weak-to-safety translation";

/// Replaces until by release throughout a formula in negation normal form,
/// preserving weak satisfaction on finite traces.
pub fn w2s(f: &FormulaRef) -> Result<FormulaRef, RewriteError> {
    let plain_pred = |g: &FormulaRef| -> Result<(), RewriteError> {
        match g.as_ref() {
            Formula::True | Formula::False => Ok(()),
            Formula::Atom(t) => w2s_term(t),
            Formula::Cmp { lhs, rhs, .. } => {
                w2s_term(lhs)?;
                w2s_term(rhs)
            }
            _ => Err(RewriteError::UnsupportedConstruct {
                rewriting: W2S_NAME,
                construct: format!(
                    "negation over {} (the input must be in negation normal form)",
                    op_name(g)
                ),
            }),
        }
    };
    match f.as_ref() {
        Formula::True | Formula::False => Ok(f.clone()),
        Formula::Atom(_) | Formula::Cmp { .. } => {
            plain_pred(f)?;
            Ok(f.clone())
        }
        Formula::Not(g) => {
            plain_pred(g)?;
            Ok(f.clone())
        }
        Formula::Or(l, r) => Ok(Formula::or(w2s(l)?, w2s(r)?)),
        Formula::And(l, r) => Ok(Formula::and(w2s(l)?, w2s(r)?)),
        Formula::Next(g) => Ok(Formula::next(w2s(g)?)),
        Formula::Yesterday(g) => Ok(Formula::yesterday(w2s(g)?)),
        Formula::Until(l, r) => {
            let a = w2s(l)?;
            let b = w2s(r)?;
            Ok(Formula::release(b.clone(), Formula::or(a, b)))
        }
        Formula::Release(l, r) => Ok(Formula::release(w2s(l)?, w2s(r)?)),
        other => Err(RewriteError::UnsupportedConstruct {
            rewriting: W2S_NAME,
            construct: op_name(other).to_string(),
        }),
    }
}

fn w2s_term(t: &TermRef) -> Result<(), RewriteError> {
    match t.as_ref() {
        Term::Const { .. } | Term::Var(_) => Ok(()),
        Term::App { lhs, rhs, .. } => {
            w2s_term(lhs)?;
            w2s_term(rhs)
        }
        Term::Next { .. } | Term::AtNext { .. } | Term::AtLast { .. } | Term::Ite { .. } => {
            Err(RewriteError::UnsupportedConstruct {
                rewriting: W2S_NAME,
                construct: "state-crossing or conditional terms".to_string(),
            })
        }
    }
}

// Frame conditions and the composed-property premise.

/// A component as the composition sees it: scheduling symbols plus the
/// outputs frozen while the component is not scheduled.
#[derive(Debug, Clone)]
pub struct ComponentInterface {
    pub name: String,
    pub symbols: ComponentSymbols,
    pub outputs: Vec<Arc<VarInfo>>,
}

impl ComponentInterface {
    pub fn new(name: &str, outputs: Vec<Arc<VarInfo>>) -> ComponentInterface {
        ComponentInterface {
            name: name.to_string(),
            symbols: ComponentSymbols::for_component(name),
            outputs,
        }
    }
}

/// Frame condition as a property: whenever the component is not scheduled,
/// each of its outputs keeps its value at the next position.
pub fn psi_cond_property(iface: &ComponentInterface) -> FormulaRef {
    if iface.outputs.is_empty() {
        return Formula::tt();
    }
    Formula::globally(psi_cond_step(iface))
}

/// Frame condition as a single-step constraint, the form a composed
/// transition relation conjoins.
pub fn psi_cond_step(iface: &ComponentInterface) -> FormulaRef {
    if iface.outputs.is_empty() {
        return Formula::tt();
    }
    let frozen = iface
        .outputs
        .iter()
        .map(|v| Formula::eq(Term::var(v.clone()), Term::next(Term::var(v.clone()), None)));
    Formula::or(iface.symbols.run_atom(), Formula::conj(frozen))
}

/// A side remark produced while assembling the composed-property premise.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RewriteWarning {
    pub component: String,
    pub message: String,
}

/// The composed-property premise plus side conditions the caller must
/// discharge separately.
#[derive(Debug, Clone)]
pub struct GammaOutput {
    /// Conjunction of the rewritten local properties and frame conditions.
    pub formula: FormulaRef,
    /// Fairness obligations (`G F run_i`) to be assumed by the caller.
    pub obligations: Vec<FormulaRef>,
    pub warnings: Vec<RewriteWarning>,
}

/// Assembles the composed-property premise: each local property rewritten by
/// `mode` plus each component's frame condition. In fairness mode the
/// scheduling obligations are returned separately so the caller can add them
/// as assumptions.
pub fn gamma_p(
    components: &[(ComponentInterface, Vec<FormulaRef>)],
    mode: RewriteMode,
) -> Result<GammaOutput, RewriteError> {
    let mut parts = Vec::new();
    let mut obligations = Vec::new();
    let mut warnings = Vec::new();
    for (iface, props) in components {
        for p in props {
            parts.push(top_rewrite(p, mode, &iface.symbols)?);
        }
        parts.push(psi_cond_property(iface));
        if mode == RewriteMode::Fairness {
            let run = iface.symbols.run_atom();
            obligations.push(Formula::globally(Formula::finally(run)));
            warnings.push(RewriteWarning {
                component: iface.name.clone(),
                message: format!(
                    "fairness mode assumes {} is scheduled infinitely often; adding G F {}",
                    iface.name, iface.symbols.run.name
                ),
            });
        }
    }
    Ok(GammaOutput { formula: Formula::conj(parts), obligations, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::norm::{simplify, subst_bool_var};
    use crate::sort::Sort;
    use crate::syntax::CmpOp;

    fn cs() -> ComponentSymbols {
        ComponentSymbols::new("run", "end")
    }

    fn inp(name: &str) -> FormulaRef {
        Formula::var(VarInfo::bool_input(name))
    }

    fn out(name: &str) -> FormulaRef {
        Formula::var(VarInfo::bool_output(name))
    }

    fn base(f: &FormulaRef, pol: Polarity) -> String {
        rewrite_base(f, pol, &cs()).unwrap().to_string()
    }

    fn opt(f: &FormulaRef, pol: Polarity) -> String {
        rewrite_opt(f, pol, &cs()).unwrap().to_string()
    }

    #[test]
    fn input_predicates_get_scheduling_guards() {
        let rec = inp("rec");
        assert_eq!(base(&rec, Polarity::Strong), "run & rec");
        assert_eq!(base(&rec, Polarity::Weak), "!run | rec");
    }

    #[test]
    fn output_predicates_pass_through() {
        let p = out("p");
        assert_eq!(base(&p, Polarity::Weak), "p");
        assert_eq!(base(&p, Polarity::Strong), "p");
        assert_eq!(rewrite_base(&p, Polarity::Weak, &cs()).unwrap(), p);
    }

    #[test]
    fn top_level_wrap_relocates_to_the_first_sample() {
        let r = rewrite_base_top(&out("p"), &cs()).unwrap();
        assert_eq!(
            r.to_string(),
            "(run | Z run & end) R (!(run | Z run & end) | p)"
        );
    }

    #[test]
    fn next_steps_to_the_following_sample() {
        let f = Formula::next(out("p"));
        assert_eq!(
            base(&f, Polarity::Weak),
            "X ((run | Z run & end) R (!(run | Z run & end) | p))"
        );
        assert_eq!(
            base(&f, Polarity::Strong),
            "X (!(run | Z run & end) U ((run | Z run & end) & p))"
        );
    }

    #[test]
    fn weak_until_keeps_the_end_disjunct() {
        let f = Formula::until(out("p"), out("q"));
        assert_eq!(
            base(&f, Polarity::Weak),
            "(!(run | Z run & end) | p) U ((run | Z run & end) & q | Y end)"
        );
        assert_eq!(
            base(&f, Polarity::Strong),
            "(!(run | Z run & end) | p) U ((run | Z run & end) & q)"
        );
    }

    #[test]
    fn the_broken_variant_differs_exactly_on_that_disjunct() {
        let f = Formula::until(out("p"), out("q"));
        let good = rewrite_base_with(&f, Polarity::Weak, &cs(), RewriterKind::Correct).unwrap();
        let bad =
            rewrite_base_with(&f, Polarity::Weak, &cs(), RewriterKind::MutantDropYEnd).unwrap();
        assert_ne!(good, bad);
        assert!(good.to_string().contains("Y end"));
        assert!(!bad.to_string().contains("Y end"));
    }

    #[test]
    fn yesterday_steps_back_over_run_samples() {
        let f = Formula::yesterday(out("p"));
        assert_eq!(base(&f, Polarity::Weak), "Y (!run S (run & p))");
        let s = Formula::since(out("p"), out("q"));
        assert_eq!(
            base(&s, Polarity::Weak),
            "(!(run | Z run & end) | p) S ((run | Z run & end) & q)"
        );
    }

    #[test]
    fn state_crossing_terms_are_retargeted() {
        let o = VarInfo::bool_output("o");
        let next_read = Formula::atom(Term::next(Term::var(o.clone()), None));
        assert_eq!(
            base(&next_read, Polarity::Weak),
            "!run | o @F (run | Z run & end)"
        );
        // A past read is safe at the end of the trace even when its payload
        // is an input variable, so no run guard is added for either sign.
        let i = VarInfo::bool_input("i");
        let at_last = Formula::atom(Term::at_last(Term::var(i), Formula::tt(), None));
        assert_eq!(
            base(&at_last, Polarity::Strong),
            "i @P ((run | Z run & end) & true)"
        );
        assert_eq!(
            base(&at_last, Polarity::Weak),
            "i @P ((run | Z run & end) & true)"
        );
    }

    #[test]
    fn conditional_terms_branch_on_strong_knowledge() {
        let sort = Sort::Int { lo: 0, hi: 3 };
        let x = Term::var(VarInfo::new("x", sort.clone(), IoClass::Output));
        let y = Term::var(VarInfo::new("y", sort.clone(), IoClass::Output));
        let i = inp("i");
        let f = Formula::eq(Term::ite(i, x.clone(), y, None), x);
        assert_eq!(
            base(&f, Polarity::Weak),
            "!run | ite(run & i, x, ite(!(!run | i), y, 0)) = x"
        );
    }

    #[test]
    fn optimized_guards_tolerant_steps_with_end_only() {
        let f = Formula::next(out("o"));
        assert_eq!(opt(&f, Polarity::Weak), "end | X o");
        assert_eq!(opt(&f, Polarity::Strong), "!end & X o");
        let u = Formula::until(out("o1"), out("o2"));
        assert_eq!(opt(&u, Polarity::Weak), "o1 U (Y end | o2)");
        assert_eq!(opt(&u, Polarity::Strong), "o1 U (!Y end & o2)");
    }

    #[test]
    fn optimized_retargets_next_terms_with_an_end_stop() {
        let out2 = Term::var(VarInfo::bool_output("out_2"));
        let in2 = Term::var(VarInfo::bool_input("in_2"));
        let f = Formula::eq(Term::next(out2.clone(), None), in2.clone());
        assert_eq!(opt(&f, Polarity::Weak), "!run | out_2 @F (!Y end) = in_2");
        // An input payload must not be read at a stuttering position, so the
        // relaxed read falls back to the sample-anchored form.
        let g = Formula::eq(Term::next(in2, None), out2);
        assert_eq!(
            opt(&g, Polarity::Weak),
            "!run | in_2 @F (run | Z run & end) = out_2"
        );
    }

    #[test]
    fn optimized_falls_back_to_base_for_intolerant_children() {
        let f = Formula::next(inp("i"));
        assert_eq!(
            opt(&f, Polarity::Weak),
            "X ((run | Z run & end) R (!(run | Z run & end) | !run | i))"
        );
    }

    #[test]
    fn optimized_top_unwraps_tolerant_roots() {
        let st = Formula::globally(out("p"));
        let r = rewrite_opt_top(&st, &cs()).unwrap();
        assert_eq!(r.to_string(), "!(true U (!Y end & !p))");
        let not_st = Formula::next(inp("i"));
        let w = rewrite_opt_top(&not_st, &cs()).unwrap();
        assert!(matches!(w.as_ref(), Formula::Release(_, _)));
    }

    #[test]
    fn fairness_is_transparent_for_tolerant_formulas() {
        let pred = Formula::eq(
            Term::next(Term::var(VarInfo::bool_output("out_2")), None),
            Term::var(VarInfo::bool_input("in_2")),
        );
        assert_eq!(rewrite_fair(&pred, &cs()).unwrap(), pred);
        let u = Formula::until(out("o1"), out("o2"));
        assert_eq!(rewrite_fair(&u, &cs()).unwrap().to_string(), "o1 U o2");
    }

    #[test]
    fn fairness_guards_with_run_alone() {
        let f = Formula::next(inp("i"));
        assert_eq!(
            rewrite_fair(&f, &cs()).unwrap().to_string(),
            "X (run R (!run | i))"
        );
        let y = Formula::yesterday(out("o"));
        assert_eq!(
            rewrite_fair(&y, &cs()).unwrap().to_string(),
            "Y (!run S (run & o))"
        );
    }

    #[test]
    fn fairness_is_the_optimized_rewrite_with_the_end_machinery_removed() {
        let f = Formula::next(out("o"));
        let opt = rewrite_opt(&f, Polarity::Weak, &cs()).unwrap();
        let without_end = simplify(&subst_bool_var(&opt, "end", &Formula::ff()));
        assert_eq!(without_end, rewrite_fair(&f, &cs()).unwrap());
    }

    #[test]
    fn rewrites_refuse_reserved_symbols() {
        let clash = Formula::var(VarInfo::bool_input("run"));
        assert!(matches!(
            rewrite_base(&clash, Polarity::Weak, &cs()),
            Err(RewriteError::SymbolCollision { .. })
        ));
        assert!(matches!(
            rewrite_opt_top(&clash, &cs()),
            Err(RewriteError::SymbolCollision { .. })
        ));
        assert!(matches!(
            rewrite_fair_top(&clash, &cs()),
            Err(RewriteError::SymbolCollision { .. })
        ));
    }

    #[test]
    fn embedding_cost_per_operator_is_pinned() {
        let i = inp("i");
        let o = out("o");
        assert_eq!(rewrite_base_top(&i, &cs()).unwrap().size(), 19);
        assert_eq!(rewrite_base_top(&o, &cs()).unwrap().size(), 16);
        let xxx = Formula::next(Formula::next(Formula::next(i)));
        assert_eq!(rewrite_base_top(&xxx, &cs()).unwrap().size(), 67);
    }

    #[test]
    fn conditional_nesting_doubles_the_rewritten_size() {
        let sort = Sort::Int { lo: 0, hi: 3 };
        let x = Term::var(VarInfo::new("x", sort.clone(), IoClass::Output));
        let y = Term::var(VarInfo::new("y", sort.clone(), IoClass::Output));
        let mut t = x.clone();
        let mut sizes = Vec::new();
        for _ in 0..3 {
            t = Term::ite(
                Formula::cmp(CmpOp::Eq, t, Term::int_const(0)),
                x.clone(),
                y.clone(),
                None,
            );
            sizes.push(r_base_term(&t, &cs(), RewriterKind::Correct).size());
        }
        assert_eq!(sizes, vec![12, 34, 78]);
        assert!(sizes.windows(2).all(|w| w[1] >= 2 * w[0]));
    }

    #[test]
    fn tail_encoding_guards_inputs_and_steps() {
        let i = inp("i");
        let o = out("o");
        assert_eq!(tr_rewrite(&i, Polarity::Weak).unwrap().to_string(), "Tail | i");
        assert_eq!(tr_rewrite(&i, Polarity::Strong).unwrap().to_string(), "!Tail & i");
        assert_eq!(tr_rewrite(&o, Polarity::Weak).unwrap().to_string(), "o");
        let x = Formula::next(o.clone());
        assert_eq!(tr_rewrite(&x, Polarity::Weak).unwrap().to_string(), "Tail | X o");
        assert_eq!(tr_rewrite(&x, Polarity::Strong).unwrap().to_string(), "!Tail & X o");
        let u = Formula::until(i.clone(), o.clone());
        assert_eq!(
            tr_rewrite(&u, Polarity::Weak).unwrap().to_string(),
            "(Tail | i) U (o | Tail & (Tail | i))"
        );
        assert_eq!(
            tr_rewrite(&u, Polarity::Strong).unwrap().to_string(),
            "(!Tail & i) U o"
        );
        // The weak frontier disjunct is what lets an unfulfilled until pass
        // weakly: the trace may simply have ended first.
        let stuck = Formula::until(Formula::tt(), Formula::ff());
        assert_eq!(
            tr_rewrite(&stuck, Polarity::Weak).unwrap().to_string(),
            "true U (false | Tail & true)"
        );
    }

    #[test]
    fn tail_encoding_rejects_what_the_extension_cannot_answer() {
        let unsupported = |f: &FormulaRef| {
            matches!(
                tr_rewrite(f, Polarity::Weak),
                Err(RewriteError::UnsupportedConstruct { .. })
            )
        };
        assert!(unsupported(&Formula::yesterday(out("o"))));
        let o = Term::var(VarInfo::bool_output("o"));
        let i = Term::var(VarInfo::bool_input("i"));
        assert!(unsupported(&Formula::atom(Term::at_next(
            o.clone(),
            Formula::tt(),
            None
        ))));
        assert!(unsupported(&Formula::atom(Term::next(i.clone(), None))));
        assert!(unsupported(&Formula::atom(Term::next(
            Term::next(o.clone(), None),
            None
        ))));
        assert!(unsupported(&Formula::eq(
            Term::ite(Formula::next(Formula::atom(o.clone())), o.clone(), o.clone(), None),
            o,
        )));
        let clash = Formula::var(tail_var());
        assert!(matches!(
            tr_rewrite(&clash, Polarity::Weak),
            Err(RewriteError::SymbolCollision { .. })
        ));
    }

    #[test]
    fn tail_top_level_freezes_outputs() {
        let o = VarInfo::bool_output("o");
        let r = tr_top(&Formula::var(o.clone()), &[o]).unwrap();
        assert_eq!(r.to_string(), "!Tail & G (!Tail | X Tail & o = o') & o");
    }

    #[test]
    fn tail_extension_freezes_the_final_state() {
        let i = VarInfo::bool_input("i");
        let o = VarInfo::bool_output("o");
        let vocab = Vocab::new(vec![i, o]).unwrap();
        let t = FiniteTrace::new(
            vocab.clone(),
            vec![
                vocab.state(&[("i", Value::Bool(true)), ("o", Value::Bool(false))]).unwrap(),
                vocab.state(&[("o", Value::Bool(true))]).unwrap(),
            ],
        )
        .unwrap();
        let ext = extend_with_tail(&t, |_| Value::Bool(true)).unwrap();
        assert_eq!(ext.stem_len(), 1);
        assert_eq!(ext.loop_len(), 1);
        let tail_slot = ext.vocab.index_of("Tail").unwrap();
        assert_eq!(ext.value(0, tail_slot), &Value::Bool(false));
        assert_eq!(ext.value(1, tail_slot), &Value::Bool(true));
        assert_eq!(ext.value(5, ext.vocab.index_of("o").unwrap()), &Value::Bool(true));
        assert_eq!(ext.value(5, ext.vocab.index_of("i").unwrap()), &Value::Bool(true));

        let single = FiniteTrace::new(
            vocab.clone(),
            vec![vocab.state(&[("o", Value::Bool(false))]).unwrap()],
        )
        .unwrap();
        let ext = extend_with_tail(&single, |_| Value::Bool(false)).unwrap();
        assert_eq!(ext.stem_len(), 0);
        assert_eq!(ext.value(0, ext.vocab.index_of("Tail").unwrap()), &Value::Bool(true));
    }

    #[test]
    fn weak_to_safety_swaps_until_for_release() {
        let p = out("p");
        let q = out("q");
        let u = Formula::until(p.clone(), q.clone());
        assert_eq!(w2s(&u).unwrap().to_string(), "q R (p | q)");
        let r = Formula::release(p.clone(), q.clone());
        assert_eq!(w2s(&r).unwrap(), r);
        let y = Formula::yesterday(Formula::not(p.clone()));
        assert_eq!(w2s(&y).unwrap(), y);
    }

    #[test]
    fn weak_to_safety_requires_negation_normal_form() {
        let p = out("p");
        let deep_not = Formula::not(Formula::or(p.clone(), p.clone()));
        assert!(matches!(
            w2s(&deep_not),
            Err(RewriteError::UnsupportedConstruct { .. })
        ));
        let since = Formula::since(p.clone(), p.clone());
        assert!(w2s(&since).is_err());
        let term = Formula::atom(Term::next(Term::var(VarInfo::bool_output("o")), None));
        assert!(w2s(&term).is_err());
        let sugar = Formula::finally(p);
        assert!(w2s(&sugar).is_err());
    }

    #[test]
    fn frame_condition_freezes_idle_outputs() {
        let iface = ComponentInterface::new(
            "c",
            vec![VarInfo::bool_output("o1"), VarInfo::bool_output("o2")],
        );
        assert_eq!(
            psi_cond_property(&iface).to_string(),
            "G (run_c | o1 = o1' & o2 = o2')"
        );
        assert_eq!(
            psi_cond_step(&iface).to_string(),
            "run_c | o1 = o1' & o2 = o2'"
        );
        let empty = ComponentInterface::new("e", vec![]);
        assert_eq!(psi_cond_property(&empty), Formula::tt());
        assert_eq!(psi_cond_step(&empty), Formula::tt());
    }

    #[test]
    fn embedded_evaluation_matches_local_truncated_semantics() {
        use crate::lasso::holds;
        use crate::trace::{embed, EmbedPlan, TailPlan, Trace};

        let i = VarInfo::bool_input("i");
        let o = VarInfo::bool_output("o");
        let vocab = Vocab::new(vec![i.clone(), o.clone()]).unwrap();
        let t = |b: bool| Value::Bool(b);
        let full = |iv: bool, ov: bool| {
            vocab.state(&[("i", t(iv)), ("o", t(ov))]).unwrap()
        };
        let fin = |ov: bool| vocab.state(&[("o", t(ov))]).unwrap();
        let locals = vec![
            FiniteTrace::new(vocab.clone(), vec![fin(true)]).unwrap(),
            FiniteTrace::new(vocab.clone(), vec![full(true, false), fin(true)]).unwrap(),
            FiniteTrace::new(
                vocab.clone(),
                vec![full(false, false), full(true, true), fin(false)],
            )
            .unwrap(),
        ];

        let io = Formula::var(i.clone());
        let oo = Formula::var(o.clone());
        let pool = vec![
            io.clone(),
            oo.clone(),
            Formula::not(io.clone()),
            Formula::next(oo.clone()),
            Formula::next(io.clone()),
            Formula::until(io.clone(), oo.clone()),
            Formula::not(Formula::until(oo.clone(), io.clone())),
            Formula::yesterday(oo.clone()),
            Formula::next(Formula::since(oo.clone(), io.clone())),
            Formula::globally(oo.clone()),
            Formula::finally(Formula::not(oo.clone())),
            Formula::atom(Term::next(Term::var(o.clone()), None)),
            Formula::atom(Term::next(Term::var(i.clone()), None)),
            Formula::atom(Term::at_next(Term::var(o.clone()), io.clone(), None)),
            Formula::atom(Term::at_next(Term::var(o.clone()), oo.clone(), None)),
            Formula::atom(Term::at_last(Term::var(o.clone()), oo.clone(), None)),
            Formula::atom(Term::at_last(Term::var(i.clone()), io.clone(), None)),
            Formula::eq(
                Term::ite(io.clone(), Term::var(o.clone()), Term::var(i.clone()), None),
                Term::var(o.clone()),
            ),
        ];

        let symbols = cs();
        for local in &locals {
            let samples = local.len() - 1;
            let mut plans = vec![
                EmbedPlan::direct(symbols.run.clone(), symbols.end.clone(), samples, TailPlan::FiniteCut),
                EmbedPlan::direct(
                    symbols.run.clone(),
                    symbols.end.clone(),
                    samples,
                    TailPlan::NoRunLoop { final_inputs: vec![t(false)], loop_inputs: vec![] },
                ),
            ];
            if samples >= 1 {
                let mut gaps = vec![Vec::new(); samples];
                gaps[0] = vec![vec![t(true)], vec![t(false)]];
                // The non-running end state mirrors the local trace's final
                // state, where input variables are absent and therefore read
                // as sort defaults. Its inputs must be the sort defaults for
                // the correspondence to hold; loop fillers stay arbitrary
                // because no guarded read ever lands past the end state.
                plans.push(EmbedPlan {
                    run: symbols.run.clone(),
                    end: symbols.end.clone(),
                    gaps: gaps.clone(),
                    tail: TailPlan::NoRunLoop {
                        final_inputs: vec![t(false)],
                        loop_inputs: vec![vec![t(false)], vec![t(true)]],
                    },
                });
                gaps[samples - 1] = vec![vec![t(true)]];
                plans.push(EmbedPlan {
                    run: symbols.run.clone(),
                    end: symbols.end.clone(),
                    gaps,
                    tail: TailPlan::FiniteCut,
                });
            }
            let local_trace = Trace::Finite(local.clone());
            for plan in &plans {
                let global = embed(&local_trace, plan).unwrap();
                for f in &pool {
                    let lhs = holds(&local_trace, f);
                    let base = rewrite_base_top(f, &symbols).unwrap();
                    assert_eq!(
                        lhs,
                        holds(&global, &base),
                        "base embedding disagrees on {f} for local len {} plan {plan:?}",
                        local.len()
                    );
                    let opt = rewrite_opt_top(f, &symbols).unwrap();
                    assert_eq!(
                        lhs,
                        holds(&global, &opt),
                        "optimized embedding disagrees on {f} for local len {} plan {plan:?}",
                        local.len()
                    );
                }
            }
        }
    }

    #[test]
    fn fair_embedding_matches_lasso_locals() {
        use crate::lasso::holds;
        use crate::trace::{embed, EmbedPlan, TailPlan, Trace};

        let i = VarInfo::bool_input("i");
        let o = VarInfo::bool_output("o");
        let vocab = Vocab::new(vec![i.clone(), o.clone()]).unwrap();
        let t = |b: bool| Value::Bool(b);
        let full = |iv: bool, ov: bool| {
            vocab.state(&[("i", t(iv)), ("o", t(ov))]).unwrap()
        };
        let locals = vec![
            LassoTrace::new(vocab.clone(), vec![], vec![full(true, false), full(false, true)])
                .unwrap(),
            LassoTrace::new(vocab.clone(), vec![full(false, false)], vec![full(true, true)])
                .unwrap(),
        ];
        let io = Formula::var(i.clone());
        let oo = Formula::var(o.clone());
        let pool = vec![
            io.clone(),
            Formula::globally(Formula::finally(oo.clone())),
            Formula::until(io.clone(), oo.clone()),
            Formula::next(Formula::next(io.clone())),
            Formula::yesterday(oo.clone()),
            Formula::eq(Term::next(Term::var(o.clone()), None), Term::var(i.clone())),
        ];
        let symbols = cs();
        for local in &locals {
            let samples = local.stem_len() + local.loop_len();
            let mut gaps = vec![Vec::new(); samples];
            gaps[samples - 1] = vec![vec![t(false)]];
            let plans = vec![
                EmbedPlan::direct(symbols.run.clone(), symbols.end.clone(), samples, TailPlan::None),
                EmbedPlan { run: symbols.run.clone(), end: symbols.end.clone(), gaps, tail: TailPlan::None },
            ];
            let local_trace = Trace::Lasso(local.clone());
            for plan in &plans {
                let global = embed(&local_trace, plan).unwrap();
                for f in &pool {
                    let fair = rewrite_fair_top(f, &symbols).unwrap();
                    assert_eq!(
                        holds(&local_trace, f),
                        holds(&global, &fair),
                        "fair embedding disagrees on {f} for plan {plan:?}"
                    );
                }
            }
        }
    }

    #[test]
    fn the_premise_collects_rewrites_and_frames() {
        let send2 = VarInfo::bool_output("send_2");
        let iface = ComponentInterface::new("c2", vec![send2.clone()]);
        let prop = Formula::globally(Formula::implies(
            inp("send_1"),
            Formula::next(Formula::var(send2)),
        ));
        let comps = vec![(iface.clone(), vec![prop.clone()])];

        let base = gamma_p(&comps, RewriteMode::Base).unwrap();
        assert!(base.obligations.is_empty());
        assert!(base.warnings.is_empty());
        let Formula::And(l, r) = base.formula.as_ref() else {
            panic!("expected a conjunction")
        };
        assert_eq!(*l, top_rewrite(&prop, RewriteMode::Base, &iface.symbols).unwrap());
        assert_eq!(*r, psi_cond_property(&iface));

        let fair = gamma_p(&comps, RewriteMode::Fairness).unwrap();
        assert_eq!(fair.obligations.len(), 1);
        assert_eq!(fair.obligations[0].to_string(), "G F run_c2");
        assert_eq!(fair.warnings[0].component, "c2");

        let bare = gamma_p(&[(iface.clone(), vec![])], RewriteMode::Base).unwrap();
        assert_eq!(bare.formula, psi_cond_property(&iface));
    }
}
