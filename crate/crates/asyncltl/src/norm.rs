//! Desugaring, negation normal form, simplification, and substitution.
//!
//! Desugaring removes every derived operator: conjunction, release, finally,
//! globally, once, historically, weak-yesterday, the bounded forms, and
//! operator powers. The result uses only truth constants, atoms, negation,
//! disjunction, next, until, yesterday, and since (term conditions are
//! desugared too).
//!
//! Negation normal form pushes negation to the atoms, introducing
//! conjunction, release, and weak-yesterday as first-class duals. Since has
//! no dual in the operator set, so a negation directly above it stays.

use crate::syntax::{BoundedOp, Formula, FormulaRef, PowerOp, Term, TermRef, VarInfo};
use std::collections::BTreeMap;
use std::sync::Arc;

/// Rewrites every derived operator into the core set.
pub fn desugar(f: &FormulaRef) -> FormulaRef {
    match f.as_ref() {
        Formula::True | Formula::False => f.clone(),
        Formula::Atom(t) => Formula::atom(desugar_term(t)),
        Formula::Cmp { op, lhs, rhs } => {
            Formula::cmp(*op, desugar_term(lhs), desugar_term(rhs))
        }
        Formula::Not(g) => Formula::not(desugar(g)),
        Formula::Or(l, r) => Formula::or(desugar(l), desugar(r)),
        Formula::Next(g) => Formula::next(desugar(g)),
        Formula::Until(l, r) => Formula::until(desugar(l), desugar(r)),
        Formula::Yesterday(g) => Formula::yesterday(desugar(g)),
        Formula::Since(l, r) => Formula::since(desugar(l), desugar(r)),
        Formula::And(l, r) => Formula::not(Formula::or(
            Formula::not(desugar(l)),
            Formula::not(desugar(r)),
        )),
        Formula::Release(l, r) => Formula::not(Formula::until(
            Formula::not(desugar(l)),
            Formula::not(desugar(r)),
        )),
        Formula::Finally(g) => Formula::until(Formula::tt(), desugar(g)),
        Formula::Globally(g) => Formula::not(Formula::until(
            Formula::tt(),
            Formula::not(desugar(g)),
        )),
        Formula::Once(g) => Formula::since(Formula::tt(), desugar(g)),
        Formula::Historically(g) => Formula::not(Formula::since(
            Formula::tt(),
            Formula::not(desugar(g)),
        )),
        Formula::WeakYesterday(g) => {
            Formula::not(Formula::yesterday(Formula::not(desugar(g))))
        }
        Formula::Bounded { op, n, arg } => desugar(&expand_bounded(*op, *n, arg)),
        Formula::Power { op, n, arg } => desugar(&expand_power(*op, *n, arg)),
    }
}

/// Expands a bounded operator into its disjunction or conjunction of
/// operator powers, left-associated: `F<=2 p` becomes `(p | X p) | X^2 p`.
fn expand_bounded(op: BoundedOp, n: u32, arg: &FormulaRef) -> FormulaRef {
    let (power, disjunctive) = match op {
        BoundedOp::Finally => (PowerOp::Next, true),
        BoundedOp::Globally => (PowerOp::Next, false),
        BoundedOp::Once => (PowerOp::Yesterday, true),
        BoundedOp::Historically => (PowerOp::WeakYesterday, false),
    };
    let mut acc = arg.clone();
    for k in 1..=n {
        let shifted = expand_power(power, k, arg);
        acc = if disjunctive {
            Formula::or(acc, shifted)
        } else {
            Formula::and(acc, shifted)
        };
    }
    acc
}

fn expand_power(op: PowerOp, n: u32, arg: &FormulaRef) -> FormulaRef {
    let wrap = match op {
        PowerOp::Next => Formula::next,
        PowerOp::Yesterday => Formula::yesterday,
        PowerOp::WeakYesterday => Formula::weak_yesterday,
    };
    let mut acc = arg.clone();
    for _ in 0..n {
        acc = wrap(acc);
    }
    acc
}

fn desugar_term(t: &TermRef) -> TermRef {
    match t.as_ref() {
        Term::Const { .. } | Term::Var(_) => t.clone(),
        Term::App { op, lhs, rhs } => Term::app(*op, desugar_term(lhs), desugar_term(rhs)),
        Term::Next { arg, default } => Term::next(desugar_term(arg), default.clone()),
        Term::AtNext { arg, cond, default } => {
            Term::at_next(desugar_term(arg), desugar(cond), default.clone())
        }
        Term::AtLast { arg, cond, default } => {
            Term::at_last(desugar_term(arg), desugar(cond), default.clone())
        }
        Term::Ite { cond, then_t, else_t, default } => Term::ite(
            desugar(cond),
            desugar_term(then_t),
            desugar_term(else_t),
            default.clone(),
        ),
    }
}

/// Negation normal form. Desugars first, then pushes negation to the atoms;
/// the result uses atoms, negated atoms, `|`, `&`, `X`, `U`, `R`, `Y`, `Z`,
/// `S`, and negations kept directly above `S`. Term conditions are left as
/// desugared.
pub fn to_nnf(f: &FormulaRef) -> FormulaRef {
    nnf_pos(&desugar(f))
}

fn nnf_pos(f: &FormulaRef) -> FormulaRef {
    match f.as_ref() {
        Formula::True | Formula::False | Formula::Atom(_) | Formula::Cmp { .. } => f.clone(),
        Formula::Not(g) => nnf_neg(g),
        Formula::Or(l, r) => Formula::or(nnf_pos(l), nnf_pos(r)),
        Formula::Next(g) => Formula::next(nnf_pos(g)),
        Formula::Until(l, r) => Formula::until(nnf_pos(l), nnf_pos(r)),
        Formula::Yesterday(g) => Formula::yesterday(nnf_pos(g)),
        Formula::Since(l, r) => Formula::since(nnf_pos(l), nnf_pos(r)),
        other => panic!("negation normal form expects desugared input, got {other}"),
    }
}

fn nnf_neg(f: &FormulaRef) -> FormulaRef {
    match f.as_ref() {
        Formula::True => Formula::ff(),
        Formula::False => Formula::tt(),
        Formula::Atom(_) | Formula::Cmp { .. } => Formula::not(f.clone()),
        Formula::Not(g) => nnf_pos(g),
        Formula::Or(l, r) => Formula::and(nnf_neg(l), nnf_neg(r)),
        Formula::Next(g) => Formula::next(nnf_neg(g)),
        Formula::Until(l, r) => Formula::release(nnf_neg(l), nnf_neg(r)),
        Formula::Yesterday(g) => Formula::weak_yesterday(nnf_neg(g)),
        Formula::Since(l, r) => {
            Formula::not(Formula::since(nnf_pos(l), nnf_pos(r)))
        }
        other => panic!("negation normal form expects desugared input, got {other}"),
    }
}

/// Constant folding and double-negation elimination. Every fold preserves
/// both the weak and the strong truncated value at every position (folds
/// like `X true -> true` or `Y true -> true` would not, and are omitted).
pub fn simplify(f: &FormulaRef) -> FormulaRef {
    match f.as_ref() {
        Formula::True | Formula::False => f.clone(),
        Formula::Atom(t) => Formula::atom(simplify_term(t)),
        Formula::Cmp { op, lhs, rhs } => {
            Formula::cmp(*op, simplify_term(lhs), simplify_term(rhs))
        }
        Formula::Not(g) => match simplify(g).as_ref() {
            Formula::True => Formula::ff(),
            Formula::False => Formula::tt(),
            Formula::Not(inner) => inner.clone(),
            _ => Formula::not(simplify(g)),
        },
        Formula::Or(l, r) => {
            let (l, r) = (simplify(l), simplify(r));
            match (l.as_ref(), r.as_ref()) {
                (Formula::True, _) | (_, Formula::True) => Formula::tt(),
                (Formula::False, _) => r,
                (_, Formula::False) => l,
                _ => Formula::or(l, r),
            }
        }
        Formula::And(l, r) => {
            let (l, r) = (simplify(l), simplify(r));
            match (l.as_ref(), r.as_ref()) {
                (Formula::False, _) | (_, Formula::False) => Formula::ff(),
                (Formula::True, _) => r,
                (_, Formula::True) => l,
                _ => Formula::and(l, r),
            }
        }
        Formula::Yesterday(g) => match simplify(g).as_ref() {
            Formula::False => Formula::ff(),
            _ => Formula::yesterday(simplify(g)),
        },
        Formula::Next(g) => Formula::next(simplify(g)),
        Formula::Until(l, r) => Formula::until(simplify(l), simplify(r)),
        Formula::Since(l, r) => Formula::since(simplify(l), simplify(r)),
        Formula::Release(l, r) => Formula::release(simplify(l), simplify(r)),
        Formula::Finally(g) => Formula::finally(simplify(g)),
        Formula::Globally(g) => Formula::globally(simplify(g)),
        Formula::Once(g) => Formula::once(simplify(g)),
        Formula::Historically(g) => Formula::historically(simplify(g)),
        Formula::WeakYesterday(g) => Formula::weak_yesterday(simplify(g)),
        Formula::Bounded { op, n, arg } => Formula::bounded(*op, *n, simplify(arg)),
        Formula::Power { op, n, arg } => Formula::power(*op, *n, simplify(arg)),
    }
}

fn simplify_term(t: &TermRef) -> TermRef {
    match t.as_ref() {
        Term::Const { .. } | Term::Var(_) => t.clone(),
        Term::App { op, lhs, rhs } => {
            Term::app(*op, simplify_term(lhs), simplify_term(rhs))
        }
        Term::Next { arg, default } => Term::next(simplify_term(arg), default.clone()),
        Term::AtNext { arg, cond, default } => {
            Term::at_next(simplify_term(arg), simplify(cond), default.clone())
        }
        Term::AtLast { arg, cond, default } => {
            Term::at_last(simplify_term(arg), simplify(cond), default.clone())
        }
        Term::Ite { cond, then_t, else_t, default } => Term::ite(
            simplify(cond),
            simplify_term(then_t),
            simplify_term(else_t),
            default.clone(),
        ),
    }
}

/// Replaces every atom occurrence of the boolean variable `name` (including
/// inside term conditions) by `replacement`. Occurrences of the variable as
/// a term operand are left alone.
pub fn subst_bool_var(f: &FormulaRef, name: &str, replacement: &FormulaRef) -> FormulaRef {
    match f.as_ref() {
        Formula::Atom(t) => match t.as_ref() {
            Term::Var(v) if &*v.name == name => replacement.clone(),
            _ => Formula::atom(subst_term(t, name, replacement)),
        },
        Formula::True | Formula::False => f.clone(),
        Formula::Cmp { op, lhs, rhs } => Formula::cmp(
            *op,
            subst_term(lhs, name, replacement),
            subst_term(rhs, name, replacement),
        ),
        Formula::Not(g) => Formula::not(subst_bool_var(g, name, replacement)),
        Formula::Or(l, r) => Formula::or(
            subst_bool_var(l, name, replacement),
            subst_bool_var(r, name, replacement),
        ),
        Formula::And(l, r) => Formula::and(
            subst_bool_var(l, name, replacement),
            subst_bool_var(r, name, replacement),
        ),
        Formula::Next(g) => Formula::next(subst_bool_var(g, name, replacement)),
        Formula::Until(l, r) => Formula::until(
            subst_bool_var(l, name, replacement),
            subst_bool_var(r, name, replacement),
        ),
        Formula::Yesterday(g) => Formula::yesterday(subst_bool_var(g, name, replacement)),
        Formula::Since(l, r) => Formula::since(
            subst_bool_var(l, name, replacement),
            subst_bool_var(r, name, replacement),
        ),
        Formula::Release(l, r) => Formula::release(
            subst_bool_var(l, name, replacement),
            subst_bool_var(r, name, replacement),
        ),
        Formula::Finally(g) => Formula::finally(subst_bool_var(g, name, replacement)),
        Formula::Globally(g) => Formula::globally(subst_bool_var(g, name, replacement)),
        Formula::Once(g) => Formula::once(subst_bool_var(g, name, replacement)),
        Formula::Historically(g) => {
            Formula::historically(subst_bool_var(g, name, replacement))
        }
        Formula::WeakYesterday(g) => {
            Formula::weak_yesterday(subst_bool_var(g, name, replacement))
        }
        Formula::Bounded { op, n, arg } => {
            Formula::bounded(*op, *n, subst_bool_var(arg, name, replacement))
        }
        Formula::Power { op, n, arg } => {
            Formula::power(*op, *n, subst_bool_var(arg, name, replacement))
        }
    }
}

fn subst_term(t: &TermRef, name: &str, replacement: &FormulaRef) -> TermRef {
    match t.as_ref() {
        Term::Const { .. } | Term::Var(_) => t.clone(),
        Term::App { op, lhs, rhs } => Term::app(
            *op,
            subst_term(lhs, name, replacement),
            subst_term(rhs, name, replacement),
        ),
        Term::Next { arg, default } => {
            Term::next(subst_term(arg, name, replacement), default.clone())
        }
        Term::AtNext { arg, cond, default } => Term::at_next(
            subst_term(arg, name, replacement),
            subst_bool_var(cond, name, replacement),
            default.clone(),
        ),
        Term::AtLast { arg, cond, default } => Term::at_last(
            subst_term(arg, name, replacement),
            subst_bool_var(cond, name, replacement),
            default.clone(),
        ),
        Term::Ite { cond, then_t, else_t, default } => Term::ite(
            subst_bool_var(cond, name, replacement),
            subst_term(then_t, name, replacement),
            subst_term(else_t, name, replacement),
            default.clone(),
        ),
    }
}

/// All variables mentioned by a formula, keyed by name.
pub fn formula_vars(f: &FormulaRef) -> BTreeMap<Arc<str>, Arc<VarInfo>> {
    let mut out = BTreeMap::new();
    collect_formula_vars(f, &mut out);
    out
}

/// All variables mentioned by a term, keyed by name.
pub fn term_vars(t: &TermRef) -> BTreeMap<Arc<str>, Arc<VarInfo>> {
    let mut out = BTreeMap::new();
    collect_term_vars(t, &mut out);
    out
}

fn collect_formula_vars(f: &FormulaRef, out: &mut BTreeMap<Arc<str>, Arc<VarInfo>>) {
    match f.as_ref() {
        Formula::True | Formula::False => {}
        Formula::Atom(t) => collect_term_vars(t, out),
        Formula::Cmp { lhs, rhs, .. } => {
            collect_term_vars(lhs, out);
            collect_term_vars(rhs, out);
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
        | Formula::Power { arg: g, .. } => collect_formula_vars(g, out),
        Formula::Or(l, r)
        | Formula::And(l, r)
        | Formula::Until(l, r)
        | Formula::Since(l, r)
        | Formula::Release(l, r) => {
            collect_formula_vars(l, out);
            collect_formula_vars(r, out);
        }
    }
}

fn collect_term_vars(t: &TermRef, out: &mut BTreeMap<Arc<str>, Arc<VarInfo>>) {
    match t.as_ref() {
        Term::Const { .. } => {}
        Term::Var(v) => {
            out.insert(v.name.clone(), v.clone());
        }
        Term::App { lhs, rhs, .. } => {
            collect_term_vars(lhs, out);
            collect_term_vars(rhs, out);
        }
        Term::Next { arg, .. } => collect_term_vars(arg, out),
        Term::AtNext { arg, cond, .. } | Term::AtLast { arg, cond, .. } => {
            collect_term_vars(arg, out);
            collect_formula_vars(cond, out);
        }
        Term::Ite { cond, then_t, else_t, .. } => {
            collect_formula_vars(cond, out);
            collect_term_vars(then_t, out);
            collect_term_vars(else_t, out);
        }
    }
}

/// Whether a desugared formula stays within the core operator set.
pub fn is_desugared(f: &FormulaRef) -> bool {
    match f.as_ref() {
        Formula::True | Formula::False => true,
        Formula::Atom(_) | Formula::Cmp { .. } => true,
        Formula::Not(g) | Formula::Next(g) | Formula::Yesterday(g) => is_desugared(g),
        Formula::Or(l, r) | Formula::Until(l, r) | Formula::Since(l, r) => {
            is_desugared(l) && is_desugared(r)
        }
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::VarInfo;

    fn p() -> FormulaRef {
        Formula::var(VarInfo::bool_output("p"))
    }

    fn q() -> FormulaRef {
        Formula::var(VarInfo::bool_input("q"))
    }

    #[test]
    fn desugar_globally() {
        let g = Formula::globally(p());
        assert_eq!(desugar(&g).to_string(), "!(true U !p)");
        assert!(is_desugared(&desugar(&g)));
    }

    #[test]
    fn desugar_bounded_finally() {
        let f = Formula::bounded(BoundedOp::Finally, 2, p());
        assert_eq!(desugar(&f).to_string(), "p | X p | X X p");
    }

    #[test]
    fn desugar_bounded_historically_uses_weak_yesterday() {
        let h = Formula::bounded(BoundedOp::Historically, 1, p());
        // p & Z p, with both conjunction and weak-yesterday desugared.
        assert_eq!(desugar(&h).to_string(), "!(!p | !!Y !p)");
    }

    #[test]
    fn desugar_power() {
        let x3 = Formula::power(PowerOp::Next, 3, p());
        assert_eq!(desugar(&x3).to_string(), "X X X p");
        let x0 = Formula::power(PowerOp::Next, 0, p());
        assert_eq!(desugar(&x0).to_string(), "p");
    }

    #[test]
    fn nnf_pushes_through_until_and_next() {
        let f = Formula::not(Formula::until(p(), Formula::next(q())));
        assert_eq!(to_nnf(&f).to_string(), "!p R X !q");
    }

    #[test]
    fn nnf_duals_for_past_operators() {
        let f = Formula::not(Formula::yesterday(p()));
        assert_eq!(to_nnf(&f).to_string(), "Z !p");
        let g = Formula::not(Formula::weak_yesterday(p()));
        assert_eq!(to_nnf(&g).to_string(), "Y !p");
    }

    #[test]
    fn nnf_keeps_negation_above_since() {
        let f = Formula::not(Formula::since(p(), Formula::not(Formula::not(q()))));
        assert_eq!(to_nnf(&f).to_string(), "!(p S q)");
    }

    #[test]
    fn nnf_of_derived_ops_roundtrips_through_desugar() {
        let f = Formula::not(Formula::globally(p()));
        // !G p desugars to !!(true U !p) and normalizes to true U !p.
        assert_eq!(to_nnf(&f).to_string(), "true U !p");
        let r = Formula::not(Formula::release(p(), q()));
        assert_eq!(to_nnf(&r).to_string(), "!p U !q");
    }

    #[test]
    fn simplify_folds_units() {
        let f = Formula::or(Formula::ff(), Formula::and(p(), Formula::tt()));
        assert_eq!(simplify(&f).to_string(), "p");
        let g = Formula::not(Formula::not(p()));
        assert_eq!(simplify(&g).to_string(), "p");
        let y = Formula::yesterday(Formula::ff());
        assert_eq!(simplify(&y).to_string(), "false");
    }

    #[test]
    fn substitution_replaces_atoms_everywhere() {
        let end = Formula::var(VarInfo::bool_output("end"));
        let state = Formula::or(
            q(),
            Formula::and(Formula::weak_yesterday(q()), end.clone()),
        );
        let substituted = subst_bool_var(&state, "end", &Formula::ff());
        assert_eq!(simplify(&substituted).to_string(), "q");
    }

    #[test]
    fn vars_are_collected_from_conditions() {
        let t = crate::syntax::Term::at_next(
            crate::syntax::Term::var(VarInfo::bool_output("o")),
            q(),
            None,
        );
        let f = Formula::atom(t);
        let vars = formula_vars(&f);
        assert!(vars.contains_key("o"));
        assert!(vars.contains_key("q"));
    }
}
