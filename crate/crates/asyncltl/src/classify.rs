//! Predicate classification and syntactic stutter tolerance.
//!
//! An atom is an input predicate when its value can depend on data that the
//! last state of a finite trace does not bind: it mentions an input variable
//! at current-position reach, or it contains an at-next or next term
//! anywhere (those read later states). Sub-terms of an at-last read are
//! evaluated strictly in the past, where every state binds its inputs, so an
//! input variable occurring only inside an at-last argument or condition
//! does not make the atom an input predicate; a next or at-next term does
//! even there, because its reads can escape forward past the evaluation
//! position. Truncated semantics guards input predicates one position
//! earlier than output predicates, because the last state of a finite trace
//! binds outputs only.
//!
//! Syntactic stutter tolerance is the fragment whose rewriting may skip the
//! stuttering guards: disjunctions and negations of tolerant formulas,
//! output predicates, any until or yesterday, and terms built from output
//! variables, constants, arithmetic, tolerant conditionals, and at-last
//! reads. It is checked on desugared formulas (conjunction is treated as a
//! negated disjunction).

use crate::syntax::{Formula, IoClass, Term};

/// Whether an atom is guarded as an input or output predicate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredClass {
    Input,
    Output,
}

/// Classifies an atom (`Formula::Atom` or `Formula::Cmp`). `true` and
/// `false` classify as output predicates; other formula nodes are not atoms
/// and panic.
pub fn predicate_class(atom: &Formula) -> PredClass {
    let input = match atom {
        Formula::True | Formula::False => false,
        Formula::Atom(t) => term_mentions_input(t),
        Formula::Cmp { lhs, rhs, .. } => term_mentions_input(lhs) || term_mentions_input(rhs),
        other => panic!("predicate_class expects an atom, got {other}"),
    };
    if input {
        PredClass::Input
    } else {
        PredClass::Output
    }
}

fn term_mentions_input(t: &Term) -> bool {
    match t {
        Term::Const { .. } => false,
        Term::Var(v) => v.io == IoClass::Input,
        Term::App { lhs, rhs, .. } => term_mentions_input(lhs) || term_mentions_input(rhs),
        Term::Next { .. } | Term::AtNext { .. } => true,
        Term::AtLast { arg, cond, .. } => {
            term_has_future_read(arg) || formula_has_future_read(cond)
        }
        Term::Ite { cond, then_t, else_t, .. } => {
            formula_mentions_input(cond)
                || term_mentions_input(then_t)
                || term_mentions_input(else_t)
        }
    }
}

fn term_has_future_read(t: &Term) -> bool {
    match t {
        Term::Const { .. } | Term::Var(_) => false,
        Term::App { lhs, rhs, .. } => term_has_future_read(lhs) || term_has_future_read(rhs),
        Term::Next { .. } | Term::AtNext { .. } => true,
        Term::AtLast { arg, cond, .. } => {
            term_has_future_read(arg) || formula_has_future_read(cond)
        }
        Term::Ite { cond, then_t, else_t, .. } => {
            formula_has_future_read(cond)
                || term_has_future_read(then_t)
                || term_has_future_read(else_t)
        }
    }
}

fn formula_has_future_read(f: &Formula) -> bool {
    match f {
        Formula::True | Formula::False => false,
        Formula::Atom(t) => term_has_future_read(t),
        Formula::Cmp { lhs, rhs, .. } => term_has_future_read(lhs) || term_has_future_read(rhs),
        Formula::Not(g)
        | Formula::Next(g)
        | Formula::Yesterday(g)
        | Formula::Finally(g)
        | Formula::Globally(g)
        | Formula::Once(g)
        | Formula::Historically(g)
        | Formula::WeakYesterday(g)
        | Formula::Bounded { arg: g, .. }
        | Formula::Power { arg: g, .. } => formula_has_future_read(g),
        Formula::Or(l, r)
        | Formula::And(l, r)
        | Formula::Until(l, r)
        | Formula::Since(l, r)
        | Formula::Release(l, r) => formula_has_future_read(l) || formula_has_future_read(r),
    }
}

fn formula_mentions_input(f: &Formula) -> bool {
    match f {
        Formula::True | Formula::False => false,
        Formula::Atom(t) => term_mentions_input(t),
        Formula::Cmp { lhs, rhs, .. } => term_mentions_input(lhs) || term_mentions_input(rhs),
        Formula::Not(g)
        | Formula::Next(g)
        | Formula::Yesterday(g)
        | Formula::Finally(g)
        | Formula::Globally(g)
        | Formula::Once(g)
        | Formula::Historically(g)
        | Formula::WeakYesterday(g)
        | Formula::Bounded { arg: g, .. }
        | Formula::Power { arg: g, .. } => formula_mentions_input(g),
        Formula::Or(l, r)
        | Formula::And(l, r)
        | Formula::Until(l, r)
        | Formula::Since(l, r)
        | Formula::Release(l, r) => formula_mentions_input(l) || formula_mentions_input(r),
    }
}

/// Whether a desugared formula is syntactically stutter tolerant.
///
/// Grammar: tolerant disjunction/negation, output predicates over tolerant
/// terms, until and yesterday over arbitrary operands. Conjunction counts as
/// the desugared negated disjunction of negations.
pub fn is_syntactically_stutter_tolerant(f: &Formula) -> bool {
    match f {
        Formula::True | Formula::False => true,
        Formula::Atom(t) => {
            predicate_class(f) == PredClass::Output && is_stutter_tolerant_term(t)
        }
        Formula::Cmp { lhs, rhs, .. } => {
            predicate_class(f) == PredClass::Output
                && is_stutter_tolerant_term(lhs)
                && is_stutter_tolerant_term(rhs)
        }
        Formula::Not(g) => is_syntactically_stutter_tolerant(g),
        Formula::Or(l, r) | Formula::And(l, r) => {
            is_syntactically_stutter_tolerant(l) && is_syntactically_stutter_tolerant(r)
        }
        Formula::Until(_, _) | Formula::Yesterday(_) => true,
        _ => false,
    }
}

/// Whether a term is syntactically stutter tolerant: output variables,
/// constants, arithmetic over tolerant terms, conditionals with tolerant
/// condition and branches, and any at-last read.
pub fn is_stutter_tolerant_term(t: &Term) -> bool {
    match t {
        Term::Const { .. } => true,
        Term::Var(v) => v.io == IoClass::Output,
        Term::App { lhs, rhs, .. } => {
            is_stutter_tolerant_term(lhs) && is_stutter_tolerant_term(rhs)
        }
        Term::Next { .. } | Term::AtNext { .. } => false,
        Term::AtLast { .. } => true,
        Term::Ite { cond, then_t, else_t, .. } => {
            is_syntactically_stutter_tolerant(cond)
                && is_stutter_tolerant_term(then_t)
                && is_stutter_tolerant_term(else_t)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{CmpOp, Formula, Term, VarInfo};

    fn inp() -> crate::syntax::TermRef {
        Term::var(VarInfo::bool_input("i"))
    }

    fn out() -> crate::syntax::TermRef {
        Term::var(VarInfo::bool_output("o"))
    }

    #[test]
    fn input_variable_anywhere_makes_input_pred() {
        assert_eq!(predicate_class(&Formula::Atom(inp())), PredClass::Input);
        assert_eq!(predicate_class(&Formula::Atom(out())), PredClass::Output);
        let mixed = Formula::cmp(CmpOp::Eq, out(), inp());
        assert_eq!(predicate_class(&mixed), PredClass::Input);
    }

    #[test]
    fn next_and_at_next_force_input_class() {
        let nxt = Formula::atom(Term::next(out(), None));
        assert_eq!(predicate_class(&nxt), PredClass::Input);
        let atn = Formula::atom(Term::at_next(out(), Formula::tt(), None));
        assert_eq!(predicate_class(&atn), PredClass::Input);
    }

    #[test]
    fn at_last_and_ite_alone_stay_output_class() {
        let atl = Formula::atom(Term::at_last(out(), Formula::atom(out()), None));
        assert_eq!(predicate_class(&atl), PredClass::Output);
        let ite = Formula::atom(Term::ite(Formula::atom(out()), out(), out(), None));
        assert_eq!(predicate_class(&ite), PredClass::Output);
    }

    #[test]
    fn at_last_shields_input_reads_but_not_future_reads() {
        // Everything under an at-last is read strictly in the past, where
        // inputs are bound, so input variables there do not taint the atom.
        let past_input_arg = Formula::atom(Term::at_last(inp(), Formula::tt(), None));
        assert_eq!(predicate_class(&past_input_arg), PredClass::Output);
        let past_input_cond = Formula::atom(Term::at_last(out(), Formula::atom(inp()), None));
        assert_eq!(predicate_class(&past_input_cond), PredClass::Output);
        // Next and at-next reads can escape forward even from inside an
        // at-last, so they taint from any depth.
        let future_arg = Formula::atom(Term::at_last(Term::next(out(), None), Formula::tt(), None));
        assert_eq!(predicate_class(&future_arg), PredClass::Input);
        let future_cond = Formula::atom(Term::at_last(
            out(),
            Formula::atom(Term::at_next(out(), Formula::tt(), None)),
            None,
        ));
        assert_eq!(predicate_class(&future_cond), PredClass::Input);
        // An input variable outside the at-last still taints.
        let outside = Formula::cmp(CmpOp::Eq, Term::at_last(out(), Formula::tt(), None), inp());
        assert_eq!(predicate_class(&outside), PredClass::Input);
    }

    #[test]
    fn tolerance_grammar_core() {
        let o = Formula::atom(out());
        let i = Formula::atom(inp());
        assert!(is_syntactically_stutter_tolerant(&o));
        assert!(!is_syntactically_stutter_tolerant(&i));
        assert!(is_syntactically_stutter_tolerant(&Formula::not(o.clone())));
        assert!(is_syntactically_stutter_tolerant(&Formula::or(o.clone(), o.clone())));
        assert!(!is_syntactically_stutter_tolerant(&Formula::or(o.clone(), i.clone())));
        // Until and yesterday admit arbitrary operands.
        assert!(is_syntactically_stutter_tolerant(&Formula::until(i.clone(), i.clone())));
        assert!(is_syntactically_stutter_tolerant(&Formula::yesterday(i.clone())));
        // Next does not.
        assert!(!is_syntactically_stutter_tolerant(&Formula::next(o.clone())));
        // Conjunction behaves like the desugared disjunction.
        assert!(is_syntactically_stutter_tolerant(&Formula::and(o.clone(), o.clone())));
        assert!(!is_syntactically_stutter_tolerant(&Formula::and(o, i)));
    }

    #[test]
    fn tolerant_atoms_require_tolerant_terms() {
        // Output-classified is necessary but not sufficient: the predicate's
        // terms must come from the tolerant term grammar. A conditional whose
        // condition looks ahead mentions no input variable yet is sensitive
        // to stuttering.
        let temporal_cond = Formula::atom(Term::ite(
            Formula::next(Formula::atom(out())),
            out(),
            out(),
            None,
        ));
        assert_eq!(predicate_class(&temporal_cond), PredClass::Output);
        assert!(!is_syntactically_stutter_tolerant(&temporal_cond));
        // At-last reads are tolerant with arbitrary payloads, even input ones.
        let past_read = Formula::atom(Term::at_last(inp(), Formula::atom(inp()), None));
        assert!(is_syntactically_stutter_tolerant(&past_read));
    }

    #[test]
    fn tolerant_terms() {
        assert!(is_stutter_tolerant_term(&out()));
        assert!(!is_stutter_tolerant_term(&inp()));
        assert!(!is_stutter_tolerant_term(&Term::next(out(), None)));
        assert!(!is_stutter_tolerant_term(&Term::at_next(out(), Formula::tt(), None)));
        // At-last reads are tolerant whatever their payload or condition.
        assert!(is_stutter_tolerant_term(&Term::at_last(
            inp(),
            Formula::atom(inp()),
            None
        )));
        assert!(is_stutter_tolerant_term(&Term::ite(
            Formula::atom(out()),
            out(),
            Term::bool_const(false),
            None
        )));
        assert!(!is_stutter_tolerant_term(&Term::ite(
            Formula::atom(inp()),
            out(),
            out(),
            None
        )));
    }
}
