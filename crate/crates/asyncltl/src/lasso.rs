//! Standard LTL over lasso traces.
//!
//! A lasso denotes an infinite word, so no truncation applies: every
//! predicate is determinate at every position and the weak and strong views
//! coincide. The evaluator assigns each subformula an ultimately periodic
//! boolean sequence sharing the trace's period; future operators scan at
//! most one period past the point where every operand has become periodic,
//! past operators run their forward recurrences until the per-cycle
//! transfer function stabilizes (it is constant or the identity, so one
//! extra cycle suffices, and a third is checked).
//!
//! [`brute_eval_lasso`] is an independent cross-check: plain recursion over
//! a long explicit prefix with sound defaults for undecided scans.

use crate::sort::Value;
use crate::syntax::{BoundedOp, Formula, FormulaRef, PowerOp, Term, TermRef};
use crate::trace::{LassoTrace, Trace};
use std::collections::HashMap;
use std::sync::Arc;

/// An ultimately periodic sequence: `stem` followed by `cycle` forever.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UpSeq<T> {
    stem: Vec<T>,
    cycle: Vec<T>,
}

impl<T: Clone> UpSeq<T> {
    pub fn new(stem: Vec<T>, cycle: Vec<T>) -> UpSeq<T> {
        assert!(!cycle.is_empty(), "periodic part must be non-empty");
        UpSeq { stem, cycle }
    }

    /// Builds a sequence of the given shape from a position function. The
    /// caller guarantees `f(i) == f(i + period)` for `i >= stem_len`.
    pub fn build(stem_len: usize, period: usize, mut f: impl FnMut(usize) -> T) -> UpSeq<T> {
        let stem = (0..stem_len).map(&mut f).collect();
        let cycle = (stem_len..stem_len + period).map(&mut f).collect();
        UpSeq::new(stem, cycle)
    }

    pub fn at(&self, i: usize) -> &T {
        if i < self.stem.len() {
            &self.stem[i]
        } else {
            &self.cycle[(i - self.stem.len()) % self.cycle.len()]
        }
    }

    pub fn stem_len(&self) -> usize {
        self.stem.len()
    }

    pub fn period(&self) -> usize {
        self.cycle.len()
    }

    pub fn stem(&self) -> &[T] {
        &self.stem
    }

    pub fn cycle(&self) -> &[T] {
        &self.cycle
    }
}

impl UpSeq<bool> {
    fn get(&self, i: usize) -> bool {
        *self.at(i)
    }
}

/// Structural evaluator producing one ultimately periodic sequence per
/// subformula and term node.
pub struct LassoEvaluator<'a> {
    trace: &'a LassoTrace,
    fmemo: HashMap<usize, UpSeq<bool>>,
    tmemo: HashMap<usize, UpSeq<Value>>,
}

impl<'a> LassoEvaluator<'a> {
    pub fn new(trace: &'a LassoTrace) -> LassoEvaluator<'a> {
        LassoEvaluator { trace, fmemo: HashMap::new(), tmemo: HashMap::new() }
    }

    /// The truth sequence of `f` along the trace.
    pub fn seq(&mut self, f: &FormulaRef) -> UpSeq<bool> {
        let key = Arc::as_ptr(f) as usize;
        if let Some(s) = self.fmemo.get(&key) {
            return s.clone();
        }
        let s = self.seq_uncached(f);
        self.fmemo.insert(key, s.clone());
        s
    }

    fn period(&self) -> usize {
        self.trace.loop_len()
    }

    fn seq_uncached(&mut self, f: &FormulaRef) -> UpSeq<bool> {
        let p = self.period();
        let base = self.trace.stem_len();
        match f.as_ref() {
            Formula::True => UpSeq::build(base, p, |_| true),
            Formula::False => UpSeq::build(base, p, |_| false),
            Formula::Atom(t) => {
                let row = self.term_seq(t);
                UpSeq::build(row.stem_len(), p, |i| row.at(i).as_bool())
            }
            Formula::Cmp { op, lhs, rhs } => {
                let a = self.term_seq(lhs);
                let b = self.term_seq(rhs);
                let s = a.stem_len().max(b.stem_len());
                UpSeq::build(s, p, |i| op.apply(a.at(i), b.at(i)))
            }
            Formula::Not(g) => {
                let c = self.seq(g);
                UpSeq::build(c.stem_len(), p, |i| !c.get(i))
            }
            Formula::Or(l, r) => {
                let (a, b) = (self.seq(l), self.seq(r));
                UpSeq::build(a.stem_len().max(b.stem_len()), p, |i| a.get(i) || b.get(i))
            }
            Formula::And(l, r) => {
                let (a, b) = (self.seq(l), self.seq(r));
                UpSeq::build(a.stem_len().max(b.stem_len()), p, |i| a.get(i) && b.get(i))
            }
            Formula::Next(g) => {
                let c = self.seq(g);
                UpSeq::build(c.stem_len(), p, |i| c.get(i + 1))
            }
            Formula::Until(l, r) => {
                let (a, b) = (self.seq(l), self.seq(r));
                let s = a.stem_len().max(b.stem_len());
                UpSeq::build(s, p, |i| until_at(&a, &b, i, s, p))
            }
            Formula::Release(l, r) => {
                let (a, b) = (self.seq(l), self.seq(r));
                let s = a.stem_len().max(b.stem_len());
                // No position violating the right operand before the left
                // has held alongside it; an undecided full cycle means the
                // right operand holds forever.
                UpSeq::build(s, p, |i| {
                    let horizon = i.max(s) + p;
                    for k in i..=horizon {
                        if !b.get(k) {
                            return false;
                        }
                        if a.get(k) {
                            return true;
                        }
                    }
                    true
                })
            }
            Formula::Finally(g) => {
                let c = self.seq(g);
                let s = c.stem_len();
                UpSeq::build(s, p, |i| (i..i.max(s) + p).any(|k| c.get(k)))
            }
            Formula::Globally(g) => {
                let c = self.seq(g);
                let s = c.stem_len();
                UpSeq::build(s, p, |i| (i..i.max(s) + p).all(|k| c.get(k)))
            }
            Formula::Yesterday(g) => {
                let c = self.seq(g);
                UpSeq::build(c.stem_len() + 1, p, |i| i > 0 && c.get(i - 1))
            }
            Formula::WeakYesterday(g) => {
                let c = self.seq(g);
                UpSeq::build(c.stem_len() + 1, p, |i| i == 0 || c.get(i - 1))
            }
            Formula::Since(l, r) => {
                let (a, b) = (self.seq(l), self.seq(r));
                let s = a.stem_len().max(b.stem_len());
                stabilized_forward(s, p, false, |prev, i| b.get(i) || (a.get(i) && prev))
            }
            Formula::Once(g) => {
                let c = self.seq(g);
                stabilized_forward(c.stem_len(), p, false, |prev, i| c.get(i) || prev)
            }
            Formula::Historically(g) => {
                let c = self.seq(g);
                stabilized_forward(c.stem_len(), p, true, |prev, i| c.get(i) && prev)
            }
            Formula::Bounded { op, n, arg } => {
                let c = self.seq(arg);
                let s = c.stem_len();
                let n = *n as usize;
                match op {
                    BoundedOp::Finally => {
                        UpSeq::build(s, p, |i| (0..=n).any(|d| c.get(i + d)))
                    }
                    BoundedOp::Globally => {
                        UpSeq::build(s, p, |i| (0..=n).all(|d| c.get(i + d)))
                    }
                    BoundedOp::Once => UpSeq::build(s + n, p, |i| {
                        (0..=n.min(i)).any(|d| c.get(i - d))
                    }),
                    BoundedOp::Historically => UpSeq::build(s + n, p, |i| {
                        (0..=n).all(|d| d > i || c.get(i - d))
                    }),
                }
            }
            Formula::Power { op, n, arg } => {
                let c = self.seq(arg);
                let s = c.stem_len();
                let n = *n as usize;
                match op {
                    PowerOp::Next => UpSeq::build(s, p, |i| c.get(i + n)),
                    PowerOp::Yesterday => {
                        UpSeq::build(s + n, p, |i| i >= n && c.get(i - n))
                    }
                    PowerOp::WeakYesterday => {
                        UpSeq::build(s + n, p, |i| i < n || c.get(i - n))
                    }
                }
            }
        }
    }

    /// The value sequence of a term along the trace. Defaults only arise
    /// from blocked conditional reads; plain next always has a successor.
    pub fn term_seq(&mut self, t: &TermRef) -> UpSeq<Value> {
        let key = Arc::as_ptr(t) as usize;
        if let Some(s) = self.tmemo.get(&key) {
            return s.clone();
        }
        let s = self.term_seq_uncached(t);
        self.tmemo.insert(key, s.clone());
        s
    }

    fn term_seq_uncached(&mut self, t: &TermRef) -> UpSeq<Value> {
        let p = self.period();
        let base = self.trace.stem_len();
        match t.as_ref() {
            Term::Const { value, .. } => UpSeq::build(base, p, |_| value.clone()),
            Term::Var(v) => {
                let slot = self
                    .trace
                    .vocab
                    .index_of(&v.name)
                    .unwrap_or_else(|| panic!("trace vocabulary lacks variable {}", v.name));
                UpSeq::build(base, p, |i| self.trace.value(i, slot).clone())
            }
            Term::App { op, lhs, rhs } => {
                let (a, b) = (self.term_seq(lhs), self.term_seq(rhs));
                let s = a.stem_len().max(b.stem_len());
                UpSeq::build(s, p, |i| Value::Int(op.apply(a.at(i).as_int(), b.at(i).as_int())))
            }
            Term::Next { arg, .. } => {
                let c = self.term_seq(arg);
                UpSeq::build(c.stem_len(), p, |i| c.at(i + 1).clone())
            }
            Term::AtNext { arg, cond, .. } => {
                let u = self.term_seq(arg);
                let c = self.seq(cond);
                let s = u.stem_len().max(c.stem_len());
                let default = node_default(t);
                UpSeq::build(s, p, |i| {
                    let horizon = (i + 1).max(s) + p;
                    for k in (i + 1)..=horizon {
                        if c.get(k) {
                            return u.at(k).clone();
                        }
                    }
                    default.clone()
                })
            }
            Term::AtLast { arg, cond, .. } => {
                let u = self.term_seq(arg);
                let c = self.seq(cond);
                let s = u.stem_len().max(c.stem_len());
                let default = node_default(t);
                // Forward register: the last conditioned value seen so far.
                let mut window: Vec<Value> = Vec::with_capacity(s + 3 * p + 1);
                let mut reg = default.clone();
                for i in 0..s + 3 * p {
                    window.push(reg.clone());
                    if c.get(i) {
                        reg = u.at(i).clone();
                    }
                }
                assert_stabilized(&window, s + p, p);
                UpSeq::new(window[..s + p].to_vec(), window[s + p..s + 2 * p].to_vec())
            }
            Term::Ite { cond, then_t, else_t, .. } => {
                let c = self.seq(cond);
                let (a, b) = (self.term_seq(then_t), self.term_seq(else_t));
                let s = c.stem_len().max(a.stem_len()).max(b.stem_len());
                UpSeq::build(s, p, |i| {
                    if c.get(i) { a.at(i).clone() } else { b.at(i).clone() }
                })
            }
        }
    }
}

fn until_at(a: &UpSeq<bool>, b: &UpSeq<bool>, i: usize, stem: usize, p: usize) -> bool {
    // Decide by the first witness or first failure; a full undecided cycle
    // past the common stem proves there is no witness at all.
    let horizon = i.max(stem) + p;
    for k in i..=horizon {
        if b.get(k) {
            return true;
        }
        if !a.get(k) {
            return false;
        }
    }
    false
}

/// Runs a forward recurrence over three cycles past the operand stem,
/// asserts the last two agree, and keeps one of them as the cycle. The
/// per-cycle transfer of such recurrences is constant or the identity, so
/// the window is always long enough.
fn stabilized_forward(
    stem: usize,
    p: usize,
    init: bool,
    mut step: impl FnMut(bool, usize) -> bool,
) -> UpSeq<bool> {
    let total = stem + 3 * p;
    let mut window = Vec::with_capacity(total);
    let mut value = init;
    for i in 0..total {
        value = step(value, i);
        window.push(value);
    }
    assert_stabilized(&window, stem + p, p);
    UpSeq::new(window[..stem + p].to_vec(), window[stem + p..stem + 2 * p].to_vec())
}

fn assert_stabilized<T: PartialEq + std::fmt::Debug>(window: &[T], from: usize, p: usize) {
    for j in 0..p {
        assert_eq!(
            window[from + j],
            window[from + p + j],
            "periodic recurrence failed to stabilize at offset {j}"
        );
    }
}

fn node_default(t: &Term) -> Value {
    t.effective_default().expect("state-crossing nodes have a default")
}

/// The truth sequence of `f` over the infinite word the lasso denotes.
pub fn eval_ltl_lasso(trace: &LassoTrace, f: &FormulaRef) -> UpSeq<bool> {
    LassoEvaluator::new(trace).seq(f)
}

/// Whether the infinite word satisfies the formula at the origin.
pub fn holds_lasso(trace: &LassoTrace, f: &FormulaRef) -> bool {
    *eval_ltl_lasso(trace, f).at(0)
}

/// Satisfaction for either trace kind: weak truncated at the origin for a
/// finite trace, standard semantics for a lasso.
pub fn holds(trace: &Trace, f: &FormulaRef) -> bool {
    match trace {
        Trace::Finite(t) => crate::eval::holds_weak(t, f),
        Trace::Lasso(t) => holds_lasso(t, f),
    }
}

/// Cross-check evaluator: recursion over a long explicit prefix. Future
/// scans that stay undecided at the horizon resolve soundly (no witness for
/// until and finally, no violation for release and globally) because the
/// horizon exceeds every operand's stem by a full cycle.
pub struct BruteLasso<'a> {
    trace: &'a LassoTrace,
    horizon: usize,
    fmemo: HashMap<(usize, usize), bool>,
    tmemo: HashMap<(usize, usize), Value>,
}

impl<'a> BruteLasso<'a> {
    pub fn new(trace: &'a LassoTrace, f: &FormulaRef) -> BruteLasso<'a> {
        let nodes = f.size();
        let horizon = trace.stem_len() + (nodes + 2) * trace.loop_len();
        BruteLasso { trace, horizon, fmemo: HashMap::new(), tmemo: HashMap::new() }
    }

    pub fn eval(&mut self, f: &FormulaRef, i: usize) -> bool {
        let key = (Arc::as_ptr(f) as usize, i);
        if let Some(&v) = self.fmemo.get(&key) {
            return v;
        }
        let v = self.eval_uncached(f, i);
        self.fmemo.insert(key, v);
        v
    }

    fn eval_uncached(&mut self, f: &FormulaRef, i: usize) -> bool {
        match f.as_ref() {
            Formula::True => true,
            Formula::False => false,
            Formula::Atom(t) => self.term(t, i).as_bool(),
            Formula::Cmp { op, lhs, rhs } => {
                let (a, b) = (self.term(lhs, i), self.term(rhs, i));
                op.apply(&a, &b)
            }
            Formula::Not(g) => !self.eval(g, i),
            Formula::Or(l, r) => self.eval(l, i) || self.eval(r, i),
            Formula::And(l, r) => self.eval(l, i) && self.eval(r, i),
            Formula::Next(g) => self.eval(g, i + 1),
            Formula::Until(l, r) => {
                for k in i..=self.horizon {
                    if self.eval(r, k) {
                        return true;
                    }
                    if !self.eval(l, k) {
                        return false;
                    }
                }
                false
            }
            Formula::Release(l, r) => {
                for k in i..=self.horizon {
                    if !self.eval(r, k) {
                        return false;
                    }
                    if self.eval(l, k) {
                        return true;
                    }
                }
                true
            }
            Formula::Finally(g) => (i..=self.horizon).any(|k| self.eval(g, k)),
            Formula::Globally(g) => (i..=self.horizon).all(|k| self.eval(g, k)),
            Formula::Yesterday(g) => i > 0 && self.eval(g, i - 1),
            Formula::WeakYesterday(g) => i == 0 || self.eval(g, i - 1),
            Formula::Since(l, r) => {
                for k in (0..=i).rev() {
                    if self.eval(r, k) {
                        return true;
                    }
                    if !self.eval(l, k) {
                        return false;
                    }
                }
                false
            }
            Formula::Once(g) => (0..=i).any(|k| self.eval(g, k)),
            Formula::Historically(g) => (0..=i).all(|k| self.eval(g, k)),
            Formula::Bounded { op, n, arg } => {
                let n = *n as usize;
                match op {
                    BoundedOp::Finally => (0..=n).any(|d| self.eval(arg, i + d)),
                    BoundedOp::Globally => (0..=n).all(|d| self.eval(arg, i + d)),
                    BoundedOp::Once => (0..=n.min(i)).any(|d| self.eval(arg, i - d)),
                    BoundedOp::Historically => {
                        (0..=n).all(|d| d > i || self.eval(arg, i - d))
                    }
                }
            }
            Formula::Power { op, n, arg } => {
                let n = *n as usize;
                match op {
                    PowerOp::Next => self.eval(arg, i + n),
                    PowerOp::Yesterday => i >= n && self.eval(arg, i - n),
                    PowerOp::WeakYesterday => i < n || self.eval(arg, i - n),
                }
            }
        }
    }

    pub fn term(&mut self, t: &TermRef, i: usize) -> Value {
        let key = (Arc::as_ptr(t) as usize, i);
        if let Some(v) = self.tmemo.get(&key) {
            return v.clone();
        }
        let v = self.term_uncached(t, i);
        self.tmemo.insert(key, v.clone());
        v
    }

    fn term_uncached(&mut self, t: &TermRef, i: usize) -> Value {
        match t.as_ref() {
            Term::Const { value, .. } => value.clone(),
            Term::Var(v) => {
                let slot = self
                    .trace
                    .vocab
                    .index_of(&v.name)
                    .unwrap_or_else(|| panic!("trace vocabulary lacks variable {}", v.name));
                self.trace.value(i, slot).clone()
            }
            Term::App { op, lhs, rhs } => {
                let (a, b) = (self.term(lhs, i).as_int(), self.term(rhs, i).as_int());
                Value::Int(op.apply(a, b))
            }
            Term::Next { arg, .. } => self.term(arg, i + 1),
            Term::AtNext { arg, cond, .. } => {
                for k in (i + 1)..=self.horizon {
                    if self.eval(cond, k) {
                        return self.term(arg, k);
                    }
                }
                node_default(t)
            }
            Term::AtLast { arg, cond, .. } => {
                for k in (0..i).rev() {
                    if self.eval(cond, k) {
                        return self.term(arg, k);
                    }
                }
                node_default(t)
            }
            Term::Ite { cond, then_t, else_t, .. } => {
                if self.eval(cond, i) {
                    self.term(then_t, i)
                } else {
                    self.term(else_t, i)
                }
            }
        }
    }
}

/// One-shot brute evaluation at a position.
pub fn brute_eval_lasso(trace: &LassoTrace, f: &FormulaRef, i: usize) -> bool {
    BruteLasso::new(trace, f).eval(f, i)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sort::Sort;
    use crate::syntax::{CmpOp, Formula, IoClass, VarInfo};
    use crate::trace::Vocab;

    fn b(v: bool) -> Value {
        Value::Bool(v)
    }

    fn bool_lasso(stem: &[(bool, bool)], cycle: &[(bool, bool)]) -> LassoTrace {
        let v = Vocab::new(vec![VarInfo::bool_input("i"), VarInfo::bool_output("o")]).unwrap();
        let mk = |&(iv, ov): &(bool, bool)| v.state(&[("i", b(iv)), ("o", b(ov))]).unwrap();
        LassoTrace::new(v.clone(), stem.iter().map(mk).collect(), cycle.iter().map(mk).collect())
            .unwrap()
    }

    fn ivar() -> FormulaRef {
        Formula::var(VarInfo::bool_input("i"))
    }

    fn ovar() -> FormulaRef {
        Formula::var(VarInfo::bool_output("o"))
    }

    fn agree(t: &LassoTrace, f: &FormulaRef, i: usize) -> bool {
        let algebra = *eval_ltl_lasso(t, f).at(i);
        let brute = brute_eval_lasso(t, f, i);
        assert_eq!(algebra, brute, "evaluators disagree on {f} at {i}");
        algebra
    }

    #[test]
    fn globally_and_finally_on_the_cycle() {
        // o false in the stem, true forever after.
        let t = bool_lasso(&[(false, false)], &[(false, true)]);
        assert!(agree(&t, &Formula::finally(ovar()), 0));
        assert!(!agree(&t, &Formula::globally(ovar()), 0));
        assert!(agree(&t, &Formula::globally(ovar()), 1));
        let gf = Formula::globally(Formula::finally(ovar()));
        assert!(agree(&t, &gf, 0));
    }

    #[test]
    fn until_needs_a_witness_in_the_cycle() {
        // o never holds: until must be false even though i always holds.
        let t = bool_lasso(&[], &[(true, false)]);
        assert!(!agree(&t, &Formula::until(ivar(), ovar()), 0));
        // A witness in the second cycle slot.
        let t2 = bool_lasso(&[], &[(true, false), (true, true)]);
        assert!(agree(&t2, &Formula::until(ivar(), ovar()), 0));
        assert!(agree(&t2, &Formula::until(ivar(), ovar()), 1));
    }

    #[test]
    fn release_distinguishes_forever_from_released() {
        let t = bool_lasso(&[], &[(false, true)]);
        // o holds forever: anything releases into it.
        assert!(agree(&t, &Formula::release(ivar(), ovar()), 0));
        let t2 = bool_lasso(&[(false, true)], &[(false, false)]);
        assert!(!agree(&t2, &Formula::release(ivar(), ovar()), 0));
    }

    #[test]
    fn past_operators_stabilize_on_the_cycle() {
        // o true once in the stem only.
        let t = bool_lasso(&[(false, true)], &[(false, false), (true, false)]);
        let once = Formula::once(ovar());
        for i in 0..8 {
            assert!(agree(&t, &once, i));
        }
        let hist = Formula::historically(Formula::not(ivar()));
        assert!(agree(&t, &hist, 0));
        assert!(agree(&t, &hist, 1));
        assert!(!agree(&t, &hist, 2));
        assert!(!agree(&t, &hist, 9));
        let since = Formula::since(Formula::not(ivar()), ovar());
        assert!(agree(&t, &since, 1));
        assert!(!agree(&t, &since, 2));
    }

    #[test]
    fn yesterday_extends_the_stem() {
        // Y o at the first cycle position differs between visits only if
        // the sequence were read naively; the stem extension keeps it exact.
        let t = bool_lasso(&[(false, true)], &[(false, false), (false, true)]);
        let y = Formula::yesterday(ovar());
        // o along the word: T, F, T, F, T, ...
        let expected = [false, true, false, true, false, true, false, true];
        for (i, &e) in expected.iter().enumerate() {
            assert_eq!(agree(&t, &y, i), e, "at {i}");
        }
        assert!(agree(&t, &Formula::weak_yesterday(ovar()), 0));
    }

    #[test]
    fn terms_and_conditional_reads_on_lassos() {
        let x = VarInfo::new("x", Sort::int(0, 3), IoClass::Output);
        let flag = VarInfo::bool_output("f");
        let v = Vocab::new(vec![x.clone(), flag.clone()]).unwrap();
        let s = |n: i64, fv: bool| {
            v.state(&[("x", Value::Int(n)), ("f", b(fv))]).unwrap()
        };
        let t = LassoTrace::new(
            v.clone(),
            vec![s(1, false)],
            vec![s(2, true), s(3, false)],
        )
        .unwrap();
        let fatom = Formula::var(flag);
        // next(x) at 0 reads the first cycle state.
        let nx = Formula::cmp(
            CmpOp::Eq,
            Term::next(Term::var(x.clone()), None),
            Term::int_const(2),
        );
        assert!(agree(&t, &nx, 0));
        // x at the next f-state, read from 1: f holds at 1? yes, value 2.
        let at = Term::at_next(Term::var(x.clone()), fatom.clone(), None);
        let mut ev = LassoEvaluator::new(&t);
        assert_eq!(ev.term_seq(&at).at(0).clone(), Value::Int(2));
        // From position 1 the next f-state is position 3 (cycle repeat).
        assert_eq!(ev.term_seq(&at).at(1).clone(), Value::Int(2));
        // at-last before any f-state defaults to the sort minimum.
        let back = Term::at_last(Term::var(x), fatom, None);
        assert_eq!(ev.term_seq(&back).at(0).clone(), Value::Int(0));
        assert_eq!(ev.term_seq(&back).at(2).clone(), Value::Int(2));
    }

    #[test]
    fn never_satisfied_conditions_fall_to_defaults() {
        let t = bool_lasso(&[], &[(true, true)]);
        let o = crate::syntax::Term::var(VarInfo::bool_output("o"));
        let at = Term::at_next(o, Formula::ff(), Some(b(true)));
        let mut ev = LassoEvaluator::new(&t);
        assert_eq!(ev.term_seq(&at).at(0).clone(), b(true));
        let mut brute = BruteLasso::new(&t, &Formula::tt());
        assert_eq!(brute.term(&at, 0), b(true));
    }

    #[test]
    fn bounded_and_power_operators_on_lassos() {
        let t = bool_lasso(&[(false, false)], &[(false, true), (false, false)]);
        let f1 = Formula::bounded(BoundedOp::Finally, 1, ovar());
        assert!(agree(&t, &f1, 0));
        let g2 = Formula::bounded(BoundedOp::Globally, 2, Formula::not(ovar()));
        assert!(!agree(&t, &g2, 0));
        let x3 = Formula::power(PowerOp::Next, 3, ovar());
        assert!(agree(&t, &x3, 0));
        let o1 = Formula::bounded(BoundedOp::Once, 1, ovar());
        assert!(agree(&t, &o1, 2));
        assert!(agree(&t, &o1, 1));
        let y2 = Formula::power(PowerOp::Yesterday, 2, ovar());
        assert!(!agree(&t, &y2, 1));
        assert!(agree(&t, &y2, 3));
    }

    #[test]
    fn holds_dispatches_by_trace_kind() {
        let t = bool_lasso(&[], &[(false, true)]);
        assert!(holds_lasso(&t, &Formula::globally(ovar())));
        let tr = Trace::Lasso(t);
        assert!(holds(&tr, &Formula::globally(ovar())));
    }

    #[test]
    fn differential_over_small_formula_pool() {
        let t = bool_lasso(&[(true, false), (false, true)], &[(true, true), (false, false)]);
        let atoms = [Formula::tt(), ivar(), ovar()];
        let mut pool: Vec<FormulaRef> = atoms.to_vec();
        for a in &atoms {
            for bf in &atoms {
                pool.push(Formula::until(a.clone(), bf.clone()));
                pool.push(Formula::since(a.clone(), bf.clone()));
                pool.push(Formula::release(a.clone(), bf.clone()));
                pool.push(Formula::or(Formula::not(a.clone()), bf.clone()));
            }
            pool.push(Formula::next(a.clone()));
            pool.push(Formula::yesterday(a.clone()));
            pool.push(Formula::globally(Formula::finally(a.clone())));
            pool.push(Formula::historically(a.clone()));
        }
        for f in &pool {
            for i in 0..9 {
                agree(&t, f, i);
            }
        }
    }
}
