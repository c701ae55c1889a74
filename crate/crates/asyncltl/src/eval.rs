//! Truncated semantics on finite traces.
//!
//! Every formula has a weak and a strong value at every position. Output
//! predicates are weakly true from the trace length on and strongly false
//! there; input predicates move that boundary one position earlier, because
//! the final state of a finite trace binds no inputs. Negation swaps
//! polarity; the temporal operators recurse with the polarity of their
//! context. Beyond the trace every weak value is true and every strong
//! value false (the end-of-trace property), which caps all scans at the
//! trace length.
//!
//! Two evaluators implement the same semantics. [`RefEvaluator`] follows the
//! defining clauses literally, scan by scan, and evaluates derived operators
//! through their definitional expansions; it is the oracle the rest of the
//! crate is tested against. [`Compiled`] flattens a formula into a node
//! table once and evaluates whole traces with bitmask recurrences, one bit
//! per position; it is the fast path for exhaustive suites and requires
//! traces of at most 63 states.

use crate::classify::{predicate_class, PredClass};
use crate::sort::Value;
use crate::syntax::{BoundedOp, CmpOp, Formula, FormulaRef, FuncOp, PowerOp, Term, TermRef, VarInfo};
use crate::trace::FiniteTrace;
use std::collections::HashMap;
use std::sync::Arc;

/// Evaluation polarity: the weak view accepts pending obligations at the
/// trace end, the strong view rejects them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Polarity {
    Weak,
    Strong,
}

impl Polarity {
    pub fn flip(self) -> Polarity {
        match self {
            Polarity::Weak => Polarity::Strong,
            Polarity::Strong => Polarity::Weak,
        }
    }
}

/// Reference evaluator options.
#[derive(Debug, Clone, Copy, Default)]
pub struct EvalOptions {
    /// Evaluate the strong since clause with a weak right operand, reading
    /// the defining text's mixed signs literally. The default is
    /// sign-consistent recursion.
    pub since_literal_mixed: bool,
}

/// Clause-literal truncated evaluator with memoization. Memo keys clamp the
/// position at the trace length: beyond it every weak value is true and
/// every strong value false, so all positions past the end coincide.
pub struct RefEvaluator<'a> {
    trace: &'a FiniteTrace,
    opts: EvalOptions,
    fmemo: HashMap<(usize, usize, Polarity), bool>,
    tmemo: HashMap<(usize, usize), Value>,
    expansions: HashMap<usize, FormulaRef>,
}

impl<'a> RefEvaluator<'a> {
    pub fn new(trace: &'a FiniteTrace) -> RefEvaluator<'a> {
        RefEvaluator::with_options(trace, EvalOptions::default())
    }

    pub fn with_options(trace: &'a FiniteTrace, opts: EvalOptions) -> RefEvaluator<'a> {
        RefEvaluator {
            trace,
            opts,
            fmemo: HashMap::new(),
            tmemo: HashMap::new(),
            expansions: HashMap::new(),
        }
    }

    /// The truncated value of `f` at position `i` under `pol`.
    pub fn eval(&mut self, f: &FormulaRef, i: usize, pol: Polarity) -> bool {
        let len = self.trace.len();
        let i = i.min(len);
        let key = (Arc::as_ptr(f) as usize, i, pol);
        if let Some(&v) = self.fmemo.get(&key) {
            return v;
        }
        let v = self.eval_uncached(f, i, pol);
        self.fmemo.insert(key, v);
        v
    }

    fn eval_uncached(&mut self, f: &FormulaRef, i: usize, pol: Polarity) -> bool {
        let len = self.trace.len();
        match f.as_ref() {
            Formula::True => match pol {
                Polarity::Weak => true,
                Polarity::Strong => i < len,
            },
            Formula::False => match pol {
                Polarity::Weak => i >= len,
                Polarity::Strong => false,
            },
            Formula::Atom(_) | Formula::Cmp { .. } => {
                let boundary = match predicate_class(f) {
                    PredClass::Output => len,
                    PredClass::Input => len - 1,
                };
                match pol {
                    Polarity::Weak => i >= boundary || self.pred(f, i),
                    Polarity::Strong => i < boundary && self.pred(f, i),
                }
            }
            Formula::Not(g) => !self.eval(g, i, pol.flip()),
            Formula::Or(l, r) => self.eval(l, i, pol) || self.eval(r, i, pol),
            Formula::And(l, r) => self.eval(l, i, pol) && self.eval(r, i, pol),
            Formula::Next(g) => self.eval(g, i + 1, pol),
            Formula::Until(l, r) => {
                // Exists k >= i with the right operand there and the left
                // at every position between; positions past the trace all
                // coincide with the one at the length, so the scan is
                // capped there.
                (i..=len).any(|k| {
                    self.eval(r, k, pol) && (i..k).all(|l_ix| self.eval(l, l_ix, pol))
                })
            }
            Formula::Yesterday(g) => match pol {
                Polarity::Weak => i >= len || (i > 0 && self.eval(g, i - 1, Polarity::Weak)),
                Polarity::Strong => {
                    i > 0 && i < len && self.eval(g, i - 1, Polarity::Strong)
                }
            },
            Formula::Since(l, r) => {
                let scan = |me: &mut Self, right_pol: Polarity, pol: Polarity| {
                    (0..=i).rev().any(|k| {
                        me.eval(r, k, right_pol)
                            && ((k + 1)..=i).all(|l_ix| me.eval(l, l_ix, pol))
                    })
                };
                match pol {
                    Polarity::Weak => {
                        i >= len || scan(self, Polarity::Weak, Polarity::Weak)
                    }
                    Polarity::Strong => {
                        let right = if self.opts.since_literal_mixed {
                            Polarity::Weak
                        } else {
                            Polarity::Strong
                        };
                        i < len && scan(self, right, Polarity::Strong)
                    }
                }
            }
            // Derived operators evaluate through their definitional
            // expansions, cached per node.
            Formula::Release(..)
            | Formula::Finally(..)
            | Formula::Globally(..)
            | Formula::Once(..)
            | Formula::Historically(..)
            | Formula::WeakYesterday(..)
            | Formula::Bounded { .. }
            | Formula::Power { .. } => {
                let expanded = self.expansion(f);
                self.eval(&expanded, i, pol)
            }
        }
    }

    fn expansion(&mut self, f: &FormulaRef) -> FormulaRef {
        let key = Arc::as_ptr(f) as usize;
        if let Some(e) = self.expansions.get(&key) {
            return e.clone();
        }
        let e = match f.as_ref() {
            Formula::Release(l, r) => Formula::not(Formula::until(
                Formula::not(l.clone()),
                Formula::not(r.clone()),
            )),
            Formula::Finally(g) => Formula::until(Formula::tt(), g.clone()),
            Formula::Globally(g) => {
                Formula::not(Formula::until(Formula::tt(), Formula::not(g.clone())))
            }
            Formula::Once(g) => Formula::since(Formula::tt(), g.clone()),
            Formula::Historically(g) => {
                Formula::not(Formula::since(Formula::tt(), Formula::not(g.clone())))
            }
            Formula::WeakYesterday(g) => {
                Formula::not(Formula::yesterday(Formula::not(g.clone())))
            }
            Formula::Bounded { .. } | Formula::Power { .. } => {
                // One desugaring step: expand only the head operator.
                match f.as_ref() {
                    Formula::Bounded { op, n, arg } => expand_bounded_head(*op, *n, arg),
                    Formula::Power { op, n, arg } => expand_power_head(*op, *n, arg),
                    _ => unreachable!(),
                }
            }
            other => panic!("no definitional expansion for {other}"),
        };
        self.expansions.insert(key, e.clone());
        e
    }

    fn pred(&mut self, f: &FormulaRef, i: usize) -> bool {
        match f.as_ref() {
            Formula::Atom(t) => self.term(t, i).as_bool(),
            Formula::Cmp { op, lhs, rhs } => {
                let a = self.term(lhs, i);
                let b = self.term(rhs, i);
                op.apply(&a, &b)
            }
            other => panic!("not a predicate: {other}"),
        }
    }

    /// The term's value at position `i < len`. Total: unbound variables
    /// read their sort default, and unresolved reads take the node default.
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
        let len = self.trace.len();
        match t.as_ref() {
            Term::Const { value, .. } => value.clone(),
            Term::Var(v) => self.var_value(v, i),
            Term::App { op, lhs, rhs } => {
                let a = self.term(lhs, i).as_int();
                let b = self.term(rhs, i).as_int();
                Value::Int(op.apply(a, b))
            }
            Term::Next { arg, .. } => {
                if i + 1 < len {
                    self.term(arg, i + 1)
                } else {
                    node_default(t)
                }
            }
            Term::AtNext { arg, cond, .. } => {
                for k in (i + 1)..=len {
                    if self.eval(cond, k, Polarity::Strong) {
                        return self.term(arg, k);
                    }
                    if self.eval(cond, k, Polarity::Weak) {
                        return node_default(t);
                    }
                }
                node_default(t)
            }
            Term::AtLast { arg, cond, .. } => {
                if i >= len {
                    return node_default(t);
                }
                for k in (0..i).rev() {
                    if self.eval(cond, k, Polarity::Strong) {
                        return self.term(arg, k);
                    }
                    if self.eval(cond, k, Polarity::Weak) {
                        return node_default(t);
                    }
                }
                node_default(t)
            }
            Term::Ite { cond, then_t, else_t, .. } => {
                if self.eval(cond, i, Polarity::Strong) {
                    self.term(then_t, i)
                } else if !self.eval(cond, i, Polarity::Weak) {
                    self.term(else_t, i)
                } else {
                    node_default(t)
                }
            }
        }
    }

    fn var_value(&self, v: &Arc<VarInfo>, i: usize) -> Value {
        let slot = self
            .trace
            .vocab
            .index_of(&v.name)
            .unwrap_or_else(|| panic!("trace vocabulary lacks variable {}", v.name));
        match self.trace.value(i, slot) {
            Some(value) => value.clone(),
            None => v.sort.default_value(),
        }
    }
}

fn expand_bounded_head(op: BoundedOp, n: u32, arg: &FormulaRef) -> FormulaRef {
    let (power, disjunctive) = match op {
        BoundedOp::Finally => (PowerOp::Next, true),
        BoundedOp::Globally => (PowerOp::Next, false),
        BoundedOp::Once => (PowerOp::Yesterday, true),
        BoundedOp::Historically => (PowerOp::WeakYesterday, false),
    };
    let mut acc = arg.clone();
    for k in 1..=n {
        let shifted = Formula::power(power, k, arg.clone());
        acc = if disjunctive { Formula::or(acc, shifted) } else { Formula::and(acc, shifted) };
    }
    acc
}

fn expand_power_head(op: PowerOp, n: u32, arg: &FormulaRef) -> FormulaRef {
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

fn node_default(t: &Term) -> Value {
    t.effective_default().expect("state-crossing nodes have a default")
}

// The compiled evaluator.

#[derive(Debug, Clone, Copy)]
enum PredOp {
    Bool(usize),
    Cmp(CmpOp, usize, usize),
}

#[derive(Debug, Clone)]
enum FNode {
    True,
    False,
    Pred { class: PredClass, op: PredOp },
    Not(usize),
    Or(usize, usize),
    And(usize, usize),
    Next(usize),
    Until(usize, usize),
    Release(usize, usize),
    Finally(usize),
    Globally(usize),
    Yesterday(usize),
    Since(usize, usize),
    Once(usize),
    Historically(usize),
    WeakYesterday(usize),
    Bounded { op: BoundedOp, n: u32, c: usize },
    Power { op: PowerOp, n: u32, c: usize },
}

#[derive(Debug, Clone)]
enum TNode {
    Const(Value),
    Var { info: Arc<VarInfo> },
    App(FuncOp, usize, usize),
    Next { c: usize, default: Value },
    AtNext { c: usize, cond: usize, default: Value },
    AtLast { c: usize, cond: usize, default: Value },
    Ite { cond: usize, then_t: usize, else_t: usize, default: Value },
}

#[derive(Debug, Clone, Copy)]
enum Step {
    F(usize),
    T(usize),
}

/// A formula flattened into a shared node table, evaluated trace by trace
/// with one bit per position.
pub struct Compiled {
    fnodes: Vec<FNode>,
    tnodes: Vec<TNode>,
    steps: Vec<Step>,
    root: usize,
}

/// Reusable buffers for [`Compiled::eval_masks`]; create one per worker and
/// reuse it across traces.
#[derive(Default)]
pub struct Workspace {
    fw: Vec<u64>,
    fs: Vec<u64>,
    tv: Vec<Vec<Value>>,
}

struct CompileCtx {
    fnodes: Vec<FNode>,
    tnodes: Vec<TNode>,
    steps: Vec<Step>,
    fmap: HashMap<usize, usize>,
    tmap: HashMap<usize, usize>,
}

impl Compiled {
    /// The maximum finite trace length the bitmask engine accepts.
    pub const MAX_LEN: usize = 63;

    pub fn new(f: &FormulaRef) -> Compiled {
        let mut ctx = CompileCtx {
            fnodes: Vec::new(),
            tnodes: Vec::new(),
            steps: Vec::new(),
            fmap: HashMap::new(),
            tmap: HashMap::new(),
        };
        let root = compile_formula(&mut ctx, f);
        Compiled { fnodes: ctx.fnodes, tnodes: ctx.tnodes, steps: ctx.steps, root }
    }

    /// Weak and strong masks of the root over positions `0..=len`; bit `i`
    /// is the truncated value at position `i`. Panics when the trace is
    /// longer than [`Compiled::MAX_LEN`] states.
    pub fn eval_masks(&self, trace: &FiniteTrace, ws: &mut Workspace) -> (u64, u64) {
        let len = trace.len();
        assert!(
            len <= Self::MAX_LEN,
            "compiled evaluation supports up to {} states, got {len}",
            Self::MAX_LEN
        );
        let mask_all: u64 = if len + 1 == 64 { u64::MAX } else { (1u64 << (len + 1)) - 1 };
        let low: u64 = (1u64 << len) - 1;
        let hi: u64 = mask_all ^ low;

        ws.fw.resize(self.fnodes.len(), 0);
        ws.fs.resize(self.fnodes.len(), 0);
        ws.tv.resize_with(self.tnodes.len(), Vec::new);

        let var_slots: Vec<Option<usize>> = self
            .tnodes
            .iter()
            .map(|t| match t {
                TNode::Var { info } => Some(
                    trace
                        .vocab
                        .index_of(&info.name)
                        .unwrap_or_else(|| panic!("trace vocabulary lacks variable {}", info.name)),
                ),
                _ => None,
            })
            .collect();

        for step in &self.steps {
            match *step {
                Step::T(ix) => self.eval_tnode(ix, trace, ws, &var_slots, len),
                Step::F(ix) => self.eval_fnode(ix, trace, ws, len, mask_all, low, hi),
            }
        }
        (ws.fw[self.root], ws.fs[self.root])
    }

    /// Convenience single-position evaluation.
    pub fn eval_at(
        &self,
        trace: &FiniteTrace,
        ws: &mut Workspace,
        i: usize,
        pol: Polarity,
    ) -> bool {
        let (w, s) = self.eval_masks(trace, ws);
        let i = i.min(trace.len());
        let m = match pol {
            Polarity::Weak => w,
            Polarity::Strong => s,
        };
        m & (1 << i) != 0
    }

    fn eval_fnode(
        &self,
        ix: usize,
        trace: &FiniteTrace,
        ws: &mut Workspace,
        len: usize,
        mask_all: u64,
        low: u64,
        hi: u64,
    ) {
        // Shift right one position, keeping the end-of-trace bit stable.
        let shr_fill = |m: u64| ((m >> 1) | (m & hi)) & mask_all;
        let shl = |m: u64, d: u32| if d > 63 { 0 } else { m << d };
        let ones = |d: u32| if d >= 64 { u64::MAX } else { (1u64 << d) - 1 };

        let (w, s) = match &self.fnodes[ix] {
            FNode::True => (mask_all, low),
            FNode::False => (hi, 0),
            FNode::Pred { class, op } => {
                let boundary = match class {
                    PredClass::Output => len,
                    PredClass::Input => len - 1,
                };
                let mut p: u64 = 0;
                for i in 0..boundary {
                    let holds = match op {
                        PredOp::Bool(t) => ws.tv[*t][i].as_bool(),
                        PredOp::Cmp(op, a, b) => op.apply(&ws.tv[*a][i], &ws.tv[*b][i]),
                    };
                    if holds {
                        p |= 1 << i;
                    }
                }
                let inside = ones(boundary as u32);
                (p | (mask_all ^ inside), p)
            }
            FNode::Not(c) => (mask_all & !ws.fs[*c], mask_all & !ws.fw[*c]),
            FNode::Or(l, r) => (ws.fw[*l] | ws.fw[*r], ws.fs[*l] | ws.fs[*r]),
            FNode::And(l, r) => (ws.fw[*l] & ws.fw[*r], ws.fs[*l] & ws.fs[*r]),
            FNode::Next(c) => (shr_fill(ws.fw[*c]), shr_fill(ws.fs[*c])),
            FNode::Until(l, r) => {
                let f = |c1: u64, c2: u64| {
                    let mut u = (c2 >> len) & 1;
                    let mut out = u << len;
                    for i in (0..len).rev() {
                        u = ((c2 >> i) & 1) | (((c1 >> i) & 1) & u);
                        out |= u << i;
                    }
                    out
                };
                (f(ws.fw[*l], ws.fw[*r]), f(ws.fs[*l], ws.fs[*r]))
            }
            FNode::Release(l, r) => {
                let f = |c1: u64, c2: u64| {
                    let mut v = (c2 >> len) & 1;
                    let mut out = v << len;
                    for i in (0..len).rev() {
                        v = ((c2 >> i) & 1) & (((c1 >> i) & 1) | v);
                        out |= v << i;
                    }
                    out
                };
                (f(ws.fw[*l], ws.fw[*r]), f(ws.fs[*l], ws.fs[*r]))
            }
            FNode::Finally(c) => {
                let mut acc = (ws.fs[*c] >> len) & 1;
                let mut out = acc << len;
                for i in (0..len).rev() {
                    acc |= (ws.fs[*c] >> i) & 1;
                    out |= acc << i;
                }
                (mask_all, out)
            }
            FNode::Globally(c) => {
                let mut acc = 1u64;
                let mut out = acc << len;
                for i in (0..len).rev() {
                    acc &= (ws.fw[*c] >> i) & 1;
                    out |= acc << i;
                }
                (out, 0)
            }
            FNode::Yesterday(c) => {
                ((shl(ws.fw[*c], 1) & low) | hi, shl(ws.fs[*c], 1) & low)
            }
            FNode::WeakYesterday(c) => {
                (((shl(ws.fw[*c], 1) | 1) & low) | hi, (shl(ws.fs[*c], 1) | 1) & low)
            }
            FNode::Since(l, r) => {
                let f = |c1: u64, c2: u64| {
                    let mut v = 0u64;
                    let mut out = 0u64;
                    for i in 0..len {
                        v = ((c2 >> i) & 1) | (((c1 >> i) & 1) & v);
                        out |= v << i;
                    }
                    out
                };
                (
                    (f(ws.fw[*l], ws.fw[*r]) & low) | hi,
                    f(ws.fs[*l], ws.fs[*r]) & low,
                )
            }
            FNode::Once(c) => {
                let f = |m: u64| {
                    let mut v = 0u64;
                    let mut out = 0u64;
                    for i in 0..len {
                        v |= (m >> i) & 1;
                        out |= v << i;
                    }
                    out
                };
                ((f(ws.fw[*c]) & low) | hi, f(ws.fs[*c]) & low)
            }
            FNode::Historically(c) => {
                let f = |m: u64| {
                    let mut v = 1u64;
                    let mut out = 0u64;
                    for i in 0..len {
                        v &= (m >> i) & 1;
                        out |= v << i;
                    }
                    out
                };
                ((f(ws.fw[*c]) & low) | hi, f(ws.fs[*c]) & low)
            }
            FNode::Bounded { op, n, c } => {
                let d_max = (*n).min(len as u32 + 1);
                match op {
                    BoundedOp::Finally | BoundedOp::Globally => {
                        let fold = |m: u64, or: bool| {
                            let mut shifted = m;
                            let mut acc = m;
                            for _ in 0..d_max {
                                shifted = shr_fill(shifted);
                                acc = if or { acc | shifted } else { acc & shifted };
                            }
                            acc
                        };
                        let or = matches!(op, BoundedOp::Finally);
                        (fold(ws.fw[*c], or), fold(ws.fs[*c], or))
                    }
                    BoundedOp::Once => {
                        let fold = |m: u64| {
                            let mut acc = m & low;
                            for d in 1..=d_max {
                                acc |= shl(m, d) & low;
                            }
                            acc
                        };
                        ((fold(ws.fw[*c]) & low) | hi, fold(ws.fs[*c]) & low)
                    }
                    BoundedOp::Historically => {
                        let fold = |m: u64| {
                            let mut acc = m & low;
                            for d in 1..=d_max {
                                acc &= (shl(m, d) | ones(d)) & low;
                            }
                            acc
                        };
                        ((fold(ws.fw[*c]) & low) | hi, fold(ws.fs[*c]) & low)
                    }
                }
            }
            FNode::Power { op, n, c } => {
                let d = (*n).min(len as u32 + 1);
                match op {
                    PowerOp::Next => {
                        let fold = |m: u64| {
                            let mut acc = m;
                            for _ in 0..d {
                                acc = shr_fill(acc);
                            }
                            acc
                        };
                        (fold(ws.fw[*c]), fold(ws.fs[*c]))
                    }
                    PowerOp::Yesterday => {
                        ((shl(ws.fw[*c], d) & low) | hi, shl(ws.fs[*c], d) & low)
                    }
                    PowerOp::WeakYesterday => (
                        (((shl(ws.fw[*c], d) | ones(d)) & low)) | hi,
                        (shl(ws.fs[*c], d) | ones(d)) & low,
                    ),
                }
            }
        };
        let _ = trace;
        ws.fw[ix] = w;
        ws.fs[ix] = s;
    }

    fn eval_tnode(
        &self,
        ix: usize,
        trace: &FiniteTrace,
        ws: &mut Workspace,
        var_slots: &[Option<usize>],
        len: usize,
    ) {
        let mut row: Vec<Value> = Vec::with_capacity(len);
        match &self.tnodes[ix] {
            TNode::Const(v) => {
                row.resize(len, v.clone());
            }
            TNode::Var { info } => {
                let slot = var_slots[ix].expect("variable slot resolved");
                for i in 0..len {
                    row.push(match trace.value(i, slot) {
                        Some(v) => v.clone(),
                        None => info.sort.default_value(),
                    });
                }
            }
            TNode::App(op, a, b) => {
                for i in 0..len {
                    row.push(Value::Int(
                        op.apply(ws.tv[*a][i].as_int(), ws.tv[*b][i].as_int()),
                    ));
                }
            }
            TNode::Next { c, default } => {
                for i in 0..len {
                    row.push(if i + 1 < len {
                        ws.tv[*c][i + 1].clone()
                    } else {
                        default.clone()
                    });
                }
            }
            TNode::AtNext { c, cond, default } => {
                let (cw, cs) = (ws.fw[*cond], ws.fs[*cond]);
                for i in 0..len {
                    let mut v = None;
                    for k in (i + 1)..=len {
                        if cs & (1 << k) != 0 {
                            v = Some(ws.tv[*c][k].clone());
                            break;
                        }
                        if cw & (1 << k) != 0 {
                            break;
                        }
                    }
                    row.push(v.unwrap_or_else(|| default.clone()));
                }
            }
            TNode::AtLast { c, cond, default } => {
                let (cw, cs) = (ws.fw[*cond], ws.fs[*cond]);
                for i in 0..len {
                    let mut v = None;
                    for k in (0..i).rev() {
                        if cs & (1 << k) != 0 {
                            v = Some(ws.tv[*c][k].clone());
                            break;
                        }
                        if cw & (1 << k) != 0 {
                            break;
                        }
                    }
                    row.push(v.unwrap_or_else(|| default.clone()));
                }
            }
            TNode::Ite { cond, then_t, else_t, default } => {
                let (cw, cs) = (ws.fw[*cond], ws.fs[*cond]);
                for i in 0..len {
                    row.push(if cs & (1 << i) != 0 {
                        ws.tv[*then_t][i].clone()
                    } else if cw & (1 << i) == 0 {
                        ws.tv[*else_t][i].clone()
                    } else {
                        default.clone()
                    });
                }
            }
        }
        ws.tv[ix] = row;
    }
}

fn compile_formula(ctx: &mut CompileCtx, f: &FormulaRef) -> usize {
    let key = Arc::as_ptr(f) as usize;
    if let Some(&ix) = ctx.fmap.get(&key) {
        return ix;
    }
    let node = match f.as_ref() {
        Formula::True => FNode::True,
        Formula::False => FNode::False,
        Formula::Atom(t) => FNode::Pred {
            class: predicate_class(f),
            op: PredOp::Bool(compile_term(ctx, t)),
        },
        Formula::Cmp { op, lhs, rhs } => FNode::Pred {
            class: predicate_class(f),
            op: PredOp::Cmp(*op, compile_term(ctx, lhs), compile_term(ctx, rhs)),
        },
        Formula::Not(g) => FNode::Not(compile_formula(ctx, g)),
        Formula::Or(l, r) => FNode::Or(compile_formula(ctx, l), compile_formula(ctx, r)),
        Formula::And(l, r) => FNode::And(compile_formula(ctx, l), compile_formula(ctx, r)),
        Formula::Next(g) => FNode::Next(compile_formula(ctx, g)),
        Formula::Until(l, r) => {
            FNode::Until(compile_formula(ctx, l), compile_formula(ctx, r))
        }
        Formula::Release(l, r) => {
            FNode::Release(compile_formula(ctx, l), compile_formula(ctx, r))
        }
        Formula::Finally(g) => FNode::Finally(compile_formula(ctx, g)),
        Formula::Globally(g) => FNode::Globally(compile_formula(ctx, g)),
        Formula::Yesterday(g) => FNode::Yesterday(compile_formula(ctx, g)),
        Formula::Since(l, r) => {
            FNode::Since(compile_formula(ctx, l), compile_formula(ctx, r))
        }
        Formula::Once(g) => FNode::Once(compile_formula(ctx, g)),
        Formula::Historically(g) => FNode::Historically(compile_formula(ctx, g)),
        Formula::WeakYesterday(g) => FNode::WeakYesterday(compile_formula(ctx, g)),
        Formula::Bounded { op, n, arg } => {
            FNode::Bounded { op: *op, n: *n, c: compile_formula(ctx, arg) }
        }
        Formula::Power { op, n, arg } => {
            FNode::Power { op: *op, n: *n, c: compile_formula(ctx, arg) }
        }
    };
    let ix = ctx.fnodes.len();
    ctx.fnodes.push(node);
    ctx.steps.push(Step::F(ix));
    ctx.fmap.insert(key, ix);
    ix
}

fn compile_term(ctx: &mut CompileCtx, t: &TermRef) -> usize {
    let key = Arc::as_ptr(t) as usize;
    if let Some(&ix) = ctx.tmap.get(&key) {
        return ix;
    }
    let node = match t.as_ref() {
        Term::Const { value, .. } => TNode::Const(value.clone()),
        Term::Var(v) => TNode::Var { info: v.clone() },
        Term::App { op, lhs, rhs } => {
            TNode::App(*op, compile_term(ctx, lhs), compile_term(ctx, rhs))
        }
        Term::Next { arg, .. } => {
            TNode::Next { c: compile_term(ctx, arg), default: node_default(t) }
        }
        Term::AtNext { arg, cond, .. } => TNode::AtNext {
            c: compile_term(ctx, arg),
            cond: compile_formula(ctx, cond),
            default: node_default(t),
        },
        Term::AtLast { arg, cond, .. } => TNode::AtLast {
            c: compile_term(ctx, arg),
            cond: compile_formula(ctx, cond),
            default: node_default(t),
        },
        Term::Ite { cond, then_t, else_t, .. } => TNode::Ite {
            cond: compile_formula(ctx, cond),
            then_t: compile_term(ctx, then_t),
            else_t: compile_term(ctx, else_t),
            default: node_default(t),
        },
    };
    let ix = ctx.tnodes.len();
    ctx.tnodes.push(node);
    ctx.steps.push(Step::T(ix));
    ctx.tmap.insert(key, ix);
    ix
}

/// The truncated value at a position, dispatching to the bitmask engine
/// when the trace fits and the reference evaluator otherwise.
pub fn eval_finite(trace: &FiniteTrace, f: &FormulaRef, i: usize, pol: Polarity) -> bool {
    if trace.len() <= Compiled::MAX_LEN {
        Compiled::new(f).eval_at(trace, &mut Workspace::default(), i, pol)
    } else {
        RefEvaluator::new(trace).eval(f, i, pol)
    }
}

/// Whether a finite trace satisfies a formula: the weak value at position 0.
pub fn holds_weak(trace: &FiniteTrace, f: &FormulaRef) -> bool {
    eval_finite(trace, f, 0, Polarity::Weak)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sort::{Sort, Value};
    use crate::syntax::{IoClass, VarInfo};
    use crate::trace::{FiniteTrace, State, Vocab};

    fn b(v: bool) -> Value {
        Value::Bool(v)
    }

    fn vocab() -> Arc<Vocab> {
        Vocab::new(vec![VarInfo::bool_input("i"), VarInfo::bool_output("o")]).unwrap()
    }

    /// States as (input, output) pairs plus a final output.
    fn trace(bits: &[(bool, bool)], last_out: bool) -> FiniteTrace {
        let v = vocab();
        let mut states: Vec<State> = bits
            .iter()
            .map(|&(i, o)| v.state(&[("i", b(i)), ("o", b(o))]).unwrap())
            .collect();
        states.push(v.state(&[("o", b(last_out))]).unwrap());
        FiniteTrace::new(v, states).unwrap()
    }

    fn ivar() -> FormulaRef {
        Formula::var(VarInfo::bool_input("i"))
    }

    fn ovar() -> FormulaRef {
        Formula::var(VarInfo::bool_output("o"))
    }

    fn check(t: &FiniteTrace, f: &FormulaRef, i: usize, pol: Polarity) -> bool {
        let by_ref = RefEvaluator::new(t).eval(f, i, pol);
        let by_mask = Compiled::new(f).eval_at(t, &mut Workspace::default(), i, pol);
        assert_eq!(by_ref, by_mask, "evaluators disagree on {f} at {i} ({pol:?})");
        by_ref
    }

    #[test]
    fn output_predicate_boundaries() {
        // Two states: one full (o = true), one final (o = false); len 2.
        let t = trace(&[(false, true)], false);
        let o = ovar();
        assert!(check(&t, &o, 0, Polarity::Weak));
        assert!(check(&t, &o, 0, Polarity::Strong));
        assert!(!check(&t, &o, 1, Polarity::Weak));
        assert!(!check(&t, &o, 1, Polarity::Strong));
        // Beyond the trace: weak true, strong false.
        assert!(check(&t, &o, 2, Polarity::Weak));
        assert!(!check(&t, &o, 2, Polarity::Strong));
        assert!(check(&t, &o, 5, Polarity::Weak));
    }

    #[test]
    fn input_predicate_boundary_is_one_earlier() {
        let t = trace(&[(true, false)], false);
        let i = ivar();
        assert!(check(&t, &i, 0, Polarity::Weak));
        assert!(check(&t, &i, 0, Polarity::Strong));
        // Position 1 = len - 1: no input bound, weak true, strong false.
        assert!(check(&t, &i, 1, Polarity::Weak));
        assert!(!check(&t, &i, 1, Polarity::Strong));
    }

    #[test]
    fn truth_constants_respect_polarity() {
        let t = trace(&[(false, false)], false);
        assert!(check(&t, &Formula::tt(), 1, Polarity::Strong));
        assert!(!check(&t, &Formula::tt(), 2, Polarity::Strong));
        assert!(check(&t, &Formula::tt(), 2, Polarity::Weak));
        assert!(!check(&t, &Formula::ff(), 1, Polarity::Weak));
        assert!(check(&t, &Formula::ff(), 2, Polarity::Weak));
    }

    #[test]
    fn strong_next_of_true_fails_at_the_edge() {
        // X true is not strongly true at the last position: the refuted
        // fold X true -> true would change strong values.
        let t = trace(&[(false, false)], false);
        let xt = Formula::next(Formula::tt());
        assert!(check(&t, &xt, 0, Polarity::Strong));
        assert!(!check(&t, &xt, 1, Polarity::Strong));
        assert!(check(&t, &xt, 1, Polarity::Weak));
    }

    #[test]
    fn weak_finally_is_trivial_and_strong_globally_unsatisfiable() {
        let t = trace(&[(false, false), (false, false)], false);
        let f = Formula::finally(ovar());
        let g = Formula::globally(ovar());
        for i in 0..=3 {
            assert!(check(&t, &f, i, Polarity::Weak));
            assert!(!check(&t, &g, i, Polarity::Strong));
        }
    }

    #[test]
    fn until_caps_at_the_trace_end() {
        // o = [F, T, -final F]; o U o variants.
        let t = trace(&[(false, false), (false, true)], false);
        let u = Formula::until(Formula::tt(), ovar());
        // Strong: a witness exists at 1.
        assert!(check(&t, &u, 0, Polarity::Strong));
        // From 2 (the final state, o false) no strong witness remains.
        assert!(!check(&t, &u, 2, Polarity::Strong));
        // Weak is satisfied by running off the end.
        assert!(check(&t, &u, 2, Polarity::Weak));
    }

    #[test]
    fn release_recurrences_match_duality() {
        let t = trace(&[(true, false), (false, true)], true);
        let (a, o) = (ivar(), ovar());
        let r = Formula::release(a.clone(), o.clone());
        let dual = Formula::not(Formula::until(Formula::not(a), Formula::not(o)));
        for i in 0..=3 {
            for pol in [Polarity::Weak, Polarity::Strong] {
                assert_eq!(check(&t, &r, i, pol), check(&t, &dual, i, pol));
            }
        }
    }

    #[test]
    fn past_operators_at_the_origin() {
        let t = trace(&[(false, true), (false, false)], false);
        let y = Formula::yesterday(ovar());
        let z = Formula::weak_yesterday(ovar());
        // Yesterday is false at 0; weak-yesterday true.
        assert!(!check(&t, &y, 0, Polarity::Weak));
        assert!(!check(&t, &y, 0, Polarity::Strong));
        assert!(check(&t, &z, 0, Polarity::Weak));
        assert!(check(&t, &z, 0, Polarity::Strong));
        // At 1 both read o at 0 = true.
        assert!(check(&t, &y, 1, Polarity::Strong));
        assert!(check(&t, &z, 1, Polarity::Strong));
        // Beyond the trace, weak yesterday holds and strong fails.
        assert!(check(&t, &y, 3, Polarity::Weak));
        assert!(!check(&t, &y, 3, Polarity::Strong));
    }

    #[test]
    fn since_and_once_scan_the_past() {
        // o = [T, F, final F].
        let t = trace(&[(false, true), (false, false)], false);
        let once = Formula::once(ovar());
        assert!(check(&t, &once, 1, Polarity::Strong));
        let since = Formula::since(Formula::not(ovar()), ovar());
        // At 1: o at 0 with !o in (0,1].
        assert!(check(&t, &since, 1, Polarity::Strong));
        assert!(check(&t, &since, 1, Polarity::Weak));
    }

    #[test]
    fn mixed_sign_since_differs_on_input_edges() {
        // Strong since with a weak right operand (the literal reading)
        // accepts an input atom at the input boundary; the sign-consistent
        // default does not.
        let t = trace(&[(false, false)], false);
        let f = Formula::since(Formula::tt(), ivar());
        let consistent = RefEvaluator::new(&t).eval(&f, 1, Polarity::Strong);
        let mixed = RefEvaluator::with_options(
            &t,
            EvalOptions { since_literal_mixed: true },
        )
        .eval(&f, 1, Polarity::Strong);
        assert!(!consistent);
        assert!(mixed);
    }

    #[test]
    fn bounded_operators_expand_correctly() {
        // o = [F, F, T, final F].
        let t = trace(&[(false, false), (false, false), (false, true)], false);
        let f2 = Formula::bounded(BoundedOp::Finally, 2, ovar());
        assert!(check(&t, &f2, 0, Polarity::Strong));
        let f1 = Formula::bounded(BoundedOp::Finally, 1, ovar());
        assert!(!check(&t, &f1, 0, Polarity::Strong));
        let g1 = Formula::bounded(BoundedOp::Globally, 1, Formula::not(ovar()));
        assert!(check(&t, &g1, 0, Polarity::Strong));
        let o2 = Formula::bounded(BoundedOp::Once, 2, ovar());
        assert!(check(&t, &o2, 3, Polarity::Weak));
        // Weak bounded-once looks back: at 3 the witness at 2 is in range,
        // at 2 it is the current position.
        assert!(check(&t, &o2, 2, Polarity::Weak));
        let h = Formula::bounded(BoundedOp::Historically, 1, Formula::not(ovar()));
        assert!(check(&t, &h, 1, Polarity::Strong));
        assert!(!check(&t, &h, 3, Polarity::Strong));
    }

    #[test]
    fn powers_shift_positions() {
        let t = trace(&[(false, false), (false, true)], false);
        let x2 = Formula::power(PowerOp::Next, 2, ovar());
        // o at position 2 is the final state's false.
        assert!(!check(&t, &x2, 0, Polarity::Strong));
        assert!(!check(&t, &x2, 0, Polarity::Weak));
        assert!(check(&t, &Formula::power(PowerOp::Next, 1, ovar()), 0, Polarity::Strong));
        let y1 = Formula::power(PowerOp::Yesterday, 1, ovar());
        assert!(check(&t, &y1, 2, Polarity::Weak));
        let z2 = Formula::power(PowerOp::WeakYesterday, 2, ovar());
        // i < d: weak-yesterday chains are true near the origin.
        assert!(check(&t, &z2, 1, Polarity::Strong));
    }

    #[test]
    fn next_term_defaults_at_the_boundary() {
        let x = VarInfo::new("x", Sort::int(0, 5), IoClass::Output);
        let v = Vocab::new(vec![x.clone()]).unwrap();
        let s = |n: i64| v.state(&[("x", Value::Int(n))]).unwrap();
        let t = FiniteTrace::new(v.clone(), vec![s(3), s(4)]).unwrap();
        let mut ev = RefEvaluator::new(&t);
        let nxt = Term::next(Term::var(x.clone()), None);
        assert_eq!(ev.term(&nxt, 0), Value::Int(4));
        // At the last position there is no successor: sort default.
        assert_eq!(ev.term(&nxt, 1), Value::Int(0));
        let tuned = Term::next(Term::var(x), Some(Value::Int(5)));
        assert_eq!(ev.term(&tuned, 1), Value::Int(5));
    }

    #[test]
    fn at_next_resolves_skips_and_blocks() {
        // Condition: the input i. i = [F, T, unbound]; o = [T, F, final T].
        let t = trace(&[(false, true), (true, false)], true);
        let o = Term::var(VarInfo::bool_output("o"));
        let at = Term::at_next(o.clone(), ivar(), None);
        let mut ev = RefEvaluator::new(&t);
        // From 0: position 1 satisfies i strongly, reads o there.
        assert_eq!(ev.term(&at, 0), b(false));
        // From 1: position 2 is the final state, i indeterminate: default.
        assert_eq!(ev.term(&at, 1), b(false));
        // A condition that is strongly violated everywhere scans to the
        // end and defaults.
        let never = Term::at_next(o, Formula::ff(), Some(b(true)));
        assert_eq!(ev.term(&never, 0), b(true));
    }

    #[test]
    fn at_last_scans_backward_with_origin_default() {
        let t = trace(&[(true, true), (false, false)], false);
        let o = Term::var(VarInfo::bool_output("o"));
        let at = Term::at_last(o, ivar(), None);
        let mut ev = RefEvaluator::new(&t);
        // At 0 nothing lies in the past: default false.
        assert_eq!(ev.term(&at, 0), b(false));
        // At 1 the position 0 satisfies i strongly: reads o at 0.
        assert_eq!(ev.term(&at, 1), b(true));
    }

    #[test]
    fn ite_takes_default_when_indeterminate() {
        let t = trace(&[(true, true)], false);
        let ite = Term::ite(
            ivar(),
            Term::bool_const(true),
            Term::bool_const(false),
            Some(b(false)),
        );
        let mut ev = RefEvaluator::new(&t);
        assert_eq!(ev.term(&ite, 0), b(true));
        // At 1 = len - 1 the input condition is indeterminate.
        assert_eq!(ev.term(&ite, 1), b(false));
    }

    #[test]
    fn duality_swaps_polarities() {
        let t = trace(&[(true, false), (false, true)], false);
        let shapes = vec![
            Formula::until(ivar(), ovar()),
            Formula::since(ovar(), ivar()),
            Formula::next(ivar()),
            Formula::yesterday(ovar()),
            Formula::or(ivar(), Formula::not(ovar())),
            Formula::atom(Term::at_next(
                Term::var(VarInfo::bool_output("o")),
                ivar(),
                None,
            )),
        ];
        for f in shapes {
            let neg = Formula::not(f.clone());
            for i in 0..=3 {
                assert_eq!(
                    check(&t, &neg, i, Polarity::Weak),
                    !check(&t, &f, i, Polarity::Strong)
                );
                assert_eq!(
                    check(&t, &neg, i, Polarity::Strong),
                    !check(&t, &f, i, Polarity::Weak)
                );
            }
        }
    }

    #[test]
    fn end_of_trace_values_are_uniform() {
        let t = trace(&[(true, true)], false);
        let formulas = vec![
            ivar(),
            ovar(),
            Formula::until(ivar(), ovar()),
            Formula::since(ivar(), ovar()),
            Formula::yesterday(ovar()),
            Formula::globally(ovar()),
            Formula::finally(ivar()),
            Formula::release(ivar(), ovar()),
            Formula::not(ovar()),
        ];
        for f in &formulas {
            for i in t.len()..t.len() + 3 {
                assert!(check(&t, f, i, Polarity::Weak), "{f} weak at {i}");
                assert!(!check(&t, f, i, Polarity::Strong), "{f} strong at {i}");
            }
        }
    }

    #[test]
    fn unbound_input_reads_default_below_the_guard() {
        // next(next(i)) evaluated at 0 on a length-3 trace reads i at the
        // final output-only state: the sort default false, not a crash.
        let t = trace(&[(true, false), (true, false)], false);
        let nn = Formula::atom(Term::next(
            Term::next(Term::var(VarInfo::bool_input("i")), None),
            None,
        ));
        assert!(!check(&t, &nn, 0, Polarity::Strong));
    }
}
