//! Interface transition systems and their asynchronous composition.
//!
//! A system owns typed outputs and reads typed inputs; `init` constrains the
//! first output assignment, `trans` relates a full state to the next state's
//! outputs (primed reads are `next` terms over output variables), and strong
//! fairness pairs constrain infinite runs. Composition schedules components
//! asynchronously: a fresh `run_<c>` input grants component steps, a frame
//! condition freezes outputs while a component is not scheduled, a fresh
//! `end_<c>` output prophesies that it never runs again, and shared
//! variables become outputs of the product.
//!
//! Bounded exploration enumerates finite traces and fair lassos in a fixed
//! canonical order: initial output assignments ascending, then a depth-first
//! walk that at each path first closes lassos (shorter stems first), then
//! for each transition successor emits the finite trace ending there and
//! descends through the input assignments in ascending order. For composed
//! systems the `end` flags are not enumerated; they are derived from the run
//! pattern (the unique fair solution on lassos, and a branch on the free
//! final value for finite traces), which keeps the walk linear in the
//! scheduling choices. Membership is decided clause by clause, and bounded
//! entailment checks every enumerated trace against an assumption and a
//! goal, reporting the canonically first counterexample.

use crate::lasso::holds;
use crate::norm::formula_vars;
use crate::rewrite::{psi_cond_step, ComponentInterface, ComponentSymbols};
use crate::sort::{Sort, Value};
use crate::syntax::{Formula, FormulaRef, IoClass, SortError, Term, TermRef, VarInfo};
use crate::trace::{project, restrict, FiniteTrace, LassoTrace, State, Trace, TraceError, Vocab};
use rayon::prelude::*;
use std::collections::{HashMap, HashSet, VecDeque};
use std::ops::ControlFlow;
use std::sync::Arc;

/// Errors from system validation, composition, exploration, and membership.
#[derive(Debug, thiserror::Error)]
pub enum ItsError {
    #[error("{its}: variable {var} is declared both input and output")]
    InputOutputOverlap { its: String, var: String },
    #[error("{its}: the {list} list declares {var} with the opposite direction")]
    DeclarationDirection { its: String, list: &'static str, var: String },
    #[error("{its}: {context} mentions undeclared variable {var}")]
    ForeignVar { its: String, context: &'static str, var: String },
    #[error("{its}: {context} uses {var} with sort {used}, declared as {declared}")]
    SortConflict { its: String, context: &'static str, var: String, used: Sort, declared: Sort },
    #[error("{its}: init mentions input {var}")]
    InitOverInputs { its: String, var: String },
    #[error("{its}: trans mentions primed input {var}")]
    PrimedInput { its: String, var: String },
    #[error("{its}: {context} is not a step formula: contains {construct}")]
    NotStepFormula { its: String, context: &'static str, construct: String },
    #[error("{its}: {context}: {source}")]
    Sort { its: String, context: &'static str, #[source] source: SortError },
    #[error("component name {0} appears twice in a composition")]
    DuplicateComponent(String),
    #[error("incompatible components: {0}")]
    Incompatible(String),
    #[error("generated scheduling symbol {0} collides with a declared variable")]
    SymbolCollision(String),
    #[error("state cap {0} exceeded; raise the cap or shrink the bounds")]
    StateCap(usize),
    #[error("vocabulary mismatch: {0}")]
    VocabMismatch(String),
    #[error(transparent)]
    Trace(#[from] TraceError),
}

/// An interface transition system over finite domains.
#[derive(Debug, Clone)]
pub struct Its {
    pub name: String,
    /// Inputs followed by outputs, in declaration order.
    pub vocab: Arc<Vocab>,
    /// Initial condition, a step formula over the outputs.
    pub init: FormulaRef,
    /// Transition relation, a step formula over the full state and primed
    /// outputs.
    pub trans: FormulaRef,
    /// Strong fairness pairs of step formulas over the full state: on every
    /// infinite run, if the first holds infinitely often then so does the
    /// second.
    pub fairness: Vec<(FormulaRef, FormulaRef)>,
}

impl Its {
    /// Builds a system and checks every well-formedness rule.
    pub fn new(
        name: &str,
        inputs: Vec<Arc<VarInfo>>,
        outputs: Vec<Arc<VarInfo>>,
        init: FormulaRef,
        trans: FormulaRef,
        fairness: Vec<(FormulaRef, FormulaRef)>,
    ) -> Result<Its, ItsError> {
        for i in &inputs {
            if outputs.iter().any(|o| o.name == i.name) {
                return Err(ItsError::InputOutputOverlap {
                    its: name.to_string(),
                    var: i.name.to_string(),
                });
            }
        }
        for (list, vars, io) in
            [("input", &inputs, IoClass::Input), ("output", &outputs, IoClass::Output)]
        {
            if let Some(v) = vars.iter().find(|v| v.io != io) {
                return Err(ItsError::DeclarationDirection {
                    its: name.to_string(),
                    list,
                    var: v.name.to_string(),
                });
            }
        }
        let vocab = Vocab::new(inputs.into_iter().chain(outputs).collect())?;
        let its = Its { name: name.to_string(), vocab, init, trans, fairness };
        match its.validate().into_iter().next() {
            Some(e) => Err(e),
            None => Ok(its),
        }
    }

    /// Re-checks the formula invariants, returning every violation found
    /// (one per offending formula).
    pub fn validate(&self) -> Vec<ItsError> {
        let mut errors = Vec::new();
        let init_cx = StepCtx {
            its: &self.name,
            vocab: &self.vocab,
            label: "init",
            allow_inputs: false,
            allow_primed: false,
        };
        if let Err(e) = check_step_formula(&self.init, &init_cx) {
            errors.push(e);
        }
        let trans_cx = StepCtx { label: "trans", allow_inputs: true, allow_primed: true, ..init_cx };
        if let Err(e) = check_step_formula(&self.trans, &trans_cx) {
            errors.push(e);
        }
        let fair_cx = StepCtx { label: "fairness", allow_inputs: true, allow_primed: false, ..init_cx };
        for (assumption, guarantee) in &self.fairness {
            for f in [assumption, guarantee] {
                if let Err(e) = check_step_formula(f, &fair_cx) {
                    errors.push(e);
                }
            }
        }
        errors
    }

    pub fn inputs(&self) -> impl Iterator<Item = &Arc<VarInfo>> {
        self.vocab.inputs().map(|(_, v)| v)
    }

    pub fn outputs(&self) -> impl Iterator<Item = &Arc<VarInfo>> {
        self.vocab.outputs().map(|(_, v)| v)
    }
}

fn first_validation_error(its: &Its) -> Result<(), ItsError> {
    match its.validate().into_iter().next() {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

// Step formulas: the propositional fragment evaluated over one state and,
// inside a transition relation, the next state's outputs.

struct StepCtx<'a> {
    its: &'a str,
    vocab: &'a Vocab,
    label: &'static str,
    allow_inputs: bool,
    allow_primed: bool,
}

fn sort_err(cx: &StepCtx<'_>, source: SortError) -> ItsError {
    ItsError::Sort { its: cx.its.to_string(), context: cx.label, source }
}

fn not_step(cx: &StepCtx<'_>, construct: impl Into<String>) -> ItsError {
    ItsError::NotStepFormula {
        its: cx.its.to_string(),
        context: cx.label,
        construct: construct.into(),
    }
}

fn temporal_name(f: &Formula) -> &'static str {
    match f {
        Formula::Next(_) => "the temporal operator X",
        Formula::Until(..) => "the temporal operator U",
        Formula::Yesterday(_) => "the temporal operator Y",
        Formula::Since(..) => "the temporal operator S",
        Formula::Release(..) => "the temporal operator R",
        Formula::Finally(_) => "the temporal operator F",
        Formula::Globally(_) => "the temporal operator G",
        Formula::Once(_) => "the temporal operator O",
        Formula::Historically(_) => "the temporal operator H",
        Formula::WeakYesterday(_) => "the temporal operator Z",
        Formula::Bounded { .. } => "a bounded temporal operator",
        Formula::Power { .. } => "a temporal operator power",
        _ => "an unsupported construct",
    }
}

fn check_step_formula(f: &FormulaRef, cx: &StepCtx<'_>) -> Result<(), ItsError> {
    match f.as_ref() {
        Formula::True | Formula::False => Ok(()),
        Formula::Atom(t) => {
            let sort = t.sort().map_err(|e| sort_err(cx, e))?;
            if sort != Sort::Bool {
                return Err(not_step(cx, format!("an atom of sort {sort}")));
            }
            check_step_term(t, cx)
        }
        Formula::Cmp { op, lhs, rhs } => {
            let l = lhs.sort().map_err(|e| sort_err(cx, e))?;
            let r = rhs.sort().map_err(|e| sort_err(cx, e))?;
            if !l.same_kind(&r) {
                return Err(sort_err(cx, SortError::CmpMismatch { lhs: l, rhs: r }));
            }
            if op.is_order() && !matches!(l, Sort::Int { .. }) {
                return Err(sort_err(cx, SortError::NonIntegerOrder { lhs: l, rhs: r }));
            }
            check_step_term(lhs, cx)?;
            check_step_term(rhs, cx)
        }
        Formula::Not(a) => check_step_formula(a, cx),
        Formula::Or(a, b) | Formula::And(a, b) => {
            check_step_formula(a, cx)?;
            check_step_formula(b, cx)
        }
        other => Err(not_step(cx, temporal_name(other))),
    }
}

fn check_step_term(t: &TermRef, cx: &StepCtx<'_>) -> Result<(), ItsError> {
    match t.as_ref() {
        Term::Const { .. } => Ok(()),
        Term::Var(v) => check_step_var(v, cx, false),
        Term::App { lhs, rhs, .. } => {
            check_step_term(lhs, cx)?;
            check_step_term(rhs, cx)
        }
        Term::Ite { cond, then_t, else_t, .. } => {
            check_step_formula(cond, cx)?;
            check_step_term(then_t, cx)?;
            check_step_term(else_t, cx)
        }
        Term::Next { arg, .. } => {
            if !cx.allow_primed {
                return Err(not_step(cx, "a primed term"));
            }
            match arg.as_ref() {
                Term::Var(v) => check_step_var(v, cx, true),
                _ => Err(not_step(cx, "a primed compound term")),
            }
        }
        Term::AtNext { .. } => Err(not_step(cx, "an event-triggered term (@F)")),
        Term::AtLast { .. } => Err(not_step(cx, "an event-triggered term (@P)")),
    }
}

fn check_step_var(v: &Arc<VarInfo>, cx: &StepCtx<'_>, primed: bool) -> Result<(), ItsError> {
    let Some(decl) = cx.vocab.get(&v.name) else {
        return Err(ItsError::ForeignVar {
            its: cx.its.to_string(),
            context: cx.label,
            var: v.name.to_string(),
        });
    };
    if decl.sort != v.sort {
        return Err(ItsError::SortConflict {
            its: cx.its.to_string(),
            context: cx.label,
            var: v.name.to_string(),
            used: v.sort.clone(),
            declared: decl.sort.clone(),
        });
    }
    if primed && decl.io == IoClass::Input {
        return Err(ItsError::PrimedInput { its: cx.its.to_string(), var: v.name.to_string() });
    }
    if !cx.allow_inputs && decl.io == IoClass::Input {
        return Err(ItsError::InitOverInputs { its: cx.its.to_string(), var: v.name.to_string() });
    }
    Ok(())
}

/// Evaluates a validated step formula at a state; primed reads resolve
/// against `nxt`. Directions are resolved by name against `vocab`, and
/// unbound reads fall back to the sort default.
pub(crate) fn step_truth(f: &FormulaRef, vocab: &Vocab, cur: &State, nxt: Option<&State>) -> bool {
    match f.as_ref() {
        Formula::True => true,
        Formula::False => false,
        Formula::Atom(t) => step_value(t, vocab, cur, nxt, false).as_bool(),
        Formula::Cmp { op, lhs, rhs } => {
            let l = step_value(lhs, vocab, cur, nxt, false);
            let r = step_value(rhs, vocab, cur, nxt, false);
            op.apply(&l, &r)
        }
        Formula::Not(a) => !step_truth(a, vocab, cur, nxt),
        Formula::Or(a, b) => step_truth(a, vocab, cur, nxt) || step_truth(b, vocab, cur, nxt),
        Formula::And(a, b) => step_truth(a, vocab, cur, nxt) && step_truth(b, vocab, cur, nxt),
        _ => unreachable!("step formulas are validated to be propositional"),
    }
}

fn step_value(t: &TermRef, vocab: &Vocab, cur: &State, nxt: Option<&State>, primed: bool) -> Value {
    match t.as_ref() {
        Term::Const { value, .. } => value.clone(),
        Term::Var(v) => {
            let slot = vocab
                .index_of(&v.name)
                .expect("step formulas are validated against the vocabulary");
            let src =
                if primed { nxt.expect("primed reads appear only in transition formulas") } else { cur };
            src[slot].clone().unwrap_or_else(|| v.sort.default_value())
        }
        Term::App { op, lhs, rhs } => {
            let l = step_value(lhs, vocab, cur, nxt, primed).as_int();
            let r = step_value(rhs, vocab, cur, nxt, primed).as_int();
            Value::Int(op.apply(l, r))
        }
        Term::Next { arg, .. } => step_value(arg, vocab, cur, nxt, true),
        Term::Ite { cond, then_t, else_t, .. } => {
            if step_truth(cond, vocab, cur, nxt) {
                step_value(then_t, vocab, cur, nxt, primed)
            } else {
                step_value(else_t, vocab, cur, nxt, primed)
            }
        }
        Term::AtNext { .. } | Term::AtLast { .. } => {
            unreachable!("step terms are validated to be event-free")
        }
    }
}

fn bound_true(s: &State, slot: usize) -> bool {
    matches!(s[slot], Some(Value::Bool(true)))
}

// Compatibility and composition.

/// Shared variable names in first-occurrence order; errors describe the
/// first incompatibility.
fn sharing_analysis(components: &[Its]) -> Result<Vec<Arc<str>>, ItsError> {
    let mut info: HashMap<Arc<str>, (Sort, usize)> = HashMap::new();
    let mut shared = Vec::new();
    for comp in components {
        for v in comp.vocab.vars() {
            match info.get_mut(&v.name) {
                None => {
                    let outs = usize::from(v.io == IoClass::Output);
                    info.insert(v.name.clone(), (v.sort.clone(), outs));
                }
                Some((sort, outs)) => {
                    if *sort != v.sort {
                        return Err(ItsError::Incompatible(format!(
                            "{} has sort {} in one component and {} in another",
                            v.name, sort, v.sort
                        )));
                    }
                    if v.io == IoClass::Output {
                        *outs += 1;
                    }
                    if !shared.contains(&v.name) {
                        shared.push(v.name.clone());
                    }
                }
            }
        }
    }
    for name in &shared {
        let (_, outs) = &info[name];
        if *outs == 0 {
            return Err(ItsError::Incompatible(format!(
                "{name} is shared between components only as an input"
            )));
        }
        if *outs > 1 {
            return Err(ItsError::Incompatible(format!(
                "{name} is an output of more than one component"
            )));
        }
    }
    Ok(shared)
}

/// Whether every variable shared between components is the output of
/// exactly one of them (with equal sorts everywhere).
pub fn compatible(components: &[Its]) -> bool {
    sharing_analysis(components).is_ok()
}

/// One component of a composition, with its scheduling symbols in the
/// product.
#[derive(Debug, Clone)]
pub struct ComposedComponent {
    pub its: Its,
    pub symbols: ComponentSymbols,
}

/// The asynchronous product of a component list.
#[derive(Debug, Clone)]
pub struct ComposedIts {
    /// The product system; its transition relation includes the end
    /// prophecy laws `end_i <-> (end_i' & !run_i)`.
    pub its: Its,
    /// The transition relation without the end prophecy laws. Exploration
    /// generates successors from it and derives the end flags from the run
    /// pattern instead of enumerating them.
    pub core_trans: FormulaRef,
    pub components: Vec<ComposedComponent>,
    /// Variables that moved from some component's inputs to the product's
    /// outputs.
    pub shared: Vec<Arc<str>>,
}

fn iff(a: FormulaRef, b: FormulaRef) -> FormulaRef {
    Formula::and(Formula::implies(a.clone(), b.clone()), Formula::implies(b, a))
}

/// Composes compatible components: shared variables become product outputs,
/// each component gains a `run_<name>` scheduling input, an `end_<name>`
/// prophecy output, a frame condition freezing its outputs while it is not
/// scheduled, and the fairness pair (true, run or end); local fairness
/// pairs are lifted under the run flag.
pub fn compose(components: &[Its]) -> Result<ComposedIts, ItsError> {
    if components.is_empty() {
        return Err(ItsError::Incompatible("a composition needs at least one component".into()));
    }
    let mut names = HashSet::new();
    for c in components {
        if !names.insert(c.name.clone()) {
            return Err(ItsError::DuplicateComponent(c.name.clone()));
        }
        first_validation_error(c)?;
    }
    let shared = sharing_analysis(components)?;
    let shared_set: HashSet<&Arc<str>> = shared.iter().collect();
    let symbols: Vec<ComponentSymbols> =
        components.iter().map(|c| ComponentSymbols::for_component(&c.name)).collect();
    for sym in &symbols {
        for generated in [&sym.run.name, &sym.end.name] {
            if components.iter().any(|c| c.vocab.index_of(generated).is_some()) {
                return Err(ItsError::SymbolCollision(generated.to_string()));
            }
        }
    }

    let mut inputs = Vec::new();
    for c in components {
        for (_, v) in c.vocab.inputs() {
            if !shared_set.contains(&v.name) {
                inputs.push(v.clone());
            }
        }
    }
    inputs.extend(symbols.iter().map(|s| s.run.clone()));
    let mut outputs = Vec::new();
    for c in components {
        for (_, v) in c.vocab.outputs() {
            outputs.push(v.clone());
        }
    }
    outputs.extend(symbols.iter().map(|s| s.end.clone()));

    let init = Formula::conj(components.iter().map(|c| c.init.clone()));
    let mut core_parts = Vec::new();
    let mut full_parts = Vec::new();
    let mut fairness = Vec::new();
    for (c, sym) in components.iter().zip(&symbols) {
        let scheduled = Formula::implies(sym.run_atom(), c.trans.clone());
        let iface = ComponentInterface {
            name: c.name.clone(),
            symbols: sym.clone(),
            outputs: c.outputs().cloned().collect(),
        };
        let frame = psi_cond_step(&iface);
        let law = iff(
            sym.end_atom(),
            Formula::and(
                Formula::atom(Term::next(Term::var(sym.end.clone()), None)),
                Formula::not(sym.run_atom()),
            ),
        );
        core_parts.push(scheduled.clone());
        core_parts.push(frame.clone());
        full_parts.extend([scheduled, frame, law]);
        fairness.push((Formula::tt(), Formula::or(sym.run_atom(), sym.end_atom())));
        for (fa, fg) in &c.fairness {
            fairness.push((
                Formula::and(sym.run_atom(), fa.clone()),
                Formula::and(sym.run_atom(), fg.clone()),
            ));
        }
    }

    let name = components.iter().map(|c| c.name.as_str()).collect::<Vec<_>>().join("*");
    let its = Its::new(&name, inputs, outputs, init, Formula::conj(full_parts), fairness)?;
    Ok(ComposedIts {
        its,
        core_trans: Formula::conj(core_parts),
        components: components
            .iter()
            .zip(symbols)
            .map(|(c, symbols)| ComposedComponent { its: c.clone(), symbols })
            .collect(),
        shared,
    })
}

impl ComposedIts {
    pub fn component(&self, name: &str) -> Option<&ComposedComponent> {
        self.components.iter().find(|c| c.its.name == name)
    }

    /// Projects a trace of the product onto one component's vocabulary by
    /// sampling the positions where that component runs.
    pub fn project_component(&self, global: &Trace, name: &str) -> Result<Trace, ItsError> {
        let comp = self
            .component(name)
            .ok_or_else(|| ItsError::VocabMismatch(format!("no component named {name}")))?;
        Ok(project(global, &comp.its.vocab, &comp.symbols.run.name)?)
    }

    fn derived_pairs(&self) -> Vec<(usize, usize)> {
        self.components
            .iter()
            .map(|c| {
                let slot = |name: &Arc<str>| {
                    self.its.vocab.index_of(name).expect("scheduling symbols are product variables")
                };
                (slot(&c.symbols.run.name), slot(&c.symbols.end.name))
            })
            .collect()
    }

    /// Enumerates traces of the product (see the module doc for the order),
    /// deriving the end flags from the run pattern.
    pub fn enumerate_traces(
        &self,
        bounds: EnumBounds,
        opts: &EnumOptions,
    ) -> Result<Vec<Trace>, ItsError> {
        let mut out = Vec::new();
        self.visit_traces(bounds, opts, &mut |t| {
            out.push(t);
            ControlFlow::Continue(())
        })?;
        Ok(out)
    }

    /// Streams the traces of [`ComposedIts::enumerate_traces`] into `sink`
    /// without materializing them, in the same order. The sink stops the
    /// walk by returning [`ControlFlow::Break`]; the result tells whether
    /// the walk ran to completion.
    pub fn visit_traces(
        &self,
        bounds: EnumBounds,
        opts: &EnumOptions,
        sink: &mut dyn FnMut(Trace) -> ControlFlow<()>,
    ) -> Result<bool, ItsError> {
        first_validation_error(&self.its)?;
        let mut ex =
            Explorer::new(&self.its, &self.core_trans, self.derived_pairs(), bounds, opts)?;
        ex.run(&mut |_| true, sink)
    }
}

// Exploration.

/// Exploration bounds: finite traces up to `stem` states and, when `loop_`
/// is set, lassos with stem length at most `stem` and loop length at most
/// `loop_`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnumBounds {
    pub stem: usize,
    pub loop_: Option<usize>,
}

impl EnumBounds {
    pub fn finite(stem: usize) -> EnumBounds {
        EnumBounds { stem, loop_: None }
    }

    pub fn lasso(stem: usize, loop_: usize) -> EnumBounds {
        EnumBounds { stem, loop_: Some(loop_) }
    }
}

/// Default bound on explored path states plus emitted traces.
pub const DEFAULT_STATE_CAP: usize = 1_000_000;

/// Environment variable overriding the default state cap.
pub const STATE_CAP_ENV: &str = "ASYNCLTL_STATE_CAP";

/// Exploration limits.
#[derive(Debug, Clone)]
pub struct EnumOptions {
    /// Explored path states plus emitted traces must stay at or below this;
    /// exceeding it aborts with an explicit resource error.
    pub state_cap: usize,
}

impl Default for EnumOptions {
    fn default() -> EnumOptions {
        EnumOptions { state_cap: DEFAULT_STATE_CAP }
    }
}

impl EnumOptions {
    /// The default cap, overridden by `ASYNCLTL_STATE_CAP` when it parses
    /// as a positive integer.
    pub fn from_env() -> EnumOptions {
        let cap = std::env::var(STATE_CAP_ENV)
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
            .filter(|c| *c > 0)
            .unwrap_or(DEFAULT_STATE_CAP);
        EnumOptions { state_cap: cap }
    }
}

/// All assignments over the given domains, in ascending odometer order
/// (the last domain varies fastest). Empty domain lists yield the single
/// empty assignment.
struct Assignments<'d> {
    domains: &'d [Vec<Value>],
    idx: Vec<usize>,
    done: bool,
}

fn assignments(domains: &[Vec<Value>]) -> Assignments<'_> {
    Assignments { domains, idx: vec![0; domains.len()], done: false }
}

impl Iterator for Assignments<'_> {
    type Item = Vec<Value>;

    fn next(&mut self) -> Option<Vec<Value>> {
        if self.done {
            return None;
        }
        let current = self
            .idx
            .iter()
            .zip(self.domains)
            .map(|(&i, d)| d[i].clone())
            .collect();
        self.done = true;
        for i in (0..self.domains.len()).rev() {
            self.idx[i] += 1;
            if self.idx[i] < self.domains[i].len() {
                self.done = false;
                break;
            }
            self.idx[i] = 0;
        }
        Some(current)
    }
}

/// Successor generation and resource accounting shared by the trace walk
/// and the projection certifier.
struct StepModel<'a> {
    vocab: Arc<Vocab>,
    init: &'a FormulaRef,
    step_trans: &'a FormulaRef,
    /// (run slot, end slot) per component when end flags are derived.
    derived: Vec<(usize, usize)>,
    /// Freely enumerated output slots (derived end slots excluded).
    out_slots: Vec<usize>,
    out_domains: Vec<Vec<Value>>,
    in_slots: Vec<usize>,
    input_combos: Arc<Vec<Vec<Value>>>,
    succ: HashMap<State, Arc<Vec<State>>>,
    cap: usize,
    count: usize,
}

impl<'a> StepModel<'a> {
    fn new(
        its: &'a Its,
        step_trans: &'a FormulaRef,
        derived: Vec<(usize, usize)>,
        opts: &EnumOptions,
    ) -> Result<StepModel<'a>, ItsError> {
        let derived_ends: HashSet<usize> = derived.iter().map(|&(_, e)| e).collect();
        let mut out_slots = Vec::new();
        let mut out_domains = Vec::new();
        for (i, v) in its.vocab.outputs() {
            if !derived_ends.contains(&i) {
                out_slots.push(i);
                out_domains.push(v.sort.values());
            }
        }
        let mut in_slots = Vec::new();
        let mut in_domains = Vec::new();
        for (i, v) in its.vocab.inputs() {
            in_slots.push(i);
            in_domains.push(v.sort.values());
        }
        let cap = opts.state_cap;
        let product =
            |ds: &[Vec<Value>]| ds.iter().fold(1usize, |a, d| a.saturating_mul(d.len()));
        if product(&out_domains) > cap || product(&in_domains) > cap {
            return Err(ItsError::StateCap(cap));
        }
        let input_combos = Arc::new(assignments(&in_domains).collect::<Vec<_>>());
        Ok(StepModel {
            vocab: its.vocab.clone(),
            init: &its.init,
            step_trans,
            derived,
            out_slots,
            out_domains,
            in_slots,
            input_combos,
            succ: HashMap::new(),
            cap,
            count: 0,
        })
    }

    fn bump(&mut self) -> Result<(), ItsError> {
        self.count += 1;
        if self.count > self.cap {
            return Err(ItsError::StateCap(self.cap));
        }
        Ok(())
    }

    /// Output assignments satisfying `init`, as states binding only the
    /// enumerated outputs, in canonical order.
    fn init_outputs(&self) -> Vec<State> {
        let mut outs = Vec::new();
        for ov in assignments(&self.out_domains) {
            let mut s: State = vec![None; self.vocab.len()];
            for (slot, val) in self.out_slots.iter().zip(ov) {
                s[*slot] = Some(val);
            }
            if step_truth(self.init, &self.vocab, &s, None) {
                outs.push(s);
            }
        }
        outs
    }

    /// The transition successors of a full state, as states binding only
    /// the enumerated outputs, memoized per state.
    fn successors(&mut self, s: &State) -> Arc<Vec<State>> {
        if let Some(v) = self.succ.get(s) {
            return v.clone();
        }
        let mut outs = Vec::new();
        for ov in assignments(&self.out_domains) {
            let mut o: State = vec![None; self.vocab.len()];
            for (slot, val) in self.out_slots.iter().zip(ov) {
                o[*slot] = Some(val);
            }
            if step_truth(self.step_trans, &self.vocab, s, Some(&o)) {
                outs.push(o);
            }
        }
        let arc = Arc::new(outs);
        self.succ.insert(s.clone(), arc.clone());
        arc
    }

    fn fill_inputs(&self, base: &State, iv: &[Value]) -> State {
        let mut s = base.clone();
        for (slot, val) in self.in_slots.iter().zip(iv) {
            s[*slot] = Some(val.clone());
        }
        s
    }

    fn outputs_only(&self, s: &State) -> State {
        let mut o = s.clone();
        for slot in &self.in_slots {
            o[*slot] = None;
        }
        o
    }
}

/// Depth-first trace walk over one system.
struct Explorer<'a> {
    model: StepModel<'a>,
    fairness: &'a [(FormulaRef, FormulaRef)],
    bounds: EnumBounds,
}

impl<'a> Explorer<'a> {
    fn new(
        its: &'a Its,
        step_trans: &'a FormulaRef,
        derived: Vec<(usize, usize)>,
        bounds: EnumBounds,
        opts: &EnumOptions,
    ) -> Result<Explorer<'a>, ItsError> {
        let bounds = EnumBounds { stem: bounds.stem, loop_: bounds.loop_.filter(|p| *p > 0) };
        Ok(Explorer {
            model: StepModel::new(its, step_trans, derived, opts)?,
            fairness: &its.fairness,
            bounds,
        })
    }

    fn max_full(&self) -> usize {
        match self.bounds.loop_ {
            Some(p) => self.bounds.stem + p,
            None => self.bounds.stem.saturating_sub(1),
        }
    }

    /// Walks every trace within the bounds. `admit` may prune a freshly
    /// built full path state (its subtree is skipped); `sink` receives each
    /// trace and may stop the walk. Returns whether the walk completed.
    fn run(
        &mut self,
        admit: &mut dyn FnMut(&State) -> bool,
        sink: &mut dyn FnMut(Trace) -> ControlFlow<()>,
    ) -> Result<bool, ItsError> {
        let inits = self.model.init_outputs();
        let max_full = self.max_full();
        let mut path: Vec<State> = Vec::new();
        for o0 in &inits {
            if self.bounds.stem >= 1 && self.emit_finite(&path, o0, sink)?.is_break() {
                return Ok(false);
            }
            if max_full >= 1 {
                let combos = self.model.input_combos.clone();
                for iv in combos.iter() {
                    let s = self.model.fill_inputs(o0, iv);
                    if !admit(&s) {
                        continue;
                    }
                    self.model.bump()?;
                    path.push(s);
                    let flow = self.dfs(&mut path, admit, sink)?;
                    path.pop();
                    if flow.is_break() {
                        return Ok(false);
                    }
                }
            }
        }
        Ok(true)
    }

    fn dfs(
        &mut self,
        path: &mut Vec<State>,
        admit: &mut dyn FnMut(&State) -> bool,
        sink: &mut dyn FnMut(Trace) -> ControlFlow<()>,
    ) -> Result<ControlFlow<()>, ItsError> {
        if self.emit_lassos(path, sink)?.is_break() {
            return Ok(ControlFlow::Break(()));
        }
        let m = path.len();
        let emit_fin = m + 1 <= self.bounds.stem;
        let extend = m + 1 <= self.max_full();
        if !emit_fin && !extend {
            return Ok(ControlFlow::Continue(()));
        }
        let succs = self.model.successors(path.last().expect("walk paths are non-empty"));
        for o in succs.iter() {
            if emit_fin && self.emit_finite(path, o, sink)?.is_break() {
                return Ok(ControlFlow::Break(()));
            }
            if extend {
                let combos = self.model.input_combos.clone();
                for iv in combos.iter() {
                    let s = self.model.fill_inputs(o, iv);
                    if !admit(&s) {
                        continue;
                    }
                    self.model.bump()?;
                    path.push(s);
                    let flow = self.dfs(path, admit, sink)?;
                    path.pop();
                    if flow.is_break() {
                        return Ok(ControlFlow::Break(()));
                    }
                }
            }
        }
        Ok(ControlFlow::Continue(()))
    }

    /// Emits the finite traces made of `path` plus a final output-only
    /// state; with derived end flags, one per assignment of the free final
    /// end values, back-propagated through the run pattern.
    fn emit_finite(
        &mut self,
        path: &[State],
        final_outs: &State,
        sink: &mut dyn FnMut(Trace) -> ControlFlow<()>,
    ) -> Result<ControlFlow<()>, ItsError> {
        let m = path.len();
        let combos = 1usize << self.model.derived.len();
        for mask in 0..combos {
            self.model.bump()?;
            let mut states: Vec<State> = path.to_vec();
            states.push(final_outs.clone());
            for (d, &(run_slot, end_slot)) in self.model.derived.iter().enumerate() {
                let mut e = mask >> d & 1 == 1;
                states[m][end_slot] = Some(Value::Bool(e));
                for j in (0..m).rev() {
                    e = e && !bound_true(&states[j], run_slot);
                    states[j][end_slot] = Some(Value::Bool(e));
                }
            }
            let t = FiniteTrace::new(self.model.vocab.clone(), states)?;
            if sink(Trace::Finite(t)).is_break() {
                return Ok(ControlFlow::Break(()));
            }
        }
        Ok(ControlFlow::Continue(()))
    }

    /// Emits the fair lassos closing at the current path, splitting it into
    /// stem and loop at every admissible point (shorter stems first). With
    /// derived end flags, each position gets the unique fair solution:
    /// end exactly from the position after the last run onward.
    fn emit_lassos(
        &mut self,
        path: &[State],
        sink: &mut dyn FnMut(Trace) -> ControlFlow<()>,
    ) -> Result<ControlFlow<()>, ItsError> {
        let Some(p) = self.bounds.loop_ else {
            return Ok(ControlFlow::Continue(()));
        };
        let m = path.len();
        for k in m.saturating_sub(p)..m {
            if k > self.bounds.stem {
                break;
            }
            let loop_first = self.model.outputs_only(&path[k]);
            if !step_truth(self.model.step_trans, &self.model.vocab, &path[m - 1], Some(&loop_first))
            {
                continue;
            }
            let mut states: Vec<State> = path.to_vec();
            for &(run_slot, end_slot) in &self.model.derived {
                let loop_runs = states[k..].iter().any(|s| bound_true(s, run_slot));
                let mut no_run_from_here = !loop_runs;
                for j in (0..m).rev() {
                    no_run_from_here = no_run_from_here && !bound_true(&states[j], run_slot);
                    states[j][end_slot] = Some(Value::Bool(no_run_from_here));
                }
            }
            let loop_states = states.split_off(k);
            if !self.fairness_ok(&loop_states) {
                continue;
            }
            self.model.bump()?;
            let t = LassoTrace::new(self.model.vocab.clone(), states, loop_states)?;
            if sink(Trace::Lasso(t)).is_break() {
                return Ok(ControlFlow::Break(()));
            }
        }
        Ok(ControlFlow::Continue(()))
    }

    /// Strong fairness on the loop: wherever an assumption holds somewhere
    /// in the loop, its guarantee must hold somewhere in the loop.
    fn fairness_ok(&self, loop_states: &[State]) -> bool {
        self.fairness.iter().all(|(fa, fg)| {
            let fires =
                loop_states.iter().any(|s| step_truth(fa, &self.model.vocab, s, None));
            !fires || loop_states.iter().any(|s| step_truth(fg, &self.model.vocab, s, None))
        })
    }
}

/// Enumerates the traces of a system within the bounds, in the canonical
/// order described in the module doc. All outputs are enumerated directly;
/// for composed systems prefer [`ComposedIts::enumerate_traces`], which
/// derives the end flags instead.
pub fn enumerate_traces(
    its: &Its,
    bounds: EnumBounds,
    opts: &EnumOptions,
) -> Result<Vec<Trace>, ItsError> {
    first_validation_error(its)?;
    let mut out = Vec::new();
    let mut ex = Explorer::new(its, &its.trans, Vec::new(), bounds, opts)?;
    ex.run(&mut |_| true, &mut |t| {
        out.push(t);
        ControlFlow::Continue(())
    })?;
    Ok(out)
}

// Membership.

/// Why a trace is or is not a trace of a system.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MembershipVerdict {
    Member,
    /// The first state violates the initial condition.
    InitViolation,
    /// The step from this unrolled position to the next violates the
    /// transition relation (the last lasso step is the wrap to the loop
    /// start).
    TransViolation { step: usize },
    /// This fairness pair fires somewhere in the loop but is never
    /// honored there.
    FairnessViolation { pair: usize },
}

/// Decides membership clause by clause: initial condition, every
/// transition step, and (for lassos) every fairness pair on the loop.
pub fn check_membership(its: &Its, trace: &Trace) -> Result<MembershipVerdict, ItsError> {
    first_validation_error(its)?;
    let tv = trace.vocab();
    if tv.len() != its.vocab.len() {
        return Err(ItsError::VocabMismatch(format!(
            "trace binds {} variables, {} declares {}",
            tv.len(),
            its.name,
            its.vocab.len()
        )));
    }
    for v in its.vocab.vars() {
        match tv.get(&v.name) {
            Some(got) if got.sort == v.sort && got.io == v.io => {}
            Some(_) => {
                return Err(ItsError::VocabMismatch(format!(
                    "variable {} is declared differently in the trace and in {}",
                    v.name, its.name
                )))
            }
            None => {
                return Err(ItsError::VocabMismatch(format!(
                    "trace lacks variable {} of {}",
                    v.name, its.name
                )))
            }
        }
    }
    let normalized = restrict(trace, &its.vocab)?;
    let vocab = &its.vocab;
    match &normalized {
        Trace::Finite(t) => {
            let states = t.states();
            if !step_truth(&its.init, vocab, &states[0], None) {
                return Ok(MembershipVerdict::InitViolation);
            }
            for k in 0..states.len() - 1 {
                if !step_truth(&its.trans, vocab, &states[k], Some(&states[k + 1])) {
                    return Ok(MembershipVerdict::TransViolation { step: k });
                }
            }
            Ok(MembershipVerdict::Member)
        }
        Trace::Lasso(t) => {
            if !step_truth(&its.init, vocab, t.state(0), None) {
                return Ok(MembershipVerdict::InitViolation);
            }
            let n = t.stem_len() + t.loop_len();
            for j in 0..n {
                let next = if j + 1 < n { j + 1 } else { t.stem_len() };
                if !step_truth(&its.trans, vocab, t.state(j), Some(t.state(next))) {
                    return Ok(MembershipVerdict::TransViolation { step: j });
                }
            }
            for (i, (fa, fg)) in its.fairness.iter().enumerate() {
                let fires = t.loop_states().iter().any(|s| step_truth(fa, vocab, s, None));
                if fires && !t.loop_states().iter().any(|s| step_truth(fg, vocab, s, None)) {
                    return Ok(MembershipVerdict::FairnessViolation { pair: i });
                }
            }
            Ok(MembershipVerdict::Member)
        }
    }
}

/// Whether the trace is a trace of the system.
pub fn is_trace_of(its: &Its, trace: &Trace) -> Result<bool, ItsError> {
    Ok(check_membership(its, trace)? == MembershipVerdict::Member)
}

// Bounded entailment.

/// The outcome of a bounded entailment check.
#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    /// No enumerated trace satisfying the assumption violates the goal.
    ValidUpToBound { traces_checked: usize },
    /// The canonically first enumerated trace satisfying the assumption
    /// and violating the goal.
    Invalid { counterexample: Trace },
    /// Reserved for callers that separately prove the bound exhausts the
    /// reachable state space; bounded exploration never returns it.
    Valid,
}

fn check_formula_vocab(f: &FormulaRef, its: &Its) -> Result<(), ItsError> {
    for (name, v) in formula_vars(f) {
        match its.vocab.get(&name) {
            None => {
                return Err(ItsError::VocabMismatch(format!(
                    "formula mentions {name}, which {} does not declare",
                    its.name
                )))
            }
            Some(decl) if decl.sort != v.sort => {
                return Err(ItsError::VocabMismatch(format!(
                    "formula uses {name} with sort {}, {} declares {}",
                    v.sort, its.name, decl.sort
                )))
            }
            _ => {}
        }
    }
    Ok(())
}

/// Top-level `G` conjuncts of the assumption whose bodies are step
/// formulas free of the skipped variables. A path state falsifying such a
/// body falsifies the assumption on every trace through it, so pruning on
/// them is exact.
fn prunable_props(assumption: &FormulaRef, its: &Its, skip: &[Arc<str>]) -> Vec<FormulaRef> {
    let mut pending = vec![assumption.clone()];
    let mut props = Vec::new();
    while let Some(f) = pending.pop() {
        match f.as_ref() {
            Formula::And(a, b) => {
                pending.push(a.clone());
                pending.push(b.clone());
            }
            Formula::Globally(body) => {
                let cx = StepCtx {
                    its: &its.name,
                    vocab: &its.vocab,
                    label: "assumption",
                    allow_inputs: true,
                    allow_primed: false,
                };
                let vars = formula_vars(body);
                if check_step_formula(body, &cx).is_ok()
                    && vars.keys().all(|n| skip.iter().all(|s| s != n))
                {
                    props.push(body.clone());
                }
            }
            _ => {}
        }
    }
    props
}

fn first_violation(batch: &[Trace], assumption: &FormulaRef, goal: &FormulaRef) -> Option<Trace> {
    batch
        .par_iter()
        .enumerate()
        .filter(|(_, t)| holds(t, assumption) && !holds(t, goal))
        .min_by_key(|(i, _)| *i)
        .map(|(_, t)| t.clone())
}

fn entail_core(
    mut ex: Explorer<'_>,
    prune: Vec<FormulaRef>,
    assumption: &FormulaRef,
    goal: &FormulaRef,
) -> Result<Verdict, ItsError> {
    const BATCH: usize = 512;
    let vocab = ex.model.vocab.clone();
    let mut batch: Vec<Trace> = Vec::with_capacity(BATCH);
    let mut checked = 0usize;
    let mut cex: Option<Trace> = None;
    {
        let mut admit = |s: &State| prune.iter().all(|p| step_truth(p, &vocab, s, None));
        let mut sink = |t: Trace| {
            batch.push(t);
            if batch.len() >= BATCH {
                checked += batch.len();
                let found = first_violation(&batch, assumption, goal);
                batch.clear();
                if found.is_some() {
                    cex = found;
                    return ControlFlow::Break(());
                }
            }
            ControlFlow::Continue(())
        };
        ex.run(&mut admit, &mut sink)?;
    }
    if cex.is_none() && !batch.is_empty() {
        checked += batch.len();
        cex = first_violation(&batch, assumption, goal);
    }
    Ok(match cex {
        Some(counterexample) => Verdict::Invalid { counterexample },
        None => Verdict::ValidUpToBound { traces_checked: checked },
    })
}

/// Checks that every enumerated trace of the product satisfying the
/// assumption also satisfies the goal. Finite traces are judged by weak
/// truncated satisfaction, lassos by standard satisfaction. Exploration
/// prunes subtrees that permanently falsify a `G`-propositional conjunct
/// of the assumption; the full assumption is still evaluated per trace.
pub fn bounded_entailment(
    composed: &ComposedIts,
    assumption: &FormulaRef,
    goal: &FormulaRef,
    bounds: EnumBounds,
    opts: &EnumOptions,
) -> Result<Verdict, ItsError> {
    first_validation_error(&composed.its)?;
    check_formula_vocab(assumption, &composed.its)?;
    check_formula_vocab(goal, &composed.its)?;
    let skip: Vec<Arc<str>> =
        composed.components.iter().map(|c| c.symbols.end.name.clone()).collect();
    let prune = prunable_props(assumption, &composed.its, &skip);
    let ex = Explorer::new(&composed.its, &composed.core_trans, composed.derived_pairs(), bounds, opts)?;
    entail_core(ex, prune, assumption, goal)
}

/// Bounded entailment for a single system, enumerating all outputs
/// directly. Useful for checking one component against its own property.
pub fn bounded_check(
    its: &Its,
    assumption: &FormulaRef,
    goal: &FormulaRef,
    bounds: EnumBounds,
    opts: &EnumOptions,
) -> Result<Verdict, ItsError> {
    first_validation_error(its)?;
    check_formula_vocab(assumption, its)?;
    check_formula_vocab(goal, its)?;
    let prune = prunable_props(assumption, its, &[]);
    let ex = Explorer::new(its, &its.trans, Vec::new(), bounds, opts)?;
    entail_core(ex, prune, assumption, goal)
}

// Projection certification.

/// The outcome of certifying the projection property over the reachable
/// state graph.
#[derive(Debug, Clone, PartialEq)]
pub enum CertifyOutcome {
    /// Every initial output assignment satisfies each local initial
    /// condition, and every reachable step either takes a scheduled
    /// component through its own transition relation or freezes its
    /// outputs. By induction, every trace of the product projects into
    /// each component's language, at any exploration bound.
    Certified { states: usize, edges: usize },
    /// A reachable witness refuting the inductive argument.
    Failed { component: String, detail: String },
}

/// Certifies the projection property by walking every reachable full state
/// of the product (end flags left free) and checking each successor edge
/// against each component's transition relation or frame condition.
pub fn certify_projection(
    composed: &ComposedIts,
    opts: &EnumOptions,
) -> Result<CertifyOutcome, ItsError> {
    first_validation_error(&composed.its)?;
    let its = &composed.its;
    let mut model =
        StepModel::new(its, &composed.core_trans, composed.derived_pairs(), opts)?;

    struct Ctx {
        name: String,
        vocab: Arc<Vocab>,
        /// Composed slot of each local variable, in local declaration order.
        slots: Vec<usize>,
        /// Composed slots of the local outputs.
        out_slots: Vec<usize>,
        run_slot: usize,
        init: FormulaRef,
        trans: FormulaRef,
    }
    let ctxs: Vec<Ctx> = composed
        .components
        .iter()
        .map(|c| {
            let slot = |name: &Arc<str>| {
                its.vocab.index_of(name).expect("components embed into the product")
            };
            Ctx {
                name: c.its.name.clone(),
                vocab: c.its.vocab.clone(),
                slots: c.its.vocab.vars().iter().map(|v| slot(&v.name)).collect(),
                out_slots: c.its.outputs().map(|v| slot(&v.name)).collect(),
                run_slot: slot(&c.symbols.run.name),
                init: c.its.init.clone(),
                trans: c.its.trans.clone(),
            }
        })
        .collect();
    let local_state = |s: &State, ctx: &Ctx, outputs_only: bool| -> State {
        ctx.vocab
            .vars()
            .iter()
            .zip(&ctx.slots)
            .map(|(v, &slot)| {
                if outputs_only && v.io == IoClass::Input {
                    None
                } else {
                    s[slot].clone()
                }
            })
            .collect()
    };

    let inits = model.init_outputs();
    for ctx in &ctxs {
        for o in &inits {
            let local = local_state(o, ctx, true);
            if !step_truth(&ctx.init, &ctx.vocab, &local, None) {
                return Ok(CertifyOutcome::Failed {
                    component: ctx.name.clone(),
                    detail: format!(
                        "initial outputs {o:?} violate the local initial condition"
                    ),
                });
            }
        }
    }

    let mut seen: HashSet<State> = HashSet::new();
    let mut queue: VecDeque<State> = VecDeque::new();
    let combos = model.input_combos.clone();
    for o in &inits {
        for iv in combos.iter() {
            let s = model.fill_inputs(o, iv);
            if seen.insert(s.clone()) {
                model.bump()?;
                queue.push_back(s);
            }
        }
    }
    let mut edges = 0usize;
    while let Some(s) = queue.pop_front() {
        let succs = model.successors(&s);
        for o in succs.iter() {
            edges += 1;
            for ctx in &ctxs {
                if bound_true(&s, ctx.run_slot) {
                    let cur = local_state(&s, ctx, false);
                    let nxt = local_state(o, ctx, true);
                    if !step_truth(&ctx.trans, &ctx.vocab, &cur, Some(&nxt)) {
                        return Ok(CertifyOutcome::Failed {
                            component: ctx.name.clone(),
                            detail: format!(
                                "scheduled step from {s:?} to outputs {o:?} violates the local transition relation"
                            ),
                        });
                    }
                } else {
                    for &slot in &ctx.out_slots {
                        if s[slot] != o[slot] {
                            return Ok(CertifyOutcome::Failed {
                                component: ctx.name.clone(),
                                detail: format!(
                                    "output {} changes while the component is not scheduled",
                                    its.vocab.vars()[slot].name
                                ),
                            });
                        }
                    }
                }
            }
            for iv in combos.iter() {
                let ns = model.fill_inputs(o, iv);
                if seen.insert(ns.clone()) {
                    model.bump()?;
                    queue.push_back(ns);
                }
            }
        }
    }
    Ok(CertifyOutcome::Certified { states: seen.len(), edges })
}
