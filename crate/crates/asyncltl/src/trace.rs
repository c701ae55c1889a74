//! Traces, projection, and embedding.
//!
//! A finite trace binds every variable at every state except the last,
//! which binds outputs only. A lasso trace is an infinite trace given as a
//! stem plus a repeating loop of full states.
//!
//! A scheduled global trace relates to a component-local trace through a
//! strictly increasing map of sampled positions: every position where the
//! component's `run` input is true, plus (when the component runs finitely
//! often) one final output-only sample directly after the last run.
//! `project` extracts the local trace from a global one; `embed` builds a
//! global trace around a local one by inserting stuttering gaps whose
//! outputs are frozen and whose inputs come from a plan, marking the end of
//! the component's activity with the `end` output.

use crate::sort::{Sort, Value};
use crate::syntax::{IoClass, VarInfo};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::collections::HashMap;
use std::sync::Arc;

/// Errors from trace construction, projection, embedding, and JSON I/O.
#[derive(Debug, thiserror::Error)]
pub enum TraceError {
    #[error("duplicate variable {0}")]
    DuplicateVar(String),
    #[error("unknown variable {0}")]
    UnknownVar(String),
    #[error("state {state}: variable {var} is unbound")]
    Unbound { state: usize, var: String },
    #[error("state {state}: variable {var} binds {value}, outside sort {sort}")]
    OutOfSort { state: usize, var: String, value: Value, sort: Sort },
    #[error("state {state}: final state of a finite trace must bind outputs only, found input {var}")]
    FinalBindsInput { state: usize, var: String },
    #[error("a trace needs at least one state")]
    Empty,
    #[error("a lasso trace needs a non-empty loop")]
    EmptyLoop,
    #[error("ill-formed global trace: last state runs but has no successor")]
    IllFormedGlobal,
    #[error("invalid projection input: output {var} changes across the non-running step {step} -> {next}", next = step + 1)]
    InvalidProjectionInput { var: String, step: usize },
    #[error("embedding plan expects {expected} gap entries, got {got}")]
    PlanGapCount { expected: usize, got: usize },
    #[error("embedding plan: input vector has {got} values, vocabulary has {expected} inputs")]
    PlanInputArity { expected: usize, got: usize },
    #[error("a lasso-local embedding cannot use the finite-cut tail")]
    LassoFiniteCut,
    #[error("vocabulary mismatch: {0}")]
    VocabMismatch(String),
    #[error("trace JSON: {0}")]
    Json(String),
}

/// An ordered set of typed variables.
#[derive(Debug, Clone)]
pub struct Vocab {
    vars: Vec<Arc<VarInfo>>,
    by_name: HashMap<Arc<str>, usize>,
}

impl PartialEq for Vocab {
    fn eq(&self, other: &Self) -> bool {
        self.vars == other.vars
    }
}

impl Eq for Vocab {}

impl Vocab {
    pub fn new(vars: Vec<Arc<VarInfo>>) -> Result<Arc<Vocab>, TraceError> {
        let mut by_name = HashMap::new();
        for (i, v) in vars.iter().enumerate() {
            if by_name.insert(v.name.clone(), i).is_some() {
                return Err(TraceError::DuplicateVar(v.name.to_string()));
            }
        }
        Ok(Arc::new(Vocab { vars, by_name }))
    }

    pub fn vars(&self) -> &[Arc<VarInfo>] {
        &self.vars
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.by_name.get(name).copied()
    }

    pub fn get(&self, name: &str) -> Option<&Arc<VarInfo>> {
        self.index_of(name).map(|i| &self.vars[i])
    }

    pub fn inputs(&self) -> impl Iterator<Item = (usize, &Arc<VarInfo>)> {
        self.vars.iter().enumerate().filter(|(_, v)| v.io == IoClass::Input)
    }

    pub fn outputs(&self) -> impl Iterator<Item = (usize, &Arc<VarInfo>)> {
        self.vars.iter().enumerate().filter(|(_, v)| v.io == IoClass::Output)
    }

    /// Builds a state from name/value pairs; unmentioned variables stay
    /// unbound.
    pub fn state(&self, pairs: &[(&str, Value)]) -> Result<State, TraceError> {
        let mut s = vec![None; self.vars.len()];
        for (name, value) in pairs {
            let i = self
                .index_of(name)
                .ok_or_else(|| TraceError::UnknownVar(name.to_string()))?;
            s[i] = Some(value.clone());
        }
        Ok(s)
    }
}

/// One state: a value per vocabulary slot, `None` when unbound.
pub type State = Vec<Option<Value>>;

fn check_state(
    vocab: &Vocab,
    state: &State,
    index: usize,
    outputs_only: bool,
) -> Result<(), TraceError> {
    for (i, v) in vocab.vars().iter().enumerate() {
        match &state[i] {
            Some(value) => {
                if !v.sort.admits(value) {
                    return Err(TraceError::OutOfSort {
                        state: index,
                        var: v.name.to_string(),
                        value: value.clone(),
                        sort: v.sort.clone(),
                    });
                }
                if outputs_only && v.io == IoClass::Input {
                    return Err(TraceError::FinalBindsInput {
                        state: index,
                        var: v.name.to_string(),
                    });
                }
            }
            None => {
                let required = !outputs_only || v.io == IoClass::Output;
                if required {
                    return Err(TraceError::Unbound { state: index, var: v.name.to_string() });
                }
            }
        }
    }
    Ok(())
}

/// A finite trace; the last state binds outputs only.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteTrace {
    pub vocab: Arc<Vocab>,
    states: Vec<State>,
}

impl FiniteTrace {
    pub fn new(vocab: Arc<Vocab>, states: Vec<State>) -> Result<FiniteTrace, TraceError> {
        if states.is_empty() {
            return Err(TraceError::Empty);
        }
        let last = states.len() - 1;
        for (i, s) in states.iter().enumerate() {
            check_state(&vocab, s, i, i == last)?;
        }
        Ok(FiniteTrace { vocab, states })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn states(&self) -> &[State] {
        &self.states
    }

    /// The value of variable slot `var` at position `i`, if bound.
    pub fn value(&self, i: usize, var: usize) -> Option<&Value> {
        self.states.get(i).and_then(|s| s[var].as_ref())
    }
}

/// An infinite trace of full states: a stem followed by a repeating loop.
#[derive(Debug, Clone, PartialEq)]
pub struct LassoTrace {
    pub vocab: Arc<Vocab>,
    stem: Vec<State>,
    loop_: Vec<State>,
}

impl LassoTrace {
    pub fn new(
        vocab: Arc<Vocab>,
        stem: Vec<State>,
        loop_: Vec<State>,
    ) -> Result<LassoTrace, TraceError> {
        if loop_.is_empty() {
            return Err(TraceError::EmptyLoop);
        }
        for (i, s) in stem.iter().chain(loop_.iter()).enumerate() {
            check_state(&vocab, s, i, false)?;
        }
        Ok(LassoTrace { vocab, stem, loop_ })
    }

    pub fn stem(&self) -> &[State] {
        &self.stem
    }

    pub fn loop_states(&self) -> &[State] {
        &self.loop_
    }

    pub fn stem_len(&self) -> usize {
        self.stem.len()
    }

    pub fn loop_len(&self) -> usize {
        self.loop_.len()
    }

    /// The state at unrolled position `i`.
    pub fn state(&self, i: usize) -> &State {
        if i < self.stem.len() {
            &self.stem[i]
        } else {
            &self.loop_[(i - self.stem.len()) % self.loop_.len()]
        }
    }

    /// The value of variable slot `var` at unrolled position `i`.
    pub fn value(&self, i: usize, var: usize) -> &Value {
        self.state(i)[var].as_ref().expect("lasso states are full")
    }

    /// The finite trace made of the first `len` unrolled states, with the
    /// last state's inputs dropped.
    pub fn prefix(&self, len: usize) -> Result<FiniteTrace, TraceError> {
        if len == 0 {
            return Err(TraceError::Empty);
        }
        let mut states: Vec<State> = (0..len).map(|i| self.state(i).clone()).collect();
        let last = states.last_mut().expect("len >= 1");
        for (i, v) in self.vocab.vars().iter().enumerate() {
            if v.io == IoClass::Input {
                last[i] = None;
            }
        }
        FiniteTrace::new(self.vocab.clone(), states)
    }
}

/// A finite or lasso trace.
#[derive(Debug, Clone, PartialEq)]
pub enum Trace {
    Finite(FiniteTrace),
    Lasso(LassoTrace),
}

impl Trace {
    pub fn vocab(&self) -> &Arc<Vocab> {
        match self {
            Trace::Finite(t) => &t.vocab,
            Trace::Lasso(t) => &t.vocab,
        }
    }

    pub fn as_finite(&self) -> Option<&FiniteTrace> {
        match self {
            Trace::Finite(t) => Some(t),
            Trace::Lasso(_) => None,
        }
    }

    pub fn as_lasso(&self) -> Option<&LassoTrace> {
        match self {
            Trace::Finite(_) => None,
            Trace::Lasso(t) => Some(t),
        }
    }
}

/// Restricts a trace to the given target vocabulary. Each target variable
/// must exist in the source by name with the same sort; its direction may
/// differ (composition turns shared variables into outputs).
pub fn restrict(trace: &Trace, target: &Arc<Vocab>) -> Result<Trace, TraceError> {
    let source = trace.vocab();
    let mut slot_map = Vec::with_capacity(target.len());
    for v in target.vars() {
        let i = source.index_of(&v.name).ok_or_else(|| {
            TraceError::VocabMismatch(format!("source lacks variable {}", v.name))
        })?;
        if source.vars()[i].sort != v.sort {
            return Err(TraceError::VocabMismatch(format!(
                "variable {} has sort {} in the source and {} in the target",
                v.name,
                source.vars()[i].sort,
                v.sort
            )));
        }
        slot_map.push(i);
    }
    let project_state = |s: &State, outputs_only: bool| -> State {
        target
            .vars()
            .iter()
            .zip(&slot_map)
            .map(|(v, &i)| {
                if outputs_only && v.io == IoClass::Input {
                    None
                } else {
                    s[i].clone()
                }
            })
            .collect()
    };
    match trace {
        Trace::Finite(t) => {
            let last = t.len() - 1;
            let states = t
                .states()
                .iter()
                .enumerate()
                .map(|(i, s)| project_state(s, i == last))
                .collect();
            Ok(Trace::Finite(FiniteTrace::new(target.clone(), states)?))
        }
        Trace::Lasso(t) => {
            let stem = t.stem().iter().map(|s| project_state(s, false)).collect();
            let loop_ = t.loop_states().iter().map(|s| project_state(s, false)).collect();
            Ok(Trace::Lasso(LassoTrace::new(target.clone(), stem, loop_)?))
        }
    }
}

/// The sampled-position map of a global trace for one component.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RunMap {
    /// The component runs finitely often: the strictly increasing run
    /// positions plus the final output-only sample at last run + 1 (or 0
    /// when it never runs).
    Finite { runs: Vec<usize>, final_index: usize },
    /// The component runs infinitely often (lasso globals with a run inside
    /// the loop): run positions split into stem and loop parts, as global
    /// positions.
    InfinitelyOften { stem_runs: Vec<usize>, loop_runs: Vec<usize> },
}

fn bound_bool(state: &State, var: usize) -> bool {
    matches!(state[var], Some(Value::Bool(true)))
}

/// Computes the sampled-position map: every position where `run` is true,
/// plus the final sample for finitely running components. A finite global
/// trace whose last state runs has no successor to sample and is rejected.
pub fn run_map(global: &Trace, run: &str) -> Result<RunMap, TraceError> {
    let vocab = global.vocab();
    let run_ix = vocab
        .index_of(run)
        .ok_or_else(|| TraceError::UnknownVar(run.to_string()))?;
    match global {
        Trace::Finite(t) => {
            let runs: Vec<usize> = (0..t.len())
                .filter(|&i| bound_bool(&t.states()[i], run_ix))
                .collect();
            let final_index = runs.last().map_or(0, |&last| last + 1);
            if final_index > t.len() - 1 {
                return Err(TraceError::IllFormedGlobal);
            }
            Ok(RunMap::Finite { runs, final_index })
        }
        Trace::Lasso(t) => {
            let stem_runs: Vec<usize> = (0..t.stem_len())
                .filter(|&i| bound_bool(&t.stem()[i], run_ix))
                .collect();
            let loop_runs: Vec<usize> = (0..t.loop_len())
                .filter(|&i| bound_bool(&t.loop_states()[i], run_ix))
                .map(|i| t.stem_len() + i)
                .collect();
            if loop_runs.is_empty() {
                let final_index = stem_runs.last().map_or(0, |&last| last + 1);
                Ok(RunMap::Finite { runs: stem_runs, final_index })
            } else {
                Ok(RunMap::InfinitelyOften { stem_runs, loop_runs })
            }
        }
    }
}

fn global_state(global: &Trace, i: usize) -> &State {
    match global {
        Trace::Finite(t) => &t.states()[i],
        Trace::Lasso(t) => t.state(i),
    }
}

/// Checks output freezing: along every non-running step of the global trace,
/// every local output keeps its value.
fn check_freezing(
    global: &Trace,
    run_ix: usize,
    out_slots: &[(usize, Arc<str>)],
) -> Result<(), TraceError> {
    let steps: Vec<(usize, usize)> = match global {
        Trace::Finite(t) => (0..t.len() - 1).map(|j| (j, j + 1)).collect(),
        Trace::Lasso(t) => {
            let n = t.stem_len() + t.loop_len();
            // Steps through stem and loop, plus the wrap back to the loop
            // start; unrolled indices stay within one unrolling.
            (0..n).map(|j| (j, if j + 1 < n { j + 1 } else { t.stem_len() })).collect()
        }
    };
    for (j, jn) in steps {
        let here = global_state(global, j);
        if bound_bool(here, run_ix) {
            continue;
        }
        let there = global_state(global, jn);
        for (slot, name) in out_slots {
            if here[*slot] != there[*slot] {
                return Err(TraceError::InvalidProjectionInput {
                    var: name.to_string(),
                    step: j,
                });
            }
        }
    }
    Ok(())
}

/// Projects a global trace onto a component: samples the run positions
/// (restricted to the local vocabulary) and, for finitely running
/// components, appends the output-only final sample. Validates output
/// freezing across every non-running step first.
pub fn project(global: &Trace, local: &Arc<Vocab>, run: &str) -> Result<Trace, TraceError> {
    let source = global.vocab();
    let run_ix = source
        .index_of(run)
        .ok_or_else(|| TraceError::UnknownVar(run.to_string()))?;
    let map = run_map(global, run)?;
    let mut slots = Vec::with_capacity(local.len());
    for v in local.vars() {
        let i = source.index_of(&v.name).ok_or_else(|| {
            TraceError::VocabMismatch(format!("global lacks local variable {}", v.name))
        })?;
        slots.push((i, v.clone()));
    }
    let out_slots: Vec<(usize, Arc<str>)> = slots
        .iter()
        .filter(|(_, v)| v.io == IoClass::Output)
        .map(|(i, v)| (*i, v.name.clone()))
        .collect();
    check_freezing(global, run_ix, &out_slots)?;

    let sample = |i: usize, outputs_only: bool| -> State {
        let s = global_state(global, i);
        slots
            .iter()
            .map(|(slot, v)| {
                if outputs_only && v.io == IoClass::Input {
                    None
                } else {
                    s[*slot].clone()
                }
            })
            .collect()
    };
    match map {
        RunMap::Finite { runs, final_index } => {
            let mut states: Vec<State> = runs.iter().map(|&i| sample(i, false)).collect();
            states.push(sample(final_index, true));
            Ok(Trace::Finite(FiniteTrace::new(local.clone(), states)?))
        }
        RunMap::InfinitelyOften { stem_runs, loop_runs } => {
            let stem = stem_runs.iter().map(|&i| sample(i, false)).collect();
            let loop_ = loop_runs.iter().map(|&i| sample(i, false)).collect();
            Ok(Trace::Lasso(LassoTrace::new(local.clone(), stem, loop_)?))
        }
    }
}

/// Input values for one generated global state, aligned with the local
/// vocabulary's inputs in declaration order.
pub type InputVec = Vec<Value>;

/// How an embedding continues after the last local sample.
#[derive(Debug, Clone, PartialEq)]
pub enum TailPlan {
    /// Lasso locals only: the component runs forever, no tail exists.
    None,
    /// Cut the global trace at the final sample (its inputs stay unbound).
    FiniteCut,
    /// Continue forever without running: the final sample becomes a full
    /// state with the given inputs, followed by a non-running loop whose
    /// states take these input vectors (outputs stay frozen).
    NoRunLoop { final_inputs: InputVec, loop_inputs: Vec<InputVec> },
}

/// A recipe for building one global trace around a local one.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbedPlan {
    /// Fresh scheduling input.
    pub run: Arc<VarInfo>,
    /// Fresh end-of-activity output.
    pub end: Arc<VarInfo>,
    /// One entry per sampled local state (stem plus loop for lassos): the
    /// input vectors of the stuttering gap inserted before that sample.
    pub gaps: Vec<Vec<InputVec>>,
    pub tail: TailPlan,
}

impl EmbedPlan {
    /// A gap-free plan with the given tail.
    pub fn direct(run: Arc<VarInfo>, end: Arc<VarInfo>, samples: usize, tail: TailPlan) -> EmbedPlan {
        EmbedPlan { run, end, gaps: vec![Vec::new(); samples], tail }
    }
}

/// Builds the global vocabulary of an embedding: the local variables, the
/// run input, and the end output.
pub fn embedding_vocab(local: &Arc<Vocab>, plan: &EmbedPlan) -> Result<Arc<Vocab>, TraceError> {
    let mut vars = local.vars().to_vec();
    vars.push(plan.run.clone());
    vars.push(plan.end.clone());
    Vocab::new(vars)
}

/// Embeds a local trace into a global one per the plan: local states become
/// run positions separated by non-running gaps with frozen outputs and
/// planned inputs; `end` is true exactly from the position after the last
/// run onward. Finite locals take a finite-cut or non-running-loop tail;
/// lasso locals run forever and take no tail.
pub fn embed(local: &Trace, plan: &EmbedPlan) -> Result<Trace, TraceError> {
    let local_vocab = local.vocab();
    let vocab = embedding_vocab(local_vocab, plan)?;
    let n_inputs = local_vocab.inputs().count();

    let check_inputs = |iv: &InputVec| -> Result<(), TraceError> {
        if iv.len() != n_inputs {
            return Err(TraceError::PlanInputArity { expected: n_inputs, got: iv.len() });
        }
        Ok(())
    };

    // A generated state: local outputs from `outs`, local inputs from
    // either a local sample or a plan entry, then run and end.
    let make = |local_state: Option<&State>, inputs: Option<&InputVec>, outs: &State, run: Option<bool>, end: bool| -> State {
        let mut s: State = Vec::with_capacity(vocab.len());
        let mut next_input = 0usize;
        for (i, v) in local_vocab.vars().iter().enumerate() {
            let value = match v.io {
                IoClass::Output => outs[i].clone(),
                IoClass::Input => match (local_state, inputs) {
                    (Some(ls), _) => ls[i].clone(),
                    (None, Some(iv)) => {
                        let val = iv[next_input].clone();
                        Some(val)
                    }
                    (None, None) => None,
                },
            };
            if v.io == IoClass::Input {
                next_input += 1;
            }
            s.push(value);
        }
        s.push(run.map(Value::Bool));
        s.push(Some(Value::Bool(end)));
        s
    };

    match local {
        Trace::Finite(t) => {
            let samples = t.len() - 1;
            if plan.gaps.len() != samples {
                return Err(TraceError::PlanGapCount { expected: samples, got: plan.gaps.len() });
            }
            let mut states: Vec<State> = Vec::new();
            for (k, gap) in plan.gaps.iter().enumerate() {
                let outs = &t.states()[k];
                for iv in gap {
                    check_inputs(iv)?;
                    states.push(make(None, Some(iv), outs, Some(false), false));
                }
                states.push(make(Some(outs), None, outs, Some(true), false));
            }
            let final_outs = &t.states()[samples];
            match &plan.tail {
                TailPlan::None => Err(TraceError::LassoFiniteCut),
                TailPlan::FiniteCut => {
                    states.push(make(None, None, final_outs, None, true));
                    Ok(Trace::Finite(FiniteTrace::new(vocab, states)?))
                }
                TailPlan::NoRunLoop { final_inputs, loop_inputs } => {
                    check_inputs(final_inputs)?;
                    states.push(make(None, Some(final_inputs), final_outs, Some(false), true));
                    let mut loop_states = Vec::new();
                    let loop_inputs: &[InputVec] = if loop_inputs.is_empty() {
                        std::slice::from_ref(final_inputs)
                    } else {
                        loop_inputs
                    };
                    for iv in loop_inputs {
                        check_inputs(iv)?;
                        loop_states.push(make(None, Some(iv), final_outs, Some(false), true));
                    }
                    Ok(Trace::Lasso(LassoTrace::new(vocab, states, loop_states)?))
                }
            }
        }
        Trace::Lasso(t) => {
            if !matches!(plan.tail, TailPlan::None) {
                return Err(TraceError::LassoFiniteCut);
            }
            let samples = t.stem_len() + t.loop_len();
            if plan.gaps.len() != samples {
                return Err(TraceError::PlanGapCount { expected: samples, got: plan.gaps.len() });
            }
            let mut stem: Vec<State> = Vec::new();
            let mut loop_: Vec<State> = Vec::new();
            for (k, gap) in plan.gaps.iter().enumerate() {
                let (outs, seg): (&State, &mut Vec<State>) = if k < t.stem_len() {
                    (&t.stem()[k], &mut stem)
                } else {
                    (&t.loop_states()[k - t.stem_len()], &mut loop_)
                };
                for iv in gap {
                    check_inputs(iv)?;
                    seg.push(make(None, Some(iv), outs, Some(false), false));
                }
                seg.push(make(Some(outs), None, outs, Some(true), false));
            }
            Ok(Trace::Lasso(LassoTrace::new(vocab, stem, loop_)?))
        }
    }
}

/// The activity signal `run | (Z run & end)` along the trace's first
/// unrolling (stem plus one loop pass for lassos), with unbound run treated
/// as false.
pub fn state_signal(trace: &Trace, run: &str, end: &str) -> Result<Vec<bool>, TraceError> {
    let vocab = trace.vocab();
    let run_ix = vocab
        .index_of(run)
        .ok_or_else(|| TraceError::UnknownVar(run.to_string()))?;
    let end_ix = vocab
        .index_of(end)
        .ok_or_else(|| TraceError::UnknownVar(end.to_string()))?;
    let len = match trace {
        Trace::Finite(t) => t.len(),
        Trace::Lasso(t) => t.stem_len() + t.loop_len(),
    };
    let mut out = Vec::with_capacity(len);
    for i in 0..len {
        let here = global_state(trace, i);
        let ran_before = i == 0 || bound_bool(global_state(trace, i - 1), run_ix);
        let end_here = bound_bool(here, end_ix);
        out.push(bound_bool(here, run_ix) || (ran_before && end_here));
    }
    Ok(out)
}

// JSON form. Values serialize as JSON booleans, numbers, or enum literal
// strings; states map variable names to values; the trailing state of a
// finite trace is marked by `final_outputs_only`.

#[derive(Serialize, Deserialize)]
struct VocabJson {
    inputs: Vec<String>,
    outputs: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct TraceJson {
    vocab: VocabJson,
    stem: Vec<BTreeMap<String, serde_json::Value>>,
    #[serde(rename = "loop", skip_serializing_if = "Option::is_none")]
    loop_: Option<Vec<BTreeMap<String, serde_json::Value>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    final_outputs_only: Option<bool>,
}

fn value_to_json(v: &Value) -> serde_json::Value {
    match v {
        Value::Bool(b) => serde_json::Value::Bool(*b),
        Value::Int(n) => serde_json::Value::Number((*n).into()),
        Value::Enum(l) => serde_json::Value::String(l.to_string()),
    }
}

fn value_from_json(v: &serde_json::Value, sort: &Sort) -> Result<Value, TraceError> {
    let value = match v {
        serde_json::Value::Bool(b) => Value::Bool(*b),
        serde_json::Value::Number(n) => Value::Int(
            n.as_i64().ok_or_else(|| TraceError::Json(format!("non-integer number {n}")))?,
        ),
        serde_json::Value::String(s) => Value::Enum(Arc::from(s.as_str())),
        other => return Err(TraceError::Json(format!("unsupported value {other}"))),
    };
    if !sort.admits(&value) {
        return Err(TraceError::Json(format!("value {value} outside sort {sort}")));
    }
    Ok(value)
}

fn state_to_json(vocab: &Vocab, s: &State) -> BTreeMap<String, serde_json::Value> {
    vocab
        .vars()
        .iter()
        .enumerate()
        .filter_map(|(i, v)| s[i].as_ref().map(|val| (v.name.to_string(), value_to_json(val))))
        .collect()
}

fn state_from_json(
    vocab: &Vocab,
    m: &BTreeMap<String, serde_json::Value>,
) -> Result<State, TraceError> {
    let mut s = vec![None; vocab.len()];
    for (name, raw) in m {
        let i = vocab
            .index_of(name)
            .ok_or_else(|| TraceError::Json(format!("unknown variable {name}")))?;
        s[i] = Some(value_from_json(raw, &vocab.vars()[i].sort)?);
    }
    Ok(s)
}

/// Serializes a trace to its JSON form.
pub fn trace_to_json(trace: &Trace) -> serde_json::Value {
    let vocab = trace.vocab();
    let vocab_json = VocabJson {
        inputs: vocab.inputs().map(|(_, v)| v.name.to_string()).collect(),
        outputs: vocab.outputs().map(|(_, v)| v.name.to_string()).collect(),
    };
    let json = match trace {
        Trace::Finite(t) => TraceJson {
            vocab: vocab_json,
            stem: t.states().iter().map(|s| state_to_json(vocab, s)).collect(),
            loop_: None,
            final_outputs_only: Some(true),
        },
        Trace::Lasso(t) => TraceJson {
            vocab: vocab_json,
            stem: t.stem().iter().map(|s| state_to_json(vocab, s)).collect(),
            loop_: Some(t.loop_states().iter().map(|s| state_to_json(vocab, s)).collect()),
            final_outputs_only: None,
        },
    };
    serde_json::to_value(json).expect("trace JSON serializes")
}

/// Parses a trace from JSON text, resolving sorts against the given
/// vocabulary. The JSON's input/output name lists must match the
/// vocabulary's split exactly.
pub fn trace_from_json(text: &str, vocab: &Arc<Vocab>) -> Result<Trace, TraceError> {
    let parsed: TraceJson =
        serde_json::from_str(text).map_err(|e| TraceError::Json(e.to_string()))?;
    let mut expect_inputs: Vec<String> =
        vocab.inputs().map(|(_, v)| v.name.to_string()).collect();
    let mut expect_outputs: Vec<String> =
        vocab.outputs().map(|(_, v)| v.name.to_string()).collect();
    let mut got_inputs = parsed.vocab.inputs.clone();
    let mut got_outputs = parsed.vocab.outputs.clone();
    expect_inputs.sort();
    expect_outputs.sort();
    got_inputs.sort();
    got_outputs.sort();
    if expect_inputs != got_inputs || expect_outputs != got_outputs {
        return Err(TraceError::Json(format!(
            "vocabulary mismatch: expected inputs {expect_inputs:?} / outputs {expect_outputs:?}, got {got_inputs:?} / {got_outputs:?}"
        )));
    }
    let stem: Vec<State> = parsed
        .stem
        .iter()
        .map(|m| state_from_json(vocab, m))
        .collect::<Result<_, _>>()?;
    match parsed.loop_ {
        Some(loop_raw) => {
            let loop_: Vec<State> = loop_raw
                .iter()
                .map(|m| state_from_json(vocab, m))
                .collect::<Result<_, _>>()?;
            Ok(Trace::Lasso(LassoTrace::new(vocab.clone(), stem, loop_)?))
        }
        None => Ok(Trace::Finite(FiniteTrace::new(vocab.clone(), stem)?)),
    }
}
