//! Differential checking of the shipped equivalences at desk scale.
//!
//! The harness enumerates formulas over a small boolean vocabulary, local
//! traces, and global embeddings, then confirms each equivalence by brute
//! verdict comparison: the embedding rewritings against local satisfaction,
//! the tail reduction against standard evaluation of its extension, the
//! weak-to-safety translation against weak satisfaction, projection of
//! composed traces into component languages, the linear-size envelope of the
//! embedding rewriting, and the end-of-trace, duality, branch-flip, and
//! prefix-weakening laws of the truncated semantics.
//!
//! Every suite is exhaustive within its bounds and fully determined by its
//! [`SuiteConfig`]: the same configuration (including the seed) reproduces
//! the same report byte for byte once the wall-clock field is zeroed (see
//! [`EquivalenceReport::canonical_json`]). Failures are reported as
//! [`Mismatch`] entries in canonical enumeration order, and the first one is
//! greedily shrunk ([`shrink`]) before reporting.

use std::collections::HashSet;
use std::fmt;
use std::ops::ControlFlow;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::{Compiled, Polarity, RefEvaluator, Workspace};
use crate::its::{
    certify_projection, compose, is_trace_of, CertifyOutcome, ComposedIts, EnumBounds,
    EnumOptions, Its, ItsError,
};
use crate::lasso::{brute_eval_lasso, holds, holds_lasso};
use crate::norm::{desugar, to_nnf};
use crate::rewrite::{
    extend_with_tail, rewrite_base, rewrite_base_top, rewrite_base_top_with, rewrite_fair_top,
    rewrite_opt_top, tr_rewrite, w2s, ComponentSymbols, RewriteError, RewriterKind,
};
use crate::sort::Value;
use crate::syntax::{Formula, FormulaRef, IoClass, Term, TermRef, VarInfo};
use crate::trace::{
    embed, trace_to_json, EmbedPlan, FiniteTrace, InputVec, LassoTrace, State, TailPlan, Trace,
    TraceError, Vocab,
};

/// Hard ceiling on the formula enumeration depth.
pub const MAX_DEPTH: usize = 4;
/// Formulas containing state-crossing terms are only enumerated up to this
/// depth; plain formulas go up to the configured depth.
pub const TERM_DEPTH: usize = 2;

const MISMATCH_CAP: usize = 25;
const PER_CASE_FAIL_CAP: usize = 8;
/// Frozen linear-size envelope: `size(rewrite) <= FACTOR * size(f) + OFFSET`.
const SIZE_FACTOR: usize = 16;
const SIZE_OFFSET: usize = 8;
/// Nesting levels of the branch-duplication family checked for growth.
const ITE_LEVELS: usize = 5;
/// Number of seeded random two-component systems in the projection suite.
const TOY_SYSTEMS: usize = 20;
/// The sender composition branches over three free inputs per step, so its
/// per-trace cross-check runs at these reduced bounds; the inductive
/// projection certifier covers it at every bound.
const SENDER_STEM_CAP: usize = 4;
const SENDER_LOOP_CAP: usize = 2;
/// State budget for the projection suite's exhaustive walks.
const PROJECTION_STATE_CAP: usize = 32_000_000;

// Errors.

/// Failures of the harness itself, as opposed to mismatches it reports.
#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("formula depth {0} exceeds the enumeration guard ({MAX_DEPTH})")]
    DepthTooLarge(usize),
    #[error("suite bound `{0}` must be at least one")]
    ZeroBound(&'static str),
    #[error("unknown theorem selector `{0}`")]
    UnknownTheorem(String),
    #[error("the suite would run {planned} cases, over the cap of {cap}")]
    CaseCap { planned: u64, cap: u64 },
    #[error(transparent)]
    Rewrite(#[from] RewriteError),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Its(#[from] ItsError),
}

// Configuration.

/// How an embedding continues after the last local sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailKind {
    /// Cut the global trace at the final sample.
    FiniteCut,
    /// Append an infinite non-running loop; the final sample's inputs are
    /// pinned to their sort defaults and the loop carries non-default
    /// fillers.
    NoRunLoop,
}

/// Bounds and knobs of one differential suite. Every numeric bound must be
/// at least one; the formula depth is capped at [`MAX_DEPTH`].
#[derive(Debug, Clone)]
pub struct SuiteConfig {
    /// Maximum formula nesting depth (atoms have depth one).
    pub depth: usize,
    /// Number of boolean input variables in the vocabulary.
    pub n_inputs: usize,
    /// Number of boolean output variables in the vocabulary.
    pub n_outputs: usize,
    /// Maximum length of local finite traces.
    pub trace_len: usize,
    /// Maximum length of one stuttering gap in an embedding.
    pub gap_bound: usize,
    /// Maximum stem length of local lasso traces.
    pub stem_bound: usize,
    /// Maximum loop length of local lasso traces.
    pub loop_bound: usize,
    /// Which embedding tails to enumerate for finite locals.
    pub tail_modes: Vec<TailKind>,
    /// Quantify every input assignment inside gaps; otherwise gaps carry
    /// sort defaults only.
    pub all_gap_fillers: bool,
    /// Include next/at-next/at-last/ite atoms (up to [`TERM_DEPTH`]).
    pub include_terms: bool,
    /// Seed for the randomized parts (the projection suite's toy systems).
    pub seed: u64,
    /// Refuse suites planning more cases than this.
    pub max_cases: u64,
}

impl Default for SuiteConfig {
    fn default() -> SuiteConfig {
        SuiteConfig {
            depth: 2,
            n_inputs: 1,
            n_outputs: 1,
            trace_len: 3,
            gap_bound: 1,
            stem_bound: 2,
            loop_bound: 1,
            tail_modes: vec![TailKind::FiniteCut, TailKind::NoRunLoop],
            all_gap_fillers: true,
            include_terms: true,
            seed: 0,
            max_cases: 500_000_000,
        }
    }
}

impl SuiteConfig {
    /// Checks the bound invariants.
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.depth == 0 {
            return Err(HarnessError::ZeroBound("depth"));
        }
        if self.depth > MAX_DEPTH {
            return Err(HarnessError::DepthTooLarge(self.depth));
        }
        for (bound, name) in [
            (self.n_inputs, "n_inputs"),
            (self.n_outputs, "n_outputs"),
            (self.trace_len, "trace_len"),
            (self.gap_bound, "gap_bound"),
            (self.stem_bound, "stem_bound"),
            (self.loop_bound, "loop_bound"),
            (self.max_cases as usize, "max_cases"),
            (self.tail_modes.len(), "tail_modes"),
        ] {
            if bound == 0 {
                return Err(HarnessError::ZeroBound(name));
            }
        }
        Ok(())
    }
}

// Theorem selectors.

/// The equivalences and laws the harness can check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Theorem {
    /// Truncated verdicts equal standard verdicts of the tail reduction on
    /// the tail extension, both polarities.
    Tr,
    /// Weak satisfaction is preserved by the weak-to-safety translation on
    /// finite traces; on lassos the two evaluation engines coincide.
    W2s,
    /// Local satisfaction equals satisfaction of the base embedding
    /// rewriting on every embedding of the local trace.
    BaseRewrite,
    /// The stutter-optimized rewriting agrees with the base rewriting on
    /// every embedding.
    OptAgreesBase,
    /// Standard local satisfaction equals satisfaction of the fairness
    /// rewriting on run-forever embeddings of lasso locals.
    FairRewrite,
    /// Every composed trace projects into each component's language.
    Projection,
    /// The base rewriting stays within the frozen linear-size envelope on
    /// branch-free formulas.
    SizeLinear,
    /// Nested conditional branches double the rewritten size per level.
    SizeIteBlowup,
    /// At and past the end of a finite trace everything holds weakly and
    /// nothing holds strongly.
    EndOfTrace,
    /// Negation swaps weak and strong verdicts at every position.
    Duality,
    /// Negating a conditional's guard and swapping its branches preserves
    /// its value.
    IteFlip,
    /// Finite prefixes of a lasso weakly satisfy every term-simple formula
    /// the lasso satisfies.
    PrefixWeakening,
}

impl Theorem {
    pub const ALL: [Theorem; 12] = [
        Theorem::Tr,
        Theorem::W2s,
        Theorem::BaseRewrite,
        Theorem::OptAgreesBase,
        Theorem::FairRewrite,
        Theorem::Projection,
        Theorem::SizeLinear,
        Theorem::SizeIteBlowup,
        Theorem::EndOfTrace,
        Theorem::Duality,
        Theorem::IteFlip,
        Theorem::PrefixWeakening,
    ];

    /// The selector name used on the command line and in reports.
    pub fn name(self) -> &'static str {
        match self {
            Theorem::Tr => "tr",
            Theorem::W2s => "w2s",
            Theorem::BaseRewrite => "base-rewrite",
            Theorem::OptAgreesBase => "opt-agrees-base",
            Theorem::FairRewrite => "fair-rewrite",
            Theorem::Projection => "projection",
            Theorem::SizeLinear => "size-linear",
            Theorem::SizeIteBlowup => "size-ite-blowup",
            Theorem::EndOfTrace => "end-of-trace",
            Theorem::Duality => "duality",
            Theorem::IteFlip => "ite-flip",
            Theorem::PrefixWeakening => "prefix-weakening",
        }
    }

    pub fn from_name(name: &str) -> Option<Theorem> {
        Theorem::ALL.iter().copied().find(|t| t.name() == name)
    }
}

impl fmt::Display for Theorem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

// Reports.

/// One failed case: a formula, the traces it was checked on, and the two
/// verdicts that should have agreed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mismatch {
    pub formula: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub local_trace: Option<serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedded_trace: Option<serde_json::Value>,
    pub local_verdict: bool,
    pub embedded_verdict: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

/// The outcome of one suite run. The mismatch list is empty exactly when
/// the suite passed; it is truncated to the first entries in enumeration
/// order, with the first one shrunk to a minimal witness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub theorem: String,
    pub cases: u64,
    pub mismatches: Vec<Mismatch>,
    pub seed: u64,
    pub elapsed_ms: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub info: Vec<String>,
}

impl EquivalenceReport {
    pub fn passed(&self) -> bool {
        self.mismatches.is_empty()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    /// The report as JSON with the wall-clock field zeroed: identical
    /// configurations produce byte-identical canonical reports.
    pub fn canonical_json(&self) -> String {
        let mut clone = self.clone();
        clone.elapsed_ms = 0;
        clone.to_json()
    }
}

// Witnesses.

/// A reproducible failing case. Which fields are set depends on the
/// theorem; [`replay_case`] re-derives the verdicts from them.
#[derive(Debug, Clone)]
pub struct Witness {
    pub theorem: Theorem,
    /// The rewriter variant under test (only the base suite varies it).
    pub rewriter: RewriterKind,
    pub formula: FormulaRef,
    pub local: Trace,
    /// Embedding recipe for the rewriting suites.
    pub plan: Option<EmbedPlan>,
    /// Polarity of the failing check in the tail-reduction suite.
    pub polarity: Option<Polarity>,
    /// Input filler of the tail extension in the tail-reduction suite.
    pub tail_filler: Option<InputVec>,
    /// Position, prefix length, nesting level, or system index, depending
    /// on the theorem.
    pub position: Option<usize>,
    /// Component the projected trace was checked against.
    pub component: Option<String>,
    /// Seed that reproduces the projection suite's systems.
    pub seed: u64,
}

impl Witness {
    fn new(theorem: Theorem, formula: FormulaRef, local: Trace) -> Witness {
        Witness {
            theorem,
            rewriter: RewriterKind::Correct,
            formula,
            local,
            plan: None,
            polarity: None,
            tail_filler: None,
            position: None,
            component: None,
            seed: 0,
        }
    }
}

/// The two re-derived verdicts of a replayed case.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseOutcome {
    pub fails: bool,
    pub left: bool,
    pub right: bool,
    pub detail: Option<String>,
}

impl CaseOutcome {
    fn compare(left: bool, right: bool) -> CaseOutcome {
        CaseOutcome { fails: left != right, left, right, detail: None }
    }
}

#[derive(Debug, Clone)]
struct FailRec {
    witness: Witness,
    left: bool,
    right: bool,
    detail: Option<String>,
}

impl FailRec {
    fn of(witness: Witness, left: bool, right: bool) -> FailRec {
        FailRec { witness, left, right, detail: None }
    }

    fn with_detail(witness: Witness, left: bool, right: bool, detail: String) -> FailRec {
        FailRec { witness, left, right, detail: Some(detail) }
    }
}

// Vocabulary and formula enumeration.

struct SuiteVocab {
    inputs: Vec<Arc<VarInfo>>,
    outputs: Vec<Arc<VarInfo>>,
    vocab: Arc<Vocab>,
}

fn suite_names(prefix: &str, n: usize) -> Vec<String> {
    (1..=n)
        .map(|k| if k == 1 { prefix.to_string() } else { format!("{prefix}{k}") })
        .collect()
}

fn make_suite(cfg: &SuiteConfig) -> Result<SuiteVocab, HarnessError> {
    let inputs: Vec<Arc<VarInfo>> = suite_names("i", cfg.n_inputs)
        .iter()
        .map(|n| VarInfo::bool_input(n))
        .collect();
    let outputs: Vec<Arc<VarInfo>> = suite_names("o", cfg.n_outputs)
        .iter()
        .map(|n| VarInfo::bool_output(n))
        .collect();
    let mut vars = inputs.clone();
    vars.extend(outputs.clone());
    let vocab = Vocab::new(vars)?;
    Ok(SuiteVocab { inputs, outputs, vocab })
}

/// Depth-one stratum: constants plus both polarities of every variable.
fn literal_pool(suite: &SuiteVocab) -> Vec<FormulaRef> {
    let mut pool = vec![Formula::tt(), Formula::ff()];
    for v in suite.inputs.iter().chain(&suite.outputs) {
        pool.push(Formula::var(v.clone()));
    }
    for v in suite.inputs.iter().chain(&suite.outputs) {
        pool.push(Formula::not(Formula::var(v.clone())));
    }
    pool
}

/// State-crossing atoms over the first input and output, both polarities.
fn term_pool(suite: &SuiteVocab) -> Vec<FormulaRef> {
    let fi = suite.inputs[0].clone();
    let fo = suite.outputs[0].clone();
    let atoms = vec![
        Formula::atom(Term::next(Term::var(fi.clone()), None)),
        Formula::atom(Term::next(Term::var(fo.clone()), None)),
        Formula::atom(Term::at_next(Term::var(fo.clone()), Formula::var(fi.clone()), None)),
        Formula::atom(Term::at_next(Term::var(fi.clone()), Formula::var(fo.clone()), None)),
        Formula::atom(Term::at_last(Term::var(fo.clone()), Formula::var(fi.clone()), None)),
        Formula::atom(Term::at_last(Term::var(fi.clone()), Formula::var(fo.clone()), None)),
        Formula::atom(Term::ite(
            Formula::var(fi.clone()),
            Term::var(fo.clone()),
            Term::var(fi.clone()),
            None,
        )),
        Formula::eq(Term::next(Term::var(fo.clone()), None), Term::var(fo)),
    ];
    let mut pool = Vec::with_capacity(atoms.len() * 2);
    for a in atoms {
        pool.push(a.clone());
        pool.push(Formula::not(a));
    }
    pool
}

/// Closes a seed pool under `!`, `X`, `Y`, `|`, `U`, and `S` up to the
/// depth, deduplicating structurally equal formulas by their display form.
fn close_under_ops(pool: &[FormulaRef], depth: usize) -> Vec<FormulaRef> {
    let mut seen: HashSet<String> = HashSet::new();
    let mut out: Vec<FormulaRef> = Vec::new();
    for f in pool {
        if seen.insert(f.to_string()) {
            out.push(f.clone());
        }
    }
    for _ in 2..=depth {
        let boundary = out.len();
        let operands: Vec<FormulaRef> = out[..boundary].to_vec();
        let mut push = |f: FormulaRef, out: &mut Vec<FormulaRef>| {
            if seen.insert(f.to_string()) {
                out.push(f);
            }
        };
        for f in &operands {
            push(Formula::not(f.clone()), &mut out);
        }
        for f in &operands {
            push(Formula::next(f.clone()), &mut out);
        }
        for f in &operands {
            push(Formula::yesterday(f.clone()), &mut out);
        }
        for a in &operands {
            for b in &operands {
                push(Formula::or(a.clone(), b.clone()), &mut out);
            }
        }
        for a in &operands {
            for b in &operands {
                push(Formula::until(a.clone(), b.clone()), &mut out);
            }
        }
        for a in &operands {
            for b in &operands {
                push(Formula::since(a.clone(), b.clone()), &mut out);
            }
        }
    }
    out
}

fn formulas_for(suite: &SuiteVocab, cfg: &SuiteConfig) -> Vec<FormulaRef> {
    let mut out = close_under_ops(&literal_pool(suite), cfg.depth);
    if cfg.include_terms {
        let mut seen: HashSet<String> = out.iter().map(|f| f.to_string()).collect();
        let mut full = literal_pool(suite);
        full.extend(term_pool(suite));
        for f in close_under_ops(&full, cfg.depth.min(TERM_DEPTH)) {
            if seen.insert(f.to_string()) {
                out.push(f);
            }
        }
    }
    out
}

/// Enumerates the suite's formulas: the core grammar (`true`, `false`,
/// literals, `!`, `|`, `X`, `U`, `Y`, `S`) closed up to the configured
/// depth, plus state-crossing atoms inside formulas of depth at most
/// [`TERM_DEPTH`] when enabled. The list is duplicate-free and its order is
/// determined by the configuration.
pub fn enumerate_formulas(cfg: &SuiteConfig) -> Result<Vec<FormulaRef>, HarnessError> {
    cfg.validate()?;
    let suite = make_suite(cfg)?;
    Ok(formulas_for(&suite, cfg))
}

// Structural predicates.

fn term_all(t: &TermRef, pred: &mut impl FnMut(&Term) -> bool) -> bool {
    if !pred(t.as_ref()) {
        return false;
    }
    match t.as_ref() {
        Term::Const { .. } | Term::Var(_) => true,
        Term::App { lhs, rhs, .. } => term_all(lhs, pred) && term_all(rhs, pred),
        Term::Next { arg, .. } => term_all(arg, pred),
        Term::AtNext { arg, cond, .. } | Term::AtLast { arg, cond, .. } => {
            term_all(arg, pred) && formula_terms_all(cond, pred)
        }
        Term::Ite { cond, then_t, else_t, .. } => {
            formula_terms_all(cond, pred) && term_all(then_t, pred) && term_all(else_t, pred)
        }
    }
}

fn formula_terms_all(f: &FormulaRef, pred: &mut impl FnMut(&Term) -> bool) -> bool {
    match f.as_ref() {
        Formula::True | Formula::False => true,
        Formula::Atom(t) => term_all(t, pred),
        Formula::Cmp { lhs, rhs, .. } => term_all(lhs, pred) && term_all(rhs, pred),
        Formula::Not(g)
        | Formula::Next(g)
        | Formula::Yesterday(g)
        | Formula::WeakYesterday(g)
        | Formula::Finally(g)
        | Formula::Globally(g)
        | Formula::Once(g)
        | Formula::Historically(g) => formula_terms_all(g, pred),
        Formula::Bounded { arg, .. } | Formula::Power { arg, .. } => {
            formula_terms_all(arg, pred)
        }
        Formula::Or(l, r)
        | Formula::And(l, r)
        | Formula::Until(l, r)
        | Formula::Release(l, r)
        | Formula::Since(l, r) => formula_terms_all(l, pred) && formula_terms_all(r, pred),
    }
}

/// No state-crossing or conditional terms: atoms read the current state.
fn term_simple(f: &FormulaRef) -> bool {
    formula_terms_all(f, &mut |t| {
        matches!(t, Term::Const { .. } | Term::Var(_) | Term::App { .. })
    })
}

fn ite_free(f: &FormulaRef) -> bool {
    formula_terms_all(f, &mut |t| !matches!(t, Term::Ite { .. }))
}

/// Direct structural children, including guard formulas inside terms.
fn formula_children(f: &FormulaRef) -> Vec<FormulaRef> {
    fn term_conds(t: &TermRef, out: &mut Vec<FormulaRef>) {
        match t.as_ref() {
            Term::Const { .. } | Term::Var(_) => {}
            Term::App { lhs, rhs, .. } => {
                term_conds(lhs, out);
                term_conds(rhs, out);
            }
            Term::Next { arg, .. } => term_conds(arg, out),
            Term::AtNext { arg, cond, .. } | Term::AtLast { arg, cond, .. } => {
                out.push(cond.clone());
                term_conds(arg, out);
            }
            Term::Ite { cond, then_t, else_t, .. } => {
                out.push(cond.clone());
                term_conds(then_t, out);
                term_conds(else_t, out);
            }
        }
    }
    match f.as_ref() {
        Formula::True | Formula::False => Vec::new(),
        Formula::Atom(t) => {
            let mut out = Vec::new();
            term_conds(t, &mut out);
            out
        }
        Formula::Cmp { lhs, rhs, .. } => {
            let mut out = Vec::new();
            term_conds(lhs, &mut out);
            term_conds(rhs, &mut out);
            out
        }
        Formula::Not(g)
        | Formula::Next(g)
        | Formula::Yesterday(g)
        | Formula::WeakYesterday(g)
        | Formula::Finally(g)
        | Formula::Globally(g)
        | Formula::Once(g)
        | Formula::Historically(g) => vec![g.clone()],
        Formula::Bounded { arg, .. } | Formula::Power { arg, .. } => vec![arg.clone()],
        Formula::Or(l, r)
        | Formula::And(l, r)
        | Formula::Until(l, r)
        | Formula::Release(l, r)
        | Formula::Since(l, r) => vec![l.clone(), r.clone()],
    }
}

// Trace enumeration.

fn assignments(domains: &[Vec<Value>]) -> Vec<Vec<Value>> {
    let mut out = Vec::new();
    if domains.iter().any(|d| d.is_empty()) {
        return out;
    }
    let mut ix = vec![0usize; domains.len()];
    loop {
        out.push(ix.iter().zip(domains).map(|(&i, d)| d[i].clone()).collect());
        let mut k = domains.len();
        loop {
            if k == 0 {
                return out;
            }
            k -= 1;
            ix[k] += 1;
            if ix[k] < domains[k].len() {
                break;
            }
            ix[k] = 0;
        }
    }
}

fn full_states(vocab: &Arc<Vocab>) -> Vec<State> {
    let domains: Vec<Vec<Value>> = vocab.vars().iter().map(|v| v.sort.values()).collect();
    assignments(&domains)
        .into_iter()
        .map(|vals| vals.into_iter().map(Some).collect())
        .collect()
}

fn final_states(vocab: &Arc<Vocab>) -> Vec<State> {
    let out_slots: Vec<usize> = vocab
        .vars()
        .iter()
        .enumerate()
        .filter(|(_, v)| v.io == IoClass::Output)
        .map(|(i, _)| i)
        .collect();
    let domains: Vec<Vec<Value>> =
        out_slots.iter().map(|&i| vocab.vars()[i].sort.values()).collect();
    assignments(&domains)
        .into_iter()
        .map(|vals| {
            let mut s: State = vec![None; vocab.len()];
            for (&slot, v) in out_slots.iter().zip(vals) {
                s[slot] = Some(v);
            }
            s
        })
        .collect()
}

/// All finite traces up to the length bound: full interior states, an
/// output-only final state. Ordered by length, then lexicographically.
fn finite_locals(vocab: &Arc<Vocab>, max_len: usize) -> Vec<FiniteTrace> {
    let fulls = full_states(vocab);
    let finals = final_states(vocab);
    let mut out = Vec::new();
    for len in 1..=max_len {
        let mut ix = vec![0usize; len];
        let limit = |k: usize| if k + 1 == len { finals.len() } else { fulls.len() };
        loop {
            let states: Vec<State> = ix
                .iter()
                .enumerate()
                .map(|(k, &i)| {
                    if k + 1 == len { finals[i].clone() } else { fulls[i].clone() }
                })
                .collect();
            out.push(
                FiniteTrace::new(vocab.clone(), states).expect("suite states are well sorted"),
            );
            let mut k = len;
            loop {
                if k == 0 {
                    ix.clear();
                    break;
                }
                k -= 1;
                ix[k] += 1;
                if ix[k] < limit(k) {
                    break;
                }
                ix[k] = 0;
            }
            if ix.is_empty() {
                break;
            }
        }
    }
    out
}

/// All lasso traces with stems up to `stem_bound` and loops from one to
/// `loop_bound`, every state fully assigned.
fn lasso_locals(vocab: &Arc<Vocab>, stem_bound: usize, loop_bound: usize) -> Vec<LassoTrace> {
    let fulls = full_states(vocab);
    let mut out = Vec::new();
    for stem_len in 0..=stem_bound {
        for loop_len in 1..=loop_bound {
            let slots = stem_len + loop_len;
            let mut ix = vec![0usize; slots];
            loop {
                let states: Vec<State> = ix.iter().map(|&i| fulls[i].clone()).collect();
                let (stem, loop_) = states.split_at(stem_len);
                out.push(
                    LassoTrace::new(vocab.clone(), stem.to_vec(), loop_.to_vec())
                        .expect("suite states are well sorted"),
                );
                let mut k = slots;
                loop {
                    if k == 0 {
                        ix.clear();
                        break;
                    }
                    k -= 1;
                    ix[k] += 1;
                    if ix[k] < fulls.len() {
                        break;
                    }
                    ix[k] = 0;
                }
                if ix.is_empty() {
                    break;
                }
            }
        }
    }
    out
}

// Embedding plans.

fn default_inputs(suite: &SuiteVocab) -> InputVec {
    suite.inputs.iter().map(|v| v.sort.default_value()).collect()
}

/// A non-default input assignment (the last value of each sort).
fn filler_inputs(suite: &SuiteVocab) -> InputVec {
    suite
        .inputs
        .iter()
        .map(|v| v.sort.values().last().expect("sorts are inhabited").clone())
        .collect()
}

fn input_combos(suite: &SuiteVocab) -> Vec<InputVec> {
    let domains: Vec<Vec<Value>> = suite.inputs.iter().map(|v| v.sort.values()).collect();
    assignments(&domains)
}

/// Every gap block up to the length bound: all input assignments per gap
/// state when `all_gap_fillers` is set, sort defaults otherwise.
fn gap_block_options(cfg: &SuiteConfig, suite: &SuiteVocab) -> Vec<Vec<InputVec>> {
    let mut out: Vec<Vec<InputVec>> = vec![Vec::new()];
    if cfg.all_gap_fillers {
        let combos = input_combos(suite);
        for g in 1..=cfg.gap_bound {
            let mut ix = vec![0usize; g];
            loop {
                out.push(ix.iter().map(|&i| combos[i].clone()).collect());
                let mut k = g;
                loop {
                    if k == 0 {
                        ix.clear();
                        break;
                    }
                    k -= 1;
                    ix[k] += 1;
                    if ix[k] < combos.len() {
                        break;
                    }
                    ix[k] = 0;
                }
                if ix.is_empty() {
                    break;
                }
            }
        }
    } else {
        let defaults = default_inputs(suite);
        for g in 1..=cfg.gap_bound {
            out.push(vec![defaults.clone(); g]);
        }
    }
    out
}

fn tail_plan(kind: TailKind, suite: &SuiteVocab) -> TailPlan {
    match kind {
        TailKind::FiniteCut => TailPlan::FiniteCut,
        TailKind::NoRunLoop => TailPlan::NoRunLoop {
            final_inputs: default_inputs(suite),
            loop_inputs: vec![filler_inputs(suite)],
        },
    }
}

/// Embedding plans for a finite local trace: the full product of gap block
/// choices before each run sample, crossed with the configured tails.
fn finite_plans(
    cfg: &SuiteConfig,
    suite: &SuiteVocab,
    symbols: &ComponentSymbols,
    local_len: usize,
) -> Vec<EmbedPlan> {
    let options = gap_block_options(cfg, suite);
    let blocks = local_len - 1;
    let mut gap_vectors: Vec<Vec<Vec<InputVec>>> = vec![Vec::new()];
    for _ in 0..blocks {
        let mut next = Vec::with_capacity(gap_vectors.len() * options.len());
        for prefix in &gap_vectors {
            for opt in &options {
                let mut v = prefix.clone();
                v.push(opt.clone());
                next.push(v);
            }
        }
        gap_vectors = next;
    }
    let mut plans = Vec::with_capacity(gap_vectors.len() * cfg.tail_modes.len());
    for gaps in gap_vectors {
        for &tail in &cfg.tail_modes {
            plans.push(EmbedPlan {
                run: symbols.run.clone(),
                end: symbols.end.clone(),
                gaps: gaps.clone(),
                tail: tail_plan(tail, suite),
            });
        }
    }
    plans
}

fn gap_length_vectors(blocks: usize, budget: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = vec![0usize; blocks];
    fn rec(cur: &mut Vec<usize>, k: usize, left: usize, out: &mut Vec<Vec<usize>>) {
        if k == cur.len() {
            out.push(cur.clone());
            return;
        }
        for g in 0..=left {
            cur[k] = g;
            rec(cur, k + 1, left - g, out);
        }
        cur[k] = 0;
    }
    rec(&mut cur, 0, budget, &mut out);
    out
}

/// Embedding plans for a lasso local: run-forever globals whose total gap
/// length stays within the bound, with uniform default or non-default gap
/// fillers.
fn lasso_plans(
    cfg: &SuiteConfig,
    suite: &SuiteVocab,
    symbols: &ComponentSymbols,
    samples: usize,
) -> Vec<EmbedPlan> {
    let defaults = default_inputs(suite);
    let fillers = filler_inputs(suite);
    let modes: Vec<&InputVec> =
        if fillers == defaults { vec![&defaults] } else { vec![&defaults, &fillers] };
    let mut plans = Vec::new();
    for lengths in gap_length_vectors(samples, cfg.gap_bound) {
        let total: usize = lengths.iter().sum();
        let chosen: &[&InputVec] = if total == 0 { &modes[..1] } else { &modes[..] };
        for filler in chosen {
            plans.push(EmbedPlan {
                run: symbols.run.clone(),
                end: symbols.end.clone(),
                gaps: lengths.iter().map(|&g| vec![(*filler).clone(); g]).collect(),
                tail: TailPlan::None,
            });
        }
    }
    plans
}

// Replay and shrinking.

fn symbols_of_plan(plan: &EmbedPlan) -> ComponentSymbols {
    ComponentSymbols { run: plan.run.clone(), end: plan.end.clone() }
}

fn tr_extension(local: &FiniteTrace, filler: &InputVec) -> Result<LassoTrace, HarnessError> {
    let inputs: Vec<Arc<VarInfo>> = local
        .vocab
        .inputs()
        .map(|(_, v)| v.clone())
        .collect();
    Ok(extend_with_tail(local, |v: &Arc<VarInfo>| {
        inputs
            .iter()
            .position(|w| w.name == v.name)
            .and_then(|ix| filler.get(ix).cloned())
            .unwrap_or_else(|| v.sort.default_value())
    })?)
}

/// Recomputes the two verdicts of a witnessed case. `Ok(None)` means the
/// witness does not carry enough structure to replay (after shrinking broke
/// a required shape, or for certification failures).
pub fn replay_case(w: &Witness) -> Result<Option<CaseOutcome>, HarnessError> {
    match w.theorem {
        Theorem::BaseRewrite => {
            let Some(plan) = &w.plan else { return Ok(None) };
            let cs = symbols_of_plan(plan);
            let rf = rewrite_base_top_with(&w.formula, &cs, w.rewriter)?;
            let global = embed(&w.local, plan)?;
            let left = holds(&w.local, &w.formula);
            let right = holds(&global, &rf);
            Ok(Some(CaseOutcome::compare(left, right)))
        }
        Theorem::OptAgreesBase => {
            let Some(plan) = &w.plan else { return Ok(None) };
            let cs = symbols_of_plan(plan);
            let rb = rewrite_base_top(&w.formula, &cs)?;
            let ro = rewrite_opt_top(&w.formula, &cs)?;
            let global = embed(&w.local, plan)?;
            Ok(Some(CaseOutcome::compare(holds(&global, &rb), holds(&global, &ro))))
        }
        Theorem::FairRewrite => {
            let Some(plan) = &w.plan else { return Ok(None) };
            let cs = symbols_of_plan(plan);
            let rf = rewrite_fair_top(&w.formula, &cs)?;
            let global = embed(&w.local, plan)?;
            let left = holds(&w.local, &w.formula);
            Ok(Some(CaseOutcome::compare(left, holds(&global, &rf))))
        }
        Theorem::Tr => {
            let (Some(pol), Some(filler), Trace::Finite(t)) =
                (w.polarity, &w.tail_filler, &w.local)
            else {
                return Ok(None);
            };
            let rf = tr_rewrite(&w.formula, pol)?;
            let ext = tr_extension(t, filler)?;
            let left = crate::eval::eval_finite(t, &w.formula, 0, pol);
            Ok(Some(CaseOutcome::compare(left, holds_lasso(&ext, &rf))))
        }
        Theorem::W2s => match &w.local {
            Trace::Finite(t) => {
                let nnf = to_nnf(&desugar(&w.formula));
                let translated = w2s(&nnf)?;
                let left = crate::eval::holds_weak(t, &w.formula);
                let right = crate::eval::holds_weak(t, &translated);
                Ok(Some(CaseOutcome::compare(left, right)))
            }
            Trace::Lasso(t) => {
                let left = holds_lasso(t, &w.formula);
                let right = brute_eval_lasso(t, &w.formula, 0);
                Ok(Some(CaseOutcome::compare(left, right)))
            }
        },
        Theorem::EndOfTrace => {
            let (Some(pos), Trace::Finite(t)) = (w.position, &w.local) else {
                return Ok(None);
            };
            let weak = crate::eval::eval_finite(t, &w.formula, pos, Polarity::Weak);
            let strong = crate::eval::eval_finite(t, &w.formula, pos, Polarity::Strong);
            Ok(Some(CaseOutcome {
                fails: !(weak && !strong),
                left: weak,
                right: !strong,
                detail: None,
            }))
        }
        Theorem::Duality => {
            let (Some(pos), Trace::Finite(t)) = (w.position, &w.local) else {
                return Ok(None);
            };
            let neg = Formula::not(w.formula.clone());
            let nw = crate::eval::eval_finite(t, &neg, pos, Polarity::Weak);
            let ns = crate::eval::eval_finite(t, &neg, pos, Polarity::Strong);
            let fw = crate::eval::eval_finite(t, &w.formula, pos, Polarity::Weak);
            let fs = crate::eval::eval_finite(t, &w.formula, pos, Polarity::Strong);
            let first = nw != !fs;
            let second = ns != !fw;
            Ok(Some(CaseOutcome {
                fails: first || second,
                left: if first { nw } else { ns },
                right: if first { !fs } else { !fw },
                detail: None,
            }))
        }
        Theorem::IteFlip => {
            let (Some(pos), Trace::Finite(t)) = (w.position, &w.local) else {
                return Ok(None);
            };
            let Formula::Atom(term) = w.formula.as_ref() else { return Ok(None) };
            let Term::Ite { cond, then_t, else_t, default } = term.as_ref() else {
                return Ok(None);
            };
            let flipped = Term::ite(
                Formula::not(cond.clone()),
                else_t.clone(),
                then_t.clone(),
                default.clone(),
            );
            let mut ev = RefEvaluator::new(t);
            let a = ev.term(term, pos);
            let b = ev.term(&flipped, pos);
            Ok(Some(CaseOutcome {
                fails: a != b,
                left: a.as_bool(),
                right: b.as_bool(),
                detail: None,
            }))
        }
        Theorem::PrefixWeakening => {
            let (Some(n), Trace::Lasso(t)) = (w.position, &w.local) else {
                return Ok(None);
            };
            let left = holds_lasso(t, &w.formula);
            let prefix = t.prefix(n)?;
            let right = crate::eval::holds_weak(&prefix, &w.formula);
            Ok(Some(CaseOutcome { fails: left && !right, left, right, detail: None }))
        }
        Theorem::SizeLinear => {
            let cs = ComponentSymbols::new("run", "end");
            let s = w.formula.size();
            let r = rewrite_base_top(&w.formula, &cs)?.size();
            Ok(Some(CaseOutcome {
                fails: r > SIZE_FACTOR * s + SIZE_OFFSET,
                left: true,
                right: r <= SIZE_FACTOR * s + SIZE_OFFSET,
                detail: Some(format!("source size {s}, rewritten size {r}")),
            }))
        }
        Theorem::SizeIteBlowup => {
            let Some(k) = w.position else { return Ok(None) };
            if k < 2 || k > ITE_LEVELS {
                return Ok(None);
            }
            let cs = ComponentSymbols::new("run", "end");
            let suite = make_suite(&SuiteConfig::default())?;
            let family = ite_family(&suite);
            let r_prev = rewrite_base(&family[k - 2], Polarity::Weak, &cs)?.size();
            let r_k = rewrite_base(&family[k - 1], Polarity::Weak, &cs)?.size();
            Ok(Some(CaseOutcome {
                fails: r_k < 2 * r_prev,
                left: true,
                right: r_k >= 2 * r_prev,
                detail: Some(format!("level {k}: {r_prev} -> {r_k}")),
            }))
        }
        Theorem::Projection => {
            let (Some(ix), Some(comp)) = (w.position, &w.component) else {
                return Ok(None);
            };
            let systems = projection_systems(w.seed)?;
            let Some((_, sys)) = systems.get(ix) else { return Ok(None) };
            let projected = sys.project_component(&w.local, comp)?;
            let member = is_trace_of(&sys.component(comp).expect("component exists").its, &projected)?;
            Ok(Some(CaseOutcome { fails: !member, left: true, right: member, detail: None }))
        }
    }
}

/// Whether the witnessed case still fails on replay.
pub fn witness_fails(w: &Witness) -> Result<bool, HarnessError> {
    Ok(replay_case(w)?.map_or(false, |o| o.fails))
}

fn still_fails(w: &Witness) -> bool {
    witness_fails(w).unwrap_or(false)
}

fn shorten_finite(t: &FiniteTrace) -> Option<FiniteTrace> {
    if t.len() < 2 {
        return None;
    }
    let mut states = t.states()[..t.len() - 1].to_vec();
    let last = states.last_mut().expect("nonempty");
    for (ix, v) in t.vocab.vars().iter().enumerate() {
        if v.io == IoClass::Input {
            last[ix] = None;
        }
    }
    FiniteTrace::new(t.vocab.clone(), states).ok()
}

fn shrink_once(w: &Witness) -> Option<Witness> {
    for child in formula_children(&w.formula) {
        let cand = Witness { formula: child, ..w.clone() };
        if still_fails(&cand) {
            return Some(cand);
        }
    }
    let shorten_traces = matches!(
        w.theorem,
        Theorem::BaseRewrite
            | Theorem::OptAgreesBase
            | Theorem::Tr
            | Theorem::W2s
            | Theorem::Duality
            | Theorem::EndOfTrace
    );
    if shorten_traces {
        if let Trace::Finite(t) = &w.local {
            if let Some(shorter) = shorten_finite(t) {
                let mut cand = Witness { local: Trace::Finite(shorter), ..w.clone() };
                if let Some(plan) = &mut cand.plan {
                    if plan.gaps.pop().is_none() {
                        return None;
                    }
                }
                if still_fails(&cand) {
                    return Some(cand);
                }
            }
        }
    }
    if w.theorem == Theorem::FairRewrite {
        if let Trace::Lasso(t) = &w.local {
            if t.stem_len() > 0 {
                let stem = t.stem()[..t.stem_len() - 1].to_vec();
                if let Ok(shorter) =
                    LassoTrace::new(t.vocab.clone(), stem, t.loop_states().to_vec())
                {
                    let mut cand = Witness { local: Trace::Lasso(shorter), ..w.clone() };
                    if let Some(plan) = &mut cand.plan {
                        plan.gaps.remove(t.stem_len() - 1);
                    }
                    if still_fails(&cand) {
                        return Some(cand);
                    }
                }
            }
        }
    }
    if let Some(plan) = &w.plan {
        for ix in 0..plan.gaps.len() {
            if plan.gaps[ix].is_empty() {
                continue;
            }
            let mut emptied = plan.clone();
            emptied.gaps[ix].clear();
            let cand = Witness { plan: Some(emptied), ..w.clone() };
            if still_fails(&cand) {
                return Some(cand);
            }
            let mut popped = plan.clone();
            popped.gaps[ix].pop();
            let cand = Witness { plan: Some(popped), ..w.clone() };
            if still_fails(&cand) {
                return Some(cand);
            }
        }
    }
    None
}

/// Greedily minimizes a failing witness: replaces the formula by a failing
/// subformula, shortens the local trace, and trims stuttering gaps, as long
/// as the case keeps failing on replay.
pub fn shrink(w: &Witness) -> Witness {
    let mut cur = w.clone();
    while let Some(next) = shrink_once(&cur) {
        cur = next;
    }
    cur
}

// Report assembly.

fn to_mismatch(rec: &FailRec) -> Mismatch {
    let w = &rec.witness;
    let (local_trace, embedded_trace) = match w.theorem {
        Theorem::SizeLinear | Theorem::SizeIteBlowup => (None, None),
        _ => {
            let lt = Some(trace_to_json(&w.local));
            let et = if let Some(plan) = &w.plan {
                embed(&w.local, plan).ok().map(|g| trace_to_json(&g))
            } else if let (Theorem::Tr, Some(filler), Trace::Finite(t)) =
                (w.theorem, &w.tail_filler, &w.local)
            {
                tr_extension(t, filler).ok().map(|e| trace_to_json(&Trace::Lasso(e)))
            } else {
                None
            };
            (lt, et)
        }
    };
    Mismatch {
        formula: w.formula.to_string(),
        local_trace,
        embedded_trace,
        local_verdict: rec.left,
        embedded_verdict: rec.right,
        detail: rec.detail.clone(),
    }
}

fn assemble(
    theorem: Theorem,
    cfg: &SuiteConfig,
    cases: u64,
    mut fails: Vec<FailRec>,
    info: Vec<String>,
    start: Instant,
) -> EquivalenceReport {
    if let Some(first) = fails.first_mut() {
        let shrunk = shrink(&first.witness);
        if let Ok(Some(outcome)) = replay_case(&shrunk) {
            if outcome.fails {
                let detail = outcome.detail.or_else(|| first.detail.clone());
                *first = FailRec {
                    witness: shrunk,
                    left: outcome.left,
                    right: outcome.right,
                    detail,
                };
            }
        }
    }
    let mismatches = fails.iter().take(MISMATCH_CAP).map(to_mismatch).collect();
    EquivalenceReport {
        theorem: theorem.name().to_string(),
        cases,
        mismatches,
        seed: cfg.seed,
        elapsed_ms: start.elapsed().as_millis() as u64,
        info,
    }
}

fn guard_cases(planned: u64, cfg: &SuiteConfig) -> Result<(), HarnessError> {
    if planned > cfg.max_cases {
        return Err(HarnessError::CaseCap { planned, cap: cfg.max_cases });
    }
    Ok(())
}

fn merge_fails(per_formula: Vec<Vec<FailRec>>) -> Vec<FailRec> {
    let mut out = Vec::new();
    for mut fails in per_formula {
        if out.len() >= MISMATCH_CAP {
            break;
        }
        out.append(&mut fails);
    }
    out.truncate(MISMATCH_CAP);
    out
}

// Suite drivers.

fn embedding_suite(
    cfg: &SuiteConfig,
    opt_vs_base: bool,
    kind: RewriterKind,
) -> Result<(u64, Vec<FailRec>), HarnessError> {
    let suite = make_suite(cfg)?;
    let symbols = ComponentSymbols::new("run", "end");
    let formulas = formulas_for(&suite, cfg);
    let locals = finite_locals(&suite.vocab, cfg.trace_len);
    let mut embeds: Vec<Vec<(EmbedPlan, Trace)>> = Vec::with_capacity(locals.len());
    for local in &locals {
        let plans = finite_plans(cfg, &suite, &symbols, local.len());
        let mut row = Vec::with_capacity(plans.len());
        let wrapped = Trace::Finite(local.clone());
        for plan in plans {
            let global = embed(&wrapped, &plan)?;
            row.push((plan, global));
        }
        embeds.push(row);
    }
    let per_formula: u64 = embeds.iter().map(|row| row.len() as u64).sum();
    let planned = formulas.len() as u64 * per_formula;
    guard_cases(planned, cfg)?;

    let theorem = if opt_vs_base { Theorem::OptAgreesBase } else { Theorem::BaseRewrite };
    let per: Result<Vec<Vec<FailRec>>, HarnessError> = formulas
        .par_iter()
        .map(|f| {
            let mut fails = Vec::new();
            let mut ws = Workspace::default();
            if opt_vs_base {
                let rb = rewrite_base_top(f, &symbols)?;
                let ro = rewrite_opt_top(f, &symbols)?;
                if rb == ro {
                    return Ok(fails);
                }
                let cb = Compiled::new(&rb);
                let co = Compiled::new(&ro);
                for (li, local) in locals.iter().enumerate() {
                    for (plan, global) in &embeds[li] {
                        let (bv, ov) = match global {
                            Trace::Finite(g) => (
                                cb.eval_at(g, &mut ws, 0, Polarity::Weak),
                                co.eval_at(g, &mut ws, 0, Polarity::Weak),
                            ),
                            Trace::Lasso(g) => (holds_lasso(g, &rb), holds_lasso(g, &ro)),
                        };
                        if bv != ov && fails.len() < PER_CASE_FAIL_CAP {
                            let mut w = Witness::new(
                                theorem,
                                f.clone(),
                                Trace::Finite(local.clone()),
                            );
                            w.plan = Some(plan.clone());
                            fails.push(FailRec::of(w, bv, ov));
                        }
                    }
                }
            } else {
                let rf = rewrite_base_top_with(f, &symbols, kind)?;
                let cf = Compiled::new(f);
                let cr = Compiled::new(&rf);
                for (li, local) in locals.iter().enumerate() {
                    let lv = cf.eval_at(local, &mut ws, 0, Polarity::Weak);
                    for (plan, global) in &embeds[li] {
                        let rv = match global {
                            Trace::Finite(g) => cr.eval_at(g, &mut ws, 0, Polarity::Weak),
                            Trace::Lasso(g) => holds_lasso(g, &rf),
                        };
                        if rv != lv && fails.len() < PER_CASE_FAIL_CAP {
                            let mut w = Witness::new(
                                theorem,
                                f.clone(),
                                Trace::Finite(local.clone()),
                            );
                            w.rewriter = kind;
                            w.plan = Some(plan.clone());
                            fails.push(FailRec::of(w, lv, rv));
                        }
                    }
                }
            }
            Ok(fails)
        })
        .collect();
    Ok((planned, merge_fails(per?)))
}

fn fair_suite(cfg: &SuiteConfig) -> Result<(u64, Vec<FailRec>), HarnessError> {
    let suite = make_suite(cfg)?;
    let symbols = ComponentSymbols::new("run", "end");
    let formulas = formulas_for(&suite, cfg);
    let locals = lasso_locals(&suite.vocab, cfg.stem_bound, cfg.loop_bound);
    let mut embeds: Vec<Vec<(EmbedPlan, Trace)>> = Vec::with_capacity(locals.len());
    for local in &locals {
        let samples = local.stem_len() + local.loop_len();
        let plans = lasso_plans(cfg, &suite, &symbols, samples);
        let mut row = Vec::with_capacity(plans.len());
        let wrapped = Trace::Lasso(local.clone());
        for plan in plans {
            let global = embed(&wrapped, &plan)?;
            row.push((plan, global));
        }
        embeds.push(row);
    }
    let per_formula: u64 = embeds.iter().map(|row| row.len() as u64).sum();
    let planned = formulas.len() as u64 * per_formula;
    guard_cases(planned, cfg)?;

    let per: Result<Vec<Vec<FailRec>>, HarnessError> = formulas
        .par_iter()
        .map(|f| {
            let mut fails = Vec::new();
            let rf = rewrite_fair_top(f, &symbols)?;
            for (li, local) in locals.iter().enumerate() {
                let lv = holds_lasso(local, f);
                for (plan, global) in &embeds[li] {
                    let rv = holds(global, &rf);
                    if rv != lv && fails.len() < PER_CASE_FAIL_CAP {
                        let mut w =
                            Witness::new(Theorem::FairRewrite, f.clone(), Trace::Lasso(local.clone()));
                        w.plan = Some(plan.clone());
                        fails.push(FailRec::of(w, lv, rv));
                    }
                }
            }
            Ok(fails)
        })
        .collect();
    Ok((planned, merge_fails(per?)))
}

fn tr_suite(cfg: &SuiteConfig) -> Result<(u64, Vec<FailRec>), HarnessError> {
    let suite = make_suite(cfg)?;
    let formulas = formulas_for(&suite, cfg);
    let translatable: Vec<(FormulaRef, FormulaRef, FormulaRef)> = formulas
        .iter()
        .filter_map(|f| {
            let wf = tr_rewrite(f, Polarity::Weak).ok()?;
            let sf = tr_rewrite(f, Polarity::Strong).ok()?;
            Some((f.clone(), wf, sf))
        })
        .collect();
    let locals = finite_locals(&suite.vocab, cfg.trace_len);
    let fillers = input_combos(&suite);
    let mut extensions: Vec<Vec<LassoTrace>> = Vec::with_capacity(locals.len());
    for local in &locals {
        let mut row = Vec::with_capacity(fillers.len());
        for filler in &fillers {
            row.push(tr_extension(local, filler)?);
        }
        extensions.push(row);
    }
    let planned =
        translatable.len() as u64 * locals.len() as u64 * fillers.len() as u64 * 2;
    guard_cases(planned, cfg)?;

    let per: Result<Vec<Vec<FailRec>>, HarnessError> = translatable
        .par_iter()
        .map(|(f, wf, sf)| {
            let mut fails = Vec::new();
            let compiled = Compiled::new(f);
            let mut ws = Workspace::default();
            for (li, local) in locals.iter().enumerate() {
                for (fi, filler) in fillers.iter().enumerate() {
                    let ext = &extensions[li][fi];
                    for (pol, rf) in
                        [(Polarity::Weak, wf), (Polarity::Strong, sf)]
                    {
                        let lv = compiled.eval_at(local, &mut ws, 0, pol);
                        let rv = holds_lasso(ext, rf);
                        if lv != rv && fails.len() < PER_CASE_FAIL_CAP {
                            let mut w =
                                Witness::new(Theorem::Tr, f.clone(), Trace::Finite(local.clone()));
                            w.polarity = Some(pol);
                            w.tail_filler = Some(filler.clone());
                            fails.push(FailRec::of(w, lv, rv));
                        }
                    }
                }
            }
            Ok(fails)
        })
        .collect();
    Ok((planned, merge_fails(per?)))
}

fn w2s_suite(cfg: &SuiteConfig) -> Result<(u64, Vec<FailRec>), HarnessError> {
    let suite = make_suite(cfg)?;
    let formulas = formulas_for(&suite, cfg);
    let translated: Vec<(FormulaRef, FormulaRef)> = formulas
        .iter()
        .filter(|f| term_simple(f))
        .filter_map(|f| {
            let nnf = to_nnf(&desugar(f));
            Some((f.clone(), w2s(&nnf).ok()?))
        })
        .collect();
    let finite = finite_locals(&suite.vocab, cfg.trace_len);
    let lassos = lasso_locals(&suite.vocab, cfg.stem_bound, cfg.loop_bound);
    let planned =
        translated.len() as u64 * (finite.len() as u64 + 2 * lassos.len() as u64);
    guard_cases(planned, cfg)?;

    let per: Result<Vec<Vec<FailRec>>, HarnessError> = translated
        .par_iter()
        .map(|(f, tf)| {
            let mut fails = Vec::new();
            let cf = Compiled::new(f);
            let ct = Compiled::new(tf);
            let mut ws = Workspace::default();
            for local in &finite {
                let a = cf.eval_at(local, &mut ws, 0, Polarity::Weak);
                let b = ct.eval_at(local, &mut ws, 0, Polarity::Weak);
                if a != b && fails.len() < PER_CASE_FAIL_CAP {
                    let w = Witness::new(Theorem::W2s, f.clone(), Trace::Finite(local.clone()));
                    fails.push(FailRec::with_detail(
                        w,
                        a,
                        b,
                        "weak verdict differs from the weak-to-safety translation".to_string(),
                    ));
                }
            }
            for lasso in &lassos {
                for g in [f, tf] {
                    let a = holds_lasso(lasso, g);
                    let b = brute_eval_lasso(lasso, g, 0);
                    if a != b && fails.len() < PER_CASE_FAIL_CAP {
                        let w =
                            Witness::new(Theorem::W2s, g.clone(), Trace::Lasso(lasso.clone()));
                        fails.push(FailRec::with_detail(
                            w,
                            a,
                            b,
                            "fixpoint and horizon lasso engines disagree".to_string(),
                        ));
                    }
                }
            }
            Ok(fails)
        })
        .collect();
    Ok((planned, merge_fails(per?)))
}

fn end_of_trace_suite(cfg: &SuiteConfig) -> Result<(u64, Vec<FailRec>), HarnessError> {
    let suite = make_suite(cfg)?;
    let formulas = formulas_for(&suite, cfg);
    let locals = finite_locals(&suite.vocab, cfg.trace_len);
    let planned = formulas.len() as u64 * locals.len() as u64 * 2;
    guard_cases(planned, cfg)?;
    let per: Result<Vec<Vec<FailRec>>, HarnessError> = formulas
        .par_iter()
        .map(|f| {
            let mut fails = Vec::new();
            let compiled = Compiled::new(f);
            let mut ws = Workspace::default();
            for local in &locals {
                for pos in [local.len(), local.len() + 1] {
                    let weak = compiled.eval_at(local, &mut ws, pos, Polarity::Weak);
                    let strong = compiled.eval_at(local, &mut ws, pos, Polarity::Strong);
                    if (!weak || strong) && fails.len() < PER_CASE_FAIL_CAP {
                        let mut w = Witness::new(
                            Theorem::EndOfTrace,
                            f.clone(),
                            Trace::Finite(local.clone()),
                        );
                        w.position = Some(pos);
                        fails.push(FailRec::with_detail(
                            w,
                            weak,
                            !strong,
                            format!("position {pos} past the end"),
                        ));
                    }
                }
            }
            Ok(fails)
        })
        .collect();
    Ok((planned, merge_fails(per?)))
}

fn duality_suite(cfg: &SuiteConfig) -> Result<(u64, Vec<FailRec>), HarnessError> {
    let suite = make_suite(cfg)?;
    let formulas = formulas_for(&suite, cfg);
    let locals = finite_locals(&suite.vocab, cfg.trace_len);
    let positions: u64 = locals.iter().map(|t| t.len() as u64 + 1).sum();
    let planned = formulas.len() as u64 * positions;
    guard_cases(planned, cfg)?;
    let per: Result<Vec<Vec<FailRec>>, HarnessError> = formulas
        .par_iter()
        .map(|f| {
            let mut fails = Vec::new();
            let neg = Formula::not(f.clone());
            let cf = Compiled::new(f);
            let cn = Compiled::new(&neg);
            let mut ws = Workspace::default();
            for local in &locals {
                for pos in 0..=local.len() {
                    let nw = cn.eval_at(local, &mut ws, pos, Polarity::Weak);
                    let ns = cn.eval_at(local, &mut ws, pos, Polarity::Strong);
                    let fw = cf.eval_at(local, &mut ws, pos, Polarity::Weak);
                    let fs = cf.eval_at(local, &mut ws, pos, Polarity::Strong);
                    if (nw != !fs || ns != !fw) && fails.len() < PER_CASE_FAIL_CAP {
                        let mut w = Witness::new(
                            Theorem::Duality,
                            f.clone(),
                            Trace::Finite(local.clone()),
                        );
                        w.position = Some(pos);
                        let (l, r) = if nw != !fs { (nw, !fs) } else { (ns, !fw) };
                        fails.push(FailRec::with_detail(
                            w,
                            l,
                            r,
                            format!("negation duality broke at position {pos}"),
                        ));
                    }
                }
            }
            Ok(fails)
        })
        .collect();
    Ok((planned, merge_fails(per?)))
}

fn ite_flip_suite(cfg: &SuiteConfig) -> Result<(u64, Vec<FailRec>), HarnessError> {
    let suite = make_suite(cfg)?;
    let conds = close_under_ops(&literal_pool(&suite), cfg.depth.min(TERM_DEPTH));
    let fi = suite.inputs[0].clone();
    let fo = suite.outputs[0].clone();
    let branch_pairs: Vec<(TermRef, TermRef)> = vec![
        (Term::var(fi.clone()), Term::var(fo.clone())),
        (Term::var(fo.clone()), Term::var(fi.clone())),
        (Term::var(fo.clone()), Term::bool_const(true)),
        (Term::bool_const(false), Term::var(fi.clone())),
    ];
    let mut terms: Vec<(TermRef, TermRef)> = Vec::new();
    for cond in &conds {
        for (u1, u2) in &branch_pairs {
            let t = Term::ite(cond.clone(), u1.clone(), u2.clone(), None);
            let flipped =
                Term::ite(Formula::not(cond.clone()), u2.clone(), u1.clone(), None);
            terms.push((t, flipped));
        }
    }
    let locals = finite_locals(&suite.vocab, cfg.trace_len);
    let positions: u64 = locals.iter().map(|t| t.len() as u64).sum();
    let planned = terms.len() as u64 * positions;
    guard_cases(planned, cfg)?;

    let mut fails = Vec::new();
    let mut cases = 0u64;
    for local in &locals {
        let mut ev = RefEvaluator::new(local);
        for (t, flipped) in &terms {
            for pos in 0..local.len() {
                cases += 1;
                let a = ev.term(t, pos);
                let b = ev.term(flipped, pos);
                if a != b && fails.len() < MISMATCH_CAP {
                    let mut w = Witness::new(
                        Theorem::IteFlip,
                        Formula::atom(t.clone()),
                        Trace::Finite(local.clone()),
                    );
                    w.position = Some(pos);
                    fails.push(FailRec::with_detail(
                        w,
                        a.as_bool(),
                        b.as_bool(),
                        format!("conditional changed value at position {pos}"),
                    ));
                }
            }
        }
    }
    Ok((cases, fails))
}

fn prefix_weakening_suite(cfg: &SuiteConfig) -> Result<(u64, Vec<FailRec>), HarnessError> {
    let suite = make_suite(cfg)?;
    let formulas: Vec<FormulaRef> = formulas_for(&suite, cfg)
        .into_iter()
        .filter(term_simple)
        .collect();
    let lassos = lasso_locals(&suite.vocab, cfg.stem_bound, cfg.loop_bound);
    let planned = formulas.len() as u64 * lassos.len() as u64;
    guard_cases(planned, cfg)?;
    let per: Result<Vec<(u64, Vec<FailRec>)>, HarnessError> = formulas
        .par_iter()
        .map(|f| {
            let mut fails = Vec::new();
            let mut cases = 0u64;
            let compiled = Compiled::new(f);
            let mut ws = Workspace::default();
            for lasso in &lassos {
                cases += 1;
                if !holds_lasso(lasso, f) {
                    continue;
                }
                for n in 1..=lasso.stem_len() + lasso.loop_len() {
                    cases += 1;
                    let prefix = lasso.prefix(n)?;
                    if !compiled.eval_at(&prefix, &mut ws, 0, Polarity::Weak)
                        && fails.len() < PER_CASE_FAIL_CAP
                    {
                        let mut w = Witness::new(
                            Theorem::PrefixWeakening,
                            f.clone(),
                            Trace::Lasso(lasso.clone()),
                        );
                        w.position = Some(n);
                        fails.push(FailRec::with_detail(
                            w,
                            true,
                            false,
                            format!("prefix of length {n} fails weakly"),
                        ));
                    }
                }
            }
            Ok((cases, fails))
        })
        .collect();
    let per = per?;
    let cases = per.iter().map(|(c, _)| c).sum();
    Ok((cases, merge_fails(per.into_iter().map(|(_, f)| f).collect())))
}

fn size_linear_suite(cfg: &SuiteConfig) -> Result<(u64, Vec<FailRec>), HarnessError> {
    let suite = make_suite(cfg)?;
    let symbols = ComponentSymbols::new("run", "end");
    let formulas: Vec<FormulaRef> =
        formulas_for(&suite, cfg).into_iter().filter(ite_free).collect();
    let planned = formulas.len() as u64;
    guard_cases(planned, cfg)?;
    let dummy = unit_local(&suite);
    let per: Result<Vec<Vec<FailRec>>, HarnessError> = formulas
        .par_iter()
        .map(|f| {
            let mut fails = Vec::new();
            let s = f.size();
            let r = rewrite_base_top(f, &symbols)?.size();
            if r > SIZE_FACTOR * s + SIZE_OFFSET {
                let w = Witness::new(Theorem::SizeLinear, f.clone(), dummy.clone());
                fails.push(FailRec::with_detail(
                    w,
                    true,
                    false,
                    format!(
                        "size {r} exceeds {SIZE_FACTOR} * {s} + {SIZE_OFFSET}"
                    ),
                ));
            }
            Ok(fails)
        })
        .collect();
    Ok((planned, merge_fails(per?)))
}

/// Nested conditionals whose guard repeats the previous level, so the
/// rewriting duplicates it once per level.
fn ite_family(suite: &SuiteVocab) -> Vec<FormulaRef> {
    let fi = suite.inputs[0].clone();
    let fo = suite.outputs[0].clone();
    let mut cond = Formula::var(fi);
    let mut out = Vec::with_capacity(ITE_LEVELS);
    for _ in 0..ITE_LEVELS {
        let t = Term::ite(cond.clone(), Term::var(fo.clone()), Term::var(fo.clone()), None);
        out.push(Formula::atom(t.clone()));
        cond = Formula::atom(t);
    }
    out
}

fn size_blowup_suite(
    cfg: &SuiteConfig,
) -> Result<(u64, Vec<FailRec>, Vec<String>), HarnessError> {
    let suite = make_suite(cfg)?;
    let symbols = ComponentSymbols::new("run", "end");
    let family = ite_family(&suite);
    let dummy = unit_local(&suite);
    let mut info = Vec::new();
    let mut fails = Vec::new();
    let mut sizes: Vec<(usize, usize)> = Vec::new();
    for (k, f) in family.iter().enumerate() {
        let s = f.size();
        let r = rewrite_base(f, Polarity::Weak, &symbols)?.size();
        info.push(format!(
            "level {}: source {} rewritten {} ratio {:.2}",
            k + 1,
            s,
            r,
            r as f64 / s as f64
        ));
        sizes.push((s, r));
    }
    for k in 1..sizes.len() {
        let (s_prev, r_prev) = sizes[k - 1];
        let (s_k, r_k) = sizes[k];
        if r_k < 2 * r_prev {
            let mut w =
                Witness::new(Theorem::SizeIteBlowup, family[k].clone(), dummy.clone());
            w.position = Some(k + 1);
            fails.push(FailRec::with_detail(
                w,
                true,
                false,
                format!("level {} grew from {r_prev} to only {r_k}", k + 1),
            ));
        }
        if r_k * s_prev <= r_prev * s_k {
            let mut w =
                Witness::new(Theorem::SizeIteBlowup, family[k].clone(), dummy.clone());
            w.position = Some(k + 1);
            fails.push(FailRec::with_detail(
                w,
                true,
                false,
                format!("blowup ratio stalled at level {}", k + 1),
            ));
        }
    }
    Ok((family.len() as u64, fails, info))
}

fn unit_local(suite: &SuiteVocab) -> Trace {
    let state = final_states(&suite.vocab)
        .into_iter()
        .next()
        .expect("boolean sorts are inhabited");
    Trace::Finite(
        FiniteTrace::new(suite.vocab.clone(), vec![state]).expect("unit state is well sorted"),
    )
}

// Projection suite.

fn iff(a: FormulaRef, b: FormulaRef) -> FormulaRef {
    Formula::and(Formula::implies(a.clone(), b.clone()), Formula::implies(b, a))
}

fn primed(v: &Arc<VarInfo>) -> FormulaRef {
    Formula::atom(Term::next(Term::var(v.clone()), None))
}

fn sender_system() -> Result<ComposedIts, ItsError> {
    let rec = VarInfo::bool_input("rec_1");
    let try_ = VarInfo::bool_output("try_1");
    let send = VarInfo::bool_output("send_1");
    let c1 = Its::new(
        "c1",
        vec![rec.clone()],
        vec![try_.clone(), send.clone()],
        Formula::and(
            Formula::not(Formula::var(try_.clone())),
            Formula::not(Formula::var(send.clone())),
        ),
        Formula::and(
            iff(
                primed(&send),
                Formula::or(Formula::var(send.clone()), Formula::var(try_.clone())),
            ),
            iff(
                primed(&try_),
                Formula::and(
                    Formula::or(Formula::var(rec.clone()), Formula::var(try_.clone())),
                    Formula::not(Formula::or(
                        Formula::var(send.clone()),
                        Formula::var(try_.clone()),
                    )),
                ),
            ),
        ),
        Vec::new(),
    )?;
    let send_in = VarInfo::bool_input("send_1");
    let send2 = VarInfo::bool_output("send_2");
    let c2 = Its::new(
        "c2",
        vec![send_in.clone()],
        vec![send2.clone()],
        Formula::not(Formula::var(send2.clone())),
        iff(
            primed(&send2),
            Formula::or(Formula::var(send2.clone()), Formula::var(send_in.clone())),
        ),
        Vec::new(),
    )?;
    compose(&[c1, c2])
}

fn toy_update(ix: u8, me: &FormulaRef, other: &FormulaRef) -> FormulaRef {
    match ix {
        0 => me.clone(),
        1 => other.clone(),
        2 => Formula::not(me.clone()),
        3 => Formula::not(other.clone()),
        4 => Formula::or(me.clone(), other.clone()),
        5 => Formula::and(me.clone(), other.clone()),
        6 => Formula::not(Formula::and(me.clone(), other.clone())),
        _ => Formula::or(me.clone(), Formula::not(other.clone())),
    }
}

fn toy_component(
    name: &str,
    out_name: &str,
    in_name: &str,
    init_high: bool,
    update: u8,
) -> Result<Its, ItsError> {
    let out = VarInfo::bool_output(out_name);
    let inp = VarInfo::bool_input(in_name);
    let me = Formula::var(out.clone());
    let other = Formula::var(inp.clone());
    let init = if init_high { me.clone() } else { Formula::not(me.clone()) };
    let trans = iff(primed(&out), toy_update(update, &me, &other));
    Its::new(name, vec![inp], vec![out], init, trans, Vec::new())
}

/// The projection suite's systems: the two-component sender plus seeded
/// random two-component toys whose outputs feed each other's inputs.
fn projection_systems(seed: u64) -> Result<Vec<(String, ComposedIts)>, HarnessError> {
    let mut out = vec![("sender".to_string(), sender_system()?)];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for k in 1..=TOY_SYSTEMS {
        let a = toy_component("a", "p", "q", rng.gen(), rng.gen_range(0..8))?;
        let b = toy_component("b", "q", "p", rng.gen(), rng.gen_range(0..8))?;
        out.push((format!("toy-{k:02}"), compose(&[a, b])?));
    }
    Ok(out)
}

fn projection_suite(
    cfg: &SuiteConfig,
) -> Result<(u64, Vec<FailRec>, Vec<String>), HarnessError> {
    let systems = projection_systems(cfg.seed)?;
    let opts = EnumOptions { state_cap: PROJECTION_STATE_CAP };
    let per: Result<Vec<(u64, Vec<FailRec>, String)>, HarnessError> = systems
        .par_iter()
        .enumerate()
        .map(|(ix, (label, sys))| {
            let mut cases = 0u64;
            let mut fails = Vec::new();
            let summary;
            match certify_projection(sys, &opts)? {
                CertifyOutcome::Certified { states, edges } => {
                    cases += 1;
                    summary = format!("certified over {states} states and {edges} edges");
                }
                CertifyOutcome::Failed { component, detail } => {
                    let mut w = Witness::new(
                        Theorem::Projection,
                        Formula::tt(),
                        unit_trace_of(sys),
                    );
                    w.position = Some(ix);
                    w.seed = cfg.seed;
                    fails.push(FailRec::with_detail(
                        w,
                        true,
                        false,
                        format!("{label}: certification failed for {component}: {detail}"),
                    ));
                    summary = "certification failed".to_string();
                }
            }
            let bounds = if label == "sender" {
                EnumBounds {
                    stem: cfg.stem_bound.min(SENDER_STEM_CAP),
                    loop_: Some(cfg.loop_bound.min(SENDER_LOOP_CAP)),
                }
            } else {
                EnumBounds { stem: cfg.stem_bound, loop_: Some(cfg.loop_bound) }
            };
            let mut walk_error: Option<HarnessError> = None;
            let mut traces = 0u64;
            sys.visit_traces(bounds, &opts, &mut |trace| {
                traces += 1;
                for comp in &sys.components {
                    cases += 1;
                    let outcome = sys
                        .project_component(&trace, &comp.its.name)
                        .and_then(|projected| is_trace_of(&comp.its, &projected));
                    match outcome {
                        Ok(true) => {}
                        Ok(false) => {
                            if fails.len() < PER_CASE_FAIL_CAP {
                                let mut w = Witness::new(
                                    Theorem::Projection,
                                    Formula::tt(),
                                    trace.clone(),
                                );
                                w.position = Some(ix);
                                w.component = Some(comp.its.name.clone());
                                w.seed = cfg.seed;
                                fails.push(FailRec::with_detail(
                                    w,
                                    true,
                                    false,
                                    format!(
                                        "{label}: projection left {}'s language",
                                        comp.its.name
                                    ),
                                ));
                            }
                        }
                        Err(e) => {
                            walk_error = Some(e.into());
                            return ControlFlow::Break(());
                        }
                    }
                }
                ControlFlow::Continue(())
            })?;
            if let Some(e) = walk_error {
                return Err(e);
            }
            Ok((cases, fails, format!("{label}: {traces} traces, {summary}")))
        })
        .collect();
    let per = per?;
    let cases = per.iter().map(|(c, _, _)| c).sum();
    let info = per.iter().map(|(_, _, s)| s.clone()).collect();
    let fails = merge_fails(per.into_iter().map(|(_, f, _)| f).collect());
    Ok((cases, fails, info))
}

fn unit_trace_of(sys: &ComposedIts) -> Trace {
    let state: State = sys
        .its
        .vocab
        .vars()
        .iter()
        .map(|v| match v.io {
            IoClass::Output => Some(v.sort.default_value()),
            IoClass::Input => None,
        })
        .collect();
    Trace::Finite(
        FiniteTrace::new(sys.its.vocab.clone(), vec![state])
            .expect("default state is well sorted"),
    )
}

// Entry points.

/// Runs one theorem suite and reports every mismatch found, with the first
/// witness shrunk. The same configuration always produces the same report
/// (modulo `elapsed_ms`; see [`EquivalenceReport::canonical_json`]).
pub fn check_theorem(
    theorem: Theorem,
    cfg: &SuiteConfig,
) -> Result<EquivalenceReport, HarnessError> {
    if theorem == Theorem::BaseRewrite {
        return check_base_rewrite_with(cfg, RewriterKind::Correct);
    }
    cfg.validate()?;
    let start = Instant::now();
    let (cases, fails, info) = match theorem {
        Theorem::BaseRewrite => unreachable!("handled above"),
        Theorem::OptAgreesBase => {
            let (c, f) = embedding_suite(cfg, true, RewriterKind::Correct)?;
            (c, f, Vec::new())
        }
        Theorem::FairRewrite => {
            let (c, f) = fair_suite(cfg)?;
            (c, f, Vec::new())
        }
        Theorem::Tr => {
            let (c, f) = tr_suite(cfg)?;
            (c, f, Vec::new())
        }
        Theorem::W2s => {
            let (c, f) = w2s_suite(cfg)?;
            (c, f, Vec::new())
        }
        Theorem::Projection => projection_suite(cfg)?,
        Theorem::SizeLinear => {
            let (c, f) = size_linear_suite(cfg)?;
            (c, f, Vec::new())
        }
        Theorem::SizeIteBlowup => size_blowup_suite(cfg)?,
        Theorem::EndOfTrace => {
            let (c, f) = end_of_trace_suite(cfg)?;
            (c, f, Vec::new())
        }
        Theorem::Duality => {
            let (c, f) = duality_suite(cfg)?;
            (c, f, Vec::new())
        }
        Theorem::IteFlip => {
            let (c, f) = ite_flip_suite(cfg)?;
            (c, f, Vec::new())
        }
        Theorem::PrefixWeakening => {
            let (c, f) = prefix_weakening_suite(cfg)?;
            (c, f, Vec::new())
        }
    };
    Ok(assemble(theorem, cfg, cases, fails, info, start))
}

/// [`check_theorem`] by selector name.
pub fn check_theorem_named(
    name: &str,
    cfg: &SuiteConfig,
) -> Result<EquivalenceReport, HarnessError> {
    let theorem =
        Theorem::from_name(name).ok_or_else(|| HarnessError::UnknownTheorem(name.to_string()))?;
    check_theorem(theorem, cfg)
}

/// The base embedding suite with an explicit rewriter variant. Running it
/// with the deliberately broken variant confirms the harness reports the
/// injected defect.
pub fn check_base_rewrite_with(
    cfg: &SuiteConfig,
    kind: RewriterKind,
) -> Result<EquivalenceReport, HarnessError> {
    cfg.validate()?;
    let start = Instant::now();
    let (cases, fails) = embedding_suite(cfg, false, kind)?;
    Ok(assemble(Theorem::BaseRewrite, cfg, cases, fails, Vec::new(), start))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sort::Sort;

    fn tiny(depth: usize, len: usize) -> SuiteConfig {
        SuiteConfig { depth, trace_len: len, ..SuiteConfig::default() }
    }

    #[test]
    fn theorem_names_round_trip() {
        for t in Theorem::ALL {
            assert_eq!(Theorem::from_name(t.name()), Some(t));
        }
        assert_eq!(Theorem::from_name("nonsense"), None);
    }

    #[test]
    fn bounds_are_validated() {
        let mut cfg = SuiteConfig::default();
        cfg.depth = 5;
        assert!(matches!(cfg.validate(), Err(HarnessError::DepthTooLarge(5))));
        cfg.depth = 2;
        cfg.trace_len = 0;
        assert!(matches!(cfg.validate(), Err(HarnessError::ZeroBound("trace_len"))));
        cfg.trace_len = 3;
        cfg.tail_modes.clear();
        assert!(matches!(cfg.validate(), Err(HarnessError::ZeroBound("tail_modes"))));
    }

    #[test]
    fn depth_one_enumerates_both_literal_polarities() {
        let cfg = SuiteConfig { depth: 1, include_terms: false, ..SuiteConfig::default() };
        let fs = enumerate_formulas(&cfg).unwrap();
        let i = VarInfo::bool_input("i");
        let o = VarInfo::bool_output("o");
        let expected = vec![
            Formula::tt(),
            Formula::ff(),
            Formula::var(i.clone()),
            Formula::var(o.clone()),
            Formula::not(Formula::var(i)),
            Formula::not(Formula::var(o)),
        ];
        assert_eq!(fs, expected);
    }

    #[test]
    fn depth_two_count_matches_the_closed_form() {
        // Pool of 6 literals; unary step: 3 * 6 candidates of which the two
        // negated literals already sit in the pool; binary step: 3 * 6 * 6
        // fresh combinations. Total 6 + (18 - 2) + 108 = 130.
        let cfg = SuiteConfig { depth: 2, include_terms: false, ..SuiteConfig::default() };
        let fs = enumerate_formulas(&cfg).unwrap();
        assert_eq!(fs.len(), 130);
        let i = VarInfo::bool_input("i");
        for probe in [
            Formula::next(Formula::var(i.clone())),
            Formula::yesterday(Formula::var(i.clone())),
            Formula::until(Formula::var(i.clone()), Formula::var(i.clone())),
        ] {
            assert!(fs.contains(&probe));
        }
    }

    #[test]
    fn term_atoms_stay_in_shallow_strata() {
        let cfg = SuiteConfig { depth: 3, ..SuiteConfig::default() };
        let fs = enumerate_formulas(&cfg).unwrap();
        let suite = make_suite(&cfg).unwrap();
        let i = VarInfo::bool_input("i");
        let deep = Formula::next(Formula::next(Formula::var(i.clone())));
        assert!(fs.contains(&deep));
        assert!(fs.contains(&Formula::atom(Term::next(Term::var(i), None))));
        // Every term-bearing formula comes from the shallow closure; none
        // gets a third stratum of operators.
        let mut full = literal_pool(&suite);
        full.extend(term_pool(&suite));
        let shallow: HashSet<String> = close_under_ops(&full, TERM_DEPTH)
            .iter()
            .map(|f| f.to_string())
            .collect();
        for f in &fs {
            if !term_simple(f) {
                assert!(shallow.contains(&f.to_string()), "term formula too deep: {f}");
            }
        }
    }

    #[test]
    fn deep_suites_are_rejected() {
        let cfg = SuiteConfig { depth: 5, ..SuiteConfig::default() };
        assert!(matches!(
            enumerate_formulas(&cfg),
            Err(HarnessError::DepthTooLarge(5))
        ));
    }

    #[test]
    fn absurd_case_counts_are_rejected() {
        let cfg = SuiteConfig { max_cases: 10, ..SuiteConfig::default() };
        assert!(matches!(
            check_theorem(Theorem::BaseRewrite, &cfg),
            Err(HarnessError::CaseCap { .. })
        ));
    }

    #[test]
    fn finite_locals_cover_every_shape() {
        let cfg = SuiteConfig::default();
        let suite = make_suite(&cfg).unwrap();
        let locals = finite_locals(&suite.vocab, 3);
        assert_eq!(locals.len(), 2 + 8 + 32);
        for t in &locals {
            let last = &t.states()[t.len() - 1];
            for (ix, v) in suite.vocab.vars().iter().enumerate() {
                if v.io == IoClass::Input {
                    assert!(last[ix].is_none());
                } else {
                    assert!(last[ix].is_some());
                }
            }
            for s in &t.states()[..t.len() - 1] {
                assert!(s.iter().all(Option::is_some));
            }
        }
    }

    #[test]
    fn lasso_locals_cover_every_split() {
        let cfg = SuiteConfig::default();
        let suite = make_suite(&cfg).unwrap();
        let locals = lasso_locals(&suite.vocab, 2, 2);
        // Stems 0..=2 and loops 1..=2 over four full states:
        // (1 + 4 + 16) lasso shapes sharing... counted directly:
        // sum over stem s, loop p of 4^(s+p) = 20 + 80 + 320.
        assert_eq!(locals.len(), 420);
    }

    #[test]
    fn finite_plans_enumerate_gaps_fillers_and_tails() {
        let cfg = SuiteConfig::default();
        let suite = make_suite(&cfg).unwrap();
        let symbols = ComponentSymbols::new("run", "end");
        let plans = finite_plans(&cfg, &suite, &symbols, 2);
        // One gap block with options {empty, [false], [true]}, two tails.
        assert_eq!(plans.len(), 6);
        for p in &plans {
            if let TailPlan::NoRunLoop { final_inputs, loop_inputs } = &p.tail {
                assert_eq!(final_inputs, &vec![Value::Bool(false)]);
                assert_eq!(loop_inputs, &vec![vec![Value::Bool(true)]]);
            }
        }
    }

    #[test]
    fn lasso_plans_respect_the_gap_budget() {
        let cfg = SuiteConfig { gap_bound: 2, ..SuiteConfig::default() };
        let suite = make_suite(&cfg).unwrap();
        let symbols = ComponentSymbols::new("run", "end");
        let plans = lasso_plans(&cfg, &suite, &symbols, 3);
        // Length vectors over three blocks with total <= 2: 1 with total 0,
        // 3 with total 1, 6 with total 2; nonzero totals carry two filler
        // modes.
        assert_eq!(plans.len(), 1 + 3 * 2 + 6 * 2);
        for p in &plans {
            let total: usize = p.gaps.iter().map(Vec::len).sum();
            assert!(total <= 2);
            assert_eq!(p.tail, TailPlan::None);
        }
    }

    #[test]
    fn base_suite_is_clean_at_tiny_bounds() {
        let report = check_theorem(Theorem::BaseRewrite, &tiny(2, 2)).unwrap();
        assert!(report.passed(), "{}", report.to_json());
        assert!(report.cases > 10_000);
    }

    #[test]
    fn opt_agrees_with_base_at_tiny_bounds() {
        let report = check_theorem(Theorem::OptAgreesBase, &tiny(2, 2)).unwrap();
        assert!(report.passed(), "{}", report.to_json());
    }

    #[test]
    fn fair_suite_is_clean_at_tiny_bounds() {
        let cfg = SuiteConfig {
            depth: 2,
            include_terms: false,
            stem_bound: 1,
            loop_bound: 1,
            ..SuiteConfig::default()
        };
        let report = check_theorem(Theorem::FairRewrite, &cfg).unwrap();
        assert!(report.passed(), "{}", report.to_json());
        assert!(report.cases > 1_000);
    }

    #[test]
    fn tr_suite_is_clean_at_tiny_bounds() {
        let report = check_theorem(Theorem::Tr, &tiny(2, 3)).unwrap();
        assert!(report.passed(), "{}", report.to_json());
        assert!(report.cases > 1_000, "most formulas should translate");
    }

    #[test]
    fn w2s_suite_is_clean_at_tiny_bounds() {
        let cfg = SuiteConfig { stem_bound: 1, ..tiny(2, 3) };
        let report = check_theorem(Theorem::W2s, &cfg).unwrap();
        assert!(report.passed(), "{}", report.to_json());
        assert!(report.cases > 1_000, "most plain formulas should translate");
    }

    #[test]
    fn end_of_trace_and_duality_hold_at_tiny_bounds() {
        let report = check_theorem(Theorem::EndOfTrace, &tiny(2, 3)).unwrap();
        assert!(report.passed(), "{}", report.to_json());
        let report = check_theorem(Theorem::Duality, &tiny(2, 3)).unwrap();
        assert!(report.passed(), "{}", report.to_json());
    }

    #[test]
    fn ite_flip_holds_at_tiny_bounds() {
        let report = check_theorem(Theorem::IteFlip, &tiny(2, 3)).unwrap();
        assert!(report.passed(), "{}", report.to_json());
    }

    #[test]
    fn prefix_weakening_holds_for_term_simple_formulas() {
        let cfg = SuiteConfig { stem_bound: 2, loop_bound: 2, ..tiny(2, 3) };
        let report = check_theorem(Theorem::PrefixWeakening, &cfg).unwrap();
        assert!(report.passed(), "{}", report.to_json());
    }

    #[test]
    fn at_next_defeats_prefix_weakening() {
        // The law is restricted to term-simple formulas: a forward scan can
        // find its trigger in the loop while a prefix cut before the
        // trigger resolves the read to the default.
        let q = VarInfo::bool_output("q");
        let o = VarInfo::bool_output("o");
        let vocab = Vocab::new(vec![q.clone(), o.clone()]).unwrap();
        let lo = |b: bool| Some(Value::Bool(b));
        let off: State = vec![lo(false), lo(false)];
        let on: State = vec![lo(true), lo(true)];
        let lasso =
            LassoTrace::new(vocab, vec![off.clone()], vec![off, on]).unwrap();
        let f = Formula::atom(Term::at_next(Term::var(o), Formula::var(q), None));
        assert!(holds_lasso(&lasso, &f));
        let prefix = lasso.prefix(2).unwrap();
        assert!(!crate::eval::holds_weak(&prefix, &f));
    }

    #[test]
    fn size_suites_hold_and_report_growth() {
        let report = check_theorem(Theorem::SizeLinear, &tiny(2, 2)).unwrap();
        assert!(report.passed(), "{}", report.to_json());
        let report = check_theorem(Theorem::SizeIteBlowup, &SuiteConfig::default()).unwrap();
        assert!(report.passed(), "{}", report.to_json());
        assert_eq!(report.info.len(), ITE_LEVELS);
        assert_eq!(report.cases, ITE_LEVELS as u64);
    }

    #[test]
    fn frozen_size_anchors_hold() {
        let cs = ComponentSymbols::new("run", "end");
        let i = Formula::var(VarInfo::bool_input("i"));
        let o = Formula::var(VarInfo::bool_output("o"));
        assert_eq!(rewrite_base_top(&i, &cs).unwrap().size(), 19);
        assert_eq!(rewrite_base_top(&o, &cs).unwrap().size(), 16);
        let mut chain = i;
        for expect in [35, 51, 67] {
            chain = Formula::next(chain);
            assert_eq!(rewrite_base_top(&chain, &cs).unwrap().size(), expect);
        }
    }

    #[test]
    fn projection_suite_is_clean_at_tiny_bounds() {
        let cfg = SuiteConfig { stem_bound: 2, loop_bound: 1, seed: 7, ..SuiteConfig::default() };
        let report = check_theorem(Theorem::Projection, &cfg).unwrap();
        assert!(report.passed(), "{}", report.to_json());
        assert_eq!(report.info.len(), 1 + TOY_SYSTEMS);
        assert!(report.info.iter().all(|line| line.contains("certified")));
    }

    #[test]
    fn mutant_rewriter_is_caught_and_shrunk_to_a_minimal_witness() {
        let cfg = SuiteConfig { include_terms: false, ..tiny(2, 2) };
        let report = check_base_rewrite_with(&cfg, RewriterKind::MutantDropYEnd).unwrap();
        assert!(!report.passed());
        // The smallest formula whose weak until clause needs the
        // end-of-trace disjunct: satisfied locally only by running out of
        // trace, never by a real witness.
        let minimal = Formula::until(Formula::tt(), Formula::ff());
        assert_eq!(report.mismatches[0].formula, minimal.to_string());
        assert!(report.mismatches[0].local_verdict);
        assert!(!report.mismatches[0].embedded_verdict);
        // The shrunk local trace is a single output-only state.
        let local = report.mismatches[0].local_trace.as_ref().unwrap();
        assert_eq!(local["stem"].as_array().unwrap().len(), 1);
    }

    #[test]
    fn witnesses_replay_and_shrink_by_hand() {
        let cfg = SuiteConfig { include_terms: false, ..tiny(2, 3) };
        let suite = make_suite(&cfg).unwrap();
        let symbols = ComponentSymbols::new("run", "end");
        let locals = finite_locals(&suite.vocab, 3);
        let long = locals.iter().find(|t| t.len() == 3).unwrap().clone();
        let plan = EmbedPlan {
            run: symbols.run.clone(),
            end: symbols.end.clone(),
            gaps: vec![vec![vec![Value::Bool(true)]], Vec::new()],
            tail: tail_plan(TailKind::NoRunLoop, &suite),
        };
        let mut w = Witness::new(
            Theorem::BaseRewrite,
            Formula::or(
                Formula::until(Formula::tt(), Formula::ff()),
                Formula::ff(),
            ),
            Trace::Finite(long),
        );
        w.rewriter = RewriterKind::MutantDropYEnd;
        w.plan = Some(plan);
        assert!(witness_fails(&w).unwrap());
        let small = shrink(&w);
        assert!(witness_fails(&small).unwrap());
        assert_eq!(
            small.formula,
            Formula::until(Formula::tt(), Formula::ff()),
            "shrinking picks the failing disjunct"
        );
        match &small.local {
            Trace::Finite(t) => assert_eq!(t.len(), 1),
            Trace::Lasso(_) => panic!("local stays finite"),
        }
        let plan = small.plan.unwrap();
        assert!(plan.gaps.iter().all(Vec::is_empty));
    }

    #[test]
    fn reports_are_deterministic() {
        let cfg = SuiteConfig { include_terms: false, ..tiny(2, 2) };
        let a = check_base_rewrite_with(&cfg, RewriterKind::MutantDropYEnd).unwrap();
        let b = check_base_rewrite_with(&cfg, RewriterKind::MutantDropYEnd).unwrap();
        assert_eq!(a.canonical_json(), b.canonical_json());
        let a = check_theorem(Theorem::Duality, &tiny(2, 2)).unwrap();
        let b = check_theorem(Theorem::Duality, &tiny(2, 2)).unwrap();
        assert_eq!(a.canonical_json(), b.canonical_json());
    }

    #[test]
    fn unknown_selectors_are_reported() {
        assert!(matches!(
            check_theorem_named("no-such-theorem", &SuiteConfig::default()),
            Err(HarnessError::UnknownTheorem(_))
        ));
    }

    #[test]
    fn report_json_round_trips() {
        let report = check_theorem(Theorem::SizeIteBlowup, &SuiteConfig::default()).unwrap();
        let parsed: EquivalenceReport = serde_json::from_str(&report.to_json()).unwrap();
        assert_eq!(parsed, report);
    }

    #[test]
    fn wider_vocabularies_enumerate() {
        let cfg = SuiteConfig {
            depth: 1,
            n_inputs: 2,
            n_outputs: 2,
            include_terms: false,
            ..SuiteConfig::default()
        };
        let fs = enumerate_formulas(&cfg).unwrap();
        assert_eq!(fs.len(), 2 + 4 + 4);
        let _ = Sort::Bool;
    }
}
