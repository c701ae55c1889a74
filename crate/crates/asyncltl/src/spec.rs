//! Spec files: a block-structured text format for components and systems.
//!
//! A file holds any number of `component` blocks and at most one `system`
//! block, with `--` comments running to the end of the line:
//!
//! ```text
//! component c2
//!   input send_1 : bool
//!   output send_2 : bool
//!   init !send_2
//!   trans send_2' <-> send_2 | send_1
//!   property G (send_1 -> X send_2)
//! end
//!
//! system
//!   components c1 c2
//!   schedule G (rec_1 -> run_c1) & G (run_c2 <-> send_1)
//!   property G (rec_1 -> F send_2)
//!   mode base
//! end
//! ```
//!
//! Component statements, one per line and in any order: `input`/`output`
//! declarations, `init`, `trans`, `fairness`, and at most one `property`.
//! Repeated `init` and `trans` lines conjoin. Declarations read
//! `input <name> : <sort> [default <value>]` with sorts `bool`,
//! `int <lo>..<hi>`, `enum <Name> { a, b, c }` (defining `<Name>` for the
//! rest of the file), or the bare name of an already-defined enum. A
//! `default` override feeds the fallback slot of every `'`, `@F`, and `@P`
//! term reading exactly that variable. `fairness (<antecedent>) (<goal>)`
//! adds one strong-fairness pair.
//!
//! The system block lists component names (`components`, in composition
//! order), an optional `schedule` constraint over the composed vocabulary
//! plus the generated `run_<name>`/`end_<name>` symbols, one global
//! `property`, and a `mode` of `base`, `opt`, or `fair` (default `base`).

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::its::{compose, ComposedIts, Its, ItsError};
use crate::parser::{is_reserved, parse_formula, ParseError, Scope};
use crate::rewrite::{ComponentInterface, RewriteMode};
use crate::sort::{Sort, Value};
use crate::syntax::{Formula, FormulaRef, IoClass, Term, TermRef, VarInfo};

/// Which rewriting a system is verified under.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpecMode {
    Base,
    Opt,
    Fair,
}

impl SpecMode {
    /// Parses a mode name as written in spec files and on command lines.
    pub fn from_name(name: &str) -> Option<SpecMode> {
        match name {
            "base" => Some(SpecMode::Base),
            "opt" => Some(SpecMode::Opt),
            "fair" => Some(SpecMode::Fair),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SpecMode::Base => "base",
            SpecMode::Opt => "opt",
            SpecMode::Fair => "fair",
        }
    }

    /// The rewriting this mode applies to local properties.
    pub fn rewrite_mode(self) -> RewriteMode {
        match self {
            SpecMode::Base => RewriteMode::Base,
            SpecMode::Opt => RewriteMode::Optimized,
            SpecMode::Fair => RewriteMode::Fairness,
        }
    }
}

impl fmt::Display for SpecMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One parsed component block.
#[derive(Debug, Clone)]
pub struct ComponentDef {
    pub its: Its,
    /// The component's local property, when the block declares one.
    pub property: Option<FormulaRef>,
    /// Declared per-variable default overrides.
    pub defaults: BTreeMap<Arc<str>, Value>,
}

impl ComponentDef {
    pub fn name(&self) -> &str {
        &self.its.name
    }

    /// The component as the composition sees it, under the generated
    /// `run_<name>`/`end_<name>` scheduling symbols.
    pub fn interface(&self) -> ComponentInterface {
        ComponentInterface::new(&self.its.name, self.its.outputs().cloned().collect())
    }

    /// Name resolution over the component's own variables.
    pub fn scope(&self) -> Scope {
        Scope::from_vocab(&self.its.vocab)
    }
}

/// The parsed system block, already composed.
#[derive(Debug, Clone)]
pub struct SystemDef {
    /// Component names in composition order.
    pub order: Vec<String>,
    pub composed: ComposedIts,
    /// The scheduling constraint; `true` when the block has no `schedule`.
    pub schedule: FormulaRef,
    /// The global property.
    pub property: FormulaRef,
    pub mode: SpecMode,
}

impl SystemDef {
    /// Name resolution over the composed vocabulary.
    pub fn scope(&self) -> Scope {
        Scope::from_vocab(&self.composed.its.vocab)
    }

    /// The `G F run_<name>` conjuncts the schedule does not already state,
    /// one per component. Fairness-assuming verification adds these to the
    /// schedule.
    pub fn missing_fairness(&self) -> Vec<(String, FormulaRef)> {
        let present = conjuncts(&self.schedule);
        let mut out = Vec::new();
        for comp in &self.composed.components {
            let f = Formula::globally(Formula::finally(comp.symbols.run_atom()));
            if !present.contains(&f) {
                out.push((comp.its.name.clone(), f));
            }
        }
        out
    }
}

fn merged_defaults(components: &[ComponentDef]) -> BTreeMap<Arc<str>, Value> {
    let mut out = BTreeMap::new();
    for c in components {
        for (name, value) in &c.defaults {
            let owns = c.its.outputs().any(|v| v.name == *name);
            if owns {
                out.insert(name.clone(), value.clone());
            } else {
                out.entry(name.clone()).or_insert_with(|| value.clone());
            }
        }
    }
    out
}

/// Flattens nested conjunctions into their leaves.
fn conjuncts(f: &FormulaRef) -> Vec<FormulaRef> {
    match f.as_ref() {
        Formula::And(l, r) => {
            let mut out = conjuncts(l);
            out.extend(conjuncts(r));
            out
        }
        _ => vec![f.clone()],
    }
}

/// A parsed spec file.
#[derive(Debug, Clone)]
pub struct SystemSpec {
    pub components: Vec<ComponentDef>,
    pub system: Option<SystemDef>,
}

impl SystemSpec {
    /// Parses a spec file.
    pub fn parse(src: &str) -> Result<SystemSpec, SpecError> {
        let blocks = split_blocks(src)?;
        let mut enums: BTreeMap<String, Sort> = BTreeMap::new();
        let mut components: Vec<ComponentDef> = Vec::new();
        for block in &blocks {
            if let RawBlock::Component { line, name, body } = block {
                if components.iter().any(|c| c.name() == name) {
                    return Err(SpecError::Malformed {
                        line: *line,
                        msg: format!("component `{name}` is defined twice"),
                    });
                }
                components.push(parse_component(*line, name, body, &mut enums)?);
            }
        }
        let mut system = None;
        for block in &blocks {
            if let RawBlock::System { line, body } = block {
                if system.is_some() {
                    return Err(SpecError::Malformed {
                        line: *line,
                        msg: "a file may hold at most one system block".into(),
                    });
                }
                system = Some(parse_system(*line, body, &components)?);
            }
        }
        Ok(SystemSpec { components, system })
    }

    /// Looks up a component block by name.
    pub fn component(&self, name: &str) -> Option<&ComponentDef> {
        self.components.iter().find(|c| c.name() == name)
    }

    /// Declared default overrides across all components, output-side
    /// declarations winning for shared variables.
    pub fn merged_defaults(&self) -> BTreeMap<Arc<str>, Value> {
        merged_defaults(&self.components)
    }
}

/// Errors raised while parsing a spec file. Lines are 1-based positions in
/// the file.
#[derive(Debug, Error)]
pub enum SpecError {
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("line {line}: {source}")]
    Formula {
        line: usize,
        #[source]
        source: ParseError,
    },
    #[error("line {line}: {source}")]
    Its {
        line: usize,
        #[source]
        source: ItsError,
    },
}

// Line and block structure.

struct SrcLine {
    no: usize,
    text: String,
}

/// Strips comments, trims, and drops blank lines, keeping line numbers.
fn logical_lines(src: &str) -> Vec<SrcLine> {
    src.lines()
        .enumerate()
        .filter_map(|(ix, raw)| {
            let text = match raw.find("--") {
                Some(pos) => &raw[..pos],
                None => raw,
            };
            let text = text.trim();
            if text.is_empty() {
                None
            } else {
                Some(SrcLine { no: ix + 1, text: text.to_string() })
            }
        })
        .collect()
}

enum RawBlock {
    Component { line: usize, name: String, body: Vec<SrcLine> },
    System { line: usize, body: Vec<SrcLine> },
}

fn split_blocks(src: &str) -> Result<Vec<RawBlock>, SpecError> {
    let mut blocks = Vec::new();
    let mut lines = logical_lines(src).into_iter().peekable();
    while let Some(head) = lines.next() {
        let (kw, rest) = split_keyword(&head.text);
        let mut collect_body = |lines: &mut std::iter::Peekable<std::vec::IntoIter<SrcLine>>|
         -> Result<Vec<SrcLine>, SpecError> {
            let mut body = Vec::new();
            for l in lines.by_ref() {
                if l.text == "end" {
                    return Ok(body);
                }
                body.push(l);
            }
            Err(SpecError::Malformed {
                line: head.no,
                msg: "block starting here is missing its `end` line".into(),
            })
        };
        match kw {
            "component" => {
                let name = rest.trim();
                check_ident(head.no, name, "component name")?;
                blocks.push(RawBlock::Component {
                    line: head.no,
                    name: name.to_string(),
                    body: collect_body(&mut lines)?,
                });
            }
            "system" => {
                if !rest.trim().is_empty() {
                    return Err(SpecError::Malformed {
                        line: head.no,
                        msg: "the system block takes no name".into(),
                    });
                }
                blocks.push(RawBlock::System { line: head.no, body: collect_body(&mut lines)? });
            }
            other => {
                return Err(SpecError::Malformed {
                    line: head.no,
                    msg: format!(
                        "expected `component` or `system` at the top level, found `{other}`"
                    ),
                });
            }
        }
    }
    Ok(blocks)
}

fn split_keyword(text: &str) -> (&str, &str) {
    match text.split_once(char::is_whitespace) {
        Some((kw, rest)) => (kw, rest),
        None => (text, ""),
    }
}

fn check_ident(line: usize, name: &str, what: &str) -> Result<(), SpecError> {
    let mut chars = name.chars();
    let head_ok = chars.next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_');
    if !head_ok || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
        return Err(SpecError::Malformed {
            line,
            msg: format!("`{name}` is not a valid {what}"),
        });
    }
    if is_reserved(name) {
        return Err(SpecError::Malformed {
            line,
            msg: format!("`{name}` is a reserved word and cannot be a {what}"),
        });
    }
    Ok(())
}

// Component blocks.

fn parse_component(
    block_line: usize,
    name: &str,
    body: &[SrcLine],
    enums: &mut BTreeMap<String, Sort>,
) -> Result<ComponentDef, SpecError> {
    let mut inputs: Vec<Arc<VarInfo>> = Vec::new();
    let mut outputs: Vec<Arc<VarInfo>> = Vec::new();
    let mut defaults: BTreeMap<Arc<str>, Value> = BTreeMap::new();
    let mut formula_lines: Vec<(&SrcLine, &str, String)> = Vec::new();
    for l in body {
        let (kw, rest) = split_keyword(&l.text);
        match kw {
            "input" | "output" => {
                let decl = parse_decl(l.no, rest, enums)?;
                let dup = inputs.iter().chain(&outputs).any(|v| *v.name == *decl.name);
                if dup {
                    return Err(SpecError::Malformed {
                        line: l.no,
                        msg: format!("variable `{}` is declared twice", decl.name),
                    });
                }
                let io = if kw == "input" { IoClass::Input } else { IoClass::Output };
                let var = VarInfo::new(&decl.name, decl.sort, io);
                if let Some(value) = decl.default {
                    defaults.insert(var.name.clone(), value);
                }
                if io == IoClass::Input {
                    inputs.push(var);
                } else {
                    outputs.push(var);
                }
            }
            "init" | "trans" | "property" => {
                formula_lines.push((l, kw, rest.to_string()));
            }
            "fairness" => formula_lines.push((l, kw, rest.to_string())),
            other => {
                return Err(SpecError::Malformed {
                    line: l.no,
                    msg: format!("unknown component statement `{other}`"),
                });
            }
        }
    }
    let mut scope = Scope::new(inputs.iter().chain(&outputs).cloned());
    for sort in enums.values() {
        scope.add_enum(sort);
    }
    for v in inputs.iter().chain(&outputs) {
        if enums.values().any(|s| enum_has_literal(s, &v.name)) {
            return Err(SpecError::Malformed {
                line: block_line,
                msg: format!(
                    "variable `{}` collides with an enum literal of the same name",
                    v.name
                ),
            });
        }
    }
    let mut init_parts = Vec::new();
    let mut trans_parts = Vec::new();
    let mut fairness = Vec::new();
    let mut property = None;
    for (l, kw, rest) in formula_lines {
        match kw {
            "init" => init_parts.push(parse_in_line(&l.text, &rest, l.no, &scope, &defaults)?),
            "trans" => trans_parts.push(parse_in_line(&l.text, &rest, l.no, &scope, &defaults)?),
            "property" => {
                if property.is_some() {
                    return Err(SpecError::Malformed {
                        line: l.no,
                        msg: "a component may declare at most one property".into(),
                    });
                }
                property = Some(parse_in_line(&l.text, &rest, l.no, &scope, &defaults)?);
            }
            _ => {
                let (a, g) = parse_fairness(&l.text, &rest, l.no, &scope, &defaults)?;
                fairness.push((a, g));
            }
        }
    }
    let its = Its::new(
        name,
        inputs,
        outputs,
        Formula::conj(init_parts),
        Formula::conj(trans_parts),
        fairness,
    )
    .map_err(|source| SpecError::Its { line: block_line, source })?;
    Ok(ComponentDef { its, property, defaults })
}

struct Decl {
    name: String,
    sort: Sort,
    default: Option<Value>,
}

/// Parses `<name> : <sort> [default <value>]` after the io keyword.
fn parse_decl(
    line: usize,
    rest: &str,
    enums: &mut BTreeMap<String, Sort>,
) -> Result<Decl, SpecError> {
    let spaced = rest
        .replace(':', " : ")
        .replace('{', " { ")
        .replace('}', " } ")
        .replace(',', " ");
    let words: Vec<&str> = spaced.split_whitespace().collect();
    let malformed = |msg: String| SpecError::Malformed { line, msg };
    if words.len() < 3 || words[1] != ":" {
        return Err(malformed("expected `<name> : <sort>`".into()));
    }
    let name = words[0].to_string();
    check_ident(line, &name, "variable name")?;
    let (sort, used) = parse_sort(line, &words[2..], enums)?;
    let mut tail = &words[2 + used..];
    let mut default = None;
    if tail.first() == Some(&"default") {
        let word = tail
            .get(1)
            .ok_or_else(|| malformed("`default` needs a value".into()))?;
        let value = parse_value(line, word, &sort)?;
        default = Some(value);
        tail = &tail[2..];
    }
    if !tail.is_empty() {
        return Err(malformed(format!("unexpected `{}` after the declaration", tail[0])));
    }
    Ok(Decl { name, sort, default })
}

/// Parses a sort at the head of `words`, returning it and the word count
/// consumed. `enum` definitions register themselves for later reference.
fn parse_sort(
    line: usize,
    words: &[&str],
    enums: &mut BTreeMap<String, Sort>,
) -> Result<(Sort, usize), SpecError> {
    let malformed = |msg: String| SpecError::Malformed { line, msg };
    match words.first() {
        Some(&"bool") => Ok((Sort::Bool, 1)),
        Some(&"int") => {
            let range = words
                .get(1)
                .ok_or_else(|| malformed("`int` needs a `<lo>..<hi>` range".into()))?;
            let (lo, hi) = range
                .split_once("..")
                .ok_or_else(|| malformed(format!("`{range}` is not a `<lo>..<hi>` range")))?;
            let lo = lo
                .parse::<i64>()
                .map_err(|_| malformed(format!("`{lo}` is not an integer bound")))?;
            let hi = hi
                .parse::<i64>()
                .map_err(|_| malformed(format!("`{hi}` is not an integer bound")))?;
            if lo > hi {
                return Err(malformed(format!("empty integer range `{range}`")));
            }
            Ok((Sort::int(lo, hi), 2))
        }
        Some(&"enum") => {
            let name = words
                .get(1)
                .ok_or_else(|| malformed("`enum` needs a name".into()))?;
            check_ident(line, name, "enum name")?;
            if words.get(2) != Some(&"{") {
                return Err(malformed(format!("enum `{name}` needs a `{{ ... }}` literal list")));
            }
            let close = words
                .iter()
                .position(|w| *w == "}")
                .ok_or_else(|| malformed(format!("enum `{name}` is missing its `}}`")))?;
            let literals: Vec<&str> = words[3..close].to_vec();
            if literals.is_empty() {
                return Err(malformed(format!("enum `{name}` needs at least one literal")));
            }
            for l in &literals {
                check_ident(line, l, "enum literal")?;
            }
            let sort = Sort::enumeration(name, &literals);
            if let Some(existing) = enums.get(*name) {
                if *existing != sort {
                    return Err(malformed(format!(
                        "enum `{name}` is already defined with different literals"
                    )));
                }
            } else {
                enums.insert(name.to_string(), sort.clone());
            }
            Ok((sort, close + 1))
        }
        Some(name) => {
            let sort = enums
                .get(*name)
                .ok_or_else(|| malformed(format!("unknown sort `{name}`")))?;
            Ok((sort.clone(), 1))
        }
        None => Err(malformed("expected a sort".into())),
    }
}

fn parse_value(line: usize, word: &str, sort: &Sort) -> Result<Value, SpecError> {
    let value = match word {
        "true" => Value::Bool(true),
        "false" => Value::Bool(false),
        _ => match word.parse::<i64>() {
            Ok(n) => Value::Int(n),
            Err(_) => Value::Enum(Arc::from(word)),
        },
    };
    if sort.admits(&value) {
        Ok(value)
    } else {
        Err(SpecError::Malformed {
            line,
            msg: format!("default `{word}` does not inhabit sort {sort}"),
        })
    }
}

fn enum_has_literal(sort: &Sort, name: &str) -> bool {
    matches!(sort, Sort::Enum { literals, .. } if literals.iter().any(|l| &**l == name))
}

// Formula statements.

/// Parses the formula occupying `rest` of `line_text`, remapping error
/// positions to file coordinates and applying declared default overrides.
fn parse_in_line(
    line_text: &str,
    rest: &str,
    line_no: usize,
    scope: &Scope,
    defaults: &BTreeMap<Arc<str>, Value>,
) -> Result<FormulaRef, SpecError> {
    let trimmed = rest.trim();
    if trimmed.is_empty() {
        return Err(SpecError::Malformed { line: line_no, msg: "expected a formula".into() });
    }
    let col_offset = line_text.len() - trimmed.len();
    let f = parse_formula(trimmed, scope)
        .map_err(|e| remap(e, line_no, col_offset))?;
    Ok(with_default_overrides(&f, defaults))
}

fn remap(e: ParseError, line_no: usize, col_offset: usize) -> SpecError {
    let shifted = match e {
        ParseError::Syntax { col, msg, .. } => {
            ParseError::Syntax { line: line_no, col: col + col_offset, msg }
        }
        ParseError::UnknownName { col, name, .. } => {
            ParseError::UnknownName { line: line_no, col: col + col_offset, name }
        }
        ParseError::IllSorted { col, source, .. } => {
            ParseError::IllSorted { line: line_no, col: col + col_offset, source }
        }
    };
    SpecError::Formula { line: line_no, source: shifted }
}

/// Parses `fairness (<antecedent>) (<goal>)`.
fn parse_fairness(
    line_text: &str,
    rest: &str,
    line_no: usize,
    scope: &Scope,
    defaults: &BTreeMap<Arc<str>, Value>,
) -> Result<(FormulaRef, FormulaRef), SpecError> {
    let malformed = |msg: &str| SpecError::Malformed { line: line_no, msg: msg.into() };
    let base = line_text.len() - rest.len();
    let (a, after_a) = balanced_group(rest)
        .ok_or_else(|| malformed("fairness needs two parenthesized formulas"))?;
    let (g, after_g) = balanced_group(after_a)
        .ok_or_else(|| malformed("fairness needs a second parenthesized formula"))?;
    if !after_g.trim().is_empty() {
        return Err(malformed("unexpected text after the fairness pair"));
    }
    let a_off = base + offset_of(rest, a);
    let g_off = base + offset_of(rest, g);
    let fa = parse_formula(a, scope).map_err(|e| remap(e, line_no, a_off))?;
    let fg = parse_formula(g, scope).map_err(|e| remap(e, line_no, g_off))?;
    Ok((
        with_default_overrides(&fa, defaults),
        with_default_overrides(&fg, defaults),
    ))
}

/// Extracts the contents of the leading `( ... )` group, returning the inner
/// text and the remainder after the closing parenthesis.
fn balanced_group(text: &str) -> Option<(&str, &str)> {
    let trimmed = text.trim_start();
    let open = text.len() - trimmed.len();
    if !trimmed.starts_with('(') {
        return None;
    }
    let mut depth = 0usize;
    for (ix, c) in text.char_indices() {
        if ix < open {
            continue;
        }
        match c {
            '(' => depth += 1,
            ')' => {
                depth -= 1;
                if depth == 0 {
                    return Some((&text[open + 1..ix], &text[ix + 1..]));
                }
            }
            _ => {}
        }
    }
    None
}

fn offset_of(outer: &str, inner: &str) -> usize {
    inner.as_ptr() as usize - outer.as_ptr() as usize
}

// Default overrides.

/// Sets the fallback slot of every `'`, `@F`, and `@P` term whose argument
/// is exactly an overridden variable. Slots already set are kept.
fn with_default_overrides(f: &FormulaRef, map: &BTreeMap<Arc<str>, Value>) -> FormulaRef {
    if map.is_empty() {
        return f.clone();
    }
    rewrite_formula(f, map)
}

fn rewrite_formula(f: &FormulaRef, map: &BTreeMap<Arc<str>, Value>) -> FormulaRef {
    match f.as_ref() {
        Formula::True | Formula::False => f.clone(),
        Formula::Atom(t) => Formula::atom(rewrite_term(t, map)),
        Formula::Cmp { op, lhs, rhs } => {
            Formula::cmp(*op, rewrite_term(lhs, map), rewrite_term(rhs, map))
        }
        Formula::Not(g) => Formula::not(rewrite_formula(g, map)),
        Formula::Or(l, r) => Formula::or(rewrite_formula(l, map), rewrite_formula(r, map)),
        Formula::And(l, r) => Formula::and(rewrite_formula(l, map), rewrite_formula(r, map)),
        Formula::Next(g) => Formula::next(rewrite_formula(g, map)),
        Formula::Until(l, r) => {
            Formula::until(rewrite_formula(l, map), rewrite_formula(r, map))
        }
        Formula::Yesterday(g) => Formula::yesterday(rewrite_formula(g, map)),
        Formula::Since(l, r) => {
            Formula::since(rewrite_formula(l, map), rewrite_formula(r, map))
        }
        Formula::Release(l, r) => {
            Formula::release(rewrite_formula(l, map), rewrite_formula(r, map))
        }
        Formula::Finally(g) => Formula::finally(rewrite_formula(g, map)),
        Formula::Globally(g) => Formula::globally(rewrite_formula(g, map)),
        Formula::Once(g) => Formula::once(rewrite_formula(g, map)),
        Formula::Historically(g) => Formula::historically(rewrite_formula(g, map)),
        Formula::WeakYesterday(g) => Formula::weak_yesterday(rewrite_formula(g, map)),
        Formula::Bounded { op, n, arg } => Formula::bounded(*op, *n, rewrite_formula(arg, map)),
        Formula::Power { op, n, arg } => Formula::power(*op, *n, rewrite_formula(arg, map)),
    }
}

fn rewrite_term(t: &TermRef, map: &BTreeMap<Arc<str>, Value>) -> TermRef {
    let override_for = |arg: &TermRef, default: &Option<Value>| -> Option<Value> {
        if default.is_some() {
            return default.clone();
        }
        match arg.as_ref() {
            Term::Var(v) => map.get(&v.name).cloned(),
            _ => None,
        }
    };
    match t.as_ref() {
        Term::Const { .. } | Term::Var(_) => t.clone(),
        Term::App { op, lhs, rhs } => {
            Term::app(*op, rewrite_term(lhs, map), rewrite_term(rhs, map))
        }
        Term::Next { arg, default } => {
            let default = override_for(arg, default);
            Term::next(rewrite_term(arg, map), default)
        }
        Term::AtNext { arg, cond, default } => {
            let default = override_for(arg, default);
            Term::at_next(rewrite_term(arg, map), rewrite_formula(cond, map), default)
        }
        Term::AtLast { arg, cond, default } => {
            let default = override_for(arg, default);
            Term::at_last(rewrite_term(arg, map), rewrite_formula(cond, map), default)
        }
        Term::Ite { cond, then_t, else_t, default } => Term::ite(
            rewrite_formula(cond, map),
            rewrite_term(then_t, map),
            rewrite_term(else_t, map),
            default.clone(),
        ),
    }
}

// System blocks.

fn parse_system(
    block_line: usize,
    body: &[SrcLine],
    components: &[ComponentDef],
) -> Result<SystemDef, SpecError> {
    let mut order: Option<(usize, Vec<String>)> = None;
    let mut schedule: Option<(&SrcLine, String)> = None;
    let mut property: Option<(&SrcLine, String)> = None;
    let mut mode = SpecMode::Base;
    let mut saw_mode = false;
    for l in body {
        let (kw, rest) = split_keyword(&l.text);
        let once_err = |what: &str| SpecError::Malformed {
            line: l.no,
            msg: format!("the system block may declare `{what}` only once"),
        };
        match kw {
            "components" => {
                if order.is_some() {
                    return Err(once_err("components"));
                }
                let names: Vec<String> =
                    rest.split_whitespace().map(|w| w.trim_matches(',').to_string()).collect();
                if names.is_empty() {
                    return Err(SpecError::Malformed {
                        line: l.no,
                        msg: "`components` needs at least one name".into(),
                    });
                }
                order = Some((l.no, names));
            }
            "schedule" => {
                if schedule.is_some() {
                    return Err(once_err("schedule"));
                }
                schedule = Some((l, rest.to_string()));
            }
            "property" => {
                if property.is_some() {
                    return Err(once_err("property"));
                }
                property = Some((l, rest.to_string()));
            }
            "mode" => {
                if saw_mode {
                    return Err(once_err("mode"));
                }
                saw_mode = true;
                mode = SpecMode::from_name(rest.trim()).ok_or_else(|| SpecError::Malformed {
                    line: l.no,
                    msg: format!("unknown mode `{}` (expected base, opt, or fair)", rest.trim()),
                })?;
            }
            other => {
                return Err(SpecError::Malformed {
                    line: l.no,
                    msg: format!("unknown system statement `{other}`"),
                });
            }
        }
    }
    let (order_line, order) = order.ok_or_else(|| SpecError::Malformed {
        line: block_line,
        msg: "the system block needs a `components` line".into(),
    })?;
    let mut parts = Vec::with_capacity(order.len());
    for name in &order {
        let def = components
            .iter()
            .find(|c| c.name() == name.as_str())
            .ok_or_else(|| SpecError::Malformed {
                line: order_line,
                msg: format!("unknown component `{name}`"),
            })?;
        parts.push(def.its.clone());
    }
    let composed =
        compose(&parts).map_err(|source| SpecError::Its { line: order_line, source })?;
    let scope = Scope::from_vocab(&composed.its.vocab);
    let defaults = merged_defaults(components);
    let schedule = match schedule {
        Some((l, rest)) => parse_in_line(&l.text, &rest, l.no, &scope, &defaults)?,
        None => Formula::tt(),
    };
    let (prop_line, prop_rest) = property.ok_or_else(|| SpecError::Malformed {
        line: block_line,
        msg: "the system block needs a `property` line".into(),
    })?;
    let property =
        parse_in_line(&prop_line.text, &prop_rest, prop_line.no, &scope, &defaults)?;
    Ok(SystemDef { order, composed, schedule, property, mode })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::CmpOp;

    const SENDER_2COMP: &str = r#"
-- A relay pair: c1 tries to send, c2 forwards.
component c1
  input rec_1 : bool
  output try_1 : bool
  output send_1 : bool
  init !try_1 & !send_1
  trans send_1' <-> send_1 | try_1
  trans try_1' <-> (rec_1 | try_1) & !(send_1 | try_1)
  property G (rec_1 -> X (try_1 U send_1))
end

component c2
  input send_1 : bool
  output send_2 : bool
  init !send_2
  trans send_2' <-> send_2 | send_1
  property G (send_1 -> X send_2)
end

system
  components c1 c2
  schedule G (rec_1 -> run_c1) & G (run_c2 <-> send_1)
  property G (rec_1 -> F send_2)
  mode base
end
"#;

    #[test]
    fn parses_a_two_component_system() {
        let spec = SystemSpec::parse(SENDER_2COMP).unwrap();
        assert_eq!(spec.components.len(), 2);
        let c2 = spec.component("c2").unwrap();
        assert_eq!(c2.its.inputs().count(), 1);
        assert_eq!(c2.property.as_ref().unwrap().to_string(), "G (!send_1 | X send_2)");
        let system = spec.system.as_ref().unwrap();
        assert_eq!(system.order, vec!["c1", "c2"]);
        assert_eq!(system.mode, SpecMode::Base);
        assert_eq!(system.composed.components.len(), 2);
        assert_eq!(system.property.to_string(), "G (!rec_1 | F send_2)");
        let names: Vec<&str> =
            system.composed.its.inputs().map(|v| v.name.as_ref()).collect();
        assert!(names.contains(&"run_c1") && names.contains(&"run_c2"));
    }

    #[test]
    fn property_display_survives_the_implication_expansion() {
        let spec = SystemSpec::parse(SENDER_2COMP).unwrap();
        let c2 = spec.component("c2").unwrap();
        let f = c2.property.clone().unwrap();
        let i = Formula::var(VarInfo::bool_input("send_1"));
        let o = Formula::var(VarInfo::bool_output("send_2"));
        assert_eq!(
            f,
            Formula::globally(Formula::implies(i, Formula::next(o)))
        );
    }

    #[test]
    fn repeated_init_and_trans_lines_conjoin() {
        let src = "component c\n output a : bool\n output b : bool\n init a\n init b\n trans a'\n trans b'\n property a\nend";
        let spec = SystemSpec::parse(src).unwrap();
        let its = &spec.components[0].its;
        assert_eq!(its.init.to_string(), "a & b");
        assert_eq!(its.trans.to_string(), "a' & b'");
    }

    #[test]
    fn fairness_pairs_parse() {
        let src = "component c\n input i : bool\n output o : bool\n fairness (true) (o | i)\n fairness (i) (o)\nend";
        let spec = SystemSpec::parse(src).unwrap();
        let its = &spec.components[0].its;
        assert_eq!(its.fairness.len(), 2);
        assert_eq!(its.fairness[0].0.to_string(), "true");
        assert_eq!(its.fairness[0].1.to_string(), "o | i");
        assert!(spec.components[0].property.is_none());
    }

    #[test]
    fn sorts_and_defaults_parse() {
        let src = "component c\n input lvl : int 0..3 default 2\n output m : enum Mode { idle, busy } default busy\n output m2 : Mode\n property m = idle\nend";
        let spec = SystemSpec::parse(src).unwrap();
        let c = &spec.components[0];
        let lvl = c.its.vocab.get("lvl").unwrap();
        assert_eq!(lvl.sort, Sort::int(0, 3));
        assert_eq!(c.defaults.get("lvl"), Some(&Value::Int(2)));
        assert_eq!(c.defaults.get("m"), Some(&Value::Enum(Arc::from("busy"))));
        let m2 = c.its.vocab.get("m2").unwrap();
        assert_eq!(m2.sort, Sort::enumeration("Mode", &["idle", "busy"]));
    }

    #[test]
    fn default_overrides_feed_term_slots() {
        let src = "component c\n input lvl : int 0..3 default 2\n output o : bool\n property lvl' = lvl @F (o)\nend";
        let spec = SystemSpec::parse(src).unwrap();
        let f = spec.components[0].property.clone().unwrap();
        let Formula::Cmp { op, lhs, rhs } = f.as_ref() else { panic!("expected comparison") };
        assert_eq!(*op, CmpOp::Eq);
        let Term::Next { default, .. } = lhs.as_ref() else { panic!("expected next") };
        assert_eq!(*default, Some(Value::Int(2)));
        let Term::AtNext { default, .. } = rhs.as_ref() else { panic!("expected at-next") };
        assert_eq!(*default, Some(Value::Int(2)));
    }

    #[test]
    fn missing_fairness_reports_absent_conjuncts() {
        let with_one = SENDER_2COMP.replace(
            "schedule G (rec_1 -> run_c1) & G (run_c2 <-> send_1)",
            "schedule G (rec_1 -> run_c1) & G F run_c1",
        );
        let spec = SystemSpec::parse(&with_one).unwrap();
        let system = spec.system.as_ref().unwrap();
        let missing = system.missing_fairness();
        assert_eq!(missing.len(), 1);
        assert_eq!(missing[0].0, "c2");
        assert_eq!(missing[0].1.to_string(), "G F run_c2");
    }

    #[test]
    fn error_lines_point_into_the_file() {
        let src = "component c\n output o : bool\n init o &\nend";
        let e = SystemSpec::parse(src).unwrap_err();
        assert!(matches!(e, SpecError::Formula { line: 3, .. }), "got {e}");
        let src = "component c\n output o : bool\n init q\nend";
        let e = SystemSpec::parse(src).unwrap_err();
        assert!(e.to_string().contains("unknown name `q`"), "got {e}");
        let src = "component c\n output o : int\nend";
        let e = SystemSpec::parse(src).unwrap_err();
        assert!(e.to_string().contains("range"), "got {e}");
    }

    #[test]
    fn structural_mistakes_are_reported() {
        for (src, needle) in [
            ("component c\n output o : bool", "missing its `end`"),
            ("junk", "expected `component` or `system`"),
            ("component c\n output o : bool\nend\ncomponent c\n output p : bool\nend", "defined twice"),
            ("component c\n output o : bool\n output o : bool\nend", "declared twice"),
            ("component c\n outputs o : bool\nend", "unknown component statement"),
            ("component U\n output o : bool\nend", "reserved word"),
            ("system\n components c\n property true\nend", "unknown component `c`"),
            (
                "component c\n output o : bool\nend\nsystem\n components c\n mode base\nend",
                "needs a `property`",
            ),
            (
                "component c\n output o : bool\nend\nsystem\n components c\n property o\n mode turbo\nend",
                "unknown mode",
            ),
        ] {
            let e = SystemSpec::parse(src).unwrap_err();
            assert!(e.to_string().contains(needle), "`{src}` gave `{e}`");
        }
    }

    #[test]
    fn init_over_inputs_is_rejected_with_the_block_line() {
        let src = "component c\n input i : bool\n output o : bool\n init i\nend";
        let e = SystemSpec::parse(src).unwrap_err();
        assert!(matches!(e, SpecError::Its { line: 1, .. }), "got {e}");
    }

    #[test]
    fn system_mode_fair_parses_and_composes() {
        let src = SENDER_2COMP.replace("mode base", "mode fair");
        let spec = SystemSpec::parse(&src).unwrap();
        let system = spec.system.as_ref().unwrap();
        assert_eq!(system.mode, SpecMode::Fair);
        assert_eq!(system.missing_fairness().len(), 2);
        assert_eq!(system.mode.rewrite_mode(), RewriteMode::Fairness);
    }
}
