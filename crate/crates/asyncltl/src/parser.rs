//! Concrete syntax for formulas and terms.
//!
//! A hand-written lexer and recursive-descent parser that accepts exactly
//! what the display implementations print, plus the usual conveniences the
//! printer never emits: `->` and `<->` (expanded into `|`/`&`/`!` at parse
//! time), redundant parentheses, `next(x)` for `x'`, and `--` line comments.
//!
//! Binding strength, ascending: `<->`, `->`, `|`, `&`, the binary temporal
//! operators `U`/`S`/`R` (right-associative), the unary operators (`!`, `X`,
//! `Y`, `Z`, `F`, `G`, `O`, `H`, bounded forms such as `F<=3`, and powers
//! such as `X^2`), comparisons, `+`/`-`, `*`, and the postfix term operators
//! (`'`, `@F (cond)`, `@P (cond)`). `|`, `&`, `+`, `-`, and `*` associate
//! the way the printer flattens them, so parsing printed output rebuilds the
//! original structure whenever default-value slots are unset.
//!
//! Names are resolved against a [`Scope`]: variables first, then enum
//! literals. The words `true`, `false`, `X`, `Y`, `Z`, `F`, `G`, `O`, `H`,
//! `U`, `S`, `R`, `ite`, and `next` are reserved and cannot name variables.

use std::collections::BTreeMap;
use std::sync::Arc;

use thiserror::Error;

use crate::sort::{Sort, Value};
use crate::syntax::{
    BoundedOp, CmpOp, Formula, FormulaRef, FuncOp, PowerOp, SortError, Term, TermRef, VarInfo,
};
use crate::trace::Vocab;

/// Words with fixed meaning in the concrete syntax.
const RESERVED: &[&str] = &[
    "true", "false", "X", "Y", "Z", "F", "G", "O", "H", "U", "S", "R", "ite", "next",
];

/// Whether `name` is a reserved word and therefore unusable as a variable
/// or enum literal name.
pub fn is_reserved(name: &str) -> bool {
    RESERVED.contains(&name)
}

/// Errors raised while parsing. Positions are 1-based line and column of
/// the offending token.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("{line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("{line}:{col}: unknown name `{name}`")]
    UnknownName { line: usize, col: usize, name: String },
    #[error("{line}:{col}: {source}")]
    IllSorted { line: usize, col: usize, source: SortError },
}

impl ParseError {
    fn position(&self) -> (usize, usize) {
        match self {
            ParseError::Syntax { line, col, .. }
            | ParseError::UnknownName { line, col, .. }
            | ParseError::IllSorted { line, col, .. } => (*line, *col),
        }
    }
}

/// Name resolution for the parser: variables by name, plus the literals of
/// every enum sort those variables mention.
#[derive(Debug, Clone, Default)]
pub struct Scope {
    vars: BTreeMap<Arc<str>, Arc<VarInfo>>,
    literals: BTreeMap<Arc<str>, Sort>,
}

impl Scope {
    /// Builds a scope over the given variables, registering the literals of
    /// each enum-sorted one. Later variables shadow earlier namesakes;
    /// variables shadow literals at lookup.
    pub fn new(vars: impl IntoIterator<Item = Arc<VarInfo>>) -> Scope {
        let mut scope = Scope::default();
        for v in vars {
            scope.add_var(v);
        }
        scope
    }

    /// Builds a scope over a vocabulary's variables.
    pub fn from_vocab(vocab: &Vocab) -> Scope {
        Scope::new(vocab.vars().iter().cloned())
    }

    /// Adds one variable, registering its enum literals if any.
    pub fn add_var(&mut self, v: Arc<VarInfo>) {
        if let Sort::Enum { .. } = &v.sort {
            self.add_enum(&v.sort);
        }
        self.vars.insert(v.name.clone(), v);
    }

    /// Registers the literals of an enum sort. The first registration of a
    /// literal name wins when two enums share one.
    pub fn add_enum(&mut self, sort: &Sort) {
        if let Sort::Enum { literals, .. } = sort {
            for l in literals.iter() {
                self.literals.entry(l.clone()).or_insert_with(|| sort.clone());
            }
        }
    }

    /// Looks up a variable by name.
    pub fn var(&self, name: &str) -> Option<&Arc<VarInfo>> {
        self.vars.get(name)
    }

    /// Looks up an enum literal by name, yielding the value and its sort.
    pub fn literal(&self, name: &str) -> Option<(Value, Sort)> {
        let (key, sort) = self.literals.get_key_value(name)?;
        Some((Value::Enum(key.clone()), sort.clone()))
    }
}

/// Parses a formula over the scope's names.
pub fn parse_formula(src: &str, scope: &Scope) -> Result<FormulaRef, ParseError> {
    let mut p = Parser::new(src, scope)?;
    let f = p.formula()?;
    p.expect_end()?;
    Ok(f)
}

/// Parses a term over the scope's names.
pub fn parse_term(src: &str, scope: &Scope) -> Result<TermRef, ParseError> {
    let mut p = Parser::new(src, scope)?;
    let t = p.term()?;
    p.expect_end()?;
    Ok(t)
}

// Lexing.

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(i64),
    LParen,
    RParen,
    Comma,
    Prime,
    AtNext,
    AtLast,
    Bang,
    Amp,
    Bar,
    Arrow,
    Iff,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Plus,
    Minus,
    Star,
    Caret,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Int(n) => format!("`{n}`"),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Prime => "`'`".into(),
            Tok::AtNext => "`@F`".into(),
            Tok::AtLast => "`@P`".into(),
            Tok::Bang => "`!`".into(),
            Tok::Amp => "`&`".into(),
            Tok::Bar => "`|`".into(),
            Tok::Arrow => "`->`".into(),
            Tok::Iff => "`<->`".into(),
            Tok::Eq => "`=`".into(),
            Tok::Ne => "`!=`".into(),
            Tok::Lt => "`<`".into(),
            Tok::Le => "`<=`".into(),
            Tok::Gt => "`>`".into(),
            Tok::Ge => "`>=`".into(),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Star => "`*`".into(),
            Tok::Caret => "`^`".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(src: &str) -> Result<(Vec<Spanned>, (usize, usize)), ParseError> {
    let mut toks = Vec::new();
    let chars: Vec<char> = src.chars().collect();
    let mut i = 0;
    let mut line = 1;
    let mut col = 1;
    let err = |line: usize, col: usize, msg: String| ParseError::Syntax { line, col, msg };
    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        let mut advance = |i: &mut usize, n: usize| {
            *i += n;
            col += n;
        };
        match c {
            '\n' => {
                i += 1;
                line += 1;
                col = 1;
            }
            c if c.is_whitespace() => advance(&mut i, 1),
            '-' if chars.get(i + 1) == Some(&'-') => {
                while i < chars.len() && chars[i] != '\n' {
                    advance(&mut i, 1);
                }
            }
            '-' if chars.get(i + 1) == Some(&'>') => {
                advance(&mut i, 2);
                toks.push(Spanned { tok: Tok::Arrow, line: tl, col: tc });
            }
            '<' if chars.get(i + 1) == Some(&'-') && chars.get(i + 2) == Some(&'>') => {
                advance(&mut i, 3);
                toks.push(Spanned { tok: Tok::Iff, line: tl, col: tc });
            }
            '<' if chars.get(i + 1) == Some(&'=') => {
                advance(&mut i, 2);
                toks.push(Spanned { tok: Tok::Le, line: tl, col: tc });
            }
            '>' if chars.get(i + 1) == Some(&'=') => {
                advance(&mut i, 2);
                toks.push(Spanned { tok: Tok::Ge, line: tl, col: tc });
            }
            '!' if chars.get(i + 1) == Some(&'=') => {
                advance(&mut i, 2);
                toks.push(Spanned { tok: Tok::Ne, line: tl, col: tc });
            }
            '@' => {
                let tok = match chars.get(i + 1) {
                    Some('F') => Tok::AtNext,
                    Some('P') => Tok::AtLast,
                    _ => return Err(err(tl, tc, "expected `@F` or `@P`".into())),
                };
                advance(&mut i, 2);
                toks.push(Spanned { tok, line: tl, col: tc });
            }
            '(' | ')' | ',' | '\'' | '&' | '|' | '=' | '<' | '>' | '+' | '-' | '*' | '^'
            | '!' => {
                let tok = match c {
                    '(' => Tok::LParen,
                    ')' => Tok::RParen,
                    ',' => Tok::Comma,
                    '\'' => Tok::Prime,
                    '&' => Tok::Amp,
                    '|' => Tok::Bar,
                    '=' => Tok::Eq,
                    '<' => Tok::Lt,
                    '>' => Tok::Gt,
                    '+' => Tok::Plus,
                    '-' => Tok::Minus,
                    '*' => Tok::Star,
                    '^' => Tok::Caret,
                    _ => Tok::Bang,
                };
                advance(&mut i, 1);
                toks.push(Spanned { tok, line: tl, col: tc });
            }
            c if c.is_ascii_digit() => {
                let start = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    advance(&mut i, 1);
                }
                let text: String = chars[start..i].iter().collect();
                let n = text
                    .parse::<i64>()
                    .map_err(|_| err(tl, tc, format!("integer literal `{text}` overflows")))?;
                toks.push(Spanned { tok: Tok::Int(n), line: tl, col: tc });
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len()
                    && (chars[i].is_ascii_alphanumeric() || chars[i] == '_')
                {
                    advance(&mut i, 1);
                }
                let name: String = chars[start..i].iter().collect();
                toks.push(Spanned { tok: Tok::Ident(name), line: tl, col: tc });
            }
            other => return Err(err(tl, tc, format!("unexpected character `{other}`"))),
        }
    }
    Ok((toks, (line, col)))
}

// Parsing.

struct Parser<'a> {
    toks: Vec<Spanned>,
    pos: usize,
    end: (usize, usize),
    scope: &'a Scope,
}

impl<'a> Parser<'a> {
    fn new(src: &str, scope: &'a Scope) -> Result<Parser<'a>, ParseError> {
        let (toks, end) = lex(src)?;
        Ok(Parser { toks, pos: 0, end, scope })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|s| &s.tok)
    }

    fn here(&self) -> (usize, usize) {
        self.toks.get(self.pos).map_or(self.end, |s| (s.line, s.col))
    }

    fn err(&self, msg: impl Into<String>) -> ParseError {
        let (line, col) = self.here();
        ParseError::Syntax { line, col, msg: msg.into() }
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == Some(tok) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), ParseError> {
        if self.eat(&tok) {
            Ok(())
        } else {
            Err(self.err(format!("expected {} {what}", tok.describe())))
        }
    }

    fn expect_end(&self) -> Result<(), ParseError> {
        match self.peek() {
            None => Ok(()),
            Some(t) => Err(self.err(format!("unexpected trailing {}", t.describe()))),
        }
    }

    fn eat_keyword(&mut self, word: &str) -> bool {
        if matches!(self.peek(), Some(Tok::Ident(s)) if s == word) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_int(&mut self, what: &str) -> Result<i64, ParseError> {
        match self.peek() {
            Some(Tok::Int(n)) => {
                let n = *n;
                self.pos += 1;
                Ok(n)
            }
            _ => Err(self.err(format!("expected an integer {what}"))),
        }
    }

    fn expect_bound(&mut self, what: &str) -> Result<u32, ParseError> {
        let n = self.expect_int(what)?;
        u32::try_from(n).map_err(|_| self.err(format!("bound {n} is out of range")))
    }

    // Formulas, weakest binding first.

    fn formula(&mut self) -> Result<FormulaRef, ParseError> {
        let l = self.implication()?;
        if self.eat(&Tok::Iff) {
            let r = self.formula()?;
            Ok(Formula::and(
                Formula::implies(l.clone(), r.clone()),
                Formula::implies(r, l),
            ))
        } else {
            Ok(l)
        }
    }

    fn implication(&mut self) -> Result<FormulaRef, ParseError> {
        let l = self.disjunction()?;
        if self.eat(&Tok::Arrow) {
            let r = self.implication()?;
            Ok(Formula::implies(l, r))
        } else {
            Ok(l)
        }
    }

    fn disjunction(&mut self) -> Result<FormulaRef, ParseError> {
        let mut parts = vec![self.conjunction()?];
        while self.eat(&Tok::Bar) {
            parts.push(self.conjunction()?);
        }
        Ok(fold_right(parts, Formula::or))
    }

    fn conjunction(&mut self) -> Result<FormulaRef, ParseError> {
        let mut parts = vec![self.temporal()?];
        while self.eat(&Tok::Amp) {
            parts.push(self.temporal()?);
        }
        Ok(fold_right(parts, Formula::and))
    }

    fn temporal(&mut self) -> Result<FormulaRef, ParseError> {
        let l = self.unary()?;
        for (word, build) in [
            ("U", Formula::until as fn(FormulaRef, FormulaRef) -> FormulaRef),
            ("S", Formula::since),
            ("R", Formula::release),
        ] {
            if self.eat_keyword(word) {
                let r = self.temporal()?;
                return Ok(build(l, r));
            }
        }
        Ok(l)
    }

    fn unary(&mut self) -> Result<FormulaRef, ParseError> {
        if self.eat(&Tok::Bang) {
            return Ok(Formula::not(self.unary()?));
        }
        for (word, power, plain) in [
            ("X", Some(PowerOp::Next), Formula::next as fn(FormulaRef) -> FormulaRef),
            ("Y", Some(PowerOp::Yesterday), Formula::yesterday),
            ("Z", Some(PowerOp::WeakYesterday), Formula::weak_yesterday),
            ("F", None, Formula::finally),
            ("G", None, Formula::globally),
            ("O", None, Formula::once),
            ("H", None, Formula::historically),
        ] {
            if !self.eat_keyword(word) {
                continue;
            }
            if let Some(op) = power {
                if self.eat(&Tok::Caret) {
                    let n = self.expect_bound("power")?;
                    return Ok(Formula::power(op, n, self.unary()?));
                }
            } else if self.eat(&Tok::Le) {
                let op = match word {
                    "F" => BoundedOp::Finally,
                    "G" => BoundedOp::Globally,
                    "O" => BoundedOp::Once,
                    _ => BoundedOp::Historically,
                };
                let n = self.expect_bound("bound")?;
                return Ok(Formula::bounded(op, n, self.unary()?));
            }
            return Ok(plain(self.unary()?));
        }
        self.atom()
    }

    /// An atom is either a term (optionally compared against another term)
    /// or a parenthesized formula. `(` is ambiguous between the two, so the
    /// term reading is tried first and the formula reading on failure.
    fn atom(&mut self) -> Result<FormulaRef, ParseError> {
        if self.peek() != Some(&Tok::LParen) {
            return self.comparison();
        }
        let save = self.pos;
        let term_err = match self.comparison() {
            Ok(f) => return Ok(f),
            Err(e) => e,
        };
        self.pos = save;
        self.pos += 1;
        let inner = match self.formula() {
            Ok(f) => f,
            Err(formula_err) => return Err(further(term_err, formula_err)),
        };
        match self.expect(Tok::RParen, "to close the parenthesized formula") {
            Ok(()) => Ok(inner),
            Err(close_err) => Err(further(term_err, close_err)),
        }
    }

    fn comparison(&mut self) -> Result<FormulaRef, ParseError> {
        let (line, col) = self.here();
        let lhs = self.term()?;
        let op = match self.peek() {
            Some(Tok::Eq) => Some(CmpOp::Eq),
            Some(Tok::Ne) => Some(CmpOp::Ne),
            Some(Tok::Lt) => Some(CmpOp::Lt),
            Some(Tok::Le) => Some(CmpOp::Le),
            Some(Tok::Gt) => Some(CmpOp::Gt),
            Some(Tok::Ge) => Some(CmpOp::Ge),
            _ => None,
        };
        let Some(op) = op else {
            return match lhs.as_ref() {
                Term::Const { value: Value::Bool(b), .. } => {
                    Ok(if *b { Formula::tt() } else { Formula::ff() })
                }
                _ => {
                    let sort = self.sorted(&lhs, line, col)?;
                    if sort == Sort::Bool {
                        Ok(Formula::atom(lhs))
                    } else {
                        Err(ParseError::Syntax {
                            line,
                            col,
                            msg: format!("atom has sort {sort}, expected bool"),
                        })
                    }
                }
            };
        };
        self.pos += 1;
        let rhs = self.term()?;
        let ls = self.sorted(&lhs, line, col)?;
        let rs = self.sorted(&rhs, line, col)?;
        if !ls.same_kind(&rs) {
            return Err(ParseError::IllSorted {
                line,
                col,
                source: SortError::CmpMismatch { lhs: ls, rhs: rs },
            });
        }
        if op.is_order() && !matches!(ls, Sort::Int { .. }) {
            return Err(ParseError::IllSorted {
                line,
                col,
                source: SortError::NonIntegerOrder { lhs: ls, rhs: rs },
            });
        }
        Ok(Formula::cmp(op, lhs, rhs))
    }

    fn sorted(&self, t: &TermRef, line: usize, col: usize) -> Result<Sort, ParseError> {
        t.sort().map_err(|source| ParseError::IllSorted { line, col, source })
    }

    // Terms, weakest binding first.

    fn term(&mut self) -> Result<TermRef, ParseError> {
        let mut t = self.product()?;
        loop {
            let op = if self.eat(&Tok::Plus) {
                FuncOp::Add
            } else if self.eat(&Tok::Minus) {
                FuncOp::Sub
            } else {
                break;
            };
            t = Term::app(op, t, self.product()?);
        }
        Ok(t)
    }

    fn product(&mut self) -> Result<TermRef, ParseError> {
        let mut t = self.postfix()?;
        while self.eat(&Tok::Star) {
            t = Term::app(FuncOp::Mul, t, self.postfix()?);
        }
        Ok(t)
    }

    fn postfix(&mut self) -> Result<TermRef, ParseError> {
        let mut t = self.term_primary()?;
        loop {
            if self.eat(&Tok::Prime) {
                t = Term::next(t, None);
            } else if self.eat(&Tok::AtNext) {
                t = Term::at_next(t, self.event_cond()?, None);
            } else if self.eat(&Tok::AtLast) {
                t = Term::at_last(t, self.event_cond()?, None);
            } else {
                return Ok(t);
            }
        }
    }

    fn event_cond(&mut self) -> Result<FormulaRef, ParseError> {
        self.expect(Tok::LParen, "before the event condition")?;
        let cond = self.formula()?;
        self.expect(Tok::RParen, "after the event condition")?;
        Ok(cond)
    }

    fn term_primary(&mut self) -> Result<TermRef, ParseError> {
        let (line, col) = self.here();
        match self.peek().cloned() {
            Some(Tok::Int(n)) => {
                self.pos += 1;
                Ok(Term::int_const(n))
            }
            Some(Tok::Minus) => {
                self.pos += 1;
                let n = self.expect_int("after unary `-`")?;
                Ok(Term::int_const(n.checked_neg().ok_or_else(|| {
                    self.err(format!("integer literal `-{n}` overflows"))
                })?))
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let t = self.term()?;
                self.expect(Tok::RParen, "to close the parenthesized term")?;
                Ok(t)
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                match name.as_str() {
                    "true" => Ok(Term::bool_const(true)),
                    "false" => Ok(Term::bool_const(false)),
                    "next" => {
                        self.expect(Tok::LParen, "after `next`")?;
                        let arg = self.term()?;
                        self.expect(Tok::RParen, "to close `next`")?;
                        Ok(Term::next(arg, None))
                    }
                    "ite" => {
                        self.expect(Tok::LParen, "after `ite`")?;
                        let cond = self.formula()?;
                        self.expect(Tok::Comma, "after the condition")?;
                        let then_t = self.term()?;
                        self.expect(Tok::Comma, "after the first branch")?;
                        let else_t = self.term()?;
                        self.expect(Tok::RParen, "to close `ite`")?;
                        Ok(Term::ite(cond, then_t, else_t, None))
                    }
                    _ if is_reserved(&name) => Err(ParseError::Syntax {
                        line,
                        col,
                        msg: format!("reserved word `{name}` cannot appear here"),
                    }),
                    _ => {
                        if let Some(v) = self.scope.var(&name) {
                            Ok(Term::var(v.clone()))
                        } else if let Some((value, sort)) = self.scope.literal(&name) {
                            Ok(Term::constant(value, sort))
                        } else {
                            Err(ParseError::UnknownName { line, col, name })
                        }
                    }
                }
            }
            Some(t) => Err(self.err(format!("expected a term, found {}", t.describe()))),
            None => Err(self.err("expected a term, found end of input")),
        }
    }
}

fn fold_right(
    parts: Vec<FormulaRef>,
    build: fn(FormulaRef, FormulaRef) -> FormulaRef,
) -> FormulaRef {
    parts
        .into_iter()
        .rev()
        .reduce(|acc, f| build(f, acc))
        .expect("fold_right needs at least one operand")
}

/// Picks the error whose position is further into the input, preferring the
/// second on ties; used to report the more advanced of the term and formula
/// readings of a parenthesized atom.
fn further(a: ParseError, b: ParseError) -> ParseError {
    if a.position() > b.position() {
        a
    } else {
        b
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{enumerate_formulas, SuiteConfig};
    use crate::syntax::IoClass;

    fn scope() -> Scope {
        Scope::new([
            VarInfo::bool_input("run"),
            VarInfo::bool_output("end"),
            VarInfo::new("x", Sort::int(0, 3), IoClass::Output),
            VarInfo::new("m", Sort::enumeration("mode", &["idle", "busy"]), IoClass::Output),
        ])
    }

    fn parses(src: &str) -> FormulaRef {
        parse_formula(src, &scope()).unwrap()
    }

    #[test]
    fn round_trips_the_printer_on_formulas() {
        let printed = [
            "run | end & run",
            "(run | end) & run",
            "run U end U run",
            "(run U end) U run",
            "run S (end R run)",
            "!(run | end)",
            "X G run",
            "Y H run | Z O end",
            "F<=2 run",
            "X^3 end",
            "true",
            "false U run",
        ];
        for src in printed {
            let f = parses(src);
            assert_eq!(f.to_string(), src, "printing `{src}` changed the text");
            assert_eq!(parses(&f.to_string()), f, "reparsing `{src}` changed the tree");
        }
    }

    #[test]
    fn round_trips_the_printer_on_terms() {
        let printed = [
            "x' = 1",
            "x @F (run) = x",
            "x @P (run & end) = 0",
            "ite(run, x, 0) = 2",
            "x + x * 2 <= 3",
            "(x + x) * 2 <= 3",
            "x - 1 - 1 >= 0",
            "x * -1 < 0",
            "next(x + 1) = x",
            "m = busy",
            "end' != end",
        ];
        for src in printed {
            let f = parses(src);
            assert_eq!(f.to_string(), src, "printing `{src}` changed the text");
            assert_eq!(parses(&f.to_string()), f, "reparsing `{src}` changed the tree");
        }
    }

    #[test]
    fn builds_the_expected_trees() {
        let run = Formula::var(VarInfo::bool_input("run"));
        let end = Formula::var(VarInfo::bool_output("end"));
        assert_eq!(
            parses("run | end | run"),
            Formula::or(run.clone(), Formula::or(end.clone(), run.clone()))
        );
        assert_eq!(
            parses("run U end U run"),
            Formula::until(run.clone(), Formula::until(end.clone(), run.clone()))
        );
        let x = VarInfo::new("x", Sort::int(0, 3), IoClass::Output);
        assert_eq!(
            parse_term("x - 1 - 1", &scope()).unwrap(),
            Term::app(
                FuncOp::Sub,
                Term::app(FuncOp::Sub, Term::var(x.clone()), Term::int_const(1)),
                Term::int_const(1)
            )
        );
        assert_eq!(
            parse_term("x @F (run)'", &scope()).unwrap(),
            Term::next(Term::at_next(Term::var(x), run, None), None)
        );
    }

    #[test]
    fn expands_implication_and_iff() {
        let run = Formula::var(VarInfo::bool_input("run"));
        let end = Formula::var(VarInfo::bool_output("end"));
        assert_eq!(parses("run -> end"), Formula::implies(run.clone(), end.clone()));
        assert_eq!(
            parses("run <-> end"),
            Formula::and(
                Formula::implies(run.clone(), end.clone()),
                Formula::implies(end.clone(), run.clone())
            )
        );
        assert_eq!(
            parses("run -> end -> run"),
            Formula::implies(run.clone(), Formula::implies(end, run))
        );
    }

    #[test]
    fn binds_comparisons_tighter_than_connectives() {
        let f = parses("x = 1 | x = 2 & run");
        assert!(matches!(f.as_ref(), Formula::Or(..)));
        let g = parses("G x <= 2");
        assert!(matches!(g.as_ref(), Formula::Globally(..)));
    }

    #[test]
    fn skips_comments_and_whitespace() {
        let f = parses("run -- the scheduler's grant\n  & -- conjunction\n end");
        assert_eq!(f.to_string(), "run & end");
        assert_eq!(parses("  run\n\tU\n end "), parses("run U end"));
    }

    #[test]
    fn reports_positions_and_names() {
        let e = parse_formula("run &\n junk", &scope()).unwrap_err();
        assert_eq!(
            e,
            ParseError::UnknownName { line: 2, col: 2, name: "junk".into() }
        );
        let e = parse_formula("run & (end | )", &scope()).unwrap_err();
        assert_eq!(e.position(), (1, 14));
        let e = parse_formula("X", &scope()).unwrap_err();
        assert!(e.to_string().contains("expected a term"));
        let e = parse_formula("run U U", &scope()).unwrap_err();
        assert!(e.to_string().contains("reserved word `U`"));
    }

    #[test]
    fn rejects_ill_sorted_input() {
        let cases = [
            ("x", "expected bool"),
            ("x = run", "mixes sorts"),
            ("run < end", "needs integer operands"),
            ("x + run = 1", "arithmetic needs integer operands"),
            ("m = idle | m = off", "unknown name `off`"),
            ("x' '", "expected"),
        ];
        for (src, needle) in cases {
            let e = parse_formula(src, &scope()).unwrap_err();
            assert!(
                e.to_string().contains(needle),
                "`{src}` gave `{e}`, expected `{needle}`"
            );
        }
    }

    #[test]
    fn trailing_input_is_rejected() {
        let e = parse_formula("run end", &scope()).unwrap_err();
        assert!(e.to_string().contains("trailing"));
        let e = parse_term("x + 1 = 2", &scope()).unwrap_err();
        assert!(e.to_string().contains("trailing"));
    }

    #[test]
    fn round_trips_the_enumerated_corpus_structurally() {
        let cfg = SuiteConfig::default();
        let scope = Scope::new([VarInfo::bool_input("i"), VarInfo::bool_output("o")]);
        let formulas = enumerate_formulas(&cfg).unwrap();
        assert!(formulas.len() > 1000);
        for f in formulas {
            let text = f.to_string();
            let back = parse_formula(&text, &scope)
                .unwrap_or_else(|e| panic!("`{text}` failed to parse: {e}"));
            assert_eq!(back, f, "`{text}` reparsed to `{back}`");
        }
    }

    #[test]
    fn printing_is_stable_under_reparsing_at_depth_three() {
        let cfg = SuiteConfig { depth: 3, include_terms: false, ..SuiteConfig::default() };
        let scope = Scope::new([VarInfo::bool_input("i"), VarInfo::bool_output("o")]);
        for f in enumerate_formulas(&cfg).unwrap() {
            let text = f.to_string();
            let back = parse_formula(&text, &scope)
                .unwrap_or_else(|e| panic!("`{text}` failed to parse: {e}"));
            assert_eq!(back.to_string(), text, "printing `{text}` is unstable");
        }
    }
}
