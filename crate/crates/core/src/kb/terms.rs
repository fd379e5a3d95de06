//! Plaintext term quotient: normalize a term modulo oriented rewrites.
//!
//! Grammar: `term := factor (('·' | '*') factor)*`, left-associative;
//! `factor := atom ('⁻¹' | '^-1')*`; `atom := name | '(' term ')'`.
//! In a rule, the single letters x, y, z, u, v and w are pattern variables.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_STEP_CAP: usize = 10_000;
const PATTERN_VARS: &[&str] = &["x", "y", "z", "u", "v", "w"];

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Term {
    Sym(String),
    Mul(Box<Term>, Box<Term>),
    Inv(Box<Term>),
}

impl Term {
    pub fn sym(s: &str) -> Self {
        Term::Sym(s.to_string())
    }

    pub fn mul(a: Term, b: Term) -> Self {
        Term::Mul(Box::new(a), Box::new(b))
    }

    pub fn inv(a: Term) -> Self {
        Term::Inv(Box::new(a))
    }

    pub fn size(&self) -> usize {
        match self {
            Term::Sym(_) => 1,
            Term::Mul(a, b) => 1 + a.size() + b.size(),
            Term::Inv(a) => 1 + a.size(),
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Sym(s) => write!(f, "{s}"),
            Term::Inv(a) => match **a {
                Term::Mul(..) => write!(f, "({a})⁻¹"),
                _ => write!(f, "{a}⁻¹"),
            },
            Term::Mul(a, b) => {
                write!(f, "{a}·")?;
                match **b {
                    Term::Mul(..) => write!(f, "({b})"),
                    _ => write!(f, "{b}"),
                }
            }
        }
    }
}

struct Parser<'a> {
    chars: Vec<char>,
    pos: usize,
    src: &'a str,
}

impl Parser<'_> {
    fn err(&self, msg: &str) -> Error {
        Error::Parse { line: 1, msg: format!("{msg} at column {} in {:?}", self.pos + 1, self.src) }
    }

    fn skip_ws(&mut self) {
        while self.chars.get(self.pos).is_some_and(|c| c.is_whitespace()) {
            self.pos += 1;
        }
    }

    fn eat(&mut self, s: &str) -> bool {
        self.skip_ws();
        let want: Vec<char> = s.chars().collect();
        if self.chars[self.pos..].starts_with(&want) {
            self.pos += want.len();
            true
        } else {
            false
        }
    }

    fn term(&mut self) -> Result<Term> {
        let mut t = self.factor()?;
        while self.eat("·") || self.eat("*") {
            t = Term::mul(t, self.factor()?);
        }
        Ok(t)
    }

    fn factor(&mut self) -> Result<Term> {
        let mut t = self.atom()?;
        while self.eat("⁻¹") || self.eat("^-1") {
            t = Term::inv(t);
        }
        Ok(t)
    }

    fn atom(&mut self) -> Result<Term> {
        if self.eat("(") {
            let t = self.term()?;
            if !self.eat(")") {
                return Err(self.err("expected ')'"));
            }
            return Ok(t);
        }
        self.skip_ws();
        let start = self.pos;
        while self.chars.get(self.pos).is_some_and(|c| c.is_alphanumeric() || *c == '_') {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err("expected a symbol"));
        }
        Ok(Term::Sym(self.chars[start..self.pos].iter().collect()))
    }
}

pub fn parse_term(s: &str) -> Result<Term> {
    let mut p = Parser { chars: s.chars().collect(), pos: 0, src: s };
    let t = p.term()?;
    p.skip_ws();
    if p.pos != p.chars.len() {
        return Err(p.err("trailing input"));
    }
    Ok(t)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rewrite {
    pub lhs: Term,
    pub rhs: Term,
}

#[derive(Serialize, Deserialize)]
struct RawRewrite {
    lhs: String,
    rhs: String,
}

impl Rewrite {
    pub fn parse(lhs: &str, rhs: &str) -> Result<Self> {
        Ok(Self { lhs: parse_term(lhs)?, rhs: parse_term(rhs)? })
    }
}

/// Reads a JSON list of `{"lhs": ..., "rhs": ...}`.
pub fn parse_rewrites(json: &str) -> Result<Vec<Rewrite>> {
    let raw: Vec<RawRewrite> = serde_json::from_str(json).map_err(|e| Error::Parse { line: e.line(), msg: e.to_string() })?;
    raw.iter().map(|r| Rewrite::parse(&r.lhs, &r.rhs)).collect()
}

/// Group-axiom fragment used by the CLI when no rewrite file is given.
pub fn group_rewrites() -> Vec<Rewrite> {
    [("e·x", "x"), ("x·e", "x"), ("x⁻¹·x", "e"), ("x·x⁻¹", "e")]
        .iter()
        .map(|(l, r)| Rewrite::parse(l, r).expect("static rule"))
        .collect()
}

fn matches(pat: &Term, t: &Term, env: &mut HashMap<String, Term>) -> bool {
    match (pat, t) {
        (Term::Sym(v), _) if PATTERN_VARS.contains(&v.as_str()) => match env.get(v) {
            Some(bound) => bound == t,
            None => {
                env.insert(v.clone(), t.clone());
                true
            }
        },
        (Term::Sym(a), Term::Sym(b)) => a == b,
        (Term::Mul(a, b), Term::Mul(c, d)) => matches(a, c, env) && matches(b, d, env),
        (Term::Inv(a), Term::Inv(b)) => matches(a, b, env),
        _ => false,
    }
}

fn substitute(t: &Term, env: &HashMap<String, Term>) -> Term {
    match t {
        Term::Sym(v) => env.get(v).cloned().unwrap_or_else(|| t.clone()),
        Term::Mul(a, b) => Term::mul(substitute(a, env), substitute(b, env)),
        Term::Inv(a) => Term::inv(substitute(a, env)),
    }
}

/// One leftmost-outermost rewrite step, or None at a normal form.
pub fn rewrite_once(rules: &[Rewrite], t: &Term) -> Option<Term> {
    for r in rules {
        let mut env = HashMap::new();
        if matches(&r.lhs, t, &mut env) {
            return Some(substitute(&r.rhs, &env));
        }
    }
    match t {
        Term::Sym(_) => None,
        Term::Mul(a, b) => rewrite_once(rules, a)
            .map(|a2| Term::mul(a2, (**b).clone()))
            .or_else(|| rewrite_once(rules, b).map(|b2| Term::mul((**a).clone(), b2))),
        Term::Inv(a) => rewrite_once(rules, a).map(Term::inv),
    }
}

/// Normal form together with every intermediate term.
pub fn term_quotient_trace(rules: &[Rewrite], t: &Term, cap: usize) -> Result<Vec<Term>> {
    let mut trace = vec![t.clone()];
    let mut cur = t.clone();
    for _ in 0..cap {
        match rewrite_once(rules, &cur) {
            Some(next) => {
                trace.push(next.clone());
                cur = next;
            }
            None => return Ok(trace),
        }
    }
    if rewrite_once(rules, &cur).is_none() {
        return Ok(trace);
    }
    Err(Error::NonConfluence { steps: cap, last: cur.to_string() })
}

pub fn term_quotient(rules: &[Rewrite], t: &Term) -> Result<Term> {
    let trace = term_quotient_trace(rules, t, DEFAULT_STEP_CAP)?;
    Ok(trace.last().cloned().unwrap_or_else(|| t.clone()))
}
