//! Weighted logic-rule potentials, `exp(w · logic(x))`.
//!
//! Rules are written as text, e.g. `angle(S)>89 => type(S)='O'`, and compiled
//! against the clique's slot names and domains. Slots are referenced by atom
//! text (`type(S1)`), by predicate name when unambiguous, or as `$k`. Labels of
//! discrete domains are single-quoted. Semantics are hard Boolean.

use std::fmt;

use crate::error::{Error, Result};
use crate::relational::Domain;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

impl CmpOp {
    fn apply(self, a: f64, b: f64) -> bool {
        match self {
            CmpOp::Lt => a < b,
            CmpOp::Le => a <= b,
            CmpOp::Gt => a > b,
            CmpOp::Ge => a >= b,
            CmpOp::Eq => a == b,
            CmpOp::Ne => a != b,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Term {
    Ref(String),
    Num(f64),
    Label(String),
}

#[derive(Clone, Debug, PartialEq)]
enum Expr {
    Const(bool),
    Cmp(Term, CmpOp, Term),
    Not(Box<Expr>),
    And(Box<Expr>, Box<Expr>),
    Or(Box<Expr>, Box<Expr>),
    Implies(Box<Expr>, Box<Expr>),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Operand {
    Slot(usize),
    Num(f64),
}

impl Operand {
    fn value(self, x: &[f64]) -> f64 {
        match self {
            Operand::Slot(i) => x[i],
            Operand::Num(v) => v,
        }
    }
}

/// A rule compiled against a clique.
#[derive(Clone, Debug, PartialEq)]
pub enum Formula {
    Const(bool),
    Cmp(Operand, CmpOp, Operand),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
}

impl Formula {
    pub fn eval(&self, x: &[f64]) -> bool {
        match self {
            Formula::Const(b) => *b,
            Formula::Cmp(a, op, b) => op.apply(a.value(x), b.value(x)),
            Formula::Not(f) => !f.eval(x),
            Formula::And(a, b) => a.eval(x) && b.eval(x),
            Formula::Or(a, b) => a.eval(x) || b.eval(x),
            Formula::Implies(a, b) => !a.eval(x) || b.eval(x),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Num(f64),
    Label(String),
    Dollar(usize),
    LParen,
    RParen,
    Comma,
    Op(CmpOp),
    Not,
    And,
    Or,
    Implies,
}

fn tokenize(src: &str) -> Result<Vec<(Tok, usize)>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let err = |pos: usize, msg: &str| Error::model(format!("rule `{src}`, column {}: {msg}", pos + 1));
    while i < chars.len() {
        let c = chars[i];
        let start = i;
        let next = chars.get(i + 1).copied();
        let tok = match c {
            ' ' | '\t' => {
                i += 1;
                continue;
            }
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            ',' => Tok::Comma,
            '&' => {
                if next == Some('&') {
                    i += 1;
                }
                Tok::And
            }
            '|' => {
                if next == Some('|') {
                    i += 1;
                }
                Tok::Or
            }
            '=' if next == Some('>') => {
                i += 1;
                Tok::Implies
            }
            '=' => {
                if next == Some('=') {
                    i += 1;
                }
                Tok::Op(CmpOp::Eq)
            }
            '!' if next == Some('=') => {
                i += 1;
                Tok::Op(CmpOp::Ne)
            }
            '!' => Tok::Not,
            '<' if next == Some('=') => {
                i += 1;
                Tok::Op(CmpOp::Le)
            }
            '<' => Tok::Op(CmpOp::Lt),
            '>' if next == Some('=') => {
                i += 1;
                Tok::Op(CmpOp::Ge)
            }
            '>' => Tok::Op(CmpOp::Gt),
            '\'' => {
                let end = chars[i + 1..]
                    .iter()
                    .position(|&ch| ch == '\'')
                    .ok_or_else(|| err(i, "unterminated label"))?;
                let label: String = chars[i + 1..i + 1 + end].iter().collect();
                i += end + 1;
                Tok::Label(label)
            }
            '$' => {
                let digits: String = chars[i + 1..].iter().take_while(|c| c.is_ascii_digit()).collect();
                if digits.is_empty() {
                    return Err(err(i, "expected slot number after `$`"));
                }
                i += digits.len();
                Tok::Dollar(digits.parse().unwrap())
            }
            c if c.is_ascii_digit() || c == '.' || (c == '-' && next.is_some_and(|n| n.is_ascii_digit() || n == '.')) => {
                let mut j = i + 1;
                while j < chars.len()
                    && (chars[j].is_ascii_digit()
                        || chars[j] == '.'
                        || chars[j] == 'e'
                        || chars[j] == 'E'
                        || ((chars[j] == '-' || chars[j] == '+') && matches!(chars[j - 1], 'e' | 'E')))
                {
                    j += 1;
                }
                let s: String = chars[i..j].iter().collect();
                let v = s.parse::<f64>().map_err(|_| err(i, "bad number"))?;
                i = j - 1;
                Tok::Num(v)
            }
            c if c.is_alphabetic() || c == '_' => {
                let s: String = chars[i..]
                    .iter()
                    .take_while(|c| c.is_alphanumeric() || **c == '_')
                    .collect();
                i += s.chars().count() - 1;
                match s.as_str() {
                    "not" => Tok::Not,
                    "and" => Tok::And,
                    "or" => Tok::Or,
                    _ => Tok::Ident(s),
                }
            }
            _ => return Err(err(i, &format!("unexpected character `{c}`"))),
        };
        out.push((tok, start));
        i += 1;
    }
    Ok(out)
}

struct Parser<'a> {
    src: &'a str,
    toks: Vec<(Tok, usize)>,
    pos: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn err(&self, msg: &str) -> Error {
        let col = self.toks.get(self.pos).map_or(self.src.len(), |(_, p)| *p) + 1;
        Error::model(format!("rule `{}`, column {col}: {msg}", self.src))
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(t, _)| t.clone());
        self.pos += 1;
        t
    }

    fn implies(&mut self) -> Result<Expr> {
        let lhs = self.or()?;
        if self.peek() == Some(&Tok::Implies) {
            self.bump();
            let rhs = self.implies()?;
            return Ok(Expr::Implies(Box::new(lhs), Box::new(rhs)));
        }
        Ok(lhs)
    }

    fn or(&mut self) -> Result<Expr> {
        let mut e = self.and()?;
        while self.peek() == Some(&Tok::Or) {
            self.bump();
            e = Expr::Or(Box::new(e), Box::new(self.and()?));
        }
        Ok(e)
    }

    fn and(&mut self) -> Result<Expr> {
        let mut e = self.unary()?;
        while self.peek() == Some(&Tok::And) {
            self.bump();
            e = Expr::And(Box::new(e), Box::new(self.unary()?));
        }
        Ok(e)
    }

    fn unary(&mut self) -> Result<Expr> {
        match self.peek() {
            Some(Tok::Not) => {
                self.bump();
                Ok(Expr::Not(Box::new(self.unary()?)))
            }
            Some(Tok::LParen) => {
                self.bump();
                let e = self.implies()?;
                if self.bump() != Some(Tok::RParen) {
                    return Err(self.err("expected `)`"));
                }
                Ok(e)
            }
            Some(Tok::Ident(s)) if s == "true" || s == "false" => {
                let b = s == "true";
                self.bump();
                Ok(Expr::Const(b))
            }
            _ => {
                let a = self.term()?;
                let op = match self.bump() {
                    Some(Tok::Op(op)) => op,
                    _ => {
                        self.pos -= 1;
                        return Err(self.err("expected a comparison operator"));
                    }
                };
                let b = self.term()?;
                Ok(Expr::Cmp(a, op, b))
            }
        }
    }

    fn term(&mut self) -> Result<Term> {
        match self.bump() {
            Some(Tok::Num(v)) => Ok(Term::Num(v)),
            Some(Tok::Label(l)) => Ok(Term::Label(l)),
            Some(Tok::Dollar(k)) => Ok(Term::Ref(format!("${k}"))),
            Some(Tok::Ident(name)) => {
                if self.peek() != Some(&Tok::LParen) {
                    return Ok(Term::Ref(name));
                }
                self.bump();
                let mut args = Vec::new();
                loop {
                    match self.bump() {
                        Some(Tok::Ident(a)) => args.push(a),
                        _ => {
                            self.pos -= 1;
                            return Err(self.err("expected a logical variable"));
                        }
                    }
                    match self.bump() {
                        Some(Tok::Comma) => continue,
                        Some(Tok::RParen) => break,
                        _ => {
                            self.pos -= 1;
                            return Err(self.err("expected `,` or `)`"));
                        }
                    }
                }
                Ok(Term::Ref(format!("{name}({})", args.join(","))))
            }
            _ => {
                self.pos -= 1;
                Err(self.err("expected an atom, number or label"))
            }
        }
    }
}

fn parse_rule(src: &str) -> Result<Expr> {
    let toks = tokenize(src)?;
    let mut p = Parser { src, toks, pos: 0 };
    let e = p.implies()?;
    if p.pos < p.toks.len() {
        return Err(p.err("trailing input"));
    }
    Ok(e)
}

fn compile(e: &Expr, names: &[Vec<String>], domains: &[Domain], src: &str) -> Result<Formula> {
    let resolve = |t: &Term| -> Result<Option<usize>> {
        match t {
            Term::Ref(r) => {
                if let Some(k) = r.strip_prefix('$') {
                    let k: usize = k.parse().unwrap();
                    if k >= domains.len() {
                        return Err(Error::model(format!("rule `{src}` references absent slot ${k}")));
                    }
                    return Ok(Some(k));
                }
                names
                    .iter()
                    .position(|ns| ns.iter().any(|n| n == r))
                    .map(Some)
                    .ok_or_else(|| Error::model(format!("rule `{src}` references `{r}`, which is not in the clique")))
            }
            _ => Ok(None),
        }
    };
    Ok(match e {
        Expr::Const(b) => Formula::Const(*b),
        Expr::Not(a) => Formula::Not(Box::new(compile(a, names, domains, src)?)),
        Expr::And(a, b) => Formula::And(
            Box::new(compile(a, names, domains, src)?),
            Box::new(compile(b, names, domains, src)?),
        ),
        Expr::Or(a, b) => Formula::Or(
            Box::new(compile(a, names, domains, src)?),
            Box::new(compile(b, names, domains, src)?),
        ),
        Expr::Implies(a, b) => Formula::Implies(
            Box::new(compile(a, names, domains, src)?),
            Box::new(compile(b, names, domains, src)?),
        ),
        Expr::Cmp(a, op, b) => {
            let (sa, sb) = (resolve(a)?, resolve(b)?);
            // a label takes its index in the domain of the slot on the other side
            let operand = |t: &Term, slot: Option<usize>, other: Option<usize>| -> Result<Operand> {
                if let Some(s) = slot {
                    return Ok(Operand::Slot(s));
                }
                match t {
                    Term::Num(v) => Ok(Operand::Num(*v)),
                    Term::Label(l) => {
                        let s = other.ok_or_else(|| {
                            Error::model(format!("rule `{src}` compares label '{l}' with no atom"))
                        })?;
                        let idx = domains[s].label_index(l).ok_or_else(|| {
                            Error::model(format!(
                                "rule `{src}`: '{l}' is not a label of {}",
                                domains[s]
                            ))
                        })?;
                        Ok(Operand::Num(idx as f64))
                    }
                    Term::Ref(_) => unreachable!("references resolve to slots"),
                }
            };
            Formula::Cmp(operand(a, sa, sb)?, *op, operand(b, sb, sa)?)
        }
    })
}

/// `exp(w · logic(x))` with a learnable weight.
#[derive(Clone, Debug, PartialEq)]
pub struct MlnPotential {
    pub weight: f64,
    pub source: String,
    formula: Option<Formula>,
}

impl MlnPotential {
    /// Parse the rule text; it is compiled against a clique by [`MlnPotential::bind`].
    pub fn new(weight: f64, source: impl Into<String>) -> Result<Self> {
        let source = source.into();
        parse_rule(&source)?;
        Ok(MlnPotential {
            weight,
            source,
            formula: None,
        })
    }

    pub fn bind(&mut self, names: &[Vec<String>], domains: &[Domain]) -> Result<()> {
        let e = parse_rule(&self.source)?;
        self.formula = Some(compile(&e, names, domains, &self.source)?);
        Ok(())
    }

    pub fn formula(&self) -> Option<&Formula> {
        self.formula.as_ref()
    }

    pub fn logic(&self, x: &[f64]) -> Result<bool> {
        self.formula
            .as_ref()
            .map(|f| f.eval(x))
            .ok_or_else(|| Error::model(format!("rule `{}` is not bound to a clique", self.source)))
    }

    /// `w` when the rule holds, else 0.
    pub fn log_potential(&self, x: &[f64]) -> Result<f64> {
        Ok(if self.logic(x)? { self.weight } else { 0.0 })
    }

    /// ∂(w · logic(x))/∂w = logic(x).
    pub fn weight_gradient(&self, x: &[f64]) -> Result<f64> {
        Ok(if self.logic(x)? { 1.0 } else { 0.0 })
    }
}

impl fmt::Display for MlnPotential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MLN(w0={}, \"{}\")", self.weight, self.source)
    }
}
