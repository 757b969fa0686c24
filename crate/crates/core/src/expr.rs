//! Closed expression grammar for right-hand sides `f(x, z, p)`.
//!
//! Expressions can be written infix (`"(-z2)^alpha + 0.5*abs(p1)"`) or given
//! as a JSON AST. Named parameters such as `alpha` are substituted when the
//! expression is resolved, so an evaluated [`Expr`] only ever refers to the
//! coordinates `x1..xn`, the unknowns `z1..zm` and gradient entries `p1..pn`.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Variable reference, zero-based internally, one-based in text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Var {
    X(usize),
    Z(usize),
    P(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnaryOp {
    Neg,
    Exp,
    Log,
    Abs,
    Sqrt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    Min,
    Max,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expr {
    Const(f64),
    Param(String),
    Var(Var),
    Unary {
        op: UnaryOp,
        arg: Box<Expr>,
    },
    Binary {
        op: BinaryOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
}

/// Either form accepted in configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ExprSpec {
    Infix(String),
    Ast(Expr),
}

impl ExprSpec {
    pub fn resolve(&self, params: &BTreeMap<String, f64>) -> Result<Expr> {
        match self {
            ExprSpec::Infix(s) => parse(s, params),
            ExprSpec::Ast(e) => e.substitute(params),
        }
    }
}

impl From<&str> for ExprSpec {
    fn from(s: &str) -> Self {
        ExprSpec::Infix(s.to_string())
    }
}

impl Expr {
    pub fn constant(v: f64) -> Self {
        Expr::Const(v)
    }

    pub fn var(v: Var) -> Self {
        Expr::Var(v)
    }

    pub fn unary(op: UnaryOp, arg: Expr) -> Self {
        Expr::Unary { op, arg: Box::new(arg) }
    }

    pub fn binary(op: BinaryOp, lhs: Expr, rhs: Expr) -> Self {
        Expr::Binary {
            op,
            lhs: Box::new(lhs),
            rhs: Box::new(rhs),
        }
    }

    /// Replaces every [`Expr::Param`] by its value.
    pub fn substitute(&self, params: &BTreeMap<String, f64>) -> Result<Expr> {
        Ok(match self {
            Expr::Param(name) => match params.get(name) {
                Some(v) => Expr::Const(*v),
                None => {
                    return Err(Error::Configuration(format!(
                        "unknown parameter `{name}`"
                    )))
                }
            },
            Expr::Const(_) | Expr::Var(_) => self.clone(),
            Expr::Unary { op, arg } => Expr::unary(*op, arg.substitute(params)?),
            Expr::Binary { op, lhs, rhs } => {
                Expr::binary(*op, lhs.substitute(params)?, rhs.substitute(params)?)
            }
        })
    }

    pub fn mentions(&self, v: Var) -> bool {
        match self {
            Expr::Const(_) | Expr::Param(_) => false,
            Expr::Var(w) => *w == v,
            Expr::Unary { arg, .. } => arg.mentions(v),
            Expr::Binary { lhs, rhs, .. } => lhs.mentions(v) || rhs.mentions(v),
        }
    }

    /// Largest one-based index used per variable family `(x, z, p)`.
    pub fn arity(&self) -> (usize, usize, usize) {
        match self {
            Expr::Const(_) | Expr::Param(_) => (0, 0, 0),
            Expr::Var(Var::X(i)) => (i + 1, 0, 0),
            Expr::Var(Var::Z(i)) => (0, i + 1, 0),
            Expr::Var(Var::P(i)) => (0, 0, i + 1),
            Expr::Unary { arg, .. } => arg.arity(),
            Expr::Binary { lhs, rhs, .. } => {
                let a = lhs.arity();
                let b = rhs.arity();
                (a.0.max(b.0), a.1.max(b.1), a.2.max(b.2))
            }
        }
    }

    pub fn eval(&self, x: &[f64], z: &[f64], p: &[f64]) -> Result<f64> {
        let v = match self {
            Expr::Const(c) => *c,
            Expr::Param(name) => {
                return Err(self.domain_err(format!("unresolved parameter `{name}`")))
            }
            Expr::Var(var) => {
                let (slice, i) = match *var {
                    Var::X(i) => (x, i),
                    Var::Z(i) => (z, i),
                    Var::P(i) => (p, i),
                };
                match slice.get(i) {
                    Some(v) => *v,
                    None => return Err(self.domain_err("variable index out of range")),
                }
            }
            Expr::Unary { op, arg } => {
                let a = arg.eval(x, z, p)?;
                match op {
                    UnaryOp::Neg => -a,
                    UnaryOp::Exp => a.exp(),
                    UnaryOp::Abs => a.abs(),
                    UnaryOp::Log => {
                        if a <= 0.0 {
                            return Err(self.domain_err(format!("log of non-positive value {a}")));
                        }
                        a.ln()
                    }
                    UnaryOp::Sqrt => {
                        if a < 0.0 {
                            return Err(self.domain_err(format!("sqrt of negative value {a}")));
                        }
                        a.sqrt()
                    }
                }
            }
            Expr::Binary { op, lhs, rhs } => {
                let a = lhs.eval(x, z, p)?;
                let b = rhs.eval(x, z, p)?;
                match op {
                    BinaryOp::Add => a + b,
                    BinaryOp::Sub => a - b,
                    BinaryOp::Mul => a * b,
                    BinaryOp::Min => a.min(b),
                    BinaryOp::Max => a.max(b),
                    BinaryOp::Div => {
                        if b == 0.0 {
                            return Err(self.domain_err("division by zero"));
                        }
                        a / b
                    }
                    BinaryOp::Pow => {
                        if a < 0.0 && b.fract() != 0.0 {
                            return Err(self.domain_err(format!(
                                "negative base {a} raised to non-integer power {b}"
                            )));
                        }
                        if a == 0.0 && b < 0.0 {
                            return Err(self.domain_err("zero raised to a negative power"));
                        }
                        a.powf(b)
                    }
                }
            }
        };
        if !v.is_finite() {
            return Err(self.domain_err(format!("non-finite value {v}")));
        }
        Ok(v)
    }

    fn domain_err(&self, reason: impl Into<String>) -> Error {
        Error::Domain {
            subexpr: self.to_string(),
            reason: reason.into(),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Param(n) => write!(f, "{n}"),
            Expr::Var(Var::X(i)) => write!(f, "x{}", i + 1),
            Expr::Var(Var::Z(i)) => write!(f, "z{}", i + 1),
            Expr::Var(Var::P(i)) => write!(f, "p{}", i + 1),
            Expr::Unary { op, arg } => match op {
                UnaryOp::Neg => write!(f, "(-{arg})"),
                UnaryOp::Exp => write!(f, "exp({arg})"),
                UnaryOp::Log => write!(f, "log({arg})"),
                UnaryOp::Abs => write!(f, "abs({arg})"),
                UnaryOp::Sqrt => write!(f, "sqrt({arg})"),
            },
            Expr::Binary { op, lhs, rhs } => match op {
                BinaryOp::Add => write!(f, "({lhs} + {rhs})"),
                BinaryOp::Sub => write!(f, "({lhs} - {rhs})"),
                BinaryOp::Mul => write!(f, "({lhs} * {rhs})"),
                BinaryOp::Div => write!(f, "({lhs} / {rhs})"),
                BinaryOp::Pow => write!(f, "({lhs} ^ {rhs})"),
                BinaryOp::Min => write!(f, "min({lhs}, {rhs})"),
                BinaryOp::Max => write!(f, "max({lhs}, {rhs})"),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
}

fn tokenize(src: &str) -> Result<Vec<(usize, Tok)>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    i = j;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text = &src[start..i];
            let v = text.parse::<f64>().map_err(|_| Error::Parse {
                pos: start,
                msg: format!("bad number `{text}`"),
            })?;
            out.push((start, Tok::Num(v)));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((start, Tok::Ident(src[start..i].to_string())));
        } else if "+-*/^(),".contains(c) {
            out.push((i, Tok::Op(c)));
            i += 1;
        } else {
            return Err(Error::Parse {
                pos: i,
                msg: format!("unexpected character `{c}`"),
            });
        }
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
    params: &'a BTreeMap<String, f64>,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |(p, _)| *p)
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T> {
        Err(Error::Parse {
            pos: self.offset(),
            msg: msg.into(),
        })
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Op(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            self.err(format!("expected `{c}`"))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            if self.eat('+') {
                lhs = Expr::binary(BinaryOp::Add, lhs, self.term()?);
            } else if self.eat('-') {
                lhs = Expr::binary(BinaryOp::Sub, lhs, self.term()?);
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat('*') {
                lhs = Expr::binary(BinaryOp::Mul, lhs, self.unary()?);
            } else if self.eat('/') {
                lhs = Expr::binary(BinaryOp::Div, lhs, self.unary()?);
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat('-') {
            return Ok(Expr::unary(UnaryOp::Neg, self.unary()?));
        }
        if self.eat('+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.eat('^') {
            // right associative, and `2^-1` is allowed
            let exp = self.unary()?;
            return Ok(Expr::binary(BinaryOp::Pow, base, exp));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        let tok = match self.peek() {
            Some(t) => t.clone(),
            None => return self.err("unexpected end of expression"),
        };
        match tok {
            Tok::Num(v) => {
                self.pos += 1;
                Ok(Expr::Const(v))
            }
            Tok::Op('(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::Ident(name) => {
                self.pos += 1;
                if self.eat('(') {
                    return self.call(&name);
                }
                self.ident(&name)
            }
            Tok::Op(c) => self.err(format!("unexpected `{c}`")),
        }
    }

    fn call(&mut self, name: &str) -> Result<Expr> {
        let mut args = vec![self.expr()?];
        while self.eat(',') {
            args.push(self.expr()?);
        }
        self.expect(')')?;
        let unary = |op| -> Result<Expr> {
            if args.len() != 1 {
                return self.err(format!("`{name}` takes one argument"));
            }
            Ok(Expr::unary(op, args[0].clone()))
        };
        let binary = |op| -> Result<Expr> {
            if args.len() != 2 {
                return self.err(format!("`{name}` takes two arguments"));
            }
            Ok(Expr::binary(op, args[0].clone(), args[1].clone()))
        };
        match name {
            "exp" => unary(UnaryOp::Exp),
            "log" | "ln" => unary(UnaryOp::Log),
            "abs" => unary(UnaryOp::Abs),
            "sqrt" => unary(UnaryOp::Sqrt),
            "min" => binary(BinaryOp::Min),
            "max" => binary(BinaryOp::Max),
            "pow" => binary(BinaryOp::Pow),
            _ => self.err(format!("unknown function `{name}`")),
        }
    }

    fn ident(&self, name: &str) -> Result<Expr> {
        if let Some(v) = self.params.get(name) {
            return Ok(Expr::Const(*v));
        }
        if name == "pi" {
            return Ok(Expr::Const(std::f64::consts::PI));
        }
        let (head, tail) = name.split_at(1);
        if let Ok(k) = tail.parse::<usize>() {
            if k >= 1 {
                let var = match head {
                    "x" => Some(Var::X(k - 1)),
                    "z" => Some(Var::Z(k - 1)),
                    "p" => Some(Var::P(k - 1)),
                    _ => None,
                };
                if let Some(v) = var {
                    return Ok(Expr::Var(v));
                }
            }
        }
        Err(Error::Parse {
            pos: self.toks[self.pos - 1].0,
            msg: format!("unknown identifier `{name}`"),
        })
    }
}

/// Parses an infix expression, substituting named parameters.
pub fn parse(src: &str, params: &BTreeMap<String, f64>) -> Result<Expr> {
    let toks = tokenize(src)?;
    let mut p = Parser {
        toks,
        pos: 0,
        end: src.len(),
        params,
    };
    let e = p.expr()?;
    if p.pos != p.toks.len() {
        return p.err("trailing input");
    }
    Ok(e)
}

/// Parses with no named parameters.
pub fn parse_plain(src: &str) -> Result<Expr> {
    parse(src, &BTreeMap::new())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn parses_power_coupling() {
        let e = parse("( - z2 ) ^ alpha", &params(&[("alpha", 1.0)])).unwrap();
        assert_eq!(e.eval(&[0.0, 0.0], &[-1.0, -2.0], &[]).unwrap(), 2.0);
        let e = parse("(-z2)^alpha", &params(&[("alpha", 0.5)])).unwrap();
        assert!((e.eval(&[], &[-1.0, -4.0], &[]).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn precedence_and_associativity() {
        let e = parse_plain("-2^2").unwrap();
        assert_eq!(e.eval(&[], &[], &[]).unwrap(), -4.0);
        let e = parse_plain("2^3^2").unwrap();
        assert_eq!(e.eval(&[], &[], &[]).unwrap(), 512.0);
        let e = parse_plain("1 + 2*3 - 4/2").unwrap();
        assert_eq!(e.eval(&[], &[], &[]).unwrap(), 5.0);
        let e = parse_plain("max(x1, p2) + min(1, abs(-3)) + exp(0) + log(1)").unwrap();
        assert_eq!(e.eval(&[0.5], &[], &[0.0, 2.0]).unwrap(), 4.0);
        let e = parse_plain("2.5e-1 * 4").unwrap();
        assert_eq!(e.eval(&[], &[], &[]).unwrap(), 1.0);
    }

    #[test]
    fn singular_power_names_subexpression() {
        let e = parse("(-z2)^alpha", &params(&[("alpha", 0.5)])).unwrap();
        match e.eval(&[], &[1.0, 4.0], &[]) {
            Err(Error::Domain { subexpr, .. }) => assert!(subexpr.contains("z2")),
            other => panic!("expected domain error, got {other:?}"),
        }
    }

    #[test]
    fn parse_errors_carry_position() {
        match parse_plain("1 + q3") {
            Err(Error::Parse { pos, .. }) => assert_eq!(pos, 4),
            other => panic!("{other:?}"),
        }
        assert!(parse_plain("(1 + 2").is_err());
        assert!(parse_plain("1 2").is_err());
        assert!(parse_plain("foo(1)").is_err());
    }

    #[test]
    fn ast_json_round_trip() {
        let e = parse_plain("(-z2)^2 + 0.5*p1").unwrap();
        let json = serde_json::to_string(&e).unwrap();
        let spec: ExprSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(spec.resolve(&BTreeMap::new()).unwrap(), e);
        let infix: ExprSpec = serde_json::from_str("\"z1 + 1\"").unwrap();
        assert!(matches!(infix, ExprSpec::Infix(_)));
    }

    #[test]
    fn display_reparses_to_same_value() {
        let e = parse_plain("max(x1,2)*-(z1 - 3)/p1^2").unwrap();
        let again = parse_plain(&e.to_string()).unwrap();
        let (x, z, p) = ([1.5], [0.25], [0.7]);
        assert_eq!(e.eval(&x, &z, &p).unwrap(), again.eval(&x, &z, &p).unwrap());
    }

    #[test]
    fn arity_counts_indices() {
        let e = parse_plain("x3 + z2*p1").unwrap();
        assert_eq!(e.arity(), (3, 2, 1));
    }
}
