//! Expression front end.
//!
//! ```text
//! expr     := ['+'|'-'] term (('+'|'-') term)*
//! term     := factor (('*'|'/') factor)*
//! factor   := base ('^' exponent)?
//! base     := number | ident | '(' expr ')' | 'exp' '(' expr ')' | 'sqrt' '(' expr ')'
//! exponent := ['-'] (number | ident | '(' expr ')')
//! ```
//!
//! Non-integer exponents distribute over products and quotients written in
//! the input, so `((1-h*u)*(z-1))^(-1/2)` yields two power factors.

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use crate::arith::{int, MultiPoly, RatFunc, Rational, Vars};
use crate::error::{Error, Result};
use crate::hyperterm::{term_ring, Exponent, HyperTerm, IntVar, Mode, EPS_IDX, PARAM_IDX};

#[derive(Clone, Debug)]
enum Kind {
    Num(Rational),
    Var(usize),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Neg(Box<Node>),
    Pow(Box<Node>, Box<Node>),
    Exp(Box<Node>),
    Sqrt(Box<Node>),
}

#[derive(Clone, Debug)]
struct Node {
    kind: Kind,
    pos: usize,
}

fn err(pos: usize, msg: impl Into<String>) -> Error {
    Error::Parse { pos, msg: msg.into() }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    vars: &'a Vars,
}

impl<'a> Parser<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(err(self.pos, format!("expected '{}'", c as char)))
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let pos = self.pos;
        let mut lhs = if self.eat(b'-') {
            let t = self.term()?;
            Node { kind: Kind::Neg(Box::new(t)), pos }
        } else {
            self.eat(b'+');
            self.term()?
        };
        loop {
            let pos = self.pos;
            if self.eat(b'+') {
                let r = self.term()?;
                lhs = Node { kind: Kind::Add(Box::new(lhs), Box::new(r)), pos };
            } else if self.eat(b'-') {
                let r = self.term()?;
                lhs = Node { kind: Kind::Sub(Box::new(lhs), Box::new(r)), pos };
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.factor()?;
        loop {
            let pos = self.pos;
            if self.eat(b'*') {
                let r = self.factor()?;
                lhs = Node { kind: Kind::Mul(Box::new(lhs), Box::new(r)), pos };
            } else if self.eat(b'/') {
                let r = self.factor()?;
                lhs = Node { kind: Kind::Div(Box::new(lhs), Box::new(r)), pos };
            } else {
                return Ok(lhs);
            }
        }
    }

    fn factor(&mut self) -> Result<Node> {
        let base = self.base()?;
        let pos = self.pos;
        if self.eat(b'^') {
            let epos = self.pos;
            let e = if self.eat(b'-') {
                let b = self.base_no_call()?;
                Node { kind: Kind::Neg(Box::new(b)), pos: epos }
            } else {
                self.base_no_call()?
            };
            return Ok(Node { kind: Kind::Pow(Box::new(base), Box::new(e)), pos });
        }
        Ok(base)
    }

    fn base_no_call(&mut self) -> Result<Node> {
        self.base()
    }

    fn number(&mut self) -> Result<Node> {
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        let int_part = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        let mut value = Rational::from_integer(int_part.parse::<BigInt>().map_err(|_| err(start, "bad number"))?);
        if self.pos < self.src.len() && self.src[self.pos] == b'.' {
            self.pos += 1;
            let fs = self.pos;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            let frac = std::str::from_utf8(&self.src[fs..self.pos]).unwrap();
            if !frac.is_empty() {
                let num: BigInt = frac.parse().unwrap();
                let den = num_traits::pow(BigInt::from(10), frac.len());
                value += Rational::new(num, den);
            }
        }
        Ok(Node { kind: Kind::Num(value), pos: start })
    }

    fn base(&mut self) -> Result<Node> {
        let c = self.peek().ok_or_else(|| err(self.pos, "unexpected end of input"))?;
        let pos = self.pos;
        if c.is_ascii_digit() {
            return self.number();
        }
        if c == b'(' {
            self.pos += 1;
            let e = self.expr()?;
            self.expect(b')')?;
            return Ok(e);
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            while self.pos < self.src.len() && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_') {
                self.pos += 1;
            }
            let name = std::str::from_utf8(&self.src[pos..self.pos]).unwrap().to_string();
            if self.peek() == Some(b'(') {
                let ctor: fn(Box<Node>) -> Kind = match name.as_str() {
                    "exp" => Kind::Exp,
                    "sqrt" => Kind::Sqrt,
                    _ => return Err(Error::NonHyperexponential(format!("function {}", name))),
                };
                self.pos += 1;
                let e = self.expr()?;
                self.expect(b')')?;
                return Ok(Node { kind: ctor(Box::new(e)), pos });
            }
            return match self.vars.iter().position(|v| *v == name) {
                Some(i) => Ok(Node { kind: Kind::Var(i), pos }),
                None => Err(err(pos, format!("unknown identifier '{}'", name))),
            };
        }
        Err(err(pos, format!("unexpected character '{}'", c as char)))
    }
}

fn parse_ast(text: &str, vars: &Vars) -> Result<Node> {
    let mut p = Parser { src: text.as_bytes(), pos: 0, vars };
    let e = p.expr()?;
    if p.peek().is_some() {
        return Err(err(p.pos, "unexpected trailing input"));
    }
    Ok(e)
}

/// A product `coef · e^{exp} · ∏ S^α` over the ring.
#[derive(Clone, Debug)]
struct Val {
    coef: RatFunc,
    exp: RatFunc,
    powers: Vec<(MultiPoly, Exponent)>,
}

impl Val {
    fn rat(r: RatFunc) -> Val {
        let v = r.vars().clone();
        Val { coef: r, exp: RatFunc::zero(&v), powers: Vec::new() }
    }

    fn is_pure(&self) -> bool {
        self.exp.is_zero() && self.powers.is_empty()
    }

    fn mul(mut self, o: Val) -> Val {
        self.coef = &self.coef * &o.coef;
        self.exp = &self.exp + &o.exp;
        self.powers.extend(o.powers);
        self
    }

    fn inv(self, pos: usize) -> Result<Val> {
        Ok(Val {
            coef: self.coef.recip().map_err(|_| err(pos, "division by zero"))?,
            exp: -&self.exp,
            powers: self.powers.into_iter().map(|(s, e)| (s, e.scale(&-Rational::one()))).collect(),
        })
    }

    fn pow_int(self, k: i64, pos: usize) -> Result<Val> {
        let kr = int(k);
        let coef = self
            .coef
            .pow(i32::try_from(k).map_err(|_| err(pos, "exponent too large"))?)
            .map_err(|_| err(pos, "zero to a negative power"))?;
        Ok(Val {
            coef,
            exp: self.exp.scale(&kr),
            powers: self.powers.into_iter().map(|(s, e)| (s, e.scale(&kr))).collect(),
        })
    }

    fn pow_general(self, alpha: &Exponent, pos: usize) -> Result<Val> {
        let v = self.coef.vars().clone();
        let mut out = Val::rat(RatFunc::one(&v));
        let (num, den) = self.coef.into_parts();
        let push = |out: &mut Val, base: MultiPoly, e: Exponent| {
            if let Some(c) = base.constant_value() {
                if c.is_one() {
                    return Ok(());
                }
                if c.is_negative() {
                    return Err(err(pos, "negative constant raised to a non-integer power"));
                }
            }
            out.powers.push((base, e));
            Ok(())
        };
        push(&mut out, num, alpha.clone())?;
        push(&mut out, den, alpha.scale(&-Rational::one()))?;
        if !self.exp.is_zero() {
            out.exp = self.exp.mul_poly(&alpha.to_poly(&v));
        }
        for (s, e) in self.powers {
            let prod = if e.is_constant() {
                alpha.scale(&e.c0)
            } else if alpha.is_constant() {
                e.scale(&alpha.c0)
            } else {
                return Err(Error::NonHyperexponential("exponent is not affine in ep and the parameter".into()));
            };
            out.powers.push((s, prod));
        }
        Ok(out)
    }
}

struct Eval<'a> {
    vars: &'a Vars,
    /// Whether `ep` and the parameter sit at the fixed term-ring slots.
    term_ring: bool,
}

impl<'a> Eval<'a> {
    fn eval(&self, n: &Node) -> Result<Val> {
        let v = self.vars;
        Ok(match &n.kind {
            Kind::Num(c) => Val::rat(RatFunc::constant(v, c.clone())),
            Kind::Var(i) => Val::rat(RatFunc::from_poly(MultiPoly::var_at(v, *i))),
            Kind::Add(a, b) | Kind::Sub(a, b) => {
                let (x, y) = (self.eval(a)?, self.eval(b)?);
                if !x.is_pure() || !y.is_pure() {
                    return Err(Error::NonHyperexponential("sum of non-rational factors".into()));
                }
                let c = if matches!(n.kind, Kind::Add(..)) { &x.coef + &y.coef } else { &x.coef - &y.coef };
                Val::rat(c)
            }
            Kind::Neg(a) => {
                let mut x = self.eval(a)?;
                x.coef = -&x.coef;
                x
            }
            Kind::Mul(a, b) => self.eval(a)?.mul(self.eval(b)?),
            Kind::Div(a, b) => self.eval(a)?.mul(self.eval(b)?.inv(n.pos)?),
            Kind::Exp(a) => {
                let x = self.eval(a)?;
                if !x.is_pure() {
                    return Err(Error::NonHyperexponential("exp of a non-rational argument".into()));
                }
                Val { coef: RatFunc::one(v), exp: x.coef, powers: Vec::new() }
            }
            Kind::Sqrt(a) => self.power(a, &Exponent::constant(Rational::new(1.into(), 2.into())), n.pos)?,
            Kind::Pow(b, e) => {
                let alpha = self.exponent(e)?;
                self.power(b, &alpha, n.pos)?
            }
        })
    }

    fn power(&self, base: &Node, alpha: &Exponent, pos: usize) -> Result<Val> {
        if alpha.is_constant() && alpha.c0.is_integer() {
            let k: i64 = alpha.c0.to_integer().try_into().map_err(|_| err(pos, "exponent too large"))?;
            return self.eval(base)?.pow_int(k, pos);
        }
        if !self.term_ring {
            return Err(err(pos, "only integer exponents are allowed here"));
        }
        match &base.kind {
            Kind::Mul(a, b) => Ok(self.power(a, alpha, pos)?.mul(self.power(b, alpha, pos)?)),
            Kind::Div(a, b) => Ok(self.power(a, alpha, pos)?.mul(self.power(b, alpha, pos)?.inv(pos)?)),
            _ => self.eval(base)?.pow_general(alpha, pos),
        }
    }

    fn exponent(&self, e: &Node) -> Result<Exponent> {
        let x = self.eval(e)?;
        let bad = || err(e.pos, "exponent must be affine in ep and the parameter");
        if !x.is_pure() {
            return Err(bad());
        }
        let p = x.coef.as_poly().ok_or_else(bad)?;
        if p.degree().unwrap_or(0) > 1 {
            return Err(bad());
        }
        let mut c = [Rational::zero(), Rational::zero(), Rational::zero()];
        for (m, coeff) in p.terms() {
            let slot = match m.0.iter().position(|&k| k > 0) {
                None => 0,
                Some(i) if self.term_ring && i == EPS_IDX => 1,
                Some(i) if self.term_ring && i == PARAM_IDX => 2,
                _ => return Err(bad()),
            };
            c[slot] = coeff.clone();
        }
        let [c0, ce, cn] = c;
        Ok(Exponent::new(c0, ce, cn))
    }
}

/// Parses a rational function over `vars` (integer exponents only).
pub fn parse_ratfunc(text: &str, vars: &Vars) -> Result<RatFunc> {
    let ast = parse_ast(text, vars)?;
    let v = Eval { vars, term_ring: false }.eval(&ast)?;
    if !v.is_pure() {
        return Err(Error::NonHyperexponential("expected a rational function".into()));
    }
    Ok(v.coef)
}

/// Parses a polynomial over `vars`.
pub fn parse_poly(text: &str, vars: &Vars) -> Result<MultiPoly> {
    parse_ratfunc(text, vars)?
        .as_poly()
        .ok_or_else(|| err(0, "expected a polynomial"))
}

/// Parses an integrand and decomposes it into a validated term.
pub fn parse_term(text: &str, mode: Mode, param: &str, intvars: Vec<IntVar>) -> Result<HyperTerm> {
    let v = term_ring(param, &intvars);
    let ast = parse_ast(text, &v)?;
    let val = Eval { vars: &v, term_ring: true }.eval(&ast)?;
    let mut h = HyperTerm::unit(mode, param, intvars);
    let (num, den) = val.coef.into_parts();
    if num.is_zero() {
        return Err(Error::DegenerateTerm("integrand is zero".into()));
    }
    match den.constant_value() {
        Some(c) => h.p = num.scale(&c.recip()),
        None => {
            h.p = num;
            h.powers.push((den, Exponent::constant(-Rational::one())));
        }
    }
    let (a, b) = val.exp.into_parts();
    h.a = a;
    h.b = b;
    h.powers.extend(val.powers);
    h.validate()
}
