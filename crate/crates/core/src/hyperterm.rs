//! Hyperexponential integrands `P · e^{a/b} · ∏ S_p^{α_p} · (s/t)^n` over an
//! integration box, and the pieces the telescoper ansatz is built from.

use std::fmt;

use num_traits::{One, Signed, Zero};

use crate::arith::{gcd, int, vars, MultiPoly, RatFunc, Rational, Vars};
use crate::error::{Error, Result};

/// Name of the regulator variable in every term ring.
pub const EPS: &str = "ep";
pub const EPS_IDX: usize = 0;
pub const PARAM_IDX: usize = 1;

/// Affine exponent `c0 + c_eps·ε + c_n·n`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct Exponent {
    pub c0: Rational,
    pub c_eps: Rational,
    pub c_n: Rational,
}

impl Exponent {
    pub fn new(c0: Rational, c_eps: Rational, c_n: Rational) -> Self {
        Exponent { c0, c_eps, c_n }
    }

    pub fn constant(c0: Rational) -> Self {
        Exponent {
            c0,
            ..Default::default()
        }
    }

    pub fn is_zero(&self) -> bool {
        self.c0.is_zero() && self.c_eps.is_zero() && self.c_n.is_zero()
    }

    pub fn is_constant(&self) -> bool {
        self.c_eps.is_zero() && self.c_n.is_zero()
    }

    /// Non-negative integer constant exponent, if it is one.
    pub fn as_natural(&self) -> Option<u32> {
        if self.is_constant() && self.c0.is_integer() && !self.c0.is_negative() {
            self.c0.to_integer().try_into().ok()
        } else {
            None
        }
    }

    pub fn add(&self, o: &Exponent) -> Exponent {
        Exponent::new(&self.c0 + &o.c0, &self.c_eps + &o.c_eps, &self.c_n + &o.c_n)
    }

    pub fn scale(&self, k: &Rational) -> Exponent {
        Exponent::new(&self.c0 * k, &self.c_eps * k, &self.c_n * k)
    }

    pub fn offset(&self, k: &Rational) -> Exponent {
        Exponent::new(&self.c0 + k, self.c_eps.clone(), self.c_n.clone())
    }

    /// The exponent as a polynomial in a term ring (`n` is the parameter).
    pub fn to_poly(&self, v: &Vars) -> MultiPoly {
        let mut p = MultiPoly::constant(v, self.c0.clone());
        if !self.c_eps.is_zero() {
            p = &p + &MultiPoly::var_at(v, EPS_IDX).scale(&self.c_eps);
        }
        if !self.c_n.is_zero() {
            p = &p + &MultiPoly::var_at(v, PARAM_IDX).scale(&self.c_n);
        }
        p
    }

    pub fn eval_f64(&self, eps: f64, n: f64) -> f64 {
        use crate::arith::poly::rational_to_f64 as f;
        f(&self.c0) + f(&self.c_eps) * eps + f(&self.c_n) * n
    }

    /// Text with `n` spelled as `param`.
    pub fn render(&self, param: &str) -> String {
        let v = vars(&[EPS, param]);
        self.to_poly(&v).to_string()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    Discrete,
    Continuous,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Discrete => "discrete",
            Mode::Continuous => "continuous",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Bound {
    NegInf,
    Finite(Rational),
    PosInf,
}

impl Bound {
    pub fn finite(&self) -> Option<&Rational> {
        match self {
            Bound::Finite(v) => Some(v),
            _ => None,
        }
    }
}

impl fmt::Display for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bound::NegInf => write!(f, "-inf"),
            Bound::PosInf => write!(f, "inf"),
            Bound::Finite(v) => write!(f, "{}", crate::arith::poly::format_rational(v)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct IntVar {
    pub name: String,
    pub lower: Bound,
    pub upper: Bound,
}

impl IntVar {
    pub fn new(name: &str, lower: Bound, upper: Bound) -> Self {
        IntVar {
            name: name.to_string(),
            lower,
            upper,
        }
    }

    pub fn finite(name: &str, lo: Rational, hi: Rational) -> Self {
        Self::new(name, Bound::Finite(lo), Bound::Finite(hi))
    }
}

/// `q/r`, reduced.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LogDeriv {
    pub q: MultiPoly,
    pub r: MultiPoly,
}

impl LogDeriv {
    pub fn as_ratfunc(&self) -> RatFunc {
        RatFunc::new(self.q.clone(), self.r.clone()).expect("nonzero denominator")
    }
}

/// All polynomials live in the ring `[ep, param, x_1, …, x_d]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct HyperTerm {
    pub mode: Mode,
    pub param: String,
    pub p: MultiPoly,
    pub a: MultiPoly,
    pub b: MultiPoly,
    pub powers: Vec<(MultiPoly, Exponent)>,
    pub s: MultiPoly,
    pub t: MultiPoly,
    pub intvars: Vec<IntVar>,
}

/// Ring variables for a term: regulator, parameter, integration variables.
pub fn term_ring(param: &str, intvars: &[IntVar]) -> Vars {
    let mut names = vec![EPS.to_string(), param.to_string()];
    names.extend(intvars.iter().map(|v| v.name.clone()));
    vars(&names)
}

impl HyperTerm {
    /// The term `1` over the given box.
    pub fn unit(mode: Mode, param: &str, intvars: Vec<IntVar>) -> Self {
        let v = term_ring(param, &intvars);
        HyperTerm {
            mode,
            param: param.to_string(),
            p: MultiPoly::one(&v),
            a: MultiPoly::zero(&v),
            b: MultiPoly::one(&v),
            powers: Vec::new(),
            s: MultiPoly::one(&v),
            t: MultiPoly::one(&v),
            intvars,
        }
    }

    pub fn vars(&self) -> &Vars {
        self.p.vars()
    }

    pub fn dim(&self) -> usize {
        self.intvars.len()
    }

    pub fn var_idx(&self, j: usize) -> usize {
        2 + j
    }

    /// Coefficient ring `[ep, param]` of telescopers.
    pub fn coeff_vars(&self) -> Vars {
        vars(&[EPS, self.param.as_str()])
    }

    pub fn uses_eps(&self) -> bool {
        let polys = [&self.p, &self.a, &self.b, &self.s, &self.t];
        polys.iter().any(|q| q.depends_on(EPS_IDX))
            || self.powers.iter().any(|(s, e)| s.depends_on(EPS_IDX) || !e.c_eps.is_zero())
    }

    /// Whether `S_p` takes part in the `H̄` shift (continuous mode only).
    pub fn is_shifted(&self, p: usize) -> bool {
        self.mode == Mode::Continuous && self.powers[p].0.depends_on(PARAM_IDX)
    }

    /// Checks the invariants and normalizes the pieces. Idempotent.
    pub fn validate(self) -> Result<HyperTerm> {
        if self.intvars.is_empty() {
            return Err(Error::NoIntegrationVariables);
        }
        self.normalized()
    }

    /// Like [`validate`](Self::validate) but accepts zero integration
    /// variables (base cases of the boundary recursion).
    pub fn normalized(mut self) -> Result<HyperTerm> {
        let v = term_ring(&self.param, &self.intvars);
        for q in [&self.p, &self.a, &self.b, &self.s, &self.t] {
            if q.vars() != &v {
                return Err(Error::DegenerateTerm("polynomial ring does not match the variables".into()));
            }
        }
        let mut names: Vec<&str> = v.iter().map(|s| s.as_str()).collect();
        names.sort();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::DegenerateTerm("variable names must be distinct".into()));
        }
        if self.b.is_zero() {
            return Err(Error::DegenerateTerm("b = 0".into()));
        }
        if self.t.is_zero() {
            return Err(Error::DegenerateTerm("t = 0".into()));
        }
        if self.p.is_zero() {
            return Err(Error::DegenerateTerm("P = 0".into()));
        }
        if self.powers.iter().any(|(s, _)| s.is_zero()) {
            return Err(Error::DegenerateTerm("power base is zero".into()));
        }
        for iv in &self.intvars {
            if let (Bound::Finite(lo), Bound::Finite(hi)) = (&iv.lower, &iv.upper) {
                if lo >= hi {
                    return Err(Error::DegenerateTerm(format!("empty range for {}", iv.name)));
                }
            }
            if iv.lower == Bound::PosInf || iv.upper == Bound::NegInf {
                return Err(Error::DegenerateTerm(format!("empty range for {}", iv.name)));
            }
        }
        match self.mode {
            Mode::Continuous => {
                if self.powers.iter().any(|(_, e)| !e.c_n.is_zero()) {
                    return Err(Error::DegenerateTerm("exponent depends on n in continuous mode".into()));
                }
                if !self.s.is_one() || !self.t.is_one() {
                    return Err(Error::DegenerateTerm("(s/t)^n factor in continuous mode".into()));
                }
            }
            Mode::Discrete => {
                let mut rest = Vec::new();
                for (base, e) in std::mem::take(&mut self.powers) {
                    if !e.c_n.is_integer() {
                        return Err(Error::DegenerateTerm("n-coefficient of an exponent must be an integer".into()));
                    }
                    let k: u32 = e.c_n.abs().to_integer().try_into().map_err(|_| {
                        Error::DegenerateTerm("exponent too large".into())
                    })?;
                    if e.c_n.is_positive() {
                        self.s = &self.s * &base.pow(k);
                    } else if e.c_n.is_negative() {
                        self.t = &self.t * &base.pow(k);
                    }
                    rest.push((base, Exponent::new(e.c0, e.c_eps, Rational::zero())));
                }
                self.powers = rest;
                let ab = [&self.a, &self.b, &self.s, &self.t];
                if ab.iter().any(|q| q.depends_on(PARAM_IDX))
                    || self.powers.iter().any(|(s, _)| s.depends_on(PARAM_IDX))
                {
                    return Err(Error::DegenerateTerm(format!(
                        "{} may only occur in P and in exponents",
                        self.param
                    )));
                }
                let g = gcd(&self.s, &self.t);
                if !g.is_one() {
                    self.s = self.s.exact_div(&g)?;
                    self.t = self.t.exact_div(&g)?;
                }
                let c = self.t.leading_coefficient().abs();
                self.s = self.s.scale(&c.recip());
                self.t = self.t.scale(&c.recip());
            }
        }
        // Exponential part in lowest terms.
        let e = RatFunc::new(self.a.clone(), self.b.clone())?;
        let (a, b) = e.into_parts();
        self.a = a;
        self.b = b;
        // Drop trivial powers; move natural powers of polynomials into P.
        let mut kept: Vec<(MultiPoly, Exponent)> = Vec::new();
        for (base, e) in std::mem::take(&mut self.powers) {
            if e.is_zero() || base.is_one() {
                continue;
            }
            if let Some(k) = e.as_natural() {
                self.p = &self.p * &base.pow(k);
                continue;
            }
            if let Some((_, ex)) = kept.iter_mut().find(|(s, _)| *s == base) {
                *ex = ex.add(&e);
            } else {
                kept.push((base, e));
            }
        }
        kept.retain(|(_, e)| !e.is_zero());
        self.powers = kept;
        Ok(self)
    }

    /// `D_v F / F` for any ring index.
    pub fn log_derivative_f(&self, idx: usize) -> RatFunc {
        let v = self.vars();
        let mut acc = RatFunc::new(self.p.derivative(idx), self.p.clone()).expect("P nonzero");
        acc = &acc + &self.exp_log_derivative(idx);
        for (s, e) in &self.powers {
            let ds = s.derivative(idx);
            if !ds.is_zero() {
                acc = &acc + &RatFunc::new(&e.to_poly(v) * &ds, s.clone()).unwrap();
            }
        }
        if self.mode == Mode::Discrete {
            let n = RatFunc::from_poly(MultiPoly::var_at(v, PARAM_IDX));
            let st = &self.log_poly(&self.s, idx) - &self.log_poly(&self.t, idx);
            acc = &acc + &(&n * &st);
        }
        acc
    }

    fn log_poly(&self, q: &MultiPoly, idx: usize) -> RatFunc {
        RatFunc::new(q.derivative(idx), q.clone()).unwrap()
    }

    fn exp_log_derivative(&self, idx: usize) -> RatFunc {
        if self.a.is_zero() {
            return RatFunc::zero(self.vars());
        }
        RatFunc::new(self.a.clone(), self.b.clone()).unwrap().derivative(idx)
    }

    /// `H̄ / F` for order `L`.
    pub fn hbar_over_f(&self, l: usize) -> RatFunc {
        let v = self.vars();
        let mut den = self.p.clone();
        match self.mode {
            Mode::Continuous => {
                if !self.b.is_constant() {
                    den = &den * &self.b.pow(2 * l as u32);
                }
                for (i, (s, _)) in self.powers.iter().enumerate() {
                    if self.is_shifted(i) {
                        den = &den * &s.pow(l as u32);
                    }
                }
            }
            Mode::Discrete => den = &den * &self.t.pow(l as u32),
        }
        RatFunc::new(MultiPoly::one(v), den).unwrap()
    }

    /// `D_v H̄ / H̄` for the integration variable `v` (by name).
    pub fn log_derivative(&self, l: usize, v: &str) -> Result<LogDeriv> {
        let j = self
            .intvars
            .iter()
            .position(|iv| iv.name == v)
            .ok_or_else(|| crate::arith::ArithError::UnknownVariable(v.to_string()))?;
        Ok(self.log_derivative_at(l, j))
    }

    pub fn log_derivative_at(&self, l: usize, j: usize) -> LogDeriv {
        let idx = self.var_idx(j);
        let f = self.log_derivative_f(idx);
        let hf = self.hbar_over_f(l);
        // H̄/F = 1/den, so D H̄/H̄ = D F/F - D den/den.
        let total = &f - &RatFunc::new(hf.den().derivative(idx), hf.den().clone()).unwrap();
        let (q, r) = total.into_parts();
        LogDeriv { q, r }
    }

    /// `c_0, …, c_L` with `Σ e_i D^i F = (Σ e_i c_i) H̄` (continuous) or
    /// `Σ e_i F(n+i) = (Σ e_i c_i) H̄` (discrete).
    pub fn hbar_all(&self, l: usize) -> Vec<MultiPoly> {
        let v = self.vars();
        match self.mode {
            Mode::Discrete => (0..=l)
                .map(|i| {
                    let pi = self.p.shift(PARAM_IDX, &int(i as i64));
                    &(&pi * &self.s.pow(i as u32)) * &self.t.pow((l - i) as u32)
                })
                .collect(),
            Mode::Continuous => {
                let x = PARAM_IDX;
                let one = MultiPoly::one(v);
                let b = &self.b;
                let bconst = b.is_constant();
                let (bb, db) = if bconst { (one.clone(), MultiPoly::zero(v)) } else { (b * b, b.derivative(x)) };
                let shifted: Vec<usize> = (0..self.powers.len()).filter(|&i| self.is_shifted(i)).collect();
                let pi = shifted.iter().fold(one.clone(), |acc, &i| &acc * &self.powers[i].0);
                // (a'b - ab') Π, or a' Π when b is constant
                let exp_part = if self.a.is_zero() {
                    MultiPoly::zero(v)
                } else if bconst {
                    &self.a.derivative(x) * &pi
                } else {
                    &(&(&self.a.derivative(x) * b) - &(&self.a * &db)) * &pi
                };
                let alpha: Vec<MultiPoly> = self.powers.iter().map(|(_, e)| e.to_poly(v)).collect();
                // Σ_{p shifted} S_p' Π/S_p, and Σ over the unshifted p with S_p' ≠ 0 (none in x).
                let mut g = vec![self.p.clone()];
                for i in 0..l {
                    let gi = &g[i];
                    let ii = int(i as i64);
                    let mut mult = exp_part.clone();
                    if !bconst {
                        mult = &mult - &(&(b * &db) * &pi).scale(&int(2 * i as i64));
                    }
                    let mut ssum = MultiPoly::zero(v);
                    for &p in &shifted {
                        let sp = &self.powers[p].0;
                        let rest = pi.exact_div(sp).expect("factor of Π");
                        let coeff = &alpha[p] - &MultiPoly::constant(v, ii.clone());
                        ssum = &ssum + &(&(&coeff * &sp.derivative(x)) * &rest);
                    }
                    mult = &mult + &(&bb * &ssum);
                    let next = &(&(&bb * &pi) * &gi.derivative(x)) + &(gi * &mult);
                    g.push(next);
                }
                g.into_iter()
                    .enumerate()
                    .map(|(i, gi)| {
                        let k = (l - i) as u32;
                        &(&gi * &bb.pow(k)) * &pi.pow(k)
                    })
                    .collect()
            }
        }
    }

    pub fn hbar_parts(&self, l: usize, i: usize) -> Result<MultiPoly> {
        if i > l {
            return Err(Error::IndexError { index: i, max: l });
        }
        Ok(self.hbar_all(l).swap_remove(i))
    }

    /// Shifts the parameter `n → n + k` (discrete mode).
    pub fn shift_param(&self, k: i64) -> HyperTerm {
        let mut out = self.clone();
        let kk = int(k);
        out.p = self.p.shift(PARAM_IDX, &kk);
        // (s/t)^{n+k} = (s/t)^n (s/t)^k
        if k > 0 {
            out.p = &out.p * &self.s.pow(k as u32);
            out.powers.push((self.t.clone(), Exponent::constant(int(-k))));
        } else if k < 0 {
            out.p = &out.p * &self.t.pow((-k) as u32);
            out.powers.push((self.s.clone(), Exponent::constant(int(k))));
        }
        out
    }
}

fn wrap(p: &MultiPoly) -> String {
    if p.len() == 1 && p.terms().next().unwrap().1.is_one() && p.degree().unwrap_or(0) <= 1 {
        p.to_string()
    } else {
        format!("({})", p)
    }
}

impl fmt::Display for HyperTerm {
    /// Canonical expression text accepted by the parser.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts: Vec<String> = Vec::new();
        if !self.p.is_one() {
            parts.push(wrap(&self.p));
        }
        if !self.a.is_zero() {
            if self.b.is_one() {
                parts.push(format!("exp({})", self.a));
            } else {
                parts.push(format!("exp(({})/({}))", self.a, self.b));
            }
        }
        for (s, e) in &self.powers {
            parts.push(format!("{}^({})", wrap(s), e.render(&self.param)));
        }
        if !self.s.is_one() || !self.t.is_one() {
            if self.t.is_one() {
                parts.push(format!("{}^{}", wrap(&self.s), self.param));
            } else {
                parts.push(format!("(({})/({}))^{}", self.s, self.t, self.param));
            }
        }
        if parts.is_empty() {
            return write!(f, "1");
        }
        write!(f, "{}", parts.join(" * "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::rat;

    fn exp_xt2() -> HyperTerm {
        let iv = vec![IntVar::new("t", Bound::Finite(int(0)), Bound::PosInf)];
        let mut h = HyperTerm::unit(Mode::Continuous, "x", iv);
        let v = h.vars().clone();
        let x = MultiPoly::var(&v, "x").unwrap();
        let t = MultiPoly::var(&v, "t").unwrap();
        h.a = -&(&x * &t.pow(2));
        h.validate().unwrap()
    }

    #[test]
    fn log_derivative_gaussian() {
        let h = exp_xt2();
        let ld = h.log_derivative(3, "t").unwrap();
        assert_eq!(ld.as_ratfunc().to_string(), "-2*x*t");
    }

    #[test]
    fn log_derivative_of_ratio_power() {
        let iv = vec![IntVar::finite("x", int(0), int(1))];
        let mut h = HyperTerm::unit(Mode::Discrete, "n", iv);
        let v = h.vars().clone();
        let x = MultiPoly::var(&v, "x").unwrap();
        h.s = x.clone();
        h.t = &MultiPoly::one(&v) - &x;
        let h = h.validate().unwrap();
        let ld = h.log_derivative(0, "x").unwrap().as_ratfunc();
        let n = MultiPoly::var(&v, "n").unwrap();
        let want = RatFunc::new(n, &x - &x.pow(2)).unwrap();
        assert_eq!(ld, want);
    }

    #[test]
    fn log_derivative_of_power() {
        let iv = vec![IntVar::finite("u", int(0), int(1))];
        let mut h = HyperTerm::unit(Mode::Continuous, "h", iv);
        let v = h.vars().clone();
        let hh = MultiPoly::var(&v, "h").unwrap();
        let u = MultiPoly::var(&v, "u").unwrap();
        let s = &MultiPoly::one(&v) - &(&hh * &u);
        h.powers.push((s.clone(), Exponent::constant(rat(-1, 2))));
        let h = h.validate().unwrap();
        let ld = h.log_derivative(0, "u").unwrap().as_ratfunc();
        let want = RatFunc::new(hh, s.scale(&int(2))).unwrap();
        assert_eq!(ld, want);
    }

    #[test]
    fn hbar_parts_examples() {
        let h = exp_xt2();
        let v = h.vars().clone();
        assert!(h.hbar_parts(1, 0).unwrap().is_one());
        let t = MultiPoly::var(&v, "t").unwrap();
        assert_eq!(h.hbar_parts(1, 1).unwrap(), -&t.pow(2));
        assert!(matches!(h.hbar_parts(1, 2), Err(Error::IndexError { .. })));

        let iv = vec![IntVar::finite("x", int(0), int(1))];
        let mut xn = HyperTerm::unit(Mode::Discrete, "n", iv);
        let v = xn.vars().clone();
        xn.s = MultiPoly::var(&v, "x").unwrap();
        let xn = xn.validate().unwrap();
        assert!(xn.hbar_parts(1, 0).unwrap().is_one());
        assert_eq!(xn.hbar_parts(1, 1).unwrap().to_string(), "x");
    }

    #[test]
    fn hbar_parts_power() {
        let iv = vec![IntVar::finite("u", int(0), int(1))];
        let mut h = HyperTerm::unit(Mode::Continuous, "h", iv);
        let v = h.vars().clone();
        let hh = MultiPoly::var(&v, "h").unwrap();
        let u = MultiPoly::var(&v, "u").unwrap();
        h.powers.push((&MultiPoly::one(&v) - &(&hh * &u), Exponent::constant(rat(-1, 2))));
        let h = h.validate().unwrap();
        assert_eq!(h.hbar_parts(1, 1).unwrap(), u.scale(&rat(1, 2)));
    }

    #[test]
    fn validate_rejects_degenerate() {
        let iv = vec![IntVar::finite("x", int(0), int(1))];
        let mut h = HyperTerm::unit(Mode::Continuous, "n", iv.clone());
        h.b = MultiPoly::zero(h.vars());
        assert!(matches!(h.validate(), Err(Error::DegenerateTerm(_))));
        let mut h = HyperTerm::unit(Mode::Continuous, "n", iv.clone());
        let x = MultiPoly::var(h.vars(), "x").unwrap();
        h.powers.push((x, Exponent::new(int(0), int(0), int(1))));
        assert!(matches!(h.validate(), Err(Error::DegenerateTerm(_))));
        let h = HyperTerm::unit(Mode::Continuous, "n", vec![]);
        assert_eq!(h.validate(), Err(Error::NoIntegrationVariables));
    }

    #[test]
    fn validate_is_idempotent() {
        let iv = vec![IntVar::finite("x", int(0), int(1))];
        let mut h = HyperTerm::unit(Mode::Discrete, "n", iv);
        let v = h.vars().clone();
        let x = MultiPoly::var(&v, "x").unwrap();
        h.powers.push((x.clone(), Exponent::new(int(0), rat(1, 2), int(1))));
        h.powers.push((&MultiPoly::one(&v) - &x, Exponent::constant(int(2))));
        let once = h.validate().unwrap();
        assert_eq!(once.s, x);
        assert_eq!(once.clone().validate().unwrap(), once);
    }
}
