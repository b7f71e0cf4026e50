//! Sparse multivariate polynomials over the rationals.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::{ArithError, Rational};

/// Ordered variable names shared by all polynomials of one ring.
pub type Vars = Arc<Vec<String>>;

/// Builds a shared variable list.
pub fn vars<S: AsRef<str>>(names: &[S]) -> Vars {
    Arc::new(names.iter().map(|s| s.as_ref().to_string()).collect())
}

/// Exponent vector ordered graded-lexicographically (total degree first,
/// then lexicographic with the first declared variable most significant).
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Monomial(pub Vec<u32>);

impl Monomial {
    pub fn one(n: usize) -> Self {
        Monomial(vec![0; n])
    }

    pub fn degree(&self) -> u64 {
        self.0.iter().map(|&e| e as u64).sum()
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        Monomial(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// `self / other` when `other` divides `self`.
    pub fn div(&self, other: &Monomial) -> Option<Monomial> {
        let mut out = Vec::with_capacity(self.0.len());
        for (a, b) in self.0.iter().zip(&other.0) {
            if a < b {
                return None;
            }
            out.push(a - b);
        }
        Some(Monomial(out))
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// A polynomial in the variables `vars` with rational coefficients.
///
/// Zero coefficients are never stored; the zero polynomial has no terms.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct MultiPoly {
    vars: Vars,
    terms: BTreeMap<Monomial, Rational>,
}

impl MultiPoly {
    pub fn zero(vars: &Vars) -> Self {
        MultiPoly {
            vars: vars.clone(),
            terms: BTreeMap::new(),
        }
    }

    pub fn one(vars: &Vars) -> Self {
        Self::constant(vars, Rational::one())
    }

    pub fn constant(vars: &Vars, c: Rational) -> Self {
        let mut p = Self::zero(vars);
        if !c.is_zero() {
            p.terms.insert(Monomial::one(vars.len()), c);
        }
        p
    }

    pub fn from_int(vars: &Vars, c: i64) -> Self {
        Self::constant(vars, Rational::from_integer(BigInt::from(c)))
    }

    pub fn var(vars: &Vars, name: &str) -> Result<Self, ArithError> {
        let idx = index_of(vars, name)?;
        Ok(Self::var_at(vars, idx))
    }

    pub fn var_at(vars: &Vars, idx: usize) -> Self {
        let mut e = vec![0; vars.len()];
        e[idx] = 1;
        Self::monomial(vars, Monomial(e), Rational::one())
    }

    pub fn monomial(vars: &Vars, m: Monomial, c: Rational) -> Self {
        debug_assert_eq!(m.0.len(), vars.len());
        let mut p = Self::zero(vars);
        if !c.is_zero() {
            p.terms.insert(m, c);
        }
        p
    }

    /// Builds a polynomial from raw terms, merging duplicates and dropping zeros.
    pub fn from_terms<I: IntoIterator<Item = (Monomial, Rational)>>(vars: &Vars, terms: I) -> Self {
        let mut p = Self::zero(vars);
        for (m, c) in terms {
            p.add_term(m, c);
        }
        p
    }

    pub fn vars(&self) -> &Vars {
        &self.vars
    }

    pub fn nvars(&self) -> usize {
        self.vars.len()
    }

    pub fn var_index(&self, name: &str) -> Result<usize, ArithError> {
        index_of(&self.vars, name)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.constant_value().is_some_and(|c| c.is_one())
    }

    pub fn is_constant(&self) -> bool {
        self.terms.is_empty() || (self.terms.len() == 1 && self.terms.keys().next().unwrap().degree() == 0)
    }

    /// The value of a constant polynomial.
    pub fn constant_value(&self) -> Option<Rational> {
        if self.terms.is_empty() {
            return Some(Rational::zero());
        }
        if self.is_constant() {
            return self.terms.values().next().cloned();
        }
        None
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Terms in ascending term order.
    pub fn terms(&self) -> impl DoubleEndedIterator<Item = (&Monomial, &Rational)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, m: &Monomial) -> Rational {
        self.terms.get(m).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn add_term(&mut self, m: Monomial, c: Rational) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    /// Total degree; `None` stands for the degree of zero.
    pub fn degree(&self) -> Option<u64> {
        self.terms.keys().map(Monomial::degree).max()
    }

    pub fn degree_in(&self, idx: usize) -> Option<u32> {
        self.terms.keys().map(|m| m.0[idx]).max()
    }

    pub fn min_degree_in(&self, idx: usize) -> Option<u32> {
        self.terms.keys().map(|m| m.0[idx]).min()
    }

    pub fn depends_on(&self, idx: usize) -> bool {
        self.terms.keys().any(|m| m.0[idx] > 0)
    }

    /// Indices of the variables that actually occur.
    pub fn support(&self) -> Vec<usize> {
        (0..self.nvars()).filter(|&i| self.depends_on(i)).collect()
    }

    pub fn leading_term(&self) -> Option<(&Monomial, &Rational)> {
        self.terms.iter().next_back()
    }

    pub fn leading_coefficient(&self) -> Rational {
        self.leading_term().map(|(_, c)| c.clone()).unwrap_or_else(Rational::zero)
    }

    fn check_ring(&self, other: &MultiPoly) {
        assert!(
            Arc::ptr_eq(&self.vars, &other.vars) || self.vars == other.vars,
            "polynomials from different rings: {:?} vs {:?}",
            self.vars,
            other.vars
        );
    }

    pub fn scale(&self, c: &Rational) -> MultiPoly {
        if c.is_zero() {
            return Self::zero(&self.vars);
        }
        MultiPoly {
            vars: self.vars.clone(),
            terms: self.terms.iter().map(|(m, a)| (m.clone(), a * c)).collect(),
        }
    }

    pub fn mul_monomial(&self, m: &Monomial, c: &Rational) -> MultiPoly {
        if c.is_zero() {
            return Self::zero(&self.vars);
        }
        MultiPoly {
            vars: self.vars.clone(),
            terms: self.terms.iter().map(|(k, a)| (k.mul(m), a * c)).collect(),
        }
    }

    pub fn pow(&self, e: u32) -> MultiPoly {
        let mut result = Self::one(&self.vars);
        let mut base = self.clone();
        let mut e = e;
        while e > 0 {
            if e & 1 == 1 {
                result = &result * &base;
            }
            e >>= 1;
            if e > 0 {
                base = &base * &base;
            }
        }
        result
    }

    /// Partial derivative with respect to the variable at `idx`.
    pub fn derivative(&self, idx: usize) -> MultiPoly {
        let mut out = Self::zero(&self.vars);
        for (m, c) in &self.terms {
            let e = m.0[idx];
            if e == 0 {
                continue;
            }
            let mut m2 = m.clone();
            m2.0[idx] -= 1;
            out.terms.insert(m2, c * Rational::from_integer(BigInt::from(e)));
        }
        out
    }

    pub fn derivative_by(&self, name: &str) -> Result<MultiPoly, ArithError> {
        Ok(self.derivative(self.var_index(name)?))
    }

    /// Coefficients with respect to the variable at `idx`: entry `j` multiplies `x^j`.
    pub fn as_univariate(&self, idx: usize) -> Vec<MultiPoly> {
        let deg = match self.degree_in(idx) {
            Some(d) => d as usize,
            None => return Vec::new(),
        };
        let mut coeffs = vec![Self::zero(&self.vars); deg + 1];
        for (m, c) in &self.terms {
            let e = m.0[idx] as usize;
            let mut m2 = m.clone();
            m2.0[idx] = 0;
            coeffs[e].terms.insert(m2, c.clone());
        }
        coeffs
    }

    pub fn from_univariate(vars: &Vars, idx: usize, coeffs: &[MultiPoly]) -> MultiPoly {
        let mut out = Self::zero(vars);
        for (j, c) in coeffs.iter().enumerate() {
            for (m, a) in &c.terms {
                let mut m2 = m.clone();
                m2.0[idx] += j as u32;
                out.add_term(m2, a.clone());
            }
        }
        out
    }

    /// Substitutes `x_idx -> x_idx + k`.
    pub fn shift(&self, idx: usize, k: &Rational) -> MultiPoly {
        if k.is_zero() || !self.depends_on(idx) {
            return self.clone();
        }
        let coeffs = self.as_univariate(idx);
        let x = Self::var_at(&self.vars, idx);
        let lin = &x + &Self::constant(&self.vars, k.clone());
        // Horner in (x + k).
        let mut acc = Self::zero(&self.vars);
        for c in coeffs.iter().rev() {
            acc = &(&acc * &lin) + c;
        }
        acc
    }

    pub fn shift_by(&self, name: &str, k: i64) -> Result<MultiPoly, ArithError> {
        Ok(self.shift(self.var_index(name)?, &Rational::from_integer(BigInt::from(k))))
    }

    /// Substitutes the constant `value` for the variable at `idx`.
    pub fn substitute(&self, idx: usize, value: &Rational) -> MultiPoly {
        let mut out = Self::zero(&self.vars);
        let mut powers: Vec<Rational> = vec![Rational::one()];
        for (m, c) in &self.terms {
            let e = m.0[idx] as usize;
            while powers.len() <= e {
                let next = powers.last().unwrap() * value;
                powers.push(next);
            }
            let mut m2 = m.clone();
            m2.0[idx] = 0;
            out.add_term(m2, c * &powers[e]);
        }
        out
    }

    /// Substitutes the polynomial `value` (same ring) for the variable at `idx`.
    pub fn compose(&self, idx: usize, value: &MultiPoly) -> MultiPoly {
        self.check_ring(value);
        let coeffs = self.as_univariate(idx);
        let mut acc = Self::zero(&self.vars);
        for c in coeffs.iter().rev() {
            acc = &(&acc * value) + c;
        }
        acc
    }

    pub fn eval(&self, point: &[Rational]) -> Rational {
        assert_eq!(point.len(), self.nvars());
        let mut sum = Rational::zero();
        for (m, c) in &self.terms {
            let mut t = c.clone();
            for (e, x) in m.0.iter().zip(point) {
                if *e > 0 {
                    t *= num_traits::pow(x.clone(), *e as usize);
                }
            }
            sum += t;
        }
        sum
    }

    pub fn eval_f64(&self, point: &[f64]) -> f64 {
        let mut sum = 0.0;
        for (m, c) in &self.terms {
            let mut t = rational_to_f64(c);
            for (e, x) in m.0.iter().zip(point) {
                if *e > 0 {
                    t *= x.powi(*e as i32);
                }
            }
            sum += t;
        }
        sum
    }

    /// Exact quotient `self / divisor`.
    pub fn exact_div(&self, divisor: &MultiPoly) -> Result<MultiPoly, ArithError> {
        self.check_ring(divisor);
        if divisor.is_zero() {
            return Err(ArithError::DivisionByZero);
        }
        if let Some(c) = divisor.constant_value() {
            return Ok(self.scale(&c.recip()));
        }
        let (lm, lc) = divisor.leading_term().map(|(m, c)| (m.clone(), c.clone())).unwrap();
        let mut rem = self.clone();
        let mut quot = Self::zero(&self.vars);
        while let Some((m, c)) = rem.leading_term().map(|(m, c)| (m.clone(), c.clone())) {
            let qm = m.div(&lm).ok_or(ArithError::InexactDivision)?;
            let qc = &c / &lc;
            rem = &rem - &divisor.mul_monomial(&qm, &qc);
            quot.add_term(qm, qc);
        }
        Ok(quot)
    }

    /// `Some(q)` when `divisor` divides `self` exactly.
    pub fn try_div(&self, divisor: &MultiPoly) -> Option<MultiPoly> {
        self.exact_div(divisor).ok()
    }

    /// Pseudo-remainder of `self` by `divisor`, both viewed as univariate in `idx`.
    pub fn pseudo_rem(&self, divisor: &MultiPoly, idx: usize) -> MultiPoly {
        let b = divisor.as_univariate(idx);
        let db = b.len() - 1;
        let lb = b[db].clone();
        let mut r = self.as_univariate(idx);
        while r.len() > db && !r.is_empty() {
            let dr = r.len() - 1;
            let lr = r[dr].clone();
            let shift = dr - db;
            for c in r.iter_mut() {
                *c = &*c * &lb;
            }
            for (j, bj) in b.iter().enumerate() {
                let t = bj * &lr;
                r[j + shift] = &r[j + shift] - &t;
            }
            while r.last().is_some_and(|c| c.is_zero()) {
                r.pop();
            }
        }
        Self::from_univariate(&self.vars, idx, &r)
    }

    /// Rational `c` with `self / c` integral, primitive and with positive
    /// leading coefficient. Zero for the zero polynomial.
    pub fn rational_content(&self) -> Rational {
        if self.is_zero() {
            return Rational::zero();
        }
        let mut num_gcd = BigInt::zero();
        let mut den_lcm = BigInt::one();
        for c in self.terms.values() {
            num_gcd = num_gcd.gcd(c.numer());
            den_lcm = den_lcm.lcm(c.denom());
        }
        let mut content = Rational::new(num_gcd, den_lcm);
        if self.leading_coefficient().is_negative() {
            content = -content;
        }
        content
    }

    /// Integral primitive associate with positive leading coefficient.
    pub fn primitive(&self) -> MultiPoly {
        if self.is_zero() {
            return self.clone();
        }
        self.scale(&self.rational_content().recip())
    }

    /// Monic associate (leading coefficient one).
    pub fn monic(&self) -> MultiPoly {
        if self.is_zero() {
            return self.clone();
        }
        self.scale(&self.leading_coefficient().recip())
    }

    /// Re-expresses the polynomial over another variable list (matched by name).
    pub fn with_vars(&self, target: &Vars) -> Result<MultiPoly, ArithError> {
        if Arc::ptr_eq(&self.vars, target) || self.vars == *target {
            return Ok(MultiPoly {
                vars: target.clone(),
                terms: self.terms.clone(),
            });
        }
        let mut map = Vec::with_capacity(self.nvars());
        for (i, v) in self.vars.iter().enumerate() {
            match target.iter().position(|t| t == v) {
                Some(j) => map.push(Some(j)),
                None => {
                    if self.depends_on(i) {
                        return Err(ArithError::UnknownVariable(v.clone()));
                    }
                    map.push(None);
                }
            }
        }
        let mut out = Self::zero(target);
        for (m, c) in &self.terms {
            let mut e = vec![0; target.len()];
            for (i, &ex) in m.0.iter().enumerate() {
                if let Some(j) = map[i] {
                    e[j] += ex;
                }
            }
            out.add_term(Monomial(e), c.clone());
        }
        Ok(out)
    }

    /// Splits into coefficients with respect to the variables at `outer`.
    ///
    /// Keys are exponent vectors over `outer` (in the given order); values are
    /// polynomials over `inner_vars`, which must name every other variable
    /// that occurs.
    pub fn split(&self, outer: &[usize], inner_vars: &Vars) -> BTreeMap<Vec<u32>, MultiPoly> {
        let inner_map: Vec<Option<usize>> = self
            .vars
            .iter()
            .map(|v| inner_vars.iter().position(|t| t == v))
            .collect();
        let mut out: BTreeMap<Vec<u32>, MultiPoly> = BTreeMap::new();
        for (m, c) in &self.terms {
            let key: Vec<u32> = outer.iter().map(|&i| m.0[i]).collect();
            let mut e = vec![0; inner_vars.len()];
            for (i, &ex) in m.0.iter().enumerate() {
                if outer.contains(&i) || ex == 0 {
                    continue;
                }
                let j = inner_map[i].expect("variable missing from inner ring");
                e[j] += ex;
            }
            out.entry(key)
                .or_insert_with(|| MultiPoly::zero(inner_vars))
                .add_term(Monomial(e), c.clone());
        }
        out.retain(|_, p| !p.is_zero());
        out
    }

    /// Largest `k` such that `(x_idx - value)^k` divides the polynomial.
    pub fn vanishing_order(&self, idx: usize, value: &Rational) -> u32 {
        if self.is_zero() {
            return u32::MAX;
        }
        // After shifting, (x - value) becomes x; count the x-adic valuation.
        self.shift(idx, value).min_degree_in(idx).unwrap_or(u32::MAX)
    }

    /// Divides by `(x_idx - value)^k`; the caller guarantees divisibility.
    pub fn deflate(&self, idx: usize, value: &Rational, k: u32) -> MultiPoly {
        if k == 0 {
            return self.clone();
        }
        let shifted = self.shift(idx, value);
        let mut q = MultiPoly::zero(&self.vars);
        for (m, c) in shifted.terms {
            let mut m2 = m;
            m2.0[idx] -= k;
            q.terms.insert(m2, c);
        }
        q.shift(idx, &-value)
    }

    /// Number of terms times the bit size of the coefficients; a rough cost.
    pub fn size(&self) -> usize {
        self.terms
            .values()
            .map(|c| (c.numer().bits() + c.denom().bits()) as usize + 1)
            .sum()
    }
}

pub(crate) fn index_of(vars: &Vars, name: &str) -> Result<usize, ArithError> {
    vars.iter()
        .position(|v| v == name)
        .ok_or_else(|| ArithError::UnknownVariable(name.to_string()))
}

pub fn rational_to_f64(c: &Rational) -> f64 {
    match (c.numer().to_f64(), c.denom().to_f64()) {
        (Some(n), Some(d)) if n.is_finite() && d.is_finite() => n / d,
        _ => {
            // Scale both down to keep the quotient finite.
            let shift = c.numer().bits().max(c.denom().bits()).saturating_sub(1000);
            let n = (c.numer() >> shift as usize).to_f64().unwrap_or(0.0);
            let d = (c.denom() >> shift as usize).to_f64().unwrap_or(1.0);
            n / d
        }
    }
}

impl<'a> Add<&'a MultiPoly> for &'a MultiPoly {
    type Output = MultiPoly;
    fn add(self, rhs: &'a MultiPoly) -> MultiPoly {
        self.check_ring(rhs);
        let (big, small) = if self.len() >= rhs.len() { (self, rhs) } else { (rhs, self) };
        let mut out = big.clone();
        for (m, c) in &small.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }
}

impl<'a> Sub<&'a MultiPoly> for &'a MultiPoly {
    type Output = MultiPoly;
    fn sub(self, rhs: &'a MultiPoly) -> MultiPoly {
        self.check_ring(rhs);
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(m.clone(), -c);
        }
        out
    }
}

impl<'a> Mul<&'a MultiPoly> for &'a MultiPoly {
    type Output = MultiPoly;
    fn mul(self, rhs: &'a MultiPoly) -> MultiPoly {
        self.check_ring(rhs);
        if self.is_zero() || rhs.is_zero() {
            return MultiPoly::zero(&self.vars);
        }
        if let Some(c) = self.constant_value() {
            return rhs.scale(&c);
        }
        if let Some(c) = rhs.constant_value() {
            return self.scale(&c);
        }
        let mut out = MultiPoly::zero(&self.vars);
        for (ma, ca) in &self.terms {
            for (mb, cb) in &rhs.terms {
                out.add_term(ma.mul(mb), ca * cb);
            }
        }
        out
    }
}

impl Neg for &MultiPoly {
    type Output = MultiPoly;
    fn neg(self) -> MultiPoly {
        MultiPoly {
            vars: self.vars.clone(),
            terms: self.terms.iter().map(|(m, c)| (m.clone(), -c)).collect(),
        }
    }
}

impl Add for MultiPoly {
    type Output = MultiPoly;
    fn add(self, rhs: MultiPoly) -> MultiPoly {
        &self + &rhs
    }
}

impl Sub for MultiPoly {
    type Output = MultiPoly;
    fn sub(self, rhs: MultiPoly) -> MultiPoly {
        &self - &rhs
    }
}

impl Mul for MultiPoly {
    type Output = MultiPoly;
    fn mul(self, rhs: MultiPoly) -> MultiPoly {
        &self * &rhs
    }
}

impl Neg for MultiPoly {
    type Output = MultiPoly;
    fn neg(self) -> MultiPoly {
        -&self
    }
}

/// Canonical text: terms in descending term order, `*` between factors,
/// rational coefficients as `p/q`.
impl fmt::Display for MultiPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        for (k, (m, c)) in self.terms.iter().rev().enumerate() {
            let neg = c.is_negative();
            let abs = c.abs();
            if k == 0 {
                if neg {
                    write!(f, "-")?;
                }
            } else if neg {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            let mono = format_monomial(&self.vars, m);
            match (mono.is_empty(), abs.is_one()) {
                (true, _) => write!(f, "{}", format_rational(&abs))?,
                (false, true) => write!(f, "{}", mono)?,
                (false, false) => write!(f, "{}*{}", format_rational(&abs), mono)?,
            }
        }
        Ok(())
    }
}

pub fn format_rational(c: &Rational) -> String {
    if c.is_integer() {
        c.numer().to_string()
    } else {
        format!("{}/{}", c.numer(), c.denom())
    }
}

fn format_monomial(vars: &Vars, m: &Monomial) -> String {
    let mut parts = Vec::new();
    for (v, &e) in vars.iter().zip(&m.0) {
        match e {
            0 => {}
            1 => parts.push(v.clone()),
            _ => parts.push(format!("{}^{}", v, e)),
        }
    }
    parts.join("*")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64) -> Rational {
        Rational::from_integer(BigInt::from(n))
    }

    #[test]
    fn difference_of_squares() {
        let v = vars(&["x"]);
        let x = MultiPoly::var(&v, "x").unwrap();
        let one = MultiPoly::one(&v);
        let p = &(&x + &one) * &(&x - &one);
        assert_eq!(p.to_string(), "x^2 - 1");
    }

    #[test]
    fn exact_division_and_remainder() {
        let v = vars(&["x"]);
        let x = MultiPoly::var(&v, "x").unwrap();
        let one = MultiPoly::one(&v);
        let a = &(&x * &x) - &one;
        let b = &x - &one;
        assert_eq!(a.exact_div(&b).unwrap().to_string(), "x + 1");
        let c = &x + &MultiPoly::from_int(&v, 2);
        assert_eq!(a.exact_div(&c), Err(ArithError::InexactDivision));
    }

    #[test]
    fn shifts() {
        let v = vars(&["n", "x"]);
        let n = MultiPoly::var(&v, "n").unwrap();
        let x = MultiPoly::var(&v, "x").unwrap();
        assert_eq!((&n * &n).shift_by("n", 1).unwrap().to_string(), "n^2 + 2*n + 1");
        assert_eq!((&x + &n).shift_by("n", 2).unwrap().to_string(), "n + x + 2");
        let nn1 = &n * &(&n - &MultiPoly::one(&v));
        assert_eq!(nn1.shift_by("n", 1).unwrap().to_string(), "n^2 + n");
    }

    #[test]
    fn grlex_order_prints_leading_first() {
        let v = vars(&["x", "y"]);
        let x = MultiPoly::var(&v, "x").unwrap();
        let y = MultiPoly::var(&v, "y").unwrap();
        let p = &(&(&y * &y) + &(&x * &y)) + &x.scale(&q(3));
        assert_eq!(p.to_string(), "x*y + y^2 + 3*x");
    }

    #[test]
    fn vanishing_order_counts_multiplicity() {
        let v = vars(&["x", "y"]);
        let x = MultiPoly::var(&v, "x").unwrap();
        let y = MultiPoly::var(&v, "y").unwrap();
        let one = MultiPoly::one(&v);
        let p = &(&x - &one).pow(3) * &(&y + &x);
        assert_eq!(p.vanishing_order(0, &q(1)), 3);
        assert_eq!(p.vanishing_order(0, &q(0)), 0);
    }

    #[test]
    fn split_by_outer_variables() {
        let v = vars(&["n", "x"]);
        let inner = vars(&["n"]);
        let n = MultiPoly::var(&v, "n").unwrap();
        let x = MultiPoly::var(&v, "x").unwrap();
        let p = &(&n * &x) + &(&x + &n);
        let parts = p.split(&[1], &inner);
        assert_eq!(parts[&vec![1]].to_string(), "n + 1");
        assert_eq!(parts[&vec![0]].to_string(), "n");
    }
}
