//! Reduced rational functions `num / den` over the rationals.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_traits::{One, Zero};

use super::gcd::gcd;
use super::poly::{MultiPoly, Vars};
use super::{ArithError, Rational};

/// A rational function kept in lowest terms: `gcd(num, den) = 1` and `den`
/// integral primitive with positive leading coefficient.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct RatFunc {
    num: MultiPoly,
    den: MultiPoly,
}

impl RatFunc {
    pub fn new(num: MultiPoly, den: MultiPoly) -> Result<Self, ArithError> {
        if den.is_zero() {
            return Err(ArithError::DivisionByZero);
        }
        Ok(Self::reduce(num, den))
    }

    pub fn from_poly(p: MultiPoly) -> Self {
        let den = MultiPoly::one(p.vars());
        RatFunc { num: p, den }
    }

    pub fn zero(vars: &Vars) -> Self {
        Self::from_poly(MultiPoly::zero(vars))
    }

    pub fn one(vars: &Vars) -> Self {
        Self::from_poly(MultiPoly::one(vars))
    }

    pub fn constant(vars: &Vars, c: Rational) -> Self {
        Self::from_poly(MultiPoly::constant(vars, c))
    }

    fn reduce(num: MultiPoly, den: MultiPoly) -> Self {
        if num.is_zero() {
            return Self::zero(num.vars());
        }
        let g = gcd(&num, &den);
        let (mut n, mut d) = if g.is_one() {
            (num, den)
        } else {
            (num.exact_div(&g).expect("gcd divides"), den.exact_div(&g).expect("gcd divides"))
        };
        let c = d.rational_content();
        if !c.is_one() {
            let inv = c.recip();
            n = n.scale(&inv);
            d = d.scale(&inv);
        }
        let r = RatFunc { num: n, den: d };
        r.debug_check();
        r
    }

    #[inline]
    fn debug_check(&self) {
        debug_assert!(!self.den.is_zero());
        debug_assert!(self.den.leading_coefficient() > Rational::zero());
    }

    pub fn num(&self) -> &MultiPoly {
        &self.num
    }

    pub fn den(&self) -> &MultiPoly {
        &self.den
    }

    pub fn into_parts(self) -> (MultiPoly, MultiPoly) {
        (self.num, self.den)
    }

    pub fn vars(&self) -> &Vars {
        self.num.vars()
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn is_polynomial(&self) -> bool {
        self.den.is_constant()
    }

    /// The polynomial value when the denominator is constant.
    pub fn as_poly(&self) -> Option<MultiPoly> {
        self.den.constant_value().map(|c| self.num.scale(&c.recip()))
    }

    pub fn recip(&self) -> Result<Self, ArithError> {
        Self::new(self.den.clone(), self.num.clone())
    }

    pub fn scale(&self, c: &Rational) -> Self {
        RatFunc {
            num: self.num.scale(c),
            den: if c.is_zero() { MultiPoly::one(self.vars()) } else { self.den.clone() },
        }
    }

    pub fn mul_poly(&self, p: &MultiPoly) -> Self {
        Self::reduce(&self.num * p, self.den.clone())
    }

    pub fn div_poly(&self, p: &MultiPoly) -> Result<Self, ArithError> {
        if p.is_zero() {
            return Err(ArithError::DivisionByZero);
        }
        Ok(Self::reduce(self.num.clone(), &self.den * p))
    }

    pub fn pow(&self, e: i32) -> Result<Self, ArithError> {
        if e >= 0 {
            // Powers of coprime polynomials stay coprime.
            Ok(RatFunc {
                num: self.num.pow(e as u32),
                den: self.den.pow(e as u32),
            })
        } else {
            self.recip()?.pow(-e)
        }
    }

    /// Quotient-rule derivative with respect to the variable at `idx`.
    pub fn derivative(&self, idx: usize) -> Self {
        let dn = self.num.derivative(idx);
        let dd = self.den.derivative(idx);
        if dd.is_zero() {
            return Self::reduce(dn, self.den.clone());
        }
        let num = &(&dn * &self.den) - &(&self.num * &dd);
        Self::reduce(num, &self.den * &self.den)
    }

    pub fn derivative_by(&self, name: &str) -> Result<Self, ArithError> {
        Ok(self.derivative(self.num.var_index(name)?))
    }

    pub fn substitute(&self, idx: usize, value: &Rational) -> Result<Self, ArithError> {
        let d = self.den.substitute(idx, value);
        if d.is_zero() {
            return Err(ArithError::BadEvaluationPoint);
        }
        Ok(Self::reduce(self.num.substitute(idx, value), d))
    }

    pub fn shift(&self, idx: usize, k: &Rational) -> Self {
        // Shifting is a ring automorphism; coprimality is preserved.
        let r = RatFunc {
            num: self.num.shift(idx, k),
            den: self.den.shift(idx, k),
        };
        let c = r.den.rational_content();
        RatFunc {
            num: r.num.scale(&c.recip()),
            den: r.den.scale(&c.recip()),
        }
    }

    pub fn eval(&self, point: &[Rational]) -> Result<Rational, ArithError> {
        let d = self.den.eval(point);
        if d.is_zero() {
            return Err(ArithError::BadEvaluationPoint);
        }
        Ok(self.num.eval(point) / d)
    }

    pub fn eval_f64(&self, point: &[f64]) -> f64 {
        self.num.eval_f64(point) / self.den.eval_f64(point)
    }

    pub fn with_vars(&self, target: &Vars) -> Result<Self, ArithError> {
        Ok(RatFunc {
            num: self.num.with_vars(target)?,
            den: self.den.with_vars(target)?,
        })
    }
}

impl<'a> Add<&'a RatFunc> for &'a RatFunc {
    type Output = RatFunc;
    fn add(self, rhs: &'a RatFunc) -> RatFunc {
        if self.is_zero() {
            return rhs.clone();
        }
        if rhs.is_zero() {
            return self.clone();
        }
        if self.den == rhs.den {
            return RatFunc::reduce(&self.num + &rhs.num, self.den.clone());
        }
        let g = gcd(&self.den, &rhs.den);
        let a = self.den.exact_div(&g).expect("gcd divides");
        let b = rhs.den.exact_div(&g).expect("gcd divides");
        let num = &(&self.num * &b) + &(&rhs.num * &a);
        RatFunc::reduce(num, &a * &rhs.den)
    }
}

impl<'a> Sub<&'a RatFunc> for &'a RatFunc {
    type Output = RatFunc;
    fn sub(self, rhs: &'a RatFunc) -> RatFunc {
        self + &(-rhs)
    }
}

impl<'a> Mul<&'a RatFunc> for &'a RatFunc {
    type Output = RatFunc;
    fn mul(self, rhs: &'a RatFunc) -> RatFunc {
        if self.is_zero() || rhs.is_zero() {
            return RatFunc::zero(self.vars());
        }
        // Cross-cancel before multiplying.
        let g1 = gcd(&self.num, &rhs.den);
        let g2 = gcd(&rhs.num, &self.den);
        let n1 = self.num.exact_div(&g1).unwrap();
        let d2 = rhs.den.exact_div(&g1).unwrap();
        let n2 = rhs.num.exact_div(&g2).unwrap();
        let d1 = self.den.exact_div(&g2).unwrap();
        let num = &n1 * &n2;
        let den = &d1 * &d2;
        let c = den.rational_content();
        let r = RatFunc {
            num: num.scale(&c.recip()),
            den: den.scale(&c.recip()),
        };
        r.debug_check();
        r
    }
}

impl<'a> Div<&'a RatFunc> for &'a RatFunc {
    type Output = Result<RatFunc, ArithError>;
    fn div(self, rhs: &'a RatFunc) -> Result<RatFunc, ArithError> {
        Ok(self * &rhs.recip()?)
    }
}

impl Neg for &RatFunc {
    type Output = RatFunc;
    fn neg(self) -> RatFunc {
        RatFunc {
            num: -&self.num,
            den: self.den.clone(),
        }
    }
}

impl fmt::Display for RatFunc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den.is_one() {
            return write!(f, "{}", self.num);
        }
        let wrap = |p: &MultiPoly| {
            if p.len() > 1 {
                format!("({})", p)
            } else {
                p.to_string()
            }
        };
        write!(f, "{}/{}", wrap(&self.num), wrap(&self.den))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::poly::vars;
    use crate::arith::int;

    #[test]
    fn derivative_of_geometric() {
        let v = vars(&["x"]);
        let x = MultiPoly::var(&v, "x").unwrap();
        let f = RatFunc::new(MultiPoly::one(&v), &MultiPoly::one(&v) - &x).unwrap();
        let d = f.derivative(0);
        let expected = RatFunc::new(MultiPoly::one(&v), (&MultiPoly::one(&v) - &x).pow(2)).unwrap();
        assert_eq!(d, expected);
    }

    #[test]
    fn derivative_of_square() {
        let v = vars(&["x"]);
        let x = MultiPoly::var(&v, "x").unwrap();
        let f = RatFunc::from_poly(&x * &x);
        assert_eq!(f.derivative(0).to_string(), "2*x");
    }

    #[test]
    fn product_rule_example() {
        // d/dh ((h-1)^2 h^2) = 2h(h-1)(2h-1)
        let v = vars(&["h"]);
        let h = MultiPoly::var(&v, "h").unwrap();
        let one = MultiPoly::one(&v);
        let f = RatFunc::from_poly(&(&h - &one).pow(2) * &h.pow(2));
        let expected = &(&h.scale(&int(2)) * &(&h - &one)) * &(&h.scale(&int(2)) - &one);
        assert_eq!(f.derivative(0), RatFunc::from_poly(expected));
    }

    #[test]
    fn sums_reduce() {
        let v = vars(&["x"]);
        let x = MultiPoly::var(&v, "x").unwrap();
        let one = MultiPoly::one(&v);
        let a = RatFunc::new(one.clone(), &x - &one).unwrap();
        let b = RatFunc::new(one.clone(), &x + &one).unwrap();
        let s = &a - &b;
        // 1/(x-1) - 1/(x+1) = 2/(x^2-1)
        assert_eq!(s.to_string(), "2/(x^2 - 1)");
        let t = &s * &RatFunc::from_poly(&x - &one);
        assert_eq!(t.to_string(), "2/(x + 1)");
    }
}
