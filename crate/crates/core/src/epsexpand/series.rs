//! Truncated series: Laurent series in ε, and power series in the parameter.

use std::fmt;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::arith::{int, MultiPoly, RatFunc, Rational};
use crate::{Error, Result};

/// `Σ_{k=lo}^{prec} c_k ε^k`, exact through `ε^prec`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EpsSeries {
    pub lo: i64,
    pub coeffs: Vec<Rational>,
}

impl EpsSeries {
    /// Zero, known exactly through `ε^prec`.
    pub fn zero(prec: i64) -> Self {
        EpsSeries { lo: prec + 1, coeffs: Vec::new() }
    }

    pub fn constant(c: Rational, prec: i64) -> Self {
        EpsSeries::from_dense(&[c], prec)
    }

    /// Exact coefficients `c_lo, c_lo+1, …`; precision is padded to `lo + len - 1`.
    pub fn from_coeffs(lo: i64, coeffs: Vec<Rational>) -> Self {
        EpsSeries { lo, coeffs }
    }

    /// Polynomial in ε, given by its dense coefficients.
    pub fn from_dense(c: &[Rational], prec: i64) -> Self {
        let n = (prec + 1).max(0) as usize;
        let mut v: Vec<Rational> = c.iter().take(n).cloned().collect();
        v.resize(n, Rational::zero());
        if prec < 0 {
            return EpsSeries::zero(prec);
        }
        EpsSeries { lo: 0, coeffs: v }
    }

    pub fn prec(&self) -> i64 {
        self.lo + self.coeffs.len() as i64 - 1
    }

    /// Coefficient of `ε^k`; zero below `lo`.
    pub fn coeff(&self, k: i64) -> Rational {
        debug_assert!(k <= self.prec(), "ε^{} beyond precision {}", k, self.prec());
        if k < self.lo || k > self.prec() {
            Rational::zero()
        } else {
            self.coeffs[(k - self.lo) as usize].clone()
        }
    }

    /// Index of the first nonzero coefficient.
    pub fn valuation(&self) -> Option<i64> {
        self.coeffs.iter().position(|c| !c.is_zero()).map(|i| self.lo + i as i64)
    }

    fn val_or_prec(&self) -> i64 {
        self.valuation().unwrap_or(self.prec() + 1)
    }

    pub fn is_zero(&self) -> bool {
        self.valuation().is_none()
    }

    /// Drops terms above `ε^prec`.
    pub fn truncate(&self, prec: i64) -> Self {
        let p = prec.min(self.prec());
        if p < self.lo {
            return EpsSeries::zero(p);
        }
        EpsSeries { lo: self.lo, coeffs: self.coeffs[..(p - self.lo + 1) as usize].to_vec() }
    }

    fn build(lo: i64, prec: i64, f: impl Fn(i64) -> Rational) -> Self {
        if prec < lo {
            return EpsSeries::zero(prec);
        }
        EpsSeries { lo, coeffs: (lo..=prec).map(f).collect() }
    }

    pub fn add(&self, o: &EpsSeries) -> EpsSeries {
        let prec = self.prec().min(o.prec());
        EpsSeries::build(self.lo.min(o.lo), prec, |k| self.coeff(k) + o.coeff(k))
    }

    pub fn sub(&self, o: &EpsSeries) -> EpsSeries {
        self.add(&o.neg())
    }

    pub fn neg(&self) -> EpsSeries {
        EpsSeries { lo: self.lo, coeffs: self.coeffs.iter().map(|c| -c).collect() }
    }

    pub fn scale(&self, c: &Rational) -> EpsSeries {
        EpsSeries { lo: self.lo, coeffs: self.coeffs.iter().map(|x| x * c).collect() }
    }

    /// Multiplication by `ε^k`.
    pub fn shift(&self, k: i64) -> EpsSeries {
        EpsSeries { lo: self.lo + k, coeffs: self.coeffs.clone() }
    }

    pub fn mul(&self, o: &EpsSeries) -> EpsSeries {
        let (va, vb) = (self.val_or_prec(), o.val_or_prec());
        let prec = (self.prec() + vb).min(o.prec() + va);
        EpsSeries::build(va + vb, prec, |k| {
            let mut s = Rational::zero();
            for i in va..=(k - vb) {
                if i > self.prec() {
                    break;
                }
                let c = self.coeff(i);
                if !c.is_zero() {
                    s += c * o.coeff(k - i);
                }
            }
            s
        })
    }

    pub fn inv(&self) -> Result<EpsSeries> {
        let v = self
            .valuation()
            .ok_or_else(|| Error::Numeric("division by a series that is zero to the known order".into()))?;
        let prec = self.prec() - 2 * v;
        let a0 = self.coeff(v);
        let mut b: Vec<Rational> = Vec::new();
        for m in 0..=(prec + v).max(-1) {
            if -v + m > prec {
                break;
            }
            let mut s = if m == 0 { Rational::one() } else { Rational::zero() };
            for j in 1..=m {
                s -= self.coeff(v + j) * &b[(m - j) as usize];
            }
            b.push(s / &a0);
        }
        Ok(EpsSeries { lo: -v, coeffs: b }.truncate(prec))
    }

    pub fn div(&self, o: &EpsSeries) -> Result<EpsSeries> {
        Ok(self.mul(&o.inv()?))
    }

    /// Integer power; negative powers need a nonzero series.
    pub fn powi(&self, e: i64) -> Result<EpsSeries> {
        let base = if e < 0 { self.inv()? } else { self.clone() };
        if e == 0 {
            return Ok(EpsSeries::constant(Rational::one(), base.prec() - base.val_or_prec()));
        }
        let mut acc = base.clone();
        for _ in 1..e.abs() {
            acc = acc.mul(&base);
        }
        Ok(acc)
    }

    /// `exp(g)` for `g` with `g(0) = 0` and no negative powers.
    pub fn exp(&self) -> Result<EpsSeries> {
        if self.lo < 0 && self.coeffs.iter().take((-self.lo) as usize).any(|c| !c.is_zero()) {
            return Err(Error::Numeric("exp of a series with a pole in ep".into()));
        }
        if self.prec() >= 0 && !self.coeff(0).is_zero() {
            return Err(Error::Numeric("exp of a series with a nonzero constant term".into()));
        }
        let prec = self.prec();
        // f' = g' f  =>  m f_m = Σ_{j=1}^m j g_j f_{m-j}
        let mut f = vec![Rational::one()];
        for m in 1..=prec.max(0) {
            let mut s = Rational::zero();
            for j in 1..=m {
                s += int(j) * self.coeff(j) * &f[(m - j) as usize];
            }
            f.push(s / int(m));
        }
        Ok(EpsSeries { lo: 0, coeffs: f }.truncate(prec))
    }

    /// `log(u)` for `u` with `u(0) = 1` and no negative powers.
    pub fn log(&self) -> Result<EpsSeries> {
        if self.valuation() != Some(0) || !self.coeff(0).is_one() {
            return Err(Error::Numeric("log of a series whose constant term is not 1".into()));
        }
        let prec = self.prec();
        // u L' = u'  =>  m L_m = m u_m - Σ_{j=1}^{m-1} j L_j u_{m-j}
        let mut l = vec![Rational::zero()];
        for m in 1..=prec {
            let mut s = int(m) * self.coeff(m);
            for j in 1..m {
                s -= int(j) * &l[j as usize] * self.coeff(m - j);
            }
            l.push(s / int(m));
        }
        Ok(EpsSeries { lo: 0, coeffs: l })
    }

    /// Expansion of a rational function of ε alone.
    pub fn from_ratfunc(f: &RatFunc, idx: usize, prec: i64) -> Result<EpsSeries> {
        let num = univariate(f.num(), idx)?;
        let den = univariate(f.den(), idx)?;
        let vd = den.iter().position(|c| !c.is_zero()).unwrap_or(0) as i64;
        let work = prec + 2 * vd;
        let n = EpsSeries::from_dense(&num, work);
        let d = EpsSeries::from_dense(&den, work);
        Ok(n.div(&d)?.truncate(prec))
    }
}

/// Dense coefficients of a polynomial that depends on the variable `idx` only.
pub fn univariate(p: &MultiPoly, idx: usize) -> Result<Vec<Rational>> {
    let mut out: Vec<Rational> = Vec::new();
    for (m, c) in p.terms() {
        if m.0.iter().enumerate().any(|(i, &e)| i != idx && e != 0) {
            return Err(Error::Input(format!("{} depends on more than one variable", p)));
        }
        let e = m.0[idx] as usize;
        if out.len() <= e {
            out.resize(e + 1, Rational::zero());
        }
        out[e] = c.clone();
    }
    Ok(out)
}

/// `Σ_{j=start}^{start+M} c_j x^j`, exact through `x^{start+M}`. In discrete
/// mode the same layout holds a value table: `coeffs[i]` is the value at
/// `n = start + i`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeriesInX {
    pub start: i64,
    #[serde(with = "rational_vec")]
    pub coeffs: Vec<Rational>,
}

impl SeriesInX {
    pub fn new(start: i64, coeffs: Vec<Rational>) -> Self {
        SeriesInX { start, coeffs }
    }

    /// Zero through `x^prec`.
    pub fn zero(start: i64, prec: i64) -> Self {
        SeriesInX { start, coeffs: vec![Rational::zero(); (prec - start + 1).max(0) as usize] }
    }

    /// Truncation order `M`: number of coefficients minus one.
    pub fn order(&self) -> i64 {
        self.coeffs.len() as i64 - 1
    }

    pub fn prec(&self) -> i64 {
        self.start + self.order()
    }

    pub fn coeff(&self, j: i64) -> Rational {
        if j < self.start || j > self.prec() {
            Rational::zero()
        } else {
            self.coeffs[(j - self.start) as usize].clone()
        }
    }

    pub fn truncate(&self, prec: i64) -> Self {
        let p = prec.min(self.prec());
        SeriesInX { start: self.start, coeffs: self.coeffs[..(p - self.start + 1).max(0) as usize].to_vec() }
    }

    pub fn derivative(&self) -> Self {
        let coeffs = self.coeffs.iter().enumerate().map(|(i, c)| c * int(self.start + i as i64)).collect();
        SeriesInX { start: self.start - 1, coeffs }
    }

    pub fn add(&self, o: &SeriesInX) -> Self {
        let start = self.start.min(o.start);
        let prec = self.prec().min(o.prec());
        SeriesInX { start, coeffs: (start..=prec).map(|j| self.coeff(j) + o.coeff(j)).collect() }
    }

    pub fn scale(&self, c: &Rational) -> Self {
        SeriesInX { start: self.start, coeffs: self.coeffs.iter().map(|x| x * c).collect() }
    }

    /// Product with a polynomial given by dense coefficients.
    pub fn mul_poly(&self, a: &[Rational]) -> Self {
        let mut coeffs = vec![Rational::zero(); self.coeffs.len()];
        for (m, am) in a.iter().enumerate() {
            if am.is_zero() {
                continue;
            }
            for i in 0..self.coeffs.len().saturating_sub(m) {
                coeffs[i + m] += am * &self.coeffs[i];
            }
        }
        SeriesInX { start: self.start, coeffs }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }

    pub fn first_nonzero(&self) -> Option<i64> {
        self.coeffs.iter().position(|c| !c.is_zero()).map(|i| self.start + i as i64)
    }

    pub fn eval_f64(&self, x: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| crate::arith::poly::rational_to_f64(c) * x.powi((self.start + i as i64) as i32))
            .sum()
    }
}

impl fmt::Display for SeriesInX {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (i, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let j = self.start + i as i64;
            let mag = crate::arith::poly::format_rational(&c.abs());
            let sign = if c.is_negative() { "-" } else { "+" };
            if first {
                if c.is_negative() {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {} ", sign)?;
            }
            first = false;
            match j {
                0 => write!(f, "{}", mag)?,
                _ => {
                    if !c.abs().is_one() {
                        write!(f, "{}*", mag)?;
                    }
                    if j == 1 {
                        write!(f, "x")?
                    } else {
                        write!(f, "x^{}", j)?
                    }
                }
            }
        }
        if first {
            write!(f, "0")?;
        }
        write!(f, " + O(x^{})", self.prec() + 1)
    }
}

mod rational_vec {
    use super::Rational;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[Rational], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|c| c.to_string()).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Rational>, D::Error> {
        let v: Vec<String> = Vec::deserialize(d)?;
        v.iter().map(|s| s.parse::<Rational>().map_err(serde::de::Error::custom)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::{rat, vars};

    fn ser(lo: i64, c: &[i64]) -> EpsSeries {
        EpsSeries::from_coeffs(lo, c.iter().map(|&x| int(x)).collect())
    }

    #[test]
    fn inverse_of_geometric() {
        // 1/(1 - ε) = Σ ε^k
        let s = ser(0, &[1, -1, 0, 0, 0]).inv().unwrap();
        assert_eq!(s, ser(0, &[1, 1, 1, 1, 1]));
        // 1/(ε + ε^2) = ε^{-1} - 1 + ε - …, precision drops by 2v
        let s = ser(0, &[0, 1, 1, 0, 0]).inv().unwrap();
        assert_eq!(s.lo, -1);
        assert_eq!(s.prec(), 2);
        assert_eq!(s.coeffs, vec![int(1), int(-1), int(1), int(-1)]);
    }

    #[test]
    fn exp_log_round_trip() {
        let g = ser(0, &[0, 1, 2, -3, 5]);
        let e = g.exp().unwrap();
        // exp(ε) = 1 + ε + ε²/2 + …
        let e1 = ser(0, &[0, 1, 0, 0, 0]).exp().unwrap();
        assert_eq!(e1.coeffs, vec![int(1), int(1), rat(1, 2), rat(1, 6), rat(1, 24)]);
        assert_eq!(e.log().unwrap(), g);
    }

    #[test]
    fn ratfunc_expansion() {
        let v = vars(&["ep"]);
        let e = MultiPoly::var_at(&v, 0);
        // 1/(ε(2+ε)) = 1/(2ε) - 1/4 + ε/8 - …
        let f = RatFunc::new(MultiPoly::one(&v), &e * &(&e + &MultiPoly::from_int(&v, 2))).unwrap();
        let s = EpsSeries::from_ratfunc(&f, 0, 1).unwrap();
        assert_eq!(s.lo, -1);
        assert_eq!(s.coeffs, vec![rat(1, 2), rat(-1, 4), rat(1, 8)]);
    }

    #[test]
    fn x_series_ops() {
        let s = SeriesInX::new(0, vec![int(1), int(2), int(3)]);
        assert_eq!(s.derivative(), SeriesInX::new(-1, vec![int(0), int(2), int(6)]));
        assert_eq!(s.mul_poly(&[int(0), int(1)]).coeffs, vec![int(0), int(1), int(2)]);
        assert_eq!(s.to_string(), "1 + 2*x + 3*x^2 + O(x^3)");
    }
}
