//! Prime-field images: word-sized primes, modular evaluation and reduced row
//! echelon forms of matrices over `Z/pZ`.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, ToPrimitive, Zero};

use super::poly::MultiPoly;
use super::ratfunc::RatFunc;
use super::{ArithError, Rational};

/// Primes below 2^31, largest first. Products of two residues fit in a `u64`.
pub fn primes() -> &'static [u64] {
    static PRIMES: OnceLock<Vec<u64>> = OnceLock::new();
    PRIMES.get_or_init(|| {
        let mut out = Vec::with_capacity(64);
        let mut c: u64 = (1 << 31) - 1;
        while out.len() < 64 {
            if is_prime(c) {
                out.push(c);
            }
            c -= 2;
        }
        out
    })
}

fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

#[inline]
pub fn mul_mod(a: u64, b: u64, p: u64) -> u64 {
    (a * b) % p
}

#[inline]
pub fn add_mod(a: u64, b: u64, p: u64) -> u64 {
    let s = a + b;
    if s >= p {
        s - p
    } else {
        s
    }
}

#[inline]
pub fn sub_mod(a: u64, b: u64, p: u64) -> u64 {
    if a >= b {
        a - b
    } else {
        a + p - b
    }
}

pub fn pow_mod(mut a: u64, mut e: u64, p: u64) -> u64 {
    let mut r = 1 % p;
    a %= p;
    while e > 0 {
        if e & 1 == 1 {
            r = mul_mod(r, a, p);
        }
        a = mul_mod(a, a, p);
        e >>= 1;
    }
    r
}

/// Inverse of a nonzero residue.
pub fn inv_mod(a: u64, p: u64) -> u64 {
    debug_assert!(a % p != 0);
    let (mut t, mut new_t) = (0i64, 1i64);
    let (mut r, mut new_r) = (p as i64, (a % p) as i64);
    while new_r != 0 {
        let q = r / new_r;
        (t, new_t) = (new_t, t - q * new_t);
        (r, new_r) = (new_r, r - q * new_r);
    }
    if t < 0 {
        t += p as i64;
    }
    t as u64
}

pub fn int_mod(n: &BigInt, p: u64) -> u64 {
    let r = n.mod_floor(&BigInt::from(p));
    r.to_u64().unwrap()
}

pub fn signed_mod(n: i64, p: u64) -> u64 {
    n.rem_euclid(p as i64) as u64
}

/// Image of a rational number; `None` when `p` divides the denominator.
pub fn rational_mod(c: &Rational, p: u64) -> Option<u64> {
    let d = int_mod(c.denom(), p);
    if d == 0 {
        return None;
    }
    Some(mul_mod(int_mod(c.numer(), p), inv_mod(d, p), p))
}

/// A polynomial with coefficients reduced modulo one prime, ready for fast
/// repeated evaluation.
#[derive(Clone, Debug)]
pub struct ModPoly {
    terms: Vec<(Vec<u32>, u64)>,
}

impl ModPoly {
    pub fn new(poly: &MultiPoly, p: u64) -> Result<Self, ArithError> {
        let mut terms = Vec::with_capacity(poly.len());
        for (m, c) in poly.terms() {
            let r = rational_mod(c, p).ok_or(ArithError::BadEvaluationPoint)?;
            if r != 0 {
                terms.push((m.0.clone(), r));
            }
        }
        Ok(ModPoly { terms })
    }

    /// Evaluates using precomputed powers: `powers[v][e] = point[v]^e`.
    pub fn eval_with(&self, powers: &[Vec<u64>], p: u64) -> u64 {
        let mut acc = 0u64;
        for (m, c) in &self.terms {
            let mut t = *c;
            for (v, &e) in m.iter().enumerate() {
                if e > 0 {
                    t = mul_mod(t, powers[v][e as usize], p);
                }
            }
            acc = add_mod(acc, t, p);
        }
        acc
    }

    pub fn eval(&self, point: &[u64], p: u64) -> u64 {
        let max_e = self.terms.iter().flat_map(|(m, _)| m.iter().copied()).max().unwrap_or(0);
        let powers = power_table(point, max_e, p);
        self.eval_with(&powers, p)
    }

    pub fn max_exponent(&self) -> u32 {
        self.terms.iter().flat_map(|(m, _)| m.iter().copied()).max().unwrap_or(0)
    }
}

pub fn power_table(point: &[u64], max_e: u32, p: u64) -> Vec<Vec<u64>> {
    point
        .iter()
        .map(|&x| {
            let mut row = Vec::with_capacity(max_e as usize + 1);
            let mut acc = 1 % p;
            for _ in 0..=max_e {
                row.push(acc);
                acc = mul_mod(acc, x, p);
            }
            row
        })
        .collect()
}

/// Evaluates `f` at an integer assignment modulo `p`.
///
/// Variables missing from the assignment are an error; the denominator must
/// not vanish modulo `p` at the point.
pub fn eval_mod(f: &RatFunc, assignment: &BTreeMap<String, i64>, p: u64) -> Result<u64, ArithError> {
    let mut point = Vec::with_capacity(f.vars().len());
    for (i, v) in f.vars().iter().enumerate() {
        match assignment.get(v) {
            Some(&x) => point.push(signed_mod(x, p)),
            None if !f.num().depends_on(i) && !f.den().depends_on(i) => point.push(0),
            None => return Err(ArithError::UnknownVariable(v.clone())),
        }
    }
    let num = ModPoly::new(f.num(), p)?.eval(&point, p);
    let den = ModPoly::new(f.den(), p)?.eval(&point, p);
    if den == 0 {
        return Err(ArithError::BadEvaluationPoint);
    }
    Ok(mul_mod(num, inv_mod(den, p), p))
}

/// Dense matrix over `Z/pZ`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PrimeFieldMatrix {
    p: u64,
    rows: usize,
    cols: usize,
    data: Vec<Vec<u64>>,
}

/// Result of reducing a matrix to reduced row echelon form.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Echelon {
    /// Pivot column of each nonzero row, increasing.
    pub pivots: Vec<usize>,
    /// Reduced rows aligned with `pivots`; pivot entries are one.
    pub rows: Vec<Vec<u64>>,
    pub cols: usize,
    pub p: u64,
}

impl PrimeFieldMatrix {
    pub fn zeros(rows: usize, cols: usize, p: u64) -> Self {
        PrimeFieldMatrix {
            p,
            rows,
            cols,
            data: vec![vec![0; cols]; rows],
        }
    }

    pub fn from_rows(rows: Vec<Vec<u64>>, cols: usize, p: u64) -> Self {
        debug_assert!(rows.iter().all(|r| r.len() == cols && r.iter().all(|&x| x < p)));
        PrimeFieldMatrix {
            p,
            rows: rows.len(),
            cols,
            data: rows,
        }
    }

    pub fn identity(n: usize, p: u64) -> Self {
        let mut m = Self::zeros(n, n, p);
        for i in 0..n {
            m.data[i][i] = 1 % p;
        }
        m
    }

    pub fn prime(&self) -> u64 {
        self.p
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn set(&mut self, r: usize, c: usize, v: u64) {
        self.data[r][c] = v % self.p;
    }

    pub fn get(&self, r: usize, c: usize) -> u64 {
        self.data[r][c]
    }

    pub fn rank(&self) -> usize {
        self.clone().into_echelon().pivots.len()
    }

    /// Gauss-Jordan elimination in column order. Pivot rows are chosen by
    /// sparsity, which changes the cost but not the (unique) result.
    pub fn into_echelon(self) -> Echelon {
        let p = self.p;
        let cols = self.cols;
        let mut pending: Vec<Vec<u64>> = self.data.into_iter().filter(|r| r.iter().any(|&x| x != 0)).collect();
        let mut done: Vec<Vec<u64>> = Vec::new();
        let mut pivots: Vec<usize> = Vec::new();
        for col in 0..cols {
            if pending.is_empty() {
                break;
            }
            let mut best: Option<(usize, usize)> = None;
            for (i, r) in pending.iter().enumerate() {
                if r[col] != 0 {
                    let nnz = r[col..].iter().filter(|&&x| x != 0).count();
                    if best.is_none_or(|(_, b)| nnz < b) {
                        best = Some((i, nnz));
                    }
                }
            }
            let Some((bi, _)) = best else { continue };
            let mut prow = pending.swap_remove(bi);
            let inv = inv_mod(prow[col], p);
            let nz: Vec<usize> = (col..cols).filter(|&j| prow[j] != 0).collect();
            for &j in &nz {
                prow[j] = mul_mod(prow[j], inv, p);
            }
            let eliminate = |r: &mut Vec<u64>| {
                let f = r[col];
                if f == 0 {
                    return;
                }
                let f = p - f;
                for &j in &nz {
                    r[j] = (r[j] + f * prow[j]) % p;
                }
            };
            crate::par::for_each_mut(&mut pending, eliminate);
            crate::par::for_each_mut(&mut done, eliminate);
            pending.retain(|r| r.iter().any(|&x| x != 0));
            done.push(prow);
            pivots.push(col);
        }
        Echelon {
            pivots,
            rows: done,
            cols,
            p,
        }
    }
}

impl Echelon {
    pub fn rank(&self) -> usize {
        self.pivots.len()
    }

    pub fn free_columns(&self) -> Vec<usize> {
        let mut is_pivot = vec![false; self.cols];
        for &c in &self.pivots {
            is_pivot[c] = true;
        }
        (0..self.cols).filter(|&c| !is_pivot[c]).collect()
    }

    /// Kernel vector with a one at the free column `free` and zeros at the
    /// other free columns.
    pub fn kernel_vector(&self, free: usize) -> Vec<u64> {
        let mut v = vec![0u64; self.cols];
        v[free] = 1;
        for (row, &pc) in self.rows.iter().zip(&self.pivots) {
            let x = row[free];
            if x != 0 {
                v[pc] = self.p - x;
            }
        }
        v
    }
}

/// Symmetric residue in `(-p/2, p/2]` as a signed integer.
pub fn symmetric(a: u64, p: u64) -> i64 {
    if a > p / 2 {
        a as i64 - p as i64
    } else {
        a as i64
    }
}

/// Chinese remaindering of `(r1 mod m1)` and `(r2 mod p)`; returns the residue
/// modulo `m1 * p` in `[0, m1 * p)`.
pub fn crt(r1: &BigInt, m1: &BigInt, r2: u64, p: u64) -> BigInt {
    let r1p = int_mod(r1, p);
    let m1p = int_mod(m1, p);
    let t = mul_mod(sub_mod(r2, r1p, p), inv_mod(m1p, p), p);
    let out = r1 + m1 * BigInt::from(t);
    debug_assert!(!out.is_negative());
    out
}

/// Wang's rational reconstruction: the unique `n/d` with `|n|, d <= sqrt(m/2)`
/// congruent to `a` modulo `m`, if any.
pub fn rational_reconstruct(a: &BigInt, m: &BigInt) -> Option<Rational> {
    let bound = (m / BigInt::from(2)).sqrt();
    let (mut r0, mut r1) = (m.clone(), a.mod_floor(m));
    let (mut t0, mut t1) = (BigInt::zero(), BigInt::from(1));
    while r1 > bound {
        let q = &r0 / &r1;
        let r2 = &r0 - &q * &r1;
        let t2 = &t0 - &q * &t1;
        r0 = r1;
        r1 = r2;
        t0 = t1;
        t1 = t2;
    }
    if t1.is_zero() || t1.abs() > bound {
        return None;
    }
    if r1.gcd(&t1) != BigInt::from(1) {
        return None;
    }
    Some(Rational::new(r1, t1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::poly::vars;
    use crate::arith::rat;

    #[test]
    fn primes_are_prime_and_below_2_31() {
        let ps = primes();
        assert_eq!(ps.len(), 64);
        assert_eq!(ps[0], 2147483647);
        assert!(ps.iter().all(|&p| p < (1 << 31) && is_prime(p)));
    }

    #[test]
    fn eval_mod_examples() {
        let v = vars(&["x"]);
        let x = MultiPoly::var(&v, "x").unwrap();
        let one = MultiPoly::one(&v);
        let f = RatFunc::new(&x + &one, &x - &one).unwrap();
        let a: BTreeMap<String, i64> = [("x".to_string(), 3)].into();
        assert_eq!(eval_mod(&f, &a, 101).unwrap(), 2);
        let g = RatFunc::from_poly(&x * &x);
        let a: BTreeMap<String, i64> = [("x".to_string(), 10)].into();
        assert_eq!(eval_mod(&g, &a, 7).unwrap(), 2);
        let h = RatFunc::new(one.clone(), &x - &MultiPoly::from_int(&v, 5)).unwrap();
        let a: BTreeMap<String, i64> = [("x".to_string(), 5)].into();
        assert_eq!(eval_mod(&h, &a, 13), Err(ArithError::BadEvaluationPoint));
    }

    #[test]
    fn echelon_rank_and_kernel() {
        let p = 101;
        assert_eq!(PrimeFieldMatrix::identity(3, p).rank(), 3);
        assert_eq!(PrimeFieldMatrix::zeros(2, 4, p).rank(), 0);
        // x + y = 0 -> kernel (1, -1) with y free.
        let m = PrimeFieldMatrix::from_rows(vec![vec![1, 1]], 2, p);
        let e = m.into_echelon();
        assert_eq!(e.free_columns(), vec![1]);
        assert_eq!(e.kernel_vector(1), vec![p - 1, 1]);
    }

    #[test]
    fn crt_and_reconstruction() {
        let ps = primes();
        let target = rat(-7, 216);
        let mut r = BigInt::from(rational_mod(&target, ps[0]).unwrap());
        let mut m = BigInt::from(ps[0]);
        for &p in &ps[1..3] {
            r = crt(&r, &m, rational_mod(&target, p).unwrap(), p);
            m *= BigInt::from(p);
        }
        assert_eq!(rational_reconstruct(&r, &m), Some(target));
    }
}
