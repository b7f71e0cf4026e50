//! Sparse rational reconstruction of parametric solutions from prime-field
//! images: Thiele interpolation variable by variable, Chinese remaindering
//! across primes and Wang's rational reconstruction of each coefficient.

use std::collections::BTreeMap;

use num_bigint::BigInt;

use super::linsys::{LinearSystem, Unknown};
use super::modular::{add_mod, crt, inv_mod, mul_mod, primes, rational_reconstruct, sub_mod, Echelon};
use super::poly::{Monomial, MultiPoly, Vars};
use super::ratfunc::RatFunc;
use super::ArithError;

/// A vector of rational functions accessible only through its values modulo
/// primes.
pub trait BlackBox: Sync {
    fn nvars(&self) -> usize;
    fn len(&self) -> usize;
    /// Per-prime evaluator; `None` when this prime is unusable.
    fn at_prime(&self, p: u64) -> Option<Box<dyn ImageAt + '_>>;
}

pub trait ImageAt: Sync {
    /// Values at `point`; `None` marks an unlucky point.
    fn eval(&self, point: &[u64]) -> Option<Vec<u64>>;
}

const MAX_PRIMES: usize = 48;
const MAX_SAMPLES: usize = 600;
const CONFIRMATIONS: usize = 2;

pub(crate) fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Deterministic pseudo-random coordinate in `[17, 2^20)` for a sampling
/// position; independent of evaluation order.
fn sample_coord(seed: u64, path: &[u64], j: u64) -> u64 {
    let mut h = splitmix(seed);
    for &x in path {
        h = splitmix(h ^ x);
    }
    h = splitmix(h ^ j);
    17 + h % ((1 << 20) - 17)
}

// Dense univariate polynomials over Z/pZ, lowest degree first.

pub(crate) fn utrim(mut a: Vec<u64>) -> Vec<u64> {
    while a.last() == Some(&0) {
        a.pop();
    }
    a
}

fn uadd(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
    let n = a.len().max(b.len());
    let out = (0..n)
        .map(|i| add_mod(*a.get(i).unwrap_or(&0), *b.get(i).unwrap_or(&0), p))
        .collect();
    utrim(out)
}

fn umul(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0u64; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        if x == 0 {
            continue;
        }
        for (j, &y) in b.iter().enumerate() {
            out[i + j] = add_mod(out[i + j], mul_mod(x, y, p), p);
        }
    }
    utrim(out)
}

pub(crate) fn uscale(a: &[u64], c: u64, p: u64) -> Vec<u64> {
    utrim(a.iter().map(|&x| mul_mod(x, c, p)).collect())
}

fn udivrem(a: &[u64], b: &[u64], p: u64) -> (Vec<u64>, Vec<u64>) {
    let mut r = a.to_vec();
    if r.len() < b.len() {
        return (Vec::new(), r);
    }
    let inv = inv_mod(*b.last().unwrap(), p);
    let mut q = vec![0u64; r.len() - b.len() + 1];
    for k in (0..q.len()).rev() {
        let c = mul_mod(r[k + b.len() - 1], inv, p);
        q[k] = c;
        if c != 0 {
            for (j, &y) in b.iter().enumerate() {
                r[k + j] = sub_mod(r[k + j], mul_mod(c, y, p), p);
            }
        }
    }
    (utrim(q), utrim(r))
}

pub(crate) fn ugcd(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
    let (mut a, mut b) = (utrim(a.to_vec()), utrim(b.to_vec()));
    while !b.is_empty() {
        let (_, r) = udivrem(&a, &b, p);
        a = b;
        b = r;
    }
    if a.is_empty() {
        return a;
    }
    let inv = inv_mod(*a.last().unwrap(), p);
    uscale(&a, inv, p)
}

/// Incremental Thiele continued-fraction interpolation of one function.
#[derive(Clone, Debug, Default)]
struct Thiele {
    z: Vec<u64>,
    a: Vec<u64>,
    confirmed: usize,
}

impl Thiele {
    fn done(&self) -> bool {
        self.confirmed >= CONFIRMATIONS
    }

    /// Value of the current interpolant; `None` at a pole.
    fn eval(&self, x: u64, p: u64) -> Option<u64> {
        let n = self.a.len();
        let (mut num, mut den) = (self.a[n - 1], 1u64);
        for k in (0..n - 1).rev() {
            // a_k + (x - z_k) / (num / den)
            let t = mul_mod(sub_mod(x, self.z[k], p), den, p);
            let new_num = add_mod(mul_mod(self.a[k], num, p), t, p);
            den = num;
            num = new_num;
        }
        if den == 0 {
            None
        } else {
            Some(mul_mod(num, inv_mod(den, p), p))
        }
    }

    fn feed(&mut self, x: u64, f: u64, p: u64) {
        if self.done() || self.z.contains(&x) {
            return;
        }
        if !self.a.is_empty() && self.eval(x, p) == Some(f) {
            self.confirmed += 1;
            return;
        }
        self.confirmed = 0;
        let mut r = f;
        for k in 0..self.a.len() {
            let d = sub_mod(r, self.a[k], p);
            if d == 0 {
                // Infinite inverse difference: the point is unusable.
                return;
            }
            r = mul_mod(sub_mod(x, self.z[k], p), inv_mod(d, p), p);
        }
        self.z.push(x);
        self.a.push(r);
    }

    /// Reduced `(num, den)` with the lowest nonzero coefficient of `den`
    /// equal to one.
    fn to_rational(&self, p: u64) -> (Vec<u64>, Vec<u64>) {
        let n = self.a.len();
        let mut num = utrim(vec![self.a[n - 1]]);
        let mut den = vec![1u64];
        for k in (0..n - 1).rev() {
            let lin = vec![p - self.z[k] % p, 1];
            let new_num = uadd(&uscale(&num, self.a[k], p), &umul(&lin, &den, p), p);
            den = num;
            num = new_num;
        }
        let g = ugcd(&num, &den, p);
        if g.len() > 1 {
            num = udivrem(&num, &g, p).0;
            den = udivrem(&den, &g, p).0;
        }
        let low = *den.iter().find(|&&c| c != 0).expect("nonzero denominator");
        let inv = inv_mod(low, p);
        (uscale(&num, inv, p), uscale(&den, inv, p))
    }
}

/// Rational function over Z/pZ with sparse numerator and denominator; the
/// grlex-smallest denominator term has coefficient one.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModRat {
    pub num: BTreeMap<Monomial, u64>,
    pub den: BTreeMap<Monomial, u64>,
}

type Shape = Vec<(Vec<Monomial>, Vec<Monomial>)>;

fn shape_of(v: &[ModRat]) -> Shape {
    v.iter()
        .map(|r| (r.num.keys().cloned().collect(), r.den.keys().cloned().collect()))
        .collect()
}

fn shape_size(s: &Shape) -> usize {
    s.iter().map(|(a, b)| a.len() + b.len()).sum()
}

enum Fail {
    Unlucky,
    Exhausted,
}

struct Level<'a> {
    img: &'a dyn ImageAt,
    p: u64,
    nvars: usize,
    seed: u64,
}

impl Level<'_> {
    /// Reconstructs the functions in the trailing `nvars - fixed.len()`
    /// variables with the leading ones fixed.
    fn solve(&self, fixed: &[u64]) -> Result<Vec<ModRat>, Fail> {
        let p = self.p;
        if fixed.len() == self.nvars {
            let vals = self.img.eval(fixed).ok_or(Fail::Unlucky)?;
            return Ok(vals
                .into_iter()
                .map(|v| {
                    let one = Monomial::one(0);
                    let mut num = BTreeMap::new();
                    if v != 0 {
                        num.insert(one.clone(), v);
                    }
                    ModRat {
                        num,
                        den: [(one, 1)].into(),
                    }
                })
                .collect());
        }
        let batch = if fixed.len() + 1 == self.nvars { crate::par::width() } else { 1 };
        let mut shape: Option<Shape> = None;
        let mut interp: Vec<(Vec<Thiele>, Vec<Thiele>)> = Vec::new();
        let mut failures = 0usize;
        let mut j = 0u64;
        loop {
            if j as usize > MAX_SAMPLES || failures > 40 {
                return Err(Fail::Exhausted);
            }
            let ys: Vec<u64> = (0..batch as u64).map(|k| sample_coord(self.seed, fixed, j + k) % p).collect();
            j += batch as u64;
            let results = crate::par::map(&ys, |&y| {
                let mut pt = fixed.to_vec();
                pt.push(y);
                self.solve(&pt)
            });
            for (y, res) in ys.into_iter().zip(results) {
                let inner = match res {
                    Ok(v) => v,
                    Err(Fail::Unlucky) => {
                        failures += 1;
                        continue;
                    }
                    Err(e) => return Err(e),
                };
                let s = shape_of(&inner);
                let better = shape.as_ref().is_none_or(|cur| shape_size(&s) > shape_size(cur));
                if better {
                    interp = s
                        .iter()
                        .map(|(n, d)| (vec![Thiele::default(); n.len()], vec![Thiele::default(); d.len()]))
                        .collect();
                    shape = Some(s);
                } else if shape.as_ref() != Some(&s) {
                    failures += 1;
                    continue;
                }
                for (r, (tn, td)) in inner.iter().zip(interp.iter_mut()) {
                    for (t, v) in tn.iter_mut().zip(r.num.values()) {
                        t.feed(y, *v, p);
                    }
                    for (t, v) in td.iter_mut().zip(r.den.values()) {
                        t.feed(y, *v, p);
                    }
                }
                if interp.iter().all(|(a, b)| a.iter().chain(b).all(Thiele::done)) {
                    return Ok(self.combine(shape.as_ref().unwrap(), &interp));
                }
            }
        }
    }

    fn combine(&self, shape: &Shape, interp: &[(Vec<Thiele>, Vec<Thiele>)]) -> Vec<ModRat> {
        let p = self.p;
        shape
            .iter()
            .zip(interp)
            .map(|((nm, dm), (tn, td))| {
                let fns: Vec<(Vec<u64>, Vec<u64>)> = tn.iter().chain(td).map(|t| t.to_rational(p)).collect();
                let mut l = vec![1u64];
                for (_, d) in &fns {
                    let g = ugcd(&l, d, p);
                    l = umul(&l, &udivrem(d, &g, p).0, p);
                }
                let polys: Vec<Vec<u64>> = fns.iter().map(|(n, d)| umul(n, &udivrem(&l, d, p).0, p)).collect();
                let mut g: Vec<u64> = Vec::new();
                for q in &polys {
                    g = ugcd(&g, q, p);
                }
                let build = |monos: &[Monomial], ps: &[Vec<u64>]| {
                    let mut out = BTreeMap::new();
                    for (m, q) in monos.iter().zip(ps) {
                        let q = if g.len() > 1 { udivrem(q, &g, p).0 } else { q.clone() };
                        for (k, &c) in q.iter().enumerate() {
                            if c != 0 {
                                let mut e = vec![k as u32];
                                e.extend_from_slice(&m.0);
                                out.insert(Monomial(e), c);
                            }
                        }
                    }
                    out
                };
                let num = build(nm, &polys[..nm.len()]);
                let mut den = build(dm, &polys[nm.len()..]);
                let inv = inv_mod(*den.values().next().expect("nonzero denominator"), p);
                for c in den.values_mut() {
                    *c = mul_mod(*c, inv, p);
                }
                let num = num.into_iter().map(|(m, c)| (m, mul_mod(c, inv, p))).collect();
                ModRat { num, den }
            })
            .collect()
    }
}

/// Reconstructs the functions modulo one prime.
pub fn reconstruct_mod(bb: &dyn BlackBox, p: u64, seed: u64) -> Option<Vec<ModRat>> {
    let img = bb.at_prime(p)?;
    let level = Level {
        img: img.as_ref(),
        p,
        nvars: bb.nvars(),
        seed: splitmix(seed ^ p),
    };
    for attempt in 0..4u64 {
        let fixed: Vec<u64> = Vec::new();
        let lv = Level {
            seed: splitmix(level.seed ^ attempt),
            ..level
        };
        match lv.solve(&fixed) {
            Ok(v) => return Some(v),
            Err(Fail::Unlucky) => continue,
            Err(Fail::Exhausted) => return None,
        }
    }
    None
}

/// Reconstructs the black box's functions over the rationals.
///
/// Primes are added until the rational reconstruction of every coefficient
/// is stable across two consecutive primes.
pub fn reconstruct(bb: &dyn BlackBox, vars: &Vars, seed: u64) -> Result<Vec<RatFunc>, ArithError> {
    let mut shape: Option<Shape> = None;
    let mut acc: Vec<BigInt> = Vec::new();
    let mut modulus = BigInt::from(1);
    let mut previous: Option<Vec<num_rational::BigRational>> = None;
    let mut used = 0;
    for &p in primes().iter().take(MAX_PRIMES) {
        let Some(img) = reconstruct_mod(bb, p, seed) else { continue };
        let s = shape_of(&img);
        let flat: Vec<u64> = img.iter().flat_map(|r| r.num.values().chain(r.den.values()).copied()).collect();
        match &shape {
            Some(cur) if *cur == s => {
                acc = acc.iter().zip(&flat).map(|(r, &x)| crt(r, &modulus, x, p)).collect();
                modulus *= BigInt::from(p);
            }
            Some(cur) if shape_size(cur) >= shape_size(&s) => continue,
            _ => {
                shape = Some(s);
                acc = flat.iter().map(|&x| BigInt::from(x)).collect();
                modulus = BigInt::from(p);
                previous = None;
            }
        }
        used += 1;
        let rr: Option<Vec<_>> = acc.iter().map(|a| rational_reconstruct(a, &modulus)).collect();
        match rr {
            Some(vals) if previous.as_ref() == Some(&vals) => {
                return Ok(assemble(shape.as_ref().unwrap(), &vals, vars));
            }
            other => previous = other,
        }
    }
    let _ = used;
    Err(ArithError::EvaluationExhausted)
}

fn assemble(shape: &Shape, vals: &[num_rational::BigRational], vars: &Vars) -> Vec<RatFunc> {
    let mut it = vals.iter();
    shape
        .iter()
        .map(|(nm, dm)| {
            let num = MultiPoly::from_terms(vars, nm.iter().map(|m| (m.clone(), it.next().unwrap().clone())));
            let den = MultiPoly::from_terms(vars, dm.iter().map(|m| (m.clone(), it.next().unwrap().clone())));
            RatFunc::new(num, den).expect("nonzero denominator")
        })
        .collect()
}

/// Black box for nullspace vectors of a parametric system, normalized like
/// [`super::linsys::nullspace`]: a one in the chosen free column and zeros in
/// the other free columns.
pub struct KernelBox<'a> {
    sys: &'a LinearSystem,
    /// Free columns whose kernel vectors are wanted, from the generic image.
    pub targets: Vec<usize>,
    pub pivots: Vec<usize>,
    seed: u64,
}

struct KernelImage<'a> {
    compiled: super::linsys::CompiledSystem,
    pivots: &'a [usize],
    targets: &'a [usize],
}

impl ImageAt for KernelImage<'_> {
    fn eval(&self, point: &[u64]) -> Option<Vec<u64>> {
        let ech = self.compiled.image(point).ok()?.into_echelon();
        if ech.pivots != self.pivots {
            return None;
        }
        Some(kernel_values(&ech, self.targets))
    }
}

fn kernel_values(ech: &Echelon, targets: &[usize]) -> Vec<u64> {
    let mut out = Vec::with_capacity(targets.len() * ech.cols);
    for &f in targets {
        out.extend(ech.kernel_vector(f));
    }
    out
}

impl<'a> KernelBox<'a> {
    /// Determines the generic pivot structure from a few random images and
    /// keeps the free columns accepted by `want`.
    pub fn new(sys: &'a LinearSystem, seed: u64, want: impl Fn(&Unknown) -> bool) -> Result<Self, ArithError> {
        let ech = generic_echelon(sys, seed)?;
        let targets = ech.free_columns().into_iter().filter(|&c| want(&sys.unknowns()[c])).collect();
        Ok(KernelBox {
            sys,
            targets,
            pivots: ech.pivots,
            seed,
        })
    }

    pub fn solve(&self) -> Result<Vec<Vec<RatFunc>>, ArithError> {
        if self.targets.is_empty() {
            return Ok(Vec::new());
        }
        let flat = reconstruct(self, self.sys.params(), self.seed)?;
        Ok(flat.chunks(self.sys.ncols()).map(|c| c.to_vec()).collect())
    }
}

impl BlackBox for KernelBox<'_> {
    fn nvars(&self) -> usize {
        self.sys.params().len()
    }

    fn len(&self) -> usize {
        self.targets.len() * self.sys.ncols()
    }

    fn at_prime(&self, p: u64) -> Option<Box<dyn ImageAt + '_>> {
        let compiled = self.sys.compile(p).ok()?;
        Some(Box::new(KernelImage {
            compiled,
            pivots: &self.pivots,
            targets: &self.targets,
        }))
    }
}

/// Echelon form at the most generic of a few random images: maximal rank,
/// then lexicographically smallest pivot list.
pub fn generic_echelon(sys: &LinearSystem, seed: u64) -> Result<Echelon, ArithError> {
    let ps = primes();
    let mut best: Option<Echelon> = None;
    let mut good = 0;
    for attempt in 0..super::linsys::EVALUATION_RETRIES as u64 {
        if good == 2 {
            break;
        }
        let p = ps[(attempt as usize) % 4];
        let Ok(compiled) = sys.compile(p) else { continue };
        let point: Vec<u64> = (0..sys.params().len() as u64).map(|i| sample_coord(seed, &[attempt], i)).collect();
        let Ok(m) = compiled.image(&point) else { continue };
        let e = m.into_echelon();
        good += 1;
        let replace = match &best {
            None => true,
            Some(b) => e.rank() > b.rank() || (e.rank() == b.rank() && e.pivots < b.pivots),
        };
        if replace {
            best = Some(e);
        }
    }
    best.ok_or(ArithError::EvaluationExhausted)
}

/// Nullspace basis by modular images and rational reconstruction; agrees
/// with [`super::linsys::nullspace`] vector for vector.
pub fn parametric_nullspace(sys: &LinearSystem, seed: u64) -> Result<Vec<Vec<RatFunc>>, ArithError> {
    KernelBox::new(sys, seed, |_| true)?.solve()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::linsys::nullspace;
    use crate::arith::poly::vars;
    use crate::arith::rat;

    #[test]
    fn thiele_recovers_univariate_function() {
        let p = primes()[0];
        // f(z) = (z^2 + 3) / (2 z + 5)
        let f = |z: u64| {
            let n = add_mod(mul_mod(z, z, p), 3, p);
            let d = add_mod(mul_mod(2, z, p), 5, p);
            mul_mod(n, inv_mod(d, p), p)
        };
        let mut t = Thiele::default();
        let mut z = 100;
        while !t.done() {
            t.feed(z, f(z), p);
            z += 7;
        }
        let (n, d) = t.to_rational(p);
        let inv5 = inv_mod(5, p);
        assert_eq!(d, vec![1, mul_mod(2, inv5, p)]);
        assert_eq!(n, vec![mul_mod(3, inv5, p), 0, inv5]);
    }

    struct Fixed(Vec<RatFunc>);

    struct FixedAt<'a>(&'a [RatFunc], u64);

    impl ImageAt for FixedAt<'_> {
        fn eval(&self, point: &[u64]) -> Option<Vec<u64>> {
            let names = self.0[0].vars().clone();
            let a: BTreeMap<String, i64> = names.iter().cloned().zip(point.iter().map(|&x| x as i64)).collect();
            self.0.iter().map(|f| super::super::modular::eval_mod(f, &a, self.1).ok()).collect()
        }
    }

    impl BlackBox for Fixed {
        fn nvars(&self) -> usize {
            self.0[0].vars().len()
        }
        fn len(&self) -> usize {
            self.0.len()
        }
        fn at_prime(&self, p: u64) -> Option<Box<dyn ImageAt + '_>> {
            Some(Box::new(FixedAt(&self.0, p)))
        }
    }

    #[test]
    fn bivariate_reconstruction() {
        let v = vars(&["ep", "x"]);
        let e = MultiPoly::var(&v, "ep").unwrap();
        let x = MultiPoly::var(&v, "x").unwrap();
        let one = MultiPoly::one(&v);
        let f1 = RatFunc::new(
            (&(&e * &x).scale(&rat(7, 3)) - &one).pow(2),
            &(&x + &e.scale(&rat(1, 2))) * &(&one - &x),
        )
        .unwrap();
        let f2 = RatFunc::from_poly(&e.pow(3) + &x.scale(&rat(-5, 11)));
        let f3 = RatFunc::zero(&v);
        let want = vec![f1, f2, f3];
        let got = reconstruct(&Fixed(want.clone()), &v, 3).unwrap();
        assert_eq!(got, want);
    }

    #[test]
    fn modular_route_matches_exact_nullspace() {
        let v = vars(&["n"]);
        let n = RatFunc::from_poly(MultiPoly::var(&v, "n").unwrap());
        let c = |k: i64| RatFunc::constant(&v, crate::arith::int(k));
        let rows = vec![
            vec![n.clone(), c(1), &n * &n, c(0), c(3)],
            vec![c(1), &n + &c(1), c(2), n.scale(&rat(1, 2)), c(0)],
            vec![c(0), c(2), &n - &c(4), c(1), &n * &c(-1)],
        ];
        let sys = LinearSystem::from_dense(v.clone(), rows);
        assert_eq!(parametric_nullspace(&sys, 11).unwrap(), nullspace(&sys));
    }
}
