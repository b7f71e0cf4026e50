//! Homogeneous linear systems with rational-function entries, their exact
//! nullspace by fraction-free elimination, and modular rank estimates.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::gcd::{gcd, lcm};
use super::modular::{inv_mod, mul_mod, power_table, primes, ModPoly, PrimeFieldMatrix};
use super::poly::{MultiPoly, Vars};
use super::ratfunc::RatFunc;
use super::{rat_gcd, ArithError, Rational};

/// What a column of the system stands for.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Unknown {
    /// Telescoper coefficient `e_i`.
    Tele(usize),
    /// Coefficient of the monomial `x^monomial` in the ansatz polynomial of
    /// integration variable `var`.
    Ansatz { var: usize, monomial: Vec<u32> },
    /// Anything else, e.g. columns of hand-built systems.
    Plain(usize),
}

/// Sparse homogeneous system; every row is a list of `(column, entry)`
/// sorted by column with nonzero entries.
#[derive(Clone, Debug)]
pub struct LinearSystem {
    params: Vars,
    unknowns: Vec<Unknown>,
    rows: Vec<Vec<(usize, RatFunc)>>,
}

pub const EVALUATION_RETRIES: usize = 8;

impl LinearSystem {
    pub fn new(params: Vars, unknowns: Vec<Unknown>) -> Self {
        LinearSystem {
            params,
            unknowns,
            rows: Vec::new(),
        }
    }

    pub fn from_dense(params: Vars, rows: Vec<Vec<RatFunc>>) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut sys = Self::new(params, (0..cols).map(Unknown::Plain).collect());
        for r in rows {
            sys.push_row(r.into_iter().enumerate().collect());
        }
        sys
    }

    pub fn push_row(&mut self, mut row: Vec<(usize, RatFunc)>) {
        row.retain(|(_, v)| !v.is_zero());
        row.sort_by_key(|(c, _)| *c);
        debug_assert!(row.windows(2).all(|w| w[0].0 < w[1].0));
        debug_assert!(row.iter().all(|(c, _)| *c < self.unknowns.len()));
        if !row.is_empty() {
            self.rows.push(row);
        }
    }

    pub fn params(&self) -> &Vars {
        &self.params
    }

    pub fn unknowns(&self) -> &[Unknown] {
        &self.unknowns
    }

    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    pub fn ncols(&self) -> usize {
        self.unknowns.len()
    }

    pub fn rows(&self) -> &[Vec<(usize, RatFunc)>] {
        &self.rows
    }

    /// Keeps only the given columns (in the given order) and the rows touching
    /// them. Rows are dropped whole, so callers should pass a union of
    /// connected components.
    pub fn restrict(&self, keep: &[usize]) -> LinearSystem {
        let mut map = vec![usize::MAX; self.ncols()];
        for (new, &old) in keep.iter().enumerate() {
            map[old] = new;
        }
        let mut out = LinearSystem::new(self.params.clone(), keep.iter().map(|&c| self.unknowns[c].clone()).collect());
        for row in &self.rows {
            if row.iter().any(|(c, _)| map[*c] != usize::MAX) {
                let r = row
                    .iter()
                    .filter(|(c, _)| map[*c] != usize::MAX)
                    .map(|(c, v)| (map[*c], v.clone()))
                    .collect();
                out.push_row(r);
            }
        }
        out
    }

    /// Columns connected (through shared rows) to any column in `seeds`.
    pub fn component_of(&self, seeds: &[usize]) -> Vec<usize> {
        let n = self.ncols();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for row in &self.rows {
            let first = row[0].0;
            for (c, _) in &row[1..] {
                let (a, b) = (find(&mut parent, first), find(&mut parent, *c));
                if a != b {
                    parent[a] = b;
                }
            }
        }
        let roots: Vec<usize> = seeds.iter().map(|&s| find(&mut parent, s)).collect();
        (0..n).filter(|&c| roots.contains(&find(&mut parent, c))).collect()
    }

    /// Reduces all entries modulo `p`. Fails when `p` divides a coefficient
    /// denominator.
    pub fn compile(&self, p: u64) -> Result<CompiledSystem, ArithError> {
        let mut rows = Vec::with_capacity(self.rows.len());
        let mut max_e = 0;
        for row in &self.rows {
            let mut r = Vec::with_capacity(row.len());
            for (c, v) in row {
                let num = ModPoly::new(v.num(), p)?;
                let den = if v.den().is_one() { None } else { Some(ModPoly::new(v.den(), p)?) };
                max_e = max_e.max(num.max_exponent());
                if let Some(d) = &den {
                    max_e = max_e.max(d.max_exponent());
                }
                r.push((*c, num, den));
            }
            rows.push(r);
        }
        Ok(CompiledSystem {
            p,
            cols: self.ncols(),
            max_e,
            rows,
        })
    }
}

/// A system reduced modulo one prime, ready for repeated evaluation.
#[derive(Clone, Debug)]
pub struct CompiledSystem {
    p: u64,
    cols: usize,
    max_e: u32,
    rows: Vec<Vec<(usize, ModPoly, Option<ModPoly>)>>,
}

impl CompiledSystem {
    pub fn prime(&self) -> u64 {
        self.p
    }

    /// Image of the matrix at `point` (residues of the parameters).
    pub fn image(&self, point: &[u64]) -> Result<PrimeFieldMatrix, ArithError> {
        let p = self.p;
        let powers = power_table(point, self.max_e, p);
        let rows: Vec<Result<Vec<u64>, ArithError>> = crate::par::map(&self.rows, |row| {
            let mut dense = vec![0u64; self.cols];
            for (c, num, den) in row {
                let n = num.eval_with(&powers, p);
                dense[*c] = match den {
                    None => n,
                    Some(d) => {
                        let dv = d.eval_with(&powers, p);
                        if dv == 0 {
                            return Err(ArithError::BadEvaluationPoint);
                        }
                        mul_mod(n, inv_mod(dv, p), p)
                    }
                };
            }
            Ok(dense)
        });
        let rows = rows.into_iter().collect::<Result<Vec<_>, _>>()?;
        Ok(PrimeFieldMatrix::from_rows(rows, self.cols, p))
    }
}

/// Random evaluation point with coordinates in `[17, 2^20)`.
pub fn random_point(rng: &mut impl Rng, n: usize) -> Vec<u64> {
    (0..n).map(|_| rng.gen_range(17u64..(1 << 20))).collect()
}

/// Rank and corank of the system's image at a pseudo-random point determined
/// by `seed`.
pub fn modular_rank(sys: &LinearSystem, seed: u64) -> Result<(usize, usize), ArithError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ps = primes();
    for attempt in 0..EVALUATION_RETRIES {
        let p = ps[(seed as usize + attempt) % 8];
        let point = random_point(&mut rng, sys.params().len());
        let Ok(compiled) = sys.compile(p) else { continue };
        match compiled.image(&point) {
            Ok(m) => {
                let r = m.rank();
                return Ok((r, sys.ncols() - r));
            }
            Err(ArithError::BadEvaluationPoint) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(ArithError::EvaluationExhausted)
}

/// Nullspace basis over the parameter field by fraction-free elimination.
///
/// Rows are kept polynomial and primitive; every elimination step
/// cross-multiplies and strips the row content. The basis has one vector per
/// free column, with a one in that column and zeros in the other free columns.
pub fn nullspace(sys: &LinearSystem) -> Vec<Vec<RatFunc>> {
    let params = sys.params().clone();
    let cols = sys.ncols();
    let mut pending: Vec<BTreeMap<usize, MultiPoly>> = sys.rows().iter().map(|r| clear_row(r, &params)).collect();
    let mut done: Vec<(usize, BTreeMap<usize, MultiPoly>)> = Vec::new();
    for col in 0..cols {
        let best = pending
            .iter()
            .enumerate()
            .filter(|(_, r)| r.contains_key(&col))
            .min_by_key(|(_, r)| r.values().map(|p| p.size()).sum::<usize>())
            .map(|(i, _)| i);
        let Some(bi) = best else { continue };
        let prow = pending.swap_remove(bi);
        let pv = prow[&col].clone();
        let eliminate = |r: &mut BTreeMap<usize, MultiPoly>| {
            let Some(a) = r.get(&col).cloned() else { return };
            let g = gcd(&pv, &a);
            let (mp, ma) = (pv.exact_div(&g).unwrap(), a.exact_div(&g).unwrap());
            let mut out = BTreeMap::new();
            let keys: std::collections::BTreeSet<usize> = r.keys().chain(prow.keys()).copied().collect();
            for k in keys {
                let lhs = r.get(&k).map(|x| x * &mp);
                let rhs = prow.get(&k).map(|x| x * &ma);
                let v = match (lhs, rhs) {
                    (Some(l), Some(rr)) => &l - &rr,
                    (Some(l), None) => l,
                    (None, Some(rr)) => -rr,
                    (None, None) => unreachable!(),
                };
                if !v.is_zero() {
                    out.insert(k, v);
                }
            }
            *r = make_primitive(out);
        };
        crate::par::for_each_mut(&mut pending, eliminate);
        for (_, r) in done.iter_mut() {
            eliminate(r);
        }
        pending.retain(|r| !r.is_empty());
        done.push((col, prow));
    }
    let pivots: Vec<usize> = done.iter().map(|(c, _)| *c).collect();
    let free: Vec<usize> = (0..cols).filter(|c| !pivots.contains(c)).collect();
    free.iter()
        .map(|&f| {
            let mut v = vec![RatFunc::zero(&params); cols];
            v[f] = RatFunc::one(&params);
            for (pc, row) in &done {
                if let Some(x) = row.get(&f) {
                    v[*pc] = RatFunc::new(-x, row[pc].clone()).expect("pivot is nonzero");
                }
            }
            v
        })
        .collect()
}

fn clear_row(row: &[(usize, RatFunc)], params: &Vars) -> BTreeMap<usize, MultiPoly> {
    let mut l = MultiPoly::one(params);
    for (_, v) in row {
        if !v.den().is_one() {
            l = lcm(&l, v.den());
        }
    }
    let out = row
        .iter()
        .map(|(c, v)| (*c, v.num() * &l.exact_div(v.den()).expect("lcm is a multiple")))
        .collect();
    make_primitive(out)
}

fn make_primitive(row: BTreeMap<usize, MultiPoly>) -> BTreeMap<usize, MultiPoly> {
    let mut g: Option<MultiPoly> = None;
    for v in row.values() {
        g = Some(match g {
            None => v.primitive(),
            Some(g) => gcd(&g, v),
        });
        if g.as_ref().is_some_and(|g| g.is_constant()) {
            break;
        }
    }
    let Some(g) = g else { return row };
    let row: BTreeMap<usize, MultiPoly> = if g.is_constant() {
        row
    } else {
        row.into_iter().map(|(k, v)| (k, v.exact_div(&g).expect("content divides"))).collect()
    };
    // Strip the rational content as well so integers stay small.
    let mut c: Option<Rational> = None;
    for v in row.values() {
        let vc = v.rational_content();
        c = Some(match c {
            None => vc,
            Some(c) => rat_gcd(&c, &vc),
        });
    }
    let inv = c.unwrap().recip();
    row.into_iter().map(|(k, v)| (k, v.scale(&inv))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::poly::vars;
    use crate::arith::{int, rat};

    fn c(v: &Vars, x: i64) -> RatFunc {
        RatFunc::constant(v, int(x))
    }

    #[test]
    fn simple_kernels() {
        let v = vars::<&str>(&[]);
        let sys = LinearSystem::from_dense(v.clone(), vec![vec![c(&v, 1), c(&v, 1)]]);
        assert_eq!(nullspace(&sys), vec![vec![c(&v, -1), c(&v, 1)]]);
        let id = LinearSystem::from_dense(v.clone(), vec![vec![c(&v, 1), c(&v, 0)], vec![c(&v, 0), c(&v, 1)]]);
        assert!(nullspace(&id).is_empty());
    }

    #[test]
    fn parametric_kernel() {
        // e_0 n - e_1 = 0 has kernel (1, n).
        let v = vars(&["n"]);
        let n = RatFunc::from_poly(MultiPoly::var(&v, "n").unwrap());
        let sys = LinearSystem::from_dense(v.clone(), vec![vec![n.clone(), c(&v, -1)]]);
        let ker = nullspace(&sys);
        assert_eq!(ker.len(), 1);
        let k = &ker[0];
        let ratio = (&k[1] / &k[0]).unwrap();
        assert_eq!(ratio, n);
    }

    #[test]
    fn kernel_annihilates() {
        let v = vars(&["x"]);
        let x = RatFunc::from_poly(MultiPoly::var(&v, "x").unwrap());
        let one = c(&v, 1);
        let rows = vec![
            vec![x.clone(), one.clone(), (&x * &x), c(&v, 0)],
            vec![one.clone(), (&x + &one), c(&v, 2), x.scale(&rat(1, 2))],
        ];
        let sys = LinearSystem::from_dense(v.clone(), rows.clone());
        let ker = nullspace(&sys);
        assert_eq!(ker.len(), 2);
        for k in &ker {
            for r in &rows {
                let mut acc = RatFunc::zero(&v);
                for (a, b) in r.iter().zip(k) {
                    acc = &acc + &(a * b);
                }
                assert!(acc.is_zero());
            }
        }
    }

    #[test]
    fn modular_rank_examples() {
        let v = vars::<&str>(&[]);
        let id = LinearSystem::from_dense(
            v.clone(),
            (0..3).map(|i| (0..3).map(|j| c(&v, (i == j) as i64)).collect()).collect(),
        );
        assert_eq!(modular_rank(&id, 7).unwrap(), (3, 0));
        let zero = LinearSystem::from_dense(v.clone(), vec![vec![c(&v, 0); 4]; 2]);
        assert_eq!(modular_rank(&zero, 7).unwrap(), (0, 4));
    }
}
