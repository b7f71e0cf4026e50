//! Order-by-order solution of ε-dependent equations.

use std::collections::BTreeMap;

use num_traits::{One, Zero};

use super::series::{EpsSeries, SeriesInX};
use crate::arith::{int, MultiPoly, Rational};
use crate::{Error, Result};

/// `Σ_k a_k(ε, x) D_x^k I = rhs`, with `I = Σ_{j ≥ t} ε^j I_j(x)`.
/// Coefficients live in a two-variable ring `[ep, x]`.
#[derive(Clone, Debug)]
pub struct ParamODE {
    pub t: i64,
    pub coeffs: Vec<MultiPoly>,
    /// ε-order ↦ series; missing orders are zero.
    pub rhs: BTreeMap<i64, SeriesInX>,
}

impl ParamODE {
    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// `a[k][m][j]`: coefficient of `ε^m x^j` in `a_k`.
    fn graded(&self) -> Vec<Vec<Vec<Rational>>> {
        self.coeffs
            .iter()
            .map(|a| {
                let mut out: Vec<Vec<Rational>> = Vec::new();
                for (mono, c) in a.terms() {
                    let (m, j) = (mono.0[0] as usize, mono.0[1] as usize);
                    if out.len() <= m {
                        out.resize(m + 1, Vec::new());
                    }
                    if out[m].len() <= j {
                        out[m].resize(j + 1, Rational::zero());
                    }
                    out[m][j] = c.clone();
                }
                out
            })
            .collect()
    }

    /// Smallest ε-power over all coefficients.
    pub fn eps_valuation(&self) -> Option<u32> {
        self.coeffs.iter().filter_map(|a| a.min_degree_in(0)).min()
    }

    /// Divides the equation by `ε^v` so that the ε⁰ part is nonzero.
    pub fn rescaled(&self) -> ParamODE {
        let v = self.eps_valuation().unwrap_or(0);
        if v == 0 {
            return self.clone();
        }
        let vars = self.coeffs[0].vars().clone();
        let coeffs = self
            .coeffs
            .iter()
            .map(|a| MultiPoly::from_terms(&vars, a.terms().map(|(m, c)| {
                let mut m = m.clone();
                m.0[0] -= v;
                (m, c.clone())
            })))
            .collect();
        let rhs = self.rhs.iter().map(|(k, s)| (k - v as i64, s.clone())).collect();
        ParamODE { t: self.t, coeffs, rhs }
    }

    /// Precision lost per ε-order when lower orders feed the right-hand side.
    pub fn precision_loss(&self) -> i64 {
        let g = self.graded();
        let dmin = match delta_min(&g.iter().map(|a| a.first().cloned().unwrap_or_default()).collect::<Vec<_>>()) {
            Some(d) => d,
            None => return 0,
        };
        let imax = g
            .iter()
            .enumerate()
            .filter(|(_, a)| a.iter().skip(1).any(|row| row.iter().any(|c| !c.is_zero())))
            .map(|(i, _)| i as i64)
            .max();
        imax.map_or(0, |i| (i + dmin).max(0))
    }
}

/// One order of the hierarchy: `Σ_k a_k(x) D^k I_j = rhs`.
#[derive(Clone, Debug)]
pub struct Constraint {
    pub a: Vec<Vec<Rational>>,
    /// `None` means exactly zero.
    pub rhs: Option<SeriesInX>,
}

/// Constraint for the ε-order `t + solved_below.len()`, given the lower
/// orders already solved.
pub fn eps_constraints(ode: &ParamODE, solved_below: &[SeriesInX]) -> Result<Constraint> {
    let g = ode.graded();
    let a0: Vec<Vec<Rational>> = g.iter().map(|a| a.first().cloned().unwrap_or_default()).collect();
    if a0.iter().all(|row| row.iter().all(|c| c.is_zero())) {
        return Err(Error::RescaleRequired);
    }
    let k = ode.t + solved_below.len() as i64;
    let mut rhs = ode.rhs.get(&k).cloned();
    for (i, a) in g.iter().enumerate() {
        for (m, row) in a.iter().enumerate().skip(1) {
            if row.iter().all(|c| c.is_zero()) || (m as i64) > solved_below.len() as i64 {
                continue;
            }
            let mut d = solved_below[solved_below.len() - m].clone();
            for _ in 0..i {
                d = d.derivative();
            }
            let term = d.mul_poly(row).scale(&-Rational::one());
            rhs = Some(match rhs {
                Some(r) => r.add(&term),
                None => term,
            });
        }
    }
    Ok(Constraint { a: a0, rhs })
}

fn delta_min(a: &[Vec<Rational>]) -> Option<i64> {
    let mut best: Option<i64> = None;
    for (i, row) in a.iter().enumerate() {
        for (m, c) in row.iter().enumerate() {
            if !c.is_zero() {
                let d = m as i64 - i as i64;
                best = Some(best.map_or(d, |b: i64| b.min(d)));
            }
        }
    }
    best
}

/// `j (j-1) … (j-i+1)`.
fn falling(j: i64, i: usize) -> Rational {
    (0..i as i64).fold(Rational::one(), |acc, k| acc * int(j - k))
}

/// Value at `j` of the polynomial multiplying `x^{j+δ}` in `L(x^j)`.
fn shift_coeff(a: &[Vec<Rational>], delta: i64, j: i64) -> Rational {
    let mut s = Rational::zero();
    for (i, row) in a.iter().enumerate() {
        let m = delta + i as i64;
        if m >= 0 && (m as usize) < row.len() && !row[m as usize].is_zero() {
            s += &row[m as usize] * falling(j, i);
        }
    }
    s
}

impl Constraint {
    /// Lowest shift `m - k` over the nonzero terms `x^m D^k`.
    pub fn delta_min(&self) -> i64 {
        delta_min(&self.a).unwrap_or(0)
    }

    /// Integer roots `j ≥ lo` of the indicial polynomial, up to `hi`.
    pub fn integer_roots(&self, lo: i64, hi: i64) -> Vec<i64> {
        let dmin = match delta_min(&self.a) {
            Some(d) => d,
            None => return Vec::new(),
        };
        (lo..=hi).filter(|&j| shift_coeff(&self.a, dmin, j).is_zero()).collect()
    }
}

/// Power-series solution through `x^{s+m}`, where `s = init.start`.
/// `init` seeds the leading coefficients; seeds at non-root positions are
/// checked against the recurrence.
pub fn series_solve(c: &Constraint, init: &SeriesInX, m: usize) -> Result<SeriesInX> {
    let dmin = delta_min(&c.a).ok_or(Error::RescaleRequired)?;
    let dmax = c.a.iter().enumerate().flat_map(|(i, row)| {
        row.iter().enumerate().filter(|(_, x)| !x.is_zero()).map(move |(mm, _)| mm as i64 - i as i64)
    }).max().unwrap_or(dmin);
    let s = init.start;
    let g = |n: i64| -> Result<Rational> {
        match &c.rhs {
            None => Ok(Rational::zero()),
            Some(r) if n > r.prec() => Err(Error::Input(format!(
                "right-hand side known only through x^{}, x^{} needed",
                r.prec(),
                n
            ))),
            Some(r) => Ok(r.coeff(n)),
        }
    };
    // Equations below the first unknown involve no unknowns.
    if let Some(r) = &c.rhs {
        for n in r.start..(s + dmin).min(r.prec() + 1) {
            if !r.coeff(n).is_zero() {
                return Err(Error::SingularObstruction(format!(
                    "the right-hand side has a term x^{} that a series starting at x^{} cannot produce",
                    n, s
                )));
            }
        }
    }
    let mut f: Vec<Rational> = Vec::with_capacity(m + 1);
    for idx in 0..=m as i64 {
        let j = s + idx;
        let n = j + dmin;
        let mut resid = g(n)?;
        for delta in (dmin + 1)..=dmax {
            let jj = n - delta;
            if jj < s {
                continue;
            }
            let cd = shift_coeff(&c.a, delta, jj);
            if !cd.is_zero() {
                resid -= cd * &f[(jj - s) as usize];
            }
        }
        let q = shift_coeff(&c.a, dmin, j);
        let seed = if (idx as usize) < init.coeffs.len() { Some(&init.coeffs[idx as usize]) } else { None };
        let value = if q.is_zero() {
            if !resid.is_zero() {
                return Err(Error::SingularObstruction(format!(
                    "indicial root at x^{} with a nonzero right-hand side (logarithmic solution)",
                    j
                )));
            }
            match seed {
                Some(v) => v.clone(),
                None => {
                    return Err(Error::UnderdeterminedInit(format!("coefficient of x^{} is free", j)));
                }
            }
        } else {
            let v = resid / q;
            if let Some(sv) = seed {
                if *sv != v {
                    if idx == 0 && v.is_zero() {
                        return Err(Error::SingularObstruction(format!(
                            "x^{} is not an indicial root; the leading exponent is not an integer",
                            j
                        )));
                    }
                    return Err(Error::InconsistentInit(format!(
                        "coefficient of x^{}: given {}, forced {}",
                        j, sv, v
                    )));
                }
            }
            v
        };
        f.push(value);
    }
    Ok(SeriesInX::new(s, f))
}

/// Unrolls `Σ_i e_i(ε, n) I(n+i) = rhs(n)` from `init` (values at
/// `n0, n0+1, …`) through `n0 + count - 1`. Given values beyond the first `L`
/// are checked against the recurrence where its leading coefficient is
/// nonzero. Coefficients live in `[ep, n]`.
pub fn unroll(
    e: &[MultiPoly],
    rhs: &dyn Fn(i64) -> Result<EpsSeries>,
    init: &[EpsSeries],
    n0: i64,
    count: usize,
) -> Result<Vec<EpsSeries>> {
    let l = e.len() - 1;
    if init.len() < l.min(count) {
        return Err(Error::UnderdeterminedInit(format!("{} initial values needed, {} given", l, init.len())));
    }
    let mut vals: Vec<EpsSeries> = init.iter().take(l).cloned().collect();
    for idx in l..count.max(init.len()) {
        let n = n0 + (idx - l) as i64;
        let prec = vals.iter().map(|v| v.prec()).min().unwrap_or(0) + 4;
        let at = |p: &MultiPoly| -> Result<EpsSeries> {
            let q = p.substitute(1, &int(n));
            let dense = super::series::univariate(&q, 0)?;
            Ok(EpsSeries::from_dense(&dense, prec + dense.len() as i64))
        };
        let lead = at(&e[l])?;
        let given = init.get(idx);
        if lead.is_zero() {
            match given {
                Some(g) => {
                    vals.push(g.clone());
                    continue;
                }
                None => {
                    return Err(Error::UnderdeterminedInit(format!(
                        "leading coefficient vanishes at n = {}; the value at n = {} is free",
                        n,
                        n + l as i64
                    )))
                }
            }
        }
        let mut acc = rhs(n)?;
        for i in 0..l {
            let ci = at(&e[i])?;
            if !ci.is_zero() {
                acc = acc.sub(&ci.mul(&vals[idx - l + i]));
            }
        }
        let v = acc.div(&lead)?;
        if let Some(g) = given {
            let p = v.prec().min(g.prec());
            if !v.truncate(p).sub(&g.truncate(p)).is_zero() {
                return Err(Error::InconsistentInit(format!(
                    "value at n = {} does not satisfy the recurrence",
                    n + l as i64
                )));
            }
            vals.push(g.clone());
        } else {
            vals.push(v);
        }
    }
    vals.truncate(count);
    Ok(vals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::{rat, vars};

    fn ode(coeffs: &[&str]) -> ParamODE {
        let v = vars(&["ep", "x"]);
        let coeffs = coeffs.iter().map(|s| crate::parse::parse_poly(s, &v).unwrap()).collect();
        ParamODE { t: 0, coeffs, rhs: BTreeMap::new() }
    }

    #[test]
    fn exponential_from_its_equation() {
        // f' = f, f(0) = 1
        let o = ode(&["-1", "1"]);
        let c = eps_constraints(&o, &[]).unwrap();
        let f = series_solve(&c, &SeriesInX::new(0, vec![int(1)]), 5).unwrap();
        let expect: Vec<Rational> = [1, 1, 2, 6, 24, 120].iter().map(|&k| rat(1, k)).collect();
        assert_eq!(f.coeffs, expect);
    }

    #[test]
    fn regular_singular_zero_solution() {
        // x f' + 2 f = 0 with a zero leading seed
        let o = ode(&["2", "x"]);
        let c = eps_constraints(&o, &[]).unwrap();
        let f = series_solve(&c, &SeriesInX::new(0, vec![int(0)]), 4).unwrap();
        assert!(f.is_zero() && f.order() == 4);
    }

    #[test]
    fn half_integer_exponent_is_an_obstruction() {
        // 2x f' + f = 0 has the solution x^{-1/2}
        let o = ode(&["1", "2*x"]);
        let c = eps_constraints(&o, &[]).unwrap();
        let r = series_solve(&c, &SeriesInX::new(0, vec![int(1)]), 3);
        assert!(matches!(r, Err(Error::SingularObstruction(_))), "{:?}", r);
    }

    #[test]
    fn missing_seed_at_root() {
        // x f' - 2 f = 0: x^2 is free
        let o = ode(&["-2", "x"]);
        let c = eps_constraints(&o, &[]).unwrap();
        assert_eq!(c.integer_roots(0, 10), vec![2]);
        let r = series_solve(&c, &SeriesInX::new(0, vec![int(0)]), 3);
        assert!(matches!(r, Err(Error::UnderdeterminedInit(_))));
        let f = series_solve(&c, &SeriesInX::new(0, vec![int(0), int(0), int(3)]), 3).unwrap();
        assert_eq!(f.coeffs, vec![int(0), int(0), int(3), int(0)]);
        let r = series_solve(&c, &SeriesInX::new(0, vec![int(1)]), 3);
        assert!(matches!(r, Err(Error::InconsistentInit(_)) | Err(Error::SingularObstruction(_))));
    }

    #[test]
    fn eps_hierarchy() {
        // f' = (1 + ε) f, f = e^{(1+ε)x}; ε¹ part is x e^x.
        let o = ode(&["-1 - ep", "1"]);
        let c0 = eps_constraints(&o, &[]).unwrap();
        let f0 = series_solve(&c0, &SeriesInX::new(0, vec![int(1)]), 6).unwrap();
        let c1 = eps_constraints(&o, &[f0.clone()]).unwrap();
        let f1 = series_solve(&c1, &SeriesInX::new(0, vec![int(0)]), 5).unwrap();
        let expect: Vec<Rational> = (0..6).map(|j| if j == 0 { int(0) } else { rat(1, (1..j).product::<i64>().max(1)) }).collect();
        assert_eq!(f1.coeffs, expect);
        assert!(matches!(eps_constraints(&ode(&["ep", "ep*x"]), &[]), Err(Error::RescaleRequired)));
    }

    #[test]
    fn unroll_harmonic_toy() {
        // (n + 2 + ε) I(n+1) = (n + 1 + ε) I(n), I(0) = 1/(1+ε)
        let v = vars(&["ep", "n"]);
        let e: Vec<MultiPoly> =
            ["-n - 1 - ep", "n + 2 + ep"].iter().map(|s| crate::parse::parse_poly(s, &v).unwrap()).collect();
        let i0 = EpsSeries::from_coeffs(0, vec![int(1), int(-1), int(1), int(-1)]);
        let zero = |_n: i64| Ok(EpsSeries::zero(10));
        let vals = unroll(&e, &zero, &[i0], 0, 6).unwrap();
        for (n, v) in vals.iter().enumerate() {
            let n1 = int(n as i64 + 1);
            assert_eq!(v.coeff(0), n1.recip());
            assert_eq!(v.coeff(1), -(&n1 * &n1).recip());
            assert!(v.prec() >= 1);
        }
    }
}
