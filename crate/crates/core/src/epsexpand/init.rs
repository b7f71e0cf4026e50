//! Initial values: user-supplied seeds, exact moments of Beta-type integrals,
//! and ε-expansions of 0-dimensional base values.

use std::collections::BTreeMap;

use num_traits::{One, Signed, Zero};

use super::series::{univariate, EpsSeries, SeriesInX};
use crate::arith::{int, MultiPoly, RatFunc, Rational};
use crate::hyperterm::{Exponent, HyperTerm, Mode, EPS_IDX, PARAM_IDX};
use crate::{Error, Result};

/// Source of leading coefficients for the integral at a node of the
/// recursion tree. Continuous mode: Taylor coefficients of the integral in the
/// parameter, from `start` upward. Discrete mode: values at `n = start, …`.
pub trait InitProvider: Sync {
    /// Seeds for ε-orders `eps.0..=eps.1` (more orders may be returned, e.g.
    /// poles below `eps.0`), through position `upto`.
    fn seeds(&self, term: &HyperTerm, path: &[usize], eps: (i64, i64), upto: i64) -> Result<BTreeMap<i64, SeriesInX>>;
}

/// Exact initial values for integrands that reduce, at the expansion point,
/// to products of endpoint factors `(x_j - l_j)^μ (u_j - x_j)^ν` over a
/// finite box (Beta integrals with rational-in-ε values).
#[derive(Clone, Copy, Debug, Default)]
pub struct MomentInit;

/// Seeds given for the root; other nodes fall back to [`MomentInit`].
#[derive(Clone, Debug, Default)]
pub struct GivenInit {
    pub root: BTreeMap<i64, SeriesInX>,
}

impl InitProvider for GivenInit {
    fn seeds(&self, term: &HyperTerm, path: &[usize], eps: (i64, i64), upto: i64) -> Result<BTreeMap<i64, SeriesInX>> {
        if !path.is_empty() || self.root.is_empty() {
            return MomentInit.seeds(term, path, eps, upto);
        }
        for k in eps.0..=eps.1 {
            if !self.root.contains_key(&k) {
                return Err(Error::UnderdeterminedInit(format!("no initial values for ep^{}", k)));
            }
        }
        Ok(self.root.clone())
    }
}

impl InitProvider for MomentInit {
    fn seeds(&self, term: &HyperTerm, _path: &[usize], eps: (i64, i64), upto: i64) -> Result<BTreeMap<i64, SeriesInX>> {
        let (start, vals): (i64, Vec<EpsSeries>) = match term.mode {
            Mode::Continuous => {
                let (s, regular) = split_pole(term)?;
                (s, taylor_moments(&regular, (upto - s).max(0) as usize, eps.1)?)
            }
            Mode::Discrete => {
                (0, (0..=upto.max(0)).map(|n| discrete_moment(term, n, eps.1)).collect::<Result<_>>()?)
            }
        };
        let lo = vals.iter().map(|v| v.valuation().unwrap_or(eps.0)).min().unwrap_or(eps.0).min(eps.0);
        let mut out = BTreeMap::new();
        for k in lo..=eps.1 {
            out.insert(k, SeriesInX::new(start, vals.iter().map(|v| v.coeff(k)).collect()));
        }
        Ok(out)
    }
}

/// Runs `f` with growing working precision until the result is exact
/// through `ε^prec`.
pub(crate) fn with_precision(prec: i64, f: impl Fn(i64) -> Result<EpsSeries>) -> Result<EpsSeries> {
    let mut pad = 2;
    loop {
        let r = f(prec + pad)?;
        if r.prec() >= prec {
            return Ok(r.truncate(prec));
        }
        if pad > 64 {
            return Err(Error::Numeric(format!("ε-expansion lost precision (exact only through ep^{})", r.prec())));
        }
        pad *= 2;
    }
}

fn factorial(k: usize) -> Rational {
    (1..=k as i64).fold(Rational::one(), |a, i| a * int(i))
}

/// `F = x^s F̃` where every factor of `F̃` is nonzero at `x = 0` as a
/// polynomial in the other variables (`x` the parameter).
fn split_pole(term: &HyperTerm) -> Result<(i64, HyperTerm)> {
    let x = PARAM_IDX;
    let zero = Rational::zero();
    let mut out = term.clone();
    let kp = term.p.min_degree_in(x).unwrap_or(0);
    out.p = term.p.deflate(x, &zero, kp);
    let mut s = int(kp as i64);
    for (base, e) in out.powers.iter_mut() {
        let k = base.min_degree_in(x).unwrap_or(0);
        if k == 0 {
            continue;
        }
        let c = e.scale(&int(k as i64));
        if !c.c_eps.is_zero() || !c.c0.is_integer() {
            return Err(unsupported(term, "non-integer power of the parameter"));
        }
        s += c.c0;
        *base = base.deflate(x, &zero, k);
    }
    if !term.a.is_zero() && term.b.substitute(x, &zero).is_zero() {
        return Err(unsupported(term, "essential singularity at the expansion point"));
    }
    let s: i64 = s.to_integer().try_into().map_err(|_| Error::Numeric("exponent too large".into()))?;
    Ok((s, out.normalized()?))
}

/// `(1/i!) ∫ ∂^i F |_{param=0}` for `i = 0..=k`.
fn taylor_moments(term: &HyperTerm, k: usize, prec: i64) -> Result<Vec<EpsSeries>> {
    let zero = Rational::zero();
    let at0 = |p: &MultiPoly| p.substitute(PARAM_IDX, &zero);
    if !term.a.is_zero() && !at0(&term.a).is_zero() {
        return Err(unsupported(term, "exponential factor does not vanish at the expansion point"));
    }
    // ∂^i F = c_i H̄ with H̄ = e^{a/b} Π S^α / (b^{2K} Π_shifted^K).
    let c = term.hbar_all(k);
    let mut factors: Vec<(MultiPoly, Exponent)> = term.powers.iter().map(|(s, e)| (at0(s), e.clone())).collect();
    if !term.b.is_constant() {
        factors.push((at0(&term.b), Exponent::constant(int(-2 * k as i64))));
    }
    for (i, (s, _)) in term.powers.iter().enumerate() {
        if term.is_shifted(i) {
            factors.push((at0(s), Exponent::constant(int(-(k as i64)))));
        }
    }
    c.iter()
        .enumerate()
        .map(|(i, ci)| {
            let v = beta_integral(term, &at0(ci), &factors, prec)?;
            Ok(v.scale(&factorial(i).recip()))
        })
        .collect()
}

fn discrete_moment(term: &HyperTerm, n: i64, prec: i64) -> Result<EpsSeries> {
    if !term.a.is_zero() {
        return Err(unsupported(term, "exponential factor"));
    }
    let p = term.p.substitute(PARAM_IDX, &int(n));
    let mut factors = term.powers.clone();
    factors.push((term.s.clone(), Exponent::constant(int(n))));
    factors.push((term.t.clone(), Exponent::constant(int(-n))));
    beta_integral(term, &p, &factors, prec)
}

fn unsupported(term: &HyperTerm, why: &str) -> Error {
    Error::UnderdeterminedInit(format!("no closed-form initial values for {} ({})", term, why))
}

/// `∫_box Q ∏ base^exponent`, where every base is a constant times a product
/// of endpoint factors.
fn beta_integral(term: &HyperTerm, q: &MultiPoly, factors: &[(MultiPoly, Exponent)], prec: i64) -> Result<EpsSeries> {
    let d = term.dim();
    if term.intvars.iter().any(|iv| iv.lower.finite().is_none() || iv.upper.finite().is_none()) {
        return Err(unsupported(term, "infinite range"));
    }
    let mut mu = vec![Exponent::constant(Rational::zero()); d];
    let mut nu = vec![Exponent::constant(Rational::zero()); d];
    let mut consts: Vec<(MultiPoly, Exponent)> = Vec::new();
    for (base, e) in factors {
        if base.is_one() || e.is_zero() {
            continue;
        }
        let mut rest = base.clone();
        let mut sign_flip = false;
        for (j, iv) in term.intvars.iter().enumerate() {
            let idx = term.var_idx(j);
            if !rest.depends_on(idx) {
                continue;
            }
            let (lo, hi) = (iv.lower.finite().unwrap().clone(), iv.upper.finite().unwrap().clone());
            let kl = rest.vanishing_order(idx, &lo);
            rest = rest.deflate(idx, &lo, kl);
            let ku = rest.vanishing_order(idx, &hi);
            rest = rest.deflate(idx, &hi, ku);
            // (x - u)^k = (-1)^k (u - x)^k
            sign_flip ^= ku % 2 == 1;
            mu[j] = mu[j].add(&e.scale(&int(kl as i64)));
            nu[j] = nu[j].add(&e.scale(&int(ku as i64)));
            if rest.depends_on(idx) {
                return Err(unsupported(term, &format!("{} is not a product of endpoint factors", base)));
            }
        }
        if rest.depends_on(PARAM_IDX) {
            return Err(unsupported(term, "parameter left in a factor"));
        }
        if sign_flip {
            rest = -rest;
        }
        consts.push((rest, e.clone()));
    }
    // Endpoint factors of Q join the exponents so that cancellations happen
    // before the monomial expansion.
    let mut q = q.clone();
    let mut q_sign = false;
    for (j, iv) in term.intvars.iter().enumerate() {
        if q.is_zero() {
            break;
        }
        let idx = term.var_idx(j);
        let (lo, hi) = (iv.lower.finite().unwrap(), iv.upper.finite().unwrap());
        let kl = q.vanishing_order(idx, lo);
        q = q.deflate(idx, lo, kl);
        let ku = q.vanishing_order(idx, hi);
        q = q.deflate(idx, hi, ku);
        q_sign ^= ku % 2 == 1;
        mu[j] = mu[j].offset(&int(kl as i64));
        nu[j] = nu[j].offset(&int(ku as i64));
    }
    if q_sign {
        q = -q;
    }
    with_precision(prec, |w| {
        let mut total = EpsSeries::zero(w);
        let mut cache: BTreeMap<(usize, u32), EpsSeries> = BTreeMap::new();
        for (mono, c) in q.terms() {
            let mut acc = EpsSeries::constant(c.clone(), w).shift(mono.0[EPS_IDX] as i64);
            for (j, iv) in term.intvars.iter().enumerate() {
                let m = mono.0[term.var_idx(j)];
                let key = (j, m);
                if !cache.contains_key(&key) {
                    let (lo, hi) = (iv.lower.finite().unwrap(), iv.upper.finite().unwrap());
                    cache.insert(key, moment_1d(m, lo, hi, &mu[j], &nu[j], w)?);
                }
                acc = acc.mul(&cache[&key]);
            }
            total = total.add(&acc);
        }
        for (base, e) in &consts {
            total = total.mul(&const_power(base, e, w)?);
        }
        Ok(total)
    })
}

/// `κ^α` for a polynomial `κ` in ε alone (absolute value for non-integer α).
fn const_power(base: &MultiPoly, e: &Exponent, w: i64) -> Result<EpsSeries> {
    let dense = univariate(base, EPS_IDX)?;
    let s = EpsSeries::from_dense(&dense, w + 2 * dense.len() as i64);
    power_series(&s, e, w)
}

/// `s^α` with `α` affine in ε.
pub(crate) fn power_series(s: &EpsSeries, e: &Exponent, w: i64) -> Result<EpsSeries> {
    if e.c_eps.is_zero() && e.c0.is_integer() {
        let k: i64 = e.c0.to_integer().try_into().map_err(|_| Error::Numeric("exponent too large".into()))?;
        return s.powi(k);
    }
    let v = s.valuation().ok_or_else(|| Error::Numeric("zero base with a non-integer exponent".into()))?;
    if v != 0 {
        return Err(Error::UnderdeterminedInit("non-integer power of a series in ep with a zero or pole".into()));
    }
    let s0 = s.coeff(0);
    if !s0.abs().is_one() {
        return Err(Error::UnderdeterminedInit(format!("{}^({}) is not rational", s0, e.render("n"))));
    }
    let u = s.scale(&s0.recip());
    let alpha = EpsSeries::from_dense(&[e.c0.clone(), e.c_eps.clone()], w);
    alpha.mul(&u.log()?).exp()
}

/// `∫_l^u x^m (x-l)^μ (u-x)^ν dx`.
fn moment_1d(m: u32, l: &Rational, u: &Rational, mu: &Exponent, nu: &Exponent, w: i64) -> Result<EpsSeries> {
    // x^m = Σ_i C(m,i) l^{m-i} (x-l)^i
    let mut total = EpsSeries::zero(w);
    let mut binom = Rational::one();
    for i in 0..=m {
        if i > 0 {
            binom = binom * int((m - i + 1) as i64) / int(i as i64);
        }
        let lp = if l.is_zero() {
            if i == m {
                Rational::one()
            } else {
                continue;
            }
        } else {
            num_traits::pow(l.clone(), (m - i) as usize)
        };
        let a = mu.offset(&int(i as i64));
        let v = beta_pair(&a, nu, &(u - l), w)?;
        total = total.add(&v.scale(&(&binom * &lp)));
    }
    Ok(total)
}

/// `∫_0^h y^A (h-y)^B dy = h^{A+B+1} B(A+1, B+1)`.
fn beta_pair(a: &Exponent, b: &Exponent, h: &Rational, w: i64) -> Result<EpsSeries> {
    let nat = |e: &Exponent| -> Option<i64> {
        if e.c_eps.is_zero() && e.c_n.is_zero() && e.c0.is_integer() && !e.c0.is_negative() {
            e.c0.to_integer().try_into().ok()
        } else {
            None
        }
    };
    let (other, k) = match (nat(a), nat(b)) {
        (_, Some(k)) => (a, k),
        (Some(k), None) => (b, k),
        _ => {
            if a.is_constant() && b.is_constant() && (a.c0 <= int(-1) || b.c0 <= int(-1)) {
                return Err(Error::DivergentIntegral(format!("endpoint exponent {} or {}", a.c0, b.c0)));
            }
            return Err(Error::UnderdeterminedInit(format!(
                "Beta({}, {}) is not rational in ep",
                a.render("n"),
                b.render("n")
            )));
        }
    };
    // B(X, k+1) = k! / (X (X+1) … (X+k)),  X = other + 1
    let mut den = EpsSeries::constant(Rational::one(), w + 2 * (k + 1));
    for i in 0..=k {
        let c0 = &other.c0 + int(1 + i);
        if c0.is_zero() && other.c_eps.is_zero() {
            return Err(Error::DivergentIntegral("endpoint exponent -1".into()));
        }
        let f = EpsSeries::from_dense(&[c0, other.c_eps.clone()], w + 2 * (k + 1));
        den = den.mul(&f);
    }
    let mut out = den.inv()?.scale(&factorial(k as usize));
    if !h.is_one() {
        let total = a.add(b).offset(&Rational::one());
        if !total.c_eps.is_zero() || !total.c0.is_integer() {
            return Err(Error::UnderdeterminedInit(format!("({})^({}) is not rational in ep", h, total.render("n"))));
        }
        let k: i64 = total.c0.to_integer().try_into().map_err(|_| Error::Numeric("exponent too large".into()))?;
        let base = if k < 0 { h.recip() } else { h.clone() };
        out = out.scale(&num_traits::pow(base, k.unsigned_abs() as usize));
    }
    Ok(out)
}

/// Leading behaviour `x^s · c(ε)` at `x = 0` of a 0-dimensional term, where
/// `x` is the parameter (continuous mode).
pub(crate) fn leading_term(term: &HyperTerm, prec: i64) -> Result<(i64, EpsSeries)> {
    let x = PARAM_IDX;
    let zero = Rational::zero();
    let mut s = Rational::zero();
    let series = |p: &MultiPoly, w: i64| -> Result<EpsSeries> {
        let dense = univariate(&p.substitute(x, &zero), EPS_IDX)?;
        Ok(EpsSeries::from_dense(&dense, w + 2 * dense.len() as i64))
    };
    let op = term.p.min_degree_in(x).unwrap_or(0);
    s += int(op as i64);
    let p0 = term.p.deflate(x, &zero, op);
    if !term.a.is_zero() && term.b.substitute(x, &zero).is_zero() {
        return Err(Error::SingularObstruction(format!("essential singularity at {} = 0", term.param)));
    }
    let mut deflated: Vec<(MultiPoly, Exponent)> = Vec::new();
    for (base, e) in &term.powers {
        let k = base.min_degree_in(x).unwrap_or(0);
        if k > 0 {
            let contrib = e.scale(&int(k as i64));
            if !contrib.c_eps.is_zero() || !contrib.c0.is_integer() {
                return Err(Error::SingularObstruction(format!(
                    "{}^({}) at {} = 0 is not a power series",
                    term.param,
                    contrib.render("n"),
                    term.param
                )));
            }
            s += contrib.c0;
        }
        deflated.push((base.deflate(x, &zero, k), e.clone()));
    }
    let c = with_precision(prec, |w| {
        let mut acc = series(&p0, w)?;
        if !term.a.is_zero() {
            let g = RatFunc::new(term.a.substitute(x, &zero), term.b.substitute(x, &zero))?;
            acc = acc.mul(&EpsSeries::from_ratfunc(&g, EPS_IDX, w)?.exp()?);
        }
        for (base, e) in &deflated {
            acc = acc.mul(&power_series(&series(base, w)?, e, w)?);
        }
        Ok(acc)
    })?;
    if !s.is_integer() {
        return Err(Error::SingularObstruction("fractional leading exponent".into()));
    }
    let s: i64 = s.to_integer().try_into().map_err(|_| Error::Numeric("exponent too large".into()))?;
    Ok((s, c))
}

/// Value of a 0-dimensional discrete term at an integer `n`.
pub(crate) fn discrete_value(term: &HyperTerm, n: i64, prec: i64) -> Result<EpsSeries> {
    let mut t = term.clone();
    t.p = term.p.substitute(PARAM_IDX, &int(n));
    t.powers.push((term.s.clone(), Exponent::constant(int(n))));
    t.powers.push((term.t.clone(), Exponent::constant(int(-n))));
    leading_term(&t, prec).map(|(_, c)| c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::rat;
    use crate::hyperterm::IntVar;
    use crate::parse::parse_term;

    fn unit(names: &[&str]) -> Vec<IntVar> {
        names.iter().map(|n| IntVar::finite(n, int(0), int(1))).collect()
    }

    #[test]
    fn beta_moments() {
        // ∫ x^n = 1/(n+1)
        let h = parse_term("x^n", Mode::Discrete, "n", unit(&["x"])).unwrap();
        let s = MomentInit.seeds(&h, &[], (0, 0), 4).unwrap();
        let expect: Vec<Rational> = (1..=5).map(|k| rat(1, k)).collect();
        assert_eq!(s[&0].coeffs, expect);
        // ∫ x^{n+ε} = 1/(n+1+ε): ε¹ coefficient -1/(n+1)^2
        let h = parse_term("x^(n+ep)", Mode::Discrete, "n", unit(&["x"])).unwrap();
        let s = MomentInit.seeds(&h, &[], (0, 1), 2).unwrap();
        assert_eq!(s[&1].coeffs, vec![int(-1), rat(-1, 4), rat(-1, 9)]);
    }

    #[test]
    fn taylor_moments_of_exponential() {
        // ∫_0^1 e^{xt} dt = Σ x^k/(k+1)!
        let h = parse_term("exp(x*t)", Mode::Continuous, "x", unit(&["t"])).unwrap();
        let s = MomentInit.seeds(&h, &[], (0, 0), 4).unwrap();
        let expect: Vec<Rational> = (1..=5).map(|k| factorial(k).recip()).collect();
        assert_eq!(s[&0].coeffs, expect);
    }

    #[test]
    fn shifted_lower_end() {
        // ∫_1^3 x^2 dx = 26/3
        let iv = vec![IntVar::finite("x", int(1), int(3))];
        let h = parse_term("x^2*y^n", Mode::Discrete, "n", {
            let mut v = iv.clone();
            v.push(IntVar::finite("y", int(0), int(1)));
            v
        })
        .unwrap();
        let s = MomentInit.seeds(&h, &[], (0, 0), 1).unwrap();
        assert_eq!(s[&0].coeffs, vec![rat(26, 3), rat(13, 3)]);
    }

    #[test]
    fn non_beta_is_refused() {
        let h = parse_term("1/(1+x^2)^n", Mode::Discrete, "n", unit(&["x"])).unwrap();
        assert!(matches!(MomentInit.seeds(&h, &[], (0, 0), 1), Err(Error::UnderdeterminedInit(_))));
        let h = parse_term("x^(n-1)", Mode::Discrete, "n", unit(&["x"])).unwrap();
        assert!(matches!(MomentInit.seeds(&h, &[], (0, 0), 1), Err(Error::DivergentIntegral(_))));
    }
}
