//! Boundary contributions of a certificate and the divide-and-conquer tree.
//!
//! `Σ e_i ∂^i I = Σ_j [G_j]_{x_j = u_j}^{x_j = o_j}`, each evaluated end being
//! an integral over the remaining variables.

use std::fmt;

use num_traits::{One, Signed, Zero};

use crate::arith::{int, MultiPoly, RatFunc, Rational, Vars};
use crate::error::{Error, Result};
use crate::hyperterm::{term_ring, Bound, Exponent, HyperTerm, Mode, EPS_IDX, PARAM_IDX};
use crate::par;
use crate::telescope::{find_telescoper, Annihilator, AnsatzConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum End {
    Lower,
    Upper,
}

impl End {
    pub fn name(self) -> &'static str {
        match self {
            End::Lower => "lower",
            End::Upper => "upper",
        }
    }
}

/// `sign · ∫ term / den`, one evaluated end of one certificate.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BoundaryIntegral {
    pub sign: i32,
    pub term: HyperTerm,
    /// Factor of the certificate denominator that depends on the discrete
    /// parameter only (over `[ep, n]`; `1` otherwise).
    pub den: MultiPoly,
    /// Integration variable of the parent and the end it was evaluated at.
    pub origin: (usize, End),
}

impl fmt::Display for BoundaryIntegral {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = if self.sign < 0 { "-" } else { "+" };
        let s = if self.den.is_one() { s.to_string() } else { format!("{}1/({})*", s, self.den) };
        if self.term.dim() == 0 {
            return write!(f, "{}{}", s, self.term);
        }
        let vars: Vec<String> = self
            .term
            .intvars
            .iter()
            .map(|iv| format!("{} in ({}, {})", iv.name, iv.lower, iv.upper))
            .collect();
        write!(f, "{}int[{}] {}", s, vars.join(", "), self.term)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RecursionNode {
    pub integral: HyperTerm,
    /// `None` at base cases (no integration variables left).
    pub annihilator: Option<Annihilator>,
    pub rhs: Vec<BoundaryIntegral>,
    pub children: Vec<RecursionNode>,
    /// The explicit 0-dimensional expression at base cases.
    pub base_value: Option<HyperTerm>,
}

impl RecursionNode {
    pub fn is_base(&self) -> bool {
        self.base_value.is_some()
    }

    pub fn homogeneous(&self) -> bool {
        self.rhs.is_empty()
    }

    pub fn depth(&self) -> usize {
        1 + self.children.iter().map(|c| c.depth()).max().unwrap_or(0)
    }

    /// Node reached by following child indices.
    pub fn at(&self, path: &[usize]) -> Option<&RecursionNode> {
        match path.split_first() {
            None => Some(self),
            Some((&k, rest)) => self.children.get(k)?.at(rest),
        }
    }
}

/// How the factor `(x - c)` behaves near an end of the box.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Limit {
    Vanishes,
    Finite,
    Unbounded,
}

/// `x^ν → 0` as `x → 0+` for every `n ≥ 0` and small `ε > 0`.
fn classify_zero_end(nu: &Exponent) -> Limit {
    if nu.is_zero() {
        return Limit::Finite;
    }
    if nu.c_n.is_negative() {
        return Limit::Unbounded;
    }
    if nu.c0.is_positive() || (nu.c0.is_zero() && nu.c_eps.is_positive()) {
        Limit::Vanishes
    } else {
        Limit::Unbounded
    }
}

/// Whether a polynomial has one strict sign on the interior of the domain:
/// integration variables in their boxes, a continuous parameter positive,
/// a discrete parameter non-negative, `ε` of unknown sign.
fn definite_sign(p: &MultiPoly, term: &HyperTerm) -> Option<i32> {
    if p.is_zero() {
        return None;
    }
    #[derive(PartialEq)]
    enum S {
        Pos,
        NonNeg,
        Unknown,
    }
    let v = p.vars();
    let kind: Vec<S> = v
        .iter()
        .enumerate()
        .map(|(i, name)| {
            if i == EPS_IDX {
                return S::Unknown;
            }
            if i == PARAM_IDX {
                return match term.mode {
                    Mode::Continuous => S::Pos,
                    Mode::Discrete => S::NonNeg,
                };
            }
            match term.intvars.iter().find(|iv| &iv.name == name).map(|iv| &iv.lower) {
                Some(Bound::Finite(l)) if !l.is_negative() => S::Pos,
                _ => S::Unknown,
            }
        })
        .collect();
    let mut sign = 0;
    let mut strict = false;
    for (m, c) in p.terms() {
        let mut nonneg_only = false;
        for (i, &e) in m.0.iter().enumerate() {
            if e == 0 {
                continue;
            }
            match kind[i] {
                S::Pos => {}
                S::NonNeg => nonneg_only = true,
                S::Unknown if e % 2 == 0 => nonneg_only = true,
                S::Unknown => return None,
            }
        }
        let s = if c.is_positive() { 1 } else { -1 };
        if sign != 0 && s != sign {
            return None;
        }
        sign = s;
        strict |= !nonneg_only;
    }
    strict.then_some(sign)
}

/// Integer-exponent factors of `G = R F` paired with their exponents.
fn factors(term: &HyperTerm, r: &RatFunc) -> Vec<(MultiPoly, Exponent)> {
    let one = |k: i64| Exponent::constant(int(k));
    let mut out = vec![(r.num().clone(), one(1)), (r.den().clone(), one(-1)), (term.p.clone(), one(1))];
    out.extend(term.powers.iter().cloned());
    if term.mode == Mode::Discrete {
        let n = Exponent::new(Rational::zero(), Rational::zero(), Rational::one());
        out.push((term.s.clone(), n.clone()));
        out.push((term.t.clone(), n.scale(&-Rational::one())));
    }
    out
}

fn drop_var(term: &HyperTerm, j: usize) -> (Vec<crate::hyperterm::IntVar>, Vars) {
    let mut iv = term.intvars.clone();
    iv.remove(j);
    let v = term_ring(&term.param, &iv);
    (iv, v)
}

/// Gcd of the coefficients of `p` with respect to the integration variables.
fn content_in_intvars(p: &MultiPoly, term: &HyperTerm) -> MultiPoly {
    let xs: Vec<usize> = (0..term.dim()).map(|j| term.var_idx(j)).collect();
    let mut groups: std::collections::BTreeMap<Vec<u32>, MultiPoly> = Default::default();
    for (m, c) in p.terms() {
        let key: Vec<u32> = xs.iter().map(|&i| m.0[i]).collect();
        let mut m2 = m.clone();
        for &i in &xs {
            m2.0[i] = 0;
        }
        groups.entry(key).or_insert_with(|| MultiPoly::zero(p.vars())).add_term(m2, c.clone());
    }
    groups.values().fold(MultiPoly::zero(p.vars()), |g, c| if g.is_zero() { c.clone() } else { crate::arith::gcd(&g, c) })
}

/// `G_j` at a finite end together with its parameter-only denominator, or
/// `None` when it vanishes there.
fn eval_finite(
    term: &HyperTerm,
    r: &RatFunc,
    j: usize,
    end: End,
    c: &Rational,
) -> Result<Option<(HyperTerm, MultiPoly)>> {
    let idx = term.var_idx(j);
    let here = || format!("{} = {}", term.intvars[j].name, c);
    if !term.a.is_zero() && term.b.substitute(idx, c).is_zero() {
        return Err(Error::UnboundedBoundaryTerm(format!("{} (essential singularity)", here())));
    }
    let fs = factors(term, r);
    let mut nu = Exponent::constant(Rational::zero());
    let mut orders = Vec::with_capacity(fs.len());
    for (q, e) in &fs {
        let k = q.vanishing_order(idx, c);
        nu = nu.add(&e.scale(&int(k as i64)));
        orders.push(k);
    }
    match classify_zero_end(&nu) {
        Limit::Vanishes => return Ok(None),
        Limit::Unbounded => return Err(Error::UnboundedBoundaryTerm(here())),
        Limit::Finite => {}
    }
    let (iv, v) = drop_var(term, j);
    // Deflate by the factor that is positive inside the box.
    let at = |q: &MultiPoly, k: u32| -> Result<MultiPoly> {
        let mut d = q.deflate(idx, c, k);
        if end == End::Upper && k % 2 == 1 {
            d = -&d;
        }
        Ok(d.substitute(idx, c).with_vars(&v)?)
    };
    let mut child = HyperTerm::unit(term.mode, &term.param, iv);
    let mut it = fs.iter().zip(&orders);
    let (n, kn) = it.next().unwrap();
    let (d, kd) = it.next().unwrap();
    let (p, kp) = it.next().unwrap();
    child.p = &at(&n.0, *kn)? * &at(&p.0, *kp)?;
    let mut den = at(&d.0, *kd)?;
    let mut den_n = MultiPoly::one(&term.coeff_vars());
    if term.mode == Mode::Discrete && den.depends_on(PARAM_IDX) {
        // n may not appear in a discrete base; keep it as an outer factor.
        let g = content_in_intvars(&den, &child);
        if g.depends_on(PARAM_IDX) {
            den = den.exact_div(&g)?;
            den_n = g.with_vars(&term.coeff_vars())?;
        }
    }
    if !den.is_one() {
        child.powers.push((den, d.1.clone()));
    }
    for _ in 0..term.powers.len() {
        let (s, k) = it.next().unwrap();
        child.powers.push((at(&s.0, *k)?, s.1.clone()));
    }
    if term.mode == Mode::Discrete {
        let (s, ks) = it.next().unwrap();
        let (t, kt) = it.next().unwrap();
        child.s = at(&s.0, *ks)?;
        child.t = at(&t.0, *kt)?;
    }
    if child.p.is_zero() {
        return Ok(None);
    }
    child.a = term.a.substitute(idx, c).with_vars(&v)?;
    child.b = term.b.substitute(idx, c).with_vars(&v)?;
    // The numerator evaluated to a negative constant base keeps its sign in P.
    let mut kept = Vec::new();
    for (s, e) in std::mem::take(&mut child.powers) {
        match s.constant_value() {
            Some(cv) if e.is_constant() && e.c0.is_integer() => {
                let k: i32 = e.c0.to_integer().try_into().map_err(|_| Error::Input("exponent too large".into()))?;
                child.p = child.p.scale(&num_traits::pow::Pow::pow(&cv, k));
            }
            Some(cv) if cv.is_negative() => kept.push((s.scale(&-Rational::one()), e)),
            _ => kept.push((s, e)),
        }
    }
    child.powers = kept;
    Ok(Some((child.normalized()?, den_n)))
}

/// Dominance check at an infinite end: exponential decay, or algebraic decay
/// with a bounded exponential.
fn vanishes_at_infinity(term: &HyperTerm, r: &RatFunc, j: usize, end: End) -> bool {
    let idx = term.var_idx(j);
    // Orient the ray towards +∞.
    let orient = |q: &MultiPoly| match end {
        End::Upper => q.clone(),
        End::Lower => q.compose(idx, &-&MultiPoly::var_at(q.vars(), idx)),
    };
    let lc = |q: &MultiPoly| q.as_univariate(idx).pop().unwrap_or_else(|| MultiPoly::zero(q.vars()));
    if !term.a.is_zero() {
        let (a, b) = (orient(&term.a), orient(&term.b));
        let (da, db) = (a.degree_in(idx).unwrap_or(0), b.degree_in(idx).unwrap_or(0));
        if da > db {
            let s = (definite_sign(&lc(&a), term), definite_sign(&lc(&b), term));
            return matches!(s, (Some(x), Some(y)) if x * y < 0);
        }
    }
    let mut nu = Exponent::constant(Rational::zero());
    for (q, e) in factors(term, r) {
        nu = nu.add(&e.scale(&int(q.degree_in(idx).unwrap_or(0) as i64)));
    }
    // x^ν → 0 as x → ∞ iff (−ν) behaves like a vanishing order at zero.
    classify_zero_end(&nu.scale(&-Rational::one())) == Limit::Vanishes
}

/// The nonvanishing boundary integrals of a verified annihilator. Upper ends
/// enter with `+`, lower ends with `-`.
pub fn boundary_terms(term: &HyperTerm, ann: &Annihilator) -> Result<Vec<BoundaryIntegral>> {
    let mut out = Vec::new();
    for (j, r) in ann.certificate.iter().enumerate() {
        if r.is_zero() {
            continue;
        }
        let iv = &term.intvars[j];
        for (end, bound, sign) in [(End::Lower, &iv.lower, -1), (End::Upper, &iv.upper, 1)] {
            match bound {
                Bound::Finite(c) => {
                    if let Some((mut child, den)) = eval_finite(term, r, j, end, c)? {
                        let mut sign = sign;
                        if child.p.leading_coefficient().is_negative() {
                            child.p = -&child.p;
                            sign = -sign;
                        }
                        out.push(BoundaryIntegral { sign, term: child, den, origin: (j, end) });
                    }
                }
                _ => {
                    if !vanishes_at_infinity(term, r, j, end) {
                        return Err(Error::UnboundedBoundaryTerm(format!("{} = {}", iv.name, bound)));
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Telescoper search, boundary terms and recursion down to 0-dimensional
/// base values.
pub fn divide_and_conquer(term: &HyperTerm, cfg: &AnsatzConfig, depth_limit: usize) -> Result<RecursionNode> {
    if depth_limit < term.dim() {
        return Err(Error::Input(format!("depth limit {} below dimension {}", depth_limit, term.dim())));
    }
    node(term, cfg, &mut Vec::new())
}

fn node(term: &HyperTerm, cfg: &AnsatzConfig, path: &mut Vec<usize>) -> Result<RecursionNode> {
    if term.dim() == 0 {
        return Ok(RecursionNode {
            integral: term.clone(),
            annihilator: None,
            rhs: Vec::new(),
            children: Vec::new(),
            base_value: Some(term.clone()),
        });
    }
    let wrap = |e: Error, path: &[usize]| match e {
        e @ Error::AtNode { .. } => e,
        e => Error::AtNode { path: path.to_vec(), source: Box::new(e) },
    };
    let mut node_cfg = cfg.clone();
    if !cfg.add_factors.is_empty() && cfg.add_factors.len() != term.dim() {
        node_cfg.add_factors.clear();
    }
    if !path.is_empty() {
        // Add-factors are given for the root's variables only.
        node_cfg.add_factors.clear();
    }
    let ann = find_telescoper(term, &node_cfg)
        .and_then(|o| o.annihilator())
        .map_err(|e| wrap(e, path))?;
    let rhs = boundary_terms(term, &ann).map_err(|e| wrap(e, path))?;
    let paths: Vec<Vec<usize>> = (0..rhs.len())
        .map(|k| {
            let mut p = path.clone();
            p.push(k);
            p
        })
        .collect();
    let children: Vec<Result<RecursionNode>> =
        par::map(&paths, |p| node(&rhs[*p.last().unwrap()].term, cfg, &mut p.clone()));
    let children = children.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(RecursionNode {
        integral: term.clone(),
        annihilator: Some(ann),
        rhs,
        children,
        base_value: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hyperterm::IntVar;
    use crate::parse::parse_term;
    use crate::telescope::{verify_certificate, Ansatz};

    fn unit() -> Vec<IntVar> {
        vec![IntVar::finite("x", int(0), int(1))]
    }

    #[test]
    fn beta_certificate_vanishes() {
        let h = parse_term("x^n", Mode::Discrete, "n", unit()).unwrap();
        let cfg = AnsatzConfig::new(Mode::Discrete).with_ansatz(Ansatz::BoundaryVanishing);
        let ann = find_telescoper(&h, &cfg).unwrap().annihilator().unwrap();
        assert!(boundary_terms(&h, &ann).unwrap().is_empty());
        let tree = divide_and_conquer(&h, &cfg, 1).unwrap();
        assert!(tree.homogeneous() && tree.children.is_empty());
    }

    #[test]
    fn gamma_certificate_vanishes() {
        let iv = vec![IntVar::new("x1", Bound::Finite(int(0)), Bound::PosInf)];
        let h = parse_term("x1^n*exp(-x1)", Mode::Discrete, "n", iv).unwrap();
        let ann = find_telescoper(&h, &AnsatzConfig::new(Mode::Discrete)).unwrap().annihilator().unwrap();
        assert!(verify_certificate(&h, &ann));
        assert!(boundary_terms(&h, &ann).unwrap().is_empty());
    }

    #[test]
    fn exponential_on_unit_interval() {
        let iv = vec![IntVar::finite("t", int(0), int(1))];
        let h = parse_term("exp(-x*t)", Mode::Continuous, "x", iv).unwrap();
        let tree = divide_and_conquer(&h, &AnsatzConfig::new(Mode::Continuous), 1).unwrap();
        assert_eq!(tree.rhs.len(), 2);
        assert!(tree.children.iter().all(|c| c.is_base()));
        let ends: Vec<(i32, String)> = tree.rhs.iter().map(|b| (b.sign, b.term.to_string())).collect();
        let ann = tree.annihilator.as_ref().unwrap();
        // e_0 I = [R e^{-xt}]_0^1 with R = -e_0/x, so I = (1 - e^{-x})/x.
        assert_eq!(ann.l, 0);
        assert_eq!(ends[0].0, 1);
        assert_eq!(ends[1].0, -1);
        assert!(ends[1].1.contains("exp(-x)"), "{:?}", ends);
        assert!(!ends[0].1.contains("exp"), "{:?}", ends);
    }

    #[test]
    fn divergent_end_is_reported() {
        // G = x^n/(n... ) style certificate with a pole at 0.
        let h = parse_term("x^n", Mode::Discrete, "n", unit()).unwrap();
        let v = h.vars().clone();
        let cv = h.coeff_vars();
        let bad = Annihilator {
            l: 0,
            e: vec![MultiPoly::one(&cv)],
            certificate: vec![RatFunc::new(MultiPoly::one(&v), MultiPoly::var(&v, "x").unwrap().pow(2)).unwrap()],
            ansatz: Ansatz::Plain,
            mode: Mode::Discrete,
            param: "n".into(),
        };
        assert!(matches!(boundary_terms(&h, &bad), Err(Error::UnboundedBoundaryTerm(_))));
    }

    #[test]
    fn sign_of_leading_coefficients() {
        let iv = vec![IntVar::new("t", Bound::Finite(int(0)), Bound::PosInf), IntVar::finite("u", int(-1), int(1))];
        let h = parse_term("exp(-x*t^2)", Mode::Continuous, "x", iv).unwrap();
        let v = h.vars().clone();
        let p = |s: &str| crate::parse::parse_poly(s, &v).unwrap();
        assert_eq!(definite_sign(&p("-x*t"), &h), Some(-1));
        assert_eq!(definite_sign(&p("x + u^2"), &h), Some(1));
        assert_eq!(definite_sign(&p("x*u"), &h), None);
        assert_eq!(definite_sign(&p("u^2"), &h), None);
    }
}
