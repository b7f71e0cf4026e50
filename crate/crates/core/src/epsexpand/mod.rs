//! ε-expansion of integrals from their annihilators: order-by-order power
//! series in the parameter (continuous mode) or value tables (discrete mode).

pub mod init;
pub mod series;
pub mod solve;

use std::collections::BTreeMap;

use num_traits::Zero;

pub use init::{GivenInit, InitProvider, MomentInit};
pub use series::{EpsSeries, SeriesInX};
pub use solve::{eps_constraints, series_solve, unroll, Constraint, ParamODE};

use crate::boundary::{boundary_terms, divide_and_conquer, RecursionNode};
use crate::hyperterm::{HyperTerm, Mode, PARAM_IDX};
use crate::par;
use crate::telescope::{find_telescoper, AnsatzConfig};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Strategy {
    /// One homogeneous annihilator for the whole integral.
    Direct,
    /// Inhomogeneous equations down the boundary tree.
    Recursive,
}

/// `I = Σ_{k=t}^{u} ε^k I_k`. Continuous mode: `I_k` is a power series in the
/// parameter, exact through `x^{start+validity}`. Discrete mode: `I_k` is a
/// value table for `n = start..=start+validity`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EpsExpansion {
    pub mode: Mode,
    pub t: i64,
    pub entries: Vec<SeriesInX>,
    pub validity: usize,
}

impl EpsExpansion {
    pub fn u(&self) -> i64 {
        self.t + self.entries.len() as i64 - 1
    }

    pub fn order(&self, k: i64) -> Option<&SeriesInX> {
        if k < self.t {
            return None;
        }
        self.entries.get((k - self.t) as usize)
    }
}

impl ParamODE {
    /// The equation `Σ e_i D^i I = rhs` of an annihilator (coefficients in `[ep, param]`).
    pub fn from_coeffs(e: &[crate::arith::MultiPoly], t: i64, rhs: BTreeMap<i64, SeriesInX>) -> ParamODE {
        ParamODE { t, coeffs: e.to_vec(), rhs }
    }
}

/// Expansion with the given root seeds (ε-order ↦ leading coefficients);
/// other nodes and missing root seeds use exact moments.
pub fn expand_integral(
    term: &HyperTerm,
    eps: (i64, i64),
    m: usize,
    init: &BTreeMap<i64, SeriesInX>,
    strategy: Strategy,
    cfg: &AnsatzConfig,
) -> Result<EpsExpansion> {
    let out = expand_with(term, eps, m, &GivenInit { root: init.clone() }, strategy, cfg)?;
    // Seeds the solver did not need must still agree with the result.
    for (k, given) in init {
        let Some(got) = out.order(*k) else { continue };
        let hi = given.prec().min(got.prec());
        for j in given.start..=hi {
            if given.coeff(j) != got.coeff(j) {
                return Err(Error::InconsistentInit(format!(
                    "ep^{} coefficient of {}^{}: given {}, implied {}",
                    k,
                    term.param,
                    j,
                    given.coeff(j),
                    got.coeff(j)
                )));
            }
        }
    }
    Ok(out)
}

pub fn expand_with(
    term: &HyperTerm,
    eps: (i64, i64),
    m: usize,
    provider: &dyn InitProvider,
    strategy: Strategy,
    cfg: &AnsatzConfig,
) -> Result<EpsExpansion> {
    if eps.0 > eps.1 {
        return Err(Error::Input(format!("empty ep range {}:{}", eps.0, eps.1)));
    }
    let tree = match strategy {
        Strategy::Direct => {
            let ann = find_telescoper(term, cfg)?.annihilator()?;
            if !boundary_terms(term, &ann)?.is_empty() {
                return Err(Error::Input(
                    "the annihilator has nonvanishing boundary terms; use the recursive strategy".into(),
                ));
            }
            RecursionNode {
                integral: term.clone(),
                annihilator: Some(ann),
                rhs: Vec::new(),
                children: Vec::new(),
                base_value: None,
            }
        }
        Strategy::Recursive => divide_and_conquer(term, cfg, term.dim())?,
    };
    expand_tree(&tree, eps, m, provider)
}

/// Expansion along an already computed recursion tree.
pub fn expand_tree(tree: &RecursionNode, eps: (i64, i64), m: usize, provider: &dyn InitProvider) -> Result<EpsExpansion> {
    let (t, u) = eps;
    match tree.integral.mode {
        Mode::Continuous => {
            let (start, map) = continuous(tree, &mut Vec::new(), t, u, Extent::Order(m), provider)?;
            check_below(&map, t)?;
            let entries = (t..=u)
                .map(|k| map.get(&k).cloned().unwrap_or_else(|| SeriesInX::zero(start, start + m as i64)))
                .map(|s| s.truncate(start + m as i64))
                .collect();
            Ok(EpsExpansion { mode: Mode::Continuous, t, entries, validity: m })
        }
        Mode::Discrete => {
            let mut pad = 0;
            loop {
                let (n0, vals) = discrete(tree, &mut Vec::new(), t, u + pad, None, m, provider)?;
                let prec = vals.iter().map(|v| v.prec()).min().unwrap_or(u);
                if prec >= u {
                    for v in &vals {
                        if let Some(k) = v.valuation() {
                            if k < t {
                                return Err(Error::Input(format!("the integral has a term ep^{} below the requested range", k)));
                            }
                        }
                    }
                    let entries = (t..=u)
                        .map(|k| SeriesInX::new(n0, vals.iter().take(m + 1).map(|v| v.coeff(k)).collect()))
                        .collect();
                    return Ok(EpsExpansion { mode: Mode::Discrete, t, entries, validity: m });
                }
                if pad > 32 {
                    return Err(Error::UnderdeterminedInit(format!(
                        "initial values determine the expansion only through ep^{}",
                        prec
                    )));
                }
                pad = (pad * 2).max(2);
            }
        }
    }
}

fn check_below(map: &BTreeMap<i64, SeriesInX>, t: i64) -> Result<()> {
    for (k, s) in map.range(..t) {
        if !s.is_zero() {
            return Err(Error::Input(format!("the integral has a term ep^{} below the requested range", k)));
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug)]
enum Extent {
    /// Truncation order relative to the series start.
    Order(usize),
    /// Exact through this power of the parameter.
    Through(i64),
}

impl Extent {
    fn order_from(self, start: i64) -> usize {
        match self {
            Extent::Order(m) => m,
            Extent::Through(p) => (p - start).max(0) as usize,
        }
    }
}

fn at_node(e: Error, path: &[usize]) -> Error {
    match e {
        e @ Error::AtNode { .. } => e,
        e => Error::AtNode { path: path.to_vec(), source: Box::new(e) },
    }
}

fn add_into(acc: &mut BTreeMap<i64, SeriesInX>, k: i64, s: SeriesInX) {
    let next = match acc.remove(&k) {
        Some(prev) => prev.add(&s),
        None => s,
    };
    acc.insert(k, next);
}

/// Series of the integral at a node for ε-orders from (at most) `t` to `u`.
/// Returns the series start and the orders, possibly extended below `t`.
fn continuous(
    node: &RecursionNode,
    path: &mut Vec<usize>,
    t: i64,
    u: i64,
    ext: Extent,
    provider: &dyn InitProvider,
) -> Result<(i64, BTreeMap<i64, SeriesInX>)> {
    if let Some(base) = &node.base_value {
        return base_continuous(base, t, u, ext).map_err(|e| at_node(e, path));
    }
    let ann = node.annihilator.as_ref().expect("inner node has an annihilator");
    let ode = ParamODE::from_coeffs(&ann.e, t, BTreeMap::new());
    let v = ode.eps_valuation().unwrap_or(0) as i64;
    let ode = ode.rescaled();
    let c0 = eps_constraints(&ode, &[]).map_err(|e| at_node(e, path))?;
    let dmin = c0.delta_min();
    let roots = c0.integer_roots(-64, 256);
    // Without integer indicial roots the solution is fixed by the right-hand
    // side alone and no seeds are needed.
    let seeds = match roots.last() {
        Some(&r) => provider.seeds(&node.integral, path, (t, u), r).map_err(|e| at_node(e, path))?,
        None => BTreeMap::new(),
    };
    let upto = roots.last().copied().unwrap_or(0);
    let loss = ode.precision_loss();
    let seeded_start = seeds.values().next().map(|s| s.start);
    let mut through = match (ext, seeded_start) {
        (Extent::Through(p), _) => p,
        (Extent::Order(m), Some(s)) => s + m as i64,
        (Extent::Order(m), None) => m as i64,
    };
    loop {
        let kid_through = through + (u - t + 2) * loss + dmin.max(0);
        let idx: Vec<usize> = (0..node.children.len()).collect();
        let kids = par::map(&idx, |&i| {
            let mut p = path.clone();
            p.push(i);
            continuous(&node.children[i], &mut p, t + v - 1, u + v, Extent::Through(kid_through), provider)
        });
        let mut rhs: BTreeMap<i64, SeriesInX> = BTreeMap::new();
        for (i, kid) in kids.into_iter().enumerate() {
            let (_, map) = kid?;
            let sign = crate::arith::int(node.rhs[i].sign as i64);
            for (k, s) in map {
                add_into(&mut rhs, k - v, s.scale(&sign));
            }
        }
        if seeds.is_empty() && ann.l > 0 && rhs.values().all(|s| s.is_zero()) {
            // The only power series solution is zero; the integral behaves
            // like x^r with a non-integer indicial root r.
            return Err(at_node(
                Error::SingularObstruction(format!(
                    "homogeneous equation without integer indicial roots: {} is not a power series in {}",
                    node.integral, node.integral.param
                )),
                path,
            ));
        }
        let start = match seeded_start {
            Some(s) => s,
            None => rhs.values().filter_map(|s| s.first_nonzero()).min().map_or(0, |j| j - dmin),
        };
        if let (Extent::Order(m), None) = (ext, seeded_start) {
            if start + m as i64 > through {
                through = start + m as i64;
                continue;
            }
        }
        let m = ext.order_from(start);
        let lowest_nonzero = |m: &BTreeMap<i64, SeriesInX>| m.iter().find(|(_, s)| !s.is_zero()).map(|(k, _)| *k);
        let t_node = [Some(t), lowest_nonzero(&seeds), lowest_nonzero(&rhs)].into_iter().flatten().min().unwrap();
        let ode = ParamODE { t: t_node, coeffs: ode.coeffs.clone(), rhs };
        let mut solved: Vec<SeriesInX> = Vec::new();
        for k in t_node..=u {
            let c = eps_constraints(&ode, &solved).map_err(|e| at_node(e, path))?;
            let seed = match seeds.get(&k) {
                Some(s) => s.clone(),
                None if seeds.is_empty() => SeriesInX::new(start, Vec::new()),
                None => SeriesInX::zero(start, upto),
            };
            let mk = m + ((u - k) * loss) as usize;
            let sol = series_solve(&c, &seed, mk).map_err(|e| at_node(e, path))?;
            solved.push(sol);
        }
        let through = start + m as i64;
        let out = solved.into_iter().enumerate().map(|(i, s)| (t_node + i as i64, s.truncate(through))).collect();
        return Ok((start, out));
    }
}

/// A 0-dimensional term expanded through its first-order equation
/// `F' = (D F / F) F`, seeded with the leading coefficient at the origin.
fn base_continuous(term: &HyperTerm, t: i64, u: i64, ext: Extent) -> Result<(i64, BTreeMap<i64, SeriesInX>)> {
    let (s, lead) = init::leading_term(term, u)?;
    let m = ext.order_from(s);
    let r = term.log_derivative_f(PARAM_IDX);
    let coeffs = vec![-r.num(), r.den().clone()];
    let t0 = lead.valuation().map_or(t, |k| k.min(t));
    let ode = ParamODE { t: t0, coeffs, rhs: BTreeMap::new() }.rescaled();
    let loss = ode.precision_loss();
    let mut solved: Vec<SeriesInX> = Vec::new();
    for k in t0..=u {
        let c = eps_constraints(&ode, &solved)?;
        let seed = SeriesInX::new(s, vec![lead.coeff(k)]);
        solved.push(series_solve(&c, &seed, m + ((u - k) * loss) as usize)?);
    }
    let through = s + m as i64;
    Ok((s, solved.into_iter().enumerate().map(|(i, x)| (t0 + i as i64, x.truncate(through))).collect()))
}

/// Values at `n = n0, …, n_hi` (default `n0 + m`) as ε-series exact through
/// (about) `ε^u`; the caller checks the final precision.
fn discrete(
    node: &RecursionNode,
    path: &mut Vec<usize>,
    t: i64,
    u: i64,
    n_hi: Option<i64>,
    m: usize,
    provider: &dyn InitProvider,
) -> Result<(i64, Vec<EpsSeries>)> {
    if let Some(base) = &node.base_value {
        let hi = n_hi.unwrap_or(m as i64);
        let vals = (0..=hi).map(|n| init::discrete_value(base, n, u)).collect::<Result<Vec<_>>>();
        return vals.map(|v| (0, v)).map_err(|e| at_node(e, path));
    }
    let ann = node.annihilator.as_ref().expect("inner node has an annihilator");
    let v = ann.e.iter().filter_map(|e| e.min_degree_in(0)).min().unwrap_or(0) as i64;
    let e: Vec<_> = ParamODE::from_coeffs(&ann.e, t, BTreeMap::new()).rescaled().coeffs;
    let l = ann.l as i64;
    // Seeds must cover the first L values and every point where the
    // leading coefficient vanishes identically.
    let probe_hi = n_hi.unwrap_or(m as i64).max(l);
    let mut upto = l - 1;
    for n in 0..=(probe_hi - l) {
        if e[ann.l].substitute(1, &crate::arith::int(n)).is_zero() {
            upto = upto.max(n + l);
        }
    }
    let seeds = provider.seeds(&node.integral, path, (t, u), upto.max(0)).map_err(|e| at_node(e, path))?;
    let n0 = seeds.values().next().map_or(0, |s| s.start);
    let hi = n_hi.unwrap_or(n0 + m as i64);
    let count = (hi - n0 + 1).max(0) as usize;
    let seed_len = seeds.values().map(|s| s.coeffs.len()).min().unwrap_or(0);
    let seed_hi = seeds.keys().next_back().copied().unwrap_or(u);
    let init_vals: Vec<EpsSeries> = (0..seed_len)
        .map(|i| {
            let lo = *seeds.keys().next().unwrap();
            let c = (lo..=seed_hi.min(u)).map(|k| seeds.get(&k).map_or_else(Zero::zero, |s| s.coeffs[i].clone())).collect();
            EpsSeries::from_coeffs(lo, c)
        })
        .collect();

    let idx: Vec<usize> = (0..node.children.len()).collect();
    let kid_hi = (hi - l).max(0);
    let kids = par::map(&idx, |&i| {
        let mut p = path.clone();
        p.push(i);
        discrete(&node.children[i], &mut p, t + v - 1, u + v, Some(kid_hi), m, provider)
    });
    let kids = kids.into_iter().collect::<Result<Vec<_>>>()?;
    let signs: Vec<i64> = node.rhs.iter().map(|b| b.sign as i64).collect();
    let rhs = |n: i64| -> Result<EpsSeries> {
        let mut acc = EpsSeries::zero(u + 8);
        for (i, (kn0, vals)) in kids.iter().enumerate() {
            let j = n - kn0;
            if j < 0 || j as usize >= vals.len() {
                return Err(Error::Input(format!("boundary value at n = {} is outside the computed table", n)));
            }
            let mut val = vals[j as usize].scale(&crate::arith::int(signs[i]));
            let den = &node.rhs[i].den;
            if !den.is_one() {
                let d = series::univariate(&den.substitute(1, &crate::arith::int(n)), 0)?;
                val = val.div(&EpsSeries::from_dense(&d, u + 8 + 2 * d.len() as i64))?;
            }
            acc = acc.add(&val);
        }
        Ok(acc.shift(-v))
    };
    let vals = unroll(&e, &rhs, &init_vals, n0, count).map_err(|e| at_node(e, path))?;
    Ok((n0, vals))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::{int, rat, Rational};
    use crate::hyperterm::IntVar;
    use crate::parse::parse_term;
    use crate::telescope::Ansatz;

    fn unit(names: &[&str]) -> Vec<IntVar> {
        names.iter().map(|n| IntVar::finite(n, int(0), int(1))).collect()
    }

    #[test]
    fn discrete_power_toy() {
        let h = parse_term("x^(n+ep)", Mode::Discrete, "n", unit(&["x"])).unwrap();
        let cfg = AnsatzConfig::new(Mode::Discrete).with_ansatz(Ansatz::BoundaryVanishing);
        let mut init = BTreeMap::new();
        init.insert(0, SeriesInX::new(0, vec![int(1)]));
        init.insert(1, SeriesInX::new(0, vec![int(-1)]));
        let ex = expand_integral(&h, (0, 1), 5, &init, Strategy::Direct, &cfg).unwrap();
        for n in 0..=5 {
            let n1 = int(n + 1);
            assert_eq!(ex.entries[0].coeffs[n as usize], n1.recip());
            assert_eq!(ex.entries[1].coeffs[n as usize], -(&n1 * &n1).recip());
        }
        // Recursive with moments for the root agrees.
        let rec = expand_with(&h, (0, 1), 5, &MomentInit, Strategy::Recursive, &AnsatzConfig::new(Mode::Discrete));
        assert_eq!(rec.unwrap(), ex);
    }

    #[test]
    fn continuous_exponential() {
        // ∫_0^1 e^{-xt} dt = Σ (-x)^k/(k+1)!
        let h = parse_term("exp(-x*t)", Mode::Continuous, "x", unit(&["t"])).unwrap();
        let cfg = AnsatzConfig::new(Mode::Continuous);
        let rec = expand_with(&h, (0, 0), 6, &MomentInit, Strategy::Recursive, &cfg).unwrap();
        let mut f = Rational::from_integer(1.into());
        for k in 0..=6i64 {
            f = f / int(k + 1);
            let sgn = if k % 2 == 0 { int(1) } else { int(-1) };
            assert_eq!(rec.entries[0].coeffs[k as usize], &f * &sgn, "k = {}", k);
        }
    }

    #[test]
    fn regulated_power_in_parameter() {
        // ∫_0^1 (1 + x t)^{ep} dt: ε⁰ = 1, ε¹ = ∫ log(1 + x t) = x/2 - x²/6 + x³/12 - …
        let h = parse_term("(1+x*t)^ep", Mode::Continuous, "x", unit(&["t"])).unwrap();
        let cfg = AnsatzConfig::new(Mode::Continuous);
        let rec = expand_with(&h, (0, 1), 4, &MomentInit, Strategy::Recursive, &cfg).unwrap();
        assert_eq!(rec.entries[0].coeffs, vec![int(1), int(0), int(0), int(0), int(0)]);
        // ∫_0^1 log(1+xt) dt coefficients: (-1)^{k+1} x^k / (k (k+1))
        let e1: Vec<Rational> =
            (0..=4i64).map(|k| if k == 0 { int(0) } else { rat(if k % 2 == 1 { 1 } else { -1 }, k * (k + 1)) }).collect();
        assert_eq!(rec.entries[1].coeffs, e1);
    }
}
