//! Creative telescoping: the ansatz system for a given order and degree
//! bound, the search over both, and exact certificate checks.

use std::collections::BTreeMap;
use std::fmt;
use std::time::{Duration, Instant};

use num_traits::Signed;
use sha2::{Digest, Sha256};

use crate::arith::linsys::{LinearSystem, Unknown};
use crate::arith::reconstruct::KernelBox;
use crate::arith::{gcd, int, lcm, rat_gcd, vars, Monomial, MultiPoly, RatFunc, Rational, Vars};
use crate::error::{Error, Result};
use crate::hyperterm::{HyperTerm, Mode, EPS, PARAM_IDX};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Ansatz {
    Plain,
    BoundaryVanishing,
}

impl Ansatz {
    pub fn name(self) -> &'static str {
        match self {
            Ansatz::Plain => "plain",
            Ansatz::BoundaryVanishing => "boundary_vanishing",
        }
    }
}

#[derive(Clone, Debug)]
pub struct AnsatzConfig {
    pub mode: Mode,
    pub ansatz: Ansatz,
    pub l_max: usize,
    pub degree_max: usize,
    /// Empty, or one polynomial per integration variable (in the term ring).
    pub add_factors: Vec<MultiPoly>,
    pub seed: u64,
}

impl AnsatzConfig {
    pub fn new(mode: Mode) -> Self {
        AnsatzConfig {
            mode,
            ansatz: Ansatz::Plain,
            l_max: 8,
            degree_max: 12,
            add_factors: Vec::new(),
            seed: 0,
        }
    }

    pub fn with_ansatz(mut self, a: Ansatz) -> Self {
        self.ansatz = a;
        self
    }

    pub fn with_bounds(mut self, l_max: usize, degree_max: usize) -> Self {
        self.l_max = l_max;
        self.degree_max = degree_max;
        self
    }
}

/// `Σ e_i ∂^i` (or `Σ e_i N^i`) together with the certificate `G_j = R_j F`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Annihilator {
    pub l: usize,
    /// Polynomials over `[ep, param]`.
    pub e: Vec<MultiPoly>,
    /// Rational functions over the term ring.
    pub certificate: Vec<RatFunc>,
    pub ansatz: Ansatz,
    pub mode: Mode,
    pub param: String,
}

impl Annihilator {
    /// Operator text, e.g. `(n + 1) - (n + 2)*N` or `2 + x*D_x`.
    pub fn operator_text(&self) -> String {
        let sym = match self.mode {
            Mode::Discrete => "N".to_string(),
            Mode::Continuous => format!("D_{}", self.param),
        };
        let mut out = String::new();
        for (i, e) in self.e.iter().enumerate() {
            if e.is_zero() {
                continue;
            }
            let text = e.to_string();
            let (neg, body) = match text.strip_prefix('-') {
                Some(rest) if e.len() == 1 => (true, rest.to_string()),
                _ => (false, text.clone()),
            };
            let coeff = if e.len() > 1 { format!("({})", text) } else { body };
            let op = match i {
                0 => String::new(),
                1 => sym.clone(),
                _ => format!("{}^{}", sym, i),
            };
            let piece = if i == 0 {
                coeff
            } else if coeff == "1" {
                op
            } else {
                format!("{}*{}", coeff, op)
            };
            if out.is_empty() {
                if neg {
                    out.push('-');
                }
            } else {
                out.push_str(if neg { " - " } else { " + " });
            }
            out.push_str(&piece);
        }
        if out.is_empty() {
            "0".into()
        } else {
            out
        }
    }

    /// Telescoper coefficients in the term ring.
    pub fn e_in(&self, v: &Vars) -> Vec<MultiPoly> {
        self.e.iter().map(|e| e.with_vars(v).expect("coefficients live in [ep, param]")).collect()
    }
}

impl fmt::Display for Annihilator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.operator_text())
    }
}

#[derive(Clone, Debug, Default)]
pub struct Stats {
    pub tried: Vec<(usize, usize)>,
    pub prechecks: usize,
    pub precheck_hits: usize,
    pub solves: usize,
    pub rejected: usize,
    pub build_time: Duration,
    pub precheck_time: Duration,
    pub solve_time: Duration,
    pub verify_time: Duration,
}

#[derive(Clone, Debug)]
pub struct TelescopeOutcome {
    pub result: Option<Annihilator>,
    pub stats: Stats,
    pub l_max: usize,
    pub degree_max: usize,
}

impl TelescopeOutcome {
    pub fn annihilator(self) -> Result<Annihilator> {
        self.result.ok_or(Error::NotFound {
            lmax: self.l_max,
            degmax: self.degree_max,
        })
    }
}

/// Everything needed to turn a nullspace vector back into a certificate.
struct Assembly {
    sys: LinearSystem,
    params: Vars,
    /// `(j, monomial in x)` per ansatz column; telescoper columns follow.
    ansatz_cols: Vec<(usize, Vec<u32>)>,
    /// `r_j β_j / f_j` per variable.
    cert_factor: Vec<RatFunc>,
}

fn params_of(term: &HyperTerm) -> Vars {
    if term.uses_eps() {
        vars(&[EPS, term.param.as_str()])
    } else {
        vars(&[term.param.as_str()])
    }
}

fn monomials_upto(d: usize, delta: usize) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    for total in 0..=delta as u32 {
        let mut cur = vec![0u32; d];
        gen(d, 0, total, &mut cur, &mut out);
    }
    fn gen(d: usize, pos: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if pos + 1 == d {
            cur[pos] = left;
            out.push(cur.clone());
            return;
        }
        for k in (0..=left).rev() {
            cur[pos] = k;
            gen(d, pos + 1, left - k, cur, out);
        }
    }
    out
}

fn add_factor(term: &HyperTerm, cfg: &AnsatzConfig, j: usize) -> Result<MultiPoly> {
    if cfg.add_factors.is_empty() {
        return Ok(MultiPoly::one(term.vars()));
    }
    if cfg.add_factors.len() != term.dim() {
        return Err(Error::Input(format!(
            "{} add-factors given for {} integration variables",
            cfg.add_factors.len(),
            term.dim()
        )));
    }
    let f = cfg.add_factors[j].with_vars(term.vars())?;
    if f.is_zero() {
        return Err(Error::Input("add-factor is zero".into()));
    }
    Ok(f)
}

fn assemble(term: &HyperTerm, l: usize, delta: usize, cfg: &AnsatzConfig) -> Result<Assembly> {
    let v = term.vars().clone();
    let d = term.dim();
    let xs: Vec<usize> = (0..d).map(|j| term.var_idx(j)).collect();
    let params = params_of(term);
    let fs: Vec<MultiPoly> = (0..d).map(|j| add_factor(term, cfg, j)).collect::<Result<_>>()?;
    let mut m = MultiPoly::one(&v);
    for f in &fs {
        if !f.is_constant() {
            m = lcm(&m, &f.pow(2));
        }
    }
    let mut ab: Vec<(MultiPoly, MultiPoly)> = Vec::with_capacity(d);
    let mut cert_factor = Vec::with_capacity(d);
    for j in 0..d {
        let idx = xs[j];
        let ld = term.log_derivative_at(l, j);
        let (q, r) = (ld.q, ld.r);
        let f = &fs[j];
        let mf2 = m.exact_div(&f.pow(2))?;
        let mf = m.exact_div(f)?;
        let mut a = &mf2 * &(&(f * &(&q + &r.derivative(idx))) - &(&r * &f.derivative(idx)));
        let mut b = &mf * &r;
        let mut beta = MultiPoly::one(&v);
        if cfg.ansatz == Ansatz::BoundaryVanishing {
            let x = MultiPoly::var_at(&v, idx);
            for end in [&term.intvars[j].lower, &term.intvars[j].upper] {
                // An end where r_j already vanishes needs no extra factor.
                if let Some(c) = end.finite().filter(|c| !r.substitute(idx, c).is_zero()) {
                    beta = &beta * &(&x - &MultiPoly::constant(&v, c.clone()));
                }
            }
            a = &(&a * &beta) + &(&b * &beta.derivative(idx));
            b = &b * &beta;
        }
        cert_factor.push(RatFunc::new(&r * &beta, f.clone())?);
        ab.push((a, b));
    }
    let cs = term.hbar_all(l);
    let monos = monomials_upto(d, delta);
    let mut unknowns = Vec::new();
    let mut ansatz_cols = Vec::new();
    for j in 0..d {
        for mo in &monos {
            unknowns.push(Unknown::Ansatz {
                var: j,
                monomial: mo.clone(),
            });
            ansatz_cols.push((j, mo.clone()));
        }
    }
    let first_tele = unknowns.len();
    unknowns.extend((0..=l).map(Unknown::Tele));

    let mut rows: BTreeMap<Vec<u32>, BTreeMap<usize, MultiPoly>> = BTreeMap::new();
    let mut put = |key: Vec<u32>, col: usize, c: MultiPoly| {
        let row = rows.entry(key).or_default();
        match row.get_mut(&col) {
            Some(x) => *x = &*x + &c,
            None => {
                row.insert(col, c);
            }
        }
    };
    let splits: Vec<(BTreeMap<Vec<u32>, MultiPoly>, BTreeMap<Vec<u32>, MultiPoly>)> =
        ab.iter().map(|(a, b)| (a.split(&xs, &params), b.split(&xs, &params))).collect();
    for (col, (j, mo)) in ansatz_cols.iter().enumerate() {
        let (sa, sb) = &splits[*j];
        for (mu, c) in sa {
            let key: Vec<u32> = mu.iter().zip(mo).map(|(a, b)| a + b).collect();
            put(key, col, c.clone());
        }
        if mo[*j] > 0 {
            let k = int(mo[*j] as i64);
            for (mu, c) in sb {
                let mut key: Vec<u32> = mu.iter().zip(mo).map(|(a, b)| a + b).collect();
                key[*j] -= 1;
                put(key, col, c.scale(&k));
            }
        }
    }
    for (i, ci) in cs.iter().enumerate() {
        let rhs = &m * ci;
        for (mu, c) in rhs.split(&xs, &params) {
            put(mu, first_tele + i, -c);
        }
    }
    let mut sys = LinearSystem::new(params.clone(), unknowns);
    for (_, row) in rows {
        sys.push_row(row.into_iter().map(|(c, p)| (c, RatFunc::from_poly(p))).collect());
    }
    Ok(Assembly {
        sys,
        params,
        ansatz_cols,
        cert_factor,
    })
}

/// The ansatz system for order `l` and total degree bound `delta` of the
/// polynomials `X_j`. Columns: coefficients of `X_1, …, X_d` (monomials in
/// graded order), then `e_0, …, e_L`.
pub fn build_system(term: &HyperTerm, l: usize, delta: usize, cfg: &AnsatzConfig) -> Result<LinearSystem> {
    Ok(assemble(term, l, delta, cfg)?.sys)
}

/// Seed mixed from the canonical input and the caller's seed.
pub fn derive_seed(term: &HyperTerm, seed: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(term.mode.name().as_bytes());
    h.update(term.param.as_bytes());
    h.update(term.to_string().as_bytes());
    for iv in &term.intvars {
        h.update(format!("|{}:{}:{}", iv.name, iv.lower, iv.upper).as_bytes());
    }
    h.update(seed.to_le_bytes());
    let out = h.finalize();
    u64::from_le_bytes(out[..8].try_into().unwrap())
}

/// Number of independent telescopers the modular image admits at `(l, δ)`.
pub fn precheck(term: &HyperTerm, l: usize, delta: usize, cfg: &AnsatzConfig) -> Result<usize> {
    let asm = assemble(term, l, delta, cfg)?;
    let (sys, _) = reduce(&asm.sys);
    let seed = derive_seed(term, cfg.seed) ^ ((l as u64) << 32 | delta as u64);
    Ok(KernelBox::new(&sys, seed, |u| matches!(u, Unknown::Tele(_)))?.targets.len())
}

/// Restricts to the columns connected to telescoper columns.
fn reduce(sys: &LinearSystem) -> (LinearSystem, Vec<usize>) {
    let tele: Vec<usize> = (0..sys.ncols()).filter(|&c| matches!(sys.unknowns()[c], Unknown::Tele(_))).collect();
    let keep = sys.component_of(&tele);
    (sys.restrict(&keep), keep)
}

/// Searches orders `0..=l_max` and, for each, degree bounds `0..=degree_max`.
pub fn find_telescoper(term: &HyperTerm, cfg: &AnsatzConfig) -> Result<TelescopeOutcome> {
    if cfg.mode != term.mode {
        return Err(Error::Input("configuration mode differs from the term's mode".into()));
    }
    let base_seed = derive_seed(term, cfg.seed);
    let mut stats = Stats::default();
    for l in 0..=cfg.l_max {
        for delta in 0..=cfg.degree_max {
            stats.tried.push((l, delta));
            let t0 = Instant::now();
            let asm = assemble(term, l, delta, cfg)?;
            let (sys, keep) = reduce(&asm.sys);
            stats.build_time += t0.elapsed();
            let seed = base_seed ^ ((l as u64) << 32 | delta as u64);
            let t1 = Instant::now();
            let kb = KernelBox::new(&sys, seed, |u| matches!(u, Unknown::Tele(_)))?;
            stats.prechecks += 1;
            stats.precheck_time += t1.elapsed();
            if kb.targets.is_empty() {
                continue;
            }
            stats.precheck_hits += 1;
            let t2 = Instant::now();
            let kernel = kb.solve()?;
            stats.solves += 1;
            stats.solve_time += t2.elapsed();
            let mut best: Option<((u32, usize), Annihilator)> = None;
            for vec in kernel {
                let mut full = vec![RatFunc::zero(&asm.params); asm.sys.ncols()];
                for (k, &c) in keep.iter().enumerate() {
                    full[c] = vec[k].clone();
                }
                let ann = annihilator_from(term, l, cfg, &asm, &full)?;
                let key = (
                    ann.e[l].degree_in(PARAM_IDX).unwrap_or(0),
                    ann.e.iter().map(|e| e.size()).sum::<usize>(),
                );
                if best.as_ref().is_none_or(|(k, _)| key < *k) {
                    best = Some((key, ann));
                }
            }
            let Some((_, ann)) = best else { continue };
            let t3 = Instant::now();
            let ok = verify_certificate(term, &ann);
            stats.verify_time += t3.elapsed();
            if ok {
                return Ok(TelescopeOutcome {
                    result: Some(ann),
                    stats,
                    l_max: cfg.l_max,
                    degree_max: cfg.degree_max,
                });
            }
            stats.rejected += 1;
        }
    }
    Ok(TelescopeOutcome {
        result: None,
        stats,
        l_max: cfg.l_max,
        degree_max: cfg.degree_max,
    })
}

/// Normalizes a nullspace vector and assembles the certificate.
fn annihilator_from(
    term: &HyperTerm,
    l: usize,
    cfg: &AnsatzConfig,
    asm: &Assembly,
    vec: &[RatFunc],
) -> Result<Annihilator> {
    let params = &asm.params;
    let first_tele = asm.ansatz_cols.len();
    let es = &vec[first_tele..];
    // Clear denominators, then remove the common content.
    let mut den = MultiPoly::one(params);
    for e in es {
        if !e.is_zero() {
            den = lcm(&den, e.den());
        }
    }
    let polys: Vec<MultiPoly> = es.iter().map(|e| (e.num() * &den).exact_div(e.den())).collect::<std::result::Result<_, _>>()?;
    let mut g = MultiPoly::zero(params);
    for p in &polys {
        g = gcd(&g, p);
    }
    let polys: Vec<MultiPoly> = polys.iter().map(|p| p.exact_div(&g)).collect::<std::result::Result<_, _>>()?;
    let mut c: Option<Rational> = None;
    for p in polys.iter().filter(|p| !p.is_zero()) {
        let pc = p.rational_content();
        c = Some(match c {
            None => pc,
            Some(c) => rat_gcd(&c, &pc),
        });
    }
    let mut c = c.ok_or_else(|| Error::Input("trivial telescoper".into()))?;
    let lead = polys.iter().rev().find(|p| !p.is_zero()).unwrap();
    if lead.leading_coefficient().is_negative() {
        c = -c;
    }
    let inv = c.recip();
    let cv = term.coeff_vars();
    let e: Vec<MultiPoly> = polys.iter().map(|p| p.scale(&inv).with_vars(&cv)).collect::<std::result::Result<_, _>>()?;
    // Scale factor applied to the raw vector: den / (g c).
    let lambda = RatFunc::new(den.scale(&inv), g)?;
    let tv = term.vars();
    let lambda_t = lambda.with_vars(tv)?;
    let hf = term.hbar_over_f(l);
    let mut certificate = Vec::with_capacity(term.dim());
    for j in 0..term.dim() {
        let x = ansatz_poly(term, asm, vec, j)?;
        let r = &(&(&x * &lambda_t) * &asm.cert_factor[j]) * &hf;
        certificate.push(r);
    }
    Ok(Annihilator {
        l,
        e,
        certificate,
        ansatz: cfg.ansatz,
        mode: term.mode,
        param: term.param.clone(),
    })
}

/// `X_j` as a rational function over the term ring.
fn ansatz_poly(term: &HyperTerm, asm: &Assembly, vec: &[RatFunc], j: usize) -> Result<RatFunc> {
    let tv = term.vars();
    let params = &asm.params;
    let mut den = MultiPoly::one(params);
    for (col, (jj, _)) in asm.ansatz_cols.iter().enumerate() {
        if *jj == j && !vec[col].is_zero() {
            den = lcm(&den, vec[col].den());
        }
    }
    let mut num = MultiPoly::zero(tv);
    for (col, (jj, mo)) in asm.ansatz_cols.iter().enumerate() {
        if *jj != j || vec[col].is_zero() {
            continue;
        }
        let coeff = (vec[col].num() * &den).exact_div(vec[col].den())?.with_vars(tv)?;
        let mut e = vec![0u32; tv.len()];
        for (k, &ex) in mo.iter().enumerate() {
            e[term.var_idx(k)] = ex;
        }
        num = &num + &coeff.mul_monomial(&Monomial(e), &int(1));
    }
    Ok(RatFunc::new(num, den.with_vars(tv)?)?)
}

/// `D^i F / F` (continuous) or `F(n+i) / F(n)` (discrete) for `i = 0..=l`.
pub fn shift_ratios(term: &HyperTerm, l: usize) -> Vec<RatFunc> {
    let v = term.vars();
    let mut out = vec![RatFunc::one(v)];
    match term.mode {
        Mode::Continuous => {
            let lf = term.log_derivative_f(PARAM_IDX);
            for i in 0..l {
                let prev = &out[i];
                out.push(&prev.derivative(PARAM_IDX) + &(prev * &lf));
            }
        }
        Mode::Discrete => {
            let st = RatFunc::new(term.s.clone(), term.t.clone()).expect("t nonzero");
            for i in 1..=l {
                let pi = term.p.shift(PARAM_IDX, &int(i as i64));
                let r = RatFunc::new(pi, term.p.clone()).expect("P nonzero");
                out.push(&r * &st.pow(i as i32).expect("s/t power"));
            }
        }
    }
    out
}

/// Exact check of `Σ e_i ρ_i = Σ_j (D_j R_j + R_j D_j F / F)`, i.e. the
/// telescoping identity divided by `F`.
pub fn verify_certificate(term: &HyperTerm, ann: &Annihilator) -> bool {
    if ann.mode != term.mode || ann.certificate.len() != term.dim() || ann.e.len() != ann.l + 1 {
        return false;
    }
    if ann.e.iter().all(|e| e.is_zero()) {
        return false;
    }
    let v = term.vars();
    let es = ann.e_in(v);
    let ratios = shift_ratios(term, ann.l);
    let mut lhs = RatFunc::zero(v);
    for (e, r) in es.iter().zip(&ratios) {
        if !e.is_zero() {
            lhs = &lhs + &r.mul_poly(e);
        }
    }
    let mut rhs = RatFunc::zero(v);
    for (j, r) in ann.certificate.iter().enumerate() {
        if r.is_zero() {
            continue;
        }
        let idx = term.var_idx(j);
        let lf = term.log_derivative_f(idx);
        rhs = &rhs + &(&r.derivative(idx) + &(r * &lf));
    }
    (&lhs - &rhs).is_zero()
}

/// The annihilator's coefficients and certificate with `e_0` perturbed by
/// `delta`; used as a falsification control.
pub fn perturbed(ann: &Annihilator, k: usize, delta: &Rational) -> Annihilator {
    let mut out = ann.clone();
    let c = MultiPoly::constant(out.e[k].vars(), delta.clone());
    out.e[k] = &out.e[k] + &c;
    if out.e[k].is_zero() {
        out.e[k] = c;
    }
    out
}
