//! Numeric oracles: quadrature of hyperexponential integrals and residual
//! checks of recurrences and differential equations.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::arith::poly::rational_to_f64;
use crate::arith::{MultiPoly, Rational};
use crate::boundary::BoundaryIntegral;
use crate::error::{Error, Result};
use crate::hyperterm::{Bound, HyperTerm, Mode, PARAM_IDX};
use crate::par;
use crate::telescope::Annihilator;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Adaptive,
    MonteCarlo,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QuadratureResult {
    pub value: f64,
    pub abs_error_estimate: f64,
    pub method: Method,
    pub evaluations: u64,
}

/// Values of the parameter and of ε.
#[derive(Clone, Debug, PartialEq)]
pub struct Assignment {
    pub param: Rational,
    pub eps: Rational,
}

impl Assignment {
    pub fn new(param: Rational, eps: Rational) -> Self {
        Assignment { param, eps }
    }

    pub fn param(param: Rational) -> Self {
        Assignment { param, eps: Rational::from_integer(0.into()) }
    }
}

#[derive(Clone, Debug)]
pub struct QuadOptions {
    pub target_rel_err: f64,
    /// `None` picks adaptive for d ≤ 3 and Monte Carlo above.
    pub method: Option<Method>,
    pub samples: u64,
    pub seed: u64,
    /// Interval budget of one adaptive 1-d integration.
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions { target_rel_err: 1e-10, method: None, samples: 1_000_000, seed: 0, max_intervals: 400 }
    }
}

/// Polynomial prepared for fast f64 evaluation.
#[derive(Clone, Debug)]
struct FPoly(Vec<(f64, Vec<(usize, i32)>)>);

impl FPoly {
    fn new(p: &MultiPoly) -> Self {
        FPoly(
            p.terms()
                .map(|(m, c)| {
                    let e = m.0.iter().enumerate().filter(|(_, e)| **e > 0).map(|(i, e)| (i, *e as i32)).collect();
                    (rational_to_f64(c), e)
                })
                .collect(),
        )
    }

    fn eval(&self, x: &[f64]) -> f64 {
        self.0
            .iter()
            .map(|(c, m)| m.iter().fold(*c, |acc, (i, e)| acc * x[*i].powi(*e)))
            .sum()
    }
}

/// `x^e` with the conventions of the term representation: signed for
/// integer exponents, `|x|^e` otherwise.
fn real_pow(x: f64, e: f64) -> f64 {
    if e == e.round() && e.abs() < 1e9 {
        x.powi(e as i32)
    } else {
        x.abs().powf(e)
    }
}

/// The integrand at fixed parameter and ε.
#[derive(Clone, Debug)]
struct Integrand {
    p: FPoly,
    a: FPoly,
    b: FPoly,
    powers: Vec<(FPoly, f64)>,
    s: FPoly,
    t: FPoly,
    n: f64,
    discrete: bool,
    point: Vec<f64>,
}

impl Integrand {
    fn new(term: &HyperTerm, param: f64, eps: f64) -> Self {
        let mut point = vec![0.0; 2 + term.dim()];
        point[0] = eps;
        point[PARAM_IDX] = param;
        Integrand {
            p: FPoly::new(&term.p),
            a: FPoly::new(&term.a),
            b: FPoly::new(&term.b),
            powers: term.powers.iter().map(|(s, e)| (FPoly::new(s), e.eval_f64(eps, param))).collect(),
            s: FPoly::new(&term.s),
            t: FPoly::new(&term.t),
            n: param,
            discrete: term.mode == Mode::Discrete,
            point,
        }
    }

    fn eval(&self, xs: &[f64]) -> f64 {
        let mut pt = self.point.clone();
        pt[2..].copy_from_slice(xs);
        let mut v = self.p.eval(&pt);
        if v == 0.0 {
            return 0.0;
        }
        if !self.a.0.is_empty() {
            v *= (self.a.eval(&pt) / self.b.eval(&pt)).exp();
        }
        for (s, e) in &self.powers {
            v *= real_pow(s.eval(&pt), *e);
        }
        if self.discrete {
            v *= real_pow(self.s.eval(&pt) / self.t.eval(&pt), self.n);
        }
        v
    }
}

/// One piece of an integration range, `x = from + dir·y` with `y ≥ 0`
/// parametrized by `v ∈ (0, 1)`.
#[derive(Clone, Debug)]
struct Piece {
    from: Rational,
    dir: i64,
    /// `y = len·v^p`; `None` for `y = w/(1-w)`, `w = v^p`.
    len: Option<f64>,
    p: f64,
}

impl Piece {
    /// Whether `v` maps to a point that rounds onto the end at `v = 0`.
    fn at_end(&self, v: f64) -> bool {
        v.powf(self.p) < 1e-15
    }

    fn map(&self, v: f64) -> (f64, f64) {
        let (w, dw) = if self.p == 1.0 { (v, 1.0) } else { (v.powf(self.p), self.p * v.powf(self.p - 1.0)) };
        match self.len {
            Some(len) => (len * w, len * dw),
            None => {
                let q = 1.0 - w;
                (w / q, dw / (q * q))
            }
        }
    }
}

/// One product of pieces, with the integrand written in the local
/// coordinates `y` so that points close to an end keep full precision.
#[derive(Clone, Debug)]
struct Cell {
    g: Integrand,
    pieces: Vec<Piece>,
}

fn cells(term: &HyperTerm, param: f64, eps: f64, pcs: &[Vec<Piece>]) -> Vec<Cell> {
    let mut combos: Vec<Vec<Piece>> = vec![Vec::new()];
    for ps in pcs {
        combos = combos
            .into_iter()
            .flat_map(|c| {
                ps.iter().map(move |p| {
                    let mut c = c.clone();
                    c.push(p.clone());
                    c
                })
            })
            .collect();
    }
    combos
        .into_iter()
        .map(|pieces| {
            let mut t = term.clone();
            let v = t.vars().clone();
            for (j, pc) in pieces.iter().enumerate() {
                let idx = t.var_idx(j);
                let sub = &MultiPoly::constant(&v, pc.from.clone())
                    + &MultiPoly::var_at(&v, idx).scale(&Rational::from_integer(pc.dir.into()));
                let go = |q: &MultiPoly| q.compose(idx, &sub);
                t.p = go(&t.p);
                t.a = go(&t.a);
                t.b = go(&t.b);
                t.s = go(&t.s);
                t.t = go(&t.t);
                for (s, _) in t.powers.iter_mut() {
                    *s = go(s);
                }
            }
            Cell { g: Integrand::new(&t, param, eps), pieces }
        })
        .collect()
}

/// Local exponent of the integrand at `x_j = c`.
fn end_exponent(term: &HyperTerm, j: usize, c: &Rational, eps: f64, n: f64) -> f64 {
    let idx = term.var_idx(j);
    let ord = |p: &MultiPoly| {
        let k = p.vanishing_order(idx, c);
        if k == u32::MAX {
            0.0
        } else {
            k as f64
        }
    };
    let mut nu = ord(&term.p);
    for (s, e) in &term.powers {
        nu += e.eval_f64(eps, n) * ord(s);
    }
    if term.mode == Mode::Discrete {
        nu += n * (ord(&term.s) - ord(&term.t));
    }
    nu
}

/// Algebraic growth exponent as `x_j → ±∞` when the exponential factor
/// does not depend on `x_j`.
fn infinity_exponent(term: &HyperTerm, j: usize, eps: f64, n: f64) -> Option<f64> {
    let idx = term.var_idx(j);
    if term.a.depends_on(idx) || term.b.depends_on(idx) {
        return None;
    }
    let deg = |p: &MultiPoly| p.degree_in(idx).unwrap_or(0) as f64;
    let mut nu = deg(&term.p);
    for (s, e) in &term.powers {
        nu += e.eval_f64(eps, n) * deg(s);
    }
    if term.mode == Mode::Discrete {
        nu += n * (deg(&term.s) - deg(&term.t));
    }
    Some(nu)
}

const TOL: f64 = 1e-12;

/// Power for the substitution at an end with local exponent `nu`.
fn end_power(nu: f64, what: &str) -> Result<f64> {
    if nu <= -1.0 + TOL {
        return Err(Error::DivergentIntegral(format!("exponent {} at {}", nu, what)));
    }
    let integral = nu >= -TOL && (nu - nu.round()).abs() < TOL;
    // Twice the power that makes the end regular, so that logarithmic
    // factors from lower-dimensional corners are damped as well.
    Ok(if integral || nu >= 0.0 { 1.0 } else { 2.0 / (1.0 + nu) })
}

fn pieces(term: &HyperTerm, eps: f64, n: f64) -> Result<Vec<Vec<Piece>>> {
    let mut out = Vec::new();
    for (j, iv) in term.intvars.iter().enumerate() {
        let name = &iv.name;
        let inf_check = || -> Result<()> {
            if let Some(nu) = infinity_exponent(term, j, eps, n) {
                if nu >= -1.0 - TOL {
                    return Err(Error::DivergentIntegral(format!("growth {} as {} → ∞", nu, name)));
                }
            }
            Ok(())
        };
        let piece = |from: &Rational, dir: i64, len: Option<f64>, p: f64| Piece { from: from.clone(), dir, len, p };
        let zero = Rational::from_integer(0.into());
        let v = match (&iv.lower, &iv.upper) {
            (Bound::Finite(l), Bound::Finite(u)) => {
                let pl = end_power(end_exponent(term, j, l, eps, n), &format!("{} = {}", name, l))?;
                let pu = end_power(end_exponent(term, j, u, eps, n), &format!("{} = {}", name, u))?;
                let len = rational_to_f64(&(u - l));
                if pl == 1.0 && pu == 1.0 {
                    vec![piece(l, 1, Some(len), 1.0)]
                } else {
                    vec![piece(l, 1, Some(len / 2.0), pl), piece(u, -1, Some(len / 2.0), pu)]
                }
            }
            (Bound::Finite(l), Bound::PosInf) => {
                inf_check()?;
                let p = end_power(end_exponent(term, j, l, eps, n), &format!("{} = {}", name, l))?;
                vec![piece(l, 1, None, p)]
            }
            (Bound::NegInf, Bound::Finite(u)) => {
                inf_check()?;
                let p = end_power(end_exponent(term, j, u, eps, n), &format!("{} = {}", name, u))?;
                vec![piece(u, -1, None, p)]
            }
            (Bound::NegInf, Bound::PosInf) => {
                inf_check()?;
                vec![piece(&zero, 1, None, 1.0), piece(&zero, -1, None, 1.0)]
            }
            _ => return Err(Error::Input(format!("empty range for {}", name))),
        };
        out.push(v);
    }
    Ok(out)
}

// Gauss–Kronrod 7/15 on [-1, 1].
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// Kronrod nodes of `[a, b]` and their Kronrod / Gauss weights.
fn gk_nodes(a: f64, b: f64) -> [(f64, f64, f64); 15] {
    let c = (a + b) / 2.0;
    let h = (b - a) / 2.0;
    let mut out = [(0.0, 0.0, 0.0); 15];
    for k in 0..7 {
        let wg = if k % 2 == 1 { WG[k / 2] * h } else { 0.0 };
        out[2 * k] = (c - h * XGK[k], WGK[k] * h, wg);
        out[2 * k + 1] = (c + h * XGK[k], WGK[k] * h, wg);
    }
    out[14] = (c, WGK[7] * h, WG[3] * h);
    out
}

#[derive(Debug)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Segment {
    fn eq(&self, o: &Self) -> bool {
        self.err == o.err
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Segment {
    fn cmp(&self, o: &Self) -> Ordering {
        self.err.total_cmp(&o.err).then(o.a.total_cmp(&self.a))
    }
}

/// Integrand values with their own error estimates (from inner levels).
type Eval<'a> = dyn Fn(f64) -> Result<(f64, f64, u64)> + Sync + 'a;

struct Acc {
    evaluations: u64,
}

fn gk_segment(f: &Eval, a: f64, b: f64, parallel: bool, acc: &mut Acc) -> Result<Segment> {
    let nodes = gk_nodes(a, b);
    let vals: Vec<Result<(f64, f64, u64)>> =
        if parallel { par::map(&nodes, |(x, _, _)| f(*x)) } else { nodes.iter().map(|(x, _, _)| f(*x)).collect() };
    let (mut k, mut g, mut inner) = (0.0, 0.0, 0.0);
    for ((_, wk, wg), v) in nodes.iter().zip(vals) {
        let (y, e, cnt) = v?;
        if !y.is_finite() {
            return Err(Error::DivergentIntegral(format!("non-finite integrand near {}", (a + b) / 2.0)));
        }
        acc.evaluations += cnt;
        k += wk * y;
        g += wg * y;
        inner += wk.abs() * e;
    }
    Ok(Segment { a, b, value: k, err: (k - g).abs() + inner })
}

/// Globally adaptive Gauss–Kronrod on `(0, 1)`.
fn adaptive(f: &Eval, rel: f64, max_intervals: usize, parallel: bool, acc: &mut Acc) -> Result<(f64, f64)> {
    let mut heap = BinaryHeap::new();
    heap.push(gk_segment(f, 0.0, 1.0, parallel, acc)?);
    let mut history: Vec<f64> = Vec::new();
    loop {
        let total: f64 = heap.iter().map(|s| s.value).sum();
        let err: f64 = heap.iter().map(|s| s.err).sum();
        if err <= rel * total.abs() || err < 1e-300 || heap.len() >= max_intervals {
            if heap.len() >= max_intervals && err > 1e3 * rel * total.abs().max(1e-300) {
                // Persistent growth under refinement signals a non-integrable point.
                let n = history.len();
                if n > 40 && history[n - 1].abs() > 1e3 * history[n / 2].abs().max(1e-300) {
                    return Err(Error::DivergentIntegral("refinement does not converge".into()));
                }
            }
            return Ok((total, err));
        }
        history.push(total);
        let s = heap.pop().expect("non-empty");
        let m = (s.a + s.b) / 2.0;
        heap.push(gk_segment(f, s.a, m, parallel, acc)?);
        heap.push(gk_segment(f, m, s.b, parallel, acc)?);
    }
}

fn adaptive_cell(cell: &Cell, opts: &QuadOptions, parallel: bool) -> Result<(f64, f64, u64)> {
    fn level(cell: &Cell, ys: &[f64], opts: &QuadOptions, parallel: bool) -> Result<(f64, f64, u64)> {
        let piece = &cell.pieces[ys.len()];
        let f = |v: f64| -> Result<(f64, f64, u64)> {
            let (y, jac) = piece.map(v);
            let mut zs = ys.to_vec();
            zs.push(y);
            if zs.len() == cell.pieces.len() {
                let val = cell.g.eval(&zs) * jac;
                // The substituted integrand is bounded there; the value is
                // lost to underflow of y, not to a singularity.
                Ok((if !val.is_finite() && piece.at_end(v) { 0.0 } else { val }, 0.0, 1))
            } else {
                let (val, e, c) = level(cell, &zs, opts, false)?;
                Ok((val * jac, e * jac.abs(), c))
            }
        };
        let mut acc = Acc { evaluations: 0 };
        let (val, err) = adaptive(&f, opts.target_rel_err, opts.max_intervals, parallel, &mut acc)?;
        Ok((val, err, acc.evaluations))
    }
    level(cell, &[], opts, parallel)
}

fn adaptive_nd(cells: &[Cell], opts: &QuadOptions) -> Result<QuadratureResult> {
    let single = cells.len() == 1;
    let parts = par::map(cells, |c| adaptive_cell(c, opts, single));
    let (mut value, mut err, mut evaluations) = (0.0, 0.0, 0);
    for p in parts {
        let (v, e, c) = p?;
        value += v;
        err += e;
        evaluations += c;
    }
    Ok(QuadratureResult { value, abs_error_estimate: err, method: Method::Adaptive, evaluations })
}

const BATCH: u64 = 1 << 14;

fn monte_carlo(cells: &[Cell], opts: &QuadOptions) -> Result<QuadratureResult> {
    let batches = opts.samples.div_ceil(BATCH).max(1);
    let weight = cells.len() as f64;
    let sums = par::map_range(batches as usize, |b| {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        rng.set_stream(b as u64);
        let (mut s1, mut s2) = (0.0, 0.0);
        let mut ys = vec![0.0; cells[0].pieces.len()];
        for _ in 0..BATCH {
            let cell = &cells[rng.gen_range(0..cells.len())];
            let mut w = weight;
            for (k, piece) in cell.pieces.iter().enumerate() {
                let v: f64 = rng.gen_range(f64::EPSILON..1.0);
                let (y, jac) = piece.map(v);
                ys[k] = y;
                w *= jac;
            }
            let y = if w == 0.0 { 0.0 } else { cell.g.eval(&ys) * w };
            s1 += y;
            s2 += y * y;
        }
        (s1, s2)
    });
    let n = (batches * BATCH) as f64;
    let (s1, s2) = sums.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    if !s1.is_finite() || !s2.is_finite() {
        return Err(Error::DivergentIntegral("non-finite Monte Carlo sample".into()));
    }
    let mean = s1 / n;
    let var = (s2 / n - mean * mean).max(0.0);
    Ok(QuadratureResult {
        value: mean,
        abs_error_estimate: (var / n).sqrt(),
        method: Method::MonteCarlo,
        evaluations: batches * BATCH,
    })
}

fn integrate_f64(term: &HyperTerm, param: f64, eps: f64, opts: &QuadOptions) -> Result<QuadratureResult> {
    if term.dim() == 0 {
        let value = Integrand::new(term, param, eps).eval(&[]);
        if !value.is_finite() {
            return Err(Error::DivergentIntegral("non-finite value".into()));
        }
        return Ok(QuadratureResult { value, abs_error_estimate: 0.0, method: Method::Adaptive, evaluations: 1 });
    }
    let cs = cells(term, param, eps, &pieces(term, eps, param)?);
    let method = opts.method.unwrap_or(if term.dim() <= 3 { Method::Adaptive } else { Method::MonteCarlo });
    match method {
        Method::Adaptive => adaptive_nd(&cs, opts),
        Method::MonteCarlo => monte_carlo(&cs, opts),
    }
}

/// Numeric value of `∫ term` over its box at the given parameter and ε.
pub fn numeric_integrate(term: &HyperTerm, at: &Assignment, opts: &QuadOptions) -> Result<QuadratureResult> {
    integrate_f64(term, rational_to_f64(&at.param), rational_to_f64(&at.eps), opts)
}

/// `Σ sign · ∫ term / den` over the boundary integrals, with its error.
pub fn boundary_sum(rhs: &[BoundaryIntegral], param: f64, eps: f64, opts: &QuadOptions) -> Result<(f64, f64)> {
    let (mut v, mut e) = (0.0, 0.0);
    for b in rhs {
        let q = integrate_f64(&b.term, param, eps, opts)?;
        let den = if b.den.is_one() { 1.0 } else { b.den.eval_f64(&[eps, param]) };
        v += b.sign as f64 * q.value / den;
        e += q.abs_error_estimate / den.abs();
    }
    Ok((v, e))
}

/// Finite-difference weights (Fornberg): `w[k][j]` is the weight of
/// `f(xs[j])` in the `k`-th derivative at `z`.
pub fn fd_weights(z: f64, xs: &[f64], m: usize) -> Vec<Vec<f64>> {
    let n = xs.len();
    let mut c = vec![vec![0.0; n]; m + 1];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = xs[0] - z;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - z;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// `(Î, Î', …, Î^{(l)})` in the parameter at `at`, by central differences
/// on quadrature values with step `(relative quadrature error)^{1/(l+1)}`.
pub fn param_derivatives(term: &HyperTerm, at: &Assignment, l: usize, opts: &QuadOptions) -> Result<Vec<f64>> {
    derivatives(term, rational_to_f64(&at.param), rational_to_f64(&at.eps), l, opts)
}

fn derivatives(term: &HyperTerm, x: f64, eps: f64, l: usize, opts: &QuadOptions) -> Result<Vec<f64>> {
    if l == 0 {
        return Ok(vec![integrate_f64(term, x, eps, opts)?.value]);
    }
    let q = integrate_f64(term, x, eps, opts)?;
    let rel = (q.abs_error_estimate / q.value.abs().max(1e-300)).max(opts.target_rel_err).max(1e-15);
    let h = rel.powf(1.0 / (l as f64 + 1.0)) * x.abs().max(1.0);
    let m = l.div_ceil(2) + 1;
    let xs: Vec<f64> = (-(m as i64)..=m as i64).map(|k| x + k as f64 * h).collect();
    let vals: Vec<f64> = par::map(&xs, |&p| if p == x { Ok(q.value) } else { integrate_f64(term, p, eps, opts).map(|r| r.value) })
        .into_iter()
        .collect::<Result<_>>()?;
    let w = fd_weights(x, &xs, l);
    Ok((0..=l).map(|k| w[k].iter().zip(&vals).map(|(a, b)| a * b).sum()).collect())
}

/// Right-hand side of the checked equation.
#[derive(Clone, Copy)]
pub enum Rhs<'a> {
    Zero,
    Boundary(&'a [BoundaryIntegral]),
    /// Known values as a function of `(param, ε)`.
    Values(&'a (dyn Fn(f64, f64) -> f64 + Sync)),
}

/// Largest relative residual of `Σ e_i ∂^i Î − rhs` over the points, scaled
/// by `max_i |e_i ∂^i Î|`.
pub fn check_annihilator_numeric(
    term: &HyperTerm,
    ann: &Annihilator,
    rhs: Rhs,
    points: &[Assignment],
    opts: &QuadOptions,
) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for at in points {
        let (x, eps) = (rational_to_f64(&at.param), rational_to_f64(&at.eps));
        let vals = match term.mode {
            Mode::Discrete => (0..=ann.l)
                .map(|i| integrate_f64(term, x + i as f64, eps, opts).map(|q| q.value))
                .collect::<Result<Vec<_>>>()?,
            Mode::Continuous => derivatives(term, x, eps, ann.l, opts)?,
        };
        let terms: Vec<f64> = ann.e.iter().zip(&vals).map(|(e, v)| e.eval_f64(&[eps, x]) * v).collect();
        let mut scale = terms.iter().fold(0.0f64, |m, t| m.max(t.abs()));
        // At a zero of the integral where the other coefficients vanish too,
        // every term is roundoff; measure against the operator's size instead.
        let coarse = ann.e.iter().fold(0.0f64, |m, e| m.max(e.eval_f64(&[eps, x]).abs()))
            * vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale < 1e-8 * coarse {
            scale = coarse;
        }
        let r = match rhs {
            Rhs::Zero => 0.0,
            Rhs::Boundary(b) => boundary_sum(b, x, eps, opts)?.0,
            Rhs::Values(f) => f(x, eps),
        };
        let res = (terms.iter().sum::<f64>() - r).abs();
        worst = worst.max(if scale > 0.0 { res / scale } else { res });
    }
    Ok(worst)
}


#[cfg(test)]
mod broadhurst {
    use super::*;
    use crate::arith::{int, rat};
    use crate::parse::parse_poly;
    use crate::hyperterm::IntVar;
    use crate::parse::parse_term;
    use crate::telescope::{perturbed, Ansatz};

    fn ode(ops: &[&str]) -> Annihilator {
        let v = crate::arith::vars(&["ep", "h"]);
        Annihilator {
            l: ops.len() - 1,
            e: ops.iter().map(|s| parse_poly(s, &v).unwrap()).collect(),
            certificate: Vec::new(),
            ansatz: Ansatz::Plain,
            mode: Mode::Continuous,
            param: "h".into(),
        }
    }

    #[test]
    fn third_order_ode_residual() {
        let iv = vec![IntVar::finite("u", int(0), int(1)), IntVar::finite("z", int(0), int(1))];
        let h = parse_term("1/sqrt((1-h*u)*(z-1)*(1+(u-1)*z)*(h*(u-1)*(z-1)+z-u*z-1))", Mode::Continuous, "h", iv).unwrap();
        let ann = ode(&["2*h-1", "2*(1-7*h+7*h^2)", "6*(h-1)*h*(2*h-1)", "2*(h-1)^2*h^2"]);
        let pts: Vec<_> = [rat(1, 10), rat(1, 5), rat(3, 10)].into_iter().map(Assignment::param).collect();
        let opts = QuadOptions { target_rel_err: 1e-12, ..Default::default() };
        // The equation is inhomogeneous; the right-hand side is known in
        // closed form.
        let rhs = |h: f64, _: f64| 2.0 * (h * h + 4.0 * h - 4.0) / ((1.0 - h).sqrt() * (2.0 - h).powi(2));
        let r = check_annihilator_numeric(&h, &ann, Rhs::Values(&rhs), &pts, &opts).unwrap();
        assert!(r <= 1e-4, "{}", r);
        let r = check_annihilator_numeric(&h, &ann, Rhs::Zero, &pts, &opts).unwrap();
        assert!(r > 1e-2, "{}", r);
        let r = check_annihilator_numeric(&h, &perturbed(&ann, 0, &int(1)), Rhs::Values(&rhs), &pts, &opts).unwrap();
        assert!(r > 1e-2, "{}", r);
    }
}
