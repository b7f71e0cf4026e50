//! Multivariate polynomial gcd over the rationals.
//!
//! The main route is a dense modular algorithm: images modulo word-sized
//! primes are computed by evaluation/interpolation, normalized by the gcd of
//! the leading coefficients, combined by Chinese remaindering and rational
//! reconstruction, and accepted only after exact trial division. Recursive
//! primitive remainder sequences remain as a fallback.

use std::collections::HashMap;

use num_bigint::BigInt;

use super::modular::{crt, inv_mod, mul_mod, primes, rational_mod, rational_reconstruct, sub_mod};
use super::poly::{Monomial, MultiPoly};
use super::reconstruct::{splitmix, ugcd, utrim};
use super::Rational;

/// Greatest common divisor, integral primitive with positive leading
/// coefficient. `gcd(0, 0) = 0`.
pub fn gcd(a: &MultiPoly, b: &MultiPoly) -> MultiPoly {
    if a.is_zero() {
        return b.primitive();
    }
    if b.is_zero() {
        return a.primitive();
    }
    if a.is_constant() || b.is_constant() {
        return MultiPoly::one(a.vars());
    }
    // Cheap exits when one divides the other.
    let (pa, pb) = (a.primitive(), b.primitive());
    if pa == pb {
        return pa;
    }
    if pa.len() <= pb.len() {
        if pb.try_div(&pa).is_some() {
            return pa;
        }
    } else if pa.try_div(&pb).is_some() {
        return pb;
    }
    gcd_inner(&pa, &pb).primitive()
}

/// The remainder-sequence algorithm, kept as a reference and fallback.
pub fn gcd_prs(a: &MultiPoly, b: &MultiPoly) -> MultiPoly {
    if a.is_zero() || b.is_zero() {
        return gcd(a, b);
    }
    gcd_rec(&a.primitive(), &b.primitive()).primitive()
}

fn gcd_inner(a: &MultiPoly, b: &MultiPoly) -> MultiPoly {
    if a.is_constant() || b.is_constant() {
        return MultiPoly::one(a.vars());
    }
    let sa = a.support();
    let sb = b.support();
    if let Some(&v) = sa.iter().find(|v| !sb.contains(v)) {
        return gcd(&content_in(a, v), b);
    }
    if let Some(&v) = sb.iter().find(|v| !sa.contains(v)) {
        return gcd(a, &content_in(b, v));
    }
    // Dense interpolation cost grows with the degrees of the other variables.
    let x = *sa
        .iter()
        .max_by_key(|&&i| (a.degree_in(i).unwrap().min(b.degree_in(i).unwrap()), std::cmp::Reverse(i)))
        .unwrap();
    let ca = content_in(a, x);
    let cb = content_in(b, x);
    let gc = gcd(&ca, &cb);
    let pa = a.exact_div(&ca).expect("content divides");
    let pb = b.exact_div(&cb).expect("content divides");
    let g = match modular_gcd(&pa, &pb, x, &sa) {
        Some(g) => g,
        None => gcd_rec(&pa, &pb),
    };
    (&gc * &g).primitive()
}

/// Sparse polynomial over `Z/pZ`; keys are exponents of `[x, y_1, …, y_r]`.
type Sp = HashMap<Vec<u32>, u64>;

fn to_sp(p: &MultiPoly, local: &[usize], prime: u64) -> Option<Sp> {
    let mut out = Sp::new();
    for (m, c) in p.terms() {
        let r = rational_mod(c, prime)?;
        if r != 0 {
            out.insert(local.iter().map(|&i| m.0[i]).collect(), r);
        }
    }
    Some(out)
}

fn deg_x(a: &Sp) -> Option<u32> {
    a.keys().map(|k| k[0]).max()
}

/// Substitutes `t` for the last variable.
fn subst_last(a: &Sp, t: u64, p: u64) -> Sp {
    let mut out = Sp::new();
    for (k, &c) in a {
        let (e, rest) = k.split_last().unwrap();
        let v = mul_mod(c, super::modular::pow_mod(t, *e as u64, p), p);
        let slot = out.entry(rest.to_vec()).or_insert(0);
        *slot = (*slot + v) % p;
    }
    out.retain(|_, c| *c != 0);
    out
}

fn to_dense_x(a: &Sp) -> Vec<u64> {
    let n = deg_x(a).map_or(0, |d| d as usize + 1);
    let mut v = vec![0; n];
    for (k, &c) in a {
        v[k[0] as usize] = c;
    }
    v
}

struct ImageCtx {
    p: u64,
    bounds: Vec<u32>,
    seed: u64,
}

impl ImageCtx {
    /// `γ · gcd(a, b) / lc_x(gcd)` modulo `p`, or `None` when no good
    /// evaluation points were found.
    fn image(&self, a: &Sp, b: &Sp, gamma: &Sp, r: usize, path: u64) -> Option<Sp> {
        if r == 0 {
            let g = ugcd(&to_dense_x(a), &to_dense_x(b), self.p);
            let gv = gamma.get(&vec![0u32]).copied().unwrap_or(0);
            let mut out = Sp::new();
            for (i, c) in g.iter().enumerate() {
                if *c != 0 {
                    out.insert(vec![i as u32], mul_mod(*c, gv, self.p));
                }
            }
            return Some(out);
        }
        let need = self.bounds[r - 1] as usize + 1;
        let (da, db) = (deg_x(a), deg_x(b));
        let mut pts: Vec<(u64, Sp)> = Vec::with_capacity(need);
        let mut best: Option<u32> = None;
        let mut attempt = 0u64;
        while pts.len() < need {
            attempt += 1;
            if attempt as usize > 3 * need + 24 {
                return None;
            }
            let h = splitmix(self.seed ^ splitmix(path.wrapping_mul(31).wrapping_add(attempt)));
            let t = 1 + h % (self.p - 1);
            if pts.iter().any(|(s, _)| *s == t) {
                continue;
            }
            let (at, bt, gt) = (subst_last(a, t, self.p), subst_last(b, t, self.p), subst_last(gamma, t, self.p));
            if deg_x(&at) != da || deg_x(&bt) != db || gt.is_empty() {
                continue;
            }
            let Some(g) = self.image(&at, &bt, &gt, r - 1, splitmix(path ^ t)) else { continue };
            let d = deg_x(&g).unwrap_or(0);
            match best {
                Some(bd) if d > bd => continue,
                Some(bd) if d < bd => pts.clear(),
                _ => {}
            }
            best = Some(d);
            pts.push((t, g));
        }
        Some(interpolate_last(&pts, self.p))
    }
}

/// Newton interpolation in a new last variable, coefficientwise.
fn interpolate_last(pts: &[(u64, Sp)], p: u64) -> Sp {
    let mut keys: Vec<&Vec<u32>> = pts.iter().flat_map(|(_, g)| g.keys()).collect();
    keys.sort();
    keys.dedup();
    let ts: Vec<u64> = pts.iter().map(|(t, _)| *t).collect();
    let mut out = Sp::new();
    for k in keys {
        let ys: Vec<u64> = pts.iter().map(|(_, g)| g.get(k).copied().unwrap_or(0)).collect();
        // Divided differences.
        let mut c = ys.clone();
        for j in 1..c.len() {
            for i in (j..c.len()).rev() {
                let num = sub_mod(c[i], c[i - 1], p);
                let den = sub_mod(ts[i], ts[i - j], p);
                c[i] = mul_mod(num, inv_mod(den, p), p);
            }
        }
        // Expand the Newton form into monomials.
        let mut poly: Vec<u64> = vec![0];
        for j in (0..c.len()).rev() {
            // poly = poly * (y - t_j) + c_j
            let mut next = vec![0u64; poly.len() + 1];
            for (i, &a) in poly.iter().enumerate() {
                next[i + 1] = (next[i + 1] + a) % p;
                next[i] = sub_mod(next[i], mul_mod(a, ts[j], p), p);
            }
            next[0] = (next[0] + c[j]) % p;
            poly = next;
        }
        for (e, &v) in utrim(poly).iter().enumerate() {
            if v != 0 {
                let mut key = k.clone();
                key.push(e as u32);
                out.insert(key, v);
            }
        }
    }
    out
}

const GCD_PRIMES: usize = 40;

/// Gcd of two polynomials primitive with respect to `x` and sharing the
/// support `vars`; `None` asks the caller to fall back.
fn modular_gcd(a: &MultiPoly, b: &MultiPoly, x: usize, vars: &[usize]) -> Option<MultiPoly> {
    let ys: Vec<usize> = vars.iter().copied().filter(|&v| v != x).collect();
    let mut local = vec![x];
    local.extend(&ys);
    let lca = a.as_univariate(x).pop().unwrap();
    let lcb = b.as_univariate(x).pop().unwrap();
    let gamma = gcd(&lca, &lcb);
    let bounds: Vec<u32> = ys
        .iter()
        .map(|&y| gamma.degree_in(y).unwrap_or(0) + a.degree_in(y).unwrap_or(0).min(b.degree_in(y).unwrap_or(0)))
        .collect();
    let seed = splitmix(a.len() as u64 ^ (b.len() as u64) << 20);
    let mut acc: Option<(HashMap<Vec<u32>, BigInt>, BigInt, u32)> = None;
    let mut last: Option<MultiPoly> = None;
    for (k, &p) in primes().iter().take(GCD_PRIMES).enumerate() {
        let (Some(ap), Some(bp), Some(gp)) = (to_sp(a, &local, p), to_sp(b, &local, p), to_sp(&gamma, &ys, p)) else {
            continue;
        };
        if deg_x(&ap) != a.degree_in(x) || deg_x(&bp) != b.degree_in(x) {
            continue;
        }
        // gamma keys lack the x slot; prepend a zero so substitution lines up.
        let gp: Sp = gp.into_iter().map(|(kk, c)| (std::iter::once(0).chain(kk).collect(), c)).collect();
        let ctx = ImageCtx { p, bounds: bounds.clone(), seed: splitmix(seed ^ k as u64) };
        let Some(img) = ctx.image(&ap, &bp, &gp, ys.len(), 0) else { continue };
        let dimg = deg_x(&img).unwrap_or(0);
        if dimg == 0 {
            // Primitive in x with a constant image gcd: coprime.
            return Some(MultiPoly::one(a.vars()));
        }
        let reset = match &acc {
            None => true,
            Some((_, _, d)) if dimg < *d => true,
            Some((_, _, d)) if dimg > *d => continue,
            _ => false,
        };
        if reset {
            let m: HashMap<Vec<u32>, BigInt> = img.into_iter().map(|(kk, c)| (kk, BigInt::from(c))).collect();
            acc = Some((m, BigInt::from(p), dimg));
        } else {
            let (m, modulus, _) = acc.as_mut().unwrap();
            let mut keys: Vec<Vec<u32>> = m.keys().cloned().collect();
            keys.extend(img.keys().filter(|kk| !m.contains_key(*kk)).cloned());
            for kk in keys {
                let r1 = m.get(&kk).cloned().unwrap_or_default();
                let r2 = img.get(&kk).copied().unwrap_or(0);
                m.insert(kk, crt(&r1, modulus, r2, p));
            }
            *modulus *= BigInt::from(p);
        }
        let (m, modulus, _) = acc.as_ref().unwrap();
        let mut terms = Vec::with_capacity(m.len());
        let mut ok = true;
        for (kk, r) in m {
            let Some(c) = rational_reconstruct(r, modulus) else {
                ok = false;
                break;
            };
            if c == Rational::default() {
                continue;
            }
            let mut e = vec![0u32; a.nvars()];
            for (slot, &v) in local.iter().enumerate() {
                e[v] = kk[slot];
            }
            terms.push((Monomial(e), c));
        }
        if !ok {
            last = None;
            continue;
        }
        let cand = MultiPoly::from_terms(a.vars(), terms);
        if last.as_ref() == Some(&cand) {
            let h = primitive_in(&cand, x);
            if a.try_div(&h).is_some() && b.try_div(&h).is_some() {
                return Some(h);
            }
        }
        last = Some(cand);
    }
    None
}

fn gcd_rec(a: &MultiPoly, b: &MultiPoly) -> MultiPoly {
    if a.is_zero() {
        return b.clone();
    }
    if b.is_zero() {
        return a.clone();
    }
    if a.is_constant() || b.is_constant() {
        return MultiPoly::one(a.vars());
    }
    let sa = a.support();
    let sb = b.support();
    // A variable present in only one argument cannot occur in the gcd.
    if let Some(&v) = sa.iter().find(|v| !sb.contains(v)) {
        return gcd_rec(&content_in(a, v), b);
    }
    if let Some(&v) = sb.iter().find(|v| !sa.contains(v)) {
        return gcd_rec(a, &content_in(b, v));
    }
    // Main variable: the one with the smallest maximal degree keeps the PRS short.
    let v = *sa
        .iter()
        .min_by_key(|&&i| a.degree_in(i).unwrap().max(b.degree_in(i).unwrap()))
        .unwrap();
    let ca = content_in(a, v);
    let cb = content_in(b, v);
    let g_cont = gcd_rec(&ca, &cb);
    let mut p = a.exact_div(&ca).expect("content divides");
    let mut q = b.exact_div(&cb).expect("content divides");
    if p.degree_in(v) < q.degree_in(v) {
        std::mem::swap(&mut p, &mut q);
    }
    loop {
        let r = p.pseudo_rem(&q, v);
        if r.is_zero() {
            break;
        }
        if r.degree_in(v) == Some(0) {
            q = MultiPoly::one(a.vars());
            break;
        }
        p = q;
        q = primitive_in(&r, v);
    }
    let g = primitive_in(&q, v);
    &g_cont * &g
}

/// Content with respect to the variable at `idx`: gcd of the coefficients.
pub fn content_in(p: &MultiPoly, idx: usize) -> MultiPoly {
    let coeffs = p.as_univariate(idx);
    let mut g = MultiPoly::zero(p.vars());
    for c in coeffs.iter().filter(|c| !c.is_zero()) {
        g = if g.is_zero() { c.primitive() } else { gcd(&g, c) };
        if g.is_one() {
            break;
        }
    }
    g
}

/// Primitive part with respect to the variable at `idx`, integer-normalized.
pub fn primitive_in(p: &MultiPoly, idx: usize) -> MultiPoly {
    if p.is_zero() {
        return p.clone();
    }
    let c = content_in(p, idx);
    p.exact_div(&c).expect("content divides").primitive()
}

pub fn lcm(a: &MultiPoly, b: &MultiPoly) -> MultiPoly {
    if a.is_zero() || b.is_zero() {
        return MultiPoly::zero(a.vars());
    }
    let g = gcd(a, b);
    (&a.exact_div(&g).expect("gcd divides") * b).primitive()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::poly::vars;

    #[test]
    fn gcd_common_root() {
        let v = vars(&["x"]);
        let x = MultiPoly::var(&v, "x").unwrap();
        let one = MultiPoly::one(&v);
        let a = &(&x * &x) - &one;
        let b = &(&(&x * &x) - &x.scale(&crate::arith::int(2))) + &one;
        assert_eq!(gcd(&a, &b).to_string(), "x - 1");
    }

    #[test]
    fn gcd_multivariate() {
        let v = vars(&["x", "y", "z"]);
        let x = MultiPoly::var(&v, "x").unwrap();
        let y = MultiPoly::var(&v, "y").unwrap();
        let z = MultiPoly::var(&v, "z").unwrap();
        let common = &(&x * &y) + &z;
        let a = &common * &(&x + &y);
        let b = &common * &(&(&y * &z) - &x);
        assert_eq!(gcd(&a, &b), common.primitive());
        assert!(gcd(&(&x + &y), &(&x - &y)).is_one());
    }

    #[test]
    fn gcd_is_primitive_and_positive() {
        let v = vars(&["x", "y"]);
        let x = MultiPoly::var(&v, "x").unwrap();
        let y = MultiPoly::var(&v, "y").unwrap();
        let g = &x - &y;
        let a = g.scale(&crate::arith::int(-6));
        let b = (&g * &(&x + &y)).scale(&crate::arith::rat(3, 4));
        assert_eq!(gcd(&a, &b).to_string(), "x - y");
    }

    #[test]
    fn modular_matches_prs() {
        use crate::arith::poly::vars;
        let v = vars(&["ep", "h", "u", "z"]);
        let p = |s: &str| crate::parse::parse_poly(s, &v).unwrap();
        let cases = [
            ("(1-h*u)^3*(z-1)^2*(u*z-z+1)", "(1-h*u)*(z-1)^5*(h+u+z)"),
            ("(1-u)^6*(1-z)^12", "(1-z)^6*(2*h-1)"),
            ("(ep*h+u)^2*(z+3*ep)", "(ep*h+u)*(z+3*ep)^3*(h-7)"),
            ("(h^2*u-3/2*z+ep)*(u+z)^4", "(h^2*u-3/2*z+ep)*(u-z)^4"),
            ("h*u+z", "h*u-z"),
        ];
        for (a, b) in cases {
            let (a, b) = (p(a), p(b));
            assert_eq!(gcd(&a, &b), gcd_prs(&a, &b), "{} / {}", a, b);
        }
    }
}
