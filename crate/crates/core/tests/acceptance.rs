//! Acceptance checks, one PASS/FAIL line per criterion.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hyperaz_core::arith::poly::rational_to_f64;
use hyperaz_core::arith::{int, rat, vars, MultiPoly};
use hyperaz_core::boundary::{boundary_terms, divide_and_conquer, RecursionNode};
use hyperaz_core::epsexpand::{expand_integral, EpsSeries, SeriesInX, Strategy};
use hyperaz_core::hyperterm::{Bound, HyperTerm, IntVar, Mode};
use hyperaz_core::io::Document;
use hyperaz_core::par;
use hyperaz_core::parse::{parse_poly, parse_ratfunc, parse_term};
use hyperaz_core::telescope::{find_telescoper, perturbed, verify_certificate, Annihilator, Ansatz, AnsatzConfig};
use hyperaz_core::verify::{
    boundary_sum, check_annihilator_numeric, param_derivatives, Assignment, Method, QuadOptions, Rhs,
};

struct Report {
    failed: Vec<usize>,
}

impl Report {
    fn line(&mut self, n: usize, ok: bool, what: &str) {
        println!("criterion {}: {} {}", n, if ok { "PASS" } else { "FAIL" }, what);
        if !ok {
            self.failed.push(n);
        }
    }
}

fn unit_box(names: &[&str], lo: i64, hi: i64) -> Vec<IntVar> {
    names.iter().map(|n| IntVar::finite(n, int(lo), int(hi))).collect()
}

fn half_line(name: &str) -> Vec<IntVar> {
    vec![IntVar::new(name, Bound::Finite(int(0)), Bound::PosInf)]
}

/// Whether `a = λ b` coefficientwise for one rational `λ ≠ 0`.
fn proportional(a: &[MultiPoly], b: &[MultiPoly]) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let Some(i) = b.iter().position(|p| !p.is_zero()) else { return false };
    if a[i].is_zero() {
        return false;
    }
    let lambda = a[i].leading_coefficient() / b[i].leading_coefficient();
    a.iter().zip(b).all(|(x, y)| *x == y.scale(&lambda))
}

fn coeffs(texts: &[&str], param: &str) -> Vec<MultiPoly> {
    let v = vars(&["ep", param]);
    texts.iter().map(|t| parse_poly(t, &v).unwrap()).collect()
}

fn broadhurst() -> (HyperTerm, AnsatzConfig) {
    let h = parse_term(
        "1/sqrt((1-h*u)*(z-1)*(1+(u-1)*z)*(h*(u-1)*(z-1)+z-u*z-1))",
        Mode::Continuous,
        "h",
        unit_box(&["u", "z"], 0, 1),
    )
    .unwrap();
    let mut cfg = AnsatzConfig::new(Mode::Continuous);
    cfg.add_factors = vec![parse_poly("(1-u)^3*(1-z)^6", h.vars()).unwrap(), parse_poly("(1-z)^3", h.vars()).unwrap()];
    (h, cfg)
}

fn four_dim() -> HyperTerm {
    parse_term("exp(-x*(w1*w2+w3*w4))", Mode::Continuous, "x", unit_box(&["w1", "w2", "w3", "w4"], -1, 1)).unwrap()
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let out = f();
    (out, t.elapsed())
}

fn criterion_1(r: &mut Report) -> Option<Annihilator> {
    let (h, cfg) = broadhurst();
    let (out, dt) = timed(|| find_telescoper(&h, &cfg));
    let expected = coeffs(&["2*h-1", "2*(1-7*h+7*h^2)", "6*(h-1)*h*(2*h-1)", "2*(h-1)^2*h^2"], "h");
    let ann = out.ok().and_then(|o| o.result);
    let ok = ann.as_ref().is_some_and(|a| a.l == 3 && proportional(&a.e, &expected)) && dt <= Duration::from_secs(120);
    r.line(1, ok, &format!("Broadhurst order-3 ODE ({:.1} s, limit 120 s)", dt.as_secs_f64()));
    if let Some(a) = &ann {
        println!("    {}", a);
    }
    ann
}

fn criterion_2(r: &mut Report) -> Option<Annihilator> {
    let h = four_dim();
    let cfg = AnsatzConfig::new(Mode::Continuous).with_ansatz(Ansatz::BoundaryVanishing);
    let (out, dt) = timed(|| find_telescoper(&h, &cfg));
    let expected = coeffs(
        &[
            "32*(4*x-16*x^3+9*x^5)",
            "-4*(27-148*x^2+598*x^4-63*x^6)",
            "-4*(117*x-568*x^3+556*x^5-9*x^7)",
            "-(478*x^2-2919*x^4+603*x^6)",
            "-5*(34*x^3-247*x^5+9*x^7)",
            "-(23*x^4-189*x^6)",
            "-(x^5-9*x^7)",
        ],
        "x",
    );
    let ann = out.ok().and_then(|o| o.result);
    let homogeneous = ann.as_ref().is_some_and(|a| boundary_terms(&h, a).is_ok_and(|b| b.is_empty()));
    let ok = ann.as_ref().is_some_and(|a| a.l == 6 && proportional(&a.e, &expected))
        && homogeneous
        && dt <= Duration::from_secs(600);
    r.line(2, ok, &format!("direct 4-dim order-6 ODE ({:.1} s, limit 600 s)", dt.as_secs_f64()));
    ann
}

fn criterion_3(r: &mut Report) -> Option<RecursionNode> {
    let h = four_dim();
    let (tree, dt) = timed(|| divide_and_conquer(&h, &AnsatzConfig::new(Mode::Continuous), h.dim()));
    let tree = match tree {
        Ok(t) => t,
        Err(e) => {
            r.line(3, false, &format!("recursive 4-dim: {}", e));
            return None;
        }
    };
    let ann = tree.annihilator.as_ref().unwrap();
    let shape = proportional(&ann.e, &coeffs(&["2", "x"], "x")) && tree.rhs.len() <= 8;
    let opts = QuadOptions { target_rel_err: 1e-10, method: Some(Method::Adaptive), ..Default::default() };
    let mut worst: f64 = 0.0;
    for x in [rat(1, 2), int(1), int(2)] {
        let at = Assignment::param(x.clone());
        let d = param_derivatives(&h, &at, 1, &opts).unwrap();
        let xf = rational_to_f64(&x);
        let lhs: f64 = ann.e.iter().zip(&d).map(|(e, v)| e.eval_f64(&[0.0, xf]) * v).sum();
        let (rhs, _) = boundary_sum(&tree.rhs, xf, 0.0, &opts).unwrap();
        worst = worst.max((lhs - rhs).abs() / lhs.abs());
    }
    let ok = shape && worst <= 1e-4;
    r.line(
        3,
        ok,
        &format!(
            "recursive 4-dim root {} with {} boundary integrals, max relative mismatch {:.1e} ({:.1} s)",
            ann,
            tree.rhs.len(),
            worst,
            dt.as_secs_f64()
        ),
    );
    Some(tree)
}

fn expansion_integral() -> HyperTerm {
    parse_term(
        "exp(x*y*w)*((1-w)*x*(1-y))^(ep/2)*(1-w)*y*(1-x)*z*(1-z)",
        Mode::Continuous,
        "w",
        unit_box(&["x", "y", "z"], 0, 1),
    )
    .unwrap()
}

fn closed_form_init() -> BTreeMap<i64, SeriesInX> {
    let w = [
        "8/(3*(2+ep)^2*(4+ep)^2)",
        "-4*(28+ep*(12+ep))/(3*(2+ep)*(4+ep)^2*(6+ep)^2)",
        "(-1664+ep*(12+ep*(12+ep))*(72+ep*(16+ep)))/(3*(2+ep)*(4+ep)^2*(6+ep)^2*(8+ep)^2)",
    ];
    let s: Vec<EpsSeries> = w
        .iter()
        .map(|t| EpsSeries::from_ratfunc(&parse_ratfunc(t, &vars(&["ep"])).unwrap(), 0, 1).unwrap())
        .collect();
    (0..=1).map(|k| (k, SeriesInX::new(0, s.iter().map(|e| e.coeff(k)).collect()))).collect()
}

fn criterion_4(r: &mut Report) {
    let h = expansion_integral();
    let init = closed_form_init();
    let direct = AnsatzConfig::new(Mode::Continuous).with_ansatz(Ansatz::BoundaryVanishing);
    let (d, td) = timed(|| expand_integral(&h, (0, 1), 4, &init, Strategy::Direct, &direct));
    let (rc, tr) =
        timed(|| expand_integral(&h, (0, 1), 4, &init, Strategy::Recursive, &AnsatzConfig::new(Mode::Continuous)));
    let (d, rc) = match (d, rc) {
        (Ok(d), Ok(rc)) => (d, rc),
        (d, rc) => {
            r.line(4, false, &format!("expansion failed: {:?} / {:?}", d.err(), rc.err()));
            return;
        }
    };
    // The formula's own ε⁰ values at w^0..w^2, and its ε¹ constant term.
    let formula_ok = init[&0].coeffs == vec![rat(1, 24), rat(-7, 216), rat(-13, 1728)] && init[&1].coeff(0) == rat(-1, 16);
    let e0 = d.order(0).unwrap();
    let e1 = d.order(1).unwrap();
    let matches_formula = (0..=2).all(|j| e0.coeff(j) == init[&0].coeff(j)) && e1.coeff(0) == rat(-1, 16);
    let agree = d.entries == rc.entries;
    r.line(
        4,
        formula_ok && matches_formula && agree,
        &format!("eps-expansion, direct {:.1} s, recursive {:.1} s, strategies agree: {}", td.as_secs_f64(), tr.as_secs_f64(), agree),
    );
    println!("    ep^0: {}", e0);
    println!("    ep^1: {}", e1);
    println!("    note: the w^2 coefficient of the closed-form initial series at ep=0 is -1664/221184 = -13/1728");
}

/// Curated terms with their ansatz configuration.
fn curated() -> Vec<(&'static str, HyperTerm, AnsatzConfig)> {
    let d = |a| AnsatzConfig::new(Mode::Discrete).with_ansatz(a);
    let c = |a| AnsatzConfig::new(Mode::Continuous).with_ansatz(a);
    let pt = |e: &str, m, p: &str, iv| parse_term(e, m, p, iv).unwrap();
    vec![
        ("x^n", pt("x^n", Mode::Discrete, "n", unit_box(&["x"], 0, 1)), d(Ansatz::BoundaryVanishing)),
        ("x^n plain", pt("x^n", Mode::Discrete, "n", unit_box(&["x"], 0, 1)), d(Ansatz::Plain)),
        ("x^n(1-x)^n", pt("x^n*(1-x)^n", Mode::Discrete, "n", unit_box(&["x"], 0, 1)), d(Ansatz::Plain)),
        ("x1^n e^-x1", pt("x1^n*exp(-x1)", Mode::Discrete, "n", half_line("x1")), d(Ansatz::Plain)),
        (
            "e^-xt^2",
            pt("exp(-x*t^2)", Mode::Continuous, "x", vec![IntVar::new("t", Bound::NegInf, Bound::PosInf)]),
            c(Ansatz::Plain),
        ),
        ("e^-xt", pt("exp(-x*t)", Mode::Continuous, "x", half_line("t")), c(Ansatz::Plain)),
        ("e^-xt on (0,1)", pt("exp(-x*t)", Mode::Continuous, "x", unit_box(&["t"], 0, 1)), c(Ansatz::Plain)),
        (
            "(x/(1-x))^n(1-x)^(ep/2)",
            pt("(x/(1-x))^n*(1-x)^(ep/2)", Mode::Discrete, "n", unit_box(&["x"], 0, 1)),
            d(Ansatz::Plain),
        ),
        ("x^n(1-x)^(1/2)", pt("x^n*(1-x)^(1/2)", Mode::Discrete, "n", unit_box(&["x"], 0, 1)), d(Ansatz::BoundaryVanishing)),
        ("x^n(1-x)^(ep/2)", pt("x^n*(1-x)^(ep/2)", Mode::Discrete, "n", unit_box(&["x"], 0, 1)), d(Ansatz::BoundaryVanishing)),
        ("(1+xt)^ep", pt("(1+x*t)^ep", Mode::Continuous, "x", unit_box(&["t"], 0, 1)), c(Ansatz::Plain)),
        (
            "x^n y^n (1-x-y)",
            pt("x^n*y^n*(1-x)*(1-y)", Mode::Discrete, "n", unit_box(&["x", "y"], 0, 1)),
            d(Ansatz::BoundaryVanishing),
        ),
    ]
}

/// Random terms from a fixed seed: small polynomial prefactors with Beta,
/// Gamma, exponential and algebraic factors.
fn random_corpus(count: usize, seed: u64) -> Vec<(String, HyperTerm, AnsatzConfig)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    while out.len() < count {
        let a = rng.gen_range(1..=3);
        let b = rng.gen_range(0..=2);
        let c = rng.gen_range(-2..=2i32);
        let k = rng.gen_range(0..=2);
        let poly = format!("({}+{}*x+{}*x^2)", a, b, c).replace("+-", "-");
        let (text, mode, param, iv) = match rng.gen_range(0..6) {
            0 => (format!("{}*x^n*(1-x)^{}", poly, k + 1), Mode::Discrete, "n", unit_box(&["x"], 0, 1)),
            1 => (format!("{}*x^n*exp(-{}*x)", poly, a), Mode::Discrete, "n", half_line("x")),
            2 => (format!("({}*x+{})^n*x^{}", a, b + 1, k), Mode::Discrete, "n", unit_box(&["x"], 0, 1)),
            3 => (
                format!("exp({}*a*t)*t^{}*(1-t)^{}", if c == 0 { 1 } else { c }, k, b),
                Mode::Continuous,
                "a",
                unit_box(&["t"], 0, 1),
            ),
            4 => (format!("(1+{}*a*t)^({}/2)*t^{}", a, 2 * c + 1, k), Mode::Continuous, "a", unit_box(&["t"], 0, 1)),
            _ => (format!("exp(-a*t^2)*t^{}*{}", 2 * k, poly.replace('x', "t")), Mode::Continuous, "a", half_line("t")),
        };
        let Ok(term) = parse_term(&text, mode, param, iv) else { continue };
        let ansatz = if rng.gen_bool(0.5) { Ansatz::Plain } else { Ansatz::BoundaryVanishing };
        let mut cfg = AnsatzConfig::new(mode).with_ansatz(ansatz).with_bounds(4, 8);
        cfg.seed = seed;
        out.push((format!("{} [{}]", text, ansatz.name()), term, cfg));
    }
    out
}

struct Computed {
    name: String,
    term: HyperTerm,
    ann: Option<Annihilator>,
}

fn criterion_5(r: &mut Report, heavy: &[(String, HyperTerm, Annihilator)]) -> Vec<Computed> {
    let mut done: Vec<Computed> = Vec::new();
    let mut returned = 0;
    let mut sound = 0;
    for (name, term, cfg) in curated() {
        let ann = find_telescoper(&term, &cfg).ok().and_then(|o| o.result);
        if let Some(a) = &ann {
            returned += 1;
            sound += verify_certificate(&term, a) as usize;
        } else {
            println!("    no telescoper for {}", name);
        }
        done.push(Computed { name: name.into(), term, ann });
    }
    for (name, term, ann) in heavy {
        returned += 1;
        sound += verify_certificate(term, ann) as usize;
        done.push(Computed { name: name.clone(), term: term.clone(), ann: Some(ann.clone()) });
    }
    let curated_returned = returned;
    let mut random_returned = 0;
    for (name, term, cfg) in random_corpus(24, 20261015) {
        let ann = find_telescoper(&term, &cfg).ok().and_then(|o| o.result);
        if let Some(a) = &ann {
            returned += 1;
            random_returned += 1;
            sound += verify_certificate(&term, a) as usize;
        } else {
            println!("    no telescoper within bounds for {}", name);
        }
        done.push(Computed { name, term, ann });
    }
    let ok = sound == returned && curated_returned >= 10 && random_returned >= 20;
    r.line(
        5,
        ok,
        &format!(
            "{}/{} certificates verified exactly ({} curated, {} random)",
            sound, returned, curated_returned, random_returned
        ),
    );
    done
}

fn criterion_6(r: &mut Report, corpus: &[Computed], bh_ann: Option<&Annihilator>) {
    let opts = QuadOptions::default();
    let eps = rat(1, 2);
    let mut exact_worst: f64 = 0.0;
    let mut exact_count = 0;
    let mut control_min = f64::INFINITY;
    let mut failures = Vec::new();
    for c in corpus {
        let Some(ann) = &c.ann else { continue };
        if c.term.dim() > 2 {
            println!("    not checked numerically: {} (order-{} derivatives of a {}-dim integral)", c.name, ann.l, c.term.dim());
            continue;
        }
        let rhs = match boundary_terms(&c.term, ann) {
            Ok(b) => b,
            Err(e) => {
                println!("    not checked against its boundary terms: {} ({})", c.name, e);
                continue;
            }
        };
        let points: Vec<Assignment> = match c.term.mode {
            Mode::Discrete => [1, 3, 7].iter().map(|&n| Assignment::new(int(n), eps.clone())).collect(),
            Mode::Continuous => [rat(1, 2), int(1), int(2)].into_iter().map(|x| Assignment::new(x, eps.clone())).collect(),
        };
        let res = check_annihilator_numeric(&c.term, ann, Rhs::Boundary(&rhs), &points, &opts);
        let ctl = check_annihilator_numeric(&c.term, &perturbed(ann, 0, &int(1)), Rhs::Boundary(&rhs), &points, &opts);
        match (res, ctl) {
            (Ok(res), Ok(ctl)) => {
                let limit = if c.term.mode == Mode::Discrete { 1e-8 } else { 1e-4 };
                if c.term.mode == Mode::Discrete {
                    exact_worst = exact_worst.max(res);
                    exact_count += 1;
                }
                control_min = control_min.min(ctl);
                if res > limit || ctl <= 1e-2 {
                    failures.push(format!("{}: residual {:.1e}, control {:.1e}", c.name, res, ctl));
                }
            }
            (a, b) => println!("    skipped {} (no convergent integral at the test points: {:?})", c.name, a.err().or(b.err())),
        }
    }
    if let Some(ann) = bh_ann {
        let (h, _) = broadhurst();
        let pts: Vec<_> = [rat(1, 10), rat(1, 5), rat(3, 10)].into_iter().map(Assignment::param).collect();
        let rhs = |h: f64, _: f64| 2.0 * (h * h + 4.0 * h - 4.0) / ((1.0 - h).sqrt() * (2.0 - h).powi(2));
        let scale = ann.e[0].leading_coefficient() / int(2);
        let rhs_scaled = |x: f64, e: f64| rational_to_f64(&scale) * rhs(x, e);
        let o = QuadOptions { target_rel_err: 1e-12, ..Default::default() };
        let res = check_annihilator_numeric(&h, ann, Rhs::Values(&rhs_scaled), &pts, &o).unwrap_or(f64::INFINITY);
        let ctl = check_annihilator_numeric(&h, &perturbed(ann, 0, &int(1)), Rhs::Values(&rhs_scaled), &pts, &o)
            .unwrap_or(0.0);
        println!("    Broadhurst ODE with its closed-form right-hand side: residual {:.1e}, control {:.1e}", res, ctl);
        control_min = control_min.min(ctl);
        if res > 1e-4 || ctl <= 1e-2 {
            failures.push(format!("Broadhurst: residual {:.1e}, control {:.1e}", res, ctl));
        }
    }
    for f in &failures {
        println!("    {}", f);
    }
    r.line(
        6,
        failures.is_empty() && exact_count > 0,
        &format!(
            "{} exact-value recurrences, worst residual {:.1e} (limit 1e-8); smallest perturbed residual {:.1e} (must exceed 1e-2)",
            exact_count, exact_worst, control_min
        ),
    );
}

/// Structured output of every corpus entry.
fn documents(corpus: &[(String, HyperTerm, AnsatzConfig)], tree_term: &HyperTerm) -> Vec<String> {
    let mut docs: Vec<String> = corpus
        .iter()
        .map(|(name, term, cfg)| match find_telescoper(term, cfg) {
            Ok(out) => {
                let stats = out.stats.clone();
                match out.result {
                    Some(a) => Document::new(name, term)
                        .with_annihilator(&a)
                        .with_boundary(boundary_terms(term, &a), term)
                        .map(|d| d.with_stats(&stats).to_json())
                        .unwrap_or_else(|e| e.to_string()),
                    None => format!("none {:?}", stats.tried),
                }
            }
            Err(e) => e.to_string(),
        })
        .collect();
    let tree = divide_and_conquer(tree_term, &AnsatzConfig::new(Mode::Continuous), tree_term.dim()).unwrap();
    docs.push(Document::new("caz-integrate", tree_term).with_tree(&tree).to_json());
    let h = expansion_integral();
    let e = expand_integral(&h, (0, 1), 4, &closed_form_init(), Strategy::Recursive, &AnsatzConfig::new(Mode::Continuous));
    docs.push(e.map(|e| Document::new("expand", &h).with_expansion(&e).to_json()).unwrap_or_else(|e| e.to_string()));
    docs
}

fn criterion_7(r: &mut Report) {
    let mut corpus: Vec<(String, HyperTerm, AnsatzConfig)> =
        curated().into_iter().map(|(n, t, c)| (n.to_string(), t, c)).collect();
    let (bh, bcfg) = broadhurst();
    corpus.push(("broadhurst".into(), bh, bcfg));
    corpus.push((
        "4-dim direct".into(),
        four_dim(),
        AnsatzConfig::new(Mode::Continuous).with_ansatz(Ansatz::BoundaryVanishing),
    ));
    corpus.extend(random_corpus(24, 20261015));
    let tree_term = four_dim();
    let (one, t1) = timed(|| par::with_threads(Some(1), || documents(&corpus, &tree_term)));
    let (four, t4) = timed(|| par::with_threads(Some(4), || documents(&corpus, &tree_term)));
    let same = one == four;
    let differing: Vec<usize> = (0..one.len()).filter(|&i| one[i] != four[i]).collect();
    r.line(
        7,
        same,
        &format!(
            "{} documents byte-identical with 1 and 4 threads ({:.1} s / {:.1} s){}",
            one.len(),
            t1.as_secs_f64(),
            t4.as_secs_f64(),
            if same { String::new() } else { format!("; differing: {:?}", differing) }
        ),
    );
}

fn main() -> ExitCode {
    let mut r = Report { failed: Vec::new() };
    let bh = criterion_1(&mut r);
    let d4 = criterion_2(&mut r);
    let _ = criterion_3(&mut r);
    criterion_4(&mut r);
    let mut heavy = Vec::new();
    if let Some(a) = &bh {
        heavy.push(("broadhurst".to_string(), broadhurst().0, a.clone()));
    }
    if let Some(a) = &d4 {
        heavy.push(("4-dim direct".to_string(), four_dim(), a.clone()));
    }
    let corpus = criterion_5(&mut r, &heavy);
    criterion_6(&mut r, &corpus, bh.as_ref());
    criterion_7(&mut r);
    println!("{} of 7 criteria pass; failing: {:?}", 7 - r.failed.len(), r.failed);
    // A FAIL line is the result. Set HYPERAZ_ACCEPTANCE_STRICT=1 to turn it into a failed run.
    if !r.failed.is_empty() && std::env::var("HYPERAZ_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
