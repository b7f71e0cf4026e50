use std::collections::BTreeMap;

use proptest::prelude::*;

use hyperaz_core::arith::{gcd, int, rat, vars, Monomial, MultiPoly, Vars};
use hyperaz_core::epsexpand::SeriesInX;
use hyperaz_core::hyperterm::{IntVar, Mode};
use hyperaz_core::io::{format_init, parse_init};
use hyperaz_core::parse::{parse_poly, parse_term};
use hyperaz_core::telescope::{find_telescoper, verify_certificate, Ansatz, AnsatzConfig};

fn xy() -> Vars {
    vars(&["x", "y"])
}

fn poly() -> impl Strategy<Value = MultiPoly> {
    prop::collection::vec((0u32..4, 0u32..3, -9i64..10, 1i64..4), 0..5).prop_map(|ts| {
        let v = xy();
        MultiPoly::from_terms(&v, ts.into_iter().map(|(a, b, p, q)| (Monomial(vec![a, b]), rat(p, q))))
    })
}

fn nonzero_poly() -> impl Strategy<Value = MultiPoly> {
    poly().prop_filter("nonzero", |p| !p.is_zero())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn display_parses_back(p in poly()) {
        prop_assert_eq!(parse_poly(&p.to_string(), &xy()).unwrap(), p);
    }

    #[test]
    fn product_divides_exactly(a in poly(), b in nonzero_poly()) {
        prop_assert_eq!((&a * &b).exact_div(&b).unwrap(), a);
    }

    #[test]
    fn common_factor_divides_gcd(a in nonzero_poly(), b in nonzero_poly(), c in nonzero_poly()) {
        let g = gcd(&(&a * &c), &(&b * &c));
        prop_assert!(g.try_div(&c).is_some(), "{} does not divide {}", c, g);
    }

    #[test]
    fn shift_is_invertible(p in poly(), k in -5i64..6) {
        prop_assert_eq!(p.shift(0, &int(k)).shift(0, &int(-k)), p);
    }

    #[test]
    fn leibniz_rule(a in poly(), b in poly()) {
        let lhs = (&a * &b).derivative(0);
        let rhs = &(&a.derivative(0) * &b) + &(&a * &b.derivative(0));
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn init_text_round_trips(rows in prop::collection::btree_map(-2i64..3, (-1i64..3, prop::collection::vec((-50i64..50, 1i64..30), 1..5)), 0..4)) {
        let init: BTreeMap<i64, SeriesInX> = rows
            .into_iter()
            .map(|(k, (s, cs))| (k, SeriesInX::new(s, cs.into_iter().map(|(p, q)| rat(p, q)).collect())))
            .collect();
        prop_assert_eq!(parse_init(&format_init(&init)).unwrap(), init);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// Every returned certificate is exact, whatever the ansatz.
    #[test]
    fn beta_certificates_verify(a in 0u32..3, b in 0u32..3, vanish in any::<bool>()) {
        let text = format!("x^(n+{})*(1-x)^{}", a, b);
        let h = parse_term(&text, Mode::Discrete, "n", vec![IntVar::finite("x", int(0), int(1))]).unwrap();
        let ansatz = if vanish { Ansatz::BoundaryVanishing } else { Ansatz::Plain };
        let cfg = AnsatzConfig::new(Mode::Discrete).with_ansatz(ansatz);
        let ann = find_telescoper(&h, &cfg).unwrap().result.unwrap();
        prop_assert!(verify_certificate(&h, &ann), "{}", text);
    }
}
