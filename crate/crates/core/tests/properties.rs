//! Property tests for the jet arithmetic and the expression DSL.

use approx::assert_relative_eq;
use laginv_core::{OrderLimit, PowerSeries, TransformExpr};
use num::complex::Complex64;
use proptest::prelude::*;

fn coeff() -> impl Strategy<Value = f64> {
    prop_oneof![
        3 => -10.0..10.0f64,
        1 => Just(0.0),
    ]
}

fn series(order: usize) -> impl Strategy<Value = PowerSeries> {
    prop::collection::vec(coeff(), order + 1..order + 2)
        .prop_map(|c| PowerSeries::new(0.0, c).unwrap())
}

fn max_abs(s: &PowerSeries) -> f64 {
    s.coeffs().iter().fold(0.0f64, |m, c| m.max(c.abs()))
}

proptest! {
    #[test]
    fn ring_axioms(a in series(8), b in series(8), c in series(8)) {
        let scale = max_abs(&a).max(max_abs(&b)).max(max_abs(&c)).max(1.0);
        let tol = 1e-13 * scale * scale * scale;

        let ab = a.add(&b).unwrap();
        let ba = b.add(&a).unwrap();
        prop_assert_eq!(ab.coeffs(), ba.coeffs());

        let mul_ab = a.mul(&b).unwrap();
        let mul_ba = b.mul(&a).unwrap();
        for (x, y) in mul_ab.coeffs().iter().zip(mul_ba.coeffs()) {
            prop_assert!((x - y).abs() <= tol);
        }

        let assoc_l = a.mul(&b).unwrap().mul(&c).unwrap();
        let assoc_r = a.mul(&b.mul(&c).unwrap()).unwrap();
        for (x, y) in assoc_l.coeffs().iter().zip(assoc_r.coeffs()) {
            prop_assert!((x - y).abs() <= tol);
        }

        let dist_l = a.mul(&b.add(&c).unwrap()).unwrap();
        let dist_r = a.mul(&b).unwrap().add(&a.mul(&c).unwrap()).unwrap();
        for (x, y) in dist_l.coeffs().iter().zip(dist_r.coeffs()) {
            prop_assert!((x - y).abs() <= tol);
        }
    }

    #[test]
    fn div_mul_roundtrip(a in series(8), mut b in series(8), head in 1e-6..10.0f64, sign in prop::bool::ANY) {
        // keep the divisor's constant term away from zero
        let coeffs = {
            let mut c = b.coeffs().to_vec();
            c[0] = if sign { head } else { -head };
            c
        };
        b = PowerSeries::new(0.0, coeffs).unwrap();
        let q = a.div(&b).unwrap();
        let back = q.mul(&b).unwrap();
        let scale = max_abs(&a).max(max_abs(&q) * max_abs(&b)).max(1.0);
        for (x, y) in back.coeffs().iter().zip(a.coeffs()) {
            prop_assert!((x - y).abs() <= 1e-12 * scale, "{x} vs {y}");
        }
    }

    #[test]
    fn compose_agrees_with_pointwise(outer_c in prop::collection::vec(-3.0..3.0f64, 9),
                                     inner_tail in prop::collection::vec(-2.0..2.0f64, 8),
                                     center in -2.0..2.0f64) {
        let outer = PowerSeries::new(center, outer_c).unwrap();
        let mut inner_coeffs = vec![center];
        inner_coeffs.extend(inner_tail);
        let inner = PowerSeries::new(0.0, inner_coeffs).unwrap();
        let composed = outer.compose(&inner).unwrap();
        let t = 0.01;
        let direct = outer.eval(inner.eval(t));
        prop_assert!((composed.eval(t) - direct).abs() <= 1e-10 * direct.abs().max(1.0));
    }

    #[test]
    fn derivatives_of_polynomial_jets_are_exact(coeffs in prop::collection::vec(-9i32..=9, 1..=9)) {
        // integer-coefficient polynomial of degree <= 8: jets carry its
        // derivatives exactly
        let poly: Vec<f64> = coeffs.iter().map(|&c| c as f64).collect();
        let text = poly
            .iter()
            .enumerate()
            .map(|(k, c)| format!("({c})*s^{k}"))
            .collect::<Vec<_>>()
            .join("+");
        let expr = TransformExpr::parse(&text).unwrap();
        let jet = expr.eval_jet(0.0, poly.len() - 1).unwrap();
        for (k, &c) in poly.iter().enumerate() {
            let mut fact = 1.0f64;
            for j in 2..=k {
                fact *= j as f64;
            }
            prop_assert_eq!(jet.derivative_at(k).unwrap(), fact * c);
        }
    }

    #[test]
    fn parser_is_total(input in "\\PC*") {
        // never panics; returns either an AST or a positioned error
        let _ = TransformExpr::parse(&input);
    }

    #[test]
    fn print_parse_roundtrip(depth in 0u32..4, seed in prop::num::u64::ANY) {
        // generate a random AST through the grammar itself
        let text = random_expr_text(depth, seed);
        if let Ok(parsed) = TransformExpr::parse(&text) {
            let printed = parsed.to_canonical_string();
            let again = TransformExpr::parse(&printed).unwrap();
            prop_assert_eq!(parsed.ast(), again.ast(), "printed: {}", printed);
        }
    }
}

fn random_expr_text(depth: u32, seed: u64) -> String {
    let mut s = seed;
    let mut next = move || {
        s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (s >> 33) as u32
    };
    fn gen(depth: u32, next: &mut impl FnMut() -> u32) -> String {
        if depth == 0 {
            return match next() % 3 {
                0 => "s".to_string(),
                1 => format!("{}", next() % 100),
                _ => format!("{}.{}", next() % 10, next() % 100),
            };
        }
        let a = gen(depth - 1, next);
        let b = gen(depth - 1, next);
        match next() % 8 {
            0 => format!("{a}+{b}"),
            1 => format!("{a}-{b}"),
            2 => format!("{a}*{b}"),
            3 => format!("{a}/{b}"),
            4 => format!("({a})^{}", next() % 5),
            5 => format!("-{a}"),
            6 => format!("exp({a})"),
            _ => format!("log({a})"),
        }
    }
    gen(depth, &mut next)
}

/// Jet/pointwise consistency: summing the order-10 jet at a small offset
/// matches direct complex evaluation.
#[test]
fn jet_pointwise_consistency_on_corpus() {
    let corpus = [
        ("1/(s+1)", 1.0),
        ("1/s^2", 1.0),
        ("exp(-s)", 0.5),
        ("s/(s+1)", 2.0),
        ("1/(s*(s^2-2*s+2))", 1.5),
        ("2/s^3-3/s^2+1/s", 1.0),
        ("exp(-s)/s", 2.0),
        ("log(s+1)", 1.0),
    ];
    for (text, center) in corpus {
        let e = TransformExpr::parse(text).unwrap();
        let jet = e.eval_jet(center, 10).unwrap();
        let x = center + 1e-3;
        let direct = e.eval_complex(Complex64::new(x, 0.0)).unwrap().re;
        assert_relative_eq!(jet.eval(x), direct, max_relative = 1e-12);
    }
}

/// The default cap rejects oversized jets; an explicit limit admits them.
#[test]
fn order_limit_is_enforced() {
    let e = TransformExpr::parse("1/(s+1)").unwrap();
    assert!(e.eval_jet(1.0, 513).is_err());
    assert!(e
        .eval_jet_with(1.0, 513, OrderLimit::new(1024).unwrap())
        .is_ok());
    assert!(OrderLimit::new(4097).is_err());
}
