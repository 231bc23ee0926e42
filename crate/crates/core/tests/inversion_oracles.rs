//! Oracle tests for the inversion engines: every expected value below is
//! either hand-derivable or produced by an independent closed form.

use approx::assert_relative_eq;
use laginv_core::{
    invert_bromwich, invert_cdf_probabilistic, invert_laguerre, invert_post_widder,
    phi_to_coeffs, DecayClass, OrderLimit, TransformExpr, Verdict,
};

fn expr(text: &str) -> TransformExpr {
    TransformExpr::parse(text).unwrap()
}

fn grid(a: f64, b: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|i| a + (b - a) * i as f64 / (count - 1) as f64)
        .collect()
}

fn lim() -> OrderLimit {
    OrderLimit::default()
}

/// The inverse does not depend on the expansion rate λ0.
#[test]
fn lambda0_invariance() {
    let xs = grid(0.1, 10.0, 60);
    for phi_text in ["1/(s+1)", "1/s^2", "1/(s+1)^2"] {
        let phi = expr(phi_text);
        let runs: Vec<Vec<f64>> = [0.5, 1.0, 2.0]
            .iter()
            .map(|&l0| {
                invert_laguerre(&phi, l0, 60, &xs, false, lim())
                    .unwrap()
                    .values
            })
            .collect();
        for i in 0..runs.len() {
            for j in i + 1..runs.len() {
                let worst = runs[i]
                    .iter()
                    .zip(&runs[j])
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0f64, f64::max);
                assert!(
                    worst <= 1e-6,
                    "{phi_text}: λ0 pair ({i},{j}) differ by {worst}"
                );
            }
        }
    }
}

/// Builds φ(s) = Σ u_k k!/s^{k+1} as expression text for a polynomial u.
fn polynomial_transform(coeffs: &[i64]) -> String {
    let mut terms = Vec::new();
    for (k, &c) in coeffs.iter().enumerate() {
        if c == 0 {
            continue;
        }
        let mut fact = 1u64;
        for j in 2..=k as u64 {
            fact *= j;
        }
        terms.push(format!("({})*{}/s^{}", c, fact, k + 1));
    }
    if terms.is_empty() {
        "0/s".to_string()
    } else {
        terms.join("+")
    }
}

fn eval_poly(coeffs: &[i64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c as f64)
}

/// The Laguerre inversion reproduces any polynomial exactly at N = deg.
#[test]
fn polynomial_exactness() {
    let xs = grid(0.1, 10.0, 50);
    let polys: [&[i64]; 5] = [
        &[3],
        &[1, -2],
        &[0, 0, 1],
        &[2, -1, 4, -3, 1],
        &[1, 2, -5, 3, 0, -2, 1, 0, 4],
    ];
    for coeffs in polys {
        let deg = coeffs.len() - 1;
        let phi = expr(&polynomial_transform(coeffs));
        let r = invert_laguerre(&phi, 1.0, deg, &xs, false, lim()).unwrap();
        let scale = xs
            .iter()
            .map(|&x| eval_poly(coeffs, x).abs())
            .fold(1.0f64, f64::max);
        for (x, v) in xs.iter().zip(&r.values) {
            assert!(
                (v - eval_poly(coeffs, *x)).abs() <= 1e-10 * scale,
                "poly {coeffs:?} at x={x}: {v} vs {}",
                eval_poly(coeffs, *x)
            );
        }
    }
}

/// Laguerre (N=60), Post-Widder (N=2000) and Bromwich (tol=1e-6) agree
/// pairwise within 2e-3 (scaled by the value magnitude) on the corpus.
#[test]
fn method_cross_agreement() {
    let big = OrderLimit::new(2048).unwrap();
    let corpus: [(&str, fn(f64) -> f64); 3] = [
        ("1/(s+1)", |x| (-x).exp()),
        ("1/(s+1)^2", |x| x * (-x).exp()),
        ("2/s^3", |x| x * x),
    ];
    for (phi_text, truth) in corpus {
        let phi = expr(phi_text);
        for &x in &[0.5, 1.0, 2.0, 5.0] {
            let lag = invert_laguerre(&phi, 1.0, 60, &[x], false, big).unwrap().values[0];
            let pw = invert_post_widder(&phi, 2000, x, big).unwrap();
            let br = invert_bromwich(&phi, 1.0, x, 1e-6).unwrap().value;
            let u = truth(x);
            let scale = u.abs().max(1.0);
            for (name, a, b) in [("lag/pw", lag, pw), ("lag/br", lag, br), ("pw/br", pw, br)] {
                assert!(
                    (a - b).abs() <= 2e-3 * scale,
                    "{phi_text} x={x} {name}: {a} vs {b} (u={u})"
                );
            }
        }
    }
}

/// The Taylor coefficients of Φ are linear in φ.
#[test]
fn linearity_on_coefficient_level() {
    let alpha = 0.5;
    let beta = 2.0;
    let combined = expr("0.5*(1/(s+1)) + 2*(1/s^2)");
    let c = phi_to_coeffs(&combined, 1.0, 30, lim()).unwrap().coeffs;
    let c1 = phi_to_coeffs(&expr("1/(s+1)"), 1.0, 30, lim()).unwrap().coeffs;
    let c2 = phi_to_coeffs(&expr("1/s^2"), 1.0, 30, lim()).unwrap().coeffs;
    for n in 0..=30 {
        assert_relative_eq!(
            c[n],
            alpha * c1[n] + beta * c2[n],
            max_relative = 1e-12,
            epsilon = 1e-14
        );
    }
}

/// Obstructed transforms are flagged: exponential growth and poles in
/// the right half-plane both defeat square-summability.
#[test]
fn negative_diagnostics() {
    for phi_text in ["exp(s)/s", "1/(s*(s^2-2*s+2))"] {
        let d = phi_to_coeffs(&expr(phi_text), 1.0, 80, lim()).unwrap();
        assert!(
            matches!(d.verdict, Verdict::Suspect | Verdict::Fails),
            "{phi_text}: verdict {:?}",
            d.verdict
        );
        assert!(
            matches!(d.decay_class, DecayClass::Stalled | DecayClass::Diverging),
            "{phi_text}: class {:?}",
            d.decay_class
        );
    }
}

/// Post-Widder on φ = 1/(s+1): engine equals the closed form
/// (N/(N+x))^{N+1} and approaches e^{-x}.
#[test]
fn post_widder_closed_form() {
    let phi = expr("1/(s+1)");
    let big = OrderLimit::new(2048).unwrap();
    for &(n, x) in &[(10usize, 1.0), (100, 0.5), (1000, 1.0), (2000, 2.0)] {
        let v = invert_post_widder(&phi, n, x, big).unwrap();
        let closed = (n as f64 / (n as f64 + x)).powi(n as i32 + 1);
        assert!(
            (v - closed).abs() <= 1e-12 * closed.abs().max(1.0),
            "N={n} x={x}: {v} vs {closed}"
        );
    }
    let v1000 = invert_post_widder(&phi, 1000, 1.0, big).unwrap();
    assert!((v1000 - (-1.0f64).exp()).abs() <= 1e-3);
}

/// CDF inversion: Exp(1) CDF at 1 and the half-atom rule for the point
/// mass at 1.
#[test]
fn probabilistic_cdf_inversion() {
    let big = OrderLimit::new(1024).unwrap();
    let exp_cdf = invert_cdf_probabilistic(&expr("1/(1+s)"), 500, 1.0, big).unwrap();
    assert!((exp_cdf - (1.0 - (-1.0f64).exp())).abs() <= 5e-3);

    let atom = invert_cdf_probabilistic(&expr("exp(-s)"), 400, 1.0, big).unwrap();
    assert!((atom - 0.5).abs() <= 0.05);

    // far to the right of the support mass: the value saturates near 1
    let far = invert_cdf_probabilistic(&expr("1/(1+s)"), 200, 50.0, big).unwrap();
    assert!((0.0..=1.05).contains(&far));
    assert!((far - 1.0).abs() < 0.05);
}

/// Bromwich against analytic inverses.
#[test]
fn bromwich_analytic_inverses() {
    let cases: [(&str, fn(f64) -> f64); 3] = [
        ("1/(s+1)", |x| (-x).exp()),
        ("1/s^2", |x| x),
        ("1/(s+1)^2", |x| x * (-x).exp()),
    ];
    for (phi_text, truth) in cases {
        let phi = expr(phi_text);
        for &x in &[0.5, 1.0, 2.0] {
            let r = invert_bromwich(&phi, 1.0, x, 1e-6).unwrap();
            assert!(
                (r.value - truth(x)).abs() <= 1e-4,
                "{phi_text} at {x}: {} vs {}",
                r.value,
                truth(x)
            );
        }
    }
}

/// Report serialization keeps the typed field set.
#[test]
fn report_serializes_with_stable_fields() {
    let phi = expr("1/(s+1)");
    let r = invert_laguerre(&phi, 1.0, 8, &[1.0, 2.0], false, lim()).unwrap();
    let json = serde_json::to_value(&r).unwrap();
    assert!(json.get("xs").is_some());
    assert!(json.get("values").is_some());
    assert_eq!(json["method"], "laguerre");
    assert_eq!(json["params"]["n"], 8);
    assert!(json["diagnostics"]["coeffs"].is_array());
    assert_eq!(json["diagnostics"]["verdict"], "converges");
    assert_eq!(json["diagnostics"]["decay_class"]["kind"], "geometric");
}
