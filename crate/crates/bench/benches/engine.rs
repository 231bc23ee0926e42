use criterion::{black_box, criterion_group, criterion_main, Criterion};
use laginv_core::{
    beta_simple, build_umvue, invert_laguerre, invert_post_widder, phi_to_coeffs, sample_gamma,
    EstimationProblem, OrderLimit, TransformExpr, Xoshiro256pp,
};

fn bench_jets(c: &mut Criterion) {
    let phi = TransformExpr::parse("1/(s+1)^2").unwrap();
    let mut g = c.benchmark_group("jets");
    for &n in &[64usize, 256] {
        g.bench_function(format!("phi_to_coeffs/{n}"), |b| {
            b.iter(|| phi_to_coeffs(black_box(&phi), 1.0, n, OrderLimit::default()).unwrap())
        });
    }
    g.finish();
}

fn bench_inversion(c: &mut Criterion) {
    let phi = TransformExpr::parse("1/(s+1)").unwrap();
    let xs: Vec<f64> = (1..=50).map(|i| 0.2 * i as f64).collect();
    let mut g = c.benchmark_group("inversion");
    g.bench_function("laguerre/N=40/grid=50", |b| {
        b.iter(|| invert_laguerre(black_box(&phi), 1.0, 40, &xs, false, OrderLimit::default()))
    });
    let big = OrderLimit::new(2048).unwrap();
    g.bench_function("post_widder/N=1000", |b| {
        b.iter(|| invert_post_widder(black_box(&phi), 1000, 1.0, big).unwrap())
    });
    g.finish();
}

fn bench_umvue(c: &mut Criterion) {
    let p = EstimationProblem::new(TransformExpr::parse("exp(-s)").unwrap(), 3.0).unwrap();
    let mut g = c.benchmark_group("umvue");
    g.bench_function("beta_simple/M=120", |b| {
        b.iter(|| beta_simple(black_box(&p), 1.0, 120, OrderLimit::default()).unwrap())
    });
    let series = build_umvue(&p, 1.0, 120, false, OrderLimit::default()).unwrap();
    g.bench_function("series_eval/M=120", |b| {
        b.iter(|| series.evaluate(black_box(1.7)).unwrap())
    });
    g.finish();
}

fn bench_sampling(c: &mut Criterion) {
    let mut rng = Xoshiro256pp::seeded(42);
    c.bench_function("sample_gamma/a=3", |b| {
        b.iter(|| sample_gamma(3.0, 2.0, &mut rng).unwrap())
    });
}

criterion_group!(benches, bench_jets, bench_inversion, bench_umvue, bench_sampling);
criterion_main!(benches);
