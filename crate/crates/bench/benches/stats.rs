use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use proofgrade::rng::PortableRng;
use proofgrade::studystats::{chi2_sf, kruskal_wallis, ols_fit, t_two_sided, welch_t};

fn stats(c: &mut Criterion) {
    let mut rng = PortableRng::new(5);
    let groups: Vec<Vec<f64>> = (0..3)
        .map(|g| {
            (0..40)
                .map(|_| (g as f64 * 5.0 + 20.0 * rng.next_f64()).round())
                .collect()
        })
        .collect();
    let refs: Vec<&[f64]> = groups.iter().map(Vec::as_slice).collect();
    c.bench_function("kruskal_wallis/3x40", |b| {
        b.iter(|| kruskal_wallis(black_box(&refs)).unwrap())
    });
    c.bench_function("welch_t/40v40", |b| {
        b.iter(|| welch_t(black_box(&groups[0]), &groups[1]).unwrap())
    });

    let n = 120;
    let cols: Vec<(String, Vec<f64>)> = ["const", "x1", "x2", "x3"]
        .iter()
        .enumerate()
        .map(|(j, name)| {
            (
                name.to_string(),
                (0..n).map(|_| if j == 0 { 1.0 } else { rng.normal() }).collect(),
            )
        })
        .collect();
    let y: Vec<f64> = (0..n)
        .map(|i| 1.0 + cols[1].1[i] - 2.0 * cols[3].1[i] + rng.normal())
        .collect();
    c.bench_function("ols_fit/120x4", |b| b.iter(|| ols_fit(black_box(&y), &cols).unwrap()));

    c.bench_function("chi2_sf", |b| b.iter(|| chi2_sf(black_box(10.95), 2.0)));
    c.bench_function("t_two_sided", |b| b.iter(|| t_two_sided(black_box(2.31), 57.4)));
}

criterion_group!(benches, stats);
criterion_main!(benches);
