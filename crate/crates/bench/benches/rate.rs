use std::hint::black_box;

use bootperc::minimize_rate;
use criterion::{criterion_group, criterion_main, Criterion};

fn minimizer(c: &mut Criterion) {
    c.bench_function("minimize_rate", |b| {
        b.iter(|| {
            for (alpha, r) in [(1.1, 2), (2.0, 3), (5.0, 5)] {
                black_box(minimize_rate(black_box(alpha), r, 1e-10).unwrap());
            }
        })
    });
}

criterion_group!(benches, minimizer);
criterion_main!(benches);
