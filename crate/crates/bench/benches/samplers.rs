use std::hint::black_box;

use bootperc::process::{sample_activation_times, sample_graph, sample_markchain};
use bootperc::{LnCritical, ModelParams, PercolationOutcome, Result, RngSpec};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

type Sampler = fn(&ModelParams, RngSpec) -> Result<PercolationOutcome>;

fn samplers(c: &mut Criterion) {
    let mut g = c.benchmark_group("sampler");
    let n = 5000u64;
    let p = (n as f64).ln() / (2.0 * n as f64);
    let a_c = LnCritical::at(n as f64, p.ln(), 2).ln_a_c.exp();
    let params = ModelParams::new(n, p, 2, (2.0 * a_c).ceil() as u64).unwrap();
    let all: [(&str, Sampler); 3] =
        [("graph", sample_graph), ("markchain", sample_markchain), ("activation_times", sample_activation_times)];
    for (name, f) in all {
        let mut stream = 0;
        g.bench_function(BenchmarkId::new(name, n), |b| {
            b.iter(|| {
                stream += 1;
                f(black_box(&params), RngSpec::new(1, stream)).unwrap()
            })
        });
    }
    g.finish();
}

criterion_group!(benches, samplers);
criterion_main!(benches);
