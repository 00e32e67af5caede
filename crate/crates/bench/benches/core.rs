use criterion::{black_box, criterion_group, criterion_main, Criterion};
use spinlight_bench::{coupled, covariance, kernel_point, large_6j};

fn sixj(c: &mut Criterion) {
    c.bench_function("wigner_6j 2j=24", |b| b.iter(|| large_6j().unwrap()));
}

fn kernels(c: &mut Criterion) {
    let cs = coupled();
    c.bench_function("kernel_time_domain", |b| {
        b.iter(|| kernel_point(&cs, black_box(0.6), black_box(0.7)).unwrap())
    });
}

fn covariance_bench(c: &mut Criterion) {
    let cs = coupled();
    let mut group = c.benchmark_group("propagate_covariance");
    for (nz, nt) in [(8, 16), (16, 32)] {
        group.bench_function(format!("{nz}x{nt}"), |b| b.iter(|| covariance(&cs, nz, nt).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, sixj, kernels, covariance_bench);
criterion_main!(benches);
