use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use specrep::equidist::{nu_measure, vitali_cover, CoverParams};
use specrep::hypspace::sphere_enumerate;
use specrep::FreeGroup;

fn enumerate(c: &mut Criterion) {
    let group = FreeGroup::new(2).unwrap();
    let mut g = c.benchmark_group("sphere_enumerate");
    for n in [6, 8, 10] {
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, &n| {
            b.iter(|| sphere_enumerate(&group, black_box(n)).unwrap().count())
        });
    }
    g.finish();
}

fn covers(c: &mut Criterion) {
    let group = FreeGroup::new(2).unwrap();
    let mut g = c.benchmark_group("vitali_cover");
    g.sample_size(10);
    for t in [2, 3, 4] {
        g.bench_with_input(BenchmarkId::from_parameter(t), &t, |b, &t| {
            b.iter(|| nu_measure(&vitali_cover(&group, &CoverParams::default(), black_box(t)).unwrap()))
        });
    }
    g.finish();
}

criterion_group!(benches, enumerate, covers);
criterion_main!(benches);
