use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use pinchflow::curvature::profile_curvatures;
use pinchflow::flow::{mcf_step, PdeStepControl};
use pinchflow::inscribed::inscribed_exscribed;
use pinchflow::poincare::poincare_gamma_search;
use pinchflow_bench::{dumbbell_profile, dumbbell_state};

fn curvatures(c: &mut Criterion) {
    let mut g = c.benchmark_group("profile_curvatures");
    for n in [200, 800, 3200] {
        let p = dumbbell_profile(n);
        g.bench_with_input(BenchmarkId::from_parameter(n), &p, |b, p| b.iter(|| profile_curvatures(black_box(p), 4).unwrap()));
    }
    g.finish();
}

fn step(c: &mut Criterion) {
    let ctl = PdeStepControl::default();
    let mut g = c.benchmark_group("mcf_step");
    for n in [200, 800] {
        let s = dumbbell_state(n);
        let dt = s.stable_dt(&ctl);
        g.bench_function(BenchmarkId::from_parameter(n), |b| {
            b.iter_batched(|| s.clone(), |mut s| mcf_step(&mut s, dt, &ctl).unwrap(), criterion::BatchSize::SmallInput)
        });
    }
    g.finish();
}

fn chords(c: &mut Criterion) {
    let s = dumbbell_state(800);
    c.bench_function("inscribed_exscribed/800", |b| b.iter(|| inscribed_exscribed(black_box(&s.profile), &s.curv).unwrap()));
}

fn gamma(c: &mut Criterion) {
    let mut g = c.benchmark_group("gamma_search");
    g.sample_size(10);
    g.bench_function("n4_budget_16384", |b| b.iter(|| poincare_gamma_search(4, 0.5, 0.05, 16384, 1).unwrap()));
    g.finish();
}

criterion_group!(benches, curvatures, step, chords, gamma);
criterion_main!(benches);
