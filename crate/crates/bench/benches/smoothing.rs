use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rsmooth::smoothing::{lse_gradient, lse_value, separable_l1_gradient, AbsKind};

fn bench_lse(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for len in [64usize, 1024, 16384] {
        let x: Vec<f64> = (0..len).map(|_| rng.random_range(-5.0..5.0)).collect();
        c.bench_function(&format!("lse_value/{len}"), |b| {
            b.iter(|| lse_value(black_box(&x), black_box(0.05)).unwrap())
        });
        c.bench_function(&format!("lse_gradient/{len}"), |b| {
            b.iter(|| lse_gradient(black_box(&x), black_box(0.05)).unwrap())
        });
    }
}

fn bench_abs_families(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let z = DVector::from_fn(4096, |_, _| rng.random_range(-3.0..3.0));
    for kind in AbsKind::ALL {
        c.bench_function(&format!("separable_l1_gradient/{kind}/4096"), |b| {
            b.iter(|| separable_l1_gradient(black_box(&z), black_box(0.01), kind).unwrap())
        });
    }
}

criterion_group!(benches, bench_lse, bench_abs_families);
criterion_main!(benches);
