use std::hint::black_box;

use cqpolar::channel::noisy_bloch_state;
use cqpolar::{fidelity, von_neumann_entropy, DensityMatrix};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn product(k: usize, phi: f64) -> DensityMatrix {
    let q = noisy_bloch_state(phi, 0.3, 0.1);
    (1..k).fold(q.clone(), |acc, _| acc.kron(&q))
}

fn spectra(c: &mut Criterion) {
    let mut g = c.benchmark_group("dense");
    g.sample_size(10);
    for k in [3usize, 5, 7] {
        let (a, b) = (product(k, 0.4), product(k, 1.1));
        g.bench_with_input(BenchmarkId::new("entropy", 1 << k), &a, |bch, a| {
            bch.iter(|| von_neumann_entropy(black_box(a)))
        });
        g.bench_with_input(BenchmarkId::new("fidelity", 1 << k), &(a, b), |bch, (a, b)| {
            bch.iter(|| fidelity(black_box(a), black_box(b)).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, spectra);
criterion_main!(benches);
