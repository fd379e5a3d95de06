use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use qfhe_core::mlwe::{encrypt, external_product, gsw_encrypt_level, keygen};
use qfhe_core::ring::sample_uniform;
use qfhe_core::{poly_mul, Preset, SeededGenerator};
use std::hint::black_box;

fn ntt_mul(c: &mut Criterion) {
    let mut g = c.benchmark_group("poly_mul");
    for preset in [Preset::toy(), Preset::teleport(), Preset::wide()] {
        let p = preset.ring(0).unwrap();
        let mut rng = SeededGenerator::from_u64(1);
        let (a, b) = (sample_uniform(&p, &mut rng), sample_uniform(&p, &mut rng));
        g.bench_with_input(BenchmarkId::from_parameter(format!("d={}", p.d)), &p, |bench, p| {
            bench.iter(|| poly_mul(black_box(&a), black_box(&b), p).unwrap())
        });
    }
    g.finish();
}

fn gsw(c: &mut Criterion) {
    let mut g = c.benchmark_group("external_product");
    for preset in [Preset::toy(), Preset::teleport()] {
        let mut rng = SeededGenerator::from_u64(2);
        let (sk, pk) = keygen(&preset, &mut rng);
        let ct = encrypt(&pk, 0.25, &preset, &mut rng).unwrap();
        let bit = gsw_encrypt_level(&sk, 1, preset.gadget_log2, 0, &mut rng).unwrap();
        g.bench_function(preset.name.clone(), |b| b.iter(|| external_product(black_box(&ct), &bit).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, ntt_mul, gsw);
criterion_main!(benches);
