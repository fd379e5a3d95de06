use criterion::{criterion_group, criterion_main, Criterion};
use qfhe_bench::Fixture;
use qfhe_core::kb::logic::{fact, implies};
use qfhe_core::kb::{capsule_apply, capsule_make, PropLayout};
use qfhe_core::qhe::{apply_gate, enc_state, refresh, teleport_feedback, Client, SchedulePolicy};
use qfhe_core::qsim::{DensityMatrix, GateLabel, GateSuperop, MaskSpec};
use qfhe_core::Preset;
use std::hint::black_box;

fn gates(c: &mut Criterion) {
    let mut fx = Fixture::new(Preset::teleport(), 3);
    let es = fx.state(2);
    let mut g = c.benchmark_group("lifted_gate_2q");
    for (label, wires) in [(GateLabel::H, vec![0]), (GateLabel::S, vec![1]), (GateLabel::Cnot, vec![0, 1]), (GateLabel::Rz(0.3), vec![0])] {
        let sup = GateSuperop::gate(label.clone(), &wires, 2, fx.preset.frac_bits).unwrap();
        g.bench_function(label.to_string(), |b| b.iter(|| apply_gate(black_box(&es), &sup, &fx.ek).unwrap()));
    }
    g.finish();
    c.bench_function("refresh_2q", |b| b.iter(|| refresh(black_box(&es), &fx.ek).unwrap()));
}

fn teleport(c: &mut Criterion) {
    let fx = Fixture::new(Preset::toy(), 4);
    let mut client = Client::new(fx.ck.clone(), fx.rng.clone());
    let rho = DensityMatrix::basis(1, 1).unwrap();
    let policy = SchedulePolicy::default();
    let mut g = c.benchmark_group("teleport");
    g.sample_size(10);
    g.bench_function("feedback_toy", |b| b.iter(|| teleport_feedback(&mut client, &fx.ek, &rho, 0.75, &policy).unwrap()));
    g.finish();
}

fn capsules(c: &mut Criterion) {
    let mut fx = Fixture::new(Preset::toy(), 5);
    let sk = fx.ck.level_key(0).unwrap().clone();
    let kb = vec![fact(0, "P", "a"), implies(1, "P", "Q")];
    let layout = PropLayout::for_subject(&kb, "a", &[]);
    let cap = capsule_make(&sk, &kb[1], &layout, &fx.preset, &mut fx.rng).unwrap();
    let es = enc_state(&sk, &DensityMatrix::basis(2, 0).unwrap(), MaskSpec::depolarizing(0.75).unwrap(), &fx.preset, &mut fx.rng).unwrap();
    let mut g = c.benchmark_group("capsule");
    g.sample_size(10);
    g.bench_function("apply_toy", |b| b.iter(|| capsule_apply(black_box(&es), &cap, &fx.ek).unwrap()));
    g.finish();
}

criterion_group!(benches, gates, teleport, capsules);
criterion_main!(benches);
