use criterion::{black_box, criterion_group, criterion_main, Criterion};
use nalgebra::{DMatrix, DVector};

use drls_bench::standard_simulation;
use drls_core::data::{synthetic_default, SlotSource};
use drls_core::node::phi_update;
use drls_core::{calibrate_tau, q_inverse, AlgorithmKind, RngStream};

fn bench_phi_update(c: &mut Criterion) {
    let mut group = c.benchmark_group("phi_update");
    for p in [4usize, 9] {
        let mut stream = RngStream::new(1, 0);
        let a = DMatrix::from_fn(p, p, |_, _| stream.uniform(-1.0, 1.0));
        let mut phi = &a * a.transpose();
        for i in 0..p {
            phi[(i, i)] += 1.0;
        }
        let phi_inv = phi.try_inverse().unwrap();
        let h = DVector::from_fn(p, |_, _| stream.uniform(-1.0, 1.0));
        group.bench_function(format!("p{p}"), |b| {
            b.iter(|| phi_update(black_box(&phi_inv), black_box(&h), 1.0).unwrap())
        });
    }
    group.finish();
}

fn bench_slot_step(c: &mut Criterion) {
    let mut group = c.benchmark_group("slot_step");
    let tau = calibrate_tau(0.6).unwrap();
    for (name, kind, tau) in [
        ("drls", AlgorithmKind::Drls, 0.0),
        ("cdrls1", AlgorithmKind::Cdrls1, tau),
        ("cdrls3", AlgorithmKind::Cdrls3, tau),
    ] {
        group.bench_function(name, |b| {
            let mut sim = standard_simulation(kind, tau);
            let mut src = synthetic_default(15, 11);
            let mut t = 0u64;
            b.iter(|| {
                t += 1;
                let data = src.next_slot(t).unwrap().unwrap();
                sim.step(black_box(&data)).unwrap()
            })
        });
    }
    group.finish();
}

fn bench_q_inverse(c: &mut Criterion) {
    c.bench_function("q_inverse", |b| b.iter(|| q_inverse(black_box(0.2)).unwrap()));
}

criterion_group!(benches, bench_phi_update, bench_slot_step, bench_q_inverse);
criterion_main!(benches);
