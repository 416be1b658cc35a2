use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use cpforge::materials::AtomModel;
use cpforge::sim::{MediaMap, Simulation};
use cpforge::waveform::SourceWaveform;
use cpforge_bench::{disk, sim_2d, sim_3d};

fn bench_step(c: &mut Criterion) {
    let cfg2 = sim_2d(6.0, 10);
    let media2 = MediaMap::vacuum(&cfg2);
    c.bench_function("step_2d_80x80", |b| {
        let mut sim = Simulation::new(&cfg2, &media2).unwrap();
        sim.seed_noise(3, 1e-3);
        b.iter(|| {
            sim.step(&[]);
            black_box(sim.step_index());
        });
    });

    let cfg3 = sim_3d(4.0, 10);
    let media3 = MediaMap::vacuum(&cfg3);
    c.bench_function("step_3d_48cubed", |b| {
        let mut sim = Simulation::new(&cfg3, &media3).unwrap();
        sim.seed_noise(3, 1e-3);
        b.iter(|| {
            sim.step(&[]);
            black_box(sim.step_index());
        });
    });
}

fn bench_kernel(c: &mut Criterion) {
    let atom = AtomModel::rubidium87(100e-9);
    let src = SourceWaveform::build(2.5, 1.0, 0.05, 1200).unwrap();
    c.bench_function("kernel_build_1200x4096", |b| {
        b.iter(|| {
            let k = cpforge::kernel::build_kernel(&atom, &src, 4096, 25.0, 1200).unwrap();
            black_box(k.samples[17]);
        });
    });
}

fn bench_levelset(c: &mut Criterion) {
    let cfg = sim_2d(6.0, 10);
    let ls = disk(&cfg);
    c.bench_function("reinitialize_80x80", |b| {
        b.iter(|| {
            let (out, _) = ls.reinitialize();
            black_box(out.phi[0]);
        });
    });
    let v = vec![0.7; ls.phi.len()];
    c.bench_function("advect_80x80", |b| {
        b.iter(|| {
            let out = ls.advect(&v, 0.04).unwrap();
            black_box(out.phi[0]);
        });
    });
}

criterion_group!(benches, bench_step, bench_kernel, bench_levelset);
criterion_main!(benches);
