//! Field-solver physics checks: propagation speed, absorber quality,
//! symmetry, reciprocity, stability and determinism.

use cpforge::geom::{Axis, Dim, Vec3};
use cpforge::materials::DrudeParameters;
use cpforge::sim::{
    run_simulation, Component, MediaMap, PointSource, ProbePoint, Simulation, SimulationConfig,
};

fn cfg2d(domain: f64, steps: usize) -> SimulationConfig {
    SimulationConfig {
        dim: Dim::Two,
        domain,
        resolution: 10,
        pml_depth: 1.0,
        courant: 0.5,
        steps,
    }
}

/// Short smooth current bump (sin^2 envelope) for impulse-style tests.
fn bump_waveform(steps: usize, width: usize) -> Vec<f64> {
    (0..steps)
        .map(|k| {
            if k < width {
                let x = k as f64 / width as f64;
                (std::f64::consts::PI * x).sin().powi(2)
            } else {
                0.0
            }
        })
        .collect()
}

fn x_source(position: Vec3, waveform: Vec<f64>) -> PointSource {
    PointSource { position, orientation: Axis::X, waveform }
}

fn ex_probe(position: Vec3) -> ProbePoint {
    ProbePoint { position, component: Component::Ex }
}

#[test]
fn wavefront_travels_at_unit_speed() {
    // Differential arrival between two radii cancels the source rise time.
    let cfg = cfg2d(6.0, 240);
    let media = MediaMap::vacuum(&cfg);
    let src = x_source(Vec3::ZERO, bump_waveform(cfg.steps, 12));
    let probes = [ex_probe(Vec3::new(0.0, 1.0, 0.0)), ex_probe(Vec3::new(0.0, 2.5, 0.0))];
    let out = run_simulation(&cfg, &media, &src, &probes, None).unwrap();

    let arrival = |rec: &cpforge::ProbeRecord| -> f64 {
        let peak = rec.series.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let n = rec.series.iter().position(|v| v.abs() > 0.02 * peak).unwrap();
        rec.time(n)
    };
    let t1 = arrival(&out.probes[0]);
    let t2 = arrival(&out.probes[1]);
    let covered = t2 - t1;
    let expected = 1.5;
    assert!(
        (covered - expected).abs() < 0.2,
        "front covered 1.5 L0 in {covered} L0/c"
    );
}

#[test]
fn pml_reflection_below_threshold() {
    // Same source and probe in a small and a much larger domain; within the
    // window where the large run is reflection-free, the difference is the
    // small domain's absorber artifact.
    let steps = 240;
    let small = cfg2d(6.0, steps);
    let large = cfg2d(16.0, steps);
    let src_pos = Vec3::new(2.0, 0.0, 0.0); // 1 L0 from the absorber face
    let probe = ex_probe(Vec3::new(0.0, 0.0, 0.0));

    let wave = bump_waveform(steps, 16);
    let out_small = run_simulation(
        &small,
        &MediaMap::vacuum(&small),
        &x_source(src_pos, wave.clone()),
        &[probe],
        None,
    )
    .unwrap();
    let out_large = run_simulation(
        &large,
        &MediaMap::vacuum(&large),
        &x_source(src_pos, wave),
        &[probe],
        None,
    )
    .unwrap();

    let a = &out_small.probes[0].series;
    let b = &out_large.probes[0].series;
    let window = (11.0 / small.dt()) as usize; // before the large box reflects
    let mut num = 0.0;
    let mut den = 0.0;
    for n in 0..window.min(a.len()) {
        num += (a[n] - b[n]) * (a[n] - b[n]);
        den += b[n] * b[n];
    }
    let fraction = num / den;
    assert!(fraction < 1e-4, "reflected energy fraction {fraction:.2e}");
}

#[test]
fn vacuum_mirror_symmetry_is_exact() {
    let cfg = cfg2d(6.0, 300);
    let media = MediaMap::vacuum(&cfg);
    let src = x_source(Vec3::ZERO, bump_waveform(cfg.steps, 20));
    // probe x aligned with the snapped source node so the mirror is exact
    let sx = cpforge::sim::snap_to_node(&cfg, Component::Ex, Vec3::ZERO).x;
    let probes = [ex_probe(Vec3::new(sx, 1.2, 0.0)), ex_probe(Vec3::new(sx, -1.2, 0.0))];
    let out = run_simulation(&cfg, &media, &src, &probes, None).unwrap();
    let peak = out.probes[0].series.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for n in 0..cfg.steps {
        let d = (out.probes[0].series[n] - out.probes[1].series[n]).abs();
        assert!(d <= 1e-12 * peak.max(1e-300), "asymmetry {d} at step {n}");
    }
}

#[test]
fn noise_run_stays_bounded_at_stable_courant() {
    let cfg = SimulationConfig {
        dim: Dim::Two,
        domain: 4.0,
        resolution: 10,
        pml_depth: 1.0,
        courant: 1.0 / 2.0f64.sqrt(),
        steps: 1,
    };
    let media = MediaMap::vacuum(&cfg);
    let mut sim = Simulation::new(&cfg, &media).unwrap();
    sim.seed_noise(7, 1.0);
    let start = sim.max_abs_e();
    for _ in 0..10_000 {
        sim.step(&[]);
    }
    let end = sim.max_abs_e();
    assert!(end.is_finite());
    assert!(end < 10.0 * start, "noise grew from {start} to {end}");
}

#[test]
fn closed_box_conserves_energy() {
    let cfg = SimulationConfig {
        dim: Dim::Two,
        domain: 4.0,
        resolution: 10,
        pml_depth: 0.0,
        courant: 0.5,
        steps: 1,
    };
    let media = MediaMap::vacuum(&cfg);
    let mut sim = Simulation::new(&cfg, &media).unwrap();
    sim.seed_noise(11, 1.0);
    // the E-only initial condition redistributes into H over the first
    // steps; compare windowed means afterwards to detect secular drift
    let mut energies = Vec::new();
    for _ in 0..2000 {
        sim.step(&[]);
        energies.push(sim.field_energy());
    }
    let mean = |w: &[f64]| w.iter().sum::<f64>() / w.len() as f64;
    let early = mean(&energies[20..120]);
    let late = mean(&energies[1900..2000]);
    assert!((late / early - 1.0).abs() < 0.01, "energy drifted: {early} -> {late}");
    let max = energies[20..].iter().fold(0.0f64, |m, &v| m.max(v));
    let min = energies[20..].iter().fold(f64::MAX, |m, &v| m.min(v));
    assert!(max / early < 1.1 && min / early > 0.9, "energy excursion {min}..{max} vs {early}");
}

#[test]
fn reciprocity_in_vacuum_and_with_drude_disk() {
    let r1 = Vec3::new(-1.05, 0.0, 0.0); // on the Ex lattice at 10 cells/L0
    let r2 = Vec3::new(1.55, 0.5, 0.0);
    for metallic in [false, true] {
        let cfg = cfg2d(6.0, 400);
        let mut media = MediaMap::vacuum(&cfg);
        if metallic {
            let gold = DrudeParameters::gold(100e-9);
            let center = Vec3::new(0.3, -0.1, 0.0);
            let radius = 0.6;
            media = media.with_drude(&cfg, gold, |p| {
                let d = p.sub(center).norm() - radius;
                // one-cell linear fill ramp
                (0.5 - d / cfg.cell_size()).clamp(0.0, 1.0)
            });
        }
        let wave = bump_waveform(cfg.steps, 24);
        let fwd = run_simulation(
            &cfg,
            &media,
            &x_source(r1, wave.clone()),
            &[ex_probe(r2)],
            None,
        )
        .unwrap();
        let rev =
            run_simulation(&cfg, &media, &x_source(r2, wave), &[ex_probe(r1)], None).unwrap();

        let a = &fwd.probes[0].series;
        let b = &rev.probes[0].series;
        let mut num = 0.0;
        let mut den = 0.0;
        for n in 0..a.len() {
            num += (a[n] - b[n]) * (a[n] - b[n]);
            den += a[n] * a[n];
        }
        let rel = (num / den).sqrt();
        assert!(rel < 1e-3, "reciprocity violation {rel:.2e} (metallic: {metallic})");
    }
}

#[test]
fn pec_plane_scatters_into_the_probe() {
    let cfg = cfg2d(6.0, 300);
    let vacuum = MediaMap::vacuum(&cfg);
    let plane = MediaMap::vacuum(&cfg).with_pec(&cfg, |p| p.x >= 1.5);
    let src = x_source(Vec3::ZERO, bump_waveform(cfg.steps, 20));
    let probe = ex_probe(Vec3::new(0.25, 0.0, 0.0));
    let a = run_simulation(&cfg, &vacuum, &src, &[probe], None).unwrap();
    let b = run_simulation(&cfg, &plane, &src, &[probe], None).unwrap();
    let diff: f64 =
        a.probes[0].series.iter().zip(&b.probes[0].series).map(|(x, y)| (x - y).abs()).sum();
    assert!(diff > 1e-9, "plane left no trace on the probe");
}

#[test]
fn repeated_runs_are_bitwise_identical() {
    let cfg = cfg2d(4.0, 150);
    let gold = DrudeParameters::gold(100e-9);
    let media = MediaMap::vacuum(&cfg).with_drude(&cfg, gold, |p| {
        ((0.5 - (p.sub(Vec3::new(0.8, 0.0, 0.0)).norm() - 0.4)) / cfg.cell_size())
            .clamp(0.0, 1.0)
    });
    let src = x_source(Vec3::ZERO, bump_waveform(cfg.steps, 20));
    let probe = ex_probe(Vec3::new(-0.5, 0.3, 0.0));
    let a = run_simulation(&cfg, &media, &src, &[probe], None).unwrap();
    let b = run_simulation(&cfg, &media, &src, &[probe], None).unwrap();
    assert_eq!(a.probes[0].series, b.probes[0].series);
}

#[test]
fn three_d_front_speed_and_symmetry() {
    let cfg = SimulationConfig {
        dim: Dim::Three,
        domain: 4.0,
        resolution: 8,
        pml_depth: 1.0,
        courant: 0.5,
        steps: 180,
    };
    let media = MediaMap::vacuum(&cfg);
    let src = x_source(Vec3::ZERO, bump_waveform(cfg.steps, 10));
    let sx = cpforge::sim::snap_to_node(&cfg, Component::Ex, Vec3::ZERO).x;
    let probes = [
        ex_probe(Vec3::new(sx, 0.75, 0.0)),
        ex_probe(Vec3::new(sx, -0.75, 0.0)),
        ex_probe(Vec3::new(sx, 1.75, 0.0)),
    ];
    let out = run_simulation(&cfg, &media, &src, &probes, None).unwrap();

    let peak = out.probes[0].series.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(peak > 0.0);
    for n in 0..cfg.steps {
        let d = (out.probes[0].series[n] - out.probes[1].series[n]).abs();
        assert!(d <= 1e-12 * peak, "3D mirror asymmetry {d} at step {n}");
    }

    let arrival = |rec: &cpforge::ProbeRecord| -> f64 {
        let p = rec.series.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        rec.time(rec.series.iter().position(|v| v.abs() > 0.02 * p).unwrap())
    };
    let dt_arr = arrival(&out.probes[2]) - arrival(&out.probes[0]);
    assert!((dt_arr - 1.0).abs() < 0.25, "3D front covered 1 L0 in {dt_arr} L0/c");
}
