//! 3D update sweep. Curl updates are data-parallel over z-planes; every
//! plane is written by exactly one task, so the result is bitwise
//! reproducible regardless of scheduling.
//!
//! E reads past the last stored lattice plane are zero (PEC wall), matching
//! the frozen first plane, so the closed box is mirror symmetric.

use rayon::prelude::*;

use super::pml::AxisCoeffs;
use super::{Injection, Simulation};

const PSI_EXY: usize = 0;
const PSI_EXZ: usize = 1;
const PSI_EYZ: usize = 2;
const PSI_EYX: usize = 3;
const PSI_EZX: usize = 4;
const PSI_EZY: usize = 5;
const PSI_HXY: usize = 6;
const PSI_HXZ: usize = 7;
const PSI_HYZ: usize = 8;
const PSI_HYX: usize = 9;
const PSI_HZX: usize = 10;
const PSI_HZY: usize = 11;

pub(super) fn step(sim: &mut Simulation, injections: &[Injection]) {
    update_h(sim);
    pml_h(sim);
    sim.apply_drude_update();
    update_e(sim);
    pml_e(sim);
    sim.apply_drude_currents();
    sim.apply_injections(injections);
    sim.apply_pec();
}

fn update_e(sim: &mut Simulation) {
    let (nx, ny, nz) = (sim.dims.nx, sim.dims.ny, sim.dims.nz);
    let plane = nx * ny;
    let inv_h = 1.0 / sim.h;

    let hx = &sim.hx;
    let hy = &sim.hy;
    let hz = &sim.hz;

    let ce_x = &sim.ce[0];
    sim.ex.par_chunks_mut(plane).enumerate().for_each(|(k, exk)| {
        if k < 1 || k >= nz {
            return;
        }
        let base = k * plane;
        for j in 1..ny {
            let row = j * nx;
            for i in 0..nx {
                let g = base + row + i;
                let dy_hz = (hz[g] - hz[g - nx]) * inv_h;
                let dz_hy = (hy[g] - hy[g - plane]) * inv_h;
                exk[row + i] += ce_x[g] * (dy_hz - dz_hy);
            }
        }
    });

    let ce_y = &sim.ce[1];
    sim.ey.par_chunks_mut(plane).enumerate().for_each(|(k, eyk)| {
        if k < 1 || k >= nz {
            return;
        }
        let base = k * plane;
        for j in 0..ny {
            let row = j * nx;
            for i in 1..nx {
                let g = base + row + i;
                let dz_hx = (hx[g] - hx[g - plane]) * inv_h;
                let dx_hz = (hz[g] - hz[g - 1]) * inv_h;
                eyk[row + i] += ce_y[g] * (dz_hx - dx_hz);
            }
        }
    });

    let ce_z = &sim.ce[2];
    sim.ez.par_chunks_mut(plane).enumerate().for_each(|(k, ezk)| {
        let base = k * plane;
        for j in 1..ny {
            let row = j * nx;
            for i in 1..nx {
                let g = base + row + i;
                let dx_hy = (hy[g] - hy[g - 1]) * inv_h;
                let dy_hx = (hx[g] - hx[g - nx]) * inv_h;
                ezk[row + i] += ce_z[g] * (dx_hy - dy_hx);
            }
        }
    });
}

fn update_h(sim: &mut Simulation) {
    let (nx, ny, nz) = (sim.dims.nx, sim.dims.ny, sim.dims.nz);
    let plane = nx * ny;
    let inv_h = 1.0 / sim.h;
    let dt = sim.dt;

    let ex = &sim.ex;
    let ey = &sim.ey;
    let ez = &sim.ez;

    sim.hx.par_chunks_mut(plane).enumerate().for_each(|(k, hxk)| {
        let base = k * plane;
        let last_k = k == nz - 1;
        for j in 0..ny {
            let last_j = j == ny - 1;
            let row = j * nx;
            for i in 0..nx {
                let g = base + row + i;
                let ey_up = if last_k { 0.0 } else { ey[g + plane] };
                let ez_up = if last_j { 0.0 } else { ez[g + nx] };
                let dz_ey = (ey_up - ey[g]) * inv_h;
                let dy_ez = (ez_up - ez[g]) * inv_h;
                hxk[row + i] += dt * (dz_ey - dy_ez);
            }
        }
    });

    sim.hy.par_chunks_mut(plane).enumerate().for_each(|(k, hyk)| {
        let base = k * plane;
        let last_k = k == nz - 1;
        for j in 0..ny {
            let row = j * nx;
            for i in 0..nx {
                let g = base + row + i;
                let ez_r = if i == nx - 1 { 0.0 } else { ez[g + 1] };
                let ex_up = if last_k { 0.0 } else { ex[g + plane] };
                let dx_ez = (ez_r - ez[g]) * inv_h;
                let dz_ex = (ex_up - ex[g]) * inv_h;
                hyk[row + i] += dt * (dx_ez - dz_ex);
            }
        }
    });

    sim.hz.par_chunks_mut(plane).enumerate().for_each(|(k, hzk)| {
        let base = k * plane;
        for j in 0..ny {
            let last_j = j == ny - 1;
            let row = j * nx;
            for i in 0..nx {
                let g = base + row + i;
                let ex_up = if last_j { 0.0 } else { ex[g + nx] };
                let ey_r = if i == nx - 1 { 0.0 } else { ey[g + 1] };
                let dy_ex = (ex_up - ex[g]) * inv_h;
                let dx_ey = (ey_r - ey[g]) * inv_h;
                hzk[row + i] += dt * (dy_ex - dx_ey);
            }
        }
    });
}

/// How the recursive-convolution correction is scaled into the target field.
enum Scale<'a> {
    Uniform(f64),
    PerNode(&'a [f64]),
}

struct Sweep<'a> {
    /// Derivative axis (0, 1, 2).
    axis: usize,
    /// Coefficient lattice along that axis.
    half: bool,
    /// Forward difference (H updates) or backward (E updates).
    forward: bool,
    sign: f64,
    /// Valid update index ranges of the target component, hi exclusive.
    lo: [usize; 3],
    hi: [usize; 3],
    source: &'a [f64],
}

fn cpml_sweep(
    target: &mut [f64],
    psi: &mut [f64],
    coeffs: &AxisCoeffs,
    scale: &Scale<'_>,
    dims: (usize, usize, usize),
    inv_h: f64,
    sw: &Sweep<'_>,
) {
    let (nx, ny, nz) = dims;
    let plane = nx * ny;
    let stride = [1usize, nx, plane][sw.axis];
    let bound = [nx, ny, nz][sw.axis];
    let (bt, ct) =
        if sw.half { (&coeffs.b_half, &coeffs.c_half) } else { (&coeffs.b_int, &coeffs.c_int) };

    for (slo, shi) in coeffs.slabs {
        let mut lo = sw.lo;
        let mut hi = sw.hi;
        lo[sw.axis] = lo[sw.axis].max(slo);
        hi[sw.axis] = hi[sw.axis].min(shi);
        if lo[sw.axis] >= hi[sw.axis] {
            continue;
        }
        for k in lo[2]..hi[2] {
            for j in lo[1]..hi[1] {
                let row = k * plane + j * nx;
                for i in lo[0]..hi[0] {
                    let g = row + i;
                    let pos = [i, j, k][sw.axis];
                    let d = if sw.forward {
                        let up = if pos + 1 < bound { sw.source[g + stride] } else { 0.0 };
                        (up - sw.source[g]) * inv_h
                    } else {
                        (sw.source[g] - sw.source[g - stride]) * inv_h
                    };
                    psi[g] = bt[pos] * psi[g] + ct[pos] * d;
                    let s = match scale {
                        Scale::Uniform(v) => *v,
                        Scale::PerNode(arr) => arr[g],
                    };
                    target[g] += s * sw.sign * psi[g];
                }
            }
        }
    }
}

fn pml_e(sim: &mut Simulation) {
    let (nx, ny, nz) = (sim.dims.nx, sim.dims.ny, sim.dims.nz);
    let dims = (nx, ny, nz);
    let inv_h = 1.0 / sim.h;
    let az = sim.pml.az.as_ref().expect("3D run has z coefficients").clone();
    let ax = sim.pml.ax.clone();
    let ay = sim.pml.ay.clone();

    let ex_range = ([0, 1, 1], [nx, ny, nz]);
    let ey_range = ([1, 0, 1], [nx, ny, nz]);
    let ez_range = ([1, 1, 0], [nx, ny, nz]);

    cpml_sweep(
        &mut sim.ex,
        &mut sim.pml.psi[PSI_EXY],
        &ay,
        &Scale::PerNode(&sim.ce[0]),
        dims,
        inv_h,
        &Sweep { axis: 1, half: false, forward: false, sign: 1.0, lo: ex_range.0, hi: ex_range.1, source: &sim.hz },
    );
    cpml_sweep(
        &mut sim.ex,
        &mut sim.pml.psi[PSI_EXZ],
        &az,
        &Scale::PerNode(&sim.ce[0]),
        dims,
        inv_h,
        &Sweep { axis: 2, half: false, forward: false, sign: -1.0, lo: ex_range.0, hi: ex_range.1, source: &sim.hy },
    );
    cpml_sweep(
        &mut sim.ey,
        &mut sim.pml.psi[PSI_EYZ],
        &az,
        &Scale::PerNode(&sim.ce[1]),
        dims,
        inv_h,
        &Sweep { axis: 2, half: false, forward: false, sign: 1.0, lo: ey_range.0, hi: ey_range.1, source: &sim.hx },
    );
    cpml_sweep(
        &mut sim.ey,
        &mut sim.pml.psi[PSI_EYX],
        &ax,
        &Scale::PerNode(&sim.ce[1]),
        dims,
        inv_h,
        &Sweep { axis: 0, half: false, forward: false, sign: -1.0, lo: ey_range.0, hi: ey_range.1, source: &sim.hz },
    );
    cpml_sweep(
        &mut sim.ez,
        &mut sim.pml.psi[PSI_EZX],
        &ax,
        &Scale::PerNode(&sim.ce[2]),
        dims,
        inv_h,
        &Sweep { axis: 0, half: false, forward: false, sign: 1.0, lo: ez_range.0, hi: ez_range.1, source: &sim.hy },
    );
    cpml_sweep(
        &mut sim.ez,
        &mut sim.pml.psi[PSI_EZY],
        &ay,
        &Scale::PerNode(&sim.ce[2]),
        dims,
        inv_h,
        &Sweep { axis: 1, half: false, forward: false, sign: -1.0, lo: ez_range.0, hi: ez_range.1, source: &sim.hx },
    );
}

fn pml_h(sim: &mut Simulation) {
    let (nx, ny, nz) = (sim.dims.nx, sim.dims.ny, sim.dims.nz);
    let dims = (nx, ny, nz);
    let inv_h = 1.0 / sim.h;
    let dt = sim.dt;
    let az = sim.pml.az.as_ref().expect("3D run has z coefficients").clone();
    let ax = sim.pml.ax.clone();
    let ay = sim.pml.ay.clone();

    let full = ([0, 0, 0], [nx, ny, nz]);

    cpml_sweep(
        &mut sim.hx,
        &mut sim.pml.psi[PSI_HXZ],
        &az,
        &Scale::Uniform(dt),
        dims,
        inv_h,
        &Sweep { axis: 2, half: true, forward: true, sign: 1.0, lo: full.0, hi: full.1, source: &sim.ey },
    );
    cpml_sweep(
        &mut sim.hx,
        &mut sim.pml.psi[PSI_HXY],
        &ay,
        &Scale::Uniform(dt),
        dims,
        inv_h,
        &Sweep { axis: 1, half: true, forward: true, sign: -1.0, lo: full.0, hi: full.1, source: &sim.ez },
    );
    cpml_sweep(
        &mut sim.hy,
        &mut sim.pml.psi[PSI_HYX],
        &ax,
        &Scale::Uniform(dt),
        dims,
        inv_h,
        &Sweep { axis: 0, half: true, forward: true, sign: 1.0, lo: full.0, hi: full.1, source: &sim.ez },
    );
    cpml_sweep(
        &mut sim.hy,
        &mut sim.pml.psi[PSI_HYZ],
        &az,
        &Scale::Uniform(dt),
        dims,
        inv_h,
        &Sweep { axis: 2, half: true, forward: true, sign: -1.0, lo: full.0, hi: full.1, source: &sim.ex },
    );
    cpml_sweep(
        &mut sim.hz,
        &mut sim.pml.psi[PSI_HZY],
        &ay,
        &Scale::Uniform(dt),
        dims,
        inv_h,
        &Sweep { axis: 1, half: true, forward: true, sign: 1.0, lo: full.0, hi: full.1, source: &sim.ex },
    );
    cpml_sweep(
        &mut sim.hz,
        &mut sim.pml.psi[PSI_HZX],
        &ax,
        &Scale::Uniform(dt),
        dims,
        inv_h,
        &Sweep { axis: 0, half: true, forward: true, sign: -1.0, lo: full.0, hi: full.1, source: &sim.ey },
    );
}
