//! 2D (Ex, Ey, Hz) update sweep. Grids at this size are cheap enough that
//! the sweep stays serial; determinism comes for free.
//!
//! E reads past the last stored lattice row are zero (PEC wall), matching
//! the frozen first row, so the closed box is mirror symmetric.

use super::{Injection, Simulation};

const PSI_EXY: usize = 0;
const PSI_EYX: usize = 1;
const PSI_HZX: usize = 2;
const PSI_HZY: usize = 3;

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

fn update_h(sim: &mut Simulation) {
    let (nx, ny) = (sim.dims.nx, sim.dims.ny);
    let inv_h = 1.0 / sim.h;
    let dt = sim.dt;
    let ex = &sim.ex;
    let ey = &sim.ey;
    let hz = &mut sim.hz;
    for j in 0..ny - 1 {
        let row = j * nx;
        let row_up = (j + 1) * nx;
        for i in 0..nx - 1 {
            let dy_ex = (ex[row_up + i] - ex[row + i]) * inv_h;
            let dx_ey = (ey[row + i + 1] - ey[row + i]) * inv_h;
            hz[row + i] += dt * (dy_ex - dx_ey);
        }
        // last column: Ey beyond the wall is zero
        let i = nx - 1;
        let dy_ex = (ex[row_up + i] - ex[row + i]) * inv_h;
        let dx_ey = (0.0 - ey[row + i]) * inv_h;
        hz[row + i] += dt * (dy_ex - dx_ey);
    }
    // last row: Ex beyond the wall is zero
    let j = ny - 1;
    let row = j * nx;
    for i in 0..nx {
        let dy_ex = (0.0 - ex[row + i]) * inv_h;
        let ey_r = if i + 1 < nx { ey[row + i + 1] } else { 0.0 };
        let dx_ey = (ey_r - ey[row + i]) * inv_h;
        hz[row + i] += dt * (dy_ex - dx_ey);
    }
}

fn pml_h(sim: &mut Simulation) {
    let (nx, ny) = (sim.dims.nx, sim.dims.ny);
    let inv_h = 1.0 / sim.h;
    let dt = sim.dt;

    // x absorbers act on the d/dx Ey term (Hz sits on the half-x lattice)
    for (lo, hi) in sim.pml.ax.slabs {
        for j in 0..ny {
            let row = j * nx;
            for i in lo..hi {
                let c = sim.pml.ax.c_half[i];
                let b = sim.pml.ax.b_half[i];
                let ey_r = if i + 1 < nx { sim.ey[row + i + 1] } else { 0.0 };
                let dx_ey = (ey_r - sim.ey[row + i]) * inv_h;
                let psi = &mut sim.pml.psi[PSI_HZX][row + i];
                *psi = b * *psi + c * dx_ey;
                sim.hz[row + i] -= dt * *psi;
            }
        }
    }
    // y absorbers act on the d/dy Ex term
    for (lo, hi) in sim.pml.ay.slabs {
        for j in lo..hi {
            let row = j * nx;
            let b = sim.pml.ay.b_half[j];
            let c = sim.pml.ay.c_half[j];
            for i in 0..nx {
                let ex_u = if j + 1 < ny { sim.ex[row + nx + i] } else { 0.0 };
                let dy_ex = (ex_u - sim.ex[row + i]) * inv_h;
                let psi = &mut sim.pml.psi[PSI_HZY][row + i];
                *psi = b * *psi + c * dy_ex;
                sim.hz[row + i] += dt * *psi;
            }
        }
    }
}

fn update_e(sim: &mut Simulation) {
    let (nx, ny) = (sim.dims.nx, sim.dims.ny);
    let inv_h = 1.0 / sim.h;
    let hz = &sim.hz;

    let ex = &mut sim.ex;
    let ce_x = &sim.ce[0];
    for j in 1..ny {
        let row = j * nx;
        let row_dn = (j - 1) * nx;
        for i in 0..nx {
            let dy_hz = (hz[row + i] - hz[row_dn + i]) * inv_h;
            ex[row + i] += ce_x[row + i] * dy_hz;
        }
    }

    let ey = &mut sim.ey;
    let ce_y = &sim.ce[1];
    for j in 0..ny {
        let row = j * nx;
        for i in 1..nx {
            let dx_hz = (hz[row + i] - hz[row + i - 1]) * inv_h;
            ey[row + i] -= ce_y[row + i] * dx_hz;
        }
    }
}

fn pml_e(sim: &mut Simulation) {
    let (nx, ny) = (sim.dims.nx, sim.dims.ny);
    let inv_h = 1.0 / sim.h;

    // Ex: y absorbers on d/dy Hz (integer-y lattice)
    for (lo, hi) in sim.pml.ay.slabs {
        for j in lo.max(1)..hi {
            let row = j * nx;
            let row_dn = (j - 1) * nx;
            let b = sim.pml.ay.b_int[j];
            let c = sim.pml.ay.c_int[j];
            for i in 0..nx {
                let dy_hz = (sim.hz[row + i] - sim.hz[row_dn + i]) * inv_h;
                let psi = &mut sim.pml.psi[PSI_EXY][row + i];
                *psi = b * *psi + c * dy_hz;
                sim.ex[row + i] += sim.ce[0][row + i] * *psi;
            }
        }
    }
    // Ey: x absorbers on d/dx Hz (integer-x lattice)
    for (lo, hi) in sim.pml.ax.slabs {
        for j in 0..ny {
            let row = j * nx;
            for i in lo.max(1)..hi {
                let b = sim.pml.ax.b_int[i];
                let c = sim.pml.ax.c_int[i];
                let dx_hz = (sim.hz[row + i] - sim.hz[row + i - 1]) * inv_h;
                let psi = &mut sim.pml.psi[PSI_EYX][row + i];
                *psi = b * *psi + c * dx_hz;
                sim.ey[row + i] -= sim.ce[1][row + i] * *psi;
            }
        }
    }
}
