//! Signed-distance level set on the simulation grid.
//!
//! The structure is the region `phi < 0`; the zero contour is its
//! boundary. Values live at cell centers with the simulation cell size.
//! Boundary motion uses first-order upwind advection of the level-set
//! equation, with a fast-marching rebuild after every update.

use crate::error::{Error, Result};
use crate::fmm;
use crate::geom::{Dim, GridDims, Vec3};
use crate::materials::DrudeParameters;
use crate::sim::{MediaMap, SimulationConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct LevelSetField {
    pub dims: GridDims,
    pub h: f64,
    pub origin: Vec3,
    pub two_d: bool,
    pub phi: Vec<f64>,
    /// Accumulated pseudo-time.
    pub tau: f64,
    /// Updates since the last signed-distance rebuild.
    pub reinit_age: u32,
}

/// Connected components of the structure and tunnels/enclosed holes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TopologyStats {
    pub components: usize,
    pub holes: usize,
}

impl LevelSetField {
    /// All-vacuum field on the simulation grid.
    pub fn vacuum(cfg: &SimulationConfig) -> LevelSetField {
        let dims = cfg.dims();
        let far = (cfg.domain + 2.0 * cfg.pml_depth) as f64;
        LevelSetField {
            dims,
            h: cfg.cell_size(),
            origin: cfg.origin(),
            two_d: cfg.dim == Dim::Two,
            phi: vec![far; dims.len()],
            tau: 0.0,
            reinit_age: 0,
        }
    }

    /// Build from an analytic signed-distance function.
    pub fn from_sdf<F: Fn(Vec3) -> f64>(cfg: &SimulationConfig, sdf: F) -> LevelSetField {
        let mut f = LevelSetField::vacuum(cfg);
        for idx in 0..f.dims.len() {
            f.phi[idx] = sdf(f.cell_center(idx));
        }
        f
    }

    /// Finite cylinder (axis along x), exact signed distance. In 2D this
    /// reduces to the axis-aligned rectangle `|x - cx| <= height/2`,
    /// `|y - cy| <= radius`.
    pub fn cylinder(
        cfg: &SimulationConfig,
        radius: f64,
        height: f64,
        center: Vec3,
    ) -> Result<LevelSetField> {
        if !(radius > 0.0 && height > 0.0) {
            return Err(Error::InvalidConfig("cylinder must have positive extents".into()));
        }
        let half = cfg.domain / 2.0 - cfg.cell_size();
        let fits = |v: f64, ext: f64| v - ext > -half && v + ext < half;
        let fits_all = fits(center.x, height / 2.0)
            && fits(center.y, radius)
            && (cfg.dim == Dim::Two || fits(center.z, radius));
        if !fits_all {
            return Err(Error::OutOfDomain("shape intersects the absorber collar".into()));
        }
        let two_d = cfg.dim == Dim::Two;
        Ok(LevelSetField::from_sdf(cfg, move |p| {
            let dx = (p.x - center.x).abs() - height / 2.0;
            let dr = if two_d {
                (p.y - center.y).abs() - radius
            } else {
                let ry = p.y - center.y;
                let rz = p.z - center.z;
                (ry * ry + rz * rz).sqrt() - radius
            };
            let outside = (dx.max(0.0).powi(2) + dr.max(0.0).powi(2)).sqrt();
            dx.max(dr).min(0.0) + outside
        }))
    }

    /// Disk (2D) or ball (3D), exact signed distance.
    pub fn ball(cfg: &SimulationConfig, radius: f64, center: Vec3) -> Result<LevelSetField> {
        if !(radius > 0.0) {
            return Err(Error::InvalidConfig("radius must be positive".into()));
        }
        let half = cfg.domain / 2.0 - cfg.cell_size();
        let fits = |v: f64| v - radius > -half && v + radius < half;
        if !(fits(center.x) && fits(center.y) && (cfg.dim == Dim::Two || fits(center.z))) {
            return Err(Error::OutOfDomain("shape intersects the absorber collar".into()));
        }
        let two_d = cfg.dim == Dim::Two;
        Ok(LevelSetField::from_sdf(cfg, move |p| {
            let d = if two_d {
                let (dx, dy) = (p.x - center.x, p.y - center.y);
                (dx * dx + dy * dy).sqrt()
            } else {
                p.sub(center).norm()
            };
            d - radius
        }))
    }

    pub fn cell_center(&self, idx: usize) -> Vec3 {
        let (i, j, k) = self.dims.coords(idx);
        Vec3::new(
            self.origin.x + (i as f64 + 0.5) * self.h,
            self.origin.y + (j as f64 + 0.5) * self.h,
            if self.two_d { 0.0 } else { self.origin.z + (k as f64 + 0.5) * self.h },
        )
    }

    /// Interpolated level-set value at an arbitrary point.
    pub fn value_at(&self, p: Vec3) -> f64 {
        let f = |v: f64, o: f64| (v - o) / self.h - 0.5;
        let fx = f(p.x, self.origin.x);
        let fy = f(p.y, self.origin.y);
        let fz = if self.two_d { 0.0 } else { f(p.z, self.origin.z) };
        let clamp = |v: f64, n: usize| -> (usize, f64) {
            let v = v.max(0.0).min((n - 1) as f64);
            let i0 = (v.floor() as usize).min(n.saturating_sub(2));
            (i0, v - i0 as f64)
        };
        let (i0, wx) = clamp(fx, self.dims.nx);
        let (j0, wy) = clamp(fy, self.dims.ny);
        if self.two_d {
            let v = |i, j| self.phi[self.dims.idx(i, j, 0)];
            (1.0 - wy) * ((1.0 - wx) * v(i0, j0) + wx * v(i0 + 1, j0))
                + wy * ((1.0 - wx) * v(i0, j0 + 1) + wx * v(i0 + 1, j0 + 1))
        } else {
            let (k0, wz) = clamp(fz, self.dims.nz);
            let mut acc = 0.0;
            for (dk, wk) in [(0usize, 1.0 - wz), (1, wz)] {
                for (dj, wj) in [(0usize, 1.0 - wy), (1, wy)] {
                    for (di, wi) in [(0usize, 1.0 - wx), (1, wx)] {
                        acc += wk * wj * wi * self.phi[self.dims.idx(i0 + di, j0 + dj, k0 + dk)];
                    }
                }
            }
            acc
        }
    }

    /// Fill fraction at a point: linear ramp of the level set over one cell.
    pub fn fill_at(&self, p: Vec3) -> f64 {
        (0.5 - self.value_at(p) / self.h).clamp(0.0, 1.0)
    }

    /// Per-cell fill fractions (cell centers).
    pub fn interior_mask(&self) -> Vec<f64> {
        self.phi.iter().map(|&v| (0.5 - v / self.h).clamp(0.0, 1.0)).collect()
    }

    /// Material volume implied by the mask.
    pub fn volume(&self) -> f64 {
        let cell = self.h.powi(if self.two_d { 2 } else { 3 });
        self.interior_mask().iter().sum::<f64>() * cell
    }

    /// Material map for the field solver: Drude metal scaled by fill.
    pub fn media_map(&self, cfg: &SimulationConfig, metal: DrudeParameters) -> MediaMap {
        MediaMap::vacuum(cfg).with_drude(cfg, metal, |p| self.fill_at(p))
    }

    /// Rebuild the signed distance. Returns the rebuilt field and whether
    /// an interior exists (an all-vacuum field comes back unchanged with
    /// `false`).
    pub fn reinitialize(&self) -> (LevelSetField, bool) {
        match fmm::reinitialize(&self.phi, &self.dims, self.h, self.two_d) {
            Some(phi) => {
                let mut out = self.clone();
                out.phi = phi;
                out.reinit_age = 0;
                (out, true)
            }
            None => (self.clone(), false),
        }
    }

    /// One upwind advection step `phi -= dtau * v |grad phi|`.
    /// `v > 0` moves the boundary outward along the normal.
    pub fn advect(&self, v: &[f64], dtau: f64) -> Result<LevelSetField> {
        if v.len() != self.phi.len() {
            return Err(Error::InvalidConfig("velocity field size mismatch".into()));
        }
        let vmax = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if vmax * dtau > 0.5 * self.h * (1.0 + 1e-12) {
            return Err(Error::InvalidConfig(format!(
                "advection CFL violated: max |v| dtau = {} > h/2 = {}",
                vmax * dtau,
                0.5 * self.h
            )));
        }
        let dims = self.dims;
        let inv_h = 1.0 / self.h;
        let axes = if self.two_d { 2 } else { 3 };
        let mut out = self.clone();
        for idx in 0..self.phi.len() {
            let vel = v[idx];
            if vel == 0.0 {
                continue;
            }
            let (i, j, k) = dims.coords(idx);
            let pos = [i, j, k];
            let n = [dims.nx, dims.ny, dims.nz];
            let stride = [1usize, dims.nx, dims.nx * dims.ny];
            let mut grad_sq = 0.0;
            for a in 0..axes {
                let bwd = if pos[a] > 0 {
                    (self.phi[idx] - self.phi[idx - stride[a]]) * inv_h
                } else {
                    0.0
                };
                let fwd = if pos[a] + 1 < n[a] {
                    (self.phi[idx + stride[a]] - self.phi[idx]) * inv_h
                } else {
                    0.0
                };
                grad_sq += if vel > 0.0 {
                    bwd.max(0.0).powi(2) + fwd.min(0.0).powi(2)
                } else {
                    bwd.min(0.0).powi(2) + fwd.max(0.0).powi(2)
                };
            }
            out.phi[idx] -= dtau * vel * grad_sq.sqrt();
        }
        out.tau += dtau;
        out.reinit_age += 1;
        Ok(out)
    }

    /// Force vacuum inside a protected region given by its signed distance
    /// (negative inside). Used to keep the contour out of the absorber and
    /// away from the atom.
    pub fn enforce_vacuum<F: Fn(Vec3) -> f64>(&mut self, region_sdf: F) {
        for idx in 0..self.phi.len() {
            let b = region_sdf(self.cell_center(idx));
            if -b > self.phi[idx] {
                self.phi[idx] = -b;
            }
        }
    }

    /// Largest deviation of `|grad phi|` from 1 within `band` cells of the
    /// contour.
    pub fn gradient_deviation(&self, band: f64) -> f64 {
        let dims = self.dims;
        let mut worst = 0.0f64;
        for idx in 0..self.phi.len() {
            if self.phi[idx].abs() > band * self.h {
                continue;
            }
            let (i, j, k) = dims.coords(idx);
            let pos = [i, j, k];
            let n = [dims.nx, dims.ny, dims.nz];
            let stride = [1usize, dims.nx, dims.nx * dims.ny];
            let axes = if self.two_d { 2 } else { 3 };
            let mut acc = 0.0;
            let mut interiorish = true;
            for a in 0..axes {
                if pos[a] == 0 || pos[a] + 1 >= n[a] {
                    interiorish = false;
                    break;
                }
                let g = (self.phi[idx + stride[a]] - self.phi[idx - stride[a]]) / (2.0 * self.h);
                acc += g * g;
            }
            if interiorish {
                worst = worst.max((acc.sqrt() - 1.0).abs());
            }
        }
        worst
    }

    /// Component and hole counts of the voxelized structure.
    pub fn topology_stats(&self) -> TopologyStats {
        let solid: Vec<bool> = self.phi.iter().map(|&v| v < 0.0).collect();
        let components = count_components(&solid, &self.dims, self.two_d, false);
        let holes = if self.two_d {
            // enclosed vacuum pockets
            let vacuum: Vec<bool> = solid.iter().map(|&s| !s).collect();
            count_components(&vacuum, &self.dims, true, true)
        } else {
            // tunnels from the Euler characteristic of the cubical complex:
            // chi = components - tunnels + cavities
            let vacuum: Vec<bool> = solid.iter().map(|&s| !s).collect();
            let cavities = count_components(&vacuum, &self.dims, false, true);
            let chi = euler_characteristic_3d(&solid, &self.dims);
            (components as i64 + cavities as i64 - chi).max(0) as usize
        };
        TopologyStats { components, holes }
    }
}

/// Flood-fill component count; `enclosed_only` skips components touching
/// the grid boundary.
fn count_components(mask: &[bool], dims: &GridDims, two_d: bool, enclosed_only: bool) -> usize {
    let mut seen = vec![false; mask.len()];
    let mut count = 0;
    let mut stack = Vec::new();
    for start in 0..mask.len() {
        if !mask[start] || seen[start] {
            continue;
        }
        let mut touches_boundary = false;
        stack.push(start);
        seen[start] = true;
        while let Some(idx) = stack.pop() {
            let (i, j, k) = dims.coords(idx);
            if i == 0
                || j == 0
                || i + 1 == dims.nx
                || j + 1 == dims.ny
                || (!two_d && (k == 0 || k + 1 == dims.nz))
            {
                touches_boundary = true;
            }
            let mut push = |cand: usize| {
                if mask[cand] && !seen[cand] {
                    seen[cand] = true;
                    stack.push(cand);
                }
            };
            if i > 0 {
                push(idx - 1);
            }
            if i + 1 < dims.nx {
                push(idx + 1);
            }
            if j > 0 {
                push(idx - dims.nx);
            }
            if j + 1 < dims.ny {
                push(idx + dims.nx);
            }
            if !two_d {
                if k > 0 {
                    push(idx - dims.nx * dims.ny);
                }
                if k + 1 < dims.nz {
                    push(idx + dims.nx * dims.ny);
                }
            }
        }
        if !(enclosed_only && touches_boundary) {
            count += 1;
        }
    }
    count
}

/// Euler characteristic `V - E + F - C` of the union of occupied voxels.
fn euler_characteristic_3d(solid: &[bool], dims: &GridDims) -> i64 {
    let (nx, ny, nz) = (dims.nx, dims.ny, dims.nz);
    let vx = nx + 1;
    let vy = ny + 1;
    let vz = nz + 1;
    let vidx = |i: usize, j: usize, k: usize| (k * vy + j) * vx + i;

    let mut verts = vec![false; vx * vy * vz];
    let mut ex = vec![false; vx * vy * vz]; // edge along +x from vertex
    let mut ey = vec![false; vx * vy * vz];
    let mut ez = vec![false; vx * vy * vz];
    let mut fxy = vec![false; vx * vy * vz]; // face spanned by +x, +y
    let mut fyz = vec![false; vx * vy * vz];
    let mut fxz = vec![false; vx * vy * vz];
    let mut cubes: i64 = 0;

    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                if !solid[dims.idx(i, j, k)] {
                    continue;
                }
                cubes += 1;
                for dk in 0..2 {
                    for dj in 0..2 {
                        for di in 0..2 {
                            verts[vidx(i + di, j + dj, k + dk)] = true;
                        }
                    }
                }
                for dk in 0..2 {
                    for dj in 0..2 {
                        ex[vidx(i, j + dj, k + dk)] = true;
                    }
                    for di in 0..2 {
                        ey[vidx(i + di, j, k + dk)] = true;
                    }
                }
                for dj in 0..2 {
                    for di in 0..2 {
                        ez[vidx(i + di, j + dj, k)] = true;
                    }
                }
                for dk in 0..2 {
                    fxy[vidx(i, j, k + dk)] = true;
                }
                for di in 0..2 {
                    fyz[vidx(i + di, j, k)] = true;
                }
                for dj in 0..2 {
                    fxz[vidx(i, j + dj, k)] = true;
                }
            }
        }
    }

    let count = |v: &[bool]| v.iter().filter(|&&b| b).count() as i64;
    count(&verts) - (count(&ex) + count(&ey) + count(&ez))
        + (count(&fxy) + count(&fyz) + count(&fxz))
        - cubes
}
