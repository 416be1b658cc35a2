//! Forward/adjoint simulation pair and the overlap velocity.
//!
//! The shape derivative needs, on the boundary band, the time integral of
//! `E . E^A` where the adjoint field is sourced at the atom by the kernel
//! and propagates backward in time. Reciprocity turns that into an
//! ordinary forward run: drive the atom node with the time-reversed
//! kernel, record the band, then reverse the recorded arrays. Pairing the
//! forward and reversed-adjoint samples index by index then reproduces the
//! anti-causal overlap exactly; this alignment is frozen by the gradient
//! regression tests.

use crate::error::{Error, Result};
use crate::geom::{Axis, GridDims, Vec3};
use crate::levelset::LevelSetField;
use crate::pipeline::Pipeline;
use crate::sim::{
    run_simulation_multi, BandRequest, Component, GridBand, MediaMap, PointSource, RunOutput,
    VolumeRecord,
};

/// Reverse-time drive: one or more point currents whose waveforms are the
/// kernel samples played backward.
#[derive(Debug, Clone)]
pub struct AdjointSource {
    pub sources: Vec<PointSource>,
}

impl AdjointSource {
    /// Single dipole at the atom; same `dt` and length as the forward run
    /// by construction.
    pub fn from_kernel(pipe: &Pipeline) -> AdjointSource {
        let mut waveform = pipe.kernel.samples.clone();
        waveform.reverse();
        AdjointSource {
            sources: vec![PointSource {
                position: pipe.atom_pos,
                orientation: Axis::X,
                waveform,
            }],
        }
    }

    /// Derivative dipole: the merit observes the x-derivative of the field
    /// at the atom, so its adjoint drive is the x-derivative of a dipole —
    /// two opposed kernel currents at the gradient-probe nodes, scaled by
    /// 1/(2h). Keeps every spatial derivative away from material
    /// interfaces.
    pub fn derivative_dipole(pipe: &Pipeline, band_limit: bool) -> crate::error::Result<AdjointSource> {
        let h = pipe.cfg.cell_size();
        let mut waveform = if band_limit {
            band_limited_kernel(pipe)?
        } else {
            pipe.kernel.samples.clone()
        };
        waveform.reverse();
        let scaled = |scale: f64| -> Vec<f64> { waveform.iter().map(|v| v * scale).collect() };
        Ok(AdjointSource {
            sources: vec![
                PointSource {
                    position: pipe.atom_pos.add(Vec3::new(h, 0.0, 0.0)),
                    orientation: Axis::X,
                    waveform: scaled(1.0 / (2.0 * h)),
                },
                PointSource {
                    position: pipe.atom_pos.sub(Vec3::new(h, 0.0, 0.0)),
                    orientation: Axis::X,
                    waveform: scaled(-1.0 / (2.0 * h)),
                },
            ],
        })
    }

    /// Single dipole with the kernel spectrum rolled off above the band
    /// the grid propagates faithfully (about six cells per wavelength).
    /// The forward field carries almost no content up there, so the exact
    /// overlap is unchanged while the grid artifacts go away.
    pub fn band_limited(pipe: &Pipeline) -> crate::error::Result<AdjointSource> {
        let mut waveform = band_limited_kernel(pipe)?;
        waveform.reverse();
        Ok(AdjointSource {
            sources: vec![PointSource {
                position: pipe.atom_pos,
                orientation: Axis::X,
                waveform,
            }],
        })
    }
}

fn band_limited_kernel(pipe: &Pipeline) -> crate::error::Result<Vec<f64>> {
    let h = pipe.cfg.cell_size();
    let grid_cutoff = 2.0 * std::f64::consts::PI / (6.0 * h);
    let taper_end = grid_cutoff.min(pipe.kernel.omega_max);
    let kernel = crate::kernel::build_kernel_tapered(
        &pipe.atom,
        &pipe.waveform,
        pipe.kernel.n_omega,
        pipe.kernel.omega_max,
        pipe.cfg.steps,
        0.8 * taper_end,
        taper_end,
    )?;
    Ok(kernel.samples)
}

/// Cells within `width` cells of the zero contour.
pub fn band_from_level_set(phi: &LevelSetField, width_cells: f64) -> GridBand {
    let limit = width_cells * phi.h;
    let cells = (0..phi.phi.len())
        .filter(|&idx| phi.phi[idx].abs() <= limit)
        .map(|idx| idx as u32)
        .collect();
    GridBand::new(phi.dims, cells)
}

/// Forward run: atom driven by the physical source, probes and band
/// recorded.
pub fn run_forward(
    pipe: &Pipeline,
    media: &MediaMap,
    band: &GridBand,
    stride: usize,
) -> Result<RunOutput> {
    pipe.run_fields(media, Some(BandRequest::new(band.clone(), stride)))
}

/// Adjoint run with the default band-limited drive; the recorded band
/// history is index-reversed before storage.
pub fn run_adjoint(
    pipe: &Pipeline,
    media: &MediaMap,
    band: &GridBand,
    stride: usize,
) -> Result<VolumeRecord> {
    let adj = AdjointSource::band_limited(pipe)?;
    run_adjoint_with(pipe, media, band, stride, &adj)
}

/// Adjoint run with an explicit drive.
pub fn run_adjoint_with(
    pipe: &Pipeline,
    media: &MediaMap,
    band: &GridBand,
    stride: usize,
    adj: &AdjointSource,
) -> Result<VolumeRecord> {
    let out = run_simulation_multi(
        &pipe.cfg,
        media,
        &adj.sources,
        &[],
        Some(BandRequest::new(band.clone(), stride)),
    )?;
    let mut vol = out.volume.expect("band recording requested");
    vol.reverse_time();
    Ok(vol)
}

/// Time-integrated overlap weight per band cell (no spatial derivative):
/// pairs with the derivative-dipole adjoint drive.
pub fn overlap_weight(forward: &VolumeRecord, adjoint: &VolumeRecord) -> Result<OverlapField> {
    if forward.band != adjoint.band
        || forward.samples != adjoint.samples
        || forward.stride != adjoint.stride
        || forward.n_comp != adjoint.n_comp
    {
        return Err(Error::RecordMismatch("forward and adjoint bands differ".into()));
    }
    let band = &forward.band;
    let n_cells = band.len();
    let n_comp = forward.n_comp;
    let dt_sample = forward.dt * forward.stride as f64;
    let mut w = vec![0.0; n_cells];
    for s in 0..forward.samples {
        let base = s * n_cells * n_comp;
        for (slot, acc) in w.iter_mut().enumerate() {
            let off = base + slot * n_comp;
            let mut dot = 0.0;
            for c in 0..n_comp {
                dot += forward.data[off + c] * adjoint.data[off + c];
            }
            *acc += dot * dt_sample;
        }
    }
    let values =
        band.cells.iter().enumerate().map(|(slot, &cell)| (cell as usize, w[slot])).collect();
    Ok(OverlapField { dims: band.dims, values })
}

/// Scalar overlap field on the band:
/// `v(r) = d/dx' \int dt' E(r', t') . E^A(r', t')`.
#[derive(Debug, Clone)]
pub struct OverlapField {
    pub dims: GridDims,
    /// (cell index, velocity) for cells where the x-derivative exists.
    pub values: Vec<(usize, f64)>,
}

impl OverlapField {
    pub fn is_null(&self, tol: f64) -> bool {
        self.values.iter().all(|&(_, v)| v.abs() <= tol)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, &(_, v)| m.max(v.abs()))
    }
}

/// Pointwise time integral of `E . E^A` followed by a central-difference
/// x-derivative on the band, divided by the grid spacing `h`. `forward`
/// should hold the scattered field; `adjoint` the total reversed-time
/// field.
pub fn overlap_velocity(
    forward: &VolumeRecord,
    adjoint: &VolumeRecord,
    h: f64,
) -> Result<OverlapField> {
    if forward.band != adjoint.band
        || forward.samples != adjoint.samples
        || forward.stride != adjoint.stride
        || forward.n_comp != adjoint.n_comp
    {
        return Err(Error::RecordMismatch("forward and adjoint bands differ".into()));
    }
    let band = &forward.band;
    let n_cells = band.len();
    let n_comp = forward.n_comp;
    let dt_sample = forward.dt * forward.stride as f64;

    // time-integrated dot product per band cell
    let mut w = vec![0.0; n_cells];
    for s in 0..forward.samples {
        let base = s * n_cells * n_comp;
        for (slot, acc) in w.iter_mut().enumerate() {
            let off = base + slot * n_comp;
            let mut dot = 0.0;
            for c in 0..n_comp {
                dot += forward.data[off + c] * adjoint.data[off + c];
            }
            *acc += dot * dt_sample;
        }
    }

    // central-difference d/dx where both x-neighbors are recorded
    let dims = band.dims;
    let slot_map = band.slot_map();
    let mut values = Vec::new();
    for &cell in band.cells.iter() {
        let (i, j, k) = dims.coords(cell as usize);
        if i == 0 || i + 1 >= dims.nx {
            continue;
        }
        let left = slot_map[dims.idx(i - 1, j, k)];
        let right = slot_map[dims.idx(i + 1, j, k)];
        if left < 0 || right < 0 {
            continue;
        }
        let v = (w[right as usize] - w[left as usize]) / (2.0 * h);
        values.push((cell as usize, v));
    }
    Ok(OverlapField { dims, values })
}

/// Production velocity assembly, frozen by the gradient regression tests:
///
/// 1. drive the adjoint with the derivative dipole (band limited),
/// 2. time-integrate `E_scattered . E^A` on the band,
/// 3. take the vacuum-side trace of that weight (the response of a good
///    conductor is carried by the strong-field side; the screened
///    interior values are unreliable),
/// 4. extend it along interface normals over the whole grid,
/// 5. negate, so that advecting with the result descends the merit.
///
/// `phi` must be a signed distance.
pub fn boundary_velocity(
    phi: &LevelSetField,
    forward_scattered: &VolumeRecord,
    adjoint: &VolumeRecord,
) -> Result<Vec<f64>> {
    let weight = overlap_weight(forward_scattered, adjoint)?;
    let h = phi.h;
    let mut seeds: Vec<(usize, f64)> = weight
        .values
        .iter()
        .filter(|&&(cell, _)| phi.phi[cell] >= 0.5 * h && phi.phi[cell] <= 2.5 * h)
        .map(|&(cell, v)| (cell, -v))
        .collect();
    if seeds.is_empty() {
        return Ok(vec![0.0; phi.phi.len()]);
    }
    // one tangential smoothing pass over the seed shell evens out
    // cell-scale roughness of the raw overlap
    let slot: std::collections::HashMap<usize, usize> =
        seeds.iter().enumerate().map(|(q, &(cell, _))| (cell, q)).collect();
    let raw: Vec<f64> = seeds.iter().map(|&(_, v)| v).collect();
    let dims = phi.dims;
    for (cell, v) in seeds.iter_mut() {
        let (i, j, k) = dims.coords(*cell);
        let mut acc = 0.0;
        let mut cnt = 0.0;
        let mut look = |ii: isize, jj: isize, kk: isize| {
            if dims.contains(ii, jj, kk) {
                if let Some(&q) = slot.get(&dims.idx(ii as usize, jj as usize, kk as usize)) {
                    acc += raw[q];
                    cnt += 1.0;
                }
            }
        };
        look(i as isize - 1, j as isize, k as isize);
        look(i as isize + 1, j as isize, k as isize);
        look(i as isize, j as isize - 1, k as isize);
        look(i as isize, j as isize + 1, k as isize);
        if !phi.two_d {
            look(i as isize, j as isize, k as isize - 1);
            look(i as isize, j as isize, k as isize + 1);
        }
        if cnt > 0.0 {
            *v = 0.5 * *v + 0.5 * acc / cnt;
        }
    }
    Ok(crate::fmm::extend_velocity(&phi.phi, &phi.dims, h, phi.two_d, &seeds))
}
