//! Yee-grid FDTD Maxwell solver.
//!
//! Uniform staggered grid in 2D (`Ex, Ey, Hz`) or 3D (all six components),
//! Drude media via the auxiliary-differential-equation polarization
//! current, CPML absorbing collars, point current sources with arbitrary
//! sampled waveforms, point probes with linear interpolation, and volume
//! recording of cell-centered fields on an arbitrary cell band.
//!
//! Units: `c = eps0 = mu0 = 1`. With cell size `h` the time step is
//! `dt = S h` for Courant factor `S`.
//!
//! Staggering: integer index `i` sits at coordinate `origin + i h`;
//! `Ex` lives at `(i+1/2, j, k)`, `Ey` at `(i, j+1/2, k)`,
//! `Ez` at `(i, j, k+1/2)`, `Hx` at `(i, j+1/2, k+1/2)`,
//! `Hy` at `(i+1/2, j, k+1/2)`, `Hz` at `(i+1/2, j+1/2, k)`.
//! All component arrays have one entry per cell; un-updated boundary
//! entries act as the PEC wall behind the absorber.

mod pml;
mod step2d;
mod step3d;

use crate::error::{Error, Result};
use crate::geom::{Axis, Dim, GridDims, Vec3};
use crate::materials::DrudeParameters;
use pml::AxisCoeffs;

/// Default memory budget for volume recordings (bytes).
const DEFAULT_RECORD_BUDGET: usize = 2 << 30;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationConfig {
    pub dim: Dim,
    /// Interior (non-PML) side length in `L0`.
    pub domain: f64,
    /// Cells per `L0`.
    pub resolution: usize,
    /// Absorber depth in `L0` on every face.
    pub pml_depth: f64,
    /// Courant factor `S = dt/h`.
    pub courant: f64,
    /// Number of leapfrog steps per run.
    pub steps: usize,
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.resolution < 8 {
            return Err(Error::InvalidConfig(format!(
                "resolution {} below minimum of 8 cells per L0",
                self.resolution
            )));
        }
        // pml_depth = 0 selects a closed (PEC-walled) box; a thinner-than-
        // half-wavelength absorber is never acceptable.
        if self.pml_depth != 0.0 && self.pml_depth < 0.5 {
            return Err(Error::InvalidConfig("PML depth below 0.5 L0".into()));
        }
        let limit = 1.0 / (self.dim.count() as f64).sqrt();
        if !(self.courant > 0.0 && self.courant <= limit) {
            return Err(Error::InvalidConfig(format!(
                "Courant factor {} outside (0, {:.4}]",
                self.courant, limit
            )));
        }
        if !(self.domain > 0.0) {
            return Err(Error::InvalidConfig("domain size must be positive".into()));
        }
        if self.steps == 0 {
            return Err(Error::InvalidConfig("step count must be positive".into()));
        }
        Ok(())
    }

    pub fn cell_size(&self) -> f64 {
        1.0 / self.resolution as f64
    }

    pub fn dt(&self) -> f64 {
        self.courant * self.cell_size()
    }

    /// Cells per axis including both absorber collars.
    pub fn cells_per_axis(&self) -> usize {
        ((self.domain + 2.0 * self.pml_depth) * self.resolution as f64).round() as usize
    }

    /// Cells across the interior region.
    pub fn interior_cells(&self) -> usize {
        (self.domain * self.resolution as f64).round() as usize
    }

    pub fn pml_cells(&self) -> usize {
        (self.pml_depth * self.resolution as f64).round() as usize
    }

    pub fn dims(&self) -> GridDims {
        let n = self.cells_per_axis();
        match self.dim {
            Dim::Two => GridDims::new(n, n, 1),
            Dim::Three => GridDims::new(n, n, n),
        }
    }

    /// Minimum corner of the grid; the interior is centered on the origin.
    pub fn origin(&self) -> Vec3 {
        let half = self.domain / 2.0 + self.pml_depth;
        match self.dim {
            Dim::Two => Vec3::new(-half, -half, 0.0),
            Dim::Three => Vec3::new(-half, -half, -half),
        }
    }

    /// Whether `p` lies strictly inside the non-PML interior.
    pub fn in_interior(&self, p: Vec3) -> bool {
        let half = self.domain / 2.0;
        let ok = |v: f64| v > -half && v < half;
        match self.dim {
            Dim::Two => ok(p.x) && ok(p.y),
            Dim::Three => ok(p.x) && ok(p.y) && ok(p.z),
        }
    }

    /// Simulated time at probe sample `n` (fields recorded after each step).
    pub fn sample_time(&self, n: usize) -> f64 {
        (n as f64 + 1.0) * self.dt()
    }
}

/// Field component identifiers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    Ex,
    Ey,
    Ez,
}

impl Component {
    pub fn axis(self) -> Axis {
        match self {
            Component::Ex => Axis::X,
            Component::Ey => Axis::Y,
            Component::Ez => Axis::Z,
        }
    }

    pub fn from_axis(axis: Axis) -> Component {
        match axis {
            Axis::X => Component::Ex,
            Axis::Y => Component::Ey,
            Axis::Z => Component::Ez,
        }
    }

    /// Lattice offset of the component in units of `h`.
    pub fn offset(self, dim: Dim) -> Vec3 {
        let _ = dim;
        match self {
            Component::Ex => Vec3::new(0.5, 0.0, 0.0),
            Component::Ey => Vec3::new(0.0, 0.5, 0.0),
            Component::Ez => Vec3::new(0.0, 0.0, 0.5),
        }
    }
}

/// A point current source with a sampled waveform.
#[derive(Debug, Clone)]
pub struct PointSource {
    pub position: Vec3,
    pub orientation: Axis,
    /// Injection samples, one per step.
    pub waveform: Vec<f64>,
}

impl PointSource {
    pub fn validate(&self, cfg: &SimulationConfig) -> Result<()> {
        if !cfg.in_interior(self.position) {
            return Err(Error::OutOfDomain(format!(
                "source at ({}, {}, {}) not inside the non-PML region",
                self.position.x, self.position.y, self.position.z
            )));
        }
        if self.waveform.len() > cfg.steps {
            return Err(Error::InvalidConfig(format!(
                "waveform length {} exceeds step count {}",
                self.waveform.len(),
                cfg.steps
            )));
        }
        // The smooth-start requirement lives in SourceWaveform::build;
        // reverse-time drives legitimately begin away from zero.
        Ok(())
    }
}

/// A probe position and component to record each step.
#[derive(Debug, Clone, Copy)]
pub struct ProbePoint {
    pub position: Vec3,
    pub component: Component,
}

/// Recorded time series at one probe.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeRecord {
    pub position: Vec3,
    pub component: Component,
    pub series: Vec<f64>,
    pub dt: f64,
}

impl ProbeRecord {
    pub fn time(&self, n: usize) -> f64 {
        (n as f64 + 1.0) * self.dt
    }

    pub fn compatible(&self, other: &ProbeRecord) -> Result<()> {
        if (self.dt - other.dt).abs() > 1e-15 {
            return Err(Error::RecordMismatch("probe dt differs".into()));
        }
        if self.series.len() != other.series.len() {
            return Err(Error::RecordMismatch("probe length differs".into()));
        }
        if self.component != other.component {
            return Err(Error::RecordMismatch("probe component differs".into()));
        }
        Ok(())
    }
}

/// Set of cells (by linear index) on which volume fields are recorded.
#[derive(Debug, Clone, PartialEq)]
pub struct GridBand {
    pub dims: GridDims,
    /// Sorted cell indices.
    pub cells: Vec<u32>,
}

impl GridBand {
    pub fn new(dims: GridDims, mut cells: Vec<u32>) -> GridBand {
        cells.sort_unstable();
        cells.dedup();
        GridBand { dims, cells }
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Map from linear cell index to slot in `cells` (-1 when absent).
    pub fn slot_map(&self) -> Vec<i32> {
        let mut map = vec![-1; self.dims.len()];
        for (slot, &c) in self.cells.iter().enumerate() {
            map[c as usize] = slot as i32;
        }
        map
    }
}

/// Cell-centered electric field history on a band, sampled every `stride` steps.
#[derive(Debug, Clone)]
pub struct VolumeRecord {
    pub band: GridBand,
    pub n_comp: usize,
    pub stride: usize,
    pub dt: f64,
    /// Sample-major layout: `data[sample][cell][comp]` flattened.
    pub data: Vec<f64>,
    pub samples: usize,
}

impl VolumeRecord {
    pub fn value(&self, sample: usize, slot: usize, comp: usize) -> f64 {
        self.data[(sample * self.band.len() + slot) * self.n_comp + comp]
    }

    /// Elementwise difference (`self - other`), used to isolate scattering.
    pub fn subtract(&self, other: &VolumeRecord) -> Result<VolumeRecord> {
        if self.band != other.band
            || self.stride != other.stride
            || self.samples != other.samples
            || (self.dt - other.dt).abs() > 1e-15
        {
            return Err(Error::RecordMismatch("volume records not aligned".into()));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(VolumeRecord { band: self.band.clone(), data, ..*self })
    }

    /// Reverse the sample order in place (reverse-time bookkeeping).
    pub fn reverse_time(&mut self) {
        let chunk = self.band.len() * self.n_comp;
        if chunk == 0 {
            return;
        }
        let half = self.samples / 2;
        for s in 0..half {
            let a = s * chunk;
            let b = (self.samples - 1 - s) * chunk;
            for o in 0..chunk {
                self.data.swap(a + o, b + o);
            }
        }
    }
}

/// Drude auxiliary state: polarization currents on the metallic nodes.
struct DrudeState {
    decay: f64,
    /// (node index, kb coefficient) per component lattice.
    nodes: [Vec<(u32, f64)>; 3],
    /// Full-size current arrays per component (zero off-metal).
    j: [Vec<f64>; 3],
}

/// Per-component PML auxiliary fields. Each E component keeps one psi per
/// transverse axis, likewise for H.
struct PmlState {
    ax: AxisCoeffs,
    ay: AxisCoeffs,
    az: Option<AxisCoeffs>,
    psi: Vec<Vec<f64>>,
}

/// Material description on the grid, sampled on the E-node lattices.
#[derive(Debug, Clone)]
pub struct MediaMap {
    pub dims: GridDims,
    pub drude: Option<DrudeParameters>,
    /// Metal fill fraction at each E node, per component lattice.
    pub fill: [Vec<f64>; 3],
    /// Perfect-conductor flags at each E node.
    pub pec: [Vec<bool>; 3],
}

impl MediaMap {
    pub fn vacuum(cfg: &SimulationConfig) -> MediaMap {
        let n = cfg.dims().len();
        MediaMap {
            dims: cfg.dims(),
            drude: None,
            fill: [vec![0.0; n], vec![0.0; n], vec![0.0; n]],
            pec: [vec![false; n], vec![false; n], vec![false; n]],
        }
    }

    /// Mark as PEC every E node whose position satisfies `inside`.
    pub fn with_pec<F: Fn(Vec3) -> bool>(mut self, cfg: &SimulationConfig, inside: F) -> MediaMap {
        for (ci, comp) in [Component::Ex, Component::Ey, Component::Ez].iter().enumerate() {
            if cfg.dim == Dim::Two && *comp == Component::Ez {
                continue;
            }
            for idx in 0..self.dims.len() {
                let p = node_position(cfg, *comp, idx);
                if inside(p) {
                    self.pec[ci][idx] = true;
                }
            }
        }
        self
    }

    /// Set the Drude fill fraction at every E node from `fill_at`.
    pub fn with_drude<F: Fn(Vec3) -> f64>(
        mut self,
        cfg: &SimulationConfig,
        params: DrudeParameters,
        fill_at: F,
    ) -> MediaMap {
        self.drude = Some(params);
        for (ci, comp) in [Component::Ex, Component::Ey, Component::Ez].iter().enumerate() {
            if cfg.dim == Dim::Two && *comp == Component::Ez {
                continue;
            }
            for idx in 0..self.dims.len() {
                let p = node_position(cfg, *comp, idx);
                self.fill[ci][idx] = fill_at(p).clamp(0.0, 1.0);
            }
        }
        self
    }

    fn has_metal(&self) -> bool {
        self.drude.is_some() && self.fill.iter().any(|f| f.iter().any(|&v| v > 0.0))
    }
}

/// Nearest lattice node of `comp` to an arbitrary point. Sources snap here;
/// placing probes at snapped positions keeps source and probe referring to
/// the same grid location.
pub fn snap_to_node(cfg: &SimulationConfig, comp: Component, p: Vec3) -> Vec3 {
    let h = cfg.cell_size();
    let o = cfg.origin();
    let off = comp.offset(cfg.dim);
    let n = cfg.cells_per_axis() as f64 - 1.0;
    let snap = |v: f64, omin: f64, ofs: f64| -> f64 {
        let i = ((v - omin) / h - ofs).round().clamp(0.0, n);
        omin + (i + ofs) * h
    };
    Vec3::new(
        snap(p.x, o.x, off.x),
        snap(p.y, o.y, off.y),
        if cfg.dim == Dim::Two { 0.0 } else { snap(p.z, o.z, off.z) },
    )
}

/// Position of an E node with component `comp` and linear index `idx`.
pub fn node_position(cfg: &SimulationConfig, comp: Component, idx: usize) -> Vec3 {
    let dims = cfg.dims();
    let (i, j, k) = dims.coords(idx);
    let h = cfg.cell_size();
    let o = cfg.origin();
    let off = comp.offset(cfg.dim);
    Vec3::new(
        o.x + (i as f64 + off.x) * h,
        o.y + (j as f64 + off.y) * h,
        if cfg.dim == Dim::Two { 0.0 } else { o.z + (k as f64 + off.z) * h },
    )
}

/// One running FDTD simulation.
pub struct Simulation {
    pub cfg: SimulationConfig,
    dims: GridDims,
    h: f64,
    dt: f64,
    origin: Vec3,
    // field arrays; in 2D only ex, ey, hz are used
    ex: Vec<f64>,
    ey: Vec<f64>,
    ez: Vec<f64>,
    hx: Vec<f64>,
    hy: Vec<f64>,
    hz: Vec<f64>,
    /// dt / eps at each E node, per component.
    ce: [Vec<f64>; 3],
    drude: Option<DrudeState>,
    pec_nodes: [Vec<u32>; 3],
    pml: PmlState,
    step_index: usize,
}

/// Injection request for one step: component, node index, current density.
#[derive(Debug, Clone, Copy)]
pub struct Injection {
    pub component: Component,
    pub idx: usize,
    pub density: f64,
}

/// A source bound to its snapped grid node.
#[derive(Debug, Clone)]
pub struct BoundSource {
    pub component: Component,
    pub idx: usize,
    /// 1 / h^d: converts the waveform (current moment) to a density.
    pub scale: f64,
    pub waveform: Vec<f64>,
}

impl Simulation {
    pub fn new(cfg: &SimulationConfig, media: &MediaMap) -> Result<Simulation> {
        cfg.validate()?;
        let dims = cfg.dims();
        if media.dims != dims {
            return Err(Error::InvalidConfig(format!(
                "media grid {}x{}x{} does not match simulation grid {}x{}x{}",
                media.dims.nx, media.dims.ny, media.dims.nz, dims.nx, dims.ny, dims.nz
            )));
        }
        if let Some(d) = &media.drude {
            d.validate()?;
        }
        let n = dims.len();
        let h = cfg.cell_size();
        let dt = cfg.dt();

        // dt/eps per node: metal nodes blend eps_inf by fill fraction.
        let mut ce = [vec![dt; n], vec![dt; n], vec![dt; n]];
        if let Some(p) = &media.drude {
            if p.eps_inf != 1.0 {
                for c in 0..3 {
                    for idx in 0..n {
                        let f = media.fill[c][idx];
                        if f > 0.0 {
                            ce[c][idx] = dt / (1.0 + f * (p.eps_inf - 1.0));
                        }
                    }
                }
            }
        }

        let drude = if media.has_metal() {
            let p = media.drude.unwrap();
            let half = 0.5 * p.gamma_p * dt;
            let decay = (1.0 - half) / (1.0 + half);
            let kb0 = p.omega_p * p.omega_p * dt / (1.0 + half);
            let mut nodes: [Vec<(u32, f64)>; 3] = [Vec::new(), Vec::new(), Vec::new()];
            for c in 0..3 {
                for idx in 0..n {
                    let f = media.fill[c][idx];
                    if f > 0.0 && !media.pec[c][idx] {
                        nodes[c].push((idx as u32, f * kb0));
                    }
                }
            }
            Some(DrudeState { decay, nodes, j: [vec![0.0; n], vec![0.0; n], vec![0.0; n]] })
        } else {
            None
        };

        let pec_nodes = [
            media.pec[0]
                .iter()
                .enumerate()
                .filter_map(|(i, &p)| p.then_some(i as u32))
                .collect(),
            media.pec[1]
                .iter()
                .enumerate()
                .filter_map(|(i, &p)| p.then_some(i as u32))
                .collect(),
            media.pec[2]
                .iter()
                .enumerate()
                .filter_map(|(i, &p)| p.then_some(i as u32))
                .collect(),
        ];

        let n_pml = cfg.pml_cells();
        let ax = AxisCoeffs::build(dims.nx, n_pml, h, dt);
        let ay = AxisCoeffs::build(dims.ny, n_pml, h, dt);
        let az = (cfg.dim == Dim::Three).then(|| AxisCoeffs::build(dims.nz, n_pml, h, dt));
        let n_psi = if cfg.dim == Dim::Two { 4 } else { 12 };
        let pml = PmlState { ax, ay, az, psi: vec![vec![0.0; n]; n_psi] };

        let zeros = vec![0.0; n];
        let empty = Vec::new();
        let (ez, hx, hy) = if cfg.dim == Dim::Two {
            (empty.clone(), empty.clone(), empty)
        } else {
            (zeros.clone(), zeros.clone(), zeros.clone())
        };

        Ok(Simulation {
            cfg: *cfg,
            dims,
            h,
            dt,
            origin: cfg.origin(),
            ex: zeros.clone(),
            ey: zeros.clone(),
            ez,
            hx,
            hy,
            hz: zeros,
            ce,
            drude,
            pec_nodes,
            pml,
            step_index: 0,
        })
    }

    pub fn dims(&self) -> GridDims {
        self.dims
    }

    pub fn step_index(&self) -> usize {
        self.step_index
    }

    /// Snap a point source to the nearest node of its component lattice.
    pub fn bind_source(&self, src: &PointSource) -> Result<BoundSource> {
        src.validate(&self.cfg)?;
        let comp = Component::from_axis(src.orientation);
        if self.cfg.dim == Dim::Two && comp == Component::Ez {
            return Err(Error::InvalidConfig("z-oriented source in a 2D run".into()));
        }
        let off = comp.offset(self.cfg.dim);
        let fi = (src.position.x - self.origin.x) / self.h - off.x;
        let fj = (src.position.y - self.origin.y) / self.h - off.y;
        let fk = if self.cfg.dim == Dim::Two {
            0.0
        } else {
            (src.position.z - self.origin.z) / self.h - off.z
        };
        let i = fi.round() as isize;
        let j = fj.round() as isize;
        let k = fk.round() as isize;
        if !self.dims.contains(i, j, k) {
            return Err(Error::OutOfDomain("source snaps outside the grid".into()));
        }
        let scale = 1.0 / self.h.powi(self.cfg.dim.count() as i32);
        Ok(BoundSource {
            component: comp,
            idx: self.dims.idx(i as usize, j as usize, k as usize),
            scale,
            waveform: src.waveform.clone(),
        })
    }

    /// Advance by one leapfrog step, injecting the given current densities.
    pub fn step(&mut self, injections: &[Injection]) {
        match self.cfg.dim {
            Dim::Two => step2d::step(self, injections),
            Dim::Three => step3d::step(self, injections),
        }
        self.step_index += 1;
    }

    fn apply_drude_update(&mut self) {
        let Some(d) = &mut self.drude else { return };
        let fields = [&self.ex, &self.ey, &self.ez];
        for c in 0..3 {
            if fields[c].is_empty() {
                continue;
            }
            let field = fields[c];
            let j = &mut d.j[c];
            for &(idx, kb) in &d.nodes[c] {
                let idx = idx as usize;
                j[idx] = d.decay * j[idx] + kb * field[idx];
            }
        }
    }

    fn apply_drude_currents(&mut self) {
        let Some(d) = &self.drude else { return };
        let fields: [&mut Vec<f64>; 3] = [&mut self.ex, &mut self.ey, &mut self.ez];
        for (c, field) in fields.into_iter().enumerate() {
            if field.is_empty() {
                continue;
            }
            for &(idx, _) in &d.nodes[c] {
                let idx = idx as usize;
                field[idx] -= self.ce[c][idx] * d.j[c][idx];
            }
        }
    }

    fn apply_injections(&mut self, injections: &[Injection]) {
        for inj in injections {
            let c = inj.component.axis().index();
            let field = match inj.component {
                Component::Ex => &mut self.ex,
                Component::Ey => &mut self.ey,
                Component::Ez => &mut self.ez,
            };
            field[inj.idx] -= self.ce[c][inj.idx] * inj.density;
        }
    }

    fn apply_pec(&mut self) {
        for (c, field) in [&mut self.ex, &mut self.ey, &mut self.ez].into_iter().enumerate() {
            if field.is_empty() {
                continue;
            }
            for &idx in &self.pec_nodes[c] {
                field[idx as usize] = 0.0;
            }
        }
    }

    /// Linearly interpolated field value at a probe point.
    pub fn probe_value(&self, probe: &ProbePoint) -> f64 {
        let comp = probe.component;
        let field = match comp {
            Component::Ex => &self.ex,
            Component::Ey => &self.ey,
            Component::Ez => &self.ez,
        };
        if field.is_empty() {
            return 0.0;
        }
        let off = comp.offset(self.cfg.dim);
        let fx = (probe.position.x - self.origin.x) / self.h - off.x;
        let fy = (probe.position.y - self.origin.y) / self.h - off.y;
        let fz = if self.cfg.dim == Dim::Two {
            0.0
        } else {
            (probe.position.z - self.origin.z) / self.h - off.z
        };
        self.interp(field, fx, fy, fz)
    }

    fn interp(&self, field: &[f64], fx: f64, fy: f64, fz: f64) -> f64 {
        let (nx, ny, nz) = (self.dims.nx, self.dims.ny, self.dims.nz);
        let clamp = |f: f64, n: usize| -> (usize, f64) {
            // snap to the lattice when the caller means an exact node
            let f = if (f - f.round()).abs() < 1e-9 { f.round() } else { f };
            let f = f.max(0.0).min((n - 1) as f64);
            let i0 = (f.floor() as usize).min(n.saturating_sub(2));
            (i0, f - i0 as f64)
        };
        let (i0, wx) = clamp(fx, nx);
        let (j0, wy) = clamp(fy, ny);
        if self.cfg.dim == Dim::Two {
            let v00 = field[self.dims.idx(i0, j0, 0)];
            let v10 = field[self.dims.idx(i0 + 1, j0, 0)];
            let v01 = field[self.dims.idx(i0, j0 + 1, 0)];
            let v11 = field[self.dims.idx(i0 + 1, j0 + 1, 0)];
            (1.0 - wy) * ((1.0 - wx) * v00 + wx * v10) + wy * ((1.0 - wx) * v01 + wx * v11)
        } else {
            let (k0, wz) = clamp(fz, nz);
            let mut acc = 0.0;
            for (dk, wk) in [(0usize, 1.0 - wz), (1, wz)] {
                for (dj, wj) in [(0usize, 1.0 - wy), (1, wy)] {
                    for (di, wi) in [(0usize, 1.0 - wx), (1, wx)] {
                        acc += wk * wj * wi * field[self.dims.idx(i0 + di, j0 + dj, k0 + dk)];
                    }
                }
            }
            acc
        }
    }

    /// Cell-centered electric field vector of cell `idx`.
    pub fn cell_centered_e(&self, idx: usize) -> [f64; 3] {
        let (i, j, k) = self.dims.coords(idx);
        let d = &self.dims;
        if self.cfg.dim == Dim::Two {
            let exc = 0.5 * (self.ex[d.idx(i, j, 0)] + self.ex[d.idx(i, (j + 1).min(d.ny - 1), 0)]);
            let eyc = 0.5 * (self.ey[d.idx(i, j, 0)] + self.ey[d.idx((i + 1).min(d.nx - 1), j, 0)]);
            [exc, eyc, 0.0]
        } else {
            let jp = (j + 1).min(d.ny - 1);
            let kp = (k + 1).min(d.nz - 1);
            let ip = (i + 1).min(d.nx - 1);
            let exc = 0.25
                * (self.ex[d.idx(i, j, k)]
                    + self.ex[d.idx(i, jp, k)]
                    + self.ex[d.idx(i, j, kp)]
                    + self.ex[d.idx(i, jp, kp)]);
            let eyc = 0.25
                * (self.ey[d.idx(i, j, k)]
                    + self.ey[d.idx(ip, j, k)]
                    + self.ey[d.idx(i, j, kp)]
                    + self.ey[d.idx(ip, j, kp)]);
            let ezc = 0.25
                * (self.ez[d.idx(i, j, k)]
                    + self.ez[d.idx(ip, j, k)]
                    + self.ez[d.idx(i, jp, k)]
                    + self.ez[d.idx(ip, jp, k)]);
            [exc, eyc, ezc]
        }
    }

    /// Fill the updated E nodes with deterministic pseudo-random noise in
    /// `[-amplitude, amplitude)`. Boundary nodes stay zero so a closed box
    /// remains source-free.
    pub fn seed_noise(&mut self, seed: u64, amplitude: f64) {
        let mut state = seed.wrapping_mul(0x9E3779B97F4A7C15).wrapping_add(1);
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 33) as f64 / (1u64 << 31) as f64 - 1.0) * amplitude
        };
        let dims = self.dims;
        let two_d = self.cfg.dim == Dim::Two;
        let (nx, ny, nz) = (dims.nx, dims.ny, dims.nz);
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    let idx = dims.idx(i, j, k);
                    let kz_ok = two_d || (k >= 1 && k < nz - 1);
                    if j >= 1 && j < ny - 1 && kz_ok && i < nx - 1 {
                        self.ex[idx] = next();
                    }
                    if i >= 1 && i < nx - 1 && kz_ok && j < ny - 1 {
                        self.ey[idx] = next();
                    }
                    if !two_d && i >= 1 && i < nx - 1 && j >= 1 && j < ny - 1 && k < nz - 1 {
                        self.ez[idx] = next();
                    }
                }
            }
        }
    }

    /// Total electromagnetic field energy `sum (|E|^2 + |H|^2) h^d / 2`.
    /// Summed sequentially for reproducibility.
    pub fn field_energy(&self) -> f64 {
        let mut acc = 0.0;
        for f in [&self.ex, &self.ey, &self.ez, &self.hx, &self.hy, &self.hz] {
            for &v in f.iter() {
                acc += v * v;
            }
        }
        0.5 * acc * self.h.powi(self.cfg.dim.count() as i32)
    }

    pub fn max_abs_e(&self) -> f64 {
        let mut m = 0.0f64;
        for f in [&self.ex, &self.ey, &self.ez] {
            for &v in f.iter() {
                m = m.max(v.abs());
            }
        }
        m
    }

    fn check_finite(&self) -> Result<()> {
        for (name, f) in [
            ("ex", &self.ex),
            ("ey", &self.ey),
            ("ez", &self.ez),
            ("hx", &self.hx),
            ("hy", &self.hy),
            ("hz", &self.hz),
        ] {
            if f.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numerical(format!(
                    "non-finite {name} at step {} (Courant factor {}, resolution {})",
                    self.step_index, self.cfg.courant, self.cfg.resolution
                )));
            }
        }
        Ok(())
    }
}

/// Output of a full run.
pub struct RunOutput {
    pub probes: Vec<ProbeRecord>,
    pub volume: Option<VolumeRecord>,
}

/// Recording request for [`run_simulation`].
pub struct BandRequest {
    pub band: GridBand,
    pub stride: usize,
    pub memory_budget: usize,
}

impl BandRequest {
    pub fn new(band: GridBand, stride: usize) -> BandRequest {
        BandRequest { band, stride, memory_budget: DEFAULT_RECORD_BUDGET }
    }
}

/// Drive a configured simulation to completion: inject the source, record
/// probes every step and band fields every `stride` steps. Deterministic:
/// identical inputs give bitwise identical records.
pub fn run_simulation(
    cfg: &SimulationConfig,
    media: &MediaMap,
    source: &PointSource,
    probes: &[ProbePoint],
    band: Option<BandRequest>,
) -> Result<RunOutput> {
    run_simulation_multi(cfg, media, std::slice::from_ref(source), probes, band)
}

/// [`run_simulation`] with several simultaneous point sources (the
/// derivative-dipole adjoint drive uses two).
pub fn run_simulation_multi(
    cfg: &SimulationConfig,
    media: &MediaMap,
    sources: &[PointSource],
    probes: &[ProbePoint],
    band: Option<BandRequest>,
) -> Result<RunOutput> {
    let mut sim = Simulation::new(cfg, media)?;
    let bounds: Vec<BoundSource> =
        sources.iter().map(|s| sim.bind_source(s)).collect::<Result<_>>()?;

    for p in probes {
        if !cfg.in_interior(p.position) {
            return Err(Error::OutOfDomain(format!(
                "probe at ({}, {}, {}) outside the non-PML region",
                p.position.x, p.position.y, p.position.z
            )));
        }
    }

    let n_comp = cfg.dim.count();
    let mut volume = match &band {
        Some(req) => {
            if req.stride == 0 {
                return Err(Error::InvalidConfig("record stride must be >= 1".into()));
            }
            let samples = cfg.steps / req.stride;
            let bytes = samples * req.band.len() * n_comp * std::mem::size_of::<f64>();
            if bytes > req.memory_budget {
                return Err(Error::MemoryBudget(format!(
                    "band recording needs {} MiB, budget {} MiB",
                    bytes >> 20,
                    req.memory_budget >> 20
                )));
            }
            Some(VolumeRecord {
                band: req.band.clone(),
                n_comp,
                stride: req.stride,
                dt: cfg.dt(),
                data: Vec::with_capacity(samples * req.band.len() * n_comp),
                samples,
            })
        }
        None => None,
    };

    let mut series: Vec<Vec<f64>> = probes.iter().map(|_| Vec::with_capacity(cfg.steps)).collect();

    let mut injections = Vec::with_capacity(bounds.len());
    for n in 0..cfg.steps {
        injections.clear();
        for bound in &bounds {
            let amp = bound.waveform.get(n).copied().unwrap_or(0.0);
            injections.push(Injection {
                component: bound.component,
                idx: bound.idx,
                density: amp * bound.scale,
            });
        }
        sim.step(&injections);

        for (rec, p) in series.iter_mut().zip(probes) {
            rec.push(sim.probe_value(p));
        }
        if let Some(vol) = &mut volume {
            if (n + 1) % vol.stride == 0 && vol.data.len() < vol.samples * vol.band.len() * n_comp
            {
                for &cell in &vol.band.cells {
                    let e = sim.cell_centered_e(cell as usize);
                    vol.data.extend_from_slice(&e[..n_comp]);
                }
            }
        }
        if n % 64 == 63 {
            sim.check_finite()?;
        }
    }
    sim.check_finite()?;

    let probes = series
        .into_iter()
        .zip(probes)
        .map(|(s, p)| ProbeRecord {
            position: p.position,
            component: p.component,
            series: s,
            dt: cfg.dt(),
        })
        .collect();

    Ok(RunOutput { probes, volume })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_cfg() -> SimulationConfig {
        SimulationConfig {
            dim: Dim::Two,
            domain: 4.0,
            resolution: 10,
            pml_depth: 1.0,
            courant: 0.5,
            steps: 50,
        }
    }

    #[test]
    fn grid_arithmetic_matches_config() {
        let cfg = SimulationConfig {
            dim: Dim::Two,
            domain: 8.0,
            resolution: 10,
            pml_depth: 1.0,
            courant: 0.5,
            steps: 10,
        };
        assert_eq!(cfg.interior_cells(), 80);
        assert_eq!(cfg.cells_per_axis(), 100);
        assert_eq!(cfg.dims(), GridDims::new(100, 100, 1));

        let cfg3 = SimulationConfig { dim: Dim::Three, ..cfg };
        assert_eq!(cfg3.interior_cells(), 80);
        assert_eq!(cfg3.dims(), GridDims::new(100, 100, 100));
    }

    #[test]
    fn coarse_resolution_rejected() {
        let cfg = SimulationConfig { resolution: 2, ..base_cfg() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn unstable_courant_rejected() {
        let cfg = SimulationConfig { courant: 0.9, dim: Dim::Three, ..base_cfg() };
        assert!(cfg.validate().is_err());
        let ok = SimulationConfig { courant: 0.57, dim: Dim::Three, ..base_cfg() };
        assert!(ok.validate().is_ok());
    }

    #[test]
    fn zero_fields_stay_zero_without_source() {
        let cfg = base_cfg();
        let media = MediaMap::vacuum(&cfg);
        let mut sim = Simulation::new(&cfg, &media).unwrap();
        for _ in 0..20 {
            sim.step(&[]);
        }
        assert_eq!(sim.max_abs_e(), 0.0);
        assert_eq!(sim.field_energy(), 0.0);
    }

    #[test]
    fn media_dimension_mismatch_rejected() {
        let cfg = base_cfg();
        let other = SimulationConfig { domain: 6.0, ..cfg };
        let media = MediaMap::vacuum(&other);
        assert!(Simulation::new(&cfg, &media).is_err());
    }

    #[test]
    fn source_outside_interior_rejected() {
        let cfg = base_cfg();
        let media = MediaMap::vacuum(&cfg);
        let sim = Simulation::new(&cfg, &media).unwrap();
        let src = PointSource {
            position: Vec3::new(2.5, 0.0, 0.0), // inside the collar
            orientation: Axis::X,
            waveform: vec![0.0; 10],
        };
        assert!(sim.bind_source(&src).is_err());
    }

    #[test]
    fn probe_outside_domain_rejected() {
        let cfg = base_cfg();
        let media = MediaMap::vacuum(&cfg);
        let src = PointSource {
            position: Vec3::ZERO,
            orientation: Axis::X,
            waveform: vec![0.0; 10],
        };
        let probe = ProbePoint { position: Vec3::new(3.0, 0.0, 0.0), component: Component::Ex };
        assert!(run_simulation(&cfg, &media, &src, &[probe], None).is_err());
    }

    #[test]
    fn empty_band_records_nothing_without_error() {
        let cfg = base_cfg();
        let media = MediaMap::vacuum(&cfg);
        let src = PointSource {
            position: Vec3::ZERO,
            orientation: Axis::X,
            waveform: vec![0.0; 10],
        };
        let band = GridBand::new(cfg.dims(), Vec::new());
        let out =
            run_simulation(&cfg, &media, &src, &[], Some(BandRequest::new(band, 2))).unwrap();
        let vol = out.volume.unwrap();
        assert_eq!(vol.band.len(), 0);
        assert_eq!(vol.data.len(), 0);
    }

    #[test]
    fn band_recording_bookkeeping() {
        let cfg = base_cfg();
        let media = MediaMap::vacuum(&cfg);
        let src = PointSource {
            position: Vec3::ZERO,
            orientation: Axis::X,
            waveform: (0..cfg.steps).map(|k| (k as f64 / cfg.steps as f64).powi(2)).collect(),
        };
        let dims = cfg.dims();
        let cells: Vec<u32> =
            (0..8).map(|q| dims.idx(45 + q % 4, 45 + q / 4, 0) as u32).collect();
        let band = GridBand::new(dims, cells);
        let out =
            run_simulation(&cfg, &media, &src, &[], Some(BandRequest::new(band, 2))).unwrap();
        let vol = out.volume.unwrap();
        assert_eq!(vol.samples, cfg.steps / 2);
        assert_eq!(vol.data.len(), vol.samples * vol.band.len() * 2);
    }

    #[test]
    fn memory_budget_enforced() {
        let cfg = base_cfg();
        let media = MediaMap::vacuum(&cfg);
        let src = PointSource {
            position: Vec3::ZERO,
            orientation: Axis::X,
            waveform: vec![0.0; 10],
        };
        let dims = cfg.dims();
        let cells: Vec<u32> = (0..dims.len() as u32).collect();
        let mut req = BandRequest::new(GridBand::new(dims, cells), 1);
        req.memory_budget = 1024;
        assert!(matches!(
            run_simulation(&cfg, &media, &src, &[], Some(req)),
            Err(Error::MemoryBudget(_))
        ));
    }

    #[test]
    fn reverse_time_is_involutive() {
        let dims = GridDims::new(4, 4, 1);
        let band = GridBand::new(dims, vec![0, 1, 2]);
        let data: Vec<f64> = (0..18).map(|v| v as f64).collect();
        let mut vol = VolumeRecord {
            band,
            n_comp: 2,
            stride: 1,
            dt: 0.1,
            data: data.clone(),
            samples: 3,
        };
        vol.reverse_time();
        assert_ne!(vol.data, data);
        vol.reverse_time();
        assert_eq!(vol.data, data);
    }
}
