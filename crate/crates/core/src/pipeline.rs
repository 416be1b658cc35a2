//! Orchestration of full potential/merit evaluations: source placement,
//! forward and vacuum runs, scattered-field assembly and kernel folding.

use crate::error::Result;
use crate::geom::{Axis, Vec3};
use crate::kernel::{
    self, build_kernel, cp_potential, gradient_series, merit_force, scattered_series,
    ConvolutionKernel, PotentialSample,
};
use crate::materials::AtomModel;
use crate::sim::{
    run_simulation, snap_to_node, BandRequest, Component, MediaMap, PointSource, ProbePoint,
    ProbeRecord, RunOutput, SimulationConfig,
};
use crate::waveform::SourceWaveform;

/// Everything needed to evaluate potentials and merits for one atom and
/// one simulation configuration. Build once, reuse across geometries.
#[derive(Debug, Clone)]
pub struct Pipeline {
    pub cfg: SimulationConfig,
    pub atom: AtomModel,
    pub waveform: SourceWaveform,
    pub kernel: ConvolutionKernel,
    /// Atom position snapped onto the Ex lattice.
    pub atom_pos: Vec3,
}

/// Probe layout of one forward run: the coincidence probe plus the two
/// gradient probes one cell away along x.
pub const PROBE_CENTER: usize = 0;
pub const PROBE_PLUS: usize = 1;
pub const PROBE_MINUS: usize = 2;

impl Pipeline {
    pub fn new(
        cfg: SimulationConfig,
        atom: AtomModel,
        source_gamma: f64,
        source_j0: f64,
        n_omega: usize,
        omega_max: f64,
        atom_pos: Vec3,
    ) -> Result<Pipeline> {
        cfg.validate()?;
        atom.validate()?;
        let waveform = SourceWaveform::build(source_gamma, source_j0, cfg.dt(), cfg.steps)?;
        let kernel = build_kernel(&atom, &waveform, n_omega, omega_max, cfg.steps)?;
        let atom_pos = snap_to_node(&cfg, Component::Ex, atom_pos);
        Ok(Pipeline { cfg, atom, waveform, kernel, atom_pos })
    }

    /// The x-oriented drive current at `pos` (defaults to the atom).
    pub fn source_at(&self, pos: Vec3) -> PointSource {
        PointSource {
            position: pos,
            orientation: Axis::X,
            waveform: self.waveform.samples.clone(),
        }
    }

    /// Coincidence + gradient probes around `pos`.
    pub fn probes_at(&self, pos: Vec3) -> [ProbePoint; 3] {
        let h = self.cfg.cell_size();
        [
            ProbePoint { position: pos, component: Component::Ex },
            ProbePoint { position: pos.add(Vec3::new(h, 0.0, 0.0)), component: Component::Ex },
            ProbePoint { position: pos.sub(Vec3::new(h, 0.0, 0.0)), component: Component::Ex },
        ]
    }

    /// Forward run against `media`, recording the standard probes and an
    /// optional band.
    pub fn run_fields(&self, media: &MediaMap, band: Option<BandRequest>) -> Result<RunOutput> {
        run_simulation(
            &self.cfg,
            media,
            &self.source_at(self.atom_pos),
            &self.probes_at(self.atom_pos),
            band,
        )
    }

    /// Vacuum reference run with the same source and probes.
    pub fn vacuum_fields(&self, band: Option<BandRequest>) -> Result<RunOutput> {
        self.run_fields(&MediaMap::vacuum(&self.cfg), band)
    }

    /// Scattered coincidence series from a structure run and its vacuum twin.
    pub fn scattered_center(&self, total: &RunOutput, vacuum: &RunOutput) -> Result<ProbeRecord> {
        scattered_series(&total.probes[PROBE_CENTER], &vacuum.probes[PROBE_CENTER])
    }

    /// Potential at the atom from already-recorded runs.
    pub fn potential_from(
        &self,
        total: &RunOutput,
        vacuum: &RunOutput,
        geometry_hash: u64,
    ) -> Result<PotentialSample> {
        let e1 = self.scattered_center(total, vacuum)?;
        cp_potential(&self.kernel, &e1, self.cfg.resolution, geometry_hash)
    }

    /// Merit from already-recorded runs: kernel-folded central difference
    /// of the scattered field across the atom.
    pub fn merit_from(&self, total: &RunOutput, vacuum: &RunOutput) -> Result<f64> {
        let plus = scattered_series(&total.probes[PROBE_PLUS], &vacuum.probes[PROBE_PLUS])?;
        let minus = scattered_series(&total.probes[PROBE_MINUS], &vacuum.probes[PROBE_MINUS])?;
        let grad = gradient_series(&plus, &minus, self.cfg.cell_size())?;
        merit_force(&self.kernel, &grad)
    }

    /// Merit of a geometry, including the vacuum twin run.
    pub fn merit_of(&self, media: &MediaMap) -> Result<f64> {
        let vacuum = self.vacuum_fields(None)?;
        let total = self.run_fields(media, None)?;
        self.merit_from(&total, &vacuum)
    }

    /// Full potential evaluation with the source displaced to `pos`
    /// (snapped to the lattice). Runs both the structure and the vacuum
    /// simulation at that position.
    pub fn potential_at(
        &self,
        media: &MediaMap,
        pos: Vec3,
        geometry_hash: u64,
    ) -> Result<PotentialSample> {
        let pos = snap_to_node(&self.cfg, Component::Ex, pos);
        let probes = [ProbePoint { position: pos, component: Component::Ex }];
        let src = self.source_at(pos);
        let total = run_simulation(&self.cfg, media, &src, &probes, None)?;
        let vac = run_simulation(&self.cfg, &MediaMap::vacuum(&self.cfg), &src, &probes, None)?;
        let e1 = scattered_series(&total.probes[0], &vac.probes[0])?;
        cp_potential(&self.kernel, &e1, self.cfg.resolution, geometry_hash)
    }

    /// Force x-component by central difference of two full potential
    /// evaluations, `F_x = -(U(x + d/2) - U(x - d/2)) / d`. `delta` must be
    /// at least one grid cell; both displaced points must stay in the
    /// interior and outside the structure.
    pub fn force_x(
        &self,
        media: &MediaMap,
        pos: Vec3,
        delta: f64,
        geometry_hash: u64,
    ) -> Result<f64> {
        let h = self.cfg.cell_size();
        if delta < h {
            return Err(crate::error::Error::InvalidConfig(format!(
                "force displacement {delta} below one cell {h}"
            )));
        }
        let plus = pos.add(Vec3::new(delta / 2.0, 0.0, 0.0));
        let minus = pos.sub(Vec3::new(delta / 2.0, 0.0, 0.0));
        for p in [plus, minus] {
            if !self.cfg.in_interior(p) {
                return Err(crate::error::Error::OutOfDomain(
                    "displaced evaluation outside the domain".into(),
                ));
            }
            if media_is_solid_at(media, &self.cfg, p) {
                return Err(crate::error::Error::OutOfDomain(
                    "displaced evaluation collides with the structure".into(),
                ));
            }
        }
        let up = self.potential_at(media, plus, geometry_hash)?;
        let um = self.potential_at(media, minus, geometry_hash)?;
        Ok(-(up.value - um.value) / delta)
    }

    /// Tail ring-down state of the last scattered series; used to flag
    /// too-short windows.
    pub fn ringdown_ok(&self, total: &RunOutput, vacuum: &RunOutput) -> bool {
        match self.scattered_center(total, vacuum) {
            Ok(e1) => kernel::is_decayed(&e1.series),
            Err(_) => false,
        }
    }
}

/// Whether any E-node at `p`'s cell carries material.
pub fn media_is_solid_at(media: &MediaMap, cfg: &SimulationConfig, p: Vec3) -> bool {
    let h = cfg.cell_size();
    let o = cfg.origin();
    let i = ((p.x - o.x) / h).floor();
    let j = ((p.y - o.y) / h).floor();
    let k = if cfg.dim == crate::geom::Dim::Two { 0.0 } else { ((p.z - o.z) / h).floor() };
    if i < 0.0 || j < 0.0 || k < 0.0 {
        return false;
    }
    let (i, j, k) = (i as usize, j as usize, k as usize);
    if i >= media.dims.nx || j >= media.dims.ny || k >= media.dims.nz {
        return false;
    }
    let idx = media.dims.idx(i, j, k);
    media.fill.iter().any(|f| f[idx] > 0.5) || media.pec.iter().any(|m| m[idx])
}
