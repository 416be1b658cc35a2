//! The discovery loop: forward run, adjoint run, overlap velocity,
//! level-set advection, merit re-evaluation, repeat until the stopping
//! rule fires. Deterministic end to end: no randomness anywhere, so a
//! config maps to exactly one merit history.

use std::io::{Read, Write};
use std::path::Path;

use crate::adjoint::{
    band_from_level_set, boundary_velocity, overlap_velocity, run_adjoint_with, run_forward,
    AdjointSource,
};
use crate::fmm;
use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::levelset::LevelSetField;
use crate::materials::DrudeParameters;
use crate::pipeline::Pipeline;
use crate::sim::BandRequest;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerSettings {
    pub max_iterations: usize,
    /// Relative merit change below which the run counts as plateaued.
    pub plateau_tol: f64,
    /// Number of trailing iterations inspected by the plateau rule.
    pub plateau_window: usize,
    /// Convergence additionally requires a negative merit.
    pub require_negative: bool,
    /// Retries with halved step after an uphill trial.
    pub backtrack_limit: usize,
    /// A trial is accepted if it does not increase the merit by more than
    /// this fraction of |merit|.
    pub accept_tol_frac: f64,
    /// Absolute acceptance floor as a fraction of the running |merit|
    /// maximum. The landscape flattens by orders of magnitude near the
    /// attraction/repulsion boundary; without a floor no step survives
    /// there.
    pub accept_floor_frac: f64,
    /// Velocity band half-width in cells.
    pub band_width: f64,
    /// Band recording time stride.
    pub stride: usize,
    /// Trust region: maximum boundary displacement per iteration, cells.
    pub trust_cells: f64,
    /// Protected clearance around the atom and its gradient probes, cells.
    pub atom_clear_cells: f64,
    /// Keep per-iteration snapshots.
    pub keep_snapshots: bool,
    /// Restrict the flow to non-expanding motion (v <= 0). Growth
    /// sensitivities at a screened metal surface are less reliable than
    /// carving ones; with this off, a rejected full step still falls back
    /// to a carving retry before the iteration counts as failed.
    pub dig_only: bool,
    /// Preconditioner on outward motion. The measured one-sided response
    /// of a screened conductor to added material is much steeper than to
    /// removed material at cell-scale steps; this gain rebalances the two
    /// in the advection flow (the raw weight keeps its role in the
    /// gradient checks).
    pub growth_gain: f64,
    /// Which overlap assembly drives the advection.
    pub velocity: VelocityKind,
    /// Global sign applied to the advection velocity (the merit-decrease
    /// regression test locks it).
    pub velocity_sign: f64,
}

/// Advection velocity assembly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VelocityKind {
    /// Derivative-dipole adjoint, vacuum-side overlap trace (maximal
    /// bump-check fidelity).
    DerivativeDipole,
    /// Single-dipole adjoint, x-derivative of the time-integrated overlap
    /// (transport-like flow: sweeps material down the overlap gradient).
    ProductDerivative,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        OptimizerSettings {
            max_iterations: 20,
            plateau_tol: 0.02,
            plateau_window: 3,
            require_negative: true,
            backtrack_limit: 3,
            accept_tol_frac: 0.01,
            accept_floor_frac: 0.002,
            band_width: 3.0,
            stride: 2,
            trust_cells: 1.0,
            atom_clear_cells: 2.0,
            keep_snapshots: true,
            dig_only: false,
            growth_gain: 1.0,
            velocity: VelocityKind::DerivativeDipole,
            velocity_sign: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    /// Merit negative and flat over the plateau window.
    Converged,
    /// Iteration budget exhausted.
    Budget,
    /// Backtracking could not find a downhill step twice in a row.
    Stalled,
}

#[derive(Debug, Clone)]
pub struct OptimizationState {
    pub iteration: usize,
    pub phi: LevelSetField,
    /// Merit of the geometry after each completed iteration; entry 0 is
    /// the initial geometry.
    pub merit_history: Vec<f64>,
    /// Whether each iteration's step was accepted (false = kept geometry).
    pub accepted: Vec<bool>,
    /// Total number of halvings across all iterations.
    pub backtrack_events: usize,
    pub status: Option<RunStatus>,
    pub snapshots: Vec<LevelSetField>,
    /// Adaptive trust region (cells); shrinks on backtracking, recovers on
    /// clean accepts.
    pub trust_cells: f64,
}

impl OptimizationState {
    pub fn new(phi: LevelSetField) -> OptimizationState {
        OptimizationState {
            iteration: 0,
            phi,
            merit_history: Vec::new(),
            accepted: Vec::new(),
            backtrack_events: 0,
            status: None,
            snapshots: Vec::new(),
            trust_cells: 0.0, // initialized from settings on first use
        }
    }

    /// History normalized by the running maximum magnitude.
    pub fn normalized_history(&self) -> Vec<f64> {
        let max = self.merit_history.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if max == 0.0 {
            return self.merit_history.clone();
        }
        self.merit_history.iter().map(|v| v / max).collect()
    }

    pub fn current_merit(&self) -> Option<f64> {
        self.merit_history.last().copied()
    }
}

/// Everything const across an optimization run.
pub struct DiscoveryContext {
    pub pipeline: Pipeline,
    pub metal: DrudeParameters,
    pub settings: OptimizerSettings,
}

impl DiscoveryContext {
    /// Signed distance of the protected region (negative inside): a ball
    /// around the atom and its probes plus the absorber collar with one
    /// band of margin.
    fn protected_sdf(&self, p: Vec3) -> f64 {
        let cfg = &self.pipeline.cfg;
        let h = cfg.cell_size();
        let ra = self.pipeline.atom_pos;
        // probes sit one cell away along x; protect their hull
        let clear = (self.settings.atom_clear_cells + 1.0) * h;
        let datom = p.sub(ra).norm() - clear;

        // complement of the shrunken interior box (negative outside box)
        let margin = cfg.pml_depth + 2.0 * h;
        let half = cfg.domain / 2.0 + cfg.pml_depth - margin;
        let mut inside = (p.x.abs() - half).max(p.y.abs() - half);
        if cfg.dim == crate::geom::Dim::Three {
            inside = inside.max(p.z.abs() - half);
        }
        let dbox = -inside; // negative outside the allowed box

        datom.min(dbox)
    }

    fn apply_clamps(&self, phi: &mut LevelSetField) {
        phi.enforce_vacuum(|p| self.protected_sdf(p));
    }
}

/// Outcome of one iteration, for logging.
#[derive(Debug, Clone, Copy)]
pub struct IterationReport {
    pub merit: f64,
    pub accepted: bool,
    pub halvings: usize,
    pub dtau: f64,
    pub vmax: f64,
}

/// One full cycle: simulate, assemble the velocity, advect under the
/// trust region with backtracking, and append the new merit.
pub fn iterate(ctx: &DiscoveryContext, state: &mut OptimizationState) -> Result<IterationReport> {
    let pipe = &ctx.pipeline;
    let cfg = &pipe.cfg;
    let set = &ctx.settings;
    let h = cfg.cell_size();

    // geometry entering the iteration is kept signed-distance
    let (phi_sdf, has_interior) = state.phi.reinitialize();

    let record_band = band_from_level_set(&phi_sdf, set.band_width + 1.0);
    let media = phi_sdf.media_map(cfg, ctx.metal);

    let vacuum = pipe.vacuum_fields(Some(BandRequest::new(record_band.clone(), set.stride)))?;
    let forward = run_forward(pipe, &media, &record_band, set.stride)?;

    let merit_now = match state.current_merit() {
        Some(m) => m,
        None => {
            let m = pipe.merit_from(&forward, &vacuum)?;
            state.merit_history.push(m);
            state.accepted.push(true);
            if set.keep_snapshots {
                state.snapshots.push(phi_sdf.clone());
            }
            m
        }
    };

    // null geometry: nothing to advect, merit stays
    if !has_interior || record_band.is_empty() {
        state.iteration += 1;
        state.merit_history.push(merit_now);
        state.accepted.push(true);
        if set.keep_snapshots {
            state.snapshots.push(phi_sdf.clone());
        }
        state.phi = phi_sdf;
        return Ok(IterationReport {
            merit: merit_now,
            accepted: true,
            halvings: 0,
            dtau: 0.0,
            vmax: 0.0,
        });
    }

    let drive = match set.velocity {
        VelocityKind::DerivativeDipole => AdjointSource::derivative_dipole(pipe, true)?,
        VelocityKind::ProductDerivative => AdjointSource::band_limited(pipe)?,
    };
    let adjoint = run_adjoint_with(pipe, &media, &record_band, set.stride, &drive)?;
    let fwd_scattered = forward
        .volume
        .as_ref()
        .expect("band recorded")
        .subtract(vacuum.volume.as_ref().expect("band recorded"))?;
    let mut v_ext = match set.velocity {
        VelocityKind::DerivativeDipole => boundary_velocity(&phi_sdf, &fwd_scattered, &adjoint)?,
        VelocityKind::ProductDerivative => {
            let overlap = overlap_velocity(&fwd_scattered, &adjoint, h)?;
            fmm::extend_velocity(&phi_sdf.phi, &phi_sdf.dims, h, phi_sdf.two_d, &overlap.values)
        }
    };
    for v in v_ext.iter_mut() {
        *v *= set.velocity_sign;
        if set.dig_only {
            *v = v.min(0.0);
        } else if *v > 0.0 {
            *v *= set.growth_gain;
        }
    }

    let vmax = v_ext.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if vmax == 0.0 {
        // fixed point (for instance a null kernel)
        state.iteration += 1;
        state.merit_history.push(merit_now);
        state.accepted.push(true);
        if set.keep_snapshots {
            state.snapshots.push(phi_sdf.clone());
        }
        state.phi = phi_sdf;
        return Ok(IterationReport {
            merit: merit_now,
            accepted: true,
            halvings: 0,
            dtau: 0.0,
            vmax,
        });
    }

    // adaptive trust region: the fastest boundary point moves this many
    // cells; shrink persistently on backtracking, recover on clean accepts
    if state.trust_cells <= 0.0 {
        state.trust_cells = set.trust_cells;
    }

    // full velocity first; a carving-only retry covers the case where a
    // growth region poisons every full step
    let mut attempts: Vec<Vec<f64>> = vec![v_ext.clone()];
    if !set.dig_only {
        let carved: Vec<f64> = v_ext.iter().map(|v| v.min(0.0)).collect();
        if carved.iter().any(|&v| v != 0.0) {
            attempts.push(carved);
        }
    }

    let mut total_halvings = 0;
    let mut last_dtau = 0.0;
    for v_try in &attempts {
        let vmax_try = v_try.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if vmax_try == 0.0 {
            continue;
        }
        let mut dtau = state.trust_cells * h / vmax_try;
        last_dtau = dtau;
        let mut halvings = 0;
        loop {
            let trial = advect_with_cfl(&phi_sdf, v_try, dtau, ctx)?;
            let trial_media = trial.media_map(cfg, ctx.metal);
            let trial_run = pipe.run_fields(&trial_media, None)?;
            let merit_new = pipe.merit_from(&trial_run, &vacuum)?;

            let merit_peak =
                state.merit_history.iter().fold(merit_now.abs(), |m, v| m.max(v.abs()));
            let slack =
                (set.accept_tol_frac * merit_now.abs()).max(set.accept_floor_frac * merit_peak);
            if merit_new <= merit_now + slack {
                state.iteration += 1;
                state.merit_history.push(merit_new);
                state.accepted.push(true);
                state.backtrack_events += total_halvings + halvings;
                if total_halvings + halvings > 0 {
                    state.trust_cells =
                        (state.trust_cells / (1 << halvings.min(8)) as f64).max(0.05);
                } else {
                    state.trust_cells = (state.trust_cells * 1.3).min(set.trust_cells);
                }
                if set.keep_snapshots {
                    state.snapshots.push(trial.clone());
                }
                state.phi = trial;
                return Ok(IterationReport {
                    merit: merit_new,
                    accepted: true,
                    halvings: total_halvings + halvings,
                    dtau,
                    vmax,
                });
            }
            if halvings >= set.backtrack_limit {
                total_halvings += halvings;
                break;
            }
            dtau /= 2.0;
            halvings += 1;
        }
    }

    // keep the old geometry, record the unimproved merit
    state.iteration += 1;
    state.merit_history.push(merit_now);
    state.accepted.push(false);
    state.backtrack_events += total_halvings;
    state.trust_cells = (state.trust_cells / 2.0).max(0.05);
    if set.keep_snapshots {
        state.snapshots.push(phi_sdf.clone());
    }
    state.phi = phi_sdf;
    Ok(IterationReport {
        merit: merit_now,
        accepted: false,
        halvings: total_halvings,
        dtau: last_dtau,
        vmax,
    })
}

/// Advect in CFL-sized sub-steps, clamp, and rebuild the signed distance.
fn advect_with_cfl(
    phi: &LevelSetField,
    v: &[f64],
    dtau: f64,
    ctx: &DiscoveryContext,
) -> Result<LevelSetField> {
    let h = phi.h;
    let vmax = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let n_sub = if vmax > 0.0 { (vmax * dtau / (0.45 * h)).ceil().max(1.0) as usize } else { 1 };
    let mut cur = phi.clone();
    for _ in 0..n_sub {
        cur = cur.advect(v, dtau / n_sub as f64)?;
    }
    ctx.apply_clamps(&mut cur);
    let (rebuilt, _) = cur.reinitialize();
    Ok(rebuilt)
}

/// Stopping decision after each iteration.
fn decide_status(state: &OptimizationState, set: &OptimizerSettings) -> Option<RunStatus> {
    let n = state.merit_history.len();
    // stall: two consecutive rejected steps
    if state.accepted.len() >= 2
        && state.accepted[state.accepted.len() - 2..].iter().all(|&a| !a)
    {
        return Some(RunStatus::Stalled);
    }
    if n >= set.plateau_window + 1 {
        let tail = &state.merit_history[n - set.plateau_window - 1..];
        let negative = tail.iter().all(|&m| m < 0.0);
        let flat = tail.windows(2).all(|w| {
            let scale = w[0].abs().max(w[1].abs()).max(1e-300);
            (w[1] - w[0]).abs() <= set.plateau_tol * scale
        });
        if flat && (negative || !set.require_negative) {
            return Some(RunStatus::Converged);
        }
    }
    if state.iteration >= set.max_iterations {
        return Some(RunStatus::Budget);
    }
    None
}

/// Run the loop until the stopping rule fires. `on_iteration` is invoked
/// after every completed cycle (artifact sinks hook in here).
pub fn run<F: FnMut(&OptimizationState, &IterationReport)>(
    ctx: &DiscoveryContext,
    mut state: OptimizationState,
    mut on_iteration: F,
) -> Result<OptimizationState> {
    loop {
        if let Some(status) = decide_status(&state, &ctx.settings) {
            state.status = Some(status);
            return Ok(state);
        }
        let report = iterate(ctx, &mut state)?;
        on_iteration(&state, &report);
    }
}

// ---------------------------------------------------------------------
// checkpointing

const MAGIC: &[u8; 4] = b"CPFG";
const VERSION: u32 = 1;

/// Serialized optimizer state plus the canonical run configuration it was
/// produced from. Resuming re-parses the embedded configuration, so a
/// checkpoint is self-contained.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub config_hash: u64,
    pub config_text: String,
    pub state: OptimizationState,
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_f64(out: &mut Vec<u8>, v: f64) {
    out.extend_from_slice(&v.to_le_bytes());
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Format("checkpoint truncated".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

impl Checkpoint {
    pub fn encode(&self) -> Vec<u8> {
        let s = &self.state;
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        put_u32(&mut out, VERSION);
        put_u64(&mut out, self.config_hash);
        put_u32(&mut out, self.config_text.len() as u32);
        out.extend_from_slice(self.config_text.as_bytes());

        put_u32(&mut out, s.iteration as u32);
        let phi = &s.phi;
        put_u32(&mut out, phi.dims.nx as u32);
        put_u32(&mut out, phi.dims.ny as u32);
        put_u32(&mut out, phi.dims.nz as u32);
        put_f64(&mut out, phi.h);
        put_f64(&mut out, phi.origin.x);
        put_f64(&mut out, phi.origin.y);
        put_f64(&mut out, phi.origin.z);
        out.push(phi.two_d as u8);
        put_f64(&mut out, phi.tau);
        put_u32(&mut out, phi.reinit_age);
        put_u64(&mut out, phi.phi.len() as u64);
        for v in &phi.phi {
            put_f64(&mut out, *v);
        }

        put_u32(&mut out, s.merit_history.len() as u32);
        for v in &s.merit_history {
            put_f64(&mut out, *v);
        }
        put_u32(&mut out, s.accepted.len() as u32);
        for &a in &s.accepted {
            out.push(a as u8);
        }
        put_u64(&mut out, s.backtrack_events as u64);
        put_f64(&mut out, s.trust_cells);
        out.push(match s.status {
            None => 0,
            Some(RunStatus::Converged) => 1,
            Some(RunStatus::Budget) => 2,
            Some(RunStatus::Stalled) => 3,
        });
        out
    }

    pub fn decode(buf: &[u8]) -> Result<Checkpoint> {
        let mut r = Reader { buf, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::Format("not a checkpoint file".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported checkpoint version {version}")));
        }
        let config_hash = r.u64()?;
        let text_len = r.u32()? as usize;
        let config_text = String::from_utf8(r.take(text_len)?.to_vec())
            .map_err(|_| Error::Format("config text not utf-8".into()))?;

        let iteration = r.u32()? as usize;
        let nx = r.u32()? as usize;
        let ny = r.u32()? as usize;
        let nz = r.u32()? as usize;
        let h = r.f64()?;
        let origin = Vec3::new(r.f64()?, r.f64()?, r.f64()?);
        let two_d = r.take(1)?[0] != 0;
        let tau = r.f64()?;
        let reinit_age = r.u32()?;
        let n = r.u64()? as usize;
        if n != nx * ny * nz {
            return Err(Error::Format("level-set payload size mismatch".into()));
        }
        let mut phi = Vec::with_capacity(n);
        for _ in 0..n {
            phi.push(r.f64()?);
        }
        let field = LevelSetField {
            dims: crate::geom::GridDims::new(nx, ny, nz),
            h,
            origin,
            two_d,
            phi,
            tau,
            reinit_age,
        };

        let mh = r.u32()? as usize;
        let mut merit_history = Vec::with_capacity(mh);
        for _ in 0..mh {
            merit_history.push(r.f64()?);
        }
        let na = r.u32()? as usize;
        let mut accepted = Vec::with_capacity(na);
        for _ in 0..na {
            accepted.push(r.take(1)?[0] != 0);
        }
        let backtrack_events = r.u64()? as usize;
        let trust_cells = r.f64()?;
        let status = match r.take(1)?[0] {
            0 => None,
            1 => Some(RunStatus::Converged),
            2 => Some(RunStatus::Budget),
            3 => Some(RunStatus::Stalled),
            other => return Err(Error::Format(format!("unknown status tag {other}"))),
        };

        Ok(Checkpoint {
            config_hash,
            config_text,
            state: OptimizationState {
                iteration,
                phi: field,
                merit_history,
                accepted,
                backtrack_events,
                status,
                snapshots: Vec::new(),
                trust_cells,
            },
        })
    }

    /// Atomic write: temp file in the same directory, then rename.
    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = self.encode();
        let tmp = path.with_extension("tmp");
        {
            let mut f = std::fs::File::create(&tmp)?;
            f.write_all(&bytes)?;
            f.sync_all()?;
        }
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Checkpoint> {
        let mut buf = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut buf)?;
        Checkpoint::decode(&buf)
    }

    /// Guard against resuming under a different configuration.
    pub fn verify(&self, expected_hash: u64, expected_dims: crate::geom::GridDims) -> Result<()> {
        if self.config_hash != expected_hash {
            return Err(Error::Format(format!(
                "checkpoint was produced by config {:016x}, current is {expected_hash:016x}",
                self.config_hash
            )));
        }
        if self.state.phi.dims != expected_dims {
            return Err(Error::Format("checkpoint grid does not match configuration".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{Dim, GridDims};
    use crate::sim::SimulationConfig;

    fn tiny_field() -> LevelSetField {
        let cfg = SimulationConfig {
            dim: Dim::Two,
            domain: 4.0,
            resolution: 10,
            pml_depth: 1.0,
            courant: 0.5,
            steps: 10,
        };
        LevelSetField::ball(&cfg, 0.8, Vec3::ZERO).unwrap()
    }

    #[test]
    fn checkpoint_roundtrip_is_bit_exact() {
        let state = OptimizationState {
            iteration: 7,
            phi: tiny_field(),
            merit_history: vec![0.5, 0.25, -0.125],
            accepted: vec![true, true, false],
            backtrack_events: 2,
            status: Some(RunStatus::Budget),
            snapshots: Vec::new(),
            trust_cells: 0.625,
        };
        let cp = Checkpoint {
            config_hash: 0xDEADBEEF12345678,
            config_text: "[simulation]\ndim = 2\n".into(),
            state,
        };
        let bytes = cp.encode();
        let back = Checkpoint::decode(&bytes).unwrap();
        assert_eq!(back.config_hash, cp.config_hash);
        assert_eq!(back.config_text, cp.config_text);
        assert_eq!(back.state.iteration, 7);
        assert_eq!(back.state.merit_history, cp.state.merit_history);
        assert_eq!(back.state.accepted, cp.state.accepted);
        assert_eq!(back.state.status, Some(RunStatus::Budget));
        assert_eq!(back.state.phi.phi, cp.state.phi.phi);
    }

    #[test]
    fn corrupted_checkpoint_rejected() {
        let cp = Checkpoint {
            config_hash: 1,
            config_text: String::new(),
            state: OptimizationState::new(tiny_field()),
        };
        let mut bytes = cp.encode();
        bytes[0] = b'X';
        assert!(Checkpoint::decode(&bytes).is_err());
        let mut short = cp.encode();
        short.truncate(short.len() / 2);
        assert!(Checkpoint::decode(&short).is_err());
    }

    #[test]
    fn hash_and_grid_guard() {
        let cp = Checkpoint {
            config_hash: 42,
            config_text: String::new(),
            state: OptimizationState::new(tiny_field()),
        };
        assert!(cp.verify(42, cp.state.phi.dims).is_ok());
        assert!(cp.verify(43, cp.state.phi.dims).is_err());
        assert!(cp.verify(42, GridDims::new(3, 3, 1)).is_err());
    }

    #[test]
    fn normalized_history_divides_by_peak() {
        let mut s = OptimizationState::new(tiny_field());
        s.merit_history = vec![4.0, 2.0, -1.0];
        assert_eq!(s.normalized_history(), vec![1.0, 0.5, -0.25]);
    }

    #[test]
    fn plateau_rule_fires_on_flat_negative_tail() {
        let set = OptimizerSettings::default();
        let mut s = OptimizationState::new(tiny_field());
        s.merit_history = vec![1.0, -0.9, -1.0, -1.005, -1.0, -0.998];
        s.accepted = vec![true; 6];
        s.iteration = 5;
        assert_eq!(decide_status(&s, &set), Some(RunStatus::Converged));
    }

    #[test]
    fn stall_rule_fires_on_two_rejections() {
        let set = OptimizerSettings::default();
        let mut s = OptimizationState::new(tiny_field());
        s.merit_history = vec![1.0, 1.0, 1.0];
        s.accepted = vec![true, false, false];
        s.iteration = 2;
        assert_eq!(decide_status(&s, &set), Some(RunStatus::Stalled));
    }

    #[test]
    fn budget_rule() {
        let set = OptimizerSettings { max_iterations: 1, ..Default::default() };
        let mut s = OptimizationState::new(tiny_field());
        s.merit_history = vec![1.0, 0.9];
        s.accepted = vec![true, true];
        s.iteration = 1;
        assert_eq!(decide_status(&s, &set), Some(RunStatus::Budget));
    }
}
