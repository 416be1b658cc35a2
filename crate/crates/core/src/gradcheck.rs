//! Brute-force validation of the adjoint shape derivative.
//!
//! An ensemble of small smooth boundary bumps is applied to a geometry;
//! for each bump the merit change predicted from the overlap velocity,
//! `dF = - sum_cells v(r) dV(r)`, is compared against the measured change
//! from a fresh forward simulation. Sign agreement and correlation over
//! the ensemble are the acceptance gauges for the whole reverse-time
//! bookkeeping.

use crate::adjoint::{
    band_from_level_set, boundary_velocity, run_adjoint_with, run_forward, AdjointSource,
};
use crate::error::Result;
use crate::geom::Vec3;
use crate::levelset::LevelSetField;
use crate::materials::DrudeParameters;
use crate::pipeline::Pipeline;
use crate::sim::BandRequest;

#[derive(Debug, Clone)]
pub struct GradientCheckReport {
    /// (predicted, measured) merit changes per bump.
    pub pairs: Vec<(f64, f64)>,
    pub sign_agreement: usize,
    pub correlation: f64,
    pub baseline_merit: f64,
}

/// Smooth signed level-set bump centered on the contour.
pub struct Bump {
    pub center: Vec3,
    /// Level-set offset amplitude; the boundary moves by about this much
    /// (inward for positive values).
    pub amplitude: f64,
    /// Gaussian width.
    pub sigma: f64,
}

impl Bump {
    pub fn apply(&self, phi: &LevelSetField) -> LevelSetField {
        let mut out = phi.clone();
        let s2 = 2.0 * self.sigma * self.sigma;
        for idx in 0..out.phi.len() {
            let d = out.cell_center(idx).sub(self.center);
            let r2 = d.x * d.x + d.y * d.y + d.z * d.z;
            out.phi[idx] += self.amplitude * (-r2 / s2).exp();
        }
        out
    }
}

/// Deterministic bump ensemble on a circle of radius `radius` around
/// `center` (2D geometries).
pub fn ring_bumps(center: Vec3, radius: f64, h: f64, count: usize) -> Vec<Bump> {
    (0..count)
        .map(|q| {
            let theta = 2.0 * std::f64::consts::PI * q as f64 / count as f64 + 0.37;
            let sign = if q % 2 == 0 { 1.0 } else { -1.0 };
            Bump {
                center: Vec3::new(
                    center.x + radius * theta.cos(),
                    center.y + radius * theta.sin(),
                    0.0,
                ),
                amplitude: sign * 0.15 * h,
                sigma: 2.5 * h,
            }
        })
        .collect()
}

/// Run the full comparison for one geometry and bump ensemble, using the
/// production velocity assembly.
pub fn gradient_check(
    pipe: &Pipeline,
    metal: DrudeParameters,
    phi: &LevelSetField,
    bumps: &[Bump],
    band_width: f64,
    stride: usize,
) -> Result<GradientCheckReport> {
    let cfg = &pipe.cfg;
    let h = cfg.cell_size();
    let (phi_sdf, _) = phi.reinitialize();

    let band = band_from_level_set(&phi_sdf, band_width + 1.0);
    let media = phi_sdf.media_map(cfg, metal);
    let vacuum = pipe.vacuum_fields(Some(BandRequest::new(band.clone(), stride)))?;
    let forward = run_forward(pipe, &media, &band, stride)?;
    let drive = AdjointSource::derivative_dipole(pipe, true)?;
    let adjoint = run_adjoint_with(pipe, &media, &band, stride, &drive)?;
    let baseline_merit = pipe.merit_from(&forward, &vacuum)?;

    let scattered = forward
        .volume
        .as_ref()
        .expect("band recorded")
        .subtract(vacuum.volume.as_ref().expect("band recorded"))?;
    let v = boundary_velocity(&phi_sdf, &scattered, &adjoint)?;

    let cell_vol = h.powi(cfg.dim.count() as i32);
    let base_mask = phi_sdf.interior_mask();

    let mut pairs = Vec::new();
    for bump in bumps {
        let bumped = bump.apply(&phi_sdf);
        // predicted: -sum v_n dV over the transformed cells
        let mask = bumped.interior_mask();
        let mut predicted = 0.0;
        for idx in 0..mask.len() {
            let dv = (mask[idx] - base_mask[idx]) * cell_vol;
            if dv != 0.0 {
                predicted -= v[idx] * dv;
            }
        }
        // measured: fresh forward run of the bumped geometry
        let bumped_media = bumped.media_map(cfg, metal);
        let run = pipe.run_fields(&bumped_media, None)?;
        let measured = pipe.merit_from(&run, &vacuum)? - baseline_merit;
        pairs.push((predicted, measured));
    }

    let sign_agreement = pairs
        .iter()
        .filter(|(p, m)| p.signum() == m.signum() && *p != 0.0 && *m != 0.0)
        .count();
    let correlation = pearson(&pairs);

    Ok(GradientCheckReport { pairs, sign_agreement, correlation, baseline_merit })
}

fn pearson(pairs: &[(f64, f64)]) -> f64 {
    let n = pairs.len() as f64;
    if pairs.is_empty() {
        return 0.0;
    }
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (x, y) in pairs {
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
        sxy += (x - mx) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    sxy / (sxx * syy).sqrt()
}
