//! Time-domain Casimir-Polder evaluation.
//!
//! The recorded scattered field at the atom is folded with a causal kernel
//! `K(t) = Im g(-t)` built from the atomic polarizability and the source
//! spectrum, `g(w) = -i alpha(w) (w / J(w)) H(w)`, where the Heaviside
//! factor restricts to positive frequencies. Under the crate's transform
//! convention (`f(t) = (1/2pi) \int dw f(w) e^{-iwt}`) this collapses to
//!
//! `g(w) = alpha(w) (g0 - iw)^5 / (24 J0 g0^3)`
//!
//! with `g0` the source cut-off rate. The potential is the discrete
//! convolution `U = - sum_n K(t_n) E1_x(t_n) dt` with `hbar = 1`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::materials::AtomModel;
use crate::sim::ProbeRecord;
use crate::waveform::SourceWaveform;

/// Fraction of the frequency window over which the spectral taper rolls off.
const TAPER_FRACTION: f64 = 0.1;
/// Broadening floor: the atomic linewidth is raised to this many frequency
/// grid spacings so the resonance stays resolvable.
const BROADEN_GRID_FACTOR: f64 = 10.0;
/// Tail fraction of a series inspected by the ring-down check.
const TAIL_FRACTION: f64 = 0.05;
/// A series is flagged as non-decayed when its tail exceeds this fraction
/// of its peak.
const TAIL_THRESHOLD: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct ConvolutionKernel {
    pub dt: f64,
    /// `K(t_n)` on the probe timebase `t_n = (n+1) dt`.
    pub samples: Vec<f64>,
    pub omega_max: f64,
    pub n_omega: usize,
    /// Linewidth actually used after broadening.
    pub gamma_broadened: f64,
}

impl ConvolutionKernel {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Build the convolution kernel on the probe timebase.
///
/// `n_omega` grid intervals cover `[0, omega_max]`. The linewidth is
/// broadened to at least `BROADEN_GRID_FACTOR` grid spacings; ground-state
/// results must be insensitive to that (checked by the plane benchmark).
pub fn build_kernel(
    atom: &AtomModel,
    src: &SourceWaveform,
    n_omega: usize,
    omega_max: f64,
    steps: usize,
) -> Result<ConvolutionKernel> {
    if omega_max < 10.0 * src.gamma || omega_max < 2.0 * atom.omega_a {
        return Err(Error::InvalidConfig(format!(
            "omega_max {omega_max} must cover the source bandwidth (>= {}) and the resonance (>= {})",
            10.0 * src.gamma,
            2.0 * atom.omega_a
        )));
    }
    build_kernel_tapered(
        atom,
        src,
        n_omega,
        omega_max,
        steps,
        (1.0 - TAPER_FRACTION) * omega_max,
        omega_max,
    )
}

/// Kernel with an explicit spectral roll-off window: unity below
/// `taper_start`, cosine-squared down to zero at `taper_end`, zero above.
/// The convolution kernel uses the standard taper near `omega_max`;
/// adjoint drives band-limit harder so the injected spectrum stays
/// resolvable on the grid.
pub fn build_kernel_tapered(
    atom: &AtomModel,
    src: &SourceWaveform,
    n_omega: usize,
    omega_max: f64,
    steps: usize,
    taper_start: f64,
    taper_end: f64,
) -> Result<ConvolutionKernel> {
    atom.validate()?;
    if n_omega < 16 {
        return Err(Error::InvalidConfig("kernel frequency grid too small".into()));
    }
    let d_omega = omega_max / n_omega as f64;
    let broadened = atom.broadened(BROADEN_GRID_FACTOR * d_omega);

    // g(w) on the grid with the requested spectral window
    let norm = 24.0 * src.j0 * src.gamma.powi(3);
    let g_grid: Vec<Complex64> = (0..=n_omega)
        .map(|q| {
            let w = q as f64 * d_omega;
            let alpha = broadened.polarizability(w);
            let pole = Complex64::new(src.gamma, -w).powu(5);
            let mut g = alpha * pole / norm;
            if w >= taper_end {
                g *= 0.0;
            } else if w > taper_start {
                let x = (w - taper_start) / (taper_end - taper_start);
                g *= (0.5 * std::f64::consts::PI * x).cos().powi(2);
            }
            // trapezoid end weights
            if q == 0 || q == n_omega {
                g *= 0.5;
            }
            g
        })
        .collect();

    // K(t) = Im[(1/2pi) \int_0^wmax g(w) e^{iwt} dw] by trapezoid sum; the
    // phase advances by recurrence along the frequency grid.
    let dt = src.dt;
    let samples: Vec<f64> = (0..steps)
        .map(|n| {
            let t = (n as f64 + 1.0) * dt;
            let rot = Complex64::new(0.0, d_omega * t).exp();
            let mut phase = Complex64::new(1.0, 0.0);
            let mut acc = Complex64::new(0.0, 0.0);
            for g in &g_grid {
                acc += g * phase;
                phase *= rot;
            }
            (acc * d_omega / (2.0 * std::f64::consts::PI)).im
        })
        .collect();

    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("kernel contains non-finite samples".into()));
    }

    Ok(ConvolutionKernel {
        dt,
        samples,
        omega_max,
        n_omega,
        gamma_broadened: broadened.gamma_a,
    })
}

/// Scattered series: structure run minus vacuum run at the same probe.
pub fn scattered_series(total: &ProbeRecord, vacuum: &ProbeRecord) -> Result<ProbeRecord> {
    total.compatible(vacuum)?;
    if total.position.sub(vacuum.position).norm() > 1e-12 {
        return Err(Error::RecordMismatch("probe positions differ".into()));
    }
    let series = total.series.iter().zip(&vacuum.series).map(|(a, b)| a - b).collect();
    Ok(ProbeRecord { series, ..total.clone() })
}

/// `true` when the series has rung down: its tail stays below
/// `TAIL_THRESHOLD` of the peak.
pub fn is_decayed(series: &[f64]) -> bool {
    if series.is_empty() {
        return true;
    }
    let peak = series.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak == 0.0 {
        return true;
    }
    let tail_start = series.len() - (series.len() as f64 * TAIL_FRACTION).ceil() as usize;
    let tail = series[tail_start..].iter().fold(0.0f64, |m, v| m.max(v.abs()));
    tail <= TAIL_THRESHOLD * peak
}

/// One evaluated Casimir-Polder potential.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialSample {
    pub position: crate::geom::Vec3,
    pub value: f64,
    /// False when the scattered series had not rung down by the last step.
    pub decayed: bool,
    pub resolution: usize,
    pub steps: usize,
    pub geometry_hash: u64,
}

/// `U = - sum_n K(t_n) E1(t_n) dt`.
pub fn cp_potential(
    kernel: &ConvolutionKernel,
    scattered: &ProbeRecord,
    resolution: usize,
    geometry_hash: u64,
) -> Result<PotentialSample> {
    if (kernel.dt - scattered.dt).abs() > 1e-15 {
        return Err(Error::RecordMismatch("kernel and series dt differ".into()));
    }
    if kernel.len() < scattered.series.len() {
        return Err(Error::RecordMismatch("kernel shorter than series".into()));
    }
    let mut acc = 0.0;
    for (k, e) in kernel.samples.iter().zip(&scattered.series) {
        acc += k * e;
    }
    Ok(PotentialSample {
        position: scattered.position,
        value: -acc * kernel.dt,
        decayed: is_decayed(&scattered.series),
        resolution,
        steps: scattered.series.len(),
        geometry_hash,
    })
}

/// Central-difference field-gradient series from two probes one cell apart
/// on each side: `(plus - minus) / (2 h)`.
pub fn gradient_series(plus: &ProbeRecord, minus: &ProbeRecord, h: f64) -> Result<ProbeRecord> {
    plus.compatible(minus)?;
    let series = plus.series.iter().zip(&minus.series).map(|(p, m)| (p - m) / (2.0 * h)).collect();
    let mid = plus.position.add(minus.position).scale(0.5);
    Ok(ProbeRecord { series, position: mid, ..plus.clone() })
}

/// Merit: `F = sum_n K(t_n) dEx(t_n) dt`. Positive when the structure
/// attracts the atom toward +x; the optimizer drives it negative.
pub fn merit_force(kernel: &ConvolutionKernel, gradient: &ProbeRecord) -> Result<f64> {
    if (kernel.dt - gradient.dt).abs() > 1e-15 {
        return Err(Error::RecordMismatch("kernel and series dt differ".into()));
    }
    let mut acc = 0.0;
    for (k, g) in kernel.samples.iter().zip(&gradient.series) {
        acc += k * g;
    }
    Ok(acc * kernel.dt)
}
