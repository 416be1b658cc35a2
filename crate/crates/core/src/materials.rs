//! Material dispersion models: Drude metal for the structure, a
//! single-resonance Lorentz polarizability for the atom.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::units::ev_to_angular;

/// Drude permittivity parameters in simulation units (`c/L0`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DrudeParameters {
    pub eps_inf: f64,
    /// Plasma angular frequency.
    pub omega_p: f64,
    /// Collision rate.
    pub gamma_p: f64,
}

impl DrudeParameters {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega_p > 0.0) {
            return Err(Error::InvalidConfig("Drude omega_p must be positive".into()));
        }
        if self.gamma_p < 0.0 {
            return Err(Error::InvalidConfig("Drude gamma_p must be non-negative".into()));
        }
        if self.eps_inf < 1.0 {
            return Err(Error::InvalidConfig("Drude eps_inf must be >= 1".into()));
        }
        Ok(())
    }

    /// Complex permittivity `eps(omega) = eps_inf - omega_p^2 / (omega^2 + i gamma_p omega)`.
    pub fn permittivity(&self, omega: f64) -> Complex64 {
        let denom = Complex64::new(omega * omega, self.gamma_p * omega);
        Complex64::new(self.eps_inf, 0.0) - self.omega_p * self.omega_p / denom
    }

    /// Drude gold, converted to simulation units for the given length scale.
    ///
    /// Free-electron fit to gold in the infrared/visible:
    /// `hbar omega_p = 9.02 eV`, `hbar gamma_p = 0.0267 eV`, `eps_inf = 1`
    /// (Ordal et al., Appl. Opt. 24, 4493 (1985)). Shipped as the default
    /// structure material; every field is overridable in the run config.
    pub fn gold(l0_m: f64) -> DrudeParameters {
        DrudeParameters {
            eps_inf: 1.0,
            omega_p: ev_to_angular(9.02, l0_m),
            gamma_p: ev_to_angular(0.0267, l0_m),
        }
    }
}

/// Ground-state atom with a single dominant transition, polarized along one axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtomModel {
    /// Static polarizability scale. The merit drops positive constants, so
    /// this is 1 in simulation units unless physical rescaling is wanted.
    pub alpha0: f64,
    /// Transition angular frequency (`c/L0`).
    pub omega_a: f64,
    /// Transition linewidth (`c/L0`).
    pub gamma_a: f64,
    /// Polarization axis, unit length.
    pub axis: Vec3,
}

impl AtomModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega_a > 0.0) {
            return Err(Error::InvalidConfig("atom omega_a must be positive".into()));
        }
        if !(self.gamma_a > 0.0) {
            return Err(Error::InvalidConfig("atom gamma_a must be positive".into()));
        }
        if (self.axis.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig("atom axis must be unit length".into()));
        }
        Ok(())
    }

    /// `alpha(omega) = alpha0 wa^2 / (wa^2 - w^2 - i ga w)`.
    ///
    /// Evaluates for any real `omega`; crossing symmetry
    /// `alpha(-w) = conj(alpha(w))` holds by construction.
    pub fn polarizability(&self, omega: f64) -> Complex64 {
        let wa2 = self.omega_a * self.omega_a;
        self.alpha0 * wa2 / Complex64::new(wa2 - omega * omega, -self.gamma_a * omega)
    }

    /// Polarizability on the positive imaginary frequency axis (real-valued).
    pub fn polarizability_imag_axis(&self, xi: f64) -> f64 {
        let wa2 = self.omega_a * self.omega_a;
        self.alpha0 * wa2 / (wa2 + xi * xi + self.gamma_a * xi)
    }

    /// Rubidium-87 dominant transition (1.6 eV, linewidth 2.5e-8 eV),
    /// x-polarized, `alpha0 = 1`, converted for the given length scale.
    pub fn rubidium87(l0_m: f64) -> AtomModel {
        AtomModel {
            alpha0: 1.0,
            omega_a: ev_to_angular(1.6, l0_m),
            gamma_a: ev_to_angular(2.5e-8, l0_m),
            axis: Vec3::new(1.0, 0.0, 0.0),
        }
    }

    /// Copy with the linewidth broadened to at least `floor` (kernel
    /// construction cannot resolve the bare atomic linewidth on any
    /// practical frequency grid).
    pub fn broadened(&self, floor: f64) -> AtomModel {
        AtomModel { gamma_a: self.gamma_a.max(floor), ..*self }
    }
}

/// Material presets printed by `materials list`.
pub fn preset_names() -> &'static [&'static str] {
    &["gold"]
}

pub fn preset(name: &str, l0_m: f64) -> Result<DrudeParameters> {
    match name {
        "gold" => Ok(DrudeParameters::gold(l0_m)),
        other => Err(Error::InvalidConfig(format!("unknown material preset '{other}'"))),
    }
}
