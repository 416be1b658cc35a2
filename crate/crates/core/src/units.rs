//! Unit conversions into simulation units.
//!
//! Simulation units: `c = 1`, length unit `L0`, time unit `L0/c`, angular
//! frequency unit `c/L0`, `hbar = eps0 = mu0 = 1`. Laboratory inputs
//! (photon energies in eV, lengths in nm) are converted once at
//! configuration load; the solvers never see SI quantities.

/// Speed of light in vacuum (m/s).
pub const C0: f64 = 299_792_458.0;
/// Reduced Planck constant (J s).
pub const HBAR: f64 = 1.054_571_817e-34;
/// Elementary charge (C).
pub const E_CHARGE: f64 = 1.602_176_634e-19;

/// Angular frequency in simulation units (`c/L0`) for a photon energy in eV.
///
/// `omega_sim = (E/hbar) * (L0/c)`.
pub fn ev_to_angular(energy_ev: f64, l0_m: f64) -> f64 {
    energy_ev * E_CHARGE / HBAR * l0_m / C0
}

/// Length in simulation units for a length in meters.
pub fn meters_to_l0(length_m: f64, l0_m: f64) -> f64 {
    length_m / l0_m
}
