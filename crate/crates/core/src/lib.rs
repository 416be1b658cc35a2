//! Inverse design of Casimir-Polder forces in the time domain.
//!
//! The crate couples four pieces into one discovery loop:
//!
//! - a Yee-grid FDTD Maxwell solver with Drude media and CPML boundaries
//!   ([`sim`]),
//! - a convolution-kernel evaluator that turns recorded scattered fields
//!   into Casimir-Polder potentials, forces and an optimization merit
//!   ([`kernel`]),
//! - reverse-time adjoint simulations whose overlap with the forward field
//!   yields a boundary velocity ([`adjoint`]),
//! - a signed-distance level set advected by that velocity ([`levelset`],
//!   [`fmm`]), orchestrated by [`optim`].
//!
//! Everything runs in simulation units: `c = 1`, lengths in `L0`, times in
//! `L0/c`, angular frequencies in `c/L0`, and `hbar = eps0 = mu0 = 1`.
//! [`units`] holds the conversions from laboratory values.

pub mod adjoint;
pub mod config;
pub mod error;
pub mod export;
pub mod fmm;
pub mod geom;
pub mod gradcheck;
pub mod kernel;
pub mod levelset;
pub mod materials;
pub mod optim;
pub mod oracle;
pub mod pipeline;
pub mod report;
pub mod sim;
pub mod units;
pub mod waveform;

pub use error::{Error, Result};
pub use geom::{Axis, Dim, GridDims, Vec3};
pub use materials::{AtomModel, DrudeParameters};
pub use sim::{PointSource, ProbeRecord, SimulationConfig};
