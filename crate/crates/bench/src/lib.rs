//! Shared fixtures for the benchmark targets.

use cpforge::geom::{Dim, Vec3};
use cpforge::levelset::LevelSetField;
use cpforge::sim::SimulationConfig;

pub fn sim_2d(domain: f64, steps: usize) -> SimulationConfig {
    SimulationConfig {
        dim: Dim::Two,
        domain,
        resolution: 10,
        pml_depth: 1.0,
        courant: 0.5,
        steps,
    }
}

pub fn sim_3d(domain: f64, steps: usize) -> SimulationConfig {
    SimulationConfig {
        dim: Dim::Three,
        domain,
        resolution: 8,
        pml_depth: 1.0,
        courant: 0.5,
        steps,
    }
}

pub fn disk(cfg: &SimulationConfig) -> LevelSetField {
    LevelSetField::ball(cfg, 1.0, Vec3::new(0.5, 0.0, 0.0)).expect("fixture shape fits")
}
