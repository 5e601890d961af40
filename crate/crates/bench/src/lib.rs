//! Shared fixtures for the benchmarks in `benches/`.

use optosteer::gram::{assemble, CovarianceBlocks, TimeGrid};
use optosteer::model::PhysicalParams;
use optosteer::statespace::{build_model, Flavor, LinearModel};
use optosteer::wienerhopf::default_window;

/// Free mass, α = 1, η = 0.8, weak thermal force.
pub fn free_mass() -> LinearModel {
    let p = PhysicalParams::free_mass(1.0, 0.8).with_thermal_force(0.1);
    build_model(&p, Flavor::Adiabatic).expect("valid parameters")
}

/// Damped oscillator, Q = 50, one thermal quantum.
pub fn oscillator() -> LinearModel {
    let p = PhysicalParams::free_mass(1.0, 0.8).with_oscillator(1.0, 0.02);
    let p = p.with_thermal_force(3.0 * p.thermal_floor());
    build_model(&p, Flavor::Adiabatic).expect("valid parameters")
}

pub fn grid(model: &LinearModel, samples: usize) -> TimeGrid {
    TimeGrid::new(default_window(model), samples).expect("positive window")
}

pub fn blocks(model: &LinearModel, samples: usize) -> CovarianceBlocks {
    assemble(model, &grid(model, samples), 0.0).expect("assembled blocks")
}
