//! Shared fixtures for the propagator benchmarks.

use eps_core::{make_grid, ChargedParticleMedium, DriveSpec, GaussianPacket, GridSpec, PhysicalConstants, StateFunction};

pub struct Fixture {
    pub chi: StateFunction,
    pub medium: ChargedParticleMedium,
    pub drive: DriveSpec,
    pub constants: PhysicalConstants,
}

/// Unit-parameter Kanai system with a centred packet on an `n x n` grid over `[-10, 10)^2`.
pub fn fixture(n: usize) -> Fixture {
    let grid = make_grid(GridSpec::square(-10.0, 10.0, n)).expect("valid grid");
    Fixture {
        chi: GaussianPacket::default().sample(grid).expect("finite packet"),
        medium: ChargedParticleMedium::default(),
        drive: DriveSpec::default(),
        constants: PhysicalConstants::default(),
    }
}
