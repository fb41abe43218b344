//! Quantum dynamics in extended phase space.
//!
//! State functions `chi(p, q, t)` live on a periodic phase-space grid and
//! evolve under `i hbar d chi/dt = H chi`, where the extended Hamiltonian
//! `H = H(p - i hbar d/dq, q) - H(p, q - i hbar d/dp)` is built from a
//! classical Hamiltonian. The crate ships the damped (Kanai) charged-particle
//! medium in two gauges, spectral propagators for both, the closed-form
//! characteristic solutions, and conductivity extraction.

pub mod analytic;
pub mod error;
pub mod evolution;
pub mod expsum;
pub mod gauge;
pub mod grid;
pub mod hamiltonians;
pub mod observables;

pub use num_complex::Complex64;

pub use analytic::{
    classical_trajectory, plane_wave_solution, steady_state_conductivity, xi_eta, CharacteristicMap,
    PlaneWaveSolution,
};
pub use error::{EpsError, Result};
pub use evolution::{
    generic_series_step, propagate, step_a_gauge, step_phi_gauge, PropagatorConfig, Scheme,
    Trajectory,
};
pub use gauge::{apply_gauge, canonical_shift, transform_hamiltonian, GaugeFunctions};
pub use grid::{
    d_dp, d_dq, integrate_phase_space, make_grid, GaussianPacket, Grid, GridSpec, StateFunction,
};
pub use hamiltonians::{
    build_kanai, extend_hamiltonian, vector_potential, ChargedParticleMedium, Drive, DriveSpec,
    ExtendedHamiltonianOp, GaugePotentials, GaugeTag, PhysicalConstants, PolyHamiltonian,
};
pub use observables::{average, conductivity, mean_qdot, ConductivityResult, ObservableRecord};
