//! Simulation core for a single-electron charge qubit in a 1D double
//! quantum dot.
//!
//! The crate is organised around one physical pipeline:
//!
//! 1. [`potential`] — the double-well potential, its linear detuning bias,
//!    and the calibration of the detuning constant λ;
//! 2. [`stationary`] — bonding/antibonding eigenstates of the discretised
//!    Hamiltonian (tridiagonal bisection + inverse iteration);
//! 3. [`propagator`] — an explicit staggered-leapfrog integrator for the
//!    time-dependent Schrödinger equation, with pluggable data-parallel
//!    kernel backends ([`kernel`]);
//! 4. [`qubit_basis`] — maximally localised states, the optimal qubit pair
//!    ψ0/ψ1, and the charge-readout algebra;
//! 5. [`lsm`] — the effective two-level model used as a fast reference;
//! 6. [`control`] — detuning pulse shapes, state preparation, parameter
//!    sweeps, and Bloch-sphere rotation tomography ([`rotation`]).
//!
//! Energies are in meV, lengths in nm, times in ps throughout; detunings
//! that are conventionally quoted in μeV carry a `_uev` suffix wherever
//! they cross an API boundary.

pub mod bench;
pub mod control;
pub mod error;
pub mod grid;
pub mod kernel;
pub mod lsm;
pub mod potential;
pub mod propagator;
pub mod qubit_basis;
pub mod rotation;
pub mod schedule;
pub mod stationary;
pub mod units;
pub mod wavefunction;

pub use error::{DqdError, Result};
pub use grid::Grid;
pub use units::UnitSystem;
pub use wavefunction::Wavefunction;
