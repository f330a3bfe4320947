//! Pulse-level compiler and simulator for multi-qubit gates mediated by a
//! shared harmonic-oscillator bus.
//!
//! The library is organized around two independent evaluation paths for the
//! same pulse programs:
//!
//! * [`propagator`] evaluates the exact closed-form solution of the bus
//!   Hamiltonian per internal-eigenvalue tuple (scalar phase-space records,
//!   reassembled into a unitary), and
//! * [`integrator`] exponentiates the assembled Hamiltonian on a truncated
//!   Fock space, segment by segment.
//!
//! Agreement between the two is the core correctness check; [`verification`]
//! runs it over randomized programs. [`compiler`] produces pulse programs for
//! rectangle, parallelogram, chained-parallelogram, Toffoli, C^n-NOT and
//! product-phase gates, [`grover`] builds search programs from those pieces,
//! and [`analysis`] scores compiled gates (fidelity, leakage, closure,
//! oscillator-state independence).

pub mod analysis;
pub mod compiler;
pub mod error;
pub mod grover;
pub mod hilbert;
pub mod integrator;
mod linalg;
pub mod model;
pub mod propagator;
pub mod verification;

pub use error::{Error, Result};
pub use hilbert::{Axis, CompositeState, DenseOperator, OscillatorSpec, Space};
pub use model::{
    AxisFrame, IdealLocal, InternalOperator, Program, ProgramStep, PulseSegment, PulseSequence,
};
