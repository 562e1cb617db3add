//! Entanglement generation in periodically driven anisotropic XY chains.
//!
//! The crate bundles three engines for the end-to-end entanglement of an
//! open spin-1/2 chain prepared in `|00…0⟩`:
//!
//! * a dense, matrix-free state-vector propagator for the driven lab-frame
//!   Hamiltonian and its rotating-wave (RWA) approximation ([`evolve`]);
//! * a free-fermion engine for the infinitely anisotropic RWA chain, which
//!   is dual to an isotropic XX chain started in the Néel state ([`fermion`]);
//! * concurrence and fully entangled fraction of the end-spin pair
//!   ([`entangle`]).
//!
//! [`experiments`] combines them into frequency, coupling and length sweeps.
//! With the default `parallel` feature, sweep points and large matrix-free
//! products run on rayon; without it everything is sequential.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod entangle;
pub mod error;
pub mod evolve;
pub mod experiments;
pub mod fermion;
pub mod model;
pub mod parallel;
pub mod pfaffian;
pub mod verify;

pub use entangle::{concurrence, fully_entangled_fraction, partial_trace_ends, EndSpinStructure, TwoQubitDensity};
pub use error::{Error, Result};
pub use evolve::{propagate, propagate_with_freeze, Freeze, PropagationSettings, TimeSeries};
pub use model::{ChainConfig, DriveProtocol, DriveSegment, HamiltonianSpec, PureState, Variant, C64};
pub use parallel::Execution;
