//! Simulation toolkit for three-junction flux qubits and their collective
//! radiation through a lossy cavity.
//!
//! The crate has two halves that meet in [`experiments`]:
//!
//! * [`circuit`] and [`ensemble`] model a single flux qubit in the charge
//!   basis and propagate junction-area fabrication spread into a distribution
//!   of qubit gaps and persistent currents, including the search for the
//!   external flux bias that minimizes the ensemble frequency spread.
//! * [`dynamics`] integrates the cavity-eliminated master equation for N
//!   qubits coupled to a common lossy mode and reproduces the collective
//!   (superradiant) intensity scaling, with discrete initial inversion or a
//!   Gaussian drive pulse preparing the excitation.
//!
//! All dynamics run in angular units (rad/ns); the [`config`] loader converts
//! ordinary MHz/GHz inputs with the 2*pi factor and the CLI in `src/main.rs`
//! wires configs to [`experiments`] runs with CSV + manifest outputs.

pub mod circuit;
pub mod config;
pub mod dynamics;
pub mod ensemble;
pub mod experiments;
pub mod sparse;
