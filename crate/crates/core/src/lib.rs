//! Ensemble simulation of NMR spin systems under pulsed field gradients.
//!
//! The crate is organised bottom-up:
//!
//! - [`spinsys`] builds the drift, gradient and control Hamiltonians of a
//!   register of spin-1/2 nuclei.
//! - [`sequence`] holds the pulse-sequence data model, its text format and
//!   the piecewise-constant sampler.
//! - [`propagator`] turns sampled schedules into unitaries using exact
//!   exponentials, the diagonal fast path, the static shortcut or the
//!   Bhole–Jones splitting.
//! - [`gradient`] discretizes the sample along z, tracks coherence orders and
//!   provides closed-form dephasing coefficients.
//! - [`analysis`] has fidelities, partial traces and pseudo-pure targets.
//! - [`optimizer`] searches multi-scan pseudo-pure-state preparation sequences.
//! - [`harness`] reproduces the numerical studies as CSV reports.
//!
//! All Hamiltonians are in angular-frequency units (rad/s, ħ = 1).

pub mod analysis;
pub mod error;
pub mod exec;
pub mod gradient;
pub mod harness;
pub mod linalg;
pub mod optimizer;
pub mod propagator;
pub mod random;
pub mod sequence;
pub mod spinsys;

pub use error::{Error, Result};
pub use exec::Execution;
pub use linalg::{CMat, CVec, C64};
