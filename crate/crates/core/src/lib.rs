//! Simulation and parameter estimation for Ramsey interferometry over the
//! five Zeeman sublevels of a spin-2 atomic gas.
//!
//! * [`spin2`]: spin-2 generators, closed-form Wigner matrices, a spectral
//!   matrix-exponential oracle and Born-rule readout.
//! * [`ramsey`]: pulses with a sinc detuning envelope, Larmor precession,
//!   the closed-form five-port fringe, a pulse-sequence engine (spin echo
//!   included) and ensemble dephasing.
//! * [`fit`]: damped least-squares fringe fitting, neighbour averaging,
//!   phase-sensitivity estimation and harmonic analysis.
//! * [`io`]: scan CSV files, sequence files and run configs.
//! * [`cli`]: the `spin2-ramsey` command line.
//!
//! Units on every public surface: frequencies in kHz, times in μs, angles
//! in radians.

pub mod cli;
pub mod error;
pub mod fit;
pub mod io;
pub mod ramsey;
pub mod spin2;

pub use error::{Error, Result};
