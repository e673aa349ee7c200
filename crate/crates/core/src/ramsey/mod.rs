//! Forward model of the spin-2 Ramsey interferometer.

mod detuning;
mod ensemble;
mod fringe;
mod larmor;
mod rabi;
mod scan;
mod sequence;

pub use detuning::{detuning_envelope, DetuningModel};
pub use ensemble::{ensemble_average, FrequencySpread};
pub(crate) use fringe::closed_form_component;
pub use fringe::{accumulated_phase, fringe_closed_form, FringeParams, PhaseConvention};
pub use larmor::{larmor_frequency, LarmorParams, BOHR_MAGNETON, PLANCK};
pub use rabi::rabi_populations;
pub use scan::{fringe_scan, phase_scan, FringeScan, PhaseScan, ScanMetadata, ScanRow, ScanSource};
pub use sequence::{
    sequence_evolve, sequence_evolve_with_offsets, DelaySpec, PulseSpec, SequenceSpec, Step,
};
