//! Parameter recovery and fringe diagnostics.

mod fringe_fit;
mod harmonic;
mod lm;
mod neighbor;
mod sensitivity;

pub use fringe_fit::{
    fit_fringe, FitConfig, FitParameter, FitResult, FitTarget, ParamSetting, ParamUncertainties,
    DEFAULT_DELTA_KHZ,
};
pub use harmonic::{harmonic_spectrum, HarmonicSpectrum};
pub use neighbor::neighbor_average;
pub use sensitivity::{sensitivity, PeakSensitivity, SensitivityReport, PEAK_THRESHOLD};
