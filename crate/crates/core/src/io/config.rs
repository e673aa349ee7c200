//! Run configuration: one TOML file mirrors the command-line flags.
//!
//! ```toml
//! mode = "simulate-fringe"
//! seed = 7
//! out = "scan.csv"
//!
//! [simulate-fringe]
//! f0-khz = 195.0
//! t-us = 290.0
//! noise = 0.05
//! ```
//!
//! Flags given on the command line override values from the file.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    SimulateRabi,
    SimulateFringe,
    Fit,
    Sensitivity,
    Sequence,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Option<Mode>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub simulate_rabi: RabiOptions,
    #[serde(default)]
    pub simulate_fringe: FringeOptions,
    #[serde(default)]
    pub fit: FitOptions,
    #[serde(default)]
    pub sensitivity: FitOptions,
    #[serde(default)]
    pub sequence: SequenceOptions,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let line = e.span().map_or(0, |s| {
                text[..s.start.min(text.len())].matches('\n').count() + 1
            });
            Error::Parse {
                line,
                message: e.message().to_string(),
            }
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("RunConfig always serializes")
    }
}

/// Each field of `self` wins over the same field of `fallback`.
pub trait Merge {
    fn merge(self, fallback: Self) -> Self;
}

macro_rules! impl_merge {
    ($ty:ident { $($field:ident),* $(,)? }) => {
        impl Merge for $ty {
            fn merge(self, fallback: Self) -> Self {
                $ty { $($field: self.$field.or(fallback.$field)),* }
            }
        }
    };
}

#[derive(Args, Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct RabiOptions {
    /// Rabi frequency omega/2pi, kHz [default: 8.8]
    #[arg(long)]
    pub rabi_khz: Option<f64>,
    /// First pulse width, us [default: 0]
    #[arg(long)]
    pub t_start_us: Option<f64>,
    /// Last pulse width, us [default: 230]
    #[arg(long)]
    pub t_stop_us: Option<f64>,
    /// Pulse-width step, us [default: 1]
    #[arg(long)]
    pub t_step_us: Option<f64>,
}
impl_merge!(RabiOptions {
    rabi_khz,
    t_start_us,
    t_stop_us,
    t_step_us
});

#[derive(Args, Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct FringeOptions {
    /// Resonance frequency, kHz [default: 195]
    #[arg(long)]
    pub f0_khz: Option<f64>,
    /// Free-evolution time, us [default: 290]
    #[arg(long)]
    pub t_us: Option<f64>,
    /// Pulse envelope width, kHz [default: 25]
    #[arg(long)]
    pub delta_khz: Option<f64>,
    /// Phase offset, rad [default: 0.14]
    #[arg(long, allow_hyphen_values = true)]
    pub phi: Option<f64>,
    /// Grid start, kHz [default: 175]
    #[arg(long)]
    pub f_start_khz: Option<f64>,
    /// Grid stop (inclusive), kHz [default: 210]
    #[arg(long)]
    pub f_stop_khz: Option<f64>,
    /// Grid step, kHz [default: 0.25]
    #[arg(long)]
    pub f_step_khz: Option<f64>,
    /// Initial sublevel: +2, +1, 0, -1 or -2 [default: +2]
    #[arg(long, allow_hyphen_values = true)]
    pub initial: Option<String>,
    /// Phase convention: sum or difference [default: sum]
    #[arg(long)]
    pub convention: Option<String>,
    /// Emit populations on a uniform phase grid instead of a frequency grid
    #[arg(long, num_args = 0..=1, default_missing_value = "true", require_equals = true)]
    pub vs_phase: Option<bool>,
    /// Phase-grid size for --vs-phase [default: 64]
    #[arg(long)]
    pub phase_points: Option<usize>,
    /// Envelope value for --vs-phase [default: 1]
    #[arg(long)]
    pub eta: Option<f64>,
    /// Gaussian population noise sigma (needs --seed)
    #[arg(long)]
    pub noise: Option<f64>,
    /// Attach constant stddev columns with this value
    #[arg(long)]
    pub stddev: Option<f64>,
}
impl_merge!(FringeOptions {
    f0_khz,
    t_us,
    delta_khz,
    phi,
    f_start_khz,
    f_stop_khz,
    f_step_khz,
    initial,
    convention,
    vs_phase,
    phase_points,
    eta,
    noise,
    stddev,
});

#[derive(Args, Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct FitOptions {
    /// Scan CSV to fit
    #[arg(value_name = "SCAN")]
    pub scan: Option<PathBuf>,
    /// Initial guess for f0, kHz (required)
    #[arg(long)]
    pub f0_khz: Option<f64>,
    /// Initial guess for T, us (required)
    #[arg(long)]
    pub t_us: Option<f64>,
    /// Initial guess for phi, rad [default: 0]
    #[arg(long, allow_hyphen_values = true)]
    pub phi: Option<f64>,
    /// Envelope width, kHz; fixed unless --free-delta [default: 25]
    #[arg(long)]
    pub delta_khz: Option<f64>,
    /// Fit the envelope width too
    #[arg(long, num_args = 0..=1, default_missing_value = "true", require_equals = true)]
    pub free_delta: Option<bool>,
    /// Fit an overall amplitude scale
    #[arg(long, num_args = 0..=1, default_missing_value = "true", require_equals = true)]
    pub free_amplitude: Option<bool>,
    /// Component to fit (+2, +1, 0, -1, -2) or `all` [default: +2]
    #[arg(long, allow_hyphen_values = true)]
    pub target: Option<String>,
    /// Weight residuals by 1/stddev
    #[arg(long, num_args = 0..=1, default_missing_value = "true", require_equals = true)]
    pub weighted: Option<bool>,
    /// Coarse multi-start before refinement [default: true]
    #[arg(long, num_args = 0..=1, default_missing_value = "true", require_equals = true)]
    pub multistart: Option<bool>,
    /// Iteration cap [default: 200]
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Relative cost-change tolerance [default: 1e-12]
    #[arg(long)]
    pub tol: Option<f64>,
    /// Nominal T, us; the report flags fitted T differing by more than 3%
    #[arg(long)]
    pub nominal_t_us: Option<f64>,
    /// Where to write the model overlay CSV
    #[arg(long)]
    pub overlay: Option<PathBuf>,
    /// Phase convention: sum or difference [default: sum]
    #[arg(long)]
    pub convention: Option<String>,
    /// Neighbour-averaging window (odd) applied before fitting
    #[arg(long)]
    pub window: Option<usize>,
}
impl_merge!(FitOptions {
    scan,
    f0_khz,
    t_us,
    phi,
    delta_khz,
    free_delta,
    free_amplitude,
    target,
    weighted,
    multistart,
    max_iter,
    tol,
    nominal_t_us,
    overlay,
    convention,
    window,
});

#[derive(Args, Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct SequenceOptions {
    /// Sequence file
    #[arg(value_name = "SEQUENCE")]
    pub file: Option<PathBuf>,
    /// Static (per-shot) Larmor spread, kHz
    #[arg(long)]
    pub gradient_khz: Option<f64>,
    /// Per-delay Larmor fluctuation, kHz
    #[arg(long)]
    pub fluctuation_khz: Option<f64>,
    /// Ensemble size [default: 1000]
    #[arg(long)]
    pub samples: Option<usize>,
    /// Fixed Larmor offset applied to every delay, kHz [default: 0]
    #[arg(long, allow_hyphen_values = true)]
    pub offset_khz: Option<f64>,
}
impl_merge!(SequenceOptions {
    file,
    gradient_khz,
    fluctuation_khz,
    samples,
    offset_khz
});
