use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sinc-shaped response of a pulse to RF detuning.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetuningModel {
    /// Resonant Larmor frequency, kHz.
    pub f0_khz: f64,
    /// Envelope width, kHz (first zero at |f - f0| = width).
    pub delta_khz: f64,
}

impl DetuningModel {
    pub fn new(f0_khz: f64, delta_khz: f64) -> Result<Self> {
        let model = DetuningModel { f0_khz, delta_khz };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.f0_khz.is_finite() {
            return Err(Error::invalid("non-finite resonance frequency"));
        }
        if !(self.delta_khz.is_finite() && self.delta_khz > 0.0) {
            return Err(Error::invalid(format!(
                "envelope width must be positive, got {}",
                self.delta_khz
            )));
        }
        Ok(())
    }

    /// eta(f) = Delta sin[pi (f - f0) / Delta] / (pi (f - f0)).
    pub fn envelope(&self, f_khz: f64) -> f64 {
        let detuning = f_khz - self.f0_khz;
        let x = PI * detuning / self.delta_khz;
        if detuning.abs() < 1e-6 * self.delta_khz {
            1.0 - x * x / 6.0
        } else {
            x.sin() / x
        }
    }
}

pub fn detuning_envelope(f_khz: f64, model: &DetuningModel) -> f64 {
    model.envelope(f_khz)
}
