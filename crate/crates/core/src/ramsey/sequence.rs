use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use super::detuning::DetuningModel;
use super::fringe::{accumulated_phase, FringeParams, PhaseConvention};
use crate::error::{Error, Result};
use crate::spin2::{wigner_big_d, Rotation, SpinState};

/// Instantaneous RF rotation about an axis in the plane perpendicular to the field.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseSpec {
    /// Rotation angle on resonance, radians.
    pub nominal_angle: f64,
    pub rf_frequency_khz: f64,
    /// Azimuth of the rotation axis measured from the y axis, radians.
    pub axis_phase: f64,
}

impl PulseSpec {
    pub fn new(nominal_angle: f64, rf_frequency_khz: f64) -> Self {
        PulseSpec {
            nominal_angle,
            rf_frequency_khz,
            axis_phase: 0.0,
        }
    }

    /// beta(f) = nominal angle * eta(f)
    pub fn effective_angle(&self, model: &DetuningModel) -> f64 {
        self.nominal_angle * model.envelope(self.rf_frequency_khz)
    }

    pub fn rotation(&self, model: &DetuningModel) -> Result<Rotation> {
        wigner_big_d(
            self.axis_phase,
            self.effective_angle(model),
            -self.axis_phase,
        )
    }
}

/// Free precession about the field axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DelaySpec {
    pub duration_us: f64,
    /// Extra phase added to the precession phase, radians.
    pub free_phase: f64,
    /// RF frequency that sets the phase reference during the interval, kHz.
    pub rf_frequency_khz: f64,
}

impl DelaySpec {
    pub fn phase(&self, f0_khz: f64, convention: PhaseConvention) -> f64 {
        accumulated_phase(
            self.rf_frequency_khz,
            f0_khz,
            self.duration_us,
            self.free_phase,
            convention,
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Step {
    Pulse(PulseSpec),
    Delay(DelaySpec),
}

/// Ordered pulse/delay steps applied left to right to `initial`.
#[derive(Clone, Debug, PartialEq)]
pub struct SequenceSpec {
    pub detuning: DetuningModel,
    pub convention: PhaseConvention,
    pub steps: Vec<Step>,
    pub initial: SpinState,
}

impl SequenceSpec {
    /// pi/2 - delay(T) - pi/2 at RF frequency `f_khz`.
    pub fn ramsey(params: &FringeParams, f_khz: f64, initial: SpinState) -> Self {
        let pulse = Step::Pulse(PulseSpec::new(FRAC_PI_2, f_khz));
        let delay = Step::Delay(DelaySpec {
            duration_us: params.t_us,
            free_phase: params.phi,
            rf_frequency_khz: f_khz,
        });
        SequenceSpec {
            detuning: params.detuning(),
            convention: PhaseConvention::Sum,
            steps: vec![pulse, delay, pulse],
            initial,
        }
    }

    /// pi/2 - delay(T/2) - pi - delay(T/2) - pi/2. The free phase is put on the first delay.
    pub fn spin_echo(params: &FringeParams, f_khz: f64, initial: SpinState) -> Self {
        let half = |free_phase| {
            Step::Delay(DelaySpec {
                duration_us: params.t_us / 2.0,
                free_phase,
                rf_frequency_khz: f_khz,
            })
        };
        SequenceSpec {
            detuning: params.detuning(),
            convention: PhaseConvention::Sum,
            steps: vec![
                Step::Pulse(PulseSpec::new(FRAC_PI_2, f_khz)),
                half(params.phi),
                Step::Pulse(PulseSpec::new(PI, f_khz)),
                half(0.0),
                Step::Pulse(PulseSpec::new(FRAC_PI_2, f_khz)),
            ],
            initial,
        }
    }

    pub fn with_convention(mut self, convention: PhaseConvention) -> Self {
        self.convention = convention;
        self
    }

    pub fn delay_count(&self) -> usize {
        self.steps
            .iter()
            .filter(|s| matches!(s, Step::Delay(_)))
            .count()
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps.is_empty() {
            return Err(Error::invalid("empty pulse sequence"));
        }
        self.detuning.validate()?;
        for (i, step) in self.steps.iter().enumerate() {
            match step {
                Step::Pulse(p) => {
                    if !(p.nominal_angle.is_finite()
                        && p.rf_frequency_khz.is_finite()
                        && p.axis_phase.is_finite())
                    {
                        return Err(Error::invalid(format!(
                            "step {i}: non-finite pulse parameter"
                        )));
                    }
                }
                Step::Delay(d) => {
                    if !(d.duration_us.is_finite() && d.duration_us >= 0.0) {
                        return Err(Error::invalid(format!(
                            "step {i}: delay must be non-negative"
                        )));
                    }
                    if !(d.free_phase.is_finite() && d.rf_frequency_khz.is_finite()) {
                        return Err(Error::invalid(format!(
                            "step {i}: non-finite delay parameter"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Evolves the initial state through every step.
pub fn sequence_evolve(seq: &SequenceSpec) -> Result<SpinState> {
    sequence_evolve_with_offsets(seq, 0.0, &[])
}

/// Like [`sequence_evolve`], with Larmor-frequency offsets applied during delays only.
///
/// `static_offset_khz` shifts every delay; `per_delay_offsets_khz[k]`, when
/// present, is added on top for the k-th delay. Pulses keep the nominal resonance.
pub fn sequence_evolve_with_offsets(
    seq: &SequenceSpec,
    static_offset_khz: f64,
    per_delay_offsets_khz: &[f64],
) -> Result<SpinState> {
    seq.validate()?;
    let mut state = *seq.initial.vector();
    let mut delay_index = 0;
    for step in &seq.steps {
        let u = match step {
            Step::Pulse(p) => p.rotation(&seq.detuning)?,
            Step::Delay(d) => {
                let extra = per_delay_offsets_khz
                    .get(delay_index)
                    .copied()
                    .unwrap_or(0.0);
                delay_index += 1;
                let f0 = seq.detuning.f0_khz + static_offset_khz + extra;
                wigner_big_d(d.phase(f0, seq.convention), 0.0, 0.0)?
            }
        };
        state = u.matrix() * state;
    }
    Ok(SpinState::from_vector_unchecked(state))
}
