use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::detuning::DetuningModel;
use crate::error::{Error, Result};
use crate::spin2::PopulationVector;

/// How the precession phase depends on the RF frequency.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhaseConvention {
    /// Phi = 2 pi (f + f0) T + phi
    #[default]
    Sum,
    /// Phi = 2 pi (f - f0) T + phi, the rotating-frame form.
    Difference,
}

/// Accumulated phase over an interval of `t_us` microseconds; frequencies in kHz.
pub fn accumulated_phase(
    f_khz: f64,
    f0_khz: f64,
    t_us: f64,
    phi: f64,
    convention: PhaseConvention,
) -> f64 {
    let f = match convention {
        PhaseConvention::Sum => f_khz + f0_khz,
        PhaseConvention::Difference => f_khz - f0_khz,
    };
    2.0 * PI * f * t_us * 1e-3 + phi
}

/// Parameters of a two-pulse Ramsey fringe.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FringeParams {
    pub f0_khz: f64,
    pub t_us: f64,
    pub delta_khz: f64,
    pub phi: f64,
}

impl FringeParams {
    pub fn validate(&self) -> Result<()> {
        self.detuning().validate()?;
        if !(self.t_us.is_finite() && self.t_us >= 0.0) {
            return Err(Error::invalid(format!(
                "interrogation time must be non-negative, got {}",
                self.t_us
            )));
        }
        if !self.phi.is_finite() {
            return Err(Error::invalid("non-finite free phase"));
        }
        Ok(())
    }

    pub fn detuning(&self) -> DetuningModel {
        DetuningModel {
            f0_khz: self.f0_khz,
            delta_khz: self.delta_khz,
        }
    }

    pub fn phase(&self, f_khz: f64, convention: PhaseConvention) -> f64 {
        accumulated_phase(f_khz, self.f0_khz, self.t_us, self.phi, convention)
    }

    /// Closed-form populations for |+2> input at RF frequency `f_khz`.
    pub fn populations(&self, f_khz: f64, convention: PhaseConvention) -> PopulationVector {
        let eta = self.detuning().envelope(f_khz);
        closed_form_from_angles(eta, self.phase(f_khz, convention))
    }

    /// Only the single component at `index`; skips the other four.
    pub(crate) fn component(&self, f_khz: f64, convention: PhaseConvention, index: usize) -> f64 {
        let eta = self.detuning().envelope(f_khz);
        closed_form_component(eta, self.phase(f_khz, convention), index)
    }
}

pub(crate) fn closed_form_component(eta: f64, big_phi: f64, index: usize) -> f64 {
    let half = PI / 2.0 * eta;
    let (cb, sb) = (half.cos().powi(2), half.sin().powi(2));
    let (c, s) = ((big_phi / 2.0).cos().powi(2), (big_phi / 2.0).sin().powi(2));
    let inner = cb * c + s;
    match index {
        0 => inner.powi(4),
        1 => 4.0 * c * sb * inner.powi(3),
        2 => {
            let bracket = c * c * (PI * eta).sin().powi(2) + sb * big_phi.sin().powi(2);
            3.0 / 8.0 * bracket * bracket
        }
        3 => 4.0 * (cb * c.powi(4) * sb.powi(3) + c.powi(3) * sb.powi(3) * s),
        4 => c.powi(4) * sb.powi(4),
        _ => unreachable!("component index {index}"),
    }
}

fn closed_form_from_angles(eta: f64, big_phi: f64) -> PopulationVector {
    PopulationVector::from_array_unchecked(std::array::from_fn(|i| {
        closed_form_component(eta, big_phi, i)
    }))
}

/// Five-port fringe for |+2> input with the as-printed phase convention.
///
/// `f`, `f0`, `delta` in kHz, `t` in μs, `phi` in radians.
pub fn fringe_closed_form(
    f: f64,
    f0: f64,
    t: f64,
    delta: f64,
    phi: f64,
) -> Result<PopulationVector> {
    let params = FringeParams {
        f0_khz: f0,
        t_us: t,
        delta_khz: delta,
        phi,
    };
    params.validate()?;
    if !f.is_finite() {
        return Err(Error::invalid("non-finite RF frequency"));
    }
    Ok(params.populations(f, PhaseConvention::Sum))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(p: &PopulationVector, want: [f64; 5]) {
        assert!(
            p.as_array()
                .iter()
                .zip(want)
                .all(|(a, b)| (a - b).abs() < 1e-14),
            "{p:?}"
        );
    }

    #[test]
    fn resonant_in_phase_pulses_make_a_half_turn() {
        close(
            &closed_form_from_angles(1.0, 0.0),
            [0.0, 0.0, 0.0, 0.0, 1.0],
        );
        close(
            &closed_form_from_angles(1.0, 2.0 * PI),
            [0.0, 0.0, 0.0, 0.0, 1.0],
        );
    }

    #[test]
    fn resonant_out_of_phase_pulses_cancel() {
        close(&closed_form_from_angles(1.0, PI), [1.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn far_detuned_pulses_do_nothing() {
        for phi in [0.0, 0.4, 1.7, PI] {
            close(
                &closed_form_from_angles(0.0, phi),
                [1.0, 0.0, 0.0, 0.0, 0.0],
            );
        }
    }

    #[test]
    fn binomial_structure() {
        // Populations are C(4,k) p^(4-k) (1-p)^k with p the spin-1/2 survival probability.
        for &(eta, phi) in &[(0.3_f64, 0.2_f64), (0.8, 2.1), (1.0, 4.0), (-0.2, 5.5)] {
            let half = PI / 2.0 * eta;
            let p = half.cos().powi(2) * (phi / 2.0).cos().powi(2) + (phi / 2.0).sin().powi(2);
            let q = 1.0 - p;
            let want = [
                p.powi(4),
                4.0 * p.powi(3) * q,
                6.0 * p * p * q * q,
                4.0 * p * q.powi(3),
                q.powi(4),
            ];
            close(&closed_form_from_angles(eta, phi), want);
        }
    }

    #[test]
    fn phase_conventions() {
        let sum = accumulated_phase(200.0, 195.0, 100.0, 0.1, PhaseConvention::Sum);
        let diff = accumulated_phase(200.0, 195.0, 100.0, 0.1, PhaseConvention::Difference);
        assert!((sum - (2.0 * PI * 395.0 * 0.1 + 0.1)).abs() < 1e-12);
        assert!((diff - (2.0 * PI * 5.0 * 0.1 + 0.1)).abs() < 1e-12);
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(fringe_closed_form(195.0, 195.0, 290.0, 0.0, 0.0).is_err());
        assert!(fringe_closed_form(195.0, 195.0, -1.0, 25.0, 0.0).is_err());
        assert!(fringe_closed_form(f64::NAN, 195.0, 290.0, 25.0, 0.0).is_err());
    }
}
