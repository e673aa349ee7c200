use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::larmor::{larmor_frequency, LarmorParams};
use super::sequence::{sequence_evolve_with_offsets, SequenceSpec};
use crate::error::{Error, Result};
use crate::spin2::{PopulationVector, DIM};

/// Normal spread of the Larmor frequency seen by the atoms, kHz.
///
/// `gradient_khz` is static over one shot (same offset in every delay);
/// `fluctuation_khz` is redrawn independently for each delay.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FrequencySpread {
    pub gradient_khz: f64,
    pub fluctuation_khz: f64,
}

impl FrequencySpread {
    /// Converts field spreads (gauss) to frequency spreads via the Larmor relation.
    pub fn from_field(g_f: f64, gradient_gauss: f64, fluctuation_gauss: f64) -> Result<Self> {
        Ok(FrequencySpread {
            gradient_khz: larmor_frequency(LarmorParams {
                g_f,
                field_gauss: gradient_gauss,
            })?
            .abs(),
            fluctuation_khz: larmor_frequency(LarmorParams {
                g_f,
                field_gauss: fluctuation_gauss,
            })?
            .abs(),
        })
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("gradient", self.gradient_khz),
            ("fluctuation", self.fluctuation_khz),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(format!(
                    "{name} spread must be non-negative, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Mean populations over `n_samples` draws of the Larmor-frequency offsets.
///
/// Deterministic for a fixed `seed`; the generator is local to the call.
pub fn ensemble_average(
    seq: &SequenceSpec,
    spread: FrequencySpread,
    n_samples: usize,
    seed: u64,
) -> Result<PopulationVector> {
    if n_samples == 0 {
        return Err(Error::invalid("ensemble needs at least one sample"));
    }
    spread.validate()?;
    seq.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut normal = move || -> f64 { StandardNormal.sample(&mut rng) };
    let n_delays = seq.delay_count();
    let mut acc = [0.0; DIM];
    let mut per_delay = vec![0.0; n_delays];
    for _ in 0..n_samples {
        let static_offset = spread.gradient_khz * normal();
        for x in per_delay.iter_mut() {
            *x = spread.fluctuation_khz * normal();
        }
        let p = sequence_evolve_with_offsets(seq, static_offset, &per_delay)?.populations();
        for (a, x) in acc.iter_mut().zip(p.as_array()) {
            *a += x;
        }
    }
    let n = n_samples as f64;
    Ok(PopulationVector::from_array_unchecked(acc.map(|a| a / n)))
}
