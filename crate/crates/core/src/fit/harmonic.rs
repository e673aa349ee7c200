use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum number of samples over one period.
pub const MIN_SAMPLES: usize = 16;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HarmonicSpectrum {
    /// Index (>= 1) of the largest non-DC bin.
    pub dominant: usize,
    /// |X_k| / N for k = 0 ..= N/2.
    pub magnitudes: Vec<f64>,
}

/// Discrete Fourier magnitudes of a series sampled uniformly over one 2 pi period.
pub fn harmonic_spectrum(phases: &[f64], values: &[f64]) -> Result<HarmonicSpectrum> {
    let n = values.len();
    if phases.len() != n {
        return Err(Error::invalid("phase and value series differ in length"));
    }
    if n < MIN_SAMPLES {
        return Err(Error::invalid(format!(
            "need at least {MIN_SAMPLES} samples, got {n}"
        )));
    }
    let step = 2.0 * PI / n as f64;
    for (i, w) in phases.windows(2).enumerate() {
        if ((w[1] - w[0]) - step).abs() > 1e-9 * step.max(1.0) {
            return Err(Error::invalid(format!(
                "phases must be uniform with spacing 2pi/N over one period (sample {i})"
            )));
        }
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite sample"));
    }

    let mut buf: Vec<Complex<f64>> = values.iter().map(|&v| Complex::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let magnitudes: Vec<f64> = buf[..=n / 2].iter().map(|z| z.norm() / n as f64).collect();
    let dominant = magnitudes
        .iter()
        .enumerate()
        .skip(1)
        .fold((1, f64::NEG_INFINITY), |best, (k, &m)| {
            if m > best.1 {
                (k, m)
            } else {
                best
            }
        })
        .0;
    Ok(HarmonicSpectrum {
        dominant,
        magnitudes,
    })
}
