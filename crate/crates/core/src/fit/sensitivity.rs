use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::fringe_fit::FitResult;
use crate::error::{Error, Result};
use crate::ramsey::{closed_form_component, FringeScan};
use crate::spin2::Sublevel;

/// Peaks of the fitted m_F = +2 curve must exceed this population.
pub const PEAK_THRESHOLD: f64 = 0.5;

const SEARCH_STEP: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeakSensitivity {
    pub f_khz: f64,
    /// Accumulated phase at the peak, radians.
    pub phase: f64,
    pub height: f64,
    /// m_F = +2 stddev interpolated at the peak.
    pub local_stddev: f64,
    /// Smallest phase offset whose model change reaches `local_stddev`, radians.
    pub min_phase: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub peaks: Vec<PeakSensitivity>,
    pub average_phase: f64,
    pub threshold: f64,
}

/// Smallest distinguishable phase at every peak of the fitted m_F = +2 fringe.
///
/// For each peak, the phase offset is walked away from the peak at fixed
/// envelope until the model population has moved by one local standard
/// deviation; the smaller of the two directions is kept.
pub fn sensitivity(scan: &FringeScan, fitted: &FitResult) -> Result<SensitivityReport> {
    let stddev = scan.component_stddev(Sublevel::Plus2).ok_or_else(|| {
        Error::invalid("sensitivity needs stddev columns (run neighbour averaging first)")
    })?;
    if !fitted.converged {
        return Err(Error::invalid("sensitivity needs a converged fit"));
    }
    if scan.len() < 3 {
        return Err(Error::invalid("scan too short for peak detection"));
    }
    let freqs = scan.frequencies();
    let params = fitted.params;
    let convention = fitted.convention;
    let model = |f: f64| fitted.model(f, Sublevel::Plus2);

    let (lo, hi) = (freqs[0], freqs[freqs.len() - 1]);
    let period = if params.t_us > 0.0 {
        1e3 / params.t_us
    } else {
        hi - lo
    };
    let grid_step = scan.grid_step().unwrap_or(hi - lo);
    let step = (period / 200.0).min(grid_step / 10.0).max((hi - lo) / 1e6);
    let n = ((hi - lo) / step).ceil() as usize + 1;
    let dense: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let f = (lo + i as f64 * step).min(hi);
            (f, model(f))
        })
        .collect();

    let mut peaks = Vec::new();
    for w in dense.windows(3) {
        let ((fa, a), (_, b), (fc, c)) = (w[0], w[1], w[2]);
        if b > a && b >= c && b > PEAK_THRESHOLD {
            let f_peak = golden_max(&model, fa, fc);
            let height = model(f_peak);
            let phase = params.phase(f_peak, convention);
            let eta = params.detuning().envelope(f_peak);
            let local_stddev = interpolate(&freqs, &stddev, f_peak);
            let g =
                |delta: f64| fitted.amplitude_scale * closed_form_component(eta, phase + delta, 0);
            let min_phase = smallest_distinguishable(&g, local_stddev);
            peaks.push(PeakSensitivity {
                f_khz: f_peak,
                phase,
                height,
                local_stddev,
                min_phase,
            });
        }
    }
    if peaks.is_empty() {
        return Err(Error::EmptyReport);
    }
    let average_phase = peaks.iter().map(|p| p.min_phase).sum::<f64>() / peaks.len() as f64;
    Ok(SensitivityReport {
        peaks,
        average_phase,
        threshold: PEAK_THRESHOLD,
    })
}

fn smallest_distinguishable(g: &dyn Fn(f64) -> f64, sigma: f64) -> f64 {
    let g0 = g(0.0);
    let one_side = |sign: f64| -> f64 {
        let reached = |d: f64| (g(sign * d) - g0).abs() >= sigma;
        let mut prev = 0.0;
        let mut d = SEARCH_STEP;
        while d <= PI {
            if reached(d) {
                let (mut a, mut b) = (prev, d);
                for _ in 0..60 {
                    let mid = 0.5 * (a + b);
                    if reached(mid) {
                        b = mid
                    } else {
                        a = mid
                    }
                }
                return b;
            }
            prev = d;
            d += SEARCH_STEP;
        }
        PI
    };
    one_side(1.0).min(one_side(-1.0))
}

fn golden_max(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let r = (5.0_f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    for _ in 0..80 {
        if f(c) > f(d) {
            b = d;
        } else {
            a = c;
        }
        c = b - r * (b - a);
        d = a + r * (b - a);
    }
    0.5 * (a + b)
}

fn interpolate(x: &[f64], y: &[f64], at: f64) -> f64 {
    match x.partition_point(|v| *v <= at) {
        0 => y[0],
        i if i >= x.len() => y[y.len() - 1],
        i => {
            let t = (at - x[i - 1]) / (x[i] - x[i - 1]);
            y[i - 1] + t * (y[i] - y[i - 1])
        }
    }
}
