use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::lm::{minimize, LmOptions, Problem};
use crate::error::{Error, Result};
use crate::ramsey::{FringeParams, FringeScan, PhaseConvention};
use crate::spin2::{Sublevel, DIM};

/// Envelope width assumed when it is not fitted, kHz.
pub const DEFAULT_DELTA_KHZ: f64 = 25.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitParameter {
    F0,
    T,
    Phi,
    Delta,
    AmplitudeScale,
}

impl FitParameter {
    pub const ALL: [FitParameter; 5] = [
        FitParameter::F0,
        FitParameter::T,
        FitParameter::Phi,
        FitParameter::Delta,
        FitParameter::AmplitudeScale,
    ];

    fn index(self) -> usize {
        self as usize
    }

    fn scale(self, guess: f64) -> f64 {
        match self {
            FitParameter::F0 | FitParameter::Delta | FitParameter::T => guess.abs().max(1.0),
            FitParameter::Phi | FitParameter::AmplitudeScale => 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamSetting {
    pub guess: f64,
    pub lower: f64,
    pub upper: f64,
    pub free: bool,
}

impl ParamSetting {
    pub fn free(guess: f64, lower: f64, upper: f64) -> Self {
        ParamSetting {
            guess,
            lower,
            upper,
            free: true,
        }
    }

    pub fn fixed(value: f64) -> Self {
        ParamSetting {
            guess: value,
            lower: value,
            upper: value,
            free: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitTarget {
    Component(Sublevel),
    /// All five ports jointly.
    All,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub f0: ParamSetting,
    pub t: ParamSetting,
    pub phi: ParamSetting,
    pub delta: ParamSetting,
    pub amplitude_scale: ParamSetting,
    pub max_iterations: usize,
    /// Relative cost change below which an accepted step ends the iteration.
    pub tolerance: f64,
    pub target: FitTarget,
    /// Weight residuals by 1/stddev (requires stddev columns).
    pub weighted: bool,
    /// Seed the optimizer from a coarse (f0, T, phi) grid around the guesses.
    pub multistart: bool,
    pub convention: PhaseConvention,
}

impl FitConfig {
    /// Free f0 (±10 kHz bounds), T (±50%) and phi; Delta fixed at 25 kHz.
    pub fn new(f0_guess_khz: f64, t_guess_us: f64) -> Self {
        FitConfig {
            f0: ParamSetting::free(f0_guess_khz, f0_guess_khz - 10.0, f0_guess_khz + 10.0),
            t: ParamSetting::free(t_guess_us, 0.5 * t_guess_us, 1.5 * t_guess_us),
            phi: ParamSetting::free(0.0, -4.0 * PI, 4.0 * PI),
            delta: ParamSetting::fixed(DEFAULT_DELTA_KHZ),
            amplitude_scale: ParamSetting::fixed(1.0),
            max_iterations: 200,
            tolerance: 1e-12,
            target: FitTarget::Component(Sublevel::Plus2),
            weighted: false,
            multistart: true,
            convention: PhaseConvention::Sum,
        }
    }

    pub fn setting(&self, p: FitParameter) -> &ParamSetting {
        match p {
            FitParameter::F0 => &self.f0,
            FitParameter::T => &self.t,
            FitParameter::Phi => &self.phi,
            FitParameter::Delta => &self.delta,
            FitParameter::AmplitudeScale => &self.amplitude_scale,
        }
    }

    pub fn free_parameters(&self) -> Vec<FitParameter> {
        FitParameter::ALL
            .into_iter()
            .filter(|p| self.setting(*p).free)
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.free_parameters().is_empty() {
            return Err(Error::invalid("fit needs at least one free parameter"));
        }
        for p in FitParameter::ALL {
            let s = self.setting(p);
            if !(s.guess.is_finite() && s.lower.is_finite() && s.upper.is_finite()) {
                return Err(Error::invalid(format!("{p:?}: non-finite guess or bound")));
            }
            if !(s.lower <= s.guess && s.guess <= s.upper) {
                return Err(Error::invalid(format!(
                    "{p:?}: guess {} outside [{}, {}]",
                    s.guess, s.lower, s.upper
                )));
            }
        }
        if self.delta.lower <= 0.0 {
            return Err(Error::invalid("envelope width must stay positive"));
        }
        if self.t.lower < 0.0 {
            return Err(Error::invalid("interrogation time must stay non-negative"));
        }
        if self.max_iterations == 0 || !self.tolerance.is_finite() || self.tolerance <= 0.0 {
            return Err(Error::invalid("need max_iterations > 0 and tolerance > 0"));
        }
        Ok(())
    }
}

/// One-sigma uncertainties; `None` for parameters held fixed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamUncertainties {
    pub f0_khz: Option<f64>,
    pub t_us: Option<f64>,
    pub phi: Option<f64>,
    pub delta_khz: Option<f64>,
    pub amplitude_scale: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: FringeParams,
    pub amplitude_scale: f64,
    pub uncertainties: ParamUncertainties,
    pub convention: PhaseConvention,
    pub target: FitTarget,
    /// Sum of squared (weighted, if enabled) residuals over the fitted data.
    pub sse: f64,
    /// model - data for each port, ordered m_F = +2 .. -2.
    pub residuals: [Vec<f64>; DIM],
    pub converged: bool,
    pub ill_conditioned: bool,
    pub iterations: usize,
    pub starts: usize,
    /// Cost after every accepted step of the winning start.
    pub sse_history: Vec<f64>,
}

impl FitResult {
    /// Fitted model value for one port.
    pub fn model(&self, f_khz: f64, level: Sublevel) -> f64 {
        self.amplitude_scale * self.params.component(f_khz, self.convention, level.index())
    }
}

struct Layout {
    free: Vec<FitParameter>,
    base: [f64; 5],
}

impl Layout {
    fn expand(&self, x: &[f64]) -> [f64; 5] {
        let mut all = self.base;
        for (p, v) in self.free.iter().zip(x) {
            all[p.index()] = *v;
        }
        all
    }
}

fn params_of(all: &[f64; 5]) -> (FringeParams, f64) {
    (
        FringeParams {
            f0_khz: all[0],
            t_us: all[1],
            phi: all[2],
            delta_khz: all[3],
        },
        all[4],
    )
}

fn wrap_phase(phi: f64) -> f64 {
    let w = (phi + PI).rem_euclid(2.0 * PI) - PI;
    if w <= -PI {
        w + 2.0 * PI
    } else {
        w
    }
}

/// Nonlinear least-squares fit of the closed-form fringe to `scan`.
pub fn fit_fringe(scan: &FringeScan, config: &FitConfig) -> Result<FitResult> {
    config.validate()?;
    let free = config.free_parameters();
    if scan.len() < 2 * free.len() {
        return Err(Error::invalid(format!(
            "scan has {} rows but {} free parameters need at least {}",
            scan.len(),
            free.len(),
            2 * free.len()
        )));
    }
    if config.weighted && !scan.has_stddev() {
        return Err(Error::invalid("weighted fit requires stddev columns"));
    }

    let components: Vec<usize> = match config.target {
        FitTarget::Component(level) => vec![level.index()],
        FitTarget::All => (0..DIM).collect(),
    };
    let freqs = scan.frequencies();
    let rows = scan.rows();
    let mut data = Vec::with_capacity(rows.len() * components.len());
    let mut weights = Vec::with_capacity(data.capacity());
    for &c in &components {
        for row in rows {
            data.push((row.f_khz, c, row.populations[c]));
            let w = match (config.weighted, row.stddev) {
                (true, Some(s)) => 1.0 / s[c].max(1e-6),
                _ => 1.0,
            };
            weights.push(w);
        }
    }

    let layout = Layout {
        base: FitParameter::ALL.map(|p| config.setting(p).guess),
        free: free.clone(),
    };
    let residuals = |x: &[f64]| -> Vec<f64> {
        let (params, scale) = params_of(&layout.expand(x));
        data.iter()
            .zip(&weights)
            .map(|(&(f, c, y), w)| w * (scale * params.component(f, config.convention, c) - y))
            .collect()
    };
    let lower: Vec<f64> = free.iter().map(|p| config.setting(*p).lower).collect();
    let upper: Vec<f64> = free.iter().map(|p| config.setting(*p).upper).collect();
    let scale: Vec<f64> = free
        .iter()
        .map(|p| p.scale(config.setting(*p).guess))
        .collect();
    let problem = Problem {
        residuals: &residuals,
        lower: &lower,
        upper: &upper,
        scale: &scale,
    };
    let opts = LmOptions {
        max_iterations: config.max_iterations,
        tolerance: config.tolerance,
    };

    let x0: Vec<f64> = free.iter().map(|p| config.setting(*p).guess).collect();
    let starts = if config.multistart {
        coarse_starts(&free, config, &x0, &freqs, &residuals)
    } else {
        vec![x0]
    };

    let mut best: Option<super::lm::LmOutcome> = None;
    for start in &starts {
        let out = minimize(&problem, start, opts);
        if best.as_ref().is_none_or(|b| out.sse < b.sse) {
            best = Some(out);
        }
    }
    let best = best.expect("at least one start");

    let all = layout.expand(&best.x);
    let (mut params, amplitude_scale) = params_of(&all);
    params.phi = wrap_phase(params.phi);

    let n_data = data.len();
    let dof = n_data.saturating_sub(free.len()).max(1) as f64;
    let variance = best.sse / dof;
    let mut ill_conditioned = is_flat(scan, &components);
    let mut uncertainties = ParamUncertainties::default();
    match best.jtj.clone().try_inverse() {
        Some(cov) if cov.iter().all(|v| v.is_finite()) => {
            let diag_max = best
                .jtj
                .diagonal()
                .iter()
                .fold(0.0_f64, |a, b| a.max(b.abs()));
            let eig_min = best
                .jtj
                .clone()
                .symmetric_eigen()
                .eigenvalues
                .iter()
                .fold(f64::INFINITY, |a, b| a.min(*b));
            if eig_min.is_nan() || eig_min <= 1e-13 * diag_max {
                ill_conditioned = true;
            }
            for (k, p) in free.iter().enumerate() {
                let sigma = Some((cov[(k, k)].max(0.0) * variance).sqrt());
                match p {
                    FitParameter::F0 => uncertainties.f0_khz = sigma,
                    FitParameter::T => uncertainties.t_us = sigma,
                    FitParameter::Phi => uncertainties.phi = sigma,
                    FitParameter::Delta => uncertainties.delta_khz = sigma,
                    FitParameter::AmplitudeScale => uncertainties.amplitude_scale = sigma,
                }
            }
        }
        _ => ill_conditioned = true,
    }

    let residual_vectors: [Vec<f64>; DIM] = std::array::from_fn(|c| {
        rows.iter()
            .map(|row| {
                amplitude_scale * params.component(row.f_khz, config.convention, c)
                    - row.populations[c]
            })
            .collect()
    });

    Ok(FitResult {
        params,
        amplitude_scale,
        uncertainties,
        convention: config.convention,
        target: config.target,
        sse: best.sse,
        residuals: residual_vectors,
        converged: best.converged,
        ill_conditioned,
        iterations: best.iterations,
        starts: starts.len(),
        sse_history: best.history,
    })
}

fn is_flat(scan: &FringeScan, components: &[usize]) -> bool {
    components.iter().all(|&c| {
        let values: Vec<f64> = scan.rows().iter().map(|r| r.populations[c]).collect();
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (values.len() as f64) < 1e-12
    })
}

const STARTS_KEPT: usize = 6;

/// Cheap cost evaluations over a (f0, T, phi) grid; keeps the best few as LM starts.
fn coarse_starts(
    free: &[FitParameter],
    config: &FitConfig,
    x0: &[f64],
    freqs: &[f64],
    residuals: &dyn Fn(&[f64]) -> Vec<f64>,
) -> Vec<Vec<f64>> {
    let span = freqs.last().unwrap_or(&0.0) - freqs.first().unwrap_or(&0.0);
    let axis = |p: FitParameter| -> Vec<f64> {
        let s = config.setting(p);
        if !s.free {
            return vec![s.guess];
        }
        let (lo, hi, n) = match p {
            FitParameter::F0 => (s.guess - 5.0, s.guess + 5.0, 5),
            FitParameter::T => {
                // Keep the phase drift across the scan between neighbouring T values below pi/2.
                let (lo, hi) = (0.85 * s.guess, 1.15 * s.guess);
                let step = if span > 0.0 { 250.0 / span } else { hi - lo };
                (lo, hi, ((hi - lo) / step).ceil() as usize + 1)
            }
            FitParameter::Phi => (-PI, PI - 2.0 * PI / 12.0, 12),
            _ => return vec![s.guess],
        };
        let n = n.max(2);
        (0..n)
            .map(|i| (lo + (hi - lo) * i as f64 / (n - 1) as f64).clamp(s.lower, s.upper))
            .collect()
    };
    let (f0s, ts, phis) = (
        axis(FitParameter::F0),
        axis(FitParameter::T),
        axis(FitParameter::Phi),
    );

    let mut candidates: Vec<(f64, Vec<f64>)> =
        Vec::with_capacity(f0s.len() * ts.len() * phis.len() + 1);
    let cost = |x: &[f64]| residuals(x).iter().map(|r| r * r).sum::<f64>();
    candidates.push((cost(x0), x0.to_vec()));
    for &f0 in &f0s {
        for &t in &ts {
            for &phi in &phis {
                let x: Vec<f64> = free
                    .iter()
                    .zip(x0)
                    .map(|(p, g)| match p {
                        FitParameter::F0 => f0,
                        FitParameter::T => t,
                        FitParameter::Phi => phi,
                        _ => *g,
                    })
                    .collect();
                candidates.push((cost(&x), x));
            }
        }
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0));
    candidates.truncate(STARTS_KEPT);
    candidates.into_iter().map(|(_, x)| x).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ramsey::{fringe_scan, ScanMetadata, ScanRow};
    use crate::spin2::SpinState;

    fn grid(start: f64, stop: f64, step: f64) -> Vec<f64> {
        let n = ((stop - start) / step).round() as usize;
        (0..=n).map(|i| start + i as f64 * step).collect()
    }

    fn synthetic(params: &FringeParams) -> FringeScan {
        fringe_scan(
            &grid(175.0, 215.0, 0.25),
            params,
            &SpinState::stretched(),
            PhaseConvention::Sum,
        )
        .unwrap()
    }

    #[test]
    fn noiseless_round_trip() {
        let truth = FringeParams {
            f0_khz: 195.0,
            t_us: 290.0,
            delta_khz: 25.0,
            phi: 0.14,
        };
        let scan = synthetic(&truth);
        let config = FitConfig::new(198.0, 265.0);
        let fit = fit_fringe(&scan, &config).unwrap();
        assert!(fit.converged);
        assert!(!fit.ill_conditioned);
        assert!((fit.params.f0_khz - 195.0).abs() < 1e-5, "{:?}", fit.params);
        assert!((fit.params.t_us - 290.0).abs() < 1e-5);
        assert!((fit.params.phi - 0.14).abs() < 1e-5);
        assert!(fit.sse < 1e-16);
        assert!(fit.sse_history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn joint_fit_with_free_width() {
        let truth = FringeParams {
            f0_khz: 207.0,
            t_us: 143.0,
            delta_khz: 22.0,
            phi: -0.97,
        };
        let scan = synthetic(&truth);
        let mut config = FitConfig::new(205.0, 150.0);
        config.delta = ParamSetting::free(25.0, 10.0, 40.0);
        config.target = FitTarget::All;
        let fit = fit_fringe(&scan, &config).unwrap();
        assert!(
            (fit.params.delta_khz - 22.0).abs() < 1e-4,
            "{:?}",
            fit.params
        );
        assert!((fit.params.t_us - 143.0).abs() < 1e-4);
        assert!(fit.uncertainties.delta_khz.is_some());
        assert!(fit.uncertainties.amplitude_scale.is_none());
    }

    #[test]
    fn constant_scan_is_ill_conditioned() {
        let rows = grid(175.0, 210.0, 1.0)
            .into_iter()
            .map(|f| ScanRow {
                f_khz: f,
                populations: [1.0, 0.0, 0.0, 0.0, 0.0],
                stddev: None,
            })
            .collect();
        let scan = FringeScan::new(rows, ScanMetadata::default()).unwrap();
        let fit = fit_fringe(&scan, &FitConfig::new(195.0, 290.0)).unwrap();
        assert!(fit.ill_conditioned);
    }

    #[test]
    fn underdetermined_scan_rejected() {
        let truth = FringeParams {
            f0_khz: 195.0,
            t_us: 290.0,
            delta_khz: 25.0,
            phi: 0.14,
        };
        let scan = fringe_scan(
            &[190.0, 191.0, 192.0],
            &truth,
            &SpinState::stretched(),
            PhaseConvention::Sum,
        )
        .unwrap();
        let mut config = FitConfig::new(195.0, 290.0);
        config.delta = ParamSetting::free(25.0, 10.0, 40.0);
        assert!(matches!(
            fit_fringe(&scan, &config),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn config_validation() {
        let mut c = FitConfig::new(195.0, 290.0);
        c.f0.guess = 300.0;
        assert!(c.validate().is_err());
        let mut c = FitConfig::new(195.0, 290.0);
        for p in [&mut c.f0, &mut c.t, &mut c.phi] {
            p.free = false;
        }
        assert!(c.validate().is_err());
    }

    #[test]
    fn weighted_fit_needs_stddev() {
        let truth = FringeParams {
            f0_khz: 195.0,
            t_us: 290.0,
            delta_khz: 25.0,
            phi: 0.14,
        };
        let mut config = FitConfig::new(195.0, 290.0);
        config.weighted = true;
        assert!(fit_fringe(&synthetic(&truth), &config).is_err());
        let scan = synthetic(&truth).with_stddev(Some([0.05; 5]));
        assert!(fit_fringe(&scan, &config).unwrap().converged);
    }

    #[test]
    fn phase_wrapping() {
        assert!((wrap_phase(0.14 + 4.0 * PI) - 0.14).abs() < 1e-12);
        assert!((wrap_phase(-PI) - PI).abs() < 1e-12);
        assert!((wrap_phase(3.0 * PI) - PI).abs() < 1e-12);
    }
}
