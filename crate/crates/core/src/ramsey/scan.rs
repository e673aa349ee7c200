use std::f64::consts::{FRAC_PI_2, PI};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::fringe::{FringeParams, PhaseConvention};
use super::sequence::{sequence_evolve, SequenceSpec};
use crate::error::{Error, Result};
use crate::spin2::{wigner_big_d, wigner_small_d, SpinState, Sublevel, DIM};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScanSource {
    #[default]
    Simulated,
    Measured,
}

impl ScanSource {
    /// Allowed deviation of each row's population sum from 1.
    pub fn sum_tolerance(self) -> f64 {
        match self {
            ScanSource::Simulated => 1e-10,
            ScanSource::Measured => 2e-2,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ScanMetadata {
    pub t_us: Option<f64>,
    pub delta_khz: Option<f64>,
    pub f0_khz: Option<f64>,
    pub source: ScanSource,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub f_khz: f64,
    pub populations: [f64; DIM],
    pub stddev: Option<[f64; DIM]>,
}

/// Frequency-indexed populations of the five ports.
#[derive(Clone, Debug, PartialEq)]
pub struct FringeScan {
    rows: Vec<ScanRow>,
    pub meta: ScanMetadata,
}

impl FringeScan {
    pub fn new(rows: Vec<ScanRow>, meta: ScanMetadata) -> Result<Self> {
        check_increasing(rows.iter().map(|r| r.f_khz))?;
        let has_stddev = rows.first().is_some_and(|r| r.stddev.is_some());
        let tol = meta.source.sum_tolerance();
        for (i, row) in rows.iter().enumerate() {
            if row.stddev.is_some() != has_stddev {
                return Err(Error::invalid(format!(
                    "row {i}: stddev columns must be present on all rows or none"
                )));
            }
            if row.populations.iter().any(|p| !p.is_finite()) {
                return Err(Error::invalid(format!("row {i}: non-finite population")));
            }
            let sum: f64 = row.populations.iter().sum();
            if (sum - 1.0).abs() > tol {
                return Err(Error::invalid(format!("row {i}: populations sum to {sum}")));
            }
            if let Some(s) = row.stddev {
                if s.iter().any(|x| !x.is_finite() || *x < 0.0) {
                    return Err(Error::invalid(format!(
                        "row {i}: stddev must be finite and non-negative"
                    )));
                }
            }
        }
        Ok(FringeScan { rows, meta })
    }

    pub fn rows(&self) -> &[ScanRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn has_stddev(&self) -> bool {
        self.rows.first().is_some_and(|r| r.stddev.is_some())
    }

    pub fn frequencies(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.f_khz).collect()
    }

    pub fn component(&self, level: Sublevel) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| r.populations[level.index()])
            .collect()
    }

    pub fn component_stddev(&self, level: Sublevel) -> Option<Vec<f64>> {
        self.rows
            .iter()
            .map(|r| r.stddev.map(|s| s[level.index()]))
            .collect()
    }

    /// Median spacing of the frequency grid.
    pub fn grid_step(&self) -> Option<f64> {
        let mut steps: Vec<f64> = self
            .rows
            .windows(2)
            .map(|w| w[1].f_khz - w[0].f_khz)
            .collect();
        if steps.is_empty() {
            return None;
        }
        steps.sort_by(f64::total_cmp);
        Some(steps[steps.len() / 2])
    }

    /// Replaces the stddev columns.
    pub fn with_stddev(mut self, stddev: Option<[f64; DIM]>) -> Self {
        for row in &mut self.rows {
            row.stddev = stddev;
        }
        self
    }

    /// Adds Gaussian noise of width `sigma` to every population, clips at zero and
    /// renormalizes each row. The result is marked as measured data.
    pub fn with_population_noise(&self, sigma: f64, seed: u64) -> Result<FringeScan> {
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(Error::invalid(format!(
                "noise width must be non-negative, got {sigma}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows = self
            .rows
            .iter()
            .map(|row| {
                let mut p = row.populations;
                for x in &mut p {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    *x = (*x + sigma * z).max(0.0);
                }
                let sum: f64 = p.iter().sum();
                if sum > 0.0 {
                    p.iter_mut().for_each(|x| *x /= sum);
                } else {
                    p = row.populations;
                }
                ScanRow {
                    f_khz: row.f_khz,
                    populations: p,
                    stddev: None,
                }
            })
            .collect();
        Ok(FringeScan {
            rows,
            meta: ScanMetadata {
                source: ScanSource::Measured,
                ..self.meta
            },
        })
    }
}

pub(crate) fn check_increasing(values: impl Iterator<Item = f64>) -> Result<()> {
    let mut prev: Option<f64> = None;
    for (i, v) in values.enumerate() {
        if !v.is_finite() {
            return Err(Error::invalid(format!("grid point {i} is not finite")));
        }
        if let Some(p) = prev {
            if v <= p {
                return Err(Error::invalid(format!(
                    "grid must be strictly increasing (point {i}: {v} after {p})"
                )));
            }
        }
        prev = Some(v);
    }
    Ok(())
}

/// Simulates a Ramsey fringe scan over `f_grid` (kHz) for an arbitrary input state.
pub fn fringe_scan(
    f_grid: &[f64],
    params: &FringeParams,
    initial: &SpinState,
    convention: PhaseConvention,
) -> Result<FringeScan> {
    params.validate()?;
    check_increasing(f_grid.iter().copied())?;
    let rows = f_grid
        .iter()
        .map(|&f| {
            let seq = SequenceSpec::ramsey(params, f, *initial).with_convention(convention);
            let p = sequence_evolve(&seq)?.populations();
            Ok(ScanRow {
                f_khz: f,
                populations: (*p.as_array()),
                stddev: None,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FringeScan {
        rows,
        meta: ScanMetadata {
            t_us: Some(params.t_us),
            delta_khz: Some(params.delta_khz),
            f0_khz: Some(params.f0_khz),
            source: ScanSource::Simulated,
        },
    })
}

/// Populations on a uniform grid of the precession phase over [0, 2 pi).
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseScan {
    pub phases: Vec<f64>,
    pub populations: Vec<[f64; DIM]>,
}

impl PhaseScan {
    pub fn component(&self, level: Sublevel) -> Vec<f64> {
        self.populations.iter().map(|p| p[level.index()]).collect()
    }
}

/// Two pulses of angle (pi/2) eta around a precession of phase Phi, for `n_points` uniform Phi.
pub fn phase_scan(n_points: usize, eta: f64, initial: &SpinState) -> Result<PhaseScan> {
    if n_points == 0 {
        return Err(Error::invalid("phase grid needs at least one point"));
    }
    let pulse = wigner_small_d(FRAC_PI_2 * eta)?;
    let mut phases = Vec::with_capacity(n_points);
    let mut populations = Vec::with_capacity(n_points);
    for k in 0..n_points {
        let phase = 2.0 * PI * k as f64 / n_points as f64;
        let u = pulse * wigner_big_d(phase, 0.0, 0.0)? * pulse;
        phases.push(phase);
        populations.push(*u.apply(initial).populations().as_array());
    }
    Ok(PhaseScan {
        phases,
        populations,
    })
}
