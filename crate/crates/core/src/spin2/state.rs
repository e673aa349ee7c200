use std::fmt;
use std::ops::Mul;
use std::str::FromStr;

use nalgebra::{SMatrix, SVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dimension of the spin-2 manifold.
pub const DIM: usize = 5;

pub type Matrix5c = SMatrix<Complex64, DIM, DIM>;
pub type Vector5c = SVector<Complex64, DIM>;

/// One of the five Zeeman sublevels. Index 0 is m_F = +2, index 4 is m_F = -2.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sublevel {
    #[serde(rename = "+2")]
    Plus2,
    #[serde(rename = "+1")]
    Plus1,
    #[serde(rename = "0")]
    Zero,
    #[serde(rename = "-1")]
    Minus1,
    #[serde(rename = "-2")]
    Minus2,
}

impl Sublevel {
    pub const ALL: [Sublevel; DIM] = [
        Sublevel::Plus2,
        Sublevel::Plus1,
        Sublevel::Zero,
        Sublevel::Minus1,
        Sublevel::Minus2,
    ];

    pub fn index(self) -> usize {
        (2 - self.m()) as usize
    }

    pub fn m(self) -> i32 {
        match self {
            Sublevel::Plus2 => 2,
            Sublevel::Plus1 => 1,
            Sublevel::Zero => 0,
            Sublevel::Minus1 => -1,
            Sublevel::Minus2 => -2,
        }
    }

    pub fn from_m(m: i32) -> Result<Self> {
        match m {
            2 => Ok(Sublevel::Plus2),
            1 => Ok(Sublevel::Plus1),
            0 => Ok(Sublevel::Zero),
            -1 => Ok(Sublevel::Minus1),
            -2 => Ok(Sublevel::Minus2),
            _ => Err(Error::invalid(format!("m_F = {m} is outside -2..=2"))),
        }
    }

    pub fn from_index(i: usize) -> Result<Self> {
        Sublevel::ALL
            .get(i)
            .copied()
            .ok_or_else(|| Error::invalid(format!("sublevel index {i} out of range")))
    }
}

impl fmt::Display for Sublevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.m() {
            0 => write!(f, "0"),
            m => write!(f, "{m:+}"),
        }
    }
}

impl FromStr for Sublevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let m: i32 = s.trim().parse().map_err(|_| {
            Error::invalid(format!(
                "unknown sublevel label {s:?} (expected +2, +1, 0, -1 or -2)"
            ))
        })?;
        Sublevel::from_m(m)
    }
}

/// Pure state on the five sublevels, ordered m_F = +2 .. -2.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpinState(Vector5c);

impl SpinState {
    /// Builds a state from raw amplitudes, normalizing them.
    pub fn new(amplitudes: [Complex64; DIM]) -> Result<Self> {
        if amplitudes
            .iter()
            .any(|a| !a.re.is_finite() || !a.im.is_finite())
        {
            return Err(Error::invalid("non-finite amplitude"));
        }
        let v = Vector5c::from(amplitudes);
        let norm = v.norm();
        if norm < 1e-300 {
            return Err(Error::invalid("zero state vector"));
        }
        Ok(SpinState(v.unscale(norm)))
    }

    pub fn basis(level: Sublevel) -> Self {
        let mut v = Vector5c::zeros();
        v[level.index()] = Complex64::new(1.0, 0.0);
        SpinState(v)
    }

    /// The |m_F = +2> input state.
    pub fn stretched() -> Self {
        Self::basis(Sublevel::Plus2)
    }

    pub(crate) fn from_vector_unchecked(v: Vector5c) -> Self {
        SpinState(v)
    }

    pub fn vector(&self) -> &Vector5c {
        &self.0
    }

    pub fn amplitudes(&self) -> [Complex64; DIM] {
        self.0.into()
    }

    pub fn amplitude(&self, level: Sublevel) -> Complex64 {
        self.0[level.index()]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.norm_squared()
    }

    pub fn populations(&self) -> PopulationVector {
        PopulationVector(std::array::from_fn(|i| self.0[i].norm_sqr()))
    }
}

/// Probabilities per sublevel, same ordering as [`SpinState`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PopulationVector([f64; DIM]);

impl PopulationVector {
    pub const SUM_TOLERANCE: f64 = 1e-10;

    /// Validates entries in [0, 1] and a unit sum within [`Self::SUM_TOLERANCE`].
    pub fn new(p: [f64; DIM]) -> Result<Self> {
        if p.iter()
            .any(|x| !x.is_finite() || *x < -Self::SUM_TOLERANCE || *x > 1.0 + Self::SUM_TOLERANCE)
        {
            return Err(Error::invalid(format!(
                "population entries must lie in [0, 1]: {p:?}"
            )));
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > Self::SUM_TOLERANCE {
            return Err(Error::invalid(format!("populations sum to {sum}, not 1")));
        }
        Ok(PopulationVector(p))
    }

    pub(crate) fn from_array_unchecked(p: [f64; DIM]) -> Self {
        PopulationVector(p)
    }

    pub fn as_array(&self) -> &[f64; DIM] {
        &self.0
    }

    pub fn get(&self, level: Sublevel) -> f64 {
        self.0[level.index()]
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn max_abs_diff(&self, other: &PopulationVector) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl From<PopulationVector> for [f64; DIM] {
    fn from(p: PopulationVector) -> Self {
        p.0
    }
}

/// A 5x5 unitary acting on [`SpinState`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rotation(Matrix5c);

impl Rotation {
    pub fn identity() -> Self {
        Rotation(Matrix5c::identity())
    }

    pub(crate) fn from_matrix_unchecked(m: Matrix5c) -> Self {
        Rotation(m)
    }

    pub fn matrix(&self) -> &Matrix5c {
        &self.0
    }

    /// Matrix element <m'|U|m>.
    pub fn entry(&self, row: Sublevel, col: Sublevel) -> Complex64 {
        self.0[(row.index(), col.index())]
    }

    pub fn adjoint(&self) -> Self {
        Rotation(self.0.adjoint())
    }

    pub fn apply(&self, s: &SpinState) -> SpinState {
        SpinState(self.0 * s.0)
    }

    /// max |(U U† - I)_ij|
    pub fn unitarity_error(&self) -> f64 {
        let d = self.0 * self.0.adjoint() - Matrix5c::identity();
        d.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Rotation) -> f64 {
        (self.0 - other.0)
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }
}

impl Mul for Rotation {
    type Output = Rotation;

    fn mul(self, rhs: Rotation) -> Rotation {
        Rotation(self.0 * rhs.0)
    }
}

impl Mul<&Rotation> for &Rotation {
    type Output = Rotation;

    fn mul(self, rhs: &Rotation) -> Rotation {
        Rotation(self.0 * rhs.0)
    }
}

pub fn apply(u: &Rotation, s: &SpinState) -> SpinState {
    u.apply(s)
}

/// Born rule: elementwise squared magnitudes.
pub fn populations(s: &SpinState) -> PopulationVector {
    s.populations()
}
