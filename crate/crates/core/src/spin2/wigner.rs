use num_complex::Complex64;

use super::state::{Matrix5c, Rotation, Sublevel, DIM};
use super::SPIN;
use crate::error::{Error, Result};

fn factorial(n: i32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// Reduced matrix element d_{m',m}(beta) = <m'| exp(-i beta F_y) |m>.
///
/// Wigner's sum over k; sign convention fixed by the spectral oracle.
pub fn small_d_entry(row: Sublevel, col: Sublevel, beta: f64) -> f64 {
    let j = SPIN;
    let (mp, m) = (row.m(), col.m());
    let (c, s) = ((beta / 2.0).cos(), (beta / 2.0).sin());
    let prefactor =
        (factorial(j + mp) * factorial(j - mp) * factorial(j + m) * factorial(j - m)).sqrt();
    let k_min = 0.max(m - mp);
    let k_max = (j + m).min(j - mp);
    let mut sum = 0.0;
    for k in k_min..=k_max {
        let sign = if (k + mp - m).rem_euclid(2) == 0 {
            1.0
        } else {
            -1.0
        };
        let denom =
            factorial(j + m - k) * factorial(k) * factorial(mp - m + k) * factorial(j - mp - k);
        sum += sign * c.powi(2 * j + m - mp - 2 * k) * s.powi(mp - m + 2 * k) / denom;
    }
    prefactor * sum
}

/// Closed-form reduced rotation matrix d(beta) = exp(-i beta F_y).
pub fn wigner_small_d(beta: f64) -> Result<Rotation> {
    if !beta.is_finite() {
        return Err(Error::invalid("non-finite rotation angle"));
    }
    let mut m = Matrix5c::zeros();
    for (r, row) in Sublevel::ALL.iter().enumerate() {
        for (c, col) in Sublevel::ALL.iter().enumerate() {
            m[(r, c)] = Complex64::new(small_d_entry(*row, *col, beta), 0.0);
        }
    }
    Ok(Rotation::from_matrix_unchecked(m))
}

/// Euler rotation D(alpha, beta, gamma) = exp(-i alpha F_z) exp(-i beta F_y) exp(-i gamma F_z).
pub fn wigner_big_d(alpha: f64, beta: f64, gamma: f64) -> Result<Rotation> {
    if !(alpha.is_finite() && gamma.is_finite()) {
        return Err(Error::invalid("non-finite Euler angle"));
    }
    let d = wigner_small_d(beta)?;
    let mut m = *d.matrix();
    for r in 0..DIM {
        let mp = f64::from(SPIN - r as i32);
        for c in 0..DIM {
            let mc = f64::from(SPIN - c as i32);
            m[(r, c)] *= Complex64::from_polar(1.0, -(mp * alpha + mc * gamma));
        }
    }
    Ok(Rotation::from_matrix_unchecked(m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin2::{make_generators, matrix_exp_oracle, SpinState};
    use std::f64::consts::{FRAC_PI_2, PI};

    #[test]
    fn zero_angle_is_identity() {
        assert!(
            wigner_small_d(0.0)
                .unwrap()
                .max_abs_diff(&Rotation::identity())
                < 1e-15
        );
        assert!(
            wigner_big_d(0.0, 0.0, 0.0)
                .unwrap()
                .max_abs_diff(&Rotation::identity())
                < 1e-15
        );
    }

    #[test]
    fn quarter_turn_first_column() {
        let d = wigner_small_d(FRAC_PI_2).unwrap();
        let want = [1.0 / 16.0, 0.25, 0.375, 0.25, 1.0 / 16.0];
        for (level, w) in Sublevel::ALL.iter().zip(want) {
            assert!((d.entry(*level, Sublevel::Plus2).norm_sqr() - w).abs() < 1e-15);
        }
    }

    #[test]
    fn half_turn_transfers_stretched_state() {
        let d = wigner_small_d(PI).unwrap();
        assert!((d.entry(Sublevel::Minus2, Sublevel::Plus2).norm_sqr() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn matches_oracle_at_fixed_angle() {
        let g = make_generators();
        let beta = 1.234;
        let closed = wigner_small_d(beta).unwrap();
        let oracle = matrix_exp_oracle(&g.fy, beta).unwrap();
        assert!(closed.max_abs_diff(&oracle) < 1e-12);
    }

    #[test]
    fn euler_composition_matches_oracle_product() {
        let g = make_generators();
        let (a, b, c) = (0.3, -1.1, 2.4);
        let want = matrix_exp_oracle(&g.fz, a).unwrap()
            * matrix_exp_oracle(&g.fy, b).unwrap()
            * matrix_exp_oracle(&g.fz, c).unwrap();
        assert!(wigner_big_d(a, b, c).unwrap().max_abs_diff(&want) < 1e-12);
    }

    #[test]
    fn precession_is_diagonal_phase() {
        let phi = 0.9;
        let d = wigner_big_d(phi, 0.0, 0.0).unwrap();
        for level in Sublevel::ALL {
            let want = Complex64::from_polar(1.0, -f64::from(level.m()) * phi);
            assert!((d.entry(level, level) - want).norm() < 1e-15);
        }
    }

    #[test]
    fn non_finite_angles_rejected() {
        assert!(wigner_small_d(f64::NAN).is_err());
        assert!(wigner_big_d(f64::INFINITY, 0.0, 0.0).is_err());
        assert!(wigner_big_d(0.0, 0.0, f64::NAN).is_err());
    }

    #[test]
    fn quarter_turn_on_stretched_state() {
        let s = wigner_small_d(FRAC_PI_2)
            .unwrap()
            .apply(&SpinState::stretched());
        let p = s.populations();
        for (got, want) in p
            .as_array()
            .iter()
            .zip([1.0 / 16.0, 0.25, 0.375, 0.25, 1.0 / 16.0])
        {
            assert!((got - want).abs() < 1e-15);
        }
    }
}
