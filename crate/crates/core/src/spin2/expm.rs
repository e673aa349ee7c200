use nalgebra::SymmetricEigen;
use num_complex::Complex64;

use super::state::{Matrix5c, Rotation};
use crate::error::{Error, Result};

const HERMITIAN_TOLERANCE: f64 = 1e-10;

/// max |H - H†|
pub fn hermiticity_error(h: &Matrix5c) -> f64 {
    (h - h.adjoint())
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// exp(-i t H) for hermitian `h`, by spectral decomposition H = V Λ V†.
///
/// This is the reference every closed-form rotation is checked against.
pub fn matrix_exp_oracle(h: &Matrix5c, t: f64) -> Result<Rotation> {
    if !t.is_finite() {
        return Err(Error::invalid("non-finite evolution parameter"));
    }
    if h.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::invalid("non-finite matrix entry"));
    }
    let err = hermiticity_error(h);
    if err > HERMITIAN_TOLERANCE {
        return Err(Error::invalid(format!(
            "matrix is not hermitian (max |H - H†| = {err:e})"
        )));
    }
    // Symmetrize so the eigensolver sees an exactly hermitian input.
    let sym = (h + h.adjoint()).scale(0.5);
    let eig = SymmetricEigen::new(sym);
    let v = eig.eigenvectors;
    let phases = eig
        .eigenvalues
        .map(|lambda| Complex64::from_polar(1.0, -t * lambda));
    let u = v * Matrix5c::from_diagonal(&phases) * v.adjoint();
    Ok(Rotation::from_matrix_unchecked(u))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin2::make_generators;

    #[test]
    fn zero_time_is_identity() {
        let g = make_generators();
        let u = matrix_exp_oracle(&g.fy, 0.0).unwrap();
        assert!(u.max_abs_diff(&Rotation::identity()) < 1e-14);
    }

    #[test]
    fn diagonal_exponential_of_fz() {
        let g = make_generators();
        let phi = 0.731;
        let u = matrix_exp_oracle(&g.fz, phi).unwrap();
        for i in 0..5 {
            let m = 2.0 - i as f64;
            let want = Complex64::from_polar(1.0, -m * phi);
            assert!((u.matrix()[(i, i)] - want).norm() < 1e-12);
        }
        assert!(u.unitarity_error() < 1e-12);
    }

    #[test]
    fn rejects_non_hermitian_input() {
        let mut h = Matrix5c::zeros();
        h[(0, 1)] = Complex64::new(1.0, 0.0);
        assert!(matches!(
            matrix_exp_oracle(&h, 1.0),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matrix_exp_oracle(&Matrix5c::identity(), f64::INFINITY).is_err());
    }
}
