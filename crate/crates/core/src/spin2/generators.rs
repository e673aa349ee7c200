use num_complex::Complex64;

use super::state::{Matrix5c, DIM};
use super::SPIN;

/// Angular-momentum matrices F_x, F_y, F_z in units of hbar.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Generators {
    pub fx: Matrix5c,
    pub fy: Matrix5c,
    pub fz: Matrix5c,
}

/// Ladder-operator construction in the m = +2 .. -2 basis.
pub fn make_generators() -> Generators {
    let j = f64::from(SPIN);
    let mut raise = Matrix5c::zeros();
    let mut fz = Matrix5c::zeros();
    for col in 0..DIM {
        let m = f64::from(SPIN - col as i32);
        fz[(col, col)] = Complex64::new(m, 0.0);
        // F+ |m> = sqrt(j(j+1) - m(m+1)) |m+1>, and |m+1> sits one row up.
        if col > 0 {
            raise[(col - 1, col)] = Complex64::new((j * (j + 1.0) - m * (m + 1.0)).sqrt(), 0.0);
        }
    }
    let lower = raise.adjoint();
    let fx = (raise + lower).scale(0.5);
    let fy = (raise - lower) * Complex64::new(0.0, -0.5);
    Generators { fx, fy, fz }
}

pub fn commutator(a: &Matrix5c, b: &Matrix5c) -> Matrix5c {
    a * b - b * a
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::SymmetricEigen;

    fn max_abs(m: &Matrix5c) -> f64 {
        m.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn fz_is_zeeman_diagonal() {
        let g = make_generators();
        let expected =
            Matrix5c::from_diagonal(&nalgebra::SVector::<Complex64, 5>::from_fn(|i, _| {
                Complex64::new(2.0 - i as f64, 0.0)
            }));
        assert_eq!(g.fz, expected);
    }

    #[test]
    fn cyclic_commutators() {
        let g = make_generators();
        let i = Complex64::new(0.0, 1.0);
        assert!(max_abs(&(commutator(&g.fx, &g.fy) - g.fz * i)) < 1e-12);
        assert!(max_abs(&(commutator(&g.fy, &g.fz) - g.fx * i)) < 1e-12);
        assert!(max_abs(&(commutator(&g.fz, &g.fx) - g.fy * i)) < 1e-12);
    }

    #[test]
    fn hermitian_with_integer_spectrum() {
        let g = make_generators();
        for m in [g.fx, g.fy, g.fz] {
            assert!(max_abs(&(m - m.adjoint())) < 1e-15);
            let mut eig: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
            eig.sort_by(f64::total_cmp);
            for (got, want) in eig.iter().zip([-2.0, -1.0, 0.0, 1.0, 2.0]) {
                assert!((got - want).abs() < 1e-10, "{eig:?}");
            }
        }
    }

    #[test]
    fn casimir_is_j_j_plus_one() {
        let g = make_generators();
        let f2 = g.fx * g.fx + g.fy * g.fy + g.fz * g.fz;
        assert!(max_abs(&(f2 - Matrix5c::identity().scale(6.0))) < 1e-12);
    }
}
