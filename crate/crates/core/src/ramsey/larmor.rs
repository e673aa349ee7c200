use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bohr magneton, J/T.
pub const BOHR_MAGNETON: f64 = 9.274_010_078_3e-24;
/// Planck constant, J s.
pub const PLANCK: f64 = 6.626_070_15e-34;

const TESLA_PER_GAUSS: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LarmorParams {
    pub g_f: f64,
    pub field_gauss: f64,
}

/// f0 = g_F mu_B B / h, in kHz.
pub fn larmor_frequency(params: LarmorParams) -> Result<f64> {
    if !params.field_gauss.is_finite() || params.field_gauss < 0.0 {
        return Err(Error::invalid(format!(
            "field must be finite and non-negative, got {} G",
            params.field_gauss
        )));
    }
    if !params.g_f.is_finite() {
        return Err(Error::invalid("non-finite g-factor"));
    }
    let hz = params.g_f * BOHR_MAGNETON * params.field_gauss * TESLA_PER_GAUSS / PLANCK;
    Ok(hz * 1e-3)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bias_field_of_300_mg() {
        let f0 = larmor_frequency(LarmorParams {
            g_f: 0.5,
            field_gauss: 0.3,
        })
        .unwrap();
        assert!((f0 - 210.0).abs() / 210.0 < 5e-3, "{f0}");
    }

    #[test]
    fn zero_field_and_linearity() {
        assert_eq!(
            larmor_frequency(LarmorParams {
                g_f: 0.5,
                field_gauss: 0.0
            })
            .unwrap(),
            0.0
        );
        let a = larmor_frequency(LarmorParams {
            g_f: 0.5,
            field_gauss: 0.3,
        })
        .unwrap();
        let b = larmor_frequency(LarmorParams {
            g_f: 0.5,
            field_gauss: 0.6,
        })
        .unwrap();
        assert!((b - 2.0 * a).abs() < 1e-12);
        assert!((b - 420.0).abs() / 420.0 < 5e-3);
    }

    #[test]
    fn negative_field_rejected() {
        assert!(larmor_frequency(LarmorParams {
            g_f: 0.5,
            field_gauss: -0.1
        })
        .is_err());
    }
}
