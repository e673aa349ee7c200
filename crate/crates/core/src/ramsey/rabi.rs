use crate::error::{Error, Result};
use crate::spin2::PopulationVector;

/// Populations after a single pulse of rotation angle beta = omega t acting on |+2>.
///
/// `omega` in rad/s and `t_s` in seconds (any reciprocal pair of units works).
pub fn rabi_populations(omega: f64, t_s: f64) -> Result<PopulationVector> {
    if !(t_s.is_finite() && t_s >= 0.0) {
        return Err(Error::invalid(format!(
            "pulse width must be non-negative, got {t_s}"
        )));
    }
    if !omega.is_finite() {
        return Err(Error::invalid("non-finite rotation rate"));
    }
    let beta = omega * t_s;
    let (c, s) = (beta.cos(), beta.sin());
    let (s2, up, down) = (s * s, 1.0 + c, 1.0 - c);
    Ok(PopulationVector::from_array_unchecked([
        up.powi(4) / 16.0,
        up * up * s2 / 4.0,
        3.0 / 8.0 * s2 * s2,
        down * down * s2 / 4.0,
        down.powi(4) / 16.0,
    ]))
}
