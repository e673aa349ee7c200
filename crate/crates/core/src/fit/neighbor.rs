use crate::error::{Error, Result};
use crate::ramsey::{FringeScan, ScanRow};
use crate::spin2::DIM;

/// Moving mean over `window` neighbouring frequencies (truncated at the edges).
///
/// The stddev columns of the output hold the population standard deviation
/// over the same window.
pub fn neighbor_average(scan: &FringeScan, window: usize) -> Result<FringeScan> {
    if window == 0 || window.is_multiple_of(2) {
        return Err(Error::invalid(format!(
            "window must be odd and positive, got {window}"
        )));
    }
    if window > scan.len() {
        return Err(Error::invalid(format!(
            "window {window} exceeds scan length {}",
            scan.len()
        )));
    }
    let half = window / 2;
    let rows = scan.rows();
    let averaged = (0..rows.len())
        .map(|i| {
            let neighbours = &rows[i.saturating_sub(half)..(i + half + 1).min(rows.len())];
            let n = neighbours.len() as f64;
            let mut mean = [0.0; DIM];
            for r in neighbours {
                for (m, p) in mean.iter_mut().zip(r.populations) {
                    *m += p / n;
                }
            }
            let mut stddev = [0.0; DIM];
            for r in neighbours {
                for ((s, p), m) in stddev.iter_mut().zip(r.populations).zip(mean) {
                    *s += (p - m).powi(2) / n;
                }
            }
            ScanRow {
                f_khz: rows[i].f_khz,
                populations: mean,
                stddev: Some(stddev.map(f64::sqrt)),
            }
        })
        .collect();
    FringeScan::new(averaged, scan.meta)
}
