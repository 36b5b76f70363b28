use crate::error::{Error, Result};

use super::LogGrid;

pub(crate) const RATIO_RTOL: f64 = 1e-6;
const RATIO_ATOL: f64 = 1e-12;

/// Limit of `num_k / den_k` from the tail of the tables.
///
/// The tail of the ratio sequence is assumed to approach its limit
/// geometrically, so three Aitken extrapolations taken at staggered points
/// of the last tenth of the grid must agree.
pub fn ratio_limit(num: &[f64], den: &[f64], grid: &LogGrid) -> Result<f64> {
    let n = grid.n();
    if num.len() != n || den.len() != n {
        return Err(Error::invalid("ratio_limit", "tables do not match the grid"));
    }
    let tail = (n / 10).max(12);
    if n < tail + 2 {
        return Err(Error::invalid("ratio_limit", "grid too short for a tail estimate"));
    }
    let start = n - tail;
    let mut rho = Vec::with_capacity(tail);
    for k in start..n {
        let r = num[k] / den[k];
        if !r.is_finite() {
            return Err(Error::RatioLimit {
                estimates: [f64::NAN; 3],
            });
        }
        rho.push(r);
    }
    let m = (tail / 4).max(1);
    let last = rho.len() - 1;
    let est = |k: usize| -> f64 {
        let (r0, r1, r2) = (rho[k - 2 * m], rho[k - m], rho[k]);
        let d1 = r2 - r1;
        let d0 = r1 - r0;
        let den = d1 - d0;
        let scale = r2.abs().max(RATIO_ATOL);
        if d1.abs() <= 1e-15 * scale || den.abs() <= 1e-300 {
            return r2;
        }
        let q = d1 / d0;
        if !(q.abs() < 1.0) {
            // Not contracting: no acceleration.
            return r2;
        }
        r2 - d1 * d1 / den
    };
    let e = [est(last - m), est(last - m / 2), est(last)];
    let hi = e.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = e.iter().copied().fold(f64::INFINITY, f64::min);
    let c = e[2];
    if hi - lo <= RATIO_RTOL * c.abs() + RATIO_ATOL && c.is_finite() {
        Ok(c)
    } else {
        Err(Error::RatioLimit { estimates: e })
    }
}
