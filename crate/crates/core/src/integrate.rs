//! Adaptive Simpson quadrature used for opaque kernel densities.

use crate::{Error, Result};

pub const DEFAULT_TOLERANCE: f64 = 1e-10;
pub const DEFAULT_MAX_DEPTH: u32 = 50;

/// Panels the interval is cut into before adaptation starts, so narrow peaks
/// are not skipped by the first five-point estimate.
const INITIAL_PANELS: usize = 64;

pub fn adaptive_simpson<F>(f: F, a: f64, b: f64, tol: f64, max_depth: u32) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::NonFinite("quadrature interval".into()));
    }
    if b <= a {
        return Ok(0.0);
    }
    let width = (b - a) / INITIAL_PANELS as f64;
    let panel_tol = tol / INITIAL_PANELS as f64;
    let mut total = 0.0;
    for p in 0..INITIAL_PANELS {
        let lo = a + width * p as f64;
        let hi = if p + 1 == INITIAL_PANELS { b } else { lo + width };
        let flo = f(lo);
        let fhi = f(hi);
        let mid = 0.5 * (lo + hi);
        let fmid = f(mid);
        let whole = (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi);
        total += refine(&f, lo, hi, flo, fmid, fhi, whole, panel_tol, max_depth)?;
    }
    Ok(total)
}

#[allow(clippy::too_many_arguments)]
fn refine<F>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if !delta.is_finite() {
        return Err(Error::Quadrature("integrand is not finite".into()));
    }
    if delta.abs() <= 15.0 * tol {
        return Ok(left + right + delta / 15.0);
    }
    if depth == 0 {
        return Err(Error::Quadrature(format!(
            "subdivision depth exhausted on [{a}, {b}] with residual {:.3e}",
            delta.abs()
        )));
    }
    Ok(refine(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?
        + refine(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let v = adaptive_simpson(|x| x * x * x - x, 0.0, 2.0, 1e-12, 20).unwrap();
        assert!((v - 2.0).abs() < 1e-13);
    }

    #[test]
    fn gaussian_peak() {
        let v = adaptive_simpson(|x| crate::gaussian::pdf(x, 0.3, 0.01), -5.0, 5.0, 1e-10, 50).unwrap();
        assert!((v - 1.0).abs() < 1e-9);
    }

    #[test]
    fn depth_cap_is_reported() {
        let r = adaptive_simpson(|x| (1.0 / (x - 0.5001)).sin(), 0.0, 1.0, 1e-14, 3);
        assert!(matches!(r, Err(Error::Quadrature(_))));
    }
}
