//! Normal density, distribution and interval-mass helpers built on `erf`/`erfc`.
//!
//! Interval masses pick the tail representation that avoids cancellation, so
//! masses far from the mean keep full relative precision.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// `sqrt(2 * pi * e)`, the constant in the Lipschitz bound of a Gaussian density.
pub fn sqrt_two_pi_e() -> f64 {
    (2.0 * PI * std::f64::consts::E).sqrt()
}

pub fn pdf(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    (-0.5 * z * z).exp() / (sd * (2.0 * PI).sqrt())
}

/// Lower and upper tail probabilities `(P[X <= x], P[X > x])`, each computed
/// without cancellation.
pub fn tails(x: f64, mean: f64, sd: f64) -> (f64, f64) {
    let z = (x - mean) / sd * FRAC_1_SQRT_2;
    (0.5 * libm::erfc(-z), 0.5 * libm::erfc(z))
}

pub fn cdf(x: f64, mean: f64, sd: f64) -> f64 {
    tails(x, mean, sd).0
}

/// Probability that `N(mean, sd^2)` falls in `[a, b]`. Infinite endpoints are allowed.
pub fn interval_mass(a: f64, b: f64, mean: f64, sd: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let (lo_a, up_a) = tails(a, mean, sd);
    let (lo_b, up_b) = tails(b, mean, sd);
    mass_from_tails(a, b, mean, (lo_a, up_a), (lo_b, up_b))
}

/// Mass of `[a, b]` from precomputed tail pairs at both endpoints.
#[inline]
pub fn mass_from_tails(a: f64, b: f64, mean: f64, at_a: (f64, f64), at_b: (f64, f64)) -> f64 {
    let m = if a >= mean {
        at_a.1 - at_b.1
    } else if b <= mean {
        at_b.0 - at_a.0
    } else {
        1.0 - at_a.0 - at_b.1
    };
    m.max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn density_at_mean() {
        assert!((pdf(0.0, 0.0, 0.2) - 1.994_711_402_007_163_5).abs() < 1e-14);
        assert!((pdf(0.0, 1.0, 1.0) - 0.241_970_724_519_143_37).abs() < 1e-15);
    }

    #[test]
    fn interval_masses() {
        let m = interval_mass(-1.0, 1.0, 0.0, 0.2);
        assert!((m - 0.999_999_426_696_856_3).abs() < 1e-14);
        assert_eq!(interval_mass(0.3, 0.3, 0.0, 1.0), 0.0);
        assert!((interval_mass(-40.0 * 0.7, 0.0, 0.0, 0.7) - 0.5).abs() < 1e-12);
        assert!((interval_mass(f64::NEG_INFINITY, f64::INFINITY, 2.0, 3.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn far_tail_keeps_relative_precision() {
        // P[X > 10] for a standard normal is 7.6198530241605e-24
        let m = interval_mass(10.0, f64::INFINITY, 0.0, 1.0);
        assert!((m / 7.619_853_024_160_527e-24 - 1.0).abs() < 1e-12);
    }
}
