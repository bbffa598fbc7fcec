//! Standard normal density, distribution and tail functions.

use libm::erfc;

pub const SQRT_2PI: f64 = 2.506_628_274_631_000_502_415_765_284_811;
pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_741_780_329_736_406;

#[inline]
pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / SQRT_2PI
}

/// Density of N(mean, sd²).
#[inline]
pub fn norm_pdf_ms(x: f64, mean: f64, sd: f64) -> f64 {
    norm_pdf((x - mean) / sd) / sd
}

/// Upper tail P(N > x), accurate for large positive x.
#[inline]
pub fn norm_sf(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// P(N <= x).
#[inline]
pub fn norm_cdf(x: f64) -> f64 {
    norm_sf(-x)
}

/// P(a < N <= b) without cancellation in either tail.
pub fn norm_interval(a: f64, b: f64) -> f64 {
    if a >= b {
        return 0.0;
    }
    if a >= 0.0 {
        norm_sf(a) - norm_sf(b)
    } else if b <= 0.0 {
        norm_sf(-b) - norm_sf(-a)
    } else {
        1.0 - norm_sf(-a) - norm_sf(b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values() {
        assert!((norm_pdf(0.0) - 0.398_942_280_401_432_7).abs() < 1e-16);
        assert!((norm_cdf(0.5) - 0.691_462_461_274_013_1).abs() < 1e-15);
        // Q(10) = 7.61985302416047e-24
        assert!((norm_sf(10.0) / 7.619_853_024_160_47e-24 - 1.0).abs() < 1e-12);
        assert!((norm_interval(-1.0, 1.0) - 0.682_689_492_137_085_9).abs() < 1e-15);
        assert!((LN_SQRT_2PI - SQRT_2PI.ln()).abs() < 1e-15);
    }
}
