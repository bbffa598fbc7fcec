//! Adaptive Gauss–Kronrod (G10/K21) quadrature on finite intervals.
//!
//! Every expectation functional in the crate goes through [`integrate`]:
//! the interval is bisected globally, always splitting the sub-interval
//! with the largest error estimate, until the summed estimate falls below
//! `max(epsabs, epsrel * |I|)`.

#![allow(clippy::excessive_precision)]

use crate::error::{Error, Result};

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_208_745_938_483,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

// Gauss weights for the odd-indexed Kronrod nodes XGK[1], XGK[3], ..., XGK[9].
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

/// Tolerances for [`integrate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadConfig {
    pub epsabs: f64,
    pub epsrel: f64,
    pub max_intervals: usize,
}

impl Default for QuadConfig {
    /// Absolute tolerance 1e-10, the working setting for identity checks.
    fn default() -> Self {
        Self {
            epsabs: 1e-10,
            epsrel: 1e-12,
            max_intervals: 4000,
        }
    }
}

impl QuadConfig {
    /// Relative-accuracy setting for integrals whose magnitude may be tiny
    /// (tail integrals, Stein kernel numerators).
    pub fn relative() -> Self {
        Self {
            epsabs: 1e-300,
            epsrel: 1e-12,
            max_intervals: 4000,
        }
    }

    pub fn with_epsabs(mut self, epsabs: f64) -> Self {
        self.epsabs = epsabs;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub intervals: usize,
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

fn rescale_error(err: f64, resabs: f64, resasc: f64) -> f64 {
    let mut err = err.abs();
    if resasc != 0.0 && err != 0.0 {
        let scale = (200.0 * err / resasc).powf(1.5);
        err = if scale < 1.0 { resasc * scale } else { resasc };
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        let min_err = 50.0 * f64::EPSILON * resabs;
        if min_err > err {
            err = min_err;
        }
    }
    err
}

/// Single 21-point Kronrod rule with embedded 10-point Gauss estimate.
pub fn gk21<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut resk = fc * WGK[10];
    let mut resg = 0.0;
    let mut resabs = (fc * WGK[10]).abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        resk += WGK[j] * (f1 + f2);
        resabs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            resg += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * resk;
    let mut resasc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        resasc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let habs = half.abs();
    let value = resk * half;
    let err = rescale_error((resk - resg) * half, resabs * habs, resasc * habs);
    (value, err)
}

/// Integrates `f` over `[a, b]` (finite, `a <= b` or reversed).
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, cfg: &QuadConfig) -> Result<QuadResult> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::InvalidArgument(format!("quadrature limits must be finite, got [{a}, {b}]")));
    }
    if a == b {
        return Ok(QuadResult { value: 0.0, error: 0.0, intervals: 0 });
    }
    if a > b {
        let r = integrate(f, b, a, cfg)?;
        return Ok(QuadResult { value: -r.value, ..r });
    }
    let (v, e) = gk21(&mut f, a, b);
    let mut segs = vec![Segment { a, b, value: v, error: e }];
    let mut total = v;
    let mut total_err = e;
    loop {
        if !total.is_finite() {
            return Err(Error::QuadratureDivergent(format!("non-finite integrand on [{a}, {b}]")));
        }
        let tol = cfg.epsabs.max(cfg.epsrel * total.abs());
        if total_err <= tol {
            break;
        }
        if segs.len() >= cfg.max_intervals {
            // Accept when the remaining error is only roundoff-level noise.
            if total_err <= 1e3 * tol {
                break;
            }
            return Err(Error::QuadratureDivergent(format!(
                "no convergence on [{a}, {b}]: estimate {total:.6e}, error {total_err:.3e} after {} intervals",
                segs.len()
            )));
        }
        let (idx, _) = segs
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, s)| if s.error > acc.1 { (i, s.error) } else { acc });
        let s = segs.swap_remove(idx);
        let mid = 0.5 * (s.a + s.b);
        if mid <= s.a || mid >= s.b {
            // interval exhausted at machine resolution
            segs.push(Segment { error: 0.0, ..s });
            total_err = segs.iter().map(|s| s.error).sum();
            continue;
        }
        let (v1, e1) = gk21(&mut f, s.a, mid);
        let (v2, e2) = gk21(&mut f, mid, s.b);
        segs.push(Segment { a: s.a, b: mid, value: v1, error: e1 });
        segs.push(Segment { a: mid, b: s.b, value: v2, error: e2 });
        total = segs.iter().map(|s| s.value).sum();
        total_err = segs.iter().map(|s| s.error).sum();
    }
    Ok(QuadResult { value: total, error: total_err, intervals: segs.len() })
}

/// Integrates over `[a, b]` splitting at the interior `breaks`, which may be
/// unsorted and may fall outside the interval.
pub fn integrate_with_breaks<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    cfg: &QuadConfig,
) -> Result<f64> {
    let mut pts: Vec<f64> = breaks.iter().copied().filter(|&x| x > a && x < b).collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let mut knots = Vec::with_capacity(pts.len() + 2);
    knots.push(a);
    knots.extend(pts);
    knots.push(b);
    let mut sum = 0.0;
    for w in knots.windows(2) {
        sum += integrate(&mut f, w[0], w[1], cfg)?.value;
    }
    Ok(sum)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_interval_length() {
        let k: f64 = 2.0 * WGK[..10].iter().sum::<f64>() + WGK[10];
        let g: f64 = 2.0 * WG.iter().sum::<f64>();
        assert!((k - 2.0).abs() < 1e-14, "{k}");
        assert!((g - 2.0).abs() < 1e-14, "{g}");
    }

    #[test]
    fn kronrod_exact_for_high_degree_polynomials() {
        // K21 integrates degree <= 31 exactly.
        for deg in [0_i32, 1, 5, 10, 20, 30, 31] {
            let (v, _) = gk21(&mut |x: f64| x.powi(deg), 0.0, 1.0);
            assert!((v - 1.0 / (deg as f64 + 1.0)).abs() < 1e-14, "deg {deg}: {v}");
        }
    }

    #[test]
    fn gauss_rule_exact_to_degree_19() {
        // The embedded 10-point estimate equals the Kronrod one for low-degree
        // polynomials, so the error estimate collapses to roundoff.
        let (v, err) = gk21(&mut |x: f64| x.powi(19) - 3.0 * x.powi(4), -1.0, 2.0);
        assert!(err < 1e-13 * v.abs(), "{err}");
    }

    #[test]
    fn adaptive_handles_kinks_and_oscillation() {
        let cfg = QuadConfig::default();
        let r = integrate(|x: f64| x.abs(), -1.0, 2.0, &cfg).unwrap();
        assert!((r.value - 2.5).abs() < 1e-12);
        let r = integrate(|x: f64| (20.0 * x).sin() * (-x).exp(), 0.0, 10.0, &cfg).unwrap();
        let exact = (20.0 - (-10.0_f64).exp() * (20.0 * (200.0_f64).cos() + (200.0_f64).sin())) / 401.0;
        assert!((r.value - exact).abs() < 1e-11, "{} vs {exact}", r.value);
    }

    #[test]
    fn relative_mode_resolves_tiny_tails() {
        // ∫_30^40 e^{-x} dx ≈ 9.4e-14, needs relative accuracy.
        let r = integrate(|x: f64| (-x).exp(), 30.0, 40.0, &QuadConfig::relative()).unwrap();
        let exact = (-30.0_f64).exp() - (-40.0_f64).exp();
        assert!(((r.value - exact) / exact).abs() < 1e-12);
    }

    #[test]
    fn reversed_limits_negate() {
        let cfg = QuadConfig::default();
        let r = integrate(|x: f64| x * x, 1.0, 0.0, &cfg).unwrap();
        assert!((r.value + 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn breaks_outside_interval_are_ignored() {
        let v = integrate_with_breaks(|x: f64| if x < 0.5 { 0.0 } else { 1.0 }, 0.0, 1.0, &[0.5, 7.0, -1.0], &QuadConfig::default())
            .unwrap();
        assert!((v - 0.5).abs() < 1e-15);
    }
}
