//! Distances to the standard normal and the classical CLT condition
//! functionals.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{norm_cdf, norm_pdf, norm_sf};
use crate::sums::{GridDensity, SumSequence};

/// Comparison law for a grid density.
#[derive(Debug, Clone, Copy)]
pub enum Reference<'a> {
    StandardNormal,
    Grid(&'a GridDensity),
}

/// Both densities on a shared node set, plus the mass each has off the grid.
struct Aligned {
    step: f64,
    p: Vec<f64>,
    q: Vec<f64>,
    q_left: f64,
    p_out: f64,
    q_out: f64,
}

fn align(p: &GridDensity, q: Reference<'_>) -> Result<Aligned> {
    match q {
        Reference::StandardNormal => {
            let qv: Vec<f64> = (0..p.m()).map(|i| norm_pdf(p.x(i))).collect();
            let q_left = norm_cdf(p.lo());
            Ok(Aligned {
                step: p.step(),
                p: p.values().to_vec(),
                q: qv,
                q_left,
                p_out: p.tail_mass(),
                q_out: q_left + norm_sf(p.hi()),
            })
        }
        Reference::Grid(q) => {
            let (hp, hq) = (p.step(), q.step());
            if ((hp - hq) / hp).abs() > 1e-12 {
                return Err(Error::GridMismatch(format!("grid steps differ: {hp} vs {hq}")));
            }
            // both layouts put node i at (i - m/2) * step, so they share nodes
            let half = p.m().max(q.m()) / 2;
            let pad = |d: &GridDensity| {
                let off = half - d.m() / 2;
                let mut v = vec![0.0; 2 * half];
                v[off..off + d.m()].copy_from_slice(d.values());
                v
            };
            Ok(Aligned {
                step: hp,
                p: pad(p),
                q: pad(q),
                q_left: 0.0,
                p_out: p.tail_mass(),
                q_out: q.tail_mass(),
            })
        }
    }
}

/// `½ ∫ |p - q|` by the trapezoid rule, plus all mass known to lie off the
/// grid, clamped to `[0, 1]`.
pub fn tv_distance(p: &GridDensity, q: Reference<'_>) -> Result<f64> {
    let a = align(p, q)?;
    let n = a.p.len();
    let mut s = 0.0;
    for i in 0..n {
        let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
        s += w * (a.p[i] - a.q[i]).abs();
    }
    Ok((0.5 * s * a.step + a.p_out + a.q_out).clamp(0.0, 1.0))
}

/// `max_i |F_p(x_i) - F_q(x_i)|` with both CDFs accumulated by the
/// trapezoid rule on the grid.
pub fn kolmogorov_distance(p: &GridDensity, q: Reference<'_>) -> Result<f64> {
    let a = align(p, q)?;
    let h = a.step;
    let (mut fp, mut fq) = (0.0, a.q_left);
    let mut worst = (fp - fq).abs();
    for i in 1..a.p.len() {
        fp += 0.5 * h * (a.p[i - 1] + a.p[i]);
        fq += 0.5 * h * (a.q[i - 1] + a.q[i]);
        worst = worst.max((fp - fq).abs());
    }
    Ok(worst.clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceReport {
    pub tv: f64,
    pub kolmogorov: f64,
    pub lo: f64,
    pub hi: f64,
    pub m: usize,
    pub clipped_mass: f64,
    pub tail_mass: f64,
}

pub fn distance_report(p: &GridDensity, q: Reference<'_>) -> Result<DistanceReport> {
    Ok(DistanceReport {
        tv: tv_distance(p, q)?,
        kolmogorov: kolmogorov_distance(p, q)?,
        lo: p.lo(),
        hi: p.hi(),
        m: p.m(),
        clipped_mass: p.clipped_mass(),
        tail_mass: p.tail_mass(),
    })
}

fn first_n(seq: &SumSequence, n: usize) -> Result<SumSequence> {
    if n == seq.len() {
        Ok(seq.clone())
    } else {
        seq.prefix(n)
    }
}

/// `L_n(ε) = b_n⁻² Σ_{k<=n} E[X_k² 1{|X_k| > ε b_n}]`.
pub fn lindeberg_functional(seq: &SumSequence, n: usize, eps: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("epsilon must be positive, got {eps}")));
    }
    let s = first_n(seq, n)?;
    let b = s.b_n();
    let mut total = 0.0;
    for (spec, count) in s.distinct() {
        total += count as f64 * spec.tail_second_moment(eps * b)?;
    }
    Ok(total / (b * b))
}

/// `max_{k<=n} σ_k² / b_n²`.
pub fn feller_ratio(seq: &SumSequence, n: usize) -> Result<f64> {
    let s = first_n(seq, n)?;
    let b2 = s.variances().iter().sum::<f64>();
    Ok(s.variances().iter().fold(0.0_f64, |a, &v| a.max(v)) / b2)
}

/// `M_n = b_n⁻³ Σ_{k<=n} E[X_k² (b_n ∧ |X_k|)]`.
pub fn truncated_moment(seq: &SumSequence, n: usize) -> Result<f64> {
    let s = first_n(seq, n)?;
    let b = s.b_n();
    let mut total = 0.0;
    for (spec, count) in s.distinct() {
        total += count as f64 * spec.truncated_third_moment(b)?;
    }
    Ok(total / (b * b * b))
}

/// `b_n⁻³ Σ_{k<=n} E|X_k|³`, infinite when a third moment diverges.
pub fn third_moment_ratio(seq: &SumSequence, n: usize) -> Result<f64> {
    let s = first_n(seq, n)?;
    let b = s.b_n();
    let mut total = 0.0;
    for (spec, count) in s.distinct() {
        match spec.abs_moment(3.0) {
            Ok(v) => total += count as f64 * v,
            Err(Error::QuadratureDivergent(_)) => return Ok(f64::INFINITY),
            Err(e) => return Err(e),
        }
    }
    Ok(total / (b * b * b))
}

/// `∫ e^{itx} p(x) dx` by the trapezoid rule.
pub fn char_fn(p: &GridDensity, t: f64) -> Complex64 {
    Complex64::new(p.expect(|x| (t * x).cos()), p.expect(|x| (t * x).sin()))
}

/// `count` log-spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| {
            if i == 0 {
                lo
            } else if i == count - 1 {
                hi
            } else {
                (a + (b - a) * i as f64 / (count - 1) as f64).exp()
            }
        })
        .collect()
}

/// The default ε scan: 50 log-spaced points over `[1e-3, 1]`.
pub fn epsilon_grid() -> Vec<f64> {
    log_grid(1e-3, 1.0, 50)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::DistributionSpec;
    use crate::sums::{sum_density, GridConfig};
    use approx::assert_abs_diff_eq;

    fn normal_grid() -> GridDensity {
        let layout = GridConfig::default().layout(1.0).unwrap();
        GridDensity::standard_normal(layout).unwrap()
    }

    fn shifted_normal(mu: f64) -> GridDensity {
        let layout = GridConfig::default().layout(1.0).unwrap();
        let v = (0..layout.m).map(|i| norm_pdf(layout.x(i) - mu)).collect();
        GridDensity::from_values(layout, v, 0.0).unwrap()
    }

    #[test]
    fn normal_against_itself() {
        let g = normal_grid();
        assert!(tv_distance(&g, Reference::StandardNormal).unwrap() < 1e-12);
        assert!(kolmogorov_distance(&g, Reference::StandardNormal).unwrap() < 1e-12);
        assert_eq!(tv_distance(&g, Reference::Grid(&g)).unwrap(), 0.0);
    }

    #[test]
    fn shifted_normals() {
        let (a, b) = (normal_grid(), shifted_normal(1.0));
        let exact = 0.382_924_922_548_026_2;
        // |p - q| has a kink at 1/2, so the trapezoid rule is only O(h²) there
        assert_abs_diff_eq!(tv_distance(&b, Reference::StandardNormal).unwrap(), exact, epsilon = 1e-6);
        assert_abs_diff_eq!(tv_distance(&a, Reference::Grid(&b)).unwrap(), exact, epsilon = 1e-6);
        // the CDF gap peaks at x = 1/2, between grid nodes
        assert_abs_diff_eq!(kolmogorov_distance(&b, Reference::StandardNormal).unwrap(), exact, epsilon = 1e-6);
    }

    #[test]
    fn mismatched_steps_rejected() {
        let a = normal_grid();
        let l = GridConfig { m: 1 << 12, extent_sigmas: 10.0 }.layout(1.0).unwrap();
        let b = GridDensity::standard_normal(l).unwrap();
        assert!(matches!(tv_distance(&a, Reference::Grid(&b)), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn different_sizes_same_step_reconcile() {
        let a = GridConfig { m: 1 << 10, extent_sigmas: 10.0 }.layout(1.0).unwrap();
        let b = crate::sums::GridLayout { m: 1 << 11, step: a.step };
        let (ga, gb) = (GridDensity::standard_normal(a).unwrap(), GridDensity::standard_normal(b).unwrap());
        assert!(tv_distance(&ga, Reference::Grid(&gb)).unwrap() < 1e-12);
    }

    #[test]
    fn lindeberg_examples() {
        let seq = SumSequence::iid(DistributionSpec::normal(1.0).unwrap(), 25).unwrap();
        assert_abs_diff_eq!(lindeberg_functional(&seq, 25, 0.2).unwrap(), 0.801_251_956_901_200_8, epsilon = 1e-10);
        assert_abs_diff_eq!(lindeberg_functional(&seq, 25, 1e-9).unwrap(), 1.0, epsilon = 1e-9);
        let u = SumSequence::iid(DistributionSpec::uniform(1.0).unwrap(), 4).unwrap();
        assert_eq!(lindeberg_functional(&u, 4, 0.9).unwrap(), 0.0);
        assert!(lindeberg_functional(&seq, 25, 0.0).is_err());
    }

    #[test]
    fn feller_examples() {
        let s = |sd: f64| DistributionSpec::normal(sd).unwrap();
        let seq = SumSequence::new(vec![s(1.0), s(2.0), s(2.0)]).unwrap();
        assert_abs_diff_eq!(feller_ratio(&seq, 3).unwrap(), 4.0 / 9.0, epsilon = 1e-15);
        assert_eq!(feller_ratio(&seq, 1).unwrap(), 1.0);
        let iid = SumSequence::iid(s(1.0), 7).unwrap();
        assert_abs_diff_eq!(feller_ratio(&iid, 7).unwrap(), 1.0 / 7.0, epsilon = 1e-15);
    }

    #[test]
    fn truncated_moment_examples() {
        let seq = SumSequence::iid(DistributionSpec::normal(1.0).unwrap(), 25).unwrap();
        let m = truncated_moment(&seq, 25).unwrap();
        assert_abs_diff_eq!(m, 0.319_153_208_248_678_1, epsilon = 1e-9);
        assert!(m <= third_moment_ratio(&seq, 25).unwrap());
        let lap = SumSequence::iid(DistributionSpec::laplace(1.0).unwrap(), 2).unwrap();
        assert_abs_diff_eq!(truncated_moment(&lap, 2).unwrap(), 0.890_991_225_435_242_9, epsilon = 1e-9);
        // bounded summands: the truncation never bites
        let u = SumSequence::iid(DistributionSpec::uniform(1.0).unwrap(), 9).unwrap();
        assert_abs_diff_eq!(truncated_moment(&u, 9).unwrap(), third_moment_ratio(&u, 9).unwrap(), epsilon = 1e-12);
    }

    #[test]
    fn char_fn_values() {
        let g = normal_grid();
        assert_abs_diff_eq!(char_fn(&g, 0.0).re, 1.0, epsilon = 1e-12);
        let c = char_fn(&g, 1.0);
        assert_abs_diff_eq!(c.re, (-0.5_f64).exp(), epsilon = 1e-10);
        assert!(c.im.abs() < 1e-12);
    }

    #[test]
    fn char_fn_product_for_two_summands() {
        let spec = DistributionSpec::logistic(1.0).unwrap();
        let seq = SumSequence::iid(spec.clone(), 2).unwrap();
        let d = sum_density(&seq, &GridConfig::default()).unwrap();
        let b = seq.b_n();
        for t in [0.3, 1.0, 2.5] {
            let (re, im) = spec.char_fn(t / b).unwrap();
            let single = Complex64::new(re, im);
            assert!((char_fn(&d, t) - single * single).norm() < 1e-6);
        }
    }

    #[test]
    fn epsilon_grid_shape() {
        let g = epsilon_grid();
        assert_eq!(g.len(), 50);
        assert_eq!((g[0], g[49]), (1e-3, 1.0));
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }
}
