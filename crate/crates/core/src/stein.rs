//! Stein's equation `f'(x) - x f(x) = h(x) - E h(N)` for bounded `h`, and
//! quadrature checks of the identities used to bound `E h(S_n) - E h(N)`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dist::DistributionSpec;
use crate::error::{Error, Result};
use crate::quad::{integrate_with_breaks, QuadConfig};
use crate::special::norm_pdf;
use crate::sums::{grid_score, leave_one_out_density, GridConfig, SumSequence};

/// `√(2π)`: sup-norm bound on the solution for `|h| <= 1`.
pub const SUP_F_BOUND: f64 = 2.506_628_274_631_000_5;
/// Sup-norm bound on the derivative for `|h| <= 1`.
pub const SUP_FPRIME_BOUND: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestFunctionKind {
    Indicator,
    Sign,
    SmoothBump,
    PiecewiseLinear,
    Custom,
}

/// A bounded measurable test function `h` with `|h| <= bound`.
#[derive(Clone)]
pub struct TestFunction {
    pub kind: TestFunctionKind,
    pub bound: f64,
    eval: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    breaks: Vec<f64>,
}

impl fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TestFunction")
            .field("kind", &self.kind)
            .field("bound", &self.bound)
            .field("breaks", &self.breaks)
            .finish_non_exhaustive()
    }
}

impl TestFunction {
    pub fn custom(bound: f64, breaks: Vec<f64>, h: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self { kind: TestFunctionKind::Custom, bound, eval: Arc::new(h), breaks }
    }

    /// `1{x <= a}`.
    pub fn indicator(a: f64) -> Self {
        Self {
            kind: TestFunctionKind::Indicator,
            bound: 1.0,
            eval: Arc::new(move |x| if x <= a { 1.0 } else { 0.0 }),
            breaks: vec![a],
        }
    }

    pub fn sign() -> Self {
        Self {
            kind: TestFunctionKind::Sign,
            bound: 1.0,
            eval: Arc::new(|x: f64| {
                if x > 0.0 {
                    1.0
                } else if x < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }),
            breaks: vec![0.0],
        }
    }

    /// `exp(1 - 1/(1 - t²))` with `t = (x - center) / width`, peak value 1.
    pub fn smooth_bump(center: f64, width: f64) -> Self {
        Self {
            kind: TestFunctionKind::SmoothBump,
            bound: 1.0,
            eval: Arc::new(move |x| {
                let t = (x - center) / width;
                if t.abs() < 1.0 {
                    (1.0 - 1.0 / (1.0 - t * t)).exp()
                } else {
                    0.0
                }
            }),
            breaks: vec![center - width, center, center + width],
        }
    }

    /// Linear interpolation through `(knots[i], values[i])`, constant
    /// beyond the end knots.
    pub fn piecewise_linear(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if knots.len() != values.len() || knots.is_empty() || knots.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidArgument("piecewise-linear knots must be strictly increasing and match values".into()));
        }
        let bound = values.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        let breaks = knots.clone();
        let eval = move |x: f64| {
            if x <= knots[0] {
                return values[0];
            }
            let last = knots.len() - 1;
            if x >= knots[last] {
                return values[last];
            }
            let j = knots.partition_point(|&k| k <= x);
            let (x0, x1) = (knots[j - 1], knots[j]);
            values[j - 1] + (values[j] - values[j - 1]) * (x - x0) / (x1 - x0)
        };
        Ok(Self { kind: TestFunctionKind::PiecewiseLinear, bound, eval: Arc::new(eval), breaks })
    }

    /// `count` random piecewise-linear functions with eight knots in
    /// `[-4, 4]` and values in `[-1, 1]`, reproducible from `seed`.
    pub fn random_piecewise_linear(seed: u64, count: usize) -> Vec<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| {
                let mut knots: Vec<f64> = (0..8).map(|_| rng.gen_range(-4.0..4.0)).collect();
                knots.sort_by(f64::total_cmp);
                knots.dedup();
                let values = (0..knots.len()).map(|_| rng.gen_range(-1.0..=1.0)).collect();
                Self::piecewise_linear(knots, values).expect("sorted distinct knots")
            })
            .collect()
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.eval)(x)
    }

    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    /// `h` scaled by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        let inner = self.eval.clone();
        Self {
            kind: self.kind,
            bound: self.bound * c.abs(),
            eval: Arc::new(move |x| c * inner(x)),
            breaks: self.breaks.clone(),
        }
    }

    /// Largest `|h|` over `points` evenly spaced nodes of `[lo, hi]` exceeds the bound?
    pub fn check_bound(&self, lo: f64, hi: f64, points: usize) -> Result<()> {
        for i in 0..points {
            let x = lo + (hi - lo) * i as f64 / (points - 1).max(1) as f64;
            let v = self.eval(x);
            if !(v.abs() <= self.bound) {
                return Err(Error::InvalidArgument(format!("|h({x})| = {} exceeds bound {}", v.abs(), self.bound)));
            }
        }
        Ok(())
    }

    /// `E h(N)` for standard normal `N`.
    pub fn normal_expectation(&self) -> Result<f64> {
        let cfg = QuadConfig::default().with_epsabs(1e-15);
        integrate_with_breaks(|x| self.eval(x) * norm_pdf(x), -12.0, 12.0, &self.breaks, &cfg)
    }
}

/// Evaluation grid for a [`SteinSolution`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteinGrid {
    pub half_width: f64,
    pub points: usize,
}

impl Default for SteinGrid {
    fn default() -> Self {
        Self { half_width: 8.0, points: 1601 }
    }
}

/// Bounded solution of Stein's equation for one test function.
#[derive(Debug, Clone)]
pub struct SteinSolution {
    h: TestFunction,
    eh: f64,
    xs: Vec<f64>,
    f: Vec<f64>,
    fprime: Vec<f64>,
}

impl SteinSolution {
    pub fn test_function(&self) -> &TestFunction {
        &self.h
    }

    /// Cached `E h(N)`.
    pub fn normal_expectation(&self) -> f64 {
        self.eh
    }

    pub fn grid(&self) -> &[f64] {
        &self.xs
    }

    pub fn f_values(&self) -> &[f64] {
        &self.f
    }

    pub fn fprime_values(&self) -> &[f64] {
        &self.fprime
    }

    /// `f(x)` for any real `x`.
    ///
    /// For `x <= 0` this is `∫_0^∞ (h(x - t) - Eh) e^{xt - t²/2} dt` and for
    /// `x > 0` it is `-∫_0^∞ (h(x + t) - Eh) e^{-xt - t²/2} dt`; both are the
    /// defining integral with the Gaussian factor folded in, so nothing
    /// overflows.
    pub fn f(&self, x: f64) -> Result<f64> {
        let eh = self.eh;
        let ax = x.abs();
        // e^{-|x|t - t²/2} < 1e-17 beyond this point
        let tmax = -ax + (ax * ax + 78.0).sqrt();
        let cfg = QuadConfig::default().with_epsabs(1e-14);
        if x <= 0.0 {
            let breaks: Vec<f64> = self.h.breaks.iter().map(|b| x - b).collect();
            integrate_with_breaks(|t| (self.h.eval(x - t) - eh) * (x * t - 0.5 * t * t).exp(), 0.0, tmax, &breaks, &cfg)
        } else {
            let breaks: Vec<f64> = self.h.breaks.iter().map(|b| b - x).collect();
            Ok(-integrate_with_breaks(|t| (self.h.eval(x + t) - eh) * (-x * t - 0.5 * t * t).exp(), 0.0, tmax, &breaks, &cfg)?)
        }
    }

    /// `f'(x)` from the equation itself.
    pub fn fprime(&self, x: f64) -> Result<f64> {
        Ok(x * self.f(x)? + self.h.eval(x) - self.eh)
    }

    pub fn sup_f(&self) -> f64 {
        self.f.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    pub fn sup_fprime(&self) -> f64 {
        self.fprime.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    /// Cell-averaged residual of the equation over `cells` equal cells of
    /// `[lo, hi]`: `|f(b) - f(a) - ∫_a^b (x f(x) + h(x) - Eh) dx| / (b - a)`.
    pub fn ode_residual(&self, lo: f64, hi: f64, cells: usize) -> Result<f64> {
        let w = (hi - lo) / cells as f64;
        let cfg = QuadConfig::default().with_epsabs(1e-13);
        let mut worst: f64 = 0.0;
        let mut fa = self.f(lo)?;
        for c in 0..cells {
            let a = lo + c as f64 * w;
            let b = if c + 1 == cells { hi } else { a + w };
            let fb = self.f(b)?;
            let rhs = integrate_with_breaks(
                |x| x * self.f(x).unwrap_or(f64::NAN) + self.h.eval(x) - self.eh,
                a,
                b,
                &self.h.breaks,
                &cfg,
            )?;
            worst = worst.max(((fb - fa) - rhs).abs() / (b - a));
            fa = fb;
        }
        Ok(worst)
    }
}

/// Solves Stein's equation for `h` on the evaluation grid.
pub fn solve_stein(h: &TestFunction, grid: &SteinGrid) -> Result<SteinSolution> {
    if grid.points < 2 || !(grid.half_width > 0.0) {
        return Err(Error::InvalidArgument("Stein grid needs >= 2 points and a positive half width".into()));
    }
    h.check_bound(-grid.half_width, grid.half_width, grid.points)?;
    let eh = h.normal_expectation()?;
    let mut sol = SteinSolution { h: h.clone(), eh, xs: vec![], f: vec![], fprime: vec![] };
    let n = grid.points;
    for i in 0..n {
        let x = -grid.half_width + 2.0 * grid.half_width * i as f64 / (n - 1) as f64;
        let fx = sol.f(x)?;
        sol.xs.push(x);
        sol.f.push(fx);
        sol.fprime.push(x * fx + h.eval(x) - eh);
    }
    Ok(sol)
}

/// Smooth bounded test functions with bounded derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmoothFn {
    Sin,
    Cos,
    Tanh,
    Arctan,
    /// `exp(1 - 1/(1 - x²))` on `(-1, 1)`.
    Bump,
    Identity,
    Constant(f64),
}

impl SmoothFn {
    pub const MATRIX: [SmoothFn; 4] = [SmoothFn::Sin, SmoothFn::Tanh, SmoothFn::Arctan, SmoothFn::Bump];

    pub fn value(&self, x: f64) -> f64 {
        match self {
            SmoothFn::Sin => x.sin(),
            SmoothFn::Cos => x.cos(),
            SmoothFn::Tanh => x.tanh(),
            SmoothFn::Arctan => x.atan(),
            SmoothFn::Bump => {
                if x.abs() < 1.0 {
                    (1.0 - 1.0 / (1.0 - x * x)).exp()
                } else {
                    0.0
                }
            }
            SmoothFn::Identity => x,
            SmoothFn::Constant(c) => *c,
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match self {
            SmoothFn::Sin => x.cos(),
            SmoothFn::Cos => -x.sin(),
            SmoothFn::Tanh => 1.0 / x.cosh().powi(2),
            SmoothFn::Arctan => 1.0 / (1.0 + x * x),
            SmoothFn::Bump => {
                if x.abs() < 1.0 {
                    let q = 1.0 - x * x;
                    self.value(x) * (-2.0 * x / (q * q))
                } else {
                    0.0
                }
            }
            SmoothFn::Identity => 1.0,
            SmoothFn::Constant(_) => 0.0,
        }
    }

    fn breaks(&self) -> &'static [f64] {
        match self {
            SmoothFn::Bump => &[-1.0, 1.0],
            _ => &[],
        }
    }

    pub fn name(&self) -> String {
        match self {
            SmoothFn::Constant(c) => format!("constant({c})"),
            other => format!("{other:?}").to_lowercase(),
        }
    }
}

/// Two sides of an identity and their absolute gap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
}

impl IdentityCheck {
    fn new(lhs: f64, rhs: f64) -> Self {
        Self { lhs, rhs, gap: (lhs - rhs).abs() }
    }
}

fn expect_with_breaks(spec: &DistributionSpec, extra: &[f64], g: impl Fn(f64) -> f64) -> Result<f64> {
    let (lo, hi) = spec.range();
    let mut breaks = spec.breaks().to_vec();
    breaks.extend_from_slice(extra);
    integrate_with_breaks(
        |x| {
            let p = spec.density(x);
            if p > 0.0 {
                g(x) * p
            } else {
                0.0
            }
        },
        lo,
        hi,
        &breaks,
        &QuadConfig::default().with_epsabs(1e-12),
    )
}

/// `E[f(X) ρ(X)]` against `-E[f'(X)]`.
pub fn check_ibp_score(spec: &DistributionSpec, f: SmoothFn) -> Result<IdentityCheck> {
    let score = spec.score_fn()?;
    let lhs = expect_with_breaks(spec, f.breaks(), |x| f.value(x) * score.eval(x).unwrap_or(0.0))?;
    let rhs = -expect_with_breaks(spec, f.breaks(), |x| f.derivative(x))?;
    Ok(IdentityCheck::new(lhs, rhs))
}

/// `E[f(Y) Y]` against `E[f'(Y) τ(Y)]`, the latter as `∫ f'(x) T(x) dx`
/// with `T = τ p` from tail quadrature.
pub fn check_kernel_identity(spec: &DistributionSpec, f: SmoothFn) -> Result<IdentityCheck> {
    if !spec.has_density() {
        return Err(Error::DisconnectedSupport(spec.family().name()));
    }
    let lhs = expect_with_breaks(spec, f.breaks(), |x| f.value(x) * x)?;
    let (lo, hi) = spec.range();
    let mut breaks = spec.breaks().to_vec();
    breaks.extend_from_slice(f.breaks());
    breaks.push(0.0);
    let rhs = integrate_with_breaks(
        |x| {
            let d = f.derivative(x);
            if d == 0.0 {
                0.0
            } else {
                d * spec.kernel_numerator(x).unwrap_or(f64::NAN)
            }
        },
        lo,
        hi,
        &breaks,
        &QuadConfig::default().with_epsabs(1e-12),
    )?;
    Ok(IdentityCheck::new(lhs, rhs))
}

/// Leave-one-out score moment against `sqrt(max_k J(X_k))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LooScoreCheck {
    pub k: usize,
    pub e_abs_rho: f64,
    pub j_bound: f64,
    pub holds: bool,
}

pub const LOO_SLACK: f64 = 1e-4;

/// `E|ρ_{k,n}(S_{k,n})|` from the grid score, `k` zero-based.
pub fn loo_score_moment(seq: &SumSequence, k: usize, grid: &GridConfig) -> Result<f64> {
    let d = leave_one_out_density(seq, k, grid)?;
    Ok(grid_score(&d)?.expect_abs(&d))
}

pub fn check_loo_score_bound(seq: &SumSequence, k: usize, grid: &GridConfig) -> Result<LooScoreCheck> {
    let mut j_max: f64 = 0.0;
    for (s, _) in seq.distinct() {
        j_max = j_max.max(s.fisher_j()?);
    }
    let e_abs_rho = loo_score_moment(seq, k, grid)?;
    let j_bound = j_max.sqrt();
    Ok(LooScoreCheck { k, e_abs_rho, j_bound, holds: e_abs_rho <= j_bound + LOO_SLACK })
}

/// Rectangular probe lattice of `(u, x)` pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeLattice {
    pub u_range: (f64, f64),
    pub x_range: (f64, f64),
    pub points: usize,
}

impl Default for ProbeLattice {
    fn default() -> Self {
        Self { u_range: (-6.0, 6.0), x_range: (-6.0, 6.0), points: 200 }
    }
}

impl ProbeLattice {
    /// Default `u` range with `x` spanning `±6` standard deviations of `spec`.
    pub fn for_spec(spec: &DistributionSpec) -> Self {
        let s = 6.0 * spec.sd();
        Self { x_range: (-s, s), ..Self::default() }
    }

    fn axis(range: (f64, f64), points: usize) -> impl Iterator<Item = f64> {
        (0..points).map(move |i| range.0 + (range.1 - range.0) * i as f64 / (points - 1).max(1) as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IncrementCheck {
    pub max_violation: f64,
    pub max_ratio: f64,
}

/// Checks `|f(u + x/b) - f(u)| <= (√(8π)/b) (b ∧ |x|)` over the lattice.
pub fn check_increment_bound(sol: &SteinSolution, b_n: f64, lattice: &ProbeLattice) -> Result<IncrementCheck> {
    if !(b_n > 0.0) {
        return Err(Error::InvalidArgument(format!("b_n must be positive, got {b_n}")));
    }
    let c = (8.0 * PI).sqrt() / b_n;
    let mut max_violation: f64 = 0.0;
    let mut max_ratio: f64 = 0.0;
    for u in ProbeLattice::axis(lattice.u_range, lattice.points) {
        let fu = sol.f(u)?;
        for x in ProbeLattice::axis(lattice.x_range, lattice.points) {
            let lhs = (sol.f(u + x / b_n)? - fu).abs();
            let rhs = c * b_n.min(x.abs());
            max_violation = max_violation.max(lhs - rhs);
            if rhs > 0.0 {
                max_ratio = max_ratio.max(lhs / rhs);
            }
        }
    }
    Ok(IncrementCheck { max_violation, max_ratio })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncatedKernelCheck {
    /// `E[(b ∧ |X|) τ(X)]`
    pub lhs: f64,
    /// `E[|X|² (b ∧ |X|)]`
    pub rhs: f64,
    /// `E[b ∧ |X|] E[X²]`
    pub association_lhs: f64,
    pub holds: bool,
    pub association_holds: bool,
}

/// Truncated Stein-kernel moment and the association step.
pub fn check_truncated_kernel_moment(spec: &DistributionSpec, b: f64) -> Result<TruncatedKernelCheck> {
    if !spec.has_density() {
        return Err(Error::DisconnectedSupport(spec.family().name()));
    }
    if !(b >= 0.0) {
        return Err(Error::InvalidArgument(format!("truncation level must be >= 0, got {b}")));
    }
    let (lo, hi) = spec.range();
    let mut breaks = spec.breaks().to_vec();
    breaks.extend([-b, 0.0, b]);
    let lhs = if b == 0.0 {
        0.0
    } else {
        integrate_with_breaks(
            |x| b.min(x.abs()) * spec.kernel_numerator(x).unwrap_or(f64::NAN),
            lo,
            hi,
            &breaks,
            &QuadConfig::default().with_epsabs(1e-12),
        )?
    };
    let rhs = spec.truncated_third_moment(b)?;
    let association_lhs = expect_with_breaks(spec, &[-b, b], |x| b.min(x.abs()))? * spec.variance();
    Ok(TruncatedKernelCheck {
        lhs,
        rhs,
        association_lhs,
        holds: lhs <= rhs + 1e-6,
        association_holds: association_lhs <= rhs + 1e-6,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn constant_h_gives_zero_solution() {
        let h = TestFunction::custom(1.0, vec![], |_| 0.7);
        let sol = solve_stein(&h, &SteinGrid { half_width: 8.0, points: 161 }).unwrap();
        assert!(sol.sup_f() < 1e-12);
    }

    #[test]
    fn sign_solution_at_zero() {
        let sol = solve_stein(&TestFunction::sign(), &SteinGrid { half_width: 8.0, points: 161 }).unwrap();
        assert_abs_diff_eq!(sol.f(0.0).unwrap(), -(PI / 2.0).sqrt(), epsilon = 1e-8);
        assert!(sol.normal_expectation().abs() < 1e-15);
    }

    #[test]
    fn indicator_solution_closed_form() {
        // h = 1{x <= a}: for x <= a, f(x) = √(2π) e^{x²/2} Φ(x)(1 - Φ(a))
        let a = 0.4;
        let sol = solve_stein(&TestFunction::indicator(a), &SteinGrid { half_width: 4.0, points: 41 }).unwrap();
        for x in [-3.0_f64, -1.0, 0.0, 0.3] {
            let exact = crate::special::SQRT_2PI * (0.5 * x * x).exp() * crate::special::norm_cdf(x) * crate::special::norm_sf(a);
            assert_abs_diff_eq!(sol.f(x).unwrap(), exact, epsilon = 1e-11);
        }
    }

    #[test]
    fn residual_and_sup_bounds_for_random_h() {
        for h in TestFunction::random_piecewise_linear(7, 3) {
            let sol = solve_stein(&h, &SteinGrid { half_width: 8.0, points: 401 }).unwrap();
            assert!(sol.ode_residual(-8.0, 8.0, 80).unwrap() < 1e-6);
            assert!(sol.sup_f() <= SUP_F_BOUND + 1e-6);
            assert!(sol.sup_fprime() <= SUP_FPRIME_BOUND + 1e-6);
        }
    }

    #[test]
    fn solution_is_linear_in_centred_h() {
        let h = TestFunction::random_piecewise_linear(11, 1).remove(0);
        let g = SteinGrid { half_width: 6.0, points: 121 };
        let s1 = solve_stein(&h, &g).unwrap();
        let s2 = solve_stein(&h.scaled(2.0), &g).unwrap();
        for (a, b) in s1.f_values().iter().zip(s2.f_values()) {
            assert!((2.0 * a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn random_functions_are_reproducible_and_bounded() {
        let a = TestFunction::random_piecewise_linear(3, 4);
        let b = TestFunction::random_piecewise_linear(3, 4);
        for (ha, hb) in a.iter().zip(&b) {
            assert_eq!(ha.breaks(), hb.breaks());
            assert!(ha.bound <= 1.0);
            ha.check_bound(-10.0, 10.0, 1001).unwrap();
        }
    }

    #[test]
    fn piecewise_linear_rejects_bad_knots() {
        assert!(TestFunction::piecewise_linear(vec![0.0, 0.0], vec![1.0, 1.0]).is_err());
        assert!(TestFunction::piecewise_linear(vec![0.0, 1.0], vec![1.0]).is_err());
    }

    #[test]
    fn gaussian_ibp_closed_form() {
        // E[X sin X] = E[cos X] = e^{-1/2}
        let c = check_ibp_score(&DistributionSpec::normal(1.0).unwrap(), SmoothFn::Sin).unwrap();
        assert_abs_diff_eq!(c.lhs, -(-0.5_f64).exp(), epsilon = 1e-7);
        assert_abs_diff_eq!(c.rhs, -(-0.5_f64).exp(), epsilon = 1e-7);
    }

    #[test]
    fn laplace_tanh_ibp() {
        // both sides equal 1 - π/2
        let c = check_ibp_score(&DistributionSpec::laplace(1.0).unwrap(), SmoothFn::Tanh).unwrap();
        assert_abs_diff_eq!(c.lhs, -0.570_796_326_794_896_6, epsilon = 1e-8);
        assert!(c.gap < 1e-5);
    }

    #[test]
    fn constant_f_gives_zero_both_sides() {
        let spec = DistributionSpec::logistic(1.0).unwrap();
        let c = check_ibp_score(&spec, SmoothFn::Constant(3.0)).unwrap();
        assert!(c.lhs.abs() < 1e-8 && c.rhs == 0.0);
        let k = check_kernel_identity(&spec, SmoothFn::Constant(3.0)).unwrap();
        assert!(k.lhs.abs() < 1e-8 && k.rhs == 0.0);
    }

    #[test]
    fn kernel_identity_values() {
        let spec = DistributionSpec::logistic(1.0).unwrap();
        let c = check_kernel_identity(&spec, SmoothFn::Arctan).unwrap();
        assert_abs_diff_eq!(c.lhs, 1.464_887_882_012_673_5, epsilon = 1e-8);
        assert!(c.gap < 1e-5);
        let id = check_kernel_identity(&spec, SmoothFn::Identity).unwrap();
        assert_abs_diff_eq!(id.lhs, spec.variance(), epsilon = 1e-8);
        assert_abs_diff_eq!(id.rhs, spec.variance(), epsilon = 1e-6);
    }

    #[test]
    fn increment_bound_edge_cases() {
        let sol = solve_stein(&TestFunction::sign(), &SteinGrid { half_width: 8.0, points: 17 }).unwrap();
        let zero = ProbeLattice { u_range: (-2.0, 2.0), x_range: (0.0, 0.0), points: 5 };
        let r = check_increment_bound(&sol, 2.0, &zero).unwrap();
        assert!(r.max_violation <= 0.0);
        let big = ProbeLattice { u_range: (-3.0, 3.0), x_range: (3.0, 6.0), points: 15 };
        assert!(check_increment_bound(&sol, 1.5, &big).unwrap().max_violation <= 1e-6);
    }

    #[test]
    fn truncated_kernel_moment_values() {
        let lap = DistributionSpec::laplace(1.0).unwrap();
        let r = check_truncated_kernel_moment(&lap, 1.0).unwrap();
        assert_abs_diff_eq!(r.lhs, 1.528_482_235_314_230_7, epsilon = 1e-8);
        assert_abs_diff_eq!(r.rhs, 1.953_326_147_114_134_5, epsilon = 1e-8);
        assert_abs_diff_eq!(r.association_lhs, 1.264_241_117_657_115_4, epsilon = 1e-8);
        assert!(r.holds && r.association_holds);
        let z = check_truncated_kernel_moment(&lap, 0.0).unwrap();
        assert_eq!((z.lhs, z.rhs), (0.0, 0.0));
        let n = check_truncated_kernel_moment(&DistributionSpec::normal(1.0).unwrap(), f64::INFINITY).unwrap();
        assert_abs_diff_eq!(n.rhs, 2.0 * (2.0 / PI).sqrt(), epsilon = 1e-8);
        assert!(n.holds);
    }
}
