//! Exact grid densities of normalized sums by FFT convolution.
//!
//! All grids are uniform with node `i` at `(i - m/2) * step`, so zero is a
//! node and sums of node positions are again node positions. Linear
//! convolution is done in a zero-padded buffer of length `2m` with offsets
//! stored modulo the buffer length, which keeps the result aligned to the
//! same grid.

use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::dist::{DistributionSpec, ScoreFn, ScoreProvenance, P_FLOOR};
use crate::error::{Error, Result};
use crate::quad::QuadConfig;

/// Mass allowed to fall outside the grid or be clipped as ringing.
pub const MASS_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Number of nodes, a power of two.
    pub m: usize,
    /// Half-width of the grid in standard deviations of the gridded law.
    pub extent_sigmas: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { m: 1 << 14, extent_sigmas: 16.0 }
    }
}

impl GridConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m < 16 || !self.m.is_power_of_two() {
            return Err(Error::InvalidArgument(format!("grid size m = {} must be a power of two >= 16", self.m)));
        }
        if !(self.extent_sigmas.is_finite() && self.extent_sigmas > 0.0) {
            return Err(Error::InvalidArgument(format!("extent_sigmas = {} must be positive", self.extent_sigmas)));
        }
        Ok(())
    }

    /// Node layout for a centred law with standard deviation `sd`.
    pub fn layout(&self, sd: f64) -> Result<GridLayout> {
        self.validate()?;
        let half = (self.m / 2) as f64;
        let step = self.extent_sigmas * sd / (half - 1.0);
        Ok(GridLayout { m: self.m, step })
    }
}

/// A centred uniform grid: node `i` sits at `(i - m/2) * step`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridLayout {
    pub m: usize,
    pub step: f64,
}

impl GridLayout {
    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        (i as f64 - (self.m / 2) as f64) * self.step
    }

    pub fn lo(&self) -> f64 {
        self.x(0)
    }

    pub fn hi(&self) -> f64 {
        self.x(self.m - 1)
    }
}

/// A probability density sampled on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDensity {
    layout: GridLayout,
    values: Vec<f64>,
    mean: f64,
    variance: f64,
    tail_mass: f64,
    clipped_mass: f64,
}

fn trapezoid(values: &[f64], step: f64) -> f64 {
    let n = values.len();
    let inner: f64 = values.iter().sum();
    step * (inner - 0.5 * (values[0] + values[n - 1]))
}

impl GridDensity {
    /// Wraps raw values, clipping negatives and renormalizing to unit mass.
    /// `tail_mass` is the mass known to lie outside the grid.
    pub fn from_values(layout: GridLayout, mut values: Vec<f64>, tail_mass: f64) -> Result<Self> {
        if values.len() != layout.m {
            return Err(Error::InvalidArgument(format!("expected {} values, got {}", layout.m, values.len())));
        }
        let mut clipped = 0.0;
        for v in values.iter_mut() {
            if !v.is_finite() {
                return Err(Error::InvalidArgument("non-finite density value".into()));
            }
            if *v < 0.0 {
                clipped -= *v;
                *v = 0.0;
            }
        }
        clipped *= layout.step;
        if clipped > MASS_TOLERANCE {
            return Err(Error::RingingError { clipped });
        }
        let mass = trapezoid(&values, layout.step);
        if !(mass > 0.0) {
            return Err(Error::InvalidArgument("density has no mass on the grid".into()));
        }
        let tail_mass = tail_mass.max(0.0);
        if tail_mass > MASS_TOLERANCE {
            return Err(Error::GridTooSmall { lo: layout.lo(), hi: layout.hi(), lost_mass: tail_mass });
        }
        values.iter_mut().for_each(|v| *v /= mass);
        let mut d = Self { layout, values, mean: 0.0, variance: 0.0, tail_mass, clipped_mass: clipped };
        d.mean = d.expect(|x| x);
        let mean = d.mean;
        d.variance = d.expect(|x| (x - mean) * (x - mean));
        Ok(d)
    }

    /// Pointwise samples of `X / divisor`.
    pub fn sample(spec: &DistributionSpec, divisor: f64, layout: GridLayout) -> Result<Self> {
        if !spec.has_density() {
            return Err(Error::NoDensity(spec.family().name()));
        }
        let (a, b) = (divisor * layout.lo(), divisor * layout.hi());
        let (r0, r1) = spec.range();
        let cfg = QuadConfig::relative().with_epsabs(1e-14);
        let mut outside = 0.0;
        if r0 < a {
            outside += spec.expect_on_with(|_| 1.0, r0, a, &cfg)?;
        }
        if r1 > b {
            outside += spec.expect_on_with(|_| 1.0, b, r1, &cfg)?;
        }
        if outside > MASS_TOLERANCE {
            return Err(Error::GridTooSmall { lo: layout.lo(), hi: layout.hi(), lost_mass: outside });
        }
        let values = (0..layout.m).map(|i| divisor * spec.density(divisor * layout.x(i))).collect();
        Self::from_values(layout, values, outside)
    }

    /// Standard normal density on `layout`.
    pub fn standard_normal(layout: GridLayout) -> Result<Self> {
        Self::sample(&DistributionSpec::normal(1.0)?, 1.0, layout)
    }

    pub fn layout(&self) -> GridLayout {
        self.layout
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn m(&self) -> usize {
        self.layout.m
    }

    pub fn step(&self) -> f64 {
        self.layout.step
    }

    pub fn lo(&self) -> f64 {
        self.layout.lo()
    }

    pub fn hi(&self) -> f64 {
        self.layout.hi()
    }

    pub fn x(&self, i: usize) -> f64 {
        self.layout.x(i)
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    /// Mass known to lie outside the grid (before renormalization).
    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    pub fn clipped_mass(&self) -> f64 {
        self.clipped_mass
    }

    pub fn mass(&self) -> f64 {
        trapezoid(&self.values, self.layout.step)
    }

    /// Trapezoid rule for `E g(X)`.
    pub fn expect(&self, g: impl Fn(f64) -> f64) -> f64 {
        let h = self.layout.step;
        let m = self.layout.m;
        let mut s = 0.0;
        for (i, v) in self.values.iter().enumerate() {
            let w = if i == 0 || i == m - 1 { 0.5 } else { 1.0 };
            s += w * g(self.layout.x(i)) * v;
        }
        s * h
    }

    /// Linear interpolation, zero off the grid.
    pub fn density_at(&self, x: f64) -> f64 {
        let t = (x - self.lo()) / self.step();
        if !(t >= 0.0) || t > (self.m() - 1) as f64 {
            return 0.0;
        }
        let i = (t.floor() as usize).min(self.m() - 2);
        let f = t - i as f64;
        self.values[i] * (1.0 - f) + self.values[i + 1] * f
    }

    pub fn max_abs_diff(&self, other: &GridDensity) -> Result<f64> {
        if self.layout != other.layout {
            return Err(Error::GridMismatch("layouts differ".into()));
        }
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
    }
}

/// An ordered list of summands with their variance profile.
#[derive(Debug, Clone, PartialEq)]
pub struct SumSequence {
    specs: Vec<DistributionSpec>,
    variances: Vec<f64>,
}

impl SumSequence {
    pub fn new(specs: Vec<DistributionSpec>) -> Result<Self> {
        if specs.is_empty() {
            return Err(Error::DegenerateSum("a sum needs at least one summand".into()));
        }
        let variances = specs.iter().map(DistributionSpec::variance).collect();
        Ok(Self { specs, variances })
    }

    /// `n` independent copies of `spec`.
    pub fn iid(spec: DistributionSpec, n: usize) -> Result<Self> {
        Self::new(vec![spec; n])
    }

    pub fn len(&self) -> usize {
        self.specs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.specs.is_empty()
    }

    pub fn specs(&self) -> &[DistributionSpec] {
        &self.specs
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    /// Distinct summand laws with their multiplicities, in first-seen order.
    pub fn distinct(&self) -> Vec<(&DistributionSpec, usize)> {
        let mut index: HashMap<String, usize> = HashMap::new();
        let mut out: Vec<(&DistributionSpec, usize)> = Vec::new();
        for s in &self.specs {
            match index.get(&s.cache_key()) {
                Some(&i) => out[i].1 += 1,
                None => {
                    index.insert(s.cache_key(), out.len());
                    out.push((s, 1));
                }
            }
        }
        out
    }

    /// The first `n` summands.
    pub fn prefix(&self, n: usize) -> Result<Self> {
        if n == 0 || n > self.len() {
            return Err(Error::InvalidArgument(format!("prefix length {n} outside 1..={}", self.len())));
        }
        Self::new(self.specs[..n].to_vec())
    }

    /// `b_n = sqrt(σ_1² + ... + σ_n²)`.
    pub fn b_n(&self) -> f64 {
        self.variances.iter().sum::<f64>().sqrt()
    }

    /// `b_{k,n} = sqrt(b_n² - σ_k²)`, with `k` zero-based.
    pub fn b_loo(&self, k: usize) -> f64 {
        let others: f64 = self.variances.iter().enumerate().filter(|&(i, _)| i != k).map(|(_, v)| v).sum();
        others.sqrt()
    }

    /// Every summand rescaled by `lambda`.
    pub fn scaled(&self, lambda: f64) -> Result<Self> {
        Self::new(self.specs.iter().map(|s| s.scaled(lambda)).collect::<Result<_>>()?)
    }

    /// Every summand replaced by `X_k + delta * N_k`.
    pub fn smoothed(&self, delta: f64) -> Result<Self> {
        Self::new(self.specs.iter().map(|s| s.smoothed(delta)).collect::<Result<_>>()?)
    }
}

/// Zero-padded linear convolution on a fixed layout.
struct Convolver {
    layout: GridLayout,
    len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Convolver {
    fn new(layout: GridLayout) -> Self {
        let len = 2 * layout.m;
        let mut planner = FftPlanner::new();
        Self {
            layout,
            len,
            forward: planner.plan_fft_forward(len),
            inverse: planner.plan_fft_inverse(len),
        }
    }

    fn slot(&self, i: usize) -> usize {
        let off = i as isize - (self.layout.m / 2) as isize;
        off.rem_euclid(self.len as isize) as usize
    }

    fn spectrum(&self, values: &[f64]) -> Vec<Complex64> {
        let mut buf = vec![Complex64::new(0.0, 0.0); self.len];
        for (i, v) in values.iter().enumerate() {
            buf[self.slot(i)] = Complex64::new(*v, 0.0);
        }
        self.forward.process(&mut buf);
        buf
    }

    /// Inverse transform of a product spectrum, read back on the grid.
    /// Returns the values and the raw mass that landed off the grid.
    fn back(&self, mut spec: Vec<Complex64>) -> (Vec<f64>, f64) {
        self.inverse.process(&mut spec);
        let scale = 1.0 / self.len as f64;
        let total: f64 = spec.iter().map(|c| c.re).sum::<f64>() * scale * self.layout.step;
        let values: Vec<f64> = (0..self.layout.m).map(|i| spec[self.slot(i)].re * scale).collect();
        let on_grid = values.iter().sum::<f64>() * self.layout.step;
        (values, (total - on_grid).max(0.0))
    }

    fn convolve(&self, acc: &[f64], rhs: &[Complex64]) -> (Vec<f64>, f64) {
        let h = self.layout.step;
        let mut s = self.spectrum(acc);
        s.iter_mut().zip(rhs).for_each(|(a, b)| *a *= *b * h);
        self.back(s)
    }

    /// Signed angular frequency of FFT bin `k`.
    fn omega(&self, k: usize) -> f64 {
        let kk = if k <= self.len / 2 { k as f64 } else { k as f64 - self.len as f64 };
        2.0 * std::f64::consts::PI * kk / (self.len as f64 * self.layout.step)
    }
}

/// Density of `(Σ X_i) / divisor` on `layout`, one sample and spectrum per
/// distinct law.
fn fold_density(specs: &[&DistributionSpec], divisor: f64, layout: GridLayout) -> Result<GridDensity> {
    let mut samples: HashMap<String, GridDensity> = HashMap::new();
    let mut order = Vec::with_capacity(specs.len());
    for s in specs {
        let key = s.cache_key();
        if !samples.contains_key(&key) {
            samples.insert(key.clone(), GridDensity::sample(s, divisor, layout)?);
        }
        order.push(key);
    }
    let first = &samples[&order[0]];
    if order.len() == 1 {
        return Ok(first.clone());
    }
    let conv = Convolver::new(layout);
    let spectra: HashMap<&String, Vec<Complex64>> = samples.iter().map(|(k, g)| (k, conv.spectrum(&g.values))).collect();
    let mut tail: f64 = order.iter().map(|k| samples[k].tail_mass).sum();
    let mut acc = first.values.clone();
    for key in &order[1..] {
        let (next, lost) = conv.convolve(&acc, &spectra[key]);
        tail += lost;
        acc = next;
    }
    GridDensity::from_values(layout, acc, tail)
}

/// Density of `S_n = (X_1 + ... + X_n) / b_n`.
pub fn sum_density(seq: &SumSequence, cfg: &GridConfig) -> Result<GridDensity> {
    let layout = cfg.layout(1.0)?;
    let specs: Vec<&DistributionSpec> = seq.specs().iter().collect();
    fold_density(&specs, seq.b_n(), layout)
}

/// Density of `S_{k,n} = (Σ_{i≠k} X_i) / b_{k,n}`; `k` is zero-based.
pub fn leave_one_out_density(seq: &SumSequence, k: usize, cfg: &GridConfig) -> Result<GridDensity> {
    if seq.len() < 2 {
        return Err(Error::DegenerateSum("leave-one-out needs n >= 2".into()));
    }
    if k >= seq.len() {
        return Err(Error::InvalidArgument(format!("index {k} outside 0..{}", seq.len())));
    }
    let layout = cfg.layout(1.0)?;
    let specs: Vec<&DistributionSpec> = seq.specs().iter().enumerate().filter(|&(i, _)| i != k).map(|(_, s)| s).collect();
    fold_density(&specs, seq.b_loo(k), layout)
}

/// Grid density of `X + delta * N` for a single summand law.
pub fn gaussian_smooth_spec(spec: &DistributionSpec, delta: f64, cfg: &GridConfig) -> Result<GridDensity> {
    let smoothed = spec.smoothed(delta)?;
    let layout = cfg.layout(smoothed.sd())?;
    GridDensity::sample(&smoothed, 1.0, layout)
}

/// Convolves a grid density with `N(0, delta²)` through the exact Gaussian
/// Fourier multiplier, keeping the layout.
pub fn gaussian_smooth_grid(d: &GridDensity, delta: f64) -> Result<GridDensity> {
    if !(delta.is_finite() && delta >= 0.0) {
        return Err(Error::InvalidArgument(format!("smoothing delta must be >= 0, got {delta}")));
    }
    if delta == 0.0 {
        return Ok(d.clone());
    }
    let conv = Convolver::new(d.layout);
    let mut s = conv.spectrum(&d.values);
    for (k, c) in s.iter_mut().enumerate() {
        let w = conv.omega(k);
        *c *= (-0.5 * delta * delta * w * w).exp();
    }
    let (values, lost) = conv.back(s);
    GridDensity::from_values(d.layout, values, d.tail_mass + lost)
}

/// Central-difference score of a grid density.
#[derive(Debug, Clone)]
pub struct GridScore {
    layout: GridLayout,
    first: usize,
    last: usize,
    values: Vec<f64>,
}

impl GridScore {
    pub fn first_x(&self) -> f64 {
        self.layout.x(self.first)
    }

    pub fn last_x(&self) -> f64 {
        self.layout.x(self.last)
    }

    /// Score at node `i`, if inside the defined region.
    pub fn at(&self, i: usize) -> Option<f64> {
        (self.first..=self.last).contains(&i).then(|| self.values[i - self.first])
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        let t = (x - self.layout.lo()) / self.layout.step;
        if !(t >= self.first as f64 && t <= self.last as f64) {
            return Err(Error::ScoreUndefined { x, density: 0.0 });
        }
        let i = (t.floor() as usize).min(self.last.saturating_sub(1)).max(self.first);
        if i == self.last {
            return Ok(self.values[i - self.first]);
        }
        let f = t - i as f64;
        Ok(self.values[i - self.first] * (1.0 - f) + self.values[i + 1 - self.first] * f)
    }

    /// `E |ρ(X)|` under `d`.
    pub fn expect_abs(&self, d: &GridDensity) -> f64 {
        self.expect(d, f64::abs)
    }

    /// `E g(ρ(X))` under `d`, trapezoid over the defined region.
    pub fn expect(&self, d: &GridDensity, g: impl Fn(f64) -> f64) -> f64 {
        (self.first..=self.last).map(|i| g(self.values[i - self.first]) * d.values[i]).sum::<f64>() * self.layout.step
    }

    pub fn into_score_fn(self) -> ScoreFn {
        ScoreFn::new(ScoreProvenance::NumericDifferentiation, move |x| self.eval(x))
    }
}

/// Score `(log p)'` by central differences over the positive region
/// around the mode.
pub fn grid_score(d: &GridDensity) -> Result<GridScore> {
    let v = &d.values;
    let m = v.len();
    let mode = (0..m).fold(0, |best, i| if v[i] > v[best] { i } else { best });
    let mut a = mode;
    while a > 0 && v[a - 1] > P_FLOOR {
        a -= 1;
    }
    let mut b = mode;
    while b + 1 < m && v[b + 1] > P_FLOOR {
        b += 1;
    }
    let mass = trapezoid(&v[a..=b], d.step());
    if mass < 1.0 - 1e-6 {
        return Err(Error::ScoreUndefined { x: d.x(mode), density: v[mode] });
    }
    // interior nodes only: both neighbours positive
    let first = a + 1;
    let last = b - 1;
    let h2 = 2.0 * d.step();
    let values = (first..=last).map(|i| (v[i + 1].ln() - v[i - 1].ln()) / h2).collect();
    Ok(GridScore { layout: d.layout, first, last, values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::norm_pdf;
    use approx::assert_abs_diff_eq;

    fn small() -> GridConfig {
        GridConfig { m: 1 << 12, extent_sigmas: 16.0 }
    }

    #[test]
    fn layout_has_zero_node_and_covers_extent() {
        let l = GridConfig::default().layout(1.0).unwrap();
        assert_eq!(l.x(l.m / 2), 0.0);
        assert!(l.hi() >= 16.0 - 1e-12 && l.lo() <= -16.0);
        assert_abs_diff_eq!((l.hi() - l.lo()) / (l.m - 1) as f64, l.step, epsilon = 1e-15);
    }

    #[test]
    fn rejects_non_power_of_two() {
        assert!(GridConfig { m: 1000, extent_sigmas: 12.0 }.validate().is_err());
    }

    #[test]
    fn b_n_profile() {
        let specs = [1.0, 2.0, 2.0].iter().map(|&s| DistributionSpec::normal(s).unwrap()).collect();
        let seq = SumSequence::new(specs).unwrap();
        assert_abs_diff_eq!(seq.b_n(), 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(seq.b_loo(0), 8.0_f64.sqrt(), epsilon = 1e-15);
        assert!((0..3).all(|k| seq.b_loo(k) <= seq.b_n()));
    }

    #[test]
    fn iid_normals_stay_normal() {
        let seq = SumSequence::iid(DistributionSpec::normal(1.0).unwrap(), 5).unwrap();
        let d = sum_density(&seq, &GridConfig::default()).unwrap();
        let err = (0..d.m()).map(|i| (d.values()[i] - norm_pdf(d.x(i))).abs()).fold(0.0, f64::max);
        assert!(err < 1e-7, "{err}");
        for k in 0..5 {
            let l = leave_one_out_density(&seq, k, &small()).unwrap();
            let err = (0..l.m()).map(|i| (l.values()[i] - norm_pdf(l.x(i))).abs()).fold(0.0, f64::max);
            assert!(err < 1e-7);
        }
    }

    #[test]
    fn two_term_leave_one_out_is_rescaled_summand() {
        let seq = SumSequence::new(vec![DistributionSpec::laplace(1.0).unwrap(), DistributionSpec::logistic(2.0).unwrap()]).unwrap();
        let l = leave_one_out_density(&seq, 0, &small()).unwrap();
        let x2 = &seq.specs()[1];
        let direct = GridDensity::sample(x2, x2.sd(), small().layout(1.0).unwrap()).unwrap();
        assert!(l.max_abs_diff(&direct).unwrap() < 1e-15);
    }

    #[test]
    fn moments_of_heterogeneous_sums() {
        let specs = (1..=7)
            .map(|k| DistributionSpec::laplace(1.0).unwrap().with_sd(1.0 + (k % 3) as f64).unwrap())
            .collect();
        let seq = SumSequence::new(specs).unwrap();
        let d = sum_density(&seq, &GridConfig::default()).unwrap();
        assert_abs_diff_eq!(d.mass(), 1.0, epsilon = 1e-12);
        assert!(d.mean().abs() < 1e-8);
        assert_abs_diff_eq!(d.variance(), 1.0, epsilon = 1e-5);
        for k in 0..7 {
            let l = leave_one_out_density(&seq, k, &GridConfig::default()).unwrap();
            assert_abs_diff_eq!(l.variance(), 1.0, epsilon = 1e-5);
        }
    }

    #[test]
    fn degenerate_and_out_of_range() {
        let one = SumSequence::iid(DistributionSpec::normal(1.0).unwrap(), 1).unwrap();
        assert!(matches!(leave_one_out_density(&one, 0, &small()), Err(Error::DegenerateSum(_))));
        let two = SumSequence::iid(DistributionSpec::normal(1.0).unwrap(), 2).unwrap();
        assert!(leave_one_out_density(&two, 2, &small()).is_err());
        let atoms = SumSequence::iid(DistributionSpec::smoothed_rademacher(0.0).unwrap(), 3).unwrap();
        assert!(matches!(sum_density(&atoms, &small()), Err(Error::NoDensity(_))));
    }

    #[test]
    fn narrow_grid_is_reported() {
        let seq = SumSequence::iid(DistributionSpec::laplace(1.0).unwrap(), 2).unwrap();
        let cfg = GridConfig { m: 1 << 12, extent_sigmas: 4.0 };
        assert!(matches!(sum_density(&seq, &cfg), Err(Error::GridTooSmall { .. })));
    }

    #[test]
    fn smoothing_rademacher_matches_mixture() {
        let r = DistributionSpec::smoothed_rademacher(0.0).unwrap();
        let g = gaussian_smooth_spec(&r, 0.5, &GridConfig::default()).unwrap();
        let err = (0..g.m())
            .map(|i| {
                let x = g.x(i);
                (g.values()[i] - 0.5 * (norm_pdf((x + 1.0) / 0.5) + norm_pdf((x - 1.0) / 0.5)) / 0.5).abs()
            })
            .fold(0.0, f64::max);
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn smoothing_adds_variance_and_zero_is_identity() {
        let lap = DistributionSpec::laplace(1.0).unwrap();
        let cfg = GridConfig::default();
        let base = gaussian_smooth_spec(&lap, 0.0, &cfg).unwrap();
        assert_eq!(gaussian_smooth_grid(&base, 0.0).unwrap(), base);
        let g = gaussian_smooth_grid(&base, 1.0).unwrap();
        assert_abs_diff_eq!(g.variance(), 3.0, epsilon = 1e-5);
        let s = gaussian_smooth_spec(&lap, 1.0, &cfg).unwrap();
        assert_abs_diff_eq!(s.variance(), 3.0, epsilon = 1e-6);
    }

    #[test]
    fn gaussian_semigroup() {
        let lap = DistributionSpec::laplace(1.0).unwrap();
        let base = gaussian_smooth_spec(&lap, 0.0, &GridConfig::default()).unwrap();
        let two = gaussian_smooth_grid(&gaussian_smooth_grid(&base, 0.3).unwrap(), 0.4).unwrap();
        let one = gaussian_smooth_grid(&base, 0.5).unwrap();
        assert!(two.max_abs_diff(&one).unwrap() < 1e-7);
    }

    #[test]
    fn grid_score_of_normal() {
        let d = GridDensity::standard_normal(GridConfig::default().layout(1.0).unwrap()).unwrap();
        let s = grid_score(&d).unwrap();
        let mut worst: f64 = 0.0;
        for i in 0..d.m() {
            let x = d.x(i);
            if x.abs() <= 4.0 {
                worst = worst.max((s.at(i).unwrap() + x).abs());
            }
        }
        assert!(worst < 1e-4, "{worst}");
        assert!(s.expect(&d, |r| r).abs() < 1e-5);
        assert_abs_diff_eq!(s.expect_abs(&d), (2.0 / std::f64::consts::PI).sqrt(), epsilon = 1e-4);
        assert!(s.eval(d.hi() + 1.0).is_err());
    }

    #[test]
    fn grid_score_matches_analytic_family() {
        let spec = DistributionSpec::logistic(1.0).unwrap();
        let d = gaussian_smooth_spec(&spec, 0.0, &GridConfig::default()).unwrap();
        let score = grid_score(&d).unwrap();
        let sd = spec.sd();
        for i in 0..d.m() {
            let x = d.x(i);
            if x.abs() <= 3.0 * sd {
                assert!((score.at(i).unwrap() - spec.score(x).unwrap()).abs() < 1e-4);
            }
        }
    }
}
