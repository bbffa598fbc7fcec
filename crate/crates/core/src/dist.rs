//! Summand laws: pointwise density, score, Fisher information, Stein kernel
//! and relative entropy.
//!
//! A [`DistributionSpec`] is an affine image `X = scale * Z + loc` of a base
//! law `Z` described by a [`Family`]. Construction always recentres so that
//! `E X = 0`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{integrate_with_breaks, QuadConfig};
use crate::special::{norm_interval, norm_pdf, norm_pdf_ms, LN_SQRT_2PI};

/// Densities at or below this value have no defined score.
pub const P_FLOOR: f64 = 1e-300;
/// Integration ranges are truncated where `p < TAIL_FLOOR * max p`.
pub const TAIL_FLOOR: f64 = 1e-16;
/// Fisher information above this cap is reported as divergent.
pub const J_MAX: f64 = 1e6;

// Half-width, in standard normal units, of the smoothing integral.
const SMOOTH_U_RANGE: f64 = 12.0;

pub type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A caller-supplied law. Densities are checked to integrate to one.
#[derive(Clone)]
pub struct CustomDensity {
    pub name: String,
    density: RealFn,
    score: Option<RealFn>,
    support: (f64, f64),
    mean: f64,
    variance: f64,
    absolutely_continuous: bool,
}

impl CustomDensity {
    /// `support` may have infinite ends. The law is treated as absolutely
    /// continuous unless the density is positive at a finite support end.
    pub fn new(
        name: impl Into<String>,
        density: impl Fn(f64) -> f64 + Send + Sync + 'static,
        support: (f64, f64),
        mean: f64,
        variance: f64,
    ) -> Self {
        let density: RealFn = Arc::new(density);
        let jump = |x: f64| x.is_finite() && density(x) > P_FLOOR;
        let absolutely_continuous = !(jump(support.0) || jump(support.1));
        Self {
            name: name.into(),
            density,
            score: None,
            support,
            mean,
            variance,
            absolutely_continuous,
        }
    }

    pub fn with_score(mut self, score: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.score = Some(Arc::new(score));
        self
    }

    /// Marks the density as having jumps in the interior of its support.
    pub fn non_smooth(mut self) -> Self {
        self.absolutely_continuous = false;
        self
    }
}

impl fmt::Debug for CustomDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomDensity")
            .field("name", &self.name)
            .field("support", &self.support)
            .field("mean", &self.mean)
            .field("variance", &self.variance)
            .finish_non_exhaustive()
    }
}

impl PartialEq for CustomDensity {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.density, &other.density) && self.support == other.support
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureComponent {
    pub weight: f64,
    pub mean: f64,
    pub sd: f64,
}

/// Base law of a summand before affine rescaling and centring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Family {
    Normal { sd: f64 },
    Laplace { scale: f64 },
    Logistic { scale: f64 },
    GaussianMixture { components: Vec<MixtureComponent> },
    /// `±1` with equal probability plus `delta * N`; `delta = 0` is the
    /// discrete Rademacher law.
    SmoothedRademacher { delta: f64 },
    /// Uniform on `[-half_width, half_width]` plus `delta * N`.
    SmoothedUniform { half_width: f64, delta: f64 },
    /// `base + delta * N` for bases without a closed-form convolution.
    Smoothed { base: Box<Family>, delta: f64 },
    #[serde(skip)]
    Custom(CustomDensity),
}

impl Family {
    pub fn name(&self) -> String {
        match self {
            Family::Normal { .. } => "normal".into(),
            Family::Laplace { .. } => "laplace".into(),
            Family::Logistic { .. } => "logistic".into(),
            Family::GaussianMixture { .. } => "gaussian_mixture".into(),
            Family::SmoothedRademacher { delta } if *delta == 0.0 => "rademacher".into(),
            Family::SmoothedRademacher { .. } => "smoothed_rademacher".into(),
            Family::SmoothedUniform { delta, .. } if *delta == 0.0 => "uniform".into(),
            Family::SmoothedUniform { .. } => "smoothed_uniform".into(),
            Family::Smoothed { base, .. } => format!("smoothed_{}", base.name()),
            Family::Custom(c) => c.name.clone(),
        }
    }

    fn validate(&self) -> Result<()> {
        let pos = |v: f64, what: &str| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidSpec(format!("{what} must be finite and positive, got {v}")))
            }
        };
        let nonneg = |v: f64, what: &str| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidSpec(format!("{what} must be finite and non-negative, got {v}")))
            }
        };
        match self {
            Family::Normal { sd } => pos(*sd, "normal sd"),
            Family::Laplace { scale } => pos(*scale, "laplace scale"),
            Family::Logistic { scale } => pos(*scale, "logistic scale"),
            Family::GaussianMixture { components } => {
                if components.is_empty() {
                    return Err(Error::InvalidSpec("mixture needs at least one component".into()));
                }
                for c in components {
                    pos(c.weight, "mixture weight")?;
                    pos(c.sd, "mixture sd")?;
                    if !c.mean.is_finite() {
                        return Err(Error::InvalidSpec("mixture mean must be finite".into()));
                    }
                }
                let total: f64 = components.iter().map(|c| c.weight).sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidSpec(format!("mixture weights sum to {total}, expected 1")));
                }
                Ok(())
            }
            Family::SmoothedRademacher { delta } => nonneg(*delta, "smoothing delta"),
            Family::SmoothedUniform { half_width, delta } => {
                pos(*half_width, "uniform half width")?;
                nonneg(*delta, "smoothing delta")
            }
            Family::Smoothed { base, delta } => {
                nonneg(*delta, "smoothing delta")?;
                base.validate()
            }
            Family::Custom(c) => {
                pos(c.variance, "custom variance")?;
                if !c.mean.is_finite() || !(c.support.0 < c.support.1) {
                    return Err(Error::InvalidSpec("custom law needs a finite mean and a non-empty support".into()));
                }
                Ok(())
            }
        }
    }

    /// Law of `Z + delta * N`, in closed form whenever the family allows it.
    pub fn convolve_gaussian(&self, delta: f64) -> Family {
        if delta == 0.0 {
            return self.clone();
        }
        match self {
            Family::Normal { sd } => Family::Normal { sd: sd.hypot(delta) },
            Family::GaussianMixture { components } => Family::GaussianMixture {
                components: components.iter().map(|c| MixtureComponent { sd: c.sd.hypot(delta), ..*c }).collect(),
            },
            Family::SmoothedRademacher { delta: d } => Family::SmoothedRademacher { delta: d.hypot(delta) },
            Family::SmoothedUniform { half_width, delta: d } => Family::SmoothedUniform {
                half_width: *half_width,
                delta: d.hypot(delta),
            },
            Family::Smoothed { base, delta: d } => base.convolve_gaussian(d.hypot(delta)),
            other => Family::Smoothed { base: Box::new(other.clone()), delta },
        }
    }

    /// Collapses `Smoothed` wrappers whose base has a closed-form convolution.
    fn normalized(&self) -> Family {
        match self {
            Family::Smoothed { base, delta } => {
                let base = base.normalized();
                match base {
                    Family::Laplace { .. } | Family::Logistic { .. } | Family::Custom(_) if *delta > 0.0 => {
                        Family::Smoothed { base: Box::new(base), delta: *delta }
                    }
                    b => b.convolve_gaussian(*delta),
                }
            }
            f => f.clone(),
        }
    }

    fn has_density(&self) -> bool {
        !matches!(self, Family::SmoothedRademacher { delta } if *delta == 0.0)
    }

    fn absolutely_continuous(&self) -> bool {
        match self {
            Family::SmoothedRademacher { delta } | Family::SmoothedUniform { delta, .. } => *delta > 0.0,
            Family::Smoothed { base, delta } => *delta > 0.0 || base.absolutely_continuous(),
            Family::Custom(c) => c.absolutely_continuous,
            _ => true,
        }
    }

    fn mean(&self) -> f64 {
        match self {
            Family::GaussianMixture { components } => components.iter().map(|c| c.weight * c.mean).sum(),
            Family::Smoothed { base, .. } => base.mean(),
            Family::Custom(c) => c.mean,
            _ => 0.0,
        }
    }

    fn variance(&self) -> f64 {
        match self {
            Family::Normal { sd } => sd * sd,
            Family::Laplace { scale } => 2.0 * scale * scale,
            Family::Logistic { scale } => std::f64::consts::PI.powi(2) * scale * scale / 3.0,
            Family::GaussianMixture { components } => {
                let m = self.mean();
                components.iter().map(|c| c.weight * (c.sd * c.sd + (c.mean - m).powi(2))).sum()
            }
            Family::SmoothedRademacher { delta } => 1.0 + delta * delta,
            Family::SmoothedUniform { half_width, delta } => half_width * half_width / 3.0 + delta * delta,
            Family::Smoothed { base, delta } => base.variance() + delta * delta,
            Family::Custom(c) => c.variance,
        }
    }

    fn support(&self) -> (f64, f64) {
        match self {
            Family::SmoothedUniform { half_width, delta } if *delta == 0.0 => (-half_width, *half_width),
            Family::SmoothedRademacher { delta } if *delta == 0.0 => (-1.0, 1.0),
            Family::Custom(c) => c.support,
            _ => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    /// Radius beyond which the density is monotone in |z - mean|.
    fn core_radius(&self) -> f64 {
        let m = self.mean();
        match self {
            Family::GaussianMixture { components } => components.iter().map(|c| (c.mean - m).abs()).fold(0.0, f64::max),
            Family::SmoothedRademacher { .. } => 1.0,
            Family::SmoothedUniform { half_width, .. } => *half_width,
            Family::Smoothed { base, .. } => base.core_radius(),
            _ => 0.0,
        }
    }

    /// Points where the density or its derivative may be irregular, or
    /// narrow features an adaptive rule should not step over.
    fn breaks(&self) -> Vec<f64> {
        match self {
            Family::Laplace { .. } => vec![0.0],
            Family::GaussianMixture { components } => components.iter().map(|c| c.mean).collect(),
            Family::SmoothedRademacher { .. } => vec![-1.0, 0.0, 1.0],
            Family::SmoothedUniform { half_width, .. } => vec![-half_width, 0.0, *half_width],
            Family::Smoothed { base, .. } => base.breaks(),
            Family::Custom(c) => [c.support.0, c.support.1].into_iter().filter(|x| x.is_finite()).collect(),
            _ => vec![],
        }
    }

    fn density(&self, z: f64) -> f64 {
        match self {
            Family::Normal { sd } => norm_pdf_ms(z, 0.0, *sd),
            Family::Laplace { scale } => (-z.abs() / scale).exp() / (2.0 * scale),
            Family::Logistic { scale } => {
                let e = (-z.abs() / scale).exp();
                e / (scale * (1.0 + e) * (1.0 + e))
            }
            Family::GaussianMixture { components } => components.iter().map(|c| c.weight * norm_pdf_ms(z, c.mean, c.sd)).sum(),
            Family::SmoothedRademacher { delta } => {
                if *delta == 0.0 {
                    0.0
                } else {
                    0.5 * (norm_pdf_ms(z, -1.0, *delta) + norm_pdf_ms(z, 1.0, *delta))
                }
            }
            Family::SmoothedUniform { half_width: a, delta } => {
                if *delta == 0.0 {
                    if z.abs() <= *a {
                        0.5 / a
                    } else {
                        0.0
                    }
                } else {
                    norm_interval((z - a) / delta, (z + a) / delta) / (2.0 * a)
                }
            }
            Family::Smoothed { base, delta } => smoothed_density(base, *delta, z),
            Family::Custom(c) => {
                if z < c.support.0 || z > c.support.1 {
                    0.0
                } else {
                    (c.density)(z).max(0.0)
                }
            }
        }
    }

    fn analytic_score(&self, z: f64) -> Option<f64> {
        match self {
            Family::Normal { sd } => Some(-z / (sd * sd)),
            Family::Laplace { scale } => Some(-sign(z) / scale),
            Family::Logistic { scale } => Some(-(z / (2.0 * scale)).tanh() / scale),
            Family::GaussianMixture { components } => {
                let logs: Vec<f64> = components
                    .iter()
                    .map(|c| c.weight.ln() - c.sd.ln() - 0.5 * ((z - c.mean) / c.sd).powi(2))
                    .collect();
                let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let (mut num, mut den) = (0.0, 0.0);
                for (c, l) in components.iter().zip(&logs) {
                    let w = (l - top).exp();
                    num += w * (c.mean - z) / (c.sd * c.sd);
                    den += w;
                }
                Some(num / den)
            }
            Family::SmoothedRademacher { delta } if *delta > 0.0 => {
                let v = delta * delta;
                Some(((z / v).tanh() - z) / v)
            }
            Family::SmoothedUniform { half_width: a, delta } if *delta > 0.0 => {
                let lo = (z - a) / delta;
                let hi = (z + a) / delta;
                let mass = norm_interval(lo, hi);
                Some((norm_pdf(hi) - norm_pdf(lo)) / (delta * mass))
            }
            Family::Custom(c) => c.score.as_ref().map(|s| s(z)),
            _ => None,
        }
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn smoothed_density(base: &Family, delta: f64, z: f64) -> f64 {
    if delta == 0.0 {
        return base.density(z);
    }
    let (s0, s1) = base.support();
    let lo = if s1.is_finite() { ((z - s1) / delta).max(-SMOOTH_U_RANGE) } else { -SMOOTH_U_RANGE };
    let hi = if s0.is_finite() { ((z - s0) / delta).min(SMOOTH_U_RANGE) } else { SMOOTH_U_RANGE };
    if lo >= hi {
        return 0.0;
    }
    let breaks: Vec<f64> = base.breaks().iter().map(|b| (z - b) / delta).collect();
    let cfg = QuadConfig::relative().with_epsabs(1e-300);
    integrate_with_breaks(|u| base.density(z - delta * u) * norm_pdf(u), lo, hi, &breaks, &cfg)
        .unwrap_or(f64::NAN)
        .max(0.0)
}

/// Whether a score is analytic or obtained by differencing `log p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScoreProvenance {
    Analytic,
    NumericDifferentiation,
}

/// An evaluable score function `x -> p'(x) / p(x)`.
#[derive(Clone)]
pub struct ScoreFn {
    pub provenance: ScoreProvenance,
    eval: Arc<dyn Fn(f64) -> Result<f64> + Send + Sync>,
}

impl ScoreFn {
    pub fn new(provenance: ScoreProvenance, eval: impl Fn(f64) -> Result<f64> + Send + Sync + 'static) -> Self {
        Self { provenance, eval: Arc::new(eval) }
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        (self.eval)(x)
    }
}

impl fmt::Debug for ScoreFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScoreFn").field("provenance", &self.provenance).finish_non_exhaustive()
    }
}

/// A centred summand law `X = scale * Z + loc`.
#[derive(Debug, Clone)]
pub struct DistributionSpec {
    family: Family,
    scale: f64,
    loc: f64,
    // derived, in x coordinates
    variance: f64,
    range: (f64, f64),
    breaks: Vec<f64>,
}

impl PartialEq for DistributionSpec {
    fn eq(&self, other: &Self) -> bool {
        self.family == other.family && self.scale == other.scale && self.loc == other.loc
    }
}

impl DistributionSpec {
    pub fn new(family: Family) -> Result<Self> {
        Self::with_affine(family, 1.0)
    }

    fn with_affine(family: Family, scale: f64) -> Result<Self> {
        family.validate()?;
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::InvalidSpec(format!("scale must be finite and positive, got {scale}")));
        }
        let family = family.normalized();
        let loc = -scale * family.mean();
        let variance = scale * scale * family.variance();
        if !(variance.is_finite() && variance > 0.0) {
            return Err(Error::InvalidSpec(format!("variance must be finite and positive, got {variance}")));
        }
        let (zlo, zhi) = effective_range(&family);
        let breaks = family.breaks().into_iter().map(|z| scale * z + loc).collect();
        let spec = Self {
            scale,
            loc,
            variance,
            range: (scale * zlo + loc, scale * zhi + loc),
            breaks,
            family,
        };
        if let Family::Custom(c) = &spec.family {
            let mass = spec.expect(|_| 1.0)?;
            if (mass - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidSpec(format!("custom density '{}' integrates to {mass}, not 1", c.name)));
            }
        }
        Ok(spec)
    }

    pub fn normal(sd: f64) -> Result<Self> {
        Self::new(Family::Normal { sd })
    }

    pub fn laplace(scale: f64) -> Result<Self> {
        Self::new(Family::Laplace { scale })
    }

    pub fn logistic(scale: f64) -> Result<Self> {
        Self::new(Family::Logistic { scale })
    }

    pub fn smoothed_rademacher(delta: f64) -> Result<Self> {
        Self::new(Family::SmoothedRademacher { delta })
    }

    pub fn uniform(half_width: f64) -> Result<Self> {
        Self::new(Family::SmoothedUniform { half_width, delta: 0.0 })
    }

    pub fn gaussian_mixture(components: Vec<MixtureComponent>) -> Result<Self> {
        Self::new(Family::GaussianMixture { components })
    }

    pub fn custom(c: CustomDensity) -> Result<Self> {
        Self::new(Family::Custom(c))
    }

    /// Same family multiplied by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::with_affine(self.family.clone(), self.scale * factor)
    }

    /// Same family rescaled to standard deviation `sd`.
    pub fn with_sd(&self, sd: f64) -> Result<Self> {
        self.scaled(sd / self.sd())
    }

    /// Law of `X + delta * N` with `N` standard normal and independent.
    pub fn smoothed(&self, delta: f64) -> Result<Self> {
        if !(delta.is_finite() && delta >= 0.0) {
            return Err(Error::InvalidArgument(format!("smoothing delta must be >= 0, got {delta}")));
        }
        if delta == 0.0 {
            return Ok(self.clone());
        }
        Self::with_affine(self.family.convolve_gaussian(delta / self.scale), self.scale)
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn sd(&self) -> f64 {
        self.variance.sqrt()
    }

    /// Always zero after centring.
    pub fn mean(&self) -> f64 {
        0.0
    }

    /// Truncated integration range where `p >= TAIL_FLOOR * max p`.
    pub fn range(&self) -> (f64, f64) {
        self.range
    }

    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    pub fn support(&self) -> (f64, f64) {
        let (a, b) = self.family.support();
        (self.scale * a + self.loc, self.scale * b + self.loc)
    }

    pub fn has_density(&self) -> bool {
        self.family.has_density()
    }

    /// Absolutely continuous with a score defined almost everywhere.
    pub fn is_smooth(&self) -> bool {
        self.family.has_density() && self.family.absolutely_continuous()
    }

    /// Atoms of a discrete law (`(location, probability)`), empty otherwise.
    pub fn atoms(&self) -> Vec<(f64, f64)> {
        if self.family.has_density() {
            return vec![];
        }
        vec![(self.loc - self.scale, 0.5), (self.loc + self.scale, 0.5)]
    }

    pub fn density(&self, x: f64) -> f64 {
        self.family.density((x - self.loc) / self.scale) / self.scale
    }

    fn require_smooth(&self) -> Result<()> {
        if self.is_smooth() {
            Ok(())
        } else {
            Err(Error::NonSmoothDensity(self.family.name()))
        }
    }

    /// Numeric-diff step `max(1e-5, 1e-4 * sd)`.
    pub fn numeric_diff_step(&self) -> f64 {
        (1e-4 * self.sd()).max(1e-5)
    }

    /// Score by analytic formula when the family provides one.
    pub fn score(&self, x: f64) -> Result<f64> {
        self.require_smooth()?;
        let p = self.density(x);
        if !(p > P_FLOOR) {
            return Err(Error::ScoreUndefined { x, density: p });
        }
        match self.family.analytic_score((x - self.loc) / self.scale) {
            Some(s) => Ok(s / self.scale),
            None => self.score_numeric(x),
        }
    }

    /// Central difference of `log p`, regardless of analytic availability.
    pub fn score_numeric(&self, x: f64) -> Result<f64> {
        self.require_smooth()?;
        let h = self.numeric_diff_step();
        let (pm, pp) = (self.density(x - h), self.density(x + h));
        for (pt, p) in [(x - h, pm), (x + h, pp)] {
            if !(p > P_FLOOR) {
                return Err(Error::ScoreUndefined { x: pt, density: p });
            }
        }
        Ok((pp.ln() - pm.ln()) / (2.0 * h))
    }

    pub fn has_analytic_score(&self) -> bool {
        self.family.analytic_score(0.0).is_some()
    }

    pub fn score_fn(&self) -> Result<ScoreFn> {
        self.require_smooth()?;
        let provenance = if self.has_analytic_score() {
            ScoreProvenance::Analytic
        } else {
            ScoreProvenance::NumericDifferentiation
        };
        let spec = self.clone();
        Ok(ScoreFn::new(provenance, move |x| spec.score(x)))
    }

    /// `E g(X)` over the truncated range.
    pub fn expect(&self, g: impl Fn(f64) -> f64) -> Result<f64> {
        self.expect_on(g, self.range.0, self.range.1)
    }

    /// `E[g(X) 1{a < X < b}]`.
    pub fn expect_on(&self, g: impl Fn(f64) -> f64, a: f64, b: f64) -> Result<f64> {
        self.expect_on_with(g, a, b, &QuadConfig::default())
    }

    pub fn expect_on_with(&self, g: impl Fn(f64) -> f64, a: f64, b: f64, cfg: &QuadConfig) -> Result<f64> {
        let lo = a.max(self.range.0);
        let hi = b.min(self.range.1);
        if lo >= hi {
            return Ok(0.0);
        }
        integrate_with_breaks(
            |x| {
                let p = self.density(x);
                if p > 0.0 {
                    g(x) * p
                } else {
                    0.0
                }
            },
            lo,
            hi,
            &self.breaks,
            cfg,
        )
    }

    /// `J(X) = Var(X) * E[ρ(X)²]`, the standardised Fisher information plus one.
    pub fn fisher_j(&self) -> Result<f64> {
        self.require_smooth()?;
        let info = self.expect(|x| match self.score(x) {
            Ok(s) => s * s,
            Err(_) => 0.0,
        })?;
        let j = self.variance * info;
        if !j.is_finite() || j > J_MAX {
            return Err(Error::QuadratureDivergent(format!("Fisher information {j:e} exceeds cap {J_MAX:e}")));
        }
        if (1.0 - 1e-9..1.0).contains(&j) {
            return Ok(1.0);
        }
        Ok(j)
    }

    fn require_connected(&self) -> Result<()> {
        if self.has_density() {
            Ok(())
        } else {
            Err(Error::DisconnectedSupport(format!("{} is supported on isolated atoms", self.family.name())))
        }
    }

    /// `T(x) = ∫_x^∞ y p(y) dy`, the Stein kernel numerator `τ(x) p(x)`.
    pub fn kernel_numerator(&self, x: f64) -> Result<f64> {
        self.require_connected()?;
        let cfg = QuadConfig::relative();
        let (lo, hi) = self.range;
        if x >= 0.0 {
            self.expect_on_with(|y| y, x, hi, &cfg)
        } else {
            Ok(-self.expect_on_with(|y| y, lo, x, &cfg)?)
        }
    }

    /// Stein kernel `τ(x) = ∫_x^∞ y p(y) dy / p(x)`.
    pub fn stein_kernel(&self, x: f64) -> Result<f64> {
        self.require_connected()?;
        let p = self.density(x);
        if !(p > P_FLOOR) {
            return Err(Error::ScoreUndefined { x, density: p });
        }
        Ok(self.kernel_numerator(x)? / p)
    }

    /// Relative entropy from the normal law with the same mean and variance.
    pub fn relative_entropy(&self) -> Result<f64> {
        if !self.has_density() {
            return Err(Error::NoDensity(self.family.name()));
        }
        let v = self.variance;
        let ln_norm = 0.5 * v.ln() + LN_SQRT_2PI;
        let (lo, hi) = self.range;
        let d = integrate_with_breaks(
            |x| {
                let p = self.density(x);
                if p > P_FLOOR {
                    p * (p.ln() + x * x / (2.0 * v) + ln_norm)
                } else {
                    0.0
                }
            },
            lo,
            hi,
            &self.breaks,
            &QuadConfig::default(),
        )?;
        if !d.is_finite() {
            return Err(Error::QuadratureDivergent("relative entropy".into()));
        }
        Ok(d)
    }

    /// `(E cos tX, E sin tX)`.
    pub fn char_fn(&self, t: f64) -> Result<(f64, f64)> {
        if !self.has_density() {
            let atoms = self.atoms();
            return Ok((
                atoms.iter().map(|(a, w)| w * (t * a).cos()).sum(),
                atoms.iter().map(|(a, w)| w * (t * a).sin()).sum(),
            ));
        }
        Ok((self.expect(|x| (t * x).cos())?, self.expect(|x| (t * x).sin())?))
    }

    /// `E |X|^k`.
    pub fn abs_moment(&self, k: f64) -> Result<f64> {
        if !self.has_density() {
            return Ok(self.atoms().iter().map(|(a, w)| w * a.abs().powf(k)).sum());
        }
        self.expect(|x| x.abs().powf(k))
    }

    /// `E[X² 1{|X| > t}]`.
    pub fn tail_second_moment(&self, t: f64) -> Result<f64> {
        let t = t.abs();
        if !self.has_density() {
            return Ok(self.atoms().iter().filter(|(a, _)| a.abs() > t).map(|(a, w)| w * a * a).sum());
        }
        let cfg = QuadConfig::relative().with_epsabs(1e-15 * self.variance);
        if t < self.sd() {
            let inner = self.expect_on_with(|x| x * x, -t, t, &cfg)?;
            Ok((self.variance - inner).max(0.0))
        } else {
            let (lo, hi) = self.range;
            Ok(self.expect_on_with(|x| x * x, lo, -t, &cfg)? + self.expect_on_with(|x| x * x, t, hi, &cfg)?)
        }
    }

    /// `E[|X|^power 1{a < |X| <= b}]` for `0 <= a <= b`.
    pub fn abs_moment_between(&self, power: f64, a: f64, b: f64) -> Result<f64> {
        if !self.has_density() {
            return Ok(self
                .atoms()
                .iter()
                .filter(|(x, _)| x.abs() > a && x.abs() <= b)
                .map(|(x, w)| w * x.abs().powf(power))
                .sum());
        }
        let g = |x: f64| x.abs().powf(power);
        Ok(self.expect_on(g, -b, -a)? + self.expect_on(g, a, b)?)
    }

    /// `E[X² (b ∧ |X|)]`.
    pub fn truncated_third_moment(&self, b: f64) -> Result<f64> {
        if !self.has_density() {
            return Ok(self.atoms().iter().map(|(a, w)| w * a * a * b.min(a.abs())).sum());
        }
        let (lo, hi) = self.range;
        let mut breaks = self.breaks.clone();
        breaks.extend([-b, b]);
        integrate_with_breaks(
            |x| {
                let p = self.density(x);
                if p > 0.0 {
                    x * x * b.min(x.abs()) * p
                } else {
                    0.0
                }
            },
            lo,
            hi,
            &breaks,
            &QuadConfig::default(),
        )
    }

    /// A stable identifier for caching identical laws.
    pub fn cache_key(&self) -> String {
        match &self.family {
            Family::Custom(c) => format!("custom:{:p}:{}:{}", Arc::as_ptr(&c.density), self.scale, self.loc),
            f => format!("{f:?}:{}:{}", self.scale, self.loc),
        }
    }
}

/// Truncated integration range of the base law.
fn effective_range(family: &Family) -> (f64, f64) {
    let (s0, s1) = family.support();
    let mean = family.mean();
    let sd = family.variance().sqrt();
    let core = family.core_radius();
    let probe = core + 4.0 * sd;
    let pmax = (0..=2000)
        .map(|i| family.density(mean - probe + 2.0 * probe * i as f64 / 2000.0))
        .fold(0.0, f64::max);
    let floor = (TAIL_FLOOR * pmax).max(P_FLOOR);
    let step = 0.25 * sd;
    let walk = |dir: f64, limit: f64| -> f64 {
        if limit.is_finite() {
            return limit;
        }
        let mut x = mean + dir * core;
        for _ in 0..100_000 {
            x += dir * step;
            if family.density(x) < floor {
                return x;
            }
        }
        x
    };
    (walk(-1.0, s0), walk(1.0, s1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn suite() -> Vec<DistributionSpec> {
        vec![
            DistributionSpec::normal(1.3).unwrap(),
            DistributionSpec::laplace(1.0).unwrap(),
            DistributionSpec::logistic(0.7).unwrap(),
            DistributionSpec::smoothed_rademacher(0.5).unwrap(),
            DistributionSpec::gaussian_mixture(vec![
                MixtureComponent { weight: 0.3, mean: -1.0, sd: 0.6 },
                MixtureComponent { weight: 0.7, mean: 2.0, sd: 0.8 },
            ])
            .unwrap(),
            DistributionSpec::new(Family::SmoothedUniform { half_width: 1.5, delta: 0.4 }).unwrap(),
        ]
    }

    #[test]
    fn density_reference_values() {
        assert_abs_diff_eq!(DistributionSpec::normal(1.0).unwrap().density(0.0), 0.398_942_280_401_432_7, epsilon = 1e-15);
        assert_abs_diff_eq!(DistributionSpec::laplace(1.0).unwrap().density(0.0), 0.5, epsilon = 1e-15);
        // ½φ_{0.5}(−1) + ½φ_{0.5}(1), mpmath
        assert_abs_diff_eq!(
            DistributionSpec::smoothed_rademacher(0.5).unwrap().density(0.0),
            0.107_981_933_026_376_1,
            epsilon = 1e-15
        );
    }

    #[test]
    fn centring_is_automatic() {
        let mix = DistributionSpec::gaussian_mixture(vec![
            MixtureComponent { weight: 0.25, mean: 3.0, sd: 1.0 },
            MixtureComponent { weight: 0.75, mean: 5.0, sd: 1.0 },
        ])
        .unwrap();
        assert!(mix.expect(|x| x).unwrap().abs() < 1e-10);
        assert_abs_diff_eq!(mix.variance(), 1.0 + 0.75, epsilon = 1e-12);
    }

    #[test]
    fn densities_integrate_to_one() {
        for s in suite() {
            assert_abs_diff_eq!(s.expect(|_| 1.0).unwrap(), 1.0, epsilon = 1e-9);
            assert_abs_diff_eq!(s.expect(|x| x * x).unwrap(), s.variance(), epsilon = 1e-8);
        }
    }

    #[test]
    fn analytic_scores() {
        assert_abs_diff_eq!(DistributionSpec::normal(1.0).unwrap().score(1.5).unwrap(), -1.5, epsilon = 1e-15);
        assert_abs_diff_eq!(DistributionSpec::laplace(1.0).unwrap().score(0.7).unwrap(), -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(DistributionSpec::logistic(1.0).unwrap().score(0.0).unwrap(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn numeric_score_matches_analytic() {
        for s in suite() {
            let (lo, hi) = (-3.0 * s.sd(), 3.0 * s.sd());
            for i in 0..100 {
                let x = lo + (hi - lo) * (i as f64 + 0.5) / 100.0;
                if matches!(s.family(), Family::Laplace { .. }) && x.abs() < 2.0 * s.numeric_diff_step() {
                    continue;
                }
                let a = s.score(x).unwrap();
                let n = s.score_numeric(x).unwrap();
                assert!((a - n).abs() < 1e-5, "{:?} at {x}: {a} vs {n}", s.family());
            }
        }
    }

    #[test]
    fn score_integration_by_parts_consequences() {
        for s in suite() {
            let e_rho = s.expect(|x| s.score(x).unwrap_or(0.0)).unwrap();
            let e_xrho = s.expect(|x| x * s.score(x).unwrap_or(0.0)).unwrap();
            assert!(e_rho.abs() < 1e-6, "{:?}: {e_rho}", s.family());
            assert!((e_xrho + 1.0).abs() < 1e-5, "{:?}: {e_xrho}", s.family());
        }
    }

    #[test]
    fn fisher_information_values() {
        assert_abs_diff_eq!(DistributionSpec::normal(2.5).unwrap().fisher_j().unwrap(), 1.0, epsilon = 1e-8);
        assert_abs_diff_eq!(DistributionSpec::laplace(1.0).unwrap().fisher_j().unwrap(), 2.0, epsilon = 1e-6);
        // π²/9, mpmath quadrature agrees to 30 digits
        assert_abs_diff_eq!(DistributionSpec::logistic(1.0).unwrap().fisher_j().unwrap(), 1.096_622_711_232_151, epsilon = 1e-8);
        assert_abs_diff_eq!(
            DistributionSpec::smoothed_rademacher(0.5).unwrap().fisher_j().unwrap(),
            3.628_051_824_185_223_7,
            epsilon = 1e-7
        );
        for s in suite() {
            assert!(s.fisher_j().unwrap() >= 1.0 - 1e-9);
        }
    }

    #[test]
    fn non_smooth_laws_reject_score() {
        let u = DistributionSpec::uniform(1.0).unwrap();
        assert!(matches!(u.score(0.2), Err(Error::NonSmoothDensity(_))));
        assert!(matches!(u.fisher_j(), Err(Error::NonSmoothDensity(_))));
        let r = DistributionSpec::smoothed_rademacher(0.0).unwrap();
        assert!(matches!(r.fisher_j(), Err(Error::NonSmoothDensity(_))));
        assert!(matches!(r.stein_kernel(0.0), Err(Error::DisconnectedSupport(_))));
    }

    #[test]
    fn score_undefined_in_far_tail() {
        let n = DistributionSpec::normal(1.0).unwrap();
        assert!(matches!(n.score(50.0), Err(Error::ScoreUndefined { .. })));
    }

    #[test]
    fn stein_kernel_closed_forms() {
        let n = DistributionSpec::normal(1.7).unwrap();
        for x in [-3.0, -0.4, 0.0, 1.1, 4.0] {
            assert_abs_diff_eq!(n.stein_kernel(x).unwrap(), 1.7 * 1.7, epsilon = 1e-9);
        }
        let u = DistributionSpec::uniform(1.0).unwrap();
        assert_abs_diff_eq!(u.stein_kernel(0.3).unwrap(), 0.455, epsilon = 1e-12);
        // Laplace(b): τ(x) = b(|x| + b)
        let l = DistributionSpec::laplace(0.8).unwrap();
        for x in [-2.0, -0.1, 0.5, 3.0] {
            assert_abs_diff_eq!(l.stein_kernel(x).unwrap(), 0.8 * (x.abs() + 0.8), epsilon = 1e-9);
        }
    }

    #[test]
    fn stein_kernel_mean_is_variance() {
        for s in suite() {
            let e_tau = s.expect(|x| s.kernel_numerator(x).unwrap() / s.density(x)).unwrap();
            assert!((e_tau - s.variance()).abs() < 1e-6, "{:?}: {e_tau} vs {}", s.family(), s.variance());
            for i in 0..20 {
                let x = -2.0 * s.sd() + 4.0 * s.sd() * i as f64 / 19.0;
                assert!(s.stein_kernel(x).unwrap() >= -1e-12);
            }
        }
    }

    #[test]
    fn relative_entropy_values() {
        assert!(DistributionSpec::normal(0.3).unwrap().relative_entropy().unwrap().abs() < 1e-12);
        // ½ ln π − ½
        assert_abs_diff_eq!(DistributionSpec::laplace(2.0).unwrap().relative_entropy().unwrap(), 0.072_364_942_924_700_1, epsilon = 1e-9);
        assert_abs_diff_eq!(DistributionSpec::logistic(1.0).unwrap().relative_entropy().unwrap(), 0.014_362_274_720_018_07, epsilon = 1e-9);
        assert_abs_diff_eq!(
            DistributionSpec::smoothed_rademacher(0.5).unwrap().relative_entropy().unwrap(),
            0.171_998_762_480_183_2,
            epsilon = 1e-9
        );
        for s in suite() {
            let d = s.relative_entropy().unwrap();
            let j = s.fisher_j().unwrap();
            assert!(d >= -1e-12 && d <= (j - 1.0) / 2.0 + 1e-6, "{:?}: D={d}, J={j}", s.family());
        }
    }

    #[test]
    fn custom_density_checks_mass() {
        let ok = CustomDensity::new("tri", |x: f64| (1.0 - x.abs()).max(0.0), (-1.0, 1.0), 0.0, 1.0 / 6.0);
        let spec = DistributionSpec::custom(ok).unwrap();
        assert!(spec.is_smooth());
        assert_abs_diff_eq!(spec.expect(|x| x * x).unwrap(), 1.0 / 6.0, epsilon = 1e-12);
        let bad = CustomDensity::new("half", |x: f64| 0.5 * (-x * x / 2.0).exp() / crate::special::SQRT_2PI, (f64::NEG_INFINITY, f64::INFINITY), 0.0, 1.0);
        assert!(matches!(DistributionSpec::custom(bad), Err(Error::InvalidSpec(_))));
        let box_law = CustomDensity::new("box", |_| 0.5, (-1.0, 1.0), 0.0, 1.0 / 3.0);
        assert!(!DistributionSpec::custom(box_law).unwrap().is_smooth());
    }

    #[test]
    fn smoothing_closed_forms_and_quadrature_agree() {
        let lap = DistributionSpec::laplace(1.0).unwrap();
        let sm = lap.smoothed(1.0).unwrap();
        assert_abs_diff_eq!(sm.variance(), 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sm.expect(|x| x * x).unwrap(), 3.0, epsilon = 1e-8);
        // closed form of Laplace(1) * N(0,1) at 0: ½ e^{1/2} erfc(1/√2)
        let exact = 0.5 * 0.5_f64.exp() * libm::erfc(std::f64::consts::FRAC_1_SQRT_2);
        assert_abs_diff_eq!(sm.density(0.0), exact, epsilon = 1e-12);
        let r = DistributionSpec::smoothed_rademacher(0.0).unwrap().smoothed(0.5).unwrap();
        assert_eq!(r.family(), &Family::SmoothedRademacher { delta: 0.5 });
        assert!(r.is_smooth());
    }

    #[test]
    fn rescaling_preserves_standardised_quantities() {
        let l = DistributionSpec::logistic(1.0).unwrap();
        let l3 = l.with_sd(3.0).unwrap();
        assert_abs_diff_eq!(l3.variance(), 9.0, epsilon = 1e-12);
        assert_abs_diff_eq!(l3.fisher_j().unwrap(), l.fisher_j().unwrap(), epsilon = 1e-9);
        assert_abs_diff_eq!(l3.relative_entropy().unwrap(), l.relative_entropy().unwrap(), epsilon = 1e-9);
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(DistributionSpec::normal(0.0).is_err());
        assert!(DistributionSpec::laplace(-1.0).is_err());
        assert!(DistributionSpec::gaussian_mixture(vec![MixtureComponent { weight: 0.4, mean: 0.0, sd: 1.0 }]).is_err());
        assert!(DistributionSpec::smoothed_rademacher(f64::NAN).is_err());
    }
}
