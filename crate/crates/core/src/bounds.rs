//! The total-variation bound, its Kolmogorov-distance relatives, the
//! entropy inequality and the Lindeberg decomposition of `M_n`.

use std::collections::HashMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::dist::DistributionSpec;
use crate::error::{Error, Result};
use crate::metrics::{
    feller_ratio, kolmogorov_distance, lindeberg_functional, third_moment_ratio, truncated_moment, tv_distance,
    Reference,
};
use crate::sums::{sum_density, GridConfig, SumSequence};

/// Allowance for `tv_actual <= tv_bound`.
pub const BOUND_SLACK: f64 = 1e-6;

/// Why a bound is `+∞`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", content = "detail", rename_all = "snake_case")]
pub enum InfiniteReason {
    /// `max σ_k² / b_n² = 1`, e.g. a single summand.
    FellerDegenerate,
    /// A summand has no absolutely continuous density.
    NonSmooth(String),
    /// A Fisher information exceeds the finite cap.
    FisherCap(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Bound {
    Finite { value: f64 },
    Infinite { why: InfiniteReason },
}

impl Bound {
    pub fn value(&self) -> f64 {
        match self {
            Bound::Finite { value } => *value,
            Bound::Infinite { .. } => f64::INFINITY,
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, Bound::Finite { .. })
    }
}

/// Per-summand `J(X_k)`, `None` where it is infinite, plus the reason for
/// the first infinite one.
fn fisher_profile(seq: &SumSequence) -> Result<(Vec<Option<f64>>, Option<InfiniteReason>)> {
    let mut known: HashMap<String, Option<f64>> = HashMap::new();
    let mut why = None;
    for (spec, _) in seq.distinct() {
        let j = match spec.fisher_j() {
            Ok(j) => Some(j),
            Err(Error::NonSmoothDensity(name) | Error::NoDensity(name)) => {
                why.get_or_insert(InfiniteReason::NonSmooth(name));
                None
            }
            Err(Error::QuadratureDivergent(msg)) => {
                why.get_or_insert(InfiniteReason::FisherCap(msg));
                None
            }
            Err(e) => return Err(e),
        };
        known.insert(spec.cache_key(), j);
    }
    Ok((seq.specs().iter().map(|s| known[&s.cache_key()]).collect(), why))
}

fn prefix(seq: &SumSequence, n: usize) -> Result<SumSequence> {
    if n == seq.len() {
        Ok(seq.clone())
    } else {
        seq.prefix(n)
    }
}

fn assemble(j_max: f64, feller: f64, m_n: f64) -> f64 {
    (8.0 * PI * j_max / (1.0 - feller)).sqrt() * m_n
}

/// `(8π max_k J(X_k) / (1 - max_k σ_k²/b_n²))^{1/2} M_n`, or `+∞`.
pub fn tv_bound(seq: &SumSequence, n: usize) -> Result<Bound> {
    let s = prefix(seq, n)?;
    let feller = feller_ratio(&s, n)?;
    if feller >= 1.0 {
        return Ok(Bound::Infinite { why: InfiniteReason::FellerDegenerate });
    }
    let (js, why) = fisher_profile(&s)?;
    if let Some(why) = why {
        return Ok(Bound::Infinite { why });
    }
    let j_max = js.iter().flatten().fold(0.0_f64, |a, &j| a.max(j));
    Ok(Bound::Finite { value: assemble(j_max, feller, truncated_moment(&s, n)?) })
}

/// One `(sequence, n)` case: the bound, its ingredients and the actual
/// distances of `S_n` from the standard normal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub n: usize,
    pub j_values: Vec<Option<f64>>,
    pub j_max: Option<f64>,
    pub feller: f64,
    pub m_n: f64,
    pub tv_bound: Bound,
    pub tv_actual: f64,
    pub k_actual: f64,
    /// `tv_bound - tv_actual`
    pub slack: Option<f64>,
    /// `tv_actual / tv_bound`
    pub slack_ratio: Option<f64>,
    pub bound_holds: bool,
    pub bound_finite: bool,
}

pub fn bound_report(seq: &SumSequence, n: usize, grid: &GridConfig) -> Result<BoundReport> {
    let s = prefix(seq, n)?;
    let feller = feller_ratio(&s, n)?;
    let m_n = truncated_moment(&s, n)?;
    let (j_values, why) = fisher_profile(&s)?;
    let j_max = if why.is_some() { None } else { Some(j_values.iter().flatten().fold(0.0_f64, |a, &j| a.max(j))) };
    let tv_bound = match (why, j_max) {
        _ if feller >= 1.0 => Bound::Infinite { why: InfiniteReason::FellerDegenerate },
        (Some(why), _) => Bound::Infinite { why },
        (None, Some(j)) => Bound::Finite { value: assemble(j, feller, m_n) },
        (None, None) => unreachable!(),
    };
    let d = sum_density(&s, grid)?;
    let tv_actual = tv_distance(&d, Reference::StandardNormal)?;
    let k_actual = kolmogorov_distance(&d, Reference::StandardNormal)?;
    let (slack, slack_ratio, bound_holds) = match &tv_bound {
        Bound::Finite { value } => (Some(value - tv_actual), Some(tv_actual / value), tv_actual <= value + BOUND_SLACK),
        Bound::Infinite { .. } => (None, None, true),
    };
    Ok(BoundReport {
        n,
        j_values,
        j_max,
        feller,
        m_n,
        bound_finite: tv_bound.is_finite(),
        tv_bound,
        tv_actual,
        k_actual,
        slack,
        slack_ratio,
        bound_holds,
    })
}

/// Shape-only Kolmogorov bounds `c M_n` and `c b_n⁻³ Σ E|X_k|³`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KolmogorovBounds {
    pub c: f64,
    pub truncated_form: f64,
    pub third_moment_form: f64,
}

pub fn kolmogorov_bounds(seq: &SumSequence, n: usize, c: f64) -> Result<KolmogorovBounds> {
    if !(c > 0.0) {
        return Err(Error::InvalidArgument(format!("constant c must be positive, got {c}")));
    }
    Ok(KolmogorovBounds {
        c,
        truncated_form: c * truncated_moment(seq, n)?,
        third_moment_form: c * third_moment_ratio(seq, n)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyCheck {
    pub d: f64,
    pub j: f64,
    pub holds: bool,
}

/// `D(X) <= (J(X) - 1) / 2`.
pub fn entropy_inequality(spec: &DistributionSpec) -> Result<EntropyCheck> {
    let j = spec.fisher_j()?;
    let d = spec.relative_entropy()?;
    Ok(EntropyCheck { d, j, holds: d <= 0.5 * (j - 1.0) + 1e-6 })
}

/// `M_n` split by the size of `|X_k|` against `b_n` and `ε b_n`, and the
/// resulting domination `M_n <= L_n(ε) + ε`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LindebergDecomposition {
    pub eps: f64,
    pub m_n: f64,
    pub l_n_eps: f64,
    /// contribution of `|X_k| > b_n`
    pub above: f64,
    /// contribution of `ε b_n < |X_k| <= b_n`
    pub between: f64,
    /// contribution of `|X_k| <= ε b_n`
    pub below: f64,
    pub holds: bool,
}

/// Accepts `ε ∈ (0, 1]`; at `ε = 1` the domination is still meaningful.
pub fn lindeberg_decomposition(seq: &SumSequence, n: usize, eps: f64) -> Result<LindebergDecomposition> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::InvalidArgument(format!("epsilon must lie in (0, 1], got {eps}")));
    }
    let s = prefix(seq, n)?;
    let b = s.b_n();
    let b3 = b * b * b;
    let (mut above, mut between, mut below) = (0.0, 0.0, 0.0);
    for (spec, count) in s.distinct() {
        let c = count as f64;
        above += c * b * spec.tail_second_moment(b)?;
        between += c * spec.abs_moment_between(3.0, eps * b, b)?;
        below += c * spec.abs_moment_between(3.0, 0.0, eps * b)?;
    }
    let m_n = truncated_moment(&s, n)?;
    let l_n_eps = lindeberg_functional(&s, n, eps)?;
    Ok(LindebergDecomposition {
        eps,
        m_n,
        l_n_eps,
        above: above / b3,
        between: between / b3,
        below: below / b3,
        holds: m_n <= l_n_eps + eps + 1e-8,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothingRow {
    pub delta: f64,
    pub tv_bound: f64,
    pub tv_actual: f64,
}

/// Bound and actual distance for `X_k + δ N_k` over a descending list of
/// `δ`, plus `|Δ tv_actual|` between the two smallest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothingTable {
    pub rows: Vec<SmoothingRow>,
    pub tail_variation: Option<f64>,
}

pub fn smoothing_stability(seq: &SumSequence, n: usize, deltas: &[f64], grid: &GridConfig) -> Result<SmoothingTable> {
    if deltas.iter().any(|d| !(*d >= 0.0)) || deltas.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::InvalidArgument("smoothing levels must be non-negative and descending".into()));
    }
    let base = prefix(seq, n)?;
    let mut rows = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        let s = if delta == 0.0 { base.clone() } else { base.smoothed(delta)? };
        let d = sum_density(&s, grid)?;
        rows.push(SmoothingRow {
            delta,
            tv_bound: tv_bound(&s, n)?.value(),
            tv_actual: tv_distance(&d, Reference::StandardNormal)?,
        });
    }
    let tail_variation = match rows.as_slice() {
        [.., a, b] => Some((a.tv_actual - b.tv_actual).abs()),
        _ => None,
    };
    Ok(SmoothingTable { rows, tail_variation })
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let k = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / k, ly.iter().sum::<f64>() / k);
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}
