//! Experiment execution: every `(sequence, n)` case plus the identity,
//! leave-one-out, Lindeberg and smoothing checks.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tvclt::bounds::{
    bound_report, entropy_inequality, kolmogorov_bounds, lindeberg_decomposition, log_log_slope, smoothing_stability,
    KolmogorovBounds, SmoothingTable,
};
use tvclt::metrics::{feller_ratio, lindeberg_functional, truncated_moment};
use tvclt::stein::{
    check_ibp_score, check_increment_bound, check_kernel_identity, check_truncated_kernel_moment, loo_score_moment,
    solve_stein, ProbeLattice, SmoothFn, SteinGrid, TestFunction, LOO_SLACK, SUP_FPRIME_BOUND, SUP_F_BOUND,
};
use tvclt::{BoundReport, DistributionSpec};

use crate::config::{ExperimentConfig, SequenceConfig, Smoothing};

pub const IDENTITY_GAP: f64 = 1e-5;
pub const STEIN_RESIDUAL: f64 = 1e-6;
pub const SUP_SLACK: f64 = 1e-6;
pub const SIGN_F0_TOL: f64 = 1e-8;
pub const STABILITY_TOL: f64 = 1e-3;
pub const J_SMOOTHED_CAP: f64 = 2.0 + 1e-6;
/// Number of random piecewise-linear test functions.
pub const RANDOM_FUNCTIONS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseReport {
    pub sequence: String,
    pub n: usize,
    pub bound: Option<BoundReport>,
    pub kolmogorov: Option<KolmogorovBounds>,
    pub error: Option<String>,
}

impl CaseReport {
    pub fn holds(&self) -> bool {
        self.error.is_none() && self.bound.as_ref().is_some_and(|b| b.bound_holds)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LooSummary {
    pub sequence: String,
    pub n: usize,
    /// `max_k E|ρ_{k,n}(S_{k,n})|`
    pub max_e_abs_rho: Option<f64>,
    /// `sqrt(max_k J(X_k))`
    pub j_bound: Option<f64>,
    pub holds: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LindebergRow {
    pub n: usize,
    pub feller: f64,
    pub m_n: f64,
    /// `L_n(ε)` over the ε grid
    pub values: Vec<f64>,
    pub monotone: bool,
    /// `min_ε (L_n(ε) + ε - M_n)`
    pub worst_margin: f64,
    pub decomposition_holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LindebergTable {
    pub sequence: String,
    pub epsilons: Vec<f64>,
    pub rows: Vec<LindebergRow>,
    pub error: Option<String>,
}

/// Non-smooth base laws made smooth by `X_k + σ_k N_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothingDemo {
    pub sequence: String,
    pub j_max: Option<f64>,
    pub j_within_two: bool,
    /// `(n, tv_actual)` for the smallest and largest `n`
    pub tv_first: Option<(usize, f64)>,
    pub tv_last: Option<(usize, f64)>,
    pub decay_factor: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub sequence: String,
    pub n: usize,
    pub table: Option<SmoothingTable>,
    pub error: Option<String>,
}

/// Least-squares log-log slopes over the cases with `n >= 4`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub sequence: String,
    pub ns: Vec<usize>,
    pub tv_slope: Option<f64>,
    pub bound_slope: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteinSummary {
    pub functions: usize,
    pub seed: u64,
    pub max_residual: f64,
    pub max_sup_f: f64,
    pub max_sup_fprime: f64,
    pub sign_f0_error: f64,
    pub max_increment_violation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LawIdentities {
    pub law: String,
    pub ibp_max_gap: Option<f64>,
    pub kernel_max_gap: Option<f64>,
    pub entropy_d: Option<f64>,
    pub entropy_j: Option<f64>,
    pub entropy_holds: bool,
    pub truncated_kernel_holds: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentitySummary {
    pub stein: Option<SteinSummary>,
    pub stein_error: Option<String>,
    pub laws: Vec<LawIdentities>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub version: String,
    pub config: ExperimentConfig,
    pub cases: Vec<CaseReport>,
    pub rates: Vec<RateFit>,
    pub loo: Vec<LooSummary>,
    pub lindeberg: Vec<LindebergTable>,
    pub smoothing_demos: Vec<SmoothingDemo>,
    pub stability: Vec<StabilityReport>,
    pub identities: Option<IdentitySummary>,
    pub failures: Vec<String>,
    pub passed: bool,
}

fn sorted_sequences(cfg: &ExperimentConfig) -> Vec<&SequenceConfig> {
    let mut v: Vec<&SequenceConfig> = cfg.sequences.iter().collect();
    v.sort_by(|a, b| a.name.cmp(&b.name));
    v
}

fn case(cfg: &ExperimentConfig, seq: &SequenceConfig, n: usize) -> CaseReport {
    let result = seq.build(n).and_then(|s| Ok((bound_report(&s, n, &cfg.grid)?, kolmogorov_bounds(&s, n, cfg.c)?)));
    match result {
        Ok((b, k)) => CaseReport { sequence: seq.name.clone(), n, bound: Some(b), kolmogorov: Some(k), error: None },
        Err(e) => CaseReport { sequence: seq.name.clone(), n, bound: None, kolmogorov: None, error: Some(e.to_string()) },
    }
}

/// Bound reports for every sequence at every configured `n`, sorted by
/// sequence name then `n`.
pub fn run_cases(cfg: &ExperimentConfig, ns: &[usize]) -> Vec<CaseReport> {
    let work: Vec<(&SequenceConfig, usize)> =
        sorted_sequences(cfg).into_iter().flat_map(|s| ns.iter().map(move |&n| (s, n))).collect();
    work.par_iter().map(|&(s, n)| case(cfg, s, n)).collect()
}

fn loo_summary(cfg: &ExperimentConfig, seq: &SequenceConfig, n: usize, j_max: Option<f64>) -> LooSummary {
    let mut out = LooSummary { sequence: seq.name.clone(), n, max_e_abs_rho: None, j_bound: None, holds: true, error: None };
    let Some(j_max) = j_max else {
        // infinite Fisher information: the bound is vacuous
        return out;
    };
    let result = seq.build(n).and_then(|s| {
        let mut seen = HashSet::new();
        let mut worst: f64 = 0.0;
        for (k, spec) in s.specs().iter().enumerate() {
            if seen.insert(spec.cache_key()) {
                worst = worst.max(loo_score_moment(&s, k, &cfg.grid)?);
            }
        }
        Ok(worst)
    });
    match result {
        Ok(rho) => {
            out.max_e_abs_rho = Some(rho);
            out.j_bound = Some(j_max.sqrt());
            out.holds = rho <= j_max.sqrt() + LOO_SLACK;
        }
        Err(e) => {
            out.holds = false;
            out.error = Some(e.to_string());
        }
    }
    out
}

fn lindeberg_table(cfg: &ExperimentConfig, seq: &SequenceConfig) -> LindebergTable {
    let epsilons = cfg.epsilon_grid.values();
    let rows = cfg
        .n_values
        .iter()
        .map(|&n| {
            let s = seq.build(n)?;
            let values: Vec<f64> = epsilons.iter().map(|&e| lindeberg_functional(&s, n, e)).collect::<tvclt::Result<_>>()?;
            let mut worst_margin = f64::INFINITY;
            let mut decomposition_holds = true;
            for &e in &epsilons {
                let d = lindeberg_decomposition(&s, n, e)?;
                worst_margin = worst_margin.min(d.l_n_eps + e - d.m_n);
                decomposition_holds &= d.holds;
            }
            Ok(LindebergRow {
                n,
                feller: feller_ratio(&s, n)?,
                m_n: truncated_moment(&s, n)?,
                monotone: values.windows(2).all(|w| w[1] <= w[0] + 1e-12),
                values,
                worst_margin,
                decomposition_holds,
            })
        })
        .collect::<tvclt::Result<Vec<_>>>();
    match rows {
        Ok(rows) => LindebergTable { sequence: seq.name.clone(), epsilons, rows, error: None },
        Err(e) => LindebergTable { sequence: seq.name.clone(), epsilons, rows: vec![], error: Some(e.to_string()) },
    }
}

fn smoothing_demo(seq: &SequenceConfig, cases: &[&CaseReport]) -> SmoothingDemo {
    let j_max = cases.iter().filter_map(|c| c.bound.as_ref()?.j_max).fold(None, |a: Option<f64>, j| Some(a.map_or(j, |a| a.max(j))));
    let tvs: Vec<(usize, f64)> = cases.iter().filter_map(|c| Some((c.n, c.bound.as_ref()?.tv_actual))).collect();
    let (tv_first, tv_last) = (tvs.first().copied(), tvs.last().copied());
    SmoothingDemo {
        sequence: seq.name.clone(),
        j_max,
        j_within_two: j_max.is_some_and(|j| j <= J_SMOOTHED_CAP),
        tv_first,
        tv_last,
        decay_factor: match (tv_first, tv_last) {
            (Some(a), Some(b)) if a.0 < b.0 => Some(a.1 / b.1),
            _ => None,
        },
    }
}

fn rate_fit(seq: &SequenceConfig, cases: &[&CaseReport]) -> RateFit {
    let pts: Vec<(usize, f64, f64)> = cases
        .iter()
        .filter(|c| c.n >= 4)
        .filter_map(|c| {
            let b = c.bound.as_ref()?;
            Some((c.n, b.tv_actual, b.tv_bound.value()))
        })
        .collect();
    let ns: Vec<usize> = pts.iter().map(|p| p.0).collect();
    let xs: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    let fit = |ys: Vec<f64>| (ys.len() >= 2 && ys.iter().all(|y| y.is_finite() && *y > 0.0)).then(|| log_log_slope(&xs, &ys));
    RateFit {
        sequence: seq.name.clone(),
        tv_slope: fit(pts.iter().map(|p| p.1).collect()),
        bound_slope: fit(pts.iter().map(|p| p.2).collect()),
        ns,
    }
}

/// Distinct summand laws appearing in the configured sequences.
fn suite_laws(cfg: &ExperimentConfig) -> Vec<DistributionSpec> {
    let mut seen = HashSet::new();
    let mut out = vec![];
    for seq in sorted_sequences(cfg) {
        if let Ok(s) = seq.build(3) {
            for spec in s.specs() {
                if seen.insert(spec.cache_key()) {
                    out.push(spec.clone());
                }
            }
        }
    }
    out
}

fn stein_summary(seed: u64) -> tvclt::Result<SteinSummary> {
    let grid = SteinGrid::default();
    let results: Vec<tvclt::Result<(f64, f64, f64)>> = TestFunction::random_piecewise_linear(seed, RANDOM_FUNCTIONS)
        .par_iter()
        .map(|h| {
            let sol = solve_stein(h, &grid)?;
            Ok((sol.ode_residual(-8.0, 8.0, 320)?, sol.sup_f(), sol.sup_fprime()))
        })
        .collect();
    let mut s = SteinSummary {
        functions: RANDOM_FUNCTIONS,
        seed,
        max_residual: 0.0,
        max_sup_f: 0.0,
        max_sup_fprime: 0.0,
        sign_f0_error: 0.0,
        max_increment_violation: f64::NEG_INFINITY,
    };
    for r in results {
        let (res, f, fp) = r?;
        s.max_residual = s.max_residual.max(res);
        s.max_sup_f = s.max_sup_f.max(f);
        s.max_sup_fprime = s.max_sup_fprime.max(fp);
    }
    let sign = solve_stein(&TestFunction::sign(), &grid)?;
    s.sign_f0_error = (sign.f(0.0)? + (std::f64::consts::PI / 2.0).sqrt()).abs();
    for b in [1.0, 2.0, 5.0] {
        let v = check_increment_bound(&sign, b, &ProbeLattice::default())?;
        s.max_increment_violation = s.max_increment_violation.max(v.max_violation);
    }
    Ok(s)
}

impl SteinSummary {
    pub fn passed(&self) -> bool {
        self.max_residual < STEIN_RESIDUAL
            && self.max_sup_f <= SUP_F_BOUND + SUP_SLACK
            && self.max_sup_fprime <= SUP_FPRIME_BOUND + SUP_SLACK
            && self.sign_f0_error <= SIGN_F0_TOL
            && self.max_increment_violation <= SUP_SLACK
    }
}

fn law_identities(spec: &DistributionSpec) -> LawIdentities {
    let law = format!("{} (sd {})", spec.family().name(), spec.sd());
    let mut out = LawIdentities {
        law,
        ibp_max_gap: None,
        kernel_max_gap: None,
        entropy_d: None,
        entropy_j: None,
        entropy_holds: true,
        truncated_kernel_holds: true,
        error: None,
    };
    let result = (|| -> tvclt::Result<()> {
        if spec.has_density() {
            let mut k: f64 = 0.0;
            for f in SmoothFn::MATRIX {
                k = k.max(check_kernel_identity(spec, f)?.gap);
            }
            out.kernel_max_gap = Some(k);
            for b in [0.5, 1.0, 3.0].map(|c| c * spec.sd()) {
                let t = check_truncated_kernel_moment(spec, b)?;
                out.truncated_kernel_holds &= t.holds && t.association_holds;
            }
        }
        if spec.is_smooth() {
            let mut g: f64 = 0.0;
            for f in SmoothFn::MATRIX {
                g = g.max(check_ibp_score(spec, f)?.gap);
            }
            out.ibp_max_gap = Some(g);
            let e = entropy_inequality(spec)?;
            (out.entropy_d, out.entropy_j, out.entropy_holds) = (Some(e.d), Some(e.j), e.holds);
        }
        Ok(())
    })();
    if let Err(e) = result {
        out.error = Some(e.to_string());
    }
    out
}

impl LawIdentities {
    pub fn passed(&self) -> bool {
        self.error.is_none()
            && self.ibp_max_gap.is_none_or(|g| g < IDENTITY_GAP)
            && self.kernel_max_gap.is_none_or(|g| g < IDENTITY_GAP)
            && self.entropy_holds
            && self.truncated_kernel_holds
    }
}

/// Stein-solution checks plus per-law identities for every law in the suite.
pub fn check_identities(cfg: &ExperimentConfig) -> IdentitySummary {
    let (stein, laws) = rayon::join(|| stein_summary(cfg.seed), || suite_laws(cfg).par_iter().map(law_identities).collect::<Vec<_>>());
    let (stein, stein_error) = match stein {
        Ok(s) => (Some(s), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let passed = stein.as_ref().is_some_and(SteinSummary::passed) && laws.iter().all(LawIdentities::passed);
    IdentitySummary { stein, stein_error, laws, passed }
}

/// Runs the full experiment. Deterministic for a given config.
pub fn run(cfg: &ExperimentConfig) -> RunReport {
    let cases = run_cases(cfg, &cfg.n_values);
    let seqs = sorted_sequences(cfg);
    let cases_of = |name: &str| cases.iter().filter(|c| c.sequence == name).collect::<Vec<_>>();

    let rates = seqs.iter().map(|s| rate_fit(s, &cases_of(&s.name))).collect();

    let loo = if cfg.checks.loo_score {
        let work: Vec<(&SequenceConfig, usize, Option<f64>)> = cases
            .iter()
            .filter(|c| c.n >= 2 && c.n <= cfg.checks.loo_max_n && c.error.is_none())
            .map(|c| {
                let seq = seqs.iter().find(|s| s.name == c.sequence).expect("case sequence exists");
                (*seq, c.n, c.bound.as_ref().and_then(|b| b.j_max))
            })
            .collect();
        work.par_iter().map(|&(s, n, j)| loo_summary(cfg, s, n, j)).collect()
    } else {
        vec![]
    };

    let lindeberg =
        if cfg.checks.lindeberg { seqs.par_iter().map(|s| lindeberg_table(cfg, s)).collect() } else { vec![] };

    let smoothing_demos = seqs
        .iter()
        .filter(|s| s.smoothing == Smoothing::MatchingVariance)
        .map(|s| smoothing_demo(s, &cases_of(&s.name)))
        .collect();

    let stability = if cfg.checks.smoothing && !cfg.delta_grid.is_empty() {
        let n = cfg.n_values[0];
        seqs.par_iter()
            .filter(|s| s.smoothing == Smoothing::None && s.base_is_smooth())
            .map(|s| {
                let table = s.build(n).and_then(|q| smoothing_stability(&q, n, &cfg.delta_grid, &cfg.grid));
                match table {
                    Ok(t) => StabilityReport { sequence: s.name.clone(), n, table: Some(t), error: None },
                    Err(e) => StabilityReport { sequence: s.name.clone(), n, table: None, error: Some(e.to_string()) },
                }
            })
            .collect()
    } else {
        vec![]
    };

    let identities = cfg.checks.identities.then(|| check_identities(cfg));

    let mut report = RunReport {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.clone(),
        cases,
        rates,
        loo,
        lindeberg,
        smoothing_demos,
        stability,
        identities,
        failures: vec![],
        passed: true,
    };
    report.failures = collect_failures(&report);
    report.passed = report.failures.is_empty();
    report
}

fn collect_failures(r: &RunReport) -> Vec<String> {
    let mut f = vec![];
    for c in &r.cases {
        match (&c.error, &c.bound) {
            (Some(e), _) => f.push(format!("{} n={}: {e}", c.sequence, c.n)),
            (None, Some(b)) if !b.bound_holds => {
                f.push(format!("{} n={}: tv_actual {} exceeds bound {}", c.sequence, c.n, b.tv_actual, b.tv_bound.value()))
            }
            _ => {}
        }
    }
    for l in r.loo.iter().filter(|l| !l.holds) {
        f.push(format!("{} n={}: leave-one-out score bound fails ({:?})", l.sequence, l.n, l.error.as_ref().map_or_else(|| format!("{:?} > {:?}", l.max_e_abs_rho, l.j_bound), String::clone)));
    }
    for t in &r.lindeberg {
        if let Some(e) = &t.error {
            f.push(format!("{}: Lindeberg scan failed: {e}", t.sequence));
        }
        for row in t.rows.iter().filter(|row| !row.monotone || !row.decomposition_holds) {
            f.push(format!("{} n={}: Lindeberg scan monotone={} decomposition={}", t.sequence, row.n, row.monotone, row.decomposition_holds));
        }
    }
    for d in r.smoothing_demos.iter().filter(|d| !d.j_within_two) {
        f.push(format!("{}: smoothed Fisher information {:?} exceeds 2", d.sequence, d.j_max));
    }
    for s in &r.stability {
        if let Some(e) = &s.error {
            f.push(format!("{}: smoothing stability failed: {e}", s.sequence));
        }
        if let Some(v) = s.table.as_ref().and_then(|t| t.tail_variation).filter(|v| *v >= STABILITY_TOL) {
            f.push(format!("{}: tv_actual moves by {v} between the two smallest deltas", s.sequence));
        }
    }
    if let Some(id) = &r.identities {
        if let Some(e) = &id.stein_error {
            f.push(format!("Stein checks failed: {e}"));
        }
        if let Some(s) = id.stein.as_ref().filter(|s| !s.passed()) {
            f.push(format!("Stein checks out of tolerance: {s:?}"));
        }
        for l in id.laws.iter().filter(|l| !l.passed()) {
            f.push(format!("identities for {}: {l:?}", l.law));
        }
    }
    f
}
