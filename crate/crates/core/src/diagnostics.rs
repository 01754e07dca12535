//! Statistical checks of the limit theorems at desk scale.
//!
//! Each test is split into a simulation step, which produces per-replica
//! samples, and a pure evaluation step over those samples. Evaluations are
//! deterministic, so a report is a function of `(config, seed)`, and negative
//! controls can feed deliberately corrupted samples to the same evaluator.
//!
//! Every test refuses configurations outside the hypotheses of the result it
//! checks with [`Error::Regime`].

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::engine::{StepEvent, StepObserver, WalkConfig, Walker};
use crate::error::{Error, Result};
use crate::excitation::{IncrementDistribution, IncrementGenerator};
use crate::lattice::{dot_unchecked, CoordinateSubset};
use crate::montecarlo::{binomial_halfwidth, mean, median, run_replicas, variance, Z95};
use crate::observables::{scaled_floor, split_time, DProcessTracker, RangeEnvelope, Snapshots};
use crate::rng::{splitmix64, StreamRng};
use crate::stats::{chi_square_gof, chi_square_independence, ks_normal, quantile};

/// How many replicas to run and on how many threads; the seed comes from the config.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSettings {
    pub replicas: u64,
    pub parallelism: usize,
}

/// One bounded quantity inside a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub label: String,
    pub value: f64,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub pass: bool,
    /// Non-gating checks are reported but do not affect the verdict.
    pub gating: bool,
}

impl Check {
    pub fn new(label: impl Into<String>, value: f64, lower: Option<f64>, upper: Option<f64>) -> Self {
        let pass = lower.is_none_or(|l| value >= l) && upper.is_none_or(|u| value <= u);
        Check {
            label: label.into(),
            value,
            lower,
            upper,
            pass: pass && !value.is_nan(),
            gating: true,
        }
    }

    pub fn at_most(label: impl Into<String>, value: f64, upper: f64) -> Self {
        Self::new(label, value, None, Some(upper))
    }

    pub fn at_least(label: impl Into<String>, value: f64, lower: f64) -> Self {
        Self::new(label, value, Some(lower), None)
    }

    pub fn within(label: impl Into<String>, value: f64, lower: f64, upper: f64) -> Self {
        Self::new(label, value, Some(lower), Some(upper))
    }

    pub fn info(mut self) -> Self {
        self.gating = false;
        self
    }

    /// Distance to the nearest bound (negative when violated) and that bound.
    fn slack(&self) -> (f64, f64) {
        let lo = self.lower.map(|l| (self.value - l, l));
        let hi = self.upper.map(|u| (u - self.value, u));
        match (lo, hi) {
            (Some(a), Some(b)) => if a.0 <= b.0 { a } else { b },
            (Some(a), None) | (None, Some(a)) => a,
            (None, None) => (f64::INFINITY, f64::NAN),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub name: String,
    /// Value of the headline check: the first failing gating check, or the
    /// one with the least relative slack when all pass.
    pub statistic: f64,
    /// The bound of the headline check.
    pub threshold: f64,
    pub pass: bool,
    pub replicas: u64,
    pub seed: u64,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
}

impl TestReport {
    pub fn from_checks(name: &str, replicas: u64, seed: u64, checks: Vec<Check>, notes: Vec<String>) -> Self {
        let gating: Vec<&Check> = checks.iter().filter(|c| c.gating).collect();
        let pass = !gating.is_empty() && gating.iter().all(|c| c.pass);
        let headline = gating.iter().find(|c| !c.pass).copied().or_else(|| {
            gating.iter().copied().min_by(|a, b| {
                let ra = a.slack().0 / a.slack().1.abs().max(1e-3);
                let rb = b.slack().0 / b.slack().1.abs().max(1e-3);
                ra.total_cmp(&rb)
            })
        });
        let (statistic, threshold) = headline.map_or((f64::NAN, f64::NAN), |c| (c.value, c.slack().1));
        TestReport {
            name: name.to_string(),
            statistic,
            threshold,
            pass,
            replicas,
            seed,
            checks,
            notes,
        }
    }

    pub fn failing(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| c.gating && !c.pass)
    }
}

fn regime(test: &'static str, requirement: impl Into<String>) -> Error {
    Error::Regime {
        test,
        requirement: requirement.into(),
    }
}

/// Diagnostics addressable by name from configs and the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DiagnosticTest {
    GaussianMarginal,
    RangeUpper,
    KnBand,
    ConeDrift,
    JvAsymptotics,
    DProcessVanishes,
    StoppedIncrementsIid,
    RangeLlnIid,
}

impl DiagnosticTest {
    pub const ALL: [DiagnosticTest; 8] = [
        DiagnosticTest::GaussianMarginal,
        DiagnosticTest::RangeUpper,
        DiagnosticTest::KnBand,
        DiagnosticTest::ConeDrift,
        DiagnosticTest::JvAsymptotics,
        DiagnosticTest::DProcessVanishes,
        DiagnosticTest::StoppedIncrementsIid,
        DiagnosticTest::RangeLlnIid,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DiagnosticTest::GaussianMarginal => "gaussian-marginal",
            DiagnosticTest::RangeUpper => "range-upper",
            DiagnosticTest::KnBand => "kn-band",
            DiagnosticTest::ConeDrift => "cone-drift",
            DiagnosticTest::JvAsymptotics => "jv-asymptotics",
            DiagnosticTest::DProcessVanishes => "d-process-vanishes",
            DiagnosticTest::StoppedIncrementsIid => "stopped-increments-iid",
            DiagnosticTest::RangeLlnIid => "range-lln-iid",
        }
    }

    /// Hypotheses of the test, checked before any simulation.
    pub fn check_regime(self, config: &WalkConfig, subset: &CoordinateSubset) -> Result<()> {
        match self {
            DiagnosticTest::GaussianMarginal => gaussian_regime(config),
            DiagnosticTest::RangeUpper => range_upper_regime(config),
            DiagnosticTest::KnBand => cone_regime(config, subset, "kn-band"),
            DiagnosticTest::ConeDrift => cone_regime(config, subset, "cone-drift"),
            DiagnosticTest::DProcessVanishes => d_process_regime(config),
            _ => Ok(()),
        }
    }
}

impl std::fmt::Display for DiagnosticTest {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for DiagnosticTest {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Self::ALL.iter().map(|t| t.name()).collect();
                Error::config(format!("unknown test {s:?}; expected one of {}", names.join(", ")))
            })
    }
}

fn is_half(beta: f64) -> bool {
    (beta - 0.5).abs() < 1e-12
}

fn range_upper_regime(config: &WalkConfig) -> Result<()> {
    let beta = config.schedule.beta();
    if is_half(beta) {
        return Ok(());
    }
    Err(regime(
        "range-upper",
        format!("the range bound is stated for beta = 1/2 (got {beta})"),
    ))
}

fn d_process_regime(config: &WalkConfig) -> Result<()> {
    let beta = config.schedule.beta();
    if beta > 0.5 + 1e-12 {
        return Ok(());
    }
    Err(regime(
        "d-process-vanishes",
        format!("the correction vanishes only for beta > 1/2 (got {beta})"),
    ))
}

// ---------------------------------------------------------------------------
// Rescaled-path samples

/// `B̂ⁿ_t` and `|K_{⌊nt⌋}|/√n` at each grid time, for every replica.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RescaledSamples {
    pub n: u64,
    pub t_points: Vec<f64>,
    /// `positions[t][replica][axis]`
    pub positions: Vec<Vec<Vec<f64>>>,
    /// `k_scaled[t][replica]`
    pub k_scaled: Vec<Vec<f64>>,
    pub seed: u64,
}

impl RescaledSamples {
    pub fn replicas(&self) -> u64 {
        self.k_scaled.first().map_or(0, |v| v.len() as u64)
    }

    /// Projections `B̂ⁿ_t · v` at grid index `ti`.
    pub fn projected(&self, ti: usize, v: &[f64]) -> Vec<f64> {
        self.positions[ti]
            .iter()
            .map(|x| x.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn coordinate(&self, ti: usize, axis: usize) -> Vec<f64> {
        self.positions[ti].iter().map(|x| x[axis]).collect()
    }
}

/// Simulates `config` to the horizon the grid needs and samples `B̂ⁿ_t`.
pub fn sample_rescaled(config: &WalkConfig, n: u64, t_points: &[f64], settings: RunSettings) -> Result<RescaledSamples> {
    if n == 0 || t_points.is_empty() {
        return Err(Error::domain("need n >= 1 and at least one grid time"));
    }
    let mut needed = Vec::new();
    for &t in t_points {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::domain(format!("grid time {t} must be finite and >= 0")));
        }
        let (k, frac) = split_time(n, t);
        needed.push(k);
        if frac > 0.0 {
            needed.push(k + 1);
        }
    }
    needed.sort_unstable();
    needed.dedup();
    let horizon = *needed.last().unwrap();
    let config = config.with_horizon(horizon);
    config.validate()?;
    let dim = config.dim;
    let scale = 1.0 / (n as f64).sqrt();

    let per_replica = run_replicas(settings.replicas, settings.parallelism, |r| {
        let mut snaps = Snapshots::new(dim, needed.clone())?;
        Walker::for_replica(&config, r).run(horizon, &mut snaps);
        let at = |k: u64| needed.binary_search(&k).expect("snapshot time");
        Ok(t_points
            .iter()
            .map(|&t| {
                let (k, frac) = split_time(n, t);
                let here = &snaps.positions[at(k)];
                let pos: Vec<f64> = if frac > 0.0 {
                    let next = &snaps.positions[at(k + 1)];
                    here.iter()
                        .zip(next)
                        .map(|(&a, &b)| (a as f64 + frac * (b - a) as f64) * scale)
                        .collect()
                } else {
                    here.iter().map(|&a| a as f64 * scale).collect()
                };
                (pos, snaps.excitations[at(k)] as f64 * scale)
            })
            .collect::<Vec<_>>())
    })
    .into_complete()?;

    let mut positions = vec![Vec::with_capacity(per_replica.len()); t_points.len()];
    let mut k_scaled = vec![Vec::with_capacity(per_replica.len()); t_points.len()];
    for rep in per_replica {
        for (ti, (pos, k)) in rep.into_iter().enumerate() {
            positions[ti].push(pos);
            k_scaled[ti].push(k);
        }
    }
    Ok(RescaledSamples {
        n,
        t_points: t_points.to_vec(),
        positions,
        k_scaled,
        seed: config.seed,
    })
}

// ---------------------------------------------------------------------------
// Gaussian marginals

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianThresholds {
    pub ks: f64,
    pub mean_norm: f64,
    pub covariance: f64,
}

impl Default for GaussianThresholds {
    fn default() -> Self {
        GaussianThresholds {
            ks: 0.02,
            mean_norm: 0.02,
            covariance: 0.02,
        }
    }
}

/// The Gaussian limit is claimed for `β > 1/2` in any dimension, for
/// `β = 1/2` only in `d = 2`, and for any `β` when `γ = ξ`.
pub fn gaussian_regime(config: &WalkConfig) -> Result<()> {
    let beta = config.schedule.beta();
    if config.is_unexcited() || beta > 0.5 + 1e-12 || (is_half(beta) && config.dim == 2) {
        return Ok(());
    }
    Err(regime(
        "gaussian-marginal",
        format!(
            "a centered Gaussian limit needs beta > 1/2, or beta = 1/2 with d = 2 \
             (got beta = {beta}, d = {})",
            config.dim
        ),
    ))
}

/// Compares each marginal `B̂ⁿ_t` with `Normal(0, t·E[ξξᵀ])`.
pub fn evaluate_gaussian(samples: &RescaledSamples, xi_second_moment: &[Vec<f64>], thresholds: GaussianThresholds) -> Result<TestReport> {
    let replicas = samples.replicas();
    if replicas < 2 {
        return Err(Error::Inconclusive("need at least two replicas".into()));
    }
    let mut checks = Vec::new();
    let mut notes = Vec::new();
    for (ti, &t) in samples.t_points.iter().enumerate() {
        if t <= 0.0 {
            notes.push("t = 0 skipped: the marginal is a point mass at the origin".into());
            continue;
        }
        let dim = xi_second_moment.len();
        let coords: Vec<Vec<f64>> = (0..dim).map(|a| samples.coordinate(ti, a)).collect();
        let means: Vec<f64> = coords.iter().map(|c| mean(c)).collect();
        let norm = means.iter().map(|m| m * m).sum::<f64>().sqrt();
        checks.push(Check::at_most(format!("t={t} mean norm"), norm, thresholds.mean_norm));
        for a in 0..dim {
            let var = t * xi_second_moment[a][a];
            if var > 0.0 {
                let ks = ks_normal(&coords[a], 0.0, var.sqrt())?;
                checks.push(Check::at_most(format!("t={t} KS axis {}", a + 1), ks, thresholds.ks));
            }
            for b in a..dim {
                let cov: Vec<f64> = coords[a]
                    .iter()
                    .zip(&coords[b])
                    .map(|(x, y)| (x - means[a]) * (y - means[b]))
                    .collect();
                let c = crate::montecarlo::tree_sum(&cov) / (replicas - 1) as f64;
                let target = t * xi_second_moment[a][b];
                checks.push(Check::within(
                    format!("t={t} cov[{},{}] (target {target})", a + 1, b + 1),
                    c,
                    target - thresholds.covariance,
                    target + thresholds.covariance,
                ));
            }
        }
    }
    Ok(TestReport::from_checks("gaussian-marginal", replicas, samples.seed, checks, notes))
}

pub fn test_gaussian_marginal(
    config: &WalkConfig,
    n: u64,
    t_points: &[f64],
    settings: RunSettings,
    thresholds: GaussianThresholds,
) -> Result<TestReport> {
    gaussian_regime(config)?;
    let samples = sample_rescaled(config, n, t_points, settings)?;
    evaluate_gaussian(&samples, &config.xi.second_moment(), thresholds)
}

// ---------------------------------------------------------------------------
// Range upper bound

/// Fraction of replicas with `|R_m| ≤ δ·m` for every `m ∈ [n/10, n]` (at least 0.99).
pub fn test_range_upper(
    config: &WalkConfig,
    delta: f64,
    n: u64,
    pi_hat: f64,
    margin: f64,
    settings: RunSettings,
) -> Result<TestReport> {
    range_upper_regime(config)?;
    if delta <= pi_hat + margin {
        return Err(Error::Inconclusive(format!(
            "delta = {delta} is not above the escape estimate {pi_hat} plus margin {margin}"
        )));
    }
    let config = config.with_horizon(n);
    config.validate()?;
    let from = n / 10;
    let envelopes = run_replicas(settings.replicas, settings.parallelism, |r| {
        let mut env = RangeEnvelope::new(delta, from, n);
        Walker::for_replica(&config, r).run(n, &mut env);
        Ok(env)
    })
    .into_complete()?;
    let held = envelopes.iter().filter(|e| e.holds).count() as f64 / settings.replicas as f64;
    let ratios: Vec<f64> = envelopes.iter().map(|e| e.max_ratio).collect();
    let checks = vec![
        Check::at_least("fraction with |R_m| <= delta m on [n/10, n]", held, 0.99),
        Check::at_most("median of max |R_m|/m", median(&ratios), delta).info(),
        Check::at_most("99% quantile of max |R_m|/m", quantile(&ratios, 0.99), delta).info(),
    ];
    let notes = vec![format!("delta = {delta}, escape estimate = {pi_hat}")];
    Ok(TestReport::from_checks("range-upper", settings.replicas, config.seed, checks, notes))
}

// ---------------------------------------------------------------------------
// Excitation-count band and cone drift

/// Hypotheses shared by the band and cone tests.
pub fn cone_regime(config: &WalkConfig, subset: &CoordinateSubset, test: &'static str) -> Result<()> {
    let beta = config.schedule.beta();
    if !is_half(beta) || config.schedule.c() != 1.0 {
        return Err(regime(
            test,
            format!(
                "needs p_n = n^(-1/2), i.e. C = 1 and beta = 1/2 (got C = {}, beta = {beta})",
                config.schedule.c()
            ),
        ));
    }
    if subset.dim() != config.dim || !subset.spans(&config.ell) {
        return Err(regime(test, "the drift direction must be spanned by the subset axes"));
    }
    subset
        .check_cone_regime()
        .map_err(|e| regime(test, e.to_string()))
}

/// `[2√t(1 − √(1 − π_{d−k})), 2√(t π_d)]`.
pub fn kn_band(pi_d: f64, pi_dk: f64, t: f64) -> (f64, f64) {
    (
        2.0 * t.sqrt() * (1.0 - (1.0 - pi_dk).sqrt()),
        2.0 * (t * pi_d).sqrt(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandThresholds {
    /// Required fraction of replicas inside the band at each grid time.
    pub in_band_fraction: f64,
    /// `ε_n = max(floor, coefficient · n^{-1/4})`.
    pub slack_floor: f64,
    pub slack_coefficient: f64,
}

impl Default for BandThresholds {
    fn default() -> Self {
        BandThresholds {
            in_band_fraction: 0.95,
            slack_floor: 0.05,
            slack_coefficient: 4.0,
        }
    }
}

impl BandThresholds {
    pub fn slack(&self, n: u64) -> f64 {
        self.slack_floor
            .max(self.slack_coefficient * (n as f64).powf(-0.25))
    }
}

pub fn evaluate_kn_band(samples: &RescaledSamples, pi_d: f64, pi_dk: f64, thresholds: BandThresholds) -> TestReport {
    let eps = thresholds.slack(samples.n);
    let mut checks = Vec::new();
    for (ti, &t) in samples.t_points.iter().enumerate() {
        let (lo, hi) = kn_band(pi_d, pi_dk, t);
        let (lo, hi) = if t == 0.0 { (0.0, 0.0) } else { (lo - eps, hi + eps) };
        let ks = &samples.k_scaled[ti];
        let inside = ks.iter().filter(|&&k| k >= lo && k <= hi).count() as f64 / ks.len() as f64;
        checks.push(Check::at_least(
            format!("t={t} fraction in [{lo:.4}, {hi:.4}]"),
            inside,
            thresholds.in_band_fraction,
        ));
        checks.push(Check::within(format!("t={t} mean |K|/sqrt(n)"), mean(ks), lo, hi).info());
        checks.push(Check::at_least(format!("t={t} 1% quantile"), quantile(ks, 0.01), lo).info());
        checks.push(Check::at_most(format!("t={t} 99% quantile"), quantile(ks, 0.99), hi).info());
    }
    let notes = vec![
        format!("pi_d = {pi_d}, pi_(d-k) = {pi_dk}, slack eps_n = {eps}"),
        "finite-n band with a chosen slack schedule; the limit statement constrains limit points only".into(),
    ];
    TestReport::from_checks("kn-band", samples.replicas(), samples.seed, checks, notes)
}

pub fn test_kn_band(
    config: &WalkConfig,
    subset: &CoordinateSubset,
    n: u64,
    t_points: &[f64],
    pi_d: f64,
    pi_dk: f64,
    settings: RunSettings,
    thresholds: BandThresholds,
) -> Result<TestReport> {
    cone_regime(config, subset, "kn-band")?;
    let samples = sample_rescaled(config, n, t_points, settings)?;
    Ok(evaluate_kn_band(&samples, pi_d, pi_dk, thresholds))
}

/// Drift-envelope coefficients `c_1 = μ_γ(1 − √(1 − π_{d−k}))`, `c_2 = μ_γ √π_d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConeConstants {
    pub mu_gamma: f64,
    pub pi_d_hat: f64,
    pub pi_dk_hat: f64,
    pub c1: f64,
    pub c2: f64,
}

impl ConeConstants {
    pub fn new(mu_gamma: f64, pi_d_hat: f64, pi_dk_hat: f64) -> Result<Self> {
        for (name, p) in [("pi_d", pi_d_hat), ("pi_(d-k)", pi_dk_hat)] {
            if !(p > 0.0 && p <= 1.0) {
                return Err(Error::domain(format!("{name} estimate {p} must lie in (0, 1]")));
            }
        }
        Ok(ConeConstants {
            mu_gamma,
            pi_d_hat,
            pi_dk_hat,
            c1: mu_gamma * (1.0 - (1.0 - pi_dk_hat).sqrt()),
            c2: mu_gamma * pi_d_hat.sqrt(),
        })
    }

    pub fn for_config(config: &WalkConfig, pi_d_hat: f64, pi_dk_hat: f64) -> Result<Self> {
        Self::new(config.gamma.mean_along(&config.ell)?, pi_d_hat, pi_dk_hat)
    }
}

/// `max(floor, 4 σ̂ / √replicas)`.
fn mean_slack(xs: &[f64], floor: f64) -> f64 {
    floor.max(4.0 * variance(xs).sqrt() / (xs.len() as f64).sqrt())
}

pub fn evaluate_cone_drift(
    samples: &RescaledSamples,
    ell: &[f64],
    subset: &CoordinateSubset,
    cone: &ConeConstants,
    slack_floor: f64,
) -> TestReport {
    let mut checks = Vec::new();
    for (ti, &t) in samples.t_points.iter().enumerate() {
        let along = samples.projected(ti, ell);
        let eps = mean_slack(&along, slack_floor);
        checks.push(Check::within(
            format!("t={t} mean drift along ell (eps {eps:.4})"),
            mean(&along),
            2.0 * cone.c1 * t.sqrt() - eps,
            2.0 * cone.c2 * t.sqrt() + eps,
        ));
        for axis in subset.complement() {
            let xs = samples.coordinate(ti, axis);
            let eps = mean_slack(&xs, slack_floor);
            checks.push(Check::within(
                format!("t={t} mean along axis {} (eps {eps:.4})", axis + 1),
                mean(&xs),
                -eps,
                eps,
            ));
        }
    }
    let notes = vec![format!(
        "mu_gamma = {}, c1 = {}, c2 = {}; only the mean consequence of the envelope is tested",
        cone.mu_gamma, cone.c1, cone.c2
    )];
    TestReport::from_checks("cone-drift", samples.replicas(), samples.seed, checks, notes)
}

#[allow(clippy::too_many_arguments)]
pub fn test_cone_drift(
    config: &WalkConfig,
    subset: &CoordinateSubset,
    n: u64,
    t_points: &[f64],
    cone: &ConeConstants,
    settings: RunSettings,
    slack_floor: f64,
) -> Result<TestReport> {
    cone_regime(config, subset, "cone-drift")?;
    let samples = sample_rescaled(config, n, t_points, settings)?;
    Ok(evaluate_cone_drift(&samples, config.ell.components(), subset, cone, slack_floor))
}

// ---------------------------------------------------------------------------
// Small-uniform counts

/// `J_n(δ)` and `V_n(δ′)` for each `n` of a ladder, every replica.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JvSamples {
    pub delta: f64,
    pub delta_prime: f64,
    pub ladder: Vec<u64>,
    /// `j[ladder index][replica]`
    pub j: Vec<Vec<u64>>,
    pub v: Vec<Vec<u64>>,
    pub seed: u64,
}

/// Seed of the uniform streams used for `J` and `V`, kept apart from walk streams.
pub fn jv_stream_seed(seed: u64) -> u64 {
    splitmix64(seed ^ 0x4a56_5f55_4e49_464f)
}

/// One pass over `U_1..U_{max n}` per replica, from `stream(jv_stream_seed(seed), r)`.
pub fn sample_jv(delta: f64, delta_prime: f64, ladder: &[u64], seed: u64, settings: RunSettings) -> Result<JvSamples> {
    if ladder.is_empty() || ladder.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::domain("n ladder must be nonempty and strictly increasing"));
    }
    // prefix counts S(i) are needed at ⌊δn⌋, n − ⌊δ′n⌋ and n
    let mut marks = Vec::new();
    for &n in ladder {
        let jw = crate::observables::j_window(delta, n)?;
        let vw = crate::observables::v_window(delta_prime, n)?;
        marks.extend([jw, vw.start() - 1, n]);
    }
    marks.sort_unstable();
    marks.dedup();
    let max_n = *ladder.last().unwrap();
    let stream_seed = jv_stream_seed(seed);
    let per_replica = run_replicas(settings.replicas, settings.parallelism, |r| {
        let mut rng = StreamRng::for_replica(stream_seed, r);
        let mut prefix = HashMap::with_capacity(marks.len());
        prefix.insert(0u64, 0u64);
        let mut count = 0u64;
        let mut next = marks.iter().copied().filter(|&m| m > 0).peekable();
        for i in 1..=max_n {
            let u = rng.uniform();
            count += (u <= (1.0 / (i as f64).sqrt()).min(1.0)) as u64;
            if next.peek() == Some(&i) {
                prefix.insert(i, count);
                next.next();
            }
        }
        let js: Vec<u64> = ladder
            .iter()
            .map(|&n| prefix[&scaled_floor(delta, n)])
            .collect();
        let vs: Vec<u64> = ladder
            .iter()
            .map(|&n| prefix[&n] - prefix[&(n - scaled_floor(delta_prime, n))])
            .collect();
        Ok((js, vs))
    })
    .into_complete()?;
    let mut j = vec![Vec::new(); ladder.len()];
    let mut v = vec![Vec::new(); ladder.len()];
    for (js, vs) in per_replica {
        for (li, (a, b)) in js.into_iter().zip(vs).enumerate() {
            j[li].push(a);
            v[li].push(b);
        }
    }
    Ok(JvSamples {
        delta,
        delta_prime,
        ladder: ladder.to_vec(),
        j,
        v,
        seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JvThresholds {
    pub tolerance: f64,
    pub max_outside: f64,
}

impl Default for JvThresholds {
    fn default() -> Self {
        JvThresholds {
            tolerance: 0.05,
            max_outside: 0.01,
        }
    }
}

/// At each `n`, the fraction of replicas with `|J_n/√n − 2√δ| > tol` (same for
/// `V` against `2 − 2√(1 − δ′)`) must not increase along the ladder and must
/// be at most `max_outside` at the top.
pub fn evaluate_jv(samples: &JvSamples, thresholds: JvThresholds) -> Result<TestReport> {
    let j_limit = 2.0 * samples.delta.sqrt();
    let v_limit = 2.0 - 2.0 * (1.0 - samples.delta_prime).sqrt();
    let mut checks = Vec::new();
    let mut notes = Vec::new();
    let top = samples.ladder.len() - 1;
    for (name, counts, limit, exact) in [
        ("J", &samples.j, j_limit, crate::observables::j_exact_mean as fn(f64, u64) -> Result<f64>),
        ("V", &samples.v, v_limit, crate::observables::v_exact_mean),
    ] {
        let param = if name == "J" { samples.delta } else { samples.delta_prime };
        let mut fractions = Vec::new();
        for (li, &n) in samples.ladder.iter().enumerate() {
            let root = (n as f64).sqrt();
            let scaled: Vec<f64> = counts[li].iter().map(|&c| c as f64 / root).collect();
            let outside = scaled
                .iter()
                .filter(|&&x| (x - limit).abs() > thresholds.tolerance)
                .count() as f64
                / scaled.len() as f64;
            fractions.push(outside);
            checks.push(
                Check::at_most(format!("n={n} {name} fraction outside {limit:.4} ± {}", thresholds.tolerance), outside, thresholds.max_outside)
                    .info(),
            );
            let exact_mean = exact(param, n)? / root;
            checks.push(
                Check::within(format!("n={n} mean {name}/sqrt(n) (exact {exact_mean:.5})"), mean(&scaled), limit - thresholds.tolerance, limit + thresholds.tolerance)
                    .info(),
            );
            notes.push(format!(
                "n={n}: finite-n bias of E[{name}]/sqrt(n) is {:.5}",
                exact_mean - limit
            ));
        }
        checks.push(Check::at_most(
            format!("{name} fraction outside at n={}", samples.ladder[top]),
            fractions[top],
            thresholds.max_outside,
        ));
        let worst_rise = fractions
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::NEG_INFINITY, f64::max);
        if fractions.len() > 1 {
            checks.push(Check::at_most(format!("{name} largest increase along ladder"), worst_rise, 0.0));
        }
    }
    Ok(TestReport::from_checks(
        "jv-asymptotics",
        samples.j[0].len() as u64,
        samples.seed,
        checks,
        notes,
    ))
}

pub fn test_jv_asymptotics(
    delta: f64,
    delta_prime: f64,
    ladder: &[u64],
    seed: u64,
    settings: RunSettings,
    thresholds: JvThresholds,
) -> Result<TestReport> {
    let samples = sample_jv(delta, delta_prime, ladder, seed, settings)?;
    evaluate_jv(&samples, thresholds)
}

// ---------------------------------------------------------------------------
// Excitation correction process

/// `sup_{t ≤ T} ‖D̂ⁿ_t‖` per replica for every `n` of the ladder.
///
/// One walk per replica serves the whole ladder: the supremum at scale `n`
/// only looks at its first `⌊nT⌋` steps.
pub fn sample_d_sup(config: &WalkConfig, ladder: &[u64], t_max: f64, settings: RunSettings) -> Result<Vec<Vec<f64>>> {
    if ladder.is_empty() || !(t_max > 0.0) {
        return Err(Error::domain("need a nonempty ladder and T > 0"));
    }
    let limits: Vec<u64> = ladder.iter().map(|&n| scaled_floor(t_max, n)).collect();
    let horizon = *limits.iter().max().unwrap();
    let config = config.with_horizon(horizon);
    config.validate()?;
    let per_replica = run_replicas(settings.replicas, settings.parallelism, |r| {
        let mut trackers: Vec<DProcessTracker> =
            limits.iter().map(|&l| DProcessTracker::new(config.dim, l)).collect();
        Walker::for_replica(&config, r).run(horizon, &mut trackers);
        Ok(trackers
            .iter()
            .zip(ladder)
            .map(|(tr, &n)| tr.sup(n))
            .collect::<Vec<f64>>())
    })
    .into_complete()?;
    Ok((0..ladder.len())
        .map(|li| per_replica.iter().map(|v| v[li]).collect())
        .collect())
}

pub fn evaluate_d_process(ladder: &[u64], sups: &[Vec<f64>], final_threshold: f64, seed: u64) -> TestReport {
    let medians: Vec<f64> = sups.iter().map(|s| median(s)).collect();
    let mut checks = Vec::new();
    for (li, &n) in ladder.iter().enumerate() {
        checks.push(Check::at_most(format!("n={n} median sup"), medians[li], f64::INFINITY).info());
    }
    for (li, w) in medians.windows(2).enumerate() {
        checks.push(Check::at_most(
            format!("median drop n={} -> n={}", ladder[li], ladder[li + 1]),
            w[1] - w[0],
            -f64::MIN_POSITIVE,
        ));
    }
    checks.push(Check::at_most(
        "final median sup",
        *medians.last().unwrap_or(&f64::NAN),
        final_threshold,
    ));
    let notes = vec![
        "sup over the grid k/n; between knots the interpolated path can exceed it by one jump (at most 2K/sqrt(n))".into(),
    ];
    TestReport::from_checks("d-process-vanishes", sups.first().map_or(0, |s| s.len() as u64), seed, checks, notes)
}

pub fn test_d_process_vanishes(
    config: &WalkConfig,
    ladder: &[u64],
    t_max: f64,
    settings: RunSettings,
    final_threshold: f64,
) -> Result<TestReport> {
    d_process_regime(config)?;
    let sups = sample_d_sup(config, ladder, t_max, settings)?;
    Ok(evaluate_d_process(ladder, &sups, final_threshold, config.seed))
}

// ---------------------------------------------------------------------------
// Increments at excitation times

/// Fixture generators that break the i.i.d. property of a law.
#[derive(Debug, Clone, Copy)]
pub enum Corruption {
    /// Repeats the previous draw with this probability (marginal kept, lag-1 dependence added).
    Sticky(f64),
    /// Squares the uniform, shifting mass towards the first atoms.
    Skewed,
}

#[derive(Debug, Clone)]
pub struct CorruptedSampler<'a> {
    law: &'a IncrementDistribution,
    mode: Corruption,
    last: Option<usize>,
}

impl<'a> CorruptedSampler<'a> {
    pub fn new(law: &'a IncrementDistribution, mode: Corruption) -> Self {
        CorruptedSampler {
            law,
            mode,
            last: None,
        }
    }
}

impl IncrementGenerator for CorruptedSampler<'_> {
    fn dim(&self) -> usize {
        self.law.dim()
    }

    fn jump_bound(&self) -> f64 {
        self.law.jump_bound()
    }

    fn generate(&mut self, _step: u64, u: f64, out: &mut [i64]) {
        let index = match self.mode {
            Corruption::Sticky(p) => match self.last {
                Some(i) if u < p => i,
                _ => self.law.index_for(((u - p) / (1.0 - p)).clamp(0.0, 1.0 - f64::EPSILON)),
            },
            Corruption::Skewed => self.law.index_for(u * u),
        };
        self.last = Some(index);
        out.copy_from_slice(self.law.vector(index));
    }
}

/// Collects the drifted increments taken at excitation times.
struct ExcitedDraws<'a> {
    categories: &'a HashMap<Vec<i64>, usize>,
    other: usize,
    sequence: Vec<usize>,
}

impl StepObserver for ExcitedDraws<'_> {
    fn observe(&mut self, event: &StepEvent<'_>) {
        if event.excited() {
            let c = self.categories.get(event.increment).copied().unwrap_or(self.other);
            self.sequence.push(c);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoppedDraws {
    /// Support vectors of the reference law; the last category collects anything else.
    pub support: Vec<Vec<i64>>,
    pub probs: Vec<f64>,
    pub counts: Vec<u64>,
    /// `pairs[a][b]`: consecutive excitations within one walk drawing `a` then `b`.
    pub pairs: Vec<Vec<u64>>,
    pub replicas: u64,
    pub seed: u64,
}

/// Runs `config` with the drifted law replaced by `make_gamma()` and pools
/// the draws at excitation times, categorized against `config.gamma`.
pub fn sample_stopped_draws<G, F>(config: &WalkConfig, n: u64, make_gamma: F, settings: RunSettings) -> Result<StoppedDraws>
where
    G: IncrementGenerator,
    F: Fn() -> G + Sync,
{
    let config = config.with_horizon(n);
    config.validate()?;
    let mut support: Vec<Vec<i64>> = Vec::new();
    let mut probs: Vec<f64> = Vec::new();
    let mut categories = HashMap::new();
    for a in config.gamma.atoms() {
        let idx = *categories.entry(a.vector.clone()).or_insert_with(|| {
            support.push(a.vector.clone());
            probs.push(0.0);
            support.len() - 1
        });
        probs[idx] += a.mass;
    }
    let other = support.len();
    probs.push(0.0);
    let k = other + 1;
    let bound = config.coord_bound();
    let sequences = run_replicas(settings.replicas, settings.parallelism, |r| {
        let mut draws = ExcitedDraws {
            categories: &categories,
            other,
            sequence: Vec::new(),
        };
        let mut walker = Walker::with_generators(
            &config.xi,
            make_gamma(),
            config.schedule,
            bound,
            StreamRng::for_replica(config.seed, r),
        );
        walker.run(n, &mut draws);
        Ok(draws.sequence)
    })
    .into_complete()?;
    let mut counts = vec![0u64; k];
    let mut pairs = vec![vec![0u64; k]; k];
    for seq in &sequences {
        for &c in seq {
            counts[c] += 1;
        }
        for w in seq.windows(2) {
            pairs[w[0]][w[1]] += 1;
        }
    }
    Ok(StoppedDraws {
        support,
        probs,
        counts,
        pairs,
        replicas: settings.replicas,
        seed: config.seed,
    })
}

pub fn evaluate_stopped_draws(draws: &StoppedDraws, level: f64, min_samples: u64) -> Result<TestReport> {
    let total: u64 = draws.counts.iter().sum();
    if total < min_samples {
        return Err(Error::Inconclusive(format!(
            "only {total} pooled excitation draws, need at least {min_samples}"
        )));
    }
    let gof = chi_square_gof(&draws.counts, &draws.probs)?;
    let lag = chi_square_independence(&draws.pairs)?;
    let mut checks = vec![
        Check::at_least(format!("goodness-of-fit p-value (chi2 = {:.3}, dof {})", gof.statistic, gof.dof), gof.p_value, level),
        Check::at_least(format!("lag-1 independence p-value (chi2 = {:.3}, dof {})", lag.statistic, lag.dof), lag.p_value, level),
    ];
    for (i, v) in draws.support.iter().enumerate() {
        let freq = draws.counts[i] as f64 / total as f64;
        let hw = binomial_halfwidth(draws.probs[i], total);
        checks.push(
            Check::within(format!("frequency of {v:?}"), freq, draws.probs[i] - hw, draws.probs[i] + hw)
                .info(),
        );
    }
    let notes = vec![format!("{total} pooled draws")];
    Ok(TestReport::from_checks("stopped-increments-iid", draws.replicas, draws.seed, checks, notes))
}

pub fn test_stopped_increments_iid(config: &WalkConfig, n: u64, settings: RunSettings, level: f64, min_samples: u64) -> Result<TestReport> {
    let draws = sample_stopped_draws(config, n, || &config.gamma, settings)?;
    evaluate_stopped_draws(&draws, level, min_samples)
}

// ---------------------------------------------------------------------------
// Range law of large numbers for the plain walk

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RangeTarget {
    /// `|mean − center| ≤ tolerance`.
    Within { center: f64, tolerance: f64 },
    AtMost(f64),
}

/// `|R_n|/n` per replica for the walk with i.i.d. `ξ` increments.
pub fn sample_range_ratio(xi: &IncrementDistribution, n: u64, seed: u64, settings: RunSettings) -> Result<Vec<f64>> {
    let config = WalkConfig::unexcited(xi.clone(), n, seed)?;
    run_replicas(settings.replicas, settings.parallelism, |r| {
        let mut w = Walker::for_replica(&config, r);
        w.run(n, &mut ());
        Ok(w.range() as f64 / n as f64)
    })
    .into_complete()
}

pub fn evaluate_range_lln(ratios: &[f64], target: RangeTarget, seed: u64) -> TestReport {
    let m = mean(ratios);
    let hw = Z95 * (variance(ratios) / ratios.len() as f64).sqrt();
    let check = match target {
        RangeTarget::Within { center, tolerance } => {
            Check::within("mean |R_n|/n", m, center - tolerance, center + tolerance)
        }
        RangeTarget::AtMost(bound) => Check::at_most("mean |R_n|/n", m, bound),
    };
    let notes = vec![format!("95% half-width of the mean: {hw:.5}")];
    TestReport::from_checks("range-lln-iid", ratios.len() as u64, seed, vec![check], notes)
}

pub fn test_range_lln_iid(xi: &IncrementDistribution, n: u64, target: RangeTarget, seed: u64, settings: RunSettings) -> Result<TestReport> {
    let ratios = sample_range_ratio(xi, n, seed, settings)?;
    Ok(evaluate_range_lln(&ratios, target, seed))
}

// ---------------------------------------------------------------------------
// Exploratory range ladder

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeRow {
    pub n: u64,
    pub mean_ratio: f64,
    pub ci_halfwidth: f64,
}

/// Exploratory output only: no verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub name: String,
    pub ladder: Vec<ProbeRow>,
    /// Escape estimate and its half-width, when supplied.
    pub pi_hat: Option<(f64, f64)>,
    pub replicas: u64,
    pub seed: u64,
}

pub fn probe_conjecture_range(
    config: &WalkConfig,
    ladder: &[u64],
    pi_hat: Option<(f64, f64)>,
    settings: RunSettings,
) -> Result<ProbeReport> {
    if config.schedule.beta() < 0.5 - 1e-12 {
        return Err(regime(
            "probe-conjecture",
            format!("the range probe is for beta >= 1/2 (got {})", config.schedule.beta()),
        ));
    }
    if ladder.is_empty() || ladder[0] == 0 || ladder.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::domain("n ladder must be positive and strictly increasing"));
    }
    let horizon = *ladder.last().unwrap();
    let config = config.with_horizon(horizon);
    config.validate()?;
    let ranges = run_replicas(settings.replicas, settings.parallelism, |r| {
        let mut snaps = Snapshots::new(config.dim, ladder.to_vec())?;
        Walker::for_replica(&config, r).run(horizon, &mut snaps);
        Ok(snaps.ranges)
    })
    .into_complete()?;
    let rows = ladder
        .iter()
        .enumerate()
        .map(|(li, &n)| {
            let ratios: Vec<f64> = ranges.iter().map(|r| r[li] as f64 / n as f64).collect();
            ProbeRow {
                n,
                mean_ratio: mean(&ratios),
                ci_halfwidth: Z95 * (variance(&ratios) / ratios.len() as f64).sqrt(),
            }
        })
        .collect();
    Ok(ProbeReport {
        name: "probe-conjecture-range".into(),
        ladder: rows,
        pi_hat,
        replicas: settings.replicas,
        seed: config.seed,
    })
}

/// `ℓ · x` for a lattice vector; exposed for report consumers.
pub fn drift_component(ell: &[f64], x: &[i64]) -> f64 {
    dot_unchecked(ell, x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::excitation::{make_example_gamma, make_example_xi, ExcitationSchedule};
    use crate::lattice::Direction;

    fn settings(replicas: u64) -> RunSettings {
        RunSettings {
            replicas,
            parallelism: 1,
        }
    }

    fn config(d: usize, delta: f64, c: f64, beta: f64, seed: u64) -> WalkConfig {
        WalkConfig::new(
            ExcitationSchedule::new(c, beta).unwrap(),
            make_example_xi(d).unwrap(),
            make_example_gamma(d, delta).unwrap(),
            Direction::axis(d, 0).unwrap(),
            1,
            seed,
        )
        .unwrap()
    }

    #[test]
    fn report_headline_and_verdict() {
        let checks = vec![
            Check::at_most("a", 0.01, 0.02),
            Check::at_least("b", 0.5, 0.99),
            Check::at_most("c", 10.0, 1.0).info(),
        ];
        let r = TestReport::from_checks("x", 10, 1, checks, vec![]);
        assert!(!r.pass);
        assert_eq!((r.statistic, r.threshold), (0.5, 0.99));
        let r = TestReport::from_checks("x", 10, 1, vec![Check::at_most("a", 0.019, 0.02), Check::at_least("b", 0.999, 0.5)], vec![]);
        assert!(r.pass);
        assert_eq!((r.statistic, r.threshold), (0.019, 0.02));
        assert!(!Check::at_most("nan", f64::NAN, 1.0).pass);
    }

    #[test]
    fn regime_guards() {
        let c4 = config(4, 0.75, 1.0, 0.5, 1);
        assert!(matches!(
            test_gaussian_marginal(&c4, 100, &[1.0], settings(10), GaussianThresholds::default()),
            Err(Error::Regime { .. })
        ));
        assert!(gaussian_regime(&config(2, 0.75, 1.0, 0.5, 1)).is_ok());
        assert!(gaussian_regime(&config(4, 0.75, 1.0, 0.6, 1)).is_ok());
        assert!(gaussian_regime(&WalkConfig::unexcited(make_example_xi(4).unwrap(), 1, 1).unwrap()).is_ok());
        assert!(matches!(
            test_d_process_vanishes(&config(2, 0.75, 1.0, 0.5, 1), &[10], 1.0, settings(5), 0.05),
            Err(Error::Regime { .. })
        ));
        let d1 = CoordinateSubset::new(4, vec![0]).unwrap();
        assert!(cone_regime(&c4, &d1, "kn-band").is_ok());
        assert!(cone_regime(&config(4, 0.75, 1.0, 0.75, 1), &d1, "kn-band").is_err());
        assert!(cone_regime(&config(4, 0.75, 2.0, 0.5, 1), &d1, "kn-band").is_err());
        let d2 = CoordinateSubset::new(4, vec![1]).unwrap();
        assert!(cone_regime(&c4, &d2, "kn-band").is_err());
        let c3 = config(3, 0.75, 1.0, 0.5, 1);
        assert!(cone_regime(&c3, &CoordinateSubset::new(3, vec![0]).unwrap(), "kn-band").is_err());
        assert!(matches!(
            test_range_upper(&config(2, 0.75, 1.0, 0.75, 1), 0.5, 100, 0.0, 0.02, settings(5)),
            Err(Error::Regime { .. })
        ));
        assert!(matches!(
            test_range_upper(&c4, 0.82, 100, 0.805, 0.02, settings(5)),
            Err(Error::Inconclusive(_))
        ));
        assert!(probe_conjecture_range(&config(2, 0.75, 1.0, 0.4, 1), &[10], None, settings(5)).is_err());
    }

    #[test]
    fn test_names_round_trip() {
        for t in DiagnosticTest::ALL {
            assert_eq!(t.name().parse::<DiagnosticTest>().unwrap(), t);
            assert_eq!(serde_json::to_string(&t).unwrap(), format!("\"{}\"", t.name()));
        }
        assert!("gaussian".parse::<DiagnosticTest>().is_err());
        let c4 = config(4, 0.75, 1.0, 0.5, 1);
        let d1 = CoordinateSubset::new(4, vec![0]).unwrap();
        let err = DiagnosticTest::GaussianMarginal.check_regime(&c4, &d1).unwrap_err().to_string();
        assert!(err.contains("beta = 1/2 with d = 2"), "{err}");
        assert!(DiagnosticTest::KnBand.check_regime(&c4, &d1).is_ok());
        assert!(DiagnosticTest::JvAsymptotics.check_regime(&c4, &d1).is_ok());
    }

    #[test]
    fn cone_constants_ordered() {
        let c = ConeConstants::new(0.25, 0.8068, 0.4946).unwrap();
        assert!((c.c1 - 0.25 * (1.0 - (1.0f64 - 0.4946).sqrt())).abs() < 1e-15);
        assert!((c.c2 - 0.25 * 0.8068f64.sqrt()).abs() < 1e-15);
        assert!(ConeConstants::new(0.25, 0.0, 0.5).is_err());
        for i in 1..=20 {
            for j in 1..=20 {
                let (pd, pdk) = (i as f64 / 20.0, j as f64 / 20.0);
                // 1 − √(1 − x) ≤ √x on [0, 1], and π_{d−k} ≤ π_d is not needed for this
                if pdk <= pd {
                    let c = ConeConstants::new(0.3, pd, pdk).unwrap();
                    assert!(0.0 < c.c1 && c.c1 <= c.c2 + 1e-15, "{pd} {pdk}");
                }
            }
        }
        let (lo, hi) = kn_band(0.8068, 0.0, 1.0);
        assert_eq!(lo, 0.0);
        assert!((hi - 2.0 * 0.8068f64.sqrt()).abs() < 1e-15);
        assert_eq!(kn_band(0.8, 0.5, 0.0), (0.0, 0.0));
    }

    #[test]
    fn gaussian_passes_for_plain_walk_and_fails_on_corrupted_samples() {
        let plain = WalkConfig::unexcited(make_example_xi(2).unwrap(), 1, 3).unwrap();
        let thresholds = GaussianThresholds {
            ks: 0.06,
            mean_norm: 0.08,
            covariance: 0.06,
        };
        let samples = sample_rescaled(&plain, 400, &[0.5, 1.0], settings(2000)).unwrap();
        let m2 = plain.xi.second_moment();
        let report = evaluate_gaussian(&samples, &m2, thresholds).unwrap();
        assert!(report.pass, "{report:#?}");

        let mut shifted = samples.clone();
        for t in &mut shifted.positions {
            for x in t.iter_mut() {
                x[0] += 0.3;
            }
        }
        assert!(!evaluate_gaussian(&shifted, &m2, thresholds).unwrap().pass);
        let mut scaled = samples;
        for t in &mut scaled.positions {
            for x in t.iter_mut() {
                x[1] *= 1.5;
            }
        }
        assert!(!evaluate_gaussian(&scaled, &m2, thresholds).unwrap().pass);
    }

    #[test]
    fn interpolated_grid_times() {
        let plain = WalkConfig::unexcited(make_example_xi(2).unwrap(), 1, 3).unwrap();
        let s = sample_rescaled(&plain, 4, &[0.375, 0.5], settings(3)).unwrap();
        for r in 0..3 {
            let trace = crate::engine::run_walk_replica(&plain.with_horizon(2), r).unwrap();
            let path = crate::observables::rescale_path(&trace, 4, &[0.375, 0.5]).unwrap();
            assert_eq!(s.positions[0][r as usize], path.samples[0].1);
            assert_eq!(s.positions[1][r as usize], path.samples[1].1);
        }
    }

    #[test]
    fn deterministic_reports() {
        let c = config(2, 0.75, 1.0, 0.75, 5);
        let a = test_d_process_vanishes(&c, &[100, 1000], 1.0, settings(30), 0.5).unwrap();
        let b = test_d_process_vanishes(&c, &[100, 1000], 1.0, RunSettings { replicas: 30, parallelism: 3 }, 0.5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn d_process_zero_without_excitation() {
        let tiny = config(2, 0.75, 1e-6, 0.75, 2);
        let sups = sample_d_sup(&tiny, &[100, 1000], 1.0, settings(20)).unwrap();
        // step 1 is excited with probability 1e-6 only
        assert!(sups.iter().flatten().all(|&s| s == 0.0));
        let r = evaluate_d_process(&[100, 1000], &sups, 0.05, 2);
        // medians are equal, not strictly decreasing
        assert!(!r.pass);
    }

    #[test]
    fn d_process_negative_control() {
        let rising = vec![vec![0.1, 0.2, 0.3], vec![0.2, 0.3, 0.4]];
        assert!(!evaluate_d_process(&[10, 100], &rising, 1.0, 0).pass);
        let falling = vec![vec![0.2, 0.3, 0.4], vec![0.01, 0.02, 0.03]];
        assert!(evaluate_d_process(&[10, 100], &falling, 0.05, 0).pass);
    }

    #[test]
    fn jv_matches_direct_counts() {
        let s = sample_jv(0.64, 0.36, &[100, 400], 11, settings(5)).unwrap();
        for r in 0..5 {
            let mut rng = StreamRng::for_replica(jv_stream_seed(11), r);
            let u: Vec<f64> = (0..400).map(|_| rng.uniform()).collect();
            for (li, &n) in [100u64, 400].iter().enumerate() {
                assert_eq!(s.j[li][r as usize], crate::observables::compute_j(0.64, n, &u).unwrap());
                assert_eq!(s.v[li][r as usize], crate::observables::compute_v(0.36, n, &u[..n as usize]).unwrap());
            }
        }
    }

    #[test]
    fn jv_negative_control() {
        let mut s = sample_jv(0.64, 0.36, &[100, 10_000], 1, settings(200)).unwrap();
        let loose = JvThresholds {
            tolerance: 0.5,
            max_outside: 0.05,
        };
        assert!(evaluate_jv(&s, loose).unwrap().pass);
        // inflate every J count by 10%
        for c in s.j.iter_mut().flatten() {
            *c += *c / 10 + 20;
        }
        assert!(!evaluate_jv(&s, loose).unwrap().pass);
    }

    #[test]
    fn stopped_draws_pass_and_corrupted_samplers_fail() {
        let c = config(2, 0.75, 1.0, 0.5, 4);
        let run = |mode: Option<Corruption>| {
            let draws = match mode {
                None => sample_stopped_draws(&c, 20_000, || &c.gamma, settings(60)).unwrap(),
                Some(m) => sample_stopped_draws(
                    &c,
                    20_000,
                    || CorruptedSampler::new(&c.gamma, m.clone()),
                    settings(60),
                )
                .unwrap(),
            };
            evaluate_stopped_draws(&draws, 0.01, 1000).unwrap()
        };
        let clean = run(None);
        assert!(clean.pass, "{clean:#?}");
        assert!(!run(Some(Corruption::Sticky(0.3))).pass);
        assert!(!run(Some(Corruption::Skewed)).pass);
        let few = sample_stopped_draws(&c, 100, || &c.gamma, settings(2)).unwrap();
        assert!(matches!(evaluate_stopped_draws(&few, 0.01, 1000), Err(Error::Inconclusive(_))));
    }

    #[test]
    fn single_atom_gamma_trivially_fits() {
        let draws = StoppedDraws {
            support: vec![vec![1, 0]],
            probs: vec![1.0, 0.0],
            counts: vec![5000, 0],
            pairs: vec![vec![4900, 0], vec![0, 0]],
            replicas: 1,
            seed: 0,
        };
        assert!(evaluate_stopped_draws(&draws, 0.01, 1000).unwrap().pass);
    }

    #[test]
    fn range_targets() {
        let r = evaluate_range_lln(&[0.5, 0.52, 0.48], RangeTarget::Within { center: 0.5, tolerance: 0.02 }, 0);
        assert!(r.pass);
        let r = evaluate_range_lln(&[0.5, 0.52, 0.48], RangeTarget::AtMost(0.08), 0);
        assert!(!r.pass);
        let trivially = test_range_upper(&config(2, 0.75, 1.0, 0.5, 1), 1.1, 1000, 0.0, 0.02, settings(20)).unwrap();
        assert!(trivially.pass);
    }

    #[test]
    fn kn_band_at_time_zero_and_negative_control() {
        let c = config(4, 1.0, 1.0, 0.5, 6);
        let s = sample_rescaled(&c, 2000, &[0.0, 1.0], settings(100)).unwrap();
        let r = evaluate_kn_band(&s, 0.8068, 0.4946, BandThresholds::default());
        assert!(r.checks[0].pass);
        assert!(r.pass, "{r:#?}");
        let mut bad = s.clone();
        for k in bad.k_scaled[1].iter_mut() {
            *k *= 3.0;
        }
        assert!(!evaluate_kn_band(&bad, 0.8068, 0.4946, BandThresholds::default()).pass);
        let cone = ConeConstants::for_config(&c, 0.8068, 0.4946).unwrap();
        assert_eq!(cone.mu_gamma, 0.25);
        let d1 = CoordinateSubset::new(4, vec![0]).unwrap();
        let r = evaluate_cone_drift(&s, c.ell.components(), &d1, &cone, 0.05);
        assert!(r.pass, "{r:#?}");
        let mut off = s;
        for x in off.positions[1].iter_mut() {
            x[2] += 0.5;
        }
        assert!(!evaluate_cone_drift(&off, c.ell.components(), &d1, &cone, 0.05).pass);
    }

    #[test]
    fn probe_ladder_shape() {
        let c = config(2, 0.75, 1.0, 2.0, 1);
        let p = probe_conjecture_range(&c, &[10, 100, 1000], Some((0.0, 0.0)), settings(50)).unwrap();
        assert_eq!(p.ladder.len(), 3);
        assert!(p.ladder.iter().all(|r| r.mean_ratio > 0.0 && r.mean_ratio <= 1.1));
    }
}
