//! Experiment configuration files.
//!
//! The format is TOML with three sections. Axes are numbered from 1 in the
//! file and from 0 everywhere in code.
//!
//! ```toml
//! [model]
//! d = 2
//! beta = 0.75
//! c = 1.0                  # optional, default 1
//! ell = [1.0, 0.0]         # optional, default e_1
//! subset = [1]             # optional, default: the axes ell uses
//! xi = { example = "example-xi" }                  # optional, this is the default
//! gamma = { example = "example-gamma", delta = 0.75 }
//! # or an explicit law:
//! # [[model.gamma.atoms]]
//! # vector = [1, 0]
//! # mass = 0.375
//!
//! [experiment]
//! seed = 1
//! horizon = 10000          # optional
//! replicas = 100           # optional
//! checkpoints = [0.25, 0.5, 0.75, 1.0]   # fractions of the horizon
//! parallelism = 1
//! pi_horizons = [10, 100, 1000]          # escape-probability ladder
//!
//! [diagnostics]
//! tests = ["gaussian-marginal"]
//! ```
//!
//! Every key of `[diagnostics]` has a default; see [`DiagnosticsSection`].

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::diagnostics::{BandThresholds, DiagnosticTest, GaussianThresholds, JvThresholds, RangeTarget, RunSettings};
use crate::engine::WalkConfig;
use crate::error::Error;
use crate::excitation::{make_example_gamma, make_example_xi, Atom, ExcitationSchedule, IncrementDistribution};
use crate::lattice::{CoordinateSubset, Direction};
use crate::montecarlo::{ExperimentPlan, PiEstimate};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub model: ModelSection,
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub diagnostics: DiagnosticsSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub d: usize,
    pub beta: f64,
    #[serde(default = "one")]
    pub c: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ell: Option<Vec<f64>>,
    /// One-based axes of the drift subset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subset: Option<Vec<usize>>,
    #[serde(default = "LawSpec::example_xi")]
    pub xi: LawSpec,
    pub gamma: LawSpec,
}

/// A named example law or an explicit atom list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LawSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub example: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atoms: Option<Vec<AtomSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jump_bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomSpec {
    pub vector: Vec<i64>,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub seed: u64,
    #[serde(default = "default_horizon")]
    pub horizon: u64,
    #[serde(default = "default_replicas")]
    pub replicas: u64,
    #[serde(default = "default_checkpoints")]
    pub checkpoints: Vec<f64>,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    #[serde(default = "default_pi_horizons")]
    pub pi_horizons: Vec<u64>,
    /// Write the full step-by-step trace of replica 0 (skipped above 10^6 steps unless set).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub full_trace: Option<bool>,
}

/// An escape probability given literally or by a file written by `estimate-pi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PiSource {
    Value(f64),
    Estimate(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiagnosticsSection {
    pub tests: Vec<String>,
    /// Diffusive scale `n` for rescaled-path tests.
    pub n: u64,
    pub t_points: Vec<f64>,
    pub n_ladder: Vec<u64>,
    pub t_max: f64,
    pub ks: f64,
    pub mean_norm: f64,
    pub covariance: f64,
    pub band_fraction: f64,
    pub slack_floor: f64,
    pub slack_coefficient: f64,
    pub jv_delta: f64,
    pub jv_delta_prime: f64,
    pub jv_tolerance: f64,
    pub jv_max_outside: f64,
    pub d_threshold: f64,
    pub gof_level: f64,
    pub gof_min_samples: u64,
    /// `δ` of the range upper bound; defaults to `pi_d + range_margin + 0.03`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub range_delta: Option<f64>,
    pub range_margin: f64,
    pub range_tolerance: f64,
    /// When set, the range LLN test checks `mean ≤ bound` instead of closeness to `pi_d`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub range_at_most: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pi_d: Option<PiSource>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pi_dk: Option<PiSource>,
}

fn one() -> f64 {
    1.0
}
fn default_horizon() -> u64 {
    10_000
}
fn default_replicas() -> u64 {
    100
}
fn default_checkpoints() -> Vec<f64> {
    vec![0.25, 0.5, 0.75, 1.0]
}
fn default_parallelism() -> usize {
    1
}
fn default_pi_horizons() -> Vec<u64> {
    vec![10, 100, 1_000, 10_000]
}

impl Default for DiagnosticsSection {
    fn default() -> Self {
        let g = GaussianThresholds::default();
        let b = BandThresholds::default();
        let j = JvThresholds::default();
        DiagnosticsSection {
            tests: Vec::new(),
            n: 10_000,
            t_points: vec![0.25, 0.5, 1.0],
            n_ladder: vec![1_000, 10_000, 100_000],
            t_max: 1.0,
            ks: g.ks,
            mean_norm: g.mean_norm,
            covariance: g.covariance,
            band_fraction: b.in_band_fraction,
            slack_floor: b.slack_floor,
            slack_coefficient: b.slack_coefficient,
            jv_delta: 0.64,
            jv_delta_prime: 0.36,
            jv_tolerance: j.tolerance,
            jv_max_outside: j.max_outside,
            d_threshold: 0.05,
            gof_level: 0.01,
            gof_min_samples: 1_000,
            range_delta: None,
            range_margin: 0.02,
            range_tolerance: 0.02,
            range_at_most: None,
            pi_d: None,
            pi_dk: None,
        }
    }
}

impl LawSpec {
    pub fn example_xi() -> Self {
        LawSpec {
            example: Some("example-xi".into()),
            delta: None,
            atoms: None,
            jump_bound: None,
        }
    }

    pub fn example_gamma(delta: f64) -> Self {
        LawSpec {
            example: Some("example-gamma".into()),
            delta: Some(delta),
            atoms: None,
            jump_bound: None,
        }
    }

    fn build(&self, d: usize, path: &str, issues: &mut Issues) -> Option<IncrementDistribution> {
        match (&self.example, &self.atoms) {
            (Some(_), Some(_)) => {
                issues.push(path, "give either `example` or `atoms`, not both");
                None
            }
            (None, None) => {
                issues.push(path, "missing required key `example` or `atoms`");
                None
            }
            (Some(name), None) => {
                let built = match name.as_str() {
                    "example-xi" => {
                        if self.delta.is_some() {
                            issues.push(&format!("{path}.delta"), "example-xi takes no delta");
                            return None;
                        }
                        make_example_xi(d)
                    }
                    "example-gamma" => match self.delta {
                        Some(delta) => make_example_gamma(d, delta),
                        None => {
                            issues.push(path, "missing required key `delta` for example-gamma");
                            return None;
                        }
                    },
                    other => {
                        issues.push(
                            &format!("{path}.example"),
                            format!("unknown law {other:?}; expected \"example-xi\" or \"example-gamma\""),
                        );
                        return None;
                    }
                };
                let key = if self.delta.is_some() { format!("{path}.delta") } else { path.to_string() };
                built.map_err(|e| issues.push(&key, rule(&e))).ok()
            }
            (None, Some(atoms)) => {
                if let Some(a) = atoms.iter().find(|a| a.vector.len() != d) {
                    issues.push(
                        &format!("{path}.atoms"),
                        format!("atom {:?} has {} coordinates, model has d = {d}", a.vector, a.vector.len()),
                    );
                    return None;
                }
                let atoms = atoms
                    .iter()
                    .map(|a| Atom {
                        vector: a.vector.clone(),
                        mass: a.mass,
                    })
                    .collect();
                IncrementDistribution::new(atoms, self.jump_bound)
                    .map_err(|e| issues.push(&format!("{path}.atoms"), rule(&e)))
                    .ok()
            }
        }
    }
}

/// The message of an error without its category prefix.
fn rule(e: &Error) -> String {
    match e {
        Error::Config(m) | Error::Domain(m) => m.clone(),
        Error::Regime { requirement, .. } => requirement.clone(),
        other => other.to_string(),
    }
}

/// One problem found in a config file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfigIssue {
    /// One-based line, when the problem can be located.
    pub line: Option<usize>,
    /// Dotted key path, e.g. `model.gamma.delta`.
    pub key: String,
    pub message: String,
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: ")?,
            None => write!(f, "(no line): ")?,
        }
        if !self.key.is_empty() {
            write!(f, "{}: ", self.key)?;
        }
        f.write_str(&self.message)
    }
}

/// Every problem found while parsing and validating a config.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigErrors(pub Vec<ConfigIssue>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, issue) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{issue}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

impl From<ConfigErrors> for Error {
    fn from(e: ConfigErrors) -> Self {
        Error::Config(e.to_string())
    }
}

struct Issues<'a> {
    text: &'a str,
    found: Vec<ConfigIssue>,
}

impl Issues<'_> {
    fn push(&mut self, key: &str, message: impl Into<String>) {
        self.found.push(ConfigIssue {
            line: locate_key(self.text, key),
            key: key.to_string(),
            message: message.into(),
        });
    }
}

/// Line of `key` (dotted path) in `text`, falling back to the enclosing table
/// or inline-table line.
pub fn locate_key(text: &str, key: &str) -> Option<usize> {
    let parts: Vec<&str> = key.split('.').collect();
    for split in (1..parts.len()).rev() {
        let table = parts[..split].join(".");
        let rest = &parts[split..];
        let mut current = String::new();
        let mut header_line = None;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.starts_with('[') {
                current = line.trim_matches(|c| c == '[' || c == ']').trim().to_string();
                if current == table {
                    header_line.get_or_insert(i + 1);
                }
                continue;
            }
            if current != table {
                continue;
            }
            let Some((lhs, _)) = line.split_once('=') else { continue };
            let lhs = lhs.trim();
            let first = rest[0];
            if lhs == first || lhs == rest.join(".") {
                return Some(i + 1);
            }
        }
        if header_line.is_some() {
            return header_line;
        }
    }
    let section = parts[0];
    text.lines()
        .position(|l| l.trim().trim_matches(|c| c == '[' || c == ']') == section)
        .map(|i| i + 1)
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Everything a run needs, built from a validated file.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedConfig {
    pub file: ConfigFile,
    pub walk: WalkConfig,
    pub subset: CoordinateSubset,
    pub tests: Vec<DiagnosticTest>,
}

/// Parses and validates `text`; defaults are filled into the returned file.
pub fn parse_config(text: &str) -> Result<ResolvedConfig, ConfigErrors> {
    let mut file: ConfigFile = toml::from_str(text).map_err(|e| {
        ConfigErrors(vec![ConfigIssue {
            line: e.span().map(|s| line_of_offset(text, s.start)),
            key: String::new(),
            message: e.message().trim().to_string(),
        }])
    })?;
    let mut issues = Issues {
        text,
        found: Vec::new(),
    };
    let resolved = file.resolve(&mut issues);
    if !issues.found.is_empty() {
        return Err(ConfigErrors(issues.found));
    }
    let (walk, subset, tests) = resolved.expect("no issues implies a resolved config");
    file.fill_defaults(&subset);
    Ok(ResolvedConfig {
        file,
        walk,
        subset,
        tests,
    })
}

impl ConfigFile {
    /// TOML text that parses back to an equal file.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    fn fill_defaults(&mut self, subset: &CoordinateSubset) {
        let m = &mut self.model;
        if m.ell.is_none() {
            let mut e1 = vec![0.0; m.d];
            e1[0] = 1.0;
            m.ell = Some(e1);
        }
        if m.subset.is_none() {
            m.subset = Some(subset.indices().iter().map(|a| a + 1).collect());
        }
    }

    fn resolve(&self, issues: &mut Issues) -> Option<(WalkConfig, CoordinateSubset, Vec<DiagnosticTest>)> {
        let m = &self.model;
        if m.d < 2 {
            issues.push("model.d", format!("dimension must be at least 2, got {}", m.d));
            return None;
        }
        let schedule = ExcitationSchedule::new(m.c, m.beta)
            .map_err(|e| issues.push(if m.c > 0.0 && m.c.is_finite() { "model.beta" } else { "model.c" }, rule(&e)))
            .ok();
        let xi = m.xi.build(m.d, "model.xi", issues);
        let gamma = m.gamma.build(m.d, "model.gamma", issues);
        let ell = match &m.ell {
            None => Direction::axis(m.d, 0).ok(),
            Some(v) if v.len() != m.d => {
                issues.push("model.ell", format!("ell has {} components, model has d = {}", v.len(), m.d));
                None
            }
            Some(v) => Direction::new(v.clone())
                .map_err(|e| issues.push("model.ell", rule(&e)))
                .ok(),
        };
        let subset = match (&m.subset, &ell) {
            (Some(axes), _) => {
                if let Some(&bad) = axes.iter().find(|&&a| a == 0 || a > m.d) {
                    issues.push("model.subset", format!("axis {bad} outside 1..={}", m.d));
                    None
                } else {
                    CoordinateSubset::new(m.d, axes.iter().map(|a| a - 1).collect())
                        .map_err(|e| issues.push("model.subset", rule(&e)))
                        .ok()
                }
            }
            (None, Some(ell)) => CoordinateSubset::new(m.d, ell.support()).ok(),
            (None, None) => None,
        };
        if let (Some(s), Some(l)) = (&subset, &ell) {
            if !s.spans(l) {
                issues.push("model.subset", "drift direction ell is not spanned by the subset axes");
            }
        }

        let e = &self.experiment;
        if e.horizon == 0 {
            issues.push("experiment.horizon", "horizon must be at least 1");
        }
        if e.replicas == 0 {
            issues.push("experiment.replicas", "replicas must be at least 1");
        }
        if e.parallelism == 0 {
            issues.push("experiment.parallelism", "parallelism must be at least 1");
        }
        if e.checkpoints.iter().any(|t| !(0.0..=1.0).contains(t)) {
            issues.push("experiment.checkpoints", "checkpoints are fractions of the horizon in [0, 1]");
        }
        if e.pi_horizons.is_empty() || e.pi_horizons[0] == 0 || e.pi_horizons.windows(2).any(|w| w[0] >= w[1]) {
            issues.push("experiment.pi_horizons", "pi_horizons must be positive and strictly increasing");
        }

        let dg = &self.diagnostics;
        let mut tests = Vec::new();
        for name in &dg.tests {
            match name.parse::<DiagnosticTest>() {
                Ok(t) => tests.push(t),
                Err(err) => issues.push("diagnostics.tests", rule(&err)),
            }
        }
        for (key, v) in [
            ("ks", dg.ks),
            ("mean_norm", dg.mean_norm),
            ("covariance", dg.covariance),
            ("t_max", dg.t_max),
            ("jv_tolerance", dg.jv_tolerance),
            ("d_threshold", dg.d_threshold),
            ("range_tolerance", dg.range_tolerance),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                issues.push(&format!("diagnostics.{key}"), format!("{key} must be positive"));
            }
        }
        for (key, v) in [
            ("band_fraction", dg.band_fraction),
            ("jv_max_outside", dg.jv_max_outside),
            ("gof_level", dg.gof_level),
        ] {
            if !(0.0..=1.0).contains(&v) {
                issues.push(&format!("diagnostics.{key}"), format!("{key} must lie in [0, 1]"));
            }
        }
        if dg.n == 0 {
            issues.push("diagnostics.n", "n must be at least 1");
        }
        if dg.t_points.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
            issues.push("diagnostics.t_points", "t_points must be finite and nonnegative");
        }
        if dg.n_ladder.is_empty() || dg.n_ladder[0] == 0 || dg.n_ladder.windows(2).any(|w| w[0] >= w[1]) {
            issues.push("diagnostics.n_ladder", "n_ladder must be positive and strictly increasing");
        }
        if !(dg.jv_delta > 0.0 && dg.jv_delta <= 1.0) {
            issues.push("diagnostics.jv_delta", "jv_delta must lie in (0, 1]");
        }
        if !(dg.jv_delta_prime > 0.0 && dg.jv_delta_prime < 1.0) {
            issues.push("diagnostics.jv_delta_prime", "jv_delta_prime must lie in (0, 1)");
        }
        for (key, src) in [("pi_d", &dg.pi_d), ("pi_dk", &dg.pi_dk)] {
            if let Some(PiSource::Value(v)) = src {
                if !(*v >= 0.0 && *v <= 1.0) {
                    issues.push(&format!("diagnostics.{key}"), format!("{key} must lie in [0, 1]"));
                }
            }
        }

        let walk = match (schedule, xi, gamma, ell) {
            (Some(s), Some(x), Some(g), Some(l)) => WalkConfig::new(s, x, g, l, e.horizon.max(1), e.seed)
                .map_err(|err| issues.push("model", rule(&err)))
                .ok(),
            _ => None,
        };
        if let (Some(w), Some(s)) = (&walk, &subset) {
            for &t in &tests {
                if let Err(err) = t.check_regime(w, s) {
                    issues.push("diagnostics.tests", format!("{t}: {}", rule(&err)));
                }
            }
        }
        if !issues.found.is_empty() {
            return None;
        }
        Some((walk?, subset?, tests))
    }
}

impl ResolvedConfig {
    pub fn settings(&self) -> RunSettings {
        RunSettings {
            replicas: self.file.experiment.replicas,
            parallelism: self.file.experiment.parallelism,
        }
    }

    pub fn plan(&self) -> ExperimentPlan {
        ExperimentPlan {
            base_config: self.walk.clone(),
            replicas: self.file.experiment.replicas,
            checkpoint_times: self.file.experiment.checkpoints.clone(),
            parallelism: self.file.experiment.parallelism,
        }
    }

    /// Replaces seed and parallelism (the only settings the environment may override).
    pub fn override_run(&mut self, seed: Option<u64>, parallelism: Option<usize>) {
        if let Some(seed) = seed {
            self.file.experiment.seed = seed;
            self.walk.seed = seed;
        }
        if let Some(p) = parallelism {
            self.file.experiment.parallelism = p.max(1);
        }
    }

    pub fn gaussian_thresholds(&self) -> GaussianThresholds {
        let d = &self.file.diagnostics;
        GaussianThresholds {
            ks: d.ks,
            mean_norm: d.mean_norm,
            covariance: d.covariance,
        }
    }

    pub fn band_thresholds(&self) -> BandThresholds {
        let d = &self.file.diagnostics;
        BandThresholds {
            in_band_fraction: d.band_fraction,
            slack_floor: d.slack_floor,
            slack_coefficient: d.slack_coefficient,
        }
    }

    pub fn jv_thresholds(&self) -> JvThresholds {
        let d = &self.file.diagnostics;
        JvThresholds {
            tolerance: d.jv_tolerance,
            max_outside: d.jv_max_outside,
        }
    }

    pub fn range_target(&self, pi_d: Option<f64>) -> Result<RangeTarget, Error> {
        let d = &self.file.diagnostics;
        match (d.range_at_most, pi_d) {
            (Some(b), _) => Ok(RangeTarget::AtMost(b)),
            (None, Some(center)) => Ok(RangeTarget::Within {
                center,
                tolerance: d.range_tolerance,
            }),
            (None, None) => Err(Error::Config(
                "range-lln-iid needs diagnostics.pi_d or diagnostics.range_at_most".into(),
            )),
        }
    }
}

/// A resolved escape probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiValue {
    pub value: f64,
    /// 95% half-width, when the value came from an estimate.
    pub halfwidth: Option<f64>,
    pub manifest_hash: Option<String>,
}

impl PiSource {
    /// Estimate files are resolved against `base` and must carry a hash
    /// matching their content.
    pub fn resolve(&self, base: &Path) -> Result<PiValue, Error> {
        match self {
            PiSource::Value(v) => Ok(PiValue {
                value: *v,
                halfwidth: None,
                manifest_hash: None,
            }),
            PiSource::Estimate(path) => {
                let full = base.join(path);
                let text = std::fs::read_to_string(&full)
                    .map_err(|e| Error::Config(format!("cannot read escape estimate {}: {e}", full.display())))?;
                let est: PiEstimate = serde_json::from_str(&text)
                    .map_err(|e| Error::Config(format!("{} is not an escape estimate: {e}", full.display())))?;
                est.verify_hash()?;
                let (value, hw) = est.plateau();
                Ok(PiValue {
                    value,
                    halfwidth: Some(hw),
                    manifest_hash: Some(est.manifest_hash),
                })
            }
        }
    }
}
