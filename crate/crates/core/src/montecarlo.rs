//! Replica orchestration and escape-probability estimation.
//!
//! Replica `r` is a pure function of `(config, r)`: it draws only from
//! `stream(seed, r)`. Workers pull replica indices from a shared counter and
//! write results into the slot of that index, so outputs do not depend on the
//! worker count or on scheduling. Aggregates use pairwise summation over the
//! index-ordered results.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::engine::{StepObserver, WalkConfig, Walker};
use crate::error::{Error, Result};
use crate::excitation::IncrementDistribution;
use crate::observables::{scaled_floor, SeriesRecorder};
use crate::rng::{stream_key, StreamRng};

/// Two-sided 95% standard normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Bumped whenever a change alters the output of a cached estimate.
const PI_ALGORITHM_REVISION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub base_config: WalkConfig,
    pub replicas: u64,
    /// Snapshot times as fractions of the horizon, in `[0, 1]`.
    pub checkpoint_times: Vec<f64>,
    pub parallelism: usize,
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<()> {
        self.base_config.validate()?;
        if self.replicas == 0 {
            return Err(Error::config("replicas must be positive"));
        }
        if self.parallelism == 0 {
            return Err(Error::config("parallelism must be positive"));
        }
        if self
            .checkpoint_times
            .iter()
            .any(|t| !(0.0..=1.0).contains(t))
        {
            return Err(Error::config("checkpoint times must lie in [0, 1]"));
        }
        check_stream_keys(self.base_config.seed, self.replicas)
    }

    /// Checkpoint times converted to step indices.
    pub fn checkpoint_steps(&self) -> Vec<u64> {
        let mut steps: Vec<u64> = self
            .checkpoint_times
            .iter()
            .map(|&t| scaled_floor(t, self.base_config.horizon))
            .collect();
        steps.sort_unstable();
        steps.dedup();
        steps
    }
}

/// Rejects seeds whose replica streams would collide.
pub fn check_stream_keys(seed: u64, replicas: u64) -> Result<()> {
    let mut keys: Vec<u64> = (0..replicas).map(|r| stream_key(seed, r)).collect();
    keys.sort_unstable();
    if keys.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::config(format!(
            "seed {seed} maps two of {replicas} replicas to the same stream"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub time: u64,
    pub position: Vec<i64>,
    pub range: u64,
    pub k_count: u64,
    /// `sup_{s ≤ time} ‖D_s‖`, scaled by the horizon.
    pub d_sup: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicaSummary {
    pub replica: u64,
    pub final_position: Vec<i64>,
    pub range: u64,
    pub excitations: u64,
    pub checkpoints: Vec<Checkpoint>,
}

/// Index-ordered results of a batch of replicas.
#[derive(Debug, Clone)]
pub struct Batch<T> {
    /// `results[r]` is `None` only when replica `r` failed or was skipped after a failure.
    pub results: Vec<Option<T>>,
    pub failures: Vec<(u64, String)>,
}

impl<T> Batch<T> {
    pub fn is_complete(&self) -> bool {
        self.failures.is_empty() && self.results.iter().all(Option::is_some)
    }

    /// All results, or an `Incomplete` error naming the first failure.
    pub fn into_complete(self) -> Result<Vec<T>> {
        if !self.is_complete() {
            let message = self
                .failures
                .first()
                .map(|(r, m)| format!("replica {r}: {m}"))
                .unwrap_or_else(|| "aborted".to_string());
            return Err(Error::Incomplete {
                failed: self.failures.len(),
                message,
            });
        }
        Ok(self.results.into_iter().flatten().collect())
    }
}

fn panic_message(payload: Box<dyn std::any::Any + Send>) -> String {
    if let Some(s) = payload.downcast_ref::<&str>() {
        s.to_string()
    } else if let Some(s) = payload.downcast_ref::<String>() {
        s.clone()
    } else {
        "worker panicked".to_string()
    }
}

/// Runs `task(r)` for `r in 0..replicas` on `parallelism` threads.
///
/// The first failure (error or panic) stops workers from taking new replicas;
/// whatever finished is returned and the batch is flagged incomplete.
pub fn run_replicas<T, F>(replicas: u64, parallelism: usize, task: F) -> Batch<T>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync,
{
    let slots: Vec<Mutex<Option<T>>> = (0..replicas).map(|_| Mutex::new(None)).collect();
    let failures = Mutex::new(Vec::new());
    let next = AtomicU64::new(0);
    let abort = AtomicBool::new(false);
    let workers = parallelism.clamp(1, replicas.max(1) as usize);

    let work = || loop {
        if abort.load(Ordering::Relaxed) {
            break;
        }
        let r = next.fetch_add(1, Ordering::Relaxed);
        if r >= replicas {
            break;
        }
        match catch_unwind(AssertUnwindSafe(|| task(r))) {
            Ok(Ok(value)) => *slots[r as usize].lock().unwrap() = Some(value),
            Ok(Err(e)) => {
                abort.store(true, Ordering::Relaxed);
                failures.lock().unwrap().push((r, e.to_string()));
            }
            Err(payload) => {
                abort.store(true, Ordering::Relaxed);
                failures.lock().unwrap().push((r, panic_message(payload)));
            }
        }
    };
    if workers == 1 {
        work();
    } else {
        std::thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(work);
            }
        });
    }

    let mut failures = failures.into_inner().unwrap();
    failures.sort_by_key(|(r, _)| *r);
    Batch {
        results: slots.into_iter().map(|m| m.into_inner().unwrap()).collect(),
        failures,
    }
}

/// Runs replica `replica` of `config` for its full horizon with `observer` attached.
pub fn run_observed<O: StepObserver>(config: &WalkConfig, replica: u64, mut observer: O) -> O {
    let mut walker = Walker::for_replica(config, replica);
    walker.run(config.horizon, &mut observer);
    observer
}

fn summarize(plan: &ExperimentPlan, steps: &[u64], replica: u64) -> Result<ReplicaSummary> {
    let config = &plan.base_config;
    let mut walker = Walker::for_replica(config, replica);
    let mut recorder = SeriesRecorder::new(config.dim, config.horizon.max(1), steps.to_vec())?;
    walker.run(config.horizon, &mut recorder);
    let series = recorder.finish();
    let checkpoints = (0..series.checkpoints.len())
        .map(|j| Checkpoint {
            time: series.checkpoints[j],
            position: series.positions[j].clone(),
            range: series.range_size[j],
            k_count: series.k_count[j],
            d_sup: series.d_sup[j],
        })
        .collect();
    Ok(ReplicaSummary {
        replica,
        final_position: walker.position().to_vec(),
        range: walker.range(),
        excitations: walker.excitations(),
        checkpoints,
    })
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub summaries: Vec<ReplicaSummary>,
    pub complete: bool,
    pub failures: Vec<(u64, String)>,
}

/// Runs every replica of `plan`; see [`run_replicas`] for the failure contract.
pub fn run_experiment(plan: &ExperimentPlan) -> Result<ExperimentResult> {
    plan.validate()?;
    let steps = plan.checkpoint_steps();
    let batch = run_replicas(plan.replicas, plan.parallelism, |r| {
        summarize(plan, &steps, r)
    });
    let complete = batch.is_complete();
    Ok(ExperimentResult {
        summaries: batch.results.into_iter().flatten().collect(),
        complete,
        failures: batch.failures,
    })
}

/// Pairwise summation; the grouping depends only on the length of `xs`.
pub fn tree_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        n => tree_sum(&xs[..n / 2]) + tree_sum(&xs[n / 2..]),
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    tree_sum(xs) / xs.len() as f64
}

/// Unbiased sample variance (two-pass).
pub fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let sq: Vec<f64> = xs.iter().map(|x| (x - m) * (x - m)).collect();
    tree_sum(&sq) / (xs.len() - 1) as f64
}

/// Median of a copy of `xs` (mean of the middle pair for even lengths).
pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// 95% Wald half-width of a binomial proportion.
pub fn binomial_halfwidth(p: f64, trials: u64) -> f64 {
    Z95 * (p * (1.0 - p) / trials as f64).sqrt()
}

/// Survival ladder of the never-return event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiEstimate {
    pub horizons: Vec<u64>,
    pub survival_fraction: Vec<f64>,
    pub ci_halfwidth: Vec<f64>,
    pub replicas: u64,
    pub seed: u64,
    /// The increment law whose return probability was estimated.
    pub law: IncrementDistribution,
    pub manifest_hash: String,
}

impl PiEstimate {
    /// Checks that `manifest_hash` matches the recorded inputs.
    pub fn verify_hash(&self) -> Result<()> {
        let expected = pi_manifest_hash(&self.law, &self.horizons, self.replicas, self.seed);
        if expected != self.manifest_hash {
            return Err(Error::config(format!(
                "escape estimate hash {} does not match its inputs ({expected})",
                self.manifest_hash
            )));
        }
        Ok(())
    }

    /// The largest-horizon survival fraction and its half-width.
    pub fn plateau(&self) -> (f64, f64) {
        let last = self.horizons.len() - 1;
        (self.survival_fraction[last], self.ci_halfwidth[last])
    }
}

/// Return-time simulator for the plain walk; no visited set is needed.
///
/// Laws whose atoms each move along at most one axis (nearest-neighbour and
/// lazy laws) take a fast path that touches a single coordinate per step.
/// Both paths pick the atom with [`IncrementDistribution::index_for`].
enum ReturnSampler<'a> {
    SingleAxis {
        law: &'a IncrementDistribution,
        moves: Vec<(usize, i64)>,
    },
    General(&'a IncrementDistribution),
}

impl<'a> ReturnSampler<'a> {
    fn new(law: &'a IncrementDistribution) -> Self {
        let mut moves = Vec::with_capacity(law.atoms().len());
        for i in 0..law.atoms().len() {
            let v = law.vector(i);
            let mut nonzero = v.iter().enumerate().filter(|(_, &c)| c != 0);
            match (nonzero.next(), nonzero.next()) {
                (None, _) => moves.push((0, 0)),
                (Some((axis, &c)), None) => moves.push((axis, c)),
                _ => return ReturnSampler::General(law),
            }
        }
        ReturnSampler::SingleAxis { law, moves }
    }

    /// First time `1 ≤ n ≤ horizon` with `X_n = 0`, or `None`.
    fn first_return(&self, horizon: u64, rng: &mut StreamRng) -> Option<u64> {
        match self {
            ReturnSampler::SingleAxis { law, moves } => {
                let mut pos = vec![0i64; law.dim()];
                let mut nonzero = 0i64;
                for n in 1..=horizon {
                    let (axis, c) = moves[law.index_for(rng.uniform())];
                    let before = (pos[axis] != 0) as i64;
                    pos[axis] += c;
                    nonzero += (pos[axis] != 0) as i64 - before;
                    if nonzero == 0 {
                        return Some(n);
                    }
                }
                None
            }
            ReturnSampler::General(law) => {
                let mut pos = vec![0i64; law.dim()];
                for n in 1..=horizon {
                    let v = law.vector(law.index_for(rng.uniform()));
                    for (p, c) in pos.iter_mut().zip(v) {
                        *p += c;
                    }
                    if pos.iter().all(|&p| p == 0) {
                        return Some(n);
                    }
                }
                None
            }
        }
    }
}

#[derive(Serialize)]
struct PiManifest<'a> {
    kind: &'static str,
    revision: u32,
    atoms: Vec<(&'a [i64], f64)>,
    horizons: &'a [u64],
    replicas: u64,
    seed: u64,
}

fn pi_manifest_hash(law: &IncrementDistribution, horizons: &[u64], replicas: u64, seed: u64) -> String {
    let manifest = PiManifest {
        kind: "escape-probability",
        revision: PI_ALGORITHM_REVISION,
        atoms: law
            .atoms()
            .iter()
            .map(|a| (a.vector.as_slice(), a.mass))
            .collect(),
        horizons,
        replicas,
        seed,
    };
    let bytes = serde_json::to_vec(&manifest).expect("manifest serializes");
    hex::encode(Sha256::digest(&bytes))
}

/// Fraction of replicas with `X_n ≠ 0` for all `1 ≤ n ≤ h`, for each `h` in `horizons`.
///
/// Replica `r` draws one uniform per step from `stream(seed, r)` and stops at
/// its first return, so one set of walks serves every horizon and the ladder
/// is nonincreasing.
pub fn estimate_pi(
    law: &IncrementDistribution,
    horizons: &[u64],
    replicas: u64,
    seed: u64,
    parallelism: usize,
) -> Result<PiEstimate> {
    if replicas < 1000 {
        return Err(Error::domain(format!(
            "escape estimates need at least 1000 replicas, got {replicas}"
        )));
    }
    if horizons.is_empty() || horizons[0] == 0 || horizons.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::domain("horizons must be positive and strictly increasing"));
    }
    check_stream_keys(seed, replicas)?;
    let max_h = *horizons.last().unwrap();
    let sampler = ReturnSampler::new(law);
    let returns = run_replicas(replicas, parallelism, |r| {
        Ok(sampler.first_return(max_h, &mut StreamRng::for_replica(seed, r)))
    })
    .into_complete()?;

    let mut survival = Vec::with_capacity(horizons.len());
    let mut ci = Vec::with_capacity(horizons.len());
    for &h in horizons {
        let alive = returns.iter().filter(|t| t.is_none_or(|t| t > h)).count();
        let p = alive as f64 / replicas as f64;
        survival.push(p);
        ci.push(binomial_halfwidth(p, replicas));
    }
    Ok(PiEstimate {
        horizons: horizons.to_vec(),
        survival_fraction: survival,
        ci_halfwidth: ci,
        replicas,
        seed,
        law: law.clone(),
        manifest_hash: pi_manifest_hash(law, horizons, replicas, seed),
    })
}

/// [`estimate_pi`] backed by a directory of previous results keyed by manifest hash.
pub fn estimate_pi_cached(
    cache_dir: &Path,
    law: &IncrementDistribution,
    horizons: &[u64],
    replicas: u64,
    seed: u64,
    parallelism: usize,
) -> Result<PiEstimate> {
    let hash = pi_manifest_hash(law, horizons, replicas, seed);
    let path = cache_dir.join(format!("pi-{hash}.json"));
    if let Ok(text) = std::fs::read_to_string(&path) {
        if let Ok(cached) = serde_json::from_str::<PiEstimate>(&text) {
            if cached.manifest_hash == hash {
                return Ok(cached);
            }
        }
    }
    let estimate = estimate_pi(law, horizons, replicas, seed, parallelism)?;
    std::fs::create_dir_all(cache_dir)?;
    let tmp = path.with_extension("json.tmp");
    std::fs::write(&tmp, serde_json::to_vec_pretty(&estimate)?)?;
    std::fs::rename(&tmp, &path)?;
    Ok(estimate)
}

/// Decade ladder `10^1, 10^2, …` up to and including `max`.
pub fn decade_ladder(max: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut h = 10u64;
    while h < max {
        out.push(h);
        h = h.saturating_mul(10);
    }
    out.push(max);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::run_walk_replica;
    use crate::excitation::{make_example_gamma, make_example_xi, Atom, ExcitationSchedule};
    use crate::lattice::{CoordinateSubset, Direction};

    fn config(horizon: u64, seed: u64) -> WalkConfig {
        WalkConfig::new(
            ExcitationSchedule::new(1.0, 0.5).unwrap(),
            make_example_xi(3).unwrap(),
            make_example_gamma(3, 0.8).unwrap(),
            Direction::axis(3, 0).unwrap(),
            horizon,
            seed,
        )
        .unwrap()
    }

    fn plan(replicas: u64, parallelism: usize) -> ExperimentPlan {
        ExperimentPlan {
            base_config: config(2_000, 17),
            replicas,
            checkpoint_times: vec![0.0, 0.25, 1.0],
            parallelism,
        }
    }

    #[test]
    fn single_replica_matches_direct_walk() {
        let result = run_experiment(&plan(1, 1)).unwrap();
        let trace = run_walk_replica(&plan(1, 1).base_config, 0).unwrap();
        let s = &result.summaries[0];
        assert_eq!(s.final_position, trace.position(2_000));
        assert_eq!(s.checkpoints[1].position, trace.position(500));
        assert_eq!(s.checkpoints[1].time, 500);
        assert_eq!(
            s.range,
            crate::observables::range_series(&trace)[2_000]
        );
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let a = run_experiment(&plan(24, 1)).unwrap();
        let b = run_experiment(&plan(24, 8)).unwrap();
        assert!(a.complete && b.complete);
        assert_eq!(a.summaries, b.summaries);
        let ra: Vec<f64> = a.summaries.iter().map(|s| s.range as f64).collect();
        let rb: Vec<f64> = b.summaries.iter().map(|s| s.range as f64).collect();
        assert_eq!(mean(&ra).to_bits(), mean(&rb).to_bits());
    }

    #[test]
    fn failure_flags_incomplete() {
        let batch = run_replicas(50, 1, |r| {
            if r == 7 {
                panic!("boom");
            }
            Ok(r)
        });
        assert!(!batch.is_complete());
        assert_eq!(batch.failures, vec![(7, "boom".to_string())]);
        assert_eq!(batch.results[3], Some(3));
        assert!(batch.results[8].is_none());
        assert!(matches!(batch.into_complete(), Err(Error::Incomplete { failed: 1, .. })));

        let batch = run_replicas(10, 4, |r| {
            if r == 2 {
                Err(Error::domain("bad replica"))
            } else {
                Ok(r)
            }
        });
        assert!(!batch.is_complete());
    }

    #[test]
    fn invalid_plans_refused() {
        let mut p = plan(0, 1);
        assert!(p.validate().is_err());
        p.replicas = 5;
        p.checkpoint_times = vec![1.5];
        assert!(p.validate().is_err());
    }

    #[test]
    fn tree_sum_is_exact_on_integers_and_stable() {
        let xs: Vec<f64> = (1..=1000).map(|i| i as f64).collect();
        assert_eq!(tree_sum(&xs), 500_500.0);
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!((variance(&[1.0, 2.0, 3.0, 4.0]) - 5.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn fast_and_general_paths_agree() {
        let lazy = make_example_xi(4)
            .unwrap()
            .project_complement(&CoordinateSubset::new(4, vec![0]).unwrap())
            .unwrap();
        assert!(matches!(ReturnSampler::new(&lazy), ReturnSampler::SingleAxis { .. }));
        for law in [lazy, make_example_gamma(3, 0.7).unwrap()] {
            let fast = ReturnSampler::new(&law);
            let general = ReturnSampler::General(&law);
            for r in 0..300 {
                assert_eq!(
                    fast.first_return(5_000, &mut StreamRng::for_replica(1, r)),
                    general.first_return(5_000, &mut StreamRng::for_replica(1, r))
                );
            }
        }
        let diagonal = IncrementDistribution::new(
            vec![
                Atom { vector: vec![1, 1], mass: 0.5 },
                Atom { vector: vec![-1, -1], mass: 0.5 },
            ],
            None,
        )
        .unwrap();
        let sampler = ReturnSampler::new(&diagonal);
        assert!(matches!(sampler, ReturnSampler::General(_)));
        // a ±(1,1) walk returns at time 2 with probability 1/2
        let hits = (0..4000)
            .filter(|&r| sampler.first_return(2, &mut StreamRng::for_replica(2, r)) == Some(2))
            .count();
        assert!((hits as f64 / 4000.0 - 0.5).abs() < 0.04);
    }

    #[test]
    fn single_atom_never_returns() {
        let law = IncrementDistribution::single_atom(vec![1, 0]).unwrap();
        let est = estimate_pi(&law, &[10, 100, 1000], 1000, 3, 1).unwrap();
        assert_eq!(est.survival_fraction, vec![1.0, 1.0, 1.0]);
        assert_eq!(est.plateau(), (1.0, 0.0));
    }

    #[test]
    fn ladder_monotone_and_plausible() {
        let est = estimate_pi(&make_example_xi(3).unwrap(), &decade_ladder(10_000), 4000, 9, 1)
            .unwrap();
        assert!(est
            .survival_fraction
            .windows(2)
            .all(|w| w[1] <= w[0]));
        // first step can never return; two steps return with probability 1/6
        assert_eq!(est.survival_fraction[0] <= 1.0, true);
        let (p, ci) = est.plateau();
        assert!((p - 0.6595).abs() < 3.0 * ci + 0.01, "{p} ± {ci}");
        assert!(estimate_pi(&make_example_xi(3).unwrap(), &[10], 999, 1, 1).is_err());
        assert!(estimate_pi(&make_example_xi(3).unwrap(), &[10, 10], 1000, 1, 1).is_err());
    }

    #[test]
    fn two_step_return_probability() {
        // P(X_2 = 0) = 1/(2d) for the nearest-neighbour walk
        let est = estimate_pi(&make_example_xi(2).unwrap(), &[1, 2], 40_000, 2, 1).unwrap();
        assert_eq!(est.survival_fraction[0], 1.0);
        let returned = 1.0 - est.survival_fraction[1];
        assert!((returned - 0.25).abs() < 4.0 * (0.25f64 * 0.75 / 40_000.0).sqrt());
    }

    #[test]
    fn lazy_stays_count_as_returns() {
        // the projected law stays put with mass 1/4, so X_1 = 0 with probability 1/4
        let lazy = make_example_xi(4)
            .unwrap()
            .project_complement(&CoordinateSubset::new(4, vec![0]).unwrap())
            .unwrap();
        let est = estimate_pi(&lazy, &[1], 40_000, 2, 1).unwrap();
        assert!((est.survival_fraction[0] - 0.75).abs() < 4.0 * (0.1875f64 / 40_000.0).sqrt());
    }

    #[test]
    fn ci_scales_with_replicas() {
        // Wald half-width scales as replicas^{-1/2}: doubling divides it by √2, quadrupling halves it
        let w1 = binomial_halfwidth(0.66, 10_000);
        assert!((binomial_halfwidth(0.66, 20_000) / w1 - 0.5f64.sqrt()).abs() < 1e-12);
        assert!((binomial_halfwidth(0.66, 40_000) / w1 - 0.5).abs() < 1e-12);
        let law = make_example_xi(3).unwrap();
        let a = estimate_pi(&law, &[1000], 2000, 4, 1).unwrap();
        let b = estimate_pi(&law, &[1000], 8000, 4, 1).unwrap();
        assert!((b.ci_halfwidth[0] / a.ci_halfwidth[0] - 0.5).abs() < 0.1);
    }

    #[test]
    fn cache_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let law = make_example_xi(2).unwrap();
        let a = estimate_pi_cached(dir.path(), &law, &[10, 100], 1000, 1, 1).unwrap();
        let b = estimate_pi_cached(dir.path(), &law, &[10, 100], 1000, 1, 1).unwrap();
        assert_eq!(a, b);
        let c = estimate_pi_cached(dir.path(), &law, &[10, 100], 1000, 2, 1).unwrap();
        assert_ne!(a.manifest_hash, c.manifest_hash);
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 2);
        a.verify_hash().unwrap();
        let mut tampered = a.clone();
        tampered.seed = 2;
        assert!(tampered.verify_hash().is_err());
    }

    #[test]
    fn decade_ladder_shape() {
        assert_eq!(decade_ladder(1000), vec![10, 100, 1000]);
        assert_eq!(decade_ladder(5000), vec![10, 100, 1000, 5000]);
    }
}
