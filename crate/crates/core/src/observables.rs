//! Functionals of a walk: range `|R_n|`, excitation count `|K_n|`, the
//! small-uniform counts `J_n(δ)` and `V_n(δ′)`, the excitation correction
//! process `D` and the interpolated path `B̂ⁿ_t`.
//!
//! Every functional exists in two forms: a pure function over a finished
//! [`WalkTrace`] and an online [`StepObserver`] that keeps only what the
//! functional needs, for horizons where storing the trace is wasteful.

use serde::{Deserialize, Serialize};

use crate::engine::{StepEvent, StepObserver, WalkTrace};
use crate::error::{Error, Result};
use crate::excitation::ExcitationSchedule;

/// `⌊x·n⌋`, snapping to the nearest integer when `x·n` is within rounding of it.
pub fn scaled_floor(x: f64, n: u64) -> u64 {
    let y = x * n as f64;
    let r = y.round();
    if (y - r).abs() <= 1e-9 * r.abs().max(1.0) {
        r.max(0.0) as u64
    } else {
        y.floor().max(0.0) as u64
    }
}

/// `|R_n|` for `n = 0..=horizon`.
pub fn range_series(trace: &WalkTrace) -> Vec<u64> {
    let mut count = 0u64;
    trace
        .first_visit
        .iter()
        .map(|&new| {
            count += new as u64;
            count
        })
        .collect()
}

/// `|K_n|` for `n = 0..=horizon`, counted from the excitation flags.
pub fn k_series(trace: &WalkTrace) -> Vec<u64> {
    let mut count = 0u64;
    trace
        .excited
        .iter()
        .map(|&e| {
            count += e as u64;
            count
        })
        .collect()
}

/// `|K_n|` recomputed from first-visit times: with `ψ_j` the time of the
/// `j`-th new site and `φ_j = ψ_j + 1`, count the `j` with `φ_j ≤ n` and
/// `U_{φ_j} ≤ p_{φ_j}`.
pub fn k_series_from_first_visits(trace: &WalkTrace, schedule: &ExcitationSchedule) -> Vec<u64> {
    let horizon = trace.horizon() as usize;
    let mut increments = vec![0u64; horizon + 1];
    for (psi, &new) in trace.first_visit.iter().enumerate() {
        let phi = psi + 1;
        if new && phi <= horizon && trace.uniforms[phi] <= schedule.p_unchecked(phi as u64) {
            increments[phi] = 1;
        }
    }
    let mut count = 0;
    increments
        .into_iter()
        .map(|x| {
            count += x;
            count
        })
        .collect()
}

/// Neumaier-compensated sum.
fn compensated_sum(terms: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for x in terms {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

#[inline]
fn small_uniform(i: u64, u: f64) -> bool {
    u <= (1.0 / (i as f64).sqrt()).min(1.0)
}

/// Length `⌊δn⌋` of the leading window of `J_n(δ)`.
pub fn j_window(delta: f64, n: u64) -> Result<u64> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::domain(format!("delta must lie in (0, 1], got {delta}")));
    }
    let m = scaled_floor(delta, n);
    if m < 1 {
        return Err(Error::domain(format!("delta * n = {} < 1", delta * n as f64)));
    }
    Ok(m)
}

/// Indices `n − ⌊δ′n⌋ + 1 ..= n` of the trailing window of `V_n(δ′)`.
pub fn v_window(delta_prime: f64, n: u64) -> Result<std::ops::RangeInclusive<u64>> {
    if !(delta_prime > 0.0 && delta_prime < 1.0) {
        return Err(Error::domain(format!(
            "delta' must lie in (0, 1), got {delta_prime}"
        )));
    }
    let m = scaled_floor(delta_prime, n);
    Ok(n - m + 1..=n)
}

/// `J_n(δ) = #{1 ≤ i ≤ ⌊δn⌋ : U_i ≤ i^{-1/2}}`, with `uniforms[0] = U_1`.
pub fn compute_j(delta: f64, n: u64, uniforms: &[f64]) -> Result<u64> {
    let m = j_window(delta, n)?;
    if (uniforms.len() as u64) < m {
        return Err(Error::domain(format!(
            "need {m} uniforms, got {}",
            uniforms.len()
        )));
    }
    Ok((1..=m)
        .filter(|&i| small_uniform(i, uniforms[(i - 1) as usize]))
        .count() as u64)
}

/// `E[J_n(δ)] = Σ_{i ≤ ⌊δn⌋} min(i^{-1/2}, 1)`.
pub fn j_exact_mean(delta: f64, n: u64) -> Result<f64> {
    let m = j_window(delta, n)?;
    Ok(compensated_sum((1..=m).map(|i| 1.0 / (i as f64).sqrt())))
}

/// `V_n(δ′)`: the same count over the trailing window; `uniforms[0] = U_1`.
pub fn compute_v(delta_prime: f64, n: u64, uniforms: &[f64]) -> Result<u64> {
    let window = v_window(delta_prime, n)?;
    if (uniforms.len() as u64) < n {
        return Err(Error::domain(format!(
            "need {n} uniforms, got {}",
            uniforms.len()
        )));
    }
    Ok(window
        .filter(|&i| small_uniform(i, uniforms[(i - 1) as usize]))
        .count() as u64)
}

/// `E[V_n(δ′)]`, the sum of `i^{-1/2}` over the trailing window.
pub fn v_exact_mean(delta_prime: f64, n: u64) -> Result<f64> {
    let window = v_window(delta_prime, n)?;
    Ok(compensated_sum(window.map(|i| 1.0 / (i as f64).sqrt())))
}

fn norm(v: &[i64]) -> f64 {
    v.iter().map(|&c| (c as f64) * (c as f64)).sum::<f64>().sqrt()
}

/// `sup_{k ≤ ⌊nT⌋} ‖D_k‖` with `D_k = n^{-1/2} Σ_{excited i ≤ k} (γ_i − ξ_i)`.
///
/// The supremum is taken over the grid `t = k/n`; between knots the
/// interpolated process can exceed it by at most one jump, `2K/√n`.
pub fn d_process_sup(trace: &WalkTrace, n: u64, t_max: f64) -> Result<f64> {
    if n == 0 || !(t_max >= 0.0) {
        return Err(Error::domain("d-process needs n >= 1 and T >= 0"));
    }
    let needed = (n as f64 * t_max).ceil() as u64;
    if trace.horizon() < needed {
        return Err(Error::domain(format!(
            "trace horizon {} is shorter than ceil(nT) = {needed}",
            trace.horizon()
        )));
    }
    let last = scaled_floor(t_max, n);
    let mut sum = vec![0i64; trace.dim()];
    let mut sup: f64 = 0.0;
    for record in trace.excitations.iter().take_while(|r| r.step <= last) {
        for ((s, g), x) in sum.iter_mut().zip(&record.gamma).zip(&record.xi) {
            *s += g - x;
        }
        sup = sup.max(norm(&sum));
    }
    Ok(sup / (n as f64).sqrt())
}

/// Samples of `B̂ⁿ_t` on a grid of times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RescaledPath {
    pub n: u64,
    pub samples: Vec<(f64, Vec<f64>)>,
}

/// Splits `n·t` into `(⌊nt⌋, nt − ⌊nt⌋)`, snapping grid points `t = k/n` to `(k, 0)`.
pub fn split_time(n: u64, t: f64) -> (u64, f64) {
    let nt = n as f64 * t;
    let r = nt.round();
    if (nt - r).abs() <= 1e-9 * r.abs().max(1.0) {
        (r.max(0.0) as u64, 0.0)
    } else {
        let k = nt.floor();
        (k as u64, nt - k)
    }
}

/// `B̂ⁿ_t = X_{⌊nt⌋}/√n + (nt − ⌊nt⌋)(X_{⌊nt⌋+1} − X_{⌊nt⌋})/√n` on `grid`.
///
/// `X_{⌊nt⌋+1}` is only required when `nt` is not an integer.
pub fn rescale_path(trace: &WalkTrace, n: u64, grid: &[f64]) -> Result<RescaledPath> {
    if n == 0 {
        return Err(Error::domain("rescaling needs n >= 1"));
    }
    let scale = 1.0 / (n as f64).sqrt();
    let mut samples = Vec::with_capacity(grid.len());
    for &t in grid {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::domain(format!("grid time {t} must be finite and >= 0")));
        }
        let (k, frac) = split_time(n, t);
        let needed = if frac > 0.0 { k + 1 } else { k };
        if needed > trace.horizon() {
            return Err(Error::domain(format!(
                "grid time {t} needs X_{needed} beyond horizon {}",
                trace.horizon()
            )));
        }
        let here = trace.position(k as usize);
        let value = if frac > 0.0 {
            let next = trace.position(k as usize + 1);
            here.iter()
                .zip(next)
                .map(|(&a, &b)| (a as f64 + frac * (b - a) as f64) * scale)
                .collect()
        } else {
            here.iter().map(|&a| a as f64 * scale).collect()
        };
        samples.push((t, value));
    }
    Ok(RescaledPath { n, samples })
}

/// Checkpointed observables of one walk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservableSeries {
    /// `n` used in `D = n^{-1/2} Σ …`.
    pub scale: u64,
    pub checkpoints: Vec<u64>,
    pub positions: Vec<Vec<i64>>,
    pub range_size: Vec<u64>,
    pub k_count: Vec<u64>,
    /// Unscaled `Σ_{excited i ≤ t} (γ_i − ξ_i)`.
    pub d_raw: Vec<Vec<i64>>,
    /// `sup_{s ≤ t} ‖D_s‖`.
    pub d_sup: Vec<f64>,
}

/// Online recorder of [`ObservableSeries`] at fixed checkpoint times.
#[derive(Debug, Clone)]
pub struct SeriesRecorder {
    series: ObservableSeries,
    next: usize,
    sum: Vec<i64>,
    sup_raw: f64,
}

impl SeriesRecorder {
    /// Checkpoints must be increasing; a checkpoint at 0 is recorded immediately.
    pub fn new(dim: usize, scale: u64, checkpoints: Vec<u64>) -> Result<Self> {
        if scale == 0 {
            return Err(Error::domain("scale must be >= 1"));
        }
        if checkpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::domain("checkpoints must be strictly increasing"));
        }
        let mut rec = SeriesRecorder {
            series: ObservableSeries {
                scale,
                checkpoints,
                positions: Vec::new(),
                range_size: Vec::new(),
                k_count: Vec::new(),
                d_raw: Vec::new(),
                d_sup: Vec::new(),
            },
            next: 0,
            sum: vec![0; dim],
            sup_raw: 0.0,
        };
        if rec.series.checkpoints.first() == Some(&0) {
            rec.snapshot(&vec![0; dim], 1, 0);
        }
        Ok(rec)
    }

    fn snapshot(&mut self, position: &[i64], range: u64, k: u64) {
        let s = &mut self.series;
        s.positions.push(position.to_vec());
        s.range_size.push(range);
        s.k_count.push(k);
        s.d_raw.push(self.sum.clone());
        s.d_sup.push(self.sup_raw / (s.scale as f64).sqrt());
        self.next += 1;
    }

    pub fn finish(self) -> ObservableSeries {
        self.series
    }
}

impl StepObserver for SeriesRecorder {
    #[inline]
    fn observe(&mut self, event: &StepEvent<'_>) {
        if let Some(xi) = event.companion_xi {
            for ((s, g), x) in self.sum.iter_mut().zip(event.increment).zip(xi) {
                *s += g - x;
            }
            self.sup_raw = self.sup_raw.max(norm(&self.sum));
        }
        if self.series.checkpoints.get(self.next) == Some(&event.time) {
            self.snapshot(event.position, event.range, event.excitations);
        }
    }
}

/// Online `sup_{k ≤ limit} ‖Σ_{excited i ≤ k} (γ_i − ξ_i)‖` (unscaled).
#[derive(Debug, Clone)]
pub struct DProcessTracker {
    limit: u64,
    sum: Vec<i64>,
    sup_raw: f64,
}

impl DProcessTracker {
    pub fn new(dim: usize, limit: u64) -> Self {
        DProcessTracker {
            limit,
            sum: vec![0; dim],
            sup_raw: 0.0,
        }
    }

    /// The supremum scaled by `n^{-1/2}`.
    pub fn sup(&self, n: u64) -> f64 {
        self.sup_raw / (n as f64).sqrt()
    }
}

impl StepObserver for DProcessTracker {
    #[inline]
    fn observe(&mut self, event: &StepEvent<'_>) {
        if event.time > self.limit {
            return;
        }
        if let Some(xi) = event.companion_xi {
            for ((s, g), x) in self.sum.iter_mut().zip(event.increment).zip(xi) {
                *s += g - x;
            }
            self.sup_raw = self.sup_raw.max(norm(&self.sum));
        }
    }
}

/// Online capture of `(X_t, |R_t|, |K_t|)` at fixed times.
#[derive(Debug, Clone)]
pub struct Snapshots {
    times: Vec<u64>,
    next: usize,
    pub positions: Vec<Vec<i64>>,
    pub ranges: Vec<u64>,
    pub excitations: Vec<u64>,
}

impl Snapshots {
    /// `times` must be strictly increasing; time 0 is captured as the origin.
    pub fn new(dim: usize, times: Vec<u64>) -> Result<Self> {
        if times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::domain("snapshot times must be strictly increasing"));
        }
        let mut s = Snapshots {
            times,
            next: 0,
            positions: Vec::new(),
            ranges: Vec::new(),
            excitations: Vec::new(),
        };
        if s.times.first() == Some(&0) {
            s.positions.push(vec![0; dim]);
            s.ranges.push(1);
            s.excitations.push(0);
            s.next = 1;
        }
        Ok(s)
    }

    pub fn times(&self) -> &[u64] {
        &self.times
    }

    pub fn is_complete(&self) -> bool {
        self.next == self.times.len()
    }
}

impl StepObserver for Snapshots {
    #[inline]
    fn observe(&mut self, event: &StepEvent<'_>) {
        if self.times.get(self.next) == Some(&event.time) {
            self.positions.push(event.position.to_vec());
            self.ranges.push(event.range);
            self.excitations.push(event.excitations);
            self.next += 1;
        }
    }
}

/// Online check of `|R_m| ≤ δ·m` for every `m` in `[from, to]`.
#[derive(Debug, Clone)]
pub struct RangeEnvelope {
    delta: f64,
    from: u64,
    to: u64,
    pub holds: bool,
    /// Largest `|R_m|/m` seen in the window.
    pub max_ratio: f64,
}

impl RangeEnvelope {
    pub fn new(delta: f64, from: u64, to: u64) -> Self {
        RangeEnvelope {
            delta,
            from: from.max(1),
            to,
            holds: true,
            max_ratio: 0.0,
        }
    }
}

impl StepObserver for RangeEnvelope {
    #[inline]
    fn observe(&mut self, event: &StepEvent<'_>) {
        if event.time >= self.from && event.time <= self.to {
            let m = event.time as f64;
            self.holds &= event.range as f64 <= self.delta * m;
            self.max_ratio = self.max_ratio.max(event.range as f64 / m);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{run_walk, ExcitationRecord, WalkConfig};
    use crate::excitation::{make_example_gamma, make_example_xi};
    use crate::lattice::Direction;
    use crate::rng::StreamRng;

    fn trace(positions: &[&[i64]]) -> WalkTrace {
        let len = positions.len();
        WalkTrace::from_parts(
            positions[0].len(),
            positions.iter().map(|p| p.to_vec()).collect(),
            vec![false; len],
            vec![f64::NAN; len],
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn range_examples() {
        assert_eq!(range_series(&trace(&[&[0, 0]])), vec![1]);
        assert_eq!(range_series(&trace(&[&[0, 0], &[1, 0], &[0, 0]])), vec![1, 2, 2]);
        let line: Vec<Vec<i64>> = (0..=5).map(|i| vec![i, 0]).collect();
        let refs: Vec<&[i64]> = line.iter().map(|v| v.as_slice()).collect();
        assert_eq!(range_series(&trace(&refs)), vec![1, 2, 3, 4, 5, 6]);
    }

    #[test]
    fn k_constant_without_new_sites() {
        // 2-site oscillator: step 1 excited, then only revisits
        let positions: Vec<Vec<i64>> = (0..10).map(|i| vec![i % 2, 0]).collect();
        let mut excited = vec![false; 10];
        excited[1] = true;
        let t = WalkTrace::from_parts(2, positions, excited, vec![0.5; 10], vec![]).unwrap();
        let k = k_series(&t);
        assert_eq!(k[0], 0);
        assert!(k[1..].iter().all(|&x| x == 1));
    }

    #[test]
    fn k_first_step_and_two_routes_agree() {
        for seed in 0..20 {
            let config = WalkConfig::new(
                ExcitationSchedule::new(1.0, 0.5).unwrap(),
                make_example_xi(3).unwrap(),
                make_example_gamma(3, 0.9).unwrap(),
                Direction::axis(3, 0).unwrap(),
                3_000,
                seed,
            )
            .unwrap();
            let t = run_walk(&config).unwrap();
            let k = k_series(&t);
            assert_eq!(k[1], 1);
            assert_eq!(k, k_series_from_first_visits(&t, &config.schedule));
            let r = range_series(&t);
            for n in 1..k.len() {
                assert!(k[n] <= r[n - 1]);
                assert!(r[n] <= n as u64 + 1);
                assert!(r[n] >= r[n - 1] && k[n] >= k[n - 1]);
            }
        }
    }

    #[test]
    fn j_and_v_exact_means() {
        let expected = 1.0 + 0.5f64.sqrt() + 1.0 / 3f64.sqrt() + 0.5;
        assert!((j_exact_mean(1.0, 4).unwrap() - expected).abs() < 1e-12);
        assert!((j_exact_mean(1.0, 4).unwrap() - 2.78446).abs() < 1e-5);
        assert!((v_exact_mean(0.5, 4).unwrap() - 1.07735).abs() < 1e-5);
        let n = 1_000_000;
        assert!((j_exact_mean(0.64, n).unwrap() / 1000.0 - 1.6).abs() < 0.01);
        assert!((v_exact_mean(0.36, n).unwrap() / 1000.0 - 0.4).abs() < 0.01);
    }

    #[test]
    fn j_boundary_is_inclusive() {
        let ones = vec![1.0; 10];
        assert_eq!(compute_j(1.0, 10, &ones).unwrap(), 1);
        let zeros = vec![0.0; 10];
        assert_eq!(compute_j(1.0, 10, &zeros).unwrap(), 10);
        assert_eq!(compute_v(0.5, 10, &zeros).unwrap(), 5);
        assert!(compute_j(1.0, 10, &ones[..5]).is_err());
        assert!(compute_j(0.05, 10, &ones).is_err());
        assert!(compute_v(1.0, 10, &ones).is_err());
    }

    #[test]
    fn v_telescopes_to_j() {
        let mut rng = StreamRng::for_replica(8, 0);
        let n = 100;
        let u: Vec<f64> = (0..n).map(|_| rng.uniform()).collect();
        let dp = 0.99;
        let head = n - scaled_floor(dp, n);
        let head_count = (1..=head)
            .filter(|&i| u[(i - 1) as usize] <= 1.0 / (i as f64).sqrt())
            .count() as u64;
        assert_eq!(
            compute_v(dp, n, &u).unwrap(),
            compute_j(1.0, n, &u).unwrap() - head_count
        );
    }

    #[test]
    fn d_process_examples() {
        let zero = trace(&[&[0, 0], &[1, 0], &[2, 0]]);
        assert_eq!(d_process_sup(&zero, 2, 1.0).unwrap(), 0.0);

        let positions: Vec<Vec<i64>> = (0..=100).map(|i| vec![i, 0]).collect();
        let mut excited = vec![false; 101];
        excited[1] = true;
        let t = WalkTrace::from_parts(
            2,
            positions,
            excited,
            vec![0.0; 101],
            vec![ExcitationRecord {
                step: 1,
                gamma: vec![1, 0],
                xi: vec![-1, 0],
            }],
        )
        .unwrap();
        assert!((d_process_sup(&t, 100, 1.0).unwrap() - 0.2).abs() < 1e-15);
        assert!(matches!(d_process_sup(&t, 100, 1.5), Err(Error::Domain(_))));
    }

    #[test]
    fn rescale_examples() {
        let t = trace(&[&[0, 0], &[1, 0], &[2, 0], &[2, 1]]);
        let p = rescale_path(&t, 4, &[0.0, 0.5, 0.375]).unwrap();
        assert_eq!(p.samples[0].1, vec![0.0, 0.0]);
        assert_eq!(p.samples[1].1, vec![1.0, 0.0]);
        assert_eq!(p.samples[2].1, vec![0.75, 0.0]);
        assert!(rescale_path(&t, 4, &[0.9]).is_err());
        assert!(rescale_path(&t, 4, &[0.75]).is_ok());
    }

    #[test]
    fn rescale_at_knots_is_exact() {
        let config = WalkConfig::unexcited(make_example_xi(2).unwrap(), 1000, 4).unwrap();
        let t = run_walk(&config).unwrap();
        let n = 997;
        let grid: Vec<f64> = (0..=n).map(|k| k as f64 / n as f64).collect();
        let p = rescale_path(&t, n, &grid).unwrap();
        for (k, (_, v)) in p.samples.iter().enumerate() {
            for (a, &x) in v.iter().zip(t.position(k)) {
                assert!((a - x as f64 / (n as f64).sqrt()).abs() <= 1e-15 * x.abs().max(1) as f64);
            }
        }
    }

    #[test]
    fn online_recorders_match_trace_functions() {
        let config = WalkConfig::new(
            ExcitationSchedule::new(1.0, 0.5).unwrap(),
            make_example_xi(2).unwrap(),
            make_example_gamma(2, 0.75).unwrap(),
            Direction::axis(2, 0).unwrap(),
            10_000,
            21,
        )
        .unwrap();
        let t = run_walk(&config).unwrap();
        let checkpoints = vec![0, 10, 500, 2500, 10_000];
        let mut series = SeriesRecorder::new(2, 10_000, checkpoints.clone()).unwrap();
        let mut snaps = Snapshots::new(2, checkpoints.clone()).unwrap();
        let mut dtrack = DProcessTracker::new(2, 2500);
        let mut walker = crate::engine::Walker::for_replica(&config, 0);
        walker.run(10_000, &mut (&mut series, &mut snaps, &mut dtrack));
        let s = series.finish();
        let r = range_series(&t);
        let k = k_series(&t);
        for (j, &c) in checkpoints.iter().enumerate() {
            assert_eq!(s.range_size[j], r[c as usize]);
            assert_eq!(s.k_count[j], k[c as usize]);
            assert_eq!(snaps.positions[j], t.position(c as usize));
            assert_eq!(s.positions[j], t.position(c as usize));
            let sup = d_process_sup(&t, 10_000, c as f64 / 10_000.0).unwrap();
            assert!((s.d_sup[j] - sup).abs() < 1e-12);
        }
        assert!((dtrack.sup(10_000) - d_process_sup(&t, 10_000, 0.25).unwrap()).abs() < 1e-12);
        assert!(snaps.is_complete());
    }

    #[test]
    fn monte_carlo_means_match_exact_helpers() {
        // 1e4 independent uniform streams, n = 400
        let n = 400u64;
        let reps = 10_000;
        let (mut sj, mut sj2, mut sv, mut sv2) = (0.0, 0.0, 0.0, 0.0);
        for r in 0..reps {
            let mut rng = StreamRng::for_replica(99, r);
            let u: Vec<f64> = (0..n).map(|_| rng.uniform()).collect();
            let j = compute_j(0.64, n, &u).unwrap() as f64;
            let v = compute_v(0.36, n, &u).unwrap() as f64;
            sj += j;
            sj2 += j * j;
            sv += v;
            sv2 += v * v;
        }
        let reps = reps as f64;
        for (s, s2, exact) in [
            (sj, sj2, j_exact_mean(0.64, n).unwrap()),
            (sv, sv2, v_exact_mean(0.36, n).unwrap()),
        ] {
            let mean = s / reps;
            let se = ((s2 / reps - mean * mean) / reps).sqrt();
            assert!((mean - exact).abs() <= 3.0 * se, "{mean} vs {exact} (se {se})");
        }
    }

    #[test]
    fn range_envelope_window() {
        let config = WalkConfig::unexcited(make_example_xi(2).unwrap(), 1000, 1).unwrap();
        let t = run_walk(&config).unwrap();
        let r = range_series(&t);
        let mut env = RangeEnvelope::new(0.5, 100, 1000);
        crate::engine::Walker::for_replica(&config, 0).run(1000, &mut env);
        let holds = (100..=1000).all(|m| r[m] as f64 <= 0.5 * m as f64);
        assert_eq!(env.holds, holds);
        assert!(RangeEnvelope::new(1.1, 10, 1000).holds);
    }
}
