//! Joint construction of the excited walk `X` and the lazy walk `Y`.
//!
//! `Y` moves by the projection onto the axes outside `D` of the increment `X`
//! actually took, so both walks share every random draw. Consequences checked
//! here and in the tests: `Y_i·e_j = X_i·e_j` for every `j ∉ D`, `Y` has
//! i.i.d. increments with the projected law `P_{D^c} ξ` (the drift along
//! `ℓ_D` is projected away), and `|R_n^X| ≥ |R_n^Y|`.

use serde::{Deserialize, Serialize};

use crate::engine::{
    StepEvent, StepObserver, TraceRecorder, WalkConfig, WalkTrace, Walker,
};
use crate::error::{Error, Result};
use crate::excitation::{ExcitationSchedule, IncrementGenerator};
use crate::lattice::CoordinateSubset;
use crate::rng::StreamRng;
use crate::visited::VisitedSet;

#[derive(Debug, Clone, PartialEq)]
pub struct CoupledTrace {
    pub x_trace: WalkTrace,
    /// Flat `(horizon + 1) × dim` positions of `Y`.
    y_positions: Vec<i64>,
    /// `y_new_site[i]`: `Y_i` not among `Y_0..Y_{i−1}`; entry 0 is true.
    pub y_new_site: Vec<bool>,
    pub subset: CoordinateSubset,
}

impl CoupledTrace {
    pub fn horizon(&self) -> u64 {
        self.x_trace.horizon()
    }

    pub fn y_position(&self, i: usize) -> &[i64] {
        let d = self.subset.dim();
        &self.y_positions[i * d..(i + 1) * d]
    }

    pub fn y_positions(&self) -> impl Iterator<Item = &[i64]> {
        self.y_positions.chunks_exact(self.subset.dim())
    }
}

/// Online shadow walk `Y` with its range.
#[derive(Debug, Clone)]
pub struct LazyShadow {
    subset: CoordinateSubset,
    position: Vec<i64>,
    visited: VisitedSet,
    step: Vec<i64>,
    pub last_new_site: bool,
}

impl LazyShadow {
    pub fn new(subset: CoordinateSubset, coord_bound: u64) -> Self {
        let dim = subset.dim();
        let mut visited = VisitedSet::new(dim, coord_bound);
        visited.insert(&vec![0; dim]);
        LazyShadow {
            subset,
            position: vec![0; dim],
            visited,
            step: vec![0; dim],
            last_new_site: true,
        }
    }

    pub fn position(&self) -> &[i64] {
        &self.position
    }

    /// `|R^Y|` so far.
    pub fn range(&self) -> u64 {
        self.visited.len()
    }
}

impl StepObserver for LazyShadow {
    #[inline]
    fn observe(&mut self, event: &StepEvent<'_>) {
        self.step.copy_from_slice(event.increment);
        crate::lattice::project_complement_in_place(&mut self.step, &self.subset);
        for (p, s) in self.position.iter_mut().zip(&self.step) {
            *p += s;
        }
        self.last_new_site = self.visited.insert(&self.position);
    }
}

/// Records the full `Y` path alongside [`LazyShadow`].
struct ShadowRecorder {
    shadow: LazyShadow,
    positions: Vec<i64>,
    new_site: Vec<bool>,
}

impl StepObserver for ShadowRecorder {
    #[inline]
    fn observe(&mut self, event: &StepEvent<'_>) {
        self.shadow.observe(event);
        self.positions.extend_from_slice(self.shadow.position());
        self.new_site.push(self.shadow.last_new_site);
    }
}

/// Checks that `subset` spans `config.ell` and, when `enforce_regime`, that
/// `d ≥ 4` and `|subset| ≤ d − 3`.
pub fn check_coupling(config: &WalkConfig, subset: &CoordinateSubset, enforce_regime: bool) -> Result<()> {
    if subset.dim() != config.dim {
        return Err(Error::config(format!(
            "subset is for dimension {}, walk has dimension {}",
            subset.dim(),
            config.dim
        )));
    }
    if !subset.spans(&config.ell) {
        return Err(Error::config(format!(
            "drift direction {:?} is not spanned by subset axes {:?}",
            config.ell.components(),
            subset.indices()
        )));
    }
    if enforce_regime {
        subset.check_cone_regime()?;
    }
    Ok(())
}

fn couple<X: IncrementGenerator, G: IncrementGenerator>(
    mut walker: Walker<X, G>,
    subset: &CoordinateSubset,
    horizon: u64,
    coord_bound: u64,
) -> Result<CoupledTrace> {
    let dim = subset.dim();
    let mut x = TraceRecorder::new(dim, horizon)?;
    let len = horizon as usize + 1;
    let mut y = ShadowRecorder {
        shadow: LazyShadow::new(subset.clone(), coord_bound),
        positions: Vec::with_capacity(len * dim),
        new_site: Vec::with_capacity(len),
    };
    y.positions.extend(std::iter::repeat_n(0, dim));
    y.new_site.push(true);
    walker.run(horizon, &mut (&mut x, &mut y));
    Ok(CoupledTrace {
        x_trace: x.finish(),
        y_positions: y.positions,
        y_new_site: y.new_site,
        subset: subset.clone(),
    })
}

/// Coupled run of replica 0; `X` is bit-identical to [`crate::engine::run_walk`].
pub fn run_coupled(config: &WalkConfig, subset: &CoordinateSubset, enforce_regime: bool) -> Result<CoupledTrace> {
    run_coupled_replica(config, subset, 0, enforce_regime)
}

pub fn run_coupled_replica(
    config: &WalkConfig,
    subset: &CoordinateSubset,
    replica: u64,
    enforce_regime: bool,
) -> Result<CoupledTrace> {
    config.validate()?;
    check_coupling(config, subset, enforce_regime)?;
    couple(
        Walker::for_replica(config, replica),
        subset,
        config.horizon,
        config.coord_bound(),
    )
}

/// Coupled run with caller-supplied generators; no drift or regime checks.
pub fn run_coupled_with<X: IncrementGenerator, G: IncrementGenerator>(
    xi: X,
    gamma: G,
    schedule: ExcitationSchedule,
    horizon: u64,
    rng: StreamRng,
    subset: &CoordinateSubset,
) -> Result<CoupledTrace> {
    Error::check_dim(subset.dim(), xi.dim())?;
    Error::check_dim(subset.dim(), gamma.dim())?;
    let k = xi.jump_bound().max(gamma.jump_bound()).ceil().max(1.0) as u64;
    let bound = horizon.saturating_mul(k);
    couple(
        Walker::with_generators(xi, gamma, schedule, bound, rng),
        subset,
        horizon,
        bound,
    )
}

/// `|R_n^Y|` for `n = 0..=horizon`.
pub fn range_series_y(coupled: &CoupledTrace) -> Vec<u64> {
    let mut count = 0;
    coupled
        .y_new_site
        .iter()
        .map(|&new| {
            count += new as u64;
            count
        })
        .collect()
}

/// Serializable view of a coupled trace (for export).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoupledRow {
    pub time: u64,
    pub x: Vec<i64>,
    pub x_new_site: bool,
    pub y: Vec<i64>,
    pub y_new_site: bool,
}

impl CoupledTrace {
    pub fn rows(&self) -> impl Iterator<Item = CoupledRow> + '_ {
        (0..=self.horizon() as usize).map(move |i| CoupledRow {
            time: i as u64,
            x: self.x_trace.position(i).to_vec(),
            x_new_site: i == 0 || self.x_trace.first_visit[i],
            y: self.y_position(i).to_vec(),
            y_new_site: self.y_new_site[i],
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::run_walk;
    use crate::excitation::{make_example_gamma, make_example_xi, IncrementDistribution};
    use crate::lattice::Direction;
    use crate::observables::range_series;

    fn cone_config(horizon: u64, seed: u64) -> WalkConfig {
        WalkConfig::new(
            ExcitationSchedule::new(1.0, 0.5).unwrap(),
            make_example_xi(4).unwrap(),
            make_example_gamma(4, 1.0).unwrap(),
            Direction::axis(4, 0).unwrap(),
            horizon,
            seed,
        )
        .unwrap()
    }

    fn d1(dim: usize) -> CoordinateSubset {
        CoordinateSubset::new(dim, vec![0]).unwrap()
    }

    #[test]
    fn step_along_d_leaves_y_in_place() {
        let e1 = IncrementDistribution::single_atom(vec![1, 0, 0, 0]).unwrap();
        let c = run_coupled_with(
            &e1,
            &e1,
            ExcitationSchedule::new(1.0, 0.5).unwrap(),
            10,
            StreamRng::for_replica(0, 0),
            &d1(4),
        )
        .unwrap();
        assert!(c.y_positions().all(|y| y == [0, 0, 0, 0]));
        assert_eq!(range_series_y(&c), vec![1; 11]);
    }

    #[test]
    fn step_off_d_moves_y() {
        let e3 = IncrementDistribution::single_atom(vec![0, 0, 1, 0]).unwrap();
        let c = run_coupled_with(
            &e3,
            &e3,
            ExcitationSchedule::new(1.0, 0.5).unwrap(),
            5,
            StreamRng::for_replica(0, 0),
            &d1(4),
        )
        .unwrap();
        assert_eq!(c.y_position(1), [0, 0, 1, 0]);
        assert_eq!(range_series_y(&c), vec![1, 2, 3, 4, 5, 6]);
    }

    #[test]
    fn x_is_bit_identical_to_uncoupled_run() {
        let config = cone_config(5_000, 3);
        let c = run_coupled(&config, &d1(4), true).unwrap();
        assert_eq!(c.x_trace, run_walk(&config).unwrap());
    }

    #[test]
    fn identity_and_range_domination() {
        for seed in 0..10 {
            let config = cone_config(10_000, seed);
            let c = run_coupled(&config, &d1(4), true).unwrap();
            for (i, y) in c.y_positions().enumerate() {
                let x = c.x_trace.position(i);
                assert_eq!(y[0], 0);
                assert_eq!(&y[1..], &x[1..]);
            }
            let rx = range_series(&c.x_trace);
            let ry = range_series_y(&c);
            assert!(rx.iter().zip(&ry).all(|(a, b)| a >= b));
            assert!(ry.windows(2).all(|w| w[1] >= w[0] && w[1] <= w[0] + 1));
        }
    }

    #[test]
    fn configuration_errors() {
        let config = cone_config(100, 1);
        let wrong = CoordinateSubset::new(4, vec![1]).unwrap();
        assert!(matches!(run_coupled(&config, &wrong, false), Err(Error::Config(_))));
        let too_big = CoordinateSubset::new(4, vec![0, 1]).unwrap();
        assert!(matches!(run_coupled(&config, &too_big, true), Err(Error::Config(_))));
        assert!(run_coupled(&config, &too_big, false).is_ok());
        assert!(matches!(
            run_coupled(&config, &d1(3), false),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn online_shadow_matches_recorded_path() {
        let config = cone_config(20_000, 8);
        let c = run_coupled(&config, &d1(4), true).unwrap();
        let mut shadow = LazyShadow::new(d1(4), config.coord_bound());
        Walker::for_replica(&config, 0).run(20_000, &mut shadow);
        assert_eq!(shadow.position(), c.y_position(20_000));
        assert_eq!(shadow.range(), *range_series_y(&c).last().unwrap());
    }

    #[test]
    fn y_increments_follow_projected_law() {
        // P(Y stays put) = P(X steps along ±e_1) = 1/4 under ξ and γ alike
        let config = cone_config(200_000, 12);
        let c = run_coupled(&config, &d1(4), true).unwrap();
        let lazy = (1..=200_000)
            .filter(|&i| c.y_position(i) == c.y_position(i - 1))
            .count() as f64
            / 200_000.0;
        assert!((lazy - 0.25).abs() < 4.0 * (0.1875f64 / 200_000.0).sqrt(), "{lazy}");
    }
}
