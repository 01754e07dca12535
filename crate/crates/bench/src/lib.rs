//! Shared fixtures for the benchmarks.

use erw_core::{make_example_gamma, make_example_xi, Direction, ExcitationSchedule, WalkConfig};

/// The example walk in dimension `d` with `δ = 0.75`, `C = 1`, `β = 1/2`.
pub fn example_config(d: usize, horizon: u64, seed: u64) -> WalkConfig {
    WalkConfig::new(
        ExcitationSchedule::new(1.0, 0.5).expect("schedule"),
        make_example_xi(d).expect("xi"),
        make_example_gamma(d, 0.75).expect("gamma"),
        Direction::axis(d, 0).expect("direction"),
        horizon,
        seed,
    )
    .expect("example config")
}
