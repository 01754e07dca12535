//! Monte Carlo simulation of excited random walks on `Z^d` whose cookies are
//! found with a time-decaying probability `p_n = min(C n^{-β}, 1)`, together
//! with the observables and statistical checks used to verify their
//! diffusive limits, range growth and drift envelope.

pub mod config;
pub mod coupling;
pub mod diagnostics;
pub mod engine;
pub mod error;
pub mod excitation;
pub mod io;
pub mod lattice;
pub mod montecarlo;
pub mod observables;
pub mod rng;
pub mod stats;
pub mod visited;

pub use engine::{
    decide_branch, run_walk, run_walk_replica, run_walk_with, StepBranch, StepEvent,
    StepObserver, WalkConfig, WalkTrace, Walker,
};
pub use error::{Error, Result};
pub use excitation::{
    make_example_gamma, make_example_xi, validate_conditions, Atom, ConditionReport,
    ExcitationSchedule, IncrementDistribution, IncrementGenerator,
};
pub use lattice::{dot, project_complement, CoordinateSubset, Direction, LatticeSite};
pub use rng::{stream_key, StreamRng};
pub use visited::VisitedSet;
pub use config::{parse_config, ConfigErrors, ConfigFile, ConfigIssue, PiSource, ResolvedConfig};
pub use coupling::{run_coupled, run_coupled_replica, CoupledTrace, LazyShadow};
pub use diagnostics::{
    probe_conjecture_range, test_cone_drift, test_d_process_vanishes, test_gaussian_marginal,
    test_jv_asymptotics, test_kn_band, test_range_lln_iid, test_range_upper,
    test_stopped_increments_iid, Check, ConeConstants, DiagnosticTest, ProbeReport, RangeTarget,
    RunSettings, TestReport,
};
pub use montecarlo::{estimate_pi, run_experiment, ExperimentPlan, PiEstimate, ReplicaSummary};
pub use observables::{ObservableSeries, RescaledPath, SeriesRecorder};
