//! Multi-objective transmit beamforming for joint communication and sensing.
//!
//! A transmitter with an N_t-element uniform linear array serves C
//! single-antenna users while illuminating K point targets for an N_r-element
//! receive array. The library builds per-stream transmit covariance blocks
//! that trade average user rate against sensing mutual information:
//!
//! * closed-form sensing metrics (exact mutual information, a per-target
//!   upper bound, beampatterns, cross-correlation levels),
//! * Pareto-optimal covariance synthesis by bisection over semidefinite
//!   feasibility problems, solved with Dykstra alternating projections,
//! * rank-one beamformer extraction that provably preserves user SINRs and
//!   the sensing bound,
//! * receive-side evaluation: Capon spectra and Monte Carlo angle RMSE,
//! * a desk-scale exhaustive grid reference for end-to-end validation.
//!
//! All angles enter in degrees; powers in watts; information in bits. Every
//! routine is deterministic given its seed.

pub mod bruteforce;
pub mod error;
pub mod linalg;
pub mod metrics;
pub mod pareto;
pub mod rankone;
pub mod rng;
pub mod scenario;
pub mod sdpcore;
pub mod selftest;
pub mod sensing;

pub use bruteforce::{grid_feasible, grid_optimum};
pub use error::{Error, Result};
pub use linalg::{CMat, CVec};
pub use metrics::{BeamformerSet, CovarianceSet};
pub use pareto::{
    bisection_solve, pareto_sweep, BisectionResult, ParetoPoint, SchemeMode, SolverParams,
    Thresholds, Weights,
};
pub use rankone::{extract_rank_one, verify_preservation, ExtractionReport, PreservationCheck};
pub use scenario::{ArrayGeometry, RicianParams, Scenario, SignalConfig, TargetSet, UserSet};
pub use sdpcore::{
    solve_feasibility, ConstraintKind, ConstraintSystem, FeasibilityReport, FeasibilityStatus,
    SolveOptions,
};
pub use selftest::{run_selftest, CheckOutcome};
pub use sensing::{
    capon_spectrum, estimate_angles, rmse_mc, simulate_echo, synthesize_transmit, AngleEstimate,
    CaponResult, EchoScenario, RmsePoint,
};
