//! Fast end-to-end invariant checks, runnable from the command line.
//!
//! Each check exercises one cross-module contract on a desk-scale instance
//! in well under a second, so a packaged binary can validate its numerical
//! behavior on the machine it runs on without the full test suite.

use nalgebra::dvector;
use num_complex::Complex64;

use crate::bruteforce::grid_optimum;
use crate::linalg::{frob_norm, hermitize, min_eigenvalue, outer, CMat};
use crate::metrics::{
    comm_sinrs, exact_sensing_mi, mi_upper_bound, sensing_mi_oracle, CovarianceSet,
};
use crate::pareto::{bisection_solve, SchemeMode, SolverParams, Thresholds, Weights};
use crate::rankone::{extract_rank_one, verify_preservation};
use crate::rng::{chacha, complex_gaussian_matrix, complex_gaussian_vector};
use crate::scenario::{angle_grid, ArrayGeometry, Scenario, SignalConfig, TargetSet, UserSet};
use crate::sdpcore::project_psd;
use crate::sensing::{capon_spectrum, estimate_angles, simulate_echo, synthesize_transmit, EchoScenario};

/// Result of one named invariant check.
#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

impl CheckOutcome {
    fn pass(name: &'static str, detail: String) -> Self {
        Self { name, pass: true, detail }
    }

    fn fail(name: &'static str, detail: String) -> Self {
        Self { name, pass: false, detail }
    }

    fn from_result(name: &'static str, result: Result<String, String>) -> Self {
        match result {
            Ok(detail) => Self::pass(name, detail),
            Err(detail) => Self::fail(name, detail),
        }
    }
}

fn two_antenna_scenario() -> Scenario {
    let geometry = ArrayGeometry::half_wavelength(2, 2).unwrap();
    let targets = TargetSet::new(vec![17.0], vec![1.0]).unwrap();
    let users = UserSet::new(
        vec![dvector![Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0)]],
        vec![1.0],
    )
    .unwrap();
    let signal = SignalConfig::new(8, 1.0, 1, 1.0).unwrap();
    Scenario::new(geometry, targets, users, signal).unwrap()
}

fn random_cov(seed: u64, dim: usize, blocks: usize, power: f64) -> CovarianceSet {
    let mut rng = chacha(seed);
    let raw: Vec<CMat> = (0..blocks)
        .map(|_| {
            let v = complex_gaussian_vector(&mut rng, dim);
            let u = complex_gaussian_vector(&mut rng, dim);
            hermitize(&(outer(&v, &v) + outer(&u, &u)))
        })
        .collect();
    let total: f64 = raw.iter().map(|m| (0..dim).map(|i| m[(i, i)].re).sum::<f64>()).sum();
    CovarianceSet::new(raw.into_iter().map(|m| m.scale(power / total)).collect()).unwrap()
}

fn check_hadamard_bound() -> Result<String, String> {
    let geometry = ArrayGeometry::half_wavelength(4, 4).map_err(|e| e.to_string())?;
    let targets =
        TargetSet::new(vec![-35.0, 10.0, 42.0], vec![1.0, 0.5, 2.0]).map_err(|e| e.to_string())?;
    let signal = SignalConfig::new(8, 4.0, 2, 1.0).map_err(|e| e.to_string())?;
    let mut worst = f64::NEG_INFINITY;
    for seed in 0..20u64 {
        let cov = random_cov(seed, 4, 4, 4.0);
        let exact = exact_sensing_mi(&geometry, &targets, &signal, &cov.sum())
            .map_err(|e| e.to_string())?;
        let upper =
            mi_upper_bound(&geometry, &targets, &signal, &cov.sum()).map_err(|e| e.to_string())?;
        worst = worst.max(exact - upper);
        if exact > upper + 1e-9 {
            return Err(format!("seed {seed}: exact MI {exact} exceeds bound {upper}"));
        }
    }
    Ok(format!("max(exact - bound) = {worst:.3e} over 20 draws"))
}

fn check_oracle_equivalence() -> Result<String, String> {
    let geometry = ArrayGeometry::half_wavelength(4, 2).map_err(|e| e.to_string())?;
    let targets = TargetSet::new(vec![-20.0, 30.0], vec![1.0, 0.7]).map_err(|e| e.to_string())?;
    let signal = SignalConfig::new(8, 4.0, 2, 1.0).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for seed in 0..10u64 {
        let x = complex_gaussian_matrix(&mut chacha(100 + seed), 4, 8);
        let r_x = hermitize(&((&x * x.adjoint()).unscale(8.0)));
        let exact =
            exact_sensing_mi(&geometry, &targets, &signal, &r_x).map_err(|e| e.to_string())?;
        let oracle =
            sensing_mi_oracle(&geometry, &targets, &signal, &x).map_err(|e| e.to_string())?;
        let rel = (exact - oracle).abs() / oracle.abs().max(1e-12);
        worst = worst.max(rel);
        if rel > 1e-8 {
            return Err(format!("seed {seed}: closed form {exact} vs direct {oracle}"));
        }
    }
    Ok(format!("max relative gap {worst:.3e} over 10 draws"))
}

fn check_psd_projection() -> Result<String, String> {
    let mut worst = 0.0f64;
    for seed in 0..10u64 {
        let mut rng = chacha(200 + seed);
        let v = complex_gaussian_vector(&mut rng, 3);
        let u = complex_gaussian_vector(&mut rng, 3);
        let a = hermitize(&(outer(&v, &v) - outer(&u, &u)));
        let p = project_psd(&a).map_err(|e| e.to_string())?;
        let min_eig = min_eigenvalue(&p).map_err(|e| e.to_string())?;
        if min_eig < -1e-10 * frob_norm(&a).max(1.0) {
            return Err(format!("seed {seed}: projected min eigenvalue {min_eig:.3e}"));
        }
        let again = project_psd(&p).map_err(|e| e.to_string())?;
        let drift = frob_norm(&(&again - &p));
        worst = worst.max(drift);
        if drift > 1e-9 * frob_norm(&p).max(1.0) {
            return Err(format!("seed {seed}: projection not idempotent, drift {drift:.3e}"));
        }
    }
    Ok(format!("idempotency drift at most {worst:.3e} over 10 draws"))
}

fn check_bisection_contract() -> Result<String, String> {
    let scn = two_antenna_scenario();
    let weights = Weights::uniform(0.5, 1, 1).map_err(|e| e.to_string())?;
    let thresholds = Thresholds::zero(1);
    let params = SolverParams::for_power(scn.signal.total_power);
    let a = bisection_solve(&scn, &weights, &thresholds, SchemeMode::General, &params)
        .map_err(|e| e.to_string())?;
    let b = bisection_solve(&scn, &weights, &thresholds, SchemeMode::General, &params)
        .map_err(|e| e.to_string())?;
    if a.r_star != b.r_star {
        return Err(format!("same inputs gave r* {} then {}", a.r_star, b.r_star));
    }
    let expected = (a.r_max / params.epsilon).log2().ceil() as usize;
    if a.iterations != expected {
        return Err(format!("{} halvings, expected {expected}", a.iterations));
    }
    Ok(format!("r* = {:.4} after exactly {} halvings, reproducible", a.r_star, a.iterations))
}

fn check_grid_reference() -> Result<String, String> {
    let scn = two_antenna_scenario();
    let weights = Weights::uniform(0.5, 1, 1).map_err(|e| e.to_string())?;
    let thresholds = Thresholds::zero(1);
    let mut params = SolverParams::for_power(scn.signal.total_power);
    params.epsilon = 0.02;
    let solved = bisection_solve(&scn, &weights, &thresholds, SchemeMode::General, &params)
        .map_err(|e| e.to_string())?;
    let reference = grid_optimum(&scn, &weights, &thresholds).map_err(|e| e.to_string())?;
    let gap = (solved.r_star - reference).abs();
    let tol = (2.0 * params.epsilon).max(0.05);
    if gap > tol {
        return Err(format!(
            "bisection r* {:.4} vs exhaustive reference {reference:.4} (gap {gap:.4} > {tol})",
            solved.r_star
        ));
    }
    Ok(format!("bisection within {gap:.4} of the exhaustive reference"))
}

fn check_extraction_preserves_values() -> Result<String, String> {
    let scn = two_antenna_scenario();
    let weights = Weights::uniform(0.5, 1, 1).map_err(|e| e.to_string())?;
    let thresholds = Thresholds::zero(1);
    let params = SolverParams::for_power(scn.signal.total_power);
    let solved = bisection_solve(&scn, &weights, &thresholds, SchemeMode::General, &params)
        .map_err(|e| e.to_string())?;
    let cov = &solved.point;
    let report = extract_rank_one(&scn, cov).map_err(|e| e.to_string())?;
    let check = verify_preservation(cov, &report, &scn).map_err(|e| e.to_string())?;
    if !check.pass {
        return Err(format!("preservation violated: {check:?}"));
    }
    let sinrs = comm_sinrs(cov, &scn.users).map_err(|e| e.to_string())?;
    Ok(format!(
        "covariance residual {:.2e}, SINR drift {:.2e} at gamma = {:.3}",
        check.cov_sum_residual, check.max_sinr_delta, sinrs[0]
    ))
}

fn check_echo_chain() -> Result<String, String> {
    let geometry = ArrayGeometry::half_wavelength(8, 8).map_err(|e| e.to_string())?;
    let targets = TargetSet::new(vec![20.0], vec![1.0]).map_err(|e| e.to_string())?;
    let a = geometry.tx_steering(20.0).map_err(|e| e.to_string())?;
    let beams = crate::metrics::BeamformerSet::new(vec![a.clone().unscale(a.norm())], vec![])
        .map_err(|e| e.to_string())?;
    let x = synthesize_transmit(&beams, 128, 11).map_err(|e| e.to_string())?;
    let echo = EchoScenario::unit(1, 0.01, 12).map_err(|e| e.to_string())?;
    let y = simulate_echo(&geometry, &targets, &echo, &x).map_err(|e| e.to_string())?;
    let capon = capon_spectrum(&y, &geometry, &angle_grid(0.5)).map_err(|e| e.to_string())?;
    let estimate = estimate_angles(&capon, 1).map_err(|e| e.to_string())?;
    let err = (estimate.angles_deg[0] - 20.0).abs();
    if estimate.degenerate || err > 0.5 {
        return Err(format!("estimated {} deg for a target at 20 deg", estimate.angles_deg[0]));
    }
    Ok(format!("single strong target recovered within {err:.2} deg"))
}

/// Run every invariant check and collect the outcomes.
pub fn run_selftest() -> Vec<CheckOutcome> {
    vec![
        CheckOutcome::from_result("information bound dominates exact value", check_hadamard_bound()),
        CheckOutcome::from_result("closed form matches direct evaluation", check_oracle_equivalence()),
        CheckOutcome::from_result("cone projection is PSD and idempotent", check_psd_projection()),
        CheckOutcome::from_result("bisection is deterministic with the exact halving count", check_bisection_contract()),
        CheckOutcome::from_result("bisection agrees with the exhaustive reference", check_grid_reference()),
        CheckOutcome::from_result("rank-one extraction preserves SINR and the bound", check_extraction_preserves_values()),
        CheckOutcome::from_result("echo-to-estimate chain recovers a strong target", check_echo_chain()),
    ]
}
