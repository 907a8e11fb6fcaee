//! Rank-one beamformer recovery from block-covariance solutions.
//!
//! The feasibility solver works over one PSD covariance block per stream.
//! Physical transmission needs one vector per stream, so each communication
//! block R_i is collapsed to the matched-filter direction
//! w_i = R_i h_i / sqrt(h_i^H R_i h_i), which preserves the useful power
//! h_i^H R_i h_i exactly. The leftover transmit energy
//! R_r = sum_n R_n - sum_i w_i w_i^H is positive semidefinite (Cauchy-Schwarz
//! on each communication block) and is refactored into probing vectors by a
//! pivoted Cholesky with rank truncation, so the total transmit covariance —
//! and with it the mutual-information bound and every user SINR — is
//! unchanged by the extraction.

use crate::error::{Error, Result};
use crate::linalg::{frob_norm, hermitize, min_eigenvalue, outer, CMat, CVec};
use crate::metrics::{comm_sinrs, mi_upper_bound, BeamformerSet, CovarianceSet};
use crate::scenario::Scenario;

/// Fraction of total power below which a communication block is considered
/// to carry no usable signal for its user.
const DEGENERATE_FRACTION: f64 = 1e-10;

/// Fraction of total power the extracted covariance sum may deviate by.
const CONSERVATION_FRACTION: f64 = 1e-8;

/// Relative tolerance on SINR and mutual-information preservation.
const VALUE_REL_TOL: f64 = 1e-6;

/// How far below zero the residual covariance spectrum may dip (as a
/// fraction of total power) before the input point is deemed inaccurate.
const RESIDUAL_EIG_FRACTION: f64 = 1e-6;

/// Outcome of collapsing a block-covariance solution to rank-one vectors.
#[derive(Debug, Clone)]
pub struct ExtractionReport {
    /// One vector per communication stream plus the probing vectors
    /// recovered from the residual covariance.
    pub beamformers: BeamformerSet,
    /// Per-user SINR change (extracted minus block solution).
    pub sinr_delta: Vec<f64>,
    /// Change in the sensing mutual-information upper bound (bits).
    pub mi_delta: f64,
    /// Frobenius distance between the block covariance sum and the sum of
    /// extracted rank-one covariances.
    pub cov_sum_residual: f64,
    /// Smallest eigenvalue of the probing residual R_r before factorization.
    pub residual_min_eig: f64,
    /// Probing-stream count the scenario was configured with.
    pub configured_radar_streams: usize,
    /// Probing vectors actually recovered (the numerical rank of R_r).
    pub extracted_radar_streams: usize,
}

/// Named threshold checks produced by [`verify_preservation`].
#[derive(Debug, Clone)]
pub struct PreservationCheck {
    /// All four checks passed.
    pub pass: bool,
    /// Extracted covariance sum matches the block sum.
    pub power_conserved: bool,
    /// Every user SINR is unchanged within relative tolerance.
    pub sinr_preserved: bool,
    /// The mutual-information upper bound is unchanged within tolerance.
    pub mi_preserved: bool,
    /// The probing residual has no meaningfully negative eigenvalue.
    pub residual_psd: bool,
    /// Frobenius deviation of the covariance sum.
    pub cov_sum_residual: f64,
    /// Largest absolute per-user SINR change.
    pub max_sinr_delta: f64,
    /// Mutual-information bound change (bits).
    pub mi_delta: f64,
    /// Smallest eigenvalue of the recomputed probing residual.
    pub residual_min_eig: f64,
}

/// Pivoted Cholesky factor columns of a PSD matrix, stopping once the
/// largest remaining pivot drops to `tol`. Each returned column l satisfies
/// a ~= sum_k l_k l_k^H, with the approximation error bounded by n * tol in
/// trace. The input may be indefinite at round-off level; the pivot floor
/// keeps the square roots real.
fn pivoted_cholesky_factors(a: &CMat, tol: f64) -> Vec<CVec> {
    let n = a.nrows();
    let mut work = a.clone();
    let mut factors = Vec::new();
    for _ in 0..n {
        let (mut pivot, mut best) = (0usize, f64::NEG_INFINITY);
        for j in 0..n {
            let d = work[(j, j)].re;
            if d > best {
                best = d;
                pivot = j;
            }
        }
        if best <= tol {
            break;
        }
        let l = CVec::from(work.column(pivot)).unscale(best.sqrt());
        work -= outer(&l, &l);
        factors.push(l);
    }
    factors
}

/// Collapse a block-covariance solution to one beamformer per stream.
///
/// The communication vectors preserve each user's useful power exactly; the
/// probing vectors are a rank-revealing factorization of the residual
/// transmit covariance, so the covariance sum — and every metric that
/// depends on the solution only through the sum and the useful powers — is
/// preserved. The report records the changes actually measured.
///
/// Errors when a user's block carries no useful power for its channel
/// (nothing to collapse onto) or when the residual covariance is indefinite
/// beyond round-off, which signals an inaccurate input point.
pub fn extract_rank_one(scn: &Scenario, cov: &CovarianceSet) -> Result<ExtractionReport> {
    let n_tx = scn.geometry.n_tx;
    let n_users = scn.n_users();
    if cov.dim() != n_tx {
        return Err(Error::DimensionMismatch(format!(
            "covariance dimension {} does not match the {}-antenna transmitter",
            cov.dim(),
            n_tx
        )));
    }
    if cov.n_blocks() < n_users {
        return Err(Error::DimensionMismatch(format!(
            "{} covariance blocks cannot cover {} users",
            cov.n_blocks(),
            n_users
        )));
    }

    let p_t = scn.signal.total_power;
    let delta_pos = DEGENERATE_FRACTION * p_t;

    let mut comm = Vec::with_capacity(n_users);
    for (i, h) in scn.users.channels.iter().enumerate() {
        let block = &cov.blocks[i];
        let steered = block * h;
        let useful = h.dotc(&steered).re;
        if !(useful > delta_pos) {
            return Err(Error::Extraction(format!(
                "user {i} block carries no useful power (h^H R h = {useful:.3e})"
            )));
        }
        comm.push(steered.unscale(useful.sqrt()));
    }

    let block_sum = cov.sum();
    let mut comm_cov_sum = CMat::zeros(n_tx, n_tx);
    for w in &comm {
        comm_cov_sum += outer(w, w);
    }
    let residual = hermitize(&(&block_sum - &comm_cov_sum));
    let residual_min_eig = min_eigenvalue(&residual)?;
    if residual_min_eig < -RESIDUAL_EIG_FRACTION * p_t {
        return Err(Error::Numeric(format!(
            "probing residual covariance is indefinite (min eigenvalue {residual_min_eig:.3e}); \
             the block solution is not accurate enough to extract from"
        )));
    }

    let radar: Vec<CVec> = pivoted_cholesky_factors(&residual, delta_pos)
        .into_iter()
        .filter(|l| l.norm_squared() > delta_pos)
        .collect();

    let extracted_radar_streams = radar.len();
    let beamformers = BeamformerSet::new(comm, radar)?;

    let extracted_sum = beamformers.transmit_covariance();
    let cov_sum_residual = frob_norm(&(&block_sum - &extracted_sum));

    let sinr_before = comm_sinrs(cov, &scn.users)?;
    let sinr_after = comm_sinrs(&beamformers.covariance_set(), &scn.users)?;
    let sinr_delta = sinr_after
        .iter()
        .zip(sinr_before.iter())
        .map(|(a, b)| a - b)
        .collect();

    let mi_before = mi_upper_bound(&scn.geometry, &scn.targets, &scn.signal, &block_sum)?;
    let mi_after = mi_upper_bound(&scn.geometry, &scn.targets, &scn.signal, &extracted_sum)?;

    Ok(ExtractionReport {
        beamformers,
        sinr_delta,
        mi_delta: mi_after - mi_before,
        cov_sum_residual,
        residual_min_eig,
        configured_radar_streams: scn.signal.n_radar_streams,
        extracted_radar_streams,
    })
}

/// Re-derive every preservation quantity from the report's vectors and the
/// original blocks, and compare against the acceptance thresholds. Nothing
/// recorded in the report is trusted, so a corrupted report is caught by the
/// check that its defect violates.
pub fn verify_preservation(
    cov: &CovarianceSet,
    report: &ExtractionReport,
    scn: &Scenario,
) -> Result<PreservationCheck> {
    let p_t = scn.signal.total_power;
    let block_sum = cov.sum();
    let bf = &report.beamformers;

    let extracted_sum = bf.transmit_covariance();
    let cov_sum_residual = frob_norm(&(&block_sum - &extracted_sum));
    let power_conserved = cov_sum_residual <= CONSERVATION_FRACTION * p_t;

    let sinr_before = comm_sinrs(cov, &scn.users)?;
    let sinr_after = comm_sinrs(&bf.covariance_set(), &scn.users)?;
    let mut sinr_preserved = true;
    let mut max_sinr_delta = 0.0f64;
    for (a, b) in sinr_after.iter().zip(sinr_before.iter()) {
        let delta = (a - b).abs();
        max_sinr_delta = max_sinr_delta.max(delta);
        if delta > VALUE_REL_TOL * b.max(1.0) {
            sinr_preserved = false;
        }
    }

    let mi_before = mi_upper_bound(&scn.geometry, &scn.targets, &scn.signal, &block_sum)?;
    let mi_after = mi_upper_bound(&scn.geometry, &scn.targets, &scn.signal, &extracted_sum)?;
    let mi_delta = mi_after - mi_before;
    let mi_preserved = mi_delta.abs() <= VALUE_REL_TOL * mi_before.max(1.0);

    let mut comm_cov_sum = CMat::zeros(block_sum.nrows(), block_sum.ncols());
    for w in &bf.comm {
        comm_cov_sum += outer(w, w);
    }
    let residual_min_eig = min_eigenvalue(&hermitize(&(&block_sum - &comm_cov_sum)))?;
    let residual_psd = residual_min_eig >= -RESIDUAL_EIG_FRACTION * p_t;

    Ok(PreservationCheck {
        pass: power_conserved && sinr_preserved && mi_preserved && residual_psd,
        power_conserved,
        sinr_preserved,
        mi_preserved,
        residual_psd,
        cov_sum_residual,
        max_sinr_delta,
        mi_delta,
        residual_min_eig,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::trace_re;
    use crate::rng::{chacha, complex_gaussian_vector};
    use crate::scenario::{ArrayGeometry, SignalConfig, TargetSet, UserSet};
    use nalgebra::dvector;
    use num_complex::Complex64;

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

    fn random_psd(rng: &mut impl rand::Rng, n: usize, rank: usize, power: f64) -> CMat {
        let mut m = CMat::zeros(n, n);
        for _ in 0..rank {
            let v = complex_gaussian_vector(rng, n);
            m += outer(&v, &v);
        }
        let tr = trace_re(&m);
        hermitize(&m.scale(power / tr))
    }

    #[test]
    fn rank_one_block_is_a_fixed_point() {
        let scn = two_antenna_scenario();
        let w = dvector![Complex64::new(0.6, 0.1), Complex64::new(0.3, -0.4)];
        let radar = random_psd(&mut chacha(3), 2, 2, 0.5);
        let cov = CovarianceSet::new(vec![outer(&w, &w), radar]).unwrap();

        let report = extract_rank_one(&scn, &cov).unwrap();
        let recovered = outer(&report.beamformers.comm[0], &report.beamformers.comm[0]);
        assert!(
            frob_norm(&(recovered - outer(&w, &w))) < 1e-10,
            "a rank-one block must be returned unchanged up to phase"
        );
    }

    #[test]
    fn zero_radar_power_yields_no_probing_vectors() {
        let scn = two_antenna_scenario();
        let h = &scn.users.channels[0];
        let w = h.clone().unscale(h.norm());
        let cov = CovarianceSet::new(vec![outer(&w, &w), CMat::zeros(2, 2)]).unwrap();

        let report = extract_rank_one(&scn, &cov).unwrap();
        assert_eq!(report.extracted_radar_streams, 0);
        assert!(report.beamformers.radar.is_empty());
        assert_eq!(report.configured_radar_streams, 1);
        let check = verify_preservation(&cov, &report, &scn).unwrap();
        assert!(check.pass, "trivial all-communication point must verify: {check:?}");
    }

    #[test]
    fn degenerate_allocation_names_the_user() {
        let scn = two_antenna_scenario();
        // Block orthogonal to the user channel [1, 1]: no useful power.
        let v = dvector![Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)];
        let cov = CovarianceSet::new(vec![outer(&v, &v), CMat::zeros(2, 2)]).unwrap();
        let err = extract_rank_one(&scn, &cov).unwrap_err();
        match err {
            Error::Extraction(msg) => assert!(msg.contains("user 0"), "got: {msg}"),
            other => panic!("expected extraction error, got {other}"),
        }
    }

    #[test]
    fn random_psd_blocks_extract_and_verify() {
        for seed in 0..10u64 {
            let mut rng = chacha(900 + seed);
            let n_tx = 8;
            let geometry = ArrayGeometry::half_wavelength(n_tx, 4).unwrap();
            let targets = TargetSet::new(vec![-20.0, 35.0], vec![1.0, 0.5]).unwrap();
            let users = UserSet::new(
                vec![
                    complex_gaussian_vector(&mut rng, n_tx),
                    complex_gaussian_vector(&mut rng, n_tx),
                ],
                vec![1.0, 1.0],
            )
            .unwrap();
            let signal = SignalConfig::new(16, 4.0, 2, 1.0).unwrap();
            let scn = Scenario::new(geometry, targets, users, signal).unwrap();

            let blocks = vec![
                random_psd(&mut rng, n_tx, 3, 1.2),
                random_psd(&mut rng, n_tx, 3, 1.0),
                random_psd(&mut rng, n_tx, 2, 1.0),
                random_psd(&mut rng, n_tx, 2, 0.8),
            ];
            let cov = CovarianceSet::new(blocks).unwrap();

            let report = extract_rank_one(&scn, &cov).unwrap();
            let check = verify_preservation(&cov, &report, &scn).unwrap();
            assert!(check.pass, "seed {seed}: preservation failed: {check:?}");
            assert!(
                check.max_sinr_delta <= 1e-6,
                "seed {seed}: SINR moved by {}",
                check.max_sinr_delta
            );
        }
    }

    #[test]
    fn corrupted_report_fails_the_power_check() {
        let scn = two_antenna_scenario();
        let h = &scn.users.channels[0];
        let w = h.clone().unscale(h.norm() / 0.8_f64.sqrt());
        let radar = random_psd(&mut chacha(7), 2, 2, 0.2);
        let cov = CovarianceSet::new(vec![outer(&w, &w), radar]).unwrap();

        let mut report = extract_rank_one(&scn, &cov).unwrap();
        let check = verify_preservation(&cov, &report, &scn).unwrap();
        assert!(check.pass, "uncorrupted report must verify: {check:?}");

        report.beamformers.comm[0] *= Complex64::new(2.0, 0.0);
        let corrupted = verify_preservation(&cov, &report, &scn).unwrap();
        assert!(!corrupted.pass);
        assert!(!corrupted.power_conserved, "power residual must be flagged: {corrupted:?}");
    }

    #[test]
    fn pivoted_cholesky_reconstructs_low_rank_psd() {
        let mut rng = chacha(42);
        let a = random_psd(&mut rng, 6, 3, 2.0);
        let factors = pivoted_cholesky_factors(&a, 1e-12);
        assert_eq!(factors.len(), 3, "rank-3 input must give exactly 3 factors");
        let mut rec = CMat::zeros(6, 6);
        for l in &factors {
            rec += outer(l, l);
        }
        assert!(frob_norm(&(&a - &rec)) < 1e-10);
    }
}
