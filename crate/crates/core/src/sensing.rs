//! Receive-side evaluation: simulated echoes, Capon spectra, angle RMSE.
//!
//! The transmit side of the pipeline reasons about covariances; this module
//! closes the loop physically. A beamformer set is turned into a finite
//! transmit block of pseudorandom symbols, targets reflect it back onto the
//! receive array, and the angles are re-estimated from the echoes with the
//! Capon spectrum. Monte-Carlo sweeps report the angle RMSE as a function of
//! receive SNR.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{hermitize, outer, trace_re, CMat};
use crate::metrics::BeamformerSet;
use crate::rng::{chacha, complex_gaussian_matrix, derive_seed};
use crate::scenario::{angle_grid, ArrayGeometry, Scenario, TargetSet};
use num_complex::Complex64;

/// Diagonal loading applied to the Capon sample covariance, as a fraction of
/// the average eigenvalue. Keeps the spectrum defined at low snapshot counts.
const CAPON_LOADING: f64 = 1e-3;

/// Grid step (degrees) used by the RMSE sweeps.
const RMSE_GRID_STEP_DEG: f64 = 0.1;

/// Largest target count for which estimate/target matching enumerates
/// permutations exactly.
const MAX_MATCHED_TARGETS: usize = 8;

/// One concrete realization of the target reflections for echo simulation.
///
/// The sensing-information formulas treat reflection coefficients as
/// zero-mean random variables with per-target variances; a simulated echo
/// needs actual draws. Spectrum and RMSE experiments fix the amplitudes to
/// one and sweep the noise power instead.
#[derive(Debug, Clone)]
pub struct EchoScenario {
    /// Complex reflection amplitude per target.
    pub target_amplitudes: Vec<Complex64>,
    /// Receive noise power (watts).
    pub radar_noise: f64,
    /// Seed for the additive noise draw.
    pub seed: u64,
}

impl EchoScenario {
    pub fn new(target_amplitudes: Vec<Complex64>, radar_noise: f64, seed: u64) -> Result<Self> {
        if !(radar_noise >= 0.0 && radar_noise.is_finite()) {
            return Err(Error::InvalidScenario(format!(
                "radar noise power must be finite and non-negative, got {radar_noise}"
            )));
        }
        if target_amplitudes.iter().any(|b| !b.re.is_finite() || !b.im.is_finite()) {
            return Err(Error::InvalidScenario("non-finite target amplitude".into()));
        }
        Ok(Self { target_amplitudes, radar_noise, seed })
    }

    /// Unit amplitudes for `k` targets — the convention for spectrum and
    /// RMSE experiments.
    pub fn unit(k: usize, radar_noise: f64, seed: u64) -> Result<Self> {
        Self::new(vec![Complex64::new(1.0, 0.0); k], radar_noise, seed)
    }
}

/// A Capon spatial spectrum over an angle grid.
#[derive(Debug, Clone)]
pub struct CaponResult {
    /// Grid angles (degrees, ascending).
    pub angles_deg: Vec<f64>,
    /// Spectrum value at each grid angle (positive).
    pub spectrum: Vec<f64>,
    /// Angles of all interior local maxima, ascending.
    pub peaks_deg: Vec<f64>,
}

/// Angles picked from a Capon spectrum for a known target count.
#[derive(Debug, Clone)]
pub struct AngleEstimate {
    /// Estimated angles (degrees, ascending), always of the requested length.
    pub angles_deg: Vec<f64>,
    /// True when the spectrum had fewer local maxima than requested and the
    /// output was padded with the global peak.
    pub degenerate: bool,
}

/// One row of an RMSE-versus-SNR table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RmsePoint {
    pub snr_db: f64,
    pub rmse_deg: f64,
}

/// Draw a pseudorandom transmit block X = W S with one i.i.d. unit-variance
/// complex Gaussian symbol stream per beamformer. The empirical covariance
/// (1/L) X X^H concentrates around the beamformer covariance sum as the
/// block grows.
pub fn synthesize_transmit(beams: &BeamformerSet, block_length: usize, seed: u64) -> Result<CMat> {
    let n_streams = beams.n_streams();
    if block_length < n_streams {
        return Err(Error::DimensionMismatch(format!(
            "block length {block_length} shorter than the {n_streams} symbol streams"
        )));
    }
    let dim = beams.dim();
    let mut w = CMat::zeros(dim, n_streams);
    for (c, v) in beams.comm.iter().chain(beams.radar.iter()).enumerate() {
        w.set_column(c, v);
    }
    let symbols = complex_gaussian_matrix(&mut chacha(seed), n_streams, block_length);
    Ok(w * symbols)
}

/// Reflect a transmit block off the targets onto the receive array:
/// Y = G X + Z with G = sum_k beta_k b(theta_k) a(theta_k)^H and Z i.i.d.
/// CN(0, radar_noise). Deterministic given the echo seed.
pub fn simulate_echo(
    geometry: &ArrayGeometry,
    targets: &TargetSet,
    echo: &EchoScenario,
    x: &CMat,
) -> Result<CMat> {
    let k = targets.angles_deg.len();
    if echo.target_amplitudes.len() != k {
        return Err(Error::DimensionMismatch(format!(
            "{} echo amplitudes for {} targets",
            echo.target_amplitudes.len(),
            k
        )));
    }
    if x.nrows() != geometry.n_tx {
        return Err(Error::DimensionMismatch(format!(
            "transmit block has {} rows for an {}-antenna transmitter",
            x.nrows(),
            geometry.n_tx
        )));
    }

    let mut forward = CMat::zeros(geometry.n_rx, geometry.n_tx);
    for (k_idx, &angle) in targets.angles_deg.iter().enumerate() {
        let a = geometry.tx_steering(angle)?;
        let b = geometry.rx_steering(angle)?;
        forward += outer(&b, &a) * echo.target_amplitudes[k_idx];
    }

    let mut received = forward * x;
    if echo.radar_noise > 0.0 {
        let noise = complex_gaussian_matrix(&mut chacha(echo.seed), geometry.n_rx, x.ncols());
        received += noise.scale(echo.radar_noise.sqrt());
    }
    Ok(received)
}

/// Capon spatial spectrum of a received block over an ascending angle grid:
/// spectrum(theta) = 1 / (b(theta)^H R^-1 b(theta)) with the sample
/// covariance diagonally loaded for invertibility.
pub fn capon_spectrum(y: &CMat, geometry: &ArrayGeometry, grid: &[f64]) -> Result<CaponResult> {
    let n_rx = geometry.n_rx;
    if y.nrows() != n_rx {
        return Err(Error::DimensionMismatch(format!(
            "received block has {} rows for an {}-antenna receive array",
            y.nrows(),
            n_rx
        )));
    }
    let snapshots = y.ncols();
    if snapshots < n_rx {
        return Err(Error::SizeGuard(format!(
            "Capon needs at least {n_rx} snapshots, got {snapshots}"
        )));
    }

    let sample = hermitize(&((y * y.adjoint()).unscale(snapshots as f64)));
    let mut loading = CAPON_LOADING * trace_re(&sample) / n_rx as f64;
    if !(loading > 0.0) {
        // All-zero input: fall back to absolute loading so the spectrum is
        // still defined (and flat).
        loading = CAPON_LOADING;
    }
    let loaded = &sample + CMat::identity(n_rx, n_rx).scale(loading);
    let chol = loaded
        .cholesky()
        .ok_or_else(|| Error::Numeric("loaded sample covariance failed to factor".into()))?;

    let mut spectrum = Vec::with_capacity(grid.len());
    for &angle in grid {
        let b = geometry.rx_steering(angle)?;
        let solved = chol.solve(&b);
        let denom = b.dotc(&solved).re;
        spectrum.push(1.0 / denom);
    }

    let peaks_deg = local_maxima(&spectrum).into_iter().map(|i| grid[i]).collect();
    Ok(CaponResult { angles_deg: grid.to_vec(), spectrum, peaks_deg })
}

/// Indices of interior local maxima: strictly above the left neighbor, at
/// least as high as the right one (so a flat plateau counts once, at its
/// left edge).
fn local_maxima(spectrum: &[f64]) -> Vec<usize> {
    let mut idx = Vec::new();
    for i in 1..spectrum.len().saturating_sub(1) {
        if spectrum[i] > spectrum[i - 1] && spectrum[i] >= spectrum[i + 1] {
            idx.push(i);
        }
    }
    idx
}

/// Pick `k` angles from a Capon spectrum: the `k` largest local maxima,
/// ties broken toward the larger spectrum value and then the smaller angle.
/// When the spectrum has fewer local maxima than requested, the output is
/// padded with the global peak and flagged degenerate.
pub fn estimate_angles(result: &CaponResult, k: usize) -> Result<AngleEstimate> {
    if result.spectrum.is_empty() || result.spectrum.len() != result.angles_deg.len() {
        return Err(Error::DimensionMismatch(
            "angle estimation needs a non-empty spectrum over a matching grid".into(),
        ));
    }
    if k == 0 {
        return Ok(AngleEstimate { angles_deg: Vec::new(), degenerate: false });
    }

    let mut candidates: Vec<usize> = local_maxima(&result.spectrum);
    candidates.sort_by(|&i, &j| {
        result.spectrum[j]
            .total_cmp(&result.spectrum[i])
            .then(result.angles_deg[i].total_cmp(&result.angles_deg[j]))
    });
    candidates.truncate(k);

    let degenerate = candidates.len() < k;
    let mut angles: Vec<f64> = candidates.iter().map(|&i| result.angles_deg[i]).collect();
    if degenerate {
        // First index attaining the maximum = smallest angle on ties.
        let mut global = 0usize;
        for (i, &v) in result.spectrum.iter().enumerate() {
            if v > result.spectrum[global] {
                global = i;
            }
        }
        while angles.len() < k {
            angles.push(result.angles_deg[global]);
        }
    }
    angles.sort_by(f64::total_cmp);
    Ok(AngleEstimate { angles_deg: angles, degenerate })
}

/// Smallest sum of squared angle errors over all ways of assigning the
/// estimated angles to the true ones (exact permutation search).
fn matched_squared_error(truth: &[f64], estimates: &[f64]) -> f64 {
    fn recurse(truth: &[f64], estimates: &[f64], used: &mut [bool], level: usize, acc: f64, best: &mut f64) {
        if acc >= *best {
            return;
        }
        if level == truth.len() {
            *best = acc;
            return;
        }
        for (e, &est) in estimates.iter().enumerate() {
            if !used[e] {
                used[e] = true;
                let d = truth[level] - est;
                recurse(truth, estimates, used, level + 1, acc + d * d, best);
                used[e] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    let mut used = vec![false; estimates.len()];
    recurse(truth, estimates, &mut used, 0, 0.0, &mut best);
    best
}

/// Monte-Carlo angle RMSE of the Capon estimator for a solved beamformer
/// set, per receive SNR. The SNR axis is realized by scaling the receive
/// noise power at fixed transmit power: radar_noise = mean target variance
/// times total power divided by the linear SNR, with target amplitudes fixed
/// at one. Trial t draws its randomness from `base_seed + t`, so the table
/// is reproducible and trials can run concurrently.
pub fn rmse_mc(
    scn: &Scenario,
    beams: &BeamformerSet,
    snr_grid_db: &[f64],
    trials: usize,
    base_seed: u64,
) -> Result<Vec<RmsePoint>> {
    if trials == 0 {
        return Err(Error::InvalidScenario("RMSE sweep needs at least one trial".into()));
    }
    let k = scn.n_targets();
    if k == 0 || k > MAX_MATCHED_TARGETS {
        return Err(Error::SizeGuard(format!(
            "exact estimate/target matching supports 1..={MAX_MATCHED_TARGETS} targets, got {k}"
        )));
    }

    let mean_variance =
        scn.targets.variances.iter().sum::<f64>() / scn.targets.variances.len() as f64;
    let grid = angle_grid(RMSE_GRID_STEP_DEG);
    let block_length = scn.signal.block_length;
    let truth = &scn.targets.angles_deg;

    let mut table = Vec::with_capacity(snr_grid_db.len());
    for &snr_db in snr_grid_db {
        let radar_noise = mean_variance * scn.signal.total_power / 10f64.powf(snr_db / 10.0);
        // Collect per-trial errors first and reduce sequentially so the sum
        // does not depend on the parallel schedule.
        let trial_errors: Vec<f64> = (0..trials)
            .into_par_iter()
            .map(|trial| -> Result<f64> {
                let trial_seed = base_seed.wrapping_add(trial as u64);
                let x = synthesize_transmit(beams, block_length, derive_seed(trial_seed, 0))?;
                let echo = EchoScenario::unit(k, radar_noise, derive_seed(trial_seed, 1))?;
                let y = simulate_echo(&scn.geometry, &scn.targets, &echo, &x)?;
                let capon = capon_spectrum(&y, &scn.geometry, &grid)?;
                let estimate = estimate_angles(&capon, k)?;
                Ok(matched_squared_error(truth, &estimate.angles_deg))
            })
            .collect::<Result<Vec<f64>>>()?;
        let total: f64 = trial_errors.iter().sum();
        table.push(RmsePoint {
            snr_db,
            rmse_deg: (total / (trials * k) as f64).sqrt(),
        });
    }
    Ok(table)
}
