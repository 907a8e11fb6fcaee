//! Deployment geometry, targets, users, and signal bookkeeping.
//!
//! A scenario fixes everything the metric and solver layers need: a uniform
//! linear array at the transmitter and receiver, K point targets with known
//! nominal angles and reflection variances, C downlink users with channel
//! vectors and noise powers, and the frame-level signal parameters (block
//! length, power budget, probing-stream count, sensing noise floor).
//!
//! Angles cross the API boundary in degrees and are converted to radians
//! exactly once, inside the steering-vector constructors.

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::CVec;
use crate::rng::{chacha, complex_gaussian_vector, derive_seed};

/// Below this norm a drawn channel is considered degenerate and rejected.
pub const CHANNEL_NORM_FLOOR: f64 = 1e-12;

/// Uniform linear arrays at both ends of the link.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry {
    /// Transmit elements N_t.
    pub n_tx: usize,
    /// Receive elements N_r.
    pub n_rx: usize,
    /// Element spacing over carrier wavelength (d / lambda).
    pub spacing_ratio: f64,
}

impl ArrayGeometry {
    pub const DEFAULT_SPACING_RATIO: f64 = 0.5;

    pub fn new(n_tx: usize, n_rx: usize, spacing_ratio: f64) -> Result<Self> {
        if n_tx == 0 || n_rx == 0 {
            return Err(Error::InvalidScenario("array sizes must be positive".into()));
        }
        if !(spacing_ratio > 0.0) || !spacing_ratio.is_finite() {
            return Err(Error::InvalidScenario(format!(
                "spacing ratio must be positive and finite, got {spacing_ratio}"
            )));
        }
        Ok(Self { n_tx, n_rx, spacing_ratio })
    }

    /// Half-wavelength spacing, the usual default.
    pub fn half_wavelength(n_tx: usize, n_rx: usize) -> Result<Self> {
        Self::new(n_tx, n_rx, Self::DEFAULT_SPACING_RATIO)
    }

    /// Transmit steering vector a(theta), entries exp(j 2 pi (d/lambda) n sin theta)
    /// for n = 0..N_t-1.
    pub fn tx_steering(&self, angle_deg: f64) -> Result<CVec> {
        steering(self.n_tx, self.spacing_ratio, angle_deg)
    }

    /// Receive steering vector b(theta) over the N_r-element array.
    pub fn rx_steering(&self, angle_deg: f64) -> Result<CVec> {
        steering(self.n_rx, self.spacing_ratio, angle_deg)
    }
}

fn steering(n: usize, spacing_ratio: f64, angle_deg: f64) -> Result<CVec> {
    if !(angle_deg.abs() < 90.0) {
        return Err(Error::AngleOutOfRange(angle_deg));
    }
    let phase_step = 2.0 * std::f64::consts::PI * spacing_ratio * angle_deg.to_radians().sin();
    Ok(CVec::from_fn(n, |k, _| Complex64::from_polar(1.0, phase_step * k as f64)))
}

/// Point targets: nominal angles (distinct) and reflection variances sigma_k^2.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetSet {
    pub angles_deg: Vec<f64>,
    pub variances: Vec<f64>,
}

impl TargetSet {
    pub fn new(angles_deg: Vec<f64>, variances: Vec<f64>) -> Result<Self> {
        if angles_deg.is_empty() {
            return Err(Error::InvalidScenario("at least one target required".into()));
        }
        if angles_deg.len() != variances.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} target angles but {} variances",
                angles_deg.len(),
                variances.len()
            )));
        }
        for &a in &angles_deg {
            if !(a.abs() < 90.0) {
                return Err(Error::AngleOutOfRange(a));
            }
        }
        for (i, &a) in angles_deg.iter().enumerate() {
            for &b in &angles_deg[i + 1..] {
                if (a - b).abs() < 1e-9 {
                    return Err(Error::InvalidScenario(format!("duplicate target angle {a} deg")));
                }
            }
        }
        if variances.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(Error::InvalidScenario("target variances must be positive".into()));
        }
        Ok(Self { angles_deg, variances })
    }

    pub fn len(&self) -> usize {
        self.angles_deg.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles_deg.is_empty()
    }
}

/// Downlink users: channel vectors h_i (length N_t) and noise powers sigma_i^2.
#[derive(Debug, Clone, PartialEq)]
pub struct UserSet {
    pub channels: Vec<CVec>,
    pub noise_powers: Vec<f64>,
}

impl UserSet {
    pub fn new(channels: Vec<CVec>, noise_powers: Vec<f64>) -> Result<Self> {
        if channels.is_empty() {
            return Err(Error::InvalidScenario("at least one user required".into()));
        }
        if channels.len() != noise_powers.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} channels but {} noise powers",
                channels.len(),
                noise_powers.len()
            )));
        }
        if noise_powers.iter().any(|&p| !(p > 0.0) || !p.is_finite()) {
            return Err(Error::InvalidScenario("user noise powers must be positive".into()));
        }
        let dim = channels[0].len();
        for (i, h) in channels.iter().enumerate() {
            if h.len() != dim {
                return Err(Error::DimensionMismatch("inconsistent channel lengths".into()));
            }
            if h.norm() < CHANNEL_NORM_FLOOR {
                return Err(Error::InvalidScenario(format!("user {i} channel has zero norm")));
            }
        }
        Ok(Self { channels, noise_powers })
    }

    pub fn len(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }
}

/// Frame-level signal parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalConfig {
    /// Symbols per block, L.
    pub block_length: usize,
    /// Transmit power budget P_T in watts.
    pub total_power: f64,
    /// Dedicated probing streams M (0 permitted).
    pub n_radar_streams: usize,
    /// Sensing receiver noise power sigma_r^2 in watts.
    pub radar_noise: f64,
}

impl SignalConfig {
    pub fn new(block_length: usize, total_power: f64, n_radar_streams: usize, radar_noise: f64) -> Result<Self> {
        if block_length == 0 {
            return Err(Error::InvalidScenario("block length must be positive".into()));
        }
        if !(total_power > 0.0) || !total_power.is_finite() {
            return Err(Error::InvalidScenario("total power must be positive".into()));
        }
        if !(radar_noise > 0.0) || !radar_noise.is_finite() {
            return Err(Error::InvalidScenario("radar noise power must be positive".into()));
        }
        Ok(Self { block_length, total_power, n_radar_streams, radar_noise })
    }
}

/// Rician fading parameters for drawn user channels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RicianParams {
    /// K-factor mu >= 0; 0 degenerates to Rayleigh fading.
    pub factor: f64,
}

impl RicianParams {
    pub fn new(factor: f64) -> Result<Self> {
        if !(factor >= 0.0) || !factor.is_finite() {
            return Err(Error::InvalidScenario(format!("Rician factor must be >= 0, got {factor}")));
        }
        Ok(Self { factor })
    }
}

/// Full problem instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub geometry: ArrayGeometry,
    pub targets: TargetSet,
    pub users: UserSet,
    pub signal: SignalConfig,
}

impl Scenario {
    pub fn new(geometry: ArrayGeometry, targets: TargetSet, users: UserSet, signal: SignalConfig) -> Result<Self> {
        if users.channels[0].len() != geometry.n_tx {
            return Err(Error::DimensionMismatch(format!(
                "channel length {} != N_t {}",
                users.channels[0].len(),
                geometry.n_tx
            )));
        }
        let streams = users.len() + signal.n_radar_streams;
        if streams > geometry.n_tx {
            return Err(Error::InvalidScenario(format!(
                "C + M = {streams} exceeds N_t = {}",
                geometry.n_tx
            )));
        }
        Ok(Self { geometry, targets, users, signal })
    }

    /// Total number of transmit streams, C + M.
    pub fn n_streams(&self) -> usize {
        self.users.len() + self.signal.n_radar_streams
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_targets(&self) -> usize {
        self.targets.len()
    }
}

/// Draw Rician channels h = sqrt(mu/(mu+1)) a(theta_i) + sqrt(1/(mu+1)) u,
/// with theta_i uniform in the open interval (-90, 90) degrees per user and
/// u ~ CN(0, I). Each user consumes its own derived sub-stream, so the draw
/// for user i does not depend on how many users precede it being consumed
/// elsewhere, and the whole set reproduces bitwise for a given seed.
pub fn sample_rician_channels(
    geometry: &ArrayGeometry,
    count: usize,
    params: &RicianParams,
    seed: u64,
) -> Result<Vec<CVec>> {
    if count == 0 {
        return Err(Error::InvalidScenario("at least one user required".into()));
    }
    let mu = params.factor;
    let los_scale = (mu / (mu + 1.0)).sqrt();
    let scatter_scale = (1.0 / (mu + 1.0)).sqrt();
    let mut channels = Vec::with_capacity(count);
    for i in 0..count {
        let mut rng = chacha(derive_seed(seed, i as u64));
        let angle = loop {
            let u: f64 = rng.gen();
            let a = -90.0 + 180.0 * u;
            if a.abs() < 90.0 {
                break a;
            }
        };
        let los = geometry.tx_steering(angle)?;
        let scatter = complex_gaussian_vector(&mut rng, geometry.n_tx);
        let h = los.scale(los_scale) + scatter.scale(scatter_scale);
        if h.norm() < CHANNEL_NORM_FLOOR {
            return Err(Error::InvalidScenario(format!("user {i} drew a degenerate channel")));
        }
        channels.push(h);
    }
    Ok(channels)
}

/// Uniform angle grid covering the open interval (-90, 90) degrees.
pub fn angle_grid(step_deg: f64) -> Vec<f64> {
    assert!(step_deg > 0.0, "grid step must be positive");
    let mut grid = Vec::new();
    let mut k = 1;
    loop {
        let a = -90.0 + step_deg * k as f64;
        if a >= 90.0 {
            break;
        }
        grid.push(a);
        k += 1;
    }
    grid
}

/// dBm to watts: 10^((dbm - 30)/10).
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// dB to linear power ratio.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geom(n_tx: usize, n_rx: usize) -> ArrayGeometry {
        ArrayGeometry::half_wavelength(n_tx, n_rx).unwrap()
    }

    #[test]
    fn steering_two_element_30_deg() {
        // phase step = 2 pi * 0.5 * sin(30 deg) = pi/2, so a = [1, j].
        let a = geom(2, 2).tx_steering(30.0).unwrap();
        assert!((a[0] - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        assert!((a[1] - Complex64::new(0.0, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn steering_single_element_and_broadside() {
        let a = geom(1, 1).tx_steering(-37.0).unwrap();
        assert_eq!(a.len(), 1);
        assert!((a[0] - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        let b = geom(3, 3).rx_steering(0.0).unwrap();
        for k in 0..3 {
            assert!((b[k] - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn steering_conjugate_symmetry_and_unit_modulus() {
        let g = geom(8, 4);
        for &theta in &[-71.3, -12.0, 5.5, 44.0, 89.0] {
            let a = g.tx_steering(theta).unwrap();
            let a_neg = g.tx_steering(-theta).unwrap();
            for k in 0..8 {
                assert!((a_neg[k] - a[k].conj()).norm() < 1e-12);
                assert!((a[k].norm() - 1.0).abs() < 1e-12);
            }
            assert!((a.norm_squared() - 8.0).abs() < 1e-10);
        }
    }

    #[test]
    fn steering_rejects_edge_angles() {
        let g = geom(4, 4);
        assert!(matches!(g.tx_steering(90.0), Err(Error::AngleOutOfRange(_))));
        assert!(matches!(g.tx_steering(-90.0), Err(Error::AngleOutOfRange(_))));
        assert!(matches!(g.rx_steering(123.0), Err(Error::AngleOutOfRange(_))));
        assert!(g.tx_steering(89.999).is_ok());
    }

    #[test]
    fn target_set_validation() {
        assert!(TargetSet::new(vec![], vec![]).is_err());
        assert!(TargetSet::new(vec![10.0, 10.0], vec![1.0, 1.0]).is_err());
        assert!(TargetSet::new(vec![10.0, 20.0], vec![1.0, 0.0]).is_err());
        assert!(TargetSet::new(vec![95.0], vec![1.0]).is_err());
        assert!(TargetSet::new(vec![10.0, 20.0], vec![1.0, 2.0]).is_ok());
    }

    #[test]
    fn scenario_rejects_stream_overflow() {
        let g = geom(2, 2);
        let channels = sample_rician_channels(&g, 2, &RicianParams::new(1.0).unwrap(), 1).unwrap();
        let users = UserSet::new(channels, vec![1.0, 1.0]).unwrap();
        let targets = TargetSet::new(vec![10.0], vec![1.0]).unwrap();
        let sig = SignalConfig::new(8, 1.0, 1, 1.0).unwrap(); // C + M = 3 > N_t = 2
        assert!(Scenario::new(g, targets, users, sig).is_err());
    }

    #[test]
    fn rician_deterministic_per_seed() {
        let g = geom(4, 4);
        let p = RicianParams::new(2.0).unwrap();
        let a = sample_rician_channels(&g, 3, &p, 77).unwrap();
        let b = sample_rician_channels(&g, 3, &p, 77).unwrap();
        let c = sample_rician_channels(&g, 3, &p, 78).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn rician_rayleigh_second_moment() {
        // mu = 0: entries are CN(0, 1), so the mean per-entry squared
        // magnitude over 1e5 draws sits within 1 +/- 0.02 (beyond 3 sigma).
        let g = geom(4, 4);
        let p = RicianParams::new(0.0).unwrap();
        let draws = sample_rician_channels(&g, 100_000, &p, 12345).unwrap();
        let mean: f64 =
            draws.iter().map(|h| h.norm_squared() / 4.0).sum::<f64>() / draws.len() as f64;
        assert!((mean - 1.0).abs() < 0.02, "mean entry power {mean}");
    }

    #[test]
    fn rician_preserves_mean_power_for_positive_factor() {
        // |LoS entry| = 1 and E|scatter entry|^2 = 1, so the mixture keeps
        // E|h_n|^2 = 1 for every mu.
        let g = geom(4, 4);
        let p = RicianParams::new(3.0).unwrap();
        let draws = sample_rician_channels(&g, 50_000, &p, 9).unwrap();
        let mean: f64 =
            draws.iter().map(|h| h.norm_squared() / 4.0).sum::<f64>() / draws.len() as f64;
        assert!((mean - 1.0).abs() < 0.03, "mean entry power {mean}");
    }

    #[test]
    fn rician_rejects_bad_factor() {
        assert!(RicianParams::new(-0.5).is_err());
        assert!(RicianParams::new(f64::NAN).is_err());
    }

    #[test]
    fn angle_grid_open_interval() {
        let grid = angle_grid(0.1);
        assert!(grid.first().copied().unwrap() > -90.0);
        assert!(grid.last().copied().unwrap() < 90.0);
        assert_eq!(grid.len(), 1799);
        let diffs: Vec<f64> = grid.windows(2).map(|w| w[1] - w[0]).collect();
        for d in diffs {
            assert!((d - 0.1).abs() < 1e-9);
        }
    }

    #[test]
    fn power_conversions() {
        assert!((dbm_to_watts(30.0) - 1.0).abs() < 1e-12);
        assert!((dbm_to_watts(40.0) - 10.0).abs() < 1e-12);
        assert!((dbm_to_watts(0.0) - 1e-3).abs() < 1e-15);
        assert!((db_to_linear(5.0) - 3.1622776601683795).abs() < 1e-12);
    }
}
