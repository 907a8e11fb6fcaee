//! Communication and sensing figures of merit.
//!
//! Two families of quantities live here. On the communication side: per-user
//! SINRs of the downlink streams and the average achievable rate. On the
//! sensing side: the exact mutual information between the echo block and the
//! target reflection coefficients, its per-target upper bound, and the
//! transmit beampattern.
//!
//! The exact MI reduces to a K x K determinant through the cross-correlation
//! pattern
//!
//!   Phi_ij = b(theta_i)^H b(theta_j) * (L / sigma_r^2) * a(theta_i)^H R_X a(theta_j),
//!
//! with I = log2 det(Phi + diag(1/sigma_k^2)) + sum_k log2 sigma_k^2. The
//! upper bound treats targets as decoupled: I_up = sum_k log2(1 + SINR_k)
//! with SINR_k = N_r sigma_k^2 L / sigma_r^2 * a(theta_k)^H R_X a(theta_k);
//! it is tight exactly when the off-diagonal pattern vanishes, which is what
//! the zero-forcing constraints in the solver enforce.
//!
//! [`sensing_mi_oracle`] recomputes the exact MI straight from the
//! Kronecker-structured echo covariance (dimension N_t N_r), sharing no code
//! with the K x K path; it exists to cross-check the reduction at small
//! sizes and is guarded accordingly.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{det_lu, hermitize, kron, logdet2_hpd, outer, CMat, CVec};
use crate::scenario::{ArrayGeometry, SignalConfig, TargetSet, UserSet};

/// Largest N_t * N_r the dense oracle path accepts.
pub const ORACLE_DIM_LIMIT: usize = 64;

/// Per-stream transmit covariance blocks R_n >= 0; their sum is the transmit
/// covariance R_X. The first C blocks belong to communication streams.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceSet {
    pub blocks: Vec<CMat>,
}

impl CovarianceSet {
    /// Blocks are symmetrized on entry so later projections and quadratic
    /// forms never see accumulated asymmetry.
    pub fn new(blocks: Vec<CMat>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::DimensionMismatch("covariance set needs at least one block".into()));
        }
        let n = blocks[0].nrows();
        for b in &blocks {
            if b.nrows() != n || b.ncols() != n {
                return Err(Error::DimensionMismatch("covariance blocks must be square and equally sized".into()));
            }
            if b.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::Numeric("non-finite covariance entry".into()));
            }
        }
        Ok(Self { blocks: blocks.iter().map(hermitize).collect() })
    }

    /// The standard solver start: every block (P_T / (N_t * n_blocks)) * I.
    pub fn isotropic(dim: usize, n_blocks: usize, total_power: f64) -> Self {
        let scale = total_power / (dim * n_blocks) as f64;
        Self { blocks: vec![CMat::identity(dim, dim).scale(scale); n_blocks] }
    }

    pub fn dim(&self) -> usize {
        self.blocks[0].nrows()
    }

    pub fn n_blocks(&self) -> usize {
        self.blocks.len()
    }

    /// R_X = sum_n R_n.
    pub fn sum(&self) -> CMat {
        let mut acc = CMat::zeros(self.dim(), self.dim());
        for b in &self.blocks {
            acc += b;
        }
        acc
    }

    /// Re tr(R_X).
    pub fn total_power(&self) -> f64 {
        self.blocks.iter().map(crate::linalg::trace_re).sum()
    }

    /// Every block scaled by t.
    pub fn scale(&self, t: f64) -> Self {
        Self { blocks: self.blocks.iter().map(|b| b.scale(t)).collect() }
    }
}

/// Per-stream transmit vectors: C communication beamformers followed by the
/// probing beamformers.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformerSet {
    pub comm: Vec<CVec>,
    pub radar: Vec<CVec>,
}

impl BeamformerSet {
    pub fn new(comm: Vec<CVec>, radar: Vec<CVec>) -> Result<Self> {
        if comm.is_empty() && radar.is_empty() {
            return Err(Error::DimensionMismatch("beamformer set needs at least one stream".into()));
        }
        let dim = comm.first().or_else(|| radar.first()).unwrap().len();
        for w in comm.iter().chain(radar.iter()) {
            if w.len() != dim {
                return Err(Error::DimensionMismatch("inconsistent beamformer lengths".into()));
            }
        }
        Ok(Self { comm, radar })
    }

    pub fn dim(&self) -> usize {
        self.comm.first().or_else(|| self.radar.first()).unwrap().len()
    }

    pub fn n_streams(&self) -> usize {
        self.comm.len() + self.radar.len()
    }

    /// One rank-one block per stream, communication streams first.
    pub fn covariance_set(&self) -> CovarianceSet {
        let blocks = self
            .comm
            .iter()
            .chain(self.radar.iter())
            .map(|w| outer(w, w))
            .collect();
        CovarianceSet::new(blocks).expect("rank-one blocks are well formed")
    }

    /// R_X = sum_n w_n w_n^H.
    pub fn transmit_covariance(&self) -> CMat {
        self.covariance_set().sum()
    }

    pub fn total_power(&self) -> f64 {
        self.comm.iter().chain(self.radar.iter()).map(|w| w.norm_squared()).sum()
    }

    /// Apply the physical probing-stream budget: keep the `budget` strongest
    /// radar vectors (by power) and drop the rest. Extraction can return more
    /// factors than the configured stream count; what goes on air cannot.
    pub fn with_radar_budget(&self, budget: usize) -> Self {
        let mut radar = self.radar.clone();
        radar.sort_by(|a, b| b.norm_squared().total_cmp(&a.norm_squared()));
        radar.truncate(budget);
        Self { comm: self.comm.clone(), radar }
    }
}

/// The K x K cross-correlation pattern Phi and the inverse reflection
/// variances on its regularizing diagonal.
#[derive(Debug, Clone)]
pub struct CrossCorrPattern {
    pub phi: CMat,
    /// 1 / sigma_k^2 per target.
    pub lambda_diag: Vec<f64>,
}

/// Transmit covariance of a block set (sum of the per-stream blocks).
pub fn tx_covariance(cov: &CovarianceSet) -> CMat {
    cov.sum()
}

/// Per-user SINRs gamma_i = h_i^H R_i h_i / (sum_{n != i} h_i^H R_n h_i + sigma_i^2).
///
/// The first C blocks of `cov` are the user streams; any further blocks are
/// probing streams and count as interference for every user.
pub fn comm_sinrs(cov: &CovarianceSet, users: &UserSet) -> Result<Vec<f64>> {
    let c = users.len();
    if cov.n_blocks() < c {
        return Err(Error::DimensionMismatch(format!(
            "{} users but only {} covariance blocks",
            c,
            cov.n_blocks()
        )));
    }
    if users.channels[0].len() != cov.dim() {
        return Err(Error::DimensionMismatch("channel length != covariance dimension".into()));
    }
    let mut sinrs = Vec::with_capacity(c);
    for (i, h) in users.channels.iter().enumerate() {
        let quad: Vec<f64> = cov
            .blocks
            .iter()
            .map(|r| (h.adjoint() * r * h)[(0, 0)].re)
            .collect();
        let signal = quad[i].max(0.0);
        let interference: f64 = quad
            .iter()
            .enumerate()
            .filter(|(n, _)| *n != i)
            .map(|(_, q)| q.max(0.0))
            .sum();
        sinrs.push(signal / (interference + users.noise_powers[i]));
    }
    Ok(sinrs)
}

/// Average downlink rate (1/C) sum_i log2(1 + gamma_i).
pub fn avg_rate(sinrs: &[f64]) -> f64 {
    if sinrs.is_empty() {
        return 0.0;
    }
    sinrs.iter().map(|&g| (1.0 + g).log2()).sum::<f64>() / sinrs.len() as f64
}

/// Build the cross-correlation pattern of a transmit covariance.
pub fn cross_corr_pattern(
    geometry: &ArrayGeometry,
    targets: &TargetSet,
    signal: &SignalConfig,
    r_x: &CMat,
) -> Result<CrossCorrPattern> {
    if r_x.nrows() != geometry.n_tx || r_x.ncols() != geometry.n_tx {
        return Err(Error::DimensionMismatch("transmit covariance must be N_t x N_t".into()));
    }
    let k = targets.len();
    let tx: Vec<CVec> = targets
        .angles_deg
        .iter()
        .map(|&t| geometry.tx_steering(t))
        .collect::<Result<_>>()?;
    let rx: Vec<CVec> = targets
        .angles_deg
        .iter()
        .map(|&t| geometry.rx_steering(t))
        .collect::<Result<_>>()?;
    let gain = signal.block_length as f64 / signal.radar_noise;
    let mut phi = CMat::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            let rx_corr = (rx[i].adjoint() * &rx[j])[(0, 0)];
            let tx_corr = (tx[i].adjoint() * r_x * &tx[j])[(0, 0)];
            phi[(i, j)] = rx_corr * tx_corr * gain;
        }
    }
    Ok(CrossCorrPattern {
        phi: hermitize(&phi),
        lambda_diag: targets.variances.iter().map(|&v| 1.0 / v).collect(),
    })
}

/// Exact sensing mutual information in bits,
/// I = log2 det(Phi + diag(1/sigma_k^2)) + sum_k log2 sigma_k^2.
pub fn exact_sensing_mi(
    geometry: &ArrayGeometry,
    targets: &TargetSet,
    signal: &SignalConfig,
    r_x: &CMat,
) -> Result<f64> {
    let pattern = cross_corr_pattern(geometry, targets, signal, r_x)?;
    exact_mi_from_pattern(&pattern, &targets.variances)
}

/// Exact MI evaluated on an already-built pattern.
pub fn exact_mi_from_pattern(pattern: &CrossCorrPattern, variances: &[f64]) -> Result<f64> {
    let k = pattern.phi.nrows();
    if variances.len() != k || pattern.lambda_diag.len() != k {
        return Err(Error::DimensionMismatch("pattern/variance sizes disagree".into()));
    }
    let mut m = pattern.phi.clone();
    for i in 0..k {
        m[(i, i)] += Complex64::new(pattern.lambda_diag[i], 0.0);
    }
    let logdet = logdet2_hpd(&m)?;
    let offset: f64 = variances.iter().map(|v| v.log2()).sum();
    Ok(logdet + offset)
}

/// Reference MI straight from the stacked echo model: with
/// Xt = X^T kron I_{N_r} and R_G = sum_k sigma_k^2 g_k g_k^H,
/// g_k = conj(a(theta_k)) kron b(theta_k),
///
///   I = log2 det(I + (1/sigma_r^2) R_G Xt^H Xt),
///
/// where Xt^H Xt = (conj(X) X^T) kron I_{N_r}. Dense in dimension N_t N_r and
/// evaluated through an LU determinant; guarded to N_t N_r <= 64.
pub fn sensing_mi_oracle(
    geometry: &ArrayGeometry,
    targets: &TargetSet,
    signal: &SignalConfig,
    x: &CMat,
) -> Result<f64> {
    let (nt, nr) = (geometry.n_tx, geometry.n_rx);
    if nt * nr > ORACLE_DIM_LIMIT {
        return Err(Error::SizeGuard(format!(
            "oracle dimension N_t*N_r = {} exceeds {}",
            nt * nr,
            ORACLE_DIM_LIMIT
        )));
    }
    if x.nrows() != nt {
        return Err(Error::DimensionMismatch("X must have N_t rows".into()));
    }
    let dim = nt * nr;
    let mut r_g = CMat::zeros(dim, dim);
    for (k, &theta) in targets.angles_deg.iter().enumerate() {
        let a = geometry.tx_steering(theta)?;
        let b = geometry.rx_steering(theta)?;
        let mut g = CVec::zeros(dim);
        for n in 0..nt {
            for m in 0..nr {
                g[n * nr + m] = a[n].conj() * b[m];
            }
        }
        r_g += outer(&g, &g).scale(targets.variances[k]);
    }
    let gram = x.conjugate() * x.transpose(); // conj(X) X^T, N_t x N_t
    let big = kron(&gram, &CMat::identity(nr, nr));
    let m = CMat::identity(dim, dim) + (&r_g * &big).scale(1.0 / signal.radar_noise);
    let det = det_lu(&m);
    if !(det.re > 0.0) || det.im.abs() > 1e-8 * det.re.abs() + 1e-12 {
        return Err(Error::Numeric(format!("oracle determinant not real positive: {det}")));
    }
    Ok(det.re.log2())
}

/// Per-target sensing SINRs,
/// SINR_k = N_r sigma_k^2 L / sigma_r^2 * a(theta_k)^H R_X a(theta_k).
pub fn per_target_sinr(
    geometry: &ArrayGeometry,
    targets: &TargetSet,
    signal: &SignalConfig,
    r_x: &CMat,
) -> Result<Vec<f64>> {
    if r_x.nrows() != geometry.n_tx || r_x.ncols() != geometry.n_tx {
        return Err(Error::DimensionMismatch("transmit covariance must be N_t x N_t".into()));
    }
    let gain = geometry.n_rx as f64 * signal.block_length as f64 / signal.radar_noise;
    targets
        .angles_deg
        .iter()
        .zip(targets.variances.iter())
        .map(|(&theta, &var)| {
            let a = geometry.tx_steering(theta)?;
            let q = (a.adjoint() * r_x * &a)[(0, 0)].re.max(0.0);
            Ok(gain * var * q)
        })
        .collect()
}

/// Decoupled-target MI upper bound I_up = sum_k log2(1 + SINR_k) in bits.
pub fn mi_upper_bound(
    geometry: &ArrayGeometry,
    targets: &TargetSet,
    signal: &SignalConfig,
    r_x: &CMat,
) -> Result<f64> {
    Ok(per_target_sinr(geometry, targets, signal, r_x)?
        .iter()
        .map(|&s| (1.0 + s).log2())
        .sum())
}

/// Transmit beampattern P(theta) = a(theta)^H R_X a(theta) at the given angles.
pub fn beampattern(geometry: &ArrayGeometry, r_x: &CMat, angles_deg: &[f64]) -> Result<Vec<f64>> {
    if r_x.nrows() != geometry.n_tx || r_x.ncols() != geometry.n_tx {
        return Err(Error::DimensionMismatch("transmit covariance must be N_t x N_t".into()));
    }
    angles_deg
        .iter()
        .map(|&theta| {
            let a = geometry.tx_steering(theta)?;
            Ok((a.adjoint() * r_x * &a)[(0, 0)].re)
        })
        .collect()
}

/// Largest absolute off-diagonal cross-correlation of the transmit pattern,
/// max_{i != j} |a(theta_i)^H R_X a(theta_j)|. Zero when K = 1.
pub fn max_cross_corr(
    geometry: &ArrayGeometry,
    targets: &TargetSet,
    r_x: &CMat,
) -> Result<f64> {
    let tx: Vec<CVec> = targets
        .angles_deg
        .iter()
        .map(|&t| geometry.tx_steering(t))
        .collect::<Result<_>>()?;
    let mut worst = 0.0f64;
    for i in 0..tx.len() {
        for j in 0..tx.len() {
            if i != j {
                let f = (tx[i].adjoint() * r_x * &tx[j])[(0, 0)].norm();
                worst = worst.max(f);
            }
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::frob_norm;
    use crate::rng::{chacha, complex_gaussian_matrix, complex_gaussian_vector, derive_seed};
    use crate::scenario::ArrayGeometry;

    fn geom(n_tx: usize, n_rx: usize) -> ArrayGeometry {
        ArrayGeometry::half_wavelength(n_tx, n_rx).unwrap()
    }

    fn sig(l: usize, p: f64, m: usize, nr: f64) -> SignalConfig {
        SignalConfig::new(l, p, m, nr).unwrap()
    }

    fn random_psd_set(dim: usize, n_blocks: usize, power: f64, seed: u64) -> CovarianceSet {
        let mut blocks = Vec::new();
        for b in 0..n_blocks {
            let mut rng = chacha(derive_seed(seed, b as u64));
            let g = complex_gaussian_matrix(&mut rng, dim, dim);
            blocks.push(&g * g.adjoint());
        }
        let set = CovarianceSet::new(blocks).unwrap();
        let t = power / set.total_power();
        set.scale(t)
    }

    #[test]
    fn covariance_sum_of_rank_one_blocks() {
        let mut rng = chacha(3);
        let w1 = complex_gaussian_vector(&mut rng, 4);
        let w2 = complex_gaussian_vector(&mut rng, 4);
        let bf = BeamformerSet::new(vec![w1.clone()], vec![w2.clone()]).unwrap();
        let direct = outer(&w1, &w1) + outer(&w2, &w2);
        assert!(frob_norm(&(bf.transmit_covariance() - direct)) < 1e-12);
        assert!((bf.total_power() - (w1.norm_squared() + w2.norm_squared())).abs() < 1e-12);
    }

    #[test]
    fn isotropic_power_split() {
        let set = CovarianceSet::isotropic(4, 3, 6.0);
        assert!((set.total_power() - 6.0).abs() < 1e-12);
        for b in &set.blocks {
            assert!((b[(0, 0)].re - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn matched_filter_single_user_sinr() {
        // w = sqrt(P) h / ||h||, no interference: gamma = P ||h||^2 / sigma^2 = 2.
        let h = CVec::from_vec(vec![Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0)]);
        let w = h.scale(1.0 / h.norm());
        let bf = BeamformerSet::new(vec![w], vec![]).unwrap();
        let users = UserSet::new(vec![h], vec![1.0]).unwrap();
        let g = comm_sinrs(&bf.covariance_set(), &users).unwrap();
        assert!((g[0] - 2.0).abs() < 1e-12);
        assert!((avg_rate(&g) - 3f64.log2()).abs() < 1e-12);
    }

    #[test]
    fn radar_blocks_count_as_interference() {
        let mut rng = chacha(5);
        let h = complex_gaussian_vector(&mut rng, 4);
        let w_r = complex_gaussian_vector(&mut rng, 4);
        let bf_no_radar = BeamformerSet::new(vec![h.clone()], vec![]).unwrap();
        let bf_radar = BeamformerSet::new(vec![h.clone()], vec![w_r]).unwrap();
        let users = UserSet::new(vec![h], vec![0.5]).unwrap();
        let g0 = comm_sinrs(&bf_no_radar.covariance_set(), &users).unwrap()[0];
        let g1 = comm_sinrs(&bf_radar.covariance_set(), &users).unwrap()[0];
        assert!(g1 < g0);
    }

    #[test]
    fn cross_corr_single_target_closed_form() {
        // N_t = N_r = 2, R_X = I, L = 8, sigma_r^2 = 1, any angle:
        // Phi = [ (b^H b) * 8 * (a^H a) ] = [2 * 8 * 2] = [32].
        let g = geom(2, 2);
        let targets = TargetSet::new(vec![30.0], vec![1.0]).unwrap();
        let s = sig(8, 2.0, 0, 1.0);
        let p = cross_corr_pattern(&g, &targets, &s, &CMat::identity(2, 2)).unwrap();
        assert_eq!(p.phi.nrows(), 1);
        assert!((p.phi[(0, 0)].re - 32.0).abs() < 1e-10);
        assert!(p.phi[(0, 0)].im.abs() < 1e-12);
        assert!((p.lambda_diag[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn exact_mi_single_target_closed_form() {
        // det(Phi + Lambda) * sigma^2 = (32 + 1) * 1 = 33.
        let g = geom(2, 2);
        let targets = TargetSet::new(vec![30.0], vec![1.0]).unwrap();
        let s = sig(8, 2.0, 0, 1.0);
        let mi = exact_sensing_mi(&g, &targets, &s, &CMat::identity(2, 2)).unwrap();
        assert!((mi - 33f64.log2()).abs() < 1e-10, "mi = {mi}");
    }

    #[test]
    fn exact_mi_zero_covariance_is_zero() {
        let g = geom(3, 2);
        let targets = TargetSet::new(vec![-20.0, 35.0], vec![0.5, 2.0]).unwrap();
        let s = sig(16, 1.0, 0, 0.7);
        let mi = exact_sensing_mi(&g, &targets, &s, &CMat::zeros(3, 3)).unwrap();
        assert!(mi.abs() < 1e-10);
    }

    #[test]
    fn per_target_sinr_isotropic() {
        // R_X = (P_T/N_t) I => a^H R_X a = P_T; SINR = N_r sigma^2 L P_T / sigma_r^2 = 32.
        let g = geom(2, 2);
        let targets = TargetSet::new(vec![17.0], vec![1.0]).unwrap();
        let s = sig(8, 2.0, 0, 1.0);
        let r_x = CMat::identity(2, 2); // P_T = 2, N_t = 2
        let sinr = per_target_sinr(&g, &targets, &s, &r_x).unwrap();
        assert!((sinr[0] - 32.0).abs() < 1e-10);
    }

    #[test]
    fn upper_bound_two_targets_isotropic() {
        let g = geom(2, 2);
        let targets = TargetSet::new(vec![-40.0, 25.0], vec![1.0, 1.0]).unwrap();
        let s = sig(8, 2.0, 0, 1.0);
        let up = mi_upper_bound(&g, &targets, &s, &CMat::identity(2, 2)).unwrap();
        assert!((up - 2.0 * 33f64.log2()).abs() < 1e-9, "I_up = {up}");
    }

    #[test]
    fn hadamard_bound_randomized_sweep() {
        // exact <= upper + 1e-9 across random PSD covariance sets; equality
        // within 1e-10 when K = 1.
        let s = sig(8, 4.0, 0, 1.0);
        for trial in 0..200 {
            let k = 1 + (trial % 3);
            let angles: Vec<f64> = (0..k).map(|i| -50.0 + 37.0 * i as f64).collect();
            let vars: Vec<f64> = (0..k).map(|i| 0.5 + 0.5 * i as f64).collect();
            let targets = TargetSet::new(angles, vars).unwrap();
            let g = geom(4, 4);
            let cov = random_psd_set(4, 2, 4.0, 1000 + trial as u64);
            let r_x = cov.sum();
            let exact = exact_sensing_mi(&g, &targets, &s, &r_x).unwrap();
            let upper = mi_upper_bound(&g, &targets, &s, &r_x).unwrap();
            assert!(exact <= upper + 1e-9, "trial {trial}: exact {exact} > upper {upper}");
            if k == 1 {
                assert!((exact - upper).abs() < 1e-10, "trial {trial}: K=1 gap {}", exact - upper);
            }
        }
    }

    #[test]
    fn oracle_matches_pattern_reduction() {
        // The K x K reduction and the N_t N_r Kronecker evaluation agree on
        // R_X = X X^H / L to 1e-8 relative.
        let g = geom(4, 2);
        let s = sig(8, 1.0, 0, 1.3);
        for trial in 0..20 {
            let k = 1 + (trial % 2);
            let angles: Vec<f64> = (0..k).map(|i| -35.0 + 55.0 * i as f64).collect();
            let vars: Vec<f64> = (0..k).map(|i| 0.8 + 0.4 * i as f64).collect();
            let targets = TargetSet::new(angles, vars).unwrap();
            let mut rng = chacha(derive_seed(50, trial as u64));
            let x = complex_gaussian_matrix(&mut rng, 4, 8);
            let r_x = (&x * x.adjoint()).scale(1.0 / 8.0);
            let exact = exact_sensing_mi(&g, &targets, &s, &r_x).unwrap();
            let oracle = sensing_mi_oracle(&g, &targets, &s, &x).unwrap();
            let tol = 1e-8 * oracle.abs().max(1.0);
            assert!((exact - oracle).abs() <= tol, "trial {trial}: {exact} vs {oracle}");
        }
    }

    #[test]
    fn oracle_dimension_guard() {
        let g = geom(16, 8);
        let targets = TargetSet::new(vec![10.0], vec![1.0]).unwrap();
        let s = sig(8, 1.0, 0, 1.0);
        let x = CMat::zeros(16, 8);
        assert!(matches!(
            sensing_mi_oracle(&g, &targets, &s, &x),
            Err(Error::SizeGuard(_))
        ));
    }

    #[test]
    fn upper_bound_tight_under_exact_zero_forcing() {
        // Dual-basis construction: R = sum_k p_k v_k v_k^H with
        // a_i^H v_k = delta_ik gives an exactly zero off-diagonal pattern, so
        // the bound closes to machine precision (well inside 1e-4 bits).
        let g = geom(6, 4);
        let targets = TargetSet::new(vec![-30.0, 20.0], vec![1.0, 1.5]).unwrap();
        let s = sig(16, 1.0, 0, 1.0);
        let a: Vec<CVec> = targets
            .angles_deg
            .iter()
            .map(|&t| g.tx_steering(t).unwrap())
            .collect();
        let mut amat = CMat::zeros(6, 2);
        for (j, aj) in a.iter().enumerate() {
            amat.set_column(j, aj);
        }
        let gram = amat.adjoint() * &amat;
        let v = &amat * gram.try_inverse().unwrap();
        let powers = [0.7, 1.9];
        let mut r_x = CMat::zeros(6, 6);
        for j in 0..2 {
            let vj = CVec::from_column_slice(v.column(j).as_slice());
            r_x += outer(&vj, &vj).scale(powers[j]);
        }
        let r_x = hermitize(&r_x);
        assert!(max_cross_corr(&g, &targets, &r_x).unwrap() < 1e-9);
        let exact = exact_sensing_mi(&g, &targets, &s, &r_x).unwrap();
        let upper = mi_upper_bound(&g, &targets, &s, &r_x).unwrap();
        assert!((upper - exact).abs() < 1e-4, "gap {}", upper - exact);
    }

    #[test]
    fn metrics_weakly_decrease_under_downscaling() {
        let g = geom(4, 4);
        let targets = TargetSet::new(vec![-10.0, 42.0], vec![1.0, 1.0]).unwrap();
        let s = sig(8, 4.0, 1, 1.0);
        let cov = random_psd_set(4, 3, 4.0, 77);
        let mut rng = chacha(78);
        let users = UserSet::new(
            vec![complex_gaussian_vector(&mut rng, 4), complex_gaussian_vector(&mut rng, 4)],
            vec![1.0, 1.0],
        )
        .unwrap();
        let base_mi = exact_sensing_mi(&g, &targets, &s, &cov.sum()).unwrap();
        let base_up = mi_upper_bound(&g, &targets, &s, &cov.sum()).unwrap();
        let base_sinr = comm_sinrs(&cov, &users).unwrap();
        for &t in &[0.25, 0.5, 0.75] {
            let scaled = cov.scale(t);
            let mi = exact_sensing_mi(&g, &targets, &s, &scaled.sum()).unwrap();
            let up = mi_upper_bound(&g, &targets, &s, &scaled.sum()).unwrap();
            let sinr = comm_sinrs(&scaled, &users).unwrap();
            assert!(mi <= base_mi + 1e-9);
            assert!(up <= base_up + 1e-9);
            for (a, b) in sinr.iter().zip(base_sinr.iter()) {
                assert!(a <= &(b + 1e-9));
            }
        }
    }

    #[test]
    fn beampattern_isotropic_is_flat() {
        let g = geom(8, 8);
        let r_x = CMat::identity(8, 8).scale(0.5); // P_T = 4
        let grid = [-60.0, -15.0, 0.0, 33.3, 80.0];
        let p = beampattern(&g, &r_x, &grid).unwrap();
        for v in p {
            assert!((v - 4.0).abs() < 1e-10);
        }
    }

    #[test]
    fn radar_budget_keeps_strongest() {
        let w_big = CVec::from_vec(vec![Complex64::new(2.0, 0.0); 3]);
        let w_small = CVec::from_vec(vec![Complex64::new(0.1, 0.0); 3]);
        let bf = BeamformerSet::new(
            vec![CVec::from_vec(vec![Complex64::new(1.0, 0.0); 3])],
            vec![w_small.clone(), w_big.clone()],
        )
        .unwrap();
        let capped = bf.with_radar_budget(1);
        assert_eq!(capped.radar.len(), 1);
        assert_eq!(capped.radar[0], w_big);
        let zero = bf.with_radar_budget(0);
        assert!(zero.radar.is_empty());
    }

    #[test]
    fn dimension_mismatch_errors() {
        let g = geom(4, 4);
        let targets = TargetSet::new(vec![10.0], vec![1.0]).unwrap();
        let s = sig(8, 1.0, 0, 1.0);
        let wrong = CMat::identity(3, 3);
        assert!(exact_sensing_mi(&g, &targets, &s, &wrong).is_err());
        assert!(per_target_sinr(&g, &targets, &s, &wrong).is_err());
        assert!(beampattern(&g, &wrong, &[0.0]).is_err());

        let mut rng = chacha(1);
        let users = UserSet::new(vec![complex_gaussian_vector(&mut rng, 4)], vec![1.0]).unwrap();
        let cov = CovarianceSet::new(vec![CMat::identity(3, 3)]).unwrap();
        assert!(comm_sinrs(&cov, &users).is_err());
    }
}
