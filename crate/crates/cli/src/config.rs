//! Run configuration: JSON schema, `--set` overrides, and construction of
//! the library-level problem objects.
//!
//! The configuration accepts decibel quantities where they are conventional
//! (transmit power in dBm, SINR floors in dB, SNR grids in dB) and converts
//! them to linear units exactly once, when the problem objects are built.
//! `resolve` fills every optional field with its effective default so that
//! the configuration echoed into result records is complete and can be fed
//! back through `--config` to reproduce a run bit for bit.

use std::path::Path;

use isacbeam::rng::derive_seed;
use isacbeam::scenario::{db_to_linear, dbm_to_watts, sample_rician_channels};
use isacbeam::{
    ArrayGeometry, RicianParams, Scenario, SchemeMode, SignalConfig, SolverParams, TargetSet,
    Thresholds, UserSet, Weights,
};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::CliError;

/// Seed sub-stream for the Rician channel draw.
const CHANNEL_STREAM: u64 = 0x0C11;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: ScenarioConfig,
    pub weights: WeightsConfig,
    pub thresholds: ThresholdsConfig,
    /// Scheme solved by `solve` and the sweep commands.
    pub mode: String,
    pub solver: SolverConfig,
    pub experiment: ExperimentConfig,
    pub output_dir: String,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scenario: ScenarioConfig::default(),
            weights: WeightsConfig::default(),
            thresholds: ThresholdsConfig::default(),
            mode: "general".into(),
            solver: SolverConfig::default(),
            experiment: ExperimentConfig::default(),
            output_dir: "out".into(),
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub n_tx: usize,
    pub n_rx: usize,
    pub target_angles_deg: Vec<f64>,
    /// Reflection variances sigma_k^2 (linear).
    pub target_variances: Vec<f64>,
    pub users: UserChannelConfig,
    /// Downlink noise power, one value for every user.
    pub user_noise_dbm: f64,
    pub block_length: usize,
    pub total_power_dbm: f64,
    /// Dedicated probing streams M; null selects M = K.
    pub n_radar_streams: Option<usize>,
    /// Echo SNR: receiver noise is mean reflection variance times total
    /// power divided by this ratio.
    pub radar_snr_db: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            n_tx: 32,
            n_rx: 32,
            target_angles_deg: vec![0.0, 5.0, 40.0],
            target_variances: vec![1.0, 1.0, 1.0],
            users: UserChannelConfig::default(),
            user_noise_dbm: 0.0,
            block_length: 1024,
            total_power_dbm: 40.0,
            n_radar_streams: None,
            radar_snr_db: 10.0,
        }
    }
}

/// Downlink channel model: a seeded Rician draw or deterministic
/// line-of-sight steering toward given angles.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum UserChannelConfig {
    Rician(RicianUsers),
    Los(LosUsers),
}

impl Default for UserChannelConfig {
    fn default() -> Self {
        UserChannelConfig::Rician(RicianUsers { count: 2, factor: 1.0 })
    }
}

impl UserChannelConfig {
    pub fn count(&self) -> usize {
        match self {
            UserChannelConfig::Rician(r) => r.count,
            UserChannelConfig::Los(l) => l.angles_deg.len(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RicianUsers {
    pub count: usize,
    /// Line-of-sight to scattered power ratio mu (0 = Rayleigh).
    pub factor: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LosUsers {
    pub angles_deg: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeightsConfig {
    pub alpha: f64,
    /// Per-user weights; null selects (1 - alpha)/C each.
    pub user: Option<Vec<f64>>,
    /// Per-target information shares; null selects 1/K each.
    pub target: Option<Vec<f64>>,
}

impl Default for WeightsConfig {
    fn default() -> Self {
        Self { alpha: 0.5, user: None, target: None }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThresholdsConfig {
    /// Total sensing-information floor Lambda in bits.
    pub mi_floor_bits: f64,
    /// SINR floor Gamma in dB, applied to every user.
    pub sinr_floor_db: f64,
}

impl Default for ThresholdsConfig {
    fn default() -> Self {
        Self { mi_floor_bits: 10.0, sinr_floor_db: 5.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Bisection tolerance on the slack variable.
    pub epsilon: f64,
    /// Feasibility residual tolerance (absolute, watts); null selects
    /// 1e-6 times the power budget.
    pub tau_feas: Option<f64>,
    /// Cross-correlation box level; null selects 1e-6 times the budget.
    pub kappa: Option<f64>,
    pub max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { epsilon: 0.01, tau_feas: None, kappa: None, max_iter: 20_000 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Sensing-weight grid for `pareto-sweep`.
    pub alpha_grid: Vec<f64>,
    /// SNR grid (dB) for `mi-vs-snr`, `rate-vs-snr`, and `rmse`.
    pub snr_grid_db: Vec<f64>,
    /// Monte Carlo trials per `rmse` grid point.
    pub trials: usize,
    /// Angle grid step (degrees) for `beampattern` and `capon`.
    pub angle_step_deg: f64,
    /// Schemes compared by the per-scheme commands.
    pub schemes: Vec<String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            alpha_grid: (1..=9).map(|i| i as f64 / 10.0).collect(),
            snr_grid_db: vec![-10.0, -5.0, 0.0, 5.0, 10.0],
            trials: 100,
            angle_step_deg: 0.1,
            schemes: vec!["general".into()],
        }
    }
}

/// Problem objects built from a resolved configuration, in linear units.
pub struct Built {
    pub scenario: Scenario,
    pub weights: Weights,
    pub thresholds: Thresholds,
    pub params: SolverParams,
    pub mode: SchemeMode,
}

impl RunConfig {
    /// Load from an optional file, apply `--set` overrides, and validate
    /// the schema. Unknown keys anywhere are configuration errors.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, CliError> {
        let mut value = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| {
                    CliError::config(format!("cannot read config {}: {e}", p.display()))
                })?;
                serde_json::from_str::<Value>(&text)
                    .map_err(|e| CliError::config(format!("config is not valid JSON: {e}")))?
            }
            None => serde_json::to_value(RunConfig::default())
                .expect("default configuration serializes"),
        };
        for spec in overrides {
            apply_override(&mut value, spec)?;
        }
        serde_json::from_value(value)
            .map_err(|e| CliError::config(format!("invalid configuration: {e}")))
    }

    /// Fill every optional field with its effective value so the echoed
    /// configuration is self-contained.
    pub fn resolve(mut self) -> Result<Self, CliError> {
        let c = self.scenario.users.count();
        let k = self.scenario.target_angles_deg.len();
        if c == 0 || k == 0 {
            return Err(CliError::config("at least one user and one target required".into()));
        }
        self.scenario.n_radar_streams.get_or_insert(k);
        let alpha = self.weights.alpha;
        self.weights.user.get_or_insert_with(|| vec![(1.0 - alpha) / c as f64; c]);
        self.weights.target.get_or_insert_with(|| vec![1.0 / k as f64; k]);
        let p_t = dbm_to_watts(self.scenario.total_power_dbm);
        self.solver.tau_feas.get_or_insert(1e-6 * p_t);
        self.solver.kappa.get_or_insert(1e-6 * p_t);
        Ok(self)
    }

    /// Convert the resolved configuration into library objects; every
    /// validation failure here is a configuration error.
    pub fn build(&self) -> Result<Built, CliError> {
        let sc = &self.scenario;
        let cfg_err = |e: isacbeam::Error| CliError::config(e.to_string());

        let geometry = ArrayGeometry::half_wavelength(sc.n_tx, sc.n_rx).map_err(cfg_err)?;
        let targets =
            TargetSet::new(sc.target_angles_deg.clone(), sc.target_variances.clone())
                .map_err(cfg_err)?;
        let channels = match &sc.users {
            UserChannelConfig::Rician(r) => {
                let params = RicianParams::new(r.factor).map_err(cfg_err)?;
                sample_rician_channels(
                    &geometry,
                    r.count,
                    &params,
                    derive_seed(self.seed, CHANNEL_STREAM),
                )
                .map_err(cfg_err)?
            }
            UserChannelConfig::Los(l) => l
                .angles_deg
                .iter()
                .map(|&a| geometry.tx_steering(a))
                .collect::<Result<Vec<_>, _>>()
                .map_err(cfg_err)?,
        };
        let c = channels.len();
        let noise = dbm_to_watts(sc.user_noise_dbm);
        let users = UserSet::new(channels, vec![noise; c]).map_err(cfg_err)?;

        let p_t = dbm_to_watts(sc.total_power_dbm);
        let mean_var =
            sc.target_variances.iter().sum::<f64>() / sc.target_variances.len().max(1) as f64;
        let radar_noise = mean_var * p_t / db_to_linear(sc.radar_snr_db);
        let m = self.scenario.n_radar_streams.expect("resolved");
        let signal =
            SignalConfig::new(sc.block_length, p_t, m, radar_noise).map_err(cfg_err)?;
        let scenario = Scenario::new(geometry, targets, users, signal).map_err(cfg_err)?;

        let weights = Weights::new(
            self.weights.alpha,
            self.weights.user.clone().expect("resolved"),
            self.weights.target.clone().expect("resolved"),
        )
        .map_err(cfg_err)?;
        let gamma = db_to_linear(self.thresholds.sinr_floor_db);
        let thresholds =
            Thresholds::new(self.thresholds.mi_floor_bits, vec![gamma; c]).map_err(cfg_err)?;

        let mut params = SolverParams::for_power(p_t);
        params.epsilon = self.solver.epsilon;
        params.tau_feas = self.solver.tau_feas.expect("resolved");
        params.kappa = self.solver.kappa.expect("resolved");
        params.max_iter = self.solver.max_iter;

        let mode = SchemeMode::parse(&self.mode).map_err(cfg_err)?;
        Ok(Built { scenario, weights, thresholds, params, mode })
    }

    /// Parse the experiment's scheme list up front so typos fail fast.
    pub fn scheme_list(&self) -> Result<Vec<SchemeMode>, CliError> {
        if self.experiment.schemes.is_empty() {
            return Err(CliError::config("experiment.schemes must not be empty".into()));
        }
        self.experiment
            .schemes
            .iter()
            .map(|s| SchemeMode::parse(s).map_err(|e| CliError::config(e.to_string())))
            .collect()
    }
}

/// Apply one `--set key.path=value` override onto the raw JSON tree. The
/// value is parsed as JSON when possible and taken as a string otherwise,
/// so `--set mode=comm-only` and `--set solver.epsilon=0.05` both work.
/// Inserting a key the schema does not know is caught by validation.
fn apply_override(root: &mut Value, spec: &str) -> Result<(), CliError> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| CliError::config(format!("override '{spec}' is not KEY=VALUE")))?;
    if path.is_empty() {
        return Err(CliError::config(format!("override '{spec}' has an empty key")));
    }
    let new_value =
        serde_json::from_str::<Value>(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut parts = path.split('.').peekable();
    let mut cursor = root;
    while let Some(part) = parts.next() {
        let object = cursor.as_object_mut().ok_or_else(|| {
            CliError::config(format!("override '{path}' descends into a non-object"))
        })?;
        if parts.peek().is_none() {
            object.insert(part.to_string(), new_value);
            return Ok(());
        }
        cursor = object
            .entry(part.to_string())
            .or_insert_with(|| Value::Object(serde_json::Map::new()));
    }
    unreachable!("split always yields at least one part")
}
