//! Exhaustive rank-one reference for the two-antenna instance.
//!
//! For one user, one target, one probing stream, and two transmit antennas,
//! a transmit design is a pair of rank-one beamformers
//! w = sqrt(p) * (cos(phi), sin(phi) * e^{j psi}); the global phase of each
//! vector is irrelevant to every metric, so this parameterization covers all
//! designs. Enumerating 50 grid points per parameter per beamformer and
//! checking the constraint inequalities directly on each pair gives a
//! solver-independent reference for both the feasibility verdict at a given
//! slack level and the optimal slack itself.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::CVec;
use crate::pareto::{Thresholds, Weights};
use crate::scenario::Scenario;
use num_complex::Complex64;

/// Grid resolution per beamformer parameter.
const GRID_POINTS: usize = 50;

/// Useful power pair of one unit-power beamformer direction:
/// (|a^H w|^2, |h^H w|^2) toward the target and the user respectively.
#[derive(Debug, Clone, Copy)]
struct Direction {
    toward_target: f64,
    toward_user: f64,
}

/// The (phi, psi) direction grid: phi in [0, pi/2] inclusive, psi in
/// [0, 2 pi) exclusive, 50 points each. Powers enter by plain scaling.
fn direction_set(a: &CVec, h: &CVec) -> Vec<Direction> {
    let mut set = Vec::with_capacity(GRID_POINTS * GRID_POINTS);
    for i in 0..GRID_POINTS {
        let phi = i as f64 * std::f64::consts::FRAC_PI_2 / (GRID_POINTS - 1) as f64;
        let (s, c) = phi.sin_cos();
        for j in 0..GRID_POINTS {
            let psi = j as f64 * std::f64::consts::TAU / GRID_POINTS as f64;
            let w1 = Complex64::from_polar(s, psi);
            let toward_target = (a[0].conj() * c + a[1].conj() * w1).norm_sqr();
            let toward_user = (h[0].conj() * c + h[1].conj() * w1).norm_sqr();
            set.push(Direction { toward_target, toward_user });
        }
    }
    set
}

/// Validated pieces of the two-antenna instance in scalar form.
struct Instance {
    directions: Vec<Direction>,
    total_power: f64,
    /// Receive-chain gain N_r sigma_k^2 L / sigma_r^2 multiplying the
    /// target-direction transmit power inside the information bound.
    target_gain: f64,
    user_noise: f64,
    alpha: f64,
    omega: f64,
    xi: f64,
    mi_floor: f64,
    sinr_floor: f64,
}

fn build_instance(scn: &Scenario, weights: &Weights, thresholds: &Thresholds) -> Result<Instance> {
    if scn.geometry.n_tx != 2 || scn.n_users() != 1 || scn.n_targets() != 1 || scn.n_streams() != 2
    {
        return Err(Error::SizeGuard(
            "the exhaustive reference covers exactly N_t=2, one user, one target, one probing stream"
                .into(),
        ));
    }
    weights.require_strictly_positive()?;
    if weights.user.len() != 1 || weights.target.len() != 1 || thresholds.sinr_floors.len() != 1 {
        return Err(Error::DimensionMismatch(
            "weights and thresholds must be sized for one user and one target".into(),
        ));
    }
    let a = scn.geometry.tx_steering(scn.targets.angles_deg[0])?;
    let h = &scn.users.channels[0];
    Ok(Instance {
        directions: direction_set(&a, h),
        total_power: scn.signal.total_power,
        target_gain: scn.geometry.n_rx as f64
            * scn.targets.variances[0]
            * scn.signal.block_length as f64
            / scn.signal.radar_noise,
        user_noise: scn.users.noise_powers[0],
        alpha: weights.alpha,
        omega: weights.user[0],
        xi: weights.target[0],
        mi_floor: thresholds.mi_floor_bits,
        sinr_floor: thresholds.sinr_floors[0],
    })
}

impl Instance {
    /// Largest slack the pair (communication direction c at power p_c,
    /// probing direction d at power p_r) supports: the information chain
    /// gives xi * (floor + alpha * r) <= log2(1 + gain * T) and the user
    /// chain gives gamma >= sinr_floor + omega * r; both invert in closed
    /// form because they are monotone in r.
    fn pair_slack(&self, c: &Direction, p_c: f64, d: &Direction, p_r: f64) -> f64 {
        let toward_target = c.toward_target * p_c + d.toward_target * p_r;
        let info_bits = (1.0 + self.target_gain * toward_target).log2();
        let r_target = (info_bits / self.xi - self.mi_floor) / self.alpha;

        let gamma = c.toward_user * p_c / (d.toward_user * p_r + self.user_noise);
        let r_user = (gamma - self.sinr_floor) / self.omega;

        r_target.min(r_user)
    }

    /// Direct check of every constraint of the fixed-slack subproblem on
    /// one explicit pair.
    fn pair_feasible(&self, c: &Direction, p_c: f64, d: &Direction, p_r: f64, r: f64) -> bool {
        if p_c + p_r > self.total_power {
            return false;
        }
        let toward_target = c.toward_target * p_c + d.toward_target * p_r;
        let info_need = (self.xi * (self.mi_floor + self.alpha * r)).exp2() - 1.0;
        if self.target_gain * toward_target < info_need {
            return false;
        }
        let sinr_need = self.sinr_floor + self.omega * r;
        c.toward_user * p_c >= sinr_need * (d.toward_user * p_r + self.user_noise)
    }
}

/// Power split grid: p_r ranges over 50 points of [0, P_T] and the
/// communication beam takes the remainder, so the power constraint holds
/// with equality. Giving the communication beam less than the remainder
/// weakly worsens every inequality (it only appears with positive sign in
/// the target chain and in the SINR numerator), so the full-power diagonal
/// decides both feasibility and the optimum over the whole power square.
fn power_splits(total_power: f64) -> Vec<(f64, f64)> {
    (0..GRID_POINTS)
        .map(|j| {
            let p_r = j as f64 * total_power / (GRID_POINTS - 1) as f64;
            (total_power - p_r, p_r)
        })
        .collect()
}

/// Best achievable slack over the whole beamformer-pair grid. Negative
/// output means even zero slack is out of reach for every grid pair.
pub fn grid_optimum(scn: &Scenario, weights: &Weights, thresholds: &Thresholds) -> Result<f64> {
    let inst = build_instance(scn, weights, thresholds)?;
    let splits = power_splits(inst.total_power);
    let best = inst
        .directions
        .par_iter()
        .map(|c| {
            let mut local = f64::NEG_INFINITY;
            for d in &inst.directions {
                for &(p_c, p_r) in &splits {
                    let slack = inst.pair_slack(c, p_c, d, p_r);
                    if slack > local {
                        local = slack;
                    }
                }
            }
            local
        })
        .reduce(|| f64::NEG_INFINITY, f64::max);
    Ok(best)
}

/// Whether any grid pair satisfies all constraints of the fixed-slack
/// subproblem, each checked directly on the explicit rank-one pair.
pub fn grid_feasible(
    scn: &Scenario,
    weights: &Weights,
    thresholds: &Thresholds,
    r: f64,
) -> Result<bool> {
    let inst = build_instance(scn, weights, thresholds)?;
    let splits = power_splits(inst.total_power);
    Ok(inst.directions.par_iter().any(|c| {
        inst.directions.iter().any(|d| {
            splits
                .iter()
                .any(|&(p_c, p_r)| inst.pair_feasible(c, p_c, d, p_r, r))
        })
    }))
}
