//! Semidefinite feasibility by cyclic Dykstra alternating projections.
//!
//! Variables are tuples (R_1, ..., R_B) of Hermitian N x N blocks with the
//! trace inner product <A, B> = Re tr(A^H B). A constraint system is a list
//! of affine functionals f_j(R) = sum_b Re tr(C_{j,b}^H R_b) compared against
//! a bound, plus the implicit product PSD cone.
//!
//! Dykstra's scheme cycles through the constraint sets and the PSD cone,
//! carrying a correction term per set. For a halfspace/hyperplane/box the
//! correction is always a scalar multiple of the coefficient tuple, so only
//! the scalar is stored; the PSD cone keeps a full matrix correction per
//! block. A point is declared feasible as soon as the post-projection iterate
//! (exactly PSD by construction) violates no functional by more than
//! `tau_feas`; emptiness is declared when the best residual plateaus, and a
//! budget exhaustion without plateau is reported as a stall rather than a
//! verdict.

use crate::error::{Error, Result};
use crate::linalg::{herm_eigen, hermitize, inner_re, CMat};
use crate::metrics::CovarianceSet;
use num_complex::Complex64;

/// Comparison attached to a constraint functional.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintKind {
    /// f(R) = bound.
    Equal,
    /// f(R) <= bound.
    AtMost,
    /// f(R) >= bound.
    AtLeast,
    /// |f(R)| <= bound (two-sided box; bound >= 0).
    Box,
}

/// One affine constraint over the block tuple.
#[derive(Debug, Clone)]
pub struct Constraint {
    /// Diagnostic name, e.g. "power" or "target 2".
    pub label: String,
    /// One Hermitian coefficient matrix per block.
    pub coeffs: Vec<CMat>,
    pub bound: f64,
    pub kind: ConstraintKind,
}

impl Constraint {
    /// Signed functional value at a block tuple.
    pub fn value(&self, blocks: &[CMat]) -> f64 {
        self.coeffs
            .iter()
            .zip(blocks.iter())
            .map(|(c, r)| inner_re(c, r))
            .sum()
    }

    /// Violation magnitude (zero when satisfied).
    pub fn violation(&self, blocks: &[CMat]) -> f64 {
        let f = self.value(blocks);
        match self.kind {
            ConstraintKind::Equal => (f - self.bound).abs(),
            ConstraintKind::AtMost => (f - self.bound).max(0.0),
            ConstraintKind::AtLeast => (self.bound - f).max(0.0),
            ConstraintKind::Box => (f.abs() - self.bound).max(0.0),
        }
    }
}

/// Affine constraints over B blocks of dimension N, plus the implicit
/// product-PSD cone.
#[derive(Debug, Clone)]
pub struct ConstraintSystem {
    pub dim: usize,
    pub n_blocks: usize,
    pub constraints: Vec<Constraint>,
}

impl ConstraintSystem {
    pub fn new(dim: usize, n_blocks: usize) -> Self {
        Self { dim, n_blocks, constraints: Vec::new() }
    }

    /// Add a constraint; coefficients are symmetrized and shape-checked.
    pub fn push(
        &mut self,
        label: impl Into<String>,
        coeffs: Vec<CMat>,
        bound: f64,
        kind: ConstraintKind,
    ) -> Result<()> {
        if coeffs.len() != self.n_blocks {
            return Err(Error::DimensionMismatch(format!(
                "constraint has {} coefficient blocks, system has {}",
                coeffs.len(),
                self.n_blocks
            )));
        }
        for c in &coeffs {
            if c.nrows() != self.dim || c.ncols() != self.dim {
                return Err(Error::DimensionMismatch("coefficient block has wrong dimension".into()));
            }
        }
        if !bound.is_finite() {
            return Err(Error::Numeric(format!("non-finite constraint bound {bound}")));
        }
        if kind == ConstraintKind::Box && bound < 0.0 {
            return Err(Error::Numeric("box bound must be non-negative".into()));
        }
        self.constraints.push(Constraint {
            label: label.into(),
            coeffs: coeffs.iter().map(hermitize).collect(),
            bound,
            kind,
        });
        Ok(())
    }
}

/// Solver knobs. `tau_feas` is an absolute residual tolerance; callers scale
/// it with the power budget.
#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    pub tau_feas: f64,
    pub max_iter: usize,
    /// Iterations over which a relative best-residual improvement below
    /// `plateau_rel` declares the intersection empty.
    pub plateau_window: usize,
    pub plateau_rel: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { tau_feas: 1e-6, max_iter: 20_000, plateau_window: 500, plateau_rel: 1e-9 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeasibilityStatus {
    /// All functional violations at the returned (exactly PSD) point are
    /// within tau_feas.
    Feasible,
    /// The best residual plateaued above tau_feas: empty intersection.
    Infeasible,
    /// Iteration budget exhausted while the residual was still improving.
    Stalled,
}

/// Outcome of a feasibility solve.
#[derive(Debug, Clone)]
pub struct FeasibilityReport {
    pub status: FeasibilityStatus,
    /// Feasible: the accepted iterate. Otherwise: the best iterate seen.
    pub point: CovarianceSet,
    pub iterations: usize,
    /// Worst constraint violation at the returned point (its blocks are PSD
    /// by construction, so the eigenvalue floor contributes nothing).
    pub max_violation: f64,
    /// Best-so-far residual per iteration; non-increasing by construction.
    pub residual_history: Vec<f64>,
}

/// Violations of a system at an arbitrary point.
#[derive(Debug, Clone)]
pub struct ViolationReport {
    /// Violation magnitude per constraint, in system order.
    pub per_constraint: Vec<f64>,
    /// Most negative eigenvalue across blocks (>= 0 means all PSD).
    pub min_eigenvalue: f64,
    /// max(worst functional violation, eigenvalue deficit).
    pub max_violation: f64,
}

/// Euclidean projection onto the PSD cone: eigendecompose, clip negative
/// eigenvalues, reconstruct, symmetrize.
pub fn project_psd(a: &CMat) -> Result<CMat> {
    let (v, lam) = herm_eigen(a)?;
    let clipped = lam.map(|x| Complex64::new(x.max(0.0), 0.0));
    let rec = &v * CMat::from_diagonal(&clipped) * v.adjoint();
    Ok(hermitize(&rec))
}

/// Evaluate all constraint violations and the PSD floor at a point.
pub fn check_violations(sys: &ConstraintSystem, point: &CovarianceSet) -> Result<ViolationReport> {
    if point.n_blocks() != sys.n_blocks || point.dim() != sys.dim {
        return Err(Error::DimensionMismatch("point shape does not match system".into()));
    }
    let per: Vec<f64> = sys.constraints.iter().map(|c| c.violation(&point.blocks)).collect();
    let mut min_eig = f64::INFINITY;
    for b in &point.blocks {
        let (_, lam) = herm_eigen(b)?;
        min_eig = min_eig.min(lam.iter().cloned().fold(f64::INFINITY, f64::min));
    }
    let worst_fun = per.iter().cloned().fold(0.0f64, f64::max);
    Ok(ViolationReport {
        per_constraint: per,
        min_eigenvalue: min_eig,
        max_violation: worst_fun.max((-min_eig).max(0.0)),
    })
}

/// Run cyclic Dykstra projections from `init` until the system is satisfied
/// to tolerance, declared empty, or the budget runs out. Fully deterministic.
pub fn solve_feasibility(
    sys: &ConstraintSystem,
    init: &CovarianceSet,
    opts: &SolveOptions,
) -> Result<FeasibilityReport> {
    if init.n_blocks() != sys.n_blocks || init.dim() != sys.dim {
        return Err(Error::DimensionMismatch("initial point shape does not match system".into()));
    }
    let nb = sys.n_blocks;
    let nc = sys.constraints.len();

    let norms2: Vec<f64> = sys
        .constraints
        .iter()
        .map(|c| c.coeffs.iter().map(|m| inner_re(m, m)).sum::<f64>())
        .collect();
    for (j, &n2) in norms2.iter().enumerate() {
        if n2 < 1e-300 {
            return Err(Error::Numeric(format!(
                "constraint '{}' has zero coefficient norm",
                sys.constraints[j].label
            )));
        }
    }

    let mut x: Vec<CMat> = init.blocks.clone();
    let mut mu = vec![0.0f64; nc];
    let mut psd_corr: Vec<CMat> = vec![CMat::zeros(sys.dim, sys.dim); nb];

    let mut best_v = f64::INFINITY;
    let mut best_point = x.clone();
    let mut history = Vec::with_capacity(opts.max_iter.min(4096));

    for iter in 1..=opts.max_iter {
        // Functional sets, each with its scalar Dykstra correction.
        for (j, con) in sys.constraints.iter().enumerate() {
            let fx = con.value(&x);
            let fy = fx + mu[j] * norms2[j];
            let d = con.bound;
            let target = match con.kind {
                ConstraintKind::AtMost => (fy - d).max(0.0) / norms2[j],
                ConstraintKind::AtLeast => (fy - d).min(0.0) / norms2[j],
                ConstraintKind::Equal => (fy - d) / norms2[j],
                ConstraintKind::Box => {
                    if fy > d {
                        (fy - d) / norms2[j]
                    } else if fy < -d {
                        (fy + d) / norms2[j]
                    } else {
                        0.0
                    }
                }
            };
            let delta = mu[j] - target;
            if delta != 0.0 {
                for b in 0..nb {
                    x[b] += con.coeffs[b].scale(delta);
                }
            }
            mu[j] = target;
        }

        // Product PSD cone with a full matrix correction per block.
        for b in 0..nb {
            let y = &x[b] + &psd_corr[b];
            let proj = project_psd(&y)?;
            psd_corr[b] = &y - &proj;
            x[b] = proj;
        }

        let v = sys
            .constraints
            .iter()
            .map(|c| c.violation(&x))
            .fold(0.0f64, f64::max);

        if v < best_v {
            best_v = v;
            best_point.clone_from(&x);
        }
        history.push(best_v);

        if v <= opts.tau_feas {
            return Ok(FeasibilityReport {
                status: FeasibilityStatus::Feasible,
                point: CovarianceSet { blocks: x },
                iterations: iter,
                max_violation: v,
                residual_history: history,
            });
        }

        if iter > opts.plateau_window {
            let prev = history[iter - 1 - opts.plateau_window];
            if prev - best_v <= opts.plateau_rel * prev {
                return Ok(FeasibilityReport {
                    status: FeasibilityStatus::Infeasible,
                    point: CovarianceSet { blocks: best_point },
                    iterations: iter,
                    max_violation: best_v,
                    residual_history: history,
                });
            }
        }
    }

    Ok(FeasibilityReport {
        status: FeasibilityStatus::Stalled,
        point: CovarianceSet { blocks: best_point },
        iterations: opts.max_iter,
        max_violation: best_v,
        residual_history: history,
    })
}
