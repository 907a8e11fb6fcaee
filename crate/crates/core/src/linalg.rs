//! Complex Hermitian helpers shared by the metric and solver modules.
//!
//! Everything is dense `nalgebra` over `Complex<f64>`; problem sizes are desk
//! scale (tens of antennas), so no sparsity or blocking is attempted.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

/// Relative residual above which an eigendecomposition is rejected.
pub const EIG_RESIDUAL_REL: f64 = 1e-8;

/// (A + A^H)/2. Applied after every reconstruction so round-off never
/// accumulates into a non-Hermitian iterate.
pub fn hermitize(a: &CMat) -> CMat {
    (a + a.adjoint()).scale(0.5)
}

/// Frobenius norm.
pub fn frob_norm(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Re tr(A), the real part of the trace.
pub fn trace_re(a: &CMat) -> f64 {
    (0..a.nrows().min(a.ncols())).map(|i| a[(i, i)].re).sum()
}

/// Trace inner product Re tr(A^H B) over the real Hilbert space of
/// Hermitian matrices.
pub fn inner_re(a: &CMat, b: &CMat) -> f64 {
    debug_assert_eq!(a.shape(), b.shape());
    a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum()
}

/// u v^H outer product.
pub fn outer(u: &CVec, v: &CVec) -> CMat {
    u * v.adjoint()
}

/// Hermitian H with Re tr(H^H R) = Re(u^H R v) for every Hermitian R.
pub fn herm_re_part(u: &CVec, v: &CVec) -> CMat {
    (outer(u, v) + outer(v, u)).scale(0.5)
}

/// Hermitian H with Re tr(H^H R) = Im(u^H R v) for every Hermitian R.
pub fn herm_im_part(u: &CVec, v: &CVec) -> CMat {
    (outer(u, v) - outer(v, u)) * Complex64::new(0.0, 0.5)
}

/// Hermitian eigendecomposition (V, lambda) with A = V diag(lambda) V^H and
/// eigenvalues in descending order.
///
/// Backed by `faer`'s self-adjoint solver; `nalgebra`'s own eigensolver (both
/// the complex path and the real symmetric embedding) loses up to six digits
/// of eigenvector accuracy inside large degenerate clusters, which this
/// project hits constantly (scaled-identity-plus-low-rank iterates).
///
/// The reconstruction residual is checked against `EIG_RESIDUAL_REL`; a
/// failure here means the input was far from Hermitian or the decomposition
/// lost accuracy, and downstream projections would silently corrupt.
pub fn herm_eigen(a: &CMat) -> Result<(CMat, DVector<f64>)> {
    let sym = hermitize(a);
    let n = sym.nrows();
    if sym.ncols() != n {
        return Err(Error::DimensionMismatch("eigendecomposition needs a square matrix".into()));
    }
    if n == 0 {
        return Ok((CMat::zeros(0, 0), DVector::zeros(0)));
    }

    let fa = faer::Mat::<faer::c64>::from_fn(n, n, |i, j| sym[(i, j)]);
    let evd = fa
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|e| Error::Numeric(format!("eigendecomposition failed to converge: {e:?}")))?;

    // faer sorts ascending; flip to the descending order used throughout.
    let u = evd.U();
    let s = evd.S();
    let values = DVector::from_fn(n, |i, _| s[n - 1 - i].re);
    let vectors = CMat::from_fn(n, n, |i, j| u[(i, n - 1 - j)]);

    let recomposed = &vectors
        * CMat::from_diagonal(&values.map(|x| Complex64::new(x, 0.0)))
        * vectors.adjoint();
    let scale = frob_norm(&sym).max(1.0);
    let residual = frob_norm(&(&sym - &recomposed));
    if residual > EIG_RESIDUAL_REL * scale {
        return Err(Error::Numeric(format!(
            "eigendecomposition residual {residual:.3e} exceeds {:.3e}",
            EIG_RESIDUAL_REL * scale
        )));
    }
    Ok((vectors, values))
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn min_eigenvalue(a: &CMat) -> Result<f64> {
    let (_, vals) = herm_eigen(a)?;
    Ok(vals.iter().cloned().fold(f64::INFINITY, f64::min))
}

/// log2 det(A) for Hermitian positive definite A, via Cholesky.
pub fn logdet2_hpd(a: &CMat) -> Result<f64> {
    let chol = hermitize(a)
        .cholesky()
        .ok_or_else(|| Error::Numeric("Cholesky failed: matrix not positive definite".into()))?;
    let l = chol.l();
    let mut acc = 0.0;
    for i in 0..l.nrows() {
        // The complex factorization happily takes sqrt of a negative pivot,
        // producing an (almost) purely imaginary diagonal entry; reject
        // anything that is not essentially positive real.
        let d = l[(i, i)];
        if !(d.re > 0.0 && d.im.abs() <= 1e-9 * d.re) {
            return Err(Error::Numeric("non-positive Cholesky pivot".into()));
        }
        acc += d.re.ln();
    }
    Ok(2.0 * acc / std::f64::consts::LN_2)
}

/// Determinant through LU; used by the reference mutual-information path,
/// which deliberately avoids the Hermitian factorizations of the production
/// path.
pub fn det_lu(a: &CMat) -> Complex64 {
    a.clone().lu().determinant()
}

/// Pivoted Cholesky factors of a Hermitian PSD matrix.
///
/// Returns columns w_k (in the original index order) with sum_k w_k w_k^H
/// approximating A; stops when the largest remaining diagonal entry drops to
/// `stop_tol`. The caller applies any power-based truncation on top.
pub fn pivoted_cholesky(a: &CMat, stop_tol: f64) -> Result<Vec<CVec>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch("pivoted Cholesky needs a square matrix".into()));
    }
    let mut s = hermitize(a);
    let mut perm: Vec<usize> = (0..n).collect();
    let mut factors = Vec::new();

    for k in 0..n {
        let (j, dmax) = (k..n)
            .map(|i| (i, s[(i, i)].re))
            .fold((k, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best });
        if dmax <= stop_tol {
            break;
        }
        if j != k {
            s.swap_rows(k, j);
            s.swap_columns(k, j);
            perm.swap(k, j);
        }
        let piv = dmax.sqrt();
        let mut col = vec![Complex64::new(0.0, 0.0); n];
        col[k] = Complex64::new(piv, 0.0);
        for i in (k + 1)..n {
            col[i] = s[(i, k)] / piv;
        }
        for i in (k + 1)..n {
            for jj in (k + 1)..n {
                let upd = col[i] * col[jj].conj();
                s[(i, jj)] -= upd;
            }
        }
        let mut w = CVec::zeros(n);
        for i in k..n {
            w[perm[i]] = col[i];
        }
        factors.push(w);
    }
    Ok(factors)
}

/// Kronecker product.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}
