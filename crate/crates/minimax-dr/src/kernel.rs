//! Gaussian kernel evaluation, Gram matrices, and the dense linear-algebra
//! primitives (regularized symmetric solves, SVD pseudoinverse) that the
//! estimation modules are built on.
//!
//! Everything here is a pure function of its inputs; results are freshly
//! allocated and safe to share across threads. All matrices are dense `f64`:
//! the intended problem sizes (up to a few thousand anchor points) fit in
//! memory without low-rank approximation, and keeping the algebra exact makes
//! the closed-form minimax solutions testable to tight tolerances.

use std::os::raw::c_char;

use ndarray::prelude::*;
use ndarray_linalg::{Cholesky, Diag, SolveTriangular, SVD, UPLO};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Kernel families understood by [`kernel_eval`]. Only the Gaussian
/// (squared-exponential) kernel is provided; it is the standard choice for
/// RKHS-based conditional-moment estimation and the one used throughout the
/// built-in applications.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    Gaussian,
}

/// A kernel family plus its length-scale.
///
/// `bandwidth` is the sigma in `k(x, y) = exp(-||x - y||^2 / (2 sigma^2))`,
/// expressed in raw feature units. A single scalar length-scale is used for
/// all coordinates; callers that want per-coordinate scaling should
/// standardize their features first (see the `standardize` options on the
/// higher-level configs).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct KernelConfig {
    pub family: KernelFamily,
    pub bandwidth: f64,
}

impl KernelConfig {
    /// Gaussian kernel with the given bandwidth (must be positive and
    /// finite).
    pub fn gaussian(bandwidth: f64) -> Result<Self> {
        if !bandwidth.is_finite() || bandwidth <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "kernel bandwidth must be a positive finite number, got {bandwidth}"
            )));
        }
        Ok(KernelConfig {
            family: KernelFamily::Gaussian,
            bandwidth,
        })
    }
}

/// How a bandwidth is specified in configuration: either an absolute value
/// in feature units, or a multiple of the median pairwise distance of the
/// points it will be applied to (the "median heuristic").
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bandwidth {
    Fixed(f64),
    MedianMultiple(f64),
}

impl Bandwidth {
    /// Resolves to an absolute bandwidth, computing the median heuristic on
    /// `points` when needed.
    pub fn resolve(&self, points: ArrayView2<f64>) -> Result<f64> {
        match *self {
            Bandwidth::Fixed(v) => {
                if !v.is_finite() || v <= 0.0 {
                    return Err(Error::InvalidInput(format!(
                        "fixed bandwidth must be positive and finite, got {v}"
                    )));
                }
                Ok(v)
            }
            Bandwidth::MedianMultiple(c) => {
                if !c.is_finite() || c <= 0.0 {
                    return Err(Error::InvalidInput(format!(
                        "bandwidth multiplier must be positive and finite, got {c}"
                    )));
                }
                Ok(c * median_heuristic(points)?)
            }
        }
    }
}

/// Kernel value `k(x, y)`; symmetric in its arguments and in `(0, 1]` for
/// the Gaussian family, with `k(x, x) = 1`.
pub fn kernel_eval(x: ArrayView1<f64>, y: ArrayView1<f64>, config: &KernelConfig) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::InvalidInput(format!(
            "kernel arguments have different dimensions ({} vs {})",
            x.len(),
            y.len()
        )));
    }
    if x.is_empty() {
        return Err(Error::InvalidInput(
            "kernel arguments must have dimension at least 1".to_string(),
        ));
    }
    let mut sq = 0.0;
    for (a, b) in x.iter().zip(y.iter()) {
        let d = a - b;
        sq += d * d;
    }
    match config.family {
        KernelFamily::Gaussian => Ok((-sq / (2.0 * config.bandwidth * config.bandwidth)).exp()),
    }
}

/// A kernel matrix together with the points and kernel that produced it.
///
/// Invariants (up to floating point): symmetric, unit diagonal for the
/// Gaussian family, and positive semidefinite — the smallest eigenvalue is
/// bounded below by `-1e-8` times the largest.
#[derive(Debug, Clone)]
pub struct GramMatrix {
    pub entries: Array2<f64>,
    pub source_points: Array2<f64>,
    pub config: KernelConfig,
}

/// Builds the n-by-n kernel matrix of `points`. Symmetry is exact by
/// construction (each off-diagonal value is computed once and mirrored) and
/// the diagonal is exactly 1 for the Gaussian family.
pub fn gram_matrix(points: ArrayView2<f64>, config: &KernelConfig) -> Result<GramMatrix> {
    let n = points.nrows();
    if n == 0 {
        return Err(Error::InvalidInput(
            "Gram matrix needs at least one point".to_string(),
        ));
    }
    if points.ncols() == 0 {
        return Err(Error::InvalidInput(
            "points must have dimension at least 1".to_string(),
        ));
    }
    let mut entries = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        entries[[i, i]] = 1.0;
        for j in (i + 1)..n {
            let v = kernel_eval(points.row(i), points.row(j), config)?;
            entries[[i, j]] = v;
            entries[[j, i]] = v;
        }
    }
    Ok(GramMatrix {
        entries,
        source_points: points.to_owned(),
        config: *config,
    })
}

/// Rectangular kernel matrix between two point sets: entry `(i, j)` is
/// `k(a[i], b[j])`.
pub fn cross_gram(
    a: ArrayView2<f64>,
    b: ArrayView2<f64>,
    config: &KernelConfig,
) -> Result<Array2<f64>> {
    if a.ncols() != b.ncols() {
        return Err(Error::InvalidInput(format!(
            "point sets have different dimensions ({} vs {})",
            a.ncols(),
            b.ncols()
        )));
    }
    let mut out = Array2::<f64>::zeros((a.nrows(), b.nrows()));
    for i in 0..a.nrows() {
        for j in 0..b.nrows() {
            out[[i, j]] = kernel_eval(a.row(i), b.row(j), config)?;
        }
    }
    Ok(out)
}

/// Median of the pairwise Euclidean distances over all distinct index pairs.
/// The conventional default length-scale for Gaussian kernels.
///
/// Fails with a degenerate-input error when the median distance is zero
/// (all, or nearly all, points identical) since no usable bandwidth can be
/// derived from such a set.
pub fn median_heuristic(points: ArrayView2<f64>) -> Result<f64> {
    let n = points.nrows();
    if n < 2 {
        return Err(Error::InvalidInput(
            "median heuristic needs at least two points".to_string(),
        ));
    }
    let mut dists = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            let mut sq = 0.0;
            for (a, b) in points.row(i).iter().zip(points.row(j).iter()) {
                let d = a - b;
                sq += d * d;
            }
            dists.push(sq.sqrt());
        }
    }
    dists.sort_unstable_by(f64::total_cmp);
    let m = dists.len();
    let median = if m % 2 == 1 {
        dists[m / 2]
    } else {
        0.5 * (dists[m / 2 - 1] + dists[m / 2])
    };
    if median <= 0.0 {
        return Err(Error::DegenerateInput(
            "median pairwise distance is zero (points are identical); cannot derive a bandwidth"
                .to_string(),
        ));
    }
    Ok(median)
}

/// Moore–Penrose pseudoinverse via SVD.
///
/// Singular values at or below `rank_tol` are treated as zero. When
/// `rank_tol` is `None` the default is
/// `machine epsilon * max(n, m) * largest singular value`, the customary
/// numerical-rank threshold.
pub fn pseudo_inverse(m: ArrayView2<f64>, rank_tol: Option<f64>) -> Result<Array2<f64>> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(
            "pseudoinverse input contains non-finite entries".to_string(),
        ));
    }
    if let Some(t) = rank_tol {
        if t.is_nan() || t < 0.0 {
            return Err(Error::InvalidInput(format!(
                "rank tolerance must be nonnegative, got {t}"
            )));
        }
    }
    let (u, s, vt) = m
        .svd(true, true)
        .map_err(|e| Error::Numeric(format!("SVD failed: {e}")))?;
    let u = u.expect("left singular vectors requested");
    let vt = vt.expect("right singular vectors requested");
    let smax = s.iter().cloned().fold(0.0f64, f64::max);
    let tol =
        rank_tol.unwrap_or_else(|| f64::EPSILON * m.nrows().max(m.ncols()) as f64 * smax);
    // M^+ = sum_k (1/s_k) v_k u_k^T over singular values above tolerance;
    // assembled as (V_r scaled by reciprocal singular values) U_r^T from the
    // rank-limited factors (LAPACK returns full square U and V^T).
    let r = s.len();
    let mut v_scaled = vt.slice(s![..r, ..]).t().to_owned();
    for (k, mut col) in v_scaled.columns_mut().into_iter().enumerate() {
        let f = if s[k] > tol { 1.0 / s[k] } else { 0.0 };
        col.mapv_inplace(|x| x * f);
    }
    Ok(v_scaled.dot(&u.slice(s![.., ..r]).t()))
}

/// Solves `M X = B` for symmetric positive-definite `M` by Cholesky
/// factorization followed by two triangular solves. The residual satisfies
/// `||M X - B|| <= 1e-8 ||B||` for well-conditioned systems.
pub fn solve_spd(m: ArrayView2<f64>, b: ArrayView2<f64>) -> Result<Array2<f64>> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::InvalidInput(format!(
            "matrix must be square, got {}x{}",
            n,
            m.ncols()
        )));
    }
    if b.nrows() != n {
        return Err(Error::InvalidInput(format!(
            "right-hand side has {} rows but the matrix has {n}",
            b.nrows()
        )));
    }
    let scale = m.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
    let mut asym = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            asym = asym.max((m[[i, j]] - m[[j, i]]).abs());
        }
    }
    if asym > 1e-10 * scale {
        return Err(Error::InvalidInput(format!(
            "matrix is not symmetric (max |M - M^T| = {asym:.3e})"
        )));
    }
    let lower = m
        .cholesky(UPLO::Lower)
        .map_err(|e| Error::Numeric(format!("Cholesky factorization failed, matrix is not positive definite ({e})")))?;
    let y = lower
        .solve_triangular(UPLO::Lower, Diag::NonUnit, &b.to_owned())
        .map_err(|e| Error::Numeric(format!("triangular solve failed: {e}")))?;
    let x = lower
        .t()
        .to_owned()
        .solve_triangular(UPLO::Upper, Diag::NonUnit, &y)
        .map_err(|e| Error::Numeric(format!("triangular solve failed: {e}")))?;
    Ok(x)
}

/// [`solve_spd`] for a single right-hand-side vector.
pub fn solve_spd_vec(m: ArrayView2<f64>, b: ArrayView1<f64>) -> Result<Array1<f64>> {
    let b2 = b.insert_axis(Axis(1));
    let x = solve_spd(m, b2)?;
    Ok(x.column(0).to_owned())
}

// ---------------------------------------------------------------------------
// Internal symmetric eigensolver plumbing.
//
// The minimax fits need the minimum-norm solution of a symmetric system for
// one right-hand side per fit, at sizes where the eigensolver dominates the
// cost. LAPACK's divide-and-conquer driver `dsyevd` is considerably faster
// than the QR-iteration driver behind the generic interface, so we call it
// directly here. For a symmetric positive semidefinite matrix the
// eigendecomposition *is* a singular value decomposition, so solving through
// it preserves the pseudoinverse semantics of `pseudo_inverse` (asserted by
// the agreement tests below).
// ---------------------------------------------------------------------------

/// Eigendecomposition of a symmetric matrix (consumed) via LAPACK `dsyevd`.
/// Returns `(eigenvalues ascending, vectors)` where eigenvector `k` is stored
/// in **row** `k` of the returned matrix.
///
/// Layout note: the buffer is C-order while LAPACK assumes Fortran order, so
/// LAPACK sees the transpose — which equals the input by symmetry — and
/// writes eigenvector `k` into its column `k`, i.e. our row `k`.
pub(crate) fn eigh_rows(mut a: Array2<f64>) -> Result<(Array1<f64>, Array2<f64>)> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::InvalidInput(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            n,
            a.ncols()
        )));
    }
    if !a.is_standard_layout() {
        a = a.as_standard_layout().to_owned();
    }
    let ni = n as i32;
    let mut w = vec![0.0f64; n];
    let mut info = 0i32;
    let jobz = b'V' as c_char;
    let uplo = b'L' as c_char;
    unsafe {
        // Workspace query.
        let (mut wkopt, mut iwkopt) = (0.0f64, 0i32);
        let (lwork_q, liwork_q) = (-1i32, -1i32);
        lapack_sys::dsyevd_(
            &jobz,
            &uplo,
            &ni,
            a.as_mut_ptr(),
            &ni,
            w.as_mut_ptr(),
            &mut wkopt,
            &lwork_q,
            &mut iwkopt,
            &liwork_q,
            &mut info,
        );
        if info != 0 {
            return Err(Error::Numeric(format!(
                "eigensolver workspace query failed with code {info}"
            )));
        }
        let lwork = wkopt as i32;
        let liwork = iwkopt;
        let mut work = vec![0.0f64; lwork as usize];
        let mut iwork = vec![0i32; liwork as usize];
        lapack_sys::dsyevd_(
            &jobz,
            &uplo,
            &ni,
            a.as_mut_ptr(),
            &ni,
            w.as_mut_ptr(),
            work.as_mut_ptr(),
            &lwork,
            iwork.as_mut_ptr(),
            &liwork,
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Numeric(format!(
            "symmetric eigensolver failed with code {info}"
        )));
    }
    Ok((Array1::from(w), a))
}

/// Minimum-norm solution of `M x = b` for symmetric `M`, with eigenvalues of
/// magnitude at or below `rank_tol` treated as zero — the pseudoinverse
/// applied to `b` without forming it. Tolerance semantics match
/// [`pseudo_inverse`] (default `eps * n * max |eigenvalue|`).
pub(crate) fn pinv_solve_sym(
    m: Array2<f64>,
    b: ArrayView1<f64>,
    rank_tol: Option<f64>,
) -> Result<Array1<f64>> {
    let n = m.nrows();
    if b.len() != n {
        return Err(Error::InvalidInput(format!(
            "right-hand side has length {} but the matrix has {n} rows",
            b.len()
        )));
    }
    let (w, v) = eigh_rows(m)?;
    let wmax = w.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    let tol = rank_tol.unwrap_or(f64::EPSILON * n as f64 * wmax);
    // x = V diag(1/w) V^T b with eigenvectors in the rows of `v`.
    let mut proj = v.dot(&b);
    for (k, p) in proj.iter_mut().enumerate() {
        *p = if w[k].abs() > tol { *p / w[k] } else { 0.0 };
    }
    Ok(v.t().dot(&proj))
}

/// `A^T A` via the BLAS symmetric rank-k kernel (half the flops of a general
/// matrix product), with the result mirrored to a full symmetric matrix.
pub(crate) fn gram_of_columns(a: &Array2<f64>) -> Array2<f64> {
    let (r, c) = a.dim();
    let a_std;
    let a_ref: &Array2<f64> = if a.is_standard_layout() {
        a
    } else {
        a_std = a.as_standard_layout().to_owned();
        &a_std
    };
    let mut out = Array2::<f64>::zeros((c, c));
    unsafe {
        cblas_sys::cblas_dsyrk(
            cblas_sys::CBLAS_LAYOUT::CblasRowMajor,
            cblas_sys::CBLAS_UPLO::CblasUpper,
            cblas_sys::CBLAS_TRANSPOSE::CblasTrans,
            c as i32,
            r as i32,
            1.0,
            a_ref.as_ptr(),
            c as i32,
            0.0,
            out.as_mut_ptr(),
            c as i32,
        );
    }
    for i in 0..c {
        for j in 0..i {
            out[[i, j]] = out[[j, i]];
        }
    }
    out
}
