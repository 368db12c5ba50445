//! Closed-form solution of the regularized kernel minimax problem that
//! defines a nuisance function through a conditional moment restriction.
//!
//! # The estimation problem
//!
//! A nuisance `h` (living on features `Vh`) is characterized by the moment
//! restriction `E[h(Vh) g1(V) + g(V) | Vq] = 0`, where `g1` is a known weight
//! map and `g` a known offset map (`g = g2` when learning the first nuisance
//! of a doubly robust pair, `g = g3` when learning the second with the roles
//! of the spaces exchanged). With RKHS classes for both the learned function
//! and an adversarial test function the estimator is
//!
//! ```text
//! argmin_h  sup_q  En[ (h(Vh) g1(V) + g(V)) q(Vq) - q(Vq)^2 ]
//!           - lambda_adv ||q||^2 + lambda_tgt ||h||^2
//! ```
//!
//! Both optimizations are solved exactly. With Gram matrices `K_H` (on the
//! target points) and `K_Q` (on the adversary points), weights `D =
//! diag(g1)`, and offsets `g_n`, the inner supremum evaluates to the
//! quadratic form
//!
//! ```text
//! sup = 1/4 xi(h)^T K_Q (K_Q/n + lambda_adv I)^{-1} xi(h),
//! xi(h) = (1/n) (h(Vh_i) g1(V_i) + g(V_i))_i
//! ```
//!
//! and the outer minimizer is the kernel expansion `h = sum_i alpha_i
//! K(Vh_i, .)` with dual coefficients
//!
//! ```text
//! alpha = -(K_H D Gamma D K_H + n^2 lambda_tgt K_H)^+  K_H D Gamma g_n,
//! Gamma = 1/4 K_Q (K_Q/n + lambda_adv I)^{-1}
//! ```
//!
//! where `+` denotes the Moore–Penrose pseudoinverse. The pseudoinverse is
//! used literally: when `K_H` is numerically rank-deficient the minimizer is
//! not unique, and the pseudoinverse selects the minimum-norm dual vector,
//! which is canonical and deterministic.
//!
//! # Numerical notes
//!
//! `Gamma` is never formed: products with it go through a Cholesky solve of
//! `S = K_Q/n + lambda_adv I` via the identity `Gamma = (n/4)(I -
//! lambda_adv S^{-1})`, which is exact because `K_Q = n (S - lambda_adv I)`.
//! The outer matrix is assembled from symmetric rank-k products and handed
//! to a symmetric eigensolver, which for a PSD matrix computes exactly the
//! SVD-based pseudoinverse solution.

use ndarray::prelude::*;
use ndarray::Zip;
use ndarray_linalg::{Cholesky, Diag, SolveTriangular, UPLO};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{cross_gram, gram_matrix, gram_of_columns, pinv_solve_sym, KernelConfig};
use crate::rng::CounterRng;

/// One instance of the regularized kernel minimax problem.
///
/// Rows of `target_points` are the arguments `Vh_i` of the function being
/// learned; rows of `adversary_points` are the arguments `Vq_i` of the
/// adversarial test function; `weights[i] = g1(V_i)` multiplies the learned
/// function inside the moment and `offsets[i]` is the known additive term.
/// All four row counts must agree.
#[derive(Debug, Clone)]
pub struct MinimaxProblem {
    pub target_points: Array2<f64>,
    pub adversary_points: Array2<f64>,
    pub weights: Array1<f64>,
    pub offsets: Array1<f64>,
    pub target_kernel: KernelConfig,
    pub adversary_kernel: KernelConfig,
    /// Tikhonov penalty on the learned function (must be strictly positive
    /// for the closed form to be well posed).
    pub lambda_target: f64,
    /// Tikhonov penalty on the adversary (strictly positive).
    pub lambda_adversary: f64,
}

impl MinimaxProblem {
    pub fn n(&self) -> usize {
        self.target_points.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if n < 2 {
            return Err(Error::InvalidInput(format!(
                "minimax problem needs at least 2 records, got {n}"
            )));
        }
        if self.adversary_points.nrows() != n
            || self.weights.len() != n
            || self.offsets.len() != n
        {
            return Err(Error::InvalidInput(format!(
                "row counts disagree: target {n}, adversary {}, weights {}, offsets {}",
                self.adversary_points.nrows(),
                self.weights.len(),
                self.offsets.len()
            )));
        }
        if self.target_points.ncols() == 0 || self.adversary_points.ncols() == 0 {
            return Err(Error::InvalidInput(
                "points must have dimension at least 1".to_string(),
            ));
        }
        for (name, lambda) in [
            ("lambda_target", self.lambda_target),
            ("lambda_adversary", self.lambda_adversary),
        ] {
            if !lambda.is_finite() || lambda <= 0.0 {
                return Err(Error::InvalidInput(format!(
                    "{name} must be strictly positive and finite, got {lambda}"
                )));
            }
        }
        let finite = |a: &Array2<f64>| a.iter().all(|v| v.is_finite());
        if !finite(&self.target_points) || !finite(&self.adversary_points) {
            return Err(Error::InvalidInput(
                "points contain non-finite entries".to_string(),
            ));
        }
        if self.weights.iter().any(|v| !v.is_finite())
            || self.offsets.iter().any(|v| !v.is_finite())
        {
            return Err(Error::InvalidInput(
                "weights or offsets contain non-finite entries".to_string(),
            ));
        }
        Ok(())
    }
}

/// An estimated nuisance function in kernel-expansion form:
/// `f(x) = sum_j coefficients[j] * k(anchors[j], x)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NuisanceFunction {
    pub anchors: Array2<f64>,
    pub coefficients: Array1<f64>,
    pub kernel: KernelConfig,
}

impl NuisanceFunction {
    /// Evaluates the expansion at every row of `query`.
    pub fn evaluate(&self, query: ArrayView2<f64>) -> Result<Array1<f64>> {
        if query.ncols() != self.anchors.ncols() {
            return Err(Error::InvalidInput(format!(
                "query dimension {} does not match anchor dimension {}",
                query.ncols(),
                self.anchors.ncols()
            )));
        }
        let m = query.nrows();
        let mut out = Array1::<f64>::zeros(m);
        // Chunked so that the cross-kernel block never exceeds ~10 MB.
        let chunk = (1_300_000 / self.anchors.nrows().max(1)).max(16);
        let mut start = 0;
        while start < m {
            let stop = (start + chunk).min(m);
            let block = cross_gram(
                query.slice(s![start..stop, ..]),
                self.anchors.view(),
                &self.kernel,
            )?;
            out.slice_mut(s![start..stop])
                .assign(&block.dot(&self.coefficients));
            start = stop;
        }
        Ok(out)
    }
}

/// Fits the nuisance function solving the regularized kernel minimax problem
/// in closed form (see the module docs for the formula).
pub fn fit_nuisance(p: &MinimaxProblem) -> Result<NuisanceFunction> {
    p.validate()?;
    let n = p.n();
    let nf = n as f64;

    let k_h = gram_matrix(p.target_points.view(), &p.target_kernel)?.entries;
    let k_q = gram_matrix(p.adversary_points.view(), &p.adversary_kernel)?.entries;

    // S = K_Q/n + lambda_adv I and its lower Cholesky factor.
    let mut s = &k_q / nf;
    for i in 0..n {
        s[[i, i]] += p.lambda_adversary;
    }
    let lower = s.cholesky(UPLO::Lower).map_err(|e| {
        Error::Numeric(format!(
            "adversary system K_Q/n + lambda I is not positive definite ({e})"
        ))
    })?;

    // E = diag(weights) K_H, so that K_H D = E^T.
    let mut e = k_h.clone();
    for (i, mut row) in e.rows_mut().into_iter().enumerate() {
        let w = p.weights[i];
        row.mapv_inplace(|v| v * w);
    }

    // G = L^{-1} E gives E^T S^{-1} E = G^T G.
    let g = lower
        .solve_triangular(UPLO::Lower, Diag::NonUnit, &e)
        .map_err(|e| Error::Numeric(format!("triangular solve failed: {e}")))?;

    // K_H D Gamma D K_H = (n/4) (E^T E - lambda_adv G^T G),
    // using Gamma = (n/4)(I - lambda_adv S^{-1}).
    let ete = gram_of_columns(&e);
    let gtg = gram_of_columns(&g);
    let lam_a = p.lambda_adversary;
    let lam_t = p.lambda_target;
    let mut m = ete;
    m.zip_mut_with(&gtg, |x, &y| *x = 0.25 * nf * (*x - lam_a * y));
    m.zip_mut_with(&k_h, |x, &k| *x += nf * nf * lam_t * k);

    // rhs = -K_H D Gamma g_n = -E^T ((n/4)(g_n - lambda_adv S^{-1} g_n)).
    let g_n = p.offsets.to_owned().insert_axis(Axis(1));
    let y = lower
        .solve_triangular(UPLO::Lower, Diag::NonUnit, &g_n)
        .map_err(|e| Error::Numeric(format!("triangular solve failed: {e}")))?;
    let sinv_g = lower
        .t()
        .to_owned()
        .solve_triangular(UPLO::Upper, Diag::NonUnit, &y)
        .map_err(|e| Error::Numeric(format!("triangular solve failed: {e}")))?
        .remove_axis(Axis(1));
    let gamma_g = Zip::from(&p.offsets)
        .and(&sinv_g)
        .map_collect(|&o, &sg| 0.25 * nf * (o - lam_a * sg));
    let rhs = -e.t().dot(&gamma_g);

    let alpha = pinv_solve_sym(m, rhs.view(), None)?;
    Ok(NuisanceFunction {
        anchors: p.target_points.clone(),
        coefficients: alpha,
        kernel: p.target_kernel,
    })
}

/// The closed-form value of the inner supremum — the adversary's best
/// response to `f` on the data in `val`:
///
/// ```text
/// 1/4 xi^T K_Q (K_Q/n + lambda_adv I)^{-1} xi,
/// xi_i = (f(Vh_i) weights_i + offsets_i) / n.
/// ```
///
/// This is the empirical surrogate of the projected risk of `f` (the squared
/// conditional-moment violation projected onto the adversary's RKHS) and is
/// the score used for cross-validation. Nonnegative up to rounding, since
/// `K_Q` commutes with `(K_Q/n + lambda I)^{-1}` and both are PSD.
pub fn adversary_value(f: &NuisanceFunction, val: &MinimaxProblem) -> Result<f64> {
    val.validate()?;
    let n = val.n();
    let nf = n as f64;
    let fv = f.evaluate(val.target_points.view())?;
    let xi = Zip::from(&fv)
        .and(&val.weights)
        .and(&val.offsets)
        .map_collect(|&h, &w, &o| (h * w + o) / nf);

    let k_q = gram_matrix(val.adversary_points.view(), &val.adversary_kernel)?.entries;
    let mut s = &k_q / nf;
    for i in 0..n {
        s[[i, i]] += val.lambda_adversary;
    }
    let sinv_xi = crate::kernel::solve_spd_vec(s.view(), xi.view())?;
    Ok(0.25 * xi.dot(&k_q.dot(&sinv_xi)))
}

/// The explicit regularized objective evaluated at an arbitrary dual vector
/// `alpha`: the adversary's closed-form best response to `h_alpha = K_H
/// alpha` plus the Tikhonov penalty,
///
/// ```text
/// Q(alpha) = xi^T Gamma xi + lambda_tgt alpha^T K_H alpha,
/// xi = (1/n)(diag(weights) K_H alpha + offsets).
/// ```
///
/// [`fit_nuisance`] returns its exact minimizer over `alpha`; this function
/// exists so that optimality can be verified directly against brute-force
/// search in tests.
pub fn regularized_objective(alpha: ArrayView1<f64>, p: &MinimaxProblem) -> Result<f64> {
    p.validate()?;
    let n = p.n();
    let nf = n as f64;
    if alpha.len() != n {
        return Err(Error::InvalidInput(format!(
            "alpha has length {}, expected {n}",
            alpha.len()
        )));
    }
    let k_h = gram_matrix(p.target_points.view(), &p.target_kernel)?.entries;
    let k_q = gram_matrix(p.adversary_points.view(), &p.adversary_kernel)?.entries;
    let h_vals = k_h.dot(&alpha);
    let xi = Zip::from(&h_vals)
        .and(&p.weights)
        .and(&p.offsets)
        .map_collect(|&h, &w, &o| (h * w + o) / nf);
    let mut s = &k_q / nf;
    for i in 0..n {
        s[[i, i]] += p.lambda_adversary;
    }
    let sinv_xi = crate::kernel::solve_spd_vec(s.view(), xi.view())?;
    let gamma_quad = 0.25 * xi.dot(&k_q.dot(&sinv_xi));
    let penalty = p.lambda_target * alpha.dot(&k_h.dot(&alpha));
    Ok(gamma_quad + penalty)
}

/// Maximum absolute empirical moment over randomly drawn unit-norm RKHS
/// probe functions: for `probe_count` kernel functions `b_j = k(c_j, .)`
/// centered at seeded-random rows `c_j` of the adversary points (unit RKHS
/// norm since `k(c, c) = 1`), returns
///
/// ```text
/// max_j | mean_i (f(Vh_i) weights_i + offsets_i) b_j(Vq_i) |.
/// ```
///
/// A small value means the conditional moment `E[f(Vh) g1 + g | Vq] = 0` is
/// approximately satisfied in the directions probed; it should shrink as the
/// fit improves and as the sample grows.
pub fn moment_residual_diagnostic(
    f: &NuisanceFunction,
    val: &MinimaxProblem,
    probe_count: usize,
    seed: u64,
) -> Result<f64> {
    val.validate()?;
    if probe_count == 0 {
        return Err(Error::InvalidInput(
            "probe_count must be at least 1".to_string(),
        ));
    }
    let n = val.n();
    let nf = n as f64;
    let fv = f.evaluate(val.target_points.view())?;
    let resid = Zip::from(&fv)
        .and(&val.weights)
        .and(&val.offsets)
        .map_collect(|&h, &w, &o| h * w + o);

    let mut rng = CounterRng::new(seed);
    let mut worst = 0.0f64;
    for _ in 0..probe_count {
        let c = val.adversary_points.row(rng.below(n));
        let mut acc = 0.0;
        for i in 0..n {
            let b = crate::kernel::kernel_eval(c, val.adversary_points.row(i), &val.adversary_kernel)?;
            acc += resid[i] * b;
        }
        worst = worst.max((acc / nf).abs());
    }
    Ok(worst)
}
