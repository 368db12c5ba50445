//! Minimax kernel estimation of nuisance functions for doubly robust
//! functionals.
//!
//! Many statistical functionals `psi = E[m(V; h, q)]` admit influence
//! functions of the doubly robust form
//!
//! ```text
//! IF(V; psi, q, h) = q(Vq) h(Vh) g1(V) + q(Vq) g2(V) + h(Vh) g3(V) + g4(V) - psi
//! ```
//!
//! where `g1..g4` are known maps, and the nuisance functions `h` and `q` are
//! defined only through conditional moment restrictions rather than as
//! regressions. This crate estimates such nuisances by solving regularized
//! kernel minimax (adversarial) problems in closed form, plugs them into the
//! moment via cross-fitting, and reports confidence intervals from the
//! empirical influence-function variance.
//!
//! The flagship application is proximal causal inference: estimation of the
//! average causal effect of a binary treatment under latent confounding with
//! the help of two proxy sets, either by an outcome bridge (POR), a treatment
//! bridge (PIPW), or both combined in a doubly robust moment (PDR).
//!
//! # Modules
//!
//! - [`kernel`] — Gaussian kernels, Gram matrices, dense solves, SVD
//!   pseudoinverse.
//! - [`minimax`] — closed-form solution of the regularized kernel minimax
//!   problem, nuisance evaluation, and the projected-risk surrogate used for
//!   validation scoring.
//! - [`functional`] — the generic doubly robust functional: influence
//!   values, per-fold moment solving, cross-fitting with IF-based standard
//!   errors.
//! - [`proximal`] — outcome/treatment bridge estimation and the POR, PIPW,
//!   and PDR average-causal-effect estimators.
//! - [`scenarios`] — synthetic data generators with known ground truth for
//!   validating the estimators end to end.
//! - [`tuning`] — k-fold cross-validated hyperparameter search scored by the
//!   projected-risk surrogate.
//! - [`cli`] — configuration, CSV/JSON input and output, and the
//!   `simulate`/`estimate`/`tune` commands behind the `minimax-dr` binary.
//! - [`rng`] — counter-based deterministic random number generation.
//!
//! # References
//!
//! The estimation strategy follows the minimax kernel approach to doubly
//! robust functionals of Ghassami, Ying, Shpitser & Tchetgen Tchetgen
//! (AISTATS 2022), with the proximal causal inference setting of Miao, Geng
//! & Tchetgen Tchetgen (2018) and Cui, Pu, Shi, Miao & Tchetgen Tchetgen
//! (2020).

pub mod cli;
pub mod error;
pub mod functional;
pub mod kernel;
pub mod minimax;
pub mod proximal;
pub mod rng;
pub mod scenarios;
pub mod tuning;

pub use error::{Error, Result};
pub use functional::{
    cross_fit, influence_value, solve_psi_fold, ConstantNuisance, CrossFitEstimate,
    FunctionalSpec, LinearNuisance, NuisanceEval,
};
pub use kernel::{
    cross_gram, gram_matrix, kernel_eval, median_heuristic, pseudo_inverse, solve_spd,
    Bandwidth, GramMatrix, KernelConfig, KernelFamily,
};
pub use minimax::{
    adversary_value, fit_nuisance, moment_residual_diagnostic, regularized_objective,
    MinimaxProblem, NuisanceFunction,
};
pub use proximal::{
    estimate_ace, fit_h_bridge, fit_q_bridge, AceConfig, AceResult, EstimatorTriple,
    ProximalDataset,
};
pub use scenarios::{generate, oracle_h_bridge, true_ace, Scenario, ScenarioConfig};
pub use tuning::{tune, GridScore, HyperGrid, HyperPoint, TunedHyperparams};
