//! Synthetic data generating processes for the proximal-inference
//! experiments: three fully parameterized scenarios with known ground-truth
//! average causal effects, plus an oracle linear outcome bridge for
//! double-robustness experiments.
//!
//! Scenario 1 is the linear-Gaussian design of Cui, Pu, Shi, Miao &
//! Tchetgen Tchetgen (2020): bivariate normal covariates, a logistic
//! treatment, jointly Gaussian proxies `(Z, W)` and confounder `U`, and a
//! linear outcome. Scenario 2 raises the proxy dimensions to
//! `dim(X, Z, W) = (5, 2, 2)`. Scenario 3 makes both confounding bridge
//! functions nonlinear through cubic and interaction terms.
//!
//! All scenarios are sampled record-by-record from a single counter-based
//! stream in a fixed order (covariates, treatment, proxies, outcome noise),
//! so a dataset is a pure function of `(scenario, n, seed, overrides)`.

use std::collections::BTreeMap;

use ndarray::prelude::*;
use ndarray_linalg::Solve;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::proximal::ProximalDataset;
use crate::rng::{CounterRng, MvnSampler};

/// The three synthetic designs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scenario {
    /// Linear-Gaussian design with `dim(X, Z, W) = (2, 1, 1)`.
    #[serde(rename = "linear_gaussian_1")]
    LinearGaussian1,
    /// Multidimensional-proxy design with `dim(X, Z, W) = (5, 2, 2)`.
    #[serde(rename = "multidim_2")]
    MultidimProxies2,
    /// Nonlinear-bridge design with cubic and interaction terms,
    /// `dim(X, Z, W) = (2, 1, 1)`.
    #[serde(rename = "nonlinear_3")]
    NonlinearBridges3,
}

impl Scenario {
    /// Numeric identifier used on the command line (`--scenario {1,2,3}`).
    pub fn id(self) -> u8 {
        match self {
            Scenario::LinearGaussian1 => 1,
            Scenario::MultidimProxies2 => 2,
            Scenario::NonlinearBridges3 => 3,
        }
    }

    pub fn from_id(id: u8) -> Result<Self> {
        match id {
            1 => Ok(Scenario::LinearGaussian1),
            2 => Ok(Scenario::MultidimProxies2),
            3 => Ok(Scenario::NonlinearBridges3),
            other => Err(Error::InvalidInput(format!(
                "unknown scenario id {other}; expected 1, 2, or 3"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Scenario::LinearGaussian1 => "linear_gaussian_1",
            Scenario::MultidimProxies2 => "multidim_2",
            Scenario::NonlinearBridges3 => "nonlinear_3",
        }
    }
}

/// A parameter override value: scenario parameters are scalars, vectors, or
/// matrices, and configuration files may spell numbers as integers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Scalar(f64),
    Vector(Vec<f64>),
    Matrix(Vec<Vec<f64>>),
}

impl ParamValue {
    fn scalar(&self, key: &str) -> Result<f64> {
        match self {
            ParamValue::Scalar(v) if v.is_finite() => Ok(*v),
            ParamValue::Scalar(_) => {
                Err(Error::Config(format!("override `{key}` must be finite")))
            }
            _ => Err(Error::Config(format!("override `{key}` must be a scalar"))),
        }
    }

    fn vector(&self, key: &str, len: usize) -> Result<Array1<f64>> {
        match self {
            ParamValue::Vector(v) if v.len() == len && v.iter().all(|x| x.is_finite()) => {
                Ok(Array1::from_vec(v.clone()))
            }
            _ => Err(Error::Config(format!(
                "override `{key}` must be a finite vector of length {len}"
            ))),
        }
    }

    fn matrix(&self, key: &str, rows: usize, cols: usize) -> Result<Array2<f64>> {
        match self {
            ParamValue::Matrix(m)
                if m.len() == rows
                    && m.iter().all(|r| r.len() == cols)
                    && m.iter().flatten().all(|x| x.is_finite()) =>
            {
                let flat: Vec<f64> = m.iter().flatten().copied().collect();
                Ok(Array2::from_shape_vec((rows, cols), flat).expect("validated shape"))
            }
            _ => Err(Error::Config(format!(
                "override `{key}` must be a finite {rows}x{cols} matrix"
            ))),
        }
    }

    /// Scalar, or a vector collapsed by summation (for coefficients printed
    /// as vectors but applied to a scalar variable).
    fn collapsed_scalar(&self, key: &str) -> Result<f64> {
        match self {
            ParamValue::Scalar(_) => self.scalar(key),
            ParamValue::Vector(v) if v.iter().all(|x| x.is_finite()) => Ok(v.iter().sum()),
            _ => Err(Error::Config(format!(
                "override `{key}` must be a finite scalar or vector"
            ))),
        }
    }
}

/// Everything needed to draw one synthetic dataset.
///
/// `overrides` replaces individual scenario parameters, keyed by name:
///
/// - scenario 1: `Gamma_x`, `sigma_x`, `propensity_x`, `alpha_0`, `alpha_a`,
///   `alpha_x`, `mu_0`, `mu_a`, `mu_x`, `kappa_0`, `kappa_a`, `kappa_x`,
///   `Sigma`, `b_0`, `b_a`, `b_x`, `b_w`, `omega`, `sigma_y`;
/// - scenario 2: `sigma_U`, `mu_UX`, `sigma_X2`, `t_Z`, `t_X`, `t_A`,
///   `mu_AZ`, `mu_XZ`, `mu_UZ`, `sigma_Z2`, `mu_XW`, `mu_UW`, `sigma_W2`,
///   `mu_AY`, `mu_WY`, `mu_XY`, `mu_UY`, `sigma_Y2`;
/// - scenario 3: `bare_x` (coefficient on `X₁ + X₂` in the outcome mean,
///   0 by default; set −1.0 to reinstate the design's orphaned `− X` term).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub n: usize,
    pub seed: u64,
    #[serde(default)]
    pub overrides: BTreeMap<String, ParamValue>,
}

impl ScenarioConfig {
    pub fn new(scenario: Scenario, n: usize, seed: u64) -> Self {
        ScenarioConfig {
            scenario,
            n,
            seed,
            overrides: BTreeMap::new(),
        }
    }
}

/// Ground-truth average causal effect `E[Y(1) − Y(0)]` of each scenario.
///
/// Scenario 1: the treatment coefficient `b_a = 2` of the outcome equation.
/// Scenario 2: `mu_AY = 2` (no treatment interactions). Scenario 3: the
/// treatment main effect 1; the interactions `−0.5AX₁ + 0.3AX₂ + 0.25AU`
/// average to zero because `X₁, X₂, U` are standard normal.
pub fn true_ace(scenario: Scenario) -> f64 {
    match scenario {
        Scenario::LinearGaussian1 => 2.0,
        Scenario::MultidimProxies2 => 2.0,
        Scenario::NonlinearBridges3 => 1.0,
    }
}

/// Draws a dataset. Pure in `(scenario, n, seed, overrides)`: the same
/// configuration always produces the identical dataset.
pub fn generate(cfg: &ScenarioConfig) -> Result<ProximalDataset> {
    if cfg.n == 0 {
        return Err(Error::InvalidInput(
            "scenario datasets need n >= 1".to_string(),
        ));
    }
    match cfg.scenario {
        Scenario::LinearGaussian1 => generate_linear_gaussian(cfg),
        Scenario::MultidimProxies2 => generate_multidim(cfg),
        Scenario::NonlinearBridges3 => generate_nonlinear(cfg),
    }
}

fn unknown_key(scenario: Scenario, key: &str, valid: &[&str]) -> Error {
    Error::Config(format!(
        "unknown override `{key}` for scenario {}; valid keys: {}",
        scenario.name(),
        valid.join(", ")
    ))
}

// ---------------------------------------------------------------------------
// Scenario 1: linear-Gaussian
// ---------------------------------------------------------------------------

struct LinearGaussianParams {
    gamma_x: Array1<f64>,
    sigma_x: f64,
    propensity_x: Array1<f64>,
    alpha_0: f64,
    alpha_a: f64,
    alpha_x: Array1<f64>,
    mu_0: f64,
    mu_a: f64,
    mu_x: Array1<f64>,
    kappa_0: f64,
    kappa_a: f64,
    kappa_x: Array1<f64>,
    sigma: Array2<f64>,
    b_0: f64,
    b_a: f64,
    b_x: Array1<f64>,
    b_w: f64,
    omega: f64,
    sigma_y: f64,
}

const SCENARIO1_KEYS: &[&str] = &[
    "Gamma_x",
    "sigma_x",
    "propensity_x",
    "alpha_0",
    "alpha_a",
    "alpha_x",
    "mu_0",
    "mu_a",
    "mu_x",
    "kappa_0",
    "kappa_a",
    "kappa_x",
    "Sigma",
    "b_0",
    "b_a",
    "b_x",
    "b_w",
    "omega",
    "sigma_y",
];

impl LinearGaussianParams {
    fn resolve(overrides: &BTreeMap<String, ParamValue>) -> Result<Self> {
        let mut p = LinearGaussianParams {
            gamma_x: array![0.25, 0.25],
            sigma_x: 0.25,
            propensity_x: array![0.125, 0.125],
            alpha_0: 0.25,
            alpha_a: 0.125,
            alpha_x: array![0.25, 0.25],
            mu_0: 0.25,
            mu_a: 0.25,
            mu_x: array![0.25, 0.25],
            kappa_0: 0.25,
            kappa_a: 0.25,
            kappa_x: array![0.25, 0.25],
            sigma: array![[1.0, 0.25, 0.5], [0.25, 1.0, 0.5], [0.5, 0.5, 1.0]],
            b_0: 2.0,
            b_a: 2.0,
            b_x: array![0.25, 0.25],
            b_w: 4.0,
            omega: 2.0,
            // The design states only the conditional mean of Y; the noise
            // is standard normal, matching the unit outcome variance of the
            // nonlinear scenario.
            sigma_y: 1.0,
        };
        for (key, v) in overrides {
            match key.as_str() {
                "Gamma_x" => p.gamma_x = v.vector(key, 2)?,
                "sigma_x" => p.sigma_x = v.scalar(key)?,
                "propensity_x" => p.propensity_x = v.vector(key, 2)?,
                "alpha_0" => p.alpha_0 = v.scalar(key)?,
                "alpha_a" => p.alpha_a = v.scalar(key)?,
                "alpha_x" => p.alpha_x = v.vector(key, 2)?,
                "mu_0" => p.mu_0 = v.scalar(key)?,
                "mu_a" => p.mu_a = v.scalar(key)?,
                "mu_x" => p.mu_x = v.vector(key, 2)?,
                "kappa_0" => p.kappa_0 = v.scalar(key)?,
                "kappa_a" => p.kappa_a = v.scalar(key)?,
                "kappa_x" => p.kappa_x = v.vector(key, 2)?,
                "Sigma" => p.sigma = v.matrix(key, 3, 3)?,
                "b_0" => p.b_0 = v.scalar(key)?,
                "b_a" => p.b_a = v.scalar(key)?,
                "b_x" => p.b_x = v.vector(key, 2)?,
                "b_w" => p.b_w = v.scalar(key)?,
                "omega" => p.omega = v.scalar(key)?,
                "sigma_y" => p.sigma_y = v.scalar(key)?,
                _ => return Err(unknown_key(Scenario::LinearGaussian1, key, SCENARIO1_KEYS)),
            }
        }
        if p.sigma_x.is_nan() || p.sigma_x <= 0.0 {
            return Err(Error::Config("sigma_x must be positive".to_string()));
        }
        if p.sigma_y < 0.0 {
            return Err(Error::Config("sigma_y must be nonnegative".to_string()));
        }
        Ok(p)
    }
}

/// Scenario 1. Draw order per record: `X` (2 normals), `A` (1 uniform),
/// `(Z, W, U)` (3 normals through the Cholesky factor of `Sigma`), outcome
/// noise (1 normal).
///
/// The outcome mean is
/// `b_0 + b_a A + b_x'X + (b_w − ω)·E(W | Z, U, A, X) + ω W`
/// with the conditional expectation computed exactly from `Sigma` (for the
/// default `Sigma` the `Z` coefficient vanishes and the `U` coefficient is
/// `σ_wu/σ_u² = 0.5`). Using the exact conditional mean keeps the linear
/// function `h(w, a, x) = b_0 + b_a a + b_x'x + b_w w` an exact outcome
/// bridge, so the identified contrast equals the design truth `b_a`.
fn generate_linear_gaussian(cfg: &ScenarioConfig) -> Result<ProximalDataset> {
    let p = LinearGaussianParams::resolve(&cfg.overrides)?;
    let zwu = MvnSampler::new(Array1::zeros(3), p.sigma.clone())
        .map_err(|e| Error::Config(format!("Sigma: {e}")))?;

    // Coefficients of the regression of W on (Z, U) inside the proxy
    // covariance: [[s_zz, s_zu], [s_zu, s_uu]] (c_z, c_u)' = (s_zw, s_wu)'.
    let s = &p.sigma;
    let det = s[[0, 0]] * s[[2, 2]] - s[[0, 2]] * s[[0, 2]];
    let c_z = (s[[2, 2]] * s[[0, 1]] - s[[0, 2]] * s[[1, 2]]) / det;
    let c_u = (s[[0, 0]] * s[[1, 2]] - s[[0, 2]] * s[[0, 1]]) / det;

    let n = cfg.n;
    let mut x = Array2::zeros((n, 2));
    let mut z = Array2::zeros((n, 1));
    let mut w = Array2::zeros((n, 1));
    let mut a = Array1::zeros(n);
    let mut y = Array1::zeros(n);
    let mut rng = CounterRng::new(cfg.seed);

    for i in 0..n {
        let xi = &p.gamma_x + &(p.sigma_x * rng.standard_normal_vec(2));
        let prob = 1.0 / (1.0 + p.propensity_x.dot(&xi).exp());
        let ai = if rng.next_f64() < prob { 1.0 } else { 0.0 };
        let mean = array![
            p.alpha_0 + p.alpha_a * ai + p.alpha_x.dot(&xi),
            p.mu_0 + p.mu_a * ai + p.mu_x.dot(&xi),
            p.kappa_0 + p.kappa_a * ai + p.kappa_x.dot(&xi),
        ];
        let draw = zwu.sample_with_mean(&mean, &mut rng);
        let (zi, wi, ui) = (draw[0], draw[1], draw[2]);
        let cond_w = mean[1] + c_z * (zi - mean[0]) + c_u * (ui - mean[2]);
        let yi = p.b_0
            + p.b_a * ai
            + p.b_x.dot(&xi)
            + (p.b_w - p.omega) * cond_w
            + p.omega * wi
            + p.sigma_y * rng.standard_normal();

        x.row_mut(i).assign(&xi);
        z[[i, 0]] = zi;
        w[[i, 0]] = wi;
        a[i] = ai;
        y[i] = yi;
    }
    ProximalDataset::new(x, z, w, a, y)
}

// ---------------------------------------------------------------------------
// Scenario 2: multidimensional proxies
// ---------------------------------------------------------------------------

struct MultidimParams {
    sigma_u: f64,
    mu_ux: Array1<f64>,
    sigma_x2: Array2<f64>,
    t_z: Array1<f64>,
    t_x: Array1<f64>,
    t_a: f64,
    mu_az: Array1<f64>,
    mu_xz: Array2<f64>,
    mu_uz: Array1<f64>,
    sigma_z2: Array2<f64>,
    mu_xw: Array2<f64>,
    mu_uw: Array1<f64>,
    sigma_w2: Array2<f64>,
    mu_ay: f64,
    mu_wy: Array1<f64>,
    mu_xy: Array1<f64>,
    mu_uy: f64,
    sigma_y2: f64,
}

const SCENARIO2_KEYS: &[&str] = &[
    "sigma_U",
    "mu_UX",
    "sigma_X2",
    "t_Z",
    "t_X",
    "t_A",
    "mu_AZ",
    "mu_XZ",
    "mu_UZ",
    "sigma_Z2",
    "mu_XW",
    "mu_UW",
    "sigma_W2",
    "mu_AY",
    "mu_WY",
    "mu_XY",
    "mu_UY",
    "sigma_Y2",
];

impl MultidimParams {
    fn resolve(overrides: &BTreeMap<String, ParamValue>) -> Result<Self> {
        let mut p = MultidimParams {
            sigma_u: 0.3,
            mu_ux: array![0.4, 0.525, 0.65, 0.775, 0.9],
            sigma_x2: Array2::eye(5) * 0.3,
            t_z: array![0.9, 0.4],
            t_x: array![0.9, 0.775, 0.65, 0.525, 0.4],
            t_a: -0.981,
            mu_az: array![0.5, 0.6],
            mu_xz: array![
                [0.4, 0.511, 0.622, 0.733, 0.844],
                [0.456, 0.567, 0.678, 0.789, 0.9]
            ],
            mu_uz: array![0.8, 0.9],
            sigma_z2: Array2::eye(2) * 0.3,
            mu_xw: array![
                [0.9, 0.789, 0.678, 0.567, 0.455],
                [0.844, 0.733, 0.622, 0.511, 0.4]
            ],
            mu_uw: array![0.8, 0.9],
            sigma_w2: Array2::eye(2) * 0.3,
            mu_ay: 2.0,
            mu_wy: array![0.4, 0.9],
            mu_xy: array![0.4, 0.525, 0.65, 0.775, 0.9],
            // The stated U coefficient of the outcome is a two-entry vector
            // although U is scalar; it is applied as the collapsed sum 1.3.
            mu_uy: 1.3,
            sigma_y2: 0.3,
        };
        for (key, v) in overrides {
            match key.as_str() {
                "sigma_U" => p.sigma_u = v.scalar(key)?,
                "mu_UX" => p.mu_ux = v.vector(key, 5)?,
                "sigma_X2" => p.sigma_x2 = v.matrix(key, 5, 5)?,
                "t_Z" => p.t_z = v.vector(key, 2)?,
                "t_X" => p.t_x = v.vector(key, 5)?,
                "t_A" => p.t_a = v.scalar(key)?,
                "mu_AZ" => p.mu_az = v.vector(key, 2)?,
                "mu_XZ" => p.mu_xz = v.matrix(key, 2, 5)?,
                "mu_UZ" => p.mu_uz = v.vector(key, 2)?,
                "sigma_Z2" => p.sigma_z2 = v.matrix(key, 2, 2)?,
                "mu_XW" => p.mu_xw = v.matrix(key, 2, 5)?,
                "mu_UW" => p.mu_uw = v.vector(key, 2)?,
                "sigma_W2" => p.sigma_w2 = v.matrix(key, 2, 2)?,
                "mu_AY" => p.mu_ay = v.scalar(key)?,
                "mu_WY" => p.mu_wy = v.vector(key, 2)?,
                "mu_XY" => p.mu_xy = v.vector(key, 5)?,
                "mu_UY" => p.mu_uy = v.collapsed_scalar(key)?,
                "sigma_Y2" => p.sigma_y2 = v.scalar(key)?,
                _ => return Err(unknown_key(Scenario::MultidimProxies2, key, SCENARIO2_KEYS)),
            }
        }
        if p.sigma_u < 0.0 {
            return Err(Error::Config("sigma_U must be nonnegative".to_string()));
        }
        if p.sigma_y2 < 0.0 {
            return Err(Error::Config("sigma_Y2 must be nonnegative".to_string()));
        }
        Ok(p)
    }
}

/// Scenario 2. Draw order per record: `U` (1 normal), `X | U` (5 normals),
/// `A` (1 uniform), `Z` (2 normals), `W` (2 normals), outcome noise
/// (1 normal). The treatment model is
/// `Pr(A=1|X,U) = 1/(1 + exp(t_A + t_X'X + t_Z'(mu_AZ + mu_XZ X + mu_UZ U) + t_Z' sigma_Z2 t_Z / 2))`
/// with `t_A = −t_Z' mu_AZ − t_Z' sigma_Z2 t_Z = −0.981`, evaluated verbatim.
fn generate_multidim(cfg: &ScenarioConfig) -> Result<ProximalDataset> {
    let p = MultidimParams::resolve(&cfg.overrides)?;
    let x_s = MvnSampler::new(Array1::zeros(5), p.sigma_x2.clone())
        .map_err(|e| Error::Config(format!("sigma_X2: {e}")))?;
    let z_s = MvnSampler::new(Array1::zeros(2), p.sigma_z2.clone())
        .map_err(|e| Error::Config(format!("sigma_Z2: {e}")))?;
    let w_s = MvnSampler::new(Array1::zeros(2), p.sigma_w2.clone())
        .map_err(|e| Error::Config(format!("sigma_W2: {e}")))?;
    let quad = 0.5 * p.t_z.dot(&p.sigma_z2.dot(&p.t_z));

    let n = cfg.n;
    let mut x = Array2::zeros((n, 5));
    let mut z = Array2::zeros((n, 2));
    let mut w = Array2::zeros((n, 2));
    let mut a = Array1::zeros(n);
    let mut y = Array1::zeros(n);
    let mut rng = CounterRng::new(cfg.seed);

    for i in 0..n {
        let ui = p.sigma_u * rng.standard_normal();
        let xi = x_s.sample_with_mean(&(&p.mu_ux * ui), &mut rng);
        let z_mean = &p.mu_xz.dot(&xi) + &(&p.mu_uz * ui);
        let arg = p.t_a + p.t_x.dot(&xi) + p.t_z.dot(&(&p.mu_az + &z_mean)) + quad;
        let prob = 1.0 / (1.0 + arg.exp());
        let ai = if rng.next_f64() < prob { 1.0 } else { 0.0 };
        let zi = z_s.sample_with_mean(&(&(&p.mu_az * ai) + &z_mean), &mut rng);
        let w_mean = &p.mu_xw.dot(&xi) + &(&p.mu_uw * ui);
        let wi = w_s.sample_with_mean(&w_mean, &mut rng);
        let yi = p.mu_ay * ai
            + p.mu_wy.dot(&wi)
            + p.mu_xy.dot(&xi)
            + p.mu_uy * ui
            + p.sigma_y2.sqrt() * rng.standard_normal();

        x.row_mut(i).assign(&xi);
        z.row_mut(i).assign(&zi);
        w.row_mut(i).assign(&wi);
        a[i] = ai;
        y[i] = yi;
    }
    ProximalDataset::new(x, z, w, a, y)
}

// ---------------------------------------------------------------------------
// Scenario 3: nonlinear bridges
// ---------------------------------------------------------------------------

/// Scenario 3. Draw order per record: `U, X₁, X₂` (3 normals), `A`
/// (1 uniform), `Z` (1 normal), `W` (1 normal), outcome noise (1 normal).
///
/// - `Pr(A=1|X,U) = 1/(1 + exp(−0.25 − 0.2X₁ − 0.3X₂ − 0.1X₁³ − 0.05X₂³ − 0.25U + 0.1U³))`
/// - `Z ~ N(0.5 + 0.5A + 0.2X₁ − 0.2X₂ + 0.75U, 1)`
/// - `W ~ N(0.3 + 0.35X₁ + 0.25X₂ − 0.75U, 1)`
/// - `Y ~ N(−0.5 + A + 0.25X₁ − 0.2X₂ − 0.5AX₁ + 0.3AX₂ − 0.025X₁³ + 0.03X₂³
///   + bare_x·(X₁+X₂) − 0.3U + 0.25AU + 0.025U³, 1)`, `bare_x = 0` unless overridden.
fn generate_nonlinear(cfg: &ScenarioConfig) -> Result<ProximalDataset> {
    let mut bare_x = 0.0;
    for (key, v) in &cfg.overrides {
        match key.as_str() {
            "bare_x" => bare_x = v.scalar(key)?,
            _ => return Err(unknown_key(Scenario::NonlinearBridges3, key, &["bare_x"])),
        }
    }

    let n = cfg.n;
    let mut x = Array2::zeros((n, 2));
    let mut z = Array2::zeros((n, 1));
    let mut w = Array2::zeros((n, 1));
    let mut a = Array1::zeros(n);
    let mut y = Array1::zeros(n);
    let mut rng = CounterRng::new(cfg.seed);

    for i in 0..n {
        let ui = rng.standard_normal();
        let x1 = rng.standard_normal();
        let x2 = rng.standard_normal();
        let arg = -0.25 - 0.2 * x1 - 0.3 * x2 - 0.1 * x1.powi(3) - 0.05 * x2.powi(3)
            - 0.25 * ui
            + 0.1 * ui.powi(3);
        let prob = 1.0 / (1.0 + arg.exp());
        let ai = if rng.next_f64() < prob { 1.0 } else { 0.0 };
        let zi = 0.5 + 0.5 * ai + 0.2 * x1 - 0.2 * x2 + 0.75 * ui + rng.standard_normal();
        let wi = 0.3 + 0.35 * x1 + 0.25 * x2 - 0.75 * ui + rng.standard_normal();
        let y_mean = -0.5 + ai + 0.25 * x1 - 0.2 * x2 - 0.5 * ai * x1 + 0.3 * ai * x2
            - 0.025 * x1.powi(3)
            + 0.03 * x2.powi(3)
            + bare_x * (x1 + x2)
            - 0.3 * ui
            + 0.25 * ai * ui
            + 0.025 * ui.powi(3);
        let yi = y_mean + rng.standard_normal();

        x[[i, 0]] = x1;
        x[[i, 1]] = x2;
        z[[i, 0]] = zi;
        w[[i, 0]] = wi;
        a[i] = ai;
        y[i] = yi;
    }
    ProximalDataset::new(x, z, w, a, y)
}

// ---------------------------------------------------------------------------
// Oracle outcome bridge (scenario 1)
// ---------------------------------------------------------------------------

/// Fits the linear outcome bridge `h(w, a, x) = β₀ + β₁w + β₂a + β₃x₁ + β₄x₂`
/// of scenario 1 by two-stage least squares with instruments
/// `(1, Z, A, X₁, X₂)`: solves `Ê[g d']β = Ê[g Y]` where `d = (1, W, A, X₁, X₂)`.
///
/// Scenario 1's bridge equation has this exact linear solution
/// (population coefficients `(b_0, b_w, b_a, b_x)` = `(2, 4, 2, 0.25, 0.25)`),
/// so at large `n_oracle` (10⁵ or more recommended) the returned vector is a
/// near-oracle nuisance for double-robustness experiments. Coefficient order:
/// intercept, `W`, `A`, `X₁`, `X₂`.
pub fn oracle_h_bridge(scenario: Scenario, n_oracle: usize, seed: u64) -> Result<Array1<f64>> {
    if scenario != Scenario::LinearGaussian1 {
        return Err(Error::InvalidInput(format!(
            "the linear oracle bridge is defined for scenario linear_gaussian_1 only, got {}",
            scenario.name()
        )));
    }
    if n_oracle < 100 {
        return Err(Error::InvalidInput(
            "oracle bridge regression needs n_oracle >= 100".to_string(),
        ));
    }
    let ds = generate(&ScenarioConfig::new(scenario, n_oracle, seed))?;
    let nf = n_oracle as f64;
    let mut gtd = Array2::<f64>::zeros((5, 5));
    let mut gty = Array1::<f64>::zeros(5);
    for i in 0..n_oracle {
        let g = [1.0, ds.z[[i, 0]], ds.a[i], ds.x[[i, 0]], ds.x[[i, 1]]];
        let d = [1.0, ds.w[[i, 0]], ds.a[i], ds.x[[i, 0]], ds.x[[i, 1]]];
        for r in 0..5 {
            for c in 0..5 {
                gtd[[r, c]] += g[r] * d[c] / nf;
            }
            gty[r] += g[r] * ds.y[i] / nf;
        }
    }
    gtd.solve(&gty)
        .map_err(|e| Error::Numeric(format!("singular oracle bridge design: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(scenario: Scenario, n: usize, seed: u64) -> ScenarioConfig {
        ScenarioConfig::new(scenario, n, seed)
    }

    fn sample_cov(a: &Array1<f64>, b: &Array1<f64>) -> f64 {
        let (ma, mb) = (a.mean().unwrap(), b.mean().unwrap());
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| (x - ma) * (y - mb))
            .sum::<f64>()
            / (a.len() as f64 - 1.0)
    }

    #[test]
    fn rejects_empty_and_accepts_single_record() {
        for s in [
            Scenario::LinearGaussian1,
            Scenario::MultidimProxies2,
            Scenario::NonlinearBridges3,
        ] {
            assert!(generate(&cfg(s, 0, 0)).is_err());
            let ds = generate(&cfg(s, 1, 0)).unwrap();
            assert_eq!(ds.n(), 1);
            assert!(ds.a[0] == 0.0 || ds.a[0] == 1.0);
            assert!(ds.y[0].is_finite());
        }
    }

    #[test]
    fn deterministic_in_seed() {
        for s in [
            Scenario::LinearGaussian1,
            Scenario::MultidimProxies2,
            Scenario::NonlinearBridges3,
        ] {
            let d1 = generate(&cfg(s, 64, 9)).unwrap();
            let d2 = generate(&cfg(s, 64, 9)).unwrap();
            assert_eq!(d1.y, d2.y);
            assert_eq!(d1.x, d2.x);
            assert_eq!(d1.z, d2.z);
            assert_eq!(d1.w, d2.w);
            assert_eq!(d1.a, d2.a);
            let d3 = generate(&cfg(s, 64, 10)).unwrap();
            assert_ne!(d1.y, d3.y);
        }
    }

    #[test]
    fn scenario1_moments_match_design() {
        let ds = generate(&cfg(Scenario::LinearGaussian1, 100_000, 3)).unwrap();
        let z = ds.z.column(0).to_owned();
        let w = ds.w.column(0).to_owned();
        // cov(Z, W) = s_zw + residual covariance induced by shared (A, X)
        // mean shifts; the latter is below 0.01 for these coefficients, so
        // the design value 0.25 holds within the Monte Carlo tolerance.
        let observed = sample_cov(&z, &w);
        assert!(
            (observed - 0.25).abs() < 0.02,
            "cov(Z,W) = {observed}, expected ~0.25"
        );

        // The W channel mean follows the printed coefficients:
        // E[W] = mu_0 + mu_a E[A] + mu_x' E[X].
        let mean_a = ds.a.mean().unwrap();
        let mean_x = [ds.x.column(0).mean().unwrap(), ds.x.column(1).mean().unwrap()];
        let predicted = 0.25 + 0.25 * mean_a + 0.25 * (mean_x[0] + mean_x[1]);
        let observed_w = w.mean().unwrap();
        assert!(
            (observed_w - predicted).abs() < 0.02,
            "mean W = {observed_w}, design predicts {predicted}"
        );
        // X ~ N((0.25, 0.25), 0.0625 I).
        assert!((mean_x[0] - 0.25).abs() < 0.01);
        let var_x0 = sample_cov(&ds.x.column(0).to_owned(), &ds.x.column(0).to_owned());
        assert!((var_x0 - 0.0625).abs() < 0.005);
    }

    #[test]
    fn scenario1_outcome_noise_is_unit_normal() {
        // Setting sigma_y = 0 under the same seed isolates the additive
        // outcome noise: the Y difference between the two runs is exactly
        // the standard-normal noise draw of each record.
        let n = 50_000;
        let noisy = generate(&cfg(Scenario::LinearGaussian1, n, 17)).unwrap();
        let mut c = cfg(Scenario::LinearGaussian1, n, 17);
        c.overrides
            .insert("sigma_y".to_string(), ParamValue::Scalar(0.0));
        let noiseless = generate(&c).unwrap();
        let eps = &noisy.y - &noiseless.y;
        let mean = eps.mean().unwrap();
        let var = sample_cov(&eps, &eps);
        assert!(mean.abs() < 0.02, "noise mean {mean}");
        assert!((var - 1.0).abs() < 0.03, "noise variance {var}");
        assert_eq!(noisy.a, noiseless.a);
    }

    #[test]
    fn scenario2_treatment_prevalence_and_intercept_identity() {
        let ds = generate(&cfg(Scenario::MultidimProxies2, 100_000, 5)).unwrap();
        let prevalence = ds.a.mean().unwrap();
        assert!(
            prevalence > 0.2 && prevalence < 0.8,
            "Pr(A=1) = {prevalence}"
        );
        assert_eq!(ds.x.ncols(), 5);
        assert_eq!(ds.z.ncols(), 2);
        assert_eq!(ds.w.ncols(), 2);

        // t_A = -t_Z' mu_AZ - t_Z' sigma_Z2 t_Z at the default parameters.
        let t_z: Array1<f64> = array![0.9, 0.4];
        let mu_az: Array1<f64> = array![0.5, 0.6];
        let sigma_z2 = Array2::eye(2) * 0.3;
        let t_a = -t_z.dot(&mu_az) - t_z.dot(&sigma_z2.dot(&t_z));
        assert!((t_a - (-0.981)).abs() < 1e-6, "t_A identity gives {t_a}");
    }

    #[test]
    fn scenario3_truth_by_arm_forced_monte_carlo() {
        // E[Y(1) - Y(0)] from the outcome mean directly: the cubic terms
        // cancel and the interactions average to zero over standard-normal
        // X and U, leaving the main effect 1.
        let mut rng = CounterRng::new(123);
        let reps = 1_000_000;
        let mut acc = 0.0;
        for _ in 0..reps {
            let u = rng.standard_normal();
            let x1 = rng.standard_normal();
            let x2 = rng.standard_normal();
            // difference of the conditional means at a=1 vs a=0
            acc += 1.0 - 0.5 * x1 + 0.3 * x2 + 0.25 * u;
        }
        let ace = acc / reps as f64;
        assert!((ace - true_ace(Scenario::NonlinearBridges3)).abs() < 0.01);
    }

    #[test]
    fn true_ace_values() {
        assert_eq!(true_ace(Scenario::LinearGaussian1), 2.0);
        assert_eq!(true_ace(Scenario::MultidimProxies2), 2.0);
        assert_eq!(true_ace(Scenario::NonlinearBridges3), 1.0);
    }

    #[test]
    fn unknown_override_key_is_rejected() {
        let mut c = cfg(Scenario::LinearGaussian1, 10, 0);
        c.overrides
            .insert("b_q".to_string(), ParamValue::Scalar(1.0));
        let err = generate(&c).unwrap_err();
        assert!(err.to_string().contains("b_q"), "{err}");
    }

    #[test]
    fn non_psd_sigma_override_is_rejected() {
        let mut c = cfg(Scenario::LinearGaussian1, 10, 0);
        c.overrides.insert(
            "Sigma".to_string(),
            ParamValue::Matrix(vec![
                vec![1.0, 2.0, 0.0],
                vec![2.0, 1.0, 0.0],
                vec![0.0, 0.0, 1.0],
            ]),
        );
        let err = generate(&c).unwrap_err();
        assert!(err.to_string().contains("Sigma"), "{err}");
    }

    #[test]
    fn b_a_override_shifts_treated_outcomes_exactly() {
        let base = generate(&cfg(Scenario::LinearGaussian1, 200, 7)).unwrap();
        let mut c = cfg(Scenario::LinearGaussian1, 200, 7);
        c.overrides
            .insert("b_a".to_string(), ParamValue::Scalar(3.0));
        let shifted = generate(&c).unwrap();
        for i in 0..200 {
            let expect = base.y[i] + base.a[i]; // (3.0 - 2.0) * a
            assert!((shifted.y[i] - expect).abs() < 1e-12);
            assert_eq!(base.a[i], shifted.a[i]);
        }
    }

    #[test]
    fn bare_x_override_reinstates_linear_term_exactly() {
        let base = generate(&cfg(Scenario::NonlinearBridges3, 300, 11)).unwrap();
        let mut c = cfg(Scenario::NonlinearBridges3, 300, 11);
        c.overrides
            .insert("bare_x".to_string(), ParamValue::Scalar(-1.0));
        let shifted = generate(&c).unwrap();
        for i in 0..300 {
            let expect = base.y[i] - (base.x[[i, 0]] + base.x[[i, 1]]);
            assert!((shifted.y[i] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn oracle_bridge_recovers_design_coefficients() {
        let beta = oracle_h_bridge(Scenario::LinearGaussian1, 200_000, 1).unwrap();
        // (intercept, W, A, X1, X2) = (b0, bw, ba, bx1, bx2)
        let expect = [2.0, 4.0, 2.0, 0.25, 0.25];
        for (got, want) in beta.iter().zip(expect.iter()) {
            assert!(
                (got - want).abs() < 0.1,
                "oracle coefficients {beta:?}, expected ~{expect:?}"
            );
        }
        // Arm contrast of the linear bridge is its A coefficient.
        assert!((beta[2] - true_ace(Scenario::LinearGaussian1)).abs() < 0.05);

        // Defining property: the instrumented residual moments vanish.
        let ds = generate(&cfg(Scenario::LinearGaussian1, 200_000, 1)).unwrap();
        let mut moments = [0.0f64; 5];
        for i in 0..ds.n() {
            let d = [1.0, ds.w[[i, 0]], ds.a[i], ds.x[[i, 0]], ds.x[[i, 1]]];
            let resid = ds.y[i] - beta.iter().zip(d.iter()).map(|(b, v)| b * v).sum::<f64>();
            let g = [1.0, ds.z[[i, 0]], ds.a[i], ds.x[[i, 0]], ds.x[[i, 1]]];
            for r in 0..5 {
                moments[r] += g[r] * resid / ds.n() as f64;
            }
        }
        let max_moment = moments.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(max_moment < 0.01, "residual moments {moments:?}");
    }

    #[test]
    fn oracle_bridge_stable_across_seeds() {
        let b1 = oracle_h_bridge(Scenario::LinearGaussian1, 150_000, 2).unwrap();
        let b2 = oracle_h_bridge(Scenario::LinearGaussian1, 150_000, 3).unwrap();
        for (u, v) in b1.iter().zip(b2.iter()) {
            assert!((u - v).abs() < 0.05, "{b1:?} vs {b2:?}");
        }
    }

    #[test]
    fn oracle_bridge_rejects_other_scenarios() {
        assert!(oracle_h_bridge(Scenario::MultidimProxies2, 100_000, 0).is_err());
        assert!(oracle_h_bridge(Scenario::NonlinearBridges3, 100_000, 0).is_err());
    }

    #[test]
    fn scenario_ids_round_trip() {
        for s in [
            Scenario::LinearGaussian1,
            Scenario::MultidimProxies2,
            Scenario::NonlinearBridges3,
        ] {
            assert_eq!(Scenario::from_id(s.id()).unwrap(), s);
        }
        assert!(Scenario::from_id(4).is_err());
    }
}
