//! Shared machinery for the integration suites.
//!
//! - [`cached_rows`] produces Monte Carlo replication batches through the
//!   public `cmd_simulate` entry point in chunks of ten, cached on disk under
//!   `target/mc_cache`. Chunking makes interrupted runs resumable and lets
//!   several test targets share batches: replication `i` of a study with base
//!   seed `s` always uses seed `s + i`, so a chunk started at offset `o` with
//!   base seed `s + o` reproduces rows `o..` of the full study bit for bit.
//! - [`oracle`] minimizes the regularized minimax objective without touching
//!   the closed form, for independent verification of `fit_nuisance`.

#![allow(dead_code)]

use std::path::PathBuf;

use minimax_dr::cli::{cmd_simulate, RepRow, RunConfig, SimulationSummary};
use minimax_dr::scenarios::Scenario;

/// Root of the on-disk replication cache (inside the build directory so
/// `cargo clean` clears it).
fn cache_root() -> PathBuf {
    match std::env::var_os("CARGO_TARGET_DIR") {
        Some(dir) => PathBuf::from(dir).join("mc_cache"),
        None => PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../target/mc_cache"),
    }
}

fn fnv64(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf29ce484222325u64;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Replication rows for a simulation study run at library-default estimation
/// settings, loaded from the cache where valid and computed (and cached)
/// otherwise.
pub fn cached_rows(scenario: u8, n: usize, reps: usize, base_seed: u64) -> Vec<RepRow> {
    const CHUNK: usize = 10;
    let mut rows = Vec::with_capacity(reps);
    let mut start = 0usize;
    while start < reps {
        let take = CHUNK.min(reps - start);
        rows.extend(chunk_rows(scenario, n, take, base_seed + start as u64, start));
        start += take;
    }
    rows
}

fn chunk_rows(scenario: u8, n: usize, take: usize, chunk_seed: u64, offset: usize) -> Vec<RepRow> {
    let mut run = RunConfig {
        scenario: Some(scenario),
        n: Some(n),
        replications: Some(take),
        seed: Some(chunk_seed),
        ..RunConfig::default()
    };
    let config_json =
        serde_json::to_string(&(&run.ace_config(), scenario, n, take, chunk_seed)).expect("json");
    let dir = cache_root().join(format!(
        "s{scenario}_n{n}_seed{chunk_seed}_r{take}_{:016x}",
        fnv64(config_json.as_bytes())
    ));

    if let Some(cached) = load_chunk(&dir, &run) {
        return reindex(cached, offset);
    }

    let started = std::time::Instant::now();
    run.out = Some(dir.clone());
    let summary = cmd_simulate(&run).unwrap_or_else(|e| {
        panic!(
            "simulation chunk failed (scenario {scenario}, n={n}, seed={chunk_seed}): {e}"
        )
    });
    eprintln!(
        "mc_cache: computed scenario {scenario} n={n} seed={chunk_seed} reps={take} in {:.0}s",
        started.elapsed().as_secs_f64()
    );
    reindex(summary.rows, offset)
}

/// Loads a previously computed chunk if its summary exists and describes
/// exactly the requested study (same scenario, sizes, seed, and estimation
/// settings). A partially written or stale directory is recomputed.
fn load_chunk(dir: &std::path::Path, run: &RunConfig) -> Option<Vec<RepRow>> {
    let text = std::fs::read_to_string(dir.join("summary.json")).ok()?;
    let summary: SimulationSummary = serde_json::from_str(&text).ok()?;
    let scenario = Scenario::from_id(run.scenario.expect("set")).expect("valid id");
    let take = run.replications.expect("set");
    let valid = summary.scenario == scenario.name()
        && summary.n == run.n.expect("set")
        && summary.base_seed == run.seed.expect("set")
        && summary.replications == take
        && summary.rows.len() == take
        && serde_json::to_string(&summary.ace).expect("json")
            == serde_json::to_string(&run.ace_config()).expect("json");
    if valid {
        Some(summary.rows)
    } else {
        None
    }
}

fn reindex(mut rows: Vec<RepRow>, offset: usize) -> Vec<RepRow> {
    for row in &mut rows {
        row.rep += offset;
    }
    rows
}

/// Mean of the successful estimates selected by `getter`, with its Monte
/// Carlo standard error.
pub fn mean_and_se(rows: &[RepRow], getter: fn(&RepRow) -> Option<f64>) -> (f64, f64) {
    let vals: Vec<f64> = rows.iter().filter_map(getter).collect();
    assert!(
        vals.len() >= 2,
        "need at least two successful replications, got {}",
        vals.len()
    );
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Root-mean-square error of the successful estimates around `truth`.
pub fn rmse(rows: &[RepRow], getter: fn(&RepRow) -> Option<f64>, truth: f64) -> f64 {
    let vals: Vec<f64> = rows.iter().filter_map(getter).collect();
    assert!(!vals.is_empty());
    (vals.iter().map(|v| (v - truth).powi(2)).sum::<f64>() / vals.len() as f64).sqrt()
}

/// Independent minimization of the regularized minimax objective over dual
/// coefficients: nonlinear conjugate gradient (Polak–Ribière with restarts)
/// on central-difference gradients with exact parabolic line search. The
/// objective is a convex quadratic in the dual vector, so each 1-D
/// restriction is an exact parabola — three evaluations locate its
/// minimizer — and CG reaches the global minimum in about `n` line searches
/// per restart cycle. Shares no code with the closed form.
pub mod oracle {
    use minimax_dr::minimax::{regularized_objective, MinimaxProblem};
    use ndarray::prelude::*;

    fn numerical_gradient(alpha: &Array1<f64>, p: &MinimaxProblem) -> Array1<f64> {
        let h = 1e-6;
        let mut grad = Array1::zeros(alpha.len());
        let mut probe = alpha.clone();
        for j in 0..alpha.len() {
            probe[j] = alpha[j] + h;
            let up = regularized_objective(probe.view(), p).unwrap();
            probe[j] = alpha[j] - h;
            let down = regularized_objective(probe.view(), p).unwrap();
            probe[j] = alpha[j];
            grad[j] = (up - down) / (2.0 * h);
        }
        grad
    }

    /// Returns the minimizing dual vector and the objective value it attains.
    pub fn descend(p: &MinimaxProblem, restarts: usize) -> (Array1<f64>, f64) {
        let n = p.n();
        let mut alpha = Array1::<f64>::zeros(n);
        let mut value = regularized_objective(alpha.view(), p).unwrap();
        let line_min = |alpha: &Array1<f64>, dir: &Array1<f64>, value: f64| -> (Array1<f64>, f64) {
            // Fit q(t) = a t^2 + b t + c through t = 0, s, 2s.
            let s = 1e-3;
            let q0 = value;
            let q1 = regularized_objective((alpha + &(s * dir)).view(), p).unwrap();
            let q2 = regularized_objective((alpha + &(2.0 * s * dir)).view(), p).unwrap();
            let a = (q2 - 2.0 * q1 + q0) / (2.0 * s * s);
            let b = (q1 - q0) / s - a * s;
            let t = if a > 0.0 { -b / (2.0 * a) } else { s };
            let candidate = alpha + &(t * dir);
            let cv = regularized_objective(candidate.view(), p).unwrap();
            if cv < value {
                (candidate, cv)
            } else {
                (alpha.clone(), value)
            }
        };
        for _ in 0..restarts {
            let mut grad = numerical_gradient(&alpha, p);
            let mut dir = grad.mapv(|g| -g);
            for _ in 0..(n + 2) {
                let dnorm = dir.dot(&dir).sqrt();
                if dnorm < 1e-14 {
                    break;
                }
                let (next, nv) = line_min(&alpha, &dir.mapv(|d| d / dnorm), value);
                alpha = next;
                value = nv;
                let new_grad = numerical_gradient(&alpha, p);
                let denom = grad.dot(&grad);
                if denom < 1e-28 {
                    break;
                }
                let beta = (new_grad.dot(&new_grad) - new_grad.dot(&grad)) / denom;
                let beta = beta.max(0.0);
                dir = new_grad.mapv(|g| -g) + beta * &dir;
                grad = new_grad;
            }
        }
        (alpha, value)
    }
}
