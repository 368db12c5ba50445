//! Select bridge regularizers and bandwidths by cross-validation.
//!
//! A minimax bridge fit has four hyperparameters: the Tikhonov penalties on
//! the learned function and on its adversary, and the two kernel
//! bandwidths. [`minimax_dr::tune`] searches a grid by k-fold
//! cross-validation, scoring each candidate with the *projected risk*: the
//! adversary's best-response value on the held-out fold, i.e. how much
//! moment violation an adversary can still expose in a bridge fit with
//! those settings. Lower is better, and the score needs no ground truth —
//! it is computable on real data.
//!
//! The example tunes the arm-1 outcome bridge of the nonlinear design over
//! a 12-point grid, prints the full score table, and contrasts the winner
//! with a deliberately over-regularized candidate.
//!
//! ```bash
//! cargo run --release -p minimax-dr --example tune_hyperparams
//! ```
//!
//! The binary exposes the same search over all four bridges at once:
//! `minimax-dr tune --config tune.toml`.

use minimax_dr::kernel::{Bandwidth, KernelConfig};
use minimax_dr::minimax::MinimaxProblem;
use minimax_dr::scenarios::{generate, Scenario, ScenarioConfig};
use minimax_dr::tuning::{tune, HyperGrid, HyperPoint};
use minimax_dr::Result;
use ndarray::prelude::*;

fn main() -> Result<()> {
    let n = 320;
    let data = generate(&ScenarioConfig::new(Scenario::NonlinearBridges3, n, 7))?;

    // Median bandwidths are resolved once on the full feature matrices so
    // every fold and every grid point shares one reference geometry;
    // `MedianMultiple` grid values scale these references.
    let wx = data.features_wx();
    let zx = data.features_zx();
    let median_wx = Bandwidth::MedianMultiple(1.0).resolve(wx.view())?;
    let median_zx = Bandwidth::MedianMultiple(1.0).resolve(zx.view())?;
    println!("median bandwidths: target (W,X) {median_wx:.3}, adversary (Z,X) {median_zx:.3}");

    // The builder assembles the arm-1 outcome-bridge problem over whatever
    // row subset the tuner asks for: training rows while fitting, held-out
    // rows while scoring.
    let builder = move |rows: &[usize], hp: &HyperPoint| -> Result<MinimaxProblem> {
        let resolve = |b: &Bandwidth, median: f64| match b {
            Bandwidth::Fixed(v) => *v,
            Bandwidth::MedianMultiple(m) => m * median,
        };
        let indicator: Array1<f64> = rows
            .iter()
            .map(|&i| if data.a[i] == 1.0 { 1.0 } else { 0.0 })
            .collect();
        let offsets: Array1<f64> = rows
            .iter()
            .zip(indicator.iter())
            .map(|(&i, &d)| d * data.y[i])
            .collect();
        Ok(MinimaxProblem {
            target_points: wx.select(Axis(0), rows),
            adversary_points: zx.select(Axis(0), rows),
            weights: indicator.mapv(|v| -v),
            offsets,
            target_kernel: KernelConfig::gaussian(resolve(&hp.bandwidth_target, median_wx))?,
            adversary_kernel: KernelConfig::gaussian(resolve(&hp.bandwidth_adversary, median_zx))?,
            lambda_target: hp.lambda_target,
            lambda_adversary: hp.lambda_adversary,
        })
    };

    let grid = HyperGrid {
        lambda_target_values: vec![1e-4, 1e-2, 1e2],
        lambda_adversary_values: vec![1e-3, 1e-1],
        bandwidth_target_values: vec![
            Bandwidth::MedianMultiple(0.5),
            Bandwidth::MedianMultiple(1.0),
        ],
        bandwidth_adversary_values: vec![Bandwidth::MedianMultiple(1.0)],
    };

    let tuned = tune(&builder, n, &grid, 4, 11)?;

    println!();
    println!(
        "{:>10} {:>10} {:>8} {:>8}  {:>14}",
        "λ_target", "λ_adv", "bw_tgt", "bw_adv", "cv score"
    );
    for row in &tuned.table {
        let score = row
            .score
            .map(|s| format!("{s:>14.6}"))
            .unwrap_or_else(|| format!("{:>14}", "failed"));
        let marker = if row.point == tuned.point { "  <- selected" } else { "" };
        println!(
            "{:>10.0e} {:>10.0e} {:>8.3} {:>8.3} {score}{marker}",
            row.point.lambda_target,
            row.point.lambda_adversary,
            row.resolved_bandwidth_target,
            row.resolved_bandwidth_adversary,
        );
    }
    println!();
    println!(
        "selected: λ_target {:.0e}, λ_adversary {:.0e}, bandwidths {:.3}/{:.3}, score {:.6}",
        tuned.point.lambda_target,
        tuned.point.lambda_adversary,
        tuned.resolved_bandwidth_target,
        tuned.resolved_bandwidth_adversary,
        tuned.score
    );

    // A λ_target of 1e2 shrinks the bridge toward zero, leaving the raw
    // moment violation for the adversary to expose; cross-validation must
    // not pick it.
    assert!(
        tuned.point.lambda_target < 1e2,
        "cross-validation selected the over-shrunk candidate"
    );
    Ok(())
}
