//! Cross-validated hyperparameter selection on realistic bridge problems.

use minimax_dr::kernel::{Bandwidth, KernelConfig};
use minimax_dr::minimax::MinimaxProblem;
use minimax_dr::scenarios::{generate, Scenario, ScenarioConfig};
use minimax_dr::tuning::{tune, HyperGrid, HyperPoint};
use ndarray::prelude::*;

/// Builder assembling the outcome-bridge problem (arm 1) over a row subset,
/// with median-multiple bandwidths resolved against the full dataset so all
/// folds share one kernel geometry.
fn h_bridge_builder(
    n: usize,
    seed: u64,
) -> impl Fn(&[usize], &HyperPoint) -> minimax_dr::Result<MinimaxProblem> + Sync {
    let ds = generate(&ScenarioConfig::new(Scenario::LinearGaussian1, n, seed)).unwrap();
    let wx = ds.features_wx();
    let zx = ds.features_zx();
    let med_wx = Bandwidth::MedianMultiple(1.0).resolve(wx.view()).unwrap();
    let med_zx = Bandwidth::MedianMultiple(1.0).resolve(zx.view()).unwrap();
    move |rows: &[usize], hp: &HyperPoint| {
        let resolve = |b: &Bandwidth, med: f64| match b {
            Bandwidth::Fixed(v) => *v,
            Bandwidth::MedianMultiple(m) => m * med,
        };
        let ind: Array1<f64> = rows
            .iter()
            .map(|&i| if ds.a[i] == 1.0 { 1.0 } else { 0.0 })
            .collect();
        let offsets: Array1<f64> = rows
            .iter()
            .zip(ind.iter())
            .map(|(&i, &d)| d * ds.y[i])
            .collect();
        Ok(MinimaxProblem {
            target_points: wx.select(Axis(0), rows),
            adversary_points: zx.select(Axis(0), rows),
            weights: ind.mapv(|v| -v),
            offsets,
            target_kernel: KernelConfig::gaussian(resolve(&hp.bandwidth_target, med_wx))?,
            adversary_kernel: KernelConfig::gaussian(resolve(&hp.bandwidth_adversary, med_zx))?,
            lambda_target: hp.lambda_target,
            lambda_adversary: hp.lambda_adversary,
        })
    }
}

#[test]
fn tuning_rejects_absurd_overregularization() {
    // lambda_target = 1e6 shrinks the bridge to ~0, so its held-out
    // projected risk stays at the raw-offset level; 1e-3 fits the moment and
    // must win.
    let n = 800;
    let builder = h_bridge_builder(n, 77);
    let grid = HyperGrid {
        lambda_target_values: vec![1e-3, 1e6],
        lambda_adversary_values: vec![1e-2],
        bandwidth_target_values: vec![Bandwidth::MedianMultiple(1.0)],
        bandwidth_adversary_values: vec![Bandwidth::MedianMultiple(1.0)],
    };
    let tuned = tune(&builder, n, &grid, 4, 11).unwrap();
    assert_eq!(tuned.point.lambda_target, 1e-3);
    assert_eq!(tuned.table.len(), 2);
    let score_of = |lt: f64| {
        tuned
            .table
            .iter()
            .find(|g| g.point.lambda_target == lt)
            .and_then(|g| g.score)
            .unwrap()
    };
    assert!(
        score_of(1e-3) < score_of(1e6),
        "cv scores: {} vs {}",
        score_of(1e-3),
        score_of(1e6)
    );
}

#[test]
fn tuning_scores_every_point_and_is_deterministic() {
    let n = 400;
    let builder = h_bridge_builder(n, 3);
    let grid = HyperGrid {
        lambda_target_values: vec![1e-4, 1e-2],
        lambda_adversary_values: vec![1e-3, 1e-1],
        bandwidth_target_values: vec![Bandwidth::MedianMultiple(1.0), Bandwidth::Fixed(2.0)],
        bandwidth_adversary_values: vec![Bandwidth::MedianMultiple(1.0)],
    };
    let first = tune(&builder, n, &grid, 5, 101).unwrap();
    assert_eq!(first.table.len(), 8);
    for row in &first.table {
        assert!(
            row.score.is_some(),
            "grid point failed: {:?}",
            row.error
        );
        assert!(row.score.unwrap() >= -1e-12);
        assert!(row.resolved_bandwidth_target > 0.0);
    }
    let second = tune(&builder, n, &grid, 5, 101).unwrap();
    assert_eq!(first.point, second.point);
    for (a, b) in first.table.iter().zip(second.table.iter()) {
        assert_eq!(a.score, b.score);
    }

    // Idempotent re-scoring: a fresh search over just the winning point
    // reproduces its k-fold mean score.
    let winner_only = HyperGrid {
        lambda_target_values: vec![first.point.lambda_target],
        lambda_adversary_values: vec![first.point.lambda_adversary],
        bandwidth_target_values: vec![first.point.bandwidth_target],
        bandwidth_adversary_values: vec![first.point.bandwidth_adversary],
    };
    let rescored = tune(&builder, n, &winner_only, 5, 101).unwrap();
    assert!(
        (rescored.score - first.score).abs() <= 1e-12 * first.score.abs().max(1.0),
        "re-scoring the chosen point gave {} instead of {}",
        rescored.score,
        first.score
    );
}
