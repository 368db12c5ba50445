//! Configuration, file formats, and the `simulate | estimate | tune`
//! commands behind the `minimax-dr` binary.
//!
//! Every command is deterministic given its resolved configuration: outputs
//! embed that configuration, contain no timestamps, and rerunning a command
//! reproduces its files byte for byte.
//!
//! # Configuration file
//!
//! A single TOML file supplies defaults; command-line flags override it.
//! Every key has a default, so `minimax-dr simulate --scenario 1 --n 800`
//! works bare. Full schema:
//!
//! ```toml
//! scenario = 1            # 1 | 2 | 3
//! n = 800                 # records per dataset
//! replications = 100      # simulate only
//! folds = 5               # cross-fitting / cross-validation folds
//! seed = 0
//! standardize = false     # center/scale X, Z, W columns first
//! out = "out"             # output directory
//! data = "rhc.csv"        # estimate/tune input (estimate may take it positionally)
//!
//! [hyperparameters]
//! bandwidth_wx = { median_multiple = 1.0 }   # or { fixed = 35.0 }
//! bandwidth_zx = { median_multiple = 1.0 }   # or { fixed = 20.0 }
//! lambda_h_target = 1e-4
//! lambda_h_adversary = 1e-3
//! lambda_q_target = 1e-5
//! lambda_q_adversary = 1e-3
//!
//! [columns]               # CSV column mapping (estimate/tune)
//! x = ["x1", "x2"]
//! z = ["z1"]
//! w = ["w1"]
//! a = "a"
//! y = "y"
//!
//! [grid]                  # tune only; defaults to HyperGrid::default()
//! lambda_target_values = [1e-4, 1e-3, 1e-2, 1e-1]
//! lambda_adversary_values = [1e-4, 1e-3, 1e-2, 1e-1]
//! bandwidth_target_values = [{ median_multiple = 0.5 }, { median_multiple = 1.0 }]
//! bandwidth_adversary_values = [{ median_multiple = 1.0 }]
//!
//! [overrides]             # scenario parameter overrides (simulate)
//! b_a = 3.0
//! ```
//!
//! # CSV schema
//!
//! RFC-4180 with a header row. The export schema names columns
//! `x1..xp, z1..zd, w1..wd, a, y`; `a` must be 0/1. Imports with other
//! headers supply a mapping (`--columns "x=x1+x2,z=z1,w=w1,a=a,y=y"` or the
//! `[columns]` table); without one, columns are inferred by prefix
//! (`x*`/`z*`/`w*`) plus exact `a` and `y`.
//!
//! # Concurrency
//!
//! Simulation replications run on the global worker pool; the environment
//! variable `MINIMAX_DR_WORKERS` caps the number of worker threads.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use ndarray::prelude::*;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functional::sample_sd;
use crate::kernel::{median_heuristic, Bandwidth, KernelConfig};
use crate::minimax::MinimaxProblem;
use crate::proximal::{estimate_ace, AceConfig, AceResult, ProximalDataset};
use crate::rng::substream_seed;
use crate::scenarios::{generate, true_ace, ParamValue, Scenario, ScenarioConfig};
use crate::tuning::{tune, HyperGrid, HyperPoint, TunedHyperparams};

/// Name of the environment variable capping the worker-thread count.
pub const WORKERS_ENV: &str = "MINIMAX_DR_WORKERS";

// ---------------------------------------------------------------------------
// Command line
// ---------------------------------------------------------------------------

/// Minimax-kernel doubly robust estimation: simulation studies, CSV
/// estimation, and hyperparameter tuning.
#[derive(Debug, Parser)]
#[command(name = "minimax-dr", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a seeded Monte Carlo simulation study on a synthetic scenario.
    Simulate(CommonArgs),
    /// Estimate the ACE from a CSV dataset.
    Estimate(EstimateArgs),
    /// Cross-validate hyperparameters for both bridges and arms.
    Tune(CommonArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// TOML configuration file; flags override its keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Synthetic scenario id (1, 2, or 3).
    #[arg(long)]
    pub scenario: Option<u8>,
    /// Records per dataset.
    #[arg(long)]
    pub n: Option<usize>,
    /// Number of simulation replications.
    #[arg(long)]
    pub reps: Option<usize>,
    /// Base seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Cross-fitting / cross-validation folds.
    #[arg(long)]
    pub folds: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// CSV column mapping, e.g. "x=x1+x2,z=z1,w=w1,a=a,y=y".
    #[arg(long)]
    pub columns: Option<String>,
    /// Standardize X, Z, W columns before resolving bandwidths.
    #[arg(long)]
    pub standardize: bool,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Input CSV (may instead come from the config key `data`).
    pub data: Option<PathBuf>,
    #[command(flatten)]
    pub common: CommonArgs,
}

impl CommonArgs {
    /// Loads the config file (if any) and overlays the flags.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut run = match &self.config {
            Some(p) => RunConfig::from_toml_file(p)?,
            None => RunConfig::default(),
        };
        if let Some(v) = self.scenario {
            run.scenario = Some(v);
        }
        if let Some(v) = self.n {
            run.n = Some(v);
        }
        if let Some(v) = self.reps {
            run.replications = Some(v);
        }
        if let Some(v) = self.seed {
            run.seed = Some(v);
        }
        if let Some(v) = self.folds {
            run.folds = Some(v);
        }
        if let Some(v) = &self.out {
            run.out = Some(v.clone());
        }
        if let Some(v) = &self.columns {
            run.columns = Some(parse_columns_flag(v)?);
        }
        if self.standardize {
            run.standardize = Some(true);
        }
        Ok(run)
    }
}

/// Configures the global worker pool from [`WORKERS_ENV`]. Call once at
/// process start, before any parallel work.
pub fn init_workers() -> Result<()> {
    if let Ok(raw) = std::env::var(WORKERS_ENV) {
        let count: usize = raw.parse().map_err(|_| {
            Error::Config(format!("{WORKERS_ENV} must be a positive integer, got `{raw}`"))
        })?;
        if count == 0 {
            return Err(Error::Config(format!(
                "{WORKERS_ENV} must be a positive integer, got 0"
            )));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(count)
            .build_global()
            .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

/// Names of the dataset columns in a CSV file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnMapping {
    pub x: Vec<String>,
    pub z: Vec<String>,
    pub w: Vec<String>,
    pub a: String,
    pub y: String,
}

/// Fixed hyperparameters for estimation; unset keys fall back to
/// [`AceConfig::default`].
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperSettings {
    pub bandwidth_wx: Option<Bandwidth>,
    pub bandwidth_zx: Option<Bandwidth>,
    pub lambda_h_target: Option<f64>,
    pub lambda_h_adversary: Option<f64>,
    pub lambda_q_target: Option<f64>,
    pub lambda_q_adversary: Option<f64>,
}

/// One configuration for any command; every field has a default. Unknown
/// keys in the TOML file are rejected.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: Option<u8>,
    pub n: Option<usize>,
    pub replications: Option<usize>,
    pub folds: Option<usize>,
    pub seed: Option<u64>,
    pub standardize: Option<bool>,
    pub out: Option<PathBuf>,
    pub data: Option<PathBuf>,
    pub columns: Option<ColumnMapping>,
    pub hyperparameters: Option<HyperSettings>,
    pub grid: Option<HyperGrid>,
    pub overrides: Option<BTreeMap<String, ParamValue>>,
}

impl RunConfig {
    pub fn from_toml_file(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// The estimation settings implied by this configuration.
    pub fn ace_config(&self) -> AceConfig {
        let mut ace = AceConfig::default();
        if let Some(h) = &self.hyperparameters {
            if let Some(v) = h.bandwidth_wx {
                ace.bandwidth_wx = v;
            }
            if let Some(v) = h.bandwidth_zx {
                ace.bandwidth_zx = v;
            }
            if let Some(v) = h.lambda_h_target {
                ace.lambda_h_target = v;
            }
            if let Some(v) = h.lambda_h_adversary {
                ace.lambda_h_adversary = v;
            }
            if let Some(v) = h.lambda_q_target {
                ace.lambda_q_target = v;
            }
            if let Some(v) = h.lambda_q_adversary {
                ace.lambda_q_adversary = v;
            }
        }
        ace.folds = self.folds.unwrap_or(5);
        ace.seed = self.seed.unwrap_or(0);
        ace.standardize = self.standardize.unwrap_or(false);
        ace
    }

    fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    fn scenario(&self) -> Result<Scenario> {
        Scenario::from_id(self.scenario.unwrap_or(1))
    }
}

/// Parses the `--columns` flag: comma-separated `key=value` pairs with `+`
/// separating multiple columns, e.g. `x=x1+x2,z=z1,w=w1,a=a,y=y`. All five
/// keys are required.
pub fn parse_columns_flag(s: &str) -> Result<ColumnMapping> {
    let mut parts: BTreeMap<&str, Vec<String>> = BTreeMap::new();
    for piece in s.split(',') {
        let (key, val) = piece.split_once('=').ok_or_else(|| {
            Error::Config(format!("column mapping piece `{piece}` is not key=value"))
        })?;
        let cols: Vec<String> = val.split('+').map(|c| c.trim().to_string()).collect();
        if cols.iter().any(|c| c.is_empty()) {
            return Err(Error::Config(format!(
                "column mapping for `{key}` names an empty column"
            )));
        }
        if parts.insert(key.trim(), cols).is_some() {
            return Err(Error::Config(format!("duplicate column mapping key `{key}`")));
        }
    }
    let mut take = |key: &str| {
        parts
            .remove(key)
            .ok_or_else(|| Error::Config(format!("column mapping is missing `{key}=`")))
    };
    let (x, z, w, a, y) = (take("x")?, take("z")?, take("w")?, take("a")?, take("y")?);
    if let Some(extra) = parts.keys().next() {
        return Err(Error::Config(format!(
            "unknown column mapping key `{extra}` (expected x, z, w, a, y)"
        )));
    }
    let single = |name: &str, v: Vec<String>| -> Result<String> {
        if v.len() != 1 {
            return Err(Error::Config(format!(
                "column mapping `{name}` must name exactly one column"
            )));
        }
        Ok(v.into_iter().next().expect("checked length"))
    };
    Ok(ColumnMapping {
        x,
        z,
        w,
        a: single("a", a)?,
        y: single("y", y)?,
    })
}

/// Infers the mapping from the export schema: headers starting `x`/`z`/`w`
/// (in header order) plus exact `a` and `y`.
pub fn infer_mapping(headers: &[String]) -> Result<ColumnMapping> {
    let pick = |prefix: char| -> Vec<String> {
        headers
            .iter()
            .filter(|h| h.starts_with(prefix) && h.as_str() != "a" && h.as_str() != "y")
            .cloned()
            .collect()
    };
    let (x, z, w) = (pick('x'), pick('z'), pick('w'));
    let have = |name: &str| headers.iter().any(|h| h == name);
    if x.is_empty() || z.is_empty() || w.is_empty() || !have("a") || !have("y") {
        return Err(Error::Config(
            "cannot infer CSV columns (need x*/z*/w* plus a and y); pass --columns".to_string(),
        ));
    }
    Ok(ColumnMapping {
        x,
        z,
        w,
        a: "a".to_string(),
        y: "y".to_string(),
    })
}

// ---------------------------------------------------------------------------
// Dataset CSV
// ---------------------------------------------------------------------------

/// Writes a dataset in the export schema (`x1..xp, z1..zd, w1..wd, a, y`).
/// Numbers print in shortest round-trip form, so re-importing reproduces the
/// dataset exactly.
pub fn write_dataset_csv(ds: &ProximalDataset, path: &Path) -> Result<()> {
    let mut wtr = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = Vec::new();
    for (prefix, cols) in [("x", ds.x.ncols()), ("z", ds.z.ncols()), ("w", ds.w.ncols())] {
        for j in 1..=cols {
            header.push(format!("{prefix}{j}"));
        }
    }
    header.push("a".to_string());
    header.push("y".to_string());
    wtr.write_record(&header)?;
    for i in 0..ds.n() {
        let mut record: Vec<String> = Vec::with_capacity(header.len());
        for m in [&ds.x, &ds.z, &ds.w] {
            for v in m.row(i) {
                record.push(v.to_string());
            }
        }
        record.push(ds.a[i].to_string());
        record.push(ds.y[i].to_string());
        wtr.write_record(&record)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Reads a dataset from CSV. With `columns = None` the mapping is inferred
/// from the header ([`infer_mapping`]). Errors name the missing column, or
/// the offending row (1-based, excluding the header) and column for bad
/// cells.
pub fn read_dataset_csv(
    path: &Path,
    columns: Option<&ColumnMapping>,
) -> Result<(ProximalDataset, ColumnMapping)> {
    let mut rdr = csv::Reader::from_path(path)?;
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let mapping = match columns {
        Some(m) => m.clone(),
        None => infer_mapping(&headers)?,
    };
    let index_of = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Config(format!("column `{name}` not found in CSV header")))
    };
    let xi: Vec<usize> = mapping.x.iter().map(|c| index_of(c)).collect::<Result<_>>()?;
    let zi: Vec<usize> = mapping.z.iter().map(|c| index_of(c)).collect::<Result<_>>()?;
    let wi: Vec<usize> = mapping.w.iter().map(|c| index_of(c)).collect::<Result<_>>()?;
    let ai = index_of(&mapping.a)?;
    let yi = index_of(&mapping.y)?;

    let mut x = Vec::new();
    let mut z = Vec::new();
    let mut w = Vec::new();
    let mut a = Vec::new();
    let mut y = Vec::new();
    let mut n = 0usize;
    for (row_idx, record) in rdr.records().enumerate() {
        let row = row_idx + 1;
        let record = record.map_err(|e| Error::Data(format!("row {row}: {e}")))?;
        let cell = |col: usize, name: &str| -> Result<f64> {
            let raw = record.get(col).ok_or_else(|| {
                Error::Data(format!("row {row} is missing column `{name}`"))
            })?;
            raw.trim().parse::<f64>().map_err(|_| {
                Error::Data(format!(
                    "row {row} column `{name}`: cannot parse `{raw}` as a number"
                ))
            })
        };
        for (&col, name) in xi.iter().zip(mapping.x.iter()) {
            x.push(cell(col, name)?);
        }
        for (&col, name) in zi.iter().zip(mapping.z.iter()) {
            z.push(cell(col, name)?);
        }
        for (&col, name) in wi.iter().zip(mapping.w.iter()) {
            w.push(cell(col, name)?);
        }
        let av = cell(ai, &mapping.a)?;
        if av != 0.0 && av != 1.0 {
            return Err(Error::Data(format!(
                "row {row}: treatment column `{}` must be 0 or 1, got {av}",
                mapping.a
            )));
        }
        a.push(av);
        y.push(cell(yi, &mapping.y)?);
        n += 1;
    }
    if n == 0 {
        return Err(Error::Data(format!(
            "{} contains no data rows",
            path.display()
        )));
    }
    let shape = |v: Vec<f64>, cols: usize| {
        Array2::from_shape_vec((n, cols), v).expect("row-major fill")
    };
    let ds = ProximalDataset::new(
        shape(x, xi.len()),
        shape(z, zi.len()),
        shape(w, wi.len()),
        Array1::from_vec(a),
        Array1::from_vec(y),
    )?;
    Ok((ds, mapping))
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

/// One replication's results, or its failure reason.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RepRow {
    pub rep: usize,
    pub seed: u64,
    pub por_ace: Option<f64>,
    pub pipw_ace: Option<f64>,
    pub pdr_ace: Option<f64>,
    pub pdr_se: Option<f64>,
    pub ci_lower: Option<f64>,
    pub ci_upper: Option<f64>,
    pub ci_covers_truth: Option<bool>,
    pub error: Option<String>,
}

/// Aggregate statistics of one estimator over the successful replications.
/// `median_bias` doubles as the boxplot median; quartiles use linear
/// interpolation on the sorted biases (type-7).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MethodAggregate {
    pub method: String,
    pub count: usize,
    pub mean_bias: f64,
    pub median_bias: f64,
    pub sd: f64,
    pub rmse: f64,
    /// Fraction of replications whose 95% CI covers the truth (PDR only).
    pub coverage: Option<f64>,
    pub bias_min: f64,
    pub bias_q1: f64,
    pub bias_q3: f64,
    pub bias_max: f64,
}

/// Full output of a simulation study: the per-replication table and
/// aggregates recomputable from it via [`compute_aggregates`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub scenario: String,
    pub n: usize,
    pub replications: usize,
    pub base_seed: u64,
    pub truth: f64,
    pub ace: AceConfig,
    #[serde(default)]
    pub overrides: BTreeMap<String, ParamValue>,
    pub failed: usize,
    pub aggregates: Vec<MethodAggregate>,
    pub rows: Vec<RepRow>,
}

/// Runs one simulation replication: generates the dataset with
/// `seed = rep_seed` and estimates with a fold partition on an independent
/// substream of `rep_seed` (reusing the generation stream for partitioning
/// would correlate fold membership with the data draws).
pub fn run_replication(
    scenario: Scenario,
    n: usize,
    rep_seed: u64,
    ace: &AceConfig,
    overrides: &BTreeMap<String, ParamValue>,
) -> Result<AceResult> {
    let mut cfg = ScenarioConfig::new(scenario, n, rep_seed);
    cfg.overrides = overrides.clone();
    let ds = generate(&cfg)?;
    let mut ac = ace.clone();
    ac.seed = substream_seed(rep_seed, 1);
    estimate_ace(&ds, &ac)
}

/// Interpolated quantile (type-7) of an ascending-sorted slice.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty() && (0.0..=1.0).contains(&p));
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Recomputes the aggregate table from replication rows; failed rows are
/// excluded. This is the exact function `cmd_simulate` uses, so summaries
/// are reproducible from the per-replication CSV alone.
pub fn compute_aggregates(rows: &[RepRow], truth: f64) -> Vec<MethodAggregate> {
    type AceGetter = fn(&RepRow) -> Option<f64>;
    let methods: [(&str, AceGetter); 3] = [
        ("por", |r| r.por_ace),
        ("pipw", |r| r.pipw_ace),
        ("pdr", |r| r.pdr_ace),
    ];
    methods
        .iter()
        .map(|(name, getter)| {
            let estimates: Vec<f64> = rows.iter().filter_map(getter).collect();
            let mut biases: Vec<f64> = estimates.iter().map(|e| e - truth).collect();
            biases.sort_by(|a, b| a.total_cmp(b));
            let count = biases.len();
            let mean_bias = biases.iter().sum::<f64>() / count.max(1) as f64;
            let rmse = (biases.iter().map(|b| b * b).sum::<f64>() / count.max(1) as f64).sqrt();
            let coverage = if *name == "pdr" {
                let covered: Vec<bool> = rows.iter().filter_map(|r| r.ci_covers_truth).collect();
                if covered.is_empty() {
                    None
                } else {
                    Some(covered.iter().filter(|&&c| c).count() as f64 / covered.len() as f64)
                }
            } else {
                None
            };
            MethodAggregate {
                method: name.to_string(),
                count,
                mean_bias,
                median_bias: quantile_sorted(&biases, 0.5),
                sd: sample_sd(&estimates),
                rmse,
                coverage,
                bias_min: biases.first().copied().unwrap_or(f64::NAN),
                bias_q1: quantile_sorted(&biases, 0.25),
                bias_q3: quantile_sorted(&biases, 0.75),
                bias_max: biases.last().copied().unwrap_or(f64::NAN),
            }
        })
        .collect()
}

/// Runs the simulation study described by `run`: replication `i` uses seed
/// `base_seed + i`. Writes `replications.csv` (the per-replication table)
/// and `summary.json` to the output directory. Individual replication
/// failures are recorded per row; only a fully failed study is an error.
pub fn cmd_simulate(run: &RunConfig) -> Result<SimulationSummary> {
    let scenario = run.scenario()?;
    let n = run.n.unwrap_or(800);
    let replications = run.replications.unwrap_or(100);
    if replications == 0 {
        return Err(Error::Config("replications must be at least 1".to_string()));
    }
    let base_seed = run.seed.unwrap_or(0);
    let ace = run.ace_config();
    let overrides = run.overrides.clone().unwrap_or_default();
    let truth = true_ace(scenario);

    let rows: Vec<RepRow> = (0..replications)
        .into_par_iter()
        .map(|rep| {
            let seed = base_seed.wrapping_add(rep as u64);
            match run_replication(scenario, n, seed, &ace, &overrides) {
                Ok(res) => {
                    let covers = res.pdr_ci.0 <= truth && truth <= res.pdr_ci.1;
                    RepRow {
                        rep,
                        seed,
                        por_ace: Some(res.por.ace),
                        pipw_ace: Some(res.pipw.ace),
                        pdr_ace: Some(res.pdr.ace),
                        pdr_se: Some(res.pdr_se),
                        ci_lower: Some(res.pdr_ci.0),
                        ci_upper: Some(res.pdr_ci.1),
                        ci_covers_truth: Some(covers),
                        error: None,
                    }
                }
                Err(e) => RepRow {
                    rep,
                    seed,
                    por_ace: None,
                    pipw_ace: None,
                    pdr_ace: None,
                    pdr_se: None,
                    ci_lower: None,
                    ci_upper: None,
                    ci_covers_truth: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();

    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    if failed == rows.len() {
        let first = rows[0].error.as_deref().unwrap_or("unknown");
        return Err(Error::Numeric(format!(
            "all {failed} replications failed; first failure: {first}"
        )));
    }

    let summary = SimulationSummary {
        scenario: scenario.name().to_string(),
        n,
        replications,
        base_seed,
        truth,
        ace,
        overrides,
        failed,
        aggregates: compute_aggregates(&rows, truth),
        rows,
    };

    let out = run.out_dir();
    std::fs::create_dir_all(&out)?;
    let mut wtr = csv::Writer::from_path(out.join("replications.csv"))?;
    for row in &summary.rows {
        wtr.serialize(row)?;
    }
    wtr.flush()?;
    write_json(&out.join("summary.json"), &summary)?;
    Ok(summary)
}

// ---------------------------------------------------------------------------
// estimate
// ---------------------------------------------------------------------------

/// `estimate.json` contents: the resolved inputs and the full result.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimateOutput {
    pub data: String,
    pub columns: ColumnMapping,
    pub ace: AceConfig,
    pub result: AceResult,
}

/// Estimates the ACE from the CSV named by the config. Writes
/// `estimate.json` to the output directory and returns its contents.
pub fn cmd_estimate(run: &RunConfig) -> Result<EstimateOutput> {
    let data = run
        .data
        .as_ref()
        .ok_or_else(|| Error::Config("estimate needs a CSV data path".to_string()))?;
    let (ds, columns) = read_dataset_csv(data, run.columns.as_ref())?;
    let ace = run.ace_config();
    let result = estimate_ace(&ds, &ace)?;
    let output = EstimateOutput {
        data: data.display().to_string(),
        columns,
        ace,
        result,
    };
    let out = run.out_dir();
    std::fs::create_dir_all(&out)?;
    write_json(&out.join("estimate.json"), &output)?;
    Ok(output)
}

// ---------------------------------------------------------------------------
// tune
// ---------------------------------------------------------------------------

/// Tuning result for one bridge/arm combination.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BridgeTuning {
    /// `"h"` (outcome bridge) or `"q"` (treatment bridge).
    pub bridge: String,
    pub arm: u8,
    pub tuned: TunedHyperparams,
}

/// `tuning.json` contents.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TuneOutput {
    /// Data source: scenario name, or the CSV path.
    pub source: String,
    pub n: usize,
    pub folds: usize,
    pub seed: u64,
    pub standardize: bool,
    pub grid: HyperGrid,
    pub results: Vec<BridgeTuning>,
}

/// Cross-validates the hyperparameter grid for each bridge (`h`, `q`) and
/// arm (1, 0) — four searches over one shared fold partition. Data come
/// from the config's CSV if `data` is set, otherwise from the configured
/// scenario. Median-multiple bandwidth candidates resolve against the full
/// dataset once, so every fold of a grid point shares one kernel geometry
/// (matching how estimation resolves bandwidths). Writes `tuning.json`.
pub fn cmd_tune(run: &RunConfig) -> Result<TuneOutput> {
    let grid = run.grid.clone().unwrap_or_default();
    grid.validate()?;
    let folds = run.folds.unwrap_or(5);
    let seed = run.seed.unwrap_or(0);
    let standardize = run.standardize.unwrap_or(false);

    let (ds, source) = match &run.data {
        Some(path) => {
            let (ds, _) = read_dataset_csv(path, run.columns.as_ref())?;
            (ds, path.display().to_string())
        }
        None => {
            let scenario = run.scenario()?;
            let n = run.n.unwrap_or(800);
            let mut cfg = ScenarioConfig::new(scenario, n, seed);
            cfg.overrides = run.overrides.clone().unwrap_or_default();
            (generate(&cfg)?, scenario.name().to_string())
        }
    };
    ds.validate()?;
    let work = if standardize { ds.standardized() } else { ds };
    let n = work.n();

    let wx = work.features_wx();
    let zx = work.features_zx();
    let med_wx = median_heuristic(wx.view())?;
    let med_zx = median_heuristic(zx.view())?;
    let resolve = |b: &Bandwidth, med: f64| -> f64 {
        match b {
            Bandwidth::Fixed(v) => *v,
            Bandwidth::MedianMultiple(m) => m * med,
        }
    };

    let mut results = Vec::with_capacity(4);
    for (bridge, arm) in [("h", 1u8), ("h", 0), ("q", 1), ("q", 0)] {
        let target = arm as f64;
        let is_h = bridge == "h";
        let (target_feats, adversary_feats) = if is_h { (&wx, &zx) } else { (&zx, &wx) };
        let (med_t, med_a) = if is_h { (med_wx, med_zx) } else { (med_zx, med_wx) };
        let builder = |rows: &[usize], hp: &HyperPoint| -> Result<MinimaxProblem> {
            let tp = target_feats.select(Axis(0), rows);
            let ap = adversary_feats.select(Axis(0), rows);
            let ind: Array1<f64> = rows
                .iter()
                .map(|&i| if work.a[i] == target { 1.0 } else { 0.0 })
                .collect();
            let offsets = if is_h {
                rows.iter()
                    .zip(ind.iter())
                    .map(|(&i, &d)| d * work.y[i])
                    .collect()
            } else {
                Array1::ones(rows.len())
            };
            Ok(MinimaxProblem {
                target_points: tp,
                adversary_points: ap,
                weights: ind.mapv(|v| -v),
                offsets,
                target_kernel: KernelConfig::gaussian(resolve(&hp.bandwidth_target, med_t))?,
                adversary_kernel: KernelConfig::gaussian(resolve(&hp.bandwidth_adversary, med_a))?,
                lambda_target: hp.lambda_target,
                lambda_adversary: hp.lambda_adversary,
            })
        };
        let tuned = tune(&builder, n, &grid, folds, seed)
            .map_err(|e| Error::Tuning(format!("{bridge}-bridge, arm {arm}: {e}")))?;
        results.push(BridgeTuning {
            bridge: bridge.to_string(),
            arm,
            tuned,
        });
    }

    let output = TuneOutput {
        source,
        n,
        folds,
        seed,
        standardize,
        grid,
        results,
    };
    let out = run.out_dir();
    std::fs::create_dir_all(&out)?;
    write_json(&out.join("tuning.json"), &output)?;
    Ok(output)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}
