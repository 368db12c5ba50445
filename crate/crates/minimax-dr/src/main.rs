use clap::Parser;
use minimax_dr::cli::{self, Cli, Command};
use minimax_dr::Result;

// The library links LAPACK/BLAS through ndarray-linalg's backend feature;
// referencing the crate here keeps the linker from dropping it for the
// binary target.
extern crate ndarray_linalg;

fn main() {
    let args = Cli::parse();
    match run(&args) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}

fn run(args: &Cli) -> Result<()> {
    cli::init_workers()?;
    match &args.command {
        Command::Simulate(common) => {
            let run = common.resolve()?;
            let summary = cli::cmd_simulate(&run)?;
            let pdr = summary
                .aggregates
                .iter()
                .find(|m| m.method == "pdr")
                .expect("aggregates always include pdr");
            println!(
                "scenario {} | n = {} | replications = {} ({} failed)",
                summary.scenario, summary.n, summary.replications, summary.failed
            );
            println!(
                "pdr: mean bias {:+.4}, sd {:.4}, rmse {:.4}{}",
                pdr.mean_bias,
                pdr.sd,
                pdr.rmse,
                pdr.coverage
                    .map(|c| format!(", 95% CI coverage {c:.3}"))
                    .unwrap_or_default()
            );
        }
        Command::Estimate(est) => {
            let mut run = est.common.resolve()?;
            if let Some(path) = &est.data {
                run.data = Some(path.clone());
            }
            let output = cli::cmd_estimate(&run)?;
            let r = &output.result;
            println!("por:  {:+.6}", r.por.ace);
            println!("pipw: {:+.6}", r.pipw.ace);
            println!(
                "pdr:  {:+.6}  (se {:.6}, 95% CI [{:+.6}, {:+.6}])",
                r.pdr.ace, r.pdr_se, r.pdr_ci.0, r.pdr_ci.1
            );
        }
        Command::Tune(common) => {
            let run = common.resolve()?;
            let output = cli::cmd_tune(&run)?;
            for b in &output.results {
                println!(
                    "{}-bridge arm {}: lambda_target {:e}, lambda_adversary {:e}, \
                     bandwidth_target {:.4}, bandwidth_adversary {:.4} (score {:.6e})",
                    b.bridge,
                    b.arm,
                    b.tuned.point.lambda_target,
                    b.tuned.point.lambda_adversary,
                    b.tuned.resolved_bandwidth_target,
                    b.tuned.resolved_bandwidth_adversary,
                    b.tuned.score
                );
            }
        }
    }
    Ok(())
}
