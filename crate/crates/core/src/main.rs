use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};

use rlfd_core::checkpoint::Checkpoint;
use rlfd_core::harness::{self, ExperimentConfig};
use rlfd_core::selftest;
use rlfd_core::vessel::RewardSign;

#[derive(Parser)]
#[command(name = "rlfd", about = "Vessel berthing with a model-predictive expert")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train one run from a key=value config file.
    Train {
        #[arg(long)]
        config: PathBuf,
    },
    /// Roll out a checkpoint's deterministic policy and write its trajectory.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        case: u32,
        #[arg(long, default_value = "negated")]
        sign: String,
        /// Trajectory CSV path; defaults next to the checkpoint.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tabulate training and test returns of finished runs.
    Compare {
        #[arg(long, num_args = 1.., required = true)]
        runs: Vec<PathBuf>,
    },
    /// Run the built-in numerical checks.
    Selftest,
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    match cli.cmd {
        Cmd::Train { config } => {
            let text = fs::read_to_string(&config).with_context(|| format!("reading {}", config.display()))?;
            let cfg = ExperimentConfig::parse(&text)?;
            let out = harness::train_with(&cfg, &harness::output_root(), |log| {
                eprintln!("{}", harness::curve_row(log));
            })?;
            println!("run_dir={}", out.run_dir.display());
            println!("test_return={}", harness::fmt_f64(out.final_eval.ret));
            println!("berthed={}", out.final_eval.berthed);
            println!("success={}", out.final_eval.success);
            Ok(true)
        }
        Cmd::Evaluate {
            checkpoint,
            case,
            sign,
            out,
        } => {
            let Some(sign) = RewardSign::parse(&sign) else {
                bail!("unknown sign mode {sign:?}");
            };
            let cp = Checkpoint::load(&checkpoint)?;
            let res = harness::evaluate(&cp, case, sign)?;
            let path = out.unwrap_or_else(|| {
                checkpoint
                    .parent()
                    .unwrap_or_else(|| std::path::Path::new("."))
                    .join(format!("eval_case{case}.csv"))
            });
            fs::write(&path, &res.trajectory_csv)?;
            println!("trajectory={}", path.display());
            println!("return={}", harness::fmt_f64(res.ret));
            println!("steps={}", res.steps);
            println!("berthed={}", res.berthed);
            println!("success={}", res.success);
            Ok(true)
        }
        Cmd::Compare { runs } => {
            print!("{}", harness::compare(&runs)?);
            Ok(true)
        }
        Cmd::Selftest => {
            let mut ok = true;
            for c in selftest::run_all() {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
                ok &= c.passed;
            }
            Ok(ok)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
