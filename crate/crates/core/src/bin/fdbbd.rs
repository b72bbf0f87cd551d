use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use fdbbd_core::harness::{
    emit_plots, run_experiment, run_oracle_suite, write_oracle_report, Experiment, ExperimentConfig,
    OracleSuite,
};

#[derive(Parser)]
#[command(name = "fdbbd", version, about = "Full-duplex blind deconvolution key agreement experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo experiment and write CSV/JSON results.
    Run {
        /// sparsity_sweep, noise_sweep, gamma_attack, channel_noise_attack,
        /// protocol_demo or oracle_suite
        experiment: Experiment,
        /// JSON experiment config; flags below override it.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render SVG plots from a trial CSV.
    Plot { csv: PathBuf },
    /// Run the brute-force verification suite; exits 2 on any violation.
    Oracle {
        #[arg(long, value_enum, default_value = "full")]
        suite: SuiteArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "results")]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    Quick,
    Full,
}

fn oracle(suite: OracleSuite, seed: u64, out: &PathBuf) -> Result<ExitCode, Box<dyn std::error::Error>> {
    let report = run_oracle_suite(suite, seed)?;
    for c in &report.checks {
        println!(
            "{} {:<44} value={:.6e} threshold={:.6e}  {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.value,
            c.threshold,
            c.detail
        );
    }
    for f in write_oracle_report(&report, out)? {
        eprintln!("wrote {}", f.display());
    }
    Ok(if report.passed { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn run(cli: Cli) -> Result<ExitCode, Box<dyn std::error::Error>> {
    match cli.command {
        Command::Run {
            experiment,
            config,
            seed,
            trials,
            out,
        } => {
            let mut cfg = match config {
                Some(path) => ExperimentConfig::from_json(&std::fs::read_to_string(path)?)?,
                None => ExperimentConfig::new(experiment),
            };
            if cfg.experiment != experiment {
                return Err(format!("config is for {}, not {experiment}", cfg.experiment).into());
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(t) = trials {
                cfg.trials = t;
            }
            if let Some(o) = out {
                cfg.output_dir = o;
            }
            cfg.validate()?;
            if experiment == Experiment::OracleSuite {
                return oracle(OracleSuite::Full, cfg.seed, &cfg.output_dir);
            }
            let result = run_experiment(&cfg)?;
            for s in &result.summary {
                println!(
                    "grid {:>3}: n={} mu={} k={} s={} snr={} gamma={} dev={} mode={}  rmse={}  success={:.3}  failures={:.3}",
                    s.grid_index,
                    s.n,
                    s.mu,
                    s.k,
                    s.s,
                    s.snr_db,
                    s.gamma.map_or("-".into(), |g| g.to_string()),
                    s.deviation_snr_db.map_or("-".into(), |d| d.to_string()),
                    s.mode.as_deref().unwrap_or("-"),
                    s.mean_rmse.map_or("-".into(), |m| format!("{m:.4}")),
                    s.success_rate,
                    s.failure_rate
                );
            }
            for f in &result.files {
                eprintln!("wrote {}", f.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Plot { csv } => {
            for f in emit_plots(&csv)? {
                println!("{}", f.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Oracle { suite, seed, out } => {
            let suite = match suite {
                SuiteArg::Quick => OracleSuite::Quick,
                SuiteArg::Full => OracleSuite::Full,
            };
            oracle(suite, seed, &out)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
