//! Monte Carlo experiment runner: grids of seeded trials, flat CSV output
//! with a JSON sidecar, summaries, SVG plots and the oracle suite.

mod config;
mod experiments;
mod oracle;
mod plot;
mod rows;

pub use config::{Experiment, ExperimentConfig, GridPoint, Grids};
pub use experiments::{compute_rows, run_experiment, run_trial, ExperimentOutput};
pub use oracle::{run_oracle_suite, write_oracle_report, OracleCheck, OracleReport, OracleSuite};
pub use plot::emit_plots;
pub use rows::{read_rows, summarize, SummaryRow, TimingRow, TrialRow};
