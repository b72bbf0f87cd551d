use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use super::config::{Experiment, ExperimentConfig, GridPoint};
use super::rows::{summarize, write_csv, SummaryRow, TimingRow, TrialRow};
use crate::adversary::{eve_attack, eve_observe, varsigma_for_snr, AttackTruth, ChannelMode, DeviationModel, EveParams};
use crate::error::{Error, Result};
use crate::keygen::{exchange_with, ideal_secret, normalized_rmse, quantize, run_protocol, ProtocolConfig};
use crate::lifting::MeasurementOp;
use crate::rng::{derive_seed, seeded};
use crate::signals::{gen_channel, gen_codebook_with, gen_sparse_signal};

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub rows: Vec<TrialRow>,
    pub timings: Vec<TimingRow>,
    pub summary: Vec<SummaryRow>,
    /// Files written (trial CSV first).
    pub files: Vec<PathBuf>,
}

#[derive(Serialize)]
struct Sidecar<'a> {
    experiment: &'a str,
    seed: u64,
    trials: usize,
    grid_points: usize,
    rows: usize,
    code_version: &'static str,
    config: &'a ExperimentConfig,
}

// numerical failures are recorded per trial; anything else aborts the run
fn is_numerical(e: &Error) -> bool {
    match e {
        Error::Divergence { .. } | Error::Factorization(_) | Error::DegenerateSecret => true,
        Error::Round { source, .. } => is_numerical(source),
        _ => false,
    }
}

fn blank_row(experiment: Experiment, p: &GridPoint, grid_index: usize, trial: usize, seed: u64) -> TrialRow {
    TrialRow {
        experiment: experiment.name().to_string(),
        grid_index,
        trial,
        seed,
        n: p.n,
        mu: p.mu,
        k: p.k,
        s: p.s,
        snr_db: p.snr_db,
        gamma: p.gamma,
        deviation_snr_db: p.deviation_snr_db,
        mode: p.mode.map(|m| serde_json::to_value(m).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default()),
        rmse: None,
        rmse_bob: None,
        success: false,
        support_correct: None,
        residual: None,
        iterations: None,
        diverged: false,
        error: None,
    }
}

fn protocol_config(p: &GridPoint) -> ProtocolConfig {
    let mut cfg = ProtocolConfig::new(p.n, p.mu, p.k, p.s);
    cfg.snr_db = p.snr_db;
    cfg.rounds = p.rounds;
    cfg
}

// one exchange with fresh codebook, channel and signals
fn sweep_trial(p: &GridPoint, seed: u64, row: &mut TrialRow) -> Result<()> {
    let cfg = protocol_config(p);
    cfg.validate()?;
    let mut rng = seeded(seed);
    let op = MeasurementOp::new(gen_codebook_with(p.mu, p.n, cfg.codebook, &mut rng)?);
    let h = gen_channel(p.mu, p.s, &mut rng)?;
    let a = gen_sparse_signal(p.n, p.k, cfg.value_dist, &mut rng)?;
    let b = gen_sparse_signal(p.n, p.k, cfg.value_dist, &mut rng)?;
    let out = exchange_with(&op, &h, a, b, &cfg, &mut rng)?;
    row.residual = Some(out.alice_fit.residual.max(out.bob_fit.residual));
    row.iterations = Some(out.alice_fit.iterations.max(out.bob_fit.iterations));
    row.rmse = Some(normalized_rmse(&out.alice.c, &out.bob.c)?);
    let qa = quantize(&crate::keygen::normalize_secret(&out.alice.c)?, &cfg.quantizer)?;
    let qb = quantize(&crate::keygen::normalize_secret(&out.bob.c)?, &cfg.quantizer)?;
    row.success = qa.bits == qb.bits;
    Ok(())
}

fn attack_trial(p: &GridPoint, seed: u64, row: &mut TrialRow) -> Result<()> {
    let cfg = protocol_config(p);
    cfg.validate()?;
    let gamma = p.gamma.ok_or_else(|| Error::param("attack needs gamma"))?;
    let mut rng = seeded(seed);
    let op = MeasurementOp::new(gen_codebook_with(p.mu, p.n, cfg.codebook, &mut rng)?);
    let h = gen_channel(p.mu, p.s, &mut rng)?;
    let a = gen_sparse_signal(p.n, p.k, cfg.value_dist, &mut rng)?;
    let b = gen_sparse_signal(p.n, p.k, cfg.value_dist, &mut rng)?;
    let legit = exchange_with(&op, &h, a.clone(), b.clone(), &cfg, &mut rng)?;

    let params = EveParams {
        gamma,
        varsigma: p.deviation_snr_db.map(|d| varsigma_for_snr(&h, d)).unwrap_or(0.0),
        snr_db: p.snr_db,
        channel_mode: p.mode.unwrap_or(ChannelMode::Identical),
        deviation: DeviationModel::Proportional,
    };
    let y = eve_observe(&h, &op, &a, &b, &params, &mut rng)?;
    let truth = AttackTruth {
        ideal: ideal_secret(&h.dense(), &a.dense(), &b.dense()),
        beta_a: a,
        beta_b: b,
        alice: legit.alice.c,
        bob: legit.bob.c,
    };
    let rep = eve_attack(&y, &op, p.s, p.k, gamma, &cfg.solver(), &truth)?;
    row.rmse = Some(rep.rmse_to_alice);
    row.rmse_bob = Some(rep.rmse_to_bob);
    row.success = rep.success;
    row.support_correct = Some(rep.support_correct);
    row.residual = Some(rep.residual);
    row.iterations = Some(rep.iterations);
    Ok(())
}

fn demo_trial(p: &GridPoint, seed: u64, row: &mut TrialRow) -> Result<()> {
    let out = run_protocol(&protocol_config(p), seed)?;
    let r = &out.per_round_rmse;
    row.rmse = Some(r.iter().sum::<f64>() / r.len() as f64);
    row.success = out.keys_agree;
    row.residual = out.transcripts.iter().map(|t| t.alice_residual.max(t.bob_residual)).reduce(f64::max);
    row.iterations = out.transcripts.iter().map(|t| t.alice_iterations.max(t.bob_iterations)).max();
    Ok(())
}

/// Runs a single `(grid point, trial)` cell with its derived seed.
pub fn run_trial(experiment: Experiment, p: &GridPoint, master: u64, grid_index: usize, trial: usize) -> Result<TrialRow> {
    let seed = derive_seed(master, grid_index as u64, trial as u64);
    let mut row = blank_row(experiment, p, grid_index, trial, seed);
    let res = match experiment {
        Experiment::SparsitySweep | Experiment::NoiseSweep => sweep_trial(p, seed, &mut row),
        Experiment::GammaAttack | Experiment::ChannelNoiseAttack => attack_trial(p, seed, &mut row),
        Experiment::ProtocolDemo => demo_trial(p, seed, &mut row),
        Experiment::OracleSuite => return Err(Error::param("the oracle suite has no trial grid")),
    };
    match res {
        Ok(()) => Ok(row),
        Err(e) if is_numerical(&e) => {
            row.diverged = true;
            row.success = false;
            row.rmse = None;
            row.rmse_bob = None;
            row.error = Some(e.to_string());
            Ok(row)
        }
        Err(e) => Err(e),
    }
}

/// All trials of a grid experiment, in parallel, sorted by
/// `(grid_index, trial)`. Nothing is written.
pub fn compute_rows(cfg: &ExperimentConfig) -> Result<(Vec<TrialRow>, Vec<TimingRow>)> {
    cfg.validate()?;
    let points = cfg.points()?;
    let cells: Vec<(usize, usize)> = (0..points.len())
        .flat_map(|g| (0..cfg.trials).map(move |t| (g, t)))
        .collect();
    let mut results = cells
        .par_iter()
        .map(|&(g, t)| {
            let start = Instant::now();
            let row = run_trial(cfg.experiment, &points[g], cfg.seed, g, t)?;
            let runtime_ms = start.elapsed().as_secs_f64() * 1e3;
            Ok((row, TimingRow { grid_index: g, trial: t, runtime_ms }))
        })
        .collect::<Result<Vec<_>>>()?;
    results.sort_by_key(|(r, _)| (r.grid_index, r.trial));
    Ok(results.into_iter().unzip())
}

/// Runs the experiment and writes `<name>.csv`, `<name>_summary.csv`,
/// `<name>_timing.csv` and the `<name>.json` sidecar into `output_dir`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    if cfg.experiment == Experiment::OracleSuite {
        return Err(Error::param("use run_oracle_suite for the oracle suite"));
    }
    let (rows, timings) = compute_rows(cfg)?;
    let summary = summarize(&rows);
    std::fs::create_dir_all(&cfg.output_dir)?;
    let name = cfg.experiment.name();
    let dir = &cfg.output_dir;
    let files = vec![
        dir.join(format!("{name}.csv")),
        dir.join(format!("{name}_summary.csv")),
        dir.join(format!("{name}_timing.csv")),
        dir.join(format!("{name}.json")),
    ];
    write_csv(&files[0], &rows)?;
    write_csv(&files[1], &summary)?;
    write_csv(&files[2], &timings)?;
    let sidecar = Sidecar {
        experiment: name,
        seed: cfg.seed,
        trials: cfg.trials,
        grid_points: summary.len(),
        rows: rows.len(),
        code_version: env!("CARGO_PKG_VERSION"),
        config: cfg,
    };
    std::fs::write(&files[3], serde_json::to_string_pretty(&sidecar)? + "\n")?;
    Ok(ExperimentOutput {
        rows,
        timings,
        summary,
        files,
    })
}
